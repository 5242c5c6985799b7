//! Equilibrium droop of the finger under tip loads of 0 to 70 g.

use softgrip::chain::{static_equilibrium, tip_position, GripperModel, LoadCondition};

fn main() {
    let model = GripperModel::default();
    for grams in [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0] {
        let theta = static_equilibrium(&model, &LoadCondition::tip_mass(grams * 1e-3)).expect("equilibrium");
        let tip = tip_position(&model, &theta).unwrap();
        let total: f64 = theta.iter().sum();
        println!("{grams:4.0} g: tip ({:.4}, {:.4}) m, total bend {total:.4} rad", tip[0], tip[1]);
    }
}
