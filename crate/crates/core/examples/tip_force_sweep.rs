//! Blocked tip force against a scale over 0 to 100 kPa.

use softgrip::chain::{GripperModel, TipForceProbe};

fn main() {
    let probe = TipForceProbe::new(&GripperModel::default()).expect("unloaded rest pose");
    println!("pressure_kpa,force_n");
    for kpa in (0..=100).step_by(10) {
        let f = probe.measure(kpa as f64 * 1e3).expect("contact solution");
        println!("{kpa},{:.5}", f.force);
    }
}
