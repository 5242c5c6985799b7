//! Tip oscillation after a 40 g load is released, with its settling report.

use softgrip::chain::{simulate_release, GripperModel};
use softgrip::metrics::{analyze, SettlingOptions};

fn main() {
    let model = GripperModel::default();
    let series = simulate_release(&model, 0.04, 2.0, 1000.0).expect("release");
    let report = analyze(&series, &SettlingOptions::default()).expect("long enough");
    println!("tip starts at {:.4} m and ends at {:.4} m", series.values[0], report.final_value);
    println!("{}", report.to_json());
}
