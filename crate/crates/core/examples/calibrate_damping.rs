//! Recovers damping constants from synthetic release experiments.
//!
//! The full protocol simulates thousands of releases and takes a few
//! minutes; pass a smaller iteration count to try it quickly:
//! `cargo run --release --example calibrate_damping 20`

use softgrip::calibration::{run_campaign, CalibrationCampaign, Stage};

fn main() {
    let mut campaign = CalibrationCampaign::protocol(Stage::Damping, 3);
    if let Some(n) = std::env::args().nth(1) {
        campaign.pso.iterations = n.parse().expect("iteration count");
    }
    let result = run_campaign(&campaign).expect("campaign");
    let values: Vec<String> = result.best.iter().map(|v| format!("{v:.3e}")).collect();
    println!("c = [{}]", values.join(", "));
    println!("training fitness {:.3e}", result.train_fitness);
    print!("{}", result.train_report.to_csv());
}
