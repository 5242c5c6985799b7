//! Recovers torque-per-pressure coefficients from a synthetic force sweep.

use softgrip::calibration::{run_campaign, CalibrationCampaign, Stage};

fn main() {
    let result = run_campaign(&CalibrationCampaign::protocol(Stage::Torque, 2)).expect("campaign");
    let values: Vec<String> = result.best.iter().map(|v| format!("{v:.4e}")).collect();
    println!("alpha = [{}]", values.join(", "));
    println!("mean force error {:.3e} N", result.train_fitness);
    if let Some(v) = result.validation {
        for row in &v.rows {
            println!("{}: simulated {:.4} N, observed {:.4} N", row.condition, row.simulated, row.observed);
        }
    }
}
