//! Recovers spring constants from synthetic static-load observations.

use softgrip::calibration::{run_campaign, CalibrationCampaign, Stage};
use softgrip::chain::ParamTable;

fn main() {
    let result = run_campaign(&CalibrationCampaign::protocol(Stage::Spring, 1)).expect("campaign");
    let truth = ParamTable::reference().k();
    for (j, (k, t)) in result.best.iter().zip(&truth).enumerate() {
        println!("k{j}: {k:.5} (reference {t:.5}) N m/rad");
    }
    println!("training fitness {:.3e} rad^2", result.train_fitness);
    if let Some(v) = result.validation {
        println!("validation fitness {:.3e} rad^2", v.mean_fitness);
    }
}
