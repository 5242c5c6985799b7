use super::dynamics::{SimState, Simulator};
use super::statics::static_equilibrium;
use super::{ChainError, GripperModel, LoadCondition};
use crate::metrics::TimeSeries;

/// Tip height after a tip load is removed instantaneously.
///
/// The chain starts at rest in its loaded equilibrium; the first sample is
/// taken at release. The model time step is shortened if needed so that it
/// divides the sample period.
pub fn simulate_release(
    model: &GripperModel,
    initial_load_mass: f64,
    duration: f64,
    sample_rate: f64,
) -> Result<TimeSeries, ChainError> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(ChainError::InvalidArgument(format!("duration {duration} s")));
    }
    if !(100.0..=10_000.0).contains(&sample_rate) {
        return Err(ChainError::InvalidArgument(format!(
            "sample rate {sample_rate} Hz outside [100, 10000]"
        )));
    }
    let theta = static_equilibrium(model, &LoadCondition::tip_mass(initial_load_mass))?;
    let sim = Simulator::new(model, LoadCondition::unloaded())?;
    let period = 1.0 / sample_rate;
    let substeps = (period / model.integrator.dt - 1e-9).ceil().max(1.0) as usize;
    let h = period / substeps as f64;
    super::check_dt(h)?;

    let n_samples = (duration * sample_rate + 1e-9).floor() as usize + 1;
    let mut state = SimState::at_rest(theta);
    let mut values = Vec::with_capacity(n_samples);
    values.push(sim.tip(&state.theta)[1]);
    for _ in 1..n_samples {
        for _ in 0..substeps {
            sim.advance(&mut state, h)?;
        }
        values.push(sim.tip(&state.theta)[1]);
    }
    Ok(TimeSeries::new(sample_rate, values, 0.0).expect("finite samples at a valid rate"))
}
