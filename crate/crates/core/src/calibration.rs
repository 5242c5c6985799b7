//! Spring, damping and torque identification.
//!
//! Each stage fits one 7-vector (k, c or α) with the swarm optimizer by
//! simulating the stage's experiments and scoring them against observations.
//! Stages run in order: damping needs calibrated springs, torque needs both.

use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{
    simulate_release, static_equilibrium, ChainError, GripperModel, LoadCondition, ParamTable,
    TipForceProbe,
};
use crate::metrics::{analyze, MetricsError, SettlingOptions};
use crate::pso::{optimize, parameter_boxplots, BoxplotRow, ParticleRecord, PsoConfig, PsoError};

/// Tip loads of the spring training set (g).
pub const TRAIN_WEIGHTS_G: [f64; 3] = [0.0, 20.0, 40.0];
/// Tip loads held out for validation (g).
pub const VALIDATION_WEIGHTS_G: [f64; 3] = [30.0, 50.0, 70.0];
/// Loads released in the damping experiments (g).
pub const DAMPING_WEIGHTS_G: [f64; 2] = [20.0, 40.0];
/// Length of each simulated release (s).
pub const RELEASE_DURATION: f64 = 2.0;
/// Largest tip mass an experiment may use (kg).
pub const MAX_EXPERIMENT_MASS: f64 = 0.1;
/// Fitness given to parameter sets the model cannot represent.
pub const PENALTY_FITNESS: f64 = 1e6;

/// Actuation grid, 0 to 100 kPa in 10 kPa steps (kPa).
pub fn pressure_grid_kpa() -> Vec<f64> {
    (0..=10).map(|i| 10.0 * i as f64).collect()
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Pso(#[from] PsoError),
    #[error("stage order: {0}")]
    StageOrder(String),
    #[error("invalid campaign: {0}")]
    Invalid(String),
    #[error("experiment {index}: {message}")]
    Mismatch { index: usize, message: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("campaign JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Spring,
    Damping,
    Torque,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Spring => "spring",
            Stage::Damping => "damping",
            Stage::Torque => "torque",
        }
    }

    /// Search box of the stage's parameter, one entry per joint.
    pub fn bounds(self, n_joints: usize) -> Vec<[f64; 2]> {
        let b = match self {
            Stage::Spring => [0.01, 1.0],
            Stage::Damping => [1e-5, 5e-3],
            Stage::Torque => [1e-8, 2e-6],
        };
        vec![b; n_joints]
    }

    fn experiment(self) -> &'static str {
        match self {
            Stage::Spring => "static",
            Stage::Damping => "release",
            Stage::Torque => "actuation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Tip mass (kg) hung on the finger at rest.
    StaticLoad { tip_mass: f64 },
    /// Tip mass (kg) removed at t = 0, observed for `duration` s.
    Release { initial_mass: f64, duration: f64 },
    /// Pressure (Pa) pressing the tip onto the scale.
    Actuation { pressure: f64 },
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::StaticLoad { .. } => "static",
            ExperimentKind::Release { .. } => "release",
            ExperimentKind::Actuation { .. } => "actuation",
        }
    }

    /// Human-scale condition label such as `40 g` or `50 kPa`.
    pub fn condition(&self) -> String {
        match *self {
            ExperimentKind::StaticLoad { tip_mass } => format!("{} g", tip_mass * 1e3),
            ExperimentKind::Release { initial_mass, .. } => format!("{} g", initial_mass * 1e3),
            ExperimentKind::Actuation { pressure } => format!("{} kPa", pressure * 1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub kind: ExperimentKind,
    #[serde(default = "one")]
    pub repetitions: usize,
}

fn one() -> usize {
    1
}

impl ExperimentSpec {
    pub fn static_load(tip_mass: f64) -> Self {
        Self {
            kind: ExperimentKind::StaticLoad { tip_mass },
            repetitions: 1,
        }
    }

    pub fn release(initial_mass: f64, duration: f64) -> Self {
        Self {
            kind: ExperimentKind::Release {
                initial_mass,
                duration,
            },
            repetitions: 1,
        }
    }

    pub fn actuation(pressure: f64) -> Self {
        Self {
            kind: ExperimentKind::Actuation { pressure },
            repetitions: 1,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let mass_ok = |m: f64| (0.0..=MAX_EXPERIMENT_MASS).contains(&m);
        match self.kind {
            ExperimentKind::StaticLoad { tip_mass } if !mass_ok(tip_mass) => {
                Err(format!("tip mass {tip_mass} kg outside [0, 0.1]"))
            }
            ExperimentKind::Release { initial_mass, .. } if !mass_ok(initial_mass) => {
                Err(format!("initial mass {initial_mass} kg outside [0, 0.1]"))
            }
            ExperimentKind::Release { duration, .. } if !(duration > 0.0) => {
                Err(format!("duration {duration} s"))
            }
            ExperimentKind::Actuation { pressure }
                if !(0.0..=LoadCondition::MAX_PRESSURE).contains(&pressure) =>
            {
                Err(format!("pressure {pressure} Pa outside [0, 1e5]"))
            }
            _ if self.repetitions == 0 => Err("zero repetitions".into()),
            _ => Ok(()),
        }
    }
}

/// Measured outcome of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    JointAngles { theta: Vec<f64> },
    SettlingData { settling_time: f64, overshoots: usize },
    TipForce { force: f64 },
}

impl Payload {
    fn matches(&self, kind: &ExperimentKind) -> bool {
        matches!(
            (self, kind),
            (Payload::JointAngles { .. }, ExperimentKind::StaticLoad { .. })
                | (Payload::SettlingData { .. }, ExperimentKind::Release { .. })
                | (Payload::TipForce { .. }, ExperimentKind::Actuation { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    #[serde(flatten)]
    pub payload: Payload,
    pub source: Source,
}

/// An experiment together with what was observed, if anything yet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub spec: ExperimentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

/// Mean squared joint-angle error.
pub fn spring_fitness(sim: &[f64], real: &[f64]) -> Result<f64, CalibrationError> {
    if sim.len() != real.len() || sim.is_empty() {
        return Err(CalibrationError::Invalid(format!(
            "angle vectors of length {} and {}",
            sim.len(),
            real.len()
        )));
    }
    Ok(sim.iter().zip(real).map(|(s, r)| (s - r).powi(2)).sum::<f64>() / sim.len() as f64)
}

/// Settling-time gap scaled by one plus the overshoot-count gap.
///
/// Equal settling times give zero whatever the overshoot counts.
pub fn damping_fitness(sim_ts: f64, sim_no: usize, real_ts: f64, real_no: usize) -> f64 {
    (sim_ts - real_ts).abs() * (1.0 + sim_no.abs_diff(real_no) as f64)
}

/// [`damping_fitness`] plus `weight` seconds per overshoot of mismatch, so that count
/// errors stay visible when the settling times agree.
pub fn damping_fitness_regularized(
    sim_ts: f64,
    sim_no: usize,
    real_ts: f64,
    real_no: usize,
    weight: f64,
) -> f64 {
    damping_fitness(sim_ts, sim_no, real_ts, real_no) + weight * sim_no.abs_diff(real_no) as f64
}

/// Absolute tip force gap.
pub fn torque_fitness(sim_force: f64, real_force: f64) -> f64 {
    (sim_force - real_force).abs()
}

/// How simulated releases are sampled and scored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    #[serde(default)]
    pub settling: SettlingOptions,
    /// Per-overshoot weight of the regularized damping fitness; `None`
    /// scores with the plain [`damping_fitness`].
    #[serde(default)]
    pub overshoot_weight: Option<f64>,
}

fn default_rate() -> f64 {
    1000.0
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            sample_rate: default_rate(),
            settling: SettlingOptions::default(),
            overshoot_weight: None,
        }
    }
}

impl EvalSettings {
    /// Fitness of one simulated payload against its observation.
    pub fn score(&self, sim: &Payload, real: &Payload) -> Result<f64, CalibrationError> {
        match (sim, real) {
            (Payload::JointAngles { theta: s }, Payload::JointAngles { theta: r }) => {
                spring_fitness(s, r)
            }
            (
                Payload::SettlingData {
                    settling_time: st,
                    overshoots: sn,
                },
                Payload::SettlingData {
                    settling_time: rt,
                    overshoots: rn,
                },
            ) => Ok(match self.overshoot_weight {
                Some(w) => damping_fitness_regularized(*st, *sn, *rt, *rn, w),
                None => damping_fitness(*st, *sn, *rt, *rn),
            }),
            (Payload::TipForce { force: s }, Payload::TipForce { force: r }) => {
                Ok(torque_fitness(*s, *r))
            }
            _ => Err(CalibrationError::Invalid("payload kinds differ".into())),
        }
    }
}

/// Runs every experiment on `model` in order.
pub fn simulate_experiments(
    model: &GripperModel,
    specs: &[ExperimentSpec],
    settings: &EvalSettings,
) -> Result<Vec<Payload>, CalibrationError> {
    let mut probe: Option<TipForceProbe> = None;
    let mut out = Vec::with_capacity(specs.len());
    for (index, spec) in specs.iter().enumerate() {
        spec.validate()
            .map_err(|message| CalibrationError::Mismatch { index, message })?;
        let payload = match spec.kind {
            ExperimentKind::StaticLoad { tip_mass } => Payload::JointAngles {
                theta: static_equilibrium(model, &LoadCondition::tip_mass(tip_mass))?,
            },
            ExperimentKind::Release {
                initial_mass,
                duration,
            } => {
                let series = simulate_release(model, initial_mass, duration, settings.sample_rate)?;
                let report = analyze(&series, &settings.settling)?;
                Payload::SettlingData {
                    settling_time: report.settling_time,
                    overshoots: report.overshoot_count,
                }
            }
            ExperimentKind::Actuation { pressure } => {
                if probe.is_none() {
                    probe = Some(TipForceProbe::new(model)?);
                }
                Payload::TipForce {
                    force: probe.as_ref().unwrap().measure(pressure)?.force,
                }
            }
        };
        out.push(payload);
    }
    Ok(out)
}

/// Standard deviations of the additive Gaussian measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    /// Joint angle noise (rad).
    pub angle: f64,
    /// Settling time noise (s).
    pub settling_time: f64,
    /// Tip force noise (N).
    pub force: f64,
}

impl NoiseLevels {
    pub fn none() -> Self {
        Self {
            angle: 0.0,
            settling_time: 0.0,
            force: 0.0,
        }
    }

    fn is_zero(&self) -> bool {
        self.angle == 0.0 && self.settling_time == 0.0 && self.force == 0.0
    }
}

impl Default for NoiseLevels {
    fn default() -> Self {
        Self {
            angle: 0.005,
            settling_time: 0.005,
            force: 0.02,
        }
    }
}

/// Simulated observations of `specs` on `model`.
///
/// With noise, each repetition draws independent noise and the observation
/// is their mean; overshoot counts are left exact. Settling times and forces
/// are kept non-negative.
pub fn synthesize_observations(
    model: &GripperModel,
    specs: &[ExperimentSpec],
    noise: &NoiseLevels,
    seed: u64,
    settings: &EvalSettings,
) -> Result<Vec<Observation>, CalibrationError> {
    let clean = simulate_experiments(model, specs, settings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |sd: f64, reps: usize| -> f64 {
        if sd == 0.0 {
            return 0.0;
        }
        let normal = Normal::new(0.0, sd).expect("finite positive deviation");
        (0..reps).map(|_| normal.sample(&mut rng)).sum::<f64>() / reps as f64
    };
    let noisy = !noise.is_zero();
    Ok(clean
        .into_iter()
        .zip(specs)
        .map(|(payload, spec)| {
            let reps = spec.repetitions;
            let payload = match payload {
                p if !noisy => p,
                Payload::JointAngles { theta } => Payload::JointAngles {
                    theta: theta.iter().map(|t| t + draw(noise.angle, reps)).collect(),
                },
                Payload::SettlingData {
                    settling_time,
                    overshoots,
                } => Payload::SettlingData {
                    settling_time: (settling_time + draw(noise.settling_time, reps)).max(0.0),
                    overshoots,
                },
                Payload::TipForce { force } => Payload::TipForce {
                    force: (force + draw(noise.force, reps)).max(0.0),
                },
            };
            Observation {
                payload,
                source: Source::Synthetic,
            }
        })
        .collect())
}

/// One compared quantity of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub spec: usize,
    pub kind: String,
    pub condition: String,
    pub quantity: String,
    pub simulated: f64,
    pub observed: f64,
    /// Fitness of the whole experiment this row belongs to.
    pub spec_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<ValidationRow>,
    pub spec_fitness: Vec<f64>,
    pub mean_fitness: f64,
}

impl ValidationReport {
    pub const CSV_HEADER: &'static str = "spec,kind,condition,quantity,simulated,observed,spec_fitness";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:e},{:e},{:e}\n",
                r.spec, r.kind, r.condition, r.quantity, r.simulated, r.observed, r.spec_fitness
            ));
        }
        out
    }
}

fn observed(trials: &[Trial]) -> Result<Vec<&Payload>, CalibrationError> {
    trials
        .iter()
        .enumerate()
        .map(|(index, t)| {
            let obs = t.observation.as_ref().ok_or_else(|| CalibrationError::Mismatch {
                index,
                message: "no observation".into(),
            })?;
            if !obs.payload.matches(&t.spec.kind) {
                return Err(CalibrationError::Mismatch {
                    index,
                    message: format!("{} experiment with a mismatched observation", t.spec.kind.name()),
                });
            }
            Ok(&obs.payload)
        })
        .collect()
}

/// Side-by-side simulated and observed values of every trial on `model`.
pub fn validate(
    model: &GripperModel,
    trials: &[Trial],
    settings: &EvalSettings,
) -> Result<ValidationReport, CalibrationError> {
    let real = observed(trials)?;
    let specs: Vec<ExperimentSpec> = trials.iter().map(|t| t.spec).collect();
    let sim = simulate_experiments(model, &specs, settings)?;
    let mut rows = Vec::new();
    let mut spec_fitness = Vec::with_capacity(trials.len());
    for (i, ((s, r), spec)) in sim.iter().zip(&real).zip(&specs).enumerate() {
        let fitness = settings.score(s, r)?;
        spec_fitness.push(fitness);
        let mut row = |quantity: String, simulated: f64, observed: f64| {
            rows.push(ValidationRow {
                spec: i,
                kind: spec.kind.name().into(),
                condition: spec.kind.condition(),
                quantity,
                simulated,
                observed,
                spec_fitness: fitness,
            })
        };
        match (s, r) {
            (Payload::JointAngles { theta: a }, Payload::JointAngles { theta: b }) => {
                for (j, (x, y)) in a.iter().zip(b).enumerate() {
                    row(format!("theta{j}"), *x, *y);
                }
            }
            (
                Payload::SettlingData {
                    settling_time: st,
                    overshoots: sn,
                },
                Payload::SettlingData {
                    settling_time: rt,
                    overshoots: rn,
                },
            ) => {
                row("settling_time".into(), *st, *rt);
                row("overshoots".into(), *sn as f64, *rn as f64);
            }
            (Payload::TipForce { force: a }, Payload::TipForce { force: b }) => {
                row("force".into(), *a, *b);
            }
            _ => unreachable!("score accepted the pair"),
        }
    }
    let mean_fitness = mean(&spec_fitness);
    Ok(ValidationReport {
        rows,
        spec_fitness,
        mean_fitness,
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Previously calibrated parameter columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

impl FixedParams {
    pub fn from_table(params: &ParamTable) -> Self {
        Self {
            k: Some(params.k()),
            c: Some(params.c()),
            alpha: Some(params.alpha()),
        }
    }
}

/// Ground truth used to fill in missing observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSource {
    #[serde(default = "ParamTable::reference")]
    pub params: ParamTable,
    #[serde(default = "NoiseLevels::none")]
    pub noise: NoiseLevels,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SyntheticSource {
    fn default() -> Self {
        Self {
            params: ParamTable::reference(),
            noise: NoiseLevels::none(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCampaign {
    pub stage: Stage,
    /// Geometry and mass properties; defaults to the reference finger.
    #[serde(default)]
    pub model: Option<GripperModel>,
    #[serde(default)]
    pub fixed: FixedParams,
    #[serde(default)]
    pub train: Vec<Trial>,
    #[serde(default)]
    pub validation: Vec<Trial>,
    /// Observation CSV appended to `train`, relative to the campaign file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_csv: Option<PathBuf>,
    /// Empty bounds are replaced by the stage's search box.
    pub pso: PsoConfig,
    #[serde(default)]
    pub settings: EvalSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
}

impl CalibrationCampaign {
    /// The standard protocol for `stage` with synthetic reference ground
    /// truth. Fixed parameters are the reference values as well.
    pub fn protocol(stage: Stage, seed: u64) -> Self {
        let (train, validation): (Vec<ExperimentSpec>, Vec<ExperimentSpec>) = match stage {
            Stage::Spring => (
                TRAIN_WEIGHTS_G.iter().map(|g| ExperimentSpec::static_load(g * 1e-3)).collect(),
                VALIDATION_WEIGHTS_G.iter().map(|g| ExperimentSpec::static_load(g * 1e-3)).collect(),
            ),
            Stage::Damping => (
                DAMPING_WEIGHTS_G
                    .iter()
                    .map(|g| ExperimentSpec::release(g * 1e-3, RELEASE_DURATION))
                    .collect(),
                VALIDATION_WEIGHTS_G
                    .iter()
                    .map(|g| ExperimentSpec::release(g * 1e-3, RELEASE_DURATION))
                    .collect(),
            ),
            Stage::Torque => (
                pressure_grid_kpa().iter().map(|p| ExperimentSpec::actuation(p * 1e3)).collect(),
                (0..10).map(|i| ExperimentSpec::actuation((10.0 * i as f64 + 5.0) * 1e3)).collect(),
            ),
        };
        let table = ParamTable::reference();
        let fixed = match stage {
            Stage::Spring => FixedParams::default(),
            Stage::Damping => FixedParams {
                k: Some(table.k()),
                ..FixedParams::default()
            },
            Stage::Torque => FixedParams {
                k: Some(table.k()),
                c: Some(table.c()),
                alpha: None,
            },
        };
        let trials = |specs: Vec<ExperimentSpec>| {
            specs.into_iter().map(|spec| Trial { spec, observation: None }).collect()
        };
        Self {
            stage,
            model: None,
            fixed,
            train: trials(train),
            validation: trials(validation),
            train_csv: None,
            validation_csv: None,
            pso: PsoConfig {
                seed,
                ..PsoConfig::default()
            },
            settings: EvalSettings::default(),
            synthetic: Some(SyntheticSource::default()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CalibrationError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("campaign serializes")
    }

    /// Reads a campaign file and appends any referenced observation CSVs.
    pub fn load(path: &Path) -> Result<Self, CalibrationError> {
        let io = |e: std::io::Error| CalibrationError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let mut campaign = Self::from_json(&std::fs::read_to_string(path).map_err(io)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(csv) = campaign.train_csv.take() {
            campaign.train.extend(read_observations(&base.join(csv))?);
        }
        if let Some(csv) = campaign.validation_csv.take() {
            campaign.validation.extend(read_observations(&base.join(csv))?);
        }
        Ok(campaign)
    }

    /// Checks stage order, experiment kinds and parameter lengths.
    pub fn check(&self) -> Result<(), CalibrationError> {
        let n = self.base_model().n_joints();
        let need = |col: &Option<Vec<f64>>, name: &str| match col {
            None => Err(CalibrationError::StageOrder(format!(
                "{} calibration needs calibrated {name} values",
                self.stage.name()
            ))),
            Some(v) if v.len() != n => Err(CalibrationError::Invalid(format!(
                "{} fixed {name} values for {n} joints",
                v.len()
            ))),
            Some(_) => Ok(()),
        };
        match self.stage {
            Stage::Spring => {}
            Stage::Damping => need(&self.fixed.k, "spring")?,
            Stage::Torque => {
                need(&self.fixed.k, "spring")?;
                need(&self.fixed.c, "damping")?;
            }
        }
        if self.train.is_empty() {
            return Err(CalibrationError::Invalid("no training experiments".into()));
        }
        for (index, t) in self.train.iter().chain(&self.validation).enumerate() {
            if t.spec.kind.name() != self.stage.experiment() {
                return Err(CalibrationError::Mismatch {
                    index,
                    message: format!(
                        "{} experiment in a {} campaign",
                        t.spec.kind.name(),
                        self.stage.name()
                    ),
                });
            }
            t.spec
                .validate()
                .map_err(|message| CalibrationError::Mismatch { index, message })?;
        }
        Ok(())
    }

    fn base_model(&self) -> GripperModel {
        self.model.clone().unwrap_or_default()
    }

    /// Base model with the fixed columns applied.
    pub fn fixed_model(&self) -> Result<GripperModel, CalibrationError> {
        let mut model = self.base_model();
        if let Some(k) = &self.fixed.k {
            model.joint_k = k.clone();
        }
        if let Some(c) = &self.fixed.c {
            model.joint_c = c.clone();
        }
        if let Some(alpha) = &self.fixed.alpha {
            model.joint_alpha = alpha.clone();
        }
        model.validate()?;
        Ok(model)
    }

    /// Fills trials without observations from the synthetic source.
    pub fn synthesize_missing(&mut self) -> Result<(), CalibrationError> {
        let missing = self
            .train
            .iter()
            .chain(&self.validation)
            .any(|t| t.observation.is_none());
        let Some(source) = self.synthetic.clone().filter(|_| missing) else {
            return Ok(());
        };
        let truth = self.base_model().with_params(&source.params)?;
        for (split, trials) in [&mut self.train, &mut self.validation].into_iter().enumerate() {
            let todo: Vec<usize> = (0..trials.len())
                .filter(|&i| trials[i].observation.is_none())
                .collect();
            let specs: Vec<ExperimentSpec> = todo.iter().map(|&i| trials[i].spec).collect();
            let obs = synthesize_observations(
                &truth,
                &specs,
                &source.noise,
                source.seed.wrapping_add(split as u64),
                &self.settings,
            )?;
            for (i, o) in todo.into_iter().zip(obs) {
                trials[i].observation = Some(o);
            }
        }
        Ok(())
    }
}

fn with_column(model: &GripperModel, stage: Stage, x: &[f64]) -> GripperModel {
    let mut m = model.clone();
    match stage {
        Stage::Spring => m.joint_k = x.to_vec(),
        Stage::Damping => m.joint_c = x.to_vec(),
        Stage::Torque => m.joint_alpha = x.to_vec(),
    }
    m
}

/// True for failures that mean "this candidate lies outside the model's
/// valid region" rather than a broken setup.
fn infeasible(err: &CalibrationError) -> bool {
    matches!(
        err,
        CalibrationError::Chain(
            ChainError::OutOfValidRange { .. }
                | ChainError::NonConvergence { .. }
                | ChainError::IntegrationFailure { .. }
                | ChainError::Singular
        )
    )
}

/// Mean stage fitness of `x` over the trials, or [`PENALTY_FITNESS`] when
/// the candidate drives the model out of its valid region.
pub fn campaign_fitness(
    model: &GripperModel,
    stage: Stage,
    x: &[f64],
    specs: &[ExperimentSpec],
    real: &[&Payload],
    settings: &EvalSettings,
) -> Result<f64, CalibrationError> {
    let candidate = with_column(model, stage, x);
    let sim = match simulate_experiments(&candidate, specs, settings) {
        Ok(sim) => sim,
        Err(e) if infeasible(&e) => return Ok(PENALTY_FITNESS),
        Err(e) => return Err(e),
    };
    let scores = sim
        .iter()
        .zip(real)
        .map(|(s, r)| settings.score(s, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean(&scores))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub stage: Stage,
    /// All joint parameters after this stage.
    pub params: ParamTable,
    /// The fitted column.
    pub best: Vec<f64>,
    pub train_fitness: f64,
    pub history: Vec<f64>,
    pub log: Vec<ParticleRecord>,
    /// Personal-best summaries per block of ten iterations.
    pub boxplots: Vec<BoxplotRow>,
    pub train_report: ValidationReport,
    pub validation: Option<ValidationReport>,
}

/// Fits the stage's parameter column and validates it on held-out trials.
pub fn run_campaign(campaign: &CalibrationCampaign) -> Result<CampaignResult, CalibrationError> {
    campaign.check()?;
    let mut campaign = campaign.clone();
    campaign.synthesize_missing()?;
    let model = campaign.fixed_model()?;
    let specs: Vec<ExperimentSpec> = campaign.train.iter().map(|t| t.spec).collect();
    let real = observed(&campaign.train)?;
    let mut pso = campaign.pso.clone();
    if pso.bounds.is_empty() {
        pso.bounds = campaign.stage.bounds(model.n_joints());
    }
    if pso.bounds.len() != model.n_joints() {
        return Err(CalibrationError::Invalid(format!(
            "{} PSO bounds for {} joints",
            pso.bounds.len(),
            model.n_joints()
        )));
    }
    let stage = campaign.stage;
    let settings = campaign.settings;
    info!(
        "{} calibration: {} experiments, swarm {}, {} iterations",
        stage.name(),
        specs.len(),
        pso.swarm_size,
        pso.iterations
    );
    let result = optimize(
        |x| campaign_fitness(&model, stage, x, &specs, &real, &settings),
        &pso,
    )?;
    if result.best_fitness >= PENALTY_FITNESS {
        warn!("no feasible parameter set was found");
    }
    let fitted = with_column(&model, stage, &result.best_position);
    let train_report = validate(&fitted, &campaign.train, &settings)?;
    let validation = if campaign.validation.is_empty() {
        None
    } else {
        Some(validate(&fitted, &campaign.validation, &settings)?)
    };
    Ok(CampaignResult {
        stage,
        params: fitted.params(),
        best: result.best_position,
        train_fitness: result.best_fitness,
        boxplots: parameter_boxplots(&result.log, 10),
        history: result.history,
        log: result.log,
        train_report,
        validation,
    })
}

/// Reads observations in one of the per-kind CSV layouts:
///
/// - `tip_mass_g,theta0,…,theta6`
/// - `initial_mass_g,duration_s,settling_time_s,overshoots`
/// - `pressure_kpa,force_n`
///
/// Every row is a real observation with one repetition.
pub fn read_observations(path: &Path) -> Result<Vec<Trial>, CalibrationError> {
    let fail = |message: String| CalibrationError::Io {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
    let headers = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
    let first = headers.get(0).unwrap_or("");
    let real = |payload| {
        Some(Observation {
            payload,
            source: Source::Real,
        })
    };
    let mut trials = Vec::new();
    match first {
        "tip_mass_g" => {
            let n = headers.len() - 1;
            for (j, h) in headers.iter().skip(1).enumerate() {
                if h != format!("theta{j}") {
                    return Err(fail(format!("expected column theta{j}, found `{h}`")));
                }
            }
            for record in reader.records() {
                let record = record.map_err(|e| fail(e.to_string()))?;
                let values = record
                    .iter()
                    .map(|f| f.trim().parse::<f64>().map_err(|e| fail(format!("`{f}`: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if values.len() != n + 1 {
                    return Err(fail(format!("row with {} fields", values.len())));
                }
                trials.push(Trial {
                    spec: ExperimentSpec::static_load(values[0] * 1e-3),
                    observation: real(Payload::JointAngles {
                        theta: values[1..].to_vec(),
                    }),
                });
            }
        }
        "initial_mass_g" => {
            for row in reader.deserialize::<(f64, f64, f64, usize)>() {
                let (g, duration, settling_time, overshoots) = row.map_err(|e| fail(e.to_string()))?;
                trials.push(Trial {
                    spec: ExperimentSpec::release(g * 1e-3, duration),
                    observation: real(Payload::SettlingData {
                        settling_time,
                        overshoots,
                    }),
                });
            }
        }
        "pressure_kpa" => {
            for row in reader.deserialize::<(f64, f64)>() {
                let (kpa, force) = row.map_err(|e| fail(e.to_string()))?;
                trials.push(Trial {
                    spec: ExperimentSpec::actuation(kpa * 1e3),
                    observation: real(Payload::TipForce { force }),
                });
            }
        }
        other => return Err(fail(format!("unknown observation layout starting with `{other}`"))),
    }
    Ok(trials)
}
