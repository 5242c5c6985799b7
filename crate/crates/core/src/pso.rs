//! Global-best particle swarm optimization over a box.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, iteration, particle, purpose)`, so the swarm trajectory does not
//! depend on the order in which fitness values are computed.

use std::error::Error as StdError;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PsoError {
    #[error("invalid PSO configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fitness of particle {particle} is NaN at iteration {iteration}")]
    NanFitness { iteration: usize, particle: usize },
    #[error("objective failed for particle {particle} at iteration {iteration}: {source}")]
    Objective {
        iteration: usize,
        particle: usize,
        position: Vec<f64>,
        #[source]
        source: Box<dyn StdError + Send + Sync>,
    },
    #[error("PSO config JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    /// Inertia weight.
    pub omega: f64,
    /// Cognitive coefficient.
    pub c1: f64,
    /// Social coefficient.
    pub c2: f64,
    pub swarm_size: usize,
    pub iterations: usize,
    /// `[low, high]` per dimension.
    pub bounds: Vec<[f64; 2]>,
    pub seed: u64,
    /// Evaluate the objective on the rayon pool.
    #[serde(default)]
    pub parallel: bool,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            omega: 0.9,
            c1: 0.5,
            c2: 0.3,
            swarm_size: 30,
            iterations: 100,
            bounds: Vec::new(),
            seed: 0,
            parallel: false,
        }
    }
}

impl PsoConfig {
    /// Default coefficients over `bounds`.
    pub fn with_bounds(bounds: Vec<[f64; 2]>, seed: u64) -> Self {
        Self {
            bounds,
            seed,
            ..Self::default()
        }
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<(), PsoError> {
        let bad = |msg: String| Err(PsoError::InvalidConfig(msg));
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return bad(format!("omega {} outside (0, 1]", self.omega));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite() && self.c2 > 0.0 && self.c2.is_finite()) {
            return bad(format!("c1 {} and c2 {} must be positive", self.c1, self.c2));
        }
        if self.swarm_size < 2 {
            return bad(format!("swarm size {} below 2", self.swarm_size));
        }
        self.check_bounds()
    }

    fn check_bounds(&self) -> Result<(), PsoError> {
        if self.bounds.is_empty() {
            return Err(PsoError::InvalidConfig("no bounds given".into()));
        }
        for (d, [lo, hi]) in self.bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(PsoError::InvalidConfig(format!(
                    "dimension {d}: bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, PsoError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub best_positions: Vec<Vec<f64>>,
    /// Personal best fitness, `+inf` until first evaluated.
    pub best_fitness: Vec<f64>,
    pub global_best: Vec<f64>,
    pub global_fitness: f64,
    pub iteration: usize,
}

impl SwarmState {
    pub fn swarm_size(&self) -> usize {
        self.positions.len()
    }
}

const INIT: u64 = 0;
const UPDATE: u64 = 1;

fn stream(seed: u64, iteration: u64, particle: usize, purpose: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key
        .chunks_exact_mut(8)
        .zip([seed, iteration, particle as u64, purpose])
    {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Random swarm with positions uniform in the bounds and velocities uniform
/// in `±(high − low)`.
pub fn init_swarm(config: &PsoConfig, dimension: usize) -> Result<SwarmState, PsoError> {
    if dimension == 0 {
        return Err(PsoError::InvalidConfig("dimension must be at least 1".into()));
    }
    config.check_bounds()?;
    if config.bounds.len() != dimension {
        return Err(PsoError::DimensionMismatch {
            expected: dimension,
            got: config.bounds.len(),
        });
    }
    let mut positions = Vec::with_capacity(config.swarm_size);
    let mut velocities = Vec::with_capacity(config.swarm_size);
    for i in 0..config.swarm_size {
        let mut rng = stream(config.seed, u64::MAX, i, INIT);
        let x: Vec<f64> = config
            .bounds
            .iter()
            .map(|&[lo, hi]| lo + (hi - lo) * rng.random::<f64>())
            .collect();
        let v: Vec<f64> = config
            .bounds
            .iter()
            .map(|&[lo, hi]| (hi - lo) * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        positions.push(x);
        velocities.push(v);
    }
    Ok(SwarmState {
        best_positions: positions.clone(),
        best_fitness: vec![f64::INFINITY; config.swarm_size],
        global_best: positions[0].clone(),
        global_fitness: f64::INFINITY,
        positions,
        velocities,
        iteration: 0,
    })
}

/// Takes the fitness of the current positions, updates the bests and moves
/// every particle once.
pub fn pso_step(
    state: &SwarmState,
    config: &PsoConfig,
    fitness: &[f64],
) -> Result<SwarmState, PsoError> {
    let n = state.swarm_size();
    if fitness.len() != n {
        return Err(PsoError::DimensionMismatch {
            expected: n,
            got: fitness.len(),
        });
    }
    if let Some(particle) = fitness.iter().position(|f| f.is_nan()) {
        return Err(PsoError::NanFitness {
            iteration: state.iteration,
            particle,
        });
    }
    let mut next = state.clone();
    for (i, &f) in fitness.iter().enumerate() {
        if f < next.best_fitness[i] {
            next.best_fitness[i] = f;
            next.best_positions[i] = state.positions[i].clone();
        }
        if f < next.global_fitness {
            next.global_fitness = f;
            next.global_best = state.positions[i].clone();
        }
    }
    for i in 0..n {
        let mut rng = stream(config.seed, state.iteration as u64, i, UPDATE);
        let x = &mut next.positions[i];
        let v = &mut next.velocities[i];
        let p = &next.best_positions[i];
        for d in 0..x.len() {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            v[d] = config.omega * v[d]
                + config.c1 * r1 * (p[d] - x[d])
                + config.c2 * r2 * (next.global_best[d] - x[d]);
            x[d] += v[d];
            let [lo, hi] = config.bounds[d];
            if x[d] < lo || x[d] > hi {
                x[d] = x[d].clamp(lo, hi);
                v[d] = 0.0;
            }
        }
    }
    next.iteration += 1;
    Ok(next)
}

/// One particle in one iteration, as evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRecord {
    pub iteration: usize,
    pub particle: usize,
    pub fitness: f64,
    pub position: Vec<f64>,
    /// Personal best after this evaluation.
    pub best_position: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    /// Global best fitness after each iteration.
    pub history: Vec<f64>,
    pub log: Vec<ParticleRecord>,
}

impl PsoResult {
    pub fn history_csv(&self) -> String {
        history_csv(&self.history)
    }

    pub fn log_csv(&self) -> String {
        log_csv(&self.log)
    }
}

/// `iteration,best_fitness` rows.
pub fn history_csv(history: &[f64]) -> String {
    let mut out = String::from("iteration,best_fitness\n");
    for (i, f) in history.iter().enumerate() {
        out.push_str(&format!("{i},{f:e}\n"));
    }
    out
}

/// `iteration,particle,fitness,x0..,best0..` rows.
pub fn log_csv(log: &[ParticleRecord]) -> String {
    let dim = log.first().map_or(0, |r| r.position.len());
    let mut out = String::from("iteration,particle,fitness");
    for d in 0..dim {
        out.push_str(&format!(",x{d}"));
    }
    for d in 0..dim {
        out.push_str(&format!(",best{d}"));
    }
    out.push('\n');
    for r in log {
        out.push_str(&format!("{},{},{:e}", r.iteration, r.particle, r.fitness));
        for v in r.position.iter().chain(&r.best_position) {
            out.push_str(&format!(",{v:e}"));
        }
        out.push('\n');
    }
    out
}

/// Minimizes `objective` for `config.iterations` steps.
///
/// Objective errors abort the run and carry the offending particle.
pub fn optimize<F, E>(objective: F, config: &PsoConfig) -> Result<PsoResult, PsoError>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: Into<Box<dyn StdError + Send + Sync>> + Send,
{
    config.validate()?;
    let mut state = init_swarm(config, config.dimension())?;
    let mut history = Vec::with_capacity(config.iterations);
    let mut log = Vec::with_capacity(config.iterations * config.swarm_size);
    for iteration in 0..config.iterations {
        let eval = |x: &Vec<f64>| objective(x);
        let results: Vec<Result<f64, E>> = if config.parallel {
            state.positions.par_iter().map(eval).collect()
        } else {
            state.positions.iter().map(eval).collect()
        };
        let mut fitness = Vec::with_capacity(results.len());
        for (particle, r) in results.into_iter().enumerate() {
            match r {
                Ok(f) => fitness.push(f),
                Err(e) => {
                    return Err(PsoError::Objective {
                        iteration,
                        particle,
                        position: state.positions[particle].clone(),
                        source: e.into(),
                    })
                }
            }
        }
        let next = pso_step(&state, config, &fitness)?;
        for (particle, &f) in fitness.iter().enumerate() {
            log.push(ParticleRecord {
                iteration,
                particle,
                fitness: f,
                position: state.positions[particle].clone(),
                best_position: next.best_positions[particle].clone(),
            });
        }
        history.push(next.global_fitness);
        state = next;
    }
    Ok(PsoResult {
        best_position: state.global_best,
        best_fitness: state.global_fitness,
        history,
        log,
    })
}

/// Sample quantile with linear interpolation between order statistics
/// (`h = (n − 1)p`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Five-number summary of one dimension over one iteration group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotRow {
    pub group_start: usize,
    pub dimension: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Personal bests averaged per particle over each block of `group`
/// iterations, then summarized across particles per dimension.
pub fn parameter_boxplots(log: &[ParticleRecord], group: usize) -> Vec<BoxplotRow> {
    let group = group.max(1);
    let Some(last) = log.iter().map(|r| r.iteration).max() else {
        return Vec::new();
    };
    let n_particles = log.iter().map(|r| r.particle).max().unwrap() + 1;
    let dim = log[0].best_position.len();
    let mut rows = Vec::new();
    for start in (0..=last).step_by(group) {
        let mut sums = vec![vec![0.0; dim]; n_particles];
        let mut counts = vec![0usize; n_particles];
        for r in log
            .iter()
            .filter(|r| r.iteration >= start && r.iteration < start + group)
        {
            counts[r.particle] += 1;
            for (s, v) in sums[r.particle].iter_mut().zip(&r.best_position) {
                *s += v;
            }
        }
        for d in 0..dim {
            let mut means: Vec<f64> = sums
                .iter()
                .zip(&counts)
                .filter(|(_, &c)| c > 0)
                .map(|(s, &c)| s[d] / c as f64)
                .collect();
            means.sort_by(f64::total_cmp);
            rows.push(BoxplotRow {
                group_start: start,
                dimension: d,
                min: means[0],
                q1: quantile(&means, 0.25),
                median: quantile(&means, 0.5),
                q3: quantile(&means, 0.75),
                max: means[means.len() - 1],
            });
        }
    }
    rows
}
