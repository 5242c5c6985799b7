use std::f64::consts::FRAC_PI_2;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dynamics::{effective_bodies, Body, Frame};
use super::{ChainError, GripperModel, LoadCondition, FLEXION_SIGN};

/// Newton solver settings for the static problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticOptions {
    /// Largest admissible residual torque (N·m).
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for StaticOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: 200,
        }
    }
}

struct Statics<'a> {
    model: &'a GripperModel,
    bodies: Vec<Body>,
    motor: Vec<f64>,
    free: Vec<usize>,
}

impl<'a> Statics<'a> {
    fn new(model: &'a GripperModel, load: &LoadCondition) -> Self {
        Self {
            model,
            bodies: effective_bodies(model, load.tip_mass),
            motor: model
                .joint_alpha
                .iter()
                .map(|a| FLEXION_SIGN * a * load.pressure)
                .collect(),
            free: (0..model.n_joints()).filter(|&j| !model.is_locked(j)).collect(),
        }
    }

    fn frame(&self, q: &[f64]) -> Frame {
        Frame::new(self.model, &self.bodies, q)
    }

    /// Net joint torque imbalance, zero at equilibrium. `force` is an upward
    /// normal force acting on the tip.
    fn residual(&self, frame: &Frame, q: &[f64], force: f64) -> Vec<f64> {
        let m = self.model;
        let gravity = frame.gravity_torque(&self.bodies, m.gravity);
        (0..q.len())
            .map(|j| {
                m.joint_k[j] * (q[j] - m.rest_angle[j])
                    - self.motor[j]
                    - gravity[j]
                    - (frame.tip[0] - frame.joint[j][0]) * force
            })
            .collect()
    }

    fn jacobian(&self, frame: &Frame, force: f64) -> DMatrix<f64> {
        let mut jac = -frame.gravity_stiffness(&self.bodies, self.model.gravity);
        let n = jac.nrows();
        for j in 0..n {
            jac[(j, j)] += self.model.joint_k[j];
        }
        if force != 0.0 {
            for i in 0..n {
                for j in 0..n {
                    let m = i.max(j);
                    jac[(i, j)] += force * (frame.tip[1] - frame.joint[m][1]);
                }
            }
        }
        jac
    }

    /// True when the free-joint stiffness is positive definite at `q`.
    fn is_stable(&self, q: &[f64]) -> bool {
        let full = self.jacobian(&self.frame(q), 0.0);
        let nf = self.free.len();
        DMatrix::from_fn(nf, nf, |a, b| full[(self.free[a], self.free[b])])
            .cholesky()
            .is_some()
    }

    fn free_norm(&self, r: &[f64]) -> f64 {
        self.free.iter().map(|&j| r[j].abs()).fold(0.0, f64::max)
    }

    /// Damped Newton on the free joints from `q`.
    fn solve(&self, mut q: Vec<f64>, opts: &StaticOptions) -> Result<Vec<f64>, ChainError> {
        let nf = self.free.len();
        let mut r = self.residual(&self.frame(&q), &q, 0.0);
        let mut norm = self.free_norm(&r);
        for _ in 0..opts.max_iterations {
            if norm < opts.tolerance {
                return Ok(q);
            }
            let frame = self.frame(&q);
            let full = self.jacobian(&frame, 0.0);
            let jac = DMatrix::from_fn(nf, nf, |a, b| full[(self.free[a], self.free[b])]);
            let rhs = DVector::from_iterator(nf, self.free.iter().map(|&j| -r[j]));
            let dq = jac.lu().solve(&rhs).ok_or(ChainError::Singular)?;
            let mut scale = 1.0;
            loop {
                let mut trial = q.clone();
                for (a, &j) in self.free.iter().enumerate() {
                    trial[j] += scale * dq[a];
                }
                let tr = self.residual(&self.frame(&trial), &trial, 0.0);
                let tn = self.free_norm(&tr);
                if tn < (1.0 - 1e-4 * scale) * norm || scale < 1e-6 {
                    q = trial;
                    r = tr;
                    norm = tn;
                    break;
                }
                scale *= 0.5;
            }
        }
        if norm < opts.tolerance {
            Ok(q)
        } else {
            Err(ChainError::NonConvergence {
                iterations: opts.max_iterations,
                residual: norm,
            })
        }
    }
}

fn check_valid(theta: &[f64]) -> Result<(), ChainError> {
    match theta.iter().position(|a| a.abs() > FRAC_PI_2) {
        Some(joint) => Err(ChainError::OutOfValidRange {
            joint,
            angle: theta[joint],
        }),
        None => Ok(()),
    }
}

/// Joint angles at which springs balance gravity, tip load and pressure.
///
/// Locked joints stay at their rest angle. Only stable poses are returned:
/// when Newton from the rest pose fails or lands on an unstable balance, the
/// load is ramped up from zero instead.
pub fn static_equilibrium(model: &GripperModel, load: &LoadCondition) -> Result<Vec<f64>, ChainError> {
    static_equilibrium_with(model, load, &StaticOptions::default())
}

pub(crate) fn static_equilibrium_with(
    model: &GripperModel,
    load: &LoadCondition,
    opts: &StaticOptions,
) -> Result<Vec<f64>, ChainError> {
    model.validate()?;
    load.validate()?;
    if let Some(j) = (0..model.n_joints()).find(|&j| !model.is_locked(j) && model.joint_k[j] <= 0.0) {
        return Err(ChainError::InvalidModel(format!(
            "joint {j} has no spring, no static solution"
        )));
    }
    let statics = Statics::new(model, load);
    let theta = match statics.solve(model.rest_angle.clone(), opts) {
        Ok(theta) if statics.is_stable(&theta) => theta,
        Ok(_) => {
            debug!("direct Newton reached an unstable pose, continuing in load");
            continuation(model, load, opts)?
        }
        Err(err) => {
            debug!("direct Newton failed ({err}), continuing in load");
            continuation(model, load, opts)?
        }
    };
    check_valid(&theta)?;
    Ok(theta)
}

fn continuation(
    model: &GripperModel,
    load: &LoadCondition,
    opts: &StaticOptions,
) -> Result<Vec<f64>, ChainError> {
    const STEPS: usize = 20;
    let mut scaled = model.clone();
    let mut q = model.rest_angle.clone();
    for i in 1..=STEPS {
        let s = i as f64 / STEPS as f64;
        scaled.gravity = [model.gravity[0] * s, model.gravity[1] * s];
        let partial = LoadCondition {
            tip_mass: load.tip_mass * s,
            pressure: load.pressure * s,
            contact_plane: None,
        };
        let statics = Statics::new(&scaled, &partial);
        q = statics.solve(q, opts)?;
        check_valid(&q)?;
        if !statics.is_stable(&q) {
            return Err(ChainError::NonConvergence {
                iterations: opts.max_iterations,
                residual: 0.0,
            });
        }
    }
    Ok(q)
}

/// Per-joint torque imbalance of `theta` under `load` (N·m).
pub fn static_residual(
    model: &GripperModel,
    load: &LoadCondition,
    theta: &[f64],
) -> Result<Vec<f64>, ChainError> {
    if theta.len() != model.n_joints() {
        return Err(ChainError::DimensionMismatch {
            expected: model.n_joints(),
            got: theta.len(),
        });
    }
    let statics = Statics::new(model, load);
    Ok(statics.residual(&statics.frame(theta), theta, 0.0))
}

/// Quasi-static tip contact force and the pose that produces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TipForce {
    /// Normal force on the plane (N), zero on liftoff.
    pub force: f64,
    pub liftoff: bool,
    pub theta: Vec<f64>,
}

/// Force measurement against a plane at the unactuated tip height.
///
/// The plane height is found once; every pressure then solves the joint
/// balance together with the tip-on-plane constraint.
#[derive(Debug, Clone)]
pub struct TipForceProbe {
    model: GripperModel,
    rest: Vec<f64>,
    plane: f64,
    opts: StaticOptions,
}

impl TipForceProbe {
    pub fn new(model: &GripperModel) -> Result<Self, ChainError> {
        let rest = static_equilibrium(model, &LoadCondition::unloaded())?;
        let plane = super::tip_position(model, &rest)?[1];
        Ok(Self {
            model: model.clone(),
            rest,
            plane,
            opts: StaticOptions::default(),
        })
    }

    /// Height of the contact plane (m).
    pub fn plane(&self) -> f64 {
        self.plane
    }

    pub fn unloaded_angles(&self) -> &[f64] {
        &self.rest
    }

    pub fn measure(&self, pressure: f64) -> Result<TipForce, ChainError> {
        let load = LoadCondition::pressure(pressure);
        load.validate()?;
        let statics = Statics::new(&self.model, &load);
        let free = &statics.free;
        let nf = free.len();
        let mut q = self.rest.clone();
        let mut force = 0.0;

        let eval = |q: &[f64], force: f64| {
            let frame = statics.frame(q);
            let r = statics.residual(&frame, q, force);
            let h = frame.tip[1] - self.plane;
            let norm = statics.free_norm(&r).max(h.abs());
            (frame, r, h, norm)
        };
        let (mut frame, mut r, mut h, mut norm) = eval(&q, force);
        let mut converged = false;
        for _ in 0..self.opts.max_iterations {
            if statics.free_norm(&r) < self.opts.tolerance && h.abs() < 1e-12 {
                converged = true;
                break;
            }
            let full = statics.jacobian(&frame, force);
            let mut jac = DMatrix::zeros(nf + 1, nf + 1);
            let mut rhs = DVector::zeros(nf + 1);
            for (a, &i) in free.iter().enumerate() {
                for (b, &j) in free.iter().enumerate() {
                    jac[(a, b)] = full[(i, j)];
                }
                jac[(a, nf)] = -(frame.tip[0] - frame.joint[i][0]);
                jac[(nf, a)] = frame.tip[0] - frame.joint[i][0];
                rhs[a] = -r[i];
            }
            rhs[nf] = -h;
            let delta = jac.lu().solve(&rhs).ok_or(ChainError::Singular)?;
            let mut scale = 1.0;
            loop {
                let mut tq = q.clone();
                for (a, &j) in free.iter().enumerate() {
                    tq[j] += scale * delta[a];
                }
                let tf = force + scale * delta[nf];
                let trial = eval(&tq, tf);
                if trial.3 < (1.0 - 1e-4 * scale) * norm || scale < 1e-6 {
                    q = tq;
                    force = tf;
                    (frame, r, h, norm) = trial;
                    break;
                }
                scale *= 0.5;
            }
        }
        if !converged {
            return Err(ChainError::NonConvergence {
                iterations: self.opts.max_iterations,
                residual: norm,
            });
        }
        if force < 0.0 {
            // The plane would have to pull: the tip leaves it instead.
            let theta = static_equilibrium_with(&self.model, &load, &self.opts)?;
            return Ok(TipForce {
                force: 0.0,
                liftoff: true,
                theta,
            });
        }
        check_valid(&q)?;
        Ok(TipForce {
            force,
            liftoff: false,
            theta: q,
        })
    }
}

/// Tip force on a plane at the unactuated tip height under `pressure`.
pub fn measure_tip_force(model: &GripperModel, pressure: f64) -> Result<TipForce, ChainError> {
    TipForceProbe::new(model)?.measure(pressure)
}
