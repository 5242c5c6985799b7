use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kinematics::Point;
use super::{ChainError, GripperModel, Integrator, LoadCondition};

/// Stiffness of the penalty contact between tip and support plane (N/m).
pub const PENALTY_STIFFNESS: f64 = 1e4;

/// Joint-space state of the chain at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
}

impl SimState {
    pub fn at_rest(theta: Vec<f64>) -> Self {
        let n = theta.len();
        Self {
            t: 0.0,
            theta,
            omega: vec![0.0; n],
        }
    }
}

/// Mass properties of one rigid segment, possibly with a lumped tip load.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Body {
    pub mass: f64,
    pub inertia: f64,
    pub com_offset: f64,
    pub length: f64,
}

/// Segment mass properties with `tip_mass` lumped into the last segment.
pub(crate) fn effective_bodies(model: &GripperModel, tip_mass: f64) -> Vec<Body> {
    let mut bodies: Vec<Body> = (0..model.n_segments())
        .map(|s| Body {
            mass: model.segment_mass[s],
            inertia: model.segment_inertia[s],
            com_offset: model.segment_com_offset[s],
            length: model.segment_length[s],
        })
        .collect();
    if tip_mass > 0.0 {
        let last = bodies.last_mut().expect("non-empty chain");
        let mass = last.mass + tip_mass;
        let com = (last.mass * last.com_offset + tip_mass * last.length) / mass;
        let inertia = last.inertia
            + last.mass * (last.com_offset - com).powi(2)
            + tip_mass * (last.length - com).powi(2);
        *last = Body {
            mass,
            inertia,
            com_offset: com,
            length: last.length,
        };
    }
    bodies
}

/// Positions of joints, centres of mass and tip for one configuration.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    /// Absolute angle of every segment.
    pub phi: Vec<f64>,
    /// Position of joint `j` (distal end of segment `j`).
    pub joint: Vec<Point>,
    /// Centre of mass of every segment.
    pub com: Vec<Point>,
    pub tip: Point,
}

impl Frame {
    pub fn new(model: &GripperModel, bodies: &[Body], q: &[f64]) -> Self {
        let n_seg = bodies.len();
        let mut phi = Vec::with_capacity(n_seg);
        let mut joint = Vec::with_capacity(n_seg - 1);
        let mut com = Vec::with_capacity(n_seg);
        let mut p = model.mount.position;
        let mut angle = model.mount.orientation;
        for (s, body) in bodies.iter().enumerate() {
            if s > 0 {
                angle += q[s - 1];
                joint.push(p);
            }
            let (sin, cos) = angle.sin_cos();
            phi.push(angle);
            com.push([p[0] + body.com_offset * cos, p[1] + body.com_offset * sin]);
            p = [p[0] + body.length * cos, p[1] + body.length * sin];
        }
        Self {
            phi,
            joint,
            com,
            tip: p,
        }
    }

    /// Generalized gravity torque on every joint.
    pub fn gravity_torque(&self, bodies: &[Body], g: [f64; 2]) -> Vec<f64> {
        let n = self.joint.len();
        let mut out = vec![0.0; n];
        // Suffix sums of m and m*c over segments distal to each joint.
        let (mut sm, mut scx, mut scy) = (0.0, 0.0, 0.0);
        for j in (0..n).rev() {
            let s = j + 1;
            sm += bodies[s].mass;
            scx += bodies[s].mass * self.com[s][0];
            scy += bodies[s].mass * self.com[s][1];
            let q = self.joint[j];
            let rx = scx - q[0] * sm;
            let ry = scy - q[1] * sm;
            out[j] = rx * g[1] - ry * g[0];
        }
        out
    }

    /// Jacobian of [`Frame::gravity_torque`], symmetric.
    pub fn gravity_stiffness(&self, bodies: &[Body], g: [f64; 2]) -> DMatrix<f64> {
        let n = self.joint.len();
        let mut diag = vec![0.0; n];
        let (mut sm, mut scx, mut scy) = (0.0, 0.0, 0.0);
        for j in (0..n).rev() {
            let s = j + 1;
            sm += bodies[s].mass;
            scx += bodies[s].mass * self.com[s][0];
            scy += bodies[s].mass * self.com[s][1];
            let q = self.joint[j];
            diag[j] = -((scx - q[0] * sm) * g[0] + (scy - q[1] * sm) * g[1]);
        }
        DMatrix::from_fn(n, n, |i, j| diag[i.max(j)])
    }

    /// Joint-space mass matrix.
    pub fn mass_matrix(&self, bodies: &[Body]) -> DMatrix<f64> {
        let n = self.joint.len();
        // Suffix sums over s >= j + 1 stored at index j.
        let mut sm = vec![0.0; n];
        let mut sc = vec![[0.0; 2]; n];
        let mut scc = vec![0.0; n];
        let (mut a, mut bx, mut by, mut cc) = (0.0, 0.0, 0.0, 0.0);
        for j in (0..n).rev() {
            let s = j + 1;
            let b = &bodies[s];
            let c = self.com[s];
            a += b.mass;
            bx += b.mass * c[0];
            by += b.mass * c[1];
            cc += b.inertia + b.mass * (c[0] * c[0] + c[1] * c[1]);
            sm[j] = a;
            sc[j] = [bx, by];
            scc[j] = cc;
        }
        DMatrix::from_fn(n, n, |i, j| {
            let m = i.max(j);
            let qi = self.joint[i];
            let qj = self.joint[j];
            scc[m] - ((qi[0] + qj[0]) * sc[m][0] + (qi[1] + qj[1]) * sc[m][1])
                + (qi[0] * qj[0] + qi[1] * qj[1]) * sm[m]
        })
    }
}

/// Velocities derived from the joint rates.
struct Motion {
    /// Angular velocity of each segment.
    w: Vec<f64>,
    /// Linear velocity of each centre of mass.
    com_vel: Vec<Point>,
    tip_vel: Point,
}

fn motion(frame: &Frame, bodies: &[Body], v: &[f64]) -> Motion {
    let n_seg = bodies.len();
    let mut w = Vec::with_capacity(n_seg);
    let mut com_vel = Vec::with_capacity(n_seg);
    let mut pv = [0.0, 0.0];
    let mut rate = 0.0;
    for (s, body) in bodies.iter().enumerate() {
        if s > 0 {
            rate += v[s - 1];
        }
        let (sin, cos) = frame.phi[s].sin_cos();
        w.push(rate);
        com_vel.push([
            pv[0] - body.com_offset * rate * sin,
            pv[1] + body.com_offset * rate * cos,
        ]);
        pv = [
            pv[0] - body.length * rate * sin,
            pv[1] + body.length * rate * cos,
        ];
    }
    Motion {
        w,
        com_vel,
        tip_vel: pv,
    }
}

/// Centrifugal and gravity generalized forces: `M qdd + bias = tau`.
fn bias_forces(frame: &Frame, bodies: &[Body], w: &[f64], g: [f64; 2]) -> Vec<f64> {
    let n = frame.joint.len();
    // Velocity-product acceleration of each centre of mass.
    let mut forces = vec![[0.0; 2]; bodies.len()];
    let mut acc = [0.0, 0.0];
    for s in 1..bodies.len() {
        let b = &bodies[s];
        let (sin, cos) = frame.phi[s].sin_cos();
        let w2 = w[s] * w[s];
        let ac = [acc[0] - b.com_offset * w2 * cos, acc[1] - b.com_offset * w2 * sin];
        forces[s] = [b.mass * (ac[0] - g[0]), b.mass * (ac[1] - g[1])];
        acc = [acc[0] - b.length * w2 * cos, acc[1] - b.length * w2 * sin];
    }
    let mut out = vec![0.0; n];
    let (mut fx, mut fy, mut moment) = (0.0, 0.0, 0.0);
    for j in (0..n).rev() {
        let s = j + 1;
        let c = frame.com[s];
        let f = forces[s];
        fx += f[0];
        fy += f[1];
        moment += c[0] * f[1] - c[1] * f[0];
        let q = frame.joint[j];
        out[j] = moment - (q[0] * fy - q[1] * fx);
    }
    out
}

/// Kinetic and potential energy split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub kinetic: f64,
    pub gravitational: f64,
    pub spring: f64,
    pub contact: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.gravitational + self.spring + self.contact
    }
}

/// Time stepper for one model under a fixed load.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: GripperModel,
    load: LoadCondition,
    bodies: Vec<Body>,
    free: Vec<usize>,
    motor: Vec<f64>,
    contact_damping: f64,
    method: Integrator,
}

impl Simulator {
    pub fn new(model: &GripperModel, load: LoadCondition) -> Result<Self, ChainError> {
        model.validate()?;
        load.validate()?;
        let bodies = effective_bodies(model, load.tip_mass);
        let free = (0..model.n_joints()).filter(|&j| !model.is_locked(j)).collect();
        let motor = model
            .joint_alpha
            .iter()
            .map(|a| super::FLEXION_SIGN * a * load.pressure)
            .collect();
        let tip_mass = bodies.last().map(|b| b.mass).unwrap_or(0.0);
        Ok(Self {
            model: model.clone(),
            load,
            bodies,
            free,
            motor,
            contact_damping: 2.0 * (PENALTY_STIFFNESS * tip_mass).sqrt(),
            method: model.integrator.method,
        })
    }

    pub fn with_method(mut self, method: Integrator) -> Self {
        self.method = method;
        self
    }

    pub fn model(&self) -> &GripperModel {
        &self.model
    }

    pub fn load(&self) -> &LoadCondition {
        &self.load
    }

    pub(crate) fn frame(&self, q: &[f64]) -> Frame {
        Frame::new(&self.model, &self.bodies, q)
    }

    pub fn tip(&self, theta: &[f64]) -> Point {
        self.frame(theta).tip
    }

    /// Normal force of the penalty contact for the given state (N).
    pub fn contact_force(&self, state: &SimState) -> f64 {
        let frame = self.frame(&state.theta);
        let tip_vel = motion(&frame, &self.bodies, &state.omega).tip_vel;
        self.penalty_force(frame.tip, tip_vel)
    }

    fn penalty_force(&self, tip: Point, tip_vel: Point) -> f64 {
        match self.load.contact_plane {
            Some(plane) if tip[1] < plane => {
                let f = PENALTY_STIFFNESS * (plane - tip[1]) - self.contact_damping * tip_vel[1];
                f.max(0.0)
            }
            _ => 0.0,
        }
    }

    /// Joint torques other than inertia: spring, motor, contact and,
    /// when `with_damping`, viscous damping.
    fn applied(&self, frame: &Frame, q: &[f64], v: &[f64], tip_vel: Point, with_damping: bool) -> Vec<f64> {
        let m = &self.model;
        let normal = self.penalty_force(frame.tip, tip_vel);
        (0..q.len())
            .map(|j| {
                let mut tau = -m.joint_k[j] * (q[j] - m.rest_angle[j]) + self.motor[j];
                if with_damping {
                    tau -= m.joint_c[j] * v[j];
                }
                if normal > 0.0 {
                    tau += (frame.tip[0] - frame.joint[j][0]) * normal;
                }
                tau
            })
            .collect()
    }

    fn reduced(&self, full: &DMatrix<f64>) -> DMatrix<f64> {
        let f = &self.free;
        DMatrix::from_fn(f.len(), f.len(), |a, b| full[(f[a], f[b])])
    }

    /// Joint accelerations, zero on locked joints.
    pub fn accelerations(&self, q: &[f64], v: &[f64]) -> Result<Vec<f64>, ChainError> {
        let frame = self.frame(q);
        let mo = motion(&frame, &self.bodies, v);
        let bias = bias_forces(&frame, &self.bodies, &mo.w, self.model.gravity);
        let tau = self.applied(&frame, q, v, mo.tip_vel, true);
        let mass = self.reduced(&frame.mass_matrix(&self.bodies));
        let rhs = DVector::from_iterator(self.free.len(), self.free.iter().map(|&j| tau[j] - bias[j]));
        let sol = mass.cholesky().ok_or(ChainError::Singular)?.solve(&rhs);
        let mut acc = vec![0.0; q.len()];
        for (a, &j) in self.free.iter().enumerate() {
            acc[j] = sol[a];
        }
        Ok(acc)
    }

    /// Advances `state` in place by `dt`.
    pub fn advance(&self, state: &mut SimState, dt: f64) -> Result<(), ChainError> {
        match self.method {
            Integrator::SemiImplicitEuler => self.euler_step(state, dt)?,
            Integrator::Rk4 => self.rk4_step(state, dt)?,
        }
        state.t += dt;
        self.check(state)
    }

    /// Returns the state after one step of `dt`.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState, ChainError> {
        check_dt(dt)?;
        let mut next = state.clone();
        self.advance(&mut next, dt)?;
        Ok(next)
    }

    fn euler_step(&self, state: &mut SimState, h: f64) -> Result<(), ChainError> {
        let (q, v) = (&state.theta, &state.omega);
        let frame = self.frame(q);
        let mo = motion(&frame, &self.bodies, v);
        let bias = bias_forces(&frame, &self.bodies, &mo.w, self.model.gravity);
        let tau = self.applied(&frame, q, v, mo.tip_vel, false);
        let mass = self.reduced(&frame.mass_matrix(&self.bodies));
        let nf = self.free.len();
        let vf = DVector::from_iterator(nf, self.free.iter().map(|&j| v[j]));
        let mut rhs = &mass * &vf;
        let mut lhs = mass;
        for (a, &j) in self.free.iter().enumerate() {
            rhs[a] += h * (tau[j] - bias[j]);
            lhs[(a, a)] += h * self.model.joint_c[j];
        }
        let v_new = lhs.cholesky().ok_or(ChainError::Singular)?.solve(&rhs);
        for (a, &j) in self.free.iter().enumerate() {
            state.omega[j] = v_new[a];
            state.theta[j] += h * v_new[a];
        }
        Ok(())
    }

    fn rk4_step(&self, state: &mut SimState, h: f64) -> Result<(), ChainError> {
        let n = state.theta.len();
        let q0 = state.theta.clone();
        let v0 = state.omega.clone();
        let shifted = |base: &[f64], d: &[f64], s: f64| -> Vec<f64> {
            base.iter().zip(d).map(|(b, d)| b + s * d).collect()
        };
        let a1 = self.accelerations(&q0, &v0)?;
        let q2 = shifted(&q0, &v0, h / 2.0);
        let v2 = shifted(&v0, &a1, h / 2.0);
        let a2 = self.accelerations(&q2, &v2)?;
        let q3 = shifted(&q0, &v2, h / 2.0);
        let v3 = shifted(&v0, &a2, h / 2.0);
        let a3 = self.accelerations(&q3, &v3)?;
        let q4 = shifted(&q0, &v3, h);
        let v4 = shifted(&v0, &a3, h);
        let a4 = self.accelerations(&q4, &v4)?;
        for i in 0..n {
            state.theta[i] = q0[i] + h / 6.0 * (v0[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]);
            state.omega[i] = v0[i] + h / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]);
        }
        Ok(())
    }

    fn check(&self, state: &SimState) -> Result<(), ChainError> {
        let ok = state
            .theta
            .iter()
            .zip(&state.omega)
            .all(|(q, v)| q.is_finite() && v.is_finite() && q.abs() <= PI);
        if ok {
            Ok(())
        } else {
            Err(ChainError::IntegrationFailure { time: state.t })
        }
    }

    pub fn energy(&self, state: &SimState) -> Energy {
        let frame = self.frame(&state.theta);
        let mo = motion(&frame, &self.bodies, &state.omega);
        let g = self.model.gravity;
        let mut kinetic = 0.0;
        let mut gravitational = 0.0;
        for (s, b) in self.bodies.iter().enumerate().skip(1) {
            let cv = mo.com_vel[s];
            kinetic += 0.5 * b.mass * (cv[0] * cv[0] + cv[1] * cv[1]) + 0.5 * b.inertia * mo.w[s] * mo.w[s];
            gravitational -= b.mass * (g[0] * frame.com[s][0] + g[1] * frame.com[s][1]);
        }
        let spring = state
            .theta
            .iter()
            .zip(&self.model.rest_angle)
            .zip(&self.model.joint_k)
            .map(|((q, r), k)| 0.5 * k * (q - r).powi(2))
            .sum();
        let contact = match self.load.contact_plane {
            Some(plane) if frame.tip[1] < plane => 0.5 * PENALTY_STIFFNESS * (plane - frame.tip[1]).powi(2),
            _ => 0.0,
        };
        Energy {
            kinetic,
            gravitational,
            spring,
            contact,
        }
    }
}

pub(crate) fn check_dt(dt: f64) -> Result<(), ChainError> {
    if dt > 0.0 && dt <= 1e-3 {
        Ok(())
    } else {
        Err(ChainError::InvalidTimeStep(dt))
    }
}

/// Advances `state` by one step of `dt` under `load`.
pub fn step(
    model: &GripperModel,
    state: &SimState,
    load: &LoadCondition,
    dt: f64,
) -> Result<SimState, ChainError> {
    check_dt(dt)?;
    if state.theta.len() != model.n_joints() || state.omega.len() != model.n_joints() {
        return Err(ChainError::DimensionMismatch {
            expected: model.n_joints(),
            got: state.theta.len().min(state.omega.len()),
        });
    }
    Simulator::new(model, *load)?.step(state, dt)
}
