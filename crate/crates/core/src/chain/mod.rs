//! Rigid-link model of the finger: kinematics, dynamics and statics.

mod dynamics;
mod kinematics;
mod model;
mod release;
mod statics;

use thiserror::Error;

pub use dynamics::{step, Energy, SimState, Simulator, PENALTY_STIFFNESS};
pub use kinematics::{
    forward_kinematics, joint_angles_from_positions, tip_position, to_image_convention, Point,
};
pub use model::*;
pub use release::simulate_release;
pub use statics::{
    measure_tip_force, static_equilibrium, static_residual, StaticOptions, TipForce,
    TipForceProbe,
};

pub(crate) use dynamics::check_dt;

/// Sign of the pressure torque: actuation flexes the finger clockwise.
pub const FLEXION_SIGN: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("points {index} and {} coincide", index + 1)]
    CoincidentPoints { index: usize },
    #[error("segment {index} is vertical in the image")]
    VerticalSegment { index: usize },
    #[error("angle {index} = {angle} rad is outside [-pi/2, pi/2]")]
    AngleOutOfRange { index: usize, angle: f64 },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid load: {0}")]
    InvalidLoad(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("time step {0} s outside (0, 1e-3]")]
    InvalidTimeStep(f64),
    #[error("integration failed at t = {time} s")]
    IntegrationFailure { time: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("joint {joint} at {angle} rad is outside the valid range")]
    OutOfValidRange { joint: usize, angle: f64 },
    #[error("singular mass or stiffness matrix")]
    Singular,
}
