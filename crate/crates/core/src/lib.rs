//! Digital twin of a pneumatic soft finger modelled as a chain of rigid
//! segments joined by spring-damper hinges.
//!
//! - [`chain`]: kinematics, dynamics, statics, release and tip force
//! - [`metrics`]: smoothing, overshoot counting and settling time
//! - [`vision`]: silhouette masks, contours, joint detection, tip tracking
//! - [`pso`]: global-best particle swarm optimizer
//! - [`calibration`]: spring, damping and torque identification campaigns
//! - [`cli`]: the `softgrip` command line front end
//! - [`io`]: atomic output files
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod calibration;
pub mod chain;
pub mod cli;
pub mod io;
pub mod metrics;
pub mod pso;
pub mod vision;
