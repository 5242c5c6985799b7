use std::f64::consts::FRAC_PI_2;

use super::{ChainError, GripperModel};

/// Planar point (m, or px in image space).
pub type Point = [f64; 2];

/// Positions of the base, every joint and the tip, in that order.
///
/// The absolute angle of segment `s` is the mount orientation plus the sum of
/// the first `s` joint angles.
pub fn forward_kinematics(model: &GripperModel, theta: &[f64]) -> Result<Vec<Point>, ChainError> {
    let n_joints = model.n_joints();
    if theta.len() != n_joints {
        return Err(ChainError::DimensionMismatch {
            expected: n_joints,
            got: theta.len(),
        });
    }
    let mut points = Vec::with_capacity(model.n_segments() + 1);
    let mut p = model.mount.position;
    let mut phi = model.mount.orientation;
    points.push(p);
    for (s, &len) in model.segment_length.iter().enumerate() {
        if s > 0 {
            phi += theta[s - 1];
        }
        p = [p[0] + len * phi.cos(), p[1] + len * phi.sin()];
        points.push(p);
    }
    Ok(points)
}

/// Distal tip of the chain.
pub fn tip_position(model: &GripperModel, theta: &[f64]) -> Result<Point, ChainError> {
    let points = forward_kinematics(model, theta)?;
    Ok(*points.last().expect("chain has points"))
}

/// Relative joint angles from an ordered list of joint locations.
///
/// Points use image convention (y grows downward). The first angle is the
/// absolute slope of the first link, every later one is its slope minus the
/// sum of the preceding angles. `m` points give `m - 1` angles.
pub fn joint_angles_from_positions(points: &[Point]) -> Result<Vec<f64>, ChainError> {
    if points.len() < 2 {
        return Err(ChainError::DimensionMismatch {
            expected: 2,
            got: points.len(),
        });
    }
    let mut angles = Vec::with_capacity(points.len() - 1);
    let mut cumulative = 0.0;
    for (i, pair) in points.windows(2).enumerate() {
        let dx = pair[1][0] - pair[0][0];
        let dy = pair[1][1] - pair[0][1];
        if dx == 0.0 && dy == 0.0 {
            return Err(ChainError::CoincidentPoints { index: i });
        }
        if dx == 0.0 {
            return Err(ChainError::VerticalSegment { index: i });
        }
        let slope = (-dy / dx).atan();
        let theta = slope - cumulative;
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&theta) {
            return Err(ChainError::AngleOutOfRange { index: i, angle: theta });
        }
        cumulative += theta;
        angles.push(theta);
    }
    Ok(angles)
}

/// Mirrors physical points (y up) into image convention (y down).
pub fn to_image_convention(points: &[Point]) -> Vec<Point> {
    points.iter().map(|p| [p[0], -p[1]]).collect()
}
