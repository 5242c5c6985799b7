use serde::{Deserialize, Serialize};

use super::ChainError;

/// Number of segments in the default gripper discretization.
pub const DEFAULT_SEGMENTS: usize = 8;
/// Overall finger length (m).
pub const DEFAULT_TOTAL_LENGTH: f64 = 0.068;
/// Overall finger mass (kg).
pub const DEFAULT_TOTAL_MASS: f64 = 0.020;
/// In-plane section height used for the cuboid inertia (m).
pub const DEFAULT_SECTION_HEIGHT: f64 = 0.022;
/// Out-of-plane section width (m). Does not enter the planar inertia.
pub const DEFAULT_SECTION_WIDTH: f64 = 0.020;
/// Standard gravity (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Identified spring constants of the reference finger (N·m/rad).
pub const REFERENCE_K: [f64; 7] = [0.190, 0.176, 0.311, 0.517, 0.103, 0.484, 0.401];
/// Identified damping constants of the reference finger (N·m·s/rad).
pub const REFERENCE_C: [f64; 7] = [
    0.511e-3, 0.405e-3, 1.217e-3, 0.791e-3, 0.227e-3, 0.248e-3, 0.281e-3,
];
/// Identified torque-per-pressure coefficients of the reference finger.
pub const REFERENCE_ALPHA: [f64; 7] = [
    0.279e-6, 0.375e-6, 0.372e-6, 0.507e-6, 0.486e-6, 0.421e-6, 0.482e-6,
];

/// Time integration scheme used by [`Simulator`](super::Simulator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Symplectic Euler with the joint damping treated implicitly.
    #[default]
    SemiImplicitEuler,
    /// Classic fourth-order Runge-Kutta.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub method: Integrator,
    /// Default time step (s).
    pub dt: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            method: Integrator::SemiImplicitEuler,
            dt: 1e-4,
        }
    }
}

/// Base position and orientation of the rigidly clamped segment 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountPose {
    /// Position of the proximal end of segment 0 (m).
    pub position: [f64; 2],
    /// Absolute angle of segment 0 (rad, counter-clockwise from +x).
    pub orientation: f64,
}

impl Default for MountPose {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0],
            orientation: 0.0,
        }
    }
}

/// Spring, damping and torque coefficients of one hinge joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointParams {
    pub k: f64,
    pub c: f64,
    pub alpha: f64,
}

/// Per-joint parameter table, the on-disk schema for calibrated results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamTable {
    pub joints: Vec<JointParams>,
}

impl ParamTable {
    /// Identified parameters of the reference finger.
    pub fn reference() -> Self {
        Self::from_columns(&REFERENCE_K, &REFERENCE_C, &REFERENCE_ALPHA)
    }

    pub fn from_columns(k: &[f64], c: &[f64], alpha: &[f64]) -> Self {
        let joints = k
            .iter()
            .zip(c)
            .zip(alpha)
            .map(|((&k, &c), &alpha)| JointParams { k, c, alpha })
            .collect();
        Self { joints }
    }

    pub fn k(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.k).collect()
    }

    pub fn c(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.c).collect()
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.alpha).collect()
    }
}

/// Geometry, mass properties and joint coefficients of the segment chain.
///
/// Segment 0 is clamped to the mount. Joint `j` sits at the distal end of
/// segment `j` and rotates segments `j + 1 ..` relative to it. Angles are
/// counter-clockwise positive; pneumatic pressure flexes the finger towards
/// its bottom side, i.e. clockwise for the default mount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperModel {
    pub segment_length: Vec<f64>,
    pub segment_mass: Vec<f64>,
    /// Planar inertia about each segment's centre of mass (kg·m²).
    pub segment_inertia: Vec<f64>,
    /// Distance of each centre of mass from the segment's proximal joint (m).
    pub segment_com_offset: Vec<f64>,
    pub joint_k: Vec<f64>,
    pub joint_c: Vec<f64>,
    pub joint_alpha: Vec<f64>,
    pub rest_angle: Vec<f64>,
    /// Joints held rigid at their current angle during dynamics.
    /// Empty means every joint is free.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joint_locked: Vec<bool>,
    pub gravity: [f64; 2],
    #[serde(default)]
    pub mount: MountPose,
    #[serde(default)]
    pub integrator: IntegratorSettings,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self::uniform(
            DEFAULT_SEGMENTS,
            DEFAULT_TOTAL_LENGTH,
            DEFAULT_TOTAL_MASS,
            DEFAULT_SECTION_HEIGHT,
        )
        .with_params(&ParamTable::reference())
        .expect("table 1 matches the default joint count")
    }
}

impl GripperModel {
    /// Equal slicing of a cuboid finger into `n_segments` pieces, with zero
    /// joint coefficients, horizontal mount and gravity along -y.
    pub fn uniform(n_segments: usize, total_length: f64, total_mass: f64, height: f64) -> Self {
        assert!(n_segments >= 2, "a chain needs at least two segments");
        let len = total_length / n_segments as f64;
        let mass = total_mass / n_segments as f64;
        let inertia = mass * (len * len + height * height) / 12.0;
        let n_joints = n_segments - 1;
        Self {
            segment_length: vec![len; n_segments],
            segment_mass: vec![mass; n_segments],
            segment_inertia: vec![inertia; n_segments],
            segment_com_offset: vec![len / 2.0; n_segments],
            joint_k: vec![0.0; n_joints],
            joint_c: vec![0.0; n_joints],
            joint_alpha: vec![0.0; n_joints],
            rest_angle: vec![0.0; n_joints],
            joint_locked: Vec::new(),
            gravity: [0.0, -STANDARD_GRAVITY],
            mount: MountPose::default(),
            integrator: IntegratorSettings::default(),
        }
    }

    pub fn n_segments(&self) -> usize {
        self.segment_length.len()
    }

    pub fn n_joints(&self) -> usize {
        self.segment_length.len().saturating_sub(1)
    }

    pub fn total_length(&self) -> f64 {
        self.segment_length.iter().sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.segment_mass.iter().sum()
    }

    pub fn is_locked(&self, joint: usize) -> bool {
        self.joint_locked.get(joint).copied().unwrap_or(false)
    }

    /// Replaces the joint coefficients with the given table.
    pub fn with_params(mut self, params: &ParamTable) -> Result<Self, ChainError> {
        self.set_params(params)?;
        Ok(self)
    }

    pub fn set_params(&mut self, params: &ParamTable) -> Result<(), ChainError> {
        if params.joints.len() != self.n_joints() {
            return Err(ChainError::DimensionMismatch {
                expected: self.n_joints(),
                got: params.joints.len(),
            });
        }
        self.joint_k = params.k();
        self.joint_c = params.c();
        self.joint_alpha = params.alpha();
        Ok(())
    }

    pub fn params(&self) -> ParamTable {
        ParamTable::from_columns(&self.joint_k, &self.joint_c, &self.joint_alpha)
    }

    /// Checks array shapes and physical positivity.
    pub fn validate(&self) -> Result<(), ChainError> {
        let n = self.n_segments();
        if n < 2 {
            return Err(ChainError::InvalidModel(
                "at least two segments are required".into(),
            ));
        }
        let seg_arrays = [
            ("segment_mass", self.segment_mass.len()),
            ("segment_inertia", self.segment_inertia.len()),
            ("segment_com_offset", self.segment_com_offset.len()),
        ];
        for (name, len) in seg_arrays {
            if len != n {
                return Err(ChainError::InvalidModel(format!(
                    "{name} has {len} entries, expected {n}"
                )));
            }
        }
        let joint_arrays = [
            ("joint_k", self.joint_k.len()),
            ("joint_c", self.joint_c.len()),
            ("joint_alpha", self.joint_alpha.len()),
            ("rest_angle", self.rest_angle.len()),
        ];
        for (name, len) in joint_arrays {
            if len != n - 1 {
                return Err(ChainError::InvalidModel(format!(
                    "{name} has {len} entries, expected {}",
                    n - 1
                )));
            }
        }
        if !self.joint_locked.is_empty() && self.joint_locked.len() != n - 1 {
            return Err(ChainError::InvalidModel(format!(
                "joint_locked has {} entries, expected {} or none",
                self.joint_locked.len(),
                n - 1
            )));
        }
        let positive = [
            ("segment_length", &self.segment_length),
            ("segment_mass", &self.segment_mass),
            ("segment_inertia", &self.segment_inertia),
        ];
        for (name, values) in positive {
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(ChainError::InvalidModel(format!(
                    "{name} must be strictly positive, found {v}"
                )));
            }
        }
        for (name, values) in [("joint_k", &self.joint_k), ("joint_c", &self.joint_c)] {
            if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(ChainError::InvalidModel(format!(
                    "{name} must be non-negative, found {v}"
                )));
            }
        }
        let all_finite = self
            .segment_com_offset
            .iter()
            .chain(&self.joint_alpha)
            .chain(&self.rest_angle)
            .chain(&self.gravity)
            .chain(&self.mount.position)
            .all(|v| v.is_finite());
        if !all_finite || !self.mount.orientation.is_finite() {
            return Err(ChainError::InvalidModel("non-finite parameter".into()));
        }
        if !(self.integrator.dt > 0.0 && self.integrator.dt <= 1e-3) {
            return Err(ChainError::InvalidTimeStep(self.integrator.dt));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ChainError> {
        let model: Self =
            serde_json::from_str(text).map_err(|e| ChainError::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// External loading of the finger.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LoadCondition {
    /// Point mass hung at the distal tip (kg).
    pub tip_mass: f64,
    /// Actuation pressure (Pa).
    pub pressure: f64,
    /// Height of a horizontal support plane under the tip (m), if any.
    #[serde(default)]
    pub contact_plane: Option<f64>,
}

impl LoadCondition {
    pub const MAX_TIP_MASS: f64 = 0.2;
    pub const MAX_PRESSURE: f64 = 1e5;

    pub fn unloaded() -> Self {
        Self::default()
    }

    pub fn tip_mass(mass: f64) -> Self {
        Self {
            tip_mass: mass,
            ..Self::default()
        }
    }

    pub fn pressure(pressure: f64) -> Self {
        Self {
            pressure,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if !(0.0..=Self::MAX_TIP_MASS).contains(&self.tip_mass) {
            return Err(ChainError::InvalidLoad(format!(
                "tip mass {} kg outside [0, {}]",
                self.tip_mass,
                Self::MAX_TIP_MASS
            )));
        }
        if !(0.0..=Self::MAX_PRESSURE).contains(&self.pressure) {
            return Err(ChainError::InvalidLoad(format!(
                "pressure {} Pa outside [0, {}]",
                self.pressure,
                Self::MAX_PRESSURE
            )));
        }
        if let Some(h) = self.contact_plane {
            if !h.is_finite() {
                return Err(ChainError::InvalidLoad("non-finite contact plane".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_matches_finger_dimensions() {
        let m = GripperModel::default();
        assert_eq!(m.n_segments(), 8);
        assert_eq!(m.n_joints(), 7);
        assert!((m.total_mass() - 0.020).abs() < 1e-15);
        assert!((m.total_length() - 0.068).abs() < 1e-15);
        assert!((m.segment_length[0] - 0.0085).abs() < 1e-15);
        assert_eq!(m.joint_k, REFERENCE_K.to_vec());
        m.validate().unwrap();
    }

    #[test]
    fn json_round_trip_preserves_model() {
        let m = GripperModel::default();
        let back = GripperModel::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn validation_rejects_bad_shapes_and_values() {
        let mut m = GripperModel::default();
        m.joint_k.pop();
        assert!(matches!(m.validate(), Err(ChainError::InvalidModel(_))));

        let mut m = GripperModel::default();
        m.segment_mass[3] = 0.0;
        assert!(matches!(m.validate(), Err(ChainError::InvalidModel(_))));

        let mut m = GripperModel::default();
        m.joint_c[0] = -1.0;
        assert!(matches!(m.validate(), Err(ChainError::InvalidModel(_))));

        let mut m = GripperModel::default();
        m.integrator.dt = 2e-3;
        assert!(matches!(m.validate(), Err(ChainError::InvalidTimeStep(_))));
    }

    #[test]
    fn load_limits() {
        assert!(LoadCondition::tip_mass(0.04).validate().is_ok());
        assert!(LoadCondition::tip_mass(0.3).validate().is_err());
        assert!(LoadCondition::pressure(2e5).validate().is_err());
    }

    #[test]
    fn param_table_columns() {
        let t = ParamTable::reference();
        assert_eq!(t.joints.len(), 7);
        assert_eq!(t.c()[2], 1.217e-3);
        assert_eq!(t.alpha()[3], 0.507e-6);
    }
}
