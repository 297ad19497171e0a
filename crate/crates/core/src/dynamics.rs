//! Planar two-link arm and continuous mountain car.
//!
//! Arm angle convention: `q = (0, 0)` is the fully extended arm pointing along
//! the gravity direction (straight down, `-y`). `q[0]` is the absolute shoulder
//! angle, `q[1]` the elbow angle relative to the upper arm. Positive angles
//! swing the hand towards `-x`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub const DEFAULT_JOINT_LIMIT: f64 = 120.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub q: [f64; 2],
    pub qdot: [f64; 2],
}

impl JointState {
    pub fn rest() -> Self {
        Self {
            q: [0.0; 2],
            qdot: [0.0; 2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArmGeometry {
    /// Link lengths (m).
    pub lengths: [f64; 2],
    /// Link masses (kg), uniform rods.
    pub masses: [f64; 2],
    /// Per-joint `(lower, upper)` limits (rad).
    pub limits: [(f64, f64); 2],
    /// In-plane gravity (m/s²).
    pub gravity: [f64; 2],
    /// Control step (s).
    pub dt: f64,
    /// Viscous joint damping (N·m·s/rad).
    pub damping: f64,
    /// Semi-implicit Euler substeps per control step.
    pub substeps: usize,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        Self {
            lengths: [0.30, 0.33],
            masses: [1.0, 1.0],
            limits: [(-DEFAULT_JOINT_LIMIT, DEFAULT_JOINT_LIMIT); 2],
            gravity: [0.0, -9.81],
            dt: 0.01,
            damping: 0.05,
            substeps: 100,
        }
    }
}

impl ArmGeometry {
    pub fn validate(&self) -> Result<()> {
        let flat = [
            self.lengths[0],
            self.lengths[1],
            self.masses[0],
            self.masses[1],
            self.gravity[0],
            self.gravity[1],
            self.dt,
            self.damping,
        ];
        ensure_finite("arm geometry", &flat)?;
        if self.lengths.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidParam("link lengths must be > 0".into()));
        }
        if self.masses.iter().any(|&m| m <= 0.0) {
            return Err(Error::InvalidParam("link masses must be > 0".into()));
        }
        if self.limits.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidParam("joint limits need lower < upper".into()));
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidParam("dt must be > 0".into()));
        }
        if self.damping < 0.0 {
            return Err(Error::InvalidParam("damping must be >= 0".into()));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidParam("substeps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn reach(&self) -> f64 {
        self.lengths[0] + self.lengths[1]
    }

    /// Axis-aligned bounding box of the hand workspace, `[(xmin, xmax), (ymin, ymax)]`.
    pub fn workspace_bounds(&self) -> [(f64, f64); 2] {
        let r = self.reach();
        [(-r, r), (-r, r)]
    }

    pub fn within_limits(&self, q: &[f64; 2]) -> bool {
        q.iter()
            .zip(self.limits.iter())
            .all(|(&x, &(lo, hi))| x >= lo && x <= hi)
    }

    /// Mass matrix of the arm at elbow angle `q2`.
    pub fn mass_matrix(&self, q2: f64) -> [[f64; 2]; 2] {
        let [l1, l2] = self.lengths;
        let [m1, m2] = self.masses;
        let (c1, c2) = (0.5 * l1, 0.5 * l2);
        let (i1, i2) = (m1 * l1 * l1 / 12.0, m2 * l2 * l2 / 12.0);
        let cos2 = q2.cos();
        let m22 = i2 + m2 * c2 * c2;
        let m12 = m22 + m2 * l1 * c2 * cos2;
        let m11 = i1 + m1 * c1 * c1 + i2 + m2 * (l1 * l1 + c2 * c2 + 2.0 * l1 * c2 * cos2);
        [[m11, m12], [m12, m22]]
    }

    /// Generalized gravity force `dV/dq`.
    pub fn gravity_torque(&self, q: &[f64; 2]) -> [f64; 2] {
        let [l1, l2] = self.lengths;
        let [m1, m2] = self.masses;
        let (c1, c2) = (0.5 * l1, 0.5 * l2);
        let [gx, gy] = self.gravity;
        // d/dphi of the unit link direction (-sin phi, -cos phi)
        let dir_deriv = |phi: f64| -> f64 { gx * -phi.cos() + gy * phi.sin() };
        let d1 = dir_deriv(q[0]);
        let d12 = dir_deriv(q[0] + q[1]);
        [
            -(m1 * c1 + m2 * l1) * d1 - m2 * c2 * d12,
            -m2 * c2 * d12,
        ]
    }

    /// Joint accelerations for the given state and applied torques.
    pub fn acceleration(&self, q: &[f64; 2], qdot: &[f64; 2], torques: &[f64; 2]) -> [f64; 2] {
        let [l1, _] = self.lengths;
        let m2 = self.masses[1];
        let c2 = 0.5 * self.lengths[1];
        let h = m2 * l1 * c2 * q[1].sin();
        let coriolis = [
            -h * (2.0 * qdot[0] * qdot[1] + qdot[1] * qdot[1]),
            h * qdot[0] * qdot[0],
        ];
        let g = self.gravity_torque(q);
        let rhs = [
            torques[0] - coriolis[0] - g[0] - self.damping * qdot[0],
            torques[1] - coriolis[1] - g[1] - self.damping * qdot[1],
        ];
        let m = self.mass_matrix(q[1]);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [
            (m[1][1] * rhs[0] - m[0][1] * rhs[1]) / det,
            (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
        ]
    }

    pub fn kinetic_energy(&self, state: &JointState) -> f64 {
        let m = self.mass_matrix(state.q[1]);
        let v = state.qdot;
        0.5 * (m[0][0] * v[0] * v[0] + 2.0 * m[0][1] * v[0] * v[1] + m[1][1] * v[1] * v[1])
    }

    fn clamp_to_limits(&self, state: &mut JointState) {
        for j in 0..2 {
            let (lo, hi) = self.limits[j];
            if state.q[j] > hi {
                state.q[j] = hi;
                state.qdot[j] = 0.0;
            } else if state.q[j] < lo {
                state.q[j] = lo;
                state.qdot[j] = 0.0;
            }
        }
    }
}

/// Advances the arm by one control step of `geometry.dt` under constant torques.
pub fn arm_step(state: &JointState, torques: &[f64; 2], geometry: &ArmGeometry) -> Result<JointState> {
    ensure_finite("torques", torques)?;
    if !state.is_finite() {
        return Err(Error::NonFinite("joint state"));
    }
    let h = geometry.dt / geometry.substeps as f64;
    let mut next = *state;
    for _ in 0..geometry.substeps {
        arm_substep(&mut next, torques, geometry, h);
    }
    if !next.is_finite() {
        return Err(Error::NonFinite("integrated joint state"));
    }
    Ok(next)
}

/// One semi-implicit Euler substep of length `h`, followed by the limit clamp.
pub(crate) fn arm_substep(state: &mut JointState, torques: &[f64; 2], geometry: &ArmGeometry, h: f64) {
    let acc = geometry.acceleration(&state.q, &state.qdot, torques);
    for j in 0..2 {
        state.qdot[j] += h * acc[j];
        state.q[j] += h * state.qdot[j];
    }
    geometry.clamp_to_limits(state);
}

/// Hand position `(x, y)` in metres.
pub fn forward_kinematics(q: &[f64; 2], geometry: &ArmGeometry) -> [f64; 2] {
    let [l1, l2] = geometry.lengths;
    let a = q[0];
    let b = q[0] + q[1];
    [-l1 * a.sin() - l2 * b.sin(), -l1 * a.cos() - l2 * b.cos()]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountainCarState {
    pub x: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MountainCarParams {
    pub force_scale: f64,
    pub gravity_scale: f64,
    pub x_range: (f64, f64),
    pub v_max: f64,
    pub goal_x: f64,
}

impl Default for MountainCarParams {
    fn default() -> Self {
        Self {
            force_scale: 0.0015,
            gravity_scale: 0.0025,
            x_range: (-1.2, 0.6),
            v_max: 0.07,
            goal_x: 0.45,
        }
    }
}

impl MountainCarParams {
    /// Position of the valley floor, where `cos(3x) = 0` inside the track.
    pub fn valley(&self) -> f64 {
        -std::f64::consts::FRAC_PI_6
    }
}

pub fn mountain_car_step(state: &MountainCarState, action: f64, params: &MountainCarParams) -> MountainCarState {
    let a = action.clamp(-1.0, 1.0);
    let (xmin, xmax) = params.x_range;
    let mut v = state.v + a * params.force_scale - params.gravity_scale * (3.0 * state.x).cos();
    v = v.clamp(-params.v_max, params.v_max);
    let x = (state.x + v).clamp(xmin, xmax);
    if x == xmin && v < 0.0 {
        v = 0.0;
    }
    MountainCarState { x, v }
}
