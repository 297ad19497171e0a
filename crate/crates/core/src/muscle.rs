//! Hill-type muscles with rigid tendons and first-order activation dynamics.
//!
//! Musculotendon paths are affine in the joint angles, `l_total = l_ref - R q`,
//! so fibre velocities are `-R qdot` and joint torques are `Rᵀ F`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Muscle order used by the arm26 presets.
pub const ARM26_MUSCLES: [&str; 6] = [
    "shoulder_flexor",
    "shoulder_extensor",
    "elbow_flexor",
    "elbow_extensor",
    "biarticular_flexor",
    "biarticular_extensor",
];

/// Flexor/extensor index pairs of the arm26 layout.
pub const ARM26_ANTAGONISTS: [(usize, usize); 3] = [(0, 1), (2, 3), (4, 5)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuscleParams {
    pub f_max: Vec<f64>,
    pub l_opt: Vec<f64>,
    pub l_tendon: Vec<f64>,
    /// Musculotendon length at `q = 0`.
    pub l_ref: Vec<f64>,
    /// Moment arms, one `[shoulder, elbow]` row per muscle (m).
    pub moment_arms: Vec<[f64; 2]>,
    pub tau_act: f64,
    pub tau_deact: f64,
    /// Maximum shortening velocity in optimal fibre lengths per second.
    pub v_max_factor: f64,
}

impl Default for MuscleParams {
    fn default() -> Self {
        Self::arm26()
    }
}

impl MuscleParams {
    pub fn arm26() -> Self {
        let mono = 0.04;
        let bi = 0.03;
        let moment_arms = vec![
            [mono, 0.0],
            [-mono, 0.0],
            [0.0, mono],
            [0.0, -mono],
            [bi, bi],
            [-bi, -bi],
        ];
        let l_opt = vec![0.12, 0.12, 0.12, 0.12, 0.16, 0.16];
        let l_tendon = vec![0.10; 6];
        let l_ref = l_opt.iter().zip(&l_tendon).map(|(o, t)| o + t).collect();
        Self {
            f_max: vec![100.0; 6],
            l_opt,
            l_tendon,
            l_ref,
            moment_arms,
            tau_act: 0.01,
            tau_deact: 0.04,
            v_max_factor: 10.0,
        }
    }

    pub fn len(&self) -> usize {
        self.f_max.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f_max.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.len();
        for (what, n) in [
            ("l_opt", self.l_opt.len()),
            ("l_tendon", self.l_tendon.len()),
            ("l_ref", self.l_ref.len()),
            ("moment_arms", self.moment_arms.len()),
        ] {
            if n != m {
                return Err(Error::Dimension {
                    what,
                    expected: m,
                    got: n,
                });
            }
        }
        if self.f_max.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::InvalidParam("f_max must be > 0".into()));
        }
        if self.l_opt.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidParam("l_opt must be > 0".into()));
        }
        if !(self.tau_act > 0.0 && self.tau_act < self.tau_deact) {
            return Err(Error::InvalidParam("need 0 < tau_act < tau_deact".into()));
        }
        if !(self.v_max_factor > 0.0) {
            return Err(Error::InvalidParam("v_max_factor must be > 0".into()));
        }
        for (i, (lr, lt)) in self.l_ref.iter().zip(&self.l_tendon).enumerate() {
            if lr <= lt {
                return Err(Error::InvalidParam(format!(
                    "muscle {i}: reference length must exceed tendon length"
                )));
            }
        }
        Ok(())
    }

    /// Checks the arm26 routing: four monoarticular and two biarticular muscles.
    pub fn validate_arm26(&self) -> Result<()> {
        self.validate()?;
        if self.len() != 6 {
            return Err(Error::Dimension {
                what: "arm26 muscles",
                expected: 6,
                got: self.len(),
            });
        }
        let spans: Vec<usize> = self
            .moment_arms
            .iter()
            .map(|r| r.iter().filter(|x| **x != 0.0).count())
            .collect();
        let mono = spans.iter().filter(|&&s| s == 1).count();
        let bi = spans.iter().filter(|&&s| s == 2).count();
        if mono != 4 || bi != 2 {
            return Err(Error::InvalidParam(format!(
                "arm26 needs 4 monoarticular and 2 biarticular muscles, got {mono} and {bi}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleState {
    pub activity: Vec<f64>,
    pub length: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl MuscleState {
    pub fn at(q: &[f64; 2], qdot: &[f64; 2], activity: Vec<f64>, params: &MuscleParams) -> Self {
        Self {
            activity,
            length: muscle_lengths(q, params),
            velocity: muscle_velocities(qdot, params),
        }
    }
}

/// Time constant of the activation dynamics.
pub fn activation_tau(activity: f64, excitation: f64, params: &MuscleParams) -> f64 {
    if excitation > activity {
        params.tau_act * (0.5 + 1.5 * activity)
    } else {
        params.tau_deact / (0.5 + 1.5 * activity)
    }
}

pub fn activation_derivative(activity: f64, excitation: f64, params: &MuscleParams) -> f64 {
    let e = excitation.clamp(0.0, 1.0);
    (e - activity) / activation_tau(activity, e, params)
}

/// Explicit Euler step of the activation dynamics, clamped to `[0, 1]`.
pub fn activation_step(activity: f64, excitation: f64, dt: f64, params: &MuscleParams) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParam("activation dt must be > 0".into()));
    }
    let next = activity + dt * activation_derivative(activity, excitation, params);
    Ok(next.clamp(0.0, 1.0))
}

/// Fibre lengths under rigid tendons.
pub fn muscle_lengths(q: &[f64; 2], params: &MuscleParams) -> Vec<f64> {
    params
        .moment_arms
        .iter()
        .zip(params.l_ref.iter().zip(&params.l_tendon))
        .map(|(r, (lr, lt))| lr - r[0] * q[0] - r[1] * q[1] - lt)
        .collect()
}

pub fn muscle_velocities(qdot: &[f64; 2], params: &MuscleParams) -> Vec<f64> {
    params
        .moment_arms
        .iter()
        .map(|r| -(r[0] * qdot[0] + r[1] * qdot[1]))
        .collect()
}

pub fn force_length(l_norm: f64) -> f64 {
    if (0.5..=1.5).contains(&l_norm) {
        let d = l_norm - 1.0;
        1.0 - 4.0 * d * d
    } else {
        0.0
    }
}

/// `v_norm` is fibre velocity divided by the maximum shortening velocity.
pub fn force_velocity(v_norm: f64) -> f64 {
    (1.0 + v_norm).clamp(0.0, 1.35)
}

pub fn force_passive(l_norm: f64) -> f64 {
    if l_norm > 1.0 {
        let d = l_norm - 1.0;
        3.0 * d * d
    } else {
        0.0
    }
}

/// Force of muscle `i` given activity, normalized length `l_muscle / l_opt`
/// and fibre velocity in m/s.
pub fn muscle_force(activity: f64, l_norm: f64, velocity: f64, i: usize, params: &MuscleParams) -> f64 {
    let v_norm = velocity / (params.v_max_factor * params.l_opt[i]);
    let a = activity.clamp(0.0, 1.0);
    let f = params.f_max[i] * (a * force_length(l_norm) * force_velocity(v_norm) + force_passive(l_norm));
    f.max(0.0)
}

pub fn muscle_forces(state: &MuscleState, params: &MuscleParams) -> Vec<f64> {
    (0..params.len())
        .map(|i| {
            muscle_force(
                state.activity[i],
                state.length[i] / params.l_opt[i],
                state.velocity[i],
                i,
                params,
            )
        })
        .collect()
}

/// `τ = Rᵀ F`.
pub fn joint_torques_from_muscles(forces: &[f64], params: &MuscleParams) -> Result<[f64; 2]> {
    if forces.len() != params.len() {
        return Err(Error::Dimension {
            what: "muscle forces",
            expected: params.len(),
            got: forces.len(),
        });
    }
    ensure_finite("muscle forces", forces)?;
    let mut tau = [0.0; 2];
    for (f, r) in forces.iter().zip(&params.moment_arms) {
        tau[0] += r[0] * f;
        tau[1] += r[1] * f;
    }
    Ok(tau)
}
