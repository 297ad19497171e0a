//! Differential extrinsic plasticity (DEP).
//!
//! The controller maps sensors `s` to actions with `a = tanh(κ C̃ s + h)`.
//! The control matrix follows the velocity correlation of its own sensors,
//!
//! ```text
//! C ← C + (f(ṡ_t) ṡ_{t-Δt}ᵀ - C) / τ,    ṡ_t = s_t - s_{t-1}
//! ```
//!
//! and is renormalized every step so that all sensor channels keep a strong
//! influence. A slow bias `h` pushes against the controller's own outputs,
//! which keeps it from parking the system at a joint limit.
//!
//! `C` starts at zero, so the controller is silent until the sensor history
//! holds enough samples to form both velocities.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// How `‖C‖` is reduced in the normalization `C̃ = C / (‖C‖ + ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Each column divided by the largest absolute entry in that column.
    #[default]
    ColumnMax,
    /// Each column divided by its Euclidean norm.
    ColumnL2,
    /// Each row divided by the largest absolute entry in that row.
    RowMax,
    /// Each row divided by its Euclidean norm.
    RowL2,
}

/// Inverse prediction model `f(ṡ)` relating sensor changes to actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseModel {
    /// `f(ṡ) = ṡ`, one sensor per actuator.
    Identity,
    /// `f(ṡ) = -ṡ`, for muscle length sensors (muscles shorten when excited).
    Negated,
    /// `f(ṡ) = F ṡ` with `F` row-major, actions × sensors.
    Matrix(Vec<f64>),
}

impl InverseModel {
    pub fn from_sign(sign: f64) -> Self {
        if sign < 0.0 {
            Self::Negated
        } else {
            Self::Identity
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepParams {
    pub kappa: f64,
    pub tau: f64,
    /// Lag between the two velocity samples, in steps.
    pub time_dist: usize,
    pub buffer_size: usize,
    pub bias_rate: f64,
    /// Moving-average window over raw sensors; 0 and 1 disable smoothing.
    pub s4avg: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Weight of the force channel in muscle sensors.
    #[serde(default)]
    pub force_scale: f64,
    #[serde(default = "default_inverse")]
    pub inverse: InverseModel,
    #[serde(default)]
    pub norm: NormKind,
}

fn default_epsilon() -> f64 {
    1e-8
}

fn default_inverse() -> InverseModel {
    InverseModel::Identity
}

impl DepParams {
    /// Arm-reaching hyperparameters.
    pub fn arm() -> Self {
        Self {
            kappa: 1000.0,
            tau: 80.0,
            time_dist: 60,
            buffer_size: 600,
            bias_rate: 0.00002,
            s4avg: 6,
            epsilon: default_epsilon(),
            force_scale: 0.0003,
            inverse: InverseModel::Identity,
            norm: NormKind::ColumnMax,
        }
    }

    /// Ostrich locomotion hyperparameters.
    pub fn locomotion() -> Self {
        Self {
            kappa: 20.0,
            tau: 8.0,
            time_dist: 5,
            buffer_size: 90,
            bias_rate: 0.03,
            s4avg: 1,
            epsilon: default_epsilon(),
            force_scale: 0.0003,
            inverse: InverseModel::Identity,
            norm: NormKind::ColumnMax,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "arm" => Some(Self::arm()),
            "locomotion" => Some(Self::locomotion()),
            _ => None,
        }
    }

    pub fn with_inverse(mut self, inverse: InverseModel) -> Self {
        self.inverse = inverse;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::InvalidParam("kappa must be > 0".into()));
        }
        if !(self.tau >= 1.0) {
            return Err(Error::InvalidParam("tau must be >= 1".into()));
        }
        if self.time_dist < 1 || self.time_dist >= self.buffer_size {
            return Err(Error::InvalidParam("need 1 <= time_dist < buffer_size".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParam("epsilon must be > 0".into()));
        }
        if !(self.bias_rate >= 0.0) || !self.force_scale.is_finite() {
            return Err(Error::InvalidParam("bias_rate must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-channel min/max map onto `[-1, 1]`, extrapolated linearly outside the
/// calibrated range.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Normalizer {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl Normalizer {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::Dimension {
                what: "normalizer bounds",
                expected: min.len(),
                got: max.len(),
            });
        }
        ensure_finite("normalizer bounds", &min)?;
        ensure_finite("normalizer bounds", &max)?;
        Ok(Self { min, max })
    }

    /// Calibrates from recorded sample vectors.
    pub fn from_samples<'a, I>(samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut it = samples.into_iter();
        let first = it.next().ok_or(Error::Empty)?;
        let mut min = first.to_vec();
        let mut max = first.to_vec();
        for s in it {
            if s.len() != min.len() {
                return Err(Error::Dimension {
                    what: "calibration sample",
                    expected: min.len(),
                    got: s.len(),
                });
            }
            for (j, &x) in s.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Self::new(min, max)
    }

    pub fn is_calibrated(&self) -> bool {
        !self.min.is_empty()
    }

    pub fn len(&self) -> usize {
        self.min.len()
    }

    pub fn is_empty(&self) -> bool {
        self.min.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.is_calibrated() {
            return Err(Error::Uncalibrated);
        }
        if x.len() != self.min.len() {
            return Err(Error::Dimension {
                what: "normalizer input",
                expected: self.min.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let w = hi - lo;
                if w > 0.0 {
                    2.0 * (v - lo) / w - 1.0
                } else {
                    0.0
                }
            })
            .collect())
    }
}

/// Muscle sensor `s = l̃ + c f̃`, both channels mapped to `[-1, 1]`.
pub fn dep_sensor(
    lengths: &[f64],
    forces: &[f64],
    length_norm: &Normalizer,
    force_norm: &Normalizer,
    force_scale: f64,
) -> Result<Vec<f64>> {
    let l = length_norm.apply(lengths)?;
    let f = force_norm.apply(forces)?;
    Ok(l.iter().zip(&f).map(|(a, b)| a + force_scale * b).collect())
}

/// Normalized copy of a row-major `rows × cols` matrix.
pub fn normalize_c(c: &[f64], rows: usize, cols: usize, epsilon: f64, kind: NormKind) -> Vec<f64> {
    debug_assert_eq!(c.len(), rows * cols);
    let mut out = c.to_vec();
    match kind {
        NormKind::ColumnMax | NormKind::ColumnL2 => {
            let norms = column_norms(c, rows, cols, kind);
            for row in out.chunks_exact_mut(cols) {
                for (x, nrm) in row.iter_mut().zip(&norms) {
                    *x /= nrm + epsilon;
                }
            }
        }
        NormKind::RowMax | NormKind::RowL2 => {
            for row in out.chunks_exact_mut(cols) {
                let nrm = row_norm(row, kind);
                for x in row.iter_mut() {
                    *x /= nrm + epsilon;
                }
            }
        }
    }
    out
}

fn column_norms(c: &[f64], rows: usize, cols: usize, kind: NormKind) -> Vec<f64> {
    let mut acc = vec![0.0; cols];
    for row in c.chunks_exact(cols).take(rows) {
        for (a, &x) in acc.iter_mut().zip(row) {
            match kind {
                NormKind::ColumnMax => *a = f64::max(*a, x.abs()),
                _ => *a += x * x,
            }
        }
    }
    if kind == NormKind::ColumnL2 {
        acc.iter_mut().for_each(|a| *a = a.sqrt());
    }
    acc
}

fn row_norm(row: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::RowMax => row.iter().fold(0.0, |m, x| f64::max(m, x.abs())),
        _ => row.iter().map(|x| x * x).sum::<f64>().sqrt(),
    }
}

/// Learner and controller state for one environment instance.
#[derive(Debug, Clone)]
pub struct DepState {
    params: DepParams,
    actions: usize,
    sensors: usize,
    /// Raw (pre-normalization) control matrix, row-major actions × sensors.
    c: Vec<f64>,
    h: Vec<f64>,
    /// Column norms of `c`, refreshed by every learning step.
    col_norms: Vec<f64>,
    raw: VecDeque<Vec<f64>>,
    history: VecDeque<Vec<f64>>,
    /// Last action emitted by [`DepState::act`], consumed by the bias update.
    pending_action: Option<Vec<f64>>,
}

impl DepState {
    pub fn new(params: DepParams, actions: usize, sensors: usize) -> Result<Self> {
        params.validate()?;
        if actions == 0 || sensors == 0 {
            return Err(Error::InvalidParam("DEP needs at least one sensor and action".into()));
        }
        match &params.inverse {
            InverseModel::Identity | InverseModel::Negated if actions != sensors => {
                return Err(Error::Dimension {
                    what: "identity inverse model needs actions == sensors",
                    expected: sensors,
                    got: actions,
                });
            }
            InverseModel::Matrix(f) if f.len() != actions * sensors => {
                return Err(Error::Dimension {
                    what: "inverse model matrix",
                    expected: actions * sensors,
                    got: f.len(),
                });
            }
            _ => {}
        }
        Ok(Self {
            actions,
            sensors,
            c: vec![0.0; actions * sensors],
            h: vec![0.0; actions],
            col_norms: vec![0.0; sensors],
            raw: VecDeque::with_capacity(params.s4avg.max(1)),
            history: VecDeque::with_capacity(params.buffer_size),
            pending_action: None,
            params,
        })
    }

    pub fn params(&self) -> &DepParams {
        &self.params
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors
    }

    /// Raw control matrix before normalization.
    pub fn c_raw(&self) -> &[f64] {
        &self.c
    }

    pub fn bias(&self) -> &[f64] {
        &self.h
    }

    pub fn c_normalized(&self) -> Vec<f64> {
        normalize_c(&self.c, self.actions, self.sensors, self.params.epsilon, self.params.norm)
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn is_warm(&self) -> bool {
        self.history.len() >= self.params.time_dist + 2
    }

    /// Forgets C, the bias and all sensor history.
    pub fn reset(&mut self) {
        self.c.fill(0.0);
        self.h.fill(0.0);
        self.col_norms.fill(0.0);
        self.raw.clear();
        self.history.clear();
        self.pending_action = None;
    }

    /// Drops the sensor history but keeps the learned matrix and bias,
    /// e.g. across an environment reset.
    pub fn clear_history(&mut self) {
        self.raw.clear();
        self.history.clear();
        self.pending_action = None;
    }

    fn push_sensor(&mut self, s: &[f64]) {
        let window = self.params.s4avg.max(1);
        if self.raw.len() == window {
            self.raw.pop_front();
        }
        self.raw.push_back(s.to_vec());
        let inv = 1.0 / self.raw.len() as f64;
        let mut smooth = vec![0.0; self.sensors];
        for r in &self.raw {
            for (a, x) in smooth.iter_mut().zip(r) {
                *a += x;
            }
        }
        smooth.iter_mut().for_each(|a| *a *= inv);
        if self.history.len() == self.params.buffer_size {
            self.history.pop_front();
        }
        self.history.push_back(smooth);
    }

    /// Records a sensor vector and performs one learning step on `C` and `h`.
    /// Before the history is long enough to form both velocities the matrix
    /// is left untouched.
    pub fn update(&mut self, s: &[f64]) -> Result<()> {
        if s.len() != self.sensors {
            return Err(Error::Dimension {
                what: "DEP sensor vector",
                expected: self.sensors,
                got: s.len(),
            });
        }
        ensure_finite("DEP sensors", s)?;
        self.push_sensor(s);

        if let Some(a) = self.pending_action.take() {
            for (h, a) in self.h.iter_mut().zip(&a) {
                *h = (*h - self.params.bias_rate * a).clamp(-1.0, 1.0);
            }
        }

        if !self.is_warm() {
            return Ok(());
        }
        let len = self.history.len();
        let dt = self.params.time_dist;
        let vel_now: Vec<f64> = diff(&self.history[len - 1], &self.history[len - 2]);
        let vel_past: Vec<f64> = diff(&self.history[len - 1 - dt], &self.history[len - 2 - dt]);
        let drive = self.inverse_prediction(&vel_now);
        self.learn_from(&drive, &vel_past);
        Ok(())
    }

    /// `C ← C + (drive · pastᵀ − C)/τ`, tracking column norms on the way.
    fn learn_from(&mut self, drive: &[f64], past: &[f64]) {
        let k = 1.0 / self.params.tau;
        let norms = &mut self.col_norms;
        norms.fill(0.0);
        let kind = self.params.norm;
        for (row, &d) in self.c.chunks_exact_mut(self.sensors).zip(drive) {
            for (c, &p) in row.iter_mut().zip(past) {
                *c += k * (d * p - *c);
            }
            match kind {
                NormKind::ColumnMax => {
                    for (n, &c) in norms.iter_mut().zip(row.iter()) {
                        *n = f64::max(*n, c.abs());
                    }
                }
                NormKind::ColumnL2 => {
                    for (n, &c) in norms.iter_mut().zip(row.iter()) {
                        *n += c * c;
                    }
                }
                NormKind::RowMax | NormKind::RowL2 => {}
            }
        }
        if kind == NormKind::ColumnL2 {
            norms.iter_mut().for_each(|n| *n = n.sqrt());
        }
    }

    fn inverse_prediction(&self, vel: &[f64]) -> Vec<f64> {
        match &self.params.inverse {
            InverseModel::Identity => vel.to_vec(),
            InverseModel::Negated => vel.iter().map(|v| -v).collect(),
            InverseModel::Matrix(f) => f
                .chunks_exact(self.sensors)
                .map(|row| row.iter().zip(vel).map(|(a, b)| a * b).sum())
                .collect(),
        }
    }

    /// Most recent smoothed sensor vector, zeros before any observation.
    pub fn current_sensor(&self) -> Vec<f64> {
        self.history.back().cloned().unwrap_or_else(|| vec![0.0; self.sensors])
    }

    /// Action for the most recently observed sensors, `tanh(κ C̃ s + h)`.
    pub fn act(&mut self) -> Vec<f64> {
        let a = self.peek_action();
        self.pending_action = Some(a.clone());
        a
    }

    /// Like [`DepState::act`] but without feeding the bias dynamics.
    pub fn peek_action(&self) -> Vec<f64> {
        let s = self.current_sensor();
        let eps = self.params.epsilon;
        let kappa = self.params.kappa;
        let drive: Vec<f64> = match self.params.norm {
            NormKind::ColumnMax | NormKind::ColumnL2 => {
                let scaled: Vec<f64> = s.iter().zip(&self.col_norms).map(|(x, n)| x / (n + eps)).collect();
                self.c
                    .chunks_exact(self.sensors)
                    .map(|row| dot(row, &scaled))
                    .collect()
            }
            NormKind::RowMax | NormKind::RowL2 => self
                .c
                .chunks_exact(self.sensors)
                .map(|row| dot(row, &s) / (row_norm(row, self.params.norm) + eps))
                .collect(),
        };
        drive
            .iter()
            .zip(&self.h)
            .map(|(d, h)| (kappa * d + h).tanh())
            .collect()
    }

    /// Observe, learn and act in one call.
    pub fn step(&mut self, s: &[f64]) -> Result<Vec<f64>> {
        self.update(s)?;
        Ok(self.act())
    }

    /// Normalized control matrix as CSV, one row per action.
    pub fn c_matrix_csv(&self) -> String {
        let cn = self.c_normalized();
        let mut out = String::new();
        let header: Vec<String> = (0..self.sensors).map(|j| format!("s{j}")).collect();
        let _ = writeln!(out, "action,{}", header.join(","));
        for (i, row) in cn.chunks_exact(self.sensors).enumerate() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(out, "a{i},{}", cells.join(","));
        }
        out
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Single-sensor DEP without normalization or bias:
/// `a = tanh(κ ṡ_t ṡ_{t-Δt}) s_t`. `history` is oldest-first.
pub fn simplified_dep_1d(history: &[f64], time_dist: usize, kappa: f64) -> f64 {
    let n = history.len();
    if n < time_dist + 2 {
        return 0.0;
    }
    let now = history[n - 1] - history[n - 2];
    let past = history[n - 1 - time_dist] - history[n - 2 - time_dist];
    (kappa * now * past).tanh() * history[n - 1]
}
