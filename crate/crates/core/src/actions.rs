//! Virtual overactuation: every native actuator is replaced by `n` redundant
//! copies whose commands are averaged back into one.
//!
//! Inflated vectors are laid out group-contiguous: entries `k*n .. (k+1)*n`
//! all belong to native channel `k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct ActionMultiplier(usize);

impl ActionMultiplier {
    pub const ONE: Self = Self(1);

    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParam("action multiplier must be >= 1".into()));
        }
        Ok(Self(n))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for ActionMultiplier {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<ActionMultiplier> for usize {
    fn from(n: ActionMultiplier) -> usize {
        n.0
    }
}

impl std::fmt::Display for ActionMultiplier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Group-wise mean of an inflated action vector.
pub fn collapse_actions(inflated: &[f64], n: ActionMultiplier) -> Result<Vec<f64>> {
    let n = n.get();
    if !inflated.len().is_multiple_of(n) {
        return Err(Error::Dimension {
            what: "inflated actions (not divisible by n)",
            expected: (inflated.len() / n + 1) * n,
            got: inflated.len(),
        });
    }
    let inv = 1.0 / n as f64;
    Ok(inflated
        .chunks_exact(n)
        .map(|g| g.iter().sum::<f64>() * inv)
        .collect())
}

/// Replicates each native channel `n` times.
pub fn inflate(native: &[f64], n: ActionMultiplier) -> Vec<f64> {
    let n = n.get();
    let mut out = Vec::with_capacity(native.len() * n);
    for &x in native {
        out.extend(std::iter::repeat_n(x, n));
    }
    out
}

/// Variance of the mean of `n` actuators with per-actuator variance `var` and
/// mean pairwise correlation `rho`.
pub fn predicted_effective_variance(var: f64, n: ActionMultiplier, rho: f64) -> f64 {
    let n = n.get() as f64;
    var / n + (1.0 - 1.0 / n) * rho * var
}
