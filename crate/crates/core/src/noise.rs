//! Baseline exploration noise: white Gaussian, power-law colored noise and
//! Ornstein-Uhlenbeck. Emitted actions are always clipped to `[-1, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[inline]
fn clip(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    pub theta: f64,
    pub sigma: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub x0: f64,
}

impl OuParams {
    /// Reaching-task preset.
    pub const REACHING: Self = Self {
        theta: 0.004,
        sigma: 0.02,
        mu: 0.0,
        x0: 0.0,
    };
    /// Locomotion-task preset.
    pub const LOCOMOTION: Self = Self {
        theta: 0.1,
        sigma: 0.07,
        mu: 0.0,
        x0: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.theta >= 0.0 && self.sigma >= 0.0) || !self.mu.is_finite() || !self.x0.is_finite() {
            return Err(Error::InvalidParam("OU needs theta >= 0, sigma >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColoredNoiseParams {
    pub beta: f64,
    pub sigma: f64,
    pub horizon: usize,
}

impl ColoredNoiseParams {
    pub const REACHING: Self = Self {
        beta: 0.04,
        sigma: 0.1,
        horizon: 1000,
    };
    pub const LOCOMOTION: Self = Self {
        beta: 0.008,
        sigma: 0.3,
        horizon: 1000,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !(self.sigma >= 0.0) {
            return Err(Error::InvalidParam("colored noise needs beta >= 0, sigma >= 0".into()));
        }
        if self.horizon < 2 {
            return Err(Error::TooShort {
                min: 2,
                got: self.horizon,
            });
        }
        Ok(())
    }
}

/// One OU update. `x` is the unclipped internal state; the returned value is
/// the new internal state. Clip it yourself (or use [`OuNoise`]) before
/// applying it as an action.
pub fn ou_step<R: Rng + ?Sized>(x: &[f64], params: &OuParams, rng: &mut R) -> Vec<f64> {
    x.iter()
        .map(|&xi| {
            let w: f64 = rng.sample(StandardNormal);
            xi + params.theta * (params.mu - xi) + params.sigma * w
        })
        .collect()
}

/// I.i.d. `N(0, sigma²)` per dimension, clipped.
pub fn white_sample<R: Rng + ?Sized>(sigma: f64, dims: usize, rng: &mut R) -> Vec<f64> {
    (0..dims)
        .map(|_| {
            let w: f64 = rng.sample(StandardNormal);
            clip(sigma * w)
        })
        .collect()
}

/// Unit-variance Gaussian sequence with power spectrum `∝ 1/f^beta`
/// (Timmer & König construction), not scaled or clipped.
pub fn power_law_gaussian<R: Rng + ?Sized>(beta: f64, len: usize, rng: &mut R) -> Vec<f64> {
    let nf = len / 2 + 1;
    // frequencies k/len; the DC bin borrows the lowest nonzero frequency
    let fmin = 1.0 / len as f64;
    let scale: Vec<f64> = (0..nf)
        .map(|k| {
            let f = (k as f64 / len as f64).max(fmin);
            f.powf(-beta / 2.0)
        })
        .collect();

    let mut w2 = 0.0;
    for (k, s) in scale.iter().enumerate().skip(1) {
        let mut w = *s;
        if k == nf - 1 {
            w *= (1 + len % 2) as f64 / 2.0;
        }
        w2 += w * w;
    }
    let norm = 2.0 * w2.sqrt() / len as f64;

    let mut coeffs = vec![Complex::new(0.0, 0.0); len];
    for k in 0..nf {
        let mut re: f64 = rng.sample::<f64, _>(StandardNormal) * scale[k];
        let mut im: f64 = rng.sample::<f64, _>(StandardNormal) * scale[k];
        if k == 0 || (len.is_multiple_of(2) && k == nf - 1) {
            im = 0.0;
            re *= std::f64::consts::SQRT_2;
        }
        coeffs[k] = Complex::new(re, im);
        if k != 0 && k != len - k {
            coeffs[len - k] = Complex::new(re, -im);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(len).process(&mut coeffs);
    let inv = 1.0 / (len as f64 * norm);
    coeffs.iter().map(|c| c.re * inv).collect()
}

/// `horizon × dims` sequence of colored actions, scaled by `sigma` and clipped.
pub fn colored_sequence<R: Rng + ?Sized>(params: &ColoredNoiseParams, dims: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let cols: Vec<Vec<f64>> = (0..dims)
        .map(|_| power_law_gaussian(params.beta, params.horizon, rng))
        .collect();
    Ok((0..params.horizon)
        .map(|t| cols.iter().map(|c| clip(params.sigma * c[t])).collect())
        .collect())
}

/// Stateful action source used by the experiment runners.
pub trait NoiseProcess: Send {
    fn dims(&self) -> usize;
    /// Next clipped action vector.
    fn sample(&mut self) -> Vec<f64>;
    /// Restarts the process (internal state only; the RNG stream continues).
    fn reset(&mut self);
}

#[derive(Debug, Clone)]
pub struct WhiteNoise {
    sigma: f64,
    dims: usize,
    rng: ChaCha8Rng,
}

impl WhiteNoise {
    pub fn new(sigma: f64, dims: usize, seed: u64) -> Self {
        Self {
            sigma,
            dims,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl NoiseProcess for WhiteNoise {
    fn dims(&self) -> usize {
        self.dims
    }
    fn sample(&mut self) -> Vec<f64> {
        white_sample(self.sigma, self.dims, &mut self.rng)
    }
    fn reset(&mut self) {}
}

#[derive(Debug, Clone)]
pub struct OuNoise {
    params: OuParams,
    state: Vec<f64>,
    rng: ChaCha8Rng,
}

impl OuNoise {
    pub fn new(params: OuParams, dims: usize, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            state: vec![params.x0; dims],
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }
}

impl NoiseProcess for OuNoise {
    fn dims(&self) -> usize {
        self.state.len()
    }
    fn sample(&mut self) -> Vec<f64> {
        self.state = ou_step(&self.state, &self.params, &mut self.rng);
        self.state.iter().map(|&x| clip(x)).collect()
    }
    fn reset(&mut self) {
        self.state.fill(self.params.x0);
    }
}

/// Colored noise served from pre-synthesized chunks of `horizon` steps.
#[derive(Debug, Clone)]
pub struct ColoredNoise {
    params: ColoredNoiseParams,
    dims: usize,
    chunk: Vec<Vec<f64>>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl ColoredNoise {
    pub fn new(params: ColoredNoiseParams, dims: usize, seed: u64) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            dims,
            chunk: Vec::new(),
            cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl NoiseProcess for ColoredNoise {
    fn dims(&self) -> usize {
        self.dims
    }
    fn sample(&mut self) -> Vec<f64> {
        if self.cursor >= self.chunk.len() {
            self.chunk = colored_sequence(&self.params, self.dims, &mut self.rng)
                .expect("parameters validated at construction");
            self.cursor = 0;
        }
        self.cursor += 1;
        self.chunk[self.cursor - 1].clone()
    }
    fn reset(&mut self) {
        self.chunk.clear();
        self.cursor = 0;
    }
}
