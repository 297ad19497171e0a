//! Exploration metrics: grid coverage, action correlation, spectral slope and
//! occupancy entropy.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

/// Binary occupancy grid over a 2-D box.
///
/// Cells are `(x_i, x_{i+1}]`, so a sample on an interior edge counts for the
/// lower-index cell; the outer lower edge belongs to cell 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageGrid {
    n: usize,
    bounds: [(f64, f64); 2],
    occupied: Vec<bool>,
    out_of_bounds: usize,
    samples: usize,
}

impl CoverageGrid {
    pub fn new(n: usize, bounds: [(f64, f64); 2]) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParam(format!("grid resolution must be >= 2, got {n}")));
        }
        if bounds.iter().any(|&(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidParam("grid bounds need a < b".into()));
        }
        Ok(Self {
            n,
            bounds,
            occupied: vec![false; n * n],
            out_of_bounds: 0,
            samples: 0,
        })
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn bounds(&self) -> [(f64, f64); 2] {
        self.bounds
    }

    fn axis_index(&self, axis: usize, x: f64) -> Option<usize> {
        let (a, b) = self.bounds[axis];
        if !(x >= a && x <= b) {
            return None;
        }
        let width = (b - a) / self.n as f64;
        let k = ((x - a) / width).ceil() as isize - 1;
        Some(k.clamp(0, self.n as isize - 1) as usize)
    }

    pub fn cell_of(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        Some((self.axis_index(0, p[0])?, self.axis_index(1, p[1])?))
    }

    pub fn add(&mut self, p: [f64; 2]) {
        self.samples += 1;
        match self.cell_of(p) {
            Some((i, j)) => self.occupied[i * self.n + j] = true,
            None => self.out_of_bounds += 1,
        }
    }

    pub fn extend<I: IntoIterator<Item = [f64; 2]>>(&mut self, points: I) {
        for p in points {
            self.add(p);
        }
    }

    /// Elementwise OR with a grid of identical shape.
    pub fn merge(&mut self, other: &CoverageGrid) -> Result<()> {
        if other.n != self.n || other.bounds != self.bounds {
            return Err(Error::InvalidParam("cannot merge grids of different shape".into()));
        }
        for (a, b) in self.occupied.iter_mut().zip(&other.occupied) {
            *a |= *b;
        }
        self.out_of_bounds += other.out_of_bounds;
        self.samples += other.samples;
        Ok(())
    }

    pub fn occupied_cells(&self) -> usize {
        self.occupied.iter().filter(|x| **x).count()
    }

    pub fn out_of_bounds(&self) -> usize {
        self.out_of_bounds
    }

    pub fn samples_seen(&self) -> usize {
        self.samples
    }

    /// Occupied fraction `Σ S_ij / N²`.
    pub fn fraction(&self) -> f64 {
        self.occupied_cells() as f64 / (self.n * self.n) as f64
    }

    pub fn clear(&mut self) {
        self.occupied.fill(false);
        self.out_of_bounds = 0;
        self.samples = 0;
    }
}

/// Coverage of a point stream on a fresh grid of the given shape.
pub fn coverage<I: IntoIterator<Item = [f64; 2]>>(samples: I, n: usize, bounds: [(f64, f64); 2]) -> Result<f64> {
    let mut g = CoverageGrid::new(n, bounds)?;
    g.extend(samples);
    Ok(g.fraction())
}

/// Pearson correlation matrix of a `T × m` trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub dim: usize,
    /// Row-major `m × m`.
    pub values: Vec<f64>,
    /// Channels with zero variance; their rows and columns are reported as 0.
    pub degenerate: Vec<bool>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    pub fn max_abs_off_diagonal(&self) -> f64 {
        let mut m = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    m = m.max(self.get(i, j).abs());
                }
            }
        }
        m
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.dim).map(|j| format!("a{j}")).collect();
        out.push_str(&format!("channel,{}\n", header.join(",")));
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|j| format!("{}", self.get(i, j))).collect();
            out.push_str(&format!("a{i},{}\n", row.join(",")));
        }
        out
    }
}

pub fn action_correlation(trajectory: &[Vec<f64>]) -> Result<CorrelationMatrix> {
    let t = trajectory.len();
    if t < 2 {
        return Err(Error::TooShort { min: 2, got: t });
    }
    let m = trajectory[0].len();
    if let Some(bad) = trajectory.iter().find(|r| r.len() != m) {
        return Err(Error::Dimension {
            what: "trajectory row",
            expected: m,
            got: bad.len(),
        });
    }
    let mut mean = vec![0.0; m];
    for row in trajectory {
        for (a, x) in mean.iter_mut().zip(row) {
            *a += x;
        }
    }
    mean.iter_mut().for_each(|a| *a /= t as f64);
    let mut cov = vec![0.0; m * m];
    let mut centered = vec![0.0; m];
    for row in trajectory {
        for k in 0..m {
            centered[k] = row[k] - mean[k];
        }
        for i in 0..m {
            let ci = centered[i];
            for j in i..m {
                cov[i * m + j] += ci * centered[j];
            }
        }
    }
    let sd: Vec<f64> = (0..m).map(|i| cov[i * m + i].sqrt()).collect();
    let degenerate: Vec<bool> = (0..m)
        .map(|i| !(sd[i] > 1e-12 * (1.0 + mean[i].abs()) * (t as f64).sqrt()))
        .collect();
    let mut values = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let r = if degenerate[i] || degenerate[j] {
                0.0
            } else if i == j {
                1.0
            } else {
                (cov[i * m + j] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
            };
            values[i * m + j] = r;
            values[j * m + i] = r;
        }
    }
    Ok(CorrelationMatrix {
        dim: m,
        values,
        degenerate,
    })
}

/// Periodogram of a mean-removed sequence at frequencies `k/N`, `k = 1..=N/2`.
pub fn periodogram(sequence: &[f64]) -> Vec<(f64, f64)> {
    let n = sequence.len();
    let mean = sequence.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = sequence.iter().map(|x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    (1..=n / 2)
        .map(|k| (k as f64 / n as f64, buf[k].norm_sqr() / n as f64))
        .collect()
}

pub const PSD_MIN_LEN: usize = 256;

/// Spectral exponent `β̂` of a sequence, from a least-squares line through
/// log-power vs. log-frequency over the central two decades of the available
/// frequency range. Returned negated so that `PSD ∝ 1/f^β̂`.
pub fn psd_slope(sequence: &[f64]) -> Result<f64> {
    if sequence.len() < PSD_MIN_LEN {
        return Err(Error::TooShort {
            min: PSD_MIN_LEN,
            got: sequence.len(),
        });
    }
    let first = sequence[0];
    if sequence.iter().all(|x| *x == first) {
        return Err(Error::ConstantSequence);
    }
    let n = sequence.len() as f64;
    let centre = (0.5 / n).sqrt();
    let (lo, hi) = (centre / 10.0, centre * 10.0);
    let pts: Vec<(f64, f64)> = periodogram(sequence)
        .into_iter()
        .filter(|&(f, p)| f >= lo && f <= hi && p > 0.0)
        .map(|(f, p)| (f.ln(), p.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::TooShort {
            min: 3,
            got: pts.len(),
        });
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(-(sxy / sxx))
}

/// Shannon entropy (nats) of the histogram of 2-D samples on a `bins × bins`
/// grid over `bounds`. Out-of-bounds samples are ignored.
pub fn occupancy_entropy(samples: &[[f64; 2]], bins: usize, bounds: [(f64, f64); 2]) -> Result<f64> {
    if bins < 2 {
        return Err(Error::InvalidParam(format!("need at least 2 bins, got {bins}")));
    }
    let grid = CoverageGrid::new(bins, bounds)?;
    let mut counts = vec![0usize; bins * bins];
    let mut total = 0usize;
    for p in samples {
        if let Some((i, j)) = grid.cell_of(*p) {
            counts[i * bins + j] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::Empty);
    }
    let tot = total as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / tot;
            -p * p.ln()
        })
        .sum::<f64>();
    Ok(h.max(0.0))
}
