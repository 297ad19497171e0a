//! Experiment drivers behind the CLI subcommands.
//!
//! Every driver returns a [`Report`]: file names mapped to their full
//! contents. Work is split into independent cells whose seeds derive only
//! from `(seed, seed_offset, cell identity)`, and rows are emitted in cell
//! order, so the output does not depend on the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::actions::{collapse_actions, predicted_effective_variance, ActionMultiplier};
use crate::config::{ControllerKind, EnvKind, ExperimentConfig, ExperimentKind};
use crate::dep::DepState;
use crate::envs::{mountain_car_episode, Arm26, ArmEnv, CarController, EpisodeSpec, TorqueArm};
use crate::error::{Error, Result};
use crate::metrics::{action_correlation, psd_slope, CoverageGrid};
use crate::muscle::ARM26_ANTAGONISTS;
use crate::noise::{power_law_gaussian, ou_step, ColoredNoise, OuNoise, OuParams, WhiteNoise};
use crate::par::map_ordered;
use crate::scheduler::{prefill, Explorer, ReplayBuffer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub seed_offset: u64,
    pub workers: usize,
    pub log_steps: bool,
}

impl RunOptions {
    pub fn serial() -> Self {
        Self {
            workers: 1,
            ..Self::default()
        }
    }
}

/// Output files of one run, keyed by file name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub files: BTreeMap<String, String>,
}

impl Report {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one cell of a sweep.
pub fn cell_seed(seed: u64, offset: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix(seed.wrapping_add(offset)), |acc, &p| splitmix(acc ^ splitmix(p)))
}

/// Comment block with the resolved config, prepended to every CSV.
pub fn config_header(cfg: &ExperimentConfig, opts: &RunOptions) -> String {
    // worker count and output location do not influence results
    let mut table = toml::Value::try_from(cfg).expect("config serializes");
    if let Some(t) = table.as_table_mut() {
        t.remove("workers");
        t.remove("out_dir");
    }
    let text = toml::to_string(&table).expect("config serializes");
    let mut out = String::new();
    let _ = writeln!(out, "# overact {} v{}", cfg.kind.as_str(), env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# seed_offset = {}", opts.seed_offset);
    for line in text.lines() {
        let _ = writeln!(out, "# {line}");
    }
    out
}

/// Strips the `#` header, leaving plain CSV.
pub fn csv_body(file: &str) -> String {
    file.lines()
        .filter(|l| !l.starts_with('#'))
        .fold(String::new(), |mut s, l| {
            s.push_str(l);
            s.push('\n');
            s
        })
}

pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Explore => run_explore(cfg, opts),
        ExperimentKind::McarDemo => run_mcar_demo(cfg, opts),
        ExperimentKind::Correlate => run_correlate(cfg, opts),
        ExperimentKind::VarianceSweep => run_variance_sweep(cfg, opts),
        ExperimentKind::PsdCheck => run_psd_check(cfg, opts),
        ExperimentKind::PrefillCompare => run_prefill_compare(cfg, opts),
    }
}

pub fn make_env(cfg: &ExperimentConfig, env: EnvKind, n: ActionMultiplier, spec: EpisodeSpec) -> Result<Box<dyn ArmEnv>> {
    let arm = &cfg.arm;
    Ok(match env {
        EnvKind::Torquearm => Box::new(TorqueArm::new(arm.geometry.clone(), arm.max_torque, n, spec)?),
        EnvKind::Arm26 => Box::new(Arm26::new(
            arm.geometry.clone(),
            arm.muscles.clone(),
            n,
            spec,
            arm.goals,
            cfg.dep_params()?.force_scale,
        )?),
    })
}

pub fn make_explorer(cfg: &ExperimentConfig, kind: ControllerKind, env: &dyn ArmEnv, seed: u64) -> Result<Explorer> {
    let dims = env.action_dim();
    let noise = &cfg.noise;
    Ok(match kind {
        ControllerKind::Dep => Explorer::Dep(Box::new(DepState::new(cfg.dep_params()?, dims, env.dep_sensors().len())?)),
        ControllerKind::White => Explorer::Noise(Box::new(WhiteNoise::new(noise.white_sigma, dims, seed))),
        ControllerKind::Pink => Explorer::Noise(Box::new(ColoredNoise::new(noise.pink, dims, seed)?)),
        ControllerKind::Red => Explorer::Noise(Box::new(ColoredNoise::new(noise.red, dims, seed)?)),
        ControllerKind::Ou => Explorer::Noise(Box::new(OuNoise::new(noise.ou, dims, seed)?)),
    })
}

#[derive(Serialize)]
struct ExploreStep<'a> {
    episode: usize,
    t: usize,
    state: [f64; 6],
    action: &'a [f64],
    reward: f64,
    tag: &'static str,
}

struct ExploreCell {
    rows: String,
    steps: Option<String>,
}

/// Coverage of `controller × n × seed` cells. Each block of episodes starts
/// from a fresh controller; the final `all` row is the union over blocks.
pub fn run_explore(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let e = &cfg.explore;
    let mut cells = Vec::new();
    for &c in &e.controllers {
        for &n in &e.multipliers {
            for &seed in &cfg.seeds {
                cells.push((c, n, seed));
            }
        }
    }
    let results = map_ordered(&cells, opts.workers, |&(c, n, seed)| explore_cell(cfg, opts, c, n, seed))?;

    let mut report = Report::default();
    let mut csv = config_header(cfg, opts);
    csv.push_str("env,controller,n,seed,block,coverage\n");
    for ((c, n, seed), cell) in cells.iter().zip(results) {
        csv.push_str(&cell.rows);
        if let Some(steps) = cell.steps {
            report.files.insert(
                format!("steps_{}_{}_n{}_seed{}.ndjson", cfg.env.as_str(), c.as_str(), n, seed),
                steps,
            );
        }
    }
    report.files.insert(format!("explore_{}.csv", cfg.env.as_str()), csv);
    Ok(report)
}

fn explore_cell(cfg: &ExperimentConfig, opts: &RunOptions, c: ControllerKind, n: usize, seed: u64) -> Result<ExploreCell> {
    let e = &cfg.explore;
    let mult = ActionMultiplier::new(n)?;
    let mut env = make_env(cfg, cfg.env, mult, cfg.episode_spec())?;
    let cs = cell_seed(seed, opts.seed_offset, &[c as u64, n as u64, 0xE]);
    let mut rng = ChaCha8Rng::seed_from_u64(cs);
    let mut explorer = make_explorer(cfg, c, env.as_ref(), rng.random())?;
    let bounds = env.geometry().workspace_bounds();
    let mut total = CoverageGrid::new(e.grid, bounds)?;
    let mut rows = String::new();
    let mut steps = opts.log_steps.then(String::new);
    let tag = explorer.tag().as_str();

    for block in 0..e.episodes / e.block {
        explorer.reset();
        let mut grid = CoverageGrid::new(e.grid, bounds)?;
        for ep in 0..e.block {
            env.reset(&mut rng);
            explorer.on_env_reset();
            for t in 0..e.horizon {
                let a = explorer.act(env.as_ref())?;
                let out = env.step_unit(&a)?;
                grid.add(env.hand());
                if let Some(buf) = steps.as_mut() {
                    let j = env.joints();
                    let h = env.hand();
                    let rec = ExploreStep {
                        episode: block * e.block + ep,
                        t,
                        state: [j.q[0], j.q[1], j.qdot[0], j.qdot[1], h[0], h[1]],
                        action: &collapse_actions(&a, mult)?,
                        reward: out.reward,
                        tag,
                    };
                    buf.push_str(&serde_json::to_string(&rec).map_err(|e| Error::Io(e.to_string()))?);
                    buf.push('\n');
                }
                if out.done {
                    break;
                }
            }
        }
        let _ = writeln!(rows, "{},{},{},{},{},{}", cfg.env.as_str(), c.as_str(), n, seed, block, grid.fraction());
        total.merge(&grid)?;
    }
    let _ = writeln!(rows, "{},{},{},{},all,{}", cfg.env.as_str(), c.as_str(), n, seed, total.fraction());
    Ok(ExploreCell { rows, steps })
}

/// Success table of the simplified 1-D DEP over the configured lags, plus
/// the Gaussian random-action baseline per seed.
pub fn run_mcar_demo(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let m = &cfg.mcar;
    let mut csv = config_header(cfg, opts);
    csv.push_str("controller,time_dist,seed,success,steps,max_x\n");
    let fmt_steps = |s: Option<usize>| s.map_or_else(|| "-".to_string(), |k| k.to_string());
    let dep_rows = map_ordered(&m.time_dists, opts.workers, |&td| {
        let mut ctl = CarController::SimplifiedDep {
            time_dist: td,
            kappa: m.kappa,
        };
        Ok(mountain_car_episode(&m.task, &mut ctl))
    })?;
    for (td, ep) in m.time_dists.iter().zip(&dep_rows) {
        let _ = writeln!(
            csv,
            "dep,{td},-,{},{},{}",
            ep.success,
            fmt_steps(ep.success_step),
            ep.max_x()
        );
    }
    let base_rows = map_ordered(&cfg.seeds, opts.workers, |&seed| {
        let mut ctl = CarController::Gaussian {
            sigma: m.baseline_sigma,
            rng: ChaCha8Rng::seed_from_u64(cell_seed(seed, opts.seed_offset, &[0xCA2])),
        };
        Ok(mountain_car_episode(&m.task, &mut ctl))
    })?;
    for (seed, ep) in cfg.seeds.iter().zip(&base_rows) {
        let _ = writeln!(
            csv,
            "gaussian,-,{seed},{},{},{}",
            ep.success,
            fmt_steps(ep.success_step),
            ep.max_x()
        );
    }
    let mut report = Report::default();
    report.files.insert("mcar_demo.csv".into(), csv);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceMode {
    /// Independent channels.
    Iid,
    /// Every channel is a copy of the first.
    Copied,
}

impl VarianceMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Iid => "iid",
            Self::Copied => "copied",
        }
    }
}

/// Sample variance of the group mean of `n` Gaussian channels.
pub fn collapsed_variance(sigma: f64, n: ActionMultiplier, mode: VarianceMode, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = n.get();
    let inv = 1.0 / k as f64;
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..samples {
        let x = match mode {
            VarianceMode::Iid => {
                let mut s = 0.0;
                for _ in 0..k {
                    s += rng.sample::<f64, _>(StandardNormal);
                }
                sigma * s * inv
            }
            VarianceMode::Copied => {
                let w: f64 = rng.sample(StandardNormal);
                // the mean of k identical copies
                sigma * (w * k as f64) * inv
            }
        };
        let d = x - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (x - mean);
    }
    m2 / (samples - 1) as f64
}

pub fn run_variance_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let v = &cfg.variance;
    let mut cells = Vec::new();
    for mode in [VarianceMode::Iid, VarianceMode::Copied] {
        for &n in &v.multipliers {
            for &seed in &cfg.seeds {
                cells.push((mode, n, seed));
            }
        }
    }
    let vals = map_ordered(&cells, opts.workers, |&(mode, n, seed)| {
        let m = ActionMultiplier::new(n)?;
        let cs = cell_seed(seed, opts.seed_offset, &[mode as u64, n as u64, 0x5A]);
        Ok(collapsed_variance(v.sigma, m, mode, v.samples, cs))
    })?;
    let mut csv = config_header(cfg, opts);
    csv.push_str("mode,n,seed,samples,empirical,predicted,ratio\n");
    for ((mode, n, seed), emp) in cells.iter().zip(vals) {
        let rho = match mode {
            VarianceMode::Iid => 0.0,
            VarianceMode::Copied => 1.0,
        };
        let pred = predicted_effective_variance(v.sigma * v.sigma, ActionMultiplier::new(*n)?, rho);
        let _ = writeln!(
            csv,
            "{},{n},{seed},{},{emp},{pred},{}",
            mode.as_str(),
            v.samples,
            emp / pred
        );
    }
    let mut report = Report::default();
    report.files.insert("variance_sweep.csv".into(), csv);
    Ok(report)
}

/// Summary of one correlation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSummary {
    pub max_abs_off_diagonal: f64,
    /// Most negative correlation among antagonist pairs (arm26 only).
    pub min_antagonist: Option<f64>,
    pub degenerate: usize,
}

/// Fresh-start action trajectory of `steps` steps without terminations.
pub fn action_trajectory(
    cfg: &ExperimentConfig,
    controller: ControllerKind,
    n: ActionMultiplier,
    steps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut env = make_env(cfg, cfg.env, n, EpisodeSpec::exploration(steps))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut explorer = make_explorer(cfg, controller, env.as_ref(), rng.random())?;
    env.reset(&mut rng);
    let mut traj = Vec::with_capacity(steps);
    for _ in 0..steps {
        let a = explorer.act(env.as_ref())?;
        env.step_unit(&a)?;
        traj.push(a);
    }
    Ok(traj)
}

pub fn summarize_correlation(env: EnvKind, traj: &[Vec<f64>]) -> Result<(crate::metrics::CorrelationMatrix, CorrelationSummary)> {
    let cm = action_correlation(traj)?;
    let min_antagonist = (env == EnvKind::Arm26 && cm.dim == 6)
        .then(|| ARM26_ANTAGONISTS.iter().map(|&(i, j)| cm.get(i, j)).fold(f64::INFINITY, f64::min));
    let summary = CorrelationSummary {
        max_abs_off_diagonal: cm.max_abs_off_diagonal(),
        min_antagonist,
        degenerate: cm.degenerate.iter().filter(|d| **d).count(),
    };
    Ok((cm, summary))
}

pub fn run_correlate(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let c = &cfg.correlate;
    let mut cells = Vec::new();
    for &k in &c.controllers {
        for &seed in &cfg.seeds {
            cells.push((k, seed));
        }
    }
    let results = map_ordered(&cells, opts.workers, |&(k, seed)| {
        let cs = cell_seed(seed, opts.seed_offset, &[k as u64, 0xC0]);
        let traj = action_trajectory(cfg, k, ActionMultiplier::ONE, c.steps, cs)?;
        summarize_correlation(cfg.env, &traj)
    })?;
    let header = config_header(cfg, opts);
    let mut report = Report::default();
    let mut summary = header.clone();
    summary.push_str("env,controller,seed,steps,max_abs_offdiag,min_antagonist,degenerate\n");
    for ((k, seed), (cm, s)) in cells.iter().zip(results) {
        let anta = s.min_antagonist.map_or_else(|| "-".to_string(), |v| v.to_string());
        let _ = writeln!(
            summary,
            "{},{},{seed},{},{},{anta},{}",
            cfg.env.as_str(),
            k.as_str(),
            c.steps,
            s.max_abs_off_diagonal,
            s.degenerate
        );
        report.files.insert(
            format!("corr_{}_{}_seed{seed}.csv", cfg.env.as_str(), k.as_str()),
            format!("{header}{}", cm.to_csv()),
        );
    }
    report.files.insert(format!("correlate_{}.csv", cfg.env.as_str()), summary);
    Ok(report)
}

/// Normalized autocorrelation at lags `0..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    (0..=max_lag.min(n - 1))
        .map(|k| (0..n - k).map(|i| (x[i] - mean) * (x[i + k] - mean)).sum::<f64>() / c0)
        .collect()
}

/// Fits `exp(-θ k)` to an autocorrelation curve; returns `(θ̂, R²)`.
pub fn fit_exponential_decay(acf: &[f64]) -> (f64, f64) {
    // least squares through the origin on ln ρ_k, positive lags only
    let (mut num, mut den) = (0.0, 0.0);
    for (k, &r) in acf.iter().enumerate().skip(1) {
        if r > 0.0 {
            num += k as f64 * -r.ln();
            den += (k * k) as f64;
        }
    }
    let theta = if den > 0.0 { num / den } else { 0.0 };
    let mean = acf.iter().sum::<f64>() / acf.len() as f64;
    let ss_tot: f64 = acf.iter().map(|r| (r - mean).powi(2)).sum();
    let ss_res: f64 = acf
        .iter()
        .enumerate()
        .map(|(k, r)| (r - (-theta * k as f64).exp()).powi(2))
        .sum();
    (theta, 1.0 - ss_res / ss_tot)
}

pub fn run_psd_check(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let p = &cfg.psd;
    let mut cells = Vec::new();
    for (bi, &beta) in p.betas.iter().enumerate() {
        for &seed in &cfg.seeds {
            cells.push((Some((bi, beta)), seed));
        }
    }
    for &seed in &cfg.seeds {
        cells.push((None, seed));
    }
    let rows = map_ordered(&cells, opts.workers, |&(beta, seed)| match beta {
        Some((bi, beta)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, opts.seed_offset, &[bi as u64, 0x9D]));
            let x = power_law_gaussian(beta, p.length, &mut rng);
            let est = psd_slope(&x)?;
            Ok(format!("colored,{beta},{seed},{},{est},{}\n", p.length, est - beta))
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, opts.seed_offset, &[0x0C]));
            let params = OuParams {
                theta: p.ou_theta,
                sigma: 1.0,
                mu: 0.0,
                x0: 0.0,
            };
            let mut x = vec![0.0];
            let mut series = Vec::with_capacity(p.length);
            for _ in 0..p.length {
                x = ou_step(&x, &params, &mut rng);
                series.push(x[0]);
            }
            let (theta_hat, r2) = fit_exponential_decay(&autocorrelation(&series, p.ou_lags));
            Ok(format!("ou,{},{seed},{},{theta_hat},{r2}\n", p.ou_theta, p.length))
        }
    })?;
    let mut csv = config_header(cfg, opts);
    // colored rows: (beta, estimate, error); ou rows: (theta, fitted theta, R²)
    csv.push_str("process,param,seed,length,estimate,score\n");
    for r in rows {
        csv.push_str(&r);
    }
    let mut report = Report::default();
    report.files.insert("psd_check.csv".into(), csv);
    Ok(report)
}

/// End-effector coverage of a `steps`-long exploration-only prefill.
pub fn prefill_coverage(
    cfg: &ExperimentConfig,
    controller: ControllerKind,
    white_sigma: f64,
    steps: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let n = ActionMultiplier::new(cfg.prefill.multiplier)?;
    let mut env = make_env(cfg, cfg.env, n, EpisodeSpec::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_seed = rng.random();
    let mut explorer = match controller {
        ControllerKind::White => Explorer::Noise(Box::new(WhiteNoise::new(white_sigma, env.action_dim(), noise_seed))),
        other => make_explorer(cfg, other, env.as_ref(), noise_seed)?,
    };
    let mut buffer = ReplayBuffer::new(steps)?;
    let hands = prefill(env.as_mut(), &mut explorer, steps, &mut buffer, &mut rng)?;
    let grid = cfg.explore.grid;
    let cov = crate::metrics::coverage(hands, grid, env.geometry().workspace_bounds())?;
    Ok((cov, buffer.len()))
}

pub fn run_prefill_compare(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Report> {
    let p = &cfg.prefill;
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        for c in [ControllerKind::Dep, ControllerKind::White] {
            cells.push((seed, c));
        }
    }
    // paired: both controllers of a seed share the environment seed
    let results = map_ordered(&cells, opts.workers, |&(seed, c)| {
        prefill_coverage(cfg, c, p.white_sigma, p.steps, cell_seed(seed, opts.seed_offset, &[0x9F]))
    })?;
    let mut csv = config_header(cfg, opts);
    csv.push_str("env,seed,controller,steps,buffered,coverage\n");
    for ((seed, c), (cov, len)) in cells.iter().zip(results) {
        let _ = writeln!(csv, "{},{seed},{},{},{len},{cov}", cfg.env.as_str(), c.as_str(), p.steps);
    }
    let mut report = Report::default();
    report.files.insert(format!("prefill_compare_{}.csv", cfg.env.as_str()), csv);
    Ok(report)
}
