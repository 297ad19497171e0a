//! Shared control between a task policy and DEP.
//!
//! A [`Switcher`] decides per step who acts; [`run_episode`] drives one
//! episode under that decision and records every transition with its
//! controller tag. [`prefill`] fills a replay buffer with exploration-only
//! data before any policy exists.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dep::DepState;
use crate::envs::ArmEnv;
use crate::error::{Error, Result};
use crate::noise::NoiseProcess;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchMode {
    /// DEP only during prefill; the policy controls every episode step.
    InitOnly,
    /// Weighted average of policy and DEP actions.
    Avg,
    /// Fixed alternation of `h_rl` policy steps and `h_dep` DEP steps.
    Det,
    /// DEP takes over with probability `p_switch` after each policy step.
    Stoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SwitchConfig {
    pub mode: SwitchMode,
    pub p_switch: f64,
    pub h_dep: usize,
    pub h_rl: usize,
    pub w_avg: f64,
    /// Keep DEP learning while the policy acts.
    pub background_learning: bool,
}

impl Default for SwitchConfig {
    fn default() -> Self {
        Self::arm()
    }
}

impl SwitchConfig {
    pub fn arm() -> Self {
        Self {
            mode: SwitchMode::Stoch,
            p_switch: 0.01,
            h_dep: 20,
            h_rl: 100,
            w_avg: 0.5,
            background_learning: true,
        }
    }

    pub fn locomotion() -> Self {
        Self {
            p_switch: 0.0004,
            h_dep: 4,
            ..Self::arm()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_switch) {
            return Err(Error::InvalidParam("p_switch must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.w_avg) {
            return Err(Error::InvalidParam("w_avg must lie in [0, 1]".into()));
        }
        if self.h_dep == 0 || self.h_rl == 0 {
            return Err(Error::InvalidParam("switch horizons must be >= 1".into()));
        }
        Ok(())
    }

    /// Long-run share of DEP-controlled steps in stochastic mode.
    pub fn expected_dep_fraction(&self) -> f64 {
        let ph = self.p_switch * self.h_dep as f64;
        ph / (1.0 + ph)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tag {
    Policy,
    Dep,
    Avg,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Policy => "policy",
            Tag::Dep => "dep",
            Tag::Avg => "avg",
        }
    }
}

/// Who controls the next step. Switch decisions are only drawn after policy
/// steps, never inside a DEP span.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Switcher {
    dep_left: usize,
    policy_done: usize,
}

impl Switcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn in_dep_span(&self) -> bool {
        self.dep_left > 0
    }

    pub fn next<R: Rng + ?Sized>(&mut self, cfg: &SwitchConfig, rng: &mut R) -> Tag {
        match cfg.mode {
            SwitchMode::InitOnly => Tag::Policy,
            SwitchMode::Avg => Tag::Avg,
            SwitchMode::Stoch => {
                if self.dep_left > 0 {
                    self.dep_left -= 1;
                    return Tag::Dep;
                }
                if cfg.p_switch > 0.0 && rng.random::<f64>() < cfg.p_switch {
                    self.dep_left = cfg.h_dep;
                }
                Tag::Policy
            }
            SwitchMode::Det => {
                if self.dep_left > 0 {
                    self.dep_left -= 1;
                    return Tag::Dep;
                }
                self.policy_done += 1;
                if self.policy_done == cfg.h_rl {
                    self.policy_done = 0;
                    self.dep_left = cfg.h_dep;
                }
                Tag::Policy
            }
        }
    }
}

/// Controller tag for every one of `steps` consecutive decisions.
pub fn tag_sequence<R: Rng + ?Sized>(cfg: &SwitchConfig, steps: usize, rng: &mut R) -> Vec<Tag> {
    let mut sw = Switcher::new();
    (0..steps).map(|_| sw.next(cfg, rng)).collect()
}

/// Maps raw observations to actions in `[-1, 1]`.
pub trait Policy {
    fn act(&mut self, observation: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub struct ZeroPolicy(pub usize);

impl Policy for ZeroPolicy {
    fn act(&mut self, _: &[f64]) -> Vec<f64> {
        vec![0.0; self.0]
    }
}

#[derive(Debug, Clone)]
pub struct ConstantPolicy(pub Vec<f64>);

impl Policy for ConstantPolicy {
    fn act(&mut self, _: &[f64]) -> Vec<f64> {
        self.0.clone()
    }
}

/// `a_k = clip(gain · d_k · (goal − hand))`, reading goal and hand from the
/// last four observation entries.
#[derive(Debug, Clone)]
pub struct ProportionalPolicy {
    pub gain: f64,
    pub directions: Vec<[f64; 2]>,
}

impl Policy for ProportionalPolicy {
    fn act(&mut self, obs: &[f64]) -> Vec<f64> {
        let k = obs.len();
        if k < 4 {
            return vec![0.0; self.directions.len()];
        }
        let e = [obs[k - 4] - obs[k - 2], obs[k - 3] - obs[k - 1]];
        self.directions
            .iter()
            .map(|d| (self.gain * (d[0] * e[0] + d[1] * e[1])).clamp(-1.0, 1.0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
    pub tag: Tag,
}

/// Fixed-capacity FIFO ring of transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParam("buffer capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Appends `other` after this buffer's content, evicting as needed.
    pub fn extend_from(&mut self, other: &ReplayBuffer) {
        for t in other.iter() {
            self.push(t.clone());
        }
    }

    /// Oldest-first CSV: `tag,reward,done,s0..,a0..,ns0..`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let Some(first) = self.items.front() else {
            out.push_str("tag,reward,done\n");
            return out;
        };
        let mut head = vec!["tag".to_string(), "reward".into(), "done".into()];
        head.extend((0..first.state.len()).map(|i| format!("s{i}")));
        head.extend((0..first.action.len()).map(|i| format!("a{i}")));
        head.extend((0..first.next_state.len()).map(|i| format!("ns{i}")));
        let _ = writeln!(out, "{}", head.join(","));
        for t in &self.items {
            let _ = write!(out, "{},{},{}", t.tag.as_str(), t.reward, u8::from(t.done));
            for x in t.state.iter().chain(&t.action).chain(&t.next_state) {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub tag: Tag,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeLog {
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn tags(&self) -> Vec<Tag> {
        self.steps.iter().map(|s| s.tag).collect()
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut w, s).map_err(|e| Error::Io(e.to_string()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Runs one episode from the environment's current state. Transitions go to
/// `log` (and `buffer` if given) as they happen, so on an environment fault
/// the partial record survives in the caller's hands.
#[allow(clippy::too_many_arguments)]
pub fn run_episode<R: Rng + ?Sized>(
    env: &mut dyn ArmEnv,
    policy: &mut dyn Policy,
    dep: &mut DepState,
    cfg: &SwitchConfig,
    switcher: &mut Switcher,
    rng: &mut R,
    log: &mut EpisodeLog,
    mut buffer: Option<&mut ReplayBuffer>,
) -> Result<()> {
    cfg.validate()?;
    let mut obs = env.observation();
    let mut t = 0;
    loop {
        let tag = switcher.next(cfg, rng);
        if cfg.background_learning || tag != Tag::Policy {
            dep.update(&env.dep_sensors())?;
        }
        let action = match tag {
            Tag::Policy => policy.act(&obs),
            Tag::Dep => dep.act(),
            Tag::Avg => {
                let p = policy.act(&obs);
                let d = dep.act();
                let w = cfg.w_avg;
                p.iter().zip(&d).map(|(p, d)| (1.0 - w) * p + w * d).collect()
            }
        };
        let out = env.step_unit(&action)?;
        log.steps.push(StepRecord {
            t,
            state: obs.clone(),
            action: action.clone(),
            reward: out.reward,
            tag,
        });
        if let Some(b) = buffer.as_deref_mut() {
            b.push(Transition {
                state: obs,
                action,
                reward: out.reward,
                next_state: out.observation.clone(),
                done: out.done,
                tag,
            });
        }
        obs = out.observation;
        t += 1;
        if out.done {
            return Ok(());
        }
    }
}

/// Action source for pure exploration runs.
pub enum Explorer {
    Dep(Box<DepState>),
    Noise(Box<dyn NoiseProcess>),
}

impl Explorer {
    pub fn tag(&self) -> Tag {
        match self {
            Explorer::Dep(_) => Tag::Dep,
            Explorer::Noise(_) => Tag::Policy,
        }
    }

    /// Next action in `[-1, 1]` for the environment's current state.
    pub fn act(&mut self, env: &dyn ArmEnv) -> Result<Vec<f64>> {
        match self {
            Explorer::Dep(d) => d.step(&env.dep_sensors()),
            Explorer::Noise(n) => Ok(n.sample()),
        }
    }

    /// Called after an environment reset; DEP keeps what it learned.
    pub fn on_env_reset(&mut self) {
        match self {
            Explorer::Dep(d) => d.clear_history(),
            Explorer::Noise(n) => n.reset(),
        }
    }

    /// Full restart, including DEP's matrix and bias.
    pub fn reset(&mut self) {
        match self {
            Explorer::Dep(d) => d.reset(),
            Explorer::Noise(n) => n.reset(),
        }
    }
}

/// Exploration-only data collection for `n_steps` steps, resetting the
/// environment whenever an episode ends. Returns the hand positions visited.
pub fn prefill(
    env: &mut dyn ArmEnv,
    explorer: &mut Explorer,
    n_steps: usize,
    buffer: &mut ReplayBuffer,
    rng: &mut dyn rand::RngCore,
) -> Result<Vec<[f64; 2]>> {
    let mut hands = Vec::with_capacity(n_steps);
    if n_steps == 0 {
        return Ok(hands);
    }
    let mut obs = env.reset(rng);
    explorer.on_env_reset();
    let tag = explorer.tag();
    for _ in 0..n_steps {
        let action = explorer.act(env)?;
        let out = env.step_unit(&action)?;
        hands.push(env.hand());
        buffer.push(Transition {
            state: std::mem::take(&mut obs),
            action,
            reward: out.reward,
            next_state: out.observation.clone(),
            done: out.done,
            tag,
        });
        obs = out.observation;
        if out.done {
            obs = env.reset(rng);
            explorer.on_env_reset();
        }
    }
    Ok(hands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stoch(p: f64, h: usize) -> SwitchConfig {
        SwitchConfig {
            mode: SwitchMode::Stoch,
            p_switch: p,
            h_dep: h,
            ..SwitchConfig::arm()
        }
    }

    #[test]
    fn zero_probability_never_switches() {
        let tags = tag_sequence(&stoch(0.0, 20), 10_000, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(tags.iter().all(|&t| t == Tag::Policy));
    }

    #[test]
    fn forced_switching_pattern() {
        for h in [1, 3, 7] {
            let tags = tag_sequence(&stoch(1.0, h), 5 * (h + 1), &mut ChaCha8Rng::seed_from_u64(0));
            for (i, t) in tags.iter().enumerate() {
                let expected = if i % (h + 1) == 0 { Tag::Policy } else { Tag::Dep };
                assert_eq!(*t, expected, "h={h} i={i}");
            }
        }
    }

    #[test]
    fn deterministic_alternation() {
        let cfg = SwitchConfig {
            mode: SwitchMode::Det,
            h_rl: 3,
            h_dep: 2,
            ..SwitchConfig::arm()
        };
        let tags = tag_sequence(&cfg, 10, &mut ChaCha8Rng::seed_from_u64(0));
        use Tag::*;
        assert_eq!(tags, vec![Policy, Policy, Policy, Dep, Dep, Policy, Policy, Policy, Dep, Dep]);
    }

    #[test]
    fn fixed_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let avg = SwitchConfig {
            mode: SwitchMode::Avg,
            ..SwitchConfig::arm()
        };
        assert!(tag_sequence(&avg, 100, &mut rng).iter().all(|&t| t == Tag::Avg));
        let init = SwitchConfig {
            mode: SwitchMode::InitOnly,
            ..SwitchConfig::arm()
        };
        assert!(tag_sequence(&init, 100, &mut rng).iter().all(|&t| t == Tag::Policy));
    }

    #[test]
    fn invalid_config() {
        assert!(stoch(1.5, 3).validate().is_err());
        assert!(stoch(0.5, 0).validate().is_err());
    }

    fn transition(r: f64) -> Transition {
        Transition {
            state: vec![r],
            action: vec![0.0],
            reward: r,
            next_state: vec![r + 1.0],
            done: false,
            tag: Tag::Dep,
        }
    }

    #[test]
    fn buffer_evicts_oldest() {
        let mut b = ReplayBuffer::new(100).unwrap();
        for i in 0..250 {
            b.push(transition(i as f64));
        }
        assert_eq!(b.len(), 100);
        assert_eq!(b.iter().next().unwrap().reward, 150.0);
        assert_eq!(b.iter().last().unwrap().reward, 249.0);
        assert!(ReplayBuffer::new(0).is_err());
    }

    #[test]
    fn buffer_csv_shape() {
        let mut b = ReplayBuffer::new(4).unwrap();
        b.push(transition(1.0));
        let csv = b.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "tag,reward,done,s0,a0,ns0");
        assert_eq!(lines[1], "dep,1,0,1,0,2");
    }

    #[test]
    fn proportional_policy_direction() {
        let mut p = ProportionalPolicy {
            gain: 10.0,
            directions: vec![[1.0, 0.0], [0.0, 1.0]],
        };
        let obs = [0.0, 0.0, 0.1, -0.05, 0.0, 0.0];
        assert_eq!(p.act(&obs), vec![1.0, -0.5]);
    }
}
