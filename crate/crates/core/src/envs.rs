//! Episodic tasks: `torquearm`, `arm26` sparse reaching and the continuous
//! mountain car.
//!
//! Arm environments take inflated action vectors (`m·n` entries) and average
//! them back to the native actuators. Muscle-related observations and the DEP
//! sensors are replicated `n` times to match.

use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::actions::{collapse_actions, inflate, ActionMultiplier};
use crate::dep::{dep_sensor, simplified_dep_1d, Normalizer};
use crate::dynamics::{
    arm_substep, forward_kinematics, mountain_car_step, ArmGeometry, JointState, MountainCarParams, MountainCarState,
};
use crate::error::{ensure_finite, Error, Result};
use crate::muscle::{
    activation_step, joint_torques_from_muscles, muscle_forces, muscle_lengths, muscle_velocities, MuscleParams,
    MuscleState,
};
use crate::noise::NoiseProcess;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeSpec {
    pub horizon: usize,
    /// End the episode as soon as the goal is reached.
    pub terminate_on_reach: bool,
    pub reset_q_std: f64,
    pub reset_qdot_std: f64,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self {
            horizon: 300,
            terminate_on_reach: true,
            reset_q_std: 0.01,
            reset_qdot_std: 0.03,
        }
    }
}

impl EpisodeSpec {
    /// Long, non-terminating episodes used for exploration measurements.
    pub fn exploration(horizon: usize) -> Self {
        Self {
            horizon,
            terminate_on_reach: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidParam("episode horizon must be > 0".into()));
        }
        if !(self.reset_q_std >= 0.0 && self.reset_qdot_std >= 0.0) {
            return Err(Error::InvalidParam("reset noise must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub position: [f64; 2],
    pub radius: f64,
}

/// Axis-aligned region goals are drawn from, `[(xmin, xmax), (ymin, ymax)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalRegion {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub radius: f64,
}

impl Default for GoalRegion {
    fn default() -> Self {
        // 35 cm × 15 cm in the upper right of what the muscles can hold
        Self {
            x: (0.08, 0.43),
            y: (-0.44, -0.29),
            radius: 0.05,
        }
    }
}

impl GoalRegion {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Goal {
        Goal {
            position: [rng.random_range(self.x.0..self.x.1), rng.random_range(self.y.0..self.y.1)],
            radius: self.radius,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x.0 && p[0] <= self.x.1 && p[1] >= self.y.0 && p[1] <= self.y.1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub reached: bool,
}

/// Common surface of the arm tasks.
pub trait ArmEnv: Send {
    fn name(&self) -> &'static str;
    /// Length of the (inflated) action vector.
    fn action_dim(&self) -> usize;
    /// Native action box; exploration signals in `[-1, 1]` are mapped onto it.
    fn action_bounds(&self) -> (f64, f64);
    fn observation(&self) -> Vec<f64>;
    /// Calibrated DEP sensors, one per (inflated) actuator.
    fn dep_sensors(&self) -> Vec<f64>;
    fn hand(&self) -> [f64; 2];
    fn joints(&self) -> JointState;
    fn geometry(&self) -> &ArmGeometry;
    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;

    /// Steps with an action in `[-1, 1]`, rescaled onto [`ArmEnv::action_bounds`].
    fn step_unit(&mut self, unit_action: &[f64]) -> Result<StepOutcome> {
        let (lo, hi) = self.action_bounds();
        let a: Vec<f64> = unit_action
            .iter()
            .map(|u| lo + (u.clamp(-1.0, 1.0) + 1.0) * 0.5 * (hi - lo))
            .collect();
        self.step(&a)
    }
}

fn perturbed_rest<R: Rng + ?Sized>(spec: &EpisodeSpec, geometry: &ArmGeometry, rng: &mut R) -> JointState {
    let mut s = JointState::rest();
    for j in 0..2 {
        let dq: f64 = rng.sample(StandardNormal);
        let dv: f64 = rng.sample(StandardNormal);
        let (lo, hi) = geometry.limits[j];
        s.q[j] = (spec.reset_q_std * dq).clamp(lo, hi);
        s.qdot[j] = spec.reset_qdot_std * dv;
    }
    s
}

fn check_action(action: &[f64], expected: usize) -> Result<()> {
    if action.len() != expected {
        return Err(Error::Dimension {
            what: "action vector",
            expected,
            got: action.len(),
        });
    }
    ensure_finite("action", action)
}

/// Two torque generators; no reward.
#[derive(Debug, Clone)]
pub struct TorqueArm {
    geometry: ArmGeometry,
    max_torque: f64,
    n: ActionMultiplier,
    spec: EpisodeSpec,
    state: JointState,
    torques: [f64; 2],
    t: usize,
}

impl TorqueArm {
    pub fn new(geometry: ArmGeometry, max_torque: f64, n: ActionMultiplier, spec: EpisodeSpec) -> Result<Self> {
        geometry.validate()?;
        spec.validate()?;
        if !(max_torque > 0.0) {
            return Err(Error::InvalidParam("max torque must be > 0".into()));
        }
        Ok(Self {
            geometry,
            max_torque,
            n,
            spec,
            state: JointState::rest(),
            torques: [0.0; 2],
            t: 0,
        })
    }

    pub fn set_state(&mut self, state: JointState) {
        self.state = state;
    }
}

impl ArmEnv for TorqueArm {
    fn name(&self) -> &'static str {
        "torquearm"
    }

    fn action_dim(&self) -> usize {
        2 * self.n.get()
    }

    fn action_bounds(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    fn observation(&self) -> Vec<f64> {
        let n = self.n;
        let mut o = Vec::with_capacity(6 + 6 * n.get());
        o.extend_from_slice(&self.state.q);
        o.extend_from_slice(&self.state.qdot);
        o.extend(inflate(&self.state.q, n));
        o.extend(inflate(&self.state.qdot, n));
        o.extend(inflate(&self.torques, n));
        o.extend_from_slice(&self.hand());
        o
    }

    fn dep_sensors(&self) -> Vec<f64> {
        let s: Vec<f64> = self
            .state
            .q
            .iter()
            .zip(&self.geometry.limits)
            .map(|(&q, &(lo, hi))| 2.0 * (q - lo) / (hi - lo) - 1.0)
            .collect();
        inflate(&s, self.n)
    }

    fn hand(&self) -> [f64; 2] {
        forward_kinematics(&self.state.q, &self.geometry)
    }

    fn joints(&self) -> JointState {
        self.state
    }

    fn geometry(&self) -> &ArmGeometry {
        &self.geometry
    }

    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        self.state = perturbed_rest(&self.spec, &self.geometry, rng);
        self.torques = [0.0; 2];
        self.t = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        check_action(action, self.action_dim())?;
        let clipped: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        let native = collapse_actions(&clipped, self.n)?;
        self.torques = [native[0] * self.max_torque, native[1] * self.max_torque];
        self.state = crate::dynamics::arm_step(&self.state, &self.torques, &self.geometry)?;
        self.t += 1;
        Ok(StepOutcome {
            observation: self.observation(),
            reward: 0.0,
            done: self.t >= self.spec.horizon,
            reached: false,
        })
    }
}

/// The two-link arm driven by six muscles, with sparse reaching rewards.
#[derive(Debug, Clone)]
pub struct Arm26 {
    geometry: ArmGeometry,
    muscles: MuscleParams,
    n: ActionMultiplier,
    spec: EpisodeSpec,
    goals: GoalRegion,
    state: JointState,
    activity: Vec<f64>,
    goal: Goal,
    length_norm: Normalizer,
    force_norm: Normalizer,
    force_scale: f64,
    t: usize,
}

pub const REACH_REWARD: f64 = 10.0;
pub const STEP_PENALTY: f64 = -1.0;

impl Arm26 {
    pub fn new(
        geometry: ArmGeometry,
        muscles: MuscleParams,
        n: ActionMultiplier,
        spec: EpisodeSpec,
        goals: GoalRegion,
        force_scale: f64,
    ) -> Result<Self> {
        geometry.validate()?;
        muscles.validate_arm26()?;
        spec.validate()?;
        let (length_norm, force_norm) = calibrate_muscle_sensors(&geometry, &muscles)?;
        let goal = Goal {
            position: [(goals.x.0 + goals.x.1) / 2.0, (goals.y.0 + goals.y.1) / 2.0],
            radius: goals.radius,
        };
        Ok(Self {
            geometry,
            n,
            spec,
            goals,
            state: JointState::rest(),
            activity: vec![0.0; muscles.len()],
            muscles,
            goal,
            length_norm,
            force_norm,
            force_scale,
            t: 0,
        })
    }

    pub fn muscles(&self) -> &MuscleParams {
        &self.muscles
    }

    pub fn muscle_state(&self) -> MuscleState {
        MuscleState::at(&self.state.q, &self.state.qdot, self.activity.clone(), &self.muscles)
    }

    pub fn goal(&self) -> Goal {
        self.goal
    }

    pub fn set_goal(&mut self, goal: Goal) {
        self.goal = goal;
    }

    pub fn set_state(&mut self, state: JointState, activity: Vec<f64>) {
        self.state = state;
        self.activity = activity;
    }

    pub fn reward_at(&self, hand: [f64; 2]) -> (f64, bool) {
        let d = ((hand[0] - self.goal.position[0]).powi(2) + (hand[1] - self.goal.position[1]).powi(2)).sqrt();
        if d < self.goal.radius {
            (REACH_REWARD, true)
        } else {
            (STEP_PENALTY, false)
        }
    }
}

/// Min/max of fibre lengths and forces over a scripted sweep of the joint box
/// at rest and at full activation.
pub fn calibrate_muscle_sensors(geometry: &ArmGeometry, muscles: &MuscleParams) -> Result<(Normalizer, Normalizer)> {
    let steps = 24;
    let mut lengths = Vec::new();
    let mut forces = Vec::new();
    for i in 0..=steps {
        for j in 0..=steps {
            let lerp = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * k as f64 / steps as f64;
            let q = [lerp(geometry.limits[0], i), lerp(geometry.limits[1], j)];
            for act in [0.0, 1.0] {
                let st = MuscleState::at(&q, &[0.0, 0.0], vec![act; muscles.len()], muscles);
                forces.push(muscle_forces(&st, muscles));
                lengths.push(st.length);
            }
        }
    }
    Ok((
        Normalizer::from_samples(lengths.iter().map(|v| v.as_slice()))?,
        Normalizer::from_samples(forces.iter().map(|v| v.as_slice()))?,
    ))
}

impl ArmEnv for Arm26 {
    fn name(&self) -> &'static str {
        "arm26"
    }

    fn action_dim(&self) -> usize {
        self.muscles.len() * self.n.get()
    }

    fn action_bounds(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    fn observation(&self) -> Vec<f64> {
        let ms = self.muscle_state();
        let forces = muscle_forces(&ms, &self.muscles);
        let n = self.n;
        let mut o = Vec::with_capacity(8 + 24 * n.get());
        o.extend_from_slice(&self.state.q);
        o.extend_from_slice(&self.state.qdot);
        o.extend(inflate(&ms.length, n));
        o.extend(inflate(&ms.velocity, n));
        o.extend(inflate(&forces, n));
        o.extend(inflate(&ms.activity, n));
        o.extend_from_slice(&self.goal.position);
        o.extend_from_slice(&self.hand());
        o
    }

    fn dep_sensors(&self) -> Vec<f64> {
        let ms = self.muscle_state();
        let forces = muscle_forces(&ms, &self.muscles);
        let s = dep_sensor(&ms.length, &forces, &self.length_norm, &self.force_norm, self.force_scale)
            .expect("normalizers are calibrated at construction");
        inflate(&s, self.n)
    }

    fn hand(&self) -> [f64; 2] {
        forward_kinematics(&self.state.q, &self.geometry)
    }

    fn joints(&self) -> JointState {
        self.state
    }

    fn geometry(&self) -> &ArmGeometry {
        &self.geometry
    }

    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        self.state = perturbed_rest(&self.spec, &self.geometry, rng);
        self.activity.fill(0.0);
        self.goal = self.goals.sample(rng);
        self.t = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        check_action(action, self.action_dim())?;
        let clipped: Vec<f64> = action.iter().map(|a| a.clamp(0.0, 1.0)).collect();
        let excitation = collapse_actions(&clipped, self.n)?;
        let h = self.geometry.dt / self.geometry.substeps as f64;
        for _ in 0..self.geometry.substeps {
            for (a, &e) in self.activity.iter_mut().zip(&excitation) {
                *a = activation_step(*a, e, h, &self.muscles)?;
            }
            let lengths = muscle_lengths(&self.state.q, &self.muscles);
            let vels = muscle_velocities(&self.state.qdot, &self.muscles);
            let forces: Vec<f64> = (0..self.muscles.len())
                .map(|i| {
                    crate::muscle::muscle_force(self.activity[i], lengths[i] / self.muscles.l_opt[i], vels[i], i, &self.muscles)
                })
                .collect();
            let tau = joint_torques_from_muscles(&forces, &self.muscles)?;
            arm_substep(&mut self.state, &tau, &self.geometry, h);
        }
        if !self.state.is_finite() {
            return Err(Error::NonFinite("arm26 joint state"));
        }
        self.t += 1;
        let (reward, reached) = self.reward_at(self.hand());
        let done = (reached && self.spec.terminate_on_reach) || self.t >= self.spec.horizon;
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done,
            reached,
        })
    }
}

/// Controllers for the mountain-car demonstration.
pub enum CarController {
    /// `a = tanh(κ ṡ_t ṡ_{t-Δt}) s_t` on the track-phase sensor.
    SimplifiedDep { time_dist: usize, kappa: f64 },
    /// `a ~ N(0, σ²)`, clipped by the environment.
    Gaussian { sigma: f64, rng: rand_chacha::ChaCha8Rng },
    Noise(Box<dyn NoiseProcess>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MountainCarTask {
    pub params: MountainCarParams,
    pub start: MountainCarState,
    pub horizon: usize,
}

impl Default for MountainCarTask {
    fn default() -> Self {
        Self {
            params: MountainCarParams::default(),
            // slightly right of the valley, drifting right
            start: MountainCarState { x: -0.5, v: 0.01 },
            horizon: 1000,
        }
    }
}

/// DEP sensor for the car: the phase `3x + π/2` of the track, zero at the
/// valley floor and positive to its right.
pub fn car_sensor(x: f64) -> f64 {
    3.0 * x + std::f64::consts::FRAC_PI_2
}

#[derive(Debug, Clone, PartialEq)]
pub struct CarEpisode {
    pub states: Vec<MountainCarState>,
    pub actions: Vec<f64>,
    pub success: bool,
    /// Step at which the goal was first reached.
    pub success_step: Option<usize>,
}

impl CarEpisode {
    pub fn max_x(&self) -> f64 {
        self.states.iter().map(|s| s.x).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Runs one episode; success iff `x ≥ goal_x` within the horizon.
pub fn mountain_car_episode(task: &MountainCarTask, controller: &mut CarController) -> CarEpisode {
    let mut state = task.start;
    let mut sensors = vec![car_sensor(state.x)];
    let mut states = vec![state];
    let mut actions = Vec::with_capacity(task.horizon);
    let mut success_step = None;
    for t in 0..task.horizon {
        let a = match controller {
            CarController::SimplifiedDep { time_dist, kappa } => simplified_dep_1d(&sensors, *time_dist, *kappa),
            CarController::Gaussian { sigma, rng } => {
                let d = Normal::new(0.0, *sigma).unwrap_or(Normal::new(0.0, 1.0).expect("unit normal"));
                rng.sample(d)
            }
            CarController::Noise(p) => p.sample()[0],
        };
        let a = a.clamp(-1.0, 1.0);
        state = mountain_car_step(&state, a, &task.params);
        actions.push(a);
        states.push(state);
        sensors.push(car_sensor(state.x));
        if state.x >= task.params.goal_x {
            success_step = Some(t + 1);
            break;
        }
    }
    CarEpisode {
        states,
        actions,
        success: success_step.is_some(),
        success_step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arm26(n: usize) -> Arm26 {
        Arm26::new(
            ArmGeometry::default(),
            MuscleParams::arm26(),
            ActionMultiplier::new(n).unwrap(),
            EpisodeSpec::default(),
            GoalRegion::default(),
            0.0003,
        )
        .unwrap()
    }

    #[test]
    fn same_seed_same_goal() {
        let mut a = arm26(1);
        let mut b = arm26(1);
        a.reset(&mut ChaCha8Rng::seed_from_u64(4));
        b.reset(&mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a.goal(), b.goal());
        assert_eq!(a.joints(), b.joints());
    }

    #[test]
    fn goals_inside_region() {
        let region = GoalRegion::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            assert!(region.contains(region.sample(&mut rng).position));
        }
    }

    #[test]
    fn reward_threshold() {
        let mut env = arm26(1);
        let hand = env.hand();
        env.set_goal(Goal {
            position: hand,
            radius: 0.05,
        });
        assert_eq!(env.reward_at(hand), (10.0, true));
        env.set_goal(Goal {
            position: [hand[0] + 0.06, hand[1]],
            radius: 0.05,
        });
        assert_eq!(env.reward_at(hand), (-1.0, false));
    }

    #[test]
    fn reaching_goal_terminates() {
        let mut env = arm26(1);
        env.reset(&mut ChaCha8Rng::seed_from_u64(0));
        env.set_state(JointState::rest(), vec![0.0; 6]);
        env.set_goal(Goal {
            position: env.hand(),
            radius: 0.05,
        });
        let out = env.step(&[0.0; 6]).unwrap();
        assert_eq!(out.reward, 10.0);
        assert!(out.done && out.reached);
    }

    #[test]
    fn idle_episode_returns_minus_horizon() {
        let mut env = arm26(1);
        env.reset(&mut ChaCha8Rng::seed_from_u64(2));
        let mut ret = 0.0;
        let mut steps = 0;
        loop {
            let out = env.step(&[0.0; 6]).unwrap();
            assert!(out.reward == 10.0 || out.reward == -1.0);
            ret += out.reward;
            steps += 1;
            if out.done {
                break;
            }
        }
        assert_eq!(steps, 300);
        assert_eq!(ret, -300.0);
    }

    #[test]
    fn wrong_action_dimension_rejected() {
        let mut env = arm26(2);
        assert!(env.step(&[0.0; 6]).is_err());
        assert!(env.step(&[0.0; 12]).is_ok());
    }

    #[test]
    fn observation_dimensions() {
        let env = arm26(3);
        assert_eq!(env.observation().len(), 2 + 2 + 4 * 18 + 2 + 2);
        assert_eq!(env.dep_sensors().len(), 18);
        let t = TorqueArm::new(ArmGeometry::default(), 5.0, ActionMultiplier::new(3).unwrap(), EpisodeSpec::default())
            .unwrap();
        assert_eq!(t.observation().len(), 4 + 3 * 6 + 2);
        assert_eq!(t.dep_sensors().len(), 6);
    }

    #[test]
    fn torquearm_sensors_are_normalized_angles() {
        let mut t = TorqueArm::new(ArmGeometry::default(), 5.0, ActionMultiplier::ONE, EpisodeSpec::default()).unwrap();
        t.set_state(JointState {
            q: [crate::dynamics::DEFAULT_JOINT_LIMIT, 0.0],
            qdot: [0.0; 2],
        });
        assert_eq!(t.dep_sensors(), vec![1.0, 0.0]);
    }

    #[test]
    fn car_sensor_zero_at_valley() {
        assert!(car_sensor(MountainCarParams::default().valley()).abs() < 1e-15);
    }
}
