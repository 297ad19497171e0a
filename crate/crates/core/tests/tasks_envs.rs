use std::collections::HashSet;

use overact::actions::ActionMultiplier;
use overact::dynamics::{ArmGeometry, MountainCarState};
use overact::envs::{
    mountain_car_episode, Arm26, ArmEnv, CarController, EpisodeSpec, GoalRegion, MountainCarTask, TorqueArm,
};
use overact::muscle::MuscleParams;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ks_uniform(mut xs: Vec<f64>, lo: f64, hi: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x - lo) / (hi - lo);
            f64::max((i + 1) as f64 / n - f, f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[test]
fn goal_marginals_are_uniform() {
    let region = GoalRegion::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let goals: Vec<[f64; 2]> = (0..10_000).map(|_| region.sample(&mut rng).position).collect();
    // KS critical value at alpha = 0.01
    let crit = 1.628 / (goals.len() as f64).sqrt();
    let dx = ks_uniform(goals.iter().map(|g| g[0]).collect(), region.x.0, region.x.1);
    let dy = ks_uniform(goals.iter().map(|g| g[1]).collect(), region.y.0, region.y.1);
    assert!(dx < crit && dy < crit, "D = {dx}, {dy} (crit {crit})");
    assert!((region.x.1 - region.x.0 - 0.35).abs() < 1e-12);
    assert!((region.y.1 - region.y.0 - 0.15).abs() < 1e-12);
}

#[test]
fn goal_region_reachable_and_away_from_rest() {
    let g = ArmGeometry::default();
    let r = GoalRegion::default();
    for &x in &[r.x.0, r.x.1] {
        for &y in &[r.y.0, r.y.1] {
            assert!((x * x + y * y).sqrt() < g.reach());
        }
    }
    let rest = overact::dynamics::forward_kinematics(&[0.0, 0.0], &g);
    assert!(!r.contains(rest));
}

fn arm26(spec: EpisodeSpec) -> Arm26 {
    Arm26::new(
        ArmGeometry::default(),
        MuscleParams::arm26(),
        ActionMultiplier::ONE,
        spec,
        GoalRegion::default(),
        0.0003,
    )
    .unwrap()
}

#[test]
fn arm26_episode_invariants() {
    let mut env = arm26(EpisodeSpec::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut noise = overact::noise::WhiteNoise::new(1.0, 6, 5);
    for _ in 0..5 {
        let dim = env.reset(&mut rng).len();
        loop {
            use overact::noise::NoiseProcess;
            let out = env.step_unit(&noise.sample()).unwrap();
            assert_eq!(out.observation.len(), dim);
            assert!(out.observation.iter().all(|x| x.is_finite()));
            assert!(out.reward == 10.0 || out.reward == -1.0);
            if out.done {
                // reached XOR horizon
                break;
            }
        }
    }
}

#[test]
fn torquearm_has_no_reward() {
    let mut env = TorqueArm::new(ArmGeometry::default(), 5.0, ActionMultiplier::ONE, EpisodeSpec::default()).unwrap();
    env.reset(&mut ChaCha8Rng::seed_from_u64(0));
    let mut steps = 0;
    loop {
        let out = env.step(&[0.5, -0.5]).unwrap();
        assert_eq!(out.reward, 0.0);
        steps += 1;
        if out.done {
            break;
        }
    }
    assert_eq!(steps, 300);
}

#[test]
fn muscles_restrict_the_reachable_joint_set() {
    let lim = overact::dynamics::DEFAULT_JOINT_LIMIT;
    let cell = |q: [f64; 2]| -> (i32, i32) {
        let w = 2.0 * lim / 20.0;
        (((q[0] + lim) / w) as i32, ((q[1] + lim) / w) as i32)
    };
    let mut torque_cells = HashSet::new();
    let mut torque_max = [0.0f64; 2];
    for i in 0..11 {
        for j in 0..11 {
            let a = [-1.0 + 0.2 * i as f64, -1.0 + 0.2 * j as f64];
            let mut env = TorqueArm::new(ArmGeometry::default(), 5.0, ActionMultiplier::ONE, EpisodeSpec::exploration(300))
                .unwrap();
            for _ in 0..300 {
                env.step_unit(&a).unwrap();
                let q = env.joints().q;
                torque_cells.insert(cell(q));
                torque_max = [torque_max[0].max(q[0].abs()), torque_max[1].max(q[1].abs())];
            }
        }
    }
    let mut muscle_cells = HashSet::new();
    let mut muscle_max = [0.0f64; 2];
    let ex = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    for code in 0..4usize.pow(6) {
        let e: Vec<f64> = (0..6).map(|k| ex[(code / 4usize.pow(k as u32)) % 4]).collect();
        let mut env = arm26(EpisodeSpec::exploration(300));
        for _ in 0..300 {
            env.step(&e).unwrap();
            let q = env.joints().q;
            muscle_cells.insert(cell(q));
            muscle_max = [muscle_max[0].max(q[0].abs()), muscle_max[1].max(q[1].abs())];
        }
    }
    assert!(
        muscle_cells.len() < torque_cells.len(),
        "arm26 {} cells vs torquearm {}",
        muscle_cells.len(),
        torque_cells.len()
    );
    // passive stretch stops the muscle arm well short of the joint limits
    assert!(torque_max.iter().all(|m| (m - lim).abs() < 1e-9));
    assert!(muscle_max.iter().all(|m| *m < 0.95 * lim), "{muscle_max:?}");
}

#[test]
fn mountain_car_dep_sweep() {
    let task = MountainCarTask::default();
    for td in 5..=28 {
        let mut c = CarController::SimplifiedDep { time_dist: td, kappa: 1e3 };
        let ep = mountain_car_episode(&task, &mut c);
        assert!(ep.success, "time_dist {td} failed (max x {})", ep.max_x());
    }
    let mut c = CarController::SimplifiedDep { time_dist: 50, kappa: 1e3 };
    assert!(!mountain_car_episode(&task, &mut c).success);
}

#[test]
fn mountain_car_idle_never_succeeds() {
    let task = MountainCarTask {
        start: MountainCarState { x: -0.5, v: 0.0 },
        ..MountainCarTask::default()
    };
    let mut c = CarController::SimplifiedDep { time_dist: 5, kappa: 0.0 };
    let ep = mountain_car_episode(&task, &mut c);
    assert!(!ep.success);
    assert_eq!(ep.actions.len(), 1000);
    assert!(ep.actions.iter().all(|a| *a == 0.0));
}
