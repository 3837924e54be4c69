#![allow(dead_code)]

use rand::Rng;
use slackline::geometry::{ArmSpec, Obstacle, Point, Segment};

/// Samples used by the brute-force distance oracle.
pub const ORACLE_SAMPLES: usize = 10_000;

/// Min and max distance from `p` to `ORACLE_SAMPLES` evenly spaced points of
/// `seg`, endpoints included.
pub fn sampled_dists(seg: Segment, p: Point) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..ORACLE_SAMPLES {
        let t = i as f64 / (ORACLE_SAMPLES - 1) as f64;
        let d = seg.p1.lerp(seg.p2, t).dist(p);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// One random feasibility instance around an arm.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seg: Segment,
    pub arm: ArmSpec,
    pub obstacles: Vec<Obstacle>,
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let base = Point::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
    let reach_min = rng.gen_range(0.05..0.2);
    let reach_max = reach_min + rng.gen_range(0.1..0.4);
    let around =
        |rng: &mut R, r: f64| base + Point::new(rng.gen_range(-r..r), rng.gen_range(-r..r));
    let p1 = around(rng, reach_max * 1.1);
    let p2 = p1 + Point::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
    let obstacles = (0..rng.gen_range(0..=3))
        .map(|_| {
            let radius = rng.gen_range(0.01..0.05);
            Obstacle {
                center: around(rng, reach_max),
                radius,
                clearance: radius + rng.gen_range(0.0..0.1),
            }
        })
        .collect();
    Instance {
        seg: Segment::new(p1, p2),
        arm: ArmSpec {
            base,
            reach_min,
            reach_max,
        },
        obstacles,
    }
}

/// The feasibility predicate evaluated on sampled distances, plus the
/// smallest gap between any sampled distance and its threshold.
pub fn sampled_feasible(inst: &Instance) -> (bool, f64) {
    let (lo, hi) = sampled_dists(inst.seg, inst.arm.base);
    let mut ok = lo > inst.arm.reach_min && hi < inst.arm.reach_max;
    let mut margin = (lo - inst.arm.reach_min)
        .abs()
        .min((hi - inst.arm.reach_max).abs());
    for o in &inst.obstacles {
        let (d, _) = sampled_dists(inst.seg, o.center);
        ok &= d > o.clearance;
        margin = margin.min((d - o.clearance).abs());
    }
    (ok, margin)
}

use slackline::explore::random_drag;
use slackline::sim::{
    execute_with_report, max_bend, max_link_error, min_obstacle_dist, ActionPair, EnvState,
};
use slackline::TaskConfig;

/// A random feasible action: a single drag, or two drags by different arms
/// with separated picks.
pub fn random_action<R: Rng>(
    state: &EnvState,
    cfg: &TaskConfig,
    rng: &mut R,
) -> Option<ActionPair> {
    let leader = random_drag(state, cfg, rng)?.leader;
    if rng.gen_bool(0.5) {
        return Some(ActionPair::single(leader));
    }
    for _ in 0..50 {
        let f = random_drag(state, cfg, rng)?.leader;
        if f.arm != leader.arm && f.pick.dist(leader.pick) > cfg.min_pick_sep {
            return Some(ActionPair {
                leader,
                follower: Some(f),
            });
        }
    }
    Some(ActionPair::single(leader))
}

/// Worst violations seen over a batch of executions.
#[derive(Debug, Default, Clone, Copy)]
pub struct SimAudit {
    pub actions: usize,
    pub unobstructed: usize,
    pub link_error: f64,
    /// Largest bend beyond the joint limit (negative when within).
    pub bend_excess: f64,
    /// Deepest keypoint or link-midpoint intrusion into an obstacle.
    pub penetration: f64,
    /// Largest distance of a dragged keypoint from its target on
    /// unobstructed executions.
    pub pin_error: f64,
}

impl SimAudit {
    pub fn record(&mut self, state: &EnvState, action: &ActionPair, cfg: &TaskConfig) -> EnvState {
        let (next, report) =
            execute_with_report(state, action, cfg).expect("feasible action executes");
        self.actions += 1;
        self.link_error = self
            .link_error
            .max(max_link_error(&next.keypoints, state.link_len()));
        self.bend_excess = self
            .bend_excess
            .max(max_bend(&next.keypoints) - cfg.joint_limit);
        self.penetration = self
            .penetration
            .max(cfg.obstacle_radius - min_obstacle_dist(&next));
        if report.unobstructed() {
            self.unobstructed += 1;
            // The follower grasps its keypoint where the leader's drag left it.
            let mid = match action.follower {
                Some(_) => {
                    execute_with_report(state, &ActionPair::single(action.leader), cfg)
                        .unwrap()
                        .0
                }
                None => state.clone(),
            };
            let last = action.follower.unwrap_or(action.leader);
            let target = mid.keypoints[last.k] + last.displacement();
            self.pin_error = self.pin_error.max(next.keypoints[last.k].dist(target));
        }
        next
    }
}

use slackline::encoder::{contrastive_loss_grad, Encoder, TrainConfig};
use slackline::sim::generate_env;

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely rather than relatively.
pub const GRAD_FLOOR: f64 = 1e-6;

/// A chain long enough that a d=4, hidden-8 encoder has over 500 parameters.
pub fn gradcheck_task() -> TaskConfig {
    TaskConfig {
        keypoints: 30,
        ..TaskConfig::default()
    }
}

/// Largest relative error between the analytic contrastive gradient and
/// central differences, and the number of parameters probed.
pub fn contrastive_gradient_check(seed: u64) -> (f64, usize) {
    let task = gradcheck_task();
    let train = TrainConfig {
        d: 4,
        hidden: 8,
        negatives: 3,
        seed,
        ..TrainConfig::default()
    };
    let mut enc = Encoder::init(&task, &train);
    let states: Vec<_> = (0..2 * (train.negatives + 2) as u64)
        .map(|i| generate_env(&task, seed * 1000 + i).unwrap())
        .collect();
    let x = enc.inputs(&states).unwrap();
    let (_, grad) = contrastive_loss_grad(&enc.mlp, x.view(), train.negatives);
    let mut worst = 0.0f64;
    for i in 0..enc.mlp.num_params() {
        let v = enc.mlp.param(i);
        enc.mlp.set_param(i, v + FD_STEP);
        let up = contrastive_loss_grad(&enc.mlp, x.view(), train.negatives).0;
        enc.mlp.set_param(i, v - FD_STEP);
        let down = contrastive_loss_grad(&enc.mlp, x.view(), train.negatives).0;
        enc.mlp.set_param(i, v);
        let numeric = (up - down) / (2.0 * FD_STEP);
        let analytic = grad.param(i);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
        worst = worst.max(rel);
    }
    (worst, enc.mlp.num_params())
}

use slackline::explore::{collect, CollectParams, Dataset};

/// A 50-episode dataset and a briefly trained small encoder.
pub fn small_fixture() -> &'static (Dataset, Encoder) {
    static FIXTURE: std::sync::OnceLock<(Dataset, Encoder)> = std::sync::OnceLock::new();
    FIXTURE.get_or_init(|| {
        let params = CollectParams {
            episodes: 50,
            goals: 20,
            ..CollectParams::default()
        };
        let ds = collect(&TaskConfig::default(), &params, 3).unwrap().dataset;
        let train = TrainConfig {
            d: 8,
            hidden: 32,
            epochs: 3,
            ..TrainConfig::default()
        };
        let enc = slackline::encoder::train(&ds, &train).unwrap().encoder;
        (ds, enc)
    })
}

/// Random unit vector: a normalized sample from the cube.
pub fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}
