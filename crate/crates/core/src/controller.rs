//! Goal-conditioned control: choose which keypoints the two arms drag and
//! where, given the current state and a subgoal.
//!
//! The leader corrects the keypoint with the largest discrepancy to the
//! subgoal, falling back to the nearest keypoint some arm can actually drag.
//! The follower, on the other arm, grabs the farthest keypoint from the
//! leader's pick and moves it along the displacement of its nearest endpoint.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Arm, TaskConfig};
use crate::explore::correspondence_candidates;
use crate::geometry::{sequence_feasible, Obstacle, Point, Segment};
use crate::sim::{ActionPair, EnvState, PickPlace};

/// Displacements shorter than this count as already converged.
pub const CONVERGED_EPS: f64 = 1e-6;
/// Headings tried by the fallback drag.
const FALLBACK_DIRECTIONS: usize = 8;

/// `pick` moved toward `target` by at most `max_step`, or `None` when the two
/// already coincide.
pub fn correspondence_place(pick: Point, target: Point, max_step: f64) -> Option<Point> {
    let v = target - pick;
    let n = v.norm();
    if n < CONVERGED_EPS {
        return None;
    }
    Some(pick + v * (max_step.min(n) / n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeaderChoice {
    /// Keypoint with the largest discrepancy to the subgoal.
    pub target: usize,
    pub action: PickPlace,
}

fn feasible_arm(seg: Segment, cfg: &TaskConfig, obstacles: &[Obstacle]) -> Option<Arm> {
    let ok: Vec<Arm> = Arm::BOTH
        .into_iter()
        .filter(|&a| sequence_feasible(seg, &cfg.arm_spec(a), obstacles))
        .collect();
    match ok.as_slice() {
        [] => None,
        [a] => Some(*a),
        _ => {
            let d1 = cfg.arm_bases[0].dist(seg.p1);
            let d2 = cfg.arm_bases[1].dist(seg.p1);
            Some(if d2 < d1 { Arm::Two } else { Arm::One })
        }
    }
}

fn by_distance_then_index(a: (usize, f64), b: (usize, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then(a.0.cmp(&b.0))
}

pub fn leader_select(
    state: &EnvState,
    subgoal: &EnvState,
    cfg: &TaskConfig,
) -> Option<LeaderChoice> {
    let q = &state.keypoints;
    let target = q
        .iter()
        .zip(&subgoal.keypoints)
        .map(|(a, b)| a.dist(*b))
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, d)| {
            if d > best.1 {
                (k, d)
            } else {
                best
            }
        });
    if target.1 < CONVERGED_EPS {
        return None;
    }
    let target = target.0;
    let obstacles = cfg.obstacles(&state.obstacles);
    let mut order: Vec<(usize, f64)> = q.iter().map(|p| p.dist(q[target])).enumerate().collect();
    order.sort_by(|&a, &b| by_distance_then_index(a, b));
    for (k, _) in order {
        let Some(place) = correspondence_place(q[k], subgoal.keypoints[k], cfg.max_step) else {
            continue;
        };
        let seg = Segment::new(q[k], place);
        if let Some(arm) = feasible_arm(seg, cfg, &obstacles) {
            return Some(LeaderChoice {
                target,
                action: PickPlace {
                    arm,
                    k,
                    pick: q[k],
                    place,
                },
            });
        }
    }
    None
}

/// Follower drag on the arm not used by `leader`, or `None` for single-arm mode.
pub fn follower_select(
    state: &EnvState,
    subgoal: &EnvState,
    leader: &PickPlace,
    cfg: &TaskConfig,
) -> Option<PickPlace> {
    let q = &state.keypoints;
    let arm = leader.arm.other();
    let spec = cfg.arm_spec(arm);
    let obstacles = cfg.obstacles(&state.obstacles);
    let anchor = q[leader.k];
    let mut order: Vec<(usize, f64)> = q
        .iter()
        .map(|p| p.dist(anchor))
        .enumerate()
        .filter(|&(_, d)| d > cfg.min_pick_sep)
        .collect();
    order.sort_by(|&a, &b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (k, _) in order {
        let end = if q[k].dist(state.first()) <= q[k].dist(state.last()) {
            Arm::One
        } else {
            Arm::Two
        };
        let v = subgoal.endpoint(end) - state.endpoint(end);
        let Some(place) = correspondence_place(q[k], q[k] + v, cfg.max_step) else {
            continue;
        };
        if sequence_feasible(Segment::new(q[k], place), &spec, &obstacles) {
            return Some(PickPlace {
                arm,
                k,
                pick: q[k],
                place,
            });
        }
    }
    None
}

/// Leader-follower action, or `None` when no keypoint can be dragged toward
/// the subgoal by either arm.
pub fn act(state: &EnvState, subgoal: &EnvState, cfg: &TaskConfig) -> Option<ActionPair> {
    let leader = leader_select(state, subgoal, cfg)?.action;
    Some(ActionPair {
        leader,
        follower: follower_select(state, subgoal, &leader, cfg),
    })
}

pub fn only_leader(state: &EnvState, subgoal: &EnvState, cfg: &TaskConfig) -> Option<ActionPair> {
    leader_select(state, subgoal, cfg).map(|c| ActionPair::single(c.action))
}

/// Uniformly random feasible correspondence drags: one for a random arm, then
/// one for the other arm among picks far enough from the first.
pub fn random_control<R: Rng>(
    state: &EnvState,
    subgoal: &EnvState,
    cfg: &TaskConfig,
    rng: &mut R,
) -> Option<ActionPair> {
    let candidates = correspondence_candidates(state, subgoal, cfg);
    let first = *candidates.choose(rng)?;
    let partners: Vec<&PickPlace> = candidates
        .iter()
        .filter(|c| c.arm != first.arm && c.pick.dist(first.pick) > cfg.min_pick_sep)
        .collect();
    Some(ActionPair {
        leader: first,
        follower: partners.choose(rng).map(|c| **c),
    })
}

/// Last-resort single-arm drag of full step length along one of eight
/// headings, used when the controller finds nothing to do.
pub fn fallback_action<R: Rng>(
    state: &EnvState,
    cfg: &TaskConfig,
    rng: &mut R,
) -> Option<ActionPair> {
    let obstacles = cfg.obstacles(&state.obstacles);
    let mut options = Vec::new();
    for (k, &pick) in state.keypoints.iter().enumerate() {
        for dir in 0..FALLBACK_DIRECTIONS {
            let angle = dir as f64 * std::f64::consts::TAU / FALLBACK_DIRECTIONS as f64;
            let place = pick + Point::new(angle.cos(), angle.sin()) * cfg.max_step;
            for arm in Arm::BOTH {
                if sequence_feasible(Segment::new(pick, place), &cfg.arm_spec(arm), &obstacles) {
                    options.push(PickPlace {
                        arm,
                        k,
                        pick,
                        place,
                    });
                }
            }
        }
    }
    options.choose(rng).map(|pp| ActionPair::single(*pp))
}

/// The controllers compared in the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    LeaderFollower,
    OnlyLeader,
    RandomControl,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::LeaderFollower,
        ControllerKind::OnlyLeader,
        ControllerKind::RandomControl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::LeaderFollower => "leader-follower",
            ControllerKind::OnlyLeader => "only-leader",
            ControllerKind::RandomControl => "random-control",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn decide<R: Rng>(
        self,
        state: &EnvState,
        subgoal: &EnvState,
        cfg: &TaskConfig,
        rng: &mut R,
    ) -> Option<ActionPair> {
        match self {
            ControllerKind::LeaderFollower => act(state, subgoal, cfg),
            ControllerKind::OnlyLeader => only_leader(state, subgoal, cfg),
            ControllerKind::RandomControl => random_control(state, subgoal, cfg, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Point {
        Point::new(x, y)
    }

    fn state(q: Vec<Point>, o: Vec<Point>) -> EnvState {
        EnvState {
            keypoints: q,
            obstacles: o,
        }
    }

    fn cfg3() -> TaskConfig {
        TaskConfig {
            keypoints: 3,
            obstacle_count: 0,
            ..TaskConfig::default()
        }
    }

    #[test]
    fn leader_hand_checked_instance() {
        let cfg = cfg3();
        let s = state(vec![p(0.4, 0.3), p(0.5, 0.3), p(0.6, 0.3)], vec![]);
        let g = state(vec![p(0.4, 0.3), p(0.5, 0.3), p(0.6, 0.45)], vec![]);
        let c = leader_select(&s, &g, &cfg).unwrap();
        assert_eq!(c.target, 2);
        assert_eq!(c.action.k, 2);
        assert_eq!(c.action.arm, Arm::Two);
        assert!(c.action.place.dist(p(0.6, 0.4)) < 1e-12);
    }

    #[test]
    fn converged_subgoal_yields_nothing() {
        let cfg = cfg3();
        let s = state(vec![p(0.4, 0.3), p(0.5, 0.3), p(0.6, 0.3)], vec![]);
        assert!(leader_select(&s, &s, &cfg).is_none());
        assert!(act(&s, &s, &cfg).is_none());
    }

    #[test]
    fn leader_step_is_clipped() {
        let cfg = cfg3();
        let s = state(vec![p(0.4, 0.3), p(0.5, 0.3), p(0.6, 0.3)], vec![]);
        let g = state(
            vec![p(0.4, 0.3), p(0.5, 0.3), p(0.6, 0.3) + p(0.3, 0.4)],
            vec![],
        );
        let c = leader_select(&s, &g, &cfg).unwrap();
        let d = c.action.displacement();
        assert!((d.norm() - 0.1).abs() < 1e-12);
        assert!(d.cross(p(0.3, 0.4)).abs() < 1e-12);
    }

    #[test]
    fn leader_falls_back_to_nearest_feasible_keypoint() {
        let cfg = cfg3();
        // the largest discrepancy sits inside arm two's inner radius
        let s = state(vec![p(0.4, 0.3), p(0.5, 0.3), p(0.75, 0.3)], vec![]);
        let g = state(vec![p(0.4, 0.35), p(0.5, 0.32), p(0.75, 0.45)], vec![]);
        let c = leader_select(&s, &g, &cfg).unwrap();
        assert_eq!(c.target, 2);
        assert_eq!(c.action.k, 1);
    }

    #[test]
    fn follower_takes_far_endpoint() {
        let cfg = TaskConfig {
            keypoints: 5,
            obstacle_count: 0,
            ..TaskConfig::default()
        };
        // straight chain along x; arm one leads from q0
        let q: Vec<Point> = (0..5).map(|i| p(0.4 + 0.05 * i as f64, 0.5)).collect();
        let mut goal = q.clone();
        goal[0] = p(0.4, 0.55);
        goal[4] = p(0.6, 0.45);
        let s = state(q.clone(), vec![]);
        let g = state(goal, vec![]);
        let leader = PickPlace {
            arm: Arm::One,
            k: 0,
            pick: q[0],
            place: p(0.4, 0.55),
        };
        let f = follower_select(&s, &g, &leader, &cfg).unwrap();
        assert_eq!(f.arm, Arm::Two);
        assert_eq!(f.k, 4);
        assert!(f.place.dist(p(0.6, 0.45)) < 1e-12);
        assert!(f.pick.dist(leader.pick) > cfg.min_pick_sep);
    }

    #[test]
    fn follower_respects_separation() {
        let cfg = cfg3();
        let q = vec![p(0.5, 0.5), p(0.55, 0.5), p(0.6, 0.5)];
        let mut goal = q.clone();
        goal[2] = p(0.6, 0.4);
        let s = state(q.clone(), vec![]);
        let g = state(goal, vec![]);
        let leader = leader_select(&s, &g, &cfg).unwrap().action;
        assert!(follower_select(&s, &g, &leader, &cfg).is_none());
        assert!(act(&s, &g, &cfg).unwrap().follower.is_none());
    }

    #[test]
    fn random_control_is_seeded_and_bounded() {
        let cfg = TaskConfig::default();
        let s = crate::sim::generate_env(&cfg, 4).unwrap();
        let g = crate::sim::generate_env(&cfg, 5).unwrap();
        let g = state(g.keypoints, s.obstacles.clone());
        let a = random_control(&s, &g, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        let b = random_control(&s, &g, &cfg, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        if let Some(a) = a {
            a.validate(&s, &cfg).unwrap();
        }
    }
}
