//! Quasi-static rope world.
//!
//! The rope is a chain of `M` keypoints joined by rigid links of equal length
//! with a bend limit at every interior joint. A pick-and-place drags one
//! keypoint along a straight line in [`DRAG_SUBSTEPS`] increments; after each
//! increment the rest of the chain is re-projected onto its constraints
//! (inextensibility, joint limits, obstacle and wall contact). When no valid
//! configuration exists for an increment the rope snags: the increment is
//! undone and the drag stops there.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{Arm, TaskConfig};
use crate::error::{Error, Result};
use crate::geometry::{sequence_feasible, waypoint_valid, Point, Segment};

pub const DRAG_SUBSTEPS: usize = 64;
pub const PROJECTION_ITERS: usize = 10;
/// Allowed residual overlap of a keypoint or link midpoint with an obstacle.
pub const PENETRATION_SLACK: f64 = 1e-3;
pub const MAX_GENERATION_ATTEMPTS: usize = 10_000;
/// Largest heading change per link when sampling an initial rope, as a
/// fraction of the joint limit.
const INIT_TURN_FRACTION: f64 = 0.5;
/// Angular resolution of the contact-aware placement search.
const PLACEMENT_STEPS: usize = 64;
const UNIT_X: Point = Point::new(1.0, 0.0);

/// Observation of the world: rope keypoints in order, then obstacle centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    #[serde(rename = "q")]
    pub keypoints: Vec<Point>,
    #[serde(rename = "o")]
    pub obstacles: Vec<Point>,
}

impl EnvState {
    pub fn first(&self) -> Point {
        self.keypoints[0]
    }

    pub fn last(&self) -> Point {
        self.keypoints[self.keypoints.len() - 1]
    }

    /// Endpoint owned by `arm`.
    pub fn endpoint(&self, arm: Arm) -> Point {
        match arm {
            Arm::One => self.first(),
            Arm::Two => self.last(),
        }
    }

    /// Mean link length of the chain.
    pub fn link_len(&self) -> f64 {
        let n = self.keypoints.len();
        if n < 2 {
            return 0.0;
        }
        let total: f64 = self.keypoints.windows(2).map(|w| w[0].dist(w[1])).sum();
        total / (n - 1) as f64
    }

    pub fn dlo_length(&self) -> f64 {
        self.link_len() * (self.keypoints.len().saturating_sub(1)) as f64
    }

    pub fn check_dims(&self, cfg: &TaskConfig) -> Result<()> {
        if self.keypoints.len() != cfg.keypoints {
            return Err(Error::DimensionMismatch {
                expected: cfg.keypoints,
                got: self.keypoints.len(),
            });
        }
        if self.obstacles.len() != cfg.obstacle_count {
            return Err(Error::DimensionMismatch {
                expected: cfg.obstacle_count,
                got: self.obstacles.len(),
            });
        }
        Ok(())
    }

    /// Flat `[x0, y0, x1, y1, ...]` over keypoints then obstacles.
    pub fn flat(&self) -> Vec<f64> {
        self.keypoints
            .iter()
            .chain(&self.obstacles)
            .flat_map(|p| [p.x, p.y])
            .collect()
    }

    /// Copy with every coordinate rounded to nine significant digits.
    pub fn rounded(&self) -> EnvState {
        let r = |p: &Point| Point::new(round_sig9(p.x), round_sig9(p.y));
        EnvState {
            keypoints: self.keypoints.iter().map(r).collect(),
            obstacles: self.obstacles.iter().map(r).collect(),
        }
    }

    /// The exchange form `{"q": [[x,y],...], "o": [[x,y],...]}` at nine
    /// significant digits.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.rounded()).expect("state serializes")
    }
}

pub fn round_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("formatted float parses")
}

/// One arm's drag of keypoint `k` from `pick` to `place`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickPlace {
    pub arm: Arm,
    pub k: usize,
    pub pick: Point,
    pub place: Point,
}

impl PickPlace {
    pub fn segment(&self) -> Segment {
        Segment::new(self.pick, self.place)
    }

    pub fn displacement(&self) -> Point {
        self.place - self.pick
    }

    pub fn feasible(&self, state: &EnvState, cfg: &TaskConfig) -> bool {
        sequence_feasible(
            self.segment(),
            &cfg.arm_spec(self.arm),
            &cfg.obstacles(&state.obstacles),
        )
    }
}

/// The bimanual action: a leader drag and an optional follower drag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionPair {
    pub leader: PickPlace,
    pub follower: Option<PickPlace>,
}

impl ActionPair {
    pub fn single(leader: PickPlace) -> Self {
        Self {
            leader,
            follower: None,
        }
    }

    pub fn parts(&self) -> impl Iterator<Item = &PickPlace> {
        std::iter::once(&self.leader).chain(self.follower.as_ref())
    }

    /// Checks every precondition of [`execute`] against `state`.
    pub fn validate(&self, state: &EnvState, cfg: &TaskConfig) -> Result<()> {
        let fail = |m: String| Err(Error::InfeasibleAction(m));
        for pp in self.parts() {
            let Some(&q) = state.keypoints.get(pp.k) else {
                return fail(format!("keypoint index {} out of range", pp.k));
            };
            if pp.pick.dist(q) > 1e-9 {
                return fail(format!("pick does not coincide with keypoint {}", pp.k));
            }
            if pp.displacement().norm() > cfg.max_step + 1e-9 {
                return fail(format!(
                    "displacement exceeds max_step on keypoint {}",
                    pp.k
                ));
            }
            if !pp.feasible(state, cfg) {
                return fail(format!(
                    "drag of keypoint {} is outside arm {}'s valid space",
                    pp.k,
                    u8::from(pp.arm)
                ));
            }
        }
        if let Some(f) = &self.follower {
            if f.arm == self.leader.arm {
                return fail("leader and follower use the same arm".into());
            }
            if f.pick.dist(self.leader.pick) <= cfg.min_pick_sep {
                return fail("leader and follower picks are too close".into());
            }
        }
        Ok(())
    }
}

/// What happened during an execution, for diagnostics and tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecReport {
    pub joint_limit_active: bool,
    pub obstacle_contact: bool,
    pub wall_contact: bool,
    pub snagged: bool,
}

impl ExecReport {
    pub fn unobstructed(&self) -> bool {
        !(self.joint_limit_active || self.obstacle_contact || self.wall_contact || self.snagged)
    }

    fn merge(&mut self, other: ExecReport) {
        self.joint_limit_active |= other.joint_limit_active;
        self.obstacle_contact |= other.obstacle_contact;
        self.wall_contact |= other.wall_contact;
        self.snagged |= other.snagged;
    }
}

/// Samples an initial environment that is not already solved.
pub fn generate_env(cfg: &TaskConfig, seed: u64) -> Result<EnvState> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let length = if cfg.dlo_length_max > cfg.dlo_length_min {
        rng.gen_range(cfg.dlo_length_min..=cfg.dlo_length_max)
    } else {
        cfg.dlo_length_min
    };
    let link = length / (cfg.keypoints - 1) as f64;
    let mu = cfg.obstacle_radius;
    let mut attempts = 0usize;
    let reject = |attempts: &mut usize| {
        *attempts += 1;
        if *attempts >= MAX_GENERATION_ATTEMPTS {
            Err(Error::GenerationFailure {
                attempts: *attempts,
            })
        } else {
            Ok(())
        }
    };

    loop {
        let mut obstacles: Vec<Point> = Vec::with_capacity(cfg.obstacle_count);
        while obstacles.len() < cfg.obstacle_count {
            let c = Point::new(
                rng.gen_range(mu..=cfg.workspace_width - mu),
                rng.gen_range(mu..=cfg.workspace_height - mu),
            );
            if obstacles.iter().all(|o| o.dist(c) >= 3.0 * mu) {
                obstacles.push(c);
            } else {
                reject(&mut attempts)?;
            }
        }
        // Obstacle order carries no meaning; a canonical order keeps equal
        // layouts equal as vectors.
        obstacles.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));

        let turn = INIT_TURN_FRACTION * cfg.joint_limit;
        let chain = loop {
            let mut pts = Vec::with_capacity(cfg.keypoints);
            pts.push(Point::new(
                rng.gen_range(0.0..=cfg.workspace_width),
                rng.gen_range(0.0..=cfg.workspace_height),
            ));
            let mut heading: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            for _ in 1..cfg.keypoints {
                heading += rng.gen_range(-turn..=turn);
                let prev = pts[pts.len() - 1];
                pts.push(prev + Point::new(heading.cos(), heading.sin()) * link);
            }
            if pts.iter().all(|&p| cfg.in_workspace(p)) && clear_of(&pts, &obstacles, mu) {
                break pts;
            }
            reject(&mut attempts)?;
        };

        let state = EnvState {
            keypoints: chain,
            obstacles,
        };
        if !goal_reached(&state, cfg) {
            return Ok(state);
        }
        reject(&mut attempts)?;
    }
}

fn clear_of(pts: &[Point], obstacles: &[Point], mu: f64) -> bool {
    obstacles.iter().all(|&c| {
        pts.iter().all(|p| p.dist(c) >= mu)
            && pts.windows(2).all(|w| w[0].midpoint(w[1]).dist(c) >= mu)
    })
}

/// Both rope ends sit in the valid space of their own arm.
pub fn goal_reached(state: &EnvState, cfg: &TaskConfig) -> bool {
    let obstacles = cfg.obstacles(&state.obstacles);
    waypoint_valid(state.first(), &cfg.arm_spec(Arm::One), &obstacles)
        && waypoint_valid(state.last(), &cfg.arm_spec(Arm::Two), &obstacles)
}

/// Sparse reward of a transition, a function of the next state only.
pub fn reward(next: &EnvState, cfg: &TaskConfig) -> u8 {
    u8::from(goal_reached(next, cfg))
}

pub fn execute(state: &EnvState, action: &ActionPair, cfg: &TaskConfig) -> Result<EnvState> {
    execute_with_report(state, action, cfg).map(|(s, _)| s)
}

/// Executes leader then follower. The follower grasps its keypoint where it
/// lies after the leader's drag and applies its planned displacement.
pub fn execute_with_report(
    state: &EnvState,
    action: &ActionPair,
    cfg: &TaskConfig,
) -> Result<(EnvState, ExecReport)> {
    state.check_dims(cfg)?;
    action.validate(state, cfg)?;
    let link = state.link_len();
    let mut pts = state.keypoints.clone();
    let mut report = ExecReport::default();
    let world = World {
        cfg,
        obstacles: &state.obstacles,
        link,
    };
    for pp in action.parts() {
        report.merge(world.drag(&mut pts, pp.k, pp.displacement()));
    }
    Ok((
        EnvState {
            keypoints: pts,
            obstacles: state.obstacles.clone(),
        },
        report,
    ))
}

struct World<'a> {
    cfg: &'a TaskConfig,
    obstacles: &'a [Point],
    link: f64,
}

impl World<'_> {
    fn drag(&self, pts: &mut [Point], k: usize, displacement: Point) -> ExecReport {
        let mut report = ExecReport::default();
        let start = pts[k];
        let mut backup = pts.to_vec();
        for s in 1..=DRAG_SUBSTEPS {
            backup.copy_from_slice(pts);
            pts[k] = start + displacement * (s as f64 / DRAG_SUBSTEPS as f64);
            for _ in 0..PROJECTION_ITERS {
                self.follow_pass(pts, k, false, &mut report);
                // Once nothing is pushed, another pass would be a no-op.
                if !self.push_out(pts, k, &mut report) {
                    break;
                }
            }
            self.follow_pass(pts, k, true, &mut report);
            if !self.admissible(pts) {
                pts.copy_from_slice(&backup);
                report.snagged = true;
                break;
            }
        }
        report
    }

    /// Re-projects the chain outward from the pinned keypoint `k`: each point
    /// is placed one link away from its already-placed neighbour, with the
    /// bend at that neighbour clamped to the joint limit. When `contact` is
    /// set the placement also avoids obstacles and walls.
    fn follow_pass(&self, pts: &mut [Point], k: usize, contact: bool, report: &mut ExecReport) {
        let n = pts.len();
        for i in (0..k).rev() {
            let anchor = pts[i + 1];
            let reference = (i + 2 < n)
                .then(|| (anchor - pts[i + 2]).normalized())
                .flatten();
            pts[i] = self.place(anchor, pts[i], reference, contact, report);
        }
        for i in k + 1..n {
            let anchor = pts[i - 1];
            let reference = (i >= 2)
                .then(|| (anchor - pts[i - 2]).normalized())
                .flatten();
            pts[i] = self.place(anchor, pts[i], reference, contact, report);
        }
    }

    fn place(
        &self,
        anchor: Point,
        current: Point,
        reference: Option<Point>,
        contact: bool,
        report: &mut ExecReport,
    ) -> Point {
        let limit = self.cfg.joint_limit;
        let desired = (current - anchor)
            .normalized()
            .or(reference)
            .unwrap_or(UNIT_X);
        let dir = match reference {
            Some(r) => {
                let angle = r.cross(desired).atan2(r.dot(desired));
                if angle.abs() > limit {
                    report.joint_limit_active = true;
                    r.rotated(limit.copysign(angle))
                } else {
                    desired
                }
            }
            None => desired,
        };
        if !contact || self.placement_clear(anchor, dir) {
            return anchor + dir * self.link;
        }
        self.note_contact(anchor + dir * self.link, report);
        let (center, half_width) = match reference {
            Some(r) => (r, limit),
            None => (dir, std::f64::consts::PI),
        };
        let offset0 = center.cross(dir).atan2(center.dot(dir));
        let step = half_width / PLACEMENT_STEPS as f64;
        for j in 1..=2 * PLACEMENT_STEPS {
            for sign in [1.0, -1.0] {
                let offset = offset0 + sign * j as f64 * step;
                if offset.abs() > half_width {
                    continue;
                }
                let cand = center.rotated(offset);
                if self.placement_clear(anchor, cand) {
                    return anchor + cand * self.link;
                }
            }
        }
        anchor + dir * self.link
    }

    fn placement_clear(&self, anchor: Point, dir: Point) -> bool {
        let p = anchor + dir * self.link;
        let mid = anchor + dir * (0.5 * self.link);
        let mu = self.cfg.obstacle_radius;
        self.cfg.in_workspace(p)
            && self
                .obstacles
                .iter()
                .all(|&c| p.dist(c) >= mu && mid.dist(c) >= mu)
    }

    fn note_contact(&self, p: Point, report: &mut ExecReport) {
        if self.cfg.in_workspace(p) {
            report.obstacle_contact = true;
        } else {
            report.wall_contact = true;
        }
    }

    /// Pushes keypoints and link midpoints radially out of obstacles and
    /// keypoints back inside the workspace. The pinned keypoint never moves.
    fn push_out(&self, pts: &mut [Point], k: usize, report: &mut ExecReport) -> bool {
        let mu = self.cfg.obstacle_radius;
        let n = pts.len();
        let mut moved = false;
        for &c in self.obstacles {
            for (i, p) in pts.iter_mut().enumerate() {
                if i == k {
                    continue;
                }
                let d = p.dist(c);
                if d < mu {
                    report.obstacle_contact = true;
                    moved = true;
                    *p = c + (*p - c).normalized().unwrap_or(UNIT_X) * mu;
                }
            }
            for i in 0..n - 1 {
                let m = pts[i].midpoint(pts[i + 1]);
                let d = m.dist(c);
                if d < mu {
                    report.obstacle_contact = true;
                    moved = true;
                    let shift = (m - c).normalized().unwrap_or(UNIT_X) * (mu - d);
                    if i == k {
                        pts[i + 1] = pts[i + 1] + shift * 2.0;
                    } else if i + 1 == k {
                        pts[i] = pts[i] + shift * 2.0;
                    } else {
                        pts[i] = pts[i] + shift;
                        pts[i + 1] = pts[i + 1] + shift;
                    }
                }
            }
        }
        let (w, h) = (self.cfg.workspace_width, self.cfg.workspace_height);
        for (i, p) in pts.iter_mut().enumerate() {
            if i != k && !self.cfg.in_workspace(*p) {
                report.wall_contact = true;
                moved = true;
                *p = Point::new(p.x.clamp(0.0, w), p.y.clamp(0.0, h));
            }
        }
        moved
    }

    fn admissible(&self, pts: &[Point]) -> bool {
        let floor = self.cfg.obstacle_radius - PENETRATION_SLACK;
        pts.iter().all(|&p| self.cfg.in_workspace(p))
            && self.obstacles.iter().all(|&c| {
                pts.iter().all(|p| p.dist(c) >= floor)
                    && pts.windows(2).all(|w| w[0].midpoint(w[1]).dist(c) >= floor)
            })
    }
}

/// Largest deviation of any link from `link_len`.
pub fn max_link_error(pts: &[Point], link_len: f64) -> f64 {
    pts.windows(2)
        .map(|w| (w[0].dist(w[1]) - link_len).abs())
        .fold(0.0, f64::max)
}

/// Largest bend angle at any interior joint, radians.
pub fn max_bend(pts: &[Point]) -> f64 {
    pts.windows(3)
        .map(|w| {
            let a = w[1] - w[0];
            let b = w[2] - w[1];
            a.cross(b).atan2(a.dot(b)).abs()
        })
        .fold(0.0, f64::max)
}

/// Smallest distance from any keypoint or link midpoint to an obstacle center.
pub fn min_obstacle_dist(state: &EnvState) -> f64 {
    let pts = &state.keypoints;
    state
        .obstacles
        .iter()
        .flat_map(|&c| {
            pts.iter()
                .map(move |p| p.dist(c))
                .chain(pts.windows(2).map(move |w| w[0].midpoint(w[1]).dist(c)))
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(n: usize, start: Point, link: f64) -> Vec<Point> {
        (0..n)
            .map(|i| start + Point::new(link * i as f64, 0.0))
            .collect()
    }

    #[test]
    fn generation_is_deterministic_and_unsolved() {
        let cfg = TaskConfig::default();
        for seed in 0..20 {
            let a = generate_env(&cfg, seed).unwrap();
            let b = generate_env(&cfg, seed).unwrap();
            assert_eq!(a, b);
            assert!(!goal_reached(&a, &cfg));
            assert_eq!(reward(&a, &cfg), 0);
        }
    }

    #[test]
    fn generated_links_are_equal() {
        let cfg = TaskConfig::default();
        for seed in 0..100 {
            let s = generate_env(&cfg, seed).unwrap();
            let link = s.first().dist(s.keypoints[1]);
            assert!(max_link_error(&s.keypoints, link) < 1e-9);
            assert!(link * 15.0 >= 0.5 - 1e-9 && link * 15.0 <= 0.7 + 1e-9);
            assert!(max_bend(&s.keypoints) <= cfg.joint_limit + 1e-9);
            assert!(min_obstacle_dist(&s) >= cfg.obstacle_radius);
        }
    }

    #[test]
    fn impossible_config_fails_generation() {
        // obstacles cannot be spaced 3 radii apart in this workspace
        let cfg = TaskConfig {
            obstacle_radius: 0.1,
            clearance: 0.1,
            obstacle_count: 20,
            ..TaskConfig::default()
        };
        assert!(matches!(
            generate_env(&cfg, 1),
            Err(Error::GenerationFailure { .. })
        ));
    }

    #[test]
    fn goal_predicate_cases() {
        let cfg = TaskConfig::default();
        let link = 0.04;
        // q0 at (0.2, 0.6 - ...) : build a straight chain from x=0.2 at y=0.0
        let mut pts = straight(16, Point::new(0.2, 0.0), link);
        // q0 at distance 0.3 from arm one; q15 at (0.8, 0.0), 0.3 from arm two
        assert!((pts[0].dist(cfg.arm_bases[0]) - 0.3).abs() < 1e-12);
        assert!((pts[15].dist(cfg.arm_bases[1]) - 0.3).abs() < 1e-12);
        let far = vec![Point::new(0.5, 0.55), Point::new(0.9, 0.55)];
        let s = EnvState {
            keypoints: pts.clone(),
            obstacles: far.clone(),
        };
        assert!(goal_reached(&s, &cfg));
        assert_eq!(reward(&s, &cfg), 1);

        // q0 too close to arm one
        pts = straight(16, Point::new(0.2, 0.2), link);
        let s = EnvState {
            keypoints: pts,
            obstacles: far,
        };
        assert!(!goal_reached(&s, &cfg));

        // q15 within clearance of an obstacle
        let pts = straight(16, Point::new(0.2, 0.0), link);
        let s = EnvState {
            keypoints: pts,
            obstacles: vec![Point::new(0.5, 0.55), Point::new(0.85, 0.05)],
        };
        assert!(!goal_reached(&s, &cfg));
    }

    fn free_state(pts: Vec<Point>) -> EnvState {
        EnvState {
            keypoints: pts,
            obstacles: vec![Point::new(0.05, 0.55), Point::new(0.95, 0.55)],
        }
    }

    #[test]
    fn identity_drag_leaves_state() {
        let cfg = TaskConfig::default();
        let s = free_state(straight(16, Point::new(0.3, 0.25), 0.035));
        let k = 3;
        let a = ActionPair::single(PickPlace {
            arm: Arm::One,
            k,
            pick: s.keypoints[k],
            place: s.keypoints[k],
        });
        let next = execute(&s, &a, &cfg).unwrap();
        for (p, q) in next.keypoints.iter().zip(&s.keypoints) {
            assert!(p.dist(*q) < 1e-12);
        }
    }

    #[test]
    fn endpoint_pull_along_axis_translates_chain() {
        let cfg = TaskConfig::default();
        // chain from x=0.25 to x=0.25+15*0.035=0.775 at y=0.5; arm two pulls
        // the right end outward along +x
        let s = free_state(straight(16, Point::new(0.25, 0.5), 0.035));
        let k = 15;
        let pick = s.keypoints[k];
        let place = pick + Point::new(0.05, 0.0);
        let a = ActionPair::single(PickPlace {
            arm: Arm::Two,
            k,
            pick,
            place,
        });
        let (next, report) = execute_with_report(&s, &a, &cfg).unwrap();
        assert!(report.unobstructed(), "{report:?}");
        assert!(next.keypoints[k].dist(place) < 1e-6);
        for (i, p) in next.keypoints.iter().enumerate() {
            let expect = s.keypoints[i] + Point::new(0.05, 0.0);
            assert!(p.dist(expect) < 1e-9, "{i}: {p:?} vs {expect:?}");
        }
        assert!(max_bend(&next.keypoints) < 1e-9);
    }

    #[test]
    fn rejects_infeasible_actions() {
        let cfg = TaskConfig::default();
        let s = free_state(straight(16, Point::new(0.25, 0.25), 0.035));
        let pick = s.keypoints[0];
        // arm one base is 0.058 away: inside the inner radius
        let a = ActionPair::single(PickPlace {
            arm: Arm::One,
            k: 0,
            pick,
            place: pick + Point::new(0.0, 0.05),
        });
        assert!(matches!(
            execute(&s, &a, &cfg),
            Err(Error::InfeasibleAction(_))
        ));
        // too long
        let k = 8;
        let a = ActionPair::single(PickPlace {
            arm: Arm::One,
            k,
            pick: s.keypoints[k],
            place: s.keypoints[k] + Point::new(0.0, 0.2),
        });
        assert!(execute(&s, &a, &cfg).is_err());
        // pick not on keypoint
        let a = ActionPair::single(PickPlace {
            arm: Arm::One,
            k,
            pick: s.keypoints[k] + Point::new(0.01, 0.0),
            place: s.keypoints[k],
        });
        assert!(execute(&s, &a, &cfg).is_err());
    }

    #[test]
    fn obstacle_blocks_and_preserves_invariants() {
        let cfg = TaskConfig::default();
        // rope along y=0.1; obstacle just above the middle, pull an end upward
        let pts = straight(16, Point::new(0.25, 0.1), 0.035);
        let s = EnvState {
            keypoints: pts,
            obstacles: vec![Point::new(0.5, 0.145), Point::new(0.95, 0.55)],
        };
        assert!(min_obstacle_dist(&s) >= 0.04);
        let k = 0;
        let pick = s.keypoints[k];
        let a = ActionPair::single(PickPlace {
            arm: Arm::One,
            k,
            pick,
            place: pick + Point::new(0.08, 0.06),
        });
        let (next, _) = execute_with_report(&s, &a, &cfg).unwrap();
        assert!(max_link_error(&next.keypoints, 0.035) < 1e-9);
        assert!(max_bend(&next.keypoints) <= cfg.joint_limit + 1e-9);
        assert!(min_obstacle_dist(&next) >= cfg.obstacle_radius - PENETRATION_SLACK);
    }

    #[test]
    fn json_form_uses_nine_digits() {
        let s = EnvState {
            keypoints: vec![Point::new(0.123456789123, 1.0 / 3.0)],
            obstacles: vec![Point::new(0.5, 0.25)],
        };
        assert_eq!(
            s.to_json(),
            r#"{"q":[[0.123456789,0.333333333]],"o":[[0.5,0.25]]}"#
        );
    }
}
