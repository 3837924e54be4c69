mod common;

use common::{random_instance, sampled_dists, sampled_feasible};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slackline::geometry::{
    seg_point_max_dist, seg_point_min_dist, sequence_feasible, Point, Segment,
};

const DIST_TOL: f64 = 1e-4;

#[test]
fn distances_match_sampling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let inst = random_instance(&mut rng);
        for p in std::iter::once(inst.arm.base).chain(inst.obstacles.iter().map(|o| o.center)) {
            let (lo, hi) = sampled_dists(inst.seg, p);
            assert!(
                (seg_point_min_dist(inst.seg, p) - lo).abs() <= DIST_TOL,
                "{inst:?}"
            );
            assert!(
                (seg_point_max_dist(inst.seg, p) - hi).abs() <= DIST_TOL,
                "{inst:?}"
            );
        }
    }
}

#[test]
fn feasibility_matches_sampling_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut feasible, mut checked) = (0, 0);
    for _ in 0..300 {
        let inst = random_instance(&mut rng);
        let (oracle, margin) = sampled_feasible(&inst);
        if margin <= DIST_TOL {
            continue;
        }
        checked += 1;
        feasible += usize::from(oracle);
        assert_eq!(
            sequence_feasible(inst.seg, &inst.arm, &inst.obstacles),
            oracle,
            "{inst:?}"
        );
    }
    // Both outcomes must be exercised for the comparison to mean anything.
    assert!(
        feasible > 20 && checked - feasible > 20,
        "{feasible}/{checked}"
    );
}

#[test]
fn interior_projection_uses_perpendicular_distance() {
    // The foot lies inside the segment, so the endpoint distances overestimate.
    let seg = Segment::new(Point::new(0.0, 0.0), Point::new(1.0, 0.0));
    let p = Point::new(0.25, 0.1);
    assert!((seg_point_min_dist(seg, p) - 0.1).abs() < 1e-15);
    assert!((sampled_dists(seg, p).0 - 0.1).abs() < DIST_TOL);
}
