//! Waypoint and swept-drag feasibility for one arm near an obstacle.

use slackline::geometry::{
    seg_point_min_dist, sequence_feasible, waypoint_valid, ArmSpec, Obstacle, Point, Segment,
};

fn main() {
    let arm = ArmSpec {
        base: Point::new(0.2, 0.3),
        reach_min: 0.15,
        reach_max: 0.45,
    };
    let obstacle = Obstacle {
        center: Point::new(0.5, 0.45),
        radius: 0.04,
        clearance: 0.1,
    };
    let drags = [
        (
            "clear drag",
            Segment::new(Point::new(0.40, 0.30), Point::new(0.45, 0.30)),
        ),
        (
            "passes the obstacle",
            Segment::new(Point::new(0.40, 0.40), Point::new(0.55, 0.35)),
        ),
        (
            "leaves the annulus",
            Segment::new(Point::new(0.55, 0.30), Point::new(0.68, 0.30)),
        ),
        (
            "crosses the inner radius",
            Segment::new(Point::new(0.30, 0.38), Point::new(0.30, 0.22)),
        ),
    ];
    for (name, seg) in drags {
        println!(
            "{name:>26}: endpoints valid {}/{}, min distance to obstacle {:.3}, swept feasible {}",
            waypoint_valid(seg.p1, &arm, &[obstacle]),
            waypoint_valid(seg.p2, &arm, &[obstacle]),
            seg_point_min_dist(seg, obstacle.center),
            sequence_feasible(seg, &arm, &[obstacle])
        );
    }
}
