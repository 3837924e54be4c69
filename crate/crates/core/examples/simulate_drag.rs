//! Generates an environment, drags one rope end and reports the chain
//! invariants after the quasi-static update.

use slackline::sim::{
    execute_with_report, generate_env, max_bend, max_link_error, min_obstacle_dist,
};
use slackline::{ActionPair, Arm, PickPlace, Point, TaskConfig};

fn main() -> slackline::Result<()> {
    let cfg = TaskConfig::default();
    let state = generate_env(&cfg, 7)?;
    println!(
        "rope length {:.3} m, {} keypoints, link {:.4} m",
        state.dlo_length(),
        cfg.keypoints,
        state.link_len()
    );

    let arm = Arm::One;
    let k = 0;
    let pick = state.keypoints[k];
    let toward_base = (cfg.arm_bases[arm.index()] - pick)
        .normalized()
        .unwrap_or(Point::new(1.0, 0.0));
    let action = ActionPair::single(PickPlace {
        arm,
        k,
        pick,
        place: pick + toward_base * cfg.max_step,
    });
    match execute_with_report(&state, &action, &cfg) {
        Ok((next, report)) => {
            println!(
                "end moved {:.4} m -> {:.4} m from base",
                pick.dist(cfg.arm_bases[0]),
                next.first().dist(cfg.arm_bases[0])
            );
            println!("report {report:?}");
            println!(
                "link error {:.1e}, max bend {:.3} rad (limit {}), nearest obstacle {:.3} m",
                max_link_error(&next.keypoints, state.link_len()),
                max_bend(&next.keypoints),
                cfg.joint_limit,
                min_obstacle_dist(&next)
            );
        }
        Err(e) => println!("this drag is not feasible here: {e}"),
    }
    Ok(())
}
