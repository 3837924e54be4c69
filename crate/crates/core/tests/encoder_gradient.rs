mod common;

use common::contrastive_gradient_check;
use slackline::encoder::{info_nce_loss, Embedding};

#[test]
fn contrastive_gradient_matches_central_differences() {
    for seed in 0..3 {
        let (err, probed) = contrastive_gradient_check(seed);
        assert!(probed >= 500, "{probed}");
        assert!(err <= 1e-4, "seed {seed}: relative error {err:e}");
    }
}

#[test]
fn degenerate_info_nce_is_log_of_group_size() {
    let e = Embedding::normalize(&[0.3, -0.2, 0.9]);
    for n in 1..8 {
        let negs = vec![e.clone(); n];
        let l = info_nce_loss(&e, &e, &negs);
        assert!((l - ((n + 1) as f64).ln()).abs() <= 1e-9, "{n}: {l}");
    }
}
