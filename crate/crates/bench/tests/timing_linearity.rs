mod common;

use ccbr_bench::{Harness, TimingConfig};

fn grid_seconds(ridge: Vec<f64>) -> f64 {
    let mut cfg = common::small_config();
    cfg.timing = Some(TimingConfig { ridge, degree: vec![1, 2, 3], folds: Some(vec![1]) });
    let h = Harness::new(cfg).unwrap();
    let mut runs: Vec<f64> = (0..3).map(|_| h.compare_training_time().unwrap().timing.unwrap().grid_total).collect();
    runs.sort_by(f64::total_cmp);
    runs[1]
}

#[test]
fn grid_search_time_scales_with_grid_size() {
    let twelve = grid_seconds(vec![0.1, 1.0, 10.0, 100.0]);
    let twenty_four = grid_seconds(vec![0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0]);
    let ratio = twenty_four / twelve;
    assert!((1.4..=2.6).contains(&ratio), "24-point grid took {ratio:.2}x the 12-point grid");
}
