//! End-to-end gradient descent runs on the 2x2 completion tasks.

use implreg_core::matfac::{
    gd_train, make_analyzed_task, make_perturbed_task, resample_until_det_sign, CompletionTask, InitKind, NetDims,
    TrainOutcome,
};
use implreg_core::rng::{stream, streams};
use implreg_core::TrainConfig;

fn run(task: &CompletionTask, init: InitKind, depth: usize, lr: f64, scale: f64, seed: u64) -> TrainOutcome {
    let mut rng = stream(seed, streams::FACTORS);
    let sign = task.required_det_sign().unwrap();
    let (net, _) =
        resample_until_det_sign(|r| init.sample(NetDims::for_task(task), depth, scale, r), sign, &mut rng, 1000)
            .unwrap();
    let cfg = TrainConfig { seed, ..TrainConfig::new(lr) };
    gd_train(net, task, &cfg).unwrap()
}

#[test]
fn balanced_depth3_entry_grows_each_decade() {
    let out = run(&make_analyzed_task(), InitKind::Balanced, 3, 9e-3, 1e-4, 0);
    let mut at: Vec<f64> = [1e-1, 1e-2, 1e-3].iter().map(|&l| out.first_below(l).unwrap().w11().abs()).collect();
    // the loss only creeps toward 1e-4 here, but the entry keeps growing
    at.push(out.final_sample().w11().abs());
    assert!(at.windows(2).all(|w| w[1] > w[0]), "{at:?}");
}

#[test]
fn perturbed_entry_plateaus_near_ratio() {
    let task = make_perturbed_task(1.0, 1.0, 0.2, (0, 0)).unwrap();
    let out = run(&task, InitKind::Balanced, 3, 9e-3, 1e-4, 0);
    assert!(out.converged);
    let w = out.final_sample().w11().abs();
    assert!((2.5..=10.0).contains(&w), "|w11| = {w}");
}

#[test]
fn loss_is_monotone_at_small_step() {
    let out = run(&make_analyzed_task(), InitKind::Unbalanced, 3, 9e-3, 1e-3, 4);
    let losses: Vec<f64> = out.trajectory.iter().map(|s| s.loss).collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}

#[test]
fn same_seed_same_trajectory() {
    let a = run(&make_analyzed_task(), InitKind::Unbalanced, 3, 3e-2, 1e-3, 9);
    let b = run(&make_analyzed_task(), InitKind::Unbalanced, 3, 3e-2, 1e-3, 9);
    assert_eq!(a.trajectory, b.trajectory);
}
