use implreg::config::presets;
use implreg::tenfac_sweep::run_tenfac_sweep;
use implreg::ExperimentConfig;

#[test]
fn order3_rank1_preset_recovers_rank_at_450() {
    let dir = tempfile::tempdir().unwrap();
    let Some(ExperimentConfig::TenfacSweep(mut cfg)) = presets::get("tenfac-order3-rank1") else {
        panic!("preset kind")
    };
    assert!(cfg.n_obs.contains(&450) && cfg.n_obs.contains(&511));
    cfg.n_obs = vec![450];
    cfg.init_stds = vec![1e-4];
    cfg.output = dir.path().join("sweep.csv");
    let rows = run_tenfac_sweep(&cfg, 4).unwrap();
    let median = rows.iter().find(|r| r.row == "median" && r.method == "cp").unwrap();
    assert_eq!(median.est_rank, Some(1.0));
}

#[test]
fn all_but_one_observed_is_allowed() {
    let Some(ExperimentConfig::TenfacSweep(mut cfg)) = presets::get("tenfac-order3-rank1") else {
        panic!("preset kind")
    };
    cfg.n_obs = vec![511];
    assert!(cfg.validate().is_ok());
    cfg.n_obs = vec![512];
    assert!(cfg.validate().is_err());
}
