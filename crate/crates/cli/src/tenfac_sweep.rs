use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use implreg_core::rng::{stream, streams};
use implreg_core::tenfac::{cp_compose, estimate_rank, gen_ground_truth, train_cp, CpTrainConfig, RANK_THRESHOLD};
use implreg_core::{DenseTensor, Error as CoreError, TensorTask};

use crate::config::TenfacConfig;
use crate::csvio::fmt_f64;
use crate::error::{io_err, Result};
use crate::matfac_run::pool;

pub const COLUMNS: [&str; 10] =
    ["row", "method", "n_obs", "init_std", "seed", "recon_error", "est_rank", "iterations", "converged", "status"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// `cell`, or `median` / `q25` / `q75` over the seeds of one `(method, n_obs, init_std)` group.
    pub row: String,
    /// `cp` (tensor factorization) or `zeros` (observed values, zeros elsewhere).
    pub method: String,
    pub n_obs: usize,
    pub init_std: Option<f64>,
    pub seed: Option<u64>,
    /// Frobenius distance to the ground truth.
    pub recon_error: f64,
    pub est_rank: Option<f64>,
    pub iterations: Option<u64>,
    pub converged: Option<bool>,
    pub status: String,
}

impl SweepRow {
    fn fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        vec![
            self.row.clone(),
            self.method.clone(),
            self.n_obs.to_string(),
            opt(self.init_std),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            fmt_f64(self.recon_error),
            opt(self.est_rank),
            self.iterations.map(|s| s.to_string()).unwrap_or_default(),
            self.converged.map(|s| s.to_string()).unwrap_or_default(),
            self.status.clone(),
        ]
    }
}

pub fn write_rows<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COLUMNS)?;
    for r in rows {
        out.write_record(r.fields())?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if let Some(missing) = COLUMNS.iter().find(|c| !headers.iter().any(|h| h == **c)) {
        return Err(crate::error::HarnessError::MissingColumn {
            path: path.to_path_buf(),
            column: missing.to_string(),
        });
    }
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Observations for `n_obs`, shared by every init seed.
pub fn observations(cfg: &TenfacConfig, truth: &DenseTensor, n_obs: usize) -> Result<TensorTask> {
    let mut rng = stream(cfg.observation_seed, streams::OBSERVATIONS + n_obs as u64);
    Ok(TensorTask::sample(truth, n_obs, &mut rng)?)
}

fn cp_cell(cfg: &TenfacConfig, truth: &DenseTensor, task: &TensorTask, init_std: f64, seed: u64) -> Result<SweepRow> {
    let train = CpTrainConfig {
        mse_threshold: cfg.mse_threshold,
        max_iters: cfg.max_iters,
        ..CpTrainConfig::new(cfg.model_rank(), init_std, seed)
    };
    let mut row = SweepRow {
        row: "cell".into(),
        method: "cp".into(),
        n_obs: task.len(),
        init_std: Some(init_std),
        seed: Some(seed),
        recon_error: f64::NAN,
        est_rank: None,
        iterations: None,
        converged: None,
        status: "ok".into(),
    };
    match train_cp(task, &train) {
        Ok(out) => {
            let learned = cp_compose(&out.model);
            row.recon_error = learned.distance(truth);
            row.iterations = Some(out.iterations);
            row.converged = Some(out.converged);
            if cfg.estimate_rank {
                row.est_rank = Some(estimate_rank(&learned, RANK_THRESHOLD, cfg.rank_cap())? as f64);
            }
        }
        Err(CoreError::CpDiverged { iter, .. }) => {
            row.iterations = Some(iter);
            row.converged = Some(false);
            row.status = format!("diverged at iteration {iter}");
        }
        Err(e) => return Err(e.into()),
    }
    Ok(row)
}

fn zeros_cell(cfg: &TenfacConfig, truth: &DenseTensor, task: &TensorTask) -> Result<SweepRow> {
    let filled = task.zero_filled();
    let est_rank =
        if cfg.baseline_rank { Some(estimate_rank(&filled, RANK_THRESHOLD, cfg.rank_cap())? as f64) } else { None };
    Ok(SweepRow {
        row: "cell".into(),
        method: "zeros".into(),
        n_obs: task.len(),
        init_std: None,
        seed: None,
        recon_error: filled.distance(truth),
        est_rank,
        iterations: None,
        converged: None,
        status: "ok".into(),
    })
}

fn aggregate(cells: &[SweepRow]) -> Vec<SweepRow> {
    let mut keys: Vec<(String, usize, Option<f64>)> = Vec::new();
    for c in cells {
        let k = (c.method.clone(), c.n_obs, c.init_std);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut out = Vec::new();
    for (method, n_obs, init_std) in keys {
        let group: Vec<&SweepRow> = cells
            .iter()
            .filter(|c| c.method == method && c.n_obs == n_obs && c.init_std == init_std && c.status == "ok")
            .collect();
        let sorted = |f: &dyn Fn(&SweepRow) -> Option<f64>| {
            let mut v: Vec<f64> = group.iter().filter_map(|c| f(c)).filter(|x| x.is_finite()).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let errs = sorted(&|c| Some(c.recon_error));
        let ranks = sorted(&|c| c.est_rank);
        for (label, q) in [("median", 0.5), ("q25", 0.25), ("q75", 0.75)] {
            out.push(SweepRow {
                row: label.into(),
                method: method.clone(),
                n_obs,
                init_std,
                seed: None,
                recon_error: quantile(&errs, q),
                est_rank: (!ranks.is_empty()).then(|| quantile(&ranks, q)),
                iterations: None,
                converged: None,
                status: format!(
                    "{} of {} cells",
                    group.len(),
                    cells.iter().filter(|c| c.method == method && c.n_obs == n_obs && c.init_std == init_std).count()
                ),
            });
        }
    }
    out
}

/// Trains every `(n_obs, init_std, seed)` cell on `jobs` threads, adds the
/// zeros baseline per `n_obs`, appends median/quartile rows and writes the CSV.
pub fn run_tenfac_sweep(cfg: &TenfacConfig, jobs: usize) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let truth = gen_ground_truth(&cfg.dims, cfg.ground_truth_rank, cfg.ground_truth_seed)?;
    let tasks = cfg.n_obs.iter().map(|&n| observations(cfg, &truth, n)).collect::<Result<Vec<_>>>()?;
    let mut jobs_list = Vec::new();
    for (k, _) in cfg.n_obs.iter().enumerate() {
        for &std in &cfg.init_stds {
            for &seed in &cfg.seeds {
                jobs_list.push((k, std, seed));
            }
        }
    }
    let mut cells = pool(jobs)?.install(|| {
        jobs_list
            .par_iter()
            .map(|&(k, std, seed)| cp_cell(cfg, &truth, &tasks[k], std, seed))
            .collect::<Result<Vec<_>>>()
    })?;
    for task in &tasks {
        cells.push(zeros_cell(cfg, &truth, task)?);
    }
    cells.sort_by(|a, b| {
        (a.method.as_str(), a.n_obs, a.init_std.map(f64::to_bits), a.seed).cmp(&(
            b.method.as_str(),
            b.n_obs,
            b.init_std.map(f64::to_bits),
            b.seed,
        ))
    });
    let summary = aggregate(&cells);
    cells.extend(summary);
    if let Some(parent) = cfg.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = std::fs::File::create(&cfg.output).map_err(io_err(&cfg.output))?;
    write_rows(&cells, std::io::BufWriter::new(file))?;
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> TenfacConfig {
        TenfacConfig {
            dims: vec![4, 4, 4],
            ground_truth_rank: 1,
            ground_truth_seed: 1,
            observation_seed: 0,
            n_obs: vec![40, 63],
            init_stds: vec![1e-3],
            seeds: vec![0, 1, 2],
            rank: None,
            mse_threshold: 1e-6,
            max_iters: 20_000,
            r_max: None,
            estimate_rank: true,
            baseline_rank: false,
            output: "unused.csv".into(),
        }
    }

    #[test]
    fn quantiles() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn zeros_baseline_error_is_unobserved_mass() {
        let cfg = small();
        let truth = gen_ground_truth(&cfg.dims, 1, 1).unwrap();
        let task = observations(&cfg, &truth, 40).unwrap();
        let row = zeros_cell(&cfg, &truth, &task).unwrap();
        let mut mass = 0.0;
        for (p, &x) in truth.as_slice().iter().enumerate() {
            if !task.is_observed(&implreg_core::unravel_index(truth.dims(), p)) {
                mass += x * x;
            }
        }
        assert!((row.recon_error - mass.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn sweep_csv_roundtrips_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small();
        cfg.output = dir.path().join("a.csv");
        let rows = run_tenfac_sweep(&cfg, 2).unwrap();
        let back = read_rows(&cfg.output).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            assert_eq!(a.recon_error.to_bits(), b.recon_error.to_bits());
            assert_eq!(a.est_rank, b.est_rank);
        }
        let first = std::fs::read(&cfg.output).unwrap();
        cfg.output = dir.path().join("b.csv");
        run_tenfac_sweep(&cfg, 1).unwrap();
        assert_eq!(first, std::fs::read(&cfg.output).unwrap());
        // 2 n_obs x 3 seeds cp cells, 2 zeros cells, 3 quantile rows per group
        assert_eq!(rows.len(), 6 + 2 + 3 * 4);
    }
}
