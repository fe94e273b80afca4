use std::path::{Path, PathBuf};

use rayon::prelude::*;

use implreg_core::matfac::{gd_train_with, resample_until_det_sign, InitKind, NetDims, TrainConfig};
use implreg_core::metrics::{thm1_bounds, thm2_bounds, BoundSet, QuasiNormSpec};
use implreg_core::rng::{stream, streams};
use implreg_core::{CompletionTask, DeepNet, Error as CoreError, SchattenP, TrajectorySample};

use crate::config::{MatfacConfig, MatfacRunSpec, TaskSpec};
use crate::csvio::Table;
use crate::error::{io_err, Result};
use crate::record::{run_id, RunRecord, RunSummary};

pub type MatfacRecord = RunRecord<MatfacRunSpec>;

const RESAMPLE_CAP: usize = 1000;

/// Norm columns with the Schatten exponent each one measures.
const NORMS: [(&str, &str, SchattenP); 4] = [
    ("nuclear_norm", "nuclear", SchattenP::NUCLEAR),
    ("frob_norm", "frobenius", SchattenP::FROBENIUS),
    ("spectral_norm", "spectral", SchattenP::SPECTRAL),
    ("schatten_half", "schatten_half", SchattenP::Finite(0.5)),
];

fn entry_name(i: usize, j: usize, wide: bool) -> String {
    if wide {
        format!("w{}_{}", i + 1, j + 1)
    } else {
        format!("w{}{}", i + 1, j + 1)
    }
}

/// Closed-form bounds for the structured 2x2 tasks, keyed by the nuclear norm
/// plus the other battery norms under suffixed names.
type BoundFn = Box<dyn Fn(&QuasiNormSpec) -> implreg_core::Result<BoundSet>>;

fn bounds_at(task: &TaskSpec, loss: f64) -> Result<Option<Vec<(String, f64)>>> {
    let (prefix, eval): (&str, BoundFn) = match *task {
        TaskSpec::Analyzed => ("thm1", Box::new(move |s| thm1_bounds(loss, s))),
        TaskSpec::Perturbed { z, z_prime, eps, .. } => {
            ("thm2", Box::new(move |s| thm2_bounds(loss, z, z_prime, eps, s)))
        }
        TaskSpec::Rectangular { .. } => return Ok(None),
    };
    let nuclear = eval(&QuasiNormSpec::schatten(SchattenP::NUCLEAR)?)?;
    let mut out = vec![
        (format!("{prefix}_norm_lb"), nuclear.norm.value),
        (format!("{prefix}_erank_ub"), nuclear.erank.value),
        (format!("{prefix}_dist_ub"), nuclear.dist.value),
    ];
    for (col, _, p) in &NORMS[1..] {
        let b = eval(&QuasiNormSpec::schatten(*p)?)?;
        out.push((format!("{prefix}_norm_lb_{}", col.trim_end_matches("_norm")), b.norm.value));
    }
    Ok(Some(out))
}

/// One row per logged sample.
pub fn trajectory_table(spec_task: &TaskSpec, task: &CompletionTask, samples: &[TrajectorySample]) -> Result<Table> {
    let (rows, cols) = task.shape();
    let wide = rows > 9 || cols > 9;
    let mut columns = vec!["iter".to_string(), "loss".to_string()];
    columns.extend(task.unobserved().into_iter().map(|(i, j)| entry_name(i, j, wide)));
    columns.push("det".into());
    columns.extend((1..=rows.min(cols)).map(|k| format!("sigma{k}")));
    columns.push("erank".into());
    columns.extend(NORMS.iter().map(|n| n.0.to_string()));
    columns.push("unbalancedness".into());
    if let Some(b) = bounds_at(spec_task, 1.0)? {
        columns.extend(b.into_iter().map(|(name, _)| name));
    }
    let mut table = Table::new(columns);
    for s in samples {
        let mut row = vec![s.iter as f64, s.loss];
        row.extend(s.unobserved_entries.iter().map(|e| e.1));
        row.push(s.det);
        row.extend(&s.sigmas);
        row.push(s.metric("erank").unwrap_or(f64::NAN));
        row.extend(NORMS.iter().map(|n| s.metric(n.1).unwrap_or(f64::NAN)));
        row.push(s.unbalancedness);
        if let Some(b) = bounds_at(spec_task, s.loss)? {
            row.extend(b.into_iter().map(|(_, v)| v));
        }
        table.push(row);
    }
    Ok(table)
}

/// Initial net for `spec`, redrawn until the determinant sign matches the task
/// when the condition is on and the init is random.
pub fn initial_net(spec: &MatfacRunSpec, task: &CompletionTask) -> Result<(DeepNet, usize)> {
    let dims = NetDims::for_task(task);
    let mut rng = stream(spec.seed, streams::FACTORS);
    let draw = |r: &mut implreg_core::rng::Rng| spec.init.sample(dims, spec.depth, spec.init_scale, r);
    match task.required_det_sign() {
        Some(sign) if spec.det_sign_condition && spec.init != InitKind::Identity => {
            Ok(resample_until_det_sign(draw, sign, &mut rng, RESAMPLE_CAP)?)
        }
        _ => Ok((draw(&mut rng)?, 1)),
    }
}

/// Trains one run and writes `<out_dir>/<run_id>.csv`. Divergence is recorded
/// in the summary and the trajectory up to that point is still written.
pub fn run_one(spec: &MatfacRunSpec, out_dir: &Path) -> Result<MatfacRecord> {
    let task = spec.task.build()?;
    let (net, init_draws) = initial_net(spec, &task)?;
    let cfg = TrainConfig {
        learning_rate: spec.learning_rate,
        max_iters: spec.max_iters,
        loss_threshold: spec.loss_threshold,
        log_stride: spec.log_stride,
        log_decades: true,
        seed: spec.seed,
    };
    let mut samples = Vec::new();
    let outcome = gd_train_with(net, &task, &cfg, |s| samples.push(s.clone()));
    let (iterations, converged, diverged) = match outcome {
        Ok(out) => (out.iterations, out.converged, None),
        Err(CoreError::Diverged { iter, last }) => {
            if samples.last().map(|s| s.iter) != Some(last.iter) {
                samples.push(*last);
            }
            (iter, false, Some(format!("diverged at iteration {iter}")))
        }
        Err(e) => return Err(e.into()),
    };
    let id = run_id(spec);
    let path = out_dir.join(format!("{id}.csv"));
    trajectory_table(&spec.task, &task, &samples)?.write(&path)?;
    let last = samples.last().expect("iteration 0 is always logged");
    Ok(RunRecord {
        run_id: id,
        config: spec.clone(),
        trajectory_csv: path,
        summary: RunSummary {
            iterations,
            converged,
            final_loss: last.loss,
            final_entry: last.w11().abs(),
            samples: samples.len(),
            init_draws,
            diverged,
        },
    })
}

pub(crate) fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

/// Runs every grid point on `jobs` threads and writes `summary.json`, sorted by run id.
pub fn run_matfac(cfg: &MatfacConfig, jobs: usize) -> Result<Vec<MatfacRecord>> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output).map_err(io_err(&cfg.output))?;
    let specs = cfg.runs();
    let mut records =
        pool(jobs)?.install(|| specs.par_iter().map(|s| run_one(s, &cfg.output)).collect::<Result<Vec<_>>>())?;
    records.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    records.dedup_by(|a, b| a.run_id == b.run_id);
    let summary = summary_path(&cfg.output);
    std::fs::write(&summary, serde_json::to_string_pretty(&records)?).map_err(io_err(&summary))?;
    Ok(records)
}

pub fn summary_path(dir: &Path) -> PathBuf {
    dir.join("summary.json")
}
