use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{unravel_index, DenseTensor};
use crate::rng::{stream, streams};

use super::model::{cp_compose, CpModel};

/// Full-tensor MSE below which an ALS fit counts as exact.
pub const RANK_THRESHOLD: f64 = 1e-6;
pub const ALS_MAX_SWEEPS: usize = 500;
pub const ALS_INIT_STD: f64 = 0.1;
/// Random starts tried per rank before a rank is rejected.
pub const ALS_RESTARTS: u64 = 4;
const ALS_SEED: u64 = 0x00a1_5eed;
/// Relative per-sweep improvement below which a start is abandoned.
const STALL: f64 = 1e-9;
const RIDGE: f64 = 1e-12;
/// Largest parameter count for which a stalled ALS fit is refined by damped Gauss-Newton.
pub const LM_MAX_PARAMS: usize = 256;
const LM_MAX_ITERS: usize = 200;
/// Only ALS fits within this factor of the threshold are worth refining.
const LM_GATE: f64 = 1e2;
const GT_ATTEMPTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlsFit {
    pub model: CpModel,
    /// Mean squared error over all entries.
    pub mse: f64,
    pub sweeps: usize,
    /// MSE after every sweep.
    pub history: Vec<f64>,
}

fn mse(target: &DenseTensor, model: &CpModel) -> f64 {
    cp_compose(model).distance(target).powi(2) / target.len() as f64
}

/// In-place Cholesky factorization of a symmetric `n x n` matrix. Fails on a
/// pivot below `tol` times the largest diagonal entry.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    let scale = (0..n).fold(0.0f64, |m, i| m.max(a[i * n + i]));
    let tol = 1e-14 * scale.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > tol) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` in place.
fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Factorizes `gram + λI`, raising `λ` from zero through `1e-12` upward until it succeeds.
fn factor_with_ridge(gram: &[f64], n: usize) -> Vec<f64> {
    let mut lambda = 0.0;
    loop {
        let mut a = gram.to_vec();
        for i in 0..n {
            a[i * n + i] += lambda;
        }
        if cholesky(&mut a, n) {
            return a;
        }
        lambda = if lambda == 0.0 { RIDGE } else { lambda * 100.0 };
    }
}

/// Next multi-index in row-major order.
fn advance(idx: &mut [usize], dims: &[usize]) {
    for (i, &d) in idx.iter_mut().zip(dims).rev() {
        *i += 1;
        if *i < d {
            return;
        }
        *i = 0;
    }
}

/// Exact least-squares update of mode `n` with the other factors fixed.
fn update_mode(target: &DenseTensor, model: &mut CpModel, n: usize) {
    let rank = model.rank();
    let dims = model.dims().to_vec();
    let factors = model.factors();

    // Hadamard product of the other modes' Gram matrices
    let mut gram = vec![1.0; rank * rank];
    for (m, f) in factors.iter().enumerate() {
        if m == n {
            continue;
        }
        for a in 0..rank {
            for b in 0..rank {
                let g: f64 = (0..dims[m]).map(|i| f[i * rank + a] * f[i * rank + b]).sum();
                gram[a * rank + b] *= g;
            }
        }
    }

    // rhs = X_(n) times the Khatri-Rao product of the other modes
    let mut rhs = vec![0.0; dims[n] * rank];
    let mut kr = vec![0.0; rank];
    let mut idx = vec![0; dims.len()];
    for (p, &x) in target.as_slice().iter().enumerate() {
        if p > 0 {
            advance(&mut idx, &dims);
        }
        if x == 0.0 {
            continue;
        }
        kr.fill(1.0);
        for (m, f) in factors.iter().enumerate() {
            if m == n {
                continue;
            }
            let row = &f[idx[m] * rank..(idx[m] + 1) * rank];
            kr.iter_mut().zip(row).for_each(|(k, w)| *k *= w);
        }
        let out = &mut rhs[idx[n] * rank..(idx[n] + 1) * rank];
        out.iter_mut().zip(&kr).for_each(|(o, k)| *o += x * k);
    }

    let l = factor_with_ridge(&gram, rank);
    for row in rhs.chunks_mut(rank) {
        cholesky_solve(&l, rank, row);
    }
    model.factors_mut()[n] = rhs;
}

/// `new + step (new - old)`, factor by factor.
fn extrapolate(old: &CpModel, new: &CpModel, step: f64) -> CpModel {
    let mut out = new.clone();
    for (f, o) in out.factors_mut().iter_mut().zip(old.factors()) {
        f.iter_mut().zip(o).for_each(|(x, y)| *x += step * (*x - y));
    }
    out
}

/// Levenberg-Marquardt on the full-tensor squared error, started from `model`.
/// Returns the best model seen and its MSE.
fn lm_refine(target: &DenseTensor, model: CpModel, threshold: f64) -> (CpModel, f64) {
    let rank = model.rank();
    let dims = model.dims().to_vec();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, &d| {
            let o = *acc;
            *acc += d * rank;
            Some(o)
        })
        .collect();
    let params = dims.iter().sum::<usize>() * rank;
    let mut model = model;
    let mut err = mse(target, &model);
    let mut mu = 1e-3;
    let mut jtj = vec![0.0; params * params];
    let mut jtr = vec![0.0; params];
    let mut row = vec![0.0; params];
    for _ in 0..LM_MAX_ITERS {
        if err < threshold {
            break;
        }
        jtj.fill(0.0);
        jtr.fill(0.0);
        let fitted = cp_compose(&model);
        for p in 0..target.len() {
            let idx = unravel_index(&dims, p);
            row.fill(0.0);
            let mut cols = Vec::with_capacity(dims.len() * rank);
            for n in 0..dims.len() {
                for r in 0..rank {
                    let d: f64 =
                        (0..dims.len()).filter(|&m| m != n).map(|m| model.factors()[m][idx[m] * rank + r]).product();
                    let c = offsets[n] + idx[n] * rank + r;
                    row[c] = d;
                    cols.push(c);
                }
            }
            let res = fitted.as_slice()[p] - target.as_slice()[p];
            for &a in &cols {
                jtr[a] += row[a] * res;
                for &b in &cols {
                    jtj[a * params + b] += row[a] * row[b];
                }
            }
        }
        let scale = (0..params).fold(0.0f64, |m, i| m.max(jtj[i * params + i]));
        let mut improved = false;
        while mu < 1e12 {
            let mut a = jtj.clone();
            for i in 0..params {
                a[i * params + i] += mu * scale.max(1e-300);
            }
            let l = factor_with_ridge(&a, params);
            let mut step = jtr.clone();
            cholesky_solve(&l, params, &mut step);
            let mut trial = model.clone();
            for (n, f) in trial.factors_mut().iter_mut().enumerate() {
                f.iter_mut().enumerate().for_each(|(i, x)| *x -= step[offsets[n] + i]);
            }
            let e = mse(target, &trial);
            if e < err {
                let stalled = err - e < 1e-6 * err;
                model = trial;
                err = e;
                if stalled {
                    return (model, err);
                }
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            break;
        }
    }
    (model, err)
}

/// Alternating least squares from the default Gaussian start.
pub fn als_fit(target: &DenseTensor, rank: usize, threshold: f64, max_sweeps: usize) -> Result<AlsFit> {
    als_fit_with(target, rank, threshold, max_sweeps, ALS_SEED)
}

/// Alternating least squares on a fully known tensor, stopping once the MSE
/// drops below `threshold` or after `max_sweeps` sweeps over the modes.
pub fn als_fit_with(target: &DenseTensor, rank: usize, threshold: f64, max_sweeps: usize, seed: u64) -> Result<AlsFit> {
    if rank == 0 {
        return domain("ALS rank must be at least 1");
    }
    let mut rng = stream(seed, streams::ALS);
    let mut model = CpModel::random(target.dims(), rank, ALS_INIT_STD, &mut rng)?;
    let mut err = mse(target, &model);
    let mut history = Vec::new();
    let mut sweeps = 0;
    while sweeps < max_sweeps && err >= threshold {
        let prev = model.clone();
        for n in 0..model.order() {
            update_mode(target, &mut model, n);
        }
        sweeps += 1;
        let mut e = mse(target, &model);
        // extrapolate along the sweep direction, kept only if it helps
        let jump = extrapolate(&prev, &model, (sweeps as f64).cbrt());
        let je = mse(target, &jump);
        if je < e {
            model = jump;
            e = je;
        }
        if e > err {
            model = prev;
            e = err;
        }
        let stalled = err - e <= STALL * err;
        err = e;
        history.push(err);
        if stalled {
            break;
        }
    }
    Ok(AlsFit { model, mse: err, sweeps, history })
}

/// Smallest `R <= r_max` for which one of [`ALS_RESTARTS`] ALS fits reaches
/// `threshold`; `r_max + 1` if none does, and 0 for the zero tensor. Small
/// fits that stall in ALS close to the threshold get a damped Gauss-Newton
/// polish before being rejected.
pub fn estimate_rank(target: &DenseTensor, threshold: f64, r_max: usize) -> Result<usize> {
    if r_max == 0 {
        return domain("r_max must be at least 1");
    }
    if target.as_slice().iter().all(|&x| x == 0.0) {
        return Ok(0);
    }
    for r in 1..=r_max {
        let params = target.dims().iter().sum::<usize>() * r;
        for k in 0..ALS_RESTARTS {
            let fit = als_fit_with(target, r, threshold, ALS_MAX_SWEEPS, ALS_SEED + k)?;
            let refinable = params <= LM_MAX_PARAMS && fit.mse < LM_GATE * threshold;
            if fit.mse < threshold || (refinable && lm_refine(target, fit.model, threshold).1 < threshold) {
                return Ok(r);
            }
        }
    }
    Ok(r_max + 1)
}

/// Unit-Frobenius tensor of estimated rank `r_star` built from standard normal factors.
pub fn gen_ground_truth(dims: &[usize], r_star: usize, seed: u64) -> Result<DenseTensor> {
    if r_star == 0 {
        return domain("ground-truth rank must be at least 1");
    }
    let mut rng = stream(seed, streams::GROUND_TRUTH);
    for _ in 0..GT_ATTEMPTS {
        let t = cp_compose(&CpModel::random(dims, r_star, 1.0, &mut rng)?);
        let t = t.scale(1.0 / t.frobenius_norm());
        if estimate_rank(&t, RANK_THRESHOLD, r_star)? == r_star {
            return Ok(t);
        }
    }
    Err(Error::GenerationFailed { target: r_star, attempts: GT_ATTEMPTS })
}
