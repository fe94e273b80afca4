//! The product matrix of a balanced net evolves on its own under gradient flow:
//! `Ẇ = −Σ_l (WWᵀ)^{(l−1)/L} ∇ℓ(W) (WᵀW)^{(L−l)/L}`. This module integrates
//! that equation directly and evaluates the induced singular-value rates.

use crate::error::{domain, Result};
use crate::linalg::{dot, svd, Matrix, SvdResult};

use super::task::CompletionTask;

/// `(M Mᵀ)^β` for `left = true`, `(MᵀM)^β` otherwise, from a thin SVD of `M`.
/// `β = 0` gives the identity.
fn gram_power(s: &SvdResult, left: bool, beta: f64) -> Matrix {
    let vecs = if left { &s.u_vectors } else { &s.v_vectors };
    let n = vecs[0].len();
    if beta == 0.0 {
        return Matrix::identity(n);
    }
    let mut out = Matrix::zeros(n, n);
    for (v, &sigma) in vecs.iter().zip(&s.sigmas) {
        if sigma == 0.0 {
            continue;
        }
        let w = sigma.powf(2.0 * beta);
        for i in 0..n {
            for j in 0..n {
                let x = out.get(i, j) + w * v[i] * v[j];
                out.set(i, j, x);
            }
        }
    }
    out
}

/// `(M Mᵀ)^beta` for `beta >= 0`.
pub fn matrix_power_psd(m: &Matrix, beta: f64) -> Result<Matrix> {
    if !(beta >= 0.0) {
        return domain(format!("power must be non-negative, got {beta}"));
    }
    Ok(gram_power(&svd(m)?, true, beta))
}

/// One explicit-Euler step of the end-to-end dynamics for a depth-`depth` factorization.
pub fn product_ode_step(w: &Matrix, task: &CompletionTask, depth: usize, dt: f64) -> Result<Matrix> {
    if depth == 0 {
        return domain("depth must be at least 1");
    }
    if !(dt > 0.0) {
        return domain(format!("step must be positive, got {dt}"));
    }
    let grad = task.residual(w)?;
    if depth == 1 {
        return Ok(w.sub(&grad.scale(dt)));
    }
    let s = svd(w)?;
    let l = depth as f64;
    let mut velocity = Matrix::zeros(w.rows(), w.cols());
    for j in 1..=depth {
        let left = gram_power(&s, true, (j - 1) as f64 / l);
        let right = gram_power(&s, false, (depth - j) as f64 / l);
        velocity = velocity.add(&left.matmul(&grad).matmul(&right));
    }
    Ok(w.sub(&velocity.scale(dt)))
}

/// `σ̇_r = −L (σ_r²)^{1−1/L} ⟨∇ℓ(W), u_r v_rᵀ⟩` for every singular value of `w`.
pub fn singular_value_rates(w: &Matrix, task: &CompletionTask, depth: usize) -> Result<Vec<f64>> {
    if depth == 0 {
        return domain("depth must be at least 1");
    }
    let grad = task.residual(w)?;
    let s = svd(w)?;
    let l = depth as f64;
    Ok(s.sigmas
        .iter()
        .zip(s.u_vectors.iter().zip(&s.v_vectors))
        .map(|(&sigma, (u, v))| {
            let gv: Vec<f64> = (0..grad.rows()).map(|i| dot(grad.row(i), v)).collect();
            -l * (sigma * sigma).powf(1.0 - 1.0 / l) * dot(u, &gv)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matfac::net::{init_balanced, product_matrix, NetDims};
    use crate::matfac::task::make_analyzed_task;
    use crate::rng::stream;

    #[test]
    fn depth_one_is_plain_gradient_step() {
        let task = make_analyzed_task();
        let w = Matrix::from_rows(&[&[0.2, 0.1], &[-0.3, 0.5]]).unwrap();
        let got = product_ode_step(&w, &task, 1, 0.1).unwrap();
        let want = w.sub(&task.residual(&w).unwrap().scale(0.1));
        assert_eq!(got, want);
    }

    #[test]
    fn solution_is_fixed_point() {
        let task = make_analyzed_task();
        let w = Matrix::from_rows(&[&[3.0, 1.0], &[1.0, 0.0]]).unwrap();
        for depth in 1..=4 {
            assert_eq!(product_ode_step(&w, &task, depth, 0.1).unwrap(), w);
            assert!(singular_value_rates(&w, &task, depth).unwrap().iter().all(|&r| r == 0.0));
        }
    }

    #[test]
    fn zero_singular_values_are_stuck() {
        let task = make_analyzed_task();
        let w = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        for depth in 2..=4 {
            let rates = singular_value_rates(&w, &task, depth).unwrap();
            assert_eq!(rates[1], 0.0);
        }
    }

    #[test]
    fn psd_power_squares_back() {
        let m = Matrix::from_rows(&[&[1.0, 2.0], &[0.5, -1.0]]).unwrap();
        let half = matrix_power_psd(&m, 0.5).unwrap();
        let gram = m.matmul_t(&m);
        assert!(half.matmul(&half).sub(&gram).frobenius_norm() < 1e-12);
        assert_eq!(matrix_power_psd(&m, 0.0).unwrap(), Matrix::identity(2));
    }

    #[test]
    fn rates_match_finite_differences_along_trajectory() {
        let task = make_analyzed_task();
        let mut rng = stream(4, 0);
        let net = init_balanced(NetDims::square(2), 3, 0.3, &mut rng).unwrap();
        let mut w = product_matrix(&net);
        let dt = 1e-4;
        for _ in 0..2000 {
            w = product_ode_step(&w, &task, 3, dt).unwrap();
        }
        let before = svd(&w).unwrap().sigmas;
        let rates = singular_value_rates(&w, &task, 3).unwrap();
        let next = product_ode_step(&w, &task, 3, dt).unwrap();
        let after = svd(&next).unwrap().sigmas;
        for r in 0..2 {
            let fd = (after[r] - before[r]) / dt;
            assert!((fd - rates[r]).abs() <= 1e-2 * rates[r].abs(), "r={r} fd={fd} predicted={}", rates[r]);
        }
    }
}
