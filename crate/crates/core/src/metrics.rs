//! Rank surrogates and closed-form bound evaluators for the 2x2 completion
//! problems built by [`crate::matfac`].
//!
//! Bounds are reported as printed, including vacuous (negative) lower bounds.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::{schatten_from_sigmas, shannon_entropy, singular_values, Matrix, SchattenP};

/// `exp` of the entropy of the normalized singular values.
pub fn effective_rank(m: &Matrix) -> Result<f64> {
    effective_rank_from_sigmas(&singular_values(m)?)
}

pub fn effective_rank_from_sigmas(sigmas: &[f64]) -> Result<f64> {
    let total: f64 = sigmas.iter().sum();
    if !(total > 0.0) {
        return domain("effective rank of a zero matrix is undefined");
    }
    let mut rho: Vec<f64> = sigmas.iter().map(|s| s / total).collect();
    // renormalize so rounding in the division cannot trip the sum check
    let sum: f64 = rho.iter().sum();
    rho.iter_mut().for_each(|p| *p /= sum);
    Ok(shannon_entropy(&rho)?.exp())
}

/// Frobenius distance from `m` to the set of matrices of rank at most `r`.
pub fn dist_from_rank(m: &Matrix, r: usize) -> Result<f64> {
    let k = m.rows().min(m.cols());
    if r > k {
        return domain(format!("rank {r} exceeds min(rows, cols) = {k}"));
    }
    let sigmas = singular_values(m)?;
    Ok(sigmas[r..].iter().map(|s| s * s).sum::<f64>().sqrt())
}

/// The analyzed task's solution with top-left entry `x`: `[[x, 1], [1, 0]]`.
pub fn solution_matrix(x: f64) -> Matrix {
    Matrix::from_rows(&[&[x, 1.0], &[1.0, 0.0]]).expect("finite x")
}

/// Singular values of [`solution_matrix`]: `(|x| ± √(x²+4)) / 2` in absolute value.
pub fn solution_singular_values(x: f64) -> (f64, f64) {
    let s1 = 0.5 * (x.abs() + x.hypot(2.0));
    (s1, 1.0 / s1)
}

/// Singular values of `[[x, z], [z', eps]]`.
pub fn perturbed_solution_singular_values(x: f64, z: f64, z_prime: f64, eps: f64) -> (f64, f64) {
    let sum = x * x + z * z + z_prime * z_prime + eps * eps;
    let det = x * eps - z * z_prime;
    let disc = (sum * sum - 4.0 * det * det).max(0.0);
    let s1 = (0.5 * (sum + disc.sqrt())).sqrt();
    if s1 == 0.0 {
        return (0.0, 0.0);
    }
    (s1, (det.abs() / s1).min(s1))
}

/// A Schatten (quasi-)norm together with the constants the bounds need.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiNormSpec {
    pub p: SchattenP,
    /// Weakened triangle inequality constant.
    pub c: f64,
    /// Norms of `e1e1ᵀ, e1e2ᵀ, e2e1ᵀ, e2e2ᵀ`.
    pub basis_norms: [f64; 4],
}

impl QuasiNormSpec {
    pub fn schatten(p: SchattenP) -> Result<Self> {
        let p = p.validate()?;
        Ok(Self { p, c: p.triangle_constant(), basis_norms: [1.0; 4] })
    }

    /// p = 0.5, 1, 2, inf.
    pub fn battery() -> Vec<Self> {
        [SchattenP::Finite(0.5), SchattenP::NUCLEAR, SchattenP::FROBENIUS, SchattenP::SPECTRAL]
            .into_iter()
            .map(|p| Self::schatten(p).expect("valid exponent"))
            .collect()
    }

    pub fn norm(&self, m: &Matrix) -> Result<f64> {
        schatten_from_sigmas(&singular_values(m)?, self.p)
    }

    pub fn e11_norm(&self) -> f64 {
        self.basis_norms[0]
    }

    pub fn max_basis_norm(&self) -> f64 {
        self.basis_norms.iter().fold(0.0, |m, &x| m.max(x))
    }

    /// Column name of this norm in trajectory metrics.
    pub fn metric_name(&self) -> String {
        match self.p {
            SchattenP::Finite(1.0) => "nuclear".into(),
            SchattenP::Finite(2.0) => "frobenius".into(),
            SchattenP::Finite(0.5) => "schatten_half".into(),
            SchattenP::Infinity => "spectral".into(),
            SchattenP::Finite(p) => format!("schatten_{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    pub kind: BoundKind,
    pub inputs: BTreeMap<String, f64>,
}

impl BoundReport {
    fn new(name: &str, value: f64, kind: BoundKind, inputs: &[(&str, f64)]) -> Self {
        Self { name: name.to_string(), value, kind, inputs: inputs.iter().map(|&(k, v)| (k.to_string(), v)).collect() }
    }

    /// Whether `actual` respects the bound up to an additive `slack`.
    pub fn holds(&self, actual: f64, slack: f64) -> bool {
        match self.kind {
            BoundKind::Lower => actual >= self.value - slack,
            BoundKind::Upper => actual <= self.value + slack,
        }
    }
}

/// Lower bound on the norm, upper bounds on effective rank and on distance from rank one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSet {
    pub norm: BoundReport,
    pub erank: BoundReport,
    pub dist: BoundReport,
}

fn check_loss(ell: f64) -> Result<()> {
    if !(ell >= 0.0) {
        return domain(format!("loss must be non-negative, got {ell}"));
    }
    Ok(())
}

/// Bounds for the analyzed task at loss `ell`, for trajectories whose product
/// starts with positive determinant.
pub fn thm1_bounds(ell: f64, spec: &QuasiNormSpec) -> Result<BoundSet> {
    check_loss(ell)?;
    let c = spec.c;
    let a = spec.e11_norm() / (SQRT_2 * c);
    let b = (SQRT_2 * a).max(8.0 * c * c * spec.max_basis_norm());
    let root = ell.sqrt();
    let norm = if ell == 0.0 { f64::INFINITY } else { a / root - b };
    let inputs = [("ell", ell), ("a", a), ("b", b), ("c", c)];
    Ok(BoundSet {
        norm: BoundReport::new("thm1_norm_lb", norm, BoundKind::Lower, &inputs),
        erank: BoundReport::new(
            "thm1_erank_ub",
            1.0 + 2.0 * 12f64.sqrt() / LN_2 * root,
            BoundKind::Upper,
            &inputs[..1],
        ),
        dist: BoundReport::new("thm1_dist_ub", 3.0 * SQRT_2 * root, BoundKind::Upper, &inputs[..1]),
    })
}

/// Bounds for the perturbed task (top-left unobserved; `z`, `z'`, `eps` at
/// `(0,1)`, `(1,0)`, `(1,1)`) when the start determinant has the sign of `z z'`.
pub fn thm2_bounds(ell: f64, z: f64, z_prime: f64, eps: f64, spec: &QuasiNormSpec) -> Result<BoundSet> {
    check_loss(ell)?;
    if z == 0.0 || z_prime == 0.0 {
        return domain("z and z' must be nonzero");
    }
    let (az, azp, ae) = (z.abs(), z_prime.abs(), eps.abs());
    let zmin = az.min(azp);
    let c = spec.c;
    let a = spec.e11_norm() / c;
    let b = (a * az * azp / (ae + zmin)).max(8.0 * c * c * az.max(azp).max(ae) * spec.max_basis_norm());
    let r = (2.0 * ell).sqrt();
    let denom = ae + r;
    let norm = if denom == 0.0 { f64::INFINITY } else { a * az * azp / denom - b };
    let erank = 1.0 + 16.0 / zmin * (ae + r);
    let dist = 4.0 * ae + (4.0 + (az * azp).sqrt() / zmin) * r;
    let inputs = [("ell", ell), ("z", z), ("z_prime", z_prime), ("eps", eps), ("a", a), ("b", b), ("c", c)];
    Ok(BoundSet {
        norm: BoundReport::new("thm2_norm_lb", norm, BoundKind::Lower, &inputs),
        erank: BoundReport::new("thm2_erank_ub", erank, BoundKind::Upper, &inputs[..4]),
        dist: BoundReport::new("thm2_dist_ub", dist, BoundKind::Upper, &inputs[..4]),
    })
}

/// Inputs to the unbalanced-start evaluator. The unbalancedness is passed as
/// its logarithm because admissible values underflow `f64`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thm3Input {
    pub ln_eps: f64,
    /// Loss at initialization, in `[0, 1)`.
    pub ell_init: f64,
    /// Smallest singular value of the initial product.
    pub sigma_min_init: f64,
    /// Largest Frobenius norm among the initial factors.
    pub max_factor_frob: f64,
    pub depth: usize,
    /// Loss at the time the distance bound is evaluated.
    pub current_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thm3Report {
    pub admissible: bool,
    /// Log of the largest admissible unbalancedness.
    pub ln_threshold: f64,
    /// Guaranteed time before the determinant can vanish, unless the terminal bounds hold first.
    pub exit_time: f64,
    pub terminal: BoundSet,
}

/// Evaluates the unbalanced-start guarantees in log space.
pub fn thm3_report(input: &Thm3Input, spec: &QuasiNormSpec) -> Result<Thm3Report> {
    let Thm3Input { ln_eps, ell_init, sigma_min_init, max_factor_frob, depth, current_loss } = *input;
    if depth < 2 {
        return domain("depth must be at least 2");
    }
    if !(0.0..1.0).contains(&ell_init) {
        return domain(format!("initial loss must lie in [0, 1), got {ell_init}"));
    }
    if !(sigma_min_init > 0.0) || !(max_factor_frob >= 0.0) || ln_eps.is_nan() {
        return domain("initial singular value must be positive and factor norms non-negative");
    }
    check_loss(current_loss)?;

    let u = 1.0 - ell_init.sqrt();
    let ln_u = u.ln();
    let r0 = max_factor_frob.max(32.0) + 1.0;
    let sigma_init = sigma_min_init.min(u / 2.0);
    let c = spec.c;
    let offset = 12.0 * c * c * spec.max_basis_norm();
    let tail = (2.0 * current_loss).sqrt();
    let l = depth as f64;

    let (ln_threshold, exit_time, norm, erank, dist) = if depth == 2 {
        let lam = (-ln_eps).max(0.0);
        let ln_thr = -(16.0 * LN_2 + 6.0 * r0.ln() - 4.0 * ln_u).exp();
        let exit = lam.powf(2.0 / 3.0) / (2f64.powf(2.0 / 3.0) * u.powf(4.0 / 3.0)) - (1.0 - ln_u - sigma_init.ln());
        let norm = spec.e11_norm() * u.powf(4.0 / 3.0) / (2f64.powi(11) * c) * lam.powf(1.0 / 3.0) - offset;
        let erank = 1.0 + 2f64.powi(9) / u.powf(2.0 / 3.0) * lam.powf(-1.0 / 6.0);
        let dist = 2f64.powi(12) / u.powf(4.0 / 3.0) * lam.powf(-1.0 / 3.0) + tail;
        (ln_thr, exit, norm, erank, dist)
    } else {
        let ln_l = l.ln();
        let ln_thr = 128.0 * ln_u - (64.0 * l + 256.0) * LN_2 - 128.0 * ln_l - (128.0 * l - 64.0) * r0.ln();
        let exit = (4.0 * l / 3.0 * LN_2 + ln_l - 2.0 * ln_u - (3.0 * l - 8.0) / (32.0 * l - 16.0) * ln_eps).exp()
            - (-(5.0 * l + 5.0) * LN_2 - (l - 2.0) / l * sigma_init.ln()).exp();
        let norm = (spec.e11_norm().ln() + 1.2 * ln_u
            - 4.0 * l * LN_2
            - 1.2 * ln_l
            - c.ln()
            - l / (128.0 * l - 64.0) * ln_eps)
            .exp()
            - offset;
        let erank = 1.0 + ((2.0 * l + 5.0) * LN_2 + ln_l - ln_u + l / (256.0 * l - 128.0) * ln_eps).exp();
        let dist = ((3.0 * l + 4.0) * LN_2 + 1.2 * ln_l - 1.2 * ln_u + l / (128.0 * l - 64.0) * ln_eps).exp() + tail;
        (ln_thr, exit, norm, erank, dist)
    };

    let inputs = [
        ("ln_eps", ln_eps),
        ("ell_init", ell_init),
        ("sigma_init", sigma_init),
        ("r0", r0),
        ("depth", l),
        ("ell", current_loss),
    ];
    Ok(Thm3Report {
        admissible: ln_eps <= ln_threshold,
        ln_threshold,
        exit_time,
        terminal: BoundSet {
            norm: BoundReport::new("thm3_norm_lb", norm, BoundKind::Lower, &inputs),
            erank: BoundReport::new("thm3_erank_ub", erank, BoundKind::Upper, &inputs),
            dist: BoundReport::new("thm3_dist_ub", dist, BoundKind::Upper, &inputs),
        },
    })
}

/// Grid point minimizing the norm of [`solution_matrix`] (first one on ties).
pub fn prop1_scan(spec: &QuasiNormSpec, x_grid: &[f64]) -> Result<f64> {
    let mut best: Option<(f64, f64)> = None;
    for &x in x_grid {
        let v = spec.norm(&solution_matrix(x))?;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((x, v));
        }
    }
    best.map(|(x, _)| x).ok_or_else(|| crate::Error::Domain("empty grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn nuclear() -> QuasiNormSpec {
        QuasiNormSpec::schatten(SchattenP::NUCLEAR).unwrap()
    }

    #[test]
    fn erank_examples() {
        assert_relative_eq!(effective_rank(&solution_matrix(0.0)).unwrap(), 2.0, epsilon = 1e-14);
        let rank1 = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert_relative_eq!(effective_rank(&rank1).unwrap(), 1.0, epsilon = 1e-12);
        // frozen from a 30-digit evaluation of exp(H(σ/Σσ)) with σ = ((3 ± √13)/2)
        let oracle = 1.334_253_009_926_072_3;
        assert_relative_eq!(effective_rank(&solution_matrix(3.0)).unwrap(), oracle, epsilon = 1e-13);
        assert!(effective_rank(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn dist_examples() {
        let m = solution_matrix(3.0);
        assert_eq!(dist_from_rank(&m, 2).unwrap(), 0.0);
        assert_relative_eq!(dist_from_rank(&m, 1).unwrap(), solution_singular_values(3.0).1, epsilon = 1e-13);
        assert!(dist_from_rank(&m, 3).is_err());
    }

    #[test]
    fn solution_values() {
        assert_eq!(solution_singular_values(0.0), (1.0, 1.0));
        assert_eq!(perturbed_solution_singular_values(0.0, 1.0, 1.0, 0.0), (1.0, 1.0));
        let (s1, s2) = solution_singular_values(3.0);
        assert_relative_eq!(s1, 3.302_776, epsilon = 1e-6);
        assert_relative_eq!(s2, 0.302_776, epsilon = 1e-6);
        assert_relative_eq!(s1 * s2, 1.0, epsilon = 1e-15);
        let (p1, p2) = perturbed_solution_singular_values(3.0, 1.0, 1.0, 0.0);
        assert_relative_eq!(p1, s1, epsilon = 1e-14);
        assert_relative_eq!(p2, s2, epsilon = 1e-14);
    }

    #[test]
    fn thm1_examples() {
        let b = thm1_bounds(0.01, &nuclear()).unwrap();
        assert_relative_eq!(b.norm.value, 50f64.sqrt() - 8.0, epsilon = 1e-12);
        assert!(b.norm.value < 0.0);
        let b = thm1_bounds(1e-6, &nuclear()).unwrap();
        assert_relative_eq!(b.norm.value, 1000.0 / SQRT_2 - 8.0, epsilon = 1e-9);
        assert_relative_eq!(b.norm.value, 699.106_781, epsilon = 1e-6);
        let b = thm1_bounds(0.0, &nuclear()).unwrap();
        assert_eq!(b.norm.value, f64::INFINITY);
        assert_eq!(b.erank.value, 1.0);
        assert_eq!(b.dist.value, 0.0);
        let half = QuasiNormSpec::schatten(SchattenP::Finite(0.5)).unwrap();
        assert_eq!(half.c, 2.0);
        let b = thm1_bounds(1e-4, &half).unwrap();
        assert_eq!(b.norm.inputs["b"], 32.0);
        assert!(thm1_bounds(-1.0, &nuclear()).is_err());
    }

    #[test]
    fn thm2_examples() {
        let b = thm2_bounds(0.0, 1.0, 1.0, 0.1, &nuclear()).unwrap();
        assert_eq!(b.norm.inputs["b"], 8.0);
        assert_relative_eq!(b.norm.value, 2.0, epsilon = 1e-12);
        let b = thm2_bounds(1e-8, 1.0, 1.0, 0.0, &nuclear()).unwrap();
        assert_relative_eq!(b.norm.value, 1.0 / (2e-8f64).sqrt() - 8.0, epsilon = 1e-6);
        assert!(thm2_bounds(0.0, 0.0, 1.0, 0.1, &nuclear()).is_err());
    }

    #[test]
    fn thm3_gate_and_limits() {
        let base = Thm3Input {
            ln_eps: -1.0,
            ell_init: 0.25,
            sigma_min_init: 0.1,
            max_factor_frob: 1.0,
            depth: 3,
            current_loss: 0.0,
        };
        let r = thm3_report(&base, &nuclear()).unwrap();
        assert!(!r.admissible);

        let tiny = Thm3Input { ln_eps: r.ln_threshold - 1.0, ..base };
        let r2 = thm3_report(&tiny, &nuclear()).unwrap();
        assert!(r2.admissible);
        let tinier = Thm3Input { ln_eps: r.ln_threshold * 10.0, ..base };
        let r3 = thm3_report(&tinier, &nuclear()).unwrap();
        assert!(r3.exit_time > r2.exit_time);
        assert!(r3.terminal.norm.value > r2.terminal.norm.value);

        // depth 2 with eps = e^{-1e9}; exit time evaluated directly
        let d2 = Thm3Input { ln_eps: -1e9, depth: 2, ..base };
        let r = thm3_report(&d2, &nuclear()).unwrap();
        let u: f64 = 0.5;
        let direct = 1e9f64.powf(2.0 / 3.0) / (2f64.powf(2.0 / 3.0) * u.powf(4.0 / 3.0))
            - (std::f64::consts::E / (u * 0.1)).ln();
        assert!(r.exit_time > 0.0);
        assert_relative_eq!(r.exit_time, direct, max_relative = 1e-12);
        assert!(thm3_report(&Thm3Input { ell_init: 1.0, ..base }, &nuclear()).is_err());
    }

    #[test]
    fn prop1_examples() {
        let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
        for p in [SchattenP::NUCLEAR, SchattenP::SPECTRAL] {
            assert_eq!(prop1_scan(&QuasiNormSpec::schatten(p).unwrap(), &grid).unwrap(), 0.0);
        }
        let fine: Vec<f64> = (-30..=30).map(|k| k as f64 / 10.0).collect();
        let half = QuasiNormSpec::schatten(SchattenP::Finite(0.5)).unwrap();
        assert_eq!(prop1_scan(&half, &fine).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn erank_within_range(d in prop::collection::vec(-5.0..5.0f64, 9)) {
            let m = Matrix::new(3, 3, d).unwrap();
            if m.frobenius_norm() > 0.0 {
                let e = effective_rank(&m).unwrap();
                prop_assert!(e > 0.0 && e <= 3.0 + 1e-12);
            }
        }

        #[test]
        fn perturbed_values_match_svd(x in -20.0..20.0f64, z in 0.1..3.0f64, zp in -3.0..-0.1f64, eps in -1.0..1.0f64) {
            let m = Matrix::from_rows(&[&[x, z], &[zp, eps]]).unwrap();
            let s = crate::linalg::svd(&m).unwrap().sigmas;
            let (a, b) = perturbed_solution_singular_values(x, z, zp, eps);
            prop_assert!((a - s[0]).abs() <= 1e-10 * s[0].max(1.0));
            prop_assert!((b - s[1]).abs() <= 1e-10 * s[0].max(1.0));
        }
    }
}
