use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{schatten_norm, svd, Matrix, SchattenP};
use crate::rng::gaussian_vec;

use super::task::CompletionTask;

/// Shape of a factorization: product is `rows x cols`, every hidden layer has width `hidden`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetDims {
    pub rows: usize,
    pub cols: usize,
    pub hidden: usize,
}

impl NetDims {
    /// Hidden width `min(rows, cols)`, the smallest that leaves the product unconstrained.
    pub fn minimal(rows: usize, cols: usize) -> Self {
        Self { rows, cols, hidden: rows.min(cols) }
    }

    pub fn square(d: usize) -> Self {
        Self::minimal(d, d)
    }

    pub fn for_task(task: &CompletionTask) -> Self {
        Self::minimal(task.rows(), task.cols())
    }

    /// `[d_0, d_1, ..., d_L]` with `d_0 = cols` and `d_L = rows`.
    pub fn chain(&self, depth: usize) -> Vec<usize> {
        let mut c = vec![self.cols];
        c.extend(std::iter::repeat_n(self.hidden, depth.saturating_sub(1)));
        c.push(self.rows);
        c
    }

    fn validate(&self, depth: usize) -> Result<()> {
        if depth == 0 {
            return domain("depth must be at least 1");
        }
        if self.rows == 0 || self.cols == 0 || self.hidden == 0 {
            return domain(format!("dimensions must be positive, got {self:?}"));
        }
        Ok(())
    }
}

/// Factors `W_1..W_L` of a deep linear net; `W_l` maps `d_{l-1}` to `d_l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepNet {
    factors: Vec<Matrix>,
}

impl DeepNet {
    pub fn new(factors: Vec<Matrix>) -> Result<Self> {
        if factors.is_empty() {
            return domain("a net needs at least one factor");
        }
        for (l, pair) in factors.windows(2).enumerate() {
            if pair[1].cols() != pair[0].rows() {
                return Err(Error::Dimension(format!(
                    "factor {} is {}x{} but factor {} has {} rows",
                    l + 2,
                    pair[1].rows(),
                    pair[1].cols(),
                    l + 1,
                    pair[0].rows()
                )));
            }
        }
        Ok(Self { factors })
    }

    pub fn depth(&self) -> usize {
        self.factors.len()
    }

    /// `W_1` first.
    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    pub(crate) fn factors_mut(&mut self) -> &mut [Matrix] {
        &mut self.factors
    }

    pub fn into_factors(self) -> Vec<Matrix> {
        self.factors
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.factors[0].cols()).chain(self.factors.iter().map(Matrix::rows)).collect()
    }

    /// Shape of the product matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.factors[self.depth() - 1].rows(), self.factors[0].cols())
    }

    /// Every hidden width is at least `min(rows, cols)` of the product.
    pub fn is_full_dimensional(&self) -> bool {
        let (r, c) = self.shape();
        let dims = self.dims();
        dims[1..dims.len() - 1].iter().all(|&h| h >= r.min(c))
    }

    pub fn is_finite(&self) -> bool {
        self.factors.iter().all(Matrix::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.factors.iter().fold(0.0, |m, w| m.max(w.max_abs()))
    }

    /// Frobenius norm of the factor tuple.
    pub fn tuple_norm(&self) -> f64 {
        self.factors.iter().map(|w| w.frobenius_norm().powi(2)).sum::<f64>().sqrt()
    }

    /// Frobenius distance between two factor tuples of the same shape.
    pub fn distance(&self, other: &DeepNet) -> f64 {
        assert_eq!(self.dims(), other.dims());
        self.factors.iter().zip(&other.factors).map(|(a, b)| a.sub(b).frobenius_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn product(&self) -> Matrix {
        product_matrix(self)
    }
}

/// `W_L ⋯ W_1`.
pub fn product_matrix(net: &DeepNet) -> Matrix {
    let mut it = net.factors.iter();
    let first = it.next().expect("non-empty").clone();
    it.fold(first, |acc, w| w.matmul(&acc))
}

/// Gradients of the factorized loss with respect to each factor, `W_1` first:
/// `(W_L ⋯ W_{l+1})ᵀ ∇ℓ (W_{l-1} ⋯ W_1)ᵀ` with `∇ℓ` the masked residual.
pub fn factor_gradients(net: &DeepNet, task: &CompletionTask) -> Result<Vec<Matrix>> {
    if net.shape() != task.shape() {
        return domain(format!("net product is {:?} but task is {:?}", net.shape(), task.shape()));
    }
    Ok(gradients_and_product(net, task).2)
}

/// `(product, residual, gradients)` sharing the prefix products.
pub(crate) fn gradients_and_product(net: &DeepNet, task: &CompletionTask) -> (Matrix, Matrix, Vec<Matrix>) {
    let f = &net.factors;
    let depth = f.len();
    // prefix[k] = W_{k+1} ⋯ W_1
    let mut prefix = Vec::with_capacity(depth);
    prefix.push(f[0].clone());
    for l in 1..depth {
        let next = f[l].matmul(&prefix[l - 1]);
        prefix.push(next);
    }
    let product = prefix.pop().expect("non-empty");
    let residual = task.residual_unchecked(&product);

    let mut grads = vec![None; depth];
    // suffix = W_L ⋯ W_{l+1}
    let mut suffix: Option<Matrix> = None;
    for l in (0..depth).rev() {
        let left = match &suffix {
            Some(s) => s.t_matmul(&residual),
            None => residual.clone(),
        };
        grads[l] = Some(if l == 0 { left } else { left.matmul_t(&prefix[l - 1]) });
        suffix = Some(match suffix {
            Some(s) => s.matmul(&f[l]),
            None => f[l].clone(),
        });
    }
    (product, residual, grads.into_iter().map(|g| g.expect("filled")).collect())
}

/// Zeroes rows `cols..rows` of `W_L` (tall product) or columns `rows..cols` of `W_1` (wide product).
fn clear_excess(factors: &mut [Matrix]) {
    let rows = factors[factors.len() - 1].rows();
    let cols = factors[0].cols();
    if rows > cols {
        let last = factors.len() - 1;
        let w = &mut factors[last];
        for i in cols..rows {
            for j in 0..w.cols() {
                w.set(i, j, 0.0);
            }
        }
    } else if cols > rows {
        let w = &mut factors[0];
        for i in 0..w.rows() {
            for j in rows..cols {
                w.set(i, j, 0.0);
            }
        }
    }
}

fn gaussian_matrix<R: rand::Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Matrix {
    Matrix::from_vec_unchecked(rows, cols, gaussian_vec(rng, rows * cols, std))
}

/// Per-entry std `(α² / d̄^{L-1})^{1/(2L)}` for independent Gaussian factors.
pub fn unbalanced_std(alpha: f64, hidden: usize, depth: usize) -> f64 {
    let l = depth as f64;
    ((alpha * alpha) / (hidden as f64).powf(l - 1.0)).powf(1.0 / (2.0 * l))
}

/// Independent Gaussian factors calibrated so product entries have std about `alpha`.
pub fn init_unbalanced<R: rand::Rng + ?Sized>(dims: NetDims, depth: usize, alpha: f64, rng: &mut R) -> Result<DeepNet> {
    dims.validate(depth)?;
    if !(alpha > 0.0) {
        return domain(format!("init scale must be positive, got {alpha}"));
    }
    let std = unbalanced_std(alpha, dims.hidden, depth);
    let chain = dims.chain(depth);
    let mut factors: Vec<Matrix> = chain.windows(2).map(|w| gaussian_matrix(rng, w[1], w[0], std)).collect();
    clear_excess(&mut factors);
    DeepNet::new(factors)
}

/// Balanced factors whose product is a Gaussian matrix with entry std `alpha`.
///
/// For rectangular products the excess rows or columns of the target are zero
/// before it is split, so clearing them on the outer factors keeps the net balanced.
pub fn init_balanced<R: rand::Rng + ?Sized>(dims: NetDims, depth: usize, alpha: f64, rng: &mut R) -> Result<DeepNet> {
    dims.validate(depth)?;
    if !(alpha > 0.0) {
        return domain(format!("init scale must be positive, got {alpha}"));
    }
    let (d, dp) = (dims.rows, dims.cols);
    let k = d.min(dp);
    if depth > 1 && dims.hidden < k {
        return domain(format!("hidden width {} is below min(rows, cols) = {k}", dims.hidden));
    }
    let mut a = gaussian_matrix(rng, d, dp, alpha);
    for i in 0..d {
        for j in 0..dp {
            if i >= k || j >= k {
                a.set(i, j, 0.0);
            }
        }
    }
    if depth == 1 {
        return DeepNet::new(vec![a]);
    }
    let s = svd(&a)?;
    let h = dims.hidden;
    let root: Vec<f64> = s.sigmas.iter().map(|x| x.powf(1.0 / depth as f64)).collect();
    let top = Matrix::from_fn(d, h, |i, r| if r < k { s.u_vectors[r][i] * root[r] } else { 0.0 });
    let bottom = Matrix::from_fn(h, dp, |r, j| if r < k { root[r] * s.v_vectors[r][j] } else { 0.0 });
    let mut factors = vec![bottom];
    for _ in 1..depth - 1 {
        factors.push(Matrix::rect_diag(h, h, &root));
    }
    factors.push(top);
    clear_excess(&mut factors);
    DeepNet::new(factors)
}

/// Square net with every factor `α^{1/L} I`, so the product is `α I`.
pub fn init_identity(d: usize, depth: usize, alpha: f64) -> Result<DeepNet> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("identity init scale must lie in (0, 1], got {alpha}"));
    }
    NetDims::square(d).validate(depth)?;
    let s = alpha.powf(1.0 / depth as f64);
    DeepNet::new(vec![Matrix::identity(d).scale(s); depth])
}

/// Initialization families selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    Identity,
    Balanced,
    Unbalanced,
}

impl InitKind {
    pub fn sample<R: rand::Rng + ?Sized>(
        self,
        dims: NetDims,
        depth: usize,
        alpha: f64,
        rng: &mut R,
    ) -> Result<DeepNet> {
        match self {
            InitKind::Identity => {
                if dims.rows != dims.cols {
                    return domain("identity init needs a square product");
                }
                init_identity(dims.rows, depth, alpha)
            }
            InitKind::Balanced => init_balanced(dims, depth, alpha, rng),
            InitKind::Unbalanced => init_unbalanced(dims, depth, alpha, rng),
        }
    }
}

/// Redraws from `init` until the product's leading-block determinant has the
/// sign of `target_sign`. Returns the net and the number of draws used.
pub fn resample_until_det_sign<R, F>(
    mut init: F,
    target_sign: f64,
    rng: &mut R,
    attempt_cap: usize,
) -> Result<(DeepNet, usize)>
where
    R: rand::Rng + ?Sized,
    F: FnMut(&mut R) -> Result<DeepNet>,
{
    if target_sign == 0.0 || target_sign.is_nan() {
        return domain("target determinant sign must be +1 or -1");
    }
    for attempt in 1..=attempt_cap {
        let net = init(rng)?;
        let det = product_matrix(&net).leading_det();
        if det != 0.0 && det.signum() == target_sign.signum() {
            return Ok((net, attempt));
        }
    }
    Err(Error::ResampleFailed { attempts: attempt_cap })
}

/// `max_l ‖W_{l+1}ᵀW_{l+1} − W_l W_lᵀ‖_*`; zero for a single factor.
pub fn unbalancedness_magnitude(net: &DeepNet) -> Result<f64> {
    let mut worst = 0.0f64;
    for pair in net.factors.windows(2) {
        let gap = pair[1].t_matmul(&pair[1]).sub(&pair[0].matmul_t(&pair[0]));
        worst = worst.max(schatten_norm(&gap, SchattenP::NUCLEAR)?);
    }
    Ok(worst)
}

/// Nearby balanced net for square factors: `W'_1 = W_1` and
/// `W'_l = U_l V_lᵀ (W'_{l-1} W'_{l-1}ᵀ)^{1/2}` where `W_l = U_l Σ_l V_lᵀ`.
pub fn balance_project(net: &DeepNet) -> Result<DeepNet> {
    let d = net.factors[0].rows();
    if net.factors.iter().any(|w| w.shape() != (d, d)) {
        return domain("balance_project needs square factors of equal size");
    }
    let mut out = vec![net.factors[0].clone()];
    for w in &net.factors[1..] {
        let s = svd(w)?;
        let rotation = Matrix::from_fn(d, d, |i, j| (0..d).map(|r| s.u_vectors[r][i] * s.v_vectors[r][j]).sum());
        let prev = svd(out.last().expect("non-empty"))?;
        let root = Matrix::from_fn(d, d, |i, j| {
            (0..d).map(|r| prev.sigmas[r] * prev.u_vectors[r][i] * prev.u_vectors[r][j]).sum()
        });
        out.push(rotation.matmul(&root));
    }
    DeepNet::new(out)
}
