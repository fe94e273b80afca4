use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{linear_index, unravel_index, DenseTensor};
use crate::rng::gaussian_vec;

/// `Π d_n / max d_n`, enough terms to express every tensor of these dimensions.
pub fn default_rank(dims: &[usize]) -> usize {
    let max = dims.iter().copied().max().unwrap_or(1).max(1);
    dims.iter().product::<usize>() / max
}

/// Partially observed tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorTask {
    dims: Vec<usize>,
    /// `(multi-index, value)` pairs, sorted by linear index.
    observations: Vec<(Vec<usize>, f64)>,
}

impl TensorTask {
    pub fn new(dims: Vec<usize>, observations: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return domain(format!("tensor dimensions must be positive, got {dims:?}"));
        }
        let mut keyed = Vec::with_capacity(observations.len());
        for (idx, b) in observations {
            if idx.len() != dims.len() || idx.iter().zip(&dims).any(|(&i, &d)| i >= d) {
                return domain(format!("observation {idx:?} outside dims {dims:?}"));
            }
            if !b.is_finite() {
                return Err(Error::NonFinite { index: linear_index(&dims, &idx) });
            }
            keyed.push((linear_index(&dims, &idx), idx, b));
        }
        keyed.sort_by_key(|k| k.0);
        if keyed.windows(2).any(|w| w[0].0 == w[1].0) {
            return domain("duplicate observation");
        }
        Ok(Self { dims, observations: keyed.into_iter().map(|(_, i, b)| (i, b)).collect() })
    }

    /// Observes `target` at the given linear positions.
    pub fn from_tensor(target: &DenseTensor, positions: &[usize]) -> Result<Self> {
        let obs = positions.iter().map(|&p| (unravel_index(target.dims(), p), target.as_slice()[p])).collect();
        Self::new(target.dims().to_vec(), obs)
    }

    /// `n_obs` positions of `target` drawn uniformly without replacement.
    pub fn sample<R: rand::Rng + ?Sized>(target: &DenseTensor, n_obs: usize, rng: &mut R) -> Result<Self> {
        if n_obs == 0 || n_obs > target.len() {
            return domain(format!("cannot observe {n_obs} of {} entries", target.len()));
        }
        let positions = rand::seq::index::sample(rng, target.len(), n_obs).into_vec();
        Self::from_tensor(target, &positions)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn observations(&self) -> &[(Vec<usize>, f64)] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn is_observed(&self, idx: &[usize]) -> bool {
        self.observations.iter().any(|(i, _)| i == idx)
    }

    /// Observed values in place, zeros everywhere else.
    pub fn zero_filled(&self) -> DenseTensor {
        let mut t = vec![0.0; self.dims.iter().product()];
        for (idx, b) in &self.observations {
            t[linear_index(&self.dims, idx)] = *b;
        }
        DenseTensor::from_vec_unchecked(self.dims.clone(), t)
    }
}

/// CP model: `factors[n]` is `d_n x R`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpModel {
    dims: Vec<usize>,
    rank: usize,
    factors: Vec<Vec<f64>>,
}

impl CpModel {
    pub fn new(dims: Vec<usize>, rank: usize, factors: Vec<Vec<f64>>) -> Result<Self> {
        if rank == 0 {
            return domain("CP rank must be at least 1");
        }
        if dims.is_empty() || dims.contains(&0) || factors.len() != dims.len() {
            return domain("factor count must match a non-empty list of positive dims");
        }
        for (n, (f, &d)) in factors.iter().zip(&dims).enumerate() {
            if f.len() != d * rank {
                return Err(Error::Dimension(format!("factor {n} has {} entries, expected {}", f.len(), d * rank)));
            }
            if let Some(i) = f.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        Ok(Self { dims, rank, factors })
    }

    /// Entries i.i.d. `N(0, std²)`.
    pub fn random<R: rand::Rng + ?Sized>(dims: &[usize], rank: usize, std: f64, rng: &mut R) -> Result<Self> {
        let factors = dims.iter().map(|&d| gaussian_vec(rng, d * rank, std)).collect();
        Self::new(dims.to_vec(), rank, factors)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn factors(&self) -> &[Vec<f64>] {
        &self.factors
    }

    pub(crate) fn factors_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.factors
    }

    /// `w_r^(n)`.
    pub fn vector(&self, r: usize, n: usize) -> Vec<f64> {
        (0..self.dims[n]).map(|i| self.factors[n][i * self.rank + r]).collect()
    }

    /// Multiplies `w_r^(n)` by `s`.
    pub fn scale_component(&mut self, r: usize, n: usize, s: f64) {
        for i in 0..self.dims[n] {
            self.factors[n][i * self.rank + r] *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.factors.iter().all(|f| f.iter().all(|x| x.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.factors.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Value of the composed tensor at one multi-index.
    pub fn entry(&self, idx: &[usize]) -> f64 {
        (0..self.rank)
            .map(|r| idx.iter().enumerate().map(|(n, &i)| self.factors[n][i * self.rank + r]).product::<f64>())
            .sum()
    }
}

/// `Σ_r w_r^(1) ⊗ ⋯ ⊗ w_r^(N)`.
pub fn cp_compose(model: &CpModel) -> DenseTensor {
    let (dims, rank) = (&model.dims, model.rank);
    // running[k * rank + r]: product over the modes processed so far
    let mut running = vec![1.0; rank];
    for (n, &d) in dims.iter().enumerate() {
        let f = &model.factors[n];
        let mut next = Vec::with_capacity(running.len() * d);
        for chunk in running.chunks(rank) {
            for i in 0..d {
                let row = &f[i * rank..(i + 1) * rank];
                next.extend(chunk.iter().zip(row).map(|(a, b)| a * b));
            }
        }
        running = next;
    }
    let data = running.chunks(rank).map(|c| c.iter().sum()).collect();
    DenseTensor::from_vec_unchecked(dims.clone(), data)
}

/// Half the squared error over the observations, and its gradient with respect
/// to every factor (same layout as [`CpModel::factors`]).
pub fn cp_loss_and_grads(model: &CpModel, task: &TensorTask) -> Result<(f64, Vec<Vec<f64>>)> {
    if model.dims != task.dims {
        return domain(format!("model dims {:?} differ from task dims {:?}", model.dims, task.dims));
    }
    let (n_modes, rank) = (model.order(), model.rank);
    let mut grads: Vec<Vec<f64>> = model.factors.iter().map(|f| vec![0.0; f.len()]).collect();
    let mut loss = 0.0;
    let mut prefix = vec![0.0; (n_modes + 1) * rank];
    let mut suffix = vec![0.0; (n_modes + 1) * rank];
    for (idx, b) in &task.observations {
        // prefix[n]: product of modes < n; suffix[n]: product of modes >= n
        prefix[..rank].fill(1.0);
        suffix[n_modes * rank..].fill(1.0);
        for n in 0..n_modes {
            let row = &model.factors[n][idx[n] * rank..(idx[n] + 1) * rank];
            for r in 0..rank {
                prefix[(n + 1) * rank + r] = prefix[n * rank + r] * row[r];
            }
        }
        for n in (0..n_modes).rev() {
            let row = &model.factors[n][idx[n] * rank..(idx[n] + 1) * rank];
            for r in 0..rank {
                suffix[n * rank + r] = suffix[(n + 1) * rank + r] * row[r];
            }
        }
        let value: f64 = prefix[n_modes * rank..].iter().sum();
        let res = value - b;
        loss += 0.5 * res * res;
        for n in 0..n_modes {
            let g = &mut grads[n][idx[n] * rank..(idx[n] + 1) * rank];
            for r in 0..rank {
                g[r] += res * prefix[n * rank + r] * suffix[(n + 1) * rank + r];
            }
        }
    }
    Ok((loss, grads))
}
