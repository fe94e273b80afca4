use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::Matrix;

/// Partially observed `rows x cols` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TaskRepr", try_from = "TaskRepr")]
pub struct CompletionTask {
    rows: usize,
    cols: usize,
    observations: BTreeMap<(usize, usize), f64>,
    /// Row-major: `mask[i * cols + j]` is the observed value, if any.
    mask: Vec<Option<f64>>,
}

impl CompletionTask {
    pub fn new(
        rows: usize,
        cols: usize,
        observations: impl IntoIterator<Item = ((usize, usize), f64)>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return domain(format!("task dimensions must be positive, got {rows}x{cols}"));
        }
        let mut map = BTreeMap::new();
        for ((i, j), b) in observations {
            if i >= rows || j >= cols {
                return domain(format!("observation ({i}, {j}) outside a {rows}x{cols} matrix"));
            }
            if !b.is_finite() {
                return Err(Error::NonFinite { index: i * cols + j });
            }
            if map.insert((i, j), b).is_some() {
                return domain(format!("observation ({i}, {j}) given twice"));
            }
        }
        if map.len() == rows * cols {
            return domain("every entry is observed; completion is trivial");
        }
        let mut task = Self { rows, cols, observations: map, mask: Vec::new() };
        task.rebuild_mask();
        Ok(task)
    }

    fn rebuild_mask(&mut self) {
        self.mask = vec![None; self.rows * self.cols];
        for (&(i, j), &b) in &self.observations {
            self.mask[i * self.cols + j] = Some(b);
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn observations(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.observations
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observations.contains_key(&(i, j))
    }

    /// Unobserved positions in row-major order.
    pub fn unobserved(&self) -> Vec<(usize, usize)> {
        (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
            .filter(|p| !self.observations.contains_key(p))
            .collect()
    }

    /// Euclidean norm of the observed values.
    pub fn observation_norm(&self) -> f64 {
        self.observations.values().map(|b| b * b).sum::<f64>().sqrt()
    }

    fn check_shape(&self, w: &Matrix) -> Result<()> {
        if w.shape() != self.shape() {
            return domain(format!("matrix is {}x{} but the task is {}x{}", w.rows(), w.cols(), self.rows, self.cols));
        }
        Ok(())
    }

    /// Gradient of the loss at `w`: `W - b` on observed entries, zero elsewhere.
    pub fn residual(&self, w: &Matrix) -> Result<Matrix> {
        self.check_shape(w)?;
        Ok(self.residual_unchecked(w))
    }

    pub(crate) fn residual_unchecked(&self, w: &Matrix) -> Matrix {
        let data = w.as_slice().iter().zip(&self.mask).map(|(&x, b)| b.map_or(0.0, |b| x - b)).collect();
        Matrix::from_vec_unchecked(self.rows, self.cols, data)
    }

    pub fn loss(&self, w: &Matrix) -> Result<f64> {
        self.check_shape(w)?;
        Ok(0.5 * self.residual_unchecked(w).as_slice().iter().map(|r| r * r).sum::<f64>())
    }

    /// Sign the product's leading-block determinant must start with so that the
    /// trajectory cannot reach the solution set without the unobserved entries
    /// growing. `None` when the task is not one of the structured families.
    pub fn required_det_sign(&self) -> Option<f64> {
        let unobserved = self.unobserved();
        if self.shape() == (2, 2) && unobserved.len() == 1 {
            let (i, j) = unobserved[0];
            let (z, zp) = (self.observations[&(i, 1 - j)], self.observations[&(1 - i, j)]);
            let s = (z * zp).signum();
            return Some(if i == j { s } else { -s });
        }
        (unobserved == [(0, 0)]).then_some(1.0)
    }
}

/// Serialized form: observations as `(i, j, b)` triples.
#[derive(Serialize, Deserialize)]
struct TaskRepr {
    rows: usize,
    cols: usize,
    observations: Vec<(usize, usize, f64)>,
}

impl From<CompletionTask> for TaskRepr {
    fn from(t: CompletionTask) -> Self {
        let observations = t.observations.iter().map(|(&(i, j), &b)| (i, j, b)).collect();
        Self { rows: t.rows, cols: t.cols, observations }
    }
}

impl TryFrom<TaskRepr> for CompletionTask {
    type Error = Error;

    fn try_from(r: TaskRepr) -> Result<Self> {
        CompletionTask::new(r.rows, r.cols, r.observations.into_iter().map(|(i, j, b)| ((i, j), b)))
    }
}

/// Free-function form of [`CompletionTask::loss`].
pub fn loss(task: &CompletionTask, w: &Matrix) -> Result<f64> {
    task.loss(w)
}

/// 2x2 task with the top-left entry unobserved, off-diagonals 1 and bottom-right 0.
pub fn make_analyzed_task() -> CompletionTask {
    make_perturbed_task(1.0, 1.0, 0.0, (0, 0)).expect("valid constants")
}

/// 2x2 task with one unobserved entry at `unobserved`; the entry in the same row
/// gets `z`, the one in the same column `z_prime`, and the opposite corner `eps`.
pub fn make_perturbed_task(z: f64, z_prime: f64, eps: f64, unobserved: (usize, usize)) -> Result<CompletionTask> {
    if z == 0.0 || z_prime == 0.0 {
        return domain("z and z' must be nonzero");
    }
    let (i, j) = unobserved;
    if i > 1 || j > 1 {
        return domain(format!("unobserved position ({i}, {j}) outside the 2x2 grid"));
    }
    CompletionTask::new(2, 2, [((i, 1 - j), z), ((1 - i, j), z_prime), ((1 - i, 1 - j), eps)])
}

/// `d x d'` task observing everything but `(0, 0)`: ones at `(0, 1)`, `(1, 0)`
/// and on the diagonal from index 2 on, zeros elsewhere.
pub fn make_dxd_task(d: usize, d_prime: usize) -> Result<CompletionTask> {
    if d < 2 || d_prime < 2 {
        return domain(format!("d x d' task needs both sizes >= 2, got {d}x{d_prime}"));
    }
    let obs = (0..d).flat_map(|i| (0..d_prime).map(move |j| (i, j))).filter(|&p| p != (0, 0)).map(|(i, j)| {
        let one = (i == j && i >= 2) || (i, j) == (0, 1) || (i, j) == (1, 0);
        ((i, j), if one { 1.0 } else { 0.0 })
    });
    CompletionTask::new(d, d_prime, obs)
}
