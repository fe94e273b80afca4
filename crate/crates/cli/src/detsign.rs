//! Monte Carlo estimate of `P(det > 0)` for random 2x2 matrices and products.

use std::io::Write;

use serde::{Deserialize, Serialize};

use implreg_core::rng::{gaussian_vec, stream, streams, Rng};
use implreg_core::Matrix;

use crate::config::DetsignConfig;
use crate::csvio::fmt_f64;
use crate::error::Result;

/// Half-width multiplier of the reported interval (three standard errors).
pub const CI_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distribution {
    /// One matrix with i.i.d. standard normal entries.
    Gaussian,
    /// Product of this many independent Gaussian matrices.
    Product(usize),
    /// The identity every time.
    Identity,
}

impl Distribution {
    pub fn label(&self) -> String {
        match self {
            Self::Gaussian => "gaussian".into(),
            Self::Product(l) => format!("product-{l}"),
            Self::Identity => "identity".into(),
        }
    }

    fn draw(&self, rng: &mut Rng) -> Matrix {
        let gaussian = |rng: &mut Rng| Matrix::new(2, 2, gaussian_vec(rng, 4, 1.0)).expect("finite draw");
        match *self {
            Self::Gaussian => gaussian(rng),
            Self::Product(l) => (1..l).fold(gaussian(rng), |acc, _| gaussian(rng).matmul(&acc)),
            Self::Identity => Matrix::identity(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetsignRow {
    pub distribution: String,
    pub samples: usize,
    pub positive: usize,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Wilson score interval with multiplier `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Each distribution gets its own stream of `seed`.
pub fn estimate(dist: Distribution, n: usize, seed: u64, stream_offset: u64) -> DetsignRow {
    let mut rng = stream(seed, streams::MONTE_CARLO + stream_offset);
    let positive = (0..n).filter(|_| dist.draw(&mut rng).det().expect("square") > 0.0).count();
    let (ci_low, ci_high) = wilson_interval(positive, n, CI_Z);
    DetsignRow { distribution: dist.label(), samples: n, positive, p_hat: positive as f64 / n as f64, ci_low, ci_high }
}

/// Single Gaussian, product of `depth` Gaussians, and the identity sanity path.
pub fn run_detsign(cfg: &DetsignConfig) -> Result<Vec<DetsignRow>> {
    cfg.validate()?;
    let dists = [Distribution::Gaussian, Distribution::Product(cfg.depth), Distribution::Identity];
    Ok(dists.iter().enumerate().map(|(k, d)| estimate(*d, cfg.samples, cfg.seed, k as u64)).collect())
}

pub fn write_rows<W: Write>(rows: &[DetsignRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["distribution", "samples", "positive", "p_hat", "ci_low", "ci_high"])?;
    for r in rows {
        out.write_record([
            r.distribution.clone(),
            r.samples.to_string(),
            r.positive.to_string(),
            fmt_f64(r.p_hat),
            fmt_f64(r.ci_low),
            fmt_f64(r.ci_high),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
