use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// First 16 hex digits of the SHA-256 of `spec`'s compact JSON form. The spec
/// carries the seed, so the id covers both.
pub fn run_id<T: Serialize>(spec: &T) -> String {
    let bytes = serde_json::to_vec(spec).expect("run spec serializes");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: u64,
    pub converged: bool,
    pub final_loss: f64,
    /// |first unobserved entry| at the last logged sample.
    pub final_entry: f64,
    pub samples: usize,
    /// Init draws used to meet the determinant-sign condition.
    pub init_draws: usize,
    /// Set when training stopped on the divergence guard.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord<S> {
    pub run_id: String,
    pub config: S,
    pub trajectory_csv: PathBuf,
    pub summary: RunSummary,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{presets, ExperimentConfig, MatfacConfig};
    use std::collections::HashSet;

    fn sweep(name: &str) -> MatfacConfig {
        match ExperimentConfig::preset(name).unwrap() {
            ExperimentConfig::MatfacSweep(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn stable_under_reserialization() {
        for spec in sweep("matfac-depth3").runs() {
            let text = serde_json::to_string_pretty(&spec).unwrap();
            let back: crate::config::MatfacRunSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(run_id(&back), run_id(&spec));
        }
    }

    #[test]
    fn injective_over_preset_grids() {
        let mut ids = HashSet::new();
        let mut n = 0;
        for name in &presets::NAMES[..3] {
            let mut c = sweep(name);
            c.seeds = (0..10).collect();
            for init in [implreg_core::matfac::InitKind::Balanced, implreg_core::matfac::InitKind::Unbalanced] {
                c.init = init;
                for spec in c.runs() {
                    ids.insert(run_id(&spec));
                    n += 1;
                }
            }
        }
        assert_eq!(ids.len(), n);
    }

    #[test]
    fn seed_changes_id() {
        let mut spec = sweep("matfac-depth2").runs()[0].clone();
        let a = run_id(&spec);
        spec.seed += 1;
        assert_ne!(a, run_id(&spec));
        assert_eq!(a.len(), 16);
    }
}
