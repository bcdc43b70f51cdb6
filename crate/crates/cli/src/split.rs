//! Train / validation / test partitions of an observation list.

use std::collections::BTreeSet;

use objreid_core::curation::ObservationRecord;
use objreid_core::seed;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

fn default_val_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum SplitConfig {
    /// Whole sequences per split. Sequences not listed are ignored.
    Sequence { train_sequences: Vec<String>, val_sequences: Vec<String>, test_sequences: Vec<String> },
    /// Instances with `center[axis] <= threshold` train (a seeded
    /// `val_fraction` of them validate); the rest test.
    Region {
        axis: Axis,
        threshold: f64,
        #[serde(default = "default_val_fraction")]
        val_fraction: f64,
    },
}

/// Indices into the observation list.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Queries come from `held_out`; references from `held_out` and train.
    pub fn eval_sets(&self, held_out: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut pool = held_out.to_vec();
        pool.extend_from_slice(&self.train);
        pool.sort_unstable();
        (held_out.to_vec(), pool)
    }
}

pub fn assign(cfg: &SplitConfig, obs: &[ObservationRecord], run_seed: u64) -> Result<Splits, CliError> {
    let mut s = Splits::default();
    match cfg {
        SplitConfig::Sequence { train_sequences, val_sequences, test_sequences } => {
            let sets: Vec<BTreeSet<&str>> = [train_sequences, val_sequences, test_sequences]
                .iter()
                .map(|v| v.iter().map(String::as_str).collect())
                .collect();
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                if let Some(x) = sets[a].intersection(&sets[b]).next() {
                    return Err(CliError::Usage(format!("sequence {x:?} is listed in two splits")));
                }
            }
            for (i, o) in obs.iter().enumerate() {
                let q = o.sequence_id.as_str();
                if sets[0].contains(q) {
                    s.train.push(i);
                } else if sets[1].contains(q) {
                    s.val.push(i);
                } else if sets[2].contains(q) {
                    s.test.push(i);
                }
            }
        }
        SplitConfig::Region { axis, threshold, val_fraction } => {
            if !(0.0..1.0).contains(val_fraction) {
                return Err(CliError::Usage("val_fraction must be in [0, 1)".into()));
            }
            let coord = |o: &ObservationRecord| match axis {
                Axis::X => o.object_center.x,
                Axis::Y => o.object_center.y,
            };
            let mut train_ids: Vec<u64> = obs
                .iter()
                .filter(|o| coord(o) <= *threshold)
                .map(|o| o.instance_id)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            train_ids.shuffle(&mut seed::rng(seed::stage(run_seed, "region-split")));
            let n_val = ((train_ids.len() as f64) * val_fraction).round() as usize;
            let n_val = if *val_fraction > 0.0 && train_ids.len() >= 2 { n_val.max(1) } else { n_val };
            let val_ids: BTreeSet<u64> = train_ids[..n_val].iter().copied().collect();
            for (i, o) in obs.iter().enumerate() {
                if coord(o) > *threshold {
                    s.test.push(i);
                } else if val_ids.contains(&o.instance_id) {
                    s.val.push(i);
                } else {
                    s.train.push(i);
                }
            }
        }
    }
    Ok(s)
}
