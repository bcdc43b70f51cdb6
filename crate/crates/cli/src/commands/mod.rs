//! One module per subcommand. Every `run` returns the manifest it wrote.

pub mod curate;
pub mod eval;
pub mod patch;
pub mod synth;
pub mod train;

use std::collections::{BTreeMap, BTreeSet};

use objreid_core::curation::ObservationRecord;
use objreid_core::formats::FeatureTable;
use objreid_core::metric::RepresentationProvider;
use objreid_core::par::Exec;
use objreid_core::retrieval::EvalItem;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::ClassCounts;

/// Effective configuration plus execution strategy.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: RunConfig,
    pub exec: Exec,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Self {
        Self { cfg, exec: Exec::default() }
    }
}

/// Distinct instances and observation counts per class.
pub fn class_counts<'a>(obs: impl IntoIterator<Item = &'a ObservationRecord>) -> BTreeMap<String, ClassCounts> {
    let mut inst: BTreeMap<String, BTreeSet<u64>> = BTreeMap::new();
    let mut counts: BTreeMap<String, ClassCounts> = BTreeMap::new();
    for o in obs {
        inst.entry(o.class_name.clone()).or_default().insert(o.instance_id);
        counts.entry(o.class_name.clone()).or_default().observations += 1;
    }
    for (c, ids) in inst {
        counts.get_mut(&c).expect("class seen").instances = ids.len();
    }
    counts
}

/// Representation of every observation, in order.
pub fn lookup_features(table: &FeatureTable, obs: &[ObservationRecord]) -> Result<Vec<Vec<f64>>, CliError> {
    obs.iter()
        .map(|o| {
            table
                .representation(o.obs_id)
                .ok_or_else(|| CliError::Data(format!("no feature row for observation {}", o.obs_id)))
        })
        .collect()
}

pub fn eval_item(o: &ObservationRecord, embedding: Vec<f64>) -> EvalItem {
    EvalItem {
        obs_id: o.obs_id,
        embedding,
        instance_id: o.instance_id,
        class_name: o.class_name.clone(),
        sequence_id: o.sequence_id.clone(),
        weather: o.weather,
        cam_pose: o.cam_pose,
        object_center: o.object_center,
    }
}
