use std::fmt::Write as _;
use std::path::Path;

use objreid_core::curation::ObservationRecord;
use objreid_core::formats::{read_features, read_jsonl, write_checkpoint};
use objreid_core::metric::{embed_all_with, train, HeadParams, MetricError, RngState, TrainConfig};
use objreid_core::par::Exec;
use objreid_core::retrieval::{evaluate_with, EvalConfig, EvalItem};
use serde::{Deserialize, Serialize};

use super::{class_counts, eval_item, lookup_features, Context};
use crate::error::CliError;
use crate::manifest::{Manifest, OutDir};
use crate::split::{assign, Splits};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingState {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_map: f64,
    pub stopped_early: bool,
    pub rng: RngState,
    pub resampled_instances: usize,
    pub degenerate_normalizations: usize,
}

/// Observation ids per split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub train: Vec<u64>,
    pub val: Vec<u64>,
    pub test: Vec<u64>,
}

/// mAP of `params` with queries `queries` against `pool` (indices into `obs`).
pub fn split_map(
    exec: Exec,
    params: Option<&HeadParams>,
    reps: &[Vec<f64>],
    obs: &[ObservationRecord],
    queries: &[usize],
    pool: &[usize],
    cfg: &EvalConfig,
) -> Result<f64, CliError> {
    let items = |idx: &[usize]| -> Result<Vec<EvalItem>, CliError> {
        let h: Vec<Vec<f64>> = idx.iter().map(|&i| reps[i].clone()).collect();
        let z = match params {
            Some(p) => embed_all_with(exec, p, &h)?,
            None => h,
        };
        Ok(idx.iter().zip(z).map(|(&i, z)| eval_item(&obs[i], z)).collect())
    };
    Ok(evaluate_with(exec, &items(queries)?, &items(pool)?, cfg)?.map)
}

pub fn eval_config(ctx: &Context) -> EvalConfig {
    let e = &ctx.cfg.eval;
    EvalConfig {
        similarity: e.similarity,
        top_k: e.top_k.clone(),
        cmc_max_k: e.cmc_max_k,
        hard_rule: e.hard_rule,
        ..EvalConfig::default()
    }
}

type Loaded = (Vec<ObservationRecord>, Vec<Vec<f64>>, Option<Splits>);

/// Load observations and their features, and partition them.
pub fn load_split(ctx: &Context, features: &Path, observations: &Path) -> Result<Loaded, CliError> {
    let obs: Vec<ObservationRecord> = read_jsonl(observations)?;
    let table = read_features(features)?;
    let reps = lookup_features(&table, &obs)?;
    let splits = ctx.cfg.split.as_ref().map(|s| assign(s, &obs, ctx.cfg.seed)).transpose()?;
    Ok((obs, reps, splits))
}

pub fn run(ctx: &Context, features: &Path, observations: &Path, out: &Path) -> Result<Manifest, CliError> {
    if ctx.cfg.split.is_none() {
        return Err(CliError::Usage("training needs a [split] section in the config".into()));
    }
    let (obs, reps, splits) = load_split(ctx, features, observations)?;
    let splits = splits.expect("split configured");
    if splits.train.is_empty() {
        return Err(CliError::Data("training split is empty".into()));
    }
    if splits.val.is_empty() {
        return Err(CliError::Data("validation split is empty".into()));
    }
    let mut manifest = Manifest::new("train", &ctx.cfg);
    manifest.input(features)?;
    manifest.input(observations)?;

    let ecfg = eval_config(ctx);
    let (queries, pool) = splits.eval_sets(&splits.val);
    let train_reps: Vec<Vec<f64>> = splits.train.iter().map(|&i| reps[i].clone()).collect();
    let labels: Vec<u64> = splits.train.iter().map(|&i| obs[i].instance_id).collect();
    let tcfg = TrainConfig { seed: ctx.cfg.stage_seed("train"), ..ctx.cfg.train.clone() };
    let outcome = train(ctx.exec, &train_reps, &labels, &tcfg, |p| {
        split_map(ctx.exec, Some(p), &reps, &obs, &queries, &pool, &ecfg).map_err(|e| match e {
            CliError::Numerical(m) => MetricError::Numerical(m),
            other => MetricError::Config(other.to_string()),
        })
    })?;

    let mut o = OutDir::create(out)?;
    write_checkpoint(&o.path("head.bin"), &outcome.params)?;
    o.record("head.bin")?;
    let mut csv = String::from("epoch,train_loss,val_map,lr\n");
    for r in &outcome.history {
        writeln!(csv, "{},{},{},{}", r.epoch, r.train_loss, r.val_map, r.lr).expect("string write");
    }
    o.write("history.csv", csv.as_bytes())?;
    o.write_json(
        "training_state.json",
        &TrainingState {
            epochs_run: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            best_val_map: outcome.best_val_map,
            stopped_early: outcome.stopped_early,
            rng: outcome.rng_state.clone(),
            resampled_instances: outcome.resampled_instances,
            degenerate_normalizations: outcome.degenerate_normalizations,
        },
    )?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| obs[i].obs_id).collect();
    o.write_json(
        "split.json",
        &SplitFile { train: ids(&splits.train), val: ids(&splits.val), test: ids(&splits.test) },
    )?;

    manifest.counts = class_counts(splits.train.iter().map(|&i| &obs[i]));
    manifest.note("train_observations", splits.train.len());
    manifest.note("val_observations", splits.val.len());
    manifest.note("test_observations", splits.test.len());
    manifest.note("best_epoch", outcome.best_epoch);
    manifest.note("best_val_map", outcome.best_val_map);
    manifest.note("stopped_early", outcome.stopped_early);
    o.finish(manifest, &ctx.cfg)
}
