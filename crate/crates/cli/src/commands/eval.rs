use std::fmt::Write as _;
use std::path::Path;

use objreid_core::formats::read_checkpoint;
use objreid_core::metric::embed_all_with;
use objreid_core::retrieval::{
    evaluate_with, EvalConfig, EvalItem, EvalReport, IlluminationFilter, TopK, ViewpointFilter,
};
use serde::{Deserialize, Serialize};

use super::train::{eval_config, load_split};
use super::{class_counts, eval_item, Context};
use crate::error::CliError;
use crate::manifest::{Manifest, OutDir};

/// One (illumination, viewpoint) cell of the breakdown table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub illumination: IlluminationFilter,
    pub viewpoint: ViewpointFilter,
    #[serde(rename = "mAP")]
    pub map: f64,
    pub top_k: Vec<TopK>,
    pub avg_matches: f64,
    pub avg_set_size: f64,
    pub n_evaluated: usize,
    pub n_empty_set: usize,
    pub n_no_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// "test" with a configured split, else "all".
    pub queries_from: String,
    pub embedding: String,
    pub cells: Vec<Cell>,
    /// Full detail for the unfiltered cell.
    pub overall: EvalReport,
}

pub const CELLS: [(IlluminationFilter, ViewpointFilter); 6] = [
    (IlluminationFilter::All, ViewpointFilter::All),
    (IlluminationFilter::Similar, ViewpointFilter::All),
    (IlluminationFilter::Different, ViewpointFilter::All),
    (IlluminationFilter::All, ViewpointFilter::Easy),
    (IlluminationFilter::All, ViewpointFilter::Medium),
    (IlluminationFilter::All, ViewpointFilter::Hard),
];

pub fn run(
    ctx: &Context,
    features: &Path,
    observations: &Path,
    checkpoint: Option<&Path>,
    out: &Path,
) -> Result<Manifest, CliError> {
    let (obs, mut reps, splits) = load_split(ctx, features, observations)?;
    let mut manifest = Manifest::new("eval", &ctx.cfg);
    manifest.input(features)?;
    manifest.input(observations)?;
    if let Some(path) = checkpoint {
        let params = read_checkpoint(path)?;
        manifest.input(path)?;
        if let Some(h) = reps.first() {
            if h.len() != params.in_dim {
                return Err(CliError::Data(format!(
                    "checkpoint expects {}-dim features but {} has {}",
                    params.in_dim,
                    features.display(),
                    h.len()
                )));
            }
        }
        reps = embed_all_with(ctx.exec, &params, &reps)?;
    }
    let all: Vec<usize> = (0..obs.len()).collect();
    let (queries, pool, from) = match &splits {
        Some(s) => {
            let (q, p) = s.eval_sets(&s.test);
            (q, p, "test")
        }
        None => (all.clone(), all, "all"),
    };
    let items = |idx: &[usize]| -> Vec<EvalItem> { idx.iter().map(|&i| eval_item(&obs[i], reps[i].clone())).collect() };
    let (qi, pi) = (items(&queries), items(&pool));

    let base = eval_config(ctx);
    let mut cells = Vec::new();
    let mut overall = None;
    for (illumination, viewpoint) in CELLS {
        let cfg = EvalConfig { illumination, viewpoint, ..base.clone() };
        let r = evaluate_with(ctx.exec, &qi, &pi, &cfg)?;
        cells.push(Cell {
            illumination,
            viewpoint,
            map: r.map,
            top_k: r.top_k.clone(),
            avg_matches: r.avg_matches,
            avg_set_size: r.avg_set_size,
            n_evaluated: r.n_evaluated,
            n_empty_set: r.n_empty_set,
            n_no_positive: r.n_no_positive,
        });
        if overall.is_none() {
            overall = Some(r);
        }
    }
    let overall = overall.expect("first cell is unfiltered");

    let mut o = OutDir::create(out)?;
    let mut csv = String::from("k,accuracy\n");
    for (k, a) in overall.cmc.iter().enumerate() {
        writeln!(csv, "{},{a}", k + 1).expect("string write");
    }
    o.write("cmc.csv", csv.as_bytes())?;
    manifest.counts = class_counts(queries.iter().map(|&i| &obs[i]));
    manifest.note("queries", queries.len());
    manifest.note("pool", pool.len());
    manifest.note("mAP", overall.map);
    let report = Report {
        queries_from: from.into(),
        embedding: if checkpoint.is_some() { "head".into() } else { "features".into() },
        cells,
        overall,
    };
    o.write_json("report.json", &report)?;
    o.finish(manifest, &ctx.cfg)
}
