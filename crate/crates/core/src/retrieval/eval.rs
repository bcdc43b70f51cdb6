use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::protocol::{build_retrieval_set, EvalConfig, EvalItem, SimilarityMode};
use super::RetrievalError;
use crate::par::{self, Exec};

/// Average precision of a ranked relevance list with `n_positives` relevant items.
pub fn average_precision(ranked: &[bool], n_positives: usize) -> f64 {
    if n_positives == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in ranked.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    sum / n_positives as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDetail {
    pub obs_id: u64,
    pub instance_id: u64,
    pub set_size: usize,
    pub positives: usize,
    /// `None` when the query had no positive.
    pub ap: Option<f64>,
    /// 1-based rank of the first positive.
    pub first_hit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(rename = "mAP")]
    pub map: f64,
    pub top_k: Vec<TopK>,
    /// `cmc[k-1]` is the top-k accuracy.
    pub cmc: Vec<f64>,
    /// Means over queries with at least one positive.
    pub avg_matches: f64,
    pub avg_set_size: f64,
    /// Means over every query with a non-empty set.
    pub avg_matches_all: f64,
    pub avg_set_size_all: f64,
    pub n_queries: usize,
    pub n_evaluated: usize,
    pub n_empty_set: usize,
    pub n_no_positive: usize,
    pub queries: Vec<QueryDetail>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn score(q: &[f64], qn: f64, r: &[f64], rn: f64, mode: SimilarityMode) -> f64 {
    match mode {
        SimilarityMode::Cosine => q.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() / (qn * rn),
        SimilarityMode::Euclidean => -q.iter().zip(r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
    }
}

pub fn evaluate(queries: &[EvalItem], pool: &[EvalItem], cfg: &EvalConfig) -> Result<EvalReport, RetrievalError> {
    evaluate_with(Exec::default(), queries, pool, cfg)
}

/// Rank every query against its retrieval set and aggregate in query order.
pub fn evaluate_with(
    exec: Exec,
    queries: &[EvalItem],
    pool: &[EvalItem],
    cfg: &EvalConfig,
) -> Result<EvalReport, RetrievalError> {
    cfg.validate()?;
    let dim = queries.first().or(pool.first()).map_or(0, |i| i.embedding.len());
    for it in queries.iter().chain(pool) {
        if it.embedding.len() != dim {
            return Err(RetrievalError::DimMismatch(dim, it.embedding.len()));
        }
    }
    let pool_norms: Vec<f64> = pool.iter().map(|p| norm(&p.embedding)).collect();
    if cfg.similarity == SimilarityMode::Cosine
        && (pool_norms.contains(&0.0) || queries.iter().any(|q| norm(&q.embedding) == 0.0))
    {
        return Err(RetrievalError::ZeroVector);
    }

    let details = par::map(exec, queries, |q| {
        let set = build_retrieval_set(q, pool, cfg);
        let qn = norm(&q.embedding);
        let mut ranked: Vec<(f64, u64, bool)> = set
            .members
            .iter()
            .map(|&i| {
                let r = &pool[i];
                (score(&q.embedding, qn, &r.embedding, pool_norms[i], cfg.similarity), r.obs_id, false)
            })
            .collect();
        for (slot, &i) in set.members.iter().enumerate() {
            ranked[slot].2 = set.positives.binary_search(&i).is_ok();
        }
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        let rel: Vec<bool> = ranked.iter().map(|r| r.2).collect();
        let n_pos = set.positives.len();
        QueryDetail {
            obs_id: q.obs_id,
            instance_id: q.instance_id,
            set_size: set.members.len(),
            positives: n_pos,
            ap: (n_pos > 0).then(|| average_precision(&rel, n_pos)),
            first_hit: rel.iter().position(|&r| r).map(|p| p + 1),
        }
    });

    let mut n_empty_set = 0;
    let mut n_no_positive = 0;
    let mut ap_sum = 0.0;
    let mut matches = (0usize, 0usize);
    let mut matches_all = (0usize, 0usize, 0usize);
    let mut hit_ranks = Vec::new();
    for d in &details {
        if d.set_size == 0 {
            n_empty_set += 1;
            continue;
        }
        matches_all = (matches_all.0 + d.positives, matches_all.1 + d.set_size, matches_all.2 + 1);
        match d.ap {
            None => n_no_positive += 1,
            Some(ap) => {
                ap_sum += ap;
                matches = (matches.0 + d.positives, matches.1 + d.set_size);
                hit_ranks.push(d.first_hit.expect("query with positives has a first hit"));
            }
        }
    }
    let n = hit_ranks.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { hit_ranks.iter().filter(|&&r| r <= k).count() as f64 / n as f64 };
    let mean = |s: usize, c: usize| if c == 0 { 0.0 } else { s as f64 / c as f64 };
    if n_empty_set > 0 || n_no_positive > 0 {
        log::debug!("{n_empty_set} queries with empty sets and {n_no_positive} without positives were skipped");
    }
    Ok(EvalReport {
        map: if n == 0 { 0.0 } else { ap_sum / n as f64 },
        top_k: cfg.top_k.iter().map(|&k| TopK { k, accuracy: frac(k) }).collect(),
        cmc: (1..=cfg.cmc_max_k).map(frac).collect(),
        avg_matches: mean(matches.0, n),
        avg_set_size: mean(matches.1, n),
        avg_matches_all: mean(matches_all.0, matches_all.2),
        avg_set_size_all: mean(matches_all.1, matches_all.2),
        n_queries: queries.len(),
        n_evaluated: n,
        n_empty_set,
        n_no_positive,
        queries: details,
    })
}
