use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::head::{HeadCache, HeadParams};
use super::loss::{batch_triplet_loss, supcon_loss_with};
use super::schedule::cosine_lr;
use super::MetricError;
use crate::par::{self, Exec};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Supcon,
    Triplet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_min: f64,
    pub temperature: f64,
    pub epochs_max: usize,
    pub patience: usize,
    pub instances_per_batch: usize,
    pub views_per_instance: usize,
    /// Not read from config files; callers derive it from their run seed.
    #[serde(skip)]
    pub seed: u64,
    pub loss: LossKind,
    pub triplet_margin: f64,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub momentum: f64,
    /// Keep the logarithm inside the contrastive term.
    pub use_log: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            lr_min: 0.0,
            temperature: 0.07,
            epochs_max: 100,
            patience: 10,
            instances_per_batch: 8,
            views_per_instance: 4,
            seed: 0,
            loss: LossKind::Supcon,
            triplet_margin: 0.2,
            hidden_dim: 768,
            out_dim: 128,
            momentum: 0.0,
            use_log: true,
        }
    }
}

impl TrainConfig {
    pub fn batch_size(&self) -> usize {
        self.instances_per_batch * self.views_per_instance
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        let bad = |m: &str| Err(MetricError::Config(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.lr_min >= 0.0 && self.lr_min <= self.lr) {
            return bad("need 0 <= lr_min <= lr and lr > 0");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.epochs_max == 0 {
            return bad("epochs_max must be at least 1");
        }
        if self.instances_per_batch < 2 || self.views_per_instance < 1 {
            return bad("need at least 2 instances per batch and 1 view per instance");
        }
        if self.hidden_dim == 0 || self.out_dim == 0 {
            return bad("head dimensions must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if !(self.triplet_margin >= 0.0) {
            return bad("triplet margin must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_map: f64,
    pub lr: f64,
}

/// Enough to resume the batch sampler exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub word_pos: u128,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation mAP.
    pub params: HeadParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_map: f64,
    pub stopped_early: bool,
    /// Instances that had fewer than K views and were drawn with replacement.
    pub resampled_instances: usize,
    /// Forward passes hit by the zero-norm guard.
    pub degenerate_normalizations: usize,
    pub rng_state: RngState,
}

/// One epoch's batches, as indices into the training set.
///
/// Every instance's views are shuffled and cut into groups of `K`; rounds of
/// shuffled instances are then cut into batches of `P` groups. An instance
/// with fewer than `K` views contributes one group drawn with replacement.
/// Batches with fewer than two instances are dropped.
pub fn epoch_batches(labels: &[u64], p: usize, k: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<usize>>, usize) {
    let mut by_label: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_label.entry(*l).or_default().push(i);
    }
    let mut resampled = 0;
    let mut groups: Vec<Vec<Vec<usize>>> = Vec::with_capacity(by_label.len());
    for views in by_label.values() {
        let mut v = views.clone();
        if v.len() < k {
            resampled += 1;
            let g = (0..k).map(|_| v[rng.random_range(0..v.len())]).collect();
            groups.push(vec![g]);
            continue;
        }
        v.shuffle(rng);
        groups.push(v.chunks_exact(k).map(|c| c.to_vec()).collect());
    }
    let rounds = groups.iter().map(|g| g.len()).max().unwrap_or(0);
    let mut batches = Vec::new();
    for r in 0..rounds {
        let mut live: Vec<usize> = (0..groups.len()).filter(|&i| groups[i].len() > r).collect();
        live.shuffle(rng);
        for chunk in live.chunks(p) {
            if chunk.len() < 2 {
                continue;
            }
            batches.push(chunk.iter().flat_map(|&i| groups[i][r].iter().copied()).collect());
        }
    }
    (batches, resampled)
}

/// Train the projection head with SGD and early stopping on validation mAP.
///
/// `evaluate` receives the current parameters after every epoch and returns
/// the validation mAP. The run is bitwise reproducible for a given seed.
pub fn train<F>(
    exec: Exec,
    reps: &[Vec<f64>],
    labels: &[u64],
    cfg: &TrainConfig,
    mut evaluate: F,
) -> Result<TrainOutcome, MetricError>
where
    F: FnMut(&HeadParams) -> Result<f64, MetricError>,
{
    cfg.validate()?;
    if reps.is_empty() {
        return Err(MetricError::EmptySet("training"));
    }
    if reps.len() != labels.len() {
        return Err(MetricError::Shape(format!("{} representations but {} labels", reps.len(), labels.len())));
    }
    let in_dim = reps[0].len();
    if let Some(bad) = reps.iter().position(|h| h.len() != in_dim) {
        return Err(MetricError::Shape(format!("representation {bad} has dim {}, expected {in_dim}", reps[bad].len())));
    }
    if reps.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MetricError::Numerical("non-finite training representation".into()));
    }

    let stream = seed::stage(cfg.seed, "train");
    let mut rng = seed::rng(stream);
    let mut params = HeadParams::init(in_dim, cfg.hidden_dim, cfg.out_dim, &mut rng);
    let mut velocity = if cfg.momentum > 0.0 { Some(vec![0.0; params.num_params()]) } else { None };

    let mut best = (params.clone(), f64::NEG_INFINITY, 0usize);
    let mut history = Vec::new();
    let mut since_best = 0;
    let mut resampled_instances = 0;
    let mut degenerate = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs_max {
        let lr = cosine_lr(epoch, cfg.epochs_max, cfg.lr, cfg.lr_min);
        let (batches, resampled) = epoch_batches(labels, cfg.instances_per_batch, cfg.views_per_instance, &mut rng);
        if epoch == 0 && resampled > 0 {
            log::info!(
                "{resampled} instances have fewer than {} views; sampling them with replacement",
                cfg.views_per_instance
            );
        }
        resampled_instances = resampled_instances.max(resampled);
        let mut loss_sum = 0.0;
        for batch in &batches {
            let inputs: Vec<&[f64]> = batch.iter().map(|&i| reps[i].as_slice()).collect();
            let caches: Vec<HeadCache> =
                par::map(exec, &inputs, |h| params.forward(h)).into_iter().collect::<Result<_, _>>()?;
            degenerate += caches.iter().filter(|c| c.degenerate).count();
            let z: Vec<Vec<f64>> = caches.iter().map(|c| c.z.clone()).collect();
            let blabels: Vec<u64> = batch.iter().map(|&i| labels[i]).collect();
            let out = match cfg.loss {
                LossKind::Supcon => supcon_loss_with(exec, &z, &blabels, cfg.temperature, cfg.use_log)?,
                LossKind::Triplet => batch_triplet_loss(&z, &blabels, cfg.triplet_margin)?,
            };
            if !out.loss.is_finite() {
                return Err(MetricError::Numerical(format!("loss diverged in epoch {}", epoch + 1)));
            }
            loss_sum += out.loss;
            let grads = params.backward_batch(exec, &inputs, &caches, &out.grads);
            let g = grads.flat();
            let mut flat = params.flat();
            match velocity.as_mut() {
                Some(v) => {
                    for ((w, vi), gi) in flat.iter_mut().zip(v.iter_mut()).zip(&g) {
                        *vi = cfg.momentum * *vi + gi;
                        *w -= lr * *vi;
                    }
                }
                None => {
                    for (w, gi) in flat.iter_mut().zip(&g) {
                        *w -= lr * gi;
                    }
                }
            }
            params.set_flat(&flat);
        }
        params.validate()?;
        let val_map = evaluate(&params)?;
        let train_loss = if batches.is_empty() { 0.0 } else { loss_sum / batches.len() as f64 };
        history.push(EpochRecord { epoch: epoch + 1, train_loss, val_map, lr });
        log::debug!("epoch {} loss {train_loss:.5} val mAP {val_map:.4} lr {lr:.5}", epoch + 1);
        if val_map > best.1 {
            best = (params.clone(), val_map, epoch + 1);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        params: best.0,
        history,
        best_epoch: best.2,
        best_val_map: best.1,
        stopped_early,
        resampled_instances,
        degenerate_normalizations: degenerate,
        rng_state: RngState { seed: stream, word_pos: rng.get_word_pos() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_set(instances: u64, views: usize, dim: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u64>) {
        let mut rng = crate::seed::rng(seed);
        let protos: Vec<Vec<f64>> =
            (0..instances).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut reps = Vec::new();
        let mut labels = Vec::new();
        for (i, p) in protos.iter().enumerate() {
            for _ in 0..views {
                reps.push(p.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect());
                labels.push(i as u64);
            }
        }
        (reps, labels)
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig { hidden_dim: 16, out_dim: 8, epochs_max: 30, temperature: 0.2, lr: 0.1, ..Default::default() }
    }

    #[test]
    fn batches_have_pk_layout_and_no_repeats() {
        let labels: Vec<u64> = (0..20).flat_map(|i| std::iter::repeat_n(i, 9)).collect();
        let mut rng = crate::seed::rng(1);
        let (batches, resampled) = epoch_batches(&labels, 8, 4, &mut rng);
        assert_eq!(resampled, 0);
        let mut seen = std::collections::HashSet::new();
        for b in &batches {
            assert_eq!(b.len() % 4, 0);
            assert!(b.len() <= 32);
            for chunk in b.chunks(4) {
                assert!(chunk.iter().all(|&i| labels[i] == labels[chunk[0]]));
            }
            for &i in b {
                assert!(seen.insert(i), "view {i} used twice in one epoch");
            }
        }
        // two full groups per instance
        assert_eq!(seen.len(), 20 * 8);
    }

    #[test]
    fn short_instances_are_resampled() {
        let labels = vec![0, 0, 1, 1, 1, 1, 2];
        let mut rng = crate::seed::rng(2);
        let (batches, resampled) = epoch_batches(&labels, 8, 4, &mut rng);
        assert_eq!(resampled, 2);
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].len(), 12);
    }

    #[test]
    fn constant_evaluator_stops_after_patience_plus_one() {
        let (reps, labels) = toy_set(6, 6, 8, 3);
        let cfg = TrainConfig { patience: 4, ..small_cfg() };
        let out = train(Exec::Sequential, &reps, &labels, &cfg, |_| Ok(0.5)).unwrap();
        assert_eq!(out.history.len(), 5);
        assert!(out.stopped_early);
        assert_eq!(out.best_epoch, 1);
    }

    #[test]
    fn returns_best_epoch_parameters() {
        let (reps, labels) = toy_set(6, 6, 8, 4);
        let cfg = TrainConfig { epochs_max: 8, ..small_cfg() };
        let mut snapshots = Vec::new();
        let scores = [0.1, 0.3, 0.9, 0.2, 0.4, 0.5, 0.6, 0.7];
        let out = train(Exec::Sequential, &reps, &labels, &cfg, |p| {
            snapshots.push(p.clone());
            Ok(scores[snapshots.len() - 1])
        })
        .unwrap();
        assert_eq!(out.best_epoch, 3);
        assert_eq!(out.params, snapshots[2]);
        assert_eq!(out.history.len(), 8);
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let (reps, labels) = toy_set(10, 5, 8, 5);
        let cfg = TrainConfig { epochs_max: 5, ..small_cfg() };
        let run = |exec| {
            let mut traj = Vec::new();
            train(exec, &reps, &labels, &cfg, |p| {
                traj.push(p.flat());
                Ok(traj.len() as f64)
            })
            .unwrap();
            traj
        };
        let a = run(Exec::Sequential);
        assert_eq!(a, run(Exec::Sequential));
        assert_eq!(a, run(Exec::Parallel));
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let (reps, labels) = toy_set(8, 8, 8, 6);
        let out = train(Exec::Sequential, &reps, &labels, &small_cfg(), |_| Ok(0.0)).unwrap();
        let first = out.history.first().unwrap().train_loss;
        assert!(out.history.len() == 11);
        let cfg = TrainConfig { patience: 30, ..small_cfg() };
        let full = train(Exec::Sequential, &reps, &labels, &cfg, |_| Ok(0.0)).unwrap();
        assert!(full.history.last().unwrap().train_loss < 0.8 * first);
    }

    #[test]
    fn invalid_configs_rejected() {
        let (reps, labels) = toy_set(3, 3, 4, 7);
        for cfg in [
            TrainConfig { temperature: 0.0, ..small_cfg() },
            TrainConfig { patience: 0, ..small_cfg() },
            TrainConfig { instances_per_batch: 1, ..small_cfg() },
        ] {
            assert!(matches!(train(Exec::Sequential, &reps, &labels, &cfg, |_| Ok(0.0)), Err(MetricError::Config(_))));
        }
        assert!(train(Exec::Sequential, &[], &[], &small_cfg(), |_| Ok(0.0)).is_err());
    }
}
