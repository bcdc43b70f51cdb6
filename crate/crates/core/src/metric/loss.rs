use super::MetricError;
use crate::par::{self, Exec};

/// Scalar loss plus its gradient with respect to every input embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
    /// Anchors that had at least one positive and so contributed.
    pub anchors: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Supervised contrastive loss over a labelled batch.
///
/// Each anchor term is `(1/|P(i)|) Σ_b [lse_{j≠i}(z_i·z_j/τ) − z_i·z_b/τ]`.
/// Terms are averaged over anchors that have a positive. With `use_log = false`
/// the inner log is dropped and the term becomes `−(1/|P(i)|) Σ_b softmax_ib`.
pub fn supcon_loss(z: &[Vec<f64>], labels: &[u64], tau: f64, use_log: bool) -> Result<LossOutput, MetricError> {
    supcon_loss_with(Exec::default(), z, labels, tau, use_log)
}

pub fn supcon_loss_with(
    exec: Exec,
    z: &[Vec<f64>],
    labels: &[u64],
    tau: f64,
    use_log: bool,
) -> Result<LossOutput, MetricError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(MetricError::Config(format!("temperature must be positive, got {tau}")));
    }
    if z.len() != labels.len() {
        return Err(MetricError::Shape(format!("{} embeddings but {} labels", z.len(), labels.len())));
    }
    let n = z.len();
    let sim: Vec<Vec<f64>> = par::map_range(exec, n, |i| (0..n).map(|j| dot(&z[i], &z[j]) / tau).collect());

    // Per-anchor term and coefficient row c_ij = dℓ_i/ds_ij.
    let rows = par::map_range(exec, n, |i| {
        let pos: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if pos.is_empty() || n < 2 {
            return None;
        }
        let s = &sim[i];
        let m = (0..n).filter(|&j| j != i).map(|j| s[j]).fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = (0..n).filter(|&j| j != i).map(|j| (s[j] - m).exp()).sum();
        let lse = m + sum.ln();
        let q: Vec<f64> = (0..n).map(|j| if j == i { 0.0 } else { (s[j] - lse).exp() }).collect();
        let inv = 1.0 / pos.len() as f64;
        let mut coef = vec![0.0; n];
        let term;
        if use_log {
            term = pos.iter().map(|&b| lse - s[b]).sum::<f64>() * inv;
            coef.copy_from_slice(&q);
            for &b in &pos {
                coef[b] -= inv;
            }
        } else {
            let qp: f64 = pos.iter().map(|&b| q[b]).sum();
            term = -qp * inv;
            for j in 0..n {
                coef[j] = inv * q[j] * qp;
            }
            for &b in &pos {
                coef[b] -= inv * q[b];
            }
        }
        coef[i] = 0.0;
        Some((term, coef))
    });

    let anchors = rows.iter().filter(|r| r.is_some()).count();
    let dim = z.first().map_or(0, |v| v.len());
    if anchors == 0 {
        return Ok(LossOutput { loss: 0.0, grads: vec![vec![0.0; dim]; n], anchors });
    }
    let scale = 1.0 / anchors as f64;
    let mut loss = 0.0;
    for (term, _) in rows.iter().flatten() {
        loss += term;
    }
    loss *= scale;

    let grads = par::map_range(exec, n, |k| {
        let mut g = vec![0.0; dim];
        for j in 0..n {
            let mut c = 0.0;
            if let Some((_, row)) = &rows[k] {
                c += row[j];
            }
            if let Some((_, row)) = &rows[j] {
                c += row[k];
            }
            if c != 0.0 {
                for (gd, zd) in g.iter_mut().zip(&z[j]) {
                    *gd += c * zd;
                }
            }
        }
        for v in g.iter_mut() {
            *v *= scale / tau;
        }
        g
    });
    if !loss.is_finite() {
        return Err(MetricError::Numerical("supervised contrastive loss is not finite".into()));
    }
    Ok(LossOutput { loss, grads, anchors })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrads {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `max(0, ‖a−p‖ − ‖a−n‖ + margin)` and its subgradient (zero at the kink and
/// for coincident points).
pub fn triplet_loss(a: &[f64], p: &[f64], n: &[f64], margin: f64) -> Result<(f64, TripletGrads), MetricError> {
    if !(margin >= 0.0) {
        return Err(MetricError::Config(format!("triplet margin must be nonnegative, got {margin}")));
    }
    let dim = a.len();
    let zeros = TripletGrads { anchor: vec![0.0; dim], positive: vec![0.0; dim], negative: vec![0.0; dim] };
    let (dp, dn) = (dist(a, p), dist(a, n));
    let v = dp - dn + margin;
    if v <= 0.0 {
        return Ok((0.0, zeros));
    }
    let mut g = zeros;
    for d in 0..dim {
        let up = if dp > 0.0 { (a[d] - p[d]) / dp } else { 0.0 };
        let un = if dn > 0.0 { (a[d] - n[d]) / dn } else { 0.0 };
        g.anchor[d] = up - un;
        g.positive[d] = -up;
        g.negative[d] = un;
    }
    Ok((v, g))
}

/// Batch-all triplet loss: mean over every (anchor, positive, negative) triple
/// in the batch.
pub fn batch_triplet_loss(z: &[Vec<f64>], labels: &[u64], margin: f64) -> Result<LossOutput, MetricError> {
    if z.len() != labels.len() {
        return Err(MetricError::Shape(format!("{} embeddings but {} labels", z.len(), labels.len())));
    }
    let n = z.len();
    let dim = z.first().map_or(0, |v| v.len());
    let mut grads = vec![vec![0.0; dim]; n];
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for p in (0..n).filter(|&p| p != i && labels[p] == labels[i]) {
            for q in (0..n).filter(|&q| labels[q] != labels[i]) {
                let (l, g) = triplet_loss(&z[i], &z[p], &z[q], margin)?;
                total += l;
                count += 1;
                for (k, gk) in [(i, &g.anchor), (p, &g.positive), (q, &g.negative)] {
                    for (a, b) in grads[k].iter_mut().zip(gk) {
                        *a += b;
                    }
                }
            }
        }
    }
    if count == 0 {
        return Ok(LossOutput { loss: 0.0, grads, anchors: 0 });
    }
    let s = 1.0 / count as f64;
    grads.iter_mut().flatten().for_each(|g| *g *= s);
    let anchors = (0..n).filter(|&i| (0..n).any(|p| p != i && labels[p] == labels[i])).count();
    Ok(LossOutput { loss: total * s, grads, anchors })
}
