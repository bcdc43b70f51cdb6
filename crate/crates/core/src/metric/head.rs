use rand::Rng;

use super::MetricError;
use crate::par::{self, Exec};

/// Guard for normalizing a zero pre-activation.
pub const NORM_EPS: f64 = 1e-12;

/// One-hidden-layer MLP `z = normalize(W2 · relu(W1 · h + b1) + b2)`.
///
/// `w1` is `hidden × in_dim` and `w2` is `out_dim × hidden`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub in_dim: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Gradients with the same layout as [`HeadParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct HeadCache {
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
    pub norm: f64,
    pub z: Vec<f64>,
    /// The pre-normalization vector was shorter than [`NORM_EPS`].
    pub degenerate: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl HeadParams {
    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            hidden,
            out_dim,
            w1: vec![0.0; hidden * in_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; out_dim * hidden],
            b2: vec![0.0; out_dim],
        }
    }

    /// Uniform `±1/√fan_in` initialization for weights and biases.
    pub fn init<R: Rng>(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(in_dim, hidden, out_dim);
        let b1 = 1.0 / (in_dim as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        for w in p.w1.iter_mut().chain(p.b1.iter_mut()) {
            *w = rng.random_range(-b1..b1);
        }
        for w in p.w2.iter_mut().chain(p.b2.iter_mut()) {
            *w = rng.random_range(-b2..b2);
        }
        p
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        let ok = self.w1.len() == self.hidden * self.in_dim
            && self.b1.len() == self.hidden
            && self.w2.len() == self.out_dim * self.hidden
            && self.b2.len() == self.out_dim;
        if !ok {
            return Err(MetricError::Shape("head parameter buffers do not match their dims".into()));
        }
        if !self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).all(|v| v.is_finite()) {
            return Err(MetricError::Numerical("non-finite head parameter".into()));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn forward(&self, h: &[f64]) -> Result<HeadCache, MetricError> {
        if h.len() != self.in_dim {
            return Err(MetricError::Shape(format!(
                "representation has dim {}, head expects {}",
                h.len(),
                self.in_dim
            )));
        }
        let pre: Vec<f64> =
            (0..self.hidden).map(|k| dot(&self.w1[k * self.in_dim..(k + 1) * self.in_dim], h) + self.b1[k]).collect();
        let act: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
        let u: Vec<f64> = (0..self.out_dim)
            .map(|o| dot(&self.w2[o * self.hidden..(o + 1) * self.hidden], &act) + self.b2[o])
            .collect();
        let len = dot(&u, &u).sqrt();
        let degenerate = len < NORM_EPS;
        let norm = len.max(NORM_EPS);
        let z = u.iter().map(|v| v / norm).collect();
        Ok(HeadCache { pre, act, norm, z, degenerate })
    }

    /// Unit embedding of one representation.
    pub fn embed(&self, h: &[f64]) -> Result<Vec<f64>, MetricError> {
        self.forward(h).map(|c| c.z)
    }

    /// Gradient of `dL/du` given `dL/dz`, through the normalization.
    fn grad_pre_norm(cache: &HeadCache, gz: &[f64]) -> Vec<f64> {
        if cache.degenerate {
            return gz.iter().map(|g| g / cache.norm).collect();
        }
        let zg = dot(&cache.z, gz);
        gz.iter().zip(&cache.z).map(|(g, z)| (g - z * zg) / cache.norm).collect()
    }

    /// Per-item backward: `(dL/du, dL/dpre)`.
    fn item_backward(&self, cache: &HeadCache, gz: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let du = Self::grad_pre_norm(cache, gz);
        let mut dpre = vec![0.0; self.hidden];
        for (o, d) in du.iter().enumerate() {
            let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            for (k, w) in row.iter().enumerate() {
                dpre[k] += d * w;
            }
        }
        for (d, p) in dpre.iter_mut().zip(&cache.pre) {
            if *p <= 0.0 {
                *d = 0.0;
            }
        }
        (du, dpre)
    }

    /// Gradient of a scalar loss w.r.t. the input representation, given `dL/dz`.
    pub fn input_grad(&self, cache: &HeadCache, gz: &[f64]) -> Vec<f64> {
        let (_, dpre) = self.item_backward(cache, gz);
        let mut dh = vec![0.0; self.in_dim];
        for (k, d) in dpre.iter().enumerate() {
            if *d != 0.0 {
                for (j, w) in self.w1[k * self.in_dim..(k + 1) * self.in_dim].iter().enumerate() {
                    dh[j] += d * w;
                }
            }
        }
        dh
    }

    /// Parameter gradients summed over a batch, in item order.
    pub fn backward_batch(&self, exec: Exec, inputs: &[&[f64]], caches: &[HeadCache], gz: &[Vec<f64>]) -> HeadGrads {
        let items: Vec<usize> = (0..inputs.len()).collect();
        let back = par::map(exec, &items, |&i| self.item_backward(&caches[i], &gz[i]));
        let w1_rows = par::map_range(exec, self.hidden, |k| {
            let mut row = vec![0.0; self.in_dim];
            for (i, (_, dpre)) in back.iter().enumerate() {
                let d = dpre[k];
                if d != 0.0 {
                    for (r, x) in row.iter_mut().zip(inputs[i]) {
                        *r += d * x;
                    }
                }
            }
            row
        });
        let w2_rows = par::map_range(exec, self.out_dim, |o| {
            let mut row = vec![0.0; self.hidden];
            for (i, (du, _)) in back.iter().enumerate() {
                let d = du[o];
                for (r, a) in row.iter_mut().zip(&caches[i].act) {
                    *r += d * a;
                }
            }
            row
        });
        let mut b1 = vec![0.0; self.hidden];
        let mut b2 = vec![0.0; self.out_dim];
        for (du, dpre) in &back {
            for (b, d) in b1.iter_mut().zip(dpre) {
                *b += d;
            }
            for (b, d) in b2.iter_mut().zip(du) {
                *b += d;
            }
        }
        HeadGrads { w1: w1_rows.concat(), b1, w2: w2_rows.concat(), b2 }
    }

    /// Flat view of all parameters, in `w1, b1, w2, b2` order.
    pub fn flat(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let (a, rest) = v.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }
}

impl HeadGrads {
    pub fn flat(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }
}

/// Embed every representation, preserving order.
pub fn embed_all(params: &HeadParams, reps: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, MetricError> {
    embed_all_with(Exec::default(), params, reps)
}

pub fn embed_all_with(exec: Exec, params: &HeadParams, reps: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, MetricError> {
    par::map(exec, reps, |h| params.embed(h)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
    }

    fn random_head(in_dim: usize, hidden: usize, out: usize, seed: u64) -> HeadParams {
        HeadParams::init(in_dim, hidden, out, &mut crate::seed::rng(seed))
    }

    #[test]
    fn selecting_one_hidden_unit_gives_basis_vector() {
        let mut p = HeadParams::zeros(3, 3, 3);
        p.w1[0] = 1.0; // hidden 0 = h[0]
        p.w2[3] = 2.0; // out 1 = 2 * hidden 0
        let z = p.embed(&[0.7, -1.0, 5.0]).unwrap();
        assert_eq!(z, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn output_is_unit() {
        let p = random_head(16, 12, 8, 1);
        let mut rng = crate::seed::rng(2);
        for _ in 0..100 {
            let h: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
            let z = p.embed(&h).unwrap();
            assert!((dot(&z, &z).sqrt() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_output_is_guarded() {
        let p = HeadParams::zeros(4, 4, 4);
        let c = p.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(c.degenerate);
        assert!(c.z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shape_checked() {
        let p = HeadParams::zeros(4, 4, 4);
        assert!(p.forward(&[1.0]).is_err());
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let p = random_head(8, 8, 8, 3);
        let mut rng = crate::seed::rng(4);
        let h: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = p.forward(&h).unwrap();
        let step = 1e-5;
        for out in 0..8 {
            let mut gz = vec![0.0; 8];
            gz[out] = 1.0;
            let analytic = p.input_grad(&c, &gz);
            for j in 0..8 {
                let (mut hp, mut hm) = (h.clone(), h.clone());
                hp[j] += step;
                hm[j] -= step;
                let fd = (p.embed(&hp).unwrap()[out] - p.embed(&hm).unwrap()[out]) / (2.0 * step);
                assert!(rel_err(analytic[j], fd) < 1e-5, "dz{out}/dh{j}: {} vs {fd}", analytic[j]);
            }
        }
    }

    #[test]
    fn parameter_gradient_matches_central_differences() {
        let p = random_head(8, 8, 8, 5);
        let mut rng = crate::seed::rng(6);
        let hs: Vec<Vec<f64>> = (0..3).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let coeffs: Vec<Vec<f64>> = (0..3).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        // scalar L = Σ_i c_i · z_i
        let loss = |q: &HeadParams| -> f64 { hs.iter().zip(&coeffs).map(|(h, c)| dot(&q.embed(h).unwrap(), c)).sum() };
        let caches: Vec<HeadCache> = hs.iter().map(|h| p.forward(h).unwrap()).collect();
        let inputs: Vec<&[f64]> = hs.iter().map(|h| h.as_slice()).collect();
        let g = p.backward_batch(Exec::Sequential, &inputs, &caches, &coeffs).flat();
        let base = p.flat();
        let step = 1e-5;
        for k in 0..base.len() {
            let mut q = p.clone();
            let mut v = base.clone();
            v[k] += step;
            q.set_flat(&v);
            let lp = loss(&q);
            v[k] -= 2.0 * step;
            q.set_flat(&v);
            let lm = loss(&q);
            let fd = (lp - lm) / (2.0 * step);
            assert!(rel_err(g[k], fd) < 1e-5, "param {k}: {} vs {fd}", g[k]);
        }
        let par = p.backward_batch(Exec::Parallel, &inputs, &caches, &coeffs).flat();
        assert_eq!(par, g);
    }
}
