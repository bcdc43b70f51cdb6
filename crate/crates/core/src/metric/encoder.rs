//! Sources of representations `h` keyed by observation id.

use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};

use crate::patchgen::RasterImage;
use crate::seed;

/// Anything that can supply the representation of an observation.
pub trait RepresentationProvider {
    fn dim(&self) -> usize;
    /// `None` when the observation is unknown to this provider.
    fn representation(&self, obs_id: u64) -> Option<Vec<f64>>;
}

const GRID: usize = 16;

/// Tiny deterministic stand-in for a learned encoder: area-average the patch
/// to 16×16 grayscale in `[0, 1]` and apply a fixed Gaussian projection.
#[derive(Debug, Clone)]
pub struct ReferenceEncoder {
    dim: usize,
    projection: Vec<f64>,
}

impl ReferenceEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed::stage(seed, "reference-encoder"));
        let scale = 1.0 / (GRID * GRID) as f64;
        let projection = (0..dim * GRID * GRID)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v * scale.sqrt()
            })
            .collect();
        Self { dim, projection }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// 16×16 grayscale thumbnail, row-major.
    pub fn thumbnail(img: &RasterImage) -> Vec<f64> {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut sum = vec![0.0; GRID * GRID];
        let mut count = vec![0usize; GRID * GRID];
        for y in 0..h {
            let gy = y * GRID / h.max(1);
            for x in 0..w {
                let gx = x * GRID / w.max(1);
                let [r, g, b] = img.get(x as u32, y as u32);
                let lum = (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0;
                sum[gy * GRID + gx] += lum;
                count[gy * GRID + gx] += 1;
            }
        }
        sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect()
    }

    pub fn encode(&self, img: &RasterImage) -> Vec<f64> {
        let t = Self::thumbnail(img);
        self.projection.chunks_exact(GRID * GRID).map(|row| row.iter().zip(&t).map(|(a, b)| a * b).sum()).collect()
    }
}

/// Reference encoder applied to `<dir>/<obs_id>.png` patches.
#[derive(Debug, Clone)]
pub struct PatchEncoder {
    encoder: ReferenceEncoder,
    dir: PathBuf,
}

impl PatchEncoder {
    pub fn new(encoder: ReferenceEncoder, dir: impl AsRef<Path>) -> Self {
        Self { encoder, dir: dir.as_ref().to_path_buf() }
    }
}

impl RepresentationProvider for PatchEncoder {
    fn dim(&self) -> usize {
        self.encoder.dim
    }

    fn representation(&self, obs_id: u64) -> Option<Vec<f64>> {
        let path = self.dir.join(format!("{obs_id}.png"));
        match RasterImage::load_png(&path) {
            Ok(img) => Some(self.encoder.encode(&img)),
            Err(e) => {
                log::debug!("no patch for observation {obs_id}: {e}");
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_sized() {
        let a = ReferenceEncoder::new(768, 3);
        let b = ReferenceEncoder::new(768, 3);
        let img = RasterImage::filled(40, 30, [200, 10, 60]);
        let ha = a.encode(&img);
        assert_eq!(ha.len(), 768);
        assert_eq!(ha, b.encode(&img));
        assert!(ha.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn thumbnail_of_constant_image_is_constant() {
        let img = RasterImage::filled(37, 53, [255, 255, 255]);
        let t = ReferenceEncoder::thumbnail(&img);
        assert!(t.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn reads_patches_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        let img = RasterImage::filled(16, 16, [10, 20, 30]);
        img.save_png(&dir.path().join("42.png")).unwrap();
        let enc = PatchEncoder::new(ReferenceEncoder::new(32, 0), dir.path());
        assert_eq!(enc.representation(42).unwrap(), ReferenceEncoder::new(32, 0).encode(&img));
        assert!(enc.representation(7).is_none());
    }
}
