use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::crop::{crop_box, crop_centered};
use super::{resize_patch, CropMode, PatchConfig, PatchError, RasterImage};
use crate::geometry::BBox2D;

/// Augmentation magnitudes. All-zero ranges (with unit scale) reproduce the
/// plain crop-and-resize pipeline bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    /// Max relative brightness change; factor drawn from `[1 - b, 1 + b]`.
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    /// Max hue shift as a fraction of the color wheel.
    pub hue: f64,
    /// Max center shift per axis, as a fraction of the crop side.
    pub center_jitter: f64,
    /// Multiplicative range for the crop side.
    pub scale_jitter: [f64; 2],
    pub max_rotation_deg: f64,
    /// Erased area as a fraction of the patch area.
    pub erase_area: [f64; 2],
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            brightness: 0.4,
            contrast: 0.4,
            saturation: 0.4,
            hue: 0.1,
            center_jitter: 0.1,
            scale_jitter: [0.9, 1.1],
            max_rotation_deg: 10.0,
            erase_area: [0.02, 0.2],
        }
    }
}

impl AugmentConfig {
    pub fn identity() -> Self {
        Self {
            brightness: 0.0,
            contrast: 0.0,
            saturation: 0.0,
            hue: 0.0,
            center_jitter: 0.0,
            scale_jitter: [1.0, 1.0],
            max_rotation_deg: 0.0,
            erase_area: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<(), PatchError> {
        let bad = |m: &str| Err(PatchError::InvalidConfig(m.to_string()));
        for (name, v) in [("brightness", self.brightness), ("contrast", self.contrast), ("saturation", self.saturation)]
        {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if !(0.0..=0.5).contains(&self.hue) {
            return bad("hue must be in [0, 0.5]");
        }
        if !(self.center_jitter >= 0.0 && self.max_rotation_deg >= 0.0) {
            return bad("center_jitter and max_rotation_deg must be nonnegative");
        }
        let [lo, hi] = self.scale_jitter;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
            return bad("scale_jitter must be a positive range containing 1.0");
        }
        let [a, b] = self.erase_area;
        if !(0.0 <= a && a <= b && b <= 1.0) {
            return bad("erase_area must satisfy 0 <= min <= max <= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EraseRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

/// Everything drawn for one augmented patch; replaying it with
/// [`render_with_params`] reproduces the patch exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppliedParams {
    /// Center shift in source pixels.
    pub center_shift: [f64; 2],
    pub scale: f64,
    pub rotation_deg: f64,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
    pub erase: Option<EraseRect>,
    pub noise_seed: u64,
}

fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Rectangle dimensions whose area is within one pixel of `area` when
/// possible, otherwise as close as possible; among those, the aspect ratio
/// closest to `aspect`.
type EraseKey = (bool, f64, f64);

fn erase_dims(area: f64, n: u32, aspect: f64) -> Option<(u32, u32)> {
    let mut best: Option<(EraseKey, (u32, u32))> = None;
    for w in 1..=n {
        let h = (area / f64::from(w)).round();
        if h < 1.0 || h > f64::from(n) {
            continue;
        }
        let err = (f64::from(w) * h - area).abs();
        let key = (err > 1.0, if err > 1.0 { err } else { 0.0 }, ((f64::from(w) / h).ln() - aspect.ln()).abs());
        if best.as_ref().is_none_or(|(k, _)| key.partial_cmp(k) == Some(std::cmp::Ordering::Less)) {
            best = Some((key, (w, h as u32)));
        }
    }
    best.map(|(_, d)| d)
}

fn sample_params<R: Rng>(bbox: &BBox2D, pcfg: &PatchConfig, cfg: &AugmentConfig, rng: &mut R) -> AppliedParams {
    let side = pcfg.margin + bbox.width().max(bbox.height());
    let j = cfg.center_jitter;
    let (jx, jy) = (uniform(rng, -j, j), uniform(rng, -j, j));
    let center_shift = match pcfg.mode {
        CropMode::Square => [jx * side, jy * side],
        CropMode::NonSquare => [jx * bbox.width(), jy * bbox.height()],
    };
    let scale = uniform(rng, cfg.scale_jitter[0], cfg.scale_jitter[1]);
    let rotation_deg = uniform(rng, -cfg.max_rotation_deg, cfg.max_rotation_deg);
    let brightness = uniform(rng, 1.0 - cfg.brightness, 1.0 + cfg.brightness);
    let contrast = uniform(rng, 1.0 - cfg.contrast, 1.0 + cfg.contrast);
    let saturation = uniform(rng, 1.0 - cfg.saturation, 1.0 + cfg.saturation);
    let hue = uniform(rng, -cfg.hue, cfg.hue);
    let frac = uniform(rng, cfg.erase_area[0], cfg.erase_area[1]);
    let aspect = uniform(rng, 0.3f64.ln(), (1.0f64 / 0.3).ln()).exp();
    let (u, v) = (rng.random::<f64>(), rng.random::<f64>());
    let noise_seed = rng.random::<u64>();

    let n = pcfg.output_size;
    let area = frac * f64::from(n) * f64::from(n);
    let erase = if area >= 0.5 {
        erase_dims(area, n, aspect).map(|(w, h)| EraseRect {
            x: ((u * f64::from(n - w + 1)).floor() as u32).min(n - w),
            y: ((v * f64::from(n - h + 1)).floor() as u32).min(n - h),
            w,
            h,
        })
    } else {
        None
    };
    AppliedParams { center_shift, scale, rotation_deg, brightness, contrast, saturation, hue, erase, noise_seed }
}

/// Draw augmentation parameters from `rng` and render the patch.
///
/// Order: center jitter, scale jitter, crop, resize to the output size,
/// rotation about the patch center (black fill), color jitter (brightness,
/// contrast, saturation, hue), random erasing with uniform noise.
pub fn augment<R: Rng>(
    img: &RasterImage,
    bbox: &BBox2D,
    pcfg: &PatchConfig,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Result<(RasterImage, AppliedParams), PatchError> {
    cfg.validate()?;
    let params = sample_params(bbox, pcfg, cfg, rng);
    Ok((render_with_params(img, bbox, pcfg, &params), params))
}

pub fn render_with_params(img: &RasterImage, bbox: &BBox2D, pcfg: &PatchConfig, p: &AppliedParams) -> RasterImage {
    let (cx, cy) = bbox.center();
    let (cx, cy) = (cx + p.center_shift[0], cy + p.center_shift[1]);
    let crop = match pcfg.mode {
        CropMode::Square => crop_centered(img, cx, cy, (pcfg.margin + bbox.width().max(bbox.height())) * p.scale),
        CropMode::NonSquare => crop_box(img, cx, cy, bbox.width() * p.scale, bbox.height() * p.scale),
    };
    let mut out = resize_patch(&crop, pcfg.output_size);
    if p.rotation_deg != 0.0 {
        out = rotate(&out, p.rotation_deg);
    }
    if p.brightness != 1.0 || p.contrast != 1.0 || p.saturation != 1.0 || p.hue != 0.0 {
        out = color_jitter(&out, p.brightness, p.contrast, p.saturation, p.hue);
    }
    if let Some(r) = p.erase {
        let mut rng = ChaCha8Rng::seed_from_u64(p.noise_seed);
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                out.set(x, y, rng.random());
            }
        }
    }
    out
}

fn rotate(img: &RasterImage, deg: f64) -> RasterImage {
    let (w, h) = (img.width(), img.height());
    let (s, c) = deg.to_radians().sin_cos();
    let (mx, my) = (f64::from(w) / 2.0, f64::from(h) / 2.0);
    let fetch = |x: i64, y: i64| -> [f64; 3] {
        if x < 0 || y < 0 || x >= i64::from(w) || y >= i64::from(h) {
            return [0.0; 3];
        }
        let p = img.get(x as u32, y as u32);
        [f64::from(p[0]), f64::from(p[1]), f64::from(p[2])]
    };
    let mut out = RasterImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (f64::from(x) + 0.5 - mx, f64::from(y) + 0.5 - my);
            // inverse rotation maps output to source
            let sx = c * dx + s * dy + mx - 0.5;
            let sy = -s * dx + c * dy + my - 0.5;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as i64, y0 as i64);
            let (a, b, cc, d) = (fetch(x0, y0), fetch(x0 + 1, y0), fetch(x0, y0 + 1), fetch(x0 + 1, y0 + 1));
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let v = (a[ch] * (1.0 - fx) + b[ch] * fx) * (1.0 - fy) + (cc[ch] * (1.0 - fx) + d[ch] * fx) * fy;
                px[ch] = v.round().clamp(0.0, 255.0) as u8;
            }
            out.set(x, y, px);
        }
    }
    out
}

fn luma(p: &[f64; 3]) -> f64 {
    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
}

fn rgb_to_hsv(p: &[f64; 3]) -> [f64; 3] {
    let (r, g, b) = (p[0] / 255.0, p[1] / 255.0, p[2] / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / d).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / d + 2.0) / 6.0
    } else {
        ((r - g) / d + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    [h, s, max]
}

fn hsv_to_rgb(hsv: &[f64; 3]) -> [f64; 3] {
    let [h, s, v] = *hsv;
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match i as u32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r * 255.0, g * 255.0, b * 255.0]
}

fn color_jitter(img: &RasterImage, brightness: f64, contrast: f64, saturation: f64, hue: f64) -> RasterImage {
    let clamp = |v: f64| v.clamp(0.0, 255.0);
    let mut px: Vec<[f64; 3]> = img
        .data()
        .chunks_exact(3)
        .map(|c| {
            [
                clamp(f64::from(c[0]) * brightness),
                clamp(f64::from(c[1]) * brightness),
                clamp(f64::from(c[2]) * brightness),
            ]
        })
        .collect();
    let mean = px.iter().map(luma).sum::<f64>() / px.len().max(1) as f64;
    for p in &mut px {
        for v in p.iter_mut() {
            *v = clamp(mean + contrast * (*v - mean));
        }
        let g = luma(p);
        for v in p.iter_mut() {
            *v = clamp(g + saturation * (*v - g));
        }
        if hue != 0.0 {
            let mut hsv = rgb_to_hsv(p);
            hsv[0] += hue;
            *p = hsv_to_rgb(&hsv);
        }
    }
    let data = px.iter().flat_map(|p| p.map(|v| clamp(v).round() as u8)).collect();
    RasterImage::from_raw(img.width(), img.height(), data).expect("same shape")
}
