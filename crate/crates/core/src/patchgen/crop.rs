use serde::{Deserialize, Serialize};

use super::RasterImage;
use crate::geometry::BBox2D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CropMode {
    /// `d × d` square with `d = margin + max(w, h)` around the box center.
    Square,
    /// Exactly the box, stretched to a square on resize (ablation input).
    NonSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchConfig {
    /// Context margin added to the larger box side, in pixels.
    pub margin: f64,
    /// Side of the resized output patch.
    pub output_size: u32,
    pub mode: CropMode,
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self { margin: 10.0, output_size: 224, mode: CropMode::Square }
    }
}

/// Geometry of one square patch in the source frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub center: [f64; 2],
    pub side: f64,
    pub source_obs: u64,
}

/// Round half up, at least one pixel.
pub(crate) fn pixel_side(d: f64) -> u32 {
    ((d + 0.5).floor() as u32).max(1)
}

/// Copy a `w × h` window whose top-left pixel is `(x0, y0)`; pixels outside
/// the frame are black.
pub fn crop_rect(img: &RasterImage, x0: i64, y0: i64, w: u32, h: u32) -> RasterImage {
    let mut out = RasterImage::new(w, h);
    let (iw, ih) = (i64::from(img.width()), i64::from(img.height()));
    for y in 0..h {
        let sy = y0 + i64::from(y);
        if sy < 0 || sy >= ih {
            continue;
        }
        for x in 0..w {
            let sx = x0 + i64::from(x);
            if sx >= 0 && sx < iw {
                out.set(x, y, img.get(sx as u32, sy as u32));
            }
        }
    }
    out
}

/// Square crop of side `d` centered at `(cx, cy)`.
pub(crate) fn crop_centered(img: &RasterImage, cx: f64, cy: f64, d: f64) -> RasterImage {
    let side = pixel_side(d);
    let half = f64::from(side) / 2.0;
    let x0 = (cx - half + 0.5).floor() as i64;
    let y0 = (cy - half + 0.5).floor() as i64;
    crop_rect(img, x0, y0, side, side)
}

/// Contextual square patch: side `d = margin + max(w, h)` rounded to the
/// nearest pixel (ties up), centered on the box, zero padded.
pub fn crop_square(img: &RasterImage, bbox: &BBox2D, margin: f64, source_obs: u64) -> (RasterImage, PatchSpec) {
    let d = margin + bbox.width().max(bbox.height());
    let (cx, cy) = bbox.center();
    let patch = crop_centered(img, cx, cy, d);
    (patch, PatchSpec { center: [cx, cy], side: d, source_obs })
}

/// Bilinear resampling with pixel-center alignment and edge clamping.
pub fn resize_to(img: &RasterImage, out_w: u32, out_h: u32) -> RasterImage {
    if img.width() == out_w && img.height() == out_h {
        return img.clone();
    }
    let (iw, ih) = (img.width(), img.height());
    let sx = f64::from(iw) / f64::from(out_w);
    let sy = f64::from(ih) / f64::from(out_h);
    let taps = |o: u32, scale: f64, n: u32| {
        let s = ((f64::from(o) + 0.5) * scale - 0.5).clamp(0.0, f64::from(n - 1));
        let i0 = s.floor() as u32;
        (i0, (i0 + 1).min(n - 1), s - f64::from(i0))
    };
    let mut out = RasterImage::new(out_w, out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = taps(y, sy, ih);
        for x in 0..out_w {
            let (x0, x1, fx) = taps(x, sx, iw);
            let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let top = f64::from(a[ch]) * (1.0 - fx) + f64::from(b[ch]) * fx;
                let bot = f64::from(c[ch]) * (1.0 - fx) + f64::from(d[ch]) * fx;
                px[ch] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.set(x, y, px);
        }
    }
    out
}

pub fn resize_patch(patch: &RasterImage, target: u32) -> RasterImage {
    resize_to(patch, target, target)
}

/// The unaugmented pipeline: crop per `cfg.mode`, then resize.
pub fn make_patch(img: &RasterImage, bbox: &BBox2D, cfg: &PatchConfig, source_obs: u64) -> (RasterImage, PatchSpec) {
    match cfg.mode {
        CropMode::Square => {
            let (p, spec) = crop_square(img, bbox, cfg.margin, source_obs);
            (resize_patch(&p, cfg.output_size), spec)
        }
        CropMode::NonSquare => {
            let (cx, cy) = bbox.center();
            let p = crop_box(img, cx, cy, bbox.width(), bbox.height());
            let spec = PatchSpec { center: [cx, cy], side: bbox.width().max(bbox.height()), source_obs };
            (resize_patch(&p, cfg.output_size), spec)
        }
    }
}

pub(crate) fn crop_box(img: &RasterImage, cx: f64, cy: f64, w: f64, h: f64) -> RasterImage {
    let (pw, ph) = (pixel_side(w), pixel_side(h));
    let x0 = (cx - f64::from(pw) / 2.0 + 0.5).floor() as i64;
    let y0 = (cy - f64::from(ph) / 2.0 + 0.5).floor() as i64;
    crop_rect(img, x0, y0, pw, ph)
}
