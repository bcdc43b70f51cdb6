//! Contextual square patches around detections, and the training
//! augmentations applied to them.

mod augment;
mod crop;
mod raster;

pub use augment::{augment, render_with_params, AppliedParams, AugmentConfig, EraseRect};
pub use crop::{crop_rect, crop_square, make_patch, resize_patch, resize_to, CropMode, PatchConfig, PatchSpec};
pub use raster::{foreground_filter, FilterMode, Mask, RasterImage};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PatchError {
    #[error("buffer of {len} bytes does not match a {width}x{height} RGB image")]
    BufferSize { width: u32, height: u32, len: usize },
    #[error("mask is {mask_w}x{mask_h} but the image is {img_w}x{img_h}")]
    ShapeMismatch { img_w: u32, img_h: u32, mask_w: u32, mask_h: u32 },
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error("image i/o: {0}")]
    Image(#[from] image::ImageError),
}
