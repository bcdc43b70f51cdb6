use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PatchError;

/// 8-bit RGB image, row-major, interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![0; width as usize * height as usize * 3] }
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let mut img = Self::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, PatchError> {
        if data.len() != width as usize * height as usize * 3 {
            return Err(PatchError::BufferSize { width, height, len: data.len() });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&rgb);
    }

    pub fn load_png(path: &Path) -> Result<Self, PatchError> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        Self::from_raw(w, h, img.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<(), PatchError> {
        image::save_buffer_with_format(
            path,
            &self.data,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )?;
        Ok(())
    }

    /// PNG file contents.
    pub fn encode_png(&self) -> Result<Vec<u8>, PatchError> {
        let mut out = Vec::new();
        image::ImageEncoder::write_image(
            image::codecs::png::PngEncoder::new(&mut out),
            &self.data,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
        )?;
        Ok(out)
    }
}

/// Binary raster aligned to an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![false; width as usize * height as usize] }
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self { width, height, data: vec![true; width as usize * height as usize] }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    /// Any non-zero luma is foreground.
    pub fn load_png(path: &Path) -> Result<Self, PatchError> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = img.dimensions();
        Ok(Self { width: w, height: h, data: img.into_raw().into_iter().map(|v| v > 0).collect() })
    }

    /// 0 / 255 image of the mask.
    pub fn to_image(&self) -> RasterImage {
        let data = self.data.iter().flat_map(|b| if *b { [255u8; 3] } else { [0u8; 3] }).collect();
        RasterImage::from_raw(self.width, self.height, data).expect("mask buffer has matching size")
    }

    /// Pixels of a grayscale rendering brighter than mid-gray.
    pub fn from_image(img: &RasterImage) -> Self {
        let data = img.data().chunks_exact(3).map(|p| p[0] as u32 + p[1] as u32 + p[2] as u32 > 3 * 127).collect();
        Self { width: img.width(), height: img.height(), data }
    }

    pub fn save_png(&self, path: &Path) -> Result<(), PatchError> {
        let buf: Vec<u8> = self.data.iter().map(|b| if *b { 255 } else { 0 }).collect();
        image::save_buffer_with_format(
            path,
            &buf,
            self.width,
            self.height,
            image::ExtendedColorType::L8,
            image::ImageFormat::Png,
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Keep the object, black out the context.
    FgOnly,
    /// Keep the context, black out the object.
    BgOnly,
}

pub fn foreground_filter(patch: &RasterImage, mask: &Mask, mode: FilterMode) -> Result<RasterImage, PatchError> {
    if patch.width != mask.width || patch.height != mask.height {
        return Err(PatchError::ShapeMismatch {
            img_w: patch.width,
            img_h: patch.height,
            mask_w: mask.width,
            mask_h: mask.height,
        });
    }
    let mut out = patch.clone();
    for (px, m) in out.data.chunks_exact_mut(3).zip(&mask.data) {
        let keep = match mode {
            FilterMode::FgOnly => *m,
            FilterMode::BgOnly => !*m,
        };
        if !keep {
            px.fill(0);
        }
    }
    Ok(out)
}
