//! Decoded RGB8 images.

use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("invalid image dimensions {width}x{height} for a buffer of {len} bytes")]
    InvalidDimensions { width: u32, height: u32, len: usize },
    #[error("box {0:?} lies outside the {1}x{2} image")]
    OutOfBounds(Rect, u32, u32),
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("image encode failed: {0}")]
    Encode(String),
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right() && other.x < self.right() && self.y < other.bottom() && other.y < self.bottom()
    }
}

/// Row-major RGB8 image.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RasterImage({}x{})", self.width, self.height)
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 || pixels.len() != width as usize * height as usize * 3 {
            return Err(RasterError::InvalidDimensions { width, height, len: pixels.len() });
        }
        Ok(RasterImage { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0);
        let pixels = rgb.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        RasterImage { width, height, pixels }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0);
        let mut pixels = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        RasterImage { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn bounds(&self) -> Rect {
        Rect { x: 0, y: 0, w: self.width, h: self.height }
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Rec. 601 luma on the 0–255 scale.
    #[inline]
    pub fn luma(&self, x: u32, y: u32) -> f64 {
        let [r, g, b] = self.pixel(x, y);
        luma(r, g, b)
    }

    pub fn luma_plane(&self) -> Vec<f64> {
        self.pixels.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect()
    }

    /// Exact pixel copy of `rect`.
    pub fn crop(&self, rect: Rect) -> Result<RasterImage, RasterError> {
        if rect.w == 0 || rect.h == 0 || rect.right() > self.width || rect.bottom() > self.height {
            return Err(RasterError::OutOfBounds(rect, self.width, self.height));
        }
        let mut pixels = Vec::with_capacity(rect.area() as usize * 3);
        for y in rect.y..rect.bottom() {
            let start = (y as usize * self.width as usize + rect.x as usize) * 3;
            pixels.extend_from_slice(&self.pixels[start..start + rect.w as usize * 3]);
        }
        Ok(RasterImage { width: rect.w, height: rect.h, pixels })
    }

    /// Nearest-neighbour resize.
    pub fn resize_nearest(&self, width: u32, height: u32) -> RasterImage {
        let (sw, sh) = (self.width as u64, self.height as u64);
        RasterImage::from_fn(width, height, |x, y| {
            let sx = (x as u64 * sw / width as u64).min(sw - 1) as u32;
            let sy = (y as u64 * sh / height as u64).min(sh - 1) as u32;
            self.pixel(sx, sy)
        })
    }

    /// Decode PNG or JPEG (or anything else the decoder recognizes) to RGB8.
    pub fn decode(bytes: &[u8]) -> Result<RasterImage, RasterError> {
        let img = image::load_from_memory(bytes).map_err(|e| RasterError::Decode(e.to_string()))?;
        let rgb = img.into_rgb8();
        let (w, h) = rgb.dimensions();
        RasterImage::new(w, h, rgb.into_raw())
    }

    pub fn open(path: &Path) -> Result<RasterImage, RasterError> {
        let bytes = std::fs::read(path).map_err(|e| RasterError::Decode(format!("{}: {e}", path.display())))?;
        Self::decode(&bytes)
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut out = Vec::new();
        let enc = image::codecs::png::PngEncoder::new(&mut out);
        image::ImageEncoder::write_image(enc, &self.pixels, self.width, self.height, image::ExtendedColorType::Rgb8)
            .map_err(|e| RasterError::Encode(e.to_string()))?;
        Ok(out)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RasterError> {
        let bytes = self.encode_png()?;
        std::fs::write(path, bytes).map_err(|e| RasterError::Encode(format!("{}: {e}", path.display())))
    }
}

#[inline]
pub fn luma(r: u8, g: u8, b: u8) -> f64 {
    // integer weights keep gray pixels exact
    (299 * r as u32 + 587 * g as u32 + 114 * b as u32) as f64 / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(RasterImage::new(0, 1, vec![]).is_err());
        assert!(RasterImage::new(2, 2, vec![0; 11]).is_err());
        assert!(RasterImage::new(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn crop_identity_and_single_pixel() {
        let img = RasterImage::from_fn(5, 4, |x, y| [x as u8, y as u8, 7]);
        assert_eq!(img.crop(img.bounds()).unwrap(), img);
        let px = img.crop(Rect { x: 0, y: 0, w: 1, h: 1 }).unwrap();
        assert_eq!(px.pixels(), &[0, 0, 7]);
        let inner = img.crop(Rect { x: 2, y: 1, w: 2, h: 3 }).unwrap();
        assert_eq!(inner.pixel(1, 2), [3, 3, 7]);
        assert!(matches!(img.crop(Rect { x: 4, y: 0, w: 2, h: 1 }), Err(RasterError::OutOfBounds(..))));
    }

    #[test]
    fn png_roundtrip() {
        let img = RasterImage::from_fn(7, 3, |x, y| [(x * 30) as u8, (y * 80) as u8, 200]);
        let back = RasterImage::decode(&img.encode_png().unwrap()).unwrap();
        assert_eq!(back, img);
    }
}
