//! Compound-figure separation by gutter detection.
//!
//! A gutter is a run of rows (or columns) that are uniform in luma and match
//! the figure's background. The figure is cut recursively along the axis with
//! more gutters (guillotine cuts), and every leaf is trimmed of background
//! margins.

use crate::raster::{RasterImage, Rect};
use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Maximum distance between a band's mean luma and the background luma.
pub const BACKGROUND_TOLERANCE: f64 = 10.0;

/// Which way a band runs. `Horizontal` bands are sets of full rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitParams {
    /// Maximum luma standard deviation (0–255 scale) within a gutter line.
    pub uniformity_threshold: f64,
    pub min_gutter: u32,
    pub max_depth: u32,
    pub min_panel: u32,
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams { uniformity_threshold: 4.0, min_gutter: 6, max_depth: 4, min_panel: 224 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid split parameters: {0}")]
pub struct InvalidSplitParams(pub String);

impl SplitParams {
    pub fn validate(&self) -> Result<(), InvalidSplitParams> {
        if !(self.uniformity_threshold.is_finite() && self.uniformity_threshold > 0.0) {
            return Err(InvalidSplitParams("uniformity_threshold must be positive".into()));
        }
        if self.min_gutter == 0 || self.max_depth == 0 || self.min_panel == 0 {
            return Err(InvalidSplitParams("min_gutter, max_depth and min_panel must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubfigureBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
    /// Number of guillotine cuts that produced this box (0 for the whole image).
    pub depth: u32,
}

impl SubfigureBox {
    pub fn rect(&self) -> Rect {
        Rect { x: self.x, y: self.y, w: self.w, h: self.h }
    }
}

struct LumaView<'a> {
    luma: Vec<f64>,
    width: u32,
    params: &'a SplitParams,
}

impl LumaView<'_> {
    fn line_stats(&self, region: Rect, axis: Axis, index: u32) -> (f64, f64) {
        let w = self.width as usize;
        let (mut sum, mut sq, n) = (0.0, 0.0, match axis {
            Axis::Horizontal => region.w,
            Axis::Vertical => region.h,
        } as f64);
        match axis {
            Axis::Horizontal => {
                let row = index as usize * w;
                for v in &self.luma[row + region.x as usize..row + region.right() as usize] {
                    sum += v;
                    sq += v * v;
                }
            }
            Axis::Vertical => {
                for y in region.y..region.bottom() {
                    let v = self.luma[y as usize * w + index as usize];
                    sum += v;
                    sq += v * v;
                }
            }
        }
        let mean = sum / n;
        (mean, (sq / n - mean * mean).max(0.0).sqrt())
    }

    fn is_background_line(&self, region: Rect, axis: Axis, index: u32, background: f64) -> bool {
        let (mean, sd) = self.line_stats(region, axis, index);
        sd <= self.params.uniformity_threshold && (mean - background).abs() <= BACKGROUND_TOLERANCE
    }

    fn gutters(&self, region: Rect, axis: Axis, background: Option<f64>) -> Vec<Range<u32>> {
        let Some(bg) = background else { return Vec::new() };
        let (lo, hi) = match axis {
            Axis::Horizontal => (region.y, region.bottom()),
            Axis::Vertical => (region.x, region.right()),
        };
        let mut runs = Vec::new();
        let mut start: Option<u32> = None;
        for i in lo..hi {
            if self.is_background_line(region, axis, i, bg) {
                start.get_or_insert(i);
            } else if let Some(s) = start.take() {
                runs.push(s..i);
            }
        }
        if let Some(s) = start {
            runs.push(s..hi);
        }
        runs.retain(|r| r.start != lo && r.end != hi && r.end - r.start >= self.params.min_gutter);
        runs
    }

    /// Shrink `rect` while its outermost lines are background.
    fn trim(&self, rect: Rect, background: Option<f64>) -> Rect {
        let Some(bg) = background else { return rect };
        let (mut x0, mut y0, mut x1, mut y1) = (rect.x, rect.y, rect.right(), rect.bottom());
        loop {
            let mut changed = false;
            let cur = Rect { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
            if y1 - y0 > 1 && self.is_background_line(cur, Axis::Horizontal, y0, bg) {
                y0 += 1;
                changed = true;
            }
            let cur = Rect { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
            if y1 - y0 > 1 && self.is_background_line(cur, Axis::Horizontal, y1 - 1, bg) {
                y1 -= 1;
                changed = true;
            }
            let cur = Rect { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
            if x1 - x0 > 1 && self.is_background_line(cur, Axis::Vertical, x0, bg) {
                x0 += 1;
                changed = true;
            }
            let cur = Rect { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
            if x1 - x0 > 1 && self.is_background_line(cur, Axis::Vertical, x1 - 1, bg) {
                x1 -= 1;
                changed = true;
            }
            if !changed {
                break;
            }
        }
        let trimmed = Rect { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
        // A region that is background all the way through stays as it was.
        let all_background = (trimmed.h == 1 && self.is_background_line(trimmed, Axis::Horizontal, trimmed.y, bg))
            || (trimmed.w == 1 && self.is_background_line(trimmed, Axis::Vertical, trimmed.x, bg));
        if all_background {
            return rect;
        }
        trimmed
    }
}

fn view<'a>(image: &RasterImage, params: &'a SplitParams) -> LumaView<'a> {
    LumaView { luma: image.luma_plane(), width: image.width(), params }
}

/// Background luma estimate for the whole figure.
///
/// The mean of the 1-pixel border frame when that frame is uniform; otherwise
/// the median mean of the uniform full-width rows and full-height columns. `None`
/// when the image has no uniform line at all.
pub fn background_luma(image: &RasterImage, params: &SplitParams) -> Option<f64> {
    let v = view(image, params);
    background_of(&v, image)
}

fn background_of(v: &LumaView<'_>, image: &RasterImage) -> Option<f64> {
    let (w, h) = (image.width(), image.height());
    let mut frame = Vec::with_capacity(2 * (w + h) as usize);
    for x in 0..w {
        frame.push(v.luma[x as usize]);
        frame.push(v.luma[((h - 1) * w + x) as usize]);
    }
    for y in 0..h {
        frame.push(v.luma[(y * w) as usize]);
        frame.push(v.luma[(y * w + w - 1) as usize]);
    }
    let n = frame.len() as f64;
    let mean = frame.iter().sum::<f64>() / n;
    let sd = (frame.iter().map(|x| x * x).sum::<f64>() / n - mean * mean).max(0.0).sqrt();
    if sd <= v.params.uniformity_threshold {
        return Some(mean);
    }
    let full = image.bounds();
    let mut means: Vec<f64> = Vec::new();
    for (axis, len) in [(Axis::Horizontal, h), (Axis::Vertical, w)] {
        for i in 0..len {
            let (m, s) = v.line_stats(full, axis, i);
            if s <= v.params.uniformity_threshold {
                means.push(m);
            }
        }
    }
    if means.is_empty() {
        return None;
    }
    means.sort_by(f64::total_cmp);
    Some(means[means.len() / 2])
}

/// Interior gutter bands of the whole image along `axis`, as half-open
/// `[start, end)` row or column intervals.
pub fn detect_gutters(image: &RasterImage, axis: Axis, params: &SplitParams) -> Vec<Range<u32>> {
    let v = view(image, params);
    let bg = background_of(&v, image);
    v.gutters(image.bounds(), axis, bg)
}

fn segments(lo: u32, hi: u32, gutters: &[Range<u32>]) -> Vec<Range<u32>> {
    let mut out = Vec::new();
    let mut cur = lo;
    for g in gutters {
        if g.start > cur {
            out.push(cur..g.start);
        }
        cur = g.end;
    }
    if hi > cur {
        out.push(cur..hi);
    }
    out
}

/// Recursive guillotine split of a compound figure.
///
/// Returns one box covering the (margin-trimmed) image when no gutter exists.
/// Boxes are pairwise disjoint and ordered top-to-bottom, left-to-right within
/// each cut.
pub fn split_compound(image: &RasterImage, params: &SplitParams) -> Vec<SubfigureBox> {
    let v = view(image, params);
    let bg = background_of(&v, image);
    let mut out = Vec::new();
    split_region(&v, bg, image.bounds(), 0, &mut out);
    out
}

fn split_region(v: &LumaView<'_>, bg: Option<f64>, region: Rect, depth: u32, out: &mut Vec<SubfigureBox>) {
    let leaf = |out: &mut Vec<SubfigureBox>| {
        let r = v.trim(region, bg);
        out.push(SubfigureBox { x: r.x, y: r.y, w: r.w, h: r.h, depth });
    };
    if depth >= v.params.max_depth {
        return leaf(out);
    }
    let horizontal = v.gutters(region, Axis::Horizontal, bg);
    let vertical = v.gutters(region, Axis::Vertical, bg);
    if horizontal.is_empty() && vertical.is_empty() {
        return leaf(out);
    }
    if horizontal.len() >= vertical.len() {
        for seg in segments(region.y, region.bottom(), &horizontal) {
            let sub = Rect { x: region.x, y: seg.start, w: region.w, h: seg.end - seg.start };
            split_region(v, bg, sub, depth + 1, out);
        }
    } else {
        for seg in segments(region.x, region.right(), &vertical) {
            let sub = Rect { x: seg.start, y: region.y, w: seg.end - seg.start, h: region.h };
            split_region(v, bg, sub, depth + 1, out);
        }
    }
}

/// Keep boxes whose width and height both reach `params.min_panel`.
pub fn filter_min_size(boxes: &[SubfigureBox], params: &SplitParams) -> Vec<SubfigureBox> {
    boxes.iter().copied().filter(|b| b.w >= params.min_panel && b.h >= params.min_panel).collect()
}

pub fn crop(image: &RasterImage, b: &SubfigureBox) -> Result<RasterImage, crate::raster::RasterError> {
    image.crop(b.rect())
}

/// File name for an extracted panel: `<pmcid>_fig<N>_<k>.png`.
pub fn crop_file_name(pmcid: &str, figure_number: u32, index: usize) -> String {
    format!("{pmcid}_fig{figure_number}_{index}.png")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::noise_panel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_panels_with_band(band: u32) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let top = noise_panel(&mut rng, 600, 290);
        let bottom = noise_panel(&mut rng, 600, 290);
        RasterImage::from_fn(600, 580 + band, |x, y| {
            if y < 290 {
                top.pixel(x, y)
            } else if y < 290 + band {
                [255, 255, 255]
            } else {
                bottom.pixel(x, y - 290 - band)
            }
        })
    }

    #[test]
    fn uniform_image_has_no_interior_gutters() {
        let img = RasterImage::filled(300, 300, [255, 255, 255]);
        let p = SplitParams::default();
        assert!(detect_gutters(&img, Axis::Horizontal, &p).is_empty());
        assert!(detect_gutters(&img, Axis::Vertical, &p).is_empty());
        assert_eq!(split_compound(&img, &p), vec![SubfigureBox { x: 0, y: 0, w: 300, h: 300, depth: 0 }]);
    }

    #[test]
    fn single_white_band_between_full_bleed_panels() {
        let img = two_panels_with_band(20);
        let p = SplitParams::default();
        assert_eq!(detect_gutters(&img, Axis::Horizontal, &p), vec![290..310]);
        assert!(detect_gutters(&img, Axis::Vertical, &p).is_empty());
        let boxes = split_compound(&img, &p);
        assert_eq!(
            boxes,
            vec![
                SubfigureBox { x: 0, y: 0, w: 600, h: 290, depth: 1 },
                SubfigureBox { x: 0, y: 310, w: 600, h: 290, depth: 1 },
            ]
        );
    }

    #[test]
    fn thin_band_below_min_gutter() {
        let img = two_panels_with_band(3);
        let p = SplitParams::default();
        assert!(detect_gutters(&img, Axis::Horizontal, &p).is_empty());
        assert_eq!(split_compound(&img, &p).len(), 1);
    }

    #[test]
    fn dark_spine_band_is_not_a_gutter() {
        // White margin, one noisy panel with a dark uniform vertical stripe.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let panel = noise_panel(&mut rng, 400, 300);
        let img = RasterImage::from_fn(440, 340, |x, y| {
            if (20..420).contains(&x) && (20..320).contains(&y) {
                if (200..230).contains(&x) {
                    [20, 20, 20]
                } else {
                    panel.pixel(x - 20, y - 20)
                }
            } else {
                [255, 255, 255]
            }
        });
        let p = SplitParams::default();
        assert!(detect_gutters(&img, Axis::Vertical, &p).is_empty());
        assert_eq!(split_compound(&img, &p), vec![SubfigureBox { x: 20, y: 20, w: 400, h: 300, depth: 0 }]);
    }

    #[test]
    fn min_size_filter() {
        let p = SplitParams::default();
        let b = |w, h| SubfigureBox { x: 0, y: 0, w, h, depth: 0 };
        assert!(filter_min_size(&[b(200, 300)], &p).is_empty());
        assert_eq!(filter_min_size(&[b(224, 224)], &p), vec![b(224, 224)]);
        assert!(filter_min_size(&[], &p).is_empty());
        assert!(filter_min_size(&[b(300, 223)], &p).is_empty());
    }

    #[test]
    fn params_validation() {
        assert!(SplitParams::default().validate().is_ok());
        assert!(SplitParams { min_gutter: 0, ..Default::default() }.validate().is_err());
        assert!(SplitParams { uniformity_threshold: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn crop_names() {
        assert_eq!(crop_file_name("PMC1", 2, 3), "PMC1_fig2_3.png");
    }
}
