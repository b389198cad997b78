use crate::raster::RasterImage;
use serde::{Deserialize, Serialize};

pub const HISTOGRAM_BINS: usize = 16;
pub const FEATURE_DIM: usize = 5 + HISTOGRAM_BINS;
/// Images are downscaled so the long side is at most this many pixels.
pub const FEATURE_LONG_SIDE: u32 = 256;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "channel_spread",
    "luma_hist_00",
    "luma_hist_01",
    "luma_hist_02",
    "luma_hist_03",
    "luma_hist_04",
    "luma_hist_05",
    "luma_hist_06",
    "luma_hist_07",
    "luma_hist_08",
    "luma_hist_09",
    "luma_hist_10",
    "luma_hist_11",
    "luma_hist_12",
    "luma_hist_13",
    "luma_hist_14",
    "luma_hist_15",
    "edge_density",
    "aspect_ratio",
    "border_darkness",
    "center_border_contrast",
];

/// Fixed-order image descriptor.
///
/// Layout: channel spread, 16 luma histogram bins, edge density, aspect
/// ratio, border darkness, center/border contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn channel_spread(&self) -> f64 {
        self.0[0]
    }

    pub fn histogram(&self) -> &[f64] {
        &self.0[1..1 + HISTOGRAM_BINS]
    }

    pub fn edge_density(&self) -> f64 {
        self.0[1 + HISTOGRAM_BINS]
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.0[2 + HISTOGRAM_BINS]
    }

    pub fn border_darkness(&self) -> f64 {
        self.0[3 + HISTOGRAM_BINS]
    }

    pub fn center_border_contrast(&self) -> f64 {
        self.0[4 + HISTOGRAM_BINS]
    }
}

fn downscale(image: &RasterImage) -> std::borrow::Cow<'_, RasterImage> {
    let (w, h) = (image.width(), image.height());
    let long = w.max(h);
    if long <= FEATURE_LONG_SIDE {
        return std::borrow::Cow::Borrowed(image);
    }
    let scale = |s: u32| ((s as u64 * FEATURE_LONG_SIDE as u64 + long as u64 / 2) / long as u64).max(1) as u32;
    std::borrow::Cow::Owned(image.resize_nearest(scale(w), scale(h)))
}

/// Compute the descriptor of an image.
///
/// * channel spread: mean over pixels of `(max(r,g,b) - min(r,g,b)) / 255`,
///   0 for any gray image and 1 for a saturated primary;
/// * luma histogram: 16 equal bins over 0–255, normalized to sum 1;
/// * edge density: mean absolute luma difference between horizontally and
///   vertically adjacent pixels, divided by 255;
/// * aspect ratio: width / height of the original image;
/// * border darkness: `1 - mean luma / 255` over a frame 5% of each side thick;
/// * center/border contrast: mean luma of the central half-size window minus
///   the border-frame mean luma, divided by 255.
pub fn extract_features(image: &RasterImage) -> FeatureVector {
    let aspect = image.width() as f64 / image.height() as f64;
    let img = downscale(image);
    let (w, h) = (img.width() as usize, img.height() as usize);
    let luma = img.luma_plane();
    let n = (w * h) as f64;

    let spread = img
        .pixels()
        .chunks_exact(3)
        .map(|p| {
            let max = p[0].max(p[1]).max(p[2]);
            let min = p[0].min(p[1]).min(p[2]);
            (max - min) as f64 / 255.0
        })
        .sum::<f64>()
        / n;

    let mut hist = [0.0f64; HISTOGRAM_BINS];
    for &l in &luma {
        let bin = ((l / 16.0) as usize).min(HISTOGRAM_BINS - 1);
        hist[bin] += 1.0;
    }
    for b in &mut hist {
        *b /= n;
    }

    let mut grad_sum = 0.0;
    let mut grad_n = 0usize;
    for y in 0..h {
        for x in 0..w {
            let v = luma[y * w + x];
            if x + 1 < w {
                grad_sum += (luma[y * w + x + 1] - v).abs();
                grad_n += 1;
            }
            if y + 1 < h {
                grad_sum += (luma[(y + 1) * w + x] - v).abs();
                grad_n += 1;
            }
        }
    }
    let edge = if grad_n == 0 { 0.0 } else { grad_sum / grad_n as f64 / 255.0 };

    let bw = ((w as f64 * 0.05).ceil() as usize).max(1);
    let bh = ((h as f64 * 0.05).ceil() as usize).max(1);
    let (mut border_sum, mut border_n) = (0.0, 0usize);
    let (cx0, cx1, cy0, cy1) = (w / 4, (w - w / 4).max(w / 4 + 1), h / 4, (h - h / 4).max(h / 4 + 1));
    let (mut center_sum, mut center_n) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let v = luma[y * w + x];
            if x < bw || x >= w.saturating_sub(bw) || y < bh || y >= h.saturating_sub(bh) {
                border_sum += v;
                border_n += 1;
            }
            if (cx0..cx1).contains(&x) && (cy0..cy1).contains(&y) {
                center_sum += v;
                center_n += 1;
            }
        }
    }
    let border_mean = border_sum / border_n.max(1) as f64 / 255.0;
    let center_mean = center_sum / center_n.max(1) as f64 / 255.0;

    let mut out = Vec::with_capacity(FEATURE_DIM);
    out.push(spread);
    out.extend_from_slice(&hist);
    out.push(edge);
    out.push(aspect);
    out.push(1.0 - border_mean);
    out.push(center_mean - border_mean);
    FeatureVector(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_gray_image() {
        let f = extract_features(&RasterImage::filled(40, 30, [128, 128, 128]));
        assert_eq!(f.len(), FEATURE_DIM);
        assert_eq!(f.channel_spread(), 0.0);
        assert_eq!(f.edge_density(), 0.0);
        assert!((f.aspect_ratio() - 4.0 / 3.0).abs() < 1e-15);
        assert!((f.histogram().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(f.histogram()[8], 1.0);
        assert!(f.center_border_contrast().abs() < 1e-12);
    }

    #[test]
    fn saturated_red_has_maximal_spread() {
        let f = extract_features(&RasterImage::filled(10, 10, [255, 0, 0]));
        assert_eq!(f.channel_spread(), 1.0);
    }

    #[test]
    fn spread_is_monotone_in_saturation() {
        let mut last = -1.0;
        for s in (0..=255).step_by(15) {
            let f = extract_features(&RasterImage::filled(8, 8, [255, 255 - s as u8, 255 - s as u8]));
            assert!(f.channel_spread() > last);
            last = f.channel_spread();
        }
    }

    #[test]
    fn checkerboard_edges_exceed_uniform() {
        let board = RasterImage::from_fn(64, 64, |x, y| if (x / 2 + y / 2) % 2 == 0 { [0; 3] } else { [255; 3] });
        let f = extract_features(&board);
        // Along each row, half of the neighbouring pairs change colour; same for
        // columns, so the mean absolute difference is exactly 0.5 away from the
        // last row/column boundary effects.
        assert!(f.edge_density() > 0.45);
        for v in [0u8, 77, 255] {
            assert!(f.edge_density() > extract_features(&RasterImage::filled(64, 64, [v; 3])).edge_density());
        }
    }

    #[test]
    fn large_images_are_downscaled_deterministically() {
        let img = RasterImage::from_fn(1000, 500, |x, y| [(x % 256) as u8, (y % 256) as u8, 0]);
        let a = extract_features(&img);
        assert_eq!(a, extract_features(&img));
        assert!((a.aspect_ratio() - 2.0).abs() < 1e-15);
        assert!(a.0.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dark_border_bright_center() {
        let img = RasterImage::from_fn(100, 100, |x, y| {
            if (25..75).contains(&x) && (25..75).contains(&y) {
                [200; 3]
            } else {
                [0; 3]
            }
        });
        let f = extract_features(&img);
        assert_eq!(f.border_darkness(), 1.0);
        assert!((f.center_border_contrast() - 200.0 / 255.0).abs() < 1e-12);
    }
}
