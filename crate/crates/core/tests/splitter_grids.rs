use figmine_core::raster::{RasterImage, Rect};
use figmine_core::splitter::{crop, split_compound, SplitParams, SubfigureBox};
use figmine_core::synthetic::{noise_panel, GridSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn edges_within(b: &SubfigureBox, r: &Rect, tol: i64) -> bool {
    let d = |a: u32, b: u32| (a as i64 - b as i64).abs() <= tol;
    d(b.x, r.x) && d(b.y, r.y) && d(b.x + b.w, r.right()) && d(b.y + b.h, r.bottom())
}

fn matches_generator(boxes: &[SubfigureBox], panels: &[Rect]) -> bool {
    boxes.len() == panels.len() && panels.iter().all(|p| boxes.iter().any(|b| edges_within(b, p, 2)))
}

fn assert_disjoint_and_contained(boxes: &[SubfigureBox], img: &RasterImage) {
    let total: u64 = boxes.iter().map(|b| b.rect().area()).sum();
    assert!(total <= img.bounds().area());
    for (i, a) in boxes.iter().enumerate() {
        assert!(a.x + a.w <= img.width() && a.y + a.h <= img.height());
        for b in &boxes[i + 1..] {
            assert!(!a.rect().intersects(&b.rect()), "{a:?} overlaps {b:?}");
        }
    }
}

#[test]
fn two_by_two_grid_900() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let spec = GridSpec {
        col_widths: vec![440, 440],
        row_heights: vec![440, 440],
        col_gutters: vec![20],
        row_gutters: vec![20],
        margin: 0,
        background: [255, 255, 255],
    };
    assert_eq!(spec.size(), (900, 900));
    let (img, panels) = spec.render(&mut rng);
    let boxes = split_compound(&img, &SplitParams::default());
    assert!(matches_generator(&boxes, &panels), "{boxes:?}");
    // each crop is pixel-equal to the generator's panel
    for p in &panels {
        let b = boxes.iter().find(|b| b.rect() == *p).expect("exact box");
        assert_eq!(crop(&img, b).unwrap(), img.crop(*p).unwrap());
    }
}

#[test]
fn three_panels_side_by_side() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let spec = GridSpec {
        col_widths: vec![250, 300, 260],
        row_heights: vec![280],
        col_gutters: vec![15, 12],
        row_gutters: vec![],
        margin: 10,
        background: [255, 255, 255],
    };
    let (img, panels) = spec.render(&mut rng);
    let boxes = split_compound(&img, &SplitParams::default());
    assert_eq!(boxes.len(), 3);
    assert!(matches_generator(&boxes, &panels), "{boxes:?}");
}

#[test]
fn noisy_panel_is_not_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let img = noise_panel(&mut rng, 320, 240);
    assert_eq!(split_compound(&img, &SplitParams::default()), vec![SubfigureBox { x: 0, y: 0, w: 320, h: 240, depth: 0 }]);
}

#[test]
fn resplitting_a_panel_returns_one_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let spec = GridSpec::random(&mut rng, 3, 6);
        let (img, _) = spec.render(&mut rng);
        let params = SplitParams::default();
        for b in split_compound(&img, &params) {
            let panel = crop(&img, &b).unwrap();
            let again = split_compound(&panel, &params);
            assert_eq!(again.len(), 1);
            assert_eq!((again[0].w, again[0].h), (b.w, b.h));
        }
    }
}

#[test]
fn recall_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let params = SplitParams::default();
    let mut hits = 0;
    for _ in 0..100 {
        let spec = GridSpec::random(&mut rng, 4, params.min_gutter);
        let (img, panels) = spec.render(&mut rng);
        let boxes = split_compound(&img, &params);
        assert_disjoint_and_contained(&boxes, &img);
        if matches_generator(&boxes, &panels) {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn boxes_are_disjoint_contained_and_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = GridSpec::random(&mut rng, 4, 6);
        let (img, _) = spec.render(&mut rng);
        let params = SplitParams::default();
        let boxes = split_compound(&img, &params);
        assert_disjoint_and_contained(&boxes, &img);
        prop_assert_eq!(boxes, split_compound(&img, &params));
    }
}
