//! Synthetic data generators: noisy panels, compound-figure grids with known
//! panel rectangles, modality-like images, and fixture corpora.
//!
//! Everything here is seeded and deterministic. The generators know the
//! ground truth by construction, which is what the tests compare against.

use crate::classifier::Modality;
use crate::raster::{RasterImage, Rect};
use rand::Rng;

/// A panel of per-pixel random gray levels.
pub fn noise_panel<R: Rng>(rng: &mut R, w: u32, h: u32) -> RasterImage {
    RasterImage::from_fn(w, h, |_, _| {
        let v: u8 = rng.random();
        [v, v, v]
    })
}

/// Layout of a compound figure: a regular grid of panels.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub col_widths: Vec<u32>,
    pub row_heights: Vec<u32>,
    /// Gutter widths between columns (`col_widths.len() - 1` entries).
    pub col_gutters: Vec<u32>,
    /// Gutter heights between rows (`row_heights.len() - 1` entries).
    pub row_gutters: Vec<u32>,
    pub margin: u32,
    pub background: [u8; 3],
}

impl GridSpec {
    /// Random grid with 1–`max_per_axis` panels per axis and gutters of at
    /// least `min_gutter` pixels.
    pub fn random<R: Rng>(rng: &mut R, max_per_axis: usize, min_gutter: u32) -> GridSpec {
        let cols = rng.random_range(1..=max_per_axis);
        let rows = rng.random_range(1..=max_per_axis);
        let backgrounds = [[255, 255, 255], [240, 240, 240], [0, 0, 0], [250, 250, 245]];
        GridSpec {
            col_widths: (0..cols).map(|_| rng.random_range(60..=220)).collect(),
            row_heights: (0..rows).map(|_| rng.random_range(60..=220)).collect(),
            col_gutters: (1..cols).map(|_| rng.random_range(min_gutter..=min_gutter + 24)).collect(),
            row_gutters: (1..rows).map(|_| rng.random_range(min_gutter..=min_gutter + 24)).collect(),
            margin: if rng.random_bool(0.5) { 0 } else { rng.random_range(1..=30) },
            background: backgrounds[rng.random_range(0..backgrounds.len())],
        }
    }

    pub fn panel_count(&self) -> usize {
        self.col_widths.len() * self.row_heights.len()
    }

    fn offsets(sizes: &[u32], gutters: &[u32], margin: u32) -> (Vec<u32>, u32) {
        let mut pos = margin;
        let mut out = Vec::with_capacity(sizes.len());
        for (i, s) in sizes.iter().enumerate() {
            out.push(pos);
            pos += s;
            if i < gutters.len() {
                pos += gutters[i];
            }
        }
        (out, pos + margin)
    }

    /// Panel rectangles in row-major order.
    pub fn panels(&self) -> Vec<Rect> {
        let (xs, _) = Self::offsets(&self.col_widths, &self.col_gutters, self.margin);
        let (ys, _) = Self::offsets(&self.row_heights, &self.row_gutters, self.margin);
        let mut out = Vec::new();
        for (r, &y) in ys.iter().enumerate() {
            for (c, &x) in xs.iter().enumerate() {
                out.push(Rect { x, y, w: self.col_widths[c], h: self.row_heights[r] });
            }
        }
        out
    }

    pub fn size(&self) -> (u32, u32) {
        let (_, w) = Self::offsets(&self.col_widths, &self.col_gutters, self.margin);
        let (_, h) = Self::offsets(&self.row_heights, &self.row_gutters, self.margin);
        (w, h)
    }

    /// Render with independent noise panels; returns the image and panels.
    pub fn render<R: Rng>(&self, rng: &mut R) -> (RasterImage, Vec<Rect>) {
        let panels = self.panels();
        let images: Vec<RasterImage> = panels.iter().map(|p| noise_panel(rng, p.w, p.h)).collect();
        let (w, h) = self.size();
        let mut img = RasterImage::filled(w, h, self.background);
        for (p, src) in panels.iter().zip(&images) {
            for y in 0..p.h {
                for x in 0..p.w {
                    img.set_pixel(p.x + x, p.y + y, src.pixel(x, y));
                }
            }
        }
        (img, panels)
    }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// A grayscale axial-CT-like slice: black field, bright body ellipse with
/// darker lung fields and a bright spine dot.
pub fn ct_like<R: Rng>(rng: &mut R, w: u32, h: u32) -> RasterImage {
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let (rx, ry) = (w as f64 * rng.random_range(0.38..0.46), h as f64 * rng.random_range(0.30..0.40));
    RasterImage::from_fn(w, h, |x, y| {
        let (dx, dy) = ((x as f64 - cx) / rx, (y as f64 - cy) / ry);
        let r = dx * dx + dy * dy;
        let noise: f64 = rng.random_range(-12.0..12.0);
        let v = if r > 1.0 {
            4.0 + noise.abs() * 0.3
        } else {
            let lx = (dx.abs() - 0.45) / 0.32;
            let ly = dy / 0.7;
            if lx * lx + ly * ly < 1.0 {
                45.0 + noise
            } else if dx.abs() < 0.08 && dy > 0.55 {
                235.0 + noise
            } else {
                150.0 + noise
            }
        };
        let g = clamp_u8(v);
        [g, g, g]
    })
}

/// A grayscale frontal chest-radiograph-like image: bright mediastinum and
/// bones, darker lungs, smooth vertical gradient.
pub fn cxr_like<R: Rng>(rng: &mut R, w: u32, h: u32) -> RasterImage {
    let base = rng.random_range(150.0..190.0);
    RasterImage::from_fn(w, h, |x, y| {
        let fx = x as f64 / w as f64;
        let fy = y as f64 / h as f64;
        let noise = rng.random_range(-6.0..6.0);
        let lung_l = ((fx - 0.3) / 0.15).powi(2) + ((fy - 0.5) / 0.32).powi(2) < 1.0;
        let lung_r = ((fx - 0.7) / 0.15).powi(2) + ((fy - 0.5) / 0.32).powi(2) < 1.0;
        let v = if lung_l || lung_r {
            base - 95.0 + 20.0 * fy + noise
        } else {
            base + 30.0 * (1.0 - (fx - 0.5).abs() * 2.0) - 25.0 * fy + noise
        };
        let g = clamp_u8(v);
        [g, g, g]
    })
}

/// A chart-like scientific figure: white background, colored bars, axes.
pub fn other_like<R: Rng>(rng: &mut R, w: u32, h: u32) -> RasterImage {
    let bars = rng.random_range(3..8u32);
    let colors: Vec<[u8; 3]> = (0..bars)
        .map(|_| [rng.random_range(0..255), rng.random_range(0..255), rng.random_range(0..255)])
        .collect();
    let heights: Vec<f64> = (0..bars).map(|_| rng.random_range(0.2..0.85)).collect();
    let left = w / 10;
    let bottom = h - h / 10;
    RasterImage::from_fn(w, h, |x, y| {
        if x == left || y == bottom {
            return [0, 0, 0];
        }
        if x > left && y < bottom {
            let slot = (w - left) / bars.max(1);
            let i = ((x - left) / slot.max(1)).min(bars - 1) as usize;
            let within = (x - left) % slot.max(1);
            let top = bottom as f64 * (1.0 - heights[i]);
            if within > slot / 5 && within < slot * 4 / 5 && (y as f64) > top {
                return colors[i];
            }
        }
        [255, 255, 255]
    })
}

pub fn modality_like<R: Rng>(rng: &mut R, modality: Modality, w: u32, h: u32) -> RasterImage {
    match modality {
        Modality::Ct => ct_like(rng, w, h),
        Modality::Cxr => cxr_like(rng, w, h),
        Modality::Other => other_like(rng, w, h),
    }
}

/// One figure of a fixture article: a grid of modality-like panels.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFigure {
    pub caption: String,
    /// Body paragraphs citing this figure.
    pub referring: Vec<String>,
    pub cols: u32,
    pub rows: u32,
    pub panel_size: (u32, u32),
    /// Row-major panel modalities, `cols * rows` entries.
    pub modalities: Vec<Modality>,
    /// Leave the image file out of the fixture directory.
    pub missing_image: bool,
}

impl FixtureFigure {
    pub const GUTTER: u32 = 24;
    pub const MARGIN: u32 = 12;

    pub fn panel_count(&self) -> usize {
        (self.cols * self.rows) as usize
    }

    /// White-background grid image of the panels.
    pub fn render<R: Rng>(&self, rng: &mut R) -> RasterImage {
        assert_eq!(self.modalities.len(), self.panel_count());
        let (pw, ph) = self.panel_size;
        let w = 2 * Self::MARGIN + self.cols * pw + (self.cols - 1) * Self::GUTTER;
        let h = 2 * Self::MARGIN + self.rows * ph + (self.rows - 1) * Self::GUTTER;
        let mut img = RasterImage::filled(w, h, [255, 255, 255]);
        for (i, &m) in self.modalities.iter().enumerate() {
            let (c, r) = (i as u32 % self.cols, i as u32 / self.cols);
            let panel = modality_like(rng, m, pw, ph);
            let (x0, y0) = (Self::MARGIN + c * (pw + Self::GUTTER), Self::MARGIN + r * (ph + Self::GUTTER));
            for y in 0..ph {
                for x in 0..pw {
                    img.set_pixel(x0 + x, y0 + y, panel.pixel(x, y));
                }
            }
        }
        img
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureArticle {
    pub pmcid: String,
    pub title: String,
    pub journal: String,
    pub year: String,
    /// Paragraphs placed before the figure-citing ones.
    pub paragraphs: Vec<String>,
    pub figures: Vec<FixtureFigure>,
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl FixtureArticle {
    pub fn graphic_ref(&self, figure_number: usize) -> String {
        format!("{}_gr{figure_number}.png", self.pmcid.to_lowercase())
    }

    /// BioC XML with title, body and figure passages.
    pub fn to_bioc(&self) -> String {
        let digits = self.pmcid.trim_start_matches("PMC");
        let mut passages = String::new();
        let mut offset = 0usize;
        let mut push = |section: &str, infons: String, text: &str| {
            passages.push_str(&format!(
                "<passage><infon key=\"section_type\">{section}</infon>{infons}<offset>{offset}</offset><text>{}</text></passage>\n",
                xml_escape(text)
            ));
            offset += text.chars().count() + 1;
        };
        push(
            "TITLE",
            format!(
                "<infon key=\"article-id_pmc\">{digits}</infon><infon key=\"article-id_doi\">10.5555/{}</infon>\
                 <infon key=\"journal\">{}</infon><infon key=\"year\">{}</infon><infon key=\"license\">CC BY</infon>",
                self.pmcid.to_lowercase(),
                xml_escape(&self.journal),
                xml_escape(&self.year)
            ),
            &self.title,
        );
        for p in &self.paragraphs {
            push("INTRO", String::new(), p);
        }
        for f in &self.figures {
            for p in &f.referring {
                push("RESULTS", String::new(), p);
            }
        }
        for (i, f) in self.figures.iter().enumerate() {
            let n = i + 1;
            push(
                "FIG",
                format!(
                    "<infon key=\"type\">fig_caption</infon><infon key=\"id\">F{n}</infon><infon key=\"file\">{}</infon>",
                    self.graphic_ref(n)
                ),
                &f.caption,
            );
        }
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<collection><source>PMC</source><date>20200101</date><key>pmc.key</key>\n\
             <document><id>{digits}</id>\n{passages}</document></collection>\n"
        )
    }
}

/// Write `<dir>/<PMCID>.xml` and `<dir>/<PMCID>/<image>.png` for each article.
pub fn write_fixture_corpus(dir: &std::path::Path, articles: &[FixtureArticle], seed: u64) -> std::io::Result<()> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    std::fs::create_dir_all(dir)?;
    for a in articles {
        std::fs::write(dir.join(format!("{}.xml", a.pmcid)), a.to_bioc())?;
        let img_dir = dir.join(&a.pmcid);
        std::fs::create_dir_all(&img_dir)?;
        for (i, f) in a.figures.iter().enumerate() {
            let img = f.render(&mut rng);
            if !f.missing_image {
                img.save_png(&img_dir.join(a.graphic_ref(i + 1))).map_err(std::io::Error::other)?;
            }
        }
    }
    Ok(())
}

fn fig(caption: &str, referring: &[&str], grid: (u32, u32), size: (u32, u32), mods: &[Modality]) -> FixtureFigure {
    FixtureFigure {
        caption: caption.into(),
        referring: referring.iter().map(|s| s.to_string()).collect(),
        cols: grid.0,
        rows: grid.1,
        panel_size: size,
        modalities: mods.to_vec(),
        missing_image: false,
    }
}

/// A three-article demo corpus with known composition:
///
/// | article | figure | panels | kept (≥ 224 px) |
/// |---|---|---|---|
/// | PMC7000001 | 1 | 2 CT, 260×240 | 2 |
/// | PMC7000001 | 2 | 1 CXR, 300×280 | 1 |
/// | PMC7000002 | 1 | 2×2 CT, CT, CXR, Other, 290×240 | 4 |
/// | PMC7000002 | 2 | 3 Other, 150×150 | 0 |
/// | PMC7000003 | 1 | 1 Other, 320×240 | 1 |
/// | PMC7000003 | 2 | image file missing | – |
pub fn demo_corpus() -> Vec<FixtureArticle> {
    use Modality::{Ct, Cxr, Other};
    let article = |pmcid: &str, title: &str, paragraphs: &[&str], figures: Vec<FixtureFigure>| FixtureArticle {
        pmcid: pmcid.into(),
        title: title.into(),
        journal: "Journal of Synthetic Radiology".into(),
        year: "2020".into(),
        paragraphs: paragraphs.iter().map(|s| s.to_string()).collect(),
        figures,
    };
    let mut missing = fig(
        "Timeline of symptoms.",
        &["The timeline of fever and fatigue is given in Figure 2."],
        (1, 1),
        (300, 260),
        &[Other],
    );
    missing.missing_image = true;
    vec![
        article(
            "PMC7000001",
            "Chest CT findings in a COVID-19 pneumonia case",
            &["A 54-year-old woman was admitted with fever and dry cough."],
            vec![
                fig(
                    "Axial chest CT images showing bilateral ground-glass opacities and crazy paving.",
                    &["Chest CT on admission revealed bilateral GGO (Figure 1). He noted myalgia and a sore throat but no fever on 3 February."],
                    (2, 1),
                    (260, 240),
                    &[Ct, Ct],
                ),
                fig(
                    "Chest radiograph without pleural effusion.",
                    &["The chest radiograph (Fig. 2) showed no pneumothorax."],
                    (1, 1),
                    (300, 280),
                    &[Cxr],
                ),
            ],
        ),
        article(
            "PMC7000002",
            "Imaging of coronavirus disease 2019 in a family cluster",
            &["Three family members presented with fever, cough and myalgia."],
            vec![
                fig(
                    "(A, B) CT shows ground-glass opacity with air bronchogram. (C) Radiograph with consolidation. (D) Symptom counts.",
                    &["Figure 1A and 1B show GGO; Figure 1C shows consolidation in the left lower lobe. The patients denied diarrhea."],
                    (2, 2),
                    (290, 240),
                    &[Ct, Ct, Cxr, Other],
                ),
                fig(
                    "Small charts of laboratory values.",
                    &["Laboratory values are plotted in Figure 2."],
                    (3, 1),
                    (150, 150),
                    &[Other, Other, Other],
                ),
            ],
        ),
        article(
            "PMC7000003",
            "Influenza pneumonia with pulmonary infiltrates",
            &["An elderly man presented with fever, cough and sputum production."],
            vec![
                fig(
                    "Distribution of symptoms in the influenza cohort.",
                    &["Figure 1 summarizes symptoms; infiltration was seen on the radiograph and no GGO was present."],
                    (1, 1),
                    (320, 240),
                    &[Other],
                ),
                missing,
            ],
        ),
    ]
}
