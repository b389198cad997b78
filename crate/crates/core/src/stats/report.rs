use super::{frequency_comparison, StatsError, TermFrequency};
use crate::textmine::{Category, Lexicon, Mention};
use serde::{Deserialize, Serialize};
use std::fmt::Write;

/// Cohort term-frequency comparison, split by category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub cohort_a: String,
    pub cohort_b: String,
    pub n_a: u64,
    pub n_b: u64,
    /// What one counted item is.
    pub unit: String,
    pub test: String,
    pub symptoms: Vec<TermFrequency>,
    pub findings: Vec<TermFrequency>,
}

impl FrequencyReport {
    /// Each item of a cohort is the mention list of one article.
    pub fn build<S: AsRef<[Mention]>>(
        label_a: &str,
        label_b: &str,
        cohort_a: &[S],
        cohort_b: &[S],
        lexicon: &Lexicon,
    ) -> Result<FrequencyReport, StatsError> {
        let rows = frequency_comparison(cohort_a, cohort_b, lexicon)?;
        let (symptoms, findings) = rows.into_iter().partition(|r| r.category == Category::Symptom);
        Ok(FrequencyReport {
            cohort_a: label_a.to_string(),
            cohort_b: label_b.to_string(),
            n_a: cohort_a.len() as u64,
            n_b: cohort_b.len() as u64,
            unit: "article".into(),
            test: "fisher_exact_two_sided".into(),
            symptoms,
            findings,
        })
    }

    pub fn rows(&self, category: Category) -> &[TermFrequency] {
        match category {
            Category::Symptom => &self.symptoms,
            Category::Finding => &self.findings,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<FrequencyReport> {
        serde_json::from_str(s)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const COLOR_A: &str = "#c0392b";
const COLOR_B: &str = "#2e86c1";

/// Horizontal grouped bar chart of one category: per term, the proportion of
/// each cohort with a positive mention, plus significance stars.
///
/// All coordinates are printed with fixed precision, so identical reports
/// render to identical bytes.
pub fn render_frequency_svg(report: &FrequencyReport, category: Category) -> String {
    let rows = report.rows(category);
    let (label_w, plot_w, star_w) = (190.0, 360.0, 50.0);
    let (top, row_h, bar_h) = (70.0, 26.0, 10.0);
    let width = label_w + plot_w + star_w + 20.0;
    let height = top + row_h * rows.len() as f64 + 30.0;
    let panel = match category {
        Category::Symptom => "A",
        Category::Finding => "B",
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="10" y="20" font-size="14" font-weight="bold">({panel}) {} {}s</text>"#,
        rows.len(),
        category.as_str()
    );
    for (i, (label, n, color)) in
        [(&report.cohort_a, report.n_a, COLOR_A), (&report.cohort_b, report.n_b, COLOR_B)].into_iter().enumerate()
    {
        let x = label_w + i as f64 * 170.0;
        let _ = writeln!(s, r#"<rect x="{x:.1}" y="30" width="12" height="12" fill="{color}"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="40">{} (n={n})</text>"#, x + 16.0, escape(label));
    }
    for k in 0..=4 {
        let frac = k as f64 / 4.0;
        let x = label_w + plot_w * frac;
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#dddddd"/>"##,
            top - 6.0,
            top + row_h * rows.len() as f64
        );
        let _ = writeln!(s, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{frac:.2}</text>"#, top - 10.0);
    }
    for (i, r) in rows.iter().enumerate() {
        let y = top + row_h * i as f64;
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#, label_w - 8.0, y + 15.0, escape(&r.term));
        for (j, (prop, color)) in [(r.prop_a, COLOR_A), (r.prop_b, COLOR_B)].into_iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<rect x="{label_w:.1}" y="{:.1}" width="{:.1}" height="{bar_h:.1}" fill="{color}"><title>{:.3}</title></rect>"#,
                y + 3.0 + j as f64 * bar_h,
                plot_w * prop,
                prop
            );
        }
        if !r.stars.is_empty() {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, label_w + plot_w + 6.0, y + 16.0, r.stars);
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="10" y="{:.1}" font-size="10">proportion of articles with a positive mention; stars: Fisher exact test, * p≤0.05, ** p≤0.01, *** p≤0.001, **** p≤0.0001</text>"#,
        height - 10.0
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmine::load_default_lexicon;

    #[test]
    fn svg_is_stable_and_complete() {
        let lex = load_default_lexicon();
        let items: Vec<Vec<Mention>> = vec![Vec::new(), Vec::new()];
        let report = FrequencyReport::build("covid19", "influenza", &items, &items, &lex).unwrap();
        assert_eq!(report.symptoms.len(), 15);
        assert_eq!(report.findings.len(), 20);
        let a = render_frequency_svg(&report, Category::Finding);
        assert_eq!(a, render_frequency_svg(&report, Category::Finding));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<title>").count(), 40);
        assert_eq!(FrequencyReport::from_json(&report.to_json()).unwrap(), report);
    }
}
