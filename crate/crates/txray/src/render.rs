// SPDX-License-Identifier: MIT OR Apache-2.0

//! Standalone SVG 1.1 figures drawn from a report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use txray_core::metrics::{Direction, NeuronState};

use crate::error::{Error, Result};
use crate::report::{FeatureRow, Report};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Figure {
    /// Hellinger distance against later-stage length for shared neurons.
    Scatter { comparison: usize },
    /// One neuron's feature probabilities in both stages of a comparison,
    /// one bar group per feature, grouped by tag.
    Histogram { comparison: usize, neuron: usize },
    /// Per-neuron length before and after, one line per neuron.
    LengthShift { index: usize },
    /// Sorted activation masses of every stage with a curve.
    MassCurve,
    /// Corpus tag frequencies against activation shares.
    TagMatch { index: usize },
}

impl Figure {
    pub fn file_stem(&self) -> String {
        match self {
            Figure::Scatter { comparison } => format!("scatter-{comparison}"),
            Figure::Histogram { comparison, neuron } => format!("histogram-{comparison}-n{neuron}"),
            Figure::LengthShift { index } => format!("length-shift-{index}"),
            Figure::MassCurve => "mass-curve".into(),
            Figure::TagMatch { index } => format!("tag-match-{index}"),
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const SERIES: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Axis-aligned plotting area mapping data ranges onto the canvas.
struct Plot {
    out: String,
    x: (f64, f64),
    y: (f64, f64),
}

impl Plot {
    fn new(title: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            esc(title)
        );
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
        Plot {
            out,
            x: widen(x),
            y: widen(y),
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&mut self, x_label: &str, y_label: &str, x_ticks: bool) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        let _ = writeln!(
            self.out,
            r#"<g class="axes" stroke="black"><line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let py = self.py(yv);
            let _ = writeln!(
                self.out,
                r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                py + 4.0,
                tick(yv)
            );
            if x_ticks {
                let xv = self.x.0 + f * (self.x.1 - self.x.0);
                let _ = writeln!(
                    self.out,
                    r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
                    self.px(xv),
                    H - BOTTOM + 16.0,
                    tick(xv)
                );
            }
        }
        let _ = writeln!(
            self.out,
            r#"<text class="x-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 14.0,
            esc(x_label)
        );
        let _ = writeln!(
            self.out,
            r#"<text class="y-label" x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            esc(y_label)
        );
    }

    fn legend(&mut self, entries: &[(&str, String)]) {
        for (i, (color, label)) in entries.iter().enumerate() {
            let y = TOP + 4.0 + 16.0 * i as f64;
            let x = W - RIGHT - 170.0;
            let _ = writeln!(
                self.out,
                r#"<g class="legend"><rect x="{x}" y="{y}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text></g>"#,
                x + 14.0,
                y + 9.0,
                esc(label)
            );
        }
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 100.0 || v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn max_of(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

pub fn render(report: &Report, figure: &Figure) -> Result<String> {
    match *figure {
        Figure::Scatter { comparison } => scatter(report, comparison),
        Figure::Histogram { comparison, neuron } => histogram(report, comparison, neuron),
        Figure::LengthShift { index } => length_shift(report, index),
        Figure::MassCurve => mass_curves(report),
        Figure::TagMatch { index } => tag_match(report, index),
    }
}

fn comparison(report: &Report, i: usize) -> Result<&crate::report::Comparison> {
    if report.comparisons.is_empty() {
        return Err(Error::Render("no comparison section".into()));
    }
    report
        .comparisons
        .get(i)
        .ok_or_else(|| Error::Render(format!("no comparison {i} (report has {})", report.comparisons.len())))
}

fn scatter(report: &Report, i: usize) -> Result<String> {
    let c = comparison(report, i)?;
    let points: Vec<(usize, f64, usize)> = c
        .points
        .iter()
        .filter(|p| p.state == NeuronState::Shared)
        .filter_map(|p| p.distance.map(|d| (p.neuron, d, p.length_b)))
        .collect();
    let x_max = max_of(points.iter().map(|p| p.2 as f64));
    let mut plot = Plot::new(
        &format!("Hellinger distance vs. length: {} → {}", c.pair[0], c.pair[1]),
        (0.0, x_max),
        (0.0, 1.0),
    );
    plot.axes(&format!("neuron length l ({})", c.pair[1]), "Hellinger distance H", true);
    for (n, d, l) in points {
        let _ = writeln!(
            plot.out,
            r#"<circle class="point" data-n="{n}" cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.7"/>"#,
            plot.px(l as f64),
            plot.py(d),
            SERIES[0]
        );
    }
    let s = &c.summary;
    plot.legend(&[(SERIES[0], format!("shared {}", s.counts.shared))]);
    Ok(plot.finish())
}

fn histogram(report: &Report, i: usize, neuron: usize) -> Result<String> {
    let c = comparison(report, i)?;
    let detail = |stage: &str| {
        report
            .detail(neuron, stage)
            .ok_or_else(|| Error::Render(format!("no neuron_details for neuron {neuron} in {stage}")))
    };
    let (a, b) = (detail(&c.pair[0])?, detail(&c.pair[1])?);
    // Union of features; tag and order follow the later stage, then the
    // earlier one for features it lacks.
    let mut rows: Vec<(Option<String>, String, f64, f64)> = Vec::new();
    let p_of = |rows: &[FeatureRow], t: &str| rows.iter().find(|f| f.token == t).map_or(0.0, |f| f.p);
    for f in b.features.iter().chain(&a.features) {
        if rows.iter().any(|r| r.1 == f.token) {
            continue;
        }
        rows.push((f.tag.clone(), f.token.clone(), p_of(&a.features, &f.token), p_of(&b.features, &f.token)));
    }
    rows.sort_by(|x, y| {
        x.0.cmp(&y.0)
            .then(y.3.max(y.2).total_cmp(&x.3.max(x.2)))
            .then_with(|| x.1.cmp(&y.1))
    });
    let y_max = max_of(rows.iter().map(|r| r.2.max(r.3)));
    let mut plot = Plot::new(&format!("Neuron {neuron}: feature probabilities"), (0.0, rows.len().max(1) as f64), (0.0, y_max));
    plot.axes("features grouped by tag", "probability p", false);
    let slot = (W - LEFT - RIGHT) / rows.len().max(1) as f64;
    let bar = (slot * 0.4).min(14.0);
    let mut current_tag: Option<&Option<String>> = None;
    for (k, (tag, token, pa, pb)) in rows.iter().enumerate() {
        let x = LEFT + slot * k as f64 + slot / 2.0;
        if current_tag != Some(tag) {
            if current_tag.is_some() {
                let sep = LEFT + slot * k as f64;
                let _ = writeln!(
                    plot.out,
                    r##"<line class="tag-separator" x1="{sep:.2}" y1="{TOP}" x2="{sep:.2}" y2="{}" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##,
                    H - BOTTOM
                );
            }
            current_tag = Some(tag);
            let _ = writeln!(
                plot.out,
                r#"<text class="tag-label" x="{:.2}" y="{}" font-weight="bold">{}</text>"#,
                LEFT + slot * k as f64 + 4.0,
                TOP + 12.0,
                esc(tag.as_deref().unwrap_or("-"))
            );
        }
        let _ = writeln!(plot.out, r#"<g class="bar-group" data-token="{}" data-tag="{}">"#, esc(token), esc(tag.as_deref().unwrap_or("")));
        for (j, p) in [pa, pb].into_iter().enumerate() {
            let top = plot.py(*p);
            let _ = writeln!(
                plot.out,
                r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{bar:.2}" height="{:.2}" fill="{}" fill-opacity="0.8"/>"#,
                x - bar + bar * j as f64,
                top,
                H - BOTTOM - top,
                SERIES[j]
            );
        }
        let _ = writeln!(
            plot.out,
            r#"<text x="{x:.2}" y="{}" text-anchor="end" transform="rotate(-45 {x:.2} {})">{}</text>"#,
            H - BOTTOM + 12.0,
            H - BOTTOM + 12.0,
            esc(token)
        );
        plot.out.push_str("</g>\n");
    }
    let badge = |d: &crate::report::NeuronDetail, s: &str| {
        if d.features.is_empty() {
            format!("{s} (un-preferred)")
        } else {
            s.to_string()
        }
    };
    plot.legend(&[(SERIES[0], badge(a, &c.pair[0])), (SERIES[1], badge(b, &c.pair[1]))]);
    Ok(plot.finish())
}

fn length_shift(report: &Report, i: usize) -> Result<String> {
    if report.length_shifts.is_empty() {
        return Err(Error::Render("no length_shifts section".into()));
    }
    let s = report
        .length_shifts
        .get(i)
        .ok_or_else(|| Error::Render(format!("no length shift {i}")))?;
    let y_max = max_of(s.neurons.iter().map(|n| n.l_a.max(n.l_b) as f64));
    let mut plot = Plot::new(&format!("Neuron length: {} → {}", s.stage_a, s.stage_b), (0.0, 1.0), (0.0, y_max));
    plot.axes("stage", "neuron length l", false);
    for n in &s.neurons {
        let color = match n.direction {
            Direction::Longer => SERIES[0],
            Direction::Shorter => SERIES[1],
            Direction::Unchanged => "#999999",
        };
        let _ = writeln!(
            plot.out,
            r#"<line class="shift" data-n="{}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-opacity="0.6"/>"#,
            n.neuron,
            plot.px(0.0),
            plot.py(n.l_a as f64),
            plot.px(1.0),
            plot.py(n.l_b as f64)
        );
    }
    let _ = writeln!(
        plot.out,
        r#"<text x="{}" y="{}" text-anchor="start">{}</text><text x="{}" y="{}" text-anchor="end">{}</text>"#,
        LEFT,
        H - BOTTOM + 16.0,
        esc(&s.stage_a),
        W - RIGHT,
        H - BOTTOM + 16.0,
        esc(&s.stage_b)
    );
    plot.legend(&[
        (SERIES[0], format!("longer {}", s.longer)),
        (SERIES[1], format!("shorter {}", s.shorter)),
        ("#999999", format!("unchanged {}", s.unchanged)),
    ]);
    Ok(plot.finish())
}

fn mass_curves(report: &Report) -> Result<String> {
    if report.mass_curves.is_empty() {
        return Err(Error::Render("no mass_curves section".into()));
    }
    let n_max = report.mass_curves.iter().map(|c| c.sorted.len()).max().unwrap_or(1);
    let y_max = max_of(report.mass_curves.iter().flat_map(|c| c.sorted.iter().map(|p| p.1)));
    let mut plot = Plot::new("Sorted neuron activation masses", (1.0, n_max as f64), (0.0, y_max));
    plot.axes("rank", "activation mass", true);
    let mut legend = Vec::new();
    for (k, c) in report.mass_curves.iter().enumerate() {
        let color = SERIES[k % SERIES.len()];
        let pts: Vec<String> = c
            .sorted
            .iter()
            .enumerate()
            .map(|(r, (_, m))| format!("{:.2},{:.2}", plot.px((r + 1) as f64), plot.py(*m)))
            .collect();
        let _ = writeln!(
            plot.out,
            r#"<polyline class="curve" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        legend.push((color, format!("{} (Gini {:.3})", c.stage_id, c.gini)));
    }
    plot.legend(&legend.iter().map(|(c, l)| (*c, l.clone())).collect::<Vec<_>>());
    Ok(plot.finish())
}

fn tag_match(report: &Report, i: usize) -> Result<String> {
    if report.tag_match.is_empty() {
        return Err(Error::Render("no tag_match section".into()));
    }
    let m = report
        .tag_match
        .get(i)
        .ok_or_else(|| Error::Render(format!("no tag match {i}")))?;
    let y_max = 100.0 * max_of(m.tags.iter().map(|t| t.corpus.max(t.activation)));
    let mut plot = Plot::new(&format!("Tag frequency vs. activation share: {} (L1 {:.3})", m.stage_id, m.l1), (0.0, m.tags.len().max(1) as f64), (0.0, y_max));
    plot.axes("tag", "% of tokens / % of activation mass", false);
    let slot = (W - LEFT - RIGHT) / m.tags.len().max(1) as f64;
    let bar = (slot * 0.4).min(14.0);
    for (k, t) in m.tags.iter().enumerate() {
        let x = LEFT + slot * k as f64 + slot / 2.0;
        for (j, v) in [t.corpus, t.activation].into_iter().enumerate() {
            let top = plot.py(100.0 * v);
            let _ = writeln!(
                plot.out,
                r#"<rect class="bar" x="{:.2}" y="{:.2}" width="{bar:.2}" height="{:.2}" fill="{}"/>"#,
                x - bar + bar * j as f64,
                top,
                H - BOTTOM - top,
                SERIES[j]
            );
        }
        let _ = writeln!(
            plot.out,
            r#"<text x="{x:.2}" y="{}" text-anchor="end" transform="rotate(-45 {x:.2} {})">{}</text>"#,
            H - BOTTOM + 12.0,
            H - BOTTOM + 12.0,
            esc(&t.tag)
        );
    }
    plot.legend(&[(SERIES[0], "corpus %".into()), (SERIES[1], "activation %".into())]);
    Ok(plot.finish())
}

/// Every figure a report supports: per comparison a scatter plot and the
/// histogram of the shared neuron that changed most, then length shifts,
/// mass curves and tag matches.
pub fn standard_figures(report: &Report) -> Vec<Figure> {
    let mut figures = Vec::new();
    for (i, c) in report.comparisons.iter().enumerate() {
        figures.push(Figure::Scatter { comparison: i });
        let top = c
            .points
            .iter()
            .filter_map(|p| p.distance.map(|d| (p.neuron, d)))
            .fold(None::<(usize, f64)>, |best, (n, d)| match best {
                Some((_, b)) if b >= d => best,
                _ => Some((n, d)),
            });
        if let Some((neuron, _)) = top {
            figures.push(Figure::Histogram { comparison: i, neuron });
        }
    }
    figures.extend((0..report.length_shifts.len()).map(|index| Figure::LengthShift { index }));
    if !report.mass_curves.is_empty() {
        figures.push(Figure::MassCurve);
    }
    figures.extend((0..report.tag_match.len()).map(|index| Figure::TagMatch { index }));
    figures
}

/// Renders [`standard_figures`] into `dir` as `<stem>.svg`.
pub fn write_figures(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    standard_figures(report)
        .iter()
        .map(|f| {
            let path = dir.join(format!("{}.svg", f.file_stem()));
            crate::text::write(&path, render(report, f)?)?;
            Ok(path)
        })
        .collect()
}
