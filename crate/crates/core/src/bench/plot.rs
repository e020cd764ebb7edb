//! Plain SVG line plots with interquartile whiskers.
//!
//! Figures are rendered from a parsed summary CSV only, so re-running `plot`
//! on a summary reproduces the sweep's SVG byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::config::ExperimentKind;
use super::output::SummaryTable;
use super::BenchError;

const PANEL_W: f64 = 340.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 62.0;
const MARGIN_R: f64 = 14.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 46.0;
const TITLE_H: f64 = 30.0;
const LEGEND_H: f64 = 26.0;
const PALETTE: [&str; 12] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#7f7f7f",
    "#bcbd22", "#000000", "#aec7e8",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    /// Whisker ends; equal to `y` for no whisker.
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<PlotPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
    /// Dashed horizontal reference lines.
    pub hlines: Vec<(f64, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub columns: usize,
    pub panels: Vec<Panel>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let vals: Vec<f64> = values
            .filter(|v| v.is_finite() && (!log || *v > 0.0))
            .map(|v| if log { v.log10() } else { v })
            .collect();
        let (mut lo, mut hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            let pad = if lo.abs() > 0.0 { lo.abs() * 0.1 } else { 0.5 };
            lo -= pad;
            hi += pad;
        } else {
            let pad = (hi - lo) * 0.06;
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let t = if self.log { v.log10() } else { v };
        Some((t - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<f64> {
        if !self.log {
            return linear_ticks(self.lo, self.hi);
        }
        let decades: Vec<f64> = (self.lo.ceil() as i32..=self.hi.floor() as i32)
            .map(|k| 10f64.powi(k))
            .collect();
        if decades.len() >= 2 {
            return decades;
        }
        let inside = |v: &f64| *v > 0.0 && (self.lo..=self.hi).contains(&v.log10());
        let t: Vec<f64> = (self.lo.floor() as i32..=self.hi.ceil() as i32)
            .flat_map(|k| [1.0, 2.0, 5.0].map(|m| m * 10f64.powi(k)))
            .filter(inside)
            .collect();
        if t.len() >= 3 {
            return t;
        }
        linear_ticks(10f64.powf(self.lo), 10f64.powf(self.hi))
            .into_iter()
            .filter(inside)
            .collect()
    }
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e5).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        format!("{v:.0e}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(fig: &Figure) -> String {
    let cols = fig.columns.max(1).min(fig.panels.len().max(1));
    let rows = fig.panels.len().div_ceil(cols).max(1);
    let width = cols as f64 * PANEL_W;
    let height = TITLE_H + rows as f64 * PANEL_H + LEGEND_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        width / 2.0,
        esc(&fig.title)
    );

    let mut names: Vec<&str> = Vec::new();
    for p in &fig.panels {
        for sr in &p.series {
            if !names.contains(&sr.name.as_str()) {
                names.push(&sr.name);
            }
        }
    }
    let color = |name: &str| PALETTE[names.iter().position(|n| *n == name).unwrap_or(0) % PALETTE.len()];

    for (i, panel) in fig.panels.iter().enumerate() {
        let ox = (i % cols) as f64 * PANEL_W;
        let oy = TITLE_H + (i / cols) as f64 * PANEL_H;
        let (x0, x1) = (ox + MARGIN_L, ox + PANEL_W - MARGIN_R);
        let (y0, y1) = (oy + MARGIN_T, oy + PANEL_H - MARGIN_B);
        let pts = || panel.series.iter().flat_map(|s| s.points.iter());
        let xa = Axis::new(pts().map(|p| p.x), panel.log_x);
        let ya = Axis::new(
            pts()
                .flat_map(|p| [p.y, p.lo, p.hi])
                .chain(panel.hlines.iter().map(|h| h.0)),
            panel.log_y,
        );
        let px = |v: f64| xa.frac(v).map(|f| x0 + f * (x1 - x0));
        let py = |v: f64| ya.frac(v).map(|f| y1 - f * (y1 - y0));

        let _ = writeln!(
            s,
            r#"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y1 - y0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
            (x0 + x1) / 2.0,
            oy + 18.0,
            esc(&panel.title)
        );
        for t in xa.ticks() {
            if let Some(x) = px(t) {
                let _ = writeln!(
                    s,
                    r##"<line x1="{x:.1}" y1="{y1:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
                    y1 + 4.0,
                    y1 + 16.0,
                    tick_label(t)
                );
            }
        }
        for t in ya.ticks() {
            if let Some(y) = py(t) {
                let _ = writeln!(
                    s,
                    r##"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="black"/><line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#e6e6e6"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                    x0 - 4.0,
                    x0 - 6.0,
                    y + 4.0,
                    tick_label(t)
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            y1 + 32.0,
            esc(&panel.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate({:.1},{:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            ox + 14.0,
            (y0 + y1) / 2.0,
            esc(&panel.y_label)
        );
        for (v, label) in &panel.hlines {
            if let Some(y) = py(*v) {
                let _ = writeln!(
                    s,
                    r##"<line x1="{x0:.1}" y1="{y:.1}" x2="{x1:.1}" y2="{y:.1}" stroke="#555" stroke-dasharray="5,4"/><text x="{:.1}" y="{:.1}" text-anchor="end" fill="#555">{}</text>"##,
                    x1 - 3.0,
                    y - 3.0,
                    esc(label)
                );
            }
        }
        for sr in &panel.series {
            let c = color(&sr.name);
            let path: Vec<String> = sr
                .points
                .iter()
                .filter_map(|p| Some(format!("{:.1},{:.1}", px(p.x)?, py(p.y)?)))
                .collect();
            if path.len() > 1 {
                let _ = writeln!(
                    s,
                    r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="1.5"/>"#,
                    path.join(" ")
                );
            }
            for p in &sr.points {
                let (Some(x), Some(y)) = (px(p.x), py(p.y)) else { continue };
                if let (Some(lo), Some(hi)) = (py(p.lo), py(p.hi)) {
                    if (lo - hi).abs() > 0.05 {
                        let _ = writeln!(
                            s,
                            r#"<line x1="{x:.1}" y1="{lo:.1}" x2="{x:.1}" y2="{hi:.1}" stroke="{c}"/><line x1="{:.1}" y1="{lo:.1}" x2="{:.1}" y2="{lo:.1}" stroke="{c}"/><line x1="{:.1}" y1="{hi:.1}" x2="{:.1}" y2="{hi:.1}" stroke="{c}"/>"#,
                            x - 3.0,
                            x + 3.0,
                            x - 3.0,
                            x + 3.0
                        );
                    }
                }
                let _ = writeln!(s, r#"<circle cx="{x:.1}" cy="{y:.1}" r="2.5" fill="{c}"/>"#);
            }
        }
    }

    let ly = TITLE_H + rows as f64 * PANEL_H + 14.0;
    let mut lx = 12.0;
    for n in &names {
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            ly - 4.0,
            lx + 18.0,
            ly - 4.0,
            color(n),
            lx + 22.0,
            ly,
            esc(n)
        );
        lx += 30.0 + 7.0 * n.chars().count() as f64;
    }
    s.push_str("</svg>\n");
    s
}

fn num(t: &SummaryTable, row: &[String], col: &str) -> Result<f64, BenchError> {
    let i = t.column(col)?;
    row[i]
        .parse()
        .map_err(|_| BenchError::Config(format!("column {col}: not a number: {:?}", row[i])))
}

fn text<'a>(t: &SummaryTable, row: &'a [String], col: &str) -> Result<&'a str, BenchError> {
    Ok(&row[t.column(col)?])
}

/// Builds the figure for a summary table.
pub fn figure_from_summary(t: &SummaryTable) -> Result<Figure, BenchError> {
    match t.experiment {
        ExperimentKind::KlSweep | ExperimentKind::DimSweep | ExperimentKind::SingleRun => sweep_figure(t),
        ExperimentKind::NnBounds => nn_figure(t),
    }
}

fn sweep_figure(t: &SummaryTable) -> Result<Figure, BenchError> {
    let by_kl = t.experiment != ExperimentKind::DimSweep;
    // panel key -> series name -> points
    let mut panels: BTreeMap<(String, u64), BTreeMap<String, Vec<PlotPoint>>> = BTreeMap::new();
    let mut order: Vec<(String, u64)> = Vec::new();
    for row in &t.rows {
        if text(t, row, "metric")? != "lp_error" {
            continue;
        }
        let p = num(t, row, "p")?;
        let loss = text(t, row, "loss")?.to_string();
        let point = |x: f64| -> Result<PlotPoint, BenchError> {
            Ok(PlotPoint {
                x,
                y: num(t, row, "median")?,
                lo: num(t, row, "q25")?,
                hi: num(t, row, "q75")?,
            })
        };
        let (pkey, series, pt) = if by_kl {
            ((String::new(), p.to_bits()), loss, point(num(t, row, "kl")?)?)
        } else {
            (
                (loss, p.to_bits()),
                format!("d = {}", text(t, row, "d")?),
                point(num(t, row, "n_train")?)?,
            )
        };
        if !order.contains(&pkey) {
            order.push(pkey.clone());
        }
        panels.entry(pkey).or_default().entry(series).or_default().push(pt);
    }
    if panels.is_empty() {
        return Err(BenchError::Config("summary has no lp_error rows to plot".into()));
    }
    let p_count = order.iter().map(|k| k.1).collect::<std::collections::BTreeSet<_>>().len();
    let panels = order
        .into_iter()
        .map(|key| {
            let p = f64::from_bits(key.1);
            let mut series: Vec<Series> = panels
                .remove(&key)
                .unwrap_or_default()
                .into_iter()
                .map(|(name, mut points)| {
                    points.sort_by(|a, b| a.x.total_cmp(&b.x));
                    Series { name, points }
                })
                .collect();
            if !by_kl {
                series.sort_by_key(|s| s.name.trim_start_matches("d = ").parse::<usize>().unwrap_or(0));
            }
            Panel {
                title: if key.0.is_empty() {
                    format!("L{p} error")
                } else {
                    format!("L{p} error, {}", key.0)
                },
                x_label: if by_kl { "KL divergence".into() } else { "training samples".into() },
                y_label: format!("median L{p} error"),
                log_x: !by_kl,
                log_y: true,
                series,
                hlines: Vec::new(),
            }
        })
        .collect();
    Ok(Figure {
        title: if by_kl {
            "Lp error vs KL divergence (median, IQR)".into()
        } else {
            "Lp error vs training size by dimension (median, IQR)".into()
        },
        columns: p_count,
        panels,
    })
}

fn nn_figure(t: &SummaryTable) -> Result<Figure, BenchError> {
    let mut upper: BTreeMap<(usize, u64), Vec<PlotPoint>> = BTreeMap::new();
    let mut lower = Vec::new();
    let mut target = None;
    for row in &t.rows {
        let n = num(t, row, "n")?;
        let scaled = num(t, row, "scaled")?;
        let pt = PlotPoint {
            x: n,
            y: scaled,
            lo: scaled,
            hi: scaled,
        };
        match text(t, row, "side")? {
            "upper" => {
                let d = num(t, row, "d")? as usize;
                upper.entry((d, num(t, row, "order")?.to_bits())).or_default().push(pt);
            }
            _ => {
                let se = num(t, row, "stderr")?;
                lower.push(PlotPoint {
                    lo: scaled - se,
                    hi: scaled + se,
                    ..pt
                });
                target = Some(num(t, row, "bound")?);
            }
        }
    }
    let mut panels = vec![Panel {
        title: "upper check: N^(1/d) E[dist^k]^(1/k)".into(),
        x_label: "N".into(),
        y_label: "scaled NN moment".into(),
        log_x: true,
        log_y: true,
        series: upper
            .into_iter()
            .map(|((d, k), points)| Series {
                name: format!("d={d} k={}", f64::from_bits(k)),
                points,
            })
            .collect(),
        hlines: Vec::new(),
    }];
    if let Some(target) = target {
        panels.push(Panel {
            title: "lower check: scaled weighted moment".into(),
            x_label: "N".into(),
            y_label: "scaled NN moment".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                name: "lower estimate".into(),
                points: lower,
            }],
            hlines: vec![
                (target, "asymptotic constant".into()),
                (0.75 * target, "with slack".into()),
            ],
        });
    }
    Ok(Figure {
        title: "Nearest-neighbor moment checks".into(),
        columns: panels.len(),
        panels,
    })
}

pub fn render_summary_svg(t: &SummaryTable) -> Result<String, BenchError> {
    Ok(render_svg(&figure_from_summary(t)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_inside_the_axis() {
        let a = Axis::new([0.3, 7.9].into_iter(), false);
        let t = a.ticks();
        assert!(!t.is_empty());
        assert!(t.iter().all(|v| *v >= a.lo && *v <= a.hi));
        let l = Axis::new([0.02, 30.0].into_iter(), true);
        assert!(l.ticks().contains(&1.0));
    }

    #[test]
    fn single_point_renders() {
        let fig = Figure {
            title: "t".into(),
            columns: 1,
            panels: vec![Panel {
                title: "p".into(),
                x_label: "x".into(),
                y_label: "y".into(),
                log_x: false,
                log_y: true,
                series: vec![Series {
                    name: "a<b".into(),
                    points: vec![PlotPoint { x: 1.0, y: 2.0, lo: 2.0, hi: 2.0 }],
                }],
                hlines: vec![],
            }],
        };
        let svg = render_svg(&fig);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("a&lt;b"));
        assert!(svg.contains("<circle"));
    }
}
