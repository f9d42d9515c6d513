//! Small self-contained SVG charts.

use std::fmt::Write;

const PLOT_WIDTH: f64 = 400.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const LEGEND_ROW: f64 = 18.0;
/// Rough glyph advance at font-size 12, used to size the legend.
const CHAR_WIDTH: f64 = 7.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    /// Markers joined by a line.
    LineMarkers,
    Markers,
    Line,
    /// Histogram outline: `points` are bin left edges, the last point closes the range.
    Steps,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    /// `(x, y, y_error)`
    pub points: Vec<(f64, f64, f64)>,
    pub style: Style,
    /// Palette slot; defaults to the series index. Lets a fit share its data's colour.
    pub color: Option<usize>,
}

impl Series {
    pub fn new(label: impl Into<String>, style: Style) -> Self {
        Self {
            label: label.into(),
            points: Vec::new(),
            style,
            color: None,
        }
    }

    pub fn colored(mut self, slot: usize) -> Self {
        self.color = Some(slot);
        self
    }

    fn color(&self, index: usize) -> &'static str {
        PALETTE[self.color.unwrap_or(index) % PALETTE.len()]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    /// Position in `[0, 1]`, or `None` for values the axis cannot show.
    fn unit(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            // decades only on wide ranges, 1-2-5 otherwise
            let mantissas: &[f64] = if self.hi - self.lo > 2.0 {
                &[1.0]
            } else {
                &[1.0, 2.0, 5.0]
            };
            let out: Vec<(f64, String)> = (a..=b)
                .flat_map(|e| mantissas.iter().map(move |m| (m, e)))
                .filter(|(m, e)| (**m * 10f64.powi(*e)).log10() >= self.lo - 1e-9)
                .filter(|(m, e)| (**m * 10f64.powi(*e)).log10() <= self.hi + 1e-9)
                .map(|(m, e)| (m * 10f64.powi(e), log_tick(*m, e)))
                .collect();
            if out.len() >= 2 {
                return out;
            }
            // too narrow: linear ticks in value space
            let lin = Axis {
                lo: 10f64.powf(self.lo),
                hi: 10f64.powf(self.hi),
                log: false,
            };
            return lin.ticks();
        }
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 * step {
            let v = if t.abs() < 1e-12 * step { 0.0 } else { t };
            out.push((v, format_tick(v, step)));
            t += step;
        }
        out
    }
}

fn log_tick(m: f64, e: i32) -> String {
    if (-3..=4).contains(&e) {
        let v = m * 10f64.powi(e);
        format_tick(v, 10f64.powi(e))
    } else {
        format!("{m}e{e}")
    }
}

fn format_tick(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            log_x: false,
            log_y: false,
            series: Vec::new(),
        }
    }

    pub fn log_log(mut self) -> Self {
        self.log_x = true;
        self.log_y = true;
        self
    }

    pub fn render(&self) -> String {
        let xs = Axis::fit(
            self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)),
            self.log_x,
        );
        let ys = Axis::fit(
            self.series
                .iter()
                .flat_map(|s| s.points.iter().flat_map(|p| [p.1, p.1 - p.2.abs(), p.1 + p.2.abs()])),
            self.log_y,
        );
        let longest = self.series.iter().map(|s| s.label.chars().count()).max().unwrap_or(0);
        let legend = 50.0 + CHAR_WIDTH * longest as f64;
        let width = (LEFT + PLOT_WIDTH + legend).ceil();
        let height = HEIGHT.max(TOP + 20.0 + LEGEND_ROW * self.series.len() as f64);
        let pw = PLOT_WIDTH;
        let ph = HEIGHT - TOP - BOTTOM;
        let px = |v: f64| xs.unit(v).map(|u| LEFT + u * pw);
        let py = |v: f64| ys.unit(v).map(|u| TOP + (1.0 - u) * ph);

        let mut o = String::new();
        let _ = writeln!(
            o,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(o, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
        let _ = writeln!(
            o,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );

        // axes and ticks
        let _ = writeln!(o, r#"<g class="axes" stroke="black" fill="none">"#);
        let _ = writeln!(o, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/>"#);
        for (v, _) in xs.ticks() {
            if let Some(x) = px(v) {
                let _ = writeln!(
                    o,
                    r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}"/>"#,
                    TOP + ph,
                    TOP + ph + 5.0
                );
            }
        }
        for (v, _) in ys.ticks() {
            if let Some(y) = py(v) {
                let _ = writeln!(o, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}"/>"#, LEFT - 5.0);
            }
        }
        let _ = writeln!(o, "</g>");
        let _ = writeln!(o, r#"<g class="tick-labels">"#);
        for (v, label) in xs.ticks() {
            if let Some(x) = px(v) {
                let _ = writeln!(
                    o,
                    r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                    TOP + ph + 18.0,
                    escape(&label)
                );
            }
        }
        for (v, label) in ys.ticks() {
            if let Some(y) = py(v) {
                let _ = writeln!(
                    o,
                    r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                    LEFT - 8.0,
                    y + 4.0,
                    escape(&label)
                );
            }
        }
        let _ = writeln!(o, "</g>");
        let _ = writeln!(
            o,
            r#"<text class="x-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            o,
            r#"<text class="y-label" x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (i, s) in self.series.iter().enumerate() {
            let color = s.color(i);
            let _ = writeln!(o, r#"<g class="series" data-label="{}">"#, escape(&s.label));
            let pts: Vec<(f64, f64)> = s.points.iter().filter_map(|p| Some((px(p.0)?, py(p.1)?))).collect();
            match s.style {
                Style::Line | Style::LineMarkers => {
                    let _ = writeln!(
                        o,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        polyline(&pts)
                    );
                }
                Style::Steps => {
                    let mut steps = Vec::new();
                    for w in s.points.windows(2) {
                        if let (Some(x0), Some(x1), Some(y)) = (px(w[0].0), px(w[1].0), py(w[0].1)) {
                            steps.push((x0, y));
                            steps.push((x1, y));
                        }
                    }
                    let _ = writeln!(
                        o,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        polyline(&steps)
                    );
                }
                Style::Markers => {}
            }
            if matches!(s.style, Style::Markers | Style::LineMarkers) {
                for p in &s.points {
                    let (Some(x), Some(y)) = (px(p.0), py(p.1)) else {
                        continue;
                    };
                    let _ = writeln!(o, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
                    let (lo, hi) = (py(p.1 - p.2.abs()), py(p.1 + p.2.abs()));
                    let lo = lo.unwrap_or(TOP + ph);
                    let hi = hi.unwrap_or(TOP);
                    let _ = writeln!(
                        o,
                        r#"<path class="error-bar" stroke="{color}" d="M{x:.2} {lo:.2}V{hi:.2}M{:.2} {lo:.2}H{:.2}M{:.2} {hi:.2}H{:.2}"/>"#,
                        x - 3.0,
                        x + 3.0,
                        x - 3.0,
                        x + 3.0
                    );
                }
            }
            let _ = writeln!(o, "</g>");
        }

        let _ = writeln!(o, r#"<g class="legend">"#);
        for (i, s) in self.series.iter().enumerate() {
            let color = s.color(i);
            let y = TOP + 10.0 + LEGEND_ROW * i as f64;
            let x = LEFT + pw + 12.0;
            if s.style == Style::Markers {
                let _ = writeln!(o, r#"<circle cx="{}" cy="{y}" r="3" fill="{color}"/>"#, x + 9.0);
            } else {
                let _ = writeln!(
                    o,
                    r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
                    x + 18.0
                );
            }
            let _ = writeln!(
                o,
                r#"<text x="{}" y="{}">{}</text>"#,
                x + 24.0,
                y + 4.0,
                escape(&s.label)
            );
        }
        let _ = writeln!(o, "</g>");
        o.push_str("</svg>\n");
        o
    }
}

fn polyline(pts: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:.2},{y:.2}");
    }
    s
}
