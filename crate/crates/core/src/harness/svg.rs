//! Static SVG figures.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Polygon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Free text printed in the plot corner, one line each.
    pub annotations: Vec<String>,
}

impl Dataset {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            ..Default::default()
        }
    }

    pub fn with_series(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }

    pub fn annotate(mut self, line: impl Into<String>) -> Self {
        self.annotations.push(line.into());
        self
    }

    /// The vertex loop of a polygon, for [`PlotKind::Outline`].
    pub fn outline(title: impl Into<String>, poly: &Polygon) -> Self {
        let pts = poly.vertices().iter().map(|v| (v.x, v.y)).collect();
        Self::new(title, "x", "y").with_series(Series::new("boundary", pts))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    Linear,
    LogLog,
    /// Sample quantiles against normal quantiles, with the diagonal.
    Qq,
    /// Closed polygon from the first series: one `M`, an `L` per further
    /// vertex and `Z`.
    Outline,
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 78.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const COLORS: [&str; 6] = ["#1b3a6b", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#2c3e50"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo <= 1e-12 * hi.abs().max(1.0) {
            let pad = if log { 0.5 } else { 0.5 * hi.abs().max(1.0) };
            lo -= pad;
            hi += pad;
        } else {
            let pad = 0.05 * (hi - lo);
            lo -= pad;
            hi += pad;
        }
        Axis { log, lo, hi }
    }

    fn unit(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let decades: Vec<f64> = (self.lo.ceil() as i32..=self.hi.floor() as i32)
                .map(|k| 10f64.powi(k))
                .collect();
            if decades.len() >= 2 {
                return decades;
            }
        }
        (0..5)
            .map(|i| {
                let u = self.lo + (self.hi - self.lo) * (0.1 + 0.2 * i as f64);
                if self.log {
                    10f64.powf(u)
                } else {
                    u
                }
            })
            .collect()
    }
}

/// Renders a self-contained SVG document.
pub fn render_svg(data: &Dataset, kind: PlotKind) -> Result<String> {
    let points = || data.series.iter().flat_map(|s| s.points.iter().copied());
    if points().next().is_none() {
        return Err(Error::EmptyDataset);
    }
    if points().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
        return Err(Error::invalid("dataset contains non-finite values"));
    }
    if kind == PlotKind::Outline {
        return Ok(outline(data));
    }
    let log = kind == PlotKind::LogLog;
    if log && points().any(|(x, y)| x <= 0.0 || y <= 0.0) {
        return Err(Error::NonPositiveOnLogAxis);
    }
    let (mut xs, mut ys): (Vec<f64>, Vec<f64>) = points().unzip();
    if kind == PlotKind::Qq {
        // Keep the diagonal on a common scale.
        let all: Vec<f64> = xs.iter().chain(&ys).copied().collect();
        xs.clone_from(&all);
        ys = all;
    }
    let ax = Axis::fit(xs.into_iter(), log);
    let ay = Axis::fit(ys.into_iter(), log);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + pw * ax.unit(x);
    let py = |y: f64| TOP + ph * (1.0 - ay.unit(y));

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        W / 2.0,
        escape(&data.title)
    );
    // Frame and ticks.
    let _ = writeln!(
        s,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#444\"/>"
    );
    for t in ax.ticks() {
        let x = px(t);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"#444\"/><text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 19.0,
            label(t)
        );
    }
    for t in ay.ticks() {
        let y = py(t);
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"#444\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        LEFT + pw / 2.0,
        H - 12.0,
        escape(&data.x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&data.y_label)
    );
    if kind == PlotKind::Qq {
        let lo = ax.lo.max(ay.lo);
        let hi = ax.hi.min(ay.hi);
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
            px(lo),
            py(lo),
            px(hi),
            py(hi)
        );
    }
    for (i, series) in data.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if kind != PlotKind::Qq && series.points.len() >= 2 {
            let pts: Vec<String> = series
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                pts.join(" ")
            );
        }
        for &(x, y) in &series.points {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{color}\"/>",
                px(x),
                py(y)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" fill=\"{color}\">{}</text>",
            W - RIGHT - 8.0,
            TOP + 16.0 + 15.0 * i as f64,
            escape(&series.name)
        );
    }
    for (i, a) in data.annotations.iter().enumerate() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\">{}</text>",
            LEFT + 8.0,
            TOP + 16.0 + 15.0 * i as f64,
            escape(a)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn outline(data: &Dataset) -> String {
    let pts = &data.series[0].points;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let pad = 0.05 * span;
    let mut d = String::with_capacity(pts.len() * 24);
    for (i, &(x, y)) in pts.iter().enumerate() {
        let _ = write!(d, "{}{} {} ", if i == 0 { 'M' } else { 'L' }, x, -y);
    }
    d.push('Z');
    let (w, h) = (x1 - x0 + 2.0 * pad, y1 - y0 + 2.0 * pad);
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {w} {h}\" width=\"600\" height=\"{}\">\n\
         <title>{}</title>\n\
         <path d=\"{d}\" fill=\"#dde6f3\" stroke=\"#1b3a6b\" stroke-width=\"{}\"/>\n</svg>\n",
        x0 - pad,
        -y1 - pad,
        (600.0 * h / w).round(),
        escape(&data.title),
        0.002 * span
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::io::count_path_commands;
    use crate::geometry::{build_snowflake, SnowflakeSpec};

    fn two_points() -> Dataset {
        Dataset::new("t", "x", "y").with_series(Series::new("a", vec![(1.0, 2.0), (2.0, 3.0)]))
    }

    #[test]
    fn two_points_give_one_polyline() {
        for kind in [PlotKind::Linear, PlotKind::LogLog] {
            let svg = render_svg(&two_points(), kind).unwrap();
            assert_eq!(svg.matches("<polyline").count(), 1);
            assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        }
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let d = Dataset::new("t", "x", "y");
        assert!(matches!(render_svg(&d, PlotKind::Linear), Err(Error::EmptyDataset)));
        let d = d.with_series(Series::new("a", vec![]));
        assert!(matches!(render_svg(&d, PlotKind::LogLog), Err(Error::EmptyDataset)));
    }

    #[test]
    fn zero_on_log_axis_is_rejected() {
        let d = Dataset::new("t", "x", "y").with_series(Series::new("a", vec![(1.0, 0.0), (2.0, 3.0)]));
        let e = render_svg(&d, PlotKind::LogLog).unwrap_err();
        assert_eq!(e.to_string(), "nonpositive value on log axis");
        assert!(render_svg(&d, PlotKind::Linear).is_ok());
    }

    #[test]
    fn snowflake_outline_has_one_command_per_edge_plus_one() {
        for depth in 0..5 {
            let poly = build_snowflake(&SnowflakeSpec::new(3.0, depth)).unwrap();
            let svg = render_svg(&Dataset::outline("s", &poly), PlotKind::Outline).unwrap();
            let d = svg.split("d=\"").nth(1).unwrap().split('"').next().unwrap();
            assert_eq!(count_path_commands(d), 3 * 4usize.pow(depth) + 1);
        }
    }

    #[test]
    fn text_is_escaped_and_qq_has_diagonal() {
        let d = two_points().annotate("a < b & c");
        let svg = render_svg(&d, PlotKind::Qq).unwrap();
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches("<polyline").count(), 0);
    }
}
