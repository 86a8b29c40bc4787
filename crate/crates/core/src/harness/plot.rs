//! Line plots of per-epoch metrics as standalone SVG files: one file per
//! metric, one curve per input CSV, with a shaded mean +/- standard error band
//! wherever the input has one.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    AvgScore,
    PeakScore,
    TotalSize,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::AvgScore, Metric::PeakScore, Metric::TotalSize];

    pub fn column(self) -> &'static str {
        match self {
            Metric::AvgScore => "avg_score",
            Metric::PeakScore => "peak_score",
            Metric::TotalSize => "total_size",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Metric::AvgScore => "Average score per epoch",
            Metric::PeakScore => "Peak score per epoch",
            Metric::TotalSize => "Total buffer size",
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.column() == s)
            .ok_or_else(|| {
                Error::config(
                    "metric",
                    format!("unknown metric `{s}` (avg_score, peak_score, total_size)"),
                )
            })
    }
}

#[derive(Clone, Debug)]
struct Point {
    x: f64,
    mean: f64,
    se: Option<f64>,
}

#[derive(Clone, Debug)]
struct Series {
    label: String,
    points: Vec<Point>,
}

fn label_for(path: &Path) -> String {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("series");
    if stem == "aggregate" {
        if let Some(dir) = path
            .parent()
            .and_then(|p| p.file_name())
            .and_then(|s| s.to_str())
        {
            return dir.to_string();
        }
    }
    stem.to_string()
}

fn read_series(path: &Path, metric: Metric) -> Result<Series> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::format_at_line(1, format!("{}: {e}", path.display())))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let (x_col, mean_col, se_col) = if let Some(mean) = find(&format!("{}_mean", metric.column())) {
        let x = find("frames_mean");
        (x, Some(mean), find(&format!("{}_se", metric.column())))
    } else {
        (find("frames"), find(metric.column()), None)
    };
    let (Some(x_col), Some(mean_col)) = (x_col, mean_col) else {
        return Err(Error::format_at_line(
            1,
            format!(
                "{}: header lacks frames/{} columns",
                path.display(),
                metric.column()
            ),
        ));
    };

    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::format_at_line(line, format!("{}: {e}", path.display()))
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |col: usize| -> Result<&str> {
            record.get(col).ok_or_else(|| {
                Error::format_at_line(
                    line,
                    format!("{}: missing column {}", path.display(), col + 1),
                )
            })
        };
        let number = |col: usize| -> Result<f64> {
            let raw = field(col)?;
            raw.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Error::format_at_line(
                        line,
                        format!("{}: `{raw}` is not a number", path.display()),
                    )
                })
        };
        let se = match se_col {
            Some(c) if !field(c)?.trim().is_empty() => Some(number(c)?),
            _ => None,
        };
        points.push(Point {
            x: number(x_col)?,
            mean: number(mean_col)?,
            se,
        });
    }
    if points.is_empty() {
        return Err(Error::format_at_line(
            1,
            format!("{}: no data rows", path.display()),
        ));
    }
    Ok(Series {
        label: label_for(path),
        points,
    })
}

/// Writes `<out_dir>/<metric>.svg` for each requested metric and returns the
/// paths. Every input is parsed before any file is written.
pub fn emit_plots(inputs: &[PathBuf], out_dir: &Path, metrics: &[Metric]) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::config("inputs", "at least one CSV is required"));
    }
    let mut charts = Vec::new();
    for &metric in metrics {
        let series = inputs
            .iter()
            .map(|p| read_series(p, metric))
            .collect::<Result<Vec<_>>>()?;
        charts.push((metric, render_svg(metric, &series)));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    charts
        .into_iter()
        .map(|(metric, svg)| {
            let path = out_dir.join(format!("{}.svg", metric.column()));
            fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        (
            lo - 0.5_f64.max(lo.abs() * 0.05),
            hi + 0.5_f64.max(hi.abs() * 0.05),
        )
    }
}

fn has_band(s: &Series) -> bool {
    s.points.iter().all(|p| p.se.is_some())
}

fn render_svg(metric: Metric, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| &s.points);
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for p in all {
        let se = p.se.unwrap_or(0.0);
        x_lo = x_lo.min(p.x);
        x_hi = x_hi.max(p.x);
        y_lo = y_lo.min(p.mean - se);
        y_hi = y_hi.max(p.mean + se);
    }
    let (x_lo, x_hi) = padded(x_lo, x_hi);
    let (y_lo, y_hi) = padded(y_lo, y_hi);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |y: f64| TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + plot_w / 2.0,
        metric.title()
    )
    .unwrap();

    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (yv, xv) = (y_lo + f * (y_hi - y_lo), x_lo + f * (x_hi - x_lo));
        let (py, px) = (sy(yv), sx(xv));
        writeln!(
            svg,
            r##"<line x1="{LEFT}" x2="{}" y1="{py:.2}" y2="{py:.2}" stroke="#e0e0e0"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            py + 4.0,
            tick_label(yv)
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            TOP + plot_h + 18.0,
            tick_label(xv)
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">frames</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    )
    .unwrap();

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if has_band(s) {
            let upper = s.points.iter().map(|p| (p.x, p.mean + p.se.unwrap_or(0.0)));
            let lower = s
                .points
                .iter()
                .rev()
                .map(|p| (p.x, p.mean - p.se.unwrap_or(0.0)));
            let pts: Vec<String> = upper
                .chain(lower)
                .map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            writeln!(
                svg,
                r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                pts.join(" ")
            )
            .unwrap();
        }
        let pts: Vec<String> = s
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean)))
            .collect();
        writeln!(
            svg,
            r#"<polyline class="curve" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            pts.join(" ")
        )
        .unwrap();
        let ly = TOP + 12.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 16.0;
        writeln!(
            svg,
            r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{color}" stroke-width="3"/><text class="legend" x="{}" y="{}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names() {
        assert_eq!("total_size".parse::<Metric>().unwrap(), Metric::TotalSize);
        assert!(matches!(
            "loss".parse::<Metric>(),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(2.5), "2.5");
        assert_eq!(tick_label(10.0), "10");
        assert_eq!(tick_label(20000.0), "20000");
    }

    #[test]
    fn escapes_labels() {
        assert_eq!(escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
    }
}
