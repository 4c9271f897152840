//! Minimal SVG plotter: line, scatter and bar panels stacked vertically.

use crate::table::Table;
use std::fmt::Write as _;

const WIDTH: f64 = 760.0;
const PANEL_H: f64 = 300.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 45.0;
const MAX_POINTS: usize = 4000;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Scatter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub style: Style,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Chart {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }

    /// Adds `y_cols` of `table` against `x_col`; unknown columns are skipped.
    pub fn from_table(mut self, table: &Table, x_col: &str, y_cols: &[&str], style: Style) -> Self {
        let Some(x) = table.column(x_col) else { return self };
        for name in y_cols {
            if let Some(y) = table.column(name) {
                self.series.push(Series { name: (*name).to_string(), x: x.clone(), y, style });
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bars {
    pub title: String,
    pub y_label: String,
    pub categories: Vec<String>,
    /// One value per category for each group.
    pub groups: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Panel {
    Xy(Chart),
    Bars(Bars),
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".into()
    } else if (1e-2..1e5).contains(&a) {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

/// Nice 1-2-5 ticks covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5 - lo.abs() * 0.1, hi + 0.5 + hi.abs() * 0.1) };
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let a = (lo / step).floor() * step;
    let b = (hi / step).ceil() * step;
    let n = ((b - a) / step).round() as usize;
    (a, b, (0..=n).map(|i| a + i as f64 * step).collect())
}

fn finite_range(v: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    v.filter(|x| x.is_finite()).fold(None, |acc, x| match acc {
        None => Some((x, x)),
        Some((a, b)) => Some((a.min(x), b.max(x))),
    })
}

struct Frame {
    y0: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + TOP + (1.0 - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0)) * (PANEL_H - TOP - BOTTOM)
    }
}

fn axes(s: &mut String, f: &Frame, xt: &[f64], yt: &[f64], title: &str, x_label: &str, y_label: &str) {
    let (x1, x2) = (LEFT, WIDTH - RIGHT);
    let (y1, y2) = (f.y0 + TOP, f.y0 + PANEL_H - BOTTOM);
    let _ = writeln!(s, r##"<rect x="{x1:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333"/>"##, x2 - x1, y2 - y1);
    for &t in yt {
        let y = f.py(t);
        let _ = writeln!(s, r##"<line x1="{x1:.2}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}" stroke="#ddd"/>"##);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#, x1 - 5.0, y + 4.0, tick_label(t));
    }
    for &t in xt {
        let x = f.px(t);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{y2:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##, y2 + 4.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#, y2 + 17.0, tick_label(t));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{}</text>"#, (x1 + x2) / 2.0, f.y0 + 18.0, esc(title));
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#, (x1 + x2) / 2.0, y2 + 35.0, esc(x_label));
    let (cx, cy) = (15.0, (y1 + y2) / 2.0);
    let _ = writeln!(s, r#"<text x="{cx:.2}" y="{cy:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 {cx:.2} {cy:.2})">{}</text>"#, esc(y_label));
}

fn legend(s: &mut String, y0: f64, names: &[&str]) {
    for (i, n) in names.iter().enumerate() {
        let y = y0 + TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 12.0;
        let c = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<rect x="{x:.2}" y="{:.2}" width="12" height="12" fill="{c}"/>"#, y - 10.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}" font-size="11">{}</text>"#, x + 17.0, esc(n));
    }
}

fn xy(s: &mut String, c: &Chart, y0: f64) {
    let xr = finite_range(c.series.iter().flat_map(|s| s.x.iter().copied())).unwrap_or((0.0, 1.0));
    let yr = finite_range(c.series.iter().flat_map(|s| s.y.iter().copied())).unwrap_or((0.0, 1.0));
    let (xa, xb, xt) = ticks(xr.0, xr.1);
    let (ya, yb, yt) = ticks(yr.0, yr.1);
    let f = Frame { y0, x_range: (xa, xb), y_range: (ya, yb) };
    axes(s, &f, &xt, &yt, &c.title, &c.x_label, &c.y_label);
    for (i, ser) in c.series.iter().enumerate() {
        let col = PALETTE[i % PALETTE.len()];
        let stride = ser.x.len().div_ceil(MAX_POINTS).max(1);
        let pts: Vec<(f64, f64)> = ser
            .x
            .iter()
            .zip(&ser.y)
            .step_by(stride)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| (f.px(x), f.py(y)))
            .collect();
        match ser.style {
            Style::Line => {
                let mut d = String::new();
                for (j, (x, y)) in pts.iter().enumerate() {
                    let _ = write!(d, "{}{x:.2},{y:.2}", if j == 0 { "M" } else { " L" });
                }
                let _ = writeln!(s, r#"<path d="{d}" fill="none" stroke="{col}" stroke-width="1.2"/>"#);
            }
            Style::Scatter => {
                for (x, y) in pts {
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{col}" fill-opacity="0.7"/>"#);
                }
            }
        }
    }
    let names: Vec<&str> = c.series.iter().map(|s| s.name.as_str()).collect();
    legend(s, y0, &names);
}

fn bars(s: &mut String, b: &Bars, y0: f64) {
    let yr = finite_range(b.groups.iter().flat_map(|g| g.1.iter().copied()).chain([0.0])).unwrap_or((0.0, 1.0));
    let (ya, yb, yt) = ticks(yr.0, yr.1);
    let n = b.categories.len().max(1) as f64;
    let f = Frame { y0, x_range: (0.0, n), y_range: (ya, yb) };
    axes(s, &f, &[], &yt, &b.title, "", &b.y_label);
    let slot = (f.px(1.0) - f.px(0.0)) * 0.8;
    let g = b.groups.len().max(1) as f64;
    for (ci, cat) in b.categories.iter().enumerate() {
        let x0 = f.px(ci as f64) + (f.px(1.0) - f.px(0.0)) * 0.1;
        for (gi, (_, vals)) in b.groups.iter().enumerate() {
            let v = vals.get(ci).copied().unwrap_or(f64::NAN);
            if !v.is_finite() {
                continue;
            }
            let (top, base) = (f.py(v.max(0.0)), f.py(v.min(0.0)));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x0 + gi as f64 * slot / g,
                slot / g * 0.95,
                base - top,
                PALETTE[gi % PALETTE.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            x0 + slot / 2.0,
            y0 + PANEL_H - BOTTOM + 17.0,
            esc(cat)
        );
    }
    let names: Vec<&str> = b.groups.iter().map(|g| g.0.as_str()).collect();
    legend(s, y0, &names);
}

/// Renders `panels` top to bottom.
pub fn render(panels: &[Panel]) -> String {
    let h = PANEL_H * panels.len().max(1) as f64;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{h}\" viewBox=\"0 0 {WIDTH} {h}\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (i, p) in panels.iter().enumerate() {
        let y0 = i as f64 * PANEL_H;
        match p {
            Panel::Xy(c) => xy(&mut s, c, y0),
            Panel::Bars(b) => bars(&mut s, b, y0),
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_cover_range() {
        let (a, b, t) = ticks(0.13, 9.7);
        assert!(a <= 0.13 && b >= 9.7);
        assert_eq!(t.first().copied(), Some(a));
        assert!(t.len() >= 3 && t.len() <= 12);
        let (a, b, _) = ticks(5.0, 5.0);
        assert!(a < 5.0 && b > 5.0);
    }

    #[test]
    fn renders_all_panel_kinds() {
        let mut c = Chart::new("t", "x", "y");
        c.series.push(Series { name: "s".into(), x: vec![0.0, 1.0], y: vec![1.0, f64::NAN], style: Style::Line });
        c.series.push(Series { name: "p".into(), x: vec![0.5], y: vec![0.5], style: Style::Scatter });
        let b = Bars { title: "b".into(), y_label: "A".into(), categories: vec!["x<y".into()], groups: vec![("g".into(), vec![2.0])] };
        let svg = render(&[Panel::Xy(c), Panel::Bars(b)]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("<path") && svg.contains("<circle") && svg.contains("x&lt;y"));
    }
}
