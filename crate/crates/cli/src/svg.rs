//! Minimal deterministic SVG line/scatter charts. Axis labels show the
//! extreme data values using the exact strings they had in the source
//! report, so a chart never introduces a number of its own.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 280.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series {
    pub name: String,
    /// `(x, y)` as report strings.
    pub points: Vec<(String, String)>,
    pub markers: bool,
}

pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

/// A value together with the text it was read from.
#[derive(Clone)]
struct Labelled {
    value: f64,
    text: String,
}

struct Extent {
    lo: Labelled,
    hi: Labelled,
}

impl Extent {
    fn of(values: impl Iterator<Item = Labelled>) -> Option<Self> {
        let mut ext: Option<Extent> = None;
        for v in values {
            match &mut ext {
                None => {
                    ext = Some(Extent {
                        lo: v.clone(),
                        hi: v,
                    })
                }
                Some(e) => {
                    if v.value < e.lo.value {
                        e.lo = v.clone();
                    }
                    if v.value > e.hi.value {
                        e.hi = v;
                    }
                }
            }
        }
        ext
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn parsed(points: &[(String, String)], log_y: bool) -> Vec<(Labelled, Labelled)> {
    points
        .iter()
        .filter_map(|(x, y)| {
            let xv: f64 = x.parse().ok()?;
            let yv: f64 = y.parse().ok()?;
            if !xv.is_finite() || !yv.is_finite() || (log_y && yv <= 0.0) {
                return None;
            }
            let yv = if log_y { yv.log10() } else { yv };
            Some((
                Labelled { value: xv, text: x.clone() },
                Labelled { value: yv, text: y.clone() },
            ))
        })
        .collect()
}

/// Maps `v` in `[lo, hi]` onto `[a, b]`; a degenerate range maps to the
/// midpoint.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

/// Renders the panels stacked vertically. Returns `None` when no panel has
/// a drawable point.
pub fn render(panels: &[Panel]) -> Option<String> {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let mut drawn = false;
    for (pi, panel) in panels.iter().enumerate() {
        let y0 = pi as f64 * PANEL_HEIGHT;
        let (px0, px1) = (LEFT, WIDTH - RIGHT);
        let (py0, py1) = (y0 + PANEL_HEIGHT - BOTTOM, y0 + TOP);
        let data: Vec<Vec<(Labelled, Labelled)>> =
            panel.series.iter().map(|s| parsed(&s.points, panel.log_y)).collect();
        let xs = Extent::of(data.iter().flatten().map(|p| p.0.clone()));
        let ys = Extent::of(data.iter().flatten().map(|p| p.1.clone()));
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
            (px0 + px1) / 2.0,
            y0 + TOP - 14.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            out,
            r#"<rect x="{px0:.2}" y="{py1:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            px1 - px0,
            py0 - py1
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (px0 + px1) / 2.0,
            py0 + 36.0,
            escape(&panel.x_label)
        );
        let y_title = if panel.log_y {
            format!("{} (log scale)", panel.y_label)
        } else {
            panel.y_label.clone()
        };
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            px0 - 70.0,
            (py0 + py1) / 2.0,
            px0 - 70.0,
            (py0 + py1) / 2.0,
            escape(&y_title)
        );
        let (Some(xs), Some(ys)) = (xs, ys) else {
            continue;
        };
        drawn = true;
        for (label, x) in [(&xs.lo, px0), (&xs.hi, px1)] {
            let _ = writeln!(
                out,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                py0 + 16.0,
                escape(&label.text)
            );
        }
        for (label, y) in [(&ys.lo, py0), (&ys.hi, py1)] {
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                px0 - 6.0,
                y + 4.0,
                escape(&label.text)
            );
        }
        for (si, (series, pts)) in panel.series.iter().zip(&data).enumerate() {
            let color = COLORS[si % COLORS.len()];
            let coords: Vec<(f64, f64)> = pts
                .iter()
                .map(|(x, y)| {
                    (
                        scale(x.value, xs.lo.value, xs.hi.value, px0, px1),
                        scale(y.value, ys.lo.value, ys.hi.value, py0, py1),
                    )
                })
                .collect();
            if series.markers {
                for (x, y) in &coords {
                    let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
                }
            } else if !coords.is_empty() {
                let path: Vec<String> = coords.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                    path.join(" ")
                );
            }
            let ly = py1 + 14.0 + 18.0 * si as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="3"/>"#,
                px1 + 10.0,
                px1 + 28.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
                px1 + 34.0,
                ly + 4.0,
                escape(&series.name)
            );
        }
    }
    out.push_str("</svg>\n");
    drawn.then_some(out)
}
