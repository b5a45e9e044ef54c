//! Rendering of a demand curve: a `demand.csv` table and a static SVG
//! scalability graph (workload on x, required instances on y).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AnalysisError, Demand, DemandCurve};

pub const DEMAND_FILE: &str = "demand.csv";
const DEMAND_HEADER: &str = "workload,demand";

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 55.0;

/// `workload,demand` rows, ascending by workload; an unsatisfiable
/// workload keeps its row with an empty demand field.
pub fn demand_csv(curve: &DemandCurve) -> String {
    let mut out = String::from(DEMAND_HEADER);
    out.push('\n');
    for point in &curve.points {
        match point.demand {
            Demand::Instances(n) => writeln!(out, "{},{}", point.workload, n).unwrap(),
            Demand::Unsatisfiable => writeln!(out, "{},", point.workload).unwrap(),
        }
    }
    out
}

/// Writes `demand.csv` and the SVG plot for `curve`. The x axis is
/// labeled with the benchmarked dimension, the y axis with instances.
pub fn emit_graph(
    curve: &DemandCurve,
    x_label: &str,
    csv_path: &Path,
    plot_path: &Path,
) -> Result<(), AnalysisError> {
    fs::write(csv_path, demand_csv(curve))?;
    fs::write(plot_path, plot_svg(curve, x_label))?;
    Ok(())
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    if hi <= lo {
        return vec![lo];
    }
    // Aim for ~5 ticks at a 1/2/5 step.
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = mag
        * if norm <= 1.0 {
            1.0
        } else if norm <= 2.0 {
            2.0
        } else if norm <= 5.0 {
            5.0
        } else {
            10.0
        };
    let mut ticks = Vec::new();
    let mut v = (lo / step).ceil() * step;
    while v <= hi + step * 1e-9 {
        ticks.push(v);
        v += step;
    }
    ticks
}

fn tick_label(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Deterministic, self-contained SVG: axes with tick labels, a polyline
/// through the satisfiable points with circle markers, and an x marker on
/// the axis top for each unsatisfiable workload.
pub fn plot_svg(curve: &DemandCurve, x_label: &str) -> String {
    let xs: Vec<f64> = curve.points.iter().map(|p| p.workload).collect();
    let ys: Vec<u32> = curve
        .points
        .iter()
        .filter_map(|p| match p.demand {
            Demand::Instances(n) => Some(n),
            Demand::Unsatisfiable => None,
        })
        .collect();
    let x_lo = xs.first().copied().unwrap_or(0.0).min(0.0);
    let x_hi = xs.last().copied().unwrap_or(1.0).max(x_lo + 1.0);
    let y_hi = ys.iter().copied().max().unwrap_or(1).max(1) as f64 * 1.1;
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |v: f64| MARGIN_LEFT + (v - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = |v: f64| MARGIN_TOP + plot_h - v / y_hi * plot_h;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    writeln!(
        svg,
        r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{:.1}" y2="{y0:.1}" stroke="black"/>"#,
        MARGIN_LEFT + plot_w
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{MARGIN_TOP:.1}" stroke="black"/>"#
    )
    .unwrap();
    for t in ticks(x_lo, x_hi) {
        let x = sx(t);
        writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{y0:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/>"#,
            y0 + 5.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            tick_label(t)
        )
        .unwrap();
    }
    for t in ticks(0.0, y_hi) {
        let y = sy(t);
        writeln!(
            svg,
            r#"<line x1="{:.1}" y1="{y:.1}" x2="{x0:.1}" y2="{y:.1}" stroke="black"/>"#,
            x0 - 5.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            tick_label(t)
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        x_label
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.1})">instances</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    )
    .unwrap();

    let line: Vec<String> = curve
        .points
        .iter()
        .filter_map(|p| match p.demand {
            Demand::Instances(n) => Some(format!("{:.1},{:.1}", sx(p.workload), sy(n as f64))),
            Demand::Unsatisfiable => None,
        })
        .collect();
    if line.len() > 1 {
        writeln!(
            svg,
            r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
            line.join(" ")
        )
        .unwrap();
    }
    for point in &curve.points {
        match point.demand {
            Demand::Instances(n) => writeln!(
                svg,
                r##"<circle cx="{:.1}" cy="{:.1}" r="4" fill="#1f77b4"/>"##,
                sx(point.workload),
                sy(n as f64)
            )
            .unwrap(),
            Demand::Unsatisfiable => {
                let x = sx(point.workload);
                let y = MARGIN_TOP + 10.0;
                writeln!(
                    svg,
                    r##"<path d="M {:.1} {:.1} L {:.1} {:.1} M {:.1} {:.1} L {:.1} {:.1}" stroke="#d62728" stroke-width="2"/>"##,
                    x - 5.0, y - 5.0, x + 5.0, y + 5.0,
                    x - 5.0, y + 5.0, x + 5.0, y - 5.0,
                )
                .unwrap();
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}
