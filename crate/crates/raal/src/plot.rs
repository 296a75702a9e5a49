//! Convergence plots as standalone SVG.
//!
//! The y axis is log-scaled; values below `1e-12` are drawn at `1e-12`.

use std::fmt::Write;

use anyhow::{ensure, Result};

use crate::output::AggregateRow;

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 520.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 250.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const FLOOR: f64 = 1e-12;

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const DASHES: [&str; 4] = ["", "8 4", "2 3", "10 3 2 3"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub rows: Vec<AggregateRow>,
}

#[derive(Debug, Clone, Default)]
pub struct PlotOptions {
    pub title: String,
    /// Use the median spent budget as the x coordinate.
    pub budget_axis: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(series: &[Series], opts: &PlotOptions) -> Result<String> {
    ensure!(!series.is_empty(), "nothing to plot");
    ensure!(series.iter().all(|s| !s.rows.is_empty()), "empty aggregate");

    let x_of = |r: &AggregateRow| if opts.budget_axis { r.budget_median } else { r.iteration as f64 };
    let log = |v: f64| v.max(FLOOR).log10();
    let all = series.iter().flat_map(|s| s.rows.iter());
    let x_max = all.clone().map(x_of).fold(0.0, f64::max).max(1.0);
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(log(r.rse_p25)).min(log(r.rse_median)), hi.max(log(r.rse_p75)).max(log(r.rse_median)))
    });
    let (y_lo, mut y_hi) = (lo.floor(), hi.ceil());
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + plot_w * x / x_max;
    let py = |v: f64| TOP + plot_h * (y_hi - log(v)) / (y_hi - y_lo);

    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#)?;
    writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#)?;
    writeln!(svg, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, LEFT + plot_w / 2.0, escape(&opts.title))?;

    // Axes and decade grid.
    writeln!(svg, r#"<g stroke="black" stroke-width="1">"#)?;
    writeln!(svg, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/>"#, TOP + plot_h)?;
    writeln!(svg, r#"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}"/>"#, TOP + plot_h, LEFT + plot_w)?;
    writeln!(svg, "</g>")?;
    let mut decade = y_lo as i32;
    while decade as f64 <= y_hi {
        let y = py(10f64.powi(decade));
        writeln!(svg, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd" stroke-width="0.5"/>"##, LEFT + plot_w)?;
        writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">1e{decade}</text>"#, LEFT - 6.0, y + 4.0)?;
        decade += 1;
    }
    let step = (x_max / 10.0).ceil().max(1.0);
    let mut tick = 0.0;
    while tick <= x_max + 1e-9 {
        let x = px(tick);
        writeln!(svg, r#"<line x1="{x:.2}" y1="{0:.2}" x2="{x:.2}" y2="{1:.2}" stroke="black" stroke-width="1"/>"#, TOP + plot_h, TOP + plot_h + 5.0)?;
        writeln!(svg, r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{tick}</text>"#, TOP + plot_h + 18.0)?;
        tick += step;
    }
    let x_label = if opts.budget_axis { "budget spent" } else { "iteration" };
    writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{x_label}</text>"#, LEFT + plot_w / 2.0, HEIGHT - 15.0)?;
    writeln!(svg, r#"<text x="18" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 18 {:.2})">RSE</text>"#, TOP + plot_h / 2.0, TOP + plot_h / 2.0)?;

    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let dash = DASHES[(k / COLORS.len() + k) % DASHES.len()];
        let dash_attr = if dash.is_empty() { String::new() } else { format!(r#" stroke-dasharray="{dash}""#) };
        let upper = s.rows.iter().map(|r| format!("{:.2},{:.2}", px(x_of(r)), py(r.rse_p75)));
        let lower = s.rows.iter().rev().map(|r| format!("{:.2},{:.2}", px(x_of(r)), py(r.rse_p25)));
        let band: Vec<String> = upper.chain(lower).collect();
        writeln!(svg, r#"<polygon class="band" points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, band.join(" "))?;
        let line: Vec<String> = s.rows.iter().map(|r| format!("{:.2},{:.2}", px(x_of(r)), py(r.rse_median))).collect();
        writeln!(svg, r#"<polyline class="median" points="{}" fill="none" stroke="{color}" stroke-width="2"{dash_attr}/>"#, line.join(" "))?;

        let ly = TOP + 10.0 + 22.0 * k as f64;
        let lx = LEFT + plot_w + 16.0;
        writeln!(svg, r#"<g class="legend"><line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash_attr}/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text></g>"#, lx + 28.0, lx + 34.0, ly + 4.0, escape(&s.label))?;
    }
    writeln!(svg, "</svg>")?;
    Ok(svg)
}
