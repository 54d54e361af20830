//! Minimal standalone SVG line plots: linear axes, fixed palette, legend.
//! Visual aid only; nothing downstream depends on pixel output.

use std::fmt::Write as _;

/// One plotted series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.to_string(),
            points,
        }
    }
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 520.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo == hi {
        // Degenerate span (single x or constant y): pad symmetrically.
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.5 };
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    }
}

/// Renders the series as a standalone SVG document.
///
/// Fails on an empty series list or a series without points.
pub fn render_svg_lineplot(
    series: &[Series],
    x_label: &str,
    y_label: &str,
) -> Result<String, String> {
    if series.is_empty() {
        return Err("no series to plot".into());
    }
    if let Some(bad) = series.iter().find(|s| s.points.is_empty()) {
        return Err(format!("series {:?} has no points", bad.label));
    }

    let (x_lo, x_hi) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = move |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let sy = move |y: f64| MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

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

    // Axes.
    let x0 = MARGIN_LEFT;
    let y0 = MARGIN_TOP + plot_h;
    writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
        x0 + plot_w
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN_TOP}" stroke="black"/>"#
    )
    .unwrap();

    // Ticks: five per axis, linearly spaced.
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x_lo + f * (x_hi - x_lo);
        let xp = sx(xv);
        writeln!(
            svg,
            r#"<line x1="{xp}" y1="{y0}" x2="{xp}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{xp}" y="{}" font-size="12" text-anchor="middle">{xv:.4}</text>"#,
            y0 + 20.0
        )
        .unwrap();
        let yv = y_lo + f * (y_hi - y_lo);
        let yp = sy(yv);
        writeln!(
            svg,
            r#"<line x1="{}" y1="{yp}" x2="{x0}" y2="{yp}" stroke="black"/>"#,
            x0 - 5.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{yv:.4}</text>"#,
            x0 - 8.0,
            yp + 4.0
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{}</text>"#,
        x0 + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{}" font-size="14" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    )
    .unwrap();

    // Series: polyline plus markers for sparse data.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if s.points.len() > 1 {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
                .collect();
            writeln!(
                svg,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            )
            .unwrap();
        }
        if s.points.len() <= 40 {
            for (x, y) in &s.points {
                writeln!(
                    svg,
                    r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                    sx(*x),
                    sy(*y)
                )
                .unwrap();
            }
        }
    }

    // Legend.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let ly = MARGIN_TOP + 16.0 + 18.0 * i as f64;
        let lx = MARGIN_LEFT + plot_w - 150.0;
        writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        )
        .unwrap();
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_series_renders() {
        let svg = render_svg_lineplot(&[Series::new("p", vec![(1.0, 2.0)])], "x", "y").unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<circle"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(render_svg_lineplot(&[], "x", "y").is_err());
        assert!(render_svg_lineplot(&[Series::new("e", vec![])], "x", "y").is_err());
    }

    #[test]
    fn multi_series_has_polylines_and_legend() {
        let s1 = Series::new("a", vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)]);
        let s2 = Series::new("b", vec![(0.0, 1.0), (1.0, 0.0), (2.0, 1.5)]);
        let svg = render_svg_lineplot(&[s1, s2], "x", "y").unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">a</text>") && svg.contains(">b</text>"));
    }
}
