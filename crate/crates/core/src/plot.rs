//! Minimal SVG line charts for information-plane curves and residual
//! trajectories.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Style {
    Line,
    Markers,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>, style: Style) -> Self {
        Series { label: label.into(), points, style }
    }
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Plot log10 of y; non-positive values are dropped.
    pub log_y: bool,
    pub series: Vec<Series>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

impl Chart {
    pub fn render(&self) -> String {
        let transform = |y: f64| if self.log_y { y.log10() } else { y };
        let series: Vec<(&Series, Vec<(f64, f64)>)> = self
            .series
            .iter()
            .map(|s| {
                let pts = s
                    .points
                    .iter()
                    .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
                    .map(|&(x, y)| (x, transform(y)))
                    .collect();
                (s, pts)
            })
            .collect();
        let (x0, x1) = span(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)));
        let (y0, y1) = span(series.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)));
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        );
        for t in 0..=4 {
            let fx = x0 + (x1 - x0) * t as f64 / 4.0;
            let fy = y0 + (y1 - y0) * t as f64 / 4.0;
            let ylab = if self.log_y { format!("1e{fy:.1}") } else { format!("{fy:.3}") };
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{fx:.3}</text>"#,
                sx(fx),
                HEIGHT - MARGIN + 18.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{ylab}</text>"#,
                MARGIN - 6.0,
                sy(fy) + 4.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 16.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );

        for (idx, (s, pts)) in series.iter().enumerate() {
            let color = PALETTE[idx % PALETTE.len()];
            match s.style {
                Style::Line => {
                    let path: Vec<String> =
                        pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let _ = writeln!(
                        svg,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                        path.join(" ")
                    );
                }
                Style::Markers => {
                    for &(x, y) in pts {
                        let _ = writeln!(
                            svg,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
            }
            let ly = MARGIN + 16.0 + 16.0 * idx as f64;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                MARGIN + 10.0,
                ly - 9.0,
                MARGIN + 26.0,
                ly,
                escape(&s.label)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Achieved (I(T;Y), I(T;X)) points, optionally over an analytic curve.
pub fn information_plane(points: &[(f64, f64)], analytic: Option<&[(f64, f64)]>) -> String {
    let mut series = Vec::new();
    if let Some(curve) = analytic {
        series.push(Series::new("analytic", curve.to_vec(), Style::Line));
    }
    series.push(Series::new("solver", points.to_vec(), Style::Markers));
    Chart {
        title: "Relevance-compression curve".into(),
        x_label: "I(T;Y) [nats]".into(),
        y_label: "I(T;X) [nats]".into(),
        log_y: false,
        series,
    }
    .render()
}

/// One log-scale residual trajectory per labelled run.
pub fn residual_trajectories(runs: &[(String, Vec<f64>)]) -> String {
    let series = runs
        .iter()
        .map(|(label, res)| {
            let pts = res.iter().enumerate().map(|(n, &v)| ((n + 1) as f64, v)).collect();
            Series::new(label.clone(), pts, Style::Line)
        })
        .collect();
    Chart {
        title: "KKT residual".into(),
        x_label: "iteration".into(),
        y_label: "residual (log10)".into(),
        log_y: true,
        series,
    }
    .render()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_all_series() {
        let svg = information_plane(&[(0.1, 0.2), (0.2, 0.5)], Some(&[(0.0, 0.0), (0.3, 0.9)]));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn log_scale_drops_non_positive() {
        let svg = residual_trajectories(&[("a <1>".into(), vec![1e-3, 0.0, 1e-9])]);
        assert!(svg.contains("a &lt;1&gt;"));
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 2);
    }

    #[test]
    fn empty_chart_is_valid() {
        let svg = residual_trajectories(&[]);
        assert!(svg.contains("</svg>"));
    }
}
