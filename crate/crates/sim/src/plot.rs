//! Minimal SVG line charts and a barycentric simplex plot.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SimError};
use crate::simulate::TrajectoryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Bundle losses against τ, one panel line per (population, bundle).
    Losses,
    /// Population regret against τ.
    Regret,
    /// Potential of the iterate and of the Cesàro mean against τ.
    Potential,
    /// Trajectory of a three-bundle population in the 2-simplex.
    Simplex { population: usize },
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn line_chart(title: &str, x_label: &str, series: &[Series]) -> String {
    let finite = series
        .iter()
        .flat_map(|s| &s.points)
        .filter(|p| p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in finite {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 < 1e-300 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r#"<g stroke="black" fill="none"><line x1="{m}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}"/></g>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    );
    let label = |out: &mut String, x: f64, y: f64, anchor: &str, text: String| {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{}</text>"#,
            escape(&text)
        );
    };
    label(
        &mut out,
        MARGIN,
        HEIGHT - MARGIN + 15.0,
        "start",
        format!("{x0}"),
    );
    label(
        &mut out,
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 15.0,
        "end",
        format!("{x1}"),
    );
    label(
        &mut out,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        "middle",
        x_label.to_string(),
    );
    label(
        &mut out,
        MARGIN - 4.0,
        HEIGHT - MARGIN,
        "end",
        format!("{y0:.3}"),
    );
    label(
        &mut out,
        MARGIN - 4.0,
        MARGIN + 4.0,
        "end",
        format!("{y1:.3}"),
    );

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}" fill="{color}" text-anchor="end" font-family="sans-serif" font-size="11">{}</text>"#,
            WIDTH - MARGIN,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn simplex_chart(records: &[TrajectoryRecord], k: usize, labels: &[String]) -> Result<String> {
    if records
        .iter()
        .any(|r| r.mu.get(k).is_none_or(|b| b.len() != 3))
    {
        return Err(SimError::Config(format!(
            "simplex plot needs population {k} to have exactly three bundles"
        )));
    }
    // Vertices of an equilateral triangle; a point is the barycentric mix.
    let side = HEIGHT - 2.0 * MARGIN;
    let corners = [
        (WIDTH / 2.0 - side / 1.732, HEIGHT - MARGIN),
        (WIDTH / 2.0 + side / 1.732, HEIGHT - MARGIN),
        (WIDTH / 2.0, MARGIN),
    ];
    let project = |mu: &[f64]| {
        let x: f64 = mu.iter().zip(&corners).map(|(m, c)| m * c.0).sum();
        let y: f64 = mu.iter().zip(&corners).map(|(m, c)| m * c.1).sum();
        (x, y)
    };
    let mut out = String::new();
    header(&mut out, &format!("population {k} trajectory"));
    let tri: Vec<String> = corners
        .iter()
        .map(|c| format!("{:.2},{:.2}", c.0, c.1))
        .collect();
    let _ = writeln!(
        out,
        r#"<polygon points="{}" fill="none" stroke="black"/>"#,
        tri.join(" ")
    );
    for (i, c) in corners.iter().enumerate() {
        let name = labels
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("bundle {i}"));
        let dy = if i == 2 { -6.0 } else { 16.0 };
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            c.0,
            c.1 + dy,
            escape(&name)
        );
    }
    let pts: Vec<String> = records
        .iter()
        .map(|r| {
            let (x, y) = project(&r.mu[k]);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(
        out,
        r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
        COLORS[0],
        pts.join(" ")
    );
    if let Some(r) = records.last() {
        let (x, y) = project(&r.mu[k]);
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#,
            COLORS[1]
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders `records` as SVG text.
pub fn render_svg(
    records: &[TrajectoryRecord],
    kind: PlotKind,
    bundle_labels: &[Vec<String>],
) -> Result<String> {
    let label = |k: usize, p: usize| {
        bundle_labels
            .get(k)
            .and_then(|b| b.get(p))
            .cloned()
            .unwrap_or_else(|| format!("pop {k} bundle {p}"))
    };
    let tau = |r: &TrajectoryRecord| r.tau as f64;
    let shape: Vec<usize> = records
        .first()
        .map(|r| r.mu.iter().map(Vec::len).collect())
        .unwrap_or_default();
    Ok(match kind {
        PlotKind::Losses => {
            let series: Vec<Series> = shape
                .iter()
                .enumerate()
                .flat_map(|(k, &n)| (0..n).map(move |p| (k, p)))
                .map(|(k, p)| Series {
                    label: label(k, p),
                    points: records.iter().map(|r| (tau(r), r.losses[k][p])).collect(),
                })
                .collect();
            line_chart("bundle losses", "tau", &series)
        }
        PlotKind::Regret => {
            let series: Vec<Series> = (0..shape.len())
                .map(|k| Series {
                    label: format!("population {k}"),
                    points: records.iter().map(|r| (tau(r), r.regret_norm[k])).collect(),
                })
                .collect();
            line_chart("normalized regret", "tau", &series)
        }
        PlotKind::Potential => line_chart(
            "potential",
            "tau",
            &[
                Series {
                    label: "V(mu)".into(),
                    points: records.iter().map(|r| (tau(r), r.potential)).collect(),
                },
                Series {
                    label: "V(Cesaro mean)".into(),
                    points: records
                        .iter()
                        .map(|r| (tau(r), r.cesaro_potential))
                        .collect(),
                },
            ],
        ),
        PlotKind::Simplex { population } => simplex_chart(
            records,
            population,
            bundle_labels
                .get(population)
                .map(Vec::as_slice)
                .unwrap_or(&[]),
        )?,
    })
}

pub fn export_svg(
    records: &[TrajectoryRecord],
    path: &Path,
    kind: PlotKind,
    bundle_labels: &[Vec<String>],
) -> Result<()> {
    let svg = render_svg(records, kind, bundle_labels)?;
    std::fs::write(path, svg).map_err(SimError::io(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimulationConfig;
    use crate::simulate::run_simulation;
    use crate::spec::{load_game, EXAMPLE_NETWORK};

    #[test]
    fn every_kind_renders() {
        let game = load_game(EXAMPLE_NETWORK).unwrap();
        let config = SimulationConfig {
            horizon: 30,
            ..SimulationConfig::default()
        };
        let sim = run_simulation(&game, &config).unwrap();
        for kind in [
            PlotKind::Losses,
            PlotKind::Regret,
            PlotKind::Potential,
            PlotKind::Simplex { population: 1 },
        ] {
            let svg = render_svg(&sim.records, kind, &game.bundle_labels).unwrap();
            assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
            assert!(svg.contains("<polyline"));
            assert!(!svg.contains("NaN"));
        }
        assert!(render_svg(&sim.records, PlotKind::Simplex { population: 5 }, &[]).is_err());
    }

    #[test]
    fn empty_records_still_render() {
        assert!(render_svg(&[], PlotKind::Losses, &[])
            .unwrap()
            .contains("</svg>"));
    }
}
