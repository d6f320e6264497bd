use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentKind, ExperimentReport, HarnessError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitFormat {
    Csv,
    Json,
    Svg,
}

impl EmitFormat {
    fn extension(self) -> &'static str {
        match self {
            EmitFormat::Csv => "csv",
            EmitFormat::Json => "json",
            EmitFormat::Svg => "svg",
        }
    }
}

const RUN_HEADER: [&str; 28] = [
    "rung", "eps", "e0", "converged", "steps", "t_final", "fit_radius", "fit_rms",
    "area_drift", "barycenter_drift", "quad_moment_drift", "volume_drift", "htot_drift",
    "radius_gap", "center_gap", "quad_moment_gap", "volume_gap", "htot_gap",
    "projected_radius_gap", "projected_center_gap", "projected_quad_moment_gap", "projected_volume_gap",
    "projected_htot_gap", "volume_excess", "htot_excess", "a_accum", "b_accum", "sup_accum",
];

const ROW_HEADER: [&str; 8] =
    ["label", "vertices", "energy", "dlm_ratio", "refined_dlm_ratio", "deficit", "deficit_ratio", "flag"];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One CSV row per run (stability, limit) or per mesh (DLM, deficit).
pub fn write_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    match report.kind {
        ExperimentKind::Stability | ExperimentKind::Limit => {
            w.write_record(RUN_HEADER)?;
            for r in &report.runs {
                let mut rec = vec![
                    r.rung.to_string(),
                    r.spec.amplitude.to_string(),
                    r.e0.to_string(),
                    r.converged.to_string(),
                    r.steps.to_string(),
                    r.t_final.to_string(),
                    opt(r.fit.map(|f| f.radius)),
                    opt(r.fit.map(|f| f.rms)),
                ];
                rec.extend(r.drifts.values().map(|v| v.to_string()));
                for q in [r.limit_gaps, r.projected_gaps] {
                    match q {
                        Some(q) => rec.extend(q.values().map(|v| v.to_string())),
                        None => rec.extend(std::iter::repeat_n(String::new(), 5)),
                    }
                }
                rec.push(opt(r.one_sided.map(|o| o[0])));
                rec.push(opt(r.one_sided.map(|o| o[1])));
                let a = &r.accumulators;
                rec.extend([a.a, a.b, a.sup].map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
        }
        ExperimentKind::Dlm | ExperimentKind::Deficit => {
            w.write_record(ROW_HEADER)?;
            for r in &report.rows {
                w.write_record([
                    r.label.clone(),
                    r.vertices.to_string(),
                    r.energy.to_string(),
                    opt(r.dlm_ratio),
                    opt(r.refined_dlm_ratio),
                    opt(r.deficit),
                    opt(r.deficit_ratio),
                    r.flag.clone().unwrap_or_default(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Points `(E₀, y)` of the report's scatter plot and the y-axis label.
fn scatter(report: &ExperimentReport) -> (&'static str, Vec<(f64, f64)>) {
    match report.kind {
        ExperimentKind::Stability => (
            "drift",
            report.runs.iter().map(|r| (r.e0, r.drifts.area + r.drifts.barycenter + r.drifts.quad_moment)).collect(),
        ),
        ExperimentKind::Limit => (
            "limit gap",
            report
                .runs
                .iter()
                .filter_map(|r| r.limit_gaps.map(|g| (r.e0, g.area + g.barycenter + g.quad_moment)))
                .collect(),
        ),
        ExperimentKind::Dlm => (
            "dlm numerator",
            report.rows.iter().filter_map(|r| Some((r.energy, r.dlm_ratio? * r.energy))).collect(),
        ),
        ExperimentKind::Deficit => {
            ("deficit", report.rows.iter().filter_map(|r| Some((r.energy, r.deficit?))).collect())
        }
    }
}

/// Scatter of the report's main quantity against `E0` with the least-squares
/// line through the origin, whose slope is the measured constant.
pub fn write_svg<W: Write>(report: &ExperimentReport, mut out: W) -> std::io::Result<()> {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 56.0;
    let (ylabel, pts) = scatter(report);
    let xmax = pts.iter().map(|p| p.0).fold(0.0, f64::max).max(f64::MIN_POSITIVE) * 1.05;
    let ymax = pts.iter().map(|p| p.1.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE) * 1.05;
    let sx = |x: f64| M + x / xmax * (W - 2.0 * M);
    let sy = |y: f64| H - M - y / ymax * (H - 2.0 * M);
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let slope = if sxx > 0.0 { pts.iter().map(|p| p.0 * p.1).sum::<f64>() / sxx } else { 0.0 };

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (sx(0.0), sy(0.0), sx(xmax), sy(ymax));
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">E0</text>"#, W / 2.0, H - 14.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{ylabel}</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="end" font-size="10">{xmax:.3e}</text>"#, y0 + 14.0);
    let _ = writeln!(s, r#"<text x="{}" y="{y1}" text-anchor="end" font-size="10">{ymax:.3e}</text>"#, x0 - 4.0);
    if !pts.is_empty() {
        let (xe, ye) = (xmax, (slope * xmax).min(ymax));
        let xe = if slope * xmax > ymax { ymax / slope } else { xe };
        let _ = writeln!(
            s,
            r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{}" stroke="steelblue" stroke-dasharray="4 3"/>"#,
            sx(xe),
            sy(ye)
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="11" fill="steelblue">C = {slope:.4e}</text>"#, x0 + 8.0, y1 + 12.0);
    }
    for (x, y) in &pts {
        let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="4" fill="crimson"/>"#, sx(*x), sy(y.abs()));
    }
    s.push_str("</svg>\n");
    out.write_all(s.as_bytes())
}

/// Writes `<dir>/<stem>.<ext>` for each format and returns the paths.
pub fn emit(
    report: &ExperimentReport,
    dir: &Path,
    stem: &str,
    formats: &[EmitFormat],
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut paths = Vec::new();
    for &fmt in formats {
        let path = dir.join(format!("{stem}.{}", fmt.extension()));
        let io = |e: String| HarnessError::Io(path.clone(), e);
        let file = std::fs::File::create(&path).map_err(|e| io(e.to_string()))?;
        let mut out = std::io::BufWriter::new(file);
        match fmt {
            EmitFormat::Csv => write_csv(report, &mut out).map_err(|e| io(e.to_string()))?,
            EmitFormat::Json => {
                serde_json::to_writer_pretty(&mut out, report).map_err(|e| io(e.to_string()))?;
                out.write_all(b"\n").map_err(|e| io(e.to_string()))?;
            }
            EmitFormat::Svg => write_svg(report, &mut out).map_err(|e| io(e.to_string()))?,
        }
        out.flush().map_err(|e| io(e.to_string()))?;
        paths.push(path);
    }
    Ok(paths)
}
