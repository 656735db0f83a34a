//! Plain-file emission: per-step CSV, per-cell summary, resolved config, and
//! self-contained SVG line plots.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{summarize, ExperimentConfig, RunRecord};

/// 17 significant decimal digits: enough for bit-exact round trips.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_f64(s: &str) -> std::result::Result<f64, std::num::ParseFloatError> {
    s.parse::<f64>()
}

pub const RUNS_CSV_HEADER: &str =
    "env,lambda,gamma,alpha,beta_over_alpha,seed,step,mspbe,mse,d_t,lyapunov,diverged";

/// One CSV row per recorded step per run. The value-error column is only
/// populated on the final row of runs that measured it; absent metrics are
/// written as `nan`.
pub fn write_runs_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str(RUNS_CSV_HEADER);
    out.push('\n');
    for record in records {
        let last_step = record.series.records.last().map(|r| r.step);
        for rec in &record.series.records {
            let mse = match record.final_mse {
                Some(m) if Some(rec.step) == last_step => m.value,
                _ => f64::NAN,
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                record.env,
                format_f64(record.lambda),
                format_f64(record.gamma),
                format_f64(record.alpha),
                format_f64(record.beta_over_alpha),
                record.seed,
                rec.step,
                format_f64(rec.mspbe),
                format_f64(mse),
                format_f64(rec.d_t),
                format_f64(rec.lyapunov),
                record.diverged
            );
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut out = String::new();
    out.push_str("alpha,beta_over_alpha,mean_final_mspbe,mean_final_mse,n_diverged,n_runs\n");
    for cell in summarize(records) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_f64(cell.alpha),
            format_f64(cell.beta_over_alpha),
            format_f64(cell.mean_final_mspbe),
            format_f64(cell.mean_final_mse),
            cell.n_diverged,
            cell.n_runs
        );
    }
    fs::write(path, out)?;
    Ok(())
}

/// Minimal self-contained SVG polyline plot of (step, value) points.
pub fn write_series_svg(path: &Path, title: &str, points: &[(f64, f64)]) -> Result<()> {
    let finite: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    if finite.is_empty() {
        return Err(Error::EmptySeries("write_series_svg"));
    }
    let (w, h, margin) = (640.0, 400.0, 50.0);
    let xs: Vec<f64> = finite.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = finite.iter().map(|p| p.1).collect();
    let (xmin, xmax) = (
        xs.iter().cloned().fold(f64::INFINITY, f64::min),
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let (ymin, ymax) = (
        ys.iter().cloned().fold(f64::INFINITY, f64::min),
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let xspan = (xmax - xmin).max(1e-300);
    let yspan = (ymax - ymin).max(1e-300);
    let map = |(x, y): (f64, f64)| {
        let px = margin + (x - xmin) / xspan * (w - 2.0 * margin);
        let py = h - margin - (y - ymin) / yspan * (h - 2.0 * margin);
        (px, py)
    };
    let mut poly = String::new();
    for p in &finite {
        let (px, py) = map(*p);
        let _ = write!(poly, "{px:.2},{py:.2} ");
    }
    let svg = format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"20\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"14\">{title}</text>\n",
            "<line x1=\"{m}\" y1=\"{ybase}\" x2=\"{xr}\" y2=\"{ybase}\" stroke=\"black\"/>\n",
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{ybase}\" stroke=\"black\"/>\n",
            "<text x=\"{m}\" y=\"{ylab}\" font-family=\"monospace\" font-size=\"10\">{xmin:.3e} .. {xmax:.3e}</text>\n",
            "<text x=\"4\" y=\"{m}\" font-family=\"monospace\" font-size=\"10\">{ymax:.3e}</text>\n",
            "<text x=\"4\" y=\"{ybase}\" font-family=\"monospace\" font-size=\"10\">{ymin:.3e}</text>\n",
            "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{poly}\"/>\n",
            "</svg>\n"
        ),
        w = w,
        h = h,
        m = margin,
        tx = w / 2.0,
        xr = w - margin,
        ybase = h - margin,
        ylab = h - margin + 24.0,
        title = title,
        xmin = xmin,
        xmax = xmax,
        ymin = ymin,
        ymax = ymax,
        poly = poly.trim_end(),
    );
    fs::write(path, svg)?;
    Ok(())
}

/// Write runs.csv, summary.csv, config.txt, and (optionally) one SVG per
/// metric for the best cell's first seed. Returns the written paths.
pub fn emit_results(
    records: &[RunRecord],
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::EmptySeries("emit_results"));
    }
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let runs = out_dir.join("runs.csv");
    write_runs_csv(&runs, records)?;
    written.push(runs);

    let summary = out_dir.join("summary.csv");
    write_summary_csv(&summary, records)?;
    written.push(summary);

    let cfg = out_dir.join("config.txt");
    fs::write(
        &cfg,
        format!(
            "# hash = {:016x}\n{}",
            config.config_hash(),
            config.resolved_text()
        ),
    )?;
    written.push(cfg);

    if config.emit_plots {
        let cells = summarize(records);
        let best = cells
            .iter()
            .filter(|c| c.mean_final_mspbe.is_finite())
            .min_by(|a, b| {
                a.mean_final_mspbe
                    .partial_cmp(&b.mean_final_mspbe)
                    .expect("finite")
            });
        if let Some(best) = best {
            if let Some(record) = records
                .iter()
                .find(|r| r.alpha == best.alpha && r.beta_over_alpha == best.beta_over_alpha)
            {
                for (name, select) in [("mspbe", 0usize), ("d_t", 1), ("lyapunov", 2)] {
                    let points: Vec<(f64, f64)> = record
                        .series
                        .records
                        .iter()
                        .map(|r| {
                            let y = match select {
                                0 => r.mspbe,
                                1 => r.d_t,
                                _ => r.lyapunov,
                            };
                            (r.step as f64, y)
                        })
                        .collect();
                    if points.iter().any(|(_, y)| y.is_finite()) {
                        let path = out_dir.join(format!("{name}.svg"));
                        write_series_svg(
                            &path,
                            &format!(
                                "{} {name} alpha={:.3e} ratio={:.3e}",
                                record.env, record.alpha, record.beta_over_alpha
                            ),
                            &points,
                        )?;
                        written.push(path);
                    }
                }
            }
        }
    }
    Ok(written)
}
