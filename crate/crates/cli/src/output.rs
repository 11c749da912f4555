//! CSV table, SVG log-log plot and run manifest.
//!
//! The CSV and SVG depend only on the numbers in the report, so repeated
//! runs write identical bytes. Timings go to the manifest only.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use opwg_core::analysis::{ConvergenceReport, SweepKind};

use crate::config::Sweep;
use crate::study::StudyResult;

pub const CSV_HEADER: &str = "step,energy_error,energy_order,l2_error,l2_order";

/// `printf("%.{digits}e")`: mantissa, `e`, sign and at least two exponent
/// digits.
pub fn c_exp(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.digits$e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

/// `1/n` when the step is the reciprocal of an integer, scientific
/// notation otherwise.
pub fn format_step(step: f64) -> String {
    let inv = 1.0 / step;
    let n = inv.round();
    if n >= 1.0 && (inv - n).abs() <= 1e-9 * n {
        format!("1/{}", n as u64)
    } else {
        c_exp(step, 6)
    }
}

fn format_order(order: Option<f64>) -> String {
    order.map(|o| format!("{o:.4}")).unwrap_or_default()
}

pub fn render_csv(report: &ConvergenceReport) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, row) in report.rows.iter().enumerate() {
        let (eo, lo) = if i == 0 { (None, None) } else { (report.energy_orders[i - 1], report.l2_orders[i - 1]) };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            format_step(row.step),
            c_exp(row.errors.energy, 4),
            format_order(eo),
            c_exp(row.errors.l2, 4),
            format_order(lo)
        );
    }
    out
}

/// Slope shown for one error series: the least-squares fit when there are
/// three or more points, else the single pairwise order.
pub fn series_slope(fit: Option<f64>, orders: &[Option<f64>]) -> Option<f64> {
    fit.or_else(|| orders.last().copied().flatten())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn decade_range(values: impl Iterator<Item = f64>) -> (i32, i32) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| *v > 0.0 && v.is_finite()) {
        lo = lo.min(v.log10());
        hi = hi.max(v.log10());
    }
    if !lo.is_finite() {
        return (-1, 0);
    }
    let (a, mut b) = (lo.floor() as i32, hi.ceil() as i32);
    if b <= a {
        b = a + 1;
    }
    (a, b)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Log-log plot of both error norms against the step, with power-of-ten
/// ticks, a legend and the fitted slope of each series.
pub fn render_svg(report: &ConvergenceReport) -> String {
    let (x0, x1) = decade_range(report.rows.iter().map(|r| r.step));
    let (y0, y1) = decade_range(report.rows.iter().flat_map(|r| [r.errors.energy, r.errors.l2]));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |v: f64| LEFT + (v.log10() - x0 as f64) / (x1 - x0) as f64 * pw;
    let py = |v: f64| TOP + (y1 as f64 - v.log10()) / (y1 - y0) as f64 * ph;
    let axis = match report.kind {
        SweepKind::Space => "h",
        SweepKind::Time => "tau",
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&report.label)
    );
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for e in x0..=x1 {
        let x = px(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="#dddddd"/>"##,
            TOP + ph
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">10<tspan dy="-6" font-size="9">{e}</tspan></text>"#,
            TOP + ph + 18.0
        );
    }
    for e in y0..=y1 {
        let y = py(10f64.powi(e));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">10<tspan dy="-6" font-size="9">{e}</tspan></text>"#,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{axis}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">error</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );

    let series = [
        ("energy", "#1f77b4", report.energy_fit.map(|f| f.slope), &report.energy_orders, 0usize),
        ("L2", "#d62728", report.l2_fit.map(|f| f.slope), &report.l2_orders, 1usize),
    ];
    for (i, (name, color, fit, orders, which)) in series.into_iter().enumerate() {
        let points: Vec<(f64, f64)> = report
            .rows
            .iter()
            .map(|r| (r.step, if which == 0 { r.errors.energy } else { r.errors.l2 }))
            .filter(|(_, e)| *e > 0.0 && e.is_finite())
            .map(|(st, e)| (px(st), py(e)))
            .collect();
        let path: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, path.join(" "));
        for (x, y) in &points {
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{color}"/>"#);
        }
        let slope = series_slope(fit, orders);
        let slope_text = slope.map(|v| format!("{v:.2}")).unwrap_or_else(|| "n/a".to_string());
        if points.len() >= 2 {
            let mid = points.len() / 2;
            let (xa, ya) = points[mid - 1];
            let (xb, yb) = points[mid];
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" fill="{color}" class="slope">{slope_text}</text>"#,
                (xa + xb) / 2.0 + 6.0,
                (ya + yb) / 2.0 - 6.0
            );
        }
        let ly = TOP + 18.0 + 18.0 * i as f64;
        let lx = LEFT + pw - 170.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
            ly - 4.0,
            lx + 24.0,
            ly - 4.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{name} error, slope {slope_text}</text>"#, lx + 30.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Plain-text record of the configuration, per-level solver statistics and
/// timings.
pub fn render_manifest(result: &StudyResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# opwg {} run manifest", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "[config]");
    s.push_str(&result.config.render());
    let _ = writeln!(s, "[problem]");
    let _ = writeln!(s, "exact = cos(2 pi t^2) cos(2 pi x) cos(2 pi y), A = I, unit square");
    let _ = writeln!(s, "beta0 = {}", result.config.beta0());
    let sweep = match result.config.sweep {
        Sweep::Space { .. } => "space",
        Sweep::Time { .. } => "time",
    };
    let _ = writeln!(s, "sweep = {sweep}");
    let _ = writeln!(s, "[levels]");
    let _ = writeln!(
        s,
        "level,h,tau,steps,dofs,cg_iterations_total,cg_iterations_max,max_relative_residual,max_mass_residual,seconds"
    );
    for (i, l) in result.levels.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{},{},{:.3}",
            format_step(l.h),
            format_step(l.tau),
            l.n_steps,
            l.n_dofs,
            l.total_iterations,
            l.max_iterations,
            c_exp(l.max_relative_residual, 3),
            l.max_mass_residual.map(|m| c_exp(m, 3)).unwrap_or_else(|| "-".to_string()),
            l.seconds
        );
    }
    let _ = writeln!(s, "[fits]");
    for (name, fit) in [("energy", result.report.energy_fit), ("l2", result.report.l2_fit)] {
        match fit {
            Some(f) => {
                let _ = writeln!(s, "{name}_slope = {:.4} (log residual {:.3e})", f.slope, f.residual);
            }
            None => {
                let _ = writeln!(s, "{name}_slope = -");
            }
        }
    }
    let _ = writeln!(s, "[timing]");
    let _ = writeln!(s, "wall_clock_seconds = {:.3}", result.seconds);
    s
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub manifest: PathBuf,
}

/// Writes `<label>.csv`, `<label>.svg` and `manifest.txt` to
/// `root/<output>`.
pub fn write_outputs(result: &StudyResult, root: &Path) -> std::io::Result<OutputFiles> {
    let dir = root.join(&result.config.output);
    std::fs::create_dir_all(&dir)?;
    let label = &result.config.label;
    let files = OutputFiles {
        csv: dir.join(format!("{label}.csv")),
        svg: dir.join(format!("{label}.svg")),
        manifest: dir.join("manifest.txt"),
    };
    std::fs::write(&files.csv, render_csv(&result.report))?;
    std::fs::write(&files.svg, render_svg(&result.report))?;
    std::fs::write(&files.manifest, render_manifest(result))?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponent() {
        assert_eq!(c_exp(0.24624, 4), "2.4624e-01");
        assert_eq!(c_exp(3.2239e-4, 4), "3.2239e-04");
        assert_eq!(c_exp(12345.0, 2), "1.23e+04");
        assert_eq!(c_exp(0.0, 4), "0.0000e+00");
        assert_eq!(c_exp(1e-100, 1), "1.0e-100");
    }

    #[test]
    fn step_labels() {
        assert_eq!(format_step(0.125), "1/8");
        assert_eq!(format_step(1.0 / 512.0), "1/512");
        assert_eq!(format_step(1.0), "1/1");
        assert_eq!(format_step(0.3), "3.000000e-01");
    }

    #[test]
    fn slope_prefers_fit() {
        assert_eq!(series_slope(Some(1.5), &[Some(2.0)]), Some(1.5));
        assert_eq!(series_slope(None, &[Some(2.0)]), Some(2.0));
        assert_eq!(series_slope(None, &[]), None);
    }
}
