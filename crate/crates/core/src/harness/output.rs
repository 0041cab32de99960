use std::fmt::Write as _;
use std::path::Path;

use super::HarnessError;
use crate::diagnostics::TrajectoryRecord;

pub const CSV_HEADER: &str =
    "iter,loss,grad_fro,modified_energy,dissipation_lhs,dissipation_rhs,step_fro,min_r,max_xi,eta_condition_ok,wall_ns";

/// Ledger rows as CSV. Floats use the shortest round-trip representation, so
/// equal trajectories give byte-identical files.
pub fn records_to_csv(records: &[TrajectoryRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::with_capacity(64 * (records.len() + 1)));
    w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
    for r in records {
        let eta = match r.eta_condition_ok {
            Some(true) => "true",
            Some(false) => "false",
            None => "na",
        };
        w.write_record([
            r.iter.to_string(),
            r.loss.to_string(),
            r.grad_fro.to_string(),
            r.modified_energy.to_string(),
            r.dissipation_lhs.to_string(),
            r.dissipation_rhs.to_string(),
            r.step_fro.to_string(),
            r.min_r.to_string(),
            r.max_xi().to_string(),
            eta.to_string(),
            r.wall_ns.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// One loss curve for [`loss_plot_svg`].
#[derive(Debug, Clone)]
pub struct Curve {
    pub label: String,
    pub losses: Vec<f64>,
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Log-scale training loss against iteration, one polyline per curve.
/// Non-positive and non-finite points are dropped.
pub fn loss_plot_svg(title: &str, curves: &[Curve]) -> String {
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let logs = |c: &Curve| -> Vec<(usize, f64)> {
        c.losses
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_finite() && **f > 0.0)
            .map(|(i, f)| (i, f.log10()))
            .collect()
    };
    let all: Vec<f64> = curves.iter().flat_map(|c| logs(c).into_iter().map(|p| p.1)).collect();
    let max_iter = curves.iter().map(|c| c.losses.len()).max().unwrap_or(1).max(2) - 1;
    let (mut lo, mut hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    lo = lo.floor();
    hi = hi.ceil().max(lo + 1.0);
    let x = |i: usize| left + pw * i as f64 / max_iter as f64;
    let y = |v: f64| top + ph * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let decades = (hi - lo) as i64;
    let step = (decades / 8).max(1);
    let mut d = lo as i64;
    while d <= hi as i64 {
        let yy = y(d as f64);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"##,
            left + pw,
            left - 6.0,
            yy + 4.0
        );
        d += step;
    }
    for t in 0..=5 {
        let it = max_iter * t / 5;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{it}</text>"#,
            x(it),
            top + ph + 18.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">training loss (log scale)</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (ci, c) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        let pts: Vec<String> = logs(c)
            .iter()
            .map(|&(i, v)| format!("{:.2},{:.2}", x(i), y(v)))
            .collect();
        if !pts.is_empty() {
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
        let ly = top + 10.0 + 18.0 * ci as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&c.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_has_one_polyline_per_curve() {
        let curves = vec![
            Curve {
                label: "a<b".into(),
                losses: vec![1.0, 0.1, 0.01],
            },
            Curve {
                label: "c".into(),
                losses: vec![1.0, f64::NAN, 0.5],
            },
        ];
        let svg = loss_plot_svg("t", &curves);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
