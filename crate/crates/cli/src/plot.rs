//! Hand-written SVG log-log plot of a convergence study.

use std::fmt::Write;

use nlstokes::analysis::StudyReport;

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

const SERIES: [(&str, &str); 3] = [("error_u_l2", "#1f77b4"), ("error_u_energy", "#ff7f0e"), ("error_p_l2", "#2ca02c")];

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x.log10() - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y.log10() - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

/// Error against δ: one polyline per error norm plus slope-½ and slope-1
/// guides anchored at the largest successful δ.
pub fn study_svg(report: &StudyReport) -> String {
    let points: Vec<(f64, [f64; 3])> = report
        .records
        .iter()
        .filter_map(|r| r.errors.as_ref().map(|e| (r.delta, [e.error_u_l2, e.error_u_energy, e.error_p_l2])))
        .collect();
    let deltas: Vec<f64> = report.records.iter().map(|r| r.delta).collect();
    let positive: Vec<f64> = points.iter().flat_map(|(_, e)| e.iter().copied()).filter(|v| *v > 0.0).collect();

    let (dmin, dmax) = deltas.iter().fold((f64::INFINITY, 0.0f64), |(a, b), d| (a.min(*d), b.max(*d)));
    let (emin, emax) = positive.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let (emin, emax) = if positive.is_empty() { (0.1, 1.0) } else { (emin, emax) };
    // Guides span a factor dmax/dmin at slope 1; make room for them.
    let guide_drop = dmax / dmin;
    let axes = Axes {
        x0: dmin.log10().floor(),
        x1: dmax.log10().ceil().max(dmin.log10().floor() + 1.0),
        y0: (emin / guide_drop).log10().floor(),
        y1: emax.log10().ceil().max((emin / guide_drop).log10().floor() + 1.0),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{} on {} ({}, h = {})</text>"#,
        (W - RIGHT + LEFT) / 2.0,
        report.case,
        report.domain,
        report.kernel,
        report.coupling
    );
    let (bx0, bx1, by0, by1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        r#"<rect x="{bx0}" y="{by0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        bx1 - bx0,
        by1 - by0
    );

    for e in axes.x0 as i32..=axes.x1 as i32 {
        let x = axes.px(10f64.powi(e));
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{by1}" x2="{x:.2}" y2="{}" stroke="black"/>"#, by1 + 6.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{e}</text>"#, by1 + 20.0);
    }
    for e in axes.y0 as i32..=axes.y1 as i32 {
        let y = axes.py(10f64.powi(e));
        let _ = writeln!(s, r#"<line x1="{}" y1="{y:.2}" x2="{bx0}" y2="{y:.2}" stroke="black"/>"#, bx0 - 6.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">1e{e}</text>"#, bx0 - 10.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">delta</text>"#, (bx0 + bx1) / 2.0, H - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">error</text>"#,
        (by0 + by1) / 2.0,
        (by0 + by1) / 2.0
    );

    let mut legend_y = TOP + 10.0;
    for (k, (name, color)) in SERIES.iter().enumerate() {
        let pts: Vec<String> = points
            .iter()
            .filter(|(_, e)| e[k] > 0.0)
            .map(|(d, e)| format!("{:.2},{:.2}", axes.px(*d), axes.py(e[k])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
        legend(&mut s, &mut legend_y, name, color, "");
    }

    // Guides start at the largest successful δ, just under the smallest error there.
    let anchor = points
        .first()
        .map(|(d, e)| (*d, e.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min)));
    let (ad, ae) = match anchor {
        Some((d, e)) if e.is_finite() => (d, e / 2.0),
        _ => (dmax, emin),
    };
    for (slope, dash, label) in [(0.5, "6 4", "slope 1/2"), (1.0, "2 3", "slope 1")] {
        let y_end = ae * (dmin / ad).powf(slope);
        let _ = writeln!(
            s,
            r#"<polyline class="guide" fill="none" stroke="gray" stroke-dasharray="{dash}" points="{:.2},{:.2} {:.2},{:.2}"/>"#,
            axes.px(ad),
            axes.py(ae),
            axes.px(dmin),
            axes.py(y_end)
        );
        legend(&mut s, &mut legend_y, label, "gray", dash);
    }
    s.push_str("</svg>\n");
    s
}

fn legend(s: &mut String, y: &mut f64, label: &str, color: &str, dash: &str) {
    let x = W - RIGHT + 15.0;
    let _ = writeln!(
        s,
        r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2" stroke-dasharray="{}"/>"#,
        x + 25.0,
        if dash.is_empty() { "none" } else { dash }
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}">{label}</text>"#, x + 32.0, *y + 4.0);
    *y += 20.0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use nlstokes::analysis::{ErrorRecord, StudyRecord};
    use nlstokes::system::{Method, SolverOptions};

    fn record(delta: f64, e: f64) -> StudyRecord {
        StudyRecord {
            delta,
            h: delta / 4.0,
            errors: Some(ErrorRecord {
                n_points: 1,
                n_interior: 1,
                unknowns: 1,
                error_u_l2: e,
                error_u_energy: 2.0 * e,
                error_p_l2: e / 3.0,
                method: Method::Direct,
                iterations: 1,
                residual: 0.0,
                energy_gap: 0.0,
                stability_ratio: None,
                assemble_seconds: 0.0,
                solve_seconds: 0.0,
            }),
            failure: None,
        }
    }

    fn report(records: Vec<StudyRecord>) -> StudyReport {
        StudyReport {
            case: "disk-swirl".into(),
            domain: "unit-disk".into(),
            kernel: "quadratic".into(),
            coupling: "delta^1.5/2".into(),
            solver: SolverOptions::default(),
            version: String::new(),
            records,
            orders: None,
        }
    }

    #[test]
    fn three_series_and_two_guides() {
        let svg = study_svg(&report(vec![record(0.4, 0.2), record(0.2, 0.1), record(0.1, 0.05)]));
        assert_eq!(svg.matches("<polyline").count(), 5);
        assert_eq!(svg.matches(r#"class="series""#).count(), 3);
        assert_eq!(svg.matches(r#"class="guide""#).count(), 2);
        // Decade ticks on both axes are explicit lines.
        assert!(svg.contains(">1e-1</text>"));
    }

    #[test]
    fn failed_points_leave_gaps_not_extra_lines() {
        let mut r = record(0.2, 0.1);
        r.errors = None;
        r.failure = Some("boom".into());
        let svg = study_svg(&report(vec![record(0.4, 0.2), r, record(0.1, 0.05)]));
        assert_eq!(svg.matches("<polyline").count(), 5);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
