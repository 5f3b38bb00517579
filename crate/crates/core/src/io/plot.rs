use std::fmt::Write;

use crate::harness::ExperimentReport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 64.0;

/// Static log-log SVG of median recovery error against object count, with
/// interquartile whiskers. Sizes without a positive median are skipped.
pub fn render_report_svg(report: &ExperimentReport) -> String {
    let pts: Vec<(f64, f64, f64, f64)> = report
        .summary
        .iter()
        .filter_map(|s| {
            let med = s.median_recovery_error.filter(|v| *v > 0.0)?;
            let [lo, hi] = s.iqr_recovery_error.unwrap_or([med, med]);
            Some((s.size.objects() as f64, med, lo.max(med * 1e-3), hi.max(med)))
        })
        .collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}: median recovery error vs size</text>"#,
        WIDTH / 2.0,
        report.spec.variant
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 1.5);
    let _ = writeln!(
        svg,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
    );
    if pts.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    let decades = |lo: f64, hi: f64| {
        let a = lo.log10().floor();
        let b = hi.log10().ceil();
        (a, if b > a { b } else { a + 1.0 })
    };
    let (nx_lo, nx_hi) = decades(
        pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.0).fold(0.0, f64::max),
    );
    let (ny_lo, ny_hi) = decades(
        pts.iter().map(|p| p.2).fold(f64::INFINITY, f64::min),
        pts.iter().map(|p| p.3).fold(0.0, f64::max),
    );
    let sx = |v: f64| x0 + (v.log10() - nx_lo) / (nx_hi - nx_lo) * (x1 - x0);
    let sy = |v: f64| y0 - (v.log10() - ny_lo) / (ny_hi - ny_lo) * (y0 - y1);

    for d in nx_lo as i32..=nx_hi as i32 {
        let x = sx(10f64.powi(d));
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">1e{d}</text>"#,
            y0 + 20.0
        );
    }
    for d in ny_lo as i32..=ny_hi as i32 {
        let y = sy(10f64.powi(d));
        let _ = writeln!(
            svg,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">1e{d}</text>"#,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">size (objects)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 16.0
    );

    let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.0), sy(p.1))).collect();
    let _ = writeln!(
        svg,
        r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#,
        line.join(" ")
    );
    for &(n, med, lo, hi) in &pts {
        let (x, y) = (sx(n), sy(med));
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="steelblue"/>"#,
            sy(lo),
            sy(hi)
        );
        let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="steelblue"/>"#);
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_with_threads, ExperimentSpec, Size};
    use crate::sampling::Design;
    use crate::solvers::{SolverOptions, Variant};

    #[test]
    fn renders_points_for_each_size() {
        let spec = ExperimentSpec {
            variant: Variant::ExternalPoint,
            dim: 2,
            sizes: vec![Size::Items(10), Size::Items(40)],
            design: Design::UniformBall,
            trials: 3,
            seed: 1,
            solver_opts: SolverOptions::default(),
            bypass_solver: false,
            triple_sample: None,
            object_shift: 0.0,
            record_timings: false,
        };
        let report = run_with_threads(&spec, 1).unwrap();
        let svg = render_report_svg(&report);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 2);
        assert_eq!(svg, render_report_svg(&report));
    }
}
