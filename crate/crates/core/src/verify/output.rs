//! CSV and SVG renderings of sweeps.

use std::fmt::Write;

use super::SweepResult;

pub const SWEEP_CSV_HEADER: &str = "experiment,root,n,samples,hits,censored,p_hat,se,lambda,ratio";

/// One row per `n`; `root` is 0-based.
pub fn sweep_csv(res: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in &res.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            res.experiment, res.root, r.n, r.samples, r.hits, r.censored, r.p_hat, r.se, r.lambda, r.ratio
        );
    }
    out
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 70.0;

/// Log-log scatter of `(n, p_hat)` with the fitted line and a reference line
/// of slope `-alpha` through the centroid of the points.
pub fn sweep_svg(res: &SweepResult) -> String {
    let pts: Vec<(f64, f64)> = res
        .rows
        .iter()
        .filter(|r| r.hits > 0)
        .map(|r| ((r.n as f64).ln(), r.p_hat.ln()))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="30" font-family="sans-serif" font-size="16" text-anchor="middle">{} root {} set {}: P(S/n in A) against n</text>"#,
        WIDTH / 2.0,
        res.experiment,
        res.root + 1,
        res.jset
    );
    if pts.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">no hits</text>"#,
            WIDTH / 2.0,
            HEIGHT / 2.0
        );
        svg.push_str("</svg>\n");
        return svg;
    }

    let (mut x0, mut x1) = bounds(pts.iter().map(|p| p.0));
    let (mut y0, mut y1) = bounds(pts.iter().map(|p| p.1));
    pad(&mut x0, &mut x1, 0.1);
    pad(&mut y0, &mut y1, 0.5);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    // axes
    let _ = writeln!(
        svg,
        r#"<path d="M{:.2} {:.2} L{:.2} {:.2} L{:.2} {:.2}" stroke="black" fill="none"/>"#,
        MARGIN,
        MARGIN,
        MARGIN,
        HEIGHT - MARGIN,
        WIDTH - MARGIN,
        HEIGHT - MARGIN
    );
    for r in res.rows.iter() {
        let x = sx((r.n as f64).ln());
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN + 18.0,
            r.n
        );
    }
    let ln10 = std::f64::consts::LN_10;
    for e in ((y0 / ln10).ceil() as i32)..=((y1 / ln10).floor() as i32) {
        let y = sy(e as f64 * ln10);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="end">1e{e}</text>"#,
            MARGIN - 5.0,
            MARGIN,
            MARGIN - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="14" text-anchor="middle">n</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );

    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let line = |slope: f64, intercept: f64, color: &str, dash: &str| {
        format!(
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            sx(x0),
            sy(intercept + slope * x0),
            sx(x1),
            sy(intercept + slope * x1)
        )
    };
    let _ = writeln!(svg, r#"<clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}"/></clipPath><g clip-path="url(#plot)">"#, WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let _ = writeln!(svg, "{}", line(-res.alpha, my + res.alpha * mx, "gray", r#" stroke-dasharray="6 4""#));
    if let Some(fit) = res.fit {
        let _ = writeln!(svg, "{}", line(fit.slope, fit.intercept, "steelblue", ""));
    }
    svg.push_str("</g>\n");
    for &(x, y) in &pts {
        let _ = writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#, sx(x), sy(y));
    }

    let mut legend = format!("reference slope {:.3}", -res.alpha);
    if let Some(fit) = res.fit {
        let _ = write!(legend, ", fitted {:.3} ± {:.3}", fit.slope, fit.slope_se);
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="end">{legend}</text>"#,
        WIDTH - MARGIN,
        MARGIN + 16.0
    );
    svg.push_str("</svg>\n");
    svg
}

fn bounds(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn pad(lo: &mut f64, hi: &mut f64, min_span: f64) {
    let span = (*hi - *lo).max(min_span);
    let mid = 0.5 * (*lo + *hi);
    *lo = mid - 0.55 * span;
    *hi = mid + 0.55 * span;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dims::DimSet;
    use crate::verify::SweepRow;

    fn sample() -> SweepResult {
        let rows = [(8, 400), (16, 130), (32, 40)]
            .iter()
            .map(|&(n, hits)| SweepRow {
                n,
                samples: 100_000,
                hits,
                p_hat: hits as f64 / 1e5,
                se: 0.0,
                censored: 0,
                lambda: 1.0,
                ratio: hits as f64 / 1e5,
            })
            .collect();
        SweepResult {
            experiment: "prob".into(),
            root: 0,
            jset: DimSet::singleton(0),
            alpha: 1.6,
            rows,
            fit: None,
            insufficient_hits: false,
            measure: None,
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let csv = sweep_csv(&sample());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("prob,0,8,100000,400,0,0.004,"));
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = sweep_svg(&sample());
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains(r#"width="800""#) && svg.contains(r#"height="600""#));
    }
}
