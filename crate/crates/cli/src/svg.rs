//! Self-contained SVG of test error against the mode cutoff.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::results::ResultRow;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median over seeds of `pick(row)` per `K`, sorted by `K`.
pub fn median_curve(rows: &[&ResultRow], pick: impl Fn(&ResultRow) -> f64) -> Vec<(usize, f64)> {
    let mut by_k: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_k.entry(r.k).or_default().push(pick(r));
    }
    by_k.into_iter().map(|(k, v)| (k, median(v))).collect()
}

/// Median test-error curves per budget `C` plus the truncation baseline.
pub fn curves(rows: &[ResultRow]) -> (Vec<(usize, Vec<(usize, f64)>)>, Vec<(usize, f64)>) {
    let mut by_c: BTreeMap<usize, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_c.entry(r.c).or_default().push(r);
    }
    let per_c = by_c
        .iter()
        .map(|(&c, rs)| (c, median_curve(rs, |r| r.test_err)))
        .collect();
    let all: Vec<&ResultRow> = rows.iter().collect();
    (per_c, median_curve(&all, |r| r.baseline_trunc_err))
}

/// One solid path per budget and one dashed path for the baseline; error on
/// a log10 axis, `K` on a log2 axis.
pub fn ucurve_svg(title: &str, rows: &[ResultRow]) -> String {
    let (per_c, baseline) = curves(rows);
    let points = per_c.iter().flat_map(|(_, c)| c.iter()).chain(&baseline);
    let positive = |e: f64| e.max(1e-12);
    let (mut kmin, mut kmax, mut emin, mut emax) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(k, e) in points {
        let lk = (k.max(1) as f64).log2();
        let le = positive(e).log10();
        kmin = kmin.min(lk);
        kmax = kmax.max(lk);
        emin = emin.min(le);
        emax = emax.max(le);
    }
    if !kmin.is_finite() {
        (kmin, kmax, emin, emax) = (0.0, 1.0, -1.0, 0.0);
    }
    let (emin, emax) = (emin.floor(), emax.ceil().max(emin.floor() + 1.0));
    let kmax = if kmax > kmin { kmax } else { kmin + 1.0 };
    let sx = |k: usize| {
        MARGIN + ((k.max(1) as f64).log2() - kmin) / (kmax - kmin) * (WIDTH - 2.0 * MARGIN)
    };
    let sy = |e: f64| {
        HEIGHT - MARGIN - (positive(e).log10() - emin) / (emax - emin) * (HEIGHT - 2.0 * MARGIN)
    };
    let path = |pts: &[(usize, f64)]| {
        let mut d = String::new();
        for (i, &(k, e)) in pts.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2}",
                if i == 0 { "M" } else { " L" },
                sx(k),
                sy(e)
            );
        }
        d
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    let mut lk = kmin.ceil() as i32;
    while lk as f64 <= kmax {
        let k = 1usize << lk.max(0);
        let x = sx(k);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{}" text-anchor="middle">{k}</text>"#,
            y0 + 20.0
        );
        lk += 1;
    }
    for le in emin as i32..=emax as i32 {
        let y = sy(10f64.powi(le));
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.2}" text-anchor="end">1e{le}</text>"#,
            x0 - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">K (modes)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">median test rel. L2 error</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, (c, pts)) in per_c.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path(pts)
        );
        for &(k, e) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(k),
                sy(e)
            );
        }
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly:.2}" fill="{color}">C = {c}</text>"#,
            WIDTH - MARGIN - 90.0
        );
    }
    let _ = writeln!(
        s,
        r#"<path d="{}" fill="none" stroke="black" stroke-width="1.5" stroke-dasharray="6 4"/>"#,
        path(&baseline)
    );
    let ly = MARGIN + 16.0 * per_c.len() as f64;
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{ly:.2}">Fourier truncation</text>"#,
        WIDTH - MARGIN - 90.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(c: usize, k: usize, seed: u64, err: f64) -> ResultRow {
        ResultRow {
            task: "darcy-pc".into(),
            c,
            d_c: c / k,
            k,
            seed,
            n_train: 4,
            n_test: 2,
            param_count: 10,
            train_err: err,
            test_err: err,
            baseline_trunc_err: 1.0 / k as f64,
            wallclock_s: 0.0,
        }
    }

    #[test]
    fn medians_over_seeds() {
        let rows = vec![
            row(32, 2, 0, 0.3),
            row(32, 2, 1, 0.1),
            row(32, 2, 2, 0.2),
            row(32, 4, 0, 0.05),
        ];
        let (per_c, base) = curves(&rows);
        assert_eq!(per_c, vec![(32, vec![(2, 0.2), (4, 0.05)])]);
        assert_eq!(base, vec![(2, 0.5), (4, 0.25)]);
    }

    #[test]
    fn one_solid_path_per_budget_and_one_dashed() {
        let mut rows = Vec::new();
        for c in [16, 32, 64] {
            for k in [2, 4, 8] {
                rows.push(row(c, k, 0, 0.01 * k as f64 + 1.0 / c as f64));
            }
        }
        let svg = ucurve_svg("darcy <pc>", &rows);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<path").count(), 4);
        assert_eq!(svg.matches("stroke-dasharray").count(), 1);
        assert!(svg.contains("darcy &lt;pc&gt;"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn empty_and_degenerate_inputs_render() {
        let svg = ucurve_svg("empty", &[]);
        assert_eq!(svg.matches("<path").count(), 1);
        let svg = ucurve_svg("zero", &[row(8, 2, 0, 0.0)]);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
