//! Static SVG figures. Coordinates are printed with fixed precision so the
//! same input always yields the same bytes.

use std::fmt::Write;

use bhdeskew_core::pipeline::EvalReport;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

fn extent(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn frame(s: &mut String, a: &Axes, title: &str, xlabel: &str, ylabel: &str) {
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        W / 2.0,
        esc(title)
    );
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(
        s,
        "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
        x1 - x0,
        y1 - y0
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = a.x.0 + t * (a.x.1 - a.x.0);
        let yv = a.y.0 + t * (a.y.1 - a.y.0);
        let (px, py) = (a.px(xv), a.py(yv));
        let _ =
            writeln!(s, "<line x1=\"{px:.1}\" y1=\"{y1:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>", y1 + 5.0);
        let _ = writeln!(s, "<text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>", y1 + 18.0, tick(xv));
        let _ =
            writeln!(s, "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{x0:.1}\" y2=\"{py:.1}\" stroke=\"black\"/>", x0 - 5.0);
        let _ =
            writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>", x0 - 8.0, py + 4.0, tick(yv));
    }
    let _ = writeln!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        H - 15.0,
        esc(xlabel)
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(ylabel)
    );
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-3..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn legend(s: &mut String, items: &[(&str, &str)]) {
    for (i, (label, color)) in items.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = W - RIGHT - 150.0;
        let _ = writeln!(s, "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>", y - 9.0);
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{y:.1}\">{}</text>", x + 16.0, esc(label));
    }
}

/// Histogram of per-sample skew relative error, in percent.
pub fn error_histogram(report: &EvalReport) -> String {
    const BINS: usize = 20;
    let errs: Vec<f64> = report.rows.iter().map(|r| 100.0 * r.skew_rel_error).collect();
    let top = errs.iter().copied().fold(0.0, f64::max);
    let width = (top / BINS as f64).max(0.5);
    let mut counts = [0usize; BINS];
    for e in &errs {
        counts[((e / width) as usize).min(BINS - 1)] += 1;
    }
    let peak = counts.iter().copied().max().unwrap_or(0) as f64;
    let a = Axes::new((0.0, width * BINS as f64), (0.0, peak.max(1.0)));
    let mut s = String::new();
    let agg = &report.aggregates;
    let title = format!(
        "Skew relative error (n = {}, mean {:.2}%, median {:.2}%)",
        agg.count,
        100.0 * agg.mean_skew_rel_error,
        100.0 * agg.median_skew_rel_error
    );
    frame(&mut s, &a, &title, "relative error (%)", "samples");
    for (i, &c) in counts.iter().enumerate() {
        let (x0, x1) = (a.px(i as f64 * width), a.px((i + 1) as f64 * width));
        let (y0, y1) = (a.py(c as f64), a.py(0.0));
        let _ = writeln!(
            s,
            "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"#4477aa\" stroke=\"white\"/>",
            x1 - x0,
            y1 - y0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Relative loss deviation before and after correction against frequency.
pub fn deviation_scatter(report: &EvalReport) -> String {
    let khz = |f: f64| f / 1e3;
    let x = extent(report.rows.iter().map(|r| khz(r.frequency)));
    let y = extent(report.rows.iter().flat_map(|r| [100.0 * r.deviation_before, 100.0 * r.deviation_after]));
    let a = Axes::new(x, y);
    let mut s = String::new();
    frame(&mut s, &a, "Core loss deviation before and after correction", "frequency (kHz)", "deviation (%)");
    for (color, pick) in [("#bbbbbb", true), ("#cc3311", false)] {
        for r in &report.rows {
            let d = if pick { r.deviation_before } else { r.deviation_after };
            let _ = writeln!(
                s,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"2\" fill=\"{color}\"/>",
                a.px(khz(r.frequency)),
                a.py(100.0 * d)
            );
        }
    }
    legend(&mut s, &[("before correction", "#bbbbbb"), ("after correction", "#cc3311")]);
    s.push_str("</svg>\n");
    s
}

/// Two closed (H, B) polylines on shared axes.
pub fn loop_overlay(title: &str, skewed: &[(f64, f64)], corrected: &[(f64, f64)]) -> String {
    let all = || skewed.iter().chain(corrected);
    let a = Axes::new(extent(all().map(|p| p.0)), extent(all().map(|p| p.1)));
    let mut s = String::new();
    frame(&mut s, &a, title, "H (A/m)", "B (T)");
    for (pts, color) in [(skewed, "#bbbbbb"), (corrected, "#4477aa")] {
        s.push_str("<polygon fill=\"none\" stroke-width=\"1.5\" stroke=\"");
        s.push_str(color);
        s.push_str("\" points=\"");
        for (i, &(h, b)) in pts.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{:.2},{:.2}", a.px(h), a.py(b));
        }
        s.push_str("\"/>\n");
    }
    legend(&mut s, &[("skewed", "#bbbbbb"), ("corrected", "#4477aa")]);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use bhdeskew_core::pipeline::EvalRow;

    fn report() -> EvalReport {
        let row = |e: f64, f: f64| EvalRow {
            origin_id: "a:0".into(),
            frequency: f,
            true_skew: 1000,
            predicted_skew: 900,
            predicted_raw: 901.5,
            skew_rel_error: e,
            loss_true: 1.0,
            loss_skewed: 1.2,
            loss_corrected: 1.01,
            deviation_before: 0.2,
            deviation_after: 0.01,
        };
        EvalReport::from_rows(vec![row(0.1, 5e4), row(0.0, 1e5), row(0.35, 2e5)]).unwrap()
    }

    #[test]
    fn figures_are_deterministic_svg() {
        let r = report();
        for f in [error_histogram, deviation_scatter] {
            let a = f(&r);
            assert_eq!(a, f(&r));
            assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        }
        assert_eq!(deviation_scatter(&r).matches("<circle").count(), 6);
        let ov = loop_overlay("t", &[(0.0, 0.0), (1.0, 1.0), (0.0, 1.0)], &[(0.0, 0.0), (1.0, 0.5)]);
        assert_eq!(ov.matches("<polygon").count(), 2);
    }

    #[test]
    fn histogram_counts_every_sample() {
        let s = error_histogram(&report());
        assert_eq!(s.matches("fill=\"#4477aa\" stroke").count(), 20);
        assert!(s.contains("n = 3"));
    }
}
