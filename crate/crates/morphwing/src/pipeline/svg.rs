//! Minimal dependency-free SVG line charts for the report outputs.

use std::fmt::Write as _;

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 48.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn data_range(series: &[Series], axis: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            let v = if axis == 0 { x } else { y };
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.1;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if a >= 1000.0 || a < 0.01 {
        format!("{v:.2e}")
    } else if a >= 10.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.3}")
    }
}

/// Render connected series on shared axes; layout is fixed and the output
/// depends only on the inputs.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (x0, x1) = data_range(series, 0);
    let (y0, y1) = data_range(series, 1);
    let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        out,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{title}</text>",
        (MARGIN_L + WIDTH - MARGIN_R) / 2.0
    );

    // Axes and ticks.
    let (axl, axr) = (MARGIN_L, WIDTH - MARGIN_R);
    let (ayt, ayb) = (MARGIN_T, HEIGHT - MARGIN_B);
    let _ = writeln!(
        out,
        "<path d=\"M {axl:.1} {ayt:.1} L {axl:.1} {ayb:.1} L {axr:.1} {ayb:.1}\" \
         fill=\"none\" stroke=\"black\"/>"
    );
    const TICKS: usize = 5;
    for t in 0..=TICKS {
        let f = t as f64 / TICKS as f64;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (gx, gy) = (px(xv), py(yv));
        let _ = writeln!(
            out,
            "<line x1=\"{gx:.1}\" y1=\"{ayb:.1}\" x2=\"{gx:.1}\" y2=\"{:.1}\" stroke=\"black\"/>",
            ayb + 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{gx:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            ayb + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{gy:.1}\" x2=\"{axl:.1}\" y2=\"{gy:.1}\" stroke=\"black\"/>",
            axl - 5.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            axl - 8.0,
            gy + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{x_label}</text>",
        (axl + axr) / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" \
         transform=\"rotate(-90 16 {:.1})\">{y_label}</text>",
        (ayt + ayb) / 2.0,
        (ayt + ayb) / 2.0
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (k, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if k == 0 { "M " } else { "L " }, px(x), py(y));
        }
        let _ = writeln!(
            out,
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
            d.trim_end()
        );
        let ly = MARGIN_T + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" \
             stroke=\"{color}\" stroke-width=\"1.5\"/>",
            axr + 8.0,
            axr + 28.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            axr + 34.0,
            ly + 4.0,
            s.name
        );
    }
    out.push_str("</svg>\n");
    out
}
