//! Minimal SVG plots: line profiles and residual heat maps. Deterministic
//! output, no styling beyond axes, labels and a linear color scale.

use crate::oracle::ResidualGrid;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn fmt(x: f64) -> String {
    format!("{x:.4}")
}

fn fmt_tick(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    let a = x.abs();
    if (1e-3..1e4).contains(&a) {
        format!("{x:.4}")
    } else {
        format!("{x:.3e}")
    }
}

/// Polyline plot of one or more labeled series over a shared x axis.
pub fn line_plot(title: &str, x_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (_, pts) in series {
        for (x, y) in pts {
            if x.is_finite() && y.is_finite() {
                xs.push(*x);
                ys.push(*y);
            }
        }
    }
    let (x_min, x_max) = bounds(&xs);
    let (y_min, y_max) = bounds(&ys);
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        let px = MARGIN + (x - x_min) / (x_max - x_min).max(1e-300) * (WIDTH - 2.0 * MARGIN);
        let py = HEIGHT - MARGIN
            - (y - y_min) / (y_max - y_min).max(1e-300) * (HEIGHT - 2.0 * MARGIN);
        (px, py)
    };
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut out = header(title);
    axes(&mut out, x_label, x_min, x_max, y_min, y_max);
    for (i, (label, pts)) in series.iter().enumerate() {
        let color = palette[i % palette.len()];
        let path: Vec<String> = pts
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| {
                let (px, py) = to_px(*x, *y);
                format!("{},{}", fmt(px), fmt(py))
            })
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN - 150.0,
            MARGIN + 16.0 * (i as f64 + 1.0),
            xml_escape(label)
        ));
    }
    out.push_str("</svg>\n");
    out
}

/// Heat map of a residual grid (z vertical, axis horizontal), linear
/// color scale with the minimum and maximum annotated.
pub fn heat_map(title: &str, grid: &ResidualGrid) -> String {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in &grid.values {
        for v in row {
            if v.is_finite() {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    let span = (hi - lo).max(1e-300);
    let nz = grid.z.len().max(1);
    let na = grid.axis.len().max(1);
    let cell_w = (WIDTH - 2.0 * MARGIN) / na as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / nz as f64;
    let mut out = header(title);
    for (zi, row) in grid.values.iter().enumerate() {
        for (ai, v) in row.iter().enumerate() {
            let x = MARGIN + ai as f64 * cell_w;
            let y = MARGIN + zi as f64 * cell_h;
            let fill = if v.is_finite() {
                let t = (v - lo) / span;
                let c = (255.0 * (1.0 - t)) as u8;
                format!("rgb(255,{c},{c})")
            } else {
                "rgb(200,200,220)".to_string()
            };
            out.push_str(&format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{fill}\"/>\n",
                fmt(x),
                fmt(y),
                fmt(cell_w + 0.5),
                fmt(cell_h + 0.5),
            ));
        }
    }
    out.push_str(&format!(
        "<text x=\"{}\" y=\"18\" font-size=\"12\">{} from {} to {}; z from {} to {}; min {} max {}</text>\n",
        MARGIN,
        xml_escape(&grid.axis_name),
        fmt_tick(*grid.axis.first().unwrap_or(&0.0)),
        fmt_tick(*grid.axis.last().unwrap_or(&0.0)),
        fmt_tick(*grid.z.first().unwrap_or(&0.0)),
        fmt_tick(*grid.z.last().unwrap_or(&0.0)),
        fmt_tick(lo),
        fmt_tick(hi),
    ));
    out.push_str("</svg>\n");
    out
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !lo.is_finite() || lo == hi {
        return (lo.min(0.0), lo.max(1.0));
    }
    (lo, hi)
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<text x=\"{}\" y=\"36\" font-size=\"14\">{}</text>\n",
        MARGIN,
        xml_escape(title)
    )
}

fn axes(out: &mut String, x_label: &str, x_min: f64, x_max: f64, y_min: f64, y_max: f64) {
    out.push_str(&format!(
        "<rect x=\"{m}\" y=\"{m}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"black\"/>\n",
        m = MARGIN,
        w = WIDTH - 2.0 * MARGIN,
        h = HEIGHT - 2.0 * MARGIN
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
        MARGIN,
        HEIGHT - MARGIN + 18.0,
        fmt_tick(x_min)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 18.0,
        fmt_tick(x_max)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
        4.0,
        HEIGHT - MARGIN,
        fmt_tick(y_min)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\">{}</text>\n",
        4.0,
        MARGIN + 4.0,
        fmt_tick(y_max)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 10.0,
        xml_escape(x_label)
    ));
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
