//! Static SVG heatmap of a reduced surface.

use std::fmt::Write;

use plumetrace::estimate::Heatmap;

/// Eight-stop viridis ramp, evenly spaced on `[0, 1]`.
pub const RAMP: [&str; 8] = [
    "#440154", "#46327e", "#365c8d", "#277f8e", "#1fa187", "#4ac16d", "#a0da39", "#fde725",
];

const PLOT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const BAR_WIDTH: f64 = 16.0;
const BAR_GAP: f64 = 24.0;

fn hex(c: &str) -> [f64; 3] {
    let v = |i: usize| u8::from_str_radix(&c[i..i + 2], 16).unwrap() as f64;
    [v(1), v(3), v(5)]
}

/// Linear interpolation between neighbouring stops; `t` is clamped to `[0, 1]`.
pub fn color(t: f64) -> String {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let pos = t * (RAMP.len() - 1) as f64;
    let k = (pos.floor() as usize).min(RAMP.len() - 2);
    let w = pos - k as f64;
    let (a, b) = (hex(RAMP[k]), hex(RAMP[k + 1]));
    let c: Vec<u8> = (0..3)
        .map(|j| (a[j] + w * (b[j] - a[j])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn axis(values: impl Iterator<Item = f64>) -> (Vec<f64>, f64) {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let step = v
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let step = if step.is_finite() { step } else { 1.0 };
    (v, step)
}

fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

/// Renders cells as rectangles, marks the argmax cell and draws a color
/// scale bar labelled with the value range.
pub fn render(heat: &Heatmap, title: &str) -> String {
    let (xs, dx) = axis(heat.cells.iter().map(|c| c.x));
    let (ys, dy) = axis(heat.cells.iter().map(|c| c.y));
    let (x0, x1) = (xs[0] - dx / 2.0, xs[xs.len() - 1] + dx / 2.0);
    let (y0, y1) = (ys[0] - dy / 2.0, ys[ys.len() - 1] + dy / 2.0);
    let sx = PLOT / (x1 - x0);
    let sy = PLOT / (y1 - y0);
    let px = |x: f64| MARGIN + (x - x0) * sx;
    let py = |y: f64| MARGIN + (y1 - y) * sy;

    let lo = heat
        .cells
        .iter()
        .map(|c| c.value)
        .fold(f64::INFINITY, f64::min);
    let hi = heat
        .cells
        .iter()
        .map(|c| c.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let norm = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };

    let width = 2.0 * MARGIN + PLOT + BAR_GAP + BAR_WIDTH + 60.0;
    let height = 2.0 * MARGIN + PLOT;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="11">"#,
        num(width),
        num(height),
        num(width),
        num(height)
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="14">{}</text>"#,
        num(MARGIN),
        num(MARGIN / 2.0),
        escape(title)
    );
    let _ = writeln!(s, "<g shape-rendering=\"crispEdges\">");
    for c in &heat.cells {
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"><title>x={} y={} alpha={} value={:.6e}</title></rect>"#,
            num(px(c.x - dx / 2.0)),
            num(py(c.y + dy / 2.0)),
            num(dx * sx),
            num(dy * sy),
            color(norm(c.value)),
            num(c.x),
            num(c.y),
            num(c.alpha),
            c.value
        );
    }
    let _ = writeln!(s, "</g>");

    let best = heat.cells[heat.argmax];
    let r = (dx * sx).min(dy * sy) * 0.35;
    let _ = writeln!(
        s,
        r#"<circle cx="{}" cy="{}" r="{}" fill="none" stroke="red" stroke-width="2"/>"#,
        num(px(best.x)),
        num(py(best.y)),
        num(r.max(3.0))
    );

    let _ = writeln!(
        s,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#333"/>"##,
        num(MARGIN),
        num(MARGIN),
        num(PLOT),
        num(PLOT)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">x</text>"#,
        num(MARGIN + PLOT / 2.0),
        num(height - 12.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle">y</text>"#,
        num(MARGIN + PLOT / 2.0)
    );
    for (label, x, anchor) in [(x0, MARGIN, "start"), (x1, MARGIN + PLOT, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="{anchor}">{}</text>"#,
            num(x),
            num(MARGIN + PLOT + 14.0),
            num(label)
        );
    }
    for (label, y) in [(y1, MARGIN + 4.0), (y0, MARGIN + PLOT)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            num(MARGIN - 4.0),
            num(y),
            num(label)
        );
    }

    let bx = MARGIN + PLOT + BAR_GAP;
    let _ = writeln!(
        s,
        "<defs><linearGradient id=\"ramp\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">"
    );
    for (k, c) in RAMP.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<stop offset="{}" stop-color="{c}"/>"#,
            num(k as f64 / (RAMP.len() - 1) as f64)
        );
    }
    let _ = writeln!(s, "</linearGradient></defs>");
    let _ = writeln!(
        s,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="url(#ramp)" stroke="#333"/>"##,
        num(bx),
        num(MARGIN),
        num(BAR_WIDTH),
        num(PLOT)
    );
    for (v, y) in [(hi, MARGIN + 4.0), (lo, MARGIN + PLOT)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{:.3e}</text>"#,
            num(bx + BAR_WIDTH + 4.0),
            num(y),
            v
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use plumetrace::estimate::HeatCell;

    fn heat() -> Heatmap {
        let mut cells = Vec::new();
        for (k, (x, y)) in [(0.0, 0.0), (0.5, 0.0), (0.0, -1.0), (0.5, -1.0)]
            .iter()
            .enumerate()
        {
            cells.push(HeatCell {
                x: *x,
                y: *y,
                value: k as f64,
                alpha: 20.0,
            });
        }
        Heatmap { cells, argmax: 3 }
    }

    #[test]
    fn ramp_endpoints_and_midpoints() {
        assert_eq!(color(0.0), "#440154");
        assert_eq!(color(1.0), "#fde725");
        assert_eq!(color(2.0 / 7.0), "#365c8d");
        assert_eq!(color(-1.0), "#440154");
        assert_eq!(color(f64::NAN), "#440154");
    }

    #[test]
    fn render_has_one_rect_per_cell_and_a_marker() {
        let svg = render(&heat(), "T<M>");
        assert_eq!(svg.matches("<rect x=").count(), 4 + 2);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(svg.contains("T&lt;M&gt;"));
        assert!(svg.contains("fill=\"#fde725\""));
        assert!(svg.contains("fill=\"#440154\""));
        assert_eq!(svg, render(&heat(), "T<M>"));
    }

    #[test]
    fn single_cell_renders() {
        let h = Heatmap {
            cells: vec![HeatCell {
                x: 1.0,
                y: 2.0,
                value: 3.0,
                alpha: 10.0,
            }],
            argmax: 0,
        };
        let svg = render(&h, "one");
        assert!(svg.contains("<circle"));
        assert!(!svg.contains("NaN"));
    }
}
