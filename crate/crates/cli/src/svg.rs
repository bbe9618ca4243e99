//! Deterministic SVG scatter plots: a point cloud in priors-space with
//! optional box outlines and the diagonal reference line. Byte output is a
//! pure function of the input, so rerendering a run reproduces the file
//! exactly.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 720.0;
const MARGIN_L: f64 = 72.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 24.0;
const MARGIN_B: f64 = 58.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Overlay {
    /// Axis-aligned rectangle outline, drawn in red.
    BoxOutline { lo: [f64; 2], hi: [f64; 2] },
    /// The line x2 = x1, clipped to the plot bounds.
    Diagonal,
}

struct Frame {
    xlo: f64,
    xhi: f64,
    ylo: f64,
    yhi: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.xlo) / (self.xhi - self.xlo) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        MARGIN_T + (self.yhi - y) / (self.yhi - self.ylo) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn bounds(points: &[[f64; 2]], overlays: &[Overlay]) -> Frame {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    for ov in overlays {
        if let Overlay::BoxOutline { lo: blo, hi: bhi } = ov {
            for k in 0..2 {
                lo[k] = lo[k].min(blo[k]);
                hi[k] = hi[k].max(bhi[k]);
            }
        }
    }
    if !lo[0].is_finite() {
        lo = [0.0, 0.0];
        hi = [1.0, 1.0];
    }
    let pad = |l: f64, h: f64| {
        let span = h - l;
        if span <= 0.0 {
            (l - 0.5, h + 0.5)
        } else {
            (l - 0.05 * span, h + 0.05 * span)
        }
    };
    let (xlo, xhi) = pad(lo[0], hi[0]);
    let (ylo, yhi) = pad(lo[1], hi[1]);
    Frame { xlo, xhi, ylo, yhi }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        return format!("{v:.2e}");
    }
    let mut s = format!("{v:.3}");
    while s.contains('.') && (s.ends_with('0') || s.ends_with('.')) {
        s.pop();
        if s.ends_with('.') {
            s.pop();
            break;
        }
    }
    s
}

fn fmt_px(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders the scatter plot as an SVG document string.
pub fn render_scatter(
    points: &[[f64; 2]],
    overlays: &[Overlay],
    x_label: &str,
    y_label: &str,
) -> String {
    let f = bounds(points, overlays);
    let mut s = String::with_capacity(4096 + 64 * points.len());
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>"
    );

    let (px0, px1) = (f.px(f.xlo), f.px(f.xhi));
    let (py0, py1) = (f.py(f.ylo), f.py(f.yhi));

    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = f.xlo + t * (f.xhi - f.xlo);
        let yv = f.ylo + t * (f.yhi - f.ylo);
        let gx = f.px(xv);
        let gy = f.py(yv);
        let _ = writeln!(
            s,
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#dddddd\"/>",
            fmt_px(py1),
            fmt_px(py0),
            x = fmt_px(gx),
        );
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#dddddd\"/>",
            fmt_px(px0),
            fmt_px(px1),
            y = fmt_px(gy),
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" font-family=\"sans-serif\" \
             text-anchor=\"middle\" fill=\"#333333\">{}</text>",
            fmt_px(gx),
            fmt_px(py0 + 20.0),
            tick_label(xv),
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"13\" font-family=\"sans-serif\" \
             text-anchor=\"end\" fill=\"#333333\">{}</text>",
            fmt_px(px0 - 8.0),
            fmt_px(gy + 4.0),
            tick_label(yv),
        );
    }

    for ov in overlays {
        match ov {
            Overlay::Diagonal => {
                let s0 = f.xlo.max(f.ylo);
                let s1 = f.xhi.min(f.yhi);
                if s0 < s1 {
                    let _ = writeln!(
                        s,
                        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#888888\" \
                         stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>",
                        fmt_px(f.px(s0)),
                        fmt_px(f.py(s0)),
                        fmt_px(f.px(s1)),
                        fmt_px(f.py(s1)),
                    );
                }
            }
            Overlay::BoxOutline { lo, hi } => {
                let _ = writeln!(
                    s,
                    "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" \
                     stroke=\"#d62728\" stroke-width=\"2\"/>",
                    fmt_px(f.px(lo[0])),
                    fmt_px(f.py(hi[1])),
                    fmt_px(f.px(hi[0]) - f.px(lo[0])),
                    fmt_px(f.py(lo[1]) - f.py(hi[1])),
                );
            }
        }
    }

    for p in points {
        let _ = writeln!(
            s,
            "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"#1f77b4\" fill-opacity=\"0.55\"/>",
            fmt_px(f.px(p[0])),
            fmt_px(f.py(p[1])),
        );
    }

    let _ = writeln!(
        s,
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#333333\"/>",
        fmt_px(px0.min(px1)),
        fmt_px(py1.min(py0)),
        fmt_px((px1 - px0).abs()),
        fmt_px((py0 - py1).abs()),
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-size=\"15\" font-family=\"sans-serif\" \
         text-anchor=\"middle\" fill=\"#111111\">{x_label}</text>",
        fmt_px(0.5 * (px0 + px1)),
        fmt_px(HEIGHT - 14.0),
    );
    let _ = writeln!(
        s,
        "<text x=\"{x}\" y=\"{y}\" font-size=\"15\" font-family=\"sans-serif\" \
         text-anchor=\"middle\" fill=\"#111111\" transform=\"rotate(-90 {x} {y})\">{y_label}</text>",
        x = fmt_px(20.0),
        y = fmt_px(0.5 * (py0 + py1)),
    );
    s.push_str("</svg>\n");
    s
}
