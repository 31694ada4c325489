//! Static SVG of a series with its detections and their explanation trees.
//!
//! Output depends only on the inputs: coordinates are printed with fixed
//! precision and elements are emitted in input order.

use std::fmt::Write;

use elt_core::detector::Detection;
use elt_core::engine::Instance;
use elt_core::SeriesFrame;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];
const SHADES: [&str; 4] = ["#f2b134", "#4daf4a", "#377eb8", "#e41a1c"];
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const BAND: f64 = 120.0;
const BAND_GAP: f64 = 20.0;
const LEVEL: f64 = 56.0;
const NODE_W: f64 = 150.0;
const NODE_H: f64 = 34.0;

#[derive(Debug, Clone, Copy)]
pub struct RenderOptions {
    pub width: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { width: 1000.0 }
    }
}

pub fn render_svg(frame: &SeriesFrame, detections: &[Detection], opts: &RenderOptions) -> String {
    let width = opts.width.max(MARGIN_LEFT + MARGIN_RIGHT + 100.0);
    let plot_w = width - MARGIN_LEFT - MARGIN_RIGHT;
    let n = frame.len();
    let x_of = |t: f64| MARGIN_LEFT + t / (n.max(2) - 1) as f64 * plot_w;
    let plot_h = frame.n_channels() as f64 * (BAND + BAND_GAP) - BAND_GAP;
    let plot_bottom = MARGIN_TOP + plot_h;

    let mut body = String::new();
    let mut y = plot_bottom + 40.0;
    let mut trees = String::new();
    for (k, d) in detections.iter().enumerate() {
        if let Some(tree) = &d.explanation {
            let (g, h) = tree_group(k, d, &tree.root, y, plot_w);
            trees.push_str(&g);
            y += h + 30.0;
        }
    }
    let height = y.max(plot_bottom + 30.0);

    // detection shading sits beneath the signal traces
    body.push_str("<g class=\"detections\">\n");
    for (k, d) in detections.iter().enumerate() {
        let x0 = x_of(d.interval.t_on() as f64);
        let x1 = x_of(d.interval.t_off().min(n.max(1)) as f64 - 1.0).max(x0 + 1.0);
        let color = SHADES[k % SHADES.len()];
        let _ = writeln!(
            body,
            "<rect class=\"detection\" x=\"{x0:.2}\" y=\"{MARGIN_TOP:.2}\" width=\"{:.2}\" height=\"{plot_h:.2}\" fill=\"{color}\" fill-opacity=\"0.25\"/>",
            x1 - x0
        );
        let _ = writeln!(
            body,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\">{} {:.3}</text>",
            x0 + 3.0,
            MARGIN_TOP - 6.0,
            escape(&d.event_type),
            d.confidence
        );
    }
    body.push_str("</g>\n");

    for c in 0..frame.n_channels() {
        let col = frame.column(c);
        let top = MARGIN_TOP + c as f64 * (BAND + BAND_GAP);
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let span = if hi > lo { hi - lo } else { 1.0 };
        let _ = writeln!(
            body,
            "<rect class=\"band\" x=\"{MARGIN_LEFT:.2}\" y=\"{top:.2}\" width=\"{plot_w:.2}\" height=\"{BAND:.2}\" fill=\"none\" stroke=\"#cccccc\"/>"
        );
        let _ = writeln!(
            body,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
            MARGIN_LEFT - 8.0,
            top + BAND / 2.0,
            escape(&frame.channels()[c])
        );
        let mut pts = String::new();
        for (t, &v) in col.iter().enumerate() {
            let py = top + BAND - (v - lo) / span * BAND;
            if t > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.2},{:.2}", x_of(t as f64), py);
        }
        let _ = writeln!(
            body,
            "<polyline class=\"channel\" fill=\"none\" stroke=\"{}\" stroke-width=\"1\" points=\"{pts}\"/>",
            PALETTE[c % PALETTE.len()]
        );
    }

    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\" font-family=\"sans-serif\">"
    );
    let _ = writeln!(
        out,
        "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>"
    );
    out.push_str(&body);
    out.push_str(&trees);
    out.push_str("</svg>\n");
    out
}

struct Placed<'a> {
    inst: &'a Instance,
    x: f64,
    depth: usize,
    parent: Option<usize>,
}

/// Leaves are spread evenly; a composite sits above the middle of its
/// children.
fn layout<'a>(
    inst: &'a Instance,
    depth: usize,
    parent: Option<usize>,
    next_leaf: &mut usize,
    out: &mut Vec<Placed<'a>>,
) -> f64 {
    let idx = out.len();
    out.push(Placed {
        inst,
        x: 0.0,
        depth,
        parent,
    });
    let x = match inst {
        Instance::Primitive(_) => {
            *next_leaf += 1;
            (*next_leaf - 1) as f64
        }
        Instance::Composite(c) => {
            let xs: Vec<f64> = c
                .children
                .iter()
                .map(|ch| layout(ch, depth + 1, Some(idx), next_leaf, out))
                .collect();
            (xs[0] + xs[xs.len() - 1]) / 2.0
        }
    };
    out[idx].x = x;
    x
}

fn tree_group(k: usize, d: &Detection, root: &Instance, top: f64, plot_w: f64) -> (String, f64) {
    let mut nodes = Vec::new();
    let mut leaves = 0;
    layout(root, 0, None, &mut leaves, &mut nodes);
    let depth = nodes.iter().map(|p| p.depth).max().unwrap_or(0);
    let slot = (plot_w / leaves.max(1) as f64).max(NODE_W + 10.0);
    let cx = |p: &Placed| MARGIN_LEFT + (p.x + 0.5) * slot;
    let cy = |p: &Placed| top + 20.0 + p.depth as f64 * LEVEL;

    let mut g = String::new();
    let _ = writeln!(
        g,
        "<g class=\"tree\" data-detection=\"{k}\">\n<text x=\"{MARGIN_LEFT:.2}\" y=\"{:.2}\" font-size=\"12\" font-weight=\"bold\">{} [{}, {}) {:.3}</text>",
        top,
        escape(&d.event_type),
        d.interval.t_on(),
        d.interval.t_off(),
        d.confidence
    );
    for p in &nodes {
        if let Some(parent) = p.parent {
            let q = &nodes[parent];
            let _ = writeln!(
                g,
                "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#888888\"/>",
                cx(q),
                cy(q) + NODE_H,
                cx(p),
                cy(p)
            );
        }
    }
    for p in &nodes {
        let (title, fill) = match p.inst {
            Instance::Primitive(pi) => (
                format!("{}: {}", pi.node.channel, pi.node.predicate.name),
                "#eef5ff",
            ),
            Instance::Composite(c) => (c.op.keyword().to_string(), "#fff4e0"),
        };
        let iv = p.inst.interval();
        let _ = writeln!(
            g,
            "<rect class=\"node\" x=\"{:.2}\" y=\"{:.2}\" width=\"{NODE_W:.2}\" height=\"{NODE_H:.2}\" rx=\"4\" fill=\"{fill}\" stroke=\"#555555\"/>",
            cx(p) - NODE_W / 2.0,
            cy(p)
        );
        let _ = writeln!(
            g,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            cx(p),
            cy(p) + 14.0,
            escape(&title)
        );
        let _ = writeln!(
            g,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"middle\">\u{3bc}={:.3} [{}, {})</text>",
            cx(p),
            cy(p) + 28.0,
            p.inst.mu(),
            iv.t_on(),
            iv.t_off()
        );
    }
    g.push_str("</g>\n");
    (g, 20.0 + depth as f64 * LEVEL + NODE_H)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}
