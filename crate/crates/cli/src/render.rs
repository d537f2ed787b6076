//! SVG drawing of density triangles and, optionally, who holds what.

use std::fmt::Write;

use cakecut::{Allocation, CakeInstance, SinglePeakedValuation};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 40.0;

const COLORS: [&str; 8] = [
    "#7f7f7f", "#ffffff", "#1a1a1a", "#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1",
];

fn color(agent: usize) -> &'static str {
    COLORS[agent % COLORS.len()]
}

struct Frame {
    top: f64,
}

impl Frame {
    fn x(&self, x: f64) -> f64 {
        MARGIN + x * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, d: f64) -> f64 {
        HEIGHT - MARGIN - d / self.top * (HEIGHT - 2.0 * MARGIN)
    }
}

/// Points of the density graph over `[a, b]`, closed along the axis.
fn outline(v: &SinglePeakedValuation, a: f64, b: f64, frame: &Frame) -> String {
    let mut xs = vec![a, b];
    xs.extend([v.left(), v.peak(), v.right()].into_iter().filter(|&x| x > a && x < b));
    xs.sort_by(f64::total_cmp);
    let mut pts = vec![(a, 0.0)];
    pts.extend(xs.iter().map(|&x| (x, v.density_at(x).unwrap_or(0.0))));
    pts.push((b, 0.0));
    pts.iter()
        .map(|&(x, d)| format!("{:.2},{:.2}", frame.x(x), frame.y(d)))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_svg(instance: &CakeInstance, allocation: Option<&Allocation>) -> String {
    let top = instance
        .agents()
        .iter()
        .map(|v| v.peak_density())
        .fold(0.0, f64::max)
        * 1.05;
    let frame = Frame { top };
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#fdfdf8"/>"##);

    if let Some(alloc) = allocation {
        for (agent, piece) in alloc.pieces().iter().enumerate() {
            let v = instance.agent(agent);
            for iv in piece {
                let _ = writeln!(
                    svg,
                    r#"<polygon class="piece agent-{}" points="{}" fill="{}" stroke="none"/>"#,
                    agent + 1,
                    outline(v, iv.start, iv.end, &frame),
                    color(agent)
                );
            }
        }
    }
    for (agent, v) in instance.agents().iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<polygon class="density agent-{}" points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            agent + 1,
            outline(v, 0.0, 1.0, &frame),
            if color(agent) == "#ffffff" { "#000000" } else { color(agent) }
        );
    }

    let base = frame.y(0.0);
    let _ = writeln!(
        svg,
        r##"<line x1="{:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="#000000"/>"##,
        frame.x(0.0),
        frame.x(1.0)
    );
    for t in 0..=4 {
        let x = frame.x(t as f64 / 4.0);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{base:.2}" x2="{x:.2}" y2="{:.2}" stroke="#000000"/>"##,
            base + 5.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
            base + 20.0,
            ["0", "0.25", "0.5", "0.75", "1"][t]
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use cakecut::experiments::figure3_instance;
    use cakecut::mechanisms::run_ww;

    #[test]
    fn triangles_and_pieces() {
        let inst = figure3_instance();
        let bare = render_svg(&inst, None);
        assert_eq!(bare.matches("class=\"density").count(), 3);
        assert_eq!(bare.matches("class=\"piece").count(), 0);
        let ww = run_ww(&inst).unwrap();
        let drawn = render_svg(&inst, Some(&ww.allocation));
        let intervals: usize = ww.allocation.pieces().iter().map(Vec::len).sum();
        assert_eq!(drawn.matches("class=\"piece").count(), intervals);
        assert_eq!(drawn, render_svg(&inst, Some(&ww.allocation)));
    }
}
