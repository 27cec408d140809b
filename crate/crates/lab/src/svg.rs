//! Standalone SVG drawings of atoms, level sets, corner tracks and the
//! counterexample tiling.

use std::fmt::Write as _;

use defectlab::counterexample::Counterexample;
use defectlab::levelset::{superlevel, CornerTrack};
use defectlab::measure::AtomSet;
use defectlab::{Point, ScalarField};

const SIZE: f64 = 600.0;
const MARGIN: f64 = 20.0;

struct Canvas {
    lo: Point,
    scale: f64,
    height: f64,
    body: String,
}

impl Canvas {
    fn new(lo: Point, hi: Point) -> Self {
        let scale = (SIZE - 2.0 * MARGIN) / (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let height = 2.0 * MARGIN + scale * (hi[1] - lo[1]);
        let mut c = Self { lo, scale, height, body: String::new() };
        let (a, b) = (c.map(lo), c.map(hi));
        let _ = writeln!(
            c.body,
            r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="#999"/>"##,
            a[0],
            b[1],
            b[0] - a[0],
            a[1] - b[1]
        );
        c
    }

    fn map(&self, p: Point) -> Point {
        [MARGIN + self.scale * (p[0] - self.lo[0]), self.height - MARGIN - self.scale * (p[1] - self.lo[1])]
    }

    fn polyline(&mut self, pts: &[Point], stroke: &str, closed: bool) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&p| {
                let q = self.map(p);
                format!("{:.3},{:.3}", q[0], q[1])
            })
            .collect();
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(self.body, r#"<{tag} points="{}" fill="none" stroke="{stroke}"/>"#, coords.join(" "));
    }

    fn circle(&mut self, p: Point, r: f64, fill: &str, stroke: &str) {
        let q = self.map(p);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{r}" fill="{fill}" stroke="{stroke}"/>"#,
            q[0], q[1]
        );
    }

    fn text(&mut self, p: Point, s: &str) {
        let q = self.map(p);
        let _ = writeln!(self.body, r#"<text x="{:.3}" y="{:.3}" font-size="11">{s}</text>"#, q[0] + 6.0, q[1] - 6.0);
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{:.3}\">\n{}</svg>\n",
            self.height, self.body
        )
    }
}

fn field_box(u: &ScalarField) -> (Point, Point) {
    let s = u.spec();
    ([s.origin(0), s.origin(1)], [s.upper(0), s.upper(1)])
}

/// Boundary of `{u > t}` as dual-grid segments between inside and outside
/// nodes.
fn level_boundary(c: &mut Canvas, u: &ScalarField, t: f64) {
    let s = superlevel(u, t);
    let spec = u.spec();
    let (nx, ny) = (spec.nodes(0), spec.nodes(1));
    let (hx, hy) = (spec.spacing(0), spec.spacing(1));
    let inside = |i: usize, j: usize| s.inside[i + nx * j];
    for j in 0..ny {
        for i in 0..nx {
            let p = spec.node(i, j);
            if i + 1 < nx && inside(i, j) != inside(i + 1, j) {
                let x = p[0] + 0.5 * hx;
                c.polyline(&[[x, p[1] - 0.5 * hy], [x, p[1] + 0.5 * hy]], "#444", false);
            }
            if j + 1 < ny && inside(i, j) != inside(i, j + 1) {
                let y = p[1] + 0.5 * hy;
                c.polyline(&[[p[0] - 0.5 * hx, y], [p[0] + 0.5 * hx, y]], "#444", false);
            }
        }
    }
}

/// Atoms as signed markers over the boundary of `{u > 1/2}`; positive atoms
/// are filled, negative ones hollow, and masses of modulus 2 get a second
/// ring.
pub fn atoms(u: &ScalarField, atoms: &AtomSet) -> String {
    let (lo, hi) = field_box(u);
    let mut c = Canvas::new(lo, hi);
    level_boundary(&mut c, u, 0.5);
    for a in &atoms.atoms {
        let (fill, stroke) = if a.mass > 0.0 { ("#c33", "#c33") } else { ("none", "#36c") };
        c.circle(a.position, 5.0, fill, stroke);
        if a.mass.abs() >= 1.5 {
            c.circle(a.position, 9.0, "none", stroke);
        }
        c.text(a.position, &format!("{:+}", a.mass));
    }
    c.finish()
}

/// The level set at the window centre and the tracked corner trajectory,
/// annotated with the fitted velocity.
pub fn track(u: &ScalarField, track: &CornerTrack) -> String {
    let (lo, hi) = field_box(u);
    let mut c = Canvas::new(lo, hi);
    level_boundary(&mut c, u, track.t_center);
    let pts: Vec<Point> = track.samples.iter().map(|s| s.position).collect();
    c.polyline(&pts, "#c33", false);
    if let Some(p) = pts.last() {
        let h = track.h_prime();
        c.text(*p, &format!("h' = ({:.3}, {:.3})", h[0], h[1]));
    }
    c.finish()
}

/// Outer rectangles and central squares of the tiles `0..=depth`.
pub fn tiling(ce: &Counterexample, depth: usize) -> String {
    let mut c = Canvas::new([-1.0, -1.0], [1.0, 1.0]);
    for k in 0..=depth.min(ce.spec.depth()) {
        if !ce.spec.resolvable(k) {
            break;
        }
        let (rect, inner) = ce.outline(k);
        c.polyline(&rect, "#333", true);
        c.polyline(&inner, "#c33", true);
    }
    c.finish()
}
