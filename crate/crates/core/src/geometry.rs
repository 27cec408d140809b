//! Small exact planar geometry kernels: disk–rectangle overlap areas and
//! segment clipping against disks and boxes.

use crate::grid::Point;

/// `∫₀ᵃ √(R²−s²) ds` for `a ∈ [−R, R]`.
fn chord_primitive(a: f64, radius: f64) -> f64 {
    let r2 = radius * radius;
    let a = a.clamp(-radius, radius);
    let ratio = (a / radius).clamp(-1.0, 1.0);
    0.5 * (a * (r2 - a * a).max(0.0).sqrt() + r2 * ratio.asin())
}

fn chord_integral(lo: f64, hi: f64, radius: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    chord_primitive(hi, radius) - chord_primitive(lo, radius)
}

/// Area of `{X ≤ x, Y ≤ y} ∩ B_R(0)`.
fn quadrant_disk_area(x: f64, y: f64, radius: f64) -> f64 {
    if x <= -radius || y <= -radius {
        return 0.0;
    }
    let xc = x.min(radius);
    if y >= radius {
        return 2.0 * chord_integral(-radius, xc, radius);
    }
    let w = (radius * radius - y * y).max(0.0).sqrt();
    let mut area = 0.0;
    let mid_hi = xc.min(w);
    if mid_hi > -w {
        area += y * (mid_hi + w) + chord_integral(-w, mid_hi, radius);
    }
    if y >= 0.0 {
        area += 2.0 * chord_integral(-radius, xc.min(-w), radius);
        if xc > w {
            area += 2.0 * chord_integral(w, xc, radius);
        }
    }
    area
}

/// Exact area of `[lo₀,hi₀]×[lo₁,hi₁] ∩ B_r(center)`.
pub fn rect_disk_overlap(lo: Point, hi: Point, center: Point, radius: f64) -> f64 {
    if radius <= 0.0 || hi[0] <= lo[0] || hi[1] <= lo[1] {
        return 0.0;
    }
    let (x0, x1) = (lo[0] - center[0], hi[0] - center[0]);
    let (y0, y1) = (lo[1] - center[1], hi[1] - center[1]);
    if x0 >= radius || y0 >= radius || x1 <= -radius || y1 <= -radius {
        return 0.0;
    }
    let a =
        quadrant_disk_area(x1, y1, radius) - quadrant_disk_area(x0, y1, radius) - quadrant_disk_area(x1, y0, radius)
            + quadrant_disk_area(x0, y0, radius);
    a.clamp(0.0, (x1 - x0) * (y1 - y0))
}

/// Area of the intersection of two axis-aligned rectangles.
pub fn rect_overlap(lo: Point, hi: Point, lo2: Point, hi2: Point) -> f64 {
    let w = (hi[0].min(hi2[0]) - lo[0].max(lo2[0])).max(0.0);
    let h = (hi[1].min(hi2[1]) - lo[1].max(lo2[1])).max(0.0);
    w * h
}

/// Length of the part of segment `[a,b]` inside the closed disk `B_r(c)`.
/// Written in arclength with factored differences so that segments of length
/// up to ~1e300 do not overflow.
pub fn segment_disk_length(a: Point, b: Point, center: Point, radius: f64) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = d[0].hypot(d[1]);
    if len == 0.0 || !(radius > 0.0) {
        return 0.0;
    }
    let u = [d[0] / len, d[1] / len];
    let p = [a[0] - center[0], a[1] - center[1]];
    let along = p[0] * u[0] + p[1] * u[1];
    let perp = (p[0] * u[1] - p[1] * u[0]).abs();
    if perp >= radius {
        return 0.0;
    }
    let half = (radius - perp).sqrt() * (radius + perp).sqrt();
    let s0 = (-along - half).max(0.0);
    let s1 = (-along + half).min(len);
    (s1 - s0).max(0.0)
}

/// Length of the part of segment `[a,b]` inside the box `[lo, hi]`
/// (Liang–Barsky clipping).
pub fn segment_box_length(a: Point, b: Point, lo: Point, hi: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for axis in 0..2 {
        for (p, q) in [(-d[axis], a[axis] - lo[axis]), (d[axis], hi[axis] - a[axis])] {
            if p == 0.0 {
                if q < 0.0 {
                    return 0.0;
                }
            } else {
                let t = q / p;
                if p < 0.0 {
                    t0 = t0.max(t);
                } else {
                    t1 = t1.min(t);
                }
            }
        }
    }
    (t1 - t0).max(0.0) * d[0].hypot(d[1])
}

/// Shoelace area of a closed polygon (vertices in order, no repetition).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|k| {
            let (p, q) = (poly[k], poly[(k + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    0.5 * twice
}
