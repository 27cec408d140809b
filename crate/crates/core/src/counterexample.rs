//! Nested tiles of a curl-free field with values in `{0, ±εe₁, ±e₂}` whose
//! defect measure decays faster than `r` at the origin while the component
//! averages keep oscillating between scales.
//!
//! A tile with parameter `ε ≤ 1` lives in the rectangle
//! `(−1/ε, 1/ε) × (−H, H)`, `H = 3/2 − ε/2`. Four straight interfaces of slope
//! `ε` join the corners `(±1/2, ±1/2)` of the central square to the corners
//! `(±1/ε, ±H)`. The field is `∓e₂` above/below the interfaces, `∓εe₁` in the
//! right/left wedges and `0` in the central square and outside. Tile `k` is
//! scaled by `r_k` and turned by `k` quarter turns.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::{rect_disk_overlap, segment_box_length, segment_disk_length};
use crate::grid::{GridSpec, Point, ScalarField, VectorField};
use crate::sum::NeumaierSum;

/// Radii below this are treated as unresolvable in double precision.
pub const RESOLUTION_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleSpec {
    alpha: Option<f64>,
    depth: usize,
    log2_r: Vec<f64>,
    r: Vec<f64>,
    eps: Vec<f64>,
}

impl CounterexampleSpec {
    /// `r₀ = 2^{−1/α}`, `r_{k+1} = r_k^{α+1}`, tiles `0..=depth`. The radii
    /// are generated in log space, so tiles far below the double-precision
    /// range are known to exist but reported unresolvable.
    pub fn new(alpha: f64, depth: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(LabError::InvalidParameter(format!("alpha = {alpha} must be positive")));
        }
        if depth == 0 {
            return Err(LabError::InvalidParameter("depth must be at least 1".into()));
        }
        let mut log2_r = vec![-1.0 / alpha];
        for k in 0..depth {
            log2_r.push(log2_r[k] * (alpha + 1.0));
        }
        let mut spec = Self::from_log2_radii(log2_r)?;
        spec.alpha = Some(alpha);
        Ok(spec)
    }

    /// Arbitrary radii `1 > r₀ > r₁ > …`, with `ε₀ = 1` and
    /// `ε_k = 2r_k/r_{k−1}` required to satisfy `1 ≥ ε₁ > ε₂ > …`.
    pub fn from_radii(radii: &[f64]) -> Result<Self> {
        if radii.iter().any(|&r| !(r > 0.0)) {
            return Err(LabError::InvalidParameter("radii must be positive".into()));
        }
        Self::from_log2_radii(radii.iter().map(|r| r.log2()).collect())
    }

    fn from_log2_radii(log2_r: Vec<f64>) -> Result<Self> {
        if log2_r.len() < 2 {
            return Err(LabError::InvalidParameter("need at least two tiles".into()));
        }
        if !(log2_r[0] < 0.0) {
            return Err(LabError::InvalidParameter("r_0 must be below 1".into()));
        }
        let mut log2_eps = vec![0.0];
        for k in 1..log2_r.len() {
            if !(log2_r[k] < log2_r[k - 1]) {
                return Err(LabError::InvalidParameter(format!("radii not strictly decreasing at k = {k}")));
            }
            log2_eps.push(1.0 + log2_r[k] - log2_r[k - 1]);
        }
        if log2_eps[1] > 0.0 {
            return Err(LabError::InvalidParameter(format!("eps_1 = {} exceeds 1", log2_eps[1].exp2())));
        }
        if let Some(k) = (2..log2_eps.len()).find(|&k| !(log2_eps[k] < log2_eps[k - 1])) {
            return Err(LabError::InvalidParameter(format!("eps_k not strictly decreasing at k = {k}")));
        }
        let r = log2_r.iter().map(|l| l.exp2()).collect();
        let eps = log2_eps.iter().map(|l| l.exp2()).collect();
        Ok(Self { alpha: None, depth: log2_r.len() - 1, log2_r, r, eps })
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn r(&self, k: usize) -> f64 {
        self.r[k]
    }

    pub fn log2_r(&self, k: usize) -> f64 {
        self.log2_r[k]
    }

    pub fn eps(&self, k: usize) -> f64 {
        self.eps[k]
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    /// `β = 2 − 1/(α+1)` for the power family.
    pub fn beta(&self) -> Option<f64> {
        self.alpha.map(|a| 2.0 - 1.0 / (a + 1.0))
    }

    pub fn resolvable(&self, k: usize) -> bool {
        self.r[k] >= RESOLUTION_FLOOR && self.eps[k] >= RESOLUTION_FLOOR
    }

    pub fn deepest_resolvable(&self) -> usize {
        (0..=self.depth).rev().find(|&k| self.resolvable(k)).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TileRegion {
    Inner,
    Top,
    Bottom,
    Right,
    Left,
    Outside,
}

impl TileRegion {
    pub fn is_support(self) -> bool {
        !matches!(self, TileRegion::Inner | TileRegion::Outside)
    }
}

/// One unscaled tile with parameter `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tile {
    pub eps: f64,
}

impl Tile {
    pub const HALF_INNER: f64 = 0.5;

    pub fn half_length(&self) -> f64 {
        1.0 / self.eps
    }

    pub fn half_height(&self) -> f64 {
        1.5 - 0.5 * self.eps
    }

    /// Points on a slanted interface belong to the wedge.
    pub fn region(&self, y: Point) -> TileRegion {
        let a = Self::HALF_INNER;
        let (ax, ay) = (y[0].abs(), y[1].abs());
        if !(ax < self.half_length() && ay < self.half_height()) {
            return TileRegion::Outside;
        }
        if ax <= a && ay <= a {
            return TileRegion::Inner;
        }
        let band = a + self.eps * (ax - a).max(0.0);
        if y[1] > band {
            TileRegion::Top
        } else if y[1] < -band {
            TileRegion::Bottom
        } else if y[0] > 0.0 {
            TileRegion::Right
        } else {
            TileRegion::Left
        }
    }

    pub fn vector(&self, region: TileRegion) -> [f64; 2] {
        match region {
            TileRegion::Top => [0.0, -1.0],
            TileRegion::Bottom => [0.0, 1.0],
            TileRegion::Right => [-self.eps, 0.0],
            TileRegion::Left => [self.eps, 0.0],
            TileRegion::Inner | TileRegion::Outside => [0.0, 0.0],
        }
    }

    /// Continuous potential with gradient [`Tile::vector`], zero on the
    /// central square.
    pub fn potential(&self, y: Point, region: TileRegion) -> f64 {
        let a = Self::HALF_INNER;
        match region {
            TileRegion::Inner => 0.0,
            TileRegion::Top => a - y[1],
            TileRegion::Bottom => y[1] + a,
            TileRegion::Right => -self.eps * (y[0] - a),
            TileRegion::Left => self.eps * (y[0] + a),
            TileRegion::Outside => -1.0 + 0.5 * self.eps,
        }
    }

    /// The four slanted interfaces, the only support of the defect measure.
    pub fn interfaces(&self) -> [(Point, Point); 4] {
        let (a, l, h) = (Self::HALF_INNER, self.half_length(), self.half_height());
        [([a, a], [l, h]), ([a, -a], [l, -h]), ([-a, a], [-l, h]), ([-a, -a], [-l, -h])]
    }

    /// `|μ|` per unit length on the interfaces.
    pub fn line_density(&self) -> f64 {
        self.eps / (1.0 + self.eps * self.eps).sqrt()
    }

    /// Exact `|μ|(ℝ²) = 4 − 2ε`.
    pub fn total_variation(&self) -> f64 {
        4.0 - 2.0 * self.eps
    }
}

/// `R^k x` with `R` the counter-clockwise quarter turn.
pub fn rotate(x: Point, k: usize) -> Point {
    match k % 4 {
        0 => x,
        1 => [-x[1], x[0]],
        2 => [-x[0], -x[1]],
        _ => [x[1], -x[0]],
    }
}

/// `R^{−k} v`.
pub fn rotate_back(v: Point, k: usize) -> Point {
    rotate(v, (4 - k % 4) % 4)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleValue {
    pub v: [f64; 2],
    pub u: f64,
    /// Tile whose open support contains the point.
    pub tile: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub spec: CounterexampleSpec,
}

impl Counterexample {
    pub fn new(spec: CounterexampleSpec) -> Self {
        Self { spec }
    }

    pub fn tile(&self, k: usize) -> Tile {
        Tile { eps: self.spec.eps(k) }
    }

    fn tiles(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.spec.depth()).filter(|&k| self.spec.resolvable(k))
    }

    pub fn local(&self, k: usize, x: Point) -> Point {
        let y = rotate(x, k);
        let r = self.spec.r(k);
        [y[0] / r, y[1] / r]
    }

    pub fn eval(&self, x: Point) -> Result<CounterexampleValue> {
        let mut v = [0.0, 0.0];
        let mut u = NeumaierSum::new();
        let mut owner: Option<usize> = None;
        for k in self.tiles() {
            let tile = self.tile(k);
            let y = self.local(k, x);
            let region = tile.region(y);
            u.add(self.spec.r(k) * tile.potential(y, region));
            if region.is_support() {
                if let Some(first) = owner {
                    return Err(LabError::TileOverlap { point: x, first, second: k });
                }
                owner = Some(k);
                v = rotate_back(tile.vector(region), k);
            }
        }
        Ok(CounterexampleValue { v, u: u.value(), tile: owner })
    }

    /// Upper bound on `|Σ_{j>K} r_j U_j|` for the omitted deeper tiles, using
    /// `Σ_{j>k} r_j < ε_{k+1} r_k` and `|U| ≤ 1`.
    pub fn truncation_bound(&self) -> f64 {
        let k = self.spec.deepest_resolvable();
        let r = self.spec.r(k);
        match &self.spec.alpha {
            Some(alpha) => 2.0 * r.powf(*alpha + 1.0),
            None => r,
        }
    }

    pub fn sample_vector(&self, grid: &GridSpec) -> Result<VectorField> {
        let me = self.clone();
        VectorField::sample(move |p| me.eval(p).map(|e| e.v).unwrap_or([f64::NAN, f64::NAN]), grid)
    }

    pub fn sample_potential(&self, grid: &GridSpec) -> Result<ScalarField> {
        let me = self.clone();
        Ok(crate::grid::sample(move |p| me.eval(p).map(|e| e.u).unwrap_or(f64::NAN), grid)?.with_lipschitz(1.0))
    }

    /// Slanted interfaces of tile `k` in global coordinates, with their
    /// density.
    pub fn interfaces(&self, k: usize) -> ([(Point, Point); 4], f64) {
        let tile = self.tile(k);
        let r = self.spec.r(k);
        let map = |p: Point| rotate_back([p[0] * r, p[1] * r], k);
        let segs = tile.interfaces().map(|(a, b)| (map(a), map(b)));
        (segs, tile.line_density())
    }

    /// Outer rectangle and central square of tile `k` in global coordinates.
    pub fn outline(&self, k: usize) -> ([Point; 4], [Point; 4]) {
        let tile = self.tile(k);
        let r = self.spec.r(k);
        let (l, h, a) = (tile.half_length() * r, tile.half_height() * r, Tile::HALF_INNER * r);
        let rect = [[-l, -h], [l, -h], [l, h], [-l, h]].map(|p| rotate_back(p, k));
        let inner = [[-a, -a], [a, -a], [a, a], [-a, a]].map(|p| rotate_back(p, k));
        (rect, inner)
    }

    /// `|μ|(B_r(c))` of tile `k` alone.
    pub fn tile_ball_mass(&self, k: usize, center: Point, radius: f64) -> f64 {
        let tile = self.tile(k);
        let rk = self.spec.r(k);
        let c = self.local(k, center);
        let len: f64 = tile.interfaces().iter().map(|&(a, b)| segment_disk_length(a, b, c, radius / rk)).sum();
        rk * (tile.line_density() * len)
    }

    /// Exact `|μ[v]|(B_r(c))` summed over resolvable tiles.
    pub fn ball_mass(&self, center: Point, radius: f64) -> f64 {
        let mut acc = NeumaierSum::new();
        for k in self.tiles() {
            acc.add(self.tile_ball_mass(k, center, radius));
        }
        acc.value()
    }

    /// Exact `|μ[v]|(c + (−r,r)²)`.
    pub fn square_mass(&self, center: Point, radius: f64) -> f64 {
        let mut acc = NeumaierSum::new();
        for k in self.tiles() {
            let tile = self.tile(k);
            let rk = self.spec.r(k);
            let c = self.local(k, center);
            let s = radius / rk;
            let (lo, hi) = ([c[0] - s, c[1] - s], [c[0] + s, c[1] + s]);
            let len: f64 = tile.interfaces().iter().map(|&(a, b)| segment_box_length(a, b, lo, hi)).sum();
            acc.add(rk * (tile.line_density() * len));
        }
        acc.value()
    }

    /// Ball averages `(1/|B_r|) ∫_{B_r(c)} |v_l|` for `l = 1, 2`, by an
    /// `n × n` midpoint rule whose cells are weighted by their exact overlap
    /// with the disk.
    pub fn ball_fractions(&self, center: Point, radius: f64, n: usize) -> Result<[f64; 2]> {
        let h = 2.0 / n as f64;
        let rows: Vec<Result<[f64; 2]>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut s1 = NeumaierSum::new();
                let mut s2 = NeumaierSum::new();
                let y0 = -1.0 + j as f64 * h;
                for i in 0..n {
                    let x0 = -1.0 + i as f64 * h;
                    let w = rect_disk_overlap([x0, y0], [x0 + h, y0 + h], [0.0, 0.0], 1.0);
                    if w == 0.0 {
                        continue;
                    }
                    let p = [center[0] + radius * (x0 + 0.5 * h), center[1] + radius * (y0 + 0.5 * h)];
                    let v = self.eval(p)?.v;
                    s1.add(w * v[0].abs());
                    s2.add(w * v[1].abs());
                }
                Ok([s1.value(), s2.value()])
            })
            .collect();
        let mut t1 = NeumaierSum::new();
        let mut t2 = NeumaierSum::new();
        for row in rows {
            let [a, b] = row?;
            t1.add(a);
            t2.add(b);
        }
        let area = std::f64::consts::PI;
        Ok([t1.value() / area, t2.value() / area])
    }
}

/// `q = 2/3 − √3/(2π)`, the share of the unit disk where `|x₂| > 1/2`.
pub fn limit_fraction() -> f64 {
    2.0 / 3.0 - 3f64.sqrt() / (2.0 * std::f64::consts::PI)
}
