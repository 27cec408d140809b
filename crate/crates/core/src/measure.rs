//! Exact box calculus for `μ[u] = ∂₁∂₂u` on grid cells.
//!
//! A cell mass is the four-point combination of the node values at its
//! corners. Grid-aligned boxes are unions of cells, so their masses follow
//! either from the four corner values directly or from a prefix table of cell
//! masses; the two agree exactly for integer-valued fields and up to rounding
//! otherwise.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::geometry::{rect_disk_overlap, rect_overlap};
use crate::grid::{restricted_domain, GridSpec, Point, Samples1d, ScalarField};
use crate::sum::NeumaierSum;

/// Grid-aligned box given by node indices, `lo < hi` on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct CellBox {
    pub lo: [usize; 2],
    pub hi: [usize; 2],
}

impl CellBox {
    pub fn new(lo: [usize; 2], hi: [usize; 2]) -> Result<Self> {
        if lo[0] >= hi[0] || lo[1] >= hi[1] {
            return Err(LabError::InvalidParameter(format!("empty box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    pub fn cells(&self) -> usize {
        (self.hi[0] - self.lo[0]) * (self.hi[1] - self.lo[1])
    }

    /// The four sub-boxes obtained by halving each side (when possible).
    pub fn quarters(&self) -> Vec<CellBox> {
        let split = |lo: usize, hi: usize| -> Vec<(usize, usize)> {
            if hi - lo >= 2 {
                let mid = lo + (hi - lo) / 2;
                vec![(lo, mid), (mid, hi)]
            } else {
                vec![(lo, hi)]
            }
        };
        let xs = split(self.lo[0], self.hi[0]);
        let ys = split(self.lo[1], self.hi[1]);
        let mut out = Vec::with_capacity(4);
        for &(y0, y1) in &ys {
            for &(x0, x1) in &xs {
                out.push(CellBox { lo: [x0, y0], hi: [x1, y1] });
            }
        }
        out
    }
}

/// Per-cell masses of `μ[u]` with signed and absolute prefix tables.
#[derive(Debug, Clone)]
pub struct CellMeasure {
    spec: GridSpec,
    nodes: Vec<f64>,
    cells: Vec<f64>,
    prefix: Vec<f64>,
    abs_prefix: Vec<f64>,
    sup_norm: f64,
}

/// Four-point combination `u(++) − u(+−) − u(−+) + u(−−)`.
#[inline]
pub fn four_point(upp: f64, upm: f64, ump: f64, umm: f64) -> f64 {
    (upp - upm) - (ump - umm)
}

fn prefix_table(cells: &[f64], cx: usize, cy: usize) -> Vec<f64> {
    // W(i, j) = Σ cells with index < (i, j); rows first, then columns, both
    // compensated.
    let nx = cx + 1;
    let row_prefix: Vec<Vec<f64>> = (0..cy)
        .into_par_iter()
        .map(|j| {
            let mut acc = NeumaierSum::new();
            let mut out = Vec::with_capacity(nx);
            out.push(0.0);
            for i in 0..cx {
                acc.add(cells[i + cx * j]);
                out.push(acc.value());
            }
            out
        })
        .collect();
    let mut w = vec![0.0; nx * (cy + 1)];
    let mut col: Vec<NeumaierSum> = (0..nx).map(|_| NeumaierSum::new()).collect();
    for j in 0..cy {
        for i in 0..nx {
            col[i].add(row_prefix[j][i]);
            w[i + nx * (j + 1)] = col[i].value();
        }
    }
    w
}

pub fn defect_measure(u: &ScalarField) -> CellMeasure {
    let spec = u.spec().clone();
    let (nx, ny) = (spec.nodes(0), spec.nodes(1));
    let (cx, cy) = (nx - 1, ny - 1);
    let vals = u.values();
    let mut cells = vec![0.0; cx * cy];
    cells.par_chunks_mut(cx).enumerate().for_each(|(j, row)| {
        for (i, c) in row.iter_mut().enumerate() {
            let k = i + nx * j;
            *c = four_point(vals[k + 1 + nx], vals[k + 1], vals[k + nx], vals[k]);
        }
    });
    let abs: Vec<f64> = cells.iter().map(|c| c.abs()).collect();
    let prefix = prefix_table(&cells, cx, cy);
    let abs_prefix = prefix_table(&abs, cx, cy);
    CellMeasure { spec, nodes: vals.to_vec(), cells, prefix, abs_prefix, sup_norm: u.sup_norm() }
}

impl CellMeasure {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cells_x(&self) -> usize {
        self.spec.nodes(0) - 1
    }

    pub fn cells_y(&self) -> usize {
        self.spec.nodes(1) - 1
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.cells[i + self.cells_x() * j]
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn full_box(&self) -> CellBox {
        CellBox { lo: [0, 0], hi: [self.cells_x(), self.cells_y()] }
    }

    /// Prefix value `W` at node `(i, j)`: signed mass of the cells below and
    /// left of the node.
    pub fn prefix(&self, i: usize, j: usize) -> f64 {
        self.prefix[i + self.spec.nodes(0) * j]
    }

    /// Signed mass of the whole grid box, `W` at the far corner.
    pub fn total(&self) -> f64 {
        self.prefix(self.cells_x(), self.cells_y())
    }

    /// `Σ |cell mass|`, the total variation at cell resolution.
    pub fn total_variation(&self) -> f64 {
        self.abs_prefix[self.abs_prefix.len() - 1]
    }

    fn node(&self, i: usize, j: usize) -> f64 {
        self.nodes[i + self.spec.nodes(0) * j]
    }

    fn check(&self, b: &CellBox) -> Result<()> {
        if b.hi[0] > self.cells_x() || b.hi[1] > self.cells_y() || b.lo[0] >= b.hi[0] || b.lo[1] >= b.hi[1] {
            return Err(LabError::InvalidParameter(format!("box {b:?} outside the grid")));
        }
        Ok(())
    }

    /// Four-point mass of a grid-aligned box.
    pub fn box_mass(&self, b: &CellBox) -> Result<f64> {
        self.check(b)?;
        Ok(four_point(
            self.node(b.hi[0], b.hi[1]),
            self.node(b.hi[0], b.lo[1]),
            self.node(b.lo[0], b.hi[1]),
            self.node(b.lo[0], b.lo[1]),
        ))
    }

    /// Prefix-difference mass of a grid-aligned box.
    pub fn prefix_mass(&self, b: &CellBox) -> Result<f64> {
        self.check(b)?;
        Ok(four_point(
            self.prefix(b.hi[0], b.hi[1]),
            self.prefix(b.hi[0], b.lo[1]),
            self.prefix(b.lo[0], b.hi[1]),
            self.prefix(b.lo[0], b.lo[1]),
        ))
    }

    /// `Σ |cell mass|` over the box.
    pub fn abs_mass(&self, b: &CellBox) -> Result<f64> {
        self.check(b)?;
        let nx = self.spec.nodes(0);
        let w = |i: usize, j: usize| self.abs_prefix[i + nx * j];
        let v = four_point(w(b.hi[0], b.hi[1]), w(b.hi[0], b.lo[1]), w(b.lo[0], b.hi[1]), w(b.lo[0], b.lo[1]));
        Ok(v.max(0.0))
    }

    /// Re-summation of the covered cells, the slow reference for
    /// [`CellMeasure::prefix_mass`].
    pub fn summed_mass(&self, b: &CellBox) -> Result<f64> {
        self.check(b)?;
        let mut acc = NeumaierSum::new();
        for j in b.lo[1]..b.hi[1] {
            for i in b.lo[0]..b.hi[0] {
                acc.add(self.cell(i, j));
            }
        }
        Ok(acc.value())
    }

    /// Snaps physical corners to nodes; rejects boxes that are not aligned.
    pub fn snap(&self, lo: Point, hi: Point) -> Result<CellBox> {
        let idx = |axis: usize, x: f64| {
            self.spec.snap(axis, x).ok_or_else(|| LabError::NotAligned(format!("coordinate {x} on axis {axis}")))
        };
        CellBox::new([idx(0, lo[0])?, idx(1, lo[1])?], [idx(0, hi[0])?, idx(1, hi[1])?])
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        [
            0.5 * (self.spec.coord(0, i) + self.spec.coord(0, i + 1)),
            0.5 * (self.spec.coord(1, j) + self.spec.coord(1, j + 1)),
        ]
    }

    fn cell_rect(&self, i: usize, j: usize) -> (Point, Point) {
        ([self.spec.coord(0, i), self.spec.coord(1, j)], [self.spec.coord(0, i + 1), self.spec.coord(1, j + 1)])
    }

    fn cell_range(&self, axis: usize, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let n = self.spec.nodes(axis) - 1;
        let a = self.spec.fractional_index(axis, lo).floor().max(0.0) as usize;
        let b = (self.spec.fractional_index(axis, hi).ceil().max(0.0) as usize).min(n);
        a.min(n)..b
    }

    /// `|μ|` of cells weighted by their area fraction inside `region`.
    fn weighted_mass(&self, bbox: (Point, Point), overlap: impl Fn(Point, Point) -> f64) -> f64 {
        let rows = self.cell_range(1, bbox.0[1], bbox.1[1]);
        let cols = self.cell_range(0, bbox.0[0], bbox.1[0]);
        let area = self.spec.cell_volume();
        let mut acc = NeumaierSum::new();
        for j in rows {
            for i in cols.clone() {
                let c = self.cell(i, j);
                if c == 0.0 {
                    continue;
                }
                let (lo, hi) = self.cell_rect(i, j);
                let f = overlap(lo, hi) / area;
                if f > 0.0 {
                    acc.add(c.abs() * f.min(1.0));
                }
            }
        }
        acc.value()
    }

    fn inside(&self, lo: Point, hi: Point) -> bool {
        let slack = 1e-12;
        lo[0] >= self.spec.origin(0) - slack
            && lo[1] >= self.spec.origin(1) - slack
            && hi[0] <= self.spec.upper(0) + slack
            && hi[1] <= self.spec.upper(1) + slack
    }
}

/// Source of `|μ|` masses of balls and centred squares.
pub trait MassOracle {
    /// `|μ|(B_r(c))`, `None` when the ball leaves the domain.
    fn ball_mass(&self, center: Point, radius: f64) -> Option<f64>;
    /// `|μ|(c + (−r,r)²)`, `None` when the square leaves the domain.
    fn square_mass(&self, center: Point, radius: f64) -> Option<f64>;
}

impl MassOracle for CellMeasure {
    fn ball_mass(&self, c: Point, r: f64) -> Option<f64> {
        let (lo, hi) = ([c[0] - r, c[1] - r], [c[0] + r, c[1] + r]);
        self.inside(lo, hi).then(|| self.weighted_mass((lo, hi), |a, b| rect_disk_overlap(a, b, c, r)))
    }

    fn square_mass(&self, c: Point, r: f64) -> Option<f64> {
        let (lo, hi) = ([c[0] - r, c[1] - r], [c[0] + r, c[1] + r]);
        self.inside(lo, hi).then(|| self.weighted_mass((lo, hi), |a, b| rect_overlap(a, b, lo, hi)))
    }
}

impl MassOracle for crate::counterexample::Counterexample {
    fn ball_mass(&self, c: Point, r: f64) -> Option<f64> {
        Some(crate::counterexample::Counterexample::ball_mass(self, c, r))
    }

    fn square_mass(&self, c: Point, r: f64) -> Option<f64> {
        Some(crate::counterexample::Counterexample::square_mass(self, c, r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioEntry {
    pub radius: f64,
    /// `|μ|(B_r)/r`; `None` when flagged.
    pub ball: Option<f64>,
    /// `|μ|(Q_r)/r`; `None` when flagged.
    pub square: Option<f64>,
}

impl RatioEntry {
    pub fn flagged(&self) -> bool {
        self.ball.is_none() || self.square.is_none()
    }
}

pub fn mass_ratio_profile<M: MassOracle + ?Sized>(m: &M, center: Point, radii: &[f64]) -> Result<Vec<RatioEntry>> {
    if radii.windows(2).any(|w| !(w[1] < w[0])) || radii.iter().any(|&r| !(r > 0.0)) {
        return Err(LabError::InvalidParameter("radii must be positive and strictly decreasing".into()));
    }
    Ok(radii
        .iter()
        .map(|&r| RatioEntry {
            radius: r,
            ball: m.ball_mass(center, r).map(|v| v / r),
            square: m.square_mass(center, r).map(|v| v / r),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub position: Point,
    pub mass: f64,
    pub cells_merged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomSet {
    pub atoms: Vec<Atom>,
    pub tol: f64,
    pub merge_radius: f64,
    /// Total variation not captured by retained atoms.
    pub residual: f64,
}

impl AtomSet {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.mass).collect()
    }
}

/// Default tolerance for integer-valued fields: half the smallest mass.
pub const INTEGER_TOL: f64 = 0.25;

/// Quadtree descent into boxes carrying `|μ| ≥ tol/4`, then greedy merging of
/// the surviving cells into atoms within two cell diagonals.
pub fn extract_atoms(m: &CellMeasure, tol: f64) -> Result<AtomSet> {
    if !(tol > 0.0) {
        return Err(LabError::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let descend = tol / 4.0;
    let mut leaves: Vec<(usize, usize, f64)> = Vec::new();
    let mut stack = vec![m.full_box()];
    while let Some(b) = stack.pop() {
        if m.abs_mass(&b)? < descend {
            continue;
        }
        if b.cells() == 1 {
            let c = m.cell(b.lo[0], b.lo[1]);
            if c != 0.0 {
                leaves.push((b.lo[0], b.lo[1], c));
            }
        } else {
            stack.extend(b.quarters());
        }
    }
    leaves.sort_by(|a, b| b.2.abs().total_cmp(&a.2.abs()).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));

    let (hx, hy) = (m.spec.spacing(0), m.spec.spacing(1));
    let radius = 2.0 * hx.hypot(hy);
    let (rx, ry) = ((radius / hx).floor() as usize, (radius / hy).floor() as usize);
    let index: std::collections::HashMap<(usize, usize), usize> =
        leaves.iter().enumerate().map(|(k, l)| ((l.0, l.1), k)).collect();
    let mut claimed = vec![false; leaves.len()];
    let mut clusters: Vec<(Atom, f64)> = Vec::new();
    for seed in 0..leaves.len() {
        if claimed[seed] {
            continue;
        }
        let (si, sj, _) = leaves[seed];
        let sc = m.cell_center(si, sj);
        let mut mass = NeumaierSum::new();
        let mut weight = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut count = 0;
        let mut abs = 0.0;
        for j in sj.saturating_sub(ry)..=(sj + ry).min(m.cells_y() - 1) {
            for i in si.saturating_sub(rx)..=(si + rx).min(m.cells_x() - 1) {
                let Some(&k) = index.get(&(i, j)) else { continue };
                if claimed[k] {
                    continue;
                }
                let c = m.cell_center(i, j);
                if (c[0] - sc[0]).hypot(c[1] - sc[1]) > radius {
                    continue;
                }
                claimed[k] = true;
                let v = leaves[k].2;
                mass.add(v);
                weight += v.abs();
                cx += v.abs() * c[0];
                cy += v.abs() * c[1];
                count += 1;
                abs += v.abs();
            }
        }
        let atom = Atom { position: [cx / weight, cy / weight], mass: mass.value(), cells_merged: count };
        clusters.push((atom, abs));
    }

    // Merge clusters that still sit within the merge radius of each other.
    loop {
        let mut merged = false;
        'outer: for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let (p, q) = (clusters[a].0.position, clusters[b].0.position);
                if (p[0] - q[0]).hypot(p[1] - q[1]) <= radius {
                    let (x, xa) = clusters[a];
                    let (y, ya) = clusters.remove(b);
                    let w = xa + ya;
                    clusters[a] = (
                        Atom {
                            position: [
                                (xa * x.position[0] + ya * y.position[0]) / w,
                                (xa * x.position[1] + ya * y.position[1]) / w,
                            ],
                            mass: x.mass + y.mass,
                            cells_merged: x.cells_merged + y.cells_merged,
                        },
                        w,
                    );
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut captured = NeumaierSum::new();
    let mut atoms = Vec::new();
    for (atom, abs) in clusters {
        if atom.mass.abs() >= tol {
            captured.add(abs);
            atoms.push(atom);
        }
    }
    atoms.sort_by(|a, b| {
        b.mass
            .abs()
            .total_cmp(&a.mass.abs())
            .then(a.position[1].total_cmp(&b.position[1]))
            .then(a.position[0].total_cmp(&b.position[0]))
    });
    let residual = (m.total_variation() - captured.value()).max(0.0);
    Ok(AtomSet { atoms, tol, merge_radius: radius, residual })
}

/// `Σ |m_j|^θ`.
pub fn theta_mass(a: &AtomSet, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(LabError::InvalidParameter(format!("theta = {theta} must lie in (0, 1]")));
    }
    let mut acc = NeumaierSum::new();
    for atom in &a.atoms {
        acc.add(atom.mass.abs().powf(theta));
    }
    Ok(acc.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Concentration {
    pub value: f64,
    /// Off-grid corners were interpolated rather than evaluated.
    pub interpolated: bool,
}

/// `∫_{Ω^ε} |μ(x + [0,r)²)|^θ / r² dx` over the nodes of `Ω^ε`. When `r` is
/// a whole number of cells on both axes the corners are nodes and the box
/// masses are exact.
pub fn concentration_integral(u: &ScalarField, r: f64, theta: f64, eps: f64) -> Result<Concentration> {
    if !(r > 0.0) || !(theta > 0.0 && theta <= 1.0) {
        return Err(LabError::InvalidParameter(format!("r = {r}, theta = {theta}")));
    }
    if std::f64::consts::SQRT_2 * r > eps * (1.0 + 1e-12) {
        return Err(LabError::InvalidParameter(format!(
            "sqrt(2) r = {} exceeds eps = {eps}",
            std::f64::consts::SQRT_2 * r
        )));
    }
    let spec = u.spec();
    let dom = restricted_domain(spec, eps);
    if dom.is_empty() {
        return Ok(Concentration { value: 0.0, interpolated: false });
    }
    let steps: Vec<Option<usize>> = (0..2)
        .map(|a| {
            let s = r / spec.spacing(a);
            let k = s.round();
            ((s - k).abs() <= 1e-9 * s.max(1.0) && k >= 1.0).then_some(k as usize)
        })
        .collect();
    let weight = spec.cell_volume() / (r * r);
    let (ri, rj) = (dom.ranges[0].clone(), dom.ranges[1].clone());
    let aligned = steps[0].zip(steps[1]);
    let rows: Vec<(f64, bool)> = rj
        .into_par_iter()
        .map(|j| {
            let mut acc = NeumaierSum::new();
            let mut interp = false;
            for i in ri.clone() {
                let m = match aligned {
                    Some((si, sj)) => {
                        four_point(u.value(i + si, j + sj), u.value(i + si, j), u.value(i, j + sj), u.value(i, j))
                    }
                    None => {
                        let x = spec.node(i, j);
                        let mut e = |p: Point| {
                            let v = u.eval_unchecked(p);
                            interp |= v.interpolated;
                            v.value
                        };
                        let (a, b, c, d) = (e([x[0] + r, x[1] + r]), e([x[0] + r, x[1]]), e([x[0], x[1] + r]), e(x));
                        four_point(a, b, c, d)
                    }
                };
                if m != 0.0 {
                    acc.add(m.abs().powf(theta));
                }
            }
            (acc.value(), interp)
        })
        .collect();
    let mut total = NeumaierSum::new();
    let mut interpolated = false;
    for (v, f) in rows {
        total.add(v);
        interpolated |= f;
    }
    Ok(Concentration { value: total.value() * weight, interpolated })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleStats {
    pub scale: f64,
    pub cells_per_side: usize,
    /// Boxes carrying `|μ| ≥ tol`.
    pub count: usize,
    /// `exp` of the entropy of the normalized box masses.
    pub entropy_count: f64,
    /// Nonzero box masses, largest first.
    pub box_masses: Vec<f64>,
}

impl ScaleStats {
    pub fn count_at(&self, threshold: f64) -> usize {
        self.box_masses.partition_point(|&m| m >= threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionProfile {
    pub tol: f64,
    pub scales: Vec<ScaleStats>,
    /// Least-squares slope of `log count` against `log(1/scale)`.
    pub slope: f64,
    pub entropy_slope: f64,
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Dyadic box counting anchored at the lower-left domain corner. `tol`
/// defaults to `1e−9 |μ|(Ω)`.
pub fn dimension_profile(m: &CellMeasure, scales: &[f64], tol: Option<f64>) -> Result<DimensionProfile> {
    if scales.len() < 2 {
        return Err(LabError::InvalidParameter("need at least two scales".into()));
    }
    if scales.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(LabError::InvalidParameter("scales must be strictly decreasing".into()));
    }
    let h = m.spec.spacing(0).max(m.spec.spacing(1));
    if scales.iter().any(|&s| s < h * (1.0 - 1e-9)) {
        return Err(LabError::InvalidParameter("scales must not be below the cell size".into()));
    }
    let tv = m.total_variation();
    let tol = tol.unwrap_or(1e-9 * tv);
    let mut stats = Vec::new();
    for &s in scales {
        let k = ((s / h).round() as usize).max(1);
        let (cx, cy) = (m.cells_x(), m.cells_y());
        let mut masses = Vec::new();
        let mut j = 0;
        while j < cy {
            let mut i = 0;
            while i < cx {
                let b = CellBox { lo: [i, j], hi: [(i + k).min(cx), (j + k).min(cy)] };
                let v = m.abs_mass(&b)?;
                if v > 0.0 {
                    masses.push(v);
                }
                i += k;
            }
            j += k;
        }
        masses.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = masses.iter().sum();
        let entropy: f64 = if total > 0.0 {
            masses.iter().map(|&v| v / total).filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
        } else {
            0.0
        };
        let count = masses.partition_point(|&v| v >= tol);
        stats.push(ScaleStats { scale: s, cells_per_side: k, count, entropy_count: entropy.exp(), box_masses: masses });
    }
    let xs: Vec<f64> = stats.iter().map(|s| (1.0 / (s.cells_per_side as f64 * h)).ln()).collect();
    let ys: Vec<f64> = stats.iter().map(|s| (s.count.max(1) as f64).ln()).collect();
    let es: Vec<f64> = stats.iter().map(|s| s.entropy_count.max(1.0).ln()).collect();
    Ok(DimensionProfile { tol, slope: ls_slope(&xs, &ys), entropy_slope: ls_slope(&xs, &es), scales: stats })
}

#[derive(Debug, Clone)]
pub struct WDecomposition {
    pub u1: Samples1d,
    pub u2: Samples1d,
    pub w: ScalarField,
}

/// `u = u₁(x₁) + u₂(x₂) + w(x)` with `u₁(x₁) = u(x₁, x̄₂) − u(x̄)`,
/// `u₂(x₂) = u(x̄₁, x₂)` and `w` the signed mass of the box between `x̄`
/// and `x`.
pub fn tensor_w_decomposition(u: &ScalarField, base: [usize; 2]) -> Result<WDecomposition> {
    let spec = u.spec();
    let (nx, ny) = (spec.nodes(0), spec.nodes(1));
    if base[0] >= nx || base[1] >= ny {
        return Err(LabError::InvalidParameter(format!("basepoint {base:?} is not a node")));
    }
    let ub = u.value(base[0], base[1]);
    let v1: Vec<f64> = (0..nx).map(|i| u.value(i, base[1]) - ub).collect();
    let v2: Vec<f64> = (0..ny).map(|j| u.value(base[0], j)).collect();
    let w: Vec<f64> = (0..nx * ny)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            four_point(u.value(i, j), u.value(i, base[1]), u.value(base[0], j), ub)
        })
        .collect();
    Ok(WDecomposition {
        u1: Samples1d::from_values(spec.origin(0), spec.spacing(0), v1),
        u2: Samples1d::from_values(spec.origin(1), spec.spacing(1), v2),
        w: ScalarField::from_values(spec.clone(), w)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaVariation {
    pub theta: f64,
    /// `Σ |jump|^θ`.
    pub jump_part: f64,
    /// `Σ |Δ|` over differences below the jump threshold.
    pub diffuse_residual: f64,
    /// `(position, height)` of detected jumps.
    pub jumps: Vec<(f64, f64)>,
}

/// Jump detection with threshold `8 · (local Lipschitz estimate) · h`, the
/// estimate being the median of `|Δ|/h` over the 4 neighbouring differences
/// on each side.
pub fn theta_variation_1d(f: &Samples1d, theta: f64) -> Result<ThetaVariation> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(LabError::InvalidParameter(format!("theta = {theta} must lie in (0, 1]")));
    }
    let d: Vec<f64> = f.values.windows(2).map(|w| w[1] - w[0]).collect();
    let scale = f.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut jump = NeumaierSum::new();
    let mut diffuse = NeumaierSum::new();
    let mut jumps = Vec::new();
    for k in 0..d.len() {
        let mut window: Vec<f64> =
            (k.saturating_sub(4)..(k + 5).min(d.len())).filter(|&m| m != k).map(|m| d[m].abs()).collect();
        window.sort_by(f64::total_cmp);
        let median = if window.is_empty() {
            0.0
        } else if window.len() % 2 == 1 {
            window[window.len() / 2]
        } else {
            0.5 * (window[window.len() / 2 - 1] + window[window.len() / 2])
        };
        let threshold = (8.0 * median).max(floor);
        if d[k].abs() > threshold {
            jump.add(d[k].abs().powf(theta));
            jumps.push((f.coord(k) + 0.5 * f.step, d[k]));
        } else {
            diffuse.add(d[k].abs());
        }
    }
    Ok(ThetaVariation { theta, jump_part: jump.value(), diffuse_residual: diffuse.value(), jumps })
}
