//! Analytic example fields with known defect measures.
//!
//! Every constructor returns a [`GalleryField`]: the sampled field together
//! with machine-checkable ground truth for its defect measure.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{sample_arc, Evaluator, Evaluator1d, GridSpec, Point, Samples1d, ScalarField, VectorField};

/// A signed point mass of the ground-truth measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointMass {
    pub position: Point,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GroundTruth {
    /// `μ ≡ 0`.
    Zero,
    /// Finitely many atoms inside the grid box.
    Atoms(Vec<PointMass>),
    /// `density · H¹` restricted to the segment `[from, to]`.
    Line { from: Point, to: Point, density: f64 },
    /// Lipschitz field whose generic level `t` has one corner at
    /// `(|t|, t)` with `κ_t = +1`.
    CornerPath,
}

impl GroundTruth {
    /// Total variation of the ground-truth measure inside the grid box, when
    /// it is available in closed form.
    pub fn total_variation(&self) -> Option<f64> {
        match self {
            GroundTruth::Zero => Some(0.0),
            GroundTruth::Atoms(a) => Some(a.iter().map(|p| p.mass.abs()).sum()),
            GroundTruth::Line { from, to, density } => Some(density * (to[0] - from[0]).hypot(to[1] - from[1])),
            GroundTruth::CornerPath => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GalleryField {
    pub family: &'static str,
    pub field: ScalarField,
    pub truth: GroundTruth,
    /// Node values all lie in `{0, 1}`.
    pub indicator: bool,
}

impl GalleryField {
    fn new(family: &'static str, field: ScalarField, truth: GroundTruth) -> Self {
        let indicator = field.values().iter().all(|&v| v == 0.0 || v == 1.0);
        Self { family, field, truth, indicator }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StripeAxis {
    /// `{x₁ ∈ (a, b)}`, a vertical band.
    X1,
    /// `{x₂ ∈ (a, b)}`, a horizontal band.
    X2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stripe {
    pub axis: StripeAxis,
    pub lo: f64,
    pub hi: f64,
}

/// Union of axis-parallel polygons and parallel stripes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisPolygonSpec {
    pub polygons: Vec<Vec<Point>>,
    pub stripes: Vec<Stripe>,
}

impl AxisPolygonSpec {
    pub fn validate(&self) -> Result<()> {
        for (k, poly) in self.polygons.iter().enumerate() {
            let n = poly.len();
            if n < 4 || n % 2 != 0 {
                return Err(LabError::InvalidPolygon(format!("polygon {k} has {n} vertices")));
            }
            let mut last_horizontal = None;
            for e in 0..n {
                let (p, q) = (poly[e], poly[(e + 1) % n]);
                let horizontal = match (p[1] == q[1], p[0] == q[0]) {
                    (true, false) => true,
                    (false, true) => false,
                    _ => {
                        return Err(LabError::InvalidPolygon(format!(
                            "polygon {k}, edge {e}: {p:?} -> {q:?} is not axis-parallel"
                        )))
                    }
                };
                if last_horizontal == Some(horizontal) {
                    return Err(LabError::InvalidPolygon(format!(
                        "polygon {k}, edge {e}: directions do not alternate"
                    )));
                }
                last_horizontal = Some(horizontal);
            }
        }
        if let Some(first) = self.stripes.first() {
            if self.stripes.iter().any(|s| s.axis != first.axis) {
                return Err(LabError::InvalidPolygon("stripes must share one axis".into()));
            }
            if let Some(s) = self.stripes.iter().find(|s| !(s.lo < s.hi)) {
                return Err(LabError::InvalidPolygon(format!("empty stripe ({}, {})", s.lo, s.hi)));
            }
        }
        Ok(())
    }

    /// Indicator of the open union.
    pub fn contains(&self, p: Point) -> bool {
        self.polygons.iter().any(|poly| inside_axis_polygon(poly, p))
            || self.stripes.iter().any(|s| {
                let x = match s.axis {
                    StripeAxis::X1 => p[0],
                    StripeAxis::X2 => p[1],
                };
                x > s.lo && x < s.hi
            })
    }

    /// Polygon vertices strictly inside the open box with their four-point
    /// multiplicities; vertices shared by touching polygons are merged.
    pub fn corners(&self, lo: Point, hi: Point) -> Vec<PointMass> {
        let mut vertices: Vec<Point> = self.polygons.iter().flatten().copied().collect();
        vertices.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vertices.dedup();
        let scale = self.polygons.iter().flatten().map(|p| p[0].abs().max(p[1].abs())).fold(1.0, f64::max);
        let d = 1e-9 * scale;
        let ind = |p: Point| if self.contains(p) { 1.0 } else { 0.0 };
        vertices
            .into_iter()
            .filter(|v| v[0] > lo[0] && v[0] < hi[0] && v[1] > lo[1] && v[1] < hi[1])
            .filter_map(|v| {
                let m = ind([v[0] + d, v[1] + d]) - ind([v[0] + d, v[1] - d]) - ind([v[0] - d, v[1] + d])
                    + ind([v[0] - d, v[1] - d]);
                (m != 0.0).then_some(PointMass { position: v, mass: m })
            })
            .collect()
    }
}

/// Even–odd test for an axis-parallel polygon; boundary points are outside.
fn inside_axis_polygon(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    for e in 0..n {
        let (a, b) = (poly[e], poly[(e + 1) % n]);
        if a[0] == b[0] {
            let (ylo, yhi) = if a[1] < b[1] { (a[1], b[1]) } else { (b[1], a[1]) };
            if p[0] == a[0] && p[1] >= ylo && p[1] <= yhi {
                return false;
            }
            if a[0] > p[0] && p[1] >= ylo && p[1] < yhi {
                inside = !inside;
            }
        } else {
            let (xlo, xhi) = if a[0] < b[0] { (a[0], b[0]) } else { (b[0], a[0]) };
            if p[1] == a[1] && p[0] >= xlo && p[0] <= xhi {
                return false;
            }
        }
    }
    inside
}

/// The domain of the two-polygon configuration with a doubled corner.
pub const FIGURE1_LO: Point = [0.2, 0.3];
pub const FIGURE1_HI: Point = [6.0, 5.0];

/// Two L-shaped hexagons touching at `(3,3)`; the second one reaches the
/// right and top faces of the domain.
pub fn figure1_spec() -> AxisPolygonSpec {
    AxisPolygonSpec {
        polygons: vec![
            vec![[1.0, 1.0], [5.0, 1.0], [5.0, 2.0], [3.0, 2.0], [3.0, 3.0], [1.0, 3.0]],
            vec![[3.0, 5.0], [3.0, 3.0], [6.0, 3.0], [6.0, 4.0], [4.0, 4.0], [4.0, 5.0]],
        ],
        stripes: vec![],
    }
}

/// The same configuration plus thinning horizontal stripes below the first
/// polygon; the stripes cross the whole domain and carry no corners.
pub fn figure1_striped_spec() -> AxisPolygonSpec {
    let mut spec = figure1_spec();
    spec.stripes = [(0.35, 0.55), (0.65, 0.75), (0.8, 0.85), (0.875, 0.9), (0.9125, 0.925)]
        .into_iter()
        .map(|(lo, hi)| Stripe { axis: StripeAxis::X2, lo, hi })
        .collect();
    spec
}

pub fn polygon_indicator(spec: &AxisPolygonSpec, grid: &GridSpec) -> Result<GalleryField> {
    spec.validate()?;
    let lo = [grid.origin(0), grid.origin(1)];
    let hi = [grid.upper(0), grid.upper(1)];
    let corners = spec.corners(lo, hi);
    let shape = spec.clone();
    let eval: Evaluator = Arc::new(move |p| if shape.contains(p) { 1.0 } else { 0.0 });
    let field = sample_arc(eval, grid)?;
    let truth = if corners.is_empty() { GroundTruth::Zero } else { GroundTruth::Atoms(corners) };
    Ok(GalleryField::new("polygon", field, truth))
}

/// Two-polygon `figure1` indicator on an `n × n`-node grid, offset off the round
/// coordinates.
pub fn figure1(nodes: usize, striped: bool) -> Result<GalleryField> {
    let grid = GridSpec::rect(FIGURE1_LO, FIGURE1_HI, [nodes, nodes])?.offset_for_discontinuities();
    let spec = if striped { figure1_striped_spec() } else { figure1_spec() };
    let mut g = polygon_indicator(&spec, &grid)?;
    g.family = if striped { "figure1-striped" } else { "figure1" };
    Ok(g)
}

/// `u(x) = u₁(x₁) + u₂(x₂)`.
pub fn tensor_sum(u1: &Samples1d, u2: &Samples1d, grid: &GridSpec) -> Result<GalleryField> {
    for (axis, s) in [(0, u1), (1, u2)] {
        if s.len() != grid.nodes(axis) {
            return Err(LabError::LengthMismatch { expected: grid.nodes(axis), got: s.len() });
        }
    }
    let nx = grid.nodes(0);
    let values: Vec<f64> = (0..grid.node_count()).map(|k| u1.values[k % nx] + u2.values[k / nx]).collect();
    let mut field = ScalarField::from_values(grid.clone(), values)?;
    if let (Some(f1), Some(f2)) = (u1.evaluator.clone(), u2.evaluator.clone()) {
        field = field.with_evaluator_unchecked(Arc::new(move |p: Point| f1(p[0]) + f2(p[1])));
    }
    Ok(GalleryField::new("tensor-sum", field, GroundTruth::Zero))
}

/// `min(x₁, x₂)`; its defect measure is `H¹/√2` on the diagonal.
pub fn roof(grid: &GridSpec) -> Result<GalleryField> {
    let field = sample_arc(Arc::new(|p: Point| p[0].min(p[1])), grid)?.with_lipschitz(1.0);
    let lo = grid.origin(0).max(grid.origin(1));
    let hi = grid.upper(0).min(grid.upper(1));
    let truth = if hi > lo {
        GroundTruth::Line { from: [lo, lo], to: [hi, hi], density: std::f64::consts::FRAC_1_SQRT_2 }
    } else {
        GroundTruth::Zero
    };
    Ok(GalleryField::new("roof", field, truth))
}

/// `min(a·x₁, x₂)` for `a > 0`; the defect measure is `a/√(1+a²)·H¹` on the
/// line `x₂ = a·x₁`.
pub fn slanted_roof(grid: &GridSpec, a: f64) -> Result<GalleryField> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(LabError::InvalidParameter(format!("slope {a} must be positive")));
    }
    let field = sample_arc(Arc::new(move |p: Point| (a * p[0]).min(p[1])), grid)?.with_lipschitz(a.max(1.0));
    let lo = grid.origin(0).max(grid.origin(1) / a);
    let hi = grid.upper(0).min(grid.upper(1) / a);
    let truth = if hi > lo {
        GroundTruth::Line { from: [lo, a * lo], to: [hi, a * hi], density: a / (1.0 + a * a).sqrt() }
    } else {
        GroundTruth::Zero
    };
    Ok(GalleryField::new("slanted-roof", field, truth))
}

/// `∇ min(x₁, x₂)`, taking `(1, 0)` on the diagonal.
pub fn roof_gradient(grid: &GridSpec) -> Result<VectorField> {
    VectorField::sample(|p: Point| if p[0] <= p[1] { [1.0, 0.0] } else { [0.0, 1.0] }, grid)
}

pub fn bifurcation_value(p: Point) -> f64 {
    let [x1, x2] = p;
    if x1 <= 0.0 {
        -x1
    } else if x2 >= 0.0 {
        x1.min(x2)
    } else {
        (-x1).max(x2)
    }
}

/// Three-branch Lipschitz field whose single level-set corner moves along
/// `(|t|, t)`: the corner velocity jumps from `(−1,1)` to `(1,1)` at `t = 0`.
pub fn bifurcation(grid: &GridSpec) -> Result<GalleryField> {
    let covers = grid.origin(0) <= -1.0 && grid.origin(1) <= -1.0 && grid.upper(0) >= 1.0 && grid.upper(1) >= 1.0;
    if !covers {
        return Err(LabError::InvalidParameter("bifurcation grid must contain (-1,1)^2".into()));
    }
    let field = sample_arc(Arc::new(bifurcation_value), grid)?.with_lipschitz(1.0);
    Ok(GalleryField::new("bifurcation", field, GroundTruth::CornerPath))
}

/// `ν` as weighted atoms `(t_k, w_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    /// Midpoint discretization of a density on `(lo, hi)` with `n` atoms.
    pub fn midpoint(lo: f64, hi: f64, n: usize, density: impl Fn(f64) -> f64) -> Self {
        let h = (hi - lo) / n as f64;
        let atoms = (0..n)
            .map(|k| {
                let t = lo + (k as f64 + 0.5) * h;
                (t, density(t) * h)
            })
            .collect();
        Self { atoms }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}

/// `u(x) = ∫ 1{x₁ > y₁(t)} 1{x₂ > y₂(t)} dν(t)` for increasing maps `y₁`,
/// `y₂`; its defect measure is the pushforward of `ν` by `t ↦ (y₁(t), y₂(t))`.
pub fn diffuse(nu: &DiscreteMeasure, y1: Evaluator1d, y2: Evaluator1d, grid: &GridSpec) -> Result<GalleryField> {
    let mut atoms = nu.atoms.clone();
    if let Some(a) = atoms.iter().find(|a| !(a.1 >= 0.0) || !a.0.is_finite()) {
        return Err(LabError::InvalidParameter(format!("measure atom {a:?} is not a finite nonnegative mass")));
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let p1: Vec<f64> = atoms.iter().map(|a| y1(a.0)).collect();
    let p2: Vec<f64> = atoms.iter().map(|a| y2(a.0)).collect();
    for ys in [&p1, &p2] {
        if let Some(k) = ys.windows(2).position(|w| w[1] < w[0]) {
            return Err(LabError::NotMonotone { t: atoms[k + 1].0 });
        }
    }
    // Prefix weights: with both maps increasing, {k : y_l(t_k) < x_l} is an
    // initial segment, so u(x) is the prefix weight at the shorter segment.
    let mut prefix = Vec::with_capacity(atoms.len() + 1);
    prefix.push(0.0);
    let mut acc = crate::sum::NeumaierSum::new();
    for a in &atoms {
        acc.add(a.1);
        prefix.push(acc.value());
    }
    let truth = GroundTruth::Atoms(
        atoms
            .iter()
            .zip(p1.iter().zip(&p2))
            .filter(|(a, _)| a.1 > 0.0)
            .map(|(a, (&x, &y))| PointMass { position: [x, y], mass: a.1 })
            .collect(),
    );
    let (q1, q2) = (p1.clone(), p2.clone());
    let eval: Evaluator = Arc::new(move |p: Point| {
        let c1 = q1.partition_point(|&y| y < p[0]);
        let c2 = q2.partition_point(|&y| y < p[1]);
        prefix[c1.min(c2)]
    });
    let field = sample_arc(eval, grid)?;
    Ok(GalleryField::new("diffuse", field, truth))
}

/// Piecewise-constant function with prescribed jumps.
#[derive(Debug, Clone)]
pub struct Sbv1d {
    pub samples: Samples1d,
    pub jumps: Vec<(f64, f64)>,
}

impl Sbv1d {
    /// Exact `Σ |height|^θ`.
    pub fn theta_variation(&self, theta: f64) -> f64 {
        self.jumps.iter().map(|j| j.1.abs().powf(theta)).sum()
    }
}

/// `f(x) = Σ height·1{x > position}` sampled on the nodes of `grid` along
/// `axis`.
pub fn sbv_theta_1d(jumps: &[(f64, f64)], grid: &GridSpec, axis: usize) -> Result<Sbv1d> {
    let (lo, hi) = (grid.origin(axis), grid.upper(axis));
    let mut sorted = jumps.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(LabError::InvalidParameter("jump positions must be distinct".into()));
    }
    if let Some(j) = sorted.iter().find(|j| !(j.0 > lo && j.0 < hi)) {
        return Err(LabError::InvalidParameter(format!("jump at {} outside ({lo}, {hi})", j.0)));
    }
    let table = sorted.clone();
    let samples = Samples1d::along_axis(grid, axis, move |x| table.iter().filter(|j| x > j.0).map(|j| j.1).sum());
    Ok(Sbv1d { samples, jumps: sorted })
}

/// Named families for configuration files and listings.
pub const FAMILIES: &[(&str, &str)] = &[
    ("figure1", "two touching L-shaped polygons, seven corners, one of multiplicity 2"),
    ("figure1-striped", "figure1 plus five horizontal stripes (no extra corners)"),
    ("rectangle", "indicator of one axis-parallel rectangle, four unit corners"),
    ("stripe", "one horizontal stripe, no corners"),
    ("quadrants", "sum of two quadrant indicators, two unit atoms"),
    ("tensor-sum", "u1(x1) + u2(x2) with step factors; defect measure zero"),
    ("roof", "min(x1, x2); diagonal line measure of density 1/sqrt2"),
    ("slanted-roof", "min(a x1, x2); line measure of density a/sqrt(1+a^2)"),
    ("bifurcation", "Lipschitz field whose corner path (|t|, t) kinks at t = 0"),
    ("diffuse", "pushforward of a uniform measure along the diagonal"),
    ("counterexample", "nested rotated tiles; mass ratio decays but fractions oscillate"),
];

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> GridSpec {
        GridSpec::square(-1.0, 1.0, n).unwrap()
    }

    #[test]
    fn figure1_corner_census() {
        let corners = figure1_spec().corners(FIGURE1_LO, FIGURE1_HI);
        let expect = [
            ([1.0, 1.0], 1.0),
            ([5.0, 1.0], -1.0),
            ([5.0, 2.0], 1.0),
            ([3.0, 2.0], -1.0),
            ([3.0, 3.0], 2.0),
            ([1.0, 3.0], -1.0),
            ([4.0, 4.0], -1.0),
        ];
        assert_eq!(corners.len(), 7);
        for (pos, m) in expect {
            let c = corners.iter().find(|c| c.position == pos).unwrap();
            assert_eq!(c.mass, m, "corner {pos:?}");
        }
        let striped = figure1_striped_spec().corners(FIGURE1_LO, FIGURE1_HI);
        assert_eq!(striped, corners);
    }

    #[test]
    fn rectangle_corner_signs_cycle() {
        let spec = AxisPolygonSpec {
            polygons: vec![vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]],
            stripes: vec![],
        };
        let c = spec.corners([-1.0, -1.0], [1.0, 1.0]);
        let signs: Vec<f64> = [[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]
            .iter()
            .map(|p| c.iter().find(|q| &q.position == p).unwrap().mass)
            .collect();
        assert_eq!(signs, vec![1.0, -1.0, 1.0, -1.0]);
    }

    #[test]
    fn stripe_has_no_corners() {
        let spec =
            AxisPolygonSpec { polygons: vec![], stripes: vec![Stripe { axis: StripeAxis::X2, lo: -0.3, hi: 0.2 }] };
        let g = polygon_indicator(&spec, &unit_box(65).offset_for_discontinuities()).unwrap();
        assert_eq!(g.truth, GroundTruth::Zero);
        assert!(g.indicator);
    }

    #[test]
    fn rejects_slanted_edges() {
        let spec =
            AxisPolygonSpec { polygons: vec![vec![[0.0, 0.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]], stripes: vec![] };
        assert!(matches!(spec.validate(), Err(LabError::InvalidPolygon(_))));
    }

    #[test]
    fn roof_values_and_truth() {
        let g = roof(&unit_box(33)).unwrap();
        assert_eq!(g.field.eval([0.2, -0.7]).unwrap().value, -0.7);
        assert!((g.truth.total_variation().unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bifurcation_branches() {
        assert_eq!(bifurcation_value([-0.5, 0.9]), 0.5);
        assert_eq!(bifurcation_value([0.5, 0.9]), 0.5);
        assert_eq!(bifurcation_value([0.7, -0.3]), -0.3);
        assert_eq!(bifurcation_value([0.2, -0.9]), -0.2);
        assert!(bifurcation(&GridSpec::square(-0.5, 0.5, 9).unwrap()).is_err());
    }

    #[test]
    fn tensor_sum_identities() {
        let grid = unit_box(17);
        let id0 = Samples1d::along_axis(&grid, 0, |x| x);
        let id1 = Samples1d::along_axis(&grid, 1, |x| x);
        let g = tensor_sum(&id0, &id1, &grid).unwrap();
        for j in 0..17 {
            for i in 0..17 {
                let p = grid.node(i, j);
                assert_eq!(g.field.value(i, j), p[0] + p[1]);
            }
        }
        let zero = Samples1d::along_axis(&grid, 1, |_| 0.0);
        let g = tensor_sum(&id0, &zero, &grid).unwrap();
        assert_eq!(g.field.value(3, 11), grid.coord(0, 3));
        let short = Samples1d::from_values(-1.0, 0.1, vec![0.0; 5]);
        assert!(tensor_sum(&short, &zero, &grid).is_err());
    }

    #[test]
    fn diffuse_single_atom_is_quadrant() {
        let nu = DiscreteMeasure { atoms: vec![(0.25, 1.0)] };
        let id: Evaluator1d = Arc::new(|t| t);
        let g = diffuse(&nu, id.clone(), id, &unit_box(33).offset_for_discontinuities()).unwrap();
        assert!(g.indicator);
        assert_eq!(g.truth, GroundTruth::Atoms(vec![PointMass { position: [0.25, 0.25], mass: 1.0 }]));
        let f = g.field.evaluator().unwrap();
        assert_eq!(f([0.3, 0.3]), 1.0);
        assert_eq!(f([0.3, 0.2]), 0.0);
    }

    #[test]
    fn diffuse_zero_measure_is_zero() {
        let id: Evaluator1d = Arc::new(|t| t);
        let g = diffuse(&DiscreteMeasure { atoms: vec![] }, id.clone(), id, &unit_box(9)).unwrap();
        assert!(g.field.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diffuse_rejects_decreasing_map() {
        let nu = DiscreteMeasure::midpoint(-1.0, 1.0, 8, |_| 0.5);
        let id: Evaluator1d = Arc::new(|t| t);
        let down: Evaluator1d = Arc::new(|t| -t);
        assert!(diffuse(&nu, id, down, &unit_box(9)).is_err());
    }

    #[test]
    fn diffuse_matches_direct_sum() {
        let nu = DiscreteMeasure::midpoint(-0.9, 0.9, 37, |t| 1.0 + t * t);
        let y1: Evaluator1d = Arc::new(|t| t);
        let y2: Evaluator1d = Arc::new(|t| 0.5 * t + 0.1 * t * t * t);
        let g = diffuse(&nu, y1.clone(), y2.clone(), &unit_box(41).offset_for_discontinuities()).unwrap();
        let f = g.field.evaluator().unwrap();
        for p in [[0.1, 0.05], [-0.3, 0.4], [0.8, -0.2], [0.95, 0.95]] {
            let direct: f64 = nu.atoms.iter().filter(|a| p[0] > y1(a.0) && p[1] > y2(a.0)).map(|a| a.1).sum();
            assert!((f(p) - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn sbv_examples() {
        let grid = unit_box(101);
        let s = sbv_theta_1d(&[(0.1, 0.5), (-0.3, 0.25)], &grid, 0).unwrap();
        assert!((s.theta_variation(0.5) - (0.5f64.sqrt() + 0.5)).abs() < 1e-15);
        let one = sbv_theta_1d(&[(0.0, 1.0)], &grid, 0).unwrap();
        for th in [0.1, 0.5, 1.0] {
            assert_eq!(one.theta_variation(th), 1.0);
        }
        let none = sbv_theta_1d(&[], &grid, 0).unwrap();
        assert_eq!(none.theta_variation(0.5), 0.0);
        assert!(none.samples.values.iter().all(|&v| v == 0.0));
    }
}
