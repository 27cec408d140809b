//! Uniform tensor grids over boxes, node-sampled fields and elementary
//! finite differences.
//!
//! Values live on nodes; the cells are the boxes between adjacent nodes.
//! Index convention for 2D fields: `values[i + nx * j]` where `i` runs along
//! the first axis (x₁) and `j` along the second (x₂).

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};

pub type Point = [f64; 2];

/// Analytic point evaluation of a scalar field.
pub type Evaluator = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Analytic point evaluation of a vector field.
pub type VectorEvaluator = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Analytic evaluation of a one-variable function.
pub type Evaluator1d = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

const BOX_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    origin: Vec<f64>,
    side: Vec<f64>,
    nodes: Vec<usize>,
}

impl GridSpec {
    pub fn new(origin: Vec<f64>, side: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        if origin.is_empty() || origin.len() != side.len() || origin.len() != nodes.len() {
            return Err(LabError::InvalidGrid(format!(
                "axis count mismatch: origin {}, side {}, nodes {}",
                origin.len(),
                side.len(),
                nodes.len()
            )));
        }
        for (axis, ((&o, &s), &n)) in origin.iter().zip(&side).zip(&nodes).enumerate() {
            if n < 2 {
                return Err(LabError::InvalidGrid(format!("axis {axis} has {n} nodes, need at least 2")));
            }
            if !(s > 0.0) || !s.is_finite() || !o.is_finite() {
                return Err(LabError::InvalidGrid(format!("axis {axis}: side {s}, origin {o}")));
            }
        }
        Ok(Self { origin, side, nodes })
    }

    /// Two-dimensional grid over `[lo.0, hi.0] × [lo.1, hi.1]`.
    pub fn rect(lo: Point, hi: Point, nodes: [usize; 2]) -> Result<Self> {
        Self::new(vec![lo[0], lo[1]], vec![hi[0] - lo[0], hi[1] - lo[1]], vec![nodes[0], nodes[1]])
    }

    /// `[lo, hi]²` with `n` nodes per axis.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::rect([lo, lo], [hi, hi], [n, n])
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn origin(&self, axis: usize) -> f64 {
        self.origin[axis]
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.side[axis]
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.origin[axis] + self.side[axis]
    }

    pub fn nodes(&self, axis: usize) -> usize {
        self.nodes[axis]
    }

    pub fn node_counts(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.side[axis] / (self.nodes[axis] - 1) as f64
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().product()
    }

    /// Coordinate of node `i` along `axis`; the last node sits on the upper
    /// face up to one rounding of `origin + side`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let last = self.nodes[axis] - 1;
        if i == last {
            self.origin[axis] + self.side[axis]
        } else {
            self.origin[axis] + self.side[axis] * (i as f64 / last as f64)
        }
    }

    pub fn coords(&self, axis: usize) -> Vec<f64> {
        (0..self.nodes[axis]).map(|i| self.coord(axis, i)).collect()
    }

    /// 2D node position.
    pub fn node(&self, i: usize, j: usize) -> Point {
        [self.coord(0, i), self.coord(1, j)]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nodes[0] * j
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    /// Closed-box membership with a relative slack of 1e-12.
    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().enumerate().all(|(a, &x)| {
            let slack = BOX_SLACK * self.side[a].max(1.0);
            x >= self.origin[a] - slack && x <= self.upper(a) + slack
        })
    }

    /// Fractional node index of `x` along `axis`.
    pub fn fractional_index(&self, axis: usize, x: f64) -> f64 {
        (x - self.origin[axis]) / self.spacing(axis)
    }

    /// Node index when `x` is a node coordinate up to `1e-9` cells.
    pub fn snap(&self, axis: usize, x: f64) -> Option<usize> {
        let f = self.fractional_index(axis, x);
        let r = f.round();
        if (f - r).abs() <= 1e-9 && r >= 0.0 && (r as usize) < self.nodes[axis] {
            Some(r as usize)
        } else {
            None
        }
    }

    /// Moves the lower face in by `δ = h·(√2−1)/2` and the upper face by
    /// `δ/√2`, keeping the node count. The asymmetry keeps a centered node off
    /// the midpoint, so discontinuity lines at round coordinates miss every
    /// node while the grid stays inside the original box.
    pub fn offset_for_discontinuities(&self) -> GridSpec {
        let mut origin = self.origin.clone();
        let mut side = self.side.clone();
        for a in 0..self.dim() {
            let delta = self.spacing(a) * (std::f64::consts::SQRT_2 - 1.0) / 2.0;
            origin[a] += delta;
            side[a] -= delta * (1.0 + std::f64::consts::FRAC_1_SQRT_2);
        }
        GridSpec { origin, side, nodes: self.nodes.clone() }
    }

    fn require_2d(&self) -> Result<()> {
        if self.dim() != 2 {
            return Err(LabError::InvalidGrid(format!("expected a 2D grid, got {} axes", self.dim())));
        }
        Ok(())
    }
}

/// Result of an off-grid evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated {
    pub value: f64,
    /// True when bilinear interpolation replaced the analytic evaluator.
    pub interpolated: bool,
}

#[derive(Clone)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
    evaluator: Option<Evaluator>,
    lipschitz: Option<f64>,
    sup_norm: f64,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("spec", &self.spec)
            .field("sup_norm", &self.sup_norm)
            .field("lipschitz", &self.lipschitz)
            .field("evaluator", &self.evaluator.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        spec.require_2d()?;
        if values.len() != spec.node_count() {
            return Err(LabError::LengthMismatch { expected: spec.node_count(), got: values.len() });
        }
        let nx = spec.nodes(0);
        let mut sup = 0.0f64;
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(LabError::NonFinite { node: vec![k % nx, k / nx], value: v });
            }
            sup = sup.max(v.abs());
        }
        Ok(Self { spec, values, evaluator: None, lipschitz: None, sup_norm: sup })
    }

    pub fn with_lipschitz(mut self, bound: f64) -> Self {
        self.lipschitz = Some(bound.abs());
        self
    }

    pub(crate) fn with_evaluator_unchecked(mut self, evaluator: Evaluator) -> Self {
        self.evaluator = Some(evaluator);
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.spec.index(i, j)]
    }

    pub fn evaluator(&self) -> Option<&Evaluator> {
        self.evaluator.as_ref()
    }

    pub fn has_evaluator(&self) -> bool {
        self.evaluator.is_some()
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn nx(&self) -> usize {
        self.spec.nodes(0)
    }

    pub fn ny(&self) -> usize {
        self.spec.nodes(1)
    }

    /// Point evaluation: the analytic evaluator when present, else bilinear
    /// interpolation (flagged).
    pub fn eval(&self, p: Point) -> Result<Evaluated> {
        if !self.spec.contains(&p) {
            return Err(LabError::OutOfDomain { point: p.to_vec() });
        }
        Ok(self.eval_unchecked(p))
    }

    pub(crate) fn eval_unchecked(&self, p: Point) -> Evaluated {
        match &self.evaluator {
            Some(f) => Evaluated { value: f(p), interpolated: false },
            None => Evaluated { value: self.bilinear(p), interpolated: true },
        }
    }

    /// Bilinear interpolation of the node values, clamped to the box.
    pub fn bilinear(&self, p: Point) -> f64 {
        let (nx, ny) = (self.nx(), self.ny());
        let locate = |axis: usize, x: f64, n: usize| -> (usize, f64) {
            let f = self.spec.fractional_index(axis, x).clamp(0.0, (n - 1) as f64);
            let i = (f.floor() as usize).min(n - 2);
            (i, f - i as f64)
        };
        let (i, s) = locate(0, p[0], nx);
        let (j, t) = locate(1, p[1], ny);
        let v00 = self.value(i, j);
        let v10 = self.value(i + 1, j);
        let v01 = self.value(i, j + 1);
        let v11 = self.value(i + 1, j + 1);
        (1.0 - s) * (1.0 - t) * v00 + s * (1.0 - t) * v10 + (1.0 - s) * t * v01 + s * t * v11
    }

    /// Discrete gradient at a node by centered differences (one-sided at the
    /// boundary).
    pub fn node_gradient(&self, i: usize, j: usize) -> [f64; 2] {
        let (nx, ny) = (self.nx(), self.ny());
        let d = |lo: f64, hi: f64, span: f64| (hi - lo) / span;
        let hx = self.spec.spacing(0);
        let hy = self.spec.spacing(1);
        let gx = match (i, i + 1 < nx) {
            (0, _) => d(self.value(0, j), self.value(1, j), hx),
            (_, false) => d(self.value(i - 1, j), self.value(i, j), hx),
            _ => d(self.value(i - 1, j), self.value(i + 1, j), 2.0 * hx),
        };
        let gy = match (j, j + 1 < ny) {
            (0, _) => d(self.value(i, 0), self.value(i, 1), hy),
            (_, false) => d(self.value(i, j - 1), self.value(i, j), hy),
            _ => d(self.value(i, j - 1), self.value(i, j + 1), 2.0 * hy),
        };
        [gx, gy]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Samples `evaluator` at every node of `spec` and keeps it for off-grid
/// queries.
pub fn sample<F>(evaluator: F, spec: &GridSpec) -> Result<ScalarField>
where
    F: Fn(Point) -> f64 + Send + Sync + 'static,
{
    sample_arc(Arc::new(evaluator), spec)
}

pub fn sample_arc(evaluator: Evaluator, spec: &GridSpec) -> Result<ScalarField> {
    spec.require_2d()?;
    let nx = spec.nodes(0);
    let ny = spec.nodes(1);
    let xs = spec.coords(0);
    let ys = spec.coords(1);
    let mut values = vec![0.0; nx * ny];
    values.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = evaluator([xs[i], ys[j]]);
        }
    });
    let field = ScalarField::from_values(spec.clone(), values)?;
    Ok(field.with_evaluator_unchecked(evaluator))
}

#[derive(Clone)]
pub struct VectorField {
    spec: GridSpec,
    v1: Vec<f64>,
    v2: Vec<f64>,
    evaluator: Option<VectorEvaluator>,
    unit_bounded: bool,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("spec", &self.spec)
            .field("unit_bounded", &self.unit_bounded)
            .field("evaluator", &self.evaluator.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn from_components(spec: GridSpec, v1: Vec<f64>, v2: Vec<f64>) -> Result<Self> {
        spec.require_2d()?;
        let n = spec.node_count();
        for comp in [&v1, &v2] {
            if comp.len() != n {
                return Err(LabError::LengthMismatch { expected: n, got: comp.len() });
            }
        }
        let nx = spec.nodes(0);
        let mut unit = true;
        for k in 0..n {
            let (a, b) = (v1[k], v2[k]);
            if !a.is_finite() || !b.is_finite() {
                return Err(LabError::NonFinite {
                    node: vec![k % nx, k / nx],
                    value: if a.is_finite() { b } else { a },
                });
            }
            unit &= a.hypot(b) <= 1.0 + 1e-12;
        }
        Ok(Self { spec, v1, v2, evaluator: None, unit_bounded: unit })
    }

    pub fn sample<F>(evaluator: F, spec: &GridSpec) -> Result<Self>
    where
        F: Fn(Point) -> [f64; 2] + Send + Sync + 'static,
    {
        Self::sample_arc(Arc::new(evaluator), spec)
    }

    pub fn sample_arc(evaluator: VectorEvaluator, spec: &GridSpec) -> Result<Self> {
        spec.require_2d()?;
        let nx = spec.nodes(0);
        let xs = spec.coords(0);
        let ys = spec.coords(1);
        let pairs: Vec<[f64; 2]> =
            (0..spec.node_count()).into_par_iter().map(|k| evaluator([xs[k % nx], ys[k / nx]])).collect();
        let (v1, v2) = pairs.into_iter().map(|p| (p[0], p[1])).unzip();
        let mut field = Self::from_components(spec.clone(), v1, v2)?;
        field.evaluator = Some(evaluator);
        Ok(field)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn v1(&self) -> &[f64] {
        &self.v1
    }

    pub fn v2(&self) -> &[f64] {
        &self.v2
    }

    /// Whether `|v| ≤ 1` held at every node.
    pub fn unit_bounded(&self) -> bool {
        self.unit_bounded
    }

    pub fn has_evaluator(&self) -> bool {
        self.evaluator.is_some()
    }

    pub fn vector_at(&self, p: Point) -> [f64; 2] {
        if let Some(f) = &self.evaluator {
            return f(p);
        }
        let s1 = ScalarField::from_values(self.spec.clone(), self.v1.clone());
        let s2 = ScalarField::from_values(self.spec.clone(), self.v2.clone());
        match (s1, s2) {
            (Ok(a), Ok(b)) => [a.bilinear(p), b.bilinear(p)],
            _ => [f64::NAN, f64::NAN],
        }
    }
}

/// Samples of a one-variable function on a uniform 1D grid.
#[derive(Clone)]
pub struct Samples1d {
    pub start: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub evaluator: Option<Evaluator1d>,
}

impl fmt::Debug for Samples1d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Samples1d")
            .field("start", &self.start)
            .field("step", &self.step)
            .field("len", &self.values.len())
            .field("evaluator", &self.evaluator.is_some())
            .finish()
    }
}

impl Samples1d {
    pub fn from_values(start: f64, step: f64, values: Vec<f64>) -> Self {
        Self { start, step, values, evaluator: None }
    }

    /// Samples `f` at the nodes of `spec` along `axis`.
    pub fn along_axis<F>(spec: &GridSpec, axis: usize, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let values = spec.coords(axis).into_iter().map(&f).collect();
        Self { start: spec.origin(axis), step: spec.spacing(axis), values, evaluator: Some(Arc::new(f)) }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaPair {
    theta1: f64,
    theta2: f64,
}

impl ThetaPair {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self> {
        for (name, t) in [("theta1", theta1), ("theta2", theta2)] {
            if !(t > 0.0 && t < 1.0) {
                return Err(LabError::InvalidParameter(format!("{name} = {t} must lie in (0, 1)")));
            }
        }
        if theta1 + theta2 > 1.0 + 1e-12 {
            return Err(LabError::InvalidParameter(format!("theta1 + theta2 = {} exceeds 1", theta1 + theta2)));
        }
        Ok(Self { theta1, theta2 })
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn theta(&self) -> f64 {
        self.theta1 + self.theta2
    }
}

/// Product index set `Ω^ε` of nodes at distance more than `ε` from the
/// boundary of every factor interval. May be empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestrictedDomain {
    pub ranges: Vec<Range<usize>>,
}

impl RestrictedDomain {
    pub fn is_empty(&self) -> bool {
        self.ranges.iter().any(|r| r.is_empty())
    }

    pub fn len(&self) -> usize {
        self.ranges.iter().map(|r| r.len()).product()
    }

    pub fn contains(&self, index: &[usize]) -> bool {
        index.iter().zip(&self.ranges).all(|(i, r)| r.contains(i))
    }

    /// 2D node indices in row order.
    pub fn iter_2d(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (ri, rj) = (self.ranges[0].clone(), self.ranges[1].clone());
        rj.flat_map(move |j| ri.clone().map(move |i| (i, j)))
    }
}

pub fn restricted_domain(spec: &GridSpec, eps: f64) -> RestrictedDomain {
    let ranges = (0..spec.dim())
        .map(|a| {
            let (lo, hi) = (spec.origin(a), spec.upper(a));
            let inside: Vec<usize> = (0..spec.nodes(a))
                .filter(|&i| {
                    let x = spec.coord(a, i);
                    x - lo > eps && hi - x > eps
                })
                .collect();
            match (inside.first(), inside.last()) {
                (Some(&s), Some(&e)) => s..e + 1,
                _ => 0..0,
            }
        })
        .collect();
    RestrictedDomain { ranges }
}

/// `u(x + z) − u(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiff {
    pub value: f64,
    pub interpolated: bool,
}

pub fn finite_diff(u: &ScalarField, x: Point, z: [f64; 2]) -> Result<FiniteDiff> {
    let y = [x[0] + z[0], x[1] + z[1]];
    let a = u.eval(x)?;
    let b = u.eval(y)?;
    Ok(FiniteDiff { value: b.value - a.value, interpolated: a.interpolated || b.interpolated })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roof(p: Point) -> f64 {
        p[0].min(p[1])
    }

    #[test]
    fn constant_field_has_zero_sup_norm() {
        let spec = GridSpec::square(-1.0, 1.0, 33).unwrap();
        let u = sample(|_| 0.0, &spec).unwrap();
        assert!(u.values().iter().all(|&v| v == 0.0));
        assert_eq!(u.sup_norm(), 0.0);
    }

    #[test]
    fn linear_field_rows() {
        let spec = GridSpec::square(-1.0, 1.0, 3).unwrap();
        let u = sample(|p| p[0], &spec).unwrap();
        for j in 0..3 {
            assert_eq!([u.value(0, j), u.value(1, j), u.value(2, j)], [-1.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn roof_direct_values() {
        let spec = GridSpec::square(-1.0, 1.0, 5).unwrap();
        let u = sample(roof, &spec).unwrap();
        assert_eq!(u.eval([1.0, 1.0]).unwrap().value, 1.0);
        assert_eq!(u.eval([1.0, -1.0]).unwrap().value, -1.0);
        assert_eq!(u.value(4, 4), 1.0);
        assert_eq!(u.value(4, 0), -1.0);
    }

    #[test]
    fn last_node_hits_upper_face() {
        let spec = GridSpec::rect([0.2, 0.3], [6.0, 5.0], [513, 257]).unwrap();
        assert_eq!(spec.coord(0, 512), 0.2 + 5.8);
        assert!((spec.coord(1, 256) - 5.0).abs() <= f64::EPSILON * 8.0);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridSpec::square(0.0, 1.0, 1).is_err());
        assert!(GridSpec::rect([0.0, 0.0], [0.0, 1.0], [3, 3]).is_err());
    }

    #[test]
    fn non_finite_sample_names_node() {
        let spec = GridSpec::square(-1.0, 1.0, 5).unwrap();
        let err = sample(|p| if p[0] > 0.9 && p[1] > 0.9 { f64::NAN } else { 0.0 }, &spec).unwrap_err();
        match err {
            LabError::NonFinite { node, .. } => assert_eq!(node, vec![4, 4]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn restricted_domain_examples() {
        let spec = GridSpec::square(-1.0, 1.0, 33).unwrap();
        let d = restricted_domain(&spec, 0.5);
        for (i, j) in d.iter_2d() {
            let p = spec.node(i, j);
            assert!(p[0] > -0.5 && p[0] < 0.5 && p[1] > -0.5 && p[1] < 0.5);
        }
        // nodes at ±0.5 are excluded, the 15 strictly inside remain
        assert_eq!(d.ranges, vec![9..24, 9..24]);
        assert!(restricted_domain(&spec, 1.5).is_empty());

        let spec = GridSpec::rect([0.0, 0.0], [1.0, 2.0], [21, 41]).unwrap();
        let d = restricted_domain(&spec, 0.25);
        let xs: Vec<f64> = d.ranges[0].clone().map(|i| spec.coord(0, i)).collect();
        let ys: Vec<f64> = d.ranges[1].clone().map(|j| spec.coord(1, j)).collect();
        assert!(xs.iter().all(|&x| x > 0.25 && x < 0.75));
        assert!(ys.iter().all(|&y| y > 0.25 && y < 1.75));
        assert_eq!(xs.len(), 9);
        assert_eq!(ys.len(), 29);
    }

    #[test]
    fn finite_diff_examples() {
        let spec = GridSpec::square(-1.0, 1.0, 9).unwrap();
        let lin = sample(|p| p[0], &spec).unwrap();
        assert_eq!(finite_diff(&lin, [0.0, 0.0], [0.25, 0.0]).unwrap().value, 0.25);
        let r = sample(roof, &spec).unwrap();
        assert_eq!(finite_diff(&r, [0.0, 0.0], [0.0, 0.5]).unwrap().value, 0.0);
        let d = finite_diff(&r, [-0.5, 0.0], [1.0, 0.0]).unwrap();
        assert_eq!(d.value, 0.5);
        assert!(!d.interpolated);
        assert!(finite_diff(&r, [0.5, 0.0], [1.0, 0.0]).is_err());
    }

    #[test]
    fn bilinear_fallback_is_flagged() {
        let spec = GridSpec::square(-1.0, 1.0, 9).unwrap();
        let u = ScalarField::from_values(spec.clone(), sample(|p| p[0] + 2.0 * p[1], &spec).unwrap().values().to_vec())
            .unwrap();
        let e = u.eval([0.1, 0.3]).unwrap();
        assert!(e.interpolated);
        assert!((e.value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn theta_pair_validation() {
        assert!(ThetaPair::new(0.25, 0.25).is_ok());
        assert!(ThetaPair::new(0.5, 0.5).is_ok());
        assert!(ThetaPair::new(0.6, 0.6).is_err());
        assert!(ThetaPair::new(0.0, 0.5).is_err());
    }

    #[test]
    fn offset_grid_avoids_round_coordinates() {
        for (lo, hi, n) in [(0.0, 4.0, 65), (-1.0, 1.0, 257), (0.2, 6.0, 1025), (0.3, 5.0, 513)] {
            let spec = GridSpec::square(lo, hi, n).unwrap().offset_for_discontinuities();
            assert!(spec.origin(0) > lo && spec.upper(0) < hi);
            for i in 0..n {
                let x = spec.coord(0, i) * 8.0;
                assert!((x - x.round()).abs() > 1e-6, "node {i} of {n} at {}", x / 8.0);
            }
        }
    }
}
