//! Tensor grids in three or four dimensions split as `𝕏₁ ⊕ 𝕏₂`, their 2D
//! slices through one axis of each factor, and the slice-wise aggregates of
//! the cross-difference energy and θ-mass.
//!
//! Node indices run with the first axis fastest, as in 2D.

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{energy_second, validate_schedule};
use crate::error::{LabError, Result};
use crate::gallery::{figure1_spec, polygon_indicator};
use crate::grid::{restricted_domain, GridSpec, ScalarField};
use crate::measure::{defect_measure, extract_atoms, four_point, theta_mass, AtomSet};
use crate::sum::NeumaierSum;

#[derive(Debug, Clone)]
pub struct TensorField {
    spec: GridSpec,
    /// Factor (1 or 2) of each axis.
    factors: Vec<u8>,
    values: Vec<f64>,
}

impl TensorField {
    pub fn new(spec: GridSpec, factors: Vec<u8>, values: Vec<f64>) -> Result<Self> {
        let dim = spec.dim();
        if !(3..=4).contains(&dim) {
            return Err(LabError::InvalidGrid(format!("tensor fields have 3 or 4 axes, got {dim}")));
        }
        if factors.len() != dim || factors.iter().any(|&f| f != 1 && f != 2) {
            return Err(LabError::InvalidParameter(format!("factor tags {factors:?} must be 1 or 2 per axis")));
        }
        if !factors.contains(&1) || !factors.contains(&2) {
            return Err(LabError::InvalidParameter("both factors need at least one axis".into()));
        }
        if values.len() != spec.node_count() {
            return Err(LabError::LengthMismatch { expected: spec.node_count(), got: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(LabError::NonFinite { node: unflatten(&spec, k), value: values[k] });
        }
        Ok(Self { spec, factors, values })
    }

    pub fn sample<F>(f: F, spec: &GridSpec, factors: Vec<u8>) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let coords: Vec<Vec<f64>> = (0..spec.dim()).map(|a| spec.coords(a)).collect();
        let values = (0..spec.node_count())
            .into_par_iter()
            .map(|k| {
                let idx = unflatten(spec, k);
                let x: Vec<f64> = idx.iter().enumerate().map(|(a, &i)| coords[a][i]).collect();
                f(&x)
            })
            .collect();
        Self::new(spec.clone(), factors, values)
    }

    /// `U(x₁, x₂, y…) = u(x₁, x₂)` on `u`'s grid times the extra axes
    /// `(origin, side, nodes)`.
    pub fn extrude(u: &ScalarField, extra: &[(f64, f64, usize)], factors: Vec<u8>) -> Result<Self> {
        let s = u.spec();
        let mut origin = vec![s.origin(0), s.origin(1)];
        let mut side = vec![s.side(0), s.side(1)];
        let mut nodes = vec![s.nodes(0), s.nodes(1)];
        for &(o, l, n) in extra {
            origin.push(o);
            side.push(l);
            nodes.push(n);
        }
        let spec = GridSpec::new(origin, side, nodes)?;
        let plane = u.values().len();
        let values = (0..spec.node_count()).map(|k| u.values()[k % plane]).collect();
        Self::new(spec, factors, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn factors(&self) -> &[u8] {
        &self.factors
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn axes_of(&self, factor: u8) -> Vec<usize> {
        (0..self.spec.dim()).filter(|&a| self.factors[a] == factor).collect()
    }

    /// All pairs `(a, b)` with `a ∈ 𝕏₁`, `b ∈ 𝕏₂`.
    pub fn cross_pairs(&self) -> Vec<[usize; 2]> {
        let (f1, f2) = (self.axes_of(1), self.axes_of(2));
        f1.iter().flat_map(|&a| f2.iter().map(move |&b| [a, b])).collect()
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        flatten(&self.spec, idx)
    }

    pub fn value(&self, idx: &[usize]) -> f64 {
        self.values[self.flat(idx)]
    }

    /// `(−1)^{i+j}` for the `i`-th axis of 𝕏₁ and the `j`-th of 𝕏₂ (1-based).
    pub fn pair_sign(&self, pair: [usize; 2]) -> Result<i32> {
        self.check_cross(pair)?;
        let i = self.axes_of(1).iter().position(|&a| a == pair[0]).unwrap() + 1;
        let j = self.axes_of(2).iter().position(|&b| b == pair[1]).unwrap() + 1;
        Ok(if (i + j) % 2 == 0 { 1 } else { -1 })
    }

    fn check_cross(&self, pair: [usize; 2]) -> Result<()> {
        let dim = self.spec.dim();
        if pair[0] >= dim || pair[1] >= dim {
            return Err(LabError::InvalidParameter(format!("axis pair {pair:?} out of range")));
        }
        if self.factors[pair[0]] != 1 || self.factors[pair[1]] != 2 {
            return Err(LabError::InvalidParameter(format!(
                "pair {pair:?} must take its first axis from factor 1 and its second from factor 2"
            )));
        }
        Ok(())
    }

    /// Axes other than the pair, in increasing order.
    pub fn transverse(&self, pair: [usize; 2]) -> Vec<usize> {
        (0..self.spec.dim()).filter(|a| !pair.contains(a)).collect()
    }

    /// All transverse node offsets, first transverse axis fastest.
    pub fn offsets(&self, pair: [usize; 2]) -> Vec<Vec<usize>> {
        let ranges: Vec<std::ops::Range<usize>> =
            self.transverse(pair).iter().map(|&a| 0..self.spec.nodes(a)).collect();
        product(&ranges)
    }
}

/// The `figure1` indicator on the cube `[0,6]³`, constant along `x₃`, with
/// `𝕏₁ = span(e₁)` and `𝕏₂ = span(e₂, e₃)`. All three axes share one spacing.
pub fn extruded_figure1(nodes: usize) -> Result<TensorField> {
    let base = GridSpec::rect([0.0, 0.0], [6.0, 6.0], [nodes, nodes])?.offset_for_discontinuities();
    let u = polygon_indicator(&figure1_spec(), &base)?.field;
    TensorField::extrude(&u, &[(base.origin(0), base.side(0), nodes)], vec![1, 2, 2])
}

fn flatten(spec: &GridSpec, idx: &[usize]) -> usize {
    let mut k = 0;
    let mut stride = 1;
    for (a, &i) in idx.iter().enumerate() {
        k += i * stride;
        stride *= spec.nodes(a);
    }
    k
}

fn unflatten(spec: &GridSpec, mut k: usize) -> Vec<usize> {
    (0..spec.dim())
        .map(|a| {
            let n = spec.nodes(a);
            let i = k % n;
            k /= n;
            i
        })
        .collect()
}

fn product(ranges: &[std::ops::Range<usize>]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for r in ranges {
        let mut next = Vec::with_capacity(out.len() * r.len());
        for i in r.clone() {
            for p in &out {
                let mut q = p.clone();
                q.push(i);
                next.push(q);
            }
        }
        out = next;
    }
    // first transverse axis fastest
    out.sort_by(|a, b| a.iter().rev().cmp(b.iter().rev()));
    out
}

/// Full index from slice coordinates `(i, j)` along `pair` and a transverse offset.
fn full_index(dim: usize, pair: [usize; 2], i: usize, j: usize, offset: &[usize]) -> Vec<usize> {
    let mut idx = Vec::with_capacity(dim);
    let mut rest = offset.iter();
    for a in 0..dim {
        if a == pair[0] {
            idx.push(i);
        } else if a == pair[1] {
            idx.push(j);
        } else {
            idx.push(*rest.next().expect("offset has one entry per transverse axis"));
        }
    }
    idx
}

fn check_offset(u: &TensorField, pair: [usize; 2], offset: &[usize]) -> Result<()> {
    let trans = u.transverse(pair);
    if offset.len() != trans.len() {
        return Err(LabError::LengthMismatch { expected: trans.len(), got: offset.len() });
    }
    for (&a, &i) in trans.iter().zip(offset) {
        if i >= u.spec.nodes(a) {
            return Err(LabError::InvalidParameter(format!("offset {i} out of range on axis {a}")));
        }
    }
    Ok(())
}

/// The 2D restriction `u_{x^ᾱ}` through `pair` at the transverse node `offset`.
pub fn slice(u: &TensorField, pair: [usize; 2], offset: &[usize]) -> Result<ScalarField> {
    u.check_cross(pair)?;
    check_offset(u, pair, offset)?;
    let s = &u.spec;
    let (na, nb) = (s.nodes(pair[0]), s.nodes(pair[1]));
    let spec = GridSpec::new(
        vec![s.origin(pair[0]), s.origin(pair[1])],
        vec![s.side(pair[0]), s.side(pair[1])],
        vec![na, nb],
    )?;
    let dim = s.dim();
    let mut values = Vec::with_capacity(na * nb);
    for j in 0..nb {
        for i in 0..na {
            values.push(u.value(&full_index(dim, pair, i, j, offset)));
        }
    }
    ScalarField::from_values(spec, values)
}

/// Cell cross differences in the plane of `pair` at a transverse offset,
/// read directly from the n-D array.
fn plane_cells(u: &TensorField, pair: [usize; 2], offset: &[usize]) -> Vec<f64> {
    let s = &u.spec;
    let dim = s.dim();
    let (na, nb) = (s.nodes(pair[0]), s.nodes(pair[1]));
    let mut cells = Vec::with_capacity((na - 1) * (nb - 1));
    for j in 0..nb - 1 {
        for i in 0..na - 1 {
            let v = |di: usize, dj: usize| u.value(&full_index(dim, pair, i + di, j + dj, offset));
            cells.push(four_point(v(1, 1), v(1, 0), v(0, 1), v(0, 0)));
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Commutation {
    pub pair: [usize; 2],
    /// `(−1)^{i+j}` relating the slice measure to the oriented component.
    pub sign: i32,
    pub slices: usize,
    pub cells: usize,
    /// Cells where the slice's defect measure and the n-D cross difference
    /// differ in any bit.
    pub mismatches: usize,
}

pub fn slice_commutation(u: &TensorField, pair: [usize; 2]) -> Result<Commutation> {
    let sign = u.pair_sign(pair)?;
    let offsets = u.offsets(pair);
    let per: Vec<Result<(usize, usize)>> = offsets
        .par_iter()
        .map(|off| {
            let m = defect_measure(&slice(u, pair, off)?);
            let direct = plane_cells(u, pair, off);
            let bad = m.cells().iter().zip(&direct).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
            Ok((direct.len(), bad))
        })
        .collect();
    let mut cells = 0;
    let mut mismatches = 0;
    for r in per {
        let (c, b) = r?;
        cells += c;
        mismatches += b;
    }
    Ok(Commutation { pair, sign, slices: offsets.len(), cells, mismatches })
}

/// Largest `|four-point|` over all cells of all planes spanned by two axes of
/// the same factor.
pub fn coordinate_plane_zero_check(u: &TensorField, pair: [usize; 2]) -> Result<f64> {
    let dim = u.spec.dim();
    if pair[0] >= dim || pair[1] >= dim || pair[0] == pair[1] {
        return Err(LabError::InvalidParameter(format!("axis pair {pair:?} is invalid")));
    }
    if u.factors[pair[0]] != u.factors[pair[1]] {
        return Err(LabError::InvalidParameter(format!("axes {pair:?} lie in different factors")));
    }
    let offsets = u.offsets(pair);
    Ok(offsets
        .par_iter()
        .map(|off| plane_cells(u, pair, off).iter().fold(0.0f64, |m, c| m.max(c.abs())))
        .reduce(|| 0.0, f64::max))
}

fn grid_steps(spec: &GridSpec, pair: [usize; 2], r: f64) -> Result<[usize; 2]> {
    let mut out = [0; 2];
    for (o, &a) in out.iter_mut().zip(&pair) {
        let s = r / spec.spacing(a);
        let k = s.round();
        if k < 1.0 || (s - k).abs() > 1e-9 * s {
            return Err(LabError::NotAligned(format!("r = {r} is not a whole number of cells on axis {a}")));
        }
        *o = k as usize;
    }
    Ok(out)
}

/// `∫_{Ω^ε} |D[Du(·, r e_b)](x, r e_a)| / r² dx` over the n-D grid.
fn cross_integral(u: &TensorField, pair: [usize; 2], eps: f64, r: f64) -> Result<f64> {
    let spec = &u.spec;
    let [sa, sb] = grid_steps(spec, pair, r)?;
    let dom = restricted_domain(spec, eps);
    if dom.is_empty() {
        return Ok(0.0);
    }
    let dim = spec.dim();
    let outer = dim - 1;
    let inner: Vec<std::ops::Range<usize>> = dom.ranges[..outer].to_vec();
    let inner_idx = product(&inner);
    let parts: Vec<f64> = dom.ranges[outer]
        .clone()
        .into_par_iter()
        .map(|last| {
            let mut acc = NeumaierSum::new();
            for head in &inner_idx {
                let mut idx = head.clone();
                idx.push(last);
                let at = |da: usize, db: usize| {
                    let mut k = idx.clone();
                    k[pair[0]] += da;
                    k[pair[1]] += db;
                    u.value(&k)
                };
                let c = four_point(at(sa, sb), at(sa, 0), at(0, sb), at(0, 0));
                if c != 0.0 {
                    acc.add(c.abs());
                }
            }
            acc.value()
        })
        .collect();
    let mut total = NeumaierSum::new();
    total.extend(parts);
    Ok(total.value() * spec.cell_volume() / (r * r))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FatouReport {
    pub pair: [usize; 2],
    pub schedule: Vec<(f64, f64)>,
    /// `ℰ″(u)` summed over all cross pairs.
    pub lhs: Vec<f64>,
    /// The `pair` term of `lhs` alone.
    pub lhs_pair: Vec<f64>,
    /// `∫ ℰ″(u_{x^ᾱ}) dx^ᾱ` over transverse nodes of `Ω^ε`.
    pub rhs: Vec<f64>,
    /// `(lhs − rhs)/lhs`, 0 when both vanish.
    pub relative_slack: Vec<f64>,
}

impl FatouReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.relative_slack.iter().all(|&s| s >= -tol)
    }
}

pub fn slice_energy_integral(u: &TensorField, pair: [usize; 2], schedule: &[(f64, f64)]) -> Result<FatouReport> {
    u.check_cross(pair)?;
    validate_schedule(schedule)?;
    let spec = &u.spec;
    let trans = u.transverse(pair);
    let pairs = u.cross_pairs();
    let mut lhs = Vec::with_capacity(schedule.len());
    let mut lhs_pair = Vec::with_capacity(schedule.len());
    for &(eps, r) in schedule {
        let mut total = NeumaierSum::new();
        let mut own = 0.0;
        for &p in &pairs {
            let v = cross_integral(u, p, eps, r)?;
            if p == pair {
                own = v;
            }
            total.add(v);
        }
        lhs.push(total.value());
        lhs_pair.push(own);
    }
    let t_cell: f64 = trans.iter().map(|&a| spec.spacing(a)).product();
    let rhs: Vec<f64> = schedule
        .iter()
        .map(|&(eps, r)| {
            grid_steps(spec, pair, r)?;
            let dom = restricted_domain(spec, eps);
            let ranges: Vec<_> = trans.iter().map(|&a| dom.ranges[a].clone()).collect();
            let offsets = product(&ranges);
            let vals: Vec<Result<f64>> = offsets
                .par_iter()
                .map(|off| Ok(energy_second(&slice(u, pair, off)?, &[(eps, r)], 1.0)?.values[0]))
                .collect();
            let mut acc = NeumaierSum::new();
            for v in vals {
                acc.add(v?);
            }
            Ok(acc.value() * t_cell)
        })
        .collect::<Result<_>>()?;
    let relative_slack = lhs
        .iter()
        .zip(&rhs)
        .map(|(&l, &r)| if l == 0.0 && r == 0.0 { 0.0 } else { (l - r) / l.abs().max(r.abs()) })
        .collect();
    Ok(FatouReport { pair, schedule: schedule.to_vec(), lhs, lhs_pair, rhs, relative_slack })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceRow {
    pub offset: Vec<usize>,
    pub coords: Vec<f64>,
    /// `ℰ″` of the slice at each schedule step.
    pub energy_second: Vec<f64>,
    pub atoms: AtomSet,
    pub theta_mass: f64,
    /// The slice's total variation is captured by atoms up to `tol`.
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceReport {
    pub pair: [usize; 2],
    pub sign: i32,
    pub theta: f64,
    pub rows: Vec<SliceRow>,
    /// Trapezoid weight of each row, `Π h_t` times ½ per boundary axis.
    pub weights: Vec<f64>,
    pub aggregate_energy: Vec<f64>,
    /// `∫ θ-mass dx^ᾱ` over resolved slices.
    pub aggregate_theta_mass: f64,
    /// Transverse measure of unresolved slices.
    pub excluded_measure: f64,
}

fn transverse_weight(spec: &GridSpec, trans: &[usize], offset: &[usize]) -> f64 {
    trans
        .iter()
        .zip(offset)
        .map(|(&a, &i)| {
            let n = spec.nodes(a);
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            w * spec.spacing(a)
        })
        .product()
}

pub fn slice_report(
    u: &TensorField,
    pair: [usize; 2],
    schedule: &[(f64, f64)],
    theta: f64,
    tol: f64,
) -> Result<SliceReport> {
    let sign = u.pair_sign(pair)?;
    if !schedule.is_empty() {
        validate_schedule(schedule)?;
    }
    let spec = &u.spec;
    let trans = u.transverse(pair);
    let offsets = u.offsets(pair);
    let rows: Vec<Result<SliceRow>> = offsets
        .par_iter()
        .map(|off| {
            let s = slice(u, pair, off)?;
            let energy = if schedule.is_empty() { Vec::new() } else { energy_second(&s, schedule, 1.0)?.values };
            let atoms = extract_atoms(&defect_measure(&s), tol)?;
            let tm = theta_mass(&atoms, theta)?;
            Ok(SliceRow {
                coords: trans.iter().zip(off).map(|(&a, &i)| spec.coord(a, i)).collect(),
                offset: off.clone(),
                energy_second: energy,
                resolved: atoms.residual <= tol,
                atoms,
                theta_mass: tm,
            })
        })
        .collect();
    let rows: Vec<SliceRow> = rows.into_iter().collect::<Result<_>>()?;
    let weights: Vec<f64> = offsets.iter().map(|off| transverse_weight(spec, &trans, off)).collect();
    let mut aggregate_energy = Vec::with_capacity(schedule.len());
    for k in 0..schedule.len() {
        let mut acc = NeumaierSum::new();
        for (row, w) in rows.iter().zip(&weights) {
            acc.add(w * row.energy_second[k]);
        }
        aggregate_energy.push(acc.value());
    }
    let mut tm = NeumaierSum::new();
    let mut excluded = NeumaierSum::new();
    for (row, &w) in rows.iter().zip(&weights) {
        if row.resolved {
            tm.add(w * row.theta_mass);
        } else {
            excluded.add(w);
        }
    }
    Ok(SliceReport {
        pair,
        sign,
        theta,
        rows,
        weights,
        aggregate_energy,
        aggregate_theta_mass: tm.value(),
        excluded_measure: excluded.value(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorMass {
    pub theta: f64,
    pub per_pair: Vec<([usize; 2], f64)>,
    pub total: f64,
    pub resolved_fraction: f64,
    pub excluded_measure: f64,
}

/// `Σ_α ∫ M_θ(slice atoms) dx^ᾱ`, the slice-aggregated surrogate for the
/// θ-mass of `μ[u]`.
pub fn tensor_mass_estimate(u: &TensorField, theta: f64, tol: f64) -> Result<TensorMass> {
    let mut per_pair = Vec::new();
    let mut total = NeumaierSum::new();
    let mut rows = 0usize;
    let mut resolved = 0usize;
    let mut excluded = NeumaierSum::new();
    for pair in u.cross_pairs() {
        let rep = slice_report(u, pair, &[], theta, tol)?;
        rows += rep.rows.len();
        resolved += rep.rows.iter().filter(|r| r.resolved).count();
        excluded.add(rep.excluded_measure);
        total.add(rep.aggregate_theta_mass);
        per_pair.push((pair, rep.aggregate_theta_mass));
    }
    let resolved_fraction = resolved as f64 / rows as f64;
    if resolved_fraction < 0.9 {
        return Err(LabError::InvalidParameter(format!(
            "only {:.1}% of slices resolve into atoms at tolerance {tol}",
            100.0 * resolved_fraction
        )));
    }
    Ok(TensorMass { theta, per_pair, total: total.value(), resolved_fraction, excluded_measure: excluded.value() })
}
