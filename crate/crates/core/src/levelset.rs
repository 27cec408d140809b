//! Level sets of Lipschitz fields: corner measures `κ_t` of superlevel sets,
//! the layer-cake identity, corner tracking across levels, trace estimates
//! and blow-up statistics.
//!
//! All levels are made generic before use: a level equal to a node value is
//! shifted by a quarter of the local level spacing.

use rayon::prelude::*;
use serde::Serialize;

use crate::counterexample::Counterexample;
use crate::error::{LabError, Result};
use crate::geometry::{rect_disk_overlap, rect_overlap};
use crate::grid::{GridSpec, Point, ScalarField, VectorField};
use crate::measure::{defect_measure, extract_atoms, four_point, AtomSet, CellBox, CellMeasure, MassOracle};
use crate::sum::NeumaierSum;

/// Node indices `[i0, i1] × [j0, j1]`, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Window {
    i0: usize,
    i1: usize,
    j0: usize,
    j1: usize,
}

impl Window {
    fn full(u: &ScalarField) -> Self {
        Self { i0: 0, i1: u.nx() - 1, j0: 0, j1: u.ny() - 1 }
    }

    /// Nodes covering `center ± half`, widened by `margin` nodes and clamped.
    fn around(spec: &GridSpec, center: Point, half: f64, margin: usize) -> Self {
        let range = |axis: usize| {
            let n = spec.nodes(axis);
            let lo = spec.fractional_index(axis, center[axis] - half).floor().max(0.0) as usize;
            let hi = spec.fractional_index(axis, center[axis] + half).ceil().max(0.0) as usize;
            (lo.saturating_sub(margin), (hi + margin).min(n - 1))
        };
        let (i0, i1) = range(0);
        let (j0, j1) = range(1);
        Self { i0, i1, j0, j1 }
    }
}

/// Sorted node values, for genericity checks.
#[derive(Debug, Clone)]
struct Attained(Vec<f64>);

impl Attained {
    fn new(u: &ScalarField) -> Self {
        let mut v = u.values().to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        Self(v)
    }

    fn contains(&self, t: f64) -> bool {
        self.0.binary_search_by(|x| x.total_cmp(&t)).is_ok()
    }

    /// `t`, or `t ± step/4` when `t` is attained; `None` if all three are.
    fn generic(&self, t: f64, step: f64) -> Option<f64> {
        [t, t + 0.25 * step, t - 0.25 * step].into_iter().find(|&s| !self.contains(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Superlevel {
    pub t: f64,
    /// `u > t` at each node.
    pub inside: Vec<bool>,
    /// Crossings of `{u = t}` with horizontal grid lines (vertical boundary pieces).
    pub row_crossings: Vec<Point>,
    /// Crossings with vertical grid lines (horizontal boundary pieces).
    pub column_crossings: Vec<Point>,
}

fn crossing(a: f64, b: f64, t: f64) -> Option<f64> {
    ((a > t) != (b > t)).then(|| (t - a) / (b - a))
}

pub fn superlevel(u: &ScalarField, t: f64) -> Superlevel {
    let spec = u.spec();
    let (nx, ny) = (u.nx(), u.ny());
    let (hx, hy) = (spec.spacing(0), spec.spacing(1));
    let inside = u.values().iter().map(|&v| v > t).collect();
    let mut row_crossings = Vec::new();
    let mut column_crossings = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = spec.node(i, j);
            if i + 1 < nx {
                if let Some(s) = crossing(u.value(i, j), u.value(i + 1, j), t) {
                    row_crossings.push([p[0] + s * hx, p[1]]);
                }
            }
            if j + 1 < ny {
                if let Some(s) = crossing(u.value(i, j), u.value(i, j + 1), t) {
                    column_crossings.push([p[0], p[1] + s * hy]);
                }
            }
        }
    }
    Superlevel { t, inside, row_crossings, column_crossings }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Corner {
    pub position: Point,
    /// `κ_t` at the corner: ±1, or ±2 for an unresolved pair.
    pub sign: i32,
    /// Cell containing the corner.
    pub cell: [usize; 2],
    /// Position comes from boundary crossings rather than the cell centroid.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Kappa {
    pub t: f64,
    pub corners: Vec<Corner>,
    /// Clusters of mass ±2: two corners in one cell at this resolution.
    pub unresolved: Vec<Corner>,
    pub atoms: AtomSet,
}

impl Kappa {
    /// `N(t) = |κ_t|(Ω)`.
    pub fn count(&self) -> usize {
        self.corners.len() + 2 * self.unresolved.len()
    }
}

fn indicator_measure(u: &ScalarField, t: f64, w: Window) -> Result<CellMeasure> {
    let spec = u.spec();
    let lo = spec.node(w.i0, w.j0);
    let hi = spec.node(w.i1, w.j1);
    let sub = GridSpec::rect(lo, hi, [w.i1 - w.i0 + 1, w.j1 - w.j0 + 1])?;
    let mut values = Vec::with_capacity(sub.node_count());
    for j in w.j0..=w.j1 {
        for i in w.i0..=w.i1 {
            values.push(if u.value(i, j) > t { 1.0 } else { 0.0 });
        }
    }
    Ok(defect_measure(&ScalarField::from_values(sub, values)?))
}

/// Mean crossing position of the vertical and horizontal boundary pieces near
/// cell `(ci, cj)`. Grid lines touching the corner cell are skipped when
/// farther ones are available, since the field may kink there.
fn refine_corner(u: &ScalarField, t: f64, ci: usize, cj: usize) -> Option<Point> {
    const REACH: usize = 4;
    let spec = u.spec();
    let (nx, ny) = (u.nx(), u.ny());
    let (hx, hy) = (spec.spacing(0), spec.spacing(1));
    let collect = |along_rows: bool| {
        let (c_line, c_pos, n_line, n_pos) = if along_rows { (cj, ci, ny, nx) } else { (ci, cj, nx, ny) };
        let mut near = Vec::new();
        let mut far = Vec::new();
        let lines = c_line.saturating_sub(REACH - 1)..=(c_line + REACH).min(n_line - 1);
        for line in lines {
            let positions = c_pos.saturating_sub(REACH - 1)..=(c_pos + REACH - 1).min(n_pos - 2);
            for k in positions {
                let (a, b) = if along_rows {
                    (u.value(k, line), u.value(k + 1, line))
                } else {
                    (u.value(line, k), u.value(line, k + 1))
                };
                if let Some(s) = crossing(a, b, t) {
                    let x = if along_rows { spec.coord(0, k) + s * hx } else { spec.coord(1, k) + s * hy };
                    if line == c_line || line == c_line + 1 {
                        near.push(x);
                    } else {
                        far.push(x);
                    }
                }
            }
        }
        let pick = if far.is_empty() { near } else { far };
        (!pick.is_empty()).then(|| pick.iter().sum::<f64>() / pick.len() as f64)
    };
    Some([collect(true)?, collect(false)?])
}

fn kappa_window(u: &ScalarField, t: f64, w: Window) -> Result<Kappa> {
    let m = indicator_measure(u, t, w)?;
    let atoms = extract_atoms(&m, 0.5)?;
    let sub = m.spec();
    let mut corners = Vec::new();
    let mut unresolved = Vec::new();
    for a in &atoms.atoms {
        let k = a.mass.round();
        if (a.mass - k).abs() > 1e-9 || !(k.abs() == 1.0 || k.abs() == 2.0) {
            return Err(LabError::DegenerateLevel { t, mass: a.mass });
        }
        let cell = |axis: usize| {
            let f = sub.fractional_index(axis, a.position[axis]).floor().max(0.0) as usize;
            f.min(sub.nodes(axis) - 2)
        };
        let (ci, cj) = (cell(0) + w.i0, cell(1) + w.j0);
        let refined = if k.abs() == 1.0 { refine_corner(u, t, ci, cj) } else { None };
        let corner = Corner {
            position: refined.unwrap_or(a.position),
            sign: k as i32,
            cell: [ci, cj],
            refined: refined.is_some(),
        };
        if k.abs() == 1.0 {
            corners.push(corner);
        } else {
            unresolved.push(corner);
        }
    }
    Ok(Kappa { t, corners, unresolved, atoms })
}

/// `κ_t = ∂₁∂₂ 1_{u > t}` as signed corners. `t` must not be a node value.
pub fn kappa(u: &ScalarField, t: f64) -> Result<Kappa> {
    if Attained::new(u).contains(t) {
        return Err(LabError::DegenerateLevel { t, mass: f64::NAN });
    }
    kappa_window(u, t, Window::full(u))
}

/// Levels strictly between consecutive distinct node values.
pub fn generic_levels(u: &ScalarField) -> Vec<f64> {
    Attained::new(u).0.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSetSlice {
    pub t: f64,
    pub corners: Vec<Corner>,
    pub unresolved: Vec<Corner>,
    /// `N(t) = Σ|κ_t(x)|`.
    pub count: usize,
    /// `H¹(Γ_t)` from crossing counts.
    pub perimeter: f64,
    /// `|ω_t|` by the trapezoid rule on the indicator.
    pub area: f64,
    /// `|ω_t ∩ Q|` for each requested window.
    pub window_areas: Vec<f64>,
}

fn trapezoid_weight(n: usize, i: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

fn indicator_area(u: &ScalarField, inside: &[bool], b: &CellBox) -> f64 {
    let spec = u.spec();
    let nx = u.nx();
    let (ni, nj) = (b.hi[0] - b.lo[0] + 1, b.hi[1] - b.lo[1] + 1);
    let mut acc = NeumaierSum::new();
    for j in b.lo[1]..=b.hi[1] {
        for i in b.lo[0]..=b.hi[0] {
            if inside[i + nx * j] {
                acc.add(trapezoid_weight(ni, i - b.lo[0]) * trapezoid_weight(nj, j - b.lo[1]));
            }
        }
    }
    acc.value() * spec.cell_volume()
}

pub fn level_slice(u: &ScalarField, t: f64, windows: &[CellBox]) -> Result<LevelSetSlice> {
    let k = kappa(u, t)?;
    let s = superlevel(u, t);
    let spec = u.spec();
    let perimeter = s.row_crossings.len() as f64 * spec.spacing(1) + s.column_crossings.len() as f64 * spec.spacing(0);
    let full = CellBox::new([0, 0], [u.nx() - 1, u.ny() - 1])?;
    for w in windows {
        if w.hi[0] >= u.nx() || w.hi[1] >= u.ny() {
            return Err(LabError::InvalidParameter(format!("window {w:?} exceeds the grid")));
        }
    }
    Ok(LevelSetSlice {
        t,
        count: k.count(),
        corners: k.corners,
        unresolved: k.unresolved,
        perimeter,
        area: indicator_area(u, &s.inside, &full),
        window_areas: windows.iter().map(|w| indicator_area(u, &s.inside, w)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerCake {
    /// `|μ|(A)`.
    pub lhs: f64,
    /// `∫|κ_t|(A) dt` by the midpoint rule.
    pub rhs: f64,
    pub rel_error: f64,
    /// `μ(A)` and `∫κ_t(A) dt`; these agree for any field, Lipschitz or not.
    pub signed_lhs: f64,
    pub signed_rhs: f64,
    pub levels: usize,
    /// `(index, shifted level)` for quadrature levels that were attained.
    pub perturbed: Vec<(usize, f64)>,
}

/// `(|κ_t|(A), κ_t(A))` cell by cell.
fn kappa_masses(u: &ScalarField, t: f64, a: &CellBox) -> (f64, f64) {
    let mut abs = 0.0;
    let mut signed = 0.0;
    for j in a.lo[1]..a.hi[1] {
        for i in a.lo[0]..a.hi[0] {
            let ind = |i: usize, j: usize| if u.value(i, j) > t { 1.0 } else { 0.0 };
            let c = four_point(ind(i + 1, j + 1), ind(i + 1, j), ind(i, j + 1), ind(i, j));
            abs += c.abs();
            signed += c;
        }
    }
    (abs, signed)
}

pub fn layer_cake_check(u: &ScalarField, a: &CellBox, levels: usize) -> Result<LayerCake> {
    if levels == 0 {
        return Err(LabError::InvalidParameter("at least one level is required".into()));
    }
    if a.hi[0] >= u.nx() || a.hi[1] >= u.ny() {
        return Err(LabError::InvalidParameter(format!("box {a:?} exceeds the grid")));
    }
    let m = defect_measure(u);
    let lhs = m.abs_mass(a)?;
    let signed_lhs = m.box_mass(a)?;
    let (lo, hi) = u.min_max();
    let dt = (hi - lo) / levels as f64;
    let attained = Attained::new(u);
    type Level = ((f64, f64), Option<(usize, f64)>);
    let per_level: Vec<Level> = (0..levels)
        .into_par_iter()
        .map(|k| {
            let t0 = lo + (k as f64 + 0.5) * dt;
            let t = attained.generic(t0, dt).unwrap_or(t0);
            let shifted = (t != t0).then_some((k, t));
            (kappa_masses(u, t, a), shifted)
        })
        .collect();
    let mut acc = NeumaierSum::new();
    let mut sacc = NeumaierSum::new();
    let mut perturbed = Vec::new();
    for ((m, sm), p) in per_level {
        acc.add(m * dt);
        sacc.add(sm * dt);
        perturbed.extend(p);
    }
    let rhs = acc.value();
    let rel_error = if lhs == 0.0 && rhs == 0.0 { 0.0 } else { (lhs - rhs).abs() / lhs.abs().max(rhs.abs()) };
    Ok(LayerCake { lhs, rhs, rel_error, signed_lhs, signed_rhs: sacc.value(), levels, perturbed })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackSample {
    pub t: f64,
    pub position: Point,
    pub sign: i32,
}

/// Componentwise least-squares line `x(t) ≈ intercept + slope·(t − t̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: [f64; 2],
    pub intercept: Point,
    /// RMS residual over both components.
    pub residual: f64,
    pub count: usize,
}

fn fit(samples: &[TrackSample], t_center: f64) -> Option<LinearFit> {
    if samples.len() < 3 {
        return None;
    }
    let n = samples.len() as f64;
    let tm = samples.iter().map(|s| s.t - t_center).sum::<f64>() / n;
    let stt: f64 = samples.iter().map(|s| (s.t - t_center - tm).powi(2)).sum();
    if stt == 0.0 {
        return None;
    }
    let mut slope = [0.0; 2];
    let mut intercept = [0.0; 2];
    let mut sq = 0.0;
    for l in 0..2 {
        let xm = samples.iter().map(|s| s.position[l]).sum::<f64>() / n;
        let stx: f64 = samples.iter().map(|s| (s.t - t_center - tm) * (s.position[l] - xm)).sum();
        slope[l] = stx / stt;
        intercept[l] = xm - slope[l] * tm;
        sq += samples.iter().map(|s| (s.position[l] - intercept[l] - slope[l] * (s.t - t_center)).powi(2)).sum::<f64>();
    }
    Some(LinearFit { slope, intercept, residual: (sq / (2.0 * n)).sqrt(), count: samples.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackSettings {
    pub samples: usize,
    /// Half-side of the tracking square; defaults to the window width.
    pub half_side: Option<f64>,
    /// Relative tolerance for one-sided slopes to count as equal.
    pub jump_tol: f64,
}

impl Default for TrackSettings {
    fn default() -> Self {
        Self { samples: 41, half_side: None, jump_tol: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerTrack {
    pub center: Point,
    pub window: [f64; 2],
    pub half_side: f64,
    /// Generic level used for the central corner.
    pub t_center: f64,
    pub corner_center: Corner,
    pub samples: Vec<TrackSample>,
    pub levels_tried: usize,
    /// Levels without exactly one corner in the tracking square (or with a
    /// degenerate cluster).
    pub rejected_count: usize,
    /// Levels whose corner failed the speed gate.
    pub rejected_gate: usize,
    pub matched_fraction: f64,
    /// Two-sided fit; `h′ = fit.slope`.
    pub fit: LinearFit,
    pub below: Option<LinearFit>,
    pub above: Option<LinearFit>,
    pub jump_detected: bool,
}

impl CornerTrack {
    pub fn h_prime(&self) -> [f64; 2] {
        self.fit.slope
    }

    pub fn two_sided_consistent(&self) -> bool {
        !self.jump_detected
    }
}

pub fn track_corners(u: &ScalarField, center: Point, window: [f64; 2], samples: usize) -> Result<CornerTrack> {
    track_corners_with(u, center, window, TrackSettings { samples, ..TrackSettings::default() })
}

pub fn track_corners_with(
    u: &ScalarField,
    center: Point,
    window: [f64; 2],
    settings: TrackSettings,
) -> Result<CornerTrack> {
    let [wlo, whi] = window;
    if !(whi > wlo) || settings.samples < 3 {
        return Err(LabError::InvalidParameter(format!(
            "window {window:?} must be increasing and samples ({}) at least 3",
            settings.samples
        )));
    }
    let half_side = settings.half_side.unwrap_or(whi - wlo);
    let spec = u.spec();
    let win = Window::around(spec, center, half_side, 6);
    let in_square = |p: Point| (p[0] - center[0]).abs() < half_side && (p[1] - center[1]).abs() < half_side;
    let attained = Attained::new(u);
    let dt = (whi - wlo) / settings.samples as f64;
    let single = |t: f64| -> Result<Option<Corner>> {
        let k = kappa_window(u, t, win)?;
        let inside: Vec<&Corner> = k.corners.iter().filter(|c| in_square(c.position)).collect();
        let pairs = k.unresolved.iter().filter(|c| in_square(c.position)).count();
        Ok((inside.len() == 1 && pairs == 0).then(|| *inside[0]))
    };

    let t_mid = 0.5 * (wlo + whi);
    let t_center = attained.generic(t_mid, dt).unwrap_or(t_mid);
    let corner_center = single(t_center)?.ok_or_else(|| {
        LabError::TrackFailure(format!("no unique corner within {half_side} of {center:?} at t = {t_center}"))
    })?;

    let levels: Vec<f64> = (0..settings.samples)
        .map(|k| {
            let t = wlo + (k as f64 + 0.5) * dt;
            attained.generic(t, dt).unwrap_or(t)
        })
        .collect();
    let found: Vec<Result<Option<Corner>>> = levels.par_iter().map(|&t| single(t)).collect();

    // Speed gate |x_l(t) − x_l(s)| ≥ |t − s|/L, folded outward from the
    // window centre on each side so a kink at the centre splits the track.
    let lip = u.lipschitz().unwrap_or(1.0).max(f64::MIN_POSITIVE);
    let slack = 0.01 * spec.spacing(0).max(spec.spacing(1));
    let mut rejected_count = 0;
    let mut rejected_gate = 0;
    let mut found: Vec<(f64, Option<Corner>)> = levels.iter().zip(found).map(|(&t, c)| (t, c.ok().flatten())).collect();
    rejected_count += found.iter().filter(|(_, c)| c.is_none()).count();
    found.retain(|(_, c)| c.is_some());
    let split = found.partition_point(|(t, _)| *t < t_mid);
    let mut gate = |side: &mut dyn Iterator<Item = &(f64, Option<Corner>)>| {
        let mut kept: Vec<TrackSample> = Vec::new();
        for &(t, c) in side {
            let c = c.expect("filtered above");
            if let Some(prev) = kept.last() {
                let need = (t - prev.t).abs() / lip * (1.0 - 1e-6) - slack;
                if (0..2).any(|l| (c.position[l] - prev.position[l]).abs() < need) {
                    rejected_gate += 1;
                    continue;
                }
            }
            kept.push(TrackSample { t, position: c.position, sign: c.sign });
        }
        kept
    };
    let mut below = gate(&mut found[..split].iter().rev());
    below.reverse();
    let above = gate(&mut found[split..].iter());
    let mut matched = below.clone();
    matched.extend(above.iter().copied());
    let two = fit(&matched, t_center)
        .ok_or_else(|| LabError::TrackFailure(format!("only {} levels matched", matched.len())))?;
    let (below, above) = (fit(&below, t_center), fit(&above, t_center));
    let jump_detected = match (&below, &above) {
        (Some(b), Some(a)) => (0..2).any(|l| {
            let scale = b.slope[l].abs().max(a.slope[l].abs()).max(f64::MIN_POSITIVE);
            (b.slope[l] - a.slope[l]).abs() > settings.jump_tol * scale
        }),
        _ => false,
    };
    Ok(CornerTrack {
        center,
        window,
        half_side,
        t_center,
        corner_center,
        matched_fraction: matched.len() as f64 / settings.samples as f64,
        samples: matched,
        levels_tried: settings.samples,
        rejected_count,
        rejected_gate,
        fit: two,
        below,
        above,
        jump_detected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Traces {
    /// `1/h′_l`.
    pub from_velocity: [f64; 2],
    /// Mean crossing slopes of `u` along the boundary pieces leaving the corner.
    pub from_gradient: Option<[f64; 2]>,
    pub v_inf: [f64; 2],
    /// `|v₁||v₂|/|v|`.
    pub density: f64,
    /// Largest relative gap between the two estimates.
    pub discrepancy: f64,
    pub consistent: bool,
}

/// Crossing slopes along the boundary pieces at the corner, skipping the
/// three grid lines nearest to it.
fn gradient_traces(u: &ScalarField, t: f64, corner: &Corner) -> Option<[f64; 2]> {
    const SKIP: usize = 3;
    const REACH: usize = 16;
    let spec = u.spec();
    let (nx, ny) = (u.nx(), u.ny());
    let [ci, cj] = corner.cell;
    let mut out = [0.0; 2];
    for (axis, out_l) in out.iter_mut().enumerate() {
        // axis 0: rows crossed by the vertical piece x₁ = a; slopes ∂₁u
        let (c_line, n_line, n_pos) = if axis == 0 { (cj, ny, nx) } else { (ci, nx, ny) };
        let a = corner.position[axis];
        let h = spec.spacing(axis);
        let mut slopes = Vec::new();
        for line in c_line.saturating_sub(REACH)..(c_line + 2 + REACH).min(n_line) {
            // distance in grid lines from the corner cell
            let dist = if line <= c_line { c_line - line } else { line - c_line - 1 };
            if dist < SKIP {
                continue;
            }
            let k0 = spec.fractional_index(axis, a).floor();
            if k0 < 0.0 {
                continue;
            }
            let k0 = k0 as usize;
            for k in k0.saturating_sub(1)..=(k0 + 1).min(n_pos - 2) {
                let (x, y) = if axis == 0 {
                    (u.value(k, line), u.value(k + 1, line))
                } else {
                    (u.value(line, k), u.value(line, k + 1))
                };
                if crossing(x, y, t).is_some() {
                    slopes.push((y - x) / h);
                    break;
                }
            }
        }
        if slopes.is_empty() {
            return None;
        }
        *out_l = slopes.iter().sum::<f64>() / slopes.len() as f64;
    }
    Some(out)
}

pub fn estimate_traces(u: &ScalarField, track: &CornerTrack) -> Result<Traces> {
    if track.jump_detected {
        return Err(LabError::TrackFailure("one-sided velocities disagree; traces are not defined".into()));
    }
    let h = track.h_prime();
    if h.contains(&0.0) {
        return Err(LabError::TrackFailure(format!("degenerate velocity {h:?}")));
    }
    let from_velocity = [1.0 / h[0], 1.0 / h[1]];
    let from_gradient = gradient_traces(u, track.t_center, &track.corner_center);
    let v = from_gradient.unwrap_or(from_velocity);
    let discrepancy = match from_gradient {
        Some(g) => {
            (0..2).map(|l| (g[l] - from_velocity[l]).abs() / g[l].abs().max(from_velocity[l].abs())).fold(0.0, f64::max)
        }
        None => f64::NAN,
    };
    Ok(Traces {
        from_velocity,
        from_gradient,
        v_inf: v,
        density: v[0].abs() * v[1].abs() / v[0].hypot(v[1]),
        discrepancy,
        consistent: discrepancy <= 0.02,
    })
}

/// Source of the quantities recorded under blow-up.
pub trait BlowupSource: MassOracle {
    /// `(1/|Q_r|) ∫_{Q_r(c)} |v_l|`, `None` when the square leaves the domain.
    fn square_fractions(&self, center: Point, radius: f64) -> Option<[f64; 2]>;
    /// `(1/|B_r|) ∫_{B_r(c)} |v_l|`, `None` when the ball leaves the domain.
    fn ball_fractions(&self, center: Point, radius: f64) -> Option<[f64; 2]>;
}

/// `v = ∇u` with cellwise difference quotients, paired with `μ[u]`.
pub struct GradientSource<'a> {
    field: &'a ScalarField,
    measure: CellMeasure,
}

impl<'a> GradientSource<'a> {
    pub fn new(field: &'a ScalarField) -> Self {
        Self { field, measure: defect_measure(field) }
    }

    pub fn measure(&self) -> &CellMeasure {
        &self.measure
    }

    fn weighted<W: Fn(Point, Point) -> f64 + Sync>(&self, lo: Point, hi: Point, weight: W) -> Option<[f64; 2]> {
        let spec = self.field.spec();
        if lo[0] < spec.origin(0) || lo[1] < spec.origin(1) || hi[0] > spec.upper(0) || hi[1] > spec.upper(1) {
            return None;
        }
        let (hx, hy) = (spec.spacing(0), spec.spacing(1));
        let cells = |axis: usize, a: f64, b: f64| {
            let n = spec.nodes(axis) - 1;
            let s = spec.fractional_index(axis, a).floor().max(0.0) as usize;
            let e = (spec.fractional_index(axis, b).ceil().max(0.0) as usize).min(n);
            s.min(n)..e
        };
        let u = self.field;
        let rows: Vec<[f64; 3]> = cells(1, lo[1], hi[1])
            .into_par_iter()
            .map(|j| {
                let mut acc = [NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new()];
                for i in cells(0, lo[0], hi[0]) {
                    let a = spec.node(i, j);
                    let w = weight(a, [a[0] + hx, a[1] + hy]);
                    if w == 0.0 {
                        continue;
                    }
                    let g1 =
                        0.5 * ((u.value(i + 1, j) - u.value(i, j)) + (u.value(i + 1, j + 1) - u.value(i, j + 1))) / hx;
                    let g2 =
                        0.5 * ((u.value(i, j + 1) - u.value(i, j)) + (u.value(i + 1, j + 1) - u.value(i + 1, j))) / hy;
                    acc[0].add(w * g1.abs());
                    acc[1].add(w * g2.abs());
                    acc[2].add(w);
                }
                [acc[0].value(), acc[1].value(), acc[2].value()]
            })
            .collect();
        let mut tot = [NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new()];
        for r in rows {
            for l in 0..3 {
                tot[l].add(r[l]);
            }
        }
        let area = tot[2].value();
        (area > 0.0).then(|| [tot[0].value() / area, tot[1].value() / area])
    }
}

impl MassOracle for GradientSource<'_> {
    fn ball_mass(&self, center: Point, radius: f64) -> Option<f64> {
        self.measure.ball_mass(center, radius)
    }

    fn square_mass(&self, center: Point, radius: f64) -> Option<f64> {
        self.measure.square_mass(center, radius)
    }
}

impl BlowupSource for GradientSource<'_> {
    fn square_fractions(&self, c: Point, r: f64) -> Option<[f64; 2]> {
        let (lo, hi) = ([c[0] - r, c[1] - r], [c[0] + r, c[1] + r]);
        self.weighted(lo, hi, |a, b| rect_overlap(a, b, lo, hi))
    }

    fn ball_fractions(&self, c: Point, r: f64) -> Option<[f64; 2]> {
        let (lo, hi) = ([c[0] - r, c[1] - r], [c[0] + r, c[1] + r]);
        self.weighted(lo, hi, |a, b| rect_disk_overlap(a, b, c, r))
    }
}

/// Resolution of the midpoint rules used for the analytic counterexample.
pub const COUNTEREXAMPLE_BLOWUP_POINTS: usize = 256;

impl BlowupSource for Counterexample {
    fn square_fractions(&self, c: Point, r: f64) -> Option<[f64; 2]> {
        let n = COUNTEREXAMPLE_BLOWUP_POINTS;
        let h = 2.0 / n as f64;
        let rows: Vec<Option<[f64; 2]>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut s = [NeumaierSum::new(), NeumaierSum::new()];
                for i in 0..n {
                    let p = [c[0] + r * (-1.0 + (i as f64 + 0.5) * h), c[1] + r * (-1.0 + (j as f64 + 0.5) * h)];
                    let v = self.eval(p).ok()?.v;
                    s[0].add(v[0].abs());
                    s[1].add(v[1].abs());
                }
                Some([s[0].value(), s[1].value()])
            })
            .collect();
        let mut t = [NeumaierSum::new(), NeumaierSum::new()];
        for row in rows {
            let [a, b] = row?;
            t[0].add(a);
            t[1].add(b);
        }
        let count = (n * n) as f64;
        Some([t[0].value() / count, t[1].value() / count])
    }

    fn ball_fractions(&self, c: Point, r: f64) -> Option<[f64; 2]> {
        Counterexample::ball_fractions(self, c, r, COUNTEREXAMPLE_BLOWUP_POINTS).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowupEntry {
    pub radius: f64,
    /// `|μ|(Q_r(x*))/r` with `Q_r(x*) = x* + (−r, r)²`.
    pub mass_ratio: Option<f64>,
    pub square_fractions: Option<[f64; 2]>,
    pub ball_fractions: Option<[f64; 2]>,
}

impl BlowupEntry {
    pub fn flagged(&self) -> bool {
        self.mass_ratio.is_none() || self.square_fractions.is_none() || self.ball_fractions.is_none()
    }
}

pub fn blowup<S: BlowupSource + ?Sized>(src: &S, center: Point, radii: &[f64]) -> Result<Vec<BlowupEntry>> {
    if radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(LabError::InvalidParameter("radii must be positive and finite".into()));
    }
    Ok(radii
        .iter()
        .map(|&r| BlowupEntry {
            radius: r,
            mass_ratio: src.square_mass(center, r).map(|m| m / r),
            square_fractions: src.square_fractions(center, r),
            ball_fractions: src.ball_fractions(center, r),
        })
        .collect())
}

/// `u^{x*,r}(y) = u(x* + r y)/r` on the correspondingly rescaled grid, so that
/// `∇u^{x*,r}(y) = v(x* + r y)`.
pub fn rescaled_field(u: &ScalarField, center: Point, r: f64) -> Result<ScalarField> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(LabError::InvalidParameter(format!("radius {r} must be positive")));
    }
    let spec = u.spec();
    let scaled = GridSpec::new(
        vec![(spec.origin(0) - center[0]) / r, (spec.origin(1) - center[1]) / r],
        vec![spec.side(0) / r, spec.side(1) / r],
        vec![u.nx(), u.ny()],
    )?;
    ScalarField::from_values(scaled, u.values().iter().map(|v| v / r).collect())
}

/// `∫_Ω |v₁ v₂|` by the trapezoid rule on the nodes.
pub fn inclusion_residual(v: &VectorField) -> f64 {
    let spec = v.spec();
    let (nx, ny) = (spec.nodes(0), spec.nodes(1));
    let (a, b) = (v.v1(), v.v2());
    let rows: Vec<f64> = (0..ny)
        .into_par_iter()
        .map(|j| {
            let mut acc = NeumaierSum::new();
            for i in 0..nx {
                let k = i + nx * j;
                let p = (a[k] * b[k]).abs();
                if p != 0.0 {
                    acc.add(trapezoid_weight(nx, i) * p);
                }
            }
            trapezoid_weight(ny, j) * acc.value()
        })
        .collect();
    let mut acc = NeumaierSum::new();
    acc.extend(rows);
    acc.value() * spec.cell_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery;
    use crate::grid::sample;

    fn unit(n: usize) -> GridSpec {
        GridSpec::square(-1.0, 1.0, n).unwrap()
    }

    #[test]
    fn superlevel_of_roof_is_a_quadrant() {
        let u = gallery::roof(&unit(33)).unwrap().field;
        let s = superlevel(&u, 0.0);
        let spec = u.spec();
        for j in 0..33 {
            for i in 0..33 {
                let p = spec.node(i, j);
                assert_eq!(s.inside[i + 33 * j], p[0] > 0.0 && p[1] > 0.0);
            }
        }
        assert!(superlevel(&u, -2.0).inside.iter().all(|&b| b));
    }

    #[test]
    fn roof_has_one_corner_per_level() {
        let u = gallery::roof(&unit(129)).unwrap().field;
        let k = kappa(&u, 0.3).unwrap();
        assert_eq!(k.corners.len(), 1);
        let c = k.corners[0];
        assert_eq!(c.sign, 1);
        assert!(c.refined);
        assert!((c.position[0] - 0.3).abs() < 1e-12 && (c.position[1] - 0.3).abs() < 1e-12, "{:?}", c.position);
    }

    #[test]
    fn attained_levels_are_rejected() {
        let u = gallery::roof(&unit(17)).unwrap().field;
        assert!(matches!(kappa(&u, 0.25), Err(LabError::DegenerateLevel { .. })));
        assert_eq!(generic_levels(&u).len(), 16);
    }

    #[test]
    fn stripe_field_has_no_corners() {
        let u = sample(|p| if p[1] > 0.1 && p[1] < 0.4 { 1.0 } else { 0.0 }, &unit(65).offset_for_discontinuities())
            .unwrap();
        assert_eq!(kappa(&u, 0.5).unwrap().count(), 0);
    }

    #[test]
    fn layer_cake_on_roof() {
        let u = gallery::roof(&unit(129)).unwrap().field;
        let lc = layer_cake_check(&u, &CellBox::new([0, 0], [128, 128]).unwrap(), 1024).unwrap();
        assert!((lc.lhs - 2.0).abs() < 1e-12);
        assert!(lc.rel_error < 1e-3, "{lc:?}");
    }

    #[test]
    fn roof_track_and_traces() {
        let u = gallery::roof(&unit(257)).unwrap().field;
        let tr = track_corners(&u, [0.3, 0.3], [0.2, 0.4], 41).unwrap();
        assert_eq!(tr.samples.len(), 41);
        for l in 0..2 {
            assert!((tr.h_prime()[l] - 1.0).abs() < 1e-9);
        }
        assert!(!tr.jump_detected);
        let t = estimate_traces(&u, &tr).unwrap();
        assert!(t.consistent);
        assert!((t.density - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn inclusion_residual_controls() {
        let grid = unit(65);
        let ones = VectorField::sample(|_| [1.0, 1.0], &grid).unwrap();
        assert!((inclusion_residual(&ones) - 4.0).abs() < 1e-12);
        assert_eq!(inclusion_residual(&gallery::roof_gradient(&grid).unwrap()), 0.0);
    }

    #[test]
    fn dyadic_rescaling_is_exact() {
        let u = gallery::roof(&unit(65)).unwrap().field;
        let m = defect_measure(&u);
        let r = 0.25;
        let ur = rescaled_field(&u, [0.1, -0.2], r).unwrap();
        let mr = defect_measure(&ur);
        for (lo, hi) in [([0, 0], [64, 64]), ([10, 12], [40, 33]), ([30, 30], [31, 31])] {
            let b = CellBox::new(lo, hi).unwrap();
            assert_eq!(mr.box_mass(&b).unwrap(), m.box_mass(&b).unwrap() / r);
        }
    }
}
