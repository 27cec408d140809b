//! Deterministic quadrature for the nonlocal energies
//!
//! ```text
//! ℰ_ε(u) = ∫_{Ω^ε} ∫ |Du(x,z₁)|^θ₁ |Du(x,z₂)|^θ₂ ρ_ε(z) / |z|² dz dx
//! ```
//!
//! and the two discrete quantities built from schedules `(ε_k, r_k)`: the
//! `q`-integrals and the cross-difference integrals.
//!
//! The `z` integral uses an even `M × M` midpoint grid on the reference square
//! `[−1,1]²` restricted to the unit ball, so no node sits at `z = 0`. Kernel
//! weights are renormalized to sum to one on that grid. The `x` integral runs
//! over the nodes of `Ω^ε` with weight `h₁h₂`. Rows are summed in parallel and
//! reduced in row order.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::grid::{restricted_domain, Point, ScalarField, ThetaPair};
use crate::measure::four_point;
use crate::sum::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
pub enum Kernel {
    /// `1_{B₁}/π`.
    #[default]
    UniformBall,
    /// `(3/π)(1 − |z|²)²` on `B₁`.
    Bump,
}

impl Kernel {
    pub fn profile(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        match self {
            Kernel::UniformBall => std::f64::consts::FRAC_1_PI,
            Kernel::Bump => {
                let t = 1.0 - s * s;
                3.0 * std::f64::consts::FRAC_1_PI * t * t
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Kernel::UniformBall => "uniform-ball",
            Kernel::Bump => "bump",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "uniform-ball" | "uniform" => Some(Kernel::UniformBall),
            "bump" => Some(Kernel::Bump),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Quadrature {
    /// Midpoints per axis on the reference square; even and at least 2.
    pub z_points: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { z_points: 64 }
    }
}

impl Quadrature {
    pub fn validate(&self) -> Result<()> {
        if self.z_points < 2 || !self.z_points.is_multiple_of(2) {
            return Err(LabError::InvalidParameter(format!(
                "z_points = {} must be even and at least 2",
                self.z_points
            )));
        }
        Ok(())
    }
}

/// Reference `z` nodes with weights `ρ(ẑ) dẑ / |ẑ|²`.
#[derive(Debug, Clone)]
struct ZRule {
    /// Distinct reference coordinates along one axis.
    coords: Vec<f64>,
    /// `(a, b, weight)` for nodes `(coords[a], coords[b])` inside the ball.
    nodes: Vec<(usize, usize, f64)>,
    raw_mass: f64,
}

impl ZRule {
    fn new(kernel: Kernel, quad: Quadrature) -> Self {
        let m = quad.z_points;
        let d = 2.0 / m as f64;
        let coords: Vec<f64> = (0..m).map(|k| -1.0 + (k as f64 + 0.5) * d).collect();
        let mut raw = Vec::new();
        let mut mass = NeumaierSum::new();
        for b in 0..m {
            for a in 0..m {
                let (x, y) = (coords[a], coords[b]);
                let s2 = x * x + y * y;
                let w = kernel.profile(s2.sqrt()) * d * d;
                if w > 0.0 {
                    mass.add(w);
                    raw.push((a, b, w, s2));
                }
            }
        }
        let total = mass.value();
        let nodes = raw.into_iter().map(|(a, b, w, s2)| (a, b, w / total / s2)).collect();
        Self { coords, nodes, raw_mass: total }
    }
}

/// `∫ρ` on the reference grid before renormalization.
pub fn kernel_raw_mass(kernel: Kernel, quad: Quadrature) -> f64 {
    ZRule::new(kernel, quad).raw_mass
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyValue {
    pub eps: f64,
    pub value: f64,
    /// `Ω^ε` had no nodes; the value is 0 by convention.
    pub empty_domain: bool,
    /// Some off-grid values came from bilinear interpolation.
    pub interpolated: bool,
}

pub fn energy_eps(
    u: &ScalarField,
    eps: f64,
    theta: ThetaPair,
    kernel: Kernel,
    quad: Quadrature,
) -> Result<EnergyValue> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(LabError::InvalidParameter(format!("eps = {eps} must be positive")));
    }
    quad.validate()?;
    let spec = u.spec();
    let dom = restricted_domain(spec, eps);
    if dom.is_empty() {
        return Ok(EnergyValue { eps, value: 0.0, empty_domain: true, interpolated: false });
    }
    let rule = ZRule::new(kernel, quad);
    let (t1, t2) = (theta.theta1(), theta.theta2());
    let shifts: Vec<f64> = rule.coords.iter().map(|c| c * eps).collect();
    let m = shifts.len();
    let inv_eps2 = 1.0 / (eps * eps);
    let (ri, rj) = (dom.ranges[0].clone(), dom.ranges[1].clone());
    let rows: Vec<(f64, bool)> = rj
        .into_par_iter()
        .map(|j| {
            let mut d1 = vec![0.0; m];
            let mut d2 = vec![0.0; m];
            let mut acc = NeumaierSum::new();
            let mut interp = false;
            for i in ri.clone() {
                let x = spec.node(i, j);
                let ux = u.value(i, j);
                let mut any1 = false;
                let mut any2 = false;
                for (a, &s) in shifts.iter().enumerate() {
                    let e1 = u.eval_unchecked([x[0] + s, x[1]]);
                    let e2 = u.eval_unchecked([x[0], x[1] + s]);
                    interp |= e1.interpolated | e2.interpolated;
                    let g1 = (e1.value - ux).abs();
                    let g2 = (e2.value - ux).abs();
                    d1[a] = if g1 == 0.0 { 0.0 } else { g1.powf(t1) };
                    d2[a] = if g2 == 0.0 { 0.0 } else { g2.powf(t2) };
                    any1 |= g1 != 0.0;
                    any2 |= g2 != 0.0;
                }
                if !(any1 && any2) {
                    continue;
                }
                let mut inner = NeumaierSum::new();
                for &(a, b, w) in &rule.nodes {
                    let p = d1[a] * d2[b];
                    if p != 0.0 {
                        inner.add(w * p);
                    }
                }
                acc.add(inner.value());
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
    Ok(EnergyValue { eps, value: total.value() * inv_eps2 * spec.cell_volume(), empty_domain: false, interpolated })
}

/// Index of the first element of the last third of a schedule.
fn tail_start(len: usize) -> usize {
    len - len.div_ceil(3)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub theta: ThetaPair,
    pub kernel: Kernel,
    pub quadrature: Quadrature,
    pub values: Vec<EnergyValue>,
    /// Minimum over the last third of the schedule; an estimate only.
    pub liminf_estimate: f64,
}

pub fn energy_sweep(
    u: &ScalarField,
    eps: &[f64],
    theta: ThetaPair,
    kernel: Kernel,
    quad: Quadrature,
) -> Result<EnergyReport> {
    if eps.is_empty() || eps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(LabError::InvalidParameter("eps schedule must be nonempty and strictly decreasing".into()));
    }
    let values = eps.iter().map(|&e| energy_eps(u, e, theta, kernel, quad)).collect::<Result<Vec<_>>>()?;
    let liminf = values[tail_start(values.len())..].iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    Ok(EnergyReport { theta, kernel, quadrature: quad, values, liminf_estimate: liminf })
}

/// Validates a schedule of pairs `(ε_k, r_k)`: `0 < r_k ≤ ε_k`, `ε_k`
/// strictly decreasing.
pub fn validate_schedule(schedule: &[(f64, f64)]) -> Result<()> {
    if schedule.is_empty() {
        return Err(LabError::InvalidParameter("empty schedule".into()));
    }
    for (k, &(eps, r)) in schedule.iter().enumerate() {
        if !(r > 0.0) || !(eps > 0.0) {
            return Err(LabError::InvalidParameter(format!("step {k}: eps = {eps}, r = {r}")));
        }
        if r > eps {
            return Err(LabError::ScheduleOrder { step: k, r, eps });
        }
    }
    if schedule.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(LabError::InvalidParameter("eps_k must be strictly decreasing".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleValues {
    pub schedule: Vec<(f64, f64)>,
    pub values: Vec<f64>,
    /// Max (for the `q`-integrals) or min (for the cross differences) over
    /// the last third of the schedule.
    pub tail_estimate: f64,
    pub interpolated: bool,
}

/// The four corner values `u(x), u(x+re₁), u(x+re₂), u(x+r(e₁+e₂))`, read
/// from nodes when `r` is a whole number of cells on both axes.
struct Corners<'a> {
    u: &'a ScalarField,
    steps: Option<(usize, usize)>,
    r: f64,
}

impl<'a> Corners<'a> {
    fn new(u: &'a ScalarField, r: f64) -> Self {
        let spec = u.spec();
        let step = |a: usize| {
            let s = r / spec.spacing(a);
            let k = s.round();
            ((s - k).abs() <= 1e-9 * s.max(1.0) && k >= 1.0).then_some(k as usize)
        };
        Self { u, steps: step(0).zip(step(1)), r }
    }

    /// Values at `x + a r e₁ + b r e₂` for `a, b ∈ {0, 1, 2}` as requested.
    fn at(&self, i: usize, j: usize, a: usize, b: usize, interp: &mut bool) -> f64 {
        match self.steps {
            Some((si, sj)) => self.u.value(i + a * si, j + b * sj),
            None => {
                let x: Point = self.u.spec().node(i, j);
                let e = self.u.eval_unchecked([x[0] + a as f64 * self.r, x[1] + b as f64 * self.r]);
                *interp |= e.interpolated;
                e.value
            }
        }
    }
}

fn schedule_integral<F>(u: &ScalarField, eps: f64, r: f64, integrand: F) -> (f64, bool)
where
    F: Fn(&Corners, usize, usize, &mut bool) -> f64 + Sync,
{
    let spec = u.spec();
    let dom = restricted_domain(spec, eps);
    if dom.is_empty() {
        return (0.0, false);
    }
    let corners = Corners::new(u, r);
    let (ri, rj) = (dom.ranges[0].clone(), dom.ranges[1].clone());
    let rows: Vec<(f64, bool)> = rj
        .into_par_iter()
        .map(|j| {
            let mut acc = NeumaierSum::new();
            let mut interp = false;
            for i in ri.clone() {
                let v = integrand(&corners, i, j, &mut interp);
                if v != 0.0 {
                    acc.add(v);
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
    (total.value() * spec.cell_volume() / (r * r), interpolated)
}

fn pow_or_zero(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.abs().powf(p)
    }
}

/// `∫_{Ω^{ε_k}} q(x, r_k(e₁+e₂)) / r_k² dx` for every step, with
/// `q(x,z) = (|Du(x+z₂,z₁)|^θ₁ + |Du(x,z₁)|^θ₁)(|Du(x+z₁,z₂)|^θ₂ + |Du(x,z₂)|^θ₂)`.
pub fn energy_prime(u: &ScalarField, schedule: &[(f64, f64)], theta: ThetaPair) -> Result<ScheduleValues> {
    validate_schedule(schedule)?;
    let (t1, t2) = (theta.theta1(), theta.theta2());
    let mut values = Vec::with_capacity(schedule.len());
    let mut interpolated = false;
    for &(eps, r) in schedule {
        let (v, f) = schedule_integral(u, eps, r, |c, i, j, fl| {
            let u00 = c.at(i, j, 0, 0, fl);
            let u10 = c.at(i, j, 1, 0, fl);
            let u01 = c.at(i, j, 0, 1, fl);
            let u11 = c.at(i, j, 1, 1, fl);
            let a = pow_or_zero(u11 - u01, t1) + pow_or_zero(u10 - u00, t1);
            let b = pow_or_zero(u11 - u10, t2) + pow_or_zero(u01 - u00, t2);
            a * b
        });
        values.push(v);
        interpolated |= f;
    }
    let tail = values[tail_start(values.len())..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ScheduleValues { schedule: schedule.to_vec(), values, tail_estimate: tail, interpolated })
}

/// `∫_{Ω^{ε_k}} |D[Du(·, r_k e₂)](x, r_k e₁)|^p / r_k² dx` for every step;
/// `p = 1` is the standard form. In 2D the cross difference is the four-point
/// mass of `x + [0, r_k)²`.
pub fn energy_second(u: &ScalarField, schedule: &[(f64, f64)], exponent: f64) -> Result<ScheduleValues> {
    validate_schedule(schedule)?;
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(LabError::InvalidParameter(format!("exponent {exponent} must lie in (0, 1]")));
    }
    let mut values = Vec::with_capacity(schedule.len());
    let mut interpolated = false;
    for &(eps, r) in schedule {
        let (v, f) = schedule_integral(u, eps, r, |c, i, j, fl| {
            let m = four_point(c.at(i, j, 1, 1, fl), c.at(i, j, 1, 0, fl), c.at(i, j, 0, 1, fl), c.at(i, j, 0, 0, fl));
            pow_or_zero(m, exponent)
        });
        values.push(v);
        interpolated |= f;
    }
    let tail = values[tail_start(values.len())..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ScheduleValues { schedule: schedule.to_vec(), values, tail_estimate: tail, interpolated })
}

/// Dyadic schedule `ε_k = r_k = base·2^{−k}` for `k = k0..=k1`.
pub fn dyadic_schedule(base: f64, k0: u32, k1: u32) -> Vec<(f64, f64)> {
    (k0..=k1)
        .map(|k| {
            let s = base * 0.5f64.powi(k as i32);
            (s, s)
        })
        .collect()
}
