//! Named fields for configuration files.

use std::sync::Arc;

use defectlab::counterexample::{Counterexample, CounterexampleSpec};
use defectlab::gallery::{
    self, AxisPolygonSpec, DiscreteMeasure, GalleryField, GroundTruth, PointMass, Stripe, StripeAxis,
};
use defectlab::grid::{sample, Samples1d};
use defectlab::slicing::TensorField;
use defectlab::{GridSpec, Point, Result, ScalarField};

use crate::config::{FieldConfig, SecondFactor};

/// Families usable only by the slicing experiment.
pub const TENSOR_FAMILIES: &[(&str, &str)] =
    &[("quadrant-stack", "3D/4D stack of quadrant indicators whose corner moves with the transverse axes")];

pub fn all() -> impl Iterator<Item = (&'static str, &'static str)> {
    gallery::FAMILIES.iter().chain(TENSOR_FAMILIES).copied()
}

pub fn find(name: &str) -> Option<&'static str> {
    all().find(|(n, _)| *n == name).map(|(n, _)| n)
}

/// A planar field with whatever is known about its defect measure.
#[derive(Debug, Clone)]
pub struct Built {
    pub family: &'static str,
    pub field: ScalarField,
    /// `None` when the measure has no closed form in [`GroundTruth`] terms.
    pub truth: Option<GroundTruth>,
    pub indicator: bool,
    /// Depends on one variable only, so every energy vanishes.
    pub one_variable: bool,
    pub counterexample: Option<Counterexample>,
    /// Default `(center, t-window)` for corner tracking.
    pub track: Option<(Point, [f64; 2])>,
}

impl Built {
    fn from_gallery(g: GalleryField) -> Self {
        Self {
            family: g.family,
            indicator: g.indicator,
            field: g.field,
            truth: Some(g.truth),
            one_variable: false,
            counterexample: None,
            track: None,
        }
    }
}

fn square(cfg: &FieldConfig, default: (f64, f64), offset: bool) -> Result<GridSpec> {
    let (lo, hi) = cfg.domain.unwrap_or(default);
    let g = GridSpec::square(lo, hi, cfg.nodes)?;
    Ok(if offset { g.offset_for_discontinuities() } else { g })
}

fn polygon(cfg: &FieldConfig, spec: AxisPolygonSpec, name: &'static str) -> Result<Built> {
    let mut b = Built::from_gallery(gallery::polygon_indicator(&spec, &square(cfg, (-1.0, 1.0), true)?)?);
    b.family = name;
    Ok(b)
}

pub fn build(cfg: &FieldConfig) -> Result<Built> {
    let family = find(&cfg.family).unwrap_or("unknown");
    let b = match family {
        "figure1" | "figure1-striped" => {
            let striped = family == "figure1-striped";
            let g = match cfg.domain {
                None => gallery::figure1(cfg.nodes, striped)?,
                Some(_) => {
                    let spec = if striped { gallery::figure1_striped_spec() } else { gallery::figure1_spec() };
                    let mut g = gallery::polygon_indicator(&spec, &square(cfg, (0.0, 6.0), true)?)?;
                    g.family = family;
                    g
                }
            };
            Built::from_gallery(g)
        }
        "rectangle" => polygon(
            cfg,
            AxisPolygonSpec {
                polygons: vec![vec![[-0.5, -0.4], [0.3, -0.4], [0.3, 0.6], [-0.5, 0.6]]],
                stripes: vec![],
            },
            "rectangle",
        )?,
        "stripe" => {
            let mut b = polygon(
                cfg,
                AxisPolygonSpec { polygons: vec![], stripes: vec![Stripe { axis: StripeAxis::X2, lo: -0.3, hi: 0.2 }] },
                "stripe",
            )?;
            b.one_variable = true;
            b
        }
        "quadrants" => {
            let corners = [[-0.4, -0.3], [0.35, 0.2]];
            let grid = square(cfg, (-1.0, 1.0), true)?;
            let field = sample(move |p| corners.iter().filter(|c| p[0] > c[0] && p[1] > c[1]).count() as f64, &grid)?;
            Built {
                family: "quadrants",
                field,
                truth: Some(GroundTruth::Atoms(
                    corners.iter().map(|&c| PointMass { position: c, mass: 1.0 }).collect(),
                )),
                indicator: false,
                one_variable: false,
                counterexample: None,
                track: None,
            }
        }
        "tensor-sum" => {
            let grid = square(cfg, (-1.0, 1.0), true)?;
            let u1 = Samples1d::along_axis(&grid, 0, |x| if x > 0.2 { 1.0 } else { 0.0 });
            let u2 = match cfg.second_factor {
                SecondFactor::Zero => Samples1d::along_axis(&grid, 1, |_| 0.0),
                SecondFactor::Step => Samples1d::along_axis(&grid, 1, |x| if x > -0.3 { 2.0 } else { 0.0 }),
            };
            let mut b = Built::from_gallery(gallery::tensor_sum(&u1, &u2, &grid)?);
            b.one_variable = cfg.second_factor == SecondFactor::Zero;
            b
        }
        "roof" => {
            let mut b = Built::from_gallery(gallery::roof(&square(cfg, (-1.0, 1.0), false)?)?);
            b.track = Some(([0.5, 0.5], [0.4, 0.6]));
            b
        }
        "slanted-roof" => {
            let mut b = Built::from_gallery(gallery::slanted_roof(&square(cfg, (-1.0, 1.0), false)?, cfg.slope)?);
            let t = 0.3;
            b.track = Some(([t / cfg.slope, t], [t - 0.1, t + 0.1]));
            b
        }
        "bifurcation" => {
            let mut b = Built::from_gallery(gallery::bifurcation(&square(cfg, (-1.0, 1.0), false)?)?);
            b.track = Some(([0.0, 0.0], [-0.1, 0.1]));
            b
        }
        "diffuse" => {
            let nu = DiscreteMeasure::midpoint(-0.8, 0.8, cfg.atoms, |_| 1.0 / 1.6);
            let id: defectlab::grid::Evaluator1d = Arc::new(|t| t);
            Built::from_gallery(gallery::diffuse(&nu, id.clone(), id, &square(cfg, (-1.0, 1.0), true)?)?)
        }
        "counterexample" => {
            let ce = Counterexample::new(CounterexampleSpec::new(cfg.alpha, cfg.depth)?);
            let field = ce.sample_potential(&square(cfg, (-1.0, 1.0), false)?)?;
            Built {
                family: "counterexample",
                field,
                truth: None,
                indicator: false,
                one_variable: false,
                counterexample: Some(ce),
                track: None,
            }
        }
        other => {
            return Err(defectlab::LabError::InvalidParameter(format!("family `{other}` has no planar field")));
        }
    };
    Ok(b)
}

/// A 3D or 4D field for the slicing experiment, together with whether it is
/// an extrusion of a planar field.
pub fn build_tensor(cfg: &FieldConfig) -> Result<(TensorField, bool)> {
    let n = cfg.nodes;
    let dims = cfg.dims;
    if cfg.family == "quadrant-stack" {
        let (lo, hi) = cfg.domain.unwrap_or((-1.0, 1.0));
        let spec = GridSpec::new(vec![lo; dims], vec![hi - lo; dims], vec![n; dims])?.offset_for_discontinuities();
        type Indicator = fn(&[f64]) -> f64;
        let (factors, f): (Vec<u8>, Indicator) = if dims == 3 {
            (vec![1, 2, 2], |x| if x[0] > 0.3 * x[2] && x[1] > -0.2 * x[2] { 1.0 } else { 0.0 })
        } else {
            (vec![1, 2, 1, 2], |x| if x[0] > 0.3 * x[3] && x[1] > -0.2 * x[2] { 1.0 } else { 0.0 })
        };
        return Ok((TensorField::sample(f, &spec, factors)?, false));
    }
    // extrusions need one spacing on every axis
    let mut planar = cfg.clone();
    if planar.family.starts_with("figure1") && planar.domain.is_none() {
        planar.domain = Some((0.0, 6.0));
    }
    let base = build(&planar)?.field;
    let s = base.spec();
    let extra = (s.origin(0), s.side(0), n);
    let (extra, factors) =
        if dims == 3 { (vec![extra], vec![1, 2, 2]) } else { (vec![extra, extra], vec![1, 2, 1, 2]) };
    Ok((TensorField::extrude(&base, &extra, factors)?, true))
}
