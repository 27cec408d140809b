//! Numerical laboratory for the defect measure `μ[u] = ∂₁∂₂u` of scalar
//! fields on planar boxes and the nonlocal energies that control it.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`] holds uniform node grids, sampled fields and finite differences;
//! * [`gallery`] and [`counterexample`] build analytic test fields with known
//!   defect measures;
//! * [`measure`] computes box masses exactly by the four-point formula and
//!   extracts atoms, mass ratios and dimension profiles;
//! * [`energy`] evaluates the nonlocal energies by deterministic quadrature;
//! * [`levelset`] works level by level: corners of `{u > t}`, layer-cake
//!   identities, corner tracking and blow-ups;
//! * [`slicing`] checks two-dimensional slices of 3D and 4D tensor fields.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod counterexample;
pub mod energy;
pub mod error;
pub mod gallery;
pub mod geometry;
pub mod grid;
pub mod levelset;
pub mod measure;
pub mod slicing;
pub mod sum;

pub use error::{LabError, Result};
pub use grid::{GridSpec, Point, ScalarField, ThetaPair, VectorField};
