//! Python bindings: sampled fields, their defect measures and the
//! counterexample's blow-up fractions.

use defectlab::counterexample::{limit_fraction as q_limit, Counterexample, CounterexampleSpec};
use defectlab::energy::{energy_eps, Kernel, Quadrature};
use defectlab::gallery;
use defectlab::levelset::{inclusion_residual, layer_cake_check};
use defectlab::measure::{defect_measure, extract_atoms, CellBox, CellMeasure, INTEGER_TOL};
use defectlab::{GridSpec, LabError, ScalarField, ThetaPair};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: LabError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A scalar field on a uniform grid together with its defect measure.
#[pyclass(name = "Field", module = "defectlab", frozen)]
struct PyField {
    family: String,
    field: ScalarField,
    measure: CellMeasure,
}

impl PyField {
    fn wrap(family: &str, field: ScalarField) -> Self {
        let measure = defect_measure(&field);
        Self { family: family.to_string(), field, measure }
    }
}

#[pymethods]
impl PyField {
    /// Node values, first axis fastest, on the square `[lo, hi]²`.
    #[staticmethod]
    #[pyo3(signature = (values, nodes, lo = 0.0, hi = 1.0))]
    fn from_values(values: Vec<f64>, nodes: usize, lo: f64, hi: f64) -> PyResult<Self> {
        let spec = GridSpec::square(lo, hi, nodes).map_err(err)?;
        Ok(Self::wrap("custom", ScalarField::from_values(spec, values).map_err(err)?))
    }

    #[staticmethod]
    #[pyo3(signature = (nodes = 513))]
    fn figure1(nodes: usize) -> PyResult<Self> {
        Ok(Self::wrap("figure1", gallery::figure1(nodes, false).map_err(err)?.field))
    }

    #[staticmethod]
    #[pyo3(signature = (nodes = 257))]
    fn roof(nodes: usize) -> PyResult<Self> {
        let grid = GridSpec::square(-1.0, 1.0, nodes).map_err(err)?;
        Ok(Self::wrap("roof", gallery::roof(&grid).map_err(err)?.field))
    }

    #[staticmethod]
    #[pyo3(signature = (nodes = 257))]
    fn bifurcation(nodes: usize) -> PyResult<Self> {
        let grid = GridSpec::square(-1.0, 1.0, nodes).map_err(err)?;
        Ok(Self::wrap("bifurcation", gallery::bifurcation(&grid).map_err(err)?.field))
    }

    #[getter]
    fn family(&self) -> &str {
        &self.family
    }

    #[getter]
    fn nodes(&self) -> (usize, usize) {
        (self.field.nx(), self.field.ny())
    }

    fn values(&self) -> Vec<f64> {
        self.field.values().to_vec()
    }

    /// Signed mass of the cells `[i0, i1) × [j0, j1)`.
    fn box_mass(&self, i0: usize, j0: usize, i1: usize, j1: usize) -> PyResult<f64> {
        let b = CellBox::new([i0, j0], [i1, j1]).map_err(err)?;
        self.measure.box_mass(&b).map_err(err)
    }

    fn total_mass(&self) -> f64 {
        self.measure.total()
    }

    fn total_variation(&self) -> f64 {
        self.measure.total_variation()
    }

    /// `(x1, x2, mass)` for every extracted point mass.
    #[pyo3(signature = (tol = INTEGER_TOL))]
    fn atoms(&self, tol: f64) -> PyResult<Vec<(f64, f64, f64)>> {
        let a = extract_atoms(&self.measure, tol).map_err(err)?;
        Ok(a.atoms.iter().map(|x| (x.position[0], x.position[1], x.mass)).collect())
    }

    #[pyo3(signature = (eps, theta1 = 0.25, theta2 = 0.25, z_points = 64))]
    fn energy(&self, eps: f64, theta1: f64, theta2: f64, z_points: usize) -> PyResult<f64> {
        let th = ThetaPair::new(theta1, theta2).map_err(err)?;
        let quad = Quadrature { z_points };
        Ok(energy_eps(&self.field, eps, th, Kernel::UniformBall, quad).map_err(err)?.value)
    }

    /// Relative gap between `|μ|(Ω)` and the integral of `|κ_t|(Ω)`.
    #[pyo3(signature = (levels = 1024))]
    fn layer_cake_error(&self, levels: usize) -> PyResult<f64> {
        Ok(layer_cake_check(&self.field, &self.measure.full_box(), levels).map_err(err)?.rel_error)
    }

    fn __repr__(&self) -> String {
        format!("Field({}, {}x{})", self.family, self.field.nx(), self.field.ny())
    }
}

/// `(name, description)` for every gallery family.
#[pyfunction]
fn families() -> Vec<(&'static str, &'static str)> {
    gallery::FAMILIES.to_vec()
}

/// Limit of the even-level ball fraction of the counterexample.
#[pyfunction]
fn limit_fraction() -> f64 {
    q_limit()
}

/// `(k, r_k, v1 fraction, v2 fraction)` on `B_{r_k}(0)` for every resolvable
/// level of the power-law counterexample.
#[pyfunction]
#[pyo3(signature = (alpha = 4.0, depth = 6))]
fn counterexample_fractions(alpha: f64, depth: usize) -> PyResult<Vec<(usize, f64, f64, f64)>> {
    let ce = Counterexample::new(CounterexampleSpec::new(alpha, depth).map_err(err)?);
    let mut out = Vec::new();
    for k in (0..=depth).filter(|&k| ce.spec.resolvable(k)) {
        let r = ce.spec.r(k);
        let f = ce.ball_fractions([0.0, 0.0], r, 256).map_err(err)?;
        out.push((k, r, f[0], f[1]));
    }
    Ok(out)
}

/// Inclusion residual of the counterexample field sampled on `[-1, 1]²`.
#[pyfunction]
#[pyo3(signature = (alpha = 4.0, depth = 6, nodes = 257))]
fn counterexample_residual(alpha: f64, depth: usize, nodes: usize) -> PyResult<f64> {
    let ce = Counterexample::new(CounterexampleSpec::new(alpha, depth).map_err(err)?);
    let grid = GridSpec::square(-1.0, 1.0, nodes).map_err(err)?;
    Ok(inclusion_residual(&ce.sample_vector(&grid).map_err(err)?))
}

#[pymodule]
#[pyo3(name = "defectlab")]
fn defectlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyField>()?;
    m.add_function(wrap_pyfunction!(families, m)?)?;
    m.add_function(wrap_pyfunction!(limit_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_fractions, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_residual, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
