//! Python bindings for the renvol toolkit: the pointwise form algebra,
//! Liouville fields with Epstein-map checks, Schwarzian derivatives, tube
//! volumes, and the mesh uniformization solver.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use renvol::epstein;
use renvol::forms;
use renvol::liouville;
use renvol::mesh;
use renvol::schwarzian;
use renvol::wvolume;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Positive-definite symmetric bilinear form on the 2-plane.
#[pyclass(name = "Metric2", from_py_object)]
#[derive(Clone)]
struct PyMetric2 {
    inner: forms::Metric2,
}

#[pymethods]
impl PyMetric2 {
    #[new]
    fn new(g11: f64, g12: f64, g22: f64) -> PyResult<Self> {
        Ok(Self { inner: forms::Metric2::new(g11, g12, g22).map_err(value_err)? })
    }

    #[getter]
    fn g11(&self) -> f64 {
        self.inner.g11
    }

    #[getter]
    fn g12(&self) -> f64 {
        self.inner.g12
    }

    #[getter]
    fn g22(&self) -> f64 {
        self.inner.g22
    }

    fn det(&self) -> f64 {
        self.inner.det()
    }

    fn area_element(&self) -> f64 {
        self.inner.area_element()
    }

    fn __repr__(&self) -> String {
        format!("Metric2({}, {}, {})", self.inner.g11, self.inner.g12, self.inner.g22)
    }
}

/// Linear map of the 2-plane (shape operators live here).
#[pyclass(name = "Operator2", from_py_object)]
#[derive(Clone)]
struct PyOperator2 {
    inner: forms::Operator2,
}

#[pymethods]
impl PyOperator2 {
    #[new]
    fn new(b11: f64, b12: f64, b21: f64, b22: f64) -> Self {
        Self { inner: forms::Operator2::new(b11, b12, b21, b22) }
    }

    #[staticmethod]
    fn identity() -> Self {
        Self { inner: forms::Operator2::identity() }
    }

    #[getter]
    fn entries(&self) -> (f64, f64, f64, f64) {
        (self.inner.b11, self.inner.b12, self.inner.b21, self.inner.b22)
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn det(&self) -> f64 {
        self.inner.det()
    }

    /// Eigenvalues sorted ascending (real for self-adjoint operators).
    fn eigenvalues(&self) -> (f64, f64) {
        self.inner.eigenvalues()
    }

    fn __repr__(&self) -> String {
        let b = &self.inner;
        format!("Operator2({}, {}, {}, {})", b.b11, b.b12, b.b21, b.b22)
    }
}

/// Surface data `(I, B)` at a point.
#[pyclass(name = "SurfaceJet", from_py_object)]
#[derive(Clone)]
struct PySurfaceJet {
    inner: forms::SurfaceJet,
}

#[pymethods]
impl PySurfaceJet {
    #[new]
    fn new(metric: PyMetric2, shape: PyOperator2) -> PyResult<Self> {
        Ok(Self { inner: forms::SurfaceJet::new(metric.inner, shape.inner).map_err(value_err)? })
    }

    #[getter]
    fn metric(&self) -> PyMetric2 {
        PyMetric2 { inner: self.inner.metric }
    }

    #[getter]
    fn shape(&self) -> PyOperator2 {
        PyOperator2 { inner: self.inner.shape }
    }

    fn mean_curvature(&self) -> f64 {
        self.inner.mean_curvature()
    }

    fn extrinsic_curvature(&self) -> f64 {
        self.inner.extrinsic_curvature()
    }

    /// Gauss equation `K = -1 + det B`.
    fn gauss_curvature(&self) -> f64 {
        self.inner.gauss_curvature()
    }

    fn to_infinity(&self) -> PyResult<PyInfinityJet> {
        Ok(PyInfinityJet { inner: forms::to_infinity(&self.inner).map_err(value_err)? })
    }

    /// Components `(g11, g12, g22)` of the equidistant-leaf metric.
    fn equidistant_metric(&self, rho: f64) -> (f64, f64, f64) {
        let m = forms::equidistant_metric(&self.inner, rho);
        (m.m11, m.m12, m.m22)
    }

    fn horospherically_convex(&self) -> bool {
        forms::horospherically_convex(&self.inner.shape, &self.inner.metric)
    }
}

/// Data at infinity `(I*, B*)` at a point.
#[pyclass(name = "InfinityJet", from_py_object)]
#[derive(Clone)]
struct PyInfinityJet {
    inner: forms::InfinityJet,
}

#[pymethods]
impl PyInfinityJet {
    #[new]
    fn new(metric: PyMetric2, shape: PyOperator2) -> PyResult<Self> {
        Ok(Self { inner: forms::InfinityJet::new(metric.inner, shape.inner).map_err(value_err)? })
    }

    #[getter]
    fn metric(&self) -> PyMetric2 {
        PyMetric2 { inner: self.inner.metric }
    }

    #[getter]
    fn shape(&self) -> PyOperator2 {
        PyOperator2 { inner: self.inner.shape }
    }

    fn mean_curvature(&self) -> f64 {
        self.inner.mean_curvature()
    }

    /// `II*` components `(m11, m12, m22)`.
    fn second_form(&self) -> (f64, f64, f64) {
        let m = self.inner.second_form();
        (m.m11, m.m12, m.m22)
    }

    /// Trace-free part `II*_0` components.
    fn traceless_second_form(&self) -> (f64, f64, f64) {
        let m = self.inner.traceless_second_form();
        (m.m11, m.m12, m.m22)
    }

    fn to_surface(&self) -> PyResult<PySurfaceJet> {
        Ok(PySurfaceJet { inner: forms::from_infinity(&self.inner).map_err(value_err)? })
    }

    /// Leaf metric `(g11, g12, g22)` from the data at infinity.
    fn equidistant_metric(&self, rho: f64) -> (f64, f64, f64) {
        let m = forms::equidistant_metric_from_infinity(&self.inner, rho);
        (m.m11, m.m12, m.m22)
    }
}

/// `K* = 2K / (1 + H + K_e)`.
#[pyfunction]
fn curvature_at_infinity(k: f64, h: f64, ke: f64) -> PyResult<f64> {
    forms::curvature_at_infinity(k, h, ke).map_err(value_err)
}

/// `H* = (2 - 2 det B) / (1 + tr B + det B)`.
#[pyfunction]
fn mean_curvature_at_infinity(b: PyOperator2) -> PyResult<f64> {
    forms::mean_curvature_at_infinity(&b.inner).map_err(value_err)
}

/// Conformal factor on a planar domain with derivative access.
#[pyclass(name = "LiouvilleField")]
struct PyLiouvilleField {
    inner: epstein::LiouvilleField,
}

#[pymethods]
impl PyLiouvilleField {
    /// Built-in fields: flat, halfplane, disk, strip, annulus (param R),
    /// quadratic (the non-solution control).
    #[staticmethod]
    #[pyo3(signature = (name, param=None))]
    fn builtin(name: &str, param: Option<f64>) -> PyResult<Self> {
        Ok(Self { inner: epstein::LiouvilleField::builtin(name, param).map_err(value_err)? })
    }

    /// Load a gridded field from an `x y phi` table with a declared step.
    #[staticmethod]
    fn from_table(text: &str, step: f64) -> PyResult<Self> {
        Ok(Self { inner: epstein::LiouvilleField::from_table(text, step).map_err(value_err)? })
    }

    fn phi(&self, z: Complex64) -> PyResult<f64> {
        self.inner.phi(z).map_err(value_err)
    }

    fn theta(&self, z: Complex64) -> PyResult<Complex64> {
        self.inner.theta(z).map_err(value_err)
    }

    /// `(y, xi)` of the Epstein map at foliation parameter rho.
    fn epstein_map(&self, z: Complex64, rho: f64) -> PyResult<(Complex64, f64)> {
        let p = self.inner.epstein_map(z, rho).map_err(value_err)?;
        Ok((p.y, p.xi))
    }

    fn second_form_at_infinity(&self, z: Complex64) -> PyResult<(f64, f64, f64)> {
        let m = self.inner.second_form_at_infinity(z).map_err(value_err)?;
        Ok((m.m11, m.m12, m.m22))
    }

    fn principal_curvatures_at_infinity(&self, z: Complex64) -> PyResult<(f64, f64)> {
        self.inner.principal_curvatures_at_infinity(z).map_err(value_err)
    }

    fn curvature_at_infinity(&self, z: Complex64) -> PyResult<f64> {
        self.inner.curvature_at_infinity(z).map_err(value_err)
    }

    /// Defect of the exact leaf-metric expansion at finite-difference step h.
    fn expansion_check(&self, z: Complex64, rho: f64, h: f64) -> PyResult<f64> {
        self.inner.expansion_check(z, rho, h).map_err(value_err)
    }

    fn dbar_theta(&self, z: Complex64, h: f64) -> PyResult<f64> {
        self.inner.dbar_theta(z, h).map_err(value_err)
    }

    /// The jet at infinity `(I*, B*)` at a point.
    fn infinity_jet(&self, z: Complex64) -> PyResult<PyInfinityJet> {
        Ok(PyInfinityJet { inner: self.inner.infinity_jet(z).map_err(value_err)? })
    }
}

/// Holomorphic map with Schwarzian access.
#[pyclass(name = "HolomorphicMap", from_py_object)]
#[derive(Clone)]
struct PyHolomorphicMap {
    inner: schwarzian::HolomorphicMap,
}

#[pymethods]
impl PyHolomorphicMap {
    #[staticmethod]
    fn mobius(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Self { inner: schwarzian::HolomorphicMap::mobius(a, b, c, d) }
    }

    #[staticmethod]
    fn exp() -> Self {
        Self { inner: schwarzian::HolomorphicMap::exp() }
    }

    #[staticmethod]
    fn power(a: Complex64) -> Self {
        Self { inner: schwarzian::HolomorphicMap::power(a) }
    }

    #[staticmethod]
    fn compose(outer: PyHolomorphicMap, inner: PyHolomorphicMap) -> Self {
        Self { inner: schwarzian::HolomorphicMap::compose(outer.inner, inner.inner) }
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        self.inner.eval(z)
    }

    fn schwarzian(&self, z: Complex64) -> PyResult<Complex64> {
        self.inner.schwarzian(z).map_err(value_err)
    }
}

/// `|S(f o g) - [S(f)(g) g'^2 + S(g)]|` at a point.
#[pyfunction]
fn cocycle_defect(f: PyHolomorphicMap, g: PyHolomorphicMap, z: Complex64) -> PyResult<f64> {
    schwarzian::cocycle_defect(&f.inner, &g.inner, z).map_err(value_err)
}

/// `|theta - S(uniformizer)|` on a uniformized domain
/// (strip, annulus with modulus, halfplane).
#[pyfunction]
#[pyo3(signature = (domain, z, modulus=None))]
fn theta_vs_schwarzian(domain: &str, z: Complex64, modulus: Option<f64>) -> PyResult<f64> {
    let d = schwarzian::UniformizedDomain::by_name(domain, modulus).map_err(value_err)?;
    schwarzian::theta_vs_schwarzian(d, z).map_err(value_err)
}

/// Fuchsian tube over a genus-g hyperbolic surface.
#[pyclass(name = "FuchsianTube")]
struct PyFuchsianTube {
    inner: wvolume::FuchsianTube,
}

#[pymethods]
impl PyFuchsianTube {
    #[new]
    fn new(genus: usize, half_width: f64) -> PyResult<Self> {
        Ok(Self { inner: wvolume::FuchsianTube::new(genus, half_width).map_err(value_err)? })
    }

    fn core_area(&self) -> f64 {
        self.inner.core_area()
    }

    /// Volume report as a dict: V, int H da, W, dual and renormalized
    /// volumes, the regularization curve and its extrapolation.
    #[pyo3(signature = (rho_max=10.0, steps=64))]
    fn volume_report<'py>(
        &self,
        py: Python<'py>,
        rho_max: f64,
        steps: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let rep = wvolume::renormalized_limit(&self.inner, rho_max, steps).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("volume", rep.volume)?;
        d.set_item("mean_curvature_integral", rep.mean_curvature_integral)?;
        d.set_item("w", rep.w)?;
        d.set_item("v_dual", rep.v_dual)?;
        d.set_item("v_renormalized", rep.v_renormalized)?;
        d.set_item("extrapolated_limit", rep.extrapolated_limit)?;
        d.set_item("decay_slope", rep.decay_slope)?;
        d.set_item("w_relation_defect", rep.w_relation_defect)?;
        d.set_item("limit_curve", rep.limit_curve)?;
        Ok(d)
    }

    /// Both Schlafli first-variation checks at step dr.
    #[pyo3(signature = (dr=1e-4))]
    fn schlafli_checks<'py>(&self, py: Python<'py>, dr: f64) -> PyResult<Bound<'py, PyDict>> {
        let s1 = wvolume::schlafli_fd_check(&self.inner, dr).map_err(value_err)?;
        let s2 = wvolume::schlafli_at_infinity_check(&self.inner, dr).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item("dw_fd", s1.dw_fd)?;
        d.set_item("dw_boundary_formula", s1.dw_formula)?;
        d.set_item("boundary_defect", s1.defect)?;
        d.set_item("dw_infinity_formula", s2.dw_formula)?;
        d.set_item("infinity_defect", s2.defect)?;
        Ok(d)
    }

    /// `(r0, W_M)`: the K* = -1 leaf shift and the W-volume there.
    fn w_at_constant_curvature(&self) -> PyResult<(f64, f64)> {
        let rep = wvolume::w_at_constant_curvature(&self.inner).map_err(value_err)?;
        Ok((rep.r0, rep.w_m))
    }
}

/// Intrinsic triangle mesh with a conformal factor.
#[pyclass(name = "TriMesh")]
struct PyTriMesh {
    inner: mesh::TriMesh,
}

#[pymethods]
impl PyTriMesh {
    /// Parse the plain-text mesh format ("V E F genus" header).
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: mesh::TriMesh::parse(text).map_err(value_err)? })
    }

    /// Genus-2 surface from the glued hyperbolic octagon at resolution n.
    #[staticmethod]
    fn genus2_fixture(n: usize) -> Self {
        Self { inner: mesh::genus2_octagon(n).mesh }
    }

    #[staticmethod]
    fn icosahedron() -> Self {
        Self { inner: mesh::icosahedron() }
    }

    /// Unit sphere approximated by a subdivided icosahedron with
    /// great-circle edge lengths.
    #[staticmethod]
    fn geodesic_sphere(levels: usize) -> Self {
        Self { inner: mesh::geodesic_sphere(levels) }
    }

    #[staticmethod]
    fn flat_torus(n: usize) -> Self {
        Self { inner: mesh::flat_torus(n) }
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertex_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    #[getter]
    fn face_count(&self) -> usize {
        self.inner.face_count()
    }

    #[getter]
    fn genus(&self) -> usize {
        self.inner.genus()
    }

    #[getter]
    fn phi(&self) -> Vec<f64> {
        self.inner.phi().to_vec()
    }

    fn set_phi(&mut self, phi: Vec<f64>) -> PyResult<()> {
        self.inner.set_phi(phi).map_err(value_err)
    }

    /// Angle-defect curvature per vertex, for the background metric or the
    /// conformally scaled one.
    #[pyo3(signature = (conformal=false))]
    fn gaussian_curvature(&self, conformal: bool) -> PyResult<Vec<f64>> {
        self.inner.gaussian_curvature(choice(conformal)).map_err(value_err)
    }

    #[pyo3(signature = (u, conformal=false))]
    fn laplacian(&self, u: Vec<f64>, conformal: bool) -> PyResult<Vec<f64>> {
        self.inner.laplacian(choice(conformal), &u).map_err(value_err)
    }

    #[pyo3(signature = (u, conformal=false))]
    fn integrate(&self, u: Vec<f64>, conformal: bool) -> PyResult<f64> {
        self.inner.integrate(choice(conformal), &u).map_err(value_err)
    }

    #[pyo3(signature = (conformal=false))]
    fn total_area(&self, conformal: bool) -> PyResult<f64> {
        self.inner.total_area(choice(conformal)).map_err(value_err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

fn choice(conformal: bool) -> mesh::MetricChoice {
    if conformal {
        mesh::MetricChoice::Conformal
    } else {
        mesh::MetricChoice::Background
    }
}

/// Pointwise Liouville residual of the mesh's current conformal factor.
#[pyfunction]
fn liouville_residual(m: &PyTriMesh) -> PyResult<Vec<f64>> {
    liouville::liouville_residual(&m.inner).map_err(value_err)
}

/// The Liouville functional of the mesh's current conformal factor.
#[pyfunction]
fn liouville_functional(m: &PyTriMesh) -> PyResult<f64> {
    liouville::liouville_functional(&m.inner).map_err(value_err)
}

/// Uniformize to curvature -lambda. Returns `(phi, report dict)`.
#[pyfunction]
#[pyo3(signature = (m, lam=1.0, max_iterations=50, residual_tolerance=1e-10, area=None))]
fn solve_uniformization<'py>(
    py: Python<'py>,
    m: &PyTriMesh,
    lam: f64,
    max_iterations: usize,
    residual_tolerance: f64,
    area: Option<f64>,
) -> PyResult<(Vec<f64>, Bound<'py, PyDict>)> {
    let cfg = liouville::SolverConfig {
        max_iterations,
        residual_tolerance,
        lambda: lam,
        area_constraint: area,
        ..Default::default()
    };
    let (phi, rep) = liouville::solve_uniformization(&m.inner, &cfg).map_err(|e| match e {
        liouville::LiouvilleError::NonConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        other => value_err(other),
    })?;
    let d = PyDict::new(py);
    d.set_item("iterations", rep.iterations)?;
    d.set_item("final_residual", rep.final_residual)?;
    d.set_item("achieved_lambda", rep.achieved_lambda)?;
    d.set_item("curvature_min", rep.curvature_min)?;
    d.set_item("curvature_mean", rep.curvature_mean)?;
    d.set_item("curvature_max", rep.curvature_max)?;
    d.set_item("scaled_area", rep.scaled_area)?;
    d.set_item("calibration", rep.calibration)?;
    Ok((phi, d))
}

#[pymodule]
fn renvol_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetric2>()?;
    m.add_class::<PyOperator2>()?;
    m.add_class::<PySurfaceJet>()?;
    m.add_class::<PyInfinityJet>()?;
    m.add_class::<PyLiouvilleField>()?;
    m.add_class::<PyHolomorphicMap>()?;
    m.add_class::<PyFuchsianTube>()?;
    m.add_class::<PyTriMesh>()?;
    m.add_function(wrap_pyfunction!(curvature_at_infinity, m)?)?;
    m.add_function(wrap_pyfunction!(mean_curvature_at_infinity, m)?)?;
    m.add_function(wrap_pyfunction!(cocycle_defect, m)?)?;
    m.add_function(wrap_pyfunction!(theta_vs_schwarzian, m)?)?;
    m.add_function(wrap_pyfunction!(liouville_residual, m)?)?;
    m.add_function(wrap_pyfunction!(liouville_functional, m)?)?;
    m.add_function(wrap_pyfunction!(solve_uniformization, m)?)?;
    m.add("LIOUVILLE_CALIBRATION", liouville::CALIBRATION_NOTE)?;
    m.add("SCHWARZIAN_DIRECTION", schwarzian::DIRECTION_NOTE)?;
    Ok(())
}
