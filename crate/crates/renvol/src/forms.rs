//! Pointwise algebra of fundamental forms on surfaces in H^3 and their
//! counterparts at infinity.
//!
//! All tensors at a point are expressed in one fixed coordinate basis.
//! A surface carries `(I, B)`: the induced metric and the shape operator,
//! with `II = I(B., .)`, `III = I(B., B.)`, `H = tr B`, and the Gauss
//! equation `K = -1 + det B`. The data at infinity is
//!
//! ```text
//! I*  = 1/2 I((E+B)., (E+B).)        B* = (E+B)^-1 (E-B)
//! II* = 1/2 I((E+B)., (E-B).)        III* = I*(B*., B*.)
//! ```
//!
//! and the transform is an involution: applying it to `(I*, B*)` returns
//! `(I, B)`. Self-adjointness is always checked through the symmetry of
//! `I·B`, never through eigenvectors, so repeated eigenvalues are harmless.

use thiserror::Error;

/// Transforms become meaningless once `det(E+B)` is this small: a principal
/// curvature is numerically at -1 and the forms at infinity blow up.
pub const SINGULAR_DET_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum FormsError {
    /// `det(E+B)` (or the relevant denominator) vanishes; the transform to or
    /// from infinity is undefined there.
    #[error("singular transform: {0}")]
    SingularTransform(String),
    /// A finite-difference stencil does not fit inside the sampled grid.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    /// Input data violates a structural invariant (not positive definite,
    /// not self-adjoint, ...).
    #[error("invalid form data: {0}")]
    InvalidData(String),
}

/// A positive-definite symmetric bilinear form on the 2-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric2 {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
}

impl Metric2 {
    pub fn new(g11: f64, g12: f64, g22: f64) -> Result<Self, FormsError> {
        let m = Self { g11, g12, g22 };
        if !m.is_positive_definite() {
            return Err(FormsError::InvalidData(format!(
                "metric not positive definite: g11={g11}, g12={g12}, g22={g22}"
            )));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        Self { g11: 1.0, g12: 0.0, g22: 1.0 }
    }

    pub fn diagonal(g11: f64, g22: f64) -> Result<Self, FormsError> {
        Self::new(g11, 0.0, g22)
    }

    pub fn det(&self) -> f64 {
        self.g11 * self.g22 - self.g12 * self.g12
    }

    pub fn is_positive_definite(&self) -> bool {
        self.g11 > 0.0 && self.det() > 0.0 && self.g11.is_finite() && self.g12.is_finite() && self.g22.is_finite()
    }

    /// Area element `sqrt(det)`.
    pub fn area_element(&self) -> f64 {
        self.det().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { g11: s * self.g11, g12: s * self.g12, g22: s * self.g22 }
    }

    pub fn add(&self, other: &SymForm2) -> SymForm2 {
        SymForm2 { m11: self.g11 + other.m11, m12: self.g12 + other.m12, m22: self.g22 + other.m22 }
    }

    /// Evaluate the form on a pair of vectors.
    pub fn apply(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        x[0] * (self.g11 * y[0] + self.g12 * y[1]) + x[1] * (self.g12 * y[0] + self.g22 * y[1])
    }

    /// Inverse metric components (as a symmetric 2x2 matrix).
    pub fn inverse(&self) -> Result<[[f64; 2]; 2], FormsError> {
        let d = self.det();
        if d.abs() < SINGULAR_DET_TOL {
            return Err(FormsError::SingularTransform("metric determinant ~ 0".into()));
        }
        Ok([[self.g22 / d, -self.g12 / d], [-self.g12 / d, self.g11 / d]])
    }

    pub fn as_sym(&self) -> SymForm2 {
        SymForm2 { m11: self.g11, m12: self.g12, m22: self.g22 }
    }
}

/// A symmetric bilinear form that is not required to be definite
/// (second fundamental forms, trace-free parts, differences).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymForm2 {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl SymForm2 {
    pub fn zero() -> Self {
        Self { m11: 0.0, m12: 0.0, m22: 0.0 }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m11: s * self.m11, m12: s * self.m12, m22: s * self.m22 }
    }

    pub fn add(&self, o: &SymForm2) -> Self {
        Self { m11: self.m11 + o.m11, m12: self.m12 + o.m12, m22: self.m22 + o.m22 }
    }

    pub fn sub(&self, o: &SymForm2) -> Self {
        Self { m11: self.m11 - o.m11, m12: self.m12 - o.m12, m22: self.m22 - o.m22 }
    }

    pub fn max_abs(&self) -> f64 {
        self.m11.abs().max(self.m12.abs()).max(self.m22.abs())
    }

    /// Reinterpret as a metric; fails when not positive definite.
    pub fn into_metric(self) -> Result<Metric2, FormsError> {
        Metric2::new(self.m11, self.m12, self.m22)
    }

    /// Trace with respect to a metric: `tr_g(m) = tr(g^-1 m)`.
    pub fn trace_with(&self, g: &Metric2) -> Result<f64, FormsError> {
        let gi = g.inverse()?;
        Ok(gi[0][0] * self.m11 + 2.0 * gi[0][1] * self.m12 + gi[1][1] * self.m22)
    }
}

/// A linear map of the 2-plane in the fixed basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Operator2 {
    pub b11: f64,
    pub b12: f64,
    pub b21: f64,
    pub b22: f64,
}

impl Operator2 {
    pub fn new(b11: f64, b12: f64, b21: f64, b22: f64) -> Self {
        Self { b11, b12, b21, b22 }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 1.0)
    }

    pub fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0)
    }

    pub fn diagonal(b11: f64, b22: f64) -> Self {
        Self::new(b11, 0.0, 0.0, b22)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.b11, s * self.b12, s * self.b21, s * self.b22)
    }

    pub fn add(&self, o: &Operator2) -> Self {
        Self::new(self.b11 + o.b11, self.b12 + o.b12, self.b21 + o.b21, self.b22 + o.b22)
    }

    pub fn sub(&self, o: &Operator2) -> Self {
        Self::new(self.b11 - o.b11, self.b12 - o.b12, self.b21 - o.b21, self.b22 - o.b22)
    }

    pub fn mul(&self, o: &Operator2) -> Self {
        Self::new(
            self.b11 * o.b11 + self.b12 * o.b21,
            self.b11 * o.b12 + self.b12 * o.b22,
            self.b21 * o.b11 + self.b22 * o.b21,
            self.b21 * o.b12 + self.b22 * o.b22,
        )
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.b11 * v[0] + self.b12 * v[1], self.b21 * v[0] + self.b22 * v[1]]
    }

    pub fn trace(&self) -> f64 {
        self.b11 + self.b22
    }

    pub fn det(&self) -> f64 {
        self.b11 * self.b22 - self.b12 * self.b21
    }

    pub fn inverse(&self) -> Result<Self, FormsError> {
        let d = self.det();
        if d.abs() < SINGULAR_DET_TOL {
            return Err(FormsError::SingularTransform(format!("operator determinant {d:.3e}")));
        }
        Ok(Self::new(self.b22 / d, -self.b12 / d, -self.b21 / d, self.b11 / d))
    }

    /// Real eigenvalues sorted ascending. Valid for operators self-adjoint
    /// with respect to some metric (the discriminant is then nonnegative;
    /// tiny negative values from rounding are clamped to zero).
    pub fn eigenvalues(&self) -> (f64, f64) {
        let t = self.trace();
        let disc = (t * t - 4.0 * self.det()).max(0.0).sqrt();
        ((t - disc) / 2.0, (t + disc) / 2.0)
    }

    /// Defect of self-adjointness with respect to `g`: `|(gB)_12 - (gB)_21|`.
    pub fn self_adjoint_defect(&self, g: &Metric2) -> f64 {
        // (gB)_12 = g11 b12 + g12 b22, (gB)_21 = g12 b11 + g22 b21
        let gb12 = g.g11 * self.b12 + g.g12 * self.b22;
        let gb21 = g.g12 * self.b11 + g.g22 * self.b21;
        (gb12 - gb21).abs()
    }

    /// The symmetric form `I(B., .)` (the matrix `gB`, symmetrized).
    pub fn lower_with(&self, g: &Metric2) -> SymForm2 {
        let m11 = g.g11 * self.b11 + g.g12 * self.b21;
        let m22 = g.g12 * self.b12 + g.g22 * self.b22;
        let m12a = g.g11 * self.b12 + g.g12 * self.b22;
        let m12b = g.g12 * self.b11 + g.g22 * self.b21;
        SymForm2 { m11, m12: 0.5 * (m12a + m12b), m22 }
    }
}

/// `I(A., C.)` as a symmetric form, i.e. the matrix `A^T G C` (symmetrized).
fn sandwich(g: &Metric2, a: &Operator2, c: &Operator2) -> SymForm2 {
    // G*C
    let gc11 = g.g11 * c.b11 + g.g12 * c.b21;
    let gc12 = g.g11 * c.b12 + g.g12 * c.b22;
    let gc21 = g.g12 * c.b11 + g.g22 * c.b21;
    let gc22 = g.g12 * c.b12 + g.g22 * c.b22;
    // A^T * (G*C)
    let m11 = a.b11 * gc11 + a.b21 * gc21;
    let m12 = a.b11 * gc12 + a.b21 * gc22;
    let m21 = a.b12 * gc11 + a.b22 * gc21;
    let m22 = a.b12 * gc12 + a.b22 * gc22;
    SymForm2 { m11, m12: 0.5 * (m12 + m21), m22 }
}

/// Raise a symmetric form with a metric: `B = g^-1 m`.
pub fn raise(g: &Metric2, m: &SymForm2) -> Result<Operator2, FormsError> {
    let gi = g.inverse()?;
    Ok(Operator2::new(
        gi[0][0] * m.m11 + gi[0][1] * m.m12,
        gi[0][0] * m.m12 + gi[0][1] * m.m22,
        gi[1][0] * m.m11 + gi[1][1] * m.m12,
        gi[1][0] * m.m12 + gi[1][1] * m.m22,
    ))
}

/// Pointwise data of a surface in H^3: induced metric and shape operator.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceJet {
    pub metric: Metric2,
    pub shape: Operator2,
}

/// Tolerance on the self-adjointness defect accepted at construction,
/// relative to the metric scale.
const SELF_ADJOINT_TOL: f64 = 1e-9;

impl SurfaceJet {
    pub fn new(metric: Metric2, shape: Operator2) -> Result<Self, FormsError> {
        let scale = metric.g11.abs().max(metric.g22.abs()).max(1.0);
        let defect = shape.self_adjoint_defect(&metric);
        if defect > SELF_ADJOINT_TOL * scale {
            return Err(FormsError::InvalidData(format!(
                "shape operator not self-adjoint: |(gB)12 - (gB)21| = {defect:.3e}"
            )));
        }
        Ok(Self { metric, shape })
    }

    pub fn second_form(&self) -> SymForm2 {
        self.shape.lower_with(&self.metric)
    }

    pub fn third_form(&self) -> SymForm2 {
        sandwich(&self.metric, &self.shape, &self.shape)
    }

    /// Mean curvature `H = tr B`.
    pub fn mean_curvature(&self) -> f64 {
        self.shape.trace()
    }

    /// Extrinsic curvature `K_e = det B`.
    pub fn extrinsic_curvature(&self) -> f64 {
        self.shape.det()
    }

    /// Gauss equation in H^3: `K = -1 + det B`. Always derived, never stored.
    pub fn gauss_curvature(&self) -> f64 {
        -1.0 + self.shape.det()
    }
}

/// Pointwise data at infinity: metric `I*` and operator `B*`.
#[derive(Debug, Clone, Copy)]
pub struct InfinityJet {
    pub metric: Metric2,
    pub shape: Operator2,
}

impl InfinityJet {
    pub fn new(metric: Metric2, shape: Operator2) -> Result<Self, FormsError> {
        let scale = metric.g11.abs().max(metric.g22.abs()).max(1.0);
        let defect = shape.self_adjoint_defect(&metric);
        if defect > SELF_ADJOINT_TOL * scale {
            return Err(FormsError::InvalidData(format!(
                "B* not self-adjoint w.r.t. I*: defect = {defect:.3e}"
            )));
        }
        Ok(Self { metric, shape })
    }

    /// `II* = I*(B*., .)`.
    pub fn second_form(&self) -> SymForm2 {
        self.shape.lower_with(&self.metric)
    }

    /// `III* = I*(B*., B*.)`.
    pub fn third_form(&self) -> SymForm2 {
        sandwich(&self.metric, &self.shape, &self.shape)
    }

    /// `H* = tr B*`.
    pub fn mean_curvature(&self) -> f64 {
        self.shape.trace()
    }

    /// Trace-free part `II*_0 = II* - (H*/2) I*`; `tr_{I*} II*_0 = 0` by
    /// construction.
    pub fn traceless_second_form(&self) -> SymForm2 {
        let h = self.mean_curvature();
        self.second_form().sub(&self.metric.as_sym().scale(h / 2.0))
    }
}

fn plus_b(shape: &Operator2) -> Result<Operator2, FormsError> {
    let eb = Operator2::identity().add(shape);
    if eb.det().abs() < SINGULAR_DET_TOL {
        return Err(FormsError::SingularTransform(format!(
            "det(E+B) = {:.3e}: a principal curvature sits at -1",
            eb.det()
        )));
    }
    Ok(eb)
}

/// Transform surface data to the data at infinity:
/// `I* = 1/2 I((E+B)., (E+B).)`, `B* = (E+B)^-1 (E-B)`.
pub fn to_infinity(j: &SurfaceJet) -> Result<InfinityJet, FormsError> {
    let eb = plus_b(&j.shape)?;
    let emb = Operator2::identity().sub(&j.shape);
    let istar = sandwich(&j.metric, &eb, &eb).scale(0.5).into_metric()?;
    let bstar = eb.inverse()?.mul(&emb);
    InfinityJet::new(istar, bstar)
}

/// Inverse transform: `I = 1/2 I*((E+B*)., (E+B*).)`, `B = (E+B*)^-1 (E-B*)`.
pub fn from_infinity(j: &InfinityJet) -> Result<SurfaceJet, FormsError> {
    let eb = plus_b(&j.shape)?;
    let emb = Operator2::identity().sub(&j.shape);
    let metric = sandwich(&j.metric, &eb, &eb).scale(0.5).into_metric()?;
    let shape = eb.inverse()?.mul(&emb);
    SurfaceJet::new(metric, shape)
}

/// Curvature of the metric at infinity: `K* = 2K / (1 + H + K_e)`.
pub fn curvature_at_infinity(k: f64, h: f64, ke: f64) -> Result<f64, FormsError> {
    let denom = 1.0 + h + ke;
    if denom.abs() < SINGULAR_DET_TOL {
        return Err(FormsError::SingularTransform(format!("1 + H + K_e = {denom:.3e}")));
    }
    Ok(2.0 * k / denom)
}

/// Mean curvature at infinity via the rational formula
/// `H* = (2 - 2 det B) / (1 + tr B + det B)`; agrees with
/// `tr((E+B)^-1(E-B))`.
pub fn mean_curvature_at_infinity(b: &Operator2) -> Result<f64, FormsError> {
    let denom = 1.0 + b.trace() + b.det();
    if denom.abs() < SINGULAR_DET_TOL {
        return Err(FormsError::SingularTransform(format!("1 + tr B + det B = {denom:.3e}")));
    }
    Ok((2.0 - 2.0 * b.det()) / denom)
}

/// Induced metric on the equidistant leaf at signed distance `rho`:
/// `I_rho = I((cosh(rho) E + sinh(rho) B)., (cosh(rho) E + sinh(rho) B).)`.
pub fn equidistant_metric(j: &SurfaceJet, rho: f64) -> SymForm2 {
    let a = Operator2::identity().scale(rho.cosh()).add(&j.shape.scale(rho.sinh()));
    sandwich(&j.metric, &a, &a)
}

/// The same leaf metric written from the data at infinity:
/// `I_rho = 1/2 e^{2 rho} I* + II* + 1/2 e^{-2 rho} III*`.
pub fn equidistant_metric_from_infinity(j: &InfinityJet, rho: f64) -> SymForm2 {
    let istar = j.metric.as_sym().scale(0.5 * (2.0 * rho).exp());
    let iii = j.third_form().scale(0.5 * (-2.0 * rho).exp());
    istar.add(&j.second_form()).add(&iii)
}

/// True iff both principal curvatures (eigenvalues of `B`) lie strictly
/// inside `(-1, 1)`; equivalent to both eigenvalues of `B*` being positive.
pub fn horospherically_convex(b: &Operator2, i: &Metric2) -> bool {
    debug_assert!(b.self_adjoint_defect(i) <= 1e-9 * i.g11.abs().max(i.g22.abs()).max(1.0));
    let (k1, k2) = b.eigenvalues();
    k1 > -1.0 && k2 < 1.0
}

/// A uniform grid of jets at infinity with spacing `h`, row-major with
/// `x` varying fastest. Produced by sampling an Epstein construction.
#[derive(Debug, Clone)]
pub struct JetGrid {
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    jets: Vec<InfinityJet>,
}

impl JetGrid {
    pub fn new(h: f64, nx: usize, ny: usize, jets: Vec<InfinityJet>) -> Result<Self, FormsError> {
        if jets.len() != nx * ny {
            return Err(FormsError::InvalidData(format!(
                "grid size mismatch: {} jets for {}x{}",
                jets.len(),
                nx,
                ny
            )));
        }
        if h <= 0.0 {
            return Err(FormsError::InvalidData("grid step must be positive".into()));
        }
        Ok(Self { h, nx, ny, jets })
    }

    pub fn at(&self, ix: usize, iy: usize) -> &InfinityJet {
        &self.jets[iy * self.nx + ix]
    }
}

/// Norm of a centered-difference approximation of `d^{nabla*} B*` at an
/// interior grid point.
///
/// Uses the connection formula `nabla*_x y = (E+B)^-1 nabla_x((E+B) y)`,
/// with `nabla` the Levi-Civita connection of `I` assembled from Christoffel
/// symbols of centered metric differences. Converges to zero at O(h^2) on
/// fields satisfying the Codazzi equation at infinity.
pub fn codazzi_residual_at_infinity(grid: &JetGrid, ix: usize, iy: usize) -> Result<f64, FormsError> {
    if ix == 0 || iy == 0 || ix + 1 >= grid.nx || iy + 1 >= grid.ny {
        return Err(FormsError::GridTooCoarse(format!(
            "codazzi stencil needs interior point, got ({ix},{iy}) in {}x{}",
            grid.nx, grid.ny
        )));
    }
    let h = grid.h;

    // Surface data (I, B) recovered at the five stencil nodes.
    let center = from_infinity(grid.at(ix, iy))?;
    let xp = from_infinity(grid.at(ix + 1, iy))?;
    let xm = from_infinity(grid.at(ix - 1, iy))?;
    let yp = from_infinity(grid.at(ix, iy + 1))?;
    let ym = from_infinity(grid.at(ix, iy - 1))?;

    // Christoffel symbols of I at the center from centered differences.
    let dgx = [
        (xp.metric.g11 - xm.metric.g11) / (2.0 * h),
        (xp.metric.g12 - xm.metric.g12) / (2.0 * h),
        (xp.metric.g22 - xm.metric.g22) / (2.0 * h),
    ];
    let dgy = [
        (yp.metric.g11 - ym.metric.g11) / (2.0 * h),
        (yp.metric.g12 - ym.metric.g12) / (2.0 * h),
        (yp.metric.g22 - ym.metric.g22) / (2.0 * h),
    ];
    // dg[i][j][l] = d_i g_{jl}
    let dg = [
        [[dgx[0], dgx[1]], [dgx[1], dgx[2]]],
        [[dgy[0], dgy[1]], [dgy[1], dgy[2]]],
    ];
    let gi = center.metric.inverse()?;
    let mut gamma = [[[0.0f64; 2]; 2]; 2]; // gamma[k][i][j]
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for l in 0..2 {
                    s += gi[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                }
                gamma[k][i][j] = 0.5 * s;
            }
        }
    }

    // v_j = (E - B) e_j; note (E+B) B* = E - B, so
    // nabla*_i (B* e_j) = (E+B)^-1 nabla_i v_j.
    let vfield = |jet: &SurfaceJet, j: usize| -> [f64; 2] {
        let emb = Operator2::identity().sub(&jet.shape);
        emb.apply(if j == 0 { [1.0, 0.0] } else { [0.0, 1.0] })
    };

    let mut cov = [[0.0f64; 2]; 2]; // cov[i] = nabla_i v_{j(i)} below
    for (i, j) in [(0usize, 1usize), (1usize, 0usize)] {
        let (plus, minus) = if i == 0 { (&xp, &xm) } else { (&yp, &ym) };
        let vp = vfield(plus, j);
        let vm = vfield(minus, j);
        let v0 = vfield(&center, j);
        for k in 0..2 {
            let partial = (vp[k] - vm[k]) / (2.0 * h);
            let christoffel = gamma[k][i][0] * v0[0] + gamma[k][i][1] * v0[1];
            cov[i][k] = partial + christoffel;
        }
    }

    let diff = [cov[0][0] - cov[1][0], cov[0][1] - cov[1][1]];
    let eb_inv = plus_b(&center.shape)?.inverse()?;
    let w = eb_inv.apply(diff);
    // Length in the metric at infinity.
    let istar = &grid.at(ix, iy).metric;
    Ok(istar.apply(w, w).max(0.0).sqrt())
}

/// Random well-conditioned SPD metric: rotation * diag * rotation^T.
/// Used by the invariant suites and by tests.
pub fn random_metric(rng: &mut impl rand::Rng) -> Metric2 {
    let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = theta.sin_cos();
    let d1: f64 = rng.random_range(0.5..2.0);
    let d2: f64 = rng.random_range(0.5..2.0);
    Metric2 {
        g11: c * c * d1 + s * s * d2,
        g12: s * c * (d1 - d2),
        g22: s * s * d1 + c * c * d2,
    }
}

/// Random B self-adjoint w.r.t. `g` with eigenvalues in `(lo, hi)`:
/// `B = L^-T Q diag(k) Q^T L^T` for the Cholesky factor L of g.
pub fn random_shape(rng: &mut impl rand::Rng, g: &Metric2, lo: f64, hi: f64) -> Operator2 {
    let l11 = g.g11.sqrt();
    let l21 = g.g12 / l11;
    let l22 = (g.g22 - l21 * l21).sqrt();
    let k1: f64 = rng.random_range(lo..hi);
    let k2: f64 = rng.random_range(lo..hi);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = phi.sin_cos();
    let m = [
        [c * c * k1 + s * s * k2, s * c * (k1 - k2)],
        [s * c * (k1 - k2), s * s * k1 + c * c * k2],
    ];
    // L^{-T} = [[1/l11, -l21/(l11 l22)], [0, 1/l22]]
    let lit = [[1.0 / l11, -l21 / (l11 * l22)], [0.0, 1.0 / l22]];
    let lt = [[l11, l21], [0.0, l22]];
    let mut tmp = [[0.0f64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            tmp[i][j] = lit[i][0] * m[0][j] + lit[i][1] * m[1][j];
        }
    }
    let mut b = [[0.0f64; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            b[i][j] = tmp[i][0] * lt[0][j] + tmp[i][1] * lt[1][j];
        }
    }
    Operator2::new(b[0][0], b[0][1], b[1][0], b[1][1])
}

/// Random valid surface jet with principal curvatures in `(lo, hi)`.
pub fn random_jet(rng: &mut impl rand::Rng, lo: f64, hi: f64) -> SurfaceJet {
    let metric = random_metric(rng);
    let shape = random_shape(rng, &metric, lo, hi);
    SurfaceJet::new(metric, shape).expect("constructed self-adjoint")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() <= tol, "{what}: {a} vs {b}, diff {:.3e}", (a - b).abs());
    }

    #[test]
    fn to_infinity_totally_geodesic() {
        let j = SurfaceJet::new(Metric2::identity(), Operator2::zero()).unwrap();
        let inf = to_infinity(&j).unwrap();
        assert_close(inf.metric.g11, 0.5, 1e-15, "I*_11");
        assert_close(inf.metric.g22, 0.5, 1e-15, "I*_22");
        assert_close(inf.metric.g12, 0.0, 1e-15, "I*_12");
        assert_close(inf.shape.b11, 1.0, 1e-15, "B*_11");
        assert_close(inf.shape.b22, 1.0, 1e-15, "B*_22");
        let ii = inf.second_form();
        assert_close(ii.m11, 0.5, 1e-15, "II*_11");
        assert_close(ii.m22, 0.5, 1e-15, "II*_22");
    }

    #[test]
    fn to_infinity_isotropic_exact() {
        // I = E, B = E/2: I* = 9/8 E, B* = E/3.
        let j = SurfaceJet::new(Metric2::identity(), Operator2::identity().scale(0.5)).unwrap();
        let inf = to_infinity(&j).unwrap();
        assert_close(inf.metric.g11, 9.0 / 8.0, 1e-15, "I*");
        assert_close(inf.metric.g22, 9.0 / 8.0, 1e-15, "I*");
        assert_close(inf.shape.b11, 1.0 / 3.0, 1e-15, "B*");
        assert_close(inf.shape.b22, 1.0 / 3.0, 1e-15, "B*");
    }

    #[test]
    fn to_infinity_diagonal_frozen() {
        // I = diag(2,1), B = diag(0.5, -0.25); values from the defining
        // formulas evaluated independently (see matrix_oracle test below).
        let j = SurfaceJet::new(
            Metric2::diagonal(2.0, 1.0).unwrap(),
            Operator2::diagonal(0.5, -0.25),
        )
        .unwrap();
        let inf = to_infinity(&j).unwrap();
        assert_close(inf.metric.g11, 2.25, 1e-14, "I*_11");
        assert_close(inf.metric.g22, 0.28125, 1e-14, "I*_22");
        assert_close(inf.shape.b11, 1.0 / 3.0, 1e-14, "B*_11");
        assert_close(inf.shape.b22, 5.0 / 3.0, 1e-14, "B*_22");
        let ii = inf.second_form();
        assert_close(ii.m11, 0.75, 1e-14, "II*_11");
        assert_close(ii.m22, 0.46875, 1e-14, "II*_22");
    }

    /// Independent 2x2 matrix oracle (nalgebra) applying the defining
    /// formulas; cross-checks the hand-rolled arithmetic on random jets.
    #[test]
    fn matrix_oracle_agreement() {
        use nalgebra::Matrix2;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let j = random_jet(&mut rng, -0.9, 0.9);
            let g = Matrix2::new(j.metric.g11, j.metric.g12, j.metric.g12, j.metric.g22);
            let b = Matrix2::new(j.shape.b11, j.shape.b12, j.shape.b21, j.shape.b22);
            let e = Matrix2::identity();
            let eb = e + b;
            let istar = 0.5 * (eb.transpose() * g * eb);
            let bstar = eb.try_inverse().unwrap() * (e - b);

            let inf = to_infinity(&j).unwrap();
            assert_close(inf.metric.g11, istar[(0, 0)], 1e-12, "I*_11");
            assert_close(inf.metric.g12, istar[(0, 1)], 1e-12, "I*_12");
            assert_close(inf.metric.g22, istar[(1, 1)], 1e-12, "I*_22");
            assert_close(inf.shape.b11, bstar[(0, 0)], 1e-12, "B*_11");
            assert_close(inf.shape.b12, bstar[(0, 1)], 1e-12, "B*_12");
            assert_close(inf.shape.b21, bstar[(1, 0)], 1e-12, "B*_21");
            assert_close(inf.shape.b22, bstar[(1, 1)], 1e-12, "B*_22");

            // II* = 1/2 (E+B)^T G (E-B) against the lowered form.
            let ii_oracle = 0.5 * (eb.transpose() * g * (e - b));
            let ii = inf.second_form();
            assert_close(ii.m11, ii_oracle[(0, 0)], 1e-12, "II*_11");
            assert_close(ii.m22, ii_oracle[(1, 1)], 1e-12, "II*_22");
        }
    }

    #[test]
    fn from_infinity_inverse_of_first_example() {
        let inf = InfinityJet::new(Metric2::identity().scale(0.5), Operator2::identity()).unwrap();
        let j = from_infinity(&inf).unwrap();
        assert_close(j.metric.g11, 1.0, 1e-15, "I_11");
        assert_close(j.metric.g22, 1.0, 1e-15, "I_22");
        assert!(j.shape.b11.abs() < 1e-15 && j.shape.b22.abs() < 1e-15);
    }

    #[test]
    fn from_infinity_diagonal_frozen() {
        // I* = diag(1,2), B* = diag(0.2, 0.1) -> I = diag(0.72, 1.21),
        // B = diag(2/3, 9/11).
        let inf = InfinityJet::new(
            Metric2::diagonal(1.0, 2.0).unwrap(),
            Operator2::diagonal(0.2, 0.1),
        )
        .unwrap();
        let j = from_infinity(&inf).unwrap();
        assert_close(j.metric.g11, 0.72, 1e-14, "I_11");
        assert_close(j.metric.g22, 1.21, 1e-14, "I_22");
        assert_close(j.shape.b11, 2.0 / 3.0, 1e-14, "B_11");
        assert_close(j.shape.b22, 9.0 / 11.0, 1e-14, "B_22");
    }

    #[test]
    fn involution_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let j = random_jet(&mut rng, -0.9, 2.0);
            let back = from_infinity(&to_infinity(&j).unwrap()).unwrap();
            assert_close(back.metric.g11, j.metric.g11, 1e-12, "g11");
            assert_close(back.metric.g12, j.metric.g12, 1e-12, "g12");
            assert_close(back.metric.g22, j.metric.g22, 1e-12, "g22");
            assert_close(back.shape.b11, j.shape.b11, 1e-12, "b11");
            assert_close(back.shape.b12, j.shape.b12, 1e-12, "b12");
            assert_close(back.shape.b21, j.shape.b21, 1e-12, "b21");
            assert_close(back.shape.b22, j.shape.b22, 1e-12, "b22");
        }
    }

    #[test]
    fn singular_transform_detected() {
        // B with eigenvalue exactly -1.
        let j = SurfaceJet::new(Metric2::identity(), Operator2::diagonal(-1.0, 0.3)).unwrap();
        assert!(matches!(to_infinity(&j), Err(FormsError::SingularTransform(_))));
        assert!(matches!(
            curvature_at_infinity(-1.0, -1.0, 0.0),
            Err(FormsError::SingularTransform(_))
        ));
    }

    #[test]
    fn curvature_at_infinity_values() {
        // Totally geodesic: K = -1, H = 0, Ke = 0 -> K* = -2.
        assert_close(curvature_at_infinity(-1.0, 0.0, 0.0).unwrap(), -2.0, 1e-15, "K* geodesic");
        // B = tanh(r) E with tanh r = 1/2: two independent closed forms.
        let (k, h, ke) = (-0.75, 1.0, 0.25);
        let kstar = curvature_at_infinity(k, h, ke).unwrap();
        assert_close(kstar, -2.0 / 3.0, 1e-15, "K* via rational formula");
        // Independent route: I* = 1/2 e^{2r} (hyperbolic), e^{2r} = 3, so
        // K* = -1 / (3/2) = -2/3.
        let e2r = (1.0 + 0.5) / (1.0 - 0.5);
        assert_close(-1.0 / (0.5 * e2r), -2.0 / 3.0, 1e-15, "K* via conformal scale");
        // Generic substitution.
        assert_close(curvature_at_infinity(-0.5, 0.3, 0.5).unwrap(), -5.0 / 9.0, 1e-15, "K*");
    }

    #[test]
    fn mean_curvature_at_infinity_values() {
        assert_close(mean_curvature_at_infinity(&Operator2::zero()).unwrap(), 2.0, 1e-15, "H*");
        let b = Operator2::identity().scale(0.5);
        assert_close(mean_curvature_at_infinity(&b).unwrap(), 2.0 / 3.0, 1e-15, "H* isotropic");
        // Two-route oracle on random self-adjoint B.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let j = random_jet(&mut rng, -0.9, 2.0);
            let rational = mean_curvature_at_infinity(&j.shape).unwrap();
            let eb = plus_b(&j.shape).unwrap();
            let trace_route = eb.inverse().unwrap().mul(&Operator2::identity().sub(&j.shape)).trace();
            assert_close(rational, trace_route, 1e-12, "H* two routes");
        }
    }

    #[test]
    fn gauss_at_infinity_identity() {
        // H* + K* = 0 with K derived through the Gauss equation.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let j = random_jet(&mut rng, -0.9, 2.0);
            let h = mean_curvature_at_infinity(&j.shape).unwrap();
            let k = curvature_at_infinity(
                j.gauss_curvature(),
                j.mean_curvature(),
                j.extrinsic_curvature(),
            )
            .unwrap();
            assert!((h + k).abs() < 1e-12, "H* + K* = {:.3e}", h + k);
        }
    }

    #[test]
    fn equidistant_metric_special_cases() {
        let j = SurfaceJet::new(Metric2::identity(), Operator2::zero()).unwrap();
        let rho = 0.8;
        let m = equidistant_metric(&j, rho);
        assert_close(m.m11, rho.cosh() * rho.cosh(), 1e-14, "cosh^2 I");
        let j = SurfaceJet::new(Metric2::identity(), Operator2::identity()).unwrap();
        let m = equidistant_metric(&j, rho);
        assert_close(m.m11, (2.0 * rho).exp(), 1e-13, "horospherical e^{2 rho}");
        // rho = 0 returns I.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let j = random_jet(&mut rng, -0.9, 0.9);
            let m = equidistant_metric(&j, 0.0);
            assert_close(m.m11, j.metric.g11, 1e-13, "I_0 = I");
            assert_close(m.m12, j.metric.g12, 1e-13, "I_0 = I");
            assert_close(m.m22, j.metric.g22, 1e-13, "I_0 = I");
        }
    }

    #[test]
    fn equidistant_metric_generic_oracle() {
        use nalgebra::Matrix2;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let rho = 0.7f64;
        for _ in 0..200 {
            let j = random_jet(&mut rng, -0.9, 0.9);
            let g = Matrix2::new(j.metric.g11, j.metric.g12, j.metric.g12, j.metric.g22);
            let b = Matrix2::new(j.shape.b11, j.shape.b12, j.shape.b21, j.shape.b22);
            let a = Matrix2::identity() * rho.cosh() + b * rho.sinh();
            let oracle = a.transpose() * g * a;
            let m = equidistant_metric(&j, rho);
            assert_close(m.m11, oracle[(0, 0)], 1e-12, "I_rho 11");
            assert_close(m.m12, oracle[(0, 1)], 1e-12, "I_rho 12");
            assert_close(m.m22, oracle[(1, 1)], 1e-12, "I_rho 22");
        }
    }

    #[test]
    fn equidistant_from_infinity_cases() {
        // B* = 0: I_rho = 1/2 e^{2 rho} I*.
        let inf = InfinityJet::new(Metric2::identity(), Operator2::zero()).unwrap();
        let m = equidistant_metric_from_infinity(&inf, 1.3);
        assert_close(m.m11, 0.5 * (2.6f64).exp(), 1e-13, "B*=0 leaf");
        // Fuchsian: II* = 1/2 I*, III* = 1/4 I*.
        let inf = InfinityJet::new(Metric2::identity(), Operator2::identity().scale(0.5)).unwrap();
        let rho = 0.4;
        let m = equidistant_metric_from_infinity(&inf, rho);
        let expect = 0.5 * (2.0 * rho).exp() + 0.5 + 0.125 * (-2.0 * rho).exp();
        assert_close(m.m11, expect, 1e-14, "fuchsian leaf");
        assert_close(m.m22, expect, 1e-14, "fuchsian leaf");
    }

    #[test]
    fn equidistant_two_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..1000 {
            let j = random_jet(&mut rng, -0.9, 0.9);
            let inf = to_infinity(&j).unwrap();
            for rho in [-1.0, -0.3, 0.0, 0.7, 1.5] {
                let a = equidistant_metric(&j, rho);
                let b = equidistant_metric_from_infinity(&inf, rho);
                assert!(a.sub(&b).max_abs() < 1e-12, "routes differ at rho={rho}");
            }
        }
    }

    #[test]
    fn horospherical_convexity() {
        assert!(horospherically_convex(&Operator2::zero(), &Metric2::identity()));
        assert!(!horospherically_convex(&Operator2::diagonal(1.0, 0.0), &Metric2::identity()));
        // Equivalence with positivity of B* eigenvalues.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10_000 {
            let j = random_jet(&mut rng, -2.0, 2.0);
            if plus_b(&j.shape).is_err() {
                continue;
            }
            let convex = horospherically_convex(&j.shape, &j.metric);
            let inf = to_infinity(&j);
            match inf {
                Ok(inf) => {
                    let (k1, _) = inf.shape.eigenvalues();
                    assert_eq!(convex, k1 > 0.0, "B eigen {:?}", j.shape.eigenvalues());
                }
                Err(_) => assert!(!convex),
            }
        }
    }

    #[test]
    fn traceless_part_has_zero_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..1000 {
            let j = random_jet(&mut rng, -0.9, 2.0);
            let inf = to_infinity(&j).unwrap();
            let t = inf.traceless_second_form().trace_with(&inf.metric).unwrap();
            assert!(t.abs() < 1e-12, "tr II*_0 = {t:.3e}");
        }
    }

    #[test]
    fn self_adjointness_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..1000 {
            let j = random_jet(&mut rng, -0.9, 2.0);
            let inf = to_infinity(&j).unwrap();
            assert!(inf.shape.self_adjoint_defect(&inf.metric) < 1e-11);
        }
    }

    #[test]
    fn convexity_gives_positive_leaves() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..500 {
            let j = random_jet(&mut rng, -0.99, 0.99);
            if !horospherically_convex(&j.shape, &j.metric) {
                continue;
            }
            for rho in [-3.0, -1.0, 0.0, 1.0, 3.0] {
                let m = equidistant_metric(&j, rho);
                assert!(m.into_metric().is_ok(), "leaf not positive at rho={rho}");
            }
        }
    }

    #[test]
    fn codazzi_constant_field_is_exact_zero() {
        // Fuchsian jet constant over the grid.
        let jet = InfinityJet::new(Metric2::identity(), Operator2::identity().scale(0.5)).unwrap();
        let grid = JetGrid::new(0.1, 5, 5, vec![jet; 25]).unwrap();
        let r = codazzi_residual_at_infinity(&grid, 2, 2).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn codazzi_needs_interior_point() {
        let jet = InfinityJet::new(Metric2::identity(), Operator2::identity().scale(0.5)).unwrap();
        let grid = JetGrid::new(0.1, 3, 3, vec![jet; 9]).unwrap();
        assert!(matches!(
            codazzi_residual_at_infinity(&grid, 0, 1),
            Err(FormsError::GridTooCoarse(_))
        ));
    }
}
