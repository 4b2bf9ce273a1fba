//! Epstein surfaces in the upper half-space model, built from a Liouville
//! field `phi` on a planar domain.
//!
//! The metric at infinity is `I* = e^phi |dz|^2`. The map into H^3 at
//! foliation parameter `rho` is
//!
//! ```text
//! xi = sqrt(2) e^{-rho} e^{-phi/2} / D
//! y  = z + phi_zbar e^{-2 rho} e^{-phi} / D
//! D  = 1 + 1/2 e^{-2 rho} e^{-phi} |phi_z|^2
//! ```
//!
//! and the induced leaf metric equals
//! `1/2 e^{2 rho} I* + II* + 1/2 e^{-2 rho} III*` exactly, with
//! `II* = 1/2 (theta dz^2 + conj(theta) dzbar^2) + phi_zzbar dz dzbar` and
//! `theta = phi_zz - 1/2 phi_z^2`.
//!
//! Curvature convention: the Gaussian curvature of `e^phi |dz|^2` is
//! `K* = -2 e^{-phi} phi_zzbar`, fixed by the calibration case
//! `e^phi = 4/(1-|z|^2)^2  =>  K* = -1` on the unit disk.

use num_complex::Complex64;
use thiserror::Error;

use crate::forms::{raise, FormsError, InfinityJet, JetGrid, Metric2, SymForm2};

#[derive(Debug, Error)]
pub enum EpsteinError {
    /// Evaluation point (or a stencil neighbor) lies outside the field's domain.
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    /// A finite-difference stencil does not fit in the sampled grid.
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("malformed field table: {0}")]
    Parse(String),
    #[error(transparent)]
    Forms(#[from] FormsError),
}

/// Planar region on which a Liouville field lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Plane,
    /// `x0 <= x <= x1`, `y0 <= y <= y1`.
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// `|z| < radius`.
    Disk { radius: f64 },
    /// `r_inner < |z| < r_outer`.
    Annulus { r_inner: f64, r_outer: f64 },
    /// `y0 < Im z < y1` (x unbounded).
    Strip { y0: f64, y1: f64 },
    /// Upper half-plane `Im z > 0`.
    HalfPlane,
}

impl Domain {
    /// Membership with a safety margin (stencils must stay inside).
    pub fn contains(&self, z: Complex64, margin: f64) -> bool {
        match *self {
            Domain::Plane => true,
            Domain::Rectangle { x0, x1, y0, y1 } => {
                z.re >= x0 + margin && z.re <= x1 - margin && z.im >= y0 + margin && z.im <= y1 - margin
            }
            Domain::Disk { radius } => z.norm() < radius - margin,
            Domain::Annulus { r_inner, r_outer } => {
                z.norm() > r_inner + margin && z.norm() < r_outer - margin
            }
            Domain::Strip { y0, y1 } => z.im > y0 + margin && z.im < y1 - margin,
            Domain::HalfPlane => z.im > margin,
        }
    }
}

/// Field value and derivatives at a point. `phi` is real, so
/// `phi_zbar = conj(phi_z)` and `phi_zzbar` is real.
#[derive(Debug, Clone, Copy)]
pub struct FieldJet {
    pub phi: f64,
    pub phi_z: Complex64,
    pub phi_zz: Complex64,
    pub phi_zzbar: f64,
}

/// How derivatives are produced for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffMode {
    /// Closed-form derivative closures (built-in fields).
    Analytic,
    /// Centered second-order stencils on the grid step.
    Stencil,
    /// Centered stencils with one Richardson extrapolation level (fourth order).
    StencilRichardson,
}

#[derive(Debug, Clone)]
enum FieldKind {
    /// `phi = 0`.
    Flat,
    /// `phi = -2 log Im z` on the upper half-plane.
    HalfPlaneHyperbolic,
    /// `e^phi = 4 / (1 - |z|^2)^2` on the unit disk.
    DiskHyperbolic,
    /// `e^phi = 1 / sin^2(Im z)` on the strip `0 < Im z < pi`.
    StripHyperbolic,
    /// `e^phi = alpha^2 / (|w| sin(alpha log |w|))^2` on `1 < |w| < modulus`,
    /// `alpha = pi / log(modulus)`.
    AnnulusHyperbolic { modulus: f64 },
    /// `phi = |z|^2`; not a Liouville solution (negative control).
    NonSolutionQuadratic,
    /// Values sampled on a uniform Cartesian grid.
    Grid(GridField),
}

/// A conformal factor on a planar domain with derivative access.
#[derive(Debug, Clone)]
pub struct LiouvilleField {
    kind: FieldKind,
    pub domain: Domain,
    pub diff_mode: DiffMode,
}

impl LiouvilleField {
    pub fn flat() -> Self {
        Self { kind: FieldKind::Flat, domain: Domain::Plane, diff_mode: DiffMode::Analytic }
    }

    pub fn half_plane_hyperbolic() -> Self {
        Self {
            kind: FieldKind::HalfPlaneHyperbolic,
            domain: Domain::HalfPlane,
            diff_mode: DiffMode::Analytic,
        }
    }

    pub fn disk_hyperbolic() -> Self {
        Self {
            kind: FieldKind::DiskHyperbolic,
            domain: Domain::Disk { radius: 1.0 },
            diff_mode: DiffMode::Analytic,
        }
    }

    pub fn strip_hyperbolic() -> Self {
        Self {
            kind: FieldKind::StripHyperbolic,
            domain: Domain::Strip { y0: 0.0, y1: std::f64::consts::PI },
            diff_mode: DiffMode::Analytic,
        }
    }

    pub fn annulus_hyperbolic(modulus: f64) -> Result<Self, EpsteinError> {
        if modulus <= 1.0 {
            return Err(EpsteinError::Parse(format!("annulus modulus must exceed 1, got {modulus}")));
        }
        Ok(Self {
            kind: FieldKind::AnnulusHyperbolic { modulus },
            domain: Domain::Annulus { r_inner: 1.0, r_outer: modulus },
            diff_mode: DiffMode::Analytic,
        })
    }

    /// Negative control: curvature of `e^phi |dz|^2` is not constant.
    pub fn non_solution_quadratic() -> Self {
        Self {
            kind: FieldKind::NonSolutionQuadratic,
            domain: Domain::Plane,
            diff_mode: DiffMode::Analytic,
        }
    }

    /// Select a built-in field by name: `flat`, `halfplane`, `disk`, `strip`,
    /// `annulus` (takes the modulus R), `quadratic`.
    pub fn builtin(name: &str, param: Option<f64>) -> Result<Self, EpsteinError> {
        match name {
            "flat" => Ok(Self::flat()),
            "halfplane" => Ok(Self::half_plane_hyperbolic()),
            "disk" => Ok(Self::disk_hyperbolic()),
            "strip" => Ok(Self::strip_hyperbolic()),
            "annulus" => Self::annulus_hyperbolic(param.unwrap_or(std::f64::consts::E)),
            "quadratic" => Ok(Self::non_solution_quadratic()),
            other => Err(EpsteinError::Parse(format!(
                "unknown field '{other}' (expected flat|halfplane|disk|strip|annulus|quadratic)"
            ))),
        }
    }

    /// Load a gridded field from a plain-text table of `x y phi` rows with a
    /// declared grid step. Rows may appear in any order but must fill a
    /// complete rectangular grid.
    pub fn from_table(text: &str, step: f64) -> Result<Self, EpsteinError> {
        let grid = GridField::parse(text, step)?;
        let domain = Domain::Rectangle {
            x0: grid.x0,
            x1: grid.x0 + step * (grid.nx - 1) as f64,
            y0: grid.y0,
            y1: grid.y0 + step * (grid.ny - 1) as f64,
        };
        Ok(Self { kind: FieldKind::Grid(grid), domain, diff_mode: DiffMode::Stencil })
    }

    /// Sample any field onto a uniform grid (used to exercise the stencil
    /// differentiation path against analytic closures).
    pub fn sample_to_grid(
        &self,
        origin: Complex64,
        step: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self, EpsteinError> {
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let z = origin + Complex64::new(step * ix as f64, step * iy as f64);
                values.push(self.phi(z)?);
            }
        }
        let grid = GridField { x0: origin.re, y0: origin.im, h: step, nx, ny, values };
        let domain = Domain::Rectangle {
            x0: origin.re,
            x1: origin.re + step * (nx - 1) as f64,
            y0: origin.im,
            y1: origin.im + step * (ny - 1) as f64,
        };
        Ok(Self { kind: FieldKind::Grid(grid), domain, diff_mode: DiffMode::Stencil })
    }

    pub fn with_diff_mode(mut self, mode: DiffMode) -> Self {
        self.diff_mode = mode;
        self
    }

    /// Conformal factor at a point.
    pub fn phi(&self, z: Complex64) -> Result<f64, EpsteinError> {
        match &self.kind {
            FieldKind::Grid(grid) => grid.phi_at(z),
            _ => {
                self.check_domain(z)?;
                Ok(self.analytic_jet(z).phi)
            }
        }
    }

    /// Field value and first/second derivatives.
    pub fn jet(&self, z: Complex64) -> Result<FieldJet, EpsteinError> {
        match &self.kind {
            FieldKind::Grid(grid) => match self.diff_mode {
                DiffMode::StencilRichardson => grid.jet_richardson(z),
                _ => grid.jet_stencil(z),
            },
            _ => {
                self.check_domain(z)?;
                Ok(self.analytic_jet(z))
            }
        }
    }

    fn check_domain(&self, z: Complex64) -> Result<(), EpsteinError> {
        if !self.domain.contains(z, 0.0) {
            return Err(EpsteinError::OutOfDomain(format!("z = {z} outside {:?}", self.domain)));
        }
        Ok(())
    }

    fn analytic_jet(&self, z: Complex64) -> FieldJet {
        match &self.kind {
            FieldKind::Flat => FieldJet {
                phi: 0.0,
                phi_z: Complex64::ZERO,
                phi_zz: Complex64::ZERO,
                phi_zzbar: 0.0,
            },
            FieldKind::HalfPlaneHyperbolic => {
                // phi = -2 log Im z
                let y = z.im;
                let zmzbar = Complex64::new(0.0, 2.0 * y); // z - conj(z)
                FieldJet {
                    phi: -2.0 * y.ln(),
                    phi_z: -2.0 / zmzbar,
                    phi_zz: 2.0 / (zmzbar * zmzbar),
                    phi_zzbar: 1.0 / (2.0 * y * y),
                }
            }
            FieldKind::DiskHyperbolic => {
                // phi = log 4 - 2 log(1 - z zbar)
                let r2 = z.norm_sqr();
                let one_m = 1.0 - r2;
                let zbar = z.conj();
                FieldJet {
                    phi: 4.0f64.ln() - 2.0 * one_m.ln(),
                    phi_z: 2.0 * zbar / one_m,
                    phi_zz: 2.0 * zbar * zbar / (one_m * one_m),
                    phi_zzbar: 2.0 / (one_m * one_m),
                }
            }
            FieldKind::StripHyperbolic => {
                // phi = -2 log sin(Im z) on 0 < Im z < pi
                let y = z.im;
                let (s, c) = y.sin_cos();
                let cot = c / s;
                let csc2 = 1.0 / (s * s);
                FieldJet {
                    phi: -2.0 * s.ln(),
                    phi_z: Complex64::new(0.0, cot),
                    phi_zz: Complex64::new(-0.5 * csc2, 0.0),
                    phi_zzbar: 0.5 * csc2,
                }
            }
            FieldKind::AnnulusHyperbolic { modulus } => {
                // phi = 2 log alpha - 2 log|w| - 2 log sin(alpha log|w|)
                let alpha = std::f64::consts::PI / modulus.ln();
                let l = z.norm().ln();
                let (s, c) = (alpha * l).sin_cos();
                let cot = c / s;
                let csc2 = 1.0 / (s * s);
                let w2 = z * z;
                FieldJet {
                    phi: 2.0 * alpha.ln() - 2.0 * l - 2.0 * s.ln(),
                    phi_z: -(1.0 + alpha * cot) / z,
                    phi_zz: (1.0 + alpha * cot) / w2 + alpha * alpha * csc2 / (2.0 * w2),
                    phi_zzbar: alpha * alpha * csc2 / (2.0 * z.norm_sqr()),
                }
            }
            FieldKind::NonSolutionQuadratic => {
                // phi = z zbar
                FieldJet {
                    phi: z.norm_sqr(),
                    phi_z: z.conj(),
                    phi_zz: Complex64::ZERO,
                    phi_zzbar: 1.0,
                }
            }
            FieldKind::Grid(_) => unreachable!("grid fields use stencils"),
        }
    }

    /// Metric at infinity `I* = e^phi |dz|^2` at a point.
    pub fn metric_at_infinity(&self, z: Complex64) -> Result<Metric2, EpsteinError> {
        let ephi = self.phi(z)?.exp();
        Ok(Metric2 { g11: ephi, g12: 0.0, g22: ephi })
    }

    /// Gaussian curvature of `I*`: `K* = -2 e^{-phi} phi_zzbar`.
    pub fn curvature_at_infinity(&self, z: Complex64) -> Result<f64, EpsteinError> {
        let j = self.jet(z)?;
        Ok(-2.0 * (-j.phi).exp() * j.phi_zzbar)
    }

    /// Full jet at infinity `(I*, B*)` at a point.
    pub fn infinity_jet(&self, z: Complex64) -> Result<InfinityJet, EpsteinError> {
        let istar = self.metric_at_infinity(z)?;
        let ii = self.second_form_at_infinity(z)?;
        let bstar = raise(&istar, &ii)?;
        Ok(InfinityJet::new(istar, bstar)?)
    }

    /// Sample `(I*, B*)` on a uniform grid for finite-difference work.
    pub fn jet_grid(
        &self,
        origin: Complex64,
        h: f64,
        nx: usize,
        ny: usize,
    ) -> Result<JetGrid, EpsteinError> {
        let mut jets = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                let z = origin + Complex64::new(h * ix as f64, h * iy as f64);
                jets.push(self.infinity_jet(z)?);
            }
        }
        Ok(JetGrid::new(h, nx, ny, jets)?)
    }

    /// The quadratic-differential coefficient `theta = phi_zz - 1/2 phi_z^2`.
    ///
    /// Built-in fields return the simplified closed form (so constants come
    /// out bit-exact); gridded fields combine the stencil derivatives.
    pub fn theta(&self, z: Complex64) -> Result<Complex64, EpsteinError> {
        match &self.kind {
            FieldKind::Grid(_) => {
                let j = self.jet(z)?;
                Ok(j.phi_zz - 0.5 * j.phi_z * j.phi_z)
            }
            _ => {
                self.check_domain(z)?;
                Ok(self.analytic_theta(z))
            }
        }
    }

    fn analytic_theta(&self, z: Complex64) -> Complex64 {
        match &self.kind {
            FieldKind::Flat | FieldKind::HalfPlaneHyperbolic | FieldKind::DiskHyperbolic => {
                Complex64::ZERO
            }
            FieldKind::StripHyperbolic => Complex64::new(-0.5, 0.0),
            FieldKind::AnnulusHyperbolic { modulus } => {
                let alpha = std::f64::consts::PI / modulus.ln();
                (1.0 + alpha * alpha) / (2.0 * z * z)
            }
            FieldKind::NonSolutionQuadratic => -0.5 * z.conj() * z.conj(),
            FieldKind::Grid(_) => unreachable!("grid fields combine stencil derivatives"),
        }
    }

    /// Second fundamental form at infinity in real coordinates:
    /// `II* = 1/2 (theta dz^2 + conj(theta) dzbar^2) + phi_zzbar dz dzbar`.
    pub fn second_form_at_infinity(&self, z: Complex64) -> Result<SymForm2, EpsteinError> {
        let j = self.jet(z)?;
        let theta = self.theta(z)?;
        Ok(SymForm2 {
            m11: j.phi_zzbar + theta.re,
            m12: -theta.im,
            m22: j.phi_zzbar - theta.re,
        })
    }

    /// Principal curvatures at infinity `e^{-phi}(phi_zzbar -+ |theta|)`,
    /// sorted ascending.
    pub fn principal_curvatures_at_infinity(&self, z: Complex64) -> Result<(f64, f64), EpsteinError> {
        let j = self.jet(z)?;
        let theta = self.theta(z)?;
        let e = (-j.phi).exp();
        Ok((e * (j.phi_zzbar - theta.norm()), e * (j.phi_zzbar + theta.norm())))
    }

    /// The Epstein map at foliation parameter `rho`.
    pub fn epstein_map(&self, z: Complex64, rho: f64) -> Result<H3Point, EpsteinError> {
        let j = self.jet(z)?;
        let e2r = (-2.0 * rho).exp();
        let emphi = (-j.phi).exp();
        let d = 1.0 + 0.5 * e2r * emphi * j.phi_z.norm_sqr();
        let xi = std::f64::consts::SQRT_2 * (-rho).exp() * (-0.5 * j.phi).exp() / d;
        let y = z + j.phi_z.conj() * e2r * emphi / d;
        Ok(H3Point { y, xi })
    }

    /// Induced metric on the `rho`-leaf by centered-difference pullback of the
    /// ambient metric `(|dy|^2 + dxi^2)/xi^2` through the Epstein map.
    pub fn induced_metric_numeric(
        &self,
        z: Complex64,
        rho: f64,
        h: f64,
    ) -> Result<Metric2, EpsteinError> {
        if !self.domain.contains(z, 2.0 * h) {
            return Err(EpsteinError::GridTooCoarse(format!(
                "stencil of half-width 2h = {:.3e} leaves the domain at z = {z}",
                2.0 * h
            )));
        }
        let center = self.epstein_map(z, rho)?;
        let px = self.epstein_map(z + h, rho)?;
        let mx = self.epstein_map(z - h, rho)?;
        let py = self.epstein_map(z + Complex64::new(0.0, h), rho)?;
        let my = self.epstein_map(z - Complex64::new(0.0, h), rho)?;

        let dxy = (px.y - mx.y) / (2.0 * h);
        let dyy = (py.y - my.y) / (2.0 * h);
        let dxxi = (px.xi - mx.xi) / (2.0 * h);
        let dyxi = (py.xi - my.xi) / (2.0 * h);
        let xi2 = center.xi * center.xi;

        let g11 = (dxy.norm_sqr() + dxxi * dxxi) / xi2;
        let g22 = (dyy.norm_sqr() + dyxi * dyxi) / xi2;
        let g12 = ((dxy * dyy.conj()).re + dxxi * dyxi) / xi2;
        Ok(Metric2::new(g11, g12, g22)?)
    }

    /// Max-abs defect between the finite-difference leaf metric and the exact
    /// expansion `1/2 e^{2 rho} I* + II* + 1/2 e^{-2 rho} III*`.
    pub fn expansion_check(&self, z: Complex64, rho: f64, h: f64) -> Result<f64, EpsteinError> {
        let numeric = self.induced_metric_numeric(z, rho, h)?;
        let istar = self.metric_at_infinity(z)?;
        let ii = self.second_form_at_infinity(z)?;
        // III* = II* (I*)^-1 II*
        let gi = istar.inverse()?;
        let iii = {
            let a = &ii;
            // tmp = (I*)^-1 II*
            let t11 = gi[0][0] * a.m11 + gi[0][1] * a.m12;
            let t12 = gi[0][0] * a.m12 + gi[0][1] * a.m22;
            let t21 = gi[1][0] * a.m11 + gi[1][1] * a.m12;
            let t22 = gi[1][0] * a.m12 + gi[1][1] * a.m22;
            SymForm2 {
                m11: a.m11 * t11 + a.m12 * t21,
                m12: a.m11 * t12 + a.m12 * t22,
                m22: a.m12 * t12 + a.m22 * t22,
            }
        };
        let formula = istar
            .as_sym()
            .scale(0.5 * (2.0 * rho).exp())
            .add(&ii)
            .add(&iii.scale(0.5 * (-2.0 * rho).exp()));
        Ok(numeric.as_sym().sub(&formula).max_abs())
    }

    /// `|d theta / d zbar|` by centered differences; vanishes at O(h^2) when
    /// the field solves the Liouville equation (constant curvature).
    pub fn dbar_theta(&self, z: Complex64, h: f64) -> Result<f64, EpsteinError> {
        if !self.domain.contains(z, 2.0 * h) {
            return Err(EpsteinError::GridTooCoarse(format!(
                "dbar stencil of half-width h = {h:.3e} leaves the domain at z = {z}"
            )));
        }
        let tp = self.theta(z + h)?;
        let tm = self.theta(z - h)?;
        let tpi = self.theta(z + Complex64::new(0.0, h))?;
        let tmi = self.theta(z - Complex64::new(0.0, h))?;
        let dx = (tp - tm) / (2.0 * h);
        let dy = (tpi - tmi) / (2.0 * h);
        // d/dzbar = 1/2 (d/dx + i d/dy)
        Ok((0.5 * (dx + Complex64::I * dy)).norm())
    }
}

/// Point of the upper half-space model: boundary coordinate `y` and height
/// `xi > 0`.
#[derive(Debug, Clone, Copy)]
pub struct H3Point {
    pub y: Complex64,
    pub xi: f64,
}

/// Uniform Cartesian samples of a conformal factor.
#[derive(Debug, Clone)]
pub struct GridField {
    x0: f64,
    y0: f64,
    h: f64,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl GridField {
    fn parse(text: &str, step: f64) -> Result<Self, EpsteinError> {
        if step <= 0.0 {
            return Err(EpsteinError::Parse("grid step must be positive".into()));
        }
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(EpsteinError::Parse(format!(
                    "line {}: expected 'x y phi', got {} fields",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str, what: &str| -> Result<f64, EpsteinError> {
                s.parse::<f64>().map_err(|_| {
                    EpsteinError::Parse(format!("line {}: bad {what} '{s}'", lineno + 1))
                })
            };
            rows.push((parse(fields[0], "x")?, parse(fields[1], "y")?, parse(fields[2], "phi")?));
        }
        if rows.is_empty() {
            return Err(EpsteinError::Parse("empty field table".into()));
        }
        let x0 = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
        let y0 = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let x1 = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
        let y1 = rows.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let nx = ((x1 - x0) / step).round() as usize + 1;
        let ny = ((y1 - y0) / step).round() as usize + 1;
        if nx * ny != rows.len() {
            return Err(EpsteinError::Parse(format!(
                "expected {nx}x{ny} = {} rows for step {step}, got {}",
                nx * ny,
                rows.len()
            )));
        }
        let mut values = vec![f64::NAN; nx * ny];
        for (x, y, phi) in rows {
            let ix = ((x - x0) / step).round() as usize;
            let iy = ((y - y0) / step).round() as usize;
            if (x - (x0 + step * ix as f64)).abs() > 1e-9 * step
                || (y - (y0 + step * iy as f64)).abs() > 1e-9 * step
            {
                return Err(EpsteinError::Parse(format!(
                    "sample ({x}, {y}) is off the declared step-{step} grid"
                )));
            }
            values[iy * nx + ix] = phi;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(EpsteinError::Parse("grid has missing samples".into()));
        }
        Ok(Self { x0, y0, h: step, nx, ny, values })
    }

    fn index_of(&self, z: Complex64) -> Result<(usize, usize), EpsteinError> {
        let fx = (z.re - self.x0) / self.h;
        let fy = (z.im - self.y0) / self.h;
        let ix = fx.round();
        let iy = fy.round();
        if (fx - ix).abs() > 1e-6 || (fy - iy).abs() > 1e-6 {
            return Err(EpsteinError::OutOfDomain(format!(
                "gridded field can only be evaluated at grid nodes, z = {z} is off-grid"
            )));
        }
        if ix < 0.0 || iy < 0.0 || ix as usize >= self.nx || iy as usize >= self.ny {
            return Err(EpsteinError::OutOfDomain(format!("z = {z} outside grid")));
        }
        Ok((ix as usize, iy as usize))
    }

    fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    fn phi_at(&self, z: Complex64) -> Result<f64, EpsteinError> {
        let (ix, iy) = self.index_of(z)?;
        Ok(self.value(ix, iy))
    }

    /// Centered stencil of half-width `r` nodes around `z`.
    fn patch(&self, z: Complex64, r: usize) -> Result<(usize, usize), EpsteinError> {
        let (ix, iy) = self.index_of(z)?;
        if ix < r || iy < r || ix + r >= self.nx || iy + r >= self.ny {
            return Err(EpsteinError::GridTooCoarse(format!(
                "stencil of half-width {r} does not fit at node ({ix},{iy}) of {}x{}",
                self.nx, self.ny
            )));
        }
        Ok((ix, iy))
    }

    fn jet_at_spacing(&self, ix: usize, iy: usize, k: usize) -> FieldJet {
        let h = self.h * k as f64;
        let f = |dx: isize, dy: isize| -> f64 {
            self.value(
                (ix as isize + dx * k as isize) as usize,
                (iy as isize + dy * k as isize) as usize,
            )
        };
        let c = f(0, 0);
        let fx = (f(1, 0) - f(-1, 0)) / (2.0 * h);
        let fy = (f(0, 1) - f(0, -1)) / (2.0 * h);
        let fxx = (f(1, 0) - 2.0 * c + f(-1, 0)) / (h * h);
        let fyy = (f(0, 1) - 2.0 * c + f(0, -1)) / (h * h);
        let fxy = (f(1, 1) - f(1, -1) - f(-1, 1) + f(-1, -1)) / (4.0 * h * h);
        FieldJet {
            phi: c,
            phi_z: 0.5 * Complex64::new(fx, -fy),
            phi_zz: 0.25 * Complex64::new(fxx - fyy, -2.0 * fxy),
            phi_zzbar: 0.25 * (fxx + fyy),
        }
    }

    fn jet_stencil(&self, z: Complex64) -> Result<FieldJet, EpsteinError> {
        let (ix, iy) = self.patch(z, 1)?;
        Ok(self.jet_at_spacing(ix, iy, 1))
    }

    /// Richardson extrapolation of the centered stencils: combines the step-h
    /// and step-2h jets to fourth order.
    fn jet_richardson(&self, z: Complex64) -> Result<FieldJet, EpsteinError> {
        let (ix, iy) = self.patch(z, 2)?;
        let fine = self.jet_at_spacing(ix, iy, 1);
        let coarse = self.jet_at_spacing(ix, iy, 2);
        let combine = |a: Complex64, b: Complex64| (4.0 * a - b) / 3.0;
        Ok(FieldJet {
            phi: fine.phi,
            phi_z: combine(fine.phi_z, coarse.phi_z),
            phi_zz: combine(fine.phi_zz, coarse.phi_zz),
            phi_zzbar: (4.0 * fine.phi_zzbar - coarse.phi_zzbar) / 3.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn flat_field_map() {
        let f = LiouvilleField::flat();
        for rho in [0.0, 1.0, 2.5] {
            let p = f.epstein_map(c(0.3, -0.7), rho).unwrap();
            assert!((p.xi - std::f64::consts::SQRT_2 * (-rho).exp()).abs() < 1e-15);
            assert!((p.y - c(0.3, -0.7)).norm() < 1e-15);
        }
    }

    #[test]
    fn half_plane_map_frozen() {
        // phi = -2 log Im z at z = i, rho = 0: xi = 2 sqrt(2)/3, y = i/3.
        let f = LiouvilleField::half_plane_hyperbolic();
        let p = f.epstein_map(c(0.0, 1.0), 0.0).unwrap();
        assert!((p.xi - 2.0 * std::f64::consts::SQRT_2 / 3.0).abs() < 1e-15, "xi = {}", p.xi);
        assert!((p.y - c(0.0, 1.0 / 3.0)).norm() < 1e-15, "y = {}", p.y);
    }

    #[test]
    fn map_limit_large_rho() {
        let f = LiouvilleField::disk_hyperbolic();
        let z = c(0.2, 0.4);
        let p = f.epstein_map(z, 30.0).unwrap();
        assert!((p.y - z).norm() < 1e-20);
        assert!(p.xi > 0.0 && p.xi < 1e-12);
    }

    #[test]
    fn theta_values() {
        let f = LiouvilleField::flat();
        assert!(f.theta(c(0.5, 0.5)).unwrap().norm() < 1e-15);
        // Fuchsian fields: theta vanishes identically.
        let f = LiouvilleField::half_plane_hyperbolic();
        for z in [c(0.0, 1.0), c(2.0, 0.3), c(-1.0, 4.0)] {
            assert!(f.theta(z).unwrap().norm() < 1e-14, "theta(half-plane) at {z}");
        }
        let f = LiouvilleField::disk_hyperbolic();
        for z in [c(0.0, 0.0), c(0.3, 0.1), c(-0.5, 0.6)] {
            assert!(f.theta(z).unwrap().norm() < 1e-14, "theta(disk) at {z}");
        }
        // Strip: theta = -1/2 everywhere.
        let f = LiouvilleField::strip_hyperbolic();
        for z in [c(0.0, 1.0), c(3.0, 0.4), c(-2.0, 2.8)] {
            let t = f.theta(z).unwrap();
            assert!((t - c(-0.5, 0.0)).norm() < 1e-12, "theta(strip) = {t} at {z}");
        }
    }

    #[test]
    fn annulus_theta_closed_form() {
        for modulus in [2.0, std::f64::consts::E, 10.0] {
            let f = LiouvilleField::annulus_hyperbolic(modulus).unwrap();
            let alpha = std::f64::consts::PI / modulus.ln();
            for w in [c(1.3, 0.2), c(0.0, 1.2), c(-1.1, 0.9)] {
                if !f.domain.contains(w, 1e-6) {
                    continue;
                }
                let expect = (1.0 + alpha * alpha) / (2.0 * w * w);
                let j = f.jet(w).unwrap();
                let got = j.phi_zz - 0.5 * j.phi_z * j.phi_z;
                assert!((got - expect).norm() < 1e-8, "theta(annulus R={modulus}) at {w}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn hyperbolic_fields_have_curvature_minus_one() {
        let fields: Vec<(&str, LiouvilleField, Complex64)> = vec![
            ("halfplane", LiouvilleField::half_plane_hyperbolic(), c(0.7, 1.9)),
            ("disk", LiouvilleField::disk_hyperbolic(), c(0.3, 0.1)),
            ("strip", LiouvilleField::strip_hyperbolic(), c(1.0, 1.2)),
            ("annulus", LiouvilleField::annulus_hyperbolic(2.0).unwrap(), c(1.3, 0.4)),
        ];
        for (name, f, z) in fields {
            let k = f.curvature_at_infinity(z).unwrap();
            assert!((k + 1.0).abs() < 1e-12, "K*({name}) = {k}");
        }
        // Calibration case is the disk itself.
        let f = LiouvilleField::disk_hyperbolic();
        assert!((f.curvature_at_infinity(c(0.0, 0.0)).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn second_form_cases() {
        let f = LiouvilleField::flat();
        assert!(f.second_form_at_infinity(c(0.1, 0.2)).unwrap().max_abs() < 1e-15);
        // Half-plane: II* = 1/2 I*, traceless part zero.
        let f = LiouvilleField::half_plane_hyperbolic();
        let z = c(0.0, 1.0);
        let ii = f.second_form_at_infinity(z).unwrap();
        let istar = f.metric_at_infinity(z).unwrap();
        assert!(ii.sub(&istar.as_sym().scale(0.5)).max_abs() < 1e-14);
        let jet = f.infinity_jet(z).unwrap();
        assert!(jet.traceless_second_form().max_abs() < 1e-14);
        // Strip at z = i pi/2: phi = 0, theta = -1/2, phi_zzbar = 1/2:
        // II* = diag(0, 1).
        let f = LiouvilleField::strip_hyperbolic();
        let ii = f.second_form_at_infinity(c(0.0, std::f64::consts::FRAC_PI_2)).unwrap();
        assert!(ii.m11.abs() < 1e-14 && ii.m12.abs() < 1e-14 && (ii.m22 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn principal_curvatures_cases() {
        let f = LiouvilleField::flat();
        let (k1, k2) = f.principal_curvatures_at_infinity(c(1.0, 1.0)).unwrap();
        assert_eq!((k1, k2), (0.0, 0.0));
        let f = LiouvilleField::half_plane_hyperbolic();
        let (k1, k2) = f.principal_curvatures_at_infinity(c(0.4, 2.0)).unwrap();
        assert!((k1 - 0.5).abs() < 1e-13 && (k2 - 0.5).abs() < 1e-13);
        // Strip at i pi/2: e^{-phi} = 1, phi_zzbar = 1/2, |theta| = 1/2.
        let f = LiouvilleField::strip_hyperbolic();
        let (k1, k2) = f.principal_curvatures_at_infinity(c(0.0, std::f64::consts::FRAC_PI_2)).unwrap();
        assert!(k1.abs() < 1e-14 && (k2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn induced_metric_flat() {
        let f = LiouvilleField::flat();
        let m = f.induced_metric_numeric(c(0.0, 0.0), 1.0, 1e-4).unwrap();
        let expect = 0.5 * (2.0f64).exp();
        assert!((m.g11 - expect).abs() < 1e-8, "g11 = {}", m.g11);
        assert!((m.g22 - expect).abs() < 1e-8);
        assert!(m.g12.abs() < 1e-8);
    }

    #[test]
    fn expansion_exact_for_flat() {
        let f = LiouvilleField::flat();
        for rho in [0.0, 1.0, 2.0] {
            let d = f.expansion_check(c(0.3, -0.2), rho, 1e-4).unwrap();
            assert!(d < 1e-10, "flat defect {d:.3e} at rho={rho}");
        }
    }

    #[test]
    fn expansion_defect_small_for_hyperbolic_fields() {
        let cases: Vec<(&str, LiouvilleField, Complex64)> = vec![
            ("halfplane", LiouvilleField::half_plane_hyperbolic(), c(0.0, 1.0)),
            ("disk", LiouvilleField::disk_hyperbolic(), c(0.3, 0.1)),
            ("strip", LiouvilleField::strip_hyperbolic(), c(0.5, 1.1)),
            (
                "annulus",
                LiouvilleField::annulus_hyperbolic(std::f64::consts::E).unwrap(),
                Complex64::from_polar(1.484, 0.7),
            ),
        ];
        for (name, f, z) in cases {
            for rho in [0.0, 1.0, 2.0] {
                let d = f.expansion_check(z, rho, 1e-4).unwrap();
                assert!(d < 1e-6, "{name} defect {d:.3e} at rho={rho}");
            }
        }
        // A thin annulus has larger derivatives and a larger constant in the
        // O(h^2) truncation term.
        let f = LiouvilleField::annulus_hyperbolic(2.0).unwrap();
        for rho in [0.0, 1.0, 2.0] {
            let d = f.expansion_check(c(1.35, 0.25), rho, 1e-4).unwrap();
            assert!(d < 5e-6, "thin annulus defect {d:.3e} at rho={rho}");
        }
    }

    #[test]
    fn theta_closures_match_jet_combination() {
        let cases: Vec<(&str, LiouvilleField, Complex64)> = vec![
            ("halfplane", LiouvilleField::half_plane_hyperbolic(), c(0.7, 1.9)),
            ("disk", LiouvilleField::disk_hyperbolic(), c(0.3, 0.1)),
            ("strip", LiouvilleField::strip_hyperbolic(), c(0.5, 1.1)),
            ("annulus", LiouvilleField::annulus_hyperbolic(2.0).unwrap(), c(1.35, 0.25)),
            ("quadratic", LiouvilleField::non_solution_quadratic(), c(0.4, -0.3)),
        ];
        for (name, f, z) in cases {
            let direct = f.theta(z).unwrap();
            let j = f.jet(z).unwrap();
            let combined = j.phi_zz - 0.5 * j.phi_z * j.phi_z;
            assert!((direct - combined).norm() < 1e-12, "{name}: {direct} vs {combined}");
        }
    }

    #[test]
    fn expansion_converges_second_order() {
        let f = LiouvilleField::annulus_hyperbolic(2.0).unwrap();
        let z = c(1.35, 0.25);
        let d1 = f.expansion_check(z, 0.5, 0.02).unwrap();
        let d2 = f.expansion_check(z, 0.5, 0.01).unwrap();
        let order = (d1 / d2).log2();
        assert!((order - 2.0).abs() < 0.2, "order {order:.3}");
    }

    #[test]
    fn dbar_theta_solutions_and_control() {
        // Strip: theta constant, FD derivative exactly zero.
        let f = LiouvilleField::strip_hyperbolic();
        assert_eq!(f.dbar_theta(c(0.3, 1.0), 1e-4).unwrap(), 0.0);
        // Annulus: holomorphic theta.
        let f = LiouvilleField::annulus_hyperbolic(2.0).unwrap();
        assert!(f.dbar_theta(c(1.4, 0.1), 1e-4).unwrap() < 1e-6);
        // Negative control phi = |z|^2: dbar theta = -zbar.
        let f = LiouvilleField::non_solution_quadratic();
        let z = c(0.5, 0.3);
        let d = f.dbar_theta(z, 1e-4).unwrap();
        assert!((d - z.norm()).abs() < 1e-6, "control dbar = {d}");
        assert!(d > 1e-2);
    }

    #[test]
    fn grid_field_matches_analytic_to_second_order() {
        let f = LiouvilleField::disk_hyperbolic();
        let z = c(0.28, 0.12);
        let mut defects = Vec::new();
        for &h in &[0.02, 0.01] {
            let g = f
                .sample_to_grid(z - Complex64::new(4.0 * h, 4.0 * h), h, 9, 9)
                .unwrap();
            let zj = g.jet(z).unwrap();
            let aj = f.jet(z).unwrap();
            let d = (zj.phi_z - aj.phi_z)
                .norm()
                .max((zj.phi_zz - aj.phi_zz).norm())
                .max((zj.phi_zzbar - aj.phi_zzbar).abs());
            defects.push(d);
        }
        let order = (defects[0] / defects[1]).log2();
        assert!((order - 2.0).abs() < 0.3, "stencil order {order:.3}");
        // Richardson extrapolation sharpens the defect.
        let h = 0.02;
        let g = f
            .sample_to_grid(z - Complex64::new(8.0 * h, 8.0 * h), h, 17, 17)
            .unwrap()
            .with_diff_mode(DiffMode::StencilRichardson);
        let rj = g.jet(z).unwrap();
        let aj = f.jet(z).unwrap();
        assert!((rj.phi_z - aj.phi_z).norm() < defects[0] / 10.0);
    }

    #[test]
    fn table_round_trip_and_errors() {
        let mut text = String::new();
        for iy in 0..5 {
            for ix in 0..5 {
                let (x, y) = (0.1 * ix as f64, 0.1 * iy as f64);
                text.push_str(&format!("{x} {y} {}\n", x * x + y));
            }
        }
        let f = LiouvilleField::from_table(&text, 0.1).unwrap();
        assert!((f.phi(c(0.2, 0.3)).unwrap() - (0.04 + 0.3)).abs() < 1e-12);
        // Off-grid evaluation is refused.
        assert!(matches!(f.phi(c(0.25, 0.3)), Err(EpsteinError::OutOfDomain(_))));
        // Stencil at the boundary is refused.
        assert!(matches!(f.jet(c(0.0, 0.3)), Err(EpsteinError::GridTooCoarse(_))));
        // Malformed tables.
        assert!(LiouvilleField::from_table("0 0\n", 0.1).is_err());
        assert!(LiouvilleField::from_table("0 0 1\n0 0.05 2\n", 0.1).is_err());
    }

    #[test]
    fn out_of_domain_detected() {
        let f = LiouvilleField::disk_hyperbolic();
        assert!(matches!(f.phi(c(1.5, 0.0)), Err(EpsteinError::OutOfDomain(_))));
        let f = LiouvilleField::strip_hyperbolic();
        assert!(matches!(f.theta(c(0.0, -0.1)), Err(EpsteinError::OutOfDomain(_))));
    }
}
