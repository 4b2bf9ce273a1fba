//! Schwarzian derivatives of holomorphic maps,
//! `S(f) = f'''/f' - (3/2)(f''/f')^2`, and the comparison of the
//! quadratic differential `theta` of a hyperbolic Liouville field against
//! the Schwarzian of the domain's uniformizing map.
//!
//! Direction convention: the uniformizer always goes from the domain to the
//! upper half-plane, calibrated on the strip `{0 < Im z < pi}` where
//! `theta = -1/2` and `S(exp) = -1/2` agree with no extra sign.

use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::epstein::{EpsteinError, LiouvilleField};

#[derive(Debug, Error)]
pub enum SchwarzianError {
    /// `|f'| < 1e-12`: the Schwarzian is undefined at a critical point.
    #[error("critical point: |f'({z})| = {deriv:.3e}")]
    CriticalPoint { z: Complex64, deriv: f64 },
    #[error("out of domain: {0}")]
    OutOfDomain(String),
    #[error(transparent)]
    Epstein(#[from] EpsteinError),
}

const CRITICAL_TOL: f64 = 1e-12;

/// Default step and Richardson depth for the numeric Schwarzian. Third
/// derivatives amplify roundoff; these values are calibrated on `S(exp)`.
pub const NUMERIC_STEP: f64 = 1e-3;
pub const NUMERIC_RICHARDSON_LEVELS: usize = 2;

/// One-line statement of the comparison convention, embedded in reports.
pub const DIRECTION_NOTE: &str = "theta of the domain's hyperbolic Liouville field is compared \
     against S(uniformizer), uniformizer: domain -> upper half-plane; calibrated on the strip \
     where both sides equal -1/2";

#[derive(Clone)]
enum MapKind {
    /// `(a z + b) / (c z + d)`.
    Mobius { a: Complex64, b: Complex64, c: Complex64, d: Complex64 },
    Exp,
    /// Principal-branch power `z^a`.
    Power { a: Complex64 },
    Compose(Box<HolomorphicMap>, Box<HolomorphicMap>),
    /// Evaluator without derivative closures; differentiated numerically.
    Numeric(Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>),
}

impl std::fmt::Debug for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MapKind::Mobius { a, b, c, d } => write!(f, "Mobius({a}, {b}; {c}, {d})"),
            MapKind::Exp => f.write_str("Exp"),
            MapKind::Power { a } => write!(f, "Power({a})"),
            MapKind::Compose(o, i) => write!(f, "Compose({o:?}, {i:?})"),
            MapKind::Numeric(_) => f.write_str("Numeric(<evaluator>)"),
        }
    }
}

/// A holomorphic map with optional analytic derivative closures up to the
/// third order.
#[derive(Debug, Clone)]
pub struct HolomorphicMap {
    kind: MapKind,
}

impl HolomorphicMap {
    pub fn mobius(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Self { kind: MapKind::Mobius { a, b, c, d } }
    }

    pub fn identity() -> Self {
        Self::mobius(Complex64::ONE, Complex64::ZERO, Complex64::ZERO, Complex64::ONE)
    }

    pub fn exp() -> Self {
        Self { kind: MapKind::Exp }
    }

    /// `z^a` on the principal branch.
    pub fn power(a: Complex64) -> Self {
        Self { kind: MapKind::Power { a } }
    }

    pub fn compose(outer: HolomorphicMap, inner: HolomorphicMap) -> Self {
        Self { kind: MapKind::Compose(Box::new(outer), Box::new(inner)) }
    }

    /// Wrap a bare evaluator; derivatives come from Richardson-extrapolated
    /// centered differences.
    pub fn numeric(f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static) -> Self {
        Self { kind: MapKind::Numeric(Arc::new(f)) }
    }

    /// The Mobius map sending `z1, z2, z3` to `w1, w2, w3`.
    pub fn mobius_through(z: [Complex64; 3], w: [Complex64; 3]) -> Self {
        // Matrix sending a triple to (0, 1, inf).
        let std_triple = |p: [Complex64; 3]| -> [Complex64; 4] {
            let (p0, p1, p2) = (p[0], p[1], p[2]);
            [p1 - p2, -p0 * (p1 - p2), p1 - p0, -p2 * (p1 - p0)]
        };
        let m1 = std_triple(z);
        let m2 = std_triple(w);
        // M2^-1 * M1 (projectively; the determinant factor cancels).
        let inv2 = [m2[3], -m2[1], -m2[2], m2[0]];
        Self::mobius(
            inv2[0] * m1[0] + inv2[1] * m1[2],
            inv2[0] * m1[1] + inv2[1] * m1[3],
            inv2[2] * m1[0] + inv2[3] * m1[2],
            inv2[2] * m1[1] + inv2[3] * m1[3],
        )
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        match &self.kind {
            MapKind::Mobius { a, b, c, d } => (a * z + b) / (c * z + d),
            MapKind::Exp => z.exp(),
            MapKind::Power { a } => z.powc(*a),
            MapKind::Compose(outer, inner) => outer.eval(inner.eval(z)),
            MapKind::Numeric(f) => f(z),
        }
    }

    /// `(f, f', f'', f''')` from analytic closures, or `None` when the map
    /// carries no closures.
    pub fn derivs3(&self, z: Complex64) -> Option<[Complex64; 4]> {
        match &self.kind {
            MapKind::Mobius { a, b, c, d } => {
                let det = a * d - b * c;
                let den = c * z + d;
                Some([
                    (a * z + b) / den,
                    det / (den * den),
                    -2.0 * c * det / (den * den * den),
                    6.0 * c * c * det / (den * den * den * den),
                ])
            }
            MapKind::Exp => {
                let e = z.exp();
                Some([e, e, e, e])
            }
            MapKind::Power { a } => Some([
                z.powc(*a),
                a * z.powc(a - 1.0),
                a * (a - 1.0) * z.powc(a - 2.0),
                a * (a - 1.0) * (a - 2.0) * z.powc(a - 3.0),
            ]),
            MapKind::Compose(outer, inner) => {
                let gi = inner.derivs3(z)?;
                let go = outer.derivs3(gi[0])?;
                let (g1, g2, g3) = (gi[1], gi[2], gi[3]);
                let (f1, f2, f3) = (go[1], go[2], go[3]);
                // Faa di Bruno up to third order.
                Some([
                    go[0],
                    f1 * g1,
                    f2 * g1 * g1 + f1 * g2,
                    f3 * g1 * g1 * g1 + 3.0 * f2 * g1 * g2 + f1 * g3,
                ])
            }
            MapKind::Numeric(_) => None,
        }
    }

    /// Cauchy-Riemann defect `|df/dzbar|` by centered differences; a sanity
    /// check that a wrapped evaluator is holomorphic.
    pub fn cauchy_riemann_defect(&self, z: Complex64, h: f64) -> f64 {
        let dx = (self.eval(z + h) - self.eval(z - h)) / (2.0 * h);
        let dy = (self.eval(z + Complex64::new(0.0, h)) - self.eval(z - Complex64::new(0.0, h)))
            / (2.0 * h);
        (0.5 * (dx + Complex64::I * dy)).norm()
    }

    /// The Schwarzian derivative at `z`: analytic closures when present,
    /// otherwise Richardson-extrapolated centered differences.
    pub fn schwarzian(&self, z: Complex64) -> Result<Complex64, SchwarzianError> {
        match self.derivs3(z) {
            Some([_, f1, f2, f3]) => {
                if f1.norm() < CRITICAL_TOL {
                    return Err(SchwarzianError::CriticalPoint { z, deriv: f1.norm() });
                }
                let r = f2 / f1;
                Ok(f3 / f1 - 1.5 * r * r)
            }
            None => {
                schwarzian_numeric(|w| self.eval(w), z, NUMERIC_STEP, NUMERIC_RICHARDSON_LEVELS)
            }
        }
    }
}

/// Numeric Schwarzian by centered differences of step `h`, with `levels`
/// Richardson extrapolation levels on the h^2 error expansion (the raw
/// stencils use steps `h, 2h, 4h, ...`, extrapolated down).
pub fn schwarzian_numeric(
    f: impl Fn(Complex64) -> Complex64,
    z: Complex64,
    h: f64,
    levels: usize,
) -> Result<Complex64, SchwarzianError> {
    let at_step = |h: f64| -> Result<Complex64, SchwarzianError> {
        let fp = f(z + h);
        let fm = f(z - h);
        let fp2 = f(z + 2.0 * h);
        let fm2 = f(z - 2.0 * h);
        let f0 = f(z);
        let f1 = (fp - fm) / (2.0 * h);
        let f2 = (fp - 2.0 * f0 + fm) / (h * h);
        let f3 = (fp2 - 2.0 * fp + 2.0 * fm - fm2) / (2.0 * h * h * h);
        if f1.norm() < CRITICAL_TOL {
            return Err(SchwarzianError::CriticalPoint { z, deriv: f1.norm() });
        }
        let r = f2 / f1;
        Ok(f3 / f1 - 1.5 * r * r)
    };
    // Romberg tableau, coarsest step first.
    let mut row: Vec<Complex64> = Vec::with_capacity(levels + 1);
    for k in 0..=levels {
        row.push(at_step(h * (1u32 << (levels - k)) as f64)?);
    }
    for j in 1..=levels {
        let factor = 4.0f64.powi(j as i32);
        for i in (j..=levels).rev() {
            row[i] = (factor * row[i] - row[i - 1]) / (factor - 1.0);
        }
    }
    Ok(row[levels])
}

/// Cocycle defect `|S(f o g)(z) - [S(f)(g(z)) g'(z)^2 + S(g)(z)]|`; below
/// 1e-8 for maps with analytic closures.
pub fn cocycle_defect(
    f: &HolomorphicMap,
    g: &HolomorphicMap,
    z: Complex64,
) -> Result<f64, SchwarzianError> {
    let composed = HolomorphicMap::compose(f.clone(), g.clone());
    let lhs = composed.schwarzian(z)?;
    let gz = g.eval(z);
    let g1 = match g.derivs3(z) {
        Some(d) => d[1],
        None => {
            let h = NUMERIC_STEP;
            (g.eval(z + h) - g.eval(z - h)) / (2.0 * h)
        }
    };
    let rhs = f.schwarzian(gz)? * g1 * g1 + g.schwarzian(z)?;
    Ok((lhs - rhs).norm())
}

/// Planar domains with a closed-form hyperbolic metric and a closed-form
/// uniformizing map to the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UniformizedDomain {
    /// `{0 < Im z < pi}`, uniformized by `exp`.
    Strip,
    /// `{1 < |w| < modulus}`, uniformized (locally) by `w^{i pi / log modulus}`.
    Annulus { modulus: f64 },
    /// The half-plane itself; the identity.
    HalfPlane,
}

impl UniformizedDomain {
    pub fn by_name(name: &str, param: Option<f64>) -> Result<Self, SchwarzianError> {
        match name {
            "strip" => Ok(Self::Strip),
            "annulus" => Ok(Self::Annulus { modulus: param.unwrap_or(std::f64::consts::E) }),
            "halfplane" => Ok(Self::HalfPlane),
            other => {
                Err(SchwarzianError::OutOfDomain(format!("no uniformized domain named '{other}'")))
            }
        }
    }

    pub fn liouville_field(&self) -> Result<LiouvilleField, SchwarzianError> {
        Ok(match self {
            Self::Strip => LiouvilleField::strip_hyperbolic(),
            Self::Annulus { modulus } => LiouvilleField::annulus_hyperbolic(*modulus)?,
            Self::HalfPlane => LiouvilleField::half_plane_hyperbolic(),
        })
    }

    /// The locally defined uniformizing map from the domain to the upper
    /// half-plane.
    pub fn uniformizer(&self) -> HolomorphicMap {
        match self {
            Self::Strip => HolomorphicMap::exp(),
            Self::Annulus { modulus } => {
                HolomorphicMap::power(Complex64::new(0.0, std::f64::consts::PI / modulus.ln()))
            }
            Self::HalfPlane => HolomorphicMap::identity(),
        }
    }
}

/// `|theta(z) - S(g)(z)|` where `theta` comes from the domain's hyperbolic
/// Liouville field and `g` is the domain-to-half-plane uniformizer.
pub fn theta_vs_schwarzian(
    domain: UniformizedDomain,
    z: Complex64,
) -> Result<f64, SchwarzianError> {
    let field = domain.liouville_field()?;
    let theta = field.theta(z)?;
    let s = domain.uniformizer().schwarzian(z)?;
    Ok((theta - s).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mobius_kernel() {
        let f = HolomorphicMap::mobius(c(2.0, 1.0), c(0.0, -1.0), c(1.0, 0.5), c(3.0, 0.0));
        for z in [c(0.3, 0.4), c(-1.0, 2.0), c(5.0, -0.1)] {
            assert!(f.schwarzian(z).unwrap().norm() < 1e-10, "S(mobius) at {z}");
        }
        // Numeric path on the same map.
        let f2 = f.clone();
        let g = HolomorphicMap::numeric(move |z| f2.eval(z));
        assert!(g.schwarzian(c(0.3, 0.4)).unwrap().norm() < 1e-6);
    }

    #[test]
    fn exp_schwarzian_is_minus_half() {
        let f = HolomorphicMap::exp();
        for z in [c(0.0, 0.0), c(1.0, -2.0), c(-3.0, 0.7)] {
            let s = f.schwarzian(z).unwrap();
            assert!((s - c(-0.5, 0.0)).norm() < 1e-10, "S(exp)({z}) = {s}");
        }
    }

    #[test]
    fn power_schwarzian_closed_form() {
        // S(z^k) = (1 - k^2) / (2 z^2); at k = 2, z = 1: -3/2.
        let f = HolomorphicMap::power(c(2.0, 0.0));
        let s = f.schwarzian(c(1.0, 0.0)).unwrap();
        assert!((s - c(-1.5, 0.0)).norm() < 1e-12, "S(z^2)(1) = {s}");
        for a in [c(0.5, 0.0), c(3.0, 0.0), c(0.0, 2.5), c(1.3, -0.4)] {
            let f = HolomorphicMap::power(a);
            for z in [c(1.0, 0.2), c(0.4, 1.1)] {
                let expect = (1.0 - a * a) / (2.0 * z * z);
                let s = f.schwarzian(z).unwrap();
                assert!((s - expect).norm() < 1e-10, "S(z^{a})({z}) = {s} vs {expect}");
            }
        }
    }

    #[test]
    fn critical_point_detected() {
        let f = HolomorphicMap::power(c(2.0, 0.0));
        assert!(matches!(f.schwarzian(c(0.0, 0.0)), Err(SchwarzianError::CriticalPoint { .. })));
    }

    #[test]
    fn numeric_schwarzian_calibration() {
        // Calibrated against S(exp) = -1/2 at the default step.
        let s =
            schwarzian_numeric(|z| z.exp(), c(0.4, 0.3), NUMERIC_STEP, NUMERIC_RICHARDSON_LEVELS)
                .unwrap();
        assert!((s - c(-0.5, 0.0)).norm() < 1e-6, "numeric S(exp) = {s}");
        // O(h^2) convergence without extrapolation.
        let e1 = (schwarzian_numeric(|z| z.exp(), c(0.4, 0.3), 0.05, 0).unwrap() + 0.5).norm();
        let e2 = (schwarzian_numeric(|z| z.exp(), c(0.4, 0.3), 0.025, 0).unwrap() + 0.5).norm();
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.3, "numeric order {order:.3}");
    }

    #[test]
    fn cocycle_cases() {
        // f Mobius: reduces to |S(f o g) - S(g)| (Mobius invariance).
        let f = HolomorphicMap::mobius(c(1.0, 0.0), c(2.0, -1.0), c(0.3, 0.0), c(1.0, 1.0));
        let g = HolomorphicMap::exp();
        assert!(cocycle_defect(&f, &g, c(0.5, 0.2)).unwrap() < 1e-10);
        // f = exp, g = z^2 at 1 + 0.2i.
        let f = HolomorphicMap::exp();
        let g = HolomorphicMap::power(c(2.0, 0.0));
        assert!(cocycle_defect(&f, &g, c(1.0, 0.2)).unwrap() < 1e-8);
        // Identity pair: exactly zero.
        let id = HolomorphicMap::identity();
        assert_eq!(cocycle_defect(&id, &id, c(0.7, -0.4)).unwrap(), 0.0);
    }

    #[test]
    fn cocycle_all_builtin_pairs() {
        let maps: Vec<HolomorphicMap> = vec![
            HolomorphicMap::mobius(c(2.0, 0.0), c(1.0, 1.0), c(0.5, 0.0), c(1.0, 0.0)),
            HolomorphicMap::exp(),
            HolomorphicMap::power(c(2.0, 0.0)),
            HolomorphicMap::power(c(0.0, 1.5)),
        ];
        let z = c(1.1, 0.4);
        for f in &maps {
            for g in &maps {
                let d = cocycle_defect(f, g, z).unwrap();
                assert!(d < 1e-8, "cocycle defect {d:.3e}");
            }
        }
    }

    #[test]
    fn mobius_through_three_points() {
        let zs = [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)];
        let ws = [c(2.0, 1.0), c(-1.0, 0.5), c(0.0, -3.0)];
        let f = HolomorphicMap::mobius_through(zs, ws);
        for i in 0..3 {
            assert!((f.eval(zs[i]) - ws[i]).norm() < 1e-12, "point {i}");
        }
    }

    #[test]
    fn kernel_characterization() {
        // S(f) ~ 0 implies f agrees with the Mobius map fitted from three
        // samples; a non-Mobius map does not.
        let f = HolomorphicMap::mobius(c(1.0, 2.0), c(0.5, 0.0), c(0.0, 0.3), c(1.0, 0.0));
        let samples = [c(0.1, 0.1), c(1.0, 0.5), c(-0.5, 1.2)];
        let fit = HolomorphicMap::mobius_through(samples, samples.map(|z| f.eval(z)));
        for z in [c(0.7, 0.7), c(2.0, -0.3)] {
            assert!((f.eval(z) - fit.eval(z)).norm() < 1e-10);
        }
        let g = HolomorphicMap::exp();
        let fit = HolomorphicMap::mobius_through(samples, samples.map(|z| g.eval(z)));
        let z = c(2.0, -0.3);
        assert!((g.eval(z) - fit.eval(z)).norm() > 1e-2);
    }

    #[test]
    fn theta_vs_schwarzian_strip() {
        // theta = -1/2 and S(exp) = -1/2: defect at the roundoff floor.
        for z in [c(0.0, 1.0), c(2.0, 0.5), c(-1.0, 2.9)] {
            assert!(theta_vs_schwarzian(UniformizedDomain::Strip, z).unwrap() < 1e-12);
        }
    }

    #[test]
    fn theta_vs_schwarzian_annulus() {
        for modulus in [2.0, std::f64::consts::E, 10.0] {
            let d = UniformizedDomain::Annulus { modulus };
            for w in [c(1.3, 0.2), c(0.0, 1.4), c(-1.2, 0.5)] {
                if w.norm() <= 1.0 || w.norm() >= modulus {
                    continue;
                }
                let defect = theta_vs_schwarzian(d, w).unwrap();
                assert!(defect < 1e-8, "annulus R={modulus} at {w}: {defect:.3e}");
            }
        }
    }

    #[test]
    fn theta_vs_schwarzian_halfplane_identity() {
        assert!(theta_vs_schwarzian(UniformizedDomain::HalfPlane, c(0.3, 1.7)).unwrap() < 1e-14);
    }

    #[test]
    fn cauchy_riemann_check() {
        let f = HolomorphicMap::exp();
        assert!(f.cauchy_riemann_defect(c(0.3, -0.8), 1e-4) < 1e-8);
    }
}
