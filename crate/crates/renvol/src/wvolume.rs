//! W-volume, dual volume and the renormalized-volume limit on the Fuchsian
//! tube, where every quantity has a closed form:
//!
//! the tube of half-width `r` over a closed hyperbolic surface of genus `g`
//! (core area `A_S = 2 pi (2g - 2)`) has leaf metric `cosh(t)^2 m`, so
//!
//! ```text
//! V          = A_S (r + sinh r cosh r)
//! int H da   = 4 A_S sinh r cosh r       (two boundary components)
//! W          = V - 1/4 int H da = A_S r
//! V_dual     = V - 1/2 int H da = A_S (r - sinh r cosh r)
//! ```
//!
//! and the equidistant-regularization curve
//! `L(rho) = A_S (-1/2 - e^{-2(r+rho)}/2 - sinh r cosh r)` decays to its
//! limit at the rate `e^{-2 rho}`, giving `V_R = V + lim L = W - A_S/2`.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum WVolumeError {
    #[error("invalid tube: {0}")]
    InvalidTube(String),
    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),
}

/// Fuchsian tube: the set of points within distance `r` of the totally
/// geodesic core surface of genus `g >= 2`.
#[derive(Debug, Clone, Copy)]
pub struct FuchsianTube {
    pub genus: usize,
    pub half_width: f64,
}

impl FuchsianTube {
    pub fn new(genus: usize, half_width: f64) -> Result<Self, WVolumeError> {
        if genus < 2 {
            return Err(WVolumeError::InvalidTube(format!(
                "genus must be at least 2, got {genus}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(WVolumeError::InvalidTube(format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        Ok(Self { genus, half_width })
    }

    /// Core area `A_S = 2 pi (2g - 2)`.
    pub fn core_area(&self) -> f64 {
        2.0 * std::f64::consts::PI * (2.0 * self.genus as f64 - 2.0)
    }

    /// Area of the leaf at distance `t` from the core (one component).
    pub fn leaf_area(&self, t: f64) -> f64 {
        self.core_area() * t.cosh() * t.cosh()
    }

    /// Mean curvature of the distance-`t` leaf: `H = 2 tanh t`.
    pub fn leaf_mean_curvature(&self, t: f64) -> f64 {
        2.0 * t.tanh()
    }
}

/// Geometry of the tube: volume, leaf areas and the boundary mean-curvature
/// integral.
#[derive(Debug, Clone, Copy)]
pub struct TubeGeometry {
    /// Volume by closed form `A_S (r + sinh r cosh r)`.
    pub volume: f64,
    /// The same volume by adaptive quadrature of the leaf areas.
    pub volume_quadrature: f64,
    /// `int H da` over both boundary components: `4 A_S sinh r cosh r`.
    pub mean_curvature_integral: f64,
    /// Total boundary area (two components).
    pub boundary_area: f64,
}

/// Romberg integration to absolute tolerance; the integrands here are
/// entire, so the tableau converges in a handful of levels.
fn romberg(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64, WVolumeError> {
    const MAX_LEVELS: usize = 22;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut h = b - a;
    let mut trapezoid = 0.5 * h * (f(a) + f(b));
    rows.push(vec![trapezoid]);
    for level in 1..MAX_LEVELS {
        h *= 0.5;
        let points = 1usize << (level - 1);
        let sum: f64 = (0..points).map(|k| f(a + h * (2 * k + 1) as f64)).sum();
        trapezoid = 0.5 * rows[level - 1][0] + h * sum;
        let mut row = vec![trapezoid];
        for j in 1..=level {
            let factor = 4.0f64.powi(j as i32);
            let value = (factor * row[j - 1] - rows[level - 1][j - 1]) / (factor - 1.0);
            row.push(value);
        }
        let err = (row[level] - rows[level - 1][level - 1]).abs();
        rows.push(row);
        if level >= 4 && err < tol {
            return Ok(rows[level][level]);
        }
    }
    Err(WVolumeError::Quadrature(format!("no convergence to tol {tol:.3e}")))
}

/// Tube volume and boundary data; the closed form is cross-checked against
/// quadrature of the leaf-area curve.
pub fn tube_geometry(tube: &FuchsianTube) -> Result<TubeGeometry, WVolumeError> {
    let r = tube.half_width;
    let a_s = tube.core_area();
    let volume = a_s * (r + r.sinh() * r.cosh());
    let volume_quadrature = romberg(|t| tube.leaf_area(t), -r, r, 1e-13 * volume.max(1.0))?;
    Ok(TubeGeometry {
        volume,
        volume_quadrature,
        mean_curvature_integral: 4.0 * a_s * r.sinh() * r.cosh(),
        boundary_area: 2.0 * tube.leaf_area(r),
    })
}

/// `W = V - 1/4 int H da`.
pub fn w_volume(volume: f64, mean_curvature_integral: f64) -> f64 {
    volume - 0.25 * mean_curvature_integral
}

/// Dual volume `V* = V - 1/2 int H da`; `(V + V*)/2 = W` identically.
pub fn dual_volume(volume: f64, mean_curvature_integral: f64) -> f64 {
    volume - 0.5 * mean_curvature_integral
}

/// Full volume accounting of a tube.
#[derive(Debug, Clone)]
pub struct VolumeReport {
    pub genus: usize,
    pub half_width: f64,
    pub volume: f64,
    pub mean_curvature_integral: f64,
    pub w: f64,
    pub v_dual: f64,
    pub v_renormalized: f64,
    /// `(rho, L(rho))` samples of the regularization curve.
    pub limit_curve: Vec<(f64, f64)>,
    /// Extrapolated limit of `L` and the measured decay slope of
    /// `log |L - limit|` against `rho`.
    pub extrapolated_limit: f64,
    pub decay_slope: f64,
    /// `V_R - (W - sum_i pi (g_i - 1))`: the defect of the W-volume
    /// relation, which this report asserts to be tiny.
    pub w_relation_defect: f64,
}

impl VolumeReport {
    fn self_check(&self) -> Result<(), WVolumeError> {
        let w2 = (self.volume - 0.25 * self.mean_curvature_integral - self.w).abs();
        let d2 = (self.volume - 0.5 * self.mean_curvature_integral - self.v_dual).abs();
        let avg = ((self.volume + self.v_dual) / 2.0 - self.w).abs();
        if w2 > 1e-9 || d2 > 1e-9 || avg > 1e-9 {
            return Err(WVolumeError::InvalidTube(format!(
                "volume report violates its identities: {w2:.3e} {d2:.3e} {avg:.3e}"
            )));
        }
        Ok(())
    }
}

/// The equidistant-regularization curve at offset `rho` from the tube
/// boundary, summed over both boundary components:
/// `L(rho) = V(bdry, bdry_rho) - 1/2 A(bdry_rho) - sum_i 2 pi rho (g_i - 1)`.
pub fn regularization_curve(tube: &FuchsianTube, rho: f64) -> f64 {
    let r = tube.half_width;
    let a_s = tube.core_area();
    // Per boundary component: the collar volume is
    // (A_S/2)(rho + sinh cosh(r+rho) - sinh cosh(r)) and the area term is
    // (A_S/2) cosh^2(r+rho). Both grow like e^{2(r+rho)} while their
    // difference stays O(1); group them as
    // sinh(x) cosh(x) - cosh(x)^2 = -(1 + e^{-2x})/2
    // before subtracting, or the curve drowns in rounding by rho ~ 10.
    let grouped = -0.5 * (1.0 + (-2.0 * (r + rho)).exp());
    let collar_minus_half_area = 0.5 * a_s * (rho + grouped - r.sinh() * r.cosh());
    let counterterm = 2.0 * std::f64::consts::PI * rho * (tube.genus as f64 - 1.0);
    2.0 * (collar_minus_half_area - counterterm)
}

/// Stable least-squares line fit `y = a + b x`: slope from centered sums,
/// intercept from the means.
fn centered_linear_fit(points: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let n = points.clone().count() as f64;
    let (mut mx, mut my) = (0.0, 0.0);
    for (x, y) in points.clone() {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

/// Renormalized volume via the `rho -> infinity` limit of the
/// regularization curve: samples `L` on a grid, extrapolates by fitting
/// `a + b e^{-2 rho}` on the last third, measures the decay slope, and
/// verifies `V_R = W - sum_i pi (g_i - 1)`.
pub fn renormalized_limit(
    tube: &FuchsianTube,
    rho_max: f64,
    steps: usize,
) -> Result<VolumeReport, WVolumeError> {
    if rho_max.is_nan() || rho_max <= 0.0 || steps < 8 {
        return Err(WVolumeError::InvalidTube(format!(
            "need rho_max > 0 and at least 8 steps, got {rho_max}, {steps}"
        )));
    }
    let geom = tube_geometry(tube)?;
    let samples: Vec<(f64, f64)> = (0..=steps)
        .map(|k| {
            let rho = rho_max * k as f64 / steps as f64;
            (rho, regularization_curve(tube, rho))
        })
        .collect();

    // Least-squares fit L ~ a + b e^{-2 rho} on the last third, in the
    // centered form (the raw normal equations cancel catastrophically once
    // e^{-2 rho} underflows toward the sample noise).
    let tail = &samples[samples.len() - samples.len() / 3..];
    let (a, _) = centered_linear_fit(tail.iter().map(|&(rho, l)| ((-2.0 * rho).exp(), l)));

    // Decay slope of log |L - a| vs rho, fitted over the mid-range (the far
    // tail underflows toward the roundoff floor of the subtraction).
    let mid: Vec<(f64, f64)> = samples
        .iter()
        .filter(|&&(_, l)| (l - a).abs() > 1e-12 * a.abs().max(1.0))
        .take(samples.len() / 2)
        .map(|&(rho, l)| (rho, (l - a).abs().ln()))
        .collect();
    let slope =
        if mid.len() >= 2 { centered_linear_fit(mid.iter().copied()).1 } else { f64::NAN };

    let w = w_volume(geom.volume, geom.mean_curvature_integral);
    let v_r = geom.volume + a;
    // Two boundary components of the same genus.
    let topological = 2.0 * std::f64::consts::PI * (tube.genus as f64 - 1.0);
    let report = VolumeReport {
        genus: tube.genus,
        half_width: tube.half_width,
        volume: geom.volume,
        mean_curvature_integral: geom.mean_curvature_integral,
        w,
        v_dual: dual_volume(geom.volume, geom.mean_curvature_integral),
        v_renormalized: v_r,
        limit_curve: samples,
        extrapolated_limit: a,
        decay_slope: slope,
        w_relation_defect: v_r - (w - topological),
    };
    report.self_check()?;
    Ok(report)
}

/// First-variation (Schlafli) check of `dW/dr` from the boundary of the tube.
#[derive(Debug, Clone)]
pub struct SchlafliReport {
    /// Central difference of `W` over `tube_geometry`.
    pub dw_fd: f64,
    /// Closed-form boundary integral `1/4 int (dH + <dI, II - (H/2) I>) da`.
    pub dw_formula: f64,
    pub defect: f64,
    /// Central difference of `V` against the volume variation formula
    /// `2 dV = int (dH + 1/2 <dI, II>) da`; this piece carries a genuine
    /// O(dr^2) truncation error (W itself is linear in r, so its central
    /// difference is exact to rounding).
    pub dv_fd: f64,
    pub dv_formula: f64,
    pub dv_defect: f64,
}

/// Compare the centered difference of `W(r)` with the boundary-integral
/// first-variation formula, evaluated in closed form on the tube (umbilic
/// boundary: the traceless term vanishes; the prediction is `dW/dr = A_S`).
pub fn schlafli_fd_check(tube: &FuchsianTube, dr: f64) -> Result<SchlafliReport, WVolumeError> {
    if !(dr > 0.0 && dr < tube.half_width) {
        return Err(WVolumeError::InvalidTube(format!("need 0 < dr < r, got {dr}")));
    }
    let r = tube.half_width;
    let a_s = tube.core_area();
    let eval = |rr: f64| -> Result<(f64, f64), WVolumeError> {
        let t = FuchsianTube { genus: tube.genus, half_width: rr };
        let g = tube_geometry(&t)?;
        Ok((g.volume, g.mean_curvature_integral))
    };
    let (vp, hp) = eval(r + dr)?;
    let (vm, hm) = eval(r - dr)?;
    let dw_fd = (w_volume(vp, hp) - w_volume(vm, hm)) / (2.0 * dr);
    let dv_fd = (vp - vm) / (2.0 * dr);

    // Per component: dH = 2 sech^2 r dr, dI = sinh(2r) m dr, II0 = 0, so
    // 1/4 int dH da = 1/4 * 2 sech^2(r) * A_S cosh^2 r = A_S / 4 each.
    let dw_formula = 2.0 * 0.25 * (2.0 / (r.cosh() * r.cosh())) * tube.leaf_area(r);
    // Volume Schlafli: 2 dV = int (dH + 1/2 <dI, II>) da; the integrand is
    // the constant 2, so dV = (both components' area) = 2 A_S cosh^2 r.
    let dv_formula = 2.0 * a_s * r.cosh() * r.cosh();

    Ok(SchlafliReport {
        dw_fd,
        dw_formula,
        defect: (dw_fd - dw_formula).abs(),
        dv_fd,
        dv_formula,
        dv_defect: (dv_fd - dv_formula).abs(),
    })
}

/// The same first variation written from the data at infinity.
#[derive(Debug, Clone)]
pub struct SchlafliInfinityReport {
    pub dw_fd: f64,
    /// `-1/4 int (dH* + <dI*, II*_0>) da*` in closed form (both components).
    pub dw_formula: f64,
    pub defect: f64,
    /// The same integral with the sign of the finite-boundary formula; it
    /// must NOT match (the transform to infinity flips the overall sign).
    pub wrong_sign_value: f64,
    /// Per-component value of the at-infinity integral.
    pub per_component: f64,
}

/// Evaluate `-1/4 int (dH* + <dI*, II*_0>) da*` on the tube: at the leaf r,
/// `I* = 1/2 e^{2r} m`, `H* = 2 e^{-2r}`, `II*_0 = 0`, `da* = 1/2 e^{2r} dam`.
pub fn schlafli_at_infinity_check(
    tube: &FuchsianTube,
    dr: f64,
) -> Result<SchlafliInfinityReport, WVolumeError> {
    if !(dr > 0.0 && dr < tube.half_width) {
        return Err(WVolumeError::InvalidTube(format!("need 0 < dr < r, got {dr}")));
    }
    let r = tube.half_width;
    let a_s = tube.core_area();
    let eval = |rr: f64| -> Result<f64, WVolumeError> {
        let t = FuchsianTube { genus: tube.genus, half_width: rr };
        let g = tube_geometry(&t)?;
        Ok(w_volume(g.volume, g.mean_curvature_integral))
    };
    let dw_fd = (eval(r + dr)? - eval(r - dr)?) / (2.0 * dr);

    // dH* = -4 e^{-2r} dr; the II*_0 term vanishes (umbilic / Fuchsian).
    // Per component: -1/4 (-4 e^{-2r}) * (1/2 e^{2r} A_S) = A_S / 2.
    let area_star = 0.5 * (2.0 * r).exp() * a_s;
    let dh_star = -4.0 * (-2.0 * r).exp();
    let per_component = -0.25 * dh_star * area_star;
    let dw_formula = 2.0 * per_component;
    Ok(SchlafliInfinityReport {
        dw_fd,
        dw_formula,
        defect: (dw_fd - dw_formula).abs(),
        wrong_sign_value: -dw_formula,
        per_component,
    })
}

/// W at the constant-curvature leaf and the fixed-area maximality probe.
#[derive(Debug, Clone)]
pub struct ConstantCurvatureReport {
    /// Leaf shift at which `K* = -1`: the solution of `1/2 e^{2 r0} = 1`.
    pub r0: f64,
    /// `W_M = A_S r0 = A_S log(2)/2`.
    pub w_m: f64,
    /// `(epsilon, W(epsilon))` along the fixed-area two-sided leaf family;
    /// `W(0) = W_M` is the maximum.
    pub probe: Vec<(f64, f64)>,
}

/// Find the leaf making the metric at infinity hyperbolic (`K* = -1`) and
/// return `W` there. The probe moves the two boundary leaves to
/// `a = log(2 + eps)/2`, `b = log(2 - eps)/2` (which preserves the total
/// `I*`-area `e^{2a} + e^{2b} = 4` up to the `A_S/2` factor) and evaluates
/// `W(a, b) = A_S (a + b)/2 <= W_M`, with equality only at `eps = 0`.
pub fn w_at_constant_curvature(tube: &FuchsianTube) -> Result<ConstantCurvatureReport, WVolumeError> {
    let a_s = tube.core_area();
    // K*(leaf t) = -2 e^{-2t} = -1 at t = log(2)/2.
    let r0 = 0.5 * 2.0f64.ln();
    let w_m = a_s * r0;
    let mut probe = Vec::new();
    for &eps in &[-1.5f64, -1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0, 1.5] {
        let a = 0.5 * (2.0 + eps).ln();
        let b = 0.5 * (2.0 - eps).ln();
        probe.push((eps, a_s * (a + b) / 2.0));
    }
    Ok(ConstantCurvatureReport { r0, w_m, probe })
}
