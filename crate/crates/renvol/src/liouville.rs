//! Discrete uniformization: solve the Liouville equation on a mesh for the
//! conformal factor taking the background metric to constant curvature.
//!
//! Sign calibration (recorded in every report): with the div-grad cotangent
//! Laplacian, the residual
//!
//! ```text
//! r_i = lambda exp(2 phi_i) + (K0)_i - (lap0 phi)_i
//! ```
//!
//! vanishes exactly when the scaled metric `exp(2 phi) h0` has curvature
//! `-lambda`. It is the gradient of the functional
//!
//! ```text
//! S[phi] = (1/8 pi) sum [ |grad phi|^2 + lambda exp(2 phi) + 2 phi K0 ] dvol0
//! ```
//!
//! through the pairing `dS[u] = (1/4 pi) <r, u>` with `<a, b> = sum a_i b_i A_i`,
//! which is this crate's assertable form of the statement that varying the
//! functional yields the Liouville equation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mesh::{MeshError, MetricChoice, TriMesh};

/// One-line description of the residual/Laplacian sign convention, embedded
/// in reports so results are self-describing.
pub const CALIBRATION_NOTE: &str = "residual r = lambda*exp(2*phi) + K0 - lap0(phi) with lap0 = \
     div grad (cotangent); r = 0 iff K(exp(2*phi) h0) = -lambda";

#[derive(Debug, Error)]
pub enum LiouvilleError {
    #[error("wrong topology: {0}")]
    WrongTopology(String),
    #[error("no convergence after {iterations} iterations: {message} (best residual {best_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        best_residual: f64,
        /// Best iterate reached, for diagnostics.
        best_phi: Vec<f64>,
        residual_history: Vec<f64>,
        message: String,
    },
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Backtracking line-search parameters (Armijo).
#[derive(Debug, Clone, Copy)]
pub struct LineSearch {
    pub c1: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self { c1: 1e-4, backtrack_factor: 0.5, max_backtracks: 40 }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Convergence threshold on the sup norm of the pointwise residual.
    pub residual_tolerance: f64,
    pub line_search: LineSearch,
    /// Target curvature is `-lambda`; the default 1 uniformizes to -1.
    pub lambda: f64,
    /// When set, shift the solution by the constant fixing this total area
    /// of the scaled metric, and report the achieved lambda.
    pub area_constraint: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            residual_tolerance: 1e-10,
            line_search: LineSearch::default(),
            lambda: 1.0,
            area_constraint: None,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), LiouvilleError> {
        if self.residual_tolerance.is_nan() || self.residual_tolerance <= 0.0 {
            return Err(LiouvilleError::InvalidConfig("residual tolerance must be positive".into()));
        }
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(LiouvilleError::InvalidConfig(format!(
                "target lambda must be positive (target curvature -lambda), got {}",
                self.lambda
            )));
        }
        if !(self.line_search.c1 > 0.0 && self.line_search.c1 < 1.0) {
            return Err(LiouvilleError::InvalidConfig("line search c1 must be in (0,1)".into()));
        }
        Ok(())
    }
}

/// Solver outcome: iterations, residual history and achieved geometry.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    /// Lambda actually achieved after the optional area normalization.
    pub achieved_lambda: f64,
    /// Min/mean/max of the angle-defect curvature of the scaled metric.
    pub curvature_min: f64,
    pub curvature_mean: f64,
    pub curvature_max: f64,
    pub scaled_area: f64,
    pub calibration: &'static str,
}

/// Pointwise Liouville residual `r_i = exp(2 phi_i) + K0_i - (lap0 phi)_i`
/// for the equation at target curvature -1.
pub fn liouville_residual(mesh: &TriMesh) -> Result<Vec<f64>, LiouvilleError> {
    liouville_residual_lambda(mesh, 1.0)
}

/// Residual for general target curvature `-lambda`.
pub fn liouville_residual_lambda(mesh: &TriMesh, lambda: f64) -> Result<Vec<f64>, LiouvilleError> {
    let k0 = mesh.gaussian_curvature(MetricChoice::Background)?;
    let lap = mesh.laplacian(MetricChoice::Background, mesh.phi())?;
    Ok(mesh
        .phi()
        .iter()
        .zip(k0.iter().zip(&lap))
        .map(|(&p, (&k, &l))| lambda * (2.0 * p).exp() + k - l)
        .collect())
}

/// The Liouville functional
/// `S = (1/8 pi) sum [ |grad phi|^2 + exp(2 phi) + 2 phi K0 ] dvol0`,
/// with the Dirichlet term discretized by the cotangent energy.
pub fn liouville_functional(mesh: &TriMesh) -> Result<f64, LiouvilleError> {
    liouville_functional_lambda(mesh, 1.0)
}

pub fn liouville_functional_lambda(mesh: &TriMesh, lambda: f64) -> Result<f64, LiouvilleError> {
    let phi = mesh.phi();
    let dirichlet = mesh.dirichlet_energy(MetricChoice::Background, phi)?;
    let k0 = mesh.gaussian_curvature(MetricChoice::Background)?;
    let areas = mesh.vertex_areas(MetricChoice::Background)?;
    let mut bulk = 0.0;
    for i in 0..phi.len() {
        bulk += areas[i] * (lambda * (2.0 * phi[i]).exp() + 2.0 * phi[i] * k0[i]);
    }
    Ok((dirichlet + bulk) / (8.0 * std::f64::consts::PI))
}

/// Assembled background data reused across Newton iterations.
struct Assembled {
    areas: Vec<f64>,
    k0: Vec<f64>,
    weights: Vec<f64>,
    edges: Vec<(usize, usize)>,
}

impl Assembled {
    fn build(mesh: &TriMesh) -> Result<Self, LiouvilleError> {
        Ok(Self {
            areas: mesh.vertex_areas(MetricChoice::Background)?,
            k0: mesh.gaussian_curvature(MetricChoice::Background)?,
            weights: mesh.cot_edge_weights(MetricChoice::Background)?,
            edges: mesh.edges().to_vec(),
        })
    }

    /// Integrated residual `R_i = A_i (lambda e^{2 phi} + K0) - (L phi)_i`.
    fn residual(&self, lambda: f64, phi: &[f64], out: &mut [f64]) {
        for i in 0..phi.len() {
            out[i] = self.areas[i] * (lambda * (2.0 * phi[i]).exp() + self.k0[i]);
        }
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            let flux = self.weights[e] * (phi[j] - phi[i]);
            out[i] -= flux;
            out[j] += flux;
        }
    }

    /// Line-search merit `1/2 |R|^2`. The energy functional itself is a poor
    /// merit near convergence: its decrements are O(|R|^2) against an O(1)
    /// absolute value and drown in rounding, while `|R|^2` keeps O(1)
    /// relative decrements all the way down.
    fn merit(&self, lambda: f64, phi: &[f64], scratch: &mut [f64]) -> f64 {
        self.residual(lambda, phi, scratch);
        0.5 * scratch.iter().map(|r| r * r).sum::<f64>()
    }

    /// `y = (2 lambda diag(A e^{2 phi}) + shift*diag(A) - L) x`.
    fn apply_jacobian(&self, lambda: f64, shift: f64, phi: &[f64], x: &[f64], y: &mut [f64]) {
        for i in 0..x.len() {
            y[i] = (2.0 * lambda * (2.0 * phi[i]).exp() + shift) * self.areas[i] * x[i];
        }
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            let flux = self.weights[e] * (x[j] - x[i]);
            y[i] -= flux;
            y[j] += flux;
        }
    }

    /// Jacobi-preconditioned conjugate gradients for the Newton system
    /// `J d = -R`. Returns `None` if the operator stops looking positive
    /// definite (caller escalates the diagonal shift).
    fn solve_newton(
        &self,
        lambda: f64,
        shift: f64,
        phi: &[f64],
        rhs: &[f64],
        tol: f64,
    ) -> Option<Vec<f64>> {
        let n = rhs.len();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            diag[i] = (2.0 * lambda * (2.0 * phi[i]).exp() + shift) * self.areas[i];
        }
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            diag[i] += self.weights[e];
            diag[j] += self.weights[e];
        }
        for d in &mut diag {
            if d.abs() < 1e-300 {
                *d = 1.0;
            }
        }

        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let rhs_norm = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut ap = vec![0.0; n];
        for _ in 0..(20 * n).max(200) {
            self.apply_jacobian(lambda, shift, phi, &p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return None;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rmax <= tol * rhs_norm {
                return Some(x);
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Some(x)
    }
}

/// Newton iteration with Armijo backtracking for the discrete Liouville
/// equation. Returns the per-vertex conformal factor and a report; the input
/// mesh's current `phi` is the initial iterate.
pub fn solve_uniformization(
    mesh: &TriMesh,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport), LiouvilleError> {
    cfg.validate()?;
    if mesh.euler_characteristic() >= 0 {
        return Err(LiouvilleError::WrongTopology(format!(
            "target curvature -{} needs negative Euler characteristic, mesh has chi = {} (genus {})",
            cfg.lambda,
            mesh.euler_characteristic(),
            mesh.genus()
        )));
    }

    let asm = Assembled::build(mesh)?;
    let n = mesh.vertex_count();
    let lambda = cfg.lambda;
    let mut phi = mesh.phi().to_vec();
    let mut residual = vec![0.0; n];
    let mut history = Vec::new();
    let mut best_phi = phi.clone();
    let mut best_res = f64::INFINITY;

    let sup = |r: &[f64], areas: &[f64]| -> f64 {
        r.iter().zip(areas).fold(0.0f64, |m, (v, a)| m.max((v / a).abs()))
    };

    let mut converged_at = None;
    for iter in 0..cfg.max_iterations {
        asm.residual(lambda, &phi, &mut residual);
        let res_sup = sup(&residual, &asm.areas);
        history.push(res_sup);
        if res_sup < best_res {
            best_res = res_sup;
            best_phi.copy_from_slice(&phi);
        }
        if res_sup < cfg.residual_tolerance {
            converged_at = Some(iter);
            break;
        }

        // Newton direction; escalate a diagonal shift if the (in exact
        // arithmetic positive definite) operator misbehaves numerically.
        let rhs: Vec<f64> = residual.iter().map(|v| -v).collect();
        let mut shift = 0.0;
        let direction = loop {
            match asm.solve_newton(lambda, shift, &phi, &rhs, 1e-12) {
                Some(d) => break d,
                None => {
                    shift = if shift == 0.0 { 1e-8 } else { shift * 100.0 };
                    if shift > 1e6 {
                        return Err(LiouvilleError::NonConvergence {
                            iterations: iter,
                            best_residual: best_res,
                            best_phi,
                            residual_history: history,
                            message: "Newton system lost positive definiteness".into(),
                        });
                    }
                }
            }
        };

        // Armijo backtracking on 1/2 |R|^2; along the Newton direction the
        // directional derivative is -|R|^2.
        let m0: f64 = 0.5 * residual.iter().map(|r| r * r).sum::<f64>();
        let mut t = 1.0;
        let mut accepted = false;
        let mut trial = vec![0.0; n];
        let mut scratch = vec![0.0; n];
        for _ in 0..cfg.line_search.max_backtracks {
            for i in 0..n {
                trial[i] = phi[i] + t * direction[i];
            }
            let mt = asm.merit(lambda, &trial, &mut scratch);
            if mt <= m0 * (1.0 - 2.0 * cfg.line_search.c1 * t) {
                accepted = true;
                break;
            }
            t *= cfg.line_search.backtrack_factor;
        }
        if !accepted {
            return Err(LiouvilleError::NonConvergence {
                iterations: iter,
                best_residual: best_res,
                best_phi,
                residual_history: history,
                message: "line search failed to make progress".into(),
            });
        }
        std::mem::swap(&mut phi, &mut trial);
    }

    let iterations = match converged_at {
        Some(i) => i,
        None => {
            asm.residual(lambda, &phi, &mut residual);
            let res_sup = sup(&residual, &asm.areas);
            history.push(res_sup);
            if res_sup < cfg.residual_tolerance {
                cfg.max_iterations
            } else {
                if res_sup < best_res {
                    best_res = res_sup;
                    best_phi.copy_from_slice(&phi);
                }
                return Err(LiouvilleError::NonConvergence {
                    iterations: cfg.max_iterations,
                    best_residual: best_res,
                    best_phi,
                    residual_history: history,
                    message: "iteration budget exhausted".into(),
                });
            }
        }
    };

    // Optional area normalization by a constant shift.
    let mut scaled = mesh.clone();
    scaled.set_phi(phi.clone())?;
    let mut achieved_lambda = lambda;
    if let Some(target_area) = cfg.area_constraint {
        if target_area.is_nan() || target_area <= 0.0 {
            return Err(LiouvilleError::InvalidConfig("area constraint must be positive".into()));
        }
        let area = scaled.total_area(MetricChoice::Conformal)?;
        let c = 0.5 * (target_area / area).ln();
        for p in &mut phi {
            *p += c;
        }
        achieved_lambda = lambda * (-2.0 * c).exp();
        scaled.set_phi(phi.clone())?;
    }

    let k = scaled.gaussian_curvature(MetricChoice::Conformal)?;
    let areas_conf = scaled.vertex_areas(MetricChoice::Conformal)?;
    let scaled_area: f64 = areas_conf.iter().sum();
    let mean = k.iter().zip(&areas_conf).map(|(k, a)| k * a).sum::<f64>() / scaled_area;
    let report = SolveReport {
        iterations,
        final_residual: *history.last().unwrap(),
        residual_history: history,
        achieved_lambda,
        curvature_min: k.iter().cloned().fold(f64::INFINITY, f64::min),
        curvature_mean: mean,
        curvature_max: k.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        scaled_area,
        calibration: CALIBRATION_NOTE,
    };
    Ok((phi, report))
}

/// Second-difference probe of the constrained extremum at a solution.
#[derive(Debug, Clone)]
pub struct ExtremumReport {
    /// `(second difference, second difference / |u|^2)` per direction, where
    /// `|u|^2 = sum A_i u_i^2` on the background metric.
    pub samples: Vec<(f64, f64)>,
    /// Smallest normalized magnitude over the sampled directions.
    pub coercivity: f64,
    /// True when every sampled second difference has the same sign.
    pub uniform_sign: bool,
    /// Sign of the functional-side second differences (+1 for the convex
    /// residual-energy functional; the W-side carries the opposite sign).
    pub functional_sign: f64,
}

/// Probe the character of the constrained extremum at `phi_star`: for random
/// area-preserving directions `u` (projected so the first variation of the
/// scaled area vanishes), form the centered second difference of the
/// Liouville functional. All samples must be strictly positive (the
/// functional is convex; the W-volume side, which this functional realizes
/// with the opposite sign, is maximized).
pub fn extremum_character_check(
    mesh: &TriMesh,
    phi_star: &[f64],
    n_directions: usize,
    seed: u64,
    eps: f64,
) -> Result<ExtremumReport, LiouvilleError> {
    let mut work = mesh.clone();
    work.set_phi(phi_star.to_vec())?;
    let areas = work.vertex_areas(MetricChoice::Background)?;
    let weights: Vec<f64> =
        areas.iter().zip(phi_star).map(|(a, p)| a * (2.0 * p).exp()).collect();
    let weight_total: f64 = weights.iter().sum();

    let s0 = {
        let mut m = work.clone();
        m.set_phi(phi_star.to_vec())?;
        liouville_functional(&m)?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = phi_star.len();
    let mut samples = Vec::with_capacity(n_directions);
    for _ in 0..n_directions {
        let mut u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // Project onto area-preserving directions:
        // d/de Area(phi + e u) = 2 sum A_i e^{2 phi_i} u_i = 0.
        let mean = u.iter().zip(&weights).map(|(u, w)| u * w).sum::<f64>() / weight_total;
        for v in &mut u {
            *v -= mean;
        }
        let norm2: f64 = u.iter().zip(&areas).map(|(u, a)| u * u * a).sum();
        if norm2 < 1e-30 {
            samples.push((0.0, 0.0));
            continue;
        }
        let eval = |sign: f64, m: &TriMesh| -> Result<f64, LiouvilleError> {
            let mut m = m.clone();
            let phi: Vec<f64> =
                phi_star.iter().zip(&u).map(|(p, v)| p + sign * eps * v).collect();
            m.set_phi(phi)?;
            liouville_functional(&m)
        };
        let sp = eval(1.0, &work)?;
        let sm = eval(-1.0, &work)?;
        let second = (sp - 2.0 * s0 + sm) / (eps * eps);
        samples.push((second, second / norm2));
    }

    let uniform_sign = samples.iter().all(|&(d, _)| d > 0.0);
    let coercivity =
        samples.iter().map(|&(_, r)| r.abs()).fold(f64::INFINITY, f64::min);
    Ok(ExtremumReport { samples, coercivity, uniform_sign, functional_sign: 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{flat_torus, genus2_octagon, icosahedron, radial_bump};

    #[test]
    fn residual_on_hyperbolic_background() {
        // K0 ~ -1, phi = 0: residual is the discretization error of K0.
        let m = genus2_octagon(8).mesh;
        let r = liouville_residual(&m).unwrap();
        let sup = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(sup < 0.12, "residual sup {sup}");
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        assert!(mean.abs() < 0.02, "residual mean {mean}");
    }

    #[test]
    fn residual_constant_shift() {
        // phi = c on a hyperbolic background: r = e^{2c} - 1 + (K0 + 1).
        let mut m = genus2_octagon(8).mesh;
        let c = 0.4;
        m.set_phi(vec![c; m.vertex_count()]).unwrap();
        let r = liouville_residual(&m).unwrap();
        let expect = (2.0 * c).exp() - 1.0;
        for v in &r {
            assert!((v - expect).abs() < 0.12, "residual {v} vs {expect}");
        }
    }

    #[test]
    fn constructed_solution_residual_small() {
        // Background e^{2 psi} h_hyp: phi = -psi kills the residual up to
        // discretization error.
        let fixture = genus2_octagon(8);
        let psi = radial_bump(&fixture, 0.25, 1.3);
        let mut m = fixture.mesh.clone();
        m.set_phi(psi.clone()).unwrap();
        let scaled_lengths: Vec<(usize, usize, f64)> = m
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| (i, j, m.edge_length(e, MetricChoice::Conformal)))
            .collect();
        let mut scaled =
            TriMesh::new(m.vertex_count(), m.faces().to_vec(), scaled_lengths, 2).unwrap();
        scaled.set_phi(psi.iter().map(|v| -v).collect()).unwrap();
        let r = liouville_residual(&scaled).unwrap();
        let sup = r.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(sup < 0.2, "constructed-solution residual {sup}");
    }

    #[test]
    fn functional_value_at_zero() {
        // phi = 0: S = Area / 8 pi exactly (the other terms vanish).
        let m = genus2_octagon(6).mesh;
        let s = liouville_functional(&m).unwrap();
        let area = m.total_area(MetricChoice::Background).unwrap();
        assert!((s - area / (8.0 * std::f64::consts::PI)).abs() < 1e-14);
        // Numerically close to 1/2 for the genus-2 surface.
        assert!((s - 0.5).abs() < 0.02, "S = {s}");
    }

    #[test]
    fn functional_constant_on_flat_torus() {
        let mut m = flat_torus(6);
        let area = m.total_area(MetricChoice::Background).unwrap();
        let c = 0.3;
        m.set_phi(vec![c; m.vertex_count()]).unwrap();
        let s = liouville_functional(&m).unwrap();
        let expect = (2.0 * c).exp() * area / (8.0 * std::f64::consts::PI);
        assert!((s - expect).abs() < 1e-12, "S = {s} vs {expect}");
    }

    #[test]
    fn functional_gradient_matches_residual() {
        // dS[u] = (1/4 pi) sum r_i u_i A_i, exact for the discrete objects.
        let fixture = genus2_octagon(5);
        let mut m = fixture.mesh.clone();
        let phi: Vec<f64> = radial_bump(&fixture, 0.2, 1.4);
        m.set_phi(phi.clone()).unwrap();
        let r = liouville_residual(&m).unwrap();
        let areas = m.vertex_areas(MetricChoice::Background).unwrap();
        let u: Vec<f64> =
            (0..m.vertex_count()).map(|v| (((v * 29 + 3) % 13) as f64 / 13.0) - 0.5).collect();
        let pairing: f64 = r
            .iter()
            .zip(&u)
            .zip(&areas)
            .map(|((r, u), a)| r * u * a)
            .sum::<f64>()
            / (4.0 * std::f64::consts::PI);
        let eps = 1e-6;
        let eval = |sign: f64| {
            let mut mm = m.clone();
            let p: Vec<f64> = phi.iter().zip(&u).map(|(p, u)| p + sign * eps * u).collect();
            mm.set_phi(p).unwrap();
            liouville_functional(&mm).unwrap()
        };
        let fd = (eval(1.0) - eval(-1.0)) / (2.0 * eps);
        assert!(
            (fd - pairing).abs() < 1e-8 * pairing.abs().max(1.0),
            "fd {fd} vs pairing {pairing}"
        );
    }

    #[test]
    fn solves_hyperbolic_background_to_zero() {
        let m = genus2_octagon(8).mesh;
        let cfg = SolverConfig { residual_tolerance: 1e-9, ..Default::default() };
        let (phi, report) = solve_uniformization(&m, &cfg).unwrap();
        assert!(report.final_residual < 1e-9);
        assert!(report.iterations < 30);
        let sup = phi.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        // The solution is zero up to the curvature discretization error.
        assert!(sup < 0.02, "phi sup {sup}");
        // Area near 4 pi, curvature near -1.
        assert!((report.scaled_area - 4.0 * std::f64::consts::PI).abs() < 0.25);
        assert!((report.curvature_mean + 1.0).abs() < 0.01);
    }

    #[test]
    fn recovers_constructed_solution_under_refinement() {
        let mut errors = Vec::new();
        for n in [8usize, 16] {
            let fixture = genus2_octagon(n);
            let psi = radial_bump(&fixture, 0.25, 1.3);
            let mut m = fixture.mesh.clone();
            m.set_phi(psi.clone()).unwrap();
            let scaled_lengths: Vec<(usize, usize, f64)> = m
                .edges()
                .iter()
                .enumerate()
                .map(|(e, &(i, j))| (i, j, m.edge_length(e, MetricChoice::Conformal)))
                .collect();
            let scaled =
                TriMesh::new(m.vertex_count(), m.faces().to_vec(), scaled_lengths, 2).unwrap();
            let (phi, _) = solve_uniformization(&scaled, &SolverConfig::default()).unwrap();
            let err = phi
                .iter()
                .zip(&psi)
                .fold(0.0f64, |a, (p, s)| a.max((p + s).abs()));
            errors.push(err);
        }
        assert!(
            errors[1] < errors[0] / 3.0,
            "constructed-solution recovery {errors:?} did not shrink 3x"
        );
    }

    #[test]
    fn wrong_topology_rejected() {
        let m = icosahedron();
        assert!(matches!(
            solve_uniformization(&m, &SolverConfig::default()),
            Err(LiouvilleError::WrongTopology(_))
        ));
        let m = flat_torus(4);
        assert!(matches!(
            solve_uniformization(&m, &SolverConfig::default()),
            Err(LiouvilleError::WrongTopology(_))
        ));
    }

    #[test]
    fn restarts_agree() {
        let fixture = genus2_octagon(6);
        let m = fixture.mesh.clone();
        let cfg = SolverConfig { residual_tolerance: 1e-11, ..Default::default() };
        let (reference, _) = solve_uniformization(&m, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let mut init = m.clone();
            let start: Vec<f64> =
                (0..m.vertex_count()).map(|_| rng.random_range(-0.15..0.15)).collect();
            init.set_phi(start).unwrap();
            let (phi, _) = solve_uniformization(&init, &cfg).unwrap();
            let diff = phi
                .iter()
                .zip(&reference)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(diff < 1e-8, "restart disagreement {diff:.3e}");
        }
    }

    #[test]
    fn conformal_shift_covariance() {
        let fixture = genus2_octagon(6);
        let m = fixture.mesh.clone();
        let cfg = SolverConfig { residual_tolerance: 1e-11, ..Default::default() };
        let (phi0, _) = solve_uniformization(&m, &cfg).unwrap();
        let c: f64 = 0.35;
        let mut scaled = m.clone();
        scaled.scale_lengths(c.exp());
        let (phi1, _) = solve_uniformization(&scaled, &cfg).unwrap();
        for (a, b) in phi0.iter().zip(&phi1) {
            assert!((a - c - b).abs() < 1e-8, "covariance defect {}", (a - c - b).abs());
        }
    }

    #[test]
    fn area_constraint_reports_lambda() {
        let m = genus2_octagon(6).mesh;
        let target = 2.0;
        let cfg = SolverConfig {
            area_constraint: Some(target),
            residual_tolerance: 1e-10,
            ..Default::default()
        };
        let (phi, report) = solve_uniformization(&m, &cfg).unwrap();
        let mut check = m.clone();
        check.set_phi(phi).unwrap();
        let area = check.total_area(MetricChoice::Conformal).unwrap();
        assert!((area - target).abs() < 1e-9 * target);
        // K = -lambda e^{-2c}; achieved lambda scales with the area ratio.
        assert!((report.curvature_mean + report.achieved_lambda).abs() < 0.01);
    }

    #[test]
    fn extremum_probe_positive_definite() {
        let m = genus2_octagon(6).mesh;
        let cfg = SolverConfig { residual_tolerance: 1e-11, ..Default::default() };
        let (phi, _) = solve_uniformization(&m, &cfg).unwrap();
        let report = extremum_character_check(&m, &phi, 20, 1234, 1e-4).unwrap();
        assert!(report.uniform_sign, "second differences change sign");
        assert!(report.coercivity > 0.0, "coercivity {}", report.coercivity);
        // The area-violating constant direction is annihilated by projection.
        let weights: Vec<f64> = {
            let areas = m.vertex_areas(MetricChoice::Background).unwrap();
            areas.iter().zip(&phi).map(|(a, p)| a * (2.0 * p).exp()).collect()
        };
        let total: f64 = weights.iter().sum();
        let u = vec![1.0; m.vertex_count()];
        let mean = u.iter().zip(&weights).map(|(u, w)| u * w).sum::<f64>() / total;
        assert!((mean - 1.0).abs() < 1e-12, "constant projects to zero");
    }
}
