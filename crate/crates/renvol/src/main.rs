//! Batch front end: invariant suites, Epstein/Schwarzian verification,
//! uniformization solves and tube reports, with machine-readable output.
//!
//! Exit codes: 0 all checks pass, 1 numeric or convergence failure,
//! 2 usage/parse error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use renvol::epstein::LiouvilleField;
use renvol::forms;
use renvol::liouville::{
    self, extremum_character_check, liouville_functional, liouville_residual,
    solve_uniformization, LiouvilleError, SolverConfig,
};
use renvol::mesh::{self, MetricChoice, TriMesh};
use renvol::report::{csv_two_columns, Report};
use renvol::schwarzian::{
    cocycle_defect, theta_vs_schwarzian, HolomorphicMap, UniformizedDomain,
};
use renvol::wvolume::{
    dual_volume, renormalized_limit, schlafli_at_infinity_check, schlafli_fd_check,
    tube_geometry, w_at_constant_curvature, w_volume, FuchsianTube,
};

#[derive(Parser)]
#[command(name = "renvol", version, about = "Renormalized-volume toolkit for hyperbolic ends")]
struct Cli {
    /// TOML config file (keys: seed, tol, grid_step, out); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed; identical seed and config give byte-identical reports.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for reports and CSV curves.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Tighten every suite tolerance to at most this value.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Step for finite-difference checks (default 1e-4).
    #[arg(long = "grid-step", global = true)]
    grid_step: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant suites of every module.
    Check,
    /// Fundamental-form identities at infinity.
    Forms,
    /// Epstein-surface verification (expansion, Codazzi, theta).
    Epstein,
    /// Schwarzian-derivative verification.
    Schwarzian,
    /// Solve the Liouville equation on a mesh file.
    Uniformize {
        mesh: PathBuf,
        #[arg(long, default_value_t = 50)]
        max_iters: usize,
        /// Target curvature is -lambda.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Normalize the solution to this total area and report the
        /// achieved lambda.
        #[arg(long)]
        area: Option<f64>,
    },
    /// Fuchsian-tube volume report and regularization curve.
    Tube {
        #[arg(long)]
        genus: usize,
        /// Half-width of the tube.
        #[arg(long)]
        radius: f64,
        #[arg(long = "rho-max", default_value_t = 10.0)]
        rho_max: f64,
        #[arg(long, default_value_t = 64)]
        steps: usize,
        /// Step for the Schlafli finite-difference checks.
        #[arg(long, default_value_t = 1e-4)]
        dr: f64,
    },
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    tol: Option<f64>,
    grid_step: Option<f64>,
    out: Option<String>,
}

/// Resolved run settings.
struct Settings {
    seed: u64,
    out: PathBuf,
    tol: Option<f64>,
    grid_step: f64,
}

impl Settings {
    /// Effective tolerance: the per-check default, tightened by --tol.
    fn tol(&self, default: f64) -> f64 {
        match self.tol {
            Some(t) => default.min(t),
            None => default,
        }
    }
}

enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numeric(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<LiouvilleError> for CliError {
    fn from(e: LiouvilleError) -> Self {
        match e {
            LiouvilleError::NonConvergence { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let file_cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            toml::from_str::<FileConfig>(&text).map_err(|e| {
                CliError::Usage(format!("malformed config {}:\n{e}", path.display()))
            })?
        }
        None => FileConfig::default(),
    };
    let settings = Settings {
        seed: cli.seed.or(file_cfg.seed).unwrap_or(42),
        out: cli
            .out
            .or(file_cfg.out.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("renvol-out")),
        tol: cli.tol.or(file_cfg.tol),
        grid_step: cli.grid_step.or(file_cfg.grid_step).unwrap_or(1e-4),
    };
    if settings.grid_step <= 0.0 {
        return Err(CliError::Usage(format!(
            "grid step must be positive, got {}",
            settings.grid_step
        )));
    }

    match cli.command {
        Command::Check => {
            let mut report = Report::new("renvol check");
            preamble(&mut report, &settings);
            forms_suite(&settings, &mut report);
            epstein_suite(&settings, &mut report);
            schwarzian_suite(&settings, &mut report);
            mesh_suite(&settings, &mut report);
            liouville_suite(&settings, &mut report);
            wvolume_suite(&settings, &mut report);
            finish(&settings, "check_report.txt", report)
        }
        Command::Forms => {
            let mut report = Report::new("renvol forms");
            preamble(&mut report, &settings);
            forms_suite(&settings, &mut report);
            finish(&settings, "forms_report.txt", report)
        }
        Command::Epstein => {
            let mut report = Report::new("renvol epstein");
            preamble(&mut report, &settings);
            epstein_suite(&settings, &mut report);
            finish(&settings, "epstein_report.txt", report)
        }
        Command::Schwarzian => {
            let mut report = Report::new("renvol schwarzian");
            preamble(&mut report, &settings);
            schwarzian_suite(&settings, &mut report);
            finish(&settings, "schwarzian_report.txt", report)
        }
        Command::Uniformize { mesh, max_iters, lambda, area } => {
            cmd_uniformize(&settings, &mesh, max_iters, lambda, area)
        }
        Command::Tube { genus, radius, rho_max, steps, dr } => {
            cmd_tube(&settings, genus, radius, rho_max, steps, dr)
        }
    }
}

fn preamble(report: &mut Report, settings: &Settings) {
    report.kv("seed", settings.seed);
    report.kv("grid_step", settings.grid_step);
    match settings.tol {
        Some(t) => report.kv("tol_override", t),
        None => report.kv("tol_override", "none"),
    }
    report.kv("calibration.liouville", liouville::CALIBRATION_NOTE);
    report.kv("calibration.schwarzian", renvol::schwarzian::DIRECTION_NOTE);
}

fn finish(settings: &Settings, filename: &str, report: Report) -> Result<bool, CliError> {
    std::fs::create_dir_all(&settings.out)
        .map_err(|e| CliError::Usage(format!("cannot create output dir: {e}")))?;
    let path = settings.out.join(filename);
    std::fs::write(&path, report.render())
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    for line in report.summary_lines() {
        println!("{line}");
    }
    let (passed, total) = report.check_count();
    println!("{passed}/{total} checks passed; report written to {}", path.display());
    if !report.all_passed() {
        println!("failing: {}", report.failing().join(", "));
    }
    Ok(report.all_passed())
}

// ----------------------------------------------------------------------
// Suites
// ----------------------------------------------------------------------

fn forms_suite(settings: &Settings, report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let mut max_round_trip = 0.0f64;
    let mut max_gauss = 0.0f64;
    let mut max_self_adjoint = 0.0f64;
    let mut max_traceless = 0.0f64;
    let mut max_two_route_h = 0.0f64;
    let mut convexity_ok = true;
    for _ in 0..10_000 {
        let j = forms::random_jet(&mut rng, -0.9, 2.0);
        let inf = forms::to_infinity(&j).unwrap();
        let back = forms::from_infinity(&inf).unwrap();
        max_round_trip = max_round_trip
            .max((back.metric.g11 - j.metric.g11).abs())
            .max((back.metric.g12 - j.metric.g12).abs())
            .max((back.metric.g22 - j.metric.g22).abs())
            .max((back.shape.b11 - j.shape.b11).abs())
            .max((back.shape.b12 - j.shape.b12).abs())
            .max((back.shape.b21 - j.shape.b21).abs())
            .max((back.shape.b22 - j.shape.b22).abs());
        let h = forms::mean_curvature_at_infinity(&j.shape).unwrap();
        let k = forms::curvature_at_infinity(
            j.gauss_curvature(),
            j.mean_curvature(),
            j.extrinsic_curvature(),
        )
        .unwrap();
        max_gauss = max_gauss.max((h + k).abs());
        max_self_adjoint = max_self_adjoint.max(inf.shape.self_adjoint_defect(&inf.metric));
        max_traceless =
            max_traceless.max(inf.traceless_second_form().trace_with(&inf.metric).unwrap().abs());
        let eb = forms::Operator2::identity().add(&j.shape);
        let trace_route =
            eb.inverse().unwrap().mul(&forms::Operator2::identity().sub(&j.shape)).trace();
        max_two_route_h = max_two_route_h.max((h - trace_route).abs());
        let (k1, _) = inf.shape.eigenvalues();
        convexity_ok &=
            forms::horospherically_convex(&j.shape, &j.metric) == (k1 > 0.0);
    }
    report.check("forms.involution_round_trip", max_round_trip, settings.tol(1e-12));
    report.check("forms.gauss_at_infinity_h_plus_k", max_gauss, settings.tol(1e-12));
    report.check("forms.self_adjointness_preserved", max_self_adjoint, settings.tol(1e-11));
    report.check("forms.traceless_part_trace", max_traceless, settings.tol(1e-12));
    report.check("forms.mean_curvature_two_routes", max_two_route_h, settings.tol(1e-12));
    report.check_bool("forms.horoconvexity_equivalence", convexity_ok);

    let mut max_leaf = 0.0f64;
    let mut leaves_positive = true;
    for _ in 0..1000 {
        let j = forms::random_jet(&mut rng, -0.9, 0.9);
        let inf = forms::to_infinity(&j).unwrap();
        for rho in [-1.0, -0.3, 0.0, 0.7, 1.5] {
            let a = forms::equidistant_metric(&j, rho);
            let b = forms::equidistant_metric_from_infinity(&inf, rho);
            max_leaf = max_leaf.max(a.sub(&b).max_abs());
            leaves_positive &= a.into_metric().is_ok();
        }
    }
    report.check("forms.equidistant_two_routes", max_leaf, settings.tol(1e-11));
    report.check_bool("forms.convex_leaves_positive", leaves_positive);
}

fn epstein_suite(settings: &Settings, report: &mut Report) {
    let h = settings.grid_step;
    let c = Complex64::new;

    // Expansion identity across the built-in fields.
    let fields: Vec<(&str, LiouvilleField, Complex64)> = vec![
        ("flat", LiouvilleField::flat(), c(0.3, -0.2)),
        ("halfplane", LiouvilleField::half_plane_hyperbolic(), c(0.0, 1.0)),
        ("disk", LiouvilleField::disk_hyperbolic(), c(0.3, 0.1)),
        ("strip", LiouvilleField::strip_hyperbolic(), c(0.5, 1.1)),
        (
            "annulus",
            LiouvilleField::annulus_hyperbolic(std::f64::consts::E).unwrap(),
            Complex64::from_polar(1.484, 0.7),
        ),
    ];
    let mut worst = 0.0f64;
    for (_, f, z) in &fields {
        for rho in [0.0, 1.0, 2.0] {
            worst = worst.max(f.expansion_check(*z, rho, h).unwrap());
        }
    }
    report.check("epstein.expansion_defect", worst, settings.tol(1e-6));

    // Convergence order of the expansion defect on the annulus.
    let f = LiouvilleField::annulus_hyperbolic(2.0).unwrap();
    let z = c(1.35, 0.25);
    let d1 = f.expansion_check(z, 0.5, 0.02).unwrap();
    let d2 = f.expansion_check(z, 0.5, 0.01).unwrap();
    let order = (d1 / d2).log2();
    report.kv("epstein.expansion_order", order);
    report.check("epstein.expansion_order_defect", (order - 2.0).abs(), 0.2);

    // Codazzi residual at infinity on the annulus field.
    let grid = f.jet_grid(z - Complex64::new(2.0 * h, 2.0 * h), h, 5, 5).unwrap();
    let resid = forms::codazzi_residual_at_infinity(&grid, 2, 2).unwrap();
    report.check("epstein.codazzi_residual", resid, settings.tol(1e-5));
    let mut cods = Vec::new();
    for hh in [0.02, 0.01] {
        let grid = f.jet_grid(z - Complex64::new(2.0 * hh, 2.0 * hh), hh, 5, 5).unwrap();
        cods.push(forms::codazzi_residual_at_infinity(&grid, 2, 2).unwrap());
    }
    let cod_order = (cods[0] / cods[1]).log2();
    report.kv("epstein.codazzi_order", cod_order);
    report.check("epstein.codazzi_order_defect", (cod_order - 2.0).abs(), 0.3);

    // Fuchsian fields have exactly vanishing theta (traceless part zero).
    let mut fuchsian = 0.0f64;
    for (f, z) in [
        (LiouvilleField::half_plane_hyperbolic(), c(0.7, 1.9)),
        (LiouvilleField::disk_hyperbolic(), c(0.3, 0.1)),
    ] {
        fuchsian = fuchsian.max(f.theta(z).unwrap().norm());
    }
    report.check("epstein.fuchsian_theta_vanishes", fuchsian, settings.tol(1e-14));

    // Theta assembled from the derivative jet against the closed forms.
    let theta_from_jet = |f: &LiouvilleField, z: Complex64| -> Complex64 {
        let j = f.jet(z).unwrap();
        j.phi_zz - 0.5 * j.phi_z * j.phi_z
    };
    let strip = LiouvilleField::strip_hyperbolic();
    let mut strip_defect = 0.0f64;
    for z in [c(0.0, 1.0), c(2.0, 0.5), c(-1.0, 2.9)] {
        strip_defect = strip_defect.max((theta_from_jet(&strip, z) - c(-0.5, 0.0)).norm());
    }
    report.check("epstein.strip_theta_constant", strip_defect, settings.tol(1e-12));

    let mut annulus_defect = 0.0f64;
    for modulus in [2.0, std::f64::consts::E, 10.0] {
        let f = LiouvilleField::annulus_hyperbolic(modulus).unwrap();
        let alpha = std::f64::consts::PI / modulus.ln();
        for w in [c(1.3, 0.2), c(0.0, 1.4), c(-1.2, 0.5)] {
            if !f.domain.contains(w, 1e-9) {
                continue;
            }
            let expect = (1.0 + alpha * alpha) / (2.0 * w * w);
            annulus_defect = annulus_defect.max((theta_from_jet(&f, w) - expect).norm());
        }
    }
    report.check("epstein.annulus_theta_closed_form", annulus_defect, settings.tol(1e-8));

    // Holomorphicity of theta on solutions; the quadratic field is the
    // negative control.
    let mut dbar = 0.0f64;
    dbar = dbar.max(strip.dbar_theta(c(0.3, 1.0), h).unwrap());
    dbar = dbar.max(f.dbar_theta(c(1.4, 0.1), h).unwrap());
    dbar = dbar.max(LiouvilleField::disk_hyperbolic().dbar_theta(c(0.2, 0.3), h).unwrap());
    report.check("epstein.dbar_theta_on_solutions", dbar, settings.tol(1e-6));
    let control = LiouvilleField::non_solution_quadratic().dbar_theta(c(0.5, 0.3), h).unwrap();
    report.kv("epstein.dbar_theta_control", control);
    report.check_bool("epstein.dbar_theta_control_detected", control > 1e-2);

    // Curvature consistency: K* from the conformal factor against the
    // curvature transform applied to the recovered finite jet.
    let mut kstar_defect = 0.0f64;
    for (_, f, z) in &fields[1..] {
        let jet = f.infinity_jet(*z).unwrap();
        let surface = forms::from_infinity(&jet).unwrap();
        let k2 = forms::curvature_at_infinity(
            surface.gauss_curvature(),
            surface.mean_curvature(),
            surface.extrinsic_curvature(),
        )
        .unwrap();
        kstar_defect = kstar_defect.max((f.curvature_at_infinity(*z).unwrap() - k2).abs());
    }
    report.check("epstein.curvature_consistency", kstar_defect, settings.tol(1e-10));
}

fn schwarzian_suite(settings: &Settings, report: &mut Report) {
    let c = Complex64::new;
    let mobius = HolomorphicMap::mobius(c(2.0, 1.0), c(0.0, -1.0), c(1.0, 0.5), c(3.0, 0.0));
    let mut kernel = 0.0f64;
    for z in [c(0.3, 0.4), c(-1.0, 2.0), c(5.0, -0.1)] {
        kernel = kernel.max(mobius.schwarzian(z).unwrap().norm());
    }
    report.check("schwarzian.mobius_kernel", kernel, settings.tol(1e-10));

    let clone = mobius.clone();
    let numeric = HolomorphicMap::numeric(move |z| clone.eval(z));
    report.check(
        "schwarzian.mobius_kernel_numeric",
        numeric.schwarzian(c(0.3, 0.4)).unwrap().norm(),
        settings.tol(1e-5),
    );

    let exp = HolomorphicMap::exp();
    let mut exp_defect = 0.0f64;
    for z in [c(0.0, 0.0), c(1.0, -2.0), c(-3.0, 0.7)] {
        exp_defect = exp_defect.max((exp.schwarzian(z).unwrap() - c(-0.5, 0.0)).norm());
    }
    report.check("schwarzian.exp_minus_half", exp_defect, settings.tol(1e-10));

    let square = HolomorphicMap::power(c(2.0, 0.0));
    report.check(
        "schwarzian.square_at_one",
        (square.schwarzian(c(1.0, 0.0)).unwrap() - c(-1.5, 0.0)).norm(),
        settings.tol(1e-12),
    );

    let maps = [
        mobius,
        HolomorphicMap::exp(),
        HolomorphicMap::power(c(2.0, 0.0)),
        HolomorphicMap::power(c(0.0, 1.5)),
    ];
    let mut cocycle = 0.0f64;
    for f in &maps {
        for g in &maps {
            cocycle = cocycle.max(cocycle_defect(f, g, c(1.1, 0.4)).unwrap());
        }
    }
    report.check("schwarzian.cocycle_all_pairs", cocycle, settings.tol(1e-8));

    let mut strip = 0.0f64;
    for z in [c(0.0, 1.0), c(2.0, 0.5), c(-1.0, 2.9)] {
        strip = strip.max(theta_vs_schwarzian(UniformizedDomain::Strip, z).unwrap());
    }
    report.check("schwarzian.theta_vs_s_strip", strip, settings.tol(1e-12));

    let mut annulus = 0.0f64;
    for modulus in [2.0, std::f64::consts::E, 10.0] {
        for w in [c(1.3, 0.2), c(0.0, 1.4), c(-1.2, 0.5)] {
            if w.norm() <= 1.0 + 1e-9 || w.norm() >= modulus - 1e-9 {
                continue;
            }
            annulus =
                annulus.max(theta_vs_schwarzian(UniformizedDomain::Annulus { modulus }, w).unwrap());
        }
    }
    report.check("schwarzian.theta_vs_s_annulus", annulus, settings.tol(1e-8));
    report.check(
        "schwarzian.theta_vs_s_halfplane",
        theta_vs_schwarzian(UniformizedDomain::HalfPlane, c(0.3, 1.7)).unwrap(),
        settings.tol(1e-14),
    );
}

fn mesh_suite(settings: &Settings, report: &mut Report) {
    let tau = std::f64::consts::TAU;
    let icosa = mesh::icosahedron();
    let k = icosa.gaussian_curvature(MetricChoice::Background).unwrap();
    let total = icosa.integrate(MetricChoice::Background, &k).unwrap();
    report.check("mesh.gauss_bonnet_icosahedron", (total - 2.0 * tau).abs(), settings.tol(1e-10));

    let torus = mesh::flat_torus(6);
    let k = torus.gaussian_curvature(MetricChoice::Background).unwrap();
    let flat = k.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    report.check("mesh.flat_torus_curvature", flat, settings.tol(1e-12));

    let fixture = mesh::genus2_octagon(8);
    let m = &fixture.mesh;
    let k = m.gaussian_curvature(MetricChoice::Background).unwrap();
    let total = m.integrate(MetricChoice::Background, &k).unwrap();
    report.check("mesh.gauss_bonnet_genus2", (total + 2.0 * tau).abs(), settings.tol(1e-9));
    let area = m.total_area(MetricChoice::Background).unwrap();
    report.kv("mesh.genus2_area", area);
    report.check("mesh.genus2_area_relative", (area - 2.0 * tau).abs() / (2.0 * tau), 0.02);

    let u: Vec<f64> = (0..m.vertex_count()).map(|v| ((v * 13 + 5) % 23) as f64 / 23.0).collect();
    let v: Vec<f64> = (0..m.vertex_count()).map(|v| ((v * 7 + 2) % 19) as f64 / 19.0).collect();
    let lu = m.laplacian(MetricChoice::Background, &u).unwrap();
    let lv = m.laplacian(MetricChoice::Background, &v).unwrap();
    let ulv: Vec<f64> = u.iter().zip(&lv).map(|(a, b)| a * b).collect();
    let vlu: Vec<f64> = v.iter().zip(&lu).map(|(a, b)| a * b).collect();
    let asym = (m.integrate(MetricChoice::Background, &ulv).unwrap()
        - m.integrate(MetricChoice::Background, &vlu).unwrap())
    .abs();
    report.check("mesh.laplacian_symmetry", asym, settings.tol(1e-10));
    let div = m.integrate(MetricChoice::Background, &lu).unwrap().abs();
    report.check("mesh.laplacian_divergence", div, settings.tol(1e-10));
}

fn liouville_suite(settings: &Settings, report: &mut Report) {
    let fixture = mesh::genus2_octagon(6);
    let m = fixture.mesh.clone();
    let cfg = SolverConfig { residual_tolerance: 1e-10, ..Default::default() };
    match solve_uniformization(&m, &cfg) {
        Ok((phi, solve)) => {
            report.kv("liouville.iterations", solve.iterations);
            report.kv("liouville.scaled_area", solve.scaled_area);
            report.kv("liouville.curvature_mean", solve.curvature_mean);
            report.check("liouville.residual", solve.final_residual, settings.tol(1e-9));
            report.check_bool("liouville.iterations_within_budget", solve.iterations < 30);
            report.check(
                "liouville.area_gauss_bonnet",
                (solve.scaled_area - 4.0 * std::f64::consts::PI).abs()
                    / (4.0 * std::f64::consts::PI),
                0.02,
            );
            let probe =
                extremum_character_check(&m, &phi, 20, settings.seed, 1e-4).unwrap();
            report.kv("liouville.extremum_coercivity", probe.coercivity);
            report.check_bool("liouville.extremum_uniform_sign", probe.uniform_sign);
            report.check_bool("liouville.extremum_coercive", probe.coercivity > 0.0);
        }
        Err(e) => {
            report.kv("liouville.solver_error", e.to_string());
            report.check_bool("liouville.solver_converged", false);
        }
    }

    // Euler-Lagrange consistency on a non-trivial conformal factor.
    let mut scaled = fixture.mesh.clone();
    let psi = mesh::radial_bump(&fixture, 0.2, 1.4);
    scaled.set_phi(psi.clone()).unwrap();
    let r = liouville_residual(&scaled).unwrap();
    let areas = scaled.vertex_areas(MetricChoice::Background).unwrap();
    let u: Vec<f64> =
        (0..scaled.vertex_count()).map(|v| (((v * 29 + 3) % 13) as f64 / 13.0) - 0.5).collect();
    let pairing: f64 = r.iter().zip(&u).zip(&areas).map(|((r, u), a)| r * u * a).sum::<f64>()
        / (4.0 * std::f64::consts::PI);
    let eps = 1e-6;
    let eval = |sign: f64| {
        let mut mm = scaled.clone();
        let p: Vec<f64> = psi.iter().zip(&u).map(|(p, u)| p + sign * eps * u).collect();
        mm.set_phi(p).unwrap();
        liouville_functional(&mm).unwrap()
    };
    let fd = (eval(1.0) - eval(-1.0)) / (2.0 * eps);
    report.check(
        "liouville.functional_gradient_vs_residual",
        (fd - pairing).abs() / pairing.abs().max(1.0),
        settings.tol(1e-8),
    );
}

fn wvolume_suite(settings: &Settings, report: &mut Report) {
    let pi = std::f64::consts::PI;
    let tube = FuchsianTube::new(2, 1.0).unwrap();
    let geom = tube_geometry(&tube).unwrap();
    report.check(
        "wvolume.quadrature_vs_closed_form",
        (geom.volume_quadrature - geom.volume).abs() / geom.volume,
        settings.tol(1e-12),
    );
    let w = w_volume(geom.volume, geom.mean_curvature_integral);
    report.check("wvolume.w_g2_r1", (w - 4.0 * pi).abs(), settings.tol(1e-12));
    let vd = dual_volume(geom.volume, geom.mean_curvature_integral);
    report.check("wvolume.self_duality", ((geom.volume + vd) / 2.0 - w).abs(), settings.tol(1e-12));

    let rep = renormalized_limit(&tube, 10.0, 64).unwrap();
    report.kv("wvolume.v_renormalized", rep.v_renormalized);
    report.kv("wvolume.decay_slope", rep.decay_slope);
    report.check("wvolume.renormalized_relation", rep.w_relation_defect.abs(), settings.tol(1e-6));
    report.check("wvolume.decay_slope_defect", (rep.decay_slope + 2.0).abs(), 0.1);

    let s1 = schlafli_fd_check(&tube, 1e-4).unwrap();
    report.check("wvolume.schlafli_boundary", s1.defect, settings.tol(1e-6));
    let s2 = schlafli_at_infinity_check(&tube, 1e-4).unwrap();
    report.check("wvolume.schlafli_infinity", s2.defect, settings.tol(1e-6));
    report.check_bool(
        "wvolume.schlafli_infinity_sign_flip",
        (s2.dw_fd - s2.wrong_sign_value).abs() > 1.0,
    );

    let cc = w_at_constant_curvature(&tube).unwrap();
    report.check(
        "wvolume.w_at_constant_curvature",
        (cc.w_m - 2.0 * pi * 2.0f64.ln()).abs(),
        settings.tol(1e-12),
    );
    let maximal = cc.probe.iter().all(|&(eps, w)| w <= cc.w_m + 1e-12 && (eps == 0.0 || w < cc.w_m));
    report.check_bool("wvolume.constant_curvature_is_max", maximal);
}

// ----------------------------------------------------------------------
// Commands with file IO beyond a single report
// ----------------------------------------------------------------------

fn cmd_uniformize(
    settings: &Settings,
    mesh_path: &Path,
    max_iters: usize,
    lambda: f64,
    area: Option<f64>,
) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(mesh_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", mesh_path.display())))?;
    let mesh = TriMesh::parse(&text).map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = SolverConfig {
        max_iterations: max_iters,
        lambda,
        area_constraint: area,
        ..Default::default()
    };
    let (phi, solve) = solve_uniformization(&mesh, &cfg)?;

    let mut report = Report::new("renvol uniformize");
    preamble(&mut report, settings);
    report.kv("mesh", mesh_path.display());
    report.kv("vertices", mesh.vertex_count());
    report.kv("genus", mesh.genus());
    report.kv("lambda_target", lambda);
    report.kv("lambda_achieved", solve.achieved_lambda);
    report.kv("iterations", solve.iterations);
    report.kv(
        "residual_history",
        solve
            .residual_history
            .iter()
            .map(|r| format!("{r:e}"))
            .collect::<Vec<_>>()
            .join(" "),
    );
    report.kv("curvature_min", solve.curvature_min);
    report.kv("curvature_mean", solve.curvature_mean);
    report.kv("curvature_max", solve.curvature_max);
    report.kv("scaled_area", solve.scaled_area);
    report.check("uniformize.residual", solve.final_residual, settings.tol(1e-8));

    std::fs::create_dir_all(&settings.out)
        .map_err(|e| CliError::Usage(format!("cannot create output dir: {e}")))?;
    let phi_path = settings.out.join("phi.txt");
    let mut phi_text = String::new();
    for v in &phi {
        phi_text.push_str(&format!("{v:e}\n"));
    }
    std::fs::write(&phi_path, phi_text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", phi_path.display())))?;
    println!("phi written to {}", phi_path.display());
    finish(settings, "uniformize_report.txt", report)
}

fn cmd_tube(
    settings: &Settings,
    genus: usize,
    radius: f64,
    rho_max: f64,
    steps: usize,
    dr: f64,
) -> Result<bool, CliError> {
    let tube = FuchsianTube::new(genus, radius).map_err(|e| CliError::Usage(e.to_string()))?;
    let rep =
        renormalized_limit(&tube, rho_max, steps).map_err(|e| CliError::Usage(e.to_string()))?;
    // The finite-difference step must stay inside the tube.
    let dr = dr.min(radius / 2.0);
    let s1 = schlafli_fd_check(&tube, dr).map_err(|e| CliError::Usage(e.to_string()))?;
    let s2 =
        schlafli_at_infinity_check(&tube, dr).map_err(|e| CliError::Usage(e.to_string()))?;
    let cc = w_at_constant_curvature(&tube).map_err(|e| CliError::Usage(e.to_string()))?;

    let mut report = Report::new("renvol tube");
    preamble(&mut report, settings);
    report.kv("genus", genus);
    report.kv("half_width", radius);
    report.kv("schlafli_dr", dr);
    report.kv("core_area", tube.core_area());
    report.kv("volume", rep.volume);
    report.kv("mean_curvature_integral", rep.mean_curvature_integral);
    report.kv("w_volume", rep.w);
    report.kv("dual_volume", rep.v_dual);
    report.kv("v_renormalized", rep.v_renormalized);
    report.kv("extrapolated_limit", rep.extrapolated_limit);
    report.kv("decay_slope", rep.decay_slope);
    report.kv("w_constant_curvature_leaf", cc.r0);
    report.kv("w_at_constant_curvature", cc.w_m);
    report.check("tube.w_relation", rep.w_relation_defect.abs(), settings.tol(1e-6));
    report.check("tube.decay_slope_defect", (rep.decay_slope + 2.0).abs(), 0.1);
    report.check("tube.schlafli_boundary", s1.defect, settings.tol(1e-6));
    report.check("tube.schlafli_infinity", s2.defect, settings.tol(1e-6));

    std::fs::create_dir_all(&settings.out)
        .map_err(|e| CliError::Usage(format!("cannot create output dir: {e}")))?;
    let csv_path = settings.out.join("tube_curve.csv");
    std::fs::write(&csv_path, csv_two_columns(("rho", "L"), &rep.limit_curve))
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", csv_path.display())))?;
    println!("curve written to {}", csv_path.display());
    finish(settings, "tube_report.txt", report)
}
