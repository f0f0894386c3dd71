//! The five runnable scenarios. Each writes plot-ready CSV files whose
//! first line is a `#` comment carrying the full configuration, so any file
//! can be reproduced byte for byte from its own header.

use std::fmt::Write as _;
use std::path::Path;

use nctrans::diffusion::{self, DiffusionParams};
use nctrans::integral::{self, RadialGrid, SolveError};
use nctrans::mc::{self, Source, TallySpec, TransportProblem};
use nctrans::pathlen::PathLengthLaw;

use crate::config::{CaptureKind, LawKind, ScenarioConfig};
use crate::CliError;

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn header(config: &ScenarioConfig, columns: &str) -> String {
    format!("# nctrans {}\n{columns}\n", config.serialize_line())
}

fn problem_from(config: &ScenarioConfig) -> Result<TransportProblem, CliError> {
    TransportProblem::new(
        config.build_law()?,
        config.c,
        Source::PointIsotropicAtOrigin {
            strength: config.strength,
        },
    )
    .map_err(CliError::from_config)
}

fn tally_spec(config: &ScenarioConfig, problem: &TransportProblem) -> Result<TallySpec, CliError> {
    let mut spec = match config.shell_r_max {
        Some(r_max) => TallySpec::uniform(r_max, config.shells),
        None => {
            let kappa = problem.diffusion_kappa().map_err(CliError::from_config)?;
            TallySpec::uniform(12.0 / kappa, config.shells)
        }
    }
    .map_err(CliError::from_config)?;
    if config.track_length {
        spec = spec.with_track_length();
    }
    if config.capture == CaptureKind::Implicit {
        spec = spec
            .with_implicit_capture(config.capture_cutoff, config.capture_survival)
            .map_err(CliError::from_config)?;
    }
    Ok(spec)
}

fn solver_grid(
    config: &ScenarioConfig,
    problem: &TransportProblem,
) -> Result<RadialGrid, CliError> {
    let mean = problem.law.moments().map_err(CliError::from_config)?.first;
    let kappa = problem.diffusion_kappa().map_err(CliError::from_config)?;
    let r_min = config.grid_r_min.unwrap_or(1e-3 * mean);
    let r_max = config.grid_r_max.unwrap_or(15.0 / kappa);
    RadialGrid::geometric(r_min, r_max, config.grid_nodes).map_err(CliError::from_config)
}

/// The three laws plotted by the `curves` scenario: the homogenized
/// classical medium, the law matched to classical diffusion of that medium,
/// and the law matched to the true mean-squared free path.
fn curve_laws(config: &ScenarioConfig) -> Result<[PathLengthLaw; 3], CliError> {
    Ok([
        PathLengthLaw::exponential(config.sigmabar).map_err(CliError::from_config)?,
        PathLengthLaw::diffusion_matched(2.0 / (config.sigmabar * config.sigmabar))
            .map_err(CliError::from_config)?,
        PathLengthLaw::diffusion_matched(config.ms2).map_err(CliError::from_config)?,
    ])
}

/// Emit `sigma_t_curves.csv` and `pdf_curves.csv`: the path-dependent cross
/// section and the free-path density of the three laws on a uniform grid.
pub fn run_curves(config: &ScenarioConfig) -> Result<(), CliError> {
    let laws = curve_laws(config)?;
    let columns = "s,classical_transport,classical_diffusion,nonclassical_diffusion";

    let mut sigma = header(config, columns);
    let mut pdf = header(config, columns);
    for k in 0..config.curve_points {
        let s = config.curve_s_max * k as f64 / (config.curve_points - 1) as f64;
        let _ = write!(sigma, "{s}");
        let _ = write!(pdf, "{s}");
        for law in &laws {
            let _ = write!(
                sigma,
                ",{}",
                law.sigma_t_of_s(s).map_err(CliError::from_config)?
            );
            let _ = write!(pdf, ",{}", law.pdf(s).map_err(CliError::from_config)?);
        }
        sigma.push('\n');
        pdf.push('\n');
    }
    write_file(&config.out_dir.join("sigma_t_curves.csv"), &sigma)?;
    write_file(&config.out_dir.join("pdf_curves.csv"), &pdf)?;
    println!(
        "curves: wrote {} points for 3 laws to {}",
        config.curve_points,
        config.out_dir.display()
    );
    Ok(())
}

/// Emit `moments.csv`: quadrature values of the law's normalization and
/// first two moments against the closed forms.
pub fn run_moments(config: &ScenarioConfig) -> Result<(), CliError> {
    let law = config.build_law()?;
    let has_closed_forms = config.law != LawKind::Tabulated;

    let closed: [f64; 3] = if has_closed_forms {
        let m = law.moments().map_err(CliError::from_config)?;
        [1.0, m.first, m.second]
    } else {
        [f64::NAN; 3]
    };
    let quantities = ["int_p", "int_s_p", "int_s2_p"];
    let quadrature: [Result<f64, nctrans::Error>; 3] = [
        law.normalization_by_quadrature(),
        law.moments_by_quadrature().map(|m| m.first),
        law.moments_by_quadrature().map(|m| m.second),
    ];

    let mut out = header(config, "quantity,quadrature,closed_form,abs_diff,status");
    for i in 0..3 {
        match &quadrature[i] {
            Ok(value) => {
                let diff = (value - closed[i]).abs();
                let status = if has_closed_forms {
                    "ok"
                } else {
                    "no_closed_form"
                };
                let _ = writeln!(
                    out,
                    "{},{value},{},{diff},{status}",
                    quantities[i], closed[i]
                );
            }
            Err(e) => {
                let _ = writeln!(
                    out,
                    "{},NaN,{},NaN,quadrature_failed: {e}",
                    quantities[i], closed[i]
                );
            }
        }
    }
    write_file(&config.out_dir.join("moments.csv"), &out)?;
    println!(
        "moments: wrote {}",
        config.out_dir.join("moments.csv").display()
    );
    Ok(())
}

/// Run the Monte Carlo route and emit `tally.csv` (collision density with
/// statistical errors) plus `flux.csv` (both scalar-flux conversions).
pub fn run_mc(config: &ScenarioConfig) -> Result<(), CliError> {
    let problem = problem_from(config)?;
    let spec = tally_spec(config, &problem)?;
    let tally = mc::run_histories(&problem, &spec, config.histories, config.seed)
        .map_err(CliError::from_config)?;
    write_mc_outputs(config, &problem, &tally)?;
    println!(
        "mc: {} histories, {:.3} collisions/history, {} collisions beyond the outermost shell",
        tally.histories(),
        tally.mean_collisions_per_history(),
        tally.overflow_count()
    );
    Ok(())
}

fn write_mc_outputs(
    config: &ScenarioConfig,
    problem: &TransportProblem,
    tally: &mc::RadialTally,
) -> Result<(), CliError> {
    let strength = config.strength;
    let mut out = header(config, "r_mid,r_lo,r_hi,f_estimate,rel_std_err,count");
    for e in tally.estimates() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.r_mid,
            e.r_lo,
            e.r_hi,
            e.value * strength,
            e.rel_std_err,
            e.count
        );
    }
    write_file(&config.out_dir.join("tally.csv"), &out)?;

    // Both scalar-flux conversions: the sampled law's first moment and the
    // true medium mean free path.
    let surrogate = problem.law.moments().map_err(CliError::from_config)?.first;
    let true_mfp = config.true_mean_free_path();
    let phi_surrogate =
        mc::scalar_flux_estimate(tally, surrogate).map_err(CliError::from_config)?;
    let phi_true = mc::scalar_flux_estimate(tally, true_mfp).map_err(CliError::from_config)?;
    let mut flux = header(config, "r_mid,phi0_surrogate,phi0_true,rel_std_err");
    for (a, b) in phi_surrogate.iter().zip(&phi_true) {
        let _ = writeln!(
            flux,
            "{},{},{},{}",
            a.r_mid,
            a.value * strength,
            b.value * strength,
            a.rel_std_err
        );
    }
    write_file(&config.out_dir.join("flux.csv"), &flux)?;

    if let Some(track) = tally.track_length_flux() {
        let mut tl = header(config, "r_mid,phi_track_length");
        for (e, phi) in tally.estimates().iter().zip(&track) {
            let _ = writeln!(tl, "{},{}", e.r_mid, phi * strength);
        }
        write_file(&config.out_dir.join("track_flux.csv"), &tl)?;
    }
    Ok(())
}

/// Run the integral-equation route and emit `solution.csv` with both
/// scalar-flux conversions.
pub fn run_integral(config: &ScenarioConfig) -> Result<(), CliError> {
    let problem = problem_from(config)?;
    let grid = solver_grid(config, &problem)?;
    let report = solve(config, &problem, &grid)?;
    let balance =
        integral::collision_balance(&problem, &report.field).map_err(CliError::from_config)?;

    let surrogate = problem.law.moments().map_err(CliError::from_config)?.first;
    let true_mfp = config.true_mean_free_path();
    let mut out = header(config, "r,f,phi0_surrogate,phi0_true");
    for (&r, &f) in report.field.nodes().iter().zip(report.field.values()) {
        let _ = writeln!(out, "{r},{f},{},{}", surrogate * f, true_mfp * f);
    }
    write_file(&config.out_dir.join("solution.csv"), &out)?;
    println!(
        "integral: {} iterations, balance (1-c) int f dV / strength = {balance:.6}",
        report.iterations
    );
    Ok(())
}

fn solve(
    config: &ScenarioConfig,
    problem: &TransportProblem,
    grid: &RadialGrid,
) -> Result<integral::SolveReport, CliError> {
    integral::solve_detailed(
        problem,
        grid,
        config.tol,
        integral::default_max_iters(config.c, config.tol),
    )
    .map_err(|e| match e {
        SolveError::Invalid(inner) => CliError::from_config(inner),
        other => CliError::Compute(other.to_string()),
    })
}

/// Outcome of the three-way comparison, with one summary line per check.
pub struct CompareOutcome {
    pub passed: bool,
    pub summary: String,
}

/// Run all three routes on the same problem, compare them per radius, and
/// emit `compare_nodes.csv`, `compare_shells.csv` and `summary.txt`.
pub fn run_compare(config: &ScenarioConfig) -> Result<CompareOutcome, CliError> {
    if config.law != LawKind::DiffusionMatched {
        return Err(CliError::Config(
            "compare requires law = diffusion_matched (the closed form is the referee)".to_string(),
        ));
    }
    let problem = problem_from(config)?;
    let strength = config.strength;
    let params = DiffusionParams::new(config.true_mean_free_path(), config.ms2, config.c)
        .map_err(CliError::from_config)?;

    // Deterministic route.
    let grid = solver_grid(config, &problem)?;
    let report = solve(config, &problem, &grid)?;
    let field = &report.field;
    let balance = integral::collision_balance(&problem, field).map_err(CliError::from_config)?;

    let mut nodes_csv = header(config, "r,f_integral,f_oracle,rel_dev");
    let mut max_dev: f64 = 0.0;
    let mut max_dev_r = f64::NAN;
    for (&r, &f) in field.nodes().iter().zip(field.values()) {
        let oracle = diffusion::point_source_collision_density(&params, strength, r)
            .map_err(CliError::from_config)?;
        let dev = f / oracle - 1.0;
        let _ = writeln!(nodes_csv, "{r},{f},{oracle},{dev}");
        if (config.cmp_r_lo..=config.cmp_r_hi).contains(&r) && dev.abs() > max_dev {
            max_dev = dev.abs();
            max_dev_r = r;
        }
    }
    write_file(&config.out_dir.join("compare_nodes.csv"), &nodes_csv)?;

    // Stochastic route, judged against the oracle's exact shell averages.
    let spec = tally_spec(config, &problem)?;
    let tally = mc::run_histories(&problem, &spec, config.histories, config.seed)
        .map_err(CliError::from_config)?;
    let mut shells_csv = header(
        config,
        "r_lo,r_mid,r_hi,f_mc,rel_std_err,f_oracle_avg,f_integral_avg,z_mc_vs_oracle",
    );
    let mut max_z: f64 = 0.0;
    let mut max_z_r = f64::NAN;
    let mut judged = 0usize;
    for e in tally.estimates() {
        let oracle_avg =
            diffusion::shell_averaged_collision_density(&params, strength, e.r_lo, e.r_hi)
                .map_err(CliError::from_config)?;
        let integral_avg = field
            .shell_average(e.r_lo, e.r_hi)
            .map_err(CliError::from_config)?;
        let f_mc = e.value * strength;
        let z = if e.count > 0 {
            (f_mc - oracle_avg) / (e.abs_std_err * strength)
        } else {
            f64::NAN
        };
        let _ = writeln!(
            shells_csv,
            "{},{},{},{},{},{},{},{}",
            e.r_lo, e.r_mid, e.r_hi, f_mc, e.rel_std_err, oracle_avg, integral_avg, z
        );
        let in_range = e.r_mid >= config.cmp_mc_r_lo && e.r_mid <= config.cmp_mc_r_hi;
        if in_range && e.rel_std_err.is_finite() && e.rel_std_err < config.cmp_mc_rel_err_max {
            judged += 1;
            if z.abs() > max_z {
                max_z = z.abs();
                max_z_r = e.r_mid;
            }
        }
    }
    write_file(&config.out_dir.join("compare_shells.csv"), &shells_csv)?;

    let integral_ok = max_dev < config.cmp_max_rel_dev;
    let balance_ok = (balance - 1.0).abs() < config.cmp_balance_tol;
    let mc_ok = judged > 0 && max_z <= config.cmp_mc_sigma;
    let passed = integral_ok && balance_ok && mc_ok;

    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "integral vs oracle: max relative deviation {max_dev:.4e} at r = {max_dev_r:.4} on [{}, {}] (tolerance {}) {}",
        config.cmp_r_lo,
        config.cmp_r_hi,
        config.cmp_max_rel_dev,
        verdict(integral_ok)
    );
    let _ = writeln!(
        summary,
        "balance: (1-c) int f dV / strength = {balance:.6} (tolerance 1 +- {}) {}",
        config.cmp_balance_tol,
        verdict(balance_ok)
    );
    let _ = writeln!(
        summary,
        "mc vs oracle: max |z| = {max_z:.3} at r = {max_z_r:.4} over {judged} shells in [{}, {}] with rel err < {} (tolerance {}) {}",
        config.cmp_mc_r_lo,
        config.cmp_mc_r_hi,
        config.cmp_mc_rel_err_max,
        config.cmp_mc_sigma,
        verdict(mc_ok)
    );
    let _ = writeln!(
        summary,
        "iterations: {}  histories: {}  overall: {}",
        report.iterations,
        tally.histories(),
        verdict(passed)
    );
    write_file(&config.out_dir.join("summary.txt"), &summary)?;
    print!("{summary}");

    Ok(CompareOutcome { passed, summary })
}
