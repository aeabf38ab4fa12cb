//! Command-line driver: loads a run configuration, dispatches to the cell
//! solver, the box solver, the Monte Carlo experiments, or the
//! transcendental oracle, and writes results into per-run directories.
//!
//! Exit codes: 0 success, 2 invalid configuration or arguments, 3 solver
//! or runtime failure, 64 command-line usage error.

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use deltastrip::assembly::{
    apply_boundary_conditions, assemble_bulk, assemble_surface, build_grid, BcSpec,
    DiscreteOperator,
};
use deltastrip::boxop::{assemble_box, lowest_pairs, BoxSpec};
use deltastrip::cell::{robin_trace, solve_cell, support_span, sweep};
use deltastrip::config::{parse_config, RunConfig};
use deltastrip::error::{Error, Result};
use deltastrip::experiments::ct::ct_experiment;
use deltastrip::experiments::ilse::ilse_experiment;
use deltastrip::experiments::min_spectrum::min_spectrum_experiment;
use deltastrip::experiments::sigma_band::sigma_band_experiment;
use deltastrip::experiments::wegner::wegner_experiment;
use deltastrip::experiments::ExperimentReport;
use deltastrip::model::{epsilon_star, lambda1, transverse_mode};
use deltastrip::oracle::separable_line_lambda;
use deltastrip::output::{
    read_report, run_dir, write_cell_sweep, write_eigenpairs, write_matrix, write_plot,
    write_report,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "deltastrip",
    version,
    about = "Spectral experiments for a randomly coupled delta interaction on a planar strip"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Plain-text configuration file (defaults apply when omitted)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured random seed
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides the configured output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also render plot.svg into the run directory
    #[arg(long, global = true)]
    plot: bool,
    /// Also dump the assembled matrices as `row col value` triples
    #[arg(long, global = true)]
    dump_matrices: bool,
    /// Worker threads for the Monte Carlo loops (default: all cores)
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the periodic cell problem and sweep the coupling support
    Cell,
    /// Assemble and diagonalize one finite box
    Box {
        /// File with one coupling weight per line (default: sampled from
        /// the configured disorder, stream 0)
        #[arg(long, value_name = "PATH")]
        omega_file: Option<PathBuf>,
        /// Number of eigenpairs to report
        #[arg(long, default_value_t = 6)]
        pairs: usize,
    },
    /// Bracket the spectral minimum by random trials plus extremal configurations
    MinSpectrum {
        /// Re-run the configuration embedded in an earlier report.json
        #[arg(long, value_name = "PATH")]
        from_report: Option<PathBuf>,
    },
    /// Initial-length-scale event probabilities across box sizes
    Ilse {
        #[arg(long, value_name = "PATH")]
        from_report: Option<PathBuf>,
    },
    /// Eigenvalue-counting probabilities near a fixed energy
    Wegner {
        #[arg(long, value_name = "PATH")]
        from_report: Option<PathBuf>,
    },
    /// Combes-Thomas resolvent decay rates
    Ct {
        #[arg(long, value_name = "PATH")]
        from_report: Option<PathBuf>,
    },
    /// Population of the band directly above the spectral minimum
    SigmaBand {
        #[arg(long, value_name = "PATH")]
        from_report: Option<PathBuf>,
    },
    /// Closed-form separable-line eigenvalue sweep (bisection oracle)
    Oracle,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 64,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: could not configure {k} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidGeometry(_)
        | Error::InvalidDensity(_)
        | Error::MainAssumptionViolated { .. }
        | Error::ValueOutOfSupport { .. }
        | Error::InvalidArgument(_)
        | Error::GridTooCoarse { .. }
        | Error::CouplingOutOfRange { .. }
        | Error::MissingRobinData { .. }
        | Error::WindowTooHigh { .. }
        | Error::WindowEmpty { .. }
        | Error::ConfigParse { .. }
        | Error::ConfigInvalid { .. } => 2,
        Error::QuadratureNotConverged { .. }
        | Error::NoConvergence { .. }
        | Error::SingularMass
        | Error::ProblemTooLarge { .. }
        | Error::ShiftTooCloseToSpectrum { .. }
        | Error::SingularPivot { .. }
        | Error::GroundStateSignChange { .. }
        | Error::GroundStateVanishesOnBoundary { .. }
        | Error::InsufficientEvents { .. }
        | Error::Io(_)
        | Error::Json(_) => 3,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, cli);
    Ok(cfg)
}

fn apply_overrides(cfg: &mut RunConfig, cli: &Cli) {
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.display().to_string();
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Cell => run_cell(cli),
        Command::Box { omega_file, pairs } => run_box(cli, omega_file.as_deref(), *pairs),
        Command::MinSpectrum { from_report } => {
            run_experiment(cli, from_report.as_deref(), min_spectrum_experiment)
        }
        Command::Ilse { from_report } => run_experiment(cli, from_report.as_deref(), ilse_experiment),
        Command::Wegner { from_report } => {
            run_experiment(cli, from_report.as_deref(), wegner_experiment)
        }
        Command::Ct { from_report } => run_experiment(cli, from_report.as_deref(), ct_experiment),
        Command::SigmaBand { from_report } => {
            run_experiment(cli, from_report.as_deref(), sigma_band_experiment)
        }
        Command::Oracle => run_oracle(cli),
    }
}

fn run_experiment(
    cli: &Cli,
    from_report: Option<&Path>,
    experiment: fn(&RunConfig) -> Result<ExperimentReport>,
) -> Result<()> {
    let cfg = match from_report {
        Some(path) => {
            let mut cfg = read_report(path)?.config;
            apply_overrides(&mut cfg, cli);
            cfg
        }
        None => load_config(cli)?,
    };
    let report = experiment(&cfg)?;
    let dir = run_dir(Path::new(&cfg.output.dir), &report.name)?;
    write_report(&dir, &report)?;
    if cli.plot {
        write_plot(&dir, &report)?;
    }
    if cli.dump_matrices {
        dump_extremal_cell(&dir, &cfg)?;
    }
    println!("run directory: {}", dir.display());
    for s in &report.scalars {
        println!("  {} = {:.16e}", s.label, s.value);
    }
    for p in &report.probabilities {
        println!(
            "  P[{} | N={}, parameter={}] = {:.4} (95% Wilson [{:.4}, {:.4}], {}/{} trials)",
            p.label, p.n_cells, p.parameter, p.p.estimate, p.p.lower, p.p.upper, p.p.successes,
            p.p.trials
        );
    }
    for f in &report.fits {
        println!(
            "  fit[{}]: slope = {:.6}, intercept = {:.6}, R² = {:.4}",
            f.label, f.fit.slope, f.fit.intercept, f.fit.r_squared
        );
    }
    let mut all_ok = true;
    for c in &report.checks {
        println!("  check [{}] {}", if c.passed { "ok" } else { "FAILED" }, c.label);
        all_ok &= c.passed;
    }
    if !all_ok {
        println!("  note: failed checks are recorded in report.json; the run itself succeeded");
    }
    Ok(())
}

/// Resolves the model objects shared by the cell and box subcommands.
struct Model {
    geom: deltastrip::model::LayerGeometry,
    manifold: deltastrip::model::Manifold,
    coupling: deltastrip::model::CouplingFunction,
    eps_star: f64,
    lambda0_continuum: f64,
    lambda1: f64,
}

fn resolve_model(cfg: &RunConfig) -> Result<Model> {
    cfg.validate()?;
    let geom = cfg.geometry_obj()?;
    let manifold = cfg.manifold_obj()?;
    let coupling = cfg.coupling_obj()?;
    let disorder = cfg.disorder_obj()?;
    let mode = transverse_mode(&geom);
    let lam1 = lambda1(&geom, &manifold, &coupling, &mode, cfg.numerics.quadrature_order)?;
    let eps_star = epsilon_star(lam1, cfg.experiment.eps, disorder.a())?;
    Ok(Model {
        geom,
        manifold,
        coupling,
        eps_star,
        lambda0_continuum: mode.lambda0,
        lambda1: lam1,
    })
}

fn run_cell(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    let model = resolve_model(&cfg)?;
    let m = cfg.numerics.nodes_per_cell;
    let grid = build_grid(&model.geom, 1, m)?;
    let star = solve_cell(&model.geom, &model.manifold, &model.coupling, model.eps_star, &grid)?;
    let zero = solve_cell(&model.geom, &model.manifold, &model.coupling, 0.0, &grid)?;

    let etas = support_span(cfg.experiment.eps, cfg.disorder.a, cfg.experiment.eta_points);
    let solutions = sweep(&model.geom, &model.manifold, &model.coupling, &grid, &etas)?;

    let dir = run_dir(Path::new(&cfg.output.dir), "cell")?;
    write_cell_sweep(&dir.join("sweep.csv"), &solutions)?;
    if cli.dump_matrices {
        dump_cell_pencil(&dir, &model, &grid, model.eps_star)?;
    }
    println!("run directory: {}", dir.display());
    println!("  lambda_0 (continuum transverse) = {:.16e}", model.lambda0_continuum);
    println!("  lambda_0 (grid, eta = 0)        = {:.16e}", zero.lambda_eta);
    println!("  lambda_1 (first-order slope)    = {:.16e}", model.lambda1);
    println!("  eps_star (minimizing coupling)  = {:.16e}", model.eps_star);
    println!("  lambda_star (grid)              = {:.16e}", star.lambda_eta);
    println!("  residual at eps_star            = {:.3e}", star.residual);
    println!("  sweep: {} couplings in sweep.csv", solutions.len());
    Ok(())
}

fn run_box(cli: &Cli, omega_file: Option<&Path>, pairs: usize) -> Result<()> {
    let cfg = load_config(cli)?;
    let model = resolve_model(&cfg)?;
    let disorder = cfg.disorder_obj()?;
    let n = *cfg.experiment.n_list.first().expect("validated non-empty");
    let m = cfg.numerics.nodes_per_cell;

    let omega = match omega_file {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let values = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|l| {
                    l.parse::<f64>().map_err(|e| {
                        Error::InvalidArgument(format!("bad coupling weight {l:?}: {e}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "coupling file has {} weights, the box needs {n}",
                    values.len()
                )));
            }
            values
        }
        None => disorder.sample(n, 0),
    };

    let cell_grid = build_grid(&model.geom, 1, m)?;
    let star = solve_cell(&model.geom, &model.manifold, &model.coupling, model.eps_star, &cell_grid)?;
    let trace = robin_trace(&star)?;
    let grid = build_grid(&model.geom, n, m)?;
    let spec = BoxSpec::new(grid, cfg.experiment.eps, omega, trace, disorder.a())?;
    let op = assemble_box(&spec, &model.geom, &model.manifold, &model.coupling)?;
    let result = lowest_pairs(&op, pairs.clamp(1, op.n_dofs()))?;

    let dir = run_dir(Path::new(&cfg.output.dir), "box")?;
    write_eigenpairs(&dir.join("eigenpairs.csv"), &result)?;
    if cli.dump_matrices {
        write_matrix(&dir.join("stiffness.txt"), &op.stiffness)?;
        write_matrix(&dir.join("mass.txt"), &op.mass)?;
        write_matrix(&dir.join("surface.txt"), &op.surface)?;
    }
    println!("run directory: {}", dir.display());
    println!("  box: {n} cells, {} unknowns", op.n_dofs());
    println!("  lambda_star (cell reference) = {:.16e}", star.lambda_eta);
    for (i, (lam, res)) in result.eigenvalues.iter().zip(&result.residuals).enumerate() {
        println!("  lambda_{} = {:.16e} (residual {:.3e})", i + 1, lam, res);
    }
    Ok(())
}

fn run_oracle(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    cfg.validate()?;
    let geom = cfg.geometry_obj()?;
    let h0 = cfg.manifold.height;
    let dir = run_dir(Path::new(&cfg.output.dir), "oracle")?;
    let mut csv = String::from("sigma,lambda\n");
    println!("run directory: {}", dir.display());
    println!("  separable line at height {h0} in a strip of width {}", geom.d);
    for &sigma in &cfg.experiment.sigma_list {
        let lam = separable_line_lambda(geom.d, h0, sigma)?;
        csv.push_str(&format!("{sigma:.16e},{lam:.16e}\n"));
        println!("  sigma = {sigma:<8} lambda = {lam:.16e}");
    }
    std::fs::write(dir.join("modes.csv"), csv)?;
    Ok(())
}

/// Dumps the periodic-cell pencil at the extremal coupling.
fn dump_cell_pencil(
    dir: &Path,
    model: &Model,
    grid: &deltastrip::assembly::Grid,
    eta: f64,
) -> Result<()> {
    let (k, m) = assemble_bulk(grid);
    let s = assemble_surface(grid, &model.manifold, &model.coupling, &[(0, eta)])?;
    let raw = DiscreteOperator::unconstrained(k, m, s)?;
    let op = apply_boundary_conditions(&raw, grid, &BcSpec::periodic_cell(&model.geom))?;
    write_matrix(&dir.join("stiffness.txt"), &op.stiffness)?;
    write_matrix(&dir.join("mass.txt"), &op.mass)?;
    write_matrix(&dir.join("surface.txt"), &op.surface)?;
    Ok(())
}

fn dump_extremal_cell(dir: &Path, cfg: &RunConfig) -> Result<()> {
    let model = resolve_model(cfg)?;
    let grid = build_grid(&model.geom, 1, cfg.numerics.nodes_per_cell)?;
    dump_cell_pencil(dir, &model, &grid, model.eps_star)
}
