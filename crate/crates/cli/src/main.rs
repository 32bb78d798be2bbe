//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration,
//! 3 resonance, 4 solver failure.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edgefem::factors::{check_theorems, FactorReport};
use edgefem::mesh::build_box_mesh;
use edgefem::operators::energy_error;
use edgefem::studies::{
    compute_factors, level_context, reports_to_csv, result_to_json, run_convergence_study,
    solve_level, StudyConfig, StudyError,
};
use edgefem::vtk;

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RESONANCE: u8 = 3;
const EXIT_SOLVER: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "edgefem",
    version,
    about = "Edge finite elements for time-harmonic Maxwell cavities"
)]
#[command(
    after_help = "Exit codes: 0 success, 1 I/O failure, 2 invalid configuration, 3 resonance, 4 solver failure"
)]
struct Cli {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set levels=[4]` or
    /// `--set material.eps=2.0`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for level-parallel studies.
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    threads: usize,
    /// Estimator seed (overrides `seed`).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the discrete problem on every level; write coefficients, VTK
    /// and a residual report.
    Solve,
    /// Full refinement study with errors, factors and theorem checks.
    Study,
    /// Factor estimators only.
    Factors,
    /// Write the meshes of all levels as VTK.
    ExportVtk,
}

enum Failure {
    Io(String),
    Study(StudyError),
    /// Already reported.
    Exit(u8),
}

impl From<StudyError> for Failure {
    fn from(e: StudyError) -> Self {
        Failure::Study(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn exit_code(e: &StudyError) -> u8 {
    match e {
        StudyError::Config(_) => EXIT_CONFIG,
        StudyError::Resonance { .. } => EXIT_RESONANCE,
        StudyError::Solver(_) => EXIT_SOLVER,
    }
}

fn load_config(cli: &Cli) -> Result<StudyConfig, StudyError> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p)
            .map_err(|e| StudyError::Config(format!("{}: {e}", p.display())))?,
        None => StudyConfig::default().to_toml(),
    };
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(o) = &cli.out {
        overrides.push(format!("output.dir={}", toml_string(&o.to_string_lossy())));
    }
    StudyConfig::from_toml_with_overrides(&text, &overrides)
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn out_dir(cfg: &StudyConfig) -> Result<PathBuf, Failure> {
    let dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn cmd_solve(cfg: &StudyConfig) -> Result<(), Failure> {
    let dir = out_dir(cfg)?;
    let exact = cfg.solution();
    let mut csv = String::from(
        "level,n,h,ndof,omega,residual,galerkin_defect,err_energy,nearest_eigenvalue\n",
    );
    for (level, &n) in cfg.levels.iter().enumerate() {
        let ctx = level_context(cfg, n)?;
        let sol = solve_level(cfg, &ctx, n, cfg.seed.wrapping_add(level as u64))?;
        let err = energy_error(&exact, &sol.field, &ctx.mat, cfg.quadrature.error)
            .map_err(StudyError::from)?;
        let nearest = sol
            .resonance
            .map(|r| r.nearest.to_string())
            .unwrap_or_default();
        csv.push_str(&format!(
            "{level},{n},{},{},{},{},{},{err},{nearest}\n",
            ctx.dofs.mesh().h(),
            ctx.dofs.ndof(),
            cfg.omega,
            sol.residual,
            sol.galerkin_defect
        ));
        let coeffs: String = sol
            .field
            .coeffs()
            .iter()
            .map(|c| format!("{c}\n"))
            .collect();
        write(&dir.join(format!("solution_n{n}.txt")), &coeffs)?;
        let mut f = BufWriter::new(fs::File::create(dir.join(format!("solution_n{n}.vtk")))?);
        vtk::write_field(&sol.field, "E_h", &mut f)?;
        println!(
            "n = {n}: {} DOFs, residual {:e}, energy error {err}",
            ctx.dofs.ndof(),
            sol.residual
        );
    }
    write(&dir.join("solve.csv"), &csv)?;
    Ok(())
}

fn cmd_study(cfg: &StudyConfig) -> Result<(), Failure> {
    let dir = out_dir(cfg)?;
    let result = run_convergence_study(cfg)?;
    let csv = reports_to_csv(&result.reports);
    write(&dir.join(&cfg.output.csv), &csv)?;
    write(&dir.join(&cfg.output.json), &result_to_json(&result))?;
    let _ = write!(std::io::stdout(), "{csv}");
    for f in &result.failures {
        eprintln!("level {} (n = {}) failed: {}", f.level, f.n, f.error);
    }
    match result.failures.first() {
        None => Ok(()),
        Some(f) if f.resonance => Err(Failure::Exit(EXIT_RESONANCE)),
        Some(_) => Err(Failure::Exit(EXIT_SOLVER)),
    }
}

fn cmd_factors(cfg: &StudyConfig) -> Result<(), Failure> {
    let dir = out_dir(cfg)?;
    let mut reports: Vec<FactorReport> = Vec::new();
    for (level, &n) in cfg.levels.iter().enumerate() {
        let ctx = level_context(cfg, n)?;
        let mut report = FactorReport::new(
            level,
            n,
            ctx.dofs.mesh().h(),
            ctx.dofs.ndof(),
            cfg.omega,
            cfg.surrogate_levels,
        );
        compute_factors(cfg, &ctx, level, &mut report)?;
        report.fill_composites();
        let ledger = check_theorems(&report, cfg.tolerances.theorem_slack);
        report.thm41 = ledger.thm41;
        report.thm42 = ledger.thm42;
        reports.push(report);
    }
    let doc = serde_json::json!({ "config": cfg, "reports": reports });
    let text = serde_json::to_string_pretty(&doc).expect("report serializes");
    write(&dir.join("factors.json"), &text)?;
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

fn cmd_export_vtk(cfg: &StudyConfig) -> Result<(), Failure> {
    let dir = out_dir(cfg)?;
    for &n in &cfg.levels {
        let mesh = build_box_mesh(n, cfg.box_domain()?).map_err(StudyError::from)?;
        let path = dir.join(format!("mesh_n{n}.vtk"));
        vtk::write_mesh(&mesh, &mut BufWriter::new(fs::File::create(&path)?))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build()
        .map_err(|e| Failure::Io(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Solve => cmd_solve(&cfg),
        Command::Study => cmd_study(&cfg),
        Command::Factors => cmd_factors(&cfg),
        Command::ExportVtk => cmd_export_vtk(&cfg),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Exit(code)) => ExitCode::from(code),
        Err(Failure::Study(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
