//! Refinement studies with manufactured solutions.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{assemble_load, DofSystem, MaterialField};
use crate::factors::{
    check_theorems, cst_cube_oracle, gamma_app_estimate, gamma_div_estimate, resonance_guard,
    FactorError, FactorReport, LevelContext, ResonanceCheck,
};
use crate::mesh::{build_box_mesh, BoxDomain, Vec3};
use crate::operators::{
    energy_error, BestApproximation, DiscreteField, OperatorError, VectorField,
};
use crate::solvers::{DirectSolver, SolverError};
use crate::sparse::norm;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ω² = {omega_sq} is within {relative_distance:.3e} (relative) of the discrete eigenvalue {nearest}")]
    Resonance {
        omega_sq: f64,
        nearest: f64,
        relative_distance: f64,
    },
    #[error("solver failure: {0}")]
    Solver(String),
}

impl From<FactorError> for StudyError {
    fn from(e: FactorError) -> Self {
        match e {
            FactorError::Resonance { omega_sq, lambda } => StudyError::Resonance {
                omega_sq,
                nearest: lambda,
                relative_distance: (lambda - omega_sq).abs() / omega_sq,
            },
            other => StudyError::Solver(other.to_string()),
        }
    }
}

impl From<OperatorError> for StudyError {
    fn from(e: OperatorError) -> Self {
        StudyError::Solver(e.to_string())
    }
}

impl From<SolverError> for StudyError {
    fn from(e: SolverError) -> Self {
        StudyError::Solver(e.to_string())
    }
}

impl From<crate::assembly::AssemblyError> for StudyError {
    fn from(e: crate::assembly::AssemblyError) -> Self {
        StudyError::Config(e.to_string())
    }
}

impl From<crate::mesh::MeshError> for StudyError {
    fn from(e: crate::mesh::MeshError) -> Self {
        StudyError::Config(e.to_string())
    }
}

/// Registered manufactured solutions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionId {
    /// `E = (sin πy sin πz, 0, 0)`, a cavity eigenfunction.
    Ms1,
    /// `E = (y(1−y) z(1−z), 0, 0)`.
    Ms2,
    /// `E = 0` with `J = 0`.
    Zero,
}

/// Exact field `E` on the unit cube with the source
/// `J = curl(ν curl E) − ω² ε E` for scalar `ε`, `μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub id: SolutionId,
    pub omega: f64,
    pub eps: f64,
    pub mu: f64,
}

impl ManufacturedSolution {
    pub fn new(id: SolutionId, omega: f64, eps: f64, mu: f64) -> Self {
        Self { id, omega, eps, mu }
    }

    /// `curl curl E`.
    fn curl_curl(&self, x: &Vec3) -> Vec3 {
        match self.id {
            SolutionId::Ms1 => self.value(x) * (2.0 * PI * PI),
            SolutionId::Ms2 => {
                let (y, z) = (x.y, x.z);
                Vec3::new(2.0 * z * (1.0 - z) + 2.0 * y * (1.0 - y), 0.0, 0.0)
            }
            SolutionId::Zero => Vec3::zeros(),
        }
    }

    pub fn source(&self, x: &Vec3) -> Vec3 {
        self.curl_curl(x) / self.mu - self.value(x) * (self.omega * self.omega * self.eps)
    }

    /// `max |E × n|` over `samples` random points on the faces of the unit
    /// cube.
    pub fn boundary_trace_defect(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|i| {
                let face = i % 6;
                let (axis, side) = (face / 2, (face % 2) as f64);
                let mut x = Vec3::new(rng.random(), rng.random(), rng.random());
                x[axis] = side;
                let mut n = Vec3::zeros();
                n[axis] = if side == 0.0 { -1.0 } else { 1.0 };
                self.value(&x).cross(&n).norm()
            })
            .fold(0.0, f64::max)
    }
}

impl VectorField for ManufacturedSolution {
    fn value(&self, x: &Vec3) -> Vec3 {
        match self.id {
            SolutionId::Ms1 => Vec3::new((PI * x.y).sin() * (PI * x.z).sin(), 0.0, 0.0),
            SolutionId::Ms2 => Vec3::new(x.y * (1.0 - x.y) * x.z * (1.0 - x.z), 0.0, 0.0),
            SolutionId::Zero => Vec3::zeros(),
        }
    }

    fn curl(&self, x: &Vec3) -> Vec3 {
        // E = (f(y, z), 0, 0) ⇒ curl E = (0, ∂f/∂z, −∂f/∂y)
        let (fy, fz) = match self.id {
            SolutionId::Ms1 => (
                PI * (PI * x.y).cos() * (PI * x.z).sin(),
                PI * (PI * x.y).sin() * (PI * x.z).cos(),
            ),
            SolutionId::Ms2 => {
                let (y, z) = (x.y, x.z);
                (
                    (1.0 - 2.0 * y) * z * (1.0 - z),
                    y * (1.0 - y) * (1.0 - 2.0 * z),
                )
            }
            SolutionId::Zero => (0.0, 0.0),
        };
        Vec3::new(0.0, fz, -fy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }
}

/// Isotropic material, optionally with a second material for `x > interface`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub eps: f64,
    pub mu: f64,
    pub eps2: Option<f64>,
    pub mu2: Option<f64>,
    pub interface: Option<f64>,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self {
            eps: 1.0,
            mu: 1.0,
            eps2: None,
            mu2: None,
            interface: None,
        }
    }
}

impl MaterialConfig {
    pub fn is_uniform(&self) -> bool {
        self.interface.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    pub load: usize,
    pub error: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { load: 4, error: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// Relative slack of the theorem checks.
    pub theorem_slack: f64,
    /// Relative distance of `ω²` to a discrete eigenvalue that triggers a
    /// warning.
    pub resonance_warn: f64,
    /// Relative distance that aborts a level.
    pub resonance_fail: f64,
    /// Bound on the final quasi-optimality ratio.
    pub qo_bound: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            theorem_slack: 0.05,
            resonance_warn: 0.05,
            resonance_fail: 0.01,
            qo_bound: 1.1,
        }
    }
}

/// Source of the stability constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CstMode {
    /// Cube oracle when applicable, discrete value otherwise.
    Auto,
    Oracle,
    Discrete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorConfig {
    pub gamma_app: bool,
    pub gamma_div: bool,
    pub beta: bool,
    pub c_st: CstMode,
    /// Largest `|k|²` of the cube oracle.
    pub oracle_cutoff: usize,
}

impl Default for FactorConfig {
    fn default() -> Self {
        Self {
            gamma_app: true,
            gamma_div: true,
            beta: true,
            c_st: CstMode::Auto,
            oracle_cutoff: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    pub csv: String,
    pub json: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: "out".into(),
            csv: "study.csv".into(),
            json: "study.json".into(),
        }
    }
}

/// Complete description of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub domain: DomainConfig,
    /// Cells per axis of each level, strictly increasing.
    pub levels: Vec<usize>,
    pub omega: f64,
    #[serde(default)]
    pub material: MaterialConfig,
    pub solution: SolutionId,
    /// Uniform refinements of the surrogate fine level.
    #[serde(default = "default_r")]
    pub surrogate_levels: usize,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
    #[serde(default)]
    pub factors: FactorConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_r() -> usize {
    2
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            domain: DomainConfig::default(),
            levels: vec![2, 4, 8],
            omega: 1.0,
            material: MaterialConfig::default(),
            solution: SolutionId::Ms1,
            surrogate_levels: 2,
            quadrature: QuadratureConfig::default(),
            tolerances: ToleranceConfig::default(),
            factors: FactorConfig::default(),
            seed: 0,
            output: OutputConfig::default(),
        }
    }
}

fn set_path(root: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), StudyError> {
    let mut keys = path.split('.').peekable();
    let mut table = root;
    while let Some(key) = keys.next() {
        if key.is_empty() {
            return Err(StudyError::Config(format!("malformed key `{path}`")));
        }
        if keys.peek().is_none() {
            table.insert(key.to_string(), value);
            return Ok(());
        }
        let entry = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| StudyError::Config(format!("`{key}` in `{path}` is not a table")))?;
    }
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl StudyConfig {
    /// Parses a TOML document, applies `KEY=VALUE` overrides (dotted keys
    /// address nested tables) and validates the result.
    pub fn from_toml_with_overrides(text: &str, overrides: &[String]) -> Result<Self, StudyError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| StudyError::Config(e.to_string()))?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| StudyError::Config(format!("override `{o}` is not KEY=VALUE")))?;
            set_path(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let cfg: StudyConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| StudyError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let bad = |m: &str| Err(StudyError::Config(m.to_string()));
        if self.schema_version != SCHEMA_VERSION {
            return bad(&format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.levels.is_empty() {
            return bad("levels must not be empty");
        }
        if self.levels.contains(&0) || self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return bad("levels must be positive and strictly increasing");
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return bad("omega must be positive");
        }
        if self.surrogate_levels < 1 {
            return bad("surrogate_levels must be at least 1");
        }
        let m = &self.material;
        let layered = [m.eps2.is_some(), m.mu2.is_some(), m.interface.is_some()];
        if layered.iter().any(|&b| b) && !layered.iter().all(|&b| b) {
            return bad("eps2, mu2 and interface must be given together");
        }
        if [Some(m.eps), Some(m.mu), m.eps2, m.mu2]
            .iter()
            .flatten()
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return bad("material parameters must be positive");
        }
        for o in [self.quadrature.load, self.quadrature.error] {
            if !(1..=6).contains(&o) {
                return bad("quadrature orders must lie in 1..=6");
            }
        }
        let t = &self.tolerances;
        if !(t.theorem_slack >= 0.0
            && t.resonance_fail >= 0.0
            && t.resonance_warn >= t.resonance_fail)
        {
            return bad("tolerances must be nonnegative with resonance_warn ≥ resonance_fail");
        }
        BoxDomain::new(self.domain.min, self.domain.max)?;
        Ok(())
    }

    /// The manufactured solutions are only registered on the unit cube
    /// with a uniform material; factor-only runs do not need them.
    pub fn validate_solution(&self) -> Result<(), StudyError> {
        if self.solution != SolutionId::Zero && !(self.material.is_uniform() && self.is_unit_cube())
        {
            return Err(StudyError::Config(
                "manufactured solutions require the unit cube and a uniform material".into(),
            ));
        }
        Ok(())
    }

    pub fn is_unit_cube(&self) -> bool {
        self.domain.min == [0.0; 3] && self.domain.max == [1.0; 3]
    }

    pub fn box_domain(&self) -> Result<BoxDomain, StudyError> {
        Ok(BoxDomain::new(self.domain.min, self.domain.max)?)
    }

    pub fn solution(&self) -> ManufacturedSolution {
        ManufacturedSolution::new(
            self.solution,
            self.omega,
            self.material.eps,
            self.material.mu,
        )
    }

    /// Material on a mesh; layered materials are sampled at centroids.
    pub fn material_on(&self, mesh: &crate::mesh::TetMesh) -> Result<MaterialField, StudyError> {
        let m = &self.material;
        let field = match m.interface {
            None => MaterialField::uniform(mesh, m.eps, m.mu, self.omega)?,
            Some(xi) => {
                let (e2, u2) = (m.eps2.unwrap_or(m.eps), m.mu2.unwrap_or(m.mu));
                MaterialField::from_fn(mesh, self.omega, |x| {
                    let (e, u) = if x.x > xi { (e2, u2) } else { (m.eps, m.mu) };
                    (
                        nalgebra::Matrix3::identity() * e,
                        nalgebra::Matrix3::identity() / u,
                    )
                })?
            }
        };
        Ok(field)
    }

    /// Whether the cube oracle applies to this configuration.
    pub fn oracle_applies(&self) -> bool {
        self.is_unit_cube()
            && self.material.is_uniform()
            && self.material.eps == 1.0
            && self.material.mu == 1.0
    }
}

/// Discrete solution of one level.
#[derive(Debug, Clone)]
pub struct LevelSolution {
    pub n: usize,
    pub field: DiscreteField,
    /// `‖B x − L‖ / ‖L‖` (zero for a zero load).
    pub residual: f64,
    /// `‖Gᵀ(B x − L)‖`.
    pub galerkin_defect: f64,
    pub resonance: Option<ResonanceCheck>,
}

fn check_resonance(
    ctx: &LevelContext,
    cfg: &StudyConfig,
    seed: u64,
) -> Result<Option<ResonanceCheck>, StudyError> {
    let check = resonance_guard(ctx, seed)?;
    if check.relative_distance <= cfg.tolerances.resonance_fail {
        return Err(StudyError::Resonance {
            omega_sq: check.omega_sq,
            nearest: check.nearest,
            relative_distance: check.relative_distance,
        });
    }
    if check.relative_distance <= cfg.tolerances.resonance_warn {
        warn!(
            "ω² = {} is within {:.2}% of the discrete eigenvalue {}",
            check.omega_sq,
            100.0 * check.relative_distance,
            check.nearest
        );
    }
    Ok(Some(check))
}

/// Solves the discrete problem on the level with `n` cells per axis.
pub fn solve_level(
    cfg: &StudyConfig,
    ctx: &LevelContext,
    n: usize,
    seed: u64,
) -> Result<LevelSolution, StudyError> {
    cfg.validate_solution()?;
    let resonance = check_resonance(ctx, cfg, seed)?;
    let sol = cfg.solution();
    let load = assemble_load(&ctx.dofs, &ctx.mat, |x| sol.source(x), cfg.quadrature.load)?;
    let b = &ctx.matrices.b;
    let x = DirectSolver::indefinite(b)?.solve(&load)?;
    let r: Vec<f64> = b.matvec(&x).iter().zip(&load).map(|(a, l)| a - l).collect();
    let lnorm = norm(&load);
    let residual = if lnorm > 0.0 {
        norm(&r) / lnorm
    } else {
        norm(&r)
    };
    let galerkin_defect = norm(&ctx.projector.g.matvec_transpose(&r));
    Ok(LevelSolution {
        n,
        field: DiscreteField::new(ctx.dofs.clone(), x)?,
        residual,
        galerkin_defect,
        resonance,
    })
}

/// Builds the level context for `n` cells per axis.
pub fn level_context(cfg: &StudyConfig, n: usize) -> Result<LevelContext, StudyError> {
    let mesh = Arc::new(build_box_mesh(n, cfg.box_domain()?)?);
    let mat = cfg.material_on(&mesh)?;
    Ok(LevelContext::new(Arc::new(DofSystem::nedelec(mesh)), &mat)?)
}

fn level_seed(cfg: &StudyConfig, level: usize) -> u64 {
    cfg.seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(level as u64)
}

/// Factor estimators of one level.
pub fn compute_factors(
    cfg: &StudyConfig,
    ctx: &LevelContext,
    level: usize,
    report: &mut FactorReport,
) -> Result<(), StudyError> {
    let seed = level_seed(cfg, level);
    let r = cfg.surrogate_levels;
    let f = &cfg.factors;
    if f.gamma_div {
        report.gamma_div = Some(gamma_div_estimate(ctx, r, seed)?.value);
    }
    if f.gamma_app {
        report.gamma_app = Some(gamma_app_estimate(ctx, r, seed)?.value);
    }
    if f.beta {
        report.beta_h = Some(ctx.beta_h(seed)?);
    }
    let use_oracle = match f.c_st {
        CstMode::Oracle => true,
        CstMode::Discrete => false,
        CstMode::Auto => cfg.oracle_applies(),
    };
    if use_oracle {
        report.c_st = Some(cst_cube_oracle(cfg.omega, f.oracle_cutoff)?);
        report.c_st_source = "oracle".into();
    } else {
        report.c_st = Some(ctx.cst_discrete(seed)?);
        report.c_st_source = "discrete".into();
    }
    Ok(())
}

/// Full pipeline of one level: solve, errors, factors, theorem checks.
pub fn run_level(cfg: &StudyConfig, level: usize) -> Result<FactorReport, StudyError> {
    let n = cfg.levels[level];
    let ctx = level_context(cfg, n)?;
    let seed = level_seed(cfg, level);
    let mesh = ctx.dofs.mesh();
    let mut report = FactorReport::new(
        level,
        n,
        mesh.h(),
        ctx.dofs.ndof(),
        cfg.omega,
        cfg.surrogate_levels,
    );
    info!("level {level}: n = {n}, {} DOFs", ctx.dofs.ndof());

    let solution = solve_level(cfg, &ctx, n, seed)?;
    if solution.residual > crate::solvers::SOLVE_TOL {
        return Err(StudyError::Solver(format!(
            "discrete residual {} above tolerance",
            solution.residual
        )));
    }
    let exact = cfg.solution();
    report.err_energy = Some(energy_error(
        &exact,
        &solution.field,
        &ctx.mat,
        cfg.quadrature.error,
    )?);
    let best = BestApproximation::new(ctx.dofs.clone(), &ctx.matrices)?.of_analytic(
        &ctx.mat,
        &exact,
        cfg.quadrature.error,
    )?;
    report.best_err = Some(energy_error(&exact, &best, &ctx.mat, cfg.quadrature.error)?);

    compute_factors(cfg, &ctx, level, &mut report)?;
    report.fill_composites();
    let ledger = check_theorems(&report, cfg.tolerances.theorem_slack);
    report.thm41 = ledger.thm41;
    report.thm42 = ledger.thm42;
    Ok(report)
}

/// Level that could not be completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFailure {
    pub level: usize,
    pub n: usize,
    pub error: String,
    pub resonance: bool,
}

/// Reports of all completed levels plus failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub reports: Vec<FactorReport>,
    pub failures: Vec<LevelFailure>,
}

/// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` for consecutive pairs.
pub fn observed_rate(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>, StudyError> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(StudyError::Config(
            "need at least two levels with matching h".into(),
        ));
    }
    if errors
        .iter()
        .chain(hs)
        .any(|&v| !(v > 0.0 && v.is_finite()))
    {
        return Err(StudyError::Config(
            "errors and mesh sizes must be positive".into(),
        ));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

/// Runs every level (concurrently when the current rayon pool has more
/// than one thread), merges the reports in level order and fills the
/// observed energy-error rates.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<StudyResult, StudyError> {
    use rayon::prelude::*;
    cfg.validate()?;
    cfg.validate_solution()?;
    let outcomes: Vec<Result<FactorReport, StudyError>> = (0..cfg.levels.len())
        .into_par_iter()
        .map(|l| run_level(cfg, l))
        .collect();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (level, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => reports.push(r),
            Err(e) => {
                warn!("level {level} failed: {e}");
                failures.push(LevelFailure {
                    level,
                    n: cfg.levels[level],
                    error: e.to_string(),
                    resonance: matches!(e, StudyError::Resonance { .. }),
                })
            }
        }
    }
    for i in 1..reports.len() {
        let (a, b) = (&reports[i - 1], &reports[i]);
        if let (Some(ea), Some(eb)) = (a.err_energy, b.err_energy) {
            if let Ok(r) = observed_rate(&[ea, eb], &[a.h, b.h]) {
                reports[i].rate_energy = Some(r[0]);
            }
        }
    }
    Ok(StudyResult {
        config: cfg.clone(),
        reports,
        failures,
    })
}

pub const CSV_HEADER: &str = "level,n,h,ndof,omega,err_energy,best_err,qo_ratio,gamma_app,gamma_div,beta_h,c_st,thm41_pass,thm42_pass,rate_energy";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// One CSV row per report, shortest round-trip float formatting.
pub fn reports_to_csv(reports: &[FactorReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.level,
            r.n,
            r.h,
            r.ndof,
            r.omega,
            opt(r.err_energy),
            opt(r.best_err),
            opt(r.qo_ratio),
            opt(r.gamma_app),
            opt(r.gamma_div),
            opt(r.beta_h),
            opt(r.c_st),
            r.thm41.as_str(),
            r.thm42.as_str(),
            opt(r.rate_energy)
        );
    }
    out
}

/// JSON document with the configuration echo, reports, failures and the
/// fixed numerical settings.
pub fn result_to_json(result: &StudyResult) -> String {
    let doc = serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "config": result.config,
        "reports": result.reports,
        "failures": result.failures,
        "settings": {
            "dense_limit": crate::solvers::DENSE_LIMIT,
            "solve_tolerance": crate::solvers::SOLVE_TOL,
            "c_st_oracle_cutoff": result.config.factors.oracle_cutoff,
        },
    });
    serde_json::to_string_pretty(&doc).expect("report serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_of_halving_sequences() {
        let r = observed_rate(&[1.0, 0.5, 0.25], &[1.0, 0.5, 0.25]).unwrap();
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let r = observed_rate(&[1.0, 0.25], &[1.0, 0.5]).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-15);
        assert!(observed_rate(&[1.0, 0.0], &[1.0, 0.5]).is_err());
        assert!(observed_rate(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn overrides_are_type_checked() {
        let base = "schema_version = 1\nlevels = [2, 4]\nomega = 1.0\nsolution = \"ms1\"\n";
        let cfg = StudyConfig::from_toml_with_overrides(
            base,
            &["levels=[4]".into(), "material.eps=1.0".into()],
        )
        .unwrap();
        assert_eq!(cfg.levels, vec![4]);
        assert!(StudyConfig::from_toml_with_overrides(base, &["omega=\"fast\"".into()]).is_err());
        assert!(StudyConfig::from_toml_with_overrides(base, &["bogus=1".into()]).is_err());
        assert!(StudyConfig::from_toml_with_overrides(base, &["levels=[]".into()]).is_err());
        assert!(StudyConfig::from_toml_with_overrides(base, &["levels=[4, 2]".into()]).is_err());
        let echo = StudyConfig::from_toml_with_overrides(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(echo, cfg);
    }

    #[test]
    fn manufactured_traces_vanish() {
        for id in [SolutionId::Ms1, SolutionId::Ms2] {
            let s = ManufacturedSolution::new(id, 1.0, 1.0, 1.0);
            assert!(s.boundary_trace_defect(200, 3) <= 1e-12);
        }
    }
}
