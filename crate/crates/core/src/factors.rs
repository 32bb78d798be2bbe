//! Estimators for the stability constant, the approximation and
//! divergence-conformity factors, the discrete inf-sup constant, and the
//! theorem inequalities built from them.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::{DofSystem, MaterialField, MaxwellMatrices};
use crate::operators::{prolongation, CurlFreeProjector, KernelSurrogate, OperatorError};
use crate::solvers::{
    dense_generalized_eig, infsup_constant, lanczos, DirectSolver, LanczosOptions, SolverError,
    Target, DENSE_LIMIT,
};
use crate::sparse::{dot, SparseSymmetricMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactorError {
    #[error("ω² = {omega_sq} coincides with the eigenvalue {lambda}")]
    Resonance { omega_sq: f64, lambda: f64 },
    #[error("spectral cutoff {0} does not bracket ω²")]
    CutoffTooSmall(usize),
    #[error("field is not discretely divergence free (‖GᵀMx‖ = {0:e})")]
    NotInComplement(f64),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<crate::assembly::AssemblyError> for FactorError {
    fn from(e: crate::assembly::AssemblyError) -> Self {
        FactorError::Operator(e.into())
    }
}

impl From<crate::mesh::MeshError> for FactorError {
    fn from(e: crate::mesh::MeshError) -> Self {
        FactorError::Operator(e.into())
    }
}

/// `ω √(ω² + λ) / |λ − ω²|`, the stability ratio of one eigenvalue.
pub fn stability_ratio(omega: f64, lambda: f64) -> f64 {
    let w2 = omega * omega;
    omega * (w2 + lambda).sqrt() / (lambda - w2).abs()
}

/// Stability constant of the unit cube with `ε = μ = 1` from the cavity
/// eigenvalues `π²|k|²` (at least two nonzero indices) with `|k|² ≤ cutoff`.
pub fn cst_cube_oracle(omega: f64, cutoff: usize) -> Result<f64, FactorError> {
    let w2 = omega * omega;
    if (cutoff as f64) * PI * PI <= w2 {
        return Err(FactorError::CutoffTooSmall(cutoff));
    }
    let kmax = (cutoff as f64).sqrt() as usize + 1;
    let mut best: f64 = 0.0;
    for a in 0..=kmax {
        for b in 0..=kmax {
            for c in 0..=kmax {
                let k2 = a * a + b * b + c * c;
                let nonzero = [a, b, c].iter().filter(|&&i| i > 0).count();
                if k2 > cutoff || nonzero < 2 {
                    continue;
                }
                let lambda = PI * PI * k2 as f64;
                if (lambda - w2).abs() <= 1e-12 * lambda {
                    return Err(FactorError::Resonance {
                        omega_sq: w2,
                        lambda,
                    });
                }
                best = best.max(stability_ratio(omega, lambda));
            }
        }
    }
    Ok(best)
}

/// Spectrum of `(Kc, M)` on the discretely divergence-free complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplementSpectrum {
    /// Ascending eigenvalues; the full complement spectrum on the dense
    /// path, Ritz values around the shift otherwise.
    pub eigenvalues: Vec<f64>,
    pub complete: bool,
    /// Dimension of the complement.
    pub dim: usize,
}

/// Context shared by the single-level estimators.
#[derive(Debug)]
pub struct LevelContext {
    pub dofs: Arc<DofSystem>,
    pub mat: MaterialField,
    pub matrices: MaxwellMatrices,
    pub projector: CurlFreeProjector,
}

impl LevelContext {
    pub fn new(dofs: Arc<DofSystem>, mat: &MaterialField) -> Result<Self, FactorError> {
        let matrices = MaxwellMatrices::assemble(&dofs, mat)?;
        let projector = CurlFreeProjector::new(&dofs, mat, matrices.mass.clone())?;
        Ok(Self {
            dofs,
            mat: mat.clone(),
            matrices,
            projector,
        })
    }

    pub fn omega(&self) -> f64 {
        self.mat.omega()
    }

    /// Dimension of the complement of the discrete gradients.
    pub fn complement_dim(&self) -> usize {
        self.dofs.ndof() - self.projector.n_potentials()
    }

    /// Complement spectrum: dense when the complement fits the dense limit,
    /// otherwise `count` Ritz values nearest to `shift`.
    pub fn complement_spectrum(
        &self,
        shift: f64,
        count: usize,
        seed: u64,
    ) -> Result<ComplementSpectrum, FactorError> {
        let dim = self.complement_dim();
        let nullity = self.projector.n_potentials();
        if dim <= DENSE_LIMIT {
            let (values, _) = dense_generalized_eig(
                &self.matrices.curlcurl.to_dense(),
                &self.matrices.mass.to_dense(),
            )?;
            let top = values.last().copied().unwrap_or(0.0).abs().max(1.0);
            let (kernel, rest) = values.split_at(nullity);
            debug_assert!(kernel.iter().all(|v| v.abs() <= 1e-8 * top));
            debug_assert!(rest.iter().all(|v| *v > 1e-8 * top));
            return Ok(ComplementSpectrum {
                eigenvalues: rest.to_vec(),
                complete: true,
                dim,
            });
        }
        let m = &self.matrices;
        let shifted = m.curlcurl.add(1.0, &m.mass, -shift);
        let solver = match DirectSolver::indefinite(&shifted) {
            Ok(s) => s,
            Err(SolverError::Singular { .. }) => {
                return Ok(ComplementSpectrum {
                    eigenvalues: vec![shift],
                    complete: false,
                    dim,
                })
            }
            Err(e) => return Err(e.into()),
        };
        let project = |v: &mut Vec<f64>| {
            *v = self.projector.complement(v).expect("projector solve");
        };
        let opts = LanczosOptions {
            seed,
            tol: 1e-10,
            ..Default::default()
        };
        let res = lanczos(
            self.dofs.ndof(),
            |x| solver.apply_inverse(&m.mass.matvec(x)),
            |x| m.mass.matvec(x),
            project,
            count.min(dim),
            Target::LargestMagnitude,
            &opts,
        )?;
        let mut eigenvalues: Vec<f64> = res.values.iter().map(|t| shift + 1.0 / t).collect();
        eigenvalues.sort_by(f64::total_cmp);
        Ok(ComplementSpectrum {
            eigenvalues,
            complete: false,
            dim,
        })
    }

    /// Discrete stability constant over the complement spectrum.
    pub fn cst_discrete(&self, seed: u64) -> Result<f64, FactorError> {
        let w = self.omega();
        let spec = self.complement_spectrum(w * w, 6, seed)?;
        let mut best: f64 = 0.0;
        for &l in &spec.eigenvalues {
            if (l - w * w).abs() <= 1e-12 * l.abs().max(w * w) {
                return Err(FactorError::Resonance {
                    omega_sq: w * w,
                    lambda: l,
                });
            }
            best = best.max(stability_ratio(w, l));
        }
        Ok(best)
    }

    /// Eigenvalue of the complement pencil nearest to `ω²`.
    pub fn nearest_resonance(&self, seed: u64) -> Result<f64, FactorError> {
        let w2 = self.omega().powi(2);
        let spec = self.complement_spectrum(w2, 2, seed)?;
        Ok(spec
            .eigenvalues
            .iter()
            .copied()
            .min_by(|a, b| (a - w2).abs().total_cmp(&(b - w2).abs()))
            .unwrap_or(f64::INFINITY))
    }

    pub fn beta_h(&self, seed: u64) -> Result<f64, FactorError> {
        Ok(infsup_constant(&self.matrices.b, &self.matrices.n, seed)?)
    }
}

/// Outcome of the resonance guard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceCheck {
    pub omega_sq: f64,
    pub nearest: f64,
    /// `|λ − ω²| / ω²`.
    pub relative_distance: f64,
}

/// Scans the complement spectrum near `ω²`.
pub fn resonance_guard(ctx: &LevelContext, seed: u64) -> Result<ResonanceCheck, FactorError> {
    let w2 = ctx.omega().powi(2);
    let nearest = ctx.nearest_resonance(seed)?;
    Ok(ResonanceCheck {
        omega_sq: w2,
        nearest,
        relative_distance: (nearest - w2).abs() / w2,
    })
}

/// Result of an extremal-eigenvalue factor estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub value: f64,
    /// Surrogate refinement level.
    pub levels: usize,
    pub iterations: usize,
    /// Largest `‖GᵀMζ‖ / ‖ζ‖_M` observed for intermediate fields that
    /// must be discretely divergence free.
    pub gradient_defect: f64,
}

const GAMMA_TOL: f64 = 1e-8;

/// Divergence-conformity factor `γ_div`: `ω √λ_max` of `Q x = λ Kc x` on the
/// complement, with `xᵀQx = ‖Π₀ v_x‖²_ε` from the fine-level surrogate.
pub struct DivergenceConformity<'a> {
    ctx: &'a LevelContext,
    surrogate: &'a KernelSurrogate,
    /// `Kc + MGGᵀM`, positive definite and equal to `Kc` on the complement.
    r_solver: DirectSolver,
}

impl<'a> DivergenceConformity<'a> {
    pub fn new(ctx: &'a LevelContext, surrogate: &'a KernelSurrogate) -> Result<Self, FactorError> {
        let p = &ctx.projector;
        let mg = ctx.matrices.mass.csr().matmul(&p.g);
        let r = ctx
            .matrices
            .curlcurl
            .csr()
            .add(1.0, &mg.matmul(&mg.transpose()), 1.0);
        let r = SparseSymmetricMatrix::try_from_csr(r, 1e-12)
            .map_err(|_| SolverError::Factorization("asymmetric regularized curl-curl".into()))?;
        let r_solver = DirectSolver::cholesky(&r)?;
        Ok(Self {
            ctx,
            surrogate,
            r_solver,
        })
    }

    fn q(&self, x: &[f64]) -> Result<Vec<f64>, FactorError> {
        let s = self.surrogate;
        let (p, _) = s.project_discrete(x)?;
        Ok(s.t.matvec_transpose(&s.fine_mass.matvec(&s.g.matvec(&p))))
    }

    /// `ω² ‖Π₀ v_x‖²_ε / ‖curl v_x‖²_ν` for `x` in the complement.
    pub fn quotient(&self, x: &[f64]) -> Result<f64, FactorError> {
        let defect = self.ctx.projector.gradient_defect(x);
        let scale = self.ctx.matrices.mass.quadratic_form(x).sqrt()
            * self.ctx.matrices.mass.max_abs().sqrt();
        if defect > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(FactorError::NotInComplement(defect));
        }
        let (_, pi) = self.surrogate.project_discrete(x)?;
        Ok(self.ctx.omega().powi(2) * pi * pi / self.ctx.matrices.curlcurl.quadratic_form(x))
    }

    pub fn estimate(&self, seed: u64) -> Result<GammaEstimate, FactorError> {
        let ctx = self.ctx;
        if ctx.complement_dim() == 0 {
            return Ok(GammaEstimate {
                value: 0.0,
                levels: self.surrogate.levels,
                iterations: 0,
                gradient_defect: 0.0,
            });
        }
        let opts = LanczosOptions {
            seed,
            tol: GAMMA_TOL,
            ..Default::default()
        };
        let op = |x: &[f64]| {
            let qx = self.q(x).expect("surrogate solve");
            let b = ctx
                .projector
                .complement_transpose(&qx)
                .expect("projector solve");
            self.r_solver.apply_inverse(&b)
        };
        let project = |v: &mut Vec<f64>| *v = ctx.projector.complement(v).expect("projector solve");
        let res = lanczos(
            ctx.dofs.ndof(),
            op,
            |x| ctx.matrices.curlcurl.matvec(x),
            project,
            1,
            Target::Largest,
            &opts,
        )?;
        let lambda = res.values.first().copied().unwrap_or(0.0).max(0.0);
        let defect = res.vectors.first().map_or(0.0, |v| {
            relative_defect(&ctx.projector, &ctx.matrices.mass, v)
        });
        Ok(GammaEstimate {
            value: ctx.omega() * lambda.sqrt(),
            levels: self.surrogate.levels,
            iterations: res.iterations,
            gradient_defect: defect,
        })
    }
}

fn relative_defect(p: &CurlFreeProjector, mass: &SparseSymmetricMatrix, v: &[f64]) -> f64 {
    let n = (mass.quadratic_form(v) * mass.max_abs()).sqrt();
    if n == 0.0 {
        0.0
    } else {
        p.gradient_defect(v) / n
    }
}

/// `γ_div` on `r` refinements below the level of `ctx`.
pub fn gamma_div_estimate(
    ctx: &LevelContext,
    r: usize,
    seed: u64,
) -> Result<GammaEstimate, FactorError> {
    let surrogate = KernelSurrogate::new(&ctx.dofs, &ctx.mat, r)?;
    DivergenceConformity::new(ctx, &surrogate)?.estimate(seed)
}

/// Two-grid approximation factor `γ_app`: `√λ_max` of
/// `θ ↦ ω² P_X B_f⁻¹ W B_f⁻¹ M_f θ` on the fine complement, where
/// `ζᵀWζ = |||(I − P_h)ζ|||²` and `P_h` is the energy projection onto the
/// coarse space.
pub fn gamma_app_estimate(
    ctx: &LevelContext,
    r: usize,
    seed: u64,
) -> Result<GammaEstimate, FactorError> {
    let omega = ctx.omega();
    let hierarchy = crate::mesh::MeshHierarchy::new(ctx.dofs.mesh().clone(), r)?;
    let ancestors = hierarchy.coarse_ancestors();
    let mut fine_mat = ctx.mat.clone();
    for level in &hierarchy.levels()[1..] {
        fine_mat = fine_mat.inherit(level)?;
    }
    let fine_dofs = Arc::new(DofSystem::nedelec(Arc::new(hierarchy.finest().clone())));
    drop(hierarchy);
    let t = prolongation(&ctx.dofs, &fine_dofs, &ancestors)?;
    let fine = LevelContext::new(fine_dofs, &fine_mat)?;
    if fine.complement_dim() == 0 {
        return Ok(GammaEstimate {
            value: 0.0,
            levels: r,
            iterations: 0,
            gradient_defect: 0.0,
        });
    }
    let coarse_n = DirectSolver::cholesky(&ctx.matrices.n)?;
    let fm = &fine.matrices;
    let b_solver = DirectSolver::indefinite(&fm.b)?;

    // (I − P) ζ with P ζ = T N_c⁻¹ Tᵀ N_f ζ
    let residual = |z: &[f64]| -> Vec<f64> {
        let c = coarse_n.apply_inverse(&t.matvec_transpose(&fm.n.matvec(z)));
        let tc = t.matvec(&c);
        z.iter().zip(tc).map(|(a, b)| a - b).collect()
    };
    // (I − P)ᵀ y = y − N_f T N_c⁻¹ Tᵀ y
    let residual_t = |y: &[f64]| -> Vec<f64> {
        let c = coarse_n.apply_inverse(&t.matvec_transpose(y));
        let ntc = fm.n.matvec(&t.matvec(&c));
        y.iter().zip(ntc).map(|(a, b)| a - b).collect()
    };
    let defect = std::cell::Cell::new(0.0f64);
    let op = |theta: &[f64]| {
        let zeta = b_solver.apply_inverse(&fm.mass.matvec(theta));
        defect.set(
            defect
                .get()
                .max(relative_defect(&fine.projector, &fm.mass, &zeta)),
        );
        let wz = residual_t(&fm.n.matvec(&residual(&zeta)));
        let y = b_solver.apply_inverse(&wz);
        let mut out = fine.projector.complement(&y).expect("projector solve");
        out.iter_mut().for_each(|v| *v *= omega * omega);
        out
    };
    let project = |v: &mut Vec<f64>| *v = fine.projector.complement(v).expect("projector solve");
    let opts = LanczosOptions {
        seed,
        tol: GAMMA_TOL,
        ..Default::default()
    };
    let res = lanczos(
        fine.dofs.ndof(),
        op,
        |x| fm.mass.matvec(x),
        project,
        1,
        Target::Largest,
        &opts,
    )?;
    let lambda = res.values.first().copied().unwrap_or(0.0).max(0.0);
    Ok(GammaEstimate {
        value: lambda.sqrt(),
        levels: r,
        iterations: res.iterations,
        gradient_defect: defect.get(),
    })
}

/// Verdict of one theorem inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The hypothesis of the theorem does not hold at this level.
    Vacuous,
    /// Inputs missing.
    NotEvaluated,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "true",
            Verdict::Fail => "false",
            Verdict::Vacuous => "vacuous",
            Verdict::NotEvaluated => "",
        }
    }

    pub fn is_fail(self) -> bool {
        self == Verdict::Fail
    }
}

/// Per-level record of all measured quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub level: usize,
    pub n: usize,
    pub h: f64,
    pub ndof: usize,
    pub omega: f64,
    /// Surrogate refinement level used by both γ estimators.
    pub r: usize,
    pub gamma_app: Option<f64>,
    pub gamma_div: Option<f64>,
    pub beta_h: Option<f64>,
    pub c_st: Option<f64>,
    /// `"oracle"` or `"discrete"`.
    pub c_st_source: String,
    pub err_energy: Option<f64>,
    pub best_err: Option<f64>,
    pub qo_ratio: Option<f64>,
    pub thm41_lhs_factor: Option<f64>,
    pub thm42_rhs: Option<f64>,
    pub thm41: Verdict,
    pub thm42: Verdict,
    pub rate_energy: Option<f64>,
}

impl FactorReport {
    pub fn new(level: usize, n: usize, h: f64, ndof: usize, omega: f64, r: usize) -> Self {
        Self {
            level,
            n,
            h,
            ndof,
            omega,
            r,
            gamma_app: None,
            gamma_div: None,
            beta_h: None,
            c_st: None,
            c_st_source: String::new(),
            err_energy: None,
            best_err: None,
            qo_ratio: None,
            thm41_lhs_factor: None,
            thm42_rhs: None,
            thm41: Verdict::NotEvaluated,
            thm42: Verdict::NotEvaluated,
            rate_energy: None,
        }
    }

    /// Fills the composite constants `1 − 15γ_div − 4γ_app²` and
    /// `(1 − 2(γ_div² + γ_app)) / (1 + 2C_st)`.
    pub fn fill_composites(&mut self) {
        if let (Some(ga), Some(gd)) = (self.gamma_app, self.gamma_div) {
            self.thm41_lhs_factor = Some(1.0 - 15.0 * gd - 4.0 * ga * ga);
            if let Some(c) = self.c_st {
                self.thm42_rhs = Some((1.0 - 2.0 * (gd * gd + ga)) / (1.0 + 2.0 * c));
            }
        }
        if let (Some(e), Some(b)) = (self.err_energy, self.best_err) {
            self.qo_ratio = Some(if b > 0.0 {
                e / b
            } else if e == 0.0 {
                1.0
            } else {
                f64::INFINITY
            });
        }
    }
}

/// Both theorem verdicts of one report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremLedger {
    pub thm41: Verdict,
    pub thm42: Verdict,
}

/// Evaluates the quasi-optimality estimate
/// `(1 − 15γ_div − 4γ_app²)·|||E − E_h||| ≤ |||E − P_h E|||` and the
/// inf-sup lower bound `β_h ≥ (1 − 2(γ_div² + γ_app)) / (1 + 2C_st)`, each
/// with relative `slack`.
pub fn check_theorems(report: &FactorReport, slack: f64) -> TheoremLedger {
    let thm41 = match (report.thm41_lhs_factor, report.err_energy, report.best_err) {
        (Some(f), _, _) if f <= 0.0 => Verdict::Vacuous,
        (Some(f), Some(e), Some(b)) => {
            if f * e <= b * (1.0 + slack) {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
        _ => Verdict::NotEvaluated,
    };
    let thm42 = match (report.thm42_rhs, report.beta_h) {
        (Some(rhs), _) if rhs <= 0.0 => Verdict::Vacuous,
        (Some(rhs), Some(beta)) => {
            if beta >= rhs * (1.0 - slack) {
                Verdict::Pass
            } else {
                Verdict::Fail
            }
        }
        _ => Verdict::NotEvaluated,
    };
    TheoremLedger { thm41, thm42 }
}

/// Asymptotic optimality: the excess `qo_ratio − 1` of the finest levels is
/// nonincreasing and the final ratio is at most `bound`.
pub fn check_asymptotic(reports: &[FactorReport], bound: f64) -> Verdict {
    let ratios: Vec<f64> = reports.iter().filter_map(|r| r.qo_ratio).collect();
    if ratios.len() < 2 {
        return Verdict::NotEvaluated;
    }
    let tail = &ratios[ratios.len() - 2..];
    if tail[1] - 1.0 <= (tail[0] - 1.0).max(0.0) + 1e-12 && tail[1] <= bound {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// `‖x‖_M` for a coefficient vector.
pub fn mass_norm(mass: &SparseSymmetricMatrix, x: &[f64]) -> f64 {
    dot(&mass.matvec(x), x).max(0.0).sqrt()
}
