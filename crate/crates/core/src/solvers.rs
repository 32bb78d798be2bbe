//! Sparse direct solves and symmetric generalized eigenvalue problems.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt::factor::LltRegularization;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::perm::PermRef;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, IntranodeLbltRef, LltRef,
    SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::SupernodalThreshold;
use faer::{Conj, Mat, MatMut, Par, Side};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sparse::{axpy, dot, norm, SparseSymmetricMatrix};

/// Largest dimension handled by dense eigensolvers.
pub const DENSE_LIMIT: usize = 3000;

/// Relative residual required from a linear solve.
pub const SOLVE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("matrix is singular or nearly singular (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("all eigenvalues requested for dimension {0} above the dense limit")]
    TooLargeForDense(usize),
    #[error("no convergence after {iterations} iterations (last estimate {last})")]
    NoConvergence { iterations: usize, last: f64 },
}

#[derive(Debug)]
enum Factor {
    Llt {
        values: Vec<f64>,
    },
    Lblt {
        values: Vec<f64>,
        subdiag: Vec<f64>,
        fwd: Vec<usize>,
        inv: Vec<usize>,
    },
}

/// Sparse Cholesky (`LLᵀ`) or Bunch–Kaufman (`LBLᵀ`) factorization of a
/// symmetric matrix, reusable for many right-hand sides.
#[derive(Debug)]
pub struct DirectSolver {
    matrix: SparseSymmetricMatrix,
    symbolic: SymbolicCholesky<usize>,
    factor: Factor,
}

fn symbolic(
    a: &SparseSymmetricMatrix,
) -> Result<
    (
        faer::sparse::SparseColMat<usize, f64>,
        SymbolicCholesky<usize>,
    ),
    SolverError,
> {
    let lower = a.to_faer_lower();
    let params = CholeskySymbolicParams {
        supernodal_flop_ratio_threshold: SupernodalThreshold::FORCE_SUPERNODAL,
        ..Default::default()
    };
    let symbolic = factorize_symbolic_cholesky(
        lower.symbolic(),
        Side::Lower,
        SymmetricOrdering::Amd,
        params,
    )
    .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
    Ok((lower, symbolic))
}

impl DirectSolver {
    /// `LLᵀ` factorization; fails if `a` is not numerically positive definite.
    pub fn cholesky(a: &SparseSymmetricMatrix) -> Result<Self, SolverError> {
        let (lower, symbolic) = symbolic(a)?;
        let mut values = vec![0.0; symbolic.len_val()];
        let req = symbolic.factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default());
        let mut buf = MemBuffer::new(req);
        symbolic
            .factorize_numeric_llt(
                &mut values,
                lower.as_ref(),
                Side::Lower,
                LltRegularization::default(),
                Par::Seq,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|_| SolverError::NotPositiveDefinite)?;
        Ok(Self {
            matrix: a.clone(),
            symbolic,
            factor: Factor::Llt { values },
        })
    }

    /// Pivoted `LBLᵀ` factorization for symmetric indefinite matrices.
    pub fn indefinite(a: &SparseSymmetricMatrix) -> Result<Self, SolverError> {
        let n = a.dim();
        let (lower, symbolic) = symbolic(a)?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut subdiag = vec![0.0; n];
        let mut fwd = vec![0usize; n];
        let mut inv = vec![0usize; n];
        let req =
            symbolic.factorize_numeric_intranode_lblt_scratch::<f64>(Par::Seq, Default::default());
        let mut buf = MemBuffer::new(req);
        symbolic.factorize_numeric_intranode_lblt(
            &mut values,
            &mut subdiag,
            &mut fwd,
            &mut inv,
            lower.as_ref(),
            Side::Lower,
            Par::Seq,
            MemStack::new(&mut buf),
            Default::default(),
        );
        if values.iter().chain(&subdiag).any(|v| !v.is_finite()) {
            return Err(SolverError::Singular {
                condition: f64::INFINITY,
            });
        }
        let solver = Self {
            matrix: a.clone(),
            symbolic,
            factor: Factor::Lblt {
                values,
                subdiag,
                fwd,
                inv,
            },
        };
        Ok(solver)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SparseSymmetricMatrix {
        &self.matrix
    }

    /// Number of stored factor entries.
    pub fn factor_nnz(&self) -> usize {
        self.symbolic.len_val()
    }

    /// Solves for every column of `rhs` in place, without residual checks.
    pub fn solve_in_place(&self, rhs: MatMut<'_, f64>) {
        let req = self
            .symbolic
            .solve_in_place_scratch::<f64>(rhs.ncols(), Par::Seq);
        let mut buf = MemBuffer::new(req);
        let stack = MemStack::new(&mut buf);
        match &self.factor {
            Factor::Llt { values } => LltRef::new(&self.symbolic, values).solve_in_place_with_conj(
                Conj::No,
                rhs,
                Par::Seq,
                stack,
            ),
            Factor::Lblt {
                values,
                subdiag,
                fwd,
                inv,
            } => {
                // SAFETY: fwd and inv are the inverse permutations produced by the factorization
                let perm = unsafe { PermRef::new_unchecked(fwd, inv, fwd.len()) };
                IntranodeLbltRef::new(&self.symbolic, values, subdiag, perm)
                    .solve_in_place_with_conj(Conj::No, rhs, Par::Seq, stack)
            }
        }
    }

    /// Plain factor solve.
    pub fn apply_inverse(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.solve_in_place(x.as_mut());
        x.col(0).iter().copied().collect()
    }

    /// Solves `A x = rhs` with up to three steps of iterative refinement and
    /// checks the relative residual.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        if rhs.len() != self.dim() {
            return Err(SolverError::DimensionMismatch {
                expected: self.dim(),
                found: rhs.len(),
            });
        }
        let bnorm = norm(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        let mut x = self.apply_inverse(rhs);
        let mut rel = f64::INFINITY;
        for step in 0..4 {
            let r: Vec<f64> = rhs
                .iter()
                .zip(self.matrix.matvec(&x))
                .map(|(b, ax)| b - ax)
                .collect();
            rel = norm(&r) / bnorm;
            if !rel.is_finite() || rel <= SOLVE_TOL * 1e-2 || step == 3 {
                break;
            }
            let dx = self.apply_inverse(&r);
            axpy(1.0, &dx, &mut x);
        }
        if rel.is_finite() && rel <= SOLVE_TOL {
            return Ok(x);
        }
        Err(SolverError::Singular {
            condition: self.condition_estimate(),
        })
    }

    /// Estimate of the 1-norm condition number (Hager's method).
    pub fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        let a_norm = (0..n)
            .map(|i| self.matrix.csr().row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.apply_inverse(&x);
            let y_norm: f64 = y.iter().map(|v| v.abs()).sum();
            if !y_norm.is_finite() {
                return f64::INFINITY;
            }
            if y_norm <= est {
                break;
            }
            est = y_norm;
            let xi: Vec<f64> = y
                .iter()
                .map(|v| if *v >= 0.0 { 1.0 } else { -1.0 })
                .collect();
            let z = self.apply_inverse(&xi);
            let (j, zmax) =
                z.iter().enumerate().fold(
                    (0, 0.0),
                    |m, (i, v)| if v.abs() > m.1 { (i, v.abs()) } else { m },
                );
            if zmax <= dot(&z, &x) {
                break;
            }
            x = vec![0.0; n];
            x[j] = 1.0;
        }
        a_norm * est
    }
}

/// Solves `A x = rhs` for symmetric, possibly indefinite `A`.
pub fn solve_symmetric(a: &SparseSymmetricMatrix, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
    DirectSolver::indefinite(a)?.solve(rhs)
}

/// Which eigenpairs to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    /// The `k` eigenvalues of smallest magnitude.
    SmallestMagnitude(usize),
    /// The `k` algebraically largest eigenvalues.
    Largest(usize),
    /// The whole spectrum; dense path only.
    All,
}

/// Eigenpairs of `A x = λ B x`, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<Vec<f64>>>,
    /// `‖A x − λ B x‖ / ((‖A‖ + |λ| ‖B‖) ‖x‖)` per pair, when vectors are kept.
    pub residuals: Vec<f64>,
}

/// All eigenpairs of the dense pencil `(a, b)` with `b` SPD. Eigenvectors
/// are `b`-orthonormal columns.
pub fn dense_generalized_eig(
    a: &Mat<f64>,
    b: &Mat<f64>,
) -> Result<(Vec<f64>, Mat<f64>), SolverError> {
    let n = a.nrows();
    if b.nrows() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            found: b.nrows(),
        });
    }
    let llt = b
        .llt(Side::Lower)
        .map_err(|_| SolverError::NotPositiveDefinite)?;
    let l = llt.L();
    let mut x = a.clone();
    solve_lower_triangular_in_place(l, x.as_mut(), Par::Seq);
    let mut c = x.transpose().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let evd = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| SolverError::Factorization(format!("{e:?}")))?;
    let values: Vec<f64> = evd.S().column_vector().iter().copied().collect();
    let mut vectors = evd.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), vectors.as_mut(), Par::Seq);
    Ok((values, vectors))
}

fn residual(a: &SparseSymmetricMatrix, b: &SparseSymmetricMatrix, lambda: f64, x: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let bx = b.matvec(x);
    let r: Vec<f64> = ax.iter().zip(&bx).map(|(p, q)| p - lambda * q).collect();
    norm(&r) / ((a.max_abs() + lambda.abs() * b.max_abs()) * norm(x)).max(f64::MIN_POSITIVE)
}

/// Eigenpairs of the symmetric pencil `(a, bm)` with `bm` SPD.
///
/// Dimensions up to [`DENSE_LIMIT`] use a dense solver; larger pencils use
/// Lanczos on `bm⁻¹a` (largest) or on the shift-invert operator `a⁻¹bm`
/// (smallest magnitude).
pub fn generalized_symmetric_eig(
    a: &SparseSymmetricMatrix,
    bm: &SparseSymmetricMatrix,
    which: Which,
    keep_vectors: bool,
    seed: u64,
) -> Result<EigenResult, SolverError> {
    let n = a.dim();
    if bm.dim() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            found: bm.dim(),
        });
    }
    let wanted = match which {
        Which::All => n,
        Which::SmallestMagnitude(k) | Which::Largest(k) => k.min(n),
    };
    let (values, vectors): (Vec<f64>, Vec<Vec<f64>>) = if n <= DENSE_LIMIT {
        let (vals, vecs) = dense_generalized_eig(&a.to_dense(), &bm.to_dense())?;
        let mut idx: Vec<usize> = (0..n).collect();
        match which {
            Which::All => {}
            Which::Largest(_) => idx.reverse(),
            Which::SmallestMagnitude(_) => {
                idx.sort_by(|&i, &j| vals[i].abs().total_cmp(&vals[j].abs()))
            }
        }
        idx.truncate(wanted);
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let vectors = if keep_vectors {
            idx.iter()
                .map(|&i| vecs.col(i).iter().copied().collect())
                .collect()
        } else {
            Vec::new()
        };
        (idx.iter().map(|&i| vals[i]).collect(), vectors)
    } else {
        if which == Which::All {
            return Err(SolverError::TooLargeForDense(n));
        }
        let opts = LanczosOptions {
            seed,
            ..Default::default()
        };
        let res = match which {
            Which::Largest(_) => {
                let bsolve = DirectSolver::cholesky(bm)?;
                lanczos(
                    n,
                    |x| bsolve.apply_inverse(&a.matvec(x)),
                    |x| bm.matvec(x),
                    |_| {},
                    wanted,
                    Target::Largest,
                    &opts,
                )?
            }
            _ => {
                let asolve = DirectSolver::indefinite(a)?;
                let mut r = lanczos(
                    n,
                    |x| asolve.apply_inverse(&bm.matvec(x)),
                    |x| bm.matvec(x),
                    |_| {},
                    wanted,
                    Target::LargestMagnitude,
                    &opts,
                )?;
                r.values.iter_mut().for_each(|v| *v = 1.0 / *v);
                r
            }
        };
        let mut pairs: Vec<(f64, Vec<f64>)> = res.values.into_iter().zip(res.vectors).collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let (v, x): (Vec<f64>, Vec<Vec<f64>>) = pairs.into_iter().unzip();
        (v, if keep_vectors { x } else { Vec::new() })
    };
    let residuals = vectors
        .iter()
        .zip(&values)
        .map(|(x, &l)| residual(a, bm, l, x))
        .collect();
    Ok(EigenResult {
        values,
        vectors: keep_vectors.then_some(vectors),
        residuals,
    })
}

/// Ordering used to pick Ritz values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Largest,
    LargestMagnitude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Stop when `|β_m s_m| ≤ tol · |θ|` for every wanted Ritz pair.
    pub tol: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iter: 150,
            tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanczosResult {
    /// Wanted Ritz values in target order.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
    pub residual_estimates: Vec<f64>,
}

/// Lanczos with full reorthogonalization for an operator `op` that is
/// self-adjoint in the inner product `⟨x, y⟩ = xᵀ W y`, where `w` applies
/// `W`. `project` is applied to the start vector and to every new basis
/// vector to confine the iteration to an invariant subspace.
pub fn lanczos<Op, Wf, Pf>(
    n: usize,
    op: Op,
    w: Wf,
    project: Pf,
    k: usize,
    target: Target,
    opts: &LanczosOptions,
) -> Result<LanczosResult, SolverError>
where
    Op: Fn(&[f64]) -> Vec<f64>,
    Wf: Fn(&[f64]) -> Vec<f64>,
    Pf: Fn(&mut Vec<f64>),
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    project(&mut v);
    let mut wv = w(&v);
    let nv = dot(&v, &wv).sqrt();
    if nv.is_nan() || nv <= 0.0 {
        return Ok(LanczosResult {
            values: vec![],
            vectors: vec![],
            iterations: 0,
            residual_estimates: vec![],
        });
    }
    v.iter_mut().for_each(|x| *x /= nv);
    wv.iter_mut().for_each(|x| *x /= nv);
    let mut basis = vec![v];
    let mut wbasis = vec![wv];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let max_iter = opts.max_iter.min(n);
    loop {
        let m = basis.len();
        let mut r = op(&basis[m - 1]);
        project(&mut r);
        let a = dot(&r, &wbasis[m - 1]);
        // two passes of classical Gram–Schmidt in the W inner product
        for _ in 0..2 {
            for (q, wq) in basis.iter().zip(&wbasis) {
                let c = dot(&r, wq);
                axpy(-c, q, &mut r);
            }
        }
        alpha.push(a);
        let mut wr = w(&r);
        let b = dot(&r, &wr).max(0.0).sqrt();

        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        match target {
            Target::Largest => {
                order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]))
            }
            Target::LargestMagnitude => order.sort_by(|&i, &j| {
                eig.eigenvalues[j]
                    .abs()
                    .total_cmp(&eig.eigenvalues[i].abs())
            }),
        }
        order.truncate(k.min(m));
        let scale = eig
            .eigenvalues
            .iter()
            .fold(0.0f64, |s, v| s.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let estimates: Vec<f64> = order
            .iter()
            .map(|&i| (b * eig.eigenvectors[(m - 1, i)]).abs())
            .collect();
        let breakdown = b <= 1e-13 * scale;
        let converged = order.len() == k.min(n)
            && order
                .iter()
                .zip(&estimates)
                .all(|(&i, e)| *e <= opts.tol * eig.eigenvalues[i].abs().max(1e-3 * scale));
        let last = order
            .first()
            .map(|&i| eig.eigenvalues[i])
            .unwrap_or(f64::NAN);
        if converged || breakdown || m >= max_iter {
            if !(converged || breakdown) {
                return Err(SolverError::NoConvergence {
                    iterations: m,
                    last,
                });
            }
            let vectors = order
                .iter()
                .map(|&i| {
                    let mut x = vec![0.0; n];
                    for (j, q) in basis.iter().enumerate() {
                        axpy(eig.eigenvectors[(j, i)], q, &mut x);
                    }
                    x
                })
                .collect();
            return Ok(LanczosResult {
                values: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
                vectors,
                iterations: m,
                residual_estimates: estimates,
            });
        }
        beta.push(b);
        r.iter_mut().for_each(|x| *x /= b);
        wr.iter_mut().for_each(|x| *x /= b);
        basis.push(r);
        wbasis.push(wr);
    }
}

/// Discrete inf-sup constant `min |λ|` of the pencil `B x = λ N x`.
/// Returns zero when `B` is singular.
pub fn infsup_constant(
    b: &SparseSymmetricMatrix,
    n: &SparseSymmetricMatrix,
    seed: u64,
) -> Result<f64, SolverError> {
    match generalized_symmetric_eig(b, n, Which::SmallestMagnitude(1), false, seed) {
        Ok(res) => Ok(res.values.first().map_or(0.0, |v| v.abs())),
        Err(SolverError::Singular { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}
