//! Discrete fields, projections, interpolants and the error split.

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{
    assemble_stiffness, gradient_map, AssemblyError, DofSystem, MaterialField, MaxwellMatrices,
    Space,
};
use crate::elements::{
    gauss_legendre01, quadrature, ElementError, QuadratureRule, TetGeometry, TriangleRule,
};
use crate::mesh::{MeshError, MeshHierarchy, TetMesh, Vec3};
use crate::solvers::{DirectSolver, SolverError};
use crate::sparse::{dot, CsrMatrix, SparseSymmetricMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("coefficient vector has length {found}, system has {expected} DOFs")]
    LengthMismatch { expected: usize, found: usize },
    #[error("expected a {expected:?} field, got {found:?}")]
    WrongSpace { expected: Space, found: Space },
    #[error("field does not live on the coarse level of the hierarchy")]
    NotNested,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Element(#[from] ElementError),
}

/// Smooth vector field with a known curl.
pub trait VectorField: Sync {
    fn value(&self, x: &Vec3) -> Vec3;
    fn curl(&self, x: &Vec3) -> Vec3;
}

/// Vector field given by a pair of closures.
pub struct FnField<V, C> {
    pub value: V,
    pub curl: C,
}

impl<V, C> VectorField for FnField<V, C>
where
    V: Fn(&Vec3) -> Vec3 + Sync,
    C: Fn(&Vec3) -> Vec3 + Sync,
{
    fn value(&self, x: &Vec3) -> Vec3 {
        (self.value)(x)
    }

    fn curl(&self, x: &Vec3) -> Vec3 {
        (self.curl)(x)
    }
}

/// The zero field.
pub struct ZeroField;

impl VectorField for ZeroField {
    fn value(&self, _: &Vec3) -> Vec3 {
        Vec3::zeros()
    }

    fn curl(&self, _: &Vec3) -> Vec3 {
        Vec3::zeros()
    }
}

/// Coefficient vector over a DOF system.
#[derive(Debug, Clone)]
pub struct DiscreteField {
    system: Arc<DofSystem>,
    coeffs: Vec<f64>,
}

impl DiscreteField {
    pub fn new(system: Arc<DofSystem>, coeffs: Vec<f64>) -> Result<Self, OperatorError> {
        if coeffs.len() != system.ndof() {
            return Err(OperatorError::LengthMismatch {
                expected: system.ndof(),
                found: coeffs.len(),
            });
        }
        Ok(Self { system, coeffs })
    }

    pub fn zeros(system: Arc<DofSystem>) -> Self {
        let coeffs = vec![0.0; system.ndof()];
        Self { system, coeffs }
    }

    pub fn system(&self) -> &Arc<DofSystem> {
        &self.system
    }

    pub fn space(&self) -> Space {
        self.system.space()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Signed local coefficients of `cell`; eliminated DOFs are zero.
    pub fn local_coeffs(&self, cell: usize) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (i, g, s) in self.system.cell_dofs(cell).iter() {
            if let Some(g) = g {
                out[i] = s * self.coeffs[g];
            }
        }
        out
    }

    /// Value of a Nédélec or Raviart–Thomas field in `cell`.
    pub fn vector_value(&self, cell: usize, geo: &TetGeometry, bary: &[f64; 4]) -> Vec3 {
        let c = self.local_coeffs(cell);
        match self.space() {
            Space::Nedelec => geo.whitney(bary).iter().zip(c).map(|(w, ci)| w * ci).sum(),
            Space::RaviartThomas => geo
                .raviart_thomas(&geo.point(bary))
                .iter()
                .zip(c)
                .map(|(w, ci)| w * ci)
                .sum(),
            Space::Lagrange1 => self.gradient(cell, geo),
        }
    }

    /// Curl of a Nédélec field; constant on each cell.
    pub fn curl(&self, cell: usize, geo: &TetGeometry) -> Vec3 {
        let c = self.local_coeffs(cell);
        geo.whitney_curls()
            .iter()
            .zip(c)
            .map(|(w, ci)| w * ci)
            .sum()
    }

    pub fn scalar_value(&self, cell: usize, bary: &[f64; 4]) -> f64 {
        let c = self.local_coeffs(cell);
        (0..4).map(|i| c[i] * bary[i]).sum()
    }

    pub fn gradient(&self, cell: usize, geo: &TetGeometry) -> Vec3 {
        let c = self.local_coeffs(cell);
        (0..4).map(|i| geo.grads[i] * c[i]).sum()
    }

    /// Point value of a vector-valued field (gradient for Lagrange fields).
    /// Returns `None` outside the mesh.
    pub fn eval(&self, x: &Vec3) -> Option<Vec3> {
        let cell = self.system.mesh().locate(x)?;
        let geo = self.system.geometry(cell);
        Some(self.vector_value(cell, &geo, &geo.barycentric(x)))
    }

    fn expect(&self, space: Space) -> Result<(), OperatorError> {
        if self.space() == space {
            Ok(())
        } else {
            Err(OperatorError::WrongSpace {
                expected: space,
                found: self.space(),
            })
        }
    }
}

/// Matrix mapping coarse Nédélec coefficients to the coefficients of the
/// same field on a nested fine mesh. `ancestors[t]` is the coarse cell
/// containing fine cell `t`.
///
/// Tangential components of lowest-order fields are affine along any
/// segment inside a cell and continuous across faces, so the midpoint rule
/// gives the fine circulations exactly.
pub fn prolongation(
    coarse: &DofSystem,
    fine: &DofSystem,
    ancestors: &[usize],
) -> Result<CsrMatrix, OperatorError> {
    for d in [coarse, fine] {
        if d.space() != Space::Nedelec {
            return Err(OperatorError::WrongSpace {
                expected: Space::Nedelec,
                found: d.space(),
            });
        }
    }
    let fm = fine.mesh();
    if ancestors.len() != fm.n_tets() {
        return Err(OperatorError::NotNested);
    }
    let mut edge_cell = vec![usize::MAX; fm.n_edges()];
    for (t, edges) in fm.tables().tet_edges.iter().enumerate() {
        for &e in edges {
            if edge_cell[e] == usize::MAX {
                edge_cell[e] = t;
            }
        }
    }
    let rows: Vec<Vec<(usize, f64)>> = (0..fine.ndof())
        .into_par_iter()
        .map(|row| {
            let e = fine.entity_of_dof(row);
            let [a, b] = fm.edges()[e];
            let (xa, xb) = (fm.vertices()[a], fm.vertices()[b]);
            let cell = ancestors[edge_cell[e]];
            let geo = coarse.geometry(cell);
            let w = geo.whitney(&geo.barycentric(&((xa + xb) * 0.5)));
            coarse
                .cell_dofs(cell)
                .iter()
                .filter_map(|(i, g, s)| g.map(|g| (g, s * w[i].dot(&(xb - xa)))))
                .collect()
        })
        .collect();
    let triplets = rows
        .into_iter()
        .enumerate()
        .flat_map(|(r, entries)| entries.into_iter().map(move |(c, v)| (r, c, v)))
        .filter(|t| t.2.abs() > 1e-15)
        .collect();
    Ok(CsrMatrix::from_triplets(
        fine.ndof(),
        coarse.ndof(),
        triplets,
    ))
}

/// The ε-orthogonal projection onto discrete gradients and its complement.
#[derive(Debug)]
pub struct CurlFreeProjector {
    pub lagrange: Arc<DofSystem>,
    pub g: CsrMatrix,
    pub mass: SparseSymmetricMatrix,
    /// `GᵀMG`, equal to the ε-weighted Lagrange stiffness.
    pub stiffness: SparseSymmetricMatrix,
    solver: Option<DirectSolver>,
}

impl CurlFreeProjector {
    pub fn new(
        nedelec: &DofSystem,
        mat: &MaterialField,
        mass: SparseSymmetricMatrix,
    ) -> Result<Self, OperatorError> {
        let lagrange = Arc::new(DofSystem::lagrange1(nedelec.mesh_arc().clone()));
        let g = gradient_map(&lagrange, nedelec)?;
        let stiffness = assemble_stiffness(&lagrange, mat)?;
        let solver = if lagrange.ndof() > 0 {
            Some(DirectSolver::cholesky(&stiffness)?)
        } else {
            None
        };
        Ok(Self {
            lagrange,
            g,
            mass,
            stiffness,
            solver,
        })
    }

    pub fn n_potentials(&self) -> usize {
        self.lagrange.ndof()
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, OperatorError> {
        match &self.solver {
            Some(s) => Ok(s.solve(rhs)?),
            None => Ok(Vec::new()),
        }
    }

    /// Potential `p` with `(GᵀMG) p = GᵀM v`.
    pub fn potential(&self, v: &[f64]) -> Result<Vec<f64>, OperatorError> {
        self.solve(&self.g.matvec_transpose(&self.mass.matvec(v)))
    }

    /// `G p`, the discrete curl-free part of `v`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if self.n_potentials() == 0 {
            return Ok(vec![0.0; v.len()]);
        }
        Ok(self.g.matvec(&self.potential(v)?))
    }

    /// `v − G p`, the ε-orthogonal complement part.
    pub fn complement(&self, v: &[f64]) -> Result<Vec<f64>, OperatorError> {
        let gp = self.project(v)?;
        Ok(v.iter().zip(gp).map(|(a, b)| a - b).collect())
    }

    /// Transposed complement projection `b − M G (GᵀMG)⁻¹ Gᵀ b`.
    pub fn complement_transpose(&self, b: &[f64]) -> Result<Vec<f64>, OperatorError> {
        if self.n_potentials() == 0 {
            return Ok(b.to_vec());
        }
        let p = self.solve(&self.g.matvec_transpose(b))?;
        let mgp = self.mass.matvec(&self.g.matvec(&p));
        Ok(b.iter().zip(mgp).map(|(a, c)| a - c).collect())
    }

    /// `‖GᵀM v‖`, zero exactly on the complement.
    pub fn gradient_defect(&self, v: &[f64]) -> f64 {
        let r = self.g.matvec_transpose(&self.mass.matvec(v));
        dot(&r, &r).sqrt()
    }
}

/// `Πᶜ_{h0} v`: discrete curl-free projection of a Nédélec field.
pub fn project_discrete_curlfree(
    v: &DiscreteField,
    mat: &MaterialField,
) -> Result<DiscreteField, OperatorError> {
    v.expect(Space::Nedelec)?;
    let mass = crate::assembly::assemble_mass(v.system(), mat)?;
    let proj = CurlFreeProjector::new(v.system(), mat, mass)?;
    DiscreteField::new(v.system().clone(), proj.project(v.coeffs())?)
}

/// Energy pairing `b⁺(v, w_i) = ω²(ε v, w_i) + (ν curl v, curl w_i)` of an
/// analytic field with every Nédélec basis function.
pub fn energy_pairing<F: VectorField + ?Sized>(
    dofs: &DofSystem,
    mat: &MaterialField,
    field: &F,
    order: usize,
) -> Result<Vec<f64>, OperatorError> {
    let rule = quadrature(order)?;
    let w2 = mat.omega() * mat.omega();
    let locals: Vec<[f64; 6]> = (0..dofs.mesh().n_tets())
        .into_par_iter()
        .map(|t| {
            let geo = dofs.geometry(t);
            let curls = geo.whitney_curls();
            let (eps, nu) = (mat.eps(t), mat.nu(t));
            let mut out = [0.0; 6];
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let x = geo.point(bary);
                let ev = eps * field.value(&x) * w2;
                let nc = nu * field.curl(&x);
                let wh = geo.whitney(bary);
                let jw = w * 6.0 * geo.volume;
                for i in 0..6 {
                    out[i] += jw * (ev.dot(&wh[i]) + nc.dot(&curls[i]));
                }
            }
            out
        })
        .collect();
    let mut rhs = vec![0.0; dofs.ndof()];
    for (t, local) in locals.iter().enumerate() {
        for (i, g, s) in dofs.cell_dofs(t).iter() {
            if let Some(g) = g {
                rhs[g] += s * local[i];
            }
        }
    }
    Ok(rhs)
}

/// Best approximation `P_h` in the energy inner product.
#[derive(Debug)]
pub struct BestApproximation {
    pub dofs: Arc<DofSystem>,
    solver: DirectSolver,
}

impl BestApproximation {
    pub fn new(dofs: Arc<DofSystem>, matrices: &MaxwellMatrices) -> Result<Self, OperatorError> {
        let solver = DirectSolver::cholesky(&matrices.n)?;
        Ok(Self { dofs, solver })
    }

    /// Coefficients of `P_h v` from the pairings `b⁺(v, w_i)`.
    pub fn from_pairing(&self, pairing: &[f64]) -> Result<Vec<f64>, OperatorError> {
        Ok(self.solver.solve(pairing)?)
    }

    pub fn of_analytic<F: VectorField + ?Sized>(
        &self,
        mat: &MaterialField,
        field: &F,
        order: usize,
    ) -> Result<DiscreteField, OperatorError> {
        let pairing = energy_pairing(&self.dofs, mat, field, order)?;
        DiscreteField::new(self.dofs.clone(), self.from_pairing(&pairing)?)
    }
}

/// `P_h v` for an analytic field `v`.
pub fn best_approx<F: VectorField + ?Sized>(
    v: &F,
    coarse: Arc<DofSystem>,
    mat: &MaterialField,
    order: usize,
) -> Result<DiscreteField, OperatorError> {
    let m = MaxwellMatrices::assemble(&coarse, mat)?;
    BestApproximation::new(coarse, &m)?.of_analytic(mat, v, order)
}

/// `P_h v` for a field given on a nested fine level: solves
/// `N_c x = Tᵀ N_f v`.
pub fn best_approx_discrete(
    fine_coeffs: &[f64],
    t: &CsrMatrix,
    fine_n: &SparseSymmetricMatrix,
    best: &BestApproximation,
) -> Result<Vec<f64>, OperatorError> {
    best.from_pairing(&t.matvec_transpose(&fine_n.matvec(fine_coeffs)))
}

/// Squared energy norm components `(ω²‖v − v_h‖²_ε, ‖curl(v − v_h)‖²_ν)` of
/// the error between an analytic field and a Nédélec field.
pub fn energy_error_sq<F: VectorField + ?Sized>(
    field: &F,
    vh: &DiscreteField,
    mat: &MaterialField,
    order: usize,
) -> Result<(f64, f64), OperatorError> {
    vh.expect(Space::Nedelec)?;
    let rule = quadrature(order)?;
    let w2 = mat.omega() * mat.omega();
    let parts: Vec<(f64, f64)> = (0..vh.system().mesh().n_tets())
        .into_par_iter()
        .map(|t| {
            let geo = vh.system().geometry(t);
            let ch = vh.curl(t, &geo);
            let (eps, nu) = (mat.eps(t), mat.nu(t));
            rule.points
                .iter()
                .zip(&rule.weights)
                .fold((0.0, 0.0), |(a, b), (bary, w)| {
                    let x = geo.point(bary);
                    let e = field.value(&x) - vh.vector_value(t, &geo, bary);
                    let c = field.curl(&x) - ch;
                    let jw = w * 6.0 * geo.volume;
                    (a + jw * w2 * e.dot(&(eps * e)), b + jw * c.dot(&(nu * c)))
                })
        })
        .collect();
    Ok(parts
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1)))
}

/// `|||v − v_h|||`.
pub fn energy_error<F: VectorField + ?Sized>(
    field: &F,
    vh: &DiscreteField,
    mat: &MaterialField,
    order: usize,
) -> Result<f64, OperatorError> {
    let (a, b) = energy_error_sq(field, vh, mat, order)?;
    Ok((a + b).sqrt())
}

/// Nested fine level carrying the Lagrange space used to approximate the
/// ε-orthogonal projection `Π₀` onto continuous gradients.
#[derive(Debug)]
pub struct KernelSurrogate {
    pub levels: usize,
    pub hierarchy: MeshHierarchy,
    pub fine_mesh: Arc<TetMesh>,
    pub ancestors: Vec<usize>,
    pub fine_mat: MaterialField,
    pub fine_nedelec: Arc<DofSystem>,
    pub fine_lagrange: Arc<DofSystem>,
    /// Coarse-to-fine Nédélec prolongation.
    pub t: CsrMatrix,
    /// Fine gradient map.
    pub g: CsrMatrix,
    pub fine_mass: SparseSymmetricMatrix,
    /// Fine ε-weighted Lagrange stiffness `S = GᵀMG`.
    pub stiffness: SparseSymmetricMatrix,
    solver: DirectSolver,
}

impl KernelSurrogate {
    /// Builds the level `levels` uniform refinements below `coarse`.
    pub fn new(
        coarse: &DofSystem,
        mat: &MaterialField,
        levels: usize,
    ) -> Result<Self, OperatorError> {
        if coarse.space() != Space::Nedelec {
            return Err(OperatorError::WrongSpace {
                expected: Space::Nedelec,
                found: coarse.space(),
            });
        }
        let hierarchy = MeshHierarchy::new(coarse.mesh().clone(), levels)?;
        let ancestors = hierarchy.coarse_ancestors();
        let fine_mesh = Arc::new(hierarchy.finest().clone());
        let mut fine_mat = mat.clone();
        for level in &hierarchy.levels()[1..] {
            fine_mat = fine_mat.inherit(level)?;
        }
        let fine_nedelec = Arc::new(DofSystem::nedelec(fine_mesh.clone()));
        let fine_lagrange = Arc::new(DofSystem::lagrange1(fine_mesh.clone()));
        let t = prolongation(coarse, &fine_nedelec, &ancestors)?;
        let g = gradient_map(&fine_lagrange, &fine_nedelec)?;
        let fine_mass = crate::assembly::assemble_mass(&fine_nedelec, &fine_mat)?;
        let stiffness = assemble_stiffness(&fine_lagrange, &fine_mat)?;
        let solver = DirectSolver::cholesky(&stiffness)?;
        Ok(Self {
            levels,
            hierarchy,
            fine_mesh,
            ancestors,
            fine_mat,
            fine_nedelec,
            fine_lagrange,
            t,
            g,
            fine_mass,
            stiffness,
            solver,
        })
    }

    /// `Gᵀ M_f T`: pairing of coarse coefficients with fine gradients.
    pub fn gradient_pairing(&self, coarse_coeffs: &[f64]) -> Vec<f64> {
        self.g
            .matvec_transpose(&self.fine_mass.matvec(&self.t.matvec(coarse_coeffs)))
    }

    /// Fine potential `p` of `Π₀ v` and `‖Π₀ v‖_ε` for a coarse field.
    pub fn project_discrete(
        &self,
        coarse_coeffs: &[f64],
    ) -> Result<(Vec<f64>, f64), OperatorError> {
        self.project_pairing(&self.gradient_pairing(coarse_coeffs))
    }

    /// Fine potential and norm from the pairings `(ε v, ∇φ_i)`.
    pub fn project_pairing(&self, pairing: &[f64]) -> Result<(Vec<f64>, f64), OperatorError> {
        let p = self.solver.solve(pairing)?;
        let n2 = dot(&p, pairing).max(0.0);
        Ok((p, n2.sqrt()))
    }

    /// `(ε v, ∇φ_i)` on the fine level for an analytic field.
    pub fn analytic_pairing<F: VectorField + ?Sized>(
        &self,
        field: &F,
        order: usize,
    ) -> Result<Vec<f64>, OperatorError> {
        let rule = quadrature(order)?;
        let sys = &self.fine_lagrange;
        let locals: Vec<[f64; 4]> = (0..self.fine_mesh.n_tets())
            .into_par_iter()
            .map(|t| {
                let geo = sys.geometry(t);
                let eps = self.fine_mat.eps(t);
                let ev: Vec3 = integrate_vec(&rule, &geo, |x| eps * field.value(x));
                [0, 1, 2, 3].map(|i| ev.dot(&geo.grads[i]))
            })
            .collect();
        let mut out = vec![0.0; sys.ndof()];
        for (t, local) in locals.iter().enumerate() {
            for (i, g, _) in sys.cell_dofs(t).iter() {
                if let Some(g) = g {
                    out[g] += local[i];
                }
            }
        }
        Ok(out)
    }

    /// Surrogate of `Π₀ v` for an analytic `v`.
    pub fn project_analytic<F: VectorField + ?Sized>(
        &self,
        field: &F,
        order: usize,
    ) -> Result<(Vec<f64>, f64), OperatorError> {
        self.project_pairing(&self.analytic_pairing(field, order)?)
    }
}

fn integrate_vec<F: Fn(&Vec3) -> Vec3>(rule: &QuadratureRule, geo: &TetGeometry, f: F) -> Vec3 {
    rule.points
        .iter()
        .zip(&rule.weights)
        .fold(Vec3::zeros(), |acc, (b, w)| {
            acc + f(&geo.point(b)) * (w * 6.0 * geo.volume)
        })
}

/// Input to the continuous-kernel projection.
pub enum KernelInput<'a> {
    Discrete(&'a DiscreteField),
    Analytic(&'a dyn VectorField),
}

/// Surrogate of `Π₀ v` on `r` uniform refinements of the mesh of `coarse`.
/// Returns the fine Lagrange potential `p` with `Π₀ v ≈ ∇p` and `‖Π₀ v‖_ε`.
pub fn project_continuous_kernel_surrogate(
    v: KernelInput<'_>,
    coarse: &DofSystem,
    mat: &MaterialField,
    r: usize,
) -> Result<(DiscreteField, f64), OperatorError> {
    let surrogate = KernelSurrogate::new(coarse, mat, r)?;
    let (p, nrm) = match v {
        KernelInput::Discrete(field) => {
            field.expect(Space::Nedelec)?;
            if !field.system().same_mesh(coarse) || field.system().ndof() != coarse.ndof() {
                return Err(OperatorError::NotNested);
            }
            surrogate.project_discrete(field.coeffs())?
        }
        KernelInput::Analytic(f) => surrogate.project_analytic(f, 6)?,
    };
    Ok((DiscreteField::new(surrogate.fine_lagrange.clone(), p)?, nrm))
}

/// Quadrature used by the canonical interpolants.
///
/// The default (8 Gauss points per edge, degree-10 face rule) resolves the
/// degrees of freedom of smooth fields on desk-scale meshes to rounding
/// level, so the commuting diagram holds to ~1e-15. The lighter
/// [`InterpolationRules::light`] rule leaves quadrature defects of order
/// 1e-8 at h = 1/4.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationRules {
    pub edge_points: usize,
    pub face: TriangleRule,
}

impl InterpolationRules {
    /// 5-point Gauss on edges, 6-point degree-4 rule on faces.
    pub fn light() -> Self {
        Self {
            edge_points: 5,
            face: TriangleRule::degree4(),
        }
    }
}

impl Default for InterpolationRules {
    fn default() -> Self {
        Self {
            edge_points: 8,
            face: TriangleRule::collapsed(10),
        }
    }
}

/// Canonical interpolant: edge circulations for Nédélec targets, face
/// fluxes for Raviart–Thomas targets.
pub fn canonical_interp<F: Fn(&Vec3) -> Vec3 + Sync>(
    v: F,
    target: Arc<DofSystem>,
    rules: &InterpolationRules,
) -> Result<DiscreteField, OperatorError> {
    let mesh = target.mesh();
    let coeffs: Vec<f64> = match target.space() {
        Space::Nedelec => {
            let (s, w) = gauss_legendre01(rules.edge_points);
            (0..target.ndof())
                .into_par_iter()
                .map(|d| {
                    let [a, b] = mesh.edges()[target.entity_of_dof(d)];
                    let (xa, xb) = (mesh.vertices()[a], mesh.vertices()[b]);
                    let t = xb - xa;
                    s.iter()
                        .zip(&w)
                        .map(|(si, wi)| wi * v(&(xa + t * *si)).dot(&t))
                        .sum()
                })
                .collect()
        }
        Space::RaviartThomas => (0..target.ndof())
            .into_par_iter()
            .map(|d| {
                let [i, j, k] = mesh.faces()[target.entity_of_dof(d)];
                let p = [mesh.vertices()[i], mesh.vertices()[j], mesh.vertices()[k]];
                let area_normal = (p[1] - p[0]).cross(&(p[2] - p[0])) * 0.5;
                rules
                    .face
                    .points
                    .iter()
                    .zip(&rules.face.weights)
                    .map(|(b, w)| {
                        w * v(&(p[0] * b[0] + p[1] * b[1] + p[2] * b[2])).dot(&area_normal)
                    })
                    .sum()
            })
            .collect(),
        Space::Lagrange1 => (0..target.ndof())
            .map(|d| v(&mesh.vertices()[target.entity_of_dof(d)]).x)
            .collect(),
    };
    DiscreteField::new(target, coeffs)
}

/// Split of the error `e = E − E_h` into `θ_Π = Π₀ e` and `θ₀ = e − θ_Π`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSplit {
    /// Fine Lagrange potential of `θ_Π`.
    pub theta_pi_potential: Vec<f64>,
    /// `ω‖θ₀‖_ε`, integrated directly on the fine level.
    pub theta0_mass: f64,
    /// `ω‖θ_Π‖_ε`.
    pub theta_pi_mass: f64,
    /// `‖curl θ₀‖_ν = ‖curl e‖_ν`.
    pub curl_theta0: f64,
    /// `|||e|||`.
    pub energy_error: f64,
    /// Surrogate refinement level.
    pub levels: usize,
}

impl ErrorSplit {
    /// `ω²‖θ₀‖²_ε + ω²‖θ_Π‖²_ε + ‖curl θ₀‖²_ν`.
    pub fn component_sum_sq(&self) -> f64 {
        self.theta0_mass.powi(2) + self.theta_pi_mass.powi(2) + self.curl_theta0.powi(2)
    }
}

/// Splits `E − E_h` using the kernel surrogate built below the mesh of `eh`.
pub fn decompose_error<F: VectorField + ?Sized>(
    exact: &F,
    eh: &DiscreteField,
    mat: &MaterialField,
    surrogate: &KernelSurrogate,
    order: usize,
) -> Result<ErrorSplit, OperatorError> {
    eh.expect(Space::Nedelec)?;
    if surrogate.t.ncols() != eh.coeffs().len() {
        return Err(OperatorError::NotNested);
    }
    let pairing: Vec<f64> = surrogate
        .analytic_pairing(exact, order)?
        .into_iter()
        .zip(surrogate.gradient_pairing(eh.coeffs()))
        .map(|(a, b)| a - b)
        .collect();
    let (p, pi_norm) = surrogate.project_pairing(&pairing)?;
    let (mass_sq, curl_sq) = energy_error_sq(exact, eh, mat, order)?;
    let omega = mat.omega();

    // ‖e − ∇p‖_ε on the fine level with E_h evaluated in the coarse ancestor
    let rule = quadrature(order)?;
    let potential = DiscreteField::new(surrogate.fine_lagrange.clone(), p.clone())?;
    let coarse = eh.system();
    let theta0_sq: f64 = (0..surrogate.fine_mesh.n_tets())
        .into_par_iter()
        .map(|t| {
            let geo = surrogate.fine_lagrange.geometry(t);
            let k = surrogate.ancestors[t];
            let cgeo = coarse.geometry(k);
            let grad = potential.gradient(t, &geo);
            let eps = surrogate.fine_mat.eps(t);
            rule.points
                .iter()
                .zip(&rule.weights)
                .map(|(b, w)| {
                    let x = geo.point(b);
                    let e =
                        exact.value(&x) - eh.vector_value(k, &cgeo, &cgeo.barycentric(&x)) - grad;
                    w * 6.0 * geo.volume * e.dot(&(eps * e))
                })
                .sum::<f64>()
        })
        .sum();
    Ok(ErrorSplit {
        theta_pi_potential: p,
        theta0_mass: omega * theta0_sq.sqrt(),
        theta_pi_mass: omega * pi_norm,
        curl_theta0: curl_sq.sqrt(),
        energy_error: (mass_sq + curl_sq).sqrt(),
        levels: surrogate.levels,
    })
}
