//! Degree-of-freedom maps and assembly of the bilinear forms.

use std::sync::Arc;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elements::{quadrature, ElementError, TetGeometry};
use crate::mesh::{TetMesh, Vec3, LOCAL_EDGES};
use crate::sparse::{CsrMatrix, SparseSymmetricMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error("{which} in cell {cell} is not symmetric positive definite")]
    NonSpdMaterial { cell: usize, which: &'static str },
    #[error("frequency must be positive and finite, got {0}")]
    InvalidFrequency(f64),
    #[error("material has {material} cells but mesh has {mesh}")]
    CellCountMismatch { material: usize, mesh: usize },
    #[error("degree-of-freedom systems live on different meshes")]
    MeshMismatch,
    #[error("expected a {expected:?} space, got {found:?}")]
    WrongSpace { expected: Space, found: Space },
    #[error("mesh has no parent map")]
    NotRefined,
    #[error(transparent)]
    Element(#[from] ElementError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// Lowest-order Nédélec, one DOF per edge.
    Nedelec,
    /// Lowest-order Raviart–Thomas, one DOF per face.
    RaviartThomas,
    /// Continuous piecewise linears, one DOF per vertex.
    Lagrange1,
}

impl Space {
    pub fn local_dim(self) -> usize {
        match self {
            Space::Nedelec => 6,
            Space::RaviartThomas | Space::Lagrange1 => 4,
        }
    }
}

/// Global DOFs of one cell with their orientation signs. Eliminated
/// boundary DOFs are `None`.
#[derive(Debug, Clone, Copy)]
pub struct LocalDofs {
    pub dofs: [Option<usize>; 6],
    pub signs: [f64; 6],
    pub len: usize,
}

impl LocalDofs {
    pub fn iter(&self) -> impl Iterator<Item = (usize, Option<usize>, f64)> + '_ {
        (0..self.len).map(|i| (i, self.dofs[i], self.signs[i]))
    }
}

/// Numbering of the DOFs of one space on one mesh.
#[derive(Debug, Clone)]
pub struct DofSystem {
    mesh: Arc<TetMesh>,
    space: Space,
    eliminate_boundary: bool,
    entity_dof: Vec<Option<usize>>,
    dof_entity: Vec<usize>,
}

impl DofSystem {
    /// Numbers the mesh entities of `space` in entity order, skipping
    /// boundary entities when `eliminate_boundary` is set.
    pub fn new(mesh: Arc<TetMesh>, space: Space, eliminate_boundary: bool) -> Self {
        let t = mesh.tables();
        let boundary: &[bool] = match space {
            Space::Nedelec => &t.boundary_edges,
            Space::RaviartThomas => &t.boundary_faces,
            Space::Lagrange1 => &t.boundary_vertices,
        };
        let mut entity_dof = Vec::with_capacity(boundary.len());
        let mut dof_entity = Vec::new();
        for (e, &b) in boundary.iter().enumerate() {
            if eliminate_boundary && b {
                entity_dof.push(None);
            } else {
                entity_dof.push(Some(dof_entity.len()));
                dof_entity.push(e);
            }
        }
        Self {
            mesh,
            space,
            eliminate_boundary,
            entity_dof,
            dof_entity,
        }
    }

    /// Interior edges: the space with vanishing tangential trace.
    pub fn nedelec(mesh: Arc<TetMesh>) -> Self {
        Self::new(mesh, Space::Nedelec, true)
    }

    /// Interior vertices: piecewise linears vanishing on the boundary.
    pub fn lagrange1(mesh: Arc<TetMesh>) -> Self {
        Self::new(mesh, Space::Lagrange1, true)
    }

    /// All faces.
    pub fn raviart_thomas(mesh: Arc<TetMesh>) -> Self {
        Self::new(mesh, Space::RaviartThomas, false)
    }

    pub fn mesh(&self) -> &TetMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<TetMesh> {
        &self.mesh
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn eliminates_boundary(&self) -> bool {
        self.eliminate_boundary
    }

    pub fn ndof(&self) -> usize {
        self.dof_entity.len()
    }

    pub fn dof_of_entity(&self, entity: usize) -> Option<usize> {
        self.entity_dof[entity]
    }

    pub fn entity_of_dof(&self, dof: usize) -> usize {
        self.dof_entity[dof]
    }

    pub fn same_mesh(&self, other: &DofSystem) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
            || (self.mesh.n_vertices() == other.mesh.n_vertices()
                && self.mesh.tets() == other.mesh.tets()
                && self.mesh.vertices() == other.mesh.vertices())
    }

    pub fn cell_dofs(&self, cell: usize) -> LocalDofs {
        let t = self.mesh.tables();
        let mut out = LocalDofs {
            dofs: [None; 6],
            signs: [1.0; 6],
            len: self.space.local_dim(),
        };
        match self.space {
            Space::Nedelec => {
                for i in 0..6 {
                    out.dofs[i] = self.entity_dof[t.tet_edges[cell][i]];
                    out.signs[i] = f64::from(t.tet_edge_signs[cell][i]);
                }
            }
            Space::RaviartThomas => {
                for i in 0..4 {
                    out.dofs[i] = self.entity_dof[t.tet_faces[cell][i]];
                    out.signs[i] = f64::from(t.tet_face_signs[cell][i]);
                }
            }
            Space::Lagrange1 => {
                for i in 0..4 {
                    out.dofs[i] = self.entity_dof[self.mesh.tets()[cell][i]];
                }
            }
        }
        out
    }

    pub fn geometry(&self, cell: usize) -> TetGeometry {
        TetGeometry::new(self.mesh.tet_points(cell))
    }

    fn expect(&self, space: Space) -> Result<(), AssemblyError> {
        if self.space == space {
            Ok(())
        } else {
            Err(AssemblyError::WrongSpace {
                expected: space,
                found: self.space,
            })
        }
    }
}

/// Cellwise constant SPD permittivity `ε` and reluctivity `ν = μ⁻¹` with the
/// angular frequency `ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    eps: Vec<Matrix3<f64>>,
    nu: Vec<Matrix3<f64>>,
    omega: f64,
}

fn check_spd(m: &Matrix3<f64>) -> bool {
    let scale = m.abs().max();
    if !m.iter().all(|v| v.is_finite()) || (m - m.transpose()).abs().max() > 1e-14 * scale {
        return false;
    }
    SymmetricEigen::new(m.symmetric_part()).eigenvalues.min() > 0.0
}

fn check_omega(omega: f64) -> Result<(), AssemblyError> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(AssemblyError::InvalidFrequency(omega))
    }
}

impl MaterialField {
    pub fn new(
        eps: Vec<Matrix3<f64>>,
        nu: Vec<Matrix3<f64>>,
        omega: f64,
    ) -> Result<Self, AssemblyError> {
        check_omega(omega)?;
        if eps.len() != nu.len() {
            return Err(AssemblyError::CellCountMismatch {
                material: eps.len(),
                mesh: nu.len(),
            });
        }
        for (cell, (e, n)) in eps.iter().zip(&nu).enumerate() {
            if !check_spd(e) {
                return Err(AssemblyError::NonSpdMaterial {
                    cell,
                    which: "permittivity",
                });
            }
            if !check_spd(n) {
                return Err(AssemblyError::NonSpdMaterial {
                    cell,
                    which: "reluctivity",
                });
            }
        }
        Ok(Self { eps, nu, omega })
    }

    /// Isotropic scalar `ε` and `μ` on every cell of `mesh`.
    pub fn uniform(mesh: &TetMesh, eps: f64, mu: f64, omega: f64) -> Result<Self, AssemblyError> {
        let n = mesh.n_tets();
        Self::new(
            vec![Matrix3::identity() * eps; n],
            vec![Matrix3::identity() / mu; n],
            omega,
        )
    }

    /// Samples tensor-valued `(ε, ν)` at cell centroids.
    pub fn from_fn<F>(mesh: &TetMesh, omega: f64, f: F) -> Result<Self, AssemblyError>
    where
        F: Fn(&Vec3) -> (Matrix3<f64>, Matrix3<f64>),
    {
        let (eps, nu) = (0..mesh.n_tets()).map(|t| f(&mesh.tet_centroid(t))).unzip();
        Self::new(eps, nu, omega)
    }

    /// Copies the parent coefficients onto the cells of a refined mesh.
    pub fn inherit(&self, fine: &TetMesh) -> Result<Self, AssemblyError> {
        let parents = fine.parents().ok_or(AssemblyError::NotRefined)?;
        if parents.iter().any(|&p| p >= self.eps.len()) {
            return Err(AssemblyError::CellCountMismatch {
                material: self.eps.len(),
                mesh: fine.n_tets(),
            });
        }
        Ok(Self {
            eps: parents.iter().map(|&p| self.eps[p]).collect(),
            nu: parents.iter().map(|&p| self.nu[p]).collect(),
            omega: self.omega,
        })
    }

    pub fn with_omega(&self, omega: f64) -> Result<Self, AssemblyError> {
        check_omega(omega)?;
        Ok(Self {
            omega,
            ..self.clone()
        })
    }

    /// Multiplies `ε` by `a` and `ν` by `b`.
    pub fn scaled(&self, a: f64, b: f64) -> Result<Self, AssemblyError> {
        Self::new(
            self.eps.iter().map(|e| e * a).collect(),
            self.nu.iter().map(|n| n * b).collect(),
            self.omega,
        )
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn n_cells(&self) -> usize {
        self.eps.len()
    }

    pub fn eps(&self, cell: usize) -> &Matrix3<f64> {
        &self.eps[cell]
    }

    pub fn nu(&self, cell: usize) -> &Matrix3<f64> {
        &self.nu[cell]
    }

    fn extreme(ms: &[Matrix3<f64>], max: bool) -> f64 {
        let eig = ms.iter().map(|m| SymmetricEigen::new(*m).eigenvalues);
        if max {
            eig.map(|e| e.max()).fold(f64::NEG_INFINITY, f64::max)
        } else {
            eig.map(|e| e.min()).fold(f64::INFINITY, f64::min)
        }
    }

    pub fn eps_max(&self) -> f64 {
        Self::extreme(&self.eps, true)
    }

    pub fn eps_min(&self) -> f64 {
        Self::extreme(&self.eps, false)
    }

    pub fn nu_max(&self) -> f64 {
        Self::extreme(&self.nu, true)
    }

    pub fn nu_min(&self) -> f64 {
        Self::extreme(&self.nu, false)
    }

    /// `√(ν_min / ε_max)`.
    pub fn min_wavespeed(&self) -> f64 {
        (self.nu_min() / self.eps_max()).sqrt()
    }

    fn check_mesh(&self, mesh: &TetMesh) -> Result<(), AssemblyError> {
        if self.n_cells() == mesh.n_tets() {
            Ok(())
        } else {
            Err(AssemblyError::CellCountMismatch {
                material: self.n_cells(),
                mesh: mesh.n_tets(),
            })
        }
    }
}

/// Cellwise bilinear forms available for assembly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BilinearForm {
    /// `(ε u, v)` on Nédélec.
    Mass,
    /// `(ν curl u, curl v)` on Nédélec.
    CurlCurl,
    /// `(ε ∇u, ∇v)` on Lagrange.
    Stiffness,
    /// `(u, v)` on Lagrange.
    ScalarMass,
}

impl BilinearForm {
    fn space(self) -> Space {
        match self {
            BilinearForm::Mass | BilinearForm::CurlCurl => Space::Nedelec,
            BilinearForm::Stiffness | BilinearForm::ScalarMass => Space::Lagrange1,
        }
    }
}

type LocalMatrix = [[f64; 6]; 6];

/// `∫ λa λb = |K| (1 + δab) / 20`.
fn bary_mass(volume: f64, a: usize, b: usize) -> f64 {
    volume * if a == b { 2.0 } else { 1.0 } / 20.0
}

/// Local matrix in the local (unsigned) basis; exact for constant
/// coefficients.
pub fn local_matrix(
    form: BilinearForm,
    geo: &TetGeometry,
    eps: &Matrix3<f64>,
    nu: &Matrix3<f64>,
) -> LocalMatrix {
    let mut m = [[0.0; 6]; 6];
    let g = &geo.grads;
    let vol = geo.volume;
    let n = form.space().local_dim();
    for i in 0..n {
        for j in i..n {
            let v = match form {
                BilinearForm::Mass => {
                    let [a, b] = LOCAL_EDGES[i];
                    let [c, d] = LOCAL_EDGES[j];
                    let e = |p: usize, q: usize| g[p].dot(&(eps * g[q]));
                    bary_mass(vol, a, c) * e(b, d)
                        - bary_mass(vol, a, d) * e(b, c)
                        - bary_mass(vol, b, c) * e(a, d)
                        + bary_mass(vol, b, d) * e(a, c)
                }
                BilinearForm::CurlCurl => {
                    let c = geo.whitney_curls();
                    vol * c[i].dot(&(nu * c[j]))
                }
                BilinearForm::Stiffness => vol * g[i].dot(&(eps * g[j])),
                BilinearForm::ScalarMass => bary_mass(vol, i, j),
            };
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

/// Assembles `form`, visiting cells in `cell_order` (all cells in index
/// order when `None`). Local matrices are computed in parallel; the
/// accumulation is sequential in visiting order.
pub fn assemble_form(
    dofs: &DofSystem,
    mat: &MaterialField,
    form: BilinearForm,
    cell_order: Option<&[usize]>,
) -> Result<SparseSymmetricMatrix, AssemblyError> {
    dofs.expect(form.space())?;
    mat.check_mesh(dofs.mesh())?;
    let default_order: Vec<usize>;
    let order = match cell_order {
        Some(o) => o,
        None => {
            default_order = (0..dofs.mesh().n_tets()).collect();
            &default_order
        }
    };
    let locals: Vec<LocalMatrix> = order
        .par_iter()
        .map(|&t| local_matrix(form, &dofs.geometry(t), mat.eps(t), mat.nu(t)))
        .collect();
    let n = form.space().local_dim();
    let mut triplets = Vec::with_capacity(order.len() * n * n);
    for (&t, local) in order.iter().zip(&locals) {
        let ld = dofs.cell_dofs(t);
        for i in 0..n {
            let Some(gi) = ld.dofs[i] else { continue };
            for j in 0..n {
                let Some(gj) = ld.dofs[j] else { continue };
                triplets.push((gi, gj, ld.signs[i] * ld.signs[j] * local[i][j]));
            }
        }
    }
    Ok(SparseSymmetricMatrix::from_triplets_stable(
        dofs.ndof(),
        triplets,
    ))
}

/// Nédélec mass matrix `M_ij = (ε w_j, w_i)`.
pub fn assemble_mass(
    dofs: &DofSystem,
    mat: &MaterialField,
) -> Result<SparseSymmetricMatrix, AssemblyError> {
    assemble_form(dofs, mat, BilinearForm::Mass, None)
}

/// Curl-curl matrix `Kc_ij = (ν curl w_j, curl w_i)`.
pub fn assemble_curlcurl(
    dofs: &DofSystem,
    mat: &MaterialField,
) -> Result<SparseSymmetricMatrix, AssemblyError> {
    assemble_form(dofs, mat, BilinearForm::CurlCurl, None)
}

/// Lagrange stiffness `(ε ∇φ_j, ∇φ_i)`.
pub fn assemble_stiffness(
    dofs: &DofSystem,
    mat: &MaterialField,
) -> Result<SparseSymmetricMatrix, AssemblyError> {
    assemble_form(dofs, mat, BilinearForm::Stiffness, None)
}

/// `(B, N)` with `B = Kc − ω²M` and `N = Kc + ω²M`.
pub fn assemble_b(
    dofs: &DofSystem,
    mat: &MaterialField,
) -> Result<(SparseSymmetricMatrix, SparseSymmetricMatrix), AssemblyError> {
    let m = MaxwellMatrices::assemble(dofs, mat)?;
    Ok((m.b, m.n))
}

/// All matrices of the discrete Maxwell problem on one mesh.
#[derive(Debug, Clone)]
pub struct MaxwellMatrices {
    pub omega: f64,
    pub mass: SparseSymmetricMatrix,
    pub curlcurl: SparseSymmetricMatrix,
    pub b: SparseSymmetricMatrix,
    pub n: SparseSymmetricMatrix,
}

impl MaxwellMatrices {
    pub fn assemble(dofs: &DofSystem, mat: &MaterialField) -> Result<Self, AssemblyError> {
        let mass = assemble_mass(dofs, mat)?;
        let curlcurl = assemble_curlcurl(dofs, mat)?;
        let w2 = mat.omega() * mat.omega();
        let b = curlcurl.add(1.0, &mass, -w2);
        let n = curlcurl.add(1.0, &mass, w2);
        Ok(Self {
            omega: mat.omega(),
            mass,
            curlcurl,
            b,
            n,
        })
    }

    /// `|||v|||² = ω²‖v‖²_ε + ‖curl v‖²_ν`.
    pub fn energy_sq(&self, v: &[f64]) -> f64 {
        self.omega * self.omega * self.mass.quadratic_form(v) + self.curlcurl.quadratic_form(v)
    }
}

/// Signed vertex-to-edge incidence: the Nédélec field with coefficients
/// `G p` is the gradient of the Lagrange field with coefficients `p`.
pub fn gradient_map(lagrange: &DofSystem, nedelec: &DofSystem) -> Result<CsrMatrix, AssemblyError> {
    lagrange.expect(Space::Lagrange1)?;
    nedelec.expect(Space::Nedelec)?;
    if !lagrange.same_mesh(nedelec) {
        return Err(AssemblyError::MeshMismatch);
    }
    let mut triplets = Vec::with_capacity(2 * nedelec.ndof());
    for row in 0..nedelec.ndof() {
        let [a, b] = nedelec.mesh().edges()[nedelec.entity_of_dof(row)];
        if let Some(c) = lagrange.dof_of_entity(a) {
            triplets.push((row, c, -1.0));
        }
        if let Some(c) = lagrange.dof_of_entity(b) {
            triplets.push((row, c, 1.0));
        }
    }
    Ok(CsrMatrix::from_triplets(
        nedelec.ndof(),
        lagrange.ndof(),
        triplets,
    ))
}

/// Signed edge-to-face incidence: the Raviart–Thomas field with
/// coefficients `C u` is the curl of the Nédélec field with coefficients
/// `u`. Face `(i, j, k)` is oriented by `(xj − xi) × (xk − xi)`.
pub fn curl_map(nedelec: &DofSystem, rt: &DofSystem) -> Result<CsrMatrix, AssemblyError> {
    nedelec.expect(Space::Nedelec)?;
    rt.expect(Space::RaviartThomas)?;
    if !nedelec.same_mesh(rt) {
        return Err(AssemblyError::MeshMismatch);
    }
    let mesh = rt.mesh();
    let edge_index: std::collections::HashMap<[usize; 2], usize> = mesh
        .edges()
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i))
        .collect();
    let mut triplets = Vec::with_capacity(3 * rt.ndof());
    for row in 0..rt.ndof() {
        let [i, j, k] = mesh.faces()[rt.entity_of_dof(row)];
        for (e, s) in [([i, j], 1.0), ([j, k], 1.0), ([i, k], -1.0)] {
            if let Some(c) = nedelec.dof_of_entity(edge_index[&e]) {
                triplets.push((row, c, s));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(
        rt.ndof(),
        nedelec.ndof(),
        triplets,
    ))
}

/// Load vector `L_i = ∫ J · w_i` by the quadrature rule of the given order.
pub fn assemble_load<F>(
    dofs: &DofSystem,
    mat: &MaterialField,
    j: F,
    order: usize,
) -> Result<Vec<f64>, AssemblyError>
where
    F: Fn(&Vec3) -> Vec3 + Sync,
{
    dofs.expect(Space::Nedelec)?;
    mat.check_mesh(dofs.mesh())?;
    let rule = quadrature(order)?;
    let locals: Vec<[f64; 6]> = (0..dofs.mesh().n_tets())
        .into_par_iter()
        .map(|t| {
            let geo = dofs.geometry(t);
            let mut out = [0.0; 6];
            for (bary, w) in rule.points.iter().zip(&rule.weights) {
                let jx = j(&geo.point(bary));
                let wh = geo.whitney(bary);
                for i in 0..6 {
                    out[i] += w * 6.0 * geo.volume * jx.dot(&wh[i]);
                }
            }
            out
        })
        .collect();
    let mut load = vec![0.0; dofs.ndof()];
    for (t, local) in locals.iter().enumerate() {
        for (i, g, s) in dofs.cell_dofs(t).iter() {
            if let Some(g) = g {
                load[g] += s * local[i];
            }
        }
    }
    Ok(load)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_mesh, BoxDomain};

    fn unit(n: usize) -> Arc<TetMesh> {
        Arc::new(build_box_mesh(n, BoxDomain::unit_cube()).unwrap())
    }

    #[test]
    fn dof_counts() {
        let m = unit(2);
        assert_eq!(DofSystem::nedelec(m.clone()).ndof(), m.n_interior_edges());
        assert_eq!(DofSystem::lagrange1(m.clone()).ndof(), 1);
        assert_eq!(DofSystem::raviart_thomas(m.clone()).ndof(), m.n_faces());
        assert_eq!(DofSystem::nedelec(unit(1)).ndof(), 1);
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let geo = TetGeometry::new([
            Vec3::new(0.1, 0.0, 0.2),
            Vec3::new(1.0, 0.3, 0.0),
            Vec3::new(0.2, 0.9, 0.1),
            Vec3::new(0.3, 0.2, 1.1),
        ]);
        let eps = Matrix3::new(2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0);
        let local = local_matrix(BilinearForm::Mass, &geo, &eps, &Matrix3::identity());
        let rule = quadrature(2).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let q: f64 = rule.integrate(&geo, |b, _| {
                    let w = geo.whitney(b);
                    w[i].dot(&(eps * w[j]))
                });
                assert!((q - local[i][j]).abs() < 1e-13, "{i} {j}");
            }
        }
        let local = local_matrix(BilinearForm::ScalarMass, &geo, &eps, &eps);
        for i in 0..4 {
            for j in 0..4 {
                let q: f64 = rule.integrate(&geo, |b, _| b[i] * b[j]);
                assert!((q - local[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_material() {
        let m = unit(1);
        assert!(matches!(
            MaterialField::uniform(&m, 1.0, 1.0, 0.0),
            Err(AssemblyError::InvalidFrequency(_))
        ));
        assert!(matches!(
            MaterialField::uniform(&m, -1.0, 1.0, 1.0),
            Err(AssemblyError::NonSpdMaterial {
                which: "permittivity",
                ..
            })
        ));
        let mut eps = vec![Matrix3::identity(); m.n_tets()];
        eps[3][(0, 1)] = 0.5;
        assert!(MaterialField::new(eps, vec![Matrix3::identity(); m.n_tets()], 1.0).is_err());
    }

    #[test]
    fn gradient_map_is_incidence() {
        let m = unit(2);
        let g = gradient_map(
            &DofSystem::lagrange1(m.clone()),
            &DofSystem::nedelec(m.clone()),
        )
        .unwrap();
        assert!(g.triplets().all(|(_, _, v)| v == 1.0 || v == -1.0));
        let other = unit(2);
        assert_eq!(
            gradient_map(&DofSystem::lagrange1(m), &DofSystem::nedelec(unit(1))).unwrap_err(),
            AssemblyError::MeshMismatch
        );
        assert!(gradient_map(
            &DofSystem::lagrange1(other.clone()),
            &DofSystem::nedelec(other)
        )
        .is_ok());
    }

    #[test]
    fn inherit_copies_parent_values() {
        let m = unit(1);
        let fine = crate::mesh::uniform_refine(&m).unwrap();
        let mat = MaterialField::from_fn(&m, 1.0, |x| {
            (Matrix3::identity() * (1.0 + x.x), Matrix3::identity())
        })
        .unwrap();
        let f = mat.inherit(&fine).unwrap();
        for t in 0..fine.n_tets() {
            assert_eq!(f.eps(t), mat.eps(t / 8));
        }
        assert_eq!(mat.inherit(&m).unwrap_err(), AssemblyError::NotRefined);
    }
}
