//! Conforming tetrahedral meshes of axis-aligned boxes.
//!
//! Boxes are split into `n³` cubes and every cube into the six Kuhn
//! (Freudenthal) simplices sharing its main diagonal. Uniform refinement
//! follows Bey's red rule applied in Kuhn vertex order, so every child is
//! again a Kuhn simplex of the halved grid and the shape of the elements
//! never degrades across levels.
//!
//! Edges and faces carry a global orientation given by their sorted vertex
//! indices. Every tet stores, for each local edge and face, the sign relating
//! its local orientation to the global one.

use std::collections::HashMap;

use nalgebra::Vector3;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Local edges of a tetrahedron as pairs of local vertex indices.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Local faces of a tetrahedron; face `i` is opposite to local vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("number of cells per axis must be at least 1")]
    InvalidResolution,
    #[error("box [{min:?}, {max:?}] has no interior")]
    DegenerateBox { min: [f64; 3], max: [f64; 3] },
    #[error("tet {0} has zero volume")]
    DegenerateTet(usize),
    #[error("tet {tet} references vertex {vertex} out of range")]
    VertexOutOfRange { tet: usize, vertex: usize },
    #[error("non-conforming mesh: {0}")]
    NonConforming(String),
    #[error("meshes are not nested: {0}")]
    NotNested(String),
}

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl BoxDomain {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self, MeshError> {
        let ok = (0..3).all(|d| min[d].is_finite() && max[d].is_finite() && max[d] > min[d]);
        if ok {
            Ok(Self { min, max })
        } else {
            Err(MeshError::DegenerateBox { min, max })
        }
    }

    pub fn unit_cube() -> Self {
        Self {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|d| self.max[d] - self.min[d]).product()
    }

    /// Uniform scaling of the box about the origin.
    pub fn scaled(&self, factor: f64) -> Result<Self, MeshError> {
        Self::new(self.min.map(|v| v * factor), self.max.map(|v| v * factor))
    }
}

/// Orientation and boundary bookkeeping derived from a tet list.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityTables {
    /// Edges `(i, j)` with `i < j`, sorted lexicographically.
    pub edges: Vec<[usize; 2]>,
    /// Faces `(i, j, k)` with `i < j < k`, sorted lexicographically.
    pub faces: Vec<[usize; 3]>,
    pub tet_edges: Vec<[usize; 6]>,
    /// `+1` when the local edge `(a, b)` of [`LOCAL_EDGES`] runs from the
    /// smaller to the larger global vertex index.
    pub tet_edge_signs: Vec<[i8; 6]>,
    pub tet_faces: Vec<[usize; 4]>,
    /// `+1` when the global face normal `(x_j - x_i) × (x_k - x_i)` points out
    /// of the tet.
    pub tet_face_signs: Vec<[i8; 4]>,
    pub boundary_vertices: Vec<bool>,
    pub boundary_edges: Vec<bool>,
    pub boundary_faces: Vec<bool>,
}

/// Builds edge/face tables with orientation signs and boundary flags.
///
/// Fails when a face is shared by more than two tets or when the boundary
/// surface is not closed, which is what hanging nodes produce.
pub fn entity_tables(vertices: &[Vec3], tets: &[[usize; 4]]) -> Result<EntityTables, MeshError> {
    for (t, tet) in tets.iter().enumerate() {
        if let Some(&v) = tet.iter().find(|&&v| v >= vertices.len()) {
            return Err(MeshError::VertexOutOfRange { tet: t, vertex: v });
        }
    }

    let mut edge_set: Vec<[usize; 2]> = tets
        .iter()
        .flat_map(|tet| {
            LOCAL_EDGES
                .iter()
                .map(move |&[a, b]| sorted2(tet[a], tet[b]))
        })
        .collect();
    edge_set.sort_unstable();
    edge_set.dedup();
    let edge_index: HashMap<[usize; 2], usize> =
        edge_set.iter().enumerate().map(|(i, &e)| (e, i)).collect();

    let mut face_set: Vec<[usize; 3]> = tets
        .iter()
        .flat_map(|tet| {
            LOCAL_FACES
                .iter()
                .map(move |&[a, b, c]| sorted3(tet[a], tet[b], tet[c]))
        })
        .collect();
    face_set.sort_unstable();
    face_set.dedup();
    let face_index: HashMap<[usize; 3], usize> =
        face_set.iter().enumerate().map(|(i, &f)| (f, i)).collect();

    let mut tet_edges = Vec::with_capacity(tets.len());
    let mut tet_edge_signs = Vec::with_capacity(tets.len());
    let mut tet_faces = Vec::with_capacity(tets.len());
    let mut tet_face_signs = Vec::with_capacity(tets.len());
    let mut face_count = vec![0usize; face_set.len()];

    for tet in tets {
        let mut te = [0; 6];
        let mut ts = [0i8; 6];
        for (l, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
            te[l] = edge_index[&sorted2(tet[a], tet[b])];
            ts[l] = if tet[a] < tet[b] { 1 } else { -1 };
        }
        let mut tf = [0; 4];
        let mut fs = [0i8; 4];
        for (l, &[a, b, c]) in LOCAL_FACES.iter().enumerate() {
            let key = sorted3(tet[a], tet[b], tet[c]);
            let f = face_index[&key];
            tf[l] = f;
            face_count[f] += 1;
            let [i, j, k] = key;
            let normal = (vertices[j] - vertices[i]).cross(&(vertices[k] - vertices[i]));
            let centroid = (vertices[i] + vertices[j] + vertices[k]) / 3.0;
            let outward = centroid - vertices[tet[l]];
            fs[l] = if normal.dot(&outward) > 0.0 { 1 } else { -1 };
        }
        tet_edges.push(te);
        tet_edge_signs.push(ts);
        tet_faces.push(tf);
        tet_face_signs.push(fs);
    }

    if let Some(f) = face_count.iter().position(|&c| c > 2) {
        return Err(MeshError::NonConforming(format!(
            "face {:?} is shared by {} tets",
            face_set[f], face_count[f]
        )));
    }

    let boundary_faces: Vec<bool> = face_count.iter().map(|&c| c == 1).collect();
    let mut boundary_edges = vec![false; edge_set.len()];
    let mut boundary_vertices = vec![false; vertices.len()];
    let mut boundary_edge_uses = vec![0usize; edge_set.len()];
    for (face, _) in face_set.iter().zip(&boundary_faces).filter(|(_, b)| **b) {
        let [i, j, k] = *face;
        for e in [[i, j], [i, k], [j, k]] {
            let idx = edge_index[&e];
            boundary_edges[idx] = true;
            boundary_edge_uses[idx] += 1;
        }
        for v in face {
            boundary_vertices[*v] = true;
        }
    }
    if let Some(e) = boundary_edge_uses.iter().position(|&c| c != 0 && c != 2) {
        return Err(MeshError::NonConforming(format!(
            "boundary surface is not closed at edge {:?}",
            edge_set[e]
        )));
    }

    Ok(EntityTables {
        edges: edge_set,
        faces: face_set,
        tet_edges,
        tet_edge_signs,
        tet_faces,
        tet_face_signs,
        boundary_vertices,
        boundary_edges,
        boundary_faces,
    })
}

fn sorted2(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn sorted3(a: usize, b: usize, c: usize) -> [usize; 3] {
    let mut s = [a, b, c];
    s.sort_unstable();
    s
}

/// Signed volume of the tet `(p0, p1, p2, p3)`.
pub fn signed_volume(p: [&Vec3; 4]) -> f64 {
    (p[1] - p[0]).cross(&(p[2] - p[0])).dot(&(p[3] - p[0])) / 6.0
}

/// Immutable conforming tetrahedral mesh.
#[derive(Debug, Clone)]
pub struct TetMesh {
    vertices: Vec<Vec3>,
    /// Positively oriented vertex tuples.
    tets: Vec<[usize; 4]>,
    /// Vertex tuples in Kuhn path order, driving red refinement.
    kuhn_order: Vec<[usize; 4]>,
    tables: EntityTables,
    /// Parent tet in the mesh this one was refined from.
    parents: Option<Vec<usize>>,
    domain: BoxDomain,
    h: f64,
}

impl TetMesh {
    fn from_kuhn(
        vertices: Vec<Vec3>,
        kuhn_order: Vec<[usize; 4]>,
        parents: Option<Vec<usize>>,
        domain: BoxDomain,
    ) -> Result<Self, MeshError> {
        let mut tets = Vec::with_capacity(kuhn_order.len());
        for (t, k) in kuhn_order.iter().enumerate() {
            let vol = signed_volume([
                &vertices[k[0]],
                &vertices[k[1]],
                &vertices[k[2]],
                &vertices[k[3]],
            ]);
            if vol == 0.0 {
                return Err(MeshError::DegenerateTet(t));
            }
            tets.push(if vol > 0.0 {
                *k
            } else {
                [k[0], k[1], k[3], k[2]]
            });
        }
        let tables = entity_tables(&vertices, &tets)?;
        let h = tets
            .iter()
            .map(|tet| {
                LOCAL_EDGES
                    .iter()
                    .map(|&[a, b]| (vertices[tet[a]] - vertices[tet[b]]).norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        Ok(Self {
            vertices,
            tets,
            kuhn_order,
            tables,
            parents,
            domain,
            h,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.tables.edges
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.tables.faces
    }

    pub fn tables(&self) -> &EntityTables {
        &self.tables
    }

    pub fn domain(&self) -> BoxDomain {
        self.domain
    }

    /// Maximum tet diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn n_edges(&self) -> usize {
        self.tables.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.tables.faces.len()
    }

    /// Parent of every tet when this mesh came out of [`uniform_refine`].
    pub fn parents(&self) -> Option<&[usize]> {
        self.parents.as_deref()
    }

    pub fn tet_points(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let p = self.tet_points(t);
        signed_volume([&p[0], &p[1], &p[2], &p[3]])
    }

    pub fn tet_centroid(&self, t: usize) -> Vec3 {
        let p = self.tet_points(t);
        (p[0] + p[1] + p[2] + p[3]) / 4.0
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_faces() as i64
            - self.n_tets() as i64
    }

    pub fn n_interior_vertices(&self) -> usize {
        self.tables
            .boundary_vertices
            .iter()
            .filter(|b| !**b)
            .count()
    }

    pub fn n_interior_edges(&self) -> usize {
        self.tables.boundary_edges.iter().filter(|b| !**b).count()
    }

    /// Index of the tet containing `x`, by brute-force barycentric search.
    pub fn locate(&self, x: &Vec3) -> Option<usize> {
        (0..self.n_tets()).find(|&t| {
            let geo = crate::elements::TetGeometry::new(self.tet_points(t));
            geo.barycentric(x).iter().all(|&l| l >= -1e-12)
        })
    }
}

/// Freudenthal subdivision of `domain` into `n³` cubes of six tets each.
pub fn build_box_mesh(n: usize, domain: BoxDomain) -> Result<TetMesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidResolution);
    }
    let domain = BoxDomain::new(domain.min, domain.max)?;
    let np = n + 1;
    let index = |i: usize, j: usize, k: usize| i + np * (j + np * k);
    let mut vertices = Vec::with_capacity(np * np * np);
    for k in 0..np {
        for j in 0..np {
            for i in 0..np {
                let ijk = [i, j, k];
                vertices.push(Vec3::from_fn(|d, _| {
                    let s = ijk[d] as f64 / n as f64;
                    domain.min[d] + s * (domain.max[d] - domain.min[d])
                }));
            }
        }
    }
    const PERMUTATIONS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut kuhn = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for perm in PERMUTATIONS {
                    let mut c = [i, j, k];
                    let mut path = [index(c[0], c[1], c[2]); 4];
                    for (step, &axis) in perm.iter().enumerate() {
                        c[axis] += 1;
                        path[step + 1] = index(c[0], c[1], c[2]);
                    }
                    kuhn.push(path);
                }
            }
        }
    }
    TetMesh::from_kuhn(vertices, kuhn, None, domain)
}

/// Red refinement: every tet is split into eight children.
///
/// Vertices of the refined mesh are the parent vertices followed by one
/// midpoint per parent edge (in parent edge order). Children of parent `p`
/// are stored at `8p..8p + 8`.
pub fn uniform_refine(mesh: &TetMesh) -> Result<TetMesh, MeshError> {
    let nv = mesh.n_vertices();
    let mut vertices = mesh.vertices.clone();
    vertices.extend(
        mesh.edges()
            .iter()
            .map(|&[a, b]| (mesh.vertices[a] + mesh.vertices[b]) * 0.5),
    );
    let edge_index: HashMap<[usize; 2], usize> = mesh
        .edges()
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i))
        .collect();
    let mid = |a: usize, b: usize| nv + edge_index[&sorted2(a, b)];

    let mut kuhn = Vec::with_capacity(8 * mesh.n_tets());
    let mut parents = Vec::with_capacity(8 * mesh.n_tets());
    for (p, &[x0, x1, x2, x3]) in mesh.kuhn_order.iter().enumerate() {
        let (x01, x02, x03) = (mid(x0, x1), mid(x0, x2), mid(x0, x3));
        let (x12, x13, x23) = (mid(x1, x2), mid(x1, x3), mid(x2, x3));
        kuhn.extend_from_slice(&[
            [x0, x01, x02, x03],
            [x01, x1, x12, x13],
            [x02, x12, x2, x23],
            [x03, x13, x23, x3],
            [x01, x02, x03, x13],
            [x01, x02, x12, x13],
            [x02, x03, x13, x23],
            [x02, x12, x13, x23],
        ]);
        parents.extend(std::iter::repeat_n(p, 8));
    }
    TetMesh::from_kuhn(vertices, kuhn, Some(parents), mesh.domain)
}

/// Sequence of meshes where each level is the red refinement of the previous
/// one.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    levels: Vec<TetMesh>,
}

impl MeshHierarchy {
    pub fn new(base: TetMesh, refinements: usize) -> Result<Self, MeshError> {
        let mut levels = vec![base];
        for _ in 0..refinements {
            let next = uniform_refine(levels.last().unwrap())?;
            levels.push(next);
        }
        Ok(Self { levels })
    }

    pub fn coarse(&self) -> &TetMesh {
        &self.levels[0]
    }

    pub fn finest(&self) -> &TetMesh {
        self.levels.last().unwrap()
    }

    pub fn levels(&self) -> &[TetMesh] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    /// Ancestor in level 0 of every tet of the finest level.
    pub fn coarse_ancestors(&self) -> Vec<usize> {
        let mut anc: Vec<usize> = (0..self.finest().n_tets()).collect();
        for level in self.levels[1..].iter().rev() {
            let parents = level.parents().expect("refined level has parents");
            for a in anc.iter_mut() {
                *a = parents[*a];
            }
        }
        anc
    }
}
