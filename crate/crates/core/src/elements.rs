//! Lowest-order finite elements of the de Rham complex on tetrahedra and
//! quadrature rules.
//!
//! All basis functions are written in barycentric coordinates, which makes
//! the physical-element formulas coincide with the covariant (edge) and
//! contravariant (face) Piola maps of the reference functions.

use nalgebra::Matrix3;
use thiserror::Error;

use crate::mesh::{Vec3, LOCAL_EDGES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ElementError {
    #[error("point {0:?} lies outside the reference tetrahedron")]
    OutsideReference([f64; 3]),
    #[error("no quadrature rule of order {0} (supported: 1..=6)")]
    UnsupportedOrder(usize),
}

/// Element families of the lowest-order discrete de Rham complex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Family {
    /// Nédélec first kind, lowest order (Whitney 1-forms), one function per edge.
    Nedelec0,
    /// Raviart–Thomas, lowest order (Whitney 2-forms), one function per face.
    RaviartThomas0,
    Lagrange1,
    Lagrange2,
}

impl Family {
    pub fn dim(self) -> usize {
        match self {
            Family::Nedelec0 => 6,
            Family::RaviartThomas0 | Family::Lagrange1 => 4,
            Family::Lagrange2 => 10,
        }
    }
}

/// Affine tetrahedron with precomputed barycentric gradients.
#[derive(Debug, Clone)]
pub struct TetGeometry {
    pub points: [Vec3; 4],
    /// Gradients of the barycentric coordinates, constant on the tet.
    pub grads: [Vec3; 4],
    /// Unsigned volume.
    pub volume: f64,
    jacobian: Matrix3<f64>,
    inverse: Matrix3<f64>,
}

impl TetGeometry {
    pub fn new(points: [Vec3; 4]) -> Self {
        let jacobian = Matrix3::from_columns(&[
            points[1] - points[0],
            points[2] - points[0],
            points[3] - points[0],
        ]);
        let inverse = jacobian.try_inverse().expect("degenerate tetrahedron");
        // rows of J^{-1} are the gradients of λ1, λ2, λ3
        let g1 = inverse.row(0).transpose();
        let g2 = inverse.row(1).transpose();
        let g3 = inverse.row(2).transpose();
        let g0 = -(g1 + g2 + g3);
        Self {
            points,
            grads: [g0, g1, g2, g3],
            volume: jacobian.determinant().abs() / 6.0,
            jacobian,
            inverse,
        }
    }

    pub fn reference() -> Self {
        Self::new([Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()])
    }

    pub fn jacobian(&self) -> &Matrix3<f64> {
        &self.jacobian
    }

    pub fn point(&self, bary: &[f64; 4]) -> Vec3 {
        self.points[0] * bary[0]
            + self.points[1] * bary[1]
            + self.points[2] * bary[2]
            + self.points[3] * bary[3]
    }

    pub fn barycentric(&self, x: &Vec3) -> [f64; 4] {
        let r = self.inverse * (x - self.points[0]);
        [1.0 - r.x - r.y - r.z, r.x, r.y, r.z]
    }

    /// Whitney edge functions `λa∇λb − λb∇λa` for the local edges, oriented
    /// from the lower to the higher local vertex index.
    pub fn whitney(&self, bary: &[f64; 4]) -> [Vec3; 6] {
        LOCAL_EDGES.map(|[a, b]| self.grads[b] * bary[a] - self.grads[a] * bary[b])
    }

    /// Curls `2∇λa × ∇λb` of the Whitney edge functions.
    pub fn whitney_curls(&self) -> [Vec3; 6] {
        LOCAL_EDGES.map(|[a, b]| self.grads[a].cross(&self.grads[b]) * 2.0)
    }

    /// Lowest-order Raviart–Thomas functions with unit outward flux through
    /// the face opposite to each local vertex.
    pub fn raviart_thomas(&self, x: &Vec3) -> [Vec3; 4] {
        let scale = 1.0 / (3.0 * self.volume);
        self.points.map(|p| (x - p) * scale)
    }

    pub fn raviart_thomas_divergence(&self) -> f64 {
        1.0 / self.volume
    }
}

/// Values and first derivatives of a basis at one point.
#[derive(Debug, Clone, PartialEq)]
pub enum Tabulation {
    Scalar {
        values: Vec<f64>,
        gradients: Vec<Vec3>,
    },
    Edge {
        values: Vec<Vec3>,
        curls: Vec<Vec3>,
    },
    Face {
        values: Vec<Vec3>,
        divergences: Vec<f64>,
    },
}

impl Tabulation {
    pub fn len(&self) -> usize {
        match self {
            Tabulation::Scalar { values, .. } => values.len(),
            Tabulation::Edge { values, .. } | Tabulation::Face { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Basis on the reference tetrahedron `{x, y, z ≥ 0, x + y + z ≤ 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceBasis {
    pub family: Family,
}

impl ReferenceBasis {
    pub fn new(family: Family) -> Self {
        Self { family }
    }

    pub fn eval(&self, point: [f64; 3]) -> Result<Tabulation, ElementError> {
        let [x, y, z] = point;
        let bary = [1.0 - x - y - z, x, y, z];
        if bary.iter().any(|&l| l < -1e-12) {
            return Err(ElementError::OutsideReference(point));
        }
        Ok(tabulate(self.family, &TetGeometry::reference(), &bary))
    }
}

/// Tabulates a family on a physical tet at barycentric coordinates `bary`.
pub fn tabulate(family: Family, geo: &TetGeometry, bary: &[f64; 4]) -> Tabulation {
    let g = &geo.grads;
    match family {
        Family::Lagrange1 => Tabulation::Scalar {
            values: bary.to_vec(),
            gradients: g.to_vec(),
        },
        Family::Lagrange2 => {
            let mut values: Vec<f64> = bary.iter().map(|&l| l * (2.0 * l - 1.0)).collect();
            let mut gradients: Vec<Vec3> = (0..4).map(|i| g[i] * (4.0 * bary[i] - 1.0)).collect();
            for [a, b] in LOCAL_EDGES {
                values.push(4.0 * bary[a] * bary[b]);
                gradients.push((g[b] * bary[a] + g[a] * bary[b]) * 4.0);
            }
            Tabulation::Scalar { values, gradients }
        }
        Family::Nedelec0 => Tabulation::Edge {
            values: geo.whitney(bary).to_vec(),
            curls: geo.whitney_curls().to_vec(),
        },
        Family::RaviartThomas0 => Tabulation::Face {
            values: geo.raviart_thomas(&geo.point(bary)).to_vec(),
            divergences: vec![geo.raviart_thomas_divergence(); 4],
        },
    }
}

/// Quadrature on the reference tetrahedron in barycentric coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 4]>,
    /// Positive weights summing to the reference volume 1/6.
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Integrates `f` over the physical tet `geo`.
    pub fn integrate<T, F>(&self, geo: &TetGeometry, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(&[f64; 4], Vec3) -> T,
    {
        let scale = 6.0 * geo.volume;
        self.points
            .iter()
            .zip(&self.weights)
            .fold(T::default(), |acc, (b, &w)| {
                acc + f(b, geo.point(b)) * (w * scale)
            })
    }
}

/// Stroud conical-product rule exact for polynomials of total degree
/// `order` on the tetrahedron.
pub fn quadrature(order: usize) -> Result<QuadratureRule, ElementError> {
    if !(1..=6).contains(&order) {
        return Err(ElementError::UnsupportedOrder(order));
    }
    let k = (order + 1).div_ceil(2);
    let (u, wu) = gauss_jacobi01(k, 2.0);
    let (v, wv) = gauss_jacobi01(k, 1.0);
    let (w, ww) = gauss_jacobi01(k, 0.0);
    let mut points = Vec::with_capacity(k * k * k);
    let mut weights = Vec::with_capacity(k * k * k);
    for i in 0..k {
        for j in 0..k {
            for l in 0..k {
                let x = u[i];
                let y = (1.0 - u[i]) * v[j];
                let z = (1.0 - u[i]) * (1.0 - v[j]) * w[l];
                points.push([1.0 - x - y - z, x, y, z]);
                weights.push(wu[i] * wv[j] * ww[l]);
            }
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        degree: order,
    })
}

/// Gauss–Jacobi nodes and weights on `[0, 1]` for the weight `(1 − x)^alpha`,
/// via the Golub–Welsch eigenvalue formulation.
pub fn gauss_jacobi01(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let beta = 0.0;
    let ab = alpha + beta;
    let diag = |k: usize| {
        let k = k as f64;
        if k == 0.0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
        }
    };
    let off = |k: usize| {
        let k = k as f64;
        let s = 2.0 * k + ab;
        (4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))).sqrt()
    };
    let jac = faer::Mat::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            diag(i)
        } else if i == j + 1 {
            off(i)
        } else if j == i + 1 {
            off(j)
        } else {
            0.0
        }
    });
    let evd = jac
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("tiny tridiagonal eigenproblem");
    // ∫_{-1}^{1} (1-t)^alpha dt, then mapped to [0, 1]
    let mu0 = 2f64.powf(alpha + 1.0) / (alpha + 1.0);
    let to_unit = 2f64.powf(-alpha - 1.0);
    let s = evd.S();
    let u = evd.U();
    let nodes = (0..n).map(|i| 0.5 * (1.0 + s[i])).collect();
    let weights = (0..n)
        .map(|i| mu0 * u[(0, i)] * u[(0, i)] * to_unit)
        .collect();
    (nodes, weights)
}

/// Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre01(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi01(n, 0.0)
}

/// Quadrature on the reference triangle `{s, t ≥ 0, s + t ≤ 1}` in
/// barycentric coordinates; weights sum to one (area-normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl TriangleRule {
    /// Six-point symmetric rule of degree 4 (Dunavant).
    pub fn degree4() -> Self {
        const A1: f64 = 0.445_948_490_915_965;
        const W1: f64 = 0.223_381_589_678_011;
        const A2: f64 = 0.091_576_213_509_771;
        const W2: f64 = 0.109_951_743_655_322;
        let b1 = 1.0 - 2.0 * A1;
        let b2 = 1.0 - 2.0 * A2;
        Self {
            points: vec![
                [b1, A1, A1],
                [A1, b1, A1],
                [A1, A1, b1],
                [b2, A2, A2],
                [A2, b2, A2],
                [A2, A2, b2],
            ],
            weights: vec![W1, W1, W1, W2, W2, W2],
            degree: 4,
        }
    }

    /// Collapsed Gauss rule exact to the requested degree.
    pub fn collapsed(degree: usize) -> Self {
        let k = (degree + 1).div_ceil(2).max(1);
        let (u, wu) = gauss_jacobi01(k, 1.0);
        let (v, wv) = gauss_legendre01(k);
        let mut points = Vec::with_capacity(k * k);
        let mut weights = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let s = u[i];
                let t = (1.0 - u[i]) * v[j];
                points.push([1.0 - s - t, s, t]);
                // reference area 1/2
                weights.push(2.0 * wu[i] * wv[j]);
            }
        }
        Self {
            points,
            weights,
            degree: 2 * k - 1,
        }
    }
}
