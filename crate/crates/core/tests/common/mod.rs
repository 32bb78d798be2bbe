#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use edgefem::assembly::{DofSystem, MaterialField};
use edgefem::mesh::{build_box_mesh, BoxDomain, TetMesh, Vec3};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn cube(n: usize) -> Arc<TetMesh> {
    Arc::new(build_box_mesh(n, BoxDomain::unit_cube()).unwrap())
}

pub fn unit_material(mesh: &TetMesh, omega: f64) -> MaterialField {
    MaterialField::uniform(mesh, 1.0, 1.0, omega).unwrap()
}

pub fn random_spd(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let l = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let a = l * l.transpose() + Matrix3::identity() * 0.5;
    (a + a.transpose()) * 0.5
}

/// Cellwise random anisotropic SPD coefficients.
pub fn random_material(mesh: &TetMesh, omega: f64, seed: u64) -> MaterialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mesh.n_tets();
    let eps = (0..n).map(|_| random_spd(&mut rng)).collect();
    let nu = (0..n).map(|_| random_spd(&mut rng)).collect();
    MaterialField::new(eps, nu, omega).unwrap()
}

pub fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn nedelec(mesh: &Arc<TetMesh>) -> Arc<DofSystem> {
    Arc::new(DofSystem::nedelec(mesh.clone()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub type FieldPair = (
    Box<dyn Fn(&Vec3) -> Vec3 + Sync>,
    Box<dyn Fn(&Vec3) -> Vec3 + Sync>,
);

/// Smooth fields with their analytic curls.
pub fn test_fields() -> Vec<FieldPair> {
    vec![
        (
            Box::new(|x: &Vec3| Vec3::new((PI * x.y).sin() * (PI * x.z).sin(), 0.0, 0.0)),
            Box::new(|x: &Vec3| {
                Vec3::new(
                    0.0,
                    PI * (PI * x.y).sin() * (PI * x.z).cos(),
                    -PI * (PI * x.y).cos() * (PI * x.z).sin(),
                )
            }),
        ),
        (
            Box::new(|x: &Vec3| Vec3::new(x.y, x.z, x.x)),
            Box::new(|_| Vec3::new(-1.0, -1.0, -1.0)),
        ),
        (
            Box::new(|_| Vec3::new(1.0, -2.0, 0.5)),
            Box::new(|_| Vec3::zeros()),
        ),
        (
            Box::new(|x: &Vec3| Vec3::new(-x.y, x.x, 0.0)),
            Box::new(|_| Vec3::new(0.0, 0.0, 2.0)),
        ),
        (
            Box::new(|x: &Vec3| Vec3::new(x.x * x.x, x.y * x.y, x.z * x.z)),
            Box::new(|_| Vec3::zeros()),
        ),
        (
            Box::new(|x: &Vec3| Vec3::new(0.0, 0.0, (x.x + 2.0 * x.y).exp())),
            Box::new(|x: &Vec3| {
                Vec3::new(2.0 * (x.x + 2.0 * x.y).exp(), -(x.x + 2.0 * x.y).exp(), 0.0)
            }),
        ),
        (
            Box::new(|x: &Vec3| Vec3::new((x.y * x.z).cos(), (x.z * x.x).cos(), (x.x * x.y).cos())),
            Box::new(|x: &Vec3| {
                Vec3::new(
                    -x.x * (x.x * x.y).sin() + x.x * (x.z * x.x).sin(),
                    -x.y * (x.y * x.z).sin() + x.y * (x.x * x.y).sin(),
                    -x.z * (x.z * x.x).sin() + x.z * (x.y * x.z).sin(),
                )
            }),
        ),
        (
            Box::new(|x: &Vec3| Vec3::new(x.y * x.y * x.z, 0.0, x.x * x.y)),
            Box::new(|x: &Vec3| Vec3::new(x.x, x.y * x.y - x.y, -2.0 * x.y * x.z)),
        ),
        (
            Box::new(|x: &Vec3| Vec3::new((2.0 * x.z).sin(), (3.0 * x.x).cos(), x.y.exp())),
            Box::new(|x: &Vec3| {
                Vec3::new(x.y.exp(), 2.0 * (2.0 * x.z).cos(), -3.0 * (3.0 * x.x).sin())
            }),
        ),
        (
            Box::new(|x: &Vec3| {
                let r2 = x.norm_squared();
                Vec3::new(x.y, -x.x, 0.0) * r2
            }),
            Box::new(|x: &Vec3| {
                let r2 = x.norm_squared();
                // curl(r² a) = 2 x × a + r² curl a with a = (y, −x, 0)
                x.cross(&Vec3::new(x.y, -x.x, 0.0)) * 2.0 + Vec3::new(0.0, 0.0, -2.0) * r2
            }),
        ),
    ]
}
