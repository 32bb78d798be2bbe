mod common;

use std::f64::consts::PI;

use common::*;
use edgefem::assembly::{gradient_map, DofSystem, MaterialField};
use edgefem::factors::{
    check_asymptotic, check_theorems, cst_cube_oracle, gamma_app_estimate, gamma_div_estimate,
    resonance_guard, DivergenceConformity, FactorError, FactorReport, LevelContext, Verdict,
};
use edgefem::operators::KernelSurrogate;

fn context(n: usize, mat: impl Fn(&edgefem::mesh::TetMesh) -> MaterialField) -> LevelContext {
    let mesh = cube(n);
    let m = mat(&mesh);
    LevelContext::new(nedelec(&mesh), &m).unwrap()
}

/// Cavity eigenvalues π²|k|² with at least two nonzero indices, by brute
/// force over a box of indices.
fn cavity_eigenvalues(kmax: i64) -> Vec<f64> {
    let mut out = Vec::new();
    for a in 0..=kmax {
        for b in 0..=kmax {
            for c in 0..=kmax {
                if [a, b, c].iter().filter(|&&i| i != 0).count() >= 2 {
                    out.push(PI * PI * (a * a + b * b + c * c) as f64);
                }
            }
        }
    }
    out
}

#[test]
fn oracle_matches_brute_force_spectrum() {
    for omega in [0.3, 1.0, 2.5, 5.0] {
        let brute = cavity_eigenvalues(12)
            .into_iter()
            .map(|l| omega * (omega * omega + l).sqrt() / (l - omega * omega).abs())
            .fold(0.0, f64::max);
        let c = cst_cube_oracle(omega, 300).unwrap();
        assert!(
            (c - brute).abs() <= 1e-12 * brute,
            "ω = {omega}: {c} vs {brute}"
        );
    }
    let c = cst_cube_oracle(1.0, 300).unwrap();
    let alpha = (2.0 * PI * PI - 1.0) / (2.0 * PI * PI + 1.0);
    assert!((1.0 / (1.0 + 2.0 * c) - 0.67293).abs() < 1e-5);
    // quoted as 1/0.24303 with C_st rounded to five digits
    assert!((1.0 / c - 4.1147).abs() < 5e-4);
    assert!(1.0 / (1.0 + 2.0 * c) <= alpha && alpha <= 1.0 / c);
}

#[test]
fn single_cube_complement_has_one_mode() {
    let ctx = context(1, |m| unit_material(m, 1.0));
    assert_eq!(ctx.complement_dim(), 1);
    let spec = ctx.complement_spectrum(1.0, 6, 0).unwrap();
    assert_eq!(spec.eigenvalues.len(), 1);
    assert!(ctx.cst_discrete(0).unwrap() > 0.0);
}

#[test]
fn discrete_stability_constant_is_invariant_under_joint_material_scaling() {
    let base = context(2, |m| random_material(m, 1.0, 4));
    let scaled = context(2, |m| random_material(m, 1.0, 4).scaled(3.0, 3.0).unwrap());
    let (a, b) = (
        base.cst_discrete(0).unwrap(),
        scaled.cst_discrete(0).unwrap(),
    );
    assert!((a - b).abs() <= 1e-10 * a);
}

#[test]
fn resonance_guard_reports_nearest_eigenvalue() {
    let ctx = context(2, |m| unit_material(m, 1.0));
    let first = ctx.complement_spectrum(1.0, 6, 0).unwrap().eigenvalues[0];
    let near = context(2, |m| unit_material(m, (first * 1.004).sqrt()));
    let check = resonance_guard(&near, 0).unwrap();
    assert!((check.nearest - first).abs() <= 1e-10 * first);
    assert!(check.relative_distance < 0.01);
    let exact = context(2, |m| unit_material(m, first.sqrt()));
    assert!(matches!(
        exact.cst_discrete(0),
        Err(FactorError::Resonance { .. })
    ));
}

#[test]
fn divergence_conformity_rejects_gradients() {
    let ctx = context(2, |m| unit_material(m, 1.0));
    let s = KernelSurrogate::new(&ctx.dofs, &ctx.mat, 1).unwrap();
    let dc = DivergenceConformity::new(&ctx, &s).unwrap();
    let g = gradient_map(
        &DofSystem::lagrange1(ctx.dofs.mesh_arc().clone()),
        &ctx.dofs,
    )
    .unwrap();
    assert!(matches!(
        dc.quotient(&g.matvec(&[1.0])),
        Err(FactorError::NotInComplement(_))
    ));
    let x = ctx
        .projector
        .complement(&random_vec(ctx.dofs.ndof(), 3))
        .unwrap();
    let q = dc.quotient(&x).unwrap();
    let gamma = dc.estimate(0).unwrap().value;
    assert!(q >= 0.0 && q.sqrt() <= gamma * (1.0 + 1e-8));
}

#[test]
fn gamma_div_is_proportional_to_omega() {
    let a = gamma_div_estimate(&context(2, |m| unit_material(m, 1.0)), 1, 0)
        .unwrap()
        .value;
    let b = gamma_div_estimate(&context(2, |m| unit_material(m, 0.25)), 1, 0)
        .unwrap()
        .value;
    assert!((a - 4.0 * b).abs() <= 1e-8 * a);
}

#[test]
fn estimators_grow_with_surrogate_resolution() {
    let ctx = context(2, |m| unit_material(m, 1.0));
    let d1 = gamma_div_estimate(&ctx, 1, 0).unwrap();
    let d2 = gamma_div_estimate(&ctx, 2, 0).unwrap();
    assert!(
        d1.value <= d2.value * (1.0 + 1e-8),
        "{} > {}",
        d1.value,
        d2.value
    );
    let a1 = gamma_app_estimate(&ctx, 1, 0).unwrap();
    let a2 = gamma_app_estimate(&ctx, 2, 0).unwrap();
    assert!(
        a1.value <= a2.value * (1.0 + 1e-8),
        "{} > {}",
        a1.value,
        a2.value
    );
    assert!(a2.gradient_defect <= 1e-8);
    assert_eq!((d2.levels, a2.levels), (2, 2));
}

#[test]
fn approximation_factor_vanishes_without_refinement() {
    let ctx = context(2, |m| unit_material(m, 1.0));
    let g = gamma_app_estimate(&ctx, 0, 0).unwrap();
    assert!(g.value <= 1e-6, "{}", g.value);
}

#[test]
fn theorem_ledger() {
    let mut r = FactorReport::new(0, 8, 0.2, 100, 1.0, 2);
    r.gamma_app = Some(0.05);
    r.gamma_div = Some(0.04);
    r.c_st = Some(0.243);
    r.beta_h = Some(0.9);
    r.err_energy = Some(0.35);
    r.best_err = Some(0.349);
    r.fill_composites();
    assert!((r.thm41_lhs_factor.unwrap() - (1.0 - 0.6 - 0.01)).abs() < 1e-15);
    let l = check_theorems(&r, 0.05);
    assert_eq!((l.thm41, l.thm42), (Verdict::Pass, Verdict::Pass));
    r.beta_h = Some(0.1);
    assert_eq!(check_theorems(&r, 0.05).thm42, Verdict::Fail);
    let mut reports = vec![r.clone(), r.clone()];
    reports[0].qo_ratio = Some(1.05);
    reports[1].qo_ratio = Some(1.01);
    assert_eq!(check_asymptotic(&reports, 1.1), Verdict::Pass);
    reports[1].qo_ratio = Some(1.2);
    assert_eq!(check_asymptotic(&reports, 1.1), Verdict::Fail);
}
