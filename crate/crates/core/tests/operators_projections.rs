mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use common::*;
use edgefem::assembly::{curl_map, gradient_map, DofSystem, MaxwellMatrices, Space};
use edgefem::mesh::Vec3;
use edgefem::operators::{
    best_approx, best_approx_discrete, canonical_interp, decompose_error, energy_error,
    project_continuous_kernel_surrogate, project_discrete_curlfree, BestApproximation,
    CurlFreeProjector, DiscreteField, FnField, InterpolationRules, KernelInput, KernelSurrogate,
    ZeroField,
};
use edgefem::sparse::dot;

fn ms1() -> FnField<impl Fn(&Vec3) -> Vec3 + Sync, impl Fn(&Vec3) -> Vec3 + Sync> {
    FnField {
        value: |x: &Vec3| Vec3::new((PI * x.y).sin() * (PI * x.z).sin(), 0.0, 0.0),
        curl: |x: &Vec3| {
            Vec3::new(
                0.0,
                PI * (PI * x.y).sin() * (PI * x.z).cos(),
                -PI * (PI * x.y).cos() * (PI * x.z).sin(),
            )
        },
    }
}

#[test]
fn best_approximation_is_a_contraction_and_a_projection() {
    let mesh = cube(2);
    let coarse = nedelec(&mesh);
    let mat = random_material(&mesh, 1.3, 9);
    let cm = MaxwellMatrices::assemble(&coarse, &mat).unwrap();
    let best = BestApproximation::new(coarse.clone(), &cm).unwrap();
    let s = KernelSurrogate::new(&coarse, &mat, 1).unwrap();
    let fm = MaxwellMatrices::assemble(&s.fine_nedelec, &s.fine_mat).unwrap();
    let fine_proj = CurlFreeProjector::new(&s.fine_nedelec, &s.fine_mat, fm.mass.clone()).unwrap();
    let coarse_proj = CurlFreeProjector::new(&coarse, &mat, cm.mass.clone()).unwrap();
    for seed in 0..100 {
        let v = random_vec(s.fine_nedelec.ndof(), seed);
        let pv = best_approx_discrete(&v, &s.t, &fm.n, &best).unwrap();
        let nv = fm.energy_sq(&v).sqrt();
        assert!(cm.energy_sq(&pv).sqrt() <= nv * (1.0 + 1e-9));
        // idempotence on the coarse space
        let again = best_approx_discrete(&s.t.matvec(&pv), &s.t, &fm.n, &best).unwrap();
        assert!(max_abs_diff(&again, &pv) <= 1e-10 * max_abs(&pv));
        // b⁺(v − P_h v, w_i) = 0
        let e: Vec<f64> = v.iter().zip(s.t.matvec(&pv)).map(|(a, b)| a - b).collect();
        let orth = s.t.matvec_transpose(&fm.n.matvec(&e));
        for (i, o) in orth.iter().enumerate() {
            let wi = cm.n.csr().get(i, i).sqrt();
            assert!(o.abs() <= 1e-9 * nv * wi);
        }
        // P_h maps the divergence-free complement into the discrete one
        if seed < 10 {
            let x = fine_proj.complement(&v).unwrap();
            let px = best_approx_discrete(&x, &s.t, &fm.n, &best).unwrap();
            assert!(coarse_proj.gradient_defect(&px) <= 1e-9 * fm.energy_sq(&x).sqrt());
        }
    }
}

#[test]
fn best_approximation_error_of_cavity_mode_decays() {
    let mut errs = Vec::new();
    for n in [2, 4] {
        let mesh = cube(n);
        let dofs = nedelec(&mesh);
        let mat = unit_material(&mesh, 1.0);
        let ph = best_approx(&ms1(), dofs, &mat, 6).unwrap();
        errs.push(energy_error(&ms1(), &ph, &mat, 6).unwrap());
    }
    let rate = (errs[0] / errs[1]).log2();
    assert!((0.8..1.2).contains(&rate), "rate {rate}");
}

#[test]
fn curl_free_projection_properties() {
    let mesh = cube(3);
    let dofs = nedelec(&mesh);
    let mat = random_material(&mesh, 1.0, 21);
    let m = MaxwellMatrices::assemble(&dofs, &mat).unwrap();
    let proj = CurlFreeProjector::new(&dofs, &mat, m.mass.clone()).unwrap();
    let u = random_vec(dofs.ndof(), 1);
    let v = random_vec(dofs.ndof(), 2);
    let pu = proj.project(&u).unwrap();
    let pv = proj.project(&v).unwrap();
    // idempotent
    let ppu = proj.project(&pu).unwrap();
    assert!(max_abs_diff(&ppu, &pu) <= 1e-10 * max_abs(&pu));
    // self-adjoint in the ε inner product
    let (a, b) = (m.mass.bilinear_form(&pu, &v), m.mass.bilinear_form(&u, &pv));
    assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
    // Pythagoras
    let cu = proj.complement(&u).unwrap();
    let total = m.mass.quadratic_form(&u);
    let split = m.mass.quadratic_form(&pu) + m.mass.quadratic_form(&cu);
    assert!((total - split).abs() <= 1e-10 * total);
    // the complement is projected to zero
    let field = DiscreteField::new(dofs.clone(), cu.clone()).unwrap();
    let zero = project_discrete_curlfree(&field, &mat).unwrap();
    assert!(max_abs(zero.coeffs()) <= 1e-10 * max_abs(&cu));
    // gradients are reproduced
    let g = gradient_map(&DofSystem::lagrange1(mesh.clone()), &dofs).unwrap();
    let gq = g.matvec(&random_vec(g.ncols(), 3));
    let field = DiscreteField::new(dofs.clone(), gq.clone()).unwrap();
    let back = project_discrete_curlfree(&field, &mat).unwrap();
    assert!(max_abs_diff(back.coeffs(), &gq) <= 1e-10 * max_abs(&gq));
}

#[test]
fn kernel_surrogate_recovers_coarse_gradients() {
    let mesh = cube(2);
    let dofs = nedelec(&mesh);
    let mat = random_material(&mesh, 1.0, 5);
    let g = gradient_map(&DofSystem::lagrange1(mesh.clone()), &dofs).unwrap();
    let v = DiscreteField::new(dofs.clone(), g.matvec(&[1.0])).unwrap();
    let m = MaxwellMatrices::assemble(&dofs, &mat).unwrap();
    let want = m.mass.quadratic_form(v.coeffs()).sqrt();
    for r in [1, 2] {
        let (_, got) =
            project_continuous_kernel_surrogate(KernelInput::Discrete(&v), &dofs, &mat, r).unwrap();
        assert!(
            (got - want).abs() <= 1e-10 * want,
            "r = {r}: {got} vs {want}"
        );
    }
    let zero = DiscreteField::zeros(dofs.clone());
    let (p, nrm) =
        project_continuous_kernel_surrogate(KernelInput::Discrete(&zero), &dofs, &mat, 1).unwrap();
    assert_eq!(nrm, 0.0);
    assert!(p.coeffs().iter().all(|&c| c == 0.0));
    // a field on another mesh is rejected
    let other = nedelec(&cube(3));
    let w = DiscreteField::zeros(other);
    assert!(
        project_continuous_kernel_surrogate(KernelInput::Discrete(&w), &dofs, &mat, 1).is_err()
    );
}

#[test]
fn kernel_part_of_solenoidal_field_vanishes_under_refinement() {
    let mesh = cube(2);
    let dofs = nedelec(&mesh);
    let mat = unit_material(&mesh, 1.0);
    let field = ms1();
    let norms: Vec<f64> = (1..=2)
        .map(|r| {
            project_continuous_kernel_surrogate(KernelInput::Analytic(&field), &dofs, &mat, r)
                .unwrap()
                .1
        })
        .collect();
    // ‖E*‖_ε = 1/2; E* is divergence free with zero trace
    assert!(norms.iter().all(|&n| n < 1e-10), "{norms:?}");

    // a pure gradient ∇φ, φ = sin πx sin πy sin πz, is resolved from below
    let grad = FnField {
        value: |x: &Vec3| {
            let (s, c) = ((PI * x).map(f64::sin), (PI * x).map(f64::cos));
            Vec3::new(c.x * s.y * s.z, s.x * c.y * s.z, s.x * s.y * c.z) * PI
        },
        curl: |_: &Vec3| Vec3::zeros(),
    };
    let exact = (3.0 * PI * PI / 8.0).sqrt();
    let norms: Vec<f64> = (1..=3)
        .map(|r| {
            project_continuous_kernel_surrogate(KernelInput::Analytic(&grad), &dofs, &mat, r)
                .unwrap()
                .1
        })
        .collect();
    assert!(
        norms.windows(2).all(|w| w[0] < w[1]) && norms[2] <= exact,
        "{norms:?}"
    );
    // the deficit is quadratic in h
    assert!((exact - norms[2]) < 0.3 * (exact - norms[1]), "{norms:?}");
}

#[test]
fn canonical_interpolants_commute_with_curl() {
    let mesh = cube(4);
    let ned = Arc::new(DofSystem::new(mesh.clone(), Space::Nedelec, false));
    let rt = Arc::new(DofSystem::new(mesh.clone(), Space::RaviartThomas, false));
    let c = curl_map(&ned, &rt).unwrap();
    let rules = InterpolationRules::default();
    for (k, (v, curl)) in test_fields().into_iter().enumerate() {
        let ic = canonical_interp(&v, ned.clone(), &rules).unwrap();
        let id = canonical_interp(&curl, rt.clone(), &rules).unwrap();
        let d = max_abs_diff(&c.matvec(ic.coeffs()), id.coeffs());
        assert!(d <= 1e-9, "field {k}: {d:e}");
    }
}

#[test]
fn canonical_interpolant_reproduces_constants_and_circulations() {
    let mesh = cube(2);
    let ned = Arc::new(DofSystem::new(mesh.clone(), Space::Nedelec, false));
    let c = Vec3::new(0.3, -1.1, 2.0);
    let ic = canonical_interp(|_| c, ned.clone(), &InterpolationRules::light()).unwrap();
    for t in 0..mesh.n_tets() {
        let geo = ned.geometry(t);
        for bary in [[0.25; 4], [0.1, 0.2, 0.3, 0.4]] {
            assert!((ic.vector_value(t, &geo, &bary) - c).norm() < 1e-13);
        }
    }
    let lin = |x: &Vec3| Vec3::new(x.y, x.z, x.x);
    let il = canonical_interp(lin, ned.clone(), &InterpolationRules::light()).unwrap();
    for d in 0..ned.ndof() {
        let [a, b] = mesh.edges()[ned.entity_of_dof(d)];
        let (xa, xb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let exact = lin(&((xa + xb) * 0.5)).dot(&(xb - xa));
        assert!((il.coeffs()[d] - exact).abs() < 1e-12);
    }
}

#[test]
fn error_split_is_orthogonal() {
    let mesh = cube(2);
    let dofs = nedelec(&mesh);
    let mat = unit_material(&mesh, 1.0);
    let s = KernelSurrogate::new(&dofs, &mat, 2).unwrap();
    let exact = ms1();
    for seed in 0..3 {
        let eh = DiscreteField::new(dofs.clone(), random_vec(dofs.ndof(), seed)).unwrap();
        let split = decompose_error(&exact, &eh, &mat, &s, 6).unwrap();
        let e2 = split.energy_error.powi(2);
        assert!(split.theta0_mass >= 0.0 && split.theta_pi_mass >= 0.0 && split.curl_theta0 >= 0.0);
        assert!(
            (split.component_sum_sq() - e2).abs() <= 1e-8 * e2,
            "{} vs {}",
            split.component_sum_sq(),
            e2
        );
    }
    let zero = DiscreteField::zeros(dofs.clone());
    let split = decompose_error(&ZeroField, &zero, &mat, &s, 6).unwrap();
    assert_eq!(split.component_sum_sq(), 0.0);
}

#[test]
fn energy_pairing_of_discrete_field_matches_matrix() {
    let mesh = cube(2);
    let dofs = nedelec(&mesh);
    let mat = random_material(&mesh, 0.7, 3);
    let m = MaxwellMatrices::assemble(&dofs, &mat).unwrap();
    let x = random_vec(dofs.ndof(), 8);
    let field = DiscreteField::new(dofs.clone(), x.clone()).unwrap();
    let wrapped = FnField {
        value: |p: &Vec3| field.eval(p).unwrap(),
        curl: |p: &Vec3| {
            let c = mesh.locate(p).unwrap();
            field.curl(c, &dofs.geometry(c))
        },
    };
    let pairing = edgefem::operators::energy_pairing(&dofs, &mat, &wrapped, 2).unwrap();
    let nx = m.n.matvec(&x);
    assert!(max_abs_diff(&pairing, &nx) <= 1e-10 * max_abs(&nx));
    assert!((dot(&pairing, &x) - m.energy_sq(&x)).abs() <= 1e-10 * m.energy_sq(&x));
}
