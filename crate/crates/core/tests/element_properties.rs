use edgefem::elements::{
    gauss_legendre01, quadrature, tabulate, Family, Tabulation, TetGeometry, TriangleRule,
};
use edgefem::mesh::{signed_volume, Vec3, LOCAL_EDGES, LOCAL_FACES};
use proptest::prelude::*;

fn tet() -> impl Strategy<Value = TetGeometry> {
    prop::array::uniform4(prop::array::uniform3(-1.0f64..1.0))
        .prop_map(|p| p.map(|c| Vec3::new(c[0], c[1], c[2])))
        .prop_filter("well shaped", |p| {
            let v = signed_volume([&p[0], &p[1], &p[2], &p[3]]).abs();
            let h = LOCAL_EDGES
                .iter()
                .map(|&[a, b]| (p[a] - p[b]).norm())
                .fold(0.0, f64::max);
            v > 0.02 * h.powi(3)
        })
        .prop_map(|mut p| {
            if signed_volume([&p[0], &p[1], &p[2], &p[3]]) < 0.0 {
                p.swap(2, 3);
            }
            TetGeometry::new(p)
        })
}

fn bary() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(0.05f64..1.0).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.map(|x| x / s)
    })
}

fn edge_values(geo: &TetGeometry, x: &Vec3) -> Vec<Vec3> {
    match tabulate(Family::Nedelec0, geo, &geo.barycentric(x)) {
        Tabulation::Edge { values, .. } => values,
        _ => unreachable!(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn whitney_circulations_are_kronecker(geo in tet()) {
        let (s, w) = gauss_legendre01(3);
        for (e, &[a, b]) in LOCAL_EDGES.iter().enumerate() {
            let (xa, xb) = (geo.points[a], geo.points[b]);
            for (j, circ) in (0..6).map(|j| {
                (j, s.iter().zip(&w).map(|(si, wi)| wi * edge_values(&geo, &(xa + (xb - xa) * *si))[j].dot(&(xb - xa))).sum::<f64>())
            }) {
                let want = if j == e { 1.0 } else { 0.0 };
                prop_assert!((circ - want).abs() < 1e-10, "edge {} fn {}: {}", e, j, circ);
            }
        }
    }

    #[test]
    fn gradients_lie_in_whitney_span(geo in tet(), b in bary()) {
        let w = geo.whitney(&b);
        for i in 0..4 {
            let mut s = Vec3::zeros();
            for (e, &[a, c]) in LOCAL_EDGES.iter().enumerate() {
                let coef = (c == i) as i32 as f64 - (a == i) as i32 as f64;
                s += w[e] * coef;
            }
            prop_assert!((s - geo.grads[i]).norm() < 1e-9 * geo.grads[i].norm());
        }
    }

    #[test]
    fn curls_have_zero_net_flux(geo in tet()) {
        for c in geo.whitney_curls() {
            let mut flux = 0.0;
            let mut scale = 0.0;
            for (opp, f) in LOCAL_FACES.iter().enumerate() {
                let p = f.map(|k| geo.points[k]);
                let mut n = (p[1] - p[0]).cross(&(p[2] - p[0])) * 0.5;
                if n.dot(&(p[0] - geo.points[opp])) < 0.0 {
                    n = -n;
                }
                flux += c.dot(&n);
                scale += c.norm() * n.norm();
            }
            prop_assert!(flux.abs() <= 1e-13 * scale.max(1e-300));
        }
    }

    #[test]
    fn derivatives_match_central_differences(geo in tet(), b in bary()) {
        let x = geo.point(&b);
        let step = 1e-5 * geo.points.iter().map(|p| (p - geo.points[0]).norm()).fold(0.0, f64::max);
        let jac = |f: &dyn Fn(&Vec3) -> Vec<Vec3>| -> Vec<[Vec3; 3]> {
            let mut cols = vec![[Vec3::zeros(); 3]; 6];
            for d in 0..3 {
                let mut e = Vec3::zeros();
                e[d] = step;
                let (fp, fm) = (f(&(x + e)), f(&(x - e)));
                for k in 0..fp.len() {
                    cols[k][d] = (fp[k] - fm[k]) / (2.0 * step);
                }
            }
            cols
        };
        let cols = jac(&|y| edge_values(&geo, y));
        for (k, c) in geo.whitney_curls().iter().enumerate() {
            let j = &cols[k];
            // curl from the Jacobian columns ∂_d v
            let fd = Vec3::new(j[1][2] - j[2][1], j[2][0] - j[0][2], j[0][1] - j[1][0]);
            prop_assert!((fd - c).norm() <= 1e-6 * c.norm().max(1.0));
        }
        let rt = |y: &Vec3| geo.raviart_thomas(y).to_vec();
        let cols = jac(&rt);
        for j in cols.iter().take(4) {
            let div = j[0][0] + j[1][1] + j[2][2];
            prop_assert!((div - geo.raviart_thomas_divergence()).abs() <= 1e-6 * div.abs().max(1.0));
        }
    }

    #[test]
    fn quadrature_integrates_monomials(alpha in prop::array::uniform4(0u32..3), order in 1usize..7) {
        let total: u32 = alpha.iter().sum();
        prop_assume!(total as usize <= order);
        let rule = quadrature(order).unwrap();
        let got: f64 = rule.points.iter().zip(&rule.weights)
            .map(|(b, w)| w * (0..4).map(|i| b[i].powi(alpha[i] as i32)).product::<f64>())
            .sum();
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        let exact = alpha.iter().map(|&a| fact(a)).product::<f64>() / fact(total + 3);
        prop_assert!((got - exact).abs() < 1e-14, "{} vs {}", got, exact);
    }

    #[test]
    fn triangle_rules_integrate_monomials(a in 0u32..5, b in 0u32..5) {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        // ∫ over the reference triangle of λ₁^a λ₂^b, normalized by its area 1/2
        let exact = 2.0 * fact(a) * fact(b) / fact(a + b + 2);
        for rule in [TriangleRule::degree4(), TriangleRule::collapsed(10)] {
            prop_assume!((a + b) as usize <= rule.degree);
            let got: f64 = rule.points.iter().zip(&rule.weights)
                .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32)).sum();
            prop_assert!((got - exact).abs() < 1e-13);
        }
    }
}
