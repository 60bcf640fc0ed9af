use std::cmp::Ordering;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use proptest::prelude::*;

use ymaxial::bargmann::{dz_op, fd_inner_unscaled, MonomialForm, MultiIndex, Poly};
use ymaxial::functionals::{real_point, xi_kernel, CPoint};
use ymaxial::grid::{all_edges, boundary_edges, build_grid, grid_identity_check, su2_from_quaternion, time_order_compare, DirEdge, EdgeField};
use ymaxial::lie::{build_basis, casimir_tensor, max_abs, special_tensors, structure_constants, CMat, GroupKind};
use ymaxial::limits::{quark_potential, rect_wilson};
use ymaxial::measure::{density_y, DensityTables, FieldSpace, MeasureConfig};
use ymaxial::surface::{area_with, Surface};
use ymaxial::quad::Rule;

fn multi_index() -> impl Strategy<Value = MultiIndex> {
    prop::array::uniform4(0u32..4).prop_map(MultiIndex)
}

fn small_poly() -> impl Strategy<Value = Poly<BigRational>> {
    prop::collection::vec((multi_index(), -5i64..6, 1i64..4), 1..4).prop_map(|terms| {
        let mut p = Poly::zero();
        for (m, n, d) in terms {
            p.add_term(m, BigRational::new(BigInt::from(n), BigInt::from(d)));
        }
        p
    })
}

fn form() -> impl Strategy<Value = MonomialForm<BigRational>> {
    (small_poly(), small_poly(), small_poly()).prop_map(|(a, b, c)| MonomialForm { comps: [a, b, c] })
}

fn cpoint() -> impl Strategy<Value = CPoint> {
    prop::array::uniform4((-1.0f64..1.0, -1.0f64..1.0)).prop_map(|a| a.map(|(re, im)| Complex64::new(re, im)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn traversal_covers_each_edge_correctly(n in 1usize..8) {
        let g = build_grid(n).unwrap();
        prop_assert_eq!(g.edges.len(), 4 * n + 2 * (2 * n * (n + 1) - 4 * n));
        prop_assert_eq!(g.edges[0].from, (0, 0));
        prop_assert_eq!(g.edges.last().unwrap().to, (0, 0));
        let bnd = boundary_edges(n);
        for e in all_edges(n) {
            let f = g.edges.iter().filter(|x| **x == e).count();
            let b = g.edges.iter().filter(|x| **x == e.reversed()).count();
            if bnd.contains(&e) || bnd.contains(&e.reversed()) {
                prop_assert_eq!(f + b, 1);
            } else {
                prop_assert_eq!((f, b), (1, 1));
            }
        }
    }

    #[test]
    fn grid_identity_for_random_su2(n in 1usize..6, qs in prop::collection::vec(prop::array::uniform4(-1.0f64..1.0), 84)) {
        let edges = all_edges(n);
        let pairs: Vec<(DirEdge, CMat)> = edges.into_iter().enumerate().map(|(k, e)| {
            let mut q = qs[k % qs.len()];
            q[0] += 1.5 + k as f64 * 0.01;
            (e, su2_from_quaternion(q))
        }).collect();
        let f = EdgeField::from_pairs(n, 2, pairs).unwrap();
        prop_assert!(grid_identity_check(&f).unwrap().deviation <= 1e-12);
    }

    #[test]
    fn time_order_is_antisymmetric(a in (0.0f64..1.0, 0.0f64..1.0), b in (0.0f64..1.0, 0.0f64..1.0)) {
        prop_assert_eq!(time_order_compare(a, b), time_order_compare(b, a).reverse());
        prop_assert_eq!(time_order_compare(a, a), Ordering::Equal);
    }

    #[test]
    fn multi_index_order_refines_degree(p in multi_index(), q in multi_index()) {
        if p.degree() < q.degree() {
            prop_assert!(p < q);
        }
        prop_assert_eq!(p == q, p.cmp(&q) == Ordering::Equal);
    }

    #[test]
    fn dz_is_linear(f in small_poly(), g in small_poly(), axis in 0usize..4) {
        let mut sum = f.clone();
        sum.axpy(&BigRational::from_integer(BigInt::from(3)), &g);
        let mut expect = dz_op(axis, &f);
        expect.axpy(&BigRational::from_integer(BigInt::from(3)), &dz_op(axis, &g));
        prop_assert_eq!(dz_op(axis, &sum), expect);
    }

    #[test]
    fn fd_inner_is_symmetric_and_positive(f in form(), g in form()) {
        prop_assert_eq!(fd_inner_unscaled(&f, &g), fd_inner_unscaled(&g, &f));
        prop_assert!(fd_inner_unscaled(&f, &f) >= BigRational::from_integer(BigInt::from(0)));
    }

    #[test]
    fn kernel_is_hermitian(w in cpoint(), v in cpoint()) {
        prop_assert!((xi_kernel(&w, &v) - xi_kernel(&v, &w).conj()).norm() < 1e-15);
        prop_assert!(xi_kernel(&w, &w).im.abs() < 1e-15 && xi_kernel(&w, &w).re > 0.0);
    }

    #[test]
    fn kernel_on_real_points_is_gaussian(x in prop::array::uniform4(-1.5f64..1.5), y in prop::array::uniform4(-1.5f64..1.5)) {
        let d2: f64 = x.iter().zip(y.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let k = xi_kernel(&real_point(x), &real_point(y));
        prop_assert!((k.re - (-d2 / 2.0).exp() / (2.0 * std::f64::consts::PI)).abs() < 1e-14);
    }

    #[test]
    fn tilted_and_rectangle_areas(theta in -1.4f64..1.4, r in 0.1f64..3.0, t in 0.1f64..3.0) {
        let a = area_with(&Surface::TiltedPlane { theta }, 8, Rule::Midpoint).unwrap().area;
        prop_assert!((a - 1.0).abs() < 1e-6);
        let b = area_with(&Surface::rectangle(r, t), 4, Rule::Midpoint).unwrap().area;
        prop_assert!((b - r * t).abs() < 1e-9 * (1.0 + r * t));
    }

    #[test]
    fn reparametrization_invariance(theta in 0.2f64..1.2, power in 1.2f64..2.5) {
        let base = Surface::SphericalCap { radius: 1.0, theta_max: theta };
        let re = Surface::Reparam { base: Box::new(base.clone()), power };
        let a = area_with(&base, 24, Rule::GaussLegendre).unwrap().area;
        let b = area_with(&re, 24, Rule::GaussLegendre).unwrap().area;
        prop_assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn potential_is_linear(r in 0.0f64..10.0, n in 2usize..6, so in any::<bool>()) {
        let kind = if so { GroupKind::SO } else { GroupKind::SU };
        let b = build_basis(kind, n).unwrap();
        let v1 = quark_potential(r, &b).unwrap();
        let v2 = quark_potential(2.0 * r, &b).unwrap();
        prop_assert!((v2 - 2.0 * v1).abs() < 1e-12 * (1.0 + v2.abs()));
        let w = rect_wilson(r, 1.0, &b).unwrap() * n as f64;
        let w2 = rect_wilson(r, 0.5, &b).unwrap().powi(2);
        prop_assert!((w - w2).abs() < 1e-10 * w.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn casimir_and_structure_identities(n in 2usize..5) {
        let st = special_tensors(n);
        let nf = Complex64::new(n as f64, 0.0);
        let id = CMat::identity(n * n, n * n);
        let su = build_basis(GroupKind::SU, n).unwrap();
        let expect = &id * (Complex64::new(1.0, 0.0) / nf) - &st.j;
        prop_assert!(max_abs(&(casimir_tensor(&su) - expect)) < 1e-12);
        let so = build_basis(GroupKind::SO, n).unwrap();
        prop_assert!(max_abs(&(casimir_tensor(&so) - (&st.k - &st.j) * Complex64::new(0.5, 0.0))) < 1e-12);
        let c = structure_constants(&su);
        let d = su.algebra_dim();
        for g in 0..d {
            for a in 0..d {
                for b in 0..d {
                    prop_assert_eq!(c.get(g, a, b), -c.get(g, b, a));
                }
            }
        }
    }

    #[test]
    fn density_is_positive_and_bounded(seed in any::<u64>()) {
        let mut cfg = MeasureConfig::new(GroupKind::SU, 2, 4.0, 1, seed);
        cfg.qmc_nodes = 256;
        let space = FieldSpace::new(&cfg).unwrap();
        let t = DensityTables::new(&space);
        for i in 0..4 {
            let d = density_y(&space, &t, &space.sample(i));
            prop_assert!(d.y > 0.0 && d.log_y <= d.log_bound);
        }
    }
}
