//! Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion with the
//! measured values; tolerances are the constants written inline.
//!
//! A FAIL is never converted into a PASS. Criteria listed in DOCUMENTED_FAILURES
//! fail for reasons analyzed in the decisions ledger; the target exits nonzero if
//! any other criterion fails, or if a documented failure starts passing (so the
//! list cannot go stale).

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ymaxial::bargmann::{dz_op, factorial_big, gram_schmidt, gram_schmidt_sparse, h2_inner, MultiIndex, Poly};
use ymaxial::functionals::{abelian_value, duality_angle, real_point, xi_kernel, xi_kernel_truncated};
use ymaxial::grid::{all_edges, boundary_holonomy, builtin_su2_a, builtin_su2_b, builtin_u1, grid_identity_check, su2_from_quaternion, surface_ordered_product, CellOrder, EdgeField};
use ymaxial::lie::{build_basis, casimir_tensor, max_abs, special_tensors, CMat, GroupKind};
use ymaxial::limits::{area_law_closed_form, area_law_limit, potential_closed_form, quark_potential};
use ymaxial::measure::{abelian_truncated_value, density_values, density_y, matrix_gaussian_exact, matrix_gaussian_mc, mc_expectation, mean_stderr, DensityTables, FieldSpace, MeasureConfig};
use ymaxial::quad::Rule;
use ymaxial::surface::{area, area_with, heat_kernel_area, Surface};

const DOCUMENTED_FAILURES: &[u32] = &[4, 5, 9];

struct Check {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Check {
    Check { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1() -> Vec<Check> {
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for n in [2, 3] {
        let st = special_tensors(n);
        let id = CMat::identity(n * n, n * n);
        let expect = &id * Complex64::new(1.0 / n as f64, 0.0) - &st.j;
        worst = worst.max(max_abs(&(casimir_tensor(&build_basis(GroupKind::SU, n).unwrap()) - expect)));
    }
    out.push(check(worst <= 1e-12, format!("SU(2),SU(3) casimir dev {worst:.1e}")));
    let mut worst = 0.0f64;
    for n in [3, 4] {
        let st = special_tensors(n);
        let expect = (&st.k - &st.j) * Complex64::new(0.5, 0.0);
        worst = worst.max(max_abs(&(casimir_tensor(&build_basis(GroupKind::SO, n).unwrap()) - expect)));
    }
    out.push(check(worst <= 1e-12, format!("SO(3),SO(4) casimir dev {worst:.1e}")));
    let mut worst = 0.0f64;
    for n in 2..=5 {
        let st = special_tensors(n);
        let id = CMat::identity(n * n, n * n);
        worst = worst.max(max_abs(&(&st.j * &st.j - &id)));
        worst = worst.max(max_abs(&(&st.k * &st.k - &st.k * Complex64::new(n as f64, 0.0))));
        worst = worst.max(max_abs(&(&st.k * &st.j - &st.k)));
    }
    out.push(check(worst <= 1e-12, format!("JJ=I, KK=NK, KJ=K dev {worst:.1e}")));
    out
}

fn c2() -> Vec<Check> {
    let mono = |m: [u32; 4]| Poly::monomial(MultiIndex(m), BigRational::from_integer(BigInt::from(1)));
    let mut exact = true;
    for n in 1..=10u32 {
        let d = dz_op(0, &mono([n, 0, 0, 0]));
        let ni = BigInt::from(n);
        let rhs = BigRational::new(&ni * &ni * factorial_big(n - 1) + factorial_big(n + 1), BigInt::from(4));
        exact &= h2_inner(&d, &d) == rhs;
    }
    let mut out = vec![check(exact, format!("|𝔡_0 z_0^n|² = (n²(n-1)! + (n+1)!)/4 exact for n ≤ 10: {exact}"))];
    let rec = gram_schmidt_sparse(1, 2);
    let z = rec.iter().find(|z| z.p == MultiIndex([2, 0, 0, 0])).unwrap();
    let mut expect = mono([2, 0, 0, 0]);
    expect.add_term(MultiIndex::ZERO, BigRational::new(BigInt::from(2), BigInt::from(3)));
    out.push(check(z.poly == expect, format!("recursion ẑ^(2,0,0,0)⊗dx^1 = z_0² + 2/3 exact: {}", z.poly == expect)));
    for kappa in [1.0, 3.0] {
        let cache = gram_schmidt(kappa, 6).unwrap();
        out.push(check(cache.residual <= 1e-10, format!("cache R=6 κ={kappa} residual {:.1e}", cache.residual)));
    }
    out
}

fn c3() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ball = || -> [f64; 4] {
        loop {
            let x: [f64; 4] = [(); 4].map(|_| rng.random_range(-1.0..1.0));
            if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                return x;
            }
        }
    };
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (w, v) = (ball(), ball());
        let d2: f64 = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
        let closed = (-d2 / 2.0).exp() / (2.0 * PI);
        let trunc = xi_kernel_truncated(&real_point(w), &real_point(v), 20);
        worst = worst.max((trunc - Complex64::new(closed, 0.0)).norm());
        worst = worst.max((xi_kernel(&real_point(w), &real_point(v)).re - closed).abs());
    }
    vec![check(worst <= 1e-3, format!("20 pairs, cutoff 20: max |oracle - e^(-|w-ŵ|²/2)/2π| = {worst:.1e}"))]
}

fn c4() -> Vec<Check> {
    let a = area(&Surface::unit_square(), 64).unwrap().area;
    let t = area(&Surface::TiltedPlane { theta: PI / 6.0 }, 64).unwrap().area;
    let base = Surface::SphericalCap { radius: 1.0, theta_max: 0.9 };
    let re = Surface::Reparam { base: Box::new(base.clone()), power: 2.0 };
    let ab = area_with(&base, 32, Rule::GaussLegendre).unwrap().area;
    let ar = area_with(&re, 32, Rule::GaussLegendre).unwrap().area;
    let hk: Vec<f64> = [5.0, 10.0, 20.0].iter().map(|&k| heat_kernel_area(&Surface::unit_square(), k, 96, false).unwrap().value / (2.0 * PI)).collect();
    let dev: Vec<f64> = hk.iter().map(|v| (v - 1.0).abs()).collect();
    vec![
        check((a - 1.0).abs() <= 1e-9, format!("unit square {a:.12}")),
        check((t - 1.0).abs() <= 1e-6, format!("tilted {t:.9}")),
        check((ab - ar).abs() <= 1e-6, format!("reparam Δ {:.1e}", (ab - ar).abs())),
        check((0.95..=1.05).contains(&hk[2]), format!("HK/2π at κ=20 = {:.4} (window [0.95,1.05])", hk[2])),
        check(dev[0] > dev[1] && dev[1] > dev[2], format!("HK deviation {:.3},{:.3},{:.3} over κ=5,10,20", dev[0], dev[1], dev[2])),
    ]
}

fn c5() -> Vec<Check> {
    let mut out = Vec::new();
    for (surf, target, name) in [(Surface::unit_square(), (-1.0f64 / 8.0).exp(), "unit square"), (Surface::rectangle(2.0, 1.0), (-2.0f64 / 8.0).exp(), "2x1")] {
        let v: Vec<f64> = [5.0, 10.0, 20.0].iter().map(|&k| abelian_value(&surf, k, 96).unwrap()).collect();
        let d: Vec<f64> = v.iter().map(|x| rel(*x, target)).collect();
        out.push(check(d[2] <= 0.02, format!("{name} κ=20: {:.5} vs {target:.5} ({:.2}%)", v[2], 100.0 * d[2])));
        out.push(check(d[0] > d[1] && d[1] > d[2], format!("{name} monotone {:.4},{:.4},{:.4}", v[0], v[1], v[2])));
    }
    out
}

fn c6() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for n in [2, 3, 5] {
        for _ in 0..100 {
            let pairs = all_edges(n).into_iter().map(|e| (e, su2_from_quaternion([(); 4].map(|_| rng.random_range(-1.0..1.0) + 1e-9)))).collect();
            let f = EdgeField::from_pairs(n, 2, pairs).unwrap();
            worst = worst.max(grid_identity_check(&f).unwrap().deviation);
        }
    }
    vec![check(worst <= 1e-12, format!("300 fields, max deviation {worst:.1e}"))]
}

fn c7() -> Vec<Check> {
    let square = Surface::Rectangle { r: 1.0, t_len: 1.0, plane: (1, 2) };
    let mut out = Vec::new();
    for (conn, name) in [(builtin_su2_a(), "su2_a"), (builtin_su2_b(), "su2_b")] {
        let exact = boundary_holonomy(&conn, &square, 64, 64);
        let e: Vec<f64> = [4, 8, 16].iter().map(|&n| max_abs(&(surface_ordered_product(&conn, &square, n, 32, CellOrder::Holonomy).unwrap() - &exact))).collect();
        let ratio = e[1] / e[2];
        out.push(check((1.3..=3.0).contains(&ratio), format!("{name} err {:.2e},{:.2e},{:.2e}; err(8)/err(16) = {ratio:.2}", e[0], e[1], e[2])));
        out.push(check(e[2] < e[0], format!("{name} err(16) < err(4)")));
    }
    let u1 = builtin_u1();
    let s = surface_ordered_product(&u1, &square, 16, 32, CellOrder::Holonomy).unwrap();
    let b = boundary_holonomy(&u1, &square, 16, 32);
    let d = (s[(0, 0)] - b[(0, 0)]).norm();
    out.push(check(d <= 1e-6, format!("U(1) Stokes Δ {d:.1e}")));
    out
}

fn c8() -> Vec<Check> {
    let mut out = Vec::new();
    let u1 = FieldSpace::new(&MeasureConfig::new(GroupKind::U1, 1, 10.0, 4, 8)).unwrap();
    let tu = DensityTables::new(&u1);
    let all_one = (0..200).all(|i| density_y(&u1, &tu, &u1.sample(i)).y == 1.0);
    out.push(check(all_one, format!("U(1) 𝒴 ≡ 1 on 200 samples: {all_one}")));
    let su = FieldSpace::new(&MeasureConfig::new(GroupKind::SU, 2, 10.0, 4, 8)).unwrap();
    let ts = DensityTables::new(&su);
    let ok = density_values(&su, &ts, 1000).iter().all(|d| d.y > 0.0 && d.log_y <= d.log_bound);
    out.push(check(ok, format!("samplewise bound on 10³ SU(2) samples: {ok}")));
    let kappas = [5.0, 10.0, 20.0];
    let mut means = Vec::new();
    for &k in &kappas {
        let sp = FieldSpace::new(&MeasureConfig::new(GroupKind::SU, 2, k, 4, 8)).unwrap();
        let t = DensityTables::new(&sp);
        let ys: Vec<f64> = density_values(&sp, &t, 10_000).iter().map(|d| d.y).collect();
        means.push(mean_stderr(&ys));
    }
    let dev: Vec<f64> = means.iter().map(|(m, _)| (m - 1.0).abs()).collect();
    // least-squares fit log|E𝒴 - 1| = c - m log κ; monotone means m > 0
    let xs: Vec<f64> = kappas.iter().map(|k| k.ln()).collect();
    let ys: Vec<f64> = dev.iter().map(|d| d.max(1e-300).ln()).collect();
    let (xm, ym) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum::<f64>() / xs.iter().map(|x| (x - xm).powi(2)).sum::<f64>();
    let fit20 = (ym + slope * (xs[2] - xm)).exp();
    let s20 = means[2].1;
    out.push(check(
        dev[0] > dev[1] && dev[1] > dev[2] && slope < 0.0 && (dev[2] - fit20).abs() <= 3.0 * s20,
        format!(
            "E𝒴 = {:.4}±{:.4}, {:.4}±{:.4}, {:.5}±{:.5}; fit ∝ κ^{:.2}, |dev(20) - fit| = {:.1e} ≤ 3σ = {:.1e}",
            means[0].0,
            means[0].1,
            means[1].0,
            means[1].1,
            means[2].0,
            means[2].1,
            slope,
            (dev[2] - fit20).abs(),
            3.0 * s20
        ),
    ));
    out
}

fn c9() -> Vec<Check> {
    let mut out = Vec::new();
    let sq = Surface::unit_square();
    let cu = MeasureConfig::new(GroupKind::U1, 1, 4.0, 6, 9);
    let est = mc_expectation(&sq, &cu, 10_000, 16, 4).unwrap();
    let exact = abelian_truncated_value(&FieldSpace::new(&cu).unwrap(), &sq, 16).unwrap();
    let d = (est.mean.re - exact).abs();
    out.push(check(d <= 3.0 * est.stderr, format!("U(1) κ=4 R=6: MC {:.5}±{:.5} vs Gaussian {exact:.5}", est.mean.re, est.stderr)));
    // ‖A*A‖ < 1/4 keeps exp⟨Ax,Ax⟩ square integrable, so the stderr is finite
    let a = DMatrix::from_row_slice(2, 2, &[0.3, 0.2, 0.1, 0.25]);
    let (m, _) = matrix_gaussian_mc(&a, 1_000_000, 9);
    let e = matrix_gaussian_exact(&a).unwrap();
    out.push(check(rel(m, e) <= 0.02, format!("E[exp⟨Ax,Ax⟩] = {m:.4} vs det formula {e:.4} ({:.2}%)", 100.0 * rel(m, e))));
    let cs = MeasureConfig::new(GroupKind::SU, 2, 20.0, 4, 9);
    let est = mc_expectation(&sq, &cs, 10_000, 8, 16).unwrap();
    let target = 2.0 * (-3.0f64 / 16.0).exp();
    out.push(check(rel(est.mean.re, target) <= 0.10, format!("SU(2) κ=20 R=4: {:.4}±{:.1e} vs {target:.4} ({:.1}%)", est.mean.re, est.stderr, 100.0 * rel(est.mean.re, target))));
    out
}

fn c10() -> Vec<Check> {
    let mut worst = 0.0f64;
    let mut groups = vec![(GroupKind::U1, 1)];
    for n in 2..=5 {
        groups.push((GroupKind::SU, n));
        groups.push((GroupKind::SO, n));
    }
    for (kind, n) in groups {
        let b = build_basis(kind, n).unwrap();
        for r in [0.0, 0.5, 1.0, 2.0, 7.5] {
            worst = worst.max((quark_potential(r, &b).unwrap() - potential_closed_form(kind, n, r)).abs());
            worst = worst.max((area_law_limit(r, &b).unwrap().value - area_law_closed_form(kind, n, r)).abs());
        }
    }
    vec![check(worst <= 1e-12, format!("U1, SU(2..5), SO(2..5): max dev {worst:.1e}"))]
}

fn c11() -> Vec<Check> {
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for s in [Surface::unit_square(), Surface::TiltedPlane { theta: 0.5 }, Surface::SphericalCap { radius: 1.0, theta_max: 0.8 }] {
        let r = duality_angle(&s, 10.0, 48).unwrap();
        worst = worst.max(rel(r.norm_dual, r.norm_f));
    }
    out.push(check(worst <= 1e-6, format!("|F̄|/|F| - 1 max {worst:.1e}")));
    let reps: Vec<_> = [5.0, 10.0, 20.0].iter().map(|&k| duality_angle(&Surface::unit_square(), k, 96).unwrap()).collect();
    let exact = reps.iter().all(|r| r.inner == 0.0 && r.theta == PI / 2.0);
    out.push(check(exact, format!("planar θ = π/2 exactly at κ=5,10,20: {exact}")));
    let k2: Vec<f64> = reps.iter().map(|r| r.kappa * r.kappa * r.inner).collect();
    out.push(check(k2[0] >= k2[1] && k2[1] >= k2[2], format!("planar κ²⟨F,F̄⟩ = {:.1e},{:.1e},{:.1e} (non-increasing)", k2[0], k2[1], k2[2])));
    out
}

fn main() -> ExitCode {
    type Crit = (u32, &'static str, f64, fn() -> Vec<Check>);
    let crits: [Crit; 11] = [
        (1, "Lie identities", 1.0, c1),
        (2, "Bargmann exactness", 30.0, c2),
        (3, "Kernel identity", 60.0, c3),
        (4, "Area machinery", 120.0, c4),
        (5, "Abelian area law", 120.0, c5),
        (6, "Grid identity", 10.0, c6),
        (7, "Holonomy convergence", 300.0, c7),
        (8, "Density properties", 600.0, c8),
        (9, "Monte Carlo vs closed forms", 900.0, c9),
        (10, "Potentials", 1.0, c10),
        (11, "Duality", 120.0, c11),
    ];
    let mut unexpected = Vec::new();
    let mut n_pass = 0;
    for (id, name, budget, f) in crits {
        let t0 = Instant::now();
        let checks = f();
        let secs = t0.elapsed().as_secs_f64();
        let in_time = secs < budget;
        let pass = in_time && checks.iter().all(|c| c.pass);
        let parts: Vec<String> = checks.iter().map(|c| format!("{}{}", if c.pass { "" } else { "✗ " }, c.detail)).collect();
        println!("{} criterion {id:>2} {name} [{secs:.1}s / {budget}s]: {}", if pass { "PASS" } else { "FAIL" }, parts.join("; "));
        let documented = DOCUMENTED_FAILURES.contains(&id);
        if pass {
            n_pass += 1;
        }
        if pass == documented {
            unexpected.push(id);
        }
    }
    println!("{n_pass}/11 criteria pass; documented failures: {DOCUMENTED_FAILURES:?}");
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
