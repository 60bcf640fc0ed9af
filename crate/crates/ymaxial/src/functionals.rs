//! Evaluation functionals ζ_a(w), ξ_ab(w) and the surface functionals ν_S^κ,
//! F^κ, F̄^κ built from them. Norms never expand ξ in a basis; they go
//! through the closed-form kernel ⟨ξ_ab(w), ξ_ab(ŵ)⟩_{𝔡,κ} = ψ_w ψ_ŵ e^{w·ŵ̄}.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::bargmann::{exterior_d, pair_index, MonomialForm, PAIRS};
use crate::error::{invalid, Error, Result};
use crate::quad::{gaussian_double_sum, Rule};
use crate::surface::{complement, jacobians, levi_civita4, Surface};

pub type CPoint = [Complex64; 4];

pub fn real_point(x: [f64; 4]) -> CPoint {
    x.map(|v| Complex64::new(v, 0.0))
}

/// ψ(w) = e^{-|w|²/2}/sqrt(2π).
pub fn psi(w: &CPoint) -> f64 {
    let n2: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    (-0.5 * n2).exp() / (2.0 * PI).sqrt()
}

/// ζ_a(w): the value f_a(w).
pub fn zeta_pair(f: &MonomialForm<Complex64>, w: &CPoint, a: usize) -> Result<Complex64> {
    if !(1..=3).contains(&a) {
        return invalid(format!("component {a} outside 1..=3"));
    }
    Ok(f.comp(a).eval(w))
}

/// κ[𝔡f]_ab(w), times ψ(w) when weighted.
pub fn xi_pair(f: &MonomialForm<Complex64>, w: &CPoint, a: usize, b: usize, kappa: f64, weighted: bool) -> Result<Complex64> {
    let k = pair_index(a, b)?;
    let v = exterior_d(f).comps[k].eval(w) * kappa;
    Ok(if weighted { v * psi(w) } else { v })
}

/// ⟨ξ_ab^κ(w), ξ_ab^κ(ŵ)⟩_{𝔡,κ} = ψ_w ψ_ŵ exp(Σ w_i conj(ŵ_i)); e^{-|w-ŵ|²/2}/(2π) on real points.
pub fn xi_kernel(w: &CPoint, w_hat: &CPoint) -> Complex64 {
    let dot: Complex64 = w.iter().zip(w_hat.iter()).map(|(a, b)| a * b.conj()).sum();
    dot.exp() * psi(w) * psi(w_hat)
}

/// Same inner product by explicit coordinates in the orthonormal monomial basis
/// z^p/sqrt(p!) with p_i ≤ cutoff: ξ(w) has coordinates ψ_w conj(w)^p/sqrt(p!).
pub fn xi_kernel_truncated(w: &CPoint, w_hat: &CPoint, cutoff: u32) -> Complex64 {
    let coords = |x: &CPoint| -> Vec<Vec<Complex64>> {
        x.iter()
            .map(|z| {
                let mut v = Vec::with_capacity(cutoff as usize + 1);
                let mut cur = Complex64::new(1.0, 0.0);
                for p in 0..=cutoff {
                    if p > 0 {
                        cur = cur * z.conj() / (p as f64).sqrt();
                    }
                    v.push(cur);
                }
                v
            })
            .collect()
    };
    let (cw, ch) = (coords(w), coords(w_hat));
    let n = cutoff as usize + 1;
    let mut total = Complex64::new(0.0, 0.0);
    // Full 4-fold sum over the tensor basis, not a product of 1D sums.
    for p0 in 0..n {
        for p1 in 0..n {
            let a01 = cw[0][p0].conj() * ch[0][p0] * cw[1][p1].conj() * ch[1][p1];
            for p2 in 0..n {
                let a012 = a01 * cw[2][p2].conj() * ch[2][p2];
                for p3 in 0..n {
                    total += a012 * cw[3][p3].conj() * ch[3][p3];
                }
            }
        }
    }
    // coordinates carry conj(w)^p, so Σ conj(c_w) c_ŵ = Σ w^p conj(ŵ)^p / p!
    total * psi(w) * psi(w_hat)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub s: f64,
    pub t: f64,
    /// Scaled evaluation point κσ(s,t)/2.
    pub w: [f64; 4],
    /// Quadrature weight × per-pair surface weight, PAIRS order.
    pub weights: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurfaceFunctional {
    pub kappa: f64,
    pub prefactor: f64,
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Weighting {
    Abs,
    Dual,
}

fn build(surf: &Surface, kappa: f64, resolution: usize, prefactor: f64, weighting: Weighting) -> Result<SurfaceFunctional> {
    if resolution < 2 {
        return invalid("surface functionals need resolution >= 2");
    }
    if !(kappa > 0.0) {
        return invalid("kappa must be positive");
    }
    surf.validate()?;
    let mut nodes = Vec::with_capacity(resolution * resolution);
    for (s, t, q) in crate::quad::tensor_grid(Rule::Midpoint, resolution) {
        let j = jacobians(surf, s, t)?;
        let weights = match weighting {
            Weighting::Abs => j.abs_dets().map(|d| d * q),
            Weighting::Dual => PAIRS.map(|(a, b)| {
                let (c, d) = complement(a, b);
                levi_civita4([a, b, c, d]) as f64 * j.det(c, d).abs() * q
            }),
        };
        let w = surf.point(s, t).map(|x| kappa * x / 2.0);
        nodes.push(Node { s, t, w, weights });
    }
    Ok(SurfaceFunctional { kappa, prefactor, nodes })
}

/// ν_S^κ = Σ_{a<b} (κ²/4) ∫ |J_ab| ξ_ab^κ(κσ/2) ds dt on a midpoint grid.
pub fn nu_surface(surf: &Surface, kappa: f64, resolution: usize) -> Result<SurfaceFunctional> {
    build(surf, kappa, resolution, kappa * kappa / 4.0, Weighting::Abs)
}

/// F^κ = Σ_{a<b} ∫ |J_ab| ξ_ab^κ(κσ/2) ds dt.
pub fn f_surface(surf: &Surface, kappa: f64, resolution: usize) -> Result<SurfaceFunctional> {
    build(surf, kappa, resolution, 1.0, Weighting::Abs)
}

/// F̄^κ: the (a,b) component carries ε_{abcd}|J_cd| with (c,d) the complementary ordered pair.
pub fn dual_functional(surf: &Surface, kappa: f64, resolution: usize) -> Result<SurfaceFunctional> {
    build(surf, kappa, resolution, 1.0, Weighting::Dual)
}

impl SurfaceFunctional {
    fn points(&self) -> Vec<[f64; 4]> {
        self.nodes.iter().map(|n| n.w).collect()
    }

    fn weights(&self) -> Vec<[f64; 6]> {
        self.nodes.iter().map(|n| n.weights).collect()
    }

    /// ⟨self, other⟩_{𝔡,κ} through the real-point kernel e^{-|w-ŵ|²/2}/(2π).
    pub fn inner(&self, other: &SurfaceFunctional) -> f64 {
        let v = gaussian_double_sum(&self.points(), &self.weights(), &other.points(), &other.weights(), 0.5);
        self.prefactor * other.prefactor * v / (2.0 * PI)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.inner(self)
    }

    /// Same as inner, with an arbitrary kernel (used by the truncated-basis oracle).
    pub fn inner_with(&self, other: &SurfaceFunctional, kernel: impl Fn(&CPoint, &CPoint) -> Complex64) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for m in &self.nodes {
            for n in &other.nodes {
                let dot: f64 = m.weights.iter().zip(n.weights.iter()).map(|(a, b)| a * b).sum();
                if dot != 0.0 {
                    s += kernel(&real_point(m.w), &real_point(n.w)) * dot;
                }
            }
        }
        s * (self.prefactor * other.prefactor)
    }

    /// Pairing with a monomial form: prefactor Σ_nodes Σ_ab weight_ab ψ(w) κ[𝔡f]_ab(w).
    pub fn pair(&self, f: &MonomialForm<Complex64>) -> Complex64 {
        let d = exterior_d(f);
        let mut s = Complex64::new(0.0, 0.0);
        for n in &self.nodes {
            let w = real_point(n.w);
            let ps = psi(&w);
            for k in 0..6 {
                if n.weights[k] != 0.0 && !d.comps[k].is_zero() {
                    s += d.comps[k].eval(&w) * (self.kappa * ps * n.weights[k]);
                }
            }
        }
        s * self.prefactor
    }
}

/// exp(-|ν_S^κ|²/(2κ²)); tends to e^{-area/8}.
pub fn abelian_value(surf: &Surface, kappa: f64, resolution: usize) -> Result<f64> {
    let nu = nu_surface(surf, kappa, resolution)?;
    Ok((-nu.norm_sqr() / (2.0 * kappa * kappa)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualityReport {
    pub kappa: f64,
    pub norm_f: f64,
    pub norm_dual: f64,
    pub inner: f64,
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub theta: f64,
    /// (κ/2)^4 ⟨F, F̄⟩ / (2π)²; diagnostic only.
    pub lk_estimate: f64,
}

/// cos θ = ⟨F, F̄⟩/|F|², sin θ = sqrt(|F|⁴ - ⟨F, F̄⟩²)/|F|² so that cos² + sin² = 1.
pub fn duality_angle(surf: &Surface, kappa: f64, resolution: usize) -> Result<DualityReport> {
    let f = f_surface(surf, kappa, resolution)?;
    let fb = dual_functional(surf, kappa, resolution)?;
    let nf2 = f.norm_sqr();
    if !(nf2 > 0.0) {
        return Err(Error::InvalidInput("duality angle undefined: |F| = 0".into()));
    }
    let inner = f.inner(&fb);
    let cos_theta = (inner / nf2).clamp(-1.0, 1.0);
    let sin_theta = (nf2 * nf2 - inner * inner).max(0.0).sqrt() / nf2;
    Ok(DualityReport {
        kappa,
        norm_f: nf2.sqrt(),
        norm_dual: fb.norm_sqr().sqrt(),
        inner,
        cos_theta,
        sin_theta,
        theta: cos_theta.acos(),
        lk_estimate: (kappa / 2.0).powi(4) * inner / (4.0 * PI * PI),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bargmann::{fd_inner, MultiIndex, Poly};
    use crate::surface::heat_kernel_area;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn const_form(a: usize) -> MonomialForm<Complex64> {
        MonomialForm::single(a, Poly::monomial(MultiIndex::ZERO, c(1.0)))
    }

    #[test]
    fn zeta_of_normalized_constant() {
        let kappa = 3.0;
        let f = const_form(1);
        let n = fd_inner(&f, &f, kappa).re.sqrt();
        let g = MonomialForm::single(1, f.comp(1).scale(&c(1.0 / n)));
        for w in [[0.0; 4], [0.3, -1.0, 0.2, 2.0]] {
            let v = zeta_pair(&g, &real_point(w), 1).unwrap();
            assert!((v.re - 2.0 / (kappa * 3f64.sqrt())).abs() < 1e-14);
            assert_eq!(zeta_pair(&const_form(2), &real_point(w), 1).unwrap(), c(0.0));
        }
    }

    #[test]
    fn xi_of_constant_form() {
        let kappa = 2.5;
        let w = real_point([0.7, 0.1, -0.3, 0.4]);
        let v = xi_pair(&const_form(1), &w, 0, 1, kappa, false).unwrap();
        assert!((v - c(-kappa * 0.7 / 2.0)).norm() < 1e-14);
        assert_eq!(xi_pair(&const_form(2), &w, 0, 1, kappa, false).unwrap(), c(0.0));
        assert!(xi_pair(&const_form(1), &w, 1, 0, kappa, false).is_err());
    }

    #[test]
    fn kernel_diagonal_and_decay() {
        let w = real_point([0.3, -0.2, 0.5, 0.1]);
        assert!((xi_kernel(&w, &w).re - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let far = real_point([30.0, 0.0, 0.0, 0.0]);
        assert!(xi_kernel(&w, &far).norm() < 1e-150);
    }

    #[test]
    fn truncated_kernel_matches_closed_form_complex() {
        let w = [Complex64::new(0.3, 0.2), c(-0.4), Complex64::new(0.0, 0.5), c(0.1)];
        let v = [c(0.2), Complex64::new(-0.3, 0.1), c(0.6), Complex64::new(0.2, -0.2)];
        let a = xi_kernel(&w, &v);
        let b = xi_kernel_truncated(&w, &v, 20);
        assert!((a - b).norm() < 1e-14);
    }

    #[test]
    fn point_surface_is_zero() {
        let p = Surface::Point { x: [0.1, 0.2, 0.3, 0.4] };
        let nu = nu_surface(&p, 5.0, 8).unwrap();
        assert_eq!(nu.norm_sqr(), 0.0);
        assert_eq!(abelian_value(&p, 5.0, 8).unwrap(), 1.0);
        assert!(duality_angle(&p, 5.0, 8).is_err());
        assert_eq!(dual_functional(&p, 5.0, 8).unwrap().norm_sqr(), 0.0);
    }

    #[test]
    fn nu_norm_is_heat_kernel_over_8pi_times_kappa_sq() {
        // |ν|²/κ² = HK/(8π): two code paths over the same nodes
        let s = Surface::TiltedPlane { theta: 0.4 };
        let kappa = 7.0;
        let nu = nu_surface(&s, kappa, 24).unwrap();
        let hk = heat_kernel_area(&s, kappa, 24, false).unwrap().value;
        assert!((nu.norm_sqr() / (kappa * kappa) - hk / (8.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn nu_is_additive_over_halves() {
        let sq = Surface::unit_square();
        let kappa = 3.0;
        let res = 16;
        let full = nu_surface(&sq, kappa, res).unwrap();
        let half = |s0: f64, s1: f64| Surface::SubDomain { base: Box::new(sq.clone()), s0, s1, t0: 0.0, t1: 1.0 };
        // halves at resolution res/2 in s and res in t reproduce the full midpoint grid
        let mut f = MonomialForm::<Complex64>::zero();
        f.comps[0] = Poly::monomial(MultiIndex([1, 0, 0, 0]), c(0.8));
        f.comps[0].add_term(MultiIndex([0, 1, 0, 0]), c(-0.3));
        f.comps[1] = Poly::monomial(MultiIndex([2, 0, 0, 0]), c(0.5));
        let left = build_aniso(&half(0.0, 0.5), kappa, res / 2, res);
        let right = build_aniso(&half(0.5, 1.0), kappa, res / 2, res);
        let total = left.pair(&f) + right.pair(&f);
        assert!((total - full.pair(&f)).norm() < 1e-10 * full.pair(&f).norm().max(1.0));
    }

    /// Midpoint functional on an ns × nt grid (test helper for additivity).
    fn build_aniso(surf: &Surface, kappa: f64, ns: usize, nt: usize) -> SurfaceFunctional {
        let mut nodes = Vec::new();
        for j in 0..nt {
            for i in 0..ns {
                let (s, t) = ((i as f64 + 0.5) / ns as f64, (j as f64 + 0.5) / nt as f64);
                let q = 1.0 / (ns * nt) as f64;
                let jac = jacobians(surf, s, t).unwrap();
                nodes.push(Node { s, t, w: surf.point(s, t).map(|x| kappa * x / 2.0), weights: jac.abs_dets().map(|d| d * q) });
            }
        }
        SurfaceFunctional { kappa, prefactor: kappa * kappa / 4.0, nodes }
    }

    #[test]
    fn nu_norm_truncated_basis_consistency() {
        // κ ≤ 4 keeps κσ/2 inside the radius where a cutoff-20 expansion converges
        let s = Surface::unit_square();
        let nu = nu_surface(&s, 4.0, 10).unwrap();
        let closed = nu.norm_sqr();
        let trunc = nu.inner_with(&nu, |a, b| xi_kernel_truncated(a, b, 20)).re;
        assert!((closed - trunc).abs() < 1e-3 * closed);
    }

    #[test]
    fn dual_support_and_equal_norm() {
        let s = Surface::unit_square();
        let fb = dual_functional(&s, 5.0, 8).unwrap();
        for n in &fb.nodes {
            assert_eq!(n.weights[..5], [0.0; 5]);
            assert!(n.weights[5] > 0.0);
        }
        let t = Surface::TiltedPlane { theta: 0.3 };
        let r = duality_angle(&t, 6.0, 20).unwrap();
        assert!((r.norm_f - r.norm_dual).abs() < 1e-12 * r.norm_f);
        assert_eq!(r.inner, 0.0);
        assert_eq!(r.theta, PI / 2.0);
        assert!((r.cos_theta.powi(2) + r.sin_theta.powi(2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn duality_angle_on_generic_surface_is_consistent() {
        let g = Surface::PolyChart {
            comps: [vec![(1, 0, 1.0)], vec![(0, 1, 1.0)], vec![(1, 1, 0.6), (2, 0, 0.2)], vec![(0, 2, 0.5), (1, 0, 0.3)]],
        };
        let r = duality_angle(&g, 5.0, 16).unwrap();
        assert!(r.inner != 0.0);
        assert!((r.norm_f - r.norm_dual).abs() < 1e-12 * r.norm_f);
        assert!((r.cos_theta.powi(2) + r.sin_theta.powi(2) - 1.0).abs() < 1e-12);
        assert!((0.0..=PI).contains(&r.theta));
    }
}
