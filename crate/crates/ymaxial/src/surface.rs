//! Parametrized surfaces σ: [0,1]² → R^4, their 2×2 Jacobian minors, the
//! area density ρ_S and the Gaussian heat-kernel double integral.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bargmann::PAIRS;
use crate::error::{invalid, Error, Result};
use crate::quad::{gaussian_double_sum, pairwise_sum, tensor_grid, Rule};

/// Monomial table Σ c s^i t^j.
pub type PolyST = Vec<(u32, u32, f64)>;

fn poly_st(p: &PolyST, s: f64, t: f64) -> (f64, f64, f64) {
    let (mut v, mut ds, mut dt) = (0.0, 0.0, 0.0);
    for &(i, j, c) in p {
        v += c * s.powi(i as i32) * t.powi(j as i32);
        if i > 0 {
            ds += c * i as f64 * s.powi(i as i32 - 1) * t.powi(j as i32);
        }
        if j > 0 {
            dt += c * j as f64 * s.powi(i as i32) * t.powi(j as i32 - 1);
        }
    }
    (v, ds, dt)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Surface {
    /// σ = r·s e_a + t_len·t e_b on the coordinate plane (a, b).
    Rectangle {
        r: f64,
        #[serde(rename = "t")]
        t_len: f64,
        #[serde(default = "default_plane")]
        plane: (usize, usize),
    },
    /// σ = (s, t cos θ, t sin θ, 0).
    TiltedPlane { theta: f64 },
    /// σ = (ρ sin(θ_max s) cos 2πt, ρ sin(θ_max s) sin 2πt, ρ cos(θ_max s), 0); area 2πρ²(1 - cos θ_max).
    SphericalCap { radius: f64, theta_max: f64 },
    /// σ = (s, ρ cos(φ t), ρ sin(φ t), 0); area ρφ.
    Cylinder { radius: f64, angle: f64 },
    /// σ = (s, t, h(s,t), 0).
    PolyGraph { h: PolyST },
    /// σ^i = p_i(s, t) for i = 0..3.
    PolyChart { comps: [PolyST; 4] },
    /// σ(s^power, t) for power ≥ 1.
    Reparam { base: Box<Surface>, power: f64 },
    /// σ restricted to [s0,s1]×[t0,t1], rescaled to the unit square.
    SubDomain { base: Box<Surface>, s0: f64, s1: f64, t0: f64, t1: f64 },
    /// Constant map; every Jacobian vanishes.
    Point { x: [f64; 4] },
}

fn default_plane() -> (usize, usize) {
    (0, 1)
}

impl Surface {
    pub fn unit_square() -> Surface {
        Surface::Rectangle { r: 1.0, t_len: 1.0, plane: (0, 1) }
    }

    pub fn rectangle(r: f64, t: f64) -> Surface {
        Surface::Rectangle { r, t_len: t, plane: (0, 1) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Surface::Rectangle { r, t_len, plane } => {
                if plane.0 >= plane.1 || plane.1 > 3 {
                    return invalid(format!("rectangle plane {plane:?} must satisfy a < b <= 3"));
                }
                if !(r.is_finite() && t_len.is_finite() && *r >= 0.0 && *t_len >= 0.0) {
                    return invalid("rectangle sides must be finite and nonnegative");
                }
            }
            Surface::Reparam { base, power } => {
                if !(*power >= 1.0) {
                    return invalid("reparametrization power must be >= 1");
                }
                base.validate()?;
            }
            Surface::SubDomain { base, s0, s1, t0, t1 } => {
                if !(0.0 <= *s0 && s0 < s1 && *s1 <= 1.0 && 0.0 <= *t0 && t0 < t1 && *t1 <= 1.0) {
                    return invalid("sub-domain must be a nonempty box inside [0,1]^2");
                }
                base.validate()?;
            }
            _ => {}
        }
        Ok(())
    }

    /// (σ, ∂σ/∂s, ∂σ/∂t) at (s, t).
    pub fn eval(&self, s: f64, t: f64) -> ([f64; 4], [f64; 4], [f64; 4]) {
        match self {
            Surface::Rectangle { r, t_len, plane } => {
                let (mut x, mut ds, mut dt) = ([0.0; 4], [0.0; 4], [0.0; 4]);
                x[plane.0] = r * s;
                x[plane.1] = t_len * t;
                ds[plane.0] = *r;
                dt[plane.1] = *t_len;
                (x, ds, dt)
            }
            Surface::TiltedPlane { theta } => {
                let (c, sn) = (theta.cos(), theta.sin());
                ([s, t * c, t * sn, 0.0], [1.0, 0.0, 0.0, 0.0], [0.0, c, sn, 0.0])
            }
            Surface::SphericalCap { radius, theta_max } => {
                let th = theta_max * s;
                let ph = 2.0 * PI * t;
                let (st, ct, sp, cp) = (th.sin(), th.cos(), ph.sin(), ph.cos());
                let x = [radius * st * cp, radius * st * sp, radius * ct, 0.0];
                let ds = [radius * theta_max * ct * cp, radius * theta_max * ct * sp, -radius * theta_max * st, 0.0];
                let dt = [-radius * st * 2.0 * PI * sp, radius * st * 2.0 * PI * cp, 0.0, 0.0];
                (x, ds, dt)
            }
            Surface::Cylinder { radius, angle } => {
                let ph = angle * t;
                (
                    [s, radius * ph.cos(), radius * ph.sin(), 0.0],
                    [1.0, 0.0, 0.0, 0.0],
                    [0.0, -radius * angle * ph.sin(), radius * angle * ph.cos(), 0.0],
                )
            }
            Surface::PolyGraph { h } => {
                let (v, hs, ht) = poly_st(h, s, t);
                ([s, t, v, 0.0], [1.0, 0.0, hs, 0.0], [0.0, 1.0, ht, 0.0])
            }
            Surface::PolyChart { comps } => {
                let (mut x, mut ds, mut dt) = ([0.0; 4], [0.0; 4], [0.0; 4]);
                for i in 0..4 {
                    (x[i], ds[i], dt[i]) = poly_st(&comps[i], s, t);
                }
                (x, ds, dt)
            }
            Surface::Reparam { base, power } => {
                let u = s.powf(*power);
                let du = if s == 0.0 && *power > 1.0 { 0.0 } else { power * s.powf(power - 1.0) };
                let (x, ds, dt) = base.eval(u, t);
                (x, ds.map(|v| v * du), dt)
            }
            Surface::SubDomain { base, s0, s1, t0, t1 } => {
                let (x, ds, dt) = base.eval(s0 + (s1 - s0) * s, t0 + (t1 - t0) * t);
                (x, ds.map(|v| v * (s1 - s0)), dt.map(|v| v * (t1 - t0)))
            }
            Surface::Point { x } => (*x, [0.0; 4], [0.0; 4]),
        }
    }

    pub fn point(&self, s: f64, t: f64) -> [f64; 4] {
        self.eval(s, t).0
    }

    /// Closed-form area where one is known.
    pub fn exact_area(&self) -> Option<f64> {
        match self {
            Surface::Rectangle { r, t_len, .. } => Some(r * t_len),
            Surface::TiltedPlane { .. } => Some(1.0),
            Surface::SphericalCap { radius, theta_max } => Some(2.0 * PI * radius * radius * (1.0 - theta_max.cos())),
            Surface::Cylinder { radius, angle } => Some(radius * angle),
            Surface::Reparam { base, .. } => base.exact_area(),
            Surface::Point { .. } => Some(0.0),
            _ => None,
        }
    }
}

/// ∂σ/∂s and ∂σ/∂t at a point; J_ab has rows (σ'_a, σ̇_a), (σ'_b, σ̇_b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianSet {
    pub ds: [f64; 4],
    pub dt: [f64; 4],
}

impl JacobianSet {
    pub fn matrix(&self, a: usize, b: usize) -> [[f64; 2]; 2] {
        [[self.ds[a], self.dt[a]], [self.ds[b], self.dt[b]]]
    }

    /// Signed det J_ab for any a ≠ b; antisymmetric under swap.
    pub fn det(&self, a: usize, b: usize) -> f64 {
        self.ds[a] * self.dt[b] - self.dt[a] * self.ds[b]
    }

    /// |J_ab| for the six ordered pairs in PAIRS order.
    pub fn abs_dets(&self) -> [f64; 6] {
        PAIRS.map(|(a, b)| self.det(a, b).abs())
    }

    /// det(DσᵀDσ) = Σ_{a<b} det(J_ab)² (Cauchy-Binet).
    pub fn gram_det(&self) -> f64 {
        PAIRS.iter().map(|&(a, b)| self.det(a, b).powi(2)).sum()
    }
}

pub fn jacobians(surf: &Surface, s: f64, t: f64) -> Result<JacobianSet> {
    let (_, ds, dt) = surf.eval(s, t);
    if ds.iter().chain(dt.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NumericalGuard(format!("non-finite derivative at ({s}, {t})")));
    }
    Ok(JacobianSet { ds, dt })
}

/// Complementary pair of (a, b) in {0,1,2,3}, ascending.
pub fn complement(a: usize, b: usize) -> (usize, usize) {
    let mut rest = (0..4).filter(|&i| i != a && i != b);
    let c = rest.next().unwrap();
    let d = rest.next().unwrap();
    (c, d)
}

/// |J_ab| ρ^{ab} = |J_ab|² / sqrt(det[J_abᵀJ_ab + J_cdᵀJ_cd]); 0 on degenerate points.
pub fn rho_weighted(j: &JacobianSet, a: usize, b: usize) -> f64 {
    let g = j.gram_det();
    if g <= 0.0 {
        return 0.0;
    }
    j.det(a, b).powi(2) / g.sqrt()
}

pub fn rho_weighted_jacobian(surf: &Surface, s: f64, t: f64, a: usize, b: usize) -> Result<f64> {
    if !(a < b && b <= 3) {
        return invalid(format!("({a},{b}) is not an ordered pair"));
    }
    Ok(rho_weighted(&jacobians(surf, s, t)?, a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaReport {
    pub area: f64,
    /// ∫ |J_ab| ρ^{ab} per pair, PAIRS order.
    pub per_pair: [f64; 6],
}

pub fn area(surf: &Surface, resolution: usize) -> Result<AreaReport> {
    area_with(surf, resolution, Rule::Midpoint)
}

pub fn area_with(surf: &Surface, resolution: usize, rule: Rule) -> Result<AreaReport> {
    if resolution < 2 {
        return invalid("area needs resolution >= 2");
    }
    surf.validate()?;
    let grid = tensor_grid(rule, resolution);
    let mut cols: [Vec<f64>; 6] = Default::default();
    for &(s, t, w) in &grid {
        let j = jacobians(surf, s, t)?;
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            cols[k].push(w * rho_weighted(&j, a, b));
        }
    }
    let per_pair = [0, 1, 2, 3, 4, 5].map(|k| pairwise_sum(&cols[k]));
    Ok(AreaReport { area: pairwise_sum(&per_pair), per_pair })
}

/// Nodes (σ, |J_ab|·weight) of a tensor grid; the common input of every double integral.
pub fn weighted_nodes(surf: &Surface, resolution: usize, rule: Rule) -> Result<(Vec<[f64; 4]>, Vec<[f64; 6]>)> {
    surf.validate()?;
    let grid = tensor_grid(rule, resolution);
    let mut xs = Vec::with_capacity(grid.len());
    let mut ws = Vec::with_capacity(grid.len());
    for &(s, t, w) in &grid {
        let j = jacobians(surf, s, t)?;
        xs.push(surf.point(s, t));
        ws.push(j.abs_dets().map(|d| d * w));
    }
    Ok((xs, ws))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatKernelReport {
    pub value: f64,
    pub warning: Option<String>,
}

/// Σ_{a<b} (κ²/4) ∬ exp(-κ²|σ - σ̄|²/8) |J_ab||J_ab| → 2π area(S).
/// Warns when κ/resolution > 1 (Gaussian width 2/κ under-resolved); strict turns that into an error.
pub fn heat_kernel_area(surf: &Surface, kappa: f64, resolution: usize, strict: bool) -> Result<HeatKernelReport> {
    if resolution < 2 {
        return invalid("heat_kernel_area needs resolution >= 2");
    }
    if !(kappa > 0.0) {
        return invalid("kappa must be positive");
    }
    let warning = if kappa / resolution as f64 > 1.0 {
        let msg = format!("kappa/resolution = {:.3} > 1: Gaussian width not resolved", kappa / resolution as f64);
        if strict {
            return Err(Error::NumericalGuard(msg));
        }
        Some(msg)
    } else {
        None
    };
    let (xs, ws) = weighted_nodes(surf, resolution, Rule::Midpoint)?;
    let v = gaussian_double_sum(&xs, &ws, &xs, &ws, kappa * kappa / 8.0);
    Ok(HeatKernelReport { value: kappa * kappa / 4.0 * v, warning })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalLimit {
    pub value: f64,
    /// 2π |J_ab(p)| / sqrt(det G(p)) = 2π / sqrt(det[1 + WᵀW]).
    pub limit: f64,
}

/// (κ²/4) ∫ exp(-κ²|σ(p) - σ(u)|²/8) |J_ab(u)| du at an interior point p.
pub fn local_limit_check(surf: &Surface, p: (f64, f64), pair: (usize, usize), kappa: f64, resolution: usize) -> Result<LocalLimit> {
    let (a, b) = pair;
    if !(a < b && b <= 3) {
        return invalid(format!("({a},{b}) is not an ordered pair"));
    }
    if !(p.0 > 0.0 && p.0 < 1.0 && p.1 > 0.0 && p.1 < 1.0) {
        return invalid("local limit needs an interior point");
    }
    let jp = jacobians(surf, p.0, p.1)?;
    if jp.det(a, b).abs() < 1e-12 {
        return Err(Error::InvalidInput(format!("J_{a}{b} singular at {p:?}")));
    }
    let x0 = surf.point(p.0, p.1);
    let beta = kappa * kappa / 8.0;
    let vals: Vec<f64> = tensor_grid(Rule::GaussLegendre, resolution)
        .iter()
        .map(|&(s, t, w)| {
            let (x, ds, dt) = surf.eval(s, t);
            let d2: f64 = x.iter().zip(x0.iter()).map(|(u, v)| (u - v) * (u - v)).sum();
            let j = JacobianSet { ds, dt };
            w * (-beta * d2).exp() * j.det(a, b).abs()
        })
        .collect();
    Ok(LocalLimit {
        value: kappa * kappa / 4.0 * pairwise_sum(&vals),
        limit: 2.0 * PI * jp.det(a, b).abs() / jp.gram_det().sqrt(),
    })
}

/// Sign of the permutation (a,b,c,d) of (0,1,2,3); 0 if any index repeats.
pub fn levi_civita4(idx: [usize; 4]) -> i32 {
    perm_sign(&idx)
}

/// Sign of the permutation (i,j,k) of (1,2,3); 0 if any index repeats.
pub fn levi_civita3(idx: [usize; 3]) -> i32 {
    perm_sign(&idx.map(|i| i.wrapping_sub(1)))
}

fn perm_sign(idx: &[usize]) -> i32 {
    let n = idx.len();
    if idx.iter().any(|&i| i >= n) {
        return 0;
    }
    let mut sign = 1;
    for i in 0..n {
        for j in (i + 1)..n {
            if idx[i] == idx[j] {
                return 0;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}
