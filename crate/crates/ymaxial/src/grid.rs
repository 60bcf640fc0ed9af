//! The directed grid Z_n, its canonical traversal, parallel transport of
//! matrix-valued connections along σ(edges), plaquette holonomies, and the
//! plaquette-ordered surface product that reproduces the boundary holonomy.
//!
//! Transport convention: for a path γ2 after γ1, U(γ2∘γ1) = U(γ2)U(γ1), i.e.
//! later transports multiply on the left, and U solves u' = M(τ)u.

use std::cmp::Ordering;
use std::collections::HashMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lie::{build_basis, max_abs, CMat, GroupKind, LieBasis};
use crate::quad::{rule_1d, Rule};
use crate::surface::{jacobians, Surface};

pub type Vertex = (usize, usize);

/// Unit step between neighbouring vertices (i, j) ↦ (i/n, j/n).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DirEdge {
    pub from: Vertex,
    pub to: Vertex,
}

impl DirEdge {
    /// Canonical undirected key: the right- or up-pointing orientation.
    pub fn key(&self) -> (DirEdge, bool) {
        let positive = self.to.0 > self.from.0 || self.to.1 > self.from.1;
        if positive {
            (*self, true)
        } else {
            (DirEdge { from: self.to, to: self.from }, false)
        }
    }

    pub fn reversed(&self) -> DirEdge {
        DirEdge { from: self.to, to: self.from }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridZn {
    pub n: usize,
    /// Canonical traversal, first edge first.
    pub edges: Vec<DirEdge>,
}

#[derive(Clone, Copy)]
enum Move {
    Right,
    Up,
    Left,
    Down,
}

/// Traversal: R; then for each row j: R^{n-1}, Λ^{n-1}, U; then C^{n-1}; then left, down.
/// Λ = (up, left, down) sweeps a row back leftwards; C = (left, down, right) closes column 0.
pub fn build_grid(n: usize) -> Result<GridZn> {
    if n < 1 {
        return invalid("grid needs n >= 1");
    }
    let mut moves = vec![Move::Right];
    for _ in 0..n {
        moves.extend(std::iter::repeat(Move::Right).take(n - 1));
        for _ in 0..(n - 1) {
            moves.extend([Move::Up, Move::Left, Move::Down]);
        }
        moves.push(Move::Up);
    }
    for _ in 0..(n - 1) {
        moves.extend([Move::Left, Move::Down, Move::Right]);
    }
    moves.extend([Move::Left, Move::Down]);
    let mut pos: Vertex = (0, 0);
    let mut edges = Vec::with_capacity(moves.len());
    for m in moves {
        let to = match m {
            Move::Right => (pos.0 + 1, pos.1),
            Move::Up => (pos.0, pos.1 + 1),
            Move::Left => (pos.0 - 1, pos.1),
            Move::Down => (pos.0, pos.1 - 1),
        };
        edges.push(DirEdge { from: pos, to });
        pos = to;
    }
    debug_assert_eq!(pos, (0, 0));
    Ok(GridZn { n, edges })
}

/// Counterclockwise boundary of Z_n from (0,0).
pub fn boundary_edges(n: usize) -> Vec<DirEdge> {
    let mut out = Vec::with_capacity(4 * n);
    for i in 0..n {
        out.push(DirEdge { from: (i, 0), to: (i + 1, 0) });
    }
    for j in 0..n {
        out.push(DirEdge { from: (n, j), to: (n, j + 1) });
    }
    for i in (0..n).rev() {
        out.push(DirEdge { from: (i + 1, n), to: (i, n) });
    }
    for j in (0..n).rev() {
        out.push(DirEdge { from: (0, j + 1), to: (0, j) });
    }
    out
}

/// Every undirected edge of Z_n in positive orientation.
pub fn all_edges(n: usize) -> Vec<DirEdge> {
    let mut out = Vec::with_capacity(2 * n * (n + 1));
    for j in 0..=n {
        for i in 0..n {
            out.push(DirEdge { from: (i, j), to: (i + 1, j) });
        }
    }
    for i in 0..=n {
        for j in 0..n {
            out.push(DirEdge { from: (i, j), to: (i, j + 1) });
        }
    }
    out
}

/// Matrices on undirected edges; the reverse orientation uses the stored inverse.
#[derive(Debug, Clone)]
pub struct EdgeField {
    pub n: usize,
    pub dim: usize,
    forward: HashMap<DirEdge, CMat>,
    backward: HashMap<DirEdge, CMat>,
}

impl EdgeField {
    /// `f` receives each edge in positive orientation.
    pub fn from_fn(n: usize, dim: usize, f: impl Fn(&DirEdge) -> CMat) -> Result<EdgeField> {
        let mut forward = HashMap::new();
        let mut backward = HashMap::new();
        for e in all_edges(n) {
            let m = f(&e);
            let inv = m.clone().try_inverse().ok_or_else(|| Error::NumericalGuard(format!("singular edge matrix on {e:?}")))?;
            forward.insert(e, m);
            backward.insert(e, inv);
        }
        Ok(EdgeField { n, dim, forward, backward })
    }

    pub fn from_pairs(n: usize, dim: usize, pairs: Vec<(DirEdge, CMat)>) -> Result<EdgeField> {
        let map: HashMap<DirEdge, CMat> = pairs.into_iter().collect();
        EdgeField::from_fn(n, dim, |e| map.get(e).cloned().unwrap_or_else(|| CMat::identity(dim, dim)))
    }

    pub fn transport(&self, e: &DirEdge) -> &CMat {
        let (k, positive) = e.key();
        if positive {
            &self.forward[&k]
        } else {
            &self.backward[&k]
        }
    }

    /// Later edges multiply on the left.
    pub fn path_product(&self, path: &[DirEdge]) -> CMat {
        let mut u = CMat::identity(self.dim, self.dim);
        for e in path {
            u = self.transport(e) * u;
        }
        u
    }
}

#[derive(Debug, Clone)]
pub struct GridCheck {
    pub traversal: CMat,
    pub boundary: CMat,
    pub deviation: f64,
}

/// Ordered product along the canonical traversal vs the counterclockwise boundary product.
pub fn grid_identity_check(field: &EdgeField) -> Result<GridCheck> {
    let g = build_grid(field.n)?;
    let traversal = field.path_product(&g.edges);
    let boundary = field.path_product(&boundary_edges(field.n));
    let deviation = max_abs(&(&traversal - &boundary));
    Ok(GridCheck { traversal, boundary, deviation })
}

/// t descending, then s ascending.
pub fn time_order_compare(p1: (f64, f64), p2: (f64, f64)) -> Ordering {
    p2.1.partial_cmp(&p1.1).unwrap_or(Ordering::Equal).then(p1.0.partial_cmp(&p2.0).unwrap_or(Ordering::Equal))
}

/// Real polynomial Σ c x^m in x^0..x^3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RealPoly4(pub Vec<([u32; 4], f64)>);

impl RealPoly4 {
    pub fn eval(&self, x: &[f64; 4]) -> f64 {
        self.0.iter().map(|(m, c)| c * (0..4).map(|i| x[i].powi(m[i] as i32)).product::<f64>()).sum()
    }

    /// ∂/∂x^k
    pub fn deriv(&self, k: usize) -> RealPoly4 {
        RealPoly4(
            self.0
                .iter()
                .filter(|(m, _)| m[k] > 0)
                .map(|(m, c)| {
                    let mut m2 = *m;
                    m2[k] -= 1;
                    (m2, c * m[k] as f64)
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct ConnTerm {
    /// 1-form component i ∈ {1, 2, 3}; the dx^0 component vanishes in axial gauge.
    pub i: usize,
    pub generator: CMat,
    pub poly: RealPoly4,
}

/// A = Σ_i Σ_terms poly(x) · generator ⊗ dx^i.
#[derive(Debug, Clone)]
pub struct ConnectionField {
    pub dim: usize,
    pub terms: Vec<ConnTerm>,
}

/// Config form: polynomial coefficient tables tagged with a Lie-algebra direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionSpec {
    pub group: GroupKind,
    pub n: usize,
    pub components: Vec<ConnectionComponent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionComponent {
    pub i: usize,
    pub alpha: usize,
    pub poly: RealPoly4,
}

impl ConnectionField {
    pub fn zero(dim: usize) -> ConnectionField {
        ConnectionField { dim, terms: vec![] }
    }

    pub fn from_spec(spec: &ConnectionSpec) -> Result<ConnectionField> {
        let basis = build_basis(spec.group, spec.n)?;
        let mut terms = Vec::new();
        for c in &spec.components {
            if !(1..=3).contains(&c.i) {
                return invalid(format!("connection component {} outside 1..=3 (dx^0 is gauged away)", c.i));
            }
            if c.alpha >= basis.algebra_dim() {
                return invalid(format!("Lie direction {} out of range", c.alpha));
            }
            terms.push(ConnTerm { i: c.i, generator: basis.generators[c.alpha].clone(), poly: c.poly.clone() });
        }
        Ok(ConnectionField { dim: spec.n, terms })
    }

    /// (A_1, A_2, A_3) at x.
    pub fn eval(&self, x: &[f64; 4]) -> [CMat; 3] {
        let mut out = [CMat::zeros(self.dim, self.dim), CMat::zeros(self.dim, self.dim), CMat::zeros(self.dim, self.dim)];
        for t in &self.terms {
            let v = t.poly.eval(x);
            if v != 0.0 {
                out[t.i - 1] += &t.generator * Complex64::new(v, 0.0);
            }
        }
        out
    }

    /// A_i at x for i ∈ 0..=3, with A_0 = 0.
    fn comp(&self, all: &[CMat; 3], i: usize) -> CMat {
        if i == 0 {
            CMat::zeros(self.dim, self.dim)
        } else {
            all[i - 1].clone()
        }
    }

    /// ∂_k A_i at x, with i ∈ 0..=3.
    fn deriv(&self, x: &[f64; 4], i: usize, k: usize) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        for t in self.terms.iter().filter(|t| t.i == i) {
            let v = t.poly.deriv(k).eval(x);
            if v != 0.0 {
                out += &t.generator * Complex64::new(v, 0.0);
            }
        }
        out
    }

    /// F_ab = ∂_a A_b - ∂_b A_a - [A_a, A_b]: the curvature matching u' = Mu transport.
    pub fn curvature(&self, x: &[f64; 4], a: usize, b: usize) -> CMat {
        let all = self.eval(x);
        let (aa, ab) = (self.comp(&all, a), self.comp(&all, b));
        self.deriv(x, b, a) - self.deriv(x, a, b) - (&aa * &ab - &ab * &aa)
    }

    /// Pullback F_st = Σ_{a<b} F_ab det J_ab (signed) at (s, t).
    pub fn pulled_back_curvature(&self, surf: &Surface, s: f64, t: f64) -> Result<CMat> {
        let j = jacobians(surf, s, t)?;
        let x = surf.point(s, t);
        let mut out = CMat::zeros(self.dim, self.dim);
        for &(a, b) in &crate::bargmann::PAIRS {
            let d = j.det(a, b);
            if d != 0.0 {
                out += self.curvature(&x, a, b) * Complex64::new(d, 0.0);
            }
        }
        Ok(out)
    }
}

fn su2() -> LieBasis {
    build_basis(GroupKind::SU, 2).expect("su(2) basis")
}

fn term(i: usize, g: &CMat, poly: &[([u32; 4], f64)]) -> ConnTerm {
    ConnTerm { i, generator: g.clone(), poly: RealPoly4(poly.to_vec()) }
}

/// Non-commuting su(2) test connection, smooth and O(1) on the unit cube.
pub fn builtin_su2_a() -> ConnectionField {
    let b = su2();
    let e = &b.generators;
    ConnectionField {
        dim: 2,
        terms: vec![
            term(1, &e[0], &[([0, 0, 1, 0], 0.9), ([0, 0, 0, 0], 0.3)]),
            term(1, &e[1], &[([0, 1, 0, 0], 0.6)]),
            term(2, &e[2], &[([0, 1, 0, 0], 0.8), ([0, 0, 0, 0], -0.2)]),
            term(2, &e[0], &[([0, 1, 1, 0], 0.5)]),
        ],
    }
}

/// Second su(2) test connection with higher-degree terms and an x^0, x^3 dependence.
pub fn builtin_su2_b() -> ConnectionField {
    let b = su2();
    let e = &b.generators;
    ConnectionField {
        dim: 2,
        terms: vec![
            term(1, &e[2], &[([0, 0, 2, 0], 1.2)]),
            term(1, &e[0], &[([0, 0, 0, 0], 0.4), ([1, 0, 0, 0], 0.3)]),
            term(2, &e[1], &[([0, 2, 0, 0], 0.7)]),
            term(2, &e[2], &[([0, 1, 0, 0], -0.9)]),
            term(2, &e[0], &[([0, 0, 0, 1], 0.3)]),
            term(3, &e[1], &[([1, 0, 0, 0], 0.5)]),
        ],
    }
}

/// u(1) connection A = i(0.8 (x^2)² dx^1 + 0.5 (x^1)³ dx^2).
pub fn builtin_u1() -> ConnectionField {
    let g = CMat::from_element(1, 1, Complex64::new(0.0, 1.0));
    ConnectionField { dim: 1, terms: vec![term(1, &g, &[([0, 0, 2, 0], 0.8)]), term(2, &g, &[([0, 3, 0, 0], 0.5)])] }
}

/// Path-ordered exponential along σ of the straight parameter segment p0 → p1,
/// classical RK4 on u' = (Σ_i A_i(σ) dσ^i/dτ) u with `steps` fixed steps.
pub fn transport_segment(conn: &ConnectionField, surf: &Surface, p0: (f64, f64), p1: (f64, f64), steps: usize) -> CMat {
    let (ds, dt) = (p1.0 - p0.0, p1.1 - p0.1);
    let gen = |tau: f64| -> CMat {
        let (s, t) = (p0.0 + tau * ds, p0.1 + tau * dt);
        let (x, xs, xt) = surf.eval(s, t);
        let a = conn.eval(&x);
        let mut m = CMat::zeros(conn.dim, conn.dim);
        for i in 1..=3 {
            let v = xs[i] * ds + xt[i] * dt;
            if v != 0.0 {
                m += &a[i - 1] * Complex64::new(v, 0.0);
            }
        }
        m
    };
    rk4_ordered_exp(gen, conn.dim, steps)
}

/// RK4 for u' = M(τ)u on τ ∈ [0, 1], u(0) = I.
pub fn rk4_ordered_exp(gen: impl Fn(f64) -> CMat, dim: usize, steps: usize) -> CMat {
    let steps = steps.max(1);
    let h = 1.0 / steps as f64;
    let hc = Complex64::new(h, 0.0);
    let mut u = CMat::identity(dim, dim);
    for k in 0..steps {
        let tau = k as f64 * h;
        let m0 = gen(tau);
        let mh = gen(tau + 0.5 * h);
        let m1 = gen(tau + h);
        let k1 = &m0 * &u;
        let k2 = &mh * (&u + &k1 * (hc * 0.5));
        let k3 = &mh * (&u + &k2 * (hc * 0.5));
        let k4 = &m1 * (&u + &k3 * hc);
        u += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * (hc / 6.0);
    }
    u
}

pub fn vertex_param(v: Vertex, n: usize) -> (f64, f64) {
    (v.0 as f64 / n as f64, v.1 as f64 / n as f64)
}

pub fn transport_edge(conn: &ConnectionField, surf: &Surface, edge: &DirEdge, n: usize, ode_steps: usize) -> CMat {
    transport_segment(conn, surf, vertex_param(edge.from, n), vertex_param(edge.to, n), ode_steps)
}

/// Edge field induced by a connection; each undirected edge is integrated once
/// forward and its reverse is the matrix inverse.
pub fn edge_field_from_connection(conn: &ConnectionField, surf: &Surface, n: usize, ode_steps: usize) -> Result<EdgeField> {
    let edges = all_edges(n);
    let mats: Vec<CMat> = edges.par_iter().map(|e| transport_edge(conn, surf, e, n, ode_steps)).collect();
    EdgeField::from_pairs(n, conn.dim, edges.into_iter().zip(mats).collect())
}

/// Holonomy around □_i^j counterclockwise from its lower-left corner (right, up, left, down).
pub fn plaquette_product(conn: &ConnectionField, surf: &Surface, i: usize, j: usize, n: usize, ode_steps: usize) -> Result<CMat> {
    if i >= n || j >= n {
        return invalid(format!("plaquette ({i},{j}) outside a {n}x{n} grid"));
    }
    let path = [
        DirEdge { from: (i, j), to: (i + 1, j) },
        DirEdge { from: (i + 1, j), to: (i + 1, j + 1) },
        DirEdge { from: (i + 1, j + 1), to: (i, j + 1) },
        DirEdge { from: (i, j + 1), to: (i, j) },
    ];
    let mut u = CMat::identity(conn.dim, conn.dim);
    for e in &path {
        u = transport_edge(conn, surf, e, n, ode_steps) * u;
    }
    Ok(u)
}

/// Holonomy around σ(∂[0,1]²) counterclockwise from σ(0,0), integrated on a
/// boundary subdivision of `n` segments per side.
pub fn boundary_holonomy(conn: &ConnectionField, surf: &Surface, n: usize, ode_steps: usize) -> CMat {
    let mut u = CMat::identity(conn.dim, conn.dim);
    for e in boundary_edges(n) {
        u = transport_edge(conn, surf, &e, n, ode_steps) * u;
    }
    u
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CellOrder {
    /// Rows bottom to top, cells left to right within a row (leftmost factor first).
    /// This is the order in which lassos with the traversal frames compose to ∂Z_n.
    #[default]
    Holonomy,
    /// Rows top to bottom, left to right within a row: the t-descending, s-ascending comparator.
    TimeOrdered,
}

/// Frames u at every vertex (i, j), i ≥ 1, from the traversal edge words:
/// u_1^0 = A(e_{0+}^0); û_1^j = B_1^j u_1^j with B_1^j = (right along row j, then Λ back);
/// u_1^{j+1} = A(e_1^{j+}) û_1^j; u_i^j = (right from 1 to i) u_1^j.
/// Column 0 uses one extra left step: u_0^j = A(e_{0+}^j)^{-1} u_1^j.
pub fn traversal_frames(field: &EdgeField) -> HashMap<Vertex, CMat> {
    let n = field.n;
    let mut frames = HashMap::new();
    let mut u1 = field.transport(&DirEdge { from: (0, 0), to: (1, 0) }).clone();
    for j in 0..=n {
        let mut u = u1.clone();
        frames.insert((1, j), u.clone());
        frames.insert((0, j), field.transport(&DirEdge { from: (1, j), to: (0, j) }) * &u);
        let mut word = Vec::new();
        for i in 1..n {
            let e = DirEdge { from: (i, j), to: (i + 1, j) };
            u = field.transport(&e) * u;
            frames.insert((i + 1, j), u.clone());
            word.push(e);
        }
        if j == n {
            break;
        }
        for k in (2..=n).rev() {
            word.push(DirEdge { from: (k, j), to: (k, j + 1) });
            word.push(DirEdge { from: (k, j + 1), to: (k - 1, j + 1) });
            word.push(DirEdge { from: (k - 1, j + 1), to: (k - 1, j) });
        }
        let b = field.path_product(&word);
        u1 = field.transport(&DirEdge { from: (1, j), to: (1, j + 1) }) * b * &u1;
    }
    frames
}

/// ∫_cell F_st ds dt by a 2×2 Gauss-Legendre rule.
fn cell_curvature(conn: &ConnectionField, surf: &Surface, i: usize, j: usize, n: usize) -> Result<CMat> {
    let h = 1.0 / n as f64;
    let mut out = CMat::zeros(conn.dim, conn.dim);
    for &(x, wx) in &rule_1d(Rule::GaussLegendre, 2) {
        for &(y, wy) in &rule_1d(Rule::GaussLegendre, 2) {
            let f = conn.pulled_back_curvature(surf, (i as f64 + x) * h, (j as f64 + y) * h)?;
            out += f * Complex64::new(wx * wy * h * h, 0.0);
        }
    }
    Ok(out)
}

/// Π over plaquettes of exp(u^{-1} Φ u), Φ the cell-integrated curvature and u the
/// traversal frame at the cell's lower-left vertex, multiplied in `order`.
pub fn surface_ordered_product(conn: &ConnectionField, surf: &Surface, n: usize, ode_steps: usize, order: CellOrder) -> Result<CMat> {
    if n < 2 {
        return invalid("surface_ordered_product needs n >= 2");
    }
    let field = edge_field_from_connection(conn, surf, n, ode_steps)?;
    let frames = traversal_frames(&field);
    let cells: Vec<Vertex> = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).collect();
    let factors: Vec<CMat> = cells
        .par_iter()
        .map(|&(i, j)| -> Result<CMat> {
            let u = &frames[&(i, j)];
            let uinv = u.clone().try_inverse().ok_or_else(|| Error::NumericalGuard("singular frame".into()))?;
            let phi = cell_curvature(conn, surf, i, j, n)?;
            Ok((uinv * phi * u).exp())
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<usize> = (0..n).collect();
    if order == CellOrder::TimeOrdered {
        rows.reverse();
    }
    let mut out = CMat::identity(conn.dim, conn.dim);
    for j in rows {
        for i in 0..n {
            out *= &factors[j * n + i];
        }
    }
    Ok(out)
}

/// Random SU(2) matrix from a unit quaternion.
pub fn su2_from_quaternion(q: [f64; 4]) -> CMat {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let [a, b, c, d] = q.map(|v| v / n);
    DMatrix::from_row_slice(2, 2, &[Complex64::new(a, b), Complex64::new(c, d), Complex64::new(-c, d), Complex64::new(a, -b)])
}
