//! Polynomial Bargmann-space algebra on C^4: multi-indices, the 𝔡 operator,
//! monomial inner products ⟨z^p, z^q⟩ = δ_pq p!, and the orthogonalized
//! basis ẑ^p ⊗ dx^a under the 𝔡,κ metric.
//!
//! Everything that feeds orthogonalization runs in exact rationals; the float
//! view is derived once at the end.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub [u32; 4]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0; 4]);

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn plus(&self, axis: usize) -> MultiIndex {
        let mut m = self.0;
        m[axis] += 1;
        MultiIndex(m)
    }

    pub fn minus(&self, axis: usize) -> Option<MultiIndex> {
        let mut m = self.0;
        if m[axis] == 0 {
            return None;
        }
        m[axis] -= 1;
        Some(MultiIndex(m))
    }

    /// p^{α,-}: subtract 2 from entry α; defined only when m_α ≥ 2.
    pub fn predecessor(&self, alpha: usize) -> Option<MultiIndex> {
        let mut m = self.0;
        if m[alpha] < 2 {
            return None;
        }
        m[alpha] -= 2;
        Some(MultiIndex(m))
    }

    pub fn factorial_big(&self) -> BigInt {
        self.0.iter().fold(BigInt::one(), |acc, &m| acc * factorial_big(m))
    }

    pub fn factorial_f64(&self) -> f64 {
        self.0.iter().map(|&m| factorial_f64(m)).product()
    }

    /// All multi-indices of degree ≤ r_max in the canonical order.
    pub fn all_up_to(r_max: u32) -> Vec<MultiIndex> {
        let mut out = Vec::new();
        for r in 0..=r_max {
            for m0 in 0..=r {
                for m1 in 0..=(r - m0) {
                    for m2 in 0..=(r - m0 - m1) {
                        out.push(MultiIndex([m0, m1, m2, r - m0 - m1 - m2]));
                    }
                }
            }
        }
        debug_assert!(out.windows(2).all(|w| w[0] < w[1]));
        out
    }
}

impl Ord for MultiIndex {
    /// Degree first, then entrywise m_0..m_3.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree().cmp(&other.degree()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{},{})", self.0[0], self.0[1], self.0[2], self.0[3])
    }
}

pub fn factorial_big(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

pub fn factorial_f64(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Number of multi-indices of total degree ≤ r in four variables.
pub fn count_up_to(r: u32) -> usize {
    let r = r as usize;
    (r + 1) * (r + 2) * (r + 3) * (r + 4) / 24
}

/// Scalar ring for polynomial coefficients: exact rationals or complex doubles.
pub trait Coeff:
    Clone + PartialEq + fmt::Debug + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn ratio(num: i64, den: i64) -> Self;
    fn conj(&self) -> Self;
    /// self · p!
    fn times_factorial(&self, p: &MultiIndex) -> Self;
}

impl Coeff for BigRational {
    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn conj(&self) -> Self {
        self.clone()
    }
    fn times_factorial(&self, p: &MultiIndex) -> Self {
        self * BigRational::from_integer(p.factorial_big())
    }
}

impl Coeff for Complex64 {
    fn ratio(num: i64, den: i64) -> Self {
        Complex64::new(num as f64 / den as f64, 0.0)
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn times_factorial(&self, p: &MultiIndex) -> Self {
        self * p.factorial_f64()
    }
}

/// Finitely supported polynomial Σ c_p z^p; zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly<T: Coeff> {
    terms: BTreeMap<MultiIndex, T>,
}

impl<T: Coeff> Default for Poly<T> {
    fn default() -> Self {
        Poly { terms: BTreeMap::new() }
    }
}

impl<T: Coeff> Poly<T> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(p: MultiIndex, c: T) -> Self {
        let mut out = Self::zero();
        out.add_term(p, c);
        out
    }

    pub fn add_term(&mut self, p: MultiIndex, c: T) {
        if c.is_zero() {
            return;
        }
        let remove = match self.terms.get_mut(&p) {
            Some(v) => {
                *v = v.clone() + c;
                v.is_zero()
            }
            None => {
                self.terms.insert(p, c);
                false
            }
        };
        if remove {
            self.terms.remove(&p);
        }
    }

    pub fn coeff(&self, p: &MultiIndex) -> T {
        self.terms.get(p).cloned().unwrap_or_else(T::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &T)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|p| p.degree()).max()
    }

    pub fn scale(&self, c: &T) -> Self {
        let mut out = Self::zero();
        for (p, v) in &self.terms {
            out.add_term(*p, v.clone() * c.clone());
        }
        out
    }

    pub fn axpy(&mut self, c: &T, other: &Self) {
        for (p, v) in &other.terms {
            self.add_term(*p, c.clone() * v.clone());
        }
    }

    pub fn map<U: Coeff>(&self, f: impl Fn(&T) -> U) -> Poly<U> {
        let mut out = Poly::zero();
        for (p, v) in &self.terms {
            out.add_term(*p, f(v));
        }
        out
    }
}

impl Poly<Complex64> {
    pub fn eval(&self, w: &[Complex64; 4]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (p, c) in &self.terms {
            let mut m = *c;
            for (i, &e) in p.0.iter().enumerate() {
                m *= w[i].powu(e);
            }
            s += m;
        }
        s
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

pub fn to_complex(p: &Poly<BigRational>) -> Poly<Complex64> {
    p.map(|r| Complex64::new(rational_to_f64(r), 0.0))
}

/// 𝔡_a z_a^n = (n/2) z_a^{n-1} - (1/2) z_a^{n+1}, identity in the other variables.
pub fn dz_op<T: Coeff>(axis: usize, f: &Poly<T>) -> Poly<T> {
    assert!(axis < 4, "axis out of range");
    let mut out = Poly::zero();
    for (p, c) in f.terms() {
        let n = p.0[axis] as i64;
        if let Some(lower) = p.minus(axis) {
            out.add_term(lower, c.clone() * T::ratio(n, 2));
        }
        out.add_term(p.plus(axis), c.clone() * T::ratio(-1, 2));
    }
    out
}

/// ⟨p, q⟩ = Σ_m conj(p_m) q_m m!  (conjugate-linear in the first slot).
pub fn h2_inner<T: Coeff>(p: &Poly<T>, q: &Poly<T>) -> T {
    let (small, large, swap) = if p.len() <= q.len() { (p, q, false) } else { (q, p, true) };
    let mut s = T::zero();
    for (m, a) in small.terms() {
        if let Some(b) = large.terms.get(m) {
            let term = if swap { b.conj() * a.clone() } else { a.conj() * b.clone() };
            s = s + term.times_factorial(m);
        }
    }
    s
}

/// Σ_{a=1..3} f_a ⊗ dx^a.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialForm<T: Coeff> {
    pub comps: [Poly<T>; 3],
}

impl<T: Coeff> MonomialForm<T> {
    pub fn zero() -> Self {
        MonomialForm { comps: [Poly::zero(), Poly::zero(), Poly::zero()] }
    }

    /// f ⊗ dx^a with a ∈ {1, 2, 3}.
    pub fn single(a: usize, f: Poly<T>) -> Self {
        assert!((1..=3).contains(&a), "1-form component must be 1..=3");
        let mut out = Self::zero();
        out.comps[a - 1] = f;
        out
    }

    /// f_a for a ∈ {1, 2, 3}.
    pub fn comp(&self, a: usize) -> &Poly<T> {
        &self.comps[a - 1]
    }
}

/// Ordered pairs 0 ≤ a < b ≤ 3 in storage order.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub fn pair_index(a: usize, b: usize) -> Result<usize> {
    PAIRS
        .iter()
        .position(|&pr| pr == (a, b))
        .ok_or_else(|| Error::InvalidInput(format!("({a},{b}) is not an ordered pair 0 <= a < b <= 3")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormPoly<T: Coeff> {
    pub comps: [Poly<T>; 6],
}

/// Sign attached to the dx^i∧dx^j (1 ≤ i < j) components of 𝔡f.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WedgeSign {
    /// (-1)^{ij}: + on (1,2) and (2,3), - on (1,3).
    AsPrinted,
    /// +1 everywhere; exists to show norm-level results do not depend on the choice.
    Plain,
}

impl WedgeSign {
    fn factor(self, i: usize, j: usize) -> i64 {
        match self {
            WedgeSign::AsPrinted if (i * j) % 2 == 1 => -1,
            _ => 1,
        }
    }
}

/// 𝔡f = Σ_a 𝔡_0 f_a dx^0∧dx^a + Σ_{1≤i<j≤3} (-1)^{ij}[𝔡_i f_j - 𝔡_j f_i] dx^i∧dx^j.
pub fn exterior_d<T: Coeff>(f: &MonomialForm<T>) -> TwoFormPoly<T> {
    exterior_d_with(f, WedgeSign::AsPrinted)
}

pub fn exterior_d_with<T: Coeff>(f: &MonomialForm<T>, sign: WedgeSign) -> TwoFormPoly<T> {
    let comps = PAIRS.map(|(i, j)| {
        if i == 0 {
            dz_op(0, f.comp(j))
        } else {
            let mut c = dz_op(i, f.comp(j));
            c.axpy(&T::ratio(-1, 1), &dz_op(j, f.comp(i)));
            c.scale(&T::ratio(sign.factor(i, j), 1))
        }
    });
    TwoFormPoly { comps }
}

pub fn two_form_inner<T: Coeff>(x: &TwoFormPoly<T>, y: &TwoFormPoly<T>) -> T {
    x.comps.iter().zip(y.comps.iter()).fold(T::zero(), |s, (a, b)| s + h2_inner(a, b))
}

/// ⟨f, g⟩_{𝔡,κ} / κ², exact when T is rational.
pub fn fd_inner_unscaled<T: Coeff>(f: &MonomialForm<T>, g: &MonomialForm<T>) -> T {
    two_form_inner(&exterior_d(f), &exterior_d(g))
}

/// ⟨f, g⟩_{𝔡,κ} = κ² ⟨𝔡f, 𝔡g⟩.
pub fn fd_inner(f: &MonomialForm<Complex64>, g: &MonomialForm<Complex64>, kappa: f64) -> Complex64 {
    fd_inner_unscaled(f, g) * (kappa * kappa)
}

/// ⟨𝔡(z^p⊗dx^a), 𝔡(z^q⊗dx^a)⟩ in closed form. Only 𝔡_i with i ≠ a enter, and
/// ⟨𝔡_i z^p, 𝔡_i z^q⟩ is nonzero only for q ∈ {p, p ± 2e_i}:
///   q = p:          p! Σ_{i≠a} (2 m_i + 1)/4
///   q = p - 2e_i:   -p!/4
fn mono_gram(a: usize, p: &MultiIndex, q: &MultiIndex) -> BigRational {
    if p == q {
        let s: i64 = (0..4).filter(|&i| i != a).map(|i| 2 * p.0[i] as i64 + 1).sum();
        return BigRational::new(p.factorial_big() * BigInt::from(s), BigInt::from(4));
    }
    for i in (0..4).filter(|&i| i != a) {
        if p.predecessor(i).as_ref() == Some(q) {
            return BigRational::new(-p.factorial_big(), BigInt::from(4));
        }
        if q.predecessor(i).as_ref() == Some(p) {
            return BigRational::new(-q.factorial_big(), BigInt::from(4));
        }
    }
    BigRational::zero()
}

/// Quadratic form of the monomial Gram on component a, exploiting its sparsity.
fn gram_form(a: usize, f: &Poly<BigRational>, g: &Poly<BigRational>) -> BigRational {
    let mut s = BigRational::zero();
    for (p, cp) in f.terms() {
        let mut neighbours = vec![*p];
        for i in (0..4).filter(|&i| i != a) {
            if let Some(q) = p.predecessor(i) {
                neighbours.push(q);
            }
            let mut up = p.0;
            up[i] += 2;
            neighbours.push(MultiIndex(up));
        }
        for q in neighbours {
            if let Some(cq) = g.terms.get(&q) {
                s += cp * cq * mono_gram(a, p, &q);
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZHat {
    /// 1-form component a ∈ {1, 2, 3}.
    pub a: usize,
    pub p: MultiIndex,
    pub poly: Poly<BigRational>,
    /// |ẑ^p ⊗ dx^a|²_{𝔡,κ} / κ², exact and κ-free.
    pub norm2: BigRational,
}

/// Sparse recursion: ẑ^p = z^p - Σ_{α: m_α ≥ 2} ⟨z^p, ẑ^{p^{α,-}}⟩/|ẑ^{p^{α,-}}|² ẑ^{p^{α,-}}.
pub fn gram_schmidt_sparse(a: usize, r_max: u32) -> Vec<ZHat> {
    let idx = MultiIndex::all_up_to(r_max);
    let mut done: BTreeMap<MultiIndex, ZHat> = BTreeMap::new();
    let mut out = Vec::with_capacity(idx.len());
    for p in idx {
        let zp = Poly::monomial(p, BigRational::one());
        let mut poly = zp.clone();
        for alpha in 0..4 {
            if let Some(q) = p.predecessor(alpha) {
                let prev = &done[&q];
                let overlap = gram_form(a, &zp, &prev.poly);
                if !overlap.is_zero() {
                    poly.axpy(&(-(overlap / &prev.norm2)), &prev.poly);
                }
            }
        }
        let norm2 = gram_form(a, &poly, &poly);
        let z = ZHat { a, p, poly, norm2 };
        done.insert(p, z.clone());
        out.push(z);
    }
    out
}

/// Classical Gram-Schmidt against every earlier element, using the generic
/// exterior_d / h2_inner path rather than the closed-form monomial Gram.
pub fn gram_schmidt_full(a: usize, r_max: u32) -> Vec<ZHat> {
    let idx = MultiIndex::all_up_to(r_max);
    let mut out: Vec<ZHat> = Vec::with_capacity(idx.len());
    let mut images: Vec<TwoFormPoly<BigRational>> = Vec::with_capacity(idx.len());
    for p in idx {
        let zp = MonomialForm::single(a, Poly::monomial(p, BigRational::one()));
        let dzp = exterior_d(&zp);
        let mut poly = zp.comp(a).clone();
        for (prev, img) in out.iter().zip(images.iter()) {
            let overlap = two_form_inner(img, &dzp);
            if !overlap.is_zero() {
                poly.axpy(&(-(overlap / &prev.norm2)), &prev.poly);
            }
        }
        let img = exterior_d(&MonomialForm::single(a, poly.clone()));
        let norm2 = two_form_inner(&img, &img);
        out.push(ZHat { a, p, poly, norm2 });
        images.push(img);
    }
    out
}

/// Largest relative overlap |⟨ẑ^p, z^q⟩| / (|ẑ^p| |z^q|) over q of strictly lower
/// degree, plus the largest pairwise |⟨ẑ^p, ẑ^q⟩| / (|ẑ^p||ẑ^q|), p ≠ q.
pub fn validation_residual(elems: &[ZHat]) -> f64 {
    let mut worst = 0.0f64;
    for z in elems {
        let nz = rational_to_f64(&z.norm2).sqrt();
        for w in elems {
            if w.p.degree() < z.p.degree() {
                let mono = Poly::monomial(w.p, BigRational::one());
                let ov = gram_form(z.a, &z.poly, &mono);
                let nm = rational_to_f64(&gram_form(z.a, &mono, &mono)).sqrt();
                worst = worst.max(rational_to_f64(&ov.abs()) / (nz * nm));
            }
            if w.p < z.p {
                let ov = gram_form(z.a, &z.poly, &w.poly);
                let nw = rational_to_f64(&w.norm2).sqrt();
                worst = worst.max(rational_to_f64(&ov.abs()) / (nz * nw));
            }
        }
    }
    worst
}

pub const CACHE_SCHEMA: &str = "ymaxial.basis_cache/1";

/// Orthogonal (not normalized) ẑ^p ⊗ dx^a for a = 1..3 and deg p ≤ r_max.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisCache {
    pub kappa: f64,
    pub r_max: u32,
    /// Component-major: all of a = 1, then a = 2, then a = 3, each in MultiIndex order.
    pub elements: Vec<ZHat>,
    /// Max relative residual of the validation pass on the stored elements.
    pub residual: f64,
    /// Same residual for the predecessor-only recursion, kept as a discrepancy report.
    pub sparse_residual: f64,
}

/// Tolerance for the validation pass; the rational computation should hit exactly 0.
pub const ORTHO_TOL: f64 = 1e-10;

impl BasisCache {
    pub fn per_component(&self) -> usize {
        count_up_to(self.r_max)
    }

    /// |ẑ^p ⊗ dx^a|_{𝔡,κ}
    pub fn norm(&self, k: usize) -> f64 {
        self.kappa * rational_to_f64(&self.elements[k].norm2).sqrt()
    }

    pub fn element(&self, a: usize, p: &MultiIndex) -> Option<&ZHat> {
        self.elements.iter().find(|z| z.a == a && &z.p == p)
    }

    /// Unit-norm element ẑ/|ẑ|_{𝔡,κ} as a complex polynomial.
    pub fn normalized(&self, k: usize) -> Poly<Complex64> {
        let s = 1.0 / self.norm(k);
        to_complex(&self.elements[k].poly).scale(&Complex64::new(s, 0.0))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let elems: Vec<_> = self
            .elements
            .iter()
            .map(|z| {
                serde_json::json!({
                    "a": z.a,
                    "p": z.p.0,
                    "norm2_over_kappa2": z.norm2.to_string(),
                    "coeffs": z.poly.terms().map(|(m, c)| serde_json::json!([m.0, c.to_string()])).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "schema": CACHE_SCHEMA,
            "kappa": self.kappa,
            "r_max": self.r_max,
            "residual": self.residual,
            "sparse_residual": self.sparse_residual,
            "elements": elems,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("basis cache: {m}"));
        if v["schema"].as_str() != Some(CACHE_SCHEMA) {
            return Err(bad("unknown or missing schema tag"));
        }
        let kappa = v["kappa"].as_f64().ok_or_else(|| bad("kappa"))?;
        let r_max = v["r_max"].as_u64().ok_or_else(|| bad("r_max"))? as u32;
        let residual = v["residual"].as_f64().unwrap_or(0.0);
        let sparse_residual = v["sparse_residual"].as_f64().unwrap_or(f64::NAN);
        let parse_q = |s: &serde_json::Value| -> Result<BigRational> {
            s.as_str().and_then(|s| s.parse::<BigRational>().ok()).ok_or_else(|| bad("rational"))
        };
        let parse_p = |s: &serde_json::Value| -> Result<MultiIndex> {
            let m: [u32; 4] = serde_json::from_value(s.clone()).map_err(|_| bad("multi-index"))?;
            Ok(MultiIndex(m))
        };
        let mut elements = Vec::new();
        for e in v["elements"].as_array().ok_or_else(|| bad("elements"))? {
            let a = e["a"].as_u64().ok_or_else(|| bad("a"))? as usize;
            let p = parse_p(&e["p"])?;
            let norm2 = parse_q(&e["norm2_over_kappa2"])?;
            let mut poly = Poly::zero();
            for t in e["coeffs"].as_array().ok_or_else(|| bad("coeffs"))? {
                poly.add_term(parse_p(&t[0])?, parse_q(&t[1])?);
            }
            elements.push(ZHat { a, p, poly, norm2 });
        }
        if elements.len() != 3 * count_up_to(r_max) {
            return Err(bad("element count does not match r_max"));
        }
        Ok(BasisCache { kappa, r_max, elements, residual, sparse_residual })
    }
}

/// Builds the cache by exact Gram-Schmidt against every earlier element and
/// validates it. The predecessor-only recursion is also run and its residual
/// recorded: it is not orthogonal (⟨z_0²+2/3, z_2²+2/3⟩ = -1/3 on dx^1), so it
/// cannot back the cache. A stored residual above ORTHO_TOL is an error.
pub fn gram_schmidt(kappa: f64, r_max: u32) -> Result<BasisCache> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return invalid(format!("kappa must be positive, got {kappa}"));
    }
    let mut elements = Vec::new();
    let mut residual = 0.0f64;
    let mut sparse_residual = 0.0f64;
    for a in 1..=3 {
        let comp = gram_schmidt_full(a, r_max);
        residual = residual.max(validation_residual(&comp));
        sparse_residual = sparse_residual.max(validation_residual(&gram_schmidt_sparse(a, r_max)));
        elements.extend(comp);
    }
    if residual > ORTHO_TOL {
        return Err(Error::NumericalGuard(format!("basis orthogonality residual {residual:e} exceeds {ORTHO_TOL:e}")));
    }
    Ok(BasisCache { kappa, r_max, elements, residual, sparse_residual })
}

/// sup of |z^m| over the ball ‖z‖ ≤ 1/2 in C^4: Π (m_i/(4r))^{m_i/2}, 0^0 = 1.
pub fn monomial_sup(m: &MultiIndex) -> f64 {
    let r = m.degree() as f64;
    if r == 0.0 {
        return 1.0;
    }
    m.0.iter()
        .filter(|&&mi| mi > 0)
        .map(|&mi| (mi as f64 / (4.0 * r)).powf(mi as f64 / 2.0))
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    UpperBound,
    Optimize,
}

/// Weighted sum Σ|c|·[|z^p| + 6(r+1)² Σ_α |z^{p^{α,-}}|] either with each term at
/// its own supremum (UpperBound) or maximized at a common point (Optimize).
pub fn measurable_norm_bound(coeffs: &[((usize, MultiIndex), f64)], mode: NormMode) -> f64 {
    match mode {
        NormMode::UpperBound => coeffs
            .iter()
            .map(|((_, p), c)| {
                let r = p.degree() as f64;
                let preds: f64 = (0..4).filter_map(|al| p.predecessor(al)).map(|q| monomial_sup(&q)).sum();
                c.abs() * (monomial_sup(p) + 6.0 * (r + 1.0).powi(2) * preds)
            })
            .sum(),
        NormMode::Optimize => optimize_norm(coeffs),
    }
}

/// |z^m| at moduli x_i = sqrt(y_i)/2, y on the unit simplex.
fn monomial_at(m: &MultiIndex, y: &[f64; 4]) -> f64 {
    m.0.iter()
        .zip(y.iter())
        .map(|(&mi, &yi)| if mi == 0 { 1.0 } else { (yi.max(0.0).sqrt() / 2.0).powi(mi as i32) })
        .product()
}

fn optimize_norm(coeffs: &[((usize, MultiIndex), f64)]) -> f64 {
    let objective = |y: &[f64; 4]| -> f64 {
        coeffs
            .iter()
            .map(|((_, p), c)| {
                let r = p.degree() as f64;
                let preds: f64 = (0..4).filter_map(|al| p.predecessor(al)).map(|q| monomial_at(&q, y)).sum();
                c.abs() * (monomial_at(p, y) + 6.0 * (r + 1.0).powi(2) * preds)
            })
            .sum()
    };
    // Starts: simplex vertices, barycentre, and each term's own maximizer.
    let mut starts: Vec<[f64; 4]> = (0..4)
        .map(|i| {
            let mut y = [1e-3; 4];
            y[i] = 1.0 - 3e-3;
            y
        })
        .collect();
    starts.push([0.25; 4]);
    for ((_, p), _) in coeffs {
        let r = p.degree();
        if r > 0 {
            let mut y = [1e-3; 4];
            for i in 0..4 {
                y[i] += p.0[i] as f64 / r as f64;
            }
            let s: f64 = y.iter().sum();
            starts.push(y.map(|v| v / s));
        }
    }
    let mut best = 0.0f64;
    for y0 in starts {
        let mut y = y0;
        let mut f = objective(&y);
        let mut step = 0.5;
        // Exponentiated-gradient ascent keeps y on the simplex.
        for _ in 0..400 {
            let h = 1e-7;
            let mut g = [0.0; 4];
            for i in 0..4 {
                let mut yp = y;
                yp[i] += h;
                g[i] = (objective(&yp) - f) / h;
            }
            let gmax = g.iter().cloned().fold(f64::MIN, f64::max).abs().max(1e-300);
            let mut trial = [0.0; 4];
            for i in 0..4 {
                trial[i] = y[i] * (step * g[i] / gmax).exp();
            }
            let s: f64 = trial.iter().sum();
            let trial = trial.map(|v| v / s);
            let ft = objective(&trial);
            if ft > f {
                y = trial;
                f = ft;
            } else {
                step *= 0.5;
                if step < 1e-12 {
                    break;
                }
            }
        }
        best = best.max(f);
    }
    best
}
