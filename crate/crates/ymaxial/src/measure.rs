//! Gaussian sampling of truncated fields, the density 𝒴^κ, the Wilson
//! functional 𝒥_S^κ and the ratio estimator E[𝒥𝒴]/E[𝒴].
//!
//! A field is A = Σ_{a,k,α} c_{a,k,α} ê_{a,k} ⊗ E^α with ê the unit-norm basis of
//! a [`BasisCache`]. Everything that depends only on (κ, cutoff, geometry) is
//! tabulated once; a sample then costs a handful of small real matrix products.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bargmann::{exterior_d_with, gram_schmidt, BasisCache, MonomialForm, Poly, WedgeSign, PAIRS};
use crate::error::{invalid, Error, Result};
use crate::functionals::{psi, CPoint};
use crate::grid::rk4_ordered_exp;
use crate::lie::{build_basis, structure_constants, CMat, GroupKind, LieBasis};
use crate::quad::pairwise_sum;
use crate::surface::{jacobians, Surface};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VarianceConvention {
    /// E|c|² = 1.
    #[default]
    UnitComplex,
    /// E[Re c²] = E[Im c²] = 1.
    UnitRealParts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FieldDomain {
    /// Real coefficients, E c² = 1 under either variance convention.
    #[default]
    Real,
    /// Circular complex coefficients on the complexification.
    Complexified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub kappa: f64,
    pub cutoff: u32,
    pub group: GroupKind,
    pub n: usize,
    #[serde(default)]
    pub variance: VarianceConvention,
    #[serde(default)]
    pub domain: FieldDomain,
    pub seed: u64,
    /// Quasi-MC node count for the ∫dλ₄ integrals over C^4.
    #[serde(default = "default_qmc_nodes")]
    pub qmc_nodes: usize,
}

pub fn default_qmc_nodes() -> usize {
    4096
}

impl MeasureConfig {
    pub fn new(group: GroupKind, n: usize, kappa: f64, cutoff: u32, seed: u64) -> MeasureConfig {
        MeasureConfig { kappa, cutoff, group, n, variance: VarianceConvention::default(), domain: FieldDomain::default(), seed, qmc_nodes: default_qmc_nodes() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return invalid(format!("kappa must be positive, got {}", self.kappa));
        }
        if self.qmc_nodes < 16 {
            return invalid("qmc_nodes must be at least 16");
        }
        build_basis(self.group, self.n).map(|_| ())
    }
}

/// Values of a family of functions at a set of points, split into real and imaginary parts; rows = functions.
#[derive(Debug, Clone)]
pub struct CTab {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl CTab {
    fn zeros(r: usize, c: usize) -> CTab {
        CTab { re: DMatrix::zeros(r, c), im: DMatrix::zeros(r, c) }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        Complex64::new(self.re[(r, c)], self.im[(r, c)])
    }

    fn add_assign(&mut self, o: &CTab) {
        self.re += &o.re;
        self.im += &o.im;
    }
}

fn eval_polys(polys: &[Poly<Complex64>], pts: &[CPoint]) -> CTab {
    let max_deg = polys.iter().filter_map(|p| p.degree()).max().unwrap_or(0) as usize;
    let cols: Vec<Vec<Complex64>> = pts
        .par_iter()
        .map(|w| {
            let pows: Vec<Vec<Complex64>> = w
                .iter()
                .map(|z| {
                    let mut v = vec![Complex64::new(1.0, 0.0); max_deg + 1];
                    for e in 1..=max_deg {
                        v[e] = v[e - 1] * z;
                    }
                    v
                })
                .collect();
            polys
                .iter()
                .map(|p| {
                    p.terms()
                        .map(|(m, c)| c * pows[0][m.0[0] as usize] * pows[1][m.0[1] as usize] * pows[2][m.0[2] as usize] * pows[3][m.0[3] as usize])
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut t = CTab::zeros(polys.len(), pts.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            t.re[(i, j)] = v.re;
            t.im[(i, j)] = v.im;
        }
    }
    t
}

/// Coefficients c_{a,k,α}: per component a, an (algebra dim × basis size) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub re: [DMatrix<f64>; 3],
    /// None for real-domain samples.
    pub im: Option<[DMatrix<f64>; 3]>,
}

impl FieldSample {
    pub fn zero(alg: usize, per: usize) -> FieldSample {
        FieldSample { re: [0, 1, 2].map(|_| DMatrix::zeros(alg, per)), im: None }
    }

    /// a ∈ {1, 2, 3}.
    pub fn coeff(&self, a: usize, k: usize, alpha: usize) -> Complex64 {
        let im = self.im.as_ref().map_or(0.0, |m| m[a - 1][(alpha, k)]);
        Complex64::new(self.re[a - 1][(alpha, k)], im)
    }

    /// (A, h)♯ for h = Σ_k h_k ê_k, i.e. Σ_k c_k h_k (the ê_k are orthonormal).
    pub fn pair_real_functional(&self, alpha: usize, h: &[[f64; 3]]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (k, hk) in h.iter().enumerate() {
            for a in 1..=3 {
                s += self.coeff(a, k, alpha) * hk[a - 1];
            }
        }
        s
    }

    /// C_a · table: (alg × points).
    fn apply(&self, a: usize, t: &CTab) -> CTab {
        let cr = &self.re[a - 1];
        match &self.im {
            None => CTab { re: cr * &t.re, im: cr * &t.im },
            Some(im) => {
                let ci = &im[a - 1];
                CTab { re: cr * &t.re - ci * &t.im, im: cr * &t.im + ci * &t.re }
            }
        }
    }
}

/// Unit-norm basis and structure constants for one (κ, cutoff, algebra).
#[derive(Debug, Clone)]
pub struct FieldSpace {
    pub cfg: MeasureConfig,
    pub basis: LieBasis,
    pub cache: BasisCache,
    /// Normalized ê_{a,k}, indexed [a-1][k].
    pub elems: [Vec<Poly<Complex64>>; 3],
    /// Nonzero (γ, α, β, c_γ^{αβ}) with α < β.
    pub structure: Vec<(usize, usize, usize, f64)>,
}

impl FieldSpace {
    pub fn new(cfg: &MeasureConfig) -> Result<FieldSpace> {
        let cache = gram_schmidt(cfg.kappa, cfg.cutoff)?;
        FieldSpace::with_cache(cfg, cache)
    }

    pub fn with_cache(cfg: &MeasureConfig, cache: BasisCache) -> Result<FieldSpace> {
        cfg.validate()?;
        if cache.r_max != cfg.cutoff || (cache.kappa - cfg.kappa).abs() > 1e-12 * cfg.kappa {
            return invalid(format!("basis cache (kappa {}, cutoff {}) does not match the config", cache.kappa, cache.r_max));
        }
        let basis = build_basis(cfg.group, cfg.n)?;
        let sc = structure_constants(&basis);
        let d = basis.algebra_dim();
        let mut structure = Vec::new();
        for g in 0..d {
            for a in 0..d {
                for b in (a + 1)..d {
                    let c = sc.get(g, a, b);
                    if c.abs() > 1e-14 {
                        structure.push((g, a, b, c));
                    }
                }
            }
        }
        let per = cache.per_component();
        let elems = [0, 1, 2].map(|a| (0..per).map(|k| cache.normalized(a * per + k)).collect::<Vec<_>>());
        Ok(FieldSpace { cfg: cfg.clone(), basis, cache, elems, structure })
    }

    pub fn per_component(&self) -> usize {
        self.elems[0].len()
    }

    pub fn alg_dim(&self) -> usize {
        self.basis.algebra_dim()
    }

    pub fn dim(&self) -> usize {
        self.basis.matrix_dim
    }

    /// [𝔡ê_{a,k}]_pair with the given sign on 1 ≤ i < j components; rows k.
    fn d_polys(&self, a: usize, pair: usize, sign: WedgeSign) -> Option<Vec<Poly<Complex64>>> {
        let (i, j) = PAIRS[pair];
        if i != a && j != a {
            return None;
        }
        Some(self.elems[a - 1].iter().map(|e| exterior_d_with(&MonomialForm::single(a, e.clone()), sign).comps[pair].clone()).collect())
    }

    /// Draw sample number `index`; each index has its own ChaCha stream so the
    /// result does not depend on scheduling or worker count.
    pub fn sample(&self, index: u64) -> FieldSample {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(index);
        let (alg, per) = (self.alg_dim(), self.per_component());
        let mut draw = |scale: f64| -> [DMatrix<f64>; 3] { [0, 1, 2].map(|_| DMatrix::from_fn(alg, per, |_, _| scale * rng.sample::<f64, _>(StandardNormal))) };
        match self.cfg.domain {
            FieldDomain::Real => FieldSample { re: draw(1.0), im: None },
            FieldDomain::Complexified => {
                let s = match self.cfg.variance {
                    VarianceConvention::UnitComplex => std::f64::consts::FRAC_1_SQRT_2,
                    VarianceConvention::UnitRealParts => 1.0,
                };
                let re = draw(s);
                let im = draw(s);
                FieldSample { re, im: Some(im) }
            }
        }
    }

    /// Per-sample polynomials A_{a,α}: slow path for single-point evaluation.
    pub fn field_polys(&self, f: &FieldSample) -> Vec<[Poly<Complex64>; 3]> {
        (0..self.alg_dim())
            .map(|alpha| {
                [1, 2, 3].map(|a| {
                    let mut p = Poly::zero();
                    for (k, e) in self.elems[a - 1].iter().enumerate() {
                        let c = f.coeff(a, k, alpha);
                        if c != Complex64::new(0.0, 0.0) {
                            p.axpy(&c, e);
                        }
                    }
                    p
                })
            })
            .collect()
    }
}

/// sample_field: the `index`-th draw of the configured Gaussian.
pub fn sample_field(space: &FieldSpace, index: u64) -> FieldSample {
    space.sample(index)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

/// Randomly shifted 8-dimensional Halton points mapped by Box-Muller to C^4 with
/// Re, Im ~ N(0, 1/2), i.e. density π^{-4} e^{-|w|²}.
pub fn qmc_nodes(count: usize, seed: u64) -> Vec<CPoint> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let shift: [f64; 8] = [(); 8].map(|_| rng.random::<f64>());
    (1..=count as u64)
        .map(|i| {
            let u: [f64; 8] = std::array::from_fn(|d| {
                let x = (radical_inverse(i, PRIMES[d]) + shift[d]).fract();
                x.clamp(1e-300, 1.0 - 1e-16)
            });
            std::array::from_fn(|k| {
                let r = (-u[2 * k].ln()).sqrt();
                let th = 2.0 * PI * u[2 * k + 1];
                Complex64::new(r * th.cos(), r * th.sin())
            })
        })
        .collect()
}

/// Tables for the density integrals.
#[derive(Debug, Clone)]
pub struct DensityTables {
    pub nodes: Vec<CPoint>,
    /// π⁴ e^{|w|²}/N: turns a node average into ∫dλ₄.
    pub weights: Vec<f64>,
    pub psi: Vec<f64>,
    vals: [CTab; 3],
    dvals: Vec<Vec<Option<CTab>>>,
}

impl DensityTables {
    pub fn new(space: &FieldSpace) -> DensityTables {
        let nodes = qmc_nodes(space.cfg.qmc_nodes, space.cfg.seed);
        let n = nodes.len() as f64;
        let weights = nodes.iter().map(|w| PI.powi(4) * w.iter().map(|z| z.norm_sqr()).sum::<f64>().exp() / n).collect();
        let psi = nodes.iter().map(psi).collect();
        let vals = [0, 1, 2].map(|a| eval_polys(&space.elems[a], &nodes));
        let dvals = (1..=3)
            .map(|a| (0..6).map(|pair| space.d_polys(a, pair, WedgeSign::Plain).map(|ps| eval_polys(&ps, &nodes))).collect())
            .collect();
        DensityTables { nodes, weights, psi, vals, dvals }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityValue {
    pub y: f64,
    pub log_y: f64,
    /// ½∫Σ|(A_α, ξ_ij⊗E^α)♯|²: log of the samplewise upper bound.
    pub log_bound: f64,
}

/// 𝒴 = exp[-½ Σ_{γ,i<j} ∫|X_{ij,γ} + Q_{ij,γ}|² + ½ Σ_{i<j,α} ∫|X_{ij,α}|²] with
/// X_{ij,γ} = κψ[𝔡_iA_{j,γ} - 𝔡_jA_{i,γ}] and Q_{ij,γ} = Σ_{α<β} c_γ^{αβ} ψ² A_{i,α}A_{j,β}.
/// Abelian algebras have no structure constants and return exactly 1.
pub fn density_y(space: &FieldSpace, tables: &DensityTables, f: &FieldSample) -> DensityValue {
    density_batch(space, tables, std::slice::from_ref(f))[0]
}

/// Coefficients of a batch stacked row-wise: row b·alg + α.
struct Stacked {
    re: DMatrix<f64>,
    im: Option<DMatrix<f64>>,
}

impl Stacked {
    fn new(fs: &[FieldSample], a: usize) -> Stacked {
        let (alg, per) = fs[0].re[a - 1].shape();
        let re = DMatrix::from_fn(fs.len() * alg, per, |r, k| fs[r / alg].re[a - 1][(r % alg, k)]);
        let im = fs[0].im.as_ref().map(|_| DMatrix::from_fn(fs.len() * alg, per, |r, k| fs[r / alg].im.as_ref().map_or(0.0, |m| m[a - 1][(r % alg, k)])));
        Stacked { re, im }
    }

    fn apply(&self, t: &CTab) -> CTab {
        match &self.im {
            None => CTab { re: &self.re * &t.re, im: &self.re * &t.im },
            Some(ci) => CTab { re: &self.re * &t.re - ci * &t.im, im: &self.re * &t.im + ci * &t.re },
        }
    }
}

/// [`density_y`] for several samples at once; the batch is one stacked matrix product per table.
pub fn density_batch(space: &FieldSpace, tables: &DensityTables, fs: &[FieldSample]) -> Vec<DensityValue> {
    if space.structure.is_empty() || fs.is_empty() {
        return vec![DensityValue { y: 1.0, log_y: 0.0, log_bound: 0.0 }; fs.len()];
    }
    let kappa = space.cfg.kappa;
    let alg = space.alg_dim();
    let npts = tables.nodes.len();
    let nb = fs.len();
    let coeffs: Vec<Stacked> = (1..=3).map(|a| Stacked::new(fs, a)).collect();
    let a_vals: Vec<CTab> = (1..=3).map(|a| coeffs[a - 1].apply(&tables.vals[a - 1])).collect();
    // per (sample, node): Σ|X+Q|² and Σ|X|²
    let mut full = vec![0.0; nb * npts];
    let mut free = vec![0.0; nb * npts];
    for (pair, &(pi, pj)) in PAIRS.iter().enumerate() {
        let mut d = CTab::zeros(nb * alg, npts);
        for a in 1..=3 {
            if let Some(t) = &tables.dvals[a - 1][pair] {
                d.add_assign(&coeffs[a - 1].apply(t));
            }
        }
        for j in 0..npts {
            let ps = tables.psi[j];
            for b in 0..nb {
                let (mut s_full, mut s_free) = (0.0, 0.0);
                for g in 0..alg {
                    let x = d.get(b * alg + g, j) * (kappa * ps);
                    let mut q = Complex64::new(0.0, 0.0);
                    if pi >= 1 {
                        for &(gg, al, be, c) in &space.structure {
                            if gg == g {
                                q += a_vals[pi - 1].get(b * alg + al, j) * a_vals[pj - 1].get(b * alg + be, j) * c;
                            }
                        }
                        q *= ps * ps;
                    }
                    s_full += (x + q).norm_sqr();
                    s_free += x.norm_sqr();
                }
                full[b * npts + j] += s_full;
                free[b * npts + j] += s_free;
            }
        }
    }
    (0..nb)
        .map(|b| {
            let wf: Vec<f64> = (0..npts).map(|j| full[b * npts + j] * tables.weights[j]).collect();
            let wq: Vec<f64> = (0..npts).map(|j| free[b * npts + j] * tables.weights[j]).collect();
            let (i_full, i_free) = (pairwise_sum(&wf), pairwise_sum(&wq));
            let log_y = -0.5 * i_full + 0.5 * i_free;
            DensityValue { y: log_y.exp(), log_y, log_bound: 0.5 * i_free }
        })
        .collect()
}

/// Samples are processed in fixed batches of this size; results do not depend on it.
pub const BATCH: usize = 32;

/// 𝒴 for samples 0..n in index order.
pub fn density_values(space: &FieldSpace, tables: &DensityTables, n: usize) -> Vec<DensityValue> {
    let starts: Vec<usize> = (0..n).step_by(BATCH).collect();
    let parts: Vec<Vec<DensityValue>> = starts
        .par_iter()
        .map(|&s0| {
            let fs: Vec<FieldSample> = (s0..(s0 + BATCH).min(n)).map(|i| space.sample(i as u64)).collect();
            density_batch(space, tables, &fs)
        })
        .collect();
    parts.concat()
}

/// Upper bound on E[𝒴^p] for p < 2π/3: exp[3pc/(4π)], c = (1 - 3p/(2π))^{-1}.
pub fn moment_bound(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 2.0 * PI / 3.0) {
        return invalid(format!("moment exponent p = {p} outside (0, 2π/3)"));
    }
    let c = 1.0 / (1.0 - 3.0 * p / (2.0 * PI));
    Ok((3.0 * p * c / (4.0 * PI)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentCheck {
    pub p: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub within_bound: bool,
}

/// MC estimate of E[𝒴^p] against [`moment_bound`].
pub fn density_moment_check(cfg: &MeasureConfig, p: f64, n_samples: usize) -> Result<MomentCheck> {
    let bound = moment_bound(p)?;
    if n_samples < 2 {
        return invalid("need at least 2 samples");
    }
    let space = FieldSpace::new(cfg)?;
    let tables = DensityTables::new(&space);
    let ys: Vec<f64> = density_values(&space, &tables, n_samples).iter().map(|d| (p * d.log_y).exp()).collect();
    let (mean, stderr) = mean_stderr(&ys);
    Ok(MomentCheck { p, estimate: mean, stderr, bound, within_bound: mean <= bound + 3.0 * stderr })
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Per-component RK4 evaluation points for one straight parameter segment.
#[derive(Debug, Clone)]
struct Segment {
    first: usize,
    steps: usize,
}

/// Geometry of 𝒥 for one (surface, κ, grid, ODE steps): the sweep paths that
/// build u_{s,t} at cell midpoints and the curvature evaluation points.
#[derive(Debug, Clone)]
pub struct WilsonPlan {
    pub n_grid: usize,
    pub ode_steps: usize,
    kappa: f64,
    /// Path nodes: ψ(w) · dσ^i/dτ for i = 1..3 (A_0 = 0), w = κσ/2.
    path_weight: Vec<[f64; 3]>,
    path_vals: [CTab; 3],
    bottom: Segment,
    right: Vec<Segment>,
    rows: Vec<Vec<Segment>>,
    /// Cell midpoints: |J_ab| per pair, ψ(w).
    cell_absj: Vec<[f64; 6]>,
    cell_psi: Vec<f64>,
    cell_vals: [CTab; 3],
    cell_dvals: Vec<Vec<Option<CTab>>>,
}

fn segment_points(surf: &Surface, kappa: f64, p0: (f64, f64), p1: (f64, f64), ode_steps: usize, pts: &mut Vec<[f64; 4]>, wts: &mut Vec<[f64; 3]>) -> Segment {
    let len = ((p1.0 - p0.0).powi(2) + (p1.1 - p0.1).powi(2)).sqrt();
    let steps = ((len * ode_steps as f64).ceil() as usize).max(1);
    let first = pts.len();
    let (ds, dt) = (p1.0 - p0.0, p1.1 - p0.1);
    for m in 0..=(2 * steps) {
        let tau = m as f64 / (2 * steps) as f64;
        let (x, xs, xt) = surf.eval(p0.0 + tau * ds, p0.1 + tau * dt);
        let w = x.map(|v| kappa * v / 2.0);
        let ps = psi(&w.map(|v| Complex64::new(v, 0.0)));
        pts.push(w);
        wts.push(std::array::from_fn(|i| ps * (xs[i + 1] * ds + xt[i + 1] * dt)));
    }
    Segment { first, steps }
}

impl WilsonPlan {
    pub fn new(space: &FieldSpace, surf: &Surface, n_grid: usize, ode_steps: usize) -> Result<WilsonPlan> {
        if n_grid < 2 {
            return invalid("wilson_J needs n_grid >= 2");
        }
        if ode_steps < 1 {
            return invalid("ode_steps must be >= 1");
        }
        surf.validate()?;
        let kappa = space.cfg.kappa;
        let h = 1.0 / n_grid as f64;
        let mid = |k: usize| (k as f64 + 0.5) * h;
        let (mut pts, mut wts) = (Vec::new(), Vec::new());
        let bottom = segment_points(surf, kappa, (0.0, 0.0), (1.0, 0.0), ode_steps, &mut pts, &mut wts);
        let mut right = Vec::new();
        let mut rows = Vec::new();
        for l in 0..n_grid {
            let t_prev = if l == 0 { 0.0 } else { mid(l - 1) };
            right.push(segment_points(surf, kappa, (1.0, t_prev), (1.0, mid(l)), ode_steps, &mut pts, &mut wts));
            let mut row = Vec::new();
            let mut s_prev = 1.0;
            for k in (0..n_grid).rev() {
                row.push(segment_points(surf, kappa, (s_prev, mid(l)), (mid(k), mid(l)), ode_steps, &mut pts, &mut wts));
                s_prev = mid(k);
            }
            rows.push(row);
        }
        let mut cell_pts = Vec::new();
        let mut cell_absj = Vec::new();
        for l in 0..n_grid {
            for k in 0..n_grid {
                let j = jacobians(surf, mid(k), mid(l))?;
                cell_absj.push(j.abs_dets());
                cell_pts.push(surf.point(mid(k), mid(l)).map(|v| Complex64::new(kappa * v / 2.0, 0.0)));
            }
        }
        let cpts: Vec<CPoint> = pts.iter().map(|w| w.map(|v| Complex64::new(v, 0.0))).collect();
        let path_vals = [0, 1, 2].map(|a| eval_polys(&space.elems[a], &cpts));
        let cell_vals = [0, 1, 2].map(|a| eval_polys(&space.elems[a], &cell_pts));
        let cell_dvals = (1..=3)
            .map(|a| (0..6).map(|pair| space.d_polys(a, pair, WedgeSign::AsPrinted).map(|ps| eval_polys(&ps, &cell_pts))).collect())
            .collect();
        let cell_psi = cell_pts.iter().map(psi).collect();
        Ok(WilsonPlan { n_grid, ode_steps, kappa, path_weight: wts, path_vals, bottom, right, rows, cell_absj, cell_psi, cell_vals, cell_dvals })
    }
}

fn lie_combo(basis: &LieBasis, coeffs: impl Fn(usize) -> Complex64) -> CMat {
    let d = basis.matrix_dim;
    let mut m = CMat::zeros(d, d);
    for (alpha, g) in basis.generators.iter().enumerate() {
        let c = coeffs(alpha);
        if c != Complex64::new(0.0, 0.0) {
            m += g * c;
        }
    }
    m
}

fn rk4_tabulated(ms: &[CMat], seg: &Segment, dim: usize) -> CMat {
    let h = Complex64::new(1.0 / seg.steps as f64, 0.0);
    let mut u = CMat::identity(dim, dim);
    for k in 0..seg.steps {
        let (m0, mh, m1) = (&ms[seg.first + 2 * k], &ms[seg.first + 2 * k + 1], &ms[seg.first + 2 * k + 2]);
        let k1 = m0 * &u;
        let k2 = mh * (&u + &k1 * (h * 0.5));
        let k3 = mh * (&u + &k2 * (h * 0.5));
        let k4 = m1 * (&u + &k3 * h);
        u += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * (h / 6.0);
    }
    u
}

/// 𝒥_S^κ(A) = Tr Π_cells exp[(1/κ)(κ²/4) ΔsΔt u^{-1}(M₁ + M₂)u] on an n_grid × n_grid
/// midpoint grid, cells multiplied rows bottom to top and left to right within a row.
/// M₁ = Σ_{a<b} |J_ab| Σ_α (A_α, ξ_ab(κσ/2)⊗E^α)♯ ρ(E^α),
/// M₂ = Σ_{1≤i<j} |J_ij| Σ_{α<β,γ} c_γ^{αβ} ψ² A_{i,α}A_{j,β} ρ(E^γ),
/// u = u_{s,t} at the cell midpoint. The κ/2 scaling and the 1/κ factor are applied only here.
pub fn wilson_j(space: &FieldSpace, plan: &WilsonPlan, f: &FieldSample) -> Result<Complex64> {
    if (plan.kappa - space.cfg.kappa).abs() > 1e-12 * space.cfg.kappa {
        return invalid("wilson plan built for a different kappa");
    }
    let basis = &space.basis;
    let dim = basis.matrix_dim;
    let kappa = space.cfg.kappa;
    let a_path: Vec<CTab> = (1..=3).map(|a| f.apply(a, &plan.path_vals[a - 1])).collect();
    let ms: Vec<CMat> = plan
        .path_weight
        .iter()
        .enumerate()
        .map(|(j, w)| lie_combo(basis, |alpha| (0..3).map(|i| a_path[i].get(alpha, j) * w[i]).sum()))
        .collect();
    let mut frames = vec![CMat::identity(dim, dim); plan.n_grid * plan.n_grid];
    let mut up = rk4_tabulated(&ms, &plan.bottom, dim);
    for l in 0..plan.n_grid {
        up = rk4_tabulated(&ms, &plan.right[l], dim) * up;
        let mut u = up.clone();
        for (r, k) in (0..plan.n_grid).rev().enumerate() {
            u = rk4_tabulated(&ms, &plan.rows[l][r], dim) * u;
            frames[l * plan.n_grid + k] = u.clone();
        }
    }
    let a_cell: Vec<CTab> = (1..=3).map(|a| f.apply(a, &plan.cell_vals[a - 1])).collect();
    let scale = Complex64::new(kappa / 4.0 / (plan.n_grid * plan.n_grid) as f64, 0.0);
    let mut out = CMat::identity(dim, dim);
    for (c, frame) in frames.iter().enumerate() {
        let ps = plan.cell_psi[c];
        let absj = &plan.cell_absj[c];
        let mut coeff = vec![Complex64::new(0.0, 0.0); space.alg_dim()];
        for (pair, &(pi, pj)) in PAIRS.iter().enumerate() {
            if absj[pair] == 0.0 {
                continue;
            }
            for a in 1..=3 {
                if let Some(t) = &plan.cell_dvals[a - 1][pair] {
                    for (alpha, cf) in coeff.iter_mut().enumerate() {
                        let mut v = Complex64::new(0.0, 0.0);
                        for k in 0..t.re.nrows() {
                            v += f.coeff(a, k, alpha) * t.get(k, c);
                        }
                        *cf += v * (kappa * ps * absj[pair]);
                    }
                }
            }
            if pi >= 1 {
                for &(g, al, be, sc) in &space.structure {
                    coeff[g] += a_cell[pi - 1].get(al, c) * a_cell[pj - 1].get(be, c) * (sc * ps * ps * absj[pair]);
                }
            }
        }
        let m = lie_combo(basis, |alpha| coeff[alpha]);
        let inv = frame.clone().try_inverse().ok_or_else(|| Error::NumericalGuard("singular path frame".into()))?;
        out *= (inv * m * frame * scale).exp();
    }
    Ok(out.trace())
}

/// Path-ordered exponential along P_{s,t}: σ(0,0) → σ(1,0) → σ(1,t) → σ(s,t), with
/// integrand Σ_{i,α} ψ(w) A_{i,α}(w) dσ^i/dτ ρ(E^α) at w = κσ/2. (0,0) is the empty path.
pub fn u_path(space: &FieldSpace, f: &FieldSample, surf: &Surface, s: f64, t: f64, ode_steps: usize) -> CMat {
    let dim = space.dim();
    if s == 0.0 && t == 0.0 {
        return CMat::identity(dim, dim);
    }
    let polys = space.field_polys(f);
    let kappa = space.cfg.kappa;
    let seg = |p0: (f64, f64), p1: (f64, f64)| -> CMat {
        let (ds, dt) = (p1.0 - p0.0, p1.1 - p0.1);
        let len = (ds * ds + dt * dt).sqrt();
        if len == 0.0 {
            return CMat::identity(dim, dim);
        }
        let steps = ((len * ode_steps as f64).ceil() as usize).max(1);
        rk4_ordered_exp(
            |tau| {
                let (x, xs, xt) = surf.eval(p0.0 + tau * ds, p0.1 + tau * dt);
                let w: CPoint = x.map(|v| Complex64::new(kappa * v / 2.0, 0.0));
                let ps = psi(&w);
                lie_combo(&space.basis, |alpha| (0..3).map(|i| polys[alpha][i].eval(&w) * (ps * (xs[i + 1] * ds + xt[i + 1] * dt))).sum())
            },
            dim,
            steps,
        )
    };
    let u = seg((0.0, 0.0), (1.0, 0.0));
    let u = seg((1.0, 0.0), (1.0, t)) * u;
    seg((1.0, t), (s, t)) * u
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub n_samples: usize,
    pub mean_j: Complex64,
    pub mean_y: f64,
    pub mean_jy: Complex64,
    pub stderr_y: f64,
}

fn csum(xs: &[Complex64]) -> Complex64 {
    let re: Vec<f64> = xs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = xs.iter().map(|z| z.im).collect();
    Complex64::new(pairwise_sum(&re), pairwise_sum(&im))
}

/// Ratio estimator E[𝒥𝒴]/E[𝒴] with delta-method standard error, from per-sample (𝒥, 𝒴).
pub fn ratio_estimate(js: &[Complex64], ys: &[f64]) -> Result<MCEstimate> {
    let n = js.len();
    if n < 2 || ys.len() != n {
        return invalid("ratio estimator needs at least 2 paired samples");
    }
    let nf = n as f64;
    let jy: Vec<Complex64> = js.iter().zip(ys).map(|(j, y)| j * y).collect();
    let mean_j = csum(js) / nf;
    let mean_jy = csum(&jy) / nf;
    let (mean_y, stderr_y) = mean_stderr(ys);
    if !(mean_y > 3.0 * stderr_y) {
        return Err(Error::NumericalGuard(format!("degenerate denominator: E[Y] = {mean_y:e} ± {stderr_y:e}")));
    }
    let r = mean_jy / mean_y;
    let res: Vec<f64> = jy.iter().zip(ys).map(|(v, y)| ((v - r * y) / mean_y).norm_sqr()).collect();
    let stderr = (pairwise_sum(&res) / (nf * (nf - 1.0))).sqrt();
    Ok(MCEstimate { mean: r, stderr, n_samples: n, mean_j, mean_y, mean_jy, stderr_y })
}

/// Per-sample (𝒥, 𝒴) for samples 0..n_samples.
pub fn sample_pairs(space: &FieldSpace, surf: &Surface, n_samples: usize, n_grid: usize, ode_steps: usize) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let plan = WilsonPlan::new(space, surf, n_grid, ode_steps)?;
    let ys: Vec<f64> = if space.structure.is_empty() {
        vec![1.0; n_samples]
    } else {
        density_values(space, &DensityTables::new(space), n_samples).iter().map(|d| d.y).collect()
    };
    let js: Vec<Complex64> = (0..n_samples as u64).into_par_iter().map(|i| wilson_j(space, &plan, &space.sample(i))).collect::<Result<_>>()?;
    Ok((js, ys))
}

/// E[𝒥𝒴]/E[𝒴] over `n_samples` draws.
pub fn mc_expectation(surf: &Surface, cfg: &MeasureConfig, n_samples: usize, n_grid: usize, ode_steps: usize) -> Result<MCEstimate> {
    if n_samples < 2 {
        return invalid("mc_expectation needs n_samples >= 2");
    }
    let space = FieldSpace::new(cfg)?;
    let (js, ys) = sample_pairs(&space, surf, n_samples, n_grid, ode_steps)?;
    ratio_estimate(&js, &ys)
}

/// Coordinates (ê_{a,k}, ν_S^κ) of the surface functional in the truncated basis, [k][a-1].
pub fn nu_coordinates(space: &FieldSpace, surf: &Surface, resolution: usize) -> Result<Vec<[f64; 3]>> {
    let nu = crate::functionals::nu_surface(surf, space.cfg.kappa, resolution)?;
    let per = space.per_component();
    Ok((0..per).map(|k| [1, 2, 3].map(|a| nu.pair(&MonomialForm::single(a, space.elems[a - 1][k].clone())).re)).collect())
}

/// Gaussian value of E[exp(i(A,ν)♯/κ)] under the truncated real measure:
/// exp(-Σ_k (ê_k, ν)²/(2κ²)).
pub fn abelian_truncated_value(space: &FieldSpace, surf: &Surface, resolution: usize) -> Result<f64> {
    let coords = nu_coordinates(space, surf, resolution)?;
    let s: f64 = coords.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();
    Ok((-s / (2.0 * space.cfg.kappa * space.cfg.kappa)).exp())
}

/// (1/det(1 - 2A*A))^{1/2}, the Gaussian expectation of exp⟨Ax, Ax⟩ for ‖A*A‖ < 1/2.
pub fn matrix_gaussian_exact(a: &DMatrix<f64>) -> Result<f64> {
    let ata = a.transpose() * a;
    let top = ata.clone().symmetric_eigenvalues().max();
    if top >= 0.5 {
        return invalid(format!("‖A*A‖ = {top} must be < 1/2"));
    }
    let m = DMatrix::identity(ata.nrows(), ata.ncols()) - ata * 2.0;
    Ok(1.0 / m.determinant().sqrt())
}

/// Plain MC of E[exp⟨Ax, Ax⟩], x standard normal; returns (mean, stderr).
pub fn matrix_gaussian_mc(a: &DMatrix<f64>, n_draws: usize, seed: u64) -> (f64, f64) {
    let chunks = 64usize;
    let per = n_draws.div_ceil(chunks);
    let vals: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let take = per.min(n_draws.saturating_sub(c * per));
            (0..take)
                .map(|_| {
                    let x = nalgebra::DVector::from_fn(a.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
                    (a * x).norm_squared().exp()
                })
                .collect()
        })
        .collect();
    mean_stderr(&vals.concat())
}
