//! κ→∞ area-law values Tr exp[(|S|/8) μ(Σ E^α⊗E^α)], rectangular Wilson loops,
//! the static potential and the dual-surface report.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::functionals::{duality_angle, DualityReport};
use crate::lie::{casimir_tensor, max_abs, mu_contract, CMat, GroupKind, LieBasis};
use crate::surface::{area, Surface};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaLawResult {
    pub group: GroupKind,
    pub n: usize,
    pub area: f64,
    pub value: f64,
    /// Eigenvalues of μ(casimir) (the exponent per unit area/8), ascending.
    pub exponent_eigenvalues: Vec<f64>,
    /// Scalar s with μ(casimir) = s·I, when it is a multiple of the identity.
    pub exponent_scalar: Option<f64>,
}

/// s with μ(Σ E^α⊗E^α) = s·I, or None.
pub fn casimir_scalar(basis: &LieBasis) -> Result<Option<f64>> {
    let m = mu_contract(&casimir_tensor(basis))?;
    let s = m[(0, 0)].re;
    let d = m.nrows();
    let off = max_abs(&(&m - CMat::identity(d, d) * Complex64::new(s, 0.0)));
    Ok(if off < 1e-12 { Some(s) } else { None })
}

/// Tr exp[(area/8) μ(casimir)] by a matrix exponential.
pub fn area_law_limit(area: f64, basis: &LieBasis) -> Result<AreaLawResult> {
    if !(area >= 0.0 && area.is_finite()) {
        return invalid(format!("area must be finite and nonnegative, got {area}"));
    }
    let m = mu_contract(&casimir_tensor(basis))?;
    let value = (&m * Complex64::new(area / 8.0, 0.0)).exp().trace().re;
    let herm = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut eig: Vec<f64> = herm.map(|z| z.re).symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(AreaLawResult { group: basis.kind, n: basis.matrix_dim, area, value, exponent_eigenvalues: eig, exponent_scalar: casimir_scalar(basis)? })
}

/// area_law_limit with |S| from the surface-area quadrature.
pub fn area_law_for_surface(surf: &Surface, resolution: usize, basis: &LieBasis) -> Result<AreaLawResult> {
    area_law_limit(area(surf, resolution)?.area, basis)
}

/// Closed forms: U(1) e^{-A/8}; SU(N) N e^{(1/N - N)A/8}; SO(N) N e^{(1 - N)A/16}.
pub fn area_law_closed_form(kind: GroupKind, n: usize, area: f64) -> f64 {
    let nf = n as f64;
    match kind {
        GroupKind::U1 => (-area / 8.0).exp(),
        GroupKind::SU => nf * ((1.0 / nf - nf) * area / 8.0).exp(),
        GroupKind::SO => nf * ((1.0 - nf) * area / 16.0).exp(),
    }
}

/// W(R, T) for the flat R × T rectangle.
pub fn rect_wilson(r: f64, t: f64, basis: &LieBasis) -> Result<f64> {
    if !(r >= 0.0 && t >= 0.0) {
        return invalid("rectangle sides must be nonnegative");
    }
    Ok(area_law_limit(r * t, basis)?.value)
}

/// V(R) = -lim_T log[W(R, T+1)/W(R, T)] = -R s/8 for the scalar exponent s.
pub fn quark_potential(r: f64, basis: &LieBasis) -> Result<f64> {
    if !(r >= 0.0) {
        return invalid("R must be nonnegative");
    }
    match casimir_scalar(basis)? {
        Some(s) => Ok(-r * s / 8.0),
        None => invalid("potential needs a representation with scalar Casimir"),
    }
}

/// The same limit taken numerically from the ratio at finite T.
pub fn quark_potential_ratio(r: f64, t: f64, basis: &LieBasis) -> Result<f64> {
    Ok(-(rect_wilson(r, t + 1.0, basis)? / rect_wilson(r, t, basis)?).ln())
}

/// Closed forms: U(1) R/8; SU(N) (R/8)(N - 1/N); SO(N) (R/16)(N - 1).
pub fn potential_closed_form(kind: GroupKind, n: usize, r: f64) -> f64 {
    let nf = n as f64;
    match kind {
        GroupKind::U1 => r / 8.0,
        GroupKind::SU => r / 8.0 * (nf - 1.0 / nf),
        GroupKind::SO => r / 16.0 * (nf - 1.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualAreaLaw {
    pub per_kappa: Vec<DualityReport>,
    /// κ²⟨F, F̄⟩ per κ.
    pub kappa2_inner: Vec<f64>,
    /// The asserted limit: area_law_limit(S).
    pub limit: AreaLawResult,
}

pub fn dual_area_law(surf: &Surface, basis: &LieBasis, kappas: &[f64], resolution: usize) -> Result<DualAreaLaw> {
    let per_kappa: Vec<DualityReport> = kappas.iter().map(|&k| duality_angle(surf, k, resolution)).collect::<Result<_>>()?;
    let kappa2_inner = per_kappa.iter().map(|r| r.kappa * r.kappa * r.inner).collect();
    Ok(DualAreaLaw { per_kappa, kappa2_inner, limit: area_law_for_surface(surf, resolution, basis)? })
}
