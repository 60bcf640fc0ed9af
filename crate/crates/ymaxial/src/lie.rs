//! Orthonormal bases of u(1), su(n), so(n) under the form -Tr[AB], with the
//! tensor contractions that produce the non-Abelian area-law exponent.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub type CMat = DMatrix<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GroupKind {
    U1,
    SU,
    SO,
}

impl std::fmt::Display for GroupKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupKind::U1 => write!(f, "U1"),
            GroupKind::SU => write!(f, "SU"),
            GroupKind::SO => write!(f, "SO"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LieBasis {
    pub kind: GroupKind,
    pub matrix_dim: usize,
    pub generators: Vec<CMat>,
}

impl LieBasis {
    pub fn algebra_dim(&self) -> usize {
        self.generators.len()
    }

    pub fn is_abelian(&self) -> bool {
        self.kind == GroupKind::U1
    }
}

/// Canonical generator order:
/// SU(n): symmetric off-diagonal (j<k), antisymmetric off-diagonal (j<k), then diagonal l = 1..n-1,
/// each a generalized Gell-Mann matrix times i/sqrt(2).
/// SO(n): (E_jk - E_kj)/sqrt(2) for j<k in lexicographic order.
pub fn build_basis(kind: GroupKind, n: usize) -> Result<LieBasis> {
    let generators = match kind {
        GroupKind::U1 => {
            if n != 1 {
                return invalid(format!("U1 is realized on 1x1 matrices, got n = {n}"));
            }
            vec![CMat::from_element(1, 1, I)]
        }
        GroupKind::SU => {
            if n < 2 {
                return invalid(format!("SU(n) needs n >= 2, got n = {n}"));
            }
            su_generators(n)
        }
        GroupKind::SO => {
            if n < 2 {
                return invalid(format!("SO(n) needs n >= 2, got n = {n}"));
            }
            so_generators(n)
        }
    };
    Ok(LieBasis { kind, matrix_dim: n, generators })
}

fn su_generators(n: usize) -> Vec<CMat> {
    let scale = I / 2f64.sqrt();
    let mut out = Vec::with_capacity(n * n - 1);
    for j in 0..n {
        for k in (j + 1)..n {
            let mut m = CMat::zeros(n, n);
            m[(j, k)] = Complex64::new(1.0, 0.0);
            m[(k, j)] = Complex64::new(1.0, 0.0);
            out.push(m * scale);
        }
    }
    for j in 0..n {
        for k in (j + 1)..n {
            let mut m = CMat::zeros(n, n);
            m[(j, k)] = -I;
            m[(k, j)] = I;
            out.push(m * scale);
        }
    }
    for l in 1..n {
        let c = (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut m = CMat::zeros(n, n);
        for j in 0..l {
            m[(j, j)] = Complex64::new(c, 0.0);
        }
        m[(l, l)] = Complex64::new(-c * l as f64, 0.0);
        out.push(m * scale);
    }
    out
}

fn so_generators(n: usize) -> Vec<CMat> {
    let s = 1.0 / 2f64.sqrt();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for j in 0..n {
        for k in (j + 1)..n {
            let mut m = CMat::zeros(n, n);
            m[(j, k)] = Complex64::new(s, 0.0);
            m[(k, j)] = Complex64::new(-s, 0.0);
            out.push(m);
        }
    }
    out
}

/// Full array c[γ][α][β] = c_γ^{αβ}; antisymmetric in (α, β) by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    pub dim: usize,
    c: Vec<f64>,
}

impl StructureConstants {
    pub fn get(&self, gamma: usize, alpha: usize, beta: usize) -> f64 {
        self.c[(gamma * self.dim + alpha) * self.dim + beta]
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0.0)
    }
}

/// c_γ^{αβ} = -Tr(E^γ [E^α, E^β]), so that [E^α, E^β] = Σ_γ c_γ^{αβ} E^γ.
/// Only α < β is computed; the lower triangle is the exact negation.
pub fn structure_constants(basis: &LieBasis) -> StructureConstants {
    let d = basis.algebra_dim();
    let mut c = vec![0.0; d * d * d];
    if !basis.is_abelian() {
        for a in 0..d {
            for b in (a + 1)..d {
                let ea = &basis.generators[a];
                let eb = &basis.generators[b];
                let comm = ea * eb - eb * ea;
                for g in 0..d {
                    let v = -(&basis.generators[g] * &comm).trace();
                    debug_assert!(v.im.abs() < 1e-12, "structure constant not real: {v}");
                    c[(g * d + a) * d + b] = v.re;
                    c[(g * d + b) * d + a] = -v.re;
                }
            }
        }
    }
    StructureConstants { dim: d, c }
}

/// Σ_α E^α ⊗ E^α with (X⊗Y)_{(a,b),(c,d)} = X_ac Y_bd, row index a·n + b.
pub fn casimir_tensor(basis: &LieBasis) -> CMat {
    let n = basis.matrix_dim;
    let mut out = CMat::zeros(n * n, n * n);
    for e in &basis.generators {
        out += e.kronecker(e);
    }
    out
}

/// μ(T)_{ad} = Σ_b T_{(a,b),(b,d)}; μ(X⊗Y) = XY.
pub fn mu_contract(t: &CMat) -> Result<CMat> {
    let nn = t.nrows();
    let n = (nn as f64).sqrt().round() as usize;
    if t.ncols() != nn || n * n != nn {
        return invalid(format!("mu_contract needs an n^2 x n^2 matrix, got {}x{}", t.nrows(), t.ncols()));
    }
    let mut out = CMat::zeros(n, n);
    for a in 0..n {
        for d in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for b in 0..n {
                s += t[(a * n + b, b * n + d)];
            }
            out[(a, d)] = s;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SpecialTensors {
    pub i: CMat,
    pub j: CMat,
    pub k: CMat,
}

/// I = δ_ac δ_bd, J = δ_ad δ_bc, K = δ_ab δ_cd in the kron index convention.
pub fn special_tensors(n: usize) -> SpecialTensors {
    let nn = n * n;
    let one = Complex64::new(1.0, 0.0);
    let mut i = CMat::zeros(nn, nn);
    let mut j = CMat::zeros(nn, nn);
    let mut k = CMat::zeros(nn, nn);
    for a in 0..n {
        for b in 0..n {
            i[(a * n + b, a * n + b)] = one;
            j[(a * n + b, b * n + a)] = one;
        }
        for c in 0..n {
            k[(a * n + a, c * n + c)] = one;
        }
    }
    SpecialTensors { i, j, k }
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Matrix of -Tr[E^α E^β]; the identity for an orthonormal basis.
pub fn gram(basis: &LieBasis) -> DMatrix<f64> {
    let d = basis.algebra_dim();
    DMatrix::from_fn(d, d, |a, b| -(&basis.generators[a] * &basis.generators[b]).trace().re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &CMat, b: &CMat) -> f64 {
        max_abs(&(a - b))
    }

    #[test]
    fn dimensions() {
        assert_eq!(build_basis(GroupKind::U1, 1).unwrap().algebra_dim(), 1);
        for n in 2..6 {
            assert_eq!(build_basis(GroupKind::SU, n).unwrap().algebra_dim(), n * n - 1);
            assert_eq!(build_basis(GroupKind::SO, n).unwrap().algebra_dim(), n * (n - 1) / 2);
        }
        assert!(build_basis(GroupKind::SU, 1).is_err());
        assert!(build_basis(GroupKind::U1, 2).is_err());
    }

    #[test]
    fn orthonormal_and_antihermitian() {
        for (kind, n) in [(GroupKind::U1, 1), (GroupKind::SU, 2), (GroupKind::SU, 3), (GroupKind::SO, 3), (GroupKind::SO, 4)] {
            let b = build_basis(kind, n).unwrap();
            let g = gram(&b);
            assert!((g - DMatrix::identity(b.algebra_dim(), b.algebra_dim())).amax() < 1e-12);
            for e in &b.generators {
                assert!(max_abs(&(e + e.adjoint())) < 1e-12);
            }
        }
    }

    #[test]
    fn su2_is_scaled_pauli() {
        // iσ_α/√2 with σ_x, σ_y, σ_z in canonical order
        let b = build_basis(GroupKind::SU, 2).unwrap();
        let s = I / 2f64.sqrt();
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let sx = CMat::from_row_slice(2, 2, &[zero, one, one, zero]);
        let sy = CMat::from_row_slice(2, 2, &[zero, -I, I, zero]);
        let sz = CMat::from_row_slice(2, 2, &[one, zero, zero, -one]);
        assert!(close(&b.generators[0], &(sx * s)) < 1e-15);
        assert!(close(&b.generators[1], &(sy * s)) < 1e-15);
        assert!(close(&b.generators[2], &(sz * s)) < 1e-15);
    }

    #[test]
    fn su2_structure_constant_magnitude() {
        // [iσ1/√2, iσ2/√2] = -(1/2)[σ1,σ2] = -iσ3 = -√2·(iσ3/√2)
        let b = build_basis(GroupKind::SU, 2).unwrap();
        let c = structure_constants(&b);
        assert!((c.get(2, 0, 1) + 2f64.sqrt()).abs() < 1e-12);
        assert!((c.get(2, 1, 0) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bracket_expands_in_structure_constants() {
        for (kind, n) in [(GroupKind::SU, 3), (GroupKind::SO, 4)] {
            let b = build_basis(kind, n).unwrap();
            let c = structure_constants(&b);
            let d = b.algebra_dim();
            for a in 0..d {
                for bb in 0..d {
                    let comm = &b.generators[a] * &b.generators[bb] - &b.generators[bb] * &b.generators[a];
                    let mut rebuilt = CMat::zeros(n, n);
                    for g in 0..d {
                        rebuilt += &b.generators[g] * Complex64::new(c.get(g, a, bb), 0.0);
                    }
                    assert!(close(&comm, &rebuilt) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn u1_structure_constants_vanish() {
        let b = build_basis(GroupKind::U1, 1).unwrap();
        assert!(structure_constants(&b).is_zero());
        let cas = casimir_tensor(&b);
        assert!((cas[(0, 0)] + 1.0).norm() < 1e-15);
    }

    #[test]
    fn mu_of_elementary_tensor_is_product() {
        let x = CMat::from_fn(3, 3, |a, b| Complex64::new((a + 2 * b) as f64, (a * b) as f64 - 1.0));
        let y = CMat::from_fn(3, 3, |a, b| Complex64::new(1.0 - a as f64, b as f64 * 0.5));
        assert!(close(&mu_contract(&x.kronecker(&y)).unwrap(), &(&x * &y)) < 1e-12);
        let id = CMat::identity(3, 3);
        assert!(close(&mu_contract(&id.kronecker(&id)).unwrap(), &id) < 1e-15);
        assert!(mu_contract(&CMat::zeros(5, 5)).is_err());
    }
}
