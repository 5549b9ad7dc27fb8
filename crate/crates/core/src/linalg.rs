//! Dense complex linear algebra shared by the analysis modules: Schur forms
//! with eigenvalue reordering, triangular Sylvester solves, induced norms.

use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};
use crate::operator::BaseNorm;
use crate::C64;

pub type CMatrix = DMatrix<C64>;

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn from_real(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

/// Complex Schur form `m = Q U Q*` with `U` upper triangular.
pub fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    let d = m.nrows();
    if d != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: m.ncols(),
        });
    }
    if m.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::Linalg("non-finite matrix entry".into()));
    }
    let s = Schur::try_new(m.clone(), f64::EPSILON, 1000 * d.max(1))
        .ok_or_else(|| Error::Linalg("Schur iteration did not converge".into()))?;
    let (q, mut u) = s.unpack();
    for i in 0..d {
        for j in 0..i {
            u[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, u))
}

pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    let (_, u) = schur(m)?;
    Ok((0..u.nrows()).map(|i| u[(i, i)]).collect())
}

/// Swaps the adjacent diagonal entries `k`, `k + 1` of the triangular factor
/// with a unitary rotation, updating `q` so that `q u q*` is unchanged.
fn swap_adjacent(q: &mut CMatrix, u: &mut CMatrix, k: usize) {
    let a = u[(k, k)];
    let b = u[(k, k + 1)];
    let c = u[(k + 1, k + 1)];
    // Eigenvector of the 2x2 block for the eigenvalue c.
    let v1 = b;
    let v2 = c - a;
    let r = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    let (g11, g21) = (v1 / r, v2 / r);
    let (g12, g22) = (-g21.conj(), g11.conj());
    let n = u.nrows();
    // u <- u G on columns k, k+1
    for i in 0..n {
        let x = u[(i, k)];
        let y = u[(i, k + 1)];
        u[(i, k)] = x * g11 + y * g21;
        u[(i, k + 1)] = x * g12 + y * g22;
    }
    // u <- G* u on rows k, k+1
    for j in 0..n {
        let x = u[(k, j)];
        let y = u[(k + 1, j)];
        u[(k, j)] = g11.conj() * x + g21.conj() * y;
        u[(k + 1, j)] = g12.conj() * x + g22.conj() * y;
    }
    u[(k + 1, k)] = C64::new(0.0, 0.0);
    for i in 0..n {
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * g11 + y * g21;
        q[(i, k + 1)] = x * g12 + y * g22;
    }
}

/// Reorders a Schur form so every eigenvalue satisfying `select` comes
/// first. Returns the number of selected eigenvalues.
pub fn reorder_schur<F>(q: &mut CMatrix, u: &mut CMatrix, select: F) -> usize
where
    F: Fn(C64) -> bool,
{
    let n = u.nrows();
    let flags: Vec<bool> = (0..n).map(|i| select(u[(i, i)])).collect();
    let mut flags = flags;
    let mut placed = 0;
    for i in 0..n {
        if flags[i] {
            let mut j = i;
            while j > placed {
                swap_adjacent(q, u, j - 1);
                flags.swap(j - 1, j);
                j -= 1;
            }
            placed += 1;
        }
    }
    placed
}

/// Solves `a y - y b = c` for upper triangular `a` (k x k) and `b`
/// ((n-k) x (n-k)) with disjoint spectra.
pub fn triangular_sylvester(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<CMatrix> {
    let k = a.nrows();
    let m = b.nrows();
    let mut y = CMatrix::zeros(k, m);
    for j in 0..m {
        let mut rhs: Vec<C64> = (0..k).map(|i| c[(i, j)]).collect();
        for l in 0..j {
            let blj = b[(l, j)];
            for (i, r) in rhs.iter_mut().enumerate() {
                *r += y[(i, l)] * blj;
            }
        }
        let shift = b[(j, j)];
        for i in (0..k).rev() {
            let mut s = rhs[i];
            for l in i + 1..k {
                s -= a[(i, l)] * y[(l, j)];
            }
            let piv = a[(i, i)] - shift;
            if piv.norm() < 1e-14 {
                return Err(Error::Linalg(
                    "Sylvester equation with overlapping spectra".into(),
                ));
            }
            y[(i, j)] = s / piv;
        }
    }
    Ok(y)
}

/// Spectral projector onto the invariant subspace of the eigenvalues picked
/// by `select`, along the complementary invariant subspace.
pub fn spectral_projector<F>(m: &CMatrix, select: F) -> Result<(CMatrix, usize)>
where
    F: Fn(C64) -> bool,
{
    let n = m.nrows();
    let (mut q, mut u) = schur(m)?;
    let k = reorder_schur(&mut q, &mut u, select);
    let mut p = CMatrix::zeros(n, n);
    for i in 0..k {
        p[(i, i)] = C64::new(1.0, 0.0);
    }
    if k > 0 && k < n {
        let u11 = u.view((0, 0), (k, k)).into_owned();
        let u22 = u.view((k, k), (n - k, n - k)).into_owned();
        let u12 = u.view((0, k), (k, n - k)).into_owned();
        let y = triangular_sylvester(&u11, &u22, &(-u12))?;
        for i in 0..k {
            for j in 0..n - k {
                p[(i, k + j)] = -y[(i, j)];
            }
        }
    }
    Ok((&q * p * q.adjoint(), k))
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn rank(m: &CMatrix, threshold: f64) -> usize {
    singular_values(m)
        .into_iter()
        .filter(|&s| s > threshold)
        .count()
}

/// Operator norm induced by the given vector norm.
pub fn operator_norm(m: &CMatrix, norm: BaseNorm) -> f64 {
    match norm {
        BaseNorm::L1 => (0..m.ncols())
            .map(|j| m.column(j).iter().map(|c| c.norm()).sum::<f64>())
            .fold(0.0, f64::max),
        BaseNorm::Sup => (0..m.nrows())
            .map(|i| m.row(i).iter().map(|c| c.norm()).sum::<f64>())
            .fold(0.0, f64::max),
        BaseNorm::L2 => singular_values(m).first().copied().unwrap_or(0.0),
    }
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn spectral_norm(m: &CMatrix) -> f64 {
    operator_norm(m, BaseNorm::L2)
}

/// Orthonormal basis (columns) of the column space of `m`, keeping singular
/// directions with singular value above `threshold`. Real input yields a
/// real basis.
pub fn column_space(m: &CMatrix, threshold: f64) -> CMatrix {
    if is_real(m) {
        let re = m.map(|c| c.re);
        let svd = re.svd(true, false);
        let u = svd.u.expect("requested U");
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > threshold)
            .collect();
        let mut out = CMatrix::zeros(m.nrows(), keep.len());
        for (c, &i) in keep.iter().enumerate() {
            out.set_column(c, &u.column(i).map(|x| C64::new(x, 0.0)));
        }
        return out;
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > threshold)
        .map(|(i, _)| i)
        .collect();
    let mut out = CMatrix::zeros(m.nrows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &u.column(i));
    }
    out
}

pub fn inverse(m: &CMatrix) -> Option<CMatrix> {
    m.clone().try_inverse()
}

pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|c| c.im == 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn reorder_moves_selected_eigenvalues_first() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.2),
                c(1.0),
                c(0.3),
                c(0.0),
                c(1.0),
                c(0.5),
                c(0.0),
                c(0.0),
                c(0.5),
            ],
        );
        let (mut q, mut u) = schur(&m).unwrap();
        let k = reorder_schur(&mut q, &mut u, |l| l.norm() > 0.9);
        assert_eq!(k, 1);
        assert!((u[(0, 0)] - c(1.0)).norm() < 1e-12);
        let back = &q * &u * q.adjoint();
        assert!(frobenius(&(back - &m)) < 1e-12);
    }

    #[test]
    fn projector_is_idempotent_and_commutes() {
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(0.0),
                c(-1.0),
                c(0.7),
                c(1.0),
                c(0.0),
                c(0.1),
                c(0.0),
                c(0.0),
                c(0.4),
            ],
        );
        let (p, k) = spectral_projector(&m, |l| l.norm() > 0.9).unwrap();
        assert_eq!(k, 2);
        assert!(frobenius(&(&p * &p - &p)) < 1e-12);
        assert!(frobenius(&(&m * &p - &p * &m)) < 1e-12);
    }

    #[test]
    fn induced_norms() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0), c(-2.0), c(3.0), c(4.0)]);
        assert_eq!(operator_norm(&m, BaseNorm::L1), 6.0);
        assert_eq!(operator_norm(&m, BaseNorm::Sup), 7.0);
        assert!((operator_norm(&m, BaseNorm::L2) - 5.116672736016927).abs() < 1e-12);
    }
}
