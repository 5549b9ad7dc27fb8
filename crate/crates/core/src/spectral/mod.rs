//! Splitting a power-bounded finite-dimensional operator into the part whose
//! orbits die out and the finite-dimensional part on which it is isometric.
//!
//! `L` is computed as the peripheral spectral subspace (eigenvalues with
//! `|λ| >= 1 − tol`) and `X₀` as the complementary spectral subspace; the
//! projector onto `L` along `X₀` is the map `x ↦ a(x)`.

mod quadratic;

use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

pub use quadratic::{real_quadratic_witness, rotation_identity_defect, RealQuadraticWitness};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operator::{
    matrix_to_value, power_bounded_check, vector_to_value, OperatorKind, OperatorSpec, ScalarField,
    SparseVector,
};
use crate::C64;

pub const DEFAULT_PERIPHERAL_TOL: f64 = 1e-9;
/// Powers sampled in the decay report: `0, 10, …, 200`.
pub const DECAY_HORIZON: usize = 200;
const DECAY_STRIDE: usize = 10;
/// Step of the perturbations used for the local optimality check.
pub const PERTURBATION: f64 = 1e-3;
const POWER_CHECK_HORIZON: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayPoint {
    pub n: usize,
    /// Max of `‖T^n x₀‖` over the normalized `X₀` basis.
    pub norm: f64,
}

/// `‖T^n x₀‖ <= C q^n` on the sampled powers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub c: f64,
    pub q: f64,
}

/// Eigenvalue classified as peripheral although its modulus is below 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapWarning {
    pub lambda: [f64; 2],
    pub modulus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticDecomposition {
    pub field: ScalarField,
    pub dim: usize,
    pub tol: f64,
    /// Orthonormal basis of `L`.
    pub l_basis: Vec<SparseVector>,
    /// Orthonormal basis of `X₀ = ker A`.
    pub x0_basis: Vec<SparseVector>,
    pub projector: CMatrix,
    /// `‖A‖` in the base norm of the operator.
    pub projector_norm: f64,
    pub decay: Vec<DecayPoint>,
    pub fit: DecayFit,
    pub gap_warnings: Vec<GapWarning>,
}

impl AsymptoticDecomposition {
    pub fn dim_l(&self) -> usize {
        self.l_basis.len()
    }

    pub fn dim_x0(&self) -> usize {
        self.x0_basis.len()
    }

    pub fn to_value(&self) -> Value {
        json!({
            "dim_L": self.dim_l(),
            "dim_X0": self.dim_x0(),
            "L_basis": self.l_basis.iter().map(vector_to_value).collect::<Vec<_>>(),
            "X0_basis": self.x0_basis.iter().map(vector_to_value).collect::<Vec<_>>(),
            "projector": matrix_to_value(&self.projector, self.field),
            "projector_norm": self.projector_norm,
            "decay": self.decay,
            "fit": self.fit,
            "gap_warnings": self.gap_warnings,
            "tol": self.tol,
        })
    }
}

fn columns(m: &CMatrix, field: ScalarField) -> Vec<SparseVector> {
    (0..m.ncols())
        .map(|j| SparseVector::from_dense(field, &m.column(j).into_owned(), 0))
        .collect()
}

pub(crate) fn finite_matrix(op: &OperatorSpec) -> Result<CMatrix> {
    if matches!(op.kind(), OperatorKind::Generator(_)) {
        return Err(Error::GeneratorNotIterable);
    }
    op.matrix().ok_or(Error::NotFiniteDimensional)
}

pub fn vu_sine_decompose(op: &OperatorSpec, tol: f64) -> Result<AsymptoticDecomposition> {
    let t = finite_matrix(op)?;
    let cert = power_bounded_check(op, POWER_CHECK_HORIZON);
    if !cert.bounded {
        return Err(Error::NotPowerBounded(cert.describe()));
    }
    let d = t.nrows();
    let field = op.field();
    let peripheral = |z: C64| z.norm() >= 1.0 - tol;

    let eig = linalg::eigenvalues(&t)?;
    let gap_warnings = eig
        .iter()
        .filter(|z| peripheral(**z) && z.norm() < 1.0 - 1e-12)
        .map(|z| GapWarning {
            lambda: [z.re, z.im],
            modulus: z.norm(),
        })
        .collect();
    let q = eig
        .iter()
        .filter(|z| !peripheral(**z))
        .map(|z| z.norm())
        .fold(0.0, f64::max);

    let (mut a, _) = linalg::spectral_projector(&t, peripheral)?;
    if field == ScalarField::Real {
        // The peripheral set is closed under conjugation, so A is real.
        a = a.map(|c| C64::new(c.re, 0.0));
    }
    let l = linalg::column_space(&a, 0.5);
    let complement = linalg::identity(d) - &a;
    let x0 = linalg::column_space(&complement, 0.5);

    let mut decay = Vec::new();
    let mut power = linalg::identity(d);
    for n in 0..=DECAY_HORIZON {
        if n % DECAY_STRIDE == 0 {
            let tx0 = &power * &x0;
            let norm = (0..tx0.ncols())
                .map(|j| {
                    SparseVector::from_dense(field, &tx0.column(j).into_owned(), 0)
                        .norm(op.base_norm())
                })
                .fold(0.0, f64::max);
            decay.push(DecayPoint { n, norm });
        }
        power = &t * power;
    }
    let c = decay
        .iter()
        .map(|p| {
            if q > 0.0 {
                p.norm / q.powi(p.n as i32)
            } else {
                p.norm
            }
        })
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);

    Ok(AsymptoticDecomposition {
        field,
        dim: d,
        tol,
        l_basis: columns(&l, field),
        x0_basis: columns(&x0, field),
        projector_norm: linalg::operator_norm(&a, op.base_norm()),
        projector: a,
        decay,
        fit: DecayFit { c, q },
        gap_warnings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// `a(x) = A x`.
    pub a: SparseVector,
    /// `‖T^N (x − a(x))‖` at the horizon.
    pub tail_residual: f64,
    /// Tail-window minimum of `‖T^n (x − b)‖` at `b = a(x)`.
    pub rho_at_a: f64,
    /// Smallest tail-window minimum over the perturbed points `a(x) ± δ l_j`.
    pub rho_perturbed_min: f64,
    pub locally_optimal: bool,
}

impl Projection {
    pub fn to_value(&self) -> Value {
        json!({
            "a": vector_to_value(&self.a),
            "tail_residual": self.tail_residual,
            "rho_at_a": self.rho_at_a,
            "rho_perturbed_min": self.rho_perturbed_min,
            "locally_optimal": self.locally_optimal,
        })
    }
}

/// Computes `a(x)` and checks it against the orbit distance
/// `ρ_x(b) ≈ min_{N/2 <= n <= N} ‖T^n x − T^n b‖`: the residual at `a(x)`
/// should vanish and no nearby point of `L` should do better.
pub fn asymptotic_project(
    dec: &AsymptoticDecomposition,
    op: &OperatorSpec,
    x: &SparseVector,
    horizon: usize,
) -> Result<Projection> {
    let t = finite_matrix(op)?;
    if t.nrows() != dec.dim {
        return Err(Error::DimensionMismatch {
            expected: dec.dim,
            found: t.nrows(),
        });
    }
    if let Some(max) = x.max_index() {
        if max >= dec.dim as i64 || x.min_index().unwrap_or(0) < 0 {
            return Err(Error::DimensionMismatch {
                expected: dec.dim,
                found: (max + 1).max(0) as usize,
            });
        }
    }
    if x.field() != op.field() {
        return Err(Error::FieldMismatch {
            expected: op.field(),
            found: x.field(),
        });
    }
    let field = op.field();
    let norm = op.base_norm();
    let xv = x.to_dense(0, dec.dim)?;
    let av = &dec.projector * &xv;
    let a = SparseVector::from_dense(field, &av, 0);

    let dense_norm = |v: &DVector<C64>| SparseVector::from_dense(field, v, 0).norm(norm);
    // Tail minimum and value at the horizon of ‖T^n v‖.
    let tail = |v: DVector<C64>| -> (f64, f64) {
        let mut v = v;
        let mut best = f64::INFINITY;
        for n in 0..=horizon {
            if n >= horizon / 2 {
                best = best.min(dense_norm(&v));
            }
            if n < horizon {
                v = &t * v;
            }
        }
        (best, dense_norm(&v))
    };

    let r = &xv - &av;
    let (rho_at_a, tail_residual) = tail(r.clone());

    let mut steps = vec![C64::new(PERTURBATION, 0.0), C64::new(-PERTURBATION, 0.0)];
    if field == ScalarField::Complex {
        steps.push(C64::new(0.0, PERTURBATION));
        steps.push(C64::new(0.0, -PERTURBATION));
    }
    let mut rho_perturbed_min = f64::INFINITY;
    for l in &dec.l_basis {
        let lv = l.to_dense(0, dec.dim)?;
        for s in &steps {
            // x − (a + s l) = r − s l
            let (rho, _) = tail(&r - &lv * *s);
            rho_perturbed_min = rho_perturbed_min.min(rho);
        }
    }

    Ok(Projection {
        a,
        tail_residual,
        rho_at_a,
        rho_perturbed_min,
        locally_optimal: rho_at_a <= rho_perturbed_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        linalg::frobenius(&(a - b)) <= tol
    }

    #[test]
    fn diagonal_split() {
        let t = OperatorSpec::diag_real(&[1.0, 0.5]);
        let d = vu_sine_decompose(&t, DEFAULT_PERIPHERAL_TOL).unwrap();
        assert_eq!((d.dim_l(), d.dim_x0()), (1, 1));
        let expect = linalg::from_real(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        assert!(close(&d.projector, &expect, 1e-14));
        assert_eq!(d.l_basis[0].norm(crate::operator::BaseNorm::L2), 1.0);
        assert!((d.fit.q - 0.5).abs() < 1e-14);
        assert_eq!(
            d.decay[1],
            DecayPoint {
                n: 10,
                norm: 0.5f64.powi(10)
            }
        );
    }

    #[test]
    fn rotation_plus_contraction() {
        let t = OperatorSpec::direct_sum(vec![
            OperatorSpec::rotation(2.0 * std::f64::consts::PI / 7.0).unwrap(),
            OperatorSpec::diag_real(&[0.3, 0.2]),
        ])
        .unwrap();
        let d = vu_sine_decompose(&t, DEFAULT_PERIPHERAL_TOL).unwrap();
        assert_eq!((d.dim_l(), d.dim_x0()), (2, 2));
        assert!(d.gap_warnings.is_empty());
        assert!(d.l_basis.iter().all(|v| v.max_index().unwrap() <= 1));
    }

    #[test]
    fn conjugated_rotation_recovered() {
        let p = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.3, -0.2, 0.5, 0.1, 1.2, 0.4, -0.3, -0.6, 0.2, 0.9, 0.1, 0.25, -0.4, 0.3, 1.1,
            ],
        );
        let pinv = p.clone().try_inverse().unwrap();
        let (c, s) = (1f64.cos(), 1f64.sin());
        let core = DMatrix::from_row_slice(
            4,
            4,
            &[
                c, -s, 0.0, 0.0, s, c, 0.0, 0.0, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.0, 0.5,
            ],
        );
        let m = &p * core * &pinv;
        let t = OperatorSpec::dense(ScalarField::Real, linalg::from_real(&m)).unwrap();
        let d = vu_sine_decompose(&t, DEFAULT_PERIPHERAL_TOL).unwrap();
        assert_eq!(d.dim_l(), 2);
        let block = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]));
        let truth = linalg::from_real(&(&p * block * &pinv));
        assert!(close(&d.projector, &truth, 1e-10));
        // A commutes with T and is idempotent.
        let tm = t.matrix().unwrap();
        assert!(close(&(&tm * &d.projector), &(&d.projector * &tm), 1e-10));
        assert!(close(&(&d.projector * &d.projector), &d.projector, 1e-10));
    }

    #[test]
    fn jordan_block_rejected() {
        let t = OperatorSpec::dense_real(2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            vu_sine_decompose(&t, 1e-9),
            Err(Error::NotPowerBounded(_))
        ));
    }

    #[test]
    fn shift_rejected() {
        let s = OperatorSpec::unit_shift(crate::operator::ShiftDirection::Bilateral);
        assert!(matches!(
            vu_sine_decompose(&s, 1e-9),
            Err(Error::NotFiniteDimensional)
        ));
    }

    #[test]
    fn gap_eigenvalue_flagged() {
        let t = OperatorSpec::diag_real(&[1.0 - 1e-10, 0.5]);
        let d = vu_sine_decompose(&t, 1e-9).unwrap();
        assert_eq!(d.dim_l(), 1);
        assert_eq!(d.gap_warnings.len(), 1);
    }

    #[test]
    fn projection_examples() {
        let t = OperatorSpec::diag_real(&[1.0, 0.5]);
        let d = vu_sine_decompose(&t, 1e-9).unwrap();
        let e2 = SparseVector::basis(ScalarField::Real, 1);
        let p = asymptotic_project(&d, &t, &e2, 100).unwrap();
        assert!(p.a.is_zero());
        assert!(p.locally_optimal);

        let x = SparseVector::from_real([(0, 1.0), (1, 1.0)]);
        let p = asymptotic_project(&d, &t, &x, 100).unwrap();
        assert_eq!(p.a, SparseVector::basis(ScalarField::Real, 0));
        assert!(p.tail_residual < 1e-29);
        assert!(p.locally_optimal);
        assert!(p.rho_perturbed_min >= 0.5 * PERTURBATION);
    }

    #[test]
    fn projection_dimension_checked() {
        let t = OperatorSpec::diag_real(&[1.0, 0.5]);
        let d = vu_sine_decompose(&t, 1e-9).unwrap();
        let t3 = OperatorSpec::diag_real(&[1.0, 0.5, 0.2]);
        let x = SparseVector::basis(ScalarField::Real, 0);
        assert!(matches!(
            asymptotic_project(&d, &t3, &x, 10),
            Err(Error::DimensionMismatch { .. })
        ));
        let far = SparseVector::basis(ScalarField::Real, 5);
        assert!(matches!(
            asymptotic_project(&d, &t, &far, 10),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn json_keys() {
        let t = OperatorSpec::diag_real(&[1.0, 0.5]);
        let v = vu_sine_decompose(&t, 1e-9).unwrap().to_value();
        for k in ["dim_L", "L_basis", "projector", "decay"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert_eq!(v["dim_L"], 1);
        assert_eq!(v["decay"][0]["n"], 0);
    }
}
