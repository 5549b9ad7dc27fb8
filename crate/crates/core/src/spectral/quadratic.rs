use nalgebra::DMatrix;
use serde::Serialize;

use super::finite_matrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{OperatorSpec, ScalarField};
use crate::C64;

/// `S = T² + rT + s` built from an eigenvalue `λ` of the complexification,
/// so that `S` factors as `(T − λ)(T − λ̄)` and is singular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RealQuadraticWitness {
    pub r: f64,
    pub s: f64,
    /// Smallest singular value of `S`.
    pub singularity: f64,
    pub lambda: [f64; 2],
    /// `‖T‖₂`, the scale against which `singularity` is judged.
    pub operator_norm: f64,
}

/// Picks the eigenvalue of largest modulus (ties: larger imaginary part,
/// then first in the solver's order).
pub fn real_quadratic_witness(op: &OperatorSpec) -> Result<RealQuadraticWitness> {
    if op.field() != ScalarField::Real {
        return Err(Error::FieldMismatch {
            expected: ScalarField::Real,
            found: op.field(),
        });
    }
    let t = finite_matrix(op)?;
    let eig = linalg::eigenvalues(&t)?;
    let top = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tie = 1e-9 * top.max(f64::MIN_POSITIVE);
    let lambda: C64 = eig
        .iter()
        .copied()
        .reduce(|best, z| {
            let larger = z.norm() > best.norm() + tie;
            let tied_higher = (z.norm() - best.norm()).abs() <= tie && z.im > best.im;
            if larger || tied_higher {
                z
            } else {
                best
            }
        })
        .expect("nonempty spectrum");

    let r = -2.0 * lambda.re;
    let s = lambda.norm_sqr();
    let tr = t.map(|c| c.re);
    let d = tr.nrows();
    let sm = &tr * &tr + &tr * r + DMatrix::<f64>::identity(d, d) * s;
    let sv = sm.singular_values();
    let singularity = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let operator_norm = tr.singular_values().iter().copied().fold(0.0, f64::max);
    Ok(RealQuadraticWitness {
        r,
        s,
        singularity,
        lambda: [lambda.re, lambda.im],
        operator_norm,
    })
}

/// `‖T_α² − (sin 2α / sin α) T_α + I‖₂` for the plane rotation `T_α`.
pub fn rotation_identity_defect(alpha: f64) -> f64 {
    let (c, s) = (alpha.cos(), alpha.sin());
    let t = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let k = (2.0 * alpha).sin() / s;
    let m = &t * &t - &t * k + DMatrix::<f64>::identity(2, 2);
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rotation_sixty_degrees() {
        let t = OperatorSpec::rotation(PI / 3.0).unwrap();
        let w = real_quadratic_witness(&t).unwrap();
        assert!((w.r + 1.0).abs() < 1e-12 && (w.s - 1.0).abs() < 1e-12);
        assert!(w.singularity < 1e-12);
        assert!(w.lambda[1] > 0.0);
        assert!(rotation_identity_defect(PI / 3.0) < 1e-15);
    }

    #[test]
    fn diagonal_picks_largest() {
        let t = OperatorSpec::diag_real(&[2.0, 3.0]);
        let w = real_quadratic_witness(&t).unwrap();
        assert_eq!((w.r, w.s), (-6.0, 9.0));
        assert_eq!(w.singularity, 0.0);
        // Fixing λ = 2 instead gives S = diag(0, 1).
        let s2 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0]));
        let s2 = &s2 * &s2 - &s2 * 4.0 + DMatrix::identity(2, 2) * 4.0;
        assert_eq!(s2, DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn rotation_identity_holds_across_angles() {
        for k in 1..64 {
            let alpha = PI * k as f64 / 64.0;
            assert!(rotation_identity_defect(alpha) <= 1e-12, "alpha = {alpha}");
        }
    }

    #[test]
    fn complex_operator_rejected() {
        let t = crate::operator::complexify(&OperatorSpec::rotation(1.0).unwrap()).unwrap();
        assert!(matches!(
            real_quadratic_witness(&t),
            Err(Error::FieldMismatch { .. })
        ));
    }
}
