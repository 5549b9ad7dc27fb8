//! Approximate eigenvectors: explicit Weyl sequences for unit-weight shifts,
//! the dense emulation for matrices, and a falsifier for occasionally
//! attracting compact sets of exact isometries.

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operator::{
    complexify, vector_to_value, OperatorSpec, OrbitWalker, ScalarField, ShiftDirection,
    SparseVector,
};
use crate::orbit::{tail_distances, CompactNet};
use crate::C64;

/// Allowed deviation of `|λ|` from 1 for the shift construction.
pub const UNIMODULAR_TOL: f64 = 1e-12;
/// Margin by which a tail distance must exceed the mesh to count as a
/// witness.
pub const WITNESS_MARGIN: f64 = 1e-9;
const KERNEL_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeylBranch {
    /// Normalized geometric blocks on disjoint windows of a shift.
    ShiftWindows,
    /// Exact kernel vectors of `T − λ`.
    Kernel,
    /// Smallest singular direction of `T − λ` in finite dimensions.
    SmallestSingular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeylSequenceReport {
    pub lambda: C64,
    pub vectors: Vec<SparseVector>,
    /// `‖T z_n − λ z_n‖`, computed by applying the operator.
    pub residuals: Vec<f64>,
    /// `min_{n≠m} ‖z_n − z_m‖`, absent for a single vector.
    pub separation: Option<f64>,
    pub finite_dimensional: bool,
    pub branch: WeylBranch,
}

impl WeylSequenceReport {
    pub fn to_value(&self) -> Value {
        json!({
            "lambda": [self.lambda.re, self.lambda.im],
            "vectors": self.vectors.iter().map(vector_to_value).collect::<Vec<_>>(),
            "residuals": self.residuals,
            "separation": self.separation,
            "finite_dimensional": self.finite_dimensional,
            "branch": self.branch,
        })
    }
}

fn min_separation(vectors: &[SparseVector]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, a) in vectors.iter().enumerate() {
        for b in &vectors[i + 1..] {
            let d = a.distance(b, crate::operator::BaseNorm::L2);
            best = Some(best.map_or(d, |m: f64| m.min(d)));
        }
    }
    best
}

fn field_of(lambda: C64) -> ScalarField {
    if lambda.im == 0.0 {
        ScalarField::Real
    } else {
        ScalarField::Complex
    }
}

/// Unit-weight shift acting on the field that `λ` requires.
fn shift_for(direction: ShiftDirection, lambda: C64) -> Result<OperatorSpec> {
    let s = OperatorSpec::unit_shift(direction);
    match field_of(lambda) {
        ScalarField::Real => Ok(s),
        ScalarField::Complex => complexify(&s),
    }
}

/// `n^{-1/2} Σ_{k=start}^{start+n−1} λ^{−k} e_k`.
///
/// For non-real `λ` the coefficients are `n^{-1/2} p e^{−ijθ}` with
/// `θ = arg λ` and `p` the unimodular phase `e^{−i·start·θ}`, so every
/// coefficient has modulus `n^{-1/2}` to rounding regardless of how far the
/// window sits from the origin.
pub fn weyl_vector(lambda: C64, start: i64, n: usize) -> Result<SparseVector> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "window length must be at least 1".into(),
        ));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let coeffs: Vec<(i64, C64)> = if lambda.im == 0.0 {
        (0..n as i64)
            .map(|j| (start + j, lambda.powi(-((start + j) as i32)) * scale))
            .collect()
    } else {
        let theta = lambda.arg();
        let tau = std::f64::consts::TAU;
        let phase = C64::from_polar(1.0, -((start as f64 * theta) % tau));
        (0..n as i64)
            .map(|j| {
                (
                    start + j,
                    phase * C64::from_polar(scale, -(j as f64) * theta),
                )
            })
            .collect()
    };
    SparseVector::from_pairs(field_of(lambda), coeffs)
}

/// `z_n` on the window `[n², n² + n − 1]` for `n = 1..=count`.
pub fn weyl_sequence_shift(
    direction: ShiftDirection,
    lambda: C64,
    count: usize,
) -> Result<WeylSequenceReport> {
    if (lambda.norm() - 1.0).abs() > UNIMODULAR_TOL {
        return Err(Error::NotUnimodular(lambda.norm()));
    }
    if !matches!(
        direction,
        ShiftDirection::Forward | ShiftDirection::Bilateral
    ) {
        return Err(Error::InvalidArgument(format!(
            "Weyl construction needs a forward or bilateral shift, got {direction:?}"
        )));
    }
    let op = shift_for(direction, lambda)?;
    let mut vectors = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    for n in 1..=count {
        let z = weyl_vector(lambda, (n * n) as i64, n)?;
        residuals.push(weyl_residual(&op, &z, lambda)?);
        vectors.push(z);
    }
    Ok(WeylSequenceReport {
        lambda,
        separation: min_separation(&vectors),
        vectors,
        residuals,
        finite_dimensional: false,
        branch: WeylBranch::ShiftWindows,
    })
}

/// The identity read as a unit-weight "shift by zero": `z_n = e_n`.
pub fn weyl_sequence_identity(count: usize) -> WeylSequenceReport {
    let vectors: Vec<SparseVector> = (1..=count as i64)
        .map(|n| SparseVector::basis(ScalarField::Real, n))
        .collect();
    WeylSequenceReport {
        lambda: C64::new(1.0, 0.0),
        separation: min_separation(&vectors),
        residuals: vectors
            .iter()
            .map(|z| z.distance(z, crate::operator::BaseNorm::L2))
            .collect(),
        vectors,
        finite_dimensional: false,
        branch: WeylBranch::ShiftWindows,
    }
}

/// `‖T z − λ z‖` in the active norm of `op`.
pub fn weyl_residual(op: &OperatorSpec, z: &SparseVector, lambda: C64) -> Result<f64> {
    let tz = op.apply(z)?;
    Ok(op.distance(&tz, &z.scale(lambda)?))
}

/// `‖T^k z − λ T^{k−1} z‖` for `k = 1..=k_max`.
pub fn isometric_residual_profile(
    op: &OperatorSpec,
    z: &SparseVector,
    lambda: C64,
    k_max: usize,
) -> Result<Vec<f64>> {
    let mut walker = OrbitWalker::new(op, z)?;
    let mut prev = walker.current();
    let mut out = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        walker.step();
        let cur = walker.current();
        out.push(op.distance(&cur, &prev.scale(lambda)?));
        prev = cur;
    }
    Ok(out)
}

/// Finite-dimensional stand-in for a Weyl sequence of `T` at `λ`: kernel
/// vectors of `S = T − λ` when `S` is singular, otherwise the smallest
/// singular direction if its singular value is at most `threshold`.
pub fn weyl_sequence_dense(
    op: &OperatorSpec,
    lambda: C64,
    threshold: f64,
) -> Result<WeylSequenceReport> {
    let t = op.matrix().ok_or(Error::NotFiniteDimensional)?;
    let field = op.field();
    if field == ScalarField::Real && lambda.im != 0.0 {
        return Err(Error::invariant(
            "field",
            "complex lambda for a real operator; complexify first",
        ));
    }
    let d = t.nrows();
    let s = &t - linalg::identity(d) * lambda;
    // Right singular vectors, sorted by singular value (ascending).
    let (sv, dirs): (Vec<f64>, CMatrix) = if linalg::is_real(&s) {
        let svd = s.map(|c| c.re).svd(false, true);
        let vt = svd.v_t.expect("requested V^T");
        (
            svd.singular_values.iter().copied().collect(),
            linalg::from_real(&vt.transpose()),
        )
    } else {
        let svd = s.clone().svd(false, true);
        let vt = svd.v_t.expect("requested V^*");
        (svd.singular_values.iter().copied().collect(), vt.adjoint())
    };
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].partial_cmp(&sv[b]).unwrap());
    let top = sv.iter().copied().fold(0.0, f64::max);
    let kernel: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&i| sv[i] <= KERNEL_RANK_TOL * top)
        .collect();

    let (picked, branch) = if !kernel.is_empty() {
        (kernel, WeylBranch::Kernel)
    } else if sv[order[0]] <= threshold {
        (vec![order[0]], WeylBranch::SmallestSingular)
    } else {
        return Err(Error::NoApproximateKernel {
            min_singular: sv[order[0]],
            threshold,
        });
    };

    let mut vectors = Vec::with_capacity(picked.len());
    let mut residuals = Vec::with_capacity(picked.len());
    for i in picked {
        let z = SparseVector::from_dense(field, &dirs.column(i).into_owned(), 0);
        let z = z.scale_real(1.0 / op.vector_norm(&z));
        residuals.push(weyl_residual(op, &z, lambda)?);
        vectors.push(z);
    }
    Ok(WeylSequenceReport {
        lambda,
        separation: min_separation(&vectors),
        vectors,
        residuals,
        finite_dimensional: true,
        branch,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Falsification {
    /// The orbit of `probe` stays farther than the mesh from every center
    /// over `[N/2, N]`, so `K` does not occasionally attract it at this
    /// horizon.
    Witness {
        probe_index: usize,
        probe: SparseVector,
        min_tail_distance: f64,
        /// `min_tail_distance − mesh`: lower bound on the distance to the
        /// covered set along the tail.
        lower_bound: f64,
        at: usize,
    },
    /// No probe escaped; inconclusive at this horizon.
    NetSurvives { largest_min_tail_distance: f64 },
}

impl Falsification {
    pub fn is_witness(&self) -> bool {
        matches!(self, Falsification::Witness { .. })
    }

    pub fn to_value(&self) -> Value {
        match self {
            Falsification::Witness {
                probe_index,
                probe,
                min_tail_distance,
                lower_bound,
                at,
            } => json!({
                "outcome": "witness",
                "probe_index": probe_index,
                "probe": vector_to_value(probe),
                "min_tail_distance": min_tail_distance,
                "lower_bound": lower_bound,
                "at": at,
            }),
            Falsification::NetSurvives {
                largest_min_tail_distance,
            } => json!({
                "outcome": "net_survives",
                "largest_min_tail_distance": largest_min_tail_distance,
            }),
        }
    }
}

/// Searches the probes for one whose orbit avoids `K` on the tail window.
pub fn theorem1_falsify(
    op: &OperatorSpec,
    net: &CompactNet,
    probes: &[SparseVector],
    horizon: usize,
) -> Result<Falsification> {
    if !op.is_exact_isometry() {
        return Err(Error::NotIsometry);
    }
    if probes.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if net.field() != op.field() {
        return Err(Error::FieldMismatch {
            expected: op.field(),
            found: net.field(),
        });
    }
    let mut largest: f64 = 0.0;
    for (i, x) in probes.iter().enumerate() {
        let (at, d) = tail_distances(op, net, x, horizon / 2, horizon)?
            .into_iter()
            .fold(
                (0, f64::INFINITY),
                |acc, (n, d)| if d < acc.1 { (n, d) } else { acc },
            );
        if d > net.mesh() + WITNESS_MARGIN {
            return Ok(Falsification::Witness {
                probe_index: i,
                probe: x.clone(),
                min_tail_distance: d,
                lower_bound: d - net.mesh(),
                at,
            });
        }
        largest = largest.max(d);
    }
    Ok(Falsification::NetSurvives {
        largest_min_tail_distance: largest,
    })
}

/// `T − λ` as a real matrix when both are real; used by tests and callers
/// that need the raw operator.
pub fn shifted_matrix(op: &OperatorSpec, lambda: C64) -> Result<CMatrix> {
    let t = op.matrix().ok_or(Error::NotFiniteDimensional)?;
    let d = t.nrows();
    Ok(t - DMatrix::<C64>::identity(d, d) * lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::BaseNorm;

    fn sqrt2() -> f64 {
        2f64.sqrt()
    }

    #[test]
    fn forward_window_of_four() {
        let one = C64::new(1.0, 0.0);
        let z = weyl_vector(one, 1, 4).unwrap();
        assert_eq!(z, SparseVector::from_real((1..=4).map(|k| (k, 0.5))));
        let s = OperatorSpec::unit_shift(ShiftDirection::Forward);
        let r = weyl_residual(&s, &z, one).unwrap();
        assert_eq!(r, sqrt2() / 2.0);
    }

    #[test]
    fn residual_law_for_rotated_lambda() {
        let lambda = C64::from_polar(1.0, 0.7);
        let rep = weyl_sequence_shift(ShiftDirection::Bilateral, lambda, 40).unwrap();
        for (n, r) in rep.residuals.iter().enumerate() {
            let n = (n + 1) as f64;
            assert!((r * n.sqrt() - sqrt2()).abs() < 1e-13, "n = {n}: {r}");
        }
        assert!((rep.separation.unwrap() - sqrt2()).abs() < 1e-14);
        assert!(rep.residuals.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn windows_are_disjoint() {
        let rep = weyl_sequence_shift(ShiftDirection::Forward, C64::new(1.0, 0.0), 30).unwrap();
        for w in rep.vectors.windows(2) {
            assert!(w[0].max_index().unwrap() < w[1].min_index().unwrap());
        }
    }

    #[test]
    fn non_unimodular_rejected() {
        assert!(matches!(
            weyl_sequence_shift(ShiftDirection::Forward, C64::new(1.1, 0.0), 3),
            Err(Error::NotUnimodular(_))
        ));
        assert!(weyl_sequence_shift(ShiftDirection::Backward, C64::new(1.0, 0.0), 3).is_err());
    }

    #[test]
    fn identity_sequence() {
        let rep = weyl_sequence_identity(5);
        assert_eq!(rep.residuals, vec![0.0; 5]);
        assert_eq!(rep.separation, Some(sqrt2()));
    }

    #[test]
    fn residual_invariance_on_shift() {
        let lambda = C64::from_polar(1.0, 2.1);
        let s = complexify(&OperatorSpec::unit_shift(ShiftDirection::Bilateral)).unwrap();
        let z = weyl_vector(lambda, 9, 3).unwrap();
        let prof = isometric_residual_profile(&s, &z, lambda, 20).unwrap();
        let r = weyl_residual(&s, &z, lambda).unwrap();
        assert!(prof.iter().all(|&p| p == r));
    }

    #[test]
    fn dense_kernel_branch() {
        let t = OperatorSpec::diag_real(&[1.0, 0.5]);
        let rep = weyl_sequence_dense(&t, C64::new(1.0, 0.0), 0.1).unwrap();
        assert_eq!(rep.branch, WeylBranch::Kernel);
        assert_eq!(rep.residuals, vec![0.0]);
        assert_eq!(rep.vectors[0].norm(BaseNorm::L2), 1.0);
        assert_eq!(rep.vectors[0].get(0).norm(), 1.0);
    }

    #[test]
    fn dense_truncated_shift() {
        let d = 200;
        let mut m = DMatrix::<f64>::zeros(d, d);
        for i in 1..d {
            m[(i, i - 1)] = 1.0;
        }
        let t = OperatorSpec::dense(ScalarField::Real, linalg::from_real(&m)).unwrap();
        let rep = weyl_sequence_dense(&t, C64::new(1.0, 0.0), 0.2).unwrap();
        assert_eq!(rep.branch, WeylBranch::SmallestSingular);
        // Singular-value oracle: σ_min of T − I.
        let smin = linalg::singular_values(&shifted_matrix(&t, C64::new(1.0, 0.0)).unwrap())
            .last()
            .copied()
            .unwrap();
        assert!((rep.residuals[0] - smin).abs() < 1e-12);
        assert!(rep.finite_dimensional);
    }

    #[test]
    fn dense_no_kernel() {
        let t = OperatorSpec::diag_real(&[3.0, 3.0]);
        match weyl_sequence_dense(&t, C64::new(1.0, 0.0), 0.5) {
            Err(Error::NoApproximateKernel { min_singular, .. }) => {
                assert!((min_singular - 2.0).abs() < 1e-14)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn falsify_origin_net() {
        let s = OperatorSpec::unit_shift(ShiftDirection::Bilateral);
        let net = CompactNet::new(vec![SparseVector::zeros(ScalarField::Real)], 0.1).unwrap();
        let out =
            theorem1_falsify(&s, &net, &[SparseVector::basis(ScalarField::Real, 0)], 100).unwrap();
        match out {
            Falsification::Witness {
                min_tail_distance,
                lower_bound,
                ..
            } => {
                assert_eq!(min_tail_distance, 1.0);
                assert_eq!(lower_bound, 0.9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn falsify_five_centers() {
        let s = OperatorSpec::unit_shift(ShiftDirection::Bilateral);
        let centers = vec![
            SparseVector::from_real([(0, 0.5), (3, 0.5)]),
            SparseVector::from_real([(10, 1.0)]),
            SparseVector::from_real([(-4, 0.2), (7, -0.9)]),
            SparseVector::basis(ScalarField::Real, 25),
            SparseVector::from_real([(1, 0.3), (2, 0.3), (3, 0.3)]),
        ];
        let net = CompactNet::new(centers, 0.3).unwrap();
        let out =
            theorem1_falsify(&s, &net, &[SparseVector::basis(ScalarField::Real, 0)], 200).unwrap();
        let Falsification::Witness {
            min_tail_distance, ..
        } = out
        else {
            panic!("net survived")
        };
        // Beyond every center support the distance is sqrt(1 + ‖c‖²) >= 1.
        assert!(min_tail_distance >= 1.0);
    }

    #[test]
    fn falsify_requires_isometry() {
        let t = OperatorSpec::diag_real(&[0.5]);
        let net = CompactNet::new(vec![SparseVector::zeros(ScalarField::Real)], 0.1).unwrap();
        assert!(matches!(
            theorem1_falsify(&t, &net, &[SparseVector::basis(ScalarField::Real, 0)], 10),
            Err(Error::NotIsometry)
        ));
    }
}
