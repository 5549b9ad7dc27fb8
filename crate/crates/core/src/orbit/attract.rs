use serde::Serialize;

use super::{CompactNet, NetIndex};
use crate::error::{Error, Result};
use crate::operator::{OperatorSpec, OrbitWalker, SparseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttractionVerdict {
    pub attracted: bool,
    /// Max distance to the nearest center over `[⌈3N/4⌉, N]`.
    pub tail_max_distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccasionalVerdict {
    pub occasionally_attracted: bool,
    /// Min distance to the nearest center over `[⌊N/2⌋, N]`.
    pub min_distance: f64,
    /// Power attaining `min_distance`.
    pub at: usize,
}

fn check_inputs(op: &OperatorSpec, net: &CompactNet, samples: &[SparseVector]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    if net.field() != op.field() {
        return Err(Error::FieldMismatch {
            expected: op.field(),
            found: net.field(),
        });
    }
    Ok(())
}

/// Distances `ρ(T^n x, K)` (upper end, to the nearest center) for
/// `n ∈ [from, horizon]`.
pub(crate) fn tail_distances(
    op: &OperatorSpec,
    net: &CompactNet,
    x: &SparseVector,
    from: usize,
    horizon: usize,
) -> Result<Vec<(usize, f64)>> {
    let index = NetIndex::new(op, net);
    let mut walker = OrbitWalker::new(op, x)?;
    let mut out = Vec::with_capacity(horizon + 1 - from.min(horizon));
    for n in 0..=horizon {
        if n >= from {
            out.push((n, index.nearest(&walker.current())));
        }
        if n < horizon {
            walker.step();
        }
    }
    Ok(out)
}

/// `lim ρ(T^n x, K) = 0` read as: the orbit stays within `ε + tol` of the
/// centers over the last quarter of the horizon.
pub fn attractor_check(
    op: &OperatorSpec,
    net: &CompactNet,
    samples: &[SparseVector],
    horizon: usize,
    tol: f64,
) -> Result<Vec<AttractionVerdict>> {
    check_inputs(op, net, samples)?;
    let from = (3 * horizon).div_ceil(4);
    samples
        .iter()
        .map(|x| {
            let worst = tail_distances(op, net, x, from, horizon)?
                .into_iter()
                .map(|(_, d)| d)
                .fold(0.0, f64::max);
            Ok(AttractionVerdict {
                attracted: worst <= net.mesh() + tol,
                tail_max_distance: worst,
            })
        })
        .collect()
}

/// `liminf ρ(T^n x, K) = 0` read as: some power in `[N/2, N]` comes within
/// `ε + tol` of the centers.
pub fn occasional_attractor_check(
    op: &OperatorSpec,
    net: &CompactNet,
    samples: &[SparseVector],
    horizon: usize,
    tol: f64,
) -> Result<Vec<OccasionalVerdict>> {
    check_inputs(op, net, samples)?;
    samples
        .iter()
        .map(|x| {
            let (at, best) = tail_distances(op, net, x, horizon / 2, horizon)?
                .into_iter()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (n, d)| if d < acc.1 { (n, d) } else { acc },
                );
            Ok(OccasionalVerdict {
                occasionally_attracted: best <= net.mesh() + tol,
                min_distance: best,
                at,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{BaseNorm, ScalarField, ShiftDirection};
    use crate::sampling;

    fn e(i: i64) -> SparseVector {
        SparseVector::basis(ScalarField::Real, i)
    }

    fn origin(mesh: f64) -> CompactNet {
        CompactNet::new(vec![SparseVector::zeros(ScalarField::Real)], mesh).unwrap()
    }

    #[test]
    fn contraction_attracts_to_origin() {
        let t = OperatorSpec::diag_real(&[0.5, 0.5]);
        let samples = sampling::default_unit_samples(&t, sampling::DEFAULT_SEED);
        let v = attractor_check(&t, &origin(0.01), &samples, 100, 1e-6).unwrap();
        assert!(v.iter().all(|v| v.attracted));
    }

    #[test]
    fn stochastic_matrix_attracts_to_stationary_line() {
        let m = crate::linalg::from_real(&nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[0.5, 0.2, 0.3, 0.25, 0.6, 0.3, 0.25, 0.2, 0.4],
        ));
        let t = OperatorSpec::stochastic(m.clone()).unwrap();
        // Power-iteration oracle for the stationary vector.
        let mut pi = nalgebra::DVector::from_element(3, crate::C64::new(1.0 / 3.0, 0.0));
        for _ in 0..500 {
            pi = &m * pi;
        }
        let pi = SparseVector::from_dense(ScalarField::Real, &pi, 0);
        let pi = pi.scale_real(1.0 / pi.norm(BaseNorm::L1));
        // T^n x → (Σ x_i)·π and |Σ x_i| <= ‖x‖_1 = 1.
        let net = CompactNet::scalar_multiples(&pi, BaseNorm::L1, 200).unwrap();
        let samples = sampling::default_unit_samples(&t, sampling::DEFAULT_SEED);
        let v = attractor_check(&t, &net, &samples, 400, 1e-9).unwrap();
        assert!(v.iter().all(|v| v.attracted), "{v:?}");
    }

    #[test]
    fn forward_shift_escapes_finite_net() {
        let s = OperatorSpec::unit_shift(ShiftDirection::Forward);
        let net = CompactNet::new(vec![e(0), e(3), e(7)], 0.4).unwrap();
        let v = attractor_check(&s, &net, &[e(1)], 200, 1e-6).unwrap();
        assert!(!v[0].attracted);
        assert_eq!(v[0].tail_max_distance, 2f64.sqrt());
    }

    #[test]
    fn bilateral_shift_not_occasionally_attracted() {
        let s = OperatorSpec::unit_shift(ShiftDirection::Bilateral);
        let net = CompactNet::new(vec![e(0), e(5), e(40)], 0.45).unwrap();
        let v = occasional_attractor_check(&s, &net, &[e(0)], 2000, 1e-6).unwrap();
        assert!(!v[0].occasionally_attracted);
        assert_eq!(v[0].min_distance, 2f64.sqrt());
    }

    #[test]
    fn rotation_plus_decay_occasionally_attracted() {
        let t = OperatorSpec::direct_sum(vec![
            OperatorSpec::rotation(1.0).unwrap(),
            OperatorSpec::diag_real(&[0.5]),
        ])
        .unwrap();
        // Grid net of the unit disk of the rotation plane.
        let h = 0.02;
        let mut centers = Vec::new();
        for i in -50..=50 {
            for j in -50..=50 {
                let (x, y) = (i as f64 * h, j as f64 * h);
                if x * x + y * y <= 1.0 + 2.0 * h {
                    centers.push(SparseVector::from_real([(0, x), (1, y)]));
                }
            }
        }
        let net = CompactNet::new(centers, h).unwrap();
        let samples = sampling::default_unit_samples(&t, sampling::DEFAULT_SEED);
        let v = occasional_attractor_check(&t, &net, &samples, 200, 1e-9).unwrap();
        assert!(v.iter().all(|v| v.occasionally_attracted));
        let strong = attractor_check(&t, &net, &samples, 200, 1e-9).unwrap();
        for (s, o) in strong.iter().zip(&v) {
            assert!(!s.attracted || o.occasionally_attracted);
        }
    }

    #[test]
    fn empty_samples_rejected() {
        let t = OperatorSpec::diag_real(&[0.5]);
        assert!(matches!(
            attractor_check(&t, &origin(0.1), &[], 10, 0.0),
            Err(Error::EmptySampleSet)
        ));
        assert!(matches!(
            occasional_attractor_check(&t, &origin(0.1), &[], 10, 0.0),
            Err(Error::EmptySampleSet)
        ));
    }
}
