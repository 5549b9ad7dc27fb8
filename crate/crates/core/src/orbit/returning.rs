use std::collections::{BTreeMap, HashMap};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operator::{
    power_bounded_check, vector_to_value, NormTag, OperatorSpec, OrbitWalker, ScalarField,
    SparseVector,
};
use crate::sampling;
use crate::C64;

/// Witnesses required before a vector is declared returning.
pub const MIN_WITNESSES: usize = 3;
/// Iterates used to span the orbit in [`lemma1_isometry_check`].
const SPAN_ITERATES: usize = 64;
const SPAN_SAMPLES: usize = 16;
const POWER_CHECK_HORIZON: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct ReturningCertificate {
    pub vector: SparseVector,
    /// Strictly increasing powers `m_k`.
    pub indices: Vec<usize>,
    /// `‖T^{m_k} a − a‖` in the active norm.
    pub residuals: Vec<f64>,
    pub tolerance: f64,
}

impl ReturningCertificate {
    pub fn to_value(&self) -> Value {
        json!({
            "vector": vector_to_value(&self.vector),
            "indices": self.indices,
            "residuals": self.residuals,
            "tolerance": self.tolerance,
        })
    }

    /// Recomputes every residual from scratch and checks it against the
    /// stored tolerance.
    pub fn revalidate(&self, op: &OperatorSpec) -> Result<bool> {
        let fresh = residuals_at(op, &self.vector, &self.indices)?;
        Ok(fresh.iter().all(|r| *r <= self.tolerance))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Returning {
    Certified(ReturningCertificate),
    /// `min_{1 <= n <= horizon} ‖T^n a − a‖` and the power attaining it.
    NotReturning {
        min_residual: f64,
        at: usize,
    },
}

impl Returning {
    pub fn certificate(&self) -> Option<&ReturningCertificate> {
        match self {
            Returning::Certified(c) => Some(c),
            Returning::NotReturning { .. } => None,
        }
    }

    pub fn to_value(&self) -> Value {
        match self {
            Returning::Certified(c) => json!({"returning": true, "certificate": c.to_value()}),
            Returning::NotReturning { min_residual, at } => {
                json!({"returning": false, "min_residual": min_residual, "at": at})
            }
        }
    }
}

pub(crate) fn ensure_power_bounded(op: &OperatorSpec) -> Result<()> {
    if matches!(op.norm_tag(), NormTag::Rescaled { .. }) {
        return Ok(());
    }
    let cert = power_bounded_check(op, POWER_CHECK_HORIZON);
    if cert.bounded {
        Ok(())
    } else {
        Err(Error::NotPowerBounded(cert.describe()))
    }
}

pub(crate) fn ensure_contraction(op: &OperatorSpec) -> Result<()> {
    let norm = op.active_operator_norm();
    if norm > 1.0 + 1e-12 {
        return Err(Error::NotContraction { norm });
    }
    Ok(())
}

/// `‖T^n a − a‖` at the requested (sorted, distinct) powers, computed along a
/// single walk.
fn residuals_at(op: &OperatorSpec, a: &SparseVector, indices: &[usize]) -> Result<Vec<f64>> {
    let mut walker = OrbitWalker::new(op, a)?;
    let mut out = Vec::with_capacity(indices.len());
    for &n in indices {
        while walker.power() < n {
            walker.step();
        }
        out.push(op.distance(&walker.current(), a));
    }
    Ok(out)
}

/// Collects every power `1 <= n <= horizon` with `‖T^n a − a‖ <= tol`.
pub fn is_returning(
    op: &OperatorSpec,
    a: &SparseVector,
    tol: f64,
    horizon: usize,
) -> Result<Returning> {
    ensure_power_bounded(op)?;
    let mut walker = OrbitWalker::new(op, a)?;
    let mut indices = Vec::new();
    let mut residuals = Vec::new();
    let mut best = (f64::INFINITY, 0);
    for n in 1..=horizon {
        walker.step();
        let r = op.distance(&walker.current(), a);
        if r < best.0 {
            best = (r, n);
        }
        if r <= tol {
            indices.push(n);
            residuals.push(r);
        }
    }
    if indices.len() >= MIN_WITNESSES {
        Ok(Returning::Certified(ReturningCertificate {
            vector: a.clone(),
            indices,
            residuals,
            tolerance: tol,
        }))
    } else {
        Ok(Returning::NotReturning {
            min_residual: best.0,
            at: best.1,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsometryVerdict {
    pub norm_constancy: bool,
    pub span_dim: usize,
    pub isometry_on_span: bool,
    /// `max_n |‖T^n a‖ − ‖a‖|` over the horizon.
    pub max_norm_deviation: f64,
    /// `max |‖Ty‖ − ‖y‖|` over the sampled unit vectors `y` of the span.
    pub max_isometry_defect: f64,
}

/// Checks that `T` restricted to the closed span of the orbit of a returning
/// vector preserves norms.
pub fn lemma1_isometry_check(
    op: &OperatorSpec,
    a: &SparseVector,
    tol: f64,
    horizon: usize,
) -> Result<IsometryVerdict> {
    ensure_contraction(op)?;
    if let Returning::NotReturning { min_residual, .. } = is_returning(op, a, tol, horizon)? {
        return Err(Error::PreconditionNotReturning { min_residual });
    }

    let a_norm = op.vector_norm(a);
    let span_len = horizon
        .min(op.dim().unwrap_or(SPAN_ITERATES))
        .clamp(1, SPAN_ITERATES);
    let mut walker = OrbitWalker::new(op, a)?;
    let mut spanning = Vec::with_capacity(span_len);
    let mut deviation: f64 = 0.0;
    for n in 0..=horizon {
        let v = walker.current();
        deviation = deviation.max((op.vector_norm(&v) - a_norm).abs());
        if n < span_len {
            spanning.push(v);
        }
        walker.step();
    }

    let span_dim = orbit_rank(&spanning);

    let mut rng = sampling::rng(sampling::DEFAULT_SEED);
    let mut defect: f64 = 0.0;
    for _ in 0..SPAN_SAMPLES {
        let coeffs = sampling::gaussian_vector(&mut rng, op.field(), spanning.len());
        let mut y = SparseVector::zeros(op.field());
        for (j, c) in coeffs.iter() {
            y = y.combine(C64::new(1.0, 0.0), &spanning[j as usize], c)?;
        }
        let n = op.vector_norm(&y);
        if n == 0.0 || !n.is_finite() {
            continue;
        }
        let y = y.scale_real(1.0 / n);
        let ty = op.apply(&y)?;
        defect = defect.max((op.vector_norm(&ty) - op.vector_norm(&y)).abs());
    }

    Ok(IsometryVerdict {
        norm_constancy: deviation <= tol,
        span_dim,
        isometry_on_span: defect <= tol,
        max_norm_deviation: deviation,
        max_isometry_defect: defect,
    })
}

/// Numerical rank of a list of sparse vectors (columns over the union of
/// their supports).
fn orbit_rank(vectors: &[SparseVector]) -> usize {
    let rows: Vec<i64> = {
        let mut s: Vec<i64> = vectors
            .iter()
            .flat_map(|v| v.iter().map(|(i, _)| i))
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    };
    if rows.is_empty() {
        return 0;
    }
    let pos: HashMap<i64, usize> = rows.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let mut m = CMatrix::zeros(rows.len(), vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        for (i, c) in v.iter() {
            m[(pos[&i], j)] = c;
        }
    }
    let s = linalg::singular_values(&m);
    let top = s.first().copied().unwrap_or(0.0);
    linalg::rank(&m, 1e-9 * top)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lemma4Outcome {
    Certified(ReturningCertificate),
    /// `‖T^n a‖ <= tol` at power `at`.
    VanishingOrbit {
        at: usize,
        norm: f64,
    },
}

impl Lemma4Outcome {
    pub fn to_value(&self) -> Value {
        match self {
            Lemma4Outcome::Certified(c) => {
                json!({"outcome": "certified", "certificate": c.to_value()})
            }
            Lemma4Outcome::VanishingOrbit { at, norm } => {
                json!({"outcome": "vanishing_orbit", "at": at, "norm": norm})
            }
        }
    }
}

/// From data `λ_k T^{n_k} a ≈ a`, either detects that the orbit of `a`
/// vanishes or certifies `a` returning at powers `m·n_k` where `λ_k^m ≈ 1`.
///
/// The scalars with residual at most `tol` are clustered on a grid of cell
/// size `tol`; the most populated cluster (counting the 3×3 neighbourhood)
/// supplies the unimodular limit `c`. Each member then gets its own
/// multiplier `m`, chosen from the unit scalar `λ_k / |λ_k|` (or from the
/// sign of `c` in the real field), and every candidate power is verified
/// directly. Candidate powers may exceed `horizon` when fewer than three
/// verified witnesses lie below it.
pub fn lemma4_recover(
    op: &OperatorSpec,
    a: &SparseVector,
    scalars: &[C64],
    indices: &[usize],
    tol: f64,
    horizon: usize,
) -> Result<Lemma4Outcome> {
    if scalars.len() != indices.len() {
        return Err(Error::DimensionMismatch {
            expected: indices.len(),
            found: scalars.len(),
        });
    }
    if scalars.is_empty() {
        return Err(Error::InvalidArgument("no scalar data supplied".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    if op.field() == ScalarField::Real && scalars.iter().any(|c| c.im != 0.0) {
        return Err(Error::invariant(
            "field",
            "complex scalar supplied for a real operator",
        ));
    }
    ensure_contraction(op)?;

    // One walk serves the hypothesis residuals and the vanishing test.
    let needed: BTreeMap<usize, ()> = indices.iter().map(|&n| (n, ())).collect();
    let last = horizon.max(*needed.keys().next_back().unwrap_or(&0));
    let mut at_power: HashMap<usize, SparseVector> = HashMap::new();
    let mut vanishing = None;
    let mut walker = OrbitWalker::new(op, a)?;
    for n in 0..=last {
        if needed.contains_key(&n) {
            at_power.insert(n, walker.current());
        }
        if vanishing.is_none() && n <= horizon {
            let norm = op.vector_norm(&walker.current());
            if norm <= tol {
                vanishing = Some((n, norm));
            }
        }
        if n < last {
            walker.step();
        }
    }

    let mut tail = Vec::new();
    let mut best = f64::INFINITY;
    for (&lambda, &n) in scalars.iter().zip(indices) {
        let r = op.distance(&at_power[&n].scale(lambda)?, a);
        best = best.min(r);
        if r <= tol {
            tail.push((lambda, n));
        }
    }
    if tail.is_empty() {
        return Err(Error::HypothesisNotSatisfied { residual: best });
    }
    if let Some((at, norm)) = vanishing {
        return Ok(Lemma4Outcome::VanishingOrbit { at, norm });
    }

    let (c, members) = largest_cluster(&tail, tol);
    if (c.norm() - 1.0).abs() > tol {
        return Err(Error::ScalarNotUnimodular { modulus: c.norm() });
    }
    let sign = if c.re >= 0.0 { 1.0 } else { -1.0 };

    // Some m <= 4π/tol has |u^m − 1| <= tol/2 for every unit u (pigeonhole
    // on the circle), so the search below always terminates with a candidate.
    let max_m = (4.0 * std::f64::consts::PI / tol).ceil() as usize;
    let mut candidates: Vec<usize> = Vec::new();
    for (lambda, n) in members {
        if n == 0 {
            continue;
        }
        let unit = match op.field() {
            ScalarField::Real => C64::new(sign, 0.0),
            ScalarField::Complex => lambda / lambda.norm(),
        };
        let mut power = unit;
        for m in 1..=max_m {
            if (power - 1.0).norm() <= 0.5 * tol {
                candidates.push(m * n);
                break;
            }
            power *= unit;
        }
    }
    candidates.sort_unstable();
    candidates.dedup();

    // Every candidate within the horizon is verified; beyond it, only as many
    // as are needed to reach the witness count.
    let mut walker = OrbitWalker::new(op, a)?;
    let mut indices = Vec::new();
    let mut residuals = Vec::new();
    for m in candidates {
        if m > horizon && indices.len() >= MIN_WITNESSES {
            break;
        }
        while walker.power() < m {
            walker.step();
        }
        let r = op.distance(&walker.current(), a);
        if r <= tol {
            indices.push(m);
            residuals.push(r);
        }
    }
    if indices.len() < MIN_WITNESSES {
        return Err(Error::InsufficientWitnesses {
            found: indices.len(),
        });
    }
    Ok(Lemma4Outcome::Certified(ReturningCertificate {
        vector: a.clone(),
        indices,
        residuals,
        tolerance: tol,
    }))
}

/// Most populated grid cluster of the scalars and the mean of its members.
fn largest_cluster(data: &[(C64, usize)], cell: f64) -> (C64, Vec<(C64, usize)>) {
    let key = |z: C64| ((z.re / cell).floor() as i64, (z.im / cell).floor() as i64);
    let mut counts: HashMap<(i64, i64), usize> = HashMap::new();
    for (z, _) in data {
        *counts.entry(key(*z)).or_default() += 1;
    }
    let near = |k: (i64, i64), q: (i64, i64)| (k.0 - q.0).abs() <= 1 && (k.1 - q.1).abs() <= 1;
    let mut cells: Vec<(i64, i64)> = counts.keys().copied().collect();
    cells.sort_unstable();
    let center = cells
        .iter()
        .copied()
        .max_by_key(|&k| {
            let total: usize = counts
                .iter()
                .filter(|(q, _)| near(k, **q))
                .map(|(_, c)| *c)
                .sum();
            // Ties go to the smallest cell, for determinism.
            (total, std::cmp::Reverse(k))
        })
        .expect("nonempty data");
    let members: Vec<(C64, usize)> = data
        .iter()
        .copied()
        .filter(|(z, _)| near(key(*z), center))
        .collect();
    let sum: C64 = members.iter().map(|(z, _)| *z).sum();
    (sum / members.len() as f64, members)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::ShiftDirection;

    fn e(i: i64) -> SparseVector {
        SparseVector::basis(ScalarField::Real, i)
    }

    fn cycle3() -> OperatorSpec {
        OperatorSpec::dense_real(3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn three_cycle_returns_every_third_step() {
        let r = is_returning(&cycle3(), &e(0), 1e-12, 9).unwrap();
        let c = r.certificate().unwrap();
        assert_eq!(c.indices, vec![3, 6, 9]);
        assert_eq!(c.residuals, vec![0.0; 3]);
    }

    #[test]
    fn decay_is_not_returning() {
        let r = is_returning(&OperatorSpec::diag_real(&[0.9]), &e(0), 1e-6, 100).unwrap();
        match r {
            Returning::NotReturning { min_residual, at } => {
                assert_eq!(at, 1);
                assert!((min_residual - 0.1).abs() < 1e-15);
            }
            _ => panic!("decaying orbit certified"),
        }
    }

    #[test]
    fn unbounded_operator_rejected() {
        let j = OperatorSpec::dense_real(2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            is_returning(&j, &e(0), 1e-3, 10),
            Err(Error::NotPowerBounded(_))
        ));
    }

    #[test]
    fn rotation_returns_near_multiples_of_period() {
        let t = OperatorSpec::rotation(1.0).unwrap();
        let c = is_returning(&t, &e(0), 1e-2, 10_000).unwrap();
        let c = c.certificate().unwrap().clone();
        // Oracle: ‖R^n e_1 − e_1‖ = 2|sin(n/2)|.
        let oracle: Vec<usize> = (1..=10_000usize)
            .filter(|&n| 2.0 * (n as f64 / 2.0).sin().abs() <= 1e-2)
            .collect();
        assert_eq!(c.indices, oracle);
        assert!(c.indices.contains(&710));
        assert!(c.revalidate(&t).unwrap());
    }

    #[test]
    fn isometry_check_examples() {
        let rot = OperatorSpec::rotation(1.0).unwrap();
        let v = lemma1_isometry_check(&rot, &e(0), 1e-2, 2000).unwrap();
        assert!(v.norm_constancy && v.isometry_on_span);
        assert_eq!(v.span_dim, 2);

        let d = OperatorSpec::diag_real(&[1.0, 0.5]);
        let v = lemma1_isometry_check(&d, &e(0), 1e-9, 50).unwrap();
        assert_eq!(v.span_dim, 1);
        assert!(v.isometry_on_span && v.norm_constancy);

        let h = OperatorSpec::diag_real(&[0.5]);
        assert!(matches!(
            lemma1_isometry_check(&h, &e(0), 1e-6, 50),
            Err(Error::PreconditionNotReturning { .. })
        ));

        let big = OperatorSpec::diag_real(&[2.0]);
        assert!(matches!(
            lemma1_isometry_check(&big, &e(0), 1e-6, 5),
            Err(Error::NotContraction { .. })
        ));
    }

    #[test]
    fn isometry_check_needs_a_returning_vector() {
        let s = OperatorSpec::unit_shift(ShiftDirection::Bilateral);
        assert!(matches!(
            lemma1_isometry_check(&s, &e(0), 1e-3, 40),
            Err(Error::PreconditionNotReturning { .. })
        ));
    }

    #[test]
    fn recover_detects_vanishing_orbit() {
        let h = OperatorSpec::diag_real(&[0.5]);
        let ks: Vec<usize> = (1..=30).collect();
        let ls: Vec<C64> = ks
            .iter()
            .map(|&k| C64::new(2f64.powi(k as i32), 0.0))
            .collect();
        match lemma4_recover(&h, &e(0), &ls, &ks, 1e-6, 100).unwrap() {
            Lemma4Outcome::VanishingOrbit { at, .. } => assert_eq!(at, 20),
            other => panic!("expected vanishing orbit, got {other:?}"),
        }
    }

    #[test]
    fn recover_complex_multiplier() {
        let theta = 1.0f64;
        let m = CMatrix::from_element(1, 1, C64::from_polar(1.0, theta));
        let t = OperatorSpec::dense(ScalarField::Complex, m).unwrap();
        let a = SparseVector::basis(ScalarField::Complex, 0);
        let ks: Vec<usize> = (1..=10_000).collect();
        let ls: Vec<C64> = ks
            .iter()
            .map(|&k| C64::from_polar(1.0, -(k as f64) * theta))
            .collect();
        let out = lemma4_recover(&t, &a, &ls, &ks, 1e-2, 10_000).unwrap();
        let Lemma4Outcome::Certified(c) = out else {
            panic!("no certificate")
        };
        assert!(c.indices.len() >= 3);
        assert!(c.indices.windows(2).all(|w| w[0] < w[1]));
        assert!(c.revalidate(&t).unwrap());
    }

    #[test]
    fn recover_matches_is_returning_on_rotation() {
        let t = OperatorSpec::rotation(1.0).unwrap();
        let direct = is_returning(&t, &e(0), 1e-2, 10_000).unwrap();
        let direct = direct.certificate().unwrap();
        let ones = vec![C64::new(1.0, 0.0); direct.indices.len()];
        let out = lemma4_recover(&t, &e(0), &ones, &direct.indices, 1e-2, 10_000).unwrap();
        assert_eq!(out, Lemma4Outcome::Certified(direct.clone()));
    }

    #[test]
    fn recover_rejects_bad_data() {
        let t = OperatorSpec::rotation(1.0).unwrap();
        let ks = [1usize, 2, 3];
        let ls = [C64::new(1.0, 0.0); 3];
        assert!(matches!(
            lemma4_recover(&t, &e(0), &ls, &ks, 1e-3, 100),
            Err(Error::HypothesisNotSatisfied { .. })
        ));

        // 2·T e_1 = e_1 exactly, and the orbit is still above tol at the horizon.
        let d = OperatorSpec::diag_real(&[0.5, 0.5]);
        let x = SparseVector::from_real([(0, 1.0)]);
        let ls = [C64::new(2.0, 0.0)];
        let out = lemma4_recover(&d, &x, &ls, &[1], 1e-6, 5);
        assert!(matches!(out, Err(Error::ScalarNotUnimodular { .. })));
    }

    #[test]
    fn recover_real_sign_flip() {
        let t = OperatorSpec::diag_real(&[-1.0, 0.5]);
        let a = e(0);
        let ks: Vec<usize> = (1..=9).step_by(2).collect();
        let ls = vec![C64::new(-1.0, 0.0); ks.len()];
        let Lemma4Outcome::Certified(c) = lemma4_recover(&t, &a, &ls, &ks, 1e-9, 20).unwrap()
        else {
            panic!()
        };
        assert_eq!(c.indices, vec![2, 6, 10, 14, 18]);
    }
}
