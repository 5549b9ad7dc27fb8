//! Matrix semigroups `T_t = exp(tG)`, the cover `K̃ = ∪_{t∈[0,1]} T_t K`
//! of a compact net, and transfer of integer-time convergence to real
//! times via `T_t = T_{⌊t⌋} T_{t−⌊t⌋}`.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::operator::{BaseNorm, OperatorKind, OperatorSpec, ScalarField, SparseVector};
use crate::orbit::CompactNet;
use crate::C64;

pub const DEFAULT_DT: f64 = 1.0 / 64.0;
/// Tolerance on real parts of generator eigenvalues.
pub const ABSCISSA_TOL: f64 = 1e-9;
const CLUSTER_RADIUS: f64 = 1e-6;
const RANK_TOL: f64 = 1e-9;
/// Grid used for the sampled bound `sup_{t <= 64} ‖T_t‖`.
const SUP_SAMPLES: usize = 512;
const SUP_TIME: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupBound {
    pub bounded: bool,
    /// Largest real part of an eigenvalue of `G`.
    pub spectral_abscissa: f64,
    /// `max ‖T_t‖` over an even grid of `[0, 64]`.
    pub sampled_sup: f64,
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupSpec {
    generator: CMatrix,
    field: ScalarField,
    norm: BaseNorm,
    bound: SemigroupBound,
}

impl SemigroupSpec {
    pub fn new(field: ScalarField, generator: CMatrix) -> Result<Self> {
        Self::from_operator(&OperatorSpec::generator(field, generator)?)
    }

    /// Accepts generator specs only.
    pub fn from_operator(op: &OperatorSpec) -> Result<Self> {
        let OperatorKind::Generator(g) = op.kind() else {
            return Err(Error::InvalidArgument(format!(
                "semigroups are built from generator specs, got {}",
                op
            )));
        };
        let mut s = SemigroupSpec {
            generator: g.clone(),
            field: op.field(),
            norm: op.base_norm(),
            bound: SemigroupBound {
                bounded: false,
                spectral_abscissa: f64::NAN,
                sampled_sup: f64::NAN,
                witness: None,
            },
        };
        s.bound = s.certify()?;
        Ok(s)
    }

    pub fn generator(&self) -> &CMatrix {
        &self.generator
    }

    pub fn field(&self) -> ScalarField {
        self.field
    }

    pub fn dim(&self) -> usize {
        self.generator.nrows()
    }

    pub fn bound(&self) -> &SemigroupBound {
        &self.bound
    }

    pub fn generator_norm(&self) -> f64 {
        linalg::operator_norm(&self.generator, self.norm)
    }

    fn exp_unchecked(&self, t: f64) -> CMatrix {
        let e = (&self.generator * C64::new(t, 0.0)).exp();
        match self.field {
            ScalarField::Real => e.map(|c| C64::new(c.re, 0.0)),
            ScalarField::Complex => e,
        }
    }

    /// Eigenvalue criterion on `G` plus the sampled supremum.
    fn certify(&self) -> Result<SemigroupBound> {
        let d = self.dim();
        let eig = linalg::eigenvalues(&self.generator)?;
        let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let mut witness = None;
        if abscissa > ABSCISSA_TOL {
            witness = Some(format!(
                "generator eigenvalue with real part {abscissa:e} > 0"
            ));
        } else {
            let scale = linalg::spectral_norm(&self.generator).max(1.0);
            let axis: Vec<C64> = eig
                .iter()
                .copied()
                .filter(|z| z.re.abs() <= ABSCISSA_TOL)
                .collect();
            let mut used = vec![false; axis.len()];
            for i in 0..axis.len() {
                if used[i] {
                    continue;
                }
                let members: Vec<usize> = (i..axis.len())
                    .filter(|&j| !used[j] && (axis[j] - axis[i]).norm() <= CLUSTER_RADIUS)
                    .collect();
                for &j in &members {
                    used[j] = true;
                }
                let mu: C64 = members.iter().map(|&j| axis[j]).sum::<C64>() / members.len() as f64;
                let shifted = &self.generator - linalg::identity(d) * mu;
                let geometric = d - linalg::rank(&shifted, RANK_TOL * scale);
                if geometric < members.len() {
                    witness = Some(format!(
                        "Jordan chain at imaginary-axis eigenvalue {}{:+}i (algebraic {}, geometric {geometric})",
                        mu.re,
                        mu.im,
                        members.len()
                    ));
                    break;
                }
            }
        }
        let step = SUP_TIME / SUP_SAMPLES as f64;
        let sampled_sup = (0..=SUP_SAMPLES)
            .map(|j| linalg::operator_norm(&self.exp_unchecked(j as f64 * step), self.norm))
            .fold(0.0, f64::max);
        Ok(SemigroupBound {
            bounded: witness.is_none(),
            spectral_abscissa: abscissa,
            sampled_sup,
            witness,
        })
    }

    fn require_bounded(&self) -> Result<()> {
        if self.bound.bounded {
            Ok(())
        } else {
            Err(Error::UnboundedSemigroup(
                self.bound
                    .witness
                    .clone()
                    .unwrap_or_else(|| "unbounded".into()),
            ))
        }
    }

    /// Upper bound on `sup_{0 <= t <= t_max} ‖T_t‖`: grid values with step
    /// `h` inflated by `e^{h‖G‖}`, since `‖T_{s+δ}‖ <= ‖T_s‖ e^{δ‖G‖}`.
    pub fn sup_norm_on(&self, t_max: f64, h: f64) -> f64 {
        let steps = (t_max / h).ceil().max(1.0) as usize;
        let h = t_max / steps as f64;
        let grid = (0..=steps)
            .map(|j| linalg::operator_norm(&self.exp_unchecked(j as f64 * h), self.norm))
            .fold(0.0, f64::max);
        grid * (h * self.generator_norm()).exp()
    }
}

/// `exp(tG)`.
pub fn semigroup_at(s: &SemigroupSpec, t: f64) -> Result<CMatrix> {
    if t.is_nan() || t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    Ok(s.exp_unchecked(t))
}

/// `T_t` at a list of times.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupSample {
    pub times: Vec<f64>,
    pub operators: Vec<CMatrix>,
}

impl SemigroupSample {
    pub fn new(s: &SemigroupSpec, times: &[f64]) -> Result<Self> {
        let operators = times
            .iter()
            .map(|&t| semigroup_at(s, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(SemigroupSample {
            times: times.to_vec(),
            operators,
        })
    }

    /// `max ‖T_{s+t} − T_s T_t‖ / max(1, ‖T_{s+t}‖)` over all grid pairs.
    pub fn law_defect(&self, s: &SemigroupSpec) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (i, a) in self.operators.iter().enumerate() {
            for (j, b) in self.operators.iter().enumerate().skip(i) {
                let sum = semigroup_at(s, self.times[i] + self.times[j])?;
                let scale = linalg::spectral_norm(&sum).max(1.0);
                worst = worst.max(linalg::spectral_norm(&(&sum - a * b)) / scale);
            }
        }
        Ok(worst)
    }
}

fn apply_matrix(m: &CMatrix, x: &SparseVector, field: ScalarField) -> Result<SparseVector> {
    let v = x.to_dense(0, m.nrows())?;
    Ok(SparseVector::from_dense(field, &(m * v), 0))
}

/// Net covering `K̃ = ∪_{t∈[0,1]} T_t K`: centers `T_{j·dt} c`,
/// `j = 0..=⌈1/dt⌉`, mesh `ε M + dt ‖G‖ M max‖c‖` with
/// `M >= sup_{t <= ⌈1/dt⌉dt} ‖T_t‖`.
pub fn tilde_net(s: &SemigroupSpec, k: &CompactNet, dt: f64) -> Result<CompactNet> {
    s.require_bounded()?;
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "dt must lie in (0, 1], got {dt}"
        )));
    }
    if k.field() != s.field {
        return Err(Error::FieldMismatch {
            expected: s.field,
            found: k.field(),
        });
    }
    let steps = (1.0 / dt).ceil() as usize;
    // A grid 16 times finer than dt keeps the e^{h‖G‖} inflation small.
    let m = s.sup_norm_on(steps as f64 * dt, dt / 16.0);
    let max_c = k
        .centers()
        .iter()
        .map(|c| c.norm(s.norm))
        .fold(0.0, f64::max);
    let mut centers = Vec::with_capacity(k.centers().len() * (steps + 1));
    for j in 0..=steps {
        let tj = semigroup_at(s, j as f64 * dt)?;
        for c in k.centers() {
            centers.push(apply_matrix(&tj, c, s.field)?);
        }
    }
    let mesh = k.mesh() * m + dt * s.generator_norm() * m * max_c;
    CompactNet::new(centers, mesh)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimedDistance {
    pub t: f64,
    pub beta: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousVerdict {
    pub converges: bool,
    pub max_tail_distance: f64,
    pub distances: Vec<TimedDistance>,
    /// Representatives `β` of the fractional-part bins that occurred.
    pub betas: Vec<f64>,
    /// Largest distance of `T_t q` to `span(L)` over the checked times and
    /// orthonormal basis vectors `q`.
    pub invariance_defect: f64,
}

impl ContinuousVerdict {
    pub fn to_value(&self) -> Value {
        json!(self)
    }
}

/// Orthonormal basis of the span of the given vectors, as matrix columns.
fn span_basis(vectors: &[SparseVector], d: usize) -> Result<CMatrix> {
    let mut m = CMatrix::zeros(d, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        m.set_column(j, &v.to_dense(0, d)?);
    }
    let top = linalg::singular_values(&m).first().copied().unwrap_or(0.0);
    Ok(linalg::column_space(
        &m,
        RANK_TOL * top.max(f64::MIN_POSITIVE),
    ))
}

/// Distance from `y` to the column span of the orthonormal `q`, measured as
/// the norm of the orthogonal residual.
fn distance_to_span(
    q: &CMatrix,
    y: &nalgebra::DVector<C64>,
    field: ScalarField,
    norm: BaseNorm,
) -> f64 {
    let r = y - q * (q.adjoint() * y);
    SparseVector::from_dense(field, &r, 0).norm(norm)
}

/// Checks `dist(T_t x, span L) <= tol` at the given real times, evaluating
/// `T_t` as `T_1^{⌊t⌋} T_{t−⌊t⌋}`. Fractional parts are binned with width
/// [`DEFAULT_DT`]; invariance of `span L` is checked at `t = 1` and at each
/// bin representative.
pub fn continuous_attraction_check(
    s: &SemigroupSpec,
    l_basis: &[SparseVector],
    x: &SparseVector,
    times: &[f64],
    tol: f64,
) -> Result<ContinuousVerdict> {
    if let Some(&t) = times
        .iter()
        .find(|t| t.is_nan() || **t < 0.0 || !t.is_finite())
    {
        return Err(Error::NegativeTime(t));
    }
    if x.field() != s.field {
        return Err(Error::FieldMismatch {
            expected: s.field,
            found: x.field(),
        });
    }
    let d = s.dim();
    let q = span_basis(l_basis, d)?;

    let bins: BTreeMap<i64, f64> = times
        .iter()
        .map(|t| {
            let b = ((t - t.floor()) / DEFAULT_DT).floor() as i64;
            (b, (b as f64 + 0.5) * DEFAULT_DT)
        })
        .collect();
    let betas: Vec<f64> = bins.values().copied().collect();

    let mut defect: f64 = 0.0;
    for &t in std::iter::once(&1.0).chain(betas.iter()) {
        let tq = semigroup_at(s, t)? * &q;
        for j in 0..tq.ncols() {
            let dist = distance_to_span(&q, &tq.column(j).into_owned(), s.field, s.norm);
            defect = defect.max(dist);
            if dist > tol {
                return Err(Error::LNotInvariant {
                    distance: dist,
                    time: t,
                });
            }
        }
    }

    let t1 = semigroup_at(s, 1.0)?;
    let xv = x.to_dense(0, d)?;
    let mut distances = Vec::with_capacity(times.len());
    for &t in times {
        let whole = t.floor();
        let beta = t - whole;
        let mut y = semigroup_at(s, beta)? * &xv;
        y = matrix_power(&t1, whole as u64) * y;
        distances.push(TimedDistance {
            t,
            beta,
            distance: distance_to_span(&q, &y, s.field, s.norm),
        });
    }
    let max_tail_distance = distances.iter().map(|d| d.distance).fold(0.0, f64::max);
    Ok(ContinuousVerdict {
        converges: max_tail_distance <= tol,
        max_tail_distance,
        distances,
        betas,
        invariance_defect: defect,
    })
}

fn matrix_power(m: &CMatrix, mut n: u64) -> CMatrix {
    let mut acc = linalg::identity(m.nrows());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            acc = &acc * &base;
        }
        base = &base * &base;
        n >>= 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn real_gen(d: usize, rows: &[f64]) -> SemigroupSpec {
        SemigroupSpec::new(
            ScalarField::Real,
            linalg::from_real(&DMatrix::from_row_slice(d, d, rows)),
        )
        .unwrap()
    }

    fn rotation_gen(omega: f64) -> SemigroupSpec {
        real_gen(2, &[0.0, -omega, omega, 0.0])
    }

    fn rot_plus_decay() -> SemigroupSpec {
        real_gen(3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0])
    }

    fn close(a: &CMatrix, b: &CMatrix, tol: f64) -> bool {
        linalg::frobenius(&(a - b)) <= tol
    }

    #[test]
    fn zero_generator_gives_identity() {
        let s = real_gen(2, &[0.0; 4]);
        assert_eq!(semigroup_at(&s, 3.7).unwrap(), linalg::identity(2));
        assert!(s.bound().bounded);
    }

    #[test]
    fn rotation_exponential_matches_closed_form() {
        let s = rotation_gen(1.3);
        for t in [0.0f64, 0.5, 2.0, 10.0, 38.0] {
            let (c, si) = ((1.3 * t).cos(), (1.3 * t).sin());
            let want = linalg::from_real(&DMatrix::from_row_slice(2, 2, &[c, -si, si, c]));
            assert!(
                close(&semigroup_at(&s, t).unwrap(), &want, 1e-12),
                "t = {t}"
            );
        }
    }

    #[test]
    fn decay_exponential() {
        let s = real_gen(1, &[-1.0]);
        let e = semigroup_at(&s, 1.0).unwrap();
        assert!((e[(0, 0)].re - (-1f64).exp()).abs() < 1e-15);
        assert!(matches!(
            semigroup_at(&s, -0.1),
            Err(Error::NegativeTime(_))
        ));
    }

    #[test]
    fn boundedness_criterion() {
        assert!(rotation_gen(2.0).bound().bounded);
        assert!(!real_gen(1, &[0.1]).bound().bounded);
        // Nilpotent generator: T_t = I + tN grows linearly.
        let j = real_gen(2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(!j.bound().bounded);
        assert!(j.bound().witness.as_ref().unwrap().contains("Jordan"));
    }

    #[test]
    fn semigroup_law_on_grid() {
        let s = rot_plus_decay();
        let sample = SemigroupSample::new(&s, &[0.0, 0.3, 1.0, 2.75, 7.5]).unwrap();
        assert!(sample.law_defect(&s).unwrap() <= 1e-9);
    }

    #[test]
    fn tilde_net_of_zero_generator_is_k() {
        let s = real_gen(2, &[0.0; 4]);
        let k = CompactNet::new(vec![SparseVector::basis(ScalarField::Real, 0)], 0.05).unwrap();
        let net = tilde_net(&s, &k, 0.25).unwrap();
        assert_eq!(net.mesh(), 0.05);
        assert!(net.centers().iter().all(|c| *c == k.centers()[0]));
    }

    #[test]
    fn tilde_net_covers_circle() {
        let omega = std::f64::consts::TAU;
        let s = rotation_gen(omega);
        let k = CompactNet::new(vec![SparseVector::basis(ScalarField::Real, 0)], 0.0).unwrap();
        let dt = 1.0 / 32.0;
        let net = tilde_net(&s, &k, dt).unwrap();
        assert_eq!(net.centers().len(), 33);
        // Grid sup is 1; the rigorous inflation adds e^{ω dt/16} − 1 ≈ 1.2%.
        assert!(net.mesh() >= omega * dt && net.mesh() <= 1.02 * omega * dt);
        // Resampling oracle at dt/10.
        for j in 0..=320 {
            let t = j as f64 * dt / 10.0;
            let p = SparseVector::from_real([(0, (omega * t).cos()), (1, (omega * t).sin())]);
            let d = crate::orbit::point_set_distance(&p, &net, BaseNorm::L2);
            assert!(d.upper <= net.mesh(), "t = {t}");
        }
    }

    #[test]
    fn tilde_net_covers_decay_curve() {
        let s = real_gen(1, &[-1.0]);
        let k = CompactNet::new(vec![SparseVector::basis(ScalarField::Real, 0)], 0.01).unwrap();
        let net = tilde_net(&s, &k, DEFAULT_DT).unwrap();
        for j in 0..=640 {
            let t = j as f64 / 640.0;
            // Points of K̃: T_t y for y in the ball around e_1, take extremes.
            for y in [0.99, 1.0, 1.01] {
                let p = SparseVector::from_real([(0, (-t).exp() * y)]);
                let d = crate::orbit::point_set_distance(&p, &net, BaseNorm::L2);
                assert!(d.upper <= net.mesh() + 1e-15);
            }
        }
    }

    #[test]
    fn unbounded_semigroup_has_no_tilde_net() {
        let s = real_gen(1, &[0.5]);
        let k = CompactNet::new(vec![SparseVector::basis(ScalarField::Real, 0)], 0.1).unwrap();
        assert!(matches!(
            tilde_net(&s, &k, 0.1),
            Err(Error::UnboundedSemigroup(_))
        ));
    }

    #[test]
    fn continuous_convergence_to_rotation_plane() {
        let s = rot_plus_decay();
        let l = vec![
            SparseVector::basis(ScalarField::Real, 0),
            SparseVector::basis(ScalarField::Real, 1),
        ];
        let x = SparseVector::from_real([(0, 0.3), (1, -0.5), (2, 0.8)]);
        let v = continuous_attraction_check(&s, &l, &x, &[10.3, 27.7, 99.5], 1e-4).unwrap();
        assert!(v.converges);
        // Oracle: the third coordinate is 0.8 e^{−t}.
        for td in &v.distances {
            assert!(
                (td.distance - 0.8 * (-td.t).exp()).abs() <= 1e-12 * 0.8 * (-td.t).exp() + 1e-300
            );
            assert!(td.distance <= (-10f64).exp());
        }
        assert_eq!(v.betas.len(), 3);
    }

    #[test]
    fn zero_generator_whole_space() {
        let s = real_gen(2, &[0.0; 4]);
        let l = vec![
            SparseVector::basis(ScalarField::Real, 0),
            SparseVector::basis(ScalarField::Real, 1),
        ];
        let x = SparseVector::from_real([(0, 0.6), (1, 0.8)]);
        let v = continuous_attraction_check(&s, &l, &x, &[1.5, 4.0], 1e-12).unwrap();
        assert!(v.converges);
        assert_eq!(v.max_tail_distance, 0.0);
    }

    #[test]
    fn wrong_plane_rejected() {
        let s = rot_plus_decay();
        let l = vec![
            SparseVector::basis(ScalarField::Real, 0),
            SparseVector::basis(ScalarField::Real, 2),
        ];
        let x = SparseVector::basis(ScalarField::Real, 0);
        assert!(matches!(
            continuous_attraction_check(&s, &l, &x, &[5.0], 1e-6),
            Err(Error::LNotInvariant { .. })
        ));
    }

    #[test]
    fn generator_only() {
        assert!(SemigroupSpec::from_operator(&OperatorSpec::diag_real(&[1.0])).is_err());
    }
}
