//! Operator representations, exact application to sparse vectors, norms and
//! complexification.

mod json;
mod power;
mod sparse;
mod walker;

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use json::{
    matrix_to_value, operator_from_json, operator_from_value, operator_to_value, vector_from_value,
    vector_to_value,
};
pub use power::{
    power_bounded_check, rescaled_norm, PowerBoundCertificate, RescaledNorm, UnboundedWitness,
};
pub use sparse::SparseVector;
pub use walker::OrbitWalker;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::C64;

/// Default horizon for the rescaled (orbit-supremum) norm.
pub const DEFAULT_RESCALE_HORIZON: usize = 1000;

/// Tolerance of the column-sum check on stochastic matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarField {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseNorm {
    L1,
    L2,
    Sup,
}

/// Norm attached to an operator. `Rescaled` is the orbit supremum
/// `sup_n ‖T^n x‖` of the base norm, evaluated up to `horizon` powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormTag {
    Base(BaseNorm),
    Rescaled { base: BaseNorm, horizon: usize },
}

impl NormTag {
    pub fn base(self) -> BaseNorm {
        match self {
            NormTag::Base(b) => b,
            NormTag::Rescaled { base, .. } => base,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftDirection {
    /// `e_k -> w_k e_{k+1}` on indices `k >= 0`.
    Forward,
    /// `e_k -> w_k e_{k-1}` on indices `k >= 0`, `e_0 -> 0`.
    Backward,
    /// `e_k -> w_k e_{k+1}` on all of `Z`.
    Bilateral,
    /// `e_k -> w_k e_{k-1}` on all of `Z`; the inverse of a bilateral shift.
    #[serde(rename = "bilateral_backward")]
    BilateralBackward,
}

impl ShiftDirection {
    pub fn is_bilateral(self) -> bool {
        matches!(
            self,
            ShiftDirection::Bilateral | ShiftDirection::BilateralBackward
        )
    }

    fn step(self) -> i64 {
        match self {
            ShiftDirection::Forward | ShiftDirection::Bilateral => 1,
            ShiftDirection::Backward | ShiftDirection::BilateralBackward => -1,
        }
    }
}

/// Weight rule of a shift: a constant, or a finite list repeated
/// periodically (`w_k = list[k mod len]`, also for negative `k`).
#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Constant(C64),
    Periodic(Vec<C64>),
}

impl Weights {
    pub fn at(&self, k: i64) -> C64 {
        match self {
            Weights::Constant(c) => *c,
            Weights::Periodic(w) => w[k.rem_euclid(w.len() as i64) as usize],
        }
    }

    pub fn period(&self) -> usize {
        match self {
            Weights::Constant(_) => 1,
            Weights::Periodic(w) => w.len(),
        }
    }

    pub fn all_unimodular(&self) -> bool {
        let unit = |c: &C64| c.norm_sqr() == 1.0;
        match self {
            Weights::Constant(c) => unit(c),
            Weights::Periodic(w) => w.iter().all(unit),
        }
    }

    fn values(&self) -> Vec<C64> {
        match self {
            Weights::Constant(c) => vec![*c],
            Weights::Periodic(w) => w.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Dense(CMatrix),
    Rotation {
        angle: f64,
    },
    Shift {
        direction: ShiftDirection,
        weights: Weights,
    },
    Stochastic(CMatrix),
    DirectSum(Vec<OperatorSpec>),
    Generator(CMatrix),
}

/// A validated bounded linear operator together with its scalar field and
/// active norm.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    field: ScalarField,
    norm: NormTag,
    kind: OperatorKind,
    /// `sup_n ‖T^n‖` estimate, set when the norm is rescaled.
    power_bound: Option<f64>,
}

impl OperatorSpec {
    fn build(field: ScalarField, norm: BaseNorm, kind: OperatorKind) -> Result<Self> {
        let op = OperatorSpec {
            field,
            norm: NormTag::Base(norm),
            kind,
            power_bound: None,
        };
        op.validate()?;
        Ok(op)
    }

    pub fn dense(field: ScalarField, entries: CMatrix) -> Result<Self> {
        Self::build(field, BaseNorm::L2, OperatorKind::Dense(entries))
    }

    pub fn dense_real(d: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != d * d {
            return Err(Error::DimensionMismatch {
                expected: d * d,
                found: row_major.len(),
            });
        }
        let m = CMatrix::from_row_iterator(d, d, row_major.iter().map(|&v| C64::new(v, 0.0)));
        Self::dense(ScalarField::Real, m)
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let d = values.len();
        let mut m = CMatrix::zeros(d, d);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Self::dense(ScalarField::Real, m).expect("finite diagonal")
    }

    pub fn identity(field: ScalarField, d: usize) -> Self {
        Self::dense(field, CMatrix::identity(d, d)).expect("identity")
    }

    pub fn rotation(angle: f64) -> Result<Self> {
        Self::build(
            ScalarField::Real,
            BaseNorm::L2,
            OperatorKind::Rotation { angle },
        )
    }

    pub fn shift(direction: ShiftDirection, weights: Weights) -> Result<Self> {
        let weights = json::normalize_weights(weights);
        let field = if weights.values().iter().all(|c| c.im == 0.0) {
            ScalarField::Real
        } else {
            ScalarField::Complex
        };
        Self::build(
            field,
            BaseNorm::L2,
            OperatorKind::Shift { direction, weights },
        )
    }

    pub fn unit_shift(direction: ShiftDirection) -> Self {
        Self::shift(direction, Weights::Constant(C64::new(1.0, 0.0))).expect("unit shift")
    }

    pub fn stochastic(entries: CMatrix) -> Result<Self> {
        Self::build(
            ScalarField::Real,
            BaseNorm::L1,
            OperatorKind::Stochastic(entries),
        )
    }

    pub fn direct_sum(parts: Vec<OperatorSpec>) -> Result<Self> {
        let field = parts.first().map(|p| p.field).unwrap_or(ScalarField::Real);
        let norm = parts.first().map(|p| p.norm.base()).unwrap_or(BaseNorm::L2);
        Self::build(field, norm, OperatorKind::DirectSum(parts))
    }

    pub fn generator(field: ScalarField, entries: CMatrix) -> Result<Self> {
        Self::build(field, BaseNorm::L2, OperatorKind::Generator(entries))
    }

    /// Replaces the base norm. Summands of a direct sum follow.
    pub fn with_norm(mut self, norm: BaseNorm) -> Self {
        self.norm = NormTag::Base(norm);
        self.power_bound = None;
        if let OperatorKind::DirectSum(parts) = &mut self.kind {
            for p in parts.iter_mut() {
                *p = p.clone().with_norm(norm);
            }
        }
        self
    }

    /// Switches to the orbit-supremum norm. Only power-bounded operators
    /// admit it.
    pub fn with_rescaled_norm(self, horizon: usize) -> Result<Self> {
        let cert = power_bounded_check(&self, horizon.max(1));
        if !cert.bounded {
            return Err(Error::NotPowerBounded(cert.describe()));
        }
        let base = self.norm.base();
        let mut op = self.with_norm(base);
        op.norm = NormTag::Rescaled { base, horizon };
        op.power_bound = Some(cert.sup_norm_estimate);
        Ok(op)
    }

    pub fn field(&self) -> ScalarField {
        self.field
    }

    pub fn norm_tag(&self) -> NormTag {
        self.norm
    }

    pub fn base_norm(&self) -> BaseNorm {
        self.norm.base()
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub(crate) fn power_bound(&self) -> Option<f64> {
        self.power_bound
    }

    fn validate(&self) -> Result<()> {
        let finite = |m: &CMatrix| m.iter().all(|c| c.re.is_finite() && c.im.is_finite());
        let square = |m: &CMatrix| -> Result<()> {
            if m.nrows() != m.ncols() || m.nrows() == 0 {
                return Err(Error::invariant(
                    "shape",
                    format!(
                        "expected a nonempty square matrix, got {}x{}",
                        m.nrows(),
                        m.ncols()
                    ),
                ));
            }
            if !finite(m) {
                return Err(Error::invariant("entries", "non-finite entry"));
            }
            Ok(())
        };
        let real_only = |m: &CMatrix| -> Result<()> {
            if self.field == ScalarField::Real && !linalg::is_real(m) {
                return Err(Error::invariant(
                    "field",
                    "complex entry in a real-field operator",
                ));
            }
            Ok(())
        };
        match &self.kind {
            OperatorKind::Dense(m) | OperatorKind::Generator(m) => {
                square(m)?;
                real_only(m)?;
            }
            OperatorKind::Stochastic(m) => {
                square(m)?;
                if !linalg::is_real(m) {
                    return Err(Error::invariant("field", "stochastic entries must be real"));
                }
                if m.iter().any(|c| c.re < 0.0) {
                    return Err(Error::invariant("stochastic", "negative entry"));
                }
                for j in 0..m.ncols() {
                    let s: f64 = m.column(j).iter().map(|c| c.re).sum();
                    if (s - 1.0).abs() > STOCHASTIC_TOL {
                        return Err(Error::invariant(
                            "stochastic",
                            format!("column {j} sums to {s}, expected 1"),
                        ));
                    }
                }
            }
            OperatorKind::Rotation { angle } => {
                if !angle.is_finite() {
                    return Err(Error::invariant("angle", "non-finite rotation angle"));
                }
                if self.field != ScalarField::Real {
                    return Err(Error::invariant(
                        "field",
                        "rotation blocks are real; use complexify",
                    ));
                }
            }
            OperatorKind::Shift { weights, .. } => {
                let values = weights.values();
                if values.is_empty() {
                    return Err(Error::invariant("weights", "empty weight list"));
                }
                if values
                    .iter()
                    .any(|c| !(c.re.is_finite() && c.im.is_finite()))
                {
                    return Err(Error::invariant("weights", "non-finite weight"));
                }
                if self.field == ScalarField::Real && values.iter().any(|c| c.im != 0.0) {
                    return Err(Error::invariant(
                        "field",
                        "complex weight in a real-field shift",
                    ));
                }
            }
            OperatorKind::DirectSum(parts) => {
                if parts.is_empty() {
                    return Err(Error::invariant("direct_sum", "no summands"));
                }
                for (i, p) in parts.iter().enumerate() {
                    if p.field != self.field {
                        return Err(Error::invariant(
                            "field",
                            format!("summand {i} has field {:?}", p.field),
                        ));
                    }
                    if matches!(p.kind, OperatorKind::Generator(_)) {
                        return Err(Error::invariant("direct_sum", "generator summand"));
                    }
                    let last = i + 1 == parts.len();
                    match p.dim() {
                        Some(_) => {}
                        None if last => {
                            if let OperatorKind::Shift { direction, .. } = p.kind {
                                if !direction.is_bilateral() {
                                    continue;
                                }
                                return Err(Error::invariant(
                                    "direct_sum",
                                    "a bilateral shift cannot follow finite blocks",
                                ));
                            }
                            if i > 0 && matches!(p.kind, OperatorKind::DirectSum(_)) {
                                return Err(Error::invariant(
                                    "direct_sum",
                                    "nested infinite direct sums are not supported",
                                ));
                            }
                        }
                        None => {
                            return Err(Error::invariant(
                                "direct_sum",
                                "only the last summand may be infinite-dimensional",
                            ))
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Dimension for finite-dimensional operators, `None` for shift models.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            OperatorKind::Dense(m) | OperatorKind::Stochastic(m) | OperatorKind::Generator(m) => {
                Some(m.nrows())
            }
            OperatorKind::Rotation { .. } => Some(2),
            OperatorKind::Shift { .. } => None,
            OperatorKind::DirectSum(parts) => parts.iter().map(|p| p.dim()).sum(),
        }
    }

    pub fn is_finite_dimensional(&self) -> bool {
        self.dim().is_some()
    }

    /// Dense matrix of a finite-dimensional operator.
    pub fn matrix(&self) -> Option<CMatrix> {
        match &self.kind {
            OperatorKind::Dense(m) | OperatorKind::Stochastic(m) | OperatorKind::Generator(m) => {
                Some(m.clone())
            }
            OperatorKind::Rotation { angle } => {
                let (s, c) = angle.sin_cos();
                Some(CMatrix::from_row_slice(
                    2,
                    2,
                    &[
                        C64::new(c, 0.0),
                        C64::new(-s, 0.0),
                        C64::new(s, 0.0),
                        C64::new(c, 0.0),
                    ],
                ))
            }
            OperatorKind::Shift { .. } => None,
            OperatorKind::DirectSum(parts) => {
                let d = self.dim()?;
                let mut m = CMatrix::zeros(d, d);
                let mut off = 0;
                for p in parts {
                    let b = p.matrix()?;
                    let k = b.nrows();
                    m.view_mut((off, off), (k, k)).copy_from(&b);
                    off += k;
                }
                Some(m)
            }
        }
    }

    /// Whether sparse vectors with a coefficient at `index` lie in the domain.
    pub fn index_in_domain(&self, index: i64) -> bool {
        match (&self.kind, self.dim()) {
            (_, Some(d)) => index >= 0 && index < d as i64,
            (OperatorKind::Shift { direction, .. }, None) => direction.is_bilateral() || index >= 0,
            (OperatorKind::DirectSum(_), None) => index >= 0,
            _ => false,
        }
    }

    fn check_vector(&self, x: &SparseVector) -> Result<()> {
        if x.field() != self.field {
            return Err(Error::FieldMismatch {
                expected: self.field,
                found: x.field(),
            });
        }
        for (i, _) in x.iter() {
            if !self.index_in_domain(i) {
                let reason = match self.dim() {
                    Some(d) => format!("operator acts on indices 0..{d}"),
                    None => "one-sided shift models use nonnegative indices".to_string(),
                };
                return Err(Error::IndexDomainViolation { index: i, reason });
            }
        }
        Ok(())
    }

    /// Exact image `T x`.
    pub fn apply(&self, x: &SparseVector) -> Result<SparseVector> {
        if matches!(self.kind, OperatorKind::Generator(_)) {
            return Err(Error::GeneratorNotIterable);
        }
        self.check_vector(x)?;
        Ok(self.apply_unchecked(x))
    }

    fn apply_unchecked(&self, x: &SparseVector) -> SparseVector {
        match &self.kind {
            OperatorKind::Shift { direction, weights } => {
                let offset = direction.step();
                let mut y = x.translate_weighted(offset, |k| weights.at(k));
                if *direction == ShiftDirection::Backward {
                    y = y.restrict(|i| i >= 0);
                }
                y
            }
            OperatorKind::DirectSum(parts) => {
                let mut out = SparseVector::zeros(self.field);
                let mut off: i64 = 0;
                for p in parts {
                    match p.dim() {
                        Some(d) => {
                            let hi = off + d as i64;
                            let piece = x.restrict(|i| i >= off && i < hi).translate(-off);
                            out.merge_disjoint(p.apply_unchecked(&piece).translate(off));
                            off = hi;
                        }
                        None => {
                            let piece = x.restrict(|i| i >= off).translate(-off);
                            out.merge_disjoint(p.apply_unchecked(&piece).translate(off));
                        }
                    }
                }
                out
            }
            _ => {
                let m = self.matrix().expect("finite operator");
                let d = m.nrows();
                let mut y = DVector::from_element(d, C64::new(0.0, 0.0));
                for (j, c) in x.iter() {
                    let j = j as usize;
                    for i in 0..d {
                        y[i] += m[(i, j)] * c;
                    }
                }
                SparseVector::from_dense(self.field, &y, 0)
            }
        }
    }

    /// `T^n x`.
    pub fn apply_power(&self, x: &SparseVector, n: usize) -> Result<SparseVector> {
        let mut w = OrbitWalker::new(self, x)?;
        for _ in 0..n {
            w.step();
        }
        Ok(w.current())
    }

    /// Induced operator norm for the base norm.
    pub fn base_operator_norm(&self) -> f64 {
        let norm = self.base_norm();
        match &self.kind {
            OperatorKind::Shift { weights, .. } => weights
                .values()
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max),
            OperatorKind::DirectSum(parts) => parts
                .iter()
                .map(|p| p.clone().with_norm(norm).base_operator_norm())
                .fold(0.0, f64::max),
            _ => linalg::operator_norm(&self.matrix().expect("finite"), norm),
        }
    }

    /// Operator norm under the active norm. The rescaled norm makes every
    /// power-bounded operator a contraction.
    pub fn active_operator_norm(&self) -> f64 {
        match self.norm {
            NormTag::Base(_) => self.base_operator_norm(),
            NormTag::Rescaled { .. } => self.base_operator_norm().min(1.0),
        }
    }

    /// Norm of `x` under the active norm of this operator.
    pub fn vector_norm(&self, x: &SparseVector) -> f64 {
        match self.norm {
            NormTag::Base(b) => x.norm(b),
            NormTag::Rescaled { horizon, .. } => match power::rescaled_norm(self, x, horizon) {
                Ok(r) => r.value,
                Err(_) => x.norm(self.base_norm()),
            },
        }
    }

    /// `‖x − y‖` under the active norm.
    pub fn distance(&self, x: &SparseVector, y: &SparseVector) -> f64 {
        match self.norm {
            NormTag::Base(b) => x.distance(y, b),
            NormTag::Rescaled { .. } => match x.try_sub(y) {
                Ok(d) => self.vector_norm(&d),
                Err(_) => f64::NAN,
            },
        }
    }

    /// Whether the operator is an isometry on sparse vectors by construction:
    /// unimodular-weight forward or bilateral shifts (any base norm),
    /// rotation blocks under L2, and direct sums of these.
    pub fn is_exact_isometry(&self) -> bool {
        match &self.kind {
            OperatorKind::Shift { direction, weights } => {
                *direction != ShiftDirection::Backward && weights.all_unimodular()
            }
            OperatorKind::Rotation { .. } => self.base_norm() == BaseNorm::L2,
            OperatorKind::DirectSum(parts) => parts.iter().all(|p| p.is_exact_isometry()),
            _ => false,
        }
    }

    /// Invertibility: rank test in finite dimensions; among shift models only
    /// bilateral shifts with nonzero weights.
    pub fn is_invertible(&self) -> bool {
        match &self.kind {
            OperatorKind::Shift { direction, weights } => {
                direction.is_bilateral() && weights.values().iter().all(|c| c.norm() > 0.0)
            }
            OperatorKind::DirectSum(parts) => parts.iter().all(|p| p.is_invertible()),
            _ => {
                let m = self.matrix().expect("finite");
                let s = linalg::singular_values(&m);
                let smax = s.first().copied().unwrap_or(0.0);
                s.last()
                    .map(|&v| v > 1e-12 * smax.max(1e-300))
                    .unwrap_or(false)
            }
        }
    }

    /// `T^{-1}` for invertible operators, in the same field and norm.
    pub fn inverse(&self) -> Result<OperatorSpec> {
        if !self.is_invertible() {
            return Err(Error::invariant("inverse", "operator is not invertible"));
        }
        let kind = match &self.kind {
            OperatorKind::Shift { direction, weights } => {
                // T e_k = w_k e_{k+1}, so T^{-1} e_j = (1 / w_{j-1}) e_{j-1}.
                let inv = match weights {
                    Weights::Constant(c) => Weights::Constant(C64::new(1.0, 0.0) / *c),
                    Weights::Periodic(w) => {
                        let p = w.len();
                        Weights::Periodic(
                            (0..p)
                                .map(|j| C64::new(1.0, 0.0) / w[(j + p - 1) % p])
                                .collect(),
                        )
                    }
                };
                let direction = match direction {
                    ShiftDirection::Bilateral => ShiftDirection::BilateralBackward,
                    _ => ShiftDirection::Bilateral,
                };
                OperatorKind::Shift {
                    direction,
                    weights: inv,
                }
            }
            OperatorKind::DirectSum(parts) => {
                OperatorKind::DirectSum(parts.iter().map(|p| p.inverse()).collect::<Result<_>>()?)
            }
            OperatorKind::Rotation { angle } => OperatorKind::Rotation { angle: -angle },
            _ => {
                let m = self.matrix().expect("finite");
                let inv =
                    linalg::inverse(&m).ok_or_else(|| Error::Linalg("singular matrix".into()))?;
                let inv = if self.field == ScalarField::Real {
                    inv.map(|c| C64::new(c.re, 0.0))
                } else {
                    inv
                };
                OperatorKind::Dense(inv)
            }
        };
        Ok(OperatorSpec {
            field: self.field,
            norm: NormTag::Base(self.base_norm()),
            kind,
            power_bound: None,
        })
    }
}

/// The complexification `T_C(x + iy) = Tx + iTy`: same entries, complex
/// field.
pub fn complexify(op: &OperatorSpec) -> Result<OperatorSpec> {
    if op.field == ScalarField::Complex {
        return Err(Error::AlreadyComplex);
    }
    let kind = match &op.kind {
        OperatorKind::Rotation { .. } => OperatorKind::Dense(op.matrix().expect("rotation matrix")),
        OperatorKind::DirectSum(parts) => {
            OperatorKind::DirectSum(parts.iter().map(complexify).collect::<Result<_>>()?)
        }
        OperatorKind::Stochastic(m) => OperatorKind::Dense(m.clone()),
        other => other.clone(),
    };
    let out = OperatorSpec {
        field: ScalarField::Complex,
        norm: NormTag::Base(op.base_norm()),
        kind,
        power_bound: None,
    };
    out.validate()?;
    Ok(out)
}

impl fmt::Display for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            OperatorKind::Dense(m) => format!("dense {}x{}", m.nrows(), m.ncols()),
            OperatorKind::Rotation { angle } => format!("rotation({angle})"),
            OperatorKind::Shift { direction, .. } => format!("{direction:?} shift"),
            OperatorKind::Stochastic(m) => format!("stochastic {}x{}", m.nrows(), m.ncols()),
            OperatorKind::DirectSum(p) => format!("direct sum of {}", p.len()),
            OperatorKind::Generator(m) => format!("generator {}x{}", m.nrows(), m.ncols()),
        };
        write!(f, "{kind} over {:?}", self.field)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: i64) -> SparseVector {
        SparseVector::basis(ScalarField::Real, i)
    }

    #[test]
    fn forward_shift_translates() {
        let s = OperatorSpec::unit_shift(ShiftDirection::Forward);
        assert_eq!(s.apply(&e(1)).unwrap(), e(2));
    }

    #[test]
    fn quarter_turn() {
        let r = OperatorSpec::rotation(std::f64::consts::FRAC_PI_2).unwrap();
        let y = r.apply(&e(0)).unwrap();
        assert!(y.distance(&e(1), BaseNorm::L2) < 1e-15);
    }

    #[test]
    fn dense_application() {
        let t = OperatorSpec::dense_real(2, &[0.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(t.apply(&e(1)).unwrap(), e(0).scale_real(2.0));
    }

    #[test]
    fn negative_index_rejected_for_one_sided_shift() {
        for dir in [ShiftDirection::Forward, ShiftDirection::Backward] {
            let s = OperatorSpec::unit_shift(dir);
            assert!(matches!(
                s.apply(&e(-1)),
                Err(Error::IndexDomainViolation { index: -1, .. })
            ));
        }
        let b = OperatorSpec::unit_shift(ShiftDirection::Bilateral);
        assert_eq!(b.apply(&e(-1)).unwrap(), e(0));
    }

    #[test]
    fn field_mismatch_rejected() {
        let r = OperatorSpec::rotation(0.3).unwrap();
        let z = SparseVector::basis(ScalarField::Complex, 0);
        assert!(matches!(r.apply(&z), Err(Error::FieldMismatch { .. })));
    }

    #[test]
    fn backward_shift_kills_e0() {
        let b = OperatorSpec::unit_shift(ShiftDirection::Backward);
        assert!(b.apply(&e(0)).unwrap().is_zero());
        assert_eq!(b.apply(&e(5)).unwrap(), e(4));
    }

    #[test]
    fn direct_sum_with_trailing_shift() {
        let t = OperatorSpec::direct_sum(vec![
            OperatorSpec::diag_real(&[0.5]),
            OperatorSpec::unit_shift(ShiftDirection::Forward),
        ])
        .unwrap();
        assert_eq!(t.dim(), None);
        let x = SparseVector::from_real([(0, 1.0), (1, 3.0)]);
        assert_eq!(
            t.apply(&x).unwrap(),
            SparseVector::from_real([(0, 0.5), (2, 3.0)])
        );
        let bad = OperatorSpec::direct_sum(vec![
            OperatorSpec::unit_shift(ShiftDirection::Forward),
            OperatorSpec::diag_real(&[0.5]),
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn complexify_acts_componentwise() {
        let t = OperatorSpec::dense_real(2, &[0.3, -1.0, 2.0, 0.5]).unwrap();
        let tc = complexify(&t).unwrap();
        assert_eq!(tc.field(), ScalarField::Complex);
        let x = SparseVector::from_real([(0, 1.0), (1, -2.0)]);
        let y = SparseVector::from_real([(0, 0.25), (1, 4.0)]);
        let z = x
            .clone()
            .into_field(ScalarField::Complex)
            .unwrap()
            .combine(
                C64::new(1.0, 0.0),
                &y.clone().into_field(ScalarField::Complex).unwrap(),
                C64::new(0.0, 1.0),
            )
            .unwrap();
        let tz = tc.apply(&z).unwrap();
        let tx = t.apply(&x).unwrap();
        let ty = t.apply(&y).unwrap();
        for i in 0..2 {
            assert_eq!(tz.get(i), C64::new(tx.get(i).re, ty.get(i).re));
        }
        assert!(matches!(complexify(&tc), Err(Error::AlreadyComplex)));
        let id = OperatorSpec::identity(ScalarField::Real, 3);
        assert_eq!(
            complexify(&id).unwrap(),
            OperatorSpec::identity(ScalarField::Complex, 3)
        );
    }

    #[test]
    fn complexified_rotation_has_conjugate_unimodular_eigenvalues() {
        let alpha = 0.9;
        let tc = complexify(&OperatorSpec::rotation(alpha).unwrap()).unwrap();
        let mut eig = linalg::eigenvalues(&tc.matrix().unwrap()).unwrap();
        eig.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        // Roots of t² − 2 cos α t + 1.
        let (s, c) = alpha.sin_cos();
        assert!((eig[0] - C64::new(c, -s)).norm() < 1e-14);
        assert!((eig[1] - C64::new(c, s)).norm() < 1e-14);
    }

    #[test]
    fn bilateral_inverse_undoes_shift() {
        let s = OperatorSpec::shift(
            ShiftDirection::Bilateral,
            Weights::Periodic(vec![
                C64::new(2.0, 0.0),
                C64::new(-0.5, 0.0),
                C64::new(1.0, 0.0),
            ]),
        )
        .unwrap();
        let inv = s.inverse().unwrap();
        let x = SparseVector::from_real([(-4, 1.0), (0, 2.0), (7, -3.0)]);
        let back = inv.apply(&s.apply(&x).unwrap()).unwrap();
        assert!(back.distance(&x, BaseNorm::L2) < 1e-15);
        assert!(OperatorSpec::unit_shift(ShiftDirection::Forward)
            .inverse()
            .is_err());
    }

    #[test]
    fn rescaled_norm_requires_power_bound() {
        let j = OperatorSpec::dense_real(2, &[1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            j.with_rescaled_norm(100),
            Err(Error::NotPowerBounded(_))
        ));
        let t = OperatorSpec::dense_real(2, &[0.5, 3.0, 0.0, 0.5]).unwrap();
        let r = t.with_rescaled_norm(100).unwrap();
        assert!(matches!(
            r.norm_tag(),
            NormTag::Rescaled {
                base: BaseNorm::L2,
                horizon: 100
            }
        ));
        assert_eq!(r.active_operator_norm(), 1.0);
    }
}
