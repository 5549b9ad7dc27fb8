//! Finitely supported vectors over an unbounded integer index set.
//!
//! Coefficients are stored in index order so that every reduction (norms,
//! inner products) sums in a fixed order. Translating a vector by an integer
//! offset moves coefficients without touching their bits, which is what
//! makes unit-weight shifts exact isometries here.

use std::collections::BTreeMap;

use nalgebra::DVector;

use super::{BaseNorm, ScalarField};
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    field: ScalarField,
    coeffs: BTreeMap<i64, C64>,
}

impl SparseVector {
    pub fn zeros(field: ScalarField) -> Self {
        SparseVector {
            field,
            coeffs: BTreeMap::new(),
        }
    }

    /// The coordinate vector `e_index`.
    pub fn basis(field: ScalarField, index: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(index, C64::new(1.0, 0.0));
        SparseVector { field, coeffs }
    }

    /// Builds a vector from `(index, coefficient)` pairs. Repeated indices are
    /// summed, zeros dropped. A coefficient with a nonzero imaginary part is
    /// rejected for the real field.
    pub fn from_pairs<I>(field: ScalarField, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (i64, C64)>,
    {
        let mut coeffs: BTreeMap<i64, C64> = BTreeMap::new();
        for (i, c) in pairs {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::invariant(
                    "vector",
                    format!("non-finite coefficient at {i}"),
                ));
            }
            if field == ScalarField::Real && c.im != 0.0 {
                return Err(Error::invariant(
                    "field",
                    format!("complex coefficient at index {i} in a real vector"),
                ));
            }
            *coeffs.entry(i).or_insert(C64::new(0.0, 0.0)) += c;
        }
        coeffs.retain(|_, c| !is_zero(*c));
        Ok(SparseVector { field, coeffs })
    }

    pub fn from_real<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        Self::from_pairs(
            ScalarField::Real,
            pairs.into_iter().map(|(i, v)| (i, C64::new(v, 0.0))),
        )
        .expect("finite real coefficients")
    }

    /// Dense coordinates `values[k]` placed at index `offset + k`.
    pub fn from_dense(field: ScalarField, values: &DVector<C64>, offset: i64) -> Self {
        let mut coeffs = BTreeMap::new();
        for (k, c) in values.iter().enumerate() {
            let c = match field {
                ScalarField::Real => C64::new(c.re, 0.0),
                ScalarField::Complex => *c,
            };
            if !is_zero(c) {
                coeffs.insert(offset + k as i64, c);
            }
        }
        SparseVector { field, coeffs }
    }

    /// Dense coordinates for indices `offset .. offset + len`. Fails if the
    /// support leaves that window.
    pub fn to_dense(&self, offset: i64, len: usize) -> Result<DVector<C64>> {
        let mut out = DVector::from_element(len, C64::new(0.0, 0.0));
        for (&i, &c) in &self.coeffs {
            let k = i - offset;
            if k < 0 || k >= len as i64 {
                return Err(Error::IndexDomainViolation {
                    index: i,
                    reason: format!("expected indices in [{offset}, {})", offset + len as i64),
                });
            }
            out[k as usize] = c;
        }
        Ok(out)
    }

    pub fn field(&self) -> ScalarField {
        self.field
    }

    /// Reinterprets a real vector over the complex field.
    pub fn into_field(mut self, field: ScalarField) -> Result<Self> {
        if field == ScalarField::Real && self.coeffs.values().any(|c| c.im != 0.0) {
            return Err(Error::invariant("field", "vector has complex coefficients"));
        }
        self.field = field;
        Ok(self)
    }

    pub fn get(&self, index: i64) -> C64 {
        self.coeffs
            .get(&index)
            .copied()
            .unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.coeffs.iter().map(|(&i, &c)| (i, c))
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn min_index(&self) -> Option<i64> {
        self.coeffs.keys().next().copied()
    }

    pub fn max_index(&self) -> Option<i64> {
        self.coeffs.keys().next_back().copied()
    }

    pub fn norm(&self, norm: BaseNorm) -> f64 {
        match norm {
            BaseNorm::L1 => self.coeffs.values().map(|c| c.norm()).sum(),
            BaseNorm::L2 => self
                .coeffs
                .values()
                .map(|c| c.norm_sqr())
                .sum::<f64>()
                .sqrt(),
            BaseNorm::Sup => self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max),
        }
    }

    /// `sum_i self_i * conj(other_i)`.
    pub fn inner(&self, other: &SparseVector) -> C64 {
        let (small, large, flip) = if self.nnz() <= other.nnz() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = C64::new(0.0, 0.0);
        for (i, c) in small.iter() {
            if let Some(&d) = large.coeffs.get(&i) {
                acc += if flip { d * c.conj() } else { c * d.conj() };
            }
        }
        acc
    }

    fn check_field(&self, other: &SparseVector) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch {
                expected: self.field,
                found: other.field,
            });
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: C64, other: &SparseVector, b: C64) -> Result<SparseVector> {
        self.check_field(other)?;
        self.check_scalar(a)?;
        self.check_scalar(b)?;
        let mut coeffs: BTreeMap<i64, C64> =
            self.coeffs.iter().map(|(&i, &c)| (i, a * c)).collect();
        for (&i, &c) in &other.coeffs {
            let slot = coeffs.entry(i).or_insert(C64::new(0.0, 0.0));
            *slot += b * c;
        }
        coeffs.retain(|_, c| !is_zero(*c));
        Ok(SparseVector {
            field: self.field,
            coeffs,
        })
    }

    pub fn try_add(&self, other: &SparseVector) -> Result<SparseVector> {
        self.check_field(other)?;
        let mut coeffs = self.coeffs.clone();
        for (&i, &c) in &other.coeffs {
            *coeffs.entry(i).or_insert(C64::new(0.0, 0.0)) += c;
        }
        coeffs.retain(|_, c| !is_zero(*c));
        Ok(SparseVector {
            field: self.field,
            coeffs,
        })
    }

    pub fn try_sub(&self, other: &SparseVector) -> Result<SparseVector> {
        self.check_field(other)?;
        let mut coeffs = self.coeffs.clone();
        for (&i, &c) in &other.coeffs {
            *coeffs.entry(i).or_insert(C64::new(0.0, 0.0)) -= c;
        }
        coeffs.retain(|_, c| !is_zero(*c));
        Ok(SparseVector {
            field: self.field,
            coeffs,
        })
    }

    /// `‖self − other‖` without materializing the difference.
    pub fn distance(&self, other: &SparseVector, norm: BaseNorm) -> f64 {
        let mut a = self.coeffs.iter().peekable();
        let mut b = other.coeffs.iter().peekable();
        let mut acc = 0.0f64;
        let mut push = |c: C64| match norm {
            BaseNorm::L1 => acc += c.norm(),
            BaseNorm::L2 => acc += c.norm_sqr(),
            BaseNorm::Sup => acc = acc.max(c.norm()),
        };
        // Supports in separate ranges: same accumulation order as the merge.
        let (lo, hi) = match (self.max_index(), other.min_index()) {
            (Some(m), Some(n)) if m < n => (self, other),
            _ => (other, self),
        };
        if let (Some(m), Some(n)) = (lo.max_index(), hi.min_index()) {
            if m < n {
                let sign = if std::ptr::eq(lo, self) { 1.0 } else { -1.0 };
                lo.coeffs.values().for_each(|&x| push(x * sign));
                hi.coeffs.values().for_each(|&y| push(y * -sign));
                return match norm {
                    BaseNorm::L2 => acc.sqrt(),
                    _ => acc,
                };
            }
        }
        loop {
            match (a.peek(), b.peek()) {
                (Some((&i, &x)), Some((&j, &y))) => {
                    if i == j {
                        push(x - y);
                        a.next();
                        b.next();
                    } else if i < j {
                        push(x);
                        a.next();
                    } else {
                        push(-y);
                        b.next();
                    }
                }
                (Some((_, &x)), None) => {
                    push(x);
                    a.next();
                }
                (None, Some((_, &y))) => {
                    push(-y);
                    b.next();
                }
                (None, None) => break,
            }
        }
        match norm {
            BaseNorm::L2 => acc.sqrt(),
            _ => acc,
        }
    }

    fn check_scalar(&self, c: C64) -> Result<()> {
        if self.field == ScalarField::Real && c.im != 0.0 {
            return Err(Error::FieldMismatch {
                expected: ScalarField::Real,
                found: ScalarField::Complex,
            });
        }
        Ok(())
    }

    pub fn scale(&self, c: C64) -> Result<SparseVector> {
        self.check_scalar(c)?;
        let mut coeffs: BTreeMap<i64, C64> =
            self.coeffs.iter().map(|(&i, &v)| (i, c * v)).collect();
        coeffs.retain(|_, v| !is_zero(*v));
        Ok(SparseVector {
            field: self.field,
            coeffs,
        })
    }

    pub fn scale_real(&self, c: f64) -> SparseVector {
        self.scale(C64::new(c, 0.0)).expect("real scalar")
    }

    /// Moves every coefficient from index `i` to `i + offset`, multiplying by
    /// `weight(i)`. With unit weights coefficients move bit-for-bit.
    pub(crate) fn translate_weighted<F>(&self, offset: i64, weight: F) -> SparseVector
    where
        F: Fn(i64) -> C64,
    {
        let mut coeffs = BTreeMap::new();
        for (&i, &c) in &self.coeffs {
            let w = weight(i);
            let v = if w == C64::new(1.0, 0.0) { c } else { w * c };
            if !is_zero(v) {
                coeffs.insert(i + offset, v);
            }
        }
        SparseVector {
            field: self.field,
            coeffs,
        }
    }

    pub fn translate(&self, offset: i64) -> SparseVector {
        self.translate_weighted(offset, |_| C64::new(1.0, 0.0))
    }

    /// Keeps only indices for which `keep` holds.
    pub(crate) fn restrict<F: Fn(i64) -> bool>(&self, keep: F) -> SparseVector {
        SparseVector {
            field: self.field,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(&i, _)| keep(i))
                .map(|(&i, &c)| (i, c))
                .collect(),
        }
    }

    pub(crate) fn merge_disjoint(&mut self, other: SparseVector) {
        for (i, c) in other.coeffs {
            *self.coeffs.entry(i).or_insert(C64::new(0.0, 0.0)) += c;
        }
        self.coeffs.retain(|_, c| !is_zero(*c));
    }
}

fn is_zero(c: C64) -> bool {
    c.re == 0.0 && c.im == 0.0
}
