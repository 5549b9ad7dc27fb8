use nalgebra::DVector;

use super::{OperatorKind, OperatorSpec, SparseVector};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::C64;

/// Steps `x, Tx, T²x, …`. Finite-dimensional operators iterate on a dense
/// buffer; shift models iterate exactly on the sparse representation.
#[derive(Debug, Clone)]
pub struct OrbitWalker<'a> {
    op: &'a OperatorSpec,
    state: State,
    n: usize,
}

#[derive(Debug, Clone)]
enum State {
    Dense { m: CMatrix, v: DVector<C64> },
    Sparse(SparseVector),
}

impl<'a> OrbitWalker<'a> {
    pub fn new(op: &'a OperatorSpec, x: &SparseVector) -> Result<Self> {
        if matches!(op.kind(), OperatorKind::Generator(_)) {
            return Err(Error::GeneratorNotIterable);
        }
        op.check_vector(x)?;
        let state = match (op.matrix(), op.dim()) {
            (Some(m), Some(d)) => State::Dense {
                v: x.to_dense(0, d)?,
                m,
            },
            _ => State::Sparse(x.clone()),
        };
        Ok(OrbitWalker { op, state, n: 0 })
    }

    /// Number of steps taken so far.
    pub fn power(&self) -> usize {
        self.n
    }

    pub fn step(&mut self) {
        match &mut self.state {
            State::Dense { m, v } => *v = &*m * &*v,
            State::Sparse(x) => *x = self.op.apply_unchecked(x),
        }
        self.n += 1;
    }

    pub fn current(&self) -> SparseVector {
        match &self.state {
            State::Dense { v, .. } => SparseVector::from_dense(self.op.field(), v, 0),
            State::Sparse(x) => x.clone(),
        }
    }

    /// Base-norm of the current iterate, without materializing it.
    pub fn current_base_norm(&self) -> f64 {
        let norm = self.op.base_norm();
        match &self.state {
            State::Dense { v, .. } => {
                // Zero entries add nothing, so this matches the sparse norm.
                let real = self.op.field() == super::ScalarField::Real;
                let abs = |c: &C64| if real { c.re.abs() } else { c.norm() };
                match norm {
                    super::BaseNorm::L1 => v.iter().map(abs).sum(),
                    super::BaseNorm::L2 => v
                        .iter()
                        .map(|c| if real { c.re * c.re } else { c.norm_sqr() })
                        .sum::<f64>()
                        .sqrt(),
                    super::BaseNorm::Sup => v.iter().map(abs).fold(0.0, f64::max),
                }
            }
            State::Sparse(x) => x.norm(norm),
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.state {
            State::Dense { v, .. } => v.iter().all(|c| c.re == 0.0 && c.im == 0.0),
            State::Sparse(x) => x.is_zero(),
        }
    }

    /// Rescales the current iterate in place (projective orbits).
    pub(crate) fn normalize_by(&mut self, s: f64) {
        match &mut self.state {
            State::Dense { v, .. } => *v /= C64::new(s, 0.0),
            State::Sparse(x) => *x = x.scale_real(1.0 / s),
        }
    }
}

impl Iterator for OrbitWalker<'_> {
    type Item = SparseVector;

    /// Yields the current iterate and advances.
    fn next(&mut self) -> Option<SparseVector> {
        let out = self.current();
        self.step();
        Some(out)
    }
}
