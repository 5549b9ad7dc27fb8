//! Deterministic sample sets: unit-ball probes and density targets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::operator::{OperatorSpec, ScalarField, SparseVector};
use crate::C64;

pub const DEFAULT_SEED: u64 = 0x5EED;
/// Random unit vectors added to the coordinate vectors in the default
/// attraction sample set.
pub const RANDOM_SAMPLES: usize = 32;
/// Index window used for sample vectors of shift models.
pub const SPARSE_WINDOW: usize = 32;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Coordinates that sample vectors may use: the whole space in finite
/// dimensions, `0..=32` for shift models.
pub fn sample_support(op: &OperatorSpec) -> usize {
    op.dim().unwrap_or(SPARSE_WINDOW + 1)
}

/// Gaussian vector on `0..len`, not normalized.
pub fn gaussian_vector(rng: &mut ChaCha8Rng, field: ScalarField, len: usize) -> SparseVector {
    let pairs: Vec<(i64, C64)> = (0..len)
        .map(|i| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = match field {
                ScalarField::Real => 0.0,
                ScalarField::Complex => StandardNormal.sample(rng),
            };
            (i as i64, C64::new(re, im))
        })
        .collect();
    SparseVector::from_pairs(field, pairs).expect("finite gaussian coefficients")
}

/// `count` random vectors normalized in the active norm of `op`.
pub fn random_unit_vectors(op: &OperatorSpec, count: usize, seed: u64) -> Vec<SparseVector> {
    let mut rng = rng(seed);
    let len = sample_support(op);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = gaussian_vector(&mut rng, op.field(), len);
        let n = op.vector_norm(&v);
        if n > 0.0 && n.is_finite() {
            out.push(v.scale_real(1.0 / n));
        }
    }
    out
}

pub fn coordinate_vectors(op: &OperatorSpec) -> Vec<SparseVector> {
    (0..sample_support(op))
        .map(|i| {
            let e = SparseVector::basis(op.field(), i as i64);
            let n = op.vector_norm(&e);
            e.scale_real(1.0 / n)
        })
        .collect()
}

/// Coordinate vectors plus 32 seeded random unit vectors.
pub fn default_unit_samples(op: &OperatorSpec, seed: u64) -> Vec<SparseVector> {
    let mut v = coordinate_vectors(op);
    v.extend(random_unit_vectors(op, RANDOM_SAMPLES, seed));
    v
}
