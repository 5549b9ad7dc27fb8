//! Orbits, compact nets, returning vectors and attraction verdicts.
//!
//! Limits over infinite time are replaced by finite windows: `liminf` by the
//! minimum over `[N/2, N]`, `lim` by the maximum over the last quarter
//! `[3N/4, N]`.

mod attract;
mod returning;

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};

pub(crate) use attract::tail_distances;
pub use attract::{
    attractor_check, occasional_attractor_check, AttractionVerdict, OccasionalVerdict,
};
pub use returning::{
    is_returning, lemma1_isometry_check, lemma4_recover, IsometryVerdict, Lemma4Outcome, Returning,
    ReturningCertificate,
};

use crate::error::{Error, Result};
use crate::operator::{
    vector_from_value, vector_to_value, BaseNorm, NormTag, OperatorSpec, OrbitWalker, ScalarField,
    SparseVector,
};
use crate::C64;

pub const DEFAULT_HORIZON: usize = 2000;
pub const DEFAULT_TOL: f64 = 1e-6;

/// `iterates[k] = T^{stride·k} base`, `norms[k]` its active norm.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace {
    pub base: SparseVector,
    pub horizon: usize,
    pub stride: usize,
    pub iterates: Vec<SparseVector>,
    pub norms: Vec<f64>,
}

impl OrbitTrace {
    /// Power of `T` that produced `iterates[k]`.
    pub fn power(&self, k: usize) -> usize {
        k * self.stride
    }

    /// CSV rows `n,norm,distance` (distance to the net, empty without one).
    pub fn to_csv(&self, op: &OperatorSpec, net: Option<&CompactNet>) -> String {
        let mut out = String::from("n,norm,distance\n");
        for (k, (x, norm)) in self.iterates.iter().zip(&self.norms).enumerate() {
            let dist = net
                .map(|k| {
                    k.distance_with(x, |a, b| op.distance(a, b))
                        .upper
                        .to_string()
                })
                .unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", self.power(k), norm, dist);
        }
        out
    }
}

/// Iterates `T^{stride·k} x` for `stride·k <= horizon`.
pub fn orbit(
    op: &OperatorSpec,
    x: &SparseVector,
    horizon: usize,
    stride: usize,
) -> Result<OrbitTrace> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let mut walker = OrbitWalker::new(op, x)?;
    let mut iterates = Vec::with_capacity(horizon / stride + 1);
    let mut norms = Vec::with_capacity(horizon / stride + 1);
    for n in 0..=horizon {
        if n % stride == 0 {
            let v = walker.current();
            norms.push(op.vector_norm(&v));
            iterates.push(v);
        }
        if n < horizon {
            walker.step();
        }
    }
    Ok(OrbitTrace {
        base: x.clone(),
        horizon,
        stride,
        iterates,
        norms,
    })
}

/// Finite net representing the compact set `∪_i B(center_i, mesh)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactNet {
    centers: Vec<SparseVector>,
    mesh: f64,
}

/// Distance to a net: the true distance to the covered set lies in
/// `[lower, upper]` where `upper` is the distance to the nearest center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceInterval {
    pub lower: f64,
    pub upper: f64,
}

impl CompactNet {
    /// A zero mesh is accepted and denotes the finite set of centers itself.
    pub fn new(centers: Vec<SparseVector>, mesh: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::EmptyNet);
        }
        if !(mesh.is_finite() && mesh >= 0.0) {
            return Err(Error::invariant(
                "mesh",
                format!("mesh must be finite and >= 0, got {mesh}"),
            ));
        }
        let field = centers[0].field();
        if centers.iter().any(|c| c.field() != field) {
            return Err(Error::invariant("field", "net centers mix scalar fields"));
        }
        Ok(CompactNet { centers, mesh })
    }

    pub fn centers(&self) -> &[SparseVector] {
        &self.centers
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn field(&self) -> ScalarField {
        self.centers[0].field()
    }

    /// Net of the segment `{c · v : c ∈ [-1, 1]}` (real field) or of the
    /// disk `{c · v : |c| <= 1}` (complex field), with `steps` grid cells per
    /// unit of `c`. The mesh covers the whole segment or disk.
    pub fn scalar_multiples(v: &SparseVector, norm: BaseNorm, steps: usize) -> Result<Self> {
        let steps = steps.max(1);
        let h = 1.0 / steps as f64;
        let len = v.norm(norm);
        let mut centers = Vec::new();
        match v.field() {
            ScalarField::Real => {
                for j in -(steps as i64)..=(steps as i64) {
                    centers.push(v.scale_real(j as f64 * h));
                }
                Self::new(centers, 0.5 * h * len)
            }
            ScalarField::Complex => {
                for a in -(steps as i64)..=(steps as i64) {
                    for b in -(steps as i64)..=(steps as i64) {
                        let c = crate::C64::new(a as f64 * h, b as f64 * h);
                        if c.norm() <= 1.0 + h {
                            centers.push(v.scale(c)?);
                        }
                    }
                }
                Self::new(centers, std::f64::consts::FRAC_1_SQRT_2 * h * len)
            }
        }
    }

    pub(crate) fn distance_with<F>(&self, x: &SparseVector, dist: F) -> DistanceInterval
    where
        F: Fn(&SparseVector, &SparseVector) -> f64,
    {
        let d = self
            .centers
            .iter()
            .map(|c| dist(x, c))
            .fold(f64::INFINITY, f64::min);
        DistanceInterval {
            lower: (d - self.mesh).max(0.0),
            upper: d,
        }
    }

    pub fn to_value(&self) -> Value {
        json!({
            "mesh": self.mesh,
            "centers": self.centers.iter().map(vector_to_value).collect::<Vec<_>>(),
        })
    }

    pub fn from_value(v: &Value, field: ScalarField) -> Result<Self> {
        let mesh = v
            .get("mesh")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::Parse {
                line: 0,
                reason: "net needs a numeric \"mesh\"".into(),
            })?;
        let centers = v
            .get("centers")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse {
                line: 0,
                reason: "net needs a \"centers\" array".into(),
            })?
            .iter()
            .map(|c| vector_from_value(c, field))
            .collect::<Result<Vec<_>>>()?;
        Self::new(centers, mesh)
    }
}

/// Nearest-center search specialised to the operator's norm. Finite
/// dimensional operators under a base norm compare dense coordinates, with
/// centers sorted by norm so that `|‖x‖ − ‖c‖| <= ‖x − c‖` prunes the scan;
/// everything else goes through the sparse distance.
pub(crate) struct NetIndex<'a> {
    op: &'a OperatorSpec,
    net: &'a CompactNet,
    dense: Option<DenseCenters>,
}

struct DenseCenters {
    d: usize,
    real: bool,
    norm: BaseNorm,
    /// Centers in increasing order of `norms`.
    flat: Vec<C64>,
    norms: Vec<f64>,
}

impl DenseCenters {
    fn distance(&self, v: &[C64], c: &[C64]) -> f64 {
        let abs = |a: &C64, b: &C64| {
            if self.real {
                (a.re - b.re).abs()
            } else {
                (a - b).norm()
            }
        };
        match self.norm {
            BaseNorm::L1 => v.iter().zip(c).map(|(a, b)| abs(a, b)).sum(),
            BaseNorm::L2 => v
                .iter()
                .zip(c)
                .map(|(a, b)| {
                    if self.real {
                        (a.re - b.re) * (a.re - b.re)
                    } else {
                        (a - b).norm_sqr()
                    }
                })
                .sum::<f64>()
                .sqrt(),
            BaseNorm::Sup => v.iter().zip(c).map(|(a, b)| abs(a, b)).fold(0.0, f64::max),
        }
    }

    fn nearest(&self, v: &[C64]) -> f64 {
        let zero = vec![C64::new(0.0, 0.0); self.d];
        let r = self.distance(v, &zero);
        // Pruning slack well above the rounding of either side.
        let slack = |best: f64| best * (1.0 + 1e-12) + 1e-300;
        let center = |k: usize| &self.flat[k * self.d..(k + 1) * self.d];
        let split = self.norms.partition_point(|&n| n < r);
        let mut best = f64::INFINITY;
        let (mut lo, mut hi) = (split, split);
        loop {
            let down = (lo > 0).then(|| r - self.norms[lo - 1]);
            let up = (hi < self.norms.len()).then(|| self.norms[hi] - r);
            let bound = slack(best);
            let take_down = match (down, up) {
                (Some(a), Some(b)) if a <= bound || b <= bound => a <= b,
                (Some(a), None) if a <= bound => true,
                (None, Some(b)) if b <= bound => false,
                _ => break,
            };
            let k = if take_down {
                lo -= 1;
                lo
            } else {
                hi += 1;
                hi - 1
            };
            best = best.min(self.distance(v, center(k)));
        }
        best
    }
}

impl<'a> NetIndex<'a> {
    pub(crate) fn new(op: &'a OperatorSpec, net: &'a CompactNet) -> Self {
        let dense = match (op.dim(), op.norm_tag()) {
            (Some(d), NormTag::Base(norm)) => {
                let rows: Option<Vec<Vec<C64>>> = net
                    .centers
                    .iter()
                    .map(|c| c.to_dense(0, d).ok().map(|v| v.iter().copied().collect()))
                    .collect();
                rows.map(|rows| {
                    let mut dc = DenseCenters {
                        d,
                        real: net.field() == ScalarField::Real,
                        norm,
                        flat: Vec::with_capacity(d * rows.len()),
                        norms: Vec::with_capacity(rows.len()),
                    };
                    let zero = vec![C64::new(0.0, 0.0); d];
                    let mut keyed: Vec<(f64, Vec<C64>)> = rows
                        .into_iter()
                        .map(|v| (dc.distance(&v, &zero), v))
                        .collect();
                    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
                    for (n, v) in keyed {
                        dc.norms.push(n);
                        dc.flat.extend(v);
                    }
                    dc
                })
            }
            _ => None,
        };
        NetIndex { op, net, dense }
    }

    /// Distance from `x` to the nearest center.
    pub(crate) fn nearest(&self, x: &SparseVector) -> f64 {
        let dense = self
            .dense
            .as_ref()
            .and_then(|dc| x.to_dense(0, dc.d).ok().map(|v| (dc, v)));
        match dense {
            Some((dc, v)) => dc.nearest(v.as_slice()),
            None => {
                self.net
                    .distance_with(x, |a, b| self.op.distance(a, b))
                    .upper
            }
        }
    }
}

/// `ρ(x, K)` as the interval `[max(0, d − ε), d]`, `d` the distance to the
/// nearest center.
pub fn point_set_distance(x: &SparseVector, net: &CompactNet, norm: BaseNorm) -> DistanceInterval {
    net.distance_with(x, |a, b| a.distance(b, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::ShiftDirection;

    fn e(i: i64) -> SparseVector {
        SparseVector::basis(ScalarField::Real, i)
    }

    #[test]
    fn pruned_nearest_matches_brute_force() {
        let mut rng = crate::sampling::rng(7);
        for (field, norm) in [
            (ScalarField::Real, BaseNorm::L2),
            (ScalarField::Complex, BaseNorm::L2),
            (ScalarField::Real, BaseNorm::L1),
            (ScalarField::Complex, BaseNorm::Sup),
        ] {
            let op = OperatorSpec::identity(field, 4).with_norm(norm);
            let centers: Vec<SparseVector> = (0..300)
                .map(|_| crate::sampling::gaussian_vector(&mut rng, field, 4))
                .collect();
            let net = CompactNet::new(centers, 0.1).unwrap();
            let index = NetIndex::new(&op, &net);
            for _ in 0..200 {
                let x = crate::sampling::gaussian_vector(&mut rng, field, 4);
                let brute = net.distance_with(&x, |a, b| a.distance(b, norm)).upper;
                let fast = index.nearest(&x);
                assert!((fast - brute).abs() <= 1e-14 * brute, "{fast} vs {brute}");
            }
        }
    }

    #[test]
    fn identity_orbit_is_constant() {
        let id = OperatorSpec::identity(ScalarField::Real, 2);
        let x = SparseVector::from_real([(0, 0.6), (1, 0.8)]);
        let t = orbit(&id, &x, 5, 1).unwrap();
        assert_eq!(t.iterates.len(), 6);
        assert!(t.iterates.iter().all(|v| *v == x));
    }

    #[test]
    fn forward_shift_orbit() {
        let s = OperatorSpec::unit_shift(ShiftDirection::Forward);
        let t = orbit(&s, &e(1), 3, 1).unwrap();
        assert_eq!(t.iterates, vec![e(1), e(2), e(3), e(4)]);
    }

    #[test]
    fn geometric_decay_norms() {
        let h = OperatorSpec::diag_real(&[0.5]);
        let t = orbit(&h, &e(0), 4, 1).unwrap();
        assert_eq!(t.norms, vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
    }

    #[test]
    fn strided_orbit() {
        let s = OperatorSpec::unit_shift(ShiftDirection::Bilateral);
        let t = orbit(&s, &e(0), 10, 4).unwrap();
        assert_eq!(t.iterates, vec![e(0), e(4), e(8)]);
        assert_eq!(t.power(2), 8);
    }

    #[test]
    fn distance_examples() {
        let k = CompactNet::new(vec![e(0), e(3)], 0.1).unwrap();
        let d = point_set_distance(&e(0), &k, BaseNorm::L2);
        assert_eq!(d.lower, 0.0);
        assert_eq!(d.upper, 0.0);

        let origin = CompactNet::new(vec![SparseVector::zeros(ScalarField::Real)], 0.1).unwrap();
        let d = point_set_distance(&e(5), &origin, BaseNorm::L2);
        assert_eq!((d.lower, d.upper), (0.9, 1.0));

        let single = CompactNet::new(vec![e(2)], 0.25).unwrap();
        let d = point_set_distance(&e(9), &single, BaseNorm::L2);
        assert_eq!(d.upper, 2f64.sqrt());
        assert_eq!(d.lower, 2f64.sqrt() - 0.25);
    }

    #[test]
    fn net_validation() {
        assert!(matches!(CompactNet::new(vec![], 0.1), Err(Error::EmptyNet)));
        assert!(CompactNet::new(vec![e(0)], -1.0).is_err());
        assert!(CompactNet::new(vec![e(0)], f64::NAN).is_err());
    }

    #[test]
    fn segment_net_covers_segment() {
        let v = SparseVector::from_real([(0, 0.6), (1, -0.8)]);
        let net = CompactNet::scalar_multiples(&v, BaseNorm::L2, 16).unwrap();
        for j in 0..=200 {
            let c = -1.0 + j as f64 / 100.0;
            let d = point_set_distance(&v.scale_real(c), &net, BaseNorm::L2);
            assert!(d.upper <= net.mesh() + 1e-15);
        }
    }

    #[test]
    fn csv_trace() {
        let h = OperatorSpec::diag_real(&[0.5]);
        let t = orbit(&h, &e(0), 2, 1).unwrap();
        let net = CompactNet::new(vec![SparseVector::zeros(ScalarField::Real)], 0.1).unwrap();
        assert_eq!(
            t.to_csv(&h, Some(&net)),
            "n,norm,distance\n0,1,1\n1,0.5,0.5\n2,0.25,0.25\n"
        );
    }

    #[test]
    fn net_json_round_trip() {
        let net = CompactNet::new(
            vec![e(-2), SparseVector::from_real([(0, 0.5), (4, -1.0)])],
            0.3,
        )
        .unwrap();
        assert_eq!(
            CompactNet::from_value(&net.to_value(), ScalarField::Real).unwrap(),
            net
        );
    }
}
