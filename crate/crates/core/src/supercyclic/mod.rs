//! Projective orbits: how closely do the scaled iterates `λ T^n k` reach a
//! fixed family of unit targets?
//!
//! All residuals here are L2 distances, so the inner minimization over `λ`
//! is an orthogonal projection.

mod pipeline;

pub use pipeline::{
    theorem4_pipeline, ChainReport, InverseAttraction, Stage, StageStatus, Theorem4Verdict,
};

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{
    vector_to_value, BaseNorm, OperatorKind, OperatorSpec, OrbitWalker, SparseVector,
};
use crate::orbit::CompactNet;
use crate::sampling;
use crate::C64;

pub const DEFAULT_TOL: f64 = 1e-2;
/// Random targets added to the coordinate directions.
pub const RANDOM_TARGETS: usize = 64;
/// A target whose residual stays at or above this multiple of `tol` after
/// doubling the horizon separates the orbit from it.
pub const NOT_DENSE_FACTOR: f64 = 10.0;
/// Powers with `‖T^n k‖ < TINY ‖k‖` carry no usable direction.
const TINY: f64 = 1e-300;
const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ProjectivelyDense,
    NotDense,
    VanishingOrbit,
    Inconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::ProjectivelyDense => "projectively_dense",
            Classification::NotDense => "not_dense",
            Classification::VanishingOrbit => "vanishing_orbit",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetEvidence {
    pub target: SparseVector,
    /// Power attaining the best match within the horizon.
    pub n: usize,
    /// Scalar multiplying the unnormalized iterate `T^n k`.
    pub lambda: C64,
    /// Best residual over `0 <= n <= N`; for nets, after the mesh allowance.
    pub residual: f64,
    /// The same match before the mesh allowance.
    pub raw_residual: f64,
    /// Best residual over `0 <= n <= 2N`, when the doubling check ran.
    pub doubled_residual: Option<f64>,
    /// Index of the matching net center (compact probes only).
    pub center: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupercyclicityVerdict {
    /// `None` for compact probes, whose candidates are the net centers.
    pub candidate: Option<SparseVector>,
    pub classification: Classification,
    /// Max over targets of the best residual within the horizon.
    pub density_gap: f64,
    pub evidence: Vec<TargetEvidence>,
    pub horizon: usize,
    pub tol: f64,
    /// First power with `‖T^n k‖ <= tol ‖k‖` (for nets: the latest such
    /// power over the centers, when every center vanishes).
    pub vanishing_at: Option<usize>,
    /// `κ · mesh`, where `κ` bounds the L2 norm by the base norm (nets only).
    pub mesh_allowance: Option<f64>,
}

impl SupercyclicityVerdict {
    pub fn to_value(&self) -> Value {
        let evidence: Vec<Value> = self
            .evidence
            .iter()
            .map(|e| {
                let mut v = json!({
                    "target": vector_to_value(&e.target),
                    "n": e.n,
                    "lambda": [e.lambda.re, e.lambda.im],
                    "residual": e.residual,
                    "raw_residual": e.raw_residual,
                    "doubled_residual": e.doubled_residual,
                });
                if let Some(c) = e.center {
                    v["center"] = json!(c);
                }
                v
            })
            .collect();
        json!({
            "classification": self.classification.as_str(),
            "density_gap": self.density_gap,
            "candidate": self.candidate.as_ref().map(vector_to_value),
            "evidence": evidence,
            "horizon": self.horizon,
            "tol": self.tol,
            "vanishing_at": self.vanishing_at,
            "mesh_allowance": self.mesh_allowance,
        })
    }
}

/// `λ = ⟨x, y⟩ / ⟨y, y⟩` minimizes `‖λy − x‖₂` over the scalar field;
/// returns `λ` and the minimum.
pub fn best_scalar_match(y: &SparseVector, x: &SparseVector) -> Result<(C64, f64)> {
    if y.field() != x.field() {
        return Err(Error::FieldMismatch {
            expected: y.field(),
            found: x.field(),
        });
    }
    let yy = y.inner(y).re;
    if yy == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let lambda = x.inner(y) / yy;
    Ok((lambda, l2_residual(lambda, y, x)))
}

/// `‖λy − x‖₂` without allocating.
fn l2_residual(lambda: C64, y: &SparseVector, x: &SparseVector) -> f64 {
    let mut ys = y.iter().peekable();
    let mut xs = x.iter().peekable();
    let mut acc = 0.0;
    loop {
        let d = match (ys.peek(), xs.peek()) {
            (None, None) => break,
            (Some(&(i, a)), Some(&(j, b))) if i == j => {
                ys.next();
                xs.next();
                lambda * a - b
            }
            (Some(&(i, a)), Some(&(j, _))) if i < j => {
                ys.next();
                lambda * a
            }
            (Some(&(_, a)), None) => {
                ys.next();
                lambda * a
            }
            (_, Some(&(_, b))) => {
                xs.next();
                -b
            }
        };
        acc += d.norm_sqr();
    }
    acc.sqrt()
}

/// Coordinate directions plus 64 seeded Gaussian directions, all of unit L2
/// norm.
pub fn default_targets(op: &OperatorSpec, seed: u64) -> Vec<SparseVector> {
    unit_targets(op, RANDOM_TARGETS, seed)
}

/// Coordinate directions plus `random` seeded Gaussian directions.
pub fn unit_targets(op: &OperatorSpec, random: usize, seed: u64) -> Vec<SparseVector> {
    let len = sampling::sample_support(op);
    let mut out: Vec<SparseVector> = (0..len as i64)
        .map(|i| SparseVector::basis(op.field(), i))
        .collect();
    let mut rng = sampling::rng(seed);
    while out.len() < len + random {
        let v = sampling::gaussian_vector(&mut rng, op.field(), len);
        let n = v.norm(BaseNorm::L2);
        if n > 0.0 && n.is_finite() {
            out.push(v.scale_real(1.0 / n));
        }
    }
    out
}

/// Orbit of `start` renormalized after every step; `log` tracks
/// `ln(‖T^n start‖ / ‖start‖)` in the base norm.
struct ProjectiveOrbit<'a> {
    walker: OrbitWalker<'a>,
    start_norm: f64,
    log: f64,
    /// Next power to visit.
    n: usize,
    dead: bool,
}

impl<'a> ProjectiveOrbit<'a> {
    fn new(op: &'a OperatorSpec, start: &SparseVector) -> Result<Self> {
        let start_norm = start.norm(op.base_norm());
        if start_norm == 0.0 {
            return Err(Error::ZeroCandidate);
        }
        let mut walker = OrbitWalker::new(op, start)?;
        walker.normalize_by(start_norm);
        Ok(ProjectiveOrbit {
            walker,
            start_norm,
            log: 0.0,
            n: 0,
            dead: false,
        })
    }

    /// Unit direction of the current iterate, unless it is negligible.
    fn direction(&self) -> Option<SparseVector> {
        (!self.dead && self.log >= TINY.ln()).then(|| self.walker.current())
    }

    /// `‖T^n start‖ / ‖start‖`.
    fn ratio(&self) -> f64 {
        if self.dead {
            0.0
        } else {
            self.log.exp()
        }
    }

    fn advance(&mut self) {
        self.n += 1;
        if self.dead {
            return;
        }
        self.walker.step();
        let s = self.walker.current_base_norm();
        if s == 0.0 || !s.is_finite() {
            self.dead = true;
            return;
        }
        self.log += s.ln();
        self.walker.normalize_by(s);
    }
}

#[derive(Debug, Clone, Copy)]
struct Best {
    n: usize,
    lambda: C64,
    residual: f64,
    raw: f64,
    center: Option<usize>,
    /// Best residual over powers visited before the orbit vanished.
    pre: f64,
}

impl Best {
    fn none() -> Self {
        Best {
            n: 0,
            lambda: C64::new(0.0, 0.0),
            residual: f64::INFINITY,
            raw: f64::INFINITY,
            center: None,
            pre: f64::INFINITY,
        }
    }
}

/// One candidate's contribution to the sweep.
struct Sweep<'a> {
    orbit: ProjectiveOrbit<'a>,
    center: Option<usize>,
    vanishing_at: Option<usize>,
}

/// Inputs shared by every candidate of a probe.
struct Scan<'t> {
    targets: &'t [SparseVector],
    tol: f64,
    /// `κ · mesh`; zero for single candidates.
    allowance: f64,
    /// `‖T^n‖₂` for `n <= 2N`, only needed when `allowance > 0`.
    power_norms: Vec<f64>,
}

impl Scan<'_> {
    /// Visits powers up to and including `to`.
    fn run(&self, sweep: &mut Sweep<'_>, to: usize, best: &mut [Best]) {
        while sweep.orbit.n <= to {
            let n = sweep.orbit.n;
            if sweep.vanishing_at.is_none() && sweep.orbit.ratio() <= self.tol {
                sweep.vanishing_at = Some(n);
            }
            if let Some(y) = sweep.orbit.direction() {
                // λ_y matches the unit direction; the unnormalized iterate
                // has norm start_norm · ratio.
                let scale = sweep.orbit.start_norm * sweep.orbit.ratio();
                for (b, x) in best.iter_mut().zip(self.targets) {
                    let (ly, raw) =
                        best_scalar_match(&y, x).expect("unit direction, matching field");
                    let lambda = ly / scale;
                    let residual = if self.allowance > 0.0 {
                        (raw - lambda.norm() * self.power_norms[n] * self.allowance).max(0.0)
                    } else {
                        raw
                    };
                    if sweep.vanishing_at.is_none() {
                        b.pre = b.pre.min(residual);
                    }
                    if residual < b.residual || (residual == b.residual && raw < b.raw) {
                        *b = Best {
                            n,
                            lambda,
                            residual,
                            raw,
                            center: sweep.center,
                            pre: b.pre,
                        };
                    }
                }
            }
            sweep.orbit.advance();
        }
    }
}

fn check_targets(op: &OperatorSpec, targets: &[SparseVector]) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::EmptySampleSet);
    }
    for x in targets {
        if x.field() != op.field() {
            return Err(Error::FieldMismatch {
                expected: op.field(),
                found: x.field(),
            });
        }
        let n = x.norm(BaseNorm::L2);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidArgument(format!(
                "target has L2 norm {n}, expected 1"
            )));
        }
    }
    Ok(())
}

fn check_scalars(horizon: usize, tol: f64) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    Ok(())
}

/// Shared driver: sweeps every candidate to `N`, then to `2N` when some
/// target still looks separated.
fn probe(
    op: &OperatorSpec,
    starts: &[SparseVector],
    singleton: bool,
    targets: &[SparseVector],
    horizon: usize,
    scan: Scan<'_>,
) -> Result<(Classification, f64, Vec<TargetEvidence>, Option<usize>)> {
    let mut sweeps = starts
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(Sweep {
                orbit: ProjectiveOrbit::new(op, s)?,
                center: (!singleton).then_some(i),
                vanishing_at: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = vec![Best::none(); targets.len()];
    for sweep in &mut sweeps {
        scan.run(sweep, horizon, &mut best);
    }
    let density_gap = best.iter().map(|b| b.residual).fold(0.0, f64::max);
    let vanishing_at = sweeps
        .iter()
        .map(|s| s.vanishing_at)
        .try_fold(0usize, |acc, v| v.map(|n| acc.max(n)));

    let far = NOT_DENSE_FACTOR * scan.tol;
    let mut doubled: Option<Vec<Best>> = None;
    if density_gap > scan.tol && vanishing_at.is_none() && best.iter().any(|b| b.residual >= far) {
        let mut b2 = best.clone();
        for sweep in &mut sweeps {
            scan.run(sweep, 2 * horizon, &mut b2);
        }
        doubled = Some(b2);
    }

    // Density reached only by iterates already below tol is reported as
    // vanishing: the orbit norm is the meaningful fact there.
    let pre_gap = best.iter().map(|b| b.pre).fold(0.0, f64::max);
    let classification = if density_gap <= scan.tol {
        if vanishing_at.is_some() && pre_gap > scan.tol {
            Classification::VanishingOrbit
        } else {
            Classification::ProjectivelyDense
        }
    } else if vanishing_at.is_some() {
        Classification::VanishingOrbit
    } else if let Some(b2) = &doubled {
        let stable = best
            .iter()
            .zip(b2)
            .any(|(b, d)| b.residual >= far && d.residual >= far);
        if stable {
            Classification::NotDense
        } else {
            Classification::Inconclusive
        }
    } else {
        Classification::Inconclusive
    };

    let evidence = best
        .iter()
        .enumerate()
        .map(|(i, b)| TargetEvidence {
            target: targets[i].clone(),
            n: b.n,
            lambda: b.lambda,
            residual: b.residual,
            raw_residual: b.raw,
            doubled_residual: doubled.as_ref().map(|d| d[i].residual),
            center: b.center,
        })
        .collect();
    Ok((classification, density_gap, evidence, vanishing_at))
}

/// Best match `min_{0 <= n <= N} min_λ ‖λ T^n k − x‖₂` for each target.
///
/// Classification, in order: dense when every residual is at most `tol`;
/// vanishing when `‖T^n k‖ <= tol ‖k‖` for some `n <= N`; not dense when
/// some residual of at least `10 tol` survives a second sweep to `2N`;
/// inconclusive otherwise.
pub fn supercyclic_probe(
    op: &OperatorSpec,
    k: &SparseVector,
    targets: &[SparseVector],
    horizon: usize,
    tol: f64,
) -> Result<SupercyclicityVerdict> {
    if k.is_zero() {
        return Err(Error::ZeroCandidate);
    }
    check_scalars(horizon, tol)?;
    check_targets(op, targets)?;
    let scan = Scan {
        targets,
        tol,
        allowance: 0.0,
        power_norms: Vec::new(),
    };
    let (classification, density_gap, evidence, vanishing_at) =
        probe(op, std::slice::from_ref(k), true, targets, horizon, scan)?;
    Ok(SupercyclicityVerdict {
        candidate: Some(k.clone()),
        classification,
        density_gap,
        evidence,
        horizon,
        tol,
        vanishing_at,
        mesh_allowance: None,
    })
}

/// The probe run from every center of `net`. A point of `K` within the mesh
/// of a center `c` moves `λ T^n c` by at most `|λ| ‖T^n‖₂ κ ε`, which is
/// subtracted from each raw residual, so residuals are lower bounds over `K`.
pub fn compact_supercyclic_probe(
    op: &OperatorSpec,
    net: &CompactNet,
    targets: &[SparseVector],
    horizon: usize,
    tol: f64,
) -> Result<SupercyclicityVerdict> {
    if net.centers().is_empty() {
        return Err(Error::EmptyNet);
    }
    if net.field() != op.field() {
        return Err(Error::FieldMismatch {
            expected: op.field(),
            found: net.field(),
        });
    }
    check_scalars(horizon, tol)?;
    check_targets(op, targets)?;
    let kappa = match (op.base_norm(), op.dim()) {
        (BaseNorm::L1 | BaseNorm::L2, _) => 1.0,
        (BaseNorm::Sup, Some(d)) => (d as f64).sqrt(),
        (BaseNorm::Sup, None) => {
            return Err(Error::InvalidArgument(
                "sup-norm nets on shift models have no L2 mesh bound".into(),
            ))
        }
    };
    let allowance = kappa * net.mesh();
    // Zero centers have no direction; the rest form the candidate family.
    let starts: Vec<SparseVector> = net
        .centers()
        .iter()
        .filter(|c| !c.is_zero())
        .cloned()
        .collect();
    let index: Vec<usize> = (0..net.centers().len())
        .filter(|&i| !net.centers()[i].is_zero())
        .collect();
    if starts.is_empty() {
        return Err(Error::ZeroCandidate);
    }
    let scan = Scan {
        targets,
        tol,
        allowance,
        power_norms: if allowance > 0.0 {
            power_norms(op, 2 * horizon)?
        } else {
            Vec::new()
        },
    };
    let (classification, density_gap, mut evidence, vanishing_at) =
        probe(op, &starts, false, targets, horizon, scan)?;
    for e in &mut evidence {
        e.center = e.center.map(|i| index[i]);
    }
    Ok(SupercyclicityVerdict {
        candidate: None,
        classification,
        density_gap,
        evidence,
        horizon,
        tol,
        vanishing_at,
        mesh_allowance: Some(allowance),
    })
}

/// `‖T^n‖₂` for `0 <= n <= to`.
fn power_norms(op: &OperatorSpec, to: usize) -> Result<Vec<f64>> {
    if let Some(m) = op.matrix() {
        let d = m.nrows();
        let mut p = linalg::identity(d);
        let mut out = Vec::with_capacity(to + 1);
        out.push(if d == 0 { 0.0 } else { 1.0 });
        for _ in 0..to {
            p = &m * &p;
            out.push(linalg::spectral_norm(&p));
        }
        return Ok(out);
    }
    match op.kind() {
        OperatorKind::Shift { weights, .. } => {
            // ‖S^n‖ is the largest product of n consecutive weight moduli.
            let p = weights.period();
            let logs: Vec<f64> = (0..p as i64).map(|j| weights.at(j).norm().ln()).collect();
            let mut window = vec![0.0; p];
            let mut out = Vec::with_capacity(to + 1);
            out.push(1.0);
            for n in 1..=to {
                for (k, w) in window.iter_mut().enumerate() {
                    *w += logs[(k + n - 1) % p];
                }
                out.push(
                    window
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max)
                        .exp(),
                );
            }
            Ok(out)
        }
        OperatorKind::DirectSum(parts) => {
            let mut out = vec![0.0f64; to + 1];
            for part in parts {
                for (o, v) in out.iter_mut().zip(power_norms(part, to)?) {
                    *o = o.max(v);
                }
            }
            Ok(out)
        }
        OperatorKind::Generator(_) => Err(Error::GeneratorNotIterable),
        _ => unreachable!("finite kinds expose a matrix"),
    }
}
