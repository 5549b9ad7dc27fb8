//! Runs the chain "power bounded + supercyclic ⇒ orbits vanish" stage by
//! stage on a concrete operator and candidate, recording where it stops.

use serde::Serialize;
use serde_json::{json, Value};

use super::{
    best_scalar_match, default_targets, supercyclic_probe, Classification, SupercyclicityVerdict,
};
use crate::error::{Error, Result};
use crate::operator::{vector_to_value, OperatorSpec, OrbitWalker, SparseVector};
use crate::orbit::{
    lemma1_isometry_check, lemma4_recover, occasional_attractor_check, CompactNet, IsometryVerdict,
    Lemma4Outcome, OccasionalVerdict, ReturningCertificate,
};
use crate::sampling::{self, DEFAULT_SEED};
use crate::C64;

/// Samples used to propagate a vanishing orbit to the whole space.
const PROPAGATION_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem4Verdict {
    /// Every stage certified on a finite-dimensional space, where the
    /// vanishing conclusion does not apply.
    FiniteDimensionalException,
    /// The orbit of the candidate and of every sample vanishes.
    ConsistentWithTheorem4,
    /// The candidate's projective orbit stays away from some target.
    NotSupercyclicAtScale,
    Inconclusive,
}

impl Theorem4Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Theorem4Verdict::FiniteDimensionalException => "finite_dimensional_exception",
            Theorem4Verdict::ConsistentWithTheorem4 => "consistent_with_theorem4",
            Theorem4Verdict::NotSupercyclicAtScale => "not_supercyclic_at_scale",
            Theorem4Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub name: &'static str,
    pub status: StageStatus,
    pub detail: Value,
}

impl Stage {
    fn new(name: &'static str, status: StageStatus, detail: Value) -> Self {
        Stage {
            name,
            status,
            detail,
        }
    }

    fn skipped(name: &'static str, reason: &str) -> Self {
        Stage::new(name, StageStatus::Skipped, json!({ "reason": reason }))
    }

    fn failed(name: &'static str, err: &Error) -> Self {
        Stage::new(
            name,
            StageStatus::Failed,
            json!({ "error": err.to_string() }),
        )
    }
}

/// Occasional attraction of `T⁻¹` orbits by the scaled-candidate net.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseAttraction {
    pub inverse: OperatorSpec,
    pub net: CompactNet,
    pub samples: Vec<SparseVector>,
    pub verdicts: Vec<OccasionalVerdict>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub verdict: Theorem4Verdict,
    pub finite_dimensional: bool,
    /// The candidate normalized in the operator's norm.
    pub candidate: SparseVector,
    /// The operator under its orbit-supremum norm; the later stages run on it.
    pub rescaled: OperatorSpec,
    pub horizon: usize,
    pub tol: f64,
    pub stages: Vec<Stage>,
    pub probe: SupercyclicityVerdict,
    pub returning: Option<ReturningCertificate>,
    pub isometry: Option<IsometryVerdict>,
    pub attraction: Option<InverseAttraction>,
}

impl ChainReport {
    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn to_value(&self) -> Value {
        let probe = self.probe.to_value();
        json!({
            "verdict": self.verdict.as_str(),
            "finite_dimensional": self.finite_dimensional,
            "candidate": vector_to_value(&self.candidate),
            "horizon": self.horizon,
            "tol": self.tol,
            "classification": probe["classification"],
            "density_gap": probe["density_gap"],
            "evidence": probe["evidence"],
            "chain": self
                .stages
                .iter()
                .map(|s| json!({"stage": s.name, "status": s.status, "detail": s.detail}))
                .collect::<Vec<_>>(),
        })
    }
}

/// `M ‖T^N x‖` with `M = sup ‖T^m‖`: a bound on every iterate past `N`.
fn tail_bound(op: &OperatorSpec, x: &SparseVector, horizon: usize, m: f64) -> Result<f64> {
    let mut w = OrbitWalker::new(op, x)?;
    for _ in 0..horizon {
        w.step();
    }
    Ok(m * w.current_base_norm())
}

/// First `n <= N` with `M ‖T^n x‖ <= tol`, and the bound there.
fn first_vanishing(
    op: &OperatorSpec,
    x: &SparseVector,
    horizon: usize,
    m: f64,
    tol: f64,
) -> Result<Option<(usize, f64)>> {
    let mut w = OrbitWalker::new(op, x)?;
    for n in 0..=horizon {
        let b = m * w.current_base_norm();
        if b <= tol {
            return Ok(Some((n, b)));
        }
        w.step();
    }
    Ok(None)
}

/// Pairs `(λ, n)`, `1 <= n <= N`, with `‖λ T^n k − k‖₂ <= tol`; the single
/// best pair when none qualifies, so the next stage can report the miss.
fn return_data(
    op: &OperatorSpec,
    k: &SparseVector,
    horizon: usize,
    tol: f64,
) -> Result<(Vec<C64>, Vec<usize>)> {
    let mut w = OrbitWalker::new(op, k)?;
    let (mut scalars, mut indices) = (Vec::new(), Vec::new());
    let mut best: Option<(f64, C64, usize)> = None;
    for n in 1..=horizon {
        w.step();
        let y = w.current();
        if y.is_zero() {
            break;
        }
        let (lambda, r) = best_scalar_match(&y, k)?;
        if r <= tol {
            scalars.push(lambda);
            indices.push(n);
        }
        if best.is_none_or(|(b, _, _)| r < b) {
            best = Some((r, lambda, n));
        }
    }
    if scalars.is_empty() {
        if let Some((_, lambda, n)) = best {
            scalars.push(lambda);
            indices.push(n);
        }
    }
    Ok((scalars, indices))
}

/// Stages: rescale to the orbit-supremum norm; probe density of the
/// candidate's projective orbit; test whether its orbit vanishes (and if so
/// whether sampled orbits follow); otherwise recover returning powers from
/// scalar matches of `k` against its own iterates, check the isometry on the
/// orbit span, and, for invertible `T`, check that `T⁻¹` orbits are
/// occasionally attracted by the net of `{λk : |λ| <= 1}`.
pub fn theorem4_pipeline(
    op: &OperatorSpec,
    k: &SparseVector,
    horizon: usize,
    tol: f64,
) -> Result<ChainReport> {
    if k.is_zero() {
        return Err(Error::ZeroCandidate);
    }
    super::check_scalars(horizon, tol)?;
    let rescaled = op.clone().with_rescaled_norm(horizon)?;
    let m = rescaled.power_bound().unwrap_or(1.0).max(1.0);
    let finite_dimensional = op.is_finite_dimensional();
    let k_norm = op.vector_norm(k);
    let candidate = k.scale_real(1.0 / k_norm);
    let mut stages = vec![Stage::new(
        "rescale",
        StageStatus::Passed,
        json!({ "power_bound": m }),
    )];

    let targets = default_targets(op, DEFAULT_SEED);
    let probe = supercyclic_probe(op, &candidate, &targets, horizon, tol)?;
    let dense = probe.classification == Classification::ProjectivelyDense;
    stages.push(Stage::new(
        "probe",
        if dense {
            StageStatus::Passed
        } else {
            StageStatus::Failed
        },
        json!({
            "classification": probe.classification.as_str(),
            "density_gap": probe.density_gap,
            "targets": targets.len(),
        }),
    ));

    let mut report = ChainReport {
        verdict: Theorem4Verdict::Inconclusive,
        finite_dimensional,
        candidate: candidate.clone(),
        rescaled: rescaled.clone(),
        horizon,
        tol,
        stages: Vec::new(),
        probe,
        returning: None,
        isometry: None,
        attraction: None,
    };
    let later = ["returning", "isometry", "inverse_attraction"];

    if let Some((at, bound)) = first_vanishing(op, &candidate, horizon, m, tol)? {
        stages.push(Stage::new(
            "vanishing",
            StageStatus::Passed,
            json!({ "vanishing": true, "at": at, "tail_bound": bound }),
        ));
        let samples = sampling::random_unit_vectors(op, PROPAGATION_SAMPLES, DEFAULT_SEED);
        let bounds = samples
            .iter()
            .map(|x| tail_bound(op, x, horizon, m))
            .collect::<Result<Vec<_>>>()?;
        let worst = bounds.iter().copied().fold(0.0, f64::max);
        let all = worst <= tol;
        stages.push(Stage::new(
            "propagation",
            if all {
                StageStatus::Passed
            } else {
                StageStatus::Failed
            },
            json!({ "samples": samples.len(), "max_tail_bound": worst }),
        ));
        for name in later {
            stages.push(Stage::skipped(name, "candidate orbit vanishes"));
        }
        report.verdict = if all {
            Theorem4Verdict::ConsistentWithTheorem4
        } else if report.probe.classification == Classification::NotDense {
            Theorem4Verdict::NotSupercyclicAtScale
        } else {
            Theorem4Verdict::Inconclusive
        };
        report.stages = stages;
        return Ok(report);
    }
    stages.push(Stage::new(
        "vanishing",
        StageStatus::Failed,
        json!({ "vanishing": false }),
    ));

    if report.probe.classification == Classification::NotDense {
        for name in later {
            stages.push(Stage::skipped(
                name,
                "candidate is not supercyclic at this scale",
            ));
        }
        report.verdict = Theorem4Verdict::NotSupercyclicAtScale;
        report.stages = stages;
        return Ok(report);
    }

    let (scalars, indices) = return_data(&rescaled, &candidate, horizon, tol)?;
    match lemma4_recover(&rescaled, &candidate, &scalars, &indices, tol, horizon) {
        Ok(Lemma4Outcome::Certified(cert)) => {
            stages.push(Stage::new(
                "returning",
                StageStatus::Passed,
                cert.to_value(),
            ));
            report.returning = Some(cert);
        }
        Ok(other) => stages.push(Stage::new(
            "returning",
            StageStatus::Failed,
            other.to_value(),
        )),
        Err(e) => stages.push(Stage::failed("returning", &e)),
    }

    match lemma1_isometry_check(&rescaled, &candidate, tol, horizon) {
        Ok(v) => {
            let ok = v.norm_constancy && v.isometry_on_span;
            stages.push(Stage::new(
                "isometry",
                if ok {
                    StageStatus::Passed
                } else {
                    StageStatus::Failed
                },
                serde_json::to_value(&v).expect("plain fields"),
            ));
            report.isometry = Some(v);
        }
        Err(e) => stages.push(Stage::failed("isometry", &e)),
    }

    if op.is_invertible() {
        let inverse = op.inverse()?;
        let steps = (1.0 / tol).ceil() as usize;
        let net = CompactNet::scalar_multiples(&candidate, op.base_norm(), steps)?;
        let samples = sampling::default_unit_samples(op, DEFAULT_SEED);
        let verdicts = occasional_attractor_check(&inverse, &net, &samples, horizon, tol)?;
        let all = verdicts.iter().all(|v| v.occasionally_attracted);
        let worst = verdicts.iter().map(|v| v.min_distance).fold(0.0, f64::max);
        stages.push(Stage::new(
            "inverse_attraction",
            if all {
                StageStatus::Passed
            } else {
                StageStatus::Failed
            },
            json!({
                "samples": samples.len(),
                "mesh": net.mesh(),
                "worst_min_distance": worst,
                "attracted": verdicts.iter().filter(|v| v.occasionally_attracted).count(),
            }),
        ));
        report.attraction = Some(InverseAttraction {
            inverse,
            net,
            samples,
            verdicts,
        });
    } else {
        stages.push(Stage::skipped(
            "inverse_attraction",
            "operator is not invertible",
        ));
    }

    let chain_ok = ["returning", "isometry", "inverse_attraction"]
        .iter()
        .all(|n| {
            stages
                .iter()
                .any(|s| s.name == *n && s.status == StageStatus::Passed)
        });
    report.verdict = if chain_ok && dense && finite_dimensional {
        Theorem4Verdict::FiniteDimensionalException
    } else {
        Theorem4Verdict::Inconclusive
    };
    report.stages = stages;
    Ok(report)
}
