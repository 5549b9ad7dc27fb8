//! Power-boundedness certificates and the orbit-supremum norm
//! `‖x‖' = sup_n ‖T^n x‖` under which a power-bounded `T` is a contraction.

use serde::Serialize;

use super::{OperatorKind, OperatorSpec, OrbitWalker, SparseVector, Weights};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::C64;

/// Tolerance on eigenvalue moduli for the spectral criterion.
pub const SPECTRAL_TOL: f64 = 1e-9;
/// Relative rank threshold used to count eigenvectors.
pub const RANK_TOL: f64 = 1e-9;
/// Computed eigenvalues closer than this are treated as one repeated
/// eigenvalue when looking for Jordan chains.
const CLUSTER_RADIUS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UnboundedWitness {
    /// An eigenvalue outside the closed unit disk.
    GrowingEigenvalue { lambda: [f64; 2] },
    /// A peripheral eigenvalue whose geometric multiplicity is smaller than
    /// its algebraic multiplicity.
    JordanChain {
        lambda: [f64; 2],
        algebraic: usize,
        geometric: usize,
    },
    /// Shift weights whose product over one period exceeds 1.
    GrowingWeights { period_product: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerBoundCertificate {
    pub bounded: bool,
    /// `max_{n <= horizon} ‖T^n‖` in the base norm (always >= 1).
    pub sup_norm_estimate: f64,
    pub spectral_radius: Option<f64>,
    pub witness: Option<UnboundedWitness>,
    pub horizon: usize,
}

impl PowerBoundCertificate {
    pub fn describe(&self) -> String {
        match &self.witness {
            Some(UnboundedWitness::GrowingEigenvalue { lambda }) => {
                format!(
                    "eigenvalue {}{:+}i outside the unit disk",
                    lambda[0], lambda[1]
                )
            }
            Some(UnboundedWitness::JordanChain { lambda, .. }) => {
                format!(
                    "Jordan chain at unimodular eigenvalue {}{:+}i",
                    lambda[0], lambda[1]
                )
            }
            Some(UnboundedWitness::GrowingWeights { period_product }) => {
                format!("shift weight product {period_product} > 1")
            }
            None => "bounded".to_string(),
        }
    }
}

struct Verdict {
    bounded: bool,
    sup: f64,
    radius: Option<f64>,
    witness: Option<UnboundedWitness>,
}

/// Decides `sup_n ‖T^n‖ < ∞`. Finite-dimensional operators use the spectral
/// criterion (spectral radius at most 1, peripheral eigenvalues semisimple);
/// the sampled `max_{n <= horizon} ‖T^n‖` is reported as a cross-check.
pub fn power_bounded_check(op: &OperatorSpec, horizon: usize) -> PowerBoundCertificate {
    let v = verdict(op, horizon);
    PowerBoundCertificate {
        bounded: v.bounded,
        sup_norm_estimate: v.sup,
        spectral_radius: v.radius,
        witness: v.witness,
        horizon,
    }
}

fn verdict(op: &OperatorSpec, horizon: usize) -> Verdict {
    match op.kind() {
        OperatorKind::Shift { weights, .. } => shift_verdict(weights, horizon),
        OperatorKind::DirectSum(parts) if op.dim().is_none() => {
            let mut out = Verdict {
                bounded: true,
                sup: 1.0,
                radius: None,
                witness: None,
            };
            for p in parts {
                let v = verdict(&p.clone().with_norm(op.base_norm()), horizon);
                out.sup = out.sup.max(v.sup);
                if !v.bounded && out.bounded {
                    out.bounded = false;
                    out.witness = v.witness;
                }
            }
            out
        }
        _ => matrix_verdict(&op.matrix().expect("finite operator"), op, horizon),
    }
}

fn matrix_verdict(m: &CMatrix, op: &OperatorSpec, horizon: usize) -> Verdict {
    let d = m.nrows();
    let norm = op.base_norm();
    let mut sup: f64 = 1.0;
    let mut p = CMatrix::identity(d, d);
    for _ in 0..horizon {
        p = m * &p;
        let v = linalg::operator_norm(&p, norm);
        if !v.is_finite() {
            sup = f64::INFINITY;
            break;
        }
        sup = sup.max(v);
    }

    let eig = match linalg::eigenvalues(m) {
        Ok(e) => e,
        Err(_) => {
            return Verdict {
                bounded: false,
                sup,
                radius: None,
                witness: None,
            }
        }
    };
    let radius = eig.iter().map(|l| l.norm()).fold(0.0, f64::max);
    if let Some(l) = eig
        .iter()
        .filter(|l| l.norm() > 1.0 + SPECTRAL_TOL)
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
    {
        return Verdict {
            bounded: false,
            sup,
            radius: Some(radius),
            witness: Some(UnboundedWitness::GrowingEigenvalue {
                lambda: [l.re, l.im],
            }),
        };
    }
    let scale = linalg::spectral_norm(m).max(1e-300);
    for cluster in peripheral_clusters(&eig) {
        if cluster.len() < 2 {
            continue;
        }
        let mu = cluster.iter().sum::<C64>() / cluster.len() as f64;
        let shifted = m - CMatrix::identity(d, d) * mu;
        let geometric = d - linalg::rank(&shifted, RANK_TOL * scale);
        if geometric < cluster.len() {
            return Verdict {
                bounded: false,
                sup,
                radius: Some(radius),
                witness: Some(UnboundedWitness::JordanChain {
                    lambda: [mu.re, mu.im],
                    algebraic: cluster.len(),
                    geometric,
                }),
            };
        }
    }
    Verdict {
        bounded: true,
        sup,
        radius: Some(radius),
        witness: None,
    }
}

/// Groups eigenvalues with `|λ| >= 1 − tol` into clusters of nearby values.
pub(crate) fn peripheral_clusters(eig: &[C64]) -> Vec<Vec<C64>> {
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for &l in eig.iter().filter(|l| l.norm() >= 1.0 - SPECTRAL_TOL) {
        match clusters
            .iter_mut()
            .find(|c| c.iter().any(|&m| (m - l).norm() <= CLUSTER_RADIUS))
        {
            Some(c) => c.push(l),
            None => clusters.push(vec![l]),
        }
    }
    clusters
}

fn shift_verdict(weights: &Weights, horizon: usize) -> Verdict {
    let p = weights.period();
    let logs: Vec<f64> = (0..p as i64).map(|k| weights.at(k).norm().ln()).collect();
    let period_log: f64 = logs.iter().sum();
    // ‖S^n‖ = max over starting positions of the product of n consecutive |w|.
    let mut window: Vec<f64> = vec![0.0; p];
    let mut best_log: f64 = 0.0;
    for n in 1..=horizon {
        for (k, w) in window.iter_mut().enumerate() {
            *w += logs[(k + n - 1) % p];
        }
        let m = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        best_log = best_log.max(m);
    }
    let bounded = period_log <= SPECTRAL_TOL;
    Verdict {
        bounded,
        sup: best_log.exp(),
        radius: None,
        witness: (!bounded).then(|| UnboundedWitness::GrowingWeights {
            period_product: period_log.exp(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledNorm {
    /// `max_{0 <= n <= N'} ‖T^n x‖` where `N'` is the last power examined.
    pub value: f64,
    /// Number of powers actually examined (at most the horizon).
    pub powers_examined: usize,
    /// Bound on `sup_{n > N'} ‖T^n x‖`: `M · min_{n <= N'} ‖T^n x‖` with
    /// `M` the power-bound estimate, because `‖T^m x‖ <= ‖T^{m-n}‖ ‖T^n x‖`.
    pub tail_bound: f64,
    /// True when the tail bound does not exceed `value`, so the window
    /// maximum is the supremum (given `M`).
    pub exact: bool,
}

/// Orbit-supremum norm of `x`, evaluated over at most `horizon` powers.
pub fn rescaled_norm(op: &OperatorSpec, x: &SparseVector, horizon: usize) -> Result<RescaledNorm> {
    let bound = match op.power_bound() {
        Some(b) => b,
        None => {
            let cert = power_bounded_check(op, super::DEFAULT_RESCALE_HORIZON.min(horizon.max(1)));
            if !cert.bounded {
                return Err(Error::NotPowerBounded(cert.describe()));
            }
            cert.sup_norm_estimate
        }
    };
    rescaled_with_bound(op, x, horizon, bound)
}

fn rescaled_with_bound(
    op: &OperatorSpec,
    x: &SparseVector,
    horizon: usize,
    bound: f64,
) -> Result<RescaledNorm> {
    // Sampled norms of contractions can exceed 1 by rounding.
    let bound = if bound <= 1.0 + 1e-12 { 1.0 } else { bound };
    let mut walker = OrbitWalker::new(op, x)?;
    let mut best = walker.current_base_norm();
    let mut least = best;
    if bound * best <= best {
        return Ok(RescaledNorm {
            value: best,
            powers_examined: 0,
            tail_bound: best,
            exact: true,
        });
    }
    for n in 1..=horizon {
        walker.step();
        let v = walker.current_base_norm();
        best = best.max(v);
        least = least.min(v);
        if bound * v <= best {
            return Ok(RescaledNorm {
                value: best,
                powers_examined: n,
                tail_bound: bound * v,
                exact: true,
            });
        }
    }
    Ok(RescaledNorm {
        value: best,
        powers_examined: horizon,
        tail_bound: bound * least,
        exact: bound * least <= best,
    })
}
