use std::fmt::Write as _;

use opdyn::operator::{
    complexify, OperatorKind, OperatorSpec, ShiftDirection, SparseVector, Weights,
};
use opdyn::orbit;
use opdyn::semigroup::{self, SemigroupSample, SemigroupSpec};
use opdyn::spectral::{self, DEFAULT_PERIPHERAL_TOL};
use opdyn::supercyclic::{self, DEFAULT_TOL as DENSITY_TOL};
use opdyn::weyl::{self, Falsification};
use opdyn::{sampling, Error, Result, C64};
use serde_json::{json, Value};

use crate::args::{Command, Common};
use crate::inputs::{load_net, load_operator, load_vector, load_vectors};

pub const EXIT_OK: u8 = 0;
pub const EXIT_PRECONDITION: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;

/// What a command produced: the JSON report, an optional CSV trace and the
/// exit status.
pub struct Outcome {
    pub report: Value,
    pub csv: Option<String>,
    pub status: u8,
}

impl Outcome {
    fn ok(report: Value) -> Self {
        Outcome {
            report,
            csv: None,
            status: EXIT_OK,
        }
    }

    fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

fn samples_or_default(
    op: &OperatorSpec,
    vec: Option<&std::path::Path>,
    seed: u64,
) -> Result<Vec<SparseVector>> {
    match vec {
        Some(p) => load_vectors(p, op.field()),
        None => Ok(sampling::default_unit_samples(op, seed)),
    }
}

fn tol(c: &Common, default: f64) -> Result<f64> {
    let t = c.tol.unwrap_or(default);
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "--tol must be positive, got {t}"
        )));
    }
    Ok(t)
}

fn horizon(c: &Common, default: usize) -> usize {
    c.horizon.unwrap_or(default)
}

pub fn run(cmd: &Command) -> Result<Outcome> {
    let c = cmd.common();
    let op = load_operator(&c.op)?;
    match cmd {
        Command::Decompose { vec, .. } => {
            let dec = spectral::vu_sine_decompose(&op, tol(c, DEFAULT_PERIPHERAL_TOL)?)?;
            let mut report = dec.to_value();
            if let Some(p) = vec {
                let h = horizon(c, orbit::DEFAULT_HORIZON);
                let proj = load_vectors(p, op.field())?
                    .iter()
                    .map(|x| spectral::asymptotic_project(&dec, &op, x, h).map(|r| r.to_value()))
                    .collect::<Result<Vec<_>>>()?;
                report["projections"] = json!(proj);
            }
            Ok(Outcome::ok(report))
        }
        Command::Orbit { vec, net, .. } => {
            let x = match vec {
                Some(p) => load_vector(p, op.field())?,
                None => SparseVector::basis(op.field(), 0),
            };
            let net = net.as_ref().map(|p| load_net(p, op.field())).transpose()?;
            let trace = orbit::orbit(&op, &x, horizon(c, orbit::DEFAULT_HORIZON), 1)?;
            let csv = trace.to_csv(&op, net.as_ref());
            let report = json!({
                "horizon": trace.horizon,
                "norms": trace.norms,
                "final": opdyn::operator::vector_to_value(trace.iterates.last().expect("horizon >= 1")),
            });
            Ok(Outcome::ok(report).with_csv(csv))
        }
        Command::Returning { vec, .. } => {
            let a = load_vector(vec, op.field())?;
            let (t, h) = (
                tol(c, orbit::DEFAULT_TOL)?,
                horizon(c, orbit::DEFAULT_HORIZON),
            );
            let r = orbit::is_returning(&op, &a, t, h)?;
            let isometry = match r.certificate() {
                Some(_) => match orbit::lemma1_isometry_check(&op, &a, t, h) {
                    Ok(v) => json!(v),
                    Err(e) => json!({ "error": e.to_string() }),
                },
                None => Value::Null,
            };
            Ok(Outcome::ok(
                json!({ "returning": r.to_value(), "isometry": isometry }),
            ))
        }
        Command::Attractor { net, vec, .. } | Command::Occasional { net, vec, .. } => {
            let net = load_net(net, op.field())?;
            let samples = samples_or_default(&op, vec.as_deref(), c.seed)?;
            let (t, h) = (
                tol(c, orbit::DEFAULT_TOL)?,
                horizon(c, orbit::DEFAULT_HORIZON),
            );
            let mut csv = String::from("sample,attracted,distance\n");
            let report = if matches!(cmd, Command::Attractor { .. }) {
                let v = orbit::attractor_check(&op, &net, &samples, h, t)?;
                for (i, r) in v.iter().enumerate() {
                    let _ = writeln!(csv, "{i},{},{}", r.attracted, r.tail_max_distance);
                }
                json!({ "attracted": v.iter().all(|r| r.attracted), "mesh": net.mesh(), "verdicts": v })
            } else {
                let v = orbit::occasional_attractor_check(&op, &net, &samples, h, t)?;
                for (i, r) in v.iter().enumerate() {
                    let _ = writeln!(csv, "{i},{},{}", r.occasionally_attracted, r.min_distance);
                }
                json!({
                    "occasionally_attracted": v.iter().all(|r| r.occasionally_attracted),
                    "mesh": net.mesh(),
                    "verdicts": v,
                })
            };
            Ok(Outcome::ok(report).with_csv(csv))
        }
        Command::Weyl { lambda, count, .. } => {
            let report = weyl_report(&op, *lambda, *count, tol(c, orbit::DEFAULT_TOL)?)?;
            let mut csv = String::from("n,residual\n");
            for (i, r) in report.residuals.iter().enumerate() {
                let _ = writeln!(csv, "{},{r}", i + 1);
            }
            Ok(Outcome::ok(report.to_value()).with_csv(csv))
        }
        Command::Falsify { net, vec, .. } => {
            let net = load_net(net, op.field())?;
            let probes = samples_or_default(&op, vec.as_deref(), c.seed)?;
            let f = weyl::theorem1_falsify(&op, &net, &probes, horizon(c, orbit::DEFAULT_HORIZON))?;
            let status = match f {
                Falsification::Witness { .. } => EXIT_OK,
                Falsification::NetSurvives { .. } => EXIT_INCONCLUSIVE,
            };
            Ok(Outcome {
                report: f.to_value(),
                csv: None,
                status,
            })
        }
        Command::Semigroup {
            net,
            vec,
            dt,
            count,
            ..
        } => semigroup_report(&op, c, net.as_deref(), vec.as_deref(), *dt, *count),
        Command::Supercyclic { vec, targets, .. } => {
            let k = load_vector(vec, op.field())?;
            let targets = supercyclic::unit_targets(&op, *targets, c.seed);
            let v = supercyclic::supercyclic_probe(
                &op,
                &k,
                &targets,
                horizon(c, orbit::DEFAULT_HORIZON),
                tol(c, DENSITY_TOL)?,
            )?;
            Ok(Outcome::ok(v.to_value()).with_csv(density_csv(&v)))
        }
        Command::CompactSupercyclic { net, targets, .. } => {
            let net = load_net(net, op.field())?;
            let targets = supercyclic::unit_targets(&op, *targets, c.seed);
            let v = supercyclic::compact_supercyclic_probe(
                &op,
                &net,
                &targets,
                horizon(c, orbit::DEFAULT_HORIZON),
                tol(c, DENSITY_TOL)?,
            )?;
            Ok(Outcome::ok(v.to_value()).with_csv(density_csv(&v)))
        }
        Command::Theorem4 { vec, .. } => {
            let k = load_vector(vec, op.field())?;
            let r = supercyclic::theorem4_pipeline(
                &op,
                &k,
                horizon(c, orbit::DEFAULT_HORIZON),
                tol(c, DENSITY_TOL)?,
            )?;
            Ok(Outcome::ok(r.to_value()))
        }
    }
}

fn density_csv(v: &supercyclic::SupercyclicityVerdict) -> String {
    let mut csv = String::from("target,n,residual\n");
    for (i, e) in v.evidence.iter().enumerate() {
        let _ = writeln!(csv, "{i},{},{}", e.n, e.residual);
    }
    csv
}

/// Unit shifts use disjoint geometric windows; finite operators use the
/// singular structure of `T − λ`. A real operator is complexified for
/// non-real `λ`.
fn weyl_report(
    op: &OperatorSpec,
    lambda: C64,
    count: usize,
    threshold: f64,
) -> Result<weyl::WeylSequenceReport> {
    if let OperatorKind::Shift { direction, weights } = op.kind() {
        let unit = matches!(weights, Weights::Constant(w) if *w == C64::new(1.0, 0.0));
        if unit
            && matches!(
                direction,
                ShiftDirection::Forward | ShiftDirection::Bilateral
            )
        {
            return weyl::weyl_sequence_shift(*direction, lambda, count);
        }
        return Err(Error::InvalidArgument(
            "Weyl sequences are built for unit forward or bilateral shifts and finite operators"
                .into(),
        ));
    }
    if op.field() == opdyn::operator::ScalarField::Real && lambda.im != 0.0 {
        return weyl::weyl_sequence_dense(&complexify(op)?, lambda, threshold);
    }
    weyl::weyl_sequence_dense(op, lambda, threshold)
}

fn semigroup_report(
    op: &OperatorSpec,
    c: &Common,
    net: Option<&std::path::Path>,
    vec: Option<&std::path::Path>,
    dt: Option<f64>,
    count: usize,
) -> Result<Outcome> {
    let s = SemigroupSpec::from_operator(op)?;
    let law = SemigroupSample::new(&s, &[0.0, 0.25, 0.5, 1.0, 2.0, 3.5])?.law_defect(&s)?;
    let mut report = json!({
        "bound": s.bound(),
        "generator_norm": s.generator_norm(),
        "law_defect": law,
    });
    let mut csv = None;
    if let Some(p) = net {
        let k = load_net(p, s.field())?;
        let tilde = semigroup::tilde_net(&s, &k, dt.unwrap_or(semigroup::DEFAULT_DT))?;
        report["tilde_net"] = tilde.to_value();
    }
    if let Some(p) = vec {
        let x = load_vector(p, s.field())?;
        // The attracting subspace of the flow is the peripheral part of T_1.
        let t1 = OperatorSpec::dense(s.field(), semigroup::semigroup_at(&s, 1.0)?)?;
        let dec = spectral::vu_sine_decompose(&t1, DEFAULT_PERIPHERAL_TOL)?;
        let t_max = horizon(c, 64) as f64;
        let count = count.max(1);
        let times: Vec<f64> = (0..count)
            .map(|j| 0.5 * t_max * (1.0 + j as f64 / count as f64))
            .collect();
        let v = semigroup::continuous_attraction_check(
            &s,
            &dec.l_basis,
            &x,
            &times,
            tol(c, orbit::DEFAULT_TOL)?,
        )?;
        let mut rows = String::from("t,beta,distance\n");
        for d in &v.distances {
            let _ = writeln!(rows, "{},{},{}", d.t, d.beta, d.distance);
        }
        csv = Some(rows);
        report["attraction"] = v.to_value();
        report["dim_L"] = json!(dec.dim_l());
    }
    Ok(Outcome {
        report,
        csv,
        status: EXIT_OK,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use opdyn::orbit::CompactNet;

    fn segment(v: &SparseVector, steps: usize) -> CompactNet {
        CompactNet::scalar_multiples(v, opdyn::operator::BaseNorm::L2, steps).unwrap()
    }

    #[test]
    fn weyl_dispatch_complexifies_real_rotation() {
        let op = OperatorSpec::rotation(1.0).unwrap();
        let r = weyl_report(&op, C64::from_polar(1.0, 1.0), 1, 1e-6).unwrap();
        assert!(r.residuals[0] < 1e-12);
    }

    #[test]
    fn weyl_dispatch_rejects_weighted_shift() {
        let op = OperatorSpec::shift(
            ShiftDirection::Forward,
            Weights::Constant(C64::new(0.5, 0.0)),
        )
        .unwrap();
        assert!(matches!(
            weyl_report(&op, C64::new(0.1, 0.0), 2, 1e-6),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn density_csv_has_a_row_per_target() {
        let op = OperatorSpec::rotation(1.0).unwrap();
        let k = SparseVector::basis(op.field(), 0);
        let net = segment(&k, 2);
        let targets = supercyclic::unit_targets(&op, 3, 1);
        let v = supercyclic::compact_supercyclic_probe(&op, &net, &targets, 10, 0.5).unwrap();
        assert_eq!(density_csv(&v).lines().count(), 1 + targets.len());
    }
}
