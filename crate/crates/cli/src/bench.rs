//! Terms-to-accuracy benchmark over a seeded sample of arguments.
//!
//! Arguments are drawn with modulus uniform in `[0.5, 1.5]` and argument
//! uniform in `[-π, π)`, from a ChaCha stream so the sample set depends only
//! on the seed. Term counts are measured against `sinc z`, not predicted.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Complex;
use serde::Serialize;
use trigprod::convergence::terms_for_accuracy;
use trigprod::gamma_product::gamma_partial;
use trigprod::numerics::complex;
use trigprod::product::partial_product;
use trigprod::serde_complex;
use trigprod::{Error, FormulaId, Precision, ProductRequest};

use crate::args::{BenchArgs, Format};
use crate::output::{self, csv_writer};
use crate::{input, CliError, EXIT_OK};

pub const DEFAULT_SEED: u64 = 0x7269_6770_726f_6431;
pub const MODULUS_RANGE: (f64, f64) = (0.5, 1.5);

/// The `count` sample arguments for `seed`.
pub fn sample_points(seed: u64, count: u32, prec: Precision) -> Vec<Complex> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let r = rng.gen_range(MODULUS_RANGE.0..=MODULUS_RANGE.1);
            let theta = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            complex(prec, r * theta.cos(), r * theta.sin())
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FormulaBench {
    pub formula: FormulaId,
    pub q: u32,
    pub samples_measured: usize,
    /// Samples rejected by a pole guard or unable to reach the target.
    pub samples_skipped: usize,
    pub skip_reasons: Vec<String>,
    pub median_terms: Option<f64>,
    pub min_terms: Option<u32>,
    pub max_terms: Option<u32>,
    pub terms: Vec<u32>,
    /// Median wall time of one evaluation at the measured truncation, microseconds.
    pub median_eval_micros: Option<f64>,
    /// Wall time of the whole search for this formula, milliseconds.
    pub total_wall_millis: f64,
    pub precision_retries: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub sampler: String,
    pub target_accuracy: f64,
    pub precision_bits: u32,
    #[serde(serialize_with = "serde_complex::serialize_vec")]
    pub samples: Vec<Complex>,
    pub formulas: Vec<FormulaBench>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    })
}

/// Measures every formula over the sample set. Fails only for arguments
/// that make the whole benchmark meaningless (finite formulas, a target below
/// the precision floor).
pub fn run_bench(
    formulas: &[FormulaId],
    q: u32,
    target: f64,
    samples: u32,
    seed: u64,
    prec: Precision,
) -> Result<BenchReport, Error> {
    let floor = prec.floor();
    if target.is_nan() || target <= floor {
        return Err(Error::BelowPrecisionFloor { tol: target, floor });
    }
    if let Some(f) = formulas.iter().find(|f| f.is_finite()) {
        return Err(Error::InvalidRequest(format!("{f} is a finite product")));
    }
    if q < 2 {
        return Err(Error::InvalidRequest(format!(
            "q must be at least 2, got {q}"
        )));
    }
    let points = sample_points(seed, samples, prec);
    let mut out = Vec::with_capacity(formulas.len());
    for &formula in formulas {
        let start = Instant::now();
        let mut terms = Vec::new();
        let mut eval_micros = Vec::new();
        let mut skip_reasons = Vec::new();
        let mut retries = 0;
        for z in &points {
            match terms_for_accuracy(formula, z, q, target, prec) {
                Ok((n, _)) => {
                    let t0 = Instant::now();
                    let r = if formula == FormulaId::GammaInf {
                        gamma_partial(z, q, n, prec)
                    } else {
                        partial_product(&ProductRequest::infinite(formula, z.clone(), q, n, prec))
                    };
                    eval_micros.push(t0.elapsed().as_secs_f64() * 1e6);
                    retries += r.map(|r| r.precision_retries).unwrap_or(0);
                    terms.push(n);
                }
                Err(
                    e @ (Error::PoleProximity(_)
                    | Error::ToleranceUnreachable { .. }
                    | Error::RangeCap(_)),
                ) => skip_reasons.push(e.to_string()),
                Err(e) => return Err(e),
            }
        }
        let mut as_f64: Vec<f64> = terms.iter().map(|&n| f64::from(n)).collect();
        out.push(FormulaBench {
            formula,
            q,
            samples_measured: terms.len(),
            samples_skipped: skip_reasons.len(),
            skip_reasons,
            median_terms: median(&mut as_f64),
            min_terms: terms.iter().copied().min(),
            max_terms: terms.iter().copied().max(),
            terms,
            median_eval_micros: median(&mut eval_micros),
            total_wall_millis: start.elapsed().as_secs_f64() * 1e3,
            precision_retries: retries,
        });
    }
    Ok(BenchReport {
        seed,
        sampler: format!(
            "ChaCha8 seed {seed}; |z| uniform in [{}, {}], arg z uniform in [-pi, pi)",
            MODULUS_RANGE.0, MODULUS_RANGE.1
        ),
        target_accuracy: target,
        precision_bits: prec.bits(),
        samples: points,
        formulas: out,
    })
}

#[derive(Debug, Serialize)]
struct BenchEcho {
    formulas: Vec<FormulaId>,
    q: u32,
    target_accuracy: f64,
    samples: u32,
    seed: u64,
}

pub fn command(
    a: &BenchArgs,
    prec: Precision,
    fmt: Format,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let formulas = input::formula_list(&a.formulas)?;
    if a.samples == 0 {
        return Err(CliError::usage("--samples must be positive"));
    }
    let report = run_bench(&formulas, a.q, a.target_accuracy, a.samples, a.seed, prec)?;
    let echo = BenchEcho {
        formulas,
        q: a.q,
        target_accuracy: a.target_accuracy,
        samples: a.samples,
        seed: a.seed,
    };
    let mut warnings =
        vec!["wall times vary between runs; term counts are deterministic".to_string()];
    for f in &report.formulas {
        if f.samples_skipped > 0 {
            warnings.push(format!(
                "{}: {} samples skipped",
                f.formula.tag(),
                f.samples_skipped
            ));
        }
    }
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    match fmt {
        Format::Json => output::write_json(out, "bench", prec.bits(), &echo, &report, warnings)?,
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record([
                "formula",
                "q",
                "samples_measured",
                "samples_skipped",
                "median_terms",
                "min_terms",
                "max_terms",
                "median_eval_micros",
                "total_wall_millis",
                "precision_retries",
                "seed",
                "target_accuracy",
            ])?;
            for f in &report.formulas {
                w.write_record([
                    f.formula.tag().to_string(),
                    f.q.to_string(),
                    f.samples_measured.to_string(),
                    f.samples_skipped.to_string(),
                    opt(f.median_terms),
                    f.min_terms.map(|v| v.to_string()).unwrap_or_default(),
                    f.max_terms.map(|v| v.to_string()).unwrap_or_default(),
                    opt(f.median_eval_micros),
                    f.total_wall_millis.to_string(),
                    f.precision_retries.to_string(),
                    report.seed.to_string(),
                    format!("{:e}", report.target_accuracy),
                ])?;
            }
            w.flush()?;
        }
        Format::Text => {
            writeln!(
                out,
                "target {:e}, {} samples, {}",
                report.target_accuracy,
                report.samples.len(),
                report.sampler
            )?;
            for f in &report.formulas {
                writeln!(
                    out,
                    "{:<16} q={} median terms {:>5}  range {}..{}  eval {} us  retries {}  skipped {}",
                    f.formula.tag(),
                    f.q,
                    opt(f.median_terms),
                    f.min_terms.map(|v| v.to_string()).unwrap_or_default(),
                    f.max_terms.map(|v| v.to_string()).unwrap_or_default(),
                    f.median_eval_micros.map(|v| format!("{v:.1}")).unwrap_or_default(),
                    f.precision_retries,
                    f.samples_skipped,
                )?;
            }
            writeln!(out, "precision {} bits", prec.bits())?;
            for w in &warnings {
                writeln!(out, "warning: {w}")?;
            }
        }
    }
    Ok(EXIT_OK)
}
