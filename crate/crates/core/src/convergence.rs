//! Truncation control and convergence-rate measurement for the infinite
//! products.
//!
//! The remainder models come from the telescoped closed forms. For the ratio,
//! Viète and cosine-sum families the `N`-term product divided by `sinc z` is
//! `w / sin w` with `w = z b^-N`, so the relative remainder is about
//! `|z|^2 b^(-2N) / 6`. For the exponent tower it is `(w / sin w)^(q^N)`,
//! about `|z|^2 q^-N / 6`.

use std::ops::RangeInclusive;

use rug::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma_product;
use crate::numerics::{self, is_zero, sinc_ref, Precision};
use crate::product::{
    self, tower_exponent_bits, EvalResult, Flags, FormulaId, ProductRequest, MAX_TERMS,
    MAX_TOWER_EXPONENT_BITS,
};
use crate::serde_complex;

/// Minimum number of usable samples for a rate fit.
pub const MIN_FIT_SAMPLES: usize = 5;

/// Base `b` of the geometric remainder `b^(-2N)` (or `q^-N` for the tower).
fn remainder_base(formula: FormulaId, q: u32) -> Option<f64> {
    match formula {
        FormulaId::Viete => Some(2.0),
        FormulaId::RatioInf | FormulaId::GammaInf | FormulaId::ExpTowerInf => Some(f64::from(q)),
        FormulaId::CosineSumInf => Some(f64::from(2 * q)),
        _ => None,
    }
}

/// Order-of-magnitude estimate of `|P_N / sinc z - 1|`; zero for finite families.
pub fn remainder_model(formula: FormulaId, z: &Complex, q: u32, n: u32) -> f64 {
    let Some(b) = remainder_base(formula, q) else {
        return 0.0;
    };
    let z2 = numerics::abs(z).to_f64().powi(2);
    let decay = if formula == FormulaId::ExpTowerInf {
        b.powi(-(n as i32))
    } else {
        b.powi(-2 * n as i32)
    };
    z2 * decay / 6.0
}

/// Predicted slope of `ln residual` against `N`.
pub fn expected_log_rate(formula: FormulaId, q: u32) -> Option<f64> {
    let b = remainder_base(formula, q)?;
    match formula {
        FormulaId::ExpTowerInf => Some(-b.ln()),
        FormulaId::GammaInf => None,
        _ => Some(-2.0 * b.ln()),
    }
}

/// Largest truncation length allowed for a family.
pub fn max_terms_for(formula: FormulaId, q: u32) -> u32 {
    if formula != FormulaId::ExpTowerInf {
        return MAX_TERMS;
    }
    (0..=MAX_TERMS)
        .take_while(|&n| tower_exponent_bits(q, n) <= MAX_TOWER_EXPONENT_BITS)
        .last()
        .unwrap_or(0)
}

fn evaluate(
    formula: FormulaId,
    z: &Complex,
    q: u32,
    n: u32,
    prec: Precision,
) -> Result<EvalResult> {
    if formula == FormulaId::GammaInf {
        return gamma_product::gamma_partial(z, q, n, prec);
    }
    product::partial_product(&ProductRequest::infinite(formula, z.clone(), q, n, prec))
}

/// `|value / sinc z - 1|` with `sinc z` taken at twice the working precision.
pub fn residual_vs_sinc(value: &Complex, z: &Complex, prec: Precision) -> f64 {
    let reference = sinc_ref(z, prec.doubled());
    numerics::rel_diff(value, &reference)
}

/// Evaluates with the smallest `N` whose modeled remainder is at most `tol / 100`.
pub fn run_to_tolerance(
    formula: FormulaId,
    z: &Complex,
    q: u32,
    tol: f64,
    max_terms: u32,
    prec: Precision,
) -> Result<EvalResult> {
    if formula.is_finite() {
        return Err(Error::InvalidRequest(format!(
            "{formula} is a finite product"
        )));
    }
    let floor = prec.floor();
    if tol.is_nan() || tol <= floor {
        return Err(Error::BelowPrecisionFloor { tol, floor });
    }
    if is_zero(z) {
        return Ok(EvalResult::unit(prec, 0, Flags::new()));
    }
    let cap = max_terms.min(max_terms_for(formula, q));
    let target = tol / 100.0;
    let n = (1..=cap)
        .find(|&n| remainder_model(formula, z, q, n) <= target)
        .ok_or(Error::ToleranceUnreachable {
            tol,
            max_terms: cap,
            achievable: remainder_model(formula, z, q, cap),
        })?;
    let mut result = evaluate(formula, z, q, n, prec)?;
    // The gamma product keeps whatever its own certification decided.
    if formula != FormulaId::GammaInf {
        result.est_remainder = Some(remainder_model(formula, z, q, n));
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub n: u32,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedSample {
    pub n: u32,
    pub reason: String,
}

/// Residual series and fitted geometric rate for one family and argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub formula: FormulaId,
    #[serde(serialize_with = "serde_complex::serialize")]
    pub z: Complex,
    pub q: u32,
    pub precision_bits: u32,
    pub samples: Vec<Sample>,
    pub excluded: Vec<ExcludedSample>,
    pub fitted_log_rate: f64,
    pub fitted_intercept: f64,
    pub expected_log_rate: f64,
    pub rate_rel_error: f64,
}

/// Ordinary least-squares slope and intercept of `y` against `x`.
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points
        .iter()
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, mean_y - slope * mean_x)
}

/// Fits `ln residual = a + rate * N` over `n_range`, excluding pole-skipped
/// truncations and residuals at the precision floor `2^(-P+24)`.
pub fn fit_rate(
    formula: FormulaId,
    z: &Complex,
    q: u32,
    n_range: RangeInclusive<u32>,
    prec: Precision,
) -> Result<ConvergenceReport> {
    let expected = expected_log_rate(formula, q).ok_or(Error::UnsupportedFormula(formula))?;
    let floor = prec.floor();
    let mut samples = Vec::new();
    let mut excluded = Vec::new();
    for n in n_range {
        match evaluate(formula, z, q, n, prec) {
            Ok(r) => {
                let residual = residual_vs_sinc(&r.value, z, prec);
                if residual > floor && residual.is_finite() {
                    samples.push(Sample { n, residual });
                } else {
                    excluded.push(ExcludedSample {
                        n,
                        reason: format!("residual {residual:e} at precision floor"),
                    });
                }
            }
            Err(e @ (Error::PoleProximity(_) | Error::RangeCap(_))) => {
                excluded.push(ExcludedSample {
                    n,
                    reason: e.to_string(),
                })
            }
            Err(e) => return Err(e),
        }
    }
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples {
            usable: samples.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let points: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (f64::from(s.n), s.residual.ln()))
        .collect();
    let (slope, intercept) = least_squares(&points);
    Ok(ConvergenceReport {
        formula,
        z: z.clone(),
        q,
        precision_bits: prec.bits(),
        samples,
        excluded,
        fitted_log_rate: slope,
        fitted_intercept: intercept,
        expected_log_rate: expected,
        rate_rel_error: (slope - expected).abs() / expected.abs(),
    })
}

/// Smallest `N` whose actual residual against `sinc z` is at most `target`,
/// found by extending the product one factor at a time.
pub fn terms_for_accuracy(
    formula: FormulaId,
    z: &Complex,
    q: u32,
    target: f64,
    prec: Precision,
) -> Result<(u32, f64)> {
    if formula.is_finite() {
        return Err(Error::InvalidRequest(format!(
            "{formula} is a finite product"
        )));
    }
    let floor = prec.floor();
    if target.is_nan() || target <= floor {
        return Err(Error::BelowPrecisionFloor { tol: target, floor });
    }
    let cap = max_terms_for(formula, q);
    let reference = sinc_ref(z, prec.doubled());
    let req = ProductRequest::infinite(formula, z.clone(), q, cap, prec);
    let bits = prec.plus(16).bits();
    let mut log = Complex::with_val(bits, (0, 0));
    let mut residual = numerics::rel_diff(&Complex::with_val(bits, (1, 0)), &reference);
    for n in 0..=cap {
        if residual <= target {
            return Ok((n, residual));
        }
        if n == cap {
            break;
        }
        let t = product::term(&req, n)?;
        log += &t.log_value;
        let value = Complex::with_val(prec.bits(), log.exp_ref());
        residual = numerics::rel_diff(&value, &reference);
    }
    Err(Error::ToleranceUnreachable {
        tol: target,
        max_terms: cap,
        achievable: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::complex;
    use rug::Float;

    fn p() -> Precision {
        Precision::new(113).unwrap()
    }

    #[test]
    fn viete_model_matches_oracle_residual() {
        let pi = Float::with_val(113, rug::float::Constant::Pi);
        let z = Complex::with_val(113, (pi / 2u32, 0));
        let model = remainder_model(FormulaId::Viete, &z, 2, 10);
        assert!((model - 3.9e-7).abs() < 0.1e-7);
        let req = ProductRequest::infinite(FormulaId::Viete, z.clone(), 2, 10, p());
        let oracle = product::oracle_partial(&req).unwrap();
        let actual = residual_vs_sinc(&oracle, &z, p());
        assert!(actual / model > 0.9 && actual / model < 1.1);
    }

    #[test]
    fn tower_model_matches_oracle_residual() {
        let z = complex(p(), 1.0, 0.0);
        let model = remainder_model(FormulaId::ExpTowerInf, &z, 2, 10);
        assert!((model - 1.6e-4).abs() < 0.05e-4);
        let req = ProductRequest::infinite(FormulaId::ExpTowerInf, z.clone(), 2, 10, p());
        let actual = residual_vs_sinc(&product::oracle_partial(&req).unwrap(), &z, p());
        assert!(actual / model > 0.9 && actual / model < 1.1);
    }

    #[test]
    fn zero_argument_model_is_zero() {
        assert_eq!(
            remainder_model(FormulaId::RatioInf, &complex(p(), 0.0, 0.0), 3, 4),
            0.0
        );
        let r =
            run_to_tolerance(FormulaId::Viete, &complex(p(), 0.0, 0.0), 2, 1e-3, 48, p()).unwrap();
        assert_eq!(r.terms_used, 0);
        assert_eq!(r.value, complex(p(), 1.0, 0.0));
    }

    #[test]
    fn ratio_to_tolerance() {
        let pi = Float::with_val(113, rug::float::Constant::Pi);
        let z = Complex::with_val(113, (pi / 2u32, 0));
        let r = run_to_tolerance(FormulaId::RatioInf, &z, 2, 1e-12, 48, p()).unwrap();
        assert!((20..=24).contains(&r.terms_used), "N = {}", r.terms_used);
        assert!(residual_vs_sinc(&r.value, &z, p()) < 1e-12);
        assert!(r.est_remainder.unwrap() <= 1e-14);
    }

    #[test]
    fn viete_imaginary_argument() {
        let z = complex(p(), 0.0, 3.0);
        let r = run_to_tolerance(FormulaId::Viete, &z, 2, 1e-10, 48, p()).unwrap();
        // sin(3i)/(3i) = sinh(3)/3
        let expect = Complex::with_val(200, (Float::with_val(200, 3).sinh() / 3u32, 0));
        assert!(numerics::rel_diff(&r.value, &expect) < 1e-10);
    }

    #[test]
    fn tolerance_errors() {
        let z = complex(p(), 1.0, 0.0);
        assert!(matches!(
            run_to_tolerance(FormulaId::RatioInf, &z, 2, 1e-40, 48, p()),
            Err(Error::BelowPrecisionFloor { .. })
        ));
        assert!(matches!(
            run_to_tolerance(FormulaId::ExpTowerInf, &z, 2, 1e-20, 10, p()),
            Err(Error::ToleranceUnreachable { max_terms: 10, .. })
        ));
    }

    #[test]
    fn least_squares_exact_line() {
        let pts: Vec<(f64, f64)> = (0..6)
            .map(|i| (f64::from(i), 2.5 - 0.75 * f64::from(i)))
            .collect();
        let (slope, intercept) = least_squares(&pts);
        assert!((slope + 0.75).abs() < 1e-14);
        assert!((intercept - 2.5).abs() < 1e-14);
    }

    #[test]
    fn fit_needs_samples() {
        let z = complex(p(), 0.0, 0.0);
        assert!(matches!(
            fit_rate(FormulaId::Viete, &z, 2, 2..=10, p()),
            Err(Error::InsufficientSamples { usable: 0, .. })
        ));
    }

    #[test]
    fn viete_rate() {
        let pi = Float::with_val(113, rug::float::Constant::Pi);
        let z = Complex::with_val(113, (pi / 2u32, 0));
        let r = fit_rate(FormulaId::Viete, &z, 2, 2..=14, p()).unwrap();
        assert!(r.rate_rel_error < 0.02, "{r:?}");
    }

    #[test]
    fn cosine_sum_terms_needed() {
        // Residual |z|^2 36^-N / 6 <= 1e-10 near |z| = 1 needs about six factors.
        let z = complex(p(), 0.6, 0.8);
        let (n, residual) = terms_for_accuracy(FormulaId::CosineSumInf, &z, 3, 1e-10, p()).unwrap();
        assert!((5..=9).contains(&n), "n = {n}");
        assert!(residual <= 1e-10);
    }
}
