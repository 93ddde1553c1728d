//! The doubly indexed gamma-ratio product and its term-by-term comparison
//! with the ratio product.
//!
//! Outer factor `k` is
//!
//! ```text
//! prod_{k1=1}^{q}  Γ(k1/q)^2 / ( Γ((k1 - t)/q) Γ((k1 + t)/q) ),   t = z q^-k / π
//! ```
//!
//! assembled from log-gamma values. Gamma arguments are built from the
//! exact rationals `k1/q` and the exact integer `q^k`, with only `z/π`
//! rounded before the division.

use rug::{Complex, Float, Integer};
use serde::Serialize;

use crate::convergence::remainder_model;
use crate::error::{Error, Result};
use crate::numerics::{self, is_zero, log_gamma, Precision};
use crate::product::{self, EvalResult, FormulaId, ProductRequest, RawLog};
use crate::serde_complex;

/// Inner product at one outer index, with the ratio-product factor it is
/// compared against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaTermBreakdown {
    pub k: u32,
    #[serde(serialize_with = "serde_complex::serialize_vec")]
    pub inner_factors: Vec<Complex>,
    #[serde(serialize_with = "serde_complex::serialize")]
    pub product: Complex,
    #[serde(serialize_with = "serde_complex::serialize")]
    pub log_product: Complex,
    #[serde(serialize_with = "serde_complex::serialize")]
    pub matched_ratio_term: Complex,
    /// `|product / matched_ratio_term - 1|`.
    pub ratio_residual: f64,
}

/// `ln` of each inner factor `Γ(k1/q)^2 / (Γ(a) Γ(b))`, `k1 = 1..=q`.
fn inner_factor_logs(z: &Complex, q: u32, k: u32, work: Precision) -> Result<(Vec<Complex>, f64)> {
    let bits = work.bits();
    let qk = Integer::from(Integer::u_pow_u(q, k));
    // t = z / (π q^k)
    let pi = numerics::pi(work);
    let t = Complex::with_val(bits, Complex::with_val(bits, z / &pi) / &qk);
    let mut logs = Vec::with_capacity(q as usize);
    let mut largest = 1.0f64;
    for k1 in 1..=q {
        let c = Complex::with_val(bits, (Float::with_val(bits, k1) / q, 0));
        let a = Complex::with_val(bits, Complex::with_val(bits, k1 - &t) / q);
        let b = Complex::with_val(bits, Complex::with_val(bits, &t + k1) / q);
        let locate = |which: &'static str| {
            move |e: Error| match e {
                Error::PoleProximity(hit) => Error::PoleProximity(
                    hit.at_term(i64::from(k))
                        .with_detail(format!("k1={k1}, {which}")),
                ),
                other => other,
            }
        };
        let lc = log_gamma(&c, work).map_err(locate("gamma(k1/q)"))?;
        let la = log_gamma(&a, work).map_err(locate("gamma((k1 - t)/q)"))?;
        let lb = log_gamma(&b, work).map_err(locate("gamma((k1 + t)/q)"))?;
        for l in [&lc, &la, &lb] {
            largest = largest.max(numerics::abs(l).to_f64());
        }
        let mut f = Complex::with_val(bits, &lc * 2u32);
        f -= &la;
        f -= &lb;
        logs.push(f);
    }
    Ok((logs, largest.log2() + 1.0))
}

/// Log of outer factor `k` for the product-core term generator.
pub(crate) fn inner_log(z: &Complex, q: u32, k: u32, work: Precision) -> Result<RawLog> {
    let (logs, lost_bits) = inner_factor_logs(z, q, k, work)?;
    let mut sum = Complex::with_val(work.bits(), (0, 0));
    for l in &logs {
        sum += l;
    }
    Ok(RawLog {
        log: sum,
        lost_bits,
        flags: Default::default(),
    })
}

/// Inner product over `k1` at outer index `k`, with the matching ratio factor.
pub fn gamma_inner(z: &Complex, q: u32, k: u32, prec: Precision) -> Result<GammaTermBreakdown> {
    if q < 2 {
        return Err(Error::InvalidRequest(format!(
            "q must be at least 2, got {q}"
        )));
    }
    let p = prec.bits();
    let work = prec.plus(32);
    let logs = if is_zero(z) {
        None
    } else {
        Some(inner_factor_logs(z, q, k, work)?.0)
    };
    let ratio_req = ProductRequest::infinite(FormulaId::RatioInf, z.clone(), q, k + 1, prec);
    let matched = product::term_value(&product::term(&ratio_req, k)?, prec);
    let Some(logs) = logs else {
        let one = Complex::with_val(p, (1, 0));
        return Ok(GammaTermBreakdown {
            k,
            inner_factors: vec![one.clone(); q as usize],
            product: one.clone(),
            log_product: Complex::with_val(p, (0, 0)),
            matched_ratio_term: matched,
            ratio_residual: 0.0,
        });
    };
    let mut sum = Complex::with_val(work.bits(), (0, 0));
    let mut factors = Vec::with_capacity(logs.len());
    for l in &logs {
        sum += l;
        factors.push(Complex::with_val(p, l.exp_ref()));
    }
    let product = Complex::with_val(p, sum.exp_ref());
    let ratio_residual = numerics::rel_diff(&product, &matched);
    Ok(GammaTermBreakdown {
        k,
        inner_factors: factors,
        product,
        log_product: Complex::with_val(p, sum),
        matched_ratio_term: matched,
        ratio_residual,
    })
}

/// Threshold `10^(-0.3 P)` under which a gamma factor counts as agreeing with
/// its ratio-product counterpart.
pub fn certification_threshold(prec: Precision) -> f64 {
    10f64.powf(-0.3 * f64::from(prec.bits()))
}

/// Product of the first `terms` outer factors.
///
/// `est_remainder` borrows the ratio-product model only when every factor
/// agrees with the matching ratio factor to [`certification_threshold`].
pub fn gamma_partial(z: &Complex, q: u32, terms: u32, prec: Precision) -> Result<EvalResult> {
    let req = ProductRequest::infinite(FormulaId::GammaInf, z.clone(), q, terms, prec);
    let mut result = product::partial_product(&req)?;
    if is_zero(z) {
        return Ok(result);
    }
    let threshold = certification_threshold(prec);
    let mut certified = true;
    for k in 0..terms {
        let b = gamma_inner(z, q, k, prec)?;
        if b.ratio_residual.is_nan() || b.ratio_residual > threshold {
            certified = false;
            break;
        }
    }
    result.est_remainder = certified.then(|| remainder_model(FormulaId::RatioInf, z, q, terms));
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{complex, rel_diff, sinc_ref};

    fn p() -> Precision {
        Precision::new(113).unwrap()
    }

    /// Gauss multiplication collapses the inner product to sinc(z q^-k); used
    /// here as an independent closed form.
    fn sinc_scaled(z: &Complex, q: u32, k: u32) -> Complex {
        let w = Complex::with_val(300, z / Integer::from(Integer::u_pow_u(q, k)));
        sinc_ref(&w, Precision::new(300).unwrap())
    }

    #[test]
    fn zero_argument_gives_one() {
        let b = gamma_inner(&complex(p(), 0.0, 0.0), 3, 0, p()).unwrap();
        assert_eq!(b.product, complex(p(), 1.0, 0.0));
        assert_eq!(b.inner_factors.len(), 3);
        let r = gamma_partial(&complex(p(), 0.0, 0.0), 2, 10, p()).unwrap();
        assert_eq!(r.value, complex(p(), 1.0, 0.0));
    }

    #[test]
    fn product_of_inner_factors() {
        let z = complex(p(), 1.0, 0.0);
        let b = gamma_inner(&z, 4, 2, p()).unwrap();
        let mut prod = Complex::with_val(113, (1, 0));
        for f in &b.inner_factors {
            prod *= f;
        }
        assert!(rel_diff(&prod, &b.product) < 8.0 * 4.0 * 2f64.powi(-112));
    }

    #[test]
    fn inner_product_is_scaled_sinc() {
        for (re, im, q, k) in [
            (0.7, 0.0, 2, 0),
            (1.0, 0.0, 4, 2),
            (1.0, 0.5, 3, 1),
            (-1.5, 2.0, 5, 0),
        ] {
            let z = complex(p(), re, im);
            let b = gamma_inner(&z, q, k, p()).unwrap();
            assert!(
                rel_diff(&b.product, &sinc_scaled(&z, q, k)) < 1e-31,
                "z={re}+{im}i q={q} k={k}"
            );
        }
    }

    #[test]
    fn ratio_mismatch_is_reported_not_hidden() {
        // At z = π/4, q = 2, k = 0 the ratio factor is sin(π/4) csc(π/8) / 2,
        // whereas the gamma factor is sinc(π/4).
        let pi = Float::with_val(113, rug::float::Constant::Pi);
        let z = Complex::with_val(113, (pi / 4u32, 0));
        let b = gamma_inner(&z, 2, 0, p()).unwrap();
        let expected_ratio = {
            let x = Float::with_val(200, rug::float::Constant::Pi) / 4u32;
            let half = Float::with_val(200, &x / 2u32);
            Float::with_val(200, x.sin_ref()) / (Float::with_val(200, half.sin_ref()) * 2u32)
        };
        assert!(
            rel_diff(
                &b.matched_ratio_term,
                &Complex::with_val(200, (expected_ratio, 0))
            ) < 1e-32
        );
        assert!(b.ratio_residual > 1e-3);
        assert!((b.ratio_residual - rel_diff(&b.product, &b.matched_ratio_term)).abs() < 1e-15);
    }

    #[test]
    fn partial_product_without_certification_has_no_remainder() {
        let z = complex(p(), 1.0, 0.5);
        let r = gamma_partial(&z, 3, 10, p()).unwrap();
        assert_eq!(r.est_remainder, None);
        // Product of the scaled sincs, the closed form of the partial product.
        let mut expect = Complex::with_val(300, (1, 0));
        for k in 0..10 {
            expect *= sinc_scaled(&z, 3, k);
        }
        assert!(rel_diff(&r.value, &expect) < 1e-30);
        // Compared with sinc(z) itself the product does not converge.
        assert!(rel_diff(&r.value, &sinc_ref(&z, p())) > 1e-3);
    }

    #[test]
    fn gamma_pole_is_located() {
        // t = z/π = 2 with q = 2, k = 0 makes (k1 - t)/q = 0 at k1 = 2.
        let pi = Float::with_val(200, rug::float::Constant::Pi);
        let z = Complex::with_val(200, (pi * 2u32, 0));
        match gamma_inner(&z, 2, 0, p()) {
            Err(Error::PoleProximity(hit)) => {
                assert_eq!(hit.term, Some(0));
                assert!(hit.detail.unwrap().contains("k1=2"));
            }
            other => panic!("expected pole, got {other:?}"),
        }
    }
}
