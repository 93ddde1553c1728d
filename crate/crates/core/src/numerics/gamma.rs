//! Complex log-gamma by the shifted Stirling series with reflection.

use std::sync::OnceLock;

use rug::{Complex, Float, Rational};

use super::{abs, ensure_finite, is_finite, pi, principal_ln, Precision};
use crate::error::{Error, PoleHit, PoleKind, Result};

/// Number of Stirling coefficients B_2j / (2j(2j-1)) kept in the table.
const STIRLING_TERMS: usize = 160;

/// `B_2j / (2j (2j - 1))` for `j = 1..=STIRLING_TERMS`, exact.
fn stirling_coefficients() -> &'static [Rational] {
    static TABLE: OnceLock<Vec<Rational>> = OnceLock::new();
    TABLE.get_or_init(|| {
        // Even Bernoulli numbers from sum_{k=0}^{n} C(n+1, k) B_k = 0.
        let mut even: Vec<Rational> = vec![Rational::from(1)];
        let b1 = Rational::from((-1, 2));
        let mut coeffs = Vec::with_capacity(STIRLING_TERMS);
        for j in 1..=STIRLING_TERMS as u32 {
            let n = 2 * j;
            let mut acc = Rational::from(1) + Rational::from(n + 1) * &b1;
            for (i, b) in even.iter().enumerate().skip(1) {
                let binom = rug::Integer::from(rug::Integer::binomial_u(n + 1, 2 * i as u32));
                acc += Rational::from(binom) * b;
            }
            let b_n = -acc / Rational::from(n + 1);
            coeffs.push(&b_n / Rational::from(n * (n - 1)));
            even.push(b_n);
        }
        coeffs
    })
}

/// Log-gamma: analytic continuation of `ln Γ` for `Re(w) ≥ 1/2`, obtained
/// for `Re(w) < 1/2` through the reflection formula
/// `ln Γ(w) = ln π - ln sin(πw) - ln Γ(1-w)`.
///
/// Rejects arguments within `2^(-P/2)` of a non-positive integer.
pub fn log_gamma(w: &Complex, prec: Precision) -> Result<Complex> {
    if !is_finite(w) {
        return Err(Error::NonFinite("log_gamma argument"));
    }
    let work = prec.plus(32);
    let half = Float::with_val(16, 0.5);
    let out = if *w.real() < half {
        let k = w.real().clone().round();
        if k <= 0 {
            let d = Complex::with_val(work.bits(), w - &k);
            let dist = abs(&d);
            if dist < prec.guard_threshold() {
                let hit = PoleHit::new(PoleKind::Gamma, dist.to_f64())
                    .with_detail(format!("near {}", k.to_f64()));
                return Err(Error::PoleProximity(hit));
            }
        }
        let pi = pi(work);
        let pw = Complex::with_val(work.bits(), w * &pi);
        let sin_pw = Complex::with_val(work.bits(), pw.sin_ref());
        let reflected = Complex::with_val(work.bits(), 1 - w);
        let mut r = Complex::with_val(work.bits(), pi.ln_ref());
        r -= principal_ln(&sin_pw, work)?;
        r -= stirling_shifted(&reflected, work);
        r
    } else {
        stirling_shifted(w, work)
    };
    ensure_finite(Complex::with_val(prec.bits(), out), "log_gamma")
}

/// Stirling series after shifting the argument to `|v| ≥ R`, `R ≈ bits/4`,
/// where the asymptotic series reaches working precision in a few dozen terms.
fn stirling_shifted(w: &Complex, prec: Precision) -> Complex {
    let bits = prec.bits();
    let mut radius = f64::from(bits) / 4.0 + 8.0;
    loop {
        if let Some(v) = stirling_with_radius(w, bits, radius) {
            return v;
        }
        radius *= 2.0;
    }
}

fn stirling_with_radius(w: &Complex, bits: u32, radius: f64) -> Option<Complex> {
    let re = w.real().to_f64();
    let shift = if abs(w).to_f64() < radius {
        (radius - re).ceil().max(0.0) as u32
    } else {
        0
    };

    // ln Γ(w) = ln Γ(w + s) - sum_{j<s} ln(w + j). The sum of logs is taken as
    // one log of the product plus the 2π winding recovered from the f64 args.
    let mut shift_log = Complex::with_val(bits, (0, 0));
    let mut v = Complex::with_val(bits, w);
    if shift > 0 {
        let mut prod = Complex::with_val(bits, (1, 0));
        let mut arg_sum = 0.0f64;
        for _ in 0..shift {
            arg_sum += v.imag().to_f64().atan2(v.real().to_f64());
            prod *= &v;
            v += 1;
        }
        shift_log = Complex::with_val(bits, prod.ln_ref());
        let principal_arg = shift_log.imag().to_f64();
        let turns = ((arg_sum - principal_arg) / std::f64::consts::TAU).round();
        if turns != 0.0 {
            let tau = Float::with_val(bits, pi_float(bits) * 2u32);
            *shift_log.mut_imag() += tau * turns;
        }
    }

    // (v - 1/2) ln v - v + ln(2π)/2
    let ln_v = Complex::with_val(bits, v.ln_ref());
    let mut sum = Complex::with_val(bits, &v - 0.5f64) * &ln_v;
    sum -= &v;
    let two_pi = Float::with_val(bits, pi_float(bits) * 2u32);
    sum += Float::with_val(bits, two_pi.ln_ref()) / 2u32;

    let mut eps = Float::with_val(64, 1);
    eps >>= bits + 4;
    let inv = Complex::with_val(bits, v.recip_ref());
    let inv2 = Complex::with_val(bits, inv.square_ref());
    let mut power = inv;
    let scale = abs(&sum).max(&Float::with_val(64, 1)).clone();
    let mut previous: Option<Float> = None;
    for coeff in stirling_coefficients() {
        let term = Complex::with_val(bits, &power * Float::with_val(bits, coeff));
        let size = abs(&term);
        if let Some(prev) = &previous {
            if &size > prev {
                // Asymptotic series started diverging before converging.
                return None;
            }
        }
        sum += &term;
        if size < Float::with_val(64, &eps * &scale) {
            return Some(sum - shift_log);
        }
        previous = Some(size);
        power *= &inv2;
    }
    None
}

fn pi_float(bits: u32) -> Float {
    Float::with_val(bits, rug::float::Constant::Pi)
}
