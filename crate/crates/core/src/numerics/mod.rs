//! Precision-parameterized complex arithmetic and the special functions the
//! product formulas are built from.
//!
//! Values are [`rug::Complex`] (MPC) numbers. Every public function takes a
//! [`Precision`] and returns a value rounded to it; internally the work is
//! carried out with guard bits so that results are within a few ulp.
//!
//! Pole guards reject an argument `w` for `csc`/`cot` (or a logarithm of
//! `sin`) when `|sin w| < 2^(-P/2) * |w|`, and for `tan` (or a logarithm of
//! `cos`) when `|cos w| < 2^(-P/2) * max(1, |w|)`. The scale factor makes the
//! guard measure the relative distance to the pole, which is what limits the
//! accuracy of the reciprocal: the zero of `sin` at the origin is exact in
//! floating point and is only rejected when `w` is exactly zero.

mod gamma;

use std::cmp::Ordering;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Assign, Complex, Float, Integer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, PoleHit, PoleKind, Result};

pub use gamma::log_gamma;

/// A complex number at some binary precision. Components are always finite.
pub type ComplexValue = Complex;

/// Binary mantissa precision used for an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Precision(u32);

impl Precision {
    pub const MIN_BITS: u32 = 53;
    pub const DEFAULT_BITS: u32 = 113;
    pub const MAX_BITS: u32 = 1 << 16;
    /// Upper end of the automatic precision ladder.
    pub const LADDER_CAP_BITS: u32 = 1024;
    /// Extra bits carried by π for argument reductions.
    pub const PI_GUARD_BITS: u32 = 32;

    pub fn new(bits: u32) -> Result<Self> {
        if (Self::MIN_BITS..=Self::MAX_BITS).contains(&bits) {
            Ok(Precision(bits))
        } else {
            Err(Error::InvalidPrecision(bits))
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// Same precision widened by `extra` bits.
    pub fn plus(self, extra: u32) -> Self {
        Precision((self.0 + extra).min(Self::MAX_BITS))
    }

    pub fn doubled(self) -> Self {
        Precision((self.0 * 2).min(Self::MAX_BITS))
    }

    /// `2^(-P/2)`, the pole guard threshold.
    pub fn guard_threshold(self) -> Float {
        let mut t = Float::with_val(64, 1);
        t >>= self.0 / 2;
        t
    }

    /// `2^(-P+24)`: residuals below this are at the precision floor.
    pub fn floor(self) -> f64 {
        2f64.powi(24 - self.0 as i32)
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision(Self::DEFAULT_BITS)
    }
}

impl TryFrom<u32> for Precision {
    type Error = Error;

    fn try_from(bits: u32) -> Result<Self> {
        Precision::new(bits)
    }
}

impl From<Precision> for u32 {
    fn from(p: Precision) -> u32 {
        p.0
    }
}

/// The five circular functions every product factor is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrigFn {
    Sin,
    Cos,
    Tan,
    Cot,
    Csc,
}

/// π at `prec` plus the guard bits used for argument reduction.
pub fn pi(prec: Precision) -> Float {
    Float::with_val(prec.bits() + Precision::PI_GUARD_BITS, Constant::Pi)
}

pub fn complex(prec: Precision, re: f64, im: f64) -> Complex {
    Complex::with_val(prec.bits(), (re, im))
}

pub fn is_zero(w: &Complex) -> bool {
    w.real().is_zero() && w.imag().is_zero()
}

pub fn is_finite(w: &Complex) -> bool {
    w.real().is_finite() && w.imag().is_finite()
}

pub fn ensure_finite(w: Complex, context: &'static str) -> Result<Complex> {
    if is_finite(&w) {
        Ok(w)
    } else {
        Err(Error::NonFinite(context))
    }
}

/// `|w|` at the precision of `w`.
pub fn abs(w: &Complex) -> Float {
    Float::with_val(w.prec().0.max(w.prec().1), w.abs_ref())
}

/// `|a - b| / |b|` as an `f64` (or `|a|` when `b` is zero).
pub fn rel_diff(a: &Complex, b: &Complex) -> f64 {
    let p = a.prec().0.max(b.prec().0).max(64);
    let d = Complex::with_val(p, a - b);
    let num = Float::with_val(p, d.abs_ref());
    if is_zero(b) {
        return num.to_f64();
    }
    let den = Float::with_val(p, b.abs_ref());
    Float::with_val(p, &num / &den).to_f64()
}

/// Rejects `w` when `sin w` is too close to zero relative to `|w|`.
fn sin_guard(w: &Complex, sin_w: &Complex, prec: Precision) -> Result<()> {
    let s = abs(sin_w);
    if s.is_zero() {
        return Err(Error::PoleProximity(PoleHit::new(PoleKind::Sin, 0.0)));
    }
    let limit = prec.guard_threshold() * abs(w);
    if s < limit {
        return Err(Error::PoleProximity(PoleHit::new(
            PoleKind::Sin,
            s.to_f64(),
        )));
    }
    Ok(())
}

fn cos_guard(w: &Complex, cos_w: &Complex, prec: Precision) -> Result<()> {
    let c = abs(cos_w);
    let mut scale = abs(w);
    if scale < 1 {
        scale = Float::with_val(scale.prec(), 1);
    }
    let limit = prec.guard_threshold() * scale;
    if c.is_zero() || c < limit {
        return Err(Error::PoleProximity(PoleHit::new(
            PoleKind::Cos,
            c.to_f64(),
        )));
    }
    Ok(())
}

/// Evaluates `f(w)` at precision `prec`.
pub fn c_trig(f: TrigFn, w: &Complex, prec: Precision) -> Result<Complex> {
    if !is_finite(w) {
        return Err(Error::NonFinite("trig argument"));
    }
    let p = prec.bits();
    let work = prec.plus(16).bits();
    let out = match f {
        TrigFn::Sin => Complex::with_val(p, w.sin_ref()),
        TrigFn::Cos => Complex::with_val(p, w.cos_ref()),
        TrigFn::Tan => {
            let (s, c) = sin_cos(w, work);
            cos_guard(w, &c, prec)?;
            Complex::with_val(p, &s / &c)
        }
        TrigFn::Cot => {
            let (s, c) = sin_cos(w, work);
            sin_guard(w, &s, prec)?;
            Complex::with_val(p, &c / &s)
        }
        TrigFn::Csc => {
            let s = Complex::with_val(work, w.sin_ref());
            sin_guard(w, &s, prec)?;
            Complex::with_val(p, s.recip_ref())
        }
    };
    ensure_finite(out, "c_trig")
}

fn sin_cos(w: &Complex, bits: u32) -> (Complex, Complex) {
    let mut s = Complex::new(bits);
    let mut c = Complex::new(bits);
    (&mut s, &mut c).assign(w.sin_cos_ref());
    (s, c)
}

/// Principal logarithm with the zero check every log-space factor needs.
pub fn principal_ln(v: &Complex, prec: Precision) -> Result<Complex> {
    if is_zero(v) {
        return Err(Error::PoleProximity(PoleHit::new(
            PoleKind::ZeroFactor,
            0.0,
        )));
    }
    ensure_finite(Complex::with_val(prec.bits(), v.ln_ref()), "principal_ln")
}

/// Principal-branch `log(sin w)`; imaginary part in (-π, π].
pub fn log_sin(w: &Complex, prec: Precision) -> Result<Complex> {
    let work = prec.plus(16).bits();
    let s = Complex::with_val(work, w.sin_ref());
    sin_guard(w, &s, prec)?;
    principal_ln(&s, prec)
}

/// Principal-branch `log(cos w)`.
pub fn log_cos(w: &Complex, prec: Precision) -> Result<Complex> {
    let work = prec.plus(16).bits();
    let c = Complex::with_val(work, w.cos_ref());
    cos_guard(w, &c, prec)?;
    principal_ln(&c, prec)
}

/// `sin(z)/z` with the removable singularity filled.
pub fn sinc_ref(z: &Complex, prec: Precision) -> Complex {
    let p = prec.bits();
    if is_zero(z) {
        return Complex::with_val(p, (1, 0));
    }
    let work = prec.plus(16).bits();
    // Below 2^(-P/4) the two-term series is exact to working precision.
    let mut small = Float::with_val(64, 1);
    small >>= p / 4;
    if abs(z) < small {
        let z2 = Complex::with_val(work, z.square_ref());
        let z4 = Complex::with_val(work, z2.square_ref());
        let mut r = Complex::with_val(work, (1, 0));
        r -= Complex::with_val(work, &z2 / 6u32);
        r += Complex::with_val(work, &z4 / 120u32);
        return Complex::with_val(p, r);
    }
    let s = Complex::with_val(work, z.sin_ref());
    Complex::with_val(p, &s / z)
}

/// Distance from `w` to the nearest pole of `f` (`+∞` for `sin`/`cos`).
pub fn pole_distance(f: TrigFn, w: &Complex) -> f64 {
    let offset = match f {
        TrigFn::Sin | TrigFn::Cos => return f64::INFINITY,
        TrigFn::Csc | TrigFn::Cot => 0.0,
        TrigFn::Tan => 0.5,
    };
    let wp = w.prec().0.max(w.prec().1).max(Precision::MIN_BITS);
    let pi = pi(Precision(wp));
    let bits = pi.prec();
    // Poles sit at (k + offset)π; pick k by rounding Re(w)/π - offset.
    let t: Float = Float::with_val(bits, w.real() / &pi) - offset;
    let k = t.round();
    let pole = Float::with_val(bits, (k + offset) * &pi);
    let d = Complex::with_val(bits, w - &pole);
    Float::with_val(bits, d.abs_ref()).to_f64()
}

/// `z^n` for an exact integer exponent, computed at `bits`.
pub fn pow_integer(z: &Complex, n: &Integer, bits: u32) -> Complex {
    Complex::with_val(bits, z.pow(n))
}

/// Total order on `f64` residuals with NaN sorted last.
pub fn cmp_residual(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b)
        .unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p113() -> Precision {
        Precision::new(113).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex {
        complex(p113(), re, im)
    }

    fn half_pi(prec: Precision) -> Complex {
        let mut p = Float::with_val(prec.bits(), Constant::Pi);
        p /= 2;
        Complex::with_val(prec.bits(), (p, 0))
    }

    fn pi_over(prec: Precision, d: u32) -> Complex {
        let mut p = Float::with_val(prec.bits(), Constant::Pi);
        p /= d;
        Complex::with_val(prec.bits(), (p, 0))
    }

    #[test]
    fn precision_rejects_below_53_bits() {
        assert!(Precision::new(52).is_err());
        assert_eq!(Precision::new(53).unwrap().bits(), 53);
        assert_eq!(Precision::default().bits(), 113);
    }

    #[test]
    fn sin_half_pi_is_one() {
        let p = Precision::new(53).unwrap();
        let v = c_trig(TrigFn::Sin, &half_pi(p), p).unwrap();
        assert!(rel_diff(&v, &complex(p, 1.0, 0.0)) < 1e-15);
    }

    #[test]
    fn csc_sixth_pi_is_two() {
        let p = Precision::new(53).unwrap();
        let v = c_trig(TrigFn::Csc, &pi_over(p, 6), p).unwrap();
        assert!(rel_diff(&v, &complex(p, 2.0, 0.0)) < 4.0 * f64::EPSILON);
    }

    #[test]
    fn cos_matches_real_expansion() {
        // cos(1+i) = cos 1 cosh 1 - i sin 1 sinh 1, from real MPFR functions at 256 bits.
        let p = p113();
        let v = c_trig(TrigFn::Cos, &c(1.0, 1.0), p).unwrap();
        let one = Float::with_val(256, 1);
        let re = Float::with_val(256, one.cos_ref()) * Float::with_val(256, one.cosh_ref());
        let im = -(Float::with_val(256, one.sin_ref()) * Float::with_val(256, one.sinh_ref()));
        let expect = Complex::with_val(256, (re, im));
        assert!(rel_diff(&v, &expect) < 2f64.powi(-110));
    }

    #[test]
    fn csc_and_cot_reject_poles() {
        let p = p113();
        let pi_c = Complex::with_val(113, (Float::with_val(113, Constant::Pi), 0));
        for f in [TrigFn::Csc, TrigFn::Cot] {
            match c_trig(f, &pi_c, p) {
                Err(Error::PoleProximity(hit)) => assert_eq!(hit.kind, PoleKind::Sin),
                other => panic!("expected pole error, got {other:?}"),
            }
            assert!(matches!(
                c_trig(f, &c(0.0, 0.0), p),
                Err(Error::PoleProximity(_))
            ));
        }
        assert!(matches!(
            c_trig(TrigFn::Tan, &half_pi(p), p),
            Err(Error::PoleProximity(_))
        ));
        // Tiny but nonzero arguments are accurate, not poles.
        let tiny = c(1e-30, 0.0);
        let v = c_trig(TrigFn::Csc, &tiny, p).unwrap();
        let expect = Complex::with_val(256, tiny.recip_ref());
        assert!(rel_diff(&v, &expect) < 1e-30);
    }

    #[test]
    fn log_sin_examples() {
        let p = p113();
        let v = log_sin(&half_pi(p), p).unwrap();
        assert!(abs(&v) < 1e-30);
        let v = log_sin(&pi_over(p, 6), p).unwrap();
        let ln_half = Float::with_val(113, 0.5f64).ln();
        assert!(rel_diff(&v, &Complex::with_val(113, (ln_half, 0))) < 1e-32);
        // Independent route for 1+2i: sin from real functions, log from abs/atan2 at 256 bits.
        let v = log_sin(&c(1.0, 2.0), p).unwrap();
        let (x, y) = (Float::with_val(256, 1), Float::with_val(256, 2));
        let sr = Float::with_val(256, x.sin_ref()) * Float::with_val(256, y.cosh_ref());
        let si = Float::with_val(256, x.cos_ref()) * Float::with_val(256, y.sinh_ref());
        let modulus = Float::with_val(256, sr.hypot_ref(&si)).ln();
        let arg = Float::with_val(256, si.atan2_ref(&sr));
        let expect = Complex::with_val(256, (modulus, arg));
        assert!(rel_diff(&v, &expect) < 2f64.powi(-108));
        assert!(v.imag().to_f64().abs() <= std::f64::consts::PI);
    }

    #[test]
    fn sinc_examples() {
        let p = p113();
        assert_eq!(sinc_ref(&c(0.0, 0.0), p), c(1.0, 0.0));
        let two_over_pi = {
            let pi = Float::with_val(113, Constant::Pi);
            Complex::with_val(113, (Float::with_val(113, 2 / pi), 0))
        };
        assert!(rel_diff(&sinc_ref(&half_pi(p), p), &two_over_pi) < 1e-33);
        assert!(abs(&sinc_ref(&pi_over(p, 1), p)) < 1e-33);
        // Series branch agrees with the direct quotient evaluated at high precision.
        let z = c(1e-12, 3e-12);
        let direct = {
            let z256 = Complex::with_val(512, &z);
            Complex::with_val(512, Complex::with_val(512, z256.sin_ref()) / &z256)
        };
        assert!(rel_diff(&sinc_ref(&z, p), &direct) < 1e-33);
    }

    #[test]
    fn pole_distance_examples() {
        let pi_c = Complex::with_val(113, (Float::with_val(113, Constant::Pi), 0));
        assert!(pole_distance(TrigFn::Csc, &pi_c) < 1e-33);
        let d = pole_distance(TrigFn::Tan, &c(0.0, 0.0));
        assert!((d - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let d = pole_distance(TrigFn::Csc, &c(3.0, 0.1));
        let expect = (3.0 - std::f64::consts::PI).hypot(0.1);
        assert!((d - expect).abs() < 1e-15);
        assert_eq!(pole_distance(TrigFn::Sin, &c(0.0, 0.0)), f64::INFINITY);
        assert_eq!(pole_distance(TrigFn::Cos, &c(1.0, 0.0)), f64::INFINITY);
    }

    #[test]
    fn rel_diff_handles_zero_reference() {
        assert_eq!(rel_diff(&c(3.0, 4.0), &c(0.0, 0.0)), 5.0);
    }
}
