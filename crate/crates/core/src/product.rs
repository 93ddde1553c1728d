//! Term generators, log-space partial products and closed-form oracles for
//! the eight product families.
//!
//! Every factor is produced as a logarithm. Partial products accumulate the
//! principal parts of those logarithms together with an exact count of the
//! `2π` turns removed from each term (`winding`), so exponent-weighted terms
//! whose imaginary parts are far outside `(-π, π]` lose nothing when they are
//! summed. The value is formed by a single exponentiation at the end.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use rug::float::Constant;
use rug::{Complex, Float, Integer};
use serde::{Deserialize, Serialize};

use crate::convergence::remainder_model;
use crate::error::{Error, PoleHit, PoleKind, Result};
use crate::gamma_product;
use crate::numerics::{self, is_zero, log_cos, log_sin, principal_ln, Precision};

/// Hard cap on the truncation length of infinite products.
pub const MAX_TERMS: u32 = 48;
/// Exponent-tower terms need `q^(k+1)` as an exact integer; `q^N` is capped at this many bits.
pub const MAX_TOWER_EXPONENT_BITS: u32 = 96;
/// Largest term index accepted for finite families (arguments grow like `q^n`).
pub const MAX_FINITE_INDEX: u32 = 64;

/// The product families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FormulaId {
    /// `prod_{k=m}^{n-1} cos(2^k z) = 2^(m-n) sin(2^n z) / sin(2^m z)`.
    MorrieClassic,
    /// `prod_{k=m}^{n-1} q sin(z q^k) csc(z q^(k+1)) = q^(n-m) sin(z q^m) csc(z q^n)`.
    TelescopeFinite,
    /// `prod_{k>=0} cos(z 2^(-k-1)) = sinc z`.
    Viete,
    /// Exponent-tower product with factors raised to `±q^k`, limit `sinc z`.
    ExpTowerInf,
    /// `prod_{k>=0} sin(z q^-k) csc(z q^(-k-1)) / q = sinc z`.
    RatioInf,
    /// `prod_{k>=0} (1/q) sum_{n=1}^{q} cos((2n-1) z / (2q)^(k+1))`.
    CosineSumInf,
    /// Doubly indexed gamma-ratio product.
    GammaInf,
    /// Finite exponent-tower product with fractional exponents `q^-k`.
    ExpTowerFinite,
}

impl FormulaId {
    pub const ALL: [FormulaId; 8] = [
        FormulaId::MorrieClassic,
        FormulaId::TelescopeFinite,
        FormulaId::Viete,
        FormulaId::ExpTowerInf,
        FormulaId::RatioInf,
        FormulaId::CosineSumInf,
        FormulaId::GammaInf,
        FormulaId::ExpTowerFinite,
    ];

    /// Finite families are indexed by `m..n`, infinite ones by a truncation length.
    pub fn is_finite(self) -> bool {
        matches!(
            self,
            FormulaId::MorrieClassic | FormulaId::TelescopeFinite | FormulaId::ExpTowerFinite
        )
    }

    /// Short name used on the command line.
    pub fn cli_name(self) -> &'static str {
        match self {
            FormulaId::MorrieClassic => "eq1",
            FormulaId::Viete => "eq2",
            FormulaId::TelescopeFinite => "eq3",
            FormulaId::ExpTowerInf => "eq8",
            FormulaId::RatioInf => "eq9",
            FormulaId::CosineSumInf => "eq10",
            FormulaId::GammaInf => "eq11",
            FormulaId::ExpTowerFinite => "eq12",
        }
    }

    pub fn from_cli_name(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase();
        let alias = match s.as_str() {
            "eq4" => "eq1",
            "eq7" | "eq13" => "eq3",
            "eq15" => "eq8",
            other => other,
        };
        FormulaId::ALL.into_iter().find(|f| f.cli_name() == alias)
    }

    pub fn tag(self) -> &'static str {
        match self {
            FormulaId::MorrieClassic => "MORRIE_CLASSIC",
            FormulaId::TelescopeFinite => "TELESCOPE_FINITE",
            FormulaId::Viete => "VIETE",
            FormulaId::ExpTowerInf => "EXP_TOWER_INF",
            FormulaId::RatioInf => "RATIO_INF",
            FormulaId::CosineSumInf => "COSINE_SUM_INF",
            FormulaId::GammaInf => "GAMMA_INF",
            FormulaId::ExpTowerFinite => "EXP_TOWER_FINITE",
        }
    }
}

impl fmt::Display for FormulaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Alternative factor layouts kept for diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorForm {
    /// Exponent-tower factors `cos^e * tan^e` fused into `sin^e`; the finite
    /// exponent tower taken exactly as printed (with `cot` in the last factor).
    #[default]
    Standard,
    /// Infinite exponent tower: all printed factors, each raised to its own
    /// integer power.
    LiteralFactors,
    /// Finite exponent tower with `csc` in place of `cot` in the last factor,
    /// the factor used when stepping the identity from `n` to `n + 1`.
    CscStep,
}

/// Diagnostic flags attached to terms and results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Flag {
    PoleSkip,
    BranchWarning,
    RangeEscape,
    PrecisionRetry,
}

pub type Flags = BTreeSet<Flag>;

/// One evaluation descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductRequest {
    pub formula: FormulaId,
    pub z: Complex,
    pub q: u32,
    /// Lower index (finite families).
    pub m: u32,
    /// Upper index, exclusive (finite families).
    pub n: u32,
    /// Truncation length (infinite families).
    pub terms: u32,
    pub prec: Precision,
    pub form: FactorForm,
}

impl ProductRequest {
    pub fn finite(formula: FormulaId, z: Complex, q: u32, m: u32, n: u32, prec: Precision) -> Self {
        ProductRequest {
            formula,
            z,
            q,
            m,
            n,
            terms: 0,
            prec,
            form: FactorForm::Standard,
        }
    }

    pub fn infinite(formula: FormulaId, z: Complex, q: u32, terms: u32, prec: Precision) -> Self {
        ProductRequest {
            formula,
            z,
            q,
            m: 0,
            n: 0,
            terms,
            prec,
            form: FactorForm::Standard,
        }
    }

    pub fn with_form(mut self, form: FactorForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_terms(&self, terms: u32) -> Self {
        ProductRequest {
            terms,
            ..self.clone()
        }
    }

    pub fn with_range(&self, m: u32, n: u32) -> Self {
        ProductRequest {
            m,
            n,
            ..self.clone()
        }
    }

    /// Index range consumed by [`partial_product`].
    pub fn index_range(&self) -> std::ops::Range<u32> {
        if self.formula.is_finite() {
            self.m..self.n
        } else {
            0..self.terms
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !numerics::is_finite(&self.z) {
            return Err(Error::InvalidRequest("z must be finite".into()));
        }
        if self.q < 2 {
            return Err(Error::InvalidRequest(format!(
                "q must be at least 2, got {}",
                self.q
            )));
        }
        if self.formula == FormulaId::MorrieClassic && self.q != 2 {
            return Err(Error::InvalidRequest(
                "the classic Morrie product has base q = 2".into(),
            ));
        }
        match (self.formula, self.form) {
            (_, FactorForm::Standard)
            | (FormulaId::ExpTowerInf, FactorForm::LiteralFactors)
            | (FormulaId::ExpTowerFinite, FactorForm::CscStep) => {}
            (f, form) => {
                return Err(Error::InvalidRequest(format!(
                    "factor form {form:?} does not apply to {f}"
                )))
            }
        }
        if self.formula.is_finite() {
            if self.m >= self.n {
                return Err(Error::IndexOutOfRange {
                    formula: self.formula,
                    detail: format!("empty range m={} n={} (need m < n)", self.m, self.n),
                });
            }
            if self.n > MAX_FINITE_INDEX {
                return Err(Error::RangeCap(format!(
                    "n={} exceeds {}",
                    self.n, MAX_FINITE_INDEX
                )));
            }
        } else {
            if self.terms > MAX_TERMS {
                return Err(Error::RangeCap(format!(
                    "N={} exceeds the cap of {MAX_TERMS} terms",
                    self.terms
                )));
            }
            if self.formula == FormulaId::ExpTowerInf
                && tower_exponent_bits(self.q, self.terms) > MAX_TOWER_EXPONENT_BITS
            {
                return Err(Error::RangeCap(format!(
                    "q^N = {}^{} exceeds 2^{MAX_TOWER_EXPONENT_BITS}",
                    self.q, self.terms
                )));
            }
        }
        Ok(())
    }

    fn check_index(&self, k: u32) -> Result<()> {
        let ok = if self.formula.is_finite() {
            (self.m..self.n).contains(&k)
        } else {
            k < MAX_TERMS + 16
                && (self.formula != FormulaId::ExpTowerInf
                    || tower_exponent_bits(self.q, k + 1) <= MAX_TOWER_EXPONENT_BITS + 8)
        };
        if ok {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                formula: self.formula,
                detail: format!("term index k={k} outside the formula's range"),
            })
        }
    }
}

/// Number of bits of `q^n`.
pub fn tower_exponent_bits(q: u32, n: u32) -> u32 {
    Integer::from(Integer::u_pow_u(q, n)).significant_bits()
}

/// One factor of a product.
#[derive(Debug, Clone, PartialEq)]
pub struct TermValue {
    pub k: u32,
    /// Principal-branch logarithm of the factor.
    pub log_value: Complex,
    /// Number of `2π i` turns removed to bring the assembled logarithm into
    /// the principal strip.
    pub winding: Integer,
    /// The factor itself, when `|Re log|` is small enough for ordinary floating range.
    pub value_hint: Option<Complex>,
    pub flags: Flags,
    /// Precision-ladder retries used for this factor.
    pub retries: u32,
}

/// Outcome of a (partial) product evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub value: Complex,
    /// Sum of the principal term logarithms; the full logarithm is
    /// `log_value + 2πi * winding`.
    pub log_value: Complex,
    pub winding: Integer,
    pub terms_used: u32,
    /// Model estimate of `|value / limit - 1|` (infinite families); zero for finite ones.
    pub est_remainder: Option<f64>,
    pub flags: Flags,
    pub precision_retries: u32,
    pub prec: Precision,
}

impl EvalResult {
    pub(crate) fn unit(prec: Precision, terms_used: u32, flags: Flags) -> Self {
        EvalResult {
            value: Complex::with_val(prec.bits(), (1, 0)),
            log_value: Complex::with_val(prec.bits(), (0, 0)),
            winding: Integer::new(),
            terms_used,
            est_remainder: Some(0.0),
            flags,
            precision_retries: 0,
            prec,
        }
    }

    /// Assembles a result from an unreduced log sum at any precision.
    pub(crate) fn from_log(
        log: Complex,
        winding: Integer,
        terms_used: u32,
        flags: Flags,
        prec: Precision,
    ) -> Self {
        let (principal, extra) = reduce_winding(&log);
        let value = Complex::with_val(prec.bits(), principal.exp_ref());
        EvalResult {
            value,
            log_value: Complex::with_val(prec.bits(), &principal),
            winding: winding + extra,
            terms_used,
            est_remainder: None,
            flags,
            precision_retries: 0,
            prec,
        }
    }
}

/// Log of a factor before winding reduction, plus the number of bits its
/// assembly cancelled.
pub(crate) struct RawLog {
    pub log: Complex,
    pub lost_bits: f64,
    pub flags: Flags,
}

impl RawLog {
    fn new(log: Complex, components: &[&Complex]) -> Self {
        RawLog {
            log,
            lost_bits: lost_bits(components),
            flags: Flags::new(),
        }
    }
}

/// Absolute error of a sum of logs is bounded by its largest component
/// times the unit roundoff; `log2` of that magnitude is the precision consumed.
fn lost_bits(components: &[&Complex]) -> f64 {
    components
        .iter()
        .map(|c| numerics::abs(c).to_f64())
        .fold(1.0f64, f64::max)
        .log2()
}

/// Splits `log = principal + 2πi * turns` with `Im(principal)` in (-π, π].
pub(crate) fn reduce_winding(log: &Complex) -> (Complex, Integer) {
    let bits = log.prec().0.max(log.prec().1);
    let pi = Float::with_val(bits + 16, Constant::Pi);
    let tau = Float::with_val(bits + 16, &pi * 2u32);
    let turns_f = Float::with_val(bits + 16, log.imag() / &tau).round();
    let mut turns = turns_f.to_integer().unwrap_or_default();
    let mut im = Float::with_val(bits, log.imag() - Float::with_val(bits + 16, &tau * &turns));
    if im > pi {
        im -= &tau;
        turns += 1;
    } else if im <= -Float::with_val(bits, &pi) {
        im += &tau;
        turns -= 1;
    }
    (Complex::with_val(bits, (log.real(), im)), turns)
}

fn int_pow(q: u32, k: u32) -> Integer {
    Integer::from(Integer::u_pow_u(q, k))
}

fn ln_q(q: u32, bits: u32) -> Float {
    Float::with_val(bits, q).ln()
}

fn scaled(z: &Complex, factor: &Integer, bits: u32) -> Complex {
    Complex::with_val(bits, z * factor)
}

fn divided(z: &Complex, divisor: &Integer, bits: u32) -> Complex {
    Complex::with_val(bits, z / divisor)
}

/// Initial working precision for factor `k`, sized for the integer weights
/// that multiply the exponent-tower logarithms.
fn initial_work(req: &ProductRequest, k: u32) -> Precision {
    let base = req.prec.plus(40);
    match req.formula {
        FormulaId::ExpTowerInf => {
            let weight = int_pow(req.q, k + 1) * (k * (req.q - 1) + req.q);
            base.plus(weight.significant_bits() + 8)
        }
        _ => base,
    }
}

fn ladder_cap(initial: Precision) -> Precision {
    if initial.bits() >= Precision::LADDER_CAP_BITS {
        initial
    } else {
        Precision::new(Precision::LADDER_CAP_BITS).expect("cap is a valid precision")
    }
}

/// `log(factor k)` at working precision `work`, before winding reduction.
pub(crate) fn raw_term(req: &ProductRequest, k: u32, work: Precision) -> Result<RawLog> {
    let z = &req.z;
    let q = req.q;
    let bits = work.bits();
    match req.formula {
        FormulaId::MorrieClassic => {
            let a = scaled(z, &int_pow(2, k), bits);
            let l = log_cos(&a, work)?;
            Ok(RawLog::new(l.clone(), &[&l]))
        }
        FormulaId::TelescopeFinite => {
            let a = scaled(z, &int_pow(q, k), bits);
            let b = scaled(z, &int_pow(q, k + 1), bits);
            let la = log_sin(&a, work)?;
            let lb = log_sin(&b, work)?;
            let mut sum = Complex::with_val(bits, &la - &lb);
            sum += ln_q(q, bits);
            Ok(RawLog::new(sum, &[&la, &lb]))
        }
        FormulaId::Viete => {
            let a = divided(z, &int_pow(2, k + 1), bits);
            let l = log_cos(&a, work)?;
            Ok(RawLog::new(l.clone(), &[&l]))
        }
        FormulaId::RatioInf => {
            let a = divided(z, &int_pow(q, k), bits);
            let b = divided(z, &int_pow(q, k + 1), bits);
            let la = log_sin(&a, work)?;
            let lb = log_sin(&b, work)?;
            let mut sum = Complex::with_val(bits, &la - &lb);
            sum -= ln_q(q, bits);
            Ok(RawLog::new(sum, &[&la, &lb]))
        }
        FormulaId::CosineSumInf => {
            let theta = divided(z, &int_pow(2 * q, k + 1), bits);
            let mut sum = Complex::with_val(bits, (0, 0));
            let mut spread = Float::with_val(bits, 0);
            for n in 1..=q {
                let arg = Complex::with_val(bits, &theta * (2 * n - 1));
                let c = Complex::with_val(bits, arg.cos_ref());
                spread += numerics::abs(&c);
                sum += &c;
            }
            sum /= q;
            let size = numerics::abs(&sum);
            if size.is_zero() || size < Float::with_val(64, &spread / q) * work.guard_threshold() {
                return Err(Error::PoleProximity(PoleHit::new(
                    PoleKind::ZeroFactor,
                    size.to_f64(),
                )));
            }
            let l = principal_ln(&sum, work)?;
            // Relative error of the cosine sum is (sum of |cos|) / |sum| ulps.
            let lost = (Float::with_val(64, &spread / q) / size)
                .to_f64()
                .max(1.0)
                .log2();
            Ok(RawLog {
                log: l,
                lost_bits: lost,
                flags: Flags::new(),
            })
        }
        FormulaId::GammaInf => gamma_product::inner_log(z, q, k, work),
        FormulaId::ExpTowerInf => match req.form {
            FactorForm::LiteralFactors => tower_literal(z, q, k, work),
            _ => tower_fused(z, q, k, work),
        },
        FormulaId::ExpTowerFinite => tower_finite_term(z, q, k, req.form, work),
    }
}

/// `-q^k(k(q-1)+q) ln q + (q-1) q^k ln z + q^k log sin(z q^-k) - q^(k+1) log sin(z q^(-k-1))`.
fn tower_fused(z: &Complex, q: u32, k: u32, work: Precision) -> Result<RawLog> {
    let bits = work.bits();
    let qk = int_pow(q, k);
    let qk1 = int_pow(q, k + 1);
    let e_q = Integer::from(&qk * (k * (q - 1) + q));
    let e_z = Integer::from(&qk * (q - 1));
    let a = divided(z, &qk, bits);
    let b = divided(z, &qk1, bits);

    let c_q = Complex::with_val(bits, (Float::with_val(bits, -ln_q(q, bits) * &e_q), 0));
    let ln_z = principal_ln(z, work)?;
    let c_z = Complex::with_val(bits, &ln_z * &e_z);
    let c_a = Complex::with_val(bits, log_sin(&a, work)? * &qk);
    let c_b = Complex::with_val(bits, log_sin(&b, work)? * &qk1);

    let mut sum = Complex::with_val(bits, &c_q + &c_z);
    sum += &c_a;
    sum -= &c_b;
    Ok(RawLog::new(sum, &[&c_q, &c_z, &c_a, &c_b]))
}

/// Every printed factor of the infinite exponent tower with its own integer power.
fn tower_literal(z: &Complex, q: u32, k: u32, work: Precision) -> Result<RawLog> {
    let bits = work.bits();
    let qk = int_pow(q, k);
    let qk1 = int_pow(q, k + 1);
    let e_q = -Integer::from(&qk * (k * (q - 1) + q));
    let e_z = Integer::from(&qk * (q - 1));
    let a = divided(z, &qk, bits);
    let b = divided(z, &qk1, bits);
    let neg_qk1 = -qk1.clone();

    let tan = |w: &Complex| -> Result<Complex> {
        let t = numerics::c_trig(numerics::TrigFn::Tan, w, work)?;
        principal_ln(&t, work)
    };
    let parts = [
        Complex::with_val(bits, (Float::with_val(bits, ln_q(q, bits) * &e_q), 0)),
        Complex::with_val(bits, principal_ln(z, work)? * &e_z),
        Complex::with_val(bits, log_cos(&b, work)? * &neg_qk1),
        Complex::with_val(bits, log_cos(&a, work)? * &qk),
        Complex::with_val(bits, tan(&b)? * &neg_qk1),
        Complex::with_val(bits, tan(&a)? * &qk),
    ];
    let mut sum = Complex::with_val(bits, (0, 0));
    for p in &parts {
        sum += p;
    }
    let refs: Vec<&Complex> = parts.iter().collect();
    Ok(RawLog::new(sum, &refs))
}

/// Records a branch warning when `base` sits on the negative real axis or
/// its principal log has `|Im| > π/2`.
fn branch_check(base: &Complex, log: &Complex, flags: &mut Flags) {
    let on_cut = base.imag().is_zero() && base.real().is_sign_negative() && !base.real().is_zero();
    if on_cut || log.imag().to_f64().abs() > std::f64::consts::FRAC_PI_2 {
        flags.insert(Flag::BranchWarning);
    }
}

fn ln_base(base: &Complex, work: Precision, flags: &mut Flags) -> Result<Complex> {
    let l = principal_ln(base, work)?;
    branch_check(base, &l, flags);
    Ok(l)
}

/// Finite exponent tower, factor `k`: fractional powers `q^-k` taken on the
/// principal branch of every base.
fn tower_finite_term(
    z: &Complex,
    q: u32,
    k: u32,
    form: FactorForm,
    work: Precision,
) -> Result<RawLog> {
    let bits = work.bits();
    let mut flags = Flags::new();
    let qk = int_pow(q, k);
    let qk1 = int_pow(q, k + 1);
    let e_k = Float::with_val(bits, 1) / Float::with_val(bits, &qk);
    let e_k1 = Float::with_val(bits, 1) / Float::with_val(bits, &qk1);
    let x_k = scaled(z, &qk, bits);
    let x_k1 = scaled(z, &qk1, bits);

    // q^(q^(-k-1) (k(1-q) + 1))
    let q_exp = Float::with_val(bits, &e_k1 * (i64::from(k) * (1 - i64::from(q)) + 1));
    let c_q = Complex::with_val(bits, (Float::with_val(bits, ln_q(q, bits) * &q_exp), 0));
    // z^(-(q-1) q^(-k-1))
    let ln_z = ln_base(z, work, &mut flags)?;
    let c_z = Complex::with_val(bits, &ln_z * -Float::with_val(bits, &e_k1 * (q - 1)));

    let cos_k = numerics::c_trig(numerics::TrigFn::Cos, &x_k, work)?;
    let tan_k = numerics::c_trig(numerics::TrigFn::Tan, &x_k, work)?;
    let c_cos = Complex::with_val(bits, ln_base(&cos_k, work, &mut flags)? * &e_k);
    let c_tan = Complex::with_val(bits, ln_base(&tan_k, work, &mut flags)? * &e_k);
    let last_fn = match form {
        FactorForm::CscStep => numerics::TrigFn::Csc,
        _ => numerics::TrigFn::Cot,
    };
    let last = numerics::c_trig(last_fn, &x_k1, work)?;
    let c_last = Complex::with_val(bits, ln_base(&last, work, &mut flags)? * &e_k1);

    let mut sum = Complex::with_val(bits, &c_q + &c_z);
    sum += &c_cos;
    sum += &c_tan;
    sum += &c_last;
    let mut raw = RawLog::new(sum, &[&c_q, &c_z, &c_cos, &c_tan, &c_last]);
    raw.flags = flags;
    Ok(raw)
}

fn zero_limit_flags(formula: FormulaId) -> Flags {
    let mut flags = Flags::new();
    // Factors that are literally 0·∞ at z = 0 are filled by their limit.
    if matches!(formula, FormulaId::RatioInf | FormulaId::ExpTowerInf) {
        flags.insert(Flag::RangeEscape);
    }
    flags
}

/// Factor `k` of the requested product with its log rounded to `out` bits.
fn term_at(req: &ProductRequest, k: u32, out: Precision) -> Result<TermValue> {
    req.check_index(k)?;
    if !req.formula.is_finite() && is_zero(&req.z) {
        return Ok(TermValue {
            k,
            log_value: Complex::with_val(out.bits(), (0, 0)),
            winding: Integer::new(),
            value_hint: Some(Complex::with_val(req.prec.bits(), (1, 0))),
            flags: zero_limit_flags(req.formula),
            retries: 0,
        });
    }
    let mut work = initial_work(req, k);
    let cap = ladder_cap(work);
    let mut retries = 0;
    let raw = loop {
        let raw = raw_term(req, k, work).map_err(|e| e.at_term(i64::from(k)))?;
        let margin = f64::from(work.bits()) - raw.lost_bits;
        if margin >= f64::from(req.prec.bits() + 16) || work >= cap {
            break raw;
        }
        work = work.doubled().min(cap);
        retries += 1;
    };
    let mut flags = raw.flags;
    if retries > 0 {
        flags.insert(Flag::PrecisionRetry);
    }
    let (principal, winding) = reduce_winding(&raw.log);
    let value_hint = if principal.real().to_f64().abs() <= 709.0 {
        Some(Complex::with_val(req.prec.bits(), principal.exp_ref()))
    } else {
        flags.insert(Flag::RangeEscape);
        None
    };
    Ok(TermValue {
        k,
        log_value: Complex::with_val(out.bits(), principal),
        winding,
        value_hint,
        flags,
        retries,
    })
}

/// The `k`-th factor of the requested product, computed in log space.
pub fn term(req: &ProductRequest, k: u32) -> Result<TermValue> {
    req.validate_form_and_base()?;
    term_at(req, k, req.prec)
}

impl ProductRequest {
    /// Checks that do not depend on the index bounds, so single terms of a
    /// finite family can be requested against any `m..n` window.
    fn validate_form_and_base(&self) -> Result<()> {
        if self.formula.is_finite() {
            let probe = ProductRequest {
                m: 0,
                n: 1,
                ..self.clone()
            };
            probe.validate()
        } else {
            let probe = ProductRequest {
                terms: 0,
                ..self.clone()
            };
            probe.validate()
        }
    }
}

/// Product of all factors over the request's index range.
pub fn partial_product(req: &ProductRequest) -> Result<EvalResult> {
    req.validate()?;
    let prec = req.prec;
    let range = req.index_range();
    let count = range.len() as u32;
    if !req.formula.is_finite() && is_zero(&req.z) {
        return Ok(EvalResult::unit(prec, count, zero_limit_flags(req.formula)));
    }
    let acc_prec = prec.plus(16);
    let factors: Vec<TermValue> = range
        .clone()
        .into_par_iter()
        .map(|k| {
            // Finite windows are validated as a whole above; index checks use the request.
            term_at(req, k, acc_prec)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sum = Complex::with_val(acc_prec.bits(), (0, 0));
    let mut winding = Integer::new();
    let mut flags = Flags::new();
    let mut retries = 0;
    for t in &factors {
        sum += &t.log_value;
        winding += &t.winding;
        flags.extend(t.flags.iter().copied());
        retries += t.retries;
    }
    let mut result = EvalResult::from_log(sum, winding, count, flags, prec);
    result.precision_retries = retries;
    result.est_remainder = if req.formula.is_finite() {
        Some(0.0)
    } else if req.formula == FormulaId::GammaInf {
        None
    } else {
        Some(remainder_model(req.formula, &req.z, req.q, count))
    };
    Ok(result)
}

/// Closed-form right-hand side of a finite identity, evaluated in log space.
pub fn finite_rhs(req: &ProductRequest) -> Result<EvalResult> {
    req.validate()?;
    let prec = req.prec;
    let work = prec.plus(40);
    let bits = work.bits();
    let (m, n) = (req.m, req.n);
    let z = &req.z;
    let mut flags = Flags::new();
    let log = match req.formula {
        FormulaId::TelescopeFinite | FormulaId::MorrieClassic => {
            let (base_log, sign) = if req.formula == FormulaId::TelescopeFinite {
                (ln_q(req.q, bits), 1)
            } else {
                (ln_q(2, bits), -1)
            };
            let lm = log_sin(&scaled(z, &int_pow(req.q, m), bits), work)
                .map_err(|e| e.at_term(i64::from(m)))?;
            let ln = log_sin(&scaled(z, &int_pow(req.q, n), bits), work)
                .map_err(|e| e.at_term(i64::from(n)))?;
            let mut sum = Complex::with_val(bits, (Float::with_val(bits, base_log * (n - m)), 0));
            if sign > 0 {
                sum += &lm;
                sum -= &ln;
            } else {
                sum = -sum;
                sum += &ln;
                sum -= &lm;
            }
            sum
        }
        FormulaId::ExpTowerFinite => {
            let q = req.q;
            let qm = int_pow(q, m);
            let qn = int_pow(q, n);
            let e_m = Float::with_val(bits, 1) / Float::with_val(bits, &qm);
            let e_n = Float::with_val(bits, 1) / Float::with_val(bits, &qn);
            let x_m = scaled(z, &qm, bits);
            let x_n = scaled(z, &qn, bits);
            let q_exp = Float::with_val(bits, &e_n * n) - Float::with_val(bits, &e_m * m);
            let mut sum =
                Complex::with_val(bits, (Float::with_val(bits, ln_q(q, bits) * q_exp), 0));
            let ln_z = ln_base(z, work, &mut flags)?;
            sum += Complex::with_val(bits, &ln_z * Float::with_val(bits, &e_n - &e_m));
            let at = |e: Error, k: u32| e.at_term(i64::from(k));
            let cos_m = numerics::c_trig(numerics::TrigFn::Cos, &x_m, work)?;
            let tan_m =
                numerics::c_trig(numerics::TrigFn::Tan, &x_m, work).map_err(|e| at(e, m))?;
            let cos_n = numerics::c_trig(numerics::TrigFn::Cos, &x_n, work)?;
            let cot_n =
                numerics::c_trig(numerics::TrigFn::Cot, &x_n, work).map_err(|e| at(e, n))?;
            sum += Complex::with_val(
                bits,
                ln_base(&cos_m, work, &mut flags).map_err(|e| at(e, m))? * &e_m,
            );
            sum += Complex::with_val(
                bits,
                ln_base(&tan_m, work, &mut flags).map_err(|e| at(e, m))? * &e_m,
            );
            sum -= Complex::with_val(
                bits,
                ln_base(&cos_n, work, &mut flags).map_err(|e| at(e, n))? * &e_n,
            );
            sum += Complex::with_val(
                bits,
                ln_base(&cot_n, work, &mut flags).map_err(|e| at(e, n))? * &e_n,
            );
            sum
        }
        other => {
            return Err(Error::InvalidRequest(format!(
                "{other} has no finite closed form"
            )))
        }
    };
    let mut result = EvalResult::from_log(log, Integer::new(), 0, flags, prec);
    result.est_remainder = Some(0.0);
    Ok(result)
}

/// Closed-form partial product obtained by telescoping the family, computed
/// without iterating over terms.
pub fn oracle_partial(req: &ProductRequest) -> Result<Complex> {
    req.validate()?;
    let prec = req.prec;
    let p = prec.bits();
    let z = &req.z;
    let nt = req.terms;
    let base = match req.formula {
        FormulaId::Viete => Some(2),
        FormulaId::RatioInf => Some(req.q),
        FormulaId::CosineSumInf => Some(2 * req.q),
        _ => None,
    };
    if let Some(b) = base {
        if is_zero(z) {
            return Ok(Complex::with_val(p, (1, 0)));
        }
        // sin z / (b^N sin(z b^-N))
        let work = prec.plus(40).bits();
        let bn = int_pow(b, nt);
        let w = divided(z, &bn, work);
        let sw = Complex::with_val(work, w.sin_ref());
        check_nonzero(&sw, &w, prec)?;
        let num = Complex::with_val(work, z.sin_ref());
        let den = Complex::with_val(work, &sw * &bn);
        return Ok(Complex::with_val(p, &num / &den));
    }
    match req.formula {
        FormulaId::ExpTowerInf => {
            if is_zero(z) {
                return Ok(Complex::with_val(p, (1, 0)));
            }
            // (sin z / z) * (w / sin w)^(q^N), w = z q^-N, assembled in log space.
            let qn = int_pow(req.q, nt);
            let work = prec.plus(40 + qn.significant_bits()).bits();
            let zw = Complex::with_val(work, z);
            let w = divided(z, &qn, work);
            let sinc_z = Complex::with_val(work, Complex::with_val(work, zw.sin_ref()) / &zw);
            let sw = Complex::with_val(work, w.sin_ref());
            check_nonzero(&sw, &w, prec)?;
            let sinc_w = Complex::with_val(work, &sw / &w);
            let mut log = principal_ln(&sinc_z, Precision::new(work).expect("valid"))?;
            log -= Complex::with_val(work, Complex::with_val(work, sinc_w.ln_ref()) * &qn);
            let (principal, _) = reduce_winding(&log);
            Ok(Complex::with_val(p, principal.exp_ref()))
        }
        FormulaId::TelescopeFinite => Ok(finite_rhs(req)?.value),
        FormulaId::MorrieClassic => {
            // sin(2^n z) / (2^(n-m) sin(2^m z))
            let work = prec.plus(40).bits();
            let a = scaled(z, &int_pow(2, req.m), work);
            let b = scaled(z, &int_pow(2, req.n), work);
            let sa = Complex::with_val(work, a.sin_ref());
            check_nonzero(&sa, &a, prec)?;
            let num = Complex::with_val(work, b.sin_ref());
            let den = Complex::with_val(work, sa * int_pow(2, req.n - req.m));
            Ok(Complex::with_val(p, &num / &den))
        }
        other => Err(Error::UnsupportedFormula(other)),
    }
}

fn check_nonzero(sin_w: &Complex, w: &Complex, prec: Precision) -> Result<()> {
    let s = numerics::abs(sin_w);
    if s.is_zero() || s < prec.guard_threshold() * numerics::abs(w) {
        return Err(Error::PoleProximity(PoleHit::new(
            PoleKind::Sin,
            s.to_f64(),
        )));
    }
    Ok(())
}

/// Value of a term as a complex number at the request precision (`exp` of its log).
pub fn term_value(t: &TermValue, prec: Precision) -> Complex {
    Complex::with_val(prec.bits(), t.log_value.exp_ref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{complex, rel_diff};

    fn p() -> Precision {
        Precision::new(113).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex {
        complex(p(), re, im)
    }

    fn pi_over(d: u32) -> Complex {
        let pi = Float::with_val(113, Constant::Pi);
        Complex::with_val(113, (pi / d, 0))
    }

    #[test]
    fn cli_names_round_trip() {
        for f in FormulaId::ALL {
            assert_eq!(FormulaId::from_cli_name(f.cli_name()), Some(f));
        }
        assert_eq!(
            FormulaId::from_cli_name("eq15"),
            Some(FormulaId::ExpTowerInf)
        );
        assert_eq!(
            FormulaId::from_cli_name("eq13"),
            Some(FormulaId::TelescopeFinite)
        );
        assert_eq!(FormulaId::from_cli_name("eq5"), None);
    }

    #[test]
    fn empty_finite_range_is_rejected() {
        let req = ProductRequest::finite(FormulaId::TelescopeFinite, c(0.4, 0.1), 3, 2, 2, p());
        assert!(matches!(
            partial_product(&req),
            Err(Error::IndexOutOfRange { .. })
        ));
        let req = req.with_range(3, 2);
        assert!(matches!(
            partial_product(&req),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            finite_rhs(&req),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn q_below_two_is_rejected() {
        let req = ProductRequest::infinite(FormulaId::RatioInf, c(1.0, 0.0), 1, 4, p());
        assert!(matches!(
            partial_product(&req),
            Err(Error::InvalidRequest(_))
        ));
    }

    #[test]
    fn caps_are_enforced() {
        let req = ProductRequest::infinite(FormulaId::Viete, c(1.0, 0.0), 2, MAX_TERMS + 1, p());
        assert!(matches!(partial_product(&req), Err(Error::RangeCap(_))));
        let req = ProductRequest::infinite(FormulaId::ExpTowerInf, c(1.0, 0.0), 5, 42, p());
        assert!(matches!(partial_product(&req), Err(Error::RangeCap(_))));
    }

    #[test]
    fn ratio_first_term() {
        // sin(1) csc(1/3) / 3
        let req = ProductRequest::infinite(FormulaId::RatioInf, c(1.0, 0.0), 3, 1, p());
        let t = term(&req, 0).unwrap();
        let one = Float::with_val(200, 1);
        let third = Float::with_val(200, 1) / 3u32;
        let expect =
            Float::with_val(200, one.sin_ref()) / (Float::with_val(200, third.sin_ref()) * 3u32);
        let expect = Complex::with_val(200, (expect, 0));
        assert!(rel_diff(&t.value_hint.unwrap(), &expect) < 1e-33);
        assert_eq!(t.winding, 0);
    }

    #[test]
    fn cosine_sum_at_zero_is_one() {
        for q in [2, 3, 7] {
            for k in [0, 3, 11] {
                let req = ProductRequest::infinite(FormulaId::CosineSumInf, c(0.0, 0.0), q, 0, p());
                let t = term(&req, k).unwrap();
                assert_eq!(t.value_hint.unwrap(), c(1.0, 0.0));
            }
        }
    }

    #[test]
    fn tower_first_term_matches_literal_powers() {
        // Eq. (8) at k = 0, q = 2: q^-(q) z^(q-1) cos^-q(z/q) cos(z) tan^-q(z/q) tan(z),
        // evaluated with integer powers at 300 bits.
        for (re, im) in [(1.0, 0.0), (0.7, -0.4), (-2.1, 1.3)] {
            let z = c(re, im);
            let req = ProductRequest::infinite(FormulaId::ExpTowerInf, z.clone(), 2, 1, p());
            let t = term(&req, 0).unwrap();
            let hp = 300;
            let zh = Complex::with_val(hp, &z);
            let half = Complex::with_val(hp, &zh / 2u32);
            let cos_h = Complex::with_val(hp, half.cos_ref());
            let tan_h = Complex::with_val(hp, half.tan_ref());
            let cos_z = Complex::with_val(hp, zh.cos_ref());
            let tan_z = Complex::with_val(hp, zh.tan_ref());
            let mut literal = Complex::with_val(hp, (Float::with_val(hp, 1) / 4u32, 0));
            literal *= &zh;
            literal /= Complex::with_val(hp, cos_h.square_ref());
            literal *= &cos_z;
            literal /= Complex::with_val(hp, tan_h.square_ref());
            literal *= &tan_z;
            assert!(
                rel_diff(&t.value_hint.clone().unwrap(), &literal) < 2f64.powi(-105),
                "z={re}+{im}i"
            );
            // The diagnostic literal form agrees with the fused one.
            let lit = term(&req.clone().with_form(FactorForm::LiteralFactors), 0).unwrap();
            assert!(rel_diff(&lit.value_hint.unwrap(), &literal) < 2f64.powi(-105));
        }
    }

    #[test]
    fn morrie_value_is_one_eighth() {
        let req = ProductRequest::finite(FormulaId::MorrieClassic, pi_over(9), 2, 0, 3, p());
        let r = partial_product(&req).unwrap();
        assert!(rel_diff(&r.value, &c(0.125, 0.0)) < 1e-30);
        // Direct multiplication of cos 20°, 40°, 80°.
        let direct: f64 = [20f64, 40.0, 80.0]
            .iter()
            .map(|d| d.to_radians().cos())
            .product();
        assert!((r.value.real().to_f64() - direct).abs() < 1e-15);
        let rhs = oracle_partial(&req).unwrap();
        assert!(rel_diff(&r.value, &rhs) < 1e-30);
    }

    #[test]
    fn telescope_rhs_single_step() {
        // n - m = 1: the right-hand side is the single factor 3 sin(0.9) csc(2.7).
        let req = ProductRequest::finite(FormulaId::TelescopeFinite, c(0.3, 0.0), 3, 1, 2, p());
        let rhs = finite_rhs(&req).unwrap();
        let x = Float::with_val(200, 0.3f64);
        let a = Float::with_val(200, &x * 3u32);
        let b = Float::with_val(200, &x * 9u32);
        let expect = Float::with_val(200, a.sin_ref()) * 3u32 / Float::with_val(200, b.sin_ref());
        assert!(rel_diff(&rhs.value, &Complex::with_val(200, (expect, 0))) < 1e-32);
        let lhs = partial_product(&req).unwrap();
        assert!(rel_diff(&lhs.value, &rhs.value) < 1e-32);
    }

    #[test]
    fn telescope_rhs_is_reciprocal_morrie_at_q2() {
        let req = ProductRequest::finite(FormulaId::TelescopeFinite, pi_over(9), 2, 0, 3, p());
        let rhs = finite_rhs(&req).unwrap();
        assert!(rel_diff(&rhs.value, &c(8.0, 0.0)) < 1e-30);
    }

    #[test]
    fn viete_matches_two_over_pi() {
        let req = ProductRequest::infinite(FormulaId::Viete, pi_over(2), 2, 20, p());
        let r = partial_product(&req).unwrap();
        let two_over_pi = Float::with_val(113, 2) / Float::with_val(113, Constant::Pi);
        let target = Complex::with_val(113, (two_over_pi, 0));
        assert!(rel_diff(&r.value, &target) < 1e-11);
        assert!(rel_diff(&r.value, &oracle_partial(&req).unwrap()) < 1e-30);
        assert_eq!(r.terms_used, 20);
    }

    #[test]
    fn empty_infinite_product_is_one() {
        let req = ProductRequest::infinite(FormulaId::Viete, pi_over(2), 2, 0, p());
        assert_eq!(oracle_partial(&req).unwrap(), c(1.0, 0.0));
        assert_eq!(partial_product(&req).unwrap().value, c(1.0, 0.0));
    }

    #[test]
    fn ratio_oracle_two_terms() {
        // sin(1) / (9 sin(1/9)) against the k = 0, 1 factors multiplied by hand.
        let req = ProductRequest::infinite(FormulaId::RatioInf, c(1.0, 0.0), 3, 2, p());
        let hp = 200;
        let s = |x: Float| Float::with_val(hp, x.sin_ref());
        let x = |num: u32, den: u32| Float::with_val(hp, num) / den;
        let by_hand = (s(x(1, 1)) / (s(x(1, 3)) * 3u32)) * (s(x(1, 3)) / (s(x(1, 9)) * 3u32));
        let by_hand = Complex::with_val(hp, (by_hand, 0));
        assert!(rel_diff(&oracle_partial(&req).unwrap(), &by_hand) < 1e-32);
        assert!(rel_diff(&partial_product(&req).unwrap().value, &by_hand) < 1e-32);
    }

    #[test]
    fn zero_argument_infinite_products_are_one() {
        for f in FormulaId::ALL.into_iter().filter(|f| !f.is_finite()) {
            let req = ProductRequest::infinite(f, c(0.0, 0.0), 3, 7, p());
            let r = partial_product(&req).unwrap();
            assert_eq!(r.value, c(1.0, 0.0), "{f}");
            assert_eq!(r.est_remainder, Some(0.0));
        }
        let r = partial_product(&ProductRequest::infinite(
            FormulaId::ExpTowerInf,
            c(0.0, 0.0),
            2,
            5,
            p(),
        ))
        .unwrap();
        assert!(r.flags.contains(&Flag::RangeEscape));
    }

    #[test]
    fn pole_error_names_the_term() {
        // z q^(k+1) = 3π exactly at k = 0 ... use z = π so sin(z q) vanishes to working precision.
        let pi = Complex::with_val(113, (Float::with_val(113, Constant::Pi), 0));
        let req = ProductRequest::finite(FormulaId::TelescopeFinite, pi, 2, 0, 3, p());
        match partial_product(&req) {
            Err(Error::PoleProximity(hit)) => assert_eq!(hit.term, Some(0)),
            other => panic!("expected pole error, got {other:?}"),
        }
    }

    #[test]
    fn unsupported_oracles() {
        let req = ProductRequest::infinite(FormulaId::GammaInf, c(1.0, 0.0), 2, 3, p());
        assert_eq!(
            oracle_partial(&req),
            Err(Error::UnsupportedFormula(FormulaId::GammaInf))
        );
        let req = ProductRequest::finite(FormulaId::ExpTowerFinite, c(0.1, 0.0), 2, 0, 2, p());
        assert_eq!(
            oracle_partial(&req),
            Err(Error::UnsupportedFormula(FormulaId::ExpTowerFinite))
        );
    }

    #[test]
    fn finite_tower_single_step_deviation_is_the_cot_cos_factor() {
        // As printed, the last factor carries cot rather than csc, so the
        // one-factor product differs from its closed form by cos(z q)^(1/q).
        let z = c(0.2, 0.0);
        let req = ProductRequest::finite(FormulaId::ExpTowerFinite, z.clone(), 2, 0, 1, p());
        let lhs = partial_product(&req).unwrap();
        let t = term(&req, 0).unwrap();
        assert!(rel_diff(&lhs.value, &t.value_hint.unwrap()) < 1e-32);
        let rhs = finite_rhs(&req).unwrap();
        let cos_half = Float::with_val(200, 0.4f64).cos().sqrt();
        let ratio = Complex::with_val(200, &lhs.value / &rhs.value);
        assert!(rel_diff(&ratio, &Complex::with_val(200, (cos_half, 0))) < 1e-32);
        // With csc in the last slot the identity closes.
        let csc = partial_product(&req.clone().with_form(FactorForm::CscStep)).unwrap();
        assert!(rel_diff(&csc.value, &rhs.value) < 1e-32);
    }

    #[test]
    fn branch_warning_on_negative_base() {
        let req = ProductRequest::finite(FormulaId::ExpTowerFinite, c(-0.2, 0.0), 2, 0, 2, p());
        let r = partial_product(&req).unwrap();
        assert!(r.flags.contains(&Flag::BranchWarning));
        let req = ProductRequest::finite(FormulaId::ExpTowerFinite, c(0.05, 0.0), 2, 0, 2, p());
        assert!(!partial_product(&req)
            .unwrap()
            .flags
            .contains(&Flag::BranchWarning));
    }

    #[test]
    fn winding_reduction_keeps_principal_strip() {
        let big = Complex::with_val(200, (0.5, 1.0e12));
        let (principal, turns) = reduce_winding(&big);
        let im = principal.imag().to_f64();
        assert!(im > -std::f64::consts::PI && im <= std::f64::consts::PI);
        let tau = Float::with_val(200, Float::with_val(200, Constant::Pi) * 2u32);
        let back = Float::with_val(200, principal.imag() + tau * &turns);
        assert!((back - 1.0e12f64).abs() < 1e-40);
    }
}
