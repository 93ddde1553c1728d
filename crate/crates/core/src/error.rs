//! Error type shared by every module of the crate.

use std::fmt;

use crate::product::FormulaId;

/// The function whose singularity (or zero, for factors taken in log space)
/// rejected an evaluation point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleKind {
    /// `csc`, `cot` or a logarithm of `sin`: zeros of `sin`.
    Sin,
    /// `tan`, `sec` or a logarithm of `cos`: zeros of `cos`.
    Cos,
    /// Poles of the gamma function at the non-positive integers.
    Gamma,
    /// A factor that vanishes and therefore has no logarithm.
    ZeroFactor,
}

impl fmt::Display for PoleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PoleKind::Sin => "zero of sin",
            PoleKind::Cos => "zero of cos",
            PoleKind::Gamma => "gamma pole",
            PoleKind::ZeroFactor => "vanishing factor",
        };
        f.write_str(s)
    }
}

/// Where a pole guard fired.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PoleHit {
    pub kind: PoleKind,
    /// Magnitude that tripped the guard (|sin w|, |cos w| or the distance to
    /// the nearest gamma pole), rounded to `f64`.
    pub measure: f64,
    /// Outer term index of the offending factor, when known.
    pub term: Option<i64>,
    /// Free-form locator such as `"k1=2, gamma(a)"`.
    pub detail: Option<String>,
}

impl PoleHit {
    pub fn new(kind: PoleKind, measure: f64) -> Self {
        PoleHit {
            kind,
            measure,
            term: None,
            detail: None,
        }
    }

    pub fn at_term(mut self, k: i64) -> Self {
        self.term.get_or_insert(k);
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

impl fmt::Display for PoleHit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (measure {:e})", self.kind, self.measure)?;
        if let Some(k) = self.term {
            write!(f, " at term k={k}")?;
        }
        if let Some(d) = &self.detail {
            write!(f, " [{d}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("pole guard: {0}")]
    PoleProximity(PoleHit),

    #[error("index out of range for {formula}: {detail}")]
    IndexOutOfRange { formula: FormulaId, detail: String },

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("invalid precision: {0} bits (minimum is 53)")]
    InvalidPrecision(u32),

    #[error("{0} has no bundled closed-form oracle")]
    UnsupportedFormula(FormulaId),

    #[error("tolerance {tol:e} unreachable within {max_terms} terms (achievable remainder {achievable:e})")]
    ToleranceUnreachable {
        tol: f64,
        max_terms: u32,
        achievable: f64,
    },

    #[error("tolerance {tol:e} is below the precision floor {floor:e}")]
    BelowPrecisionFloor { tol: f64, floor: f64 },

    #[error("range cap exceeded: {0}")]
    RangeCap(String),

    #[error("only {usable} usable samples, at least {required} required")]
    InsufficientSamples { usable: usize, required: usize },

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),
}

impl Error {
    /// Tags a pole error with the term index it occurred at, leaving any
    /// index already present untouched.
    pub fn at_term(self, k: i64) -> Self {
        match self {
            Error::PoleProximity(hit) => Error::PoleProximity(hit.at_term(k)),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
