//! Grid sweeps that certify the identities numerically, factor-by-factor
//! cross-checks between families, and the nested-radical argument table.
//!
//! Every grid point is either tested or skipped with a reason; points are
//! ordered row-major over real part, imaginary part, `q`, then index spec,
//! and evaluated in parallel with results collected in that order.

use rayon::prelude::*;
use rug::{Complex, Float};
use serde::{Deserialize, Serialize};

use crate::convergence::{residual_vs_sinc, run_to_tolerance};
use crate::error::{Error, Result};
use crate::gamma_product::{gamma_inner, gamma_partial};
use crate::numerics::{self, sinc_ref, Precision};
use crate::product::{self, Flag, Flags, FormulaId, ProductRequest, MAX_TERMS};
use crate::serde_complex;

/// Evenly spaced samples `min..=max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: u32,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: u32) -> Result<Self> {
        if count == 0 || !min.is_finite() || !max.is_finite() || min > max {
            return Err(Error::InvalidRequest(format!(
                "invalid axis {min}:{max}:{count}"
            )));
        }
        Ok(Axis { min, max, count })
    }

    pub fn single(value: f64) -> Self {
        Axis {
            min: value,
            max: value,
            count: 1,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / f64::from(self.count - 1);
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + step * f64::from(i)
                }
            })
            .collect()
    }

    /// Parses `a:b:n`.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidRequest(format!("axis must be min:max:count, got {s:?}"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let min: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let max: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: u32 = parts[2].trim().parse().map_err(|_| bad())?;
        Axis::new(min, max, count)
    }
}

/// Which indices a grid point is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexSpec {
    /// Finite product over `k = m..n`.
    Range { m: u32, n: u32 },
    /// Infinite product truncated after `n` factors.
    Terms { n: u32 },
    /// Infinite product truncated where the remainder model meets the tolerance.
    ToTolerance,
    /// A single factor (cross-checks).
    Term { k: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re: Axis,
    pub im: Axis,
    pub q_set: Vec<u32>,
    pub index_specs: Vec<IndexSpec>,
}

impl GridSpec {
    pub fn new(re: Axis, im: Axis, q_set: Vec<u32>, index_specs: Vec<IndexSpec>) -> Result<Self> {
        if q_set.is_empty() || q_set.iter().any(|&q| q < 2) {
            return Err(Error::InvalidRequest(
                "q set must be non-empty with every q >= 2".into(),
            ));
        }
        if index_specs.is_empty() {
            return Err(Error::InvalidRequest(
                "at least one index spec is required".into(),
            ));
        }
        Ok(GridSpec {
            re,
            im,
            q_set,
            index_specs,
        })
    }

    /// Parses `"re=a:b:n,im=a:b:n"`; a missing axis defaults to the single value 0.
    pub fn parse_axes(s: &str) -> Result<(Axis, Axis)> {
        let mut re = None;
        let mut im = None;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| {
                Error::InvalidRequest(format!("grid component {part:?} is not key=value"))
            })?;
            match key.trim() {
                "re" => re = Some(Axis::parse(value)?),
                "im" => im = Some(Axis::parse(value)?),
                other => {
                    return Err(Error::InvalidRequest(format!(
                        "unknown grid axis {other:?}"
                    )))
                }
            }
        }
        if re.is_none() && im.is_none() {
            return Err(Error::InvalidRequest(
                "grid needs at least one of re=, im=".into(),
            ));
        }
        Ok((
            re.unwrap_or(Axis::single(0.0)),
            im.unwrap_or(Axis::single(0.0)),
        ))
    }

    /// Default sweep for a family: re, im in [-3, 3] with 13 samples each and
    /// q in {2, 3, 4, 5}. The finite exponent tower instead sweeps real
    /// z in (0, 0.05], where every base stays positive for q in {2, 3}.
    pub fn default_for(formula: FormulaId) -> Self {
        let square = Axis {
            min: -3.0,
            max: 3.0,
            count: 13,
        };
        let ranges = vec![
            IndexSpec::Range { m: 0, n: 3 },
            IndexSpec::Range { m: 1, n: 4 },
            IndexSpec::Range { m: 2, n: 5 },
        ];
        match formula {
            FormulaId::ExpTowerFinite => GridSpec {
                re: Axis {
                    min: 0.005,
                    max: 0.05,
                    count: 10,
                },
                im: Axis::single(0.0),
                q_set: vec![2, 3],
                index_specs: vec![
                    IndexSpec::Range { m: 0, n: 2 },
                    IndexSpec::Range { m: 1, n: 3 },
                    IndexSpec::Range { m: 0, n: 3 },
                ],
            },
            FormulaId::MorrieClassic => GridSpec {
                re: square,
                im: square,
                q_set: vec![2],
                index_specs: ranges,
            },
            FormulaId::TelescopeFinite => GridSpec {
                re: square,
                im: square,
                q_set: vec![2, 3, 4, 5],
                index_specs: ranges,
            },
            _ => GridSpec {
                re: square,
                im: square,
                q_set: vec![2, 3, 4, 5],
                index_specs: vec![IndexSpec::ToTolerance],
            },
        }
    }

    /// Default factor-by-factor cross-check grid: a 9 by 9 square of
    /// half-width 2, factors `k = 0..=6` (cosine sum) or `0..=3` (gamma).
    pub fn crosscheck_default(pair: Crosscheck) -> Self {
        let axis = Axis {
            min: -2.0,
            max: 2.0,
            count: 9,
        };
        let (q_set, k_max) = match pair {
            Crosscheck::CosineSumVsRatio => (vec![2, 3], 6),
            Crosscheck::GammaVsRatio => (vec![2, 3, 4, 5], 3),
        };
        GridSpec {
            re: axis,
            im: axis,
            q_set,
            index_specs: (0..=k_max).map(|k| IndexSpec::Term { k }).collect(),
        }
    }

    pub fn cardinality(&self) -> usize {
        self.re.count as usize * self.im.count as usize * self.q_set.len() * self.index_specs.len()
    }

    fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.cardinality());
        for re in self.re.points() {
            for im in self.im.points() {
                for &q in &self.q_set {
                    for &index in &self.index_specs {
                        out.push(GridPoint { re, im, q, index });
                    }
                }
            }
        }
        out
    }

    fn is_real(&self) -> bool {
        self.im.points().iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub re: f64,
    pub im: f64,
    pub q: u32,
    pub index: IndexSpec,
}

impl GridPoint {
    fn z(&self, prec: Precision) -> Complex {
        numerics::complex(prec, self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum PointStatus {
    Tested {
        residual: f64,
        terms_used: u32,
        flags: Flags,
    },
    Skipped {
        reason: String,
        flags: Flags,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub point: GridPoint,
    #[serde(flatten)]
    pub status: PointStatus,
}

/// How an identity's numerical outcome is classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Reported without pass/fail force: the identity is unproved or its
    /// printed form is ambiguous at the tested points.
    Finding,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub formula: FormulaId,
    /// Second family for cross-checks.
    pub compared_with: Option<FormulaId>,
    pub tolerance: f64,
    pub precision_bits: u32,
    pub grid: GridSpec,
    pub cardinality: usize,
    pub points_tested: usize,
    pub points_skipped: usize,
    pub max_rel_residual: Option<f64>,
    pub worst_point: Option<GridPoint>,
    pub verdict: Verdict,
    pub per_point: Vec<PointRecord>,
}

impl VerificationReport {
    fn assemble(
        formula: FormulaId,
        compared_with: Option<FormulaId>,
        grid: &GridSpec,
        tol: f64,
        prec: Precision,
        per_point: Vec<PointRecord>,
        classify: impl FnOnce(usize, Option<f64>, &[PointRecord]) -> Verdict,
    ) -> Self {
        let mut tested = 0;
        let mut worst: Option<(f64, GridPoint)> = None;
        for rec in &per_point {
            if let PointStatus::Tested { residual, .. } = rec.status {
                tested += 1;
                let replace = match &worst {
                    None => true,
                    Some((r, _)) => numerics::cmp_residual(residual, *r).is_gt(),
                };
                if replace {
                    worst = Some((residual, rec.point));
                }
            }
        }
        let max = worst.as_ref().map(|w| w.0);
        let verdict = classify(tested, max, &per_point);
        VerificationReport {
            formula,
            compared_with,
            tolerance: tol,
            precision_bits: prec.bits(),
            grid: grid.clone(),
            cardinality: per_point.len(),
            points_tested: tested,
            points_skipped: per_point.len() - tested,
            max_rel_residual: max,
            worst_point: worst.map(|w| w.1),
            verdict,
            per_point,
        }
    }

    /// Reasons for skipped points with their counts, sorted by reason.
    pub fn skip_summary(&self) -> Vec<(String, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for rec in &self.per_point {
            if let PointStatus::Skipped { reason, .. } = &rec.status {
                *counts.entry(reason.clone()).or_insert(0) += 1;
            }
        }
        counts.into_iter().collect()
    }
}

fn pass_or(tested: usize, max: Option<f64>, tol: f64, otherwise: Verdict) -> Verdict {
    match max {
        Some(m) if tested > 0 && m <= tol => Verdict::Pass,
        _ => otherwise,
    }
}

fn skipped(e: Error) -> PointStatus {
    let mut flags = Flags::new();
    if matches!(e, Error::PoleProximity(_)) {
        flags.insert(Flag::PoleSkip);
    }
    PointStatus::Skipped {
        reason: e.to_string(),
        flags,
    }
}

fn not_applicable(point: &GridPoint) -> PointStatus {
    PointStatus::Skipped {
        reason: format!("index spec {:?} does not apply", point.index),
        flags: Flags::new(),
    }
}

/// Residual of one identity at one grid point.
fn identity_point(formula: FormulaId, point: &GridPoint, tol: f64, prec: Precision) -> PointStatus {
    let z = point.z(prec);
    let q = point.q;
    let outcome: Result<(f64, u32, Flags)> = match (formula.is_finite(), point.index) {
        (true, IndexSpec::Range { m, n }) => (|| {
            let req = ProductRequest::finite(formula, z.clone(), q, m, n, prec);
            let lhs = product::partial_product(&req)?;
            let (rhs, mut flags) = match formula {
                FormulaId::MorrieClassic => (product::oracle_partial(&req)?, Flags::new()),
                _ => {
                    let r = product::finite_rhs(&req)?;
                    (r.value, r.flags)
                }
            };
            flags.extend(lhs.flags.iter().copied());
            Ok((numerics::rel_diff(&lhs.value, &rhs), lhs.terms_used, flags))
        })(),
        (false, IndexSpec::Terms { n }) => (|| {
            let r = if formula == FormulaId::GammaInf {
                gamma_partial(&z, q, n, prec)?
            } else {
                product::partial_product(&ProductRequest::infinite(formula, z.clone(), q, n, prec))?
            };
            Ok((residual_vs_sinc(&r.value, &z, prec), r.terms_used, r.flags))
        })(),
        (false, IndexSpec::ToTolerance) => run_to_tolerance(formula, &z, q, tol, MAX_TERMS, prec)
            .map(|r| (residual_vs_sinc(&r.value, &z, prec), r.terms_used, r.flags)),
        _ => return not_applicable(point),
    };
    match outcome {
        Ok((residual, terms_used, flags)) => PointStatus::Tested {
            residual,
            terms_used,
            flags,
        },
        Err(e) => skipped(e),
    }
}

/// Sweeps `grid` and compares each side of the identity: `|LHS/RHS - 1|` for
/// finite families, `|P_N / sinc z - 1|` for infinite ones.
pub fn verify_identity(
    formula: FormulaId,
    grid: &GridSpec,
    tol: f64,
    prec: Precision,
) -> VerificationReport {
    let points = grid.points();
    let per_point: Vec<PointRecord> = points
        .par_iter()
        .map(|p| PointRecord {
            point: *p,
            status: identity_point(formula, p, tol, prec),
        })
        .collect();
    let real_grid = grid.is_real();
    VerificationReport::assemble(
        formula,
        None,
        grid,
        tol,
        prec,
        per_point,
        |tested, max, recs| match formula {
            FormulaId::GammaInf => Verdict::Finding,
            FormulaId::ExpTowerFinite => {
                let branch_clean = recs.iter().all(|r| match &r.status {
                    PointStatus::Tested { flags, .. } => !flags.contains(&Flag::BranchWarning),
                    PointStatus::Skipped { .. } => true,
                });
                if real_grid && branch_clean {
                    pass_or(tested, max, tol, Verdict::Finding)
                } else {
                    Verdict::Finding
                }
            }
            _ => pass_or(tested, max, tol, Verdict::Fail),
        },
    )
}

/// Family pairs whose factors are compared one by one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crosscheck {
    /// Cosine-sum factor at `q` against the ratio factor at base `2q`.
    CosineSumVsRatio,
    /// Gamma-ratio factor against the ratio factor at the same `q`.
    GammaVsRatio,
}

impl Crosscheck {
    pub fn formulas(self) -> (FormulaId, FormulaId) {
        match self {
            Crosscheck::CosineSumVsRatio => (FormulaId::CosineSumInf, FormulaId::RatioInf),
            Crosscheck::GammaVsRatio => (FormulaId::GammaInf, FormulaId::RatioInf),
        }
    }

    pub fn from_pair(a: FormulaId, b: FormulaId) -> Option<Self> {
        match (a, b) {
            (FormulaId::CosineSumInf, FormulaId::RatioInf) => Some(Crosscheck::CosineSumVsRatio),
            (FormulaId::GammaInf, FormulaId::RatioInf) => Some(Crosscheck::GammaVsRatio),
            _ => None,
        }
    }
}

fn crosscheck_point(pair: Crosscheck, point: &GridPoint, prec: Precision) -> PointStatus {
    let IndexSpec::Term { k } = point.index else {
        return not_applicable(point);
    };
    let z = point.z(prec);
    let q = point.q;
    let outcome: Result<(f64, Flags)> = (|| match pair {
        Crosscheck::CosineSumVsRatio => {
            let a = product::term(
                &ProductRequest::infinite(FormulaId::CosineSumInf, z.clone(), q, 0, prec),
                k,
            )?;
            let b = product::term(
                &ProductRequest::infinite(FormulaId::RatioInf, z.clone(), 2 * q, 0, prec),
                k,
            )?;
            let diff = Complex::with_val(prec.plus(16).bits(), &a.log_value - &b.log_value);
            let ratio = Complex::with_val(prec.bits(), diff.exp_ref());
            let mut flags = a.flags;
            flags.extend(b.flags);
            Ok((
                numerics::rel_diff(&ratio, &Complex::with_val(prec.bits(), (1, 0))),
                flags,
            ))
        }
        Crosscheck::GammaVsRatio => {
            let b = gamma_inner(&z, q, k, prec)?;
            Ok((b.ratio_residual, Flags::new()))
        }
    })();
    match outcome {
        Ok((residual, flags)) => PointStatus::Tested {
            residual,
            terms_used: 1,
            flags,
        },
        Err(e) => skipped(e),
    }
}

/// Largest factor-by-factor discrepancy `|term_a / term_b - 1|` over the grid.
pub fn crosscheck_terms(
    pair: Crosscheck,
    grid: &GridSpec,
    tol: f64,
    prec: Precision,
) -> VerificationReport {
    let points = grid.points();
    let per_point: Vec<PointRecord> = points
        .par_iter()
        .map(|p| PointRecord {
            point: *p,
            status: crosscheck_point(pair, p, prec),
        })
        .collect();
    let (a, b) = pair.formulas();
    VerificationReport::assemble(
        a,
        Some(b),
        grid,
        tol,
        prec,
        per_point,
        |tested, max, _| match pair {
            Crosscheck::CosineSumVsRatio => pass_or(tested, max, tol, Verdict::Fail),
            Crosscheck::GammaVsRatio => Verdict::Finding,
        },
    )
}

/// `z_n = 2n sin(π/(2n)) / π` with a note naming its radical form for small `n`.
pub fn example1_z(n: u32, prec: Precision) -> Result<(Complex, String)> {
    if n < 2 {
        return Err(Error::InvalidRequest(format!(
            "n must be at least 2, got {n}"
        )));
    }
    let pi = numerics::pi(prec);
    let bits = pi.prec();
    let angle = Float::with_val(bits, &pi / (2 * n));
    let z = Float::with_val(bits, angle.sin_ref()) * (2 * n) / &pi;
    let note = match n {
        2 => "2*sqrt(2)/pi".to_string(),
        3 => "3/pi".to_string(),
        4 => "4*sqrt(2-sqrt(2))/pi".to_string(),
        5 => "5*(sqrt(5)-1)/(2*pi)".to_string(),
        6 => "3*(sqrt(6)-sqrt(2))/pi".to_string(),
        _ => format!("{}*sin(pi/{})/pi", 2 * n, 2 * n),
    };
    Ok((Complex::with_val(prec.bits(), (z, 0)), note))
}

/// One row of the nested-radical table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Example1Row {
    pub n: u32,
    #[serde(serialize_with = "serde_complex::serialize")]
    pub z: Complex,
    pub closed_form: String,
    pub formula: FormulaId,
    pub q: u32,
    pub terms_used: u32,
    #[serde(serialize_with = "serde_complex::serialize")]
    pub product: Complex,
    #[serde(serialize_with = "serde_complex::serialize")]
    pub sinc: Complex,
    pub residual: f64,
    pub flags: Flags,
}

/// Evaluates an infinite product at `z_n` and compares it with `sinc(z_n)`.
pub fn example1_row(
    n: u32,
    formula: FormulaId,
    q: u32,
    terms: u32,
    prec: Precision,
) -> Result<Example1Row> {
    if formula.is_finite() {
        return Err(Error::InvalidRequest(format!(
            "{formula} is a finite product"
        )));
    }
    let (z, closed_form) = example1_z(n, prec)?;
    let r = if formula == FormulaId::GammaInf {
        gamma_partial(&z, q, terms, prec)?
    } else {
        product::partial_product(&ProductRequest::infinite(
            formula,
            z.clone(),
            q,
            terms,
            prec,
        ))?
    };
    let sinc = sinc_ref(&z, prec);
    let residual = residual_vs_sinc(&r.value, &z, prec);
    Ok(Example1Row {
        n,
        z,
        closed_form,
        formula,
        q,
        terms_used: r.terms_used,
        product: r.value,
        sinc,
        residual,
        flags: r.flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Precision {
        Precision::new(113).unwrap()
    }

    #[test]
    fn axis_points_and_parse() {
        let a = Axis::parse("-3:3:13").unwrap();
        let pts = a.points();
        assert_eq!(pts.len(), 13);
        assert_eq!(pts[0], -3.0);
        assert_eq!(pts[6], 0.0);
        assert_eq!(pts[12], 3.0);
        assert!(Axis::parse("1:0:3").is_err());
        assert!(Axis::parse("0:1:0").is_err());
        assert!(Axis::parse("0:1").is_err());
        let (re, im) = GridSpec::parse_axes("re=-2:2:9,im=-1:1:3").unwrap();
        assert_eq!((re.count, im.count), (9, 3));
        assert!(GridSpec::parse_axes("x=0:1:2").is_err());
    }

    #[test]
    fn accounting_covers_every_point() {
        let grid = GridSpec::new(
            Axis::new(-1.0, 1.0, 3).unwrap(),
            Axis::new(-1.0, 1.0, 3).unwrap(),
            vec![2, 3],
            vec![IndexSpec::Range { m: 0, n: 2 }, IndexSpec::Terms { n: 3 }],
        )
        .unwrap();
        let r = verify_identity(FormulaId::TelescopeFinite, &grid, 1e-12, p());
        assert_eq!(r.points_tested + r.points_skipped, grid.cardinality());
        // z = 0 hits csc(0); Terms specs do not apply to a finite family.
        let skipped_at_origin = r
            .per_point
            .iter()
            .filter(|rec| rec.point.re == 0.0 && rec.point.im == 0.0)
            .all(|rec| matches!(rec.status, PointStatus::Skipped { .. }));
        assert!(skipped_at_origin);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn viete_single_point() {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let grid = GridSpec::new(
            Axis::single(half_pi),
            Axis::single(0.0),
            vec![2],
            vec![IndexSpec::ToTolerance],
        )
        .unwrap();
        let r = verify_identity(FormulaId::Viete, &grid, 1e-10, p());
        assert_eq!(r.points_tested, 1);
        assert!(r.max_rel_residual.unwrap() <= 1e-10);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn crosscheck_cosine_single_term() {
        // (cos(1/4) + cos(3/4)) / 2 against sin(1) csc(1/4) / 4.
        let grid = GridSpec::new(
            Axis::single(1.0),
            Axis::single(0.0),
            vec![2],
            vec![IndexSpec::Term { k: 0 }],
        )
        .unwrap();
        let r = crosscheck_terms(Crosscheck::CosineSumVsRatio, &grid, 1e-12, p());
        assert!(r.max_rel_residual.unwrap() < 1e-30);
        let direct = ((0.25f64).cos() + (0.75f64).cos()) / 2.0;
        let ratio = 1f64.sin() / (4.0 * (0.25f64).sin());
        assert!((direct - ratio).abs() < 1e-15);
    }

    #[test]
    fn crosscheck_gamma_at_zero() {
        let grid = GridSpec::new(
            Axis::single(0.0),
            Axis::single(0.0),
            vec![2, 5],
            vec![IndexSpec::Term { k: 0 }, IndexSpec::Term { k: 2 }],
        )
        .unwrap();
        let r = crosscheck_terms(Crosscheck::GammaVsRatio, &grid, 1e-12, p());
        assert_eq!(r.points_tested, 4);
        assert_eq!(r.max_rel_residual, Some(0.0));
        assert_eq!(r.verdict, Verdict::Finding);
    }

    #[test]
    fn example1_closed_forms() {
        let pi = std::f64::consts::PI;
        let cases = [
            (2, 2.0 * 2f64.sqrt() / pi),
            (3, 3.0 / pi),
            (4, 4.0 * (2.0 - 2f64.sqrt()).sqrt() / pi),
            (5, 5.0 * (5f64.sqrt() - 1.0) / (2.0 * pi)),
            (6, 3.0 * (6f64.sqrt() - 2f64.sqrt()) / pi),
        ];
        for (n, expect) in cases {
            let (z, _) = example1_z(n, p()).unwrap();
            assert!((z.real().to_f64() - expect).abs() < 1e-15, "n = {n}");
        }
        assert!((example1_z(2, p()).unwrap().0.real().to_f64() - 0.90032).abs() < 1e-5);
        assert!(example1_z(1, p()).is_err());
    }

    #[test]
    fn example1_large_n_tends_to_sin_one() {
        let row = example1_row(10_000, FormulaId::RatioInf, 2, 24, p()).unwrap();
        assert!((row.z.real().to_f64() - 1.0).abs() < 1e-7);
        assert!((row.product.real().to_f64() - 1f64.sin()).abs() < 1e-7);
    }
}
