//! The eval, verify, converge and table subcommands.

use std::io::Write;

use rug::{Complex, Integer};
use serde::Serialize;
use trigprod::convergence::{
    fit_rate, residual_vs_sinc, run_to_tolerance, ConvergenceReport, MIN_FIT_SAMPLES,
};
use trigprod::gamma_product::gamma_partial;
use trigprod::numerics::rel_diff;
use trigprod::product::{finite_rhs, oracle_partial, partial_product};
use trigprod::serde_complex;
use trigprod::verification::{
    crosscheck_terms, example1_row, verify_identity, Crosscheck, Example1Row, GridSpec, IndexSpec,
    PointStatus, Verdict, VerificationReport,
};
use trigprod::{Error, EvalResult, FactorForm, Flag, Flags, FormulaId, Precision, ProductRequest};

use crate::args::{ConvergeArgs, EvalArgs, Format, TableArgs, VerifyArgs};
use crate::output::{self, complex_text, csv_writer, flags_text, opt_f64};
use crate::{input, CliError, EXIT_OK, EXIT_VERIFY_FAILED};

fn flag_warnings(flags: &Flags) -> Vec<String> {
    flags
        .iter()
        .map(|f| match f {
            Flag::PoleSkip => "some points were skipped by the pole guard".to_string(),
            Flag::BranchWarning => {
                "a fractional power was taken near or across the principal branch cut".to_string()
            }
            Flag::RangeEscape => {
                "a factor was replaced by its limit or left floating-point range".to_string()
            }
            Flag::PrecisionRetry => {
                "working precision was raised to absorb cancellation".to_string()
            }
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct EvalEcho {
    formula: FormulaId,
    formula_name: &'static str,
    z: String,
    q: u32,
    m: Option<u32>,
    n: Option<u32>,
    terms: Option<u32>,
    tol: Option<f64>,
    form: FactorForm,
}

#[derive(Debug, Serialize)]
struct EvalPayload {
    formula: FormulaId,
    #[serde(serialize_with = "serde_complex::serialize")]
    z: Complex,
    #[serde(serialize_with = "serde_complex::serialize")]
    value: Complex,
    #[serde(serialize_with = "serde_complex::serialize")]
    log_value: Complex,
    /// Full logarithm is `log_value + 2πi * winding`.
    #[serde(serialize_with = "serde_complex::serialize_integer")]
    winding: Integer,
    terms_used: u32,
    est_remainder: Option<f64>,
    flags: Flags,
    precision_retries: u32,
    /// Closed form of the same request (finite right-hand side or telescoped partial product).
    #[serde(serialize_with = "serde_complex::serialize_opt")]
    closed_form: Option<Complex>,
    closed_form_rel_diff: Option<f64>,
    /// `|value / sinc z - 1|` for infinite products.
    sinc_rel_diff: Option<f64>,
}

pub fn eval(
    a: &EvalArgs,
    prec: Precision,
    fmt: Format,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let formula = input::formula(&a.formula)?;
    let z = input::complex(&a.z, prec)?;
    let form = input::form(&a.form)?;
    let mut warnings = Vec::new();

    let (req, result) = if formula.is_finite() {
        if a.terms.is_some() || a.tol.is_some() {
            return Err(CliError::usage(format!(
                "{formula} is finite: use --m/--n, not --terms/--tol"
            )));
        }
        let n =
            a.n.ok_or_else(|| CliError::usage(format!("{formula} needs --n")))?;
        let req = ProductRequest::finite(formula, z.clone(), a.q, a.m.unwrap_or(0), n, prec)
            .with_form(form);
        let r = partial_product(&req)?;
        (req, r)
    } else {
        if a.m.is_some() || a.n.is_some() {
            return Err(CliError::usage(format!(
                "{formula} is infinite: use --terms or --tol, not --m/--n"
            )));
        }
        let terms = match (a.terms, a.tol) {
            (Some(t), _) => t,
            (None, Some(tol)) => {
                run_to_tolerance(formula, &z, a.q, tol, trigprod::product::MAX_TERMS, prec)?
                    .terms_used
            }
            (None, None) => {
                return Err(CliError::usage(format!("{formula} needs --terms or --tol")))
            }
        };
        let req = ProductRequest::infinite(formula, z.clone(), a.q, terms, prec).with_form(form);
        let r = if formula == FormulaId::GammaInf && form == FactorForm::Standard {
            gamma_partial(&z, a.q, terms, prec)?
        } else {
            partial_product(&req)?
        };
        (req, r)
    };

    let closed = closed_form(&req, &mut warnings);
    let closed_diff = closed.as_ref().map(|c| rel_diff(&result.value, c));
    if let (Some(d), true) = (closed_diff, formula == FormulaId::ExpTowerFinite) {
        if d > 2f64.powi(20 - prec.bits() as i32) {
            warnings.push(format!("product differs from its closed form by {d:e}; the csc-step form closes the identity"));
        }
    }
    if formula == FormulaId::GammaInf {
        warnings.push(
            "the gamma-ratio product is not certified against sinc z; value reported as computed"
                .into(),
        );
    }
    warnings.extend(flag_warnings(&result.flags));
    let sinc_diff = (!formula.is_finite()).then(|| residual_vs_sinc(&result.value, &z, prec));

    let echo = EvalEcho {
        formula,
        formula_name: formula.cli_name(),
        z: a.z.clone(),
        q: a.q,
        m: a.m,
        n: a.n,
        terms: a.terms,
        tol: a.tol,
        form,
    };
    let EvalResult {
        value,
        log_value,
        winding,
        terms_used,
        est_remainder,
        flags,
        precision_retries,
        ..
    } = result;
    let payload = EvalPayload {
        formula,
        z,
        value,
        log_value,
        winding,
        terms_used,
        est_remainder,
        flags,
        precision_retries,
        closed_form: closed,
        closed_form_rel_diff: closed_diff,
        sinc_rel_diff: sinc_diff,
    };
    match fmt {
        Format::Json => output::write_json(out, "eval", prec.bits(), &echo, &payload, warnings)?,
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record([
                "formula",
                "z_re",
                "z_im",
                "value_re",
                "value_im",
                "log_re",
                "log_im",
                "winding",
                "terms_used",
                "est_remainder",
                "flags",
                "precision_retries",
                "precision_bits",
            ])?;
            w.write_record([
                formula.tag().to_string(),
                output::re(&payload.z),
                output::im(&payload.z),
                output::re(&payload.value),
                output::im(&payload.value),
                output::re(&payload.log_value),
                output::im(&payload.log_value),
                payload.winding.to_string(),
                payload.terms_used.to_string(),
                opt_f64(payload.est_remainder),
                flags_text(&payload.flags),
                payload.precision_retries.to_string(),
                prec.bits().to_string(),
            ])?;
            w.flush()?;
        }
        Format::Text => {
            writeln!(
                out,
                "formula         {} ({})",
                formula.tag(),
                formula.cli_name()
            )?;
            writeln!(out, "z               {}", complex_text(&payload.z))?;
            writeln!(out, "value           {}", complex_text(&payload.value))?;
            writeln!(
                out,
                "log value       {} (+ 2 pi i * {})",
                complex_text(&payload.log_value),
                payload.winding
            )?;
            writeln!(out, "terms used      {}", payload.terms_used)?;
            writeln!(out, "est. remainder  {}", opt_f64(payload.est_remainder))?;
            if let Some(c) = &payload.closed_form {
                writeln!(out, "closed form     {}", complex_text(c))?;
                writeln!(
                    out,
                    "  rel. diff     {}",
                    opt_f64(payload.closed_form_rel_diff)
                )?;
            }
            if let Some(d) = payload.sinc_rel_diff {
                writeln!(out, "vs sinc z       {d:e}")?;
            }
            writeln!(out, "flags           {}", flags_text(&payload.flags))?;
            writeln!(out, "retries         {}", payload.precision_retries)?;
            writeln!(out, "precision       {} bits", prec.bits())?;
            for w in &warnings {
                writeln!(out, "warning: {w}")?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn closed_form(req: &ProductRequest, warnings: &mut Vec<String>) -> Option<Complex> {
    let r = match req.formula {
        FormulaId::TelescopeFinite | FormulaId::ExpTowerFinite => finite_rhs(req).map(|r| r.value),
        FormulaId::GammaInf => return None,
        _ => oracle_partial(req),
    };
    match r {
        Ok(v) => Some(v),
        Err(Error::UnsupportedFormula(_)) => None,
        Err(e) => {
            warnings.push(format!("closed form unavailable: {e}"));
            None
        }
    }
}

#[derive(Debug, Serialize)]
struct VerifyEcho {
    formula: Option<String>,
    crosscheck: Option<String>,
    grid: GridSpec,
    tol: f64,
}

#[derive(Debug, Serialize)]
struct SkipCount {
    reason: String,
    count: usize,
}

#[derive(Debug, Serialize)]
struct VerifyPayload {
    #[serde(flatten)]
    report: VerificationReport,
    skip_summary: Vec<SkipCount>,
}

fn build_grid(base: GridSpec, a: &VerifyArgs) -> Result<GridSpec, CliError> {
    let (re, im) = match &a.grid {
        Some(g) => GridSpec::parse_axes(g)?,
        None => (base.re, base.im),
    };
    let q_set = match &a.q_set {
        Some(s) => input::u32_list(s, "q")?,
        None => base.q_set,
    };
    Ok(GridSpec::new(re, im, q_set, base.index_specs)?)
}

pub fn verify(
    a: &VerifyArgs,
    prec: Precision,
    fmt: Format,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    if !(a.tol > 0.0 && a.tol.is_finite()) {
        return Err(CliError::usage(format!(
            "tolerance must be positive, got {}",
            a.tol
        )));
    }
    let report = if let Some(cc) = &a.crosscheck {
        let (x, y) = cc
            .split_once(':')
            .ok_or_else(|| CliError::usage(format!("crosscheck {cc:?} is not a:b")))?;
        let pair =
            Crosscheck::from_pair(input::formula(x)?, input::formula(y)?).ok_or_else(|| {
                CliError::usage(format!(
                    "no factor-by-factor comparison for {cc:?}; use eq10:eq9 or eq11:eq9"
                ))
            })?;
        if a.ranges.is_some() || a.terms.is_some() {
            return Err(CliError::usage(
                "--ranges and --terms do not apply to cross-checks",
            ));
        }
        let mut grid = build_grid(GridSpec::crosscheck_default(pair), a)?;
        if let Some(k) = a.k_max {
            grid.index_specs = (0..=k).map(|k| IndexSpec::Term { k }).collect();
        }
        crosscheck_terms(pair, &grid, a.tol, prec)
    } else {
        let formula = input::formula(a.formula.as_deref().unwrap_or_default())?;
        let mut grid = build_grid(GridSpec::default_for(formula), a)?;
        if a.k_max.is_some() {
            return Err(CliError::usage("--k-max applies to cross-checks only"));
        }
        if formula.is_finite() {
            if a.terms.is_some() {
                return Err(CliError::usage(format!(
                    "{formula} is finite: use --ranges, not --terms"
                )));
            }
            if let Some(r) = &a.ranges {
                grid.index_specs = input::ranges(r)?
                    .into_iter()
                    .map(|(m, n)| IndexSpec::Range { m, n })
                    .collect();
            }
            if let Some((m, n)) = grid.index_specs.iter().find_map(|s| match *s {
                IndexSpec::Range { m, n } if m >= n => Some((m, n)),
                _ => None,
            }) {
                return Err(CliError::usage(format!("empty index range {m}:{n}")));
            }
        } else {
            if a.ranges.is_some() {
                return Err(CliError::usage(format!(
                    "{formula} is infinite: use --terms, not --ranges"
                )));
            }
            if let Some(n) = a.terms {
                grid.index_specs = vec![IndexSpec::Terms { n }];
            }
        }
        if formula == FormulaId::MorrieClassic && grid.q_set.iter().any(|&q| q != 2) {
            return Err(CliError::usage(
                "the classic Morrie product has base q = 2 only",
            ));
        }
        let grid = GridSpec::new(grid.re, grid.im, grid.q_set, grid.index_specs)?;
        verify_identity(formula, &grid, a.tol, prec)
    };

    let mut warnings = Vec::new();
    match report.verdict {
        Verdict::Finding => warnings.push(match report.max_rel_residual {
            Some(m) => format!("verdict is a finding, not a pass: max residual {m:e}"),
            None => "verdict is a finding: no point could be tested".into(),
        }),
        Verdict::Fail if report.points_tested == 0 => {
            warnings.push("no point could be tested".into())
        }
        _ => {}
    }
    if report.points_skipped > 0 {
        warnings.push(format!(
            "{} of {} points skipped",
            report.points_skipped, report.cardinality
        ));
    }
    let code = if report.verdict == Verdict::Fail {
        EXIT_VERIFY_FAILED
    } else {
        EXIT_OK
    };
    let skip_summary = report
        .skip_summary()
        .into_iter()
        .map(|(reason, count)| SkipCount { reason, count })
        .collect();
    let mut payload = VerifyPayload {
        report,
        skip_summary,
    };
    if a.summary {
        payload.report.per_point.clear();
    }
    let echo = VerifyEcho {
        formula: a.formula.clone(),
        crosscheck: a.crosscheck.clone(),
        grid: payload.report.grid.clone(),
        tol: a.tol,
    };

    match fmt {
        Format::Json => output::write_json(out, "verify", prec.bits(), &echo, &payload, warnings)?,
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record([
                "re",
                "im",
                "q",
                "index",
                "status",
                "residual",
                "terms_used",
                "flags",
                "reason",
            ])?;
            for rec in &payload.report.per_point {
                let p = rec.point;
                let (status, residual, terms, flags, reason) = match &rec.status {
                    PointStatus::Tested {
                        residual,
                        terms_used,
                        flags,
                    } => (
                        "tested",
                        format!("{residual:e}"),
                        terms_used.to_string(),
                        flags_text(flags),
                        String::new(),
                    ),
                    PointStatus::Skipped { reason, flags } => (
                        "skipped",
                        String::new(),
                        String::new(),
                        flags_text(flags),
                        reason.clone(),
                    ),
                };
                w.write_record([
                    p.re.to_string(),
                    p.im.to_string(),
                    p.q.to_string(),
                    index_text(&p.index),
                    status.to_string(),
                    residual,
                    terms,
                    flags,
                    reason,
                ])?;
            }
            w.flush()?;
        }
        Format::Text => {
            let r = &payload.report;
            match r.compared_with {
                Some(b) => writeln!(out, "cross-check     {} vs {}", r.formula.tag(), b.tag())?,
                None => writeln!(out, "identity        {}", r.formula.tag())?,
            }
            writeln!(out, "verdict         {:?}", r.verdict)?;
            writeln!(out, "tolerance       {:e}", r.tolerance)?;
            writeln!(
                out,
                "points          {} tested, {} skipped, {} total",
                r.points_tested, r.points_skipped, r.cardinality
            )?;
            writeln!(out, "max residual    {}", opt_f64(r.max_rel_residual))?;
            if let Some(p) = r.worst_point {
                writeln!(
                    out,
                    "worst point     z = {}, q = {}, {}",
                    point_text(p.re, p.im),
                    p.q,
                    index_text(&p.index)
                )?;
            }
            for s in &payload.skip_summary {
                writeln!(out, "skipped {:>6}  {}", s.count, s.reason)?;
            }
            writeln!(out, "precision       {} bits", prec.bits())?;
            for w in &warnings {
                writeln!(out, "warning: {w}")?;
            }
        }
    }
    Ok(code)
}

fn point_text(re: f64, im: f64) -> String {
    if im.is_sign_negative() {
        format!("{re} - {}i", -im)
    } else {
        format!("{re} + {im}i")
    }
}

fn index_text(index: &IndexSpec) -> String {
    match index {
        IndexSpec::Range { m, n } => format!("k={m}..{n}"),
        IndexSpec::Terms { n } => format!("N={n}"),
        IndexSpec::ToTolerance => "N=auto".into(),
        IndexSpec::Term { k } => format!("k={k}"),
    }
}

#[derive(Debug, Serialize)]
struct ConvergeEcho {
    formula: FormulaId,
    z: String,
    q: u32,
    min_terms: u32,
    max_terms: u32,
}

pub fn converge(
    a: &ConvergeArgs,
    prec: Precision,
    fmt: Format,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let formula = input::formula(&a.formula)?;
    if formula.is_finite() {
        return Err(CliError::usage(format!("{formula} is a finite product")));
    }
    if a.min_terms > a.max_terms {
        return Err(CliError::usage("--min-terms exceeds --max-terms"));
    }
    let z = input::complex(&a.z, prec)?;
    let report: ConvergenceReport = fit_rate(formula, &z, a.q, a.min_terms..=a.max_terms, prec)?;
    let echo = ConvergeEcho {
        formula,
        z: a.z.clone(),
        q: a.q,
        min_terms: a.min_terms,
        max_terms: a.max_terms,
    };
    let mut warnings = Vec::new();
    if !report.excluded.is_empty() {
        warnings.push(format!(
            "{} truncations excluded from the fit (at least {MIN_FIT_SAMPLES} usable samples required)",
            report.excluded.len()
        ));
    }
    match fmt {
        Format::Json => output::write_json(out, "converge", prec.bits(), &echo, &report, warnings)?,
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record(["kind", "n", "value", "note"])?;
            for s in &report.samples {
                w.write_record([
                    "sample".to_string(),
                    s.n.to_string(),
                    format!("{:e}", s.residual),
                    String::new(),
                ])?;
            }
            for s in &report.excluded {
                w.write_record([
                    "excluded".to_string(),
                    s.n.to_string(),
                    String::new(),
                    s.reason.clone(),
                ])?;
            }
            for (kind, v) in [
                ("fitted_log_rate", report.fitted_log_rate),
                ("fitted_intercept", report.fitted_intercept),
                ("expected_log_rate", report.expected_log_rate),
                ("rate_rel_error", report.rate_rel_error),
            ] {
                w.write_record([
                    kind.to_string(),
                    String::new(),
                    format!("{v:e}"),
                    String::new(),
                ])?;
            }
            w.flush()?;
        }
        Format::Text => {
            writeln!(out, "formula         {} q={}", formula.tag(), a.q)?;
            writeln!(out, "z               {}", complex_text(&report.z))?;
            for s in &report.samples {
                writeln!(out, "N={:<3}  residual {:e}", s.n, s.residual)?;
            }
            for s in &report.excluded {
                writeln!(out, "N={:<3}  excluded: {}", s.n, s.reason)?;
            }
            writeln!(out, "fitted rate     {:e}", report.fitted_log_rate)?;
            writeln!(out, "expected rate   {:e}", report.expected_log_rate)?;
            writeln!(out, "rel. error      {:e}", report.rate_rel_error)?;
            writeln!(out, "precision       {} bits", prec.bits())?;
            for w in &warnings {
                writeln!(out, "warning: {w}")?;
            }
        }
    }
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct TableEcho {
    example: u32,
    n: Vec<u32>,
    formula: FormulaId,
    q: u32,
    terms: u32,
}

#[derive(Debug, Serialize)]
struct TablePayload {
    rows: Vec<Example1Row>,
}

pub fn table(
    a: &TableArgs,
    prec: Precision,
    fmt: Format,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    if a.example != 1 {
        return Err(CliError::usage(format!(
            "only example 1 is defined, got {}",
            a.example
        )));
    }
    let ns = input::u32_list(&a.n, "n")?;
    if let Some(bad) = ns.iter().find(|&&n| n < 2) {
        return Err(CliError::usage(format!("n must be at least 2, got {bad}")));
    }
    let formula = input::formula(&a.formula)?;
    if formula.is_finite() {
        return Err(CliError::usage(format!("{formula} is a finite product")));
    }
    let rows = ns
        .iter()
        .map(|&n| example1_row(n, formula, a.q, a.terms, prec))
        .collect::<Result<Vec<_>, _>>()?;
    let echo = TableEcho {
        example: a.example,
        n: ns,
        formula,
        q: a.q,
        terms: a.terms,
    };
    let mut warnings = Vec::new();
    for r in &rows {
        warnings.extend(
            flag_warnings(&r.flags)
                .into_iter()
                .map(|w| format!("n={}: {w}", r.n)),
        );
    }
    let payload = TablePayload { rows };
    match fmt {
        Format::Json => output::write_json(out, "table", prec.bits(), &echo, &payload, warnings)?,
        Format::Csv => {
            let mut w = csv_writer(out);
            w.write_record([
                "n",
                "z",
                "closed_form",
                "formula",
                "q",
                "terms_used",
                "product_re",
                "product_im",
                "sinc_re",
                "sinc_im",
                "residual",
                "flags",
            ])?;
            for r in &payload.rows {
                w.write_record([
                    r.n.to_string(),
                    output::re(&r.z),
                    r.closed_form.clone(),
                    r.formula.tag().to_string(),
                    r.q.to_string(),
                    r.terms_used.to_string(),
                    output::re(&r.product),
                    output::im(&r.product),
                    output::re(&r.sinc),
                    output::im(&r.sinc),
                    format!("{:e}", r.residual),
                    flags_text(&r.flags),
                ])?;
            }
            w.flush()?;
        }
        Format::Text => {
            for r in &payload.rows {
                writeln!(
                    out,
                    "n={}  z = {} = {}",
                    r.n,
                    output::re(&r.z),
                    r.closed_form
                )?;
                writeln!(
                    out,
                    "     product {} (N={})",
                    complex_text(&r.product),
                    r.terms_used
                )?;
                writeln!(out, "     sinc    {}", complex_text(&r.sinc))?;
                writeln!(out, "     residual {:e}", r.residual)?;
            }
            writeln!(out, "precision {} bits", prec.bits())?;
            for w in &warnings {
                writeln!(out, "warning: {w}")?;
            }
        }
    }
    Ok(EXIT_OK)
}
