//! Parsing of command-line values that clap leaves as strings.

use rug::Complex;
use trigprod::{FactorForm, FormulaId, Precision};

use crate::CliError;

pub fn formula(s: &str) -> Result<FormulaId, CliError> {
    FormulaId::from_cli_name(s).ok_or_else(|| CliError::usage(format!("unknown formula {s:?}")))
}

pub fn formula_list(s: &str) -> Result<Vec<FormulaId>, CliError> {
    let list: Vec<FormulaId> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(formula)
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(CliError::usage("empty formula list"));
    }
    Ok(list)
}

/// Parses `"re"` or `"re,im"`; components are decimal strings rounded once
/// to the working precision, never passed through `f64`.
pub fn complex(s: &str, prec: Precision) -> Result<Complex, CliError> {
    let bad = || {
        CliError::usage(format!(
            "complex argument must be \"re,im\" in radians, got {s:?}"
        ))
    };
    let mut parts = s.split(',').map(str::trim);
    let re = parts.next().filter(|p| !p.is_empty()).ok_or_else(bad)?;
    let im = parts.next().unwrap_or("0");
    if parts.next().is_some() {
        return Err(bad());
    }
    let bits = prec.bits();
    let parse = |t: &str| {
        rug::Float::parse(t)
            .map(|v| rug::Float::with_val(bits, v))
            .map_err(|_| bad())
    };
    let (re, im) = (parse(re)?, parse(im)?);
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(Complex::with_val(bits, (re, im)))
}

pub fn u32_list(s: &str, what: &str) -> Result<Vec<u32>, CliError> {
    let list: Vec<u32> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse()
                .map_err(|_| CliError::usage(format!("invalid {what} {p:?}")))
        })
        .collect::<Result<_, _>>()?;
    if list.is_empty() {
        return Err(CliError::usage(format!("empty {what} list")));
    }
    Ok(list)
}

/// Parses `"m:n,m:n"`.
pub fn ranges(s: &str) -> Result<Vec<(u32, u32)>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (m, n) = p
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("range {p:?} is not m:n")))?;
            let m = m
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("invalid range start in {p:?}")))?;
            let n = n
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("invalid range end in {p:?}")))?;
            Ok((m, n))
        })
        .collect()
}

pub fn form(s: &str) -> Result<FactorForm, CliError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "standard" => Ok(FactorForm::Standard),
        "literal" | "literal-factors" => Ok(FactorForm::LiteralFactors),
        "csc-step" | "csc" => Ok(FactorForm::CscStep),
        other => Err(CliError::usage(format!("unknown factor form {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Precision {
        Precision::new(113).unwrap()
    }

    #[test]
    fn complex_forms() {
        let z = complex("1.5,-2", p()).unwrap();
        assert_eq!(z, Complex::with_val(113, (1.5, -2.0)));
        let z = complex("0.25", p()).unwrap();
        assert_eq!(z, Complex::with_val(113, (0.25, 0.0)));
        assert!(complex("", p()).is_err());
        assert!(complex("1,2,3", p()).is_err());
        assert!(complex("one", p()).is_err());
        assert!(complex("inf,0", p()).is_err());
    }

    #[test]
    fn decimal_input_is_not_rounded_through_f64() {
        let z = complex("0.1", Precision::new(200).unwrap()).unwrap();
        let f = rug::Float::with_val(200, 0.1f64);
        assert_ne!(*z.real(), f);
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(u32_list("2, 3,5", "q").unwrap(), vec![2, 3, 5]);
        assert!(u32_list("2,x", "q").is_err());
        assert_eq!(ranges("0:3,1:4").unwrap(), vec![(0, 3), (1, 4)]);
        assert!(ranges("0-3").is_err());
        assert_eq!(
            formula_list("eq9, eq15").unwrap(),
            vec![FormulaId::RatioInf, FormulaId::ExpTowerInf]
        );
        assert!(formula("eq5").is_err());
    }
}
