//! The on-disk rule format: JSON with decimal-string coefficients as
//! the canonical payload and a double-precision convenience block.
//! Decimal strings carry enough digits to reproduce every coefficient
//! bit-exactly at the stated precision.

use optquad::real::{parse_decimal, to_decimal_string, BigReal};
use optquad::rules::QuadRule;
use optquad::{Error, Result};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "optquad/1";

#[derive(Debug, Serialize, Deserialize)]
pub struct RuleFile {
    pub schema_version: String,
    pub m: u32,
    pub n: u32,
    pub precision_bits: u32,
    pub h: String,
    pub coefficients: Coefficients,
    pub doubles: Doubles,
    pub condition_estimate: f64,
    pub generator: Generator,
}

/// Canonical full-precision payload.
#[derive(Debug, Serialize, Deserialize)]
pub struct Coefficients {
    pub c: Vec<String>,
    pub a: String,
    pub b: String,
    pub d: Vec<String>,
    pub norm_sq: String,
}

/// Convenience copies rounded to `f64`; never used for validation.
#[derive(Debug, Serialize, Deserialize)]
pub struct Doubles {
    pub h: f64,
    pub c: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub d: Vec<f64>,
    pub norm_sq: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Generator {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
}

/// The numeric content of a parsed file, lifted back to full precision.
pub struct ParsedRule {
    pub m: u32,
    pub n: u32,
    pub precision_bits: u32,
    pub h: BigReal,
    pub c: Vec<BigReal>,
    pub a: BigReal,
    pub b: BigReal,
    pub d: Vec<BigReal>,
    pub norm_sq: BigReal,
    pub condition_estimate: f64,
}

/// Renders a coefficient as a plain positional decimal when the
/// magnitude is moderate, falling back to scientific notation for
/// extreme exponents. Either form parses back bit-exactly.
pub fn decimal(x: &BigReal) -> String {
    let sci = to_decimal_string(x);
    let Some((mant, exp)) = sci.split_once(['e', 'E']) else {
        return sci;
    };
    let Ok(exp) = exp.parse::<i64>() else {
        return sci;
    };
    if !(-64..=64).contains(&exp) {
        return sci;
    }
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    if digits.chars().all(|c| c == '0') {
        return sci;
    }
    let sign = if neg { "-" } else { "" };
    if exp < 0 {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("{sign}0.{zeros}{digits}")
    } else {
        let point = exp as usize + 1;
        if point >= digits.len() {
            format!("{sign}{digits}{}.0", "0".repeat(point - digits.len()))
        } else {
            format!("{sign}{}.{}", &digits[..point], &digits[point..])
        }
    }
}

pub fn from_rule(rule: &QuadRule) -> RuleFile {
    let s = decimal;
    RuleFile {
        schema_version: SCHEMA_VERSION.to_string(),
        m: rule.m,
        n: rule.n,
        precision_bits: rule.precision_bits,
        h: s(&rule.h),
        coefficients: Coefficients {
            c: rule.c.iter().map(s).collect(),
            a: s(&rule.a),
            b: s(&rule.b),
            d: rule.d.iter().map(s).collect(),
            norm_sq: s(&rule.norm_sq),
        },
        doubles: Doubles {
            h: rule.h.to_f64(),
            c: rule.c.iter().map(|v| v.to_f64()).collect(),
            a: rule.a.to_f64(),
            b: rule.b.to_f64(),
            d: rule.d.iter().map(|v| v.to_f64()).collect(),
            norm_sq: rule.norm_sq.to_f64(),
        },
        condition_estimate: rule.condition_estimate,
        generator: Generator {
            tool: "optquad".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339(),
        },
    }
}

pub fn to_json(file: &RuleFile) -> String {
    let mut out = serde_json::to_string_pretty(file).expect("rule files always serialize");
    out.push('\n');
    out
}

pub fn parse_json(text: &str) -> Result<ParsedRule> {
    let file: RuleFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("malformed rule file: {e}")))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported schema version \"{}\"; this tool reads \"{SCHEMA_VERSION}\"",
            file.schema_version
        )));
    }
    let prec = file.precision_bits;
    if prec < 64 {
        return Err(Error::Parse(format!(
            "precision_bits = {prec} is below the supported minimum of 64"
        )));
    }
    if file.coefficients.c.len() != file.n as usize + 1 {
        return Err(Error::Parse(format!(
            "coefficient count {} does not match N = {}",
            file.coefficients.c.len(),
            file.n
        )));
    }
    let p = |s: &String| parse_decimal(s, prec);
    Ok(ParsedRule {
        m: file.m,
        n: file.n,
        precision_bits: prec,
        h: p(&file.h)?,
        c: file.coefficients.c.iter().map(p).collect::<Result<_>>()?,
        a: p(&file.coefficients.a)?,
        b: p(&file.coefficients.b)?,
        d: file.coefficients.d.iter().map(p).collect::<Result<_>>()?,
        norm_sq: p(&file.coefficients.norm_sq)?,
        condition_estimate: file.condition_estimate,
    })
}
