//! Command-line front end: rule generation, rule-file validation,
//! convergence studies, and discrete-operator verification.
//!
//! Exit codes are a stable contract: 0 success, 1 failed validation,
//! 2 usage or parameter error, 3 numerical-precision failure.

mod rulefile;

use clap::{Parser, Subcommand};
use optquad::engine::{by_id, converge};
use optquad::operator::{
    build_operator, convolution_check, deep_moment_check, moment, moment_tail_bound, moment_target,
};
use optquad::real::pow2;
use optquad::rules::build_rule;
use optquad::{Error, DEFAULT_PRECISION_BITS};
use rug::Float;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_VALIDATION_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_PRECISION: u8 = 3;

#[derive(Parser)]
#[command(name = "optquad", version, about = "Optimal quadrature rules with endpoint derivative corrections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a rule and write it to a JSON rule file
    Generate {
        /// Smoothness order (m >= 4)
        #[arg(long)]
        m: u32,
        /// Node count parameter (N >= m-3)
        #[arg(long)]
        n: u32,
        /// Working precision in bits (default 256, or OPTQUAD_BITS)
        #[arg(long)]
        bits: Option<u32>,
        /// Output path for the rule file
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the invariants of an existing rule file
    Validate {
        /// Rule file to check
        rule_file: PathBuf,
    },
    /// Run a convergence study and write it as CSV
    Converge {
        /// Smoothness order (m >= 4)
        #[arg(long)]
        m: u32,
        /// Integrand identifier (exp, sinpi, inv1p, xm)
        #[arg(long)]
        integrand: String,
        /// Node counts to study
        #[arg(long = "n-list", value_delimiter = ',', num_args = 1..)]
        n_list: Vec<u32>,
        /// Working precision in bits (default 256, or OPTQUAD_BITS)
        #[arg(long)]
        bits: Option<u32>,
        /// Output path for the CSV report
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify the discrete-operator identities on a finite window
    CheckOperator {
        /// Smoothness order (m >= 4)
        #[arg(long)]
        m: u32,
        /// Node count parameter fixing the grid step h = 1/N
        #[arg(long)]
        n: u32,
        /// Window half-width for kernel sampling
        #[arg(long = "beta-max")]
        beta_max: u32,
        /// Largest acceptable residual including truncation tails;
        /// without it the command reports but never gates
        #[arg(long)]
        tolerance: Option<f64>,
        /// Working precision in bits (default 256, or OPTQUAD_BITS)
        #[arg(long)]
        bits: Option<u32>,
        /// Also check the cancellation-heavy moments up to order 4m
        #[arg(long)]
        deep: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate { m, n, bits, out } => cmd_generate(m, n, bits, &out),
        Command::Validate { rule_file } => cmd_validate(&rule_file),
        Command::Converge {
            m,
            integrand,
            n_list,
            bits,
            out,
        } => cmd_converge(m, &integrand, &n_list, bits, &out),
        Command::CheckOperator {
            m,
            n,
            beta_max,
            tolerance,
            bits,
            deep,
        } => cmd_check_operator(m, n, beta_max, tolerance, bits, deep),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::Parse(_) | Error::MissingData(_) => EXIT_USAGE,
        Error::PrecisionLoss { .. }
        | Error::Singular { .. }
        | Error::TailBound { .. }
        | Error::NonFinite { .. } => EXIT_PRECISION,
        Error::Defect(_) => EXIT_VALIDATION_FAILED,
    }
}

/// Precision resolution: explicit flag, then OPTQUAD_BITS, then the
/// library default.
fn resolve_bits(flag: Option<u32>) -> Result<u32, Error> {
    let bits = match flag {
        Some(b) => b,
        None => match std::env::var("OPTQUAD_BITS") {
            Ok(s) => s.trim().parse::<u32>().map_err(|_| {
                Error::InvalidParameter(format!("OPTQUAD_BITS=\"{s}\" is not a positive integer"))
            })?,
            Err(_) => DEFAULT_PRECISION_BITS,
        },
    };
    if !(64..=1 << 22).contains(&bits) {
        return Err(Error::InvalidParameter(format!(
            "precision must be between 64 and {} bits, got {bits}",
            1 << 22
        )));
    }
    Ok(bits)
}

fn write_file(path: &PathBuf, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents)
        .map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", path.display())))
}

fn cmd_generate(m: u32, n: u32, bits: Option<u32>, out: &PathBuf) -> Result<u8, Error> {
    let bits = resolve_bits(bits)?;
    let rule = build_rule(m, n, bits)?;
    let file = rulefile::from_rule(&rule);
    write_file(out, &rulefile::to_json(&file))?;

    let norm = rule.norm_sq.to_f64().sqrt();
    println!("rule m={m} N={n} at {bits} bits");
    println!(
        "norm_sq = {:e}  (worst-case error {:e} per unit derivative norm)",
        rule.norm_sq.to_f64(),
        norm
    );
    let correct = rule.correct_bits_estimate();
    println!(
        "condition estimate {:.3e}  (~{:.0} correct bits)",
        rule.condition_estimate, correct
    );
    if correct < 50.0 {
        eprintln!(
            "warning: conditioning leaves fewer than 50 trusted bits; consider --bits {}",
            bits * 2
        );
    }
    println!("wrote {}", out.display());
    Ok(0)
}

fn cmd_validate(path: &PathBuf) -> Result<u8, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    let rule = rulefile::parse_json(&text)?;
    let prec = rule.precision_bits;
    let n = rule.n;
    let mut all_pass = true;
    let mut report = |name: &str, residual: f64, threshold: f64| {
        let pass = residual <= threshold;
        all_pass &= pass;
        println!(
            "{}  {name}: residual {residual:.3e} (threshold {threshold:.3e})",
            if pass { "pass" } else { "FAIL" },
        );
    };

    // shape: one multiplier per kernel root inside the unit disk
    let want_d = rule.m as usize - 1;
    report(
        "multiplier count",
        (rule.d.len() as f64 - want_d as f64).abs(),
        0.0,
    );

    // grid consistency
    let h_want = Float::with_val(prec, 1) / Float::with_val(prec, n);
    let h_res = Float::with_val(prec, &rule.h - &h_want).abs().to_f64();
    report("grid h = 1/N", h_res, pow2(prec, -(prec as i32) + 8).to_f64());

    // endpoint symmetry of the weights
    let mut sym = 0f64;
    for beta in 0..=n as usize {
        let d = Float::with_val(prec, &rule.c[beta] - &rule.c[n as usize - beta])
            .abs()
            .to_f64();
        sym = sym.max(d);
    }
    report("weight symmetry", sym, pow2(prec, -(prec as i32 / 2)).to_f64());

    // exactness on monomials through degree m-1
    let threshold = pow2(prec, -64).to_f64();
    for alpha in 0..rule.m {
        let mut s = Float::new(prec);
        for beta in 0..=n {
            let x = Float::with_val(prec, &rule.h * beta);
            let xa = if alpha == 0 {
                Float::with_val(prec, 1)
            } else {
                Float::with_val(prec, rug::ops::Pow::pow(&x, alpha))
            };
            s += Float::with_val(prec, &rule.c[beta as usize] * &xa);
        }
        let d1 = i64::from(alpha == 1) - alpha as i64;
        let d3_0 = if alpha == 3 { 6 } else { 0 };
        let d3_1 = if alpha >= 3 {
            (alpha * (alpha - 1) * (alpha - 2)) as i64
        } else {
            0
        };
        s += Float::with_val(prec, &rule.a * d1);
        s += Float::with_val(prec, &rule.b * (d3_0 - d3_1));
        s -= Float::with_val(prec, rug::Rational::from((1u32, alpha + 1)));
        report(&format!("moment alpha={alpha}"), s.abs().to_f64(), threshold);
    }

    // norm positivity
    let pass = rule.norm_sq.is_finite() && rule.norm_sq > 0;
    all_pass &= pass;
    println!(
        "{}  norm positive: norm_sq = {:e}",
        if pass { "pass" } else { "FAIL" },
        rule.norm_sq.to_f64()
    );

    println!(
        "recorded condition estimate {:.3e}",
        rule.condition_estimate
    );
    if all_pass {
        println!("all checks passed");
        Ok(0)
    } else {
        println!("validation failed");
        Ok(EXIT_VALIDATION_FAILED)
    }
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_converge(
    m: u32,
    integrand: &str,
    n_list: &[u32],
    bits: Option<u32>,
    out: &PathBuf,
) -> Result<u8, Error> {
    if n_list.is_empty() {
        return Err(Error::InvalidParameter("--n-list must not be empty".into()));
    }
    let bits = resolve_bits(bits)?;
    let g = by_id(integrand, m, bits)?;
    let report = converge(m, &g, n_list, bits)?;

    let mut csv = String::from(
        "N,approx,abs_error,norm_bound,observed_order,trapezoid_error,euler_maclaurin_error\n",
    );
    for row in &report.rows {
        if let Some(failure) = &row.failure {
            eprintln!("warning: N={} skipped: {failure}", row.n);
        }
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.n,
            csv_cell(row.approx),
            csv_cell(row.abs_error),
            csv_cell(row.norm_bound),
            csv_cell(row.observed_order),
            csv_cell(row.trapezoid_error),
            csv_cell(row.euler_maclaurin_error),
        ));
    }
    write_file(out, &csv)?;

    println!("convergence of {integrand} at m={m}, {bits} bits");
    for row in &report.rows {
        match (&row.failure, row.abs_error, row.norm_bound) {
            (None, Some(err), Some(bound)) => {
                println!("N={:<6} abs_error={err:<24e} bound={bound:e}", row.n)
            }
            _ => println!("N={:<6} failed", row.n),
        }
    }
    println!("wrote {}", out.display());
    Ok(0)
}

fn cmd_check_operator(
    m: u32,
    n: u32,
    beta_max: u32,
    tolerance: Option<f64>,
    bits: Option<u32>,
    deep: bool,
) -> Result<u8, Error> {
    let bits = resolve_bits(bits)?;
    if m >= 4 && beta_max < 2 * m + 2 {
        // too narrow to say anything: the truncation tail is the whole
        // kernel, so this is a precision failure, not a usage error
        return Err(Error::TailBound {
            tail_bound: f64::INFINITY,
            tolerance: tolerance.unwrap_or(f64::INFINITY),
            required_beta_max: 2 * m + 2,
        });
    }
    let op = build_operator(m, n, beta_max, bits)?;
    let gate = tolerance.unwrap_or(f64::INFINITY);

    println!("operator m={m} h=1/{n} window |beta| <= {beta_max} at {bits} bits");
    for k in (0..=2 * m).step_by(2) {
        let target = moment_target(&op, k);
        let dev = Float::with_val(bits, moment(&op, k) - &target)
            .abs()
            .to_f64();
        let tail = moment_tail_bound(&op, k).to_f64();
        if k == 2 * m {
            println!(
                "moment k={k}: residual {dev:.3e} against (2m)! = {} (tail bound {tail:.3e})",
                target.to_f64()
            );
        } else {
            println!("moment k={k}: residual {dev:.3e} (tail bound {tail:.3e})");
        }
    }
    let check = convolution_check(&op, gate)?;
    println!(
        "convolution: residual {:.3e} (worst normalized tail {:.3e})",
        check.convolution_residual, check.tail_bound
    );
    println!(
        "worst normalized moment residual: {:.3e}",
        check.moment_residual
    );
    if deep {
        let deep_check = deep_moment_check(&op, gate)?;
        for k in (2 * m + 2..=4 * m).step_by(2) {
            let target = moment_target(&op, k);
            let dev = Float::with_val(bits, moment(&op, k) - &target)
                .abs()
                .to_f64();
            let tail = moment_tail_bound(&op, k).to_f64();
            println!("deep moment k={k}: residual {dev:.3e} (tail bound {tail:.3e})");
        }
        println!(
            "worst normalized deep residual: {:.3e}",
            deep_check.moment_residual
        );
    }
    if gate.is_finite() {
        println!("all residuals within tolerance {gate:.3e}");
    }
    Ok(0)
}
