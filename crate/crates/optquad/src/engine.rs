//! Applying rules to integrands, guaranteed error bounds, and
//! convergence studies against classical comparators.

use crate::error::{Error, Result};
use crate::real::{from_integer, from_rational, BigReal};
use crate::rules::{build_rule, QuadRule};
use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use std::sync::Arc;

/// A scalar function on `[0, 1]`, shared and callable at any precision.
pub type RealFn = Arc<dyn Fn(&BigReal) -> BigReal + Send + Sync>;

/// An integrand together with whatever analytic data is known about it.
///
/// The endpoint corrections need `f'` and `f'''` at `0` and `1`; when
/// the derivative closures are absent the engine falls back to
/// Richardson-extrapolated central differences and flags that in its
/// output. `fm_l2` is the `L2(0,1)` norm of the `m`-th derivative for
/// whichever `m` the integrand was instantiated for; it turns the
/// rule's norm into a guaranteed error bound.
#[derive(Clone)]
pub struct Integrand {
    /// Short identifier used in reports.
    pub id: String,
    /// The function itself.
    pub f: RealFn,
    /// First derivative, if known analytically.
    pub f1: Option<RealFn>,
    /// Third derivative, if known analytically.
    pub f3: Option<RealFn>,
    /// `L2` norm of the `m`-th derivative on `[0, 1]`, if known.
    pub fm_l2: Option<BigReal>,
    /// Exact value of the integral, if known.
    pub exact_integral: Option<BigReal>,
}

impl std::fmt::Debug for Integrand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Integrand")
            .field("id", &self.id)
            .field("has_f1", &self.f1.is_some())
            .field("has_f3", &self.f3.is_some())
            .field("fm_l2", &self.fm_l2.as_ref().map(|v| v.to_f64()))
            .field(
                "exact_integral",
                &self.exact_integral.as_ref().map(|v| v.to_f64()),
            )
            .finish()
    }
}

/// Result of applying a rule to an integrand.
#[derive(Debug, Clone)]
pub struct Quadrature {
    /// The quadrature sum.
    pub value: BigReal,
    /// Whether endpoint derivatives came from the finite-difference
    /// fallback rather than analytic closures.
    pub fd_fallback: bool,
    /// Estimated truncation error contributed by the fallback,
    /// propagated through the `A` and `B` weights; `None` when all
    /// derivatives were analytic.
    pub fd_error_estimate: Option<f64>,
}

/// One `N` of a convergence study. Failed builds keep their message and
/// leave the numeric fields empty.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: u32,
    pub approx: Option<f64>,
    pub abs_error: Option<f64>,
    pub norm_bound: Option<f64>,
    /// `log2(err(N)/err(2N))` against the previous successful row;
    /// empty on the first row.
    pub observed_order: Option<f64>,
    pub trapezoid_error: Option<f64>,
    pub euler_maclaurin_error: Option<f64>,
    /// Whether this row's optimal-rule value used the finite-difference
    /// fallback.
    pub fd_fallback: bool,
    /// Build or evaluation failure, if any.
    pub failure: Option<String>,
}

/// A convergence study of one integrand over a list of `N`.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub m: u32,
    pub integrand: String,
    /// Rows in ascending `N` order.
    pub rows: Vec<ConvergenceRow>,
}

/// Applies a rule to an integrand:
/// `Σ_β C[β] f(hβ) + A (f'(0) - f'(1)) + B (f'''(0) - f'''(1))`.
///
/// Analytic derivative closures are used when present; otherwise
/// endpoint derivatives come from central differences with base step
/// `h² ` and four Richardson levels, and the result is flagged.
///
/// # Errors
///
/// [`Error::NonFinite`] when the integrand produces a non-finite value
/// at any node or finite-difference sample point.
pub fn apply(rule: &QuadRule, g: &Integrand) -> Result<Quadrature> {
    let prec = rule.precision_bits;
    let mut sum = Float::new(prec);
    for beta in 0..=rule.n {
        let x = Float::with_val(prec, &rule.h * beta);
        let fx = eval_checked(&g.f, &x, &format!("node β={beta}"))?;
        sum += Float::with_val(prec, &rule.c[beta as usize] * &fx);
    }

    let zero = Float::new(prec);
    let one = Float::with_val(prec, 1);
    let mut fd_fallback = false;
    let mut fd_estimate = 0f64;

    let (d1_0, d1_1) = match &g.f1 {
        Some(f1) => (
            eval_checked(f1, &zero, "f' at 0")?,
            eval_checked(f1, &one, "f' at 1")?,
        ),
        None => {
            fd_fallback = true;
            let (v0, e0) = fd_derivative(&g.f, &zero, &rule.h, 1)?;
            let (v1, e1) = fd_derivative(&g.f, &one, &rule.h, 1)?;
            fd_estimate += rule.a.to_f64().abs() * (e0 + e1);
            (v0, v1)
        }
    };
    let (d3_0, d3_1) = match &g.f3 {
        Some(f3) => (
            eval_checked(f3, &zero, "f''' at 0")?,
            eval_checked(f3, &one, "f''' at 1")?,
        ),
        None => {
            fd_fallback = true;
            let (v0, e0) = fd_derivative(&g.f, &zero, &rule.h, 3)?;
            let (v1, e1) = fd_derivative(&g.f, &one, &rule.h, 3)?;
            fd_estimate += rule.b.to_f64().abs() * (e0 + e1);
            (v0, v1)
        }
    };

    sum += Float::with_val(prec, &rule.a * &Float::with_val(prec, &d1_0 - &d1_1));
    sum += Float::with_val(prec, &rule.b * &Float::with_val(prec, &d3_0 - &d3_1));

    Ok(Quadrature {
        value: sum,
        fd_fallback,
        fd_error_estimate: fd_fallback.then_some(fd_estimate),
    })
}

fn eval_checked(f: &RealFn, x: &BigReal, location: &str) -> Result<BigReal> {
    let v = f(x);
    if !v.is_finite() {
        return Err(Error::NonFinite {
            location: format!("{location} (x = {})", x.to_f64()),
        });
    }
    Ok(Float::with_val(x.prec(), v))
}

/// Central-difference derivative of order 1 or 3 at `x`, base step
/// `h²`, four Richardson levels. Returns the extrapolated value and a
/// truncation estimate (gap between the last two table entries). At the
/// endpoints the stencil samples slightly outside `[0, 1]`, so the
/// integrand must tolerate a neighborhood of width `2h²`.
fn fd_derivative(f: &RealFn, x: &BigReal, h: &BigReal, order: u32) -> Result<(BigReal, f64)> {
    let prec = x.prec();
    let levels = 4;
    let base = Float::with_val(prec, h.square_ref());
    let mut table: Vec<BigReal> = Vec::with_capacity(levels);
    for level in 0..levels {
        let s = Float::with_val(prec, &base >> level as u32);
        let raw = match order {
            1 => {
                let fp = eval_checked(f, &Float::with_val(prec, x + &s), "derivative stencil")?;
                let fm = eval_checked(f, &Float::with_val(prec, x - &s), "derivative stencil")?;
                (fp - fm) / Float::with_val(prec, 2 * &s)
            }
            3 => {
                let s2 = Float::with_val(prec, 2 * &s);
                let fp2 = eval_checked(f, &Float::with_val(prec, x + &s2), "derivative stencil")?;
                let fp1 = eval_checked(f, &Float::with_val(prec, x + &s), "derivative stencil")?;
                let fm1 = eval_checked(f, &Float::with_val(prec, x - &s), "derivative stencil")?;
                let fm2 = eval_checked(f, &Float::with_val(prec, x - &s2), "derivative stencil")?;
                let num = fp2 - Float::with_val(prec, 2 * &fp1) + Float::with_val(prec, 2 * &fm1)
                    - fm2;
                num / (Float::with_val(prec, 2) * Float::with_val(prec, (&s).pow(3)))
            }
            _ => unreachable!("only orders 1 and 3 are used"),
        };
        // Richardson update: new column entries kill successive even
        // powers of the step, weights 4^j/(4^j - 1)
        let mut entry = raw;
        let mut new_row = vec![entry.clone()];
        for (j, prev) in table.iter().enumerate() {
            let pow4 = Float::with_val(prec, Integer::from(1) << (2 * (j as u32 + 1)));
            let denom = Float::with_val(prec, &pow4 - 1f64);
            entry = (Float::with_val(prec, &pow4 * &entry) - prev) / denom;
            new_row.push(entry.clone());
        }
        table = new_row;
    }
    let last = table.pop().expect("table has `levels` entries");
    let prev = table.pop().expect("table has at least two entries");
    let estimate = Float::with_val(prec, &last - &prev).to_f64().abs();
    Ok((last, estimate))
}

/// Guaranteed error bound `sqrt(rule.norm_sq) · fm_l2` from the
/// worst-case norm and the integrand's derivative norm.
pub fn error_bound(rule: &QuadRule, fm_l2: &BigReal) -> BigReal {
    let prec = rule.precision_bits;
    let norm = Float::with_val(prec, rule.norm_sq.sqrt_ref());
    norm * fm_l2
}

/// Composite trapezoidal value on `N` panels, the baseline comparator.
pub fn trapezoid(g: &Integrand, n: u32, precision_bits: u32) -> Result<BigReal> {
    let prec = precision_bits;
    let h = Float::with_val(prec, 1) / Float::with_val(prec, n);
    let mut sum = Float::new(prec);
    for beta in 0..=n {
        let x = Float::with_val(prec, &h * beta);
        let fx = eval_checked(&g.f, &x, &format!("node β={beta}"))?;
        if beta == 0 || beta == n {
            sum += fx >> 1u32;
        } else {
            sum += fx;
        }
    }
    Ok(sum * h)
}

/// Classical endpoint-corrected trapezoidal value:
/// `T + (h²/12)(f'(0) - f'(1)) - (h⁴/720)(f'''(0) - f'''(1))`.
///
/// Deliberately hard-coded, sharing nothing with the rule builder, so
/// agreement with the optimal rule at low orders is a genuine
/// cross-check. Requires analytic derivative closures.
pub fn euler_maclaurin(g: &Integrand, n: u32, precision_bits: u32) -> Result<BigReal> {
    let prec = precision_bits;
    let f1 = g.f1.as_ref().ok_or_else(|| {
        Error::MissingData("the comparator needs an analytic first derivative".into())
    })?;
    let f3 = g.f3.as_ref().ok_or_else(|| {
        Error::MissingData("the comparator needs an analytic third derivative".into())
    })?;
    let zero = Float::new(prec);
    let one = Float::with_val(prec, 1);
    let h = Float::with_val(prec, 1) / Float::with_val(prec, n);
    let h2 = Float::with_val(prec, h.square_ref());
    let h4 = Float::with_val(prec, h2.square_ref());

    let mut value = trapezoid(g, n, prec)?;
    let dd1 = eval_checked(f1, &zero, "f' at 0")? - eval_checked(f1, &one, "f' at 1")?;
    let dd3 = eval_checked(f3, &zero, "f''' at 0")? - eval_checked(f3, &one, "f''' at 1")?;
    value += h2 / Float::with_val(prec, 12) * dd1;
    value -= h4 / Float::with_val(prec, 720) * dd3;
    Ok(value)
}

/// Runs a convergence study: one rule per `N` (ascending), recording
/// the approximation, its true error, the guaranteed bound, the
/// observed order between consecutive rows, and both comparator errors.
/// A failed build marks its row and the study continues.
///
/// # Errors
///
/// The integrand must carry its exact integral; without it no error
/// column is computable.
pub fn converge(
    m: u32,
    g: &Integrand,
    n_list: &[u32],
    precision_bits: u32,
) -> Result<ConvergenceReport> {
    let exact = g
        .exact_integral
        .as_ref()
        .ok_or_else(|| Error::MissingData(format!("integrand {} has no exact integral", g.id)))?;
    let prec = precision_bits;
    let mut ns: Vec<u32> = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();

    let mut rows = Vec::with_capacity(ns.len());
    let mut prev: Option<(u32, f64)> = None;
    for &n in &ns {
        let row = match build_rule(m, n, prec) {
            Err(e) => ConvergenceRow {
                n,
                approx: None,
                abs_error: None,
                norm_bound: None,
                observed_order: None,
                trapezoid_error: None,
                euler_maclaurin_error: None,
                fd_fallback: false,
                failure: Some(e.to_string()),
            },
            Ok(rule) => match study_row(&rule, g, exact, prec, &mut prev) {
                Ok(row) => row,
                Err(e) => ConvergenceRow {
                    n,
                    approx: None,
                    abs_error: None,
                    norm_bound: None,
                    observed_order: None,
                    trapezoid_error: None,
                    euler_maclaurin_error: None,
                    fd_fallback: false,
                    failure: Some(e.to_string()),
                },
            },
        };
        rows.push(row);
    }
    Ok(ConvergenceReport {
        m,
        integrand: g.id.clone(),
        rows,
    })
}

fn study_row(
    rule: &QuadRule,
    g: &Integrand,
    exact: &BigReal,
    prec: u32,
    prev: &mut Option<(u32, f64)>,
) -> Result<ConvergenceRow> {
    let n = rule.n;
    let quad = apply(rule, g)?;
    let abs_error = Float::with_val(prec, &quad.value - exact)
        .to_f64()
        .abs();
    let norm_bound = g
        .fm_l2
        .as_ref()
        .map(|fm| error_bound(rule, fm).to_f64());

    let trap = trapezoid(g, n, prec)?;
    let trapezoid_error = Float::with_val(prec, &trap - exact).to_f64().abs();
    let euler_maclaurin_error = match euler_maclaurin(g, n, prec) {
        Ok(em) => Some(Float::with_val(prec, &em - exact).to_f64().abs()),
        Err(Error::MissingData(_)) => None,
        Err(e) => return Err(e),
    };

    // order between consecutive rows: log2(err(N)/err(2N)) generalized
    // to arbitrary spacing
    let observed_order = prev.and_then(|(pn, perr)| {
        if perr > 0.0 && abs_error > 0.0 && n > pn {
            Some((perr / abs_error).log2() / (n as f64 / pn as f64).log2())
        } else {
            None
        }
    });
    *prev = Some((n, abs_error));

    Ok(ConvergenceRow {
        n,
        approx: Some(quad.value.to_f64()),
        abs_error: Some(abs_error),
        norm_bound,
        observed_order,
        trapezoid_error: Some(trapezoid_error),
        euler_maclaurin_error,
        fd_fallback: quad.fd_fallback,
        failure: None,
    })
}

/// The built-in corpus for smoothness order `m`: `e^x`, `sin(πx)`,
/// `1/(1+x)`, and `x^m`, each with analytic derivatives, a closed-form
/// exact integral, and a closed-form `‖f^{(m)}‖_{L2(0,1)}`.
pub fn corpus(m: u32, precision_bits: u32) -> Vec<Integrand> {
    vec![
        exp_integrand(precision_bits),
        sinpi_integrand(m, precision_bits),
        inv1p_integrand(m, precision_bits),
        monomial(m, m, precision_bits),
    ]
}

/// Identifiers accepted by [`by_id`], in corpus order.
pub fn corpus_ids() -> &'static [&'static str] {
    &["exp", "sinpi", "inv1p", "xm"]
}

/// Looks an integrand up by identifier.
///
/// # Errors
///
/// Unknown identifiers report the available ones.
pub fn by_id(id: &str, m: u32, precision_bits: u32) -> Result<Integrand> {
    match id {
        "exp" => Ok(exp_integrand(precision_bits)),
        "sinpi" => Ok(sinpi_integrand(m, precision_bits)),
        "inv1p" => Ok(inv1p_integrand(m, precision_bits)),
        "xm" => Ok(monomial(m, m, precision_bits)),
        other => Err(Error::InvalidParameter(format!(
            "unknown integrand \"{other}\"; available: {}",
            corpus_ids().join(", ")
        ))),
    }
}

/// `e^x`: integral `e - 1`, and every derivative is `e^x`, so
/// `‖f^{(m)}‖ = sqrt((e² - 1)/2)` independent of `m`.
fn exp_integrand(prec: u32) -> Integrand {
    let f: RealFn = Arc::new(|x: &BigReal| Float::with_val(x.prec(), x.exp_ref()));
    let e = Float::with_val(prec, 1).exp();
    let exact = Float::with_val(prec, &e - 1f64);
    let fm_l2 = ((Float::with_val(prec, e.square_ref()) - 1f64) / 2f64).sqrt();
    Integrand {
        id: "exp".into(),
        f: f.clone(),
        f1: Some(f.clone()),
        f3: Some(f),
        fm_l2: Some(fm_l2),
        exact_integral: Some(exact),
    }
}

/// `sin(πx)`: integral `2/π`; the `m`-th derivative is
/// `π^m sin(πx + mπ/2)`, whose `L2` norm is `π^m/sqrt(2)` for any `m`.
fn sinpi_integrand(m: u32, prec: u32) -> Integrand {
    let f: RealFn = Arc::new(|x: &BigReal| {
        let p = x.prec();
        let pi = Float::with_val(p, Constant::Pi);
        Float::with_val(p, pi * x).sin()
    });
    let f1: RealFn = Arc::new(|x: &BigReal| {
        let p = x.prec();
        let pi = Float::with_val(p, Constant::Pi);
        let c = Float::with_val(p, &pi * x).cos();
        c * pi
    });
    let f3: RealFn = Arc::new(|x: &BigReal| {
        let p = x.prec();
        let pi = Float::with_val(p, Constant::Pi);
        let c = Float::with_val(p, &pi * x).cos();
        -(c * Float::with_val(p, (&pi).pow(3)))
    });
    let pi = Float::with_val(prec, Constant::Pi);
    let exact = Float::with_val(prec, 2) / &pi;
    let fm_l2 = Float::with_val(prec, (&pi).pow(m)) / Float::with_val(prec, 2).sqrt();
    Integrand {
        id: "sinpi".into(),
        f,
        f1: Some(f1),
        f3: Some(f3),
        fm_l2: Some(fm_l2),
        exact_integral: Some(exact),
    }
}

/// `1/(1+x)`: integral `ln 2`; the `m`-th derivative is
/// `(-1)^m m! (1+x)^{-(m+1)}`, with
/// `‖f^{(m)}‖ = m! sqrt((1 - 2^{-(2m+1)})/(2m+1))`.
fn inv1p_integrand(m: u32, prec: u32) -> Integrand {
    let f: RealFn = Arc::new(|x: &BigReal| {
        let p = x.prec();
        Float::with_val(p, 1) / Float::with_val(p, 1 + x)
    });
    let f1: RealFn = Arc::new(|x: &BigReal| {
        let p = x.prec();
        let d = Float::with_val(p, 1 + x);
        -(Float::with_val(p, 1) / Float::with_val(p, d.square_ref()))
    });
    let f3: RealFn = Arc::new(|x: &BigReal| {
        let p = x.prec();
        let d = Float::with_val(p, 1 + x);
        -(Float::with_val(p, 6) / Float::with_val(p, (&d).pow(4)))
    });
    let exact = Float::with_val(prec, 2).ln();
    let mfact = from_integer(prec, &Integer::from(Integer::factorial(m)));
    let two_m1 = 2 * m + 1;
    let inner = (Float::with_val(prec, 1)
        - crate::real::pow2(prec, -(two_m1 as i32)))
        / Float::with_val(prec, two_m1);
    let fm_l2 = mfact * inner.sqrt();
    Integrand {
        id: "inv1p".into(),
        f,
        f1: Some(f1),
        f3: Some(f3),
        fm_l2: Some(fm_l2),
        exact_integral: Some(exact),
    }
}

/// The monomial `x^α` instantiated for smoothness order `m`: integral
/// `1/(α+1)`; for `α < m` the `m`-th derivative vanishes and the rule
/// must integrate it exactly, while for `α ≥ m` the norm is
/// `(α!/(α-m)!) / sqrt(2(α-m) + 1)`.
///
/// The corpus id `"xm"` is this with `α = m`.
pub fn monomial(alpha: u32, m: u32, precision_bits: u32) -> Integrand {
    let prec = precision_bits;
    let f: RealFn = Arc::new(move |x: &BigReal| {
        if alpha == 0 {
            Float::with_val(x.prec(), 1)
        } else {
            Float::with_val(x.prec(), x.pow(alpha))
        }
    });
    let f1: RealFn = Arc::new(move |x: &BigReal| monomial_derivative(x, alpha, 1));
    let f3: RealFn = Arc::new(move |x: &BigReal| monomial_derivative(x, alpha, 3));
    let exact = from_rational(prec, &Rational::from((1u32, alpha + 1)));
    let fm_l2 = if alpha < m {
        Float::new(prec)
    } else {
        let rising = Rational::from((
            Integer::from(Integer::factorial(alpha)),
            Integer::from(Integer::factorial(alpha - m)),
        ));
        let denom = Float::with_val(prec, 2 * (alpha - m) + 1).sqrt();
        from_rational(prec, &rising) / denom
    };
    Integrand {
        id: if alpha == m {
            "xm".into()
        } else {
            format!("x^{alpha}")
        },
        f,
        f1: Some(f1),
        f3: Some(f3),
        fm_l2: Some(fm_l2),
        exact_integral: Some(exact),
    }
}

fn monomial_derivative(x: &BigReal, alpha: u32, order: u32) -> BigReal {
    let p = x.prec();
    if alpha < order {
        return Float::new(p);
    }
    let mut coeff = Integer::from(1);
    for i in 0..order {
        coeff *= alpha - i;
    }
    let e = alpha - order;
    let xe = if e == 0 {
        Float::with_val(p, 1)
    } else {
        Float::with_val(p, x.pow(e))
    };
    xe * from_integer(p, &coeff)
}
