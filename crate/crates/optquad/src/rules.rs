//! Assembly of optimal quadrature rules.
//!
//! A rule approximates `∫_0^1 φ(x) dx` by
//!
//! ```text
//! Σ_{β=0}^{N} C[β] φ(hβ)  +  A (φ'(0) - φ'(1))  +  B (φ'''(0) - φ'''(1)),   h = 1/N,
//! ```
//!
//! with the weights chosen to minimize the worst-case error over all
//! functions whose `m`-th derivative has unit `L2` norm on `[0, 1]`.
//! The whole construction reduces to the `m-1` unit-disk roots `q_k` of
//! `E_{2m-2}` and per-root multipliers `d_k` solving a small linear
//! system; from those, closed forms give every weight and the exact
//! squared norm of the error functional:
//!
//! ```text
//! C[0] = C[N] = h (1/2 + Σ_k d_k (q_k^N - q_k)/(1 - q_k))
//! C[β]        = h (1 + Σ_k d_k (q_k^β + q_k^{N-β})),          0 < β < N
//! A           = h² (1/12 - Σ_k d_k (q_k + q_k^{N+1})/(1 - q_k)²)
//! B           = h⁴ (B_4/4! - (1/3!) Σ_k d_k T_3(q_k, N))
//! ‖ℓ‖²        = (-1)^{m+1} [B_{2m} h^{2m}/(2m)! - (2 h^{2m+1}/(2m)!) Σ_k d_k T_{2m}(q_k, N)]
//! ```
//!
//! where `B_j` are Bernoulli numbers and `T_j` is [`inner_sum`]. For
//! `m = 4` and `m = 5` the system is homogeneous, every `d_k` is zero,
//! and the rule degenerates to the classical endpoint-corrected
//! trapezoidal rule: `C = h(1/2, 1, …, 1, 1/2)`, `A = h²/12`,
//! `B = -h⁴/720`, with norms `h⁸/1209600` and `h¹⁰/47900160`. For
//! `m ≥ 6` the multipliers are nonzero and the weights genuinely deviate
//! near the endpoints.

use crate::error::{Error, Result};
use crate::exact::{bernoulli, delta_zero};
use crate::real::{from_integer, from_rational, pow2, BigReal};
use crate::roots::{unit_disk_roots, RootSet};
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

/// A fully built optimal rule.
#[derive(Debug, Clone)]
pub struct QuadRule {
    /// Smoothness order `m ≥ 4` of the target space.
    pub m: u32,
    /// Node count parameter; the rule has `n + 1` nodes at `hβ`.
    pub n: u32,
    /// Step `h = 1/n`.
    pub h: BigReal,
    /// Node weights `C[0..=n]`; palindromic.
    pub c: Vec<BigReal>,
    /// First-derivative endpoint weight `A`.
    pub a: BigReal,
    /// Third-derivative endpoint weight `B`.
    pub b: BigReal,
    /// Solved per-root multipliers `d_k`, in root order.
    pub d: Vec<BigReal>,
    /// Squared norm of the error functional; strictly positive.
    pub norm_sq: BigReal,
    /// Unit-disk roots the rule was built from, ascending.
    pub roots: Vec<BigReal>,
    /// Working precision the rule was built at.
    pub precision_bits: u32,
    /// Infinity-norm condition estimate of the multiplier system.
    pub condition_estimate: f64,
    /// Verified solver residual `‖M d - rhs‖_∞`.
    pub solver_residual: f64,
}

impl QuadRule {
    /// Rough count of correct bits in the solved multipliers:
    /// working precision minus the bits lost to conditioning.
    pub fn correct_bits_estimate(&self) -> f64 {
        self.precision_bits as f64 - self.condition_estimate.max(1.0).log2()
    }
}

/// The `(m-1) × (m-1)` linear system determining the multipliers.
#[derive(Debug, Clone)]
pub struct DkSystem {
    /// Row-major matrix; entry `(r, k)` is `T_{j_r}(q_k, N)`.
    pub matrix: Vec<Vec<BigReal>>,
    /// Right-hand side, same order as `row_labels`.
    pub rhs: Vec<BigReal>,
    /// The `j` value each row was generated from, ascending.
    pub row_labels: Vec<u32>,
    /// Smoothness order the system belongs to.
    pub m: u32,
    /// Node count parameter the system was assembled for.
    pub n: u32,
}

/// Solution of a [`DkSystem`] together with its quality measures.
#[derive(Debug, Clone)]
pub struct DkSolution {
    /// Multipliers `d_k`, in root order.
    pub d: Vec<BigReal>,
    /// Infinity-norm condition estimate `‖M‖_∞ ‖M⁻¹‖_∞`.
    pub condition_estimate: f64,
    /// Verified residual `‖M d - rhs‖_∞`.
    pub residual: BigReal,
}

/// The inner sum
/// `T_j(q, N) = Σ_{i=0}^{j} (q + (-1)^{i+1} q^{N+i}) / (q-1)^{i+1} · Δ^i 0^j`.
///
/// This is the quantity every system row, the `B` weight (via `T_3`),
/// and the norm (via `T_{2m}`) are built from. Its `q`-part telescopes
/// to `q E_{j-1}(q)/(q-1)^{j+1}` for `j ≥ 1`, which the test suite uses
/// as an independent consistency oracle.
///
/// `q` must lie in `(-1, 0)`; since `q - 1 < -1` no denominator can
/// vanish.
pub fn inner_sum(q: &BigReal, n: u32, j: u32) -> BigReal {
    debug_assert!(*q > -1f64 && *q < 0f64, "q must lie in (-1, 0)");
    let prec = q.prec();
    let q_minus_1 = Float::with_val(prec, q - 1f64);
    // running q^{N+i} and (q-1)^{i+1}
    let mut q_pow = Float::with_val(prec, q.pow(n));
    let mut denom_pow = q_minus_1.clone();
    let mut total = Float::new(prec);
    for i in 0..=j {
        let dz = delta_zero(i, j);
        if dz != 0 {
            // numerator q + (-1)^{i+1} q^{N+i}
            let numer = if i % 2 == 0 {
                Float::with_val(prec, q - &q_pow)
            } else {
                Float::with_val(prec, q + &q_pow)
            };
            let term = numer / &denom_pow * from_integer(prec, &dz);
            total += term;
        }
        q_pow *= q;
        denom_pow *= &q_minus_1;
    }
    total
}

/// Row labels of the multiplier system: `j = 2`, `j = 4 .. m-1`,
/// `j = 2m-4`, `j = 2m-2`, ascending. The three index families are
/// disjoint for every `m ≥ 4` and always total `m - 1` rows.
fn system_row_labels(m: u32) -> Result<Vec<u32>> {
    let mut labels = vec![2u32];
    labels.extend(4..=m.saturating_sub(1));
    labels.push(2 * m - 4);
    labels.push(2 * m - 2);
    labels.sort_unstable();
    let distinct = labels.windows(2).all(|w| w[0] < w[1]);
    if !distinct || labels.len() != (m - 1) as usize {
        return Err(Error::Defect(format!(
            "row labels {labels:?} for m={m} are not {} distinct values",
            m - 1
        )));
    }
    Ok(labels)
}

/// Assembles the multiplier system for the given `m`, `N` and root set.
///
/// Rows with `j ∈ {4, …, m-1}` carry right-hand side `B_{j+1}/(j+1)`;
/// the rows `j ∈ {2, 2m-4, 2m-2}` are homogeneous. For `m = 4` and
/// `m = 5` every right-hand side vanishes (odd Bernoulli numbers), which
/// is exactly why those orders degenerate to the classical rule.
///
/// # Errors
///
/// Rejects `m`/root-set mismatches and parameter ranges outside
/// `m ≥ 4`, `N ≥ m - 3`.
pub fn assemble_dk_system(m: u32, n: u32, roots: &RootSet) -> Result<DkSystem> {
    validate_m_n(m, n)?;
    if roots.m != m {
        return Err(Error::InvalidParameter(format!(
            "root set was built for m={}, requested m={m}",
            roots.m
        )));
    }
    if roots.roots.len() != (m - 1) as usize {
        return Err(Error::Defect(format!(
            "root set carries {} roots, expected {}",
            roots.roots.len(),
            m - 1
        )));
    }
    let prec = roots.roots[0].prec();
    let labels = system_row_labels(m)?;
    let bernoulli_rows = 4..=m - 1;

    let mut matrix = Vec::with_capacity(labels.len());
    let mut rhs = Vec::with_capacity(labels.len());
    for &j in &labels {
        let row: Vec<BigReal> = roots.roots.iter().map(|q| inner_sum(q, n, j)).collect();
        matrix.push(row);
        if bernoulli_rows.contains(&j) {
            let r = bernoulli(j + 1) / Rational::from(j + 1);
            rhs.push(from_rational(prec, &r));
        } else {
            rhs.push(Float::new(prec));
        }
    }
    Ok(DkSystem {
        matrix,
        rhs,
        row_labels: labels,
        m,
        n,
    })
}

/// Solves the multiplier system by LU elimination with partial pivoting,
/// verifies the residual against `2^{-precision_bits/4}`, and attaches
/// an infinity-norm condition estimate.
///
/// # Errors
///
/// [`Error::Singular`] when a pivot vanishes at working precision;
/// [`Error::PrecisionLoss`] when the verified residual misses the
/// threshold — both carry the condition estimate and are remediable by
/// re-running with more precision bits.
pub fn solve_dk(system: &DkSystem) -> Result<DkSolution> {
    let n = system.rhs.len();
    let prec = system.rhs[0].prec();

    let lu = lu_factor(&system.matrix, prec)?;
    let d = lu_solve(&lu, &system.rhs, prec);

    // condition estimate: ‖M‖_∞ · ‖M⁻¹‖_∞ via n unit-vector solves
    let norm_m = inf_norm(&system.matrix, prec);
    let mut norm_minv_rows = vec![Float::new(prec); n];
    for col in 0..n {
        let mut e = vec![Float::new(prec); n];
        e[col] = Float::with_val(prec, 1);
        let x = lu_solve(&lu, &e, prec);
        for (r, v) in x.iter().enumerate() {
            norm_minv_rows[r] += Float::with_val(prec, v.abs_ref());
        }
    }
    let norm_minv = norm_minv_rows
        .into_iter()
        .max_by(|a, b| a.partial_cmp(b).expect("finite norms"))
        .expect("nonempty system");
    let condition_estimate = (norm_m * norm_minv).to_f64();

    // verified residual ‖M d − rhs‖_∞
    let mut residual = Float::new(prec);
    for r in 0..n {
        let mut acc = Float::new(prec);
        for k in 0..n {
            acc += Float::with_val(prec, &system.matrix[r][k] * &d[k]);
        }
        acc -= &system.rhs[r];
        acc.abs_mut();
        if acc > residual {
            residual = acc;
        }
    }
    let threshold = pow2(prec, -((prec / 4) as i32));
    if residual > threshold {
        return Err(Error::PrecisionLoss {
            residual: residual.to_f64(),
            threshold: threshold.to_f64(),
            condition_estimate,
            suggested_bits: prec * 2,
        });
    }
    Ok(DkSolution {
        d,
        condition_estimate,
        residual,
    })
}

struct LuFactors {
    /// combined L (unit diagonal, below) and U (diagonal and above)
    lu: Vec<Vec<BigReal>>,
    /// row permutation
    perm: Vec<usize>,
}

fn lu_factor(matrix: &[Vec<BigReal>], prec: u32) -> Result<LuFactors> {
    let n = matrix.len();
    let mut lu: Vec<Vec<BigReal>> = matrix
        .iter()
        .map(|row| row.iter().map(|v| Float::with_val(prec, v)).collect())
        .collect();
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| lu[a][col].cmp_abs(&lu[b][col]).expect("finite entries"))
            .expect("nonempty column");
        if lu[pivot_row][col].is_zero() {
            let condition_estimate = f64::INFINITY;
            return Err(Error::Singular { condition_estimate });
        }
        lu.swap(col, pivot_row);
        perm.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = Float::with_val(prec, &lu[row][col] / &lu[col][col]);
            for k in col + 1..n {
                let sub = Float::with_val(prec, &factor * &lu[col][k]);
                lu[row][k] -= sub;
            }
            lu[row][col] = factor;
        }
    }
    Ok(LuFactors { lu, perm })
}

fn lu_solve(f: &LuFactors, rhs: &[BigReal], prec: u32) -> Vec<BigReal> {
    let n = rhs.len();
    // forward substitution with permuted rhs
    let mut y: Vec<BigReal> = (0..n)
        .map(|r| Float::with_val(prec, &rhs[f.perm[r]]))
        .collect();
    for r in 1..n {
        for k in 0..r {
            let sub = Float::with_val(prec, &f.lu[r][k] * &y[k]);
            y[r] -= sub;
        }
    }
    // back substitution
    for r in (0..n).rev() {
        for k in r + 1..n {
            let sub = Float::with_val(prec, &f.lu[r][k] * &y[k]);
            y[r] -= sub;
        }
        let div = Float::with_val(prec, &f.lu[r][r]);
        y[r] /= div;
    }
    y
}

fn inf_norm(matrix: &[Vec<BigReal>], prec: u32) -> BigReal {
    let mut best = Float::new(prec);
    for row in matrix {
        let mut sum = Float::new(prec);
        for v in row {
            sum += Float::with_val(prec, v.abs_ref());
        }
        if sum > best {
            best = sum;
        }
    }
    best
}

fn validate_m_n(m: u32, n: u32) -> Result<()> {
    if m < 4 {
        return Err(Error::InvalidParameter(format!(
            "smoothness order m must be at least 4, got {m}"
        )));
    }
    if n == 0 || n < m - 3 {
        return Err(Error::InvalidParameter(format!(
            "node count N must satisfy N >= m - 3 (and N >= 1); got N={n} for m={m}"
        )));
    }
    Ok(())
}

/// Builds the optimal rule for smoothness order `m` and node parameter
/// `N` at the given working precision.
///
/// The pipeline is: isolate the unit-disk roots of `E_{2m-2}`, assemble
/// and solve the multiplier system, evaluate the closed-form weights,
/// and compute the exact squared error norm. All stages run at
/// `precision_bits` and the result is bit-deterministic.
///
/// # Errors
///
/// Rejects `m < 4` and `N < m - 3`, and propagates root-isolation and
/// solver failures.
///
/// # Examples
///
/// ```
/// use optquad::rules::build_rule;
///
/// // For m = 4 the optimal rule is the classical endpoint-corrected
/// // trapezoidal rule: interior weights h, endpoint weights h/2.
/// let rule = build_rule(4, 10, 128).unwrap();
/// let h = rule.h.to_f64();
/// assert!((rule.c[3].to_f64() - h).abs() < 1e-16);
/// assert!((rule.a.to_f64() - h * h / 12.0).abs() < 1e-16);
/// ```
pub fn build_rule(m: u32, n: u32, precision_bits: u32) -> Result<QuadRule> {
    validate_m_n(m, n)?;
    let prec = precision_bits;
    let roots = unit_disk_roots(m, prec)?;
    let system = assemble_dk_system(m, n, &roots)?;
    let solution = solve_dk(&system)?;
    let d = solution.d;
    let qs = &roots.roots;

    let h = Float::with_val(prec, 1) / Float::with_val(prec, n);

    // endpoint weight: h (1/2 + Σ d_k (q^N − q)/(1 − q))
    let mut end_sum = Float::with_val(prec, Rational::from((1, 2)));
    for (dk, q) in d.iter().zip(qs) {
        let qn = Float::with_val(prec, q.pow(n));
        let num = qn - q;
        let den = Float::with_val(prec, 1 - q);
        end_sum += Float::with_val(prec, dk * &(num / den));
    }
    let c_end = Float::with_val(prec, &h * &end_sum);

    // interior weights: h (1 + Σ d_k (q^β + q^{N−β}))
    let mut c = vec![Float::new(prec); n as usize + 1];
    c[0] = c_end.clone();
    c[n as usize] = c_end;
    for beta in 1..n {
        let mut s = Float::with_val(prec, 1);
        for (dk, q) in d.iter().zip(qs) {
            let p1 = Float::with_val(prec, q.pow(beta));
            let p2 = Float::with_val(prec, q.pow(n - beta));
            s += Float::with_val(prec, dk * &(p1 + p2));
        }
        c[beta as usize] = Float::with_val(prec, &h * &s);
    }

    // A = h² (1/12 − Σ d_k (q + q^{N+1})/(1 − q)²)
    let mut a_sum = Float::with_val(prec, Rational::from((1, 12)));
    for (dk, q) in d.iter().zip(qs) {
        let qn1 = Float::with_val(prec, q.pow(n + 1));
        let num = Float::with_val(prec, q + &qn1);
        let den = Float::with_val(prec, 1 - q).pow(2);
        a_sum -= Float::with_val(prec, dk * &(num / den));
    }
    let h2 = Float::with_val(prec, h.square_ref());
    let a = h2 * a_sum;

    // B = h⁴ (B_4/4! − (1/3!) Σ d_k T_3(q_k, N))
    let b4_over_24 = bernoulli(4) / Rational::from(24);
    let mut b_sum = from_rational(prec, &b4_over_24);
    let sixth = Float::with_val(prec, Rational::from((1, 6)));
    for (dk, q) in d.iter().zip(qs) {
        let t3 = inner_sum(q, n, 3);
        b_sum -= Float::with_val(prec, dk * &(Float::with_val(prec, &sixth * &t3)));
    }
    let h4 = Float::with_val(prec, (&h).pow(4));
    let b = h4 * b_sum;

    let norm_sq = norm_sq_from_parts(m, n, &h, &d, qs)?;

    Ok(QuadRule {
        m,
        n,
        h,
        c,
        a,
        b,
        d,
        norm_sq,
        roots: qs.clone(),
        precision_bits: prec,
        condition_estimate: solution.condition_estimate,
        solver_residual: solution.residual.to_f64(),
    })
}

/// Squared norm of the error functional:
/// `(-1)^{m+1} [B_{2m} h^{2m}/(2m)! - (2 h^{2m+1}/(2m)!) Σ_k d_k T_{2m}(q_k, N)]`.
fn norm_sq_from_parts(
    m: u32,
    n: u32,
    h: &BigReal,
    d: &[BigReal],
    qs: &[BigReal],
) -> Result<BigReal> {
    let prec = h.prec();
    let two_m = 2 * m;
    let fact = Integer::from(Integer::factorial(two_m));
    let b2m_over_fact = bernoulli(two_m) / Rational::from(&fact);

    let h_2m = Float::with_val(prec, h.pow(two_m));
    let leading = from_rational(prec, &b2m_over_fact) * &h_2m;

    let mut correction = Float::new(prec);
    for (dk, q) in d.iter().zip(qs) {
        correction += Float::with_val(prec, dk * &inner_sum(q, n, two_m));
    }
    let h_2m1 = Float::with_val(prec, h.pow(two_m + 1));
    let scale = Float::with_val(prec, 2) * h_2m1 / from_integer(prec, &fact);
    let mut norm = leading - scale * correction;
    if m % 2 == 0 {
        norm = -norm;
    }
    if !(norm > 0) {
        return Err(Error::Defect(format!(
            "squared error norm came out non-positive ({:.3e}) for m={m}, N={n}",
            norm.to_f64()
        )));
    }
    Ok(norm)
}

/// Recomputes the squared error norm of a built rule from its stored
/// multipliers and roots; equal to `rule.norm_sq` by construction.
pub fn error_norm_sq(rule: &QuadRule) -> BigReal {
    norm_sq_from_parts(rule.m, rule.n, &rule.h, &rule.d, &rule.roots)
        .expect("a built rule has a positive norm")
}

/// Residual `‖M d - rhs‖_∞` of a candidate solution against a system;
/// used to verify solved multipliers independently of the solver.
pub fn system_residual(system: &DkSystem, d: &[BigReal]) -> BigReal {
    let prec = system.rhs[0].prec();
    let mut worst = Float::new(prec);
    for (row, rhs) in system.matrix.iter().zip(&system.rhs) {
        let mut acc = Float::new(prec);
        for (mv, dv) in row.iter().zip(d) {
            acc += Float::with_val(prec, mv * dv);
        }
        acc -= rhs;
        acc.abs_mut();
        if acc > worst {
            worst = acc;
        }
    }
    worst
}
