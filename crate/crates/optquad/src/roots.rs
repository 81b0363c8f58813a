//! Certified isolation of the unit-disk roots of `E_{2m-2}`.
//!
//! Every Euler-Frobenius polynomial has only real, simple, negative
//! roots, coming in reciprocal pairs `(q, 1/q)`; for `E_{2m-2}` exactly
//! `m-1` of them lie in `(-1, 0)`, and those are the `q_k` that
//! parameterize the optimal rules. Rather than assume the classical
//! facts, the isolation here establishes them constructively for each
//! `m`: it counts sign changes of *exact* integer evaluations at dyadic
//! points and fails loudly if the count is not `m-1`.
//!
//! The scan covers `(-1, 0)` by octaves `[-2^{-t}, -2^{-t-1}]`, each
//! subdivided uniformly. The roots cluster toward `0^-`, but they cannot
//! pass below `c_0/c_1`: for a polynomial with all-real negative roots,
//! `Σ 1/|q_i| = c_1/c_0`, so `min |q_i| ≥ c_0/c_1`. Descending to
//! `2^{-T-1} < c_0/(2 c_1)` therefore provably covers every root.
//!
//! Refinement is plain bisection with the same exact sign oracle, run to
//! a dyadic width of `2^{-(precision_bits+8)}`, so the certified error
//! of the rounded midpoint is below `2^{-precision_bits}` — far inside
//! the `2^{-precision_bits/2}` certificate this module promises.

use crate::error::{Error, Result};
use crate::exact::{euler_frobenius, EFPolynomial};
use crate::real::BigReal;
use rug::{Float, Integer};
use std::cmp::Ordering;

/// The `m-1` certified roots of `E_{2m-2}` inside the unit disk.
#[derive(Debug, Clone)]
pub struct RootSet {
    /// Smoothness order the roots belong to.
    pub m: u32,
    /// Roots in ascending order, all in `(-1, 0)`, all distinct.
    pub roots: Vec<BigReal>,
    /// Bound on the absolute error of every root.
    pub certified_error: BigReal,
}

/// A bracket `[a/2^s, (a+1)/2^s]` with a sign change across it.
#[derive(Debug, Clone)]
struct Bracket {
    a: Integer,
    s: u32,
}

/// Scans `(-1, 0)` and returns one bracket per root, in ascending order.
///
/// `expected` is the number of roots that must be found; the subdivision
/// is refined (up to a generous cap) until exactly that many sign
/// changes appear, and an error reports any mismatch as a defect in the
/// polynomial rather than a user error.
pub fn isolate_unit_interval_roots(
    poly: &EFPolynomial,
    expected: usize,
) -> Result<Vec<(Integer, u32)>> {
    let coeffs = poly.coeffs();
    let c0 = &coeffs[0];
    let c1 = coeffs.get(1).unwrap_or(c0);
    // Octave floor: min |root| >= c0/c1, so 2^{-t_floor-1} < c0/(2 c1)
    // covers everything.
    let ratio = Integer::from(c1 / c0) + 1u32;
    let t_floor = ratio.significant_bits() + 1;

    // cells per octave = 2^r, refined on shortfall
    for r in [5u32, 7, 9, 12, 16, 20] {
        let brackets = scan(coeffs, t_floor, r);
        match brackets.len().cmp(&expected) {
            Ordering::Equal => return Ok(brackets.into_iter().map(|b| (b.a, b.s)).collect()),
            Ordering::Greater => {
                return Err(Error::Defect(format!(
                    "found {} sign changes in (-1,0), expected {expected}",
                    brackets.len()
                )))
            }
            Ordering::Less => continue,
        }
    }
    Err(Error::Defect(format!(
        "could not isolate {expected} roots in (-1,0) at the maximum scan resolution"
    )))
}

/// One pass over the octave grid with `2^r` cells per octave.
fn scan(coeffs: &[Integer], t_floor: u32, r: u32) -> Vec<Bracket> {
    let cells: u32 = 1 << r;
    let mut brackets = Vec::new();
    let mut prev: Option<(Ordering, Integer, u32)> = None;

    for t in 0..=t_floor {
        let s = t + r + 1;
        // octave [-2^{-t}, -2^{-t-1}]: numerators -(2^{r+1}) .. -(2^r)
        for u in 0..cells {
            let a = -(Integer::from(2u32 * cells) - u);
            let sign = exact_sign(coeffs, &a, s);
            assert_ne!(
                sign,
                Ordering::Equal,
                "dyadic grid point is an exact root, which Euler-Frobenius polynomials exclude"
            );
            if let Some((psign, pa, ps)) = prev.take() {
                if psign != sign {
                    brackets.push(Bracket { a: pa, s: ps });
                }
            }
            prev = Some((sign, a, s));
        }
    }
    // closing endpoint -2^{-t_floor-1}
    let s_last = t_floor + r + 1;
    let a_last = -(Integer::from(1u32) << r);
    let sign = exact_sign(coeffs, &a_last, s_last);
    if let Some((psign, pa, ps)) = prev {
        if psign != sign {
            brackets.push(Bracket { a: pa, s: ps });
        }
    }
    brackets
}

/// Exact sign of `P(a/2^s)` via `Σ_j c_j a^j 2^{s(deg-j)}`.
fn exact_sign(coeffs: &[Integer], a: &Integer, s: u32) -> Ordering {
    let deg = coeffs.len() - 1;
    let mut acc = Integer::new();
    let mut apow = Integer::from(1);
    for (j, c) in coeffs.iter().enumerate() {
        let shift = s as usize * (deg - j);
        acc += Integer::from(c * &apow) << shift;
        if j < deg {
            apow *= a;
        }
    }
    acc.cmp0()
}

/// Bisects the bracket `[a/2^s, (a+1)/2^s]` down to width `2^{-depth}`,
/// keeping everything dyadic and every sign exact.
fn bisect(coeffs: &[Integer], mut a: Integer, mut s: u32, depth: u32) -> (Integer, u32) {
    let left_sign = exact_sign(coeffs, &a, s);
    while s < depth {
        let mid = Integer::from(&a * 2u32) + 1u32;
        let msign = exact_sign(coeffs, &mid, s + 1);
        assert_ne!(msign, Ordering::Equal, "dyadic midpoint cannot be a root");
        if msign == left_sign {
            a = mid;
        } else {
            a *= 2u32;
        }
        s += 1;
    }
    (a, s)
}

/// Locates all `m-1` roots of `E_{2m-2}` inside the unit disk, each
/// certified to absolute error at most `2^{-precision_bits}` (well below
/// the promised `2^{-precision_bits/2}`).
///
/// Roots are returned sorted ascending and are bit-deterministic across
/// runs, so downstream multiplier indexing is reproducible.
///
/// # Errors
///
/// Fails with [`Error::InvalidParameter`] for `m < 4` or
/// `precision_bits < 64`, and with [`Error::Defect`] if sign-change
/// bracketing cannot isolate exactly `m-1` roots in `(-1, 0)`.
pub fn unit_disk_roots(m: u32, precision_bits: u32) -> Result<RootSet> {
    if m < 4 {
        return Err(Error::InvalidParameter(format!(
            "smoothness order m must be at least 4, got {m}"
        )));
    }
    if precision_bits < 64 {
        return Err(Error::InvalidParameter(format!(
            "precision_bits must be at least 64, got {precision_bits}"
        )));
    }
    let poly = euler_frobenius(2 * m - 2);
    let expected = (m - 1) as usize;
    let brackets = isolate_unit_interval_roots(&poly, expected)?;

    let depth = precision_bits + 8;
    let mut roots = Vec::with_capacity(expected);
    for (a, s) in brackets {
        let (a, s) = bisect(poly.coeffs(), a, s, depth);
        // midpoint (2a+1)/2^{s+1}, rounded to the working precision
        let mid = Integer::from(2u32) * a + 1u32;
        let root = Float::with_val(precision_bits, mid) >> (s + 1);
        roots.push(root);
    }

    for w in roots.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::Defect("isolated roots are not ascending".into()));
        }
    }
    let certified_error = crate::real::pow2(32, -(precision_bits as i32));
    Ok(RootSet {
        m,
        roots,
        certified_error,
    })
}
