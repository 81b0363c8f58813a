//! Exact integer and rational building blocks.
//!
//! Everything downstream rests on three pieces of exact arithmetic:
//!
//! * Bernoulli numbers `B_n` as exact rationals,
//! * forward differences of monomials at zero, `Δ^i 0^k`,
//! * Euler-Frobenius polynomials `E_k` with exact integer coefficients.
//!
//! The rational scalar is [`rug::Rational`], which keeps the canonical form
//! required here (reduced, positive denominator) after every operation.
//!
//! All three functions memoize by index: the error-norm formula queries
//! `Δ^i 0^{2m}` for every `i ≤ 2m`, root isolation re-reads the same
//! polynomial coefficients, and repeated rule builds for one smoothness
//! order reuse everything.

use rug::{Integer, Rational};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Exact binomial coefficient `C(n, k)`.
pub fn binomial(n: u32, k: u32) -> Integer {
    Integer::from(Integer::binomial_u(n, k))
}

/// Bernoulli number `B_n` as an exact rational, under the convention
/// `B_1 = -1/2` (the sign that makes the power-sum identity
/// `Σ_{l=0}^{n-1} l^k = (1/(k+1)) Σ_j C(k+1, j) B_j n^{k+1-j}` hold).
///
/// Computed by the defining recurrence `Σ_{j=0}^{n} C(n+1, j) B_j = 0`
/// and cached, so the cost of `B_n` is paid once per process.
///
/// # Examples
///
/// ```
/// use optquad::exact::bernoulli;
/// use rug::Rational;
///
/// assert_eq!(bernoulli(0), Rational::from(1));
/// assert_eq!(bernoulli(1), Rational::from((-1, 2)));
/// assert_eq!(bernoulli(8), Rational::from((-1, 30)));
/// assert_eq!(bernoulli(7), Rational::from(0));
/// ```
pub fn bernoulli(n: u32) -> Rational {
    static CACHE: OnceLock<Mutex<Vec<Rational>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(vec![Rational::from(1)]));
    let mut cache = cache.lock().unwrap();
    while cache.len() <= n as usize {
        let next = cache.len() as u32;
        let mut sum = Rational::new();
        for (j, b) in cache.iter().enumerate() {
            sum += Rational::from(b * &binomial(next + 1, j as u32));
        }
        sum /= -Rational::from(next + 1);
        cache.push(sum);
    }
    cache[n as usize].clone()
}

/// The `i`-th forward finite difference of `γ^k` at `γ = 0`:
/// `Δ^i 0^k = Σ_{l=1}^{i} (-1)^{i-l} C(i, l) l^k`, with the boundary
/// conventions `Δ^0 0^0 = 1`, `Δ^0 0^k = 0` for `k ≥ 1`, and
/// `Δ^i 0^0 = 0` for `i ≥ 1`.
///
/// Equals `i! · S(k, i)` where `S` is the Stirling number of the second
/// kind, in every case including the boundary ones.
///
/// # Examples
///
/// ```
/// use optquad::exact::delta_zero;
///
/// assert_eq!(delta_zero(0, 0), 1);
/// assert_eq!(delta_zero(2, 3), 6);
/// assert_eq!(delta_zero(3, 2), 0); // vanishes whenever i > k
/// ```
pub fn delta_zero(i: u32, k: u32) -> Integer {
    if i == 0 {
        return Integer::from(u32::from(k == 0));
    }
    if k == 0 || i > k {
        return Integer::new();
    }
    static CACHE: OnceLock<Mutex<HashMap<(u32, u32), Integer>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&(i, k)) {
        return v.clone();
    }
    let mut sum = Integer::new();
    for l in 1..=i {
        let term = binomial(i, l) * Integer::from(Integer::u_pow_u(l, k));
        if (i - l) % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
    }
    cache.lock().unwrap().insert((i, k), sum.clone());
    sum
}

/// Euler-Frobenius polynomial `E_k` as an exact integer coefficient list.
///
/// The coefficients are stored in ascending power order, are strictly
/// positive, palindromic (`coeffs[i] = coeffs[k-i]`, equivalent to the
/// reciprocal identity `x^k E_k(1/x) = E_k(x)`), and sum to `(k+1)!`
/// (the value `E_k(1)`). Its `2m-2` instance supplies the roots `q_k`
/// driving every optimal rule, and its `2m-1` instance the discrete
/// operator weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EFPolynomial {
    coeffs: Vec<Integer>,
}

impl EFPolynomial {
    /// Degree `k`; the coefficient list has `k + 1` entries.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficients in ascending power order.
    pub fn coeffs(&self) -> &[Integer] {
        &self.coeffs
    }

    /// Exact evaluation at a rational point (Horner).
    pub fn eval_rational(&self, x: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }
}

/// Constructs `E_k` by exact expansion of the finite-difference form
/// `Σ_{i=0}^{k+1} Δ^i 0^{k+1} (x-1)^{k+1-i}`, whose leading `x^{k+1}`
/// term cancels and leaves exactly `E_k`.
///
/// # Examples
///
/// ```
/// use optquad::exact::euler_frobenius;
///
/// let e2 = euler_frobenius(2);
/// let coeffs: Vec<i64> = e2.coeffs().iter().map(|c| c.to_i64().unwrap()).collect();
/// assert_eq!(coeffs, [1, 4, 1]);
/// ```
pub fn euler_frobenius(k: u32) -> EFPolynomial {
    static CACHE: OnceLock<Mutex<HashMap<u32, EFPolynomial>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(&k) {
        return p.clone();
    }

    let n = k + 1;
    let mut coeffs = vec![Integer::new(); n as usize + 1];
    for i in 0..=n {
        let d = delta_zero(i, n);
        if d == 0 {
            continue;
        }
        // add d * (x - 1)^(n - i)
        let deg = n - i;
        for t in 0..=deg {
            let mut term = binomial(deg, t) * &d;
            if (deg - t) % 2 == 1 {
                term = -term;
            }
            coeffs[t as usize] += term;
        }
    }

    let top = coeffs.pop().expect("coefficient vector is non-empty");
    assert!(top == 0, "leading term of the expansion must cancel");
    let poly = EFPolynomial { coeffs };

    // Construction invariants: positive, palindromic, E_k(1) = (k+1)!.
    let deg = poly.degree();
    for (i, c) in poly.coeffs.iter().enumerate() {
        assert!(*c > 0, "coefficient {i} of E_{k} must be positive");
        assert_eq!(c, &poly.coeffs[deg - i], "E_{k} must be palindromic");
    }
    debug_assert_eq!(
        poly.coeffs.iter().sum::<Integer>(),
        Integer::from(Integer::factorial(n)),
        "coefficients of E_{k} must sum to (k+1)!"
    );

    cache.lock().unwrap().insert(k, poly.clone());
    poly
}
