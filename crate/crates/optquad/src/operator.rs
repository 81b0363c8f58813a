//! The discrete inverse operator underlying the optimal rule.
//!
//! On the grid `hβ` the kernel
//!
//! ```text
//! D(hβ) = (2m-1)!/h^{2m} · {  Σ_k c_k q_k^{|β|}          |β| ≥ 2
//!                             1 + Σ_k c_k q_k            |β| = 1
//!                             -2^{2m-1} + Σ_k c_k        β = 0   }
//! c_k = (1 - q_k)^{2m+1} / (q_k E_{2m-1}(q_k))
//! ```
//!
//! is the discrete analogue of the `2m`-th derivative: its convolution
//! with `G(x) = |x|^{2m-1}/(2(2m-1)!)` satisfies `h Σ_γ D(hβ - hγ) G(hγ)
//! = δ_{β0}`, and its discrete moments vanish below order `2m` and
//! match `(2m)!` at order `2m`. Both identities hold only in the limit
//! over all integer `β`; on a finite window they hold up to a
//! geometric tail that [`convolution_check`] bounds explicitly from the
//! stored decay data.

use crate::error::{Error, Result};
use crate::exact::{bernoulli, euler_frobenius};
use crate::real::{eval_poly, from_integer, BigReal};
use crate::roots::unit_disk_roots;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

/// Sampled discrete operator kernel, symmetric in `β`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    /// Smoothness order `m ≥ 4`.
    pub m: u32,
    /// Grid step the kernel is scaled by.
    pub h: BigReal,
    /// Kernel values at `β = 0, 1, …, beta_max`; `D(-hβ) = D(hβ)`.
    pub values: Vec<BigReal>,
    /// `Σ_k |c_k|`, the coefficient mass driving the decay bound.
    pub coeff_mass: BigReal,
    /// `max_k |q_k| < 1`, the geometric decay rate.
    pub decay_rate: BigReal,
    /// Common scale `(2m-1)!/h^{2m}` of all kernel values.
    pub scale: BigReal,
}

/// Outcome of a finite-window convolution/moment verification.
#[derive(Debug, Clone)]
pub struct OperatorCheck {
    /// Worst deviation of `h (D * G)(hβ)` from `δ_{β0}` over the window.
    pub convolution_residual: f64,
    /// Worst normalized moment deviation over orders `0 .. 2m`.
    pub moment_residual: f64,
    /// Rigorous bound on the truncation error of the convolution sums.
    pub tail_bound: f64,
    /// Window half-width the check ran at.
    pub beta_max: u32,
}

impl DiscreteOperator {
    /// Kernel value at signed index `β`, using symmetry.
    ///
    /// # Panics
    ///
    /// Panics when `|β|` exceeds the sampled window.
    pub fn value(&self, beta: i64) -> &BigReal {
        &self.values[beta.unsigned_abs() as usize]
    }

    /// Largest sampled index.
    pub fn beta_max(&self) -> u32 {
        (self.values.len() - 1) as u32
    }
}

/// Builds the operator kernel for order `m`, step `h = 1/n`, sampled at
/// `β = 0 ..= beta_max`.
///
/// # Errors
///
/// Requires `m ≥ 4` and `beta_max ≥ 2m + 2`; the moment identities are
/// meaningless on a narrower window.
pub fn build_operator(m: u32, n: u32, beta_max: u32, precision_bits: u32) -> Result<DiscreteOperator> {
    if m < 4 {
        return Err(Error::InvalidParameter(format!(
            "smoothness order m must be at least 4, got {m}"
        )));
    }
    if beta_max < 2 * m + 2 {
        return Err(Error::InvalidParameter(format!(
            "window beta_max={beta_max} too narrow for m={m}; need at least {}",
            2 * m + 2
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("node count N must be positive".into()));
    }
    let prec = precision_bits;
    let roots = unit_disk_roots(m, prec)?;
    let qs = &roots.roots;
    let ef = euler_frobenius(2 * m - 1);

    // c_k = (1 − q_k)^{2m+1} / (q_k E_{2m−1}(q_k))
    let mut cks = Vec::with_capacity(qs.len());
    for q in qs {
        let num = Float::with_val(prec, 1 - q).pow(2 * m + 1);
        let den = Float::with_val(prec, q * &eval_poly(&ef.coeffs(), q));
        cks.push(num / den);
    }

    let h = Float::with_val(prec, 1) / Float::with_val(prec, n);
    let fact = Integer::from(Integer::factorial(2 * m - 1));
    let scale = from_integer(prec, &fact) / Float::with_val(prec, (&h).pow(2 * m));

    let mut values = Vec::with_capacity(beta_max as usize + 1);
    // running q_k^β per root
    let mut q_pows: Vec<BigReal> = qs.iter().map(|_| Float::with_val(prec, 1)).collect();
    for beta in 0..=beta_max {
        let mut s = Float::new(prec);
        for (ck, qp) in cks.iter().zip(&q_pows) {
            s += Float::with_val(prec, ck * qp);
        }
        match beta {
            0 => {
                let top = Float::with_val(prec, Integer::from(1) << (2 * m - 1));
                s -= top;
            }
            1 => s += 1,
            _ => {}
        }
        values.push(Float::with_val(prec, &scale * &s));
        for (qp, q) in q_pows.iter_mut().zip(qs) {
            *qp *= q;
        }
    }

    let mut coeff_mass = Float::new(prec);
    for ck in &cks {
        coeff_mass += Float::with_val(prec, ck.abs_ref());
    }
    let decay_rate = qs
        .iter()
        .map(|q| Float::with_val(prec, q.abs_ref()))
        .max_by(|a, b| a.partial_cmp(b).expect("finite roots"))
        .expect("nonempty root set");

    Ok(DiscreteOperator {
        m,
        h,
        values,
        coeff_mass,
        decay_rate,
        scale,
    })
}

/// `G(x) = |x|^{2m-1} / (2 (2m-1)!)`, the kernel the operator inverts.
fn g_kernel(m: u32, prec: u32, x: &BigReal) -> BigReal {
    let fact = Integer::from(Integer::factorial(2 * m - 1));
    let ax = Float::with_val(prec, x.abs_ref());
    ax.pow(2 * m - 1) / (Float::with_val(prec, 2) * from_integer(prec, &fact))
}

/// Discrete moment `Σ_{|β| ≤ beta_max} D(hβ) (hβ)^k` of the sampled
/// kernel. Exactly zero (in the full-lattice limit) for `k < 2m`, and
/// `(2m)!` at `k = 2m`.
pub fn moment(op: &DiscreteOperator, k: u32) -> BigReal {
    let prec = op.h.prec();
    let mut total = Float::new(prec);
    if k == 0 {
        total += &op.values[0];
    }
    // β and −β combine: even k doubles, odd k cancels
    if k % 2 == 1 {
        return total; // odd moments vanish identically by symmetry
    }
    for beta in 1..=op.beta_max() {
        let x = Float::with_val(prec, &op.h * beta);
        let xk = x.pow(k);
        total += Float::with_val(prec, &op.values[beta as usize] * &xk) * 2u32;
    }
    if k == 0 {
        // β = 0 term was added before the loop; nothing more to do
    }
    total
}

/// Target value of the `k`-th moment over the full lattice:
/// `0` for `k < 2m` and odd `k`, `(2m)!` for `k = 2m`,
/// `h^{2m} (4m)! B_{2m} / (2m)!` for `k = 4m`.
pub fn moment_target(op: &DiscreteOperator, k: u32) -> BigReal {
    let m = op.m;
    let prec = op.h.prec();
    if k == 2 * m {
        let fact = Integer::from(Integer::factorial(2 * m));
        from_integer(prec, &fact)
    } else if k == 4 * m {
        let f4m = Integer::from(Integer::factorial(4 * m));
        let f2m = Integer::from(Integer::factorial(2 * m));
        let ratio = bernoulli(2 * m) * Rational::from((f4m, f2m));
        let h_2m = Float::with_val(prec, (&op.h).pow(2 * m));
        crate::real::from_rational(prec, &ratio) * h_2m
    } else {
        Float::new(prec)
    }
}

/// Rigorous bound on the magnitude of the discarded tail
/// `Σ_{β > beta_max} D(hβ) (hβ)^k`, doubled for the two lattice sides.
///
/// Uses `|D(hβ)| ≤ scale · K ρ^β` and the ratio bound
/// `ρ (1 + 1/(beta_max+1))^k < 1` to dominate the tail by a geometric
/// series starting at `β = beta_max + 1`.
pub fn moment_tail_bound(op: &DiscreteOperator, k: u32) -> BigReal {
    let prec = op.h.prec();
    let b1 = op.beta_max() + 1;
    let first_power = Float::with_val(prec, (&op.decay_rate).pow(b1));
    let growth = Float::with_val(prec, 1f64 + 1f64 / b1 as f64).pow(k);
    let ratio = Float::with_val(prec, &op.decay_rate * &growth);
    if ratio >= 1 {
        return Float::with_val(prec, f64::INFINITY);
    }
    let geom = Float::with_val(prec, 1) / (Float::with_val(prec, 1) - ratio);
    let hb = Float::with_val(prec, &op.h * b1);
    let hbk = hb.pow(k);
    let bound = Float::with_val(prec, &op.scale * &op.coeff_mass) * first_power * hbk * geom;
    bound * 2u32
}

/// Verifies, at the sampled window, that the kernel inverts `G` and has
/// the stated moments.
///
/// Checks `|h (D * G)(hβ) - δ_{β0}|` at every representable `β` and the
/// normalized moment deviations for `k = 0 .. 2m`, then compares the
/// worst observed deviation against `tolerance` plus the rigorous tail
/// bound of the truncation. Convolution at offset `β` only has full
/// support for `|β| ≤ beta_max/2`, so the scan stays inside that range.
///
/// # Errors
///
/// [`Error::TailBound`] when the window is too narrow for the requested
/// tolerance: the truncation tail alone exceeds it, so no verdict about
/// the kernel is possible. The error carries the `beta_max` that a
/// doubling search found sufficient.
pub fn convolution_check(op: &DiscreteOperator, tolerance: f64) -> Result<OperatorCheck> {
    let prec = op.h.prec();
    let m = op.m;
    let bmax = op.beta_max();

    let conv_tail = convolution_tail_bound(op).to_f64();
    // normalized moment tails over the checked orders
    let mut worst_tail = conv_tail;
    for k in (0..=2 * m).step_by(2) {
        let norm = moment_norm(op, k);
        let t = Float::with_val(prec, moment_tail_bound(op, k) / norm).to_f64();
        worst_tail = worst_tail.max(t);
    }
    if worst_tail > tolerance {
        let required = required_beta_max(op, tolerance);
        return Err(Error::TailBound {
            tail_bound: worst_tail,
            tolerance,
            required_beta_max: required,
        });
    }

    // h Σ_γ D(hβ − hγ) G(hγ), with γ covering the kernel's full
    // sampled support around each offset; only the D factor is
    // windowed, G is closed-form everywhere
    let mut conv_residual = Float::new(prec);
    let half = (bmax / 2) as i64;
    for beta in 0..=half {
        let mut acc = Float::new(prec);
        for gamma in beta - bmax as i64..=beta + bmax as i64 {
            let idx = (beta - gamma).unsigned_abs() as usize;
            let x = Float::with_val(prec, &op.h * gamma);
            let g = g_kernel(m, prec, &x);
            acc += Float::with_val(prec, &op.values[idx] * &g);
        }
        acc *= &op.h;
        if beta == 0 {
            acc -= 1;
        }
        acc.abs_mut();
        if acc > conv_residual {
            conv_residual = acc;
        }
    }

    let mut moment_residual = Float::new(prec);
    for k in (0..=2 * m).step_by(2) {
        let mut dev = moment(op, k);
        dev -= moment_target(op, k);
        dev.abs_mut();
        dev /= moment_norm(op, k);
        if dev > moment_residual {
            moment_residual = dev;
        }
    }

    Ok(OperatorCheck {
        convolution_residual: conv_residual.to_f64(),
        moment_residual: moment_residual.to_f64(),
        tail_bound: worst_tail,
        beta_max: bmax,
    })
}

/// Deep verification of the higher moment range `2m < k ≤ 4m`: zero for
/// every order except `k = 4m`, whose target involves `B_{2m}`. Far more
/// cancellation-heavy than the basic check, hence kept separate.
pub fn deep_moment_check(op: &DiscreteOperator, tolerance: f64) -> Result<OperatorCheck> {
    let prec = op.h.prec();
    let m = op.m;
    let mut worst_tail = 0f64;
    for k in (2 * m + 2..=4 * m).step_by(2) {
        let norm = moment_norm(op, k);
        let t = Float::with_val(prec, moment_tail_bound(op, k) / norm).to_f64();
        worst_tail = worst_tail.max(t);
    }
    if worst_tail > tolerance {
        let required = required_beta_max(op, tolerance);
        return Err(Error::TailBound {
            tail_bound: worst_tail,
            tolerance,
            required_beta_max: required,
        });
    }
    let mut moment_residual = Float::new(prec);
    for k in (2 * m + 2..=4 * m).step_by(2) {
        let mut dev = moment(op, k);
        dev -= moment_target(op, k);
        dev.abs_mut();
        dev /= moment_norm(op, k);
        if dev > moment_residual {
            moment_residual = dev;
        }
    }
    Ok(OperatorCheck {
        convolution_residual: 0.0,
        moment_residual: moment_residual.to_f64(),
        tail_bound: worst_tail,
        beta_max: op.beta_max(),
    })
}

/// Normalization for moment deviations: `max(|target|, scale · h^k)`,
/// the natural magnitude of individual terms in the sum.
fn moment_norm(op: &DiscreteOperator, k: u32) -> BigReal {
    let prec = op.h.prec();
    let target = Float::with_val(prec, moment_target(op, k).abs_ref());
    let hk = Float::with_val(prec, (&op.h).pow(k));
    let term_scale = Float::with_val(prec, &op.scale * &hk);
    if target > term_scale {
        target
    } else {
        term_scale
    }
}

/// Bound on the part of `h (D * G)(hβ)` lost to truncating the kernel
/// index at `beta_max`, for scanned offsets `0 ≤ β ≤ beta_max/2`. Every
/// lost term has kernel index `≥ beta_max + 1`, so magnitude
/// `≤ scale · K ρ^{beta_max+1}`; its `G` factor is largest at
/// `|hγ| = h(β + beta_max + 1)`, worst at the largest offset. Successive
/// lost terms gain at most `(1 + 1/idx)^{2m-1}` in `G` and a factor `ρ`
/// in the kernel, so a geometric series dominates the whole tail.
fn convolution_tail_bound(op: &DiscreteOperator) -> BigReal {
    let prec = op.h.prec();
    let m = op.m;
    let bmax = op.beta_max();
    let idx0 = 3 * bmax / 2 + 1; // β = beta_max/2 plus the first lost index
    let first_power = Float::with_val(prec, (&op.decay_rate).pow(bmax + 1));
    let worst_x0 = Float::with_val(prec, &op.h * idx0);
    let g0 = g_kernel(m, prec, &worst_x0);
    let growth = Float::with_val(prec, 1f64 + 1f64 / idx0 as f64).pow(2 * m - 1);
    let ratio = Float::with_val(prec, &op.decay_rate * &growth);
    if ratio >= 1 {
        return Float::with_val(prec, f64::INFINITY);
    }
    let geom = Float::with_val(prec, 1) / (Float::with_val(prec, 1) - ratio);
    let bound =
        Float::with_val(prec, &op.h * &op.scale) * op.coeff_mass.clone() * first_power * g0 * geom;
    bound * 2u32
}

/// Smallest window (found by doubling, then binary refinement) whose
/// tail bounds all fall under `tolerance`. Pure arithmetic on the decay
/// data; no kernel rebuild is needed.
fn required_beta_max(op: &DiscreteOperator, tolerance: f64) -> u32 {
    let tail_at = |bm: u32| -> f64 {
        let probe = DiscreteOperator {
            m: op.m,
            h: op.h.clone(),
            values: vec![Float::new(op.h.prec()); bm as usize + 1],
            coeff_mass: op.coeff_mass.clone(),
            decay_rate: op.decay_rate.clone(),
            scale: op.scale.clone(),
        };
        let mut worst = convolution_tail_bound(&probe).to_f64();
        for k in (0..=2 * op.m).step_by(2) {
            let prec = op.h.prec();
            let norm = moment_norm(&probe, k);
            let t = Float::with_val(prec, moment_tail_bound(&probe, k) / norm).to_f64();
            worst = worst.max(t);
        }
        worst
    };
    let mut hi = op.beta_max().max(2 * op.m + 2);
    while tail_at(hi) > tolerance {
        match hi.checked_mul(2) {
            Some(next) if next <= 1 << 24 => hi = next,
            _ => return hi, // bound diverges; report the last attempt
        }
    }
    let mut lo = hi / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if tail_at(mid) > tolerance {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
