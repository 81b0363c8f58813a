//! Applying rules to functions: exactness, guaranteed bounds, the
//! finite-difference fallback, comparator agreement, and convergence
//! studies.

use optquad::engine::{
    apply, by_id, converge, corpus, corpus_ids, error_bound, euler_maclaurin, monomial, trapezoid,
    Integrand,
};
use optquad::real::{pow2, BigReal};
use optquad::rules::build_rule;
use optquad::Error;
use rug::Float;
use std::sync::Arc;

#[test]
fn constant_function_integrates_to_one() {
    let rule = build_rule(4, 12, 256).unwrap();
    let one = monomial(0, 4, 256);
    let quad = apply(&rule, &one).unwrap();
    let diff = Float::with_val(256, &quad.value - 1u32).abs();
    assert!(diff < pow2(256, -240));
    assert!(!quad.fd_fallback);
}

/// Exactness through degree `m - 1` on a fixed grid of cases.
#[test]
fn polynomial_exactness_below_order() {
    for m in [4u32, 6, 8] {
        let rule = build_rule(m, 16, 256).unwrap();
        for alpha in 0..m {
            let g = monomial(alpha, m, 256);
            let quad = apply(&rule, &g).unwrap();
            let exact = g.exact_integral.as_ref().unwrap();
            let diff = Float::with_val(256, &quad.value - exact).abs();
            assert!(diff < pow2(256, -64), "m={m}, α={alpha}: {diff}");
            assert!(error_bound(&rule, g.fm_l2.as_ref().unwrap()).is_zero());
        }
    }
}

/// The worked example: `e^x` at m=4, N=10 must land within
/// `sqrt(h⁸/1209600) · sqrt((e²-1)/2)` of `e - 1`.
#[test]
fn exp_error_within_guaranteed_bound() {
    let rule = build_rule(4, 10, 256).unwrap();
    let g = by_id("exp", 4, 256).unwrap();
    let quad = apply(&rule, &g).unwrap();
    let err = Float::with_val(256, &quad.value - g.exact_integral.as_ref().unwrap()).abs();
    let bound = error_bound(&rule, g.fm_l2.as_ref().unwrap());
    assert!(err <= bound, "{err} > {bound}");
    // and the bound is the closed form it claims to be
    let h8 = Float::with_val(256, rug::ops::Pow::pow(&rule.h, 8u32));
    let want = (h8 / Float::with_val(256, 1209600u32)).sqrt()
        * g.fm_l2.as_ref().unwrap();
    let diff = Float::with_val(256, &bound - &want).abs();
    assert!(diff <= want * pow2(256, -240));
}

#[test]
fn corpus_is_complete_and_bounded() {
    assert_eq!(corpus_ids(), &["exp", "sinpi", "inv1p", "xm"]);
    for m in [4u32, 5, 6] {
        let rule = build_rule(m, 16, 256).unwrap();
        for g in corpus(m, 256) {
            assert!(g.f1.is_some() && g.f3.is_some(), "{}", g.id);
            let quad = apply(&rule, &g).unwrap();
            assert!(!quad.fd_fallback);
            let err =
                Float::with_val(256, &quad.value - g.exact_integral.as_ref().unwrap()).abs();
            let bound = error_bound(&rule, g.fm_l2.as_ref().unwrap());
            assert!(err <= bound, "m={m}, {}: {err} > {bound}", g.id);
        }
    }
    assert!(by_id("nope", 4, 128).unwrap_err().to_string().contains("exp"));
}

#[test]
fn apply_is_linear() {
    let prec = 256;
    let rule = build_rule(5, 16, prec).unwrap();
    let a = by_id("exp", 5, prec).unwrap();
    let b = by_id("sinpi", 5, prec).unwrap();
    let (fa, fb) = (a.f.clone(), b.f.clone());
    let combo = Integrand {
        id: "combo".into(),
        f: Arc::new(move |x: &BigReal| {
            let va = fa(x);
            let vb = fb(x);
            Float::with_val(x.prec(), 2 * va - 3 * vb)
        }),
        f1: None,
        f3: None,
        fm_l2: None,
        exact_integral: None,
    };
    // analytic derivatives on one side, fallback on the other, so the
    // comparison also exercises fallback accuracy
    let qa = apply(&rule, &a).unwrap();
    let qb = apply(&rule, &b).unwrap();
    let qc = apply(&rule, &combo).unwrap();
    assert!(qc.fd_fallback);
    let want = Float::with_val(prec, 2 * &qa.value) - Float::with_val(prec, 3 * &qb.value);
    let diff = Float::with_val(prec, &qc.value - &want).abs();
    assert!(diff < 1e-18, "{diff}");
}

/// Fallback derivatives agree with analytic ones to far below the
/// rule's own error scale, and the estimate field reports the gap.
#[test]
fn fd_fallback_tracks_analytic_derivatives() {
    let prec = 256;
    let rule = build_rule(4, 10, prec).unwrap();
    let full = by_id("exp", 4, prec).unwrap();
    let stripped = Integrand {
        f1: None,
        f3: None,
        ..full.clone()
    };
    let qa = apply(&rule, &full).unwrap();
    let qf = apply(&rule, &stripped).unwrap();
    assert!(!qa.fd_fallback && qa.fd_error_estimate.is_none());
    assert!(qf.fd_fallback);
    let est = qf.fd_error_estimate.unwrap();
    let diff = Float::with_val(prec, &qa.value - &qf.value).to_f64().abs();
    assert!(diff <= 1e-18, "fallback drift {diff}");
    assert!(est > 0.0 && diff <= est * 10.0 + 1e-25, "estimate {est} vs drift {diff}");
}

#[test]
fn non_finite_values_name_the_node() {
    let prec = 128;
    let rule = build_rule(4, 8, prec).unwrap();
    let bad = Integrand {
        id: "pole".into(),
        f: Arc::new(|x: &BigReal| Float::with_val(x.prec(), 1) / x),
        f1: None,
        f3: None,
        fm_l2: None,
        exact_integral: None,
    };
    let err = apply(&rule, &bad).unwrap_err();
    match err {
        Error::NonFinite { location } => assert!(location.contains("β=0"), "{location}"),
        other => panic!("expected a non-finite report, got {other}"),
    }
}

/// At orders four and five the optimal rule IS the classical corrected
/// trapezoidal rule; the comparator is hard-coded independently, so
/// agreement to thirty digits is a real cross-check.
#[test]
fn classical_equivalence_at_low_orders() {
    let prec = 256;
    for m in [4u32, 5] {
        for n in [8u32, 16, 32] {
            let rule = build_rule(m, n, prec).unwrap();
            for g in corpus(m, prec) {
                let quad = apply(&rule, &g).unwrap();
                let em = euler_maclaurin(&g, n, prec).unwrap();
                let diff = Float::with_val(prec, &quad.value - &em).abs();
                let scale = Float::with_val(prec, em.abs_ref());
                assert!(
                    diff <= scale * Float::with_val(prec, 1e-30),
                    "m={m}, N={n}, {}: {diff}",
                    g.id
                );
            }
        }
    }
}

#[test]
fn trapezoid_baseline_sanity() {
    let prec = 192;
    let one = monomial(0, 4, prec);
    let t = trapezoid(&one, 7, prec).unwrap();
    let diff = Float::with_val(prec, &t - 1u32).abs();
    assert!(diff < pow2(prec, -180));

    // second-order error for a curved integrand
    let g = by_id("exp", 4, prec).unwrap();
    let exact = g.exact_integral.as_ref().unwrap();
    let e16 = Float::with_val(prec, &trapezoid(&g, 16, prec).unwrap() - exact).to_f64();
    let e32 = Float::with_val(prec, &trapezoid(&g, 32, prec).unwrap() - exact).to_f64();
    let order = (e16 / e32).log2();
    assert!((order - 2.0).abs() < 0.01, "order {order}");
}

#[test]
fn convergence_study_columns_and_orders() {
    let prec = 256;
    for m in [4u32, 6] {
        let g = by_id("exp", m, prec).unwrap();
        let report = converge(m, &g, &[128, 8, 64, 16, 32], prec).unwrap();
        assert_eq!(report.m, m);
        assert_eq!(report.integrand, "exp");
        let ns: Vec<u32> = report.rows.iter().map(|r| r.n).collect();
        assert_eq!(ns, vec![8, 16, 32, 64, 128], "rows sorted by N");
        for row in &report.rows {
            assert!(row.failure.is_none());
            assert!(!row.fd_fallback);
            let err = row.abs_error.unwrap();
            let bound = row.norm_bound.unwrap();
            assert!(err <= bound, "m={m}, N={}: {err} > {bound}", row.n);
            assert!(row.trapezoid_error.unwrap() > bound, "the bound should beat the baseline");
        }
        assert!(report.rows[0].observed_order.is_none());
        // guaranteed-bound order settles to m once N ≥ 32
        for w in report.rows.windows(2) {
            if w[0].n < 32 {
                continue;
            }
            let order = (w[0].norm_bound.unwrap() / w[1].norm_bound.unwrap()).log2();
            assert!(
                (order - m as f64).abs() < 0.05,
                "m={m}, N={}→{}: bound order {order}",
                w[0].n,
                w[1].n
            );
        }
    }
}

/// At order four the study's own error column and the comparator column
/// are the same rule evaluated two ways.
#[test]
fn study_matches_comparator_at_order_four() {
    let g = by_id("exp", 4, 256).unwrap();
    let report = converge(4, &g, &[8, 16, 32, 64], 256).unwrap();
    for row in &report.rows {
        let a = row.abs_error.unwrap();
        let b = row.euler_maclaurin_error.unwrap();
        assert!(
            (a - b).abs() <= 1e-12 * a.abs().max(1e-300),
            "N={}: {a} vs {b}",
            row.n
        );
    }
}

#[test]
fn failed_rows_are_marked_not_fatal() {
    let g = by_id("exp", 6, 192).unwrap();
    let report = converge(6, &g, &[1, 16], 192).unwrap();
    assert_eq!(report.rows.len(), 2);
    let bad = &report.rows[0];
    assert_eq!(bad.n, 1);
    assert!(bad.failure.as_ref().unwrap().contains("m - 3"));
    assert!(bad.abs_error.is_none());
    assert!(report.rows[1].failure.is_none());
}

#[test]
fn study_requires_exact_integral() {
    let g = Integrand {
        id: "opaque".into(),
        f: Arc::new(|x: &BigReal| Float::with_val(x.prec(), x)),
        f1: None,
        f3: None,
        fm_l2: None,
        exact_integral: None,
    };
    assert!(matches!(
        converge(4, &g, &[8], 128),
        Err(Error::MissingData(_))
    ));
}

/// Observed error order for a smooth integrand under the corrected
/// rule: the next uncorrected term is sixth order, and the column
/// should show it.
#[test]
fn observed_order_reflects_superconvergence() {
    let g = by_id("exp", 4, 256).unwrap();
    let report = converge(4, &g, &[32, 64, 128], 256).unwrap();
    for row in &report.rows[1..] {
        let order = row.observed_order.unwrap();
        assert!((order - 6.0).abs() < 0.2, "N={}: {order}", row.n);
    }
}
