use okra_core::numeric::{lambert_residual, lambert_w};
use okra_core::thresholds::*;
use proptest::prelude::*;

// Plain bisection, kept separate from the library's safeguarded solver.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn oracle_separable(theta: f64) -> f64 {
    let t = theta.ln();
    bisect(|a| (a - 1.0) - 1.0 / (a - 1.0) - ((a * theta - 1.0) / (a - 1.0)).ln(), 1.0 + t.max(1e-9), 3.0 + t)
}

#[test]
fn got_closed_form() {
    assert_eq!(ratio_got(1.0).unwrap(), 1.0);
    assert!((ratio_got(36.0).unwrap() - 4.583_518_938_456_11).abs() < 1e-12);
}

#[test]
fn aggregate_frozen_at_36() {
    // x - 1/x = ln 36 solved with the quadratic formula
    let t = 36f64.ln();
    let oracle = 1.0 + 0.5 * (t + (t * t + 4.0).sqrt());
    assert!((oracle - 4.843_685_880_084_059).abs() < 1e-13);
    assert!((ratio_fomkp_aggregate(36.0).unwrap() - 4.843_685_880_084_059).abs() < 1e-12);
}

#[test]
fn separable_frozen_at_36() {
    let oracle = oracle_separable(36.0);
    assert!((oracle - 5.046_021_297_501_504).abs() < 1e-11);
    assert!((ratio_fomkp_separable(36.0).unwrap() - 5.046_021_297_501_504).abs() < 1e-11);
}

#[test]
fn variant1_matches_bisection() {
    for &theta in &[1.5f64, 3.0, 36.0, 500.0] {
        let oracle = bisect(|a| a - ((theta - 1.0) / (a - 1.0)).ln(), 1.0 + 1e-12, 1.0 + theta.ln() + 1.0);
        assert!((ratio_variant1(theta).unwrap() - oracle).abs() < 1e-10, "theta {theta}");
    }
}

#[test]
fn variant2_matches_direct_root() {
    // W recomputed by bisection on w e^w = k e^(k-1), k = ln(c theta)
    for &(c, theta) in &[(1.0, 36.0), (2.0, 10.0), (5.0, 3.0), (100.0, 100.0)] {
        let r = ratio_variant2(c, theta).unwrap();
        let k = (c * theta).ln();
        let x = k * (k - 1.0).exp();
        let w = bisect(|w| w * w.exp() - x, 0.0, k.max(1.0) + 1.0);
        assert!((r.w - w).abs() < 1e-10 * w.max(1.0));
        assert!((r.alpha - k / (k - w)).abs() < 1e-9 * r.alpha);
        assert!(r.alpha >= std::f64::consts::E / (std::f64::consts::E - 1.0) - 1e-12);
    }
}

#[test]
fn lambert_w_residuals() {
    for &x in &[-0.3, 1e-8, 0.5, 1.0, 10.0, 1e6, 1e12] {
        let w = lambert_w(x).unwrap();
        assert!(lambert_residual(w, x) <= 1e-12, "x = {x}");
    }
}

proptest! {
    #[test]
    fn ratios_are_ordered(theta in 1.0001f64..1000.0) {
        let t = theta.ln();
        let got = ratio_got(theta).unwrap();
        let agg = ratio_fomkp_aggregate(theta).unwrap();
        let sep = ratio_fomkp_separable(theta).unwrap();
        prop_assert!(got <= agg + 1e-12);
        prop_assert!(agg <= sep + 1e-12);
        prop_assert!(sep <= 2.0 + t + 1e-12);
        prop_assert!(aggregate_equation(agg, theta).abs() <= 1e-12);
        prop_assert!(separable_equation(sep, theta).abs() <= 1e-12);
        let v1 = ratio_variant1(theta).unwrap();
        prop_assert!(v1 < got);
    }

    #[test]
    fn separable_agrees_with_oracle(theta in 1.01f64..1000.0) {
        let a = ratio_fomkp_separable(theta).unwrap();
        prop_assert!((a - oracle_separable(theta)).abs() < 1e-9 * a);
    }
}
