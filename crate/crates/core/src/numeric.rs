//! Scalar numerics: bracketed root finding, principal-branch Lambert W and
//! composite Simpson quadrature.

use crate::error::{OkraError, Result};

/// Outcome of a bracketed solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// |f(x)| at the returned point.
    pub residual: f64,
    pub iterations: usize,
}

/// Bisection with Newton polishing on `[lo, hi]`.
///
/// `f` must change sign over the bracket (a zero at either endpoint is
/// accepted). Newton steps are taken whenever they land strictly inside the
/// current bracket, otherwise the step falls back to bisection, so the method
/// never leaves the bracket.
pub fn bisect_newton<F, D>(f: F, df: D, lo: f64, hi: f64, tol: f64) -> Result<Root>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let (fa, fb) = (f(a), f(b));
    if !fa.is_finite() && !fb.is_finite() {
        return Err(OkraError::NoBracket { lo: a, hi: b });
    }
    if fa == 0.0 {
        return Ok(Root { x: a, residual: 0.0, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, residual: 0.0, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return Err(OkraError::NoBracket { lo: a, hi: b });
    }
    let neg_at_a = fa < 0.0;
    let mut x = 0.5 * (a + b);
    let mut best = Root { x, residual: f64::INFINITY, iterations: 0 };
    for it in 1..=400 {
        let fx = f(x);
        if fx.abs() < best.residual {
            best = Root { x, residual: fx.abs(), iterations: it };
        }
        if fx == 0.0 || fx.abs() <= tol && (b - a) <= 1e-15 * x.abs().max(1.0) {
            break;
        }
        if (fx < 0.0) == neg_at_a {
            a = x;
        } else {
            b = x;
        }
        if b - a <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            // bracket exhausted; the best evaluated point is our answer
            let m = 0.5 * (a + b);
            let fm = f(m);
            if fm.abs() < best.residual {
                best = Root { x: m, residual: fm.abs(), iterations: it };
            }
            break;
        }
        let d = df(x);
        let newton = x - fx / d;
        x = if d.is_finite() && d != 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
    }
    if best.residual.is_finite() && best.residual <= tol.max(1e-300) * 1e3 {
        Ok(best)
    } else {
        Err(OkraError::NonConvergence(format!(
            "bisection stalled at x = {} with |f| = {:e}",
            best.x, best.residual
        )))
    }
}

/// Principal branch W0 of the Lambert W function via Halley iteration.
///
/// Defined for `x >= -1/e`.
pub fn lambert_w(x: f64) -> Result<f64> {
    let branch = -(-1.0f64).exp();
    if x.is_nan() || x < branch {
        return Err(OkraError::Domain(format!("lambert_w argument {x} below -1/e")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == branch {
        return Ok(-1.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let e = std::f64::consts::E;
    let mut w = if x > e {
        let l = x.ln();
        l - l.ln()
    } else if x >= 0.0 {
        x
    } else {
        // near the branch point
        let p = (2.0 * (e * x + 1.0)).sqrt();
        -1.0 + p - p * p / 3.0
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        let next = w - step;
        if !next.is_finite() {
            break;
        }
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

/// Relative residual |w e^w - x| / max(1, |x|).
pub fn lambert_residual(w: f64, x: f64) -> f64 {
    (w * w.exp() - x).abs() / x.abs().max(1.0)
}

/// Composite Simpson rule with `n` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if b == a {
        return 0.0;
    }
    let n = (n.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    s * h / 3.0
}
