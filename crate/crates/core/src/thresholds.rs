//! Competitive ratios and the threshold (marginal pseudo-cost) functions
//! that attain them.
//!
//! Every family is piecewise exponential in the knapsack utilisation `w`.
//! The flat-start families (`Got`, `FomkpAggregate`, `FomkpSeparable`) price
//! at `L` on `[0, beta)`; `GotVariant1` has no flat segment and
//! `GotVariant2` starts at zero. All of them reach `U` at full capacity and
//! are `+inf` beyond it.

use serde::{Deserialize, Serialize};

use crate::error::{OkraError, Result};
use crate::model::Setup;
use crate::numeric::{bisect_newton, lambert_residual, lambert_w, Root};

const ROOT_TOL: f64 = 1e-14;

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_nan() || theta < 1.0 || theta.is_infinite() {
        return Err(OkraError::Domain(format!("theta must be finite and >= 1, got {theta}")));
    }
    Ok(())
}

/// Optimal ratio for a single knapsack without rate limits.
pub fn ratio_got(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(1.0 + theta.ln())
}

/// `(a - 1) - 1/(a - 1) - ln theta`.
pub fn aggregate_equation(alpha: f64, theta: f64) -> f64 {
    let x = alpha - 1.0;
    x - 1.0 / x - theta.ln()
}

/// `(a - 1) - 1/(a - 1) - ln((a theta - 1)/(a - 1))`.
pub fn separable_equation(alpha: f64, theta: f64) -> f64 {
    let x = alpha - 1.0;
    x - 1.0 / x - ((alpha * theta - 1.0) / x).ln()
}

/// `a - ln((theta - 1)/(a - 1))`.
pub fn variant1_equation(alpha: f64, theta: f64) -> f64 {
    alpha - (theta - 1.0).ln() + (alpha - 1.0).ln()
}

fn fomkp_bracket(theta: f64) -> (f64, f64) {
    let lt = theta.ln();
    (1.0 + lt.max(1e-6), 2.0 + lt)
}

pub fn solve_fomkp_aggregate(theta: f64) -> Result<Root> {
    check_theta(theta)?;
    let (lo, hi) = fomkp_bracket(theta);
    bisect_newton(
        |a| aggregate_equation(a, theta),
        |a| 1.0 + 1.0 / ((a - 1.0) * (a - 1.0)),
        lo,
        hi,
        ROOT_TOL,
    )
}

pub fn solve_fomkp_separable(theta: f64) -> Result<Root> {
    check_theta(theta)?;
    let (lo, hi) = fomkp_bracket(theta);
    bisect_newton(
        |a| separable_equation(a, theta),
        |a| {
            let x = a - 1.0;
            1.0 + 1.0 / (x * x) - theta / (a * theta - 1.0) + 1.0 / x
        },
        lo,
        hi,
        ROOT_TOL,
    )
}

pub fn solve_variant1(theta: f64) -> Result<Root> {
    check_theta(theta)?;
    if theta <= 1.0 {
        return Err(OkraError::Domain("variant 1 needs theta > 1".into()));
    }
    let delta = ((theta - 1.0) / (2.0 * std::f64::consts::E.powi(2))).min(0.5);
    bisect_newton(
        |a| variant1_equation(a, theta),
        |a| 1.0 + 1.0 / (a - 1.0),
        1.0 + delta,
        1.0 + theta.ln(),
        ROOT_TOL,
    )
}

/// Ratio for multiple knapsacks, value of the aggregate allocation.
pub fn ratio_fomkp_aggregate(theta: f64) -> Result<f64> {
    solve_fomkp_aggregate(theta).map(|r| r.x)
}

/// Ratio for multiple knapsacks, per-knapsack values.
pub fn ratio_fomkp_separable(theta: f64) -> Result<f64> {
    solve_fomkp_separable(theta).map(|r| r.x)
}

/// Ratio when unused capacity keeps a residual value of `L` per unit.
pub fn ratio_variant1(theta: f64) -> Result<f64> {
    solve_variant1(theta).map(|r| r.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Variant2Ratio {
    pub alpha: f64,
    /// Start of the exponential segment as a fraction of capacity.
    pub beta_fraction: f64,
    /// Lambert W value used, and its relative residual.
    pub w: f64,
    pub w_residual: f64,
}

/// Ratio when marginal values may drop below `L` as long as the average
/// value stays above `L / c`.
pub fn ratio_variant2(c: f64, theta: f64) -> Result<Variant2Ratio> {
    if !(c >= 1.0) || !c.is_finite() {
        return Err(OkraError::Invalid(format!("c must be >= 1, got {c}")));
    }
    check_theta(theta)?;
    let k = (c * theta).ln();
    if !(k > 0.0) {
        return Err(OkraError::Domain("c * theta must exceed 1 (W argument non-positive)".into()));
    }
    let x = k * (k - 1.0).exp();
    let w = lambert_w(x)?;
    let alpha = k / (k - w);
    let b = w - k + 1.0;
    if !(0.0..=1.0).contains(&b) {
        return Err(OkraError::Domain(format!("segment boundary fraction {b} outside [0, 1]")));
    }
    Ok(Variant2Ratio { alpha, beta_fraction: b, w, w_residual: lambert_residual(w, x) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Variant {
    Got,
    GotVariant1,
    GotVariant2 { c: f64 },
    FomkpAggregate,
    FomkpSeparable,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Got => "got",
            Variant::GotVariant1 => "got_variant1",
            Variant::GotVariant2 { .. } => "got_variant2",
            Variant::FomkpAggregate => "fomkp_aggregate",
            Variant::FomkpSeparable => "fomkp_separable",
        }
    }

    pub fn parse(name: &str, c: f64) -> Result<Variant> {
        Ok(match name.replace('-', "_").as_str() {
            "got" => Variant::Got,
            "got_variant1" | "variant1" => Variant::GotVariant1,
            "got_variant2" | "variant2" => Variant::GotVariant2 { c },
            "fomkp_aggregate" | "aggregate" => Variant::FomkpAggregate,
            "fomkp_separable" | "separable" => Variant::FomkpSeparable,
            _ => return Err(OkraError::Invalid(format!("unknown family {name:?}"))),
        })
    }

    pub fn ratio(&self, theta: f64) -> Result<f64> {
        match *self {
            Variant::Got => ratio_got(theta),
            Variant::GotVariant1 => ratio_variant1(theta),
            Variant::GotVariant2 { c } => ratio_variant2(c, theta).map(|r| r.alpha),
            Variant::FomkpAggregate => ratio_fomkp_aggregate(theta),
            Variant::FomkpSeparable => ratio_fomkp_separable(theta),
        }
    }

    fn has_flat_start(&self) -> bool {
        matches!(self, Variant::Got | Variant::FomkpAggregate | Variant::FomkpSeparable)
    }
}

/// Per-knapsack threshold functions of one family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdFamily {
    pub variant: Variant,
    pub l: f64,
    pub u: f64,
    pub capacities: Vec<f64>,
    /// Ratio claimed for this family; the sufficient-condition check uses it.
    pub alpha: f64,
    /// End of the flat (or first) segment per knapsack.
    pub betas: Vec<f64>,
    #[serde(skip)]
    shape_alpha: f64,
    #[serde(skip)]
    sep_coeff: f64,
    #[serde(skip)]
    v2_fraction: f64,
}

impl ThresholdFamily {
    pub fn build(variant: Variant, setup: &Setup) -> Result<Self> {
        if setup.capacities.is_empty() || setup.capacities.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(OkraError::Invalid("capacities must be positive and finite".into()));
        }
        if !(setup.l > 0.0) || !(setup.u >= setup.l) || !setup.u.is_finite() {
            return Err(OkraError::Invalid("need 0 < L <= U < inf".into()));
        }
        let theta = setup.theta();
        let (l, u) = (setup.l, setup.u);
        let mut sep_coeff = 0.0;
        let mut v2_fraction = 0.0;
        let alpha = match variant {
            Variant::GotVariant2 { c } => {
                let r = ratio_variant2(c, theta)?;
                v2_fraction = r.beta_fraction;
                r.alpha
            }
            v => v.ratio(theta)?,
        };
        let frac = match variant {
            Variant::Got => 1.0 / alpha,
            Variant::FomkpAggregate | Variant::FomkpSeparable => 1.0 / (alpha - 1.0),
            Variant::GotVariant1 => 0.0,
            Variant::GotVariant2 { .. } => v2_fraction,
        };
        if let Variant::FomkpSeparable = variant {
            let denom = alpha.exp() - (alpha / (alpha - 1.0)).exp();
            sep_coeff = if denom > 0.0 { (u - l) / denom } else { 0.0 };
        }
        Ok(ThresholdFamily {
            variant,
            l,
            u,
            betas: setup.capacities.iter().map(|c| (c * frac).min(*c)).collect(),
            capacities: setup.capacities.clone(),
            alpha,
            shape_alpha: alpha,
            sep_coeff,
            v2_fraction,
        })
    }

    /// Same curves, different claimed ratio (for negative controls).
    pub fn with_claimed_alpha(&self, alpha: f64) -> Self {
        ThresholdFamily { alpha, ..self.clone() }
    }

    pub fn m(&self) -> usize {
        self.capacities.len()
    }

    pub fn curve(&self, m: usize) -> KnapsackCurve<'_> {
        KnapsackCurve { fam: self, m }
    }

    fn c_of(&self) -> f64 {
        match self.variant {
            Variant::GotVariant2 { c } => c,
            _ => 1.0,
        }
    }

    /// Price on the rising part, without the flat-start clamp.
    fn rising(&self, m: usize, w: f64) -> f64 {
        let (cap, l, u, a, beta) = (self.capacities[m], self.l, self.u, self.shape_alpha, self.betas[m]);
        match self.variant {
            Variant::Got => l * (a * w / cap - 1.0).exp(),
            Variant::FomkpAggregate => l * (a * w / cap - a / (a - 1.0)).exp(),
            Variant::FomkpSeparable => self.sep_coeff * (a * w / cap).exp() + l / a,
            Variant::GotVariant1 => l + (u - l) * (a * w / cap - a).exp(),
            Variant::GotVariant2 { c } => {
                let k = (c * u / l).ln();
                if w < beta {
                    (l / c) * (w / cap).exp_m1() / self.v2_fraction.exp_m1()
                } else {
                    (l / c) * ((w - beta) * k / (cap - beta)).exp()
                }
            }
        }
    }

    pub fn phi(&self, m: usize, w: f64) -> f64 {
        let cap = self.capacities[m];
        if w > cap {
            return f64::INFINITY;
        }
        let w = w.max(0.0);
        if self.variant.has_flat_start() && w < self.betas[m] {
            return self.l;
        }
        self.rising(m, w)
    }

    /// `integral_0^w phi`, closed form.
    pub fn antiderivative(&self, m: usize, w: f64) -> f64 {
        let (cap, l, u, a, beta) = (self.capacities[m], self.l, self.u, self.shape_alpha, self.betas[m]);
        let w = w.clamp(0.0, cap);
        match self.variant {
            Variant::Got | Variant::FomkpAggregate | Variant::FomkpSeparable if w <= beta => l * w,
            Variant::Got => l * beta + (l * cap / a) * (a * w / cap - 1.0).exp() - l * cap / a * (a * beta / cap - 1.0).exp(),
            Variant::FomkpAggregate => {
                let s = a / (a - 1.0);
                l * beta + (l * cap / a) * ((a * w / cap - s).exp() - (a * beta / cap - s).exp())
            }
            Variant::FomkpSeparable => {
                l * beta
                    + self.sep_coeff * (cap / a) * ((a * w / cap).exp() - (a * beta / cap).exp())
                    + (l / a) * (w - beta)
            }
            Variant::GotVariant1 => l * w + (u - l) * (cap / a) * ((a * w / cap - a).exp() - (-a).exp()),
            Variant::GotVariant2 { c } => {
                let k = (c * u / l).ln();
                let first = |x: f64| (l / c) / self.v2_fraction.exp_m1() * (cap * (x / cap).exp_m1() - x);
                if w < beta {
                    first(w)
                } else {
                    first(beta) + (l / c) * (cap - beta) / k * ((w - beta) * k / (cap - beta)).exp_m1()
                }
            }
        }
    }

    /// `integral_a^b phi`.
    pub fn integral(&self, m: usize, a: f64, b: f64) -> f64 {
        self.antiderivative(m, b) - self.antiderivative(m, a)
    }

    /// Inverse of the rising part; caller guarantees `p` lies on it.
    fn rising_inverse(&self, m: usize, p: f64) -> f64 {
        let (cap, l, u, a, beta) = (self.capacities[m], self.l, self.u, self.shape_alpha, self.betas[m]);
        match self.variant {
            Variant::Got => (cap / a) * (1.0 + (p / l).ln()),
            Variant::FomkpAggregate => (cap / a) * ((p / l).ln() + a / (a - 1.0)),
            Variant::FomkpSeparable => (cap / a) * ((p - l / a) / self.sep_coeff).ln(),
            Variant::GotVariant1 => cap + (cap / a) * ((p - l) / (u - l)).ln(),
            Variant::GotVariant2 { c } => {
                if p <= l / c {
                    cap * (p * c / l * self.v2_fraction.exp_m1()).ln_1p()
                } else {
                    let k = (c * u / l).ln();
                    beta + (cap - beta) * (p * c / l).ln() / k
                }
            }
        }
    }

    fn start_price(&self, m: usize) -> f64 {
        if self.variant.has_flat_start() {
            self.l
        } else {
            self.phi(m, 0.0)
        }
    }

    /// `inf { w in [0, C] : phi(w) >= p }` (0 below the start price, `C`
    /// above the top price).
    pub fn level_lo(&self, m: usize, p: f64) -> f64 {
        let cap = self.capacities[m];
        if p <= self.start_price(m) {
            return 0.0;
        }
        if p > self.phi(m, cap) {
            return cap;
        }
        self.rising_inverse(m, p).max(self.flat_end(m)).clamp(0.0, cap)
    }

    /// `sup { w in [0, C] : phi(w) <= p }` (0 below the start price).
    pub fn level_hi(&self, m: usize, p: f64) -> f64 {
        let cap = self.capacities[m];
        if p < self.start_price(m) {
            return 0.0;
        }
        if p >= self.phi(m, cap) {
            return cap;
        }
        self.rising_inverse(m, p).max(self.flat_end(m)).clamp(0.0, cap)
    }

    fn flat_end(&self, m: usize) -> f64 {
        if self.variant.has_flat_start() {
            self.betas[m]
        } else {
            0.0
        }
    }

    /// Smallest utilisation at which the price reaches `p`.
    pub fn phi_inverse(&self, m: usize, p: f64) -> Result<f64> {
        let cap = self.capacities[m];
        let (lo, hi) = (self.phi(m, 0.0), self.phi(m, cap));
        let slack = 1e-12 * hi.abs().max(1.0);
        if !(p >= lo - slack && p <= hi + slack) {
            return Err(OkraError::Range(format!("price {p} outside [{lo}, {hi}]")));
        }
        Ok(self.level_lo(m, p))
    }
}

/// Marginal pseudo-cost of filling one knapsack.
pub trait PriceCurve {
    fn capacity(&self) -> f64;
    fn price(&self, w: f64) -> f64;
    /// `integral_a^b price`.
    fn cost(&self, a: f64, b: f64) -> f64;
    /// `inf { w : price(w) >= p }`, clamped to `[0, capacity]`.
    fn level_lo(&self, p: f64) -> f64;
    /// `sup { w : price(w) <= p }`, clamped to `[0, capacity]`.
    fn level_hi(&self, p: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct KnapsackCurve<'a> {
    fam: &'a ThresholdFamily,
    m: usize,
}

impl PriceCurve for KnapsackCurve<'_> {
    fn capacity(&self) -> f64 {
        self.fam.capacities[self.m]
    }
    fn price(&self, w: f64) -> f64 {
        self.fam.phi(self.m, w)
    }
    fn cost(&self, a: f64, b: f64) -> f64 {
        self.fam.integral(self.m, a, b)
    }
    fn level_lo(&self, p: f64) -> f64 {
        self.fam.level_lo(self.m, p)
    }
    fn level_hi(&self, p: f64) -> f64 {
        self.fam.level_hi(self.m, p)
    }
}

/// Constant price with unbounded capacity (a Lagrange multiplier).
#[derive(Debug, Clone, Copy)]
pub struct FlatPrice(pub f64);

impl PriceCurve for FlatPrice {
    fn capacity(&self) -> f64 {
        f64::INFINITY
    }
    fn price(&self, _w: f64) -> f64 {
        self.0
    }
    fn cost(&self, a: f64, b: f64) -> f64 {
        self.0 * (b - a)
    }
    fn level_lo(&self, p: f64) -> f64 {
        if p <= self.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn level_hi(&self, p: f64) -> f64 {
        if p >= self.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// Result of checking a family against its sufficient condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeReport {
    /// Largest `lhs - rhs` on the checked range (positive = violated).
    pub max_violation: f64,
    /// Largest `|lhs - rhs|`; the optimal families are tight everywhere.
    pub max_equality_residual: f64,
    /// `max(0, U - phi(C)) * C`.
    pub boundary_violation: f64,
    /// Worst relative mismatch of `phi(beta) = L` (flat families) and
    /// `phi(C) = U`.
    pub boundary_mismatch: f64,
    pub checked_from: f64,
}

impl OdeReport {
    pub fn max_residual(&self) -> f64 {
        self.max_violation.max(self.boundary_violation)
    }
}

/// Evaluate the integral condition `phi(w) C <= rhs(w)` of the family on a
/// uniform grid, using the family's claimed `alpha`.
///
/// * `Got`: `rhs = alpha int_0^w phi` on `[beta, C]`.
/// * `FomkpAggregate`: `rhs = alpha int_0^w phi - L beta` on `[beta, C]`.
/// * `FomkpSeparable`: `rhs = alpha int_0^w phi - L w` on `[beta, C]`.
/// * `GotVariant1`: `rhs = alpha int_0^w phi + alpha (C - w) L` on `[0, C]`.
/// * `GotVariant2`: below `beta`, `rhs = int_0^w phi + (alpha - 1)(L/c) w`;
///   above it, `rhs = int_0^w phi + (alpha - 1)((L/c) beta + int_beta^w phi)`.
pub fn verify_sufficient_ode(fam: &ThresholdFamily, m: usize, grid_points: usize) -> OdeReport {
    let (cap, l, a, beta) = (fam.capacities[m], fam.l, fam.alpha, fam.betas[m]);
    let lc = l / fam.c_of();
    let start = if fam.variant.has_flat_start() { beta } else { 0.0 };
    let n = grid_points.max(2);
    let mut viol = f64::NEG_INFINITY;
    let mut eq = 0.0f64;
    for i in 0..=n {
        let w = start + (cap - start) * i as f64 / n as f64;
        let big_phi = fam.antiderivative(m, w);
        let rhs = match fam.variant {
            Variant::Got => a * big_phi,
            Variant::FomkpAggregate => a * big_phi - l * beta,
            Variant::FomkpSeparable => a * big_phi - l * w,
            Variant::GotVariant1 => a * big_phi + a * (cap - w) * l,
            Variant::GotVariant2 { .. } => {
                if w < beta {
                    big_phi + (a - 1.0) * lc * w
                } else {
                    big_phi + (a - 1.0) * (lc * beta + big_phi - fam.antiderivative(m, beta))
                }
            }
        };
        let d = fam.phi(m, w) * cap - rhs;
        viol = viol.max(d);
        eq = eq.max(d.abs());
    }
    let top = fam.phi(m, cap);
    let mut mismatch = ((top - fam.u) / fam.u).abs();
    if fam.variant.has_flat_start() {
        mismatch = mismatch.max(((fam.rising(m, beta) - l) / l).abs());
    }
    OdeReport {
        max_violation: viol,
        max_equality_residual: eq,
        boundary_violation: (fam.u - top).max(0.0) * cap,
        boundary_mismatch: mismatch,
        checked_from: start,
    }
}

/// Final utilisation the worst-case analysis prescribes after items of value
/// up to `p` have arrived (single knapsack, no rate limits).
pub fn psi_star(setup: &Setup, p: f64) -> f64 {
    let cap = setup.capacities[0];
    let a = 1.0 + setup.theta().ln();
    ((cap / a) * (1.0 + (p / setup.l).ln())).clamp(0.0, cap)
}

/// Largest shortfall of `L psi(L) + int_L^p u dpsi(u)` below `p C / alpha`
/// over `p in [L, U]`; the Stieltjes integral uses the trapezoid rule on a
/// uniform price grid. Non-positive means the necessary condition holds.
pub fn necessary_condition_gap<F: Fn(f64) -> f64>(
    psi: F,
    setup: &Setup,
    alpha: f64,
    grid_points: usize,
) -> f64 {
    necessary_condition_residuals(psi, setup, alpha, grid_points).0
}

/// `(largest shortfall, largest absolute difference)` between the two sides
/// of the necessary condition; see [`necessary_condition_gap`].
pub fn necessary_condition_residuals<F: Fn(f64) -> f64>(
    psi: F,
    setup: &Setup,
    alpha: f64,
    grid_points: usize,
) -> (f64, f64) {
    let (l, u, cap) = (setup.l, setup.u, setup.capacities[0]);
    let n = grid_points.max(1);
    let mut acc = l * psi(l);
    let mut worst = l * cap / alpha - acc;
    let mut worst_abs = worst.abs();
    let mut prev_p = l;
    let mut prev_psi = psi(l);
    for i in 1..=n {
        let p = l + (u - l) * i as f64 / n as f64;
        let s = psi(p);
        acc += 0.5 * (p + prev_p) * (s - prev_psi);
        let d = p * cap / alpha - acc;
        worst = worst.max(d);
        worst_abs = worst_abs.max(d.abs());
        prev_p = p;
        prev_psi = s;
    }
    (worst, worst_abs)
}
