//! Online allocation policies.
//!
//! On each arrival the threshold policy maximises the item's pseudo-utility
//! `g(y) - sum_m int_{w_m}^{w_m + y_m} phi_m` over its feasible box. In the
//! aggregate mode this is a water-filling problem in a single price; in the
//! separable mode each knapsack is solved for a given demand multiplier and
//! the multiplier is found by bisection.
//!
//! Ties (flat price segments meeting a linear value) are broken by taking
//! as much as possible, filling knapsacks in index order.

use serde::Serialize;

use crate::error::{OkraError, Result};
use crate::model::{Allocation, Instance, Item, ItemValue, Mode, Setup, ValueFunction, TOL};
use crate::thresholds::{KnapsackCurve, PriceCurve, ThresholdFamily};

const BISECT_ITERS: usize = 200;

#[derive(Debug, Clone)]
pub enum Policy {
    /// Threshold-based fractional allocation.
    Ota(ThresholdFamily),
    /// Threshold-based, but every item goes whole into one knapsack or is
    /// rejected.
    OtaIntegral(ThresholdFamily),
    /// Fixed price: accept when the initial marginal value reaches `price`,
    /// then fill greedily in knapsack order.
    Fta { price: f64 },
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Ota(_) => "ota",
            Policy::OtaIntegral(_) => "ota_integral",
            Policy::Fta { .. } => "fta",
        }
    }
}

/// Geometric mean of the value bounds, the usual fixed-price benchmark.
pub fn fta_price(setup: &Setup) -> f64 {
    (setup.l * setup.u).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub allocation: Allocation,
    pub utilization: Vec<f64>,
    pub online_value: f64,
    pub pseudo_utilities: Vec<f64>,
    /// Utilisation after each arrival.
    #[serde(skip)]
    pub trace: Vec<Vec<f64>>,
}

fn upper_bounds<P: PriceCurve>(curves: &[P], w: &[f64], rate: &[f64]) -> Vec<f64> {
    curves
        .iter()
        .zip(w)
        .zip(rate)
        .map(|((c, &w), &r)| r.min(c.capacity() - w).max(0.0))
        .collect()
}

fn spread(base: &[f64], top: &[f64], amount: f64) -> Vec<f64> {
    let mut y = base.to_vec();
    let mut rem = amount - base.iter().sum::<f64>();
    for (yi, &t) in y.iter_mut().zip(top) {
        if rem <= 0.0 {
            break;
        }
        let add = (t - *yi).max(0.0).min(rem);
        *yi += add;
        rem -= add;
    }
    y
}

/// Pseudo-utility maximiser for a value of the total amount.
///
/// `ub[m]` already includes the rate limit and the remaining capacity.
pub fn water_fill_aggregate<P: PriceCurve>(
    curves: &[P],
    w: &[f64],
    ub: &[f64],
    g: &ValueFunction,
    size: f64,
) -> Vec<f64> {
    let m = curves.len();
    if size <= 0.0 || ub.iter().all(|&u| u <= 0.0) {
        return vec![0.0; m];
    }
    let supply_hi = |p: f64| -> f64 {
        curves.iter().zip(w).zip(ub).map(|((c, &w), &u)| (c.level_hi(p) - w).clamp(0.0, u)).sum()
    };
    let covers = |p: f64| supply_hi(p) >= g.demand_lo(p, size);
    let (mut lo, mut hi) = (0.0, 0.0);
    if !covers(0.0) {
        hi = g.deriv(0.0).max(0.0);
        for _ in 0..BISECT_ITERS {
            if hi - lo <= 1e-15 * hi {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if covers(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let x = supply_hi(hi).min(g.demand_hi(lo, size));
    let base: Vec<f64> =
        curves.iter().zip(w).zip(ub).map(|((c, &w), &u)| (c.level_lo(lo) - w).clamp(0.0, u)).collect();
    let top: Vec<f64> =
        curves.iter().zip(w).zip(ub).map(|((c, &w), &u)| (c.level_hi(hi) - w).clamp(0.0, u)).collect();
    spread(&base, &top, x)
}

/// `sup`/`inf` of `{ y in [0, ub] : g'(y) - price(w + y) >= mu }`.
fn knapsack_response<P: PriceCurve>(c: &P, w: f64, ub: f64, g: &ValueFunction, mu: f64, upper: bool) -> f64 {
    if ub <= 0.0 {
        return 0.0;
    }
    if let ValueFunction::Linear { slope } = *g {
        let level = if upper { c.level_hi(slope - mu) } else { c.level_lo(slope - mu) };
        return (level - w).clamp(0.0, ub);
    }
    let r = |y: f64| g.deriv(y) - c.price(w + y);
    if upper {
        if r(0.0) < mu {
            return 0.0;
        }
        if r(ub) >= mu {
            return ub;
        }
        let (mut a, mut b) = (0.0, ub);
        for _ in 0..BISECT_ITERS {
            if b - a <= 1e-15 * ub {
                break;
            }
            let mid = 0.5 * (a + b);
            if r(mid) >= mu {
                a = mid;
            } else {
                b = mid;
            }
        }
        a
    } else {
        if r(0.0) <= mu {
            return 0.0;
        }
        if r(ub) > mu {
            return ub;
        }
        let (mut a, mut b) = (0.0, ub);
        for _ in 0..BISECT_ITERS {
            if b - a <= 1e-15 * ub {
                break;
            }
            let mid = 0.5 * (a + b);
            if r(mid) > mu {
                a = mid;
            } else {
                b = mid;
            }
        }
        b
    }
}

/// Pseudo-utility maximiser for per-knapsack values under the item's total
/// size constraint.
pub fn solve_separable<P: PriceCurve>(
    curves: &[P],
    w: &[f64],
    ub: &[f64],
    gs: &[ValueFunction],
    size: f64,
) -> Vec<f64> {
    let m = curves.len();
    if size <= 0.0 || ub.iter().all(|&u| u <= 0.0) {
        return vec![0.0; m];
    }
    let resp = |mu: f64, upper: bool| -> Vec<f64> {
        (0..m).map(|k| knapsack_response(&curves[k], w[k], ub[k], &gs[k], mu, upper)).collect()
    };
    let at_zero = resp(0.0, true);
    if at_zero.iter().sum::<f64>() <= size {
        return at_zero;
    }
    let top_r = (0..m)
        .filter(|&k| ub[k] > 0.0)
        .map(|k| gs[k].deriv(0.0) - curves[k].price(w[k]))
        .fold(0.0f64, f64::max);
    let (mut lo, mut hi) = (0.0, top_r * (1.0 + 1e-12) + 1e-300);
    for _ in 0..BISECT_ITERS {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if resp(mid, true).iter().sum::<f64>() <= size {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    spread(&resp(hi, true), &resp(lo, true), size)
}

/// Best response of `item` against price curves at utilisation `w`.
pub fn best_response<P: PriceCurve>(curves: &[P], w: &[f64], item: &Item) -> Vec<f64> {
    let ub = upper_bounds(curves, w, &item.rate_limits);
    match &item.value {
        ItemValue::Aggregate(g) => water_fill_aggregate(curves, w, &ub, g, item.size),
        ItemValue::Separable(gs) => solve_separable(curves, w, &ub, gs, item.size),
    }
}

fn fta_step(item: &Item, caps: &[f64], w: &[f64], price: f64) -> Vec<f64> {
    let m = caps.len();
    let mut y = vec![0.0; m];
    let mut rem = item.size;
    for k in 0..m {
        if rem <= 0.0 {
            break;
        }
        if item.value_fn(k).deriv(0.0) < price {
            if matches!(item.value, ItemValue::Aggregate(_)) {
                return y;
            }
            continue;
        }
        let a = item.rate_limits[k].min(caps[k] - w[k]).max(0.0).min(rem);
        y[k] = a;
        rem -= a;
    }
    y
}

fn integral_step(fam: &ThresholdFamily, item: &Item, w: &[f64]) -> Vec<f64> {
    let m = fam.m();
    let mut best: Option<(f64, usize, f64)> = None;
    for k in 0..m {
        let y = item.size.min(item.rate_limits[k]);
        if y <= 0.0 || w[k] + y > fam.capacities[k] + TOL {
            continue;
        }
        let cost = fam.phi(k, (w[k] + y).min(fam.capacities[k])) * y;
        let score = item.value_fn(k).value(y) - cost;
        if score >= 0.0 && best.map_or(true, |(s, _, _)| score > s) {
            best = Some((score, k, y));
        }
    }
    let mut out = vec![0.0; m];
    if let Some((_, k, y)) = best {
        out[k] = y.min(fam.capacities[k] - w[k]).max(0.0);
    }
    out
}

/// Process the items of `instance` in order under `policy`.
pub fn run(instance: &Instance, policy: &Policy) -> Result<RunResult> {
    let v = instance.validate();
    if !v.is_empty() {
        return Err(OkraError::Validation(v));
    }
    let caps = &instance.setup.capacities;
    let m = caps.len();
    if let Policy::Ota(f) | Policy::OtaIntegral(f) = policy {
        if f.m() != m {
            return Err(OkraError::Precondition(format!(
                "threshold family has {} knapsacks, instance has {m}",
                f.m()
            )));
        }
    }
    let mut w = vec![0.0; m];
    let mut allocation = Vec::with_capacity(instance.n());
    let mut pseudo = Vec::with_capacity(instance.n());
    let mut trace = Vec::with_capacity(instance.n());
    let mut value = 0.0;
    for item in &instance.items {
        let y = match policy {
            Policy::Ota(f) => {
                let curves: Vec<KnapsackCurve> = (0..m).map(|k| f.curve(k)).collect();
                best_response(&curves, &w, item)
            }
            Policy::OtaIntegral(f) => integral_step(f, item, &w),
            Policy::Fta { price } => fta_step(item, caps, &w, *price),
        };
        let gain = item.value_of(&y);
        let cost: f64 = match policy {
            Policy::Ota(f) | Policy::OtaIntegral(f) => (0..m).map(|k| f.integral(k, w[k], w[k] + y[k])).sum(),
            Policy::Fta { price } => price * y.iter().sum::<f64>(),
        };
        pseudo.push(gain - cost);
        value += gain;
        for k in 0..m {
            w[k] = (w[k] + y[k]).min(caps[k]);
        }
        trace.push(w.clone());
        allocation.push(y);
    }
    Ok(RunResult { allocation, utilization: w, online_value: value, pseudo_utilities: pseudo, trace })
}

/// Integral variant of [`run`] with the same family.
pub fn run_integral(instance: &Instance, fam: &ThresholdFamily) -> Result<RunResult> {
    run(instance, &Policy::OtaIntegral(fam.clone()))
}

/// Family matching the instance's mode (aggregate or separable values).
pub fn default_family(instance: &Instance) -> Result<ThresholdFamily> {
    use crate::thresholds::Variant;
    let v = match instance.mode {
        Mode::Aggregate => Variant::FomkpAggregate,
        Mode::Separable => Variant::FomkpSeparable,
    };
    ThresholdFamily::build(v, &instance.setup)
}
