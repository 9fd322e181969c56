//! Offline optima with duality-gap certificates.
//!
//! * [`offline_got`]: one knapsack. Bisection on the capacity price; items
//!   tied at the clearing price are rationed proportionally.
//! * [`offline_fomkp`]: any number of knapsacks. The primal comes from an
//!   exact network algorithm on a piecewise-linear approximation of the
//!   values (greedy augmentation for aggregate values, longest augmenting
//!   paths for per-knapsack values); capacity prices are read off the final
//!   residual network and polished with projected subgradient (Polyak)
//!   steps on the Lagrangian dual. The reported gap is an honest upper bound
//!   on the primal's suboptimality for the true (not linearised) values.
//! * [`brute_force`]: exhaustive optimum over a uniform grid for tiny
//!   instances, for cross-checking.

use serde::Serialize;

use crate::error::{OkraError, Result};
use crate::flow::Network;
use crate::model::{Allocation, Instance, ItemValue, Mode, ValueFunction};
use crate::ota::best_response;
use crate::thresholds::FlatPrice;

#[derive(Debug, Clone, Serialize)]
pub struct OfflineSolution {
    pub value: f64,
    pub allocation: Allocation,
    pub dual_value: f64,
    /// `dual_value - value`; an upper bound on the distance to optimality.
    pub gap: f64,
    pub capacity_prices: Vec<f64>,
    pub item_prices: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub method: &'static str,
}

#[derive(Debug, Clone, Copy)]
pub struct OfflineOptions {
    /// Pieces used to linearise each non-linear aggregate value function.
    pub segments: usize,
    /// Same, per knapsack, for separable values (the path search is
    /// costlier there).
    pub separable_segments: usize,
    /// Cap on dual polishing iterations.
    pub max_iter: usize,
    /// Stop polishing once `gap <= rel_gap * value`.
    pub rel_gap: f64,
    /// Stop polishing after this many iterations without improving the
    /// dual bound.
    pub stall: usize,
}

impl Default for OfflineOptions {
    fn default() -> Self {
        OfflineOptions { segments: 256, separable_segments: 128, max_iter: 2_000, rel_gap: 1e-8, stall: 150 }
    }
}

/// Relative gap at or below which a solution counts as converged.
pub const CONVERGED_GAP: f64 = 1e-5;

fn is_converged(value: f64, gap: f64) -> bool {
    gap <= CONVERGED_GAP * value.abs().max(1e-300) + 1e-12
}

fn check(instance: &Instance) -> Result<()> {
    let v = instance.validate();
    if v.is_empty() {
        Ok(())
    } else {
        Err(OkraError::Validation(v))
    }
}

/// Optimum for a single knapsack.
pub fn offline_got(instance: &Instance) -> Result<OfflineSolution> {
    check(instance)?;
    if instance.m() != 1 {
        return Err(OkraError::Precondition(format!("single knapsack required, got {}", instance.m())));
    }
    let cap = instance.setup.capacities[0];
    let items: Vec<(&ValueFunction, f64)> =
        instance.items.iter().map(|it| (it.value_fn(0), it.size.min(it.rate_limits[0]))).collect();
    let total = |lam: f64| items.iter().map(|(g, c)| g.demand_hi(lam, *c)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut iters = 0;
    if total(0.0) > cap {
        // strictly above every initial marginal value, so nothing is demanded
        hi = 2.0 * items.iter().map(|(g, _)| g.deriv(0.0)).fold(0.0, f64::max) + 1.0;
        while hi - lo > 1e-15 * hi && iters < 400 {
            iters += 1;
            let mid = 0.5 * (lo + hi);
            if total(mid) <= cap {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let base: Vec<f64> = items.iter().map(|(g, c)| g.demand_hi(hi, *c)).collect();
    let top: Vec<f64> = items.iter().map(|(g, c)| g.demand_hi(lo, *c)).collect();
    let spare = cap - base.iter().sum::<f64>();
    let slack: f64 = top.iter().zip(&base).map(|(t, b)| t - b).sum();
    let frac = if slack > 0.0 { (spare / slack).clamp(0.0, 1.0) } else { 0.0 };
    let x: Vec<f64> = base.iter().zip(&top).map(|(b, t)| b + (t - b) * frac).collect();
    let allocation: Allocation = x.iter().map(|&v| vec![v]).collect();
    let value = instance.objective(&allocation);
    let dual_at = |lam: f64| items.iter().map(|(g, c)| g.conjugate(lam, *c).0).sum::<f64>() + lam * cap;
    let (lam, dual_value) = [lo, hi]
        .iter()
        .map(|&l| (l, dual_at(l)))
        .fold((hi, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
    let gap = dual_value - value;
    let item_prices = items
        .iter()
        .zip(&x)
        .map(|((g, _), &xn)| (g.deriv(xn) - lam).max(0.0))
        .collect();
    Ok(OfflineSolution {
        value,
        allocation,
        dual_value,
        gap,
        capacity_prices: vec![lam],
        item_prices,
        iterations: iters,
        converged: is_converged(value, gap),
        method: "price_bisection",
    })
}

/// Chord slopes of a piecewise-linear under-approximation of `g` on
/// `[0, cap]`; non-positive pieces are dropped.
fn linearise(g: &ValueFunction, cap: f64, pieces: usize) -> Vec<(f64, f64)> {
    if cap <= 0.0 {
        return Vec::new();
    }
    let end = match *g {
        ValueFunction::Linear { slope } => return if slope > 0.0 { vec![(slope, cap)] } else { vec![] },
        ValueFunction::Quadratic { a, b } if b == 0.0 => return if a > 0.0 { vec![(a, cap)] } else { vec![] },
        ValueFunction::Quadratic { a, b } => cap.min((a / (2.0 * b)).max(0.0)),
        ValueFunction::GeneralConcave { ref derivatives, .. } => {
            let _ = derivatives;
            cap
        }
    };
    let k = match g {
        ValueFunction::GeneralConcave { derivatives, .. } => pieces.max(2 * derivatives.len()),
        _ => pieces.max(1),
    };
    let h = end / k as f64;
    (0..k)
        .filter_map(|i| {
            let (a, b) = (i as f64 * h, if i + 1 == k { end } else { (i + 1) as f64 * h });
            let s = (g.value(b) - g.value(a)) / (b - a);
            (s > 0.0 && b > a).then_some((s, b - a))
        })
        .collect()
}

/// Lagrangian relaxation of the capacity constraints at prices `lambda`:
/// returns the dual bound, the item-wise maximisers and item prices.
pub fn lagrangian_bound(instance: &Instance, lambda: &[f64]) -> (f64, Allocation, Vec<f64>) {
    let curves: Vec<FlatPrice> = lambda.iter().map(|&l| FlatPrice(l)).collect();
    let zeros = vec![0.0; lambda.len()];
    let mut dual: f64 = lambda.iter().zip(&instance.setup.capacities).map(|(l, c)| l * c).sum();
    let mut alloc = Vec::with_capacity(instance.n());
    let mut mu = Vec::with_capacity(instance.n());
    for it in &instance.items {
        let y = best_response(&curves, &zeros, it);
        let spend: f64 = y.iter().zip(lambda).map(|(a, b)| a * b).sum();
        dual += it.value_of(&y) - spend;
        let price = match &it.value {
            ItemValue::Aggregate(g) => g.deriv(y.iter().sum()),
            ItemValue::Separable(gs) => y
                .iter()
                .zip(gs)
                .zip(lambda)
                .filter(|((&v, _), _)| v > 0.0)
                .map(|((&v, g), &l)| g.deriv(v) - l)
                .fold(0.0, f64::max),
        };
        mu.push(price.max(0.0));
        alloc.push(y);
    }
    (dual, alloc, mu)
}

fn repair(instance: &Instance, y: &Allocation) -> Allocation {
    let m = instance.m();
    let mut out = y.clone();
    for k in 0..m {
        let load: f64 = y.iter().map(|r| r[k]).sum();
        let cap = instance.setup.capacities[k];
        if load > cap {
            let s = cap / load;
            out.iter_mut().for_each(|r| r[k] *= s);
        }
    }
    out
}

struct Layout {
    n: usize,
    m: usize,
}

impl Layout {
    fn s(&self) -> usize {
        0
    }
    fn item(&self, i: usize) -> usize {
        1 + i
    }
    fn knap(&self, k: usize) -> usize {
        1 + self.n + k
    }
    fn t(&self) -> usize {
        1 + self.n + self.m
    }
}

fn scale(instance: &Instance) -> f64 {
    let c = instance.setup.total_capacity();
    let d = instance.items.iter().map(|i| i.size).fold(0.0, f64::max);
    c.max(d).max(1e-300)
}

/// Greedy over linear pieces in decreasing slope, each pushed with
/// shortest augmenting paths that never shrink earlier items.
fn primal_aggregate(instance: &Instance, pieces: usize) -> (Allocation, Vec<f64>) {
    let (n, m) = (instance.n(), instance.m());
    let lay = Layout { n, m };
    let mut net = Network::new(n + m + 2, 1e-13 * scale(instance));
    let mut arc = vec![vec![usize::MAX; m]; n];
    for (i, it) in instance.items.iter().enumerate() {
        for k in 0..m {
            if it.rate_limits[k] > 0.0 {
                arc[i][k] = net.add_edge(lay.item(i), lay.knap(k), it.rate_limits[k], 0.0);
            }
        }
    }
    for k in 0..m {
        net.add_edge(lay.knap(k), lay.t(), instance.setup.capacities[k], 0.0);
    }
    let mut segs = Vec::new();
    for (i, it) in instance.items.iter().enumerate() {
        let g = it.value_fn(0);
        for (j, (s, len)) in linearise(g, it.size, pieces).into_iter().enumerate() {
            let e = net.add_edge(lay.s(), lay.item(i), len, s);
            segs.push((s, i, j, len, e));
        }
    }
    segs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut blocked = vec![false; n];
    for &(_, i, _, len, e) in &segs {
        if blocked[i] {
            continue;
        }
        let pushed = net.augment_from(lay.item(i), lay.t(), lay.s(), len);
        net.push(e, pushed);
        if pushed < len - net.eps {
            blocked[i] = true;
        }
    }
    finish(instance, &net, &lay, &arc)
}

/// Longest-gain augmenting paths on a network whose item-to-knapsack arcs
/// carry the linearised per-knapsack values.
fn primal_separable(instance: &Instance, pieces: usize) -> (Allocation, Vec<f64>, bool) {
    let (n, m) = (instance.n(), instance.m());
    let lay = Layout { n, m };
    let mut net = Network::new(n + m + 2, 1e-13 * scale(instance));
    let mut arcs = vec![vec![Vec::new(); m]; n];
    for (i, it) in instance.items.iter().enumerate() {
        net.add_edge(lay.s(), lay.item(i), it.size, 0.0);
        for k in 0..m {
            let cap = it.rate_limits[k].min(it.size);
            for (s, len) in linearise(it.value_fn(k), cap, pieces) {
                arcs[i][k].push(net.add_edge(lay.item(i), lay.knap(k), len, s));
            }
        }
    }
    for k in 0..m {
        net.add_edge(lay.knap(k), lay.t(), instance.setup.capacities[k], 0.0);
    }
    let edges = net.to.len();
    let (_, ok) = net.max_gain_flow(lay.s(), lay.t(), 20 * edges + 100);
    let y: Allocation = arcs
        .iter()
        .map(|row| row.iter().map(|es| es.iter().map(|&e| net.flow(e)).sum()).collect())
        .collect();
    let lam = prices(&net, &lay);
    (y, lam, ok)
}

fn prices(net: &Network, lay: &Layout) -> Vec<f64> {
    let q = net.potentials_to(&[lay.s(), lay.t()]);
    (0..lay.m)
        .map(|k| {
            let v = q[lay.knap(k)];
            if v.is_finite() {
                (-v).max(0.0)
            } else {
                0.0
            }
        })
        .collect()
}

fn finish(instance: &Instance, net: &Network, lay: &Layout, arc: &[Vec<usize>]) -> (Allocation, Vec<f64>) {
    let y = arc
        .iter()
        .map(|row| row.iter().map(|&e| if e == usize::MAX { 0.0 } else { net.flow(e) }).collect())
        .collect::<Allocation>();
    let _ = instance;
    (y, prices(net, lay))
}

/// Optimum for any number of knapsacks.
pub fn offline_fomkp(instance: &Instance, opts: &OfflineOptions) -> Result<OfflineSolution> {
    check(instance)?;
    let (mut alloc, mut lam, mut ok) = match instance.mode {
        Mode::Aggregate => {
            let (y, l) = primal_aggregate(instance, opts.segments);
            (y, l, true)
        }
        Mode::Separable => primal_separable(instance, opts.separable_segments),
    };
    // keep the primal strictly feasible against round-off
    alloc = repair(instance, &alloc);
    let mut value = instance.objective(&alloc);
    let (mut best_dual, mut inner, mut mu) = lagrangian_bound(instance, &lam);
    let target = |v: f64| opts.rel_gap * v.abs().max(1e-300);
    let mut iters = 0;
    let mut cur = lam.clone();
    let mut since_best = 0;
    while best_dual - value > target(value) && iters < opts.max_iter && since_best < opts.stall {
        iters += 1;
        since_best += 1;
        let (d, y, _) = lagrangian_bound(instance, &cur);
        if d < best_dual {
            if d < best_dual - 1e-12 * best_dual.abs() {
                since_best = 0;
            }
            best_dual = d;
            lam = cur.clone();
            inner = y.clone();
        }
        let sub: Vec<f64> = (0..instance.m())
            .map(|k| instance.setup.capacities[k] - y.iter().map(|r| r[k]).sum::<f64>())
            .collect();
        let norm2: f64 = sub.iter().map(|s| s * s).sum();
        if norm2 <= 0.0 {
            break;
        }
        let step = (d - value).max(0.0) / norm2;
        for (c, s) in cur.iter_mut().zip(&sub) {
            *c = (*c - step * s).max(0.0);
        }
        // primal recovery from the relaxed maximiser
        if iters % 25 == 1 {
            let cand = repair(instance, &inner);
            let v = instance.objective(&cand);
            if v > value {
                value = v;
                alloc = cand;
            }
        }
    }
    let cand = repair(instance, &inner);
    let v = instance.objective(&cand);
    if v > value {
        value = v;
        alloc = cand;
    }
    if best_dual < value {
        // the relaxation can never be below a feasible primal; this is
        // round-off in the dual evaluation
        best_dual = value;
    }
    let (_, _, mu2) = lagrangian_bound(instance, &lam);
    mu = if mu2.len() == mu.len() { mu2 } else { mu };
    let gap = best_dual - value;
    ok &= is_converged(value, gap);
    Ok(OfflineSolution {
        value,
        allocation: alloc,
        dual_value: best_dual,
        gap,
        capacity_prices: lam,
        item_prices: mu,
        iterations: iters,
        converged: ok,
        method: match instance.mode {
            Mode::Aggregate => "greedy_augmentation",
            Mode::Separable => "longest_augmenting_paths",
        },
    })
}

/// [`offline_got`] for one knapsack, [`offline_fomkp`] otherwise.
pub fn offline(instance: &Instance) -> Result<OfflineSolution> {
    if instance.m() == 1 {
        offline_got(instance)
    } else {
        offline_fomkp(instance, &OfflineOptions::default())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BruteForce {
    pub value: f64,
    pub allocation: Allocation,
    pub step: f64,
}

/// Largest work (states x choices x items) [`brute_force`] will accept.
pub const BRUTE_FORCE_BUDGET: f64 = 5e9;

/// Exhaustive optimum with every `y_nm` restricted to multiples of
/// `max_m C_m / grid`.
///
/// Enumerates every grid allocation of every item, merging partial
/// allocations that leave identical capacity usage (keeping the best), so
/// the result is the exact optimum over the grid-restricted feasible set.
pub fn brute_force(instance: &Instance, grid: usize) -> Result<BruteForce> {
    check(instance)?;
    let (n, m) = (instance.n(), instance.m());
    if n * m > 8 {
        return Err(OkraError::Precondition(format!("N*M = {} exceeds 8", n * m)));
    }
    if grid == 0 || grid > 50 {
        return Err(OkraError::Invalid(format!("grid must be in 1..=50, got {grid}")));
    }
    let h = instance.setup.capacities.iter().cloned().fold(0.0, f64::max) / grid as f64;
    let units = |x: f64| ((x / h) + 1e-9).floor().max(0.0) as usize;
    let cap_u: Vec<usize> = instance.setup.capacities.iter().map(|&c| units(c)).collect();
    let radix: Vec<usize> = cap_u.iter().map(|c| c + 1).collect();
    let states: usize = radix.iter().product();
    let choice_sets: Vec<Vec<Vec<usize>>> = instance
        .items
        .iter()
        .map(|it| {
            let lim: Vec<usize> = (0..m).map(|k| units(it.rate_limits[k]).min(cap_u[k])).collect();
            let size = units(it.size);
            let mut out = Vec::new();
            let mut c = vec![0usize; m];
            loop {
                if c.iter().sum::<usize>() <= size {
                    out.push(c.clone());
                }
                let mut k = 0;
                while k < m {
                    c[k] += 1;
                    if c[k] <= lim[k] {
                        break;
                    }
                    c[k] = 0;
                    k += 1;
                }
                if k == m {
                    break;
                }
            }
            out
        })
        .collect();
    let work: f64 = choice_sets.iter().map(|c| c.len() as f64 * states as f64).sum();
    if work > BRUTE_FORCE_BUDGET {
        return Err(OkraError::Precondition(format!("brute force too large ({work:.3e} steps)")));
    }
    let decode = |mut s: usize| -> Vec<usize> {
        radix
            .iter()
            .map(|&r| {
                let d = s % r;
                s /= r;
                d
            })
            .collect()
    };
    let mut stride = vec![1usize; m];
    for k in 1..m {
        stride[k] = stride[k - 1] * radix[k - 1];
    }
    let mut dp = vec![f64::NEG_INFINITY; states];
    dp[0] = 0.0;
    let mut back: Vec<Vec<(usize, usize)>> = Vec::with_capacity(n);
    for (i, it) in instance.items.iter().enumerate() {
        let choices = &choice_sets[i];
        let vals: Vec<f64> = choices
            .iter()
            .map(|c| it.value_of(&c.iter().map(|&u| u as f64 * h).collect::<Vec<_>>()))
            .collect();
        let mut next = vec![f64::NEG_INFINITY; states];
        let mut arg = vec![(usize::MAX, usize::MAX); states];
        for s in 0..states {
            if dp[s] == f64::NEG_INFINITY {
                continue;
            }
            let used = decode(s);
            'choice: for (ci, c) in choices.iter().enumerate() {
                let mut t = s;
                for k in 0..m {
                    if used[k] + c[k] > cap_u[k] {
                        continue 'choice;
                    }
                    t += c[k] * stride[k];
                }
                let v = dp[s] + vals[ci];
                if v > next[t] {
                    next[t] = v;
                    arg[t] = (s, ci);
                }
            }
        }
        dp = next;
        back.push(arg);
    }
    let (mut s, value) = dp
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (s, &v)| if v > acc.1 { (s, v) } else { acc });
    let mut allocation = vec![vec![0.0; m]; n];
    for i in (0..n).rev() {
        let (prev, ci) = back[i][s];
        allocation[i] = choice_sets[i][ci].iter().map(|&u| u as f64 * h).collect();
        s = prev;
    }
    Ok(BruteForce { value, allocation, step: h })
}
