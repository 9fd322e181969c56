//! Problem data: knapsack setup, items, value functions, allocations.

use serde::{Deserialize, Serialize};

/// Absolute tolerance used by every constraint check in the crate.
pub const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub capacities: Vec<f64>,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "U")]
    pub u: f64,
}

impl Setup {
    pub fn new(capacities: Vec<f64>, l: f64, u: f64) -> Self {
        Setup { capacities, l, u }
    }

    pub fn single(capacity: f64, l: f64, u: f64) -> Self {
        Setup::new(vec![capacity], l, u)
    }

    pub fn theta(&self) -> f64 {
        self.u / self.l
    }

    pub fn m(&self) -> usize {
        self.capacities.len()
    }

    pub fn total_capacity(&self) -> f64 {
        self.capacities.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Aggregate,
    Separable,
}

/// Marginal-value regime the instance promises.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// Marginal values in `[L, U]`.
    #[default]
    Standard,
    /// Initial marginal in `[L, U]`, average value at least `L / c`.
    Relaxed { c: f64 },
}

/// Concave, non-decreasing value function with `g(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueFunction {
    /// `g(x) = slope * x`.
    Linear { slope: f64 },
    /// `g(x) = a x - b x^2` up to the peak `a / 2b`, flat afterwards.
    Quadratic { a: f64, b: f64 },
    /// Derivative tabulated on a uniform grid over `[0, domain_max]` and
    /// linearly interpolated; `g` is its exact integral.
    GeneralConcave { domain_max: f64, derivatives: Vec<f64> },
}

impl ValueFunction {
    pub fn linear(slope: f64) -> Self {
        ValueFunction::Linear { slope }
    }

    pub fn quadratic(a: f64, b: f64) -> Self {
        ValueFunction::Quadratic { a, b }
    }

    pub fn is_linear(&self) -> bool {
        match self {
            ValueFunction::Linear { .. } => true,
            ValueFunction::Quadratic { b, .. } => *b == 0.0,
            ValueFunction::GeneralConcave { .. } => false,
        }
    }

    fn grid(domain_max: f64, d: &[f64]) -> (f64, usize) {
        let k = d.len().saturating_sub(1).max(1);
        (domain_max / k as f64, k)
    }

    pub fn value(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match *self {
            ValueFunction::Linear { slope } => slope * x,
            ValueFunction::Quadratic { a, b } => {
                if b <= 0.0 {
                    return a * x - b * x * x;
                }
                let peak = (a / (2.0 * b)).max(0.0);
                let z = x.min(peak);
                a * z - b * z * z
            }
            ValueFunction::GeneralConcave { domain_max, ref derivatives } => {
                let d = derivatives;
                if d.is_empty() {
                    return 0.0;
                }
                if d.len() == 1 {
                    return d[0] * x;
                }
                let (h, k) = Self::grid(domain_max, d);
                let mut acc = 0.0;
                for i in 0..k {
                    let x0 = i as f64 * h;
                    if x <= x0 {
                        return acc;
                    }
                    let x1 = x0 + h;
                    if x >= x1 {
                        acc += 0.5 * h * (d[i] + d[i + 1]);
                    } else {
                        let t = x - x0;
                        let dx = d[i] + (d[i + 1] - d[i]) * t / h;
                        acc += 0.5 * t * (d[i] + dx);
                        return acc;
                    }
                }
                acc + d[k] * (x - domain_max)
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match *self {
            ValueFunction::Linear { slope } => slope,
            ValueFunction::Quadratic { a, b } => (a - 2.0 * b * x).max(0.0),
            ValueFunction::GeneralConcave { domain_max, ref derivatives } => {
                let d = derivatives;
                match d.len() {
                    0 => 0.0,
                    1 => d[0],
                    _ => {
                        let (h, k) = Self::grid(domain_max, d);
                        if x >= domain_max {
                            return d[k];
                        }
                        let i = ((x / h) as usize).min(k - 1);
                        let t = (x - i as f64 * h) / h;
                        d[i] + (d[i + 1] - d[i]) * t
                    }
                }
            }
        }
    }

    /// `sup { x in [0, cap] : g'(x) >= p }`, or 0 when `g'(0) < p`.
    pub fn demand_hi(&self, p: f64, cap: f64) -> f64 {
        if cap <= 0.0 || self.deriv(0.0) < p {
            return 0.0;
        }
        if self.deriv(cap) >= p {
            return cap;
        }
        match *self {
            ValueFunction::Linear { .. } => unreachable!(),
            ValueFunction::Quadratic { a, b } => ((a - p) / (2.0 * b)).clamp(0.0, cap),
            ValueFunction::GeneralConcave { domain_max, ref derivatives } => {
                let d = derivatives;
                let (h, k) = Self::grid(domain_max, d);
                for i in 0..k {
                    if d[i + 1] < p {
                        let x = i as f64 * h + h * (d[i] - p) / (d[i] - d[i + 1]);
                        return x.clamp(0.0, cap);
                    }
                }
                cap
            }
        }
    }

    /// `inf { x in [0, cap] : g'(x) <= p }`, or `cap` when `g'(cap) > p`.
    pub fn demand_lo(&self, p: f64, cap: f64) -> f64 {
        if cap <= 0.0 || self.deriv(0.0) <= p {
            return 0.0;
        }
        if self.deriv(cap) > p {
            return cap;
        }
        match *self {
            ValueFunction::Linear { .. } => unreachable!(),
            ValueFunction::Quadratic { a, b } => ((a - p) / (2.0 * b)).clamp(0.0, cap),
            ValueFunction::GeneralConcave { domain_max, ref derivatives } => {
                let d = derivatives;
                let (h, k) = Self::grid(domain_max, d);
                for i in 0..k {
                    if d[i + 1] <= p {
                        let x = i as f64 * h + h * (d[i] - p) / (d[i] - d[i + 1]);
                        return x.clamp(0.0, cap);
                    }
                }
                cap
            }
        }
    }

    /// Convex conjugate `max_{0 <= x <= cap} g(x) - p x` and a maximiser.
    pub fn conjugate(&self, p: f64, cap: f64) -> (f64, f64) {
        let x = self.demand_hi(p, cap);
        (self.value(x) - p * x, x)
    }
}

/// Value attached to an item: one function of the total (aggregate mode) or
/// one per knapsack (separable mode).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ItemValue {
    Aggregate(ValueFunction),
    Separable(Vec<ValueFunction>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub size: f64,
    pub rate_limits: Vec<f64>,
    pub value: ItemValue,
}

impl Item {
    pub fn aggregate(size: f64, rate_limits: Vec<f64>, g: ValueFunction) -> Self {
        Item { size, rate_limits, value: ItemValue::Aggregate(g) }
    }

    pub fn separable(size: f64, rate_limits: Vec<f64>, gs: Vec<ValueFunction>) -> Self {
        Item { size, rate_limits, value: ItemValue::Separable(gs) }
    }

    /// Value function governing knapsack `m` (the shared one in aggregate mode).
    pub fn value_fn(&self, m: usize) -> &ValueFunction {
        match &self.value {
            ItemValue::Aggregate(g) => g,
            ItemValue::Separable(gs) => &gs[m],
        }
    }

    /// Value of a row of the allocation matrix.
    pub fn value_of(&self, row: &[f64]) -> f64 {
        match &self.value {
            ItemValue::Aggregate(g) => g.value(row.iter().sum()),
            ItemValue::Separable(gs) => gs.iter().zip(row).map(|(g, &y)| g.value(y)).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub setup: Setup,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "is_standard")]
    pub regime: Regime,
    pub items: Vec<Item>,
}

fn is_standard(r: &Regime) -> bool {
    *r == Regime::Standard
}

/// `y[n][m]`: amount of item `n` placed in knapsack `m`.
pub type Allocation = Vec<Vec<f64>>;

impl Instance {
    pub fn new(setup: Setup, mode: Mode, items: Vec<Item>) -> Self {
        Instance { setup, mode, regime: Regime::Standard, items }
    }

    pub fn n(&self) -> usize {
        self.items.len()
    }

    pub fn m(&self) -> usize {
        self.setup.m()
    }

    pub fn objective(&self, y: &Allocation) -> f64 {
        self.items.iter().zip(y).map(|(it, row)| it.value_of(row)).sum()
    }

    pub fn empty_allocation(&self) -> Allocation {
        vec![vec![0.0; self.m()]; self.n()]
    }

    /// Constraint violations of `y` beyond `tol`, one message each.
    pub fn check_allocation(&self, y: &Allocation, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if y.len() != self.n() {
            out.push(format!("allocation has {} rows, expected {}", y.len(), self.n()));
            return out;
        }
        let mut load = vec![0.0; self.m()];
        for (n, (it, row)) in self.items.iter().zip(y).enumerate() {
            if row.len() != self.m() {
                out.push(format!("row {n} has {} entries, expected {}", row.len(), self.m()));
                continue;
            }
            let mut total = 0.0;
            for (m, &v) in row.iter().enumerate() {
                if !(v >= -tol) {
                    out.push(format!("y[{n}][{m}] = {v} negative"));
                }
                if v > it.rate_limits[m] + tol {
                    out.push(format!("y[{n}][{m}] = {v} exceeds rate limit {}", it.rate_limits[m]));
                }
                total += v;
                load[m] += v;
            }
            if total > it.size + tol {
                out.push(format!("item {n} receives {total} > size {}", it.size));
            }
        }
        for (m, (&l, &c)) in load.iter().zip(&self.setup.capacities).enumerate() {
            if l > c + tol {
                out.push(format!("knapsack {m} load {l} exceeds capacity {c}"));
            }
        }
        out
    }

    /// Validation messages; empty means the instance is well formed.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let s = &self.setup;
        if s.capacities.is_empty() {
            v.push("setup: no knapsacks".to_string());
        }
        for (m, &c) in s.capacities.iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                v.push(format!("setup: capacity {m} must be positive and finite"));
            }
        }
        if !(s.l.is_finite() && s.l > 0.0) {
            v.push("setup: L must be positive and finite".to_string());
        }
        if !s.u.is_finite() {
            v.push("setup: U must be finite".to_string());
        } else if s.u < s.l {
            v.push("setup: U < L".to_string());
        }
        if let Regime::Relaxed { c } = self.regime {
            if !(c >= 1.0 && c.is_finite()) {
                v.push("regime: c must be at least 1".to_string());
            }
        }
        let tol = TOL * s.u.abs().max(1.0);
        for (n, it) in self.items.iter().enumerate() {
            if !(it.size.is_finite() && it.size > 0.0) {
                v.push(format!("item {n}: size must be positive and finite"));
            }
            if it.rate_limits.len() != s.m() {
                v.push(format!(
                    "item {n}: rate-limit length mismatch ({} given, {} knapsacks)",
                    it.rate_limits.len(),
                    s.m()
                ));
            }
            for (m, &y) in it.rate_limits.iter().enumerate() {
                if !(y.is_finite() && y >= 0.0) {
                    v.push(format!("item {n}: rate limit {m} must be non-negative and finite"));
                }
            }
            let fns: Vec<&ValueFunction> = match (&it.value, self.mode) {
                (ItemValue::Aggregate(g), Mode::Aggregate) => vec![g],
                (ItemValue::Separable(gs), Mode::Separable) => {
                    if gs.len() != s.m() {
                        v.push(format!(
                            "item {n}: value-function count mismatch ({} given, {} knapsacks)",
                            gs.len(),
                            s.m()
                        ));
                    }
                    gs.iter().collect()
                }
                (ItemValue::Aggregate(_), Mode::Separable) => {
                    v.push(format!("item {n}: separable mode needs one value function per knapsack"));
                    continue;
                }
                (ItemValue::Separable(_), Mode::Aggregate) => {
                    v.push(format!("item {n}: aggregate mode needs a single value function"));
                    continue;
                }
            };
            if !(it.size.is_finite() && it.size > 0.0) {
                continue;
            }
            for g in fns {
                check_value_fn(&mut v, n, g, it.size, s, self.regime, tol);
            }
        }
        v
    }
}

fn check_value_fn(
    out: &mut Vec<String>,
    n: usize,
    g: &ValueFunction,
    size: f64,
    s: &Setup,
    regime: Regime,
    tol: f64,
) {
    match g {
        ValueFunction::Linear { slope } if !slope.is_finite() => {
            out.push(format!("item {n}: slope must be finite"));
            return;
        }
        ValueFunction::Quadratic { a, b } => {
            if !(a.is_finite() && b.is_finite()) {
                out.push(format!("item {n}: quadratic coefficients must be finite"));
                return;
            }
            if *b < 0.0 {
                out.push(format!("item {n}: value function not concave"));
                return;
            }
        }
        ValueFunction::GeneralConcave { domain_max, derivatives } => {
            if derivatives.len() < 2 || derivatives.iter().any(|d| !d.is_finite()) {
                out.push(format!("item {n}: derivative table needs at least two finite entries"));
                return;
            }
            if !(*domain_max >= size - TOL) {
                out.push(format!("item {n}: derivative table does not cover the item size"));
                return;
            }
        }
        _ => {}
    }
    const GRID: usize = 1000;
    let mut prev = f64::INFINITY;
    let (mut above, mut below, mut convex) = (false, false, false);
    for i in 0..=GRID {
        let x = size * i as f64 / GRID as f64;
        let d = g.deriv(x);
        if d > prev + tol {
            convex = true;
        }
        prev = d;
        match regime {
            Regime::Standard => {
                above |= d > s.u + tol;
                below |= d < s.l - tol;
            }
            Regime::Relaxed { .. } => {
                below |= d < -tol;
            }
        }
    }
    if let Regime::Relaxed { c } = regime {
        let d0 = g.deriv(0.0);
        above |= d0 > s.u + tol;
        below |= d0 < s.l - tol;
        if g.value(size) / size < s.l / c - tol {
            out.push(format!("item {n}: average value below L/c"));
        }
    }
    if above {
        out.push(format!("item {n}: derivative exceeds U"));
    }
    if below {
        out.push(format!("item {n}: derivative below L"));
    }
    if convex {
        out.push(format!("item {n}: value function not concave"));
    }
}
