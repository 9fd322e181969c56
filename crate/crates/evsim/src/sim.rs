//! Trial construction and the online-vs-fixed-price comparison.

use okra_core::adversary::Ratio;
use okra_core::offline::{offline_fomkp, OfflineOptions};
use okra_core::ota::{fta_price, run, Policy, RunResult};
use okra_core::thresholds::{ratio_fomkp_aggregate, ThresholdFamily, Variant};
use okra_core::{Instance, Item, Mode, OkraError, Result, Setup, ValueFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::session::{by_day, Session};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Congestion {
    Low,
    Medium,
    High,
    /// Explicit ratio of total capacity to total demand.
    Custom(f64),
}

impl Congestion {
    pub fn coverage(&self) -> f64 {
        match *self {
            Congestion::Low => 0.55,
            Congestion::Medium => 0.10,
            Congestion::High => 0.027,
            Congestion::Custom(c) => c,
        }
    }

    pub fn parse(s: &str) -> Result<Congestion> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Congestion::Low),
            "medium" => Ok(Congestion::Medium),
            "high" => Ok(Congestion::High),
            other => match other.parse::<f64>() {
                Ok(c) if c > 0.0 && c.is_finite() => Ok(Congestion::Custom(c)),
                _ => Err(OkraError::Invalid(format!("unknown congestion {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvValues {
    /// Slopes uniform on `[L, U]`.
    Linear,
    /// `u x - (u - l) x^2 / (2 D)` with `u` uniform on `[L, U]` and `l`
    /// uniform on `[L, u]`.
    Quadratic,
    /// Nine equally likely classes with means `L + 20 k`, spread 5, slopes
    /// clipped to `[L, U]`.
    Classes9,
}

impl EvValues {
    pub fn parse(s: &str) -> Result<EvValues> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(EvValues::Linear),
            "quadratic" => Ok(EvValues::Quadratic),
            "classes9" | "classes" => Ok(EvValues::Classes9),
            other => Err(OkraError::Invalid(format!("unknown value kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub slots: usize,
    pub theta: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub congestion: Congestion,
    /// Trials per day of the trace.
    pub trials: usize,
    pub seed: u64,
    pub values: EvValues,
    pub adaptive: bool,
    /// Overrides the congestion calibration when set.
    pub capacity_per_slot: Option<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            slots: 24,
            theta: 36.0,
            l: 1.0,
            congestion: Congestion::High,
            trials: 20,
            seed: 0,
            values: EvValues::Linear,
            adaptive: false,
            capacity_per_slot: None,
        }
    }
}

impl SimConfig {
    pub fn u(&self) -> f64 {
        self.l * self.theta
    }
}

/// Per-slot capacity giving `sum_m C_m / sum_n D_n` equal to the coverage
/// target. Coverage is linear in the capacity, so this is exact.
pub fn capacity_for(sessions: &[Session], cfg: &SimConfig) -> Result<f64> {
    if let Some(c) = cfg.capacity_per_slot {
        return Ok(c);
    }
    let demand: f64 = sessions.iter().map(|s| s.demand).sum();
    if !(demand > 0.0) {
        return Err(OkraError::Invalid("coverage target needs positive total demand".into()));
    }
    Ok(cfg.congestion.coverage() * demand / cfg.slots as f64)
}

fn sample_value(rng: &mut ChaCha8Rng, cfg: &SimConfig, demand: f64) -> ValueFunction {
    let (l, u) = (cfg.l, cfg.u());
    match cfg.values {
        EvValues::Linear => ValueFunction::linear(rng.gen_range(l..=u)),
        EvValues::Quadratic => {
            let top = rng.gen_range(l..=u);
            let end = rng.gen_range(l..=top);
            ValueFunction::quadratic(top, (top - end) / (2.0 * demand))
        }
        EvValues::Classes9 => {
            let k = rng.gen_range(0..9) as f64;
            let n = Normal::new(l + 20.0 * k, 5.0).expect("valid normal");
            ValueFunction::linear(n.sample(rng).clamp(l, u))
        }
    }
}

/// Slots become knapsacks; each session is an item, in arrival order,
/// whose rate limit applies inside its window and is zero outside.
pub fn build_instance(sessions: &[Session], cfg: &SimConfig, trial_seed: u64) -> Result<Instance> {
    let cap = capacity_for(sessions, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let mut order: Vec<&Session> = sessions.iter().collect();
    order.sort_by_key(|s| s.arrival_slot);
    let items = order
        .into_iter()
        .map(|s| {
            let rates = (0..cfg.slots).map(|m| if s.present(m) { s.rate_limit } else { 0.0 }).collect();
            Item::aggregate(s.demand, rates, sample_value(&mut rng, cfg, s.demand))
        })
        .collect();
    let inst = Instance::new(Setup::new(vec![cap; cfg.slots], cfg.l, cfg.u()), Mode::Aggregate, items);
    let v = inst.validate();
    if v.is_empty() {
        Ok(inst)
    } else {
        Err(OkraError::Validation(v))
    }
}

fn marginal(item: &Item, row: &[f64], m: usize) -> f64 {
    match &item.value {
        okra_core::ItemValue::Aggregate(g) => g.deriv(row.iter().sum()),
        okra_core::ItemValue::Separable(gs) => gs[m].deriv(row[m]),
    }
}

/// Hands leftover slot capacity to vehicles with unmet demand and unused
/// rate, slot by slot, highest current marginal value first. Committed
/// amounts are never reduced.
pub fn adaptive_adjust(res: &RunResult, inst: &Instance) -> RunResult {
    let caps = &inst.setup.capacities;
    let mut y = res.allocation.clone();
    for m in 0..caps.len() {
        let mut left = caps[m] - y.iter().map(|r| r[m]).sum::<f64>();
        if left <= 1e-12 * caps[m] {
            continue;
        }
        let mut cands: Vec<(f64, usize)> = inst
            .items
            .iter()
            .enumerate()
            .filter(|(n, it)| {
                let total: f64 = y[*n].iter().sum();
                it.rate_limits[m] > y[*n][m] && it.size > total
            })
            .map(|(n, it)| (marginal(it, &y[n], m), n))
            .filter(|(g, _)| *g > 0.0)
            .collect();
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, n) in cands {
            let it = &inst.items[n];
            let total: f64 = y[n].iter().sum();
            let add = (it.size - total).min(it.rate_limits[m] - y[n][m]).min(left).max(0.0);
            y[n][m] += add;
            left -= add;
            if left <= 0.0 {
                break;
            }
        }
    }
    let utilization = (0..caps.len()).map(|m| y.iter().map(|r| r[m]).sum()).collect();
    RunResult {
        online_value: inst.objective(&y),
        allocation: y,
        utilization,
        pseudo_utilities: res.pseudo_utilities.clone(),
        trace: res.trace.clone(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub policy: String,
    pub value: f64,
    pub ratio: Ratio,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub day: u32,
    pub trial: usize,
    pub sessions: usize,
    pub capacity_per_slot: f64,
    pub offline_value: f64,
    pub offline_gap: f64,
    /// Offline gap above 1e-3 of its value; left out of the statistics.
    pub excluded: bool,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PolicyStats {
    pub policy: String,
    pub trials: usize,
    pub mean: Ratio,
    pub max: Ratio,
    pub min: Ratio,
}

#[derive(Debug, Clone, Serialize)]
pub struct Improvement {
    /// `(max_fta - max_ota) / max_fta`.
    pub worst_case: Option<f64>,
    /// `(mean_fta - mean_ota) / mean_fta`.
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: SimConfig,
    pub alpha: f64,
    pub days: usize,
    pub trials_total: usize,
    pub excluded: usize,
    pub policies: Vec<PolicyStats>,
    pub improvement: Improvement,
    pub adaptive_improvement: Option<Improvement>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub summary: Summary,
    pub trials: Vec<TrialRecord>,
}

impl ComparisonReport {
    pub fn stats(&self, policy: &str) -> Option<&PolicyStats> {
        self.summary.policies.iter().find(|p| p.policy == policy)
    }

    /// Ratios of `policy` over the non-excluded trials, in trial order.
    pub fn ratios(&self, policy: &str) -> Vec<Ratio> {
        self.trials
            .iter()
            .filter(|t| !t.excluded)
            .filter_map(|t| t.outcomes.iter().find(|o| o.policy == policy).map(|o| o.ratio))
            .collect()
    }
}

/// Seed of one trial, derived from the root seed on its own stream.
pub fn trial_seed(root: u64, day: u32, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(((day as u64) << 32) | trial as u64);
    rng.gen()
}

/// Pool sized by `OKRA_THREADS` when set, else rayon's default.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("OKRA_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| OkraError::Invalid(format!("OKRA_THREADS must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| OkraError::Invalid(e.to_string()))
}

fn run_trial(day: u32, trial: usize, sessions: &[Session], cfg: &SimConfig) -> Result<TrialRecord> {
    let inst = build_instance(sessions, cfg, trial_seed(cfg.seed, day, trial))?;
    let fam = ThresholdFamily::build(Variant::FomkpAggregate, &inst.setup)?;
    let ota = run(&inst, &Policy::Ota(fam))?;
    let fta = run(&inst, &Policy::Fta { price: fta_price(&inst.setup) })?;
    let off = offline_fomkp(&inst, &OfflineOptions::default())?;
    let excluded = !(off.gap <= 1e-3 * off.value.abs()) || !off.value.is_finite();
    if excluded {
        log::warn!("day {day} trial {trial}: offline gap {:.3e} on value {:.6e}, excluded", off.gap, off.value);
    }
    let mut runs = vec![("ota", ota.online_value), ("fta", fta.online_value)];
    if cfg.adaptive {
        runs.push(("ota_adaptive", adaptive_adjust(&ota, &inst).online_value));
        runs.push(("fta_adaptive", adaptive_adjust(&fta, &inst).online_value));
    }
    let outcomes = runs
        .into_iter()
        .map(|(p, v)| Outcome { policy: p.to_string(), value: v, ratio: Ratio::of(off.value, v) })
        .collect();
    Ok(TrialRecord {
        day,
        trial,
        sessions: sessions.len(),
        capacity_per_slot: inst.setup.capacities[0],
        offline_value: off.value,
        offline_gap: off.gap,
        excluded,
        outcomes,
    })
}

fn stats(policy: &str, ratios: &[Ratio]) -> PolicyStats {
    let finite: Vec<f64> = ratios.iter().filter_map(|r| if let Ratio::Finite(v) = r { Some(*v) } else { None }).collect();
    let any_inf = finite.len() < ratios.len();
    let pick = |v: Option<f64>| v.map_or(Ratio::Finite(f64::NAN), Ratio::Finite);
    let mean = if any_inf {
        Ratio::Infinite
    } else {
        pick((!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64))
    };
    let max = if any_inf { Ratio::Infinite } else { pick(finite.iter().cloned().reduce(f64::max)) };
    let min = if finite.is_empty() && any_inf {
        Ratio::Infinite
    } else {
        pick(finite.iter().cloned().reduce(f64::min))
    };
    PolicyStats { policy: policy.to_string(), trials: ratios.len(), mean, max, min }
}

fn improvement(ota: &PolicyStats, fta: &PolicyStats) -> Improvement {
    let rel = |o: Ratio, f: Ratio| match (o, f) {
        (Ratio::Finite(o), Ratio::Finite(f)) if f > 0.0 => Some((f - o) / f),
        _ => None,
    };
    Improvement { worst_case: rel(ota.max, fta.max), mean: rel(ota.mean, fta.mean) }
}

/// Runs every (day, trial) pair of the trace. Results are collected in
/// order, so the report does not depend on the number of threads.
pub fn run_comparison(cfg: &SimConfig, sessions: &[Session]) -> Result<ComparisonReport> {
    if sessions.is_empty() {
        return Err(OkraError::Invalid("no sessions".into()));
    }
    if cfg.slots == 0 || cfg.trials == 0 || !(cfg.theta >= 1.0) || !(cfg.l > 0.0) {
        return Err(OkraError::Invalid("slots and trials must be positive, theta >= 1 and L > 0".into()));
    }
    let days = by_day(sessions);
    let tasks: Vec<(u32, usize, &[Session])> =
        days.iter().flat_map(|(d, s)| (0..cfg.trials).map(move |t| (*d, t, s.as_slice()))).collect();
    let pool = thread_pool()?;
    let trials: Vec<TrialRecord> =
        pool.install(|| tasks.par_iter().map(|(d, t, s)| run_trial(*d, *t, s, cfg)).collect::<Result<_>>())?;
    let mut names = vec!["ota", "fta"];
    if cfg.adaptive {
        names.extend(["ota_adaptive", "fta_adaptive"]);
    }
    let mut report = ComparisonReport {
        summary: Summary {
            config: cfg.clone(),
            alpha: ratio_fomkp_aggregate(cfg.theta)?,
            days: days.len(),
            trials_total: trials.len(),
            excluded: trials.iter().filter(|t| t.excluded).count(),
            policies: Vec::new(),
            improvement: Improvement { worst_case: None, mean: None },
            adaptive_improvement: None,
        },
        trials,
    };
    report.summary.policies = names.iter().map(|p| stats(p, &report.ratios(p))).collect();
    let s = &report.summary.policies;
    report.summary.improvement = improvement(&s[0], &s[1]);
    if cfg.adaptive {
        report.summary.adaptive_improvement = Some(improvement(&s[2], &s[3]));
    }
    Ok(report)
}
