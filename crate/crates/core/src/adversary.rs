//! Hard and random instance generators plus an empirical
//! competitive-ratio harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OkraError, Result};
use crate::model::{Instance, Item, Mode, Setup, ValueFunction};
use crate::offline::{offline, OfflineSolution};
use crate::ota::{default_family, fta_price, run, Policy};
use crate::thresholds::{ThresholdFamily, Variant};

/// Linear items of full size whose slopes climb from `L` to `p` in steps of
/// at most `epsilon`.
pub fn gen_cnd(setup: &Setup, p: f64, epsilon: f64) -> Result<Instance> {
    if setup.m() != 1 {
        return Err(OkraError::Precondition(format!("needs one knapsack, got {}", setup.m())));
    }
    if !(setup.l <= p && p <= setup.u) {
        return Err(OkraError::Range(format!("p = {p} outside [{}, {}]", setup.l, setup.u)));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(OkraError::Invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let c = setup.capacities[0];
    let steps = ((p - setup.l) / epsilon - 1e-9).ceil().max(0.0) as usize;
    let items = (0..=steps)
        .map(|k| {
            let v = if k == steps { p } else { setup.l + k as f64 * epsilon };
            Item::aggregate(c, vec![c], ValueFunction::linear(v))
        })
        .collect();
    Ok(Instance::new(setup.clone(), Mode::Aggregate, items))
}

/// Knapsacks split into a low group (the first `round(split * M)`, at
/// least one and at most `M - 1`) that the threshold policy leaves below
/// the end of its flat segment, and a high group that a rising tail of
/// items pushes well above it. The split is checked by running the policy.
pub fn gen_case3(setup: &Setup, split: f64) -> Result<Instance> {
    let m = setup.m();
    if m < 2 {
        return Err(OkraError::Precondition(format!("needs at least two knapsacks, got {m}")));
    }
    if !(0.0..=1.0).contains(&split) {
        return Err(OkraError::Range(format!("split = {split} outside [0, 1]")));
    }
    let low = ((split * m as f64).round() as usize).clamp(1, m - 1);
    let fam = ThresholdFamily::build(Variant::FomkpAggregate, setup)?;
    let mut items = Vec::new();
    for k in 0..low {
        let size = 0.5 * fam.betas[k];
        let mut rates = vec![0.0; m];
        rates[k] = size;
        items.push(Item::aggregate(size, rates, ValueFunction::linear(setup.l)));
    }
    let high_caps: Vec<f64> = (0..m).map(|k| if k < low { 0.0 } else { setup.capacities[k] }).collect();
    let total: f64 = high_caps.iter().sum();
    let steps = 50;
    let theta = setup.theta();
    for j in 1..=steps {
        let v = (setup.l * theta.powf(j as f64 / steps as f64)).min(setup.u);
        items.push(Item::aggregate(total, high_caps.clone(), ValueFunction::linear(v)));
    }
    let inst = Instance::new(setup.clone(), Mode::Aggregate, items);
    let res = run(&inst, &Policy::Ota(fam.clone()))?;
    let realized = (0..m).all(|k| {
        let w = res.utilization[k];
        if k < low {
            w < fam.betas[k]
        } else {
            w >= fam.betas[k]
        }
    });
    if !realized {
        return Err(OkraError::Invalid(format!(
            "split not realized: split={split}, low group={low}, utilization={:?}, betas={:?}",
            res.utilization, fam.betas
        )));
    }
    Ok(inst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Linear,
    Quadratic,
    Mixed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomSpec {
    pub n_items: usize,
    /// Item sizes are drawn uniformly from this range, as a fraction of the
    /// mean capacity.
    pub size_range: (f64, f64),
    /// Probability that an item may use a given knapsack.
    pub rate_density: f64,
    pub values: ValueKind,
    pub mode: Mode,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            n_items: 20,
            size_range: (0.05, 0.6),
            rate_density: 0.7,
            values: ValueKind::Mixed,
            mode: Mode::Aggregate,
        }
    }
}

fn random_value(rng: &mut ChaCha8Rng, setup: &Setup, size: f64, kind: ValueKind) -> ValueFunction {
    let theta = setup.theta();
    // log-uniform slopes cover the whole value range evenly in ratio terms
    let draw = |rng: &mut ChaCha8Rng| (setup.l * theta.powf(rng.gen::<f64>())).clamp(setup.l, setup.u);
    let quad = match kind {
        ValueKind::Linear => false,
        ValueKind::Quadratic => true,
        ValueKind::Mixed => rng.gen_bool(0.5),
    };
    let a = draw(rng);
    if !quad || size <= 0.0 {
        return ValueFunction::linear(a);
    }
    let end = setup.l + (a - setup.l) * rng.gen::<f64>();
    ValueFunction::quadratic(a, (a - end) / (2.0 * size))
}

/// Random instance, reproducible from `seed`.
pub fn gen_random(setup: &Setup, seed: u64, spec: &RandomSpec) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = setup.m();
    let mean_cap = setup.total_capacity() / m as f64;
    let (lo, hi) = spec.size_range;
    let mut items = Vec::with_capacity(spec.n_items);
    for _ in 0..spec.n_items {
        let size = mean_cap * (lo + (hi - lo) * rng.gen::<f64>());
        let mut rates: Vec<f64> = (0..m)
            .map(|_| if rng.gen_bool(spec.rate_density) { size * rng.gen_range(0.2..=1.0) } else { 0.0 })
            .collect();
        if rates.iter().all(|&r| r == 0.0) {
            let k = rng.gen_range(0..m);
            rates[k] = size;
        }
        let item = match spec.mode {
            Mode::Aggregate => Item::aggregate(size, rates, random_value(&mut rng, setup, size, spec.values)),
            Mode::Separable => {
                let gs = (0..m).map(|_| random_value(&mut rng, setup, size, spec.values)).collect();
                Item::separable(size, rates, gs)
            }
        };
        items.push(item);
    }
    let inst = Instance::new(setup.clone(), spec.mode, items);
    let v = inst.validate();
    if v.is_empty() {
        Ok(inst)
    } else {
        Err(OkraError::Validation(v))
    }
}

/// Offline-to-online value ratio; unbounded ratios are kept symbolic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Ratio {
    Finite(f64),
    Infinite,
}

impl Ratio {
    pub fn of(offline: f64, online: f64) -> Ratio {
        let tiny = 1e-12 * offline.abs().max(1.0);
        if online <= tiny {
            if offline <= tiny {
                Ratio::Finite(1.0)
            } else {
                Ratio::Infinite
            }
        } else {
            Ratio::Finite(offline / online)
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Ratio::Finite(r) => *r,
            Ratio::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Ratio::Finite(r) => write!(f, "{r}"),
            Ratio::Infinite => f.write_str("inf"),
        }
    }
}

/// What to measure in [`empirical_cr`]; families are built per instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Harness {
    /// Threshold policy; `None` picks the family matching the instance.
    Ota(Option<Variant>),
    OtaIntegral(Option<Variant>),
    /// Fixed price; `None` uses the geometric mean of the value bounds.
    Fta(Option<f64>),
    /// Replays the oracle's own solution.
    OfflineReplay,
}

impl Harness {
    pub fn parse(name: &str, c: f64) -> Result<Harness> {
        Ok(match name {
            "ota" => Harness::Ota(None),
            "ota-integral" | "ota_integral" => Harness::OtaIntegral(None),
            "fta" => Harness::Fta(None),
            "offline" | "offline-replay" | "offline_replay" => Harness::OfflineReplay,
            other => match other.strip_prefix("ota:") {
                Some(v) => Harness::Ota(Some(Variant::parse(v, c)?)),
                None => return Err(OkraError::Invalid(format!("unknown policy {other:?}"))),
            },
        })
    }

    fn policy(&self, inst: &Instance) -> Result<Option<Policy>> {
        let fam = |v: &Option<Variant>| match v {
            Some(v) => ThresholdFamily::build(v.clone(), &inst.setup),
            None => default_family(inst),
        };
        Ok(match self {
            Harness::Ota(v) => Some(Policy::Ota(fam(v)?)),
            Harness::OtaIntegral(v) => Some(Policy::OtaIntegral(fam(v)?)),
            Harness::Fta(p) => Some(Policy::Fta { price: p.unwrap_or_else(|| fta_price(&inst.setup)) }),
            Harness::OfflineReplay => None,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceRatio {
    pub instance: usize,
    pub offline_value: f64,
    pub online_value: f64,
    pub offline_gap: f64,
    pub ratio: Ratio,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrReport {
    pub max_ratio: Ratio,
    pub argmax: Option<usize>,
    pub per_instance: Vec<InstanceRatio>,
}

fn one(h: &Harness, i: usize, inst: &Instance) -> Result<InstanceRatio> {
    let tag = |e: OkraError| match e {
        OkraError::NonConvergence(m) => OkraError::NonConvergence(format!("instance {i}: {m}")),
        other => other,
    };
    let off: OfflineSolution = offline(inst).map_err(tag)?;
    if !off.converged {
        return Err(OkraError::NonConvergence(format!(
            "instance {i}: offline gap {:.3e} on value {:.6e}",
            off.gap, off.value
        )));
    }
    let online = match h.policy(inst)? {
        Some(p) => run(inst, &p)?.online_value,
        None => inst.objective(&off.allocation),
    };
    Ok(InstanceRatio {
        instance: i,
        offline_value: off.value,
        online_value: online,
        offline_gap: off.gap,
        ratio: Ratio::of(off.value, online),
    })
}

/// Worst offline-to-online ratio over `instances`. Instances are evaluated
/// in parallel; the result does not depend on the thread count.
pub fn empirical_cr(h: &Harness, instances: &[Instance]) -> Result<CrReport> {
    let per: Vec<InstanceRatio> =
        instances.par_iter().enumerate().map(|(i, inst)| one(h, i, inst)).collect::<Result<_>>()?;
    let mut best: Option<(usize, Ratio)> = None;
    for r in &per {
        if best.map_or(true, |(_, b)| r.ratio.value() > b.value()) {
            best = Some((r.instance, r.ratio));
        }
    }
    Ok(CrReport {
        max_ratio: best.map_or(Ratio::Finite(1.0), |b| b.1),
        argmax: best.map(|b| b.0),
        per_instance: per,
    })
}

/// Largest increment between successive slopes when every item has a
/// linear value and the slopes never decrease; `None` otherwise. This is
/// the measured `epsilon` of a non-decreasing family.
pub fn max_increment(inst: &Instance) -> Option<f64> {
    let slopes: Vec<f64> = inst
        .items
        .iter()
        .map(|it| match &it.value {
            crate::model::ItemValue::Aggregate(ValueFunction::Linear { slope }) => Some(*slope),
            _ => None,
        })
        .collect::<Option<_>>()?;
    let mut worst = 0.0f64;
    for w in slopes.windows(2) {
        let d = w[1] - w[0];
        if d < 0.0 {
            return None;
        }
        worst = worst.max(d);
    }
    Some(worst)
}

/// `p` values spread geometrically over `[L, U]`.
pub fn p_grid(setup: &Setup, points: usize) -> Vec<f64> {
    let theta = setup.theta();
    (0..points)
        .map(|i| {
            if points == 1 {
                return setup.u;
            }
            let t = i as f64 / (points - 1) as f64;
            (setup.l * theta.powf(t)).min(setup.u)
        })
        .collect()
}
