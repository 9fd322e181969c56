//! The `okra` command line: argument definitions and command handlers.
//!
//! Every command is deterministic given its flags, input files and
//! `--seed`. JSON output is canonical (sorted keys, floats rounded to 12
//! significant digits) so it can be diffed byte for byte.

pub mod verify;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use okra_core::adversary::{
    empirical_cr, gen_case3, gen_cnd, gen_random, max_increment, p_grid, Harness, RandomSpec, ValueKind,
};
use okra_core::io::{instance_to_csv, instance_to_json, load_instance, to_canonical_json};
use okra_core::offline::{brute_force, offline};
use okra_core::ota::{default_family, fta_price, run, Policy};
use okra_core::thresholds::{
    aggregate_equation, ratio_variant2, separable_equation, variant1_equation, ThresholdFamily, Variant,
};
use okra_core::{Allocation, Instance, Mode, OkraError, Setup};
use okra_evsim::{Congestion, EvValues, LoadOptions, SimConfig};
use serde::Serialize;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "okra", version, about = "Online fractional knapsack with rate limits: thresholds, policies, oracles")]
pub struct Cli {
    /// Root seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output file (or directory, for commands that write several files).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutFormat>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutFormat {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Competitive ratio of one threshold family.
    Ratio(RatioArgs),
    /// Ratios of several families over a theta grid.
    RatioCurve(CurveArgs),
    /// Run an online policy on an instance file.
    Run(RunArgs),
    /// Offline optimum of an instance file, with its duality gap.
    Offline(OfflineArgs),
    /// Generate adversarial or random instances.
    Adversary(AdversaryArgs),
    /// Offline-to-online ratios over a set of instance files.
    EmpiricalCr(CrArgs),
    /// EV charging comparison on a session trace.
    Simulate(SimArgs),
    /// Numerically verify a threshold family.
    Verify(VerifyArgs),
    /// Write a synthetic session trace.
    GenSessions(GenArgs),
}

#[derive(Debug, Args)]
pub struct RatioArgs {
    /// got, got-variant1, got-variant2, fomkp-aggregate or fomkp-separable.
    #[arg(long, default_value = "got")]
    pub family: String,
    #[arg(long)]
    pub theta: f64,
    /// Average-value relaxation parameter (got-variant2 only).
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[arg(long, value_delimiter = ',', default_value = "got,fomkp-aggregate,fomkp-separable")]
    pub families: Vec<String>,
    #[arg(long, default_value_t = 1.0)]
    pub theta_min: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub theta_max: f64,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// ota, ota-integral or fta.
    #[arg(long, default_value = "ota")]
    pub policy: String,
    /// Threshold family; defaults to the one matching the instance mode.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Fixed price for fta; defaults to sqrt(L U).
    #[arg(long)]
    pub price: Option<f64>,
    /// Skip the offline optimum and the ratio.
    #[arg(long)]
    pub no_offline: bool,
}

#[derive(Debug, Args)]
pub struct OfflineArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Also run the exhaustive grid search with this many steps.
    #[arg(long)]
    pub brute_force: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdversaryKind {
    Cnd,
    Case3,
    Random,
}

#[derive(Debug, Args)]
pub struct AdversaryArgs {
    #[arg(long, value_enum)]
    pub kind: AdversaryKind,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub capacities: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub lower: f64,
    #[arg(long, default_value_t = 36.0)]
    pub upper: f64,
    /// Final value of the non-decreasing family (cnd).
    #[arg(long)]
    pub p: Option<f64>,
    /// Step of the non-decreasing family; defaults to (U - L) / 500.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Write one cnd instance per point of a geometric p grid.
    #[arg(long)]
    pub p_points: Option<usize>,
    /// Share of knapsacks left under-utilised (case3).
    #[arg(long, default_value_t = 0.5)]
    pub split: f64,
    #[arg(long, default_value_t = 20)]
    pub items: usize,
    /// linear, quadratic or mixed (random).
    #[arg(long, default_value = "mixed")]
    pub values: String,
    /// aggregate or separable (random).
    #[arg(long, default_value = "aggregate")]
    pub mode: String,
    /// Number of random instances (seeds seed, seed+1, ...).
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct CrArgs {
    /// ota, ota:<family>, ota-integral, fta or offline-replay.
    #[arg(long, default_value = "ota")]
    pub policy: String,
    /// Directory of instance files (.json or .csv), or a single file.
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub price: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub sessions: PathBuf,
    #[arg(long, default_value_t = 24)]
    pub slots: usize,
    #[arg(long, default_value_t = 36.0)]
    pub theta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lower: f64,
    /// low, medium, high, or a coverage fraction.
    #[arg(long, default_value = "high")]
    pub congestion: String,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Policies to compare; both are always needed for the improvement
    /// figures, so only ota and fta are accepted.
    #[arg(long, value_delimiter = ',', default_value = "ota,fta")]
    pub policy_set: Vec<String>,
    /// linear, quadratic or classes9.
    #[arg(long, default_value = "linear")]
    pub values: String,
    #[arg(long)]
    pub adaptive: bool,
    /// Session times are hours, bucketed into slots of this many hours.
    #[arg(long)]
    pub slot_length: Option<f64>,
    /// Fixed per-slot capacity instead of the congestion calibration.
    #[arg(long)]
    pub capacity: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "got")]
    pub family: String,
    /// Comma-separated; `e` is accepted.
    #[arg(long, value_delimiter = ',', default_value = "e,10,36")]
    pub thetas: Vec<String>,
    /// Scale the claimed ratio (e.g. 0.95 as a negative control).
    #[arg(long, default_value_t = 1.0)]
    pub alpha_scale: f64,
    #[arg(long, default_value_t = 10_000)]
    pub grid: usize,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 2000)]
    pub count: usize,
    #[arg(long, default_value_t = 90)]
    pub days: u32,
    #[arg(long, default_value_t = 24)]
    pub slots: usize,
}

/// How a successful invocation ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
}

/// Exit code for an error: 2 for bad input, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<OkraError>() {
            return if e.is_input_error() { 2 } else { 1 };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() || cause.is::<csv::Error>() {
            return 2;
        }
    }
    1
}

fn input(msg: impl Into<String>) -> anyhow::Error {
    OkraError::Invalid(msg.into()).into()
}

fn write_out(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn csv_text<F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>>(f: F) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    f(&mut w)?;
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?)?)
}

fn allocation_csv(y: &Allocation) -> anyhow::Result<String> {
    csv_text(|w| {
        let m = y.first().map_or(0, |r| r.len());
        let mut head = vec!["item".to_string()];
        head.extend((0..m).map(|k| format!("y{k}")));
        w.write_record(&head)?;
        for (n, row) in y.iter().enumerate() {
            let mut rec = vec![n.to_string()];
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

fn parse_theta(s: &str) -> anyhow::Result<f64> {
    match s.trim() {
        "e" => Ok(std::f64::consts::E),
        t => t.parse().map_err(|_| input(format!("bad theta {t:?}"))),
    }
}

fn ratio_record(v: &Variant, theta: f64) -> anyhow::Result<serde_json::Value> {
    let alpha = v.ratio(theta)?;
    let mut rec = json!({ "family": v.name(), "theta": theta, "alpha": alpha });
    let residual = match v {
        Variant::Got => 0.0,
        Variant::GotVariant1 => variant1_equation(alpha, theta),
        Variant::FomkpAggregate => aggregate_equation(alpha, theta),
        Variant::FomkpSeparable => separable_equation(alpha, theta),
        Variant::GotVariant2 { c } => {
            let r = ratio_variant2(*c, theta)?;
            rec["c"] = json!(c);
            rec["beta_fraction"] = json!(r.beta_fraction);
            rec["w"] = json!(r.w);
            rec["w_residual"] = json!(r.w_residual);
            r.w_residual
        }
    };
    rec["residual"] = json!(residual);
    Ok(rec)
}

fn cmd_ratio(cli: &Cli, a: &RatioArgs) -> anyhow::Result<Status> {
    let v = Variant::parse(&a.family, a.c)?;
    let rec = ratio_record(&v, a.theta)?;
    let text = match cli.format.unwrap_or(OutFormat::Json) {
        OutFormat::Json => to_canonical_json(&rec),
        OutFormat::Csv => csv_text(|w| {
            w.write_record(["family", "theta", "alpha", "residual"])?;
            w.write_record([v.name().to_string(), format!("{}", a.theta), format!("{}", rec["alpha"]), format!("{}", rec["residual"])])
        })?,
    };
    write_out(cli.out.as_deref(), &text)?;
    Ok(Status::Ok)
}

fn cmd_curve(cli: &Cli, a: &CurveArgs) -> anyhow::Result<Status> {
    if a.points == 0 || !(a.theta_min >= 1.0) || !(a.theta_max >= a.theta_min) {
        return Err(input("need points > 0 and 1 <= theta-min <= theta-max"));
    }
    let variants: Vec<Variant> = a.families.iter().map(|f| Variant::parse(f, a.c)).collect::<Result<_, _>>()?;
    let thetas: Vec<f64> = (0..a.points)
        .map(|i| {
            if a.points == 1 {
                a.theta_min
            } else {
                a.theta_min * (a.theta_max / a.theta_min).powf(i as f64 / (a.points - 1) as f64)
            }
        })
        .collect();
    // families undefined at a given theta (e.g. theta = 1 for some) are left empty
    let rows: Vec<(f64, Vec<Option<f64>>)> =
        thetas.iter().map(|&t| (t, variants.iter().map(|v| v.ratio(t).ok()).collect())).collect();
    let text = match cli.format.unwrap_or(OutFormat::Csv) {
        OutFormat::Csv => csv_text(|w| {
            let mut head = vec!["theta".to_string()];
            head.extend(variants.iter().map(|v| v.name().to_string()));
            w.write_record(&head)?;
            for (t, vals) in &rows {
                let mut rec = vec![format!("{t}")];
                rec.extend(vals.iter().map(|v| v.map(|x| format!("{x}")).unwrap_or_default()));
                w.write_record(&rec)?;
            }
            Ok(())
        })?,
        OutFormat::Json => {
            let arr: Vec<serde_json::Value> = rows
                .iter()
                .map(|(t, vals)| {
                    let mut o = serde_json::Map::new();
                    o.insert("theta".into(), json!(t));
                    for (v, x) in variants.iter().zip(vals) {
                        o.insert(v.name().into(), json!(x));
                    }
                    serde_json::Value::Object(o)
                })
                .collect();
            to_canonical_json(&arr)
        }
    };
    write_out(cli.out.as_deref(), &text)?;
    Ok(Status::Ok)
}

fn family_for(inst: &Instance, name: &Option<String>, c: f64) -> anyhow::Result<ThresholdFamily> {
    Ok(match name {
        Some(n) => ThresholdFamily::build(Variant::parse(n, c)?, &inst.setup)?,
        None => default_family(inst)?,
    })
}

fn cmd_run(cli: &Cli, a: &RunArgs) -> anyhow::Result<Status> {
    let inst = load_instance(&a.instance)?;
    let (policy, fam) = match a.policy.replace('_', "-").as_str() {
        "ota" => {
            let f = family_for(&inst, &a.family, a.c)?;
            (Policy::Ota(f.clone()), Some(f))
        }
        "ota-integral" => {
            let f = family_for(&inst, &a.family, a.c)?;
            (Policy::OtaIntegral(f.clone()), Some(f))
        }
        "fta" => (Policy::Fta { price: a.price.unwrap_or_else(|| fta_price(&inst.setup)) }, None),
        other => return Err(input(format!("unknown policy {other:?}"))),
    };
    let res = run(&inst, &policy)?;
    if cli.format == Some(OutFormat::Csv) {
        write_out(cli.out.as_deref(), &allocation_csv(&res.allocation)?)?;
        return Ok(Status::Ok);
    }
    let mut rec = json!({
        "policy": policy.name(),
        "allocation": res.allocation,
        "utilization": res.utilization,
        "online_value": res.online_value,
        "pseudo_utilities": res.pseudo_utilities,
    });
    if let Some(f) = &fam {
        rec["family"] = json!(f.variant.name());
        rec["alpha"] = json!(f.alpha);
    }
    if let Policy::Fta { price } = policy {
        rec["price"] = json!(price);
    }
    if !a.no_offline {
        let off = offline(&inst)?;
        rec["offline_value"] = json!(off.value);
        rec["offline_gap"] = json!(off.gap);
        rec["ratio"] = serde_json::to_value(okra_core::adversary::Ratio::of(off.value, res.online_value))?;
    }
    write_out(cli.out.as_deref(), &to_canonical_json(&rec))?;
    Ok(Status::Ok)
}

fn cmd_offline(cli: &Cli, a: &OfflineArgs) -> anyhow::Result<Status> {
    let inst = load_instance(&a.instance)?;
    let sol = offline(&inst)?;
    if cli.format == Some(OutFormat::Csv) {
        write_out(cli.out.as_deref(), &allocation_csv(&sol.allocation)?)?;
        return Ok(Status::Ok);
    }
    let mut rec = serde_json::to_value(&sol)?;
    if let Some(grid) = a.brute_force {
        rec["brute_force"] = serde_json::to_value(brute_force(&inst, grid)?)?;
    }
    write_out(cli.out.as_deref(), &to_canonical_json(&rec))?;
    Ok(Status::Ok)
}

fn write_instances(cli: &Cli, insts: &[Instance]) -> anyhow::Result<()> {
    let fmt = cli.format.unwrap_or(OutFormat::Json);
    let render = |i: &Instance| match fmt {
        OutFormat::Json => instance_to_json(i),
        OutFormat::Csv => instance_to_csv(i),
    };
    if insts.len() == 1 {
        return write_out(cli.out.as_deref(), &render(&insts[0]));
    }
    let dir = cli.out.as_deref().ok_or_else(|| input("--out <dir> is required for several instances"))?;
    std::fs::create_dir_all(dir)?;
    let ext = if fmt == OutFormat::Json { "json" } else { "csv" };
    for (i, inst) in insts.iter().enumerate() {
        std::fs::write(dir.join(format!("instance_{i:04}.{ext}")), render(inst))?;
    }
    Ok(())
}

fn cmd_adversary(cli: &Cli, a: &AdversaryArgs) -> anyhow::Result<Status> {
    let setup = Setup::new(a.capacities.clone(), a.lower, a.upper);
    let v = setup_problems(&setup);
    if !v.is_empty() {
        return Err(OkraError::Validation(v).into());
    }
    let insts = match a.kind {
        AdversaryKind::Cnd => {
            let eps = a.epsilon.unwrap_or((a.upper - a.lower) / 500.0);
            let ps = match (a.p, a.p_points) {
                (_, Some(n)) => p_grid(&setup, n),
                (Some(p), None) => vec![p],
                (None, None) => vec![a.upper],
            };
            ps.iter().map(|&p| gen_cnd(&setup, p, eps)).collect::<Result<Vec<_>, _>>()?
        }
        AdversaryKind::Case3 => vec![gen_case3(&setup, a.split)?],
        AdversaryKind::Random => {
            let values = match a.values.as_str() {
                "linear" => ValueKind::Linear,
                "quadratic" => ValueKind::Quadratic,
                "mixed" => ValueKind::Mixed,
                other => return Err(input(format!("unknown value kind {other:?}"))),
            };
            let mode = match a.mode.as_str() {
                "aggregate" => Mode::Aggregate,
                "separable" => Mode::Separable,
                other => return Err(input(format!("unknown mode {other:?}"))),
            };
            let spec = RandomSpec { n_items: a.items, values, mode, ..RandomSpec::default() };
            (0..a.count as u64).map(|k| gen_random(&setup, cli.seed + k, &spec)).collect::<Result<Vec<_>, _>>()?
        }
    };
    write_instances(cli, &insts)?;
    Ok(Status::Ok)
}

fn setup_problems(s: &Setup) -> Vec<String> {
    Instance::new(s.clone(), Mode::Aggregate, vec![]).validate()
}

fn instance_files(path: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json") | Some("csv")))
        .collect();
    files.sort();
    Ok(files)
}

#[derive(Serialize)]
struct CrRow {
    instance: String,
    offline_value: f64,
    online_value: f64,
    offline_gap: f64,
    ratio: String,
    epsilon: Option<f64>,
}

fn cmd_empirical_cr(cli: &Cli, a: &CrArgs) -> anyhow::Result<Status> {
    let mut harness = Harness::parse(&a.policy.replace('_', "-"), a.c)?;
    if let (Harness::Fta(_), Some(p)) = (&harness, a.price) {
        harness = Harness::Fta(Some(p));
    }
    let files = instance_files(&a.instances)?;
    if files.is_empty() {
        return Err(input(format!("no instance files in {}", a.instances.display())));
    }
    let insts: Vec<Instance> = files
        .iter()
        .map(|f| load_instance(f).with_context(|| format!("loading {}", f.display())))
        .collect::<anyhow::Result<_>>()?;
    let rep = empirical_cr(&harness, &insts)?;
    let rows: Vec<CrRow> = rep
        .per_instance
        .iter()
        .map(|r| CrRow {
            instance: files[r.instance].file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            offline_value: r.offline_value,
            online_value: r.online_value,
            offline_gap: r.offline_gap,
            ratio: r.ratio.to_string(),
            epsilon: max_increment(&insts[r.instance]),
        })
        .collect();
    log::info!("max ratio {} over {} instances", rep.max_ratio, rows.len());
    let text = match cli.format.unwrap_or(OutFormat::Csv) {
        OutFormat::Csv => csv_text(|w| {
            w.write_record(["instance", "offline_value", "online_value", "offline_gap", "ratio", "epsilon"])?;
            for r in &rows {
                w.write_record([
                    r.instance.clone(),
                    format!("{}", r.offline_value),
                    format!("{}", r.online_value),
                    format!("{}", r.offline_gap),
                    r.ratio.clone(),
                    r.epsilon.map(|e| format!("{e}")).unwrap_or_default(),
                ])?;
            }
            Ok(())
        })?,
        OutFormat::Json => to_canonical_json(&json!({
            "policy": a.policy,
            "max_ratio": rep.max_ratio,
            "argmax": rep.argmax.map(|i| rows[i].instance.clone()),
            "instances": rows,
        })),
    };
    write_out(cli.out.as_deref(), &text)?;
    Ok(Status::Ok)
}

fn cmd_simulate(cli: &Cli, a: &SimArgs) -> anyhow::Result<Status> {
    for p in &a.policy_set {
        if p != "ota" && p != "fta" {
            return Err(input(format!("unknown policy {p:?} in --policy-set")));
        }
    }
    let loaded = okra_evsim::load_sessions(&a.sessions, &LoadOptions { slots: a.slots, slot_length: a.slot_length })
        .with_context(|| format!("loading {}", a.sessions.display()))?;
    let cfg = SimConfig {
        slots: a.slots,
        theta: a.theta,
        l: a.lower,
        congestion: Congestion::parse(&a.congestion)?,
        trials: a.trials,
        seed: cli.seed,
        values: EvValues::parse(&a.values)?,
        adaptive: a.adaptive,
        capacity_per_slot: a.capacity,
    };
    let rep = okra_evsim::run_comparison(&cfg, &loaded.sessions)?;
    match cli.out.as_deref() {
        Some(dir) => okra_evsim::emit(&rep, dir)?,
        None => print!("{}", to_canonical_json(&rep.summary)),
    }
    Ok(Status::Ok)
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> anyhow::Result<Status> {
    let v = Variant::parse(&a.family, a.c)?;
    let thetas: Vec<f64> = a.thetas.iter().filter(|s| !s.trim().is_empty()).map(|s| parse_theta(s)).collect::<anyhow::Result<_>>()?;
    let rep = verify::verify(&v, &thetas, a.alpha_scale, a.grid)?;
    for c in rep.failures() {
        log::error!("theta {}: {} = {:.3e} exceeds {:.3e}", c.theta, c.name, c.value, c.tolerance);
    }
    let text = match cli.format.unwrap_or(OutFormat::Json) {
        OutFormat::Json => to_canonical_json(&rep),
        OutFormat::Csv => csv_text(|w| {
            w.write_record(["theta", "check", "value", "tolerance", "pass"])?;
            for c in &rep.checks {
                w.write_record([
                    format!("{}", c.theta),
                    c.name.to_string(),
                    format!("{}", c.value),
                    format!("{}", c.tolerance),
                    c.pass.to_string(),
                ])?;
            }
            Ok(())
        })?,
    };
    write_out(cli.out.as_deref(), &text)?;
    Ok(if rep.passed { Status::Ok } else { Status::VerificationFailed })
}

fn cmd_gen_sessions(cli: &Cli, a: &GenArgs) -> anyhow::Result<Status> {
    if a.slots < 4 || a.days == 0 {
        bail!(input("need at least 4 slots and one day"));
    }
    let s = okra_evsim::gen_sessions(a.count, a.days, a.slots, cli.seed);
    let mut buf = Vec::new();
    okra_evsim::session::write_sessions(&mut buf, &s)?;
    write_out(cli.out.as_deref(), &String::from_utf8(buf)?)?;
    Ok(Status::Ok)
}

pub fn execute(cli: &Cli) -> anyhow::Result<Status> {
    match &cli.command {
        Command::Ratio(a) => cmd_ratio(cli, a),
        Command::RatioCurve(a) => cmd_curve(cli, a),
        Command::Run(a) => cmd_run(cli, a),
        Command::Offline(a) => cmd_offline(cli, a),
        Command::Adversary(a) => cmd_adversary(cli, a),
        Command::EmpiricalCr(a) => cmd_empirical_cr(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Verify(a) => cmd_verify(cli, a),
        Command::GenSessions(a) => cmd_gen_sessions(cli, a),
    }
}
