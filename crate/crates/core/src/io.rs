//! Instance (de)serialisation and canonical JSON output.
//!
//! JSON instances round-trip bit-exactly. The CSV form carries the setup in a
//! leading `# setup` comment line followed by a header and one row per item:
//!
//! ```text
//! # setup capacities=10;10 L=1 U=36 mode=aggregate
//! size,rate_limits,kind,params
//! 4,2;4,linear,12
//! 3,3;0,quadratic,20;1.5
//! ```
//!
//! In separable mode `kind` and `params` hold one entry per knapsack joined
//! by `|`. A relaxed regime is declared with `regime=relaxed:<c>`.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{OkraError, Result};
use crate::model::{Instance, Item, ItemValue, Mode, Regime, Setup, ValueFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut off = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return off + column.saturating_sub(1).min(l.len());
        }
        off += l.len();
    }
    text.len()
}

fn validated(inst: Instance) -> Result<Instance> {
    let v = inst.validate();
    if v.is_empty() {
        Ok(inst)
    } else {
        Err(OkraError::Validation(v))
    }
}

pub fn parse_instance_json(text: &str) -> Result<Instance> {
    let inst: Instance = serde_json::from_str(text).map_err(|e| OkraError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    validated(inst)
}

pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(inst).expect("instance serialises")
}

fn nums(s: &str, sep: char, row: usize) -> Result<Vec<f64>> {
    s.split(sep)
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| OkraError::Row { row, message: format!("cannot parse number {t:?}") })
        })
        .collect()
}

fn value_from_csv(kind: &str, params: &[f64], size: f64, row: usize) -> Result<ValueFunction> {
    let bad = |msg: &str| OkraError::Row { row, message: msg.to_string() };
    match kind.trim() {
        "linear" => match params {
            [v] => Ok(ValueFunction::linear(*v)),
            _ => Err(bad("linear needs one parameter")),
        },
        "quadratic" => match params {
            [a, b] => Ok(ValueFunction::quadratic(*a, *b)),
            _ => Err(bad("quadratic needs two parameters")),
        },
        "general_concave" => {
            if params.len() < 2 {
                return Err(bad("general_concave needs at least two derivative samples"));
            }
            Ok(ValueFunction::GeneralConcave { domain_max: size, derivatives: params.to_vec() })
        }
        other => Err(bad(&format!("unknown value kind {other:?}"))),
    }
}

fn value_to_csv(g: &ValueFunction) -> (String, String) {
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(";");
    match g {
        ValueFunction::Linear { slope } => ("linear".into(), join(&[*slope])),
        ValueFunction::Quadratic { a, b } => ("quadratic".into(), join(&[*a, *b])),
        ValueFunction::GeneralConcave { derivatives, .. } => {
            ("general_concave".into(), join(derivatives))
        }
    }
}

fn parse_setup_line(line: &str) -> Result<(Setup, Mode, Regime)> {
    let bad = |m: String| OkraError::Row { row: 1, message: m };
    let body = line
        .trim_start_matches('#')
        .trim()
        .strip_prefix("setup")
        .ok_or_else(|| bad("first line must be a '# setup' directive".into()))?;
    let (mut caps, mut l, mut u) = (None, None, None);
    let mut mode = Mode::Aggregate;
    let mut regime = Regime::Standard;
    for tok in body.split_whitespace() {
        let (k, v) = tok.split_once('=').ok_or_else(|| bad(format!("malformed token {tok:?}")))?;
        match k {
            "capacities" => caps = Some(nums(v, ';', 1)?),
            "L" => l = Some(v.parse::<f64>().map_err(|_| bad(format!("bad L {v:?}")))?),
            "U" => u = Some(v.parse::<f64>().map_err(|_| bad(format!("bad U {v:?}")))?),
            "mode" => {
                mode = match v {
                    "aggregate" => Mode::Aggregate,
                    "separable" => Mode::Separable,
                    _ => return Err(bad(format!("unknown mode {v:?}"))),
                }
            }
            "regime" => {
                regime = if v == "standard" {
                    Regime::Standard
                } else if let Some(c) = v.strip_prefix("relaxed:") {
                    Regime::Relaxed { c: c.parse().map_err(|_| bad(format!("bad c {c:?}")))? }
                } else {
                    return Err(bad(format!("unknown regime {v:?}")));
                }
            }
            _ => return Err(bad(format!("unknown setup key {k:?}"))),
        }
    }
    match (caps, l, u) {
        (Some(c), Some(l), Some(u)) => Ok((Setup::new(c, l, u), mode, regime)),
        _ => Err(bad("setup needs capacities, L and U".into())),
    }
}

pub fn parse_instance_csv(text: &str) -> Result<Instance> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| OkraError::Row { row: 1, message: "empty file".into() })?;
    let (setup, mode, regime) = parse_setup_line(first)?;
    let header_offset = first.len() + 1;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text[header_offset.min(text.len())..].as_bytes());
    let mut items = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // rows are numbered from 1 counting the setup line and the header
        let row = i + 3;
        let rec = rec.map_err(|e| OkraError::Row { row, message: e.to_string() })?;
        if rec.len() != 4 {
            return Err(OkraError::Row { row, message: format!("expected 4 fields, got {}", rec.len()) });
        }
        let size: f64 = rec[0]
            .parse()
            .map_err(|_| OkraError::Row { row, message: format!("cannot parse size {:?}", &rec[0]) })?;
        let rate_limits = nums(&rec[1], ';', row)?;
        let value = match mode {
            Mode::Aggregate => {
                ItemValue::Aggregate(value_from_csv(&rec[2], &nums(&rec[3], ';', row)?, size, row)?)
            }
            Mode::Separable => {
                let kinds: Vec<&str> = rec[2].split('|').collect();
                let params: Vec<&str> = rec[3].split('|').collect();
                if kinds.len() != params.len() {
                    return Err(OkraError::Row { row, message: "kind/params count mismatch".into() });
                }
                let mut gs = Vec::new();
                for (k, p) in kinds.iter().zip(params) {
                    gs.push(value_from_csv(k, &nums(p, ';', row)?, size, row)?);
                }
                ItemValue::Separable(gs)
            }
        };
        items.push(Item { size, rate_limits, value });
    }
    validated(Instance { setup, mode, regime, items })
}

pub fn instance_to_csv(inst: &Instance) -> String {
    let s = &inst.setup;
    let caps = s.capacities.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join(";");
    let mode = match inst.mode {
        Mode::Aggregate => "aggregate",
        Mode::Separable => "separable",
    };
    let mut out = format!("# setup capacities={caps} L={:?} U={:?} mode={mode}", s.l, s.u);
    if let Regime::Relaxed { c } = inst.regime {
        out.push_str(&format!(" regime=relaxed:{c:?}"));
    }
    out.push('\n');
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["size", "rate_limits", "kind", "params"]).unwrap();
    for it in &inst.items {
        let rl = it.rate_limits.iter().map(|y| format!("{y:?}")).collect::<Vec<_>>().join(";");
        let (kind, params) = match &it.value {
            ItemValue::Aggregate(g) => value_to_csv(g),
            ItemValue::Separable(gs) => {
                let parts: Vec<(String, String)> = gs.iter().map(value_to_csv).collect();
                (
                    parts.iter().map(|p| p.0.as_str()).collect::<Vec<_>>().join("|"),
                    parts.iter().map(|p| p.1.as_str()).collect::<Vec<_>>().join("|"),
                )
            }
        };
        w.write_record([format!("{:?}", it.size), rl, kind, params]).unwrap();
    }
    out.push_str(&String::from_utf8(w.into_inner().unwrap()).unwrap());
    out
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    match Format::from_path(path) {
        Format::Json => parse_instance_json(&text),
        Format::Csv => parse_instance_csv(&text),
    }
}

pub fn save_instance(inst: &Instance, path: &Path) -> Result<()> {
    let text = match Format::from_path(path) {
        Format::Json => instance_to_json(inst),
        Format::Csv => instance_to_csv(inst),
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Round to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn canonicalise(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap());
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalise).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, canonicalise(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and floats rounded to 12 significant digits,
/// so that reruns produce byte-identical files.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("serialisable");
    let mut s = serde_json::to_string_pretty(&canonicalise(v)).expect("serialisable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Instance {
        Instance::new(
            Setup::new(vec![10.0, 7.5], 1.0, 36.0),
            Mode::Aggregate,
            vec![
                Item::aggregate(4.0, vec![2.0, 4.0], ValueFunction::linear(12.000000000000002)),
                Item::aggregate(3.0, vec![3.0, 0.0], ValueFunction::quadratic(20.0, 1.5)),
                Item::aggregate(
                    2.0,
                    vec![1.0, 1.0],
                    ValueFunction::GeneralConcave { domain_max: 2.0, derivatives: vec![30.0, 10.0, 2.0] },
                ),
            ],
        )
    }

    #[test]
    fn json_round_trip_is_exact() {
        let inst = sample();
        let back = parse_instance_json(&instance_to_json(&inst)).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn csv_round_trip() {
        let inst = sample();
        let back = parse_instance_csv(&instance_to_csv(&inst)).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn separable_csv_round_trip() {
        let inst = Instance::new(
            Setup::new(vec![5.0, 5.0], 1.0, 4.0),
            Mode::Separable,
            vec![Item::separable(
                2.0,
                vec![1.0, 2.0],
                vec![ValueFunction::linear(2.0), ValueFunction::quadratic(4.0, 0.5)],
            )],
        );
        assert_eq!(parse_instance_csv(&instance_to_csv(&inst)).unwrap(), inst);
    }

    #[test]
    fn csv_length_mismatch() {
        let text = "# setup capacities=1;1;1 L=1 U=2\nsize,rate_limits,kind,params\n1,1;1,linear,1.5\n";
        match parse_instance_csv(text) {
            Err(OkraError::Validation(v)) => assert!(v[0].contains("length mismatch")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_bad_number_reports_row() {
        let text = "# setup capacities=1 L=1 U=2\nsize,rate_limits,kind,params\n1,1,linear,1.5\nx,1,linear,1\n";
        match parse_instance_csv(text) {
            Err(OkraError::Row { row, .. }) => assert_eq!(row, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn json_u_below_l_fails_validation() {
        let text = r#"{"setup":{"capacities":[1.0],"L":2.0,"U":1.0},"mode":"aggregate","items":[]}"#;
        assert!(matches!(parse_instance_json(text), Err(OkraError::Validation(_))));
    }

    #[test]
    fn malformed_json_has_offset() {
        let text = "{\"setup\": {\"capacities\": [1.0,, ]}}";
        match parse_instance_json(text) {
            Err(OkraError::Parse { offset, .. }) => assert_eq!(&text[offset..offset + 1], ","),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn canonical_json_sorts_and_rounds() {
        #[derive(Serialize)]
        struct T {
            zeta: f64,
            alpha: f64,
        }
        let s = to_canonical_json(&T { zeta: 1.0 / 3.0, alpha: 2.0 });
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert!(s.contains("0.333333333333\n"), "{s}");
    }
}
