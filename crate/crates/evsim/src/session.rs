//! Charging sessions: CSV ingestion, synthetic generation and export.

use std::io::{Read, Write};
use std::path::Path;

use okra_core::{OkraError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub day: u32,
    pub arrival_slot: usize,
    /// Last slot the vehicle is plugged in (inclusive).
    pub departure_slot: usize,
    /// Requested energy.
    pub demand: f64,
    /// Maximum energy per slot.
    pub rate_limit: f64,
}

impl Session {
    pub fn window(&self) -> usize {
        self.departure_slot - self.arrival_slot + 1
    }

    pub fn present(&self, slot: usize) -> bool {
        self.arrival_slot <= slot && slot <= self.departure_slot
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub slots: usize,
    /// When set, `arrival`/`departure` are times in hours and are bucketed
    /// into slots of this length; without a `day` column the day is taken
    /// from the arrival time. When unset they are slot indices.
    pub slot_length: Option<f64>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { slots: 24, slot_length: None }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadReport {
    pub sessions: Vec<Session>,
    /// Rows whose departure precedes their arrival.
    pub dropped_window: usize,
    /// Rows with non-positive demand or rate.
    pub dropped_nonpositive: usize,
    /// Rows whose departure ran past the last slot of the day.
    pub clipped: usize,
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

pub fn read_sessions<R: Read>(reader: R, opts: &LoadOptions) -> Result<LoadReport> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(OkraError::Row { row: 1, message: e.to_string() }),
    };
    let mut out = LoadReport::default();
    if headers.is_empty() {
        return Ok(out);
    }
    let need = |name: &str| {
        column(&headers, name).ok_or_else(|| OkraError::Row { row: 1, message: format!("missing column {name:?}") })
    };
    let (ia, id, idem, ir) = (need("arrival")?, need("departure")?, need("demand")?, need("rate")?);
    let iday = column(&headers, "day");
    let m = opts.slots;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| OkraError::Row { row, message: e.to_string() })?;
        let num = |idx: usize, what: &str| -> Result<f64> {
            let raw = rec.get(idx).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| OkraError::Row { row, message: format!("bad {what} {raw:?}") })
        };
        let (a, d, demand, rate) = (num(ia, "arrival")?, num(id, "departure")?, num(idem, "demand")?, num(ir, "rate")?);
        let day_col = match iday {
            Some(k) => {
                let v = num(k, "day")?;
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(OkraError::Row { row, message: format!("bad day {v}") });
                }
                Some(v as u32)
            }
            None => None,
        };
        if a < 0.0 {
            return Err(OkraError::Row { row, message: format!("negative arrival {a}") });
        }
        let (day, arr, dep) = match opts.slot_length {
            Some(len) => {
                let abs_a = (a / len).floor() as i64;
                let abs_d = (d / len).ceil() as i64 - 1;
                let day = day_col.unwrap_or((abs_a / m as i64) as u32);
                let base = if day_col.is_some() { 0 } else { day as i64 * m as i64 };
                (day, abs_a - base, abs_d - base)
            }
            None => {
                if a.fract() != 0.0 || d.fract() != 0.0 {
                    return Err(OkraError::Row { row, message: "slot indices must be integers".into() });
                }
                (day_col.unwrap_or(0), a as i64, d as i64)
            }
        };
        if arr >= m as i64 {
            return Err(OkraError::Row { row, message: format!("arrival slot {arr} beyond {m} slots") });
        }
        if dep < arr {
            out.dropped_window += 1;
            continue;
        }
        if !(demand > 0.0 && rate > 0.0) {
            out.dropped_nonpositive += 1;
            continue;
        }
        let dep = if dep >= m as i64 {
            out.clipped += 1;
            m as i64 - 1
        } else {
            dep
        };
        out.sessions.push(Session {
            day,
            arrival_slot: arr as usize,
            departure_slot: dep as usize,
            demand,
            rate_limit: rate,
        });
    }
    if out.dropped_window + out.dropped_nonpositive > 0 {
        log::warn!(
            "dropped {} sessions with departure before arrival and {} with non-positive demand or rate",
            out.dropped_window,
            out.dropped_nonpositive
        );
    }
    if out.clipped > 0 {
        log::warn!("clipped {} departures to the last slot", out.clipped);
    }
    Ok(out)
}

pub fn load_sessions(path: &Path, opts: &LoadOptions) -> Result<LoadReport> {
    let f = std::fs::File::open(path)?;
    read_sessions(f, opts)
}

pub fn write_sessions<W: Write>(writer: W, sessions: &[Session]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| OkraError::Io(std::io::Error::new(std::io::ErrorKind::Other, e));
    w.write_record(["day", "arrival", "departure", "demand", "rate"]).map_err(io)?;
    for s in sessions {
        w.write_record([
            s.day.to_string(),
            s.arrival_slot.to_string(),
            s.departure_slot.to_string(),
            format!("{}", s.demand),
            format!("{}", s.rate_limit),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_sessions(path: &Path, sessions: &[Session]) -> Result<()> {
    write_sessions(std::fs::File::create(path)?, sessions)
}

/// Workplace-style synthetic trace: mostly morning arrivals, stays of two
/// to ten slots, 3.3-7 kW chargers, demands between 30% and 100% of what
/// the window allows. Demands and rates are rounded to 0.01.
pub fn gen_sessions(n: usize, days: u32, slots: usize, seed: u64) -> Vec<Session> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let morning: Normal<f64> = Normal::new(8.0, 1.5).expect("valid normal");
    let last = slots.saturating_sub(1);
    let mut out: Vec<Session> = (0..n)
        .map(|_| {
            let day = rng.gen_range(0..days.max(1));
            let arr = if rng.gen_bool(0.7) {
                morning.sample(&mut rng).round().clamp(0.0, last as f64) as usize
            } else {
                rng.gen_range(0..=last.saturating_sub(3))
            };
            let stay = rng.gen_range(2..=10usize);
            let dep = (arr + stay - 1).min(last);
            let rate = (rng.gen_range(3.3..7.0f64) * 100.0).round() / 100.0;
            let window = (dep - arr + 1) as f64;
            let demand = ((rate * window * rng.gen_range(0.3..1.0)) * 100.0).round().max(1.0) / 100.0;
            Session { day, arrival_slot: arr, departure_slot: dep, demand, rate_limit: rate }
        })
        .collect();
    out.sort_by_key(|s| (s.day, s.arrival_slot));
    out
}

/// Sessions grouped by day, in day order, each in arrival order (stable).
pub fn by_day(sessions: &[Session]) -> Vec<(u32, Vec<Session>)> {
    let mut days: std::collections::BTreeMap<u32, Vec<Session>> = Default::default();
    for s in sessions {
        days.entry(s.day).or_default().push(s.clone());
    }
    days.into_iter()
        .map(|(d, mut v)| {
            v.sort_by_key(|s| s.arrival_slot);
            (d, v)
        })
        .collect()
}
