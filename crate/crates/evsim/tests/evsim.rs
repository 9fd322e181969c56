use std::path::Path;

use okra_core::ota::{default_family, fta_price, run, Policy};
use okra_core::TOL;
use okra_evsim::session::by_day;
use okra_evsim::*;
use proptest::prelude::*;

fn bundled() -> Vec<Session> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/synthetic_sessions.csv");
    let r = load_sessions(&path, &LoadOptions::default()).unwrap();
    assert_eq!((r.dropped_window, r.dropped_nonpositive, r.clipped), (0, 0, 0));
    r.sessions
}

#[test]
fn bundled_trace_shape() {
    let s = bundled();
    assert_eq!(s.len(), 2000);
    let days = by_day(&s);
    assert_eq!(days.len(), 90);
    for (_, day) in &days {
        for v in day {
            assert!(v.departure_slot < 24 && v.demand <= v.rate_limit * v.window() as f64 + 1e-9);
        }
        let cfg = SimConfig { congestion: Congestion::High, ..SimConfig::default() };
        let cap = capacity_for(day, &cfg).unwrap();
        let demand: f64 = day.iter().map(|v| v.demand).sum();
        assert!((24.0 * cap / demand - 0.027).abs() < 1e-12);
    }
}

fn day_strategy() -> impl Strategy<Value = Vec<Session>> {
    prop::collection::vec((0usize..20, 1usize..6, 0.2f64..1.0, 1.0f64..7.0), 1..25).prop_map(|raw| {
        raw.into_iter()
            .map(|(arr, stay, frac, rate)| {
                let dep = (arr + stay - 1).min(23);
                Session {
                    day: 0,
                    arrival_slot: arr,
                    departure_slot: dep,
                    demand: frac * rate * (dep - arr + 1) as f64,
                    rate_limit: rate,
                }
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjustment_is_feasible_and_monotone(
        day in day_strategy(),
        seed in any::<u64>(),
        coverage in 0.02f64..0.6,
        quadratic in any::<bool>(),
    ) {
        let cfg = SimConfig {
            congestion: Congestion::Custom(coverage),
            values: if quadratic { EvValues::Quadratic } else { EvValues::Linear },
            ..SimConfig::default()
        };
        let inst = build_instance(&day, &cfg, seed).unwrap();
        for policy in [Policy::Ota(default_family(&inst).unwrap()), Policy::Fta { price: fta_price(&inst.setup) }] {
            let res = run(&inst, &policy).unwrap();
            let adj = adaptive_adjust(&res, &inst);
            prop_assert!(inst.check_allocation(&adj.allocation, TOL).is_empty());
            prop_assert!(adj.online_value >= res.online_value - 1e-12);
            for (a, b) in adj.allocation.iter().zip(&res.allocation) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!(x + 1e-12 >= *y);
                }
            }
        }
    }
}

#[test]
fn cdf_round_trips_and_is_a_distribution() {
    let s = bundled();
    let first: Vec<Session> = s.iter().filter(|v| v.day < 5).cloned().collect();
    let cfg = SimConfig { trials: 3, ..SimConfig::default() };
    let rep = run_comparison(&cfg, &first).unwrap();
    let rows = cdf_rows(&rep);
    let mut buf = Vec::new();
    write_cdf(&mut buf, &rows).unwrap();
    let back = read_cdf(buf.as_slice()).unwrap();
    assert_eq!(back.len(), rows.len());
    for policy in ["ota", "fta"] {
        let mine: Vec<&CdfRow> = back.iter().filter(|r| r.policy == policy).collect();
        assert!(!mine.is_empty());
        for w in mine.windows(2) {
            assert!(w[1].cumulative_fraction >= w[0].cumulative_fraction);
            assert!(w[1].ratio.value() >= w[0].ratio.value());
        }
        assert_eq!(mine.last().unwrap().cumulative_fraction, 1.0);
        assert!(mine.iter().all(|r| r.ratio.value() >= 1.0 - 1e-9));
    }
}
