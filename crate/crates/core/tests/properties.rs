use okra_core::adversary::{gen_random, RandomSpec, ValueKind};
use okra_core::io::{instance_to_csv, instance_to_json, parse_instance_csv, parse_instance_json};
use okra_core::offline::{offline, offline_fomkp, OfflineOptions};
use okra_core::ota::{default_family, fta_price, run, Policy};
use okra_core::thresholds::{ThresholdFamily, Variant};
use okra_core::{Instance, Mode, Setup, TOL};
use proptest::prelude::*;

fn setup_strategy() -> impl Strategy<Value = Setup> {
    (1usize..=4, prop::collection::vec(0.5f64..5.0, 4), 0.5f64..3.0, 2.0f64..100.0)
        .prop_map(|(m, caps, l, theta)| Setup::new(caps[..m].to_vec(), l, l * theta))
}

fn instance_strategy() -> impl Strategy<Value = Instance> {
    (
        setup_strategy(),
        any::<u64>(),
        0usize..30,
        prop_oneof![Just(ValueKind::Linear), Just(ValueKind::Quadratic), Just(ValueKind::Mixed)],
        prop_oneof![Just(Mode::Aggregate), Just(Mode::Separable)],
    )
        .prop_map(|(s, seed, n, values, mode)| {
            let spec = RandomSpec { n_items: n, values, mode, ..RandomSpec::default() };
            gen_random(&s, seed, &spec).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ota_is_feasible_and_never_loses_pseudo_utility(inst in instance_strategy()) {
        let fam = default_family(&inst).unwrap();
        let res = run(&inst, &Policy::Ota(fam)).unwrap();
        prop_assert!(inst.check_allocation(&res.allocation, TOL).is_empty());
        for (n, &p) in res.pseudo_utilities.iter().enumerate() {
            prop_assert!(p >= -1e-9 * inst.setup.u, "item {n}: {p}");
        }
    }

    #[test]
    fn offline_dominates_online(inst in instance_strategy()) {
        let off = offline(&inst).unwrap();
        prop_assert!(inst.check_allocation(&off.allocation, TOL).is_empty());
        prop_assert!(off.converged, "gap {} on {}", off.gap, off.value);
        let fam = default_family(&inst).unwrap();
        let alpha = fam.alpha;
        let on = run(&inst, &Policy::Ota(fam)).unwrap().online_value;
        prop_assert!(off.value >= on * (1.0 - 1e-9) - 1e-12);
        prop_assert!(off.value <= (alpha + 1e-3) * on + 1e-9, "{} vs {} * {}", off.value, alpha, on);
        let fta = run(&inst, &Policy::Fta { price: fta_price(&inst.setup) }).unwrap();
        prop_assert!(inst.check_allocation(&fta.allocation, TOL).is_empty());
        prop_assert!(off.value >= fta.online_value * (1.0 - 1e-9) - 1e-12);
    }

    #[test]
    fn dual_bounds_primal(inst in instance_strategy()) {
        let sol = offline_fomkp(&inst, &OfflineOptions::default()).unwrap();
        prop_assert!(sol.dual_value >= sol.value - 1e-9 * sol.value.abs().max(1.0));
        prop_assert!(sol.capacity_prices.iter().all(|&l| l >= 0.0));
        prop_assert!(sol.item_prices.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn thresholds_are_monotone(s in setup_strategy(), which in 0usize..5) {
        let variant = match which {
            0 => Variant::Got,
            1 => Variant::GotVariant1,
            2 => Variant::GotVariant2 { c: 2.0 },
            3 => Variant::FomkpAggregate,
            _ => Variant::FomkpSeparable,
        };
        let s = if which < 3 { Setup::single(s.capacities[0], s.l, s.u) } else { s };
        let fam = ThresholdFamily::build(variant, &s).unwrap();
        for m in 0..s.m() {
            let c = s.capacities[m];
            let mut prev = fam.phi(m, 0.0);
            for i in 1..=500 {
                let p = fam.phi(m, c * i as f64 / 500.0);
                prop_assert!(p >= prev - 1e-12 * p.abs());
                prev = p;
            }
            prop_assert!((fam.phi(m, c) - s.u).abs() <= 1e-9 * s.u);
            prop_assert!(fam.phi(m, c * 1.0001).is_infinite());
        }
    }

    #[test]
    fn instance_io_round_trips(inst in instance_strategy()) {
        prop_assert_eq!(&parse_instance_json(&instance_to_json(&inst)).unwrap(), &inst);
        prop_assert_eq!(&parse_instance_csv(&instance_to_csv(&inst)).unwrap(), &inst);
    }
}
