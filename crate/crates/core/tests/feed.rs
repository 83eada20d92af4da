use proptest::prelude::*;
use rotip_core::feed::{simulate_feed, FeedParams, FeedPolicy, FeedScenario, Material};

fn material() -> impl Strategy<Value = Material> {
    prop::sample::select(Material::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identical_inputs_give_identical_logs(seed in any::<u64>(), m in material(), sheets in 1u32..20) {
        let sc = FeedScenario::new(sheets, m);
        for p in [FeedPolicy::WithCA, FeedPolicy::WithoutCA] {
            let a = simulate_feed(&sc, p, seed).unwrap();
            let b = simulate_feed(&sc, p, seed).unwrap();
            prop_assert_eq!(a.to_jsonl(), b.to_jsonl());
        }
    }

    #[test]
    fn continuous_adjustment_never_feeds_fewer(seed in any::<u64>(), m in material(), tilt in 0.0f64..60.0) {
        let mut sc = FeedScenario::new(15, m);
        sc.tilt_deg = tilt;
        let ca = simulate_feed(&sc, FeedPolicy::WithCA, seed).unwrap();
        let wo = simulate_feed(&sc, FeedPolicy::WithoutCA, seed).unwrap();
        prop_assert!(ca.fed() >= wo.fed());
    }

    #[test]
    fn sheets_are_conserved(seed in any::<u64>(), sheets in 1u32..20, ca in any::<bool>()) {
        let sc = FeedScenario::new(sheets, Material::PrintPaper);
        let log = simulate_feed(&sc, if ca { FeedPolicy::WithCA } else { FeedPolicy::WithoutCA }, seed).unwrap();
        let mut prev = 0;
        for t in &log.ticks {
            prop_assert!(t.fed <= sheets);
            prop_assert!(t.fed >= prev);
            prop_assert_eq!(t.fed + (sheets - t.fed), sheets);
            if t.fed < sheets {
                prop_assert_eq!(t.sheet, t.fed + 1);
            }
            prev = t.fed;
        }
        prop_assert_eq!(log.fed() as usize, log.sheets.len());
    }

    #[test]
    fn noiseless_sheet_time_is_kinematic(sheets in 1u32..16, omega in 45.0f64..180.0) {
        let mut sc = FeedScenario::new(sheets, Material::PrintPaper);
        sc.params = FeedParams { omega_deg_s: omega, ..FeedParams::default() }.noiseless();
        let log = simulate_feed(&sc, FeedPolicy::WithCA, 0).unwrap();
        let nominal = sc.params.nominal_sheet_time();
        let tick = log.ticks[0].time;
        for t in log.sheet_times() {
            prop_assert!((t - nominal).abs() < tick, "{t} vs {nominal}");
        }
    }
}
