use proptest::prelude::*;
use rotip_core::contact::{run_contact_trial, ContactMethod, ContactSetup, ContactWorld, Misalignment};
use rotip_core::control::{continuous_adjust, control_step, ControlGains, ControllerConfig, ControllerState, Observation, Phase};
use rotip_core::geometry::RigidTransform;
use rotip_core::oracle::MaskNoiseParams;
use std::sync::OnceLock;

fn clean_setup() -> ContactSetup {
    ContactSetup {
        mask_noise: MaskNoiseParams::NONE,
        misalignment: Misalignment::Uniform { max_deg: 20.0 },
        ..ContactSetup::default()
    }
}

fn world() -> &'static ContactWorld {
    static WORLD: OnceLock<ContactWorld> = OnceLock::new();
    WORLD.get_or_init(|| ContactWorld::new(&clean_setup()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn noiseless_tactile_loop_reaches_two_fingers(seed in any::<u64>()) {
        let o = run_contact_trial(&clean_setup(), world(), ContactMethod::VisionForceTactile, seed, false);
        prop_assert!(o.initial_misalignment_deg <= 20.0 + 1e-9);
        prop_assert!(o.two_finger, "{:?}", o.failure);
        prop_assert!(o.rounds <= 2, "rounds {}", o.rounds);
    }

    #[test]
    fn pd_branch_fires_iff_error_exceeds_epsilon(seed in any::<u64>()) {
        let o = run_contact_trial(&clean_setup(), world(), ContactMethod::VisionForceTactile, seed, true);
        let eps = ControlGains::default().epsilon;
        for w in o.trace.windows(2) {
            prop_assert!(!(w[0].phase.is_terminal() && w[1].phase != w[0].phase));
        }
        for row in &o.trace {
            if row.phase == Phase::Approach {
                let t = (row.error[0].powi(2) + row.error[1].powi(2) + row.error[2].powi(2)).sqrt();
                let ff = ControlGains::default().v_ff;
                let is_ff = row.command.iter().zip(ff).all(|(c, f)| (c - f).abs() < 1e-12);
                prop_assert!((t > eps) != is_ff, "tick {}: error {t}, feedforward {is_ff}", row.tick);
            }
        }
    }

    #[test]
    fn adjustment_is_monotone_and_non_positive(n in 0u32..40, h in 0.01f64..0.2, l in 5.0f64..30.0) {
        prop_assume!(((n + 1) as f64) * h < l);
        let a = continuous_adjust(n, h, l).unwrap();
        let b = continuous_adjust(n + 1, h, l).unwrap();
        prop_assert!(b.beta > a.beta);
        prop_assert!(a.dx <= 0.0 && a.dz <= 0.0);
        let c = continuous_adjust(n, h * (1.0 + 1e-9), l).unwrap();
        prop_assert!((c.beta - a.beta).abs() < 1e-6 && (c.dz - a.dz).abs() < 1e-6);
    }

    #[test]
    fn terminal_phases_are_absorbing(pixels in prop::array::uniform2(0usize..5000), halted in any::<bool>(), failed in any::<bool>()) {
        let cfg = ControllerConfig::default();
        let mut s = ControllerState::new(RigidTransform::identity(), &cfg);
        s.phase = if failed { Phase::Failed } else { Phase::Done };
        let obs = Observation { pose: RigidTransform::identity(), finger_pixels: pixels, pixel_threshold: 2000, halted, contact_normal: None };
        let (next, _) = control_step(&s, &ControlGains::default(), &cfg, &obs).unwrap();
        prop_assert_eq!(next.phase, s.phase);
    }
}
