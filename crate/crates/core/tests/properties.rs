use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tfqkd_core::channel::{
    code_mode_stats, decoy_yield, ChannelParams, FockYieldOracle, IntensitySchedule,
};
use tfqkd_core::decoy::{YieldBounds, YieldInterval};
use tfqkd_core::keyrate::{linear_bound, secret_key_rate, KeyRateInputs};
use tfqkd_core::leakage::{
    analytic_backend, BivariateEntropyForm, ExplicitProvider, LeakageInputs, LinearConstraint,
};
use tfqkd_core::phasesim::{drift_step, sift, wrap, Click, NoiseModel, Phase, SiftOutcome};
use tfqkd_core::photonics::{
    binary_entropy, click_probability, poisson_pmf, poisson_tail, visibility, PoissonSeries,
};
use tfqkd_core::{CountPair, PhotonIntensity, Probability};

fn pi(x: f64) -> PhotonIntensity {
    PhotonIntensity::new(x).unwrap()
}

fn prob(p: f64) -> Probability {
    Probability::new(p).unwrap()
}

fn table_schedule() -> impl Strategy<Value = (f64, IntensitySchedule)> {
    prop_oneof![
        Just((100.0, IntensitySchedule::new(0.026, 0.005, 0.002, 8e-5).unwrap())),
        Just((200.0, IntensitySchedule::new(0.019, 0.005, 0.002, 6e-5).unwrap())),
        Just((300.0, IntensitySchedule::new(0.016, 0.005, 0.002, 5e-5).unwrap())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn poisson_mass_is_normalized(x in 0.0..=1.0f64) {
        let head: f64 = (0..=50).map(|n| poisson_pmf(n, pi(x)).get()).sum();
        let tail = poisson_tail(50, pi(x));
        prop_assert!(tail <= 1e-12);
        prop_assert!((head + tail - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn entropy_is_symmetric(p in 0.0..=1.0f64) {
        let a = binary_entropy(prob(p));
        let b = binary_entropy(prob(1.0 - p));
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn entropy_is_concave(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let mid = binary_entropy(prob(0.5 * (a + b)));
        let chord = 0.5 * (binary_entropy(prob(a)) + binary_entropy(prob(b)));
        prop_assert!(mid >= chord - 1e-12);
    }

    #[test]
    fn clicks_are_monotone(
        x in 0.0..5.0f64, dx in 0.0..1.0f64,
        d in 0.0..0.1f64, dd in 0.0..0.1f64,
    ) {
        let base = click_probability(pi(x), prob(d)).get();
        prop_assert!(click_probability(pi(x + dx), prob(d)).get() >= base);
        prop_assert!(click_probability(pi(x), prob(d + dd)).get() >= base);
    }

    #[test]
    fn visibility_is_antisymmetric(a in 0.0..1e4f64, b in 0.0..1e4f64) {
        prop_assume!(a + b > 0.0);
        let c = CountPair::new(a, b).unwrap();
        let v = visibility(c).unwrap();
        let w = visibility(c.swapped()).unwrap();
        prop_assert!((v + w).abs() <= 1e-15);
    }

    #[test]
    fn entropy_form_is_homogeneous(a in 0.0..1.0f64, b in 0.0..1.0f64, s in 1e-6..1e3f64) {
        let h = BivariateEntropyForm::grouped_binary();
        let lhs = h.eval(s * a, s * b);
        let rhs = s * h.eval(a, b);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn sift_matches_the_flip_rule(alice in 0u8..2, bob in 0u8..2) {
        prop_assert_eq!(sift(alice, bob, Click::None), SiftOutcome::Discard);
        prop_assert_eq!(sift(alice, bob, Click::Both), SiftOutcome::Discard);
        let expect = |correct: bool| if correct { SiftOutcome::KeepCorrect } else { SiftOutcome::KeepError };
        prop_assert_eq!(sift(alice, bob, Click::D0), expect(alice == bob));
        prop_assert_eq!(sift(alice, bob, Click::D1), expect(alice != bob));
    }

    #[test]
    fn drift_is_wrap_invariant(phi in -10.0..10.0f64, seed in any::<u64>(), d in 0.0..500.0f64) {
        let noise = NoiseModel { drift_diffusion: d, residual_lock_std: 0.05, ..NoiseModel::noiseless() };
        let a = drift_step(phi, 5e-5, &noise, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = drift_step(phi + 2.0 * std::f64::consts::PI, 5e-5, &noise, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(wrap(a - b).abs() <= 1e-12);
        prop_assert!(a > -std::f64::consts::PI && a <= std::f64::consts::PI);
    }

    #[test]
    fn fixed_point_phase_is_wrap_invariant(phi in -10.0..10.0f64, k in -3i32..=3) {
        let a = Phase::from_radians(phi);
        let b = Phase::from_radians(phi + k as f64 * 2.0 * std::f64::consts::PI);
        prop_assert!((a.0.wrapping_sub(b.0) as i32).abs() <= 1);
        prop_assert!((wrap(phi) - a.radians()).abs() <= 2e-9 || (wrap(phi) - a.radians()).abs() >= 6.28);
    }

    #[test]
    fn key_rate_improves_with_cleaner_inputs(
        q in 1e-7..1e-2f64,
        e in 0.0..0.2f64, de in 0.0..0.05f64,
        i in 0.0..1.0f64, di in 0.0..0.5f64,
    ) {
        let worse = secret_key_rate(&KeyRateInputs::new(prob(q), prob(e + de), (i + di).min(1.0)));
        let better = secret_key_rate(&KeyRateInputs::new(prob(q), prob(e), i));
        prop_assert!(better >= worse);
        prop_assert!(better >= 0.0);
    }

    #[test]
    fn linear_bound_dominates_its_small_loss_limit(eta in 1e-9..0.999f64) {
        let bound = linear_bound(eta).unwrap();
        let limit = eta / std::f64::consts::LN_2;
        prop_assert!(bound >= limit);
        if eta < 1e-6 {
            prop_assert!((bound / limit - 1.0).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decoy_yield_is_symmetric_and_monotone(
        km in 0.0..400.0f64,
        x in 0.0..0.05f64, y in 0.0..0.05f64, dx in 0.0..0.02f64,
    ) {
        let p = ChannelParams::at_distance(km);
        let xy = decoy_yield(&p, pi(x), pi(y)).get();
        prop_assert_eq!(xy, decoy_yield(&p, pi(y), pi(x)).get());
        prop_assert!(decoy_yield(&p, pi(x + dx), pi(y)).get() >= xy);
        prop_assert!(decoy_yield(&p, pi(x), pi(y + dx)).get() >= xy);
    }

    #[test]
    fn oracle_brackets_every_scheduled_gain((km, schedule) in table_schedule(), i in 0usize..4, j in 0usize..4) {
        let p = ChannelParams::at_distance(km);
        let oracle = FockYieldOracle::new(&p).unwrap();
        let levels = tfqkd_core::Level::ALL;
        let (x, y) = (schedule.get(levels[i]), schedule.get(levels[j]));
        let (px, py) = (PoissonSeries::new(x, 10), PoissonSeries::new(y, 10));
        let mut sum = 0.0;
        let mut mass = 0.0;
        for n in 0..=10 {
            for m in 0..=10 {
                let w = px.terms[n] * py.terms[m];
                sum += w * oracle.yield_nm(n, m).unwrap().get();
                mass += w;
            }
        }
        let q = decoy_yield(&p, x, y).get();
        prop_assert!(sum <= q * (1.0 + 1e-9));
        prop_assert!(q <= sum + (1.0 - mass) + 1e-15);
    }

    #[test]
    fn weak_signals_err_at_the_misalignment(mis in 0.0..0.2f64, km in 0.0..300.0f64) {
        let p = ChannelParams {
            misalignment: mis,
            dark_per_pulse: Probability::ZERO,
            ..ChannelParams::at_distance(km)
        };
        let (_, e) = code_mode_stats(&p, pi(1e-9)).unwrap();
        prop_assert!((e.get() - mis).abs() <= 1e-6);
    }
}

fn dummy_inputs(q: f64) -> LeakageInputs {
    let iv = YieldInterval {
        lower: Probability::ZERO,
        upper: Probability::ONE,
    };
    LeakageInputs {
        q_code: prob(q),
        e_code: prob(0.02),
        bounds: YieldBounds {
            intervals: [iv; 6],
            combination_lower: Probability::ZERO,
            relaxation: 0.0,
        },
        schedule: IntensitySchedule::new(0.026, 0.005, 0.002, 8e-5).unwrap(),
        scenario_km: None,
    }
}

fn boxed(upper: [f64; 4], sum: f64) -> ExplicitProvider {
    let mut constraints: Vec<_> = upper
        .iter()
        .enumerate()
        .map(|(i, &u)| LinearConstraint::upper(i, u))
        .collect();
    constraints.push(LinearConstraint { coeffs: [1.0; 4], rhs: sum });
    ExplicitProvider {
        label: "box".into(),
        constraints,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shrinking_the_region_never_raises_leakage(
        upper in prop::array::uniform4(0.01..1.0f64),
        shrink in prop::array::uniform4(0.1..=1.0f64),
    ) {
        let q = 1.0;
        let inputs = dummy_inputs(q);
        let wide = analytic_backend(boxed(upper, q), BivariateEntropyForm::grouped_binary())
            .optimize(&inputs).unwrap().value;
        let tight: [f64; 4] = std::array::from_fn(|i| upper[i] * shrink[i]);
        let narrow = analytic_backend(boxed(tight, q), BivariateEntropyForm::grouped_binary())
            .optimize(&inputs).unwrap().value;
        prop_assert!(narrow <= wide + 1e-9, "{narrow} > {wide}");
    }

    #[test]
    fn leakage_is_scale_invariant(
        upper in prop::array::uniform4(0.01..1.0f64),
        s in 1e-6..1.0f64,
    ) {
        let form = BivariateEntropyForm::grouped_binary();
        let unit = analytic_backend(boxed(upper, 1.0), form)
            .optimize(&dummy_inputs(1.0)).unwrap().value;
        let scaled_upper: [f64; 4] = std::array::from_fn(|i| upper[i] * s);
        let scaled = analytic_backend(boxed(scaled_upper, s), form)
            .optimize(&dummy_inputs(s)).unwrap().value;
        prop_assert!((unit - scaled).abs() <= 1e-7, "{unit} vs {scaled}");
    }
}
