use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfqkd_core::phasesim::{
    drift_step, expected_window_counts, simulate, window_counts, wrap, Controller, DetectionConfig,
    DitherController, FeedbackState, NoiseModel, Phase, SessionSetup, TimingConfig,
};
use tfqkd_core::CountPair;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn drift_without_noise_is_identity() {
    let mut r = rng(1);
    for phi in [-3.0, -0.5, 0.0, 1.0, PI] {
        assert_eq!(drift_step(phi, 1e-3, &NoiseModel::noiseless(), &mut r), phi);
    }
}

#[test]
fn drift_variance_matches_wiener_rate() {
    let noise = NoiseModel {
        drift_diffusion: 100.0,
        ..NoiseModel::noiseless()
    };
    let mut r = rng(7);
    let n = 10_000;
    let var = (0..n)
        .map(|_| drift_step(0.0, 1e-3, &noise, &mut r).powi(2))
        .sum::<f64>()
        / n as f64;
    assert!((var / 0.1 - 1.0).abs() < 0.1, "variance {var}");
}

#[test]
fn fixture_drift_stays_below_pi_per_ms() {
    let setup = SessionSetup::field_300km();
    let noise = NoiseModel {
        residual_lock_std: 0.0,
        ..setup.noise
    };
    let mut r = rng(3);
    let n = 10_000;
    let within = (0..n)
        .filter(|_| drift_step(0.0, 1e-3, &noise, &mut r).abs() <= PI)
        .count();
    assert!(within as f64 >= 0.99 * n as f64, "{within}/{n}");
    assert!(noise.within_drift_bound());
}

#[test]
fn perfect_fringe_has_dark_destructive_port() {
    let detection = DetectionConfig {
        dark_rate_hz: 0.0,
        contrast: 1.0,
        ..DetectionConfig::field_300km()
    };
    let timing = TimingConfig::default();
    assert_eq!(expected_window_counts(0.0, &detection, &timing).destructive, 0.0);
    let mut r = rng(0);
    for _ in 0..100 {
        assert_eq!(window_counts(0.0, &detection, &timing, &mut r).destructive, 0.0);
    }
}

#[test]
fn reference_operating_point() {
    // Measured at 300 km: 186.66 mean counts on D0 per window.
    let setup = SessionSetup::field_300km();
    let c = expected_window_counts(0.0, &setup.detection, &setup.timing);
    assert!((c.constructive / 186.66 - 1.0).abs() < 0.15, "{c:?}");
    assert!((c.destructive / 2.6 - 1.0).abs() < 0.5, "{c:?}");
}

#[test]
fn quadrature_phase_balances_the_detectors() {
    let setup = SessionSetup::field_300km();
    let mut r = rng(11);
    let n = 1000;
    let (mut s0, mut s1) = (0.0, 0.0);
    for _ in 0..n {
        let c = window_counts(PI / 2.0, &setup.detection, &setup.timing, &mut r);
        s0 += c.constructive;
        s1 += c.destructive;
    }
    // Difference of two Poisson totals: variance s0 + s1.
    assert!((s0 - s1).abs() < 3.0 * (s0 + s1).sqrt(), "{s0} vs {s1}");
}

#[test]
fn poisson_totals_match_per_pulse_draws() {
    let mut detection = DetectionConfig::field_300km();
    detection.reference_intensity = 500.0;
    let timing = TimingConfig {
        feedback_window: 48e-9,
        ..TimingConfig::default()
    };
    let pulses = timing.pulses_per_window() as usize;
    let (p0, _) = detection.reference_click_probabilities(0.4, &timing);
    let mut r = rng(5);
    let n = 20_000;
    let mut poisson = Vec::with_capacity(n);
    let mut bernoulli = Vec::with_capacity(n);
    for _ in 0..n {
        poisson.push(window_counts(0.4, &detection, &timing, &mut r).constructive);
        bernoulli.push((0..pulses).filter(|_| r.random::<f64>() < p0).count() as f64);
    }
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var)
    };
    let (mp, vp) = stats(&poisson);
    let (mb, vb) = stats(&bernoulli);
    let expected = pulses as f64 * p0;
    let se = (expected / n as f64).sqrt();
    assert!((mp - expected).abs() < 4.0 * se, "{mp} vs {expected}");
    assert!((mb - expected).abs() < 4.0 * se, "{mb} vs {expected}");
    // Thinning changes the variance only by the factor 1 − p.
    assert!((vb / vp - (1.0 - p0)).abs() < 0.05, "{vp} vs {vb}");
}

fn loop_with_expected_counts(offset: f64, windows: usize) -> (Vec<f64>, FeedbackState) {
    let detection = DetectionConfig {
        contrast: 1.0,
        ..DetectionConfig::field_300km()
    };
    let timing = TimingConfig::default();
    let mut controller = DitherController::default();
    let mut state = FeedbackState::new();
    let mut errors = Vec::new();
    for _ in 0..windows {
        let probe = controller.probe_offset(&state);
        let counts = expected_window_counts(offset + state.applied_correction + probe, &detection, &timing);
        controller.estimate_correction(counts, &mut state);
        errors.push(wrap(offset + state.applied_correction));
    }
    (errors, state)
}

#[test]
fn controller_holds_still_at_the_optimum() {
    let (errors, _) = loop_with_expected_counts(0.0, 10);
    let dither = DitherController::default().dither;
    assert!(errors.iter().all(|e| e.abs() <= dither), "{errors:?}");
}

#[test]
fn controller_converges_from_an_offset() {
    let (errors, _) = loop_with_expected_counts(0.3, 20);
    assert!(errors.last().unwrap().abs() < 0.05, "{errors:?}");
}

#[test]
fn controller_recovers_from_the_far_side() {
    let (errors, _) = loop_with_expected_counts(2.8, 40);
    assert!(errors.last().unwrap().abs() < 0.05, "{errors:?}");
}

#[test]
fn zero_counts_hold_the_correction() {
    let mut controller = DitherController::default();
    let mut state = FeedbackState::new();
    state.applied_correction = 0.7;
    let c = controller.estimate_correction(CountPair::default(), &mut state);
    assert_eq!(c, 0.7);
    assert!(state.signal_lost);
}

#[test]
fn noiseless_session_is_limited_by_dark_counts() {
    for feedback in [false, true] {
        let setup = SessionSetup {
            feedback_on: feedback,
            ..SessionSetup::noiseless()
        };
        let trace = simulate(&setup, 5.0, 1).unwrap();
        assert_eq!(trace.rows.len(), 5);
        assert!(trace.mean_visibility() >= 0.99, "{}", trace.mean_visibility());
    }
}

#[test]
fn noiseless_visibility_is_stationary() {
    let setup = SessionSetup {
        feedback_on: false,
        ..SessionSetup::noiseless()
    };
    let trace = simulate(&setup, 100.0, 9).unwrap();
    let n = trace.rows.len() as f64;
    let xs: Vec<f64> = trace.rows.iter().map(|r| r.time_s).collect();
    let ys: Vec<f64> = trace.rows.iter().map(|r| r.visibility).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / sxx;
    let resid: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum::<f64>()
        / (n - 2.0);
    let se = (resid / sxx).sqrt();
    assert!(slope.abs() <= 3.0 * se, "slope {slope} ± {se}");
}

#[test]
fn open_loop_drift_averages_the_fringe_away() {
    let setup = SessionSetup {
        feedback_on: false,
        ..SessionSetup::field_300km()
    };
    // The time average of cos θ under Wiener drift has variance 2/(D·T).
    let trace = simulate(&setup, 500.0, 4).unwrap();
    let c = trace.mean_counts();
    assert!((c.constructive - c.destructive).abs() < 0.05 * 0.5 * c.total(), "{c:?}");
}

#[test]
fn feedback_never_hurts() {
    for seed in [1, 2] {
        let on = simulate(&SessionSetup::field_300km(), 5.0, seed).unwrap();
        let off = simulate(
            &SessionSetup {
                feedback_on: false,
                ..SessionSetup::field_300km()
            },
            5.0,
            seed,
        )
        .unwrap();
        assert!(on.mean_visibility() >= off.mean_visibility());
        assert!(on.mean_qber() <= off.mean_qber());
    }
}

#[test]
fn qber_is_the_sifted_error_fraction() {
    let trace = simulate(&SessionSetup::field_300km(), 3.0, 8).unwrap();
    for r in &trace.rows {
        let kept = r.kept_correct + r.kept_error;
        assert!(kept > 0);
        assert_eq!(r.qber, r.kept_error as f64 / kept as f64);
        assert!(r.qber >= 0.0);
    }
}

#[test]
fn sessions_are_reproducible_and_wrap_invariant() {
    let base = SessionSetup {
        initial_phase: Phase::from_radians(0.4),
        ..SessionSetup::field_300km()
    };
    let shifted = SessionSetup {
        initial_phase: Phase::from_radians(0.4 + 2.0 * PI),
        ..base
    };
    let a = simulate(&base, 2.0, 77).unwrap();
    let b = simulate(&base, 2.0, 77).unwrap();
    let c = simulate(&shifted, 2.0, 77).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    assert_eq!(a.to_csv(), c.to_csv());
    assert_ne!(a.to_csv(), simulate(&base, 2.0, 78).unwrap().to_csv());
}

#[test]
fn trace_csv_layout() {
    let trace = simulate(&SessionSetup::noiseless(), 1.5, 0).unwrap();
    let csv = trace.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("time_s,visibility,qber,correction_rad,d0_counts,d1_counts")
    );
    assert_eq!(lines.count(), 2);
    assert_eq!(trace.rows.last().unwrap().time_s, 1.5);
}
