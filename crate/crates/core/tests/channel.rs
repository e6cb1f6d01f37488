use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use tfqkd_core::channel::{arm_intensity_transmittance, decoy_yield, ChannelParams};
use tfqkd_core::{PhotonIntensity, Probability};

/// Independent oracle: draw a uniform relative phase, Poisson photon numbers
/// at both outputs, dark counts per detector, and count trials with exactly
/// one click.
fn monte_carlo_yield(params: &ChannelParams, x: f64, y: f64, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = arm_intensity_transmittance(params);
    let (a, b) = (x * eta, y * eta);
    let k = 1.0 - 2.0 * params.misalignment;
    let d = params.dark_per_pulse.get();
    let mut hits = 0usize;
    for _ in 0..trials {
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let cross = (a * b).sqrt() * k * phase.cos();
        let i0 = 0.5 * (a + b) + cross;
        let i1 = 0.5 * (a + b) - cross;
        let fire = |i: f64, rng: &mut ChaCha8Rng| {
            let photons = if i > 0.0 { Poisson::new(i).unwrap().sample(rng) } else { 0.0 };
            photons > 0.0 || rng.random::<f64>() < d
        };
        let c0 = fire(i0, &mut rng);
        let c1 = fire(i1, &mut rng);
        if c0 != c1 {
            hits += 1;
        }
    }
    hits as f64 / trials as f64
}

#[test]
fn decoy_yield_matches_monte_carlo() {
    let params = ChannelParams {
        dark_per_pulse: Probability::new(1e-3).unwrap(),
        ..ChannelParams::at_distance(20.0)
    };
    let trials = 400_000;
    for (x, y) in [(0.5, 0.5), (1.0, 0.1), (0.3, 0.0), (2.0, 2.0)] {
        let exact = decoy_yield(&params, PhotonIntensity::new(x).unwrap(), PhotonIntensity::new(y).unwrap()).get();
        let mc = monte_carlo_yield(&params, x, y, trials, 17);
        let se = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((mc - exact).abs() < 4.0 * se, "({x},{y}): {mc} vs {exact}");
    }
}
