#![allow(dead_code)]

use std::collections::BTreeMap;

use tfqkd_core::channel::{DecoyYields, IntensityPair, IntensitySchedule, Level, DATA_PAIRS};
use tfqkd_core::Probability;

/// Measured operating points: distance, attenuation (dB), μ, ν₁, ν₂, ν₃,
/// code-mode gain, error rate.
pub const MEASURED: [(f64, f64, f64, f64, f64, f64, f64, f64); 3] = [
    (100.0, 17.9, 0.026, 0.005, 0.002, 8e-5, 2.02e-3, 0.0186),
    (200.0, 35.5, 0.019, 0.005, 0.002, 6e-5, 1.94e-4, 0.0242),
    (300.0, 53.3, 0.016, 0.005, 0.002, 5e-5, 2.11e-5, 0.0359),
];

/// Measured decoy gains: μμ, ν₁ν₁, ν₂ν₂, ν₃ν₃, μν₃, ν₁ν₃, ν₂ν₃ (the last
/// three were recorded symmetrically).
pub const MEASURED_DECOY: [[f64; 7]; 3] = [
    [2.02e-3, 3.88e-4, 1.56e-4, 6.40e-6, 1.01e-3, 1.97e-4, 8.10e-5],
    [1.94e-4, 5.12e-5, 2.06e-5, 8.02e-7, 9.73e-5, 2.60e-5, 1.07e-5],
    [2.11e-5, 6.74e-6, 2.81e-6, 2.55e-7, 1.07e-5, 3.50e-6, 1.53e-6],
];

pub fn measured(row: usize) -> (IntensitySchedule, DecoyYields) {
    let (_, _, mu, n1, n2, n3, q, e) = MEASURED[row];
    let schedule = IntensitySchedule::new(mu, n1, n2, n3).unwrap();
    let d = MEASURED_DECOY[row];
    let mut q_decoy = BTreeMap::new();
    let values = [d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[4], d[5], d[6]];
    for (pair, v) in DATA_PAIRS.iter().zip(values) {
        q_decoy.insert(*pair, Probability::new(v).unwrap());
    }
    (
        schedule,
        DecoyYields {
            q_code: Probability::new(q).unwrap(),
            e_code: Probability::new(e).unwrap(),
            q_decoy,
        },
    )
}

pub fn measured_schedule(row: usize) -> IntensitySchedule {
    measured(row).0
}

pub const MU_MU: IntensityPair = IntensityPair(Level::Mu, Level::Mu);
