//! Counting statistics shared by every other module: Poisson photon-number
//! distributions, binary entropy, the threshold-detector click model and
//! interference visibility.

use std::fmt;

use crate::error::{Error, Result};

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(format!("probability {value} outside [0, 1]")))
        }
    }

    /// Clamps into `[0, 1]`; for values that are probabilities up to rounding.
    pub(crate) fn saturating(value: f64) -> Self {
        Probability(value.clamp(0.0, 1.0))
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

/// Mean photon number per pulse.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct PhotonIntensity(f64);

impl PhotonIntensity {
    pub const VACUUM: PhotonIntensity = PhotonIntensity(0.0);

    pub fn new(mean_photons: f64) -> Result<Self> {
        if mean_photons >= 0.0 && mean_photons.is_finite() {
            Ok(PhotonIntensity(mean_photons))
        } else {
            Err(Error::domain(format!(
                "photon intensity {mean_photons} must be finite and non-negative"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Attenuates by an intensity transmittance in `[0, 1]`.
    pub fn attenuate(self, transmittance: f64) -> Self {
        PhotonIntensity(self.0 * transmittance.max(0.0))
    }
}

impl fmt::Display for PhotonIntensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl TryFrom<f64> for PhotonIntensity {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        PhotonIntensity::new(value)
    }
}

/// Mean (or total) counts on the constructive and destructive outputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CountPair {
    pub constructive: f64,
    pub destructive: f64,
}

impl CountPair {
    pub fn new(constructive: f64, destructive: f64) -> Result<Self> {
        if constructive >= 0.0 && destructive >= 0.0 {
            Ok(CountPair {
                constructive,
                destructive,
            })
        } else {
            Err(Error::domain("counts must be non-negative"))
        }
    }

    pub fn total(&self) -> f64 {
        self.constructive + self.destructive
    }

    pub fn swapped(self) -> Self {
        CountPair {
            constructive: self.destructive,
            destructive: self.constructive,
        }
    }
}

/// `e^{-x} x^n / n!`, evaluated as a running product so that it stays
/// accurate for the small intensities used in decoy analysis.
pub fn poisson_pmf(n: u32, x: PhotonIntensity) -> Probability {
    Probability::saturating(poisson_term(n, x.get()))
}

pub(crate) fn poisson_term(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x > 50.0 || n > 150 {
        let ln = f64::from(n) * x.ln() - x - ln_factorial(n);
        return ln.exp();
    }
    let mut p = (-x).exp();
    for k in 1..=n {
        p *= x / f64::from(k);
    }
    p
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|k| f64::from(k).ln()).sum()
}

/// A Poisson distribution truncated at `cutoff`, together with the exact mass
/// that was cut off. Callers building one-sided bounds use `tail` as slack.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSeries {
    pub terms: Vec<f64>,
    pub tail: f64,
}

impl PoissonSeries {
    pub fn new(x: PhotonIntensity, cutoff: u32) -> Self {
        let terms: Vec<f64> = (0..=cutoff).map(|n| poisson_term(n, x.get())).collect();
        PoissonSeries {
            terms,
            tail: poisson_tail(cutoff, x),
        }
    }

    pub fn cutoff(&self) -> u32 {
        (self.terms.len() - 1) as u32
    }
}

/// `Σ_{n > cutoff} P_n^x`, summed directly rather than as `1 - cdf` so the
/// result keeps full relative precision when it is tiny.
pub fn poisson_tail(cutoff: u32, x: PhotonIntensity) -> f64 {
    let x = x.get();
    if x == 0.0 {
        return 0.0;
    }
    if x > 5.0 {
        let head: f64 = (0..=cutoff).map(|n| poisson_term(n, x)).sum();
        return (1.0 - head).max(0.0);
    }
    let mut term = poisson_term(cutoff + 1, x);
    let mut sum = 0.0;
    let mut n = cutoff + 1;
    while term > 0.0 && term > sum * 1e-18 {
        sum += term;
        n += 1;
        term *= x / f64::from(n);
    }
    sum
}

/// `1 - (1 - a)(1 - b)` for two truncated series: the joint mass outside the
/// `cutoff × cutoff` square, without cancellation.
pub fn joint_tail(a: &PoissonSeries, b: &PoissonSeries) -> f64 {
    a.tail + b.tail - a.tail * b.tail
}

/// Binary entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(p: Probability) -> f64 {
    let p = p.get();
    if p == 0.0 || p == 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Click probability of a threshold detector with per-pulse dark-count
/// probability `dark` illuminated by a coherent pulse of mean `arriving`.
pub fn click_probability(arriving: PhotonIntensity, dark: Probability) -> Probability {
    let a = arriving.get();
    let d = dark.get();
    // 1 - (1-d)e^{-a}, arranged to keep precision for a, d ≪ 1.
    Probability::saturating(-(-a).exp_m1() + d * (-a).exp())
}

/// `(C - D) / (C + D)`. Negative when the destructive port dominates; the
/// caller decides what that means.
pub fn visibility(counts: CountPair) -> Result<f64> {
    let total = counts.total();
    if total <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    let v = (counts.constructive - counts.destructive) / total;
    Ok(if v >= 0.0 { v.min(1.0) } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pi(x: f64) -> PhotonIntensity {
        PhotonIntensity::new(x).unwrap()
    }

    fn pr(x: f64) -> Probability {
        Probability::new(x).unwrap()
    }

    #[test]
    fn poisson_examples() {
        assert_eq!(poisson_pmf(0, pi(0.0)).get(), 1.0);
        let direct = (-0.026f64).exp() * 0.026 * 0.026 / 2.0;
        assert_relative_eq!(poisson_pmf(2, pi(0.026)).get(), direct, max_relative = 1e-14);
        assert_relative_eq!(poisson_pmf(2, pi(0.026)).get(), 3.2933e-4, max_relative = 1e-4);
        let s: f64 = (0..=50).map(|n| poisson_pmf(n, pi(0.026)).get()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_large_arguments_agree_with_log_form() {
        for &(n, x) in &[(20u32, 1.0f64), (10, 0.5), (3, 40.0)] {
            let ln = f64::from(n) * x.ln() - x - ln_factorial(n);
            assert_relative_eq!(poisson_term(n, x), ln.exp(), max_relative = 1e-12);
        }
    }

    #[test]
    fn tail_matches_complement() {
        for &x in &[0.3, 0.8, 1.0] {
            let series = PoissonSeries::new(pi(x), 4);
            let head: f64 = series.terms.iter().sum();
            assert_relative_eq!(series.tail, 1.0 - head, max_relative = 1e-10);
        }
        // Far below the resolution of 1 - head.
        let series = PoissonSeries::new(pi(0.026), 10);
        let expected = poisson_term(11, 0.026) * (1.0 + 0.026 / 12.0 + 0.026 * 0.026 / 156.0);
        assert_relative_eq!(series.tail, expected, max_relative = 1e-6);
        assert_eq!(PoissonSeries::new(pi(0.0), 3).tail, 0.0);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(pr(0.5)), 1.0);
        assert_eq!(binary_entropy(pr(0.0)), 0.0);
        assert_eq!(binary_entropy(pr(1.0)), 0.0);
        assert_relative_eq!(binary_entropy(pr(0.0186)), 0.133506, max_relative = 1e-5);
    }

    #[test]
    fn probability_rejects_out_of_range() {
        assert!(Probability::new(1.2).is_err());
        assert!(Probability::new(-0.1).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert!(PhotonIntensity::new(-1e-9).is_err());
    }

    #[test]
    fn click_examples() {
        assert_eq!(click_probability(pi(0.0), pr(0.0)).get(), 0.0);
        assert_relative_eq!(
            click_probability(pi(2.9), pr(0.0)).get(),
            0.94498,
            max_relative = 1e-5
        );
        assert_relative_eq!(click_probability(pi(0.0), pr(1e-7)).get(), 1e-7, max_relative = 1e-15);
    }

    #[test]
    fn visibility_examples() {
        let v = visibility(CountPair::new(251.97, 2.26).unwrap()).unwrap();
        assert!((v - 0.98222).abs() < 1e-4);
        let v = visibility(CountPair::new(186.66, 2.64).unwrap()).unwrap();
        assert!((v - 0.97211).abs() < 1e-4);
        assert_eq!(visibility(CountPair::new(17.0, 0.0).unwrap()).unwrap(), 1.0);
        assert_eq!(
            visibility(CountPair::default()),
            Err(Error::UndefinedVisibility)
        );
        let v = visibility(CountPair::new(1.0, 3.0).unwrap()).unwrap();
        assert_eq!(v, -0.5);
    }
}
