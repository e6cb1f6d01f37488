use crate::photonics::CountPair;

use super::wrap;

/// Loop state carried between reference windows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FeedbackState {
    /// Phase added by the feedback modulator, in `(−π, π]`.
    pub applied_correction: f64,
    /// Most recent phase-error estimate.
    pub last_estimate: f64,
    pub d0: u64,
    pub d1: u64,
    /// Sign of the probe offset applied during the current reference window.
    pub probe_sign: f64,
    /// Normalized count difference and total phase offset of the previous window.
    pub previous: Option<(f64, f64)>,
    /// Set when a window produced no counts at all.
    pub signal_lost: bool,
}

impl FeedbackState {
    pub fn new() -> Self {
        FeedbackState {
            probe_sign: 1.0,
            ..Default::default()
        }
    }
}

/// A phase-feedback law driven by reference-window counts.
pub trait Controller: Send {
    fn name(&self) -> String;

    /// Extra phase applied during the next reference window only.
    fn probe_offset(&self, state: &FeedbackState) -> f64;

    /// Digests one window of counts and returns the correction to load.
    fn estimate_correction(&mut self, counts: CountPair, state: &mut FeedbackState) -> f64;
}

/// Two-point dither: successive reference windows are probed at `+δ` and
/// `−δ` on top of the current correction. With `u = (D0 − D1)/(D0 + D1)`
/// and total offsets `p₁`, `p₂` of two consecutive windows,
/// `u₂ − u₁ ≈ −2V·sin(θ + p̄)·sin((p₂ − p₁)/2)` and `u₁ + u₂ ≈ 2V·cos(θ + p̄)·cos(…)`,
/// which locates the drift `θ` on the full circle. A fraction `gain` of the
/// estimated error is removed each window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DitherController {
    pub dither: f64,
    pub gain: f64,
    /// Assumed fringe visibility used to scale the slope.
    pub visibility_hint: f64,
}

impl Default for DitherController {
    fn default() -> Self {
        DitherController {
            dither: 0.1,
            gain: 0.5,
            visibility_hint: 1.0,
        }
    }
}

impl Controller for DitherController {
    fn name(&self) -> String {
        format!("dither(delta={}, gain={})", self.dither, self.gain)
    }

    fn probe_offset(&self, state: &FeedbackState) -> f64 {
        state.probe_sign * self.dither
    }

    fn estimate_correction(&mut self, counts: CountPair, state: &mut FeedbackState) -> f64 {
        state.d0 = counts.constructive.round() as u64;
        state.d1 = counts.destructive.round() as u64;
        let total = counts.total();
        let offset = state.applied_correction + state.probe_sign * self.dither;
        state.probe_sign = -state.probe_sign;
        if total <= 0.0 {
            state.signal_lost = true;
            state.previous = None;
            return state.applied_correction;
        }
        state.signal_lost = false;
        let u = (counts.constructive - counts.destructive) / total;
        if let Some((u_prev, offset_prev)) = state.previous {
            let half = 0.5 * (offset - offset_prev);
            if half.sin().abs() >= 0.5 * self.dither.sin() {
                let v = self.visibility_hint;
                let sin_x = (-(u - u_prev) / (2.0 * v * half.sin())).clamp(-1.0, 1.0);
                let cos_x = (u + u_prev) / (2.0 * v * half.cos());
                let x = if cos_x >= 0.0 {
                    sin_x.asin()
                } else {
                    std::f64::consts::PI.copysign(sin_x) - sin_x.asin()
                };
                let centre = 0.5 * (offset + offset_prev);
                let estimate = wrap(x - centre + state.applied_correction);
                state.last_estimate = estimate;
                state.applied_correction = wrap(state.applied_correction - self.gain * estimate);
            }
        }
        state.previous = Some((u, offset));
        state.applied_correction
    }
}

/// Holds the correction at its initial value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OpenLoop;

impl Controller for OpenLoop {
    fn name(&self) -> String {
        "open-loop".into()
    }

    fn probe_offset(&self, _state: &FeedbackState) -> f64 {
        0.0
    }

    fn estimate_correction(&mut self, counts: CountPair, state: &mut FeedbackState) -> f64 {
        state.d0 = counts.constructive.round() as u64;
        state.d1 = counts.destructive.round() as u64;
        state.signal_lost = counts.total() <= 0.0;
        state.applied_correction
    }
}
