//! Target temporal mode of the retrieved signal.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{bisect, gauss_legendre_composite};

pub const MIN_SAMPLES: usize = 64;

/// Truncation level `e⁻⁴` subtracted from the Gaussian.
const FLOOR: f64 = 0.018_315_638_888_734_18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub duration: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(duration: f64, n: usize) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(invalid("duration", format!("must be positive, got {duration}")));
        }
        if n < MIN_SAMPLES {
            return Err(Error::GridTooSmall { n, min: MIN_SAMPLES });
        }
        Ok(Self { duration, n })
    }

    pub fn step(&self) -> f64 {
        self.duration / (self.n - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.duration
        } else {
            self.step() * k as f64
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|k| self.time(k))
    }

    /// Grid with twice as many intervals over the same span.
    pub fn refined(&self, factor: usize) -> Self {
        Self { duration: self.duration, n: (self.n - 1) * factor + 1 }
    }
}

/// Quasi-Gaussian envelope `N_E[exp(−16(t/T−½)²) − e⁻⁴]` normalized so
/// that `2κ∫₀ᵀ E₀² dt = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMode {
    pub grid: TimeGrid,
    pub kappa: f64,
    pub norm_coeff: f64,
    pub samples: Vec<f64>,
    pub derivative: Vec<f64>,
}

impl SignalMode {
    /// Envelope value at an arbitrary time in `[0, T]`.
    pub fn value(&self, t: f64) -> f64 {
        let x = t / self.grid.duration - 0.5;
        self.norm_coeff * ((-16.0 * x * x).exp() - FLOOR)
    }

    pub fn derivative_at(&self, t: f64) -> f64 {
        let big_t = self.grid.duration;
        let x = t / big_t - 0.5;
        self.norm_coeff * (-16.0 * x * x).exp() * (-32.0 * x / big_t)
    }

    pub fn second_derivative_at(&self, t: f64) -> f64 {
        let big_t = self.grid.duration;
        let x = t / big_t - 0.5;
        let g = (-16.0 * x * x).exp();
        self.norm_coeff * g * (1024.0 * x * x - 32.0) / (big_t * big_t)
    }

    /// Dimensionless time `τ = 2κt` at grid index `k`.
    pub fn tau(&self, k: usize) -> f64 {
        2.0 * self.kappa * self.grid.time(k)
    }

    /// Total dimensionless duration `𝒯 = 2κT`.
    pub fn tau_total(&self) -> f64 {
        2.0 * self.kappa * self.grid.duration
    }

    /// Same shape with the amplitude multiplied by `factor`; `0.0` gives
    /// the empty mode.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            norm_coeff: self.norm_coeff * factor,
            samples: self.samples.iter().map(|v| v * factor).collect(),
            derivative: self.derivative.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// `∫₀¹ [exp(−16(x−½)²) − e⁻⁴]² dx` by composite Gauss–Legendre.
fn unit_shape_energy() -> f64 {
    gauss_legendre_composite(0.0, 1.0, 64, |x: f64| {
        let v = (-16.0 * (x - 0.5) * (x - 0.5)).exp() - FLOOR;
        v * v
    })
}

pub fn make_target_mode(duration: f64, kappa: f64, n: usize) -> Result<SignalMode> {
    let grid = TimeGrid::new(duration, n)?;
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(invalid("kappa", format!("must be positive, got {kappa}")));
    }
    let norm_coeff = 1.0 / (2.0 * kappa * duration * unit_shape_energy()).sqrt();
    let mut mode = SignalMode { grid, kappa, norm_coeff, samples: Vec::new(), derivative: Vec::new() };
    let mut samples: Vec<f64> = grid.times().map(|t| mode.value(t)).collect();
    // exp(-4) - e^-4 is zero analytically; pin the endpoints against rounding
    samples[0] = 0.0;
    samples[n - 1] = 0.0;
    mode.derivative = grid.times().map(|t| mode.derivative_at(t)).collect();
    mode.samples = samples;
    Ok(mode)
}

/// Full width of the envelope at `1/e` of its peak, in units of `T`.
pub fn mode_width_check(m: &SignalMode) -> f64 {
    let big_t = m.grid.duration;
    let peak = m.value(0.5 * big_t);
    let level = peak / std::f64::consts::E;
    let f = |t: f64| m.value(t) - level;
    let left = bisect(0.0, 0.5 * big_t, f);
    let right = bisect(0.5 * big_t, big_t, f);
    (right - left) / big_t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::simpson;
    use approx::assert_relative_eq;

    const KAPPA: f64 = std::f64::consts::TAU * 2e6;

    fn duration(tau_total: f64) -> f64 {
        tau_total / (2.0 * KAPPA)
    }

    /// Independent normalization: Simpson on 10⁵ + 1 samples of the raw shape.
    fn norm_oracle(big_t: f64) -> f64 {
        let n = 100_001;
        let h = big_t / (n - 1) as f64;
        let s: Vec<f64> = (0..n)
            .map(|k| {
                let x = k as f64 * h / big_t - 0.5;
                let v = (-16.0 * x * x).exp() - (-4.0f64).exp();
                v * v
            })
            .collect();
        (2.0 * KAPPA * simpson(&s, h)).powf(-0.5)
    }

    #[test]
    fn endpoints_vanish_and_peak_is_central() {
        for tau in [4.0, 20.0] {
            let m = make_target_mode(duration(tau), KAPPA, 4096).unwrap();
            assert_eq!(m.samples[0], 0.0);
            assert_eq!(*m.samples.last().unwrap(), 0.0);
            let peak = m.value(0.5 * m.grid.duration);
            assert_relative_eq!(peak, m.norm_coeff * (1.0 - (-4.0f64).exp()), max_relative = 1e-15);
            assert!(m.samples.iter().all(|&v| v <= peak && v >= 0.0));
        }
    }

    #[test]
    fn symmetric_about_midpoint() {
        let m = make_target_mode(duration(12.0), KAPPA, 4097).unwrap();
        let n = m.samples.len();
        for k in 0..n / 2 {
            assert_relative_eq!(m.samples[k], m.samples[n - 1 - k], epsilon = 1e-12 * m.norm_coeff);
        }
    }

    #[test]
    fn norm_matches_simpson_oracle() {
        let big_t = duration(20.0);
        let m = make_target_mode(big_t, KAPPA, 4096).unwrap();
        assert_relative_eq!(m.norm_coeff, norm_oracle(big_t), max_relative = 1e-10);
    }

    #[test]
    fn grid_normalization_within_tolerance() {
        let m = make_target_mode(duration(8.0), KAPPA, 4096).unwrap();
        let sq: Vec<f64> = m.samples.iter().map(|v| v * v).collect();
        let total = 2.0 * KAPPA * simpson(&sq, m.grid.step());
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn normalization_error_falls_at_fourth_order() {
        let err = |n: usize| {
            let m = make_target_mode(duration(4.0), KAPPA, n).unwrap();
            let sq: Vec<f64> = m.samples.iter().map(|v| v * v).collect();
            (2.0 * KAPPA * simpson(&sq, m.grid.step()) - 1.0).abs()
        };
        let (e1, e2, e3) = (err(65), err(129), err(257));
        assert!(e1 / e2 > 12.0, "{e1} {e2}");
        assert!(e2 / e3 > 12.0, "{e2} {e3}");
    }

    #[test]
    fn analytic_derivative_matches_central_differences() {
        let m = make_target_mode(duration(12.0), KAPPA, 4096).unwrap();
        let h = m.grid.step();
        let scale = m.derivative.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let worst = (1..m.samples.len() - 1)
            .map(|k| ((m.samples[k + 1] - m.samples[k - 1]) / (2.0 * h) - m.derivative[k]).abs())
            .fold(0.0, f64::max);
        assert!(worst / scale < 1e-4, "{}", worst / scale);
    }

    #[test]
    fn width_is_half_duration() {
        for (tau, n) in [(4.0, 4096), (20.0, 4096), (20.0, 8192)] {
            let m = make_target_mode(duration(tau), KAPPA, n).unwrap();
            let w = mode_width_check(&m);
            assert!((w - 0.5).abs() <= 0.01, "{w}");
        }
        let a = mode_width_check(&make_target_mode(duration(4.0), KAPPA, 512).unwrap());
        let b = mode_width_check(&make_target_mode(duration(20.0), KAPPA, 1024).unwrap());
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(make_target_mode(1e-6, KAPPA, 63), Err(Error::GridTooSmall { .. })));
        assert!(make_target_mode(0.0, KAPPA, 128).is_err());
        assert!(make_target_mode(-1.0, KAPPA, 128).is_err());
    }
}
