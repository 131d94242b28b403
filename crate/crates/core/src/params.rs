//! Atom–cavity constants, derived rates and regime checks.
//!
//! All rates are angular frequencies in rad/s. The atom number only ever
//! enters through the collective coupling `g√N`, so configurations specify
//! the cooperativity and the solver backs out `g` for the chosen `N`.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{invalid, Result};

/// Converts a frequency given as ν/2π in MHz to rad/s.
pub fn mhz_to_rad(mhz: f64) -> f64 {
    TAU * mhz * 1e6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalParams {
    /// Single-atom coupling to the cavity mode.
    pub g: f64,
    pub n_atoms: f64,
    pub gamma_perp: f64,
    pub kappa: f64,
    /// Raman detuning, signed.
    pub delta: f64,
    /// Spin transition frequency, signed.
    pub omega_sg: f64,
}

impl PhysicalParams {
    pub fn new(g: f64, n_atoms: f64, gamma_perp: f64, kappa: f64, delta: f64, omega_sg: f64) -> Result<Self> {
        let p = Self { g, n_atoms, gamma_perp, kappa, delta, omega_sg };
        p.check()?;
        Ok(p)
    }

    /// Builds the parameter set from the cooperativity `C = g²N/(γ⊥κ)`.
    pub fn from_cooperativity(
        cooperativity: f64,
        gamma_perp: f64,
        kappa: f64,
        delta: f64,
        omega_sg: f64,
        n_atoms: f64,
    ) -> Result<Self> {
        if !(cooperativity > 0.0) || !cooperativity.is_finite() {
            return Err(invalid("cooperativity", format!("must be positive, got {cooperativity}")));
        }
        if !(n_atoms >= 1.0) || !n_atoms.is_finite() {
            return Err(invalid("atom_number", format!("must be >= 1, got {n_atoms}")));
        }
        let g = (cooperativity * gamma_perp * kappa / n_atoms).sqrt();
        Self::new(g, n_atoms, gamma_perp, kappa, delta, omega_sg)
    }

    /// Operating point used for the published sweep: C = 200,
    /// γ⊥/2π = 3 MHz, κ/2π = 2 MHz, Δ/2π = 200 MHz, ω_sg/2π = 10 MHz.
    pub fn reference() -> Self {
        Self::from_cooperativity(
            200.0,
            mhz_to_rad(3.0),
            mhz_to_rad(2.0),
            mhz_to_rad(200.0),
            mhz_to_rad(10.0),
            1.0,
        )
        .expect("reference parameters are valid")
    }

    fn check(&self) -> Result<()> {
        let positive = [
            ("g", self.g),
            ("atom_number", self.n_atoms),
            ("gamma_perp", self.gamma_perp),
            ("kappa", self.kappa),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.n_atoms < 1.0 {
            return Err(invalid("atom_number", format!("must be >= 1, got {}", self.n_atoms)));
        }
        for (name, v) in [("delta", self.delta), ("omega_sg", self.omega_sg)] {
            if v == 0.0 || !v.is_finite() {
                return Err(invalid(name, format!("must be nonzero and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Collective coupling `g√N`.
    pub fn collective_coupling(&self) -> f64 {
        self.g * self.n_atoms.sqrt()
    }

    /// `g²N`.
    pub fn coupling_sq(&self) -> f64 {
        self.g * self.g * self.n_atoms
    }

    /// Complex memory-channel coupling `(g√N/Δ)(1 + iγ⊥/Δ)`; the two-band
    /// system matrix carries `i` times this on both off-diagonal entries.
    pub fn memory_coupling(&self) -> C64 {
        C64::new(1.0, self.gamma_perp / self.delta) * (self.collective_coupling() / self.delta)
    }

    /// Returns a copy with every rate multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            g: self.g * lambda,
            gamma_perp: self.gamma_perp * lambda,
            kappa: self.kappa * lambda,
            delta: self.delta * lambda,
            omega_sg: self.omega_sg * lambda,
            ..*self
        }
    }

    pub fn with_omega_sg(&self, omega_sg: f64) -> Self {
        Self { omega_sg, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedRates {
    pub cooperativity: f64,
    /// Cavity decay including the linear atomic absorption `g²Nγ⊥/Δ²`.
    pub kappa_eff: f64,
    /// Cavity mode shift from the linear refractive index.
    pub delta_c: f64,
    gamma_perp: f64,
    delta: f64,
    coupling_sq: f64,
    omega_sg: f64,
}

impl DerivedRates {
    /// Spin damping `2γ⊥|Ω|²/Δ²` (both Λ-channels together).
    pub fn spin_decay(&self, omega: C64) -> f64 {
        2.0 * self.gamma_perp * omega.norm_sqr() / (self.delta * self.delta)
    }

    /// Raman frequency correction `−g²N|Ω|²/(2ω_sg Δ²)`. Diagnostic only;
    /// the two-band dynamics omit it.
    pub fn delta_r(&self, omega: C64) -> f64 {
        -self.coupling_sq * omega.norm_sqr() / (2.0 * self.omega_sg * self.delta * self.delta)
    }

    /// AC Stark mismatch between the channels. The memory and luminescence
    /// channels share `Ω` and `Δ`, so their shifts cancel identically.
    pub fn delta_s(&self, omega: C64) -> f64 {
        let memory = omega.norm_sqr() / self.delta;
        let luminescence = omega.norm_sqr() / self.delta;
        -(memory - luminescence)
    }
}

pub fn derive_rates(p: &PhysicalParams) -> Result<DerivedRates> {
    if p.delta == 0.0 || !p.delta.is_finite() {
        return Err(invalid("delta", "Raman detuning must be nonzero"));
    }
    if p.omega_sg == 0.0 || !p.omega_sg.is_finite() {
        return Err(invalid("omega_sg", "spin splitting must be nonzero"));
    }
    let coupling_sq = p.coupling_sq();
    let d2 = p.delta * p.delta;
    Ok(DerivedRates {
        cooperativity: coupling_sq / (p.gamma_perp * p.kappa),
        kappa_eff: p.kappa + coupling_sq * p.gamma_perp / d2,
        delta_c: -coupling_sq / p.delta,
        gamma_perp: p.gamma_perp,
        delta: p.delta,
        coupling_sq,
        omega_sg: p.omega_sg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeThresholds {
    /// Upper bound on γ⊥/|Δ| and κ/|Δ|.
    pub raman_ratio: f64,
    /// Required factor in `2|ω_sg| > factor·γ⊥`.
    pub omega_sg_factor: f64,
    /// Upper bound on the depletion number.
    pub depletion: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self { raman_ratio: 0.1, omega_sg_factor: 5.0, depletion: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    fn below(value: f64, limit: f64) -> Self {
        Self { value, limit, pass: value < limit }
    }

    fn above(value: f64, limit: f64) -> Self {
        Self { value, limit, pass: value > limit }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeReport {
    pub gamma_over_delta: Check,
    pub kappa_over_delta: Check,
    /// `2|ω_sg|/γ⊥` against the required factor.
    pub spin_splitting: Check,
    /// Ground-state depletion `(2γ⊥ Ω_max²/Δ²)·T`.
    pub depletion: Check,
    pub pass: bool,
}

pub fn validate_regime(p: &PhysicalParams, th: &RegimeThresholds, omega_max: f64, duration: f64) -> RegimeReport {
    let ad = p.delta.abs();
    let gamma_over_delta = Check::below(p.gamma_perp / ad, th.raman_ratio);
    let kappa_over_delta = Check::below(p.kappa / ad, th.raman_ratio);
    let spin_splitting = Check::above(2.0 * p.omega_sg.abs() / p.gamma_perp, th.omega_sg_factor);
    let d = 2.0 * p.gamma_perp * omega_max * omega_max / (p.delta * p.delta) * duration;
    let depletion = Check::below(d, th.depletion);
    let pass = gamma_over_delta.pass && kappa_over_delta.pass && spin_splitting.pass && depletion.pass;
    RegimeReport { gamma_over_delta, kappa_over_delta, spin_splitting, depletion, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn reference_cooperativity_is_200() {
        let r = derive_rates(&PhysicalParams::reference()).unwrap();
        assert_relative_eq!(r.cooperativity, 200.0, max_relative = 1e-12);
    }

    #[test]
    fn reference_kappa_eff() {
        // κ(1 + Cγ⊥²/Δ²) = κ(1 + 200·(3/200)²) = 1.045κ
        let p = PhysicalParams::reference();
        let r = derive_rates(&p).unwrap();
        assert_relative_eq!(r.kappa_eff, 1.045 * p.kappa, max_relative = 1e-12);
    }

    #[test]
    fn lossless_limit() {
        let p = PhysicalParams { gamma_perp: 0.0, ..PhysicalParams::reference() };
        let r = derive_rates(&p).unwrap();
        assert_eq!(r.kappa_eff, p.kappa);
        assert!(r.delta_r(C64::new(1e7, 0.0)) < 0.0);
    }

    #[test]
    fn rejects_zero_detunings() {
        let p = PhysicalParams { delta: 0.0, ..PhysicalParams::reference() };
        assert!(derive_rates(&p).is_err());
        let p = PhysicalParams { omega_sg: 0.0, ..PhysicalParams::reference() };
        assert!(derive_rates(&p).is_err());
    }

    #[test]
    fn constructor_rejects_nonpositive() {
        let r = PhysicalParams::reference();
        assert!(PhysicalParams::new(r.g, r.n_atoms, -1.0, r.kappa, r.delta, r.omega_sg).is_err());
        assert!(PhysicalParams::new(r.g, 0.5, r.gamma_perp, r.kappa, r.delta, r.omega_sg).is_err());
        assert!(PhysicalParams::from_cooperativity(0.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn delta_s_vanishes() {
        let r = derive_rates(&PhysicalParams::reference()).unwrap();
        for om in [C64::new(0.0, 0.0), C64::new(3.7e7, -1.2e8), C64::new(1e9, 1e9)] {
            assert_eq!(r.delta_s(om), 0.0);
        }
    }

    #[test]
    fn reference_regime_passes_without_control() {
        let p = PhysicalParams::reference();
        let rep = validate_regime(&p, &RegimeThresholds::default(), 0.0, 1e-6);
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.depletion.value, 0.0);
    }

    #[test]
    fn depletion_fails_for_strong_control() {
        let p = PhysicalParams::reference();
        let rep = validate_regime(&p, &RegimeThresholds::default(), p.delta, 1e-6);
        assert!(!rep.depletion.pass);
        assert!(!rep.pass);
    }

    proptest! {
        #[test]
        fn rates_scale_covariantly(lambda in 0.01f64..100.0) {
            let p = PhysicalParams::reference();
            let a = derive_rates(&p).unwrap();
            let b = derive_rates(&p.scaled(lambda)).unwrap();
            prop_assert!((b.cooperativity / a.cooperativity - 1.0).abs() < 1e-12);
            prop_assert!((b.kappa_eff / (lambda * a.kappa_eff) - 1.0).abs() < 1e-12);
            prop_assert!((b.delta_c / (lambda * a.delta_c) - 1.0).abs() < 1e-12);
        }
    }
}
