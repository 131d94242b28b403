//! Impedance-matched control synthesis for the readout stage.
//!
//! Given the target mode `E₀(t)` the cavity equation fixes the product
//! `ΩS(t)`, the excitation balance fixes `|S(t)|²` up to a constant, and
//! the spin equation fixes the phase of `S`. The control is then
//! `Ω = ΩS / S`.
//!
//! The balance and phase integrands are closed-form in `t`, so both are
//! integrated interval by interval with Gauss–Legendre panels. The same
//! panels give `|S|²` and `φ_s` at any off-grid time, which is what the
//! propagator consumes.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dynamics::Drive;
use crate::error::{invalid, Error, Result};
use crate::params::{derive_rates, DerivedRates, PhysicalParams};
use crate::quadrature::{bisect, gauss_legendre};
use crate::signal::SignalMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlConfig {
    /// Minimum spin population `ε` reached by the synthesized trajectory.
    pub floor_eps: f64,
    /// Cap on `|Ω|` in units of `|Δ|κ_eff/(g√N)`.
    pub omega_cap_factor: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self { floor_eps: 1e-3, omega_cap_factor: 10.0 }
    }
}

/// Closed-form ingredients of the inverse problem for one mode.
#[derive(Debug, Clone)]
struct Target {
    mode: SignalMode,
    rates: DerivedRates,
    /// `(Δ/g√N)(1 − iγ⊥/Δ)`
    omega_s_factor: C64,
    /// `4γ⊥|ΩS|²/Δ² = loss_coeff · y²`
    loss_coeff: f64,
    /// `−γ⊥/Δ`
    phase_coeff: f64,
}

impl Target {
    fn new(mode: &SignalMode, p: &PhysicalParams) -> Result<Self> {
        let rates = derive_rates(p)?;
        let omega_s_factor = C64::new(1.0, -p.gamma_perp / p.delta) * (p.delta / p.collective_coupling());
        let loss_coeff = 4.0 * p.gamma_perp * omega_s_factor.norm_sqr() / (p.delta * p.delta);
        Ok(Self {
            mode: mode.clone(),
            rates,
            omega_s_factor,
            loss_coeff,
            phase_coeff: -p.gamma_perp / p.delta,
        })
    }

    /// `dE₀/dt + κ_eff E₀`
    fn drive_term(&self, t: f64) -> f64 {
        self.mode.derivative_at(t) + self.rates.kappa_eff * self.mode.value(t)
    }

    fn omega_s(&self, t: f64) -> C64 {
        self.omega_s_factor * self.drive_term(t)
    }

    /// `d|S|²/dt = −d(E₀²)/dt − 2κ_eff E₀² − 4γ⊥|ΩS|²/Δ²`
    fn pop_rate(&self, t: f64) -> f64 {
        let y = self.drive_term(t);
        -2.0 * self.mode.value(t) * y - self.loss_coeff * y * y
    }

    /// `[d/dt + 2κ_eff]E₀²`
    fn phase_source(&self, t: f64) -> f64 {
        2.0 * self.mode.value(t) * self.drive_term(t)
    }
}

/// Solution of the excitation balance with the floor rule applied.
#[derive(Debug, Clone)]
pub struct Balance {
    target: Target,
    /// `|S(t_k)|² − |S(0)|²`
    relative: Vec<f64>,
    pub s0_sq: f64,
    pub spin_pop: Vec<f64>,
    pub eta: f64,
    /// `|S(T)|²`
    pub residual: f64,
    /// Time of the population minimum.
    pub t_min: f64,
    pub floor: f64,
}

impl Balance {
    /// `|S(t)|²` at any `t ∈ [0, T]`.
    pub fn pop_at(&self, t: f64) -> f64 {
        let (k, t_k) = self.node_below(t);
        if t == t_k {
            return self.spin_pop[k];
        }
        self.spin_pop[k] + gauss_legendre(t_k, t, |s| self.target.pop_rate(s))
    }

    fn node_below(&self, t: f64) -> (usize, f64) {
        let grid = &self.target.mode.grid;
        let k = ((t / grid.step()).floor().max(0.0) as usize).min(grid.n - 1);
        (k, grid.time(k))
    }
}

/// Samples of `(ΩS)(t) = (Δ/g√N)(1 − iγ⊥/Δ)[dE₀/dt + κ_eff E₀]`.
pub fn compute_omega_s(m: &SignalMode, p: &PhysicalParams) -> Result<Vec<C64>> {
    let target = Target::new(m, p)?;
    Ok(m.grid.times().map(|t| target.omega_s(t)).collect())
}

/// Integrates the excitation balance and fixes `|S(0)|²` so that the
/// population minimum over `[0, T]` equals `floor`.
pub fn integrate_balance(m: &SignalMode, p: &PhysicalParams, floor: f64) -> Result<Balance> {
    if !(floor > 0.0) || !floor.is_finite() {
        return Err(invalid("floor_eps", format!("must be positive, got {floor}")));
    }
    let target = Target::new(m, p)?;
    let grid = m.grid;
    let mut relative = Vec::with_capacity(grid.n);
    relative.push(0.0);
    for k in 1..grid.n {
        let prev = relative[k - 1];
        relative.push(prev + gauss_legendre(grid.time(k - 1), grid.time(k), |s| target.pop_rate(s)));
    }

    // Interior minima sit where the population rate turns from negative to
    // positive; refine each inside its grid interval.
    let (mut f_min, mut t_min) = (relative[0], 0.0);
    for (k, &r) in relative.iter().enumerate() {
        if r < f_min {
            f_min = r;
            t_min = grid.time(k);
        }
    }
    let mut rate_prev = target.pop_rate(0.0);
    for k in 1..grid.n {
        let (a, b) = (grid.time(k - 1), grid.time(k));
        let rate = target.pop_rate(b);
        if rate_prev < 0.0 && rate > 0.0 {
            let root = bisect(a, b, |s| target.pop_rate(s));
            let value = relative[k - 1] + gauss_legendre(a, root, |s| target.pop_rate(s));
            if value < f_min {
                f_min = value;
                t_min = root;
            }
        }
        rate_prev = rate;
    }

    let s0_sq = floor - f_min;
    if s0_sq < 1.0 {
        return Err(Error::EfficiencyAboveOne { s0_sq });
    }
    let spin_pop: Vec<f64> = relative.iter().map(|r| s0_sq + r).collect();
    let residual = *spin_pop.last().expect("grid is nonempty");
    Ok(Balance { target, relative, s0_sq, spin_pop, eta: 1.0 / s0_sq, residual, t_min, floor })
}

impl Balance {
    /// Population profile relative to its initial value, before the floor
    /// rule fixes the constant.
    pub fn relative_profile(&self) -> &[f64] {
        &self.relative
    }
}

/// Spin phase `φ_s(t) = −(γ⊥/Δ)∫₀ᵗ |S|⁻²[d/dt' + 2κ_eff]E₀² dt'`.
pub fn compute_spin_phase(balance: &Balance) -> Vec<f64> {
    let grid = balance.target.mode.grid;
    let mut phase = Vec::with_capacity(grid.n);
    phase.push(0.0);
    for k in 1..grid.n {
        let prev = phase[k - 1];
        phase.push(prev + phase_increment(balance, grid.time(k - 1), grid.time(k)));
    }
    phase
}

fn phase_increment(balance: &Balance, a: f64, b: f64) -> f64 {
    let target = &balance.target;
    if target.phase_coeff == 0.0 {
        return 0.0;
    }
    target.phase_coeff * gauss_legendre(a, b, |s| target.phase_source(s) / balance.pop_at(s))
}

/// Result of combining `ΩS`, `|S|²` and `φ_s` into the spin and control.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub spin: Vec<C64>,
    pub control: Vec<C64>,
    /// Number of samples whose control amplitude hit the cap.
    pub capped: usize,
}

/// `S = √(|S|²) e^{iφ_s}`, `Ω = ΩS/S`, with `|Ω|` clipped at `omega_cap`.
pub fn synthesize_control(
    omega_s: &[C64],
    spin_pop: &[f64],
    spin_phase: &[f64],
    omega_cap: f64,
) -> Result<Synthesis> {
    let n = omega_s.len();
    for len in [spin_pop.len(), spin_phase.len()] {
        if len != n {
            return Err(Error::GridMismatch { left: n, right: len });
        }
    }
    let mut capped = 0;
    let mut spin = Vec::with_capacity(n);
    let mut control = Vec::with_capacity(n);
    for k in 0..n {
        let s = C64::from_polar(spin_pop[k].sqrt(), spin_phase[k]);
        let (om, hit) = clip(omega_s[k] / s, omega_cap);
        capped += hit as usize;
        spin.push(s);
        control.push(om);
    }
    let fraction = capped as f64 / n.max(1) as f64;
    if fraction > 0.01 {
        return Err(Error::ControlCapExceeded { fraction });
    }
    Ok(Synthesis { spin, control, capped })
}

fn clip(om: C64, cap: f64) -> (C64, bool) {
    let a = om.norm();
    if a > cap {
        (om * (cap / a), true)
    } else {
        (om, false)
    }
}

/// Complete readout control for one target mode.
#[derive(Debug, Clone)]
pub struct ControlSolution {
    pub omega_s_product: Vec<C64>,
    pub spin_pop: Vec<f64>,
    pub spin_phase: Vec<f64>,
    pub spin: Vec<C64>,
    pub control: Vec<C64>,
    pub eta: f64,
    pub residual: f64,
    pub floor: f64,
    pub omega_cap: f64,
    pub capped: usize,
    pub t_min: f64,
    balance: Balance,
}

impl ControlSolution {
    pub fn synthesize(m: &SignalMode, p: &PhysicalParams, cfg: &ControlConfig) -> Result<Self> {
        if !(cfg.omega_cap_factor > 0.0) {
            return Err(invalid("omega_cap_factor", "must be positive"));
        }
        let omega_s_product = compute_omega_s(m, p)?;
        let balance = integrate_balance(m, p, cfg.floor_eps)?;
        let spin_phase = compute_spin_phase(&balance);
        let omega_cap = cfg.omega_cap_factor * p.delta.abs() * balance.target.rates.kappa_eff / p.collective_coupling();
        let syn = synthesize_control(&omega_s_product, &balance.spin_pop, &spin_phase, omega_cap)?;
        Ok(Self {
            omega_s_product,
            spin_pop: balance.spin_pop.clone(),
            spin_phase,
            spin: syn.spin,
            control: syn.control,
            eta: balance.eta,
            residual: balance.residual,
            floor: cfg.floor_eps,
            omega_cap,
            capped: syn.capped,
            t_min: balance.t_min,
            balance,
        })
    }

    pub fn mode(&self) -> &SignalMode {
        &self.balance.target.mode
    }

    pub fn s0_sq(&self) -> f64 {
        self.balance.s0_sq
    }

    pub fn omega_max(&self) -> f64 {
        self.control.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `|S(t)|²` off the grid.
    pub fn spin_pop_at(&self, t: f64) -> f64 {
        self.balance.pop_at(t)
    }

    /// `S(t)` off the grid.
    pub fn spin_at(&self, t: f64) -> C64 {
        let (k, t_k) = self.balance.node_below(t);
        if t == t_k {
            return self.spin[k];
        }
        let phase = self.spin_phase[k] + phase_increment(&self.balance, t_k, t);
        C64::from_polar(self.balance.pop_at(t).sqrt(), phase)
    }

    pub fn omega_s_at(&self, t: f64) -> C64 {
        self.balance.target.omega_s(t)
    }
}

impl Drive for ControlSolution {
    fn omega(&self, t: f64) -> C64 {
        let (k, t_k) = self.balance.node_below(t);
        if t == t_k {
            return self.control[k];
        }
        clip(self.omega_s_at(t) / self.spin_at(t), self.omega_cap).0
    }
}
