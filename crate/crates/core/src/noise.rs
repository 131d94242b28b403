//! Second-moment noise budget of the retrieved signal and the residual spin.
//!
//! The output mode amplitude is
//!
//! ```text
//! E_d = G_dE E(0) + P_dS(T,0) S(0) + G_d+ Φ_d⁽⁺⁾ + G_d− Φ_d⁽⁻⁾
//! ```
//!
//! where the `(+)` sources are the memory-channel annihilation noises (cavity
//! input, atomic `F_E`, `F_S`) and the `(−)` sources are the creation noises
//! fed through the luminescence channel with amplitude
//! `λ(t) = g√N Ω(t)/(2ω_sg Δ)`. Every weight below is an integral over the
//! readout window of a quadratic form in the kernels, built from the
//! source commutators
//!
//! ```text
//! A_EE = 2γ⊥g²N/Δ²,  A_SS = 2γ⊥|Ω|²/Δ²,  A_ES = 2γ⊥ g√N Ω/Δ²,
//! ```
//!
//! plus `2κ` for the cavity input. `F_E` and `F_S` are proportional to the
//! same reservoir operator, so `|A_ES|² = A_EE·A_SS`.
//!
//! Pair sums such as the covariance `K` are reported unnormalized, i.e. as
//! the product `G_d− G_S−* ⟨Φ_S⁽⁻⁾†Φ_d⁽⁻⁾⟩` rather than the normalized
//! correlator.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::dynamics::PropagatorTable;
use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use crate::quadrature::{simpson, simpson_panel};
use crate::signal::{SignalMode, TimeGrid};

/// Source commutator powers for the two-band equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseCovariances {
    pub a_ee: f64,
    pub kappa: f64,
    gamma_perp: f64,
    delta: f64,
    coupling: f64,
    omega_sg: f64,
}

impl NoiseCovariances {
    pub fn new(p: &PhysicalParams) -> Self {
        Self {
            a_ee: 2.0 * p.gamma_perp * p.coupling_sq() / (p.delta * p.delta),
            kappa: p.kappa,
            gamma_perp: p.gamma_perp,
            delta: p.delta,
            coupling: p.collective_coupling(),
            omega_sg: p.omega_sg,
        }
    }

    pub fn a_ss(&self, omega: C64) -> f64 {
        2.0 * self.gamma_perp * omega.norm_sqr() / (self.delta * self.delta)
    }

    pub fn a_es(&self, omega: C64) -> C64 {
        omega * (2.0 * self.gamma_perp * self.coupling / (self.delta * self.delta))
    }

    /// Luminescence amplitude `g√N Ω/(2ω_sg Δ)`.
    pub fn lum_prefactor(&self, omega: C64) -> C64 {
        omega * (self.coupling / (2.0 * self.omega_sg * self.delta))
    }

    /// Creation-noise pair weight for kernels `x = (x_E, x_S)` and
    /// `y = (y_E, y_S)`:
    /// `|λ|²[x_E y_E* A_SS + x_E y_S* A_ES + x_S y_E* A_ES* + x_S y_S*(A_EE + 2κ)]`.
    pub fn lum_pair(&self, omega: C64, x: (C64, C64), y: (C64, C64)) -> C64 {
        let a_es = self.a_es(omega);
        let form = x.0 * y.0.conj() * self.a_ss(omega)
            + x.0 * y.1.conj() * a_es
            + x.1 * y.0.conj() * a_es.conj()
            + x.1 * y.1.conj() * (self.a_ee + 2.0 * self.kappa);
        form * self.lum_prefactor(omega).norm_sqr()
    }

    /// Memory-channel atomic pair weight
    /// `(2γ⊥/Δ²)(g√N x_E + Ω* x_S)(g√N y_E + Ω* y_S)*`.
    pub fn atomic_pair(&self, omega: C64, x: (C64, C64), y: (C64, C64)) -> C64 {
        let u = x.0 * self.coupling + omega.conj() * x.1;
        let v = y.0 * self.coupling + omega.conj() * y.1;
        u * v.conj() * (2.0 * self.gamma_perp / (self.delta * self.delta))
    }
}

/// Green-function projections on the signal mode, `P_dE(T, t_k)` and
/// `P_dS(T, t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    pub grid: TimeGrid,
    pub p_de: Vec<C64>,
    pub p_ds: Vec<C64>,
}

impl Projections {
    fn at(&self, k: usize) -> (C64, C64) {
        (self.p_de[k], self.p_ds[k])
    }
}

/// Single backward pass: `w(t) = ∫ₜᵀ E₀(t')[M₁₁, M₁₂](t')dt'` accumulated
/// with midpoint Simpson panels, then `P(T,t) = 2κ w(t)M(t)⁻¹`.
pub fn compute_projections(tab: &PropagatorTable, m: &SignalMode) -> Result<Projections> {
    let grid = tab.grid;
    if grid.n != m.grid.n {
        return Err(Error::GridMismatch { left: grid.n, right: m.grid.n });
    }
    let h = grid.step();
    let row = |mat: &crate::dynamics::Mat, e: f64| [mat[(0, 0)] * e, mat[(0, 1)] * e];
    let mut p_de = vec![C64::new(0.0, 0.0); grid.n];
    let mut p_ds = vec![C64::new(0.0, 0.0); grid.n];
    let mut w = [C64::new(0.0, 0.0); 2];
    let mut right = row(&tab.m[grid.n - 1], m.samples[grid.n - 1]);
    for k in (0..grid.n - 1).rev() {
        let left = row(&tab.m[k], m.samples[k]);
        let mid = row(&tab.mid[k], m.value(grid.time(k) + 0.5 * h));
        for c in 0..2 {
            w[c] += simpson_panel(left[c], mid[c], right[c], h);
        }
        let inv = &tab.m_inv[k];
        let scale = 2.0 * m.kappa;
        p_de[k] = (w[0] * inv[(0, 0)] + w[1] * inv[(1, 0)]) * scale;
        p_ds[k] = (w[0] * inv[(0, 1)] + w[1] * inv[(1, 1)]) * scale;
        right = left;
    }
    Ok(Projections { grid, p_de, p_ds })
}

/// Raw spin kernels `G_SE(T, t_k)` and `G_SS(T, t_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinKernels {
    pub g_se: Vec<C64>,
    pub g_ss: Vec<C64>,
}

impl SpinKernels {
    pub fn from_table(tab: &PropagatorTable) -> Self {
        let last = tab.grid.n - 1;
        let (g_se, g_ss) = (0..tab.grid.n)
            .map(|k| {
                let g = tab.green(last, k);
                (g[(1, 0)], g[(1, 1)])
            })
            .unzip();
        Self { g_se, g_ss }
    }

    fn at(&self, k: usize) -> (C64, C64) {
        (self.g_se[k], self.g_ss[k])
    }
}

fn check_len(grid: &TimeGrid, omega: &[C64]) -> Result<()> {
    if omega.len() != grid.n {
        return Err(Error::GridMismatch { left: grid.n, right: omega.len() });
    }
    Ok(())
}

fn integrate<F: Fn(usize) -> C64>(grid: &TimeGrid, f: F) -> C64 {
    let v: Vec<C64> = (0..grid.n).map(f).collect();
    simpson(&v, grid.step())
}

/// Four-wave-mixing weight `|G_d−|²`.
pub fn fwm_noise_power(pr: &Projections, omega: &[C64], p: &PhysicalParams) -> Result<f64> {
    check_len(&pr.grid, omega)?;
    let cov = NoiseCovariances::new(p);
    let v = integrate(&pr.grid, |k| cov.lum_pair(omega[k], pr.at(k), pr.at(k))).re;
    nonnegative(v)
}

/// Memory-channel vacuum weight `|G_d+|²`: cavity input seen through the
/// intracavity path minus its direct reflection, plus the correlated atomic
/// sources.
pub fn memory_channel_noise_power(pr: &Projections, omega: &[C64], p: &PhysicalParams, m: &SignalMode) -> Result<f64> {
    check_len(&pr.grid, omega)?;
    let cov = NoiseCovariances::new(p);
    let v = integrate(&pr.grid, |k| {
        let direct = pr.p_de[k] - m.samples[k];
        cov.atomic_pair(omega[k], pr.at(k), pr.at(k)) + direct * direct.conj() * (2.0 * p.kappa)
    })
    .re;
    nonnegative(v)
}

fn nonnegative(v: f64) -> Result<f64> {
    if v < -1e-12 {
        return Err(Error::NegativePower { value: v });
    }
    Ok(v.max(0.0))
}

/// `⟨(ΔQ_d)²⟩^(add) = ¼(1 − η + 2|G_d−|²)`.
pub fn added_noise_variance(eta: f64, g_dminus_sq: f64) -> f64 {
    0.25 * (1.0 - eta + 2.0 * g_dminus_sq)
}

/// Output quadrature variance `¼(1 + η·excess + 2|G_d−|²)` where `excess`
/// is the normal-ordered quadrature excess of the initial spin at the
/// relative phase `θ_R − θ_h` (zero for vacuum or coherent states).
pub fn output_quadrature_variance(eta: f64, g_dminus_sq: f64, spin_excess: f64) -> Result<f64> {
    if spin_excess < -1.0 {
        return Err(Error::UnphysicalExcess(spin_excess));
    }
    Ok(0.25 * (1.0 + eta * spin_excess + 2.0 * g_dminus_sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpinBudget {
    pub g_se: C64Pair,
    pub g_ss: C64Pair,
    pub gminus_sq: f64,
    pub gplus_sq: f64,
    /// `4⟨(ΔQ_S)²⟩` for a vacuum initial spin, `1 + 2|G_S−|²`.
    pub var_x4: f64,
    pub sum_rule: f64,
}

/// Complex number as a serializable `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C64Pair(pub f64, pub f64);

impl From<C64> for C64Pair {
    fn from(c: C64) -> Self {
        Self(c.re, c.im)
    }
}

impl From<C64Pair> for C64 {
    fn from(c: C64Pair) -> Self {
        C64::new(c.0, c.1)
    }
}

/// Residual-spin statistics at `t = T`.
pub fn spin_noise_budget(tab: &PropagatorTable, omega: &[C64], p: &PhysicalParams) -> Result<SpinBudget> {
    check_len(&tab.grid, omega)?;
    let cov = NoiseCovariances::new(p);
    let q = SpinKernels::from_table(tab);
    let gminus_sq = nonnegative(integrate(&tab.grid, |k| cov.lum_pair(omega[k], q.at(k), q.at(k))).re)?;
    let gplus_sq = integrate(&tab.grid, |k| {
        cov.atomic_pair(omega[k], q.at(k), q.at(k)) + q.g_se[k] * q.g_se[k].conj() * (2.0 * p.kappa)
    })
    .re;
    let (g_se, g_ss) = q.at(0);
    let sum_rule = g_se.norm_sqr() + g_ss.norm_sqr() + gplus_sq - gminus_sq - 1.0;
    Ok(SpinBudget {
        g_se: g_se.into(),
        g_ss: g_ss.into(),
        gminus_sq,
        gplus_sq,
        var_x4: 1.0 + 2.0 * gminus_sq,
        sum_rule,
    })
}

/// `¼(1 + |G_SS|²·excess + 2|G_S−|²)`, with `excess` the normal-ordered
/// quadrature excess of the initial spin at the phase selected by `θ_S`.
pub fn spin_quadrature_variance(spin: &SpinBudget, spin_excess: f64) -> Result<f64> {
    if spin_excess < -1.0 {
        return Err(Error::UnphysicalExcess(spin_excess));
    }
    let g_ss: C64 = spin.g_ss.into();
    Ok(0.25 * (1.0 + g_ss.norm_sqr() * spin_excess + 2.0 * spin.gminus_sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossCorrelation {
    /// Parametric pair sum `K` (luminescence channel).
    pub parametric: C64Pair,
    /// Memory-channel pair sum `K₊`.
    pub memory: C64Pair,
    /// `G_dE G_SE* + P_dS(T,0) G_SS* + K₊ − K`, zero for exact closure.
    pub commutator: C64Pair,
}

/// Signal–spin pair sums entering the cross covariance and the `[E_d, S†]`
/// closure.
pub fn signal_spin_covariance(
    pr: &Projections,
    tab: &PropagatorTable,
    omega: &[C64],
    p: &PhysicalParams,
    m: &SignalMode,
) -> Result<CrossCorrelation> {
    check_len(&pr.grid, omega)?;
    let cov = NoiseCovariances::new(p);
    let q = SpinKernels::from_table(tab);
    let parametric = integrate(&pr.grid, |k| cov.lum_pair(omega[k], pr.at(k), q.at(k)));
    let memory = integrate(&pr.grid, |k| {
        let direct = pr.p_de[k] - m.samples[k];
        cov.atomic_pair(omega[k], pr.at(k), q.at(k)) + direct * q.g_se[k].conj() * (2.0 * p.kappa)
    });
    let commutator = pr.p_de[0] * q.g_se[0].conj() + pr.p_ds[0] * q.g_ss[0].conj() + memory - parametric;
    Ok(CrossCorrelation { parametric: parametric.into(), memory: memory.into(), commutator: commutator.into() })
}

/// Symmetrized signal–spin quadrature covariance for a vacuum initial spin,
/// `Re[e^{−i(θ_h−θ_S)} K]/2`.
pub fn vacuum_cross_covariance(k: C64, theta_h: f64, theta_s: f64) -> f64 {
    0.5 * (C64::from_polar(1.0, -(theta_h - theta_s)) * k).re
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Depletion {
    /// `max_t(2γ⊥|Ω|²/Δ²)·T`
    pub metric: f64,
    /// `∫₀ᵀ 2γ⊥|Ω|²/Δ² dt`
    pub integral: f64,
}

pub fn depletion_metric(omega: &[C64], p: &PhysicalParams, grid: &TimeGrid) -> Result<Depletion> {
    check_len(grid, omega)?;
    let rate = |om: &C64| 2.0 * p.gamma_perp * om.norm_sqr() / (p.delta * p.delta);
    let rates: Vec<f64> = omega.iter().map(rate).collect();
    let max = rates.iter().cloned().fold(0.0, f64::max);
    Ok(Depletion { metric: max * grid.duration, integral: simpson(&rates, grid.step()) })
}

/// Default tolerance constant on commutator residuals in units of the
/// depletion metric.
pub const SUM_RULE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseBudget {
    /// Balance efficiency `1/|S(0)|²`.
    pub eta: f64,
    /// Green-function efficiency `|P_dS(T,0)|²`.
    pub eta_green: f64,
    pub theta_r: f64,
    pub g_de_sq: f64,
    pub g_dplus_sq: f64,
    pub g_dminus_sq: f64,
    /// `4⟨(ΔQ_d)²⟩^(add) = 1 − η + 2|G_d−|²`
    pub added_var_x4: f64,
    pub sum_rule_d: f64,
    pub sum_rule_s: f64,
    pub comm_ds: C64Pair,
    pub spin_gminus_sq: f64,
    pub spin_gplus_sq: f64,
    pub spin_var_x4: f64,
    pub covariance_param: C64Pair,
    pub depletion: f64,
    pub depletion_integral: f64,
}

impl NoiseBudget {
    pub fn compute(
        tab: &PropagatorTable,
        m: &SignalMode,
        omega: &[C64],
        p: &PhysicalParams,
        eta_balance: f64,
    ) -> Result<Self> {
        let pr = compute_projections(tab, m)?;
        let g_dminus_sq = fwm_noise_power(&pr, omega, p)?;
        let g_dplus_sq = memory_channel_noise_power(&pr, omega, p, m)?;
        let spin = spin_noise_budget(tab, omega, p)?;
        let cross = signal_spin_covariance(&pr, tab, omega, p, m)?;
        let dep = depletion_metric(omega, p, &tab.grid)?;
        let g_de_sq = pr.p_de[0].norm_sqr();
        let eta_green = pr.p_ds[0].norm_sqr();
        let added = 4.0 * added_noise_variance(eta_balance, g_dminus_sq);
        Ok(Self {
            eta: eta_balance,
            eta_green,
            theta_r: pr.p_ds[0].arg(),
            g_de_sq,
            g_dplus_sq,
            g_dminus_sq,
            added_var_x4: added,
            sum_rule_d: g_de_sq + eta_green + g_dplus_sq - g_dminus_sq - 1.0,
            sum_rule_s: spin.sum_rule,
            comm_ds: cross.commutator,
            spin_gminus_sq: spin.gminus_sq,
            spin_gplus_sq: spin.gplus_sq,
            spin_var_x4: spin.var_x4,
            covariance_param: cross.parametric,
            depletion: dep.metric,
            depletion_integral: dep.integral,
        })
    }

    pub fn comm_ds_abs(&self) -> f64 {
        C64::from(self.comm_ds).norm()
    }

    pub fn cov_abs(&self) -> f64 {
        C64::from(self.covariance_param).norm()
    }
}
