//! Two-band field–spin dynamics: fundamental matrix, Green kernels and the
//! first-elimination reference integrator.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::{derive_rates, PhysicalParams};
use crate::quadrature::{gauss_legendre, simpson};
use crate::signal::{SignalMode, TimeGrid};

pub type Mat = Matrix2<C64>;

const SUBSTEPS: usize = 4;
const DET_ALARM: f64 = 1e-12;

/// A complex control field `Ω(t)` that can be sampled at any time.
pub trait Drive: Sync {
    fn omega(&self, t: f64) -> C64;
}

/// `Ω ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoDrive;

impl Drive for NoDrive {
    fn omega(&self, _t: f64) -> C64 {
        C64::new(0.0, 0.0)
    }
}

/// Uniform samples with cubic (Catmull–Rom) interpolation between them.
#[derive(Debug, Clone)]
pub struct SampledDrive {
    grid: TimeGrid,
    samples: Vec<C64>,
}

impl SampledDrive {
    pub fn new(grid: TimeGrid, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.n {
            return Err(Error::GridMismatch { left: grid.n, right: samples.len() });
        }
        Ok(Self { grid, samples })
    }
}

impl Drive for SampledDrive {
    fn omega(&self, t: f64) -> C64 {
        let n = self.grid.n;
        let x = (t / self.grid.step()).clamp(0.0, (n - 1) as f64);
        let k = (x.floor() as usize).min(n - 2);
        let u = x - k as f64;
        let at = |i: isize| self.samples[i.clamp(0, n as isize - 1) as usize];
        let (p0, p1, p2, p3) = (at(k as isize - 1), at(k as isize), at(k as isize + 1), at(k as isize + 2));
        let u2 = u * u;
        let u3 = u2 * u;
        (p1 * 2.0 + (p2 - p0) * u + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * u2 + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * u3) * 0.5
    }
}

/// Drift matrix of the semiclassical two-band equations in the `(E, S)`
/// basis; `δ_R` is omitted.
#[derive(Debug, Clone, Copy)]
pub struct SystemMatrix {
    kappa_eff: f64,
    /// `i(g√N/Δ)(1 + iγ⊥/Δ)`
    coupling: C64,
    /// `2γ⊥/Δ²`
    spin_decay: f64,
}

impl SystemMatrix {
    pub fn new(p: &PhysicalParams) -> Result<Self> {
        let rates = derive_rates(p)?;
        Ok(Self {
            kappa_eff: rates.kappa_eff,
            coupling: C64::i() * p.memory_coupling(),
            spin_decay: 2.0 * p.gamma_perp / (p.delta * p.delta),
        })
    }

    pub fn at(&self, omega: C64) -> Mat {
        Mat::new(
            C64::new(-self.kappa_eff, 0.0),
            self.coupling * omega,
            self.coupling * omega.conj(),
            C64::new(-self.spin_decay * omega.norm_sqr(), 0.0),
        )
    }

    pub fn trace(&self, omega: C64) -> f64 {
        -self.kappa_eff - self.spin_decay * omega.norm_sqr()
    }
}

/// Fundamental-matrix samples `M(t_k)` with `M(0) = I`; the Green kernel is
/// `G(t, t') = M(t)M(t')⁻¹`.
#[derive(Debug, Clone)]
pub struct PropagatorTable {
    pub grid: TimeGrid,
    pub m: Vec<Mat>,
    /// `M` at interval midpoints, `mid[k]` at `t_k + h/2`.
    pub mid: Vec<Mat>,
    pub m_inv: Vec<Mat>,
    /// `∫₀^{t_k} tr A dt`, for the Liouville check.
    pub trace_integral: Vec<f64>,
}

impl PropagatorTable {
    /// `G(t_i, t_j)` for `i ≥ j`.
    pub fn green(&self, i: usize, j: usize) -> Mat {
        self.m[i] * self.m_inv[j]
    }

    /// Worst relative deviation of `det M(t_k)` from `exp(∫tr A)`.
    pub fn liouville_error(&self) -> f64 {
        self.m
            .iter()
            .zip(&self.trace_integral)
            .map(|(m, tr)| {
                let expect = tr.exp();
                (m.determinant() - C64::new(expect, 0.0)).norm() / expect
            })
            .fold(0.0, f64::max)
    }
}

fn rk4_step(sys: &SystemMatrix, drive: &dyn Drive, t: f64, h: f64, m: &Mat) -> Mat {
    let a0 = sys.at(drive.omega(t));
    let am = sys.at(drive.omega(t + 0.5 * h));
    let a1 = sys.at(drive.omega(t + h));
    let k1 = a0 * m;
    let k2 = am * (m + k1 * C64::new(0.5 * h, 0.0));
    let k3 = am * (m + k2 * C64::new(0.5 * h, 0.0));
    let k4 = a1 * (m + k3 * C64::new(h, 0.0));
    m + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0)
}

/// Integrates `dM/dt = A(t)M` with classical RK4 at four substeps per grid
/// interval.
pub fn build_propagator(p: &PhysicalParams, drive: &dyn Drive, grid: TimeGrid) -> Result<PropagatorTable> {
    let sys = SystemMatrix::new(p)?;
    let h = grid.step() / SUBSTEPS as f64;
    let mut m = Vec::with_capacity(grid.n);
    let mut mid = Vec::with_capacity(grid.n - 1);
    let mut trace_integral = Vec::with_capacity(grid.n);
    let mut cur = Mat::identity();
    let mut tr = 0.0;
    m.push(cur);
    trace_integral.push(0.0);
    for k in 0..grid.n - 1 {
        let t0 = grid.time(k);
        for s in 0..SUBSTEPS {
            cur = rk4_step(&sys, drive, t0 + s as f64 * h, h, &cur);
            if s + 1 == SUBSTEPS / 2 {
                mid.push(cur);
            }
        }
        tr += gauss_legendre(t0, grid.time(k + 1), |t| sys.trace(drive.omega(t)));
        let det = cur.determinant().norm();
        if !(det >= DET_ALARM) {
            return Err(Error::SingularPropagator { det, t: grid.time(k + 1) });
        }
        m.push(cur);
        trace_integral.push(tr);
    }
    let m_inv = m
        .iter()
        .map(|x| x.try_inverse().expect("determinant checked above"))
        .collect();
    Ok(PropagatorTable { grid, m, mid, m_inv, trace_integral })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchingReport {
    pub theta_r: f64,
    /// `max_t |G_ES(t,0) − √η e^{iθ_R}E₀(t)| / max_t E₀`
    pub residual: f64,
    /// `|2κ∫E₀ G_ES(t,0) dt| = |P_dS(T,0)|`
    pub projection: f64,
}

/// Compares the emitted field `G_ES(t, 0)` with the target mode.
pub fn verify_impedance_matching(tab: &PropagatorTable, m: &SignalMode, eta: f64) -> Result<MatchingReport> {
    if tab.grid.n != m.grid.n {
        return Err(Error::GridMismatch { left: tab.grid.n, right: m.grid.n });
    }
    let g_es: Vec<C64> = tab.m.iter().map(|x| x[(0, 1)]).collect();
    let weighted: Vec<C64> = g_es.iter().zip(&m.samples).map(|(g, e)| g * *e).collect();
    let overlap = simpson(&weighted, m.grid.step()) * (2.0 * m.kappa);
    let theta_r = overlap.arg();
    let target = C64::from_polar(eta.sqrt(), theta_r);
    let peak = m.samples.iter().cloned().fold(0.0, f64::max);
    let worst = g_es
        .iter()
        .zip(&m.samples)
        .map(|(g, e)| (g - target * *e).norm())
        .fold(0.0, f64::max);
    Ok(MatchingReport { theta_r, residual: worst / peak, projection: overlap.norm() })
}

/// Field and spin trajectories of the first-elimination system alongside
/// the two-band system driven identically.
#[derive(Debug, Clone)]
pub struct OracleTrajectories {
    pub times: Vec<f64>,
    pub field: Vec<C64>,
    pub spin: Vec<C64>,
    pub field_two_band: Vec<C64>,
    pub spin_two_band: Vec<C64>,
}

impl OracleTrajectories {
    /// `max_t ||E(t)| − |E₂(t)|| / max_t |E₂(t)|`
    pub fn max_field_deviation(&self) -> f64 {
        let scale = self.field_two_band.iter().map(|e| e.norm()).fold(0.0, f64::max);
        let worst = self
            .field
            .iter()
            .zip(&self.field_two_band)
            .map(|(a, b)| (a.norm() - b.norm()).abs())
            .fold(0.0, f64::max);
        worst / scale
    }
}

pub const ORACLE_MIN_PER_PERIOD: usize = 40;

/// Uniform grid over `[0, duration]` resolving the `2ω_sg` beat with at least
/// `per_period` samples per period.
pub fn oracle_grid(p: &PhysicalParams, duration: f64, per_period: usize) -> Result<TimeGrid> {
    let period = std::f64::consts::TAU / (2.0 * p.omega_sg.abs());
    let n = ((duration / period) * per_period as f64).ceil() as usize + 1;
    TimeGrid::new(duration, n.max(crate::signal::MIN_SAMPLES))
}

/// Integrates the equations obtained after the first adiabatic elimination,
/// which keep the luminescence cross terms oscillating at `2ω_sg`:
///
/// ```text
/// dE/dt = −κ_eff E + iβΩS + i(g√N/Δ)Ω e^{2iω_sg t} S*
/// dS/dt = −(2γ⊥|Ω|²/Δ²) S + iβΩ*E + i(g√N/Δ)Ω e^{2iω_sg t} E*
/// ```
///
/// with `β = (g√N/Δ)(1 + iγ⊥/Δ)`, and in parallel the two-band system
/// without the cross terms.
pub fn oracle_first_elimination(
    p: &PhysicalParams,
    drive: &dyn Drive,
    initial: (C64, C64),
    grid: TimeGrid,
) -> Result<OracleTrajectories> {
    let period = std::f64::consts::TAU / (2.0 * p.omega_sg.abs());
    let per_period = period / grid.step();
    if per_period < ORACLE_MIN_PER_PERIOD as f64 {
        return Err(Error::GridTooCoarse { per_period, required: ORACLE_MIN_PER_PERIOD });
    }
    let sys = SystemMatrix::new(p)?;
    let lum = C64::new(0.0, p.collective_coupling() / p.delta);
    let two_omega = 2.0 * p.omega_sg;

    let full = |t: f64, y: Vector2<C64>| -> Vector2<C64> {
        let om = drive.omega(t);
        let a = sys.at(om);
        let beat = lum * om * C64::from_polar(1.0, two_omega * t);
        a * y + Vector2::new(beat * y[1].conj(), beat * y[0].conj())
    };
    let reduced = |t: f64, y: Vector2<C64>| -> Vector2<C64> { sys.at(drive.omega(t)) * y };

    let h = grid.step();
    let mut y_full = Vector2::new(initial.0, initial.1);
    let mut y_red = y_full;
    let mut out = OracleTrajectories {
        times: Vec::with_capacity(grid.n),
        field: Vec::with_capacity(grid.n),
        spin: Vec::with_capacity(grid.n),
        field_two_band: Vec::with_capacity(grid.n),
        spin_two_band: Vec::with_capacity(grid.n),
    };
    let mut record = |t: f64, a: &Vector2<C64>, b: &Vector2<C64>| {
        out.times.push(t);
        out.field.push(a[0]);
        out.spin.push(a[1]);
        out.field_two_band.push(b[0]);
        out.spin_two_band.push(b[1]);
    };
    record(0.0, &y_full, &y_red);
    for k in 0..grid.n - 1 {
        let t = grid.time(k);
        y_full = rk4_vec(&full, t, h, y_full);
        y_red = rk4_vec(&reduced, t, h, y_red);
        record(grid.time(k + 1), &y_full, &y_red);
    }
    Ok(out)
}

fn rk4_vec<F: Fn(f64, Vector2<C64>) -> Vector2<C64>>(f: &F, t: f64, h: f64, y: Vector2<C64>) -> Vector2<C64> {
    let c = |x: f64| C64::new(x, 0.0);
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + k1 * c(0.5 * h));
    let k3 = f(t + 0.5 * h, y + k2 * c(0.5 * h));
    let k4 = f(t + h, y + k3 * c(h));
    y + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(h / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ControlConfig, ControlSolution};
    use crate::signal::make_target_mode;
    use approx::assert_relative_eq;

    fn reference_run(tau: f64, n: usize) -> (PhysicalParams, SignalMode, ControlSolution) {
        let p = PhysicalParams::reference();
        let m = make_target_mode(tau / (2.0 * p.kappa), p.kappa, n).unwrap();
        let c = ControlSolution::synthesize(&m, &p, &ControlConfig::default()).unwrap();
        (p, m, c)
    }

    #[test]
    fn zero_control_decouples() {
        let p = PhysicalParams::reference();
        let grid = TimeGrid::new(2.0 / p.kappa, 512).unwrap();
        let tab = build_propagator(&p, &NoDrive, grid).unwrap();
        let kappa_eff = derive_rates(&p).unwrap().kappa_eff;
        for k in (0..grid.n).step_by(31) {
            let g = tab.green(k, 0);
            assert_relative_eq!(g[(0, 0)].re, (-kappa_eff * grid.time(k)).exp(), max_relative = 1e-12);
            assert_eq!(g[(1, 1)], C64::new(1.0, 0.0));
            assert_eq!(g[(0, 1)], C64::new(0.0, 0.0));
            assert_eq!(g[(1, 0)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn green_is_identity_on_diagonal_and_composes() {
        let (p, m, c) = reference_run(12.0, 1024);
        let tab = build_propagator(&p, &c, m.grid).unwrap();
        for k in (0..m.grid.n).step_by(17) {
            assert!((tab.green(k, k) - Mat::identity()).norm() < 1e-10);
        }
        let triples = [(1000, 500, 3), (1023, 1022, 0), (800, 400, 200), (600, 599, 598)];
        for (i, j, l) in triples {
            let lhs = tab.green(i, l);
            let rhs = tab.green(i, j) * tab.green(j, l);
            assert!((lhs - rhs).norm() < 1e-8 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn liouville_identity() {
        let (p, m, c) = reference_run(20.0, 4096);
        let tab = build_propagator(&p, &c, m.grid).unwrap();
        assert!(tab.liouville_error() < 1e-6, "{}", tab.liouville_error());
    }

    #[test]
    fn system_matrix_shares_prefactor() {
        let p = PhysicalParams::reference();
        let sys = SystemMatrix::new(&p).unwrap();
        let om = C64::new(3.0e7, -1.1e7);
        let a = sys.at(om);
        let (u, v) = (a[(0, 1)] / om, a[(1, 0)] / om.conj());
        assert!((u - v).norm() <= 1e-15 * u.norm());
    }

    #[test]
    fn step_halving_converges() {
        let (p, m, c) = reference_run(12.0, 2048);
        let coarse = build_propagator(&p, &c, m.grid).unwrap();
        let fine = build_propagator(&p, &c, m.grid.refined(2)).unwrap();
        let worst = (0..m.grid.n)
            .map(|k| (coarse.m[k] - fine.m[2 * k]).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn null_control_cannot_match() {
        let p = PhysicalParams::reference();
        let m = make_target_mode(12.0 / (2.0 * p.kappa), p.kappa, 1024).unwrap();
        let tab = build_propagator(&p, &NoDrive, m.grid).unwrap();
        let rep = verify_impedance_matching(&tab, &m, 0.9).unwrap();
        assert_relative_eq!(rep.residual, 0.9f64.sqrt(), max_relative = 1e-9);
        assert_eq!(rep.projection, 0.0);
    }

    /// Re-integrates from (E, S) = (0, 1) with an independent RK4 loop and
    /// step halving; compares with column two of the table.
    #[test]
    fn green_es_trace_matches_direct_integration() {
        let (p, m, c) = reference_run(12.0, 1024);
        let tab = build_propagator(&p, &c, m.grid).unwrap();
        let sys = SystemMatrix::new(&p).unwrap();
        let f = |t: f64, y: Vector2<C64>| sys.at(c.omega(t)) * y;
        let direct = |sub: usize| {
            let h = m.grid.step() / sub as f64;
            let mut y = Vector2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0));
            let mut out = vec![y[0]];
            for k in 0..m.grid.n - 1 {
                for s in 0..sub {
                    y = rk4_vec(&f, m.grid.time(k) + s as f64 * h, h, y);
                }
                out.push(y[0]);
            }
            out
        };
        let a = direct(8);
        let b = direct(16);
        for k in 0..m.grid.n {
            assert!((a[k] - b[k]).norm() < 1e-10);
            assert!((tab.m[k][(0, 1)] - b[k]).norm() < 1e-8);
        }
    }

    #[test]
    fn matching_at_long_duration() {
        let (p, m, c) = reference_run(20.0, 4096);
        let tab = build_propagator(&p, &c, m.grid).unwrap();
        let rep = verify_impedance_matching(&tab, &m, c.eta).unwrap();
        assert!(rep.residual < 0.02, "{rep:?}");
        // re-synthesis at 4x resolution reproduces the same residual
        let (p4, m4, c4) = reference_run(20.0, 4 * 4095 + 1);
        let tab4 = build_propagator(&p4, &c4, m4.grid).unwrap();
        let rep4 = verify_impedance_matching(&tab4, &m4, c4.eta).unwrap();
        assert!((rep.residual - rep4.residual).abs() < 1e-4, "{rep:?} {rep4:?}");
    }

    #[test]
    fn projection_efficiency_matches_balance() {
        for tau in [12.0, 16.0, 20.0] {
            let (p, m, c) = reference_run(tau, 4096);
            let tab = build_propagator(&p, &c, m.grid).unwrap();
            let rep = verify_impedance_matching(&tab, &m, c.eta).unwrap();
            let eta_green = rep.projection.powi(2);
            assert!(((eta_green - c.eta) / c.eta).abs() < 0.01, "tau {tau}: {eta_green} vs {}", c.eta);
        }
    }

    #[test]
    fn sampled_drive_reproduces_cubics() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let f = |t: f64| C64::new(t * t * t - t, 2.0 * t * t);
        let d = SampledDrive::new(grid, grid.times().map(f).collect()).unwrap();
        // interior intervals of Catmull-Rom reproduce quadratics exactly
        let t = 0.5 + 0.3 * grid.step();
        let g = |t: f64| C64::new(3.0 * t * t, -t);
        let dq = SampledDrive::new(grid, grid.times().map(g).collect()).unwrap();
        assert!((dq.omega(t) - g(t)).norm() < 1e-12);
        assert!((d.omega(t) - f(t)).norm() < 1e-4);
    }

    #[test]
    fn oracle_rejects_coarse_grid() {
        let p = PhysicalParams::reference();
        let grid = TimeGrid::new(8.0 / (2.0 * p.kappa), 64).unwrap();
        let err = oracle_first_elimination(&p, &NoDrive, (C64::new(0.0, 0.0), C64::new(1.0, 0.0)), grid).unwrap_err();
        assert!(matches!(err, Error::GridTooCoarse { .. }));
    }

    #[test]
    fn oracle_zero_control_is_free_decay() {
        let p = PhysicalParams::reference();
        let duration = 8.0 / (2.0 * p.kappa);
        let grid = oracle_grid(&p, duration, 80).unwrap();
        let e0 = C64::new(0.3, 0.1);
        let tr = oracle_first_elimination(&p, &NoDrive, (e0, C64::new(1.0, 0.0)), grid).unwrap();
        let kappa_eff = derive_rates(&p).unwrap().kappa_eff;
        for (k, t) in tr.times.iter().enumerate().step_by(50) {
            assert!((tr.field[k] - e0 * (-kappa_eff * t).exp()).norm() < 1e-10);
            assert_eq!(tr.spin[k], C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn oracle_converges_as_splitting_grows() {
        let (p, m, c) = reference_run(8.0, 2048);
        let s0 = C64::new(c.s0_sq().sqrt(), 0.0);
        let dev = |factor: f64| {
            let q = p.with_omega_sg(p.omega_sg * factor);
            let grid = oracle_grid(&q, m.grid.duration, 40).unwrap();
            oracle_first_elimination(&q, &c, (C64::new(0.0, 0.0), s0), grid).unwrap().max_field_deviation()
        };
        let (d1, d2, d1000) = (dev(1.0), dev(2.0), dev(1000.0));
        assert!(d1 / d2 >= 1.8, "{d1} {d2}");
        assert!(d1000 < 1e-2 * d1, "{d1} {d1000}");
    }
}
