//! Duration sweeps and their exported tables.
//!
//! Every duration runs the full pipeline independently: mode, control,
//! regime check, propagator, matching check and noise budget. Files are
//! rendered in memory by the workers and written by the caller in sweep
//! order, so output bytes do not depend on scheduling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::control::ControlSolution;
use crate::dynamics::{build_propagator, oracle_first_elimination, oracle_grid, verify_impedance_matching, PropagatorTable};
use crate::error::{Error, Result};
use crate::noise::{compute_projections, fwm_noise_power, signal_spin_covariance, spin_noise_budget, NoiseBudget, SUM_RULE_FACTOR};
use crate::params::{derive_rates, validate_regime, PhysicalParams, RegimeReport};
use crate::signal::{make_target_mode, SignalMode};

pub const FIG3_COLUMNS: [&str; 13] = [
    "tau_total",
    "eta",
    "one_minus_eta",
    "two_gdminus_sq",
    "added_var_x4",
    "gdplus_sq",
    "gde_sq",
    "sum_rule_d",
    "sum_rule_s",
    "comm_ds_abs",
    "spin_gminus_sq",
    "cov_abs",
    "depletion",
];

pub const HOMODYNE_NOTE: &str = "# homodyne quadrature Q_h = Re(exp(-i theta_h) E_d)\n";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub matching: f64,
    pub eta_long: f64,
    pub eta_short: f64,
    /// Durations `𝒯` at or above this use `eta_long`.
    pub long_from: f64,
    pub sum_rule_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { matching: 0.02, eta_long: 0.01, eta_short: 0.05, long_from: 12.0, sum_rule_factor: SUM_RULE_FACTOR }
    }
}

impl Tolerances {
    pub fn eta_for(&self, tau_total: f64) -> f64 {
        if tau_total >= self.long_from {
            self.eta_long
        } else {
            self.eta_short
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointChecks {
    pub regime: bool,
    pub matching: bool,
    pub efficiency: bool,
    pub sum_rule_d: bool,
    pub sum_rule_s: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleReport {
    pub samples: usize,
    pub deviation: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub tau_total: f64,
    pub duration_s: f64,
    pub budget: NoiseBudget,
    pub regime: RegimeReport,
    pub matching_residual: f64,
    /// `|η_green − η|/η`
    pub eta_rel_diff: f64,
    pub s0_abs: f64,
    pub omega_max: f64,
    pub capped_samples: usize,
    /// Time of the spin-population minimum in units of `τ = 2κt`.
    pub tau_min: f64,
    pub liouville_error: f64,
    pub oracle: Option<OracleReport>,
    pub checks: PointChecks,
}

/// Outcome of one duration together with the rendered per-duration files.
#[derive(Debug, Clone)]
pub struct PointRun {
    pub tau_total: f64,
    pub outcome: std::result::Result<PointResult, String>,
    pub files: Vec<(String, String)>,
    pub seconds: f64,
}

/// Everything needed to run one duration, shared read-only by the workers.
pub struct Pipeline<'a> {
    pub cfg: &'a RunConfig,
    pub params: PhysicalParams,
    pub header: String,
    pub tol: Tolerances,
}

/// Products of the deterministic pipeline for one duration.
pub struct Solved {
    pub mode: SignalMode,
    pub control: ControlSolution,
    pub table: PropagatorTable,
}

pub fn solve(p: &PhysicalParams, cfg: &RunConfig, tau_total: f64, n: usize) -> Result<Solved> {
    let duration = tau_total / (2.0 * p.kappa);
    let mode = make_target_mode(duration, p.kappa, n)?;
    let control = ControlSolution::synthesize(&mode, p, &cfg.control)?;
    let table = build_propagator(p, &control, mode.grid)?;
    Ok(Solved { mode, control, table })
}

/// Budget and checks for an already solved duration.
pub fn evaluate(p: &PhysicalParams, cfg: &RunConfig, tol: &Tolerances, s: &Solved) -> Result<PointResult> {
    let tau_total = s.mode.tau_total();
    let duration = s.mode.grid.duration;
    let omega_max = s.control.omega_max();
    let regime = validate_regime(p, &cfg.thresholds, omega_max, duration);
    let matching = verify_impedance_matching(&s.table, &s.mode, s.control.eta)?;
    let budget = NoiseBudget::compute(&s.table, &s.mode, &s.control.control, p, s.control.eta)?;
    let eta_rel_diff = ((budget.eta_green - budget.eta) / budget.eta).abs();
    let bound = tol.sum_rule_factor * budget.depletion;
    let mut checks = PointChecks {
        regime: regime.pass,
        matching: matching.residual <= tol.matching,
        efficiency: eta_rel_diff <= tol.eta_for(tau_total),
        sum_rule_d: budget.sum_rule_d.abs() <= bound,
        sum_rule_s: budget.sum_rule_s.abs() <= bound,
        pass: false,
    };
    checks.pass = checks.regime && checks.matching && checks.efficiency && checks.sum_rule_d && checks.sum_rule_s;
    Ok(PointResult {
        tau_total,
        duration_s: duration,
        budget,
        regime,
        matching_residual: matching.residual,
        eta_rel_diff,
        s0_abs: s.control.s0_sq().sqrt(),
        omega_max,
        capped_samples: s.control.capped,
        tau_min: 2.0 * p.kappa * s.control.t_min,
        liouville_error: s.table.liouville_error(),
        oracle: None,
        checks,
    })
}

/// Runs the first-elimination comparison for a solved duration and
/// returns the report with the trajectory table.
pub fn run_oracle(p: &PhysicalParams, s: &Solved) -> Result<(OracleReport, String)> {
    let grid = oracle_grid(p, s.mode.grid.duration, crate::dynamics::ORACLE_MIN_PER_PERIOD)?;
    let start = (C64::new(0.0, 0.0), s.control.spin[0]);
    let tr = oracle_first_elimination(p, &s.control, start, grid)?;
    let deviation = tr.max_field_deviation();
    let bound = oracle_bound(p, s.control.omega_max())?;
    let mut csv = String::from("tau,abs_E_first,abs_E_two_band,abs_S_first,abs_S_two_band\n");
    for k in 0..tr.times.len() {
        let _ = writeln!(
            csv,
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            2.0 * p.kappa * tr.times[k],
            tr.field[k].norm(),
            tr.field_two_band[k].norm(),
            tr.spin[k].norm(),
            tr.spin_two_band[k].norm()
        );
    }
    Ok((OracleReport { samples: grid.n, deviation, bound, pass: deviation <= bound }, csv))
}

/// `3·max(κ_eff, g√N Ω_max/|Δ|)/(2ω_sg)`
pub fn oracle_bound(p: &PhysicalParams, omega_max: f64) -> Result<f64> {
    let rates = derive_rates(p)?;
    let coupling = p.collective_coupling() * omega_max / p.delta.abs();
    Ok(3.0 * rates.kappa_eff.max(coupling) / (2.0 * p.omega_sg.abs()))
}

fn tag(tau_total: f64) -> String {
    format!("{tau_total}")
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self> {
        let params = cfg.validate()?;
        let header = cfg.header(&params);
        Ok(Self { cfg, params, header, tol: Tolerances::default() })
    }

    pub fn run_point(&self, tau_total: f64) -> PointRun {
        let started = Instant::now();
        let mut files = Vec::new();
        let outcome = self.run_inner(tau_total, &mut files).map_err(|e| e.to_string());
        PointRun { tau_total, outcome, files, seconds: started.elapsed().as_secs_f64() }
    }

    fn run_inner(&self, tau_total: f64, files: &mut Vec<(String, String)>) -> Result<PointResult> {
        let p = &self.params;
        let s = solve(p, self.cfg, tau_total, self.cfg.grid_n)?;
        let mut res = evaluate(p, self.cfg, &self.tol, &s)?;
        let t = tag(tau_total);
        if self.cfg.emit_envelope {
            files.push((format!("envelope_{t}.csv"), self.envelope_csv(&s.mode)));
        }
        if self.cfg.emit_profiles {
            files.push((format!("fig2_{t}.csv"), self.profile_csv(&s)));
        }
        if self.cfg.emit_green {
            files.push((format!("green_{t}.csv"), self.green_csv(&s)));
        }
        if self.cfg.emit_oracle {
            let (report, csv) = run_oracle(p, &s)?;
            res.oracle = Some(report);
            res.checks.pass &= report.pass;
            files.push((format!("oracle_{t}.csv"), format!("{}{csv}", self.header)));
        }
        Ok(res)
    }

    fn envelope_csv(&self, m: &SignalMode) -> String {
        let mut s = format!("{}tau,E0,dE0_dt\n", self.header);
        for k in 0..m.grid.n {
            let _ = writeln!(s, "{:.12e},{:.12e},{:.12e}", m.tau(k), m.samples[k], m.derivative[k]);
        }
        s
    }

    fn profile_csv(&self, sol: &Solved) -> String {
        let c = &sol.control;
        let mut s = format!("{}tau,abs_S,spin_pop,phi_s,re_Omega,im_Omega,abs_Omega\n", self.header);
        for k in 0..sol.mode.grid.n {
            let om = c.control[k];
            let _ = writeln!(
                s,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                sol.mode.tau(k),
                c.spin[k].norm(),
                c.spin_pop[k],
                c.spin_phase[k],
                om.re,
                om.im,
                om.norm()
            );
        }
        s
    }

    fn green_csv(&self, sol: &Solved) -> String {
        let mut s = format!(
            "{}tau,re_G_EE,im_G_EE,re_G_ES,im_G_ES,re_G_SE,im_G_SE,re_G_SS,im_G_SS\n",
            self.header
        );
        for (k, g) in sol.table.m.iter().enumerate() {
            let _ = write!(s, "{:.12e}", sol.mode.tau(k));
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let _ = write!(s, ",{:.12e},{:.12e}", g[(i, j)].re, g[(i, j)].im);
            }
            s.push('\n');
        }
        s
    }

    /// Runs every duration on a pool of `jobs` workers and returns the runs
    /// in sweep order.
    pub fn run_all(&self, jobs: usize) -> Result<Vec<PointRun>> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Io { path: "thread pool".into(), msg: e.to_string() })?;
        Ok(pool.install(|| self.cfg.durations.par_iter().map(|&t| self.run_point(t)).collect()))
    }

    pub fn fig3_csv(&self, runs: &[PointRun]) -> String {
        let mut s = format!("{}{HOMODYNE_NOTE}{}\n", self.header, FIG3_COLUMNS.join(","));
        for r in runs.iter().filter_map(|r| r.outcome.as_ref().ok()) {
            let b = &r.budget;
            let row = [
                r.tau_total,
                b.eta,
                1.0 - b.eta,
                2.0 * b.g_dminus_sq,
                b.added_var_x4,
                b.g_dplus_sq,
                b.g_de_sq,
                b.sum_rule_d,
                b.sum_rule_s,
                b.comm_ds_abs(),
                b.spin_gminus_sq,
                b.cov_abs(),
                b.depletion,
            ];
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn summary(&self, runs: &[PointRun]) -> String {
        let mut s = format!(
            "{}{:>6} {:>10} {:>10} {:>12} {:>12} {:>10} {:>10} {:>10} {:>6}\n",
            self.header, "tau", "eta", "1-eta", "2|Gd-|^2", "4var_add", "sum_d", "D", "match", "pass"
        );
        for r in runs {
            match &r.outcome {
                Ok(p) => {
                    let b = &p.budget;
                    let _ = writeln!(
                        s,
                        "{:>6} {:>10.6} {:>10.3e} {:>12.4e} {:>12.4e} {:>10.3e} {:>10.3e} {:>10.3e} {:>6}",
                        r.tau_total,
                        b.eta,
                        1.0 - b.eta,
                        2.0 * b.g_dminus_sq,
                        b.added_var_x4,
                        b.sum_rule_d,
                        b.depletion,
                        p.matching_residual,
                        if p.checks.pass { "yes" } else { "no" }
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "{:>6} error: {e}", r.tau_total);
                }
            }
        }
        s
    }

    pub fn report_json(&self, runs: &[PointRun]) -> String {
        #[derive(Serialize)]
        struct Point<'b> {
            tau_total: f64,
            #[serde(skip_serializing_if = "Option::is_none")]
            result: Option<&'b PointResult>,
            #[serde(skip_serializing_if = "Option::is_none")]
            error: Option<&'b str>,
        }
        #[derive(Serialize)]
        struct Report<'b> {
            config: &'b RunConfig,
            params: &'b PhysicalParams,
            tolerances: &'b Tolerances,
            points: Vec<Point<'b>>,
            pass: bool,
        }
        let points = runs
            .iter()
            .map(|r| Point {
                tau_total: r.tau_total,
                result: r.outcome.as_ref().ok(),
                error: r.outcome.as_ref().err().map(String::as_str),
            })
            .collect();
        let report = Report { config: self.cfg, params: &self.params, tolerances: &self.tol, points, pass: all_pass(runs) };
        serde_json::to_string_pretty(&report).expect("report is plain data") + "\n"
    }

    /// Writes all outputs under `dir` and returns the list of paths.
    pub fn write_outputs(&self, dir: &Path, runs: &[PointRun]) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: &str| -> Result<()> {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| io_err(&path, e))?;
            written.push(path);
            Ok(())
        };
        put("fig3.csv", &self.fig3_csv(runs))?;
        for r in runs {
            for (name, body) in &r.files {
                put(name, body)?;
            }
        }
        put("report.json", &self.report_json(runs))?;
        put("summary.txt", &self.summary(runs))?;
        let timings: Vec<_> = runs.iter().map(|r| serde_json::json!({"tau_total": r.tau_total, "seconds": r.seconds})).collect();
        put("timings.json", &(serde_json::to_string_pretty(&timings).expect("plain data") + "\n"))?;
        Ok(written)
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), msg: e.to_string() }
}

pub fn all_pass(runs: &[PointRun]) -> bool {
    runs.iter().all(|r| matches!(&r.outcome, Ok(p) if p.checks.pass))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub factor: f64,
    pub fwm_ratio: f64,
    pub spin_ratio: f64,
    pub cov_ratio: f64,
    /// Largest relative deviation of the three ratios from `factor⁻²`.
    pub deviation: f64,
}

/// Recomputes the luminescence weights with `ω_sg` multiplied by each
/// factor, keeping the control and propagator of the unscaled run.
pub fn run_scaling_check(cfg: &RunConfig, tau_total: f64, factors: &[f64]) -> Result<Vec<ScalingRow>> {
    let p = cfg.validate()?;
    if let Some(f) = factors.iter().find(|f| !(**f > 0.0)) {
        return Err(crate::error::invalid("factor", format!("must be positive, got {f}")));
    }
    let s = solve(&p, cfg, tau_total, cfg.grid_n)?;
    let pr = compute_projections(&s.table, &s.mode)?;
    let om = &s.control.control;
    let weights = |q: &PhysicalParams| -> Result<(f64, f64, C64)> {
        Ok((
            fwm_noise_power(&pr, om, q)?,
            spin_noise_budget(&s.table, om, q)?.gminus_sq,
            signal_spin_covariance(&pr, &s.table, om, q, &s.mode)?.parametric.into(),
        ))
    };
    let base = weights(&p)?;
    factors
        .iter()
        .map(|&f| {
            let w = weights(&p.with_omega_sg(p.omega_sg * f))?;
            let expect = 1.0 / (f * f);
            let fwm_ratio = w.0 / base.0;
            let spin_ratio = w.1 / base.1;
            let cov = w.2 / base.2;
            let deviation = [(fwm_ratio - expect).abs(), (spin_ratio - expect).abs(), (cov - expect).norm()]
                .into_iter()
                .fold(0.0, f64::max)
                / expect;
            Ok(ScalingRow { factor: f, fwm_ratio, spin_ratio, cov_ratio: cov.re, deviation })
        })
        .collect()
}

pub fn scaling_csv(header: &str, rows: &[ScalingRow]) -> String {
    let mut s = format!("{header}factor,fwm_ratio,spin_ratio,cov_ratio,expected,deviation\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:?},{:.15e},{:.15e},{:.15e},{:.15e},{:.3e}",
            r.factor,
            r.fwm_ratio,
            r.spin_ratio,
            r.cov_ratio,
            1.0 / (r.factor * r.factor),
            r.deviation
        );
    }
    s
}
