//! Plain-text run configuration.
//!
//! ```text
//! [physics]
//! cooperativity = 200
//! gamma_perp_mhz = 3
//! ...
//! [sweep]
//! durations = 4, 8, 12, 16, 20
//! ```
//!
//! Frequencies are given as ν/2π in MHz. Lines starting with `#` or `;`
//! are comments. Unknown sections, unknown keys and repeated keys are
//! errors.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::Serialize;

use crate::control::ControlConfig;
use crate::error::{Error, Result};
use crate::params::{mhz_to_rad, PhysicalParams, RegimeThresholds};

pub const MIN_GRID_N: usize = 512;
pub const DEFAULT_DURATIONS: [f64; 5] = [4.0, 8.0, 12.0, 16.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicsConfig {
    pub cooperativity: f64,
    pub gamma_perp_mhz: f64,
    pub kappa_mhz: f64,
    pub delta_mhz: f64,
    pub omega_sg_mhz: f64,
    pub atom_number: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            cooperativity: 200.0,
            gamma_perp_mhz: 3.0,
            kappa_mhz: 2.0,
            delta_mhz: 200.0,
            omega_sg_mhz: 10.0,
            atom_number: 1.0,
        }
    }
}

impl PhysicsConfig {
    pub fn resolve(&self) -> Result<PhysicalParams> {
        PhysicalParams::from_cooperativity(
            self.cooperativity,
            mhz_to_rad(self.gamma_perp_mhz),
            mhz_to_rad(self.kappa_mhz),
            mhz_to_rad(self.delta_mhz),
            mhz_to_rad(self.omega_sg_mhz),
            self.atom_number,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub physics: PhysicsConfig,
    pub thresholds: RegimeThresholds,
    pub control: ControlConfig,
    pub durations: Vec<f64>,
    pub grid_n: usize,
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub emit_profiles: bool,
    pub emit_envelope: bool,
    pub emit_green: bool,
    pub emit_oracle: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            physics: PhysicsConfig::default(),
            thresholds: RegimeThresholds::default(),
            control: ControlConfig::default(),
            durations: DEFAULT_DURATIONS.to_vec(),
            grid_n: 4096,
            out_dir: PathBuf::from("out"),
            emit_profiles: true,
            emit_envelope: false,
            emit_green: false,
            emit_oracle: false,
        }
    }
}

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {:?}", s.trim()))?;
    if !v.is_finite() {
        return Err(format!("not finite: {:?}", s.trim()));
    }
    Ok(v)
}

/// Comma-separated list of finite reals. Empty input gives an empty list.
pub fn parse_number_list(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|item| parse_f64(item).map_err(|m| cfg_err(0, m))).collect()
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("not a boolean: {s:?}")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| cfg_err(line_no, "unterminated section header"))?;
                let name = name.trim();
                if !matches!(name, "physics" | "control" | "sweep" | "output") {
                    return Err(cfg_err(line_no, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| cfg_err(line_no, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.as_deref().ok_or_else(|| cfg_err(line_no, "key outside of any section"))?;
            if !seen.insert(format!("{sec}.{key}")) {
                return Err(cfg_err(line_no, format!("duplicate key {sec}.{key}")));
            }
            cfg.set(sec, key, value).map_err(|m| cfg_err(line_no, m))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        let ph = &mut self.physics;
        match (section, key) {
            ("physics", "cooperativity") => ph.cooperativity = parse_f64(value)?,
            ("physics", "gamma_perp_mhz") => ph.gamma_perp_mhz = parse_f64(value)?,
            ("physics", "kappa_mhz") => ph.kappa_mhz = parse_f64(value)?,
            ("physics", "delta_mhz") => ph.delta_mhz = parse_f64(value)?,
            ("physics", "omega_sg_mhz") => ph.omega_sg_mhz = parse_f64(value)?,
            ("physics", "atom_number") => ph.atom_number = parse_f64(value)?,
            ("physics", "raman_ratio_max") => self.thresholds.raman_ratio = parse_f64(value)?,
            ("physics", "omega_sg_factor") => self.thresholds.omega_sg_factor = parse_f64(value)?,
            ("physics", "depletion_max") => self.thresholds.depletion = parse_f64(value)?,
            ("control", "floor_eps") => self.control.floor_eps = parse_f64(value)?,
            ("control", "omega_cap_factor") => self.control.omega_cap_factor = parse_f64(value)?,
            ("sweep", "durations") => {
                self.durations = parse_number_list(value).map_err(|e| match e {
                    Error::Config { msg, .. } => msg,
                    other => other.to_string(),
                })?
            }
            ("sweep", "grid_n") => {
                self.grid_n = value.parse().map_err(|_| format!("not a sample count: {value:?}"))?
            }
            ("output", "dir") => self.out_dir = PathBuf::from(value),
            ("output", "emit_profiles") => self.emit_profiles = parse_bool(value)?,
            ("output", "emit_envelope") => self.emit_envelope = parse_bool(value)?,
            ("output", "emit_green") => self.emit_green = parse_bool(value)?,
            ("output", "emit_oracle") => self.emit_oracle = parse_bool(value)?,
            _ => return Err(format!("unknown key {key:?} in [{section}]")),
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io { path: path.display().to_string(), msg: e.to_string() })?;
        Self::parse(&text)
    }

    /// Checks that do not need the physics pipeline. Called after command
    /// line overrides are applied.
    pub fn validate(&self) -> Result<PhysicalParams> {
        if self.durations.is_empty() {
            return Err(cfg_err(0, "empty sweep"));
        }
        if let Some(d) = self.durations.iter().find(|d| !(**d > 0.0)) {
            return Err(cfg_err(0, format!("sweep durations must be positive, got {d}")));
        }
        if self.grid_n < MIN_GRID_N {
            return Err(cfg_err(0, format!("grid_n must be at least {MIN_GRID_N}, got {}", self.grid_n)));
        }
        if !(self.control.floor_eps > 0.0 && self.control.floor_eps < 1.0) {
            return Err(cfg_err(0, format!("floor_eps must lie in (0, 1), got {}", self.control.floor_eps)));
        }
        if !(self.control.omega_cap_factor > 0.0) {
            return Err(cfg_err(0, "omega_cap_factor must be positive"));
        }
        let th = &self.thresholds;
        if !(th.raman_ratio > 0.0 && th.omega_sg_factor > 0.0 && th.depletion > 0.0) {
            return Err(cfg_err(0, "regime thresholds must be positive"));
        }
        self.physics.resolve()
    }

    /// Comment block echoing every resolved value with round-trip precision.
    pub fn header(&self, p: &PhysicalParams) -> String {
        let ph = &self.physics;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "# {k} = {v}");
        };
        kv("cooperativity", format!("{:?}", ph.cooperativity));
        kv("gamma_perp_mhz", format!("{:?}", ph.gamma_perp_mhz));
        kv("kappa_mhz", format!("{:?}", ph.kappa_mhz));
        kv("delta_mhz", format!("{:?}", ph.delta_mhz));
        kv("omega_sg_mhz", format!("{:?}", ph.omega_sg_mhz));
        kv("atom_number", format!("{:?}", ph.atom_number));
        kv("g_rad_s", format!("{:?}", p.g));
        kv("gamma_perp_rad_s", format!("{:?}", p.gamma_perp));
        kv("kappa_rad_s", format!("{:?}", p.kappa));
        kv("delta_rad_s", format!("{:?}", p.delta));
        kv("omega_sg_rad_s", format!("{:?}", p.omega_sg));
        kv("floor_eps", format!("{:?}", self.control.floor_eps));
        kv("omega_cap_factor", format!("{:?}", self.control.omega_cap_factor));
        kv("grid_n", self.grid_n.to_string());
        s
    }
}
