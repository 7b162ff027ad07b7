//! Run configuration: frozen experiment presets, INI files and overrides.
//!
//! Every value is in units of ω₀ except the optional `[physical] omega0_hz`.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ini::Ini;

use crate::dissipation::LossRates;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::observables::StateSpec;

pub const PRESETS: [&str; 7] = ["fig2", "fig3a", "fig3b", "fig3c", "fig3d", "fig4a", "fig4bcd"];
pub const N_FOCK_RANGE: (usize, usize) = (4, 64);

#[derive(Debug, Clone, PartialEq)]
pub enum InitialKind {
    /// A basis state, usually `|0̃⟩`.
    State(StateSpec),
    /// `|s,0…⟩` followed by a Gaussian π pulse onto `|0̃⟩`.
    Pulse,
}

impl FromStr for InitialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pulse" => Ok(InitialKind::Pulse),
            other => other.parse().map(InitialKind::State),
        }
    }
}

impl fmt::Display for InitialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialKind::Pulse => write!(f, "pulse"),
            InitialKind::State(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseConfig {
    pub sigma: f64,
    /// Defaults to the `|s,0⟩ → |0̃⟩` transition frequency.
    pub omega_drive: Option<f64>,
    /// Envelope scale; calibrated numerically when absent.
    pub amplitude_scale: Option<f64>,
    pub calibration_dt: f64,
    /// The run starts at `−lead_sigmas · σ`.
    pub lead_sigmas: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_end: f64,
    pub check_every: usize,
    pub csv_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelsConfig {
    pub omega_r_min: f64,
    pub omega_r_max: f64,
    pub omega_r_step: f64,
    pub n_levels: usize,
}

impl LevelsConfig {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.omega_r_max - self.omega_r_min) / self.omega_r_step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.omega_r_min + i as f64 * self.omega_r_step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumConfig {
    pub t_end: f64,
    pub n_t: usize,
    pub omega_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeConfig {
    /// Simulated span for the convergence variants.
    pub window: f64,
    pub fock_rel_tol: f64,
    pub dt_abs_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub model: ModelParams,
    pub rates: LossRates,
    pub n_fock: usize,
    pub n_atoms: usize,
    pub initial: InitialKind,
    pub pulse: PulseConfig,
    pub time: TimeConfig,
    pub levels: LevelsConfig,
    /// Extra `γ_gs` values; `evolve` runs one trajectory per value when set.
    pub gamma_gs_sweep: Vec<f64>,
    pub spectrum: SpectrumConfig,
    pub converge: ConvergeConfig,
    pub omega0_hz: Option<f64>,
    /// Report flux in photons per second.
    pub physical_units: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: None,
            model: ModelParams::default(),
            rates: LossRates::uniform(0.02),
            n_fock: 16,
            n_atoms: 1,
            initial: InitialKind::State(StateSpec::DressedGround),
            pulse: PulseConfig { sigma: 5.0, omega_drive: None, amplitude_scale: None, calibration_dt: 0.01, lead_sigmas: 6.0 },
            time: TimeConfig { dt: 2e-3, t_end: 400.0, check_every: 50, csv_stride: 50 },
            levels: LevelsConfig { omega_r_min: 0.0, omega_r_max: 1.0, omega_r_step: 0.02, n_levels: 8 },
            gamma_gs_sweep: Vec::new(),
            spectrum: SpectrumConfig { t_end: 600.0, n_t: 3000, omega_max: 5.5 },
            converge: ConvergeConfig { window: 120.0, fock_rel_tol: 1e-4, dt_abs_tol: 1e-6 },
            omega0_hz: None,
            physical_units: false,
        }
    }
}

/// Frozen parameter set for a named figure.
pub fn preset(name: &str) -> Result<RunConfig> {
    let mut c = RunConfig { preset: Some(name.to_string()), ..RunConfig::default() };
    c.model.omega_r = 0.6;
    match name {
        "fig2" => {
            c.model.omega_r = 0.0;
            c.rates = LossRates::zero();
        }
        "fig3a" | "fig4bcd" => {}
        "fig3b" => {
            c.rates.cavity = 0.0;
            c.rates.gs = 0.01;
            c.gamma_gs_sweep = vec![0.01, 0.015, 0.03, 0.04];
        }
        "fig3c" => {
            c.model.omega_r = 0.65;
            c.rates.cavity = 0.01;
            c.n_atoms = 2;
        }
        "fig3d" => {
            c.initial = InitialKind::Pulse;
            c.time.t_end = 200.0;
        }
        "fig4a" => {}
        _ => return Err(Error::Config(format!("unknown preset `{name}` (known: {})", PRESETS.join(", ")))),
    }
    Ok(c)
}

fn parse_value<T: FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("[{section}] {key}: cannot parse `{value}`")))
}

fn parse_bool(section: &str, key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("[{section}] {key}: expected a boolean, got `{value}`"))),
    }
}

fn parse_optional(section: &str, key: &str, value: &str) -> Result<Option<f64>> {
    match value.trim() {
        "auto" | "" => Ok(None),
        v => parse_value(section, key, v).map(Some),
    }
}

impl RunConfig {
    /// Parses an INI document. A `[run] preset` key selects the base
    /// parameters; every other key overrides them. Unknown sections or keys
    /// are errors.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(format!("config syntax: {e}")))?;
        let base = ini.section(Some("run")).and_then(|s| s.get("preset"));
        let mut c = match base {
            Some(name) => preset(name.trim())?,
            None => RunConfig::default(),
        };
        let mut seen = HashSet::new();
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("");
            for (key, value) in props.iter() {
                if !seen.insert((section.to_string(), key.to_string())) {
                    return Err(Error::Config(format!("[{section}] {key}: duplicate key")));
                }
                c.set(section, key, value)?;
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_ini_str(&text)
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let f = |v: &str| parse_value::<f64>(section, key, v);
        match (section, key) {
            ("run", "preset") => {}
            ("model", "omega0") => self.model.omega0 = f(value)?,
            ("model", "omega_s") => self.model.omega_s = f(value)?,
            ("model", "omega_g") => self.model.omega_g = f(value)?,
            ("model", "omega_e") => self.model.omega_e = f(value)?,
            ("model", "omega_r") => self.model.omega_r = f(value)?,
            ("rates", "gamma0") => self.rates.cavity = f(value)?,
            ("rates", "gamma_eg") => self.rates.eg = f(value)?,
            ("rates", "gamma_gs") => self.rates.gs = f(value)?,
            ("space", "n_fock") => self.n_fock = parse_value(section, key, value)?,
            ("space", "n_atoms") => self.n_atoms = parse_value(section, key, value)?,
            ("initial", "state") => self.initial = value.parse()?,
            ("pulse", "sigma") => self.pulse.sigma = f(value)?,
            ("pulse", "omega_drive") => self.pulse.omega_drive = parse_optional(section, key, value)?,
            ("pulse", "amplitude_scale") => self.pulse.amplitude_scale = parse_optional(section, key, value)?,
            ("pulse", "calibration_dt") => self.pulse.calibration_dt = f(value)?,
            ("pulse", "lead_sigmas") => self.pulse.lead_sigmas = f(value)?,
            ("time", "dt") => self.time.dt = f(value)?,
            ("time", "t_end") => self.time.t_end = f(value)?,
            ("time", "check_every") => self.time.check_every = parse_value(section, key, value)?,
            ("time", "csv_stride") => self.time.csv_stride = parse_value(section, key, value)?,
            ("levels", "omega_r_min") => self.levels.omega_r_min = f(value)?,
            ("levels", "omega_r_max") => self.levels.omega_r_max = f(value)?,
            ("levels", "omega_r_step") => self.levels.omega_r_step = f(value)?,
            ("levels", "n_levels") => self.levels.n_levels = parse_value(section, key, value)?,
            ("sweep", "gamma_gs") => {
                self.gamma_gs_sweep = value
                    .split(',')
                    .filter(|v| !v.trim().is_empty())
                    .map(|v| parse_value(section, key, v))
                    .collect::<Result<_>>()?
            }
            ("spectrum", "t_end") => self.spectrum.t_end = f(value)?,
            ("spectrum", "n_t") => self.spectrum.n_t = parse_value(section, key, value)?,
            ("spectrum", "omega_max") => self.spectrum.omega_max = f(value)?,
            ("converge", "window") => self.converge.window = f(value)?,
            ("converge", "fock_rel_tol") => self.converge.fock_rel_tol = f(value)?,
            ("converge", "dt_abs_tol") => self.converge.dt_abs_tol = f(value)?,
            ("physical", "omega0_hz") => self.omega0_hz = parse_optional(section, key, value)?,
            ("physical", "report") => self.physical_units = parse_bool(section, key, value)?,
            ("", k) => return Err(Error::Config(format!("key `{k}` outside any section"))),
            (s, k) => return Err(Error::Config(format!("unknown key `{k}` in section [{s}]"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.rates.validate()?;
        for g in &self.gamma_gs_sweep {
            if !(*g >= 0.0) {
                return Err(Error::Config(format!("sweep rate {g} must be non-negative")));
            }
        }
        let (lo, hi) = N_FOCK_RANGE;
        if self.n_fock < lo || self.n_fock > hi {
            return Err(Error::Config(format!("n_fock {} outside supported range [{lo}, {hi}]", self.n_fock)));
        }
        if !(1..=crate::hilbert::MAX_ATOMS).contains(&self.n_atoms) {
            return Err(Error::Config(format!("n_atoms {} not supported", self.n_atoms)));
        }
        let positive = [
            ("time.dt", self.time.dt),
            ("time.t_end", self.time.t_end),
            ("pulse.sigma", self.pulse.sigma),
            ("pulse.calibration_dt", self.pulse.calibration_dt),
            ("pulse.lead_sigmas", self.pulse.lead_sigmas),
            ("levels.omega_r_step", self.levels.omega_r_step),
            ("spectrum.t_end", self.spectrum.t_end),
            ("spectrum.omega_max", self.spectrum.omega_max),
            ("converge.window", self.converge.window),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.pulse.lead_sigmas < 4.0 {
            return Err(Error::Config("pulse.lead_sigmas must be at least 4".into()));
        }
        if self.levels.omega_r_max < self.levels.omega_r_min || self.levels.n_levels == 0 {
            return Err(Error::Config("levels grid is empty".into()));
        }
        if self.spectrum.n_t < 2 || self.time.check_every == 0 || self.time.csv_stride == 0 {
            return Err(Error::Config("spectrum.n_t ≥ 2, check_every ≥ 1 and csv_stride ≥ 1 required".into()));
        }
        if let Some(hz) = self.omega0_hz {
            if !(hz > 0.0) {
                return Err(Error::Config(format!("omega0_hz must be positive, got {hz}")));
            }
        }
        if self.physical_units && self.omega0_hz.is_none() {
            return Err(Error::Config("physical units requested but [physical] omega0_hz is not set".into()));
        }
        Ok(())
    }

    /// Converts a flux in units of ω₀ to photons per second. `omega0_hz` is
    /// an ordinary frequency, so ω₀ = 2π · omega0_hz in s⁻¹.
    pub fn flux_per_second(&self, flux: f64) -> Result<f64> {
        let hz = self
            .omega0_hz
            .ok_or_else(|| Error::Config("flux conversion needs [physical] omega0_hz".into()))?;
        Ok(flux * 2.0 * std::f64::consts::PI * hz)
    }

    /// `key = value` lines describing the run, for CSV headers.
    pub fn metadata(&self) -> Vec<String> {
        let mut m = vec![
            format!("preset = {}", self.preset.as_deref().unwrap_or("none")),
            format!(
                "model: omega0 = {}, omega_s = {}, omega_g = {}, omega_e = {}, omega_r = {}",
                self.model.omega0, self.model.omega_s, self.model.omega_g, self.model.omega_e, self.model.omega_r
            ),
            format!("rates: gamma0 = {}, gamma_eg = {}, gamma_gs = {}", self.rates.cavity, self.rates.eg, self.rates.gs),
            format!("space: n_fock = {}, n_atoms = {}", self.n_fock, self.n_atoms),
            format!("initial = {}", self.initial),
            format!("time: dt = {}, t_end = {}", self.time.dt, self.time.t_end),
        ];
        if let Some(hz) = self.omega0_hz {
            m.push(format!("omega0_hz = {hz}"));
        }
        m
    }
}
