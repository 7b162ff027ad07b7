//! Command-line front end.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{preset, InitialKind, RunConfig};
use crate::correlations::{emission_spectrum, SpectrumOptions};
use crate::dissipation::{build_dissipators, MasterEquation};
use crate::dressed::{diagonalize, level_sweep, DressedBasis};
use crate::dynamics::{
    calibrate_pulse_amplitude, evolve, evolve_driven, initial_state, Driven, EvolveOptions, InitialState, Trajectory,
};
use crate::error::{Error, Result};
use crate::hilbert::{BareState, HilbertSpace, Level};
use crate::model::{build_hamiltonian, build_pulse_operator, PulseParams};
use crate::observables::{self, ObservableSet, Statistics, StateSpec};

#[derive(Debug, Parser)]
#[command(name = "usc-sce", version, about = "Spontaneous photon-pair release from an ultrastrongly coupled emitter")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dressed energy levels against the coupling strength.
    Levels,
    /// Time evolution of the photon number, flux and populations.
    Evolve,
    /// Equal-time photon statistics g2, G2 and g3.
    Statistics,
    /// Emission spectrum into the external modes.
    Spectrum,
    /// Peak photon number under Fock-cutoff doubling and step halving.
    Converge,
    /// Every dressed-basis jump with its rate.
    AuditDissipators,
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    #[arg(long, global = true)]
    pub preset: Option<String>,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true)]
    pub omega_r: Option<f64>,
    #[arg(long, global = true)]
    pub gamma0: Option<f64>,
    #[arg(long, global = true)]
    pub gamma_gs: Option<f64>,
    #[arg(long, global = true)]
    pub gamma_eg: Option<f64>,
    #[arg(long, global = true)]
    pub n_fock: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub sigma_pulse: Option<f64>,
    #[arg(long, global = true)]
    pub n_atoms: Option<usize>,
    /// Physical cavity frequency in Hz, for flux in photons per second.
    #[arg(long, global = true)]
    pub omega0_hz: Option<f64>,
}

impl CommonArgs {
    /// Preset, then config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::from_file(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => RunConfig::default(),
        };
        if let (Some(path), Some(name)) = (&self.config, &self.preset) {
            if c.preset.as_deref() != Some(name.as_str()) {
                return Err(Error::Config(format!(
                    "--preset {name} conflicts with {}; set [run] preset in the file instead",
                    path.display()
                )));
            }
        }
        if let Some(v) = self.omega_r {
            c.model.omega_r = v;
        }
        if let Some(v) = self.gamma0 {
            c.rates.cavity = v;
        }
        if let Some(v) = self.gamma_gs {
            c.rates.gs = v;
            c.gamma_gs_sweep.clear();
        }
        if let Some(v) = self.gamma_eg {
            c.rates.eg = v;
        }
        if let Some(v) = self.n_fock {
            c.n_fock = v;
        }
        if let Some(v) = self.dt {
            c.time.dt = v;
        }
        if let Some(v) = self.t_end {
            c.time.t_end = v;
        }
        if let Some(v) = self.sigma_pulse {
            c.pulse.sigma = v;
        }
        if let Some(v) = self.n_atoms {
            c.n_atoms = v;
        }
        if let Some(v) = self.omega0_hz {
            c.omega0_hz = Some(v);
        }
        c.validate()?;
        Ok(c)
    }
}

/// Everything derived from a configuration before time stepping.
pub struct System {
    pub basis: DressedBasis,
    pub me: MasterEquation,
    pub obs: ObservableSet,
}

impl System {
    pub fn build(c: &RunConfig) -> Result<Self> {
        let space = HilbertSpace::new(c.n_fock, c.n_atoms)?;
        let basis = diagonalize(&build_hamiltonian(&c.model, &space)?)?;
        let me = MasterEquation::new(&basis, build_dissipators(&basis, &c.rates)?)?;
        let obs = ObservableSet::new(&basis, c.rates.cavity)?;
        Ok(System { basis, me, obs })
    }

    fn s0(&self) -> StateSpec {
        StateSpec::Bare(BareState { photons: 0, levels: vec![Level::S; self.basis.space().n_atoms()] })
    }
}

/// Outcome of one trajectory run, with the pulse scale when one was used.
pub struct Run {
    pub trajectory: Trajectory,
    pub amplitude_scale: Option<f64>,
}

/// Runs the configured evolution, including pulse preparation.
pub fn run_trajectory(c: &RunConfig, sys: &System, window: Option<f64>) -> Result<Run> {
    let t_end = window.unwrap_or(c.time.t_end);
    let mut opts = EvolveOptions::new(c.time.dt, t_end).with_probes(sys.obs.probes(&sys.basis)?);
    opts.check_every = c.time.check_every;
    match &c.initial {
        InitialKind::State(spec) => {
            let rho0 = initial_state(&spec_to_initial(spec), &sys.basis)?;
            Ok(Run { trajectory: evolve(&rho0, &sys.me, &opts)?, amplitude_scale: None })
        }
        InitialKind::Pulse => {
            let rho0 = initial_state(&spec_to_initial(&sys.s0()), &sys.basis)?;
            let target = sys.basis.dressed_ground_index()?;
            let StateSpec::Bare(s0) = sys.s0() else { unreachable!() };
            let s0_index = sys.basis.index_of_bare(&s0)?;
            let omega = c.pulse.omega_drive.unwrap_or(sys.basis.energy(target) - sys.basis.energy(s0_index));
            let pulse = PulseParams::new(c.pulse.sigma, omega)?;
            let drive = build_pulse_operator(sys.basis.space());
            let scale = match c.pulse.amplitude_scale {
                Some(s) => s,
                None => {
                    calibrate_pulse_amplitude(&sys.me, &sys.basis, &drive, pulse, &rho0, target, c.pulse.calibration_dt)?
                        .amplitude_scale
                }
            };
            let driven = Driven::new(&sys.me, &sys.basis, &drive, pulse.with_amplitude_scale(scale))?;
            let traj = evolve_driven(&rho0, &driven, -c.pulse.lead_sigmas * c.pulse.sigma, &opts)?;
            Ok(Run { trajectory: traj, amplitude_scale: Some(scale) })
        }
    }
}

fn spec_to_initial(spec: &StateSpec) -> InitialState {
    match spec {
        StateSpec::DressedGround => InitialState::DressedGround,
        StateSpec::Dressed(j) => InitialState::Dressed(*j),
        StateSpec::Bare(b) => InitialState::Bare(b.clone()),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn trajectory_csv(c: &RunConfig, run: &mut Run, dir: &Path, name: &str) -> Result<()> {
    let mut columns = vec![observables::PHOTONS, observables::FLUX, observables::P_GROUND, observables::P_S0];
    if c.physical_units || c.omega0_hz.is_some() {
        let flux = run.trajectory.series(observables::FLUX).unwrap_or_default().to_vec();
        let per_s = flux.iter().map(|&f| c.flux_per_second(f)).collect::<Result<Vec<_>>>()?;
        run.trajectory.series.push(("flux_photons_per_s".into(), per_s));
        columns.push("flux_photons_per_s");
    }
    let mut meta = vec!["schema: trajectory v1".to_string()];
    meta.extend(c.metadata());
    if let Some(s) = run.amplitude_scale {
        meta.push(format!("pulse: sigma = {}, amplitude_scale = {s}", c.pulse.sigma));
    }
    let mut out = create(dir, name)?;
    run.trajectory.write_csv(&mut out, &columns, c.time.csv_stride, &meta)?;
    out.flush()?;
    Ok(())
}

fn summarize(c: &RunConfig, run: &Run, label: &str) -> Result<()> {
    let t = &run.trajectory;
    let (t_peak, peak) = t.peak(observables::PHOTONS).unwrap_or((0.0, 0.0));
    print!("{label}: peak <X-X+> = {peak:.6e} at t = {t_peak:.3}, peak flux = {:.6e} w0", peak * c.rates.cavity);
    if c.omega0_hz.is_some() {
        print!(" = {:.4e} photons/s", c.flux_per_second(peak * c.rates.cavity)?);
    }
    println!(", trace drift = {:.2e}, positivity defect = {:.2e}", t.max_trace_drift, t.max_positivity_defect);
    Ok(())
}

fn cmd_levels(c: &RunConfig, dir: &Path) -> Result<()> {
    let space = HilbertSpace::new(c.n_fock, c.n_atoms)?;
    let table = level_sweep(&c.levels.grid(), &c.model, &space, c.levels.n_levels)?;
    let mut out = create(dir, "levels.csv")?;
    for line in c.metadata() {
        writeln!(out, "# {line}")?;
    }
    table.write_csv(&mut out)?;
    out.flush()?;
    println!("levels: {} couplings written to {}", table.rows.len(), dir.join("levels.csv").display());
    Ok(())
}

fn cmd_evolve(c: &RunConfig, dir: &Path) -> Result<()> {
    if c.gamma_gs_sweep.is_empty() {
        let sys = System::build(c)?;
        let mut run = run_trajectory(c, &sys, None)?;
        trajectory_csv(c, &mut run, dir, "trajectory.csv")?;
        return summarize(c, &run, "evolve");
    }
    for &g in &c.gamma_gs_sweep {
        let mut variant = c.clone();
        variant.rates.gs = g;
        let sys = System::build(&variant)?;
        let mut run = run_trajectory(&variant, &sys, None)?;
        trajectory_csv(&variant, &mut run, dir, &format!("trajectory_gamma_gs_{g}.csv"))?;
        let last = run.trajectory.series(observables::PHOTONS).and_then(|s| s.last().copied()).unwrap_or(0.0);
        summarize(&variant, &run, &format!("gamma_gs = {g}"))?;
        println!("gamma_gs = {g}: <X-X+>(t_end) = {last:.6e}");
    }
    Ok(())
}

fn cmd_statistics(c: &RunConfig, dir: &Path) -> Result<()> {
    let sys = System::build(c)?;
    let run = run_trajectory(c, &sys, None)?;
    let stats = Statistics::from_trajectory(&run.trajectory)?;
    let mut meta = vec!["schema: statistics v1".to_string()];
    meta.extend(c.metadata());
    meta.push("empty fields: undefined (denominator below 1e-12)".into());
    let mut out = create(dir, "statistics.csv")?;
    stats.write_csv(&mut out, c.time.csv_stride, &meta)?;
    out.flush()?;
    summarize(c, &run, "statistics")
}

fn cmd_spectrum(c: &RunConfig, dir: &Path) -> Result<()> {
    let InitialKind::State(spec) = &c.initial else {
        return Err(Error::Config("spectrum needs a basis initial state, not a pulse".into()));
    };
    let sys = System::build(c)?;
    let rho0 = initial_state(&spec_to_initial(spec), &sys.basis)?;
    let opts = SpectrumOptions::new(c.spectrum.t_end, c.time.dt, c.spectrum.n_t, c.spectrum.omega_max);
    let s = emission_spectrum(&sys.basis, &sys.me, &sys.obs.sigma_minus, &rho0, &opts)?;
    let meta = c.metadata();
    let mut out = create(dir, "spectrum.csv")?;
    s.write_csv(&mut out, &meta)?;
    out.flush()?;
    let mut out = create(dir, "peaks.csv")?;
    s.write_peaks_csv(&mut out, &meta)?;
    out.flush()?;
    for p in &s.peaks {
        println!("peak at omega = {:.5} (height {:.4})", p.position, p.height);
    }
    Ok(())
}

/// Peak photon numbers of the base run and its two refinements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceReport {
    pub base_peak: f64,
    pub fock_peak: f64,
    pub dt_peak: f64,
    pub fock_relative: f64,
    pub dt_absolute: f64,
}

impl ConvergenceReport {
    pub fn converged(&self, c: &RunConfig) -> bool {
        self.fock_relative < c.converge.fock_rel_tol && self.dt_absolute < c.converge.dt_abs_tol
    }
}

pub fn convergence(c: &RunConfig) -> Result<ConvergenceReport> {
    let window = Some(c.converge.window.min(c.time.t_end));
    let peak = |cfg: &RunConfig| -> Result<f64> {
        let sys = System::build(cfg)?;
        let run = run_trajectory(cfg, &sys, window)?;
        Ok(run.trajectory.peak(observables::PHOTONS).map_or(0.0, |p| p.1))
    };
    let base_peak = peak(c)?;
    let mut fock = c.clone();
    fock.n_fock = (2 * c.n_fock).min(crate::config::N_FOCK_RANGE.1);
    let fock_peak = peak(&fock)?;
    let mut fine = c.clone();
    fine.time.dt = c.time.dt / 2.0;
    fine.time.check_every = 2 * c.time.check_every;
    let dt_peak = peak(&fine)?;
    Ok(ConvergenceReport {
        base_peak,
        fock_peak,
        dt_peak,
        fock_relative: ((fock_peak - base_peak) / base_peak).abs(),
        dt_absolute: (dt_peak - base_peak).abs(),
    })
}

fn cmd_converge(c: &RunConfig, dir: &Path) -> Result<bool> {
    let r = convergence(c)?;
    let mut out = create(dir, "converge.csv")?;
    writeln!(out, "# schema: converge v1")?;
    for line in c.metadata() {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "# window = {}", c.converge.window.min(c.time.t_end))?;
    writeln!(out, "variant,peak_xx,delta,tolerance")?;
    writeln!(out, "base,{},0,", r.base_peak)?;
    writeln!(out, "n_fock_doubled,{},{},{}", r.fock_peak, r.fock_relative, c.converge.fock_rel_tol)?;
    writeln!(out, "dt_halved,{},{},{}", r.dt_peak, r.dt_absolute, c.converge.dt_abs_tol)?;
    out.flush()?;
    println!(
        "n_fock doubling: relative change {:.3e} (tolerance {:.0e}); dt halving: absolute change {:.3e} (tolerance {:.0e})",
        r.fock_relative, c.converge.fock_rel_tol, r.dt_absolute, c.converge.dt_abs_tol
    );
    Ok(r.converged(c))
}

fn cmd_audit(c: &RunConfig, dir: &Path) -> Result<()> {
    let sys = System::build(c)?;
    let mut out = create(dir, "dissipators.csv")?;
    for line in c.metadata() {
        writeln!(out, "# {line}")?;
    }
    sys.me.dissipators().write_audit_csv(&mut out, &sys.basis)?;
    out.flush()?;
    println!("audit: {} transitions", sys.me.dissipators().transitions().count());
    Ok(())
}

/// Runs a parsed command line and maps errors to exit codes: 2 for
/// configuration problems, 3 for invariant breaches, 4 when `converge`
/// exceeds its tolerances, 1 otherwise.
pub fn run(cli: Cli) -> ExitCode {
    let result = cli.common.resolve().and_then(|c| {
        let dir = cli.common.out_dir.as_path();
        match cli.command {
            Command::Levels => cmd_levels(&c, dir).map(|_| true),
            Command::Evolve => cmd_evolve(&c, dir).map(|_| true),
            Command::Statistics => cmd_statistics(&c, dir).map(|_| true),
            Command::Spectrum => cmd_spectrum(&c, dir).map(|_| true),
            Command::Converge => cmd_converge(&c, dir),
            Command::AuditDissipators => cmd_audit(&c, dir).map(|_| true),
        }
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: convergence tolerances exceeded");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::InvariantBreach { .. } => 3,
                _ => 1,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(preset: &str) -> CommonArgs {
        CommonArgs { preset: Some(preset.into()), out_dir: ".".into(), ..CommonArgs::default() }
    }

    #[test]
    fn flags_override_preset() {
        let mut a = args("fig3a");
        a.omega_r = Some(0.3);
        a.n_fock = Some(8);
        a.gamma_gs = Some(0.05);
        let c = a.resolve().unwrap();
        assert_eq!(c.model.omega_r, 0.3);
        assert_eq!(c.n_fock, 8);
        assert_eq!(c.rates.gs, 0.05);
        assert_eq!(c.rates.cavity, 0.02);
        a.n_fock = Some(100);
        assert!(matches!(a.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn cli_parses_subcommands() {
        let cli = Cli::try_parse_from(["usc-sce", "evolve", "--preset", "fig3a", "--omega-r", "0.6"]).unwrap();
        assert!(matches!(cli.command, Command::Evolve));
        assert_eq!(cli.common.omega_r, Some(0.6));
        assert!(Cli::try_parse_from(["usc-sce", "plot"]).is_err());
        assert!(Cli::try_parse_from(["usc-sce", "audit-dissipators", "--n-atoms", "2"]).is_ok());
    }

    #[test]
    fn short_evolve_writes_deterministic_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args("fig3a");
        a.n_fock = Some(6);
        a.t_end = Some(2.0);
        a.omega0_hz = Some(1e10);
        let mut c = a.resolve().unwrap();
        c.physical_units = true;
        for name in ["one", "two"] {
            cmd_evolve(&c, &dir.path().join(name)).unwrap();
        }
        let one = std::fs::read(dir.path().join("one/trajectory.csv")).unwrap();
        let two = std::fs::read(dir.path().join("two/trajectory.csv")).unwrap();
        assert_eq!(one, two);
        let text = String::from_utf8(one).unwrap();
        assert!(text.starts_with("# schema: trajectory v1"));
        assert!(text.lines().any(|l| l == "t,xx,flux,p_ground,p_s0,flux_photons_per_s"));
    }

    #[test]
    fn audit_and_levels_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args("fig2");
        a.n_fock = Some(6);
        let c = a.resolve().unwrap();
        cmd_levels(&c, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("levels.csv")).unwrap();
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 51);
        let mut a = args("fig3a");
        a.n_fock = Some(5);
        cmd_audit(&a.resolve().unwrap(), dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("dissipators.csv")).unwrap();
        assert!(text.contains("channel,j,k,omega_kj,rate"));
    }

    #[test]
    fn spectrum_rejects_pulse_initial_state() {
        let dir = tempfile::tempdir().unwrap();
        let mut a = args("fig3d");
        a.n_fock = Some(5);
        assert!(matches!(cmd_spectrum(&a.resolve().unwrap(), dir.path()), Err(Error::Config(_))));
    }
}
