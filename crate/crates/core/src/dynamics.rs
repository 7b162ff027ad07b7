//! Fixed-step time propagation of the dressed-basis master equation.
//!
//! Density matrices are held in the dressed basis throughout. Trace and
//! positivity are monitored at checkpoints and a breach aborts the run; the
//! state is never clipped.

use std::io::Write;

use rayon::prelude::*;

use crate::dissipation::MasterEquation;
use crate::dressed::DressedBasis;
use crate::error::{Error, Result};
use crate::hilbert::{BareState, CMatrix, Operator, C64};
use crate::model::{pulse_envelope, pulse_gaussian, PulseParams};

pub const TRACE_TOL: f64 = 1e-7;
pub const POSITIVITY_TOL: f64 = 1e-7;
/// Largest allowed `dt · stiffness`.
pub const STABILITY_FACTOR: f64 = 0.5;
pub const DEFAULT_DT: f64 = 2e-3;
pub const DEFAULT_STORE_EVERY: usize = 50;

/// Right-hand side `ẋ = f(t, x)` of a matrix ODE.
pub trait Generator: Sync {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, x: &CMatrix, out: &mut CMatrix);
    /// Scale of the largest rate in the generator, for the step bound.
    fn stiffness(&self) -> f64;
}

impl Generator for MasterEquation {
    fn dim(&self) -> usize {
        MasterEquation::dim(self)
    }

    fn rhs(&self, _t: f64, x: &CMatrix, out: &mut CMatrix) {
        self.apply_into(x, out);
    }

    fn stiffness(&self) -> f64 {
        MasterEquation::stiffness(self)
    }
}

/// Heisenberg-picture evolution of an observable under the same master equation.
pub struct Adjoint<'a>(pub &'a MasterEquation);

impl Generator for Adjoint<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn rhs(&self, _t: f64, x: &CMatrix, out: &mut CMatrix) {
        self.0.apply_adjoint_into(x, out);
    }

    fn stiffness(&self) -> f64 {
        self.0.stiffness()
    }
}

/// Master equation plus `pulse_envelope(t) · V` added to the Hamiltonian.
pub struct Driven<'a> {
    me: &'a MasterEquation,
    pulse: PulseParams,
    /// Nonzero entries of `V` in the dressed basis.
    coupling: Vec<(usize, usize, C64)>,
    coupling_norm: f64,
}

impl<'a> Driven<'a> {
    /// `drive` is the bare-basis operator multiplied by the envelope.
    pub fn new(me: &'a MasterEquation, basis: &DressedBasis, drive: &Operator, pulse: PulseParams) -> Result<Self> {
        pulse.validate()?;
        let v = basis.to_dressed(drive)?;
        let max = crate::hilbert::max_abs(&v);
        let mut coupling = Vec::new();
        for c in 0..v.ncols() {
            for r in 0..v.nrows() {
                if v[(r, c)].norm() > 1e-15 * max {
                    coupling.push((r, c, v[(r, c)]));
                }
            }
        }
        let coupling_norm = v.norm();
        Ok(Driven { me, pulse, coupling, coupling_norm })
    }

    pub fn pulse(&self) -> &PulseParams {
        &self.pulse
    }
}

impl Generator for Driven<'_> {
    fn dim(&self) -> usize {
        self.me.dim()
    }

    fn rhs(&self, t: f64, x: &CMatrix, out: &mut CMatrix) {
        self.me.apply_into(x, out);
        // negligible envelope: skip the commutator entirely
        if pulse_gaussian(t, &self.pulse) <= 1e-17 * self.pulse.peak_amplitude() {
            return;
        }
        let f = pulse_envelope(t, &self.pulse);
        let d = self.dim();
        let xs = x.as_slice();
        let o = out.as_mut_slice();
        let mi = C64::new(0.0, -f);
        for &(r, c, v) in &self.coupling {
            let w = mi * v;
            // −i f (V x − x V)
            for col in 0..d {
                o[col * d + r] += w * xs[col * d + c];
            }
            for row in 0..d {
                o[c * d + row] -= xs[r * d + row] * w;
            }
        }
    }

    fn stiffness(&self) -> f64 {
        self.me.stiffness() + self.pulse.peak_amplitude() * self.coupling_norm
    }
}

/// Scratch buffers for the classical fourth-order Runge–Kutta step.
pub struct Rk4 {
    k1: CMatrix,
    k2: CMatrix,
    k3: CMatrix,
    k4: CMatrix,
    tmp: CMatrix,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        let z = CMatrix::zeros(dim, dim);
        Rk4 { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }

    pub fn step<G: Generator + ?Sized>(&mut self, g: &G, t: f64, dt: f64, x: &mut CMatrix) {
        let half = 0.5 * dt;
        g.rhs(t, x, &mut self.k1);
        axpy_into(&mut self.tmp, x, half, &self.k1);
        g.rhs(t + half, &self.tmp, &mut self.k2);
        axpy_into(&mut self.tmp, x, half, &self.k2);
        g.rhs(t + half, &self.tmp, &mut self.k3);
        axpy_into(&mut self.tmp, x, dt, &self.k3);
        g.rhs(t + dt, &self.tmp, &mut self.k4);
        let w = dt / 6.0;
        let xs = x.as_mut_slice();
        let (a, b, c, e) = (self.k1.as_slice(), self.k2.as_slice(), self.k3.as_slice(), self.k4.as_slice());
        for i in 0..xs.len() {
            xs[i] += (a[i] + (b[i] + c[i]) * 2.0 + e[i]) * w;
        }
    }
}

fn axpy_into(out: &mut CMatrix, x: &CMatrix, h: f64, k: &CMatrix) {
    let o = out.as_mut_slice();
    let (xs, ks) = (x.as_slice(), k.as_slice());
    for i in 0..o.len() {
        o[i] = xs[i] + ks[i] * h;
    }
}

/// Largest stable step for a generator.
pub fn max_step<G: Generator + ?Sized>(g: &G) -> f64 {
    STABILITY_FACTOR / g.stiffness()
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `|0̃⟩`, lowest state with every emitter in the g/e manifold.
    DressedGround,
    Bare(BareState),
    /// Dressed eigenstate by index.
    Dressed(usize),
    /// Arbitrary density matrix in the dressed basis.
    Custom(CMatrix),
}

/// Initial density matrix in the dressed basis.
pub fn initial_state(kind: &InitialState, basis: &DressedBasis) -> Result<CMatrix> {
    let d = basis.dim();
    let pure = |v: nalgebra::DVector<C64>| &v * v.adjoint();
    match kind {
        InitialState::DressedGround => {
            let j = basis.dressed_ground_index()?;
            let mut rho = CMatrix::zeros(d, d);
            rho[(j, j)] = C64::new(1.0, 0.0);
            Ok(rho)
        }
        InitialState::Dressed(j) => {
            if *j >= d {
                return Err(Error::InvalidParameter(format!("dressed index {j} out of range")));
            }
            let mut rho = CMatrix::zeros(d, d);
            rho[(*j, *j)] = C64::new(1.0, 0.0);
            Ok(rho)
        }
        InitialState::Bare(state) => {
            let i = basis.space().index_of(state)?;
            let v = basis.states().row(i).adjoint();
            Ok(pure(v))
        }
        InitialState::Custom(rho) => {
            if rho.nrows() != d || rho.ncols() != d {
                return Err(Error::DimensionMismatch { expected: d, got: rho.nrows() });
            }
            Ok(rho.clone())
        }
    }
}

/// Named observable, as a dressed-basis matrix, recorded every step.
#[derive(Debug, Clone)]
pub struct Probe {
    pub name: String,
    dim: usize,
    /// Nonzero `(row, col, A_rc)`.
    entries: Vec<(usize, usize, C64)>,
}

impl Probe {
    /// Entries below `1e-14 · max|A|` are dropped.
    pub fn new(name: impl Into<String>, op: CMatrix) -> Self {
        let cut = 1e-14 * crate::hilbert::max_abs(&op);
        let mut entries = Vec::new();
        for c in 0..op.ncols() {
            for r in 0..op.nrows() {
                if op[(r, c)].norm() > cut {
                    entries.push((r, c, op[(r, c)]));
                }
            }
        }
        Probe { name: name.into(), dim: op.nrows(), entries }
    }

    /// `Re Tr[A ρ]`.
    pub fn measure(&self, rho: &CMatrix) -> f64 {
        let d = rho.nrows();
        let r = rho.as_slice();
        self.entries.iter().map(|&(i, j, a)| (a * r[i * d + j]).re).sum()
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Keep every K-th density matrix; `None` keeps only the final one.
    pub store_every: Option<usize>,
    /// Trace/positivity check cadence in steps.
    pub check_every: usize,
    pub probes: Vec<Probe>,
}

impl EvolveOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        EvolveOptions { dt, t_end, store_every: None, check_every: DEFAULT_STORE_EVERY, probes: Vec::new() }
    }

    pub fn with_probes(mut self, probes: Vec<Probe>) -> Self {
        self.probes = probes;
        self
    }

    pub fn storing_every(mut self, k: usize) -> Self {
        self.store_every = Some(k.max(1));
        self
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Every step, starting with the initial time.
    pub times: Vec<f64>,
    pub series: Vec<(String, Vec<f64>)>,
    pub state_times: Vec<f64>,
    pub states: Vec<CMatrix>,
    pub final_state: CMatrix,
    pub max_trace_drift: f64,
    pub max_positivity_defect: f64,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// `(time, value)` of the maximum of a series.
    pub fn peak(&self, name: &str) -> Option<(f64, f64)> {
        let s = self.series(name)?;
        let (i, v) = s.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        Some((self.times[i], v))
    }

    /// Value of a series interpolated linearly at time `t`.
    pub fn value_at(&self, name: &str, t: f64) -> Option<f64> {
        let s = self.series(name)?;
        let (t0, dt) = (*self.times.first()?, self.dt());
        if dt == 0.0 {
            return s.first().copied();
        }
        let x = (t - t0) / dt;
        if x < 0.0 || x > (s.len() - 1) as f64 {
            return None;
        }
        let i = (x.floor() as usize).min(s.len() - 1);
        let frac = x - i as f64;
        let next = s.get(i + 1).copied().unwrap_or(s[i]);
        Some(s[i] * (1.0 - frac) + next * frac)
    }

    /// CSV with a `t` column and the named series, every `stride`-th step.
    /// Non-finite values are written as empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W, columns: &[&str], stride: usize, metadata: &[String]) -> Result<()> {
        let data: Vec<&[f64]> = columns
            .iter()
            .map(|c| self.series(c).ok_or_else(|| Error::InvalidParameter(format!("no series `{c}`"))))
            .collect::<Result<_>>()?;
        for line in metadata {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "t,{}", columns.join(","))?;
        let stride = stride.max(1);
        let last = self.times.len() - 1;
        for i in (0..self.times.len()).filter(|i| i % stride == 0 || *i == last) {
            let cells: Vec<String> = data
                .iter()
                .map(|s| if s[i].is_finite() { s[i].to_string() } else { String::new() })
                .collect();
            writeln!(out, "{},{}", self.times[i], cells.join(","))?;
        }
        Ok(())
    }
}

/// Smallest eigenvalue of the Hermitian part of `rho`.
pub fn min_eigenvalue(rho: &CMatrix) -> f64 {
    let h = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

fn check_invariants(rho: &CMatrix, t: f64, traj_drift: &mut f64, traj_defect: &mut f64) -> Result<()> {
    let drift = (rho.trace().re - 1.0).abs();
    *traj_drift = traj_drift.max(drift);
    if drift > TRACE_TOL {
        return Err(Error::InvariantBreach {
            invariant: "trace",
            t,
            detail: format!("|tr ρ − 1| = {drift:e} (tolerance {TRACE_TOL:e}); reduce dt"),
        });
    }
    let defect = (-min_eigenvalue(rho)).max(0.0);
    *traj_defect = traj_defect.max(defect);
    if defect > POSITIVITY_TOL {
        return Err(Error::InvariantBreach {
            invariant: "positivity",
            t,
            detail: format!("min eigenvalue −{defect:e} (tolerance {POSITIVITY_TOL:e}); check n_fock and dt"),
        });
    }
    Ok(())
}

fn check_initial(rho0: &CMatrix, dim: usize) -> Result<()> {
    if rho0.nrows() != dim || rho0.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: rho0.nrows() });
    }
    Ok(())
}

/// Integrates any [`Generator`] from `t_start` with the given options.
pub fn integrate<G: Generator + ?Sized>(g: &G, rho0: &CMatrix, t_start: f64, opts: &EvolveOptions) -> Result<Trajectory> {
    check_initial(rho0, g.dim())?;
    if !(opts.t_end > t_start) {
        return Err(Error::InvalidParameter(format!("t_end {} must exceed start {}", opts.t_end, t_start)));
    }
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {}", opts.dt)));
    }
    let dt_max = max_step(g);
    if opts.dt > dt_max {
        return Err(Error::StepTooLarge { dt: opts.dt, dt_max });
    }
    for p in &opts.probes {
        if p.dim != g.dim() {
            return Err(Error::DimensionMismatch { expected: g.dim(), got: p.dim });
        }
    }
    let n_steps = ((opts.t_end - t_start) / opts.dt).round() as usize;
    let check_every = opts.check_every.max(1);

    let mut rho = rho0.clone();
    let mut rk = Rk4::new(g.dim());
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut series: Vec<(String, Vec<f64>)> =
        opts.probes.iter().map(|p| (p.name.clone(), Vec::with_capacity(n_steps + 1))).collect();
    let mut state_times = Vec::new();
    let mut states = Vec::new();
    let (mut drift, mut defect) = (0.0, 0.0);

    for step in 0..=n_steps {
        let t = t_start + step as f64 * opts.dt;
        times.push(t);
        for (p, (_, s)) in opts.probes.iter().zip(series.iter_mut()) {
            s.push(p.measure(&rho));
        }
        if step % check_every == 0 || step == n_steps {
            check_invariants(&rho, t, &mut drift, &mut defect)?;
        }
        if let Some(k) = opts.store_every {
            if step % k == 0 {
                state_times.push(t);
                states.push(rho.clone());
            }
        }
        if step < n_steps {
            rk.step(g, t, opts.dt, &mut rho);
        }
    }
    Ok(Trajectory {
        times,
        series,
        state_times,
        states,
        final_state: rho,
        max_trace_drift: drift,
        max_positivity_defect: defect,
    })
}

/// Undriven evolution from `t = 0`.
pub fn evolve(rho0: &CMatrix, me: &MasterEquation, opts: &EvolveOptions) -> Result<Trajectory> {
    integrate(me, rho0, 0.0, opts)
}

/// Evolution with the Gaussian drive centred at `t = 0`, starting at `t_start ≤ −4σ`.
pub fn evolve_driven(
    rho0: &CMatrix,
    drive: &Driven<'_>,
    t_start: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory> {
    if t_start > -4.0 * drive.pulse().sigma {
        return Err(Error::InvalidParameter(format!(
            "driven run must start at or before −4σ = {}, got {t_start}",
            -4.0 * drive.pulse().sigma
        )));
    }
    integrate(drive, rho0, t_start, opts)
}

/// Largest absolute difference of a probe between steps `dt` and `dt/2`,
/// over the first `window` time units.
pub fn step_halving_delta<G: Generator + ?Sized>(
    g: &G,
    rho0: &CMatrix,
    t_start: f64,
    opts: &EvolveOptions,
    probe: &str,
    window: f64,
) -> Result<f64> {
    let mut coarse = opts.clone();
    coarse.t_end = (t_start + window).min(opts.t_end);
    coarse.store_every = None;
    coarse.probes.retain(|p| p.name == probe);
    if coarse.probes.is_empty() {
        return Err(Error::InvalidParameter(format!("no probe `{probe}`")));
    }
    let mut fine = coarse.clone();
    fine.dt = opts.dt / 2.0;
    fine.check_every = coarse.check_every * 2;
    let a = integrate(g, rho0, t_start, &coarse)?;
    let b = integrate(g, rho0, t_start, &fine)?;
    let (sa, sb) = (a.series(probe).unwrap(), b.series(probe).unwrap());
    Ok(sa.iter().enumerate().map(|(i, v)| (v - sb[2 * i]).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub amplitude_scale: f64,
    pub population: f64,
}

/// Finds the envelope scale that maximizes the population of dressed state
/// `target` right after the pulse, starting from `rho0`.
pub fn calibrate_pulse_amplitude(
    me: &MasterEquation,
    basis: &DressedBasis,
    drive_op: &Operator,
    pulse: PulseParams,
    rho0: &CMatrix,
    target: usize,
    dt: f64,
) -> Result<Calibration> {
    let half_width = 6.0 * pulse.sigma;
    let population = |scale: f64| -> Result<f64> {
        let driven = Driven::new(me, basis, drive_op, pulse.with_amplitude_scale(scale))?;
        let mut opts = EvolveOptions::new(dt, half_width);
        opts.check_every = usize::MAX;
        let traj = integrate(&driven, rho0, -half_width, &opts)?;
        Ok(traj.final_state[(target, target)].re)
    };
    // coarse scan, then golden-section refinement around the best point
    let grid: Vec<f64> = (0..=12).map(|i| 0.4 + 0.15 * i as f64).collect();
    let values = grid.par_iter().map(|&s| population(s)).collect::<Result<Vec<_>>>()?;
    let best = values.iter().enumerate().fold(0, |b, (i, v)| if *v > values[b] { i } else { b });
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (population(x1)?, population(x2)?);
    while hi - lo > 1e-3 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = population(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = population(x1)?;
        }
    }
    let (amplitude_scale, population) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
    if values[best] > population {
        return Ok(Calibration { amplitude_scale: grid[best], population: values[best] });
    }
    Ok(Calibration { amplitude_scale, population })
}
