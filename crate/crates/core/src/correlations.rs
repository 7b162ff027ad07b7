//! Two-time correlations through the quantum regression theorem, and the
//! transient emission spectrum built from them.
//!
//! The convention is `C(t, t′) = ⟨A(t) B(t′)⟩`. For the spectrum `A = σ⁻`
//! and `B = σ⁺`, so a dipole at frequency `ω` gives `C ∝ e^{+iω(t − t′)}` and
//! `S(ω) = (1/2π) ∬ C(t, t′) e^{−iω(t − t′)}` peaks at `+ω`.

use std::f64::consts::PI;
use std::io::Write;

use crate::dissipation::MasterEquation;
use crate::dressed::DressedBasis;
use crate::dynamics::{max_step, Adjoint, Generator, Rk4};
use crate::error::{Error, Result};
use crate::hilbert::{max_abs, trace_product, CMatrix, C64};
use crate::observables::population_outside_s;

/// Largest population allowed outside the all-`s` sector at the end of a spectrum window.
pub const TRANSIENT_TOL: f64 = 1e-4;
/// Peaks below this fraction of the maximum are ignored.
pub const PEAK_THRESHOLD: f64 = 0.01;

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::NonUniformGrid);
    }
    let h = times[1] - times[0];
    if !(h > 0.0) {
        return Err(Error::NonUniformGrid);
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::NonUniformGrid);
        }
    }
    Ok(h)
}

/// Advances `x` by `h` in `n` equal RK4 sub-steps.
fn advance<G: Generator + ?Sized>(g: &G, rk: &mut Rk4, x: &mut CMatrix, t: f64, h: f64, n: usize) {
    let dt = h / n as f64;
    for s in 0..n {
        rk.step(g, t + s as f64 * dt, dt, x);
    }
}

fn substeps<G: Generator + ?Sized>(g: &G, h: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let n = (h / dt).ceil().max(1.0) as usize;
    let dt_max = max_step(g);
    if h / n as f64 > dt_max {
        return Err(Error::StepTooLarge { dt: h / n as f64, dt_max });
    }
    Ok(n)
}

/// `C[(i, j)] = ⟨A(t_i) B(t_j)⟩` on a uniform grid, with `ρ0` at `times[0]`.
///
/// For `t_i ≥ t_j` the regression propagates `B ρ(t_j)` and traces against
/// `A`; the other triangle propagates `ρ(t_i) A` against `B`, or uses
/// `C(t, t′) = conj C(t′, t)` when `B = A†`.
pub fn two_time_correlation(
    me: &MasterEquation,
    rho0: &CMatrix,
    a: &CMatrix,
    b: &CMatrix,
    times: &[f64],
    dt: f64,
) -> Result<CMatrix> {
    let h = uniform_step(times)?;
    let d = me.dim();
    for m in [rho0, a, b] {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
        }
    }
    let n_sub = substeps(me, h, dt)?;
    let hermitian_pair = max_abs(&(b - a.adjoint())) == 0.0;
    let n = times.len();
    let mut c = CMatrix::zeros(n, n);
    let mut rk = Rk4::new(d);
    let mut rho = rho0.clone();
    for j in 0..n {
        let mut x = b * &rho;
        for i in j..n {
            c[(i, j)] = trace_product(a, &x);
            if i + 1 < n {
                advance(me, &mut rk, &mut x, times[i], h, n_sub);
            }
        }
        if !hermitian_pair {
            let mut y = &rho * a;
            for i in (j + 1)..n {
                advance(me, &mut rk, &mut y, times[i - 1], h, n_sub);
                c[(j, i)] = trace_product(b, &y);
            }
        }
        if j + 1 < n {
            advance(me, &mut rk, &mut rho, times[j], h, n_sub);
        }
    }
    if hermitian_pair {
        for j in 0..n {
            for i in (j + 1)..n {
                c[(j, i)] = c[(i, j)].conj();
            }
        }
    }
    Ok(c)
}

/// Trapezoid weight of grid point `i` out of `n`.
fn trapezoid(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// `S(ω) = (1/2π) Σ_{i,j} w_i w_j h² C(t_i, t_j) e^{−iω(t_i − t_j)}` with trapezoid
/// weights; returns the real and imaginary parts.
pub fn spectrum_from_correlation(c: &CMatrix, times: &[f64], omegas: &[f64]) -> Result<Vec<C64>> {
    let h = uniform_step(times)?;
    let n = times.len();
    if c.nrows() != n || c.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: c.nrows() });
    }
    Ok(omegas
        .iter()
        .map(|&w| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    let phase = C64::new(0.0, -w * (times[i] - times[j])).exp();
                    acc += c[(i, j)] * phase * (trapezoid(i, n) * trapezoid(j, n));
                }
            }
            acc * (h * h / (2.0 * PI))
        })
        .collect())
}

/// `K(τ_m) = h Σ_n w_{n+m} w_n C(t_n + τ_m, t_n)` for `τ_m = m h`, where `w` are
/// the trapezoid weights of the time grid. Together with
/// [`spectrum_from_kernel`] this is the product trapezoid rule over the square.
///
/// Uses `C(t_n + τ, t_n) = Tr[A_H(τ) B ρ(t_n)]` with the Heisenberg-evolved
/// `A_H(τ)`, so the cost is one forward and one adjoint run instead of one run
/// per `t_n`.
pub fn lag_kernel(me: &MasterEquation, rho0: &CMatrix, a: &CMatrix, b: &CMatrix, n_t: usize, t_end: f64, dt: f64) -> Result<(Vec<C64>, CMatrix)> {
    if n_t < 2 || !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("need n_t ≥ 2 and t_end > 0, got {n_t} and {t_end}")));
    }
    let d = me.dim();
    let h = t_end / (n_t - 1) as f64;
    let n_sub = substeps(me, h, dt)?;
    let mut rk = Rk4::new(d);

    // prefix[k] = Σ_{n ≤ k} B ρ(t_n)
    let mut prefix = Vec::with_capacity(n_t);
    let mut rho = rho0.clone();
    let mut acc = CMatrix::zeros(d, d);
    for k in 0..n_t {
        let x = b * &rho;
        acc += &x;
        prefix.push(acc.clone());
        if k + 1 < n_t {
            advance(me, &mut rk, &mut rho, k as f64 * h, h, n_sub);
        }
    }
    let first = b * rho0;

    let adjoint = Adjoint(me);
    let mut heis = a.clone();
    let mut kernel = Vec::with_capacity(n_t);
    for m in 0..n_t {
        let last = n_t - 1 - m;
        let k = if last == 0 {
            // the corner point (t_end, 0)
            trace_product(&heis, &first) * 0.25
        } else {
            let x_last = &prefix[last] - &prefix[last - 1];
            let end = if m == 0 { 0.75 } else { 0.5 };
            trace_product(&heis, &prefix[last]) - (trace_product(&heis, &first) + trace_product(&heis, &x_last)) * end
        };
        kernel.push(k * h);
        if m + 1 < n_t {
            advance(&adjoint, &mut rk, &mut heis, 0.0, h, n_sub);
        }
    }
    Ok((kernel, rho))
}

/// `S(ω)` from a lag kernel: `(h/2π)(K₀ + 2 Re Σ_{m>0} K_m e^{−iωτ_m})`.
pub fn spectrum_from_kernel(kernel: &[C64], h: f64, omegas: &[f64]) -> Vec<C64> {
    omegas
        .iter()
        .map(|&w| {
            let step = C64::new(0.0, -w * h).exp();
            let mut phase = C64::new(1.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for (m, k) in kernel.iter().enumerate() {
                acc += if m == 0 { k * 0.5 } else { k * phase };
                phase *= step;
                if m % 64 == 63 {
                    // keep the running phase on the unit circle
                    phase = C64::new(0.0, -w * h * (m + 1) as f64).exp();
                }
            }
            // the τ < 0 half is the complex conjugate of the τ > 0 half
            C64::new(2.0 * acc.re, 0.0) * (h / (2.0 * PI))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
}

/// Local maxima above `threshold · max`, refined by a parabola through the
/// three surrounding samples. Sorted by position.
pub fn find_peaks(omegas: &[f64], values: &[f64], threshold: f64) -> Vec<Peak> {
    let n = values.len();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if n < 3 || !(max > 0.0) {
        return Vec::new();
    }
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        // plateau-tolerant: step over equal neighbours, keep the lowest frequency
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        if j + 1 < n && values[i] > values[i - 1] && values[i] > values[j + 1] && values[i] >= threshold * max {
            let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
            let denom = y0 - 2.0 * y1 + y2;
            let shift = if j == i && denom < 0.0 { 0.5 * (y0 - y2) / denom } else { 0.0 };
            let h = omegas[i + 1] - omegas[i];
            peaks.push(Peak { position: omegas[i] + shift * h, height: y1 - 0.25 * (y0 - y2) * shift });
        }
        i = j + 1;
    }
    peaks
}

#[derive(Debug, Clone)]
pub struct SpectrumOptions {
    pub t_end: f64,
    /// Integration step.
    pub dt: f64,
    /// Number of time samples in `[0, t_end]`.
    pub n_t: usize,
    pub omegas: Vec<f64>,
}

impl SpectrumOptions {
    /// `2001` frequencies on `[0, ω_max]`.
    pub fn new(t_end: f64, dt: f64, n_t: usize, omega_max: f64) -> Self {
        let omegas = (0..2001).map(|i| omega_max * i as f64 / 2000.0).collect();
        SpectrumOptions { t_end, dt, n_t, omegas }
    }

    /// `2π / t_end`.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / self.t_end
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub frequencies: Vec<f64>,
    /// Max-normalized and clipped at zero.
    pub values: Vec<f64>,
    pub peaks: Vec<Peak>,
    /// Unnormalized maximum.
    pub raw_max: f64,
    /// Most negative unnormalized value, relative to the maximum.
    pub min_relative: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_t: usize,
    pub resolution: f64,
    /// Population outside the all-`s` sector at `t_end`.
    pub residual_population: f64,
}

impl SpectrumResult {
    pub fn from_raw(raw: &[f64], opts: &SpectrumOptions, residual_population: f64) -> Result<Self> {
        let raw_max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(raw_max > 0.0) {
            return Err(Error::InvalidParameter("spectrum has no positive weight".into()));
        }
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let values: Vec<f64> = raw.iter().map(|v| (v / raw_max).max(0.0)).collect();
        let peaks = find_peaks(&opts.omegas, &values, PEAK_THRESHOLD);
        Ok(SpectrumResult {
            frequencies: opts.omegas.clone(),
            values,
            peaks,
            raw_max,
            min_relative: min / raw_max,
            t_end: opts.t_end,
            dt: opts.dt,
            n_t: opts.n_t,
            resolution: opts.resolution(),
            residual_population,
        })
    }

    /// Largest peak.
    pub fn main_peak(&self) -> Option<Peak> {
        self.peaks.iter().copied().fold(None, |best: Option<Peak>, p| match best {
            Some(b) if b.height >= p.height => Some(b),
            _ => Some(p),
        })
    }

    pub fn grid_step(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    fn metadata(&self) -> Vec<String> {
        vec![
            format!("t_end = {}", self.t_end),
            format!("dt = {}", self.dt),
            format!("n_t = {}", self.n_t),
            format!("resolution = {}", self.resolution),
            format!("residual_population = {:e}", self.residual_population),
        ]
    }

    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        writeln!(out, "# schema: spectrum v1")?;
        for line in header.iter().chain(&self.metadata()) {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "omega,S_normalized")?;
        for (w, s) in self.frequencies.iter().zip(&self.values) {
            writeln!(out, "{w},{s}")?;
        }
        Ok(())
    }

    pub fn write_peaks_csv<W: Write>(&self, mut out: W, header: &[String]) -> Result<()> {
        writeln!(out, "# schema: peaks v1")?;
        for line in header.iter().chain(&self.metadata()) {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "position,height")?;
        for p in &self.peaks {
            writeln!(out, "{},{}", p.position, p.height)?;
        }
        Ok(())
    }
}

/// Emission spectrum of `σ⁻σ⁺` over the window `[0, t_end]`.
///
/// Fails with [`Error::TransientIncomplete`] if more than [`TRANSIENT_TOL`]
/// population remains outside the all-`s` sector at `t_end`.
pub fn emission_spectrum(
    basis: &DressedBasis,
    me: &MasterEquation,
    sigma_minus: &CMatrix,
    rho0: &CMatrix,
    opts: &SpectrumOptions,
) -> Result<SpectrumResult> {
    let sigma_plus = sigma_minus.adjoint();
    let (kernel, rho_end) = lag_kernel(me, rho0, sigma_minus, &sigma_plus, opts.n_t, opts.t_end, opts.dt)?;
    let residual = population_outside_s(&rho_end, basis);
    if residual > TRANSIENT_TOL {
        return Err(Error::TransientIncomplete(residual));
    }
    let h = opts.t_end / (opts.n_t - 1) as f64;
    let raw: Vec<f64> = spectrum_from_kernel(&kernel, h, &opts.omegas).iter().map(|z| z.re).collect();
    SpectrumResult::from_raw(&raw, opts, residual)
}
