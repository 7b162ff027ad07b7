//! Zero-temperature Lindblad dissipators written in the dressed basis.
//!
//! Each loss channel couples the bath to a Hermitian system operator
//! (`a + a†`, `σ_eg + σ_ge`, `σ_gs + σ_sg`). Only downward transitions
//! `|k⟩ → |j⟩` with `ω_k > ω_j` appear. Transitions of one channel that share
//! a Bohr frequency (within [`DEGENERACY_TOL`]) are summed coherently into a
//! single jump operator; all other cross terms are dropped.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::dressed::{DressedBasis, DEGENERACY_TOL};
use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, C64};
use crate::model::{polarization_eg, quadrature};

/// Relative weight below which a transition is dropped.
const PRUNE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ChannelKind {
    Cavity,
    /// `e → g` emission of one atom.
    EmitterEg(usize),
    /// `g → s` emission of one atom.
    EmitterGs(usize),
}

impl ChannelKind {
    pub fn label(&self, n_atoms: usize) -> String {
        match (self, n_atoms) {
            (ChannelKind::Cavity, _) => "cavity".into(),
            (ChannelKind::EmitterEg(_), 1) => "eg".into(),
            (ChannelKind::EmitterGs(_), 1) => "gs".into(),
            (ChannelKind::EmitterEg(a), _) => format!("eg:{a}"),
            (ChannelKind::EmitterGs(a), _) => format!("gs:{a}"),
        }
    }
}

/// Base loss rates, in units of ω₀. Emitter rates apply to every atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRates {
    pub cavity: f64,
    pub eg: f64,
    pub gs: f64,
}

impl LossRates {
    pub fn uniform(gamma: f64) -> Self {
        LossRates { cavity: gamma, eg: gamma, gs: gamma }
    }

    pub fn zero() -> Self {
        LossRates::uniform(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("cavity", self.cavity), ("eg", self.eg), ("gs", self.gs)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} rate must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Frequency dependence of the bath coupling, multiplying each base rate.
#[derive(Clone, Default)]
pub enum SpectralDensity {
    #[default]
    Flat,
    /// Weight `ω / reference`.
    Ohmic { reference: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl SpectralDensity {
    pub fn weight(&self, omega: f64) -> f64 {
        match self {
            SpectralDensity::Flat => 1.0,
            SpectralDensity::Ohmic { reference } => omega / reference,
            SpectralDensity::Custom(f) => f(omega),
        }
    }
}

impl fmt::Debug for SpectralDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralDensity::Flat => write!(f, "Flat"),
            SpectralDensity::Ohmic { reference } => write!(f, "Ohmic({reference})"),
            SpectralDensity::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Sparse jump operator `Σ amp |j⟩⟨k|` over transitions of one Bohr frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub frequency: f64,
    /// `(j, k, amplitude)` with `amplitude = √(γ J(ω)) ⟨j|s|k⟩`.
    pub entries: Vec<(usize, usize, C64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub kind: ChannelKind,
    pub base_rate: f64,
    pub jumps: Vec<JumpOperator>,
}

/// One audited transition of a channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub channel: ChannelKind,
    pub from: usize,
    pub to: usize,
    pub frequency: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipatorSet {
    dim: usize,
    n_atoms: usize,
    channels: Vec<Channel>,
    /// Nonzero entries `(k, l, value)` of `Σ L†L`.
    decay: Vec<(usize, usize, C64)>,
}

fn channel_jumps(
    coupling: &CMatrix,
    energies: &[f64],
    rate: f64,
    density: &SpectralDensity,
) -> Vec<JumpOperator> {
    if rate == 0.0 {
        return Vec::new();
    }
    let d = energies.len();
    let mut candidates: Vec<(f64, usize, usize, C64)> = Vec::new();
    for j in 0..d {
        for k in 0..d {
            let w = energies[k] - energies[j];
            if w <= DEGENERACY_TOL {
                continue;
            }
            let element = coupling[(j, k)];
            let strength = density.weight(w).max(0.0);
            if element.norm_sqr() * strength < PRUNE_TOL {
                continue;
            }
            candidates.push((w, j, k, element * (rate * strength).sqrt()));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut jumps: Vec<JumpOperator> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for (w, j, k, amp) in candidates {
        match jumps.last_mut() {
            Some(op) if w - last <= DEGENERACY_TOL => op.entries.push((j, k, amp)),
            _ => jumps.push(JumpOperator { frequency: w, entries: vec![(j, k, amp)] }),
        }
        last = w;
    }
    jumps
}

pub fn build_dissipators(basis: &DressedBasis, rates: &LossRates) -> Result<DissipatorSet> {
    build_dissipators_with(basis, rates, &SpectralDensity::Flat)
}

pub fn build_dissipators_with(
    basis: &DressedBasis,
    rates: &LossRates,
    density: &SpectralDensity,
) -> Result<DissipatorSet> {
    rates.validate()?;
    let space = *basis.space();
    let energies = basis.energies();
    let mut couplings = vec![(ChannelKind::Cavity, rates.cavity, quadrature(&space))];
    for atom in 0..space.n_atoms() {
        couplings.push((ChannelKind::EmitterEg(atom), rates.eg, polarization_eg(&space, atom)?));
        let gs = crate::hilbert::make_transition(&space, crate::hilbert::Level::G, crate::hilbert::Level::S, atom)?;
        couplings.push((ChannelKind::EmitterGs(atom), rates.gs, gs.add(&gs.adjoint())?));
    }
    let channels = couplings
        .into_iter()
        .map(|(kind, rate, op)| {
            let dressed = basis.to_dressed(&op)?;
            Ok(Channel { kind, base_rate: rate, jumps: channel_jumps(&dressed, energies, rate, density) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DissipatorSet::from_channels(basis.dim(), space.n_atoms(), channels))
}

impl DissipatorSet {
    pub fn from_channels(dim: usize, n_atoms: usize, channels: Vec<Channel>) -> Self {
        let mut acc: BTreeMap<(usize, usize), C64> = BTreeMap::new();
        for jump in channels.iter().flat_map(|c| &c.jumps) {
            for &(a, k, alpha) in &jump.entries {
                for &(b, l, beta) in &jump.entries {
                    if a == b {
                        *acc.entry((k, l)).or_insert(C64::new(0.0, 0.0)) += alpha.conj() * beta;
                    }
                }
            }
        }
        let decay = acc.into_iter().map(|((k, l), v)| (k, l, v)).collect();
        DissipatorSet { dim, n_atoms, channels, decay }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn channel(&self, kind: ChannelKind) -> Option<&Channel> {
        self.channels.iter().find(|c| c.kind == kind)
    }

    pub fn jump_count(&self) -> usize {
        self.channels.iter().map(|c| c.jumps.len()).sum()
    }

    /// Every transition with its weight `Γ = |amplitude|²`.
    pub fn transitions(&self) -> impl Iterator<Item = Transition> + '_ {
        self.channels.iter().flat_map(|c| {
            c.jumps.iter().flat_map(move |jump| {
                jump.entries.iter().map(move |&(j, k, amp)| Transition {
                    channel: c.kind,
                    from: k,
                    to: j,
                    frequency: jump.frequency,
                    rate: amp.norm_sqr(),
                })
            })
        })
    }

    /// Sum of all transition weights.
    pub fn total_rate(&self) -> f64 {
        self.transitions().map(|t| t.rate).sum()
    }

    /// Total decay rate out of dressed state `k`, `⟨k|Σ L†L|k⟩`.
    pub fn decay_rate(&self, k: usize) -> f64 {
        self.decay.iter().filter(|(a, b, _)| *a == k && *b == k).map(|(_, _, v)| v.re).sum()
    }

    pub fn write_audit_csv<W: Write>(&self, mut out: W, basis: &DressedBasis) -> Result<()> {
        writeln!(out, "# schema: dissipators v1")?;
        writeln!(out, "channel,j,k,omega_kj,rate")?;
        for t in self.transitions() {
            let w = basis.energy(t.from) - basis.energy(t.to);
            writeln!(out, "{},{},{},{},{}", t.channel.label(self.n_atoms), t.to, t.from, w, t.rate)?;
        }
        Ok(())
    }
}

/// Generator `ρ̇ = −i[H, ρ] + Σ_c L_c ρ` with `H` diagonal in the dressed basis.
///
/// Matrices passed to [`MasterEquation::apply`] are density matrices in the
/// dressed basis.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    energies: Vec<f64>,
    dissipators: DissipatorSet,
}

impl MasterEquation {
    pub fn new(basis: &DressedBasis, dissipators: DissipatorSet) -> Result<Self> {
        if dissipators.dim() != basis.dim() {
            return Err(Error::DimensionMismatch { expected: basis.dim(), got: dissipators.dim() });
        }
        Ok(MasterEquation { energies: basis.energies().to_vec(), dissipators })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dissipators(&self) -> &DissipatorSet {
        &self.dissipators
    }

    /// Largest Bohr frequency plus all transition weights; sets the step bound.
    pub fn stiffness(&self) -> f64 {
        let spread = self.energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        spread + self.dissipators.total_rate()
    }

    fn check(&self, m: &CMatrix) -> Result<()> {
        let d = self.dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
        }
        Ok(())
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check(rho)?;
        let mut out = CMatrix::zeros(self.dim(), self.dim());
        self.apply_into(rho, &mut out);
        Ok(out)
    }

    /// Writes `ρ̇` into `out` (overwritten).
    pub fn apply_into(&self, rho: &CMatrix, out: &mut CMatrix) {
        let d = self.dim();
        let r = rho.as_slice();
        let o = out.as_mut_slice();
        for c in 0..d {
            for row in 0..d {
                let w = self.energies[row] - self.energies[c];
                let v = r[c * d + row];
                // −i ω ρ
                o[c * d + row] = C64::new(w * v.im, -w * v.re);
            }
        }
        self.add_dissipator(r, o, false);
    }

    /// Heisenberg-picture generator `L†`, acting on an observable `A`.
    pub fn apply_adjoint_into(&self, a: &CMatrix, out: &mut CMatrix) {
        let d = self.dim();
        let r = a.as_slice();
        let o = out.as_mut_slice();
        for c in 0..d {
            for row in 0..d {
                let w = self.energies[row] - self.energies[c];
                let v = r[c * d + row];
                // +i ω A
                o[c * d + row] = C64::new(-w * v.im, w * v.re);
            }
        }
        self.add_dissipator(r, o, true);
    }

    fn add_dissipator(&self, r: &[C64], o: &mut [C64], adjoint: bool) {
        let d = self.dim();
        // −½ {K, X}, using K† = K for the right product
        for &(k, l, v) in &self.dissipators.decay {
            let h = v * 0.5;
            for col in 0..d {
                o[col * d + k] -= h * r[col * d + l];
            }
            for row in 0..d {
                o[k * d + row] -= r[l * d + row] * h.conj();
            }
        }
        for jump in self.dissipators.channels.iter().flat_map(|c| &c.jumps) {
            let e = &jump.entries;
            if !adjoint {
                // L ρ L†
                for &(a, k, alpha) in e {
                    for &(b, l, beta) in e {
                        o[b * d + a] += alpha * r[l * d + k] * beta.conj();
                    }
                }
            } else {
                // L† A L
                for &(a, k, alpha) in e {
                    for &(b, l, beta) in e {
                        o[l * d + k] += alpha.conj() * r[b * d + a] * beta;
                    }
                }
            }
        }
    }
}

/// General-`H` form of the generator, in whatever basis `h`, `rho` and the
/// jump operators share. Used to cross-check [`MasterEquation`].
pub fn liouvillian_apply(rho: &CMatrix, h: &CMatrix, set: &DissipatorSet) -> Result<CMatrix> {
    let d = set.dim();
    for m in [rho, h] {
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
        }
    }
    let i = C64::new(0.0, 1.0);
    let mut out = (rho * h - h * rho) * i;
    for jump in set.channels.iter().flat_map(|c| &c.jumps) {
        let mut l = CMatrix::zeros(d, d);
        for &(j, k, amp) in &jump.entries {
            l[(j, k)] += amp;
        }
        let ld = l.adjoint();
        let ldl = &ld * &l;
        out += &l * rho * &ld - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0);
    }
    Ok(out)
}
