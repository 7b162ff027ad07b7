//! Detection-level observables built from positive-frequency operators.
//!
//! All operators are cached in the dressed basis, so every quantity is a
//! single trace against a dressed-basis density matrix.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::dressed::{positive_frequency_dressed, DressedBasis};
use crate::dynamics::{Probe, Trajectory};
use crate::error::{Error, Result};
use crate::hilbert::{trace_product, BareState, CMatrix, Level, C64};
use crate::model::{polarization_gs, quadrature};

/// Denominators below this make normalized correlations undefined.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Probe names used for trajectory series.
pub const PHOTONS: &str = "xx";
pub const FLUX: &str = "flux";
pub const P_GROUND: &str = "p_ground";
pub const P_S0: &str = "p_s0";
pub const PAIR_NUMERATOR: &str = "xxxx";
pub const TRIPLE_NUMERATOR: &str = "sxxxxs";
pub const EMITTER: &str = "ss";

/// A basis state whose population can be read off a density matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    DressedGround,
    Dressed(usize),
    Bare(BareState),
}

impl FromStr for StateSpec {
    type Err = Error;

    /// `ground`, `d:<index>`, or levels then photons such as `s,0` or `g,s,2`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "ground" || s == "0~" {
            return Ok(StateSpec::DressedGround);
        }
        if let Some(idx) = s.strip_prefix("d:") {
            return idx
                .trim()
                .parse()
                .map(StateSpec::Dressed)
                .map_err(|_| Error::InvalidParameter(format!("bad dressed index in `{s}`")));
        }
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() < 2 {
            return Err(Error::InvalidParameter(format!("unknown state `{s}`")));
        }
        let (levels, photons) = parts.split_at(parts.len() - 1);
        let photons = photons[0]
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad photon number in `{s}`")))?;
        let levels = levels.iter().map(|l| l.parse::<Level>()).collect::<Result<Vec<_>>>()?;
        Ok(StateSpec::Bare(BareState { photons, levels }))
    }
}

impl fmt::Display for StateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpec::DressedGround => write!(f, "ground"),
            StateSpec::Dressed(j) => write!(f, "d:{j}"),
            StateSpec::Bare(b) => {
                for l in &b.levels {
                    write!(f, "{l},")?;
                }
                write!(f, "{}", b.photons)
            }
        }
    }
}

/// Dressed-basis vector for a state spec.
pub fn state_vector(basis: &DressedBasis, spec: &StateSpec) -> Result<DVector<C64>> {
    let d = basis.dim();
    let unit = |j: usize| {
        let mut v = DVector::zeros(d);
        v[j] = C64::new(1.0, 0.0);
        v
    };
    match spec {
        StateSpec::DressedGround => Ok(unit(basis.dressed_ground_index()?)),
        StateSpec::Dressed(j) if *j < d => Ok(unit(*j)),
        StateSpec::Dressed(j) => Err(Error::InvalidParameter(format!("dressed index {j} out of range"))),
        StateSpec::Bare(b) => {
            let i = basis.space().index_of(b)?;
            Ok(basis.states().row(i).adjoint())
        }
    }
}

/// `⟨ψ|ρ|ψ⟩` with `ρ` in the dressed basis.
pub fn population(rho: &CMatrix, basis: &DressedBasis, spec: &StateSpec) -> Result<f64> {
    check_dim(rho, basis.dim())?;
    let v = state_vector(basis, spec)?;
    Ok((v.adjoint() * rho * &v)[(0, 0)].re)
}

/// Projector onto a state spec, as a probe operator.
pub fn projector(basis: &DressedBasis, spec: &StateSpec) -> Result<CMatrix> {
    let v = state_vector(basis, spec)?;
    Ok(&v * v.adjoint())
}

/// Population outside the sector where every emitter sits in `|s⟩`.
pub fn population_outside_s(rho: &CMatrix, basis: &DressedBasis) -> f64 {
    let all_s = ((1u16 << basis.space().n_atoms()) - 1) as u8;
    (0..basis.dim()).filter(|&j| basis.s_pattern(j) != Some(all_s)).map(|j| rho[(j, j)].re).sum()
}

fn check_dim(rho: &CMatrix, d: usize) -> Result<()> {
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rho.nrows() });
    }
    Ok(())
}

/// Cached positive-frequency operators and the normal-ordered products built from them.
#[derive(Debug, Clone)]
pub struct ObservableSet {
    pub x_plus: CMatrix,
    pub x_minus: CMatrix,
    pub sigma_plus: CMatrix,
    pub sigma_minus: CMatrix,
    pub gamma0: f64,
    photons: CMatrix,
    pairs: CMatrix,
    triples: CMatrix,
    emitter: CMatrix,
}

impl ObservableSet {
    pub fn new(basis: &DressedBasis, gamma0: f64) -> Result<Self> {
        if !(gamma0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("gamma0 must be non-negative, got {gamma0}")));
        }
        let space = basis.space();
        let x = basis.to_dressed(&quadrature(space))?;
        let sigma = basis.to_dressed(&polarization_gs(space))?;
        let x_plus = positive_frequency_dressed(&x, basis.energies(), None);
        let sigma_plus = positive_frequency_dressed(&sigma, basis.energies(), None);
        let x_minus = x_plus.adjoint();
        let sigma_minus = sigma_plus.adjoint();
        let xx = &x_plus * &x_plus;
        let xxs = &xx * &sigma_plus;
        Ok(ObservableSet {
            photons: &x_minus * &x_plus,
            pairs: xx.adjoint() * &xx,
            triples: xxs.adjoint() * &xxs,
            emitter: &sigma_minus * &sigma_plus,
            x_plus,
            x_minus,
            sigma_plus,
            sigma_minus,
            gamma0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x_plus.nrows()
    }

    /// `X⁻X⁺`.
    pub fn photon_operator(&self) -> &CMatrix {
        &self.photons
    }

    /// `X⁻X⁻X⁺X⁺`, built as `(X⁺X⁺)†(X⁺X⁺)`.
    pub fn pair_operator(&self) -> &CMatrix {
        &self.pairs
    }

    /// `σ⁻X⁻X⁻X⁺X⁺σ⁺`.
    pub fn triple_operator(&self) -> &CMatrix {
        &self.triples
    }

    /// `σ⁻σ⁺`.
    pub fn emitter_operator(&self) -> &CMatrix {
        &self.emitter
    }

    fn expect(&self, op: &CMatrix, rho: &CMatrix) -> Result<f64> {
        check_dim(rho, self.dim())?;
        Ok(trace_product(op, rho).re)
    }

    /// `⟨X⁻X⁺⟩`, the number of photons a detector can register.
    pub fn mean_physical_photons(&self, rho: &CMatrix) -> Result<f64> {
        self.expect(&self.photons, rho)
    }

    /// `γ₀⟨X⁻X⁺⟩` in units of ω₀.
    pub fn output_flux(&self, rho: &CMatrix) -> Result<f64> {
        Ok(self.gamma0 * self.mean_physical_photons(rho)?)
    }

    pub fn g2(&self, rho: &CMatrix) -> Result<Option<f64>> {
        let n = self.mean_physical_photons(rho)?;
        Ok(g2_from(self.expect(&self.pairs, rho)?, n))
    }

    /// `𝒢⁽²⁾ = g⁽²⁾⟨X⁻X⁺⟩`.
    pub fn big_g2(&self, rho: &CMatrix) -> Result<f64> {
        let n = self.mean_physical_photons(rho)?;
        Ok(big_g2_from(self.expect(&self.pairs, rho)?, n))
    }

    pub fn g3(&self, rho: &CMatrix) -> Result<Option<f64>> {
        let n = self.mean_physical_photons(rho)?;
        let s = self.expect(&self.emitter, rho)?;
        Ok(g3_from(self.expect(&self.triples, rho)?, s, n))
    }

    /// Probes recording everything the statistics and trajectory exports need.
    pub fn probes(&self, basis: &DressedBasis) -> Result<Vec<Probe>> {
        let s0 = StateSpec::Bare(BareState { photons: 0, levels: vec![Level::S; basis.space().n_atoms()] });
        Ok(vec![
            Probe::new(PHOTONS, self.photons.clone()),
            Probe::new(FLUX, &self.photons * C64::new(self.gamma0, 0.0)),
            Probe::new(P_GROUND, projector(basis, &StateSpec::DressedGround)?),
            Probe::new(P_S0, projector(basis, &s0)?),
            Probe::new(PAIR_NUMERATOR, self.pairs.clone()),
            Probe::new(TRIPLE_NUMERATOR, self.triples.clone()),
            Probe::new(EMITTER, self.emitter.clone()),
        ])
    }
}

pub fn g2_from(pairs: f64, photons: f64) -> Option<f64> {
    (photons > DENOMINATOR_FLOOR).then(|| (pairs / (photons * photons)).max(0.0))
}

pub fn big_g2_from(pairs: f64, photons: f64) -> f64 {
    g2_from(pairs, photons).map_or(0.0, |g| g * photons)
}

pub fn g3_from(triples: f64, emitter: f64, photons: f64) -> Option<f64> {
    (photons > DENOMINATOR_FLOOR && emitter > DENOMINATOR_FLOOR)
        .then(|| (triples / (emitter * photons * photons)).max(0.0))
}

/// Equal-time statistics series derived from a trajectory recorded with
/// [`ObservableSet::probes`]. Undefined points are NaN.
#[derive(Debug, Clone)]
pub struct Statistics {
    pub times: Vec<f64>,
    pub photons: Vec<f64>,
    pub g2: Vec<f64>,
    pub big_g2: Vec<f64>,
    pub g3: Vec<f64>,
}

impl Statistics {
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        let get = |name: &str| {
            traj.series(name).ok_or_else(|| Error::InvalidParameter(format!("trajectory lacks series `{name}`")))
        };
        let (n, p, t, s) = (get(PHOTONS)?, get(PAIR_NUMERATOR)?, get(TRIPLE_NUMERATOR)?, get(EMITTER)?);
        let undefined = |v: Option<f64>| v.unwrap_or(f64::NAN);
        Ok(Statistics {
            times: traj.times.clone(),
            photons: n.to_vec(),
            g2: n.iter().zip(p).map(|(&n, &p)| undefined(g2_from(p, n))).collect(),
            big_g2: n.iter().zip(p).map(|(&n, &p)| big_g2_from(p, n)).collect(),
            g3: (0..n.len()).map(|i| undefined(g3_from(t[i], s[i], n[i]))).collect(),
        })
    }

    /// Index range where `⟨X⁻X⁺⟩` exceeds `fraction` of its peak.
    pub fn emission_window(&self, fraction: f64) -> Option<(usize, usize)> {
        let peak = self.photons.iter().copied().fold(0.0, f64::max);
        if peak <= DENOMINATOR_FLOOR {
            return None;
        }
        let above = |v: &f64| *v > fraction * peak;
        let first = self.photons.iter().position(above)?;
        let last = self.photons.iter().rposition(above)?;
        Some((first, last))
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W, stride: usize, metadata: &[String]) -> Result<()> {
        for line in metadata {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "t,xx,g2,G2,g3")?;
        let cell = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
        let last = self.times.len().saturating_sub(1);
        for i in (0..self.times.len()).filter(|i| i % stride.max(1) == 0 || *i == last) {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.times[i],
                cell(self.photons[i]),
                cell(self.g2[i]),
                cell(self.big_g2[i]),
                cell(self.g3[i])
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressed::diagonalize;
    use crate::hilbert::{max_abs, HilbertSpace};
    use crate::model::{build_hamiltonian, ModelParams};
    use proptest::prelude::*;

    fn basis(g: f64, n_fock: usize, n_atoms: usize) -> DressedBasis {
        let space = HilbertSpace::new(n_fock, n_atoms).unwrap();
        diagonalize(&build_hamiltonian(&ModelParams::zero_detuning(g), &space).unwrap()).unwrap()
    }

    fn pure(basis: &DressedBasis, spec: &str) -> CMatrix {
        projector(basis, &spec.parse().unwrap()).unwrap()
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("ground".parse::<StateSpec>().unwrap(), StateSpec::DressedGround);
        assert_eq!("d:4".parse::<StateSpec>().unwrap(), StateSpec::Dressed(4));
        assert_eq!(
            "g,s,2".parse::<StateSpec>().unwrap(),
            StateSpec::Bare(BareState { photons: 2, levels: vec![Level::G, Level::S] })
        );
        for bad in ["", "x,0", "s,-1", "d:x", "s"] {
            assert!(bad.parse::<StateSpec>().is_err(), "{bad}");
        }
        let spec: StateSpec = "s,e,3".parse().unwrap();
        assert_eq!(spec.to_string().parse::<StateSpec>().unwrap(), spec);
    }

    #[test]
    fn adjoint_pairs() {
        let obs = ObservableSet::new(&basis(0.6, 8, 1), 0.02).unwrap();
        assert_eq!(obs.x_minus, obs.x_plus.adjoint());
        assert_eq!(obs.sigma_minus, obs.sigma_plus.adjoint());
        let xx = &obs.x_plus * &obs.x_plus;
        assert!(max_abs(&(obs.pair_operator() - &obs.x_minus * &obs.x_minus * &xx)) < 1e-12);
    }

    #[test]
    fn virtual_photons_are_invisible() {
        for g in [0.1, 0.3, 0.6, 0.7] {
            let b = basis(g, 16, 1);
            let obs = ObservableSet::new(&b, 0.02).unwrap();
            let rho = pure(&b, "ground");
            assert!(obs.mean_physical_photons(&rho).unwrap().abs() < 1e-10);
            assert_eq!(obs.g2(&rho).unwrap(), None);
            assert_eq!(obs.big_g2(&rho).unwrap(), 0.0);
        }
    }

    #[test]
    fn s_ladder_acts_as_bare_cavity() {
        let b = basis(0.6, 8, 1);
        let obs = ObservableSet::new(&b, 0.01).unwrap();
        let one = pure(&b, "s,1");
        assert!((obs.mean_physical_photons(&one).unwrap() - 1.0).abs() < 1e-12);
        assert!((obs.output_flux(&one).unwrap() - 0.01).abs() < 1e-14);
        assert!(obs.g2(&one).unwrap().unwrap().abs() < 1e-12);
        assert!(obs.mean_physical_photons(&pure(&b, "s,0")).unwrap().abs() < 1e-14);
        let two = pure(&b, "s,2");
        assert!((obs.g2(&two).unwrap().unwrap() - 0.5).abs() < 1e-12);
        // σ⁺ has no support on the s-ladder
        assert_eq!(obs.g3(&two).unwrap(), None);
        let vacuum_flux = ObservableSet::new(&b, 0.0).unwrap().output_flux(&one).unwrap();
        assert_eq!(vacuum_flux, 0.0);
    }

    #[test]
    fn populations_sum_to_one() {
        let b = basis(0.6, 6, 1);
        let d = b.dim();
        let v = DVector::from_fn(d, |i, _| C64::new((i as f64).sin(), (i as f64 * 0.3).cos()));
        let rho = &v * v.adjoint() * C64::new(1.0 / v.norm_squared(), 0.0);
        let total: f64 = (0..d).map(|j| population(&rho, &b, &StateSpec::Dressed(j)).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let bare_total: f64 = (0..b.space().dim())
            .map(|i| population(&rho, &b, &StateSpec::Bare(b.space().state_at(i))).unwrap())
            .sum();
        assert!((bare_total - 1.0).abs() < 1e-12);
        assert!(population(&rho, &b, &StateSpec::Dressed(d)).is_err());
        assert!(population(&CMatrix::zeros(2, 2), &b, &StateSpec::DressedGround).is_err());
        let ground = pure(&b, "ground");
        assert!((population(&ground, &b, &StateSpec::DressedGround).unwrap() - 1.0).abs() < 1e-14);
        assert!((population_outside_s(&ground, &b) - 1.0).abs() < 1e-14);
        assert!(population_outside_s(&pure(&b, "s,3"), &b).abs() < 1e-14);
    }

    #[test]
    fn two_atom_set_builds() {
        let b = basis(0.65, 5, 2);
        let obs = ObservableSet::new(&b, 0.01).unwrap();
        let rho = pure(&b, "ground");
        assert!(obs.mean_physical_photons(&rho).unwrap().abs() < 1e-10);
        assert_eq!(obs.probes(&b).unwrap().len(), 7);
    }

    #[test]
    fn floors() {
        assert_eq!(g2_from(1.0, 1e-13), None);
        assert_eq!(g3_from(1.0, 1e-13, 1.0), None);
        assert_eq!(g2_from(2.0, 1.0), Some(2.0));
        assert_eq!(g2_from(-1e-18, 1.0), Some(0.0));
        assert!(ObservableSet::new(&basis(0.0, 3, 1), -1.0).is_err());
    }

    proptest! {
        #[test]
        fn expectations_are_real(seed in proptest::collection::vec(-1.0f64..1.0, 2 * 21)) {
            let b = basis(0.5, 6, 1);
            let obs = ObservableSet::new(&b, 0.02).unwrap();
            let d = b.dim();
            let v = DVector::from_fn(d, |i, _| C64::new(seed[i], seed[i + d]));
            prop_assume!(v.norm() > 1e-3);
            let rho = &v * v.adjoint() * C64::new(1.0 / v.norm_squared(), 0.0);
            for op in [obs.photon_operator(), obs.pair_operator(), obs.triple_operator(), obs.emitter_operator()] {
                let z = trace_product(op, &rho);
                prop_assert!(z.im.abs() < 1e-10);
                prop_assert!(z.re > -1e-10);
            }
            let n = obs.mean_physical_photons(&rho).unwrap();
            prop_assert_eq!(obs.output_flux(&rho).unwrap(), 0.02 * n);
        }
    }
}
