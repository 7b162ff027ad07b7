//! System Hamiltonians: the full cascade-emitter/cavity Hamiltonian, its
//! rotating-wave counterpart, and the Gaussian drive used to prepare the
//! dressed vacuum from `|s,0⟩`.
//!
//! Frequencies and times are in units of the cavity frequency (ω₀ = 1).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hilbert::{make_destroy, make_number, make_transition, HilbertSpace, Level, Operator, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub omega0: f64,
    pub omega_s: f64,
    pub omega_g: f64,
    pub omega_e: f64,
    /// Light–matter coupling Ω_R.
    pub omega_r: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { omega0: 1.0, omega_s: 0.0, omega_g: 3.5, omega_e: 4.5, omega_r: 0.0 }
    }
}

impl ModelParams {
    /// Default level scheme (ω_gs = 3.5, ω_eg = ω₀) at coupling `omega_r`.
    pub fn zero_detuning(omega_r: f64) -> Self {
        ModelParams { omega_r, ..Default::default() }
    }

    pub fn with_coupling(self, omega_r: f64) -> Self {
        ModelParams { omega_r, ..self }
    }

    pub fn omega_gs(&self) -> f64 {
        self.omega_g - self.omega_s
    }

    pub fn omega_eg(&self) -> f64 {
        self.omega_e - self.omega_g
    }

    pub fn detuning(&self) -> f64 {
        self.omega_eg() - self.omega0
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.omega0, self.omega_s, self.omega_g, self.omega_e, self.omega_r]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("model parameters must be finite".into()));
        }
        if self.omega0 <= 0.0 {
            return Err(Error::InvalidParameter(format!("omega0 must be positive, got {}", self.omega0)));
        }
        if !(self.omega_s < self.omega_g && self.omega_g < self.omega_e) {
            return Err(Error::InvalidParameter(format!(
                "level order requires omega_s < omega_g < omega_e, got {} / {} / {}",
                self.omega_s, self.omega_g, self.omega_e
            )));
        }
        if self.omega_r < 0.0 {
            return Err(Error::InvalidParameter(format!("omega_r must be >= 0, got {}", self.omega_r)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParams {
    /// Gaussian width.
    pub sigma: f64,
    /// Carrier frequency, normally the `|s,0⟩ → |0̃⟩` transition frequency.
    pub omega_drive: f64,
    pub amplitude_scale: f64,
}

impl PulseParams {
    pub fn new(sigma: f64, omega_drive: f64) -> Result<Self> {
        let p = PulseParams { sigma, omega_drive, amplitude_scale: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_amplitude_scale(self, amplitude_scale: f64) -> Self {
        PulseParams { amplitude_scale, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("pulse sigma must be positive, got {}", self.sigma)));
        }
        if !self.omega_drive.is_finite() || !self.amplitude_scale.is_finite() {
            return Err(Error::InvalidParameter("pulse parameters must be finite".into()));
        }
        Ok(())
    }

    /// Peak of the Gaussian envelope, `amplitude_scale · √(π / 2σ²)`.
    pub fn peak_amplitude(&self) -> f64 {
        self.amplitude_scale * (PI / (2.0 * self.sigma * self.sigma)).sqrt()
    }
}

/// Gaussian envelope without the carrier; integrates to `π · amplitude_scale`.
pub fn pulse_gaussian(t: f64, pulse: &PulseParams) -> f64 {
    pulse.peak_amplitude() * (-t * t / (2.0 * pulse.sigma * pulse.sigma)).exp()
}

/// Scalar prefactor multiplying `σ_gs + σ_sg` at time `t`.
pub fn pulse_envelope(t: f64, pulse: &PulseParams) -> f64 {
    pulse_gaussian(t, pulse) * (pulse.omega_drive * t).cos()
}

fn check_space(params: &ModelParams, space: &HilbertSpace) -> Result<()> {
    params.validate()?;
    if space.n_levels() != 3 {
        return Err(Error::InvalidSpace("emitters must have three levels".into()));
    }
    Ok(())
}

/// Bare part shared by both Hamiltonians: `ω₀ a†a + Σ_atoms Σ_α ω_α σ_αα`.
fn bare_hamiltonian(params: &ModelParams, space: &HilbertSpace) -> Result<Operator> {
    let mut h = make_number(space).scale_real(params.omega0);
    for atom in 0..space.n_atoms() {
        for (level, w) in [
            (Level::S, params.omega_s),
            (Level::G, params.omega_g),
            (Level::E, params.omega_e),
        ] {
            h = h.add(&make_transition(space, level, level, atom)?.scale_real(w))?;
        }
    }
    Ok(h)
}

/// `H = ω₀a†a + Σ ω_α σ_αα + Ω_R (a + a†)(σ_eg + σ_ge)`, summed over atoms.
pub fn build_hamiltonian(params: &ModelParams, space: &HilbertSpace) -> Result<Operator> {
    check_space(params, space)?;
    let a = make_destroy(space);
    let x = a.add(&a.adjoint())?;
    let mut h = bare_hamiltonian(params, space)?;
    for atom in 0..space.n_atoms() {
        let dipole = make_transition(space, Level::E, Level::G, atom)?
            .add(&make_transition(space, Level::G, Level::E, atom)?)?;
        h = h.add(&x.mul(&dipole)?.scale_real(params.omega_r))?;
    }
    Ok(h)
}

/// Rotating-wave Hamiltonian with coupling `Ω_R (a σ_eg + a† σ_ge)`.
pub fn build_rwa_hamiltonian(params: &ModelParams, space: &HilbertSpace) -> Result<Operator> {
    check_space(params, space)?;
    let a = make_destroy(space);
    let mut h = bare_hamiltonian(params, space)?;
    for atom in 0..space.n_atoms() {
        let up = make_transition(space, Level::E, Level::G, atom)?;
        let coupling = a.mul(&up)?.add(&a.adjoint().mul(&up.adjoint())?)?;
        h = h.add(&coupling.scale_real(params.omega_r))?;
    }
    Ok(h)
}

/// `Σ_atoms (σ_gs + σ_sg)`, the operator the drive envelope multiplies.
pub fn build_pulse_operator(space: &HilbertSpace) -> Operator {
    polarization_gs(space)
}

/// Polarization of the g↔s transition summed over atoms.
pub fn polarization_gs(space: &HilbertSpace) -> Operator {
    let mut op = Operator::zeros(*space);
    for atom in 0..space.n_atoms() {
        let gs = make_transition(space, Level::G, Level::S, atom).expect("atom index in range");
        op = op.add(&gs.add(&gs.adjoint()).expect("same space")).expect("same space");
    }
    op
}

/// Polarization of the e↔g transition of one atom.
pub fn polarization_eg(space: &HilbertSpace, atom: usize) -> Result<Operator> {
    let eg = make_transition(space, Level::E, Level::G, atom)?;
    eg.add(&eg.adjoint())
}

/// `a + a†`.
pub fn quadrature(space: &HilbertSpace) -> Operator {
    let a = make_destroy(space);
    a.add(&a.adjoint()).expect("same space")
}

/// Parity `(−1)^{a†a} ⊗ Π_atoms (σ_gg − σ_ee + σ_ss)`; diagonal with entries ±1.
pub fn parity_operator(space: &HilbertSpace) -> Operator {
    let d = space.dim();
    let mut op = Operator::zeros(*space).into_matrix();
    for i in 0..d {
        op[(i, i)] = C64::new(bare_parity(space, i) as f64, 0.0);
    }
    Operator::new(*space, op).expect("dimension matches")
}

/// Parity eigenvalue of the bare basis state at composite index `i`.
pub fn bare_parity(space: &HilbertSpace, i: usize) -> i8 {
    let st = space.state_at(i);
    let mut p: i8 = if st.photons.is_multiple_of(2) { 1 } else { -1 };
    for l in st.levels {
        if l == Level::E {
            p = -p;
        }
    }
    p
}

/// `a†a + Σ_atoms σ_ee`, conserved by the rotating-wave Hamiltonian.
pub fn excitation_number(space: &HilbertSpace) -> Operator {
    let mut n = make_number(space);
    for atom in 0..space.n_atoms() {
        n = n.add(&make_transition(space, Level::E, Level::E, atom).unwrap()).unwrap();
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::BareState;
    use nalgebra::DMatrix;

    fn eigenvalues(op: &Operator) -> Vec<f64> {
        let m = op.matrix().clone();
        let mut e: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    fn sector_ge(space: &HilbertSpace) -> Vec<usize> {
        (0..space.dim()).filter(|&i| space.state_at(i).levels[0] != Level::S).collect()
    }

    #[test]
    fn uncoupled_spectrum_is_bare_ladder() {
        let space = HilbertSpace::new(6, 1).unwrap();
        let p = ModelParams::zero_detuning(0.0);
        let h = build_hamiltonian(&p, &space).unwrap();
        let mut expected: Vec<f64> = (0..=6)
            .flat_map(|n| [p.omega_s, p.omega_g, p.omega_e].map(|w| w + n as f64))
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in eigenvalues(&h).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn s_sector_diagonal_is_free_ladder() {
        let space = HilbertSpace::new(8, 1).unwrap();
        let p = ModelParams::zero_detuning(0.6);
        let h = build_hamiltonian(&p, &space).unwrap();
        for n in 0..=8 {
            let st = BareState { photons: n, levels: vec![Level::S] };
            let v = h.element(&st, &st).unwrap();
            assert_eq!(v, C64::new(p.omega_s + n as f64, 0.0));
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_block_diagonal() {
        for n_atoms in [1, 2] {
            let space = HilbertSpace::new(5, n_atoms).unwrap();
            let h = build_hamiltonian(&ModelParams::zero_detuning(0.6), &space).unwrap();
            assert_eq!(h.hermiticity_defect(), 0.0);
            // no element connects a state with atom 0 in s to one with atom 0 in g/e
            for i in 0..space.dim() {
                for j in 0..space.dim() {
                    let (si, sj) = (space.state_at(i), space.state_at(j));
                    for a in 0..n_atoms {
                        if (si.levels[a] == Level::S) != (sj.levels[a] == Level::S) {
                            assert_eq!(h.entry(i, j).norm(), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rabi_part_commutes_with_parity() {
        let space = HilbertSpace::new(7, 2).unwrap();
        let h = build_hamiltonian(&ModelParams::zero_detuning(0.8), &space).unwrap();
        let pi = parity_operator(&space);
        assert_eq!(h.commutator(&pi).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn rwa_conserves_excitations() {
        let space = HilbertSpace::new(7, 1).unwrap();
        let h = build_rwa_hamiltonian(&ModelParams::zero_detuning(0.6), &space).unwrap();
        let n = excitation_number(&space);
        assert!(h.commutator(&n).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn rwa_interacting_ground_is_flat() {
        let space = HilbertSpace::new(10, 1).unwrap();
        let idx = sector_ge(&space);
        for g in [0.0, 0.2, 0.6, 1.0] {
            let p = ModelParams::zero_detuning(g);
            let h = build_rwa_hamiltonian(&p, &space).unwrap();
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| h.entry(idx[r], idx[c]));
            let low = sub.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
            assert!((low - p.omega_g).abs() < 1e-12, "g = {g}: {low}");
        }
    }

    #[test]
    fn rwa_equals_full_when_uncoupled() {
        let space = HilbertSpace::new(4, 2).unwrap();
        let p = ModelParams::zero_detuning(0.0);
        assert_eq!(build_rwa_hamiltonian(&p, &space).unwrap(), build_hamiltonian(&p, &space).unwrap());
    }

    #[test]
    fn envelope_shape_and_area() {
        let pulse = PulseParams::new(5.0, 3.3).unwrap();
        assert!((pulse_envelope(0.0, &pulse) - (PI / 50.0).sqrt()).abs() < 1e-15);
        assert!(pulse_envelope(200.0, &pulse).abs() < 1e-100);
        assert!(pulse_envelope(-200.0, &pulse).abs() < 1e-100);
        for (sigma, scale) in [(5.0, 1.0), (1.7, 1.0), (1.7, 0.4)] {
            let p = PulseParams::new(sigma, 0.0).unwrap().with_amplitude_scale(scale);
            let h = 1e-3;
            let n = (20.0 * sigma / h) as i64;
            let area: f64 = (-n..=n).map(|k| pulse_gaussian(k as f64 * h, &p)).sum::<f64>() * h;
            assert!((area - PI * scale).abs() < 1e-10, "{area}");
        }
        assert!(PulseParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn pulse_operator_couples_only_s_and_g() {
        let space = HilbertSpace::new(4, 1).unwrap();
        let v = build_pulse_operator(&space);
        assert_eq!(v.adjoint(), v);
        for n in 0..=4 {
            for m in 0..=4 {
                let g_n = BareState { photons: n, levels: vec![Level::G] };
                let g_m = BareState { photons: m, levels: vec![Level::G] };
                if n != m {
                    assert_eq!(v.element(&g_n, &g_m).unwrap().norm(), 0.0);
                }
            }
            let s_n = BareState { photons: n, levels: vec![Level::S] };
            let g_n = BareState { photons: n, levels: vec![Level::G] };
            assert_eq!(v.element(&s_n, &g_n).unwrap(), C64::new(1.0, 0.0));
        }
    }

    #[test]
    fn parameter_validation() {
        let mut p = ModelParams::zero_detuning(0.6);
        assert!(p.validate().is_ok());
        assert_eq!(p.detuning(), 0.0);
        assert_eq!(p.omega_gs(), 3.5);
        p.omega_g = 5.0;
        assert!(p.validate().is_err());
        assert!(ModelParams::zero_detuning(-0.1).validate().is_err());
    }
}
