//! Dressed basis: eigenstates of the full Hamiltonian, their sector and
//! parity labels, the ground-state expansion in bare states, and the
//! positive/negative frequency split of system operators.

use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, HilbertSpace, Level, Operator, C64};
use crate::model::{bare_parity, build_hamiltonian, build_rwa_hamiltonian, ModelParams};

/// Transitions with `|ω_k − ω_j|` at or below this are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

const HERMITIAN_TOL: f64 = 1e-12;
const SECTOR_OVERLAP_TOL: f64 = 1e-8;
const PARITY_PURITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    /// Every emitter in `|s⟩`: a free cavity ladder.
    NonInteracting,
    Interacting,
}

impl Sector {
    pub fn label(self) -> &'static str {
        match self {
            Sector::NonInteracting => "nonint",
            Sector::Interacting => "int",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalizeMethod {
    /// Diagonalize each connected block of the Hamiltonian separately.
    #[default]
    Blocked,
    /// One dense diagonalization of the whole matrix.
    Dense,
}

#[derive(Debug, Clone)]
pub struct DressedBasis {
    space: HilbertSpace,
    energies: Vec<f64>,
    /// Eigenvectors as columns, in the bare basis.
    states: CMatrix,
    sectors: Vec<Sector>,
    /// Bitmask of atoms sitting in `|s⟩` (bit `a` for atom `a`), `None` if mixed.
    s_patterns: Vec<Option<u8>>,
    parities: Vec<Option<i8>>,
}

fn s_pattern_of(space: &HilbertSpace, i: usize) -> u8 {
    space
        .state_at(i)
        .levels
        .iter()
        .enumerate()
        .filter(|(_, l)| **l == Level::S)
        .fold(0u8, |acc, (a, _)| acc | (1 << a))
}

/// Connected components of the nonzero pattern of `h`.
fn connected_blocks(h: &CMatrix) -> Vec<Vec<usize>> {
    let d = h.nrows();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if h[(i, j)] != C64::new(0.0, 0.0) || h[(j, i)] != C64::new(0.0, 0.0) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; d];
    for i in 0..d {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    blocks
}

/// Rotate `v` so its largest-magnitude component is real and positive.
fn fix_phase(v: &mut DVector<C64>) {
    let max = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|z| z.norm() >= max * (1.0 - 1e-12)).unwrap();
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
}

pub fn diagonalize(h: &Operator) -> Result<DressedBasis> {
    diagonalize_with(h, DiagonalizeMethod::Blocked)
}

pub fn diagonalize_with(h: &Operator, method: DiagonalizeMethod) -> Result<DressedBasis> {
    let defect = h.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let space = *h.space();
    let d = space.dim();
    let m = h.matrix();
    let blocks = match method {
        DiagonalizeMethod::Blocked => connected_blocks(m),
        DiagonalizeMethod::Dense => vec![(0..d).collect()],
    };

    let mut pairs: Vec<(f64, DVector<C64>)> = Vec::with_capacity(d);
    for block in &blocks {
        let n = block.len();
        // symmetrize so rounding in the input cannot leak into the solver
        let sub = CMatrix::from_fn(n, n, |r, c| {
            (m[(block[r], block[c])] + m[(block[c], block[r])].conj()) * 0.5
        });
        let eig = sub.symmetric_eigen();
        for k in 0..n {
            let mut v = DVector::<C64>::zeros(d);
            for (r, &row) in block.iter().enumerate() {
                v[row] = eig.eigenvectors[(r, k)];
            }
            let norm = v.norm();
            v /= C64::new(norm, 0.0);
            fix_phase(&mut v);
            pairs.push((eig.eigenvalues[k], v));
        }
    }

    let labelled: Vec<_> = pairs
        .into_iter()
        .map(|(e, v)| {
            let (sector, pattern, parity) = classify(&space, &v);
            (e, v, sector, pattern, parity)
        })
        .collect();

    let mut order: Vec<usize> = (0..labelled.len()).collect();
    order.sort_by(|&a, &b| labelled[a].0.total_cmp(&labelled[b].0));
    // within near-degenerate clusters: noninteracting first, then even parity
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && labelled[order[end]].0 - labelled[order[end - 1]].0 <= DEGENERACY_TOL {
            end += 1;
        }
        order[start..end].sort_by(|&a, &b| {
            let key = |i: usize| {
                let (_, ref v, sector, _, parity) = labelled[i];
                let pivot = v.iter().position(|z| z.re > 0.0 && z.im == 0.0).unwrap_or(0);
                (sector != Sector::NonInteracting, parity.map(|p| -p).unwrap_or(0), pivot)
            };
            key(a).cmp(&key(b)).then(labelled[a].0.total_cmp(&labelled[b].0))
        });
        start = end;
    }

    let mut states = CMatrix::zeros(d, d);
    let mut energies = Vec::with_capacity(d);
    let mut sectors = Vec::with_capacity(d);
    let mut s_patterns = Vec::with_capacity(d);
    let mut parities = Vec::with_capacity(d);
    for (col, &i) in order.iter().enumerate() {
        let (e, ref v, sector, pattern, parity) = labelled[i];
        states.set_column(col, v);
        energies.push(e);
        sectors.push(sector);
        s_patterns.push(pattern);
        parities.push(parity);
    }
    Ok(DressedBasis { space, energies, states, sectors, s_patterns, parities })
}

fn classify(space: &HilbertSpace, v: &DVector<C64>) -> (Sector, Option<u8>, Option<i8>) {
    let all_s: u8 = (1u8 << space.n_atoms()) - 1;
    let mut pattern_weight = [0.0f64; 1 << crate::hilbert::MAX_ATOMS];
    let mut parity_weight = 0.0;
    for (i, z) in v.iter().enumerate() {
        let w = z.norm_sqr();
        pattern_weight[s_pattern_of(space, i) as usize] += w;
        parity_weight += w * bare_parity(space, i) as f64;
    }
    let sector = if pattern_weight[all_s as usize] > 1.0 - SECTOR_OVERLAP_TOL {
        Sector::NonInteracting
    } else {
        Sector::Interacting
    };
    let pattern = pattern_weight
        .iter()
        .position(|&w| w > 1.0 - SECTOR_OVERLAP_TOL)
        .map(|p| p as u8);
    let parity = if parity_weight > 1.0 - 2.0 * PARITY_PURITY_TOL {
        Some(1)
    } else if parity_weight < -1.0 + 2.0 * PARITY_PURITY_TOL {
        Some(-1)
    } else {
        None
    };
    (sector, pattern, parity)
}

impl DressedBasis {
    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Ascending eigenvalues.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn energy(&self, j: usize) -> f64 {
        self.energies[j]
    }

    /// Eigenvectors as columns of a unitary matrix.
    pub fn states(&self) -> &CMatrix {
        &self.states
    }

    pub fn state(&self, j: usize) -> DVector<C64> {
        self.states.column(j).into_owned()
    }

    pub fn sector(&self, j: usize) -> Sector {
        self.sectors[j]
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn s_pattern(&self, j: usize) -> Option<u8> {
        self.s_patterns[j]
    }

    pub fn parity(&self, j: usize) -> Option<i8> {
        self.parities[j]
    }

    /// Largest weight of an eigenvector on bare states of the opposite parity.
    pub fn max_parity_leakage(&self) -> f64 {
        (0..self.dim())
            .map(|j| {
                let v = self.states.column(j);
                let (even, odd) = v.iter().enumerate().fold((0.0, 0.0), |(e, o), (i, z)| {
                    if bare_parity(&self.space, i) > 0 {
                        (e + z.norm_sqr(), o)
                    } else {
                        (e, o + z.norm_sqr())
                    }
                });
                f64::min(even, odd)
            })
            .fold(0.0, f64::max)
    }

    /// Index of `|0̃⟩`: the lowest state with every emitter in the g/e manifold.
    pub fn dressed_ground_index(&self) -> Result<usize> {
        (0..self.dim()).find(|&j| self.s_patterns[j] == Some(0)).ok_or(Error::NoInteractingState)
    }

    /// Dressed index of a bare state that is itself an eigenstate (the s-ladder).
    pub fn index_of_bare(&self, bare: &crate::hilbert::BareState) -> Result<usize> {
        let i = self.space.index_of(bare)?;
        (0..self.dim())
            .find(|&j| self.states[(i, j)].norm_sqr() > 1.0 - SECTOR_OVERLAP_TOL)
            .ok_or_else(|| Error::InvalidParameter(format!("bare state {bare:?} is not an eigenstate")))
    }

    /// `U† O U`: matrix elements `⟨j|O|k⟩`.
    pub fn to_dressed(&self, op: &Operator) -> Result<CMatrix> {
        self.check_space(op)?;
        Ok(self.states.adjoint() * op.matrix() * &self.states)
    }

    /// Inverse of [`DressedBasis::to_dressed`].
    pub fn to_bare(&self, m: &CMatrix) -> Result<Operator> {
        Operator::new(self.space, &self.states * m * self.states.adjoint())
    }

    fn check_space(&self, op: &Operator) -> Result<()> {
        if op.space() != &self.space {
            return Err(Error::SpaceMismatch(op.space().to_string(), self.space.to_string()));
        }
        Ok(())
    }

    /// `max_j ‖H|j⟩ − ω_j|j⟩‖`.
    pub fn residual(&self, h: &Operator) -> f64 {
        (0..self.dim())
            .map(|j| {
                let v = self.states.column(j);
                (h.matrix() * v - v * C64::new(self.energies[j], 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// `max |⟨j|k⟩ − δ_jk|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.states.adjoint() * &self.states;
        let d = self.dim();
        let mut worst = 0.0f64;
        for j in 0..d {
            for k in 0..d {
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((g[(j, k)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Optional band restricting which transition frequencies enter `O⁺`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyBand {
    pub min: f64,
    pub max: f64,
}

/// `O⁺` in the dressed basis from dressed matrix elements of a Hermitian `O`.
pub fn positive_frequency_dressed(op_dressed: &CMatrix, energies: &[f64], band: Option<FrequencyBand>) -> CMatrix {
    let d = energies.len();
    CMatrix::from_fn(d, d, |j, k| {
        let w = energies[k] - energies[j];
        let in_band = band.is_none_or(|b| (b.min..=b.max).contains(&w));
        if w > DEGENERACY_TOL && in_band {
            op_dressed[(j, k)]
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// `O⁺ = Σ_{ω_k > ω_j + ε} ⟨j|O|k⟩ |j⟩⟨k|`, returned in the bare basis.
pub fn positive_frequency_part(op: &Operator, basis: &DressedBasis) -> Result<Operator> {
    positive_frequency_part_in_band(op, basis, None)
}

pub fn positive_frequency_part_in_band(
    op: &Operator,
    basis: &DressedBasis,
    band: Option<FrequencyBand>,
) -> Result<Operator> {
    let defect = op.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let dressed = basis.to_dressed(op)?;
    basis.to_bare(&positive_frequency_dressed(&dressed, basis.energies(), band))
}

/// Bare-state coefficients of `|0̃⟩` for a single emitter.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundExpansion {
    /// `c_{g,2k}` for `k = 0, 1, ...`.
    pub c_g: Vec<C64>,
    /// `c_{e,2k+1}` for `k = 0, 1, ...`.
    pub c_e: Vec<C64>,
    /// Norm of the components outside the even-parity g/e ansatz.
    pub residual: f64,
    pub energy: f64,
}

impl GroundExpansion {
    /// `|c_{g,2k}|²`, zero beyond the cutoff.
    pub fn weight_g(&self, k: usize) -> f64 {
        self.c_g.get(k).map_or(0.0, |c| c.norm_sqr())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_g.iter().chain(&self.c_e).map(|c| c.norm_sqr()).sum()
    }
}

pub fn ground_expansion(basis: &DressedBasis) -> Result<GroundExpansion> {
    let space = basis.space();
    if space.n_atoms() != 1 {
        return Err(Error::InvalidParameter("ground expansion is defined for a single emitter".into()));
    }
    let j0 = basis.dressed_ground_index()?;
    let mut v = basis.state(j0);
    let g0 = space.index_of(&crate::hilbert::BareState { photons: 0, levels: vec![Level::G] })?;
    if v[g0].norm() > 0.0 {
        let phase = v[g0].conj() / v[g0].norm();
        v *= phase;
    }
    let mut c_g = Vec::new();
    let mut c_e = Vec::new();
    let mut outside = 0.0;
    for i in 0..space.dim() {
        let st = space.state_at(i);
        match (st.levels[0], st.photons % 2) {
            (Level::G, 0) => c_g.push(v[i]),
            (Level::E, 1) => c_e.push(v[i]),
            _ => outside += v[i].norm_sqr(),
        }
    }
    Ok(GroundExpansion { c_g, c_e, residual: outside.sqrt(), energy: basis.energy(j0) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelRow {
    pub omega_r: f64,
    pub energies: Vec<f64>,
    pub sectors: Vec<Sector>,
    /// Lowest interacting-sector eigenvalue of the rotating-wave Hamiltonian.
    pub rwa_ground: f64,
    /// Lowest interacting-sector eigenvalue of the full Hamiltonian.
    pub interacting_ground: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelTable {
    pub n_levels: usize,
    pub rows: Vec<LevelRow>,
}

pub fn level_sweep(
    grid: &[f64],
    params: &ModelParams,
    space: &HilbertSpace,
    n_levels: usize,
) -> Result<LevelTable> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("coupling grid is empty".into()));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("coupling grid must be sorted ascending".into()));
    }
    if n_levels == 0 || n_levels > space.dim() {
        return Err(Error::InvalidParameter(format!("cannot report {n_levels} levels")));
    }
    let rows = grid
        .par_iter()
        .map(|&g| {
            let p = params.with_coupling(g);
            let basis = diagonalize(&build_hamiltonian(&p, space)?)?;
            let rwa = diagonalize(&build_rwa_hamiltonian(&p, space)?)?;
            Ok(LevelRow {
                omega_r: g,
                energies: basis.energies()[..n_levels].to_vec(),
                sectors: basis.sectors()[..n_levels].to_vec(),
                rwa_ground: rwa.energy(rwa.dressed_ground_index()?),
                interacting_ground: basis.energy(basis.dressed_ground_index()?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LevelTable { n_levels, rows })
}

impl LevelTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema: levels v1")?;
        let mut header = vec!["omega_r".to_string()];
        header.extend((0..self.n_levels).map(|i| format!("E_{i}")));
        header.extend((0..self.n_levels).map(|i| format!("sector_{i}")));
        header.push("E_rwa_ground".into());
        writeln!(out, "{}", header.join(","))?;
        for row in &self.rows {
            let mut cells = vec![row.omega_r.to_string()];
            cells.extend(row.energies.iter().map(|e| e.to_string()));
            cells.extend(row.sectors.iter().map(|s| s.label().to_string()));
            cells.push(row.rwa_ground.to_string());
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{make_destroy, BareState};
    use crate::model::quadrature;

    fn basis_at(g: f64, n_fock: usize, n_atoms: usize) -> (Operator, DressedBasis) {
        let space = HilbertSpace::new(n_fock, n_atoms).unwrap();
        let h = build_hamiltonian(&ModelParams::zero_detuning(g), &space).unwrap();
        let b = diagonalize(&h).unwrap();
        (h, b)
    }

    #[test]
    fn eigen_invariants_hold() {
        for (g, n_atoms) in [(0.0, 1), (0.6, 1), (0.65, 2)] {
            let (h, b) = basis_at(g, 10, n_atoms);
            let hnorm = h.matrix().norm();
            assert!(b.orthonormality_defect() < 1e-10);
            assert!(b.residual(&h) <= 1e-9 * hnorm);
            assert!(b.energies().windows(2).all(|w| w[0] <= w[1] + DEGENERACY_TOL));
            // completeness
            let p = b.states() * b.states().adjoint();
            let id = CMatrix::identity(b.dim(), b.dim());
            assert!(crate::hilbert::max_abs(&(p - id)) < 1e-9);
        }
    }

    #[test]
    fn uncoupled_energies_are_bare_ladder() {
        let (_, b) = basis_at(0.0, 6, 1);
        let mut expected: Vec<f64> = (0..=6).flat_map(|n| [0.0, 3.5, 4.5].map(|w| w + n as f64)).collect();
        expected.sort_by(|a, c| a.partial_cmp(c).unwrap());
        for (a, e) in b.energies().iter().zip(&expected) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn noninteracting_states_are_bare() {
        let (_, b) = basis_at(0.6, 8, 1);
        for n in 0..=8 {
            let j = b.index_of_bare(&BareState { photons: n, levels: vec![Level::S] }).unwrap();
            assert_eq!(b.sector(j), Sector::NonInteracting);
            assert!((b.energy(j) - n as f64).abs() < 1e-12);
            let i = b.space().index_of(&BareState { photons: n, levels: vec![Level::S] }).unwrap();
            assert!((b.states()[(i, j)] - C64::new(1.0, 0.0)).norm() < 1e-10);
        }
        let n_nonint = b.sectors().iter().filter(|s| **s == Sector::NonInteracting).count();
        assert_eq!(n_nonint, 9);
    }

    #[test]
    fn ground_bends_below_g() {
        let (_, b) = basis_at(0.6, 16, 1);
        let j0 = b.dressed_ground_index().unwrap();
        assert!(b.energy(j0) < 3.5);
        assert_eq!(b.parity(j0), Some(1));
    }

    #[test]
    fn blocked_and_dense_agree() {
        let (h, blocked) = basis_at(0.6, 10, 1);
        let dense = diagonalize_with(&h, DiagonalizeMethod::Dense).unwrap();
        for (a, c) in blocked.energies().iter().zip(dense.energies()) {
            assert!((a - c).abs() < 1e-10);
        }
        // generic coupling: no degeneracies inside a parity class, so dense
        // eigenvectors must also have pure parity
        assert!(dense.max_parity_leakage() < 1e-9);
        assert!(blocked.max_parity_leakage() < 1e-9);
    }

    #[test]
    fn non_hermitian_input_rejected() {
        let space = HilbertSpace::new(3, 1).unwrap();
        let a = make_destroy(&space);
        assert!(matches!(diagonalize(&a), Err(Error::NotHermitian(_))));
        let (_, b) = basis_at(0.3, 3, 1);
        assert!(positive_frequency_part(&a, &b).is_err());
    }

    #[test]
    fn ground_expansion_uncoupled() {
        let (_, b) = basis_at(0.0, 8, 1);
        let ge = ground_expansion(&b).unwrap();
        assert_eq!(ge.c_g[0], C64::new(1.0, 0.0));
        assert!(ge.c_g[1..].iter().all(|c| c.norm() == 0.0));
        assert!(ge.c_e.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn ground_expansion_structure() {
        let mut prev = 0.0;
        for g in [0.3, 0.4, 0.6] {
            let (_, b) = basis_at(g, 16, 1);
            let ge = ground_expansion(&b).unwrap();
            assert!((ge.norm_sqr() - 1.0).abs() < 1e-10);
            assert!(ge.residual < 1e-10);
            assert!(ge.c_g[0].im == 0.0 && ge.c_g[0].re > 0.0);
            assert!(ge.weight_g(1) > prev);
            prev = ge.weight_g(1);
        }
        let (_, b) = basis_at(0.6, 16, 1);
        let ge = ground_expansion(&b).unwrap();
        assert!(ge.weight_g(2) < ge.weight_g(1));
    }

    #[test]
    fn quadrature_positive_part_annihilates_ground() {
        let (_, b) = basis_at(0.6, 16, 1);
        let xp = positive_frequency_part(&quadrature(b.space()), &b).unwrap();
        let j0 = b.dressed_ground_index().unwrap();
        let out = xp.matrix() * b.state(j0);
        assert!(out.norm() < 1e-12);
    }

    #[test]
    fn quadrature_positive_part_is_a_when_uncoupled() {
        let (_, b) = basis_at(0.0, 8, 1);
        let xp = positive_frequency_part(&quadrature(b.space()), &b).unwrap();
        let a = make_destroy(b.space());
        assert!(xp.sub(&a).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn quadrature_positive_part_on_s_ladder() {
        let (_, b) = basis_at(0.6, 8, 1);
        let space = *b.space();
        let xp = positive_frequency_part(&quadrature(&space), &b).unwrap();
        for n in 1..=8 {
            let ket = space.index_of(&BareState { photons: n, levels: vec![Level::S] }).unwrap();
            let bra = space.index_of(&BareState { photons: n - 1, levels: vec![Level::S] }).unwrap();
            let col = xp.matrix().column(ket);
            for (i, z) in col.iter().enumerate() {
                let expected = if i == bra { (n as f64).sqrt() } else { 0.0 };
                assert!((z - C64::new(expected, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn frequency_decomposition_identity() {
        let (_, b) = basis_at(0.45, 10, 1);
        let x = b.to_dressed(&quadrature(b.space())).unwrap();
        let xp = positive_frequency_dressed(&x, b.energies(), None);
        let rest = &x - &xp - xp.adjoint();
        // diagonal part vanishes: parity forbids ⟨j|X|j⟩ and nothing is degenerate
        assert!(crate::hilbert::max_abs(&rest) < 1e-9);
        // parity selection rule
        for j in 0..b.dim() {
            for k in 0..b.dim() {
                if b.sector(j) == Sector::Interacting && b.parity(j) == b.parity(k) {
                    assert!(x[(j, k)].norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn band_filter_restricts_transitions() {
        let (_, b) = basis_at(0.6, 10, 1);
        let x = b.to_dressed(&quadrature(b.space())).unwrap();
        let band = FrequencyBand { min: 0.5, max: 1.5 };
        let xp = positive_frequency_dressed(&x, b.energies(), Some(band));
        for j in 0..b.dim() {
            for k in 0..b.dim() {
                let w = b.energy(k) - b.energy(j);
                if xp[(j, k)].norm() > 0.0 {
                    assert!((0.5..=1.5).contains(&w));
                }
            }
        }
    }

    #[test]
    fn sweep_levels() {
        let space = HilbertSpace::new(12, 1).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let table = level_sweep(&grid, &ModelParams::default(), &space, 8).unwrap();
        for row in &table.rows {
            assert!((row.rwa_ground - 3.5).abs() < 1e-12);
            let nonint: Vec<f64> = row
                .energies
                .iter()
                .zip(&row.sectors)
                .filter(|(_, s)| **s == Sector::NonInteracting)
                .map(|(e, _)| *e)
                .collect();
            for e in nonint {
                assert!((e - e.round()).abs() < 1e-12);
            }
        }
        let first = &table.rows[0];
        let mut bare: Vec<f64> = (0..=12).flat_map(|n| [0.0, 3.5, 4.5].map(|w| w + n as f64)).collect();
        bare.sort_by(|a, c| a.partial_cmp(c).unwrap());
        for (e, x) in first.energies.iter().zip(&bare) {
            assert!((e - x).abs() < 1e-12);
        }
        assert!(level_sweep(&[], &ModelParams::default(), &space, 8).is_err());
        assert!(level_sweep(&[0.2, 0.1], &ModelParams::default(), &space, 8).is_err());

        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().nth(1).unwrap();
        assert!(header.starts_with("omega_r,E_0,"));
        assert!(header.ends_with("sector_7,E_rwa_ground"));
        assert_eq!(text.lines().count(), 2 + grid.len());
    }
}
