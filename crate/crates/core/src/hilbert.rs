//! Composite Hilbert space of one cavity mode and a few three-level emitters,
//! plus the dense operator algebra used everywhere else.
//!
//! Factor order is fixed: the Fock factor first, then the atoms in index
//! order. A composite basis index is
//! `fock_index * 3^n_atoms + emitter_index`, where the emitter index is the
//! base-3 number formed by the atom levels (atom 0 most significant).

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const EMITTER_LEVELS: usize = 3;
pub const MAX_ATOMS: usize = 2;

/// Emitter level of the cascade system, ordered by energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    S,
    G,
    E,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::S, Level::G, Level::E];

    pub fn index(self) -> usize {
        match self {
            Level::S => 0,
            Level::G => 1,
            Level::E => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "s" | "S" => Ok(Level::S),
            "g" | "G" => Ok(Level::G),
            "e" | "E" => Ok(Level::E),
            other => Err(Error::UnknownLevel(other.to_string())),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            Level::S => "s",
            Level::G => "g",
            Level::E => "e",
        };
        f.write_str(c)
    }
}

/// Tensor factor of the composite space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Fock,
    Atom(usize),
}

/// Bare product state `|levels..., n⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BareState {
    pub photons: usize,
    pub levels: Vec<Level>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    n_fock: usize,
    n_atoms: usize,
}

impl HilbertSpace {
    pub fn new(n_fock: usize, n_atoms: usize) -> Result<Self> {
        if n_fock < 1 {
            return Err(Error::InvalidSpace(format!("n_fock must be >= 1, got {n_fock}")));
        }
        if n_atoms == 0 || n_atoms > MAX_ATOMS {
            return Err(Error::InvalidSpace(format!(
                "n_atoms must be in 1..={MAX_ATOMS}, got {n_atoms}"
            )));
        }
        Ok(HilbertSpace { n_fock, n_atoms })
    }

    /// Highest photon number kept.
    pub fn n_fock(&self) -> usize {
        self.n_fock
    }

    pub fn n_levels(&self) -> usize {
        EMITTER_LEVELS
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn fock_dim(&self) -> usize {
        self.n_fock + 1
    }

    pub fn emitter_dim(&self) -> usize {
        EMITTER_LEVELS.pow(self.n_atoms as u32)
    }

    pub fn dim(&self) -> usize {
        self.fock_dim() * self.emitter_dim()
    }

    pub fn factor_dim(&self, factor: Factor) -> Result<usize> {
        match factor {
            Factor::Fock => Ok(self.fock_dim()),
            Factor::Atom(i) => {
                self.check_atom(i)?;
                Ok(EMITTER_LEVELS)
            }
        }
    }

    fn check_atom(&self, index: usize) -> Result<()> {
        if index >= self.n_atoms {
            return Err(Error::AtomIndex { index, n_atoms: self.n_atoms });
        }
        Ok(())
    }

    /// Stride of a factor in the composite index.
    fn stride(&self, factor: Factor) -> usize {
        match factor {
            Factor::Fock => self.emitter_dim(),
            Factor::Atom(i) => EMITTER_LEVELS.pow((self.n_atoms - 1 - i) as u32),
        }
    }

    /// Local index of `factor` inside composite index `i`.
    pub fn factor_index(&self, i: usize, factor: Factor) -> usize {
        let dim = match factor {
            Factor::Fock => self.fock_dim(),
            Factor::Atom(_) => EMITTER_LEVELS,
        };
        (i / self.stride(factor)) % dim
    }

    pub fn index_of(&self, state: &BareState) -> Result<usize> {
        if state.levels.len() != self.n_atoms {
            return Err(Error::DimensionMismatch { expected: self.n_atoms, got: state.levels.len() });
        }
        if state.photons > self.n_fock {
            return Err(Error::InvalidParameter(format!(
                "photon number {} above cutoff {}",
                state.photons, self.n_fock
            )));
        }
        let emitter = state.levels.iter().fold(0, |acc, l| acc * EMITTER_LEVELS + l.index());
        Ok(state.photons * self.emitter_dim() + emitter)
    }

    pub fn state_at(&self, i: usize) -> BareState {
        BareState {
            photons: self.factor_index(i, Factor::Fock),
            levels: (0..self.n_atoms)
                .map(|a| Level::from_index(self.factor_index(i, Factor::Atom(a))).unwrap())
                .collect(),
        }
    }
}

impl fmt::Display for HilbertSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "H(n_fock={}, n_atoms={}, dim={})", self.n_fock, self.n_atoms, self.dim())
    }
}

/// Dense operator on a [`HilbertSpace`], in the bare product basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: HilbertSpace,
    matrix: CMatrix,
}

impl Operator {
    pub fn new(space: HilbertSpace, matrix: CMatrix) -> Result<Self> {
        let d = space.dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Operator { space, matrix })
    }

    pub fn zeros(space: HilbertSpace) -> Self {
        let d = space.dim();
        Operator { space, matrix: CMatrix::zeros(d, d) }
    }

    pub fn identity(space: HilbertSpace) -> Self {
        let d = space.dim();
        Operator { space, matrix: CMatrix::identity(d, d) }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    fn same_space(&self, other: &Operator) -> Result<()> {
        if self.space != other.space {
            return Err(Error::SpaceMismatch(self.space.to_string(), other.space.to_string()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.same_space(other)?;
        Ok(Operator { space: self.space, matrix: &self.matrix + &other.matrix })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.same_space(other)?;
        Ok(Operator { space: self.space, matrix: &self.matrix - &other.matrix })
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.same_space(other)?;
        Ok(Operator { space: self.space, matrix: &self.matrix * &other.matrix })
    }

    pub fn scale(&self, factor: C64) -> Operator {
        Operator { space: self.space, matrix: &self.matrix * factor }
    }

    pub fn scale_real(&self, factor: f64) -> Operator {
        self.scale(C64::new(factor, 0.0))
    }

    pub fn adjoint(&self) -> Operator {
        Operator { space: self.space, matrix: self.matrix.adjoint() }
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        self.same_space(other)?;
        Ok(Operator {
            space: self.space,
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
        })
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Largest entry of `|A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    /// `⟨bra|A|ket⟩` for bare product states.
    pub fn element(&self, bra: &BareState, ket: &BareState) -> Result<C64> {
        Ok(self.matrix[(self.space.index_of(bra)?, self.space.index_of(ket)?)])
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `Tr[A B]` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let d = a.nrows();
    let (sa, sb) = (a.as_slice(), b.as_slice());
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            // A[i,j] B[j,i]
            acc += sa[j * d + i] * sb[i * d + j];
        }
    }
    acc
}

/// Embed a single-factor operator as `op ⊗ 1` in canonical factor order.
pub fn tensor_embed(op: &CMatrix, space: &HilbertSpace, factor: Factor) -> Result<Operator> {
    let fdim = space.factor_dim(factor)?;
    if op.nrows() != fdim || op.ncols() != fdim {
        return Err(Error::DimensionMismatch { expected: fdim, got: op.nrows().max(op.ncols()) });
    }
    let d = space.dim();
    let stride = space.stride(factor);
    let mut m = CMatrix::zeros(d, d);
    for col in 0..d {
        let fc = space.factor_index(col, factor);
        // rest of the index with this factor zeroed
        let base = col - fc * stride;
        for fr in 0..fdim {
            let v = op[(fr, fc)];
            if v != C64::new(0.0, 0.0) {
                m[(base + fr * stride, col)] = v;
            }
        }
    }
    Operator::new(*space, m)
}

/// Truncated annihilation operator on the Fock factor.
pub fn fock_destroy(n_fock: usize) -> CMatrix {
    let d = n_fock + 1;
    let mut a = CMatrix::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

pub fn make_destroy(space: &HilbertSpace) -> Operator {
    tensor_embed(&fock_destroy(space.n_fock()), space, Factor::Fock)
        .expect("Fock factor dimension is consistent by construction")
}

/// `a†a`, built with exact integer diagonal entries.
pub fn make_number(space: &HilbertSpace) -> Operator {
    let n = CMatrix::from_fn(space.fock_dim(), space.fock_dim(), |r, c| {
        if r == c { C64::new(r as f64, 0.0) } else { C64::new(0.0, 0.0) }
    });
    tensor_embed(&n, space, Factor::Fock).expect("Fock factor dimension is consistent by construction")
}

/// `|alpha⟩⟨beta|` on a single three-level emitter.
pub fn level_transition(alpha: Level, beta: Level) -> CMatrix {
    let mut m = CMatrix::zeros(EMITTER_LEVELS, EMITTER_LEVELS);
    m[(alpha.index(), beta.index())] = C64::new(1.0, 0.0);
    m
}

pub fn make_transition(space: &HilbertSpace, alpha: Level, beta: Level, atom: usize) -> Result<Operator> {
    tensor_embed(&level_transition(alpha, beta), space, Factor::Atom(atom))
}
