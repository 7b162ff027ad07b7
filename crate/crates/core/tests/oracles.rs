//! Cross-checks against test-side reimplementations that share no code with
//! the library: a real symmetric Rabi-type Hamiltonian in emitter-major
//! ordering, its eigenbasis, and a classical rate equation for the dressed
//! populations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use usc_sce::dissipation::{build_dissipators, LossRates, MasterEquation};
use usc_sce::dressed::{diagonalize, ground_expansion};
use usc_sce::dynamics::{evolve, initial_state, EvolveOptions, InitialState};
use usc_sce::hilbert::HilbertSpace;
use usc_sce::model::{build_hamiltonian, ModelParams};
use usc_sce::observables::{ObservableSet, Statistics};

const S: usize = 0;
const G: usize = 1;
const E: usize = 2;

/// Single emitter, index `level · (n_max + 1) + n`.
struct Oracle {
    n_max: usize,
    energies: Vec<f64>,
    vectors: DMatrix<f64>,
    x: DMatrix<f64>,
    p_gs: DMatrix<f64>,
    p_eg: DMatrix<f64>,
}

impl Oracle {
    fn new(omega_r: f64, n_max: usize) -> Self {
        let nf = n_max + 1;
        let d = 3 * nf;
        let idx = |level: usize, n: usize| level * nf + n;
        let level_energy = [0.0, 3.5, 4.5];
        let mut h = DMatrix::<f64>::zeros(d, d);
        let mut x = DMatrix::<f64>::zeros(d, d);
        let mut p_gs = DMatrix::<f64>::zeros(d, d);
        let mut p_eg = DMatrix::<f64>::zeros(d, d);
        for level in [S, G, E] {
            for n in 0..nf {
                h[(idx(level, n), idx(level, n))] = n as f64 + level_energy[level];
                if n + 1 < nf {
                    let amp = ((n + 1) as f64).sqrt();
                    x[(idx(level, n), idx(level, n + 1))] = amp;
                    x[(idx(level, n + 1), idx(level, n))] = amp;
                }
            }
        }
        for n in 0..nf {
            p_gs[(idx(G, n), idx(S, n))] = 1.0;
            p_gs[(idx(S, n), idx(G, n))] = 1.0;
            p_eg[(idx(E, n), idx(G, n))] = 1.0;
            p_eg[(idx(G, n), idx(E, n))] = 1.0;
            for m in 0..nf {
                // Ω (a + a†)(σ_eg + σ_ge)
                let c = omega_r * x[(idx(G, n), idx(G, m))];
                h[(idx(E, n), idx(G, m))] += c;
                h[(idx(G, m), idx(E, n))] += c;
            }
        }
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let energies = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
        let to_dressed = |m: &DMatrix<f64>| vectors.transpose() * m * &vectors;
        Oracle { n_max, x: to_dressed(&x), p_gs: to_dressed(&p_gs), p_eg: to_dressed(&p_eg), energies, vectors }
    }

    fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Lowest eigenstate with no weight on the `s` level.
    fn ground(&self) -> usize {
        let nf = self.n_max + 1;
        (0..self.dim())
            .find(|&j| (0..nf).map(|n| self.vectors[(n, j)].powi(2)).sum::<f64>() < 1e-12)
            .unwrap()
    }

    fn positive(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |j, k| if self.energies[k] - self.energies[j] > 1e-9 { m[(j, k)] } else { 0.0 })
    }

    /// Pauli rate matrix `W` with `ṗ = W p`.
    fn rates(&self, gamma0: f64, gamma_eg: f64, gamma_gs: f64) -> DMatrix<f64> {
        let d = self.dim();
        let mut w = DMatrix::zeros(d, d);
        for k in 0..d {
            for j in 0..d {
                if self.energies[k] - self.energies[j] > 1e-9 {
                    let r = gamma0 * self.x[(j, k)].powi(2)
                        + gamma_eg * self.p_eg[(j, k)].powi(2)
                        + gamma_gs * self.p_gs[(j, k)].powi(2);
                    w[(j, k)] += r;
                    w[(k, k)] -= r;
                }
            }
        }
        w
    }

    /// `(⟨X⁻X⁺⟩, g2, g3)` for diagonal populations `p`.
    fn statistics(&self, p: &DVector<f64>) -> (f64, f64, f64) {
        let xp = self.positive(&self.x);
        let sp = self.positive(&self.p_gs);
        let xx = &xp * &xp;
        let xxs = &xx * &sp;
        let expect = |m: &DMatrix<f64>| (0..self.dim()).map(|j| p[j] * (m.transpose() * m)[(j, j)]).sum::<f64>();
        let (n1, n2, n3, ns) = (expect(&xp), expect(&xx), expect(&xxs), expect(&sp));
        (n1, n2 / (n1 * n1), n3 / (ns * n1 * n1))
    }
}

fn relative(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn dressed_ground_energy_and_expansion() {
    // n = 40 photons: truncation error far below the tolerance
    let oracle = Oracle::new(0.6, 40);
    let j0 = oracle.ground();
    let e0 = oracle.energies[j0];
    let nf = 41;
    let c_g0 = oracle.vectors[(nf, j0)].powi(2);
    let c_g2 = oracle.vectors[(nf + 2, j0)].powi(2);
    // frozen from this oracle
    assert!((e0 - 3.302_384_709_34).abs() < 1e-9, "{e0}");
    assert!((c_g0 - 0.883_8).abs() < 1e-4, "{c_g0}");
    assert!((c_g2 - 0.018_8).abs() < 1e-4, "{c_g2}");

    let space = HilbertSpace::new(16, 1).unwrap();
    let basis = diagonalize(&build_hamiltonian(&ModelParams::zero_detuning(0.6), &space).unwrap()).unwrap();
    let lib = ground_expansion(&basis).unwrap();
    assert!((lib.energy - e0).abs() < 1e-9);
    assert!((lib.weight_g(0) - c_g0).abs() < 1e-9);
    assert!((lib.weight_g(1) - c_g2).abs() < 1e-9);
}

#[test]
fn statistics_match_rate_equation() {
    let rates = (0.02, 0.02, 0.02);
    let oracle = Oracle::new(0.6, 6);
    let w = oracle.rates(rates.0, rates.1, rates.2);
    let mut p0 = DVector::zeros(oracle.dim());
    p0[oracle.ground()] = 1.0;

    let space = HilbertSpace::new(6, 1).unwrap();
    let basis = diagonalize(&build_hamiltonian(&ModelParams::zero_detuning(0.6), &space).unwrap()).unwrap();
    let me = MasterEquation::new(&basis, build_dissipators(&basis, &LossRates::uniform(0.02)).unwrap()).unwrap();
    let obs = ObservableSet::new(&basis, 0.02).unwrap();
    let rho0 = initial_state(&InitialState::DressedGround, &basis).unwrap();
    let opts = EvolveOptions::new(2e-3, 120.0).with_probes(obs.probes(&basis).unwrap());
    let stats = Statistics::from_trajectory(&evolve(&rho0, &me, &opts).unwrap()).unwrap();

    // frozen (⟨X⁻X⁺⟩, g2, g3) from the rate equation at t = 20, 60, 120
    let frozen = [
        (20.0, (1.028823561290e-2, 8.021468917297e1, 3.938519065952e2)),
        (60.0, (1.442666329968e-2, 4.082720006800e1, 2.003009288580e2)),
        (120.0, (9.229179707332e-3, 4.282230123215e1, 4.894277055778e2)),
    ];
    for (t, (n_f, g2_f, g3_f)) in frozen {
        let p = (&w * t).exp() * &p0;
        let (n, g2, g3) = oracle.statistics(&p);
        assert!(relative(n, n_f) < 1e-10 && relative(g2, g2_f) < 1e-10 && relative(g3, g3_f) < 1e-10);

        let i = (t / 2e-3).round() as usize;
        assert!(relative(stats.photons[i], n) < 1e-7, "n at {t}: {} vs {n}", stats.photons[i]);
        assert!(relative(stats.g2[i], g2) < 1e-7, "g2 at {t}: {} vs {g2}", stats.g2[i]);
        assert!(relative(stats.g3[i], g3) < 1e-7, "g3 at {t}: {} vs {g3}", stats.g3[i]);
    }
}
