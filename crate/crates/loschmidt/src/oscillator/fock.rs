//! Brute-force Fock-basis oracle for the oscillator-bath model.
//!
//! The bilinear Hamiltonian conserves total excitation number, so the
//! truncated joint space splits into sectors of fixed total occupation. The
//! cat initial state only populates sectors 0..=cutoff, each of which is
//! diagonalized once; the coherence coefficient is then extracted from the
//! exactly evolved reduced state with no reference to the classical flow.

use std::collections::HashMap;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::HermitianOperator;
use crate::C64;

use super::{coherent_amplitudes, CatStateSpec, OscillatorBathModel};

const MAX_BATH_MODES: usize = 3;
const TRUNCATION_DEFICIT: f64 = 1e-8;
const GRAM_DET_FLOOR: f64 = 1e-10;

struct Sector {
    /// Eigenvalues and eigenvectors of the sector Hamiltonian.
    values: Array1<f64>,
    vectors: Array2<C64>,
    /// Initial amplitudes expressed in the sector eigenbasis.
    coeffs: Array1<C64>,
    /// Central occupation and bath-tuple registry index per basis state.
    central: Vec<usize>,
    bath_key: Vec<usize>,
}

/// Exact evolver for the truncated cat state, reusable across a time grid.
pub struct FockOracle {
    cutoff: usize,
    spec: CatStateSpec,
    cat_norm_sq: f64,
    deficit: f64,
    total_states: usize,
    bath_tuples: usize,
    sectors: Vec<Sector>,
    label_values: Array1<f64>,
    label_vectors: Array2<C64>,
}

impl FockOracle {
    /// Diagonalizes every populated excitation sector. Fails when the model
    /// has more than three bath modes, the truncated state count exceeds
    /// `state_cap`, or the cat labels leak more than 1e-8 probability past
    /// the cutoff.
    pub fn new(
        model: &OscillatorBathModel,
        spec: &CatStateSpec,
        state_cap: usize,
    ) -> Result<Self> {
        let l = model.bath_size();
        if l > MAX_BATH_MODES {
            return Err(Error::invalid(format!(
                "fock oracle supports at most {MAX_BATH_MODES} bath modes, got {l}"
            )));
        }
        let cutoff = model.fock_cutoff();
        let total_states: usize = (0..=cutoff).map(|n| compositions_count(n, l + 1)).sum();
        if total_states > state_cap {
            return Err(Error::DimensionCap { dim: total_states, cap: state_cap });
        }

        let cat_norm_sq = spec.exact_norm_sq();
        let c1 = coherent_amplitudes(spec.z1, cutoff + 1);
        let c2 = coherent_amplitudes(spec.z2, cutoff + 1);
        let scale = cat_norm_sq.sqrt();
        let central_init: Vec<C64> =
            c1.iter().zip(c2.iter()).map(|(a, b)| (a + b) / scale).collect();
        let deficit = 1.0 - central_init.iter().map(|c| c.norm_sqr()).sum::<f64>();
        if deficit > TRUNCATION_DEFICIT {
            return Err(Error::invalid(format!(
                "fock_cutoff {cutoff} keeps only 1 - {deficit:.3e} of the cat \
                 state; raise the cutoff or shrink the labels"
            )));
        }

        let mut bath_registry: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut sectors = Vec::with_capacity(cutoff + 1);
        for n in 0..=cutoff {
            sectors.push(build_sector(
                model,
                n,
                central_init[n],
                &mut bath_registry,
            )?);
        }

        let label_spectrum = model.one_excitation_generator()?.spectrum()?;
        Ok(FockOracle {
            cutoff,
            spec: *spec,
            cat_norm_sq,
            deficit,
            total_states,
            bath_tuples: bath_registry.len(),
            sectors,
            label_values: label_spectrum.values().to_owned(),
            label_vectors: label_spectrum.vectors().to_owned(),
        })
    }

    pub fn total_states(&self) -> usize {
        self.total_states
    }

    /// Probability mass lost to the central truncation at t = 0.
    pub fn truncation_deficit(&self) -> f64 {
        self.deficit
    }

    /// Exact coherent labels z₁(t), z₂(t) from the one-excitation
    /// propagator, independent of the RK4 flow.
    pub fn labels(&self, t: f64) -> (C64, C64) {
        let t00: C64 = self
            .label_values
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let v = self.label_vectors[(0, k)];
                v * (-C64::i() * e * t).exp() * v.conj()
            })
            .sum();
        (self.spec.z1 * t00, self.spec.z2 * t00)
    }

    /// Total excitation expectation of the evolved state; conserved by the
    /// sector evolution.
    pub fn mean_excitation(&self, t: f64) -> f64 {
        self.sectors
            .iter()
            .enumerate()
            .map(|(n, s)| n as f64 * evolve_sector(s, t).iter().map(|a| a.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Squared norm of the truncated state (1 minus the deficit, constant).
    pub fn norm_sq(&self, t: f64) -> f64 {
        self.sectors
            .iter()
            .map(|s| evolve_sector(s, t).iter().map(|a| a.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Reduced central-mode density matrix in the Fock basis.
    pub fn reduced_central(&self, t: f64) -> Array2<C64> {
        let dim = self.cutoff + 1;
        let mut grouped = Array2::<C64>::zeros((self.bath_tuples, dim));
        for sector in &self.sectors {
            let amps = evolve_sector(sector, t);
            for (i, amp) in amps.iter().enumerate() {
                grouped[(sector.bath_key[i], sector.central[i])] += amp;
            }
        }
        let mut rho = Array2::<C64>::zeros((dim, dim));
        for row in grouped.rows() {
            for p in 0..dim {
                if row[p] == C64::new(0.0, 0.0) {
                    continue;
                }
                for q in 0..dim {
                    rho[(p, q)] += row[p] * row[q].conj();
                }
            }
        }
        rho
    }

    /// Coefficient of |z₁(t)⟩⟨z₂(t)| in the reduced state, rescaled to the
    /// 1/√2 cat normalization so it matches `cat_coherence`. Extracted by a
    /// Gram-matrix projection onto the two evolved coherent branches.
    pub fn coherence(&self, t: f64) -> Result<C64> {
        let dim = self.cutoff + 1;
        let rho = self.reduced_central(t);
        let (z1t, z2t) = self.labels(t);
        let zeta1 = coherent_amplitudes(z1t, dim);
        let zeta2 = coherent_amplitudes(z2t, dim);
        let dot = |a: &Array1<C64>, b: &Array1<C64>| -> C64 {
            a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
        };
        let g = [
            [dot(&zeta1, &zeta1), dot(&zeta1, &zeta2)],
            [dot(&zeta2, &zeta1), dot(&zeta2, &zeta2)],
        ];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        if det.norm() < GRAM_DET_FLOOR {
            return Err(Error::invariant(format!(
                "evolved labels nearly coincide at t = {t} (Gram determinant \
                 {:.3e}); the dyad extraction is ill-conditioned there",
                det.norm()
            )));
        }
        let rho_z1 = rho.dot(&zeta1);
        let rho_z2 = rho.dot(&zeta2);
        let m = [
            [dot(&zeta1, &rho_z1), dot(&zeta1, &rho_z2)],
            [dot(&zeta2, &rho_z1), dot(&zeta2, &rho_z2)],
        ];
        // C = G⁻¹ M G⁻¹ solves ρ ≈ Σ_ab C_ab |ζ_a⟩⟨ζ_b| in the branch span.
        let inv = [
            [g[1][1] / det, -g[0][1] / det],
            [-g[1][0] / det, g[0][0] / det],
        ];
        let mut c01 = C64::new(0.0, 0.0);
        for a in 0..2 {
            for b in 0..2 {
                c01 += inv[0][a] * m[a][b] * inv[b][1];
            }
        }
        Ok(c01 * self.cat_norm_sq / 2.0)
    }
}

fn evolve_sector(sector: &Sector, t: f64) -> Array1<C64> {
    let phased: Array1<C64> = sector
        .coeffs
        .iter()
        .zip(sector.values.iter())
        .map(|(c, &e)| c * (-C64::i() * e * t).exp())
        .collect();
    sector.vectors.dot(&phased)
}

fn build_sector(
    model: &OscillatorBathModel,
    n: usize,
    init_amplitude: C64,
    bath_registry: &mut HashMap<Vec<u8>, usize>,
) -> Result<Sector> {
    let l = model.bath_size();
    let states = compositions(n, l + 1);
    let dim = states.len();
    let mut index = HashMap::with_capacity(dim);
    for (i, s) in states.iter().enumerate() {
        index.insert(s.clone(), i);
    }

    let mut h = Array2::<C64>::zeros((dim, dim));
    for (i, s) in states.iter().enumerate() {
        let mut diag = model.omega_c() * s[0] as f64;
        for lam in 0..l {
            diag += model.bath_omega()[lam] * s[1 + lam] as f64;
        }
        h[(i, i)] = C64::new(diag, 0.0);
        if s[0] > 0 {
            for lam in 0..l {
                let mut target = s.clone();
                target[0] -= 1;
                target[1 + lam] += 1;
                let j = index[&target];
                let amp = model.bath_g()[lam]
                    * ((s[0] as f64) * (s[1 + lam] as f64 + 1.0)).sqrt();
                h[(j, i)] += C64::new(amp, 0.0);
                h[(i, j)] += C64::new(amp, 0.0);
            }
        }
    }
    let spectrum = HermitianOperator::new(h)?.spectrum()?;

    // The initial cat populates only the bath-vacuum tuple of each sector.
    let mut init = Array1::<C64>::zeros(dim);
    let mut vacuum = vec![0u8; l + 1];
    vacuum[0] = n as u8;
    init[index[&vacuum]] = init_amplitude;
    let coeffs = crate::linalg::dagger(&spectrum.vectors().view()).dot(&init);

    let mut central = Vec::with_capacity(dim);
    let mut bath_key = Vec::with_capacity(dim);
    for s in &states {
        central.push(s[0] as usize);
        let tuple = s[1..].to_vec();
        let next = bath_registry.len();
        bath_key.push(*bath_registry.entry(tuple).or_insert(next));
    }

    Ok(Sector {
        values: spectrum.values().to_owned(),
        vectors: spectrum.vectors().to_owned(),
        coeffs,
        central,
        bath_key,
    })
}

/// All occupation tuples of `parts` modes summing to `total`, first mode
/// descending.
fn compositions(total: usize, parts: usize) -> Vec<Vec<u8>> {
    if parts == 1 {
        return vec![vec![total as u8]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            let mut tuple = Vec::with_capacity(parts);
            tuple.push(first as u8);
            tuple.append(&mut rest);
            out.push(tuple);
        }
    }
    out
}

fn compositions_count(total: usize, parts: usize) -> usize {
    // C(total + parts - 1, parts - 1) evaluated without overflow for the
    // small arguments used here.
    let mut count = 1usize;
    for k in 1..parts {
        count = count * (total + k) / k;
    }
    count
}
