//! Dephasing coupling: a central system whose pointer states select
//! conditional environment Hamiltonians.
//!
//! The joint Hamiltonian is block diagonal over the central pointer basis,
//! H = Σ_j |j⟩⟨j| ⊗ (ε_j + H_env + V_j), so each coherence ϱ_jk(t) evolves
//! as a pure phase times the overlap ⟨χ_k(t)|χ_j(t)⟩ of two branch-evolved
//! environment states, which in turn is an environment Loschmidt-echo
//! amplitude under the perturbation V_j − V_k.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{overlap, CompositeSpace, HermitianOperator, Spectrum, StateVector};
use crate::C64;

/// Central-system pointer levels with per-level environment Hamiltonians.
#[derive(Debug, Clone)]
pub struct DephasingModel {
    eps: Vec<f64>,
    h_env: HermitianOperator,
    couplings: Vec<HermitianOperator>,
    factors: Option<Vec<f64>>,
    space: CompositeSpace,
    env_spectrum: Spectrum,
    branch_spectra: Vec<Spectrum>,
}

impl DephasingModel {
    /// General model: level energies ε_j and coupling operators V_j, one per
    /// pointer level, all acting on the same environment space.
    pub fn new(
        eps: Vec<f64>,
        h_env: HermitianOperator,
        couplings: Vec<HermitianOperator>,
    ) -> Result<Self> {
        Self::build(eps, h_env, couplings, None)
    }

    /// Rescaling model: V_j = f_j · H_env, so every branch Hamiltonian is
    /// (1 + f_j) H_env and echoes reduce to rescaled autocorrelations.
    pub fn proportional(
        eps: Vec<f64>,
        h_env: HermitianOperator,
        factors: Vec<f64>,
    ) -> Result<Self> {
        let couplings = factors.iter().map(|&f| h_env.scaled(f)).collect();
        Self::build(eps, h_env, couplings, Some(factors))
    }

    fn build(
        eps: Vec<f64>,
        h_env: HermitianOperator,
        couplings: Vec<HermitianOperator>,
        factors: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = eps.len();
        if n < 2 {
            return Err(Error::invalid("dephasing model needs at least two pointer levels"));
        }
        if couplings.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} levels but {} coupling operators",
                n,
                couplings.len()
            )));
        }
        for v in &couplings {
            if v.dim() != h_env.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "coupling dimension {} vs environment dimension {}",
                    v.dim(),
                    h_env.dim()
                )));
            }
        }
        let space = CompositeSpace::new(n, h_env.dim())?;
        let env_spectrum = h_env.spectrum()?;
        let branch_spectra = couplings
            .iter()
            .map(|v| h_env.add(v)?.spectrum())
            .collect::<Result<Vec<_>>>()?;
        Ok(DephasingModel { eps, h_env, couplings, factors, space, env_spectrum, branch_spectra })
    }

    pub fn n_levels(&self) -> usize {
        self.eps.len()
    }

    pub fn dim_env(&self) -> usize {
        self.h_env.dim()
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn h_env(&self) -> &HermitianOperator {
        &self.h_env
    }

    pub fn coupling(&self, j: usize) -> Result<&HermitianOperator> {
        self.couplings.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            dim: self.couplings.len(),
        })
    }

    /// H_env + V_j, assembled fresh.
    pub fn branch_hamiltonian(&self, j: usize) -> Result<HermitianOperator> {
        self.h_env.add(self.coupling(j)?)
    }

    /// Full joint Hamiltonian: block j is ε_j + H_env + V_j.
    pub fn build_joint(&self) -> Result<HermitianOperator> {
        let de = self.dim_env();
        let mut m = Array2::zeros((self.space.dim_joint(), self.space.dim_joint()));
        for j in 0..self.n_levels() {
            let block = self.branch_hamiltonian(j)?.shifted(self.eps[j]);
            for a in 0..de {
                for b in 0..de {
                    m[(j * de + a, j * de + b)] = block.entries()[(a, b)];
                }
            }
        }
        HermitianOperator::new(m)
    }

    /// χ_j(t) = e^{-i(H_env + V_j)t} χ0, from the cached branch spectrum.
    pub fn evolve_branch(&self, chi0: &StateVector, j: usize, t: f64) -> Result<StateVector> {
        let spec = self.branch_spectra.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            dim: self.branch_spectra.len(),
        })?;
        spec.evolve(chi0, t)
    }

    /// ⟨χ_k(t)|χ_j(t)⟩, both branches evolved forward from χ0.
    pub fn branch_overlap(&self, chi0: &StateVector, j: usize, k: usize, t: f64) -> Result<C64> {
        let chi_j = self.evolve_branch(chi0, j, t)?;
        let chi_k = self.evolve_branch(chi0, k, t)?;
        overlap(&chi_k, &chi_j)
    }

    /// ϱ_jk(t) = e^{-i(ε_j - ε_k)t} ⟨χ_k(t)|χ_j(t)⟩ ϱ_jk(0).
    pub fn coherence_factorized(
        &self,
        init: &InitialProduct,
        j: usize,
        k: usize,
        t: f64,
    ) -> Result<C64> {
        if init.chi0().dim() != self.dim_env() {
            return Err(Error::DimensionMismatch(format!(
                "initial environment dimension {} vs model dimension {}",
                init.chi0().dim(),
                self.dim_env()
            )));
        }
        if init.n_levels() != self.n_levels() {
            return Err(Error::DimensionMismatch(format!(
                "initial amplitudes for {} levels vs model {}",
                init.n_levels(),
                self.n_levels()
            )));
        }
        let phase = (-C64::i() * (self.eps_at(j)? - self.eps_at(k)?) * t).exp();
        Ok(phase * self.branch_overlap(init.chi0(), j, k, t)? * init.coherence(j, k)?)
    }

    fn eps_at(&self, j: usize) -> Result<f64> {
        self.eps
            .get(j)
            .copied()
            .ok_or(Error::IndexOutOfRange { index: j, dim: self.eps.len() })
    }

    /// Loschmidt-echo amplitude ⟨χ0| e^{+i(H_env+V_k)t} e^{-i(H_env+V_j)t} |χ0⟩:
    /// forward evolution under the branch-j Hamiltonian, then backward under
    /// branch k. Spectra are rebuilt here rather than taken from the cache, so
    /// the route stays structurally distinct from `branch_overlap`.
    pub fn echo_amplitude(&self, chi0: &StateVector, j: usize, k: usize, t: f64) -> Result<C64> {
        let unperturbed = self.h_env.add(self.coupling(k)?)?;
        let perturbation = self.coupling(j)?.add(&self.coupling(k)?.scaled(-1.0))?;
        let perturbed = unperturbed.add(&perturbation)?;
        let forward = perturbed.spectrum()?.evolve(chi0, t)?;
        let echoed = unperturbed.spectrum()?.evolve(&forward, -t)?;
        overlap(chi0, &echoed)
    }

    /// For the proportional model, the echo amplitude collapses to a rescaled
    /// autocorrelation ⟨χ0| e^{+i t (f_k - f_j) H_env} |χ0⟩.
    pub fn rescaled_autocorrelation(
        &self,
        chi0: &StateVector,
        j: usize,
        k: usize,
        t: f64,
    ) -> Result<C64> {
        let factors = self.factors.as_ref().ok_or_else(|| {
            Error::invalid("rescaled autocorrelation requires the proportional model")
        })?;
        let (fj, fk) = match (factors.get(j), factors.get(k)) {
            (Some(&fj), Some(&fk)) => (fj, fk),
            _ => {
                return Err(Error::IndexOutOfRange {
                    index: j.max(k),
                    dim: factors.len(),
                })
            }
        };
        // e^{+it(f_k - f_j)H} = e^{-iH·(f_j - f_k)t}, reusing the bare
        // environment spectrum.
        let shifted = self.env_spectrum.evolve(chi0, (fj - fk) * t)?;
        overlap(chi0, &shifted)
    }

    /// Coherence ϱ_01(t) of the two-level echo protocol: evolve for t/2,
    /// swap the pointer levels, evolve for another t/2. The uniform initial
    /// superposition (ϱ_01(0) = 1/2) is assumed. Level energies cancel.
    pub fn pi_pulse_coherence(&self, chi0: &StateVector, t: f64) -> Result<C64> {
        if self.n_levels() != 2 {
            return Err(Error::invalid(format!(
                "pi-pulse protocol is defined for 2 levels, model has {}",
                self.n_levels()
            )));
        }
        let half = 0.5 * t;
        // Component starting at level 0 ends at level 1 carrying U_1 U_0 χ0;
        // the component starting at level 1 ends at level 0 with U_0 U_1 χ0.
        let w0 = self.evolve_branch(&self.evolve_branch(chi0, 0, half)?, 1, half)?;
        let w1 = self.evolve_branch(&self.evolve_branch(chi0, 1, half)?, 0, half)?;
        // ϱ_01(t) = ⟨final level-1 env | final level-0 env⟩ ϱ_10(0).
        Ok(overlap(&w0, &w1)? * 0.5)
    }
}

/// Product initial condition Σ_j a_j |j⟩ ⊗ |χ0⟩.
#[derive(Debug, Clone)]
pub struct InitialProduct {
    amplitudes: Vec<C64>,
    chi0: StateVector,
}

impl InitialProduct {
    pub fn new(amplitudes: Vec<C64>, chi0: StateVector) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::invalid("no central amplitudes"));
        }
        let norm_sq: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > crate::tol::CONSTRUCTION {
            return Err(Error::invariant(format!(
                "central amplitude norm² = {norm_sq:.16} deviates from 1"
            )));
        }
        Ok(InitialProduct { amplitudes, chi0 })
    }

    /// Equal-weight superposition over all levels.
    pub fn uniform(n_levels: usize, chi0: StateVector) -> Result<Self> {
        if n_levels == 0 {
            return Err(Error::invalid("no central levels"));
        }
        let a = C64::new(1.0 / (n_levels as f64).sqrt(), 0.0);
        InitialProduct::new(vec![a; n_levels], chi0)
    }

    pub fn n_levels(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn chi0(&self) -> &StateVector {
        &self.chi0
    }

    /// ϱ_jk(0) = a_j a_k*.
    pub fn coherence(&self, j: usize, k: usize) -> Result<C64> {
        match (self.amplitudes.get(j), self.amplitudes.get(k)) {
            (Some(&aj), Some(&ak)) => Ok(aj * ak.conj()),
            _ => Err(Error::IndexOutOfRange {
                index: j.max(k),
                dim: self.amplitudes.len(),
            }),
        }
    }

    /// The joint state Σ_j a_j |j⟩ ⊗ |χ0⟩.
    pub fn joint_state(&self, space: CompositeSpace) -> Result<StateVector> {
        if space.dim_central() != self.n_levels() || space.dim_env() != self.chi0.dim() {
            return Err(Error::DimensionMismatch(format!(
                "initial product ({} levels, env {}) vs space ({}, {})",
                self.n_levels(),
                self.chi0.dim(),
                space.dim_central(),
                space.dim_env()
            )));
        }
        let mut amp = ndarray::Array1::zeros(space.dim_joint());
        for (j, &a) in self.amplitudes.iter().enumerate() {
            for (m, &x) in self.chi0.amplitudes().iter().enumerate() {
                amp[space.joint_index(j, m)] = a * x;
            }
        }
        StateVector::new(amp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{gue, random_amplitudes, random_state, rng_from_seed};
    use crate::linalg::partial_trace_env;

    fn random_model(seed: u64, n: usize, de: usize) -> (DephasingModel, StateVector) {
        let mut rng = rng_from_seed(seed);
        let h_env = gue(de, 1.0 / de as f64, &mut rng).unwrap();
        let couplings: Vec<_> =
            (0..n).map(|_| gue(de, 0.25 / de as f64, &mut rng).unwrap()).collect();
        let eps: Vec<f64> = (0..n).map(|j| 0.3 * j as f64 - 0.2).collect();
        let chi0 = random_state(de, &mut rng).unwrap();
        (DephasingModel::new(eps, h_env, couplings).unwrap(), chi0)
    }

    #[test]
    fn joint_hamiltonian_commutes_with_central_projector() {
        let (model, _) = random_model(5, 3, 6);
        let h = model.build_joint().unwrap();
        // Central observable diag(ε_j) ⊗ 1; block-diagonal H must commute.
        let de = model.dim_env();
        let dim = model.space().dim_joint();
        let mut hc = Array2::<C64>::zeros((dim, dim));
        for j in 0..3 {
            for m in 0..de {
                hc[(j * de + m, j * de + m)] = C64::new(model.eps()[j], 0.0);
            }
        }
        let comm = h.entries().dot(&hc) - hc.dot(h.entries());
        let dev = comm.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        assert!(dev <= 1e-10, "commutator deviation {dev:.3e}");
    }

    #[test]
    fn factorized_coherence_matches_joint_evolution() {
        let (model, chi0) = random_model(11, 3, 8);
        let mut rng = rng_from_seed(99);
        let init = InitialProduct::new(random_amplitudes(3, &mut rng), chi0).unwrap();
        let joint = model.build_joint().unwrap().spectrum().unwrap();
        let psi0 = init.joint_state(model.space()).unwrap();
        for &t in &[0.0, 0.37, 1.9, 6.4] {
            let psi_t = joint.evolve(&psi0, t).unwrap();
            let rho = partial_trace_env(&psi_t, model.space()).unwrap();
            for j in 0..3 {
                for k in 0..3 {
                    if j == k {
                        continue;
                    }
                    let fact = model.coherence_factorized(&init, j, k, t).unwrap();
                    let dev = (rho.entry(j, k) - fact).norm();
                    assert!(dev <= 1e-12, "t={t} ({j},{k}) deviation {dev:.3e}");
                }
            }
        }
    }

    #[test]
    fn branch_overlap_equals_echo_amplitude() {
        let (model, chi0) = random_model(23, 2, 10);
        for &t in &[0.15, 1.0, 4.2] {
            let direct = model.branch_overlap(&chi0, 0, 1, t).unwrap();
            let echo = model.echo_amplitude(&chi0, 0, 1, t).unwrap();
            assert!(
                (direct - echo).norm() <= 1e-12,
                "t={t} deviation {:.3e}",
                (direct - echo).norm()
            );
        }
    }

    #[test]
    fn commuting_diagonal_case_is_analytic() {
        let h_env = HermitianOperator::from_diagonal(&[0.1, -0.4, 0.9]).unwrap();
        let v0 = HermitianOperator::from_diagonal(&[0.5, 0.2, -0.3]).unwrap();
        let v1 = HermitianOperator::from_diagonal(&[-0.1, 0.6, 0.2]).unwrap();
        let model = DephasingModel::new(vec![0.0, 0.0], h_env, vec![v0, v1]).unwrap();
        let chi0 = StateVector::normalized(ndarray::array![
            C64::new(0.5, 0.1),
            C64::new(-0.3, 0.8),
            C64::new(0.2, -0.4)
        ])
        .unwrap();
        let t = 2.7;
        // Diagonal branches: ⟨χ_k|χ_j⟩ = Σ_m |χ0_m|² e^{-i(v_j - v_k)_m t}.
        let dv = [0.5 - (-0.1), 0.2 - 0.6, -0.3 - 0.2];
        let expect: C64 = chi0
            .amplitudes()
            .iter()
            .zip(dv.iter())
            .map(|(a, &d)| a.norm_sqr() * (-C64::i() * d * t).exp())
            .sum();
        let got = model.branch_overlap(&chi0, 0, 1, t).unwrap();
        assert!((got - expect).norm() < 1e-13);
    }

    #[test]
    fn zero_coupling_keeps_coherence_modulus() {
        let mut rng = rng_from_seed(3);
        let h_env = gue(6, 1.0 / 6.0, &mut rng).unwrap();
        let zeros = vec![HermitianOperator::zeros(6), HermitianOperator::zeros(6)];
        let model = DephasingModel::new(vec![0.7, -0.2], h_env, zeros).unwrap();
        let chi0 = random_state(6, &mut rng).unwrap();
        let init = InitialProduct::uniform(2, chi0).unwrap();
        for &t in &[0.5, 2.0, 8.0] {
            let c = model.coherence_factorized(&init, 0, 1, t).unwrap();
            assert!((c.norm() - 0.5).abs() < 1e-12);
            let expect_phase = (-C64::i() * (0.7 - (-0.2)) * t).exp() * 0.5;
            assert!((c - expect_phase).norm() < 1e-12);
        }
    }

    #[test]
    fn rescaled_autocorrelation_matches_echo() {
        let mut rng = rng_from_seed(41);
        let h_env = gue(12, 1.0 / 12.0, &mut rng).unwrap();
        let model =
            DephasingModel::proportional(vec![0.0, 0.0], h_env, vec![0.08, -0.05]).unwrap();
        let chi0 = random_state(12, &mut rng).unwrap();
        for &t in &[0.4, 3.3, 11.0] {
            let resc = model.rescaled_autocorrelation(&chi0, 0, 1, t).unwrap();
            let echo = model.echo_amplitude(&chi0, 0, 1, t).unwrap();
            assert!(
                (resc - echo).norm() <= 1e-10,
                "t={t} deviation {:.3e}",
                (resc - echo).norm()
            );
        }
    }

    #[test]
    fn rescaled_requires_proportional_model() {
        let (model, chi0) = random_model(8, 2, 5);
        assert!(model.rescaled_autocorrelation(&chi0, 0, 1, 1.0).is_err());
    }

    #[test]
    fn pi_pulse_matches_joint_pulsed_run() {
        let (model, chi0) = random_model(17, 2, 9);
        let init = InitialProduct::uniform(2, chi0.clone()).unwrap();
        let space = model.space();
        let joint = model.build_joint().unwrap().spectrum().unwrap();
        // Pulse: swap the two central levels, X ⊗ 1.
        let de = model.dim_env();
        let mut pulse = Array2::<C64>::zeros((space.dim_joint(), space.dim_joint()));
        for m in 0..de {
            pulse[(space.joint_index(0, m), space.joint_index(1, m))] = C64::new(1.0, 0.0);
            pulse[(space.joint_index(1, m), space.joint_index(0, m))] = C64::new(1.0, 0.0);
        }
        for &t in &[0.6, 2.2, 7.5] {
            let psi0 = init.joint_state(space).unwrap();
            let half_evolved = joint.evolve(&psi0, 0.5 * t).unwrap();
            let pulsed = StateVector::new(pulse.dot(half_evolved.amplitudes())).unwrap();
            let final_state = joint.evolve(&pulsed, 0.5 * t).unwrap();
            let rho = partial_trace_env(&final_state, space).unwrap();
            let from_protocol = model.pi_pulse_coherence(&chi0, t).unwrap();
            let dev = (rho.entry(0, 1) - from_protocol).norm();
            assert!(dev <= 1e-12, "t={t} deviation {dev:.3e}");
        }
    }

    #[test]
    fn pi_pulse_commuting_couplings_refocus() {
        // Diagonal V_0, V_1 commute, so the echo is perfect: |ϱ_01(t)| = 1/2.
        let h_env = HermitianOperator::from_diagonal(&[0.3, -0.7, 1.1, 0.2]).unwrap();
        let v0 = HermitianOperator::from_diagonal(&[0.9, 0.1, -0.5, 0.4]).unwrap();
        let v1 = HermitianOperator::from_diagonal(&[-0.2, 0.8, 0.3, -0.6]).unwrap();
        let model = DephasingModel::new(vec![1.0, -1.0], h_env, vec![v0, v1]).unwrap();
        let mut rng = rng_from_seed(77);
        let chi0 = random_state(4, &mut rng).unwrap();
        for &t in &[0.9, 3.4, 12.0] {
            let c = model.pi_pulse_coherence(&chi0, t).unwrap();
            assert!(
                (c.norm() - 0.5).abs() < 1e-12,
                "t={t} echo modulus {:.16} != 1/2",
                c.norm()
            );
        }
    }

    #[test]
    fn pi_pulse_requires_two_levels() {
        let (model, chi0) = random_model(31, 3, 4);
        assert!(model.pi_pulse_coherence(&chi0, 1.0).is_err());
    }

    #[test]
    fn initial_product_validates_norm() {
        let chi0 = StateVector::basis_state(3, 0).unwrap();
        assert!(InitialProduct::new(vec![C64::new(1.0, 0.0); 2], chi0.clone()).is_err());
        let ok = InitialProduct::uniform(4, chi0).unwrap();
        assert!((ok.coherence(0, 3).unwrap() - C64::new(0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn model_rejects_mismatched_dimensions() {
        let mut rng = rng_from_seed(1);
        let h_env = gue(4, 0.25, &mut rng).unwrap();
        let bad = vec![gue(4, 0.25, &mut rng).unwrap(), gue(5, 0.2, &mut rng).unwrap()];
        assert!(DephasingModel::new(vec![0.0, 1.0], h_env, bad).is_err());
    }
}
