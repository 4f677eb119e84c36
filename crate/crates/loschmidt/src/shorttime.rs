//! Short-time coupling-dominated regime: H ≈ S⊗V + H^e.
//!
//! When the coupling dwarfs the central Hamiltonian, each eigenvalue s of
//! the central coupling operator S drives its own environment branch
//! H^e_s = H^e + sV, and coherences between S eigenstates decay as echo
//! matrix elements. The neglected H^c supplies the validity scale: the
//! approximation holds while t·‖H^c‖ stays small, which
//! [`ShortTimeModel::shorttime_error`] quantifies against full dynamics.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::{
    kron, overlap, CompositeSpace, HermitianOperator, Spectrum, StateVector,
};
use crate::tol;
use crate::C64;

const EIGENVALUE_MATCH: f64 = 1e-10;

/// Central Hamiltonian, central coupling operator S (diagonalized on
/// construction), and environment pieces of H = H^c⊗1 + S⊗V + 1⊗H^e.
#[derive(Debug, Clone)]
pub struct ShortTimeModel {
    h_c: HermitianOperator,
    s_op: HermitianOperator,
    h_env: HermitianOperator,
    v_env: HermitianOperator,
    space: CompositeSpace,
    s_spectrum: Spectrum,
}

impl ShortTimeModel {
    pub fn new(
        h_c: HermitianOperator,
        s_op: HermitianOperator,
        h_env: HermitianOperator,
        v_env: HermitianOperator,
    ) -> Result<Self> {
        if h_c.dim() != s_op.dim() {
            return Err(Error::DimensionMismatch(format!(
                "central Hamiltonian dimension {} vs S dimension {}",
                h_c.dim(),
                s_op.dim()
            )));
        }
        if h_env.dim() != v_env.dim() {
            return Err(Error::DimensionMismatch(format!(
                "environment Hamiltonian dimension {} vs V dimension {}",
                h_env.dim(),
                v_env.dim()
            )));
        }
        let space = CompositeSpace::new(h_c.dim(), h_env.dim())?;
        let s_spectrum = s_op.spectrum()?;
        Ok(ShortTimeModel { h_c, s_op, h_env, v_env, space, s_spectrum })
    }

    pub fn space(&self) -> CompositeSpace {
        self.space
    }

    /// Eigenvalues of S, ascending; the branch labels.
    pub fn s_values(&self) -> &ndarray::Array1<f64> {
        self.s_spectrum.values()
    }

    /// Index of the S eigenvalue matching `s` within 1e-10.
    pub fn find_branch(&self, s: f64) -> Result<usize> {
        self.s_spectrum
            .values()
            .iter()
            .position(|&v| (v - s).abs() <= EIGENVALUE_MATCH)
            .ok_or_else(|| {
                Error::invalid(format!("{s} is not an eigenvalue of S (within 1e-10)"))
            })
    }

    /// H^e_s = H^e + s·V for an eigenvalue s of S.
    pub fn branch_hamiltonian(&self, s: f64) -> Result<HermitianOperator> {
        self.find_branch(s)?;
        self.h_env.add(&self.v_env.scaled(s))
    }

    /// Coherence between |s⟩ and |s'⟩ for the initial state
    /// (|s⟩+|s'⟩)/√2 ⊗ B0 under the short-time approximation:
    /// ⟨B_{s'}(t)|B_s(t)⟩·½. Both forms of the identity are evaluated, the
    /// branch overlap and the echo element ⟨B0|Ũ_0†(t)Ũ(t)|B0⟩ with
    /// H̃_0 = H^e + s'V and H̃ = H̃_0 + (s−s')V, and must agree within 1e-12.
    pub fn shorttime_coherence(
        &self,
        s: f64,
        s_prime: f64,
        b0: &StateVector,
        t: f64,
    ) -> Result<C64> {
        let overlap_form = {
            let spec_s = self.branch_hamiltonian(s)?.spectrum()?;
            let spec_sp = self.branch_hamiltonian(s_prime)?.spectrum()?;
            let branch_s = spec_s.evolve(b0, t)?;
            let branch_sp = spec_sp.evolve(b0, t)?;
            overlap(&branch_sp, &branch_s)?
        };
        let echo_form = {
            let h0 = self.branch_hamiltonian(s_prime)?;
            let h_full = h0.add(&self.v_env.scaled(s - s_prime))?;
            let forward = h_full.spectrum()?.evolve(b0, t)?;
            let echoed = h0.spectrum()?.evolve(&forward, -t)?;
            overlap(b0, &echoed)?
        };
        let dev = (overlap_form - echo_form).norm();
        if dev > tol::CONSTRUCTION {
            return Err(Error::invariant(format!(
                "echo identity violated: branch-overlap and echo-element forms \
                 differ by {dev:.3e}"
            )));
        }
        Ok(0.5 * overlap_form)
    }

    /// ⟨s|ϱ^c(t)|s'⟩ from full evolution under H^c⊗1 + S⊗V + 1⊗H^e,
    /// starting from (|s⟩+|s'⟩)/√2 ⊗ B0.
    pub fn exact_coherence(
        &self,
        s: f64,
        s_prime: f64,
        b0: &StateVector,
        t: f64,
    ) -> Result<C64> {
        let (i, j) = self.resolve_pair(s, s_prime)?;
        let ket_s = self.s_spectrum.eigenstate(i)?;
        let ket_sp = self.s_spectrum.eigenstate(j)?;

        let dim_c = self.space.dim_central();
        let dim_e = self.space.dim_env();
        let eye_c = Array2::<C64>::eye(dim_c);
        let eye_e = Array2::<C64>::eye(dim_e);
        let mut joint = kron(&self.h_c.entries().view(), &eye_e.view())?;
        joint += &kron(&self.s_op.entries().view(), &self.v_env.entries().view())?;
        joint += &kron(&eye_c.view(), &self.h_env.entries().view())?;
        let joint_spectrum = HermitianOperator::new(joint)?.spectrum()?;

        let central0: ndarray::Array1<C64> = ket_s
            .amplitudes()
            .iter()
            .zip(ket_sp.amplitudes().iter())
            .map(|(a, b)| (a + b) / C64::new(2.0_f64.sqrt(), 0.0))
            .collect();
        let psi0 = self.space.product_of(&StateVector::new(central0)?, b0)?;
        let psi_t = joint_spectrum.evolve(&psi0, t)?;
        let rho = crate::linalg::partial_trace_env(&psi_t, self.space)?;

        let mut element = C64::new(0.0, 0.0);
        for p in 0..dim_c {
            for q in 0..dim_c {
                element += ket_s.amplitudes()[p].conj()
                    * rho.entry(p, q)
                    * ket_sp.amplitudes()[q];
            }
        }
        Ok(element)
    }

    /// |shorttime_coherence − exact_coherence|: the self-consistency
    /// validity diagnostic, zero when H^c = 0 and O(t·‖H^c‖) otherwise.
    pub fn shorttime_error(
        &self,
        s: f64,
        s_prime: f64,
        b0: &StateVector,
        t: f64,
    ) -> Result<f64> {
        let approx = self.shorttime_coherence(s, s_prime, b0, t)?;
        let exact = self.exact_coherence(s, s_prime, b0, t)?;
        Ok((approx - exact).norm())
    }

    /// Branch indices for the pair (s, s'), preferring distinct eigenvectors
    /// when the eigenvalues are degenerate.
    fn resolve_pair(&self, s: f64, s_prime: f64) -> Result<(usize, usize)> {
        let i = self.find_branch(s)?;
        let j = self
            .s_spectrum
            .values()
            .iter()
            .enumerate()
            .position(|(k, &v)| k != i && (v - s_prime).abs() <= EIGENVALUE_MATCH)
            .map(Ok)
            .unwrap_or_else(|| {
                let j = self.find_branch(s_prime)?;
                if j == i {
                    return Err(Error::invalid(format!(
                        "coherence needs two distinct S eigenstates; {s} and \
                         {s_prime} resolve to the same nondegenerate eigenvector"
                    )));
                }
                Ok(j)
            })?;
        Ok((i, j))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{gue, random_state, rng_from_seed};
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn diag(values: &[f64]) -> HermitianOperator {
        HermitianOperator::from_diagonal(values).unwrap()
    }

    fn random_model(dim_c: usize, dim_e: usize, seed: u64) -> (ShortTimeModel, StateVector) {
        let mut rng = rng_from_seed(seed);
        let h_c = gue(dim_c, 1.0, &mut rng).unwrap();
        let s_op = gue(dim_c, 1.0, &mut rng).unwrap();
        let h_env = gue(dim_e, 1.0, &mut rng).unwrap();
        let v_env = gue(dim_e, 1.0, &mut rng).unwrap();
        let b0 = random_state(dim_e, &mut rng).unwrap();
        (ShortTimeModel::new(h_c, s_op, h_env, v_env).unwrap(), b0)
    }

    #[test]
    fn branch_hamiltonian_trivials() {
        let mut rng = rng_from_seed(7);
        let h_env = gue(6, 1.0, &mut rng).unwrap();
        let v_env = gue(6, 1.0, &mut rng).unwrap();
        let model = ShortTimeModel::new(
            diag(&[0.0, 0.0]),
            diag(&[0.0, 1.0]),
            h_env.clone(),
            v_env.clone(),
        )
        .unwrap();
        let h0 = model.branch_hamiltonian(0.0).unwrap();
        let dev = h0.add(&h_env.scaled(-1.0)).unwrap().max_abs();
        assert!(dev < 1e-15);

        let zero_v = ShortTimeModel::new(
            diag(&[0.0, 0.0]),
            diag(&[0.0, 1.0]),
            h_env.clone(),
            HermitianOperator::zeros(6),
        )
        .unwrap();
        let h1 = zero_v.branch_hamiltonian(1.0).unwrap();
        assert!(h1.add(&h_env.scaled(-1.0)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn branch_difference_is_spectral_gap_times_v() {
        let mut rng = rng_from_seed(11);
        let h_env = gue(5, 1.0, &mut rng).unwrap();
        let v_env = gue(5, 1.0, &mut rng).unwrap();
        let model =
            ShortTimeModel::new(diag(&[0.0, 0.0]), diag(&[1.0, -1.0]), h_env, v_env.clone())
                .unwrap();
        let plus = model.branch_hamiltonian(1.0).unwrap();
        let minus = model.branch_hamiltonian(-1.0).unwrap();
        let diff = plus.add(&minus.scaled(-1.0)).unwrap();
        let dev = diff.add(&v_env.scaled(-2.0)).unwrap().max_abs();
        assert!(dev < 1e-14);
    }

    #[test]
    fn rejects_non_eigenvalues() {
        let (model, _) = random_model(2, 4, 3);
        assert!(model.branch_hamiltonian(1234.5).is_err());
    }

    #[test]
    fn trivial_coherences_stay_half() {
        let (_, b0) = random_model(2, 8, 5);
        let mut rng = rng_from_seed(5);
        let h_env = gue(8, 1.0, &mut rng).unwrap();
        let v_env = gue(8, 1.0, &mut rng).unwrap();

        let model = ShortTimeModel::new(
            diag(&[0.3, -0.7]),
            diag(&[2.0, 2.0]),
            h_env.clone(),
            v_env,
        )
        .unwrap();
        for &t in &[0.4, 2.6] {
            let coh = model.shorttime_coherence(2.0, 2.0, &b0, t).unwrap();
            assert!((coh - c(0.5, 0.0)).norm() < 1e-13, "degenerate pair t={t}");
        }

        let no_v = ShortTimeModel::new(
            diag(&[0.3, -0.7]),
            diag(&[1.0, -1.0]),
            h_env,
            HermitianOperator::zeros(8),
        )
        .unwrap();
        for &t in &[0.4, 2.6] {
            let coh = no_v.shorttime_coherence(1.0, -1.0, &b0, t).unwrap();
            assert!((coh - c(0.5, 0.0)).norm() < 1e-13, "V=0 t={t}");
        }
    }

    #[test]
    fn matches_joint_evolution_without_central_hamiltonian() {
        let mut rng = rng_from_seed(29);
        let s_op = gue(2, 1.0, &mut rng).unwrap();
        let h_env = gue(32, 1.0, &mut rng).unwrap();
        let v_env = gue(32, 1.0, &mut rng).unwrap();
        let b0 = random_state(32, &mut rng).unwrap();
        let model = ShortTimeModel::new(
            HermitianOperator::zeros(2),
            s_op,
            h_env,
            v_env,
        )
        .unwrap();
        let vals = model.s_values().to_owned();
        for &t in &[0.3, 1.1, 2.9] {
            let approx = model.shorttime_coherence(vals[0], vals[1], &b0, t).unwrap();
            let exact = model.exact_coherence(vals[0], vals[1], &b0, t).unwrap();
            assert!(
                (approx - exact).norm() <= 1e-12,
                "t={t}: approx {approx} vs exact {exact}, dev {:.3e}",
                (approx - exact).norm()
            );
        }
    }

    #[test]
    fn reduces_to_dephasing_model() {
        let mut rng = rng_from_seed(41);
        let h_env = gue(12, 1.0, &mut rng).unwrap();
        let v_env = gue(12, 1.0, &mut rng).unwrap();
        let b0 = random_state(12, &mut rng).unwrap();
        let (s0, s1) = (0.4, -1.3);
        let model = ShortTimeModel::new(
            HermitianOperator::zeros(2),
            diag(&[s0, s1]),
            h_env.clone(),
            v_env.clone(),
        )
        .unwrap();

        let dephasing = crate::dephasing::DephasingModel::new(
            vec![0.0, 0.0],
            h_env,
            vec![v_env.scaled(s0), v_env.scaled(s1)],
        )
        .unwrap();
        let init = crate::dephasing::InitialProduct::uniform(2, b0.clone()).unwrap();
        for &t in &[0.5, 1.7] {
            let a = model.shorttime_coherence(s0, s1, &b0, t).unwrap();
            let b = dephasing.coherence_factorized(&init, 0, 1, t).unwrap();
            assert!(
                (a - b).norm() <= 1e-12,
                "t={t}: shorttime {a} vs dephasing {b}"
            );
        }
    }

    #[test]
    fn error_vanishes_without_central_hamiltonian_and_at_t_zero() {
        let mut rng = rng_from_seed(17);
        let s_op = gue(2, 1.0, &mut rng).unwrap();
        let h_env = gue(10, 1.0, &mut rng).unwrap();
        let v_env = gue(10, 1.0, &mut rng).unwrap();
        let b0 = random_state(10, &mut rng).unwrap();
        let free = ShortTimeModel::new(
            HermitianOperator::zeros(2),
            s_op.clone(),
            h_env.clone(),
            v_env.clone(),
        )
        .unwrap();
        let vals = free.s_values().to_owned();
        assert!(free.shorttime_error(vals[0], vals[1], &b0, 1.9).unwrap() <= 1e-12);

        let mut rng2 = rng_from_seed(18);
        let h_c = gue(2, 1.0, &mut rng2).unwrap();
        let full = ShortTimeModel::new(h_c, s_op, h_env, v_env).unwrap();
        assert!(full.shorttime_error(vals[0], vals[1], &b0, 0.0).unwrap() <= 1e-14);
    }

    #[test]
    fn error_scales_linearly_in_time() {
        let (model, b0) = random_model(2, 10, 23);
        let vals = model.s_values().to_owned();
        let mut t = 0.05;
        while t > 0.003 {
            let err_full = model.shorttime_error(vals[0], vals[1], &b0, t).unwrap();
            let err_half = model.shorttime_error(vals[0], vals[1], &b0, 0.5 * t).unwrap();
            let ratio = err_full / err_half;
            assert!(
                (1.5..=2.5).contains(&ratio),
                "t={t}: halving ratio {ratio} outside [1.5, 2.5] \
                 (errors {err_full:.3e}, {err_half:.3e})"
            );
            t *= 0.5;
        }
    }

    #[test]
    fn perturbation_onset_is_monotone() {
        let mut rng = rng_from_seed(31);
        let h_env = gue(10, 1.0, &mut rng).unwrap();
        let v_env = gue(10, 1.0, &mut rng).unwrap();
        let b0 = random_state(10, &mut rng).unwrap();
        let t = 0.15;
        let mut last = -1.0;
        for scale in [0.5, 1.0, 2.0] {
            let model = ShortTimeModel::new(
                HermitianOperator::zeros(2),
                diag(&[0.0, 1.0]),
                h_env.clone(),
                v_env.scaled(scale),
            )
            .unwrap();
            let echo = 2.0 * model.shorttime_coherence(0.0, 1.0, &b0, t).unwrap().norm();
            let loss = 1.0 - echo;
            assert!(
                loss > last,
                "echo loss not monotone: {loss} after {last} at scale {scale}"
            );
            last = loss;
        }
    }

    #[test]
    fn degenerate_pair_is_preserved_exactly() {
        let mut rng = rng_from_seed(37);
        let h_env = gue(8, 1.0, &mut rng).unwrap();
        let v_env = gue(8, 1.0, &mut rng).unwrap();
        let b0 = random_state(8, &mut rng).unwrap();
        let model = ShortTimeModel::new(
            HermitianOperator::zeros(3),
            diag(&[1.0, 1.0, -1.0]),
            h_env,
            v_env,
        )
        .unwrap();
        let approx = model.shorttime_coherence(1.0, 1.0, &b0, 1.3).unwrap();
        assert!((approx - c(0.5, 0.0)).norm() < 1e-13);
        let exact = model.exact_coherence(1.0, 1.0, &b0, 1.3).unwrap();
        assert!(
            (exact - c(0.5, 0.0)).norm() < 1e-12,
            "degenerate coherence not preserved: {exact}"
        );
    }

    #[test]
    fn rejects_mismatched_dimensions_and_cap() {
        let mut rng = rng_from_seed(43);
        let h_env = gue(6, 1.0, &mut rng).unwrap();
        let v_env = gue(5, 1.0, &mut rng).unwrap();
        assert!(ShortTimeModel::new(
            HermitianOperator::zeros(2),
            diag(&[0.0, 1.0]),
            h_env,
            v_env
        )
        .is_err());

        let h_big = HermitianOperator::zeros(70);
        let v_big = HermitianOperator::zeros(70);
        assert!(matches!(
            ShortTimeModel::new(
                HermitianOperator::zeros(70),
                HermitianOperator::zeros(70),
                h_big,
                v_big
            ),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn nondegenerate_same_eigenvector_rejected_for_exact_route() {
        let (model, b0) = random_model(2, 6, 47);
        let vals = model.s_values().to_owned();
        assert!(model.exact_coherence(vals[0], vals[0], &b0, 0.5).is_err());
    }

    #[test]
    fn eigenbasis_projection_handles_nondiagonal_s() {
        // S = sigma_x: eigenvectors are superpositions, exercising the
        // projection ⟨s|ϱ|s'⟩ in a basis that differs from the lattice one.
        let s_op = HermitianOperator::new(array![
            [c(0.0, 0.0), c(1.0, 0.0)],
            [c(1.0, 0.0), c(0.0, 0.0)]
        ])
        .unwrap();
        let mut rng = rng_from_seed(53);
        let h_env = gue(16, 1.0, &mut rng).unwrap();
        let v_env = gue(16, 1.0, &mut rng).unwrap();
        let b0 = random_state(16, &mut rng).unwrap();
        let model = ShortTimeModel::new(
            HermitianOperator::zeros(2),
            s_op,
            h_env,
            v_env,
        )
        .unwrap();
        for &t in &[0.6, 1.9] {
            let approx = model.shorttime_coherence(-1.0, 1.0, &b0, t).unwrap();
            let exact = model.exact_coherence(-1.0, 1.0, &b0, t).unwrap();
            assert!(
                (approx - exact).norm() <= 1e-12,
                "t={t}: {approx} vs {exact}"
            );
        }
    }
}
