//! Bilinear oscillator-bath model: a central mode exchanging excitations
//! with L bath modes.
//!
//! Coherent product states stay coherent under this Hamiltonian, so the
//! quantum dynamics reduces to the classical linear flow of the labels.
//! Cat-state decoherence is then a Gaussian branch overlap, which equals a
//! Loschmidt-echo amplitude of the bath driven by the two classical central
//! trajectories.

pub mod fock;

pub use fock::FockOracle;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::HermitianOperator;
use crate::tol;
use crate::C64;

/// Central frequency, bath frequencies, couplings, and the per-mode Fock
/// truncation used by the brute-force oracles.
#[derive(Debug, Clone)]
pub struct OscillatorBathModel {
    omega_c: f64,
    bath_omega: Vec<f64>,
    bath_g: Vec<f64>,
    fock_cutoff: usize,
}

impl OscillatorBathModel {
    pub fn new(
        omega_c: f64,
        bath_omega: Vec<f64>,
        bath_g: Vec<f64>,
        fock_cutoff: usize,
    ) -> Result<Self> {
        if bath_omega.is_empty() {
            return Err(Error::invalid("bath needs at least one mode"));
        }
        if bath_omega.len() != bath_g.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} bath frequencies vs {} couplings",
                bath_omega.len(),
                bath_g.len()
            )));
        }
        if !omega_c.is_finite()
            || bath_omega.iter().any(|w| !w.is_finite())
            || bath_g.iter().any(|g| !g.is_finite())
        {
            return Err(Error::invalid("non-finite frequency or coupling"));
        }
        if fock_cutoff == 0 {
            return Err(Error::invalid("fock_cutoff must be at least 1"));
        }
        Ok(OscillatorBathModel { omega_c, bath_omega, bath_g, fock_cutoff })
    }

    /// Flat band on [omega_min, omega_max] with uniform |g|² = γΔω/(2π),
    /// the discrete stand-in for a Markov bath up to the recurrence time
    /// 2π/Δω. The band must straddle the central frequency, otherwise there
    /// is no resonant damping to approximate.
    pub fn ohmic_flat_bath(
        omega_c: f64,
        modes: usize,
        omega_min: f64,
        omega_max: f64,
        gamma: f64,
    ) -> Result<Self> {
        if modes < 2 {
            return Err(Error::invalid("flat bath needs at least two modes"));
        }
        if !(omega_min < omega_max) {
            return Err(Error::invalid("flat bath needs omega_min < omega_max"));
        }
        if gamma < 0.0 {
            return Err(Error::invalid("damping rate must be nonnegative"));
        }
        if omega_c < omega_min || omega_c > omega_max {
            return Err(Error::invalid(format!(
                "band [{omega_min}, {omega_max}] excludes the central frequency \
                 {omega_c}; no resonant damping"
            )));
        }
        let spacing = (omega_max - omega_min) / (modes - 1) as f64;
        let g = (gamma * spacing / (2.0 * std::f64::consts::PI)).sqrt();
        let bath_omega = (0..modes).map(|k| omega_min + k as f64 * spacing).collect();
        OscillatorBathModel::new(omega_c, bath_omega, vec![g; modes], DEFAULT_FOCK_CUTOFF)
    }

    pub fn with_fock_cutoff(mut self, fock_cutoff: usize) -> Result<Self> {
        if fock_cutoff == 0 {
            return Err(Error::invalid("fock_cutoff must be at least 1"));
        }
        self.fock_cutoff = fock_cutoff;
        Ok(self)
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }

    pub fn bath_size(&self) -> usize {
        self.bath_omega.len()
    }

    pub fn bath_omega(&self) -> &[f64] {
        &self.bath_omega
    }

    pub fn bath_g(&self) -> &[f64] {
        &self.bath_g
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    /// Mode spacing of an equally spaced bath; recurrence time is 2π/Δω.
    pub fn mode_spacing(&self) -> Option<f64> {
        if self.bath_omega.len() < 2 {
            return None;
        }
        Some(self.bath_omega[1] - self.bath_omega[0])
    }

    /// Bath correlation function α(τ) = Σ_λ |g_λ|² e^{-iω_λ τ}.
    pub fn memory_kernel(&self, tau: f64) -> C64 {
        self.bath_omega
            .iter()
            .zip(self.bath_g.iter())
            .map(|(&w, &g)| g * g * (-C64::i() * w * tau).exp())
            .sum()
    }

    /// The (L+1)-dimensional one-excitation matrix K with K₀₀ = Ω,
    /// K₀λ = g_λ, K_λλ = ω_λ; the label flow is (z, β)(t) = e^{-iKt}(z, β)(0).
    pub fn one_excitation_generator(&self) -> Result<HermitianOperator> {
        let l = self.bath_size();
        let mut k = Array2::zeros((l + 1, l + 1));
        k[(0, 0)] = C64::new(self.omega_c, 0.0);
        for lam in 0..l {
            k[(0, lam + 1)] = C64::new(self.bath_g[lam], 0.0);
            k[(lam + 1, 0)] = C64::new(self.bath_g[lam], 0.0);
            k[(lam + 1, lam + 1)] = C64::new(self.bath_omega[lam], 0.0);
        }
        HermitianOperator::new(k)
    }

    /// Step size from the design rule min(1e-3·2π/ω_max, t/1000).
    pub fn default_flow_step(&self, t: f64) -> f64 {
        let w_max = self
            .bath_omega
            .iter()
            .fold(self.omega_c.abs(), |m, w| m.max(w.abs()))
            .max(1e-12);
        (1e-3 * 2.0 * std::f64::consts::PI / w_max).min(t.abs() / 1000.0)
    }

    fn check_step(&self, t: f64, dt: f64) -> Result<usize> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("step dt = {dt} must be positive")));
        }
        if dt > t {
            return Err(Error::invalid(format!("step dt = {dt} exceeds duration t = {t}")));
        }
        Ok((t / dt).ceil().max(1.0) as usize)
    }

    /// Integrates the classical label flow iż = Ωz + Σg_λβ_λ,
    /// iβ̇_λ = ω_λβ_λ + g_λz from (z0, vacuum) with fixed-step RK4, while
    /// accumulating the driven-frame phase φ̇ = -Σ_λ g_λ Re(z β̄_λ).
    pub fn classical_flow(&self, z0: C64, t: f64, dt: f64) -> Result<GaussianBranch> {
        if t == 0.0 {
            return Ok(GaussianBranch::initial(z0, self.bath_size()));
        }
        let n = self.check_step(t, dt)?;
        let mut flow = FlowIntegrator::new(self, z0);
        let h = t / n as f64;
        for _ in 0..n {
            flow.step(h);
        }
        let branch = flow.branch();
        self.check_drift(z0, &branch)?;
        Ok(branch)
    }

    /// As `classical_flow`, recording the branch after every step. Sample k
    /// sits at time k·(t/n) with n = ceil(t/dt).
    pub fn classical_trajectory(&self, z0: C64, t: f64, dt: f64) -> Result<FlowTrajectory> {
        if t == 0.0 {
            return Ok(FlowTrajectory {
                step: 0.0,
                samples: vec![GaussianBranch::initial(z0, self.bath_size())],
            });
        }
        let n = self.check_step(t, dt)?;
        let h = t / n as f64;
        let mut flow = FlowIntegrator::new(self, z0);
        let mut samples = Vec::with_capacity(n + 1);
        samples.push(flow.branch());
        for _ in 0..n {
            flow.step(h);
            samples.push(flow.branch());
        }
        self.check_drift(z0, samples.last().expect("nonempty trajectory"))?;
        Ok(FlowTrajectory { step: h, samples })
    }

    fn check_drift(&self, z0: C64, branch: &GaussianBranch) -> Result<()> {
        let initial = z0.norm_sqr();
        let drift = (branch.excitation() - initial).abs();
        if drift > tol::FLOW_DRIFT * initial.max(1.0) {
            return Err(Error::invariant(format!(
                "classical flow excitation drift {drift:.3e} exceeds {:.1e}; \
                 reduce the integrator step",
                tol::FLOW_DRIFT
            )));
        }
        Ok(())
    }

    /// Coefficient of |z₁(t)⟩⟨z₂(t)| in the reduced cat-state density
    /// matrix: ½·⟨B₂(t)|B₁(t)⟩ in the paper's 1/√2 normalization.
    pub fn cat_coherence(&self, spec: &CatStateSpec, t: f64, dt: f64) -> Result<C64> {
        let b1 = self.classical_flow(spec.z1, t, dt)?;
        let b2 = self.classical_flow(spec.z2, t, dt)?;
        Ok(0.5 * branch_overlap(&b1, &b2)?)
    }

    /// Same coefficient under the exact initial normalization
    /// N² = 2 + 2Re⟨z₁|z₂⟩, which the paper drops assuming well-separated
    /// labels.
    pub fn cat_coherence_exact(&self, spec: &CatStateSpec, t: f64, dt: f64) -> Result<C64> {
        let b1 = self.classical_flow(spec.z1, t, dt)?;
        let b2 = self.classical_flow(spec.z2, t, dt)?;
        Ok(branch_overlap(&b1, &b2)? / spec.exact_norm_sq())
    }

    /// One-shot Fock-basis oracle; builds the truncated Hamiltonian, evolves
    /// the cat exactly, and extracts the coefficient matching
    /// `cat_coherence`. Use [`FockOracle`] directly for a time grid.
    pub fn fock_oracle(&self, spec: &CatStateSpec, t: f64) -> Result<C64> {
        FockOracle::new(self, spec, tol::DIM_CAP)?.coherence(t)
    }

    /// Echo form of the decoherence factor: e^{-i(φ₁-φ₂)}⟨0|Ũ₂†(t)Ũ₁(t)|0⟩,
    /// the bath driven forward by the z₁ classical trajectory and backward by
    /// the z₂ one. Equals branch_overlap(B₁, B₂) up to integrator error.
    /// Propagation is midpoint-split with step `dt`; a step-halving estimate
    /// above 1e-6 is rejected, and the halved-step result is returned.
    pub fn driven_echo_amplitude(&self, spec: &CatStateSpec, t: f64, dt: f64) -> Result<C64> {
        if t == 0.0 {
            return Ok(C64::new(1.0, 0.0));
        }
        let coarse = self.driven_echo_once(spec, t, dt)?;
        let fine = self.driven_echo_once(spec, t, 0.5 * dt)?;
        let estimate = (coarse - fine).norm();
        if estimate > tol::TRUNCATION {
            return Err(Error::invariant(format!(
                "driven-echo step dt = {dt} too coarse: halving changes the \
                 amplitude by {estimate:.3e} (tolerance {:.1e})",
                tol::TRUNCATION
            )));
        }
        Ok(fine)
    }

    fn driven_echo_once(&self, spec: &CatStateSpec, t: f64, dt: f64) -> Result<C64> {
        let n = self.check_step(t, dt)?;
        let h = t / n as f64;
        // Midpoint drive values come from trajectories sampled at h/2.
        let traj1 = self.classical_trajectory(spec.z1, t, 0.5 * h)?;
        let traj2 = self.classical_trajectory(spec.z2, t, 0.5 * h)?;
        self.check_driven_cutoff(&traj1)?;
        self.check_driven_cutoff(&traj2)?;
        let psi1 = self.propagate_driven(&traj1, n, h)?;
        let psi2 = self.propagate_driven(&traj2, n, h)?;
        let mut echo: C64 = psi2
            .iter()
            .zip(psi1.iter())
            .map(|(b, a)| {
                b.iter().zip(a.iter()).map(|(y, x)| y.conj() * x).sum::<C64>()
            })
            .product();
        let phi1 = traj1.final_branch().phi();
        let phi2 = traj2.final_branch().phi();
        echo *= (-C64::i() * (phi1 - phi2)).exp();
        Ok(echo)
    }

    /// Per-mode driven vacuum propagation: the bath Hamiltonian
    /// Σ_λ ω_λ n_λ + g_λ(z(s) b†_λ + h.c.) is a sum over modes, so each mode
    /// evolves in its own truncated Fock space.
    fn propagate_driven(
        &self,
        traj: &FlowTrajectory,
        n_steps: usize,
        h: f64,
    ) -> Result<Vec<Array1<C64>>> {
        let dim = self.fock_cutoff + 1;
        let mut modes: Vec<Array1<C64>> = (0..self.bath_size())
            .map(|_| {
                let mut v = Array1::zeros(dim);
                v[0] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        let mut hmat = Array2::<C64>::zeros((dim, dim));
        for k in 0..n_steps {
            let z_mid = traj.samples[2 * k + 1].z();
            for (lam, psi) in modes.iter_mut().enumerate() {
                let f = self.bath_g[lam] * z_mid;
                hmat.fill(C64::new(0.0, 0.0));
                for p in 0..dim {
                    hmat[(p, p)] = C64::new(self.bath_omega[lam] * p as f64, 0.0);
                    if p + 1 < dim {
                        let root = ((p + 1) as f64).sqrt();
                        hmat[(p + 1, p)] = f * root;
                        hmat[(p, p + 1)] = f.conj() * root;
                    }
                }
                let spec = HermitianOperator::new(hmat.clone())?.spectrum()?;
                let coeffs = crate::linalg::dagger(&spec.vectors().view()).dot(&*psi);
                let phased: Array1<C64> = coeffs
                    .iter()
                    .zip(spec.values().iter())
                    .map(|(c, &e)| c * (-C64::i() * e * h).exp())
                    .collect();
                *psi = spec.vectors().dot(&phased);
            }
        }
        Ok(modes)
    }

    fn check_driven_cutoff(&self, traj: &FlowTrajectory) -> Result<()> {
        let mut max_occ = 0.0_f64;
        for branch in &traj.samples {
            for b in branch.beta() {
                max_occ = max_occ.max(b.norm_sqr());
            }
        }
        let deficit = coherent_tail_deficit(max_occ, self.fock_cutoff);
        if deficit > 1e-8 {
            return Err(Error::invalid(format!(
                "fock_cutoff {} too small for driven bath occupation {max_occ:.3}: \
                 coherent tail deficit {deficit:.3e} exceeds 1e-8",
                self.fock_cutoff
            )));
        }
        Ok(())
    }
}

pub const DEFAULT_FOCK_CUTOFF: usize = 16;

/// Classical labels of one evolved branch: central z, bath β_λ, and the
/// accumulated driven-frame phase φ (zero in the joint picture, used by the
/// driven-echo identity).
#[derive(Debug, Clone)]
pub struct GaussianBranch {
    z: C64,
    beta: Vec<C64>,
    phi: f64,
}

impl GaussianBranch {
    fn initial(z0: C64, bath: usize) -> Self {
        GaussianBranch { z: z0, beta: vec![C64::new(0.0, 0.0); bath], phi: 0.0 }
    }

    pub fn z(&self) -> C64 {
        self.z
    }

    pub fn beta(&self) -> &[C64] {
        &self.beta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Conserved excitation number |z|² + Σ|β_λ|².
    pub fn excitation(&self) -> f64 {
        self.z.norm_sqr() + self.beta.iter().map(|b| b.norm_sqr()).sum::<f64>()
    }
}

/// Branch samples at uniform times k·step.
#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    step: f64,
    samples: Vec<GaussianBranch>,
}

impl FlowTrajectory {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[GaussianBranch] {
        &self.samples
    }

    pub fn final_branch(&self) -> &GaussianBranch {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn duration(&self) -> f64 {
        self.step * (self.samples.len() - 1) as f64
    }
}

/// Initial cat labels (|z₁⟩ + |z₂⟩)/√2 ⊗ |vacuum⟩.
#[derive(Debug, Clone, Copy)]
pub struct CatStateSpec {
    pub z1: C64,
    pub z2: C64,
}

impl CatStateSpec {
    pub fn new(z1: C64, z2: C64) -> Self {
        CatStateSpec { z1, z2 }
    }

    pub fn separation(&self) -> f64 {
        (self.z1 - self.z2).norm()
    }

    /// Exact squared norm of the paper's 1/√2 cat: 2 + 2Re⟨z₁|z₂⟩.
    pub fn exact_norm_sq(&self) -> f64 {
        2.0 + 2.0 * coherent_label_overlap(self.z1, self.z2).re
    }
}

/// ⟨a|b⟩ = exp(-½|a|² - ½|b|² + ā·b) for single-mode coherent states.
pub fn coherent_label_overlap(a: C64, b: C64) -> C64 {
    (C64::new(-0.5 * (a.norm_sqr() + b.norm_sqr()), 0.0) + a.conj() * b).exp()
}

/// ⟨B₂(t)|B₁(t)⟩ = Π_λ exp(-½|β⁽¹⁾_λ|² - ½|β⁽²⁾_λ|² + β̄⁽²⁾_λ β⁽¹⁾_λ), the
/// bath decoherence factor carried by the coherence ϱ₁₂. Phases are not
/// included; they belong to the driven-frame picture only.
pub fn branch_overlap(b1: &GaussianBranch, b2: &GaussianBranch) -> Result<C64> {
    if b1.beta.len() != b2.beta.len() {
        return Err(Error::DimensionMismatch(format!(
            "bath sizes {} and {}",
            b1.beta.len(),
            b2.beta.len()
        )));
    }
    let exponent: C64 = b1
        .beta
        .iter()
        .zip(b2.beta.iter())
        .map(|(x, y)| {
            C64::new(-0.5 * (x.norm_sqr() + y.norm_sqr()), 0.0) + y.conj() * x
        })
        .sum();
    Ok(exponent.exp())
}

/// Closed-form Markov prediction for the decoherence factor ⟨B₂|B₁⟩ under
/// flat-band damping at rate γ: exp[(z̄₂z₁ - ½|z₁|² - ½|z₂|²)·γt], whose
/// squared modulus is the famous relation e^{-γt|z₁-z₂|²}. Valid for
/// γt ≪ 1. The central frequency drops out: both labels rotate together.
pub fn markov_reference(gamma: f64, _omega_c: f64, spec: &CatStateSpec, t: f64) -> C64 {
    let geometry =
        spec.z2.conj() * spec.z1 - 0.5 * (spec.z1.norm_sqr() + spec.z2.norm_sqr());
    (geometry * gamma * t).exp()
}

/// Self-consistency residual of the memory-kernel equation
/// ż + iΩz + ∫₀ᵗ α(t-s) z(s) ds = 0, evaluated on a stored trajectory by
/// trapezoid quadrature; returns the maximum over samples.
pub fn kernel_residual(model: &OscillatorBathModel, traj: &FlowTrajectory) -> Result<f64> {
    if traj.samples.len() < 2 {
        return Err(Error::invalid("kernel residual needs at least two samples"));
    }
    let h = traj.step;
    let mut worst = 0.0_f64;
    for (k, branch) in traj.samples.iter().enumerate() {
        // ż from the defining ODE; the quadrature then independently checks
        // that Σ g_λ β_λ matches the kernel convolution of z.
        let drive: C64 = branch
            .beta
            .iter()
            .zip(model.bath_g.iter())
            .map(|(b, &g)| g * b)
            .sum();
        let zdot = -C64::i() * (model.omega_c * branch.z + drive);
        let mut convolution = C64::new(0.0, 0.0);
        if k > 0 {
            let t_k = k as f64 * h;
            for (j, past) in traj.samples[..=k].iter().enumerate() {
                let weight = if j == 0 || j == k { 0.5 } else { 1.0 };
                convolution += weight * model.memory_kernel(t_k - j as f64 * h) * past.z;
            }
            convolution *= h;
        }
        let residual = (zdot + C64::i() * model.omega_c * branch.z + convolution).norm();
        worst = worst.max(residual);
    }
    Ok(worst)
}

/// Truncated coherent-state amplitudes c_n = e^{-|z|²/2} zⁿ/√n!.
pub fn coherent_amplitudes(z: C64, dim: usize) -> Array1<C64> {
    let mut amps = Array1::zeros(dim);
    let mut c = C64::new((-0.5 * z.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        amps[n] = c;
        c = c * z / ((n + 1) as f64).sqrt();
    }
    amps
}

/// Probability mass of a coherent state with mean occupation `nbar` above
/// the cutoff: 1 - e^{-n̄} Σ_{n≤cutoff} n̄ⁿ/n!.
pub fn coherent_tail_deficit(nbar: f64, cutoff: usize) -> f64 {
    if nbar <= 0.0 {
        return 0.0;
    }
    let mut term = (-nbar).exp();
    let mut mass = term;
    for n in 1..=cutoff {
        term *= nbar / n as f64;
        mass += term;
    }
    (1.0 - mass).max(0.0)
}

/// RK4 over the flattened state (z, β₁..β_L, φ).
struct FlowIntegrator<'m> {
    model: &'m OscillatorBathModel,
    y: Vec<C64>,
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl<'m> FlowIntegrator<'m> {
    fn new(model: &'m OscillatorBathModel, z0: C64) -> Self {
        let n = model.bath_size() + 2;
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[0] = z0;
        FlowIntegrator {
            model,
            y,
            k1: vec![C64::new(0.0, 0.0); n],
            k2: vec![C64::new(0.0, 0.0); n],
            k3: vec![C64::new(0.0, 0.0); n],
            k4: vec![C64::new(0.0, 0.0); n],
            tmp: vec![C64::new(0.0, 0.0); n],
        }
    }

    fn derivative(model: &OscillatorBathModel, y: &[C64], out: &mut [C64]) {
        let l = model.bath_size();
        let z = y[0];
        let mut drive = C64::new(0.0, 0.0);
        let mut phase_rate = 0.0;
        for lam in 0..l {
            let beta = y[1 + lam];
            let g = model.bath_g[lam];
            drive += g * beta;
            out[1 + lam] = -C64::i() * (model.bath_omega[lam] * beta + g * z);
            phase_rate -= g * (z * beta.conj()).re;
        }
        out[0] = -C64::i() * (model.omega_c * z + drive);
        out[l + 1] = C64::new(phase_rate, 0.0);
    }

    fn step(&mut self, h: f64) {
        let n = self.y.len();
        Self::derivative(self.model, &self.y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = self.y[i] + 0.5 * h * self.k1[i];
        }
        Self::derivative(self.model, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = self.y[i] + 0.5 * h * self.k2[i];
        }
        Self::derivative(self.model, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = self.y[i] + h * self.k3[i];
        }
        Self::derivative(self.model, &self.tmp, &mut self.k4);
        for i in 0..n {
            self.y[i] = self.y[i]
                + (h / 6.0) * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }

    fn branch(&self) -> GaussianBranch {
        let l = self.model.bath_size();
        GaussianBranch {
            z: self.y[0],
            beta: self.y[1..=l].to_vec(),
            phi: self.y[l + 1].re,
        }
    }
}
