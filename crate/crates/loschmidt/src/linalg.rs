//! Dense complex linear algebra: states, Hermitian operators, spectral
//! propagators, tensor products, and reduced density matrices.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use ndarray_linalg::{Eigh, UPLO};

use crate::error::{Error, Result};
use crate::tol;
use crate::C64;

/// Conjugate transpose.
pub fn dagger(a: &ArrayView2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

fn max_abs(a: &Array2<C64>) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Normalized pure state on a finite-dimensional Hilbert space.
#[derive(Debug, Clone)]
pub struct StateVector {
    amplitudes: Array1<C64>,
}

impl StateVector {
    /// Wraps an amplitude vector, rejecting it unless the norm is 1 within
    /// the construction tolerance.
    pub fn new(amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::DimensionMismatch("empty state vector".into()));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol::CONSTRUCTION {
            return Err(Error::invariant(format!(
                "state norm {norm:.16} deviates from 1 beyond {:.1e}",
                tol::CONSTRUCTION
            )));
        }
        Ok(StateVector { amplitudes })
    }

    /// Rescales an arbitrary nonzero vector to unit norm.
    pub fn normalized(amplitudes: Array1<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::invalid("cannot normalize a zero vector"));
        }
        Ok(StateVector { amplitudes: amplitudes.mapv(|z| z / norm) })
    }

    /// Computational basis state `|index⟩`.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        let mut amplitudes = Array1::zeros(dim);
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(StateVector { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Inner product ⟨φ|ψ⟩, conjugating `phi`.
pub fn overlap(phi: &StateVector, psi: &StateVector) -> Result<C64> {
    if phi.dim() != psi.dim() {
        return Err(Error::DimensionMismatch(format!(
            "overlap of dimensions {} and {}",
            phi.dim(),
            psi.dim()
        )));
    }
    Ok(phi
        .amplitudes
        .iter()
        .zip(psi.amplitudes.iter())
        .map(|(a, b)| a.conj() * b)
        .sum())
}

/// Hermitian matrix, validated on construction.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    entries: Array2<C64>,
}

impl HermitianOperator {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(Error::DimensionMismatch(format!("{r}x{c} matrix is not square")));
        }
        let max_dev = (&entries - &dagger(&entries.view()))
            .iter()
            .fold(0.0_f64, |m, z| m.max(z.norm()));
        if max_dev > tol::CONSTRUCTION {
            return Err(Error::NotHermitian { max_dev });
        }
        Ok(HermitianOperator { entries })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::DimensionMismatch("empty diagonal".into()));
        }
        let mut entries = Array2::zeros((diag.len(), diag.len()));
        for (i, &d) in diag.iter().enumerate() {
            entries[(i, i)] = C64::new(d, 0.0);
        }
        Ok(HermitianOperator { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        HermitianOperator { entries: Array2::zeros((dim, dim)) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    /// `self + other`.
    pub fn add(&self, other: &HermitianOperator) -> Result<HermitianOperator> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "adding operators of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(HermitianOperator { entries: &self.entries + &other.entries })
    }

    /// `factor * self`.
    pub fn scaled(&self, factor: f64) -> HermitianOperator {
        HermitianOperator { entries: self.entries.mapv(|z| z * factor) }
    }

    /// `self + shift * 1`.
    pub fn shifted(&self, shift: f64) -> HermitianOperator {
        let mut entries = self.entries.clone();
        for i in 0..entries.nrows() {
            entries[(i, i)] += shift;
        }
        HermitianOperator { entries }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.entries)
    }

    /// Full eigendecomposition, cached by the caller for reuse across a
    /// time grid.
    ///
    /// The backend's eigenvector orientation depends on memory layout (a
    /// row-major input can come back as eigenvectors of the transpose), so
    /// the decomposition is accepted only after the eigenvalue equation
    /// H·v_k = λ_k·v_k is verified column by column, conjugating the output
    /// first when needed.
    pub fn spectrum(&self) -> Result<Spectrum> {
        let (values, raw) = self
            .entries
            .eigh(UPLO::Lower)
            .map_err(|e| Error::Eigensolver(e.to_string()))?;
        let scale = 1.0 + values.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        let conjugated = raw.mapv(|z| z.conj());
        for vectors in [conjugated, raw] {
            if eigen_residual(&self.entries, &values, &vectors) <= 1e-9 * scale {
                return Ok(Spectrum { values, vectors });
            }
        }
        Err(Error::Eigensolver(
            "eigenvectors fail the eigenvalue equation in either orientation".into(),
        ))
    }
}

/// max_{i,k} |(H V)_{ik} - λ_k V_{ik}|.
fn eigen_residual(h: &Array2<C64>, values: &Array1<f64>, vectors: &Array2<C64>) -> f64 {
    let hv = h.dot(vectors);
    let mut worst = 0.0_f64;
    for k in 0..values.len() {
        for i in 0..values.len() {
            worst = worst.max((hv[(i, k)] - values[k] * vectors[(i, k)]).norm());
        }
    }
    worst
}

/// Eigendecomposition H = Q Λ Q† of a Hermitian operator. Eigenvectors are
/// the columns of `vectors`, ascending eigenvalue order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    values: Array1<f64>,
    vectors: Array2<C64>,
}

impl Spectrum {
    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn vectors(&self) -> &Array2<C64> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Eigenvector column `i` as a state.
    pub fn eigenstate(&self, i: usize) -> Result<StateVector> {
        if i >= self.dim() {
            return Err(Error::IndexOutOfRange { index: i, dim: self.dim() });
        }
        StateVector::new(self.vectors.index_axis(Axis(1), i).to_owned())
    }

    /// e^{-iHt} ψ via the eigenbasis; O(dim²) per call.
    pub fn evolve(&self, psi: &StateVector, t: f64) -> Result<StateVector> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} vs operator dimension {}",
                psi.dim(),
                self.dim()
            )));
        }
        let coeffs = dagger(&self.vectors.view()).dot(psi.amplitudes());
        let phased: Array1<C64> = coeffs
            .iter()
            .zip(self.values.iter())
            .map(|(c, &e)| c * (-C64::i() * e * t).exp())
            .collect();
        StateVector::new(self.vectors.dot(&phased))
    }

    /// Dense propagator U(t) = Q e^{-iΛt} Q†.
    pub fn propagator(&self, t: f64) -> Result<UnitaryPropagator> {
        let mut phased = dagger(&self.vectors.view());
        for (mut row, &e) in phased.rows_mut().into_iter().zip(self.values.iter()) {
            let phase = (-C64::i() * e * t).exp();
            row.mapv_inplace(|z| z * phase);
        }
        UnitaryPropagator::new(self.vectors.dot(&phased), t)
    }
}

/// Computes U(t) = e^{-iHt} by spectral decomposition.
pub fn propagator(h: &HermitianOperator, t: f64) -> Result<UnitaryPropagator> {
    h.spectrum()?.propagator(t)
}

/// Unitary matrix with the evolution duration it represents.
#[derive(Debug, Clone)]
pub struct UnitaryPropagator {
    entries: Array2<C64>,
    duration: f64,
}

impl UnitaryPropagator {
    /// Validates ‖U†U - 1‖_max within the unitarity tolerance.
    pub fn new(entries: Array2<C64>, duration: f64) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(Error::DimensionMismatch(format!("{r}x{c} matrix is not square")));
        }
        let gram = dagger(&entries.view()).dot(&entries);
        let mut max_dev = 0.0_f64;
        for i in 0..r {
            for j in 0..r {
                let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
                max_dev = max_dev.max((gram[(i, j)] - target).norm());
            }
        }
        if max_dev > tol::UNITARITY {
            return Err(Error::NotUnitary { max_dev });
        }
        Ok(UnitaryPropagator { entries, duration })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "state dimension {} vs propagator dimension {}",
                psi.dim(),
                self.dim()
            )));
        }
        StateVector::new(self.entries.dot(psi.amplitudes()))
    }

    /// `self · other`, i.e. `other` acts first; durations add.
    pub fn compose(&self, other: &UnitaryPropagator) -> Result<UnitaryPropagator> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "composing propagators of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        UnitaryPropagator::new(self.entries.dot(&other.entries), self.duration + other.duration)
    }

    /// U†, representing evolution by the reversed duration.
    pub fn adjoint(&self) -> UnitaryPropagator {
        UnitaryPropagator {
            entries: dagger(&self.entries.view()),
            duration: -self.duration,
        }
    }

    /// ⟨φ|U|ψ⟩.
    pub fn matrix_element(&self, phi: &StateVector, psi: &StateVector) -> Result<C64> {
        let upsi = self.apply(psi)?;
        overlap(phi, &upsi)
    }
}

/// Bipartition of a joint Hilbert space into central ⊗ environment factors,
/// with the central index slowest: joint index = j·dim_env + m.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompositeSpace {
    dim_central: usize,
    dim_env: usize,
}

impl CompositeSpace {
    pub fn new(dim_central: usize, dim_env: usize) -> Result<Self> {
        Self::with_cap(dim_central, dim_env, tol::DIM_CAP)
    }

    pub fn with_cap(dim_central: usize, dim_env: usize, cap: usize) -> Result<Self> {
        if dim_central == 0 || dim_env == 0 {
            return Err(Error::DimensionMismatch("zero-dimensional factor".into()));
        }
        let dim = dim_central
            .checked_mul(dim_env)
            .ok_or_else(|| Error::DimensionMismatch("joint dimension overflow".into()))?;
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        Ok(CompositeSpace { dim_central, dim_env })
    }

    pub fn dim_central(&self) -> usize {
        self.dim_central
    }

    pub fn dim_env(&self) -> usize {
        self.dim_env
    }

    pub fn dim_joint(&self) -> usize {
        self.dim_central * self.dim_env
    }

    pub fn joint_index(&self, central: usize, env: usize) -> usize {
        central * self.dim_env + env
    }

    /// |φ⟩ ⊗ |χ⟩ for arbitrary factor states.
    pub fn product_of(&self, phi: &StateVector, chi: &StateVector) -> Result<StateVector> {
        if phi.dim() != self.dim_central || chi.dim() != self.dim_env {
            return Err(Error::DimensionMismatch(format!(
                "product factors {}⊗{} vs space {}⊗{}",
                phi.dim(),
                chi.dim(),
                self.dim_central,
                self.dim_env
            )));
        }
        let mut amp = Array1::zeros(self.dim_joint());
        for (j, &a) in phi.amplitudes().iter().enumerate() {
            for (m, &b) in chi.amplitudes().iter().enumerate() {
                amp[self.joint_index(j, m)] = a * b;
            }
        }
        StateVector::new(amp)
    }

    /// |j⟩ ⊗ |χ⟩ as a joint state.
    pub fn product_state(&self, central: usize, chi: &StateVector) -> Result<StateVector> {
        if central >= self.dim_central {
            return Err(Error::IndexOutOfRange { index: central, dim: self.dim_central });
        }
        if chi.dim() != self.dim_env {
            return Err(Error::DimensionMismatch(format!(
                "environment state dimension {} vs factor dimension {}",
                chi.dim(),
                self.dim_env
            )));
        }
        let mut amp = Array1::zeros(self.dim_joint());
        for (m, &a) in chi.amplitudes().iter().enumerate() {
            amp[self.joint_index(central, m)] = a;
        }
        StateVector::new(amp)
    }
}

/// Kronecker product with the default joint-dimension cap.
pub fn kron(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Result<Array2<C64>> {
    kron_with_cap(a, b, tol::DIM_CAP)
}

/// Kronecker product guarded by an explicit cap on either output axis.
pub fn kron_with_cap(a: &ArrayView2<C64>, b: &ArrayView2<C64>, cap: usize) -> Result<Array2<C64>> {
    let rows = a.nrows().checked_mul(b.nrows());
    let cols = a.ncols().checked_mul(b.ncols());
    match (rows, cols) {
        (Some(r), Some(c)) if r <= cap && c <= cap => Ok(ndarray::linalg::kron(a, b)),
        (Some(r), Some(c)) => Err(Error::DimensionCap { dim: r.max(c), cap }),
        _ => Err(Error::DimensionMismatch("kron dimension overflow".into())),
    }
}

/// Density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        let op = HermitianOperator::new(entries)?;
        let trace: C64 = (0..op.dim()).map(|i| op.entries()[(i, i)]).sum();
        if (trace.re - 1.0).abs() > tol::IDENTITY || trace.im.abs() > tol::IDENTITY {
            return Err(Error::invariant(format!(
                "density-matrix trace {:.16}{:+.16}i deviates from 1",
                trace.re, trace.im
            )));
        }
        let spectrum = op.spectrum()?;
        let min_eig = spectrum.values().iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -tol::IDENTITY {
            return Err(Error::invariant(format!(
                "density matrix has negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(DensityMatrix { entries: op.entries().clone() })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn entry(&self, j: usize, k: usize) -> C64 {
        self.entries[(j, k)]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|i| self.entries[(i, i)]).sum()
    }

    /// Tr ϱ², via Σ|ϱ_jk|² for Hermitian ϱ.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Reduced central-system density matrix of a joint pure state:
/// ϱ_{jk} = Σ_m Ψ[j,m] Ψ*[k,m].
pub fn partial_trace_env(psi: &StateVector, space: CompositeSpace) -> Result<DensityMatrix> {
    if psi.dim() != space.dim_joint() {
        return Err(Error::DimensionMismatch(format!(
            "joint state dimension {} vs space dimension {}",
            psi.dim(),
            space.dim_joint()
        )));
    }
    let amp = psi.amplitudes();
    let nc = space.dim_central();
    let ne = space.dim_env();
    let mut rho = Array2::zeros((nc, nc));
    for j in 0..nc {
        for k in 0..nc {
            let mut sum = C64::new(0.0, 0.0);
            for m in 0..ne {
                sum += amp[space.joint_index(j, m)] * amp[space.joint_index(k, m)].conj();
            }
            rho[(j, k)] = sum;
        }
    }
    DensityMatrix::new(rho)
}
