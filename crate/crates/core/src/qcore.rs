//! Small exact linear-algebra kernel for two-qubit polarization states.
//!
//! Qubit ordering is A ⊗ B with the {H, V} basis on each photon, so the
//! two-qubit basis index is `2 * a + b`. Observables live in the real
//! (σ_z, σ_x) plane of the Bloch sphere; σ_y never appears.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Tolerance on `max |M - M†|` for a matrix to count as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for a positive semidefinite state.
pub const PSD_TOL: f64 = 1e-10;
/// Largest imaginary residue tolerated in `Tr(ρ O)`.
pub const EXPECTATION_IM_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix must be at least 1x1".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    /// `|v⟩⟨v|` for a column vector `v`.
    pub fn outer(v: &[Complex64]) -> Self {
        let n = v.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = v[i] * v[j].conj();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&a| a * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// `max |M - M†|`, or infinity for non-square input.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_TOL
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part `(M + M†)/2`, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        if !self.is_square() {
            return Err(Error::Dimension(format!("{}x{} is not square", self.rows, self.cols)));
        }
        let n = self.rows;
        let m = DMatrix::from_fn(n, n, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }
}

/// Which photon of the pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Party {
    A,
    B,
}

/// Real-plane polarization observable `cos 2θ σ_z + sin 2θ σ_x`.
pub fn pauli_direction(theta: f64) -> ComplexMatrix {
    let (s, c) = (2.0 * theta).sin_cos();
    ComplexMatrix::from_real(2, 2, &[c, s, s, -c]).expect("2x2")
}

/// `(I + σ(θ))/2`, the projector onto `cos θ |H⟩ + sin θ |V⟩`.
pub fn projector(theta: f64) -> ComplexMatrix {
    let (s, c) = theta.sin_cos();
    ComplexMatrix::from_real(2, 2, &[c * c, s * c, s * c, s * s]).expect("2x2")
}

/// Kronecker product `a ⊗ b`.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a.get(i, j);
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.data[(i * b.rows + k) * cols + j * b.cols + l] = aij * b.get(k, l);
                }
            }
        }
    }
    out
}

/// Reduced single-qubit state of one photon.
pub fn partial_trace(rho: &ComplexMatrix, keep: Party) -> Result<ComplexMatrix> {
    if rho.rows != 4 || rho.cols != 4 {
        return Err(Error::Dimension(format!(
            "partial trace needs a 4x4 two-qubit matrix, got {}x{}",
            rho.rows, rho.cols
        )));
    }
    let mut out = ComplexMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = ZERO;
            for k in 0..2 {
                acc += match keep {
                    Party::A => rho.get(2 * i + k, 2 * j + k),
                    Party::B => rho.get(2 * k + i, 2 * k + j),
                };
            }
            out.set(i, j, acc);
        }
    }
    Ok(out)
}

/// `Tr(ρ O)` for a Hermitian observable; errors if the result is not real.
pub fn expectation(rho: &ComplexMatrix, obs: &ComplexMatrix) -> Result<f64> {
    if !rho.is_square() || rho.rows != obs.rows || obs.rows != obs.cols {
        return Err(Error::Dimension(format!(
            "state {}x{} vs observable {}x{}",
            rho.rows, rho.cols, obs.rows, obs.cols
        )));
    }
    let n = rho.rows;
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..n {
            acc += rho.get(i, k) * obs.get(k, i);
        }
    }
    if acc.im.abs() > EXPECTATION_IM_TOL {
        return Err(Error::NonHermitianObservable(acc.im));
    }
    Ok(acc.re)
}

/// The four Bell vectors in the `{HH, HV, VH, VV}` basis, singlet first:
/// `ψ⁻, ψ⁺, φ⁻, φ⁺`.
pub fn bell_vectors() -> [[Complex64; 4]; 4] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |x: f64| Complex64::new(x, 0.0);
    [
        [c(0.0), c(h), c(-h), c(0.0)],
        [c(0.0), c(h), c(h), c(0.0)],
        [c(h), c(0.0), c(0.0), c(-h)],
        [c(h), c(0.0), c(0.0), c(h)],
    ]
}

/// Two-qubit polarization density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationState {
    rho: ComplexMatrix,
    visibility: f64,
}

impl PolarizationState {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn from_matrix(rho: ComplexMatrix) -> Result<Self> {
        if rho.rows != 4 || rho.cols != 4 {
            return Err(Error::Dimension(format!("expected 4x4, got {}x{}", rho.rows, rho.cols)));
        }
        let defect = rho.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (defect {defect:e})")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let min_ev = rho.hermitian_eigenvalues()?[0];
        if min_ev < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_ev:e}")));
        }
        let visibility = diagonal_basis_visibility(&rho);
        Ok(Self { rho, visibility })
    }

    pub fn singlet() -> Self {
        Self::werner(1.0).expect("valid visibility")
    }

    /// `V |ψ⁻⟩⟨ψ⁻| + (1 - V) I/4`.
    pub fn werner(visibility: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::InvalidParameter(format!("visibility {visibility} outside [0, 1]")));
        }
        let singlet = ComplexMatrix::outer(&bell_vectors()[0]);
        let rho = singlet
            .scale_real(visibility)
            .add(&ComplexMatrix::identity(4).scale_real((1.0 - visibility) / 4.0))?;
        Ok(Self { rho, visibility })
    }

    /// `|a⟩⟨a| ⊗ |b⟩⟨b|` for linear-polarization angles `a`, `b`.
    pub fn product(theta_a: f64, theta_b: f64) -> Self {
        let rho = tensor_product(&projector(theta_a), &projector(theta_b));
        Self::from_matrix(rho).expect("product of projectors is a state")
    }

    pub fn rho(&self) -> &ComplexMatrix {
        &self.rho
    }

    /// Werner parameter for states built by [`Self::werner`]; otherwise the
    /// diagonal-basis two-photon contrast `-⟨σ_x ⊗ σ_x⟩`.
    pub fn visibility(&self) -> f64 {
        self.visibility
    }

    pub fn purity(&self) -> f64 {
        self.rho.matmul(&self.rho).expect("4x4").trace().re
    }

    pub fn reduced(&self, keep: Party) -> ComplexMatrix {
        partial_trace(&self.rho, keep).expect("4x4")
    }
}

fn diagonal_basis_visibility(rho: &ComplexMatrix) -> f64 {
    let sx = pauli_direction(std::f64::consts::FRAC_PI_4);
    -expectation(rho, &tensor_product(&sx, &sx)).unwrap_or(f64::NAN)
}

/// Ginibre-distributed random density matrix `G G† / Tr(G G†)` with
/// standard complex Gaussian `G` of size `n x n`.
pub fn random_density_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let data: Vec<Complex64> = (0..n * n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let g = ComplexMatrix::new(n, n, data).expect("n x n");
    let ggd = g.matmul(&g.adjoint()).expect("square");
    let tr = ggd.trace().re;
    let mut out = ggd.scale_real(1.0 / tr);
    // Symmetrize away rounding so the result is Hermitian to the last bit.
    for i in 0..n {
        for j in i..n {
            let v = (out.get(i, j) + out.get(j, i).conj()) * 0.5;
            out.set(i, j, v);
            out.set(j, i, v.conj());
        }
    }
    out
}
