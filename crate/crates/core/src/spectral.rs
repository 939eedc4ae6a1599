//! Dense Hermitian / real-symmetric eigendecomposition and the matrix
//! functions built on top of it (`f(A)ψ`, `e^{-iAτ}ψ`).
//!
//! Degenerate clusters carry no ordering guarantee; callers only ever use
//! the decomposition through spectral sums, which are basis-free.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;

/// Tolerance for the Hermiticity check at construction.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Bound on `max |AV - VΛ|` accepted from the eigensolver.
pub const RESIDUAL_TOL: f64 = 1e-9;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Eigendecomposition of a Hermitian operator, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: DVector<f64>,
    /// Columns are orthonormal eigenvectors.
    pub vectors: DMatrix<C64>,
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl SymEig {
    /// `V f(Λ) Vᵀ x`.
    pub fn apply(&self, f: impl Fn(f64) -> f64, x: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.vectors.tr_mul(x);
        for (c, &l) in coeffs.iter_mut().zip(self.values.iter()) {
            *c *= f(l);
        }
        &self.vectors * coeffs
    }

    /// Dense `V f(Λ) Vᵀ`.
    pub fn function_matrix(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let fl = f(l);
            scaled.column_mut(j).scale_mut(fl);
        }
        scaled * self.vectors.transpose()
    }
}

fn max_abs_real(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

fn max_abs_complex(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.norm()))
}

/// Largest `|a_ij - a_ji|` of a real square matrix.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetric eigendecomposition of a real matrix with residual check.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<SymEig> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = max_abs_real(m).max(1.0);
    let asym = max_asymmetry(m);
    if asym > HERMITIAN_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::Eigensolver(f64::NAN))?;
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    let residual = max_abs_real(&(&sym * &vectors - &vectors * DMatrix::from_diagonal(&values)));
    if residual > RESIDUAL_TOL * scale {
        return Err(Error::Eigensolver(residual));
    }
    Ok(SymEig { values, vectors })
}

/// A dense Hermitian matrix with a lazily computed, cached eigendecomposition.
#[derive(Debug)]
pub struct HermitianOperator {
    matrix: DMatrix<C64>,
    decomposition: OnceLock<Eigh>,
}

impl Clone for HermitianOperator {
    fn clone(&self) -> Self {
        let decomposition = OnceLock::new();
        if let Some(e) = self.decomposition.get() {
            let _ = decomposition.set(e.clone());
        }
        Self {
            matrix: self.matrix.clone(),
            decomposition,
        }
    }
}

impl HermitianOperator {
    /// Rejects matrices with `max |A - A†| > 1e-12 · max(1, max|A|)`.
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let scale = max_abs_complex(&matrix).max(1.0);
        let asym = max_abs_complex(&(&matrix - matrix.adjoint()));
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(asym));
        }
        // Exact Hermiticity for the solver.
        let matrix = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        Ok(Self {
            matrix,
            decomposition: OnceLock::new(),
        })
    }

    pub fn from_real_symmetric(m: &DMatrix<f64>) -> Result<Self> {
        Self::new(m.map(|x| C64::new(x, 0.0)))
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        let m = DMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|&x| C64::new(x, 0.0)),
        ));
        Self {
            matrix: m,
            decomposition: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Cached eigendecomposition (ascending eigenvalues).
    pub fn eigh(&self) -> Result<&Eigh> {
        if let Some(e) = self.decomposition.get() {
            return Ok(e);
        }
        let e = hermitian_eigh(&self.matrix)?;
        Ok(self.decomposition.get_or_init(|| e))
    }

    /// Spectral norm `max_i |λ_i|`.
    pub fn spectral_norm(&self) -> Result<f64> {
        let e = self.eigh()?;
        Ok(e.values.iter().fold(0.0_f64, |acc, x| acc.max(x.abs())))
    }

    /// `V f(Λ) V† ψ`. The result keeps whatever norm `f` produces.
    pub fn apply_function(&self, f: impl Fn(f64) -> C64, psi: &QuantumState) -> Result<QuantumState> {
        self.check_dim(psi)?;
        let e = self.eigh()?;
        let mut coeffs = e.vectors.ad_mul(psi.amplitudes());
        for (c, &l) in coeffs.iter_mut().zip(e.values.iter()) {
            *c *= f(l);
        }
        Ok(QuantumState::unchecked(&e.vectors * coeffs))
    }

    /// `e^{-iAτ} ψ`; `τ` may be negative.
    pub fn evolve(&self, tau: f64, psi: &QuantumState) -> Result<QuantumState> {
        self.apply_function(|l| C64::from_polar(1.0, -l * tau), psi)
    }

    /// Plain matrix-vector product `Aψ`.
    pub fn apply(&self, psi: &QuantumState) -> Result<QuantumState> {
        self.check_dim(psi)?;
        Ok(QuantumState::unchecked(&self.matrix * psi.amplitudes()))
    }

    fn check_dim(&self, psi: &QuantumState) -> Result<()> {
        if psi.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: psi.dim(),
            });
        }
        Ok(())
    }
}

/// Hermitian eigendecomposition with the residual contract enforced.
pub fn hermitian_eigh(m: &DMatrix<C64>) -> Result<Eigh> {
    let n = m.nrows();
    let scale = max_abs_complex(m).max(1.0);
    let eig = SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::Eigensolver(f64::NAN))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let lambda = DMatrix::from_diagonal(&values.map(|x| C64::new(x, 0.0)));
    let residual = max_abs_complex(&(m * &vectors - &vectors * lambda));
    if residual > RESIDUAL_TOL * scale {
        return Err(Error::Eigensolver(residual));
    }
    Ok(Eigh { values, vectors })
}

/// Whether a state is a unit vector or a recorded sub-normalized one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    Unit,
    Subnormalized { norm_sqr: f64 },
}

/// Tolerance on `|‖ψ‖ - 1|` for a state to count as unit.
pub const UNIT_TOL: f64 = 1e-12;

/// Complex amplitude vector over a labeled basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: DVector<C64>,
}

impl QuantumState {
    /// Normalizes the given amplitudes; rejects the zero vector.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidInput("cannot normalize a zero state".into()));
        }
        Ok(Self {
            amplitudes: amplitudes / C64::new(norm, 0.0),
        })
    }

    /// Accepts unit or sub-normalized amplitudes (‖ψ‖² ≤ 1 + 1e-12).
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let ns = amplitudes.norm_squared();
        if ns > 1.0 + UNIT_TOL || !ns.is_finite() {
            return Err(Error::InvalidInput(format!("squared norm {ns} exceeds 1")));
        }
        Ok(Self { amplitudes })
    }

    pub(crate) fn unchecked(amplitudes: DVector<C64>) -> Self {
        Self { amplitudes }
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_iterator(
            values.len(),
            values.iter().map(|&x| C64::new(x, 0.0)),
        ))
    }

    pub fn from_real_vector(v: &DVector<f64>) -> Result<Self> {
        Self::new(v.map(|x| C64::new(x, 0.0)))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut a = DVector::zeros(dim);
        a[index] = C64::new(1.0, 0.0);
        Self { amplitudes: a }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    pub fn normalization(&self) -> Normalization {
        let ns = self.norm_sqr();
        if (ns.sqrt() - 1.0).abs() <= UNIT_TOL {
            Normalization::Unit
        } else {
            Normalization::Subnormalized { norm_sqr: ns }
        }
    }

    pub fn is_unit(&self) -> bool {
        self.normalization() == Normalization::Unit
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QuantumState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Real parts, if every imaginary part is below `tol`.
    pub fn as_real(&self, tol: f64) -> Option<DVector<f64>> {
        if self.amplitudes.iter().all(|a| a.im.abs() <= tol) {
            Some(self.amplitudes.map(|a| a.re))
        } else {
            None
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}
