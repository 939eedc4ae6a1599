//! Evolution for a Gaussian-distributed random time.
//!
//! Running `e^{-iHτ}` with `τ = √(2t)·z`, `z ~ N(0,1)`, turns a pure state
//! into the mixture
//!
//! ```text
//! ρ_t[i,j] = c_i c̄_j e^{-t(λ_i - λ_j)²}     (eigenbasis of H, c = V†ψ₀)
//! ```
//!
//! whose overlap with any projector dominates the imaginary-time quantity
//! `⟨ψ₀|e^{-tH²} Π e^{-tH²}|ψ₀⟩`. This module evaluates both sides exactly,
//! estimates the left side by sampling, simulates the same damping with a
//! discretized Gaussian ancilla, and provides the classical fast-forwarding
//! bound `‖Π e^{(D²-I)t}ψ₀‖²`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::markov::Discriminant;
use crate::spectral::{Eigh, HermitianOperator, QuantumState, C64};
use crate::stats::McEstimate;

/// Trace and coefficient-containment tolerance.
pub const TRACE_TOL: f64 = 1e-10;
/// Values below `-NEGATIVE_TOL` are reported as errors rather than clamped.
pub const NEGATIVE_TOL: f64 = 1e-10;
/// Idempotence tolerance for dense projectors.
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Post-selection probabilities below this are degenerate.
pub const DEGENERATE_PROBABILITY: f64 = 1e-12;

/// Anything with a Hermitian eigendecomposition.
///
/// The eigenbasis may be partial, spanning only an invariant subspace that
/// contains every state it is used with. Coefficient extraction verifies the
/// containment.
pub trait Spectrum {
    fn dim(&self) -> usize;
    fn eigh(&self) -> Result<&Eigh>;
}

impl Spectrum for HermitianOperator {
    fn dim(&self) -> usize {
        HermitianOperator::dim(self)
    }

    fn eigh(&self) -> Result<&Eigh> {
        HermitianOperator::eigh(self)
    }
}

/// `V†ψ`, rejecting states with weight outside the span of `V`.
fn coefficients(e: &Eigh, psi: &QuantumState) -> Result<DVector<C64>> {
    if psi.dim() != e.vectors.nrows() {
        return Err(Error::DimensionMismatch {
            expected: e.vectors.nrows(),
            got: psi.dim(),
        });
    }
    let c = e.vectors.ad_mul(psi.amplitudes());
    let missing = (psi.norm_sqr() - c.norm_squared()).abs();
    if missing > TRACE_TOL {
        return Err(Error::Invariant {
            what: "state has weight outside the eigenbasis span".into(),
            residual: missing,
        });
    }
    Ok(c)
}

/// `τ = √(2t)·z` with `z` standard normal. Negative draws are kept.
///
/// # Panics
/// If `t` is negative or not finite.
pub fn sample_evolution_time<R: Rng + ?Sized>(t: f64, rng: &mut R) -> f64 {
    assert!(t >= 0.0 && t.is_finite(), "evolution-time scale must be >= 0, got {t}");
    let z: f64 = rng.sample(StandardNormal);
    (2.0 * t).sqrt() * z
}

/// Expected `|τ|` for a given damping time: `2√(t/π)`.
pub fn expected_evolution_time(t: f64) -> f64 {
    2.0 * (t / std::f64::consts::PI).sqrt()
}

/// Implicit eigenbasis form of the averaged state.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    values: DVector<f64>,
    vectors: DMatrix<C64>,
    coefficients: DVector<C64>,
    t: f64,
}

impl SpectralDensity {
    /// Density of `ψ₀` under the spectrum `e` after damping time `t`.
    pub fn from_eigh(e: &Eigh, psi0: &QuantumState, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(invalid(format!("damping time must be >= 0, got {t}")));
        }
        let coefficients = coefficients(e, psi0)?;
        Ok(Self {
            values: e.values.clone(),
            vectors: e.vectors.clone(),
            coefficients,
            t,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    pub fn coefficients(&self) -> &DVector<C64> {
        &self.coefficients
    }

    /// `Σ|c_i|²`, equal to `‖ψ₀‖²`.
    pub fn trace(&self) -> f64 {
        self.coefficients.norm_squared()
    }

    /// `ρ_t[i,j]` in the eigenbasis.
    pub fn element(&self, i: usize, j: usize) -> C64 {
        let gap = self.values[i] - self.values[j];
        self.coefficients[i] * self.coefficients[j].conj() * (-self.t * gap * gap).exp()
    }

    /// Eigenbasis matrix `ρ_t[i,j]`.
    pub fn eigenbasis_matrix(&self) -> DMatrix<C64> {
        let k = self.values.len();
        DMatrix::from_fn(k, k, |i, j| self.element(i, j))
    }

    /// Dense computational-basis matrix `V ρ_t V†`; meant for small checks.
    pub fn to_dense(&self) -> DMatrix<C64> {
        &self.vectors * self.eigenbasis_matrix() * self.vectors.adjoint()
    }
}

/// Spectral density of `ψ₀` under `H` after damping time `t`.
pub fn exact_density<S: Spectrum + ?Sized>(h: &S, psi0: &QuantumState, t: f64) -> Result<SpectralDensity> {
    SpectralDensity::from_eigh(h.eigh()?, psi0, t)
}

/// Orthogonal projector in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    /// Projector onto the basis states whose flag is set.
    Diagonal(Vec<bool>),
    Dense(DMatrix<C64>),
}

impl Projector {
    pub fn identity(dim: usize) -> Self {
        Projector::Diagonal(vec![true; dim])
    }

    pub fn zero(dim: usize) -> Self {
        Projector::Diagonal(vec![false; dim])
    }

    pub fn from_indices(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![false; dim];
        for i in indices {
            if i >= dim {
                return Err(invalid(format!("projector index {i} out of range for dimension {dim}")));
            }
            mask[i] = true;
        }
        Ok(Projector::Diagonal(mask))
    }

    /// Validates Hermiticity and `‖Π² - Π‖_max ≤ 1e-10`.
    pub fn dense(matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let herm = (&matrix - matrix.adjoint()).iter().fold(0.0_f64, |a, x| a.max(x.norm()));
        let idem = (&matrix * &matrix - &matrix).iter().fold(0.0_f64, |a, x| a.max(x.norm()));
        let residual = herm.max(idem);
        if residual > PROJECTOR_TOL {
            return Err(Error::NotProjector(residual));
        }
        Ok(Projector::Dense(matrix))
    }

    pub fn dim(&self) -> usize {
        match self {
            Projector::Diagonal(mask) => mask.len(),
            Projector::Dense(m) => m.nrows(),
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        match self {
            Projector::Diagonal(mask) => {
                DVector::from_fn(v.len(), |i, _| if mask[i] { v[i] } else { C64::new(0.0, 0.0) })
            }
            Projector::Dense(m) => m * v,
        }
    }

    /// `⟨v|Π|v⟩`.
    pub fn expectation(&self, v: &DVector<C64>) -> f64 {
        match self {
            Projector::Diagonal(mask) => v
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(a, _)| a.norm_sqr())
                .sum(),
            Projector::Dense(m) => v.dotc(&(m * v)).re,
        }
    }

    /// `G[i,j] = ⟨v_i|Π|v_j⟩` for the columns of `vectors`.
    pub fn gram(&self, vectors: &DMatrix<C64>) -> DMatrix<C64> {
        match self {
            Projector::Diagonal(mask) => {
                let rows: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
                let sub = vectors.select_rows(rows.iter());
                sub.ad_mul(&sub)
            }
            Projector::Dense(m) => vectors.ad_mul(&(m * vectors)),
        }
    }
}

fn checked_probability(p: f64) -> Result<f64> {
    if p < -NEGATIVE_TOL || !p.is_finite() {
        return Err(Error::NegativeProbability(p));
    }
    Ok(p.max(0.0))
}

/// `Tr[Π ρ_t]`.
pub fn projected_probability(rho: &SpectralDensity, projector: &Projector) -> Result<f64> {
    projector.check_dim(rho.dim())?;
    let g = projector.gram(&rho.vectors);
    let k = rho.values.len();
    let mut total = C64::new(0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            // Tr[Π |v_i⟩⟨v_j|] = ⟨v_j|Π|v_i⟩
            total += rho.element(i, j) * g[(j, i)];
        }
    }
    checked_probability(total.re)
}

/// `e^{-tH²} ψ₀` (not renormalized).
pub fn imaginary_time_state<S: Spectrum + ?Sized>(h: &S, psi0: &QuantumState, t: f64) -> Result<QuantumState> {
    let e = h.eigh()?;
    let mut c = coefficients(e, psi0)?;
    for (ci, &l) in c.iter_mut().zip(e.values.iter()) {
        *ci *= (-t * l * l).exp();
    }
    Ok(QuantumState::unchecked(&e.vectors * c))
}

/// `⟨ψ₀|e^{-tH²} Π e^{-tH²}|ψ₀⟩`.
pub fn imaginary_time_bound<S: Spectrum + ?Sized>(
    h: &S,
    psi0: &QuantumState,
    projector: &Projector,
    t: f64,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(invalid(format!("damping time must be >= 0, got {t}")));
    }
    projector.check_dim(h.dim())?;
    let phi = imaginary_time_state(h, psi0, t)?;
    checked_probability(projector.expectation(phi.amplitudes()))
}

/// Mean of `⟨ψ_τ|Π|ψ_τ⟩` over sampled evolution times.
pub fn monte_carlo_probability<S: Spectrum + ?Sized, R: Rng + ?Sized>(
    h: &S,
    psi0: &QuantumState,
    projector: &Projector,
    t: f64,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("damping time must be >= 0, got {t}")));
    }
    projector.check_dim(h.dim())?;
    let e = h.eigh()?;
    let c = coefficients(e, psi0)?;
    let g = projector.gram(&e.vectors);
    let mut b = c.clone();
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let tau = sample_evolution_time(t, rng);
            for ((bi, ci), &l) in b.iter_mut().zip(c.iter()).zip(e.values.iter()) {
                *bi = ci * C64::from_polar(1.0, -l * tau);
            }
            b.dotc(&(&g * &b)).re
        })
        .collect();
    Ok(McEstimate::from_samples(&values))
}

/// Uniform ancilla grid on `[-L, L]` with `N` (odd) points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AncillaGrid {
    half_width: f64,
    points: usize,
}

impl Default for AncillaGrid {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            points: 2049,
        }
    }
}

/// Quadrature-norm tolerance of the discretized ancilla state.
pub const ANCILLA_NORM_TOL: f64 = 1e-8;

impl AncillaGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width >= 8.0) || !half_width.is_finite() {
            return Err(invalid(format!("ancilla half-width must be >= 8, got {half_width}")));
        }
        if points < 3 || points.is_multiple_of(2) {
            return Err(invalid(format!("ancilla point count must be odd and >= 3, got {points}")));
        }
        Ok(Self { half_width, points })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dz = self.spacing();
        (0..self.points).map(|k| -self.half_width + k as f64 * dz).collect()
    }

    /// Ancilla wavefunction `e^{-z²/4} / (2π)^{1/4}`.
    pub fn wavefunction(z: f64) -> f64 {
        (-z * z / 4.0).exp() / (2.0 * std::f64::consts::PI).powf(0.25)
    }

    /// Trapezoid estimate of `∫ψ_g²` on the grid.
    pub fn quadrature_norm(&self) -> f64 {
        self.raw_amplitudes().iter().map(|a| a * a).sum()
    }

    fn raw_amplitudes(&self) -> Vec<f64> {
        let dz = self.spacing();
        let last = self.points - 1;
        self.nodes()
            .iter()
            .enumerate()
            .map(|(k, &z)| {
                let w = if k == 0 || k == last { dz / 2.0 } else { dz };
                w.sqrt() * Self::wavefunction(z)
            })
            .collect()
    }

    /// Unit-norm discrete ancilla amplitudes `a_k = √w_k ψ_g(z_k)`.
    pub fn amplitudes(&self) -> Result<Vec<f64>> {
        let norm = self.quadrature_norm();
        if (norm - 1.0).abs() > ANCILLA_NORM_TOL {
            return Err(Error::Invariant {
                what: "discretized ancilla norm".into(),
                residual: (norm - 1.0).abs(),
            });
        }
        let scale = norm.sqrt();
        Ok(self.raw_amplitudes().into_iter().map(|a| a / scale).collect())
    }

    /// Smallest odd `N` at this half-width with `Δz ≤ π / (4 θ ‖H‖)`.
    pub fn required_points(&self, theta_norm: f64) -> usize {
        if theta_norm <= 0.0 {
            return 3;
        }
        let max_dz = std::f64::consts::PI / (4.0 * theta_norm);
        let intervals = (2.0 * self.half_width / max_dz).ceil() as usize;
        let intervals = intervals + intervals % 2;
        (intervals + 1).max(3)
    }
}

/// Result of the ancilla simulation.
#[derive(Debug, Clone)]
pub struct AncillaOutcome {
    /// Normalized first-register state after post-selection.
    pub state: QuantumState,
    /// Post-selection probability, targeting `⟨ψ₀|e^{-2tH²}|ψ₀⟩`.
    pub probability: f64,
    /// `|⟨state|e^{-tH²}ψ₀⟩|²` with the target normalized.
    pub fidelity: f64,
}

/// Simulates the system-plus-Gaussian-ancilla circuit on a grid.
///
/// The joint state `Σ_k a_k (e^{-iθHz_k} ψ₀) ⊗ |z_k⟩`, `θ = √(2t)`, is
/// projected onto `Σ_k a_k |z_k⟩`. The amplitude left on the system is
/// `Σ_k a_k² e^{-iθHz_k} ψ₀`, evaluated per eigenvalue.
pub fn ancilla_evolve<S: Spectrum + ?Sized>(
    h: &S,
    psi0: &QuantumState,
    t: f64,
    grid: &AncillaGrid,
) -> Result<AncillaOutcome> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("damping time must be >= 0, got {t}")));
    }
    let e = h.eigh()?;
    let c = coefficients(e, psi0)?;
    let theta = (2.0 * t).sqrt();
    let norm = e.values.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let required = grid.required_points(theta * norm);
    if grid.points() < required {
        return Err(Error::GridTooCoarse { required });
    }
    let weights: Vec<f64> = grid.amplitudes()?.into_iter().map(|a| a * a).collect();
    let nodes = grid.nodes();
    let mut out = c.clone();
    for (oi, &l) in out.iter_mut().zip(e.values.iter()) {
        let mut acc = C64::new(0.0, 0.0);
        for (&w, &z) in weights.iter().zip(&nodes) {
            acc += C64::from_polar(w, -theta * l * z);
        }
        *oi *= acc;
    }
    let probability = out.norm_squared();
    if probability < DEGENERATE_PROBABILITY {
        return Err(Error::DegeneratePostSelection(probability));
    }
    let state = QuantumState::normalized(&e.vectors * &out)?;
    let target = imaginary_time_state(h, psi0, t)?;
    let overlap = state.inner(&target).norm_sqr() / target.norm_sqr();
    Ok(AncillaOutcome {
        state,
        probability,
        fidelity: overlap,
    })
}

/// `‖Π e^{(D²-I)t} ψ₀‖²` on the node space.
pub fn fast_forward_bound(d: &Discriminant, psi0: &QuantumState, projector: &Projector, t: f64) -> Result<f64> {
    let n = d.n();
    if psi0.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: psi0.dim() });
    }
    projector.check_dim(n)?;
    if !(t >= 0.0) {
        return Err(invalid(format!("time must be >= 0, got {t}")));
    }
    let f = |l: f64| ((l * l - 1.0) * t).exp();
    let re = d.apply(f, &psi0.amplitudes().map(|a| a.re));
    let im = d.apply(f, &psi0.amplitudes().map(|a| a.im));
    let phi = DVector::from_fn(n, |i, _| C64::new(re[i], im[i]));
    checked_probability(projector.expectation(&phi))
}
