//! Ground-state preparation by Gaussian damping.
//!
//! After shifting `H` so its ground energy sits in `[0, 2ε_g]`, the operator
//! `e^{-tH²}` suppresses every excited component by at least
//! `e^{-tΔ²}` relative to the ground component. Post-selecting the
//! Gaussian ancilla on its initial state implements exactly this map, with
//! success probability `⟨ψ₀|e^{-2tH²}|ψ₀⟩`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{ancilla_evolve, AncillaGrid, DEGENERATE_PROBABILITY};
use crate::spectral::{HermitianOperator, QuantumState, C64};

/// Eigenvalues within this multiple of `max(1, ‖H‖)` of the lowest one are
/// treated as one ground space.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// The damping time is taken this fraction above the strict threshold.
pub const TIME_MARGIN: f64 = 1e-6;
/// Default `c` in the precision requirement `ε_g ≤ c·Δ/√ln(1/(ηε))`.
pub const DEFAULT_PRECISION_CONSTANT: f64 = 1.0;

/// Tolerance when checking stated hypotheses against the computed spectrum.
const HYPOTHESIS_TOL: f64 = 1e-9;

/// What the caller promises about the instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypotheses {
    /// Lower bound `Δ` on the spectral gap.
    pub gap: f64,
    /// Lower bound `η` on `|⟨ψ₀|v₀⟩|`, at most `1/√2`.
    pub overlap: f64,
    /// Target distance `ε` to the ground state.
    pub accuracy: f64,
    /// Estimate `E₀` of the ground energy.
    pub energy_estimate: f64,
    /// Precision `ε_g` of that estimate.
    pub energy_precision: f64,
}

/// The lowest eigenspace of the shifted Hamiltonian as seen from `ψ₀`.
#[derive(Debug, Clone)]
pub struct GroundSpace {
    /// Shifted ground energy.
    pub energy: f64,
    /// Shifted energy of the first level above the ground space.
    pub first_excited: Option<f64>,
    pub degeneracy: usize,
    /// Normalized projection of `ψ₀` onto the ground space.
    pub state: QuantumState,
    /// `‖Π_ground ψ₀‖`.
    pub overlap: f64,
}

impl GroundSpace {
    pub fn is_degenerate(&self) -> bool {
        self.degeneracy > 1
    }

    /// Measured spectral gap, if there is an excited level.
    pub fn gap(&self) -> Option<f64> {
        self.first_excited.map(|e| e - self.energy)
    }
}

/// A validated ground-state preparation instance.
#[derive(Debug, Clone)]
pub struct GroundStateProblem {
    hamiltonian: HermitianOperator,
    shifted: HermitianOperator,
    psi0: QuantumState,
    hypotheses: Hypotheses,
    ground: GroundSpace,
}

/// `H - (E₀ - ε_g)·I`.
pub fn shift_spectrum(h: &HermitianOperator, energy_estimate: f64, energy_precision: f64) -> Result<HermitianOperator> {
    if !energy_estimate.is_finite() || !energy_precision.is_finite() {
        return Err(invalid("energy estimate and precision must be finite"));
    }
    let shift = energy_estimate - energy_precision;
    let mut m = h.matrix().clone();
    for i in 0..m.nrows() {
        m[(i, i)] -= C64::new(shift, 0.0);
    }
    HermitianOperator::new(m)
}

/// Damping time `t = ln((1-η²)/(η²ε²)) / (2Δ²)`, raised by [`TIME_MARGIN`],
/// and the matching total evolution time `T = √(2t)`.
pub fn evolution_time(gap: f64, overlap: f64, accuracy: f64) -> Result<(f64, f64)> {
    check_parameters(gap, overlap, accuracy)?;
    let eta2 = overlap * overlap;
    let ratio = (1.0 - eta2) / (eta2 * accuracy * accuracy);
    let t = (ratio.ln() / (2.0 * gap * gap)).max(0.0) * (1.0 + TIME_MARGIN);
    Ok((t, (2.0 * t).sqrt()))
}

fn check_parameters(gap: f64, overlap: f64, accuracy: f64) -> Result<()> {
    if !(gap > 0.0) || !gap.is_finite() {
        return Err(invalid(format!("gap bound must be positive, got {gap}")));
    }
    if !(overlap > 0.0 && overlap <= std::f64::consts::FRAC_1_SQRT_2) {
        return Err(invalid(format!("overlap bound must lie in (0, 1/√2], got {overlap}")));
    }
    if !(accuracy > 0.0 && accuracy < 1.0) {
        return Err(invalid(format!("accuracy must lie in (0, 1), got {accuracy}")));
    }
    Ok(())
}

impl GroundStateProblem {
    pub fn new(hamiltonian: HermitianOperator, psi0: QuantumState, hypotheses: Hypotheses) -> Result<Self> {
        Self::with_precision_constant(hamiltonian, psi0, hypotheses, DEFAULT_PRECISION_CONSTANT)
    }

    /// Validates the hypotheses, including every one that the dense spectrum
    /// can confirm: gap, overlap and energy precision.
    pub fn with_precision_constant(
        hamiltonian: HermitianOperator,
        psi0: QuantumState,
        hypotheses: Hypotheses,
        precision_constant: f64,
    ) -> Result<Self> {
        let Hypotheses { gap, overlap, accuracy, energy_estimate, energy_precision } = hypotheses;
        check_parameters(gap, overlap, accuracy)?;
        if psi0.dim() != hamiltonian.dim() {
            return Err(Error::DimensionMismatch { expected: hamiltonian.dim(), got: psi0.dim() });
        }
        if !psi0.is_unit() {
            return Err(invalid("initial state must be normalized"));
        }
        if !(energy_precision > 0.0) {
            return Err(invalid(format!("energy precision must be positive, got {energy_precision}")));
        }
        let allowed = precision_constant * gap / (1.0 / (overlap * accuracy)).ln().sqrt();
        if energy_precision > allowed {
            return Err(invalid(format!(
                "energy precision {energy_precision} exceeds c·Δ/√ln(1/(ηε)) = {allowed}"
            )));
        }
        let shifted = shift_spectrum(&hamiltonian, energy_estimate, energy_precision)?;
        let ground = ground_space(&shifted, &psi0)?;

        let true_energy = ground.energy + energy_estimate - energy_precision;
        if (true_energy - energy_estimate).abs() > energy_precision * (1.0 + HYPOTHESIS_TOL) + HYPOTHESIS_TOL {
            return Err(invalid(format!(
                "ground energy {true_energy} is farther than {energy_precision} from the estimate {energy_estimate}"
            )));
        }
        if let Some(measured) = ground.gap() {
            if measured < gap * (1.0 - HYPOTHESIS_TOL) {
                return Err(invalid(format!("measured gap {measured} is below the stated bound {gap}")));
            }
        }
        if ground.overlap < overlap - HYPOTHESIS_TOL {
            return Err(invalid(format!(
                "ground-space overlap {} is below the stated bound {overlap}",
                ground.overlap
            )));
        }
        Ok(Self { hamiltonian, shifted, psi0, hypotheses, ground })
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    /// The Hamiltonian after [`shift_spectrum`].
    pub fn shifted(&self) -> &HermitianOperator {
        &self.shifted
    }

    pub fn initial_state(&self) -> &QuantumState {
        &self.psi0
    }

    pub fn hypotheses(&self) -> &Hypotheses {
        &self.hypotheses
    }

    pub fn ground_space(&self) -> &GroundSpace {
        &self.ground
    }

    /// `(t, T)` from the stated hypotheses.
    pub fn evolution_time(&self) -> (f64, f64) {
        let h = &self.hypotheses;
        evolution_time(h.gap, h.overlap, h.accuracy).expect("hypotheses validated at construction")
    }

    /// `((1-η²)/η²)·e^{-2t(λ₁-λ₀)²}`, the guaranteed bound on the squared
    /// error, using the computed spectrum.
    pub fn error_certificate(&self, t: f64) -> f64 {
        let eta2 = self.hypotheses.overlap.powi(2);
        match self.ground.gap() {
            Some(g) => (1.0 - eta2) / eta2 * (-2.0 * t * g * g).exp(),
            None => 0.0,
        }
    }

    fn finish(&self, state: QuantumState, success_probability: f64, t: f64, ancilla_fidelity: Option<f64>) -> Preparation {
        let v0 = &self.ground.state;
        let overlap = state.inner(v0);
        // align the global phase so that ⟨φ|v₀⟩ ≥ 0
        let phase = if overlap.norm() > 0.0 { overlap / overlap.norm() } else { C64::new(1.0, 0.0) };
        let aligned = state.amplitudes() * phase;
        let achieved_error = (aligned - v0.amplitudes()).norm();
        Preparation {
            state,
            success_probability,
            achieved_error,
            t,
            total_time: (2.0 * t).sqrt(),
            shifted_ground_energy: self.ground.energy,
            degenerate: self.ground.is_degenerate(),
            ancilla_fidelity,
        }
    }
}

fn ground_space(shifted: &HermitianOperator, psi0: &QuantumState) -> Result<GroundSpace> {
    let e = shifted.eigh()?;
    let scale = e.values.iter().fold(1.0_f64, |a, x| a.max(x.abs()));
    let lowest = e.values[0];
    let degeneracy = e.values.iter().take_while(|&&l| l - lowest <= DEGENERACY_TOL * scale).count();
    let c = e.vectors.ad_mul(psi0.amplitudes());
    let mut projected = DVector::from_element(c.len(), C64::new(0.0, 0.0));
    for j in 0..degeneracy {
        projected[j] = c[j];
    }
    let overlap = projected.norm();
    if overlap <= 1e-12 {
        return Err(Error::NoGroundOverlap);
    }
    let state = QuantumState::normalized(&e.vectors * projected)?;
    Ok(GroundSpace {
        energy: lowest,
        first_excited: e.values.get(degeneracy).copied(),
        degeneracy,
        state,
        overlap,
    })
}

/// Output of a preparation run.
#[derive(Debug, Clone)]
pub struct Preparation {
    /// Normalized post-selected state `φ`.
    pub state: QuantumState,
    pub success_probability: f64,
    /// `‖φ - v₀‖` after aligning the global phase.
    pub achieved_error: f64,
    pub t: f64,
    /// `T = √(2t)`.
    pub total_time: f64,
    pub shifted_ground_energy: f64,
    pub degenerate: bool,
    /// Fidelity with the exact damped state, for the ancilla route.
    pub ancilla_fidelity: Option<f64>,
}

impl Preparation {
    pub fn report(&self, problem: &GroundStateProblem) -> GroundStateReport {
        let h = problem.hypotheses();
        GroundStateReport {
            delta: h.gap,
            eta: h.overlap,
            epsilon: h.accuracy,
            epsilon_g: h.energy_precision,
            t: self.t,
            total_time: self.total_time,
            success_prob: self.success_probability,
            achieved_error: self.achieved_error,
            degenerate: self.degenerate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateReport {
    pub delta: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub epsilon_g: f64,
    pub t: f64,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub success_prob: f64,
    pub achieved_error: f64,
    pub degenerate: bool,
}

/// `e^{-tH²}ψ₀` normalized, at the time chosen from the hypotheses.
pub fn prepare(problem: &GroundStateProblem) -> Result<Preparation> {
    prepare_at(problem, problem.evolution_time().0)
}

/// The same map at an explicit damping time.
pub fn prepare_at(problem: &GroundStateProblem, t: f64) -> Result<Preparation> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("damping time must be >= 0, got {t}")));
    }
    let e = problem.shifted.eigh()?;
    let mut c = e.vectors.ad_mul(problem.psi0.amplitudes());
    for (ci, &l) in c.iter_mut().zip(e.values.iter()) {
        *ci *= (-t * l * l).exp();
    }
    let probability = c.norm_squared();
    if probability < DEGENERATE_PROBABILITY {
        return Err(Error::DegeneratePostSelection(probability));
    }
    let state = QuantumState::normalized(&e.vectors * c)?;
    Ok(problem.finish(state, probability, t, None))
}

/// The ancilla-grid simulation of the same preparation.
pub fn prepare_via_ancilla(problem: &GroundStateProblem, grid: &AncillaGrid) -> Result<Preparation> {
    prepare_via_ancilla_at(problem, grid, problem.evolution_time().0)
}

pub fn prepare_via_ancilla_at(problem: &GroundStateProblem, grid: &AncillaGrid, t: f64) -> Result<Preparation> {
    let outcome = ancilla_evolve(&problem.shifted, &problem.psi0, t, grid)?;
    Ok(problem.finish(outcome.state, outcome.probability, t, Some(outcome.fidelity)))
}

/// A random instance: `H = (A + A†)/4` with Gaussian `A`, the measured gap,
/// `ψ₀ = η v₀ + √(1-η²) w` for a random unit `w ⟂ v₀`, and an energy estimate
/// off by a uniform fraction of `ε_g = Δ / (10·√ln(1/(ηε)))`. `η` is drawn
/// from `[0.1, 0.7]` when not given.
pub fn random_problem<R: Rng + ?Sized>(
    dim: usize,
    overlap: Option<f64>,
    accuracy: f64,
    rng: &mut R,
) -> Result<GroundStateProblem> {
    if dim < 2 {
        return Err(invalid("random instances need dimension at least 2"));
    }
    let a = DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let h = HermitianOperator::new((&a + a.adjoint()) * C64::new(0.25, 0.0))?;
    let e = h.eigh()?.clone();
    let gap = e.values[1] - e.values[0];
    let eta = match overlap {
        Some(eta) => eta,
        None => rng.random_range(0.1..0.7),
    };
    check_parameters(gap, eta, accuracy)?;
    let v0 = e.vectors.column(0).into_owned();
    let raw = DVector::from_fn(dim, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let w = (&raw - &v0 * v0.dotc(&raw)).normalize();
    let psi = QuantumState::normalized(v0 * C64::new(eta, 0.0) + w * C64::new((1.0 - eta * eta).sqrt(), 0.0))?;
    let energy_precision = 0.1 * gap / (1.0 / (eta * accuracy)).ln().sqrt();
    let energy_estimate = e.values[0] + rng.random_range(-0.9..0.9) * energy_precision;
    GroundStateProblem::new(
        h,
        psi,
        Hypotheses { gap, overlap: eta, accuracy, energy_estimate, energy_precision },
    )
}
