//! Classical joint-event probabilities behind the search lower bound, and
//! numerical checks of the comparison inequalities that connect them.
//!
//! For a reversible chain the symmetrization `√π P (√π)⁻¹` is the
//! discriminant `D`, so with `|π_U⟩ = π_U/π(U)` as a start distribution and
//! `|1_U⟩` as the final indicator,
//!
//! ```text
//! Pr_{π_U}(X_t ∈ M, X_{t+t'} ∉ M) = ⟨a| f_t(D) Π_M f_t'(D) |b⟩
//! a_x = √π_x / π(U),  b_x = √π_x   (x ∈ U, zero on M)
//! ```
//!
//! where `f_t(μ) = e^{t(μ^k - 1)}` in continuous time and `μ^{kt}` in
//! discrete time (`k = 1` for steps of `P`, `k = 2` for steps of `P²`).
//! [`JointEvent`] diagonalizes once; every time pair is then an `n × n`
//! bilinear form, and window sums and integrals separate per mode.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::markov::{
    discriminant, interpolated_discriminant, interpolated_stationary, sample_ct_trajectory, state_at, CtMode,
    Discriminant, MarkedSet, MarkovChain,
};
use crate::search::{GridSpacing, InterpolationSchedule};
use crate::stats::McEstimate;

/// Slack allowed on exact inequality checks.
pub const MARGIN_TOL: f64 = 1e-10;
/// Quadrature error budgets above this fraction of the compared quantity make
/// a check inconclusive.
pub const BUDGET_FRACTION: f64 = 0.01;
/// Integration window of the continuous-time comparison, in units of `T`.
pub const CT_WINDOW: f64 = 40.0;
/// Constant of the continuous-versus-discrete comparison.
pub const CT_DT_CONSTANT: f64 = 1.0 / 160.0;
/// Constant of the lazy-square comparison.
pub const LAZY_SQUARE_CONSTANT: f64 = 1.0 / 16.0;
/// Time window of the randomized continuous-time bound, in units of `T`.
pub const WIDE_WINDOW: f64 = 960.0;
/// Time window of the discrete-time statement, in units of `T`.
pub const NARROW_WINDOW: f64 = 24.0;
/// Largest marked mass the randomized bound assumes.
pub const MAX_MARKED_MASS: f64 = 1.0 / 9.0;
/// Smallest `T / HT` the randomized bound assumes.
pub const MIN_HORIZON_RATIO: f64 = 3.0;

const PROBABILITY_TOL: f64 = 1e-10;

/// Which transition matrix drives one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// Steps of `P`; continuous-time generator `P - I`.
    Plain,
    /// Steps of `P²`; continuous-time generator `P² - I`.
    #[default]
    Squared,
}

impl Kernel {
    fn power(self) -> i32 {
        match self {
            Kernel::Plain => 1,
            Kernel::Squared => 2,
        }
    }
}

/// Spectral form of `t, t' ↦ Pr_{π_U}(X_t ∈ M, X_{t+t'} ∉ M)`.
#[derive(Debug, Clone)]
pub struct JointEvent {
    kernel: Kernel,
    /// Eigenvalues of `D`.
    modes: DVector<f64>,
    /// Start weights in the eigenbasis.
    start: DVector<f64>,
    /// End weights in the eigenbasis.
    end: DVector<f64>,
    /// `Wᵀ Π_M W`.
    gram: DMatrix<f64>,
}

impl JointEvent {
    /// Requires an irreducible chain and `∅ ≠ M ≠ V`.
    pub fn new(chain: &MarkovChain, marked: &MarkedSet, kernel: Kernel) -> Result<Self> {
        marked.check_chain(chain)?;
        marked.require_proper()?;
        let pi = chain.pi()?;
        let d = discriminant(chain)?;
        Self::from_parts(&d, pi, marked, kernel)
    }

    /// The same quantity for the interpolated chain `P(s)`, built from the
    /// base discriminant without forming `P(s)`.
    pub fn interpolated(
        chain: &MarkovChain,
        base: &Discriminant,
        marked: &MarkedSet,
        s: f64,
        kernel: Kernel,
    ) -> Result<Self> {
        marked.require_proper()?;
        let pi = interpolated_stationary(chain, marked, s)?;
        let d = interpolated_discriminant(base, marked, s)?;
        Self::from_parts(&d, &pi, marked, kernel)
    }

    fn from_parts(d: &Discriminant, pi: &DVector<f64>, marked: &MarkedSet, kernel: Kernel) -> Result<Self> {
        let n = d.n();
        if pi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: pi.len() });
        }
        let unmarked_mass = 1.0 - marked.mass(pi);
        if !(unmarked_mass > 0.0) {
            return Err(invalid("unmarked set carries no stationary mass"));
        }
        let root_u = DVector::from_fn(n, |x, _| if marked.contains(x) { 0.0 } else { pi[x].sqrt() });
        let w = d.eigenvectors();
        let end = w.tr_mul(&root_u);
        let start = &end / unmarked_mass;
        let rows = DMatrix::from_fn(marked.len(), n, |r, j| w[(marked.members()[r], j)]);
        let gram = rows.tr_mul(&rows);
        Ok(Self {
            kernel,
            modes: d.eigenvalues().clone(),
            start,
            end,
            gram,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn n(&self) -> usize {
        self.modes.len()
    }

    /// Continuous-time decay rates `μ^k - 1` (all `≤ 0`).
    pub fn rates(&self) -> DVector<f64> {
        let k = self.kernel.power();
        self.modes.map(|m| m.powi(k) - 1.0)
    }

    fn form(&self, left: &DVector<f64>, right: &DVector<f64>) -> f64 {
        let u = self.start.component_mul(left);
        let v = self.end.component_mul(right);
        u.dot(&(&self.gram * v))
    }

    /// Continuous-time value at real times `t, t' ≥ 0`.
    pub fn ct(&self, t: f64, t2: f64) -> Result<f64> {
        check_time(t)?;
        check_time(t2)?;
        let rates = self.rates();
        let left = rates.map(|r| (r * t).exp());
        let right = rates.map(|r| (r * t2).exp());
        checked(self.form(&left, &right))
    }

    /// Discrete-time value after `t` then `t'` steps.
    pub fn dt(&self, t: u32, t2: u32) -> Result<f64> {
        let k = self.kernel.power();
        let left = self.modes.map(|m| m.powi(k * t as i32));
        let right = self.modes.map(|m| m.powi(k * t2 as i32));
        checked(self.form(&left, &right))
    }

    /// `Σ_{t,t'=1}^{T}` of the discrete-time values.
    pub fn dt_window_sum(&self, horizon: u32) -> f64 {
        let k = self.kernel.power();
        let sums = self.modes.map(|m| {
            let step = m.powi(k);
            let mut acc = 0.0;
            let mut term = 1.0;
            for _ in 0..horizon {
                term *= step;
                acc += term;
            }
            acc
        });
        self.form(&sums, &sums)
    }

    /// Trapezoid approximation of `∫₀^L ∫₀^L` of the continuous-time values on
    /// a uniform tensor grid with `intervals` cells per axis.
    pub fn ct_window_trapezoid(&self, length: f64, intervals: usize) -> f64 {
        let weights = self.rates().map(|r| trapezoid_exponential(r, length, intervals));
        self.form(&weights, &weights)
    }

    /// The same double integral in closed form.
    pub fn ct_window_integral(&self, length: f64) -> f64 {
        let weights = self.rates().map(|r| {
            if r == 0.0 {
                length
            } else {
                (r * length).exp_m1() / r
            }
        });
        self.form(&weights, &weights)
    }
}

/// Trapezoid rule for `∫₀^L e^{rt} dt` with `N` equal cells, summed as a
/// geometric series.
fn trapezoid_exponential(rate: f64, length: f64, intervals: usize) -> f64 {
    let n = intervals.max(1);
    let h = length / n as f64;
    let x = rate * h;
    let ends = 0.5 * (1.0 + (rate * length).exp());
    let interior = if x == 0.0 || n == 1 {
        (n - 1) as f64
    } else {
        // Σ_{k=1}^{N-1} q^k = q (q^{N-1} - 1) / (q - 1)
        x.exp() * (x * (n - 1) as f64).exp_m1() / x.exp_m1()
    };
    h * (ends + interior)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("times must be finite and >= 0, got {t}")));
    }
    Ok(())
}

fn checked(p: f64) -> Result<f64> {
    if !p.is_finite() || p < -PROBABILITY_TOL {
        return Err(Error::NegativeProbability(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `Pr_{π_U}(X_t ∈ M, X_{t+t'} ∉ M)` for the continuous-time chain with
/// generator `P² - I`.
pub fn joint_event_ct(chain: &MarkovChain, marked: &MarkedSet, t: f64, t2: f64) -> Result<f64> {
    JointEvent::new(chain, marked, Kernel::Squared)?.ct(t, t2)
}

/// `⟨π_U| P^t Π_M P^{t'} |1_U⟩`.
pub fn joint_event_dt(chain: &MarkovChain, marked: &MarkedSet, t: u32, t2: u32) -> Result<f64> {
    JointEvent::new(chain, marked, Kernel::Plain)?.dt(t, t2)
}

/// Trajectory estimate of the continuous-time joint event. Starts are drawn
/// from `π_U`; [`Kernel::Squared`] runs the clock on `P²`.
pub fn sample_joint_event_ct<R: Rng + ?Sized>(
    chain: &MarkovChain,
    marked: &MarkedSet,
    t: f64,
    t2: f64,
    kernel: Kernel,
    trials: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    check_time(t)?;
    check_time(t2)?;
    marked.check_chain(chain)?;
    marked.require_proper()?;
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let walk = match kernel {
        Kernel::Plain => chain.clone(),
        Kernel::Squared => chain.square()?,
    };
    let pi = chain.pi()?;
    let unmarked = marked.unmarked();
    let mut cumulative = Vec::with_capacity(unmarked.len());
    let mut acc = 0.0;
    for &x in &unmarked {
        acc += pi[x];
        cumulative.push(acc);
    }
    let mut hits = Vec::with_capacity(trials);
    for _ in 0..trials {
        let u = rng.random::<f64>() * acc;
        let idx = cumulative.partition_point(|&c| c <= u).min(unmarked.len() - 1);
        let path = sample_ct_trajectory(&walk, unmarked[idx], t + t2, CtMode::WithSelfLoops, rng)?;
        let hit = marked.contains(state_at(&path, t)) && !marked.contains(state_at(&path, t + t2));
        hits.push(if hit { 1.0 } else { 0.0 });
    }
    Ok(McEstimate::from_samples(&hits))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Outcome of one inequality check `lhs ≥ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub lemma: String,
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub error_budget: f64,
    pub verdict: Verdict,
}

impl VerificationReport {
    fn decide(lemma: &str, instance: String, lhs: f64, rhs: f64, error_budget: f64) -> Self {
        let margin = lhs - rhs;
        let verdict = if error_budget > BUDGET_FRACTION * rhs.abs() && error_budget > MARGIN_TOL {
            Verdict::Inconclusive
        } else if margin >= -MARGIN_TOL - error_budget {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        Self {
            lemma: lemma.to_string(),
            instance,
            lhs,
            rhs,
            margin,
            error_budget,
            verdict,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

fn describe(chain: &MarkovChain, marked: &MarkedSet) -> String {
    format!("n={} M={:?}{}", chain.n(), marked.members(), if chain.is_lazy() { " lazy" } else { "" })
}

/// `‖Π_M e^{t(D(s)²-I)} ψ‖ ≥ Pr_{π_U(s)}(X_t ∈ M, X_{t+t'} ∉ M)` for the
/// chain with generator `P(s)² - I`, where `ψ` is the unit vector along
/// `√π(s)` restricted to `U`.
pub fn check_success_prob_lemma(
    chain: &MarkovChain,
    marked: &MarkedSet,
    s: f64,
    t: f64,
    t2: f64,
) -> Result<VerificationReport> {
    if !(0.0..1.0).contains(&s) {
        return Err(invalid(format!("interpolation parameter must lie in [0, 1), got {s}")));
    }
    check_time(t)?;
    check_time(t2)?;
    marked.check_chain(chain)?;
    let base = discriminant(chain)?;
    let event = JointEvent::interpolated(chain, &base, marked, s, Kernel::Squared)?;
    let rhs = event.ct(t, t2)?;

    let pi = interpolated_stationary(chain, marked, s)?;
    let d = interpolated_discriminant(&base, marked, s)?;
    let mut psi = DVector::from_fn(chain.n(), |x, _| if marked.contains(x) { 0.0 } else { pi[x].sqrt() });
    psi /= psi.norm();
    let evolved = d.apply(|m| ((m * m - 1.0) * t).exp(), &psi);
    let lhs = marked.members().iter().map(|&x| evolved[x] * evolved[x]).sum::<f64>().sqrt();
    Ok(VerificationReport::decide(
        "success-probability",
        format!("{} s={s} t={t} t'={t2}", describe(chain, marked)),
        lhs,
        rhs,
        0.0,
    ))
}

/// Tensor trapezoid grid: starting resolution in cells per unit time and
/// how many times the grid may be doubled to meet an error target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub cells_per_unit: f64,
    pub max_doublings: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { cells_per_unit: 8.0, max_doublings: 24 }
    }
}

impl Quadrature {
    pub fn new(cells_per_unit: f64, max_doublings: u32) -> Result<Self> {
        if !(cells_per_unit > 0.0) || !cells_per_unit.is_finite() {
            return Err(invalid(format!("quadrature resolution must be positive, got {cells_per_unit}")));
        }
        Ok(Self { cells_per_unit, max_doublings })
    }

    pub fn cells(&self, length: f64) -> usize {
        ((length * self.cells_per_unit).ceil() as usize).max(1)
    }

    /// Trapezoid value on the finer of two nested grids and the Richardson
    /// estimate of its error. The grid is doubled until the estimate is at
    /// most [`BUDGET_FRACTION`] of `scale(value)` or the doublings run out.
    fn integrate(&self, event: &JointEvent, length: f64, scale: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut n = self.cells(length);
        let mut coarse = event.ct_window_trapezoid(length, n);
        let mut doublings = 0;
        loop {
            let fine = event.ct_window_trapezoid(length, 2 * n);
            let budget = (fine - coarse).abs() / 3.0;
            if budget <= BUDGET_FRACTION * scale(fine).abs() || doublings >= self.max_doublings || n > usize::MAX / 4 {
                return (fine, budget);
            }
            n *= 2;
            coarse = fine;
            doublings += 1;
        }
    }
}

/// `∫₀^{40T}∫₀^{40T} Pr(X_t ∈ M, X_{t+t'} ∉ M) ≥ (1/160) Σ_{t,t'=1}^{T} Pr(Y_t ∈ M, Y_{t+t'} ∉ M)`
/// with `X` the continuous-time chain and `Y` the discrete chain on the same
/// kernel ([`Kernel::Plain`]: `P - I` against `P`).
pub fn check_ct_dt_lemma(
    chain: &MarkovChain,
    marked: &MarkedSet,
    horizon: u32,
    kernel: Kernel,
    quadrature: Quadrature,
) -> Result<VerificationReport> {
    if !chain.is_lazy() {
        return Err(invalid("continuous-versus-discrete comparison needs a lazy chain"));
    }
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let event = JointEvent::new(chain, marked, kernel)?;
    let length = CT_WINDOW * horizon as f64;
    let rhs = CT_DT_CONSTANT * event.dt_window_sum(horizon);
    let (lhs, budget) = quadrature.integrate(&event, length, |_| rhs);
    Ok(VerificationReport::decide(
        "ct-dt",
        format!("{} T={horizon} kernel={kernel:?}", describe(chain, marked)),
        lhs,
        rhs,
        budget,
    ))
}

/// `Σ_{t,t'=1}^{T} A_{2t,2t'} ≥ (1/16) Σ_{t,t'=1}^{T} A_{t,t'}` with
/// `A_{t,t'} = ⟨π_U|P^t Π_M P^{t'}|1_U⟩` for a lazy `P`.
pub fn check_lazy_square_lemma(chain: &MarkovChain, marked: &MarkedSet, horizon: u32) -> Result<VerificationReport> {
    if !chain.is_lazy() {
        return Err(invalid("lazy-square comparison needs a lazy chain"));
    }
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let plain = JointEvent::new(chain, marked, Kernel::Plain)?;
    let squared = JointEvent { kernel: Kernel::Squared, ..plain.clone() };
    let lhs = squared.dt_window_sum(horizon);
    let rhs = LAZY_SQUARE_CONSTANT * plain.dt_window_sum(horizon);
    Ok(VerificationReport::decide(
        "lazy-square",
        format!("{} T={horizon}", describe(chain, marked)),
        lhs,
        rhs,
        0.0,
    ))
}

/// Schedule average of the joint event with random times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedExpectation {
    pub value: f64,
    pub error_budget: f64,
    pub grid_size: usize,
    pub window: f64,
    pub warnings: Vec<String>,
}

fn hypothesis_warnings(chain: &MarkovChain, marked: &MarkedSet, horizon: f64) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    let mass = marked.mass(chain.pi()?);
    if mass > MAX_MARKED_MASS {
        warnings.push(format!("marked mass {mass:.4} exceeds 1/9"));
    }
    let ht = crate::markov::hitting_time(chain, marked)?;
    if horizon < MIN_HORIZON_RATIO * ht {
        warnings.push(format!("T = {horizon} is below 3·HT = {:.4}", MIN_HORIZON_RATIO * ht));
    }
    Ok(warnings)
}

/// Interpolation grid `{1 - 1/r : r ≤ 2^⌈log₂(12T)⌉}`.
pub fn randomization_grid(horizon: f64, spacing: GridSpacing) -> Result<InterpolationSchedule> {
    InterpolationSchedule::with_spacing(12.0 * horizon, 2, spacing)
}

/// `E_{s,t,t'} Pr_{π_U(s)}(X_t ∈ M, X_{t+t'} ∉ M)` for generator `P(s)² - I`,
/// `s` uniform on [`randomization_grid`] and `t, t'` uniform on
/// `[0, window·T]`. With [`GridSpacing::Uniform`] and `T` growing past the
/// hitting time most grid points sit where `P(s)` barely leaves `M`, and the
/// average falls off like a power of `T`; [`GridSpacing::Dyadic`] keeps one
/// good point per scale. Violated hypotheses (`π(M) ≤ 1/9`, `T ≥ 3·HT`) are
/// reported as warnings.
pub fn expectation_over_randomization(
    chain: &MarkovChain,
    marked: &MarkedSet,
    horizon: f64,
    window: f64,
    spacing: GridSpacing,
    quadrature: Quadrature,
) -> Result<RandomizedExpectation> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    if !(window > 0.0) {
        return Err(invalid(format!("window must be positive, got {window}")));
    }
    marked.check_chain(chain)?;
    marked.require_proper()?;
    let warnings = hypothesis_warnings(chain, marked, horizon)?;
    let grid = randomization_grid(horizon, spacing)?;
    let base = discriminant(chain)?;
    let length = window * horizon;
    let area = length * length;
    let cells: Vec<(f64, f64)> = grid
        .grid()
        .par_iter()
        .map(|&s| {
            let event = JointEvent::interpolated(chain, &base, marked, s, Kernel::Squared)?;
            let (v, e) = quadrature.integrate(&event, length, |v| v);
            Ok((v / area, e / area))
        })
        .collect::<Result<_>>()?;
    let k = cells.len() as f64;
    Ok(RandomizedExpectation {
        value: cells.iter().map(|c| c.0).sum::<f64>() / k,
        error_budget: cells.iter().map(|c| c.1).sum::<f64>() / k,
        grid_size: cells.len(),
        window,
        warnings,
    })
}

/// Discrete counterpart: `t, t'` uniform on `{1, …, ⌈window·T⌉}` with steps of
/// `P(s)`. Exact (finite sums).
pub fn expectation_over_randomization_dt(
    chain: &MarkovChain,
    marked: &MarkedSet,
    horizon: f64,
    window: f64,
    spacing: GridSpacing,
) -> Result<RandomizedExpectation> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(invalid(format!("horizon must be positive, got {horizon}")));
    }
    if !(window > 0.0) {
        return Err(invalid(format!("window must be positive, got {window}")));
    }
    marked.check_chain(chain)?;
    marked.require_proper()?;
    let warnings = hypothesis_warnings(chain, marked, horizon)?;
    let grid = randomization_grid(horizon, spacing)?;
    let base = discriminant(chain)?;
    let steps = (window * horizon).ceil() as u32;
    let values: Vec<f64> = grid
        .grid()
        .par_iter()
        .map(|&s| {
            let event = JointEvent::interpolated(chain, &base, marked, s, Kernel::Plain)?;
            Ok(event.dt_window_sum(steps) / (steps as f64 * steps as f64))
        })
        .collect::<Result<_>>()?;
    Ok(RandomizedExpectation {
        value: values.iter().sum::<f64>() / values.len() as f64,
        error_budget: 0.0,
        grid_size: values.len(),
        window,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{from_weighted_graph, generate, hitting_time, interpolate, make_lazy, GraphFamily};
    use crate::rng::seeded;
    use crate::stats::log_log_slope;

    fn random_chain<R: Rng>(n: usize, rng: &mut R) -> MarkovChain {
        let mut w = DMatrix::zeros(n, n);
        for x in 0..n {
            for y in x..n {
                let v = rng.random_range(0.05..1.0);
                w[(x, y)] = v;
                w[(y, x)] = v;
            }
        }
        from_weighted_graph(&w).unwrap()
    }

    /// Probability of every path, summed over those satisfying the event.
    fn enumerate(chain: &MarkovChain, marked: &MarkedSet, t: usize, t2: usize) -> f64 {
        let p = chain.transition();
        let pi = chain.pi().unwrap();
        let n = chain.n();
        let pu: f64 = marked.unmarked().iter().map(|&x| pi[x]).sum();
        let len = t + t2;
        let mut total = 0.0;
        let mut path = vec![0usize; len + 1];
        #[allow(clippy::too_many_arguments)]
        fn walk(
            depth: usize,
            weight: f64,
            path: &mut Vec<usize>,
            p: &DMatrix<f64>,
            n: usize,
            t: usize,
            marked: &MarkedSet,
            total: &mut f64,
        ) {
            if depth + 1 == path.len() {
                if marked.contains(path[t]) && !marked.contains(path[depth]) {
                    *total += weight;
                }
                return;
            }
            for y in 0..n {
                let w = p[(path[depth], y)];
                if w > 0.0 {
                    path[depth + 1] = y;
                    walk(depth + 1, weight * w, path, p, n, t, marked, total);
                }
            }
        }
        for x in marked.unmarked() {
            path[0] = x;
            walk(0, pi[x] / pu, &mut path, p, n, t, marked, &mut total);
        }
        total
    }

    fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let squarings = 8;
        let scaled = a / 2f64.powi(squarings);
        let mut term = DMatrix::identity(n, n);
        let mut sum = DMatrix::identity(n, n);
        for k in 1..30 {
            term = &term * &scaled / k as f64;
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    fn matrix_route(chain: &MarkovChain, marked: &MarkedSet, left: &DMatrix<f64>, right: &DMatrix<f64>) -> f64 {
        let pi = chain.pi().unwrap();
        let n = chain.n();
        let pu: f64 = marked.unmarked().iter().map(|&x| pi[x]).sum();
        let start = DVector::from_fn(n, |x, _| if marked.contains(x) { 0.0 } else { pi[x] / pu });
        let ones = DVector::from_fn(n, |x, _| if marked.contains(x) { 0.0 } else { 1.0 });
        let proj = DMatrix::from_fn(n, n, |x, y| if x == y && marked.contains(x) { 1.0 } else { 0.0 });
        (start.transpose() * left * proj * right * ones)[(0, 0)]
    }

    #[test]
    fn dt_matches_path_enumeration() {
        let mut rng = seeded(31);
        let k3 = generate(GraphFamily::Complete, 3).unwrap();
        let m = MarkedSet::single(3, 2).unwrap();
        // K_3 from π_U, one step to node 2 (prob 1/2), then leave it for sure.
        assert!((joint_event_dt(&k3, &m, 1, 1).unwrap() - 0.5).abs() < 1e-14);
        for trial in 0..6 {
            let chain = if trial % 2 == 0 { random_chain(4, &mut rng) } else { make_lazy(&random_chain(3, &mut rng)) };
            let marked = MarkedSet::new(chain.n(), [0, chain.n() - 1]).unwrap();
            for (t, t2) in [(0, 3), (1, 0), (1, 1), (2, 3), (4, 2), (5, 5), (3, 7)] {
                let spectral = joint_event_dt(&chain, &marked, t, t2).unwrap();
                let brute = enumerate(&chain, &marked, t as usize, t2 as usize);
                assert!((spectral - brute).abs() < 1e-12, "{t},{t2}: {spectral} vs {brute}");
            }
        }
    }

    #[test]
    fn trivial_times_vanish() {
        let chain = make_lazy(&generate(GraphFamily::Cycle, 5).unwrap());
        let m = MarkedSet::single(5, 0).unwrap();
        assert_eq!(joint_event_dt(&chain, &m, 0, 4).unwrap(), 0.0);
        assert!(joint_event_ct(&chain, &m, 0.0, 2.0).unwrap() < 1e-15);
        assert!(joint_event_ct(&chain, &m, 3.0, 0.0).unwrap() < 1e-15);
        assert!(joint_event_ct(&chain, &m, -1.0, 0.0).is_err());
    }

    #[test]
    fn ct_matches_matrix_exponentials() {
        let mut rng = seeded(32);
        for _ in 0..5 {
            let chain = random_chain(5, &mut rng);
            let marked = MarkedSet::new(5, [1, 3]).unwrap();
            let p = chain.transition();
            let id = DMatrix::identity(5, 5);
            for kernel in [Kernel::Plain, Kernel::Squared] {
                let q = match kernel {
                    Kernel::Plain => p - &id,
                    Kernel::Squared => p * p - &id,
                };
                let event = JointEvent::new(&chain, &marked, kernel).unwrap();
                let (t, t2) = (rng.random_range(0.0..4.0), rng.random_range(0.0..4.0));
                let want = matrix_route(&chain, &marked, &expm(&(&q * t)), &expm(&(&q * t2)));
                assert!((event.ct(t, t2).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_state_ct_matches_trajectories() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let chain = from_weighted_graph(&w).unwrap();
        let m = MarkedSet::single(2, 1).unwrap();
        let mut rng = seeded(33);
        for kernel in [Kernel::Plain, Kernel::Squared] {
            let exact = JointEvent::new(&chain, &m, kernel).unwrap().ct(0.7, 0.4).unwrap();
            let est = sample_joint_event_ct(&chain, &m, 0.7, 0.4, kernel, 100_000, &mut rng).unwrap();
            assert!(est.agrees_with(exact, 3.0), "{kernel:?}: {est:?} vs {exact}");
        }
    }

    #[test]
    fn window_sum_and_trapezoid_against_direct_evaluation() {
        let chain = make_lazy(&generate(GraphFamily::Complete, 4).unwrap());
        let m = MarkedSet::single(4, 3).unwrap();
        let event = JointEvent::new(&chain, &m, Kernel::Plain).unwrap();
        let mut direct = 0.0;
        for t in 1..=6 {
            for t2 in 1..=6 {
                direct += event.dt(t, t2).unwrap();
            }
        }
        assert!((event.dt_window_sum(6) - direct).abs() < 1e-13);

        let length = 5.0;
        let cells = 40;
        let h = length / cells as f64;
        let node = |k: usize| if k == 0 || k == cells { 0.5 } else { 1.0 };
        let mut grid = 0.0;
        for i in 0..=cells {
            for j in 0..=cells {
                grid += node(i) * node(j) * event.ct(i as f64 * h, j as f64 * h).unwrap();
            }
        }
        grid *= h * h;
        assert!((event.ct_window_trapezoid(length, cells) - grid).abs() < 1e-12);
        let exact = event.ct_window_integral(length);
        let (value, budget) = Quadrature::new(8.0, 0).unwrap().integrate(&event, length, |v| v);
        assert!((value - exact).abs() <= 1.5 * budget + 1e-14, "{value} {exact} {budget}");
        assert!((value - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn success_probability_lemma_holds() {
        let k4 = make_lazy(&generate(GraphFamily::Complete, 4).unwrap());
        let m = MarkedSet::single(4, 0).unwrap();
        let zero = check_success_prob_lemma(&k4, &m, 0.5, 0.0, 0.0).unwrap();
        assert!(zero.lhs.abs() < 1e-15 && zero.rhs.abs() < 1e-15 && zero.passed());
        let mut rng = seeded(34);
        for _ in 0..100 {
            let (t, t2) = (rng.random_range(0.0..30.0), rng.random_range(0.0..30.0));
            let r = check_success_prob_lemma(&k4, &m, 0.5, t, t2).unwrap();
            assert!(r.margin >= -MARGIN_TOL, "{r:?}");
        }
        let chain = random_chain(6, &mut rng);
        let m = MarkedSet::new(6, [2, 5]).unwrap();
        for _ in 0..50 {
            let (t, t2) = (rng.random_range(0.0..30.0), rng.random_range(0.0..30.0));
            assert!(check_success_prob_lemma(&chain, &m, 0.75, t, t2).unwrap().passed());
        }
    }

    #[test]
    fn interpolated_event_matches_materialized_chain() {
        let chain = make_lazy(&generate(GraphFamily::Cycle, 6).unwrap());
        let m = MarkedSet::new(6, [0, 3]).unwrap();
        let base = discriminant(&chain).unwrap();
        for s in [0.0, 0.4, 0.9] {
            let direct = JointEvent::new(interpolate(&chain, &m, s).unwrap().chain(), &m, Kernel::Squared).unwrap();
            let fast = JointEvent::interpolated(&chain, &base, &m, s, Kernel::Squared).unwrap();
            assert!((direct.ct(1.5, 2.5).unwrap() - fast.ct(1.5, 2.5).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn ct_dt_lemma_on_small_chains() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let two = make_lazy(&from_weighted_graph(&w).unwrap());
        let m = MarkedSet::single(2, 0).unwrap();
        let r = check_ct_dt_lemma(&two, &m, 1, Kernel::Plain, Quadrature::default()).unwrap();
        assert!(r.passed(), "{r:?}");

        let mut rng = seeded(35);
        for _ in 0..4 {
            let n = rng.random_range(3..=6);
            let chain = make_lazy(&random_chain(n, &mut rng));
            let m = MarkedSet::single(n, 0).unwrap();
            let horizon = (3.0 * hitting_time(&chain, &m).unwrap()).ceil() as u32;
            let r = check_ct_dt_lemma(&chain, &m, horizon, Kernel::Plain, Quadrature::default()).unwrap();
            assert!(r.passed(), "{r:?}");
        }
        let chain = make_lazy(&generate(GraphFamily::Cycle, 5).unwrap());
        let most = MarkedSet::new(5, 1..5).unwrap();
        let r = check_ct_dt_lemma(&chain, &most, 4, Kernel::Plain, Quadrature::default()).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(check_ct_dt_lemma(&generate(GraphFamily::Cycle, 5).unwrap(), &most, 4, Kernel::Plain, Quadrature::default()).is_err());
    }

    #[test]
    fn coarse_quadrature_is_inconclusive() {
        let chain = make_lazy(&generate(GraphFamily::Complete, 4).unwrap());
        let m = MarkedSet::single(4, 0).unwrap();
        let r = check_ct_dt_lemma(&chain, &m, 1, Kernel::Squared, Quadrature::new(0.02, 0).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"verdict\":\"inconclusive\""));
    }

    #[test]
    fn lazy_square_lemma_cases() {
        let k4 = make_lazy(&generate(GraphFamily::Complete, 4).unwrap());
        let m = MarkedSet::single(4, 3).unwrap();
        let one = check_lazy_square_lemma(&k4, &m, 1).unwrap();
        let a22 = JointEvent::new(&k4, &m, Kernel::Plain).unwrap().dt(2, 2).unwrap();
        assert!((one.lhs - a22).abs() < 1e-15);
        assert!(one.passed());
        assert!(check_lazy_square_lemma(&k4, &m, 10).unwrap().passed());
        let c6 = make_lazy(&generate(GraphFamily::Cycle, 6).unwrap());
        assert!(check_lazy_square_lemma(&c6, &MarkedSet::single(6, 0).unwrap(), 20).unwrap().passed());
        assert!(check_lazy_square_lemma(&generate(GraphFamily::Cycle, 6).unwrap(), &MarkedSet::single(6, 0).unwrap(), 3).is_err());
    }

    #[test]
    fn randomized_expectation_behaviour() {
        let chain = make_lazy(&generate(GraphFamily::Complete, 8).unwrap());
        let m = MarkedSet::single(8, 0).unwrap();
        let ht = hitting_time(&chain, &m).unwrap();
        let q = Quadrature::default();
        let mut logs = Vec::new();
        let mut dyadic = Vec::new();
        let mut uniform = Vec::new();
        for j in 0..4 {
            let t = 3.0 * ht * 2f64.powi(j);
            let d = expectation_over_randomization(&chain, &m, t, WIDE_WINDOW, GridSpacing::Dyadic, q).unwrap();
            let u = expectation_over_randomization(&chain, &m, t, WIDE_WINDOW, GridSpacing::Uniform, q).unwrap();
            // π(M) = 1/8 sits just above the assumed 1/9
            assert_eq!(d.warnings.len(), 1, "{d:?}");
            for e in [&d, &u] {
                assert!(e.value > 0.0 && e.error_budget < 0.01 * e.value, "{e:?}");
            }
            logs.push(t.log2());
            dyadic.push(d.value);
            uniform.push(u.value);
        }
        assert!(log_log_slope(&logs, &dyadic) >= -1.3);
        // every integer r: the average decays like a power of T
        assert!(log_log_slope(&logs, &uniform) < -2.0);

        let heavy = MarkedSet::new(8, [0, 1]).unwrap();
        let e = expectation_over_randomization(&chain, &heavy, ht, NARROW_WINDOW, GridSpacing::Uniform, q).unwrap();
        assert!(e.warnings.iter().any(|w| w.contains("1/9")));
        assert!(e.warnings.iter().any(|w| w.contains("3·HT")));

        let d = expectation_over_randomization_dt(&chain, &m, 3.0 * ht, NARROW_WINDOW, GridSpacing::Uniform).unwrap();
        assert!(d.value > 0.0 && d.value <= 1.0);
    }

    #[test]
    fn averaged_bound_dominates_squared_average_event() {
        // E_s ‖Π_M e^{t(D(s)²-I)} ψ(s)‖² ≥ (E_s Pr(...))² on a fixed time pair
        let chain = make_lazy(&generate(GraphFamily::Cycle, 7).unwrap());
        let m = MarkedSet::single(7, 0).unwrap();
        let grid = randomization_grid(5.0, GridSpacing::Uniform).unwrap();
        let (t, t2) = (6.0, 9.0);
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for &s in grid.grid() {
            let r = check_success_prob_lemma(&chain, &m, s, t, t2).unwrap();
            lhs += r.lhs * r.lhs;
            rhs += r.rhs;
        }
        let k = grid.len() as f64;
        assert!(lhs / k >= (rhs / k).powi(2) - MARGIN_TOL);
    }
}
