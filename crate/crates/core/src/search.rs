//! Spatial search by a continuous-time quantum walk.
//!
//! One round: pick `s` uniformly from the interpolation schedule, prepare
//! `|√π⟩|0⟩`, measure whether the first register is marked, otherwise evolve
//! `|√π_U⟩|0⟩` under `H_{P(s)}` for a Gaussian random time `√(2T)·z` and
//! measure the first register in the node basis.
//!
//! `|√π_U⟩ = Σ_{x∉M} √π_x |x⟩` is kept sub-normalized, so
//! [`exact_success_probability`] and the fast-forward bound are both the
//! unconditional probability of finding a marked node in the evolution
//! branch; a round succeeds with probability `π(M) + E_s[...]`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DVector;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gaussian::{exact_density, expected_evolution_time, fast_forward_bound, projected_probability, sample_evolution_time, Projector};
use crate::markov::{
    discriminant, generate, hitting_time, interpolate, interpolated_discriminant, make_lazy, Discriminant,
    GraphFamily, MarkedSet, MarkovChain, TransitionSampler,
};
use crate::rng::stream;
use crate::spectral::QuantumState;
use crate::stats::McEstimate;
use crate::walker::{build_hamiltonian, evolve_edge_state_real, marked_projector, WalkHamiltonian, FULL_SPACE_CAP};

/// How `r` runs in the interpolation grid `{1 - 1/r}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSpacing {
    /// Every integer `r = 1, …, b^⌈log_b T⌉`.
    #[default]
    Uniform,
    /// Powers only, `r = 1, b, b², …, b^⌈log_b T⌉`.
    Dyadic,
}

/// Interpolation grid `{1 - 1/r : r = 1, …, b^⌈log_b T⌉}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationSchedule {
    horizon: f64,
    base: u32,
    spacing: GridSpacing,
    grid: Vec<f64>,
}

impl InterpolationSchedule {
    /// Base-2 schedule for horizon `T`.
    pub fn new(horizon: f64) -> Result<Self> {
        Self::with_base(horizon, 2)
    }

    pub fn with_base(horizon: f64, base: u32) -> Result<Self> {
        Self::with_spacing(horizon, base, GridSpacing::Uniform)
    }

    pub fn with_spacing(horizon: f64, base: u32, spacing: GridSpacing) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(invalid(format!("schedule horizon must be finite and >= 0, got {horizon}")));
        }
        if base < 2 {
            return Err(invalid(format!("logarithm base must be >= 2, got {base}")));
        }
        // smallest power of the base that is >= T, computed exactly
        let mut size: usize = 1;
        let mut powers = vec![1usize];
        while (size as f64) < horizon {
            size = size
                .checked_mul(base as usize)
                .ok_or_else(|| invalid(format!("schedule for T = {horizon} is too large")))?;
            powers.push(size);
        }
        let rs: Vec<usize> = match spacing {
            GridSpacing::Uniform => (1..=size).collect(),
            GridSpacing::Dyadic => powers,
        };
        let grid = rs.into_iter().map(|r| 1.0 - 1.0 / r as f64).collect();
        Ok(Self { horizon, base, spacing, grid })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn spacing(&self) -> GridSpacing {
        self.spacing
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Uniform draw from the grid.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.grid[rng.random_range(0..self.grid.len())]
    }
}

/// `T = c_T · HT` and `s` uniform over the base-2 schedule for that `T`.
pub fn sample_schedule<R: Rng + ?Sized>(ht_estimate: f64, c_t: f64, rng: &mut R) -> Result<(f64, f64)> {
    if !(ht_estimate > 0.0) || !(c_t > 0.0) {
        return Err(invalid(format!(
            "hitting-time estimate and multiplier must be positive, got {ht_estimate} and {c_t}"
        )));
    }
    let t = c_t * ht_estimate;
    let s = InterpolationSchedule::new(t)?.sample(rng);
    Ok((s, t))
}

/// How the evolution horizon is chosen from `c_T · HT`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonChoice {
    /// `T = c_T · HT` every round.
    #[default]
    Fixed,
    /// `T` uniform in `[0, c_T · HT]`, redrawn every round.
    Uniform,
}

/// Tunables of the search driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub c_t: f64,
    pub horizon: HorizonChoice,
    pub log_base: u32,
    /// Replaces the exact hitting time, to model imperfect knowledge.
    pub ht_estimate: Option<f64>,
    /// Multiplies the default round budget `⌈log₂² T⌉`.
    pub round_scale: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            c_t: 3.0,
            horizon: HorizonChoice::Fixed,
            log_base: 2,
            ht_estimate: None,
            round_scale: 1.0,
        }
    }
}

/// Result of one round or of a repeated search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub found: bool,
    pub node: Option<usize>,
    /// Sum of `|τ|` over the rounds that evolved.
    pub evolution_time: f64,
    /// Rounds run, each including one state preparation.
    pub rounds: usize,
    /// Whether the last round ended at the preparation measurement.
    pub found_at_preparation: bool,
    /// Interpolation parameter and horizon of the last round.
    pub s: f64,
    pub t: f64,
}

/// A chain and marked set with the per-`s` walk Hamiltonians cached.
#[derive(Debug)]
pub struct SearchInstance {
    chain: MarkovChain,
    marked: MarkedSet,
    pi: DVector<f64>,
    hitting_time: f64,
    unmarked_root: DVector<f64>,
    marked_mass: f64,
    base_discriminant: Discriminant,
    node_projector: Projector,
    hamiltonians: Mutex<HashMap<u64, Arc<WalkHamiltonian>>>,
}

impl SearchInstance {
    /// Requires an ergodic, reversible, lazy chain and a proper nonempty `M`.
    pub fn new(chain: MarkovChain, marked: MarkedSet) -> Result<Self> {
        marked.check_chain(&chain)?;
        marked.require_proper()?;
        if !chain.is_lazy() {
            return Err(invalid("search needs a lazy chain; apply make_lazy first"));
        }
        if !chain.is_ergodic() {
            return Err(invalid("search needs an ergodic chain"));
        }
        let pi = chain.pi()?.clone();
        let hitting_time = hitting_time(&chain, &marked)?;
        let unmarked_root = DVector::from_fn(chain.n(), |x, _| if marked.contains(x) { 0.0 } else { pi[x].sqrt() });
        let marked_mass = marked.mass(&pi);
        let base_discriminant = discriminant(&chain)?;
        let node_projector = Projector::from_indices(chain.n(), marked.members().iter().copied())?;
        Ok(Self {
            chain,
            marked,
            pi,
            hitting_time,
            unmarked_root,
            marked_mass,
            base_discriminant,
            node_projector,
            hamiltonians: Mutex::new(HashMap::new()),
        })
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }

    pub fn marked(&self) -> &MarkedSet {
        &self.marked
    }

    pub fn n(&self) -> usize {
        self.chain.n()
    }

    pub fn hitting_time(&self) -> f64 {
        self.hitting_time
    }

    /// `π(M)`.
    pub fn marked_mass(&self) -> f64 {
        self.marked_mass
    }

    /// Sub-normalized `|√π_U⟩` on the node space.
    pub fn unmarked_root(&self) -> &DVector<f64> {
        &self.unmarked_root
    }

    fn unmarked_state(&self) -> QuantumState {
        QuantumState::from_real_vector(&self.unmarked_root).expect("sub-normalized by construction")
    }

    /// `D(s)` on the node space.
    pub fn discriminant_at(&self, s: f64) -> Result<Discriminant> {
        interpolated_discriminant(&self.base_discriminant, &self.marked, s)
    }

    /// Cached `H_{P(s)}`; needs `n ≤ FULL_SPACE_CAP`.
    pub fn hamiltonian(&self, s: f64) -> Result<Arc<WalkHamiltonian>> {
        if self.n() > FULL_SPACE_CAP {
            return Err(Error::TooLarge {
                n: self.n(),
                cap: FULL_SPACE_CAP,
            });
        }
        let key = s.to_bits();
        if let Some(h) = self.hamiltonians.lock().expect("cache lock").get(&key) {
            return Ok(h.clone());
        }
        let ic = interpolate(&self.chain, &self.marked, s)?;
        let h = Arc::new(build_hamiltonian(ic.chain())?);
        Ok(self.hamiltonians.lock().expect("cache lock").entry(key).or_insert(h).clone())
    }

    /// `Tr[(Π_M ⊗ I) ρ_t]` for the evolution branch at interpolation `s`.
    pub fn exact_success_probability(&self, t: f64, s: f64) -> Result<f64> {
        let h = self.hamiltonian(s)?;
        let start = h.embed(&self.unmarked_state())?;
        let rho = exact_density(h.as_ref(), &start, t)?;
        projected_probability(&rho, &marked_projector(self.n(), &self.marked)?)
    }

    /// `‖Π_M e^{(D(s)²-I)t} |√π_U⟩‖²`.
    pub fn bound(&self, t: f64, s: f64) -> Result<f64> {
        let d = self.discriminant_at(s)?;
        fast_forward_bound(&d, &self.unmarked_state(), &self.node_projector, t)
    }

    fn schedule(&self, t: f64, base: u32) -> Result<InterpolationSchedule> {
        InterpolationSchedule::with_base(t, base)
    }

    /// Schedule average of [`Self::bound`]; node-space algebra only.
    pub fn expected_bound(&self, t: f64) -> Result<f64> {
        self.expected_bound_with_base(t, 2)
    }

    pub fn expected_bound_with_base(&self, t: f64, base: u32) -> Result<f64> {
        let schedule = self.schedule(t, base)?;
        let values: Vec<f64> = schedule
            .grid()
            .par_iter()
            .map(|&s| self.bound(t, s))
            .collect::<Result<_>>()?;
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    }

    /// Schedule average of [`Self::exact_success_probability`].
    pub fn expected_exact(&self, t: f64) -> Result<f64> {
        let schedule = self.schedule(t, 2)?;
        let values: Vec<f64> = schedule
            .grid()
            .par_iter()
            .map(|&s| self.exact_success_probability(t, s))
            .collect::<Result<_>>()?;
        Ok(values.iter().sum::<f64>() / values.len() as f64)
    }

    /// Exact per-round success probability `π(M) + E_s[...]`.
    pub fn round_success_probability(&self, t: f64) -> Result<f64> {
        Ok(self.marked_mass + self.expected_exact(t)?)
    }

    /// The horizon used by a round under the given options.
    pub fn horizon<R: Rng + ?Sized>(&self, options: &SearchOptions, rng: &mut R) -> Result<f64> {
        let ht = options.ht_estimate.unwrap_or(self.hitting_time);
        if !(ht > 0.0) || !(options.c_t > 0.0) {
            return Err(invalid(format!("c_T·HT must be positive, got {} · {ht}", options.c_t)));
        }
        let full = options.c_t * ht;
        Ok(match options.horizon {
            HorizonChoice::Fixed => full,
            HorizonChoice::Uniform => rng.random_range(0.0..=full),
        })
    }

    /// One round with horizon `t`.
    pub fn run_round<R: Rng + ?Sized>(&self, t: f64, base: u32, rng: &mut R) -> Result<SearchOutcome> {
        let schedule = self.schedule(t, base)?;
        let s = schedule.sample(rng);
        let mut outcome = SearchOutcome {
            found: false,
            node: None,
            evolution_time: 0.0,
            rounds: 1,
            found_at_preparation: false,
            s,
            t,
        };
        // preparation measurement {Π_M, I - Π_M}
        if rng.random::<f64>() < self.marked_mass {
            let node = sample_weighted(self.marked.members(), |x| self.pi[x], rng);
            outcome.found = true;
            outcome.found_at_preparation = true;
            outcome.node = Some(node);
            return Ok(outcome);
        }
        let tau = sample_evolution_time(t, rng);
        outcome.evolution_time = tau.abs();
        let h = self.hamiltonian(s)?;
        let start = &self.unmarked_root / (1.0 - self.marked_mass).sqrt();
        let state = evolve_edge_state_real(&h, &start, tau)?;
        let m = self.n() + 1;
        let first: Vec<f64> = (0..m)
            .map(|a| state.rows(a * m, m).iter().map(|x| x * x).sum())
            .collect();
        let register = sample_weighted(&(0..m).collect::<Vec<_>>(), |a| first[a], rng);
        if register > 0 {
            let node = register - 1;
            outcome.node = Some(node);
            outcome.found = self.marked.contains(node);
        }
        Ok(outcome)
    }

    /// Rounds until a marked node is found or `max_rounds` is exhausted.
    pub fn repeat_until_found<R: Rng + ?Sized>(
        &self,
        options: &SearchOptions,
        max_rounds: usize,
        rng: &mut R,
    ) -> Result<SearchOutcome> {
        if max_rounds == 0 {
            return Err(invalid("max_rounds must be >= 1"));
        }
        let mut total = 0.0;
        let mut last = None;
        for round in 1..=max_rounds {
            let t = self.horizon(options, rng)?;
            let mut outcome = self.run_round(t, options.log_base, rng)?;
            total += outcome.evolution_time;
            outcome.evolution_time = total;
            outcome.rounds = round;
            if outcome.found {
                return Ok(outcome);
            }
            last = Some(outcome);
        }
        Ok(last.expect("at least one round"))
    }

    /// Independent repeated searches, trial `i` on sub-stream `(seed, i)`.
    pub fn run_trials(&self, options: &SearchOptions, max_rounds: usize, trials: usize, seed: u64) -> Result<Vec<SearchOutcome>> {
        (0..trials)
            .into_par_iter()
            .map(|i| self.repeat_until_found(options, max_rounds, &mut stream(seed, i as u64)))
            .collect()
    }

    /// Default round budget `⌈log₂² T⌉ · scale`, at least 1.
    pub fn default_max_rounds(&self, options: &SearchOptions) -> usize {
        let t = options.c_t * options.ht_estimate.unwrap_or(self.hitting_time);
        default_max_rounds(t, options.round_scale)
    }
}

/// `⌈log₂² T · scale⌉`, at least 1.
pub fn default_max_rounds(t: f64, scale: f64) -> usize {
    let l = t.max(2.0).log2();
    ((l * l * scale).ceil() as usize).max(1)
}

fn sample_weighted<R: Rng + ?Sized>(items: &[usize], weight: impl Fn(usize) -> f64, rng: &mut R) -> usize {
    let total: f64 = items.iter().map(|&x| weight(x)).sum();
    let mut u = rng.random::<f64>() * total;
    for &x in items {
        let w = weight(x);
        if u < w {
            return x;
        }
        u -= w;
    }
    // round-off: fall back to the last item with positive weight
    *items.iter().rev().find(|&&x| weight(x) > 0.0).unwrap_or(&items[items.len() - 1])
}

/// One round of the search with horizon `t`.
pub fn run_search<R: Rng + ?Sized>(chain: &MarkovChain, marked: &MarkedSet, t: f64, rng: &mut R) -> Result<SearchOutcome> {
    SearchInstance::new(chain.clone(), marked.clone())?.run_round(t, 2, rng)
}

/// Exact step-4 success probability at fixed `s`.
pub fn exact_success_probability(chain: &MarkovChain, marked: &MarkedSet, t: f64, s: f64) -> Result<f64> {
    SearchInstance::new(chain.clone(), marked.clone())?.exact_success_probability(t, s)
}

/// Average of the fast-forward bound over the base-2 schedule for `t`.
pub fn expected_bound_over_schedule(chain: &MarkovChain, marked: &MarkedSet, t: f64) -> Result<f64> {
    SearchInstance::new(chain.clone(), marked.clone())?.expected_bound(t)
}

/// Repeats rounds with `T = c_T·HT` until a marked node is found.
pub fn repeat_until_found<R: Rng + ?Sized>(
    chain: &MarkovChain,
    marked: &MarkedSet,
    options: &SearchOptions,
    max_rounds: Option<usize>,
    rng: &mut R,
) -> Result<SearchOutcome> {
    let instance = SearchInstance::new(chain.clone(), marked.clone())?;
    let budget = max_rounds.unwrap_or_else(|| instance.default_max_rounds(options));
    instance.repeat_until_found(options, budget, rng)
}

/// Mean absorption time of the discrete walk started from `π`.
pub fn classical_baseline<R: Rng + ?Sized>(chain: &MarkovChain, marked: &MarkedSet, trials: usize, rng: &mut R) -> Result<McEstimate> {
    marked.check_chain(chain)?;
    if marked.is_empty() {
        return Err(invalid("marked set is empty"));
    }
    if trials == 0 {
        return Err(invalid("need at least one trial"));
    }
    let pi = chain.pi()?;
    let sampler = TransitionSampler::new(chain);
    let nodes: Vec<usize> = (0..chain.n()).collect();
    let times: Vec<f64> = (0..trials)
        .map(|_| {
            let mut x = sample_weighted(&nodes, |v| pi[v], rng);
            let mut steps = 0u64;
            while !marked.contains(x) {
                x = sampler.step(x, rng);
                steps += 1;
            }
            steps as f64
        })
        .collect();
    Ok(McEstimate::from_samples(&times))
}

/// How the marked set is chosen in a scaling sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule", content = "value")]
pub enum MarkedRule {
    /// Node 0 only.
    Single,
    /// `max(1, round(ρ·n))` nodes drawn uniformly without replacement.
    Fraction(f64),
}

impl MarkedRule {
    pub fn choose<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<MarkedSet> {
        match *self {
            MarkedRule::Single => MarkedSet::single(n, 0),
            MarkedRule::Fraction(rho) => {
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(invalid(format!("marked fraction must lie in (0, 1), got {rho}")));
                }
                let k = ((rho * n as f64).round() as usize).clamp(1, n - 1);
                MarkedSet::new(n, sample_indices(rng, n, k))
            }
        }
    }
}

/// One row of a scaling sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub family: GraphFamily,
    pub n: usize,
    #[serde(rename = "HT")]
    pub ht: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub s_grid_size: usize,
    pub bound_mean: f64,
    /// Expected evolution time per round, `2√(T/π)`.
    pub quantum_time: f64,
    pub classical_time: f64,
    pub seed: u64,
    pub marked_count: usize,
    pub marked_mass: f64,
    /// `quantum_time / (π(M) + bound_mean)`: expected evolution time per
    /// find when each round succeeds with the bound probability.
    pub quantum_time_per_find: f64,
}

/// Column order of the CSV form of [`ScalingRow`].
pub const SCALING_COLUMNS: [&str; 9] = [
    "family",
    "n",
    "HT",
    "T",
    "s_grid_size",
    "bound_mean",
    "quantum_time",
    "classical_time",
    "seed",
];

/// Bound-path sweep over the lazy walk on each family member. The marked
/// set for size index `i` is drawn from sub-stream `(seed, i)`.
pub fn scaling_experiment(
    family: GraphFamily,
    sizes: &[usize],
    c_t: f64,
    rule: MarkedRule,
    seed: u64,
) -> Result<Vec<ScalingRow>> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sizes must be strictly ascending"));
    }
    if !(c_t > 0.0) {
        return Err(invalid(format!("c_T must be positive, got {c_t}")));
    }
    sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| {
            let chain = make_lazy(&generate(family, size)?);
            let n = chain.n();
            let marked = rule.choose(n, &mut stream(seed, i as u64))?;
            let instance = SearchInstance::new(chain, marked)?;
            let ht = instance.hitting_time();
            let t = c_t * ht;
            let schedule = InterpolationSchedule::new(t)?;
            let bound_mean = instance.expected_bound(t)?;
            let quantum_time = expected_evolution_time(t);
            Ok(ScalingRow {
                family,
                n,
                ht,
                t,
                s_grid_size: schedule.len(),
                bound_mean,
                quantum_time,
                classical_time: ht,
                seed,
                marked_count: instance.marked().len(),
                marked_mass: instance.marked_mass(),
                quantum_time_per_find: quantum_time / (instance.marked_mass() + bound_mean),
            })
        })
        .collect()
}
