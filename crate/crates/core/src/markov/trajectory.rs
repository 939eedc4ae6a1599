//! Trajectory sampling for the discrete chain and its continuous-time
//! version with kernel `Q = P - I`.

use rand::Rng;
use rand_distr::Exp1;

use super::MarkovChain;
use crate::error::{invalid, Result};

/// Cumulative row tables for O(log n) transition sampling.
#[derive(Debug, Clone)]
pub struct TransitionSampler {
    cumulative: Vec<Vec<f64>>,
    self_loop: Vec<f64>,
    skeleton: Vec<Vec<f64>>,
}

impl TransitionSampler {
    pub fn new(chain: &MarkovChain) -> Self {
        let p = chain.transition();
        let n = chain.n();
        let mut cumulative = Vec::with_capacity(n);
        let mut skeleton = Vec::with_capacity(n);
        let mut self_loop = Vec::with_capacity(n);
        for x in 0..n {
            let mut acc = 0.0;
            cumulative.push((0..n).map(|y| {
                acc += p[(x, y)];
                acc
            }).collect());
            let leave = 1.0 - p[(x, x)];
            self_loop.push(p[(x, x)]);
            let mut acc = 0.0;
            skeleton.push((0..n).map(|y| {
                if y != x && leave > 0.0 {
                    acc += p[(x, y)] / leave;
                }
                acc
            }).collect());
        }
        Self { cumulative, self_loop, skeleton }
    }

    fn pick(table: &[f64], u: f64) -> usize {
        let total = *table.last().unwrap_or(&1.0);
        let target = u * total;
        let idx = table.partition_point(|&c| c <= target);
        // guard against round-off in the last cumulative entry
        let mut idx = idx.min(table.len() - 1);
        while idx > 0 && table[idx] == table[idx - 1] {
            idx -= 1;
        }
        idx
    }

    /// One step of the discrete chain from `x`.
    pub fn step<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        Self::pick(&self.cumulative[x], rng.random::<f64>())
    }

    /// A step conditioned on leaving `x` (self-loop removed).
    fn leave<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        Self::pick(&self.skeleton[x], rng.random::<f64>())
    }
}

/// How self-loops are treated by the continuous-time sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CtMode {
    /// Rate-1 exponential clocks, each ring takes a step of `P` (self-loops
    /// included, so the node may not change).
    #[default]
    WithSelfLoops,
    /// Self-loops removed: node `x` is left at rate `1 - p_xx` (1/2 for a
    /// lazy chain) and the jump follows `p_xy / (1 - p_xx)`.
    Skeleton,
}

/// Continuous-time trajectory on `[0, horizon]` as `(node, entry time)`
/// pairs. Consecutive entries always have distinct nodes.
pub fn sample_ct_trajectory<R: Rng + ?Sized>(
    chain: &MarkovChain,
    start: usize,
    horizon: f64,
    mode: CtMode,
    rng: &mut R,
) -> Result<Vec<(usize, f64)>> {
    let sampler = TransitionSampler::new(chain);
    sample_with(&sampler, start, horizon, mode, rng)
}

pub(crate) fn sample_with<R: Rng + ?Sized>(
    sampler: &TransitionSampler,
    start: usize,
    horizon: f64,
    mode: CtMode,
    rng: &mut R,
) -> Result<Vec<(usize, f64)>> {
    if start >= sampler.cumulative.len() {
        return Err(invalid(format!("start node {start} out of range")));
    }
    if !(horizon >= 0.0) {
        return Err(invalid(format!("horizon must be nonnegative, got {horizon}")));
    }
    let mut out = vec![(start, 0.0)];
    let mut node = start;
    let mut clock = 0.0;
    loop {
        let hold: f64 = rng.sample(Exp1);
        let next = match mode {
            CtMode::WithSelfLoops => {
                clock += hold;
                if clock > horizon {
                    break;
                }
                sampler.step(node, rng)
            }
            CtMode::Skeleton => {
                let rate = 1.0 - sampler.self_loop[node];
                if rate <= 0.0 {
                    break;
                }
                clock += hold / rate;
                if clock > horizon {
                    break;
                }
                sampler.leave(node, rng)
            }
        };
        if next != node {
            out.push((next, clock));
            node = next;
        }
    }
    Ok(out)
}

/// Node occupied at time `t` by a trajectory.
pub fn state_at(trajectory: &[(usize, f64)], t: f64) -> usize {
    let idx = trajectory.partition_point(|&(_, entry)| entry <= t);
    trajectory[idx.saturating_sub(1)].0
}
