//! Reversible Markov chains: construction, lazy / absorbing / interpolated
//! transforms, stationary distributions, discriminant matrices and hitting
//! times.
//!
//! Transition matrices are stored row-stochastic (`p[(x, y)]` is the
//! probability of moving from `x` to `y`). Distributions are column vectors,
//! so one step of the walk maps a distribution `v` to `Pᵀ v`.

mod generators;
mod trajectory;

pub use generators::{adjacency, generate, GraphFamily, GraphSpec};
pub use trajectory::{sample_ct_trajectory, state_at, CtMode, TransitionSampler};

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{sym_eig, SymEig};

/// Row-sum and nonnegativity tolerance at construction.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Detailed-balance and fixed-point tolerance.
pub const REVERSIBLE_TOL: f64 = 1e-10;
/// Allowed excursion of discriminant eigenvalues outside `[-1, 1]`.
pub const SPECTRUM_TOL: f64 = 1e-10;

/// Row-stochastic transition matrix with its cached stationary distribution.
///
/// Irreducible chains must be reversible. Reducible chains (absorbing walks)
/// are allowed but carry no stationary distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    p: DMatrix<f64>,
    pi: Option<DVector<f64>>,
    lazy: bool,
    labels: Vec<String>,
}

impl MarkovChain {
    /// Validates a transition matrix and computes its stationary distribution.
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        check_stochastic(&p)?;
        let pi = if unreachable_nodes(&p).is_empty() {
            let pi = solve_stationary(&p)?;
            check_detailed_balance(&p, &pi)?;
            Some(pi)
        } else {
            None
        };
        Ok(Self::assemble(p, pi))
    }

    /// Uses a known stationary distribution instead of solving for it; the
    /// fixed point and detailed balance are still verified.
    pub fn with_stationary(p: DMatrix<f64>, pi: DVector<f64>) -> Result<Self> {
        check_stochastic(&p)?;
        if pi.len() != p.nrows() {
            return Err(Error::DimensionMismatch {
                expected: p.nrows(),
                got: pi.len(),
            });
        }
        let residual = (p.tr_mul(&pi) - &pi).amax();
        if residual > REVERSIBLE_TOL {
            return Err(Error::Invariant {
                what: "stationary fixed point".into(),
                residual,
            });
        }
        check_detailed_balance(&p, &pi)?;
        Ok(Self::assemble(p, Some(pi)))
    }

    fn assemble(p: DMatrix<f64>, pi: Option<DVector<f64>>) -> Self {
        let n = p.nrows();
        let lazy = (0..n).all(|x| p[(x, x)] >= 0.5 - STOCHASTIC_TOL);
        Self {
            p,
            pi,
            lazy,
            labels: (0..n).map(|x| x.to_string()).collect(),
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: labels.len(),
            });
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Cached stationary distribution; errors for reducible chains.
    pub fn pi(&self) -> Result<&DVector<f64>> {
        self.pi
            .as_ref()
            .ok_or_else(|| Error::Reducible(unreachable_nodes(&self.p)))
    }

    /// Lazy means every self-loop probability is at least 1/2, i.e.
    /// `P = (I + Q)/2` for a stochastic `Q`.
    pub fn is_lazy(&self) -> bool {
        self.lazy
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_irreducible(&self) -> bool {
        self.pi.is_some()
    }

    /// Period of node 0 (gcd of cycle lengths through it); 1 means aperiodic.
    pub fn period(&self) -> usize {
        period(&self.p)
    }

    pub fn is_ergodic(&self) -> bool {
        self.is_irreducible() && (self.lazy || self.period() == 1)
    }

    /// `max |π_x p_xy - π_y p_yx|`.
    pub fn detailed_balance_residual(&self) -> Result<f64> {
        Ok(balance_residual(&self.p, self.pi()?))
    }

    /// Two steps of the walk as a single chain, `P²`.
    pub fn square(&self) -> Result<MarkovChain> {
        let p2 = &self.p * &self.p;
        match &self.pi {
            Some(pi) => MarkovChain::with_stationary(p2, pi.clone()),
            None => MarkovChain::new(p2),
        }
    }

    pub fn to_document(&self) -> ChainDocument {
        ChainDocument {
            n: self.n(),
            p: (0..self.n())
                .map(|x| self.p.row(x).iter().copied().collect())
                .collect(),
            lazy: self.lazy,
            labels: self.labels.clone(),
        }
    }

    pub fn from_document(doc: &ChainDocument) -> Result<Self> {
        if doc.p.len() != doc.n || doc.p.iter().any(|r| r.len() != doc.n) {
            return Err(invalid("P must be an n×n row-major array"));
        }
        let p = DMatrix::from_fn(doc.n, doc.n, |r, c| doc.p[r][c]);
        let chain = MarkovChain::new(p)?;
        if doc.lazy && !chain.lazy {
            return Err(invalid("document is flagged lazy but has a self-loop below 1/2"));
        }
        if doc.labels.is_empty() {
            Ok(chain)
        } else {
            chain.with_labels(doc.labels.clone())
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

/// On-disk chain format `{n, P, lazy, labels}` with `P` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDocument {
    pub n: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub lazy: bool,
    #[serde(default)]
    pub labels: Vec<String>,
}

fn check_stochastic(p: &DMatrix<f64>) -> Result<()> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(invalid("transition matrix must be square and nonempty"));
    }
    for x in 0..p.nrows() {
        let row = p.row(x);
        let sum: f64 = row.iter().sum();
        let min_entry = row.iter().copied().fold(f64::INFINITY, f64::min);
        if (sum - 1.0).abs() > STOCHASTIC_TOL || min_entry < 0.0 || !sum.is_finite() {
            return Err(Error::NotStochastic { row: x, sum, min_entry });
        }
    }
    Ok(())
}

fn balance_residual(p: &DMatrix<f64>, pi: &DVector<f64>) -> f64 {
    let n = p.nrows();
    let mut worst = 0.0_f64;
    for x in 0..n {
        for y in (x + 1)..n {
            worst = worst.max((pi[x] * p[(x, y)] - pi[y] * p[(y, x)]).abs());
        }
    }
    worst
}

fn check_detailed_balance(p: &DMatrix<f64>, pi: &DVector<f64>) -> Result<()> {
    let r = balance_residual(p, pi);
    if r > REVERSIBLE_TOL {
        return Err(Error::NotReversible(r));
    }
    Ok(())
}

fn reachable(p: &DMatrix<f64>, from: usize, forward: bool) -> Vec<bool> {
    let n = p.nrows();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            let w = if forward { p[(u, v)] } else { p[(v, u)] };
            if w > 0.0 && !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Nodes that are not in the strongly connected class of node 0.
fn unreachable_nodes(p: &DMatrix<f64>) -> Vec<usize> {
    let fwd = reachable(p, 0, true);
    let bwd = reachable(p, 0, false);
    (0..p.nrows()).filter(|&x| !(fwd[x] && bwd[x])).collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn period(p: &DMatrix<f64>) -> usize {
    let n = p.nrows();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if p[(u, v)] > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for u in 0..n {
        for v in 0..n {
            if p[(u, v)] > 0.0 && level[u] != usize::MAX && level[v] != usize::MAX {
                let diff = (level[u] + 1).abs_diff(level[v]);
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

/// Solves `Pᵀπ = π, Σπ = 1` by replacing one balance equation with the
/// normalization row.
fn solve_stationary(p: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::identity(n, n);
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or(Error::NoUniqueStationary)?;
    if pi.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::NoUniqueStationary);
    }
    let pi = &pi / pi.sum();
    let residual = (p.tr_mul(&pi) - &pi).amax();
    if residual > REVERSIBLE_TOL {
        return Err(Error::Invariant {
            what: "stationary fixed point".into(),
            residual,
        });
    }
    Ok(pi)
}

/// Random walk on a weighted undirected graph: `p_xy = w_xy / Σ_z w_xz`,
/// `π_x ∝ Σ_z w_xz`.
pub fn from_weighted_graph(weights: &DMatrix<f64>) -> Result<MarkovChain> {
    if !weights.is_square() || weights.nrows() == 0 {
        return Err(invalid("weight matrix must be square and nonempty"));
    }
    if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(invalid("weights must be finite and nonnegative"));
    }
    let asym = crate::spectral::max_asymmetry(weights);
    if asym > 0.0 {
        return Err(Error::NotSymmetric(asym));
    }
    let n = weights.nrows();
    let degrees: Vec<f64> = (0..n).map(|x| weights.row(x).sum()).collect();
    if let Some(x) = degrees.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedNode(x));
    }
    let p = DMatrix::from_fn(n, n, |x, y| weights[(x, y)] / degrees[x]);
    check_stochastic(&p)?;
    let missing = unreachable_nodes(&p);
    if !missing.is_empty() {
        return Err(Error::Reducible(missing));
    }
    let total: f64 = degrees.iter().sum();
    let pi = DVector::from_iterator(n, degrees.iter().map(|d| d / total));
    check_detailed_balance(&p, &pi)?;
    Ok(MarkovChain::assemble(p, Some(pi)))
}

/// `(I + P)/2`. Applying it to an already lazy chain gives self-loops of
/// 3/4; the transform is not idempotent.
pub fn make_lazy(chain: &MarkovChain) -> MarkovChain {
    let n = chain.n();
    let p = (DMatrix::identity(n, n) + &chain.p) * 0.5;
    let mut out = MarkovChain::assemble(p, chain.pi.clone());
    out.labels = chain.labels.clone();
    out
}

/// Stationary distribution recomputed from scratch as the fixed point of
/// `Pᵀ`, independent of the cached value.
pub fn stationary(chain: &MarkovChain) -> Result<DVector<f64>> {
    let missing = unreachable_nodes(&chain.p);
    if !missing.is_empty() {
        return Err(Error::Reducible(missing));
    }
    solve_stationary(&chain.p)
}

/// Set of marked nodes. Empty and full sets are representable; search
/// routines call [`MarkedSet::require_proper`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedSet {
    n: usize,
    members: Vec<usize>,
}

impl MarkedSet {
    pub fn new(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&x) = members.iter().find(|&&x| x >= n) {
            return Err(invalid(format!("marked node {x} out of range 0..{n}")));
        }
        Ok(Self { n, members })
    }

    pub fn single(n: usize, node: usize) -> Result<Self> {
        Self::new(n, [node])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    pub fn unmarked(&self) -> Vec<usize> {
        (0..self.n).filter(|&x| !self.contains(x)).collect()
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n];
        for &x in &self.members {
            m[x] = true;
        }
        m
    }

    /// `Σ_{x∈M} π_x`.
    pub fn mass(&self, pi: &DVector<f64>) -> f64 {
        self.members.iter().map(|&x| pi[x]).sum()
    }

    /// Search needs `∅ ≠ M ≠ V`.
    pub fn require_proper(&self) -> Result<()> {
        if self.members.is_empty() || self.members.len() == self.n {
            return Err(invalid("marked set must be nonempty and not the whole vertex set"));
        }
        Ok(())
    }

    pub(crate) fn check_chain(&self, chain: &MarkovChain) -> Result<()> {
        if self.n != chain.n() {
            return Err(Error::DimensionMismatch {
                expected: chain.n(),
                got: self.n,
            });
        }
        Ok(())
    }
}

/// Absorbing walk `P'`: rows of marked nodes become identity rows.
pub fn absorbing(chain: &MarkovChain, marked: &MarkedSet) -> Result<MarkovChain> {
    marked.check_chain(chain)?;
    if marked.is_empty() {
        return Ok(chain.clone());
    }
    let mut p = chain.p.clone();
    for &x in marked.members() {
        for y in 0..chain.n() {
            p[(x, y)] = if x == y { 1.0 } else { 0.0 };
        }
    }
    let mut out = MarkovChain::new(p)?;
    out.labels = chain.labels.clone();
    Ok(out)
}

/// `P(s) = (1 - s)P + sP'` together with the data it was built from.
#[derive(Debug, Clone)]
pub struct InterpolatedChain {
    base: MarkovChain,
    marked: MarkedSet,
    s: f64,
    chain: MarkovChain,
}

impl InterpolatedChain {
    pub fn base(&self) -> &MarkovChain {
        &self.base
    }

    pub fn marked(&self) -> &MarkedSet {
        &self.marked
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// The materialized `P(s)`.
    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }
}

pub fn interpolate(chain: &MarkovChain, marked: &MarkedSet, s: f64) -> Result<InterpolatedChain> {
    if !(0.0..=1.0).contains(&s) {
        return Err(invalid(format!("interpolation parameter {s} outside [0, 1]")));
    }
    marked.check_chain(chain)?;
    let n = chain.n();
    let mut p = chain.p.clone();
    for &x in marked.members() {
        for y in 0..n {
            let absorbing = if x == y { 1.0 } else { 0.0 };
            p[(x, y)] = (1.0 - s) * chain.p[(x, y)] + s * absorbing;
        }
    }
    let interpolated = if s < 1.0 && chain.is_irreducible() && !marked.is_empty() {
        let pi = interpolated_stationary(chain, marked, s)?;
        MarkovChain::with_stationary(p, pi)?
    } else {
        MarkovChain::new(p)?
    };
    let mut interpolated = interpolated;
    interpolated.labels = chain.labels.clone();
    Ok(InterpolatedChain {
        base: chain.clone(),
        marked: marked.clone(),
        s,
        chain: interpolated,
    })
}

/// Closed form `π(s) = ((1-s)π_U, π_M) / (1 - s(1 - p_M))`.
pub fn interpolated_stationary(chain: &MarkovChain, marked: &MarkedSet, s: f64) -> Result<DVector<f64>> {
    if !(0.0..1.0).contains(&s) {
        return Err(invalid(format!(
            "interpolated stationary distribution needs s in [0, 1), got {s}"
        )));
    }
    marked.check_chain(chain)?;
    let pi = chain.pi()?;
    let p_m = marked.mass(pi);
    let z = 1.0 - s * (1.0 - p_m);
    Ok(DVector::from_fn(chain.n(), |x, _| {
        if marked.contains(x) {
            pi[x] / z
        } else {
            (1.0 - s) * pi[x] / z
        }
    }))
}

/// Discriminant `D_xy = √(p_xy p_yx)` with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct Discriminant {
    matrix: DMatrix<f64>,
    eig: SymEig,
}

impl Discriminant {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eig.values
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eig.vectors
    }

    pub fn decomposition(&self) -> &SymEig {
        &self.eig
    }

    /// `f(D) x`.
    pub fn apply(&self, f: impl Fn(f64) -> f64, x: &DVector<f64>) -> DVector<f64> {
        self.eig.apply(f, x)
    }
}

pub fn discriminant(chain: &MarkovChain) -> Result<Discriminant> {
    let p = chain.transition();
    let n = chain.n();
    let matrix = DMatrix::from_fn(n, n, |x, y| {
        if x == y {
            p[(x, x)]
        } else {
            (p[(x, y)] * p[(y, x)]).sqrt()
        }
    });
    Discriminant::from_matrix(matrix)
}

impl Discriminant {
    fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        let eig = sym_eig(&matrix)?;
        let lo = eig.values[0];
        let hi = eig.values[n - 1];
        if lo < -1.0 - SPECTRUM_TOL || hi > 1.0 + SPECTRUM_TOL {
            return Err(Error::Invariant {
                what: "discriminant spectrum outside [-1, 1]".into(),
                residual: (lo + 1.0).min(0.0).abs().max((hi - 1.0).max(0.0)),
            });
        }
        Ok(Discriminant { matrix, eig })
    }
}

/// Discriminant of the interpolated chain without forming the chain:
/// `D(s) = S D S + s Π_M` with `S` equal to `√(1-s)` on marked nodes and 1
/// elsewhere.
pub fn interpolated_discriminant(base: &Discriminant, marked: &MarkedSet, s: f64) -> Result<Discriminant> {
    if marked.n() != base.n() {
        return Err(Error::DimensionMismatch {
            expected: base.n(),
            got: marked.n(),
        });
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(invalid(format!("interpolation parameter must lie in [0, 1], got {s}")));
    }
    let scale = (1.0 - s).sqrt();
    let weight: Vec<f64> = (0..base.n()).map(|x| if marked.contains(x) { scale } else { 1.0 }).collect();
    let mut matrix = DMatrix::from_fn(base.n(), base.n(), |x, y| weight[x] * base.matrix()[(x, y)] * weight[y]);
    for &x in marked.members() {
        matrix[(x, x)] += s;
    }
    Discriminant::from_matrix(matrix)
}

/// Expected hitting times `h_x` of `M` from every node (0 on `M`), from
/// first-step analysis `(I - P_UU) h_U = 1`.
pub fn hitting_times(chain: &MarkovChain, marked: &MarkedSet) -> Result<DVector<f64>> {
    marked.check_chain(chain)?;
    if marked.is_empty() {
        return Err(invalid("hitting time of the empty set is undefined"));
    }
    let unmarked = marked.unmarked();
    let k = unmarked.len();
    let mut h = DVector::zeros(chain.n());
    if k == 0 {
        return Ok(h);
    }
    let p = chain.transition();
    let a = DMatrix::from_fn(k, k, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - p[(unmarked[i], unmarked[j])]
    });
    let sol = a.lu().solve(&DVector::from_element(k, 1.0)).ok_or(Error::Singular)?;
    if sol.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Singular);
    }
    for (i, &x) in unmarked.iter().enumerate() {
        h[x] = sol[i];
    }
    Ok(h)
}

/// `HT(P, M) = Σ_{x∈U} π_x h_x`: hitting time from the stationary start.
pub fn hitting_time(chain: &MarkovChain, marked: &MarkedSet) -> Result<f64> {
    let h = hitting_times(chain, marked)?;
    Ok(chain.pi()?.dot(&h))
}

/// Hitting time from `π` conditioned on starting outside `M`.
pub fn hitting_time_conditioned(chain: &MarkovChain, marked: &MarkedSet) -> Result<f64> {
    let h = hitting_times(chain, marked)?;
    let pi = chain.pi()?;
    let pu = 1.0 - marked.mass(pi);
    if pu <= 0.0 {
        return Ok(0.0);
    }
    Ok(pi.dot(&h) / pu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolated_discriminant_closed_form() {
        let base = make_lazy(&generators::generate(generators::GraphFamily::Cycle, 6).unwrap());
        let marked = MarkedSet::new(6, [1, 4]).unwrap();
        let d = discriminant(&base).unwrap();
        for s in [0.0, 0.3, 0.75, 0.999] {
            let direct = discriminant(interpolate(&base, &marked, s).unwrap().chain()).unwrap();
            let closed = interpolated_discriminant(&d, &marked, s).unwrap();
            let diff = (direct.matrix() - closed.matrix()).amax();
            assert!(diff < 1e-14, "s={s}: {diff}");
        }
        assert!(interpolated_discriminant(&d, &marked, 1.5).is_err());
    }

    fn complete(n: usize) -> MarkovChain {
        generate(GraphFamily::Complete, n).unwrap()
    }

    fn weighted_triangle() -> MarkovChain {
        let w = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 2.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        from_weighted_graph(&w).unwrap()
    }

    #[test]
    fn complete_three() {
        let c = complete(3);
        for x in 0..3 {
            for y in 0..3 {
                let expected = if x == y { 0.0 } else { 0.5 };
                assert_eq!(c.transition()[(x, y)], expected);
            }
        }
        assert!(c.pi().unwrap().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn single_edge() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let c = from_weighted_graph(&w).unwrap();
        assert_eq!(c.transition(), &w);
        assert_eq!(c.pi().unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(c.period(), 2);
        assert!(!c.is_ergodic());
    }

    #[test]
    fn weighted_triangle_stationary() {
        let c = weighted_triangle();
        // degrees (3, 3, 2)
        let expected = [3.0 / 8.0, 3.0 / 8.0, 2.0 / 8.0];
        let pi = c.pi().unwrap();
        let recomputed = stationary(&c).unwrap();
        for x in 0..3 {
            assert!((pi[x] - expected[x]).abs() < 1e-15);
            assert!((recomputed[x] - expected[x]).abs() < 1e-12);
        }
        // πP = π by direct multiplication
        let step = c.transition().tr_mul(pi);
        assert!((step - pi).amax() < 1e-15);
        assert!(c.detailed_balance_residual().unwrap() < 1e-15);
    }

    #[test]
    fn rejects_bad_weights() {
        let iso = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(from_weighted_graph(&iso), Err(Error::IsolatedNode(2))));
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(from_weighted_graph(&asym), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn rejects_non_reversible() {
        // biased 3-cycle: uniform π but no detailed balance
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 0.9, 0.1, 0.1, 0.0, 0.9, 0.9, 0.1, 0.0]);
        assert!(matches!(MarkovChain::new(p), Err(Error::NotReversible(_))));
    }

    #[test]
    fn rejects_non_stochastic() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.5, 0.5]);
        assert!(matches!(MarkovChain::new(p), Err(Error::NotStochastic { row: 0, .. })));
    }

    #[test]
    fn lazy_transform() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let lazy = make_lazy(&from_weighted_graph(&w).unwrap());
        assert!(lazy.is_lazy());
        assert!(lazy.transition().iter().all(|&v| v == 0.5));
        let twice = make_lazy(&lazy);
        assert_eq!(twice.transition()[(0, 0)], 0.75);

        let k3 = make_lazy(&complete(3));
        assert_eq!(k3.transition()[(0, 0)], 0.5);
        assert_eq!(k3.transition()[(0, 1)], 0.25);
        let d = discriminant(&k3).unwrap();
        let ev = d.eigenvalues();
        assert!((ev[0] - 0.25).abs() < 1e-12);
        assert!((ev[1] - 0.25).abs() < 1e-12);
        assert!((ev[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reducible_stationary_reports_nodes() {
        let k3 = complete(3);
        let m = MarkedSet::single(3, 2).unwrap();
        let abs = absorbing(&k3, &m).unwrap();
        match stationary(&abs) {
            Err(Error::Reducible(nodes)) => assert_eq!(nodes, vec![2]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn absorbing_cases() {
        let k3 = complete(3);
        let none = MarkedSet::new(3, []).unwrap();
        assert_eq!(absorbing(&k3, &none).unwrap().transition(), k3.transition());
        let all = MarkedSet::new(3, 0..3).unwrap();
        assert_eq!(absorbing(&k3, &all).unwrap().transition(), &DMatrix::<f64>::identity(3, 3));
        let m = MarkedSet::single(3, 2).unwrap();
        let abs = absorbing(&k3, &m).unwrap();
        assert_eq!(abs.transition().row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 0.0, 1.0]);
        assert_eq!(abs.transition().row(0), k3.transition().row(0));
        assert_eq!(abs.transition().row(1), k3.transition().row(1));
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let k3 = make_lazy(&complete(3));
        let m = MarkedSet::single(3, 2).unwrap();
        let at0 = interpolate(&k3, &m, 0.0).unwrap();
        assert!((at0.chain().transition() - k3.transition()).amax() < 1e-15);
        let at1 = interpolate(&k3, &m, 1.0).unwrap();
        assert_eq!(at1.chain().transition(), absorbing(&k3, &m).unwrap().transition());
        let half = interpolate(&k3, &m, 0.5).unwrap();
        let row: Vec<f64> = half.chain().transition().row(2).iter().copied().collect();
        assert_eq!(row, vec![0.125, 0.125, 0.75]);
        assert!(matches!(interpolate(&k3, &m, 1.5), Err(Error::InvalidInput(_))));
        assert!(matches!(interpolate(&k3, &m, -0.1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn interpolated_stationary_closed_form() {
        let k3 = complete(3);
        let m = MarkedSet::single(3, 2).unwrap();
        let pi = interpolated_stationary(&k3, &m, 0.5).unwrap();
        let expected = [0.25, 0.25, 0.5];
        for x in 0..3 {
            assert!((pi[x] - expected[x]).abs() < 1e-15);
        }
        let chain = interpolate(&k3, &m, 0.5).unwrap();
        let solved = stationary(chain.chain()).unwrap();
        assert!((solved - &pi).amax() < 1e-10);
        let at0 = interpolated_stationary(&k3, &m, 0.0).unwrap();
        assert!((at0 - k3.pi().unwrap()).amax() < 1e-15);
        assert!(interpolated_stationary(&k3, &m, 1.0).is_err());
    }

    #[test]
    fn unmarked_mass_vanishes_linearly_near_one() {
        let k4 = make_lazy(&complete(4));
        let m = MarkedSet::single(4, 0).unwrap();
        for &eps in &[1e-2, 1e-3, 1e-4] {
            let pi = interpolated_stationary(&k4, &m, 1.0 - eps).unwrap();
            let pu: f64 = (1..4).map(|x| pi[x]).sum();
            // p_M = 1/4: pu = eps·(3/4) / (1 - (1-eps)·3/4)
            let expected = eps * 0.75 / (0.25 + 0.75 * eps);
            assert!((pu - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn symmetric_chain_discriminant_is_itself() {
        let c = generate(GraphFamily::Cycle, 5).unwrap();
        let d = discriminant(&c).unwrap();
        assert!((d.matrix() - c.transition()).amax() < 1e-15);
    }

    #[test]
    fn flip_chain_discriminant_spectrum() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let d = discriminant(&from_weighted_graph(&w).unwrap()).unwrap();
        assert!((d.eigenvalues()[0] + 1.0).abs() < 1e-14);
        assert!((d.eigenvalues()[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn discriminant_similarity_and_top_vector() {
        let c = weighted_triangle();
        let d = discriminant(&c).unwrap();
        let pi = c.pi().unwrap();
        let s = DMatrix::from_diagonal(&pi.map(f64::sqrt));
        let s_inv = DMatrix::from_diagonal(&pi.map(|x| 1.0 / x.sqrt()));
        let similar = &s * c.transition() * s_inv;
        assert!((similar - d.matrix()).amax() < 1e-10);
        let root = pi.map(f64::sqrt);
        assert!((d.matrix() * &root - &root).amax() < 1e-12);
    }

    #[test]
    fn hitting_time_k3() {
        let k3 = complete(3);
        let m = MarkedSet::single(3, 2).unwrap();
        let h = hitting_times(&k3, &m).unwrap();
        assert!((h[0] - 2.0).abs() < 1e-12 && (h[1] - 2.0).abs() < 1e-12 && h[2] == 0.0);
        assert!((hitting_time(&k3, &m).unwrap() - 4.0 / 3.0).abs() < 1e-12);
        assert!((hitting_time_conditioned(&k3, &m).unwrap() - 2.0).abs() < 1e-12);
        let all = MarkedSet::new(3, 0..3).unwrap();
        assert_eq!(hitting_time(&k3, &all).unwrap(), 0.0);
    }

    #[test]
    fn laziness_doubles_hitting_time() {
        for chain in [complete(6), weighted_triangle(), generate(GraphFamily::Cycle, 7).unwrap()] {
            let m = MarkedSet::single(chain.n(), 0).unwrap();
            let ht = hitting_time(&chain, &m).unwrap();
            let lazy = hitting_time(&make_lazy(&chain), &m).unwrap();
            assert!((lazy - 2.0 * ht).abs() < 1e-9 * ht);
        }
    }

    #[test]
    fn json_round_trip() {
        let c = make_lazy(&weighted_triangle()).with_labels(vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let text = c.to_json().unwrap();
        let back = MarkovChain::from_json(&text).unwrap();
        assert_eq!(back.transition(), c.transition());
        assert_eq!(back.labels(), c.labels());
        assert!(back.is_lazy());
        let bad = r#"{"n":2,"P":[[0,1],[1,0]],"lazy":true}"#;
        assert!(MarkovChain::from_json(bad).is_err());
    }

    #[test]
    fn square_keeps_stationary() {
        let c = make_lazy(&weighted_triangle());
        let sq = c.square().unwrap();
        assert!((sq.transition() - c.transition() * c.transition()).amax() < 1e-15);
        assert!(sq.detailed_balance_residual().unwrap() < 1e-12);
    }
}
