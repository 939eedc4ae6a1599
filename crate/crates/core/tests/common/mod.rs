//! Independent reference computations for integration tests. Everything
//! here is plain nalgebra, without going through the library's solvers.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use ctqw::markov::{from_weighted_graph, MarkovChain};
use ctqw::spectral::{HermitianOperator, QuantumState, C64};

/// Random walk on a connected random weighted graph.
pub fn random_reversible<R: Rng>(n: usize, rng: &mut R) -> MarkovChain {
    let mut w = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            if b == a + 1 || rng.random_bool(0.5) {
                let x = rng.random_range(0.1..1.0);
                w[(a, b)] = x;
                w[(b, a)] = x;
            }
        }
    }
    from_weighted_graph(&w).unwrap()
}

/// `(A + A†)/(2√d)` with complex Gaussian `A`; spectrum roughly in [-2, 2].
pub fn random_hermitian_matrix<R: Rng>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    (&a + a.adjoint()) / C64::from(2.0 * (dim as f64).sqrt())
}

pub fn random_hermitian<R: Rng>(dim: usize, rng: &mut R) -> HermitianOperator {
    HermitianOperator::new(random_hermitian_matrix(dim, rng)).unwrap()
}

pub fn random_vector<R: Rng>(dim: usize, rng: &mut R) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let norm = v.norm();
    v / C64::from(norm)
}

pub fn random_state<R: Rng>(dim: usize, rng: &mut R) -> QuantumState {
    QuantumState::normalized(random_vector(dim, rng)).unwrap()
}

/// Orthogonal projector onto the span of `rank` random vectors.
pub fn random_projector_matrix<R: Rng>(dim: usize, rank: usize, rng: &mut R) -> DMatrix<C64> {
    if rank == 0 {
        return DMatrix::zeros(dim, dim);
    }
    let cols: Vec<DVector<C64>> = (0..rank).map(|_| random_vector(dim, rng)).collect();
    let q = DMatrix::from_columns(&cols).qr().q();
    &q * q.adjoint()
}

/// `f(H)` for Hermitian `H` by eigendecomposition.
pub fn hermitian_function(h: &DMatrix<C64>, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let e = h.clone().symmetric_eigen();
    let diag = DMatrix::from_diagonal(&e.eigenvalues.map(|l| C64::from(f(l))));
    &e.eigenvectors * diag * e.eigenvectors.adjoint()
}

/// `f(S)` for real symmetric `S`.
pub fn symmetric_function(s: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = s.clone().symmetric_eigen();
    let diag = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    &e.eigenvectors * diag * e.eigenvectors.transpose()
}

/// Stationary distribution: the singular vector of `Pᵀ - I` with the
/// smallest singular value, scaled to sum to one.
pub fn stationary(p: &DMatrix<f64>) -> DVector<f64> {
    let n = p.nrows();
    let svd = (p.transpose() - DMatrix::identity(n, n)).svd(false, true);
    let k = svd.singular_values.imin();
    let v: DVector<f64> = svd.v_t.unwrap().row(k).transpose();
    &v / v.sum()
}

/// `Σ_x π_x h_x` with `(I - P_UU) h_U = 1`.
pub fn hitting_time(p: &DMatrix<f64>, marked: &[usize]) -> f64 {
    let n = p.nrows();
    let pi = stationary(p);
    let unmarked: Vec<usize> = (0..n).filter(|x| !marked.contains(x)).collect();
    let k = unmarked.len();
    let a = DMatrix::from_fn(k, k, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - p[(unmarked[i], unmarked[j])]
    });
    let h = a.lu().solve(&DVector::from_element(k, 1.0)).unwrap();
    unmarked.iter().zip(h.iter()).map(|(&x, hx)| pi[x] * hx).sum()
}

/// `‖Π_M e^{(D(s)² - I)t} √π_U‖²`, built from `P(s) = (1-s)P + sP'` entrywise.
pub fn fast_forward_bound(p: &DMatrix<f64>, marked: &[usize], s: f64, t: f64) -> f64 {
    let n = p.nrows();
    let pi = stationary(p);
    // P' only differs on marked rows, which become self-loops
    let mut ps = p.clone();
    for &m in marked {
        for y in 0..n {
            ps[(m, y)] = (1.0 - s) * p[(m, y)] + if y == m { s } else { 0.0 };
        }
    }
    let d = DMatrix::from_fn(n, n, |x, y| (ps[(x, y)] * ps[(y, x)]).sqrt());
    let evolve = symmetric_function(&d, |l| ((l * l - 1.0) * t).exp());
    let root = DVector::from_fn(n, |x, _| if marked.contains(&x) { 0.0 } else { pi[x].sqrt() });
    let out = evolve * root;
    marked.iter().map(|&m| out[m] * out[m]).sum()
}

/// Uniform `{1 - 1/r : r = 1..2^⌈log₂T⌉}`.
pub fn uniform_grid(t: f64) -> Vec<f64> {
    let mut size = 1usize;
    while (size as f64) < t {
        size *= 2;
    }
    (1..=size).map(|r| 1.0 - 1.0 / r as f64).collect()
}

/// Lazy `(I + P)/2` of the simple walk on the complete graph.
pub fn lazy_complete(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |x, y| if x == y { 0.5 } else { 0.5 / (n - 1) as f64 })
}

/// Lazy simple walk on the cycle.
pub fn lazy_cycle(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |x, y| {
        if x == y {
            0.5
        } else if (x + 1) % n == y || (y + 1) % n == x {
            0.25
        } else {
            0.0
        }
    })
}

pub fn lazy_hypercube(dim: usize) -> DMatrix<f64> {
    let n = 1 << dim;
    DMatrix::from_fn(n, n, |x, y| {
        if x == y {
            0.5
        } else if (x ^ y).count_ones() == 1 {
            0.5 / dim as f64
        } else {
            0.0
        }
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Prints the outcome line for an acceptance criterion.
pub fn report(criterion: u32, passed: bool, detail: impl AsRef<str>) {
    println!("criterion {criterion:2}: {}  {}", if passed { "PASS" } else { "FAIL" }, detail.as_ref());
}
