//! Continuous-time quantum walk built from a Markov chain.
//!
//! The walk lives on two registers, each spanning a reference state plus the
//! `n` nodes. Register index 0 is the reference state and node `x` is index
//! `x + 1`; the product basis index is `first·(n+1) + second`.
//!
//! `U_P` maps `|x,0⟩` to `Σ_y √p_xy |x,y⟩` and is completed on the rest of
//! each block by the Householder reflection `R_x` sending `|0⟩` to
//! `Σ_y √p_xy |y⟩`. With `S` the register swap and `Π₀ = I ⊗ |0⟩⟨0|`,
//!
//! ```text
//! V   = U_Pᵀ S U_P,         V_{(e,f),(c,d)} = (R_c)_{ed} (R_e)_{cf}
//! H_P = i [V, Π₀] = i A,    A = VΠ₀ - Π₀V   (real antisymmetric)
//! ```
//!
//! `V` is never stored densely; it is applied in `O((n+1)²)` through the
//! reflectors. `H_P` vanishes outside `span{|x,0⟩, V|x,0⟩}`, and on that span
//! it splits into one 2×2 rotation per eigenpair `(μ, φ)` of the
//! discriminant: with `β = φ ⊗ |0⟩` and `γ = (Vβ - Π₀Vβ)/σ`, `σ = √(1-μ²)`,
//! the pair `(β ± iγ)/√2` carries eigenvalues `±σ`. The decomposition is
//! checked against the operator itself at construction.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::gaussian::{Projector, Spectrum};
use crate::markov::{discriminant, Discriminant, MarkedSet, MarkovChain};
use crate::rng::seeded;
use crate::spectral::{Eigh, HermitianOperator, QuantumState, C64};

/// Largest node count simulated on the full product space.
pub const FULL_SPACE_CAP: usize = 60;
/// `‖V² - I‖` tolerance.
pub const INVOLUTION_TOL: f64 = 1e-10;
/// `‖V - Vᵀ‖` tolerance.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Tolerance for the node-block identity and the square relation.
pub const SQUARE_TOL: f64 = 1e-9;
/// Eigenpair residual tolerance of the reduced decomposition.
pub const EIGEN_TOL: f64 = 1e-9;
/// Soft tolerance for eigenvalues leaving `[-1, 1]`.
pub const SPECTRUM_SOFT_TOL: f64 = 1e-8;
/// `1 - μ²` below this counts as a stationary direction of `H_P`.
const ROTATION_CUTOFF: f64 = 1e-12;
const BUILD_SQUARE_TRIALS: usize = 3;

/// Product-space index of `|first, second⟩` (register indices, reference = 0).
pub fn product_index(n: usize, first: usize, second: usize) -> usize {
    first * (n + 1) + second
}

/// Product-space index of `|x, 0⟩` for node `x`.
pub fn node_index(n: usize, x: usize) -> usize {
    product_index(n, x + 1, 0)
}

/// Householder vector `u` with `R = I - uuᵀ`, `R e_0 = Σ_y √p_xy e_{y+1}`.
fn reflector(chain: &MarkovChain, x: usize) -> DVector<f64> {
    let n = chain.n();
    let p = chain.transition();
    let mut u = DVector::zeros(n + 1);
    u[0] = 1.0;
    for y in 0..n {
        u[y + 1] = -p[(x, y)].max(0.0).sqrt();
    }
    u
}

fn reflect(u: &DVector<f64>, v: &mut [f64]) {
    let dot: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    if dot != 0.0 {
        for (vi, ui) in v.iter_mut().zip(u.iter()) {
            *vi -= dot * ui;
        }
    }
}

fn dense_reflection(u: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::identity(u.len(), u.len()) - u * u.transpose()
}

fn check_cap(n: usize) -> Result<()> {
    if n > FULL_SPACE_CAP {
        return Err(Error::TooLarge { n, cap: FULL_SPACE_CAP });
    }
    Ok(())
}

fn per_block_reflectors(chain: &MarkovChain) -> Vec<DVector<f64>> {
    let n = chain.n();
    let mut out = Vec::with_capacity(n + 1);
    out.push(DVector::zeros(n + 1));
    out.extend((0..n).map(|x| reflector(chain, x)));
    out
}

/// Dense `U_P = Σ_a |a⟩⟨a| ⊗ R_a` (identity on the reference block).
pub fn build_walk_unitary(chain: &MarkovChain) -> Result<DMatrix<f64>> {
    let n = chain.n();
    check_cap(n)?;
    let m = n + 1;
    let mut u = DMatrix::zeros(m * m, m * m);
    for (a, r) in per_block_reflectors(chain).iter().enumerate() {
        let block = dense_reflection(r);
        u.view_mut((a * m, a * m), (m, m)).copy_from(&block);
    }
    Ok(u)
}

/// Residuals recorded while building a [`WalkHamiltonian`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantReport {
    /// `max_a ‖R_a² - I‖_max`; bounds `‖V² - I‖`.
    pub involution: f64,
    /// `max_a ‖R_a - R_aᵀ‖_max`.
    pub symmetry: f64,
    /// `max_xy |⟨y,0|V|x,0⟩ - D_xy|`.
    pub node_block: f64,
    /// Square relation on a few fixed random node states.
    pub square_relation: f64,
    /// `max ‖H_P v - λ v‖` over the reduced eigenpairs.
    pub eigen_residual: f64,
    /// How far the spectrum leaves `[-1, 1]` (reported, not enforced).
    pub spectrum_excess: f64,
}

/// Quantum-walk Hamiltonian of one chain.
#[derive(Debug, Clone)]
pub struct WalkHamiltonian {
    n: usize,
    reflectors: Vec<DVector<f64>>,
    discriminant: Discriminant,
    /// Columns `γ_j`; zero where the rotation is stationary.
    partners: DMatrix<f64>,
    rates: DVector<f64>,
    reduced: Eigh,
    report: InvariantReport,
}

/// Builds `H_P` and verifies its invariants; fails with the offending
/// residual.
pub fn build_hamiltonian(chain: &MarkovChain) -> Result<WalkHamiltonian> {
    let n = chain.n();
    check_cap(n)?;
    let d = discriminant(chain)?;
    let reflectors = per_block_reflectors(chain);
    let mut w = WalkHamiltonian {
        n,
        reflectors,
        discriminant: d,
        partners: DMatrix::zeros(0, 0),
        rates: DVector::zeros(0),
        reduced: Eigh {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        },
        report: InvariantReport::default(),
    };
    w.report.involution = w
        .reflectors
        .iter()
        .map(|u| {
            let r = dense_reflection(u);
            (&r * &r - DMatrix::identity(n + 1, n + 1)).amax()
        })
        .fold(0.0, f64::max);
    // R = I - uuᵀ is symmetric up to the rounding in forming uuᵀ.
    w.report.symmetry = w
        .reflectors
        .iter()
        .map(|u| {
            let r = dense_reflection(u);
            (&r - r.transpose()).amax()
        })
        .fold(0.0, f64::max);
    if w.report.involution > INVOLUTION_TOL {
        return Err(Error::Invariant {
            what: "V is not an involution".into(),
            residual: w.report.involution,
        });
    }
    if w.report.symmetry > SYMMETRY_TOL {
        return Err(Error::Invariant {
            what: "V is not symmetric".into(),
            residual: w.report.symmetry,
        });
    }
    w.report.node_block = w.node_block_residual();
    if w.report.node_block > SQUARE_TOL {
        return Err(Error::Invariant {
            what: "node block of V differs from the discriminant".into(),
            residual: w.report.node_block,
        });
    }
    let mut rng = seeded(0x5157_a11e);
    w.report.square_relation = square_residual(&w, BUILD_SQUARE_TRIALS, &mut rng);
    if w.report.square_relation > SQUARE_TOL {
        return Err(Error::Invariant {
            what: "square relation H_P² = I - D² on node states".into(),
            residual: w.report.square_relation,
        });
    }
    w.decompose()?;
    Ok(w)
}

impl WalkHamiltonian {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `(n+1)²`.
    pub fn dim(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn discriminant(&self) -> &Discriminant {
        &self.discriminant
    }

    /// Householder vectors completing `U_P`, one per first-register index
    /// (zero for the reference block, where `R = I`).
    pub fn reflectors(&self) -> &[DVector<f64>] {
        &self.reflectors
    }

    pub fn report(&self) -> &InvariantReport {
        &self.report
    }

    /// Nonzero eigenvalues come in pairs `±rates[j]`, one per discriminant
    /// eigenvalue (ascending order of the discriminant).
    pub fn rotation_rates(&self) -> &DVector<f64> {
        &self.rates
    }

    /// `V v` in `O((n+1)²)`.
    pub fn apply_v(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = self.n + 1;
        assert_eq!(v.len(), m * m, "product-space vector expected");
        // T[c][e] = (R_c v_{c,·})_e
        let mut t = v.as_slice().to_vec();
        for c in 0..m {
            reflect(&self.reflectors[c], &mut t[c * m..(c + 1) * m]);
        }
        // (Vv)_{e,f} = Σ_c (R_e)_{fc} T[c][e]
        let mut out = vec![0.0; m * m];
        let mut column = vec![0.0; m];
        for e in 0..m {
            for c in 0..m {
                column[c] = t[c * m + e];
            }
            reflect(&self.reflectors[e], &mut column);
            out[e * m..(e + 1) * m].copy_from_slice(&column);
        }
        DVector::from_vec(out)
    }

    /// `A v = (VΠ₀ - Π₀V) v`, so that `H_P v = i A v`.
    pub fn apply_generator(&self, v: &DVector<f64>) -> DVector<f64> {
        let m = self.n + 1;
        let mut projected = DVector::zeros(m * m);
        for a in 0..m {
            projected[a * m] = v[a * m];
        }
        let mut out = self.apply_v(&projected);
        let vv = self.apply_v(v);
        for a in 0..m {
            out[a * m] -= vv[a * m];
        }
        out
    }

    /// `H_P ψ`.
    pub fn apply(&self, psi: &QuantumState) -> Result<QuantumState> {
        self.check_dim(psi.dim())?;
        let re = self.apply_generator(&psi.amplitudes().map(|a| a.re));
        let im = self.apply_generator(&psi.amplitudes().map(|a| a.im));
        Ok(QuantumState::unchecked(DVector::from_fn(re.len(), |i, _| C64::new(-im[i], re[i]))))
    }

    /// `H_P² ψ` for real `ψ`, which is `-A²ψ`.
    pub fn apply_square_real(&self, v: &DVector<f64>) -> DVector<f64> {
        -self.apply_generator(&self.apply_generator(v))
    }

    /// Dense `V`. Costs `O((n+1)⁶)` memory traffic; meant for checks.
    pub fn v_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut v = DMatrix::zeros(d, d);
        let mut e = DVector::zeros(d);
        for j in 0..d {
            e[j] = 1.0;
            v.set_column(j, &self.apply_v(&e));
            e[j] = 0.0;
        }
        v
    }

    /// Dense real antisymmetric generator `A`.
    pub fn generator_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut a = DMatrix::zeros(d, d);
        let mut e = DVector::zeros(d);
        for j in 0..d {
            e[j] = 1.0;
            a.set_column(j, &self.apply_generator(&e));
            e[j] = 0.0;
        }
        a
    }

    /// Dense `H_P = iA` as a standalone operator.
    pub fn hamiltonian_operator(&self) -> Result<HermitianOperator> {
        HermitianOperator::new(self.generator_matrix().map(|x| C64::new(0.0, x)))
    }

    /// Full dense check of `V² = I`, `V = Vᵀ`, Hermiticity and zero trace.
    pub fn verify_invariants(&self) -> Result<InvariantReport> {
        let v = self.v_matrix();
        let d = self.dim();
        let involution = (&v * &v - DMatrix::identity(d, d)).amax();
        let symmetry = (&v - v.transpose()).amax();
        let a = self.generator_matrix();
        let antisymmetry = (&a + a.transpose()).amax();
        let trace = a.trace().abs();
        let mut report = self.report;
        report.involution = involution;
        report.symmetry = symmetry;
        for (what, residual, tol) in [
            ("V² = I", involution, INVOLUTION_TOL),
            ("V = Vᵀ", symmetry, SYMMETRY_TOL),
            ("H_P Hermitian", antisymmetry, SYMMETRY_TOL),
            ("trace H_P = 0", trace, SYMMETRY_TOL),
        ] {
            if residual > tol {
                return Err(Error::Invariant {
                    what: what.into(),
                    residual,
                });
            }
        }
        Ok(report)
    }

    /// `ψ ⊗ |0⟩` for a node-space state.
    pub fn embed(&self, psi: &QuantumState) -> Result<QuantumState> {
        if psi.dim() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: psi.dim(),
            });
        }
        let mut out = DVector::zeros(self.dim());
        for x in 0..self.n {
            out[node_index(self.n, x)] = psi.amplitudes()[x];
        }
        Ok(QuantumState::unchecked(out))
    }

    fn embed_real(&self, psi: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for x in 0..self.n {
            out[node_index(self.n, x)] = psi[x];
        }
        out
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: dim,
            });
        }
        Ok(())
    }

    fn node_block_residual(&self) -> f64 {
        let n = self.n;
        let dm = self.discriminant.matrix();
        let mut worst = 0.0_f64;
        let mut e = DVector::zeros(self.dim());
        for x in 0..n {
            e[node_index(n, x)] = 1.0;
            let col = self.apply_v(&e);
            e[node_index(n, x)] = 0.0;
            for y in 0..n {
                worst = worst.max((col[node_index(n, y)] - dm[(y, x)]).abs());
            }
        }
        worst
    }

    fn decompose(&mut self) -> Result<()> {
        let n = self.n;
        let d = self.dim();
        let m = n + 1;
        let mu = self.discriminant.eigenvalues().clone();
        let phi = self.discriminant.eigenvectors().clone();
        let mut partners = DMatrix::zeros(d, n);
        let mut rates = DVector::zeros(n);
        let mut values = Vec::with_capacity(2 * n);
        let mut vectors: Vec<DVector<C64>> = Vec::with_capacity(2 * n);
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for j in 0..n {
            let beta = self.embed_real(&phi.column(j).into_owned());
            let gap = 1.0 - mu[j] * mu[j];
            if gap <= ROTATION_CUTOFF {
                values.push(0.0);
                vectors.push(beta.map(|x| C64::new(x, 0.0)));
                continue;
            }
            let sigma = gap.sqrt();
            let mut gamma = self.apply_v(&beta);
            for a in 0..m {
                gamma[a * m] = 0.0;
            }
            gamma /= sigma;
            rates[j] = sigma;
            for sign in [1.0, -1.0] {
                values.push(sign * sigma);
                vectors.push(DVector::from_fn(d, |i, _| {
                    C64::new(beta[i] * inv_sqrt2, sign * gamma[i] * inv_sqrt2)
                }));
            }
            partners.set_column(j, &gamma);
        }
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let k = order.len();
        let eig_values = DVector::from_iterator(k, order.iter().map(|&i| values[i]));
        let eig_vectors = DMatrix::from_fn(d, k, |r, c| vectors[order[c]][r]);

        let gram = eig_vectors.ad_mul(&eig_vectors) - DMatrix::<C64>::identity(k, k);
        let orthonormality = gram.iter().fold(0.0_f64, |a, x| a.max(x.norm()));
        let mut residual = orthonormality;
        for c in 0..k {
            let v = eig_vectors.column(c).into_owned();
            let hv = self.apply(&QuantumState::unchecked(v.clone()))?.into_amplitudes();
            let r = (hv - v * C64::new(eig_values[c], 0.0)).norm();
            residual = residual.max(r);
        }
        if residual > EIGEN_TOL {
            return Err(Error::Invariant {
                what: "reduced eigendecomposition of H_P".into(),
                residual,
            });
        }
        self.report.eigen_residual = residual;
        self.report.spectrum_excess = eig_values
            .iter()
            .map(|l| (l.abs() - 1.0).max(0.0))
            .fold(0.0, f64::max);
        self.partners = partners;
        self.rates = rates;
        self.reduced = Eigh {
            values: eig_values,
            vectors: eig_vectors,
        };
        Ok(())
    }

    /// Whether the spectrum stays inside `[-1, 1]` up to the soft tolerance.
    pub fn spectrum_within_unit_interval(&self) -> bool {
        self.report.spectrum_excess <= SPECTRUM_SOFT_TOL
    }
}

impl Spectrum for WalkHamiltonian {
    fn dim(&self) -> usize {
        WalkHamiltonian::dim(self)
    }

    /// Eigenpairs spanning the subspace reachable from node states. `H_P`
    /// is zero on its orthogonal complement.
    fn eigh(&self) -> Result<&Eigh> {
        Ok(&self.reduced)
    }
}

fn square_residual<R: Rng + ?Sized>(w: &WalkHamiltonian, trials: usize, rng: &mut R) -> f64 {
    let n = w.n;
    let d = w.discriminant.matrix();
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let mut psi = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = psi.norm();
        if norm > 0.0 {
            psi /= norm;
        }
        let lhs = w.apply_square_real(&w.embed_real(&psi));
        let rhs = w.embed_real(&(&psi - d * (d * &psi)));
        worst = worst.max((lhs - rhs).norm());
    }
    worst
}

/// `max ‖H_P²(ψ⊗|0⟩) - ((I - D²)ψ)⊗|0⟩‖` over random unit node states.
pub fn verify_square_relation<R: Rng + ?Sized>(
    w: &WalkHamiltonian,
    d: &Discriminant,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if d.n() != w.n {
        return Err(Error::DimensionMismatch {
            expected: w.n,
            got: d.n(),
        });
    }
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let mut psi = DVector::from_fn(w.n, |_, _| rng.sample::<f64, _>(StandardNormal));
        psi /= psi.norm();
        let lhs = w.apply_square_real(&w.embed_real(&psi));
        let dm = d.matrix();
        let rhs = w.embed_real(&(&psi - dm * (dm * &psi)));
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

/// `e^{-iH_Pτ}(ψ ⊗ |0⟩)`. Real node states go through the real rotation
/// form; complex ones through the reduced eigenbasis.
pub fn evolve_edge_state(w: &WalkHamiltonian, psi_node: &QuantumState, tau: f64) -> Result<QuantumState> {
    match psi_node.as_real(0.0) {
        Some(real) if real.len() == w.n => {
            let out = evolve_edge_state_real(w, &real, tau)?;
            Ok(QuantumState::unchecked(out.map(|x| C64::new(x, 0.0))))
        }
        _ => evolve_edge_state_spectral(w, psi_node, tau),
    }
}

/// Complex spectral route of [`evolve_edge_state`].
pub fn evolve_edge_state_spectral(w: &WalkHamiltonian, psi_node: &QuantumState, tau: f64) -> Result<QuantumState> {
    let start = w.embed(psi_node)?;
    let e = &w.reduced;
    let mut c = e.vectors.ad_mul(start.amplitudes());
    for (ci, &l) in c.iter_mut().zip(e.values.iter()) {
        *ci *= C64::from_polar(1.0, -l * tau);
    }
    Ok(QuantumState::unchecked(&e.vectors * c))
}

/// `e^{τA}(ψ ⊗ |0⟩)` for real `ψ`, equal to `e^{-iH_Pτ}(ψ ⊗ |0⟩)`.
///
/// Each discriminant mode `β_j` turns toward its partner `γ_j`:
/// `β_j ↦ cos(σ_j τ) β_j + sin(σ_j τ) γ_j`.
pub fn evolve_edge_state_real(w: &WalkHamiltonian, psi_node: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    if psi_node.len() != w.n {
        return Err(Error::DimensionMismatch {
            expected: w.n,
            got: psi_node.len(),
        });
    }
    let phi = w.discriminant.eigenvectors();
    let alpha = phi.tr_mul(psi_node);
    let mut node_part = DVector::zeros(w.n);
    let mut weights = DVector::zeros(w.n);
    for j in 0..w.n {
        let angle = w.rates[j] * tau;
        node_part += phi.column(j) * (alpha[j] * angle.cos());
        weights[j] = alpha[j] * angle.sin();
    }
    let mut out = &w.partners * weights;
    for x in 0..w.n {
        out[node_index(w.n, x)] += node_part[x];
    }
    Ok(out)
}

/// `Π_M ⊗ I`: projector of the first register onto the marked nodes.
pub fn marked_projector(n: usize, marked: &MarkedSet) -> Result<Projector> {
    if marked.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: marked.n(),
        });
    }
    if marked.is_empty() {
        return Err(invalid("marked set is empty"));
    }
    let m = n + 1;
    Projector::from_indices(
        m * m,
        marked.members().iter().flat_map(|&x| (0..m).map(move |f| product_index(n, x + 1, f))),
    )
}

/// `⟨ψ|(Π_M ⊗ I)|ψ⟩`.
pub fn marked_probability(state: &QuantumState, marked: &MarkedSet) -> Result<f64> {
    let n = marked.n();
    let m = n + 1;
    if state.dim() != m * m {
        return Err(Error::DimensionMismatch {
            expected: m * m,
            got: state.dim(),
        });
    }
    Ok(marked_projector(n, marked)?.expectation(state.amplitudes()))
}

/// Marginal of the first register: entry 0 is the reference state, entry
/// `x + 1` is node `x`.
pub fn first_register_distribution(n: usize, state: &QuantumState) -> Result<Vec<f64>> {
    let m = n + 1;
    if state.dim() != m * m {
        return Err(Error::DimensionMismatch {
            expected: m * m,
            got: state.dim(),
        });
    }
    let a = state.amplitudes();
    Ok((0..m)
        .map(|first| (0..m).map(|f| a[first * m + f].norm_sqr()).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{exact_density, fast_forward_bound, projected_probability};
    use crate::markov::{generate, interpolate, make_lazy, GraphFamily};
    use crate::rng::seeded;
    use rand::Rng;

    fn random_reversible<R: Rng>(n: usize, rng: &mut R) -> MarkovChain {
        // random symmetric weights on a connected support
        let mut w = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let keep = b == a + 1 || rng.random_bool(0.5);
                if keep {
                    let x = rng.random_range(0.1..1.0);
                    w[(a, b)] = x;
                    w[(b, a)] = x;
                }
            }
        }
        crate::markov::from_weighted_graph(&w).unwrap()
    }

    fn swap(n: usize) -> DMatrix<f64> {
        let m = n + 1;
        let mut s = DMatrix::zeros(m * m, m * m);
        for a in 0..m {
            for b in 0..m {
                s[(b * m + a, a * m + b)] = 1.0;
            }
        }
        s
    }

    #[test]
    fn walk_unitary_defining_columns_and_orthogonality() {
        let mut rng = seeded(1);
        for n in [2, 3, 5, 7] {
            let chain = random_reversible(n, &mut rng);
            let u = build_walk_unitary(&chain).unwrap();
            let d = (n + 1) * (n + 1);
            assert!((u.transpose() * &u - DMatrix::identity(d, d)).amax() <= 1e-10);
            for x in 0..n {
                let col = u.column(node_index(n, x));
                let mut expected = DVector::zeros(d);
                for y in 0..n {
                    expected[product_index(n, x + 1, y + 1)] = chain.transition()[(x, y)].sqrt();
                }
                assert!((col - expected).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn flip_chain_unitary_moves_to_other_node() {
        let chain = MarkovChain::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let u = build_walk_unitary(&chain).unwrap();
        let col = u.column(node_index(2, 0));
        assert!((col[product_index(2, 1, 2)] - 1.0).abs() < 1e-15);
        assert!((col.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn structured_v_matches_dense_product() {
        let mut rng = seeded(2);
        for n in [2, 4, 6] {
            let chain = random_reversible(n, &mut rng);
            let u = build_walk_unitary(&chain).unwrap();
            let dense = u.transpose() * swap(n) * &u;
            let w = build_hamiltonian(&chain).unwrap();
            assert!((w.v_matrix() - dense).amax() < 1e-14);
            w.verify_invariants().unwrap();
        }
    }

    #[test]
    fn node_block_is_discriminant_on_lazy_k3() {
        let chain = make_lazy(&generate(GraphFamily::Complete, 3).unwrap());
        let w = build_hamiltonian(&chain).unwrap();
        let v = w.v_matrix();
        let p = chain.transition();
        for x in 0..3 {
            for y in 0..3 {
                let expected = (p[(x, y)] * p[(y, x)]).sqrt();
                assert!((v[(node_index(3, y), node_index(3, x))] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn commutator_action_on_node_states() {
        let mut rng = seeded(3);
        let chain = random_reversible(5, &mut rng);
        let w = build_hamiltonian(&chain).unwrap();
        let psi = DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0));
        let start = w.embed_real(&psi);
        // H(ψ⊗0) = iV(ψ⊗0) - i(Dψ)⊗0
        let expected = w.apply_v(&start) - w.embed_real(&(w.discriminant().matrix() * &psi));
        let got = w.apply_generator(&start);
        assert!((got - &expected).amax() < 1e-10);
        // H·V(ψ⊗0) = iV((Dψ)⊗0) - i(ψ⊗0)
        let vstart = w.apply_v(&start);
        let expected = w.apply_v(&w.embed_real(&(w.discriminant().matrix() * &psi))) - &start;
        assert!((w.apply_generator(&vstart) - expected).amax() < 1e-10);
    }

    #[test]
    fn hamiltonian_is_traceless_and_hermitian() {
        let chain = make_lazy(&generate(GraphFamily::Cycle, 4).unwrap());
        let w = build_hamiltonian(&chain).unwrap();
        let h = w.hamiltonian_operator().unwrap();
        let tr: C64 = h.matrix().trace();
        assert!(tr.norm() < 1e-14);
    }

    #[test]
    fn square_relation_on_random_chains() {
        let mut rng = seeded(4);
        for _ in 0..20 {
            let n = rng.random_range(2..=10);
            let chain = random_reversible(n, &mut rng);
            let w = build_hamiltonian(&chain).unwrap();
            let r = verify_square_relation(&w, w.discriminant(), 5, &mut rng).unwrap();
            assert!(r <= 1e-9, "residual {r}");
        }
    }

    #[test]
    fn stationary_state_is_annihilated() {
        let chain = make_lazy(&generate(GraphFamily::Barbell, 3).unwrap());
        let w = build_hamiltonian(&chain).unwrap();
        let sqrt_pi = chain.pi().unwrap().map(f64::sqrt);
        let v = w.apply_square_real(&w.embed_real(&sqrt_pi));
        assert!(v.norm() < 1e-9);
        let psi = QuantumState::from_real_vector(&sqrt_pi).unwrap();
        let start = w.embed(&psi).unwrap();
        for tau in [0.3, 5.0, -17.0] {
            let out = evolve_edge_state(&w, &psi, tau).unwrap();
            assert!((out.amplitudes() - start.amplitudes()).norm() < 1e-10);
        }
    }

    #[test]
    fn flip_chain_square_is_zero() {
        let chain = MarkovChain::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let w = build_hamiltonian(&chain).unwrap();
        let s = 0.5f64.sqrt();
        let v = w.apply_square_real(&w.embed_real(&DVector::from_vec(vec![s, -s])));
        assert!(v.norm() < 1e-12);
    }

    #[test]
    fn reduced_spectrum_matches_dense() {
        let mut rng = seeded(5);
        for n in [2, 3, 5] {
            let chain = random_reversible(n, &mut rng);
            let w = build_hamiltonian(&chain).unwrap();
            let dense = w.hamiltonian_operator().unwrap();
            let full = dense.eigh().unwrap();
            // every reduced eigenvalue appears in the dense spectrum, the rest
            // of the dense spectrum is zero
            let mut dense_vals: Vec<f64> = full.values.iter().copied().collect();
            for &l in w.eigh().unwrap().values.iter() {
                let pos = dense_vals
                    .iter()
                    .position(|&x| (x - l).abs() < 1e-9)
                    .unwrap_or_else(|| panic!("{l} missing"));
                dense_vals.remove(pos);
            }
            assert!(dense_vals.iter().all(|x| x.abs() < 1e-9));
            assert!(w.spectrum_within_unit_interval());
        }
    }

    #[test]
    fn evolution_routes_agree() {
        let mut rng = seeded(6);
        let chain = random_reversible(6, &mut rng);
        let w = build_hamiltonian(&chain).unwrap();
        let dense = w.hamiltonian_operator().unwrap();
        let psi = QuantumState::normalized(DVector::from_fn(6, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.0))).unwrap();
        for tau in [0.0, 0.7, -3.1, 12.0] {
            let real = evolve_edge_state(&w, &psi, tau).unwrap();
            let spectral = evolve_edge_state_spectral(&w, &psi, tau).unwrap();
            let reference = dense.evolve(tau, &w.embed(&psi).unwrap()).unwrap();
            assert!((real.amplitudes() - spectral.amplitudes()).norm() < 1e-10);
            assert!((real.amplitudes() - reference.amplitudes()).norm() < 1e-10);
            assert!((real.norm_sqr() - 1.0).abs() < 1e-10);
        }
        let start = evolve_edge_state(&w, &psi, 0.0).unwrap();
        assert!((start.amplitudes() - w.embed(&psi).unwrap().amplitudes()).norm() < 1e-14);
    }

    #[test]
    fn complex_node_states_evolve_unitarily() {
        let mut rng = seeded(7);
        let chain = random_reversible(4, &mut rng);
        let w = build_hamiltonian(&chain).unwrap();
        let psi = QuantumState::normalized(DVector::from_fn(4, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }))
        .unwrap();
        let dense = w.hamiltonian_operator().unwrap();
        for _ in 0..10 {
            let tau = rng.random_range(-20.0..20.0);
            let out = evolve_edge_state(&w, &psi, tau).unwrap();
            assert!((out.norm_sqr() - 1.0).abs() < 1e-10);
            let reference = dense.evolve(tau, &w.embed(&psi).unwrap()).unwrap();
            assert!((out.amplitudes() - reference.amplitudes()).norm() < 1e-10);
        }
    }

    #[test]
    fn marked_probability_basics() {
        let chain = make_lazy(&generate(GraphFamily::Complete, 4).unwrap());
        let w = build_hamiltonian(&chain).unwrap();
        let marked = MarkedSet::single(4, 1).unwrap();
        let mut u = chain.pi().unwrap().map(f64::sqrt);
        u[1] = 0.0;
        let start = w.embed(&QuantumState::from_real_vector(&u).unwrap()).unwrap();
        assert_eq!(marked_probability(&start, &marked).unwrap(), 0.0);
        assert!(MarkedSet::new(4, []).map(|m| marked_probability(&start, &m)).map_or(true, |r| r.is_err()));

        let mut rng = seeded(8);
        let psi = QuantumState::normalized(DVector::from_fn(4, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.0))).unwrap();
        let out = evolve_edge_state(&w, &psi, 2.3).unwrap();
        let all = MarkedSet::new(4, 0..4).unwrap();
        let total = marked_probability(&out, &all).unwrap();
        let dist = first_register_distribution(4, &out).unwrap();
        assert!((total - dist[1..].iter().sum::<f64>()).abs() < 1e-12);
        let singles: f64 = (0..4).map(|x| marked_probability(&out, &MarkedSet::single(4, x).unwrap()).unwrap()).sum();
        assert!((singles - total).abs() < 1e-12);
    }

    #[test]
    fn walk_probability_dominates_fast_forward_bound() {
        let mut rng = seeded(9);
        for n in [3, 5, 8] {
            let base = make_lazy(&generate(GraphFamily::Complete, n).unwrap());
            let marked = MarkedSet::single(n, 0).unwrap();
            let proj = marked_projector(n, &marked).unwrap();
            let node_proj = Projector::from_indices(n, [0]).unwrap();
            for _ in 0..20 {
                let s = rng.random_range(0.0..0.99);
                let t = rng.random_range(0.0..30.0);
                let ic = interpolate(&base, &marked, s).unwrap();
                let w = build_hamiltonian(ic.chain()).unwrap();
                let mut u = ic.chain().pi().unwrap().map(f64::sqrt);
                u[0] = 0.0;
                let psi = QuantumState::from_real_vector(&u).unwrap();
                let rho = exact_density(&w, &w.embed(&psi).unwrap(), t).unwrap();
                let exact = projected_probability(&rho, &proj).unwrap();
                let bound = fast_forward_bound(w.discriminant(), &psi, &node_proj, t).unwrap();
                assert!(exact >= bound - 1e-9, "n={n} s={s} t={t}: {exact} < {bound}");
            }
        }
    }

    #[test]
    fn rejects_oversized_chains() {
        let chain = generate(GraphFamily::Cycle, FULL_SPACE_CAP + 1).unwrap();
        assert!(matches!(build_hamiltonian(&chain), Err(Error::TooLarge { .. })));
    }
}
