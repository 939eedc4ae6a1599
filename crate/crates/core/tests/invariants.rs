//! Property tests over randomly generated chains, Hamiltonians and states.

mod common;

use proptest::prelude::*;

use common::*;
use ctqw::bounds::check_success_prob_lemma;
use ctqw::gaussian::{exact_density, fast_forward_bound as lib_bound, projected_probability, Projector};
use ctqw::groundstate::evolution_time;
use ctqw::markov::{discriminant, interpolate, interpolated_discriminant, interpolated_stationary, make_lazy, MarkedSet};
use ctqw::rng::seeded;
use ctqw::search::{InterpolationSchedule, SearchInstance};
use ctqw::spectral::QuantumState;

fn marked_from(n: usize, picks: &[usize]) -> MarkedSet {
    let mut members: Vec<usize> = picks.iter().map(|p| p % n).collect();
    members.sort_unstable();
    members.dedup();
    if members.len() == n {
        members.pop();
    }
    MarkedSet::new(n, members).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn interpolated_discriminant_matches_interpolated_chain(
        seed in any::<u64>(), n in 2usize..9, picks in prop::collection::vec(any::<usize>(), 1..4), s in 0.0f64..1.0,
    ) {
        let chain = make_lazy(&random_reversible(n, &mut seeded(seed)));
        let marked = marked_from(n, &picks);
        let fast = interpolated_discriminant(&discriminant(&chain).unwrap(), &marked, s).unwrap();
        let direct = discriminant(interpolate(&chain, &marked, s).unwrap().chain()).unwrap();
        prop_assert!((fast.matrix() - direct.matrix()).abs().max() < 1e-12);
        // lazy chains keep the spectrum in [0, 1]
        for &l in fast.eigenvalues().iter() {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&l));
        }
    }

    #[test]
    fn interpolated_stationary_is_fixed_point(
        seed in any::<u64>(), n in 2usize..9, picks in prop::collection::vec(any::<usize>(), 1..4), s in 0.0f64..0.999,
    ) {
        let chain = random_reversible(n, &mut seeded(seed));
        let marked = marked_from(n, &picks);
        let pi = interpolated_stationary(&chain, &marked, s).unwrap();
        let p = interpolate(&chain, &marked, s).unwrap().chain().transition().clone();
        prop_assert!((pi.sum() - 1.0).abs() < 1e-12);
        prop_assert!((p.transpose() * &pi - &pi).abs().max() < 1e-12);
        // marked mass grows from π(M) toward 1
        let base = marked.mass(chain.pi().unwrap());
        prop_assert!(marked.mass(&pi) >= base - 1e-12);
    }

    #[test]
    fn dephased_density_is_a_state(seed in any::<u64>(), dim in 1usize..10, t in 0.0f64..50.0) {
        let mut rng = seeded(seed);
        let h = random_hermitian(dim, &mut rng);
        let psi = random_state(dim, &mut rng);
        let rho = exact_density(&h, &psi, t).unwrap().to_dense();
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-10);
        prop_assert!((&rho - rho.adjoint()).iter().all(|z| z.norm() < 1e-12));
        let e = rho.symmetric_eigen();
        prop_assert!(e.eigenvalues.iter().all(|&l| l > -1e-10));
    }

    #[test]
    fn projection_probabilities_sum_to_one(seed in any::<u64>(), dim in 2usize..10, t in 0.0f64..50.0, k in 0usize..10) {
        let mut rng = seeded(seed);
        let h = random_hermitian(dim, &mut rng);
        let psi = random_state(dim, &mut rng);
        let rho = exact_density(&h, &psi, t).unwrap();
        let cut = k % dim;
        let low = projected_probability(&rho, &Projector::from_indices(dim, 0..cut).unwrap()).unwrap();
        let high = projected_probability(&rho, &Projector::from_indices(dim, cut..dim).unwrap()).unwrap();
        prop_assert!((low + high - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fast_forward_bound_matches_reference(
        seed in any::<u64>(), n in 2usize..8, picks in prop::collection::vec(any::<usize>(), 1..3),
        s in 0.0f64..1.0, t in 0.0f64..80.0,
    ) {
        let chain = make_lazy(&random_reversible(n, &mut seeded(seed)));
        let marked = marked_from(n, &picks);
        let instance = SearchInstance::new(chain.clone(), marked.clone()).unwrap();
        let want = fast_forward_bound(chain.transition(), marked.members(), s, t);
        prop_assert!((instance.bound(t, s).unwrap() - want).abs() < 1e-10);
        let d = instance.discriminant_at(s).unwrap();
        let psi = QuantumState::from_real_vector(instance.unmarked_root()).unwrap();
        let proj = Projector::from_indices(n, marked.members().iter().copied()).unwrap();
        prop_assert!((lib_bound(&d, &psi, &proj, t).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn exact_walk_dominates_bound(
        seed in any::<u64>(), n in 2usize..6, s in 0.0f64..1.0, t in 0.0f64..40.0,
    ) {
        let chain = make_lazy(&random_reversible(n, &mut seeded(seed)));
        let instance = SearchInstance::new(chain, MarkedSet::single(n, 0).unwrap()).unwrap();
        prop_assert!(instance.exact_success_probability(t, s).unwrap() >= instance.bound(t, s).unwrap() - 1e-9);
    }

    #[test]
    fn success_probability_lemma(
        seed in any::<u64>(), n in 2usize..8, s in 0.0f64..1.0, t in 0.0f64..60.0, t2 in 0.0f64..60.0,
    ) {
        let chain = make_lazy(&random_reversible(n, &mut seeded(seed)));
        let marked = MarkedSet::single(n, 0).unwrap();
        prop_assert!(check_success_prob_lemma(&chain, &marked, s, t, t2).unwrap().passed());
    }

    #[test]
    fn schedule_grid_shape(horizon in 0.0f64..5000.0) {
        let g = InterpolationSchedule::new(horizon).unwrap();
        let len = g.len();
        prop_assert!(len.is_power_of_two());
        prop_assert!(len as f64 >= horizon && (len == 1 || ((len / 2) as f64) < horizon));
        prop_assert!(g.grid().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g.grid().iter().all(|&s| (0.0..1.0).contains(&s)));
    }

    #[test]
    fn evolution_time_monotone(gap in 0.05f64..2.0, eta in 0.05f64..0.7, eps in 1e-6f64..0.5) {
        let (t, big_t) = evolution_time(gap, eta, eps).unwrap();
        let (t_tighter, _) = evolution_time(gap, eta, eps / 2.0).unwrap();
        let (t_wider, _) = evolution_time(gap * 2.0, eta, eps).unwrap();
        prop_assert!((big_t * big_t - 2.0 * t).abs() < 1e-9 * t.max(1.0));
        prop_assert!(t_tighter > t);
        prop_assert!((t / t_wider - 4.0).abs() < 1e-9);
    }
}
