//! Randomized quantum-walk search repeated until a marked node is found,
//! next to the classical random-walk baseline.

use ctqw::markov::{generate, make_lazy, GraphFamily, MarkedSet};
use ctqw::rng::seeded;
use ctqw::search::{classical_baseline, SearchInstance, SearchOptions};

fn main() -> ctqw::Result<()> {
    let chain = make_lazy(&generate(GraphFamily::Torus2d, 5)?);
    let marked = MarkedSet::single(25, 12)?;
    let instance = SearchInstance::new(chain.clone(), marked.clone())?;
    let options = SearchOptions::default();
    let mut rng = seeded(2024);

    let ht = instance.hitting_time();
    println!("torus 5x5, HT = {ht:.2}, T = {:.2}", options.c_t * ht);
    println!("single-round success = {:.4}", instance.round_success_probability(options.c_t * ht)?);

    let max_rounds = instance.default_max_rounds(&options);
    let outcomes = instance.run_trials(&options, max_rounds, 200, 2024)?;
    let found = outcomes.iter().filter(|o| o.found).count();
    let rounds: f64 = outcomes.iter().map(|o| o.rounds as f64).sum::<f64>() / outcomes.len() as f64;
    let time: f64 = outcomes.iter().map(|o| o.evolution_time).sum::<f64>() / outcomes.len() as f64;
    println!("found {found}/200, mean rounds {rounds:.2}, mean evolution time {time:.2}");

    let classical = classical_baseline(&chain, &marked, 2000, &mut rng)?;
    println!("classical steps to hit: {:.2} +- {:.2}", classical.mean, classical.std_error);
    Ok(())
}
