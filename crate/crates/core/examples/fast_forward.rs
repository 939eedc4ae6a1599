//! Node-space lower bound on the walk's success probability against the
//! exact full-space simulation, over the interpolation grid.

use ctqw::markov::{generate, make_lazy, GraphFamily, MarkedSet};
use ctqw::search::{InterpolationSchedule, SearchInstance};

fn main() -> ctqw::Result<()> {
    let chain = make_lazy(&generate(GraphFamily::Cycle, 12)?);
    let marked = MarkedSet::new(12, [0, 6])?;
    let instance = SearchInstance::new(chain, marked)?;
    let ht = instance.hitting_time();
    let t = 3.0 * ht;
    println!("HT = {ht:.3}, T = {t:.3}, pi(M) = {:.4}", instance.marked_mass());

    let schedule = InterpolationSchedule::new(t)?;
    println!("{:>8} {:>10} {:>10}", "s", "bound", "exact");
    for &s in schedule.grid().iter().step_by(8) {
        println!("{s:8.4} {:10.5} {:10.5}", instance.bound(t, s)?, instance.exact_success_probability(t, s)?);
    }
    println!("averaged bound = {:.5}", instance.expected_bound(t)?);
    println!("averaged exact = {:.5}", instance.expected_exact(t)?);
    Ok(())
}
