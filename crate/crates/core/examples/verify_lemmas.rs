//! Numerical checks of the inequalities that relate the quantum success
//! probability to classical escape events.

use ctqw::bounds::{check_ct_dt_lemma, check_lazy_square_lemma, check_success_prob_lemma, Kernel, Quadrature};
use ctqw::markov::{generate, hitting_time, make_lazy, GraphFamily, MarkedSet};

fn main() -> ctqw::Result<()> {
    let chain = make_lazy(&generate(GraphFamily::Cycle, 10)?);
    let marked = MarkedSet::new(10, [0])?;
    let horizon = (3.0 * hitting_time(&chain, &marked)?).ceil() as u32;

    let mut reports = Vec::new();
    for (t, t2) in [(1.0, 1.0), (5.0, 20.0), (40.0, 3.0)] {
        reports.push(check_success_prob_lemma(&chain, &marked, 0.7, t, t2)?);
    }
    reports.push(check_ct_dt_lemma(&chain, &marked, horizon, Kernel::Plain, Quadrature::default())?);
    reports.push(check_lazy_square_lemma(&chain, &marked, horizon)?);

    for r in reports {
        println!(
            "{:20} {:?}  lhs = {:.6e}  rhs = {:.6e}  budget = {:.1e}\n    {}",
            r.lemma, r.verdict, r.lhs, r.rhs, r.error_budget, r.instance
        );
    }
    Ok(())
}
