//! Quantum time against hitting time across graph sizes, from the
//! node-space bound only, so sizes beyond the full-space cap are fine.

use ctqw::markov::GraphFamily;
use ctqw::search::{scaling_experiment, MarkedRule};
use ctqw::stats::log_log_slope;

fn main() -> ctqw::Result<()> {
    let sizes = [8, 16, 32, 64, 128];
    for family in [GraphFamily::Complete, GraphFamily::Cycle] {
        let rows = scaling_experiment(family, &sizes, 3.0, MarkedRule::Single, 1)?;
        for r in &rows {
            println!(
                "{family:>8} n={:4} HT={:10.2} T={:10.2} grid={:5} bound={:.4} quantum={:9.3}",
                r.n, r.ht, r.t, r.s_grid_size, r.bound_mean, r.quantum_time_per_find
            );
        }
        let ht: Vec<f64> = rows.iter().map(|r| r.ht).collect();
        let qt: Vec<f64> = rows.iter().map(|r| r.quantum_time_per_find).collect();
        println!("{family}: slope of log quantum time vs log HT = {:.3}\n", log_log_slope(&ht, &qt));
    }
    Ok(())
}
