//! Ground-state preparation by Gaussian time evolution of a shifted
//! Hamiltonian, with the exact map and the ancilla circuit.

use ctqw::gaussian::AncillaGrid;
use ctqw::groundstate::{evolution_time, prepare, prepare_via_ancilla, random_problem};
use ctqw::rng::seeded;

fn main() -> ctqw::Result<()> {
    let (t, total) = evolution_time(0.5, 0.1, 0.01)?;
    println!("gap 0.5, overlap 0.1, accuracy 0.01: t = {t:.3}, T = {total:.3}");

    let mut rng = seeded(5);
    for dim in [4, 8, 16] {
        let problem = random_problem(dim, Some(0.3), 1e-3, &mut rng)?;
        let exact = prepare(&problem)?;
        let report = exact.report(&problem);
        println!(
            "dim {dim:2}: gap {:.3}  T = {:.2}  success = {:.4}  error = {:.2e}",
            report.delta, report.total_time, report.success_prob, report.achieved_error
        );
        if dim <= 8 {
            let circuit = prepare_via_ancilla(&problem, &AncillaGrid::default())?;
            println!(
                "        ancilla: success = {:.4}  error = {:.2e}",
                circuit.success_probability, circuit.achieved_error
            );
        }
    }
    Ok(())
}
