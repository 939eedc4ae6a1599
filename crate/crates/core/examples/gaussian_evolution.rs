//! Evolution for a Gaussian-distributed time: the averaged state equals a
//! dephased density matrix, and its projections match imaginary-time
//! damping for squared Hamiltonians.

use ctqw::gaussian::{exact_density, imaginary_time_bound, monte_carlo_probability, projected_probability, Projector};
use ctqw::rng::seeded;
use ctqw::spectral::{HermitianOperator, QuantumState};
use nalgebra::dmatrix;

fn main() -> ctqw::Result<()> {
    // Hopping chain; the projector onto site 0 does not commute with H.
    let h = HermitianOperator::from_real_symmetric(&dmatrix![
        0.0, 0.6, 0.0, 0.0;
        0.6, 0.2, 0.6, 0.0;
        0.0, 0.6, -0.1, 0.6;
        0.0, 0.0, 0.6, 0.3
    ])?;
    let psi0 = QuantumState::from_real(&[0.0, 0.0, 0.0, 1.0])?;
    let site = Projector::from_indices(4, [0])?;
    let mut rng = seeded(11);

    for t in [0.5, 2.0, 5.0, 20.0] {
        let rho = exact_density(&h, &psi0, t)?;
        let exact = projected_probability(&rho, &site)?;
        let mc = monte_carlo_probability(&h, &psi0, &site, t, 20_000, &mut rng)?;
        let damped = imaginary_time_bound(&h, &psi0, &site, t)?;
        println!(
            "t = {t:5.1}  trace = {:.6}  P(site 0) = {exact:.5}  sampled = {:.5} +- {:.5}  damped = {damped:.5}",
            rho.trace(),
            mc.mean,
            mc.std_error
        );
    }
    Ok(())
}
