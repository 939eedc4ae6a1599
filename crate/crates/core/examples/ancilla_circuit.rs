//! Gaussian damping via a discretized ancilla register and post-selection,
//! compared with the exact map `e^{-tH²}`.

use ctqw::gaussian::{ancilla_evolve, AncillaGrid};
use ctqw::spectral::{HermitianOperator, QuantumState, C64};
use nalgebra::DVector;

fn main() -> ctqw::Result<()> {
    let h = HermitianOperator::from_diagonal(&[-0.4, 0.0, 0.25, 0.9]);
    let psi0 = QuantumState::normalized(DVector::from_vec(vec![0.4, 0.6, 0.5, 0.48]).map(C64::from))?;
    let grid = AncillaGrid::default();
    println!("grid: L = {}, N = {}, norm = {:.12}", grid.half_width(), grid.points(), grid.quadrature_norm());

    for t in [0.5, 2.0, 8.0] {
        let out = ancilla_evolve(&h, &psi0, t, &grid)?;
        let expected: f64 = [-0.4f64, 0.0, 0.25, 0.9]
            .iter()
            .zip(psi0.probabilities())
            .map(|(l, p)| p * (-2.0 * t * l * l).exp())
            .sum();
        println!(
            "t = {t:4.1}  post-selection = {:.8} (exact {expected:.8})  fidelity = {:.12}",
            out.probability, out.fidelity
        );
    }

    let coarse = AncillaGrid::new(10.0, 65)?;
    match ancilla_evolve(&h, &psi0, 8.0, &coarse) {
        Err(e) => println!("coarse grid rejected: {e}"),
        Ok(o) => println!("coarse grid fidelity {:.6}", o.fidelity),
    }
    Ok(())
}
