//! Build chains, inspect their stationary distribution and hitting times,
//! and interpolate toward a marked set.

use ctqw::markov::{
    discriminant, generate, hitting_time, interpolate, make_lazy, GraphFamily, MarkedSet, MarkovChain,
};
use nalgebra::dmatrix;

fn main() -> ctqw::Result<()> {
    // A hand-written three-state chain.
    let p = dmatrix![
        0.5, 0.5, 0.0;
        0.25, 0.5, 0.25;
        0.0, 0.5, 0.5
    ];
    let chain = MarkovChain::new(p)?;
    println!("pi = {:?}", chain.pi()?.as_slice());
    println!("lazy = {}, ergodic = {}", chain.is_lazy(), chain.is_ergodic());

    let marked = MarkedSet::single(3, 2)?;
    println!("HT to node 2 = {:.4}", hitting_time(&chain, &marked)?);

    // Generated families, made lazy.
    // Sizes: node count, except the torus side and hypercube dimension.
    for (family, size) in [(GraphFamily::Complete, 16), (GraphFamily::Cycle, 16), (GraphFamily::Torus2d, 4), (GraphFamily::Hypercube, 4)] {
        let g = make_lazy(&generate(family, size)?);
        let m = MarkedSet::single(g.n(), 0)?;
        let d = discriminant(&g)?;
        let gap = 1.0 - d.eigenvalues().iter().cloned().filter(|l| *l < 1.0 - 1e-9).fold(f64::MIN, f64::max);
        println!("{family:>9}:{size:<3} HT = {:8.3}  spectral gap = {gap:.4}", hitting_time(&g, &m)?);
    }

    // Interpolated chain P(s): marked nodes become absorbing as s -> 1.
    let cycle = make_lazy(&generate(GraphFamily::Cycle, 8)?);
    let m = MarkedSet::single(8, 0)?;
    for s in [0.0, 0.5, 0.9] {
        let ps = interpolate(&cycle, &m, s)?;
        let pi = ps.chain().pi()?;
        println!("s = {s}: pi(M) = {:.4}", m.mass(pi));
    }

    let doc = cycle.to_json()?;
    let back = ctqw::markov::MarkovChain::from_json(&doc)?;
    println!("JSON round trip: {} bytes, n = {}", doc.len(), back.n());
    Ok(())
}
