//! Scan the partial-reflection invariant across the dimerization ratio of
//! the bond-alternating XXZ chain: +1 in the trivial phase, near -1 in the
//! topological one.

use shadowkit::observables::{central_intervals, partial_reflection_invariant};
use shadowkit::simulator::{ground_state, xxz_bond_alternating};

fn main() -> shadowkit::Result<()> {
    let n = 12;
    let (i1, i2) = central_intervals(n, 4)?;
    println!("intervals {i1:?} and {i2:?}");
    for ratio in [0.2, 0.5, 0.8, 1.0, 1.25, 2.0, 3.0] {
        let gs = ground_state(&xxz_bond_alternating(n, 1.0, ratio, 0.5), 1e-8)?;
        let z = partial_reflection_invariant(&gs.state, i1.clone(), i2.clone())?;
        println!("J'/J = {ratio:<4}: Z_R = {z:+.3}");
    }
    Ok(())
}
