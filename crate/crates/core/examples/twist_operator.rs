//! Evaluate the local twist operator on the spin-1 AKLT chain and on a
//! trivial product state.

use shadowkit::observables::twist_expectation;
use shadowkit::simulator::{aklt_spin1, ground_state, StateVector};

fn main() -> shadowkit::Result<()> {
    let n = 8;
    let product = StateVector::basis(3, &vec![1; n])?;
    let aklt = ground_state(&aklt_spin1(n), 1e-8)?;
    println!("AKLT ground energy {:.4}, gap {:.4}", aklt.energy, aklt.gap);
    for ell in 1..=3 {
        let p = twist_expectation(&product, ell)?;
        let a = twist_expectation(&aklt.state, ell)?;
        println!("ell = {ell}: product {:+.4}, AKLT {:+.4}", p.re, a.re);
    }
    Ok(())
}
