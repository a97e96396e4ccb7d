//! Reconstruct two-qubit reduced density matrices of a GHZ state from
//! randomized Pauli measurements and watch the error shrink with `T`.

use shadowkit::shadows::{rdm_shadow_size, shadow_rdm};
use shadowkit::simulator::{exact_rdm, sample_shadow, StateVector};

fn main() -> shadowkit::Result<()> {
    let n = 6;
    let state = StateVector::ghz(n)?;
    let exact = exact_rdm(&state, &[0, n - 1])?;

    println!(
        "shadow size for eps=0.25, delta=0.1: {}",
        rdm_shadow_size(n, 2, 0.25, 0.1)
    );
    for t in [100, 1_000, 10_000, 100_000] {
        let shadow = sample_shadow(&state, t, 7)?;
        let est = shadow_rdm(&shadow, &[0, n - 1])?;
        println!("T = {t:>6}: ||rho_hat - rho||_1 = {:.4}", est.trace_distance(&exact)?);
    }
    Ok(())
}
