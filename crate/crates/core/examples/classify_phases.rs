//! Train a shadow-kernel SVM to tell the topological and trivial dimer
//! phases of the bond-alternating XXZ chain apart, using the
//! partial-reflection invariant as the labeling oracle.

use shadowkit::experiments::{run_classify, ExperimentConfig};

fn main() -> shadowkit::Result<()> {
    let cfg = ExperimentConfig::from_json(include_str!("../configs/xxz_phases.json"))?;
    let out = std::env::temp_dir().join("shadowkit-classify");
    let s = run_classify(&cfg, &out)?;
    println!("trained on {} shadows, tested on {}", s.n_train, s.n_test);
    println!(
        "held-out accuracy {:.3}, training hinge loss {:.2e}",
        s.accuracy, s.training_error
    );
    println!("confusion: {:?}", s.confusion);
    println!("outputs in {}", out.display());
    Ok(())
}
