//! Write a shadow to the compact binary format, read it back and estimate
//! a correlator from the loaded copy.

use shadowkit::observables::correlator;
use shadowkit::shadows::{read_shadow, write_shadow, HEADER_LEN};
use shadowkit::simulator::{ground_state, sample_shadow, tfim_family};

fn main() -> shadowkit::Result<()> {
    let spec = tfim_family(8, 1.0, 0.5, false);
    let gs = ground_state(&spec, 1e-8)?;
    let shadow = sample_shadow(&gs.state, 5_000, 11)?;

    let dir = std::env::temp_dir().join("shadowkit-example");
    std::fs::create_dir_all(&dir).map_err(|e| shadowkit::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join("tfim.shdw");
    let provenance = serde_json::json!({ "family": "tfim", "h": 0.5 });
    write_shadow(&path, &shadow, Some(&provenance))?;

    let loaded = read_shadow(&path)?;
    assert_eq!(loaded, shadow);
    let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!(
        "{} snapshots of {} qubits in {bytes} bytes ({HEADER_LEN}-byte header)",
        loaded.num_snapshots(),
        loaded.n()
    );

    let zz = correlator(3, 4)?;
    println!(
        "<Z3 Z4>: exact {:.4}, from file {:.4}",
        zz.exact(&gs.state)?,
        zz.estimate(&loaded)?
    );
    Ok(())
}
