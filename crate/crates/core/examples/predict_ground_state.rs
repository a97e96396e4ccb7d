//! Learn `<Z_i Z_{i+1}>` across the bond-alternating XXZ phase diagram from
//! shadows, selecting kernel and regularization on a validation split.

use std::sync::Arc;

use rand::Rng;
use shadowkit::kernels::KernelSpec;
use shadowkit::observables::correlator;
use shadowkit::predictor::{model_select, rmse, TrainingRecord, TrainingSet, LAMBDA_GRID};
use shadowkit::rng;
use shadowkit::simulator::{ground_state, sample_shadow, Family};

fn sample(family: &Family, count: usize, seed: u64) -> shadowkit::Result<(Vec<TrainingRecord>, Vec<f64>)> {
    let obs = correlator(3, 4)?;
    let mut records = Vec::new();
    let mut truths = Vec::new();
    for i in 0..count {
        let mut r = rng::stream(seed, i as u64);
        let x = vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let gs = ground_state(&family.spec_at(&x)?, 1e-8)?;
        truths.push(obs.exact(&gs.state)?);
        let shadow = sample_shadow(&gs.state, 300, rng::derive_seed(seed, i as u64))?;
        records.push(TrainingRecord { x, shadow });
    }
    Ok((records, truths))
}

fn main() -> shadowkit::Result<()> {
    let family = Family::Xxz {
        n: 8,
        param_box: [(0.0, 3.0), (0.0, 4.0)],
    };
    let (train, _) = sample(&family, 60, 1)?;
    let (val, _) = sample(&family, 20, 2)?;
    let (test, truths) = sample(&family, 30, 3)?;

    let train = Arc::new(TrainingSet::new(2, train)?);
    let val = TrainingSet::new(2, val)?;
    let obs = correlator(3, 4)?;
    let kernels = [
        KernelSpec::Gaussian { gamma: None },
        KernelSpec::Dirichlet { cutoff: 5.0 },
    ];
    let sel = model_select(train, &val, std::slice::from_ref(&obs), &LAMBDA_GRID, &kernels)?;
    let best = &sel.selections[0];
    println!(
        "selected {} (validation RMSE {:.3})",
        best.model.describe(),
        best.validation_rmse
    );

    let xs: Vec<Vec<f64>> = test.iter().map(|r| r.x.clone()).collect();
    let preds = best.model.predict_many(&xs, &obs)?;
    let mean = truths.iter().sum::<f64>() / truths.len() as f64;
    println!(
        "test RMSE {:.3} vs constant-mean {:.3}",
        rmse(&preds, &truths)?,
        rmse(&vec![mean; truths.len()], &truths)?
    );
    Ok(())
}
