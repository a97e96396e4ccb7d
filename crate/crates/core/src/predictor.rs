//! Ground-state property prediction from `{x_l -> shadow_l}` training data.
//!
//! Two estimators are provided. The Dirichlet average
//! `(1/N) sum_l D(x - x_l) o_l` is a fixed formula with no fitting. Kernel
//! ridge regression predicts `k(x)^T (K + lambda I)^{-1} o` with a
//! unit-diagonal vector kernel. In both, `o_l` is the shadow estimate of the
//! observable on record `l`, and estimates are cached per observable.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{dirichlet_kernel, enumerate_wavevectors, KernelSpec, VectorKernel, WavevectorSet};
use crate::observables::ObservableSpec;
use crate::rng;
use crate::shadows::{estimate_observable_sum, ClassicalShadow};

/// Regularization grid used for model selection.
pub const LAMBDA_GRID: [f64; 10] = [0.0125, 0.025, 0.05, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

/// One training example.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRecord {
    pub x: Vec<f64>,
    pub shadow: ClassicalShadow,
}

impl TrainingRecord {
    /// Content hash over parameters, shadow symbols and seed.
    pub fn hash(&self) -> u64 {
        let words = self
            .x
            .iter()
            .map(|v| v.to_bits())
            .chain([self.shadow.n() as u64, self.shadow.seed()])
            .chain(self.shadow.symbols().iter().map(|&b| b as u64));
        rng::fnv1a(words)
    }
}

/// Training records with a shared shadow shape and a per-observable cache
/// of shadow estimates.
#[derive(Debug)]
pub struct TrainingSet {
    m: usize,
    records: Vec<TrainingRecord>,
    cache: RwLock<HashMap<String, Arc<Vec<f64>>>>,
}

impl Clone for TrainingSet {
    fn clone(&self) -> Self {
        Self {
            m: self.m,
            records: self.records.clone(),
            cache: RwLock::new(self.cache.read().expect("cache lock").clone()),
        }
    }
}

fn check_point(x: &[f64], m: usize) -> Result<()> {
    if x.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: x.len(),
        });
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
        return Err(Error::OutOfBox { index, value });
    }
    Ok(())
}

impl TrainingSet {
    /// Validates that every `x` lies in `[-1, 1]^m` and that all shadows
    /// share `n` and `T`.
    pub fn new(m: usize, records: Vec<TrainingRecord>) -> Result<Self> {
        if let Some(first) = records.first() {
            let (n, t) = (first.shadow.n(), first.shadow.num_snapshots());
            for r in &records {
                check_point(&r.x, m)?;
                if r.shadow.n() != n || r.shadow.num_snapshots() != t {
                    return Err(Error::ShapeMismatch(n, t, r.shadow.n(), r.shadow.num_snapshots()));
                }
            }
        }
        Ok(Self {
            m,
            records,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn records(&self) -> &[TrainingRecord] {
        &self.records
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.x.clone()).collect()
    }

    /// Records at `idx`, in that order, with a fresh cache.
    pub fn subset(&self, idx: &[usize]) -> Result<TrainingSet> {
        TrainingSet::new(self.m, idx.iter().map(|&i| self.records[i].clone()).collect())
    }

    /// Per-record shadow estimates of `obs`, computed once and cached.
    pub fn estimates(&self, obs: &ObservableSpec) -> Result<Arc<Vec<f64>>> {
        if let Some(hit) = self.cache.read().expect("cache lock").get(&obs.id) {
            return Ok(Arc::clone(hit));
        }
        let values: Vec<f64> = self
            .records
            .par_iter()
            .map(|r| estimate_observable_sum(&r.shadow, &obs.terms))
            .collect::<Result<_>>()?;
        let values = Arc::new(values);
        let mut cache = self.cache.write().expect("cache lock");
        Ok(Arc::clone(cache.entry(obs.id.clone()).or_insert(values)))
    }

    /// Whether any record of `other` also appears here (by content hash).
    pub fn overlaps(&self, other: &TrainingSet) -> bool {
        let mine: std::collections::HashSet<u64> = self.records.iter().map(TrainingRecord::hash).collect();
        other.records.iter().any(|r| mine.contains(&r.hash()))
    }
}

/// Estimator variant.
#[derive(Clone, Debug)]
pub enum ModelKind {
    DirichletAverage(WavevectorSet),
    KernelRidge {
        /// Resolved kernel (Gaussian bandwidth fixed).
        kernel: KernelSpec,
        /// Regularization actually used, including any jitter.
        lambda: f64,
        factor: Cholesky<f64, Dyn>,
    },
}

/// A trained predictor; immutable and safe to share across threads.
#[derive(Clone, Debug)]
pub struct PredictionModel {
    pub kind: ModelKind,
    data: Arc<TrainingSet>,
    vk: Option<VectorKernel>,
}

/// Dirichlet-average predictor with wavevector cutoff `cutoff`.
pub fn train_dirichlet(data: Arc<TrainingSet>, cutoff: f64) -> Result<PredictionModel> {
    if data.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    let wv = enumerate_wavevectors(data.m(), cutoff)?;
    Ok(PredictionModel {
        kind: ModelKind::DirichletAverage(wv),
        data,
        vk: None,
    })
}

/// Kernel ridge regression on the normalized kernel `k(x,y)/sqrt(k(x,x)k(y,y))`.
///
/// `K + lambda I` is Cholesky-factorized once. On failure one retry is made
/// with `lambda + 1e-10 tr(K)/N`.
pub fn train_ridge(data: Arc<TrainingSet>, kernel: &KernelSpec, lambda: f64) -> Result<PredictionModel> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "ridge lambda {lambda} must be positive"
        )));
    }
    if kernel.is_shadow_kernel() {
        return Err(Error::UnsupportedKernel(kernel.name()));
    }
    if data.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    let points = data.points();
    let resolved = kernel.resolve(&points)?;
    let vk = VectorKernel::new(&resolved, data.m())?;
    let k = normalized_gram(&vk, &points)?;
    let n = k.nrows();
    let attempt = |lam: f64| Cholesky::new(&k + DMatrix::identity(n, n) * lam);
    let (factor, used) = match attempt(lambda) {
        Some(f) => (f, lambda),
        None => {
            let bumped = lambda + 1e-10 * k.trace() / n as f64;
            (attempt(bumped).ok_or(Error::FactorizationFailure { lambda })?, bumped)
        }
    };
    Ok(PredictionModel {
        kind: ModelKind::KernelRidge {
            kernel: resolved,
            lambda: used,
            factor,
        },
        data,
        vk: Some(vk),
    })
}

fn normalized_gram(vk: &VectorKernel, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = points.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| vk.eval_normalized(&points[i], &points[j])).collect())
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl PredictionModel {
    pub fn training_set(&self) -> &Arc<TrainingSet> {
        &self.data
    }

    /// Regularization for ridge models.
    pub fn lambda(&self) -> Option<f64> {
        match &self.kind {
            ModelKind::KernelRidge { lambda, .. } => Some(*lambda),
            ModelKind::DirichletAverage(_) => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            ModelKind::DirichletAverage(wv) => format!("dirichlet_average(cutoff={})", wv.cutoff),
            ModelKind::KernelRidge { kernel, lambda, .. } => format!("ridge({}, lambda={lambda})", kernel.name()),
        }
    }

    /// Coefficients `kappa_l(x)` with `prediction = sum_l kappa_l(x) o_l`.
    /// The Dirichlet mode includes its `1/N` prefactor.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_point(x, self.data.m())?;
        let recs = self.data.records();
        match &self.kind {
            ModelKind::DirichletAverage(wv) => {
                let inv_n = 1.0 / recs.len() as f64;
                recs.iter()
                    .map(|r| Ok(inv_n * dirichlet_kernel(x, &r.x, wv)?))
                    .collect()
            }
            ModelKind::KernelRidge { factor, .. } => {
                let vk = self.vk.as_ref().expect("ridge models carry a kernel");
                let kx = recs
                    .iter()
                    .map(|r| vk.eval_normalized(x, &r.x))
                    .collect::<Result<Vec<f64>>>()?;
                Ok(factor.solve(&DVector::from_vec(kx)).iter().copied().collect())
            }
        }
    }

    /// `sum_l kappa_l(x) labels_l` for arbitrary per-record labels.
    pub fn predict_from_labels(&self, x: &[f64], labels: &[f64]) -> Result<f64> {
        if labels.len() != self.data.len() {
            return Err(Error::LengthMismatch {
                expected: self.data.len(),
                got: labels.len(),
            });
        }
        Ok(self.weights(x)?.iter().zip(labels).map(|(w, o)| w * o).sum())
    }

    /// Predicted `Tr(O rho(x))`.
    pub fn predict_property(&self, x: &[f64], obs: &ObservableSpec) -> Result<f64> {
        if obs.terms.is_empty() {
            check_point(x, self.data.m())?;
            return Ok(0.0);
        }
        let labels = self.data.estimates(obs)?;
        self.predict_from_labels(x, &labels)
    }

    /// Predictions of `obs` at every point of `xs`.
    pub fn predict_many(&self, xs: &[Vec<f64>], obs: &ObservableSpec) -> Result<Vec<f64>> {
        let labels = self.data.estimates(obs)?;
        xs.par_iter().map(|x| self.predict_from_labels(x, &labels)).collect()
    }
}

/// Root-mean-square difference.
pub fn rmse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sq / truths.len() as f64).sqrt())
}

/// Outcome of model selection for one observable.
#[derive(Clone, Debug)]
pub struct Selection {
    pub observable_id: String,
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub validation_rmse: f64,
    pub model: Arc<PredictionModel>,
}

/// Per-observable selections plus a flag for train/validation overlap.
#[derive(Clone, Debug)]
pub struct ModelSelection {
    pub selections: Vec<Selection>,
    pub overlap_detected: bool,
}

/// Fits ridge models over `kernels x lambda_grid` and picks, per
/// observable, the one with the lowest RMSE against the validation shadow
/// estimates. Ties go to the smaller `lambda`, then the earlier kernel.
pub fn model_select(
    train: Arc<TrainingSet>,
    validation: &TrainingSet,
    observables: &[ObservableSpec],
    lambda_grid: &[f64],
    kernels: &[KernelSpec],
) -> Result<ModelSelection> {
    if lambda_grid.is_empty() || kernels.is_empty() {
        return Err(Error::InvalidParameter("empty candidate grid".into()));
    }
    let mut candidates = Vec::new();
    for (ki, kernel) in kernels.iter().enumerate() {
        for &lambda in lambda_grid {
            candidates.push((lambda, ki, kernel.clone()));
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let val_points = validation.points();
    let fitted: Vec<(f64, KernelSpec, Arc<PredictionModel>, DMatrix<f64>)> = candidates
        .into_iter()
        .map(|(lambda, _, kernel)| {
            let model = train_ridge(Arc::clone(&train), &kernel, lambda)?;
            let rows: Vec<Vec<f64>> = val_points.par_iter().map(|x| model.weights(x)).collect::<Result<_>>()?;
            let w = DMatrix::from_fn(rows.len(), train.len(), |i, j| rows[i][j]);
            Ok((lambda, kernel, Arc::new(model), w))
        })
        .collect::<Result<_>>()?;
    let mut selections = Vec::with_capacity(observables.len());
    for obs in observables {
        let labels = DVector::from_vec(train.estimates(obs)?.to_vec());
        let targets = validation.estimates(obs)?;
        let mut best: Option<Selection> = None;
        for (lambda, kernel, model, w) in &fitted {
            let pred = w * &labels;
            let err = rmse(pred.as_slice(), &targets)?;
            if best.as_ref().is_none_or(|b| err < b.validation_rmse) {
                best = Some(Selection {
                    observable_id: obs.id.clone(),
                    kernel: kernel.clone(),
                    lambda: *lambda,
                    validation_rmse: err,
                    model: Arc::clone(model),
                });
            }
        }
        selections.push(best.expect("nonempty grid"));
    }
    Ok(ModelSelection {
        selections,
        overlap_detected: train.overlaps(validation),
    })
}

/// Shuffles `0..n` with `seed` and cuts it into consecutive groups of the
/// given sizes.
pub fn split_indices(n: usize, sizes: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
    let total: usize = sizes.iter().sum();
    if total > n {
        return Err(Error::InvalidParameter(format!("split sizes sum to {total} > {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, 0));
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &s in sizes {
        out.push(idx[start..start + s].to_vec());
        start += s;
    }
    Ok(out)
}

/// One row of a prediction table.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub observable_id: String,
    pub x: Vec<f64>,
    pub prediction: f64,
    pub exact: f64,
}

/// Writes `observable_id, x1..xm, prediction, exact, abs_error`.
pub fn write_predictions_csv(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let m = rows.first().map_or(0, |r| r.x.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["observable_id".to_string()];
    header.extend((1..=m).map(|i| format!("x{i}")));
    header.extend(["prediction", "exact", "abs_error"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        if r.x.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: r.x.len(),
            });
        }
        let mut rec = vec![r.observable_id.clone()];
        rec.extend(r.x.iter().map(|v| format!("{v:.12e}")));
        for v in [r.prediction, r.exact, (r.prediction - r.exact).abs()] {
            rec.push(format!("{v:.12e}"));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
