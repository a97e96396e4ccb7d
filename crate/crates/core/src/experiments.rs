//! Experiment drivers behind the `shadowkit` binary: dataset generation,
//! property prediction, supervised and unsupervised phase classification,
//! invariant tables and the shadow-size benchmark.
//!
//! Every driver is a pure function of its [`ExperimentConfig`]. Random draws
//! come from keyed streams split off the root seed (parameters, shadows,
//! splits, ...). Outputs are therefore byte-identical across reruns and
//! thread counts. Each CSV gets a `<file>.json` sidecar holding the fully
//! resolved config.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classifier::{
    agreement, agreement_up_to_relabel, kernel_pca_with, svm_predict, svm_train, unsupervised_split,
    write_embedding_csv, SvmConfig, SvmModel,
};
use crate::error::{Error, Result};
use crate::kernels::{gram_shadows, standardize, GramMatrix, KernelSpec};
use crate::linalg::c;
use crate::observables::{
    central_intervals, correlator, order_param_z2, order_param_z3, partial_reflection_invariant, single_pauli,
    ObservableSpec,
};
use crate::predictor::{
    model_select, rmse, split_indices, train_dirichlet, write_predictions_csv, PredictionModel, PredictionRow,
    TrainingRecord, TrainingSet, LAMBDA_GRID,
};
use crate::rng;
use crate::shadows::{rdm_shadow_size, shadow_rdm, write_shadow, ClassicalShadow};
use crate::simulator::{
    exact_expectation, exact_rdm, ground_multiplet, ground_state_with, sample_shadow, sample_shadow_mixture,
    EigenConfig, Family, StateVector,
};

/// Full description of one experiment. Every section has defaults, so a
/// config file only needs the fields it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub family: Option<Family>,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub predict: PredictConfig,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub invariant: InvariantConfig,
    #[serde(default)]
    pub bench: BenchConfig,
}

/// A physical sub-box to sample `count` records from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub physical_box: Vec<(f64, f64)>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    /// Snapshots per shadow (`T`).
    pub shadow_size: usize,
    /// When nonempty, records are drawn region by region instead of
    /// uniformly from the family box; counts must add up to the split sizes.
    pub regions: Vec<Region>,
    pub degeneracy_tol: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_train: 20,
            n_validation: 0,
            n_test: 10,
            shadow_size: 100,
            regions: Vec::new(),
            degeneracy_tol: 1e-8,
        }
    }
}

impl DatasetConfig {
    pub fn total(&self) -> usize {
        self.n_train + self.n_validation + self.n_test
    }
}

/// Observable groups, expanded against the chain length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableChoice {
    /// A single-site Pauli on every site.
    Pauli {
        label: char,
    },
    /// `C_{i,i+1}` for every bond.
    NnCorrelators,
    Correlator {
        i: usize,
        j: usize,
    },
    OrderZ2,
    OrderZ3,
}

impl ObservableChoice {
    pub fn expand(&self, n: usize) -> Result<Vec<ObservableSpec>> {
        match *self {
            ObservableChoice::Pauli { label } => (0..n).map(|s| single_pauli(label, s)).collect(),
            ObservableChoice::NnCorrelators => (0..n.saturating_sub(1)).map(|i| correlator(i, i + 1)).collect(),
            ObservableChoice::Correlator { i, j } => Ok(vec![correlator(i, j)?]),
            ObservableChoice::OrderZ2 => Ok(vec![order_param_z2(n)?]),
            ObservableChoice::OrderZ3 => Ok(vec![order_param_z3(n)?]),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictMode {
    Dirichlet,
    Ridge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictConfig {
    pub mode: PredictMode,
    /// Wavevector cutoff of the Dirichlet average.
    pub cutoff: f64,
    /// Ridge kernel candidates, in tie-breaking order.
    pub kernels: Vec<KernelSpec>,
    pub lambdas: Vec<f64>,
    pub observables: Vec<ObservableChoice>,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            mode: PredictMode::Dirichlet,
            cutoff: 3.0,
            kernels: vec![KernelSpec::Gaussian { gamma: None }],
            lambdas: LAMBDA_GRID.to_vec(),
            observables: vec![
                ObservableChoice::Pauli { label: 'X' },
                ObservableChoice::Pauli { label: 'Z' },
            ],
        }
    }
}

/// Where the reference phase labels come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelSource {
    /// Sign of the partial-reflection invariant on two central intervals
    /// of `interval` sites (`>= 0` is `+1`).
    Reflection { interval: usize },
    /// `+1` for the first region, `-1` for every other.
    Region,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub kernel: KernelSpec,
    pub labels: LabelSource,
    pub lambda_sq: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Components kept in the PCA embedding.
    pub components: usize,
    /// Components the random-projection split looks at.
    pub split_components: usize,
    pub trials: usize,
    pub center: bool,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Shadow {
                tau: 1.0,
                gamma: 1.0,
                exclude_equal_t_on_diagonal: true,
            },
            labels: LabelSource::Reflection { interval: 4 },
            lambda_sq: 100.0,
            tol: 1e-3,
            max_iter: 20_000,
            components: 6,
            split_components: 6,
            trials: 500,
            center: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantConfig {
    /// Sites per interval for the reflection invariant.
    pub interval: usize,
}

impl Default for InvariantConfig {
    fn default() -> Self {
        Self { interval: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchState {
    Ghz,
    RandomProduct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub n: usize,
    pub state: BenchState,
    /// Subsystem size of the reduced density matrices compared.
    pub r: usize,
    pub eps: f64,
    pub delta: f64,
    /// Shadow sizes; empty means the sufficient size for `(n, r, eps, delta)`.
    pub t_values: Vec<usize>,
    pub repeats: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n: 8,
            state: BenchState::Ghz,
            r: 2,
            eps: 0.25,
            delta: 0.1,
            t_values: Vec::new(),
            repeats: 20,
        }
    }
}

impl BenchConfig {
    pub fn resolved_t_values(&self) -> Vec<usize> {
        if self.t_values.is_empty() {
            vec![rdm_shadow_size(self.n, self.r, self.eps, self.delta)]
        } else {
            self.t_values.clone()
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    pub fn from_value(v: Value) -> Result<Self> {
        serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn family(&self) -> Result<&Family> {
        self.family
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a `family` section".into()))
    }

    fn check_dataset(&self) -> Result<()> {
        let d = &self.dataset;
        if d.shadow_size == 0 {
            return Err(Error::Config("dataset.shadow_size must be positive".into()));
        }
        if d.total() == 0 {
            return Err(Error::Config("dataset has no records".into()));
        }
        if !d.regions.is_empty() {
            let sum: usize = d.regions.iter().map(|r| r.count).sum();
            if sum != d.total() {
                return Err(Error::Config(format!(
                    "region counts add up to {sum} but the splits need {}",
                    d.total()
                )));
            }
        }
        Ok(())
    }
}

/// Sets `path` (dot-separated keys) in a JSON config to `value`, creating
/// objects along the way. `value` is parsed as JSON when possible and kept
/// as a string otherwise.
pub fn apply_override(config: &mut Value, path: &str, value: &str) -> Result<()> {
    let parsed = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    let mut cur = config;
    let keys: Vec<&str> = path.split('.').collect();
    for (k, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(Error::Config(format!("bad override path `{path}`")));
        }
        if !cur.is_object() {
            return Err(Error::Config(format!("`{path}` descends into a non-object")));
        }
        let obj = cur.as_object_mut().expect("checked above");
        if k + 1 == keys.len() {
            obj.insert(key.to_string(), parsed);
            return Ok(());
        }
        cur = obj.entry(key.to_string()).or_insert_with(|| json!({}));
    }
    unreachable!("split yields at least one key")
}

/// One generated ground state with its shadow.
#[derive(Clone, Debug)]
pub struct DataRecord {
    pub id: String,
    pub index: usize,
    pub region: Option<usize>,
    pub x: Vec<f64>,
    pub physical: Vec<f64>,
    pub energy: f64,
    pub gap: f64,
    pub degenerate: bool,
    /// The ground state, or every vector of a degenerate ground space.
    pub states: Vec<StateVector>,
    pub shadow: Option<ClassicalShadow>,
}

impl DataRecord {
    /// `Tr(O rho)` for the (uniformly mixed) ground space.
    pub fn exact(&self, obs: &ObservableSpec) -> Result<f64> {
        let terms = obs.to_local_terms();
        if terms.is_empty() {
            return Ok(0.0);
        }
        obs.validate(self.states[0].n)?;
        let mut total = 0.0;
        for s in &self.states {
            total += exact_expectation(s, &terms)?;
        }
        Ok(total / self.states.len() as f64)
    }
}

fn sample_x(family: &Family, regions: &[Region], index: usize, seed: u64) -> Result<(Vec<f64>, Option<usize>)> {
    let pbox = family.param_box();
    let mut r = rng::stream(seed, index as u64);
    if regions.is_empty() {
        return Ok(((0..pbox.dim()).map(|_| r.gen_range(-1.0..=1.0)).collect(), None));
    }
    let mut start = 0;
    for (k, reg) in regions.iter().enumerate() {
        if index < start + reg.count {
            if reg.physical_box.len() != pbox.dim() {
                return Err(Error::DimensionMismatch {
                    expected: pbox.dim(),
                    got: reg.physical_box.len(),
                });
            }
            let p: Vec<f64> = reg
                .physical_box
                .iter()
                .map(|&(lo, hi)| lo + (hi - lo) * r.gen::<f64>())
                .collect();
            let x = pbox.to_normalized(&p).into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
            return Ok((x, Some(k)));
        }
        start += reg.count;
    }
    Err(Error::Config(format!("record {index} lies beyond every region")))
}

/// Draws parameters, solves for ground states and (optionally) samples
/// shadows for every record of the dataset.
pub fn generate_dataset(cfg: &ExperimentConfig, with_shadows: bool) -> Result<Vec<DataRecord>> {
    cfg.check_dataset()?;
    let family = cfg.family()?;
    let d = &cfg.dataset;
    let param_seed = rng::derive_named(cfg.seed, "params");
    let shadow_seed = rng::derive_named(cfg.seed, "shadows");
    let eig = EigenConfig {
        degeneracy_tol: d.degeneracy_tol,
        ..EigenConfig::default()
    };
    (0..d.total())
        .into_par_iter()
        .map(|i| {
            let (x, region) = sample_x(family, &d.regions, i, param_seed)?;
            let spec = family.spec_at(&x)?;
            let gs = ground_state_with(&spec, &eig)?;
            let states = if gs.degenerate {
                ground_multiplet(&spec, &eig, 8)?.states
            } else {
                vec![gs.state]
            };
            let shadow = if with_shadows {
                Some(sample_shadow_mixture(
                    &states,
                    d.shadow_size,
                    rng::derive_seed(shadow_seed, i as u64),
                )?)
            } else {
                None
            };
            Ok(DataRecord {
                id: format!("rec{i:05}"),
                index: i,
                region,
                x,
                physical: spec.physical_params.clone(),
                energy: gs.energy,
                gap: gs.gap,
                degenerate: gs.degenerate,
                states,
                shadow,
            })
        })
        .collect()
}

/// Train / validation / test index sets drawn with the config's seed.
pub fn dataset_splits(cfg: &ExperimentConfig) -> Result<[Vec<usize>; 3]> {
    let d = &cfg.dataset;
    let mut parts = split_indices(
        d.total(),
        &[d.n_train, d.n_validation, d.n_test],
        rng::derive_named(cfg.seed, "split"),
    )?;
    for p in &mut parts {
        p.sort_unstable();
    }
    let test = parts.pop().expect("three parts");
    let val = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    Ok([train, val, test])
}

/// Haar-random single-qubit product state.
pub fn random_product_state(n: usize, seed: u64) -> Result<StateVector> {
    let mut r = rng::stream(seed, 0);
    let qubits: Vec<[crate::linalg::C64; 2]> = (0..n)
        .map(|_| {
            let v: [f64; 4] = std::array::from_fn(|_| r.sample(StandardNormal));
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            [c(v[0] / norm, v[1] / norm), c(v[2] / norm, v[3] / norm)]
        })
        .collect();
    StateVector::product(&qubits)
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_sidecar(csv: &Path, command: &str, cfg: &ExperimentConfig) -> Result<()> {
    write_json(&sidecar_path(csv), &json!({ "command": command, "config": cfg }))
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn axis_headers(prefix: &str, m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("{prefix}{i}")).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct GenerateSummary {
    pub records: usize,
    pub n: usize,
    pub shadow_size: usize,
    pub degenerate_records: usize,
}

/// Writes `records.csv`, one Hamiltonian spec, shadow file and sidecar per
/// record under `specs/` and `shadows/`, and exact values of the configured
/// observables in `exact.csv`.
pub fn run_generate(cfg: &ExperimentConfig, out: &Path) -> Result<GenerateSummary> {
    let family = cfg.family()?;
    let records = generate_dataset(cfg, true)?;
    let [train, val, _] = dataset_splits(cfg)?;
    let split_of = |i: usize| {
        if train.binary_search(&i).is_ok() {
            "train"
        } else if val.binary_search(&i).is_ok() {
            "validation"
        } else {
            "test"
        }
    };
    ensure_dir(out)?;
    for sub in ["specs", "shadows"] {
        ensure_dir(&out.join(sub))?;
    }
    let m = family.m();
    let mut header = vec!["record_id".to_string(), "split".into()];
    header.extend(axis_headers("x", m));
    header.extend(axis_headers("p", m));
    header.extend(["energy", "gap", "degenerate", "shadow_file"].map(String::from));
    let mut rows = Vec::with_capacity(records.len());
    for r in &records {
        let spec = family.spec_at(&r.x)?;
        let spec_path = out.join("specs").join(format!("{}.json", r.id));
        std::fs::write(&spec_path, spec.to_json()?).map_err(|e| Error::io(&spec_path, e))?;
        let rel = format!("shadows/{}.shdw", r.id);
        let provenance = json!({ "record_id": r.id, "x": r.x, "physical": r.physical, "family": family });
        write_shadow(&out.join(&rel), r.shadow.as_ref().expect("sampled"), Some(&provenance))?;
        let mut row = vec![r.id.clone(), split_of(r.index).to_string()];
        row.extend(r.x.iter().chain(&r.physical).map(|&v| fmt(v)));
        row.extend([fmt(r.energy), fmt(r.gap), r.degenerate.to_string(), rel]);
        rows.push(row);
    }
    let path = out.join("records.csv");
    write_table(&path, &header, &rows)?;
    write_sidecar(&path, "generate", cfg)?;

    let observables = expand_observables(&cfg.predict.observables, family.n())?;
    let mut header = vec!["record_id".to_string()];
    header.extend(observables.iter().map(|o| o.name.clone()));
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![r.id.clone()];
            for o in &observables {
                row.push(fmt(r.exact(o)?));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let path = out.join("exact.csv");
    write_table(&path, &header, &rows)?;
    write_sidecar(&path, "generate", cfg)?;

    let summary = GenerateSummary {
        records: records.len(),
        n: family.n(),
        shadow_size: cfg.dataset.shadow_size,
        degenerate_records: records.iter().filter(|r| r.degenerate).count(),
    };
    write_json(
        &out.join("summary.json"),
        &json!({ "command": "generate", "summary": summary, "config": cfg }),
    )?;
    Ok(summary)
}

fn expand_observables(choices: &[ObservableChoice], n: usize) -> Result<Vec<ObservableSpec>> {
    let mut out = Vec::new();
    for ch in choices {
        out.extend(ch.expand(n)?);
    }
    Ok(out)
}

fn training_set(m: usize, records: &[DataRecord], idx: &[usize]) -> Result<TrainingSet> {
    TrainingSet::new(
        m,
        idx.iter()
            .map(|&i| TrainingRecord {
                x: records[i].x.clone(),
                shadow: records[i].shadow.clone().expect("sampled"),
            })
            .collect(),
    )
}

/// Test-set error of one observable.
#[derive(Clone, Debug, Serialize)]
pub struct ObservableReport {
    pub observable_id: String,
    pub name: String,
    pub model: String,
    pub test_rmse: f64,
    /// RMSE of always predicting the mean training shadow estimate.
    pub baseline_rmse: f64,
    /// RMSE of the test records' own shadow estimates.
    pub direct_shadow_rmse: f64,
    pub validation_rmse: Option<f64>,
}

/// A fitted model with its validation RMSE, if one was measured.
type ChosenModel = (Arc<PredictionModel>, Option<f64>);

#[derive(Clone, Debug, Serialize)]
pub struct PredictSummary {
    pub observables: Vec<ObservableReport>,
    /// RMSE over every (observable, test point) pair.
    pub overall_rmse: f64,
    pub overall_baseline_rmse: f64,
    pub overlap_detected: bool,
}

impl PredictSummary {
    /// Pooled RMSE over observables whose names start with `prefix`.
    pub fn pooled(&self, prefix: &str, baseline: bool) -> f64 {
        let picked: Vec<f64> = self
            .observables
            .iter()
            .filter(|o| o.name.starts_with(prefix))
            .map(|o| if baseline { o.baseline_rmse } else { o.test_rmse })
            .collect();
        (picked.iter().map(|v| v * v).sum::<f64>() / picked.len().max(1) as f64).sqrt()
    }
}

/// Trains on the train split and reports test errors against exact values.
/// Ridge mode selects `(kernel, lambda)` per observable on the validation
/// split. Writes `predictions.csv`, `models.csv` and `summary.json`.
pub fn run_predict(cfg: &ExperimentConfig, out: &Path) -> Result<PredictSummary> {
    let family = cfg.family()?;
    let m = family.m();
    let records = generate_dataset(cfg, true)?;
    let [train_idx, val_idx, test_idx] = dataset_splits(cfg)?;
    if train_idx.is_empty() {
        return Err(Error::Config("dataset.n_train must be positive".into()));
    }
    let observables = expand_observables(&cfg.predict.observables, family.n())?;
    let train = Arc::new(training_set(m, &records, &train_idx)?);
    let (models, overlap): (Vec<ChosenModel>, bool) = match cfg.predict.mode {
        PredictMode::Dirichlet => {
            let model = Arc::new(train_dirichlet(Arc::clone(&train), cfg.predict.cutoff)?);
            (observables.iter().map(|_| (Arc::clone(&model), None)).collect(), false)
        }
        PredictMode::Ridge => {
            if val_idx.is_empty() {
                return Err(Error::Config("ridge mode needs dataset.n_validation > 0".into()));
            }
            let val = training_set(m, &records, &val_idx)?;
            let sel = model_select(
                Arc::clone(&train),
                &val,
                &observables,
                &cfg.predict.lambdas,
                &cfg.predict.kernels,
            )?;
            (
                sel.selections
                    .into_iter()
                    .map(|s| (s.model, Some(s.validation_rmse)))
                    .collect(),
                sel.overlap_detected,
            )
        }
    };
    let test_x: Vec<Vec<f64>> = test_idx.iter().map(|&i| records[i].x.clone()).collect();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    let (mut sq, mut sq_base, mut count) = (0.0, 0.0, 0usize);
    for (obs, (model, val_rmse)) in observables.iter().zip(&models) {
        let preds = model.predict_many(&test_x, obs)?;
        let exact: Vec<f64> = test_idx.iter().map(|&i| records[i].exact(obs)).collect::<Result<_>>()?;
        let direct: Vec<f64> = test_idx
            .iter()
            .map(|&i| obs.estimate(records[i].shadow.as_ref().expect("sampled")))
            .collect::<Result<_>>()?;
        let labels = train.estimates(obs)?;
        let mean = labels.iter().sum::<f64>() / labels.len() as f64;
        let base = vec![mean; exact.len()];
        let err = rmse(&preds, &exact)?;
        let base_err = rmse(&base, &exact)?;
        sq += err * err * exact.len() as f64;
        sq_base += base_err * base_err * exact.len() as f64;
        count += exact.len();
        for ((x, p), e) in test_x.iter().zip(&preds).zip(&exact) {
            rows.push(PredictionRow {
                observable_id: obs.id.clone(),
                x: x.clone(),
                prediction: *p,
                exact: *e,
            });
        }
        reports.push(ObservableReport {
            observable_id: obs.id.clone(),
            name: obs.name.clone(),
            model: model.describe(),
            test_rmse: err,
            baseline_rmse: base_err,
            direct_shadow_rmse: rmse(&direct, &exact)?,
            validation_rmse: *val_rmse,
        });
    }
    ensure_dir(out)?;
    let path = out.join("predictions.csv");
    write_predictions_csv(&path, &rows)?;
    write_sidecar(&path, "predict", cfg)?;
    let header: Vec<String> = [
        "observable_id",
        "name",
        "model",
        "validation_rmse",
        "test_rmse",
        "baseline_rmse",
        "direct_shadow_rmse",
    ]
    .map(String::from)
    .to_vec();
    let table: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.observable_id.clone(),
                r.name.clone(),
                r.model.clone(),
                r.validation_rmse.map(fmt).unwrap_or_default(),
                fmt(r.test_rmse),
                fmt(r.baseline_rmse),
                fmt(r.direct_shadow_rmse),
            ]
        })
        .collect();
    let path = out.join("models.csv");
    write_table(&path, &header, &table)?;
    write_sidecar(&path, "predict", cfg)?;
    let n = count.max(1) as f64;
    let summary = PredictSummary {
        observables: reports,
        overall_rmse: (sq / n).sqrt(),
        overall_baseline_rmse: (sq_base / n).sqrt(),
        overlap_detected: overlap,
    };
    write_json(
        &out.join("summary.json"),
        &json!({ "command": "predict", "summary": summary, "config": cfg }),
    )?;
    Ok(summary)
}

/// Reference labels for the records.
pub fn reference_labels(cfg: &ExperimentConfig, records: &[DataRecord]) -> Result<Vec<i8>> {
    match cfg.classify.labels {
        LabelSource::Reflection { interval } => records
            .iter()
            .map(|r| {
                let (i1, i2) = central_intervals(r.states[0].n, interval)?;
                let z = partial_reflection_invariant(&r.states[0], i1, i2)?;
                Ok(if z >= 0.0 { 1 } else { -1 })
            })
            .collect(),
        LabelSource::Region => records
            .iter()
            .map(|r| match r.region {
                Some(0) => Ok(1),
                Some(_) => Ok(-1),
                None => Err(Error::Config("region labels need dataset.regions".into())),
            })
            .collect(),
    }
}

/// Shadow Gram over every record, standardized.
pub fn standardized_shadow_gram(cfg: &ExperimentConfig, records: &[DataRecord]) -> Result<GramMatrix> {
    let shadows: Vec<ClassicalShadow> = records.iter().map(|r| r.shadow.clone().expect("sampled")).collect();
    standardize(&gram_shadows(&shadows, &cfg.classify.kernel)?)
}

/// Binary confusion counts on the test split (`+1` is positive).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_neg: usize,
    pub false_pos: usize,
    pub true_neg: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_neg + self.false_pos + self.true_neg
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassifySummary {
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub confusion: Confusion,
    pub training_error: f64,
    pub training_misclassified: usize,
    pub converged: bool,
    pub lambda_sq: f64,
}

/// Trains the SVM on the train split of the standardized shadow Gram and
/// evaluates it on the test split. Writes `labels.csv`, `embedding.csv`
/// (kernel PCA of all records), `model.json` and `summary.json`.
pub fn run_classify(cfg: &ExperimentConfig, out: &Path) -> Result<ClassifySummary> {
    let records = generate_dataset(cfg, true)?;
    let labels = reference_labels(cfg, &records)?;
    let gram = standardized_shadow_gram(cfg, &records)?;
    let [mut train_idx, val_idx, test_idx] = dataset_splits(cfg)?;
    // no hyperparameter search here: validation records train as well
    train_idx.extend(val_idx);
    train_idx.sort_unstable();
    let train_labels: Vec<i8> = train_idx.iter().map(|&i| labels[i]).collect();
    let svm_cfg = SvmConfig {
        lambda_sq: cfg.classify.lambda_sq,
        tol: cfg.classify.tol,
        max_iter: cfg.classify.max_iter,
    };
    let (model, converged): (SvmModel, bool) = match svm_train(&gram.submatrix(&train_idx), &train_labels, &svm_cfg) {
        Ok(m) => (m, true),
        Err(Error::NotConverged { best }) => (*best, false),
        Err(e) => return Err(e),
    };
    let mut pred = vec![0i8; records.len()];
    let mut score = vec![0.0; records.len()];
    for i in 0..records.len() {
        let row: Vec<f64> = train_idx.iter().map(|&j| gram.get(i, j)).collect();
        let (l, s) = svm_predict(&model, &row)?;
        pred[i] = l;
        score[i] = s;
    }
    let mut confusion = Confusion::default();
    for &i in &test_idx {
        match (labels[i], pred[i]) {
            (1, 1) => confusion.true_pos += 1,
            (1, _) => confusion.false_neg += 1,
            (_, 1) => confusion.false_pos += 1,
            _ => confusion.true_neg += 1,
        }
    }
    let correct = confusion.true_pos + confusion.true_neg;
    let accuracy = if test_idx.is_empty() {
        0.0
    } else {
        correct as f64 / test_idx.len() as f64
    };

    ensure_dir(out)?;
    let split_of = |i: usize| {
        if test_idx.binary_search(&i).is_ok() {
            "test"
        } else {
            "train"
        }
    };
    let header: Vec<String> = ["record_id", "split", "label_true", "label_pred", "score"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.id.clone(),
                split_of(r.index).into(),
                labels[r.index].to_string(),
                pred[r.index].to_string(),
                fmt(score[r.index]),
            ]
        })
        .collect();
    let path = out.join("labels.csv");
    write_table(&path, &header, &rows)?;
    write_sidecar(&path, "classify", cfg)?;

    let k = cfg.classify.components.min(records.len());
    let emb = kernel_pca_with(&gram, k, cfg.classify.center)?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let path = out.join("embedding.csv");
    write_embedding_csv(&path, &emb, &ids, &labels, &pred)?;
    write_sidecar(&path, "classify", cfg)?;
    write_json(&out.join("model.json"), &serde_json::to_value(&model)?)?;

    let summary = ClassifySummary {
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        accuracy,
        confusion,
        training_error: model.training_error,
        training_misclassified: model.misclassified,
        converged,
        lambda_sq: model.lambda_sq,
    };
    write_json(
        &out.join("summary.json"),
        &json!({ "command": "classify", "summary": summary, "config": cfg }),
    )?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct PcaSummary {
    pub records: usize,
    /// Agreement of the unsupervised split with the reference labels, up to
    /// swapping the two label names.
    pub agreement: f64,
    pub eigenvalues: Vec<f64>,
    pub winning_trial: usize,
}

/// Kernel PCA of the standardized shadow Gram over every record followed by
/// the random-projection median split. Writes `embedding.csv` and
/// `summary.json`.
pub fn run_pca(cfg: &ExperimentConfig, out: &Path) -> Result<PcaSummary> {
    let records = generate_dataset(cfg, true)?;
    let labels = reference_labels(cfg, &records)?;
    let gram = standardized_shadow_gram(cfg, &records)?;
    let k = cfg.classify.components.min(records.len());
    let emb = kernel_pca_with(&gram, k, cfg.classify.center)?;
    let split = unsupervised_split(
        &emb,
        cfg.classify.split_components,
        cfg.classify.trials,
        rng::derive_named(cfg.seed, "projection"),
    )?;
    // report the split with the naming that best matches the reference
    let pred: Vec<i8> = if agreement(&split.labels, &labels) >= 0.5 {
        split.labels.clone()
    } else {
        split.labels.iter().map(|l| -l).collect()
    };
    ensure_dir(out)?;
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let path = out.join("embedding.csv");
    write_embedding_csv(&path, &emb, &ids, &labels, &pred)?;
    write_sidecar(&path, "pca", cfg)?;
    let summary = PcaSummary {
        records: records.len(),
        agreement: agreement_up_to_relabel(&split.labels, &labels),
        eigenvalues: emb.eigenvalues.iter().take(k).copied().collect(),
        winning_trial: split.trial,
    };
    write_json(
        &out.join("summary.json"),
        &json!({ "command": "pca", "summary": summary, "config": cfg }),
    )?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantSummary {
    pub records: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Partial-reflection invariant of each record's ground state on the two
/// central intervals. Writes `invariant.csv` and `summary.json`.
pub fn run_invariant(cfg: &ExperimentConfig, out: &Path) -> Result<InvariantSummary> {
    let family = cfg.family()?;
    let records = generate_dataset(cfg, false)?;
    let (i1, i2) = central_intervals(family.n(), cfg.invariant.interval)?;
    let values: Vec<f64> = records
        .par_iter()
        .map(|r| partial_reflection_invariant(&r.states[0], i1.clone(), i2.clone()))
        .collect::<Result<_>>()?;
    let m = family.m();
    let mut header = vec!["record_id".to_string()];
    header.extend(axis_headers("x", m));
    header.extend(axis_headers("p", m));
    header.extend(["gap", "reflection_invariant"].map(String::from));
    let rows: Vec<Vec<String>> = records
        .iter()
        .zip(&values)
        .map(|(r, v)| {
            let mut row = vec![r.id.clone()];
            row.extend(r.x.iter().chain(&r.physical).map(|&v| fmt(v)));
            row.extend([fmt(r.gap), fmt(*v)]);
            row
        })
        .collect();
    ensure_dir(out)?;
    let path = out.join("invariant.csv");
    write_table(&path, &header, &rows)?;
    write_sidecar(&path, "invariant", cfg)?;
    let summary = InvariantSummary {
        records: records.len(),
        positive: values.iter().filter(|&&v| v >= 0.0).count(),
        negative: values.iter().filter(|&&v| v < 0.0).count(),
    };
    write_json(
        &out.join("summary.json"),
        &json!({ "command": "invariant", "summary": summary, "config": cfg }),
    )?;
    Ok(summary)
}

/// Error statistics for one shadow size.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub t: usize,
    pub median_max_error: f64,
    pub worst_max_error: f64,
    /// Fraction of repeats whose largest error is at most `eps`.
    pub within_eps: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchSummary {
    pub rows: Vec<BenchRow>,
    pub eps: f64,
    /// Raw values: `errors[t_index][repeat]`.
    pub errors: Vec<Vec<f64>>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Largest trace-norm error over all `r`-site contiguous-or-not subsystems
/// of size `r` between shadow and exact reduced density matrices.
pub fn max_rdm_error(state: &StateVector, shadow: &ClassicalShadow, r: usize) -> Result<f64> {
    let subsets = subsets_of_size(state.n, r);
    let errs: Vec<f64> = subsets
        .par_iter()
        .map(|sites| shadow_rdm(shadow, sites)?.trace_distance(&exact_rdm(state, sites)?))
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

fn subsets_of_size(n: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, r: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, r, &mut Vec::new(), &mut out);
    out
}

/// Shadow size against the largest `r`-body RDM error. Writes
/// `bench_raw.csv`, `bench.csv` and `summary.json`.
pub fn run_shadow_bench(cfg: &ExperimentConfig, out: &Path) -> Result<BenchSummary> {
    let b = &cfg.bench;
    if b.repeats == 0 || b.n == 0 || b.r == 0 || b.r > b.n {
        return Err(Error::Config("bench needs repeats > 0 and 0 < r <= n".into()));
    }
    let ts = b.resolved_t_values();
    if ts.contains(&0) {
        return Err(Error::Config("bench.t_values must be positive".into()));
    }
    let state_seed = rng::derive_named(cfg.seed, "bench-state");
    let shadow_seed = rng::derive_named(cfg.seed, "bench-shadow");
    let states: Vec<StateVector> = (0..b.repeats)
        .map(|k| match b.state {
            BenchState::Ghz => StateVector::ghz(b.n),
            BenchState::RandomProduct => random_product_state(b.n, rng::derive_seed(state_seed, k as u64)),
        })
        .collect::<Result<_>>()?;
    let mut errors = Vec::with_capacity(ts.len());
    for (ti, &t) in ts.iter().enumerate() {
        let errs = (0..b.repeats)
            .map(|k| {
                let seed = rng::derive_seed(shadow_seed, (ti * b.repeats + k) as u64);
                let shadow = sample_shadow(&states[k], t, seed)?;
                max_rdm_error(&states[k], &shadow, b.r)
            })
            .collect::<Result<Vec<f64>>>()?;
        errors.push(errs);
    }
    let rows: Vec<BenchRow> = ts
        .iter()
        .zip(&errors)
        .map(|(&t, errs)| BenchRow {
            t,
            median_max_error: median(errs),
            worst_max_error: errs.iter().copied().fold(0.0, f64::max),
            within_eps: errs.iter().filter(|&&e| e <= b.eps).count() as f64 / errs.len() as f64,
        })
        .collect();
    ensure_dir(out)?;
    let header: Vec<String> = ["t", "repeat", "max_error"].map(String::from).to_vec();
    let raw: Vec<Vec<String>> = ts
        .iter()
        .zip(&errors)
        .flat_map(|(&t, errs)| {
            errs.iter()
                .enumerate()
                .map(move |(k, &e)| vec![t.to_string(), k.to_string(), fmt(e)])
        })
        .collect();
    let path = out.join("bench_raw.csv");
    write_table(&path, &header, &raw)?;
    write_sidecar(&path, "shadow-bench", cfg)?;
    let header: Vec<String> = ["t", "median_max_error", "worst_max_error", "within_eps"]
        .map(String::from)
        .to_vec();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                fmt(r.median_max_error),
                fmt(r.worst_max_error),
                fmt(r.within_eps),
            ]
        })
        .collect();
    let path = out.join("bench.csv");
    write_table(&path, &header, &table)?;
    write_sidecar(&path, "shadow-bench", cfg)?;
    let summary = BenchSummary {
        rows,
        eps: b.eps,
        errors,
    };
    write_json(
        &out.join("summary.json"),
        &json!({ "command": "shadow-bench", "summary": summary, "config": cfg }),
    )?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tfim_cfg() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"seed": 4, "family": {"name": "tfim", "n": 4, "field_box": [0.5, 1.5]},
                "dataset": {"n_train": 6, "n_validation": 2, "n_test": 2, "shadow_size": 3}}"#,
        )
        .unwrap()
    }

    #[test]
    fn config_defaults_and_overrides() {
        let mut v: Value =
            serde_json::from_str(r#"{"family": {"name": "tfim", "n": 4, "field_box": [0, 2]}}"#).unwrap();
        apply_override(&mut v, "dataset.shadow_size", "7").unwrap();
        apply_override(&mut v, "predict.mode", "ridge").unwrap();
        let cfg = ExperimentConfig::from_value(v).unwrap();
        assert_eq!(cfg.dataset.shadow_size, 7);
        assert_eq!(cfg.predict.mode, PredictMode::Ridge);
        assert_eq!(cfg.dataset.n_train, 20);
        assert!(ExperimentConfig::from_json(r#"{"sed": 1}"#).is_err());
    }

    #[test]
    fn generated_files() {
        let dir = tempfile::tempdir().unwrap();
        let s = run_generate(&tfim_cfg(), dir.path()).unwrap();
        assert_eq!(s.records, 10);
        let bytes = std::fs::read(dir.path().join("shadows/rec00003.shdw")).unwrap();
        assert_eq!(bytes.len(), crate::shadows::HEADER_LEN + 4 * 3);
        let side: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("records.csv.json")).unwrap()).unwrap();
        assert_eq!(side["config"]["dataset"]["degeneracy_tol"], json!(1e-8));
    }

    #[test]
    fn region_counts_must_match() {
        let mut cfg = tfim_cfg();
        cfg.dataset.regions = vec![Region {
            physical_box: vec![(0.5, 0.7)],
            count: 3,
        }];
        assert!(matches!(generate_dataset(&cfg, false), Err(Error::Config(_))));
    }

    #[test]
    fn splits_partition_the_records() {
        let [a, b, c] = dataset_splits(&tfim_cfg()).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (6, 2, 2));
        let mut all = [a, b, c].concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn random_product_states_are_normalized() {
        let s = random_product_state(5, 3).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-12);
        assert_ne!(s.amplitudes, random_product_state(5, 4).unwrap().amplitudes);
    }

    #[test]
    fn subset_enumeration() {
        assert_eq!(subsets_of_size(4, 2).len(), 6);
        assert_eq!(subsets_of_size(8, 2).len(), 28);
    }
}
