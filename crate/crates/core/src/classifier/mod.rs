//! Phase classification in shadow-kernel feature space: a norm-constrained
//! hinge-loss SVM, kernel PCA, and an unsupervised random-projection split.

mod pca;
mod svm;

use std::path::Path;

use crate::error::{Error, Result};

pub use pca::{kernel_pca, kernel_pca_with, unsupervised_split, PcaEmbedding, SplitResult, EIGEN_CLIP_TOL};
pub use svm::{sign, svm_predict, svm_train, svm_train_best_effort, SvmConfig, SvmModel};

/// Fraction of positions where `a` and `b` agree.
pub fn agreement(a: &[i8], b: &[i8]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64
}

/// Agreement of two binary labelings up to swapping the label names.
pub fn agreement_up_to_relabel(a: &[i8], b: &[i8]) -> f64 {
    let s = agreement(a, b);
    s.max(1.0 - s)
}

/// Writes `record_id, pc1..pck, label_true, label_pred`.
pub fn write_embedding_csv(
    path: &Path,
    emb: &PcaEmbedding,
    record_ids: &[String],
    labels_true: &[i8],
    labels_pred: &[i8],
) -> Result<()> {
    let n = emb.n();
    for len in [record_ids.len(), labels_true.len(), labels_pred.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    let mut w = csv::Writer::from_path(path).map_err(Error::Csv)?;
    let mut header = vec!["record_id".to_string()];
    header.extend((1..=emb.num_components).map(|c| format!("pc{c}")));
    header.push("label_true".into());
    header.push("label_pred".into());
    w.write_record(&header)?;
    for i in 0..n {
        let mut row = vec![record_ids[i].clone()];
        row.extend(emb.point(i).iter().map(|v| format!("{v:.12e}")));
        row.push(labels_true[i].to_string());
        row.push(labels_pred[i].to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Serializes a trained SVM to JSON.
pub fn svm_to_json(model: &SvmModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(model)?)
}

pub fn svm_from_json(text: &str) -> Result<SvmModel> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn agreement_counts() {
        assert_eq!(agreement(&[1, -1, 1, 1], &[1, 1, 1, -1]), 0.5);
        assert_eq!(agreement_up_to_relabel(&[1, 1, -1, -1], &[-1, -1, 1, 1]), 1.0);
    }

    #[test]
    fn embedding_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        let emb = PcaEmbedding {
            num_components: 2,
            coordinates: DMatrix::from_row_slice(2, 2, &[0.5, -0.25, -0.5, 0.25]),
            eigenvalues: vec![0.5, 0.125],
        };
        write_embedding_csv(&path, &emb, &["a".into(), "b".into()], &[1, -1], &[1, 1]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "record_id,pc1,pc2,label_true,label_pred");
        assert!(lines.next().unwrap().starts_with("a,5.000000000000e-1"));
    }

    #[test]
    fn svm_json_roundtrip() {
        let m = SvmModel {
            alpha: vec![0.5, -0.5],
            lambda_sq: 2.0,
            training_error: 0.0,
            misclassified: 0,
            iterations: 3,
            gram_hash: 42,
        };
        assert_eq!(svm_from_json(&svm_to_json(&m).unwrap()).unwrap(), m);
    }
}
