//! Per-class feature statistics and false-positive / false-negative exports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Label};
use crate::error::{Error, Result};
use crate::evaluation::OutOfFold;
use crate::features::{write_atomic, FeatureMatrix};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub feature: String,
    pub class: Label,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub sd: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub rows: Vec<StatRow>,
}

impl FeatureStats {
    pub fn get(&self, feature: &str, class: Label) -> Option<&StatRow> {
        self.rows.iter().find(|r| r.feature == feature && r.class == class)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["feature", "class", "mean", "sd", "n"])?;
        for r in &self.rows {
            out.write_record([
                r.feature.clone(),
                r.class.as_str().to_string(),
                r.mean.to_string(),
                r.sd.to_string(),
                r.n.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<stats csv>", e))?;
        Ok(())
    }
}

/// Mean and standard deviation of every column, per class. Rows are ordered
/// by column, then non-toxic before toxic.
pub fn group_means(x: &Matrix, y: &[Label], columns: &[&str]) -> Result<FeatureStats> {
    if x.rows() != y.len() {
        return Err(Error::Misaligned(format!("{} rows, {} labels", x.rows(), y.len())));
    }
    if x.cols() != columns.len() {
        return Err(Error::DimensionMismatch {
            expected: columns.len(),
            got: x.cols(),
        });
    }
    let classes = [Label::NonToxic, Label::Toxic];
    for class in classes {
        if !y.contains(&class) {
            return Err(Error::InsufficientClass {
                class: class.as_str(),
                available: 0,
                required: 1,
            });
        }
    }
    let mut rows = Vec::with_capacity(2 * columns.len());
    for (j, name) in columns.iter().enumerate() {
        for class in classes {
            let vals: Vec<f64> = (0..x.rows()).filter(|&i| y[i] == class).map(|i| x.get(i, j)).collect();
            let n = vals.len();
            let mean = vals.iter().sum::<f64>() / n as f64;
            let sd = if n < 2 {
                0.0
            } else {
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            };
            rows.push(StatRow {
                feature: name.to_string(),
                class,
                mean,
                sd,
                n,
            });
        }
    }
    Ok(FeatureStats { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorKind {
    #[serde(rename = "FP")]
    FalsePositive,
    #[serde(rename = "FN")]
    FalseNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub kind: ErrorKind,
    pub id: String,
    pub text: String,
    pub gold: Label,
    pub predicted: Label,
    pub score: f64,
    pub fold: usize,
    pub features: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorBuckets {
    /// Most confident first: highest score first.
    pub false_positives: Vec<ErrorEntry>,
    /// Most confident first: lowest score first.
    pub false_negatives: Vec<ErrorEntry>,
}

pub fn export_errors(oof: &OutOfFold, corpus: &Corpus, fm: &FeatureMatrix) -> Result<ErrorBuckets> {
    let n = corpus.len();
    let lens = [
        oof.ids.len(),
        oof.gold.len(),
        oof.predicted.len(),
        oof.scores.len(),
        oof.fold.len(),
        fm.len(),
    ];
    if lens.iter().any(|&l| l != n) {
        return Err(Error::Misaligned(format!(
            "predictions/features {lens:?} vs corpus of {n}"
        )));
    }
    let columns = fm.columns();
    let mut buckets = ErrorBuckets::default();
    for (i, doc) in corpus.iter().enumerate() {
        if oof.ids[i] != doc.id || fm.ids[i] != doc.id {
            return Err(Error::Misaligned(format!(
                "row {i}: corpus id `{}`, prediction id `{}`, feature id `{}`",
                doc.id, oof.ids[i], fm.ids[i]
            )));
        }
        let kind = match (oof.gold[i], oof.predicted[i]) {
            (Label::NonToxic, Label::Toxic) => ErrorKind::FalsePositive,
            (Label::Toxic, Label::NonToxic) => ErrorKind::FalseNegative,
            _ => continue,
        };
        let entry = ErrorEntry {
            kind,
            id: doc.id.clone(),
            text: doc.text.clone(),
            gold: oof.gold[i],
            predicted: oof.predicted[i],
            score: oof.scores[i],
            fold: oof.fold[i],
            features: columns
                .iter()
                .map(|c| c.to_string())
                .zip(fm.x.row(i).iter().copied())
                .collect(),
        };
        match kind {
            ErrorKind::FalsePositive => buckets.false_positives.push(entry),
            ErrorKind::FalseNegative => buckets.false_negatives.push(entry),
        }
    }
    buckets
        .false_positives
        .sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
    buckets
        .false_negatives
        .sort_by(|a, b| a.score.total_cmp(&b.score).then_with(|| a.id.cmp(&b.id)));
    Ok(buckets)
}

pub const FP_FILE: &str = "false_positives.jsonl";
pub const FN_FILE: &str = "false_negatives.jsonl";

fn write_entries(path: &Path, entries: &[ErrorEntry]) -> Result<()> {
    write_atomic(path, |w| {
        for e in entries {
            serde_json::to_writer(&mut *w, e)?;
            w.write_all(b"\n").map_err(|err| Error::io(path, err))?;
        }
        Ok(())
    })
}

/// Writes both buckets as JSON lines into `dir`; returns the two paths.
pub fn write_error_buckets(buckets: &ErrorBuckets, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let fp = dir.join(FP_FILE);
    let fn_ = dir.join(FN_FILE);
    write_entries(&fp, &buckets.false_positives)?;
    write_entries(&fn_, &buckets.false_negatives)?;
    Ok((fp, fn_))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Channel, Document};
    use crate::features::FeatureSet;

    fn labels(bits: &[u8]) -> Vec<Label> {
        bits.iter()
            .map(|b| if *b == 1 { Label::Toxic } else { Label::NonToxic })
            .collect()
    }

    #[test]
    fn hand_computed_means() {
        let x = Matrix::from_rows(2, &[vec![1.0, 7.0], vec![2.0, 7.0], vec![3.0, 7.0], vec![5.0, 7.0]]).unwrap();
        let s = group_means(&x, &labels(&[0, 0, 1, 1]), &["a", "k"]).unwrap();
        assert_eq!(s.get("a", Label::NonToxic).unwrap().mean, 1.5);
        assert_eq!(s.get("a", Label::Toxic).unwrap().mean, 4.0);
        assert!((s.get("a", Label::Toxic).unwrap().sd - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.get("k", Label::Toxic).unwrap().sd, 0.0);
        assert_eq!(s.get("k", Label::NonToxic).unwrap().sd, 0.0);
        let n: usize = s.rows.iter().filter(|r| r.feature == "a").map(|r| r.n).sum();
        assert_eq!(n, 4);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("feature,class,mean,sd,n\na,non_toxic,1.5,"));
    }

    #[test]
    fn empty_class_rejected() {
        let x = Matrix::from_rows(1, &[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            group_means(&x, &labels(&[1, 1]), &["a"]),
            Err(Error::InsufficientClass { .. })
        ));
    }

    #[test]
    fn permutation_invariant() {
        let x = Matrix::from_rows(1, &[vec![0.5], vec![2.0], vec![3.25], vec![9.0], vec![-1.0]]).unwrap();
        let y = labels(&[0, 1, 0, 1, 0]);
        let a = group_means(&x, &y, &["a"]).unwrap();
        let perm = [4, 2, 0, 3, 1];
        let xp = x.select_rows(&perm);
        let yp: Vec<Label> = perm.iter().map(|&i| y[i]).collect();
        let b = group_means(&xp, &yp, &["a"]).unwrap();
        for (r, s) in a.rows.iter().zip(&b.rows) {
            assert!((r.mean - s.mean).abs() < 1e-12 && (r.sd - s.sd).abs() < 1e-12 && r.n == s.n);
        }
    }

    fn fixture(pred: &[u8], scores: &[f64]) -> (Corpus, FeatureMatrix, OutOfFold) {
        let gold = labels(&[1, 0, 1, 0, 0]);
        let docs: Vec<Document> = (0..5)
            .map(|i| Document::new(format!("d{i}"), Channel::CodeReview, format!("text {i}"), Some(gold[i])))
            .collect();
        let corpus = Corpus::new(docs).unwrap();
        let ids: Vec<String> = (0..5).map(|i| format!("d{i}")).collect();
        let fm = FeatureMatrix {
            set: FeatureSet::Baseline,
            ids: ids.clone(),
            x: Matrix::from_rows(2, &(0..5).map(|i| vec![i as f64, 0.5]).collect::<Vec<_>>()).unwrap(),
            labels: gold.clone(),
        };
        let oof = OutOfFold {
            ids,
            gold,
            predicted: labels(pred),
            scores: scores.to_vec(),
            fold: vec![0, 1, 2, 0, 1],
        };
        (corpus, fm, oof)
    }

    #[test]
    fn perfect_predictions_have_no_errors() {
        let (c, fm, oof) = fixture(&[1, 0, 1, 0, 0], &[0.9, 0.1, 0.8, 0.2, 0.3]);
        let b = export_errors(&oof, &c, &fm).unwrap();
        assert!(b.false_positives.is_empty() && b.false_negatives.is_empty());
    }

    #[test]
    fn buckets_sorted_and_sized() {
        let (c, fm, oof) = fixture(&[0, 1, 0, 1, 0], &[0.2, 0.6, 0.4, 0.9, 0.3]);
        let b = export_errors(&oof, &c, &fm).unwrap();
        assert_eq!(
            b.false_positives.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(),
            vec!["d3", "d1"]
        );
        assert_eq!(
            b.false_negatives.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(),
            vec!["d0", "d2"]
        );
        assert!(b
            .false_positives
            .iter()
            .all(|e| e.gold == Label::NonToxic && e.predicted == Label::Toxic));
        assert!(b
            .false_negatives
            .iter()
            .all(|e| e.gold == Label::Toxic && e.predicted == Label::NonToxic));
        assert_eq!(b.false_positives[0].features["politeness"], 3.0);

        let dir = tempfile::tempdir().unwrap();
        let (fp, fn_) = write_error_buckets(&b, dir.path()).unwrap();
        let fp_src = std::fs::read_to_string(fp).unwrap();
        assert_eq!(fp_src.lines().count(), 2);
        let first: ErrorEntry = serde_json::from_str(fp_src.lines().next().unwrap()).unwrap();
        assert_eq!(first, b.false_positives[0]);
        assert!(fp_src.contains("\"kind\":\"FP\""));
        assert_eq!(std::fs::read_to_string(fn_).unwrap().lines().count(), 2);
    }

    #[test]
    fn misaligned_rejected() {
        let (c, fm, mut oof) = fixture(&[1, 0, 1, 0, 0], &[0.9, 0.1, 0.8, 0.2, 0.3]);
        oof.scores.pop();
        assert!(matches!(export_errors(&oof, &c, &fm), Err(Error::Misaligned(_))));
        let (c, fm, mut oof) = fixture(&[1, 0, 1, 0, 0], &[0.9, 0.1, 0.8, 0.2, 0.3]);
        oof.ids.swap(0, 1);
        assert!(matches!(export_errors(&oof, &c, &fm), Err(Error::Misaligned(_))));
    }
}
