//! Metrics and stratified k-fold cross-validation.
//!
//! Toxic is the positive class for the confusion matrix. Class 0 metrics
//! treat non-toxic as positive. Undefined ratios (0/0) are reported as 0 and
//! named in the `undefined` list.

use serde::{Deserialize, Serialize};

use crate::corpus::{stratified_assignment, Label};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureSet};
use crate::models::{train, ModelConfig, TrainedModel};
use crate::par::{self, ExecMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn from_predictions(gold: &[Label], predicted: &[Label]) -> Result<Self> {
        if gold.len() != predicted.len() {
            return Err(Error::Misaligned(format!(
                "{} gold labels, {} predictions",
                gold.len(),
                predicted.len()
            )));
        }
        let mut cm = ConfusionMatrix::default();
        for (g, p) in gold.iter().zip(predicted) {
            match (g, p) {
                (Label::Toxic, Label::Toxic) => cm.tp += 1,
                (Label::NonToxic, Label::Toxic) => cm.fp += 1,
                (Label::Toxic, Label::NonToxic) => cm.fn_ += 1,
                (Label::NonToxic, Label::NonToxic) => cm.tn += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub class0: ClassScores,
    pub class1: ClassScores,
    pub undefined: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_scores(tp: usize, fp: usize, fn_: usize, class: usize, undefined: &mut Vec<String>) -> ClassScores {
    let precision = ratio(tp, tp + fp, &format!("precision{class}"), undefined);
    let recall = ratio(tp, tp + fn_, &format!("recall{class}"), undefined);
    let f1 = if precision + recall == 0.0 {
        undefined.push(format!("f1_{class}"));
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassScores { precision, recall, f1 }
}

pub fn prf(cm: &ConfusionMatrix) -> Prf {
    let mut undefined = Vec::new();
    let class0 = class_scores(cm.tn, cm.fn_, cm.fp, 0, &mut undefined);
    let class1 = class_scores(cm.tp, cm.fp, cm.fn_, 1, &mut undefined);
    Prf {
        class0,
        class1,
        undefined,
    }
}

pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    let (tp, fp, fn_, tn) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64, cm.tn as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if den == 0.0 {
        return 0.0;
    }
    ((tp * tn - fp * fn_) / den.sqrt()).clamp(-1.0, 1.0)
}

/// Area under the ROC curve for `positive`, via the Mann-Whitney statistic
/// with midranks for ties. Scores are "higher means toxic"; for the
/// non-toxic class they are negated.
pub fn roc_auc(labels: &[Label], scores: &[f64], positive: Label) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::Misaligned(format!(
            "{} labels, {} scores",
            labels.len(),
            scores.len()
        )));
    }
    let sign = if positive == Label::Toxic { 1.0 } else { -1.0 };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| (sign * scores[a]).total_cmp(&(sign * scores[b])));
    let n_pos = labels.iter().filter(|l| **l == positive).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && sign * scores[order[j + 1]] == sign * scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let midrank = (i + j + 2) as f64 / 2.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| labels[k] == positive).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Rates are fractions in `[0, 1]` (MCC in `[-1, 1]`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub p0: f64,
    pub r0: f64,
    pub f1_0: f64,
    pub roc0: f64,
    pub p1: f64,
    pub r1: f64,
    pub f1_1: f64,
    pub roc1: f64,
    pub mcc: f64,
}

impl Metrics {
    pub const HEADER: [&'static str; 9] = ["P0", "R0", "F1_0", "ROC0", "P1", "R1", "F1_1", "ROC1", "MCC"];

    pub fn compute(
        gold: &[Label],
        predicted: &[Label],
        scores: &[f64],
    ) -> Result<(Metrics, ConfusionMatrix, Vec<String>)> {
        let cm = ConfusionMatrix::from_predictions(gold, predicted)?;
        let p = prf(&cm);
        let m = Metrics {
            p0: p.class0.precision,
            r0: p.class0.recall,
            f1_0: p.class0.f1,
            roc0: roc_auc(gold, scores, Label::NonToxic)?,
            p1: p.class1.precision,
            r1: p.class1.recall,
            f1_1: p.class1.f1,
            roc1: roc_auc(gold, scores, Label::Toxic)?,
            mcc: mcc(&cm),
        };
        Ok((m, cm, p.undefined))
    }

    pub fn values(&self) -> [f64; 9] {
        [
            self.p0, self.r0, self.f1_0, self.roc0, self.p1, self.r1, self.f1_1, self.roc1, self.mcc,
        ]
    }

    pub fn mean(all: &[Metrics]) -> Metrics {
        let n = all.len().max(1) as f64;
        let mut sum = [0.0; 9];
        for m in all {
            for (s, v) in sum.iter_mut().zip(m.values()) {
                *s += v;
            }
        }
        let v = sum.map(|s| s / n);
        Metrics {
            p0: v[0],
            r0: v[1],
            f1_0: v[2],
            roc0: v[3],
            p1: v[4],
            r1: v[5],
            f1_1: v[6],
            roc1: v[7],
            mcc: v[8],
        }
    }

    /// Percentages with two decimals, in [`Metrics::HEADER`] order.
    pub fn percent_strings(&self) -> Vec<String> {
        self.values().iter().map(|v| format!("{:.2}", v * 100.0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Unweighted mean of per-fold metrics.
    #[default]
    MeanOfFolds,
    /// Metrics over all out-of-fold predictions at once.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub undefined: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub feature_set: FeatureSet,
    pub model: ModelConfig,
    pub k: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
    pub n_documents: usize,
    pub folds: Vec<FoldResult>,
    /// Metrics under `aggregation`.
    pub summary: Metrics,
    pub pooled_confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn csv_header() -> String {
        let mut cols = vec!["feature_set", "model"];
        cols.extend(Metrics::HEADER);
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![self.feature_set.to_string(), self.model.kind.short_name().to_string()];
        cols.extend(self.summary.percent_strings());
        cols.join(",")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Held-out predictions for every document, in corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutOfFold {
    pub ids: Vec<String>,
    pub gold: Vec<Label>,
    pub predicted: Vec<Label>,
    pub scores: Vec<f64>,
    pub fold: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub aggregation: Aggregation,
}

impl CvConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        CvConfig {
            k,
            seed,
            aggregation: Aggregation::MeanOfFolds,
        }
    }
}

/// Fits a model on the given rows of `fm`.
pub fn fit_fold(fm: &FeatureMatrix, train_idx: &[usize], mcfg: &ModelConfig) -> Result<TrainedModel> {
    let x = fm.x.select_rows(train_idx);
    let y: Vec<Label> = train_idx.iter().map(|&i| fm.labels[i]).collect();
    train(&x, &y, mcfg)
}

struct FoldOutput {
    result: FoldResult,
    test_idx: Vec<usize>,
    scores: Vec<f64>,
    predicted: Vec<Label>,
}

/// Stratified k-fold over a feature matrix. The model for fold `f` is seeded
/// with `model.seed ^ f`.
pub fn cross_validate_matrix(
    fm: &FeatureMatrix,
    mcfg: &ModelConfig,
    cv: &CvConfig,
    mode: ExecMode,
) -> Result<(EvalReport, OutOfFold)> {
    let assignment = stratified_assignment(&fm.labels, cv.k, cv.seed)?;
    let per_fold = par::map_indexed(mode, cv.k, |f| -> Result<FoldOutput> {
        let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = (0..fm.len()).partition(|&i| assignment[i] != f);
        let fold_cfg = mcfg.clone().with_seed(mcfg.seed ^ f as u64);
        let model = fit_fold(fm, &train_idx, &fold_cfg)?;
        let xt = fm.x.select_rows(&test_idx);
        let scores = model.decision_scores(&xt)?;
        let predicted: Vec<Label> = scores.iter().map(|s| model.label_for(*s)).collect();
        let gold: Vec<Label> = test_idx.iter().map(|&i| fm.labels[i]).collect();
        let (metrics, confusion, undefined) = Metrics::compute(&gold, &predicted, &scores)?;
        Ok(FoldOutput {
            result: FoldResult {
                fold: f,
                n_train: train_idx.len(),
                n_test: test_idx.len(),
                confusion,
                metrics,
                undefined,
                iterations: model.meta.iterations,
                converged: model.meta.converged,
            },
            test_idx,
            scores,
            predicted,
        })
    });

    let n = fm.len();
    let mut oof = OutOfFold {
        ids: fm.ids.clone(),
        gold: fm.labels.clone(),
        predicted: vec![Label::NonToxic; n],
        scores: vec![0.0; n],
        fold: assignment,
    };
    let mut folds = Vec::with_capacity(cv.k);
    let mut pooled_confusion = ConfusionMatrix::default();
    for r in per_fold {
        let FoldOutput {
            result: fold,
            test_idx,
            scores,
            predicted,
        } = r?;
        for ((&i, s), p) in test_idx.iter().zip(scores).zip(predicted) {
            oof.scores[i] = s;
            oof.predicted[i] = p;
        }
        pooled_confusion.add(&fold.confusion);
        folds.push(fold);
    }
    let summary = match cv.aggregation {
        Aggregation::MeanOfFolds => Metrics::mean(&folds.iter().map(|f| f.metrics).collect::<Vec<_>>()),
        Aggregation::Pooled => Metrics::compute(&oof.gold, &oof.predicted, &oof.scores)?.0,
    };
    Ok((
        EvalReport {
            feature_set: fm.set,
            model: mcfg.clone(),
            k: cv.k,
            seed: cv.seed,
            aggregation: cv.aggregation,
            n_documents: n,
            folds,
            summary,
            pooled_confusion,
        },
        oof,
    ))
}

/// Convenience: featurize, then cross-validate.
pub fn cross_validate(
    corpus: &crate::corpus::Corpus,
    set: FeatureSet,
    res: &crate::features::Resources,
    mcfg: &ModelConfig,
    cv: &CvConfig,
    mode: ExecMode,
) -> Result<(EvalReport, OutOfFold)> {
    let fm = crate::features::feature_matrix(corpus, set, res, mode)?;
    cross_validate_matrix(&fm, mcfg, cv, mode)
}
