//! Linear SVM, logistic regression and gradient-boosted trees, trained from
//! scratch.
//!
//! * SVM: L2-regularized hinge loss `0.5 |w|^2 + C * sum max(0, 1 - y w.x)`,
//!   solved in the dual by coordinate descent over a seeded permutation per
//!   epoch. The bias is an extra constant-1 feature. Stops when the duality
//!   gap drops to `tol` relative to the primal objective, or after
//!   `max_iter` epochs.
//! * LR: `0.5 |w|^2 + C * sum log(1 + exp(-y (w.x + b)))` with an unpenalized
//!   intercept, full-batch gradient descent with Armijo backtracking. Stops at
//!   gradient norm `tol`, when a step no longer lowers the objective by more
//!   than a few ulps, or after `max_iter` iterations.
//! * GBT: regression trees fitted to logistic-loss residuals. Each split
//!   looks at `ceil(sqrt(p))` features drawn from a seeded RNG and maximizes
//!   variance reduction; ties go to the lowest feature index, then the lowest
//!   threshold. Leaves take one Newton step, halved while it would raise that
//!   leaf's training loss.
//!
//! SVM and LR standardize features using training statistics; trees use raw
//! values. Labels map to `+1` (toxic) and `-1` (non-toxic). Higher scores
//! always mean "more toxic".

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{rng, Label};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par::{self, ExecMode};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearSvm,
    LogisticRegression,
    GradientBoosting,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [
        ModelKind::LinearSvm,
        ModelKind::LogisticRegression,
        ModelKind::GradientBoosting,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::LinearSvm => "svm",
            ModelKind::LogisticRegression => "lr",
            ModelKind::GradientBoosting => "gb",
        }
    }

    pub fn standardizes(self) -> bool {
        self != ModelKind::GradientBoosting
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.short_name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" | "linear_svm" => Ok(ModelKind::LinearSvm),
            "lr" | "logistic_regression" => Ok(ModelKind::LogisticRegression),
            "gb" | "gbt" | "gradient_boosting" => Ok(ModelKind::GradientBoosting),
            _ => Err(Error::InvalidArgument(format!(
                "unknown model `{s}` (expected svm, lr or gb)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        let params: &[(&str, f64)] = match kind {
            ModelKind::LinearSvm => &[("C", 10.0), ("max_iter", 10000.0), ("tol", 1e-4)],
            ModelKind::LogisticRegression => &[("C", 1.0), ("max_iter", 4000.0), ("tol", 1e-6)],
            ModelKind::GradientBoosting => &[
                ("learning_rate", 1.0),
                ("n_estimators", 1000.0),
                ("max_depth", 10.0),
                ("min_samples_leaf", 2.0),
            ],
        };
        ModelConfig {
            kind,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Overrides a hyperparameter. `max_features` (GBT) may be added; it
    /// defaults to `ceil(sqrt(p))`.
    pub fn set(mut self, name: &str, value: f64) -> Result<Self> {
        let known =
            self.params.contains_key(name) || (self.kind == ModelKind::GradientBoosting && name == "max_features");
        if !known {
            return Err(Error::InvalidArgument(format!(
                "model {} has no hyperparameter `{name}`",
                self.kind
            )));
        }
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "hyperparameter `{name}` must be positive, got {value}"
            )));
        }
        let integral = matches!(
            name,
            "max_iter" | "n_estimators" | "max_depth" | "min_samples_leaf" | "max_features"
        );
        if integral && value.fract() != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "hyperparameter `{name}` must be an integer, got {value}"
            )));
        }
        self.params.insert(name.to_string(), value);
        Ok(self)
    }

    fn get(&self, name: &str) -> f64 {
        self.params[name]
    }

    fn get_usize(&self, name: &str) -> usize {
        self.params[name] as usize
    }
}

/// Per-column z-scoring with population standard deviation. Constant columns
/// keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Self {
        let n = x.rows().max(1) as f64;
        let mut mean = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; x.cols()];
        for row in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                if sd <= 1e-12 * m.abs().max(1.0) {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, v), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.scale) {
            *o = (v - m) / s;
        }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            self.transform_row(x.row(i), out.row_mut(i));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf { .. } => 1,
            Node::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Params {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Trees {
        base_score: f64,
        learning_rate: f64,
        trees: Vec<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub config: ModelConfig,
    pub n_features: usize,
    pub standardizer: Option<Standardizer>,
    pub params: Params,
    pub meta: TrainingMeta,
}

fn signs(y: &[Label]) -> Vec<f64> {
    y.iter().map(|l| if l.is_toxic() { 1.0 } else { -1.0 }).collect()
}

fn check_inputs(x: &Matrix, y: &[Label]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Misaligned(format!(
            "{} feature rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    x.check_finite()?;
    let toxic = y.iter().filter(|l| l.is_toxic()).count();
    if toxic == 0 || toxic == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub fn train(x: &Matrix, y: &[Label], cfg: &ModelConfig) -> Result<TrainedModel> {
    train_traced(x, y, cfg).map(|(m, _)| m)
}

/// Trains and also returns the objective after every epoch / iteration /
/// tree (SVM dual objective, LR objective, GBT mean training log-loss).
pub fn train_traced(x: &Matrix, y: &[Label], cfg: &ModelConfig) -> Result<(TrainedModel, Vec<f64>)> {
    check_inputs(x, y)?;
    let standardizer = cfg.kind.standardizes().then(|| Standardizer::fit(x));
    let xs = match &standardizer {
        Some(s) => s.transform(x),
        None => x.clone(),
    };
    let ys = signs(y);
    let (params, meta, trace) = match cfg.kind {
        ModelKind::LinearSvm => svm_dual_cd(
            &xs,
            &ys,
            cfg.get("C"),
            cfg.get_usize("max_iter"),
            cfg.get("tol"),
            cfg.seed,
        ),
        ModelKind::LogisticRegression => logistic_gd(&xs, &ys, cfg.get("C"), cfg.get_usize("max_iter"), cfg.get("tol")),
        ModelKind::GradientBoosting => gbt(&xs, &ys, cfg),
    };
    Ok((
        TrainedModel {
            format_version: FORMAT_VERSION,
            config: cfg.clone(),
            n_features: x.cols(),
            standardizer,
            params,
            meta,
        },
        trace,
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn svm_dual_cd(
    x: &Matrix,
    y: &[f64],
    c: f64,
    max_iter: usize,
    tol: f64,
    seed: u64,
) -> (Params, TrainingMeta, Vec<f64>) {
    let n = x.rows();
    let d = x.cols();
    // w[d] is the bias weight on the implicit constant feature.
    let mut w = vec![0.0; d + 1];
    let mut alpha = vec![0.0; n];
    let mut alpha_sum = 0.0;
    let qii: Vec<f64> = x.iter_rows().map(|r| dot(r, r) + 1.0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng: ChaCha8Rng = rng(seed);
    let margin = |w: &[f64], i: usize| dot(&w[..d], x.row(i)) + w[d];
    let mut trace = Vec::new();
    let mut epochs = 0;
    let mut converged = false;
    let mut gap = f64::INFINITY;

    while epochs < max_iter {
        order.shuffle(&mut rng);
        for &i in &order {
            let g = y[i] * margin(&w, i) - 1.0;
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= c {
                g.max(0.0)
            } else {
                g
            };
            if pg.abs() <= 1e-14 {
                continue;
            }
            let old = alpha[i];
            alpha[i] = (old - g / qii[i]).clamp(0.0, c);
            let delta = (alpha[i] - old) * y[i];
            if delta != 0.0 {
                for (wj, xj) in w[..d].iter_mut().zip(x.row(i)) {
                    *wj += delta * xj;
                }
                w[d] += delta;
                alpha_sum += alpha[i] - old;
            }
        }
        epochs += 1;
        let half_norm = 0.5 * dot(&w, &w);
        let dual = half_norm - alpha_sum;
        trace.push(dual);
        let hinge: f64 = (0..n).map(|i| (1.0 - y[i] * margin(&w, i)).max(0.0)).sum();
        let primal = half_norm + c * hinge;
        gap = primal + dual;
        if gap <= tol * primal.max(1.0) {
            converged = true;
            break;
        }
    }
    let bias = w[d];
    w.truncate(d);
    let primal = trace.last().map_or(0.0, |dual| gap - dual);
    (
        Params::Linear { weights: w, bias },
        TrainingMeta {
            iterations: epochs,
            final_objective: primal,
            converged,
        },
        trace,
    )
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `0.5 |w|^2 + C * sum log(1 + exp(-y (w.x + b)))`; `theta = [w..., b]`.
pub fn logistic_objective(theta: &[f64], x: &Matrix, y: &[f64], c: f64) -> f64 {
    let d = x.cols();
    let reg = 0.5 * dot(&theta[..d], &theta[..d]);
    let loss: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(r, yi)| softplus(-yi * (dot(&theta[..d], r) + theta[d])))
        .sum();
    reg + c * loss
}

pub fn logistic_gradient(theta: &[f64], x: &Matrix, y: &[f64], c: f64) -> Vec<f64> {
    let d = x.cols();
    let mut g = theta.to_vec();
    g[d] = 0.0;
    for (r, yi) in x.iter_rows().zip(y) {
        let z = dot(&theta[..d], r) + theta[d];
        let coef = -c * yi * sigmoid(-yi * z);
        for (gj, xj) in g[..d].iter_mut().zip(r) {
            *gj += coef * xj;
        }
        g[d] += coef;
    }
    g
}

fn logistic_gd(x: &Matrix, y: &[f64], c: f64, max_iter: usize, tol: f64) -> (Params, TrainingMeta, Vec<f64>) {
    let d = x.cols();
    let mut theta = vec![0.0; d + 1];
    let mut obj = logistic_objective(&theta, x, y, c);
    let mut step = 1.0f64;
    let mut trace = vec![obj];
    let mut iterations = 0;
    let mut converged = false;
    let mut candidate = vec![0.0; d + 1];
    while iterations < max_iter {
        let g = logistic_gradient(&theta, x, y, c);
        let gnorm2 = dot(&g, &g);
        if gnorm2.sqrt() <= tol {
            converged = true;
            break;
        }
        let mut t = (step * 2.0).min(1.0);
        let mut accepted = false;
        let mut new_obj = obj;
        while t > 1e-20 {
            for ((cj, tj), gj) in candidate.iter_mut().zip(&theta).zip(&g) {
                *cj = tj - t * gj;
            }
            new_obj = logistic_objective(&candidate, x, y, c);
            if new_obj <= obj - 0.5 * t * gnorm2 {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            // No representable step decreases the objective any more.
            converged = true;
            break;
        }
        // The Armijo bound can fall below one ulp of the objective, so steps
        // keep being accepted without changing anything.
        let stalled = obj - new_obj <= 4.0 * f64::EPSILON * obj.abs().max(1.0);
        obj = new_obj;
        step = t;
        theta.copy_from_slice(&candidate);
        trace.push(obj);
        if stalled {
            converged = true;
            break;
        }
    }
    let bias = theta[d];
    theta.truncate(d);
    (
        Params::Linear { weights: theta, bias },
        TrainingMeta {
            iterations,
            final_objective: obj,
            converged,
        },
        trace,
    )
}

struct TreeBuilder<'a> {
    x: &'a Matrix,
    residual: &'a [f64],
    hess: &'a [f64],
    y: &'a [f64],
    f: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    n_candidates: usize,
    rng: &'a mut ChaCha8Rng,
}

impl TreeBuilder<'_> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> Node {
        if depth < self.max_depth && idx.len() >= 2 * self.min_leaf {
            if let Some((feature, threshold)) = self.best_split(idx) {
                let mut left: Vec<usize> = Vec::with_capacity(idx.len());
                let mut right: Vec<usize> = Vec::with_capacity(idx.len());
                for &i in idx.iter() {
                    if self.x.get(i, feature) <= threshold {
                        left.push(i);
                    } else {
                        right.push(i);
                    }
                }
                return Node::Split {
                    feature,
                    threshold,
                    left: Box::new(self.build(&mut left, depth + 1)),
                    right: Box::new(self.build(&mut right, depth + 1)),
                };
            }
        }
        Node::Leaf {
            value: self.leaf_value(idx),
        }
    }

    fn best_split(&mut self, idx: &mut [usize]) -> Option<(usize, f64)> {
        let p = self.x.cols();
        let mut features = rand::seq::index::sample(self.rng, p, self.n_candidates.min(p)).into_vec();
        features.sort_unstable();
        let n = idx.len();
        let total: f64 = idx.iter().map(|&i| self.residual[i]).sum();
        let parent = total * total / n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for &j in &features {
            idx.sort_by(|&a, &b| self.x.get(a, j).total_cmp(&self.x.get(b, j)).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.residual[idx[k]];
                let nl = k + 1;
                if nl < self.min_leaf {
                    continue;
                }
                if n - nl < self.min_leaf {
                    break;
                }
                let (a, b) = (self.x.get(idx[k], j), self.x.get(idx[k + 1], j));
                if a == b {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / (n - nl) as f64 - parent;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some((gain, j, threshold));
                }
            }
        }
        let scale = idx.iter().map(|&i| self.residual[i] * self.residual[i]).sum::<f64>();
        best.filter(|(g, _, _)| *g > 1e-12 * scale.max(f64::MIN_POSITIVE))
            .map(|(_, j, t)| (j, t))
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        let num: f64 = idx.iter().map(|&i| self.residual[i]).sum();
        let den: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        if den <= 1e-150 {
            return 0.0;
        }
        let mut v = num / den;
        let loss = |v: f64| idx.iter().map(|&i| softplus(-self.y[i] * (self.f[i] + v))).sum::<f64>();
        let before = loss(0.0);
        for _ in 0..60 {
            if loss(v) <= before {
                return v;
            }
            v *= 0.5;
        }
        0.0
    }
}

fn mean_log_loss(f: &[f64], y: &[f64]) -> f64 {
    f.iter().zip(y).map(|(fi, yi)| softplus(-yi * fi)).sum::<f64>() / f.len() as f64
}

fn gbt(x: &Matrix, y: &[f64], cfg: &ModelConfig) -> (Params, TrainingMeta, Vec<f64>) {
    let n = x.rows();
    let p = x.cols();
    let lr = cfg.get("learning_rate");
    let n_estimators = cfg.get_usize("n_estimators");
    let n_candidates = cfg
        .params
        .get("max_features")
        .map_or_else(|| (p as f64).sqrt().ceil() as usize, |&v| v as usize)
        .clamp(1, p.max(1));
    let pos = y.iter().filter(|v| **v > 0.0).count() as f64;
    let base_score = (pos / (n as f64 - pos)).ln();
    let mut f = vec![base_score; n];
    let mut rng = rng(cfg.seed);
    let mut trees = Vec::with_capacity(n_estimators);
    let mut trace = vec![mean_log_loss(&f, y)];
    for _ in 0..n_estimators {
        // y - p written so neither class saturates to an exact zero residual
        // before the other: 1 - sigmoid(F) underflows once F > ~37.
        let residual: Vec<f64> = f.iter().zip(y).map(|(fi, yi)| yi * sigmoid(-yi * fi)).collect();
        let hess: Vec<f64> = f.iter().map(|fi| sigmoid(*fi) * sigmoid(-fi)).collect();
        let mut idx: Vec<usize> = (0..n).collect();
        let mut builder = TreeBuilder {
            x,
            residual: &residual,
            hess: &hess,
            y,
            f: &f,
            max_depth: cfg.get_usize("max_depth"),
            min_leaf: cfg.get_usize("min_samples_leaf"),
            n_candidates,
            rng: &mut rng,
        };
        let mut tree = builder.build(&mut idx, 0);
        if lr != 1.0 {
            scale_leaves(&mut tree, lr);
        }
        for (i, fi) in f.iter_mut().enumerate() {
            *fi += tree.predict(x.row(i));
        }
        trees.push(tree);
        trace.push(mean_log_loss(&f, y));
    }
    let final_objective = *trace.last().expect("trace starts non-empty");
    (
        Params::Trees {
            base_score,
            learning_rate: lr,
            trees,
        },
        TrainingMeta {
            iterations: n_estimators,
            final_objective,
            converged: true,
        },
        trace,
    )
}

fn scale_leaves(node: &mut Node, factor: f64) {
    match node {
        Node::Leaf { value } => *value *= factor,
        Node::Split { left, right, .. } => {
            scale_leaves(left, factor);
            scale_leaves(right, factor);
        }
    }
}

impl TrainedModel {
    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.cols(),
            });
        }
        Ok(())
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        let mut buf;
        let row = match &self.standardizer {
            Some(s) => {
                buf = vec![0.0; row.len()];
                s.transform_row(row, &mut buf);
                &buf[..]
            }
            None => row,
        };
        match &self.params {
            Params::Linear { weights, bias } => {
                let z = dot(weights, row) + bias;
                if self.config.kind == ModelKind::LogisticRegression {
                    sigmoid(z)
                } else {
                    z
                }
            }
            Params::Trees { base_score, trees, .. } => {
                sigmoid(base_score + trees.iter().map(|t| t.predict(row)).sum::<f64>())
            }
        }
    }

    /// Signed margin (SVM) or probability of the toxic class (LR, GBT).
    pub fn decision_scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        self.decision_scores_with(x, ExecMode::Sequential)
    }

    pub fn decision_scores_with(&self, x: &Matrix, mode: ExecMode) -> Result<Vec<f64>> {
        self.check_width(x)?;
        Ok(par::map_indexed(mode, x.rows(), |i| self.score_row(x.row(i))))
    }

    pub fn threshold(&self) -> f64 {
        match self.config.kind {
            ModelKind::LinearSvm => 0.0,
            _ => 0.5,
        }
    }

    /// Toxic exactly where the score exceeds the threshold.
    pub fn label_for(&self, score: f64) -> Label {
        if score > self.threshold() {
            Label::Toxic
        } else {
            Label::NonToxic
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<Label>> {
        Ok(self
            .decision_scores(x)?
            .into_iter()
            .map(|s| self.label_for(s))
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(src)?;
        let version = v.get("format_version").and_then(|x| x.as_u64()).unwrap_or(0) as u32;
        if version != FORMAT_VERSION {
            return Err(Error::ModelVersion(version));
        }
        Ok(serde_json::from_value(v)?)
    }
}
