//! Labeled comment corpora: loading, undersampling, fold plans and held-out
//! test sets.
//!
//! All sampling uses ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`), a
//! portable counter-mode generator, so a given `(input, seed)` pair selects
//! the same documents on every platform.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonToxic,
    Toxic,
}

impl Label {
    pub fn is_toxic(self) -> bool {
        self == Label::Toxic
    }

    /// Class index as used in metric tables: 0 = non-toxic, 1 = toxic.
    pub fn class_index(self) -> usize {
        match self {
            Label::NonToxic => 0,
            Label::Toxic => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::NonToxic => "non_toxic",
            Label::Toxic => "toxic",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "toxic" | "1" => Ok(Label::Toxic),
            "non_toxic" | "0" => Ok(Label::NonToxic),
            other => Err(Error::InvalidArgument(format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    IssueComment,
    CodeReview,
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "issue_comment" => Ok(Channel::IssueComment),
            "code_review" => Ok(Channel::CodeReview),
            other => Err(Error::InvalidArgument(format!("unknown channel `{other}`"))),
        }
    }
}

/// One developer comment.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub channel: Channel,
    pub text: String,
    pub label: Option<Label>,
    /// Scores shipped with the dataset (`politeness`, `perspective`, ...) plus
    /// any other numeric fields the loader did not recognize.
    pub precomputed: BTreeMap<String, f64>,
    /// Unrecognized non-numeric fields, kept so a load/write cycle loses nothing.
    pub extra: BTreeMap<String, Value>,
}

impl Document {
    pub fn new(id: impl Into<String>, channel: Channel, text: impl Into<String>, label: Option<Label>) -> Self {
        Document {
            id: id.into(),
            channel,
            text: text.into(),
            label,
            precomputed: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn with_score(mut self, name: &str, value: f64) -> Self {
        self.precomputed.insert(name.to_string(), value);
        self
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClassCounts {
    pub toxic: usize,
    pub non_toxic: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.toxic + self.non_toxic
    }
}

/// An ordered, id-unique collection of documents.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(documents.len());
        for d in &documents {
            if !seen.insert(d.id.as_str()) {
                return Err(Error::DuplicateId(d.id.clone()));
            }
        }
        Ok(Corpus { documents })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    /// Labeled-document counts; unlabeled documents are not counted.
    pub fn counts(&self) -> ClassCounts {
        let mut c = ClassCounts::default();
        for d in &self.documents {
            match d.label {
                Some(Label::Toxic) => c.toxic += 1,
                Some(Label::NonToxic) => c.non_toxic += 1,
                None => {}
            }
        }
        c
    }

    /// Labels in corpus order, failing on the first unlabeled document.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.documents
            .iter()
            .map(|d| d.label.ok_or_else(|| Error::MissingLabel(d.id.clone())))
            .collect()
    }

    pub fn require_labeled(&self) -> Result<()> {
        self.labels().map(|_| ())
    }

    fn subset(&self, keep: &[bool]) -> Corpus {
        let documents = self
            .documents
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(d, _)| d.clone())
            .collect();
        Corpus { documents }
    }

    /// SHA-256 over the canonical JSONL serialization.
    pub fn content_hash(&self) -> String {
        let mut buf = Vec::new();
        write_jsonl(self, &mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }
}

// ---------------------------------------------------------------------------
// Loading and writing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// `.csv` selects CSV; everything else is treated as line-delimited JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

/// Whether unlabeled documents are acceptable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelPolicy {
    /// Training and evaluation corpora: a missing label is a load error.
    Required,
    Optional,
}

pub fn load_corpus(path: &Path, format: CorpusFormat, policy: LabelPolicy) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    match format {
        CorpusFormat::Jsonl => read_jsonl(BufReader::new(file), &name, policy),
        CorpusFormat::Csv => read_csv(file, &name, policy),
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<Value>,
    channel: Option<String>,
    text: Option<String>,
    label: Option<String>,
    scores: Option<BTreeMap<String, Option<f64>>>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

pub fn read_jsonl<R: BufRead>(reader: R, source_name: &str, policy: LabelPolicy) -> Result<Corpus> {
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(source_name, lineno, e.to_string()))?;
        let id = match raw.id {
            Some(Value::String(s)) => s,
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(Error::parse(source_name, lineno, "record is missing string field `id`")),
        };
        let perr = |msg: String| Error::parse(source_name, lineno, format!("record `{id}`: {msg}"));
        let text = raw.text.ok_or_else(|| perr("missing field `text`".into()))?;
        let channel = raw
            .channel
            .ok_or_else(|| perr("missing field `channel`".into()))?
            .parse::<Channel>()
            .map_err(|e| perr(e.to_string()))?;
        let label = match raw.label.as_deref() {
            None | Some("") => None,
            Some(s) => Some(s.parse::<Label>().map_err(|e| perr(e.to_string()))?),
        };
        if label.is_none() && policy == LabelPolicy::Required {
            return Err(perr("missing label".into()));
        }
        let mut doc = Document::new(id, channel, text, label);
        for (k, v) in raw.scores.unwrap_or_default() {
            if let Some(v) = v {
                doc.precomputed.insert(k, v);
            }
        }
        for (k, v) in raw.extra {
            match v.as_f64() {
                Some(x) if v.is_number() => {
                    doc.precomputed.insert(k, x);
                }
                _ => {
                    doc.extra.insert(k, v);
                }
            }
        }
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId(doc.id));
        }
        documents.push(doc);
    }
    Ok(Corpus { documents })
}

pub fn read_csv<R: Read>(reader: R, source_name: &str, policy: LabelPolicy) -> Result<Corpus> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (id_col, text_col) = match (col("id"), col("text")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::parse(source_name, 1, "header must name `id` and `text` columns")),
    };
    let channel_col = col("channel");
    let label_col = col("label");
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let lineno = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let id = record.get(id_col).unwrap_or_default().to_string();
        let perr = |msg: String| Error::parse(source_name, lineno, format!("record `{id}`: {msg}"));
        if id.is_empty() {
            return Err(perr("empty `id`".into()));
        }
        let text = record
            .get(text_col)
            .ok_or_else(|| perr("missing field `text`".into()))?;
        let channel = match channel_col.and_then(|c| record.get(c)) {
            Some(s) => s.parse::<Channel>().map_err(|e| perr(e.to_string()))?,
            None => return Err(perr("missing field `channel`".into())),
        };
        let label = match label_col.and_then(|c| record.get(c)) {
            None | Some("") | Some("null") => None,
            Some(s) => Some(s.parse::<Label>().map_err(|e| perr(e.to_string()))?),
        };
        if label.is_none() && policy == LabelPolicy::Required {
            return Err(perr("missing label".into()));
        }
        let mut doc = Document::new(id.clone(), channel, text, label);
        for (i, name) in headers.iter().enumerate() {
            if i == id_col || i == text_col || Some(i) == channel_col || Some(i) == label_col {
                continue;
            }
            let cell = record.get(i).unwrap_or_default();
            if cell.is_empty() {
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) => {
                    doc.precomputed.insert(name.to_string(), v);
                }
                Err(_) => {
                    doc.extra.insert(name.to_string(), Value::String(cell.to_string()));
                }
            }
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        documents.push(doc);
    }
    Ok(Corpus { documents })
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    channel: Channel,
    text: &'a str,
    label: Option<Label>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    scores: &'a BTreeMap<String, f64>,
    #[serde(flatten)]
    extra: &'a BTreeMap<String, Value>,
}

pub fn write_jsonl<W: Write>(corpus: &Corpus, mut w: W) -> std::io::Result<()> {
    for d in &corpus.documents {
        let rec = OutRecord {
            id: &d.id,
            channel: d.channel,
            text: &d.text,
            label: d.label,
            scores: &d.precomputed,
            extra: &d.extra,
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_jsonl(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_jsonl(corpus, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn class_indices(labels: &[Label]) -> (Vec<usize>, Vec<usize>) {
    let mut toxic = Vec::new();
    let mut non_toxic = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Label::Toxic => toxic.push(i),
            Label::NonToxic => non_toxic.push(i),
        }
    }
    (toxic, non_toxic)
}

/// Keeps every toxic document and a uniform sample of
/// `min(ratio * n_toxic, n_non_toxic)` non-toxic ones. Output preserves the
/// input order.
pub fn undersample(corpus: &Corpus, ratio: usize, seed: u64) -> Result<Corpus> {
    if ratio == 0 {
        return Err(Error::InvalidArgument("ratio must be positive".into()));
    }
    let labels = corpus.labels()?;
    let (toxic, mut non_toxic) = class_indices(&labels);
    if toxic.is_empty() {
        return Err(Error::EmptyMinority);
    }
    let target = (ratio.saturating_mul(toxic.len())).min(non_toxic.len());
    non_toxic.shuffle(&mut rng(seed));
    let mut keep = vec![false; corpus.len()];
    for &i in toxic.iter().chain(&non_toxic[..target]) {
        keep[i] = true;
    }
    Ok(corpus.subset(&keep))
}

/// Assignment of every labeled document to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub assignment: BTreeMap<String, usize>,
}

impl FoldPlan {
    /// Fold index of each document, in corpus order.
    pub fn fold_of_each(&self, corpus: &Corpus) -> Result<Vec<usize>> {
        corpus
            .iter()
            .map(|d| {
                self.assignment
                    .get(&d.id)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("document `{}` is not in the fold plan", d.id)))
            })
            .collect()
    }
}

/// Stratified fold indices over a label vector: each class is shuffled on its
/// own and dealt round-robin, the non-toxic deal continuing where the toxic
/// deal stopped so that total fold sizes also stay within one of each other.
pub fn stratified_assignment(labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be at least 2, got {k}")));
    }
    let (mut toxic, mut non_toxic) = class_indices(labels);
    for (class, members) in [("toxic", &toxic), ("non_toxic", &non_toxic)] {
        if members.len() < k {
            return Err(Error::InsufficientClass {
                class,
                available: members.len(),
                required: k,
            });
        }
    }
    let mut r = rng(seed);
    toxic.shuffle(&mut r);
    non_toxic.shuffle(&mut r);
    let mut folds = vec![0usize; labels.len()];
    for (pos, &i) in toxic.iter().chain(&non_toxic).enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

pub fn stratified_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldPlan> {
    let labels = corpus.labels()?;
    let folds = stratified_assignment(&labels, k, seed)?;
    let assignment = corpus.iter().zip(folds).map(|(d, f)| (d.id.clone(), f)).collect();
    Ok(FoldPlan { k, assignment })
}

/// Keeps documents whose text is at most `max_chars` Unicode scalar values long.
pub fn build_issue_testset(threads: &Corpus, max_chars: usize) -> Result<Corpus> {
    threads.require_labeled()?;
    let keep: Vec<bool> = threads.iter().map(|d| d.char_len() <= max_chars).collect();
    Ok(threads.subset(&keep))
}

/// Draws `n_per_class` documents of each class into a test set; everything
/// else lands in `rest`. Both outputs keep corpus order.
pub fn sample_review_testset(corpus: &Corpus, n_per_class: usize, seed: u64) -> Result<(Corpus, Corpus)> {
    let labels = corpus.labels()?;
    let (mut toxic, mut non_toxic) = class_indices(&labels);
    for (class, members) in [("toxic", &toxic), ("non_toxic", &non_toxic)] {
        if members.len() < n_per_class {
            return Err(Error::InsufficientClass {
                class,
                available: members.len(),
                required: n_per_class,
            });
        }
    }
    let mut r = rng(seed);
    toxic.shuffle(&mut r);
    non_toxic.shuffle(&mut r);
    let mut in_test = vec![false; corpus.len()];
    for &i in toxic[..n_per_class].iter().chain(&non_toxic[..n_per_class]) {
        in_test[i] = true;
    }
    let rest: Vec<bool> = in_test.iter().map(|t| !t).collect();
    Ok((corpus.subset(&in_test), corpus.subset(&rest)))
}
