//! Per-document feature vectors and corpus feature matrices.
//!
//! Column order is fixed:
//!
//! | # | column | range |
//! |---|--------|-------|
//! | 0 | `politeness` | 0..1 |
//! | 1 | `perspective` | 0..1 |
//! | 2-5 | `analytic`, `clout`, `authentic`, `tone` | 1..99 |
//! | 6 | `swear` | 0..100 |
//! | 7 | `sentiment` | -1..1 |
//! | 8-17 | the ten moral loadings (`care_virtue` ... `purity_vice`) | -1..1 |
//!
//! The `baseline` set uses the first 2 columns, `baseline+psych` the first 8,
//! `baseline+psych+moral` all 18.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baseline::{BaselineProvider, ProviderMode};
use crate::corpus::{Corpus, Document, Label};
use crate::ddr::{EmbeddingTable, MoralProjector, MORAL_CATEGORIES};
use crate::error::{Error, Result};
use crate::lexicon::{category_percentages, summary_scores, Lexicon};
use crate::matrix::Matrix;
use crate::par::{self, ExecMode};
use crate::sentiment::{compound, ValenceLexicon};
use crate::textprep::tokenize;

pub const BASELINE_COLUMNS: [&str; 2] = ["politeness", "perspective"];
pub const PSYCH_COLUMNS: [&str; 6] = ["analytic", "clout", "authentic", "tone", "swear", "sentiment"];

/// Failing ids kept in a batch error.
const MAX_REPORTED_IDS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "baseline+psych")]
    BaselinePsych,
    #[serde(rename = "baseline+psych+moral")]
    BaselinePsychMoral,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [
        FeatureSet::Baseline,
        FeatureSet::BaselinePsych,
        FeatureSet::BaselinePsychMoral,
    ];

    pub fn width(self) -> usize {
        match self {
            FeatureSet::Baseline => 2,
            FeatureSet::BaselinePsych => 8,
            FeatureSet::BaselinePsychMoral => 18,
        }
    }

    pub fn columns(self) -> Vec<&'static str> {
        all_columns().into_iter().take(self.width()).collect()
    }

    pub fn uses_psych(self) -> bool {
        self != FeatureSet::Baseline
    }

    pub fn uses_moral(self) -> bool {
        self == FeatureSet::BaselinePsychMoral
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::Baseline => "baseline",
            FeatureSet::BaselinePsych => "baseline+psych",
            FeatureSet::BaselinePsychMoral => "baseline+psych+moral",
        }
    }
}

impl std::fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(FeatureSet::Baseline),
            "baseline+psych" | "baseline_psych" => Ok(FeatureSet::BaselinePsych),
            "baseline+psych+moral" | "baseline_psych_moral" => Ok(FeatureSet::BaselinePsychMoral),
            _ => Err(Error::InvalidArgument(format!(
                "unknown feature set `{s}` (expected baseline, baseline+psych or baseline+psych+moral)"
            ))),
        }
    }
}

pub fn all_columns() -> Vec<&'static str> {
    BASELINE_COLUMNS
        .iter()
        .chain(PSYCH_COLUMNS.iter())
        .chain(MORAL_CATEGORIES.iter())
        .copied()
        .collect()
}

/// Closed range each column's values fall in.
pub fn column_range(column: &str) -> Option<(f64, f64)> {
    match column {
        "politeness" | "perspective" => Some((0.0, 1.0)),
        "analytic" | "clout" | "authentic" | "tone" => Some((1.0, 99.0)),
        "swear" => Some((0.0, 100.0)),
        "sentiment" => Some((-1.0, 1.0)),
        c if MORAL_CATEGORIES.contains(&c) => Some((-1.0, 1.0)),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct MoralResources {
    pub embeddings: EmbeddingTable,
    pub projector: MoralProjector,
}

impl MoralResources {
    pub fn new(moral_lex: &Lexicon, embeddings: EmbeddingTable) -> Result<Self> {
        let projector = MoralProjector::new(moral_lex, &embeddings)?;
        Ok(MoralResources { embeddings, projector })
    }
}

/// Everything featurization reads besides the document itself.
#[derive(Debug)]
pub struct Resources {
    pub psych: Lexicon,
    pub valence: ValenceLexicon,
    pub moral: Option<MoralResources>,
    pub provider: BaselineProvider,
}

pub const PSYCH_FILE: &str = "psycholinguistic.json";
pub const MORAL_FILE: &str = "moral_foundations.json";
pub const VALENCE_FILE: &str = "vader_lexicon.txt";
pub const MODIFIERS_FILE: &str = "vader_modifiers.json";

/// Lexicons loaded from a directory; files that are absent fall back to the
/// bundled defaults.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub psych: Lexicon,
    pub moral: Lexicon,
    pub valence: ValenceLexicon,
}

impl Lexicons {
    pub fn bundled() -> Self {
        Lexicons {
            psych: Lexicon::default_psycholinguistic(),
            moral: Lexicon::default_moral(),
            valence: ValenceLexicon::default_vader(),
        }
    }

    pub fn from_dir(dir: Option<&Path>) -> Result<Self> {
        let mut out = Self::bundled();
        let Some(dir) = dir else { return Ok(out) };
        if !dir.is_dir() {
            return Err(Error::InvalidArgument(format!(
                "lexicon directory {} does not exist",
                dir.display()
            )));
        }
        let present = |name: &str| Some(dir.join(name)).filter(|p| p.is_file());
        if let Some(p) = present(PSYCH_FILE) {
            out.psych = Lexicon::load(&p)?;
        }
        if let Some(p) = present(MORAL_FILE) {
            out.moral = Lexicon::load(&p)?;
        }
        match (present(VALENCE_FILE), present(MODIFIERS_FILE)) {
            (Some(tsv), Some(json)) => out.valence = ValenceLexicon::load(&tsv, &json)?,
            (None, None) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{VALENCE_FILE} and {MODIFIERS_FILE} must be provided together"
                )))
            }
        }
        Ok(out)
    }
}

impl Resources {
    pub fn new(
        lexicons: Lexicons,
        embeddings: Option<EmbeddingTable>,
        mode: ProviderMode,
        client: Option<crate::baseline::PerspectiveClient>,
    ) -> Result<Self> {
        let moral = embeddings
            .map(|emb| MoralResources::new(&lexicons.moral, emb))
            .transpose()?;
        let provider = BaselineProvider::new(mode, client, lexicons.psych.clone());
        Ok(Resources {
            psych: lexicons.psych,
            valence: lexicons.valence,
            moral,
            provider,
        })
    }

    pub fn check(&self, set: FeatureSet) -> Result<()> {
        if set.uses_moral() && self.moral.is_none() {
            return Err(Error::InvalidArgument(format!(
                "feature set `{set}` needs word embeddings"
            )));
        }
        Ok(())
    }

    /// Hash of every resource `set` reads.
    pub fn fingerprint(&self, set: FeatureSet) -> String {
        let mut h = Sha256::new();
        h.update(set.as_str().as_bytes());
        h.update(self.provider.fingerprint().as_bytes());
        if set.uses_psych() {
            h.update(self.psych.fingerprint().as_bytes());
            h.update(self.valence.fingerprint().as_bytes());
        }
        if set.uses_moral() {
            if let Some(m) = &self.moral {
                h.update(m.projector.fingerprint().as_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

pub fn featurize(doc: &Document, set: FeatureSet, res: &Resources) -> Result<FeatureVector> {
    res.check(set)?;
    let ts = tokenize(&doc.text);
    let base = res.provider.scores(doc, &ts)?;
    let mut values = Vec::with_capacity(set.width());
    values.push(base.politeness);
    values.push(base.perspective_toxicity);
    if set.uses_psych() {
        let profile = category_percentages(&ts, &res.psych);
        let s = summary_scores(&profile).map_err(|e| Error::Document {
            id: doc.id.clone(),
            source: Box::new(e),
        })?;
        values.extend([
            s.analytic,
            s.clout,
            s.authentic,
            s.tone,
            s.swear,
            compound(&ts, &res.valence),
        ]);
    }
    if set.uses_moral() {
        let m = res.moral.as_ref().expect("checked above");
        values.extend(m.projector.loadings(&ts, &m.embeddings).0);
    }
    Ok(FeatureVector {
        values,
        label: doc.label,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub set: FeatureSet,
    pub ids: Vec<String>,
    pub x: Matrix,
    pub labels: Vec<Label>,
}

impl FeatureMatrix {
    pub fn columns(&self) -> Vec<&'static str> {
        self.set.columns()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// CSV with one column per feature plus `label`, rows in corpus order.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = self.columns();
        header.push("label");
        out.write_record(&header)?;
        for (row, label) in self.x.iter_rows().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.as_str().to_string());
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("<feature csv>", e))?;
        Ok(())
    }

    /// Reads a matrix written by [`FeatureMatrix::write_csv`]; `ids` supplies
    /// the row identities, which the CSV does not carry.
    pub fn read_csv<R: Read>(r: R, source_name: &str, set: FeatureSet, ids: Vec<String>) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let mut expected: Vec<String> = set.columns().iter().map(|c| c.to_string()).collect();
        expected.push("label".into());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != expected {
            return Err(Error::parse(
                source_name,
                1,
                format!("header {header:?} does not match {expected:?}"),
            ));
        }
        let w = set.width();
        let mut data = Vec::with_capacity(ids.len() * w);
        let mut labels = Vec::with_capacity(ids.len());
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            for field in rec.iter().take(w) {
                data.push(
                    field
                        .parse::<f64>()
                        .map_err(|_| Error::parse(source_name, line, format!("bad number `{field}`")))?,
                );
            }
            let label = rec.get(w).unwrap_or_default();
            labels.push(
                label
                    .parse()
                    .map_err(|_| Error::parse(source_name, line, format!("bad label `{label}`")))?,
            );
        }
        if labels.len() != ids.len() {
            return Err(Error::Misaligned(format!(
                "{source_name} has {} row(s), corpus has {}",
                labels.len(),
                ids.len()
            )));
        }
        Ok(FeatureMatrix {
            set,
            x: Matrix::new(ids.len(), w, data)?,
            ids,
            labels,
        })
    }
}

pub fn feature_matrix(corpus: &Corpus, set: FeatureSet, res: &Resources, mode: ExecMode) -> Result<FeatureMatrix> {
    let labels = corpus.labels()?;
    res.check(set)?;
    let results = par::map(mode, corpus.documents(), |d| featurize(d, set, res));
    let mut rows = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    let mut first = None;
    for (doc, r) in corpus.iter().zip(results) {
        match r {
            Ok(v) => rows.push(v.values),
            Err(e) => {
                failed.push(doc.id.clone());
                first.get_or_insert(e);
            }
        }
    }
    if let Some(first) = first {
        if failed.len() == 1 {
            return Err(first);
        }
        let count = failed.len();
        failed.truncate(MAX_REPORTED_IDS);
        return Err(Error::Batch {
            count,
            ids: failed,
            first: Box::new(first),
        });
    }
    Ok(FeatureMatrix {
        set,
        ids: corpus.iter().map(|d| d.id.clone()).collect(),
        x: Matrix::from_rows(set.width(), &rows)?,
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixManifest {
    pub key: String,
    pub corpus_hash: String,
    pub feature_set: FeatureSet,
    pub resources_hash: String,
    pub columns: Vec<String>,
    pub rows: usize,
}

pub fn cache_key(corpus_hash: &str, set: FeatureSet, res: &Resources) -> String {
    let mut h = Sha256::new();
    h.update(corpus_hash.as_bytes());
    h.update(res.fingerprint(set).as_bytes());
    hex::encode(h.finalize())
}

pub fn cache_paths(cache_dir: &Path, key: &str) -> (PathBuf, PathBuf) {
    let stem = format!("features-{}", &key[..16]);
    (
        cache_dir.join(format!("{stem}.csv")),
        cache_dir.join(format!("{stem}.json")),
    )
}

/// Returns the cached matrix when the manifest matches, otherwise computes it
/// and stores it.
pub fn cached_feature_matrix(
    corpus: &Corpus,
    set: FeatureSet,
    res: &Resources,
    cache_dir: Option<&Path>,
    mode: ExecMode,
) -> Result<FeatureMatrix> {
    let Some(dir) = cache_dir else {
        return feature_matrix(corpus, set, res, mode);
    };
    res.check(set)?;
    let corpus_hash = corpus.content_hash();
    let key = cache_key(&corpus_hash, set, res);
    let (csv_path, manifest_path) = cache_paths(dir, &key);
    if let Ok(src) = fs::read_to_string(&manifest_path) {
        let manifest: Option<MatrixManifest> = serde_json::from_str(&src).ok();
        if manifest.is_some_and(|m| m.key == key && m.rows == corpus.len()) {
            let file = File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
            let ids = corpus.iter().map(|d| d.id.clone()).collect();
            log::info!("feature matrix cache hit {}", csv_path.display());
            return FeatureMatrix::read_csv(file, &csv_path.display().to_string(), set, ids);
        }
    }
    let fm = feature_matrix(corpus, set, res, mode)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&csv_path, |w| fm.write_csv(w))?;
    let manifest = MatrixManifest {
        key,
        corpus_hash,
        feature_set: set,
        resources_hash: res.fingerprint(set),
        columns: set.columns().iter().map(|c| c.to_string()).collect(),
        rows: fm.len(),
    };
    write_atomic(&manifest_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        Ok(())
    })?;
    Ok(fm)
}

pub(crate) fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<&mut File>) -> Result<()>) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
