//! Word-embedding tables and distributed dictionary representations.
//!
//! A dictionary is represented by the mean vector of its in-vocabulary words;
//! a document by the mean vector of its in-vocabulary word tokens (repeated
//! tokens count repeatedly). The loading of a dictionary on a document is the
//! cosine between the two.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lexicon::{Entry, Lexicon};
use crate::par::{self, ExecMode};
use crate::textprep::TokenStream;

/// The ten moral-foundation categories, in feature order.
pub const MORAL_CATEGORIES: [&str; 10] = [
    "care_virtue",
    "care_vice",
    "fairness_virtue",
    "fairness_vice",
    "ingroup_virtue",
    "ingroup_vice",
    "authority_virtue",
    "authority_vice",
    "purity_virtue",
    "purity_vice",
];

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    index: BTreeMap<String, usize>,
    data: Vec<f64>,
    fingerprint: String,
}

#[derive(Debug, Clone)]
pub struct EmbeddingLoad {
    pub table: EmbeddingTable,
    /// Words that appeared more than once; the last row won.
    pub duplicates: Vec<String>,
}

impl EmbeddingTable {
    pub fn from_vectors<I, S>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut index = BTreeMap::new();
        let mut data = Vec::new();
        let mut h = Sha256::new();
        for (word, v) in rows {
            let word = word.into();
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite embedding for `{word}`")));
            }
            h.update(word.as_bytes());
            for x in &v {
                h.update(x.to_bits().to_le_bytes());
            }
            insert_row(&mut index, &mut data, dim, word, &v);
        }
        Ok(EmbeddingTable {
            dim,
            index,
            data,
            fingerprint: hex::encode(h.finalize()),
        })
    }

    /// Parses the word2vec text format: a `count dim` header line followed by
    /// `word v1 ... vdim` rows.
    pub fn read_word2vec<R: BufRead>(reader: R, source_name: &str) -> Result<EmbeddingLoad> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| Error::io(source_name, e))?,
            None => return Err(Error::parse(source_name, 1, "empty file, expected `count dim` header")),
        };
        let mut hdr = header.split_whitespace();
        let (count, dim) = match (hdr.next(), hdr.next(), hdr.next()) {
            (Some(a), Some(b), None) => match (a.parse::<usize>(), b.parse::<usize>()) {
                (Ok(c), Ok(d)) if d > 0 => (c, d),
                _ => return Err(Error::parse(source_name, 1, format!("bad header `{header}`"))),
            },
            _ => return Err(Error::parse(source_name, 1, format!("bad header `{header}`"))),
        };
        let mut index = BTreeMap::new();
        let mut data = Vec::with_capacity(count.min(1 << 24) * dim);
        let mut duplicates = Vec::new();
        let mut rows = 0usize;
        let mut h = Sha256::new();
        h.update(header.as_bytes());
        let mut vec = Vec::with_capacity(dim);
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| Error::io(source_name, e))?;
            if line.trim().is_empty() {
                continue;
            }
            h.update(line.as_bytes());
            let mut parts = line.split_whitespace();
            let word = parts.next().expect("non-empty line has a first field");
            vec.clear();
            for p in parts {
                let x: f64 = p
                    .parse()
                    .map_err(|_| Error::parse(source_name, lineno, format!("bad coordinate `{p}`")))?;
                if !x.is_finite() {
                    return Err(Error::parse(source_name, lineno, "non-finite coordinate"));
                }
                vec.push(x);
            }
            if vec.len() != dim {
                return Err(Error::parse(
                    source_name,
                    lineno,
                    format!("`{word}` has {} coordinate(s), header declares {dim}", vec.len()),
                ));
            }
            if insert_row(&mut index, &mut data, dim, word.to_string(), &vec) {
                log::warn!("{source_name}:{lineno}: duplicate embedding for `{word}`, keeping the last one");
                duplicates.push(word.to_string());
            }
            rows += 1;
        }
        if rows != count {
            return Err(Error::parse(
                source_name,
                rows + 2,
                format!("header declares {count} row(s), found {rows}"),
            ));
        }
        Ok(EmbeddingLoad {
            table: EmbeddingTable {
                dim,
                index,
                data,
                fingerprint: hex::encode(h.finalize()),
            },
            duplicates,
        })
    }

    /// Loads a word2vec text file; `.gz` files (or gzip magic bytes) are
    /// decompressed transparently.
    pub fn load(path: &Path) -> Result<EmbeddingLoad> {
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut magic = [0u8; 2];
        let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        if n == 2 && magic == [0x1f, 0x8b] {
            Self::read_word2vec(BufReader::new(MultiGzDecoder::new(file)), &name)
        } else {
            Self::read_word2vec(BufReader::new(file), &name)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&r| &self.data[r * self.dim..(r + 1) * self.dim])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Vocabulary words starting with `prefix`, in lexicographic order.
    pub fn words_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.index
            .range::<str, _>((std::ops::Bound::Included(prefix), std::ops::Bound::Unbounded))
            .take_while(move |(w, _)| w.starts_with(prefix))
            .map(|(w, _)| w.as_str())
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

// Returns true when `word` was already present.
fn insert_row(index: &mut BTreeMap<String, usize>, data: &mut Vec<f64>, dim: usize, word: String, v: &[f64]) -> bool {
    match index.get(&word) {
        Some(&r) => {
            data[r * dim..(r + 1) * dim].copy_from_slice(v);
            true
        }
        None => {
            index.insert(word, data.len() / dim);
            data.extend_from_slice(v);
            false
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryVector {
    pub vector: Vec<f64>,
    pub in_vocab: usize,
    pub oov: usize,
}

/// Mean vector of the in-vocabulary words; duplicates count once.
pub fn dictionary_vector<S: AsRef<str>>(words: &[S], emb: &EmbeddingTable) -> Result<DictionaryVector> {
    let unique: BTreeSet<&str> = words.iter().map(AsRef::as_ref).collect();
    let (known, oov): (Vec<&str>, Vec<&str>) = unique.into_iter().partition(|w| emb.contains(w));
    mean_of(known.into_iter(), emb).map_or(Err(Error::EmptyDictionary { oov: oov.len() }), |(vector, n)| {
        Ok(DictionaryVector {
            vector,
            in_vocab: n,
            oov: oov.len(),
        })
    })
}

/// Like [`dictionary_vector`] but stem entries expand to every vocabulary
/// word sharing the prefix.
pub fn expand_entries(entries: &[Entry], emb: &EmbeddingTable) -> (Vec<String>, usize) {
    let mut words = BTreeSet::new();
    let mut missing = 0;
    for e in entries {
        match e {
            Entry::Literal(w) => {
                if emb.contains(w) {
                    words.insert(w.clone());
                } else {
                    missing += 1;
                }
            }
            Entry::Stem(s) => {
                let before = words.len();
                words.extend(emb.words_with_prefix(s).map(str::to_string));
                if words.len() == before && !emb.words_with_prefix(s).any(|_| true) {
                    missing += 1;
                }
            }
        }
    }
    (words.into_iter().collect(), missing)
}

fn mean_of<'a>(words: impl Iterator<Item = &'a str>, emb: &EmbeddingTable) -> Option<(Vec<f64>, usize)> {
    let mut sum = vec![0.0; emb.dim()];
    let mut n = 0usize;
    for w in words {
        if let Some(v) = emb.get(w) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n == 0 {
        return None;
    }
    for s in &mut sum {
        *s /= n as f64;
    }
    Some((sum, n))
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Mean vector of the document's in-vocabulary word tokens, if any.
pub fn document_vector(ts: &TokenStream, emb: &EmbeddingTable) -> Option<Vec<f64>> {
    mean_of(ts.words().map(|t| t.lower.as_str()), emb).map(|(v, _)| v)
}

pub fn loading(ts: &TokenStream, dict_vec: &[f64], emb: &EmbeddingTable) -> f64 {
    match document_vector(ts, emb) {
        Some(doc) => cosine(&doc, dict_vec),
        None => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoralLoadings(pub [f64; 10]);

impl MoralLoadings {
    pub fn get(&self, category: &str) -> Option<f64> {
        MORAL_CATEGORIES.iter().position(|c| *c == category).map(|i| self.0[i])
    }
}

/// Precomputed dictionary vectors for the ten moral categories over one
/// embedding table.
#[derive(Debug, Clone)]
pub struct MoralProjector {
    dictionaries: Vec<Option<Vec<f64>>>,
    pub warnings: Vec<String>,
    fingerprint: String,
}

impl MoralProjector {
    pub fn new(moral_lex: &Lexicon, emb: &EmbeddingTable) -> Result<Self> {
        let mut dictionaries = Vec::with_capacity(10);
        let mut warnings = Vec::new();
        for cat in MORAL_CATEGORIES {
            let entries = moral_lex.entries(cat).ok_or_else(|| Error::Lexicon {
                lexicon: moral_lex.name().to_string(),
                message: format!("missing moral category `{cat}`"),
            })?;
            let (words, _) = expand_entries(entries, emb);
            match dictionary_vector(&words, emb) {
                Ok(d) => dictionaries.push(Some(d.vector)),
                Err(Error::EmptyDictionary { .. }) => {
                    let msg = format!("moral category `{cat}` has no in-vocabulary words; its loading is fixed at 0");
                    log::warn!("{msg}");
                    warnings.push(msg);
                    dictionaries.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        let extra: Vec<&String> = moral_lex
            .categories()
            .keys()
            .filter(|k| !MORAL_CATEGORIES.contains(&k.as_str()))
            .collect();
        if !extra.is_empty() {
            return Err(Error::Lexicon {
                lexicon: moral_lex.name().to_string(),
                message: format!("unexpected moral categories {extra:?}"),
            });
        }
        let mut h = Sha256::new();
        h.update(moral_lex.fingerprint().as_bytes());
        h.update(emb.fingerprint().as_bytes());
        Ok(MoralProjector {
            dictionaries,
            warnings,
            fingerprint: hex::encode(h.finalize()),
        })
    }

    pub fn loadings(&self, ts: &TokenStream, emb: &EmbeddingTable) -> MoralLoadings {
        self.loadings_with(ts, emb, ExecMode::Sequential)
    }

    pub fn loadings_with(&self, ts: &TokenStream, emb: &EmbeddingTable, mode: ExecMode) -> MoralLoadings {
        let mut out = [0.0; 10];
        let Some(doc) = document_vector(ts, emb) else {
            return MoralLoadings(out);
        };
        let vals = par::map(mode, &self.dictionaries, |d| {
            d.as_ref().map_or(0.0, |d| cosine(&doc, d))
        });
        out.copy_from_slice(&vals);
        MoralLoadings(out)
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

pub fn moral_loadings(ts: &TokenStream, moral_lex: &Lexicon, emb: &EmbeddingTable) -> Result<MoralLoadings> {
    Ok(MoralProjector::new(moral_lex, emb)?.loadings(ts, emb))
}
