//! Seeded synthetic corpora and embeddings for tests, benchmarks and demos.
//!
//! Toxic comments draw from insult and swear vocabulary, non-toxic ones from
//! review vocabulary, with a shared neutral pool so classes overlap.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::corpus::{rng, Channel, Corpus, Document, Label};
use crate::ddr::EmbeddingTable;
use crate::lexicon::{Entry, Lexicon};

const TOXIC: &[&str] = &[
    "stupid",
    "idiot",
    "crap",
    "damn",
    "hell",
    "useless",
    "garbage",
    "dumb",
    "pathetic",
    "hate",
    "shut",
    "ridiculous",
    "moron",
    "trash",
    "awful",
    "disgusting",
    "lazy",
    "incompetent",
    "worthless",
    "ugly",
];
const POLITE: &[&str] = &[
    "thanks",
    "please",
    "appreciate",
    "great",
    "nice",
    "maybe",
    "could",
    "suggest",
    "helpful",
    "welcome",
    "glad",
    "sorry",
    "agree",
    "fair",
    "kind",
    "careful",
];
const NEUTRAL: &[&str] = &[
    "the", "patch", "test", "build", "merge", "branch", "commit", "this", "function", "release", "issue", "fix",
    "docs", "review", "change", "code", "it", "we", "you", "is", "on", "in", "of", "and", "to", "error", "line",
];

fn sentence(r: &mut impl Rng, marked: &[&str], n_marked: usize, len: usize) -> String {
    let mut words: Vec<&str> = (0..len).map(|_| *NEUTRAL.choose(r).expect("non-empty")).collect();
    for _ in 0..n_marked {
        let pos = r.random_range(0..=words.len());
        words.insert(pos, marked.choose(r).expect("non-empty"));
    }
    let mut s = words.join(" ");
    if let Some(first) = s.get(0..1) {
        let upper = first.to_uppercase();
        s.replace_range(0..1, &upper);
    }
    s.push(if r.random_bool(0.2) { '!' } else { '.' });
    s
}

/// `n_toxic` toxic and `n_non_toxic` non-toxic labeled documents with
/// precomputed `politeness` and `perspective` scores. About `noise` of each
/// class borrow the other class's vocabulary.
pub fn corpus(n_toxic: usize, n_non_toxic: usize, noise: f64, seed: u64) -> Corpus {
    let mut r = rng(seed);
    let mut docs = Vec::with_capacity(n_toxic + n_non_toxic);
    let total = n_toxic + n_non_toxic;
    for i in 0..total {
        let toxic = i < n_toxic;
        let flipped = r.random_bool(noise.clamp(0.0, 1.0));
        let looks_toxic = toxic != flipped;
        let vocab = if looks_toxic { TOXIC } else { POLITE };
        let n_sent = r.random_range(1..4);
        let text: Vec<String> = (0..n_sent)
            .map(|_| {
                let len = r.random_range(3..12);
                let marked = r.random_range(1..3);
                let mut s = sentence(&mut r, vocab, marked, len);
                if looks_toxic && r.random_bool(0.15) {
                    s = s.to_uppercase();
                }
                s
            })
            .collect();
        let (pol_lo, tox_lo) = if looks_toxic { (0.05, 0.45) } else { (0.45, 0.0) };
        let label = if toxic { Label::Toxic } else { Label::NonToxic };
        let channel = if i % 2 == 0 {
            Channel::CodeReview
        } else {
            Channel::IssueComment
        };
        let doc = Document::new(format!("s{i:05}"), channel, text.join(" "), Some(label))
            .with_score("politeness", pol_lo + r.random_range(0.0..0.5))
            .with_score("perspective", tox_lo + r.random_range(0.0..0.55));
        docs.push(doc);
    }
    // Interleave the classes so corpus order carries no label signal.
    let mut order: Vec<usize> = (0..docs.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut r);
    let docs = order.into_iter().map(|i| docs[i].clone()).collect();
    Corpus::new(docs).expect("synthetic ids are unique")
}

/// Random `dim`-dimensional vectors for the synthetic vocabulary and every
/// literal entry of `moral`. Stems contribute their prefix as a word.
pub fn embeddings(moral: &Lexicon, dim: usize, seed: u64) -> EmbeddingTable {
    let mut r = rng(seed);
    let mut words: Vec<String> = TOXIC
        .iter()
        .chain(POLITE)
        .chain(NEUTRAL)
        .map(|w| w.to_string())
        .collect();
    for entries in moral.categories().values() {
        for e in entries {
            words.push(match e {
                Entry::Literal(w) | Entry::Stem(w) => w.clone(),
            });
        }
    }
    words.sort();
    words.dedup();
    let rows: Vec<(String, Vec<f64>)> = words
        .into_iter()
        .map(|w| {
            let v = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            (w, v)
        })
        .collect();
    EmbeddingTable::from_vectors(dim, rows).expect("finite vectors of the right width")
}

/// word2vec text rendering of a table.
pub fn word2vec_text(table: &EmbeddingTable, words: impl IntoIterator<Item = String>) -> String {
    let words: Vec<String> = words.into_iter().filter(|w| table.contains(w)).collect();
    let mut out = format!("{} {}\n", words.len(), table.dim());
    for w in words {
        out.push_str(&w);
        for x in table.get(&w).expect("filtered") {
            out.push(' ');
            out.push_str(&x.to_string());
        }
        out.push('\n');
    }
    out
}
