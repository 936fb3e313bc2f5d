//! Word-category lexicons and the summary dimensions built on them.
//!
//! A lexicon maps category names to entries; an entry is either a literal
//! word or a stem ending in a single `*` that matches any word starting with
//! it. Category scores are percentages of word tokens, as LIWC reports them.
//!
//! The four summary dimensions are open proxies for LIWC's proprietary ones:
//!
//! | dimension | raw score |
//! |-----------|-----------|
//! | analytic  | 30 + article + preposition - personal_pronoun - impersonal_pronoun - aux_verb - conjunction - adverb - negation |
//! | clout     | 50 + we + you - i - negation |
//! | authentic | 50 + i + exclusive - negative_emotion - motion |
//! | tone      | 50 + positive_emotion - negative_emotion |
//!
//! Each raw score is squashed into `[1, 99]` by `1 + 98 * sigmoid((raw - 50) / 25)`.
//! Swear is the plain `swear` category percentage.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textprep::TokenStream;

pub const SQUASH_CENTER: f64 = 50.0;
pub const SQUASH_SCALE: f64 = 25.0;

/// Categories [`summary_scores`] reads.
pub const SUMMARY_CATEGORIES: [&str; 16] = [
    "articles",
    "prepositions",
    "personal_pronouns",
    "impersonal_pronouns",
    "aux_verbs",
    "conjunctions",
    "adverbs",
    "negations",
    "we",
    "you",
    "i",
    "exclusives",
    "negative_emotion",
    "positive_emotion",
    "motion",
    "swear",
];

const DEFAULT_PSYCH: &str = include_str!("../data/psycholinguistic.json");
const DEFAULT_MORAL: &str = include_str!("../data/moral_foundations.json");

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Entry {
    Literal(String),
    Stem(String),
}

impl Entry {
    pub fn parse(raw: &str) -> std::result::Result<Entry, String> {
        if raw.is_empty() {
            return Err("empty entry".into());
        }
        if raw != caseless::default_case_fold_str(raw) {
            return Err(format!("entry `{raw}` is not lowercase"));
        }
        match raw.find('*') {
            None => Ok(Entry::Literal(raw.to_string())),
            Some(pos) if pos == raw.len() - 1 && pos > 0 => Ok(Entry::Stem(raw[..pos].to_string())),
            Some(_) => Err(format!("entry `{raw}` must have a single trailing `*`")),
        }
    }

    pub fn matches(&self, lower: &str) -> bool {
        match self {
            Entry::Literal(w) => w == lower,
            Entry::Stem(s) => lower.starts_with(s.as_str()),
        }
    }

    pub fn to_raw(&self) -> String {
        match self {
            Entry::Literal(w) => w.clone(),
            Entry::Stem(s) => format!("{s}*"),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct CategoryMatcher {
    literals: HashSet<String>,
    stems: Vec<String>,
}

impl CategoryMatcher {
    fn matches(&self, lower: &str) -> bool {
        self.literals.contains(lower) || self.stems.iter().any(|s| lower.starts_with(s.as_str()))
    }
}

#[derive(Serialize, Deserialize)]
struct LexiconFile {
    name: String,
    categories: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Lexicon {
    name: String,
    categories: BTreeMap<String, Vec<Entry>>,
    matchers: BTreeMap<String, CategoryMatcher>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.categories == other.categories
    }
}

impl Lexicon {
    pub fn new(name: impl Into<String>, categories: BTreeMap<String, Vec<Entry>>) -> Self {
        let matchers = categories
            .iter()
            .map(|(cat, entries)| {
                let mut m = CategoryMatcher::default();
                for e in entries {
                    match e {
                        Entry::Literal(w) => {
                            m.literals.insert(w.clone());
                        }
                        Entry::Stem(s) => m.stems.push(s.clone()),
                    }
                }
                (cat.clone(), m)
            })
            .collect();
        Lexicon {
            name: name.into(),
            categories,
            matchers,
        }
    }

    pub fn from_json_str(src: &str) -> Result<Self> {
        let file: LexiconFile = serde_json::from_str(src)?;
        let mut categories = BTreeMap::new();
        for (cat, raw_entries) in file.categories {
            let entries = raw_entries
                .iter()
                .map(|r| Entry::parse(r))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|message| Error::Lexicon {
                    lexicon: file.name.clone(),
                    message: format!("category `{cat}`: {message}"),
                })?;
            categories.insert(cat, entries);
        }
        Ok(Lexicon::new(file.name, categories))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&src)
    }

    /// Open-source psycholinguistic category lists shipped with the crate.
    pub fn default_psycholinguistic() -> Self {
        Self::from_json_str(DEFAULT_PSYCH).expect("bundled psycholinguistic lexicon is valid")
    }

    /// Seed word lists for the ten moral-foundation categories shipped with
    /// the crate. Substitute a full moral foundations dictionary for real runs.
    pub fn default_moral() -> Self {
        Self::from_json_str(DEFAULT_MORAL).expect("bundled moral lexicon is valid")
    }

    pub fn to_json_string(&self) -> String {
        let file = LexiconFile {
            name: self.name.clone(),
            categories: self
                .categories
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(Entry::to_raw).collect()))
                .collect(),
        };
        serde_json::to_string(&file).expect("lexicon serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn categories(&self) -> &BTreeMap<String, Vec<Entry>> {
        &self.categories
    }

    pub fn entries(&self, category: &str) -> Option<&[Entry]> {
        self.categories.get(category).map(Vec::as_slice)
    }

    pub fn matches(&self, category: &str, lower: &str) -> bool {
        self.matchers.get(category).is_some_and(|m| m.matches(lower))
    }

    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json_string().as_bytes()))
    }
}

/// Category name to percentage of word tokens, each in `[0, 100]`.
pub type CategoryProfile = BTreeMap<String, f64>;

pub fn category_percentages(ts: &TokenStream, lex: &Lexicon) -> CategoryProfile {
    let mut hits: BTreeMap<&str, usize> = lex.matchers.keys().map(|k| (k.as_str(), 0)).collect();
    for tok in ts.words() {
        for (cat, m) in &lex.matchers {
            if m.matches(&tok.lower) {
                *hits.get_mut(cat.as_str()).expect("key present") += 1;
            }
        }
    }
    hits.into_iter()
        .map(|(cat, n)| {
            let pct = if ts.word_count == 0 {
                0.0
            } else {
                100.0 * n as f64 / ts.word_count as f64
            };
            (cat.to_string(), pct)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryScores {
    pub analytic: f64,
    pub clout: f64,
    pub authentic: f64,
    pub tone: f64,
    pub swear: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn squash(raw: f64) -> f64 {
    1.0 + 98.0 * sigmoid((raw - SQUASH_CENTER) / SQUASH_SCALE)
}

pub fn summary_scores(profile: &CategoryProfile) -> Result<SummaryScores> {
    let get = |name: &str| {
        profile.get(name).copied().ok_or_else(|| Error::Lexicon {
            lexicon: "profile".into(),
            message: format!("missing required category `{name}`"),
        })
    };
    let analytic = 30.0 + get("articles")? + get("prepositions")?
        - get("personal_pronouns")?
        - get("impersonal_pronouns")?
        - get("aux_verbs")?
        - get("conjunctions")?
        - get("adverbs")?
        - get("negations")?;
    let clout = 50.0 + get("we")? + get("you")? - get("i")? - get("negations")?;
    let authentic = 50.0 + get("i")? + get("exclusives")? - get("negative_emotion")? - get("motion")?;
    let tone = 50.0 + get("positive_emotion")? - get("negative_emotion")?;
    Ok(SummaryScores {
        analytic: squash(analytic),
        clout: squash(clout),
        authentic: squash(authentic),
        tone: squash(tone),
        swear: get("swear")?.clamp(0.0, 100.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::tokenize;
    use proptest::prelude::*;

    fn lex(cats: &[(&str, &[&str])]) -> Lexicon {
        let categories = cats
            .iter()
            .map(|(c, es)| (c.to_string(), es.iter().map(|e| Entry::parse(e).unwrap()).collect()))
            .collect();
        Lexicon::new("test", categories)
    }

    fn zero_profile() -> CategoryProfile {
        SUMMARY_CATEGORIES.iter().map(|c| (c.to_string(), 0.0)).collect()
    }

    #[test]
    fn swear_percentage() {
        let l = lex(&[("swear", &["stupid"])]);
        let p = category_percentages(&tokenize("You are stupid."), &l);
        assert!((p["swear"] - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_document_is_all_zero() {
        let l = Lexicon::default_psycholinguistic();
        let p = category_percentages(&tokenize(""), &l);
        assert!(p.values().all(|&v| v == 0.0));
        assert!(p.len() >= SUMMARY_CATEGORIES.len());
    }

    #[test]
    fn stem_matches_prefix() {
        let l = lex(&[("care_virtue", &["care*"])]);
        let p = category_percentages(&tokenize("careless"), &l);
        assert_eq!(p["care_virtue"], 100.0);
        let p = category_percentages(&tokenize("scare"), &l);
        assert_eq!(p["care_virtue"], 0.0);
    }

    #[test]
    fn entry_validation() {
        assert!(Entry::parse("").is_err());
        assert!(Entry::parse("Care").is_err());
        assert!(Entry::parse("ca*re").is_err());
        assert!(Entry::parse("care**").is_err());
        assert!(Entry::parse("*").is_err());
        assert_eq!(Entry::parse("care*").unwrap(), Entry::Stem("care".into()));
        let bad = r#"{"name":"x","categories":{"a":["Bad"]}}"#;
        assert!(matches!(Lexicon::from_json_str(bad), Err(Error::Lexicon { .. })));
    }

    #[test]
    fn json_round_trip() {
        let l = Lexicon::default_moral();
        let back = Lexicon::from_json_str(&l.to_json_string()).unwrap();
        assert_eq!(l, back);
        assert_eq!(l.fingerprint(), back.fingerprint());
    }

    #[test]
    fn zero_profile_summary() {
        let s = summary_scores(&zero_profile()).unwrap();
        // 1 + 98 * sigmoid(-0.8), evaluated independently.
        let expected = 1.0 + 98.0 / (1.0 + 0.8f64.exp());
        assert!((s.analytic - expected).abs() < 1e-12);
        assert!((s.analytic - 31.3825).abs() < 1e-4);
        assert_eq!(s.tone, 50.0);
        assert_eq!(s.clout, 50.0);
        assert_eq!(s.swear, 0.0);
    }

    #[test]
    fn balanced_tone_is_midpoint() {
        let mut p = zero_profile();
        p.insert("positive_emotion".into(), 12.5);
        p.insert("negative_emotion".into(), 12.5);
        assert_eq!(summary_scores(&p).unwrap().tone, 50.0);
    }

    #[test]
    fn swear_passes_through() {
        let mut p = zero_profile();
        p.insert("swear".into(), 6.3);
        assert_eq!(summary_scores(&p).unwrap().swear, 6.3);
    }

    #[test]
    fn missing_category_is_config_error() {
        let mut p = zero_profile();
        p.remove("motion");
        assert!(matches!(summary_scores(&p), Err(Error::Lexicon { .. })));
    }

    #[test]
    fn default_lexicon_has_summary_categories() {
        let l = Lexicon::default_psycholinguistic();
        for c in SUMMARY_CATEGORIES {
            assert!(l.entries(c).is_some_and(|e| !e.is_empty()), "missing {c}");
        }
    }

    proptest! {
        #[test]
        fn order_and_punctuation_invariant(words in proptest::collection::vec("(stupid|you|are|the|on|happy|sad|we|i|run)", 0..20), seed in any::<u64>()) {
            let l = Lexicon::default_psycholinguistic();
            let text = words.join(" ");
            let mut shuffled = words.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut crate::corpus::rng(seed));
            let noisy = shuffled.iter().map(|w| format!("{w} ,")).collect::<Vec<_>>().join(" ! ");
            let a = category_percentages(&tokenize(&text), &l);
            let b = category_percentages(&tokenize(&noisy), &l);
            for (k, v) in &a {
                prop_assert!((v - b[k]).abs() < 1e-9);
            }
        }

        #[test]
        fn adding_match_increases(words in proptest::collection::vec("(apple|table|code|merge)", 0..15)) {
            let l = lex(&[("swear", &["stupid"]), ("other", &["banana"])]);
            let before = category_percentages(&tokenize(&words.join(" ")), &l);
            let after = category_percentages(&tokenize(&format!("{} stupid", words.join(" "))), &l);
            prop_assert!(after["swear"] > before["swear"]);
        }

        #[test]
        fn summary_in_range(vals in proptest::collection::vec(0.0f64..100.0, 16)) {
            let p: CategoryProfile = SUMMARY_CATEGORIES.iter().zip(&vals).map(|(c, v)| (c.to_string(), *v)).collect();
            let s = summary_scores(&p).unwrap();
            for v in [s.analytic, s.clout, s.authentic, s.tone] {
                prop_assert!((1.0..=99.0).contains(&v));
            }
            prop_assert!((0.0..=100.0).contains(&s.swear));
        }
    }
}
