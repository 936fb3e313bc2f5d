//! Rule-based valence scoring with a VADER-style compound score.
//!
//! The score sums per-word valences after the adjustments below (each can be
//! switched off in [`SentimentConfig`]) and normalizes the sum `s` as
//! `s / sqrt(s^2 + alpha)`.
//!
//! * negation: a negation word up to three items before a hit multiplies the
//!   hit by `-0.74`
//! * boosters and dampeners: `+-0.293` toward the hit's sign, scaled by 0.95
//!   and 0.9 at distances two and three
//! * caps: an ALL-CAPS hit moves 0.733 further from zero, as does an ALL-CAPS
//!   booster
//! * exclamation: each `!`, up to three, adds 0.292 to `|s|`
//! * contrast: hits before the first `but` are halved, hits after it are
//!   scaled by 1.5

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textprep::{Token, TokenStream};

pub const NEGATION_SCALAR: f64 = -0.74;
pub const CAPS_INCREMENT: f64 = 0.733;
pub const EXCLAMATION_INCREMENT: f64 = 0.292;

const DEFAULT_LEXICON: &str = include_str!("../data/vader_lexicon.txt");
const DEFAULT_MODIFIERS: &str = include_str!("../data/vader_modifiers.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentConfig {
    pub negation: bool,
    pub boosters: bool,
    pub caps: bool,
    pub exclamation: bool,
    pub contrast: bool,
    pub max_exclamations: usize,
    pub alpha: f64,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        SentimentConfig {
            negation: true,
            boosters: true,
            caps: true,
            exclamation: true,
            contrast: true,
            max_exclamations: 3,
            alpha: 15.0,
        }
    }
}

impl SentimentConfig {
    /// Plain lexicon sum with no rule adjustments.
    pub fn plain() -> Self {
        SentimentConfig {
            negation: false,
            boosters: false,
            caps: false,
            exclamation: false,
            contrast: false,
            ..Default::default()
        }
    }
}

#[derive(Debug, Deserialize)]
struct ModifierFile {
    booster_increment: f64,
    boosters: Vec<String>,
    dampeners: Vec<String>,
    negations: Vec<String>,
    #[serde(default)]
    contrast_words: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValenceLexicon {
    valences: HashMap<String, f64>,
    /// Signed increments: positive for boosters, negative for dampeners.
    modifiers: HashMap<String, f64>,
    negations: HashSet<String>,
    contrast_words: HashSet<String>,
    pub config: SentimentConfig,
}

impl ValenceLexicon {
    pub fn new(valences: HashMap<String, f64>) -> Self {
        ValenceLexicon {
            valences,
            modifiers: HashMap::new(),
            negations: HashSet::new(),
            contrast_words: ["but".to_string()].into_iter().collect(),
            config: SentimentConfig::default(),
        }
    }

    /// Reads `word<TAB>valence` lines; further tab-separated columns are ignored.
    pub fn read_tsv<R: BufRead>(reader: R, source_name: &str) -> Result<HashMap<String, f64>> {
        let mut valences = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source_name, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let word = cols.next().unwrap_or_default();
            let value = cols
                .next()
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `word<TAB>valence`"))?;
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| Error::parse(source_name, i + 1, format!("bad valence `{value}`")))?;
            if !v.is_finite() || word.is_empty() {
                return Err(Error::parse(
                    source_name,
                    i + 1,
                    "valence must be finite and word non-empty",
                ));
            }
            valences.insert(word.to_string(), v);
        }
        Ok(valences)
    }

    pub fn with_modifiers_json(mut self, src: &str) -> Result<Self> {
        let m: ModifierFile = serde_json::from_str(src)?;
        if !m.booster_increment.is_finite() {
            return Err(Error::InvalidArgument("booster increment must be finite".into()));
        }
        self.modifiers = m
            .boosters
            .into_iter()
            .map(|w| (w, m.booster_increment))
            .chain(m.dampeners.into_iter().map(|w| (w, -m.booster_increment)))
            .collect();
        self.negations = m.negations.into_iter().collect();
        if !m.contrast_words.is_empty() {
            self.contrast_words = m.contrast_words.into_iter().collect();
        }
        Ok(self)
    }

    pub fn load(lexicon_tsv: &Path, modifiers_json: &Path) -> Result<Self> {
        let f = std::fs::File::open(lexicon_tsv).map_err(|e| Error::io(lexicon_tsv, e))?;
        let valences = Self::read_tsv(std::io::BufReader::new(f), &lexicon_tsv.display().to_string())?;
        let mods = std::fs::read_to_string(modifiers_json).map_err(|e| Error::io(modifiers_json, e))?;
        Self::new(valences).with_modifiers_json(&mods)
    }

    /// The public VADER word list and modifier sets bundled with the crate.
    pub fn default_vader() -> Self {
        let valences = Self::read_tsv(DEFAULT_LEXICON.as_bytes(), "vader_lexicon.txt").expect("bundled lexicon parses");
        Self::new(valences)
            .with_modifiers_json(DEFAULT_MODIFIERS)
            .expect("bundled modifiers parse")
    }

    pub fn with_config(mut self, config: SentimentConfig) -> Self {
        self.config = config;
        self
    }

    pub fn valence(&self, token: &Token) -> Option<f64> {
        self.valences
            .get(&token.lower)
            .or_else(|| self.valences.get(&token.surface))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }

    /// Same rules, every valence sign-flipped.
    pub fn mirrored(&self) -> Self {
        let mut m = self.clone();
        for v in m.valences.values_mut() {
            *v = -*v;
        }
        m
    }

    fn is_negation(&self, lower: &str) -> bool {
        self.negations.contains(lower) || lower.contains("n't")
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        let mut entries: Vec<_> = self.valences.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(b.0));
        for (w, v) in entries {
            h.update(w.as_bytes());
            h.update(v.to_bits().to_le_bytes());
        }
        let mut mods: Vec<_> = self.modifiers.iter().collect();
        mods.sort_by(|a, b| a.0.cmp(b.0));
        for (w, v) in mods {
            h.update(w.as_bytes());
            h.update(v.to_bits().to_le_bytes());
        }
        let mut negs: Vec<_> = self.negations.iter().collect();
        negs.sort();
        for w in negs {
            h.update(w.as_bytes());
        }
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        hex::encode(h.finalize())
    }
}

pub fn normalize(sum: f64, alpha: f64) -> f64 {
    (sum / (sum * sum + alpha).sqrt()).clamp(-1.0, 1.0)
}

fn toward_sign(increment: f64, valence: f64) -> f64 {
    if valence > 0.0 {
        increment
    } else {
        -increment
    }
}

/// Raw adjusted valence sum before normalization.
pub fn valence_sum(ts: &TokenStream, vl: &ValenceLexicon) -> f64 {
    let cfg = &vl.config;
    let items: Vec<&Token> = ts
        .tokens
        .iter()
        .filter(|t| t.is_word || (!t.is_code() && !t.is_url() && vl.valence(t).is_some()))
        .collect();
    let mut sentiments = vec![0.0; items.len()];
    for (i, tok) in items.iter().enumerate() {
        let Some(base) = vl.valence(tok) else { continue };
        if base == 0.0 || vl.modifiers.contains_key(&tok.lower) {
            continue;
        }
        let mut v = base;
        if cfg.caps && tok.is_all_caps {
            v += toward_sign(CAPS_INCREMENT, v);
        }
        for dist in 0..3 {
            if i <= dist {
                break;
            }
            let prev = items[i - dist - 1];
            if vl.valence(prev).is_some() {
                continue;
            }
            if cfg.boosters {
                if let Some(&inc) = vl.modifiers.get(&prev.lower) {
                    let mut s = if v < 0.0 { -inc } else { inc };
                    if cfg.caps && prev.is_all_caps {
                        s += toward_sign(CAPS_INCREMENT, v);
                    }
                    s *= [1.0, 0.95, 0.9][dist];
                    v += s;
                }
            }
            if cfg.negation && vl.is_negation(&prev.lower) {
                v *= NEGATION_SCALAR;
            }
        }
        sentiments[i] = v;
    }

    if cfg.contrast {
        if let Some(bi) = items.iter().position(|t| vl.contrast_words.contains(&t.lower)) {
            for (si, s) in sentiments.iter_mut().enumerate() {
                if si < bi {
                    *s *= 0.5;
                } else if si > bi {
                    *s *= 1.5;
                }
            }
        }
    }

    let mut sum: f64 = sentiments.iter().sum();
    if cfg.exclamation && sum != 0.0 {
        let bangs: usize = ts
            .tokens
            .iter()
            .filter(|t| !t.is_code() && !t.is_url())
            .map(|t| t.surface.matches('!').count())
            .sum();
        let amp = bangs.min(cfg.max_exclamations) as f64 * EXCLAMATION_INCREMENT;
        sum += toward_sign(amp, sum);
    }
    sum
}

/// Compound sentiment in `[-1, 1]`; 0 when nothing in the text hits the lexicon.
pub fn compound(ts: &TokenStream, vl: &ValenceLexicon) -> f64 {
    normalize(valence_sum(ts, vl), vl.config.alpha)
}
