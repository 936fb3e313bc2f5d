//! Tokenization shared by every lexicon-based extractor.
//!
//! Rules, applied in order:
//! 1. Fenced code blocks (```` ``` ... ``` ````, unterminated fences run to the
//!    end of the text) and inline backtick spans become a single code token.
//! 2. The remaining text is split on whitespace.
//! 3. Each chunk that is a URL (`http://`, `https://`, `www.`) becomes a single
//!    URL token after its surrounding punctuation is peeled off.
//! 4. Leading and trailing punctuation runs are split off as their own tokens;
//!    a chunk that is punctuation only (e.g. `:)` or `!!!`) stays whole.
//!    Inner punctuation is kept, so contractions such as `don't` are one token.
//!
//! A token is a word when it contains at least one alphabetic character and is
//! neither a code nor a URL token. Lowercase forms use full Unicode case
//! folding.

use std::sync::OnceLock;

use regex::Regex;

pub const CODE_TOKEN: &str = "<code>";
pub const URL_TOKEN: &str = "<url>";

// Private-use sentinel so real text never collides with it.
const CODE_SENTINEL: &str = "\u{E000}";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub lower: String,
    pub is_word: bool,
    pub is_all_caps: bool,
}

impl Token {
    fn word_or_punct(surface: &str) -> Token {
        let is_word = surface.chars().any(char::is_alphabetic);
        Token {
            surface: surface.to_string(),
            lower: caseless::default_case_fold_str(surface),
            is_word,
            is_all_caps: is_all_caps(surface),
        }
    }

    fn special(surface: &str) -> Token {
        Token {
            surface: surface.to_string(),
            lower: surface.to_string(),
            is_word: false,
            is_all_caps: false,
        }
    }

    pub fn is_code(&self) -> bool {
        !self.is_word && self.surface == CODE_TOKEN
    }

    pub fn is_url(&self) -> bool {
        !self.is_word && self.surface == URL_TOKEN
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenStream {
    pub tokens: Vec<Token>,
    pub word_count: usize,
}

impl TokenStream {
    pub fn words(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.is_word)
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn is_all_caps(s: &str) -> bool {
    let mut letters = 0;
    for c in s.chars().filter(|c| c.is_alphabetic()) {
        if !c.is_uppercase() {
            return false;
        }
        letters += 1;
    }
    letters >= 2
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2010}'..='\u{2027}' | '\u{2030}'..='\u{205E}' | '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}'
                | '\u{00B7}' | '\u{00BB}' | '\u{00BF}' | '\u{3001}'..='\u{3003}' | '\u{FF01}'..='\u{FF0F}'
        )
}

fn code_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```.*?(?:```|\z)|`[^`\n]+`").expect("valid regex"))
}

fn looks_like_url(s: &str) -> bool {
    let lower = s.to_ascii_lowercase();
    (lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")) && s.len() > 7
}

pub fn tokenize(text: &str) -> TokenStream {
    let replaced = code_regex().replace_all(text, |_: &regex::Captures| format!(" {CODE_SENTINEL} "));
    let mut tokens = Vec::new();
    for chunk in replaced.split_whitespace() {
        if chunk == CODE_SENTINEL {
            tokens.push(Token::special(CODE_TOKEN));
            continue;
        }
        push_chunk(chunk, &mut tokens);
    }
    let word_count = tokens.iter().filter(|t| t.is_word).count();
    TokenStream { tokens, word_count }
}

fn push_chunk(chunk: &str, out: &mut Vec<Token>) {
    let start = chunk.char_indices().find(|&(_, c)| !is_punct(c)).map(|(i, _)| i);
    let Some(start) = start else {
        out.push(Token::word_or_punct(chunk));
        return;
    };
    let end = chunk
        .char_indices()
        .rev()
        .find(|&(_, c)| !is_punct(c))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(chunk.len());
    let (lead, core, trail) = (&chunk[..start], &chunk[start..end], &chunk[end..]);

    if looks_like_url(core) {
        if !lead.is_empty() {
            out.push(Token::word_or_punct(lead));
        }
        out.push(Token::special(URL_TOKEN));
        if !trail.is_empty() {
            out.push(Token::word_or_punct(trail));
        }
        return;
    }
    if !lead.is_empty() {
        out.push(Token::word_or_punct(lead));
    }
    out.push(Token::word_or_punct(core));
    if !trail.is_empty() {
        out.push(Token::word_or_punct(trail));
    }
}
