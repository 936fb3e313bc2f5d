//! Writes a synthetic labeled corpus and matching word2vec embeddings so the
//! CLI can be tried without the real datasets.
//!
//!     cargo run -p toxmoral --example synthetic -- demo/

use std::path::PathBuf;

use toxmoral::corpus::save_jsonl;
use toxmoral::lexicon::Lexicon;
use toxmoral::synth;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    std::fs::create_dir_all(&dir)?;

    // Same class sizes as the undersampled code-review set: 101 toxic, 303 not.
    let corpus = synth::corpus(101, 303, 0.15, 42);
    save_jsonl(&corpus, &dir.join("corpus.jsonl"))?;

    let table = synth::embeddings(&Lexicon::default_moral(), 50, 42);
    let words: Vec<String> = table.words_with_prefix("").map(str::to_string).collect();
    std::fs::write(dir.join("vectors.txt"), synth::word2vec_text(&table, words))?;

    println!(
        "wrote {} and {}",
        dir.join("corpus.jsonl").display(),
        dir.join("vectors.txt").display()
    );
    Ok(())
}
