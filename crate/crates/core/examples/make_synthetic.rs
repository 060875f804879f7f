//! Writes a synthetic corpus and its embedding table, ready for the CLI:
//!
//! ```text
//! cargo run --example make_synthetic -- /tmp/synth 300
//! emoreg cv --data /tmp/synth/data.tsv --schema y0=-100..100 \
//!     --embeddings /tmp/synth/vectors.vec --models ridge_ngram,ridge_bv --out /tmp/synth/cv.csv
//! ```

use std::path::PathBuf;

use emoreg::embeddings::{write_fasttext_text, write_word2vec_bin};
use emoreg::synth::{linear_corpus, SynthConfig};

fn main() -> emoreg::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let n_docs = args.next().map_or(300, |s| s.parse().expect("document count"));
    std::fs::create_dir_all(&dir).map_err(|e| emoreg::Error::InvalidArgument(e.to_string()))?;

    let corpus = linear_corpus(&SynthConfig { n_docs, ..SynthConfig::default() })?;
    corpus.dataset.write_tsv(&dir.join("data.tsv"))?;
    write_fasttext_text(&corpus.table, &dir.join("vectors.vec"))?;
    write_word2vec_bin(&corpus.table, &dir.join("vectors.bin"))?;
    println!(
        "wrote {} documents, {} vectors of dim {} to {}",
        corpus.dataset.len(),
        corpus.table.vocab_len(),
        corpus.table.dim(),
        dir.display()
    );
    Ok(())
}
