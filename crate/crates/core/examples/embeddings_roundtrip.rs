//! Writes a random table in both supported formats, reads each back and
//! reports the largest difference (zero for text, f32 rounding for binary).

use emoreg::embeddings::{self, random_table, EmbeddingFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let vocab: Vec<String> = (0..100).map(|i| format!("word{i}")).collect();
    let table = random_table(&vocab, 50, 7)?;

    for (format, file) in [(EmbeddingFormat::FastTextText, "t.vec"), (EmbeddingFormat::Word2VecBin, "t.bin")] {
        let path = dir.path().join(file);
        match format {
            EmbeddingFormat::FastTextText => embeddings::write_fasttext_text(&table, &path)?,
            EmbeddingFormat::Word2VecBin => embeddings::write_word2vec_bin(&table, &path)?,
        }
        let back = embeddings::load(&path, format, None)?;
        let diff = table.matrix().data().iter().zip(back.matrix().data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("{format:<9} {} tokens x {} dims, max |diff| = {diff:e}", back.vocab_len(), back.dim());
    }
    Ok(())
}
