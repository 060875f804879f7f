//! Word-embedding tables and the two on-disk formats they arrive in.
//!
//! * word2vec binary: an ASCII header `"<vocab> <dim>\n"`, then per entry the
//!   token bytes up to a single space followed by `dim` little-endian `f32`
//!   values and an optional `'\n'`.
//! * FastText `.vec` text: a header line `"<n> <d>"`, then exactly `n` lines of
//!   `token v1 ... vd`.
//!
//! Row 0 of every table is reserved for padding and out-of-vocabulary tokens
//! and is always zero.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingSource {
    Word2VecBin,
    FastTextText,
    Random,
    Memory,
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingSource::Word2VecBin => "word2vec-bin",
            EmbeddingSource::FastTextText => "fasttext-text",
            EmbeddingSource::Random => "random",
            EmbeddingSource::Memory => "memory",
        })
    }
}

/// On-disk format selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Word2VecBin,
    FastTextText,
}

impl FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word2vec" | "word2vec-bin" | "bin" => Ok(EmbeddingFormat::Word2VecBin),
            "fasttext" | "fasttext-text" | "vec" | "text" => Ok(EmbeddingFormat::FastTextText),
            other => Err(Error::invalid(format!(
                "unknown embedding format `{other}` (expected word2vec or fasttext)"
            ))),
        }
    }
}

impl fmt::Display for EmbeddingFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingFormat::Word2VecBin => "word2vec",
            EmbeddingFormat::FastTextText => "fasttext",
        })
    }
}

#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    dim: usize,
    vocab: HashMap<String, usize>,
    /// Token of every row; row 0 is the empty pad token.
    tokens: Vec<String>,
    matrix: Tensor,
    source: EmbeddingSource,
}

impl PartialEq for EmbeddingTable {
    /// Tables are equal when they map the same tokens to the same vectors in
    /// the same row order; the source tag is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.tokens == other.tokens
            && self.matrix.data() == other.matrix.data()
    }
}

impl EmbeddingTable {
    pub const PAD: usize = 0;

    fn empty(dim: usize, source: EmbeddingSource) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        Ok(Self {
            dim,
            vocab: HashMap::new(),
            tokens: vec![String::new()],
            matrix: Tensor::zeros(&[1, dim]),
            source,
        })
    }

    /// Builds a table from `(token, vector)` pairs; later duplicates are
    /// dropped.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, Vec<f64>)>,
        dim: usize,
    ) -> Result<Self> {
        let mut builder = Builder::new(dim, EmbeddingSource::Memory)?;
        for (tok, v) in entries {
            if v.len() != dim {
                return Err(Error::Shape {
                    op: "embedding row",
                    left: vec![dim],
                    right: vec![v.len()],
                });
            }
            builder.push(tok, v);
        }
        Ok(builder.finish())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of real tokens (excluding the reserved row).
    pub fn vocab_len(&self) -> usize {
        self.tokens.len() - 1
    }

    /// Number of matrix rows including the reserved row.
    pub fn n_rows(&self) -> usize {
        self.tokens.len()
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.vocab.get(token).copied()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.matrix.row(id)
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.id(token).map(|i| self.row(i))
    }

    /// Tokens in row order, excluding the reserved row.
    pub fn tokens(&self) -> &[String] {
        &self.tokens[1..]
    }

    /// The `[rows × dim]` matrix, reserved row included.
    pub fn matrix(&self) -> &Tensor {
        &self.matrix
    }

    /// Replaces every vector, keeping the vocabulary. Row 0 is forced to zero.
    pub fn with_matrix(&self, matrix: Tensor) -> Result<Self> {
        if matrix.shape() != self.matrix.shape() {
            return Err(Error::Shape {
                op: "with_matrix",
                left: self.matrix.shape().to_vec(),
                right: matrix.shape().to_vec(),
            });
        }
        let mut out = self.clone();
        out.matrix = matrix;
        out.matrix.requires_grad = false;
        out.matrix.zero_grad();
        out.matrix.data_mut()[..self.dim].fill(0.0);
        Ok(out)
    }
}

struct Builder {
    table: EmbeddingTable,
    data: Vec<f64>,
}

impl Builder {
    fn new(dim: usize, source: EmbeddingSource) -> Result<Self> {
        Ok(Self {
            table: EmbeddingTable::empty(dim, source)?,
            data: vec![0.0; dim],
        })
    }

    /// Returns false when the token was already present.
    fn push(&mut self, token: String, v: Vec<f64>) -> bool {
        if self.table.vocab.contains_key(&token) {
            return false;
        }
        self.table.vocab.insert(token.clone(), self.table.tokens.len());
        self.table.tokens.push(token);
        self.data.extend(v);
        true
    }

    fn finish(mut self) -> EmbeddingTable {
        let rows = self.table.tokens.len();
        self.table.matrix =
            Tensor::matrix(rows, self.table.dim, self.data).expect("rows match tokens");
        self.table
    }
}

fn keep(filter: Option<&HashSet<String>>, token: &str) -> bool {
    filter.is_none_or(|f| f.contains(token))
}

/// Loads a word2vec binary file. With `filter`, only tokens in the set are
/// kept (the rest of the file is still validated).
pub fn load_word2vec_bin(path: &Path, filter: Option<&HashSet<String>>) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word2vec_bin(BufReader::new(file), &path.display().to_string(), filter)
}

pub fn read_word2vec_bin<R: BufRead>(
    mut r: R,
    name: &str,
    filter: Option<&HashSet<String>>,
) -> Result<EmbeddingTable> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: name.to_string(),
        line,
        msg,
    };
    let mut header = Vec::new();
    r.read_until(b'\n', &mut header)
        .map_err(|e| Error::io(name, e))?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| perr(1, "header is not ASCII".into()))?;
    let (n, dim) = parse_header(header).ok_or_else(|| {
        perr(1, format!("malformed header `{}`, expected `<vocab> <dim>`", header.trim_end()))
    })?;
    let mut builder = Builder::new(dim, EmbeddingSource::Word2VecBin)?;
    let mut token = Vec::new();
    let mut payload = vec![0u8; 4 * dim];
    for entry in 0..n {
        token.clear();
        r.read_until(b' ', &mut token)
            .map_err(|e| Error::io(name, e))?;
        if token.last() != Some(&b' ') {
            return Err(perr(
                entry + 2,
                format!("truncated file: entry {} of {n} has no token", entry + 1),
            ));
        }
        token.pop();
        // tolerate writers that put the newline before the token
        let start = token.iter().take_while(|&&b| b == b'\n').count();
        let tok = String::from_utf8_lossy(&token[start..]).into_owned();
        r.read_exact(&mut payload).map_err(|_| {
            perr(
                entry + 2,
                format!("truncated vector payload for `{tok}` (entry {})", entry + 1),
            )
        })?;
        let buf = r.fill_buf().map_err(|e| Error::io(name, e))?;
        if buf.first() == Some(&b'\n') {
            r.consume(1);
        }
        if !keep(filter, &tok) {
            continue;
        }
        let v = payload
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        if !builder.push(tok.clone(), v) {
            warn!("{name}: duplicate token `{tok}` at entry {}, keeping the first", entry + 1);
        }
    }
    let mut table = builder.finish();
    table.source = EmbeddingSource::Word2VecBin;
    Ok(table)
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut it = line.split_ascii_whitespace();
    let n = it.next()?.parse().ok()?;
    let d = it.next()?.parse().ok()?;
    if it.next().is_some() {
        return None;
    }
    Some((n, d))
}

/// Writes the table (reserved row excluded) in word2vec binary format.
/// Values are narrowed to `f32`.
pub fn write_word2vec_bin(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", table.vocab_len(), table.dim()).map_err(io)?;
    for (i, tok) in table.tokens().iter().enumerate() {
        w.write_all(tok.as_bytes()).map_err(io)?;
        w.write_all(b" ").map_err(io)?;
        for &x in table.row(i + 1) {
            w.write_all(&(x as f32).to_le_bytes()).map_err(io)?;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Loads a FastText `.vec` text file.
pub fn load_fasttext_text(path: &Path, filter: Option<&HashSet<String>>) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_fasttext_text(BufReader::new(file), &path.display().to_string(), filter)
}

pub fn read_fasttext_text<R: BufRead>(
    r: R,
    name: &str,
    filter: Option<&HashSet<String>>,
) -> Result<EmbeddingTable> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: name.to_string(),
        line,
        msg,
    };
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| perr(1, "empty file".into()))?
        .map_err(|e| Error::io(name, e))?;
    let (n, dim) = parse_header(&header)
        .ok_or_else(|| perr(1, format!("malformed header `{header}`, expected `<n> <d>`")))?;
    let mut builder = Builder::new(dim, EmbeddingSource::FastTextText)?;
    let mut seen = 0usize;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| perr(lineno, e.to_string()))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        if seen > n {
            return Err(perr(lineno, format!("more data lines than the {n} declared")));
        }
        let (tok, rest) = line
            .split_once(' ')
            .ok_or_else(|| perr(lineno, "expected `token v1 ... vd`".into()))?;
        let values: Vec<&str> = rest.split_ascii_whitespace().collect();
        if values.len() != dim {
            return Err(perr(
                lineno,
                format!("expected {dim} values for `{tok}`, found {}", values.len()),
            ));
        }
        if !keep(filter, tok) {
            continue;
        }
        let v = values
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| perr(lineno, format!("bad value for `{tok}`: {e}")))?;
        if !builder.push(tok.to_string(), v) {
            warn!("{name}:{lineno}: duplicate token `{tok}`, keeping the first");
        }
    }
    if seen != n {
        return Err(perr(
            seen + 1,
            format!("header declares {n} entries but file has {seen}"),
        ));
    }
    Ok(builder.finish())
}

/// Writes the table in FastText text format using shortest round-trip
/// decimal literals.
pub fn write_fasttext_text(table: &EmbeddingTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{} {}", table.vocab_len(), table.dim()).map_err(io)?;
    for (i, tok) in table.tokens().iter().enumerate() {
        w.write_all(tok.as_bytes()).map_err(io)?;
        for x in table.row(i + 1) {
            write!(w, " {x}").map_err(io)?;
        }
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load(
    path: &Path,
    format: EmbeddingFormat,
    filter: Option<&HashSet<String>>,
) -> Result<EmbeddingTable> {
    match format {
        EmbeddingFormat::Word2VecBin => load_word2vec_bin(path, filter),
        EmbeddingFormat::FastTextText => load_fasttext_text(path, filter),
    }
}

/// Uniform(-0.05, 0.05) vectors for `vocab`, reproducible from `seed`.
pub fn random_table(vocab: &[String], dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if vocab.is_empty() {
        return Err(Error::invalid("random_table needs a non-empty vocabulary"));
    }
    let mut rng = seed::rng(seed);
    let mut builder = Builder::new(dim, EmbeddingSource::Random)?;
    for tok in vocab {
        let v = (0..dim).map(|_| rng.random_range(-0.05..0.05)).collect();
        builder.push(tok.clone(), v);
    }
    Ok(builder.finish())
}
