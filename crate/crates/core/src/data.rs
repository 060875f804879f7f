//! Annotated corpora in the canonical tab-separated interchange format:
//! a header `text<TAB>var1<TAB>...`, then one record per line. Text may not
//! contain tabs or newlines; there is no quoting.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemaFormat {
    Vad,
    Be4,
    Be5,
    Be6,
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

impl Variable {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            lo,
            hi,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationSchema {
    pub format: SchemaFormat,
    pub variables: Vec<Variable>,
}

const BASIC: [&str; 6] = ["joy", "anger", "sadness", "fear", "disgust", "surprise"];
const VAD: [&str; 3] = ["valence", "arousal", "dominance"];

fn vars(names: &[&str], lo: f64, hi: f64) -> Vec<Variable> {
    names.iter().map(|n| Variable::new(*n, lo, hi)).collect()
}

impl AnnotationSchema {
    /// Valence, arousal, dominance on [1, 9].
    pub fn vad() -> Self {
        Self {
            format: SchemaFormat::Vad,
            variables: vars(&VAD, 1.0, 9.0),
        }
    }

    /// Joy, anger, sadness, fear on [0, 1].
    pub fn be4() -> Self {
        Self {
            format: SchemaFormat::Be4,
            variables: vars(&BASIC[..4], 0.0, 1.0),
        }
    }

    /// One of the BE4 emotions on its own, for corpora where each record
    /// carries a single emotion score.
    pub fn be4_single(emotion: &str) -> Result<Self> {
        if !BASIC[..4].contains(&emotion) {
            return Err(Error::invalid(format!(
                "`{emotion}` is not a BE4 emotion (joy, anger, sadness, fear)"
            )));
        }
        Ok(Self {
            format: SchemaFormat::Be4,
            variables: vars(&[emotion], 0.0, 1.0),
        })
    }

    /// The first five basic emotions on [1, 5].
    pub fn be5() -> Self {
        Self {
            format: SchemaFormat::Be5,
            variables: vars(&BASIC[..5], 1.0, 5.0),
        }
    }

    /// All six basic emotions on [0, 100].
    pub fn be6() -> Self {
        Self {
            format: SchemaFormat::Be6,
            variables: vars(&BASIC, 0.0, 100.0),
        }
    }

    /// VAD on [1, 9] plus BE5 on [1, 5].
    pub fn vad_be5() -> Self {
        let mut variables = vars(&VAD, 1.0, 9.0);
        variables.extend(vars(&BASIC[..5], 1.0, 5.0));
        Self {
            format: SchemaFormat::Custom,
            variables,
        }
    }

    pub fn custom(variables: Vec<Variable>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::invalid("a schema needs at least one variable"));
        }
        let mut seen = HashSet::new();
        for v in &variables {
            if !seen.insert(v.name.as_str()) {
                return Err(Error::invalid(format!("duplicate variable `{}`", v.name)));
            }
            if !(v.lo <= v.hi) {
                return Err(Error::invalid(format!(
                    "variable `{}` has an empty range [{}, {}]",
                    v.name, v.lo, v.hi
                )));
            }
        }
        Ok(Self {
            format: SchemaFormat::Custom,
            variables,
        })
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

impl FromStr for AnnotationSchema {
    type Err = Error;

    /// Accepts a preset (`vad`, `be4`, `be5`, `be6`, `vad+be5`, corpus aliases
    /// `se07`, `anpst`, `mas`, `wassa:<emotion>`) or an explicit list
    /// `name=lo..hi,name=lo..hi`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "vad" | "anpst" => return Ok(Self::vad()),
            "be4" => return Ok(Self::be4()),
            "be5" => return Ok(Self::be5()),
            "be6" | "se07" => return Ok(Self::be6()),
            "vad+be5" | "mas" => return Ok(Self::vad_be5()),
            lower => {
                if let Some(em) = lower.strip_prefix("wassa:") {
                    return Self::be4_single(em);
                }
            }
        }
        let mut variables = Vec::new();
        for part in s.split(',') {
            let parsed = part.split_once('=').and_then(|(name, range)| {
                let (lo, hi) = range.split_once("..")?;
                Some(Variable::new(
                    name.trim(),
                    lo.trim().parse().ok()?,
                    hi.trim().parse().ok()?,
                ))
            });
            match parsed {
                Some(v) if !v.name.is_empty() => variables.push(v),
                _ => {
                    return Err(Error::invalid(format!(
                        "cannot parse schema `{s}`: expected a preset or `name=lo..hi,...`"
                    )))
                }
            }
        }
        Self::custom(variables)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub text: String,
    /// Aligned with the schema's variables.
    pub scores: Vec<f64>,
    /// 1-based source line, 0 for records built in memory.
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub records: Vec<Record>,
    pub schema: AnnotationSchema,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub record: usize,
    pub line: usize,
    pub variable: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "record {} (line {}): {} = {} outside [{}, {}]",
            self.record, self.line, self.variable, self.value, self.lo, self.hi
        )
    }
}

impl Dataset {
    pub fn new(schema: AnnotationSchema, records: Vec<Record>) -> Self {
        Self { records, schema }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_targets(&self) -> usize {
        self.schema.len()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.text.as_str())
    }

    /// Column of one variable.
    pub fn target(&self, var: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.scores[var]).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            records: idx.iter().map(|&i| self.records[i].clone()).collect(),
            schema: self.schema.clone(),
        }
    }

    /// Serializes to the canonical TSV layout.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("text");
        for v in &self.schema.variables {
            out.push('\t');
            out.push_str(&v.name);
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.text);
            for s in &r.scores {
                out.push('\t');
                out.push_str(&s.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Every score outside its variable's range (NaN included), in record
/// order and then schema order.
pub fn validate(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, r) in dataset.records.iter().enumerate() {
        for (v, &s) in dataset.schema.variables.iter().zip(&r.scores) {
            if !v.contains(s) {
                out.push(Violation {
                    record: i,
                    line: r.line,
                    variable: v.name.clone(),
                    value: s,
                    lo: v.lo,
                    hi: v.hi,
                });
            }
        }
    }
    out
}

/// Parses TSV text without range checks. Structural problems (header,
/// column counts, number syntax) are still errors.
pub fn parse_tsv(src: &str, schema: &AnnotationSchema, name: &str) -> Result<Dataset> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: name.to_string(),
        line,
        msg,
    };
    let mut lines = src.split('\n').enumerate().map(|(i, l)| {
        (i + 1, l.strip_suffix('\r').unwrap_or(l))
    });
    let (_, header) = lines
        .next()
        .filter(|(_, h)| !h.is_empty())
        .ok_or_else(|| perr(1, "missing header".into()))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols[0] != "text" {
        return Err(perr(1, format!("first column must be `text`, found `{}`", cols[0])));
    }
    let mut mapping = Vec::with_capacity(cols.len() - 1);
    for name in &cols[1..] {
        let pos = schema
            .position(name)
            .ok_or_else(|| perr(1, format!("unknown variable `{name}` in header")))?;
        if mapping.contains(&pos) {
            return Err(perr(1, format!("variable `{name}` appears twice")));
        }
        mapping.push(pos);
    }
    if mapping.len() != schema.len() {
        let missing: Vec<&str> = schema
            .variables
            .iter()
            .enumerate()
            .filter(|(i, _)| !mapping.contains(i))
            .map(|(_, v)| v.name.as_str())
            .collect();
        return Err(perr(1, format!("header lacks variables {missing:?}")));
    }

    let mut records = Vec::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != cols.len() {
            return Err(perr(
                lineno,
                format!("expected {} columns, found {}", cols.len(), fields.len()),
            ));
        }
        let mut scores = vec![0.0; schema.len()];
        for (field, &pos) in fields[1..].iter().zip(&mapping) {
            scores[pos] = field.trim().parse().map_err(|_| {
                perr(
                    lineno,
                    format!("`{field}` is not a number ({})", schema.variables[pos].name),
                )
            })?;
        }
        records.push(Record {
            text: fields[0].to_string(),
            scores,
            line: lineno,
        });
    }
    if records.is_empty() {
        return Err(perr(1, "no records".into()));
    }
    Ok(Dataset::new(schema.clone(), records))
}

/// Parses and validates; the first range violation is an error naming its
/// line and variable.
pub fn parse_dataset(src: &str, schema: &AnnotationSchema, name: &str) -> Result<Dataset> {
    let ds = parse_tsv(src, schema, name)?;
    if let Some(v) = validate(&ds).into_iter().next() {
        return Err(Error::OutOfRange {
            line: v.line,
            variable: v.variable,
            value: v.value,
            lo: v.lo,
            hi: v.hi,
        });
    }
    Ok(ds)
}

pub fn read_tsv_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        msg: format!("not valid UTF-8: {e}"),
    })
}

pub fn load_dataset(path: &Path, schema: &AnnotationSchema) -> Result<Dataset> {
    let src = read_tsv_file(path)?;
    parse_dataset(&src, schema, &path.display().to_string())
}
