//! NER datasets in CoNLL column format and word-embedding tables.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::lowercase;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NerExample {
    pub tokens: Vec<String>,
    /// BIO tags, one per token.
    pub tags: Vec<String>,
}

impl NerExample {
    pub fn new(tokens: Vec<String>, tags: Vec<String>) -> Result<Self> {
        if tokens.len() != tags.len() {
            return Err(Error::Input(format!(
                "{} tokens but {} tags",
                tokens.len(),
                tags.len()
            )));
        }
        Ok(NerExample { tokens, tags })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lowercased(&self) -> Self {
        NerExample {
            tokens: self.tokens.iter().map(|t| lowercase(t)).collect(),
            tags: self.tags.clone(),
        }
    }
}

/// Reads whitespace-separated columns: token first, tag last, blank lines
/// between sentences. `-DOCSTART-` lines are skipped.
pub fn read_conll_from(reader: impl BufRead, source: &Path) -> Result<Vec<NerExample>> {
    let mut out = Vec::new();
    let mut tokens = Vec::new();
    let mut tags = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
        let line = line.trim();
        if line.starts_with("-DOCSTART-") {
            continue;
        }
        if line.is_empty() {
            if !tokens.is_empty() {
                out.push(NerExample {
                    tokens: std::mem::take(&mut tokens),
                    tags: std::mem::take(&mut tags),
                });
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < 2 {
            return Err(Error::parse(source, i + 1, format!("missing tag column in {line:?}")));
        }
        tokens.push(cols[0].to_string());
        tags.push(cols[cols.len() - 1].to_string());
    }
    if !tokens.is_empty() {
        out.push(NerExample { tokens, tags });
    }
    Ok(out)
}

pub fn read_conll(path: impl AsRef<Path>) -> Result<Vec<NerExample>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_conll_from(BufReader::new(f), path)
}

/// Two columns (token, tag); sentences separated by a blank line.
pub fn write_conll_to(mut w: impl Write, examples: &[NerExample]) -> Result<()> {
    for ex in examples {
        for (t, tag) in ex.tokens.iter().zip(&ex.tags) {
            writeln!(w, "{t} {tag}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_conll(path: impl AsRef<Path>, examples: &[NerExample]) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_conll_to(BufWriter::new(f), examples).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        e => e,
    })
}

/// The dataset followed by a lowercased copy of itself.
pub fn augment_lowercase(data: &[NerExample]) -> Vec<NerExample> {
    data.iter()
        .cloned()
        .chain(data.iter().map(NerExample::lowercased))
        .collect()
}

pub fn lowercase_dataset(data: &[NerExample]) -> Vec<NerExample> {
    data.iter().map(NerExample::lowercased).collect()
}

/// Word vectors keyed by lowercased word. Row 0 is the unknown-word vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    words: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    vectors: Vec<f64>,
    duplicates: usize,
}

impl EmbeddingTable {
    pub const UNK: usize = 0;

    /// Builds a table from `(word, vector)` pairs. The unknown vector is the
    /// mean of all loaded vectors; later duplicates of a word are ignored.
    pub fn from_entries(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let mut t = EmbeddingTable {
            words: Vec::new(),
            index: HashMap::new(),
            dim,
            vectors: vec![0.0; dim],
            duplicates: 0,
        };
        for (word, v) in entries {
            if v.len() != dim {
                return Err(Error::Shape(format!(
                    "vector for {word:?} has {} values, expected {dim}",
                    v.len()
                )));
            }
            let key = lowercase(&word);
            if t.index.contains_key(&key) {
                t.duplicates += 1;
                continue;
            }
            t.words.push(key.clone());
            t.index.insert(key, t.words.len());
            t.vectors.extend_from_slice(&v);
        }
        let n = t.words.len();
        if n > 0 {
            for j in 0..dim {
                let s: f64 = (1..=n).map(|r| t.vectors[r * dim + j]).sum();
                t.vectors[j] = s / n as f64;
            }
        }
        Ok(t)
    }

    /// Text format: a word followed by `dim` floats per line.
    pub fn read_from(reader: impl BufRead, dim: usize, source: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::parse(source, i + 1, e.to_string()))?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else {
                continue;
            };
            let v = parts
                .map(|x| x.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(source, i + 1, format!("bad float: {e}")))?;
            if v.len() != dim {
                return Err(Error::parse(
                    source,
                    i + 1,
                    format!("expected {dim} values for {word:?}, found {}", v.len()),
                ));
            }
            if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                return Err(Error::parse(source, i + 1, format!("non-finite value {x}")));
            }
            entries.push((word.to_string(), v));
        }
        Self::from_entries(dim, entries)
    }

    /// Number of rows including the unknown row.
    pub fn len(&self) -> usize {
        self.words.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn row(&self, word: &str) -> usize {
        self.index.get(&lowercase(word)).copied().unwrap_or(Self::UNK)
    }

    pub fn vector(&self, row: usize) -> &[f64] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }

    pub fn lookup(&self, word: &str) -> &[f64] {
        self.vector(self.row(word))
    }

    pub fn values(&self) -> &[f64] {
        &self.vectors
    }
}

pub fn read_embeddings(path: impl AsRef<Path>, dim: usize) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::read_from(BufReader::new(f), dim, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ex(tokens: &[&str], tags: &[&str]) -> NerExample {
        NerExample::new(
            tokens.iter().map(|s| s.to_string()).collect(),
            tags.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn reads_two_line_sentence() {
        let d = read_conll_from("Alan B-PER\nran O\n\n".as_bytes(), Path::new("x")).unwrap();
        assert_eq!(d, vec![ex(&["Alan", "ran"], &["B-PER", "O"])]);
    }

    #[test]
    fn skips_docstart_and_uses_last_column() {
        let text = "-DOCSTART- -X- O O\n\nEU NNP B-NP B-ORG\nrejects VBZ B-VP O\n";
        let d = read_conll_from(text.as_bytes(), Path::new("x")).unwrap();
        assert_eq!(d, vec![ex(&["EU", "rejects"], &["B-ORG", "O"])]);
    }

    #[test]
    fn missing_tag_reports_line() {
        let err = read_conll_from("a O\nb\n".as_bytes(), Path::new("f.conll")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn augment_and_lowercase() {
        let d = vec![ex(&["Alan", "ran"], &["B-PER", "O"])];
        let a = augment_lowercase(&d);
        assert_eq!(a.len(), 2);
        assert_eq!(a[1], ex(&["alan", "ran"], &["B-PER", "O"]));
        let l = lowercase_dataset(&d);
        assert_eq!(l[0].tokens, vec!["alan", "ran"]);
        let lower = lowercase_dataset(&d);
        let a = augment_lowercase(&lower);
        assert_eq!(a[0], a[1]);
    }

    #[test]
    fn embeddings_unk_is_mean() {
        let text = "Cat 1 2 3\ndog 3 0 -1\ncat 9 9 9\n";
        let t = EmbeddingTable::read_from(text.as_bytes(), 3, Path::new("e")).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.duplicates(), 1);
        assert_eq!(t.lookup("CAT"), &[1.0, 2.0, 3.0]);
        assert_eq!(t.lookup("zebra"), &[2.0, 1.0, 1.0]);
        let err = EmbeddingTable::read_from("a 1 2\nb 1\n".as_bytes(), 2, Path::new("e")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    fn arb_example() -> impl Strategy<Value = NerExample> {
        prop::collection::vec(("[A-Za-z]{1,5}", prop_oneof![Just("O"), Just("B-PER"), Just("I-PER")]), 1..6)
            .prop_map(|v| NerExample {
                tokens: v.iter().map(|(t, _)| t.clone()).collect(),
                tags: v.iter().map(|(_, g)| g.to_string()).collect(),
            })
    }

    proptest! {
        #[test]
        fn conll_round_trip(data in prop::collection::vec(arb_example(), 0..5)) {
            let mut buf = Vec::new();
            write_conll_to(&mut buf, &data).unwrap();
            let back = read_conll_from(&buf[..], Path::new("rt")).unwrap();
            prop_assert_eq!(back, data);
        }

        #[test]
        fn augmentation_doubles(data in prop::collection::vec(arb_example(), 0..5)) {
            let a = augment_lowercase(&data);
            prop_assert_eq!(a.len(), 2 * data.len());
            for (x, y) in data.iter().zip(&a[data.len()..]) {
                prop_assert_eq!(&x.tags, &y.tags);
                prop_assert_eq!(x.tokens.len(), y.tokens.len());
            }
            let l = lowercase_dataset(&data);
            prop_assert_eq!(lowercase_dataset(&l), l);
        }
    }
}
