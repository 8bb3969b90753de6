//! Versioned model container.
//!
//! Layout: a UTF-8 text header followed by raw little-endian `f32` data.
//!
//! ```text
//! tcner-container 1
//! section truecaser
//! meta char_dim 50
//! tensor char_embedding.table 87x50
//! end
//! data 4350
//! <4350 little-endian f32 values, tensors in header order>
//! ```
//!
//! Meta values are free text up to the end of the line. Tensor values are
//! stored as `f32`; values loaded from a container therefore save back to
//! identical bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::tensor::{ParamSet, Tensor};

pub const MAGIC: &str = "tcner-container";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    pub name: String,
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, Tensor)>,
}

impl Section {
    pub fn new(name: impl Into<String>) -> Self {
        Section {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    /// First value stored under `key`.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn meta_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.meta
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .meta(key)
            .ok_or_else(|| Error::Format(format!("section {:?} lacks {key:?}", self.name)))?;
        raw.parse()
            .map_err(|_| Error::Format(format!("section {:?}: bad value {raw:?} for {key:?}", self.name)))
    }

    pub fn push_params(&mut self, params: &ParamSet) {
        for (name, t) in params.iter() {
            let mut t = t.clone();
            t.clear_grad();
            self.tensors.push((name.to_string(), t));
        }
    }

    /// Overwrites the values of `params` with this section's tensors. Every
    /// parameter must be present with the same shape.
    pub fn load_params(&self, params: &mut ParamSet) -> Result<()> {
        if self.tensors.len() != params.len() {
            return Err(Error::Format(format!(
                "section {:?} holds {} tensors, model expects {}",
                self.name,
                self.tensors.len(),
                params.len()
            )));
        }
        let mut loaded = ParamSet::new();
        for (name, t) in &self.tensors {
            loaded.add(name.clone(), t.clone())?;
        }
        params.copy_values_from(&loaded)
    }

    /// The tensors as a fresh [`ParamSet`], in stored order.
    pub fn to_params(&self) -> Result<ParamSet> {
        let mut ps = ParamSet::new();
        for (name, t) in &self.tensors {
            ps.add(name.clone(), t.clone())?;
        }
        Ok(ps)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub sections: Vec<Section>,
}

fn check_token(s: &str, what: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace()) {
        return Err(Error::Format(format!("{what} {s:?} must be a non-empty token")));
    }
    Ok(())
}

impl Container {
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let mut header = format!("{MAGIC} {VERSION}\n");
        let mut total = 0usize;
        for s in &self.sections {
            check_token(&s.name, "section name")?;
            header.push_str(&format!("section {}\n", s.name));
            for (k, v) in &s.meta {
                check_token(k, "meta key")?;
                if v.contains('\n') {
                    return Err(Error::Format(format!("meta value for {k:?} contains a newline")));
                }
                header.push_str(&format!("meta {k} {v}\n"));
            }
            for (name, t) in &s.tensors {
                check_token(name, "tensor name")?;
                let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
                header.push_str(&format!("tensor {name} {}\n", dims.join("x")));
                total += t.len();
            }
            header.push_str("end\n");
        }
        header.push_str(&format!("data {total}\n"));
        w.write_all(header.as_bytes())?;
        let mut buf = Vec::with_capacity(total * 4);
        for s in &self.sections {
            for (_, t) in &s.tensors {
                for &v in t.values() {
                    buf.extend_from_slice(&(v as f32).to_le_bytes());
                }
            }
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        let mut lineno = 0usize;
        let mut next_line = |r: &mut BufReader<_>, line: &mut String| -> Result<usize> {
            line.clear();
            let n = r.read_line(line)?;
            if n == 0 {
                return Err(Error::Format("unexpected end of header".into()));
            }
            if line.ends_with('\n') {
                line.pop();
            }
            lineno += 1;
            Ok(lineno)
        };

        let ln = next_line(&mut r, &mut line)?;
        let version = line
            .strip_prefix(MAGIC)
            .map(str::trim)
            .ok_or_else(|| Error::Format(format!("line {ln}: not a model container")))?;
        if version != VERSION.to_string() {
            return Err(Error::Format(format!("unsupported container version {version:?}")));
        }

        let mut sections: Vec<Section> = Vec::new();
        let mut shapes: Vec<Vec<Vec<usize>>> = Vec::new();
        let mut open = false;
        let total: usize = loop {
            let ln = next_line(&mut r, &mut line)?;
            let (kind, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
            match (kind, open) {
                ("section", false) => {
                    sections.push(Section::new(rest));
                    shapes.push(Vec::new());
                    open = true;
                }
                ("meta", true) => {
                    let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
                    sections.last_mut().unwrap().push_meta(k, v);
                }
                ("tensor", true) => {
                    let (name, dims) = rest
                        .split_once(' ')
                        .ok_or_else(|| Error::Format(format!("line {ln}: tensor without shape")))?;
                    let shape = dims
                        .split('x')
                        .map(|d| d.parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|_| Error::Format(format!("line {ln}: bad shape {dims:?}")))?;
                    sections
                        .last_mut()
                        .unwrap()
                        .tensors
                        .push((name.to_string(), Tensor::zeros(vec![1])));
                    shapes.last_mut().unwrap().push(shape);
                }
                ("end", true) => open = false,
                ("data", false) => {
                    break rest
                        .parse()
                        .map_err(|_| Error::Format(format!("line {ln}: bad data count")))?
                }
                _ => return Err(Error::Format(format!("line {ln}: unexpected {line:?}"))),
            }
        };

        let declared: usize = shapes.iter().flatten().map(|s| s.iter().product::<usize>()).sum();
        if declared != total {
            return Err(Error::Format(format!(
                "header declares {declared} values but data holds {total}"
            )));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != total * 4 {
            return Err(Error::Format(format!(
                "expected {} data bytes, found {}",
                total * 4,
                bytes.len()
            )));
        }
        let mut floats = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
        for (s, sh) in sections.iter_mut().zip(shapes) {
            for ((_, t), shape) in s.tensors.iter_mut().zip(sh) {
                let n = shape.iter().product();
                let values: Vec<f64> = floats.by_ref().take(n).collect();
                *t = Tensor::new(shape, values)?;
            }
        }
        Ok(Container { sections })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(f)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        self.write_to(&mut out)?;
        Ok(out)
    }
}
