//! Text formats shared by the CLI: JSON reals that may be infinite, CSV
//! tables with a `#` provenance header, and the law fingerprint.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::law::IncrementLaw;

/// Serde adapter writing non-finite `f64` values as the strings `"inf"`,
/// `"-inf"` and `"nan"`, which plain JSON numbers cannot hold.
pub mod real {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(D::Error::custom(format!("not a real: {other:?}"))),
            },
        }
    }
}

/// Short SHA-256 fingerprint of the law's canonical JSON.
pub fn law_hash(law: &IncrementLaw) -> String {
    let digest = Sha256::digest(law.to_json().as_bytes());
    hex::encode(&digest[..8])
}

/// Provenance carried by every CLI output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub law_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Meta {
    pub fn new(law: &IncrementLaw) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            law_hash: law_hash(law),
            seed: None,
            note: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn header_line(&self) -> String {
        let mut line = format!("# {} {} law={}", self.tool, self.version, self.law_hash);
        if let Some(seed) = self.seed {
            let _ = write!(line, " seed={seed}");
        }
        if let Some(note) = &self.note {
            let _ = write!(line, " note={note}");
        }
        line
    }

    fn parse_header(line: &str) -> Result<Self> {
        let body = line
            .strip_prefix("# ")
            .ok_or_else(|| Error::Input("missing provenance header".into()))?;
        let (head, note) = match body.split_once(" note=") {
            Some((h, n)) => (h, Some(n.to_string())),
            None => (body, None),
        };
        let mut parts = head.split(' ');
        let tool = parts.next().unwrap_or_default().to_string();
        let version = parts.next().unwrap_or_default().to_string();
        let mut law_hash = None;
        let mut seed = None;
        for p in parts {
            if let Some(v) = p.strip_prefix("law=") {
                law_hash = Some(v.to_string());
            } else if let Some(v) = p.strip_prefix("seed=") {
                seed = Some(v.parse().map_err(|_| Error::Input(format!("bad seed {v:?}")))?);
            }
        }
        Ok(Self {
            tool,
            version,
            law_hash: law_hash.ok_or_else(|| Error::Input("header lacks law=".into()))?,
            seed,
            note,
        })
    }
}

/// A CSV table of reals with a provenance header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub meta: Meta,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<CsvCell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsvCell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl std::fmt::Display for CsvCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CsvCell::Int(v) => write!(f, "{v}"),
            CsvCell::Real(v) if v.is_finite() => write!(f, "{v:e}"),
            CsvCell::Real(v) if v.is_nan() => f.write_str("nan"),
            CsvCell::Real(v) if *v > 0.0 => f.write_str("inf"),
            CsvCell::Real(_) => f.write_str("-inf"),
            CsvCell::Text(t) => f.write_str(t),
        }
    }
}

impl CsvCell {
    fn parse(field: &str) -> Self {
        if let Ok(v) = field.parse::<i64>() {
            return CsvCell::Int(v);
        }
        match field {
            "inf" => CsvCell::Real(f64::INFINITY),
            "-inf" => CsvCell::Real(f64::NEG_INFINITY),
            "nan" => CsvCell::Real(f64::NAN),
            _ => match field.parse::<f64>() {
                Ok(v) => CsvCell::Real(v),
                Err(_) => CsvCell::Text(field.to_string()),
            },
        }
    }
}

impl CsvTable {
    pub fn new(meta: Meta, columns: &[&str]) -> Self {
        Self {
            meta,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<CsvCell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.meta.header_line();
        out.push('\n');
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let fields: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let meta = Meta::parse_header(lines.next().unwrap_or_default())?;
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| Error::Input("missing column header".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let row: Vec<CsvCell> = line.split(',').map(CsvCell::parse).collect();
            if row.len() != columns.len() {
                return Err(Error::Input(format!("row has {} fields, expected {}", row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Self { meta, columns, rows })
    }
}
