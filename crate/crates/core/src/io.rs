//! CSV helpers shared by every emitter: `#`-prefixed metadata lines followed
//! by a header row and 17-significant-digit floats.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits, which round-trips every f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Ordered `key: value` pairs written as `# key: value` lines.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Metadata(pub Vec<(String, String)>);

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.0.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        for (k, v) in &self.0 {
            writeln!(out, "# {k}: {v}")?;
        }
        Ok(())
    }
}

/// A parsed numeric CSV table with its metadata block.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub metadata: Metadata,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(metadata: Metadata, header: &[&str]) -> Self {
        Table {
            metadata,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        self.metadata.write_to(out)?;
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            write_row(out, row)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn expect_header(&self, expected: &[&str]) -> Result<()> {
        if self
            .header
            .iter()
            .map(String::as_str)
            .ne(expected.iter().copied())
        {
            return Err(Error::Parse(format!(
                "expected header {:?}, found {:?}",
                expected, self.header
            )));
        }
        Ok(())
    }
}

pub fn read_table<R: Read>(mut input: R) -> Result<Table> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut metadata = Metadata::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim();
        if let Some((k, v)) = body.split_once(':') {
            metadata.push(k.trim(), v.trim());
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("`{field}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table {
        metadata,
        header,
        rows,
    })
}

pub fn write_row<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    let line = values
        .iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(",");
    writeln!(out, "{line}")?;
    Ok(())
}
