//! Versioned CSV rows and writers.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const HEADER: [&str; 15] = [
    "schema_version",
    "kind",
    "graph",
    "fold",
    "seed",
    "eta0",
    "observable",
    "j",
    "lambda",
    "matrix_element",
    "bracket",
    "term",
    "n_window",
    "mean",
    "message",
];

/// 17 significant digits; empty for absent values.
pub fn fmt_f(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Term,
    Summary,
    Error,
    Check,
}

impl RowKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowKind::Term => "term",
            RowKind::Summary => "summary",
            RowKind::Error => "error",
            RowKind::Check => "check",
        }
    }
}

/// One CSV row. Check rows put the residual in `term`, the tolerance in
/// `mean` and pass/fail in `message`.
#[derive(Debug, Clone)]
pub struct Row {
    pub kind: RowKind,
    pub graph: String,
    pub fold: Option<usize>,
    pub seed: Option<u64>,
    pub eta0: Option<f64>,
    pub observable: String,
    pub j: Option<usize>,
    pub lambda: Option<f64>,
    pub matrix_element: Option<f64>,
    pub bracket: Option<f64>,
    pub term: Option<f64>,
    pub n_window: Option<usize>,
    pub mean: Option<f64>,
    pub message: String,
}

impl Row {
    pub fn new(kind: RowKind, graph: &str) -> Self {
        Row {
            kind,
            graph: graph.to_string(),
            fold: None,
            seed: None,
            eta0: None,
            observable: String::new(),
            j: None,
            lambda: None,
            matrix_element: None,
            bracket: None,
            term: None,
            n_window: None,
            mean: None,
            message: String::new(),
        }
    }

    fn fields(&self) -> [String; 15] {
        let opt = |x: Option<String>| x.unwrap_or_default();
        [
            SCHEMA_VERSION.to_string(),
            self.kind.as_str().to_string(),
            self.graph.clone(),
            opt(self.fold.map(|x| x.to_string())),
            opt(self.seed.map(|x| x.to_string())),
            fmt_f(self.eta0),
            self.observable.clone(),
            opt(self.j.map(|x| x.to_string())),
            fmt_f(self.lambda),
            fmt_f(self.matrix_element),
            fmt_f(self.bracket),
            fmt_f(self.term),
            opt(self.n_window.map(|x| x.to_string())),
            fmt_f(self.mean),
            self.message.clone(),
        ]
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_rows<W: Write>(w: W, rows: &[Row]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(HEADER).map_err(csv_err)?;
    for r in rows {
        wr.write_record(r.fields()).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    write_rows(std::fs::File::create(path)?, rows)
}

/// Generic CSV with a header and prewritten fields.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut wr = csv::Writer::from_path(path).map_err(csv_err)?;
    wr.write_record(header).map_err(csv_err)?;
    for r in rows {
        wr.write_record(r).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(path, s + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_and_quoting() {
        assert_eq!(fmt_f(Some(0.1)), "1.0000000000000001e-1");
        let x: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(x, 0.1);
        let mut r = Row::new(RowKind::Term, "k4");
        r.observable = "indicator:0,2".into();
        r.term = Some(1.0 / 3.0);
        let mut buf = Vec::new();
        write_rows(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let rec = rd.records().next().unwrap().unwrap();
        assert_eq!(&rec[6], "indicator:0,2");
        assert_eq!(rec[11].parse::<f64>().unwrap(), 1.0 / 3.0);
        assert_eq!(&rec[0], "1");
    }
}
