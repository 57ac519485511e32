//! CSV ingestion and export.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// Header present iff some cell of the first row is not a number.
    #[default]
    Auto,
    Present,
    Absent,
}

impl std::str::FromStr for HeaderMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "present" | "yes" => Ok(Self::Present),
            "absent" | "no" => Ok(Self::Absent),
            other => Err(format!(
                "unknown header mode '{other}' (auto, present, absent)"
            )),
        }
    }
}

/// Feature table with optional column names.
#[derive(Debug, Clone)]
pub struct Table {
    pub data: DataMatrix,
    pub columns: Option<Vec<String>>,
}

/// Picks the most frequent of comma, semicolon and tab on the first non-empty line.
pub fn detect_delimiter(text: &str) -> u8 {
    let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    b",;\t"
        .iter()
        .copied()
        .max_by_key(|&d| (line.bytes().filter(|&b| b == d).count(), d == b','))
        .unwrap_or(b',')
}

fn records(text: &str) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(detect_delimiter(text))
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        out.push(rec);
    }
    Ok(out)
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses numeric CSV text. Row and column numbers in errors are 1-based
/// positions in the file.
pub fn parse_features(text: &str, header: HeaderMode) -> Result<Table> {
    let recs = records(text)?;
    let Some(first) = recs.first() else {
        return Err(Error::DegenerateData("input contains no rows".into()));
    };
    let has_header = match header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => first.iter().any(|c| parse_cell(c).is_none()),
    };
    let columns = has_header.then(|| first.iter().map(str::to_owned).collect::<Vec<_>>());
    let body = &recs[has_header as usize..];
    let p = columns.as_ref().map_or(first.len(), Vec::len);

    let mut values = Vec::with_capacity(body.len() * p);
    for (r, rec) in body.iter().enumerate() {
        let row = r + 1 + has_header as usize;
        if rec.len() != p {
            return Err(Error::DataParse {
                row,
                column: rec.len().min(p) + 1,
                message: format!("expected {p} fields, found {}", rec.len()),
            });
        }
        for (c, cell) in rec.iter().enumerate() {
            let v = parse_cell(cell).ok_or_else(|| Error::DataParse {
                row,
                column: c + 1,
                message: format!("'{cell}' is not a finite number"),
            })?;
            values.push(v);
        }
    }
    let n = body.len();
    if n < 2 {
        return Err(Error::DegenerateData(format!(
            "need at least 2 observations, found {n}"
        )));
    }
    Ok(Table {
        data: DataMatrix::new(values, n, p)?,
        columns,
    })
}

fn with_path(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(with_path(path))
}

pub fn read_features(path: &Path, header: HeaderMode) -> Result<Table> {
    parse_features(&read_text(path)?, header)
}

/// Reads the first column as labels. A header row is dropped when the file
/// holds `n + 1` rows.
pub fn parse_labels(text: &str, n: usize) -> Result<Vec<String>> {
    let recs = records(text)?;
    let skip = match recs.len() {
        m if m == n => 0,
        m if m == n + 1 => 1,
        m => {
            return Err(Error::ShapeMismatch(format!(
                "label file has {m} rows for {n} observations"
            )))
        }
    };
    Ok(recs[skip..]
        .iter()
        .map(|r| r.get(0).unwrap_or("").to_owned())
        .collect())
}

pub fn read_labels(path: &Path, n: usize) -> Result<Vec<String>> {
    parse_labels(&read_text(path)?, n)
}

pub fn write_features<W: Write>(
    data: &DataMatrix,
    columns: Option<&[String]>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match columns {
        Some(c) => w.write_record(c)?,
        None => w.write_record((1..=data.p()).map(|j| format!("x{j}")))?,
    }
    for row in data.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels<W: Write, T: ToString>(labels: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label"])?;
    for l in labels {
        w.write_record([l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes serializable rows as a CSV with a header.
pub fn write_rows<W: Write, S: Serialize>(rows: &[S], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn create_file(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(with_path(dir))?;
    }
    Ok(std::io::BufWriter::new(
        fs::File::create(path).map_err(with_path(path))?,
    ))
}
