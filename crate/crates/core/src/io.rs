//! File formats: long-format raw CSV, the headerless matrix triplet, the
//! JSON summary document, and null-sample dumps.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{CellSummaryTable, RawDataset, Record};
use crate::error::{AnovaError, Result};
use crate::grid::Grid;

/// Reads `A,B,y` records.
pub fn read_raw_csv(reader: impl Read) -> Result<RawDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["A", "B", "y"] {
        return Err(AnovaError::Parse(format!(
            "raw CSV header must be A,B,y, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let records = rdr
        .deserialize::<Record>()
        .collect::<std::result::Result<_, _>>()?;
    Ok(RawDataset::new(records))
}

pub fn read_raw_csv_path(path: &Path) -> Result<RawDataset> {
    read_raw_csv(File::open(path)?)
}

pub fn write_raw_csv(raw: &RawDataset, writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in &raw.records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a headerless numeric matrix, one CSV row per factor-A level.
pub fn read_matrix_csv<T: FromStr>(reader: impl Read, name: &str) -> Result<Grid<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, s)| {
                s.parse::<T>().map_err(|_| {
                    AnovaError::Parse(format!(
                        "{name}: cannot parse {s:?} at row {}, column {}",
                        r + 1,
                        c + 1
                    ))
                })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    Grid::from_rows(rows).map_err(|e| match e {
        AnovaError::DimensionMismatch(m) => AnovaError::DimensionMismatch(format!("{name}: {m}")),
        other => other,
    })
}

pub fn read_matrix_csv_path<T: FromStr>(path: &Path, name: &str) -> Result<Grid<T>> {
    read_matrix_csv(File::open(path)?, name)
}

pub fn write_matrix_csv<T: ToString>(grid: &Grid<T>, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(writer);
    for i in 0..grid.rows() {
        w.write_record(grid.row(i).iter().map(T::to_string))?;
    }
    w.flush()?;
    Ok(())
}

/// Summary table from `mean.csv`, `n.csv`, `var.csv`.
pub fn read_summary_triplet(mean: &Path, n: &Path, var: &Path) -> Result<CellSummaryTable> {
    CellSummaryTable::from_matrices(
        read_matrix_csv_path(mean, "mean")?,
        read_matrix_csv_path(n, "n")?,
        read_matrix_csv_path(var, "var")?,
    )
}

/// `{a, b, mean, n, var}` with `a × b` nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryDocument {
    pub a: usize,
    pub b: usize,
    pub mean: Vec<Vec<f64>>,
    pub n: Vec<Vec<usize>>,
    pub var: Vec<Vec<f64>>,
}

impl SummaryDocument {
    pub fn from_table(t: &CellSummaryTable) -> Self {
        SummaryDocument {
            a: t.a(),
            b: t.b(),
            mean: t.means().to_rows(),
            n: t.layout().sizes().to_rows(),
            var: t.vars().to_rows(),
        }
    }

    pub fn into_table(self) -> Result<CellSummaryTable> {
        let (a, b) = (self.a, self.b);
        let table = CellSummaryTable::from_matrices(
            Grid::from_rows(self.mean)?,
            Grid::from_rows(self.n)?,
            Grid::from_rows(self.var)?,
        )?;
        if (table.a(), table.b()) != (a, b) {
            return Err(AnovaError::DimensionMismatch(format!(
                "declared {a}x{b}, matrices are {}x{}",
                table.a(),
                table.b()
            )));
        }
        Ok(table)
    }
}

pub fn read_summary_json(reader: impl Read) -> Result<CellSummaryTable> {
    serde_json::from_reader::<_, SummaryDocument>(reader)?.into_table()
}

pub fn read_summary_json_path(path: &Path) -> Result<CellSummaryTable> {
    read_summary_json(std::io::BufReader::new(File::open(path)?))
}

pub fn write_summary_json(table: &CellSummaryTable, writer: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(writer, &SummaryDocument::from_table(table))?;
    Ok(())
}

/// One value per line, full round-trip precision.
pub fn write_null_sample(values: &[f64], writer: impl Write) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for v in values {
        writeln!(w, "{v:?}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_null_sample(reader: impl Read) -> Result<Vec<f64>> {
    let mut s = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut s)?;
    s.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse()
                .map_err(|_| AnovaError::Parse(format!("not a number: {l:?}")))
        })
        .collect()
}
