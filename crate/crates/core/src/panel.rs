//! Panel ingestion, validation and centering.
//!
//! A [`Panel`] stores an N×T matrix with series along rows and time along
//! columns, so one time step is a contiguous column.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Layout of a CSV file on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// One row per time period, one column per series.
    RowsAreTime,
    /// One row per series, one column per time period.
    RowsAreSeries,
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rows_are_time" | "rows-are-time" | "time" => Ok(Self::RowsAreTime),
            "rows_are_series" | "rows-are-series" | "series" => Ok(Self::RowsAreSeries),
            other => Err(invalid(format!(
                "unknown orientation {other:?} (expected rows_are_time or rows_are_series)"
            ))),
        }
    }
}

/// Labels and preprocessing flags carried alongside the values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PanelMeta {
    pub series_labels: Option<Vec<String>>,
    pub time_labels: Option<Vec<String>>,
    pub centered: bool,
    pub standardized: bool,
}

/// A validated panel of N series observed over T periods.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    values: DMatrix<f64>,
    meta: PanelMeta,
}

impl Panel {
    /// Wraps an N×T matrix (series × time).
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        Self::with_meta(values, PanelMeta::default())
    }

    pub fn with_meta(values: DMatrix<f64>, meta: PanelMeta) -> Result<Self> {
        let (n, t) = values.shape();
        if n < 2 || t < 2 {
            return Err(invalid(format!("panel must be at least 2×2, got {n}×{t}")));
        }
        for j in 0..t {
            for i in 0..n {
                if !values[(i, j)].is_finite() {
                    return Err(Error::NonFinite { series: i + 1, time: j + 1 });
                }
            }
        }
        if let Some(labels) = &meta.series_labels {
            if labels.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: labels.len() });
            }
        }
        if let Some(labels) = &meta.time_labels {
            if labels.len() != t {
                return Err(Error::DimensionMismatch { expected: t, actual: labels.len() });
            }
        }
        Ok(Self { values, meta })
    }

    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_periods(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn meta(&self) -> &PanelMeta {
        &self.meta
    }

    /// Observation vector at zero-based column `index`.
    pub fn observation(&self, index: usize) -> DVectorView<'_, f64> {
        self.values.column(index)
    }

    /// Copy of the panel with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { values: &self.values * c, meta: self.meta.clone() }
    }

    /// Periods `start..start + len` (zero-based) as a new panel.
    pub fn periods(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.n_periods() {
            return Err(invalid(format!(
                "period range {start}..{} exceeds T = {}",
                start + len,
                self.n_periods()
            )));
        }
        let values = self.values.columns(start, len).into_owned();
        let mut meta = self.meta.clone();
        if let Some(labels) = &mut meta.time_labels {
            *labels = labels[start..start + len].to_vec();
        }
        Self::with_meta(values, meta)
    }

    /// Subtracts from each series its mean over the first `window` periods.
    pub fn center(&self, window: usize) -> Result<Self> {
        self.check_window(window)?;
        let mut values = self.values.clone();
        for mut row in values.row_iter_mut() {
            let mean = row.columns(0, window).sum() / window as f64;
            row.add_scalar_mut(-mean);
        }
        let mut meta = self.meta.clone();
        meta.centered = true;
        Ok(Self { values, meta })
    }

    /// Divides each series by its standard deviation over the first
    /// `window` periods. Off by default in every pipeline.
    pub fn standardize(&self, window: usize) -> Result<Self> {
        self.check_window(window)?;
        if window < 2 {
            return Err(invalid("standardization needs a window of at least 2"));
        }
        let mut values = self.values.clone();
        for (i, mut row) in values.row_iter_mut().enumerate() {
            let head = row.columns(0, window);
            let mean = head.sum() / window as f64;
            let var = head.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (window - 1) as f64;
            if var <= 0.0 {
                return Err(invalid(format!("series {} is constant over the window", i + 1)));
            }
            row /= var.sqrt();
        }
        let mut meta = self.meta.clone();
        meta.standardized = true;
        Ok(Self { values, meta })
    }

    fn check_window(&self, window: usize) -> Result<()> {
        if window == 0 || window > self.n_periods() {
            return Err(invalid(format!(
                "window m = {window} outside 1..={}",
                self.n_periods()
            )));
        }
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>, orientation: Orientation) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file, orientation)
    }

    /// Parses a numeric grid with an optional header row and an optional
    /// label column. A header row is recognised by any non-numeric field in
    /// the first record; a label column by a non-numeric first field in the
    /// first data record.
    pub fn read_csv<R: Read>(reader: R, orientation: Orientation) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            records.push(rec.iter().map(str::to_owned).collect::<Vec<_>>());
        }
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }

        let is_number = |s: &str| s.parse::<f64>().is_ok();
        let has_header_row = records[0].iter().any(|f| !is_number(f));
        let data_start = usize::from(has_header_row);
        if data_start >= records.len() {
            return Err(Error::EmptyInput);
        }
        let has_label_col = !is_number(&records[data_start][0]);
        let col_start = usize::from(has_label_col);

        let width = records[data_start].len();
        if width <= col_start {
            return Err(Error::EmptyInput);
        }
        for (idx, rec) in records.iter().enumerate() {
            if rec.len() != width {
                return Err(Error::RaggedRow { row: idx + 1, expected: width, found: rec.len() });
            }
        }

        let n_rows = records.len() - data_start;
        let n_cols = width - col_start;
        let mut grid = DMatrix::<f64>::zeros(n_rows, n_cols);
        for (r, rec) in records[data_start..].iter().enumerate() {
            for (c, field) in rec[col_start..].iter().enumerate() {
                let parsed = field.parse::<f64>().ok().filter(|v| v.is_finite());
                grid[(r, c)] = parsed.ok_or_else(|| Error::ParseCell {
                    row: data_start + r + 1,
                    column: col_start + c + 1,
                    value: field.clone(),
                })?;
            }
        }

        let header: Option<Vec<String>> =
            has_header_row.then(|| records[0][col_start..].to_vec());
        let row_labels: Option<Vec<String>> = has_label_col
            .then(|| records[data_start..].iter().map(|r| r[0].clone()).collect());

        let (values, series_labels, time_labels) = match orientation {
            Orientation::RowsAreTime => (grid.transpose(), header, row_labels),
            Orientation::RowsAreSeries => (grid, row_labels, header),
        };
        Self::with_meta(
            values,
            PanelMeta { series_labels, time_labels, ..PanelMeta::default() },
        )
    }

    pub fn save_csv(&self, path: impl AsRef<Path>, orientation: Orientation) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file), orientation)
    }

    /// Writes the panel with shortest round-trip float formatting, so a
    /// reload reproduces every value bit for bit.
    pub fn write_csv<W: Write>(&self, writer: W, orientation: Orientation) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        let grid = match orientation {
            Orientation::RowsAreTime => self.values.transpose(),
            Orientation::RowsAreSeries => self.values.clone(),
        };
        let (col_labels, row_labels) = match orientation {
            Orientation::RowsAreTime => (&self.meta.series_labels, &self.meta.time_labels),
            Orientation::RowsAreSeries => (&self.meta.time_labels, &self.meta.series_labels),
        };
        if let Some(labels) = col_labels {
            let mut header = Vec::with_capacity(labels.len() + 1);
            if row_labels.is_some() {
                header.push(String::new());
            }
            header.extend(labels.iter().cloned());
            wtr.write_record(&header)?;
        }
        for (r, row) in grid.row_iter().enumerate() {
            let mut fields = Vec::with_capacity(row.len() + 1);
            if let Some(labels) = row_labels {
                fields.push(labels[r].clone());
            }
            fields.extend(row.iter().map(|v| format!("{v:?}")));
            wtr.write_record(&fields)?;
        }
        wtr.flush()?;
        Ok(())
    }
}
