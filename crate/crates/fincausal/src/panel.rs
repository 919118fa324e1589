//! Date-aligned multivariate daily series: ingestion, alignment, and
//! sliding-window generation.
//!
//! All types are immutable after construction and operations are pure, so
//! values can be shared freely across threads.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, Months, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default minimum number of observations a window slice must contain.
pub const DEFAULT_MIN_WINDOW_OBS: usize = 100;

/// A complete date-indexed panel of daily factor returns.
///
/// Values are stored as an `N x T` matrix of decimal fractions
/// (`0.01` = 1%), one row per factor, one column per date.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl ReturnPanel {
    /// Builds a panel, checking the invariants: strictly increasing dates,
    /// unique names, matching dimensions, finite values.
    pub fn new(dates: Vec<NaiveDate>, names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != names.len() || values.ncols() != dates.len() {
            return Err(Error::InvalidPanel(format!(
                "values is {}x{} but got {} names and {} dates",
                values.nrows(),
                values.ncols(),
                names.len(),
                dates.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPanel("dates are not strictly increasing".into()));
        }
        let unique: BTreeSet<&String> = names.iter().collect();
        if unique.len() != names.len() {
            return Err(Error::InvalidPanel("factor names are not unique".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPanel("values contain non-finite entries".into()));
        }
        Ok(Self { dates, names, values })
    }

    pub fn n_factors(&self) -> usize {
        self.names.len()
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// `N x T` value matrix, rows ordered as [`Self::names`].
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn factor_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFactor(name.to_string()))
    }

    /// Return series of a single factor.
    pub fn series(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.factor_index(name)?;
        Ok(self.values.row(idx).iter().copied().collect())
    }

    /// Restricts the panel to the given dates (which must all be present).
    pub fn on_dates(&self, keep: &[NaiveDate]) -> Result<Self> {
        let positions = positions_of(&self.dates, keep)?;
        let values = self.values.select_columns(&positions);
        Self::new(keep.to_vec(), self.names.clone(), values)
    }

    /// Writes the panel in the same delimiter-separated schema
    /// [`load_panel`] reads (comma separated, ISO dates, header row).
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        let mut header = vec!["date".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (t, date) in self.dates.iter().enumerate() {
            let mut rec = vec![date.format("%Y-%m-%d").to_string()];
            for i in 0..self.n_factors() {
                rec.push(self.values[(i, t)].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Daily open/close levels of a market indicator.
///
/// For spread data with a single daily level, open and close hold the same
/// value.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    dates: Vec<NaiveDate>,
    open: Vec<f64>,
    close: Vec<f64>,
}

impl IndicatorSeries {
    pub fn new(dates: Vec<NaiveDate>, open: Vec<f64>, close: Vec<f64>) -> Result<Self> {
        if open.len() != dates.len() || close.len() != dates.len() {
            return Err(Error::InvalidPanel("indicator vectors must match dates".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPanel("dates are not strictly increasing".into()));
        }
        if open.iter().chain(close.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPanel("indicator values must be finite".into()));
        }
        Ok(Self { dates, open, close })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn open(&self) -> &[f64] {
        &self.open
    }

    pub fn close(&self) -> &[f64] {
        &self.close
    }

    pub fn on_dates(&self, keep: &[NaiveDate]) -> Result<Self> {
        let positions = positions_of(&self.dates, keep)?;
        Self::new(
            keep.to_vec(),
            positions.iter().map(|&p| self.open[p]).collect(),
            positions.iter().map(|&p| self.close[p]).collect(),
        )
    }
}

fn positions_of(have: &[NaiveDate], want: &[NaiveDate]) -> Result<Vec<usize>> {
    want.iter()
        .map(|d| {
            have.binary_search(d)
                .map_err(|_| Error::InvalidPanel(format!("date {d} not present in series")))
        })
        .collect()
}

/// One inference window of the sliding-window analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub index: usize,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub length_months: u32,
    pub step_months: u32,
}

/// Anything carrying a date index that can be restricted to a subset of
/// dates. Used by [`align`].
pub trait DateIndexed: Sized {
    fn date_index(&self) -> &[NaiveDate];
    fn restrict(&self, keep: &[NaiveDate]) -> Result<Self>;
}

impl DateIndexed for ReturnPanel {
    fn date_index(&self) -> &[NaiveDate] {
        self.dates()
    }
    fn restrict(&self, keep: &[NaiveDate]) -> Result<Self> {
        self.on_dates(keep)
    }
}

impl DateIndexed for IndicatorSeries {
    fn date_index(&self) -> &[NaiveDate] {
        self.dates()
    }
    fn restrict(&self, keep: &[NaiveDate]) -> Result<Self> {
        self.on_dates(keep)
    }
}

/// A loaded panel together with the number of source rows dropped because a
/// cell was missing or unparseable.
#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub panel: ReturnPanel,
    pub dropped_rows: usize,
}

/// A loaded indicator series, with the drop count as above.
#[derive(Debug, Clone)]
pub struct LoadedIndicator {
    pub series: IndicatorSeries,
    pub dropped_rows: usize,
}

/// Reads a delimiter-separated file (comma or tab, autodetected from the
/// header line) into a [`ReturnPanel`].
///
/// `value_columns` selects and orders the factor columns; pass an empty
/// slice to take every non-date column in header order. Values are
/// multiplied by `scale` (e.g. `0.01` when the source stores percents).
/// Rows with any missing or unparseable cell are dropped and counted.
pub fn load_panel<P: AsRef<Path>>(
    path: P,
    date_column: &str,
    value_columns: &[String],
    scale: f64,
) -> Result<LoadedPanel> {
    let table = read_table(path.as_ref(), date_column, value_columns)?;
    let n = table.columns.len();
    let t = table.rows.len();
    let mut values = DMatrix::<f64>::zeros(n, t);
    for (t_idx, row) in table.rows.iter().enumerate() {
        for (i, v) in row.cells.iter().enumerate() {
            values[(i, t_idx)] = v * scale;
        }
    }
    let dates: Vec<NaiveDate> = table.rows.iter().map(|r| r.date).collect();
    let panel = ReturnPanel::new(dates, table.columns, values)?;
    Ok(LoadedPanel { panel, dropped_rows: table.dropped })
}

/// Reads an indicator file with daily open/close columns. For series with a
/// single daily level (e.g. a yield spread), pass the same column name for
/// both.
pub fn load_indicator<P: AsRef<Path>>(
    path: P,
    date_column: &str,
    open_column: &str,
    close_column: &str,
) -> Result<LoadedIndicator> {
    let cols = if open_column == close_column {
        vec![open_column.to_string()]
    } else {
        vec![open_column.to_string(), close_column.to_string()]
    };
    let table = read_table(path.as_ref(), date_column, &cols)?;
    let dates: Vec<NaiveDate> = table.rows.iter().map(|r| r.date).collect();
    let open: Vec<f64> = table.rows.iter().map(|r| r.cells[0]).collect();
    let close: Vec<f64> = table
        .rows
        .iter()
        .map(|r| r.cells[r.cells.len() - 1])
        .collect();
    let series = IndicatorSeries::new(dates, open, close)?;
    Ok(LoadedIndicator { series, dropped_rows: table.dropped })
}

struct ParsedRow {
    date: NaiveDate,
    cells: Vec<f64>,
}

struct ParsedTable {
    columns: Vec<String>,
    rows: Vec<ParsedRow>,
    dropped: usize,
}

fn read_table(path: &Path, date_column: &str, value_columns: &[String]) -> Result<ParsedTable> {
    let raw = std::fs::read_to_string(path)?;
    let delimiter = sniff_delimiter(&raw);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(raw.as_bytes());

    let header = reader.headers()?.clone();
    let find = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let date_idx = find(date_column)?;
    let (columns, col_idx): (Vec<String>, Vec<usize>) = if value_columns.is_empty() {
        header
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_idx)
            .map(|(i, h)| (h.to_string(), i))
            .unzip()
    } else {
        let mut names = Vec::new();
        let mut idx = Vec::new();
        for c in value_columns {
            names.push(c.clone());
            idx.push(find(c)?);
        }
        (names, idx)
    };
    if columns.is_empty() {
        return Err(Error::InvalidPanel("no value columns selected".into()));
    }

    let mut rows: Vec<ParsedRow> = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record?;
        let parsed = parse_row(&record, date_idx, &col_idx);
        match parsed {
            Some(row) => rows.push(row),
            None => dropped += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::NoUsableRows { dropped });
    }
    rows.sort_by_key(|r| r.date);
    if rows.windows(2).any(|w| w[0].date == w[1].date) {
        return Err(Error::InvalidPanel("duplicate dates in input file".into()));
    }
    Ok(ParsedTable { columns, rows, dropped })
}

fn parse_row(record: &csv::StringRecord, date_idx: usize, col_idx: &[usize]) -> Option<ParsedRow> {
    let date = parse_date(record.get(date_idx)?)?;
    let mut cells = Vec::with_capacity(col_idx.len());
    for &i in col_idx {
        let cell = record.get(i)?;
        let v: f64 = cell.parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        cells.push(v);
    }
    Some(ParsedRow { date, cells })
}

/// Accepts ISO-8601 (`2019-12-31`) and compact (`20191231`) dates.
fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(s, "%Y%m%d"))
        .ok()
}

fn sniff_delimiter(raw: &str) -> u8 {
    let first = raw.lines().next().unwrap_or("");
    if first.matches('\t').count() > first.matches(',').count() {
        b'\t'
    } else {
        b','
    }
}

/// Sorted intersection of several date vectors. Errors if empty.
pub fn aligned_dates(sets: &[&[NaiveDate]]) -> Result<Vec<NaiveDate>> {
    if sets.is_empty() {
        return Err(Error::InvalidPanel("align requires at least one input".into()));
    }
    let mut common: BTreeSet<NaiveDate> = sets[0].iter().copied().collect();
    for s in &sets[1..] {
        let next: BTreeSet<NaiveDate> = s.iter().copied().collect();
        common = common.intersection(&next).copied().collect();
    }
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(common.into_iter().collect())
}

/// Restricts every input to the shared date intersection. Column order of
/// each input is preserved.
pub fn align<T: DateIndexed>(items: &[T]) -> Result<Vec<T>> {
    let sets: Vec<&[NaiveDate]> = items.iter().map(|i| i.date_index()).collect();
    let common = aligned_dates(&sets)?;
    items.iter().map(|i| i.restrict(&common)).collect()
}

/// Generates the sliding windows covering `[first_date, last_date]`.
///
/// Window starts are anchored to the first of the month containing
/// `first_date` and advance by `step_months`; each window ends
/// `length_months` later, inclusive (`end = start + length_months - 1 day`).
/// Windows whose end falls past `last_date` are excluded. Month anchoring
/// keeps "18 months" exact regardless of which business day the data starts
/// on.
pub fn make_windows(
    first_date: NaiveDate,
    last_date: NaiveDate,
    length_months: u32,
    step_months: u32,
) -> Result<Vec<WindowSpec>> {
    if first_date >= last_date {
        return Err(Error::Config("first_date must precede last_date".into()));
    }
    if length_months == 0 || step_months == 0 {
        return Err(Error::Config("window and step lengths must be positive".into()));
    }
    let anchor = first_date.with_day(1).expect("day 1 is always valid");
    let mut windows = Vec::new();
    let mut k = 0usize;
    loop {
        let start = match anchor.checked_add_months(Months::new(step_months * k as u32)) {
            Some(d) => d,
            None => break,
        };
        let end = match start.checked_add_months(Months::new(length_months)) {
            Some(d) => d.pred_opt().expect("not date MIN"),
            None => break,
        };
        if end > last_date {
            break;
        }
        windows.push(WindowSpec {
            index: k,
            start_date: start,
            end_date: end,
            length_months,
            step_months,
        });
        k += 1;
    }
    if windows.is_empty() {
        return Err(Error::SpanTooShort { first: first_date, last: last_date, length_months });
    }
    Ok(windows)
}

/// A synthetic trading calendar: `t` consecutive weekdays starting from
/// `first` (weekend days skipped, no holidays).
pub fn weekday_calendar(first: NaiveDate, t: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(t);
    let mut day = first;
    while dates.len() < t {
        if !matches!(day.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun) {
            dates.push(day);
        }
        day = day.succ_opt().expect("calendar overflow");
    }
    dates
}

/// Restricts `panel` to the dates inside `w`, requiring at least `min_obs`
/// observations.
pub fn slice(panel: &ReturnPanel, w: &WindowSpec, min_obs: usize) -> Result<ReturnPanel> {
    let keep: Vec<NaiveDate> = panel
        .dates()
        .iter()
        .copied()
        .filter(|d| *d >= w.start_date && *d <= w.end_date)
        .collect();
    if keep.len() < min_obs.max(1) {
        return Err(Error::UndersizedSlice { index: w.index, got: keep.len(), min: min_obs });
    }
    panel.on_dates(&keep)
}
