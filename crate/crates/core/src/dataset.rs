//! Monthly series ingestion, in/out-of-sample splitting, and the lagged
//! supervised design matrix every model trains on.
//!
//! A [`SeriesFrame`] is a block of aligned monthly columns with no role
//! constraints (economic or keyword files on their own). A
//! [`TimeSeriesTable`] is a frame with exactly one target column.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("malformed month {value:?} on data row {row} (expected YYYY-MM)")]
    MalformedDate { row: usize, value: String },
    #[error("gap in monthly index: {after} is followed by {found}")]
    GapInIndex { after: YearMonth, found: YearMonth },
    #[error("duplicate month {month}")]
    DuplicateMonth { month: YearMonth },
    #[error("months out of order: {after} is followed by {found}")]
    UnorderedIndex { after: YearMonth, found: YearMonth },
    #[error("non-numeric cell {value:?} in column {column:?} on data row {row}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("no column is tagged as target")]
    NoTargetColumn,
    #[error("more than one column is tagged as target: {0:?}")]
    MultipleTargets(Vec<String>),
    #[error("column {0:?} has no role in the schema")]
    UntaggedColumn(String),
    #[error("schema column {0:?} is missing from the file")]
    MissingColumn(String),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("first header cell must be \"month\", found {0:?}")]
    BadHeader(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("column {name:?} has {found} values, expected {expected}")]
    ColumnLength {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("table has no rows")]
    EmptyTable,
    #[error("split month {split} is not strictly inside {first}..={last}")]
    SplitOutOfRange {
        split: YearMonth,
        first: YearMonth,
        last: YearMonth,
    },
    #[error("frames are not aligned: {0}")]
    MisalignedIndex(String),
    #[error("month range {from}..={to} is outside the table")]
    RangeOutOfTable { from: YearMonth, to: YearMonth },
    #[error("series of length {len} too short for horizon {horizon} with deepest lag {deepest_lag}")]
    SeriesTooShort {
        len: usize,
        horizon: usize,
        deepest_lag: usize,
    },
    #[error("unknown exogenous column {0:?}")]
    UnknownExogenousColumn(String),
    #[error("invalid lag spec: {0}")]
    InvalidLagSpec(String),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("schema error: {0}")]
    Schema(String),
}

impl From<csv::Error> for DatasetError {
    fn from(e: csv::Error) -> Self {
        DatasetError::Csv(e.to_string())
    }
}

/// Calendar month. Ordered chronologically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u8 {
        self.month
    }

    fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }

    fn from_ordinal(n: i64) -> Self {
        Self {
            year: n.div_euclid(12) as i32,
            month: (n.rem_euclid(12) + 1) as u8,
        }
    }

    pub fn add_months(self, n: i64) -> Self {
        Self::from_ordinal(self.ordinal() + n)
    }

    /// Signed number of months from `self` to `later`.
    pub fn months_until(self, later: YearMonth) -> i64 {
        later.ordinal() - self.ordinal()
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let (y, m) = s.trim().split_once('-').ok_or(())?;
        if y.len() != 4 || m.len() != 2 || !y.bytes().chain(m.bytes()).all(|b| b.is_ascii_digit())
        {
            return Err(());
        }
        let year = y.parse().map_err(|_| ())?;
        let month = m.parse().map_err(|_| ())?;
        YearMonth::new(year, month).ok_or(())
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map_err(|_| serde::de::Error::custom(format!("invalid month {s:?}, expected YYYY-MM")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Target,
    Economic,
    Sii,
}

/// Column name to role map, read from a JSON object such as
/// `{"arrivals": "target", "gdp": "economic"}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schema(pub IndexMap<String, Role>);

impl Schema {
    pub fn from_json(text: &str) -> Result<Self, DatasetError> {
        serde_json::from_str(text).map_err(|e| DatasetError::Schema(e.to_string()))
    }

    pub fn role(&self, column: &str) -> Option<Role> {
        self.0.get(column).copied()
    }
}

impl<S: Into<String>> FromIterator<(S, Role)> for Schema {
    fn from_iter<I: IntoIterator<Item = (S, Role)>>(iter: I) -> Self {
        Schema(iter.into_iter().map(|(k, r)| (k.into(), r)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub role: Role,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, role: Role, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            role,
            values,
        }
    }
}

/// Aligned monthly columns over a gap-free index.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesFrame {
    start: YearMonth,
    len: usize,
    columns: Vec<Column>,
}

impl SeriesFrame {
    pub fn new(start: YearMonth, len: usize, columns: Vec<Column>) -> Result<Self, DatasetError> {
        for (i, c) in columns.iter().enumerate() {
            if c.values.len() != len {
                return Err(DatasetError::ColumnLength {
                    name: c.name.clone(),
                    expected: len,
                    found: c.values.len(),
                });
            }
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(DatasetError::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(Self {
            start,
            len,
            columns,
        })
    }

    /// Reads a `month,<col>,...` CSV. Columns are assigned roles by
    /// `role_of`; a column it rejects is an error.
    pub fn read_csv<R: Read>(
        source: R,
        role_of: impl Fn(&str) -> Option<Role>,
    ) -> Result<Self, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(source);
        let headers = reader.headers()?.clone();
        let first = headers.get(0).unwrap_or("");
        if first != "month" {
            return Err(DatasetError::BadHeader(first.to_string()));
        }
        let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut roles = Vec::with_capacity(names.len());
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(DatasetError::DuplicateColumn(n.clone()));
            }
            roles.push(role_of(n).ok_or_else(|| DatasetError::UntaggedColumn(n.clone()))?);
        }

        let mut months: Vec<YearMonth> = Vec::new();
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        for (row, rec) in reader.records().enumerate() {
            let rec = rec?;
            let row = row + 1;
            if rec.len() != names.len() + 1 {
                return Err(DatasetError::RaggedRow {
                    row,
                    expected: names.len() + 1,
                    found: rec.len(),
                });
            }
            let raw = &rec[0];
            let month: YearMonth = raw.parse().map_err(|_| DatasetError::MalformedDate {
                row,
                value: raw.to_string(),
            })?;
            if let Some(&prev) = months.last() {
                match prev.months_until(month) {
                    1 => {}
                    0 => return Err(DatasetError::DuplicateMonth { month }),
                    d if d < 0 => {
                        return Err(if months.contains(&month) {
                            DatasetError::DuplicateMonth { month }
                        } else {
                            DatasetError::UnorderedIndex {
                                after: prev,
                                found: month,
                            }
                        })
                    }
                    _ => {
                        return Err(DatasetError::GapInIndex {
                            after: prev,
                            found: month,
                        })
                    }
                }
            }
            months.push(month);
            for (j, cell) in rec.iter().skip(1).enumerate() {
                let v: f64 = cell
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| DatasetError::NonNumericCell {
                        row,
                        column: names[j].clone(),
                        value: cell.to_string(),
                    })?;
                values[j].push(v);
            }
        }
        let start = *months.first().ok_or(DatasetError::EmptyTable)?;
        let columns = names
            .into_iter()
            .zip(roles)
            .zip(values)
            .map(|((name, role), values)| Column { name, role, values })
            .collect();
        SeriesFrame::new(start, months.len(), columns)
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["month".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for i in 0..self.len {
            let mut rec = vec![self.month(i).to_string()];
            rec.extend(self.columns.iter().map(|c| c.values[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| DatasetError::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn last_month(&self) -> YearMonth {
        self.start.add_months(self.len as i64 - 1)
    }

    pub fn month(&self, i: usize) -> YearMonth {
        self.start.add_months(i as i64)
    }

    pub fn months(&self) -> Vec<YearMonth> {
        (0..self.len).map(|i| self.month(i)).collect()
    }

    /// Index of `month`, if inside the frame.
    pub fn index_of(&self, month: YearMonth) -> Option<usize> {
        let d = self.start.months_until(month);
        (d >= 0 && (d as usize) < self.len).then_some(d as usize)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Rows `from..to` (half-open, by position).
    pub fn slice(&self, from: usize, to: usize) -> SeriesFrame {
        assert!(from <= to && to <= self.len, "slice out of bounds");
        SeriesFrame {
            start: self.month(from),
            len: to - from,
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    role: c.role,
                    values: c.values[from..to].to_vec(),
                })
                .collect(),
        }
    }

    /// Months `from..=to`.
    pub fn restrict(&self, from: YearMonth, to: YearMonth) -> Result<SeriesFrame, DatasetError> {
        match (self.index_of(from), self.index_of(to)) {
            (Some(a), Some(b)) if a <= b => Ok(self.slice(a, b + 1)),
            _ => Err(DatasetError::RangeOutOfTable { from, to }),
        }
    }

    /// Appends the columns of `other`, which must cover the same months.
    pub fn merge(mut self, other: SeriesFrame) -> Result<SeriesFrame, DatasetError> {
        if self.start != other.start || self.len != other.len {
            return Err(DatasetError::MisalignedIndex(format!(
                "{}..={} vs {}..={}",
                self.start,
                self.last_month(),
                other.start,
                other.last_month()
            )));
        }
        for c in other.columns {
            if self.column(&c.name).is_some() {
                return Err(DatasetError::DuplicateColumn(c.name));
            }
            self.columns.push(c);
        }
        Ok(self)
    }

    /// Intersection of the month ranges of all frames, if nonempty.
    pub fn common_range(frames: &[&SeriesFrame]) -> Option<(YearMonth, YearMonth)> {
        let from = frames.iter().map(|f| f.start).max()?;
        let to = frames.iter().map(|f| f.last_month()).min()?;
        (from <= to).then_some((from, to))
    }
}

/// Monthly table with exactly one target column.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    frame: SeriesFrame,
    target: usize,
}

impl TimeSeriesTable {
    pub fn from_frame(frame: SeriesFrame) -> Result<Self, DatasetError> {
        if frame.is_empty() {
            return Err(DatasetError::EmptyTable);
        }
        let targets: Vec<usize> = frame
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == Role::Target)
            .map(|(i, _)| i)
            .collect();
        match targets.as_slice() {
            [] => Err(DatasetError::NoTargetColumn),
            [t] => Ok(Self {
                frame,
                target: *t,
            }),
            many => Err(DatasetError::MultipleTargets(
                many.iter().map(|&i| frame.columns[i].name.clone()).collect(),
            )),
        }
    }

    pub fn frame(&self) -> &SeriesFrame {
        &self.frame
    }

    pub fn into_frame(self) -> SeriesFrame {
        self.frame
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), DatasetError> {
        self.frame.write_csv(sink)
    }

    pub fn len(&self) -> usize {
        self.frame.len
    }

    pub fn is_empty(&self) -> bool {
        self.frame.len == 0
    }

    pub fn start(&self) -> YearMonth {
        self.frame.start
    }

    pub fn last_month(&self) -> YearMonth {
        self.frame.last_month()
    }

    pub fn month(&self, i: usize) -> YearMonth {
        self.frame.month(i)
    }

    pub fn months(&self) -> Vec<YearMonth> {
        self.frame.months()
    }

    pub fn index_of(&self, month: YearMonth) -> Option<usize> {
        self.frame.index_of(month)
    }

    pub fn columns(&self) -> &[Column] {
        &self.frame.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.frame.column(name)
    }

    pub fn target(&self) -> &Column {
        &self.frame.columns[self.target]
    }

    pub fn target_values(&self) -> &[f64] {
        &self.target().values
    }

    /// Rows `from..to` by position. Panics when out of bounds or empty.
    pub fn slice(&self, from: usize, to: usize) -> TimeSeriesTable {
        assert!(to > from, "empty table slice");
        TimeSeriesTable {
            frame: self.frame.slice(from, to),
            target: self.target,
        }
    }

    /// Appends columns of another aligned frame (which must not carry a
    /// second target).
    pub fn with_frame(self, other: SeriesFrame) -> Result<TimeSeriesTable, DatasetError> {
        TimeSeriesTable::from_frame(self.frame.merge(other)?)
    }
}

/// Parses a CSV with a role schema into a table.
pub fn load_series<R: Read>(source: R, schema: &Schema) -> Result<TimeSeriesTable, DatasetError> {
    let frame = SeriesFrame::read_csv(source, |name| schema.role(name))?;
    for name in schema.0.keys() {
        if frame.column(name).is_none() {
            return Err(DatasetError::MissingColumn(name.clone()));
        }
    }
    TimeSeriesTable::from_frame(frame)
}

/// Splits into months before `first_out_month` and the rest.
pub fn split_in_out(
    table: &TimeSeriesTable,
    first_out_month: YearMonth,
) -> Result<(TimeSeriesTable, TimeSeriesTable), DatasetError> {
    match table.index_of(first_out_month) {
        Some(i) if i > 0 => Ok((table.slice(0, i), table.slice(i, table.len()))),
        _ => Err(DatasetError::SplitOutOfRange {
            split: first_out_month,
            first: table.start(),
            last: table.last_month(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExogenousLag {
    pub column: String,
    pub lags: usize,
}

/// Lag structure: `target_lags` autoregressive lags, per-column exogenous
/// lag counts, and the direct forecast horizon in months.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    pub target_lags: usize,
    pub exogenous: Vec<ExogenousLag>,
    pub horizon: usize,
}

impl LagSpec {
    pub fn new(target_lags: usize, exogenous: Vec<ExogenousLag>, horizon: usize) -> Self {
        Self {
            target_lags,
            exogenous,
            horizon,
        }
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.target_lags == 0 {
            return Err(DatasetError::InvalidLagSpec("target_lags must be >= 1".into()));
        }
        if self.horizon == 0 {
            return Err(DatasetError::InvalidLagSpec("horizon must be >= 1".into()));
        }
        if let Some(e) = self.exogenous.iter().find(|e| e.lags == 0) {
            return Err(DatasetError::InvalidLagSpec(format!(
                "exogenous column {:?} needs at least one lag",
                e.column
            )));
        }
        Ok(())
    }

    pub fn deepest_lag(&self) -> usize {
        self.exogenous
            .iter()
            .map(|e| e.lags)
            .fold(self.target_lags, usize::max)
    }

    /// Predictor width including the intercept column.
    pub fn width(&self) -> usize {
        1 + self.target_lags + self.exogenous.iter().map(|e| e.lags).sum::<usize>()
    }
}

/// Lagged design matrix for one horizon. Row `i` pairs the predictors known
/// at `origin_months[i]` with the target `horizon` months later. Column 0 is
/// the intercept constant 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedSet {
    pub predictors: Matrix,
    pub targets: Vec<f64>,
    pub origin_months: Vec<YearMonth>,
    /// Predictors at the last month of the table, for the out-of-sample
    /// forecast `horizon` months ahead.
    pub latest_predictor_row: Vec<f64>,
    pub latest_origin: YearMonth,
    pub feature_names: Vec<String>,
    pub horizon: usize,
}

impl SupervisedSet {
    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn width(&self) -> usize {
        self.predictors.cols()
    }

    /// Rows at the given positions, in order. Latest-row bookkeeping is kept.
    pub fn select_rows(&self, indices: &[usize]) -> SupervisedSet {
        SupervisedSet {
            predictors: self.predictors.select_rows(indices),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            origin_months: indices.iter().map(|&i| self.origin_months[i]).collect(),
            latest_predictor_row: self.latest_predictor_row.clone(),
            latest_origin: self.latest_origin,
            feature_names: self.feature_names.clone(),
            horizon: self.horizon,
        }
    }

    /// First `n` rows.
    pub fn head(&self, n: usize) -> SupervisedSet {
        let idx: Vec<usize> = (0..n.min(self.rows())).collect();
        self.select_rows(&idx)
    }

    /// Last `n` rows.
    pub fn tail(&self, n: usize) -> SupervisedSet {
        let n = n.min(self.rows());
        let idx: Vec<usize> = (self.rows() - n..self.rows()).collect();
        self.select_rows(&idx)
    }
}

fn predictor_row(
    t: usize,
    target: &[f64],
    exo: &[(&[f64], usize)],
    target_lags: usize,
    out: &mut Vec<f64>,
) {
    out.push(1.0);
    out.extend((0..target_lags).map(|k| target[t - k]));
    for &(series, lags) in exo {
        out.extend((0..lags).map(|k| series[t - k]));
    }
}

pub fn build_design_matrix(
    table: &TimeSeriesTable,
    spec: &LagSpec,
) -> Result<SupervisedSet, DatasetError> {
    spec.validate()?;
    let target = table.target_values();
    let exo: Vec<(&[f64], usize)> = spec
        .exogenous
        .iter()
        .map(|e| {
            table
                .column(&e.column)
                .map(|c| (c.values.as_slice(), e.lags))
                .ok_or_else(|| DatasetError::UnknownExogenousColumn(e.column.clone()))
        })
        .collect::<Result<_, _>>()?;

    let t_len = table.len();
    let deepest = spec.deepest_lag();
    let h = spec.horizon;
    if t_len < h + deepest {
        return Err(DatasetError::SeriesTooShort {
            len: t_len,
            horizon: h,
            deepest_lag: deepest,
        });
    }

    let width = spec.width();
    let first_origin = deepest - 1;
    let last_origin = t_len - 1 - h;
    let n_rows = last_origin + 1 - first_origin;
    let mut data = Vec::with_capacity(n_rows * width);
    let mut targets = Vec::with_capacity(n_rows);
    let mut origin_months = Vec::with_capacity(n_rows);
    for t in first_origin..=last_origin {
        predictor_row(t, target, &exo, spec.target_lags, &mut data);
        targets.push(target[t + h]);
        origin_months.push(table.month(t));
    }
    let mut latest = Vec::with_capacity(width);
    predictor_row(t_len - 1, target, &exo, spec.target_lags, &mut latest);

    let mut feature_names = Vec::with_capacity(width);
    feature_names.push("intercept".to_string());
    let tname = &table.target().name;
    feature_names.extend((0..spec.target_lags).map(|k| format!("{tname}_l{k}")));
    for e in &spec.exogenous {
        feature_names.extend((0..e.lags).map(|k| format!("{}_l{k}", e.column)));
    }

    Ok(SupervisedSet {
        predictors: Matrix::new(n_rows, width, data).expect("row layout matches width"),
        targets,
        origin_months,
        latest_predictor_row: latest,
        latest_origin: table.last_month(),
        feature_names,
        horizon: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(s: &str) -> YearMonth {
        s.parse().unwrap()
    }

    fn schema() -> Schema {
        [("arrivals", Role::Target), ("gdp", Role::Economic)]
            .into_iter()
            .collect()
    }

    fn monthly_csv(start: YearMonth, n: usize) -> String {
        let mut s = String::from("month,arrivals,gdp\n");
        for i in 0..n {
            s.push_str(&format!(
                "{},{},{}\n",
                start.add_months(i as i64),
                100.0 + i as f64,
                0.5 * i as f64
            ));
        }
        s
    }

    fn table(n: usize) -> TimeSeriesTable {
        load_series(monthly_csv(ym("2008-01"), n).as_bytes(), &schema()).unwrap()
    }

    #[test]
    fn month_parsing_and_arithmetic() {
        assert_eq!(ym("2008-12").add_months(1), ym("2009-01"));
        assert_eq!(ym("2009-01").add_months(-13), ym("2007-12"));
        assert_eq!(ym("2008-01").months_until(ym("2018-12")), 131);
        for bad in ["2008-13", "2008-1", "08-01", "2008/01", "abcd-ef", "2008-00"] {
            assert!(bad.parse::<YearMonth>().is_err(), "{bad}");
        }
    }

    #[test]
    fn loads_132_months() {
        let t = table(132);
        assert_eq!(t.len(), 132);
        assert_eq!(t.columns().len(), 2);
        assert_eq!(t.start(), ym("2008-01"));
        assert_eq!(t.last_month(), ym("2018-12"));
        assert_eq!(t.target().name, "arrivals");
    }

    #[test]
    fn ingestion_errors() {
        let gap = "month,arrivals,gdp\n2008-01,1,2\n2008-03,1,2\n";
        assert!(matches!(
            load_series(gap.as_bytes(), &schema()),
            Err(DatasetError::GapInIndex { .. })
        ));
        let dup = "month,arrivals,gdp\n2008-01,1,2\n2008-01,1,2\n";
        assert!(matches!(
            load_series(dup.as_bytes(), &schema()),
            Err(DatasetError::DuplicateMonth { .. })
        ));
        let bad_date = "month,arrivals,gdp\n2008-1,1,2\n";
        assert!(matches!(
            load_series(bad_date.as_bytes(), &schema()),
            Err(DatasetError::MalformedDate { row: 1, .. })
        ));
        let nan = "month,arrivals,gdp\n2008-01,1,NaN\n";
        assert!(matches!(
            load_series(nan.as_bytes(), &schema()),
            Err(DatasetError::NonNumericCell { .. })
        ));
        let text = "month,arrivals,gdp\n2008-01,1,x\n";
        assert!(matches!(
            load_series(text.as_bytes(), &schema()),
            Err(DatasetError::NonNumericCell { row: 1, .. })
        ));
        let no_target: Schema = [("arrivals", Role::Sii), ("gdp", Role::Economic)]
            .into_iter()
            .collect();
        assert_eq!(
            load_series(monthly_csv(ym("2008-01"), 3).as_bytes(), &no_target),
            Err(DatasetError::NoTargetColumn)
        );
    }

    #[test]
    fn schema_from_json() {
        let s = Schema::from_json(r#"{"arrivals":"target","gdp":"economic","kw":"sii"}"#).unwrap();
        assert_eq!(s.role("kw"), Some(Role::Sii));
        assert!(Schema::from_json(r#"{"a":"bogus"}"#).is_err());
    }

    #[test]
    fn split_boundaries() {
        let t = table(132);
        let (a, b) = split_in_out(&t, ym("2017-01")).unwrap();
        assert_eq!((a.len(), b.len()), (108, 24));
        assert_eq!(b.start(), ym("2017-01"));
        assert!(matches!(
            split_in_out(&t, ym("2008-01")),
            Err(DatasetError::SplitOutOfRange { .. })
        ));
        assert!(split_in_out(&t, ym("2019-01")).is_err());
        let (a, b) = split_in_out(&t, ym("2018-12")).unwrap();
        assert_eq!((a.len(), b.len()), (131, 1));
        let mut joined = a.target_values().to_vec();
        joined.extend_from_slice(b.target_values());
        assert_eq!(joined, t.target_values());
    }

    #[test]
    fn design_matrix_univariate_shape() {
        let t = table(10);
        let s = build_design_matrix(&t, &LagSpec::new(1, vec![], 1)).unwrap();
        assert_eq!(s.rows(), 9);
        assert_eq!(s.width(), 2);
        for i in 0..9 {
            assert_eq!(s.predictors.row(i), &[1.0, 100.0 + i as f64]);
            assert_eq!(s.targets[i], 101.0 + i as f64);
        }
        assert_eq!(s.latest_predictor_row, vec![1.0, 109.0]);
    }

    #[test]
    fn design_matrix_with_exogenous_lags() {
        let t = table(10);
        let spec = LagSpec::new(
            2,
            vec![ExogenousLag {
                column: "gdp".into(),
                lags: 3,
            }],
            1,
        );
        let s = build_design_matrix(&t, &spec).unwrap();
        assert_eq!((s.rows(), s.width()), (7, 6));
        // First usable origin is month index 2.
        assert_eq!(s.predictors.row(0), &[1.0, 102.0, 101.0, 1.0, 0.5, 0.0]);
        assert_eq!(s.targets[0], 103.0);
        assert_eq!(s.origin_months[0], ym("2008-03"));
        assert_eq!(
            s.feature_names,
            ["intercept", "arrivals_l0", "arrivals_l1", "gdp_l0", "gdp_l1", "gdp_l2"]
        );
    }

    #[test]
    fn design_matrix_errors() {
        let t = table(10);
        assert!(matches!(
            build_design_matrix(&t, &LagSpec::new(1, vec![], 12)),
            Err(DatasetError::SeriesTooShort { .. })
        ));
        let spec = LagSpec::new(
            1,
            vec![ExogenousLag {
                column: "nope".into(),
                lags: 1,
            }],
            1,
        );
        assert_eq!(
            build_design_matrix(&t, &spec),
            Err(DatasetError::UnknownExogenousColumn("nope".into()))
        );
        assert!(matches!(
            build_design_matrix(&t, &LagSpec::new(0, vec![], 1)),
            Err(DatasetError::InvalidLagSpec(_))
        ));
    }

    #[test]
    fn csv_round_trip_is_bitwise() {
        let frame = SeriesFrame::new(
            ym("2010-05"),
            3,
            vec![
                Column::new("arrivals", Role::Target, vec![0.1 + 0.2, 1e-300, 123456.789]),
                Column::new("kw", Role::Sii, vec![-0.0, f64::MAX, 1.0 / 3.0]),
            ],
        )
        .unwrap();
        let t = TimeSeriesTable::from_frame(frame).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let schema: Schema = [("arrivals", Role::Target), ("kw", Role::Sii)]
            .into_iter()
            .collect();
        let back = load_series(buf.as_slice(), &schema).unwrap();
        for (a, b) in t.columns().iter().zip(back.columns()) {
            let ab: Vec<u64> = a.values.iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u64> = b.values.iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }
}
