//! Calendar-indexed series and panels.
//!
//! Time is represented by a contiguous [`TimeIndex`]: a frequency, a start
//! period, and a length. Gapless coverage is structural, so alignment checks
//! reduce to comparing starts and lengths. Quarter membership of a month is
//! `ceil(month / 3)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observation frequency of a series or panel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    Monthly,
    Quarterly,
}

impl Frequency {
    fn periods_per_year(self) -> i64 {
        match self {
            Frequency::Monthly => 12,
            Frequency::Quarterly => 4,
        }
    }
}

impl std::fmt::Display for Frequency {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Frequency::Monthly => write!(f, "monthly"),
            Frequency::Quarterly => write!(f, "quarterly"),
        }
    }
}

/// Contiguous run of calendar periods at a fixed frequency.
///
/// Stored as an ordinal of the first period plus a length, so the index can
/// never contain gaps or out-of-order stamps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeIndex {
    freq: Frequency,
    start: i64,
    len: usize,
}

impl TimeIndex {
    /// Monthly index starting at `(year, month)` with `month` in `1..=12`.
    pub fn monthly(year: i32, month: u32, len: usize) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidArgument(format!(
                "month must be in 1..=12, got {month}"
            )));
        }
        Ok(Self {
            freq: Frequency::Monthly,
            start: i64::from(year) * 12 + i64::from(month) - 1,
            len,
        })
    }

    /// Quarterly index starting at `(year, quarter)` with `quarter` in `1..=4`.
    pub fn quarterly(year: i32, quarter: u32, len: usize) -> Result<Self> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::InvalidArgument(format!(
                "quarter must be in 1..=4, got {quarter}"
            )));
        }
        Ok(Self {
            freq: Frequency::Quarterly,
            start: i64::from(year) * 4 + i64::from(quarter) - 1,
            len,
        })
    }

    pub fn freq(&self) -> Frequency {
        self.freq
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `(year, month-or-quarter)` of position `i`.
    pub fn year_sub(&self, i: usize) -> (i32, u32) {
        let per = self.freq.periods_per_year();
        let ord = self.start + i as i64;
        let year = ord.div_euclid(per);
        let sub = ord.rem_euclid(per) + 1;
        (year as i32, sub as u32)
    }

    /// Position of `(year, sub)` within the index, if covered.
    pub fn position(&self, year: i32, sub: u32) -> Option<usize> {
        let ord = i64::from(year) * self.freq.periods_per_year() + i64::from(sub) - 1;
        let off = ord - self.start;
        if off >= 0 && (off as usize) < self.len {
            Some(off as usize)
        } else {
            None
        }
    }

    /// Human-readable stamp: `1992-03` for months, `1992Q1` for quarters.
    pub fn label(&self, i: usize) -> String {
        let (year, sub) = self.year_sub(i);
        match self.freq {
            Frequency::Monthly => format!("{year:04}-{sub:02}"),
            Frequency::Quarterly => format!("{year:04}Q{sub}"),
        }
    }

    /// First-of-month ISO date for monthly indexes (`1992-03-01`).
    pub fn date_label(&self, i: usize) -> String {
        let (year, sub) = self.year_sub(i);
        match self.freq {
            Frequency::Monthly => format!("{year:04}-{sub:02}-01"),
            Frequency::Quarterly => self.label(i),
        }
    }

    /// Sub-index of `len` periods starting `offset` periods in.
    pub fn slice(&self, offset: usize, len: usize) -> Result<Self> {
        if offset + len > self.len {
            return Err(Error::Alignment(format!(
                "slice {offset}+{len} exceeds index length {}",
                self.len
            )));
        }
        Ok(Self {
            freq: self.freq,
            start: self.start + offset as i64,
            len,
        })
    }

    /// Calendar quarter containing monthly position `i`, as `(year, quarter)`.
    pub fn quarter_of(&self, i: usize) -> Result<(i32, u32)> {
        if self.freq != Frequency::Monthly {
            return Err(Error::Alignment(
                "quarter_of is defined on monthly indexes".to_string(),
            ));
        }
        let (year, month) = self.year_sub(i);
        Ok((year, month.div_ceil(3)))
    }

    /// True when monthly position `i` is the last month of a calendar quarter.
    pub fn is_quarter_end(&self, i: usize) -> bool {
        (self.start + i as i64).rem_euclid(3) == 2 && self.freq == Frequency::Monthly
    }

    /// Overlap with `other` as `(offset_self, offset_other, len)`.
    pub fn intersect(&self, other: &Self) -> Result<(usize, usize, usize)> {
        if self.freq != other.freq {
            return Err(Error::Alignment(format!(
                "cannot intersect {} and {} indexes",
                self.freq, other.freq
            )));
        }
        let lo = self.start.max(other.start);
        let hi = (self.start + self.len as i64).min(other.start + other.len as i64);
        if hi <= lo {
            return Err(Error::Alignment(
                "indexes do not overlap".to_string(),
            ));
        }
        Ok(((lo - self.start) as usize, (lo - other.start) as usize, (hi - lo) as usize))
    }

    pub(crate) fn start_ordinal(&self) -> i64 {
        self.start
    }
}

/// Single observed variable on a contiguous calendar index.
///
/// Values may contain NaN markers, e.g. at the head after differencing or at
/// failed backtest steps; numeric consumers must handle them explicitly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Series {
    index: TimeIndex,
    values: Vec<f64>,
}

impl Series {
    pub fn new(index: TimeIndex, values: Vec<f64>) -> Result<Self> {
        if index.len() != values.len() {
            return Err(Error::Alignment(format!(
                "index length {} != value count {}",
                index.len(),
                values.len()
            )));
        }
        Ok(Self { index, values })
    }

    pub fn monthly(year: i32, month: u32, values: Vec<f64>) -> Result<Self> {
        Self::new(TimeIndex::monthly(year, month, values.len())?, values)
    }

    pub fn quarterly(year: i32, quarter: u32, values: Vec<f64>) -> Result<Self> {
        Self::new(TimeIndex::quarterly(year, quarter, values.len())?, values)
    }

    pub fn index(&self) -> &TimeIndex {
        &self.index
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, offset: usize, len: usize) -> Result<Self> {
        Ok(Self {
            index: self.index.slice(offset, len)?,
            values: self.values[offset..offset + len].to_vec(),
        })
    }
}

/// Named columns observed on one shared calendar index.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Panel {
    index: TimeIndex,
    columns: Vec<String>,
    /// Column-major storage; `data[c]` has one value per index position.
    data: Vec<Vec<f64>>,
}

impl Panel {
    pub fn new(index: TimeIndex, columns: Vec<String>, data: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != data.len() {
            return Err(Error::Schema(format!(
                "{} column names for {} data columns",
                columns.len(),
                data.len()
            )));
        }
        for (name, col) in columns.iter().zip(&data) {
            if col.len() != index.len() {
                return Err(Error::Alignment(format!(
                    "column {name} has {} values, index length is {}",
                    col.len(),
                    index.len()
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for name in &columns {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {name}")));
            }
        }
        Ok(Self { index, columns, data })
    }

    /// Builds a panel from row-major data.
    pub fn from_rows(index: TimeIndex, columns: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let k = columns.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Schema(format!(
                    "row {i} has {} values, expected {k}",
                    row.len()
                )));
            }
        }
        let data = (0..k)
            .map(|c| rows.iter().map(|r| r[c]).collect())
            .collect();
        Self::new(index, columns, data)
    }

    pub fn index(&self) -> &TimeIndex {
        &self.index
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.index.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.column_position(name).map(|c| self.data[c].as_slice())
    }

    pub fn column_at(&self, c: usize) -> &[f64] {
        &self.data[c]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.iter().map(|col| col[i]).collect()
    }

    /// Row-major matrix view (`n_rows x n_cols`).
    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n_rows(), self.n_cols(), |r, c| self.data[c][r])
    }

    pub fn slice_rows(&self, offset: usize, len: usize) -> Result<Self> {
        Ok(Self {
            index: self.index.slice(offset, len)?,
            columns: self.columns.clone(),
            data: self
                .data
                .iter()
                .map(|col| col[offset..offset + len].to_vec())
                .collect(),
        })
    }

    fn column_position(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Schema(format!("unknown column {name}")))
    }
}

/// Number of quarterly lags appended to every column of a design panel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    pub count: usize,
}

impl LagSpec {
    pub fn new(count: usize) -> Self {
        Self { count }
    }
}

/// Appends lagged copies of every column; lag `j` of column `c` at position
/// `q` equals `c` at `q - j`.
///
/// The first `count` rows are dropped so every remaining row is fully
/// observed; lagged columns are named `<col>_lag<j>`. With `k` input columns
/// the output has `k * (count + 1)` columns.
pub fn add_lags(panel: &Panel, spec: LagSpec) -> Result<Panel> {
    let n = panel.n_rows();
    if spec.count >= n {
        return Err(Error::InvalidArgument(format!(
            "lag count {} leaves no rows in a panel of length {n}",
            spec.count
        )));
    }
    if spec.count == 0 {
        return Ok(panel.clone());
    }
    let kept = n - spec.count;
    let mut columns = Vec::with_capacity(panel.n_cols() * (spec.count + 1));
    let mut data = Vec::with_capacity(panel.n_cols() * (spec.count + 1));
    for lag in 0..=spec.count {
        for (c, name) in panel.columns().iter().enumerate() {
            columns.push(if lag == 0 {
                name.clone()
            } else {
                format!("{name}_lag{lag}")
            });
            let src = panel.column_at(c);
            let from = spec.count - lag;
            data.push(src[from..from + kept].to_vec());
        }
    }
    Panel::new(panel.index().slice(spec.count, kept)?, columns, data)
}

/// Chronological split into `(train, test)` with `ceil(ratio * n)` training
/// rows.
pub fn split_train_test(
    panel: &Panel,
    target: &Series,
    ratio: f64,
) -> Result<((Panel, Series), (Panel, Series))> {
    if panel.index() != target.index() {
        return Err(Error::Alignment(
            "panel and target must share the same index".to_string(),
        ));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let n = panel.n_rows();
    let n_train = (ratio * n as f64).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} rows at ratio {ratio} leaves an empty side"
        )));
    }
    let train = (panel.slice_rows(0, n_train)?, target.slice(0, n_train)?);
    let test = (
        panel.slice_rows(n_train, n - n_train)?,
        target.slice(n_train, n - n_train)?,
    );
    Ok((train, test))
}

/// Restricts a panel and a series to their common calendar range.
pub fn align(panel: &Panel, series: &Series) -> Result<(Panel, Series)> {
    let (off_p, off_s, len) = panel.index().intersect(series.index())?;
    Ok((panel.slice_rows(off_p, len)?, series.slice(off_s, len)?))
}
