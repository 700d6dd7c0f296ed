//! Master-file ingestion: one CSV per country with monthly indicators and a
//! sparse quarterly GDP column.
//!
//! - `DATE` must be the first header; stamps are strict `yyyy-mm-01`.
//! - Months must be contiguous and increasing; gaps, duplicates, and
//!   reordered rows are reported with their file line numbers.
//! - GDP values sit exactly on quarter-end months (Mar, Jun, Sep, Dec)
//!   between the first and last observation; all other cells are blank.

use std::path::Path;

use disagg_core::series::{Panel, Series, TimeIndex};

use crate::{CliError, CliResult};

/// Parsed master file: raw monthly indicators plus the quarterly target.
#[derive(Clone, Debug)]
pub struct MasterData {
    /// Raw (untransformed) monthly indicator columns.
    pub indicators: Panel,
    /// Quarterly GDP levels, one value per covered quarter.
    pub gdp_levels: Series,
    /// Quarterly log-difference growth; starts one quarter after the levels.
    pub growth: Series,
}

/// Loads and validates a master CSV, splitting indicators from the target.
pub fn load_master_csv(path: &Path, gdp_column: &str) -> CliResult<MasterData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Validation(format!("cannot open {}: {e}", path.display())))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let (indicator_cols, gdp_col) = split_headers(&headers, gdp_column)?;
    let indicator_names: Vec<String> = indicator_cols
        .iter()
        .map(|&c| headers[c].clone())
        .collect();

    let mut months: Vec<(i32, u32)> = Vec::new();
    let mut indicator_data: Vec<Vec<f64>> = vec![Vec::new(); indicator_names.len()];
    let mut gdp_cells: Vec<Option<f64>> = Vec::new();

    for (i, record) in reader.records().enumerate() {
        let line = i + 2; // line 1 is the header
        let record =
            record.map_err(|e| CliError::Validation(format!("line {line}: {e}")))?;
        if record.len() != headers.len() {
            return Err(CliError::Validation(format!(
                "line {line}: {} fields, expected {}",
                record.len(),
                headers.len()
            )));
        }
        let (year, month) = parse_month(&record[0], line)?;
        if let Some(&(py, pm)) = months.last() {
            let prev = ordinal(py, pm);
            let cur = ordinal(year, month);
            if cur <= prev {
                return Err(CliError::Validation(format!(
                    "line {line}: DATE {} is not after {} (rows must be increasing months)",
                    &record[0],
                    stamp(py, pm)
                )));
            }
            if cur != prev + 1 {
                return Err(CliError::Validation(format!(
                    "line {line}: month gap between {} and {}",
                    stamp(py, pm),
                    &record[0]
                )));
            }
        }
        months.push((year, month));

        for (c, (&col, name)) in indicator_cols.iter().zip(&indicator_names).enumerate() {
            let raw = &record[col];
            let value: f64 = raw.parse().map_err(|_| {
                CliError::Validation(format!(
                    "line {line}: column {name} has non-numeric value {raw:?}"
                ))
            })?;
            indicator_data[c].push(value);
        }

        let raw_gdp = &record[gdp_col];
        if raw_gdp.is_empty() {
            gdp_cells.push(None);
        } else {
            let value: f64 = raw_gdp.parse().map_err(|_| {
                CliError::Validation(format!(
                    "line {line}: column {gdp_column} has non-numeric value {raw_gdp:?}"
                ))
            })?;
            if !(value > 0.0) {
                return Err(CliError::Validation(format!(
                    "line {line}: {gdp_column} value {value} must be positive"
                )));
            }
            gdp_cells.push(Some(value));
        }
    }

    if months.is_empty() {
        return Err(CliError::Validation(format!(
            "{} has no data rows",
            path.display()
        )));
    }

    let (y0, m0) = months[0];
    let index = TimeIndex::monthly(y0, m0, months.len())?;
    let indicators = Panel::new(index, indicator_names, indicator_data)?;
    let (gdp_levels, growth) = extract_gdp(&index, &gdp_cells, gdp_column)?;
    Ok(MasterData {
        indicators,
        gdp_levels,
        growth,
    })
}

/// Returns the indicator column positions and the GDP column position.
fn split_headers(headers: &[String], gdp_column: &str) -> CliResult<(Vec<usize>, usize)> {
    if headers.first().map(String::as_str) != Some("DATE") {
        return Err(CliError::Validation(format!(
            "first header must be DATE, got {:?}",
            headers.first()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for name in headers {
        if !seen.insert(name.as_str()) {
            return Err(CliError::Validation(format!(
                "duplicate header {name}"
            )));
        }
    }
    let gdp_col = headers
        .iter()
        .position(|h| h == gdp_column)
        .ok_or_else(|| {
            CliError::Validation(format!("GDP column {gdp_column} not found in header"))
        })?;
    let indicator_cols: Vec<usize> = (1..headers.len()).filter(|&c| c != gdp_col).collect();
    if indicator_cols.is_empty() {
        return Err(CliError::Validation(
            "master file has no indicator columns".to_string(),
        ));
    }
    Ok((indicator_cols, gdp_col))
}

/// Strict `yyyy-mm-01` month stamp.
fn parse_month(raw: &str, line: usize) -> CliResult<(i32, u32)> {
    let bad = || {
        CliError::Validation(format!(
            "line {line}: DATE {raw:?} is not a first-of-month stamp (yyyy-mm-01)"
        ))
    };
    let parts: Vec<&str> = raw.split('-').collect();
    if parts.len() != 3 || parts[0].len() != 4 || parts[1].len() != 2 || parts[2].len() != 2 {
        return Err(bad());
    }
    let year: i32 = parts[0].parse().map_err(|_| bad())?;
    let month: u32 = parts[1].parse().map_err(|_| bad())?;
    if parts[2] != "01" || !(1..=12).contains(&month) {
        return Err(bad());
    }
    Ok((year, month))
}

fn ordinal(year: i32, month: u32) -> i64 {
    i64::from(year) * 12 + i64::from(month) - 1
}

fn stamp(year: i32, month: u32) -> String {
    format!("{year:04}-{month:02}-01")
}

/// Checks GDP placement and builds the quarterly level and growth series.
fn extract_gdp(
    index: &TimeIndex,
    cells: &[Option<f64>],
    gdp_column: &str,
) -> CliResult<(Series, Series)> {
    let first = cells.iter().position(Option::is_some).ok_or_else(|| {
        CliError::Validation(format!("column {gdp_column} has no values"))
    })?;
    let last = cells.iter().rposition(Option::is_some).unwrap();
    let mut levels = Vec::new();
    for pos in first..=last {
        let line = pos + 2;
        match (cells[pos], index.is_quarter_end(pos)) {
            (Some(v), true) => levels.push(v),
            (Some(_), false) => {
                return Err(CliError::Validation(format!(
                    "line {line}: {gdp_column} value on {}, which is not a quarter-end month",
                    index.date_label(pos)
                )))
            }
            (None, true) => {
                return Err(CliError::Validation(format!(
                    "line {line}: {gdp_column} gap at quarter end {}",
                    index.date_label(pos)
                )))
            }
            (None, false) => {}
        }
    }
    if levels.len() < 2 {
        return Err(CliError::Validation(format!(
            "column {gdp_column} needs at least two quarterly values, found {}",
            levels.len()
        )));
    }
    let (fy, fq) = index.quarter_of(first)?;
    let level_series = Series::new(
        TimeIndex::quarterly(fy, fq, levels.len()).map_err(CliError::from)?,
        levels.clone(),
    )
    .map_err(CliError::from)?;
    let growth: Vec<f64> = levels.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
    let growth_index = level_series.index().slice(1, growth.len())?;
    let growth_series = Series::new(growth_index, growth).map_err(CliError::from)?;
    Ok((level_series, growth_series))
}
