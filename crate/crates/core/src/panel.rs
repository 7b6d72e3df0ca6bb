//! Country-by-year indicator panels in the World Bank annex layout.
//!
//! A panel file is a CSV whose header is `Country Name,Code,<year>,<year>,...`
//! and whose data rows carry one country (or aggregate region) each. Blank
//! cells are missing observations, never zeros.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PanelError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowLength { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: non-numeric cell {text:?}")]
    NonNumeric { row: usize, column: String, text: String },
    #[error("row {row}: invalid country code {code:?} (need 3 uppercase letters)")]
    InvalidCode { row: usize, code: String },
    #[error("duplicate country code {0}")]
    DuplicateCode(String),
    #[error("series {code}: {reason}")]
    InvalidSeries { code: String, reason: String },
    #[error("year {0} is not part of the panel")]
    YearAbsent(i32),
    #[error("year {year}: need at least {needed} present cells, found {found}")]
    TooFewPresent { year: i32, needed: usize, found: usize },
    #[error("cell is missing")]
    MissingCell,
    #[error("csv: {0}")]
    Csv(String),
}

/// One observation. A missing cell has no readable value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelCell {
    value: Option<f64>,
    decimals: u8,
}

impl PanelCell {
    pub fn missing() -> Self {
        Self { value: None, decimals: 0 }
    }

    /// A present cell. Non-finite values are rejected.
    pub fn present(value: f64) -> Option<Self> {
        Self::with_decimals(value, 2)
    }

    fn with_decimals(value: f64, decimals: u8) -> Option<Self> {
        value.is_finite().then_some(Self { value: Some(value), decimals })
    }

    pub fn is_present(&self) -> bool {
        self.value.is_some()
    }

    /// The cell value; reading a missing cell is an error.
    pub fn value(&self) -> Result<f64, PanelError> {
        self.value.ok_or(PanelError::MissingCell)
    }

    pub fn get(&self) -> Option<f64> {
        self.value
    }

    /// Fractional digits the value carried in its source text.
    pub fn decimals(&self) -> u8 {
        self.decimals
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelSeries {
    country_name: String,
    code: String,
    years: Vec<i32>,
    cells: Vec<PanelCell>,
}

impl PanelSeries {
    pub fn new(
        country_name: impl Into<String>,
        code: impl Into<String>,
        years: Vec<i32>,
        cells: Vec<PanelCell>,
    ) -> Result<Self, PanelError> {
        let code = code.into();
        if !is_valid_code(&code) {
            return Err(PanelError::InvalidCode { row: 0, code });
        }
        if years.len() != cells.len() {
            return Err(PanelError::InvalidSeries {
                code,
                reason: format!("{} years but {} cells", years.len(), cells.len()),
            });
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PanelError::InvalidSeries {
                code,
                reason: "years are not strictly increasing".into(),
            });
        }
        Ok(Self { country_name: country_name.into(), code, years, cells })
    }

    /// Convenience constructor from optional values.
    pub fn from_values(
        country_name: impl Into<String>,
        code: impl Into<String>,
        years: Vec<i32>,
        values: &[Option<f64>],
    ) -> Result<Self, PanelError> {
        let code = code.into();
        let cells = values
            .iter()
            .map(|v| match v {
                Some(x) => PanelCell::present(*x).ok_or_else(|| PanelError::InvalidSeries {
                    code: code.clone(),
                    reason: "non-finite value".into(),
                }),
                None => Ok(PanelCell::missing()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(country_name, code, years, cells)
    }

    pub fn country_name(&self) -> &str {
        &self.country_name
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn cells(&self) -> &[PanelCell] {
        &self.cells
    }

    pub fn cell(&self, year: i32) -> Option<&PanelCell> {
        self.years.iter().position(|&y| y == year).map(|i| &self.cells[i])
    }

    /// Present values in year order, skipping missing cells.
    pub fn present_values(&self) -> Vec<f64> {
        self.cells.iter().filter_map(PanelCell::get).collect()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    indicator_name: String,
    years: Vec<i32>,
    series: Vec<PanelSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CodeValue {
    pub code: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extrema {
    pub max: CodeValue,
    pub min: CodeValue,
}

impl Panel {
    pub fn new(
        indicator_name: impl Into<String>,
        years: Vec<i32>,
        series: Vec<PanelSeries>,
    ) -> Result<Self, PanelError> {
        let mut seen = HashSet::new();
        for s in &series {
            if s.years != years {
                return Err(PanelError::InvalidSeries {
                    code: s.code.clone(),
                    reason: "year vector differs from the panel's".into(),
                });
            }
            if !seen.insert(s.code.clone()) {
                return Err(PanelError::DuplicateCode(s.code.clone()));
            }
        }
        Ok(Self { indicator_name: indicator_name.into(), years, series })
    }

    pub fn indicator_name(&self) -> &str {
        &self.indicator_name
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn series(&self) -> &[PanelSeries] {
        &self.series
    }

    pub fn get(&self, code: &str) -> Option<&PanelSeries> {
        self.series.iter().find(|s| s.code == code)
    }

    /// Number of present cells across the whole panel.
    pub fn present_count(&self) -> usize {
        self.series.iter().map(|s| s.cells.iter().filter(|c| c.is_present()).count()).sum()
    }

    /// Keeps the series whose codes are listed, in panel order.
    pub fn restrict(&self, codes: &[&str]) -> Panel {
        Panel {
            indicator_name: self.indicator_name.clone(),
            years: self.years.clone(),
            series: self.series.iter().filter(|s| codes.contains(&s.code.as_str())).cloned().collect(),
        }
    }

    fn year_column(&self, year: i32) -> Result<Vec<(&str, f64)>, PanelError> {
        let idx = self
            .years
            .iter()
            .position(|&y| y == year)
            .ok_or(PanelError::YearAbsent(year))?;
        Ok(self
            .series
            .iter()
            .filter_map(|s| s.cells[idx].get().map(|v| (s.code.as_str(), v)))
            .collect())
    }

    /// Series with the largest and smallest present value in `year`.
    /// Ties go to the lexicographically smallest code.
    pub fn extrema(&self, year: i32) -> Result<Extrema, PanelError> {
        let column = self.year_column(year)?;
        let first = column
            .first()
            .ok_or(PanelError::TooFewPresent { year, needed: 1, found: 0 })?;
        let (mut max, mut min) = (*first, *first);
        for &(code, v) in &column[1..] {
            if v > max.1 || (v == max.1 && code < max.0) {
                max = (code, v);
            }
            if v < min.1 || (v == min.1 && code < min.0) {
                min = (code, v);
            }
        }
        Ok(Extrema {
            max: CodeValue { code: max.0.to_string(), value: max.1 },
            min: CodeValue { code: min.0.to_string(), value: min.1 },
        })
    }

    pub fn range_spread(&self, year: i32) -> Result<f64, PanelError> {
        let e = self.extrema(year)?;
        Ok(e.max.value - e.min.value)
    }

    /// Arithmetic mean of the present cells in `year`.
    pub fn cross_section_mean(&self, year: i32) -> Result<f64, PanelError> {
        let column = self.year_column(year)?;
        if column.is_empty() {
            return Err(PanelError::TooFewPresent { year, needed: 1, found: 0 });
        }
        Ok(column.iter().map(|(_, v)| v).sum::<f64>() / column.len() as f64)
    }

    /// Each present value minus the cross-sectional mean of that year.
    pub fn growth_deviation(&self, year: i32) -> Result<Vec<CodeValue>, PanelError> {
        let column = self.year_column(year)?;
        if column.len() < 2 {
            return Err(PanelError::TooFewPresent { year, needed: 2, found: column.len() });
        }
        let mean = column.iter().map(|(_, v)| v).sum::<f64>() / column.len() as f64;
        Ok(column
            .into_iter()
            .map(|(code, v)| CodeValue { code: code.to_string(), value: v - mean })
            .collect())
    }

    /// Writes the panel back in the annex CSV layout.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("Country Name,Code");
        for y in &self.years {
            let _ = write!(out, ",{y}");
        }
        out.push('\n');
        for s in &self.series {
            out.push_str(&csv_field(&s.country_name));
            out.push(',');
            out.push_str(&s.code);
            for c in &s.cells {
                out.push(',');
                if let Some(v) = c.value {
                    let _ = write!(out, "{:.*}", c.decimals as usize, v);
                }
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn is_valid_code(code: &str) -> bool {
    code.len() == 3 && code.bytes().all(|b| b.is_ascii_uppercase())
}

/// Parses a decimal with '.' as separator. Returns the value and the number
/// of fractional digits written in the source.
fn parse_decimal(text: &str) -> Option<(f64, u8)> {
    let digits = text.strip_prefix(['-', '+']).unwrap_or(text);
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !frac_part.is_none_or(all_digits) {
        return None;
    }
    let frac_len = frac_part.map_or(0, str::len);
    if int_part.is_empty() && frac_len == 0 {
        return None;
    }
    let value: f64 = text.parse().ok()?;
    Some((value, u8::try_from(frac_len).ok()?))
}

/// Parses annex-layout CSV text into a panel named `indicator_name`.
pub fn parse_panel(raw_text: &str, indicator_name: &str) -> Result<Panel, PanelError> {
    let text = raw_text.strip_prefix('\u{feff}').unwrap_or(raw_text);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| PanelError::Csv(e.to_string()))?,
        None => return Err(PanelError::MalformedHeader("empty input".into())),
    };
    if header.len() < 3 {
        return Err(PanelError::MalformedHeader(format!(
            "need country, code and at least one year column, found {} columns",
            header.len()
        )));
    }
    if !header[0].to_lowercase().contains("country") {
        return Err(PanelError::MalformedHeader(format!("first column {:?} is not a country column", &header[0])));
    }
    if !header[1].to_lowercase().contains("code") {
        return Err(PanelError::MalformedHeader(format!("second column {:?} is not a code column", &header[1])));
    }
    let years = header
        .iter()
        .skip(2)
        .map(|h| h.parse::<i32>().map_err(|_| PanelError::MalformedHeader(format!("year column {h:?} is not an integer"))))
        .collect::<Result<Vec<_>, _>>()?;
    if years.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PanelError::MalformedHeader("year columns are not strictly increasing".into()));
    }

    let mut series = Vec::new();
    let mut seen = HashSet::new();
    for (i, record) in records.enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| PanelError::Csv(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() != header.len() {
            return Err(PanelError::RowLength { row, expected: header.len(), found: record.len() });
        }
        let code = &record[1];
        if !is_valid_code(code) {
            return Err(PanelError::InvalidCode { row, code: code.to_string() });
        }
        if !seen.insert(code.to_string()) {
            return Err(PanelError::DuplicateCode(code.to_string()));
        }
        let cells = record
            .iter()
            .skip(2)
            .zip(&years)
            .map(|(text, year)| {
                if text.is_empty() {
                    return Ok(PanelCell::missing());
                }
                parse_decimal(text)
                    .and_then(|(v, d)| PanelCell::with_decimals(v, d))
                    .ok_or_else(|| PanelError::NonNumeric { row, column: year.to_string(), text: text.to_string() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        series.push(PanelSeries {
            country_name: record[0].to_string(),
            code: code.to_string(),
            years: years.clone(),
            cells,
        });
    }
    Panel::new(indicator_name, years, series)
}
