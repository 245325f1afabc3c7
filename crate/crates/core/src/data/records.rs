use crate::error::{Error, Result};
use chrono::NaiveDate;
use std::fmt::Write as _;
use std::path::Path;

pub const CSV_HEADER: [&str; 4] = ["date", "ab_ch1", "ab_ch2", "le_count"];

/// One day of device telemetry: Pattern A+B detection counts on each of the
/// two channels and the number of long episodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub ab_ch1: u32,
    pub ab_ch2: u32,
    pub le_count: u32,
}

impl DailyRecord {
    pub fn ab(&self, channel: usize) -> u32 {
        match channel {
            0 => self.ab_ch1,
            1 => self.ab_ch2,
            _ => panic!("channel {channel} out of range"),
        }
    }
}

/// Date-ordered daily records for one patient. Dates are strictly
/// increasing; gaps are allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatientSeries {
    pub patient_id: String,
    pub records: Vec<DailyRecord>,
}

/// Irregularities found while reading a series.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseReport {
    /// Rows were not in date order and have been sorted.
    pub reordered: bool,
    /// `(last present day, next present day)` around each missing stretch.
    pub gaps: Vec<(NaiveDate, NaiveDate)>,
}

impl PatientSeries {
    /// Sorts `records` by date and rejects duplicate dates.
    pub fn new(patient_id: impl Into<String>, mut records: Vec<DailyRecord>) -> Result<(Self, ParseReport)> {
        let reordered = records.windows(2).any(|w| w[0].date > w[1].date);
        records.sort_by_key(|r| r.date);
        if let Some(w) = records.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::DuplicateDate(w[0].date));
        }
        let series = Self { patient_id: patient_id.into(), records };
        let gaps = series.gaps();
        Ok((series, ParseReport { reordered, gaps }))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn gaps(&self) -> Vec<(NaiveDate, NaiveDate)> {
        self.records
            .windows(2)
            .filter(|w| (w[1].date - w[0].date).num_days() > 1)
            .map(|w| (w[0].date, w[1].date))
            .collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.records.iter().map(|r| r.date).collect()
    }

    /// Canonical CSV encoding (header plus one row per day, `\n` line ends).
    pub fn to_csv(&self) -> String {
        let mut out = CSV_HEADER.join(",");
        out.push('\n');
        for r in &self.records {
            writeln!(out, "{},{},{},{}", r.date.format("%Y-%m-%d"), r.ab_ch1, r.ab_ch2, r.le_count).unwrap();
        }
        out
    }
}

/// Reads a series from CSV; the patient id is the file stem.
pub fn parse_csv(path: impl AsRef<Path>) -> Result<(PatientSeries, ParseReport)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("patient");
    parse_csv_str(id, &text)
}

pub fn parse_csv_str(patient_id: &str, text: &str) -> Result<(PatientSeries, ParseReport)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{}`, got `{}`", CSV_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        if row.len() != 4 {
            return Err(bad(format!("expected 4 fields, got {}", row.len())));
        }
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|e| bad(format!("invalid date `{}`: {e}", &row[0])))?;
        let count = |i: usize| -> Result<u32> {
            let field = &row[i];
            if field.starts_with('-') {
                return Err(bad(format!("negative count `{field}` in column {}", CSV_HEADER[i])));
            }
            field
                .parse::<u32>()
                .map_err(|e| bad(format!("invalid count `{field}` in column {}: {e}", CSV_HEADER[i])))
        };
        records.push(DailyRecord { date, ab_ch1: count(1)?, ab_ch2: count(2)?, le_count: count(3)? });
    }
    PatientSeries::new(patient_id, records)
}
