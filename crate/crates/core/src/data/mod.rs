//! Journal bibliometric histories and derived quantities.
//!
//! An [`AnnualRecord`] holds one journal-year: the number of documents
//! published, a sparse row of the citation matrix (citations received that
//! year, keyed by the publication year they cite), the percentage of that
//! year's documents never cited, and the optional SNIP/SJR indicators.
//! A [`JournalHistory`] is a chronologically ordered run of annual records
//! for one journal and is the unit of sampling throughout the pipeline.
//!
//! CiteScore values are always recomputed from the raw counts via
//! [`JournalHistory::citescore`]; they are never ingested, so the stored
//! inputs and the scores derived from them cannot drift apart.

mod synth;

pub use synth::{generate_synthetic, SynthConfig};

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One journal-year of bibliometric data.
///
/// `citations_by_pub_year` is sparse: publication years with no citations
/// received this year are simply absent and count as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualRecord {
    pub year: i32,
    pub publications: i64,
    pub citations_by_pub_year: BTreeMap<i32, i64>,
    pub pct_not_cited: f64,
    pub snip: Option<f64>,
    pub sjr: Option<f64>,
}

impl AnnualRecord {
    /// Total citations received during this record's year, summed over all
    /// cited publication years.
    pub fn total_citations(&self) -> i64 {
        self.citations_by_pub_year.values().sum()
    }
}

/// Chronologically ordered annual records for one journal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalHistory {
    pub journal_id: String,
    pub records: Vec<AnnualRecord>,
}

impl JournalHistory {
    pub fn new(journal_id: impl Into<String>, records: Vec<AnnualRecord>) -> Self {
        Self {
            journal_id: journal_id.into(),
            records,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn first_year(&self) -> Option<i32> {
        self.records.first().map(|r| r.year)
    }

    pub fn last_year(&self) -> Option<i32> {
        self.records.last().map(|r| r.year)
    }

    /// Record for a calendar year, if present.
    pub fn record(&self, year: i32) -> Option<&AnnualRecord> {
        self.records.iter().find(|r| r.year == year)
    }

    fn require_record(&self, year: i32) -> Result<&AnnualRecord> {
        self.record(year).ok_or_else(|| Error::MissingYear {
            journal_id: self.journal_id.clone(),
            year,
        })
    }

    /// Total citations received during `year`.
    pub fn total_citations(&self, year: i32) -> Result<i64> {
        Ok(self.require_record(year)?.total_citations())
    }

    /// Citations received during `year` for publications from the last
    /// `window` years (inclusive of `year` itself).
    pub fn citation_window_sum(&self, year: i32, window: usize) -> Result<i64> {
        if window == 0 {
            return Err(Error::InvalidConfig("window must be >= 1".into()));
        }
        let record = self.require_record(year)?;
        let start = year - (window as i32 - 1);
        // Every publication year covered by the window must be observed;
        // a sparse map entry within an observed span is an honest zero, but a
        // year before the journal entered the data is unknown.
        for y in start..year {
            self.require_record(y)?;
        }
        Ok(record
            .citations_by_pub_year
            .range(start..=year)
            .map(|(_, c)| *c)
            .sum())
    }

    /// CiteScore for `year`: citations received during the four-year window
    /// ending at `year` to publications from that window, divided by the
    /// number of publications in the window.
    pub fn citescore(&self, year: i32) -> Result<f64> {
        let mut numerator = 0i64;
        let mut denominator = 0i64;
        for pub_year in (year - 3)..=year {
            denominator += self.require_record(pub_year)?.publications;
            for recv_year in pub_year..=year {
                let record = self.require_record(recv_year)?;
                numerator += record
                    .citations_by_pub_year
                    .get(&pub_year)
                    .copied()
                    .unwrap_or(0);
            }
        }
        if denominator <= 0 {
            return Err(Error::UndefinedCiteScore {
                journal_id: self.journal_id.clone(),
                year,
            });
        }
        Ok(numerator as f64 / denominator as f64)
    }

    /// Copy of this history restricted to records with `year <= max_year`.
    pub fn truncated(&self, max_year: i32) -> JournalHistory {
        JournalHistory {
            journal_id: self.journal_id.clone(),
            records: self
                .records
                .iter()
                .filter(|r| r.year <= max_year)
                .cloned()
                .collect(),
        }
    }

    /// Checks every stored invariant and reports all violations found.
    /// An empty report means the history is well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut violations = Vec::new();
        if self.records.is_empty() {
            violations.push(Violation::EmptyHistory);
            return violations;
        }
        let mut prev_year: Option<i32> = None;
        for record in &self.records {
            if let Some(prev) = prev_year {
                if record.year <= prev {
                    violations.push(Violation::OutOfOrderYear { year: record.year });
                } else if record.year > prev + 1 {
                    violations.push(Violation::YearGap {
                        from: prev,
                        to: record.year,
                    });
                }
            }
            prev_year = Some(record.year);

            if record.publications < 0 {
                violations.push(Violation::NegativePublications {
                    year: record.year,
                    value: record.publications,
                });
            }
            for (&pub_year, &count) in &record.citations_by_pub_year {
                if count < 0 {
                    violations.push(Violation::NegativeCitations {
                        year: record.year,
                        pub_year,
                        value: count,
                    });
                }
                if pub_year > record.year {
                    violations.push(Violation::CitationBeforePublication {
                        year: record.year,
                        pub_year,
                    });
                }
            }
            if !(0.0..=100.0).contains(&record.pct_not_cited) || record.pct_not_cited.is_nan() {
                violations.push(Violation::PctNotCitedOutOfRange {
                    year: record.year,
                    value: record.pct_not_cited,
                });
            }
            for (field, value) in [("snip", record.snip), ("sjr", record.sjr)] {
                if let Some(v) = value {
                    if !v.is_finite() || v < 0.0 {
                        violations.push(Violation::InvalidIndicator {
                            year: record.year,
                            field,
                            value: v,
                        });
                    }
                }
            }
        }
        if let Some(last) = self.records.last() {
            if last.publications < 1 {
                violations.push(Violation::InactiveFinalYear { year: last.year });
            }
        }
        violations
    }
}

/// A single invariant violation found by [`JournalHistory::validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    EmptyHistory,
    YearGap { from: i32, to: i32 },
    OutOfOrderYear { year: i32 },
    NegativePublications { year: i32, value: i64 },
    NegativeCitations { year: i32, pub_year: i32, value: i64 },
    CitationBeforePublication { year: i32, pub_year: i32 },
    PctNotCitedOutOfRange { year: i32, value: f64 },
    InvalidIndicator { year: i32, field: &'static str, value: f64 },
    InactiveFinalYear { year: i32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyHistory => write!(f, "history has no records"),
            Violation::YearGap { from, to } => write!(f, "gap between years {from} and {to}"),
            Violation::OutOfOrderYear { year } => {
                write!(f, "year {year} is out of chronological order")
            }
            Violation::NegativePublications { year, value } => {
                write!(f, "negative publication count {value} in {year}")
            }
            Violation::NegativeCitations {
                year,
                pub_year,
                value,
            } => write!(
                f,
                "negative citation count {value} in {year} for publications of {pub_year}"
            ),
            Violation::CitationBeforePublication { year, pub_year } => write!(
                f,
                "citation recorded in {year} for publications of later year {pub_year}"
            ),
            Violation::PctNotCitedOutOfRange { year, value } => {
                write!(f, "percent-not-cited {value} outside [0, 100] in {year}")
            }
            Violation::InvalidIndicator { year, field, value } => {
                write!(f, "invalid {field} value {value} in {year}")
            }
            Violation::InactiveFinalYear { year } => {
                write!(f, "no publications in final year {year}")
            }
        }
    }
}

/// A collection of journal histories with unique ids.
///
/// Immutable after construction; safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    journals: Vec<JournalHistory>,
    horizon: Option<(i32, i32)>,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate journal ids. The horizon is
    /// derived from the stored records.
    pub fn new(journals: Vec<JournalHistory>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for j in &journals {
            if !seen.insert(j.journal_id.as_str()) {
                return Err(Error::DuplicateJournal(j.journal_id.clone()));
            }
        }
        let min = journals.iter().filter_map(|j| j.first_year()).min();
        let max = journals.iter().filter_map(|j| j.last_year()).max();
        let horizon = match (min, max) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            _ => None,
        };
        Ok(Self { journals, horizon })
    }

    pub fn journals(&self) -> &[JournalHistory] {
        &self.journals
    }

    pub fn len(&self) -> usize {
        self.journals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.journals.is_empty()
    }

    /// `(min_year, max_year)` over all stored records; `None` when empty.
    pub fn horizon(&self) -> Option<(i32, i32)> {
        self.horizon
    }

    pub fn get(&self, journal_id: &str) -> Option<&JournalHistory> {
        self.journals.iter().find(|j| j.journal_id == journal_id)
    }

    /// Total number of annual records across all journals.
    pub fn record_count(&self) -> usize {
        self.journals.iter().map(|j| j.len()).sum()
    }
}

/// Reads a newline-delimited JSON dataset, one journal per line.
///
/// Blank lines are skipped. Parse failures carry the 1-based line number.
pub fn read_ndjson<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut journals = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let journal: JournalHistory =
            serde_json::from_str(&line).map_err(|source| Error::Parse {
                line: idx + 1,
                source,
            })?;
        journals.push(journal);
    }
    Dataset::new(journals)
}

pub fn read_ndjson_path(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_ndjson(BufReader::new(file))
}

/// Writes a dataset as newline-delimited JSON, one journal per line.
pub fn write_ndjson<W: Write>(dataset: &Dataset, mut writer: W) -> Result<()> {
    for journal in dataset.journals() {
        serde_json::to_writer(&mut writer, journal)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_ndjson_path(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_ndjson(dataset, std::io::BufWriter::new(file))
}
