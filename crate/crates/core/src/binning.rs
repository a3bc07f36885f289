//! Fixed-width time-of-day aggregation of validation records.
//!
//! Bins are half-open `[start, end)` in minutes of the local day, so a tap
//! at exactly 09:00:00 with 60-minute bins counts toward bin 9.

use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};

use chrono::NaiveDate;
use thiserror::Error;

use crate::ingest::{Direction, StationId, ValidationRecord};
use crate::table::{parse_field, FormatError};

pub const MINUTES_PER_DAY: u32 = 1440;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BinError {
    #[error("bin width {0} minutes does not tile a 1440-minute day")]
    InvalidWidth(u32),
    #[error("profile has zero total")]
    ZeroTotal,
    #[error("cannot rebin {from}-minute bins to {to}-minute bins")]
    Incompatible { from: u32, to: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BinConfig {
    width: u32,
}

impl BinConfig {
    pub const HOURLY: BinConfig = BinConfig { width: 60 };
    pub const HALF_HOURLY: BinConfig = BinConfig { width: 30 };

    pub fn new(bin_width_minutes: u32) -> Result<Self, BinError> {
        if bin_width_minutes == 0 || !MINUTES_PER_DAY.is_multiple_of(bin_width_minutes) {
            return Err(BinError::InvalidWidth(bin_width_minutes));
        }
        Ok(BinConfig {
            width: bin_width_minutes,
        })
    }

    pub fn width(self) -> u32 {
        self.width
    }

    pub fn bins(self) -> usize {
        (MINUTES_PER_DAY / self.width) as usize
    }

    pub fn bin_of(self, minute_of_day: u32) -> usize {
        (minute_of_day / self.width) as usize
    }

    /// First minute of `bin`.
    pub fn start_minute(self, bin: usize) -> u32 {
        bin as u32 * self.width
    }
}

impl Default for BinConfig {
    fn default() -> Self {
        BinConfig::HOURLY
    }
}

impl fmt::Display for BinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}min", self.width)
    }
}

/// Tap counts per time-of-day bin for one station, date and direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayProfile {
    pub station: StationId,
    pub date: NaiveDate,
    pub direction: Direction,
    pub config: BinConfig,
    pub counts: Vec<u64>,
}

impl DayProfile {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Incremental form of [`bin_records`] for streaming input.
#[derive(Debug, Clone)]
pub struct ProfileAccumulator {
    station: StationId,
    config: BinConfig,
    days: BTreeMap<(NaiveDate, Direction), Vec<u64>>,
}

impl ProfileAccumulator {
    pub fn new(station: StationId, config: BinConfig) -> Self {
        ProfileAccumulator {
            station,
            config,
            days: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, record: &ValidationRecord) {
        debug_assert_eq!(record.gate_station(), &self.station);
        let bins = self.config.bins();
        let counts = self
            .days
            .entry((record.timestamp.date(), record.direction))
            .or_insert_with(|| vec![0; bins]);
        counts[self.config.bin_of(record.timestamp.minute_of_day())] += 1;
    }

    /// Profiles ordered by date, then direction (ENTRY before EXIT).
    pub fn finish(self) -> Vec<DayProfile> {
        let ProfileAccumulator {
            station,
            config,
            days,
        } = self;
        days.into_iter()
            .map(|((date, direction), counts)| DayProfile {
                station: station.clone(),
                date,
                direction,
                config,
                counts,
            })
            .collect()
    }
}

/// One profile per (date, direction) that has at least one record. Days
/// without records produce nothing.
pub fn bin_records<I>(records: I, station: &StationId, config: BinConfig) -> Vec<DayProfile>
where
    I: IntoIterator,
    I::Item: Borrow<ValidationRecord>,
{
    let mut acc = ProfileAccumulator::new(station.clone(), config);
    for r in records {
        acc.push(r.borrow());
    }
    acc.finish()
}

/// Shares of the day total per bin; sums to 1.
pub fn normalize_counts(counts: &[u64]) -> Result<Vec<f64>, BinError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(BinError::ZeroTotal);
    }
    let total = total as f64;
    Ok(counts.iter().map(|&c| c as f64 / total).collect())
}

pub fn normalize_profile(p: &DayProfile) -> Result<Vec<f64>, BinError> {
    normalize_counts(&p.counts)
}

/// Real-valued counterpart of [`normalize_counts`] for averaged vectors.
pub fn normalize_values(values: &[f64]) -> Result<Vec<f64>, BinError> {
    let total: f64 = values.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(BinError::ZeroTotal);
    }
    Ok(values.iter().map(|v| v / total).collect())
}

/// Sums adjacent bins into a coarser width.
pub fn rebin(p: &DayProfile, coarser: BinConfig) -> Result<DayProfile, BinError> {
    let from = p.config.width();
    let to = coarser.width();
    if to < from || !to.is_multiple_of(from) {
        return Err(BinError::Incompatible { from, to });
    }
    let factor = (to / from) as usize;
    let counts = p.counts.chunks(factor).map(|chunk| chunk.iter().sum()).collect();
    Ok(DayProfile {
        counts,
        config: coarser,
        ..p.clone()
    })
}

const PROFILE_PREFIX: [&str; 4] = ["station", "date", "direction", "bin_width"];

/// Writes `station,date,direction,bin_width,c0,...,cN` with a header row.
/// All profiles must share one bin config.
pub fn write_profiles<W: Write>(profiles: &[DayProfile], mut out: W) -> io::Result<W> {
    let bins = profiles.first().map_or(0, |p| p.config.bins());
    let mut header: Vec<String> = PROFILE_PREFIX.iter().map(|s| s.to_string()).collect();
    header.extend((0..bins).map(|i| format!("c{i}")));
    writeln!(out, "{}", header.join(","))?;
    for p in profiles {
        assert_eq!(p.config.bins(), bins, "mixed bin configs in one profile file");
        write!(
            out,
            "{},{},{},{}",
            p.station,
            p.date.format("%Y-%m-%d"),
            p.direction,
            p.config.width()
        )?;
        for c in &p.counts {
            write!(out, ",{c}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(out)
}

#[derive(Debug, Error)]
pub enum ProfileReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub fn read_profiles<R: BufRead>(input: R) -> Result<Vec<DayProfile>, ProfileReadError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| FormatError::new(1, "empty profile file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < PROFILE_PREFIX.len() + 1 || cols[..4] != PROFILE_PREFIX {
        return Err(FormatError::new(1, format!("not a profile header: {header:?}")).into());
    }
    let bins = cols.len() - PROFILE_PREFIX.len();
    let mut out = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(FormatError::new(
                line_no,
                format!("expected {} fields, found {}", cols.len(), f.len()),
            )
            .into());
        }
        let station: StationId = parse_field(line_no, "station", f[0])?;
        let date: NaiveDate = parse_field(line_no, "date", f[1])?;
        let direction: Direction = parse_field(line_no, "direction", f[2])?;
        let width: u32 = parse_field(line_no, "bin_width", f[3])?;
        let config = BinConfig::new(width).map_err(|e| FormatError::new(line_no, e.to_string()))?;
        if config.bins() != bins {
            return Err(FormatError::new(
                line_no,
                format!(
                    "bin_width {width} implies {} bins, header has {bins}",
                    config.bins()
                ),
            )
            .into());
        }
        let counts = f[4..]
            .iter()
            .map(|c| parse_field::<u64>(line_no, "count", c))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(DayProfile {
            station,
            date,
            direction,
            config,
            counts,
        });
    }
    Ok(out)
}
