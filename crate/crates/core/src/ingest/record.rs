//! Validation record and the value types it is built from.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("invalid station id {0:?}")]
    StationId(String),
    #[error("invalid year-month {0:?} (expected YYYY-MM)")]
    YearMonth(String),
    #[error("unknown {field} token {token:?}")]
    Token { field: &'static str, token: String },
    #[error("invalid timestamp {0:?}")]
    Timestamp(String),
}

/// Station identifier: a non-empty token without commas or line breaks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StationId(Arc<str>);

impl StationId {
    pub fn new(id: &str) -> Result<Self, ValueError> {
        if id.is_empty() || id.contains([',', '\n', '\r']) || id.trim() != id {
            return Err(ValueError::StationId(id.to_string()));
        }
        Ok(StationId(Arc::from(id)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for StationId {
    type Err = ValueError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StationId::new(s)
    }
}

macro_rules! closed_token {
    ($(#[$meta:meta])* $name:ident, $field:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ValueError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(ValueError::Token { field: $field, token: s.to_string() }),
                }
            }
        }
    };
}

closed_token!(
    /// Tap direction relative to the station that owns the file.
    Direction, "direction", { Entry => "ENTRY", Exit => "EXIT" }
);
closed_token!(FareClass, "fare_class", { Full => "FULL", Discount => "DISCOUNT" });
closed_token!(Media, "media", { Paper => "PAPER", Smartcard => "SMARTCARD" });

/// Open-vocabulary token (ticket type, benefit type). Cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token(Arc<str>);

impl Token {
    pub fn new(s: &str) -> Self {
        Token(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Calendar month, e.g. `2018-03`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    year: i32,
    month: u32,
}

impl YearMonth {
    pub fn new(year: i32, month: u32) -> Result<Self, ValueError> {
        if !(1..=12).contains(&month) || !(1..=9999).contains(&year) {
            return Err(ValueError::YearMonth(format!("{year}-{month}")));
        }
        Ok(YearMonth { year, month })
    }

    pub fn of(date: NaiveDate) -> Self {
        YearMonth {
            year: date.year(),
            month: date.month(),
        }
    }

    pub fn year(self) -> i32 {
        self.year
    }

    pub fn month(self) -> u32 {
        self.month
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("validated month")
    }

    pub fn next(self) -> Self {
        if self.month == 12 {
            YearMonth {
                year: self.year + 1,
                month: 1,
            }
        } else {
            YearMonth {
                year: self.year,
                month: self.month + 1,
            }
        }
    }

    pub fn days(self) -> impl Iterator<Item = NaiveDate> {
        let first = self.first_day();
        first.iter_days().take_while(move |d| d.month() == first.month())
    }

    pub fn contains(self, date: NaiveDate) -> bool {
        date.year() == self.year && date.month() == self.month
    }

    /// Months elapsed since year 0; used as a stream selector by the generator.
    pub fn ordinal(self) -> u64 {
        self.year as u64 * 12 + (self.month as u64 - 1)
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = ValueError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ValueError::YearMonth(s.to_string());
        let b = s.as_bytes();
        if b.len() != 7 || b[4] != b'-' {
            return Err(err());
        }
        let year = digits(&b[0..4]).ok_or_else(err)? as i32;
        let month = digits(&b[5..7]).ok_or_else(err)?;
        YearMonth::new(year, month).map_err(|_| err())
    }
}

/// How many fractional-time fields a timestamp was written with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Precision {
    Minute,
    Second,
    /// Fractional seconds with this many digits (1..=9).
    Fraction(u8),
}

/// Naive local timestamp that remembers its textual precision, so records
/// serialize back to the bytes they were parsed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    pub datetime: NaiveDateTime,
    pub precision: Precision,
}

impl Timestamp {
    pub fn seconds(datetime: NaiveDateTime) -> Self {
        Timestamp {
            datetime,
            precision: Precision::Second,
        }
    }

    pub fn date(&self) -> NaiveDate {
        self.datetime.date()
    }

    /// Minute of the local day, 0..1440.
    pub fn minute_of_day(&self) -> u32 {
        self.datetime.hour() * 60 + self.datetime.minute()
    }

    /// Parses `YYYY-MM-DDTHH:MM`, optionally followed by `:SS` and `.f{1,9}`.
    pub fn parse(s: &str) -> Result<Self, ValueError> {
        let err = || ValueError::Timestamp(s.to_string());
        let b = s.as_bytes();
        if b.len() < 16 || b[4] != b'-' || b[7] != b'-' || b[10] != b'T' || b[13] != b':' {
            return Err(err());
        }
        let year = digits(&b[0..4]).ok_or_else(err)? as i32;
        let month = digits(&b[5..7]).ok_or_else(err)?;
        let day = digits(&b[8..10]).ok_or_else(err)?;
        let hour = digits(&b[11..13]).ok_or_else(err)?;
        let minute = digits(&b[14..16]).ok_or_else(err)?;
        let (second, nanos, precision) = match b.len() {
            16 => (0, 0, Precision::Minute),
            19 if b[16] == b':' => (digits(&b[17..19]).ok_or_else(err)?, 0, Precision::Second),
            21..=29 if b[16] == b':' && b[19] == b'.' => {
                let frac = &b[20..];
                let value = digits(frac).ok_or_else(err)?;
                let nanos = value * 10u32.pow(9 - frac.len() as u32);
                (
                    digits(&b[17..19]).ok_or_else(err)?,
                    nanos,
                    Precision::Fraction(frac.len() as u8),
                )
            }
            _ => return Err(err()),
        };
        let date = NaiveDate::from_ymd_opt(year, month, day).ok_or_else(err)?;
        // chrono accepts second = 60 as a leap second; local validation logs never carry one
        if second > 59 {
            return Err(err());
        }
        let time = NaiveTime::from_hms_nano_opt(hour, minute, second, nanos).ok_or_else(err)?;
        Ok(Timestamp {
            datetime: date.and_time(time),
            precision,
        })
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dt = &self.datetime;
        write!(
            f,
            "{:04}-{:02}-{:02}T{:02}:{:02}",
            dt.year(),
            dt.month(),
            dt.day(),
            dt.hour(),
            dt.minute()
        )?;
        match self.precision {
            Precision::Minute => Ok(()),
            Precision::Second => write!(f, ":{:02}", dt.second()),
            Precision::Fraction(n) => {
                let frac = dt.nanosecond() / 10u32.pow(9 - n as u32);
                write!(f, ":{:02}.{:0width$}", dt.second(), frac, width = n as usize)
            }
        }
    }
}

fn digits(b: &[u8]) -> Option<u32> {
    if b.is_empty() {
        return None;
    }
    b.iter().try_fold(0u32, |acc, &c| {
        c.is_ascii_digit().then(|| acc * 10 + (c - b'0') as u32)
    })
}

/// One tap at a station gate. Carries no passenger or card identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ValidationRecord {
    pub timestamp: Timestamp,
    pub direction: Direction,
    pub fare_class: FareClass,
    pub benefit_type: Option<Token>,
    pub ticket_type: Token,
    pub media: Media,
    pub origin_station: StationId,
    pub dest_station: StationId,
}

impl ValidationRecord {
    /// The station whose gate produced this tap.
    pub fn gate_station(&self) -> &StationId {
        match self.direction {
            Direction::Entry => &self.origin_station,
            Direction::Exit => &self.dest_station,
        }
    }
}

/// A per-station, per-month input file named `<station>_<YYYY-MM>.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StationFile {
    pub station: StationId,
    pub year_month: YearMonth,
    pub path: PathBuf,
    pub declared_row_count: Option<u64>,
}

impl StationFile {
    /// Binds a path to its station and month using the file-name convention.
    /// Station ids may themselves contain underscores; the last one separates
    /// the month.
    pub fn from_path(path: &Path) -> Option<Self> {
        let name = path.file_name()?.to_str()?;
        let stem = name.strip_suffix(".csv")?;
        let (station, month) = stem.rsplit_once('_')?;
        Some(StationFile {
            station: StationId::new(station).ok()?,
            year_month: month.parse().ok()?,
            path: path.to_path_buf(),
            declared_row_count: None,
        })
    }

    pub fn file_name(station: &StationId, year_month: YearMonth) -> String {
        format!("{station}_{year_month}.csv")
    }
}
