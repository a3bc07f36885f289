use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use super::record::{
    Direction, FareClass, Media, StationFile, StationId, Timestamp, ValidationRecord, YearMonth,
};
use super::vocab::Vocabulary;

pub const HEADER: [&str; 8] = [
    "timestamp",
    "direction",
    "fare_class",
    "benefit_type",
    "ticket_type",
    "media",
    "origin_station",
    "dest_station",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// The first malformed row aborts the parse.
    #[default]
    Strict,
    /// Malformed rows are counted and skipped.
    Lenient,
}

impl std::str::FromStr for ParseMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(ParseMode::Strict),
            "lenient" => Ok(ParseMode::Lenient),
            _ => Err(format!("unknown parse mode {s:?} (strict|lenient)")),
        }
    }
}

/// Why a row was rejected. Ordered as reported in [`IngestStats::to_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RejectReason {
    FieldCount,
    BadEncoding,
    BadTimestamp,
    OutOfMonth,
    StationMismatch,
    BadStation,
    UnknownToken,
    BenefitFareMismatch,
}

impl RejectReason {
    pub const ALL: [RejectReason; 8] = [
        RejectReason::FieldCount,
        RejectReason::BadEncoding,
        RejectReason::BadTimestamp,
        RejectReason::OutOfMonth,
        RejectReason::StationMismatch,
        RejectReason::BadStation,
        RejectReason::UnknownToken,
        RejectReason::BenefitFareMismatch,
    ];

    pub fn key(self) -> &'static str {
        match self {
            RejectReason::FieldCount => "rejected_field_count",
            RejectReason::BadEncoding => "rejected_bad_encoding",
            RejectReason::BadTimestamp => "rejected_bad_timestamp",
            RejectReason::OutOfMonth => "rejected_out_of_month",
            RejectReason::StationMismatch => "rejected_station_mismatch",
            RejectReason::BadStation => "rejected_bad_station",
            RejectReason::UnknownToken => "rejected_unknown_token",
            RejectReason::BenefitFareMismatch => "rejected_benefit_fare_mismatch",
        }
    }

    /// Out-of-month and station-mismatch rows mean the file is bound to the
    /// wrong station or month, so they abort even a lenient parse.
    pub fn is_binding(self) -> bool {
        matches!(self, RejectReason::OutOfMonth | RejectReason::StationMismatch)
    }
}

/// A single row that violates a record invariant. Every variant carries the
/// offending token.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("expected 8 fields, found {0}")]
    FieldCount(usize),
    #[error("field {0} is not valid UTF-8")]
    BadEncoding(&'static str),
    #[error("bad timestamp {0:?}")]
    BadTimestamp(String),
    #[error("timestamp {timestamp:?} outside file month {year_month}")]
    OutOfMonth {
        timestamp: String,
        year_month: YearMonth,
    },
    #[error("{direction} row names station {found:?}, file is for {expected}")]
    StationMismatch {
        direction: Direction,
        expected: StationId,
        found: String,
    },
    #[error("invalid station id {0:?}")]
    BadStation(String),
    #[error("unknown {field} token {token:?}")]
    UnknownToken { field: &'static str, token: String },
    #[error("fare_class {fare_class} with benefit_type {benefit:?}")]
    BenefitFareMismatch { fare_class: FareClass, benefit: String },
}

impl RecordError {
    pub fn reason(&self) -> RejectReason {
        match self {
            RecordError::FieldCount(_) => RejectReason::FieldCount,
            RecordError::BadEncoding(_) => RejectReason::BadEncoding,
            RecordError::BadTimestamp(_) => RejectReason::BadTimestamp,
            RecordError::OutOfMonth { .. } => RejectReason::OutOfMonth,
            RecordError::StationMismatch { .. } => RejectReason::StationMismatch,
            RecordError::BadStation(_) => RejectReason::BadStation,
            RecordError::UnknownToken { .. } => RejectReason::UnknownToken,
            RecordError::BenefitFareMismatch { .. } => RejectReason::BenefitFareMismatch,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}: file name does not follow <station>_<YYYY-MM>.csv")]
    FileName(String),
    #[error("wrong header {found:?}, expected {:?}", HEADER.join(","))]
    Header { found: String },
    #[error("row {row}: {error}")]
    Malformed { row: u64, error: RecordError },
    #[error("row {row}: file binding violated: {error}")]
    Binding { row: u64, error: RecordError },
    #[error("read error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub rows_read: u64,
    pub rows_accepted: u64,
    pub rows_rejected: u64,
    pub rejected: BTreeMap<RejectReason, u64>,
}

impl IngestStats {
    pub fn rejected_for(&self, reason: RejectReason) -> u64 {
        self.rejected.get(&reason).copied().unwrap_or(0)
    }

    fn reject(&mut self, reason: RejectReason) {
        self.rows_rejected += 1;
        *self.rejected.entry(reason).or_default() += 1;
    }

    /// Flat `key=value` lines; every reason is listed, zero or not.
    pub fn to_report(&self) -> String {
        let mut out = format!(
            "rows_read={}\nrows_accepted={}\nrows_rejected={}\n",
            self.rows_read, self.rows_accepted, self.rows_rejected
        );
        for reason in RejectReason::ALL {
            out.push_str(&format!("{}={}\n", reason.key(), self.rejected_for(reason)));
        }
        out
    }
}

impl fmt::Display for IngestStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} read, {} accepted, {} rejected",
            self.rows_read, self.rows_accepted, self.rows_rejected
        )
    }
}

/// Validates rows for one station-month, interning station ids as it goes.
#[derive(Debug)]
pub struct RecordValidator<'v> {
    station: StationId,
    year_month: YearMonth,
    vocab: &'v Vocabulary,
    stations: HashMap<String, StationId>,
}

impl<'v> RecordValidator<'v> {
    pub fn new(station: StationId, year_month: YearMonth, vocab: &'v Vocabulary) -> Self {
        let mut stations = HashMap::new();
        stations.insert(station.as_str().to_string(), station.clone());
        RecordValidator {
            station,
            year_month,
            vocab,
            stations,
        }
    }

    fn station(&mut self, s: &str) -> Result<StationId, RecordError> {
        if let Some(id) = self.stations.get(s) {
            return Ok(id.clone());
        }
        let id = StationId::new(s).map_err(|_| RecordError::BadStation(s.to_string()))?;
        self.stations.insert(s.to_string(), id.clone());
        Ok(id)
    }

    pub fn validate<S: AsRef<str>>(&mut self, fields: &[S]) -> Result<ValidationRecord, RecordError> {
        if fields.len() != HEADER.len() {
            return Err(RecordError::FieldCount(fields.len()));
        }
        let f = |i: usize| fields[i].as_ref();

        let timestamp = Timestamp::parse(f(0)).map_err(|_| RecordError::BadTimestamp(f(0).to_string()))?;
        if !self.year_month.contains(timestamp.date()) {
            return Err(RecordError::OutOfMonth {
                timestamp: f(0).to_string(),
                year_month: self.year_month,
            });
        }
        let direction: Direction = f(1).parse().map_err(|_| unknown("direction", f(1)))?;
        let fare_class: FareClass = f(2).parse().map_err(|_| unknown("fare_class", f(2)))?;
        let benefit_type = match (fare_class, f(3)) {
            (FareClass::Full, "") => None,
            (FareClass::Discount, "") => {
                return Err(RecordError::BenefitFareMismatch {
                    fare_class,
                    benefit: String::new(),
                })
            }
            (FareClass::Full, b) => {
                return Err(RecordError::BenefitFareMismatch {
                    fare_class,
                    benefit: b.to_string(),
                })
            }
            (FareClass::Discount, b) => Some(
                self.vocab
                    .benefit_type(b)
                    .ok_or_else(|| unknown("benefit_type", b))?,
            ),
        };
        let ticket_type = self
            .vocab
            .ticket_type(f(4))
            .ok_or_else(|| unknown("ticket_type", f(4)))?;
        let media: Media = f(5).parse().map_err(|_| unknown("media", f(5)))?;
        let origin_station = self.station(f(6))?;
        let dest_station = self.station(f(7))?;

        let gate = match direction {
            Direction::Entry => &origin_station,
            Direction::Exit => &dest_station,
        };
        if *gate != self.station {
            return Err(RecordError::StationMismatch {
                direction,
                expected: self.station.clone(),
                found: gate.as_str().to_string(),
            });
        }

        Ok(ValidationRecord {
            timestamp,
            direction,
            fare_class,
            benefit_type,
            ticket_type,
            media,
            origin_station,
            dest_station,
        })
    }
}

fn unknown(field: &'static str, token: &str) -> RecordError {
    RecordError::UnknownToken {
        field,
        token: token.to_string(),
    }
}

/// Validates one row of raw tokens in header column order.
pub fn validate_record<S: AsRef<str>>(
    raw_fields: &[S],
    station: &StationId,
    year_month: YearMonth,
    vocab: &Vocabulary,
) -> Result<ValidationRecord, RecordError> {
    RecordValidator::new(station.clone(), year_month, vocab).validate(raw_fields)
}

/// Streaming iterator over a station-month CSV. Holds one row in memory at a
/// time. Fatal errors are yielded once, after which the stream ends.
pub struct RecordStream<'v, R> {
    reader: csv::Reader<R>,
    row: csv::ByteRecord,
    validator: RecordValidator<'v>,
    mode: ParseMode,
    stats: IngestStats,
    done: bool,
}

impl<'v, R: Read> RecordStream<'v, R> {
    /// Reads and checks the header row.
    pub fn new(
        reader: R,
        station: StationId,
        year_month: YearMonth,
        mode: ParseMode,
        vocab: &'v Vocabulary,
    ) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .quoting(false)
            .flexible(true)
            .buffer_capacity(1 << 16)
            .from_reader(reader);
        let mut row = csv::ByteRecord::new();
        if !reader.read_byte_record(&mut row)? || row.iter().ne(HEADER.iter().map(|h| h.as_bytes())) {
            let found = row
                .iter()
                .map(|f| String::from_utf8_lossy(f).into_owned())
                .collect::<Vec<_>>()
                .join(",");
            return Err(IngestError::Header { found });
        }
        Ok(RecordStream {
            reader,
            row,
            validator: RecordValidator::new(station, year_month, vocab),
            mode,
            stats: IngestStats::default(),
            done: false,
        })
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    pub fn into_stats(self) -> IngestStats {
        self.stats
    }

    fn validate_row(&mut self) -> Result<ValidationRecord, RecordError> {
        let mut fields = [""; 8];
        if self.row.len() != fields.len() {
            return Err(RecordError::FieldCount(self.row.len()));
        }
        for (slot, raw) in fields.iter_mut().zip(self.row.iter()) {
            *slot = std::str::from_utf8(raw).map_err(|_| RecordError::BadEncoding("row"))?;
        }
        self.validator.validate(&fields)
    }
}

impl<R: Read> Iterator for RecordStream<'_, R> {
    type Item = Result<ValidationRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            match self.reader.read_byte_record(&mut self.row) {
                Ok(false) => self.done = true,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                Ok(true) => {
                    self.stats.rows_read += 1;
                    let row = self.stats.rows_read;
                    match self.validate_row() {
                        Ok(record) => {
                            self.stats.rows_accepted += 1;
                            return Some(Ok(record));
                        }
                        Err(error) => {
                            let reason = error.reason();
                            self.stats.reject(reason);
                            if reason.is_binding() {
                                self.done = true;
                                return Some(Err(IngestError::Binding { row, error }));
                            }
                            if self.mode == ParseMode::Strict {
                                self.done = true;
                                return Some(Err(IngestError::Malformed { row, error }));
                            }
                        }
                    }
                }
            }
        }
        None
    }
}

/// Opens a station file for streaming. The station and month come from the
/// file name.
pub fn parse_file<'v>(
    file: &StationFile,
    mode: ParseMode,
    vocab: &'v Vocabulary,
) -> Result<RecordStream<'v, File>, IngestError> {
    let handle = File::open(&file.path).map_err(|source| IngestError::Io {
        path: file.path.display().to_string(),
        source,
    })?;
    RecordStream::new(handle, file.station.clone(), file.year_month, mode, vocab)
}

/// Resolves the file name, then opens it with [`parse_file`].
pub fn parse_path<'v>(
    path: &Path,
    mode: ParseMode,
    vocab: &'v Vocabulary,
) -> Result<RecordStream<'v, File>, IngestError> {
    let file =
        StationFile::from_path(path).ok_or_else(|| IngestError::FileName(path.display().to_string()))?;
    parse_file(&file, mode, vocab)
}

/// Drains a stream into memory. Intended for small inputs and tests.
pub fn collect_records<R: Read>(
    mut stream: RecordStream<'_, R>,
) -> Result<(Vec<ValidationRecord>, IngestStats), IngestError> {
    let records = stream.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok((records, stream.into_stats()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s1() -> StationId {
        StationId::new("S1").unwrap()
    }

    fn march() -> YearMonth {
        "2018-03".parse().unwrap()
    }

    fn validate(fields: [&str; 8]) -> Result<ValidationRecord, RecordError> {
        validate_record(&fields, &s1(), march(), &Vocabulary::default())
    }

    const OK: [&str; 8] = [
        "2018-03-05T08:12",
        "ENTRY",
        "FULL",
        "",
        "ONE_WAY",
        "SMARTCARD",
        "S1",
        "S9",
    ];

    #[test]
    fn valid_row() {
        let r = validate(OK).unwrap();
        assert_eq!(r.direction, Direction::Entry);
        assert_eq!(r.benefit_type, None);
        assert_eq!(r.dest_station.as_str(), "S9");
        assert_eq!(r.timestamp.minute_of_day(), 8 * 60 + 12);
    }

    #[test]
    fn station_mismatch() {
        let mut f = OK;
        f[6] = "S2";
        assert!(matches!(
            validate(f),
            Err(RecordError::StationMismatch { found, .. }) if found == "S2"
        ));
        // an EXIT row is bound through its destination
        let mut f = OK;
        f[1] = "EXIT";
        assert!(matches!(validate(f), Err(RecordError::StationMismatch { .. })));
        f[7] = "S1";
        assert!(validate(f).is_ok());
    }

    #[test]
    fn benefit_fare_consistency() {
        let mut f = OK;
        f[3] = "FEDERAL";
        assert!(matches!(
            validate(f),
            Err(RecordError::BenefitFareMismatch { benefit, .. }) if benefit == "FEDERAL"
        ));
        f[2] = "DISCOUNT";
        assert_eq!(validate(f).unwrap().benefit_type.unwrap().as_str(), "FEDERAL");
        f[3] = "";
        assert!(matches!(
            validate(f),
            Err(RecordError::BenefitFareMismatch { .. })
        ));
    }

    #[test]
    fn each_error_carries_its_token() {
        let cases: [(usize, &str, RejectReason); 6] = [
            (0, "2018-02-30T08:00", RejectReason::BadTimestamp),
            (0, "2018-04-01T00:00", RejectReason::OutOfMonth),
            (1, "IN", RejectReason::UnknownToken),
            (4, "SEASON", RejectReason::UnknownToken),
            (5, "PHONE", RejectReason::UnknownToken),
            (7, "", RejectReason::BadStation),
        ];
        for (i, token, reason) in cases {
            let mut f = OK;
            f[i] = token;
            let err = validate(f).unwrap_err();
            assert_eq!(err.reason(), reason, "{token}");
            if !token.is_empty() {
                assert!(err.to_string().contains(token), "{err}");
            }
        }
        assert_eq!(
            validate_record(&OK[..7], &s1(), march(), &Vocabulary::default()),
            Err(RecordError::FieldCount(7))
        );
    }

    fn stream(body: &str, mode: ParseMode) -> Result<(Vec<ValidationRecord>, IngestStats), IngestError> {
        let vocab = Vocabulary::default();
        let text = format!("{}\n{body}", HEADER.join(","));
        let s = RecordStream::new(text.as_bytes(), s1(), march(), mode, &vocab)?;
        collect_records(s)
    }

    #[test]
    fn clean_three_rows() {
        let body = "2018-03-05T08:12:00,ENTRY,FULL,,ONE_WAY,SMARTCARD,S1,S9\n\
                    2018-03-05T08:13:00,EXIT,DISCOUNT,RZD,SUBSCRIPTION,PAPER,S4,S1\n\
                    2018-03-06T19:00:59,ENTRY,FULL,,ROUND_TRIP,PAPER,S1,S2\n";
        let (records, stats) = stream(body, ParseMode::Strict).unwrap();
        assert_eq!(records.len(), 3);
        assert_eq!(stats.rows_rejected, 0);
        assert_eq!(stats.rows_read, 3);
    }

    #[test]
    fn lenient_skips_impossible_date() {
        let body = "2018-02-30T08:00,ENTRY,FULL,,ONE_WAY,SMARTCARD,S1,S9\n\
                    2018-03-05T08:12,ENTRY,FULL,,ONE_WAY,SMARTCARD,S1,S9\n";
        let (records, stats) = stream(body, ParseMode::Lenient).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(stats.rejected_for(RejectReason::BadTimestamp), 1);
        assert_eq!(stats.rows_read, stats.rows_accepted + stats.rows_rejected);

        let err = stream(body, ParseMode::Strict).unwrap_err();
        assert!(matches!(err, IngestError::Malformed { row: 1, .. }), "{err}");
    }

    #[test]
    fn binding_violations_abort_lenient() {
        let body = "2018-03-05T08:12,ENTRY,FULL,,ONE_WAY,SMARTCARD,S1,S9\n\
                    2018-04-05T08:12,ENTRY,FULL,,ONE_WAY,SMARTCARD,S1,S9\n";
        let err = stream(body, ParseMode::Lenient).unwrap_err();
        assert!(matches!(err, IngestError::Binding { row: 2, .. }), "{err}");
    }

    #[test]
    fn wrong_header_aborts() {
        let vocab = Vocabulary::default();
        let text = "time,direction\n";
        let err = RecordStream::new(text.as_bytes(), s1(), march(), ParseMode::Lenient, &vocab)
            .err()
            .unwrap();
        assert!(matches!(err, IngestError::Header { .. }));
        let err = RecordStream::new(&b""[..], s1(), march(), ParseMode::Lenient, &vocab)
            .err()
            .unwrap();
        assert!(matches!(err, IngestError::Header { .. }));
    }

    #[test]
    fn missing_file_aborts() {
        let vocab = Vocabulary::default();
        let err = parse_path(
            Path::new("/nonexistent/S1_2018-03.csv"),
            ParseMode::Lenient,
            &vocab,
        )
        .err()
        .unwrap();
        assert!(matches!(err, IngestError::Io { .. }));
        let err = parse_path(Path::new("/nonexistent/notes.csv"), ParseMode::Lenient, &vocab)
            .err()
            .unwrap();
        assert!(matches!(err, IngestError::FileName(_)));
    }

    #[test]
    fn report_lists_every_reason() {
        let report = IngestStats::default().to_report();
        assert_eq!(report.lines().count(), 3 + RejectReason::ALL.len());
        assert!(report.contains("rejected_bad_timestamp=0\n"));
    }
}
