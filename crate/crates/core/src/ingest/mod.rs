//! Per-station monthly validation files: record types, streaming parser
//! and writer.
//!
//! Files are UTF-8 CSV named `<station>_<YYYY-MM>.csv` with the fixed
//! header in [`HEADER`]. Parsing is streaming; memory use does not grow
//! with the number of rows.

mod parse;
mod record;
mod vocab;
mod write;

pub use parse::{
    collect_records, parse_file, parse_path, validate_record, IngestError, IngestStats, ParseMode,
    RecordError, RecordStream, RecordValidator, RejectReason, HEADER,
};
pub use record::{
    Direction, FareClass, Media, Precision, StationFile, StationId, Timestamp, Token, ValidationRecord,
    ValueError, YearMonth,
};
pub use vocab::{Vocabulary, DEFAULT_BENEFIT_TYPES, DEFAULT_TICKET_TYPES};
pub use write::{serialize_records, RecordWriter};
