use std::io::{self, Write};

use super::parse::HEADER;
use super::record::ValidationRecord;

/// Writes records in the ingest CSV format, header first.
pub struct RecordWriter<W: Write> {
    out: W,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{}", HEADER.join(","))?;
        Ok(RecordWriter { out })
    }

    pub fn write(&mut self, r: &ValidationRecord) -> io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{}",
            r.timestamp,
            r.direction,
            r.fare_class,
            r.benefit_type.as_ref().map_or("", |b| b.as_str()),
            r.ticket_type,
            r.media,
            r.origin_station,
            r.dest_station
        )
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Serializes a full file; the inverse of parsing for well-formed input.
pub fn serialize_records<'a, W, I>(records: I, out: W) -> io::Result<W>
where
    W: Write,
    I: IntoIterator<Item = &'a ValidationRecord>,
{
    let mut writer = RecordWriter::new(out)?;
    for r in records {
        writer.write(r)?;
    }
    writer.finish()
}
