//! Synthetic station-month validation files.
//!
//! Generation is fully determined by the scenario and the month:
//!
//! * The random source is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//!   `seed_from_u64(scenario.seed)`, using stream number
//!   `year * 12 + (month - 1)`. Each month is an independent stream, so a
//!   month's file does not depend on which other months were generated.
//! * Days are visited in calendar order. For each day, ENTRY is generated
//!   before EXIT and bins in increasing order. Each bin draws a Poisson
//!   count with the scenario's expected value (`rand_distr::Poisson`; zero
//!   expectation draws nothing). Each tap then draws, in order: its second
//!   within the bin (uniform), fare class, benefit type (DISCOUNT only),
//!   ticket type, media, and counterpart station.
//! * A day's rows are stably sorted by timestamp before writing.
//!
//! The exact bytes depend on the pinned versions of `rand`, `rand_chacha`
//! and `rand_distr` in `Cargo.lock`.

mod scenario;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::config::ConfigError;
use crate::ingest::{
    Direction, FareClass, RecordWriter, StationFile, Timestamp, ValidationRecord, YearMonth,
};
use crate::templates::classify_day;

pub use scenario::{
    canonical_scenario, canonical_scenarios, load_scenarios, parse_scenarios, Categorical, MetadataMix,
    StationScenario,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("scenario configuration: {0}")]
    Config(String),
    #[error(transparent)]
    ConfigFile(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

impl SynthError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> SynthError + '_ {
        move |source| SynthError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// What a generation run emitted: per-day counts and per-field value counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EmissionLog {
    /// Every (date, direction) of the month, zero counts included.
    pub counts: BTreeMap<(NaiveDate, Direction), u64>,
    /// field name -> value -> rows.
    pub fields: BTreeMap<&'static str, BTreeMap<String, u64>>,
    pub total_rows: u64,
}

impl EmissionLog {
    pub fn count(&self, date: NaiveDate, direction: Direction) -> u64 {
        self.counts.get(&(date, direction)).copied().unwrap_or(0)
    }

    fn note(&mut self, field: &'static str, value: &str) {
        let values = self.fields.entry(field).or_default();
        match values.get_mut(value) {
            Some(n) => *n += 1,
            None => {
                values.insert(value.to_string(), 1);
            }
        }
    }

    /// `date,direction,count` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<W> {
        writeln!(out, "date,direction,count")?;
        for ((date, direction), n) in &self.counts {
            writeln!(out, "{},{direction},{n}", date.format("%Y-%m-%d"))?;
        }
        out.flush()?;
        Ok(out)
    }

    /// `field,value,count` rows.
    pub fn write_fields_csv<W: Write>(&self, mut out: W) -> io::Result<W> {
        writeln!(out, "field,value,count")?;
        for (field, values) in &self.fields {
            for (value, n) in values {
                writeln!(out, "{field},{value},{n}")?;
            }
        }
        out.flush()?;
        Ok(out)
    }
}

/// Generates one station-month in the ingest CSV format.
pub fn generate_month<W: Write>(
    scenario: &StationScenario,
    year_month: YearMonth,
    out: W,
) -> Result<EmissionLog, SynthError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(year_month.ordinal());

    let policy = scenario.calendar();
    let mix = &scenario.metadata_mix;
    let fare = mix.fare_class.sampler();
    let benefit = mix.benefit_type.sampler();
    let ticket = mix.ticket_type.sampler();
    let media = mix.media.sampler();
    let counterpart = scenario.counterparts.sampler();
    let width_secs = scenario.config.width() * 60;

    let mut writer = RecordWriter::new(out).map_err(|e| SynthError::Io {
        path: "<output>".into(),
        source: e,
    })?;
    let mut log = EmissionLog::default();
    let mut day: Vec<ValidationRecord> = Vec::new();

    for date in year_month.days() {
        let workday = classify_day(date, &policy).workday;
        day.clear();
        for direction in [Direction::Entry, Direction::Exit] {
            let mut emitted = 0u64;
            for (bin, &mean) in scenario.expected(workday, direction).iter().enumerate() {
                if mean <= 0.0 {
                    continue;
                }
                let n = Poisson::new(mean).expect("positive finite mean").sample(&mut rng) as u64;
                emitted += n;
                for _ in 0..n {
                    let second = scenario.config.start_minute(bin) * 60 + rng.random_range(0..width_secs);
                    let time = NaiveTime::from_num_seconds_from_midnight_opt(second, 0).expect("within day");
                    let fare_class = fare.sample(&mut rng);
                    let benefit_type = (fare_class == FareClass::Discount).then(|| benefit.sample(&mut rng));
                    let ticket_type = ticket.sample(&mut rng);
                    let media = media.sample(&mut rng);
                    let other = counterpart.sample(&mut rng);
                    let (origin_station, dest_station) = match direction {
                        Direction::Entry => (scenario.station.clone(), other),
                        Direction::Exit => (other, scenario.station.clone()),
                    };
                    day.push(ValidationRecord {
                        timestamp: Timestamp::seconds(date.and_time(time)),
                        direction,
                        fare_class,
                        benefit_type,
                        ticket_type,
                        media,
                        origin_station,
                        dest_station,
                    });
                }
            }
            log.counts.insert((date, direction), emitted);
        }
        day.sort_by_key(|r| r.timestamp);
        for r in &day {
            log.note("fare_class", r.fare_class.as_str());
            log.note("benefit_type", r.benefit_type.as_ref().map_or("", |b| b.as_str()));
            log.note("ticket_type", r.ticket_type.as_str());
            log.note("media", r.media.as_str());
            writer.write(r).map_err(|e| SynthError::Io {
                path: "<output>".into(),
                source: e,
            })?;
        }
        log.total_rows += day.len() as u64;
    }
    writer.finish().map_err(|e| SynthError::Io {
        path: "<output>".into(),
        source: e,
    })?;
    Ok(log)
}

/// Writes `<station>_<YYYY-MM>.csv` into `dir`.
pub fn write_month(
    scenario: &StationScenario,
    year_month: YearMonth,
    dir: &Path,
) -> Result<(PathBuf, EmissionLog), SynthError> {
    let path = dir.join(StationFile::file_name(&scenario.station, year_month));
    let file = File::create(&path).map_err(SynthError::io(&path))?;
    let log =
        generate_month(scenario, year_month, BufWriter::with_capacity(1 << 16, file)).map_err(
            |e| match e {
                SynthError::Io { source, .. } => SynthError::Io {
                    path: path.display().to_string(),
                    source,
                },
                other => other,
            },
        )?;
    Ok((path, log))
}
