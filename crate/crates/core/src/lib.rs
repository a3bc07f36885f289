//! Station usage analytics from smart-card validation logs.
//!
//! The pipeline runs in stages, each with a plain-text interchange format:
//!
//! 1. [`ingest`] streams per-station monthly CSV files into typed records.
//! 2. [`binning`] aggregates records into per-day time-of-day profiles.
//! 3. [`similarity`] compares profiles point by point.
//! 4. [`templates`] groups days into classes, checks that they agree, and
//!    averages them into usage templates.
//! 5. [`classify`] finds peaks and dips in templates and assigns station
//!    archetypes.
//! 6. [`change`] measures how a template moved between periods.
//!
//! [`synth`] generates validation files from parameterised scenarios and
//! [`plot`] renders series as SVG.

pub mod binning;
pub mod change;
pub mod classify;
pub mod config;
pub mod ingest;
pub mod plot;
pub mod similarity;
pub mod synth;
pub mod table;
pub mod templates;

pub use binning::{bin_records, normalize_profile, rebin, BinConfig, DayProfile, ProfileAccumulator};
pub use change::{change_matrix, diff_templates, ChangeReport, ChangeThresholds};
pub use classify::{
    classify_station, find_peaks, label_template, Archetype, MorphologyLabel, Peak, StationClassification,
    StationTemplates, WindowConfig,
};
pub use ingest::{
    parse_file, validate_record, Direction, IngestStats, ParseMode, StationFile, StationId, ValidationRecord,
    Vocabulary, YearMonth,
};
pub use similarity::{coherence, distance, pairwise_matrix, DistanceKind, SimilarityMatrix};
pub use synth::{canonical_scenarios, generate_month, EmissionLog, StationScenario};
pub use templates::{
    check_coherence, classify_day, extract_template, CalendarPolicy, DayClass, UsageTemplate,
};
