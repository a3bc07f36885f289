//! Peak detection and morphology labels for usage templates, and the
//! station archetype rule built on them.
//!
//! All rules compare values against fractions of other values in the same
//! template, so labels do not change when a template is scaled.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::binning::BinConfig;
use crate::config::{ConfigError, ConfigFile, Section};
use crate::ingest::{Direction, StationId};
use crate::templates::{DayClass, UsageTemplate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("series has {0} bins, need at least 3")]
    TooShort(usize),
    #[error("series has zero total")]
    ZeroTotal,
    #[error("missing {0} template")]
    MissingTemplate(&'static str),
    #[error("template for {found} passed as {expected}")]
    WrongTemplate { expected: String, found: String },
    #[error("invalid window config: {0}")]
    Window(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub bin_index: usize,
    pub value: f64,
    /// Height above the higher of the two flanking minima.
    pub prominence: f64,
}

/// Time-of-day windows (minutes, half-open) and ratio thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowConfig {
    pub morning: Range<u32>,
    pub evening: Range<u32>,
    pub midday: Range<u32>,
    pub peak_height_frac: f64,
    pub dip_frac: f64,
    /// Morning/evening peak ratio band for MIXED stations.
    pub mixed_ratio: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            morning: 6 * 60..10 * 60,
            evening: 16 * 60..20 * 60,
            midday: 12 * 60..15 * 60,
            peak_height_frac: 0.5,
            dip_frac: 0.35,
            mixed_ratio: 1.5,
        }
    }
}

fn parse_window(section: &Section, key: &str) -> Result<Option<Range<u32>>, ConfigError> {
    let Some(raw) = section.get(key) else {
        return Ok(None);
    };
    let minute = |s: &str| -> Option<u32> {
        let (h, m) = s.trim().split_once(':')?;
        let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
        (m < 60 && h * 60 + m <= 1440).then_some(h * 60 + m)
    };
    raw.split_once('-')
        .and_then(|(a, b)| Some(minute(a)?..minute(b)?))
        .map(Some)
        .ok_or_else(|| section.invalid(key, raw, "expected HH:MM-HH:MM"))
}

impl WindowConfig {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        let windows = [
            ("morning", &self.morning),
            ("midday", &self.midday),
            ("evening", &self.evening),
        ];
        for (name, w) in windows {
            if w.start >= w.end || w.end > 1440 {
                return Err(ClassifyError::Window(format!(
                    "{name} window {w:?} is empty or past midnight"
                )));
            }
        }
        for (i, (a, wa)) in windows.iter().enumerate() {
            for (b, wb) in &windows[i + 1..] {
                if wa.start < wb.end && wb.start < wa.end {
                    return Err(ClassifyError::Window(format!("{a} and {b} windows overlap")));
                }
            }
        }
        if !(self.peak_height_frac > 0.0 && self.peak_height_frac <= 1.0) {
            return Err(ClassifyError::Window(format!(
                "peak_height_frac {} not in (0, 1]",
                self.peak_height_frac
            )));
        }
        if !(self.dip_frac > 0.0 && self.dip_frac < 1.0) {
            return Err(ClassifyError::Window(format!(
                "dip_frac {} not in (0, 1)",
                self.dip_frac
            )));
        }
        if !(self.mixed_ratio >= 1.0 && self.mixed_ratio.is_finite()) {
            return Err(ClassifyError::Window(format!(
                "mixed_ratio {} < 1",
                self.mixed_ratio
            )));
        }
        Ok(())
    }

    /// Keys: `morning`, `midday`, `evening` as `HH:MM-HH:MM`;
    /// `peak_height_frac`, `dip_frac`, `mixed_ratio` as numbers.
    pub fn from_config(cfg: &ConfigFile) -> Result<Self, ConfigError> {
        let root = cfg.root();
        root.check_keys(&[
            "morning",
            "midday",
            "evening",
            "peak_height_frac",
            "dip_frac",
            "mixed_ratio",
        ])?;
        let mut w = WindowConfig::default();
        if let Some(r) = parse_window(&root, "morning")? {
            w.morning = r;
        }
        if let Some(r) = parse_window(&root, "midday")? {
            w.midday = r;
        }
        if let Some(r) = parse_window(&root, "evening")? {
            w.evening = r;
        }
        w.peak_height_frac = root.parse("peak_height_frac")?.unwrap_or(w.peak_height_frac);
        w.dip_frac = root.parse("dip_frac")?.unwrap_or(w.dip_frac);
        w.mixed_ratio = root.parse("mixed_ratio")?.unwrap_or(w.mixed_ratio);
        w.validate().map_err(|e| root.invalid("windows", "", e))?;
        Ok(w)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_config(&ConfigFile::load(path)?)
    }

    fn bins_in(config: BinConfig, window: &Range<u32>) -> impl Iterator<Item = usize> + '_ {
        (0..config.bins()).filter(move |&b| window.contains(&config.start_minute(b)))
    }
}

/// Local maxima with value at least `height_frac` of the series maximum,
/// in bin order. A flat top reports its first bin; the first and last bins
/// are never peaks.
pub fn find_peaks(values: &[f64], height_frac: f64) -> Result<Vec<Peak>, ClassifyError> {
    let n = values.len();
    if n < 3 {
        return Err(ClassifyError::TooShort(n));
    }
    if values.iter().sum::<f64>() <= 0.0 {
        return Err(ClassifyError::ZeroTotal);
    }
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let threshold = height_frac * max;

    let mut peaks = Vec::new();
    let mut i = 1;
    while i < n - 1 {
        if values[i] > values[i - 1] {
            let mut end = i;
            while end + 1 < n && values[end + 1] == values[i] {
                end += 1;
            }
            if end + 1 < n && values[end + 1] < values[i] && values[i] >= threshold {
                peaks.push(Peak {
                    bin_index: i,
                    value: values[i],
                    prominence: prominence(values, i, end),
                });
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    Ok(peaks)
}

/// Walks outward from the plateau `[start, end]` until a strictly higher
/// value or the series edge, taking the minimum on each side.
fn prominence(values: &[f64], start: usize, end: usize) -> f64 {
    let top = values[start];
    let mut left_min = top;
    for &v in values[..start].iter().rev() {
        if v > top {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = top;
    for &v in &values[end + 1..] {
        if v > top {
            break;
        }
        right_min = right_min.min(v);
    }
    top - left_min.max(right_min)
}

pub fn find_template_peaks(t: &UsageTemplate, cfg: &WindowConfig) -> Result<Vec<Peak>, ClassifyError> {
    find_peaks(&t.mean_counts, cfg.peak_height_frac)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MorphologyLabel {
    MorningPeak,
    EveningPeak,
    DualPeak,
    MiddayDip,
    NoEveningPeak,
    Flat,
}

impl MorphologyLabel {
    pub const ALL: [MorphologyLabel; 6] = [
        MorphologyLabel::MorningPeak,
        MorphologyLabel::EveningPeak,
        MorphologyLabel::DualPeak,
        MorphologyLabel::MiddayDip,
        MorphologyLabel::NoEveningPeak,
        MorphologyLabel::Flat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MorphologyLabel::MorningPeak => "MORNING_PEAK",
            MorphologyLabel::EveningPeak => "EVENING_PEAK",
            MorphologyLabel::DualPeak => "DUAL_PEAK",
            MorphologyLabel::MiddayDip => "MIDDAY_DIP",
            MorphologyLabel::NoEveningPeak => "NO_EVENING_PEAK",
            MorphologyLabel::Flat => "FLAT",
        }
    }
}

impl fmt::Display for MorphologyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MorphologyLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MorphologyLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown label {s:?}"))
    }
}

pub type LabelSet = BTreeSet<MorphologyLabel>;

/// Peaks and labels for one series.
#[derive(Debug, Clone, PartialEq)]
pub struct Morphology {
    pub peaks: Vec<Peak>,
    pub labels: LabelSet,
}

/// Labels a raw per-bin series.
///
/// MIDDAY_DIP needs a peak before and a peak after the midday window, and a
/// midday minimum at or below `dip_frac` of the reference level: the mean of
/// the morning and evening peak values when both exist, else the highest
/// peak.
pub fn label_series(
    values: &[f64],
    config: BinConfig,
    cfg: &WindowConfig,
) -> Result<Morphology, ClassifyError> {
    let peaks = find_peaks(values, cfg.peak_height_frac)?;
    let in_window = |w: &Range<u32>| -> Option<f64> {
        peaks
            .iter()
            .filter(|p| w.contains(&config.start_minute(p.bin_index)))
            .map(|p| p.value)
            .reduce(f64::max)
    };
    let morning = in_window(&cfg.morning);
    let evening = in_window(&cfg.evening);
    let midday_peak = in_window(&cfg.midday);

    let mut labels = LabelSet::new();
    if peaks.is_empty() {
        labels.insert(MorphologyLabel::Flat);
        return Ok(Morphology { peaks, labels });
    }
    if morning.is_some() {
        labels.insert(MorphologyLabel::MorningPeak);
    }
    if evening.is_some() {
        labels.insert(MorphologyLabel::EveningPeak);
    }
    if morning.is_some() && evening.is_some() {
        labels.insert(MorphologyLabel::DualPeak);
    }
    if (morning.is_some() || midday_peak.is_some()) && evening.is_none() {
        labels.insert(MorphologyLabel::NoEveningPeak);
    }

    let before = peaks
        .iter()
        .any(|p| config.start_minute(p.bin_index) < cfg.midday.start);
    let after = peaks
        .iter()
        .any(|p| config.start_minute(p.bin_index) >= cfg.midday.end);
    let midday_min = WindowConfig::bins_in(config, &cfg.midday)
        .map(|b| values[b])
        .reduce(f64::min);
    if let (true, true, Some(low)) = (before, after, midday_min) {
        let reference = match (morning, evening) {
            (Some(m), Some(e)) => (m + e) / 2.0,
            _ => peaks.iter().map(|p| p.value).fold(f64::MIN, f64::max),
        };
        if low <= cfg.dip_frac * reference {
            labels.insert(MorphologyLabel::MiddayDip);
        }
    }
    Ok(Morphology { peaks, labels })
}

pub fn label_template(t: &UsageTemplate, cfg: &WindowConfig) -> Result<LabelSet, ClassifyError> {
    Ok(label_series(&t.mean_counts, t.config, cfg)?.labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Archetype {
    CommuterOrigin,
    EmploymentHub,
    Mixed,
    Unclassified,
}

impl Archetype {
    pub fn as_str(self) -> &'static str {
        match self {
            Archetype::CommuterOrigin => "COMMUTER_ORIGIN",
            Archetype::EmploymentHub => "EMPLOYMENT_HUB",
            Archetype::Mixed => "MIXED",
            Archetype::Unclassified => "UNCLASSIFIED",
        }
    }
}

impl fmt::Display for Archetype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The templates one station contributes to classification.
#[derive(Debug, Clone, Copy, Default)]
pub struct StationTemplates<'a> {
    pub entry_workday: Option<&'a UsageTemplate>,
    pub exit_workday: Option<&'a UsageTemplate>,
    pub entry_weekend: Option<&'a UsageTemplate>,
    pub exit_weekend: Option<&'a UsageTemplate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationClassification {
    pub station: StationId,
    pub archetype: Archetype,
    pub morphology: BTreeMap<(Direction, DayClass), Morphology>,
}

impl StationClassification {
    pub fn labels(&self, direction: Direction, class: DayClass) -> Option<&LabelSet> {
        self.morphology.get(&(direction, class)).map(|m| &m.labels)
    }
}

fn expect_slot<'a>(
    t: Option<&'a UsageTemplate>,
    direction: Direction,
    class: DayClass,
    name: &'static str,
) -> Result<Option<&'a UsageTemplate>, ClassifyError> {
    match t {
        Some(t) if t.direction != direction || t.day_class != class => Err(ClassifyError::WrongTemplate {
            expected: format!("{direction} {class}"),
            found: format!("{} {}", t.direction, t.day_class),
        }),
        Some(t) if t.total() <= 0.0 => Err(ClassifyError::ZeroTotal),
        Some(t) => Ok(Some(t)),
        None if class == DayClass::Workday => Err(ClassifyError::MissingTemplate(name)),
        None => Ok(None),
    }
}

/// Archetype rule, first match wins:
/// 1. EMPLOYMENT_HUB: workday entries carry DUAL_PEAK.
/// 2. COMMUTER_ORIGIN: workday entries have MORNING_PEAK (without DUAL_PEAK)
///    and workday exits have EVENING_PEAK.
/// 3. MIXED: across both workday directions there is a morning peak and an
///    evening peak whose values are within `mixed_ratio` of each other.
/// 4. UNCLASSIFIED.
pub fn classify_station(
    templates: StationTemplates<'_>,
    cfg: &WindowConfig,
) -> Result<StationClassification, ClassifyError> {
    cfg.validate()?;
    let entry_wd = expect_slot(
        templates.entry_workday,
        Direction::Entry,
        DayClass::Workday,
        "ENTRY WORKDAY",
    )?
    .expect("workday slot");
    let exit_wd = expect_slot(
        templates.exit_workday,
        Direction::Exit,
        DayClass::Workday,
        "EXIT WORKDAY",
    )?
    .expect("workday slot");
    let entry_we = expect_slot(
        templates.entry_weekend,
        Direction::Entry,
        DayClass::Weekend,
        "ENTRY WEEKEND",
    )?;
    let exit_we = expect_slot(
        templates.exit_weekend,
        Direction::Exit,
        DayClass::Weekend,
        "EXIT WEEKEND",
    )?;

    let mut morphology = BTreeMap::new();
    for t in [Some(entry_wd), Some(exit_wd), entry_we, exit_we]
        .into_iter()
        .flatten()
    {
        morphology.insert(
            (t.direction, t.day_class),
            label_series(&t.mean_counts, t.config, cfg)?,
        );
    }

    let entry = &morphology[&(Direction::Entry, DayClass::Workday)];
    let exit = &morphology[&(Direction::Exit, DayClass::Workday)];
    use MorphologyLabel::*;
    let archetype = if entry.labels.contains(&DualPeak) {
        Archetype::EmploymentHub
    } else if entry.labels.contains(&MorningPeak) && exit.labels.contains(&EveningPeak) {
        Archetype::CommuterOrigin
    } else {
        let pooled_max = |window: &Range<u32>| {
            [(entry, entry_wd.config), (exit, exit_wd.config)]
                .into_iter()
                .flat_map(|(m, config)| {
                    m.peaks
                        .iter()
                        .filter(move |p| window.contains(&config.start_minute(p.bin_index)))
                })
                .map(|p| p.value)
                .reduce(f64::max)
        };
        match (pooled_max(&cfg.morning), pooled_max(&cfg.evening)) {
            (Some(m), Some(e)) if m / e <= cfg.mixed_ratio && e / m <= cfg.mixed_ratio => Archetype::Mixed,
            _ => Archetype::Unclassified,
        }
    };

    Ok(StationClassification {
        station: entry_wd.station.clone(),
        archetype,
        morphology,
    })
}

fn join_labels(labels: &LabelSet) -> String {
    labels.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(";")
}

fn join_peaks(peaks: &[Peak]) -> String {
    peaks
        .iter()
        .map(|p| format!("{}:{}:{}", p.bin_index, p.value, p.prominence))
        .collect::<Vec<_>>()
        .join(";")
}

/// One row per (station, direction, day class). `reason` rows carry
/// stations that could not be classified at all.
pub fn write_classification_csv<W: Write>(
    results: &[Result<StationClassification, (StationId, String)>],
    mut out: W,
) -> io::Result<W> {
    writeln!(out, "station,archetype,direction,day_class,labels,peaks,reason")?;
    for r in results {
        match r {
            Ok(c) => {
                for ((direction, class), m) in &c.morphology {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},",
                        c.station,
                        c.archetype,
                        direction,
                        class,
                        join_labels(&m.labels),
                        join_peaks(&m.peaks)
                    )?;
                }
            }
            Err((station, reason)) => {
                writeln!(
                    out,
                    "{station},{},,,,,{}",
                    Archetype::Unclassified,
                    reason.replace(',', ";")
                )?;
            }
        }
    }
    out.flush()?;
    Ok(out)
}

pub fn write_classification_text<W: Write>(
    results: &[Result<StationClassification, (StationId, String)>],
    config_note: &str,
    mut out: W,
) -> io::Result<W> {
    for r in results {
        match r {
            Ok(c) => {
                writeln!(out, "{}: {}", c.station, c.archetype)?;
                for ((direction, class), m) in &c.morphology {
                    let peaks = m
                        .peaks
                        .iter()
                        .map(|p| format!("bin {} ({})", p.bin_index, p.value))
                        .collect::<Vec<_>>()
                        .join(", ");
                    writeln!(
                        out,
                        "  {direction:<5} {class:<7} {:<48} peaks: {}",
                        join_labels(&m.labels),
                        if peaks.is_empty() {
                            "none".to_string()
                        } else {
                            peaks
                        }
                    )?;
                }
            }
            Err((station, reason)) => writeln!(out, "{station}: {} ({reason})", Archetype::Unclassified)?,
        }
    }
    if !config_note.is_empty() {
        writeln!(out, "{config_note}")?;
    }
    out.flush()?;
    Ok(out)
}
