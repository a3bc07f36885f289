//! Day-class grouping, coherence checks and averaged usage templates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, Weekday};
use thiserror::Error;

use crate::binning::{BinConfig, DayProfile};
use crate::config::{ConfigError, ConfigFile};
use crate::ingest::{Direction, StationId, YearMonth};
use crate::similarity::{coherence, pairwise_matrix, DistanceKind, SimilarityError};
use crate::table::{parse_field, FormatError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DayClass {
    Workday,
    Weekend,
    Weekday(Weekday),
}

const WEEKDAYS: [Weekday; 7] = [
    Weekday::Mon,
    Weekday::Tue,
    Weekday::Wed,
    Weekday::Thu,
    Weekday::Fri,
    Weekday::Sat,
    Weekday::Sun,
];

impl DayClass {
    /// WORKDAY, WEEKEND, then MON..SUN.
    pub fn all() -> impl Iterator<Item = DayClass> {
        [DayClass::Workday, DayClass::Weekend]
            .into_iter()
            .chain(WEEKDAYS.into_iter().map(DayClass::Weekday))
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DayClass::Workday => "WORKDAY",
            DayClass::Weekend => "WEEKEND",
            DayClass::Weekday(w) => match w {
                Weekday::Mon => "MON",
                Weekday::Tue => "TUE",
                Weekday::Wed => "WED",
                Weekday::Thu => "THU",
                Weekday::Fri => "FRI",
                Weekday::Sat => "SAT",
                Weekday::Sun => "SUN",
            },
        }
    }

    fn rank(self) -> u8 {
        match self {
            DayClass::Workday => 0,
            DayClass::Weekend => 1,
            DayClass::Weekday(w) => 2 + w.num_days_from_monday() as u8,
        }
    }
}

impl Ord for DayClass {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.rank().cmp(&other.rank())
    }
}

impl PartialOrd for DayClass {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DayClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DayClass::all()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown day class {s:?}"))
    }
}

/// Which classes a date belongs to: exactly one of workday/weekend and
/// exactly one weekday.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DayMembership {
    pub workday: bool,
    pub weekday: Weekday,
}

impl DayMembership {
    pub fn coarse(self) -> DayClass {
        if self.workday {
            DayClass::Workday
        } else {
            DayClass::Weekend
        }
    }

    pub fn belongs_to(self, class: DayClass) -> bool {
        match class {
            DayClass::Weekday(w) => w == self.weekday,
            coarse => coarse == self.coarse(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid calendar policy: {0}")]
pub struct PolicyError(String);

#[derive(Debug, Clone, PartialEq)]
pub struct CalendarPolicy {
    holidays: BTreeSet<NaiveDate>,
    min_support: usize,
    tau: f64,
}

impl Default for CalendarPolicy {
    fn default() -> Self {
        CalendarPolicy {
            holidays: BTreeSet::new(),
            min_support: 4,
            tau: 0.2,
        }
    }
}

impl CalendarPolicy {
    pub fn new(
        holidays: BTreeSet<NaiveDate>,
        min_support: usize,
        coherence_threshold: f64,
    ) -> Result<Self, PolicyError> {
        if min_support < 2 {
            return Err(PolicyError(format!("min_support {min_support} < 2")));
        }
        if !(coherence_threshold > 0.0 && coherence_threshold.is_finite()) {
            return Err(PolicyError(format!(
                "coherence_threshold {coherence_threshold} must be positive"
            )));
        }
        Ok(CalendarPolicy {
            holidays,
            min_support,
            tau: coherence_threshold,
        })
    }

    /// Keys: `holidays` (comma-separated dates), `min_support`,
    /// `coherence_threshold`. Missing keys take the defaults.
    pub fn from_config(cfg: &ConfigFile) -> Result<Self, ConfigError> {
        let root = cfg.root();
        root.check_keys(&["holidays", "min_support", "coherence_threshold"])?;
        let defaults = CalendarPolicy::default();
        let mut holidays = BTreeSet::new();
        for raw in root.list("holidays").unwrap_or_default() {
            let date = raw
                .parse::<NaiveDate>()
                .map_err(|e| root.invalid("holidays", raw, e))?;
            holidays.insert(date);
        }
        let min_support = root.parse("min_support")?.unwrap_or(defaults.min_support);
        let tau = root.parse("coherence_threshold")?.unwrap_or(defaults.tau);
        CalendarPolicy::new(holidays, min_support, tau).map_err(|e| root.invalid("policy", "", e))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_config(&ConfigFile::load(path)?)
    }

    pub fn holidays(&self) -> &BTreeSet<NaiveDate> {
        &self.holidays
    }

    pub fn min_support(&self) -> usize {
        self.min_support
    }

    pub fn coherence_threshold(&self) -> f64 {
        self.tau
    }
}

pub fn classify_day(date: NaiveDate, policy: &CalendarPolicy) -> DayMembership {
    let weekday = date.weekday();
    let weekend = matches!(weekday, Weekday::Sat | Weekday::Sun) || policy.holidays.contains(&date);
    DayMembership {
        workday: !weekend,
        weekday,
    }
}

/// Profiles per class. Each profile appears under its coarse class and its
/// weekday; classes without profiles are absent.
pub fn group_by_class(
    profiles: &[DayProfile],
    policy: &CalendarPolicy,
) -> BTreeMap<DayClass, Vec<DayProfile>> {
    let mut groups: BTreeMap<DayClass, Vec<DayProfile>> = BTreeMap::new();
    for p in profiles {
        let m = classify_day(p.date, policy);
        groups.entry(m.coarse()).or_default().push(p.clone());
        groups
            .entry(DayClass::Weekday(m.weekday))
            .or_default()
            .push(p.clone());
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemplateError {
    #[error("need at least {needed} profiles, got {got}")]
    InsufficientSupport { needed: usize, got: usize },
    #[error("{date} is not a {class} day under the calendar policy")]
    WrongClass { date: NaiveDate, class: DayClass },
    #[error("profiles mix {what}: {a} and {b}")]
    Mixed {
        what: &'static str,
        a: String,
        b: String,
    },
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coherence {
    pub value: f64,
    pub coherent: bool,
}

fn check_uniform(profiles: &[DayProfile]) -> Result<(), TemplateError> {
    let Some(first) = profiles.first() else {
        return Ok(());
    };
    for p in &profiles[1..] {
        if p.station != first.station {
            return Err(TemplateError::Mixed {
                what: "stations",
                a: first.station.to_string(),
                b: p.station.to_string(),
            });
        }
        if p.direction != first.direction {
            return Err(TemplateError::Mixed {
                what: "directions",
                a: first.direction.to_string(),
                b: p.direction.to_string(),
            });
        }
        if p.config != first.config {
            return Err(TemplateError::Mixed {
                what: "bin configs",
                a: first.config.to_string(),
                b: p.config.to_string(),
            });
        }
    }
    Ok(())
}

/// Mean pairwise distance between the normalized profiles, and whether it
/// passes both the threshold and the support rule.
pub fn check_coherence(
    profiles: &[DayProfile],
    kind: DistanceKind,
    policy: &CalendarPolicy,
) -> Result<Coherence, TemplateError> {
    if profiles.len() < 2 {
        return Err(TemplateError::InsufficientSupport {
            needed: 2,
            got: profiles.len(),
        });
    }
    check_uniform(profiles)?;
    let value = coherence(&pairwise_matrix(profiles, kind, true)?)?;
    Ok(Coherence {
        value,
        coherent: value <= policy.tau && profiles.len() >= policy.min_support,
    })
}

/// Averaged day-class pattern with per-bin spread.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageTemplate {
    pub station: StationId,
    pub direction: Direction,
    pub day_class: DayClass,
    pub config: BinConfig,
    /// The month all source days fall in, when they share one.
    pub period: Option<YearMonth>,
    pub mean_counts: Vec<f64>,
    pub std_counts: Vec<f64>,
    pub support: usize,
    pub coherence: f64,
    pub coherent: bool,
}

impl UsageTemplate {
    pub fn total(&self) -> f64 {
        self.mean_counts.iter().sum()
    }
}

/// Per-bin mean and sample standard deviation over the class's days.
/// Incoherent groups still produce a template, flagged `coherent = false`.
pub fn extract_template(
    profiles: &[DayProfile],
    day_class: DayClass,
    policy: &CalendarPolicy,
    kind: DistanceKind,
) -> Result<UsageTemplate, TemplateError> {
    let Some(first) = profiles.first() else {
        return Err(TemplateError::InsufficientSupport { needed: 1, got: 0 });
    };
    check_uniform(profiles)?;
    if let Some(p) = profiles
        .iter()
        .find(|p| !classify_day(p.date, policy).belongs_to(day_class))
    {
        return Err(TemplateError::WrongClass {
            date: p.date,
            class: day_class,
        });
    }

    let n = profiles.len();
    let bins = first.config.bins();
    let mut mean = vec![0.0; bins];
    for p in profiles {
        for (m, &c) in mean.iter_mut().zip(&p.counts) {
            *m += c as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let std = if n < 2 {
        vec![0.0; bins]
    } else {
        let mut ss = vec![0.0; bins];
        for p in profiles {
            for ((s, &c), m) in ss.iter_mut().zip(&p.counts).zip(&mean) {
                *s += (c as f64 - m).powi(2);
            }
        }
        ss.into_iter().map(|s| (s / (n - 1) as f64).sqrt()).collect()
    };

    let coherence = if n < 2 {
        Coherence {
            value: 0.0,
            coherent: n >= policy.min_support,
        }
    } else {
        check_coherence(profiles, kind, policy)?
    };

    let month = YearMonth::of(first.date);
    let period = profiles.iter().all(|p| month.contains(p.date)).then_some(month);

    Ok(UsageTemplate {
        station: first.station.clone(),
        direction: first.direction,
        day_class,
        config: first.config,
        period,
        mean_counts: mean,
        std_counts: std,
        support: n,
        coherence: coherence.value,
        coherent: coherence.coherent,
    })
}

/// CSV with `# key=value` metadata lines, then `bin,mean,std` rows.
pub fn write_template<W: Write>(t: &UsageTemplate, mut out: W) -> io::Result<W> {
    writeln!(out, "# station={}", t.station)?;
    writeln!(out, "# direction={}", t.direction)?;
    writeln!(out, "# day_class={}", t.day_class)?;
    writeln!(out, "# bin_width={}", t.config.width())?;
    if let Some(p) = t.period {
        writeln!(out, "# period={p}")?;
    }
    writeln!(out, "# support={}", t.support)?;
    writeln!(out, "# coherence={}", t.coherence)?;
    writeln!(out, "# coherent={}", t.coherent)?;
    writeln!(out, "bin,mean,std")?;
    for (i, (m, s)) in t.mean_counts.iter().zip(&t.std_counts).enumerate() {
        writeln!(out, "{i},{m},{s}")?;
    }
    out.flush()?;
    Ok(out)
}

#[derive(Debug, Error)]
pub enum TemplateReadError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub fn read_template<R: BufRead>(input: R) -> Result<UsageTemplate, TemplateReadError> {
    let mut meta: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut rows: Vec<(f64, f64)> = Vec::new();
    let mut saw_header = false;
    let mut last_line = 0;
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if let Some(kv) = line.strip_prefix('#') {
            let (k, v) = kv
                .trim()
                .split_once('=')
                .ok_or_else(|| FormatError::new(line_no, "metadata line without `=`"))?;
            meta.insert(k.trim().to_string(), (line_no, v.trim().to_string()));
            continue;
        }
        if !saw_header {
            if line != "bin,mean,std" {
                return Err(
                    FormatError::new(line_no, format!("expected `bin,mean,std`, got {line:?}")).into(),
                );
            }
            saw_header = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(FormatError::new(line_no, format!("expected 3 fields, found {}", f.len())).into());
        }
        let bin: usize = parse_field(line_no, "bin", f[0])?;
        if bin != rows.len() {
            return Err(FormatError::new(line_no, format!("bin {bin} out of order")).into());
        }
        let mean: f64 = parse_field(line_no, "mean", f[1])?;
        let std: f64 = parse_field(line_no, "std", f[2])?;
        if !(mean >= 0.0 && std >= 0.0 && mean.is_finite() && std.is_finite()) {
            return Err(FormatError::new(line_no, "mean and std must be finite and non-negative").into());
        }
        rows.push((mean, std));
    }
    let get = |key: &str| -> Result<(usize, &str), FormatError> {
        meta.get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| FormatError::new(last_line, format!("missing metadata `{key}`")))
    };
    let field = |key: &str| -> Result<(usize, &str), FormatError> { get(key) };

    let (l, v) = field("station")?;
    let station: StationId = parse_field(l, "station", v)?;
    let (l, v) = field("direction")?;
    let direction: Direction = parse_field(l, "direction", v)?;
    let (l, v) = field("day_class")?;
    let day_class: DayClass = parse_field(l, "day_class", v)?;
    let (l, v) = field("bin_width")?;
    let width: u32 = parse_field(l, "bin_width", v)?;
    let config = BinConfig::new(width).map_err(|e| FormatError::new(l, e.to_string()))?;
    let period = match meta.get("period") {
        Some((l, v)) => Some(parse_field::<YearMonth>(*l, "period", v)?),
        None => None,
    };
    let (l, v) = field("support")?;
    let support: usize = parse_field(l, "support", v)?;
    let (l, v) = field("coherence")?;
    let coherence: f64 = parse_field(l, "coherence", v)?;
    let (l, v) = field("coherent")?;
    let coherent: bool = parse_field(l, "coherent", v)?;

    if rows.len() != config.bins() {
        return Err(FormatError::new(
            last_line,
            format!(
                "{} bins for width {width}, expected {}",
                rows.len(),
                config.bins()
            ),
        )
        .into());
    }
    let (mean_counts, std_counts) = rows.into_iter().unzip();
    Ok(UsageTemplate {
        station,
        direction,
        day_class,
        config,
        period,
        mean_counts,
        std_counts,
        support,
        coherence,
        coherent,
    })
}

/// Short human summary used in coherence reports.
pub fn describe(t: &UsageTemplate) -> String {
    format!(
        "{} {} {} {}: support={} coherence={} {}",
        t.station,
        t.period.map_or_else(|| "-".to_string(), |p| p.to_string()),
        t.direction,
        t.day_class,
        t.support,
        t.coherence,
        if t.coherent { "coherent" } else { "INCOHERENT" }
    )
}
