use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::Path;

use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::binning::BinConfig;
use crate::config::{ConfigError, ConfigFile, Section};
use crate::ingest::{Direction, FareClass, Media, StationId, Token};
use crate::templates::CalendarPolicy;

use super::SynthError;

/// Weighted choice over a fixed list of values.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical<T> {
    items: Vec<(T, f64)>,
}

impl<T: Clone + fmt::Display> Categorical<T> {
    pub fn new(items: Vec<(T, f64)>) -> Result<Self, SynthError> {
        if items.is_empty() {
            return Err(SynthError::Config("empty categorical distribution".into()));
        }
        if let Some((v, w)) = items.iter().find(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
            return Err(SynthError::Config(format!(
                "weight {w} for {v} is not a non-negative number"
            )));
        }
        let sum: f64 = items.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SynthError::Config(format!(
                "weights sum to {sum}, expected 1 within 1e-9"
            )));
        }
        Ok(Categorical { items })
    }

    pub fn items(&self) -> &[(T, f64)] {
        &self.items
    }

    pub fn weight_of(&self, value: &str) -> f64 {
        self.items
            .iter()
            .filter(|(v, _)| v.to_string() == value)
            .map(|(_, w)| w)
            .sum()
    }

    pub(crate) fn sampler(&self) -> Sampler<T> {
        Sampler {
            values: self.items.iter().map(|(v, _)| v.clone()).collect(),
            index: WeightedIndex::new(self.items.iter().map(|(_, w)| *w)).expect("validated weights"),
        }
    }

    fn to_config(&self) -> String {
        self.items
            .iter()
            .map(|(v, w)| format!("{v}:{w}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub(crate) struct Sampler<T> {
    values: Vec<T>,
    index: WeightedIndex<f64>,
}

impl<T: Clone> Sampler<T> {
    pub(crate) fn sample<R: Rng>(&self, rng: &mut R) -> T {
        self.values[self.index.sample(rng)].clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetadataMix {
    pub fare_class: Categorical<FareClass>,
    /// Drawn only for DISCOUNT rows.
    pub benefit_type: Categorical<Token>,
    pub ticket_type: Categorical<Token>,
    pub media: Categorical<Media>,
}

impl Default for MetadataMix {
    fn default() -> Self {
        let tokens = |items: &[(&str, f64)]| {
            Categorical::new(items.iter().map(|(t, w)| (Token::new(t), *w)).collect()).expect("default mix")
        };
        MetadataMix {
            fare_class: Categorical::new(vec![(FareClass::Full, 0.72), (FareClass::Discount, 0.28)])
                .expect("default mix"),
            benefit_type: tokens(&[("FEDERAL", 0.45), ("REGIONAL", 0.35), ("RZD", 0.2)]),
            ticket_type: tokens(&[
                ("ONE_WAY", 0.35),
                ("ROUND_TRIP", 0.15),
                ("ONE_TIME_ONE_WAY", 0.1),
                ("SUBSCRIPTION", 0.4),
            ]),
            media: Categorical::new(vec![(Media::Smartcard, 0.8), (Media::Paper, 0.2)]).expect("default mix"),
        }
    }
}

/// Expected counts per bin for each (day type, direction), plus everything
/// needed to fill in the remaining record fields.
#[derive(Debug, Clone, PartialEq)]
pub struct StationScenario {
    pub name: String,
    pub station: StationId,
    pub config: BinConfig,
    pub workday_entry: Vec<f64>,
    pub workday_exit: Vec<f64>,
    pub weekend_entry: Vec<f64>,
    pub weekend_exit: Vec<f64>,
    pub metadata_mix: MetadataMix,
    pub counterparts: Categorical<StationId>,
    pub holidays: BTreeSet<NaiveDate>,
    pub seed: u64,
}

const KEYS: [&str; 14] = [
    "station",
    "bin_width",
    "workday_entry",
    "workday_exit",
    "weekend_entry",
    "weekend_exit",
    "fare_class",
    "benefit_type",
    "ticket_type",
    "media",
    "counterparts",
    "holidays",
    "seed",
    "scale",
];

impl StationScenario {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bins = self.config.bins();
        for (name, v) in self.vectors() {
            if v.len() != bins {
                return Err(SynthError::Config(format!(
                    "{}: {name} has {} values, bin width {} needs {bins}",
                    self.name,
                    v.len(),
                    self.config.width()
                )));
            }
            if let Some(x) = v.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                return Err(SynthError::Config(format!(
                    "{}: {name} contains {x}, expected counts >= 0",
                    self.name
                )));
            }
        }
        Ok(())
    }

    fn vectors(&self) -> [(&'static str, &Vec<f64>); 4] {
        [
            ("workday_entry", &self.workday_entry),
            ("workday_exit", &self.workday_exit),
            ("weekend_entry", &self.weekend_entry),
            ("weekend_exit", &self.weekend_exit),
        ]
    }

    pub fn expected(&self, workday: bool, direction: Direction) -> &[f64] {
        match (workday, direction) {
            (true, Direction::Entry) => &self.workday_entry,
            (true, Direction::Exit) => &self.workday_exit,
            (false, Direction::Entry) => &self.weekend_entry,
            (false, Direction::Exit) => &self.weekend_exit,
        }
    }

    pub fn calendar(&self) -> CalendarPolicy {
        CalendarPolicy::new(self.holidays.clone(), 4, 0.2).expect("default thresholds")
    }

    /// All four expected vectors multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        for v in [
            &mut self.workday_entry,
            &mut self.workday_exit,
            &mut self.weekend_entry,
            &mut self.weekend_exit,
        ] {
            v.iter_mut().for_each(|x| *x *= factor);
        }
        self
    }

    fn from_section(section: &Section) -> Result<Self, SynthError> {
        section.check_keys(&KEYS)?;
        let station: StationId = match section.get("station") {
            Some(s) => s.parse().map_err(|e| section.invalid("station", s, e))?,
            None => section
                .name
                .parse()
                .map_err(|e| section.invalid("station", &section.name, e))?,
        };
        let width: u32 = section.parse("bin_width")?.unwrap_or(60);
        let config =
            BinConfig::new(width).map_err(|e| section.invalid("bin_width", &width.to_string(), e))?;
        let vector = |key: &str| -> Result<Vec<f64>, ConfigError> {
            section
                .list(key)
                .ok_or_else(|| ConfigError::Missing {
                    section: section.name.clone(),
                    key: key.to_string(),
                })?
                .into_iter()
                .map(|x| x.parse::<f64>().map_err(|e| section.invalid(key, x, e)))
                .collect()
        };
        let defaults = MetadataMix::default();
        let metadata_mix = MetadataMix {
            fare_class: categorical(section, "fare_class", |s| s.parse().map_err(|e| format!("{e}")))?
                .unwrap_or(defaults.fare_class),
            benefit_type: categorical(section, "benefit_type", token)?.unwrap_or(defaults.benefit_type),
            ticket_type: categorical(section, "ticket_type", token)?.unwrap_or(defaults.ticket_type),
            media: categorical(section, "media", |s| s.parse().map_err(|e| format!("{e}")))?
                .unwrap_or(defaults.media),
        };
        let counterparts = categorical(section, "counterparts", |s| {
            s.parse::<StationId>().map_err(|e| e.to_string())
        })?
        .ok_or_else(|| ConfigError::Missing {
            section: section.name.clone(),
            key: "counterparts".into(),
        })?;
        let mut holidays = BTreeSet::new();
        for raw in section.list("holidays").unwrap_or_default() {
            holidays.insert(
                raw.parse::<NaiveDate>()
                    .map_err(|e| section.invalid("holidays", raw, e))?,
            );
        }
        let scenario = StationScenario {
            name: section.name.clone(),
            station,
            config,
            workday_entry: vector("workday_entry")?,
            workday_exit: vector("workday_exit")?,
            weekend_entry: vector("weekend_entry")?,
            weekend_exit: vector("weekend_exit")?,
            metadata_mix,
            counterparts,
            holidays,
            seed: section.parse("seed")?.unwrap_or(42),
        };
        let scale: f64 = section.parse("scale")?.unwrap_or(1.0);
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(section
                .invalid("scale", &scale.to_string(), "must be >= 0")
                .into());
        }
        let scenario = scenario.scaled(scale);
        scenario.validate()?;
        Ok(scenario)
    }

    /// Renders a section that [`load_scenarios`] reads back unchanged.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let v = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let _ = writeln!(out, "[{}]", self.name);
        let _ = writeln!(out, "station = {}", self.station);
        let _ = writeln!(out, "bin_width = {}", self.config.width());
        for (name, vector) in self.vectors() {
            let _ = writeln!(out, "{name} = {}", v(vector));
        }
        let m = &self.metadata_mix;
        let _ = writeln!(out, "fare_class = {}", m.fare_class.to_config());
        let _ = writeln!(out, "benefit_type = {}", m.benefit_type.to_config());
        let _ = writeln!(out, "ticket_type = {}", m.ticket_type.to_config());
        let _ = writeln!(out, "media = {}", m.media.to_config());
        let _ = writeln!(out, "counterparts = {}", self.counterparts.to_config());
        if !self.holidays.is_empty() {
            let days: Vec<String> = self.holidays.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "holidays = {}", days.join(", "));
        }
        let _ = writeln!(out, "seed = {}", self.seed);
        out
    }
}

fn token(s: &str) -> Result<Token, String> {
    if s.is_empty() || s.contains([',', ':', '"']) {
        return Err(format!("bad token {s:?}"));
    }
    Ok(Token::new(s))
}

fn categorical<T, F>(section: &Section, key: &str, parse: F) -> Result<Option<Categorical<T>>, SynthError>
where
    T: Clone + fmt::Display,
    F: Fn(&str) -> Result<T, String>,
{
    let Some(items) = section.list(key) else {
        return Ok(None);
    };
    let mut parsed = Vec::new();
    for item in items {
        let (value, weight) = item
            .rsplit_once(':')
            .ok_or_else(|| section.invalid(key, item, "expected VALUE:WEIGHT"))?;
        let value = parse(value.trim()).map_err(|e| section.invalid(key, item, e))?;
        let weight: f64 = weight.trim().parse().map_err(|e| section.invalid(key, item, e))?;
        parsed.push((value, weight));
    }
    Categorical::new(parsed).map(Some).map_err(|e| {
        section
            .invalid(key, section.get(key).unwrap_or_default(), e)
            .into()
    })
}

/// Every `[NAME]` section of a scenario file.
pub fn parse_scenarios(cfg: &ConfigFile) -> Result<Vec<StationScenario>, SynthError> {
    let scenarios = cfg
        .sections
        .iter()
        .filter(|s| !s.name.is_empty())
        .map(StationScenario::from_section)
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(root) = cfg.sections.iter().find(|s| s.name.is_empty()) {
        if let Some(k) = root.keys().next() {
            return Err(SynthError::Config(format!(
                "key {k:?} outside a [scenario] section"
            )));
        }
    }
    if scenarios.is_empty() {
        return Err(SynthError::Config("no [scenario] sections".into()));
    }
    Ok(scenarios)
}

pub fn load_scenarios(path: &Path) -> Result<Vec<StationScenario>, SynthError> {
    parse_scenarios(&ConfigFile::load(path)?)
}

fn station(name: &str) -> StationId {
    StationId::new(name).expect("canonical station id")
}

fn counterparts(names: &[&str]) -> Categorical<StationId> {
    let w = 1.0 / names.len() as f64;
    let mut items: Vec<(StationId, f64)> = names.iter().map(|n| (station(n), w)).collect();
    // absorb rounding so the weights sum to 1 exactly
    let rest: f64 = items[1..].iter().map(|(_, w)| w).sum();
    items[0].1 = 1.0 - rest;
    Categorical::new(items).expect("canonical counterparts")
}

const OUTSIDE_WORKDAY_ENTRY: [f64; 24] = [
    3., 1., 0., 0., 5., 110., 1300., 850., 220., 110., 80., 70., 65., 60., 70., 80., 100., 130., 120., 90.,
    60., 40., 20., 8.,
];
const OUTSIDE_WORKDAY_EXIT: [f64; 24] = [
    2., 0., 0., 0., 1., 10., 40., 70., 60., 50., 45., 50., 55., 60., 70., 100., 180., 420., 1100., 900.,
    300., 150., 70., 20.,
];
const INSIDE_WORKDAY_ENTRY: [f64; 24] = [
    1., 0., 0., 0., 3., 30., 200., 1100., 800., 300., 180., 140., 60., 20., 350., 300., 420., 1000., 950.,
    400., 200., 100., 40., 10.,
];
const INSIDE_WORKDAY_EXIT: [f64; 24] = [
    0., 0., 0., 0., 2., 20., 150., 600., 1200., 700., 300., 200., 80., 30., 150., 180., 220., 380., 350.,
    200., 100., 50., 20., 5.,
];

/// Hourly scenarios shaped after the reported station patterns:
///
/// * `OUTSIDE_COMMUTER`: suburban station, entries peak 06-07, exits 18-19.
/// * `OUTSIDE_WEEKEND`: same workdays; weekend departures spread through the
///   day and last into the evening, weekend arrivals peak in the morning too.
/// * `INSIDE_HUB`: city station, entries peak 07-08 and 17-18 with a near
///   empty 13-14 gap followed by a burst of demand.
/// * `INSIDE_WEEKEND`: same workdays; weekend entries keep the morning
///   traffic, with no midday gap and no evening peak.
pub fn canonical_scenarios() -> Vec<StationScenario> {
    let outside = counterparts(&["CENTRAL_1", "CENTRAL_2", "CENTRAL_3", "CENTRAL_4"]);
    let inside = counterparts(&["SUBURB_1", "SUBURB_2", "SUBURB_3", "SUBURB_4", "SUBURB_5"]);
    let make = |name: &str, seed: u64, vectors: [&[f64]; 4], counterparts: &Categorical<StationId>| {
        StationScenario {
            name: name.to_string(),
            station: station(name),
            config: BinConfig::HOURLY,
            workday_entry: vectors[0].to_vec(),
            workday_exit: vectors[1].to_vec(),
            weekend_entry: vectors[2].to_vec(),
            weekend_exit: vectors[3].to_vec(),
            metadata_mix: MetadataMix::default(),
            counterparts: counterparts.clone(),
            holidays: BTreeSet::new(),
            seed,
        }
    };
    vec![
        make(
            "OUTSIDE_COMMUTER",
            42,
            [
                &OUTSIDE_WORKDAY_ENTRY,
                &OUTSIDE_WORKDAY_EXIT,
                &[
                    2., 1., 0., 0., 3., 50., 500., 380., 150., 120., 130., 140., 140., 130., 120., 110.,
                    100., 90., 80., 60., 40., 25., 12., 5.,
                ],
                &[
                    1., 0., 0., 0., 0., 5., 20., 40., 50., 60., 70., 80., 90., 100., 110., 130., 180., 300.,
                    420., 380., 200., 100., 50., 15.,
                ],
            ],
            &outside,
        ),
        make(
            "OUTSIDE_WEEKEND",
            43,
            [
                &OUTSIDE_WORKDAY_ENTRY,
                &OUTSIDE_WORKDAY_EXIT,
                &[
                    2., 1., 0., 0., 2., 20., 80., 160., 240., 300., 380., 420., 470., 520., 480., 430., 390.,
                    350., 320., 290., 230., 120., 40., 10.,
                ],
                &[
                    1., 0., 0., 0., 2., 20., 120., 300., 520., 600., 480., 300., 220., 200., 210., 250.,
                    330., 420., 460., 400., 260., 120., 50., 15.,
                ],
            ],
            &outside,
        ),
        make(
            "INSIDE_HUB",
            44,
            [
                &INSIDE_WORKDAY_ENTRY,
                &INSIDE_WORKDAY_EXIT,
                &[
                    1., 0., 0., 0., 2., 20., 130., 650., 450., 300., 250., 220., 200., 185., 170., 160.,
                    150., 135., 115., 95., 70., 45., 20., 5.,
                ],
                &[
                    0., 0., 0., 0., 1., 10., 80., 300., 600., 500., 400., 350., 320., 300., 280., 260., 240.,
                    220., 190., 150., 100., 60., 25., 5.,
                ],
            ],
            &inside,
        ),
        make(
            "INSIDE_WEEKEND",
            45,
            [
                &INSIDE_WORKDAY_ENTRY,
                &INSIDE_WORKDAY_EXIT,
                &[
                    1., 0., 0., 0., 4., 40., 250., 1100., 900., 650., 520., 460., 420., 400., 380., 350.,
                    320., 290., 250., 200., 140., 80., 30., 8.,
                ],
                &[
                    0., 0., 0., 0., 1., 15., 100., 350., 700., 600., 480., 420., 380., 350., 330., 300.,
                    280., 250., 210., 170., 120., 70., 30., 6.,
                ],
            ],
            &inside,
        ),
    ]
}

pub fn canonical_scenario(name: &str) -> Option<StationScenario> {
    canonical_scenarios().into_iter().find(|s| s.name == name)
}
