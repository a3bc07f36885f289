//! Shared pipeline helpers for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::Cursor;

use railpattern::binning::{BinConfig, DayProfile, ProfileAccumulator};
use railpattern::ingest::{Direction, IngestStats, ParseMode, RecordStream, Vocabulary, YearMonth};
use railpattern::similarity::DistanceKind;
use railpattern::synth::{generate_month, EmissionLog, StationScenario};
use railpattern::templates::{extract_template, group_by_class, DayClass, UsageTemplate};

pub fn ym(s: &str) -> YearMonth {
    s.parse().unwrap()
}

/// Generates one month in memory.
pub fn generate(scenario: &StationScenario, month: YearMonth) -> (Vec<u8>, EmissionLog) {
    let mut bytes = Vec::new();
    let log = generate_month(scenario, month, &mut bytes).unwrap();
    (bytes, log)
}

/// Parses (strict) and bins one generated month.
pub fn ingest(scenario: &StationScenario, month: YearMonth, bytes: &[u8]) -> (Vec<DayProfile>, IngestStats) {
    let vocab = Vocabulary::default();
    let mut stream = RecordStream::new(
        Cursor::new(bytes),
        scenario.station.clone(),
        month,
        ParseMode::Strict,
        &vocab,
    )
    .unwrap();
    let mut acc = ProfileAccumulator::new(scenario.station.clone(), scenario.config);
    for r in stream.by_ref() {
        acc.push(&r.unwrap());
    }
    (acc.finish(), stream.into_stats())
}

/// Generate, parse and bin the given months.
pub fn profiles(scenario: &StationScenario, months: &[YearMonth]) -> Vec<DayProfile> {
    months
        .iter()
        .flat_map(|m| {
            let (bytes, _) = generate(scenario, *m);
            ingest(scenario, *m, &bytes).0
        })
        .collect()
}

pub fn of_direction(profiles: &[DayProfile], direction: Direction) -> Vec<DayProfile> {
    profiles
        .iter()
        .filter(|p| p.direction == direction)
        .cloned()
        .collect()
}

/// Workday and weekend templates per direction.
pub fn templates(
    scenario: &StationScenario,
    profiles: &[DayProfile],
) -> BTreeMap<(Direction, DayClass), UsageTemplate> {
    let policy = scenario.calendar();
    let mut out = BTreeMap::new();
    for direction in Direction::ALL.iter().copied() {
        let groups = group_by_class(&of_direction(profiles, direction), &policy);
        for class in [DayClass::Workday, DayClass::Weekend] {
            if let Some(group) = groups.get(&class) {
                let t = extract_template(group, class, &policy, DistanceKind::L2).unwrap();
                out.insert((direction, class), t);
            }
        }
    }
    out
}

pub fn profile(date: chrono::NaiveDate, config: BinConfig, counts: Vec<u64>) -> DayProfile {
    DayProfile {
        station: railpattern::ingest::StationId::new("S1").unwrap(),
        date,
        direction: Direction::Entry,
        config,
        counts,
    }
}

pub mod fixtures {
    use std::collections::{BTreeMap, BTreeSet};

    use railpattern::binning::{bin_records, write_profiles};
    use railpattern::change::{change_matrix, write_change_reports, ChangeThresholds};
    use railpattern::classify::{
        classify_station, write_classification_csv, Archetype, MorphologyLabel, StationClassification,
        StationTemplates, WindowConfig,
    };
    use railpattern::ingest::{serialize_records, Direction, ParseMode, RecordStream, Vocabulary, YearMonth};
    use railpattern::plot::{render_svg, Series};
    use railpattern::similarity::{pairwise_matrix, DistanceKind};
    use railpattern::synth::{canonical_scenario, StationScenario};
    use railpattern::templates::{extract_template, group_by_class, write_template, DayClass, UsageTemplate};

    use super::{generate, of_direction, profiles, templates, ym};

    pub type LabelFixture = (Direction, DayClass, Vec<MorphologyLabel>);

    /// Exact label sets each canonical scenario must produce.
    pub fn expected_classification() -> Vec<(&'static str, Archetype, Vec<LabelFixture>)> {
        use DayClass::{Weekend as WE, Workday as WD};
        use Direction::{Entry, Exit};
        use MorphologyLabel::*;
        let hub = vec![
            (Entry, WD, vec![MorningPeak, EveningPeak, DualPeak, MiddayDip]),
            (Entry, WE, vec![MorningPeak, NoEveningPeak]),
            (Exit, WD, vec![MorningPeak, NoEveningPeak]),
            (Exit, WE, vec![MorningPeak, NoEveningPeak]),
        ];
        vec![
            (
                "OUTSIDE_COMMUTER",
                Archetype::CommuterOrigin,
                vec![
                    (Entry, WD, vec![MorningPeak, NoEveningPeak]),
                    (Entry, WE, vec![MorningPeak, NoEveningPeak]),
                    (Exit, WD, vec![EveningPeak]),
                    (Exit, WE, vec![EveningPeak]),
                ],
            ),
            (
                "OUTSIDE_WEEKEND",
                Archetype::CommuterOrigin,
                vec![
                    (Entry, WD, vec![MorningPeak, NoEveningPeak]),
                    (Entry, WE, vec![NoEveningPeak]),
                    (Exit, WD, vec![EveningPeak]),
                    (Exit, WE, vec![MorningPeak, EveningPeak, DualPeak]),
                ],
            ),
            ("INSIDE_HUB", Archetype::EmploymentHub, hub.clone()),
            ("INSIDE_WEEKEND", Archetype::EmploymentHub, hub),
        ]
    }

    pub fn classify(scenario: &StationScenario, months: &[YearMonth]) -> StationClassification {
        let ts = templates(scenario, &profiles(scenario, months));
        let slot = |d, c| ts.get(&(d, c));
        let st = StationTemplates {
            entry_workday: slot(Direction::Entry, DayClass::Workday),
            exit_workday: slot(Direction::Exit, DayClass::Workday),
            entry_weekend: slot(Direction::Entry, DayClass::Weekend),
            exit_weekend: slot(Direction::Exit, DayClass::Weekend),
        };
        classify_station(st, &WindowConfig::default()).unwrap()
    }

    /// Mismatches between a classification and its fixture, empty when equal.
    pub fn classification_mismatches(name: &str, months: &[YearMonth]) -> Vec<String> {
        let (_, archetype, slots) = expected_classification()
            .into_iter()
            .find(|(n, _, _)| *n == name)
            .expect("fixture");
        let c = classify(&canonical_scenario(name).unwrap(), months);
        let mut out = Vec::new();
        if c.archetype != archetype {
            out.push(format!("{name}: archetype {} != {archetype}", c.archetype));
        }
        for (direction, class, labels) in slots {
            let want: BTreeSet<MorphologyLabel> = labels.into_iter().collect();
            let got = c.labels(direction, class).cloned().unwrap_or_default();
            if got != want {
                out.push(format!("{name} {direction} {class}: {got:?} != {want:?}"));
            }
        }
        out
    }

    /// Moves bins `start..end` later by `by`, filling the vacated bins with
    /// the value at `start`.
    pub fn shift_region(v: &[f64], start: usize, end: usize, by: usize) -> Vec<f64> {
        let mut out = v.to_vec();
        out[start + by..end + by].copy_from_slice(&v[start..end]);
        for x in &mut out[start..start + by] {
            *x = v[start];
        }
        out
    }

    /// Six monthly workday ENTRY templates of OUTSIDE_COMMUTER, the last
    /// three with the morning peak two bins later.
    pub fn shifted_sweep() -> BTreeMap<YearMonth, UsageTemplate> {
        let base = canonical_scenario("OUTSIDE_COMMUTER").unwrap();
        let mut shifted = base.clone();
        shifted.workday_entry = shift_region(&base.workday_entry, 3, 10, 2);
        (1..=6)
            .map(|m| {
                let month = YearMonth::new(2018, m).unwrap();
                let s = if m >= 4 { &shifted } else { &base };
                let entries = of_direction(&profiles(s, &[month]), Direction::Entry);
                let policy = s.calendar();
                let group = &group_by_class(&entries, &policy)[&DayClass::Workday];
                let t = extract_template(group, DayClass::Workday, &policy, DistanceKind::L2).unwrap();
                (month, t)
            })
            .collect()
    }

    pub fn sweep_flags(sweep: &BTreeMap<YearMonth, UsageTemplate>) -> Vec<bool> {
        change_matrix(sweep, DistanceKind::L2, ChangeThresholds::default())
            .unwrap()
            .into_iter()
            .map(|r| r.unwrap().changed)
            .collect()
    }

    /// Every artifact the pipeline writes for one scenario and seed.
    pub fn pipeline_artifacts(name: &str, seed: u64) -> Vec<(&'static str, Vec<u8>)> {
        let mut s = canonical_scenario(name).unwrap().scaled(0.2);
        s.seed = seed;
        let months = [ym("2018-03"), ym("2018-04")];
        let vocab = Vocabulary::default();
        let mut out = Vec::new();
        let mut all = Vec::new();
        for m in months {
            let (bytes, log) = generate(&s, m);
            let stream =
                RecordStream::new(bytes.as_slice(), s.station.clone(), m, ParseMode::Strict, &vocab).unwrap();
            let records: Vec<_> = stream.map(Result::unwrap).collect();
            out.push(("serialized", serialize_records(&records, Vec::new()).unwrap()));
            out.push(("emission", log.write_csv(Vec::new()).unwrap()));
            out.push(("fields", log.write_fields_csv(Vec::new()).unwrap()));
            out.push(("records", bytes));
            let profiles = bin_records(&records, &s.station, s.config);
            out.push(("profiles", write_profiles(&profiles, Vec::new()).unwrap()));
            all.extend(profiles);
        }
        let entries = of_direction(&all, Direction::Entry);
        let matrix = pairwise_matrix(&entries[..10], DistanceKind::L2, true).unwrap();
        out.push(("matrix", matrix.write_csv(Vec::new()).unwrap()));
        let ts = templates(&s, &all);
        for t in ts.values() {
            out.push(("template", write_template(t, Vec::new()).unwrap()));
            out.push((
                "plot",
                render_svg(&Series::from_template(t)).unwrap().into_bytes(),
            ));
        }
        let c = classify(&s, &months);
        out.push((
            "classification",
            write_classification_csv(&[Ok(c)], Vec::new()).unwrap(),
        ));
        let by_month: BTreeMap<YearMonth, UsageTemplate> = months
            .iter()
            .map(|m| {
                let month_profiles: Vec<_> = entries.iter().filter(|p| m.contains(p.date)).cloned().collect();
                let policy = s.calendar();
                let group = &group_by_class(&month_profiles, &policy)[&DayClass::Workday];
                (
                    *m,
                    extract_template(group, DayClass::Workday, &policy, DistanceKind::L2).unwrap(),
                )
            })
            .collect();
        let reports: Vec<_> = change_matrix(&by_month, DistanceKind::L2, ChangeThresholds::default())
            .unwrap()
            .into_iter()
            .map(Result::unwrap)
            .collect();
        out.push(("changes", write_change_reports(&reports, Vec::new()).unwrap()));
        out
    }
}
