//! WebAssembly bindings for the browser demo in `www/`. Every export takes
//! plain strings and numbers and returns a JSON document; failures become
//! JavaScript exceptions carrying the message.

use railpattern::binning::{BinConfig, ProfileAccumulator};
use railpattern::change::{diff_templates, ChangeThresholds};
use railpattern::classify::{classify_station, label_series, Morphology, StationTemplates, WindowConfig};
use railpattern::ingest::{Direction, ParseMode, RecordStream, Vocabulary, YearMonth};
use railpattern::plot::{render_svg, Series};
use railpattern::similarity::DistanceKind;
use railpattern::synth::{canonical_scenario, generate_month};
use railpattern::templates::{extract_template, group_by_class, DayClass, UsageTemplate};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn morphology_json(m: &Morphology) -> Value {
    json!({
        "labels": m.labels.iter().map(|l| l.as_str()).collect::<Vec<_>>(),
        "peaks": m.peaks.iter().map(|p| json!({
            "bin": p.bin_index,
            "value": p.value,
            "prominence": p.prominence,
        })).collect::<Vec<_>>(),
    })
}

fn svg(series: &Series) -> Result<String, String> {
    render_svg(series).map_err(|e| e.to_string())
}

/// Numbers separated by commas, whitespace or semicolons.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect()
}

fn bin_config_for(values: &[f64]) -> Result<BinConfig, String> {
    let n = values.len();
    if n == 0 || 1440 % n != 0 {
        return Err(format!("{n} values do not split a day into equal bins"));
    }
    BinConfig::new((1440 / n) as u32).map_err(|e| e.to_string())
}

/// Generates one month of a built-in scenario, then bins, templates and
/// classifies it.
pub fn simulate_json(name: &str, seed: u64, month: &str, scale: f64) -> Result<Value, String> {
    let mut scenario = canonical_scenario(name).ok_or_else(|| format!("unknown scenario {name:?}"))?;
    if !(scale > 0.0 && scale <= 2.0) {
        return Err(format!("scale {scale} must be in (0, 2]"));
    }
    scenario = scenario.scaled(scale);
    scenario.seed = seed;
    let month: YearMonth = month
        .parse()
        .map_err(|e: railpattern::ingest::ValueError| e.to_string())?;

    let mut bytes = Vec::new();
    let log = generate_month(&scenario, month, &mut bytes).map_err(|e| e.to_string())?;
    let vocab = Vocabulary::default();
    let stream = RecordStream::new(
        bytes.as_slice(),
        scenario.station.clone(),
        month,
        ParseMode::Strict,
        &vocab,
    )
    .map_err(|e| e.to_string())?;
    let mut acc = ProfileAccumulator::new(scenario.station.clone(), scenario.config);
    for r in stream {
        acc.push(&r.map_err(|e| e.to_string())?);
    }
    let profiles = acc.finish();

    let policy = scenario.calendar();
    let mut templates: Vec<UsageTemplate> = Vec::new();
    for direction in Direction::ALL.iter().copied() {
        let own: Vec<_> = profiles
            .iter()
            .filter(|p| p.direction == direction)
            .cloned()
            .collect();
        let groups = group_by_class(&own, &policy);
        for class in [DayClass::Workday, DayClass::Weekend] {
            if let Some(days) = groups.get(&class) {
                templates.push(
                    extract_template(days, class, &policy, DistanceKind::L2).map_err(|e| e.to_string())?,
                );
            }
        }
    }
    let find = |d, c| templates.iter().find(|t| t.direction == d && t.day_class == c);
    let classification = classify_station(
        StationTemplates {
            entry_workday: find(Direction::Entry, DayClass::Workday),
            exit_workday: find(Direction::Exit, DayClass::Workday),
            entry_weekend: find(Direction::Entry, DayClass::Weekend),
            exit_weekend: find(Direction::Exit, DayClass::Weekend),
        },
        &WindowConfig::default(),
    )
    .map_err(|e| e.to_string())?;

    let panels = templates
        .iter()
        .map(|t| {
            Ok(json!({
                "direction": t.direction.as_str(),
                "day_class": t.day_class.as_str(),
                "support": t.support,
                "coherence": t.coherence,
                "coherent": t.coherent,
                "mean": t.mean_counts,
                "morphology": morphology_json(&classification.morphology[&(t.direction, t.day_class)]),
                "svg": svg(&Series::from_template(t))?,
            }))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json!({
        "station": scenario.station.as_str(),
        "month": month.to_string(),
        "rows": log.total_rows,
        "archetype": classification.archetype.as_str(),
        "templates": panels,
    }))
}

/// Labels a user-supplied daily series.
pub fn label_json(values: &str) -> Result<Value, String> {
    let values = parse_vector(values)?;
    let config = bin_config_for(&values)?;
    let m = label_series(&values, config, &WindowConfig::default()).map_err(|e| e.to_string())?;
    let series = Series {
        title: "Edited series".to_string(),
        config,
        values,
        spread: None,
    };
    let mut out = morphology_json(&m);
    out["svg"] = Value::String(svg(&series)?);
    Ok(out)
}

fn bare_template(values: Vec<f64>, config: BinConfig) -> UsageTemplate {
    UsageTemplate {
        station: railpattern::ingest::StationId::new("DEMO").expect("valid id"),
        direction: Direction::Entry,
        day_class: DayClass::Workday,
        config,
        period: None,
        std_counts: vec![0.0; values.len()],
        mean_counts: values,
        support: 1,
        coherence: 0.0,
        coherent: true,
    }
}

/// Shape and volume change between two daily series.
pub fn diff_json(before: &str, after: &str, distance: &str) -> Result<Value, String> {
    let (a, b) = (parse_vector(before)?, parse_vector(after)?);
    if a.len() != b.len() {
        return Err(format!("series lengths differ: {} vs {}", a.len(), b.len()));
    }
    let config = bin_config_for(&a)?;
    let kind: DistanceKind = distance.parse()?;
    let r = diff_templates(
        &bare_template(a, config),
        &bare_template(b, config),
        kind,
        ChangeThresholds::default(),
    )
    .map_err(|e| e.to_string())?;
    Ok(json!({
        "distance": kind.as_str(),
        "shape_distance": r.shape_distance,
        "volume_ratio": r.volume_ratio,
        "changed": r.changed,
        "per_bin_delta": r.per_bin_delta,
    }))
}

fn to_js(result: Result<Value, String>) -> Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(name: &str, seed: u64, month: &str, scale: f64) -> Result<String, JsError> {
    to_js(simulate_json(name, seed, month, scale))
}

#[wasm_bindgen]
pub fn label(values: &str) -> Result<String, JsError> {
    to_js(label_json(values))
}

#[wasm_bindgen]
pub fn diff(before: &str, after: &str, distance: &str) -> Result<String, JsError> {
    to_js(diff_json(before, after, distance))
}
