//! Template change between periods, split into a shape component
//! (distance between normalized means) and a volume component (ratio of
//! daily totals).

use std::collections::BTreeMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::binning::{normalize_values, BinError};
use crate::ingest::{Direction, StationId, YearMonth};
use crate::similarity::{distance, DistanceKind, SimilarityError};
use crate::table::join_f64;
use crate::templates::{DayClass, UsageTemplate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChangeError {
    #[error("incompatible templates: {0}")]
    Incompatible(String),
    #[error("template for {0} has zero total")]
    ZeroTotal(String),
    #[error("need at least 2 periods, got {0}")]
    TooFewPeriods(usize),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("invalid thresholds: {0}")]
    Thresholds(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangeThresholds {
    pub shape: f64,
    /// Applied to `|ln(volume_ratio)|`.
    pub volume: f64,
}

impl Default for ChangeThresholds {
    fn default() -> Self {
        ChangeThresholds {
            shape: 0.15,
            volume: 1.25f64.ln(),
        }
    }
}

impl ChangeThresholds {
    pub fn new(shape: f64, volume: f64) -> Result<Self, ChangeError> {
        if !(shape >= 0.0 && shape.is_finite() && volume >= 0.0 && volume.is_finite()) {
            return Err(ChangeError::Thresholds(format!(
                "shape {shape} and volume {volume} must be finite and non-negative"
            )));
        }
        Ok(ChangeThresholds { shape, volume })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeReport {
    pub station: StationId,
    pub direction: Direction,
    pub day_class: DayClass,
    pub kind: DistanceKind,
    pub period_a: String,
    pub period_b: String,
    pub shape_distance: f64,
    /// `total_b / total_a`.
    pub volume_ratio: f64,
    pub per_bin_delta: Vec<f64>,
    pub changed: bool,
}

fn period_label(t: &UsageTemplate) -> String {
    t.period.map_or_else(|| "-".to_string(), |p| p.to_string())
}

fn label(t: &UsageTemplate) -> String {
    format!(
        "{} {} {} {}",
        t.station,
        period_label(t),
        t.direction,
        t.day_class
    )
}

pub fn diff_templates(
    a: &UsageTemplate,
    b: &UsageTemplate,
    kind: DistanceKind,
    thresholds: ChangeThresholds,
) -> Result<ChangeReport, ChangeError> {
    if a.station != b.station || a.direction != b.direction || a.day_class != b.day_class {
        return Err(ChangeError::Incompatible(format!("{} vs {}", label(a), label(b))));
    }
    if a.config != b.config || a.mean_counts.len() != b.mean_counts.len() {
        return Err(ChangeError::Incompatible(format!(
            "bin widths {} vs {}",
            a.config.width(),
            b.config.width()
        )));
    }
    let shape_a = normalize_values(&a.mean_counts).map_err(|_: BinError| ChangeError::ZeroTotal(label(a)))?;
    let shape_b = normalize_values(&b.mean_counts).map_err(|_: BinError| ChangeError::ZeroTotal(label(b)))?;
    let shape_distance = distance(&shape_a, &shape_b, kind)?;
    let volume_ratio = b.total() / a.total();
    let per_bin_delta = a
        .mean_counts
        .iter()
        .zip(&b.mean_counts)
        .map(|(x, y)| y - x)
        .collect();
    let changed = shape_distance > thresholds.shape || volume_ratio.ln().abs() > thresholds.volume;
    Ok(ChangeReport {
        station: a.station.clone(),
        direction: a.direction,
        day_class: a.day_class,
        kind,
        period_a: period_label(a),
        period_b: period_label(b),
        shape_distance,
        volume_ratio,
        per_bin_delta,
        changed,
    })
}

/// Diffs each consecutive pair of periods in chronological order. A failing
/// pair yields an error in its slot; the sweep continues.
pub fn change_matrix(
    templates_by_period: &BTreeMap<YearMonth, UsageTemplate>,
    kind: DistanceKind,
    thresholds: ChangeThresholds,
) -> Result<Vec<Result<ChangeReport, ChangeError>>, ChangeError> {
    if templates_by_period.len() < 2 {
        return Err(ChangeError::TooFewPeriods(templates_by_period.len()));
    }
    let ordered: Vec<(&YearMonth, &UsageTemplate)> = templates_by_period.iter().collect();
    Ok(ordered
        .windows(2)
        .map(|pair| {
            let ((pa, a), (pb, b)) = (pair[0], pair[1]);
            diff_templates(a, b, kind, thresholds).map(|mut r| {
                r.period_a = pa.to_string();
                r.period_b = pb.to_string();
                r
            })
        })
        .collect())
}

pub fn write_change_reports<W: Write>(reports: &[ChangeReport], mut out: W) -> io::Result<W> {
    writeln!(
        out,
        "station,direction,day_class,distance,period_a,period_b,shape_distance,volume_ratio,changed,per_bin_delta"
    )?;
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.station,
            r.direction,
            r.day_class,
            r.kind,
            r.period_a,
            r.period_b,
            r.shape_distance,
            r.volume_ratio,
            r.changed,
            join_f64(&r.per_bin_delta, ";")
        )?;
    }
    out.flush()?;
    Ok(out)
}
