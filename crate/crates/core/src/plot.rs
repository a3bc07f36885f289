//! Deterministic SVG bar charts of per-bin series: time of day on the
//! x-axis, passengers on the y-axis.

use std::fmt::Write as _;

use thiserror::Error;

use crate::binning::{BinConfig, DayProfile};
use crate::templates::UsageTemplate;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlotError {
    #[error("empty series")]
    Empty,
    #[error("series has {values} values but bin width {width} needs {bins}")]
    Length { values: usize, width: u32, bins: usize },
    #[error("value {0} at bin {1} is negative or not finite")]
    BadValue(f64, usize),
}

/// One series to draw, with optional per-bin error bars.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub title: String,
    pub config: BinConfig,
    pub values: Vec<f64>,
    pub spread: Option<Vec<f64>>,
}

impl Series {
    pub fn from_template(t: &UsageTemplate) -> Self {
        let period = t.period.map_or_else(String::new, |p| format!(" {p}"));
        Series {
            title: format!(
                "{}{} {} {} (mean of {} days)",
                t.station, period, t.direction, t.day_class, t.support
            ),
            config: t.config,
            values: t.mean_counts.clone(),
            spread: Some(t.std_counts.clone()),
        }
    }

    pub fn from_profile(p: &DayProfile) -> Self {
        Series {
            title: format!("{} {} {}", p.station, p.date.format("%Y-%m-%d"), p.direction),
            config: p.config,
            values: p.counts.iter().map(|&c| c as f64).collect(),
            spread: None,
        }
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

/// Smallest 1, 2 or 5 times a power of ten that is >= `x`.
fn nice_ceiling(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let magnitude = 10f64.powf(x.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * magnitude)
        .find(|v| *v >= x)
        .unwrap_or(10.0 * magnitude)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders one chart. Bars are the only elements with `class="bar"`, one per
/// bin, carrying `data-bin` and `data-value`.
pub fn render_svg(series: &Series) -> Result<String, PlotError> {
    let n = series.values.len();
    if n == 0 {
        return Err(PlotError::Empty);
    }
    if n != series.config.bins() {
        return Err(PlotError::Length {
            values: n,
            width: series.config.width(),
            bins: series.config.bins(),
        });
    }
    if let Some((i, v)) = series
        .values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
    {
        return Err(PlotError::BadValue(*v, i));
    }

    let top_value = series
        .values
        .iter()
        .zip(series.spread.iter().flatten().chain(std::iter::repeat(&0.0)))
        .map(|(v, s)| v + s.max(0.0))
        .fold(0.0, f64::max);
    let y_max = nice_ceiling(top_value);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let slot = plot_w / n as f64;
    let y = |v: f64| TOP + plot_h * (1.0 - v / y_max);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(
        svg,
        r##"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&series.title)
    );

    // horizontal grid and y labels
    for i in 0..=5 {
        let v = y_max * i as f64 / 5.0;
        let yy = y(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#dddddd"/>"##,
            WIDTH - RIGHT
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="10">{}</text>"#,
            LEFT - 6.0,
            yy + 3.5,
            v
        );
    }

    for (i, v) in series.values.iter().enumerate() {
        let x = LEFT + slot * i as f64 + slot * 0.1;
        let top = y(*v);
        let _ = writeln!(
            svg,
            r##"<rect class="bar" data-bin="{i}" data-value="{v}" x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#3b6ea5"/>"##,
            slot * 0.8,
            TOP + plot_h - top
        );
    }
    if let Some(spread) = &series.spread {
        for (i, (v, s)) in series.values.iter().zip(spread).enumerate() {
            if *s <= 0.0 {
                continue;
            }
            let cx = LEFT + slot * (i as f64 + 0.5);
            let _ = writeln!(
                svg,
                r##"<line class="spread" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="#222222"/>"##,
                y((v - s).max(0.0)),
                y(v + s)
            );
        }
    }

    // axes
    let base = TOP + plot_h;
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT:.2}" y1="{base:.2}" x2="{:.2}" y2="{base:.2}" stroke="#000000"/>"##,
        WIDTH - RIGHT
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT:.2}" y1="{TOP:.2}" x2="{LEFT:.2}" y2="{base:.2}" stroke="#000000"/>"##
    );
    let label_every = (180 / series.config.width()).max(1) as usize;
    for i in (0..=n).step_by(label_every) {
        let minute = series.config.start_minute(i);
        let x = LEFT + slot * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="10">{:02}:{:02}</text>"#,
            base + 14.0,
            minute / 60,
            minute % 60
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">Time of day</text>"#,
        LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {:.2})">Passengers</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}
