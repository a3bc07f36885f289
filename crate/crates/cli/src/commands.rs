use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use railpattern::binning::{read_profiles, write_profiles, BinConfig, DayProfile, ProfileAccumulator};
use railpattern::change::{
    diff_templates, write_change_reports, ChangeError, ChangeReport, ChangeThresholds,
};
use railpattern::classify::{
    classify_station, write_classification_csv, write_classification_text, StationClassification,
    StationTemplates, WindowConfig,
};
use railpattern::ingest::{parse_file, Direction, ParseMode, StationFile, StationId, Vocabulary, YearMonth};
use railpattern::plot::{render_svg, Series};
use railpattern::similarity::DistanceKind;
use railpattern::synth::{canonical_scenario, load_scenarios, write_month, StationScenario};
use railpattern::templates::{
    describe, extract_template, group_by_class, read_template, write_template, CalendarPolicy, DayClass,
    UsageTemplate,
};

/// Why a command stopped, mapped onto the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad arguments or configuration; nothing was processed.
    Usage(String),
    /// Input data could not be processed.
    Data(String),
    /// `--fail-on-change` and at least one pair changed.
    Changed,
}

impl Failure {
    pub const USAGE: u8 = 1;
    const DATA: u8 = 2;
    const CHANGED: u8 = 3;

    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => Self::USAGE,
            Failure::Data(_) => Self::DATA,
            Failure::Changed => Self::CHANGED,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
            Failure::Changed => "change detected",
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| data(format!("{}: {e}", path.display()))
}

fn prepare_out(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| usage(format!("output directory {}: {e}", out.display())))
}

/// Writes `name` under `out` through `f`.
fn emit<F>(out: &Path, name: &str, f: F) -> Result<PathBuf, Failure>
where
    F: FnOnce(BufWriter<File>) -> io::Result<BufWriter<File>>,
{
    let path = out.join(name);
    let file = File::create(&path).map_err(io_error(&path))?;
    f(BufWriter::new(file)).map_err(io_error(&path))?;
    Ok(path)
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(io_error(path))
}

pub fn profile(
    out: &Path,
    bin_width: u32,
    mode: ParseMode,
    vocab: Option<&Path>,
    files: &[PathBuf],
) -> Result<(), Failure> {
    let config = BinConfig::new(bin_width).map_err(usage)?;
    let vocab = match vocab {
        Some(p) => Vocabulary::load(p).map_err(usage)?,
        None => Vocabulary::default(),
    };
    let inputs = files
        .iter()
        .map(|p| {
            StationFile::from_path(p).ok_or_else(|| {
                usage(format!(
                    "{}: expected a <station>_<YYYY-MM>.csv file name",
                    p.display()
                ))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    prepare_out(out)?;

    let mut failed = 0;
    for file in &inputs {
        match profile_one(out, file, config, mode, &vocab) {
            Ok(summary) => println!("{summary}"),
            Err(e) => {
                failed += 1;
                eprintln!("railpattern: {}: {e}", file.path.display());
            }
        }
    }
    if failed > 0 {
        return Err(data(format!("{failed} of {} files failed", inputs.len())));
    }
    Ok(())
}

fn profile_one(
    out: &Path,
    file: &StationFile,
    config: BinConfig,
    mode: ParseMode,
    vocab: &Vocabulary,
) -> Result<String, String> {
    let mut stream = parse_file(file, mode, vocab).map_err(|e| e.to_string())?;
    let mut acc = ProfileAccumulator::new(file.station.clone(), config);
    for record in stream.by_ref() {
        acc.push(&record.map_err(|e| e.to_string())?);
    }
    let stats = stream.into_stats();
    let profiles = acc.finish();
    let stem = format!("{}_{}", file.station, file.year_month);
    for direction in Direction::ALL.iter().copied() {
        let subset: Vec<DayProfile> = profiles
            .iter()
            .filter(|p| p.direction == direction)
            .cloned()
            .collect();
        emit(out, &format!("{stem}_{direction}.profiles.csv"), |w| {
            write_profiles(&subset, w)
        })
        .map_err(|f| f.message().to_string())?;
    }
    emit(out, &format!("{stem}.ingest.txt"), |mut w| {
        w.write_all(stats.to_report().as_bytes())?;
        Ok(w)
    })
    .map_err(|f| f.message().to_string())?;
    Ok(format!("{stem}: {stats}, {} day profiles", profiles.len()))
}

fn period_label(profiles: &[DayProfile]) -> String {
    let first = profiles.iter().map(|p| YearMonth::of(p.date)).min();
    let last = profiles.iter().map(|p| YearMonth::of(p.date)).max();
    match (first, last) {
        (Some(a), Some(b)) if a == b => a.to_string(),
        (Some(a), Some(b)) => format!("{a}..{b}"),
        _ => "-".to_string(),
    }
}

pub fn template(
    out: &Path,
    calendar: Option<&Path>,
    kind: DistanceKind,
    per_month: bool,
    inputs: &[PathBuf],
) -> Result<(), Failure> {
    let policy = match calendar {
        Some(p) => CalendarPolicy::load(p).map_err(usage)?,
        None => CalendarPolicy::default(),
    };
    let mut profiles = Vec::new();
    for path in inputs {
        let mut read = read_profiles(open(path)?).map_err(|e| data(format!("{}: {e}", path.display())))?;
        profiles.append(&mut read);
    }
    if let Some(first) = profiles.first() {
        if let Some(p) = profiles.iter().find(|p| p.config != first.config) {
            return Err(data(format!(
                "profiles mix bin widths {} and {}",
                first.config.width(),
                p.config.width()
            )));
        }
    }
    prepare_out(out)?;

    // (station, direction, month if per_month) -> profiles
    let mut groups: BTreeMap<(StationId, Direction, Option<YearMonth>), Vec<DayProfile>> = BTreeMap::new();
    for p in profiles {
        let month = per_month.then(|| YearMonth::of(p.date));
        groups
            .entry((p.station.clone(), p.direction, month))
            .or_default()
            .push(p);
    }

    let mut report = String::new();
    let mut incoherent = 0;
    for ((station, direction, _), group) in &groups {
        let period = period_label(group);
        for (class, days) in group_by_class(group, &policy) {
            let t = extract_template(&days, class, &policy, kind).map_err(data)?;
            let name = format!("{station}_{period}_{direction}_{class}.template.csv");
            emit(out, &name, |w| write_template(&t, w))?;
            report.push_str(&describe(&t));
            report.push('\n');
            if !t.coherent {
                incoherent += 1;
                let why = if t.support < policy.min_support() {
                    format!("support {} below min_support {}", t.support, policy.min_support())
                } else {
                    format!("coherence {} above {}", t.coherence, policy.coherence_threshold())
                };
                eprintln!("warning: {station} {period} {direction} {class} is incoherent: {why}");
            }
        }
    }
    report.push_str(&format!(
        "distance={kind} coherence_threshold={} min_support={} incoherent_groups={incoherent}\n",
        policy.coherence_threshold(),
        policy.min_support()
    ));
    emit(out, "coherence.txt", |mut w| {
        w.write_all(report.as_bytes())?;
        Ok(w)
    })?;
    print!("{report}");
    Ok(())
}

fn read_templates(inputs: &[PathBuf]) -> Result<Vec<(PathBuf, UsageTemplate)>, Failure> {
    inputs
        .iter()
        .map(|path| {
            read_template(open(path)?)
                .map(|t| (path.clone(), t))
                .map_err(|e| data(format!("{}: {e}", path.display())))
        })
        .collect()
}

type SlotKey = (Direction, DayClass);

fn classify_one(
    station: &StationId,
    slots: &BTreeMap<SlotKey, Vec<&UsageTemplate>>,
    windows: &WindowConfig,
) -> Result<StationClassification, (StationId, String)> {
    let pick = |direction, class| -> Result<Option<&UsageTemplate>, (StationId, String)> {
        match slots.get(&(direction, class)).map(Vec::as_slice) {
            None | Some([]) => Ok(None),
            Some([t]) => Ok(Some(*t)),
            Some(many) => Err((
                station.clone(),
                format!("{} {direction} {class} templates given; expected one", many.len()),
            )),
        }
    };
    let templates = StationTemplates {
        entry_workday: pick(Direction::Entry, DayClass::Workday)?,
        exit_workday: pick(Direction::Exit, DayClass::Workday)?,
        entry_weekend: pick(Direction::Entry, DayClass::Weekend)?,
        exit_weekend: pick(Direction::Exit, DayClass::Weekend)?,
    };
    classify_station(templates, windows).map_err(|e| (station.clone(), e.to_string()))
}

fn clock_range(r: &std::ops::Range<u32>) -> String {
    format!(
        "{:02}:{:02}-{:02}:{:02}",
        r.start / 60,
        r.start % 60,
        r.end / 60,
        r.end % 60
    )
}

pub fn classify(out: &Path, windows: Option<&Path>, inputs: &[PathBuf]) -> Result<(), Failure> {
    let windows = match windows {
        Some(p) => WindowConfig::load(p).map_err(usage)?,
        None => WindowConfig::default(),
    };
    let templates = read_templates(inputs)?;
    prepare_out(out)?;

    let mut by_station: BTreeMap<StationId, BTreeMap<SlotKey, Vec<&UsageTemplate>>> = BTreeMap::new();
    for (_, t) in &templates {
        by_station
            .entry(t.station.clone())
            .or_default()
            .entry((t.direction, t.day_class))
            .or_default()
            .push(t);
    }
    let results: Vec<_> = by_station
        .iter()
        .map(|(station, slots)| classify_one(station, slots, &windows))
        .collect();
    emit(out, "classification.csv", |w| {
        write_classification_csv(&results, w)
    })?;
    let note = format!(
        "windows: morning {} midday {} evening {}, peak_height_frac {}, dip_frac {}, mixed_ratio {}",
        clock_range(&windows.morning),
        clock_range(&windows.midday),
        clock_range(&windows.evening),
        windows.peak_height_frac,
        windows.dip_frac,
        windows.mixed_ratio
    );
    let path = emit(out, "classification.txt", |w| {
        write_classification_text(&results, &note, w)
    })?;
    let text = fs::read_to_string(&path).map_err(io_error(&path))?;
    print!("{text}");
    Ok(())
}

pub fn diff(
    out: &Path,
    kind: DistanceKind,
    shape: f64,
    volume: Option<f64>,
    fail_on_change: bool,
    inputs: &[PathBuf],
) -> Result<(), Failure> {
    let thresholds =
        ChangeThresholds::new(shape, volume.unwrap_or(ChangeThresholds::default().volume)).map_err(usage)?;
    let templates = read_templates(inputs)?;

    // (station, direction, class) -> templates in period order; undated
    // templates keep their command-line order after dated ones
    let mut series: BTreeMap<(StationId, Direction, DayClass), Vec<&UsageTemplate>> = BTreeMap::new();
    for (_, t) in &templates {
        series
            .entry((t.station.clone(), t.direction, t.day_class))
            .or_default()
            .push(t);
    }
    for list in series.values_mut() {
        list.sort_by_key(|t| (t.period.is_none(), t.period));
    }
    if series.values().all(|list| list.len() < 2) {
        return Err(usage(
            "no station, direction and day class has templates for two periods",
        ));
    }

    let mut reports: Vec<ChangeReport> = Vec::new();
    for ((station, direction, class), list) in &series {
        if list.len() < 2 {
            eprintln!("warning: {station} {direction} {class}: single template, nothing to compare");
            continue;
        }
        for pair in list.windows(2) {
            match diff_templates(pair[0], pair[1], kind, thresholds) {
                Ok(r) => reports.push(r),
                Err(e @ ChangeError::Incompatible(_)) => return Err(usage(e)),
                Err(e) => return Err(data(e)),
            }
        }
    }
    prepare_out(out)?;
    emit(out, "changes.csv", |w| write_change_reports(&reports, w))?;
    for r in &reports {
        println!(
            "{} {} {} {} -> {}: shape {:.4} volume x{:.3}{}",
            r.station,
            r.direction,
            r.day_class,
            r.period_a,
            r.period_b,
            r.shape_distance,
            r.volume_ratio,
            if r.changed { " CHANGED" } else { "" }
        );
    }
    if fail_on_change && reports.iter().any(|r| r.changed) {
        return Err(Failure::Changed);
    }
    Ok(())
}

fn svg_stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = name.strip_suffix(".csv").unwrap_or(&name);
    name.strip_suffix(".template").unwrap_or(name).to_string()
}

pub fn plot(out: &Path, inputs: &[PathBuf]) -> Result<(), Failure> {
    // read everything first so a malformed input writes nothing
    let mut charts: Vec<(String, Series)> = Vec::new();
    for path in inputs {
        let mut reader = open(path)?;
        let first = reader.fill_buf().map_err(io_error(path))?.to_vec();
        if first.starts_with(b"station,date,") {
            let profiles = read_profiles(reader).map_err(|e| data(format!("{}: {e}", path.display())))?;
            for p in &profiles {
                let name = format!("{}_{}_{}", p.station, p.date.format("%Y-%m-%d"), p.direction);
                charts.push((name, Series::from_profile(p)));
            }
        } else {
            let t = read_template(reader).map_err(|e| data(format!("{}: {e}", path.display())))?;
            charts.push((svg_stem(path), Series::from_template(&t)));
        }
    }
    let rendered = charts
        .iter()
        .map(|(name, s)| {
            render_svg(s)
                .map(|svg| (name, svg))
                .map_err(|e| data(format!("{name}: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    prepare_out(out)?;
    for (name, svg) in rendered {
        let path = emit(out, &format!("{name}.svg"), |mut w| {
            w.write_all(svg.as_bytes())?;
            Ok(w)
        })?;
        println!("{}", path.display());
    }
    Ok(())
}

fn scenarios(spec: &str) -> Result<Vec<StationScenario>, Failure> {
    if let Some(s) = canonical_scenario(spec) {
        return Ok(vec![s]);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(usage(format!(
            "{spec:?} is neither a scenario file nor one of OUTSIDE_COMMUTER, OUTSIDE_WEEKEND, INSIDE_HUB, INSIDE_WEEKEND"
        )));
    }
    load_scenarios(path).map_err(usage)
}

pub fn synth(
    out: &Path,
    spec: &str,
    seed: Option<u64>,
    from: YearMonth,
    months: u32,
    scale: Option<f64>,
) -> Result<(), Failure> {
    if months == 0 {
        return Err(usage("--months must be at least 1"));
    }
    if let Some(f) = scale {
        if !(f >= 0.0 && f.is_finite()) {
            return Err(usage(format!("--scale {f} must be finite and non-negative")));
        }
    }
    let mut list = scenarios(spec)?;
    for s in &mut list {
        if let Some(seed) = seed {
            s.seed = seed;
        }
        if let Some(f) = scale {
            *s = s.clone().scaled(f);
        }
        s.validate().map_err(usage)?;
    }
    prepare_out(out)?;

    for s in &list {
        let mut month = from;
        for _ in 0..months {
            let (path, log) = write_month(s, month, out).map_err(data)?;
            let stem = format!("{}_{month}", s.station);
            emit(out, &format!("{stem}.emission.csv"), |w| log.write_csv(w))?;
            emit(out, &format!("{stem}.fields.csv"), |w| log.write_fields_csv(w))?;
            println!("{}: {} rows", path.display(), log.total_rows);
            month = month.next();
        }
    }
    Ok(())
}
