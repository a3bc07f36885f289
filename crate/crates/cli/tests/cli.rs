use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use railpattern::synth::canonical_scenario;

fn run(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_railpattern"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

fn matching(dir: &Path, needle: &str) -> Vec<String> {
    files(dir)
        .into_iter()
        .filter(|f| f.contains(needle))
        .map(|f| dir.join(f).display().to_string())
        .collect()
}

/// Generates one month of a canonical scenario into `<cwd>/data`.
fn synth(cwd: &Path, name: &str, month: &str, scale: &str) -> PathBuf {
    let o = run(
        cwd,
        &["synth", "--out", "data", "--from", month, "--scale", scale, name],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    cwd.join("data").join(format!("{name}_{month}.csv"))
}

const HEADER: &str =
    "timestamp,direction,fare_class,benefit_type,ticket_type,media,origin_station,dest_station";

#[test]
fn profile_writes_one_file_per_direction() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("S1_2018-03.csv"),
        format!(
            "{HEADER}\n2018-03-05T06:15:00,ENTRY,FULL,,ONE_WAY,SMARTCARD,S1,S2\n\
             2018-03-05T18:40:00,EXIT,DISCOUNT,FEDERAL,SUBSCRIPTION,PAPER,S2,S1\n"
        ),
    )
    .unwrap();
    let o = run(dir.path(), &["profile", "--out", "out", "S1_2018-03.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        files(&dir.path().join("out")),
        [
            "S1_2018-03.ingest.txt",
            "S1_2018-03_ENTRY.profiles.csv",
            "S1_2018-03_EXIT.profiles.csv"
        ]
    );
    let entry = fs::read_to_string(dir.path().join("out/S1_2018-03_ENTRY.profiles.csv")).unwrap();
    let row: Vec<&str> = entry.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..4], ["S1", "2018-03-05", "ENTRY", "60"]);
    assert_eq!(row[4 + 6], "1");
    let report = fs::read_to_string(dir.path().join("out/S1_2018-03.ingest.txt")).unwrap();
    assert!(
        report.starts_with("rows_read=2\nrows_accepted=2\nrows_rejected=0\n"),
        "{report}"
    );
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(dir.path(), &["profile"])), 1);
    assert_eq!(
        code(&run(
            dir.path(),
            &["profile", "--bin-width", "7", "S1_2018-03.csv"]
        )),
        1
    );
    assert_eq!(code(&run(dir.path(), &["profile", "not-a-station-file.csv"])), 1);
    assert_eq!(code(&run(dir.path(), &["synth", "NO_SUCH_SCENARIO"])), 1);
    assert_eq!(
        code(&run(dir.path(), &["diff", "--shape-threshold", "-1", "a", "b"])),
        1
    );
    assert_eq!(code(&run(dir.path(), &["bogus"])), 1);
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
    // nothing was written by any of the failed runs
    assert!(files(dir.path()).is_empty());
}

#[test]
fn failing_file_is_reported_and_others_processed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("S1_2018-03.csv"),
        format!("{HEADER}\n2018-03-05T06:15:00,ENTRY,FULL,,ONE_WAY,SMARTCARD,S1,S2\n"),
    )
    .unwrap();
    fs::write(
        dir.path().join("S2_2018-03.csv"),
        format!("{HEADER}\n2018-03-05T06:75:00,ENTRY,FULL,,ONE_WAY,SMARTCARD,S2,S1\n"),
    )
    .unwrap();
    let o = run(
        dir.path(),
        &["profile", "--out", "out", "S1_2018-03.csv", "S2_2018-03.csv"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("S2_2018-03.csv"), "{}", stderr(&o));
    assert!(dir.path().join("out/S1_2018-03_ENTRY.profiles.csv").exists());

    let lenient = run(
        dir.path(),
        &["profile", "--out", "out", "--mode", "lenient", "S2_2018-03.csv"],
    );
    assert_eq!(code(&lenient), 0, "{}", stderr(&lenient));
    let report = fs::read_to_string(dir.path().join("out/S2_2018-03.ingest.txt")).unwrap();
    assert!(report.contains("rejected_bad_timestamp=1"), "{report}");
}

#[test]
fn profile_totals_match_emission_log() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "OUTSIDE_COMMUTER", "2018-03", "0.2");
    let o = run(dir.path(), &["profile", "--out", "prof", data.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let emission = fs::read_to_string(dir.path().join("data/OUTSIDE_COMMUTER_2018-03.emission.csv")).unwrap();
    let mut expected = std::collections::BTreeMap::new();
    for line in emission.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let n: u64 = f[2].parse().unwrap();
        if n > 0 {
            expected.insert((f[0].to_string(), f[1].to_string()), n);
        }
    }
    let mut binned = std::collections::BTreeMap::new();
    for dir_name in ["ENTRY", "EXIT"] {
        let text = fs::read_to_string(
            dir.path()
                .join(format!("prof/OUTSIDE_COMMUTER_2018-03_{dir_name}.profiles.csv")),
        )
        .unwrap();
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let total: u64 = f[4..].iter().map(|c| c.parse::<u64>().unwrap()).sum();
            binned.insert((f[1].to_string(), f[2].to_string()), total);
        }
    }
    assert_eq!(binned, expected);
}

/// synth -> profile -> template for one scenario month; returns the
/// template directory.
fn templates_for(cwd: &Path, name: &str, month: &str, extra: &[&str]) -> PathBuf {
    let data = synth(cwd, name, month, "1");
    let o = run(cwd, &["profile", "--out", "prof", data.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let profiles = matching(&cwd.join("prof"), &format!("{name}_{month}"));
    let profiles: Vec<&str> = profiles
        .iter()
        .filter(|p| p.ends_with(".profiles.csv"))
        .map(String::as_str)
        .collect();
    let mut args = vec!["template", "--out", "tmpl", "--per-month"];
    args.extend_from_slice(extra);
    args.extend(profiles);
    let o = run(cwd, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    cwd.join("tmpl")
}

#[test]
fn synthetic_month_groups_are_coherent() {
    let dir = tempfile::tempdir().unwrap();
    let tmpl = templates_for(dir.path(), "OUTSIDE_COMMUTER", "2018-03", &[]);
    let report = fs::read_to_string(tmpl.join("coherence.txt")).unwrap();
    // WORKDAY, WEEKEND and seven weekdays per direction
    assert_eq!(
        report.lines().filter(|l| l.ends_with(" coherent")).count(),
        18,
        "{report}"
    );
    assert!(report.contains("incoherent_groups=0"));
    assert!(tmpl
        .join("OUTSIDE_COMMUTER_2018-03_ENTRY_WORKDAY.template.csv")
        .exists());
}

#[test]
fn unreachable_support_is_flagged_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("calendar.conf"),
        "min_support = 10\nholidays = 2018-03-08\n",
    )
    .unwrap();
    let data = synth(dir.path(), "OUTSIDE_COMMUTER", "2018-03", "0.2");
    run(dir.path(), &["profile", "--out", "prof", data.to_str().unwrap()]);
    let o = run(
        dir.path(),
        &[
            "template",
            "--out",
            "tmpl",
            "--calendar",
            "calendar.conf",
            "prof/OUTSIDE_COMMUTER_2018-03_ENTRY.profiles.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let err = stderr(&o);
    assert!(
        err.contains("warning: OUTSIDE_COMMUTER 2018-03 ENTRY MON is incoherent: support"),
        "{err}"
    );
    let report = fs::read_to_string(dir.path().join("tmpl/coherence.txt")).unwrap();
    assert!(report.contains("ENTRY WORKDAY: support=21 "), "{report}");
    assert!(report.contains("ENTRY WEEKEND: support=10 "), "{report}");
    assert!(report.contains("incoherent_groups=7"), "{report}");
}

#[test]
fn identical_days_have_zero_coherence() {
    let dir = tempfile::tempdir().unwrap();
    let counts = (0..24)
        .map(|b| (b * 3 % 17).to_string())
        .collect::<Vec<_>>()
        .join(",");
    let header = (0..24).map(|b| format!("c{b}")).collect::<Vec<_>>().join(",");
    let mut text = format!("station,date,direction,bin_width,{header}\n");
    for day in [5, 6, 7, 8, 9] {
        text.push_str(&format!("S1,2018-03-{day:02},ENTRY,60,{counts}\n"));
    }
    fs::write(dir.path().join("p.csv"), text).unwrap();
    let o = run(dir.path(), &["template", "--out", "t", "p.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = fs::read_to_string(dir.path().join("t/S1_2018-03_ENTRY_WORKDAY.template.csv")).unwrap();
    assert!(
        t.contains("# coherence=0\n") && t.contains("# coherent=true\n"),
        "{t}"
    );
}

#[test]
fn mixed_bin_widths_abort_templates() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "INSIDE_HUB", "2018-03", "0.05");
    run(dir.path(), &["profile", "--out", "p60", data.to_str().unwrap()]);
    run(
        dir.path(),
        &[
            "profile",
            "--out",
            "p30",
            "--bin-width",
            "30",
            data.to_str().unwrap(),
        ],
    );
    let o = run(
        dir.path(),
        &[
            "template",
            "--out",
            "t",
            "p60/INSIDE_HUB_2018-03_ENTRY.profiles.csv",
            "p30/INSIDE_HUB_2018-03_ENTRY.profiles.csv",
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("bin widths"), "{}", stderr(&o));
    assert!(!dir.path().join("t").exists());
}

#[test]
fn canonical_stations_classify() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["classify".to_string(), "--out".into(), "cls".into()];
    for name in ["OUTSIDE_COMMUTER", "INSIDE_HUB"] {
        let tmpl = templates_for(dir.path(), name, "2018-03", &[]);
        args.extend(
            matching(&tmpl, "_WORKDAY.")
                .into_iter()
                .filter(|p| p.contains(name)),
        );
        args.extend(
            matching(&tmpl, "_WEEKEND.")
                .into_iter()
                .filter(|p| p.contains(name)),
        );
    }
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = run(dir.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("cls/classification.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let find = |station: &str, direction: &str, class: &str| {
        rows.iter()
            .find(|r| r[0] == station && r[2] == direction && r[3] == class)
            .map(|r| (r[1], r[4]))
            .unwrap()
    };
    assert_eq!(
        find("OUTSIDE_COMMUTER", "ENTRY", "WORKDAY"),
        ("COMMUTER_ORIGIN", "MORNING_PEAK;NO_EVENING_PEAK")
    );
    assert_eq!(
        find("OUTSIDE_COMMUTER", "EXIT", "WORKDAY"),
        ("COMMUTER_ORIGIN", "EVENING_PEAK")
    );
    assert_eq!(
        find("INSIDE_HUB", "ENTRY", "WORKDAY"),
        ("EMPLOYMENT_HUB", "MORNING_PEAK;EVENING_PEAK;DUAL_PEAK;MIDDAY_DIP")
    );
    assert_eq!(
        find("INSIDE_HUB", "ENTRY", "WEEKEND"),
        ("EMPLOYMENT_HUB", "MORNING_PEAK;NO_EVENING_PEAK")
    );
    assert!(dir.path().join("cls/classification.txt").exists());
}

fn write_template(
    dir: &Path,
    name: &str,
    direction: &str,
    class: &str,
    period: &str,
    means: &[f64],
) -> String {
    let mut text = format!(
        "# station=S1\n# direction={direction}\n# day_class={class}\n# bin_width={}\n# period={period}\n\
         # support=20\n# coherence=0.01\n# coherent=true\nbin,mean,std\n",
        1440 / means.len().max(1)
    );
    for (i, m) in means.iter().enumerate() {
        text.push_str(&format!("{i},{m},0\n"));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn dual_peak() -> Vec<f64> {
    vec![
        0., 0., 0., 0., 0., 0., 2., 30., 20., 8., 5., 4., 2., 3., 6., 10., 18., 28., 26., 12., 6., 3., 1., 0.,
    ]
}

#[test]
fn flat_and_partial_inputs_still_classify() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let a = write_template(p, "a.csv", "ENTRY", "WORKDAY", "2018-03", &[10.0; 24]);
    let b = write_template(p, "b.csv", "EXIT", "WORKDAY", "2018-03", &[10.0; 24]);
    let o = run(p, &["classify", "--out", "c", &a, &b]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(p.join("c/classification.csv")).unwrap();
    assert!(csv.contains("S1,UNCLASSIFIED,ENTRY,WORKDAY,FLAT,,"), "{csv}");

    // no EXIT WORKDAY template: the station is reported with a reason
    let o = run(p, &["classify", "--out", "c", &a]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(p.join("c/classification.csv")).unwrap();
    assert!(
        csv.lines().nth(1).unwrap().starts_with("S1,UNCLASSIFIED,,,,,"),
        "{csv}"
    );
    assert!(csv.contains("EXIT WORKDAY"), "{csv}");
}

#[test]
fn identical_periods_do_not_change() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let a = write_template(p, "a.csv", "ENTRY", "WORKDAY", "2018-03", &dual_peak());
    let b = write_template(p, "b.csv", "ENTRY", "WORKDAY", "2018-04", &dual_peak());
    let o = run(p, &["diff", "--out", "d", "--fail-on-change", &a, &b]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(p.join("d/changes.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(
        &row[..9],
        ["S1", "ENTRY", "WORKDAY", "L2", "2018-03", "2018-04", "0", "1", "false"]
    );

    let coarse: Vec<f64> = dual_peak().chunks(2).map(|c| c[0] + c[1]).collect();
    let c = write_template(p, "c.csv", "ENTRY", "WORKDAY", "2018-05", &coarse);
    assert_eq!(code(&run(p, &["diff", "--out", "d", &a, &c])), 1);
}

#[test]
fn shifted_peak_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let base = canonical_scenario("OUTSIDE_COMMUTER").unwrap();
    let mut shifted = base.clone();
    let v = base.workday_entry.clone();
    shifted.workday_entry[5..12].copy_from_slice(&v[3..10]);
    shifted.workday_entry[3] = v[3];
    shifted.workday_entry[4] = v[3];
    fs::write(p.join("base.conf"), base.to_config()).unwrap();
    fs::write(p.join("shifted.conf"), shifted.to_config()).unwrap();
    for (conf, month) in [("base.conf", "2018-03"), ("shifted.conf", "2018-04")] {
        let o = run(p, &["synth", "--out", "data", "--from", month, conf]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let o = run(
        p,
        &[
            "profile",
            "--out",
            "prof",
            "data/OUTSIDE_COMMUTER_2018-03.csv",
            "data/OUTSIDE_COMMUTER_2018-04.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(
        p,
        &[
            "template",
            "--out",
            "tmpl",
            "--per-month",
            "prof/OUTSIDE_COMMUTER_2018-03_ENTRY.profiles.csv",
            "prof/OUTSIDE_COMMUTER_2018-04_ENTRY.profiles.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let a = "tmpl/OUTSIDE_COMMUTER_2018-03_ENTRY_WORKDAY.template.csv";
    let b = "tmpl/OUTSIDE_COMMUTER_2018-04_ENTRY_WORKDAY.template.csv";
    assert_eq!(code(&run(p, &["diff", "--out", "d", a, b])), 0);
    let o = run(p, &["diff", "--out", "d", "--fail-on-change", b, a]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let csv = fs::read_to_string(p.join("d/changes.csv")).unwrap();
    // inputs are ordered by period, not by argument position
    assert!(csv.lines().nth(1).unwrap().contains(",2018-03,2018-04,"), "{csv}");
}

/// (bin, height) of every bar.
fn bars(svg: &str) -> Vec<(usize, f64)> {
    let attr = |tag: &str, name: &str| -> String {
        let start = tag.find(&format!(" {name}=\"")).unwrap() + name.len() + 3;
        tag[start..].split('"').next().unwrap().to_string()
    };
    svg.lines()
        .filter(|l| l.contains("class=\"bar\""))
        .map(|l| {
            (
                attr(l, "data-bin").parse().unwrap(),
                attr(l, "height").parse().unwrap(),
            )
        })
        .collect()
}

#[test]
fn plot_draws_one_bar_per_bin() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let t = write_template(
        p,
        "S1_2018-03_ENTRY_WORKDAY.template.csv",
        "ENTRY",
        "WORKDAY",
        "2018-03",
        &dual_peak(),
    );
    let o = run(p, &["plot", "--out", "plots", &t]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = fs::read_to_string(p.join("plots/S1_2018-03_ENTRY_WORKDAY.svg")).unwrap();
    let mut b = bars(&svg);
    assert_eq!(b.len(), 24);
    assert!(svg.contains(">Time of day<") && svg.contains(">Passengers<"));
    b.sort_by(|x, y| y.1.total_cmp(&x.1));
    let mut tallest = [b[0].0, b[1].0];
    tallest.sort();
    assert!((6..10).contains(&tallest[0]), "{tallest:?}");
    assert!((16..20).contains(&tallest[1]), "{tallest:?}");

    // deterministic bytes
    run(p, &["plot", "--out", "again", &t]);
    assert_eq!(
        fs::read(p.join("again/S1_2018-03_ENTRY_WORKDAY.svg")).unwrap(),
        svg.into_bytes()
    );
}

#[test]
fn plot_profiles_and_reject_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let header = (0..24).map(|b| format!("c{b}")).collect::<Vec<_>>().join(",");
    let counts = vec!["1"; 24].join(",");
    fs::write(
        p.join("p.csv"),
        format!("station,date,direction,bin_width,{header}\nS1,2018-03-05,ENTRY,60,{counts}\nS1,2018-03-06,ENTRY,60,{counts}\n"),
    )
    .unwrap();
    let o = run(p, &["plot", "--out", "plots", "p.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        files(&p.join("plots")),
        ["S1_2018-03-05_ENTRY.svg", "S1_2018-03-06_ENTRY.svg"]
    );

    fs::write(
        p.join("bad.csv"),
        format!("station,date,direction,bin_width,{header}\nS1,2018-03-05,ENTRY,60,1,2\n"),
    )
    .unwrap();
    let o = run(p, &["plot", "--out", "bad", "bad.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let empty = write_template(p, "e.csv", "ENTRY", "WORKDAY", "2018-03", &[]);
    let o = run(p, &["plot", "--out", "bad", &empty]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(!p.join("bad").exists());
}

#[test]
fn synth_is_reproducible_and_named_by_month() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for out in ["a", "b"] {
        let o = run(
            p,
            &[
                "synth",
                "--out",
                out,
                "--seed",
                "42",
                "--scale",
                "0.05",
                "INSIDE_HUB",
            ],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(files(&p.join("a")), files(&p.join("b")));
    for f in files(&p.join("a")) {
        assert_eq!(
            fs::read(p.join("a").join(&f)).unwrap(),
            fs::read(p.join("b").join(&f)).unwrap(),
            "{f}"
        );
    }

    let o = run(p, &["synth", "--out", "zero", "--scale", "0", "OUTSIDE_COMMUTER"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read_to_string(p.join("zero/OUTSIDE_COMMUTER_2018-03.csv")).unwrap(),
        format!("{HEADER}\n")
    );

    let o = run(
        p,
        &[
            "synth",
            "--out",
            "year",
            "--from",
            "2018-01",
            "--months",
            "12",
            "--scale",
            "0.01",
            "OUTSIDE_WEEKEND",
        ],
    );
    assert_eq!(code(&o), 0);
    let csvs: Vec<String> = files(&p.join("year"))
        .into_iter()
        .filter(|f| !f.contains(".emission.") && !f.contains(".fields."))
        .collect();
    let expected: Vec<String> = (1..=12)
        .map(|m| format!("OUTSIDE_WEEKEND_2018-{m:02}.csv"))
        .collect();
    assert_eq!(csvs, expected);
    // all outputs stay under the declared directories
    assert_eq!(files(p), ["a", "b", "year", "zero"]);
}
