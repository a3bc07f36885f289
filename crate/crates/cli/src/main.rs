mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use railpattern::ingest::{ParseMode, YearMonth};
use railpattern::similarity::DistanceKind;

use commands::Failure;

/// Station usage profiles, templates, archetypes and change reports from
/// per-station monthly validation logs.
#[derive(Debug, Parser)]
#[command(name = "railpattern", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Output {
    /// Directory that receives every output file.
    #[arg(long, short, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Bin validation files (`<station>_<YYYY-MM>.csv`) into day profiles.
    Profile {
        #[command(flatten)]
        output: Output,
        /// Bin width in minutes; must divide 1440.
        #[arg(long, default_value_t = 60)]
        bin_width: u32,
        #[arg(long, default_value = "STRICT", value_parser = parse_mode)]
        mode: ParseMode,
        /// Ticket and benefit vocabulary file.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Check day-class coherence and average profiles into templates.
    Template {
        #[command(flatten)]
        output: Output,
        /// Calendar policy file (holidays, min_support, coherence_threshold).
        #[arg(long)]
        calendar: Option<PathBuf>,
        #[arg(long, default_value = "L2", value_parser = parse_distance)]
        distance: DistanceKind,
        /// One template per calendar month instead of one per input set.
        #[arg(long)]
        per_month: bool,
        #[arg(required = true)]
        profiles: Vec<PathBuf>,
    },
    /// Detect peaks, label template shapes and assign station archetypes.
    Classify {
        #[command(flatten)]
        output: Output,
        /// Time-window and threshold file.
        #[arg(long)]
        windows: Option<PathBuf>,
        #[arg(required = true)]
        templates: Vec<PathBuf>,
    },
    /// Compare templates of the same station, direction and day class
    /// across consecutive periods.
    Diff {
        #[command(flatten)]
        output: Output,
        #[arg(long, default_value = "L2", value_parser = parse_distance)]
        distance: DistanceKind,
        /// Shape distance above which a pair counts as changed.
        #[arg(long, default_value_t = 0.15, allow_negative_numbers = true)]
        shape_threshold: f64,
        /// Limit on |ln(volume ratio)|; defaults to ln(1.25).
        #[arg(long, allow_negative_numbers = true)]
        volume_threshold: Option<f64>,
        /// Exit with status 3 when any pair changed.
        #[arg(long)]
        fail_on_change: bool,
        #[arg(required = true, num_args = 2..)]
        templates: Vec<PathBuf>,
    },
    /// Render template or profile CSVs as SVG bar charts.
    Plot {
        #[command(flatten)]
        output: Output,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Generate validation files from a scenario file or a built-in scenario
    /// (OUTSIDE_COMMUTER, OUTSIDE_WEEKEND, INSIDE_HUB, INSIDE_WEEKEND).
    Synth {
        #[command(flatten)]
        output: Output,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// First month, YYYY-MM.
        #[arg(long, default_value = "2018-03")]
        from: YearMonth,
        /// Number of consecutive months.
        #[arg(long, default_value_t = 1)]
        months: u32,
        /// Multiplies all expected counts.
        #[arg(long, allow_negative_numbers = true)]
        scale: Option<f64>,
        /// Scenario file, or the name of a built-in scenario.
        scenario: String,
    },
}

fn parse_mode(s: &str) -> Result<ParseMode, String> {
    s.parse()
}

fn parse_distance(s: &str) -> Result<DistanceKind, String> {
    s.parse()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Profile {
            output,
            bin_width,
            mode,
            vocab,
            files,
        } => commands::profile(&output.out, bin_width, mode, vocab.as_deref(), &files),
        Command::Template {
            output,
            calendar,
            distance,
            per_month,
            profiles,
        } => commands::template(&output.out, calendar.as_deref(), distance, per_month, &profiles),
        Command::Classify {
            output,
            windows,
            templates,
        } => commands::classify(&output.out, windows.as_deref(), &templates),
        Command::Diff {
            output,
            distance,
            shape_threshold,
            volume_threshold,
            fail_on_change,
            templates,
        } => commands::diff(
            &output.out,
            distance,
            shape_threshold,
            volume_threshold,
            fail_on_change,
            &templates,
        ),
        Command::Plot { output, files } => commands::plot(&output.out, &files),
        Command::Synth {
            output,
            seed,
            from,
            months,
            scale,
            scenario,
        } => commands::synth(&output.out, &scenario, seed, from, months, scale),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(Failure::USAGE);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("railpattern: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
