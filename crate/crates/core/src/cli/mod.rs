//! `toftrack` command-line entry point.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (feasibility: clock is fine enough) |
//! | 1 | feasibility: clock too coarse |
//! | 2 | invalid arguments, config or input file |
//! | 3 | degenerate tower geometry |
//! | 4 | no usable measurements |

pub mod manifest;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::geometry::{distance, Point3, TowerSite};
use crate::ingest::{
    compare_with_reference, discrepancy_report, pair_rtts, parse_ping_log, parse_reference_table, rtt_csv,
    rtt_stats, serialize_records, subtract_baseline,
};
use crate::simulator::sweep::run_trials;
use crate::simulator::{measurement_csv, run_scenario, ScenarioConfig, SimError};
use crate::timing::{required_precision, SPEED_OF_LIGHT};
use crate::trilateration::{locate, LocationFix, TrilaterationError, ZConvention};

use manifest::{digest_text, write_outputs, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_NO_DATA: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "toftrack", version, about = "Time-of-flight localization toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the ranging protocol for a scenario and localize the mobile.
    Simulate {
        /// Scenario file (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Directory for trace, measurements, fix and manifest.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Trilaterate from a file of `tower_id x y z range_m` rows.
    Locate {
        /// Comma or whitespace separated rows; a header line and `#` comments are skipped.
        input: PathBuf,
        /// Side of the tower plane to pick with three towers: nonnegative or nonpositive.
        #[arg(long, default_value = "nonnegative")]
        z_convention: ZConvention,
        /// Also write fix.txt and a manifest here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Pair requests and replies in a ping trace and summarize round trips.
    AnalyzeLog {
        /// Tab separated trace: seq, time, source, destination, protocol, info.
        log: PathBuf,
        /// Kernel delay to subtract from every round trip, seconds.
        #[arg(long)]
        baseline: Option<f64>,
        /// Reference table (one millisecond value per line) to compare against.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Allowed difference from the reference, microseconds.
        #[arg(long, default_value_t = 0)]
        tolerance_us: i64,
        /// Directory for rtt.csv, stats.txt, discrepancy.txt and manifest.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Check whether a clock resolution can resolve propagation over a range.
    Feasibility {
        /// Meters.
        #[arg(long)]
        range: f64,
        /// Clock resolution, seconds.
        #[arg(long)]
        clock: f64,
        /// Propagation speed, m/s.
        #[arg(long, default_value_t = SPEED_OF_LIGHT)]
        speed: f64,
        /// Also write feasibility.txt and a manifest here.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Simulate { config, out_dir } => cmd_simulate(&config, &out_dir),
        Command::Locate { input, z_convention, out_dir } => {
            cmd_locate(&input, z_convention, out_dir.as_deref())
        }
        Command::AnalyzeLog { log, baseline, reference, tolerance_us, out_dir } => {
            cmd_analyze_log(&log, baseline, reference.as_deref(), tolerance_us, &out_dir)
        }
        Command::Feasibility { range, clock, speed, out_dir } => {
            cmd_feasibility(range, clock, speed, out_dir.as_deref())
        }
    };
    match result {
        Ok(Done { code, stdout }) => {
            print!("{stdout}");
            code
        }
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            code
        }
    }
}

/// A finished command: its exit code and what it prints.
#[derive(Debug)]
pub struct Done {
    pub code: i32,
    pub stdout: String,
}

impl Done {
    fn ok(stdout: String) -> Self {
        Self { code: EXIT_OK, stdout }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("cannot read {}: {e}", path.display())))
}

fn write(dir: &Path, files: &[(&str, String)], manifest: RunManifest) -> Result<(), Failure> {
    write_outputs(dir, files, manifest)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("cannot write to {}: {e}", dir.display())))
}

fn trilateration_failure(e: TrilaterationError) -> Failure {
    let code = if e.is_degenerate_geometry() { EXIT_DEGENERATE } else { EXIT_INVALID };
    Failure::new(code, e.to_string())
}

fn sim_failure(e: SimError) -> Failure {
    match e {
        SimError::Trilateration(t) => trilateration_failure(t),
        SimError::InsufficientMeasurements { .. } => Failure::new(EXIT_NO_DATA, e.to_string()),
        other => Failure::new(EXIT_INVALID, other.to_string()),
    }
}

/// Human-readable fix summary shared by `simulate` and `locate`.
pub fn fix_report(fix: &LocationFix, towers: &[TowerSite], truth: Option<Point3>) -> String {
    let p = fix.position;
    let mut out = String::new();
    let _ = writeln!(out, "position {:.6} {:.6} {:.6}", p.x, p.y, p.z);
    if let Some(t) = truth {
        let _ = writeln!(out, "true_position {:.6} {:.6} {:.6}", t.x, t.y, t.z);
        let _ = writeln!(out, "error_m {:.9}", distance(p, t));
    }
    let _ = writeln!(out, "method {}", fix.method);
    let _ = writeln!(out, "z_branch {}", fix.z_branch);
    let _ = writeln!(out, "clamped {}", fix.clamped);
    for (tower, r) in towers.iter().zip(&fix.residuals) {
        let _ = writeln!(out, "residual {} {:.9}", tower.id, r);
    }
    out
}

pub fn cmd_simulate(config_path: &Path, out_dir: &Path) -> Result<Done, Failure> {
    let text = read(config_path)?;
    let config = ScenarioConfig::from_toml(&text).map_err(sim_failure)?;
    let outcome = run_scenario(&config).map_err(sim_failure)?;
    let used: Vec<TowerSite> = outcome.used().iter().map(|m| m.tower).collect();
    let report = fix_report(&outcome.fix, &used, Some(config.mobile));

    let mut files = vec![
        ("trace.tsv", outcome.trace.to_tsv()),
        ("measurements.csv", measurement_csv(&outcome.measurements, config.mobile)),
        ("fix.txt", report.clone()),
    ];
    if config.trials > 1 {
        let sweep = run_trials(&config).map_err(sim_failure)?;
        files.push(("sweep.csv", sweep.to_csv()));
        let _ = writeln!(
            files[2].1,
            "sweep_trials {}\nsweep_mean_error_m {:.9}\nsweep_median_error_m {:.9}\nsweep_max_error_m {:.9}",
            sweep.trials.len(),
            sweep.mean_error,
            sweep.median_error,
            sweep.max_error
        );
    }
    let manifest = RunManifest::new("simulate", config.digest(), Some(config.seed));
    write(out_dir, &files, manifest)?;
    Ok(Done::ok(report))
}

/// Parses `tower_id x y z range_m` rows separated by commas or whitespace.
/// Blank lines, `#` comments and a non-numeric header line are skipped.
pub fn parse_locate_input(text: &str) -> Result<(Vec<TowerSite>, Vec<f64>), String> {
    let mut towers = Vec::new();
    let mut ranges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> =
            line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        if towers.is_empty() && fields.first().is_some_and(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if fields.len() != 5 {
            return Err(format!("line {}: expected 5 fields, found {}", i + 1, fields.len()));
        }
        let num = |k: usize| {
            fields[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("line {}: bad number '{}'", i + 1, fields[k]))
        };
        let id =
            fields[0].parse::<u32>().map_err(|_| format!("line {}: bad tower id '{}'", i + 1, fields[0]))?;
        towers.push(TowerSite::new(id, Point3::new(num(1)?, num(2)?, num(3)?)));
        ranges.push(num(4)?);
    }
    if towers.len() < 3 {
        return Err(format!("need at least 3 tower rows, found {}", towers.len()));
    }
    Ok((towers, ranges))
}

pub fn cmd_locate(input: &Path, convention: ZConvention, out_dir: Option<&Path>) -> Result<Done, Failure> {
    let text = read(input)?;
    let (towers, ranges) = parse_locate_input(&text).map_err(|m| Failure::new(EXIT_INVALID, m))?;
    let fix = locate(&towers, &ranges, convention).map_err(trilateration_failure)?;
    let report = fix_report(&fix, &towers, None);
    if let Some(dir) = out_dir {
        let mut canonical = format!("z_convention={convention}\n");
        for (t, r) in towers.iter().zip(&ranges) {
            let p = t.position;
            let _ = writeln!(canonical, "{} {:e} {:e} {:e} {:e}", t.id, p.x, p.y, p.z, r);
        }
        let manifest = RunManifest::new("locate", digest_text(&canonical), None);
        write(dir, &[("fix.txt", report.clone())], manifest)?;
    }
    Ok(Done::ok(report))
}

pub fn cmd_analyze_log(
    log_path: &Path,
    baseline: Option<f64>,
    reference: Option<&Path>,
    tolerance_us: i64,
    out_dir: &Path,
) -> Result<Done, Failure> {
    let text = read(log_path)?;
    let reference_ms = reference.map(read).transpose()?.map(|t| parse_reference_table(&t));
    let log = parse_ping_log(&text);
    let samples = pair_rtts(&log.records);
    let stats = rtt_stats(&samples).map_err(|e| Failure::new(EXIT_NO_DATA, e.to_string()))?;

    let comparison = reference_ms.as_deref().map(|r| compare_with_reference(&samples, r, tolerance_us));
    let report = discrepancy_report(&log, &samples, comparison.as_deref().map(|c| (c, tolerance_us)));

    let mut files = vec![
        ("rtt.csv", rtt_csv(&samples)),
        ("stats.txt", stats.to_ms_summary()),
        ("discrepancy.txt", report),
    ];
    let mut canonical = serialize_records(&log.records);
    if let Some(b) = baseline {
        let est = subtract_baseline(&samples, b).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
        let mut csv = String::from("request_seq,time_prop_s,negative\n");
        for e in &est {
            let _ = writeln!(csv, "{},{:.9},{}", e.request_seq, e.time_prop, e.negative);
        }
        files.push(("propagation.csv", csv));
        let _ = writeln!(canonical, "baseline={b:e}");
    }
    if let Some(r) = &reference_ms {
        let _ = writeln!(canonical, "reference={r:?} tolerance_us={tolerance_us}");
    }
    let manifest = RunManifest::new("analyze-log", digest_text(&canonical), None);
    write(out_dir, &files, manifest)?;
    Ok(Done::ok(stats.to_ms_summary()))
}

pub fn cmd_feasibility(range: f64, clock: f64, speed: f64, out_dir: Option<&Path>) -> Result<Done, Failure> {
    let report =
        required_precision(range, speed, clock).map_err(|e| Failure::new(EXIT_INVALID, e.to_string()))?;
    let line = format!("{report}\n");
    if let Some(dir) = out_dir {
        let canonical = format!("range={range:e} clock={clock:e} speed={speed:e}\n");
        let manifest = RunManifest::new("feasibility", digest_text(&canonical), None);
        write(dir, &[("feasibility.txt", line.clone())], manifest)?;
    }
    let code = if report.feasible { EXIT_OK } else { EXIT_INFEASIBLE };
    Ok(Done { code, stdout: line })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_input_formats() {
        let text = "tower_id,x,y,z,range_m\n0,0,0,0,7.0710678\n1 10 0 0 9.4868330\n# c\n2,0,10,0,8.3666003\n";
        let (t, r) = parse_locate_input(text).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t[1].position, Point3::new(10.0, 0.0, 0.0));
        assert_eq!(r[2], 8.3666003);
    }

    #[test]
    fn locate_input_errors() {
        assert!(parse_locate_input("0,0,0,0,1\n1,1,0,0,1\n").is_err());
        assert!(parse_locate_input("0,0,0,0,1\n1,1,0,0\n2,0,1,0,1\n").is_err());
        assert!(parse_locate_input("0,0,0,0,1\n1,1,0,0,x\n2,0,1,0,1\n").is_err());
    }

    #[test]
    fn feasibility_exit_codes() {
        assert_eq!(cmd_feasibility(175.0, 1e-6, SPEED_OF_LIGHT, None).unwrap().code, EXIT_INFEASIBLE);
        assert_eq!(cmd_feasibility(175.0, 1e-7, SPEED_OF_LIGHT, None).unwrap().code, EXIT_OK);
        assert_eq!(cmd_feasibility(0.0, 1e-7, SPEED_OF_LIGHT, None).unwrap_err().code, EXIT_INVALID);
    }
}
