//! Command-line front end: evaluate scenario files, sweep parameters into
//! CSV, run finite-shot sampling, and list the packaged presets.

mod scenario;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use netsteer_core::criteria::{preset, CriterionReport, PresetName, VIOLATION_TOL};
use netsteer_core::sampling::{estimate_criterion, sample};
use scenario::{resolve, shot_plan, Scenario};

#[derive(Parser)]
#[command(
    name = "netsteer",
    version,
    about = "Certify n -> 1 steering in star networks via nonlinear, linear, and Bell criteria"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a scenario file and print a criterion report
    Eval {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Sweep one scalar of a scenario (dotted path, `*` fans out over
    /// arrays) and write CSV rows
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the scenario's correlation table and report value +/- stderr
    Sample {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// List the packaged presets
    Presets {
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
}

/// Scenario problems exit with status 2, everything else with 1.
enum CliError {
    Scenario(anyhow::Error),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("NETSTEER_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Scenario(e)) => {
            eprintln!("scenario error: {e:#}");
            ExitCode::from(2)
        }
        Err(CliError::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> std::result::Result<(), CliError> {
    match cli.command {
        Command::Eval { scenario, format } => cmd_eval(&scenario, format),
        Command::Sweep { scenario, param, from, to, steps, out } => {
            cmd_sweep(&scenario, &param, from, to, steps, &out)
        }
        Command::Sample { scenario, shots, seed, format } => {
            cmd_sample(&scenario, shots, seed, format)
        }
        Command::Presets { format } => cmd_presets(format).map_err(CliError::Other),
    }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EvalOutput<'a> {
    toolkit_version: &'a str,
    scenario_hash: String,
    report: &'a CriterionReport,
}

fn load_scenario(path: &Path) -> std::result::Result<(Scenario, String), CliError> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario file {}", path.display()))
        .map_err(CliError::Other)?;
    let scenario = Scenario::from_json(&text).map_err(CliError::Scenario)?;
    let hash = scenario_hash(&scenario).map_err(CliError::Other)?;
    Ok((scenario, hash))
}

fn scenario_hash(scenario: &Scenario) -> Result<String> {
    let canonical = serde_json::to_string(scenario)?;
    Ok(format!("{:016x}", fnv1a64(canonical.as_bytes())))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn cmd_eval(path: &Path, format: Format) -> std::result::Result<(), CliError> {
    let (scenario, hash) = load_scenario(path)?;
    let resolved = resolve(&scenario).map_err(CliError::Scenario)?;
    let report = resolved.evaluate(&scenario.descriptor())?;
    match format {
        Format::Json => {
            let out = EvalOutput {
                toolkit_version: env!("CARGO_PKG_VERSION"),
                scenario_hash: hash,
                report: &report,
            };
            println!("{}", serde_json::to_string_pretty(&out).map_err(|e| anyhow!(e))?);
        }
        Format::Text => print_report_text(&report, &hash),
    }
    Ok(())
}

fn print_report_text(report: &CriterionReport, hash: &str) {
    println!("criterion:  {}", report.criterion);
    println!("scenario:   {} [{}]", report.scenario, hash);
    println!("value:      {}", fmt_sig(report.value));
    println!(
        "bound:      {} ({})",
        fmt_sig(report.bound),
        match report.bound_provenance {
            netsteer_core::criteria::BoundProvenance::Analytic => "analytic",
            netsteer_core::criteria::BoundProvenance::Enumeration => "enumeration",
            netsteer_core::criteria::BoundProvenance::Optimizer => "optimizer",
        }
    );
    println!("ratio:      {}", fmt_sig(report.ratio));
    println!("violated:   {}", report.violated);
    for (key, value) in &report.details {
        println!("  {key} = {}", fmt_sig(*value));
    }
    for note in &report.notes {
        println!("note: {note}");
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// 12 significant digits, scientific notation, '.' decimal separator.
fn fmt_sig(x: f64) -> String {
    format!("{:.11e}", x)
}

fn cmd_sweep(
    path: &Path,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
    out: &Path,
) -> std::result::Result<(), CliError> {
    if steps == 0 {
        return Err(CliError::Scenario(anyhow!("--steps must be at least 1")));
    }
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read scenario file {}", path.display()))
        .map_err(CliError::Other)?;
    let base: Value = serde_json::from_str(&text)
        .context("scenario is not valid JSON")
        .map_err(CliError::Scenario)?;

    let values: Vec<f64> = if steps == 1 {
        vec![from]
    } else {
        (0..steps)
            .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
            .collect()
    };

    // surface path errors before spawning the sweep
    {
        let mut probe = base.clone();
        set_path(&mut probe, param, values[0]).map_err(CliError::Scenario)?;
    }

    let rows: std::result::Result<Vec<(f64, CriterionReport)>, String> = values
        .par_iter()
        .map(|&x| {
            let mut doc = base.clone();
            set_path(&mut doc, param, x).map_err(|e| e.to_string())?;
            let scenario: Scenario =
                serde_json::from_value(doc).map_err(|e| format!("step {x}: {e}"))?;
            let resolved = resolve(&scenario).map_err(|e| format!("step {x}: {e:#}"))?;
            let report = resolved
                .evaluate(&scenario.descriptor())
                .map_err(|e| format!("step {x}: {e:#}"))?;
            Ok((x, report))
        })
        .collect();
    let rows = rows.map_err(|e| CliError::Scenario(anyhow!(e)))?;

    let mut file = fs::File::create(out)
        .with_context(|| format!("cannot create {}", out.display()))
        .map_err(CliError::Other)?;
    writeln!(file, "param,value,bound,violated").map_err(|e| CliError::Other(e.into()))?;
    for (x, report) in &rows {
        writeln!(
            file,
            "{},{},{},{}",
            fmt_sig(*x),
            fmt_sig(report.value),
            fmt_sig(report.bound),
            report.violated
        )
        .map_err(|e| CliError::Other(e.into()))?;
    }
    println!("wrote {} rows to {}", rows.len(), out.display());
    Ok(())
}

/// Set a scalar addressed by a dotted path inside a JSON document. Path
/// segments are object keys, array indices, or `*` (every array element).
/// Integer-valued fields only accept whole numbers.
fn set_path(doc: &mut Value, path: &str, x: f64) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        bail!("parameter path '{}' has an empty segment", path);
    }
    descend(doc, &segments, x, path)
}

fn descend(node: &mut Value, segments: &[&str], x: f64, full: &str) -> Result<()> {
    if segments.is_empty() {
        return set_leaf(node, x, full);
    }
    let (head, rest) = (segments[0], &segments[1..]);
    match node {
        Value::Object(map) => {
            let child = map
                .get_mut(head)
                .ok_or_else(|| anyhow!("parameter path '{}': no field '{}'", full, head))?;
            descend(child, rest, x, full)
        }
        Value::Array(items) => {
            if head == "*" {
                if items.is_empty() {
                    bail!("parameter path '{}': '*' over an empty array", full);
                }
                for item in items.iter_mut() {
                    descend(item, rest, x, full)?;
                }
                Ok(())
            } else {
                let idx: usize = head
                    .parse()
                    .map_err(|_| anyhow!("parameter path '{}': '{}' is not an index", full, head))?;
                let child = items
                    .get_mut(idx)
                    .ok_or_else(|| anyhow!("parameter path '{}': index {} out of range", full, idx))?;
                descend(child, rest, x, full)
            }
        }
        _ => bail!(
            "parameter path '{}': segment '{}' addresses a scalar, not a container",
            full,
            head
        ),
    }
}

fn set_leaf(node: &mut Value, x: f64, full: &str) -> Result<()> {
    match node {
        Value::Number(n) if n.is_u64() || n.is_i64() => {
            if (x - x.round()).abs() > 1e-9 {
                bail!(
                    "parameter path '{}': field is an integer but the sweep value {} is not",
                    full,
                    x
                );
            }
            *node = Value::from(x.round() as i64);
            Ok(())
        }
        Value::Number(_) => {
            *node = serde_json::Number::from_f64(x)
                .map(Value::Number)
                .ok_or_else(|| anyhow!("sweep value {} is not finite", x))?;
            Ok(())
        }
        _ => bail!("parameter path '{}' does not address a number", full),
    }
}

// ---------------------------------------------------------------------------
// sample
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SampleOutput<'a> {
    toolkit_version: &'a str,
    scenario_hash: String,
    criterion: &'a str,
    seed: u64,
    shots: u64,
    value: f64,
    stderr: f64,
    exact_value: f64,
    bound: f64,
    bound_provenance: &'a str,
    violated: bool,
}

fn cmd_sample(
    path: &Path,
    shots: Option<u64>,
    seed: Option<u64>,
    format: Format,
) -> std::result::Result<(), CliError> {
    let (scenario, hash) = load_scenario(path)?;
    let resolved = resolve(&scenario).map_err(CliError::Scenario)?;
    let plan = shot_plan(&scenario, shots, seed).map_err(CliError::Scenario)?;
    let measurement = resolved.measurement_plan().map_err(CliError::Scenario)?;

    let table = measurement.correlation_table().map_err(|e| anyhow!(e))?;
    let exact = measurement.criterion.evaluate(&table).map_err(|e| anyhow!(e))?;
    let emp = sample(&table, &plan).map_err(|e| anyhow!(e))?;
    let estimate = estimate_criterion(&emp, &measurement.criterion).map_err(|e| anyhow!(e))?;

    let out = SampleOutput {
        toolkit_version: env!("CARGO_PKG_VERSION"),
        scenario_hash: hash,
        criterion: measurement.criterion.name(),
        seed: plan.seed,
        shots: plan.shots,
        value: estimate.value,
        stderr: estimate.stderr,
        exact_value: exact,
        bound: measurement.criterion.bound(),
        bound_provenance: "analytic",
        violated: estimate.value > measurement.criterion.bound() + VIOLATION_TOL,
    };
    match format {
        Format::Json => {
            println!("{}", serde_json::to_string_pretty(&out).map_err(|e| anyhow!(e))?);
        }
        Format::Text => {
            println!("criterion:   {}", out.criterion);
            println!("shots/seed:  {} / {}", out.shots, out.seed);
            println!("value:       {} +/- {}", fmt_sig(out.value), fmt_sig(out.stderr));
            println!("exact value: {}", fmt_sig(out.exact_value));
            println!("bound:       {}", fmt_sig(out.bound));
            println!("violated:    {}", out.violated);
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// presets
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PresetEntry {
    name: &'static str,
    expected_ratio: &'static str,
    description: &'static str,
}

fn preset_entries() -> Vec<PresetEntry> {
    PresetName::ALL
        .iter()
        .map(|&name| {
            let p = preset(name, 2).expect("n = 2 valid for every preset");
            PresetEntry {
                name: name.as_str(),
                expected_ratio: match name {
                    PresetName::NonlinearMaxent => "sqrt(2), independent of n",
                    PresetName::LsiIsotropic => "3*eta^2 (3 at eta = 1)",
                    PresetName::BellGhz => "2",
                    PresetName::BellStar => "sqrt(2)^n",
                },
                description: p.description(),
            }
        })
        .collect()
}

fn cmd_presets(format: Format) -> Result<()> {
    let entries = preset_entries();
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&entries)?),
        Format::Text => {
            println!("available presets:");
            for e in entries {
                println!(
                    "  {:<18} expected ratio {:<28} {}",
                    e.name, e.expected_ratio, e.description
                );
            }
        }
    }
    Ok(())
}
