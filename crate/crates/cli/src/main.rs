//! `starkecho` command-line tool.
//!
//! Exit codes: 0 success, 1 `reproduce` finished with failing criteria,
//! 2 schema or input error, 3 numerical failure, 4 I/O error. Errors are also
//! printed to stderr as one JSON object.

mod output;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use starkecho::analysis::{fit_decay, fit_stark_modulation, qubit_fidelity, CurvePoint, DecayCurve, DecayModel, QubitInput, SweptVariable};
use starkecho::analytic;
use starkecho::ensemble;
use starkecho::pathways::enumerate_pathways;
use starkecho::reproduce;
use starkecho::scenario::{self, Scenario};
use starkecho::Direction;

use output::{short_hash, unix_seconds, Sink};

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Schema(_) => "schema",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Schema(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<starkecho::Error> for CliError {
    fn from(e: starkecho::Error) -> Self {
        if e.is_input_error() {
            CliError::Schema(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(name = "starkecho", version, about = "Stark-echo spin-wave memory simulator and analysis tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario JSON file, or `bundled:<forward|backward|qubit>`.
    #[arg(long, global = true)]
    scenario: Option<String>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the scenario's simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the ensemble oracle and write the emission record.
    Simulate {
        /// Relative threshold for the peak summary.
        #[arg(long, default_value_t = 0.01)]
        peak_threshold: f64,
    },
    /// Enumerate emission pathways of the scenario's sequence.
    Pathways,
    /// Efficiency breakdown and optical-depth sweep.
    Efficiency,
    /// Optimal cavity input reflectivity over optical depth.
    CavityOpt,
    /// Fit a decay or Stark-modulation curve from CSV (x, y[, sigma]).
    Fit {
        #[arg(long)]
        input: PathBuf,
        /// eq5-ground, eq5-excited, 2pe or stark.
        #[arg(long)]
        model: String,
    },
    /// Qubit fidelities from a JSON file of counts and visibilities.
    Fidelity {
        #[arg(long)]
        input: PathBuf,
        /// Monte-Carlo samples for the F_T uncertainty (0 disables).
        #[arg(long, default_value_t = 0)]
        mc_samples: usize,
    },
    /// Run the reference checks and write a report.
    Reproduce {
        /// Criterion numbers to run; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn load_scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let spec = cli
        .scenario
        .as_deref()
        .ok_or_else(|| CliError::Schema("this command needs --scenario".into()))?;
    let text = match spec.strip_prefix("bundled:") {
        Some(name) => scenario::bundled_json(name)
            .ok_or_else(|| CliError::Schema(format!("no bundled scenario '{name}'")))?
            .to_string(),
        None => read_text(Path::new(spec))?,
    };
    let mut s = Scenario::from_json(&text)?;
    if let Some(seed) = cli.seed {
        s.simulation.seed = seed;
    }
    Ok(s)
}

/// Hash of the effective scenario, after overrides.
fn scenario_hash(s: &Scenario) -> String {
    short_hash(s.to_json().as_bytes())
}

#[derive(Serialize)]
struct RecordRow {
    time_us: f64,
    fwd_re: f64,
    fwd_im: f64,
    bwd_re: f64,
    bwd_im: f64,
}

#[derive(Serialize)]
struct PathwayRow<'a> {
    label: &'a str,
    kind: String,
    emission_time_us: f64,
    direction: i32,
    relative_phase_rad: f64,
    silencing_factor: f64,
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    detection_transition: &'a str,
    n_ions: usize,
    seed: u64,
    window_us: (f64, f64),
    forward_intensity: f64,
    backward_intensity: f64,
    peaks: Vec<ensemble::Peak>,
}

#[derive(Serialize)]
struct EfficiencyReport {
    breakdown: analytic::EfficiencyBreakdown,
    table: Vec<analytic::EfficiencyRow>,
}

fn simulate(cli: &Cli, sink: &mut Sink, s: &Scenario, peak_threshold: f64) -> Result<(), CliError> {
    let seq = s.sequence()?;
    let rec = ensemble::simulate(&seq, &s.scheme, &s.material, &s.simulation)?;
    let window = seq.sequence().detection_window_us;
    let (lo, hi) = (rec.times_us[0], *rec.times_us.last().expect("non-empty grid"));
    let w = (window.0.max(lo), window.1.min(hi));
    let summary = SimulationSummary {
        detection_transition: &rec.detection_transition,
        n_ions: rec.meta.n_ions,
        seed: rec.meta.seed,
        window_us: w,
        forward_intensity: ensemble::echo_intensity(&rec, w, Direction::Forward)?,
        backward_intensity: ensemble::echo_intensity(&rec, w, Direction::Backward)?,
        peaks: ensemble::find_peaks(&rec, peak_threshold),
    };
    match cli.format {
        Format::Csv => {
            let rows: Vec<RecordRow> = rec
                .times_us
                .iter()
                .zip(rec.forward_amplitude().iter().zip(rec.backward_amplitude()))
                .map(|(&t, (f, b))| RecordRow {
                    time_us: t,
                    fwd_re: f.re,
                    fwd_im: f.im,
                    bwd_re: b.re,
                    bwd_im: b.im,
                })
                .collect();
            sink.write_csv(".csv", &rows)?;
        }
        Format::Json => {
            sink.write_json(".json", &rec)?;
        }
    }
    sink.write_json(".peaks.json", &summary)?;
    Ok(())
}

fn pathways(cli: &Cli, sink: &mut Sink, s: &Scenario) -> Result<(), CliError> {
    let seq = s.sequence()?;
    let ps = enumerate_pathways(&seq, &s.scheme, &s.material);
    match cli.format {
        Format::Csv => {
            let rows: Vec<PathwayRow> = ps
                .iter()
                .map(|p| PathwayRow {
                    label: &p.label,
                    kind: p.kind.to_string(),
                    emission_time_us: p.emission_time_us,
                    direction: p.direction_sum,
                    relative_phase_rad: p.stark_relative_phase_rad,
                    silencing_factor: p.silencing_factor,
                })
                .collect();
            sink.write_csv(".csv", &rows)?;
        }
        Format::Json => {
            sink.write_json(".json", &ps)?;
        }
    }
    Ok(())
}

fn efficiency(cli: &Cli, sink: &mut Sink, s: &Scenario) -> Result<(), CliError> {
    let req = s
        .analysis
        .efficiency
        .as_ref()
        .ok_or_else(|| CliError::Schema("scenario has no analysis.efficiency request".into()))?;
    let inputs = s.efficiency_inputs(req)?;
    let depths = if req.depths.is_empty() {
        vec![inputs.optical_depth]
    } else {
        req.depths.clone()
    };
    let report = EfficiencyReport {
        breakdown: analytic::total_efficiency(&inputs, req.direction)?,
        table: analytic::efficiency_table(&depths, &inputs, req.direction)?,
    };
    match cli.format {
        Format::Csv => {
            sink.write_csv(".csv", &report.table)?;
            sink.write_json(".json", &report.breakdown)?;
        }
        Format::Json => {
            sink.write_json(".json", &report)?;
        }
    }
    Ok(())
}

fn cavity(cli: &Cli, sink: &mut Sink, s: &Scenario) -> Result<(), CliError> {
    let req = s
        .analysis
        .cavity
        .as_ref()
        .ok_or_else(|| CliError::Schema("scenario has no analysis.cavity request".into()))?;
    let rows = analytic::cavity_table(&req.depths, req.r2)?;
    match cli.format {
        Format::Csv => sink.write_csv(".csv", &rows)?,
        Format::Json => sink.write_json(".json", &rows)?,
    };
    Ok(())
}

fn read_curve(path: &Path, swept: SweptVariable) -> Result<DecayCurve, CliError> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (i, rec) in rdr.deserialize::<CurvePoint>().enumerate() {
        points.push(rec.map_err(|e| CliError::Schema(format!("{}: row {}: {e}", path.display(), i + 1)))?);
    }
    Ok(DecayCurve { swept, points })
}

fn fit(sink: &mut Sink, input: &Path, model: &str) -> Result<(), CliError> {
    let result = if model == "stark" {
        fit_stark_modulation(&read_curve(input, SweptVariable::StarkArea)?)?
    } else {
        let m: DecayModel = model.parse()?;
        let swept = match m {
            DecayModel::Ground => SweptVariable::T5MinusT2,
            DecayModel::Excited => SweptVariable::T6MinusT3,
            DecayModel::TwoPulse => SweptVariable::TwoPulseTau,
        };
        fit_decay(&read_curve(input, swept)?, m)?
    };
    sink.write_json(".json", &result)?;
    Ok(())
}

fn fidelity(sink: &mut Sink, input: &Path, mc_samples: usize) -> Result<(), CliError> {
    let text = read_text(input)?;
    let q: QubitInput =
        serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", input.display())))?;
    let mc = (mc_samples > 0).then_some((mc_samples, 1));
    sink.write_json(".json", &qubit_fidelity(&q, mc)?)?;
    Ok(())
}

fn reproduce_cmd(sink: &mut Sink, only: &[u8]) -> Result<bool, CliError> {
    if let Some(bad) = only.iter().find(|&&i| i == 0 || i as usize > reproduce::CRITERIA.len()) {
        return Err(CliError::Schema(format!("no criterion {bad}")));
    }
    let report = reproduce::run(only)?;
    for c in &report.criteria {
        println!("{c}");
    }
    for n in &report.notes {
        println!("note {} = {:.6} ({})", n.key, n.value, n.comment);
    }
    // elapsed times vary run to run; keep them out of the hashed artifact
    let mut stable = report.clone();
    let timing: Vec<(u8, f64)> = stable.criteria.iter().map(|c| (c.id, c.elapsed_ms)).collect();
    for c in &mut stable.criteria {
        c.elapsed_ms = 0.0;
    }
    sink.write_json(".json", &stable)?;
    sink.write_json(".timing.meta.json", &timing)?;
    Ok(report.all_passed())
}

fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Schema(format!("--threads: {e}")))?;
    }
    let started = unix_seconds();
    let (name, hash) = match &cli.command {
        Command::Fit { input, model } => ("fit", short_hash(format!("{model}\n{}", read_text(input)?).as_bytes())),
        Command::Fidelity { input, mc_samples } => (
            "fidelity",
            short_hash(format!("{mc_samples}\n{}", read_text(input)?).as_bytes()),
        ),
        Command::Reproduce { only } => {
            let mut key = format!("{only:?}");
            for n in scenario::BUNDLED {
                key.push_str(scenario::bundled_json(n).unwrap_or_default());
            }
            ("reproduce", short_hash(key.as_bytes()))
        }
        other => {
            let s = load_scenario(cli)?;
            let name = match other {
                Command::Simulate { .. } => "simulate",
                Command::Pathways => "pathways",
                Command::Efficiency => "efficiency",
                _ => "cavity-opt",
            };
            (name, scenario_hash(&s))
        }
    };
    let mut sink = Sink::new(&cli.out, name, &hash)?;
    let mut code = ExitCode::SUCCESS;
    match &cli.command {
        Command::Simulate { peak_threshold } => simulate(cli, &mut sink, &load_scenario(cli)?, *peak_threshold)?,
        Command::Pathways => pathways(cli, &mut sink, &load_scenario(cli)?)?,
        Command::Efficiency => efficiency(cli, &mut sink, &load_scenario(cli)?)?,
        Command::CavityOpt => cavity(cli, &mut sink, &load_scenario(cli)?)?,
        Command::Fit { input, model } => fit(&mut sink, input, model)?,
        Command::Fidelity { input, mc_samples } => fidelity(&mut sink, input, *mc_samples)?,
        Command::Reproduce { only } => {
            if !reproduce_cmd(&mut sink, only)? {
                code = ExitCode::from(1);
            }
        }
    }
    for p in sink.finish(name, &hash, cli.threads, started)? {
        println!("wrote {}", p.display());
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            let j = serde_json::json!({ "error": e.kind(), "message": e.message(), "exit_code": e.code() });
            eprintln!("{j}");
            ExitCode::from(e.code())
        }
    }
}
