//! platefuse CLI: fuse detection streams into plate readouts, generate
//! synthetic scenarios, benchmark methods, and cross-check the assignment
//! solver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/processing error.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use platefuse_core::ctm::run_plate;
use platefuse_core::layout::Alphabet;
use platefuse_pipeline::config::{EpsilonMode, Settings};
use platefuse_pipeline::evaluate::{evaluate, Method};
use platefuse_pipeline::oracle::run_oracle;
use platefuse_pipeline::simulate::{scenario_for_plate, simulate, ScenarioConfig};
use platefuse_pipeline::stream::{
    frame_to_record, read_stream, PlateStream, ReadoutChar, ReadoutRecord,
};
use platefuse_pipeline::vehicle::dominant_vehicle_id;
use serde::Serialize;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "platefuse",
    version,
    about = "Fuses per-frame license plate character detections into robust plate readouts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a JSONL detection stream and emit one readout per plate
    Run(RunArgs),
    /// Generate a synthetic detection stream plus ground truth
    Simulate(SimulateArgs),
    /// Compare single-frame vs fusion methods on synthetic scenarios
    Bench(BenchArgs),
    /// Cross-check the assignment solver against brute-force enumeration
    Oracle(OracleArgs),
}

#[derive(Args)]
struct CommonSettings {
    /// Config file (key = value); flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gate value: pixels in absolute mode, width factor in relative mode
    #[arg(long)]
    epsilon: Option<f64>,
    /// How the gate is derived
    #[arg(long, value_parser = parse_epsilon_mode)]
    epsilon_mode: Option<EpsilonMode>,
    /// Minimum matched detections for a track to survive finalize
    #[arg(long)]
    min_hits: Option<usize>,
    /// Layout pattern, e.g. AAANNNN ('|' separates rows)
    #[arg(long)]
    layout: Option<String>,
    /// Apply rotation correction to incoming coordinates
    #[arg(long)]
    enable_rotation: Option<bool>,
    /// Tilt-noise coupling strength for simulation
    #[arg(long)]
    gamma_tilt_noise: Option<f64>,
    /// Base RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Abort on the first malformed stream line
    #[arg(long)]
    strict: Option<bool>,
}

fn parse_epsilon_mode(s: &str) -> Result<EpsilonMode, String> {
    match s {
        "absolute" => Ok(EpsilonMode::Absolute),
        "relative" => Ok(EpsilonMode::Relative),
        _ => Err("expected `absolute` or `relative`".to_string()),
    }
}

impl CommonSettings {
    fn resolve(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(path) => Settings::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => Settings::default(),
        };
        let flags = Settings {
            epsilon: self.epsilon,
            epsilon_mode: self.epsilon_mode,
            min_hits: self.min_hits,
            layout: self.layout.clone(),
            enable_rotation: self.enable_rotation,
            gamma_tilt_noise: self.gamma_tilt_noise,
            seed: self.seed,
            strict: self.strict,
        };
        Ok(file.merged_with(&flags))
    }
}

#[derive(Args)]
struct RunArgs {
    /// Input stream path, or `-` for stdin
    #[arg(long)]
    input: PathBuf,
    /// Output readouts path, or `-` for stdout
    #[arg(long, default_value = "-")]
    output: PathBuf,
    /// Plates processed in parallel; output is identical for any count
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[command(flatten)]
    settings: CommonSettings,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, default_value_t = 1)]
    plates: usize,
    #[arg(long, default_value_t = 30)]
    frames: usize,
    #[arg(long, default_value_t = 0.0)]
    tilt_deg: f64,
    #[arg(long, default_value_t = 1.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0.10)]
    miss_prob: f64,
    #[arg(long, default_value_t = 0.15)]
    confusion_prob: f64,
    /// Tilt-gated persistent misread probability per character
    #[arg(long, default_value_t = 0.02)]
    sys_confusion_prob: f64,
    #[arg(long, default_value_t = 0.0)]
    velocity: f64,
}

impl ScenarioArgs {
    fn base_config(&self, settings: &Settings) -> Result<ScenarioConfig> {
        Ok(ScenarioConfig {
            layout: settings.layout_spec()?,
            n_frames: self.frames,
            tilt_deg: self.tilt_deg,
            jitter_sigma: self.jitter,
            miss_prob: self.miss_prob,
            confusion_prob: self.confusion_prob,
            sys_confusion_prob: self.sys_confusion_prob,
            gamma: settings.gamma(),
            velocity: self.velocity,
            seed: settings.seed(),
            ..ScenarioConfig::default()
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Fixed ground-truth text (single plate only); random per layout otherwise
    #[arg(long)]
    plate_text: Option<String>,
    /// Which detector view to emit: `raw` (full tilt noise every frame) or
    /// `rotated` (tilt noise only in frame 0)
    #[arg(long, default_value = "raw", value_parser = ["raw", "rotated"])]
    view: String,
    /// Output stream path, or `-` for stdout
    #[arg(long, default_value = "-")]
    output: PathBuf,
    /// Ground-truth JSONL path
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    settings: CommonSettings,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated subset of single_frame, ctm, ar_ctm
    #[arg(long, default_value = "single_frame,ctm,ar_ctm")]
    methods: String,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Report JSON path, or `-` for stdout
    #[arg(long, default_value = "-")]
    output: PathBuf,
    #[command(flatten)]
    settings: CommonSettings,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    #[arg(long, default_value_t = 7)]
    max_dim: usize,
    /// Fraction of gated-out cells
    #[arg(long, default_value_t = 0.2)]
    infeasible: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn open_output(path: &PathBuf) -> Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout())))
    } else {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Box::new(BufWriter::new(file)))
    }
}

fn open_input(path: &PathBuf) -> Result<Box<dyn BufRead>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

fn readout_record(plate: &PlateStream, settings: &Settings) -> Result<ReadoutRecord> {
    let config = settings.ctm_config()?;
    let readout = run_plate(&plate.frames, &config)
        .with_context(|| format!("processing plate {:?}", plate.plate_id))?;
    let chars = readout
        .per_char
        .iter()
        .zip(readout.text.chars())
        .map(|(c, resolved)| ReadoutChar {
            class: resolved.to_string(),
            score: c.score,
            cx: c.mean_position.x,
            cy: c.mean_position.y,
        })
        .collect();
    Ok(ReadoutRecord {
        plate_id: plate.plate_id.clone(),
        text: readout.text,
        vehicle_id: dominant_vehicle_id(&plate.frames, &plate.vehicles),
        chars,
        alpha_final_deg: readout.alpha_final.to_degrees(),
    })
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let settings = args.settings.resolve()?;
    let alphabet = Alphabet::merged_latin();
    let outcome = read_stream(open_input(&args.input)?, &alphabet, settings.strict())?;
    for issue in &outcome.issues {
        eprintln!("warning: skipped line {}: {}", issue.line, issue.message);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers)
        .build()
        .context("building worker pool")?;
    let records: Vec<ReadoutRecord> = pool.install(|| {
        use rayon::prelude::*;
        outcome
            .plates
            .par_iter()
            .map(|plate| readout_record(plate, &settings))
            .collect::<Result<_>>()
    })?;
    let mut out = open_output(&args.output)?;
    for record in &records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TruthRecord<'a> {
    plate_id: &'a str,
    text: &'a str,
    tilt_deg: f64,
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let settings = args.settings.resolve()?;
    let base = args.scenario.base_config(&settings)?;
    let alphabet = Alphabet::merged_latin();
    let mut out = open_output(&args.output)?;
    let mut truth_out = match &args.truth {
        Some(path) => Some(open_output(path)?),
        None => None,
    };
    for idx in 0..args.scenario.plates {
        let scenario = match &args.plate_text {
            Some(text) => {
                if args.scenario.plates != 1 {
                    bail!("--plate-text requires --plates 1");
                }
                ScenarioConfig {
                    plate_text: text.clone(),
                    ..base.clone()
                }
            }
            None => scenario_for_plate(&base, idx),
        };
        let plate = simulate(&scenario)?;
        let frames = if args.view == "rotated" {
            &plate.rotated_frames
        } else {
            &plate.frames
        };
        for (frame, vehicles) in frames.iter().zip(&plate.vehicles) {
            let record = frame_to_record(frame, vehicles, &alphabet);
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        if let Some(t) = truth_out.as_mut() {
            let record = TruthRecord {
                plate_id: &plate.plate_id,
                text: &plate.truth,
                tilt_deg: plate.tilt_deg,
            };
            serde_json::to_writer(&mut *t, &record)?;
            t.write_all(b"\n")?;
        }
    }
    out.flush()?;
    if let Some(mut t) = truth_out {
        t.flush()?;
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let settings = args.settings.resolve()?;
    let base = args.scenario.base_config(&settings)?;
    let methods: Vec<Method> = args
        .methods
        .split(',')
        .map(|m| m.parse())
        .collect::<Result<_, _>>()?;
    let evaluation = evaluate(&base, args.scenario.plates, &methods, args.workers)?;
    let report = &evaluation.report;
    for (name, entry) in [
        ("single_frame_best", &report.single_frame_best),
        ("single_frame_majority", &report.single_frame_majority),
        ("ctm", &report.ctm),
        ("ar_ctm", &report.ar_ctm),
    ] {
        if let Some(r) = entry {
            eprintln!(
                "{name:>22}: plate_accuracy={:.4} char_accuracy={:.4} ({} plates, {:.0} ms)",
                r.plate_accuracy, r.char_accuracy, r.plates, r.runtime_ms
            );
        }
    }
    let mut out = open_output(&args.output)?;
    serde_json::to_writer_pretty(&mut out, report)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn cmd_oracle(args: &OracleArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.infeasible) {
        bail!("--infeasible must be in [0, 1]");
    }
    let outcome = run_oracle(args.cases, args.max_dim, args.infeasible, args.seed);
    println!(
        "oracle: {} cases up to {}x{}, {} mismatches, {:.2?}",
        outcome.cases,
        args.max_dim,
        args.max_dim,
        outcome.mismatches.len(),
        outcome.elapsed
    );
    for m in outcome.mismatches.iter().take(5) {
        println!(
            "  case {} ({}x{}): solver cost {} card {} vs oracle cost {} card {}",
            m.case,
            m.rows,
            m.cols,
            m.solver_cost,
            m.solver_cardinality,
            m.oracle_cost,
            m.oracle_cardinality
        );
    }
    if !outcome.passed() {
        bail!("{} oracle mismatches", outcome.mismatches.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Oracle(args) => cmd_oracle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
