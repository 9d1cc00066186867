use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use embml::config::{parse_config_unvalidated, Command, CubeFormat, ExperimentSpec};
use embml::cube::{ingest_cube, synthetic_cube, write_cube};
use embml::curve_csv::{write_convergence, write_curve, write_thresholds};
use embml::window::sliding_window_run;
use embml::{DetectorKind, Error, Harness, Result};

/// Adaptive radar detection experiments.
#[derive(Parser, Debug)]
#[command(name = "embml", version)]
struct Cli {
    /// TOML experiment spec; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file; stdout if absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Null-ensemble thresholds per detector.
    Calibrate(Overrides),
    /// Empirical Pfa over CNR and ρ at fixed thresholds.
    PfaSweep(Overrides),
    /// Pd versus SCNR for matched targets.
    PdCurve(Overrides),
    /// Pd over (cos²φ, SCNR) for mismatched targets.
    MismatchContour(Overrides),
    /// Mean EM convergence metric per iteration.
    Convergence(Overrides),
    /// Sliding-window run over a recorded data cube.
    IngestRun(IngestArgs),
    /// Writes a synthetic homogeneous data cube.
    GenerateCube(CubeArgs),
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// Design false-alarm probability.
    #[arg(long)]
    pfa: Option<f64>,
    /// Detection (or convergence) trials per grid point.
    #[arg(long)]
    trials: Option<usize>,
    /// Null trials used to set thresholds.
    #[arg(long)]
    calibration_trials: Option<usize>,
    /// Comma list of glrt, amf, rao, ace, benchmark, em-bml-d.
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<DetectorKind>>,
    /// EM iteration counts, one detector variant each.
    #[arg(long, value_delimiter = ',')]
    l_max: Option<Vec<u32>>,
    /// SCNR values in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    scnr_grid: Option<Vec<f64>>,
    /// CNR values in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    cnr_grid: Option<Vec<f64>>,
    /// One-lag clutter correlations.
    #[arg(long, value_delimiter = ',')]
    rho_grid: Option<Vec<f64>>,
    /// Mismatch levels cos²φ in [0, 1].
    #[arg(long, value_delimiter = ',')]
    cos_grid: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Cube file; overrides `ingest.path`.
    #[arg(long)]
    cube: Option<PathBuf>,
    /// interleaved-binary or csv.
    #[arg(long, value_parser = parse_format)]
    format: Option<CubeFormat>,
    /// Pulses shared by adjacent windows.
    #[arg(long)]
    overlap: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct CubeArgs {
    /// Slow-time length.
    #[arg(long, default_value_t = 30_720)]
    pulses: usize,
    /// Range bins.
    #[arg(long, default_value_t = 76)]
    bins: usize,
    /// interleaved-binary or csv.
    #[arg(long, value_parser = parse_format, default_value = "interleaved-binary")]
    format: CubeFormat,
}

fn parse_format(s: &str) -> std::result::Result<CubeFormat, String> {
    match s {
        "interleaved-binary" | "binary" => Ok(CubeFormat::InterleavedBinary),
        "csv" => Ok(CubeFormat::Csv),
        _ => Err(format!(
            "unknown cube format `{s}` (interleaved-binary, csv)"
        )),
    }
}

impl Overrides {
    fn apply(self, spec: &mut ExperimentSpec) {
        if let Some(x) = self.pfa {
            spec.pfa = x;
        }
        if let Some(x) = self.trials {
            spec.trials.detection = x;
            spec.trials.convergence = x;
        }
        if let Some(x) = self.calibration_trials {
            spec.trials.calibration = Some(x);
        }
        if let Some(x) = self.detectors {
            spec.detectors = x;
        }
        if let Some(x) = self.l_max {
            spec.l_max = x;
        }
        if let Some(x) = self.scnr_grid {
            spec.grids.scnr_db = x;
        }
        if let Some(x) = self.cnr_grid {
            spec.grids.cnr_db = x;
        }
        if let Some(x) = self.rho_grid {
            spec.grids.rho = x;
        }
        if let Some(x) = self.cos_grid {
            spec.grids.cos_sq_phi = x;
        }
    }
}

fn load_spec(cli: &Cli) -> Result<ExperimentSpec> {
    let mut spec = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let mut spec = parse_config_unvalidated(&text)?;
            spec.output = spec.output.map(|o| relative_to(path, o));
            spec.ingest.path = spec.ingest.path.map(|p| relative_to(path, p));
            spec
        }
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.scenario.master_seed = seed;
    }
    if let Some(w) = cli.workers {
        spec.workers = w;
    }
    if let Some(out) = &cli.out {
        spec.output = Some(out.clone());
    }
    Ok(spec)
}

fn relative_to(config: &Path, p: PathBuf) -> PathBuf {
    match config.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p,
    }
}

fn sink(spec: &ExperimentSpec) -> Result<Box<dyn Write>> {
    Ok(match &spec.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut spec = load_spec(&cli)?;
    let (command, overrides) = match cli.command {
        Cmd::Calibrate(o) => (Command::Calibrate, o),
        Cmd::PfaSweep(o) => (Command::PfaSweep, o),
        Cmd::PdCurve(o) => (Command::PdCurve, o),
        Cmd::MismatchContour(o) => (Command::MismatchContour, o),
        Cmd::Convergence(o) => (Command::Convergence, o),
        Cmd::IngestRun(a) => {
            if let Some(p) = a.cube {
                spec.ingest.path = Some(p);
            }
            if let Some(f) = a.format {
                spec.ingest.format = f;
            }
            if let Some(o) = a.overlap {
                spec.ingest.overlap = o;
            }
            (Command::IngestRun, a.overrides)
        }
        Cmd::GenerateCube(a) => {
            spec.scenario.validate()?;
            let path = spec
                .output
                .clone()
                .ok_or_else(|| Error::validation("out", "generate-cube needs --out"))?;
            let cube = synthetic_cube(&spec.scenario, a.pulses, a.bins)?;
            return write_cube(&cube, &path, a.format);
        }
    };
    spec.command = command;
    overrides.apply(&mut spec);
    spec.validate()?;

    let harness = Harness::new(spec.workers)?;
    let cfg = &spec.scenario;
    let detectors = spec.detector_ids();
    match spec.command {
        Command::Calibrate => {
            let cal = harness.calibrate(cfg, &detectors, &[spec.pfa], spec.calibration_trials())?;
            write_thresholds(&cal.table, sink(&spec)?)
        }
        Command::PfaSweep => {
            let cal = harness.calibrate(cfg, &detectors, &[spec.pfa], spec.calibration_trials())?;
            let g = &spec.grids;
            let curve =
                harness.cfar_sweep(&cal, spec.pfa, &g.cnr_db, &g.rho, spec.trials.detection)?;
            write_curve(&curve, sink(&spec)?)
        }
        Command::PdCurve => {
            let cal = harness.calibrate(cfg, &detectors, &[spec.pfa], spec.calibration_trials())?;
            let curve =
                harness.pd_curve(&cal, spec.pfa, &spec.grids.scnr_db, spec.trials.detection)?;
            write_curve(&curve, sink(&spec)?)
        }
        Command::MismatchContour => {
            let cal = harness.calibrate(cfg, &detectors, &[spec.pfa], spec.calibration_trials())?;
            let g = &spec.grids;
            let curve = harness.mismatch_contour(
                &cal,
                spec.pfa,
                &g.scnr_db,
                &g.cos_sq_phi,
                spec.trials.detection,
            )?;
            write_curve(&curve, sink(&spec)?)
        }
        Command::Convergence => {
            let c = &spec.convergence;
            let hypotheses =
                c.h0.then_some(None)
                    .into_iter()
                    .chain(c.scnr_db.iter().map(|&s| Some(s)));
            let results = hypotheses
                .map(|h| harness.convergence_study(cfg, h, spec.trials.convergence, c.iterations))
                .collect::<Result<Vec<_>>>()?;
            write_convergence(&results, sink(&spec)?)
        }
        Command::IngestRun => {
            let path = spec.ingest.path.clone().expect("validated");
            let cube = ingest_cube(&path, spec.ingest.format)?;
            let res = sliding_window_run(&cube, &spec, &harness)?;
            eprintln!("{}: {} windows", cube.label, res.trials);
            for (d, eta) in res.detectors.iter().zip(&res.thresholds) {
                eprintln!("  {d:<12} threshold {eta}");
            }
            write_curve(&res.curve, sink(&spec)?)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Format(_) => 3,
        Error::Parse { .. }
        | Error::Validation { .. }
        | Error::InsufficientTrials { .. }
        | Error::InsufficientData(_)
        | Error::InsufficientSecondaryData { .. }
        | Error::DimensionMismatch { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("embml: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
