use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eegconn::dsp::{design_bandpass, FilterSpec};
use eegconn::fixture::{generate_fixture, FixtureSpec};
use eegconn::pipeline::{run_pipeline, run_stage, DatasetKind, PipelineConfig, Stage};
use eegconn::Error;

#[derive(Parser)]
#[command(name = "eegconn", version, about = "Trial selection for EEG functional connectivity")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flags layered over the config file, one per config field.
#[derive(Args)]
struct Overrides {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Trial-set manifest.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Dataset kind used when no config file sets it.
    #[arg(long, global = true, value_enum)]
    kind: Option<Kind>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    k_folds: Option<usize>,
    /// Posterior threshold for keeping a trial.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Fraction of strongest edges kept when reporting a graph.
    #[arg(long, global = true)]
    top_fraction: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Errp,
    MotorImagery,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic trial set with a ground-truth sidecar.
    Fixture(FixtureArgs),
    /// Emit the magnitude response of a band-pass filter as CSV.
    FilterResponse(ResponseArgs),
    FitCsp,
    Cv,
    Train,
    Evaluate,
    Select,
    Graph,
    Report,
    /// Run every stage in order.
    Run,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long, default_value_t = 6)]
    channels: usize,
    #[arg(long, default_value_t = 100)]
    trials_per_class: usize,
    /// Signal-to-noise power ratio, or `none` for noise-free sources.
    #[arg(long, default_value = "4")]
    snr: String,
    #[arg(long, default_value_t = 0.25)]
    irrelevant: f64,
}

#[derive(Args)]
struct ResponseArgs {
    /// Filter family; without it the configured filters are used.
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long, default_value_t = 5)]
    order: usize,
    #[arg(long, requires = "family")]
    low: Option<f64>,
    #[arg(long, requires = "family")]
    high: Option<f64>,
    /// Sampling rate in Hz.
    #[arg(long, default_value_t = 100.0)]
    fs: f64,
    /// Number of frequency points from 0 to Nyquist.
    #[arg(long, default_value_t = 512)]
    points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Butterworth,
    Elliptic,
}

fn build_config(o: &Overrides) -> Result<PipelineConfig, Error> {
    let mut cfg = match &o.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::for_kind(match o.kind {
            Some(Kind::Errp) => DatasetKind::Errp,
            _ => DatasetKind::MotorImagery,
        }),
    };
    if let (Some(kind), Some(_)) = (o.kind, &o.config) {
        let kind = match kind {
            Kind::Errp => DatasetKind::Errp,
            Kind::MotorImagery => DatasetKind::MotorImagery,
        };
        if kind != cfg.dataset_kind {
            return Err(Error::Argument("--kind contradicts the config file".into()));
        }
    }
    if let Some(v) = &o.input {
        cfg.input = v.clone();
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if o.lambda.is_some() {
        cfg.lambda = o.lambda;
    }
    if let Some(v) = o.k_folds {
        cfg.k_folds = v;
    }
    if let Some(v) = o.threshold {
        cfg.posterior_threshold = v;
    }
    if let Some(v) = o.top_fraction {
        cfg.top_edge_fraction = v;
    }
    if let Some(v) = &o.out {
        cfg.output = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fixture(o: &Overrides, a: &FixtureArgs) -> Result<(), Error> {
    let snr = match a.snr.as_str() {
        "none" | "inf" => None,
        s => Some(s.parse().map_err(|_| Error::Argument(format!("invalid --snr {s:?}")))?),
    };
    let spec = FixtureSpec {
        n_channels: a.channels,
        trials_per_class: [a.trials_per_class; 2],
        snr,
        irrelevant_fraction: a.irrelevant,
        ..FixtureSpec::default()
    };
    let dir = o.out.clone().unwrap_or_else(|| PathBuf::from("fixture"));
    let manifest = generate_fixture(o.seed.unwrap_or(42), &spec, &dir)?;
    println!("{}", manifest.display());
    Ok(())
}

fn response_csv(spec: &FilterSpec, points: usize) -> Result<String, Error> {
    let sos = design_bandpass(spec)?;
    let mut csv = String::from("frequency_hz,magnitude_db\n");
    for (f, db) in sos.frequency_response(points) {
        writeln!(csv, "{f},{db}").expect("writing to a String");
    }
    Ok(csv)
}

fn filter_response(o: &Overrides, a: &ResponseArgs) -> Result<(), Error> {
    let specs = match a.family {
        Some(family) => {
            let (Some(low), Some(high)) = (a.low, a.high) else {
                return Err(Error::Argument("--family needs --low and --high".into()));
            };
            let spec = match family {
                Family::Butterworth => FilterSpec::butterworth(a.order, low, high, a.fs),
                Family::Elliptic => FilterSpec::elliptic(a.order, low, high, a.fs),
            };
            spec.validate()?;
            vec![spec]
        }
        None => build_config(o)?.filter_specs(a.fs)?,
    };
    let Some(dir) = &o.out else {
        if specs.len() > 1 {
            return Err(Error::Argument("several filters configured; pass --out".into()));
        }
        print!("{}", response_csv(&specs[0], a.points)?);
        return Ok(());
    };
    fs::create_dir_all(dir).map_err(|e| Error::Argument(format!("{}: {e}", dir.display())))?;
    for (i, spec) in specs.iter().enumerate() {
        let name = if specs.len() == 1 {
            "filter_response.csv".to_string()
        } else {
            format!("filter_response_band{i}.csv")
        };
        let path = dir.join(name);
        fs::write(&path, response_csv(spec, a.points)?)
            .map_err(|e| Error::Argument(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let stage = match &cli.command {
        Command::Fixture(a) => return fixture(&cli.opts, a),
        Command::FilterResponse(a) => return filter_response(&cli.opts, a),
        Command::Run => {
            let out = run_pipeline(&build_config(&cli.opts)?)?;
            println!("{}", out.display());
            return Ok(());
        }
        Command::FitCsp => Stage::FitCsp,
        Command::Cv => Stage::Cv,
        Command::Train => Stage::Train,
        Command::Evaluate => Stage::Evaluate,
        Command::Select => Stage::Select,
        Command::Graph => Stage::Graph,
        Command::Report => Stage::Report,
    };
    let cfg = build_config(&cli.opts)?;
    // The filter stage has no subcommand of its own; fit-csp records the
    // filter design it depends on.
    if stage == Stage::FitCsp {
        run_stage(&cfg, Stage::Filter)?;
    }
    run_stage(&cfg, stage)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
