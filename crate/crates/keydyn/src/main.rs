use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use keydyn::artifacts;
use keydyn::export::{export_images, ExportOptions};
use keydyn::service::{router, AppState, ServiceConfig, DEFAULT_MIN_SAMPLES};
use keydyn::training::{surrogate_imposters, train_user, ImposterSource, TrainParams};
use keydyn_core::encoding::EncoderKind;
use keydyn_core::eval::{run_experiment, ExperimentConfig};
use keydyn_core::features::{extract_features, FeatureLayout};
use keydyn_core::pipeline::DetectorKind;
use keydyn_core::preprocess::ScalingKind;
use keydyn_core::sample::{read_jsonl, write_jsonl, KeystrokeSample, Label, DEFAULT_PIN_LENGTH};
use keydyn_core::synth::{generate_cohort, SynthConfig};

#[derive(Parser)]
#[command(name = "keydyn", version, about = "Keystroke-dynamics image encoding and one-class authentication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort as JSONL.
    Synth(SynthArgs),
    /// Render buffered samples as images and tensor files.
    Encode(EncodeArgs),
    /// Train and calibrate one user's model from a JSONL file.
    Train(TrainArgs),
    /// Run an experiment config and write CSV and JSON reports.
    Eval(EvalArgs),
    /// Start the HTTP API.
    Serve(ServeArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// TOML file with generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    sessions: Option<usize>,
    #[arg(long)]
    per_session: Option<usize>,
    #[arg(long)]
    imposters_per_user: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    outlier_rate: Option<f64>,
    #[arg(long)]
    pin_length: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, default_value = "ours")]
    method: EncoderKind,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "standardize")]
    preprocess: ScalingKind,
    #[arg(long, default_value_t = 5)]
    buffer: usize,
    #[arg(long, default_value_t = DEFAULT_PIN_LENGTH)]
    pin_length: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    user: String,
    /// Directory for the model artifacts.
    #[arg(long)]
    out: PathBuf,
    /// JSON file with training parameters; flags override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<EncoderKind>,
    #[arg(long)]
    detector: Option<DetectorKind>,
    #[arg(long)]
    preprocess: Option<ScalingKind>,
    #[arg(long)]
    buffer: Option<usize>,
    #[arg(long)]
    augment: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_PIN_LENGTH)]
    pin_length: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for summary.csv, per_user.csv and report.json.
    #[arg(long, default_value = "keydyn-report")]
    out: PathBuf,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Store root; defaults to $KEYDYN_DATA_DIR, then ./keydyn-data.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Directory of static files served at the root, such as the keypad UI.
    #[arg(long)]
    ui: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_SAMPLES)]
    min_samples: usize,
    #[arg(long, default_value_t = DEFAULT_PIN_LENGTH)]
    pin_length: usize,
    /// Epochs for training requests that do not set their own.
    #[arg(long)]
    epochs: Option<usize>,
}

type CliResult = Result<(), String>;

fn read_samples(path: &Path, pin_length: usize) -> Result<Vec<KeystrokeSample>, String> {
    let file = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    read_jsonl(BufReader::new(file), pin_length).map_err(|e| format!("{}: {e}", path.display()))
}

fn synth(args: SynthArgs) -> CliResult {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => SynthConfig::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { cfg.$f = v; })* };
    }
    set!(users, sessions, per_session, imposters_per_user, separation, outlier_rate, pin_length, seed);
    let cohort = generate_cohort(&cfg).map_err(|e| e.to_string())?;
    let samples = cohort.samples();
    let file = File::create(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    let mut w = BufWriter::new(file);
    write_jsonl(&mut w, &samples).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())?;
    println!(
        "{}",
        json!({ "out": args.out, "users": cfg.users, "samples": samples.len() })
    );
    Ok(())
}

fn encode(args: EncodeArgs) -> CliResult {
    let samples = read_samples(&args.input, args.pin_length)?;
    let layout = FeatureLayout::new(args.pin_length).map_err(|e| e.to_string())?;
    let opts = ExportOptions {
        encoder: args.method,
        scaling: args.preprocess,
        buffer: args.buffer,
    };
    let users = export_images(&samples, layout, opts, &args.out)?;
    println!("{}", json!({ "out": args.out, "method": args.method.name(), "users": users }));
    Ok(())
}

fn train(args: TrainArgs) -> CliResult {
    let mut params = match &args.params {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => TrainParams::default(),
    };
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { params.$f = v; })* };
    }
    set!(encoder, detector, preprocess, buffer, augment, epochs, seed);

    let samples = read_samples(&args.input, args.pin_length)?;
    let layout = FeatureLayout::new(args.pin_length).map_err(|e| e.to_string())?;
    let vector = |s: &KeystrokeSample| extract_features(s).map(|v| v.values).map_err(|e| e.to_string());
    let mut genuine = Vec::new();
    let mut labeled_imposters = Vec::new();
    let mut others = Vec::new();
    for s in &samples {
        match (s.user_id == args.user, s.label) {
            (true, Label::Imposter) => labeled_imposters.push(vector(s)?),
            (true, _) => genuine.push(vector(s)?),
            (false, Label::Imposter) => {}
            (false, _) => others.push(vector(s)?),
        }
    }
    if genuine.is_empty() {
        return Err(format!("no genuine samples for user {:?}", args.user));
    }
    let (imposters, source) = if !labeled_imposters.is_empty() {
        (labeled_imposters, ImposterSource::Enrolled)
    } else if !others.is_empty() {
        (others, ImposterSource::Enrolled)
    } else {
        (
            surrogate_imposters(args.pin_length, genuine.len(), params.seed)?,
            ImposterSource::Synthetic,
        )
    };
    let trained = train_user(layout, &genuine, imposters, source, &params)?;
    artifacts::save(&args.out, &trained.pipeline, 1).map_err(|e| e.to_string())?;
    let window = serde_json::to_vec(&trained.window).map_err(|e| e.to_string())?;
    artifacts::write_atomic(&args.out.join("window.json"), &window).map_err(|e| e.to_string())?;
    println!(
        "{}",
        serde_json::to_string(&json!({ "user": args.user, "out": args.out, "summary": trained.summary }))
            .map_err(|e| e.to_string())?
    );
    Ok(())
}

fn eval(args: EvalArgs) -> CliResult {
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let report = run_experiment(&cfg).map_err(|e| e.to_string())?;
    fs::create_dir_all(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    let summary = report.summary_csv();
    for (name, body) in [
        ("summary.csv", summary.as_str()),
        ("per_user.csv", report.per_user_csv().as_str()),
        ("report.json", report.to_json().as_str()),
    ] {
        let path = args.out.join(name);
        artifacts::write_atomic(&path, body.as_bytes()).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    print!("{summary}");
    Ok(())
}

fn serve(args: ServeArgs) -> CliResult {
    let data_dir = args
        .data_dir
        .or_else(|| std::env::var_os("KEYDYN_DATA_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("keydyn-data"));
    let mut config = ServiceConfig::new(data_dir);
    config.min_samples = args.min_samples;
    config.pin_length = args.pin_length;
    config.ui_dir = args.ui;
    if let Some(e) = args.epochs {
        config.train_defaults.epochs = e;
    }
    let state = AppState::new(config).map_err(|e| e.to_string())?;
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| format!("bad address: {e}"))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| format!("{addr}: {e}"))?;
        let bound = listener.local_addr().map_err(|e| e.to_string())?;
        println!("listening on {bound}");
        std::io::stdout().flush().ok();
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                tokio::signal::ctrl_c().await.ok();
            })
            .await
            .map_err(|e| e.to_string())
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (verb, result) = match cli.command {
        Command::Synth(a) => ("synth", synth(a)),
        Command::Encode(a) => ("encode", encode(a)),
        Command::Train(a) => ("train", train(a)),
        Command::Eval(a) => ("eval", eval(a)),
        Command::Serve(a) => ("serve", serve(a)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e, "command": verb }));
            ExitCode::from(1)
        }
    }
}
