use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use kecor::acquisition::LogitsMatrix;
use kecor::config::{Profile, RunConfig};
use kecor::io::{self, format_indices, format_significant};
use kecor::linalg::DenseMatrix;
use kecor::proxy::ProxyNetwork;
use kecor::sim::{run_loop, write_report_csv, LoopConfig, SyntheticTask};
use kecor::{api, Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

/// Batch active-learning selection by greedy kernel coding rate maximization.
#[derive(Parser)]
#[command(name = "kecor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `paths.output`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Select a batch from the unlabeled pool; writes one index per line.
    Select(ConfigArgs),
    /// Run the active-learning loop on a synthetic task; writes the report CSV.
    Simulate(ConfigArgs),
    /// Write the Gram matrix of the given samples as a tensor file.
    Kernel {
        #[command(flatten)]
        args: ConfigArgs,
        /// Comma-separated sample indices.
        #[arg(long, value_delimiter = ',', required = true)]
        indices: Vec<usize>,
    },
    /// Print the kernel coding rate of the given samples.
    CodingRate {
        #[command(flatten)]
        args: ConfigArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        indices: Vec<usize>,
    },
    /// Train the proxy network on the labeled samples and write a checkpoint.
    ProxyTrain(ConfigArgs),
    /// Print the fully resolved default configuration.
    Defaults {
        #[arg(long, value_enum)]
        profile: Option<ProfileArg>,
    },
    /// Convert a headless CSV (one sample per row) into a tensor file.
    Convert {
        #[arg(long)]
        from_csv: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ProfileArg {
    Kitti,
    Waymo,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Kitti => Profile::Kitti,
            ProfileArg::Waymo => Profile::Waymo,
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::ConfigInvalid(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

fn load_config(args: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(out) = &args.output {
        cfg.paths.output = Some(out.clone());
    }
    Ok(cfg)
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::ConfigInvalid(format!("paths.{key} is required for this command")))
}

/// Writes to the file when given, otherwise to stdout.
fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn labeled_indices(cfg: &RunConfig) -> Result<Vec<usize>> {
    cfg.paths
        .labeled_indices
        .as_deref()
        .map_or(Ok(Vec::new()), io::read_indices)
}

/// Proxy for gradient kernels: checkpoint, else trained on targets over
/// `train`, else freshly initialized.
fn resolve_proxy(
    cfg: &RunConfig,
    features: &DenseMatrix,
    train: &[usize],
) -> Result<Option<ProxyNetwork>> {
    if !cfg.kernel.kind.needs_proxy() {
        return Ok(None);
    }
    if let Some(path) = &cfg.paths.proxy {
        if path.exists() {
            info!("loading proxy checkpoint {}", path.display());
            return io::read_proxy(path).map(Some);
        }
    }
    if let Some(path) = &cfg.paths.targets {
        let targets = io::read_matrix(path)?;
        let train: Vec<usize> = if train.is_empty() {
            (0..features.cols()).collect()
        } else {
            train.to_vec()
        };
        info!("training proxy on {} samples", train.len());
        let (net, _) = api::train_proxy(cfg, features, &targets, &train)?;
        return Ok(Some(net));
    }
    warn!("no proxy checkpoint or targets configured; using the initialized proxy");
    api::untrained_proxy(cfg, features.rows()).map(Some)
}

fn cmd_select(args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let features = io::read_matrix(required(&cfg.paths.features, "features")?)?;
    let logits = cfg
        .paths
        .logits
        .as_deref()
        .map(|p| io::read_matrix(p).map(LogitsMatrix::new))
        .transpose()?;
    let labeled = labeled_indices(&cfg)?;
    let proxy = if cfg.strategy == kecor::acquisition::Strategy::Kecor {
        resolve_proxy(&cfg, &features, &labeled)?
    } else {
        None
    };
    let result = api::select(&cfg, &features, logits.as_ref(), &labeled, proxy.as_ref())?;
    info!(
        "selected {} samples, objective {}",
        result.chosen.len(),
        result.objective
    );

    let output = cfg.paths.output.as_deref();
    emit(output, format_indices(&result.chosen).as_bytes())?;
    let summary_path = cfg.paths.summary.clone().or_else(|| {
        output.map(|p| {
            let mut s = p.as_os_str().to_owned();
            s.push(".summary.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = summary_path {
        let summary = serde_json::json!({
            "objective": result.objective,
            "entropy_term": result.entropy_term,
            "gains": result.gains,
        });
        fs::write(
            path,
            serde_json::to_string_pretty(&summary).expect("json") + "\n",
        )?;
    }
    Ok(())
}

fn cmd_simulate(args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let task = SyntheticTask::generate(&cfg.simulation.task)?;
    let outcome = run_loop(&task, &LoopConfig::from_run_config(&cfg))?;
    let mut buf = Vec::new();
    write_report_csv(&outcome.reports, &mut buf)?;
    emit(cfg.paths.output.as_deref(), &buf)
}

fn check_indices(indices: &[usize], len: usize) -> Result<()> {
    match indices.iter().find(|&&i| i >= len) {
        Some(&index) => Err(Error::IndexOutOfRange { index, len }),
        None => Ok(()),
    }
}

fn cmd_kernel(args: &ConfigArgs, indices: &[usize]) -> Result<()> {
    let cfg = load_config(args)?;
    let output = required(&cfg.paths.output, "output")?;
    let features = io::read_matrix(required(&cfg.paths.features, "features")?)?;
    check_indices(indices, features.cols())?;
    let proxy = resolve_proxy(&cfg, &features, &labeled_indices(&cfg)?)?;
    let gram = api::gram(&cfg, &features, indices, proxy.as_ref())?;
    io::write_matrix(output, &gram.matrix)
}

fn cmd_coding_rate(args: &ConfigArgs, indices: &[usize]) -> Result<()> {
    let cfg = load_config(args)?;
    let features = io::read_matrix(required(&cfg.paths.features, "features")?)?;
    check_indices(indices, features.cols())?;
    let proxy = resolve_proxy(&cfg, &features, &labeled_indices(&cfg)?)?;
    let value = api::coding_rate(&cfg, &features, indices, proxy.as_ref())?;
    emit(
        None,
        format!("{}\n", format_significant(value, 12)).as_bytes(),
    )
}

fn cmd_proxy_train(args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let checkpoint = required(&cfg.paths.proxy, "proxy")?;
    let features = io::read_matrix(required(&cfg.paths.features, "features")?)?;
    let targets = io::read_matrix(required(&cfg.paths.targets, "targets")?)?;
    let mut train = labeled_indices(&cfg)?;
    if train.is_empty() {
        train = (0..features.cols()).collect();
    }
    check_indices(&train, features.cols())?;
    let (net, curve) = api::train_proxy(&cfg, &features, &targets, &train)?;
    let inputs = features.select_columns(&train)?;
    let final_loss = net.mse(&inputs, &targets.select_columns(&train)?)?;
    info!(
        "trained for {} epochs, loss {:?} -> {final_loss}",
        curve.len(),
        curve.first()
    );
    io::write_proxy(checkpoint, &net)?;
    emit(
        None,
        format!("{}\n", format_significant(final_loss, 12)).as_bytes(),
    )
}

fn cmd_defaults(profile: Option<ProfileArg>) -> Result<()> {
    let cfg = RunConfig {
        profile: profile.map(Profile::from),
        ..RunConfig::default()
    };
    emit(None, (cfg.resolved().to_json_pretty() + "\n").as_bytes())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Select(args) => cmd_select(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Kernel { args, indices } => cmd_kernel(args, indices),
        Command::CodingRate { args, indices } => cmd_coding_rate(args, indices),
        Command::ProxyTrain(args) => cmd_proxy_train(args),
        Command::Defaults { profile } => cmd_defaults(*profile),
        Command::Convert { from_csv, output } => {
            io::write_matrix(output, &io::read_csv_matrix(from_csv)?)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
