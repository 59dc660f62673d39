use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::Config;
use crate::report::{Outcome, Params};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "catalog-cli", version, about = "Flow diagnostics over the example catalog")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// key=value config with [field], [domain] and [params] sections
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// catalog entry, e.g. torus_linear or torus_linear(0.3)
    #[arg(long)]
    pub catalog: Option<String>,
    /// JSON report path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV table path
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// X_t(p) with an optional orbit dump
    Flow(FlowArgs),
    /// Tangent flow DX_t(p) checked against differences of the flow
    Variational(VariationalArgs),
    /// Poincaré map from the section at p to the section at X_n(p)
    Poincare(PoincareArgs),
    /// Lie bracket [X, Y] with the catalog companion
    Bracket(PointArgs),
    /// Commutation residuals of X and its companion
    Commute(CommuteArgs),
    /// Y = fX: recovered f and its drift along the flow
    RecoverF(RecoverArgs),
    /// Normal distortion series of a pair
    Distortion(DistortionArgs),
    /// Unbounded normal distortion over sampled pairs
    Und(UndArgs),
    /// Search for pairs that stay close without sharing an orbit
    Separating(SeparatingArgs),
    /// Kinematic expansivity probe
    Kinematic(KinematicArgs),
    /// Gradient of a first integral near a saddle
    GradientDecay(DecayArgs),
    /// Birkhoff-sum deviation of a rotation at convergent denominators
    Birkhoff(BirkhoffArgs),
    /// Boundedness certificate, (α, β) calibration and hitting-time bands
    Certify(CertifyArgs),
    /// Realize a det-bump perturbation bundle along a flow tube
    PerturbRealize(RealizeArgs),
    /// Separate the normal volumes of x and a ball around p by a C¹-small perturbation
    DistortPair(DistortArgs),
    /// List the catalog and optionally run every tag check
    CatalogList(ListArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FlowArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    /// rows of the CSV orbit dump
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct VariationalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    /// central-difference step
    #[arg(long)]
    pub h: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PoincareArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub n: Option<f64>,
    /// point on the source section, defaults to x
    #[arg(long)]
    pub q: Option<String>,
    /// source disk radius
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct CommuteArgs {
    #[command(flatten)]
    pub common: Common,
    /// grid points per axis instead of the entry's declared grid
    #[arg(long)]
    pub per_axis: Option<usize>,
    #[arg(long)]
    pub times: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct RecoverArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x: Option<String>,
    /// divide Y by X (default) or by the entry's base field
    #[arg(long)]
    pub against: Option<String>,
    #[arg(long)]
    pub times: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct DistortionArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub y: Option<String>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub min_offset: Option<f64>,
    #[arg(long)]
    pub max_offset: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct UndArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampling: PairArgs,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub y: Option<String>,
    #[arg(long = "K")]
    pub k: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SeparatingArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampling: PairArgs,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct KinematicArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampling: PairArgs,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub deltas: Option<String>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DecayArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub saddle: Option<String>,
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct BirkhoffArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub theta: Option<f64>,
    /// τ(x) = 1 + amp·cos 2πx
    #[arg(long)]
    pub amp: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub disk_samples: Option<usize>,
    #[arg(long)]
    pub band_samples: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RealizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long)]
    pub n0: Option<usize>,
    /// radius of U in normal coordinates at p
    #[arg(long)]
    pub radius: Option<f64>,
    /// log-det gain requested from the cocycle perturbation
    #[arg(long)]
    pub gain: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta1: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// realize the unperturbed bundle
    #[arg(long)]
    pub identity: bool,
    #[arg(long)]
    pub per_slice: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DistortArgs {
    #[command(flatten)]
    pub common: Common,
    /// base point p of the tube
    #[arg(long)]
    pub x: Option<String>,
    /// the point whose normal volume is compared
    #[arg(long)]
    pub point: Option<String>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub delta_radius: Option<f64>,
    #[arg(long = "K")]
    pub k: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ListArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub verify: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Flow(_) => "flow",
            Command::Variational(_) => "variational",
            Command::Poincare(_) => "poincare",
            Command::Bracket(_) => "bracket",
            Command::Commute(_) => "commute",
            Command::RecoverF(_) => "recover-f",
            Command::Distortion(_) => "distortion",
            Command::Und(_) => "und",
            Command::Separating(_) => "separating",
            Command::Kinematic(_) => "kinematic",
            Command::GradientDecay(_) => "gradient-decay",
            Command::Birkhoff(_) => "birkhoff",
            Command::Certify(_) => "certify",
            Command::PerturbRealize(_) => "perturb-realize",
            Command::DistortPair(_) => "distort-pair",
            Command::CatalogList(_) => "catalog-list",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Flow(a) => &a.common,
            Command::Variational(a) => &a.common,
            Command::Poincare(a) => &a.common,
            Command::Bracket(a) => &a.common,
            Command::Commute(a) => &a.common,
            Command::RecoverF(a) => &a.common,
            Command::Distortion(a) => &a.common,
            Command::Und(a) => &a.common,
            Command::Separating(a) => &a.common,
            Command::Kinematic(a) => &a.common,
            Command::GradientDecay(a) => &a.common,
            Command::Birkhoff(a) => &a.common,
            Command::Certify(a) => &a.common,
            Command::PerturbRealize(a) => &a.common,
            Command::DistortPair(a) => &a.common,
            Command::CatalogList(a) => &a.common,
        }
    }
}

/// Runs one parsed command without touching the filesystem beyond its config.
pub fn execute(cmd: &Command) -> Result<Outcome, CliError> {
    let common = cmd.common();
    let config = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let mut params = Params::new(&config.params);
    let entry = |params: &mut Params| -> Result<_, CliError> {
        let e = config.entry(common.catalog.as_deref())?;
        params.record("field", &e.name);
        if !e.params.is_empty() {
            params.record("field_params", &e.params);
        }
        Ok(e)
    };
    match cmd {
        Command::Flow(a) => commands::flow_cmd(&entry(&mut params)?, params, a),
        Command::Variational(a) => commands::variational_cmd(&entry(&mut params)?, params, a),
        Command::Poincare(a) => commands::poincare(&entry(&mut params)?, params, a),
        Command::Bracket(a) => commands::bracket(&entry(&mut params)?, params, a),
        Command::Commute(a) => commands::commute(&entry(&mut params)?, params, a),
        Command::RecoverF(a) => commands::recover(&entry(&mut params)?, params, a),
        Command::Distortion(a) => commands::distortion(&entry(&mut params)?, params, a),
        Command::Und(a) => commands::und(&entry(&mut params)?, params, a),
        Command::Separating(a) => commands::separating(&entry(&mut params)?, params, a),
        Command::Kinematic(a) => commands::kinematic(&entry(&mut params)?, params, a),
        Command::GradientDecay(a) => commands::gradient_decay(&entry(&mut params)?, params, a),
        Command::Birkhoff(a) => {
            let e = if common.catalog.is_some() || config.field.is_some() { Some(entry(&mut params)?) } else { None };
            commands::birkhoff(e.as_ref(), params, a)
        }
        Command::Certify(a) => commands::certify(&entry(&mut params)?, params, a),
        Command::PerturbRealize(a) => commands::perturb_realize(&entry(&mut params)?, params, a),
        Command::DistortPair(a) => commands::distort_pair_cmd(&entry(&mut params)?, params, a),
        Command::CatalogList(a) => commands::catalog_list(params, a),
    }
}

/// Parses, runs and writes outputs; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprintln!("{}", CliError::Usage(e.render().to_string().trim().to_string()).to_json());
            return 1;
        }
    };
    let start = Instant::now();
    let common = cli.command.common().clone();
    let result = execute(&cli.command)
        .and_then(|out| out.write(common.out.as_deref(), common.csv.as_deref(), start.elapsed()).map(|_| out));
    match result {
        Ok(out) => {
            println!("{}", out.line());
            out.report.verdict.exit_code()
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            1
        }
    }
}
