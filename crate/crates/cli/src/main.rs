//! `hpr-wbp`: generate barycenter instances, solve them, and compare methods.
//!
//! Exit codes are part of the interface: 0 converged to tolerance, 2 budget
//! exhausted, 3 numerical failure, 64 usage error, 1 anything else (I/O,
//! malformed input files).

mod compare;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use hpr_wbp::datagen::{generate_synthetic, instance_from_images, SyntheticConfig};
use hpr_wbp::ibp::IbpOptions;
use hpr_wbp::io::{read_instance, read_pgm, write_instance, write_json, write_pgm, GrayImage};
use hpr_wbp::solvers::{RestartPolicy, SolverOptions, Termination};
use hpr_wbp::{Error, Method, WbpInstance};

pub const EXIT_BUDGET: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_USAGE: u8 = 64;

/// Wall-clock budget applied by `--paper-protocol` (one hour).
const PAPER_TIME_LIMIT_SECS: f64 = 3600.0;

/// Environment variable naming the kernel thread count.
pub const THREADS_ENV: &str = "HPR_WBP_THREADS";

#[derive(Parser, Debug)]
#[command(name = "hpr-wbp", version, about = "Fixed-support Wasserstein barycenter LP solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a seeded synthetic instance (Gaussian-mixture samples,
    /// k-means barycenter support).
    Generate(GenerateArgs),
    /// Build an instance from equally sized grayscale PGM images.
    FromImages(FromImagesArgs),
    /// Solve one instance with one method.
    Solve(SolveArgs),
    /// Run several methods on one or more instances and tabulate the results.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Number of sample distributions.
    #[arg(long = "T")]
    num_samples: usize,
    /// Barycenter support size.
    #[arg(long)]
    m: usize,
    /// Support size of every sample.
    #[arg(long)]
    mt: usize,
    /// Dimension of the support points.
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FromImagesArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(required = true, num_args = 1..)]
    images: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// Options shared by `solve` and `compare`.
#[derive(Args, Debug, Clone)]
struct SolverFlags {
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// ADMM dual step size, in (0, 2).
    #[arg(long, default_value_t = 1.9)]
    gamma: f64,
    #[arg(long = "kkt-tol", default_value_t = 1e-5)]
    kkt_tol: f64,
    #[arg(long = "max-iters", default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long = "check-every", default_value_t = 50)]
    check_every: usize,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    restart: Switch,
    /// IBP entropic regularization.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// IBP stopping tolerance.
    #[arg(long = "ibp-tol", default_value_t = 1e-6)]
    ibp_tol: f64,
    /// Run IBP on log-scaled potentials (needed for small epsilon).
    #[arg(long = "log-domain")]
    log_domain: bool,
    /// Wall-clock limit in seconds, checked at convergence checkpoints.
    #[arg(long = "time-limit")]
    time_limit: Option<f64>,
    /// Apply the benchmark protocol budget: a one-hour time limit unless
    /// `--time-limit` is given.
    #[arg(long = "paper-protocol")]
    paper_protocol: bool,
}

impl SolverFlags {
    fn time_limit(&self) -> Option<f64> {
        self.time_limit
            .or(self.paper_protocol.then_some(PAPER_TIME_LIMIT_SECS))
    }

    fn lp_options(&self) -> SolverOptions {
        SolverOptions {
            sigma: self.sigma,
            gamma: self.gamma,
            max_iters: self.max_iters,
            kkt_tol: self.kkt_tol,
            check_every: self.check_every,
            time_limit_secs: self.time_limit(),
            restart: match self.restart {
                Switch::On => RestartPolicy::default(),
                Switch::Off => RestartPolicy::disabled(),
            },
            ..SolverOptions::default()
        }
    }

    fn ibp_options(&self) -> IbpOptions {
        IbpOptions {
            epsilon: self.epsilon,
            tol: self.ibp_tol,
            max_iters: self.max_iters,
            log_domain: self.log_domain,
            time_limit_secs: self.time_limit(),
        }
    }

    /// Validates the options the given methods will actually use.
    fn validate_for(&self, methods: &[Method]) -> hpr_wbp::Result<()> {
        if methods.iter().any(|m| *m != Method::Ibp) {
            self.lp_options().validate()?;
        }
        if methods.contains(&Method::Ibp) {
            self.ibp_options().validate()?;
        }
        Ok(())
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Instance manifest or the directory containing it.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value = "hpr")]
    method: Method,
    #[arg(long)]
    out: PathBuf,
    /// Also write the barycenter as `barycenter.pgm` (grid instances only).
    #[arg(long = "render-pgm")]
    render_pgm: bool,
    #[command(flatten)]
    flags: SolverFlags,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Instance manifests or directories; repeat for several instances.
    #[arg(long, required = true)]
    instance: Vec<PathBuf>,
    /// Comma-separated methods (at least two).
    #[arg(long, value_delimiter = ',', default_value = "hpr,admm,hybrid,ibp")]
    methods: Vec<Method>,
    /// `best` (lowest final KKT residual among the runs) or a JSON oracle
    /// file holding `objective` or a per-instance `objectives` map.
    #[arg(long, default_value = "best")]
    reference: String,
    /// Directory for `compare.csv`; the table is always printed.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flags: SolverFlags,
}

/// Error wrapper carrying the intended exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            error: anyhow::anyhow!(msg.into()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code_for(&e),
            error: e.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = error.downcast_ref::<Error>().map_or(1, exit_code_for);
        Self { code, error }
    }
}

pub fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidOptions(_) | Error::InvalidInstance(_) | Error::DimensionMismatch { .. } => EXIT_USAGE,
        Error::NonFinite { .. } | Error::Underflow { .. } => EXIT_NUMERIC,
        Error::Io { .. } | Error::Parse { .. } => 1,
    }
}

pub fn exit_code_for_termination(t: Termination) -> u8 {
    match t {
        Termination::Tolerance => 0,
        Termination::MaxIters | Termination::TimeLimit => EXIT_BUDGET,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let result = threads_from_env().and_then(|threads| match cli.command {
        Command::Generate(args) => cmd_generate(&args).map(|()| 0),
        Command::FromImages(args) => cmd_from_images(&args).map(|()| 0),
        Command::Solve(args) => cmd_solve(&args, threads),
        Command::Compare(args) => compare::run(&args, threads).map(|()| 0),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

/// Reads the requested kernel thread count. The kernels are sequential, so a
/// value above one is accepted but only noted.
fn threads_from_env() -> Result<usize, Failure> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(1);
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n >= 1 => {
            if n > 1 {
                eprintln!("note: {THREADS_ENV}={n} requested; kernels run sequentially");
            }
            Ok(n)
        }
        _ => Err(Failure::usage(format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))),
    }
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Failure> {
    let cfg = SyntheticConfig {
        dim: args.d,
        ..SyntheticConfig::uniform(args.num_samples, args.m, args.mt, args.seed)
    };
    // Flag-level problems are usage errors whatever the library calls them.
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    let inst = generate_synthetic(&cfg)?;
    let manifest = write_instance(&inst, &args.out)?;
    write_json(&args.out.join("generator.json"), &report::GeneratorRecord::new(&cfg))?;
    println!("{}", manifest.display());
    Ok(())
}

fn cmd_from_images(args: &FromImagesArgs) -> Result<(), Failure> {
    let images = args
        .images
        .iter()
        .map(|p| read_pgm(p))
        .collect::<hpr_wbp::Result<Vec<_>>>()?;
    let inst = instance_from_images(&images)?;
    let manifest = write_instance(&inst, &args.out)?;
    write_json(
        &args.out.join("generator.json"),
        &serde_json::json!({
            "generator": "from-images",
            "images": args.images.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "width": images[0].width,
            "height": images[0].height,
        }),
    )?;
    println!("{}", manifest.display());
    Ok(())
}

fn load_instance(path: &Path) -> Result<WbpInstance, Failure> {
    read_instance(path).map_err(|e| {
        let code = exit_code_for(&e);
        Failure {
            code,
            error: anyhow::Error::new(e).context(format!("cannot load instance {}", path.display())),
        }
    })
}

fn cmd_solve(args: &SolveArgs, threads: usize) -> Result<u8, Failure> {
    args.flags.validate_for(&[args.method])?;
    let inst = load_instance(&args.instance)?;
    let grid = if args.render_pgm {
        Some(grid_shape(inst.barycenter_supports()).ok_or_else(|| {
            Failure::usage("--render-pgm needs a barycenter support on a 2-d integer grid (image instances)")
        })?)
    } else {
        None
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let run = report::RunManifest {
        instance: args.instance.display().to_string(),
        method: args.method,
        lp_options: (args.method != Method::Ibp).then(|| args.flags.lp_options()),
        ibp_options: (args.method == Method::Ibp).then(|| args.flags.ibp_options()),
        out: args.out.display().to_string(),
        threads,
    };
    write_json(&args.out.join("run.json"), &run)?;

    let rep = match report::run_method(&inst, args.method, &args.flags.lp_options(), &args.flags.ibp_options()) {
        Ok(rep) => rep,
        Err(e) => {
            let code = exit_code_for(&e);
            if code == EXIT_NUMERIC {
                eprintln!("diagnostic: {} ({} run on {})", e, args.method, args.instance.display());
            }
            return Err(e.into());
        }
    };
    report::write_solve_outputs(&args.out, &inst, &rep, &run)?;
    if let Some((w, h)) = grid {
        write_pgm(&args.out.join("barycenter.pgm"), &render(rep.barycenter(&inst), inst.barycenter_supports(), w, h))?;
    }
    eprintln!(
        "{}: {} after {} iterations, objective {:.10e}, {} {:.3e}",
        rep.method,
        rep.termination.as_str(),
        rep.iterations,
        rep.primal_obj,
        report::metric_kind(&rep.final_metrics),
        rep.final_metrics.headline()
    );
    Ok(exit_code_for_termination(rep.termination))
}

/// `(width, height)` if every support point is a nonnegative integer `(row, col)`.
fn grid_shape(supports: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut rows = 0;
    let mut cols = 0;
    for p in supports {
        if p.len() != 2 || p.iter().any(|v| *v < 0.0 || v.fract() != 0.0 || !v.is_finite()) {
            return None;
        }
        rows = rows.max(p[0] as usize + 1);
        cols = cols.max(p[1] as usize + 1);
    }
    (!supports.is_empty()).then_some((cols, rows))
}

fn render(weights: &[f64], supports: &[Vec<f64>], width: usize, height: usize) -> GrayImage {
    let mut pixels = vec![0.0; width * height];
    for (w, p) in weights.iter().zip(supports) {
        pixels[p[0] as usize * width + p[1] as usize] += w.max(0.0);
    }
    GrayImage { width, height, pixels }
}
