use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};

use isospec::cli::{
    cmd_certify, cmd_generate, cmd_orbit, cmd_verify, effective_config, OrbitTarget, Overrides,
    DEFAULT_CUTOFF, EXIT_ERROR,
};

#[derive(Parser)]
#[command(name = "isospec", version, about = "Isospectral deformations of weighted projective spaces")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    samples: Option<usize>,
    #[arg(long, global = true)]
    mu_range: Option<i64>,
    /// Output file (verify, orbit, certify) or directory (generate).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Spectrum cutoff for `orbit`.
    #[arg(long, global = true, default_value_t = DEFAULT_CUTOFF)]
    cutoff: f64,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long, global = true)]
    p: Option<u32>,
    #[arg(long, global = true)]
    q: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace an isospectral family of j-maps.
    Generate {
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 4)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        step_size: f64,
    },
    /// Check every hypothesis for a pair of j-map files.
    Verify { a: PathBuf, b: PathBuf },
    /// Orbit geometry for a stratum `(a, b)` or a point file.
    #[command(group(ArgGroup::new("target").required(true).args(["a", "point"])))]
    Orbit {
        #[arg(long, requires = "b")]
        a: Option<f64>,
        #[arg(long, requires = "a")]
        b: Option<f64>,
        #[arg(long)]
        point: Option<PathBuf>,
    },
    /// Genericity and non-equivalence certificate for a pair of j-map files.
    Certify { a: PathBuf, b: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR } else { 0 });
        }
    };
    let overrides = Overrides {
        config: cli.config,
        seed: cli.seed,
        samples: cli.samples,
        mu_range: cli.mu_range,
        out: cli.out,
        n: cli.n,
        p: cli.p,
        q: cli.q,
    };
    let cfg = match effective_config(&overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_ERROR);
        }
    };
    let code = match cli.command {
        Command::Generate { m, steps, step_size } => cmd_generate(&cfg, m, steps, step_size),
        Command::Verify { a, b } => cmd_verify(&cfg, &a, &b),
        Command::Certify { a, b } => cmd_certify(&cfg, &a, &b),
        Command::Orbit { a, b, point } => {
            let target = match (a, b, point) {
                (Some(a), Some(b), None) => OrbitTarget::Stratum { a, b },
                (_, _, Some(path)) => OrbitTarget::Point(path),
                _ => unreachable!("clap enforces the target group"),
            };
            cmd_orbit(&cfg, &target, cli.cutoff)
        }
    };
    ExitCode::from(code)
}
