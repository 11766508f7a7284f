use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use conflab::config::Config;
use conflab::conformal::MetricDescriptor;
use conflab::entropy;
use conflab::families::{self, FamilyKind, FamilyParams};
use conflab::report;
use conflab::spectral;
use conflab::surface::{build_mesh, build_octagon_domain, HyperbolicSurface};
use conflab::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "conflab", version, about = "Conformal metrics on the genus-2 octagon surface")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Mesh level, overrides the config file.
    #[arg(long, global = true)]
    level: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Triangulations of the glued octagon.
    #[command(subcommand)]
    Mesh(MeshCmd),
    /// Conformal metric descriptors.
    #[command(subcommand)]
    Metric(MetricCmd),
    /// Lowest Laplace eigenvalues of a metric, as CSV.
    Spectrum(SpectrumArgs),
    /// Check every bound on a metric and write a JSON report.
    Verify(VerifyArgs),
    /// Run a parameter sweep described by a config file.
    Sweep(SweepArgs),
    /// Entropy bounds.
    #[command(subcommand)]
    Entropy(EntropyCmd),
}

#[derive(Debug, Subcommand)]
enum MeshCmd {
    /// Build the mesh and print its counts.
    Build {
        /// Write the mesh as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum MetricCmd {
    /// Build and normalize a family member.
    Make(MakeArgs),
}

#[derive(Debug, Args)]
struct MakeArgs {
    /// hyperbolic, shrinker, stretcher, dumbbell or nonpositive_radial
    #[arg(long)]
    family: String,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
    /// Amplitude of the nonpositive radial family.
    #[arg(long, default_value_t = 1.0)]
    amplitude: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    /// Metric descriptor JSON.
    #[arg(long)]
    metric: PathBuf,
    /// Highest eigenvalue index.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    metric: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV (defaults to the config's sweep path, then stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum EntropyCmd {
    /// Upper bound (log N)/ε on topological entropy from a covering count.
    Coding {
        #[arg(long)]
        volume: f64,
        #[arg(long)]
        dim: u32,
        #[arg(long)]
        rho: f64,
    },
    /// Katok bounds of a metric.
    Katok {
        #[arg(long)]
        metric: PathBuf,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>, level: Option<usize>) -> Result<Config> {
    let mut config = match path {
        Some(p) => Config::from_json(&read(p)?)?,
        None => Config::default(),
    };
    if let Some(l) = level {
        config.level = l;
    }
    config.validate()?;
    Ok(config)
}

fn load_member(path: &Path, config: &Config) -> Result<families::Member> {
    let d = MetricDescriptor::from_json(&read(path)?).map_err(|e| Error::Usage(format!("bad descriptor: {e}")))?;
    let surface = Arc::new(HyperbolicSurface::regular_octagon(config.diameter_level)?);
    families::from_descriptor(surface, &d)
}

/// Exit status of a successful run: 0, or 1 when a verification failed.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Mesh(MeshCmd::Build { out }) => {
            let level = cli.level.unwrap_or(3);
            let config = load_config(None, Some(level))?;
            let mesh = build_mesh(&build_octagon_domain(), config.level)?;
            println!(
                "level {} V {} E {} F {} chi {}",
                level,
                mesh.n_vertices(),
                mesh.n_edges(),
                mesh.n_faces(),
                mesh.euler_characteristic()
            );
            if let Some(p) = out {
                fs::write(p, mesh.to_json()? + "\n")?;
            }
            Ok(0)
        }
        Command::Metric(MetricCmd::Make(a)) => {
            let kind: FamilyKind = a.family.parse()?;
            let mut params = FamilyParams::new(kind, a.eps, a.delta);
            params.amplitude = a.amplitude;
            let surface = Arc::new(HyperbolicSurface::regular_octagon(Config::default().diameter_level)?);
            let member = families::build_member(surface, params)?;
            emit(a.out.as_deref(), &(member.metric.descriptor.to_json()? + "\n"))?;
            Ok(0)
        }
        Command::Spectrum(a) => {
            let config = load_config(None, cli.level)?;
            let member = load_member(&a.metric, &config)?;
            let mesh = member.mesh(config.level)?;
            let sys = spectral::assemble(&member.metric, &mesh)?;
            let res = spectral::eigenvalues(&sys, a.k)?;
            emit(a.out.as_deref(), &spectral::spectrum_csv(&res)?)?;
            Ok(0)
        }
        Command::Verify(a) => {
            let config = load_config(a.config.as_deref(), cli.level)?;
            let member = load_member(&a.metric, &config)?;
            let rep = report::verify_member(&member, &config);
            let out = a.report.or(config.outputs.report.as_ref().map(PathBuf::from));
            emit(out.as_deref(), &rep.to_json()?)?;
            for f in rep.failures() {
                log::warn!("failed: {} (lhs {}, rhs {}, margin {})", f.name, f.lhs, f.rhs, f.margin);
            }
            Ok(if rep.passed { 0 } else { 1 })
        }
        Command::Sweep(a) => {
            let config = load_config(Some(&a.config), cli.level)?;
            let members = config.members();
            let surface = Arc::new(HyperbolicSurface::regular_octagon(config.diameter_level)?);
            let rows = report::sweep(&surface, &members, config.level)?;
            let out = a.out.or(config.outputs.sweep.as_ref().map(PathBuf::from));
            emit(out.as_deref(), &report::sweep_csv(&rows)?)?;
            Ok(if rows.iter().any(|r| !r.error.is_empty()) { 1 } else { 0 })
        }
        Command::Entropy(EntropyCmd::Coding { volume, dim, rho }) => {
            let b = entropy::coding_entropy_bound(volume, dim, rho)?;
            log::info!("eps {} ball volume {} N {}", b.eps, b.ball_volume, b.n_balls);
            println!("{}", b.bound);
            Ok(0)
        }
        Command::Entropy(EntropyCmd::Katok { metric }) => {
            let config = load_config(None, cli.level)?;
            let member = load_member(&metric, &config)?;
            let b = entropy::katok_bounds(&member.metric, report::CHI)?;
            println!("{}", serde_json::to_string_pretty(&b)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
