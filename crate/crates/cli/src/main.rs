//! `aerofactor` command line: headless pipeline runs, synthetic data and
//! rank diagnostics.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 pipeline failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aerofactor::contrastive::AlphaMode;
use aerofactor::data::{impute, unfold, ImputePolicy};
use aerofactor::factorization::{select_p_diagnostics, NmfConfig, NndsvdFill};
use aerofactor::ingest::{dataset_id, Dataset};
use aerofactor::multidr::DrMethod;
use aerofactor::pipeline::{render_report, run_pipeline, to_canonical_json_pretty, CorrelationBasis, PipelineConfig};
use aerofactor::synth::{generate, SynthConfig};
use aerofactor::Error;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "aerofactor",
    version,
    about = "Pollution source apportionment and station grouping"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write the view payloads.
    Run(RunArgs),
    /// Generate a dataset with planted sources and station groups.
    Synth(SynthArgs),
    /// Print fit diagnostics for a range of source counts as TSV.
    DiagP(DiagArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DrArg {
    Umap,
    Pca2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImputeArg {
    Interpolate,
    FeatureMedian,
    ZeroFill,
}

#[derive(Clone, Copy, ValueEnum)]
enum FillArg {
    Zeros,
    Mean,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Normalized,
    Raw,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Directory holding the input CSVs.
    #[arg(long)]
    data: PathBuf,
    /// Number of sources.
    #[arg(long)]
    p: usize,
    /// Number of station clusters.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// JSON config used as the base; flags given explicitly override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    dr_method: Option<DrArg>,
    /// `auto` or a non-negative contrast weight.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long, value_enum)]
    impute: Option<ImputeArg>,
    /// Grid cell size in degrees.
    #[arg(long)]
    cell_deg: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    nndsvd_fill: Option<FillArg>,
    #[arg(long, value_enum)]
    correlation_basis: Option<BasisArg>,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 12)]
    stations: usize,
    #[arg(long, default_value_t = 40)]
    timestamps: usize,
    #[arg(long, default_value_t = 49)]
    species: usize,
    #[arg(long, default_value_t = 7)]
    sources: usize,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise standard deviation as a fraction of the signal RMS.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct DiagArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    pmin: usize,
    #[arg(long)]
    pmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Synth(a) => synth(a),
        Command::DiagP(a) => diag_p(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn build_config(a: &RunArgs) -> Result<PipelineConfig, Failure> {
    let mut c = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    c.p = a.p;
    c.k = a.k;
    c.seed = a.seed;
    if let Some(m) = a.dr_method {
        c.dr_method = match m {
            DrArg::Umap => DrMethod::Umap,
            DrArg::Pca2 => DrMethod::Pca2,
        };
    }
    if let Some(alpha) = &a.alpha {
        c.alpha_mode = match alpha.as_str() {
            "auto" => AlphaMode::Auto,
            v => AlphaMode::Fixed(
                v.parse()
                    .map_err(|_| Failure::Usage(format!("--alpha must be `auto` or a number, got `{v}`")))?,
            ),
        };
    }
    if let Some(i) = a.impute {
        c.impute = match i {
            ImputeArg::Interpolate => ImputePolicy::Interpolate,
            ImputeArg::FeatureMedian => ImputePolicy::FeatureMedian,
            ImputeArg::ZeroFill => ImputePolicy::ZeroFill,
        };
    }
    if let Some(f) = a.nndsvd_fill {
        c.nndsvd_fill = match f {
            FillArg::Zeros => NndsvdFill::Zeros,
            FillArg::Mean => NndsvdFill::Mean,
            FillArg::Random => NndsvdFill::Random,
        };
    }
    if let Some(b) = a.correlation_basis {
        c.correlation_basis = match b {
            BasisArg::Normalized => CorrelationBasis::Normalized,
            BasisArg::Raw => CorrelationBasis::Raw,
        };
    }
    c.cell_deg = a.cell_deg.unwrap_or(c.cell_deg);
    c.max_iter = a.max_iter.unwrap_or(c.max_iter);
    c.tol = a.tol.unwrap_or(c.tol);
    c.validate()?;
    Ok(c)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    let mut f = fs::File::create(dir.join(name))?;
    f.write_all(bytes)?;
    Ok(())
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let config = build_config(&a)?;
    let dataset = Dataset::load_dir(&a.data)?;
    for w in &dataset.warnings {
        log::warn!("{w}");
    }
    let id = dataset_id(&a.data)?;
    let out = run_pipeline(&dataset, &id, &config)?;
    fs::create_dir_all(&a.out)?;
    write_file(
        &a.out,
        "sources.json",
        &to_canonical_json_pretty(&out.envelope(out.sources_view()))?,
    )?;
    write_file(
        &a.out,
        "similarity.json",
        &to_canonical_json_pretty(&out.envelope(out.similarity_view()))?,
    )?;
    write_file(
        &a.out,
        "characteristics.json",
        &to_canonical_json_pretty(&out.envelope(out.characteristics_view()))?,
    )?;
    write_file(
        &a.out,
        "transitions.json",
        &to_canonical_json_pretty(&out.envelope(out.transitions_export()))?,
    )?;
    write_file(&a.out, "report.txt", render_report(&out).as_bytes())?;
    eprintln!("run {} written to {}", out.run_id, a.out.display());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Failure> {
    let s = generate(&SynthConfig {
        stations: a.stations,
        timestamps: a.timestamps,
        species: a.species,
        sources: a.sources,
        clusters: a.clusters,
        seed: a.seed,
        noise: a.noise,
    })?;
    s.write_dir(&a.out)?;
    Ok(())
}

fn diag_p(a: DiagArgs) -> Result<(), Failure> {
    if a.pmin == 0 || a.pmin > a.pmax {
        return Err(Failure::Usage(format!(
            "need 1 <= pmin <= pmax, got {}..{}",
            a.pmin, a.pmax
        )));
    }
    let dataset = Dataset::load_dir(&a.data)?;
    let imputed = impute(&dataset.species, ImputePolicy::default())?;
    let matrix = unfold(&imputed.tensor)?;
    let rows = select_p_diagnostics(
        &matrix,
        a.pmin..=a.pmax,
        &NmfConfig {
            seed: a.seed,
            ..NmfConfig::default()
        },
    )?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "p\texplained_variance_ratio\tobjective\titerations")?;
    for r in rows {
        writeln!(
            w,
            "{}\t{:.6}\t{:.6e}\t{}",
            r.p, r.explained_variance_ratio, r.objective, r.iterations
        )?;
    }
    Ok(())
}
