//! Command-line interface: simulate, cluster, screeplot, benchmark.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::benchmark::{run_benchmark, write_benchmark_csv, BenchModel, BenchSettings, GridCell};
use crate::cluster::{screeplot, spectral_cluster, SpectralConfig};
use crate::config::{ModelKind, RunConfig};
use crate::error::{Error, Result};
use crate::extremal::{marginal_rank_transform, select_extremes, SelectionRule};
use crate::graph::KnnMode;
use crate::io;
use crate::rng::RandomStream;
use crate::variates::{simulate_lfm, simulate_ma_embedding, FactorLaw, FactorModelSpec, SampleMatrix, TailCase};

#[derive(Parser, Debug)]
#[command(name = "exspec", version, about = "Spectral clustering of multivariate extremes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a sample and write it with its latent factors.
    Simulate(RunArgs),
    /// Select extremes, cluster their angles, and export labels, atoms and scree.
    Cluster(RunArgs),
    /// Eigenvalues of the fully connected kernel matrix of the extremes.
    Screeplot(RunArgs),
    /// Replicated comparison of spectral clustering and spherical k-means.
    Benchmark(RunArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Lfm,
    LfmNoisy,
    Ma,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Symmetric,
    Mutual,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// key=value file; flags override its settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    /// Input CSV for `--model csv`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Keep radii above this empirical quantile.
    #[arg(long, conflicts_with = "nn")]
    pub beta: Option<f64>,
    /// Keep this many largest radii.
    #[arg(long)]
    pub nn: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Kernel scale.
    #[arg(long)]
    pub s: Option<f64>,
    /// Number of clusters.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Rank-transform the margins of CSV input before selecting extremes.
    #[arg(long)]
    pub rank_transform: bool,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(p) = &self.config {
            c.apply_file(p)?;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.model {
            c.model = match v {
                ModelArg::Lfm => ModelKind::Lfm,
                ModelArg::LfmNoisy => ModelKind::LfmNoisy,
                ModelArg::Ma => ModelKind::Ma,
                ModelArg::Csv => ModelKind::Csv,
            };
        }
        if let Some(v) = &self.input {
            c.input = Some(v.clone());
        }
        if let Some(v) = self.alpha {
            c.alpha = Some(v);
        }
        if let Some(v) = self.sigma {
            c.sigma = v;
        }
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.beta {
            c.selection = SelectionRule::Quantile(v);
        }
        if let Some(v) = self.nn {
            c.selection = SelectionRule::TopCount(v);
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.s {
            c.s = v;
        }
        if let Some(v) = self.m {
            c.m = Some(v);
        }
        if let Some(v) = self.mode {
            c.mode = match v {
                ModeArg::Symmetric => KnnMode::Symmetric,
                ModeArg::Mutual => KnnMode::Mutual,
            };
        }
        if self.rank_transform {
            c.rank_transform = true;
        }
        if let Some(v) = self.reps {
            c.reps = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        Ok(c)
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::MissingLatents => 2,
        Error::Io { .. } | Error::Parse { .. } => 3,
        Error::DegenerateSample(_) | Error::IsolatedNode { .. } | Error::NumericalFailure { .. } => 4,
    }
}

fn meta_entries(cfg: &RunConfig, command: &str, extra: &[(&'static str, String)]) -> Vec<(&'static str, String)> {
    let mut v = vec![
        ("command", command.to_string()),
        ("config_hash", io::config_hash(&cfg.canonical())),
        ("seed", cfg.seed.to_string()),
        ("version", format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))),
    ];
    v.extend(extra.iter().cloned());
    v
}

fn write_with_meta<F>(path: &Path, meta: &[(&'static str, String)], f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    io::write_file(path, f)?;
    io::write_meta(path, meta)
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    Ok(&cfg.out)
}

/// The observations a command works on: simulated or read from CSV.
pub fn load_sample(cfg: &RunConfig) -> Result<SampleMatrix> {
    let root = RandomStream::new(cfg.seed);
    let mut stream = root.substream_named("sample");
    let alpha = cfg.alpha();
    match cfg.model {
        ModelKind::Lfm | ModelKind::LfmNoisy => {
            let spec = FactorModelSpec::new(
                cfg.loadings.clone(),
                alpha,
                cfg.sigma,
                FactorLaw::Frechet,
                TailCase::Nonnegative,
            )?;
            simulate_lfm(&spec, cfg.n, &mut stream)
        }
        ModelKind::Ma => simulate_ma_embedding(&cfg.coeffs, alpha, cfg.n, cfg.embed_dim, &mut stream),
        ModelKind::Csv => {
            let path = cfg.input.as_ref().ok_or_else(|| Error::Config("model csv needs --input".into()))?;
            let mut sample = io::read_sample_file(path)?;
            if cfg.rank_transform {
                sample = SampleMatrix::observed(marginal_rank_transform(&sample.x)?);
            }
            Ok(sample)
        }
    }
}

fn planned_check(cfg: &RunConfig) -> Result<()> {
    cfg.validate_common()?;
    if cfg.model != ModelKind::Csv {
        if let SelectionRule::TopCount(k) = cfg.selection {
            if k >= cfg.n {
                return Err(Error::Config(format!("N_n = {k} must be below n = {}", cfg.n)));
            }
        }
        cfg.validate_cluster(cfg.planned_extremes(cfg.n))?;
    }
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate_common()?;
    if cfg.model == ModelKind::Csv {
        return Err(Error::Config("simulate needs a simulated model".into()));
    }
    let sample = load_sample(cfg)?;
    let path = out_dir(cfg)?.join("sample.csv");
    write_with_meta(&path, &meta_entries(cfg, "simulate", &[]), |w| io::write_sample(w, &sample))?;
    Ok(path)
}

pub fn cmd_cluster(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    planned_check(cfg)?;
    let sample = load_sample(cfg)?;
    let extremes = select_extremes(&sample.x, cfg.selection)?;
    cfg.validate_cluster(extremes.len())?;
    let mut sc = SpectralConfig::new(cfg.m()?, cfg.k_n(extremes.len())?);
    sc.s = cfg.s;
    sc.mode = cfg.mode;
    let mut stream = RandomStream::new(cfg.seed).substream_named("cluster");
    let res = spectral_cluster(&extremes, &sc, &mut stream)?;
    let scree = screeplot(&extremes.angles, cfg.s)?;

    let dir = out_dir(cfg)?;
    let meta = meta_entries(
        cfg,
        "cluster",
        &[
            ("n_extremes", extremes.len().to_string()),
            ("threshold", extremes.threshold.to_string()),
            ("k_n", res.metadata.k_n.to_string()),
            ("m", res.m.to_string()),
            ("rule", res.metadata.rule.as_str().to_string()),
            ("kmeans", res.metadata.kmeans_variant.to_string()),
        ],
    );
    let labels = dir.join("labels.csv");
    let atoms = dir.join("atoms.csv");
    let scree_path = dir.join("scree.csv");
    write_with_meta(&labels, &meta, |w| io::write_labels(w, &extremes, &res))?;
    write_with_meta(&atoms, &meta, |w| io::write_atoms(w, &res.atoms, &res.masses))?;
    write_with_meta(&scree_path, &meta, |w| io::write_scree(w, &scree))?;
    Ok(vec![labels, atoms, scree_path])
}

pub fn cmd_screeplot(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate_common()?;
    let sample = load_sample(cfg)?;
    let extremes = select_extremes(&sample.x, cfg.selection)?;
    let scree = screeplot(&extremes.angles, cfg.s)?;
    let path = out_dir(cfg)?.join("scree.csv");
    let meta = meta_entries(cfg, "screeplot", &[("n_extremes", extremes.len().to_string())]);
    write_with_meta(&path, &meta, |w| io::write_scree(w, &scree))?;
    Ok(path)
}

pub fn cmd_benchmark(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate_common()?;
    cfg.validate_benchmark()?;
    let alpha = cfg.alpha();
    let model = match cfg.model {
        ModelKind::Ma => BenchModel::MovingAverage {
            coeffs: cfg.coeffs.clone(),
            alpha,
            embed_dim: cfg.embed_dim,
        },
        _ => BenchModel::Factor {
            loadings: cfg.loadings.clone(),
            alpha,
        },
    };
    let mut cells = Vec::new();
    for &sigma in &cfg.grid_sigma {
        for &tau in &cfg.grid_tau {
            for (&n, &n_extremes) in cfg.grid_n.iter().zip(&cfg.grid_nn) {
                cells.push(GridCell { n, n_extremes, tau, sigma });
            }
        }
    }
    let settings = BenchSettings {
        mode: cfg.mode,
        s: cfg.s,
        ..Default::default()
    };
    let rows = run_benchmark(&model, &cells, cfg.reps, &settings, cfg.seed)?;
    let path = out_dir(cfg)?.join("benchmark.csv");
    write_with_meta(&path, &meta_entries(cfg, "benchmark", &[]), |w| write_benchmark_csv(w, &rows))?;
    Ok(path)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(&a.resolve()?).map(|_| ()),
        Command::Cluster(a) => cmd_cluster(&a.resolve()?).map(|_| ()),
        Command::Screeplot(a) => cmd_screeplot(&a.resolve()?).map(|_| ()),
        Command::Benchmark(a) => cmd_benchmark(&a.resolve()?).map(|_| ()),
    }
}
