//! Command-line front end. [`run`] returns the process exit code:
//! 0 success, 1 usage or configuration error, 2 data error, 3 numerical
//! failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circ::{Angle, AngleUnit};
use crate::error::{Error, Result};
use crate::inference::{
    diagnostics, forecast_y_next, hpd_circular, latent_density_grid, loo_cv, CvConfig, PosteriorSamples,
};
use crate::io::{read_series, write_series, RunConfig, RunManifest};
use crate::mcmc::{run_chains, Track};
use crate::mle::{sa_optimize, VarianceEstimate};
use crate::model::{seeded_grid, Variances};
use crate::par::{self, ExecMode};
use crate::simgen::generate;

pub const THREADS_ENV: &str = "CIRCSSM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "circssm", version, about = "State-space inference for circular time series")]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `seed` from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Series file (CSV or tab separated, with header).
    #[arg(long)]
    pub input: PathBuf,
    /// Column holding the angles; defaults to `input.column`.
    #[arg(long)]
    pub column: Option<String>,
    /// radians, degrees or clock24; defaults to `input.unit`.
    #[arg(long)]
    pub unit: Option<AngleUnit>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the benchmark nonlinear circular series.
    Simulate {
        #[arg(long = "T")]
        horizon: Option<usize>,
        /// Output series (`t,y`).
        #[arg(long, default_value = "series.csv")]
        out: PathBuf,
        /// Optional output of the latent path `x_0..x_T`.
        #[arg(long)]
        latent: Option<PathBuf>,
    },
    /// Maximize the Monte Carlo integrated likelihood over the variances.
    Mle {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value = "variances.json")]
        out: PathBuf,
    },
    /// Run the sampler.
    Sample {
        #[command(flatten)]
        input: InputArgs,
        /// Output of `mle`; overrides the configured variances.
        #[arg(long)]
        variances: Option<PathBuf>,
        /// Also record the look-up table values `Dz_1..Dz_n`.
        #[arg(long)]
        export_dz: bool,
        #[arg(long, default_value = "run")]
        out_dir: PathBuf,
    },
    /// One-step-ahead predictive draws and their HPD region.
    Forecast {
        /// `samples.csv` written by `sample`.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value = "forecast")]
        out_dir: PathBuf,
    },
    /// Leave-one-out cross-validation.
    Cv {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        variances: Option<PathBuf>,
        #[arg(long, default_value = "cv")]
        out_dir: PathBuf,
    },
    /// Effective sample sizes and Geweke scores of a samples file.
    Diagnose {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value = "diagnostics.json")]
        out: PathBuf,
    },
}

/// Exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        return 3;
    }
    match e {
        Error::Config { .. } => 1,
        _ => 2,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_manifest(path: &Path, m: RunManifest, started: Instant) -> Result<()> {
    let mut m = m;
    m.wall_clock_secs = started.elapsed().as_secs_f64();
    let mut w = create(path)?;
    m.write_json(&mut w)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn load_variances(path: &Option<PathBuf>, fallback: Variances) -> Result<Variances> {
    match path {
        Some(p) => {
            let est: VarianceEstimate = serde_json::from_reader(Error::open(p)?)?;
            est.variances.validate()?;
            Ok(est.variances)
        }
        None => Ok(fallback),
    }
}

fn load_input(args: &InputArgs, cfg: &RunConfig) -> Result<Vec<Angle>> {
    let unit = args.unit.unwrap_or(cfg.unit);
    let column = args.column.as_deref().unwrap_or(&cfg.column);
    Ok(read_series(&args.input, unit, column)?.values)
}

fn execute(cli: &Cli) -> Result<()> {
    let base = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    let cfg = base.with_seed(cli.seed.unwrap_or(base.seed));
    let mode = match cli.threads {
        Some(1) => ExecMode::Sequential,
        Some(n) => {
            par::init_threads(n)?;
            ExecMode::Parallel
        }
        None => ExecMode::Parallel,
    };
    let started = Instant::now();

    match &cli.command {
        Command::Simulate { horizon, out, latent } => {
            let mut sim_cfg = cfg.sim.clone();
            if let Some(t) = horizon {
                sim_cfg.horizon = *t;
            }
            let sim = generate(&sim_cfg)?;
            let mut w = create(out)?;
            write_series(&mut w, &cfg.column, &sim.observed, cfg.unit, 1)?;
            w.flush()?;
            if let Some(p) = latent {
                let mut w = create(p)?;
                write_series(&mut w, "x", &sim.latent, AngleUnit::Radians, 0)?;
                w.flush()?;
            }
        }
        Command::Mle { input, out } => {
            let obs = load_input(input, &cfg)?;
            let grid = seeded_grid(cfg.seed, cfg.grid_size, obs.len())?;
            let est = sa_optimize(&obs, &cfg.anneal, &cfg.prior, &grid, mode)?;
            write_json(out, &est)?;
        }
        Command::Sample {
            input,
            variances,
            export_dz,
            out_dir,
        } => {
            let obs = load_input(input, &cfg)?;
            let t = obs.len();
            let v = load_variances(variances, cfg.variances)?;
            let grid = seeded_grid(cfg.seed, cfg.grid_size, t)?;
            let mut chain = cfg.chain.clone();
            for tr in [Track::X, Track::FstarNext, Track::Variances] {
                if !chain.track.contains(&tr) {
                    chain.track.push(tr);
                }
            }
            if *export_dz && !chain.track.contains(&Track::Dz) {
                chain.track.push(Track::Dz);
            }
            let data: Vec<Option<Angle>> = obs.iter().map(|y| Some(*y)).collect();
            let (mut samples, log) = run_chains(&data, &grid, &cfg.prior, &chain, &cfg.proposals, v, cfg.chains, mode)?;
            let manifest = RunManifest::new("sample", &cfg, (0..cfg.chains as u64).map(|i| cfg.seed + i).collect())
                .param("input", input.input.display())
                .param("horizon", t)
                .param("variances", format!("{v:?}"))
                .param("export_dz", export_dz);
            samples.meta.config_digest = manifest.config_digest.clone();
            samples.write_csv(create(&out_dir.join("samples.csv"))?)?;
            write_json(&out_dir.join("acceptance.json"), &log)?;
            let grid = latent_density_grid(&samples, t + 1, cfg.density_bins)?;
            grid.write_csv(create(&out_dir.join("density.csv"))?)?;
            write_manifest(&out_dir.join("manifest.json"), manifest, started)?;
        }
        Command::Forecast { samples, out_dir } => {
            let s = PosteriorSamples::read_csv(Error::open(samples)?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x666f_7265);
            let mut draws = Vec::with_capacity(s.len() * cfg.forecast_draws);
            for _ in 0..cfg.forecast_draws {
                draws.extend(forecast_y_next(&s, &mut rng)?);
            }
            let hpd = hpd_circular(&draws, cfg.hpd_mass, cfg.hpd_bins)?;
            let mut w = create(&out_dir.join("forecast_draws.csv"))?;
            write_series(&mut w, "y_next", &draws, AngleUnit::Radians, 1)?;
            w.flush()?;
            write_json(&out_dir.join("hpd.json"), &hpd)?;
            let manifest = RunManifest::new("forecast", &cfg, vec![cfg.seed]).param("samples", samples.display());
            write_manifest(&out_dir.join("manifest.json"), manifest, started)?;
        }
        Command::Cv {
            input,
            variances,
            out_dir,
        } => {
            let obs = load_input(input, &cfg)?;
            let v = load_variances(variances, cfg.variances)?;
            let cv_cfg = CvConfig {
                chain: cfg.chain.clone(),
                proposals: cfg.proposals.clone(),
                prior: cfg.prior.clone(),
                variances: v,
                grid: seeded_grid(cfg.seed, cfg.grid_size, obs.len())?,
                hpd_mass: cfg.hpd_mass,
                hpd_bins: cfg.hpd_bins,
            };
            let report = loo_cv(&obs, &cv_cfg, mode)?;
            for f in &report.folds {
                let mut w = create(&out_dir.join(format!("predictive_t{}.csv", f.t)))?;
                write_series(&mut w, "y", &f.draws, AngleUnit::Radians, 1)?;
                w.flush()?;
            }
            #[derive(Serialize)]
            struct FoldSummary<'a> {
                t: usize,
                held_out: f64,
                covered: bool,
                hpd: &'a crate::inference::HpdRegion,
            }
            #[derive(Serialize)]
            struct Coverage<'a> {
                coverage: f64,
                folds: Vec<FoldSummary<'a>>,
            }
            let summary = Coverage {
                coverage: report.coverage,
                folds: report
                    .folds
                    .iter()
                    .map(|f| FoldSummary {
                        t: f.t,
                        held_out: f.held_out.radians(),
                        covered: f.covered,
                        hpd: &f.hpd,
                    })
                    .collect(),
            };
            write_json(&out_dir.join("coverage.json"), &summary)?;
            let manifest = RunManifest::new("cv", &cfg, (1..=obs.len() as u64).map(|t| cfg.seed + t).collect())
                .param("input", input.input.display())
                .param("variances", format!("{v:?}"));
            write_manifest(&out_dir.join("manifest.json"), manifest, started)?;
        }
        Command::Diagnose { samples, out } => {
            let s = PosteriorSamples::read_csv(Error::open(samples)?)?;
            write_json(out, &diagnostics(&s)?)?;
        }
    }
    Ok(())
}
