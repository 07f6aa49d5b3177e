//! Command-line front end. `main` only parses and dispatches here.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::ddpg::PolicyHandle;
use crate::envs::{BetaSpec, EnvVariant};
use crate::error::{invalid, Error, Result};
use crate::experiments::{
    diff_grids, evaluate_cell, load_grid, run_grid, save_grid, save_runs, train_cell, CellCoord, GridSpec, Metrics,
    METRICS,
};
use crate::graph::{form_network, FormationConfig};
use crate::plot::{default_palette, heatmap_svg, PlotStyle};
use crate::policy::{EqualSplitPolicy, Policy, RandomPolicy, ZeroPolicy};
use crate::seed::substream;
use crate::trust::EvalMode;

/// Stream for the built-in random evaluation policy, disjoint from the
/// per-run streams used by the experiments module.
const RANDOM_POLICY_STREAM: u64 = 6;

#[derive(Debug, Parser)]
#[command(name = "trustsim", version, about = "Trust-aware service allocation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one community network and write it as JSON.
    GenNetwork {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the policy of one cell and dump it as JSON.
    Train {
        #[command(flatten)]
        cell: CellArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a policy under the ground-truth dynamics; prints metrics as JSON.
    Eval {
        #[command(flatten)]
        cell: CellArgs,
        /// zero, equal-split, random, or a policy file written by `train`.
        #[arg(long)]
        policy: String,
    },
    /// Train and evaluate a full grid; writes runs.csv, aggregate.csv and manifest.json.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quota: bool,
        #[arg(long)]
        eval_mode: Option<EvalMode>,
    },
    /// Cellwise difference `variant − base-variant` of aggregate grids.
    Diff {
        /// Aggregate CSV holding the minuend.
        a: PathBuf,
        /// Aggregate CSV holding the subtrahend; defaults to `a`.
        b: Option<PathBuf>,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        base_variant: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render one metric of an aggregate CSV as an SVG heatmap.
    Plot {
        input: PathBuf,
        #[arg(long)]
        metric: String,
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Coordinates of a single run.
#[derive(Debug, Args)]
pub struct CellArgs {
    /// Base settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<EnvVariant>,
    #[arg(long, default_value_t = 0.0)]
    c: f64,
    /// Trust prior as `a,b`.
    #[arg(long, default_value = "8,2")]
    prior: BetaSpec,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0)]
    rep: usize,
    #[arg(long)]
    quota: bool,
    #[arg(long)]
    eval_mode: Option<EvalMode>,
}

impl CellArgs {
    /// A one-cell spec plus the coordinate of the requested run.
    fn spec(&self, variant: EnvVariant) -> Result<(GridSpec, CellCoord)> {
        let mut spec = base_spec(self.config.as_deref())?;
        spec.c_values = vec![self.c];
        spec.priors = vec![self.prior];
        spec.variants = vec![variant];
        spec.repetitions = self.rep + 1;
        spec.quota |= self.quota;
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(mode) = self.eval_mode {
            spec.eval_mode = mode;
        }
        spec.validate()?;
        let at = CellCoord {
            variant,
            c_index: 0,
            prior_index: 0,
            rep: self.rep,
        };
        Ok((spec, at))
    }
}

fn base_spec(config: Option<&Path>) -> Result<GridSpec> {
    match config {
        Some(path) => GridSpec::load(path),
        None => Ok(GridSpec::default()),
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    config: &'a GridSpec,
    runs: Vec<ManifestRun>,
    failures: Vec<ManifestFailure>,
}

#[derive(Serialize)]
struct ManifestRun {
    variant: EnvVariant,
    c: f64,
    prior: BetaSpec,
    rep: usize,
    seed: u64,
}

#[derive(Serialize)]
struct ManifestFailure {
    variant: EnvVariant,
    c_index: usize,
    prior_index: usize,
    rep: usize,
    error: String,
}

/// Runs one parsed command and returns the process exit status.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::GenNetwork { config, seed, n, out } => {
            let spec = base_spec(config.as_deref())?;
            let cfg = FormationConfig {
                seed,
                ..spec.formation
            };
            form_network(&cfg, n.unwrap_or(spec.n))?.save(&out)?;
            Ok(0)
        }
        Command::Train { cell, out } => {
            let variant = cell.variant.unwrap_or(EnvVariant::Aware);
            let (spec, at) = cell.spec(variant)?;
            train_cell(&spec, at)?.save(&out)?;
            Ok(0)
        }
        Command::Eval { cell, policy } => {
            let metrics = eval(&cell, &policy)?;
            println!("{}", serde_json::to_string(&metrics)?);
            Ok(0)
        }
        Command::Sweep {
            config,
            out,
            seed,
            quota,
            eval_mode,
        } => sweep(config.as_deref(), &out, seed, quota, eval_mode),
        Command::Diff {
            a,
            b,
            variant,
            base_variant,
            out,
        } => {
            let ga = load_grid(&a)?;
            let gb = match &b {
                Some(path) => load_grid(path)?,
                None => ga.clone(),
            };
            let ga = match &variant {
                Some(v) => ga.select(v)?,
                None => ga,
            };
            let gb = match &base_variant {
                Some(v) => gb.select(v)?,
                None => gb,
            };
            save_grid(&diff_grids(&ga, &gb)?, &out)?;
            Ok(0)
        }
        Command::Plot {
            input,
            metric,
            variant,
            out,
        } => {
            if !METRICS.contains(&metric.as_str()) {
                return Err(invalid(format!(
                    "unknown metric '{metric}' (expected org_utility, fairness or avg_trust)"
                )));
            }
            let grid = load_grid(&input)?;
            let grid = match &variant {
                Some(v) => grid.select(v)?,
                None => grid,
            };
            let svg = heatmap_svg(&grid, &metric, default_palette(&grid), &PlotStyle::default())?;
            fs::write(&out, svg)?;
            Ok(0)
        }
    }
}

fn eval(cell: &CellArgs, policy: &str) -> Result<Metrics> {
    let loaded = match policy {
        "zero" | "equal-split" | "random" => None,
        path => Some(PolicyHandle::load(Path::new(path))?),
    };
    let variant = match (&loaded, cell.variant) {
        (Some(h), Some(v)) if h.header.variant != v => {
            return Err(invalid(format!(
                "policy was trained for the {} layout, not {v}",
                h.header.variant
            )))
        }
        (Some(h), _) => h.header.variant,
        (None, v) => v.unwrap_or(EnvVariant::Aware),
    };
    let (spec, at) = cell.spec(variant)?;
    let rho = spec.org.rho;
    let mut chosen: Box<dyn Policy> = match (policy, loaded) {
        (_, Some(h)) => {
            if h.header.n != spec.n {
                return Err(Error::ShapeMismatch {
                    expected: spec.n,
                    got: h.header.n,
                });
            }
            Box::new(h)
        }
        ("zero", None) => Box::new(ZeroPolicy::new(variant)),
        ("equal-split", None) => Box::new(EqualSplitPolicy::new(variant, rho)),
        (_, None) => Box::new(RandomPolicy::new(
            variant,
            rho,
            substream(spec.child_seed(at), RANDOM_POLICY_STREAM),
        )),
    };
    let run = evaluate_cell(&spec, at, chosen.as_mut())?;
    Ok(Metrics {
        org_utility: run.org_utility,
        fairness: run.fairness,
        avg_trust: run.avg_trust,
    })
}

fn sweep(config: Option<&Path>, out: &Path, seed: Option<u64>, quota: bool, eval_mode: Option<EvalMode>) -> Result<u8> {
    let Some(config) = config else {
        return Err(Error::Config("sweep needs --config".into()));
    };
    let mut spec = GridSpec::load(config)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    spec.quota |= quota;
    if let Some(mode) = eval_mode {
        spec.eval_mode = mode;
    }
    spec.validate()?;
    fs::create_dir_all(out)?;
    let result = run_grid(&spec)?;
    save_runs(&result.runs, &out.join("runs.csv"))?;
    save_grid(&result.grid, &out.join("aggregate.csv"))?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: &spec,
        runs: result
            .runs
            .iter()
            .map(|r| ManifestRun {
                variant: r.variant,
                c: r.c,
                prior: r.prior,
                rep: r.rep,
                seed: r.seed,
            })
            .collect(),
        failures: result
            .failures
            .iter()
            .map(|f| ManifestFailure {
                variant: f.coord.variant,
                c_index: f.coord.c_index,
                prior_index: f.coord.prior_index,
                rep: f.coord.rep,
                error: f.error.to_string(),
            })
            .collect(),
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    for f in &result.failures {
        eprintln!("failed: {}", f.error);
    }
    Ok(if result.failures.is_empty() { 0 } else { 1 })
}
