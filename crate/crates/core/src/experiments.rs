//! Sweep harness: train and evaluate every variant over the c × trust-prior
//! grid with repetitions, aggregate the three metrics, and persist results.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ddpg::{train, DdpgConfig, PolicyHandle};
use crate::envs::{draw_initial_trust, BetaSpec, EnvConfig, EnvVariant, TrustEnv};
use crate::error::{invalid, Error, Result};
use crate::graph::{form_network, CommunityGraph, FormationConfig, DEFAULT_NODES};
use crate::policy::Policy;
use crate::reward::{realized_utility, OrgConfig};
use crate::seed::{mix64, rng_from_seed, substream};
use crate::trust::{gini, run_ground_truth, CitizenState, EvalMode, RolloutConfig, Trajectory, TrustParams};

/// Environment variable bounding the number of concurrently running cells.
pub const WORKERS_ENV: &str = "TRUSTSIM_WORKERS";

/// A full sweep description, loadable from JSON or TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub c_values: Vec<f64>,
    pub priors: Vec<BetaSpec>,
    pub variants: Vec<EnvVariant>,
    pub quota: bool,
    pub repetitions: usize,
    pub eval_mode: EvalMode,
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "I")]
    pub horizon: usize,
    /// Budget, service threshold and quota fraction; `c` and the quota flag
    /// are set per cell.
    pub org: OrgConfig,
    pub trust: TrustParams,
    /// Coefficients for the per-run network; the seed is set per run.
    pub formation: FormationConfig,
    /// Learner settings; the seed is set per run.
    pub ddpg: DdpgConfig,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            c_values: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            priors: [(2.0, 8.0), (2.0, 6.0), (2.0, 4.0), (2.0, 2.0), (4.0, 2.0), (6.0, 2.0), (8.0, 2.0)]
                .iter()
                .map(|&(a, b)| BetaSpec { a, b })
                .collect(),
            variants: EnvVariant::ALL.to_vec(),
            quota: false,
            repetitions: 5,
            eval_mode: EvalMode::Static,
            seed: 0,
            n: DEFAULT_NODES,
            horizon: 25,
            org: OrgConfig::default(),
            trust: TrustParams::default(),
            formation: FormationConfig::default(),
            ddpg: DdpgConfig::default(),
        }
    }
}

/// Grid position of one run, by index into the spec's lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellCoord {
    pub variant: EnvVariant,
    pub c_index: usize,
    pub prior_index: usize,
    pub rep: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let cfg = |msg: String| Err(Error::Config(msg));
        if self.c_values.is_empty() {
            return cfg("c_values: must not be empty".into());
        }
        if let Some(c) = self.c_values.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return cfg(format!("c_values: {c} lies outside [0,1]"));
        }
        if self.priors.is_empty() {
            return cfg("priors: must not be empty".into());
        }
        if self.variants.is_empty() {
            return cfg("variants: must not be empty".into());
        }
        if self.repetitions == 0 {
            return cfg("repetitions: must be at least 1".into());
        }
        if self.n == 0 {
            return cfg("n: must be at least 1".into());
        }
        if self.horizon == 0 {
            return cfg("I: must be at least 1".into());
        }
        // seeds pack indices into fixed-width fields
        if self.c_values.len() > 1 << 16 || self.priors.len() > 1 << 16 || self.repetitions > 1 << 24 {
            return cfg("grid too large".into());
        }
        let wrap = |field: &str, e: Error| Error::Config(format!("{field}: {e}"));
        self.org.validate().map_err(|e| wrap("org", e))?;
        self.trust.validate().map_err(|e| wrap("trust", e))?;
        self.ddpg.validate().map_err(|e| wrap("ddpg", e))?;
        Ok(())
    }

    /// Parses a spec from JSON, or TOML when `toml` is set. Errors name the
    /// offending field.
    pub fn parse(text: &str, toml: bool) -> Result<Self> {
        let spec: GridSpec = if toml {
            let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
            serde_path_to_error::deserialize(de).map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?
        } else {
            let mut de = serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Config(format!("{}: {}", e.path(), e.inner())))?
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Loads a spec; `.toml` files are read as TOML, anything else as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        Self::parse(&text, is_toml)
    }

    /// Every run of the grid in canonical order: variant, c, prior, rep.
    pub fn coords(&self) -> Vec<CellCoord> {
        let mut out = Vec::new();
        for &variant in &self.variants {
            for c_index in 0..self.c_values.len() {
                for prior_index in 0..self.priors.len() {
                    for rep in 0..self.repetitions {
                        out.push(CellCoord {
                            variant,
                            c_index,
                            prior_index,
                            rep,
                        });
                    }
                }
            }
        }
        out
    }

    /// Child seed of a run. Indices are packed into disjoint bit fields and
    /// passed through a bijective mixer, so distinct coordinates never share
    /// a seed.
    pub fn child_seed(&self, at: CellCoord) -> u64 {
        let packed = (at.variant.id() << 56) | ((at.c_index as u64) << 40) | ((at.prior_index as u64) << 24) | at.rep as u64;
        mix64(packed ^ mix64(self.seed))
    }

    fn org_for(&self, c: f64) -> OrgConfig {
        OrgConfig {
            c,
            quota_enabled: self.quota,
            ..self.org.clone()
        }
    }
}

/// Metrics of one trained-and-evaluated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub variant: EnvVariant,
    pub c: f64,
    pub prior: BetaSpec,
    pub rep: usize,
    pub seed: u64,
    /// Mean per-step realized utility over the evaluation rollout.
    pub org_utility: f64,
    /// `1 − gini` of the final utilities.
    pub fairness: f64,
    /// Mean final trust.
    pub avg_trust: f64,
    /// The evaluation rollout; absent when read back from CSV.
    pub trajectory: Option<Trajectory>,
}

/// Evaluation metrics of a finished rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub org_utility: f64,
    pub fairness: f64,
    pub avg_trust: f64,
}

impl Metrics {
    pub fn of(traj: &Trajectory, org: &OrgConfig) -> Result<Self> {
        if traj.records.is_empty() {
            return Err(invalid("cannot score an empty rollout"));
        }
        let total: f64 = traj.records.iter().map(|r| realized_utility(&r.util, &r.s, org)).sum();
        Ok(Self {
            org_utility: total / traj.records.len() as f64,
            fairness: 1.0 - gini(&traj.final_state.util)?,
            avg_trust: traj.final_state.mean_trust(),
        })
    }
}

/// Seeds of the per-run random streams, derived from the child seed.
mod streams {
    pub const NETWORK: u64 = 1;
    pub const ENV: u64 = 2;
    pub const LEARNER: u64 = 3;
    pub const EVAL_TRUST: u64 = 4;
    pub const EVAL_ROLLOUT: u64 = 5;
}

struct CellSetup {
    c: f64,
    prior: BetaSpec,
    seed: u64,
    label: String,
    graph: CommunityGraph,
    org: OrgConfig,
}

impl CellSetup {
    fn new(spec: &GridSpec, at: CellCoord) -> Result<Self> {
        let c = *spec
            .c_values
            .get(at.c_index)
            .ok_or_else(|| invalid(format!("c index {} out of range", at.c_index)))?;
        let prior = *spec
            .priors
            .get(at.prior_index)
            .ok_or_else(|| invalid(format!("prior index {} out of range", at.prior_index)))?;
        let seed = spec.child_seed(at);
        let label = format!("{} c={c} prior=({},{}) rep={}", at.variant, prior.a, prior.b, at.rep);
        let formation = FormationConfig {
            seed: substream(seed, streams::NETWORK),
            ..spec.formation.clone()
        };
        let graph = form_network(&formation, spec.n).map_err(|e| with_cell(&label, e))?;
        Ok(Self {
            c,
            prior,
            seed,
            label,
            graph,
            org: spec.org_for(c),
        })
    }

    fn evaluate(&self, spec: &GridSpec, at: CellCoord, policy: &mut dyn Policy) -> Result<RunResult> {
        let mut run = || -> Result<RunResult> {
            let tau = draw_initial_trust(&self.prior, spec.n, &mut rng_from_seed(substream(self.seed, streams::EVAL_TRUST)))?;
            let rollout = RolloutConfig {
                iterations: spec.horizon,
                mode: spec.eval_mode,
                params: spec.trust,
                rho: self.org.rho,
            };
            let mut rng = rng_from_seed(substream(self.seed, streams::EVAL_ROLLOUT));
            let traj = run_ground_truth(&self.graph, &CitizenState::new(tau)?, policy, &rollout, &mut rng)?;
            let m = Metrics::of(&traj, &self.org)?;
            Ok(RunResult {
                variant: at.variant,
                c: self.c,
                prior: self.prior,
                rep: at.rep,
                seed: self.seed,
                org_utility: m.org_utility,
                fairness: m.fairness,
                avg_trust: m.avg_trust,
                trajectory: Some(traj),
            })
        };
        run().map_err(|e| with_cell(&self.label, e))
    }
}

fn with_cell(label: &str, e: Error) -> Error {
    Error::Cell {
        cell: label.to_string(),
        source: Box::new(e),
    }
}

/// Trains a policy on a fresh network and evaluates it under the
/// ground-truth dynamics on a fresh trust draw.
pub fn run_cell(spec: &GridSpec, at: CellCoord) -> Result<RunResult> {
    let mut policy = train_cell(spec, at)?;
    CellSetup::new(spec, at)?.evaluate(spec, at, &mut policy)
}

/// Trains the policy of one run without evaluating it.
pub fn train_cell(spec: &GridSpec, at: CellCoord) -> Result<PolicyHandle> {
    let setup = CellSetup::new(spec, at)?;
    let env_cfg = EnvConfig {
        horizon: spec.horizon,
        trust_params: spec.trust,
        seed: substream(setup.seed, streams::ENV),
        ..EnvConfig::new(at.variant, spec.n, setup.prior, setup.org.clone())
    };
    let ddpg = DdpgConfig {
        seed: substream(setup.seed, streams::LEARNER),
        ..spec.ddpg.clone()
    };
    let train_run = || -> Result<PolicyHandle> {
        let mut env = TrustEnv::new(env_cfg, setup.graph.clone())?;
        Ok(train(&mut env, &ddpg)?.0)
    };
    train_run().map_err(|e| with_cell(&setup.label, e))
}

/// The network a run trains and evaluates on.
pub fn cell_graph(spec: &GridSpec, at: CellCoord) -> Result<CommunityGraph> {
    Ok(CellSetup::new(spec, at)?.graph)
}

/// Evaluates a fixed policy exactly as [`run_cell`] evaluates a trained one:
/// same network, trust draw and acceptance stream.
pub fn evaluate_cell(spec: &GridSpec, at: CellCoord, policy: &mut dyn Policy) -> Result<RunResult> {
    CellSetup::new(spec, at)?.evaluate(spec, at, policy)
}

/// A run that failed, with its coordinates.
#[derive(Debug)]
pub struct CellFailure {
    pub coord: CellCoord,
    pub error: Error,
}

/// Everything a sweep produced.
#[derive(Debug)]
pub struct SweepOutput {
    /// Successful runs in canonical grid order.
    pub runs: Vec<RunResult>,
    pub failures: Vec<CellFailure>,
    pub grid: GridResult,
}

/// Worker count from [`WORKERS_ENV`], defaulting to the available cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every cell and repetition on a bounded worker pool. Failed runs are
/// collected rather than aborting the sweep.
pub fn run_grid(spec: &GridSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let coords = spec.coords();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| invalid(format!("worker pool: {e}")))?;
    let results: Vec<Result<RunResult>> = pool.install(|| coords.par_iter().map(|&at| run_cell(spec, at)).collect());
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (coord, r) in coords.into_iter().zip(results) {
        match r {
            Ok(run) => runs.push(run),
            Err(error) => failures.push(CellFailure { coord, error }),
        }
    }
    let grid = GridResult::aggregate(&runs);
    Ok(SweepOutput { runs, failures, grid })
}

/// Mean and standard error of one metric over repetitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over `√count`; zero for a single run.
    pub stderr: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let stderr = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        };
        Self { mean, stderr }
    }
}

/// Aggregated metrics of one (variant, c, prior) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    /// Variant name, or `a-b` for a difference grid.
    pub variant: String,
    pub c: f64,
    pub prior: BetaSpec,
    pub org_utility: Summary,
    pub fairness: Summary,
    pub avg_trust: Summary,
}

impl CellSummary {
    pub fn metric(&self, name: &str) -> Result<Summary> {
        match name {
            "org_utility" => Ok(self.org_utility),
            "fairness" => Ok(self.fairness),
            "avg_trust" => Ok(self.avg_trust),
            other => Err(invalid(format!(
                "unknown metric '{other}' (expected org_utility, fairness or avg_trust)"
            ))),
        }
    }
}

pub const METRICS: [&str; 3] = ["org_utility", "fairness", "avg_trust"];

/// Cell summaries in first-seen order of their runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridResult {
    pub cells: Vec<CellSummary>,
}

type CellKey = (String, u64, u64, u64);

fn key(variant: &str, c: f64, prior: BetaSpec) -> CellKey {
    (variant.to_string(), c.to_bits(), prior.a.to_bits(), prior.b.to_bits())
}

impl GridResult {
    pub fn aggregate(runs: &[RunResult]) -> Self {
        let mut order: Vec<CellKey> = Vec::new();
        let mut groups: BTreeMap<CellKey, Vec<&RunResult>> = BTreeMap::new();
        for r in runs {
            let k = key(r.variant.name(), r.c, r.prior);
            let entry = groups.entry(k.clone()).or_default();
            if entry.is_empty() {
                order.push(k);
            }
            entry.push(r);
        }
        let cells = order
            .iter()
            .map(|k| {
                let rs = &groups[k];
                let col = |f: fn(&RunResult) -> f64| Summary::of(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
                CellSummary {
                    variant: k.0.clone(),
                    c: rs[0].c,
                    prior: rs[0].prior,
                    org_utility: col(|r| r.org_utility),
                    fairness: col(|r| r.fairness),
                    avg_trust: col(|r| r.avg_trust),
                }
            })
            .collect();
        Self { cells }
    }

    pub fn get(&self, variant: &str, c: f64, prior: BetaSpec) -> Option<&CellSummary> {
        let k = key(variant, c, prior);
        self.cells.iter().find(|cell| key(&cell.variant, cell.c, cell.prior) == k)
    }

    pub fn variants(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for cell in &self.cells {
            if !out.contains(&cell.variant) {
                out.push(cell.variant.clone());
            }
        }
        out
    }

    /// The cells of a single variant.
    pub fn select(&self, variant: &str) -> Result<GridResult> {
        let cells: Vec<CellSummary> = self.cells.iter().filter(|c| c.variant == variant).cloned().collect();
        if cells.is_empty() {
            return Err(Error::GridMismatch(format!("grid has no cells for variant '{variant}'")));
        }
        Ok(Self { cells })
    }
}

/// Cellwise `a − b` for grids over the same (c, prior) coordinates, each
/// holding a single variant. Standard errors combine in quadrature.
pub fn diff_grids(a: &GridResult, b: &GridResult) -> Result<GridResult> {
    let single = |g: &GridResult, which: &str| -> Result<String> {
        match g.variants().as_slice() {
            [v] => Ok(v.clone()),
            vs => Err(Error::GridMismatch(format!(
                "grid {which} must hold exactly one variant, found {}",
                vs.len()
            ))),
        }
    };
    let (va, vb) = (single(a, "a")?, single(b, "b")?);
    if a.cells.len() != b.cells.len() {
        return Err(Error::GridMismatch(format!(
            "grids have {} and {} cells",
            a.cells.len(),
            b.cells.len()
        )));
    }
    let sub = |x: Summary, y: Summary| Summary {
        mean: x.mean - y.mean,
        stderr: x.stderr.hypot(y.stderr),
    };
    let label = format!("{va}-{vb}");
    let cells = a
        .cells
        .iter()
        .map(|ca| {
            let cb = b.get(&vb, ca.c, ca.prior).ok_or_else(|| {
                Error::GridMismatch(format!("grid b has no cell at c={} prior=({},{})", ca.c, ca.prior.a, ca.prior.b))
            })?;
            Ok(CellSummary {
                variant: label.clone(),
                c: ca.c,
                prior: ca.prior,
                org_utility: sub(ca.org_utility, cb.org_utility),
                fairness: sub(ca.fairness, cb.fairness),
                avg_trust: sub(ca.avg_trust, cb.avg_trust),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridResult { cells })
}

pub const RUN_COLUMNS: [&str; 10] = [
    "variant",
    "c",
    "prior_a",
    "prior_b",
    "prior_mean",
    "rep",
    "seed",
    "org_utility",
    "fairness",
    "avg_trust",
];

pub const AGGREGATE_COLUMNS: [&str; 11] = [
    "variant",
    "c",
    "prior_a",
    "prior_b",
    "prior_mean",
    "org_utility_mean",
    "org_utility_stderr",
    "fairness_mean",
    "fairness_stderr",
    "avg_trust_mean",
    "avg_trust_stderr",
];

// Floats are written in shortest round-trip form, so reading back is exact
// and reruns are byte-identical.
fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_runs<W: Write>(runs: &[RunResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUN_COLUMNS)?;
    for r in runs {
        w.write_record([
            r.variant.name().to_string(),
            num(r.c),
            num(r.prior.a),
            num(r.prior.b),
            num(r.prior.mean()),
            r.rep.to_string(),
            r.seed.to_string(),
            num(r.org_utility),
            num(r.fairness),
            num(r.avg_trust),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grid<W: Write>(grid: &GridResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_COLUMNS)?;
    for cell in &grid.cells {
        w.write_record([
            cell.variant.clone(),
            num(cell.c),
            num(cell.prior.a),
            num(cell.prior.b),
            num(cell.prior.mean()),
            num(cell.org_utility.mean),
            num(cell.org_utility.stderr),
            num(cell.fairness.mean),
            num(cell.fairness.stderr),
            num(cell.avg_trust.mean),
            num(cell.avg_trust.stderr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV whose header must contain `required`; yields one
/// column-name-to-value lookup per data row.
struct Table {
    path: PathBuf,
    columns: Vec<usize>,
    rows: Vec<(usize, csv::StringRecord)>,
    names: Vec<&'static str>,
}

impl Table {
    fn read<R: Read>(input: R, path: &Path, required: &[&'static str]) -> Result<Self> {
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr.headers().map_err(|e| malformed(format!("header: {e}")))?.clone();
        let mut columns = Vec::with_capacity(required.len());
        for name in required {
            let idx = header
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| malformed(format!("missing column '{name}'")))?;
            columns.push(idx);
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            // row 1 is the header
            let line = i + 2;
            let rec = rec.map_err(|e| malformed(format!("row {line}: {e}")))?;
            rows.push((line, rec));
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
            rows,
            names: required.to_vec(),
        })
    }

    fn field<'a>(&self, rec: &'a csv::StringRecord, line: usize, col: usize) -> Result<&'a str> {
        rec.get(self.columns[col]).map(str::trim).ok_or_else(|| Error::Malformed {
            path: self.path.clone(),
            message: format!("row {line}, column '{}': missing value", self.names[col]),
        })
    }

    fn parse<T: std::str::FromStr>(&self, rec: &csv::StringRecord, line: usize, col: usize) -> Result<T> {
        let raw = self.field(rec, line, col)?;
        raw.parse().map_err(|_| Error::Malformed {
            path: self.path.clone(),
            message: format!("row {line}, column '{}': cannot parse '{raw}'", self.names[col]),
        })
    }

    fn prior(&self, rec: &csv::StringRecord, line: usize, a_col: usize) -> Result<BetaSpec> {
        BetaSpec::new(self.parse(rec, line, a_col)?, self.parse(rec, line, a_col + 1)?).map_err(|e| Error::Malformed {
            path: self.path.clone(),
            message: format!("row {line}: {e}"),
        })
    }
}

pub fn read_runs<R: Read>(input: R, path: &Path) -> Result<Vec<RunResult>> {
    let t = Table::read(input, path, &RUN_COLUMNS)?;
    t.rows
        .iter()
        .map(|(line, rec)| {
            let variant: EnvVariant = t.field(rec, *line, 0)?.parse().map_err(|e: Error| Error::Malformed {
                path: path.to_path_buf(),
                message: format!("row {line}, column 'variant': {e}"),
            })?;
            Ok(RunResult {
                variant,
                c: t.parse(rec, *line, 1)?,
                prior: t.prior(rec, *line, 2)?,
                rep: t.parse(rec, *line, 5)?,
                seed: t.parse(rec, *line, 6)?,
                org_utility: t.parse(rec, *line, 7)?,
                fairness: t.parse(rec, *line, 8)?,
                avg_trust: t.parse(rec, *line, 9)?,
                trajectory: None,
            })
        })
        .collect()
}

pub fn read_grid<R: Read>(input: R, path: &Path) -> Result<GridResult> {
    let t = Table::read(input, path, &AGGREGATE_COLUMNS)?;
    let cells = t
        .rows
        .iter()
        .map(|(line, rec)| {
            let s = |m: usize| -> Result<Summary> {
                Ok(Summary {
                    mean: t.parse(rec, *line, m)?,
                    stderr: t.parse(rec, *line, m + 1)?,
                })
            };
            Ok(CellSummary {
                variant: t.field(rec, *line, 0)?.to_string(),
                c: t.parse(rec, *line, 1)?,
                prior: t.prior(rec, *line, 2)?,
                org_utility: s(5)?,
                fairness: s(7)?,
                avg_trust: s(9)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridResult { cells })
}

pub fn load_grid(path: &Path) -> Result<GridResult> {
    read_grid(fs::File::open(path)?, path)
}

pub fn load_runs(path: &Path) -> Result<Vec<RunResult>> {
    read_runs(fs::File::open(path)?, path)
}

pub fn save_grid(grid: &GridResult, path: &Path) -> Result<()> {
    write_grid(grid, fs::File::create(path)?)
}

pub fn save_runs(runs: &[RunResult], path: &Path) -> Result<()> {
    write_runs(runs, fs::File::create(path)?)
}
