//! Command-line driver: `extend`, `fuzz`, `check`, `measures` and `gen`.
//!
//! Reports are JSON documents with a `schema_version`, a `timestamp`, the
//! run configuration and a result body, or CSV with one row per report
//! (per property for `check`). Exit codes: 0 success, 1 input or
//! configuration error, 2 failed assertion.

pub mod suites;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::channels::default_swivel_grid;
use crate::conjectures::{
    archive_witness, search_counterexample, InequalityId, InstanceForm, MapVariant, SearchConfig, SearchStatus,
    SearchSummary,
};
use crate::error::{Error, Result};
use crate::extend::{build_k_extension, separable_distance_bound, ExtensionReport, ExtensionStrategy, SeparabilityCertificate};
use crate::io::{load_state, save_state, state_to_string};
use crate::measures::{
    bipartite_rank, entanglement_of_formation_with, separable_from_formation, squashed_entanglement_upper_bound_seeded,
    Decomposition, EstimateKind, OptimizerConfig, Witness,
};
use crate::rng::trial_seed;
use crate::states::{
    antisymmetric_state, named_state, quantum_markov_chain, random_state, Ensemble, MarkovBlock, MultipartiteState,
    NamedState, StateEnsembleSpec,
};
use suites::{run_suite, Suite, SuiteReport};

pub const SCHEMA_VERSION: u32 = 1;

/// Default `--tol symmetry` for `extend`.
pub const SYMMETRY_TOL: f64 = 1e-8;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ASSERTION: i32 = 2;

#[derive(Parser, Debug, Clone)]
#[command(name = "qrecover", version, about = "Recovery maps, k-extensions and entanglement bounds")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Base seed. Trial i runs on a seed derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated subsystem dimensions.
    #[arg(long, global = true, value_delimiter = ',')]
    pub dims: Vec<usize>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, global = true, env = "QRECOVER_THREADS")]
    pub threads: Option<usize>,
    /// Tolerance override `name=value`, repeatable.
    #[arg(long = "tol", global = true, value_parser = parse_tol)]
    pub tol: Vec<(String, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Build a symmetric k-extension by iterated recovery.
    Extend(ExtendArgs),
    /// Search for violations of a recovery inequality.
    Fuzz(FuzzArgs),
    /// Run an invariant suite.
    Check(CheckArgs),
    /// Estimate an entanglement measure.
    Measures(MeasuresArgs),
    /// Write state fixtures.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Extend,
    Fuzz,
    Check,
    Measures,
    Gen,
}

#[derive(Args, Debug, Clone, Default)]
pub struct StateSource {
    /// State document to read.
    #[arg(long, conflicts_with_all = ["named", "ensemble"])]
    pub state: Option<PathBuf>,
    /// bell, ghz:N, mixed:D, copy:D, alpha:D, antisym:D:N or markov.
    #[arg(long, conflicts_with = "ensemble")]
    pub named: Option<String>,
    /// hs, haar, bures or rank:R, drawn with --dims and --seed.
    #[arg(long)]
    pub ensemble: Option<String>,
    /// Relabel the subsystems.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ExtendArgs {
    #[command(flatten)]
    pub source: StateSource,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Swivel grid; the default grid when absent.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub grid: Vec<f64>,
    /// `A` side label (first subsystem by default).
    #[arg(long)]
    pub a: Option<String>,
    /// `B` side label (last subsystem by default). Any other subsystem is the extension.
    #[arg(long)]
    pub b: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct FuzzArgs {
    #[arg(long, default_value = "theorem5_quantum", value_parser = parse_from_str::<InequalityId>)]
    pub inequality: InequalityId,
    /// petz_t0, best_scan or swivelled(t).
    #[arg(long = "map", default_value = "petz_t0", value_parser = parse_from_str::<MapVariant>)]
    pub map_variant: MapVariant,
    #[arg(long, default_value_t = 200)]
    pub refine_steps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub scale: f64,
    /// Diagonal states and classical channels only.
    #[arg(long)]
    pub classical: bool,
    #[arg(long, default_value = "hs")]
    pub ensemble: String,
    #[arg(long, default_value_t = 10)]
    pub keep_worst: usize,
    /// Directory for violation witnesses.
    #[arg(long)]
    pub archive: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    #[arg(value_enum)]
    pub suite: Suite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Measure {
    Eof,
    EsqUb,
}

#[derive(Args, Debug, Clone)]
pub struct MeasuresArgs {
    #[command(flatten)]
    pub source: StateSource,
    #[arg(long, value_enum)]
    pub measure: Measure,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    /// Environment dimension for esq_ub (rank of the state by default).
    #[arg(long)]
    pub env_dim: Option<usize>,
    /// Decomposition size for eof (|A||B| by default, at least the rank).
    #[arg(long)]
    pub ensemble_size: Option<usize>,
    #[arg(long)]
    pub a: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    /// Where to write the witness (decomposition or extension).
    #[arg(long)]
    pub witness: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[command(flatten)]
    pub source: StateSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub seed: u64,
    pub dims: Vec<usize>,
    pub trials: Option<usize>,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    /// RFC 3339, the only field that varies between identical runs.
    pub timestamp: String,
    pub config: RunConfig,
    pub result: ReportBody,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportBody {
    Extend(ExtendBody),
    Fuzz(FuzzBody),
    Check(SuiteReport),
    Measures(MeasuresBody),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendBody {
    pub source: String,
    pub a: String,
    pub b: String,
    pub report: ExtensionReport,
    pub certificate: SeparabilityCertificate,
    pub symmetry_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzBody {
    pub inequality: InequalityId,
    pub map_variant: MapVariant,
    pub search: SearchConfig,
    pub summary: SearchSummary,
    pub archived: Vec<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableSummary {
    pub distance: f64,
    pub bound: f64,
    pub epsilon: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuresBody {
    pub source: String,
    pub measure: Measure,
    pub a: String,
    pub b: String,
    pub value: f64,
    pub kind: EstimateKind,
    pub restarts: usize,
    pub steps: usize,
    pub converged: bool,
    /// Environment dimension (esq_ub) or decomposition size (eof).
    pub size: usize,
    pub witness_file: Option<PathBuf>,
    /// Separable state built from the formation witness (eof only).
    pub separable: Option<SeparableSummary>,
}

/// Pure-state decomposition written by `measures --witness`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionDocument {
    pub version: u32,
    pub labels: Vec<String>,
    pub dims: Vec<usize>,
    /// The first `split` subsystems are the `A` side.
    pub split: usize,
    pub probs: Vec<f64>,
    /// `[re, im]` amplitudes, row-major.
    pub kets: Vec<Vec<[f64; 2]>>,
}

impl DecompositionDocument {
    pub fn from_decomposition(dec: &Decomposition) -> Self {
        DecompositionDocument {
            version: 1,
            labels: dec.layout.labels().to_vec(),
            dims: dec.layout.dims().to_vec(),
            split: dec.split,
            probs: dec.probs.clone(),
            kets: dec.kets.iter().map(|k| k.iter().map(|z| [z.re, z.im]).collect()).collect(),
        }
    }
}

/// Parses a report and checks its schema version.
pub fn parse_report(text: &str) -> Result<ReportDocument> {
    let doc: ReportDocument = serde_json::from_str(text)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    Ok(doc)
}

pub fn report_to_json(doc: &ReportDocument) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

fn parse_tol(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    if !(v >= 0.0) {
        return Err(format!("tolerance `{k}` must be nonnegative"));
    }
    Ok((k.trim().to_string(), v))
}

fn parse_from_str<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn parse_ensemble(s: &str) -> Result<Ensemble> {
    let key = s.to_ascii_lowercase();
    Ok(match key.as_str() {
        "hs" | "hilbert_schmidt" | "hilbert_schmidt_mixed" => Ensemble::HilbertSchmidtMixed,
        "haar" | "pure" | "haar_pure" => Ensemble::HaarPure,
        "bures" | "bures_mixed" => Ensemble::BuresMixed,
        _ => match key.strip_prefix("rank:").map(str::parse::<usize>) {
            Some(Ok(r)) if r > 0 => Ensemble::RankLimited(r),
            _ => return Err(Error::InvalidArgument(format!("unknown ensemble `{s}`"))),
        },
    })
}

fn number(arg: Option<&str>, spec: &str) -> Result<usize> {
    arg.and_then(|a| a.parse().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("fixture `{spec}` needs a positive integer argument")))
}

/// Named fixtures; `markov` draws two random blocks from `seed`.
pub fn named_fixture(spec: &str, seed: u64) -> Result<MultipartiteState> {
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or_default().to_ascii_lowercase();
    let (x, y) = (parts.next(), parts.next());
    match name.as_str() {
        "bell" => named_state(NamedState::Bell),
        "ghz" => named_state(NamedState::Ghz(number(x, spec)?)),
        "mixed" => named_state(NamedState::MaximallyMixed(number(x, spec)?)),
        "copy" => named_state(NamedState::ClassicalCopy(number(x, spec)?)),
        "alpha" => antisymmetric_state(number(x, spec)?, 2),
        "antisym" => antisymmetric_state(number(x, spec)?, number(y, spec)?),
        "markov" => {
            let pair = |i: u64| {
                random_state(&StateEnsembleSpec::new(
                    Ensemble::HilbertSchmidtMixed,
                    &[2, 2],
                    trial_seed(seed, i),
                ))
            };
            let blocks = vec![
                MarkovBlock {
                    weight: 0.4,
                    left: pair(0)?,
                    right: pair(1)?,
                },
                MarkovBlock {
                    weight: 0.6,
                    left: pair(2)?,
                    right: pair(3)?,
                },
            ];
            quantum_markov_chain(&blocks)
        }
        _ => Err(Error::InvalidArgument(format!("unknown fixture `{spec}`"))),
    }
}

impl StateSource {
    fn describe(&self, common: &Common) -> String {
        if let Some(p) = &self.state {
            format!("file:{}", p.display())
        } else if let Some(n) = &self.named {
            format!("named:{n}")
        } else if let Some(e) = &self.ensemble {
            format!(
                "ensemble:{e}:{}:{}",
                common.dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("x"),
                common.seed
            )
        } else {
            "none".into()
        }
    }

    fn load(&self, common: &Common, seed: u64) -> Result<MultipartiteState> {
        let state = if let Some(p) = &self.state {
            load_state(p)?
        } else if let Some(n) = &self.named {
            named_fixture(n, seed)?
        } else if let Some(e) = &self.ensemble {
            if common.dims.is_empty() {
                return Err(Error::InvalidArgument("--ensemble needs --dims".into()));
            }
            random_state(&StateEnsembleSpec::new(parse_ensemble(e)?, &common.dims, seed))?
        } else {
            return Err(Error::InvalidArgument("give one of --state, --named or --ensemble".into()));
        };
        if self.labels.is_empty() {
            Ok(state)
        } else {
            state.relabel(&self.labels)
        }
    }
}

/// Default sides: `a` is the first subsystem, `b` the last.
fn sides(state: &MultipartiteState, a: &Option<String>, b: &Option<String>) -> Result<(String, String)> {
    let labels = state.labels();
    if labels.len() < 2 {
        return Err(Error::InvalidArgument("a bipartite split needs at least two subsystems".into()));
    }
    let a = a.clone().unwrap_or_else(|| labels[0].clone());
    let b = b.clone().unwrap_or_else(|| labels[labels.len() - 1].clone());
    if a == b {
        return Err(Error::OverlappingLabels(a));
    }
    Ok((a, b))
}

/// What a command produced: the text to emit and the exit code.
pub struct Outcome {
    pub text: String,
    pub code: i32,
}

/// Runs the driver on `args` (program name first) with the process streams.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_INPUT;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let written = match &cli.common.out {
                Some(path) if !matches!(cli.command, Command::Gen(_)) => std::fs::write(path, &outcome.text),
                _ => stdout.write_all(outcome.text.as_bytes()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_INPUT;
            }
            outcome.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}

/// Runs the parsed command inside a pool sized by `--threads`.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli))
}

/// `known = None` defers validation to the command.
fn tolerances(common: &Common, known: Option<&[&str]>) -> Result<BTreeMap<String, f64>> {
    let map: BTreeMap<String, f64> = common.tol.iter().cloned().collect();
    let Some(known) = known else { return Ok(map) };
    if let Some(bad) = map.keys().find(|k| !known.contains(&k.as_str())) {
        return Err(Error::InvalidArgument(format!(
            "unknown tolerance `{bad}` (known: {})",
            known.join(", ")
        )));
    }
    Ok(map)
}

fn document(cli: &Cli, kind: CommandKind, tolerances: BTreeMap<String, f64>, result: ReportBody) -> ReportDocument {
    ReportDocument {
        schema_version: SCHEMA_VERSION,
        timestamp: humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string(),
        config: RunConfig {
            command: kind,
            seed: cli.common.seed,
            dims: cli.common.dims.clone(),
            trials: cli.common.trials,
            output_path: cli.common.out.clone(),
            format: cli.common.format,
            tolerances,
        },
        result,
    }
}

fn render(doc: &ReportDocument, format: Format) -> Result<String> {
    match format {
        Format::Json => report_to_json(doc),
        Format::Csv => Ok(to_csv(&doc.result)),
    }
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let common = &cli.common;
    if common.trials == Some(0) {
        return Err(Error::InvalidArgument("--trials must be at least 1".into()));
    }
    match &cli.command {
        Command::Extend(args) => {
            let tols = tolerances(common, Some(&["symmetry"]))?;
            let symmetry_tolerance = tols.get("symmetry").copied().unwrap_or(SYMMETRY_TOL);
            let state = args.source.load(common, common.seed)?;
            let (a, b) = sides(&state, &args.a, &args.b)?;
            let strategy = if state.labels().len() > 2 {
                ExtensionStrategy::Supplied(state.clone())
            } else {
                ExtensionStrategy::Purification
            };
            let grid = if args.grid.is_empty() {
                default_swivel_grid()
            } else {
                args.grid.clone()
            };
            let ext = build_k_extension(&state, &[a.as_str()], &[b.as_str()], args.k, &strategy, &grid)?;
            let dim_b = state.layout().dim_of(&b)?;
            let certificate = separable_distance_bound(&ext.report, dim_b);
            let failed = !ext.report.measured_bound_holds || !(ext.report.symmetry_residual <= symmetry_tolerance);
            let body = ExtendBody {
                source: args.source.describe(common),
                a,
                b,
                report: ext.report,
                certificate,
                symmetry_tolerance,
            };
            let doc = document(cli, CommandKind::Extend, tols, ReportBody::Extend(body));
            Ok(Outcome {
                text: render(&doc, common.format)?,
                code: if failed { EXIT_ASSERTION } else { EXIT_OK },
            })
        }
        Command::Fuzz(args) => {
            let tols = tolerances(common, Some(&["violation"]))?;
            let dims = if common.dims.is_empty() {
                vec![2, 2, 2]
            } else {
                common.dims.clone()
            };
            let mut search = SearchConfig::new(&dims, common.trials.unwrap_or(1000), common.seed);
            search.refine_steps = args.refine_steps;
            search.perturbation_scale = args.scale;
            search.ensemble = parse_ensemble(&args.ensemble)?;
            search.keep_worst = args.keep_worst;
            if let Some(t) = tols.get("violation") {
                search.tolerance = *t;
            }
            if args.classical {
                search = search.classical();
            }
            if dims.len() == 2 {
                search.form = InstanceForm::Triple;
            }
            let outcome = search_counterexample(args.inequality, args.map_variant, &search)?;
            let archived = match &args.archive {
                Some(dir) if outcome.summary.status != SearchStatus::Inconclusive => archive_witness(&outcome, dir)?,
                _ => Vec::new(),
            };
            let body = FuzzBody {
                inequality: args.inequality,
                map_variant: args.map_variant,
                search,
                summary: outcome.summary,
                archived,
            };
            let doc = document(cli, CommandKind::Fuzz, tols, ReportBody::Fuzz(body));
            Ok(Outcome {
                text: render(&doc, common.format)?,
                code: EXIT_OK,
            })
        }
        Command::Check(args) => {
            let tols = tolerances(common, None)?;
            let report = run_suite(args.suite, common.trials.unwrap_or(1000), common.seed, &tols)?;
            let code = if report.passed { EXIT_OK } else { EXIT_ASSERTION };
            let doc = document(cli, CommandKind::Check, tols, ReportBody::Check(report));
            Ok(Outcome {
                text: render(&doc, common.format)?,
                code,
            })
        }
        Command::Measures(args) => {
            let tols = tolerances(common, Some(&[]))?;
            let state = args.source.load(common, common.seed)?;
            let (a, b) = sides(&state, &args.a, &args.b)?;
            let (sa, sb) = ([a.as_str()], [b.as_str()]);
            let cfg = OptimizerConfig {
                seed: common.seed,
                restarts: args.restarts,
                steps: args.steps,
                ..OptimizerConfig::default()
            };
            let rank = bipartite_rank(&state, &sa, &sb)?;
            let (estimate, size) = match args.measure {
                Measure::Eof => {
                    let dim = state.layout().dim_of(&a)? * state.layout().dim_of(&b)?;
                    let size = args.ensemble_size.unwrap_or(rank.max(dim));
                    (entanglement_of_formation_with(&state, &sa, &sb, size, &cfg)?, size)
                }
                Measure::EsqUb => {
                    let size = args.env_dim.unwrap_or(rank);
                    (squashed_entanglement_upper_bound_seeded(&state, &sa, &sb, size, &cfg)?, size)
                }
            };
            let separable = match &estimate.witness {
                Witness::Decomposition(dec) => {
                    let s = separable_from_formation(&state, dec)?;
                    Some(SeparableSummary {
                        distance: s.distance,
                        bound: s.bound,
                        epsilon: s.epsilon,
                        holds: s.holds,
                    })
                }
                Witness::Extension(_) => None,
            };
            if let Some(path) = &args.witness {
                match &estimate.witness {
                    Witness::Decomposition(dec) => {
                        let mut text = serde_json::to_string_pretty(&DecompositionDocument::from_decomposition(dec))?;
                        text.push('\n');
                        std::fs::write(path, text)?;
                    }
                    Witness::Extension(ext) => save_state(ext, path)?,
                }
            }
            let body = MeasuresBody {
                source: args.source.describe(common),
                measure: args.measure,
                a,
                b,
                value: estimate.value,
                kind: estimate.kind,
                restarts: estimate.restarts,
                steps: args.steps,
                converged: estimate.converged,
                size,
                witness_file: args.witness.clone(),
                separable,
            };
            let doc = document(cli, CommandKind::Measures, tols, ReportBody::Measures(body));
            Ok(Outcome {
                text: render(&doc, common.format)?,
                code: EXIT_OK,
            })
        }
        Command::Gen(args) => gen(common, &args.source),
    }
}

/// One state to `--out` (or stdout); with `--trials n > 1` and an ensemble,
/// `state_{seed}.json` files in the `--out` directory.
fn gen(common: &Common, source: &StateSource) -> Result<Outcome> {
    if common.format == Format::Csv {
        return Err(Error::InvalidArgument("gen writes state documents; --format csv does not apply".into()));
    }
    let trials = common.trials.unwrap_or(1);
    if trials == 1 {
        let state = source.load(common, common.seed)?;
        return Ok(match &common.out {
            Some(path) => {
                save_state(&state, path)?;
                Outcome {
                    text: format!("{}\n", path.display()),
                    code: EXIT_OK,
                }
            }
            None => Outcome {
                text: state_to_string(&state),
                code: EXIT_OK,
            },
        });
    }
    if source.ensemble.is_none() && source.named.as_deref() != Some("markov") {
        return Err(Error::InvalidArgument("--trials > 1 needs a seeded source".into()));
    }
    let dir = common
        .out
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("--trials > 1 needs --out DIR".into()))?;
    std::fs::create_dir_all(dir)?;
    let mut text = String::new();
    for i in 0..trials as u64 {
        let seed = trial_seed(common.seed, i);
        let path = dir.join(format!("state_{seed}.json"));
        save_state(&source.load(common, seed)?, &path)?;
        let _ = writeln!(text, "{}", path.display());
    }
    Ok(Outcome { text, code: EXIT_OK })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Shortest round-trip form, exponent notation.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// One row per report, one per property for suites.
pub fn to_csv(body: &ReportBody) -> String {
    match body {
        ReportBody::Extend(b) => {
            let r = &b.report;
            csv_table(
                &[
                    "source", "a", "b", "k", "cmi_used", "swivel_t", "t_measured", "max_marginal_distance",
                    "measured_bound", "theorem_bound", "symmetry_residual", "measured_bound_holds",
                    "theorem_bound_holds", "certificate", "headline",
                ],
                vec![vec![
                    b.source.clone(),
                    b.a.clone(),
                    b.b.clone(),
                    r.k.to_string(),
                    num(r.cmi_used),
                    num(r.swivel_t),
                    num(r.t_measured),
                    num(r.max_marginal_distance()),
                    num(r.measured_bound),
                    num(r.theorem_bound),
                    num(r.symmetry_residual),
                    r.measured_bound_holds.to_string(),
                    r.theorem_bound_holds.to_string(),
                    num(b.certificate.certificate),
                    num(b.certificate.headline),
                ]],
            )
        }
        ReportBody::Fuzz(f) => {
            let s = &f.summary;
            let status = serde_json::to_value(s.status)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            csv_table(
                &[
                    "inequality", "map_variant", "status", "trials", "sampled_violations", "failed_trials",
                    "instance_seed", "lhs", "rhs", "gap", "ratio", "t_used", "tight_gap", "refine_accepted",
                ],
                vec![vec![
                    f.inequality.to_string(),
                    f.map_variant.to_string(),
                    status,
                    s.trials.to_string(),
                    s.sampled_violations.to_string(),
                    s.failed_trials.to_string(),
                    s.best.instance_seed.to_string(),
                    num(s.best.lhs),
                    num(s.best.rhs),
                    num(s.best.gap),
                    opt_num(s.best.ratio),
                    opt_num(s.best.t_used),
                    opt_num(s.tight_gap),
                    s.refine_accepted.to_string(),
                ]],
            )
        }
        ReportBody::Check(r) => csv_table(
            &[
                "suite", "property", "instances", "failures", "worst_deviation", "tolerance", "asserted",
                "first_failure_seed",
            ],
            r.properties
                .iter()
                .map(|p| {
                    vec![
                        serde_json::to_value(r.suite)
                            .ok()
                            .and_then(|v| v.as_str().map(str::to_string))
                            .unwrap_or_default(),
                        p.name.clone(),
                        p.instances.to_string(),
                        p.failures.to_string(),
                        num(p.worst_deviation),
                        num(p.tolerance),
                        p.asserted.to_string(),
                        opt(p.first_failure_seed),
                    ]
                })
                .collect(),
        ),
        ReportBody::Measures(m) => csv_table(
            &[
                "source", "measure", "a", "b", "value", "kind", "restarts", "steps", "converged", "size",
                "separable_distance", "separable_bound",
            ],
            vec![vec![
                m.source.clone(),
                match m.measure {
                    Measure::Eof => "eof".into(),
                    Measure::EsqUb => "esq_ub".into(),
                },
                m.a.clone(),
                m.b.clone(),
                num(m.value),
                match m.kind {
                    EstimateKind::UpperBound => "upper_bound".into(),
                    EstimateKind::HeuristicMin => "heuristic_min".into(),
                },
                m.restarts.to_string(),
                m.steps.to_string(),
                m.converged.to_string(),
                m.size.to_string(),
                opt_num(m.separable.as_ref().map(|s| s.distance)),
                opt_num(m.separable.as_ref().map(|s| s.bound)),
            ]],
        ),
    }
}

/// Replaces the timestamp so two reports can be compared byte for byte.
pub fn without_timestamp(text: &str) -> String {
    text.lines()
        .map(|l| {
            if l.trim_start().starts_with("\"timestamp\"") {
                "  \"timestamp\": \"\",".to_string()
            } else {
                l.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
