//! Experiment configuration, pipelines and output for the command-line
//! runner.
//!
//! A run is fully determined by its [`ExperimentConfig`], which includes the
//! seed. CSV output carries only data, so identical configs give
//! byte-identical files. Provenance (config hash, seed, library version)
//! travels in the JSON envelope or in a `.provenance.json` sidecar.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{
    check_ct_dt_lemma, check_lazy_square_lemma, check_success_prob_lemma, Kernel, Quadrature, VerificationReport,
    Verdict,
};
use crate::error::{invalid, Error, Result};
use crate::gaussian::AncillaGrid;
use crate::groundstate::{
    prepare, prepare_via_ancilla, random_problem, GroundStateProblem, GroundStateReport, Hypotheses,
    DEFAULT_PRECISION_CONSTANT,
};
use crate::markov::{hitting_time, make_lazy, GraphFamily, GraphSpec, MarkedSet, MarkovChain};
use crate::rng::{seeded, stream};
use crate::search::{
    scaling_experiment, GridSpacing, InterpolationSchedule, MarkedRule, ScalingRow, SearchInstance, SearchOptions,
    SCALING_COLUMNS,
};
use crate::spectral::{HermitianOperator, QuantumState};
use crate::stats::McEstimate;
use crate::walker::FULL_SPACE_CAP;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_VAR: &str = "CTQW_OUTPUT_DIR";
/// Tolerance-override keys understood by the runner.
pub const TOLERANCE_KEYS: [&str; 3] = ["cells_per_unit", "max_doublings", "precision_constant"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Search,
    Scaling,
    Verify,
    Fastforward,
    Groundstate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Search => "search",
            Command::Scaling => "scaling",
            Command::Verify => "verify",
            Command::Fastforward => "fastforward",
            Command::Groundstate => "groundstate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(invalid(format!("unknown output format '{other}'"))),
        }
    }
}

/// `"0,3"`, `"single"` (node 0) or `"fraction:ρ"`.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkedSpec {
    Nodes(Vec<usize>),
    Single,
    Fraction(f64),
}

impl FromStr for MarkedSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "single" {
            return Ok(MarkedSpec::Single);
        }
        if let Some(rho) = s.strip_prefix("fraction:") {
            let rho: f64 = rho.trim().parse().map_err(|_| invalid(format!("bad marked fraction '{rho}'")))?;
            return Ok(MarkedSpec::Fraction(rho));
        }
        let nodes = s
            .split(',')
            .map(|x| x.trim().parse::<usize>().map_err(|_| invalid(format!("bad marked node '{x}'"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(MarkedSpec::Nodes(nodes))
    }
}

impl fmt::Display for MarkedSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarkedSpec::Single => f.write_str("single"),
            MarkedSpec::Fraction(rho) => write!(f, "fraction:{rho}"),
            MarkedSpec::Nodes(nodes) => {
                let parts: Vec<String> = nodes.iter().map(|x| x.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl MarkedSpec {
    pub fn is_random(&self) -> bool {
        matches!(self, MarkedSpec::Fraction(_))
    }

    pub fn resolve<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<MarkedSet> {
        match self {
            MarkedSpec::Nodes(nodes) => MarkedSet::new(n, nodes.iter().copied()),
            MarkedSpec::Single => MarkedSet::single(n, 0),
            MarkedSpec::Fraction(rho) => MarkedRule::Fraction(*rho).choose(n, rng),
        }
    }

    pub fn rule(&self) -> Result<MarkedRule> {
        match self {
            MarkedSpec::Single => Ok(MarkedRule::Single),
            MarkedSpec::Fraction(rho) => Ok(MarkedRule::Fraction(*rho)),
            MarkedSpec::Nodes(_) => Err(invalid("scaling sweeps take 'single' or 'fraction:ρ' marked sets")),
        }
    }
}

/// Every knob of a run. Unset fields take the documented defaults; values
/// given on the command line replace values read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    /// `family:size`, e.g. `complete:16`.
    pub graph: Option<String>,
    /// Chain document (JSON) used instead of a generated graph.
    pub chain: Option<PathBuf>,
    /// Apply `(I + P)/2`; default true.
    pub lazy: Option<bool>,
    pub marked: Option<String>,
    pub c_t: Option<f64>,
    pub trials: Option<usize>,
    pub max_rounds: Option<usize>,
    pub seed: Option<u64>,
    /// Scaling sweep families and sizes.
    pub families: Option<Vec<GraphFamily>>,
    pub sizes: Option<Vec<usize>>,
    /// `success-prob`, `ct-dt`, `lazy-square` or `all`.
    pub lemma: Option<String>,
    /// Horizon `T`, a number or `auto`.
    pub horizon: Option<String>,
    pub s: Option<f64>,
    /// Compute exact full-space values where the size allows.
    pub exact: Option<bool>,
    /// Ground-state instance: a JSON file, or a random one of this dimension.
    pub input: Option<PathBuf>,
    pub dim: Option<usize>,
    pub overlap: Option<f64>,
    pub accuracy: Option<f64>,
    pub ancilla: Option<bool>,
    pub tolerances: BTreeMap<String, f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Fields set in `other` replace those in `self`; tolerance maps merge.
    pub fn overridden_by(mut self, other: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            command, graph, chain, lazy, marked, c_t, trials, max_rounds, seed, families, sizes, lemma, horizon, s,
            exact, input, dim, overlap, accuracy, ancilla, output, format
        );
        self.tolerances.extend(other.tolerances);
        self
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn command(&self) -> Result<Command> {
        self.command.ok_or_else(|| invalid("no subcommand given"))
    }

    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| invalid(format!("--seed is required for {}", self.command.map_or("this run", Command::name))))
    }

    fn marked_spec(&self) -> Result<MarkedSpec> {
        self.marked.as_deref().unwrap_or("single").parse()
    }

    fn c_t(&self) -> Result<f64> {
        let c = self.c_t.unwrap_or(3.0);
        if !(c > 0.0) {
            return Err(invalid(format!("c_T must be positive, got {c}")));
        }
        Ok(c)
    }

    fn tolerance(&self, key: &str) -> Option<f64> {
        self.tolerances.get(key).copied()
    }

    fn check_tolerances(&self) -> Result<()> {
        for key in self.tolerances.keys() {
            if !TOLERANCE_KEYS.contains(&key.as_str()) {
                return Err(invalid(format!(
                    "unknown tolerance '{key}'; known: {}",
                    TOLERANCE_KEYS.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn quadrature(&self) -> Result<Quadrature> {
        let d = Quadrature::default();
        Quadrature::new(
            self.tolerance("cells_per_unit").unwrap_or(d.cells_per_unit),
            self.tolerance("max_doublings").map_or(d.max_doublings, |v| v as u32),
        )
    }

    fn load_chain(&self) -> Result<MarkovChain> {
        let chain = match (&self.graph, &self.chain) {
            (Some(_), Some(_)) => return Err(invalid("give either --graph or --chain, not both")),
            (Some(g), None) => g.parse::<GraphSpec>()?.generate()?,
            (None, Some(path)) => MarkovChain::from_json(&fs::read_to_string(path)?)?,
            (None, None) => return Err(invalid("a graph (--graph family:size) or chain file is required")),
        };
        Ok(if self.lazy.unwrap_or(true) && !chain.is_lazy() { make_lazy(&chain) } else { chain })
    }

    fn graph_label(&self) -> String {
        match (&self.graph, &self.chain) {
            (Some(g), _) => g.clone(),
            (None, Some(p)) => p.display().to_string(),
            _ => String::new(),
        }
    }
}

/// Where a run came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: String,
    pub config: ExperimentConfig,
}

impl Provenance {
    pub fn of(config: &ExperimentConfig) -> Self {
        Self {
            command: config.command.map_or("", Command::name).to_string(),
            config_hash: config.hash(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
        }
    }
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

/// A row type with a fixed CSV column order.
pub trait Record: Serialize + DeserializeOwned {
    fn columns() -> &'static [&'static str];
    fn cells(&self) -> Vec<Cell>;
}

impl Record for ScalingRow {
    fn columns() -> &'static [&'static str] {
        &SCALING_COLUMNS
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Text(self.family.to_string()),
            Cell::Int(self.n as u64),
            Cell::Float(self.ht),
            Cell::Float(self.t),
            Cell::Int(self.s_grid_size as u64),
            Cell::Float(self.bound_mean),
            Cell::Float(self.quantum_time),
            Cell::Float(self.classical_time),
            Cell::Int(self.seed),
        ]
    }
}

impl Record for VerificationReport {
    fn columns() -> &'static [&'static str] {
        &["lemma", "instance", "lhs", "rhs", "margin", "error_budget", "verdict"]
    }

    fn cells(&self) -> Vec<Cell> {
        let verdict = match self.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        };
        vec![
            Cell::Text(self.lemma.clone()),
            Cell::Text(self.instance.clone()),
            Cell::Float(self.lhs),
            Cell::Float(self.rhs),
            Cell::Float(self.margin),
            Cell::Float(self.error_budget),
            Cell::Text(verdict.into()),
        ]
    }
}

impl Record for GroundStateReport {
    fn columns() -> &'static [&'static str] {
        &["delta", "eta", "epsilon", "epsilon_g", "t", "T", "success_prob", "achieved_error", "degenerate"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Float(self.delta),
            Cell::Float(self.eta),
            Cell::Float(self.epsilon),
            Cell::Float(self.epsilon_g),
            Cell::Float(self.t),
            Cell::Float(self.total_time),
            Cell::Float(self.success_prob),
            Cell::Float(self.achieved_error),
            Cell::Bool(self.degenerate),
        ]
    }
}

/// Summary of repeated searches on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSummary {
    pub graph: String,
    pub n: usize,
    pub marked_count: usize,
    pub marked_mass: f64,
    #[serde(rename = "HT")]
    pub ht: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub trials: usize,
    pub max_rounds: usize,
    pub successes: usize,
    pub success_frequency: f64,
    pub success_std_error: f64,
    pub mean_rounds: f64,
    pub mean_evolution_time: f64,
    pub seed: u64,
}

impl Record for SearchSummary {
    fn columns() -> &'static [&'static str] {
        &[
            "graph",
            "n",
            "marked_count",
            "marked_mass",
            "HT",
            "T",
            "trials",
            "max_rounds",
            "successes",
            "success_frequency",
            "success_std_error",
            "mean_rounds",
            "mean_evolution_time",
            "seed",
        ]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Text(self.graph.clone()),
            Cell::Int(self.n as u64),
            Cell::Int(self.marked_count as u64),
            Cell::Float(self.marked_mass),
            Cell::Float(self.ht),
            Cell::Float(self.t),
            Cell::Int(self.trials as u64),
            Cell::Int(self.max_rounds as u64),
            Cell::Int(self.successes as u64),
            Cell::Float(self.success_frequency),
            Cell::Float(self.success_std_error),
            Cell::Float(self.mean_rounds),
            Cell::Float(self.mean_evolution_time),
            Cell::Int(self.seed),
        ]
    }
}

/// Fast-forward bound, and optionally the exact walk value, at one `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastForwardRow {
    pub s: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub bound: f64,
    pub exact: Option<f64>,
}

impl Record for FastForwardRow {
    fn columns() -> &'static [&'static str] {
        &["s", "T", "bound", "exact"]
    }

    fn cells(&self) -> Vec<Cell> {
        vec![
            Cell::Float(self.s),
            Cell::Float(self.t),
            Cell::Float(self.bound),
            self.exact.map_or(Cell::Empty, Cell::Float),
        ]
    }
}

/// Header plus one line per record.
pub fn write_csv<R: Record, W: Write>(records: &[R], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(R::columns())?;
    for r in records {
        w.write_record(r.cells().iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EnvelopeRef<'a, T> {
    provenance: &'a Provenance,
    records: &'a [T],
}

#[derive(Deserialize)]
struct Envelope<T> {
    provenance: Provenance,
    records: Vec<T>,
}

/// `{"provenance": …, "records": [...]}`.
pub fn write_json<R: Record, W: Write>(records: &[R], provenance: &Provenance, mut writer: W) -> Result<()> {
    let envelope = EnvelopeRef { provenance, records };
    serde_json::to_writer_pretty(&mut writer, &envelope)?;
    writeln!(writer)?;
    Ok(())
}

/// Reads back what [`write_json`] wrote.
pub fn read_json<R: Record>(text: &str) -> Result<(Provenance, Vec<R>)> {
    let e: Envelope<R> = serde_json::from_str(text)?;
    Ok((e.provenance, e.records))
}

/// Records of any subcommand.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Search(Vec<SearchSummary>),
    Scaling(Vec<ScalingRow>),
    Verify(Vec<VerificationReport>),
    FastForward(Vec<FastForwardRow>),
    GroundState(Vec<GroundStateReport>),
}

impl Output {
    pub fn len(&self) -> usize {
        match self {
            Output::Search(r) => r.len(),
            Output::Scaling(r) => r.len(),
            Output::Verify(r) => r.len(),
            Output::FastForward(r) => r.len(),
            Output::GroundState(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write<W: Write>(&self, format: Format, provenance: &Provenance, w: W) -> Result<()> {
        macro_rules! dispatch {
            ($r:expr) => {
                match format {
                    Format::Csv => write_csv($r, w),
                    Format::Json => write_json($r, provenance, w),
                }
            };
        }
        match self {
            Output::Search(r) => dispatch!(r),
            Output::Scaling(r) => dispatch!(r),
            Output::Verify(r) => dispatch!(r),
            Output::FastForward(r) => dispatch!(r),
            Output::GroundState(r) => dispatch!(r),
        }
    }

    /// Verification runs with a failing verdict.
    pub fn has_failure(&self) -> bool {
        matches!(self, Output::Verify(r) if r.iter().any(|x| x.verdict == Verdict::Fail))
    }
}

/// Output path after applying [`OUTPUT_DIR_VAR`] to relative paths.
pub fn resolve_output(path: Option<&Path>) -> Option<PathBuf> {
    let dir = std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from);
    match (path, dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, _) => None,
    }
}

/// Writes the output file and its provenance sidecar (CSV only; JSON
/// embeds provenance).
pub fn write_output_file(output: &Output, format: Format, provenance: &Provenance, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    output.write(format, provenance, fs::File::create(path)?)?;
    if format == Format::Csv {
        let mut sidecar = path.as_os_str().to_owned();
        sidecar.push(".provenance.json");
        fs::write(PathBuf::from(sidecar), serde_json::to_string_pretty(provenance)?)?;
    }
    Ok(())
}

/// Runs the configured pipeline.
pub fn run(config: &ExperimentConfig) -> Result<Output> {
    config.check_tolerances()?;
    match config.command()? {
        Command::Search => run_search(config),
        Command::Scaling => run_scaling(config),
        Command::Verify => run_verify(config),
        Command::Fastforward => run_fastforward(config),
        Command::Groundstate => run_groundstate(config),
    }
}

fn too_large(n: usize) -> Error {
    Error::TooLarge { n, cap: FULL_SPACE_CAP }
}

fn run_search(config: &ExperimentConfig) -> Result<Output> {
    let seed = config.seed()?;
    let chain = config.load_chain()?;
    let n = chain.n();
    if n > FULL_SPACE_CAP {
        return Err(too_large(n));
    }
    let marked = config.marked_spec()?.resolve(n, &mut stream(seed, u64::MAX))?;
    let trials = config.trials.unwrap_or(100);
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let instance = SearchInstance::new(chain, marked)?;
    let options = SearchOptions { c_t: config.c_t()?, ..SearchOptions::default() };
    let max_rounds = config.max_rounds.unwrap_or_else(|| instance.default_max_rounds(&options));
    let outcomes = instance.run_trials(&options, max_rounds, trials, seed)?;
    let hits: Vec<f64> = outcomes.iter().map(|o| if o.found { 1.0 } else { 0.0 }).collect();
    let freq = McEstimate::from_samples(&hits);
    let mean = |f: &dyn Fn(&crate::search::SearchOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / trials as f64;
    Ok(Output::Search(vec![SearchSummary {
        graph: config.graph_label(),
        n,
        marked_count: instance.marked().len(),
        marked_mass: instance.marked_mass(),
        ht: instance.hitting_time(),
        t: options.c_t * instance.hitting_time(),
        trials,
        max_rounds,
        successes: outcomes.iter().filter(|o| o.found).count(),
        success_frequency: freq.mean,
        success_std_error: freq.std_error,
        mean_rounds: mean(&|o| o.rounds as f64),
        mean_evolution_time: mean(&|o| o.evolution_time),
        seed,
    }]))
}

fn run_scaling(config: &ExperimentConfig) -> Result<Output> {
    let seed = config.seed()?;
    let families = config.families.clone().unwrap_or_else(|| vec![GraphFamily::Complete]);
    let sizes = config.sizes.clone().unwrap_or_else(|| vec![8, 16, 32, 64]);
    let rule = config.marked_spec()?.rule()?;
    let mut rows = Vec::new();
    for family in families {
        rows.extend(scaling_experiment(family, &sizes, config.c_t()?, rule, seed)?);
    }
    Ok(Output::Scaling(rows))
}

fn parse_horizon(config: &ExperimentConfig, auto: impl FnOnce() -> Result<f64>) -> Result<f64> {
    match config.horizon.as_deref() {
        None | Some("auto") => auto(),
        Some(v) => {
            let t: f64 = v.parse().map_err(|_| invalid(format!("horizon must be a number or 'auto', got '{v}'")))?;
            if !(t >= 0.0) {
                return Err(invalid(format!("horizon must be >= 0, got {t}")));
            }
            Ok(t)
        }
    }
}

fn run_verify(config: &ExperimentConfig) -> Result<Output> {
    let seed = config.seed()?;
    let chain = config.load_chain()?;
    let mut rng = seeded(seed);
    let marked = config.marked_spec()?.resolve(chain.n(), &mut rng)?;
    let horizon = parse_horizon(config, || Ok((3.0 * hitting_time(&chain, &marked)?).ceil()))?;
    let steps = (horizon.round() as u32).max(1);
    let quadrature = config.quadrature()?;
    let lemma = config.lemma.as_deref().unwrap_or("all");
    let mut reports = Vec::new();
    if matches!(lemma, "success-prob" | "all") {
        let s = config.s.unwrap_or(0.5);
        for _ in 0..config.trials.unwrap_or(100) {
            let t = rng.random_range(0.0..=horizon.max(1.0));
            let t2 = rng.random_range(0.0..=horizon.max(1.0));
            reports.push(check_success_prob_lemma(&chain, &marked, s, t, t2)?);
        }
    }
    if matches!(lemma, "ct-dt" | "all") {
        reports.push(check_ct_dt_lemma(&chain, &marked, steps, Kernel::Plain, quadrature)?);
    }
    if matches!(lemma, "lazy-square" | "all") {
        reports.push(check_lazy_square_lemma(&chain, &marked, steps)?);
    }
    if reports.is_empty() && !matches!(lemma, "success-prob" | "all") {
        return Err(invalid(format!(
            "unknown lemma '{lemma}'; expected success-prob, ct-dt, lazy-square or all"
        )));
    }
    Ok(Output::Verify(reports))
}

fn run_fastforward(config: &ExperimentConfig) -> Result<Output> {
    let chain = config.load_chain()?;
    let spec = config.marked_spec()?;
    let marked = if spec.is_random() {
        spec.resolve(chain.n(), &mut seeded(config.seed()?))?
    } else {
        spec.resolve(chain.n(), &mut seeded(0))?
    };
    let exact = config.exact.unwrap_or(false);
    if exact && chain.n() > FULL_SPACE_CAP {
        return Err(too_large(chain.n()));
    }
    let instance = SearchInstance::new(chain, marked)?;
    let t = parse_horizon(config, || Ok(config.c_t()? * instance.hitting_time()))?;
    let grid: Vec<f64> = match config.s {
        Some(s) => vec![s],
        None => InterpolationSchedule::with_spacing(t, 2, GridSpacing::Uniform)?.grid().to_vec(),
    };
    let rows = grid
        .into_iter()
        .map(|s| {
            Ok(FastForwardRow {
                s,
                t,
                bound: instance.bound(t, s)?,
                exact: if exact { Some(instance.exact_success_probability(t, s)?) } else { None },
            })
        })
        .collect::<Result<_>>()?;
    Ok(Output::FastForward(rows))
}

/// Ground-state instance file: a real symmetric or complex Hermitian
/// matrix, an initial state and the hypotheses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundStateInput {
    /// Row-major real parts.
    pub hamiltonian: Vec<Vec<f64>>,
    /// Row-major imaginary parts, if any.
    #[serde(default)]
    pub hamiltonian_imag: Option<Vec<Vec<f64>>>,
    pub psi0: Vec<f64>,
    #[serde(default)]
    pub psi0_imag: Option<Vec<f64>>,
    #[serde(flatten)]
    pub hypotheses: Hypotheses,
}

impl GroundStateInput {
    pub fn problem(&self, precision_constant: f64) -> Result<GroundStateProblem> {
        use crate::spectral::C64;
        let n = self.hamiltonian.len();
        if self.hamiltonian.iter().any(|r| r.len() != n) {
            return Err(invalid("hamiltonian must be a square matrix"));
        }
        let imag = |i: usize, j: usize| self.hamiltonian_imag.as_ref().map_or(0.0, |m| m[i][j]);
        if let Some(m) = &self.hamiltonian_imag {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(invalid("hamiltonian_imag must match the hamiltonian shape"));
            }
        }
        let h = HermitianOperator::new(DMatrix::from_fn(n, n, |i, j| C64::new(self.hamiltonian[i][j], imag(i, j))))?;
        let amps = nalgebra::DVector::from_fn(self.psi0.len(), |i, _| {
            C64::new(self.psi0[i], self.psi0_imag.as_ref().map_or(0.0, |v| v[i]))
        });
        let psi = QuantumState::normalized(amps)?;
        GroundStateProblem::with_precision_constant(h, psi, self.hypotheses, precision_constant)
    }
}

fn run_groundstate(config: &ExperimentConfig) -> Result<Output> {
    let accuracy = config.accuracy.unwrap_or(1e-3);
    let problem = match &config.input {
        Some(path) => {
            let input: GroundStateInput = serde_json::from_str(&fs::read_to_string(path)?)?;
            input.problem(config.tolerance("precision_constant").unwrap_or(DEFAULT_PRECISION_CONSTANT))?
        }
        None => {
            let seed = config.seed()?;
            random_problem(config.dim.unwrap_or(8), config.overlap, accuracy, &mut seeded(seed))?
        }
    };
    let prep = if config.ancilla.unwrap_or(false) {
        prepare_via_ancilla(&problem, &AncillaGrid::default())?
    } else {
        prepare(&problem)?
    };
    Ok(Output::GroundState(vec![prep.report(&problem)]))
}
