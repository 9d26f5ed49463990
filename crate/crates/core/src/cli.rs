//! `aoi` command line: analyze, optimize, simulate, experiment, roots.
//!
//! Settings come from built-in defaults, then an optional `key = value` file
//! (`--config`), then `AOI_SEED` for the seed, then command-line flags. CSV goes to
//! `--out` or stdout; the human-readable summary goes to stderr.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::error::{AoiError, Result};
use crate::model::{ChainParams, NetworkConfig};
use crate::optimize::{cubic_roots, degenerate_limit, objective, optimize_line_search, DEFAULT_PRECISION, DEFAULT_ROOT_TOLERANCE};
use crate::policies::{build_policy, make_policy, AlohaSweep, PolicyKind, PolicySpec};
use crate::second_order::{second_order_model, SeriesControl};
use crate::sim::{self, simulate, write_trace, SimOutcome, SimParams};

/// Environment variable that overrides the configured base seed.
pub const SEED_ENV: &str = "AOI_SEED";

const CONFIG_KEYS: [&str; 15] = [
    "N", "C", "z", "w", "r", "s", "lambda", "precision", "slots", "runs", "warmup", "batch_length", "base_seed",
    "policies", "w_grid",
];

#[derive(Debug, Parser)]
#[command(name = "aoi", version, about = "Second-order AoI analysis, optimization and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Theoretical moments and objective for one (r, s) chain.
    Analyze(Settings),
    /// Line search for the best chain with s = 1.
    Optimize(Settings),
    /// Monte Carlo runs of one policy.
    Simulate(Settings),
    /// Ratio of each policy's simulated objective to our theoretical optimum over a w grid.
    Experiment(Settings),
    /// Smallest positive roots alpha and beta of the active and passive cubics.
    Roots(Settings),
}

#[derive(Debug, Args, Default)]
struct Settings {
    /// Key = value settings file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Active users per cluster.
    #[arg(long = "N")]
    n: Option<String>,
    /// Number of clusters.
    #[arg(long = "C")]
    c: Option<String>,
    /// AoI moment order (default 1).
    #[arg(long)]
    z: Option<String>,
    /// Weight of the active moment in the objective (default 0.5).
    #[arg(long)]
    w: Option<String>,
    /// Idle to transmit probability.
    #[arg(long)]
    r: Option<String>,
    /// Transmit to idle probability.
    #[arg(long)]
    s: Option<String>,
    /// Stationary transmit probability, with s = 1 (instead of r and s).
    #[arg(long)]
    lambda: Option<String>,
    /// Grid step for the line search and the ALOHA sweep (default 0.01).
    #[arg(long)]
    precision: Option<String>,
    /// Slots per run, warmup included (default 100000).
    #[arg(long)]
    slots: Option<String>,
    /// Independent runs (default 10).
    #[arg(long)]
    runs: Option<String>,
    /// Slots discarded at the start of each run (default 1000).
    #[arg(long)]
    warmup: Option<String>,
    /// Batch length for the batch-means estimator (default 1000).
    #[arg(long = "batch_length", alias = "batch-length")]
    batch_length: Option<String>,
    /// Base RNG seed; overrides AOI_SEED and the config file.
    #[arg(long = "base_seed", alias = "base-seed")]
    base_seed: Option<String>,
    /// Comma-separated policy names.
    #[arg(long)]
    policies: Option<String>,
    /// Comma-separated, strictly increasing weights in [0, 1].
    #[arg(long = "w_grid", alias = "w-grid")]
    w_grid: Option<String>,
    /// Policy for `simulate` (defaults to the single entry of `policies`).
    #[arg(long)]
    policy: Option<String>,
    /// `simulate`: also write the slot trace of run 0 to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// `experiment`: keep rows already in `--out` written under the same settings.
    #[arg(long)]
    resume: bool,
}

impl Settings {
    fn flag_values(&self) -> [(&'static str, &Option<String>); 15] {
        [
            ("N", &self.n),
            ("C", &self.c),
            ("z", &self.z),
            ("w", &self.w),
            ("r", &self.r),
            ("s", &self.s),
            ("lambda", &self.lambda),
            ("precision", &self.precision),
            ("slots", &self.slots),
            ("runs", &self.runs),
            ("warmup", &self.warmup),
            ("batch_length", &self.batch_length),
            ("base_seed", &self.base_seed),
            ("policies", &self.policies),
            ("w_grid", &self.w_grid),
        ]
    }
}

/// Parses a `key = value` settings file. Blank lines and `#` comments are ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| AoiError::invalid(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(AoiError::invalid(format!("config line {}: unknown key '{key}'", i + 1)));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Resolved key/value settings with typed accessors.
#[derive(Debug, Clone, Default)]
struct Resolved {
    values: BTreeMap<String, String>,
}

impl Resolved {
    fn from_settings(settings: &Settings, env_seed: Option<String>) -> Result<Self> {
        let mut values = match &settings.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| AoiError::invalid(format!("cannot read {}: {e}", path.display())))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(seed) = env_seed {
            values.insert("base_seed".into(), seed);
        }
        for (key, value) in settings.flag_values() {
            if let Some(v) = value {
                values.insert(key.into(), v.clone());
            }
        }
        Ok(Resolved { values })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| AoiError::invalid(format!("cannot parse {key} = '{v}'"))),
        }
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| AoiError::invalid(format!("missing required setting {key}")))
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn network(&self) -> Result<NetworkConfig> {
        NetworkConfig::new(self.require("N")?, self.require("C")?, self.or("z", 1)?, self.or("w", 0.5)?)
    }

    fn precision(&self) -> Result<f64> {
        self.or("precision", DEFAULT_PRECISION)
    }

    fn sim(&self) -> Result<SimParams> {
        let d = SimParams::default();
        let p = SimParams {
            slots: self.or("slots", d.slots)?,
            runs: self.or("runs", d.runs)?,
            base_seed: self.or("base_seed", d.base_seed)?,
            warmup_slots: self.or("warmup", d.warmup_slots)?,
            batch_length: self.or("batch_length", d.batch_length)?,
        };
        p.validate()?;
        Ok(p)
    }

    fn chain(&self) -> Result<ChainParams> {
        match (self.get::<f64>("r")?, self.get::<f64>("s")?, self.get::<f64>("lambda")?) {
            (Some(r), Some(s), None) => ChainParams::from_rs(r, s),
            (None, None, Some(lambda)) => ChainParams::silent_after_transmit(lambda),
            _ => Err(AoiError::invalid("give either both r and s, or lambda (for s = 1)")),
        }
    }

    fn policies(&self) -> Result<Vec<PolicyKind>> {
        match self.values.get("policies") {
            None => Ok(PolicyKind::ALL.to_vec()),
            Some(list) => list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect(),
        }
    }

    fn w_grid(&self) -> Result<Vec<f64>> {
        let list = self.values.get("w_grid").ok_or_else(|| AoiError::invalid("experiment needs w_grid"))?;
        let grid = list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| AoiError::invalid(format!("bad w_grid entry '{s}'"))))
            .collect::<Result<Vec<_>>>()?;
        if grid.is_empty() {
            return Err(AoiError::invalid("w_grid is empty"));
        }
        if grid.iter().any(|w| !(0.0..=1.0).contains(w)) || grid.windows(2).any(|p| p[1] <= p[0]) {
            return Err(AoiError::invalid("w_grid must be strictly increasing values in [0, 1]"));
        }
        Ok(grid)
    }

    /// SHA-256 of the resolved settings, one `key=value` line each in key order.
    fn manifest_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in &self.values {
            hasher.update(format!("{k}={v}\n"));
        }
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    fn provenance(&self) -> String {
        let seed = self.values.get("base_seed").cloned().unwrap_or_else(|| sim::DEFAULT_BASE_SEED.to_string());
        format!("# aoi {} seed={} manifest={}", env!("CARGO_PKG_VERSION"), seed, self.manifest_hash())
    }
}

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    trim_zeros(&format!("{x:.*}", (11 - exp) as usize)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn row(fields: &[String]) -> String {
    fields.join(",")
}

struct CsvOut {
    sink: Box<dyn Write>,
}

impl CsvOut {
    fn open(path: Option<&Path>, stdout: Box<dyn Write>) -> Result<Self> {
        let sink: Box<dyn Write> = match path {
            Some(p) => Box::new(
                File::create(p).map_err(|e| AoiError::invalid(format!("cannot create {}: {e}", p.display())))?,
            ),
            None => stdout,
        };
        Ok(CsvOut { sink })
    }

    fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.sink, "{text}")
            .and_then(|_| self.sink.flush())
            .map_err(|e| AoiError::invalid(format!("cannot write output: {e}")))
    }
}

/// Runs the CLI with the process arguments and environment; returns the exit code.
pub fn run() -> i32 {
    let stdout: Box<dyn Write> = Box::new(io::stdout());
    run_with(std::env::args_os(), std::env::var(SEED_ENV).ok(), stdout, &mut io::stderr())
}

/// Same as [`run`] with explicit arguments, seed override and streams.
pub fn run_with<I, T>(args: I, env_seed: Option<String>, stdout: Box<dyn Write>, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command, env_seed, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, env_seed: Option<String>, stdout: Box<dyn Write>, stderr: &mut dyn Write) -> Result<()> {
    let settings = match &command {
        Command::Analyze(s)
        | Command::Optimize(s)
        | Command::Simulate(s)
        | Command::Experiment(s)
        | Command::Roots(s) => s,
    };
    let resolved = Resolved::from_settings(settings, env_seed)?;
    match &command {
        Command::Analyze(s) => cmd_analyze(&resolved, s, stdout, stderr),
        Command::Optimize(s) => cmd_optimize(&resolved, s, stdout, stderr),
        Command::Simulate(s) => cmd_simulate(&resolved, s, stdout, stderr),
        Command::Experiment(s) => cmd_experiment(&resolved, s, stdout, stderr),
        Command::Roots(s) => cmd_roots(&resolved, s, stdout, stderr),
    }
}

fn cmd_analyze(res: &Resolved, settings: &Settings, stdout: Box<dyn Write>, stderr: &mut dyn Write) -> Result<()> {
    let config = res.network()?;
    let chain = res.chain()?;
    let ctrl = SeriesControl::default();
    let model = match second_order_model(&config, &chain, &ctrl) {
        Ok(m) => m,
        Err(e @ AoiError::Degenerate { .. }) => {
            if let Some(limit) = degenerate_limit(&config, &chain) {
                let _ = writeln!(
                    stderr,
                    "limit: E[AoI_a^z] = {}, E[AoI_p^z] = {}, F = {}",
                    fmt_num(limit.active_moment),
                    fmt_num(limit.passive_moment),
                    fmt_num(limit.objective)
                );
            }
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let moments = objective(&config, &chain, &ctrl)?;
    let mut out = CsvOut::open(settings.out.as_deref(), stdout)?;
    out.line(&res.provenance())?;
    out.line("N,C,z,w,r,s,lambda,theta,m_a,v2_a,m_p,v2_p,active_moment,passive_moment,F")?;
    out.line(&row(&[
        config.n.to_string(),
        config.c.to_string(),
        config.z.to_string(),
        fmt_num(config.w),
        fmt_num(chain.r()),
        fmt_num(chain.s()),
        fmt_num(chain.lambda()),
        fmt_num(chain.theta()),
        fmt_num(model.active.mean),
        fmt_num(model.active.temporal_variance),
        fmt_num(model.passive.mean),
        fmt_num(model.passive.temporal_variance),
        fmt_num(moments.active_moment),
        fmt_num(moments.passive_moment),
        fmt_num(moments.objective),
    ]))?;
    let _ = writeln!(
        stderr,
        "m_a = {}, v_a^2 = {}, m_p = {}, v_p^2 = {}\nE[AoI_a^{z}] = {}, E[AoI_p^{z}] = {}, F = {}",
        fmt_num(model.active.mean),
        fmt_num(model.active.temporal_variance),
        fmt_num(model.passive.mean),
        fmt_num(model.passive.temporal_variance),
        fmt_num(moments.active_moment),
        fmt_num(moments.passive_moment),
        fmt_num(moments.objective),
        z = config.z
    );
    Ok(())
}

fn cmd_optimize(res: &Resolved, settings: &Settings, stdout: Box<dyn Write>, stderr: &mut dyn Write) -> Result<()> {
    let config = res.network()?;
    let best = optimize_line_search(&config, res.precision()?, &SeriesControl::default())?;
    let mut out = CsvOut::open(settings.out.as_deref(), stdout)?;
    out.line(&res.provenance())?;
    out.line("lambda,r,s,F_theoretical")?;
    for p in &best.search_trace {
        out.line(&row(&[fmt_num(p.lambda), fmt_num(p.r), fmt_num(p.s), fmt_num(p.objective)]))?;
    }
    let _ = writeln!(
        stderr,
        "lambda* = {}, r* = {}, s* = {}, F = {}",
        fmt_num(best.lambda_star),
        fmt_num(best.r_star),
        fmt_num(best.s_star),
        fmt_num(best.objective_value)
    );
    Ok(())
}

fn simulate_policy_name(res: &Resolved, settings: &Settings) -> Result<PolicyKind> {
    if let Some(p) = &settings.policy {
        return p.parse();
    }
    match res.policies()?.as_slice() {
        [single] if res.values.contains_key("policies") => Ok(*single),
        _ => Err(AoiError::invalid("simulate needs --policy (or a single entry in policies)")),
    }
}

fn cmd_simulate(res: &Resolved, settings: &Settings, stdout: Box<dyn Write>, stderr: &mut dyn Write) -> Result<()> {
    let config = res.network()?;
    let sim = res.sim()?;
    let kind = simulate_policy_name(res, settings)?;
    let policy = build_policy(kind, &config, res.precision()?, &sim)?;
    let outcome = simulate(&config, &policy, &sim)?;
    if let Some(path) = &settings.trace {
        let file = File::create(path).map_err(|e| AoiError::invalid(format!("cannot create {}: {e}", path.display())))?;
        let mut writer = io::BufWriter::new(file);
        write_trace(&config, &policy, &sim, 0, &mut writer)?;
        writer.flush().map_err(|e| AoiError::invalid(format!("cannot write trace: {e}")))?;
    }
    let mut out = CsvOut::open(settings.out.as_deref(), stdout)?;
    out.line(&res.provenance())?;
    out.line(&format!("# generator={}", outcome.generator))?;
    out.line("run_index,empirical_active_moment,empirical_passive_moment,empirical_F,m_hat_a,v2_hat_a,m_hat_p,v2_hat_p")?;
    for r in &outcome.per_run {
        out.line(&row(&[
            r.run_index.to_string(),
            fmt_num(r.active_moment),
            fmt_num(r.passive_moment),
            fmt_num(r.objective),
            fmt_num(r.m_hat_a),
            fmt_num(r.v2_hat_a),
            fmt_num(r.m_hat_p),
            fmt_num(r.v2_hat_p),
        ]))?;
    }
    out.line(&row(&[
        "aggregate".into(),
        fmt_num(outcome.empirical_active_moment),
        fmt_num(outcome.empirical_passive_moment),
        fmt_num(outcome.empirical_objective),
        fmt_num(outcome.empirical_m_a),
        fmt_num(outcome.empirical_v2_a),
        fmt_num(outcome.empirical_m_p),
        fmt_num(outcome.empirical_v2_p),
    ]))?;
    let chain = policy.chain_params().map(|c| format!(" (r = {}, s = {})", fmt_num(c.r()), fmt_num(c.s())));
    let _ = writeln!(
        stderr,
        "{kind}{}: empirical F = {} +/- {} over {} runs",
        chain.unwrap_or_default(),
        fmt_num(outcome.empirical_objective),
        fmt_num(outcome.objective_std_error()),
        sim.runs
    );
    Ok(())
}

/// One line of the experiment CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub w: f64,
    pub policy: PolicyKind,
    pub actual_f: f64,
    pub theoretical_f: f64,
}

impl ExperimentRow {
    pub const HEADER: &'static str = "w,policy,actual_F,theoretical_F_our_solution,ratio";

    pub fn to_csv(&self) -> String {
        row(&[
            fmt_num(self.w),
            self.policy.to_string(),
            fmt_num(self.actual_f),
            fmt_num(self.theoretical_f),
            fmt_num(self.actual_f / self.theoretical_f),
        ])
    }
}

/// Simulation results that do not depend on `w`, shared across the grid.
///
/// Slotted ALOHA, ATA and every ALOHA sweep point are simulated once per setting
/// and re-weighted for each `w`; our solution is cached per chosen `λ*`.
pub struct ExperimentCache {
    config: NetworkConfig,
    sim: SimParams,
    precision: f64,
    fixed: BTreeMap<&'static str, SimOutcome>,
    ours: Vec<(f64, SimOutcome)>,
    sweep: Option<AlohaSweep>,
}

impl ExperimentCache {
    pub fn new(config: NetworkConfig, sim: SimParams, precision: f64) -> Self {
        ExperimentCache { config, sim, precision, fixed: BTreeMap::new(), ours: Vec::new(), sweep: None }
    }

    /// Theoretical F of our solution at `w` and the simulated F of `kind` at `w`.
    pub fn evaluate(&mut self, w: f64, kind: PolicyKind) -> Result<ExperimentRow> {
        let config = self.config.with_w(w)?;
        let best = optimize_line_search(&config, self.precision, &SeriesControl::default())?;
        let actual_f = match kind {
            PolicyKind::SecondOrderOptimal => {
                let outcome = match self.ours.iter().find(|(l, _)| *l == best.lambda_star) {
                    Some((_, o)) => o,
                    None => {
                        let policy = PolicySpec::chain(kind, best.chain()?)?;
                        let o = simulate(&config, &policy, &self.sim)?;
                        self.ours.push((best.lambda_star, o));
                        &self.ours.last().expect("just pushed").1
                    }
                };
                config.weigh(outcome.empirical_active_moment, outcome.empirical_passive_moment)
            }
            PolicyKind::OptimalAloha => {
                if self.sweep.is_none() {
                    self.sweep = Some(AlohaSweep::run(&config, &self.sim, self.precision)?);
                }
                let sweep = self.sweep.as_ref().expect("sweep present");
                let (_, o) = sweep
                    .best(&config)
                    .ok_or_else(|| AoiError::InternalInconsistency("empty ALOHA sweep".into()))?;
                config.weigh(o.empirical_active_moment, o.empirical_passive_moment)
            }
            _ => {
                if !self.fixed.contains_key(kind.name()) {
                    let policy = make_policy(kind, &config, self.precision)?;
                    self.fixed.insert(kind.name(), simulate(&config, &policy, &self.sim)?);
                }
                let o = &self.fixed[kind.name()];
                config.weigh(o.empirical_active_moment, o.empirical_passive_moment)
            }
        };
        Ok(ExperimentRow { w, policy: kind, actual_f, theoretical_f: best.objective_value })
    }
}

/// Data rows already present in `path` under the same provenance line.
fn resumable_rows(path: &Path, provenance: &str) -> Option<Vec<String>> {
    let file = File::open(path).ok()?;
    let mut lines = BufReader::new(file).lines().map_while(|l| l.ok());
    if lines.next()? != provenance || lines.next()? != ExperimentRow::HEADER {
        return None;
    }
    Some(lines.filter(|l| l.split(',').count() == 5).collect())
}

fn cmd_experiment(res: &Resolved, settings: &Settings, stdout: Box<dyn Write>, stderr: &mut dyn Write) -> Result<()> {
    let config = res.network()?;
    let sim = res.sim()?;
    let w_grid = res.w_grid()?;
    let policies = res.policies()?;
    if policies.is_empty() {
        return Err(AoiError::invalid("policies is empty"));
    }
    let provenance = res.provenance();
    let mut done: HashSet<(String, String)> = HashSet::new();
    let mut out = match (&settings.out, settings.resume) {
        (Some(path), true) => match resumable_rows(path, &provenance) {
            Some(rows) => {
                for r in rows {
                    let mut parts = r.split(',');
                    done.insert((parts.next().unwrap_or("").into(), parts.next().unwrap_or("").into()));
                }
                let file = OpenOptions::new()
                    .append(true)
                    .open(path)
                    .map_err(|e| AoiError::invalid(format!("cannot append to {}: {e}", path.display())))?;
                CsvOut { sink: Box::new(file) }
            }
            None => {
                let mut out = CsvOut::open(Some(path), stdout)?;
                out.line(&provenance)?;
                out.line(ExperimentRow::HEADER)?;
                out
            }
        },
        (path, _) => {
            let mut out = CsvOut::open(path.as_deref(), stdout)?;
            out.line(&provenance)?;
            out.line(ExperimentRow::HEADER)?;
            out
        }
    };
    if !done.is_empty() {
        let _ = writeln!(stderr, "resuming: {} rows already written", done.len());
    }
    let mut cache = ExperimentCache::new(config, sim, res.precision()?);
    for &w in &w_grid {
        for &kind in &policies {
            if done.contains(&(fmt_num(w), kind.name().to_string())) {
                continue;
            }
            let r = cache.evaluate(w, kind)?;
            out.line(&r.to_csv())?;
            let _ = writeln!(
                stderr,
                "w = {}, {}: actual F = {}, ratio = {}",
                fmt_num(w),
                kind,
                fmt_num(r.actual_f),
                fmt_num(r.actual_f / r.theoretical_f)
            );
        }
    }
    Ok(())
}

fn cmd_roots(res: &Resolved, settings: &Settings, stdout: Box<dyn Write>, stderr: &mut dyn Write) -> Result<()> {
    let n: u32 = res.require("N")?;
    let c: u32 = res.require("C")?;
    NetworkConfig::new(n, c, 1, 0.5)?;
    let roots = cubic_roots(c, n, DEFAULT_ROOT_TOLERANCE)?;
    let mut out = CsvOut::open(settings.out.as_deref(), stdout)?;
    out.line(&res.provenance())?;
    out.line("N,C,alpha,beta")?;
    out.line(&row(&[n.to_string(), c.to_string(), fmt_num(roots.alpha), fmt_num(roots.beta)]))?;
    let _ = writeln!(stderr, "alpha = {}, beta = {}", fmt_num(roots.alpha), fmt_num(roots.beta));
    Ok(())
}
