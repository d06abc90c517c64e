//! Multi-trial experiments: configuration files, parallel execution,
//! percentile aggregation on the oracle-call axis, and CSV/SVG output.
//!
//! Experiment and descend specs are TOML. Relative paths inside a spec file
//! (table problems, output locations) resolve against the file's directory.
//!
//! ```toml
//! problem = "slice:10"
//! n_trials = 20
//! base_seed = 7
//! budget = 50000          # oracle calls per trial
//! output_dir = "../results/slice10"
//! grid_points = 500       # optional
//! trajectories = "changes" # full | changes | none
//! direction = "maximize"  # method defaults below
//! schedule = "constant(0.05)"
//! clamp = 1e-4
//! initial = 0.9           # scalar or list
//!
//! [[methods]]
//! estimator = "esg:arch"
//! label = "esg:arch"      # optional; also overrides for any field above
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::descent::{self, DescentConfig, Direction, Schedule, Trajectory, DEFAULT_CLAMP};
use crate::error::{Error, Result};
use crate::estimators::EstimatorSpec;
use crate::exact::ProbVector;
use crate::oracles::ProblemSpec;
use crate::rng::{derive_seed, substream};

/// Environment variable capping the number of parallel trials.
pub const THREADS_ENV: &str = "ESG_THREADS";
pub const DEFAULT_GRID_POINTS: usize = 500;
pub const CSV_HEADER: &str = "method,oracle_calls,median,p25,p75";

/// Starting point, possibly given as one value for every coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Uniform(f64),
    Vector(ProbVector),
}

impl InitialState {
    pub fn resolve(&self, dim: usize) -> Result<ProbVector> {
        match self {
            Self::Uniform(v) => ProbVector::filled(dim, *v),
            Self::Vector(x) if x.dim() == dim => Ok(x.clone()),
            Self::Vector(x) => Err(Error::DimensionMismatch { expected: dim, actual: x.dim() }),
        }
    }
}

/// What to write per trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryOutput {
    /// Every oracle response.
    Full,
    /// Only responses that improve the best-so-far, plus the last one.
    Changes,
    None,
}

#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub label: String,
    pub estimator: EstimatorSpec,
    pub direction: Direction,
    pub schedule: Schedule,
    pub clamp: f64,
    pub initial: Option<InitialState>,
    pub snapshot_stride: Option<u64>,
}

impl MethodSpec {
    /// Descent config spending `budget` oracle calls on `dim` coordinates.
    pub fn descent_config(&self, dim: usize, budget: u64) -> Result<DescentConfig> {
        let steps = budget / self.estimator.query_cost();
        if steps == 0 {
            return Err(Error::Config(format!("{}: budget {budget} is below one step", self.label)));
        }
        Ok(DescentConfig {
            estimator: self.estimator.clone(),
            direction: self.direction,
            steps,
            schedule: self.schedule,
            clamp: self.clamp,
            initial: self.initial.as_ref().map(|i| i.resolve(dim)).transpose()?,
            seed: 0,
            snapshot_stride: self.snapshot_stride,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub methods: Vec<MethodSpec>,
    pub n_trials: usize,
    pub base_seed: u64,
    /// Oracle calls per trial.
    pub budget: u64,
    pub output_dir: PathBuf,
    pub grid_points: usize,
    pub trajectories: TrajectoryOutput,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawInitial {
    Scalar(f64),
    List(Vec<f64>),
}

impl RawInitial {
    fn parse(self) -> Result<InitialState> {
        match self {
            Self::Scalar(v) => {
                if v > 0.0 && v < 1.0 {
                    Ok(InitialState::Uniform(v))
                } else {
                    Err(Error::Config(format!("initial value {v} must lie in (0, 1)")))
                }
            }
            Self::List(v) => Ok(InitialState::Vector(ProbVector::interior(v)?)),
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMethod {
    label: Option<String>,
    estimator: Option<String>,
    direction: Option<String>,
    schedule: Option<String>,
    clamp: Option<f64>,
    initial: Option<RawInitial>,
    snapshot_stride: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    problem: String,
    n_trials: usize,
    base_seed: u64,
    budget: u64,
    output_dir: PathBuf,
    grid_points: Option<usize>,
    trajectories: Option<TrajectoryOutput>,
    direction: Option<String>,
    schedule: Option<String>,
    clamp: Option<f64>,
    initial: Option<RawInitial>,
    snapshot_stride: Option<u64>,
    methods: Vec<RawMethod>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDescend {
    problem: String,
    estimator: String,
    steps: u64,
    seed: u64,
    output: PathBuf,
    snapshots: Option<PathBuf>,
    direction: Option<String>,
    schedule: Option<String>,
    clamp: Option<f64>,
    initial: Option<RawInitial>,
    snapshot_stride: Option<u64>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn resolve_path(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p
    }
}

impl ExperimentSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?, &base_dir(path))
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawExperiment = parse_toml(text)?;
        let default_direction = raw.direction.as_deref().map(str::parse).transpose()?.unwrap_or(Direction::Minimize);
        let default_schedule = raw.schedule.as_deref().map(str::parse).transpose()?;
        let default_initial = raw.initial.map(RawInitial::parse).transpose()?;
        let mut methods = Vec::with_capacity(raw.methods.len());
        for (i, m) in raw.methods.into_iter().enumerate() {
            let estimator_name =
                m.estimator.ok_or_else(|| Error::Config(format!("method {i} has no estimator")))?;
            let estimator: EstimatorSpec = estimator_name.parse()?;
            let schedule = match m.schedule {
                Some(s) => s.parse()?,
                None => default_schedule
                    .ok_or_else(|| Error::Config(format!("method {estimator_name} has no schedule")))?,
            };
            methods.push(MethodSpec {
                label: m.label.unwrap_or_else(|| estimator_name.trim().to_string()),
                estimator,
                direction: m.direction.as_deref().map(str::parse).transpose()?.unwrap_or(default_direction),
                schedule,
                clamp: m.clamp.or(raw.clamp).unwrap_or(DEFAULT_CLAMP),
                initial: match m.initial {
                    Some(init) => Some(init.parse()?),
                    None => default_initial.clone(),
                },
                snapshot_stride: m.snapshot_stride.or(raw.snapshot_stride),
            });
        }
        let spec = Self {
            problem: raw.problem.parse::<ProblemSpec>()?.relative_to(base),
            methods,
            n_trials: raw.n_trials,
            base_seed: raw.base_seed,
            budget: raw.budget,
            output_dir: resolve_path(base, raw.output_dir),
            grid_points: raw.grid_points.unwrap_or(DEFAULT_GRID_POINTS),
            trajectories: raw.trajectories.unwrap_or(TrajectoryOutput::Changes),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be at least 1".into()));
        }
        if self.grid_points == 0 {
            return Err(Error::Config("grid_points must be at least 1".into()));
        }
        let mut labels = std::collections::HashSet::new();
        for m in &self.methods {
            if !labels.insert(m.label.as_str()) {
                return Err(Error::Config(format!("duplicate method label {:?}", m.label)));
            }
            if !(m.clamp > 0.0 && m.clamp < 0.5) {
                return Err(Error::Config(format!("{}: clamp must lie in (0, 1/2)", m.label)));
            }
            m.schedule.validate()?;
        }
        Ok(())
    }
}

/// A single descent run read from a TOML file.
#[derive(Debug, Clone)]
pub struct DescendSpec {
    pub problem: ProblemSpec,
    pub config: DescentConfig,
    /// Trajectory CSV, one row per oracle response.
    pub output: PathBuf,
    /// Optional snapshot CSV of the iterates.
    pub snapshots: Option<PathBuf>,
}

impl DescendSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?, &base_dir(path))
    }

    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: RawDescend = parse_toml(text)?;
        let estimator: EstimatorSpec = raw.estimator.parse()?;
        let problem = raw.problem.parse::<ProblemSpec>()?.relative_to(base);
        let schedule = raw
            .schedule
            .as_deref()
            .map(str::parse)
            .transpose()?
            .ok_or_else(|| Error::Config("descend config has no schedule".into()))?;
        let initial = match raw.initial.map(RawInitial::parse).transpose()? {
            Some(InitialState::Vector(x)) => Some(x),
            Some(InitialState::Uniform(v)) => Some(ProbVector::filled(problem_dim(&problem)?, v)?),
            None => None,
        };
        let config = DescentConfig {
            estimator,
            direction: raw.direction.as_deref().map(str::parse).transpose()?.unwrap_or(Direction::Minimize),
            steps: raw.steps,
            schedule,
            clamp: raw.clamp.unwrap_or(DEFAULT_CLAMP),
            initial,
            seed: raw.seed,
            snapshot_stride: raw.snapshot_stride,
        };
        config.validate()?;
        Ok(Self {
            problem,
            config,
            output: resolve_path(base, raw.output),
            snapshots: raw.snapshots.map(|p| resolve_path(base, p)),
        })
    }

    /// Runs once; knapsack weights come from stream 1 of the seed.
    pub fn run(&self) -> Result<Trajectory> {
        let oracle = self.problem.instantiate(&mut substream(self.config.seed, 1))?;
        let traj = descent::run(&self.config, &oracle)?;
        if let Some(dir) = self.output.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        traj.write_csv(&self.output)?;
        if let Some(path) = &self.snapshots {
            traj.write_snapshots_csv(path)?;
        }
        Ok(traj)
    }
}

fn problem_dim(problem: &ProblemSpec) -> Result<usize> {
    match problem {
        ProblemSpec::Slice(d) | ProblemSpec::Knapsack(d) => Ok(*d),
        ProblemSpec::Table(_) => Ok(problem.instantiate(&mut substream(0, 1))?.dim()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub oracle_calls: u64,
    pub median: f64,
    pub p25: f64,
    pub p75: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSeries {
    pub method: String,
    pub points: Vec<SeriesPoint>,
}

/// Per-method percentile bands, methods sorted by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateSeries {
    pub methods: Vec<MethodSeries>,
}

impl AggregateSeries {
    pub fn method(&self, name: &str) -> Option<&MethodSeries> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Linear interpolation between order statistics at position `p·(n−1)`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// `ceil(k·budget/n)` for `k = 1..=n`, deduplicated.
pub fn call_grid(budget: u64, n: usize) -> Vec<u64> {
    let n = (n as u64).min(budget).max(1);
    let mut grid: Vec<u64> = (1..=n).map(|k| (k * budget).div_ceil(n)).collect();
    grid.dedup();
    grid
}

/// Groups trajectories by `method`, aligns each trial's best-so-far onto a
/// shared call grid by carry-forward, and takes percentiles across trials.
pub fn aggregate(trajectories: &[Trajectory], grid_points: usize) -> Result<AggregateSeries> {
    if trajectories.is_empty() {
        return Err(Error::EmptyInput("no trajectories to aggregate".into()));
    }
    let mut groups: BTreeMap<&str, Vec<&Trajectory>> = BTreeMap::new();
    for t in trajectories {
        if t.records.is_empty() {
            return Err(Error::EmptyInput(format!("trajectory of {} has no steps", t.method)));
        }
        groups.entry(t.method.as_str()).or_default().push(t);
    }
    let mut methods = Vec::with_capacity(groups.len());
    for (name, group) in groups {
        let budget = group.iter().map(|t| t.total_calls()).max().unwrap_or(0);
        let grid = call_grid(budget, grid_points);
        let mut columns = vec![Vec::with_capacity(group.len()); grid.len()];
        for t in &group {
            let events = t.best_by_call();
            let mut cursor = 0;
            for (g, column) in grid.iter().zip(columns.iter_mut()) {
                while cursor + 1 < events.len() && events[cursor + 1].0 <= *g {
                    cursor += 1;
                }
                column.push(events[cursor].1);
            }
        }
        let points = grid
            .iter()
            .zip(columns)
            .map(|(&oracle_calls, mut vals)| {
                vals.sort_by(f64::total_cmp);
                SeriesPoint {
                    oracle_calls,
                    median: percentile(&vals, 0.5),
                    p25: percentile(&vals, 0.25),
                    p75: percentile(&vals, 0.75),
                }
            })
            .collect();
        methods.push(MethodSeries { method: name.to_string(), points });
    }
    Ok(AggregateSeries { methods })
}

/// Writes `method,oracle_calls,median,p25,p75` with 17 significant digits.
pub fn emit_csv(series: &AggregateSeries, path: &Path) -> Result<()> {
    let mut rows: Vec<(&str, &SeriesPoint)> =
        series.methods.iter().flat_map(|m| m.points.iter().map(move |p| (m.method.as_str(), p))).collect();
    rows.sort_by(|a, b| a.0.cmp(b.0).then(a.1.oracle_calls.cmp(&b.1.oracle_calls)));
    let csv_err = |e: csv::Error| Error::Io { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    for (method, p) in rows {
        w.write_record([
            method.to_string(),
            p.oracle_calls.to_string(),
            format!("{:.16e}", p.median),
            format!("{:.16e}", p.p25),
            format!("{:.16e}", p.p75),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<AggregateSeries> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e.into() })?;
    let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Parse(format!("{}: unexpected header", path.display())));
    }
    let mut series = AggregateSeries::default();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let bad = || Error::Parse(format!("{}: malformed row {}", path.display(), line + 2));
        if record.len() != 5 {
            return Err(bad());
        }
        let real = |i: usize| record[i].parse::<f64>().map_err(|_| bad());
        let point = SeriesPoint {
            oracle_calls: record[1].parse().map_err(|_| bad())?,
            median: real(2)?,
            p25: real(3)?,
            p75: real(4)?,
        };
        match series.methods.last_mut() {
            Some(m) if m.method == record[0] => m.points.push(point),
            _ => series.methods.push(MethodSeries { method: record[0].to_string(), points: vec![point] }),
        }
    }
    Ok(series)
}

/// Pathwise estimators are drawn solid, score-function baselines dashed.
pub fn is_proposed(method: &str) -> bool {
    match method.parse::<EstimatorSpec>() {
        Ok(spec) => spec.is_pathwise(),
        Err(_) => method.starts_with("esg") || method.starts_with("encoded"),
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Self-contained SVG: per method a shaded p25–p75 band and a median line.
pub fn emit_plot(series: &AggregateSeries, path: &Path) -> Result<()> {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 200.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 50.0;
    let points = series.methods.iter().flat_map(|m| &m.points);
    let x_max = points.clone().map(|p| p.oracle_calls).max().unwrap_or(1).max(1) as f64;
    let (mut y_min, mut y_max) = points.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        (lo.min(p.p25).min(p.median), hi.max(p.p75).max(p.median))
    });
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-12 {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;
    let sx = |c: u64| LEFT + c as f64 / x_max * plot_w;
    let sy = |v: f64| TOP + (y_max - v) / (y_max - y_min) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (LEFT, TOP + plot_h, LEFT + plot_w, TOP);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=5 {
        let c = (x_max * k as f64 / 5.0).round() as u64;
        let v = y_min + (y_max - y_min) * k as f64 / 5.0;
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{c}</text>"#, sx(c), y0 + 18.0);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#, x0 - 6.0, sy(v) + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">oracle calls</text>"#, LEFT + plot_w / 2.0, H - 8.0);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">best so far</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    for (i, m) in series.methods.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if is_proposed(&m.method) { "" } else { r#" stroke-dasharray="6 4""# };
        let mut band = String::new();
        for (j, p) in m.points.iter().enumerate() {
            let _ = write!(band, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, sx(p.oracle_calls), sy(p.p75));
        }
        for p in m.points.iter().rev() {
            let _ = write!(band, "L{:.2},{:.2} ", sx(p.oracle_calls), sy(p.p25));
        }
        band.push('Z');
        let mut line = String::new();
        for (j, p) in m.points.iter().enumerate() {
            let _ = write!(line, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, sx(p.oracle_calls), sy(p.median));
        }
        let _ = writeln!(svg, r#"<path class="band" d="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.trim_end());
        let _ = writeln!(
            svg,
            r#"<path class="median" d="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            line.trim_end()
        );
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 15.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 25.0
        );
        let _ = writeln!(svg, r#"<text class="legend" x="{}" y="{}">{}</text>"#, lx + 32.0, ly + 4.0, xml_escape(&m.method));
    }
    svg.push_str("</svg>\n");
    fs::write(path, svg).map_err(|e| Error::io(path, e))
}

/// Trials per method in trial order.
#[derive(Debug, Clone)]
pub struct MethodTrials {
    pub label: String,
    pub trajectories: Vec<Trajectory>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub series: AggregateSeries,
    pub trials: Vec<MethodTrials>,
}

/// Thread count from [`THREADS_ENV`]; unset or 0 means all hardware threads.
pub fn thread_limit() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a count"))),
    }
}

/// Runs every (method, trial) pair and aggregates, without writing files.
pub fn execute(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let dim = problem_dim(&spec.problem)?;
    let configs = spec
        .methods
        .iter()
        .map(|m| m.descent_config(dim, spec.budget))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> =
        (0..spec.methods.len()).flat_map(|m| (0..spec.n_trials).map(move |t| (m, t))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_limit()?)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<Trajectory> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, t)| {
                let label = &spec.methods[m].label;
                let mut traj = descent::run_trial(&configs[m], &spec.problem, spec.base_seed, t as u64).map_err(
                    |e| {
                        let (step, source) = match e {
                            Error::Step { step, source } => (step, source),
                            other => (0, Box::new(other)),
                        };
                        Error::Trial { method: label.clone(), trial: t, step, source }
                    },
                )?;
                traj.method = label.clone();
                Ok(traj)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let series = aggregate(&results, spec.grid_points)?;
    let mut trials: Vec<MethodTrials> =
        spec.methods.iter().map(|m| MethodTrials { label: m.label.clone(), trajectories: Vec::new() }).collect();
    for ((m, _), traj) in jobs.into_iter().zip(results) {
        trials[m].trajectories.push(traj);
    }
    Ok(ExperimentOutput { series, trials })
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn write_changes(traj: &Trajectory, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    writeln!(w, "oracle_calls,best_so_far").map_err(io)?;
    let events = traj.best_by_call();
    for (i, &(call, best)) in events.iter().enumerate() {
        let changed = i == 0 || best != events[i - 1].1;
        if changed || i + 1 == events.len() {
            writeln!(w, "{call},{best:.16e}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// [`execute`], then writes `aggregate.csv`, `aggregate.svg` and per-trial
/// files under `trajectories/`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let out = execute(spec)?;
    let dir = &spec.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    emit_csv(&out.series, &dir.join("aggregate.csv"))?;
    emit_plot(&out.series, &dir.join("aggregate.svg"))?;
    if spec.trajectories != TrajectoryOutput::None {
        let traj_dir = dir.join("trajectories");
        fs::create_dir_all(&traj_dir).map_err(|e| Error::io(&traj_dir, e))?;
        for method in &out.trials {
            for (t, traj) in method.trajectories.iter().enumerate() {
                let path = traj_dir.join(format!("{}_trial{t:03}.csv", file_stem(&method.label)));
                match spec.trajectories {
                    TrajectoryOutput::Full => traj.write_csv(&path)?,
                    _ => write_changes(traj, &path)?,
                }
            }
        }
    }
    Ok(out)
}

/// Seed used by trial `index`; exposed for reproducing a single trial.
pub fn trial_seed(spec: &ExperimentSpec, index: u64) -> u64 {
    derive_seed(spec.base_seed, index)
}
