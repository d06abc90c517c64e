//! Single-query descent in probability space and in encoding space.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use arrayvec::ArrayVec;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{EncodedState, EstimatorSample, EstimatorSpec};
use crate::exact::ProbVector;
use crate::oracles::{Oracle, ProblemSpec};
use crate::rng::{derive_seed, substream};

/// Clamp margin used when a config does not set one.
pub const DEFAULT_CLAMP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Sign applied to the gradient step.
    pub fn sign(self) -> f64 {
        match self {
            Self::Minimize => -1.0,
            Self::Maximize => 1.0,
        }
    }

    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Self::Minimize => candidate < incumbent,
            Self::Maximize => candidate > incumbent,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Minimize => "minimize",
            Self::Maximize => "maximize",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "minimize" | "min" => Ok(Self::Minimize),
            "maximize" | "max" => Ok(Self::Maximize),
            _ => Err(Error::Parse(format!("bad direction {s:?}; expected minimize or maximize"))),
        }
    }
}

/// Learning rate `η_t` for steps `t = 1, 2, …`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    InverseSqrt(f64),
    InverseT(f64),
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let v = self.base();
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::Schedule(format!("{self}: learning rate must be positive and finite")))
        }
    }

    fn base(&self) -> f64 {
        match *self {
            Self::Constant(v) | Self::InverseSqrt(v) | Self::InverseT(v) => v,
        }
    }

    pub fn rate(&self, t: u64) -> f64 {
        let t = t.max(1) as f64;
        match *self {
            Self::Constant(eta) => eta,
            Self::InverseSqrt(eta) => eta / t.sqrt(),
            Self::InverseT(eta) => eta / t,
        }
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(v) => write!(f, "constant({v})"),
            Self::InverseSqrt(v) => write!(f, "inverse_sqrt({v})"),
            Self::InverseT(v) => write!(f, "inverse_t({v})"),
        }
    }
}

impl FromStr for Schedule {
    type Err = Error;

    /// `constant(η)`, `inverse_sqrt(η₀)` or `inverse_t(η₀)`; a bare number is constant.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("bad schedule {s:?}"));
        let schedule = if let Ok(v) = s.parse::<f64>() {
            Self::Constant(v)
        } else {
            let (name, rest) = s.split_once('(').ok_or_else(bad)?;
            let arg: f64 = rest.strip_suffix(')').ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            match name.trim().to_ascii_lowercase().as_str() {
                "constant" => Self::Constant(arg),
                "inverse_sqrt" => Self::InverseSqrt(arg),
                "inverse_t" => Self::InverseT(arg),
                _ => return Err(bad()),
            }
        };
        schedule.validate()?;
        Ok(schedule)
    }
}

#[derive(Debug, Clone)]
pub struct DescentConfig {
    pub estimator: EstimatorSpec,
    pub direction: Direction,
    pub steps: u64,
    pub schedule: Schedule,
    /// Iterates stay in `[δ, 1−δ]`, or its image under `σ̂⁻¹` in encoding space.
    pub clamp: f64,
    /// `None` starts at all-½.
    pub initial: Option<ProbVector>,
    pub seed: u64,
    /// `None` means `max(1, steps / 1000)`.
    pub snapshot_stride: Option<u64>,
}

impl DescentConfig {
    pub fn new(estimator: EstimatorSpec, steps: u64, schedule: Schedule) -> Self {
        Self {
            estimator,
            direction: Direction::Minimize,
            steps,
            schedule,
            clamp: DEFAULT_CLAMP,
            initial: None,
            seed: 0,
            snapshot_stride: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.clamp > 0.0 && self.clamp < 0.5) {
            return Err(Error::Config(format!("clamp δ = {} must lie in (0, 1/2)", self.clamp)));
        }
        if self.snapshot_stride == Some(0) {
            return Err(Error::Config("snapshot stride must be at least 1".into()));
        }
        self.schedule.validate()
    }

    pub fn stride(&self) -> u64 {
        self.snapshot_stride.unwrap_or((self.steps / 1000).max(1))
    }

    fn start(&self, dim: usize) -> Result<ProbVector> {
        match &self.initial {
            Some(x) if x.dim() != dim => Err(Error::DimensionMismatch { expected: dim, actual: x.dim() }),
            Some(x) => {
                x.check_interior().map_err(|e| Error::Encoding(e.to_string()))?;
                Ok(x.clone())
            }
            None => ProbVector::filled(dim, 0.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    /// Cumulative oracle calls after this step.
    pub oracle_calls: u64,
    /// Responses of this step's queried keys, in query order.
    pub responses: ArrayVec<f64, 2>,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: u64,
    pub x: ProbVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub method: String,
    pub direction: Direction,
    pub seed: u64,
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_x: ProbVector,
}

impl Trajectory {
    /// `(oracle call index, best-so-far after it)` for every response.
    pub fn best_by_call(&self) -> Vec<(u64, f64)> {
        let mut out = Vec::with_capacity(self.records.len() * 2);
        let mut best: Option<f64> = None;
        for r in &self.records {
            let first_call = r.oracle_calls + 1 - r.responses.len() as u64;
            for (k, &q) in r.responses.iter().enumerate() {
                best = Some(match best {
                    Some(b) if !self.direction.improves(q, b) => b,
                    _ => q,
                });
                out.push((first_call + k as u64, best.unwrap_or(q)));
            }
        }
        out
    }

    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best_so_far)
    }

    pub fn total_calls(&self) -> u64 {
        self.records.last().map_or(0, |r| r.oracle_calls)
    }

    /// One row per oracle response: `step,oracle_calls,response,best_so_far`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "step,oracle_calls,response,best_so_far").map_err(io)?;
        let events = self.best_by_call();
        let mut idx = 0;
        for r in &self.records {
            for &q in &r.responses {
                let (call, best) = events[idx];
                idx += 1;
                writeln!(w, "{},{},{:.16e},{:.16e}", r.step, call, q, best).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    /// Snapshot rows `step,x_0,…,x_{d−1}`.
    pub fn write_snapshots_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        let d = self.final_x.dim();
        let header: Vec<String> = (0..d).map(|i| format!("x_{i}")).collect();
        writeln!(w, "step,{}", header.join(",")).map_err(io)?;
        for s in &self.snapshots {
            let row: Vec<String> = s.x.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(w, "{},{}", s.step, row.join(",")).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

struct Recorder {
    direction: Direction,
    stride: u64,
    steps: u64,
    calls: u64,
    best: Option<f64>,
    records: Vec<StepRecord>,
    snapshots: Vec<Snapshot>,
}

impl Recorder {
    fn new(config: &DescentConfig) -> Self {
        Self {
            direction: config.direction,
            stride: config.stride(),
            steps: config.steps,
            calls: 0,
            best: None,
            records: Vec::with_capacity(config.steps as usize),
            snapshots: Vec::new(),
        }
    }

    fn observe(&mut self, step: u64, sample: &EstimatorSample) {
        for &q in &sample.responses {
            self.calls += 1;
            self.best = Some(match self.best {
                Some(b) if !self.direction.improves(q, b) => b,
                _ => q,
            });
        }
        self.records.push(StepRecord {
            step,
            oracle_calls: self.calls,
            responses: sample.responses.clone(),
            best_so_far: self.best.unwrap_or(f64::NAN),
        });
    }

    fn snapshot(&mut self, step: u64, x: impl FnOnce() -> Result<ProbVector>) -> Result<()> {
        if step.is_multiple_of(self.stride) || step == self.steps {
            self.snapshots.push(Snapshot { step, x: x()? });
        }
        Ok(())
    }

    fn finish(self, config: &DescentConfig, final_x: ProbVector) -> Trajectory {
        Trajectory {
            method: config.estimator.to_string(),
            direction: config.direction,
            seed: config.seed,
            records: self.records,
            snapshots: self.snapshots,
            final_x,
        }
    }
}

fn at_step(step: u64) -> impl Fn(Error) -> Error {
    move |e| Error::Step { step: step as usize, source: Box::new(e) }
}

fn check_finite(gradient: &[f64]) -> Result<()> {
    match gradient.iter().position(|g| !g.is_finite()) {
        Some(i) => Err(Error::domain(format!("non-finite gradient component {i}: {}", gradient[i]))),
        None => Ok(()),
    }
}

/// Gradient steps on `x` with the configured estimator, clamped to `[δ, 1−δ]^d`.
pub fn sqd(config: &DescentConfig, oracle: &Oracle) -> Result<Trajectory> {
    config.validate()?;
    if config.estimator.is_encoded() {
        return Err(Error::Config(format!("{} runs under encoded_sqd", config.estimator)));
    }
    let mut x = config.start(oracle.dim())?.into_inner();
    let (lo, hi) = (config.clamp, 1.0 - config.clamp);
    let sign = config.direction.sign();
    let mut rng = substream(config.seed, 0);
    let mut rec = Recorder::new(config);
    let mut sample = EstimatorSample::empty(x.len());
    rec.snapshot(0, || ProbVector::new(x.clone()))?;
    for t in 1..=config.steps {
        let fail = at_step(t);
        let point = ProbVector::new(x.clone()).map_err(&fail)?;
        let prepared = config.estimator.prepare(&point).map_err(&fail)?;
        prepared.sample_into(oracle, &mut rng, &mut sample).map_err(&fail)?;
        check_finite(&sample.gradient).map_err(&fail)?;
        rec.observe(t, &sample);
        let eta = sign * config.schedule.rate(t);
        for (xi, g) in x.iter_mut().zip(&sample.gradient) {
            *xi = (*xi + eta * g).clamp(lo, hi);
        }
        rec.snapshot(t, || ProbVector::new(x.clone()))?;
    }
    let final_x = ProbVector::new(x)?;
    Ok(rec.finish(config, final_x))
}

/// Gradient steps on `e = σ̂⁻¹(x)`, clamped to `[σ̂⁻¹(δ), σ̂⁻¹(1−δ)]^d`;
/// decoded once at the end.
pub fn encoded_sqd(config: &DescentConfig, oracle: &Oracle) -> Result<Trajectory> {
    config.validate()?;
    let EstimatorSpec::EncodedEsg(tuple) = &config.estimator else {
        return Err(Error::Config(format!("encoded_sqd needs an encoded_esg estimator, got {}", config.estimator)));
    };
    let x0 = config.start(oracle.dim())?;
    let mut e = EncodedState::encode(&x0, tuple)?.as_slice().to_vec();
    let (lo, hi) = (tuple.encode(config.clamp)?, tuple.encode(1.0 - config.clamp)?);
    let sign = config.direction.sign();
    let mut rng = substream(config.seed, 0);
    let mut rec = Recorder::new(config);
    let mut sample = EstimatorSample::empty(e.len());
    let decode = |e: &[f64]| ProbVector::new(e.iter().map(|&v| tuple.decode(v)).collect());
    rec.snapshot(0, || decode(&e))?;
    for t in 1..=config.steps {
        let fail = at_step(t);
        let prepared = config.estimator.prepare_encoded(&EncodedState::from_raw(e.clone())).map_err(&fail)?;
        prepared.sample_into(oracle, &mut rng, &mut sample).map_err(&fail)?;
        check_finite(&sample.gradient).map_err(&fail)?;
        rec.observe(t, &sample);
        let eta = sign * config.schedule.rate(t);
        for (ei, g) in e.iter_mut().zip(&sample.gradient) {
            *ei = (*ei + eta * g).clamp(lo, hi);
        }
        rec.snapshot(t, || decode(&e))?;
    }
    let final_x = decode(&e)?;
    Ok(rec.finish(config, final_x))
}

/// Dispatches to [`encoded_sqd`] or [`sqd`] by estimator.
pub fn run(config: &DescentConfig, oracle: &Oracle) -> Result<Trajectory> {
    if config.estimator.is_encoded() {
        encoded_sqd(config, oracle)
    } else {
        sqd(config, oracle)
    }
}

/// Trial `index`: seed `derive_seed(base_seed, index)`; descent noise on
/// stream 0 and problem randomness (knapsack weights) on stream 1.
pub fn run_trial(config: &DescentConfig, problem: &ProblemSpec, base_seed: u64, index: u64) -> Result<Trajectory> {
    let seed = derive_seed(base_seed, index);
    let oracle = problem.instantiate(&mut substream(seed, 1))?;
    let config = DescentConfig { seed, ..config.clone() };
    run(&config, &oracle)
}

/// Runs `n_trials` independent trials in parallel; order follows the trial index.
pub fn run_repeated(
    config: &DescentConfig,
    problem: &ProblemSpec,
    n_trials: usize,
    base_seed: u64,
) -> Result<Vec<Trajectory>> {
    if n_trials == 0 {
        return Err(Error::Config("n_trials must be at least 1".into()));
    }
    (0..n_trials as u64).into_par_iter().map(|i| run_trial(config, problem, base_seed, i)).collect()
}
