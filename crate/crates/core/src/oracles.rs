//! Pointwise oracles `Q: {0,1}^d → ℝ` with query accounting, and the
//! benchmark problems.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::exact::{BinaryVector, MAX_ENUMERATION_DIM};

pub type ObjectiveFn = Arc<dyn Fn(&BinaryVector) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum OracleKind {
    /// Dense table indexed by [`BinaryVector::to_index`].
    Table { dim: usize, values: Vec<f64> },
    /// Piecewise payoff of the Hamming weight with a plateau around `d/2`.
    SymmetricSlice { dim: usize },
    /// Payoff bands around half the total weight of the selected items.
    Knapsack { weights: Vec<u32>, target: u64 },
    Custom { dim: usize, objective: ObjectiveFn },
}

impl fmt::Debug for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Table { dim, .. } => write!(f, "Table {{ dim: {dim} }}"),
            Self::SymmetricSlice { dim } => write!(f, "SymmetricSlice {{ dim: {dim} }}"),
            Self::Knapsack { weights, target } => write!(f, "Knapsack {{ weights: {weights:?}, target: {target} }}"),
            Self::Custom { dim, .. } => write!(f, "Custom {{ dim: {dim} }}"),
        }
    }
}

/// A black-box objective. Every [`Oracle::query`] increments an atomic
/// counter, so an oracle can be shared across threads.
#[derive(Debug)]
pub struct Oracle {
    kind: OracleKind,
    calls: AtomicU64,
}

impl Clone for Oracle {
    fn clone(&self) -> Self {
        Self { kind: self.kind.clone(), calls: AtomicU64::new(self.calls()) }
    }
}

pub fn hamming_weight(y: &BinaryVector) -> usize {
    y.hamming_weight()
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::domain("oracle dimension must be at least 1"))
    } else {
        Ok(())
    }
}

impl Oracle {
    fn from_kind(kind: OracleKind) -> Self {
        Self { kind, calls: AtomicU64::new(0) }
    }

    pub fn table(dim: usize, values: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if dim > MAX_ENUMERATION_DIM {
            return Err(Error::DimensionTooLarge { dim, limit: MAX_ENUMERATION_DIM });
        }
        if values.len() != 1 << dim {
            return Err(Error::Construction(format!(
                "table of dimension {dim} needs {} values, got {}",
                1u64 << dim,
                values.len()
            )));
        }
        Ok(Self::from_kind(OracleKind::Table { dim, values }))
    }

    /// Tabulates `f` over every vertex.
    pub fn table_from_fn(dim: usize, f: impl Fn(&BinaryVector) -> f64) -> Result<Self> {
        check_dim(dim)?;
        if dim > MAX_ENUMERATION_DIM {
            return Err(Error::DimensionTooLarge { dim, limit: MAX_ENUMERATION_DIM });
        }
        Self::table(dim, (0..1u64 << dim).map(|i| f(&BinaryVector::from_index(dim, i))).collect())
    }

    /// Reads a CSV with header `bits,value`; `bits` is a string of `0`/`1`
    /// whose first character is coordinate 0. Every vertex must appear once.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "bits" || &headers[1] != "value" {
            return Err(Error::Parse(format!("{}: header must be `bits,value`", path.display())));
        }
        let mut entries = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            let bits: BinaryVector = record[0].parse()?;
            let value: f64 = record[1]
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad value {:?}", path.display(), &record[1])))?;
            entries.push((bits, value));
        }
        let dim = entries.first().map(|(b, _)| b.dim()).ok_or_else(|| Error::EmptyInput(path.display().to_string()))?;
        check_dim(dim)?;
        if dim > MAX_ENUMERATION_DIM {
            return Err(Error::DimensionTooLarge { dim, limit: MAX_ENUMERATION_DIM });
        }
        let mut values = vec![None; 1 << dim];
        for (bits, value) in entries {
            if bits.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, actual: bits.dim() });
            }
            let slot = &mut values[bits.to_index() as usize];
            if slot.is_some() {
                return Err(Error::Parse(format!("{}: duplicate row for {bits}", path.display())));
            }
            *slot = Some(value);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                v.ok_or_else(|| {
                    Error::Parse(format!("{}: missing row for {}", path.display(), BinaryVector::from_index(dim, i as u64)))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::table(dim, values)
    }

    pub fn symmetric_slice(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::from_kind(OracleKind::SymmetricSlice { dim }))
    }

    /// Draws weights i.i.d. uniform on `{1, …, 9}` from `rng`.
    pub fn knapsack<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        check_dim(dim)?;
        Self::knapsack_with_weights((0..dim).map(|_| rng.random_range(1..=9)).collect())
    }

    /// Target is `⌊Σ w_i / 2⌋`.
    pub fn knapsack_with_weights(weights: Vec<u32>) -> Result<Self> {
        check_dim(weights.len())?;
        if weights.contains(&0) {
            return Err(Error::domain("knapsack weights must be positive"));
        }
        let target = weights.iter().map(|&w| u64::from(w)).sum::<u64>() / 2;
        Ok(Self::from_kind(OracleKind::Knapsack { weights, target }))
    }

    pub fn custom(dim: usize, objective: impl Fn(&BinaryVector) -> f64 + Send + Sync + 'static) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::from_kind(OracleKind::Custom { dim, objective: Arc::new(objective) }))
    }

    pub fn kind(&self) -> &OracleKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            OracleKind::Table { dim, .. } | OracleKind::SymmetricSlice { dim } | OracleKind::Custom { dim, .. } => *dim,
            OracleKind::Knapsack { weights, .. } => weights.len(),
        }
    }

    /// Evaluates `Q(y)` and counts one call.
    pub fn query(&self, y: &BinaryVector) -> Result<f64> {
        if y.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: y.dim() });
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(self.evaluate(y))
    }

    fn evaluate(&self, y: &BinaryVector) -> f64 {
        match &self.kind {
            OracleKind::Table { values, .. } => values[y.to_index() as usize],
            OracleKind::SymmetricSlice { dim } => slice_payoff(*dim, y.hamming_weight()),
            OracleKind::Knapsack { weights, target } => {
                let load: u64 = weights.iter().zip(y.as_bits()).filter(|(_, &b)| b).map(|(&w, _)| u64::from(w)).sum();
                knapsack_payoff(load, *target)
            }
            OracleKind::Custom { objective, .. } => objective(y),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_counter(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }
}

/// First matching case wins: all-ones spike, plateau, low band, zero.
fn slice_payoff(dim: usize, weight: usize) -> f64 {
    let half = dim / 2;
    let plateau = (0.133 * dim as f64).floor() as usize;
    let low = (0.233 * dim as f64).floor() as usize;
    if weight == dim {
        3.0
    } else if weight.abs_diff(half) <= plateau {
        18.0
    } else if weight <= low {
        -2.0
    } else {
        0.0
    }
}

fn knapsack_payoff(load: u64, target: u64) -> f64 {
    if load + 2 >= target && load <= target + 2 {
        20.0
    } else if load > target + 2 {
        -5.0
    } else {
        0.0
    }
}

/// A problem named on the command line or in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProblemSpec {
    Slice(usize),
    Knapsack(usize),
    Table(PathBuf),
}

impl ProblemSpec {
    /// Builds the oracle; knapsack weights are drawn from `rng`.
    pub fn instantiate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Oracle> {
        match self {
            Self::Slice(d) => Oracle::symmetric_slice(*d),
            Self::Knapsack(d) => Oracle::knapsack(*d, rng),
            Self::Table(path) => Oracle::from_csv(path),
        }
    }

    /// Resolves a relative table path against `base`.
    pub fn relative_to(&self, base: &Path) -> Self {
        match self {
            Self::Table(p) if p.is_relative() => Self::Table(base.join(p)),
            other => other.clone(),
        }
    }
}

impl FromStr for ProblemSpec {
    type Err = Error;

    /// `slice:<d>`, `knapsack:<d>` or `table:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = s.split_once(':').ok_or_else(|| Error::Parse(format!("bad problem {s:?}")))?;
        let dim = || {
            arg.trim()
                .parse::<usize>()
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::Parse(format!("bad dimension in {s:?}")))
        };
        match name.trim().to_ascii_lowercase().as_str() {
            "slice" => Ok(Self::Slice(dim()?)),
            "knapsack" => Ok(Self::Knapsack(dim()?)),
            "table" if !arg.trim().is_empty() => Ok(Self::Table(PathBuf::from(arg.trim()))),
            _ => Err(Error::Parse(format!("bad problem {s:?}; expected slice:<d>, knapsack:<d> or table:<path>"))),
        }
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Slice(d) => write!(f, "slice:{d}"),
            Self::Knapsack(d) => write!(f, "knapsack:{d}"),
            Self::Table(p) => write!(f, "table:{}", p.display()),
        }
    }
}
