//! Brute-force multilinear extension and its gradient: the ground truth every
//! estimator is tested against.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::oracles::Oracle;

/// Enumeration is refused above this dimension (2^25 ≈ 3·10⁷ oracle calls).
pub const MAX_ENUMERATION_DIM: usize = 25;

/// A vector of Bernoulli parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Every component must lie in `[0, 1]`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("probability vector must have at least one component"));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("component {i} = {v} is outside [0,1]")));
        }
        Ok(Self(values))
    }

    /// Every component must lie strictly inside `(0, 1)`.
    pub fn interior(values: Vec<f64>) -> Result<Self> {
        let p = Self::new(values)?;
        p.check_interior()?;
        Ok(p)
    }

    pub fn filled(dim: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; dim])
    }

    pub fn check_interior(&self) -> Result<()> {
        match self.0.iter().enumerate().find(|(_, v)| !(**v > 0.0 && **v < 1.0)) {
            Some((i, v)) => Err(Error::domain(format!("component {i} = {v} is not strictly inside (0,1)"))),
            None => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl FromStr for ProbVector {
    type Err = Error;

    /// Comma-separated probabilities, e.g. `0.2,0.5,0.9`.
    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad probability {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(values)
    }
}

/// A vertex of the hypercube.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryVector(Vec<bool>);

impl BinaryVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![false; dim])
    }

    pub fn ones(dim: usize) -> Self {
        Self(vec![true; dim])
    }

    /// Coordinate `i` is bit `i` of `index`.
    pub fn from_index(dim: usize, index: u64) -> Self {
        Self((0..dim).map(|i| index >> i & 1 == 1).collect())
    }

    pub fn to_index(&self) -> u64 {
        self.0.iter().enumerate().fold(0, |acc, (i, &b)| acc | (u64::from(b) << i))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn hamming_weight(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = bit;
    }

    pub fn as_bits(&self) -> &[bool] {
        &self.0
    }

    pub(crate) fn bits_mut(&mut self) -> &mut Vec<bool> {
        &mut self.0
    }
}

impl fmt::Display for BinaryVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BinaryVector {
    type Err = Error;

    /// A string of `0`/`1` characters; the first character is coordinate 0.
    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(format!("bad bit {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

fn check_enumerable(x: &ProbVector, oracle: &Oracle) -> Result<()> {
    if x.dim() != oracle.dim() {
        return Err(Error::DimensionMismatch { expected: oracle.dim(), actual: x.dim() });
    }
    if x.dim() > MAX_ENUMERATION_DIM {
        return Err(Error::DimensionTooLarge { dim: x.dim(), limit: MAX_ENUMERATION_DIM });
    }
    Ok(())
}

/// `v(x) = Σ_y Q(y) ∏_i [x_i y_i + (1 − x_i)(1 − y_i)]`, by full enumeration
/// (2^d oracle calls).
pub fn multilinear_value(x: &ProbVector, oracle: &Oracle) -> Result<f64> {
    check_enumerable(x, oracle)?;
    let mut y = BinaryVector::zeros(x.dim());
    let mut total = 0.0;
    descend(x, oracle, 0, 1.0, &mut y, &mut total)?;
    Ok(total)
}

fn descend(x: &[f64], oracle: &Oracle, i: usize, weight: f64, y: &mut BinaryVector, total: &mut f64) -> Result<()> {
    if i == x.len() {
        *total += weight * oracle.query(y)?;
        return Ok(());
    }
    y.set(i, false);
    descend(x, oracle, i + 1, weight * (1.0 - x[i]), y, total)?;
    y.set(i, true);
    descend(x, oracle, i + 1, weight * x[i], y, total)?;
    y.set(i, false);
    Ok(())
}

/// `∇v(x)`, with component `i` equal to `v(x | x_i=1) − v(x | x_i=0)`.
///
/// One enumeration pass (2^d oracle calls); the conditioned weights come
/// from prefix/suffix products so boundary components need no division.
pub fn multilinear_gradient(x: &ProbVector, oracle: &Oracle) -> Result<Vec<f64>> {
    multilinear_value_and_gradient(x, oracle).map(|(_, g)| g)
}

/// Value and gradient from a single enumeration pass.
pub fn multilinear_value_and_gradient(x: &ProbVector, oracle: &Oracle) -> Result<(f64, Vec<f64>)> {
    check_enumerable(x, oracle)?;
    let d = x.dim();
    let mut grad = vec![0.0; d];
    let mut value = 0.0;
    let mut weights = vec![0.0; d];
    let mut suffix = vec![1.0; d + 1];
    for index in 0..1u64 << d {
        let y = BinaryVector::from_index(d, index);
        let q = oracle.query(&y)?;
        for (i, &b) in y.as_bits().iter().enumerate() {
            weights[i] = if b { x[i] } else { 1.0 - x[i] };
        }
        for i in (0..d).rev() {
            suffix[i] = suffix[i + 1] * weights[i];
        }
        value += q * suffix[0];
        let mut prefix = 1.0;
        for (i, &b) in y.as_bits().iter().enumerate() {
            let others = prefix * suffix[i + 1];
            grad[i] += if b { q * others } else { -q * others };
            prefix *= weights[i];
        }
    }
    Ok((value, grad))
}

/// Central differences of [`multilinear_value`] with step `h`.
pub fn finite_difference_gradient(x: &ProbVector, oracle: &Oracle, h: f64) -> Result<Vec<f64>> {
    if h.is_nan() || h <= 0.0 {
        return Err(Error::domain(format!("step must be positive, got {h}")));
    }
    check_enumerable(x, oracle)?;
    (0..x.dim())
        .map(|i| {
            let shifted = |delta: f64| {
                let mut v = x.to_vec();
                v[i] += delta;
                ProbVector::new(v).map_err(|_| {
                    Error::domain(format!("x[{i}] ± {h} leaves [0,1] (x[{i}] = {})", x[i]))
                })
            };
            let up = multilinear_value(&shifted(h)?, oracle)?;
            let down = multilinear_value(&shifted(-h)?, oracle)?;
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}
