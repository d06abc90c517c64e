//! Single-realization value and gradient estimators for the multilinear
//! extension `v(x) = E_{Y~P_x}[Q(Y)]`.
//!
//! * ESG: thresholded score `z = σ̂⁻¹(x) + ε` selects the queried key and the
//!   smooth weight `∏ f(|z_i|)` carries the pathwise gradient.
//! * Encoded ESG: the same with the state kept in encoding space `e`.
//! * Naive: calibrated key, `Q(K)` as value, zero pathwise gradient.
//! * REINFORCE, ARM and DisARM: score-function baselines without a value.

use std::fmt;
use std::str::FromStr;

use arrayvec::ArrayVec;
use rand::Rng;

use crate::distributions::SymmetricDistribution;
use crate::error::{Error, Result};
use crate::exact::{BinaryVector, ProbVector};
use crate::oracles::Oracle;
use crate::tuples::GoodTuple;

/// One realization of an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSample {
    /// Queried keys, in query order (two for ARM/DisARM).
    pub keys: ArrayVec<BinaryVector, 2>,
    /// Oracle responses, aligned with `keys`.
    pub responses: ArrayVec<f64, 2>,
    /// Stochastic value; `None` for score-function estimators, which have none.
    pub value: Option<f64>,
    pub gradient: Vec<f64>,
    scratch: Vec<f64>,
}

impl EstimatorSample {
    pub fn empty(dim: usize) -> Self {
        Self {
            keys: ArrayVec::new(),
            responses: ArrayVec::new(),
            value: None,
            gradient: vec![0.0; dim],
            scratch: Vec::with_capacity(dim + 1),
        }
    }

    pub fn queries(&self) -> u64 {
        self.responses.len() as u64
    }

    pub fn key(&self) -> &BinaryVector {
        &self.keys[0]
    }

    fn reset(&mut self, dim: usize, n_keys: usize) {
        self.keys.truncate(n_keys);
        while self.keys.len() < n_keys {
            self.keys.push(BinaryVector::zeros(dim));
        }
        for key in &mut self.keys {
            key.bits_mut().resize(dim, false);
        }
        self.responses.clear();
        self.gradient.clear();
        self.gradient.resize(dim, 0.0);
        self.value = None;
    }
}

/// A point in encoding space, `e = σ̂⁻¹(x)` componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedState(Vec<f64>);

impl EncodedState {
    /// Each `e_i` must satisfy `σ̂(e_i) ∈ (0,1)`.
    pub fn new(e: Vec<f64>, tuple: &GoodTuple) -> Result<Self> {
        if e.is_empty() {
            return Err(Error::domain("encoded state must have at least one component"));
        }
        for (i, &v) in e.iter().enumerate() {
            let x = tuple.decode(v);
            if !(v.is_finite() && x > 0.0 && x < 1.0) {
                return Err(Error::domain(format!(
                    "e[{i}] = {v} is outside the interior of the {} encoding support",
                    tuple.name()
                )));
            }
        }
        Ok(Self(e))
    }

    pub(crate) fn from_raw(e: Vec<f64>) -> Self {
        Self(e)
    }

    pub fn encode(x: &ProbVector, tuple: &GoodTuple) -> Result<Self> {
        x.check_interior().map_err(|e| Error::Encoding(e.to_string()))?;
        let e = x.iter().map(|&p| tuple.encode(p)).collect::<Result<Vec<_>>>()?;
        Self::new(e, tuple)
    }

    pub fn decode(&self, tuple: &GoodTuple) -> Result<ProbVector> {
        ProbVector::new(self.0.iter().map(|&v| tuple.decode(v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Which estimator to run; parsed from `esg:<tuple>`, `encoded_esg:<tuple>`,
/// `naive`, `naive:<distribution>`, `reinforce`, `arm` or `disarm`.
#[derive(Debug, Clone)]
pub enum EstimatorSpec {
    Esg(GoodTuple),
    EncodedEsg(GoodTuple),
    Naive(SymmetricDistribution),
    Reinforce,
    Arm,
    Disarm,
}

impl EstimatorSpec {
    pub fn query_cost(&self) -> u64 {
        match self {
            Self::Arm | Self::Disarm => 2,
            _ => 1,
        }
    }

    pub fn is_encoded(&self) -> bool {
        matches!(self, Self::EncodedEsg(_))
    }

    pub fn tuple(&self) -> Option<&GoodTuple> {
        match self {
            Self::Esg(t) | Self::EncodedEsg(t) => Some(t),
            _ => None,
        }
    }

    /// Proposed pathwise estimators as opposed to score-function baselines.
    pub fn is_pathwise(&self) -> bool {
        matches!(self, Self::Esg(_) | Self::EncodedEsg(_))
    }

    /// Precomputes per-coordinate constants at `x`. For the encoded estimator
    /// the gradient is taken with respect to `e = σ̂⁻¹(x)`.
    pub fn prepare(&self, x: &ProbVector) -> Result<PreparedEstimator> {
        x.check_interior()?;
        let inner = match self {
            Self::Esg(tuple) => {
                let mut e = Vec::with_capacity(x.dim());
                let mut scale = Vec::with_capacity(x.dim());
                for (i, &p) in x.iter().enumerate() {
                    let ei = tuple.encode(p)?;
                    let density = tuple.encoding_density(ei);
                    if !(density > 0.0 && density.is_finite()) {
                        return Err(Error::Tuple {
                            tuple: tuple.name().to_string(),
                            reason: format!("encoding density at σ̂⁻¹(x[{i}]) = {ei} is {density}"),
                        });
                    }
                    e.push(ei);
                    scale.push(1.0 / density);
                }
                Prepared::Pathwise { tuple: tuple.clone(), e, scale: Some(scale) }
            }
            Self::EncodedEsg(tuple) => {
                let e = EncodedState::encode(x, tuple)?;
                Prepared::Pathwise { tuple: tuple.clone(), e: e.0, scale: None }
            }
            Self::Naive(dist) => {
                let thresholds = x.iter().map(|&p| dist.inv_cdf(p)).collect::<Result<Vec<_>>>()?;
                Prepared::Naive { dist: *dist, thresholds }
            }
            Self::Reinforce => Prepared::Reinforce { x: x.to_vec() },
            Self::Arm => Prepared::Arm { x: x.to_vec() },
            Self::Disarm => Prepared::Disarm { x: x.to_vec() },
        };
        Ok(PreparedEstimator { inner })
    }

    /// Prepares the encoded estimator directly at `e`.
    pub fn prepare_encoded(&self, e: &EncodedState) -> Result<PreparedEstimator> {
        match self {
            Self::EncodedEsg(tuple) => {
                Ok(PreparedEstimator { inner: Prepared::Pathwise { tuple: tuple.clone(), e: e.0.clone(), scale: None } })
            }
            other => Err(Error::Config(format!("{other} does not operate in encoding space"))),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Esg(t) => write!(f, "esg:{}", t.name()),
            Self::EncodedEsg(t) => write!(f, "encoded_esg:{}", t.name()),
            Self::Naive(SymmetricDistribution::UniformInterval { half_width }) if *half_width == 0.5 => {
                f.write_str("naive")
            }
            Self::Naive(d) => write!(f, "naive:{d}"),
            Self::Reinforce => f.write_str("reinforce"),
            Self::Arm => f.write_str("arm"),
            Self::Disarm => f.write_str("disarm"),
        }
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.to_ascii_lowercase(), Some(a.trim())),
            None => (s.to_ascii_lowercase(), None),
        };
        match (head.as_str(), arg) {
            ("esg", Some(t)) => Ok(Self::Esg(GoodTuple::by_name(t)?)),
            ("encoded_esg", Some(t)) => Ok(Self::EncodedEsg(GoodTuple::by_name(t)?)),
            ("naive", None) => Ok(Self::Naive(SymmetricDistribution::UniformInterval { half_width: 0.5 })),
            ("naive", Some(d)) => {
                let dist: SymmetricDistribution = d.parse()?;
                if !dist.is_well_invertible() {
                    return Err(Error::NotInvertible(dist.to_string()));
                }
                Ok(Self::Naive(dist))
            }
            ("reinforce", None) => Ok(Self::Reinforce),
            ("arm", None) => Ok(Self::Arm),
            ("disarm", None) => Ok(Self::Disarm),
            _ => Err(Error::Parse(format!(
                "unknown estimator {s:?}; expected esg:<tuple>, encoded_esg:<tuple>, naive, reinforce, arm or disarm"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    Pathwise { tuple: GoodTuple, e: Vec<f64>, scale: Option<Vec<f64>> },
    Naive { dist: SymmetricDistribution, thresholds: Vec<f64> },
    Reinforce { x: Vec<f64> },
    Arm { x: Vec<f64> },
    Disarm { x: Vec<f64> },
}

/// An estimator with its per-point constants precomputed.
#[derive(Debug, Clone)]
pub struct PreparedEstimator {
    inner: Prepared,
}

impl PreparedEstimator {
    pub fn dim(&self) -> usize {
        match &self.inner {
            Prepared::Pathwise { e, .. } => e.len(),
            Prepared::Naive { thresholds, .. } => thresholds.len(),
            Prepared::Reinforce { x } | Prepared::Arm { x } | Prepared::Disarm { x } => x.len(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, oracle: &Oracle, rng: &mut R) -> Result<EstimatorSample> {
        let mut out = EstimatorSample::empty(self.dim());
        self.sample_into(oracle, rng, &mut out)?;
        Ok(out)
    }

    /// Draws one realization into `out`, reusing its buffers.
    pub fn sample_into<R: Rng + ?Sized>(&self, oracle: &Oracle, rng: &mut R, out: &mut EstimatorSample) -> Result<()> {
        if oracle.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: oracle.dim() });
        }
        match &self.inner {
            Prepared::Pathwise { tuple, e, scale } => {
                let sigma = *tuple.sigma();
                pathwise_into(tuple, e, scale.as_deref(), |_| sigma.sample(rng), oracle, out)
            }
            Prepared::Naive { dist, thresholds } => {
                out.reset(thresholds.len(), 1);
                for (bit, &t) in out.keys[0].bits_mut().iter_mut().zip(thresholds) {
                    *bit = t + dist.sample(rng) >= 0.0;
                }
                let q = oracle.query(&out.keys[0])?;
                out.responses.push(q);
                out.value = Some(q);
                Ok(())
            }
            Prepared::Reinforce { x } => {
                out.reset(x.len(), 1);
                for (bit, &p) in out.keys[0].bits_mut().iter_mut().zip(x) {
                    *bit = rng.random::<f64>() < p;
                }
                let q = oracle.query(&out.keys[0])?;
                out.responses.push(q);
                for ((g, &bit), &p) in out.gradient.iter_mut().zip(out.keys[0].as_bits()).zip(x) {
                    *g = if bit { q / p } else { -q / (1.0 - p) };
                }
                Ok(())
            }
            Prepared::Arm { x } | Prepared::Disarm { x } => {
                let disarm = matches!(self.inner, Prepared::Disarm { .. });
                antithetic_into(x, disarm, oracle, rng, out)
            }
        }
    }
}

/// Shared body of ESG and encoded ESG. `scale[i] = 1/σ̂′(e_i)` converts the
/// encoding-space derivative to probability space; `None` keeps it in `e`.
fn pathwise_into(
    tuple: &GoodTuple,
    e: &[f64],
    scale: Option<&[f64]>,
    mut noise: impl FnMut(usize) -> f64,
    oracle: &Oracle,
    out: &mut EstimatorSample,
) -> Result<()> {
    let d = e.len();
    out.reset(d, 1);
    let mut weights = std::mem::take(&mut out.scratch);
    weights.clear();
    for i in 0..d {
        let z = e[i] + noise(i);
        out.keys[0].set(i, z >= 0.0);
        let magnitude = z.abs();
        weights.push(tuple.f(magnitude));
        // d f(|z|) / dz; zero at z = 0 where f vanishes on both sides.
        let slope = if z > 0.0 {
            tuple.f_prime(magnitude)
        } else if z < 0.0 {
            -tuple.f_prime(magnitude)
        } else {
            0.0
        };
        out.gradient[i] = slope * scale.map_or(1.0, |s| s[i]);
    }
    let q = oracle.query(&out.keys[0])?;
    out.responses.push(q);
    // suffix[i] = ∏_{j ≥ i} f_j, stored after the weights.
    weights.resize(2 * d + 1, 1.0);
    for i in (0..d).rev() {
        weights[d + i] = weights[d + i + 1] * weights[i];
    }
    out.value = Some(q * weights[d]);
    let mut prefix = 1.0;
    for i in 0..d {
        out.gradient[i] *= q * prefix * weights[d + i + 1];
        prefix *= weights[i];
    }
    out.scratch = weights;
    Ok(())
}

fn antithetic_into<R: Rng + ?Sized>(
    x: &[f64],
    disarm: bool,
    oracle: &Oracle,
    rng: &mut R,
    out: &mut EstimatorSample,
) -> Result<()> {
    let d = x.len();
    out.reset(d, 2);
    let mut u = std::mem::take(&mut out.scratch);
    u.clear();
    for (i, &p) in x.iter().enumerate() {
        let ui: f64 = rng.random();
        // With φ = logit(p): sigmoid(−φ) = 1 − p and sigmoid(φ) = p.
        out.keys[0].set(i, ui > 1.0 - p);
        out.keys[1].set(i, ui < p);
        u.push(ui);
    }
    let q1 = oracle.query(&out.keys[0])?;
    let q2 = oracle.query(&out.keys[1])?;
    out.responses.push(q1);
    out.responses.push(q2);
    let diff = q1 - q2;
    for i in 0..d {
        let p = x[i];
        // Chain rule from logits: dφ/dp = 1 / (p(1 − p)).
        let jacobian = 1.0 / (p * (1.0 - p));
        let logit_grad = if disarm {
            let (b1, b2) = (out.keys[0].as_bits()[i], out.keys[1].as_bits()[i]);
            if b1 == b2 {
                0.0
            } else {
                let sign = if b2 { -1.0 } else { 1.0 };
                0.5 * diff * sign * p.max(1.0 - p)
            }
        } else {
            diff * (u[i] - 0.5)
        };
        out.gradient[i] = logit_grad * jacobian;
    }
    out.scratch = u;
    Ok(())
}

/// Easy stochastic gradient at `x`: one oracle call, unbiased value and
/// gradient.
pub fn esg<R: Rng + ?Sized>(x: &ProbVector, tuple: &GoodTuple, oracle: &Oracle, rng: &mut R) -> Result<EstimatorSample> {
    EstimatorSpec::Esg(tuple.clone()).prepare(x)?.sample(oracle, rng)
}

/// [`esg`] with the noise `ε` supplied by the caller.
pub fn esg_with_noise(x: &ProbVector, tuple: &GoodTuple, oracle: &Oracle, noise: &[f64]) -> Result<EstimatorSample> {
    let prepared = EstimatorSpec::Esg(tuple.clone()).prepare(x)?;
    let Prepared::Pathwise { e, scale, .. } = &prepared.inner else { unreachable!() };
    with_noise(tuple, e, scale.as_deref(), oracle, noise)
}

/// Encoded easy stochastic gradient: the gradient is with respect to `e`.
pub fn encoded_esg<R: Rng + ?Sized>(
    e: &EncodedState,
    tuple: &GoodTuple,
    oracle: &Oracle,
    rng: &mut R,
) -> Result<EstimatorSample> {
    EstimatorSpec::EncodedEsg(tuple.clone()).prepare_encoded(e)?.sample(oracle, rng)
}

pub fn encoded_esg_with_noise(
    e: &EncodedState,
    tuple: &GoodTuple,
    oracle: &Oracle,
    noise: &[f64],
) -> Result<EstimatorSample> {
    with_noise(tuple, &e.0, None, oracle, noise)
}

fn with_noise(tuple: &GoodTuple, e: &[f64], scale: Option<&[f64]>, oracle: &Oracle, noise: &[f64]) -> Result<EstimatorSample> {
    if noise.len() != e.len() {
        return Err(Error::DimensionMismatch { expected: e.len(), actual: noise.len() });
    }
    if oracle.dim() != e.len() {
        return Err(Error::DimensionMismatch { expected: e.len(), actual: oracle.dim() });
    }
    let mut out = EstimatorSample::empty(e.len());
    pathwise_into(tuple, e, scale, |i| noise[i], oracle, &mut out)?;
    Ok(out)
}

/// `Q(K)` with a calibrated key `K ~ P_x`; the pathwise gradient is zero.
pub fn naive_value<R: Rng + ?Sized>(
    x: &ProbVector,
    dist: &SymmetricDistribution,
    oracle: &Oracle,
    rng: &mut R,
) -> Result<EstimatorSample> {
    EstimatorSpec::Naive(*dist).prepare(x)?.sample(oracle, rng)
}

/// Score-function gradient `Q(Y) ∇_x log P_x(Y)` in probability space.
pub fn reinforce<R: Rng + ?Sized>(x: &ProbVector, oracle: &Oracle, rng: &mut R) -> Result<EstimatorSample> {
    EstimatorSpec::Reinforce.prepare(x)?.sample(oracle, rng)
}

/// Augment-REINFORCE-merge with a shared uniform; two oracle calls.
pub fn arm<R: Rng + ?Sized>(x: &ProbVector, oracle: &Oracle, rng: &mut R) -> Result<EstimatorSample> {
    EstimatorSpec::Arm.prepare(x)?.sample(oracle, rng)
}

/// DisARM: ARM with the antithetic pair integrated out per coordinate.
pub fn disarm<R: Rng + ?Sized>(x: &ProbVector, oracle: &Oracle, rng: &mut R) -> Result<EstimatorSample> {
    EstimatorSpec::Disarm.prepare(x)?.sample(oracle, rng)
}

/// Streaming moments of an estimator at a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSummary {
    pub n_samples: usize,
    pub mean_gradient: Vec<f64>,
    /// Unbiased per-coordinate sample variance.
    pub gradient_variance: Vec<f64>,
    pub gradient_std_err: Vec<f64>,
    pub mean_value: Option<f64>,
    pub value_variance: Option<f64>,
    pub value_std_err: Option<f64>,
    /// Empirical `P[k_i = 1]` of the first queried key.
    pub key_frequency: Vec<f64>,
    pub total_queries: u64,
}

#[derive(Debug, Clone, Default)]
struct Welford {
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, n: usize, v: f64) {
        let delta = v - self.mean;
        self.mean += delta / n as f64;
        self.m2 += delta * (v - self.mean);
    }

    fn variance(&self, n: usize) -> f64 {
        self.m2 / (n - 1) as f64
    }
}

/// Draws `n_samples` realizations at `x` and accumulates their moments.
pub fn estimate_mean_and_variance<R: Rng + ?Sized>(
    spec: &EstimatorSpec,
    x: &ProbVector,
    oracle: &Oracle,
    n_samples: usize,
    rng: &mut R,
) -> Result<EstimateSummary> {
    if n_samples < 2 {
        return Err(Error::domain(format!("need at least 2 samples, got {n_samples}")));
    }
    let prepared = spec.prepare(x)?;
    let d = x.dim();
    let start_calls = oracle.calls();
    let mut grads = vec![Welford::default(); d];
    let mut value = Welford::default();
    let mut has_value = true;
    let mut ones = vec![0usize; d];
    let mut sample = EstimatorSample::empty(d);
    for n in 1..=n_samples {
        prepared.sample_into(oracle, rng, &mut sample)?;
        for (acc, &g) in grads.iter_mut().zip(&sample.gradient) {
            acc.push(n, g);
        }
        match sample.value {
            Some(v) => value.push(n, v),
            None => has_value = false,
        }
        for (count, &bit) in ones.iter_mut().zip(sample.keys[0].as_bits()) {
            *count += usize::from(bit);
        }
    }
    let gradient_variance: Vec<f64> = grads.iter().map(|a| a.variance(n_samples)).collect();
    let value_variance = has_value.then(|| value.variance(n_samples));
    Ok(EstimateSummary {
        n_samples,
        mean_gradient: grads.iter().map(|a| a.mean).collect(),
        gradient_std_err: gradient_variance.iter().map(|v| (v / n_samples as f64).sqrt()).collect(),
        gradient_variance,
        mean_value: has_value.then_some(value.mean),
        value_std_err: value_variance.map(|v| (v / n_samples as f64).sqrt()),
        value_variance,
        key_frequency: ones.iter().map(|&c| c as f64 / n_samples as f64).collect(),
        total_queries: oracle.calls() - start_calls,
    })
}
