//! Symmetric one-dimensional distributions used as noise sources and as
//! encodings of Bernoulli probabilities.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const BISECTION_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;

/// A symmetric distribution on the real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SymmetricDistribution {
    /// `Unif[-half_width, half_width]`.
    UniformInterval { half_width: f64 },
    /// `Unif{-magnitude, +magnitude}`.
    TwoPoint { magnitude: f64 },
    /// `½ N(center, std²) + ½ N(-center, std²)`.
    GaussianMixture { center: f64, std: f64 },
}

pub(crate) fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

pub(crate) fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be a positive finite number, got {v}")))
    }
}

impl SymmetricDistribution {
    pub fn uniform(half_width: f64) -> Result<Self> {
        check_positive("half_width", half_width)?;
        Ok(Self::UniformInterval { half_width })
    }

    pub fn two_point(magnitude: f64) -> Result<Self> {
        check_positive("magnitude", magnitude)?;
        Ok(Self::TwoPoint { magnitude })
    }

    pub fn gaussian_mixture(center: f64, std: f64) -> Result<Self> {
        check_positive("center", center)?;
        check_positive("std", std)?;
        Ok(Self::GaussianMixture { center, std })
    }

    /// Continuous, strictly increasing on the interior of its support.
    pub fn is_well_invertible(&self) -> bool {
        !matches!(self, Self::TwoPoint { .. })
    }

    pub fn has_density(&self) -> bool {
        self.is_well_invertible()
    }

    /// Closed hull of the support; infinite for the Gaussian mixture.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::UniformInterval { half_width: c } | Self::TwoPoint { magnitude: c } => (-c, c),
            Self::GaussianMixture { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// `P[ε ≤ z]`.
    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            Self::UniformInterval { half_width: c } => ((z + c) / (2.0 * c)).clamp(0.0, 1.0),
            Self::TwoPoint { magnitude: c } => {
                if z < -c {
                    0.0
                } else if z < c {
                    0.5
                } else {
                    1.0
                }
            }
            Self::GaussianMixture { center: m, std: s } => {
                0.5 * (std_normal_cdf((z - m) / s) + std_normal_cdf((z + m) / s))
            }
        }
    }

    /// The unique `z` in the interior of the support with `cdf(z) = x`.
    pub fn inv_cdf(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::domain(format!("inverse cdf needs x in (0,1), got {x}")));
        }
        match *self {
            Self::UniformInterval { half_width: c } => Ok(c * (2.0 * x - 1.0)),
            Self::TwoPoint { .. } => Err(Error::NotInvertible(self.to_string())),
            Self::GaussianMixture { center: m, std: s } => {
                if x == 0.5 {
                    return Ok(0.0);
                }
                let mut lo = -m - 40.0 * s;
                let mut hi = m + 40.0 * s;
                while self.cdf(lo) > x {
                    lo *= 2.0;
                }
                while self.cdf(hi) < x {
                    hi *= 2.0;
                }
                for _ in 0..BISECTION_MAX_ITER {
                    if hi - lo <= BISECTION_TOL {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < x {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Ok(0.5 * (lo + hi))
            }
        }
    }

    pub fn density(&self, z: f64) -> Result<f64> {
        match *self {
            Self::UniformInterval { half_width: c } => Ok(if z.abs() <= c { 0.5 / c } else { 0.0 }),
            Self::TwoPoint { .. } => Err(Error::NoDensity(self.to_string())),
            Self::GaussianMixture { center: m, std: s } => {
                Ok(0.5 * (std_normal_pdf((z - m) / s) + std_normal_pdf((z + m) / s)) / s)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::UniformInterval { half_width: c } => c * (2.0 * rng.random::<f64>() - 1.0),
            Self::TwoPoint { magnitude: c } => {
                if rng.random::<bool>() {
                    c
                } else {
                    -c
                }
            }
            Self::GaussianMixture { center: m, std: s } => {
                let n: f64 = rng.sample(StandardNormal);
                let v = m + s * n;
                if rng.random::<bool>() {
                    v
                } else {
                    -v
                }
            }
        }
    }
}

/// Empirical frequency of `1{inv_cdf(x) + ε ≥ 0}` over `n_samples` noise draws.
///
/// For a well-invertible `dist` the thresholded key is exactly Bernoulli(x).
pub fn check_calibrated_key<R: Rng + ?Sized>(
    dist: &SymmetricDistribution,
    x: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::EmptyInput("n_samples must be positive".into()));
    }
    let threshold = dist.inv_cdf(x)?;
    let hits = (0..n_samples).filter(|_| threshold + dist.sample(rng) >= 0.0).count();
    Ok(hits as f64 / n_samples as f64)
}

impl fmt::Display for SymmetricDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UniformInterval { half_width } => write!(f, "uniform({half_width})"),
            Self::TwoPoint { magnitude } => write!(f, "twopoint({magnitude})"),
            Self::GaussianMixture { center, std } => write!(f, "bigauss({center},{std})"),
        }
    }
}

impl FromStr for SymmetricDistribution {
    type Err = Error;

    /// Parses `uniform(c)`, `twopoint(c)` or `bigauss(m,s)`, case-insensitively.
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        let bad = || Error::Parse(format!("unrecognized distribution {s:?}"));
        let open = compact.find('(').ok_or_else(bad)?;
        let args = compact[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let args: Vec<f64> = args
            .split(',')
            .map(|a| a.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        match (&compact[..open], args.as_slice()) {
            ("uniform", [c]) => Self::uniform(*c),
            ("twopoint", [c]) => Self::two_point(*c),
            ("bigauss", [m, sd]) => Self::gaussian_mixture(*m, *sd),
            _ => Err(bad()),
        }
    }
}
