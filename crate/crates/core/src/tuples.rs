//! Good tuples `(f, σ, σ̂)`: a main function that vanishes on the
//! nonpositives, a symmetric noise distribution `σ` and a symmetric,
//! positively differentiable encoding distribution `σ̂`, tied together by the
//! calibration identity `E_{ε~σ}[f(σ̂⁻¹(x) + ε)] = x` for every `x ∈ (0,1)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::distributions::SymmetricDistribution;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_with_breaks};
use crate::rng::stream;

/// The main function `f` of a good tuple.
pub trait MainFunction: Send + Sync + fmt::Debug {
    fn value(&self, z: f64) -> f64;

    /// Derivative of `f`; zero at the points listed by [`MainFunction::kinks`].
    fn derivative(&self, z: f64) -> f64;

    /// Points where `f` is not differentiable.
    fn kinks(&self) -> &[f64] {
        &[]
    }
}

/// The encoding distribution `σ̂`: a CDF that is a bijection from the interior
/// of its support onto `(0,1)`.
pub trait Encoding: Send + Sync + fmt::Debug {
    fn cdf(&self, z: f64) -> f64;
    fn inv_cdf(&self, x: f64) -> Result<f64>;
    fn density(&self, z: f64) -> f64;
    fn support(&self) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShippedMain {
    Spike,
    Arch,
    Cosine,
    LongJump,
    HalfAngleCosine,
}

impl MainFunction for ShippedMain {
    fn value(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Spike => {
                if z <= 0.5 {
                    4.0 * z
                } else if z <= 1.0 {
                    4.0 * (1.0 - z)
                } else {
                    0.0
                }
            }
            Self::Arch => {
                if z <= 1.0 {
                    0.5 * PI * (PI * z).sin()
                } else {
                    0.0
                }
            }
            Self::Cosine => {
                if z <= 1.0 {
                    1.0 - (2.0 * PI * z).cos()
                } else {
                    0.0
                }
            }
            Self::LongJump => (2.0 * z - 1.0).max(0.0),
            Self::HalfAngleCosine => 1.0 - (0.5 * z).cos(),
        }
    }

    fn derivative(&self, z: f64) -> f64 {
        if z <= 0.0 || self.kinks().contains(&z) {
            return 0.0;
        }
        match self {
            Self::Spike => {
                if z < 0.5 {
                    4.0
                } else if z < 1.0 {
                    -4.0
                } else {
                    0.0
                }
            }
            Self::Arch => {
                if z < 1.0 {
                    0.5 * PI * PI * (PI * z).cos()
                } else {
                    0.0
                }
            }
            Self::Cosine => {
                if z < 1.0 {
                    2.0 * PI * (2.0 * PI * z).sin()
                } else {
                    0.0
                }
            }
            Self::LongJump => {
                if z > 0.5 {
                    2.0
                } else {
                    0.0
                }
            }
            Self::HalfAngleCosine => 0.5 * (0.5 * z).sin(),
        }
    }

    fn kinks(&self) -> &[f64] {
        match self {
            Self::Spike => &[0.0, 0.5, 1.0],
            Self::Arch => &[0.0, 1.0],
            Self::Cosine | Self::HalfAngleCosine => &[],
            Self::LongJump => &[0.5],
        }
    }
}

fn check_unit_open(x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("encoding needs x in (0,1), got {x}")))
    }
}

/// `Unif[-c, c]` used as an encoding.
#[derive(Debug, Clone, Copy)]
pub struct UniformEncoding {
    pub half_width: f64,
}

impl Encoding for UniformEncoding {
    fn cdf(&self, z: f64) -> f64 {
        ((z + self.half_width) / (2.0 * self.half_width)).clamp(0.0, 1.0)
    }

    fn inv_cdf(&self, x: f64) -> Result<f64> {
        check_unit_open(x)?;
        Ok(self.half_width * (2.0 * x - 1.0))
    }

    fn density(&self, z: f64) -> f64 {
        if z.abs() <= self.half_width {
            0.5 / self.half_width
        } else {
            0.0
        }
    }

    fn support(&self) -> (f64, f64) {
        (-self.half_width, self.half_width)
    }
}

/// Piecewise quadratic encoding paired with the spike.
#[derive(Debug, Clone, Copy)]
pub struct SpikeEncoding;

impl Encoding for SpikeEncoding {
    fn cdf(&self, z: f64) -> f64 {
        if z <= -0.5 {
            0.0
        } else if z <= 0.0 {
            2.0 * (0.5 + z).powi(2)
        } else if z < 0.5 {
            1.0 - 2.0 * (0.5 - z).powi(2)
        } else {
            1.0
        }
    }

    fn inv_cdf(&self, x: f64) -> Result<f64> {
        check_unit_open(x)?;
        Ok(if x <= 0.5 { (0.5 * x).sqrt() - 0.5 } else { 0.5 - (0.5 * (1.0 - x)).sqrt() })
    }

    fn density(&self, z: f64) -> f64 {
        if z.abs() < 0.5 {
            2.0 - 4.0 * z.abs()
        } else {
            0.0
        }
    }

    fn support(&self) -> (f64, f64) {
        (-0.5, 0.5)
    }
}

/// `(1 + sin πz) / 2` on `[-½, ½]`.
#[derive(Debug, Clone, Copy)]
pub struct ArchEncoding;

impl Encoding for ArchEncoding {
    fn cdf(&self, z: f64) -> f64 {
        if z <= -0.5 {
            0.0
        } else if z >= 0.5 {
            1.0
        } else {
            0.5 * (1.0 + (PI * z).sin())
        }
    }

    fn inv_cdf(&self, x: f64) -> Result<f64> {
        check_unit_open(x)?;
        Ok((2.0 * x - 1.0).asin() / PI)
    }

    fn density(&self, z: f64) -> f64 {
        if z.abs() < 0.5 {
            0.5 * PI * (PI * z).cos()
        } else {
            0.0
        }
    }

    fn support(&self) -> (f64, f64) {
        (-0.5, 0.5)
    }
}

/// `z + ½ + sin(2πz) / 2π` on `[-½, ½]`; inverted numerically.
#[derive(Debug, Clone, Copy)]
pub struct CosineEncoding;

impl Encoding for CosineEncoding {
    fn cdf(&self, z: f64) -> f64 {
        if z <= -0.5 {
            0.0
        } else if z >= 0.5 {
            1.0
        } else {
            z + 0.5 + (2.0 * PI * z).sin() / (2.0 * PI)
        }
    }

    fn inv_cdf(&self, x: f64) -> Result<f64> {
        check_unit_open(x)?;
        Ok(solve_increasing(|z| self.cdf(z) - x, |z| self.density(z), -0.5, 0.5, x - 0.5))
    }

    fn density(&self, z: f64) -> f64 {
        if z.abs() < 0.5 {
            1.0 + (2.0 * PI * z).cos()
        } else {
            0.0
        }
    }

    fn support(&self) -> (f64, f64) {
        (-0.5, 0.5)
    }
}

/// Safeguarded Newton iteration for the root of an increasing `g` on `[lo, hi]`
/// with `g(lo) ≤ 0 ≤ g(hi)`.
fn solve_increasing<G, D>(g: G, dg: D, mut lo: f64, mut hi: f64, start: f64) -> f64
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut z = start.clamp(lo, hi);
    for _ in 0..200 {
        let r = g(z);
        if r == 0.0 {
            return z;
        }
        if r < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let slope = dg(z);
        let newton = z - r / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - z).abs() <= 4.0 * f64::EPSILON * z.abs().max(1e-300) || hi - lo <= f64::EPSILON * z.abs() {
            return next;
        }
        z = next;
    }
    z
}

/// `E_{ε~σ}[f(z + ε)]`, i.e. the convolution `(f ∗ σ′)(z)`, by quadrature
/// (or the exact two-point average for atomic noise).
pub fn smoothed_main(f: &dyn MainFunction, sigma: &SymmetricDistribution, z: f64) -> f64 {
    const TOL: f64 = 1e-13;
    match *sigma {
        SymmetricDistribution::TwoPoint { magnitude: c } => 0.5 * (f.value(z + c) + f.value(z - c)),
        SymmetricDistribution::UniformInterval { half_width: c } => {
            let mut breaks = vec![0.0];
            breaks.extend_from_slice(f.kinks());
            integrate_with_breaks(|u| f.value(u), z - c, z + c, &breaks, TOL) / (2.0 * c)
        }
        SymmetricDistribution::GaussianMixture { center: m, std: s } => {
            let reach = m + 12.0 * s;
            let mut breaks = vec![-m, m, -z];
            breaks.extend(f.kinks().iter().map(|k| k - z));
            integrate_with_breaks(|e| f.value(z + e) * sigma.density(e).unwrap_or(0.0), -reach, reach, &breaks, TOL)
        }
    }
}

/// `(f′ ∗ σ′)(z)`; the density of the encoding induced by `(f, σ)`.
fn smoothed_main_derivative(f: &dyn MainFunction, sigma: &SymmetricDistribution, z: f64) -> f64 {
    match *sigma {
        SymmetricDistribution::GaussianMixture { center: m, std: s } => {
            let reach = m + 12.0 * s;
            let mut breaks = vec![-m, m, -z];
            breaks.extend(f.kinks().iter().map(|k| k - z));
            integrate_with_breaks(|e| f.derivative(z + e) * sigma.density(e).unwrap_or(0.0), -reach, reach, &breaks, 1e-13)
        }
        _ => unreachable!("tabulated encodings are only built for Gaussian-mixture noise"),
    }
}

/// Monotone cubic Hermite table of an encoding CDF on an equispaced grid.
#[derive(Debug, Clone)]
pub struct TabulatedEncoding {
    start: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl TabulatedEncoding {
    /// Tabulates `(f ∗ σ′)` at `2·half_points + 1` nodes over `[-reach, reach]`,
    /// mirroring the right half so the table is exactly symmetric.
    pub fn from_convolution(
        f: &dyn MainFunction,
        sigma: &SymmetricDistribution,
        reach: f64,
        half_points: usize,
    ) -> Result<Self> {
        let n = 2 * half_points + 1;
        let step = reach / half_points as f64;
        let mut values = vec![0.0; n];
        let mut slopes = vec![0.0; n];
        values[half_points] = 0.5;
        slopes[half_points] = smoothed_main_derivative(f, sigma, 0.0);
        for j in 1..=half_points {
            let z = j as f64 * step;
            let v = smoothed_main(f, sigma, z);
            let d = smoothed_main_derivative(f, sigma, z);
            values[half_points + j] = v;
            values[half_points - j] = 1.0 - v;
            slopes[half_points + j] = d;
            slopes[half_points - j] = d;
        }
        values[0] = 0.0;
        values[n - 1] = 1.0;
        Self::from_nodes(-reach, step, values, slopes)
    }

    fn from_nodes(start: f64, step: f64, mut values: Vec<f64>, mut slopes: Vec<f64>) -> Result<Self> {
        for (j, w) in values.windows(2).enumerate() {
            if w[1] < w[0] - 1e-12 {
                return Err(Error::Construction(format!(
                    "tabulated encoding decreases between nodes {j} and {} ({} > {})",
                    j + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        for j in 1..values.len() {
            values[j] = values[j].max(values[j - 1]).min(1.0);
        }
        for s in slopes.iter_mut() {
            *s = s.max(0.0);
        }
        // Fritsch–Carlson limiter.
        for j in 0..values.len() - 1 {
            let secant = (values[j + 1] - values[j]) / step;
            if secant == 0.0 {
                slopes[j] = 0.0;
                slopes[j + 1] = 0.0;
                continue;
            }
            let a = slopes[j] / secant;
            let b = slopes[j + 1] / secant;
            let r = a.hypot(b);
            if r > 3.0 {
                slopes[j] *= 3.0 / r;
                slopes[j + 1] *= 3.0 / r;
            }
        }
        Ok(Self { start, step, values, slopes })
    }

    fn end(&self) -> f64 {
        self.start + self.step * (self.values.len() - 1) as f64
    }

    fn locate(&self, z: f64) -> (usize, f64) {
        let pos = (z - self.start) / self.step;
        let j = (pos.floor() as usize).min(self.values.len() - 2);
        (j, pos - j as f64)
    }

    fn hermite(&self, j: usize, t: f64) -> f64 {
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.values[j]
            + h10 * self.step * self.slopes[j]
            + h01 * self.values[j + 1]
            + h11 * self.step * self.slopes[j + 1]
    }

    fn hermite_slope(&self, j: usize, t: f64) -> f64 {
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.values[j] + d01 * self.values[j + 1]) / self.step
            + d10 * self.slopes[j]
            + d11 * self.slopes[j + 1]
    }
}

impl Encoding for TabulatedEncoding {
    fn cdf(&self, z: f64) -> f64 {
        if z <= self.start {
            0.0
        } else if z >= self.end() {
            1.0
        } else {
            let (j, t) = self.locate(z);
            self.hermite(j, t)
        }
    }

    fn inv_cdf(&self, x: f64) -> Result<f64> {
        check_unit_open(x)?;
        // First node with value > x; the root lies in the panel before it.
        let upper = self.values.partition_point(|&v| v <= x);
        let j = upper.saturating_sub(1).min(self.values.len() - 2);
        let t = solve_increasing(
            |t| self.hermite(j, t) - x,
            |t| self.hermite_slope(j, t) * self.step,
            0.0,
            1.0,
            0.5,
        );
        Ok(self.start + self.step * (j as f64 + t))
    }

    fn density(&self, z: f64) -> f64 {
        if z <= self.start || z >= self.end() {
            0.0
        } else {
            let (j, t) = self.locate(z);
            self.hermite_slope(j, t).max(0.0)
        }
    }

    fn support(&self) -> (f64, f64) {
        (self.start, self.end())
    }
}

/// A good tuple. Cheap to clone; all parts are immutable and shared.
#[derive(Clone)]
pub struct GoodTuple {
    name: String,
    main: Arc<dyn MainFunction>,
    sigma: SymmetricDistribution,
    sigma_hat: Arc<dyn Encoding>,
}

impl fmt::Debug for GoodTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GoodTuple")
            .field("name", &self.name)
            .field("main", &self.main)
            .field("sigma", &self.sigma)
            .finish_non_exhaustive()
    }
}

pub const SHIPPED_TUPLES: [&str; 5] = ["spike", "arch", "cosine", "bigauss_cosine", "longjump"];

impl GoodTuple {
    /// Registers a tuple. Only `f(z) = 0` on the nonpositives and the symmetry
    /// of `σ̂` are checked here; use [`validate_tuple`] for calibration.
    pub fn new(
        name: impl Into<String>,
        main: Arc<dyn MainFunction>,
        sigma: SymmetricDistribution,
        sigma_hat: Arc<dyn Encoding>,
    ) -> Result<Self> {
        let name = name.into();
        let err = |reason: String| Error::Tuple { tuple: name.clone(), reason };
        for i in 0..50 {
            let z = -(i as f64) * 0.25;
            if main.value(z) != 0.0 {
                return Err(err(format!("f({z}) = {} must vanish on the nonpositives", main.value(z))));
            }
        }
        if (sigma_hat.cdf(0.0) - 0.5).abs() > 1e-9 {
            return Err(err("encoding distribution is not symmetric about 0".into()));
        }
        Ok(Self { name, main, sigma, sigma_hat })
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "spike" => Ok(make_spike()),
            "arch" => Ok(make_arch()),
            "cosine" => Ok(make_cosine()),
            "longjump" => Ok(make_longjump()),
            "bigauss_cosine" => make_bigauss_cosine(),
            _ => Err(Error::Parse(format!(
                "unknown tuple {name:?}; expected one of {}",
                SHIPPED_TUPLES.join(", ")
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn f(&self, z: f64) -> f64 {
        self.main.value(z)
    }

    pub fn f_prime(&self, z: f64) -> f64 {
        self.main.derivative(z)
    }

    pub fn kinks(&self) -> &[f64] {
        self.main.kinks()
    }

    pub fn main_function(&self) -> &dyn MainFunction {
        self.main.as_ref()
    }

    pub fn sigma(&self) -> &SymmetricDistribution {
        &self.sigma
    }

    pub fn sigma_hat(&self) -> &dyn Encoding {
        self.sigma_hat.as_ref()
    }

    /// `e = σ̂⁻¹(x)`.
    pub fn encode(&self, x: f64) -> Result<f64> {
        self.sigma_hat.inv_cdf(x)
    }

    /// `x = σ̂(e)`.
    pub fn decode(&self, e: f64) -> f64 {
        self.sigma_hat.cdf(e)
    }

    pub fn encoding_density(&self, e: f64) -> f64 {
        self.sigma_hat.density(e)
    }

    pub fn encoding_support(&self) -> (f64, f64) {
        self.sigma_hat.support()
    }
}

fn half_uniform() -> SymmetricDistribution {
    SymmetricDistribution::UniformInterval { half_width: 0.5 }
}

fn shipped(name: &str, main: ShippedMain, sigma: SymmetricDistribution, sigma_hat: Arc<dyn Encoding>) -> GoodTuple {
    GoodTuple { name: name.to_string(), main: Arc::new(main), sigma, sigma_hat }
}

pub fn make_spike() -> GoodTuple {
    shipped("spike", ShippedMain::Spike, half_uniform(), Arc::new(SpikeEncoding))
}

pub fn make_arch() -> GoodTuple {
    shipped("arch", ShippedMain::Arch, half_uniform(), Arc::new(ArchEncoding))
}

pub fn make_cosine() -> GoodTuple {
    shipped("cosine", ShippedMain::Cosine, half_uniform(), Arc::new(CosineEncoding))
}

pub fn make_longjump() -> GoodTuple {
    shipped(
        "longjump",
        ShippedMain::LongJump,
        SymmetricDistribution::TwoPoint { magnitude: 1.0 },
        Arc::new(UniformEncoding { half_width: 0.5 }),
    )
}

const BIGAUSS_CENTER: f64 = PI;
const BIGAUSS_STD: f64 = 1.0;
const BIGAUSS_HALF_POINTS: usize = 2048;

/// `f(z) = 1 − cos(z/2)` with bimodal Gaussian noise. The encoding has no
/// closed form; it is tabulated once per process and shared.
pub fn make_bigauss_cosine() -> Result<GoodTuple> {
    static TABLE: OnceLock<std::result::Result<Arc<TabulatedEncoding>, String>> = OnceLock::new();
    let sigma = SymmetricDistribution::GaussianMixture { center: BIGAUSS_CENTER, std: BIGAUSS_STD };
    let table = TABLE.get_or_init(|| {
        TabulatedEncoding::from_convolution(
            &ShippedMain::HalfAngleCosine,
            &sigma,
            BIGAUSS_CENTER + 8.0 * BIGAUSS_STD,
            BIGAUSS_HALF_POINTS,
        )
        .map(Arc::new)
        .map_err(|e| e.to_string())
    });
    match table {
        Ok(t) => Ok(shipped("bigauss_cosine", ShippedMain::HalfAngleCosine, sigma, t.clone())),
        Err(msg) => Err(Error::Construction(msg.clone())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidationMethod {
    /// Quadrature against the density of `σ`, or the exact two-point average.
    Quadrature,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPoint {
    pub x: f64,
    pub expectation: f64,
    pub residual: f64,
    /// Monte Carlo standard error; `None` for deterministic methods.
    pub std_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub max_residual: f64,
    pub per_x: Vec<ValidationPoint>,
}

impl ValidationReport {
    /// Deterministic points must be within `tol`; Monte Carlo points within
    /// four standard errors.
    pub fn passes(&self, tol: f64) -> bool {
        self.per_x.iter().all(|p| match p.std_err {
            Some(se) => p.residual <= 4.0 * se,
            None => p.residual <= tol,
        })
    }
}

/// Checks `E_{ε~σ}[f(σ̂⁻¹(x) + ε)] = x` at every `x` in `grid`.
pub fn validate_tuple(tuple: &GoodTuple, grid: &[f64], method: ValidationMethod) -> Result<ValidationReport> {
    let mut per_x = Vec::with_capacity(grid.len());
    let mut rng = match method {
        ValidationMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::domain("Monte Carlo validation needs at least 2 samples"));
            }
            Some(stream(seed))
        }
        ValidationMethod::Quadrature => None,
    };
    for &x in grid {
        let e = tuple.encode(x)?;
        let (expectation, std_err) = match (&mut rng, method) {
            (Some(rng), ValidationMethod::MonteCarlo { samples, .. }) => {
                let (mut mean, mut m2) = (0.0, 0.0);
                for k in 1..=samples {
                    let v = tuple.f(e + tuple.sigma.sample(rng));
                    let delta = v - mean;
                    mean += delta / k as f64;
                    m2 += delta * (v - mean);
                }
                let var = m2 / (samples - 1) as f64;
                (mean, Some((var / samples as f64).sqrt()))
            }
            _ => (smoothed_main(tuple.main_function(), &tuple.sigma, e), None),
        };
        per_x.push(ValidationPoint { x, expectation, residual: (expectation - x).abs(), std_err });
    }
    let max_residual = per_x.iter().map(|p| p.residual).fold(0.0, f64::max);
    Ok(ValidationReport { max_residual, per_x })
}

/// Max over `z_grid` of `|(f ∗ σ′)(z) − σ̂(z)|`.
pub fn convolution_check(tuple: &GoodTuple, z_grid: &[f64]) -> Result<f64> {
    if !tuple.sigma.has_density() {
        return Err(Error::NoDensity(tuple.sigma.to_string()));
    }
    Ok(z_grid
        .iter()
        .map(|&z| (smoothed_main(tuple.main_function(), &tuple.sigma, z) - tuple.decode(z)).abs())
        .fold(0.0, f64::max))
}

/// `{0.01, 0.02, …, 0.99}`.
pub fn probability_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

/// `n` evenly spaced scores strictly inside the encoding support.
pub fn score_grid(tuple: &GoodTuple, n: usize) -> Vec<f64> {
    let (lo, hi) = tuple.encoding_support();
    (1..=n).map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64).collect()
}

/// Integrated mass of the encoding density over its support; a sanity check
/// for user-registered encodings.
pub fn encoding_mass(tuple: &GoodTuple) -> f64 {
    let (lo, hi) = tuple.encoding_support();
    integrate(|z| tuple.encoding_density(z), lo, hi, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_tuples() -> Vec<GoodTuple> {
        SHIPPED_TUPLES.iter().map(|n| GoodTuple::by_name(n).unwrap()).collect()
    }

    #[test]
    fn spike_examples() {
        let t = make_spike();
        assert_eq!(t.f(0.25), 1.0);
        assert_eq!(t.decode(0.0), 0.5);
        assert_eq!(t.f(2.0), 0.0);
    }

    #[test]
    fn arch_examples() {
        let t = make_arch();
        assert!((t.f(0.5) - PI / 2.0).abs() < 1e-15);
        assert_eq!(t.decode(0.5), 1.0);
        assert_eq!(t.encode(0.5).unwrap(), 0.0);
        let x: f64 = 0.8;
        assert!((t.encode(x).unwrap() - (2.0 * x - 1.0).asin() / PI).abs() < 1e-15);
    }

    #[test]
    fn cosine_examples() {
        let t = make_cosine();
        assert!((t.f(0.5) - 2.0).abs() < 1e-15);
        assert_eq!(t.decode(0.0), 0.5);
        assert_eq!(t.f_prime(0.0), 0.0);
        assert!(t.f_prime(1e-9).abs() < 1e-6);
    }

    #[test]
    fn longjump_examples() {
        let t = make_longjump();
        assert_eq!(t.f(1.0), 1.0);
        assert!((t.encode(0.3).unwrap() + 0.2).abs() < 1e-15);
        let z = t.encode(0.3).unwrap() + 1.0;
        assert!((z - 0.8).abs() < 1e-15);
        assert!((t.f(z) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn bigauss_examples() {
        let t = make_bigauss_cosine().unwrap();
        assert!((t.f(PI) - 1.0).abs() < 1e-15);
        assert_eq!(t.decode(0.0), 0.5);
    }

    #[test]
    fn bigauss_table_matches_direct_convolution() {
        let t = make_bigauss_cosine().unwrap();
        for i in 0..57 {
            let z = -10.0 + 20.0 * i as f64 / 56.0 + 0.0123;
            let direct = smoothed_main(t.main_function(), t.sigma(), z);
            assert!((direct - t.decode(z)).abs() < 1e-9, "z={z}: {direct} vs {}", t.decode(z));
        }
    }

    #[test]
    fn main_vanishes_on_nonpositives() {
        for t in all_tuples() {
            for i in 0..50 {
                let z = -(i as f64) * 0.37;
                assert_eq!(t.f(z), 0.0, "{} at {z}", t.name());
            }
        }
    }

    #[test]
    fn validation_on_probability_grid() {
        for t in all_tuples() {
            let report = validate_tuple(&t, &probability_grid(), ValidationMethod::Quadrature).unwrap();
            let tol = if t.name() == "bigauss_cosine" { 1e-5 } else { 1e-6 };
            assert!(report.max_residual <= tol, "{}: {}", t.name(), report.max_residual);
            assert!(report.passes(tol));
        }
    }

    #[test]
    fn longjump_two_point_expectation_is_exact() {
        let report = validate_tuple(&make_longjump(), &[0.3], ValidationMethod::Quadrature).unwrap();
        // ½·f(0.3 − ½ + 1) + ½·f(0.3 − ½ − 1) = ½·0.6.
        assert!(report.per_x[0].residual < 1e-15);
    }

    #[test]
    fn spike_validation_tight() {
        let grid: Vec<f64> = (1..10).map(|i| i as f64 / 10.0).collect();
        let report = validate_tuple(&make_spike(), &grid, ValidationMethod::Quadrature).unwrap();
        assert!(report.max_residual <= 1e-8);
    }

    #[test]
    fn monte_carlo_validation() {
        for t in all_tuples() {
            let report = validate_tuple(
                &t,
                &[0.2, 0.5, 0.7],
                ValidationMethod::MonteCarlo { samples: 200_000, seed: 11 },
            )
            .unwrap();
            assert!(report.passes(0.0), "{}: {:?}", t.name(), report.per_x);
        }
    }

    #[test]
    fn convolution_identity() {
        let grid: Vec<f64> = (1..100).map(|i| -0.5 + i as f64 / 100.0).collect();
        for t in [make_arch(), make_spike(), make_cosine()] {
            let dev = convolution_check(&t, &grid).unwrap();
            assert!(dev <= 1e-8, "{}: {dev}", t.name());
        }
        assert!(convolution_check(&make_cosine(), &[0.0]).unwrap() <= 1e-10);
        assert!(convolution_check(&make_spike(), &[-0.5]).unwrap() <= 1e-10);
        assert!(matches!(convolution_check(&make_longjump(), &[0.0]), Err(Error::NoDensity(_))));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-7;
        for t in all_tuples() {
            for i in 0..200 {
                let z = -0.5 + 2.5 * (i as f64 + 0.5) / 200.0;
                if t.kinks().iter().any(|k| (z - k).abs() < 1e-4) {
                    continue;
                }
                let fd = (t.f(z + h) - t.f(z - h)) / (2.0 * h);
                assert!((fd - t.f_prime(z)).abs() < 1e-6, "{} at {z}: {fd} vs {}", t.name(), t.f_prime(z));
            }
        }
    }

    #[test]
    fn kinks_have_zero_derivative() {
        for t in all_tuples() {
            for &k in t.kinks() {
                assert_eq!(t.f_prime(k), 0.0);
            }
        }
    }

    #[test]
    fn encoding_round_trip_and_positive_density() {
        for t in all_tuples() {
            for x in probability_grid() {
                let e = t.encode(x).unwrap();
                assert!((t.decode(e) - x).abs() < 1e-10, "{} at {x}", t.name());
                assert!(t.encoding_density(e) > 0.0, "{} at {x}", t.name());
            }
            assert!((encoding_mass(&t) - 1.0).abs() < 1e-6, "{}", t.name());
        }
    }

    #[test]
    fn noise_differs_from_encoding() {
        // No good tuple has σ = σ̂; exhibit the gap for every shipped one.
        for t in all_tuples() {
            let gap = (0..=400)
                .map(|i| -3.0 + 6.0 * i as f64 / 400.0)
                .map(|z| (t.sigma().cdf(z) - t.decode(z)).abs())
                .fold(0.0, f64::max);
            assert!(gap > 0.01, "{}: gap {gap}", t.name());
        }
    }

    #[test]
    fn user_tuple_must_vanish_on_negatives() {
        #[derive(Debug)]
        struct Bad;
        impl MainFunction for Bad {
            fn value(&self, _: f64) -> f64 {
                1.0
            }
            fn derivative(&self, _: f64) -> f64 {
                0.0
            }
        }
        let r = GoodTuple::new("bad", Arc::new(Bad), half_uniform(), Arc::new(ArchEncoding));
        assert!(matches!(r, Err(Error::Tuple { .. })));
        let ok = GoodTuple::new("arch2", Arc::new(ShippedMain::Arch), half_uniform(), Arc::new(ArchEncoding)).unwrap();
        let report = validate_tuple(&ok, &[0.25, 0.75], ValidationMethod::Quadrature).unwrap();
        assert!(report.max_residual < 1e-10);
    }

    #[test]
    fn unknown_tuple_name() {
        assert!(matches!(GoodTuple::by_name("nope"), Err(Error::Parse(_))));
        assert_eq!(GoodTuple::by_name("ARCH").unwrap().name(), "arch");
    }

    #[test]
    fn encode_rejects_boundary() {
        for t in all_tuples() {
            assert!(t.encode(0.0).is_err());
            assert!(t.encode(1.0).is_err());
        }
    }
}
