//! Reference computations written independently of the library internals.
#![allow(dead_code)]

use esg_core::distributions::SymmetricDistribution;
use esg_core::tuples::GoodTuple;
use esg_core::{BinaryVector, Oracle, ProbVector};
use rand::Rng;

/// `v(x)` by summing `Q(y) ∏ P(y_i)` over every vertex.
pub fn brute_value(x: &[f64], q: &dyn Fn(u64) -> f64) -> f64 {
    let d = x.len();
    (0..1u64 << d)
        .map(|idx| {
            let p: f64 = (0..d).map(|i| if idx >> i & 1 == 1 { x[i] } else { 1.0 - x[i] }).product();
            p * q(idx)
        })
        .sum()
}

/// `∂v/∂x_i = v(x | x_i = 1) − v(x | x_i = 0)`.
pub fn brute_gradient(x: &[f64], q: &dyn Fn(u64) -> f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] = 1.0;
            lo[i] = 0.0;
            brute_value(&hi, q) - brute_value(&lo, q)
        })
        .collect()
}

pub fn oracle_fn(oracle: &Oracle) -> impl Fn(u64) -> f64 + '_ {
    let d = oracle.dim();
    move |idx| oracle.query(&BinaryVector::from_index(d, idx)).unwrap()
}

pub fn random_table<R: Rng>(d: usize, rng: &mut R) -> (Oracle, Vec<f64>) {
    let values: Vec<f64> = (0..1usize << d).map(|_| rng.random_range(-10.0..10.0)).collect();
    (Oracle::table(d, values.clone()).unwrap(), values)
}

pub fn random_point<R: Rng>(d: usize, lo: f64, hi: f64, rng: &mut R) -> ProbVector {
    ProbVector::new((0..d).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn piecewise(f: &dyn Fn(f64) -> f64, a: f64, b: f64, mut breaks: Vec<f64>, n: usize) -> f64 {
    breaks.retain(|&c| c > a && c < b);
    breaks.sort_by(f64::total_cmp);
    let mut edges = vec![a];
    edges.extend(breaks);
    edges.push(b);
    edges.windows(2).map(|w| simpson(f, w[0], w[1], n)).sum()
}

/// `E_{ε~σ}[g(s + ε)]` by composite Simpson split where `g` has kinks.
pub fn noise_expectation(g: &dyn Fn(f64) -> f64, kinks: &[f64], sigma: &SymmetricDistribution, s: f64) -> f64 {
    let breaks: Vec<f64> = kinks.iter().chain(std::iter::once(&0.0)).map(|k| k - s).collect();
    match *sigma {
        SymmetricDistribution::TwoPoint { magnitude } => 0.5 * (g(s + magnitude) + g(s - magnitude)),
        SymmetricDistribution::UniformInterval { half_width } => {
            piecewise(&|u| g(s + u) / (2.0 * half_width), -half_width, half_width, breaks, 2000)
        }
        SymmetricDistribution::GaussianMixture { center, std } => {
            let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let density = |u: f64| 0.5 * (phi((u - center) / std) + phi((u + center) / std)) / std;
            let reach = center + 12.0 * std;
            let mut breaks = breaks;
            breaks.extend([-center, center]);
            piecewise(&|u| g(s + u) * density(u), -reach, reach, breaks, 4000)
        }
    }
}

/// `E_{ε~σ}[f(σ̂⁻¹(x) + ε)]` for a tuple.
pub fn tuple_expectation(tuple: &GoodTuple, x: f64) -> f64 {
    let e = tuple.encode(x).unwrap();
    noise_expectation(&|z| tuple.f(z), tuple.kinks(), tuple.sigma(), e)
}
