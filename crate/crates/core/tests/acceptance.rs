//! End-to-end acceptance checks. Each test prints one PASS/FAIL line to
//! stderr and then asserts.

mod common;

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use esg_core::descent::{self, DescentConfig, Schedule};
use esg_core::estimators::{self, estimate_mean_and_variance, EncodedState, EstimatorSpec};
use esg_core::harness::{self, ExperimentSpec};
use esg_core::rng::{derive_seed, stream, substream};
use esg_core::tuples::{self, GoodTuple, SHIPPED_TUPLES};
use esg_core::{Oracle, ProbVector, SymmetricDistribution};
use rand::Rng;
use rayon::prelude::*;

use common::*;

fn report(id: u32, title: &str, pass: bool, detail: &str, elapsed: Duration) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(
        std::io::stderr(),
        "acceptance criterion {id:>2} [{verdict}] {title}: {detail} ({:.1} s)",
        elapsed.as_secs_f64()
    );
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed < Duration::from_secs(secs)
}

#[test]
fn criterion_01_good_tuple_calibration() {
    let start = Instant::now();
    let grid = tuples::probability_grid();
    let mut worst = Vec::new();
    let mut pass = true;
    for name in SHIPPED_TUPLES {
        let tuple = GoodTuple::by_name(name).unwrap();
        let tol = if name == "bigauss_cosine" { 1e-5 } else { 1e-6 };
        let report = tuples::validate_tuple(&tuple, &grid, tuples::ValidationMethod::Quadrature).unwrap();
        let reference = grid.iter().map(|&x| (tuple_expectation(&tuple, x) - x).abs()).fold(0.0, f64::max);
        pass &= report.max_residual <= tol && reference <= tol;
        worst.push(format!("{name} {:.1e}/{reference:.1e}", report.max_residual));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 10);
    report(1, "good-tuple calibration", pass, &format!("library/reference residuals {}", worst.join(", ")), elapsed);
    assert!(pass);
}

#[test]
fn criterion_02_convolution_identity() {
    let start = Instant::now();
    let mut pass = true;
    let mut detail = Vec::new();
    for name in ["spike", "arch", "cosine"] {
        let tuple = GoodTuple::by_name(name).unwrap();
        let grid = tuples::score_grid(&tuple, 99);
        let library = tuples::convolution_check(&tuple, &grid).unwrap();
        let reference = grid
            .iter()
            .map(|&z| (noise_expectation(&|s| tuple.f(s), tuple.kinks(), tuple.sigma(), z) - tuple.decode(z)).abs())
            .fold(0.0, f64::max);
        pass &= library <= 1e-6 && reference <= 1e-6;
        detail.push(format!("{name} {library:.1e}/{reference:.1e}"));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 10);
    report(2, "convolution identity", pass, &format!("library/reference residuals {}", detail.join(", ")), elapsed);
    assert!(pass);
}

struct Comparison {
    label: String,
    z: f64,
}

/// Ten random instances per dimension in {1, 2, 3}; returns every
/// standardized deviation of an estimator mean from the reference.
fn unbiasedness_deviations(spec: &EstimatorSpec, check_value: bool, seed: u64) -> Vec<Comparison> {
    let instances: Vec<(usize, u64)> = (1..=3).flat_map(|d| (0..10).map(move |k| (d, k))).collect();
    instances
        .par_iter()
        .flat_map_iter(|&(d, k)| {
            let mut rng = substream(derive_seed(seed, d as u64 * 100 + k), 0);
            let (oracle, values) = random_table(d, &mut rng);
            let x = random_point(d, 0.1, 0.9, &mut rng);
            let q = |idx: u64| values[idx as usize];
            let exact_grad = brute_gradient(&x, &q);
            let exact_value = brute_value(&x, &q);
            let s = estimate_mean_and_variance(spec, &x, &oracle, 1_000_000, &mut substream(seed, 1 + d as u64 * 100 + k))
                .unwrap();
            let mut out: Vec<Comparison> = (0..d)
                .map(|i| Comparison {
                    label: format!("{spec} d={d} #{k} g[{i}]"),
                    z: (s.mean_gradient[i] - exact_grad[i]) / s.gradient_std_err[i],
                })
                .collect();
            if check_value {
                out.push(Comparison {
                    label: format!("{spec} d={d} #{k} value"),
                    z: (s.mean_value.unwrap() - exact_value) / s.value_std_err.unwrap(),
                });
            }
            out
        })
        .collect()
}

fn summarize(comparisons: &[Comparison]) -> (usize, String) {
    let failures: Vec<&Comparison> = comparisons.iter().filter(|c| c.z.is_nan() || c.z.abs() > 4.0).collect();
    let max = comparisons.iter().map(|c| c.z.abs()).fold(0.0, f64::max);
    let names: Vec<String> = failures.iter().map(|c| format!("{} ({:.2})", c.label, c.z)).collect();
    let detail = format!(
        "{}/{} comparisons beyond 4 std-err, max |z| = {max:.2}{}",
        failures.len(),
        comparisons.len(),
        if names.is_empty() { String::new() } else { format!("; {}", names.join(", ")) }
    );
    (failures.len(), detail)
}

#[test]
fn criterion_03_esg_unbiasedness() {
    let start = Instant::now();
    let mut all = Vec::new();
    for (t, name) in SHIPPED_TUPLES.iter().enumerate() {
        let spec: EstimatorSpec = format!("esg:{name}").parse().unwrap();
        all.extend(unbiasedness_deviations(&spec, true, 3000 + t as u64));
    }
    let (failures, detail) = summarize(&all);
    let elapsed = start.elapsed();
    let pass = failures <= 1 && within(elapsed, 300);
    report(3, "ESG unbiasedness", pass, &detail, elapsed);
    assert!(pass);
}

#[test]
fn criterion_04_baseline_unbiasedness() {
    let start = Instant::now();
    let mut all = Vec::new();
    for (t, name) in ["reinforce", "arm", "disarm"].iter().enumerate() {
        all.extend(unbiasedness_deviations(&name.parse().unwrap(), false, 4000 + t as u64));
    }
    let (failures, detail) = summarize(&all);
    let elapsed = start.elapsed();
    let pass = failures <= 1 && within(elapsed, 180);
    report(4, "baseline unbiasedness", pass, &detail, elapsed);
    assert!(pass);
}

#[test]
fn criterion_05_variance_contrast() {
    let start = Instant::now();
    let oracle = Oracle::table(1, vec![0.0, 1.0]).unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, x) in [0.5, 0.1, 0.05].into_iter().enumerate() {
        let point = ProbVector::new(vec![x]).unwrap();
        let expected = (1.0 - x) / x;
        let r = estimate_mean_and_variance(&EstimatorSpec::Reinforce, &point, &oracle, 1_000_000, &mut substream(50, k as u64))
            .unwrap()
            .gradient_variance[0];
        let e = estimate_mean_and_variance(
            &"esg:longjump".parse().unwrap(),
            &point,
            &oracle,
            1_000_000,
            &mut substream(51, k as u64),
        )
        .unwrap()
        .gradient_variance[0];
        pass &= (r / expected - 1.0).abs() <= 0.05 && (e - 1.0).abs() <= 0.05;
        detail.push(format!("x={x}: reinforce {r:.3} (expect {expected:.0}), esg {e:.4} (expect 1)"));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 60);
    report(5, "variance contrast", pass, &detail.join("; "), elapsed);
    assert!(pass);
}

#[test]
fn criterion_06_pathwise_gradient() {
    let start = Instant::now();
    let tuples: Vec<GoodTuple> = SHIPPED_TUPLES.iter().map(|n| GoodTuple::by_name(n).unwrap()).collect();
    let h = 1e-6;
    let margin = 1e-3;
    let mut rng = stream(6);
    let (mut checked, mut worst, mut bad) = (0usize, 0.0f64, 0usize);
    let mut points = 0;
    while points < 1000 {
        let tuple = &tuples[points % tuples.len()];
        let d = rng.random_range(1..=3);
        let (oracle, _) = random_table(d, &mut rng);
        let x = random_point(d, 0.05, 0.95, &mut rng);
        let noise: Vec<f64> = (0..d).map(|_| tuple.sigma().sample(&mut rng)).collect();
        let admissible = x.iter().zip(&noise).all(|(&p, &eps)| {
            let e = tuple.encode(p).unwrap();
            let z = e + eps;
            let shift = h / tuple.encoding_density(e);
            z.abs() > margin && shift < 1e-2 * margin && tuple.kinks().iter().all(|k| (z.abs() - k).abs() > margin)
        });
        if !admissible {
            continue;
        }
        points += 1;
        let analytic = estimators::esg_with_noise(&x, tuple, &oracle, &noise).unwrap().gradient;
        for i in 0..d {
            let shifted = |delta: f64| {
                let mut v = x.to_vec();
                v[i] += delta;
                estimators::esg_with_noise(&ProbVector::new(v).unwrap(), tuple, &oracle, &noise).unwrap().value.unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let scale = analytic[i].abs().max(fd.abs());
            let err = if scale <= 1e-9 { 0.0 } else { (analytic[i] - fd).abs() / scale };
            worst = worst.max(err);
            bad += usize::from(err > 1e-4);
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = bad == 0 && within(elapsed, 30);
    report(
        6,
        "pathwise gradient check",
        pass,
        &format!("{checked} partials at 1000 points, {bad} above 1e-4, worst relative error {worst:.2e}"),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_07_key_calibration() {
    let start = Instant::now();
    let oracle = Oracle::table(1, vec![0.0, 1.0]).unwrap();
    let x = ProbVector::new(vec![0.3]).unwrap();
    let n = 1_000_000;
    let esg = estimate_mean_and_variance(&"esg:longjump".parse().unwrap(), &x, &oracle, n, &mut stream(70)).unwrap();
    let naive = estimate_mean_and_variance(
        &EstimatorSpec::Naive(SymmetricDistribution::uniform(0.5).unwrap()),
        &x,
        &oracle,
        n,
        &mut stream(71),
    )
    .unwrap();
    let k = esg.key_frequency[0];
    let naive_k = naive.key_frequency[0];
    let naive_se = (0.3f64 * 0.7 / n as f64).sqrt();
    let elapsed = start.elapsed();
    let pass = (0.498..=0.502).contains(&k) && (naive_k - 0.3).abs() <= 4.0 * naive_se && within(elapsed, 30);
    report(
        7,
        "ESG keys are not calibrated",
        pass,
        &format!("esg P[k=1] = {k:.5} (x = 0.3), naive P[K=1] = {naive_k:.5} (4 std-err = {:.5})", 4.0 * naive_se),
        elapsed,
    );
    assert!(pass);
}

#[test]
fn criterion_08_query_accounting() {
    let start = Instant::now();
    let mut rng = stream(8);
    let (oracle, _) = random_table(3, &mut rng);
    let x = ProbVector::new(vec![0.2, 0.55, 0.8]).unwrap();
    let arch = tuples::make_arch();
    let e = EncodedState::encode(&x, &arch).unwrap();
    let dist = SymmetricDistribution::uniform(0.5).unwrap();
    let n = 10_000u64;
    let mut detail = Vec::new();
    let mut pass = true;
    let mut check = |name: &str, cost: u64, sample: &mut dyn FnMut()| {
        oracle.reset_counter();
        for _ in 0..n {
            sample();
        }
        pass &= oracle.calls() == cost * n;
        detail.push(format!("{name} {}", oracle.calls()));
    };
    let mut r1 = stream(81);
    check("esg", 1, &mut || drop(estimators::esg(&x, &arch, &oracle, &mut r1).unwrap()));
    check("encoded_esg", 1, &mut || drop(estimators::encoded_esg(&e, &arch, &oracle, &mut r1).unwrap()));
    check("naive", 1, &mut || drop(estimators::naive_value(&x, &dist, &oracle, &mut r1).unwrap()));
    check("reinforce", 1, &mut || drop(estimators::reinforce(&x, &oracle, &mut r1).unwrap()));
    check("arm", 2, &mut || drop(estimators::arm(&x, &oracle, &mut r1).unwrap()));
    check("disarm", 2, &mut || drop(estimators::disarm(&x, &oracle, &mut r1).unwrap()));
    let elapsed = start.elapsed();
    pass &= within(elapsed, 5);
    report(8, "query accounting", pass, &format!("calls after {n} samples: {}", detail.join(", ")), elapsed);
    assert!(pass);
}

#[test]
fn criterion_09_encoded_plain_equivalence() {
    let start = Instant::now();
    let mut rng = stream(9);
    let (mut same_queries, mut max_gap, mut runs) = (true, 0.0f64, 0);
    for d in 1..=3 {
        for k in 0..5u64 {
            let (oracle, _) = random_table(d, &mut rng);
            let mut plain = DescentConfig::new("esg:longjump".parse().unwrap(), 10_000, Schedule::Constant(0.01));
            plain.seed = 900 + k;
            plain.snapshot_stride = Some(1);
            plain.initial = Some(random_point(d, 0.1, 0.9, &mut rng));
            let encoded = DescentConfig { estimator: "encoded_esg:longjump".parse().unwrap(), ..plain.clone() };
            let a = descent::sqd(&plain, &oracle).unwrap();
            let b = descent::encoded_sqd(&encoded, &oracle).unwrap();
            same_queries &= a.records == b.records && a.snapshots.len() == 10_001 && b.snapshots.len() == 10_001;
            max_gap = a
                .snapshots
                .iter()
                .zip(&b.snapshots)
                .flat_map(|(s, t)| s.x.iter().zip(t.x.iter()).map(|(u, v)| (u - v).abs()))
                .fold(max_gap, f64::max);
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = same_queries && max_gap <= 1e-12 && within(elapsed, 10);
    report(
        9,
        "encoded/plain equivalence",
        pass,
        &format!("{runs} runs of 10000 steps, identical responses: {same_queries}, max iterate gap {max_gap:.2e}"),
        elapsed,
    );
    assert!(pass);
}

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn criterion_10_slice_reproduction() {
    let start = Instant::now();
    let base = ExperimentSpec::from_file(&repo_root().join("configs/slice10_reproduction.toml")).unwrap();
    assert_eq!((base.n_trials, base.budget), (20, 50_000));
    let mut esg_ok = true;
    let mut reinforce_stuck = 0;
    let mut detail = Vec::new();
    for rep in 0..3u64 {
        let spec = ExperimentSpec { base_seed: base.base_seed.wrapping_add(rep), ..base.clone() };
        let out = harness::execute(&spec).unwrap();
        let final_median = |m: &str| out.series.method(m).unwrap().points.last().unwrap().median;
        let medians: Vec<f64> = ["esg:arch", "esg:spike", "esg:longjump"].iter().map(|m| final_median(m)).collect();
        esg_ok &= medians.iter().all(|&v| v >= 18.0);
        let r = final_median("reinforce");
        reinforce_stuck += usize::from(r <= 3.0);
        detail.push(format!("rep {rep}: esg medians {medians:?}, reinforce {r}"));
    }
    let elapsed = start.elapsed();
    let pass = esg_ok && reinforce_stuck >= 2 && within(elapsed, 600);
    report(10, "slice reproduction (qualitative)", pass, &detail.join("; "), elapsed);
    assert!(pass);
}

#[test]
fn criterion_11_determinism() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let spec_text = |out: &str| {
        format!(
            r#"
problem = "knapsack:8"
n_trials = 6
base_seed = 11
budget = 3000
output_dir = "{out}"
direction = "maximize"
schedule = "constant(0.05)"

[[methods]]
estimator = "esg:arch"

[[methods]]
estimator = "encoded_esg:cosine"

[[methods]]
estimator = "disarm"
"#
        )
    };
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let spec = ExperimentSpec::from_toml(&spec_text(run), dir.path()).unwrap();
        harness::run_experiment(&spec).unwrap();
        bytes.push(std::fs::read(dir.path().join(run).join("aggregate.csv")).unwrap());
    }
    let elapsed = start.elapsed();
    let pass = bytes[0] == bytes[1] && !bytes[0].is_empty() && within(elapsed, 60);
    report(11, "determinism", pass, &format!("aggregate.csv {} bytes, identical: {}", bytes[0].len(), bytes[0] == bytes[1]), elapsed);
    assert!(pass);
}
