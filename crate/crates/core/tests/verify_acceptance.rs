//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! The default-scale runs are shared between tests and take a few minutes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write as _;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use llc_lab::allocator::{
    baseline_equal, binomial, enumerate_allocations, exhaustive_best, OracleEvaluator,
};
use llc_lab::cli::{
    cmd_build_labels, cmd_evaluate, cmd_gen_data, cmd_run_all, cmd_train_clf, cmd_train_twin,
    RunConfig, ALL_ARTIFACTS,
};
use llc_lab::nn::{
    evaluate_loss, init_model, loss_and_gradients, Activation, Dataset, Head, LayerSpec, LossKind,
    MlpModel,
};
use llc_lab::pipeline::{run_full_pipeline, BenchmarkSummary, PolicyRow, TrainedClassifier};
use llc_lab::platform::{aggregate_compute, energy, OracleParams};
use llc_lab::twin::{twin_fidelity, DigitalTwin, FidelityReport, TwinDataset, TwinDatasetMeta};
use llc_lab::types::{GlobalContext, PlatformSpec, VbsContext};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn verdict(criterion: u8, title: &str, pass: bool, detail: String) -> bool {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion} [{status}] {title}: {detail}");
    pass
}

fn read_json<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> T {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Everything the default 12-way checks need from one `run-all`.
struct DefaultRun {
    config: RunConfig,
    twin_stage: Duration,
    clf_stage: Duration,
    twin_dataset: TwinDataset,
    twin: DigitalTwin,
    classifier: TrainedClassifier,
    summary: BenchmarkSummary,
    rows: Vec<PolicyRow>,
    csv: BTreeMap<&'static str, Vec<u8>>,
}

fn csv_artifacts(dir: &Path) -> BTreeMap<&'static str, Vec<u8>> {
    ALL_ARTIFACTS
        .iter()
        .filter(|n| n.ends_with(".csv"))
        .map(|&n| (n, fs::read(dir.join(n)).unwrap()))
        .collect()
}

/// Runs the stages one by one so each can be timed; the result is the same
/// as `run-all`.
fn default_run() -> &'static DefaultRun {
    static RUN: OnceLock<DefaultRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::TempDir::new().unwrap();
        let config = RunConfig {
            output_dir: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        let t = Instant::now();
        let twin_dataset = cmd_gen_data(&config).unwrap();
        let twin = cmd_train_twin(&config).unwrap();
        let twin_stage = t.elapsed();
        let t = Instant::now();
        cmd_build_labels(&config).unwrap();
        let classifier = cmd_train_clf(&config).unwrap();
        let clf_stage = t.elapsed();
        let report = cmd_evaluate(&config).unwrap();

        let meta: TwinDatasetMeta = read_json(&dir.path().join("twin_data.json"));
        let on_disk = TwinDataset::read_csv(File::open(dir.path().join("twin_data.csv")).unwrap(), meta).unwrap();
        assert_eq!(on_disk, twin_dataset);
        assert_eq!(read_json::<DigitalTwin>(&dir.path().join("twin.json")), twin);
        assert_eq!(read_json::<TrainedClassifier>(&dir.path().join("classifier.json")), classifier);

        DefaultRun {
            config,
            twin_stage,
            clf_stage,
            twin_dataset,
            twin,
            classifier,
            summary: report.summary,
            rows: report.rows,
            csv: csv_artifacts(dir.path()),
        }
    })
}

fn eight_way_summary() -> &'static BenchmarkSummary {
    static RUN: OnceLock<BenchmarkSummary> = OnceLock::new();
    RUN.get_or_init(|| {
        let artifacts = run_full_pipeline(&RunConfig::eight_way()).unwrap();
        assert_eq!(artifacts.classifier.model.output_dim(), 35);
        artifacts.report.summary
    })
}

/// Every vector in `[1, n-k+1]^k` summing to `n`, by brute-force counting.
fn nested_loop_compositions(n: u32, k: u32) -> Vec<Vec<u32>> {
    let top = n - k + 1;
    let mut digits = vec![1u32; k as usize];
    let mut out = Vec::new();
    loop {
        if digits.iter().sum::<u32>() == n {
            out.push(digits.clone());
        }
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if digits[pos] < top {
                digits[pos] += 1;
                break;
            }
            digits[pos] = 1;
        }
    }
}

#[test]
fn criterion_1_allocation_space_cardinality() {
    let t = Instant::now();
    let (a, b) = (enumerate_allocations(12, 5).unwrap(), enumerate_allocations(8, 5).unwrap());
    let elapsed = t.elapsed();
    let mut mismatches = Vec::new();
    for n in 1..=14u32 {
        for k in 1..=n {
            let space = enumerate_allocations(n, k).unwrap();
            let got: Vec<Vec<u32>> = space.allocations().iter().map(|x| x.ways().to_vec()).collect();
            if got.len() as u64 != binomial(u64::from(n - 1), u64::from(k - 1))
                || got != nested_loop_compositions(n, k)
            {
                mismatches.push((n, k));
            }
        }
    }
    let pass = a.len() == 330 && b.len() == 35 && mismatches.is_empty() && elapsed < Duration::from_secs(1);
    assert!(verdict(
        1,
        "allocation space cardinality",
        pass,
        format!(
            "|(12,5)|={} |(8,5)|={} mismatches={mismatches:?} enumeration {:.1?}",
            a.len(),
            b.len(),
            elapsed
        ),
    ));
}

#[test]
fn criterion_2_equal_partition() {
    let spec = |n_llc| PlatformSpec { n_llc, ..PlatformSpec::default() };
    let twelve = baseline_equal(&spec(12)).unwrap();
    let eight = baseline_equal(&spec(8)).unwrap();
    let pass = twelve.ways == [2; 5] && twelve.unallocated == 2 && eight.ways == [1; 5] && eight.unallocated == 3;
    assert!(verdict(
        2,
        "equal partition",
        pass,
        format!(
            "(12,5) -> {:?} +{} free, (8,5) -> {:?} +{} free",
            twelve.ways, twelve.unallocated, eight.ways, eight.unallocated
        ),
    ));
}

fn random_small_model(rng: &mut ChaCha8Rng, head: Head, out: usize) -> MlpModel {
    let mut dims = vec![rng.random_range(1..=5)];
    for _ in 0..rng.random_range(0..=2) {
        dims.push(rng.random_range(1..=5));
    }
    dims.push(out);
    let specs: Vec<LayerSpec> = dims
        .windows(2)
        .enumerate()
        .map(|(i, d)| {
            let act = if i + 2 == dims.len() { Activation::Identity } else { Activation::Relu };
            LayerSpec::new(d[0], d[1], act)
        })
        .collect();
    let base = init_model(&specs, head, rng.random()).unwrap();
    let biases = base
        .biases()
        .iter()
        .map(|b| Array1::from_shape_simple_fn(b.len(), || rng.random_range(-0.5..0.5)))
        .collect();
    MlpModel::from_parts(specs, base.weights().to_vec(), biases, head).unwrap()
}

fn max_gradient_error(model: &MlpModel, data: &Dataset, loss: LossKind) -> f64 {
    let h = 1e-5;
    let (_, grads) = loss_and_gradients(model, data, loss).unwrap();
    let eval = |w: Vec<Array2<f64>>, b: Vec<Array1<f64>>| {
        let m = MlpModel::from_parts(model.layers().to_vec(), w, b, model.head()).unwrap();
        evaluate_loss(&m, data, loss).unwrap()
    };
    let mut worst: f64 = 0.0;
    let mut record = |analytic: f64, up: f64, down: f64| {
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
    };
    for l in 0..model.layers().len() {
        for (idx, &g) in grads.weights[l].indexed_iter() {
            let shift = |d: f64| {
                let mut w = model.weights().to_vec();
                w[l][idx] += d;
                eval(w, model.biases().to_vec())
            };
            record(g, shift(h), shift(-h));
        }
        for (idx, &g) in grads.biases[l].indexed_iter() {
            let shift = |d: f64| {
                let mut b = model.biases().to_vec();
                b[l][idx] += d;
                eval(model.weights().to_vec(), b)
            };
            record(g, shift(h), shift(-h));
        }
    }
    worst
}

#[test]
fn criterion_3_gradient_correctness() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst_mse, mut worst_ce): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let out = rng.random_range(1..=5);
        let m = random_small_model(&mut rng, Head::Regression, out);
        let x = Array2::from_shape_simple_fn((n, m.input_dim()), || rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_simple_fn((n, out), || rng.random_range(-1.0..1.0));
        worst_mse = worst_mse.max(max_gradient_error(&m, &Dataset::regression(x, y).unwrap(), LossKind::Mse));

        let classes = rng.random_range(2..=5);
        let m = random_small_model(&mut rng, Head::Classification { classes }, classes);
        let x = Array2::from_shape_simple_fn((n, m.input_dim()), || rng.random_range(-1.0..1.0));
        let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let data = Dataset::classification(x, labels).unwrap();
        worst_ce = worst_ce.max(max_gradient_error(&m, &data, LossKind::CrossEntropy));
    }
    let elapsed = t.elapsed();
    let pass = worst_mse < 1e-4 && worst_ce < 1e-4 && elapsed < Duration::from_secs(30);
    assert!(verdict(
        3,
        "gradient correctness",
        pass,
        format!("max rel err mse {worst_mse:.2e}, cross-entropy {worst_ce:.2e}, {elapsed:.1?}"),
    ));
}

#[test]
fn criterion_4_exhaustive_search() {
    let t = Instant::now();
    let spec = PlatformSpec { n_llc: 8, ..PlatformSpec::default() };
    let params = OracleParams::default().noiseless();
    let space = enumerate_allocations(8, 5).unwrap();
    let evaluator = OracleEvaluator::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut disagreements = 0;
    for _ in 0..100 {
        let gc = GlobalContext::new(
            (0..5)
                .map(|_| {
                    let (u, d, s) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>() * 30.0);
                    VbsContext::from_link(u, d, s).unwrap()
                })
                .collect(),
        );
        let fast = exhaustive_best(&gc, &spec, &space, &evaluator).unwrap();
        let (mut best_class, mut best_total) = (0, f64::INFINITY);
        for (class, alloc) in space.allocations().iter().enumerate() {
            let total = aggregate_compute(&gc, alloc, &spec, &params, None).unwrap();
            if total < best_total {
                (best_class, best_total) = (class, total);
            }
        }
        if fast.class != best_class || fast.total_cpu != best_total {
            disagreements += 1;
        }
    }
    let elapsed = t.elapsed();
    let pass = disagreements == 0 && elapsed < Duration::from_secs(10);
    assert!(verdict(
        4,
        "exhaustive search correctness",
        pass,
        format!("{disagreements}/100 disagreements, {elapsed:.1?}"),
    ));
}

#[test]
fn criterion_5_twin_fidelity() {
    let run = default_run();
    let f: FidelityReport = twin_fidelity(&run.twin, &run.twin_dataset, &run.config.oracle).unwrap();
    let pass = f.contexts >= 300
        && f.mean_relative_error <= 0.05
        && f.ranking_agreement >= 0.95
        && run.twin_stage < Duration::from_secs(300);
    assert!(verdict(
        5,
        "twin fidelity",
        pass,
        format!(
            "{} held-out contexts, mean rel err {:.4}, ranking {:.4}, within 10% {:.4}, stopped at {}, twin stages {:.1?}",
            f.contexts, f.mean_relative_error, f.ranking_agreement, f.within_10pct, run.twin.stopped_at, run.twin_stage
        ),
    ));
}

#[test]
fn criterion_6_classifier_quality() {
    let run = default_run();
    let c = &run.classifier;
    let max_iterations = run.config.clf_train.max_iterations;
    let early = c.early_stopped && c.stopped_at < max_iterations;
    let pass = c.test_accuracy >= 0.85
        && c.test_regret <= 0.02
        && early
        && run.config.clf_train.patience == 50
        && run.clf_stage < Duration::from_secs(600);
    assert!(verdict(
        6,
        "classifier quality",
        pass,
        format!(
            "accuracy {:.4} (target 0.85), regret {:.4} (target 0.02), early stop at {} of {max_iterations} (best {}), label+train {:.1?}",
            c.test_accuracy, c.test_regret, c.stopped_at, c.best_iteration, run.clf_stage
        ),
    ));
}

fn dominance(summary: &BenchmarkSummary) -> (bool, String) {
    let mut ok = summary.n_contexts >= 500;
    let mut detail = format!("{} contexts", summary.n_contexts);
    let memorai = summary.mean_energy_j["memorai"];
    for b in ["random", "equal", "weighted"] {
        let ours = summary.aggregate("memorai", b).unwrap().mean_savings_j;
        let best = summary.aggregate("optimal", b).unwrap().mean_savings_j;
        ok &= memorai <= summary.mean_energy_j[b] && ours >= 0.8 * best;
        detail += &format!("; vs {b}: {ours:.1} J of {best:.1} J ({:.3})", ours / best);
    }
    (ok, detail)
}

#[test]
fn criterion_7_policy_dominance() {
    let (ok12, d12) = dominance(&default_run().summary);
    let (ok8, d8) = dominance(eight_way_summary());
    assert!(verdict(7, "policy dominance", ok12 && ok8, format!("12-way: {d12} | 8-way: {d8}")));
}

#[test]
fn criterion_8_determinism() {
    let first = default_run();
    let dir = tempfile::TempDir::new().unwrap();
    let config = RunConfig {
        output_dir: dir.path().to_path_buf(),
        ..first.config.clone()
    };
    cmd_run_all(&config).unwrap();
    let second = csv_artifacts(dir.path());
    let differing: Vec<&str> = first
        .csv
        .iter()
        .filter(|(name, bytes)| second.get(*name) != Some(bytes))
        .map(|(name, _)| *name)
        .collect();
    let pass = differing.is_empty() && first.csv.len() == 4;
    assert!(verdict(
        8,
        "determinism",
        pass,
        format!("{} CSV artifacts compared, differing: {differing:?}", first.csv.len()),
    ));
}

#[test]
fn criterion_9_energy_linearity() {
    let run = default_run();
    let spec = &run.config.platform;
    let interval = run.config.interval_s;
    let mut worst: f64 = 0.0;
    for pair in run.rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let reported = a.energy_j - b.energy_j;
        let expected = spec.watts_per_core * (a.true_cpu - b.true_cpu) * interval;
        let scale = expected.abs().max(spec.watts_per_core * interval * 1e-3);
        worst = worst.max((reported - expected).abs() / scale);
    }
    for row in &run.rows {
        let e = energy(row.true_cpu, spec, interval).energy_j;
        worst = worst.max((row.energy_j - e).abs() / e);
    }
    let mut idle_free = true;
    for idle in [0.0, 50.0, 300.0] {
        let s = PlatformSpec { idle_power_w: idle, ..spec.clone() };
        let d = energy(7.25, &s, interval).energy_j - energy(5.5, &s, interval).energy_j;
        idle_free &= (d - spec.watts_per_core * 1.75 * interval).abs() <= 1e-9 * d;
    }
    let pass = worst <= 1e-9 && idle_free;
    assert!(verdict(
        9,
        "energy linearity",
        pass,
        format!("{} report rows, max rel deviation {worst:.2e}, idle-independent {idle_free}", run.rows.len()),
    ));
}
