//! End-to-end workflow: twin data and training, twin-labelled classifier
//! data, classifier training, and ground-truth benchmarking of policies.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{
    baseline_equal, baseline_random, baseline_weighted, best_from_tables, memorai_decide,
    usage_tables, AllocationSpace, CpuEvaluator, OracleEvaluator,
};
use crate::cli::RunConfig;
use crate::error::{Error, Result};
use crate::nn::{self, argmax, Dataset, EpochRecord, Head, LossKind, MlpModel, TrainConfig};
use crate::platform::{energy, OracleParams};
use crate::seeds::{stream_rng, DOMAIN_CLF_DATA, DOMAIN_CLF_SPLIT, DOMAIN_EVAL};
use crate::twin::{
    generate_twin_dataset, sample_context, train_twin, DigitalTwin, Split, TwinDataset,
    TwinEvaluator,
};
use crate::types::{
    encode_classifier_features, GlobalContext, PlatformSpec, VbsContext,
    CLASSIFIER_FEATURES_PER_VBS,
};

/// Hidden widths of the allocation classifier.
pub const CLASSIFIER_HIDDEN: [usize; 4] = [512, 384, 384, 512];
pub const CLASSIFIER_DROPOUT: f64 = 0.2;

pub fn classifier_train_config() -> TrainConfig {
    TrainConfig {
        patience: 50,
        max_iterations: 300,
        loss: LossKind::CrossEntropy,
        ..TrainConfig::default()
    }
}

/// Draw one global context: every vBS i.i.d. uniform.
pub fn sample_global_context(spec: &PlatformSpec, rng: &mut impl Rng) -> GlobalContext {
    GlobalContext::new((0..spec.n_vbs).map(|_| sample_context(rng)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledContext {
    pub context: GlobalContext,
    pub label: usize,
}

/// Split and space metadata stored next to the label CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierDatasetMeta {
    pub space_signature: (u32, u32),
    pub seed: u64,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierDataset {
    pub meta: ClassifierDatasetMeta,
    pub rows: Vec<LabeledContext>,
}

/// Label random contexts with the exhaustive-search optimum under the
/// given evaluator.
pub fn label_contexts(
    evaluator: &dyn CpuEvaluator,
    spec: &PlatformSpec,
    space: &AllocationSpace,
    n_contexts: usize,
    seed: u64,
) -> Result<ClassifierDataset> {
    spec.validate()?;
    if space.signature() != (spec.n_llc, spec.n_vbs) {
        return Err(Error::ModelSpaceMismatch(
            "allocation space does not match the platform".into(),
        ));
    }
    if n_contexts < 1 {
        return Err(Error::validation("n_contexts must be >= 1"));
    }
    let rows = (0..n_contexts)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, DOMAIN_CLF_DATA, j as u64);
            let context = sample_global_context(spec, &mut rng);
            let tables = usage_tables(&context, spec, evaluator)?;
            let label = best_from_tables(space, &tables).class;
            Ok(LabeledContext { context, label })
        })
        .collect::<Result<Vec<_>>>()?;
    let split = Split::random(n_contexts, &mut stream_rng(seed, DOMAIN_CLF_SPLIT, 0));
    Ok(ClassifierDataset {
        meta: ClassifierDatasetMeta {
            space_signature: space.signature(),
            seed,
            split,
        },
        rows,
    })
}

/// Twin-labelled classifier dataset.
pub fn build_classifier_dataset(
    twins: &[DigitalTwin],
    spec: &PlatformSpec,
    space: &AllocationSpace,
    n_contexts: usize,
    seed: u64,
) -> Result<ClassifierDataset> {
    let evaluator = TwinEvaluator::new(twins, spec)?;
    label_contexts(&evaluator, spec, space, n_contexts, seed)
}

const CONTEXT_FIELDS: [&str; 5] = ["d_ul", "d_dl", "snr", "mcs_ul", "mcs_dl"];

impl ClassifierDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn distinct_labels(&self) -> usize {
        let mut labels: Vec<usize> = self.rows.iter().map(|r| r.label).collect();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    }

    fn to_nn(&self, idx: &[usize], spec: &PlatformSpec) -> Result<Dataset> {
        let width = CLASSIFIER_FEATURES_PER_VBS * spec.n_vbs as usize;
        let mut x = Array2::zeros((idx.len(), width));
        let mut labels = Vec::with_capacity(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            let row = &self.rows[i];
            for (c, v) in encode_classifier_features(&row.context, spec)?
                .into_iter()
                .enumerate()
            {
                x[[r, c]] = v;
            }
            labels.push(row.label);
        }
        Dataset::classification(x, labels)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n_vbs = self.meta.space_signature.1 as usize;
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["context_id".to_string()];
        for i in 1..=n_vbs {
            header.extend(CONTEXT_FIELDS.iter().map(|f| format!("{f}_{i}")));
        }
        header.push("label".into());
        out.write_record(&header)?;
        for (id, row) in self.rows.iter().enumerate() {
            let mut rec = vec![id.to_string()];
            for c in row.context.contexts() {
                rec.extend([
                    c.d_ul().to_string(),
                    c.d_dl().to_string(),
                    c.snr().to_string(),
                    c.mcs_ul().to_string(),
                    c.mcs_dl().to_string(),
                ]);
            }
            rec.push(row.label.to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, meta: ClassifierDatasetMeta) -> Result<Self> {
        let n_vbs = meta.space_signature.1 as usize;
        let space_len = AllocationSpace::len(&crate::allocator::enumerate_allocations(
            meta.space_signature.0,
            meta.space_signature.1,
        )?);
        let width = 2 + CONTEXT_FIELDS.len() * n_vbs;
        let mut rdr = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |m: String| Error::Parse { line, message: m };
            if rec.len() != width {
                return Err(bad(format!("expected {width} fields, found {}", rec.len())));
            }
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("field {i}: {e}")))
            };
            let mut contexts = Vec::with_capacity(n_vbs);
            for v in 0..n_vbs {
                let b = 1 + v * CONTEXT_FIELDS.len();
                let ctx = VbsContext::new(
                    num(b)?,
                    num(b + 1)?,
                    num(b + 2)?,
                    num(b + 3)? as u8,
                    num(b + 4)? as u8,
                )
                .map_err(|e| bad(e.to_string()))?;
                contexts.push(ctx);
            }
            let label: usize = rec[width - 1]
                .trim()
                .parse()
                .map_err(|e| bad(format!("label: {e}")))?;
            if label >= space_len {
                return Err(bad(format!("label {label} outside a space of {space_len}")));
            }
            rows.push(LabeledContext {
                context: GlobalContext::new(contexts),
                label,
            });
        }
        if !meta.split.is_partition_of(rows.len()) {
            return Err(Error::validation(
                "sidecar split does not partition the label rows",
            ));
        }
        Ok(ClassifierDataset { meta, rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub model: MlpModel,
    pub space_signature: (u32, u32),
    pub history: Vec<EpochRecord>,
    pub stopped_at: usize,
    pub best_iteration: usize,
    pub early_stopped: bool,
    /// Top-1 agreement with the dataset labels on the test split.
    pub test_accuracy: f64,
    /// Mean relative excess of true compute over the true optimum on the
    /// test split.
    pub test_regret: f64,
}

/// Fit the allocation classifier (6K -> 512 -> 384 -> 384 -> 512 -> |space|,
/// ReLU, dropout 0.2) and score it on the test split.
pub fn train_classifier(
    ds: &ClassifierDataset,
    spec: &PlatformSpec,
    params: &OracleParams,
    config: &TrainConfig,
) -> Result<TrainedClassifier> {
    if config.loss != LossKind::CrossEntropy {
        return Err(Error::validation("the classifier is trained with cross-entropy"));
    }
    let space = crate::allocator::enumerate_allocations(spec.n_llc, spec.n_vbs)?;
    if ds.meta.space_signature != space.signature() {
        return Err(Error::ModelSpaceMismatch(format!(
            "labels refer to {:?}, platform is {:?}",
            ds.meta.space_signature,
            space.signature()
        )));
    }
    let split = &ds.meta.split;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::validation("classifier dataset too small to split"));
    }
    let mut dims = vec![CLASSIFIER_FEATURES_PER_VBS * spec.n_vbs as usize];
    dims.extend(CLASSIFIER_HIDDEN);
    dims.push(space.len());
    let model = nn::init_model(
        &nn::relu_stack(&dims, CLASSIFIER_DROPOUT),
        Head::Classification {
            classes: space.len(),
        },
        config.seed,
    )?;
    let outcome = nn::train(
        model,
        &ds.to_nn(&split.train, spec)?,
        &ds.to_nn(&split.val, spec)?,
        config,
    )?;

    let (test_accuracy, test_regret) = if split.test.is_empty() {
        (0.0, 0.0)
    } else {
        let test = ds.to_nn(&split.test, spec)?;
        let logits = outcome.model.predict_batch(test.inputs.view())?;
        let oracle = OracleEvaluator::new(params);
        let mut hits = 0usize;
        let mut regret = 0.0;
        for (row_logits, &i) in logits.outer_iter().zip(&split.test) {
            let predicted = argmax(row_logits.as_slice().expect("contiguous row"));
            let row = &ds.rows[i];
            if predicted == row.label {
                hits += 1;
            }
            let tables = usage_tables(&row.context, spec, &oracle)?;
            let best = best_from_tables(&space, &tables);
            let chosen = sum_tables(&tables, space.allocations()[predicted].ways());
            regret += (chosen - best.total_cpu) / best.total_cpu;
        }
        let n = split.test.len() as f64;
        (hits as f64 / n, regret / n)
    };

    Ok(TrainedClassifier {
        model: outcome.model,
        space_signature: space.signature(),
        history: outcome.history,
        stopped_at: outcome.stopped_at,
        best_iteration: outcome.best_iteration,
        early_stopped: outcome.early_stopped,
        test_accuracy,
        test_regret,
    })
}

fn sum_tables(tables: &[Vec<f64>], ways: &[u32]) -> f64 {
    tables
        .iter()
        .zip(ways)
        .map(|(t, &n)| t[n as usize - 1])
        .sum()
}

/// An allocation policy under evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Exhaustive search under the true oracle.
    Optimal,
    Memorai(&'a MlpModel),
    Random,
    Equal,
    Weighted,
}

impl Policy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Optimal => "optimal",
            Policy::Memorai(_) => "memorai",
            Policy::Random => "random",
            Policy::Equal => "equal",
            Policy::Weighted => "weighted",
        }
    }

    pub fn is_baseline(&self) -> bool {
        matches!(self, Policy::Random | Policy::Equal | Policy::Weighted)
    }
}

/// One policy's decision on one evaluation context, scored by the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRow {
    pub context_id: usize,
    pub policy: String,
    pub ways: Vec<u32>,
    pub predicted_cpu: Option<f64>,
    pub true_cpu: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsAggregate {
    pub policy: String,
    pub baseline: String,
    pub mean_savings_j: f64,
    pub max_savings_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub interval_s: f64,
    pub n_contexts: usize,
    pub policies: Vec<String>,
    pub baselines: Vec<String>,
    pub mean_energy_j: BTreeMap<String, f64>,
    pub mean_cpu: BTreeMap<String, f64>,
    pub aggregates: Vec<SavingsAggregate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<PolicyRow>,
    pub summary: BenchmarkSummary,
}

/// Per-context savings `energy(baseline) - energy(policy)`, summarized.
pub fn summarize_rows(
    rows: &[PolicyRow],
    policies: &[String],
    baselines: &[String],
    interval_s: f64,
) -> BenchmarkSummary {
    let mut by_context: BTreeMap<usize, BTreeMap<&str, &PolicyRow>> = BTreeMap::new();
    for r in rows {
        by_context
            .entry(r.context_id)
            .or_default()
            .insert(r.policy.as_str(), r);
    }
    let n_contexts = by_context.len();
    let mut mean_energy_j = BTreeMap::new();
    let mut mean_cpu = BTreeMap::new();
    for p in policies {
        let picked: Vec<&PolicyRow> = by_context
            .values()
            .filter_map(|m| m.get(p.as_str()).copied())
            .collect();
        let n = picked.len().max(1) as f64;
        mean_energy_j.insert(p.clone(), picked.iter().map(|r| r.energy_j).sum::<f64>() / n);
        mean_cpu.insert(p.clone(), picked.iter().map(|r| r.true_cpu).sum::<f64>() / n);
    }
    let mut aggregates = Vec::new();
    for p in policies {
        for b in baselines {
            let savings: Vec<f64> = by_context
                .values()
                .filter_map(|m| Some(m.get(b.as_str())?.energy_j - m.get(p.as_str())?.energy_j))
                .collect();
            let n = savings.len().max(1) as f64;
            aggregates.push(SavingsAggregate {
                policy: p.clone(),
                baseline: b.clone(),
                mean_savings_j: savings.iter().sum::<f64>() / n,
                max_savings_j: savings.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    BenchmarkSummary {
        interval_s,
        n_contexts,
        policies: policies.to_vec(),
        baselines: baselines.to_vec(),
        mean_energy_j,
        mean_cpu,
        aggregates,
    }
}

impl BenchmarkSummary {
    pub fn aggregate(&self, policy: &str, baseline: &str) -> Option<&SavingsAggregate> {
        self.aggregates
            .iter()
            .find(|a| a.policy == policy && a.baseline == baseline)
    }
}

/// Score every policy on fresh random contexts with the noiseless oracle.
pub fn evaluate_policies(
    spec: &PlatformSpec,
    params: &OracleParams,
    policies: &[Policy<'_>],
    n_eval_contexts: usize,
    interval_s: f64,
    seed: u64,
) -> Result<BenchmarkReport> {
    evaluate_policies_with(spec, params, policies, n_eval_contexts, interval_s, seed, None)
}

/// [`evaluate_policies`], additionally recording each chosen allocation's
/// total usage as estimated by `predictor` (typically the twin).
pub fn evaluate_policies_with(
    spec: &PlatformSpec,
    params: &OracleParams,
    policies: &[Policy<'_>],
    n_eval_contexts: usize,
    interval_s: f64,
    seed: u64,
    predictor: Option<&dyn CpuEvaluator>,
) -> Result<BenchmarkReport> {
    spec.validate()?;
    if !(interval_s > 0.0) {
        return Err(Error::validation("interval_s must be > 0"));
    }
    let space = crate::allocator::enumerate_allocations(spec.n_llc, spec.n_vbs)?;
    let oracle = OracleEvaluator::new(params);
    let per_context: Vec<Vec<PolicyRow>> = (0..n_eval_contexts)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, DOMAIN_EVAL, c as u64);
            let gc = sample_global_context(spec, &mut rng);
            let random_seed: u64 = rng.random();
            let tables = usage_tables(&gc, spec, &oracle)?;
            let predicted = predictor.map(|p| usage_tables(&gc, spec, p)).transpose()?;
            policies
                .iter()
                .map(|policy| {
                    let ways = match policy {
                        Policy::Optimal => best_from_tables(&space, &tables).allocation.ways().to_vec(),
                        Policy::Memorai(clf) => memorai_decide(&gc, spec, clf, &space)?.ways().to_vec(),
                        Policy::Random => baseline_random(&space, random_seed).ways().to_vec(),
                        Policy::Equal => baseline_equal(spec)?.ways,
                        Policy::Weighted => baseline_weighted(&gc, spec)?.ways,
                    };
                    let true_cpu = sum_tables(&tables, &ways);
                    let predicted_cpu = predicted.as_ref().map(|t| sum_tables(t, &ways));
                    Ok(PolicyRow {
                        context_id: c,
                        policy: policy.name().to_string(),
                        ways,
                        predicted_cpu,
                        true_cpu,
                        energy_j: energy(true_cpu, spec, interval_s).energy_j,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<PolicyRow> = per_context.into_iter().flatten().collect();
    let names: Vec<String> = policies.iter().map(|p| p.name().to_string()).collect();
    let baselines: Vec<String> = policies
        .iter()
        .filter(|p| p.is_baseline())
        .map(|p| p.name().to_string())
        .collect();
    let summary = summarize_rows(&rows, &names, &baselines, interval_s);
    Ok(BenchmarkReport { rows, summary })
}

/// Everything one full run produces.
#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub twin_dataset: TwinDataset,
    pub twin: DigitalTwin,
    pub classifier_dataset: ClassifierDataset,
    pub classifier: TrainedClassifier,
    pub report: BenchmarkReport,
}

/// Twin data, twin, labels, classifier and benchmark, in memory.
pub fn run_full_pipeline(config: &RunConfig) -> Result<PipelineArtifacts> {
    config.validate()?;
    let spec = &config.platform;
    let twin_dataset = generate_twin_dataset(spec, &config.oracle, config.sizes.twin_contexts, config.seed)
        .map_err(|e| e.in_stage("gen-data"))?;
    let twin = train_twin(&twin_dataset, &config.effective_twin_train())
        .map_err(|e| e.in_stage("train-twin"))?;
    let space = crate::allocator::enumerate_allocations(spec.n_llc, spec.n_vbs)
        .map_err(|e| e.in_stage("build-labels"))?;
    let classifier_dataset = build_classifier_dataset(
        std::slice::from_ref(&twin),
        spec,
        &space,
        config.sizes.classifier_contexts,
        config.seed,
    )
    .map_err(|e| e.in_stage("build-labels"))?;
    let classifier = train_classifier(
        &classifier_dataset,
        spec,
        &config.oracle,
        &config.effective_clf_train(),
    )
    .map_err(|e| e.in_stage("train-clf"))?;
    let twin_eval = TwinEvaluator::new(std::slice::from_ref(&twin), spec)
        .map_err(|e| e.in_stage("evaluate"))?;
    let report = evaluate_policies_with(
        spec,
        &config.oracle,
        &standard_policies(&classifier.model),
        config.sizes.eval_contexts,
        config.interval_s,
        config.seed,
        Some(&twin_eval),
    )
    .map_err(|e| e.in_stage("evaluate"))?;
    Ok(PipelineArtifacts {
        twin_dataset,
        twin,
        classifier_dataset,
        classifier,
        report,
    })
}

/// Optimal, classifier and the three baselines.
pub fn standard_policies(clf: &MlpModel) -> [Policy<'_>; 5] {
    [
        Policy::Optimal,
        Policy::Memorai(clf),
        Policy::Random,
        Policy::Equal,
        Policy::Weighted,
    ]
}
