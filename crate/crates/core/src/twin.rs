//! Digital twin of a single vBS: a regression network predicting CPU usage
//! from `(context, |P|, ways)`.

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::CpuEvaluator;
use crate::error::{Error, Result};
use crate::nn::{self, Dataset, EpochRecord, Head, LossKind, MlpModel, TrainConfig};
use crate::platform::{true_compute, OracleParams};
use crate::seeds::{stream_rng, DOMAIN_TWIN_DATA, DOMAIN_TWIN_SPLIT};
use crate::types::{
    encode_twin_features, twin_features, PlatformSpec, TwinSample, VbsContext, SNR_MAX_DB,
    TWIN_FEATURES,
};

/// Hidden widths of the twin network.
pub const TWIN_HIDDEN: [usize; 3] = [256, 128, 64];

/// Smallest prediction the twin reports.
pub const TWIN_FLOOR: f64 = 1e-6;

/// Train/validation/test partition of item indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Random 70/15/15 partition of `n` items. With `n >= 3` the validation
    /// and test parts are never empty.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let (mut n_val, mut n_test) = (
            (0.15 * n as f64).round() as usize,
            (0.15 * n as f64).round() as usize,
        );
        if n >= 3 {
            n_val = n_val.max(1);
            n_test = n_test.max(1);
        } else {
            n_val = 0;
            n_test = 0;
        }
        let n_train = n - n_val - n_test;
        let part = |range: std::ops::Range<usize>| {
            let mut v = order[range].to_vec();
            v.sort_unstable();
            v
        };
        Split {
            train: part(0..n_train),
            val: part(n_train..n_train + n_val),
            test: part(n_train + n_val..n),
        }
    }

    /// Expand a partition of groups into a partition of their members,
    /// where group `g` owns items `g*size .. (g+1)*size`.
    pub fn expand_groups(&self, size: usize) -> Split {
        let expand = |groups: &[usize]| {
            groups
                .iter()
                .flat_map(|&g| g * size..(g + 1) * size)
                .collect::<Vec<_>>()
        };
        Split {
            train: expand(&self.train),
            val: expand(&self.val),
            test: expand(&self.test),
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Disjoint and covering `0..n`.
    pub fn is_partition_of(&self, n: usize) -> bool {
        let mut seen = vec![false; n];
        for &i in self.train.iter().chain(&self.val).chain(&self.test) {
            if i >= n || seen[i] {
                return false;
            }
            seen[i] = true;
        }
        seen.into_iter().all(|s| s)
    }
}

/// Draw a context uniformly: demands in [0,1), SNR in [0,30) dB, MCS from
/// the scheduler map.
pub fn sample_context(rng: &mut impl Rng) -> VbsContext {
    let d_ul = rng.random::<f64>();
    let d_dl = rng.random::<f64>();
    let snr = rng.random::<f64>() * SNR_MAX_DB;
    VbsContext::from_link(d_ul, d_dl, snr).expect("sampled inside the valid ranges")
}

/// Descriptive metadata stored next to the twin dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwinDatasetMeta {
    pub spec: PlatformSpec,
    pub params: OracleParams,
    pub seed: u64,
    pub n_contexts: usize,
    /// Sample-level partition; all ways variants of a context share a part.
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinDataset {
    pub meta: TwinDatasetMeta,
    /// `n_contexts * N_LLC` samples, context-major, ways ascending.
    pub samples: Vec<TwinSample>,
}

pub const TWIN_CSV_HEADER: [&str; 8] = [
    "d_ul", "d_dl", "snr", "mcs_ul", "mcs_dl", "cores", "ways", "cpu",
];

/// Sample `n_contexts` contexts and measure each one at every way count
/// with the noisy oracle.
pub fn generate_twin_dataset(
    spec: &PlatformSpec,
    params: &OracleParams,
    n_contexts: usize,
    seed: u64,
) -> Result<TwinDataset> {
    spec.validate()?;
    params.validate()?;
    if n_contexts < 1 {
        return Err(Error::validation("n_contexts must be >= 1"));
    }
    let per_context: Vec<Vec<TwinSample>> = (0..n_contexts)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, DOMAIN_TWIN_DATA, j as u64);
            let ctx = sample_context(&mut rng);
            let cores = spec.core_sets[j % spec.core_sets.len()];
            (1..=spec.n_llc)
                .map(|ways| {
                    let noise_seed: u64 = rng.random();
                    let cpu = true_compute(&ctx, cores, ways, params, Some(noise_seed))?;
                    TwinSample::new(ctx, cores, ways, cpu, spec)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let samples: Vec<TwinSample> = per_context.into_iter().flatten().collect();
    let mut split_rng = stream_rng(seed, DOMAIN_TWIN_SPLIT, 0);
    let split = Split::random(n_contexts, &mut split_rng).expand_groups(spec.n_llc as usize);
    Ok(TwinDataset {
        meta: TwinDatasetMeta {
            spec: spec.clone(),
            params: *params,
            seed,
            n_contexts,
            split,
        },
        samples,
    })
}

impl TwinDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn to_nn(&self, idx: &[usize]) -> Result<Dataset> {
        let spec = &self.meta.spec;
        let mut x = Array2::zeros((idx.len(), TWIN_FEATURES));
        let mut y = Array2::zeros((idx.len(), 1));
        for (r, &i) in idx.iter().enumerate() {
            let s = &self.samples[i];
            for (c, v) in encode_twin_features(s, spec).into_iter().enumerate() {
                x[[r, c]] = v;
            }
            y[[r, 0]] = s.cpu_usage();
        }
        Dataset::regression(x, y)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TWIN_CSV_HEADER)?;
        for s in &self.samples {
            let c = s.context();
            out.write_record([
                c.d_ul().to_string(),
                c.d_dl().to_string(),
                c.snr().to_string(),
                c.mcs_ul().to_string(),
                c.mcs_dl().to_string(),
                s.cores().to_string(),
                s.ways().to_string(),
                s.cpu_usage().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, meta: TwinDatasetMeta) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != TWIN_CSV_HEADER {
            return Err(Error::Parse {
                line: 1,
                message: "unexpected twin dataset header".into(),
            });
        }
        let mut samples = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |m: String| Error::Parse { line, message: m };
            if rec.len() != 8 {
                return Err(bad(format!("expected 8 fields, found {}", rec.len())));
            }
            let f = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("field {}: {e}", TWIN_CSV_HEADER[i])))
            };
            let u = |i: usize| -> Result<u32> {
                rec[i]
                    .trim()
                    .parse::<u32>()
                    .map_err(|e| bad(format!("field {}: {e}", TWIN_CSV_HEADER[i])))
            };
            let ctx = VbsContext::new(f(0)?, f(1)?, f(2)?, u(3)? as u8, u(4)? as u8)
                .map_err(|e| bad(e.to_string()))?;
            let s = TwinSample::new(ctx, u(5)?, u(6)?, f(7)?, &meta.spec)
                .map_err(|e| bad(e.to_string()))?;
            samples.push(s);
        }
        if !meta.split.is_partition_of(samples.len()) {
            return Err(Error::validation(
                "sidecar split does not partition the dataset rows",
            ));
        }
        Ok(TwinDataset { meta, samples })
    }
}

/// Trained twin together with the platform it models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigitalTwin {
    pub model: MlpModel,
    pub spec: PlatformSpec,
    pub test_mse: f64,
    pub history: Vec<EpochRecord>,
    pub stopped_at: usize,
    pub best_iteration: usize,
}

pub fn twin_train_config() -> TrainConfig {
    TrainConfig {
        patience: 10,
        max_iterations: 300,
        loss: LossKind::Mse,
        ..TrainConfig::default()
    }
}

/// Fit the twin network (7 -> 256 -> 128 -> 64 -> 1, ReLU) on the train
/// part with early stopping on the validation part.
pub fn train_twin(ds: &TwinDataset, config: &TrainConfig) -> Result<DigitalTwin> {
    if config.loss != LossKind::Mse {
        return Err(Error::validation("the digital twin is trained with MSE"));
    }
    let split = &ds.meta.split;
    if split.train.is_empty() || split.val.is_empty() {
        return Err(Error::validation(
            "twin dataset too small for a train/validation split",
        ));
    }
    let mut dims = vec![TWIN_FEATURES];
    dims.extend(TWIN_HIDDEN);
    dims.push(1);
    let model = nn::init_model(&nn::relu_stack(&dims, 0.0), Head::Regression, config.seed)?;
    let outcome = nn::train(model, &ds.to_nn(&split.train)?, &ds.to_nn(&split.val)?, config)?;
    let test_mse = if split.test.is_empty() {
        0.0
    } else {
        nn::evaluate_loss(&outcome.model, &ds.to_nn(&split.test)?, LossKind::Mse)?
    };
    Ok(DigitalTwin {
        model: outcome.model,
        spec: ds.meta.spec.clone(),
        test_mse,
        history: outcome.history,
        stopped_at: outcome.stopped_at,
        best_iteration: outcome.best_iteration,
    })
}

impl DigitalTwin {
    fn check_inputs(&self, cores: u32, ways: u32) -> Result<()> {
        if ways < 1 || ways > self.spec.n_llc {
            return Err(Error::validation(format!(
                "ways {ways} outside [1, {}]",
                self.spec.n_llc
            )));
        }
        if cores < 1 || cores > self.spec.m_cores {
            return Err(Error::validation(format!(
                "cores {cores} outside [1, {}]",
                self.spec.m_cores
            )));
        }
        Ok(())
    }

    fn clamp(raw: f64, cores: u32) -> f64 {
        raw.clamp(TWIN_FLOOR, f64::from(cores))
    }

    /// Predicted usage for every way count `1..=N_LLC` in one batch.
    pub fn predict_all_ways(&self, ctx: &VbsContext, cores: u32) -> Result<Vec<f64>> {
        self.check_inputs(cores, 1)?;
        let n = self.spec.n_llc as usize;
        let mut x = Vec::with_capacity(n * TWIN_FEATURES);
        for ways in 1..=self.spec.n_llc {
            x.extend(twin_features(ctx, cores, ways, &self.spec));
        }
        let x = ArrayView2::from_shape((n, TWIN_FEATURES), &x).expect("row-major features");
        let out = self.model.predict_batch(x)?;
        Ok(out.iter().map(|&v| Self::clamp(v, cores)).collect())
    }
}

/// Predicted CPU usage, clamped to `(0, cores]`.
pub fn twin_predict(dt: &DigitalTwin, ctx: &VbsContext, cores: u32, ways: u32) -> Result<f64> {
    dt.check_inputs(cores, ways)?;
    let x = twin_features(ctx, cores, ways, &dt.spec);
    let out = nn::forward(&dt.model, &x, false, None)?;
    Ok(DigitalTwin::clamp(out[0], cores))
}

/// Twin-backed evaluator: one shared twin, or one per vBS.
#[derive(Debug, Clone, Copy)]
pub struct TwinEvaluator<'a> {
    twins: &'a [DigitalTwin],
}

impl<'a> TwinEvaluator<'a> {
    pub fn new(twins: &'a [DigitalTwin], spec: &PlatformSpec) -> Result<Self> {
        if twins.len() != 1 && twins.len() != spec.n_vbs as usize {
            return Err(Error::validation(format!(
                "need 1 or {} twins, got {}",
                spec.n_vbs,
                twins.len()
            )));
        }
        if let Some(t) = twins.iter().find(|t| t.spec.n_llc != spec.n_llc) {
            return Err(Error::ModelSpaceMismatch(format!(
                "twin trained for {} ways, platform has {}",
                t.spec.n_llc, spec.n_llc
            )));
        }
        Ok(TwinEvaluator { twins })
    }
}

impl CpuEvaluator for TwinEvaluator<'_> {
    fn usage_table(&self, vbs: usize, ctx: &VbsContext, cores: u32, n_llc: u32) -> Result<Vec<f64>> {
        let twin = &self.twins[if self.twins.len() == 1 { 0 } else { vbs }];
        if twin.spec.n_llc != n_llc {
            return Err(Error::ModelSpaceMismatch(format!(
                "twin covers {} ways, table needs {n_llc}",
                twin.spec.n_llc
            )));
        }
        twin.predict_all_ways(ctx, cores)
    }
}

/// Twin accuracy against the noiseless oracle on held-out contexts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub contexts: usize,
    pub mean_relative_error: f64,
    /// Fraction of predictions within 10% of the truth.
    pub within_10pct: f64,
    /// Fraction of contexts where the twin's best way count is truly
    /// optimal or within 1% of the true minimum.
    pub ranking_agreement: f64,
}

pub fn twin_fidelity(
    dt: &DigitalTwin,
    ds: &TwinDataset,
    params: &OracleParams,
) -> Result<FidelityReport> {
    let n_llc = ds.meta.spec.n_llc as usize;
    let noiseless = params.noiseless();
    let mut contexts: Vec<usize> = ds.meta.split.test.iter().map(|&i| i / n_llc).collect();
    contexts.dedup();
    let mut rel_sum = 0.0;
    let mut within = 0usize;
    let mut agree = 0usize;
    for &c in &contexts {
        let first = &ds.samples[c * n_llc];
        let (ctx, cores) = (*first.context(), first.cores());
        let pred = dt.predict_all_ways(&ctx, cores)?;
        let truth = (1..=ds.meta.spec.n_llc)
            .map(|w| true_compute(&ctx, cores, w, &noiseless, None))
            .collect::<Result<Vec<_>>>()?;
        for (p, t) in pred.iter().zip(&truth) {
            let rel = (p - t).abs() / t;
            rel_sum += rel;
            if rel <= 0.10 {
                within += 1;
            }
        }
        let twin_best = argmin(&pred);
        let true_min = truth.iter().copied().fold(f64::INFINITY, f64::min);
        if twin_best == argmin(&truth) || truth[twin_best] <= true_min * 1.01 {
            agree += 1;
        }
    }
    let n = contexts.len().max(1) as f64;
    Ok(FidelityReport {
        contexts: contexts.len(),
        mean_relative_error: rel_sum / (n * n_llc as f64),
        within_10pct: within as f64 / (n * n_llc as f64),
        ranking_agreement: agree as f64 / n,
    })
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_size_and_split_by_context() {
        let spec = PlatformSpec::default();
        let ds = generate_twin_dataset(&spec, &OracleParams::default(), 100, 5).unwrap();
        assert_eq!(ds.len(), 1200);
        let split = &ds.meta.split;
        assert!(split.is_partition_of(1200));
        assert_eq!(split.train.len(), 70 * 12);
        assert_eq!(split.val.len(), 15 * 12);
        let ctx_of = |v: &[usize]| {
            let mut c: Vec<usize> = v.iter().map(|i| i / 12).collect();
            c.dedup();
            c
        };
        let train = ctx_of(&split.train);
        for c in ctx_of(&split.test) {
            assert!(!train.contains(&c));
        }
        for (k, s) in ds.samples.iter().enumerate() {
            assert_eq!(s.ways() as usize, k % 12 + 1);
        }
    }

    #[test]
    fn dataset_is_seed_deterministic() {
        let spec = PlatformSpec::default();
        let p = OracleParams::default();
        let a = generate_twin_dataset(&spec, &p, 20, 9).unwrap();
        let b = generate_twin_dataset(&spec, &p, 20, 9).unwrap();
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        let c = generate_twin_dataset(&spec, &p, 20, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip() {
        let spec = PlatformSpec::default();
        let ds = generate_twin_dataset(&spec, &OracleParams::default(), 10, 1).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = TwinDataset::read_csv(buf.as_slice(), ds.meta.clone()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let spec = PlatformSpec::default();
        let ds = generate_twin_dataset(&spec, &OracleParams::default(), 3, 1).unwrap();
        let text = "d_ul,d_dl,snr,mcs_ul,mcs_dl,cores,ways,cpu\n0.1,0.2,3,3,3,2,1,1.0\n0.1,x,3,3,3,2,2,1.0\n";
        match TwinDataset::read_csv(text.as_bytes(), ds.meta) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_split_keeps_val_and_test() {
        let mut rng = stream_rng(0, 0, 0);
        let s = Split::random(3, &mut rng);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (1, 1, 1));
        let s = Split::random(2000, &mut rng);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (1400, 300, 300));
    }
}
