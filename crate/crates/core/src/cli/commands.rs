use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::report::{write_plotdata, write_report_csv};
use crate::allocator::enumerate_allocations;
use crate::error::{Error, Result};
use crate::pipeline::{
    build_classifier_dataset, evaluate_policies_with, standard_policies, train_classifier,
    ClassifierDataset, ClassifierDatasetMeta, TrainedClassifier,
};
use crate::twin::{
    generate_twin_dataset, train_twin, DigitalTwin, TwinDataset, TwinDatasetMeta, TwinEvaluator,
};

pub const TWIN_DATA_CSV: &str = "twin_data.csv";
pub const TWIN_DATA_META: &str = "twin_data.json";
pub const TWIN_MODEL: &str = "twin.json";
pub const LABELS_CSV: &str = "labels.csv";
pub const LABELS_META: &str = "labels.json";
pub const CLASSIFIER_MODEL: &str = "classifier.json";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_SUMMARY: &str = "report.json";
pub const PLOTDATA_CSV: &str = "plotdata.csv";
pub const MANIFEST: &str = "manifest.json";

/// Every artifact `run-all` writes, in stage order.
pub const ALL_ARTIFACTS: [&str; 9] = [
    TWIN_DATA_CSV,
    TWIN_DATA_META,
    TWIN_MODEL,
    LABELS_CSV,
    LABELS_META,
    CLASSIFIER_MODEL,
    REPORT_CSV,
    REPORT_SUMMARY,
    PLOTDATA_CSV,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub stage: String,
    pub sha256: String,
    /// Hashes of the artifacts this one was computed from.
    pub inputs: BTreeMap<String, String>,
}

/// Provenance record kept in the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

struct Run<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate()?;
        let dir = cfg.output_dir.clone();
        fs::create_dir_all(&dir)?;
        Ok(Run { cfg, dir })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn require(&self, name: &str, stage: &'static str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact { path: p, stage })
        }
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(name), text)?;
        Ok(())
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, name: &str, stage: &'static str) -> Result<T> {
        let p = self.require(name, stage)?;
        Ok(serde_json::from_slice(&fs::read(p)?)?)
    }

    fn manifest(&self) -> Result<Manifest> {
        let fresh = Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: self.cfg.hash(),
            seed: self.cfg.seed,
            config: self.cfg.clone(),
            artifacts: BTreeMap::new(),
        };
        let p = self.path(MANIFEST);
        if !p.is_file() {
            return Ok(fresh);
        }
        let old: Manifest = serde_json::from_slice(&fs::read(p)?)?;
        if old.config_hash != fresh.config_hash {
            return Ok(fresh);
        }
        Ok(Manifest {
            artifacts: old.artifacts,
            ..fresh
        })
    }

    fn record(&self, stage: &str, outputs: &[&str], inputs: &[&str]) -> Result<()> {
        let mut manifest = self.manifest()?;
        let mut input_hashes = BTreeMap::new();
        for name in inputs {
            input_hashes.insert(name.to_string(), sha256_file(&self.path(name))?);
        }
        for name in outputs {
            manifest.artifacts.insert(
                name.to_string(),
                ArtifactEntry {
                    stage: stage.to_string(),
                    sha256: sha256_file(&self.path(name))?,
                    inputs: input_hashes.clone(),
                },
            );
        }
        self.write_json(MANIFEST, &manifest)
    }

    fn load_twin_dataset(&self) -> Result<TwinDataset> {
        let meta: TwinDatasetMeta = self.read_json(TWIN_DATA_META, "gen-data")?;
        let csv = File::open(self.require(TWIN_DATA_CSV, "gen-data")?)?;
        TwinDataset::read_csv(csv, meta)
    }

    fn load_labels(&self) -> Result<ClassifierDataset> {
        let meta: ClassifierDatasetMeta = self.read_json(LABELS_META, "build-labels")?;
        let csv = File::open(self.require(LABELS_CSV, "build-labels")?)?;
        ClassifierDataset::read_csv(csv, meta)
    }
}

fn staged<T>(stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_stage(stage))
}

/// Sample and measure the twin training data.
pub fn cmd_gen_data(cfg: &RunConfig) -> Result<TwinDataset> {
    staged("gen-data", || {
        let run = Run::new(cfg)?;
        let ds = generate_twin_dataset(&cfg.platform, &cfg.oracle, cfg.sizes.twin_contexts, cfg.seed)?;
        ds.write_csv(BufWriter::new(File::create(run.path(TWIN_DATA_CSV))?))?;
        run.write_json(TWIN_DATA_META, &ds.meta)?;
        run.record("gen-data", &[TWIN_DATA_CSV, TWIN_DATA_META], &[])?;
        Ok(ds)
    })
}

pub fn cmd_train_twin(cfg: &RunConfig) -> Result<DigitalTwin> {
    staged("train-twin", || {
        let run = Run::new(cfg)?;
        let ds = run.load_twin_dataset()?;
        if ds.meta.spec != cfg.platform {
            return Err(Error::validation(
                "twin dataset was generated for a different platform; run gen-data again",
            ));
        }
        let twin = train_twin(&ds, &cfg.effective_twin_train())?;
        run.write_json(TWIN_MODEL, &twin)?;
        run.record("train-twin", &[TWIN_MODEL], &[TWIN_DATA_CSV, TWIN_DATA_META])?;
        Ok(twin)
    })
}

/// Label classifier contexts by exhaustive search over the twin.
pub fn cmd_build_labels(cfg: &RunConfig) -> Result<ClassifierDataset> {
    staged("build-labels", || {
        let run = Run::new(cfg)?;
        let twin: DigitalTwin = run.read_json(TWIN_MODEL, "train-twin")?;
        let space = enumerate_allocations(cfg.platform.n_llc, cfg.platform.n_vbs)?;
        let ds = build_classifier_dataset(
            std::slice::from_ref(&twin),
            &cfg.platform,
            &space,
            cfg.sizes.classifier_contexts,
            cfg.seed,
        )?;
        ds.write_csv(BufWriter::new(File::create(run.path(LABELS_CSV))?))?;
        run.write_json(LABELS_META, &ds.meta)?;
        run.record("build-labels", &[LABELS_CSV, LABELS_META], &[TWIN_MODEL])?;
        Ok(ds)
    })
}

pub fn cmd_train_clf(cfg: &RunConfig) -> Result<TrainedClassifier> {
    staged("train-clf", || {
        let run = Run::new(cfg)?;
        let ds = run.load_labels()?;
        let clf = train_classifier(&ds, &cfg.platform, &cfg.oracle, &cfg.effective_clf_train())?;
        run.write_json(CLASSIFIER_MODEL, &clf)?;
        run.record("train-clf", &[CLASSIFIER_MODEL], &[LABELS_CSV, LABELS_META])?;
        Ok(clf)
    })
}

/// Benchmark the classifier against the baselines on fresh contexts.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<crate::pipeline::BenchmarkReport> {
    staged("evaluate", || {
        let run = Run::new(cfg)?;
        let clf: TrainedClassifier = run.read_json(CLASSIFIER_MODEL, "train-clf")?;
        let twin: DigitalTwin = run.read_json(TWIN_MODEL, "train-twin")?;
        let report = evaluate_policies_with(
            &cfg.platform,
            &cfg.oracle,
            &standard_policies(&clf.model),
            cfg.sizes.eval_contexts,
            cfg.interval_s,
            cfg.seed,
            Some(&TwinEvaluator::new(std::slice::from_ref(&twin), &cfg.platform)?),
        )?;
        write_report_csv(&report.rows, BufWriter::new(File::create(run.path(REPORT_CSV))?))?;
        run.write_json(REPORT_SUMMARY, &report.summary)?;
        write_plotdata(&report.summary, BufWriter::new(File::create(run.path(PLOTDATA_CSV))?))?;
        run.record(
            "evaluate",
            &[REPORT_CSV, REPORT_SUMMARY, PLOTDATA_CSV],
            &[CLASSIFIER_MODEL, TWIN_MODEL, LABELS_CSV, TWIN_DATA_CSV],
        )?;
        Ok(report)
    })
}

/// Key numbers from a complete run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub twin_test_mse: f64,
    pub twin_stopped_at: usize,
    pub distinct_labels: usize,
    pub clf_accuracy: f64,
    pub clf_regret: f64,
    pub clf_stopped_at: usize,
}

pub fn cmd_run_all(cfg: &RunConfig) -> Result<RunSummary> {
    cmd_gen_data(cfg)?;
    let twin = cmd_train_twin(cfg)?;
    let labels = cmd_build_labels(cfg)?;
    let clf = cmd_train_clf(cfg)?;
    cmd_evaluate(cfg)?;
    Ok(RunSummary {
        twin_test_mse: twin.test_mse,
        twin_stopped_at: twin.stopped_at,
        distinct_labels: labels.distinct_labels(),
        clf_accuracy: clf.test_accuracy,
        clf_regret: clf.test_regret,
        clf_stopped_at: clf.stopped_at,
    })
}
