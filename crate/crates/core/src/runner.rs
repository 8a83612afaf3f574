//! Experiment composition: one config wires a dataset, an OoD strategy, a
//! model, scoring methods and metrics into a reproducible run.
//!
//! Reproducibility contract: the report content (minus the runtime block) is
//! a pure function of the config and the dataset bytes. Augmentation draws
//! come from per-sample derived seeds, so neither batch size nor processing
//! order can change what any sample looks like. Every method scores the
//! identical post-strategy batch; the runner hashes the batch bytes once per
//! method and refuses to continue if the hashes ever diverge.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adapters::{save_tensor, DatasetAdapter};
use crate::augment::{self, AugmentationSpec};
use crate::error::{Error, Result};
use crate::methods::{EnergyBased, MaxSoftmax, Odin, OodMethod};
use crate::metrics::{
    auroc_all, binned_auroc, default_bin_edges, pixel_auroc, score_histogram, BinCell, Histogram,
    ScoredRecord,
};
use crate::model::{LogitReplay, MicroNet, Model};
use crate::rng::{derive_stream_seed, fnv1a_64, Rng};
use crate::sample::{Sample, TaskType};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub manifest: String,
    #[serde(default)]
    pub remapping: Option<BTreeMap<usize, usize>>,
}

/// What counts as OoD: corrupt the dataset's own images, or append a whole
/// second dataset marked OoD.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyConfig {
    Augmentation(AugmentationSpec),
    OodDataset(DatasetConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub name: String,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub name: String,
    /// Bin edges for `binned_auroc`; defaults to the ten decile bins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<f64>>,
    /// Bin count for `histogram`; defaults to 10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub task: TaskType,
    pub dataset: DatasetConfig,
    pub strategy: StrategyConfig,
    /// `init:<seed>`, `bundle:<dir>` or `replay:<manifest.json>`.
    pub model: String,
    pub methods: Vec<MethodConfig>,
    pub metrics: Vec<MetricConfig>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    #[serde(default)]
    pub dump_scores: bool,
}

fn default_batch_size() -> usize {
    4
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("at least one metric is required".into()));
        }
        let mut names = BTreeSet::new();
        for m in &self.methods {
            if !names.insert(&m.name) {
                return Err(Error::Config(format!("duplicate method \"{}\"", m.name)));
            }
            build_method(m)?;
        }
        let mut names = BTreeSet::new();
        for m in &self.metrics {
            if !names.insert(&m.name) {
                return Err(Error::Config(format!("duplicate metric \"{}\"", m.name)));
            }
            validate_metric(m)?;
        }
        if let StrategyConfig::Augmentation(spec) = &self.strategy {
            spec.validate()?;
        }
        parse_model_spec(&self.model)?;
        Ok(())
    }

    /// Hash of the canonical serialized config; overrides applied by the CLI
    /// change this value because they are applied before hashing.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        format!("{:016x}", fnv1a_64(&canonical))
    }
}

fn validate_metric(metric: &MetricConfig) -> Result<()> {
    match metric.name.as_str() {
        "auroc" | "pixel_auroc" => {
            if metric.edges.is_some() || metric.bins.is_some() {
                return Err(Error::Config(format!(
                    "metric \"{}\" takes no parameters",
                    metric.name
                )));
            }
        }
        "binned_auroc" => {
            if metric.bins.is_some() {
                return Err(Error::Config("binned_auroc takes edges, not bins".into()));
            }
            if let Some(edges) = &metric.edges {
                if edges.is_empty() {
                    return Err(Error::Config("binned_auroc edges must be non-empty".into()));
                }
                for pair in edges.windows(2) {
                    if pair[0] >= pair[1] {
                        return Err(Error::Config(
                            "binned_auroc edges must be strictly increasing".into(),
                        ));
                    }
                }
                if edges.iter().any(|&e| e <= 0.0 || e > 1.0) {
                    return Err(Error::Config(
                        "binned_auroc edges must lie within (0, 1]".into(),
                    ));
                }
            }
        }
        "histogram" => {
            if metric.edges.is_some() {
                return Err(Error::Config("histogram takes bins, not edges".into()));
            }
            if metric.bins == Some(0) {
                return Err(Error::Config("histogram needs at least 1 bin".into()));
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown metric \"{other}\" (known: {})",
                crate::metrics::metric_registry().join(", ")
            )))
        }
    }
    Ok(())
}

fn build_method(config: &MethodConfig) -> Result<Box<dyn OodMethod>> {
    let no_epsilon = |name: &str| -> Result<()> {
        if config.epsilon.is_some() {
            return Err(Error::Config(format!("method \"{name}\" takes no epsilon")));
        }
        Ok(())
    };
    let check_t = |t: Option<f32>| -> Result<()> {
        if let Some(t) = t {
            if t <= 0.0 || !t.is_finite() {
                return Err(Error::Config(format!(
                    "temperature must be positive, got {t}"
                )));
            }
        }
        Ok(())
    };
    check_t(config.temperature)?;
    match config.name.as_str() {
        "max_softmax" => {
            no_epsilon("max_softmax")?;
            Ok(Box::new(MaxSoftmax {
                temperature: config.temperature.unwrap_or(1.0),
            }))
        }
        "energy" => {
            no_epsilon("energy")?;
            Ok(Box::new(EnergyBased {
                temperature: config.temperature.unwrap_or(1.0),
            }))
        }
        "odin" => {
            let epsilon = config.epsilon.unwrap_or(0.01);
            if epsilon < 0.0 || !epsilon.is_finite() {
                return Err(Error::Config(format!(
                    "odin epsilon must be non-negative, got {epsilon}"
                )));
            }
            Ok(Box::new(Odin {
                temperature: config.temperature.unwrap_or(1000.0),
                epsilon,
            }))
        }
        other => Err(Error::Config(format!(
            "unknown method \"{other}\" (known: {})",
            crate::methods::method_registry().join(", ")
        ))),
    }
}

/// How the `model` config string resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Init(u64),
    Bundle(PathBuf),
    Replay(PathBuf),
}

fn parse_model_spec(s: &str) -> Result<ModelSpec> {
    if let Some(rest) = s.strip_prefix("init:") {
        let seed = rest.parse::<u64>().map_err(|_| {
            Error::Config(format!(
                "model \"init:<seed>\" needs an integer seed, got \"{rest}\""
            ))
        })?;
        Ok(ModelSpec::Init(seed))
    } else if let Some(rest) = s.strip_prefix("bundle:") {
        Ok(ModelSpec::Bundle(PathBuf::from(rest)))
    } else if let Some(rest) = s.strip_prefix("replay:") {
        Ok(ModelSpec::Replay(PathBuf::from(rest)))
    } else {
        Err(Error::Config(format!(
            "model must be \"init:<seed>\", \"bundle:<dir>\" or \"replay:<manifest>\", got \"{s}\""
        )))
    }
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

/// Augmentation strategy: sample `i` is augmented with a generator seeded by
/// `derive_stream_seed(seed, "aug", i)`, so outputs depend on the manifest
/// index alone, not on processing order or batch size.
pub fn augmentation_strategy<'a>(
    adapter: &'a DatasetAdapter,
    spec: &'a AugmentationSpec,
    seed: u64,
) -> impl Iterator<Item = Result<Sample>> + 'a {
    adapter.iter().enumerate().map(move |(i, sample)| {
        let sample = sample?;
        let mut rng = Rng::new(derive_stream_seed(seed, "aug", i as u64));
        Ok(augment::apply(spec, &sample, &mut rng))
    })
}

/// OoD-dataset strategy: all in-distribution samples (mask all zero), then
/// the whole second dataset with mask all one.
pub fn ood_dataset_strategy<'a>(
    in_adapter: &'a DatasetAdapter,
    ood_adapter: &'a DatasetAdapter,
) -> impl Iterator<Item = Result<Sample>> + 'a {
    // Channel reference for the mismatch check, from the first ID sample.
    let expect_channels = if in_adapter.is_empty() {
        None
    } else {
        in_adapter.load(0).ok().map(|s| s.channels())
    };
    let ood = ood_adapter.iter().map(move |sample| {
        let mut sample = sample?;
        if let Some(c) = expect_channels {
            if sample.channels() != c {
                return Err(Error::Data(format!(
                    "OoD dataset sample {} has {} channels, in-distribution data has {c}",
                    sample.id(),
                    sample.channels()
                )));
            }
        }
        let (h, w) = (sample.height(), sample.width());
        sample.set_ood_mask(crate::tensor::Tensor::filled(&[h, w], 1.0))?;
        Ok(sample)
    });
    in_adapter.iter().chain(ood)
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    /// Reason this method produced no scores (capability mismatch), if any.
    pub skipped: Option<String>,
    /// metric name -> bin descriptor -> cell. Unbinned metrics use "all".
    pub metrics: BTreeMap<String, BTreeMap<String, BinCell>>,
    pub histogram: Option<Histogram>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerSampleRow {
    pub id: String,
    pub ood_fraction: f64,
    /// Image-level score per method.
    pub scores: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchAudit {
    pub batch: usize,
    /// Byte hash of the batch as observed by each method.
    pub hashes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub total_ms: u64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub methods: BTreeMap<String, MethodReport>,
    pub per_sample: Vec<PerSampleRow>,
    pub audit: Vec<BatchAudit>,
    pub runtime: RuntimeStats,
}

impl ExperimentReport {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// results.csv: one row per (method, metric, bin), methods and metrics in
    /// config order, bins ascending. Undefined values are empty fields.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,metric,bin_lo,bin_hi,value,n_in,n_ood\n");
        for method_cfg in &self.config.methods {
            let Some(report) = self.methods.get(&method_cfg.name) else {
                continue;
            };
            if report.skipped.is_some() {
                continue;
            }
            for metric_cfg in &self.config.metrics {
                let Some(bins) = report.metrics.get(&metric_cfg.name) else {
                    continue;
                };
                let mut rows: Vec<(&String, &BinCell)> = bins.iter().collect();
                rows.sort_by(|a, b| bin_sort_key(a.0).partial_cmp(&bin_sort_key(b.0)).unwrap());
                for (bin, cell) in rows {
                    let (lo, hi) = parse_bin_key(bin);
                    let value = cell.value.map(|v| v.to_string()).unwrap_or_default();
                    out.push_str(&format!(
                        "{},{},{lo},{hi},{value},{},{}\n",
                        method_cfg.name, metric_cfg.name, cell.n_in, cell.n_ood
                    ));
                }
            }
        }
        out
    }

    /// Writes report.json and results.csv into `out_dir`.
    pub fn write_files(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let report_path = out_dir.join("report.json");
        std::fs::write(&report_path, self.to_json()).map_err(|e| Error::io(&report_path, e))?;
        let csv_path = out_dir.join("results.csv");
        std::fs::write(&csv_path, self.to_csv()).map_err(|e| Error::io(&csv_path, e))
    }
}

fn bin_key(lo: f64, hi: f64) -> String {
    format!("({lo},{hi}]")
}

fn parse_bin_key(key: &str) -> (String, String) {
    if key == "all" {
        return (String::new(), String::new());
    }
    let inner = key.trim_start_matches('(').trim_end_matches(']');
    match inner.split_once(',') {
        Some((lo, hi)) => (lo.to_string(), hi.to_string()),
        None => (String::new(), String::new()),
    }
}

fn bin_sort_key(key: &str) -> f64 {
    if key == "all" {
        return f64::NEG_INFINITY;
    }
    parse_bin_key(key).0.parse().unwrap_or(f64::NEG_INFINITY)
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Byte hash of a batch: images, masks, labels and metadata of every sample,
/// in order. Recomputed fresh for every method during fan-out.
pub fn batch_hash(batch: &[Sample]) -> String {
    let mut bytes = Vec::new();
    for sample in batch {
        for &v in sample.image.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for &v in sample.ood_mask.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(seg) = &sample.seg_mask {
            for &v in seg.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes.extend_from_slice(&(sample.label.map(|l| l as i64).unwrap_or(-1)).to_le_bytes());
        for (k, v) in &sample.meta {
            bytes.extend_from_slice(k.as_bytes());
            bytes.push(0);
            bytes.extend_from_slice(v.as_bytes());
            bytes.push(0);
        }
    }
    format!("{:016x}", fnv1a_64(&bytes))
}

/// Runs the experiment described by `config`. Relative paths resolve against
/// `root`. When `out_dir` is given and `dump_scores` is set, per-sample score
/// tensors are written under `out_dir/scores/<method>/<id>.frtd`.
pub fn run_experiment(
    config: &ExperimentConfig,
    root: &Path,
    out_dir: Option<&Path>,
) -> Result<ExperimentReport> {
    let started = Instant::now();
    config.validate()?;

    let adapter = DatasetAdapter::from_manifest_path(
        &root.join(&config.dataset.manifest),
        config.dataset.remapping.clone(),
        config.task,
    )?
    .with_source(&config.dataset.manifest);
    let ood_adapter = match &config.strategy {
        StrategyConfig::OodDataset(ds) => Some(
            DatasetAdapter::from_manifest_path(
                &root.join(&ds.manifest),
                ds.remapping.clone(),
                config.task,
            )?
            .with_source(&ds.manifest),
        ),
        StrategyConfig::Augmentation(_) => None,
    };

    let methods: Vec<Box<dyn OodMethod>> = config
        .methods
        .iter()
        .map(build_method)
        .collect::<Result<_>>()?;
    let model = build_model(
        &config.model,
        config.task,
        root,
        &adapter,
        ood_adapter.as_ref(),
    )?;

    let stream: Box<dyn Iterator<Item = Result<Sample>>> = match &config.strategy {
        StrategyConfig::Augmentation(spec) => {
            Box::new(augmentation_strategy(&adapter, spec, config.seed))
        }
        StrategyConfig::OodDataset(_) => Box::new(ood_dataset_strategy(
            &adapter,
            ood_adapter.as_ref().expect("ood adapter built above"),
        )),
    };
    let mut stream = stream.take(config.limit.unwrap_or(usize::MAX));

    let mut per_method_records: Vec<Vec<ScoredRecord>> =
        (0..methods.len()).map(|_| Vec::new()).collect();
    let mut skips: BTreeMap<String, String> = BTreeMap::new();
    let mut audit = Vec::new();
    let mut per_sample: Vec<PerSampleRow> = Vec::new();

    let mut batch_index = 0usize;
    loop {
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            match stream.next() {
                Some(sample) => batch.push(sample?),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        let model = model
            .as_deref()
            .ok_or_else(|| Error::Internal("non-empty stream but no model".into()))?;

        let row_base = per_sample.len();
        for sample in &batch {
            per_sample.push(PerSampleRow {
                id: sample.id().to_string(),
                ood_fraction: augment::ood_fraction(sample),
                scores: BTreeMap::new(),
            });
        }

        let mut hashes: BTreeMap<String, String> = BTreeMap::new();
        for (mi, method) in methods.iter().enumerate() {
            let name = method.name().to_string();
            if skips.contains_key(&name) {
                continue;
            }
            // Fan-out audit: every method must see byte-identical samples.
            hashes.insert(name.clone(), batch_hash(&batch));
            match method.calculate_ood_score(&batch, model) {
                Ok(scores) => {
                    if scores.len() != batch.len() {
                        return Err(Error::Internal(format!(
                            "method {name} returned {} scores for a batch of {}",
                            scores.len(),
                            batch.len()
                        )));
                    }
                    for (i, (sample, score)) in batch.iter().zip(scores).enumerate() {
                        per_sample[row_base + i]
                            .scores
                            .insert(name.clone(), score.image_level());
                        per_method_records[mi].push(ScoredRecord {
                            id: sample.id().to_string(),
                            ood_fraction: per_sample[row_base + i].ood_fraction,
                            score,
                            ood_mask: Some(sample.ood_mask.clone()),
                        });
                    }
                }
                Err(Error::Unsupported(reason)) => {
                    per_method_records[mi].clear();
                    for row in &mut per_sample {
                        row.scores.remove(&name);
                    }
                    hashes.remove(&name);
                    skips.insert(name, reason);
                }
                Err(other) => return Err(other),
            }
        }
        let distinct: BTreeSet<&String> = hashes.values().collect();
        if distinct.len() > 1 {
            return Err(Error::Internal(format!(
                "fan-out violation in batch {batch_index}: methods saw different bytes ({hashes:?})"
            )));
        }
        audit.push(BatchAudit {
            batch: batch_index,
            hashes,
        });
        batch_index += 1;
    }

    // Metrics per method.
    let mut method_reports: BTreeMap<String, MethodReport> = BTreeMap::new();
    for (mi, method_cfg) in config.methods.iter().enumerate() {
        let name = &method_cfg.name;
        if let Some(reason) = skips.get(name) {
            method_reports.insert(
                name.clone(),
                MethodReport {
                    skipped: Some(reason.clone()),
                    metrics: BTreeMap::new(),
                    histogram: None,
                },
            );
            continue;
        }
        let records = &per_method_records[mi];
        let mut metrics_map: BTreeMap<String, BTreeMap<String, BinCell>> = BTreeMap::new();
        let mut histogram = None;
        for metric_cfg in &config.metrics {
            match metric_cfg.name.as_str() {
                "auroc" => {
                    let cell = auroc_all(records);
                    metrics_map
                        .entry("auroc".into())
                        .or_default()
                        .insert("all".into(), cell);
                }
                "binned_auroc" => {
                    let edges = metric_cfg.edges.clone().unwrap_or_else(default_bin_edges);
                    let mut bins = BTreeMap::new();
                    for bin in binned_auroc(records, &edges)? {
                        bins.insert(bin_key(bin.lo, bin.hi), bin.cell);
                    }
                    metrics_map.insert("binned_auroc".into(), bins);
                }
                "pixel_auroc" => {
                    let cell = match config.task {
                        TaskType::Segmentation => pixel_auroc(records)?,
                        // No pixel populations exist for classification.
                        TaskType::Classification => BinCell {
                            value: None,
                            n_in: 0,
                            n_ood: 0,
                        },
                    };
                    metrics_map
                        .entry("pixel_auroc".into())
                        .or_default()
                        .insert("all".into(), cell);
                }
                "histogram" => {
                    histogram = Some(score_histogram(records, metric_cfg.bins.unwrap_or(10))?);
                }
                other => {
                    return Err(Error::Internal(format!(
                        "metric \"{other}\" passed validation but has no implementation"
                    )))
                }
            }
        }
        if config.dump_scores {
            if let Some(out_dir) = out_dir {
                for record in records {
                    let path = out_dir
                        .join("scores")
                        .join(name)
                        .join(format!("{}.frtd", record.id));
                    save_tensor(&path, &record.score.to_tensor())?;
                }
            }
        }
        method_reports.insert(
            name.clone(),
            MethodReport {
                skipped: None,
                metrics: metrics_map,
                histogram,
            },
        );
    }

    let runtime = RuntimeStats {
        total_ms: started.elapsed().as_millis() as u64,
        samples: per_sample.len(),
    };
    Ok(ExperimentReport {
        config_hash: config.content_hash(),
        config: config.clone(),
        methods: method_reports,
        per_sample,
        audit,
        runtime,
    })
}

fn build_model(
    spec: &str,
    task: TaskType,
    root: &Path,
    adapter: &DatasetAdapter,
    ood_adapter: Option<&DatasetAdapter>,
) -> Result<Option<Box<dyn Model>>> {
    match parse_model_spec(spec)? {
        ModelSpec::Init(seed) => {
            // Channel count comes from the first sample the stream will
            // yield; an entirely empty stream needs no model at all.
            let probe = if !adapter.is_empty() {
                Some(adapter.load(0)?)
            } else {
                match ood_adapter {
                    Some(ood) if !ood.is_empty() => Some(ood.load(0)?),
                    _ => None,
                }
            };
            let Some(probe) = probe else {
                return Ok(None);
            };
            let channels = probe.channels();
            let classes = adapter.class_count().max(2);
            Ok(Some(Box::new(MicroNet::init(
                seed, channels, classes, task,
            )?)))
        }
        ModelSpec::Bundle(path) => {
            let net = MicroNet::load(&root.join(path))?;
            if net.task() != task {
                return Err(Error::Config(format!(
                    "bundle is a {} model but the experiment task is {task}",
                    net.task()
                )));
            }
            Ok(Some(Box::new(net)))
        }
        ModelSpec::Replay(path) => {
            let replay = LogitReplay::load(&root.join(path))?;
            if replay.task() != task {
                return Err(Error::Config(format!(
                    "replay manifest is for {} but the experiment task is {task}",
                    replay.task()
                )));
            }
            Ok(Some(Box::new(replay)))
        }
    }
}
