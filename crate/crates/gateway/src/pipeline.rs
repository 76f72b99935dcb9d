//! Pipeline stages. Each stage reads its inputs from the configured paths,
//! writes its artifacts to the output directory, and returns a one-line
//! summary.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use geobehave::cohort::{
    aggregate_profiles, build_dataset, generate_synthetic, Dataset, DatasetMeta, GeohashProfile, SynthSpec,
};
use geobehave::environment::{ingest_pois, Poi, PoiIndex, Taxonomy};
use geobehave::forest::{
    cross_validate, fit_forest, loo_evaluate, metrics, ForestHyperparams, ForestModel, LooPrediction,
};
use geobehave::forest::{ConfusionMatrix, CvReport, MetricsReport};
use geobehave::geocode::{CellBounds, GeohashId};
use geobehave::heatmap::{exporter, generate, ExportOptions, Heatmap};
use geobehave::sensing::{extract_all, parse_accel, parse_gps, IndividualRecord};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{InputPaths, PipelineConfig};
use crate::UsageError;

pub const INGEST_REPORT: &str = "ingest.json";
pub const RECORDS: &str = "records.json";
pub const PROFILES: &str = "profiles.json";
pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_META: &str = "dataset.meta.json";
pub const CV_REPORT: &str = "cv.json";
pub const MODEL: &str = "model.json";
pub const EVALUATION: &str = "evaluation.json";

fn read_text(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_file<T>(path: &Path, parse: impl FnOnce(&str) -> geobehave::Result<T>) -> anyhow::Result<T> {
    let text = read_text(path)?;
    parse(&text).with_context(|| format!("{}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    parse_file(path, |t| serde_json::from_str(t).map_err(Into::into))
}

pub fn write_artifact(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_artifact(path, text.as_bytes())
}

pub fn load_pois(inputs: &InputPaths) -> anyhow::Result<Vec<Poi>> {
    let taxonomy = parse_file(&inputs.taxonomy, Taxonomy::parse)?;
    parse_file(&inputs.poi, |t| ingest_pois(t.as_bytes(), &taxonomy))
}

pub fn load_dataset(cfg: &PipelineConfig) -> anyhow::Result<Dataset> {
    let csv = cfg.artifact(DATASET_CSV);
    let meta: DatasetMeta = read_json(&cfg.artifact(DATASET_META))?;
    parse_file(&csv, |t| Dataset::read(t.as_bytes(), &meta))
}

pub fn load_model(path: &Path) -> anyhow::Result<ForestModel> {
    parse_file(path, ForestModel::from_json)
}

/// Geohashes of the training set, empty when no dataset has been built.
pub fn observed_cells(cfg: &PipelineConfig) -> anyhow::Result<BTreeSet<GeohashId>> {
    if !cfg.artifact(DATASET_CSV).exists() {
        return Ok(BTreeSet::new());
    }
    Ok(load_dataset(cfg)?.points.into_iter().map(|p| p.geohash).collect())
}

#[derive(Debug, Serialize)]
struct StreamSummary {
    individuals: usize,
    rows: usize,
}

#[derive(Debug, Serialize)]
struct IngestReport {
    accel: StreamSummary,
    gps: StreamSummary,
    pois: usize,
    pois_by_category: BTreeMap<String, usize>,
}

pub fn ingest(cfg: &PipelineConfig) -> anyhow::Result<String> {
    let accel = parse_file(&cfg.inputs.accel, |t| parse_accel(t.as_bytes()))?;
    let gps = parse_file(&cfg.inputs.gps, |t| parse_gps(t.as_bytes()))?;
    let pois = load_pois(&cfg.inputs)?;
    let mut by_category = BTreeMap::new();
    for p in &pois {
        *by_category.entry(p.category.to_string()).or_insert(0) += 1;
    }
    let report = IngestReport {
        accel: StreamSummary { individuals: accel.len(), rows: accel.values().map(Vec::len).sum() },
        gps: StreamSummary { individuals: gps.len(), rows: gps.values().map(Vec::len).sum() },
        pois: pois.len(),
        pois_by_category: by_category,
    };
    write_json(&cfg.artifact(INGEST_REPORT), &report)?;
    Ok(format!(
        "{} accelerometer rows for {} individuals, {} GPS fixes, {} POIs",
        report.accel.rows, report.accel.individuals, report.gps.rows, report.pois
    ))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExtractReport {
    pub length: usize,
    pub individuals: usize,
    pub eligible: usize,
    pub records: Vec<IndividualRecord>,
}

pub fn extract(cfg: &PipelineConfig) -> anyhow::Result<String> {
    let accel = parse_file(&cfg.inputs.accel, |t| parse_accel(t.as_bytes()))?;
    let gps = parse_file(&cfg.inputs.gps, |t| parse_gps(t.as_bytes()))?;
    let records = extract_all(&accel, &gps, &cfg.activity, cfg.length)?;
    let report = ExtractReport {
        length: cfg.length,
        individuals: records.len(),
        eligible: records.iter().filter(|r| r.eligible).count(),
        records,
    };
    write_json(&cfg.artifact(RECORDS), &report)?;
    Ok(format!("{} individuals, {} eligible", report.individuals, report.eligible))
}

pub fn dataset(cfg: &PipelineConfig) -> anyhow::Result<String> {
    let path = cfg.artifact(RECORDS);
    let report: ExtractReport = read_json(&path)?;
    if report.length != cfg.length {
        return Err(UsageError(format!(
            "{} was extracted at length {}, config asks for {}",
            path.display(),
            report.length,
            cfg.length
        ))
        .into());
    }
    let pois = load_pois(&cfg.inputs)?;
    let profiles: Vec<GeohashProfile> = aggregate_profiles(&report.records, &PoiIndex::new(&pois))?;
    let ds = build_dataset(&profiles).with_context(|| format!("building dataset from {}", path.display()))?;
    write_json(&cfg.artifact(PROFILES), &profiles)?;
    let mut csv = Vec::new();
    ds.write_csv(&mut csv)?;
    write_artifact(&cfg.artifact(DATASET_CSV), &csv)?;
    write_json(&cfg.artifact(DATASET_META), &ds.meta())?;
    let [low, high] = ds.class_counts();
    Ok(format!("{} cells ({low} Low, {high} High), threshold {:.3} counts/min", ds.len(), ds.threshold))
}

pub fn train(cfg: &PipelineConfig) -> anyhow::Result<String> {
    let ds = load_dataset(cfg)?;
    let grid = cfg.search_grid();
    let cv: CvReport = cross_validate(&ds, &grid, cfg.folds, cfg.seed)
        .with_context(|| format!("cross-validating {}", cfg.artifact(DATASET_CSV).display()))?;
    let model = fit_forest(&ds, &cv.best)?;
    write_json(&cfg.artifact(CV_REPORT), &cv)?;
    write_artifact(&cfg.artifact(MODEL), model.to_json()?.as_bytes())?;
    let hp = &cv.best;
    Ok(format!(
        "selected {} trees, depth {}, {} (mean CV accuracy {:.3}); model {}",
        hp.n_trees,
        hp.max_depth.map_or("unlimited".to_string(), |d| d.to_string()),
        hp.criterion,
        cv.best_accuracy,
        &model.fingerprint[..12]
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub hyperparams: ForestHyperparams,
    pub points: usize,
    /// Seed of the label permutation, for shuffle controls.
    pub permutation_seed: Option<u64>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricsReport,
    pub predictions: Vec<LooPrediction>,
}

/// Leave-one-out with the hyperparameters of the trained model, optionally
/// on a seeded permutation of the labels.
pub fn evaluate_dataset(
    ds: &Dataset,
    hp: &ForestHyperparams,
    permutation_seed: Option<u64>,
) -> anyhow::Result<EvaluationReport> {
    let ds = match permutation_seed {
        Some(seed) => {
            let mut labels = ds.labels();
            labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            ds.with_labels(&labels)?
        }
        None => ds.clone(),
    };
    let loo = loo_evaluate(&ds, hp)?;
    Ok(EvaluationReport {
        hyperparams: hp.clone(),
        points: ds.len(),
        permutation_seed,
        confusion: loo.confusion,
        metrics: metrics(&loo.confusion)?,
        predictions: loo.predictions,
    })
}

pub fn evaluate(cfg: &PipelineConfig, permutation_seed: Option<u64>, out: Option<&Path>) -> anyhow::Result<String> {
    let ds = load_dataset(cfg)?;
    let model = load_model(&cfg.artifact(MODEL))?;
    let report = evaluate_dataset(&ds, &model.hyperparams, permutation_seed)?;
    let path = out.map_or_else(|| cfg.artifact(EVALUATION), Path::to_path_buf);
    write_json(&path, &report)?;
    let m = &report.metrics;
    Ok(format!(
        "LOO accuracy {:.4} over {} cells; Low P/R/F1 {:.2}/{:.2}/{:.2}, High {:.2}/{:.2}/{:.2}",
        m.accuracy, m.total, m.low.precision, m.low.recall, m.low.f1, m.high.precision, m.high.recall, m.high.f1
    ))
}

pub struct HeatmapRequest {
    pub bbox: CellBounds,
    pub length: usize,
    pub format: String,
    pub options: ExportOptions,
    /// `None` writes to standard output.
    pub file: Option<PathBuf>,
}

pub const MAX_HEATMAP_CELLS: u64 = 250_000;

pub fn build_heatmap(cfg: &PipelineConfig, bbox: &CellBounds, length: usize) -> anyhow::Result<Heatmap> {
    let cells = geobehave::geocode::cover_count(bbox, length)?;
    if cells > MAX_HEATMAP_CELLS {
        return Err(UsageError(format!("bbox covers {cells} cells, limit is {MAX_HEATMAP_CELLS}")).into());
    }
    let model = load_model(&cfg.artifact(MODEL))?;
    let pois = load_pois(&cfg.inputs)?;
    let observed = observed_cells(cfg)?;
    Ok(generate(bbox, length, &model, &PoiIndex::new(&pois), &observed)?)
}

pub fn heatmap(cfg: &PipelineConfig, req: &HeatmapRequest) -> anyhow::Result<String> {
    let exp = exporter(&req.format)?;
    let h = build_heatmap(cfg, &req.bbox, req.length)?;
    let mut bytes = Vec::new();
    exp.export(&h, &req.options, &mut bytes)?;
    let high = h.cells.iter().filter(|c| c.predicted == geobehave::cohort::Label::High).count();
    let summary = format!("{} cells ({high} High)", h.cells.len());
    match &req.file {
        Some(path) => {
            write_artifact(path, &bytes)?;
            Ok(format!("{summary} -> {}", path.display()))
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
            Ok(summary)
        }
    }
}

/// How much observation noise to add to a synthetic cohort.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Absolute(f64),
    /// Fraction of the noiseless cohort's effect range.
    RangeFraction(f64),
}

pub fn synth_spec(spec: SynthSpec, noise: Option<Noise>) -> anyhow::Result<SynthSpec> {
    Ok(match noise {
        None => spec,
        Some(Noise::Absolute(sd)) => SynthSpec { noise_sd: sd, ..spec },
        Some(Noise::RangeFraction(f)) => {
            let range = generate_synthetic(&SynthSpec { noise_sd: 0.0, ..spec.clone() })?.effect_range();
            SynthSpec { noise_sd: f * range, ..spec }
        }
    })
}

pub const SYNTH_CONFIG: &str = "pipeline.json";

/// Write a synthetic cohort plus a pipeline config that runs on it.
pub fn synth(spec: &SynthSpec, dir: &Path) -> anyhow::Result<String> {
    let c = generate_synthetic(spec)?;
    let inputs = InputPaths::default();
    write_artifact(&dir.join(&inputs.accel), c.accel_csv.as_bytes())?;
    write_artifact(&dir.join(&inputs.gps), c.gps_csv.as_bytes())?;
    write_artifact(&dir.join(&inputs.poi), c.poi_csv.as_bytes())?;
    write_artifact(&dir.join(&inputs.taxonomy), c.taxonomy.as_bytes())?;
    write_artifact(&dir.join("truth.csv"), c.truth_csv().as_bytes())?;
    write_json(&dir.join("synth.json"), spec)?;
    let cfg = PipelineConfig {
        inputs,
        length: spec.length,
        activity: c.activity.clone(),
        seed: spec.seed,
        ..PipelineConfig::default()
    };
    write_json(&dir.join(SYNTH_CONFIG), &cfg)?;
    Ok(format!(
        "{} resident cells, effect range {:.1}, noise sd {:.2} -> {}",
        c.truth.len(),
        c.effect_range(),
        spec.noise_sd,
        dir.display()
    ))
}
