//! Per-cell datasets: residents' indicators aggregated into behavioral
//! attributes, labeled against the distribution mean, with min-max
//! normalized environmental features.

mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::csvio::read_rows;
use crate::environment::{EnvAttributes, PoiIndex};
use crate::error::{Error, Result};
use crate::geocode::GeohashId;
use crate::sensing::IndividualRecord;

pub use synth::{generate_synthetic, SynthCohort, SynthSpec, TruthProfile};

pub const DATASET_HEADER: [&str; 7] = ["geohash", "athletics", "fastfood", "parks", "cafes", "attr", "label"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Low,
    High,
}

impl Label {
    /// Persistence code: Low = 0, High = 1.
    pub fn code(self) -> u8 {
        match self {
            Label::Low => 0,
            Label::High => 1,
        }
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Label::Low),
            1 => Ok(Label::High),
            other => Err(Error::InvalidInput(format!("label code {other} is not 0 or 1"))),
        }
    }

    pub fn index(self) -> usize {
        self.code() as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Low => "Low",
            Label::High => "High",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeohashProfile {
    pub geohash: GeohashId,
    pub env: EnvAttributes,
    pub residents: usize,
    pub behavioral_attribute: f64,
}

pub fn behavioral_attribute(indicators: &[f64]) -> Result<f64> {
    if indicators.is_empty() {
        return Err(Error::NoResidents);
    }
    Ok(indicators.iter().sum::<f64>() / indicators.len() as f64)
}

/// High iff `attr` is strictly greater than `threshold`.
pub fn label(attr: f64, threshold: f64) -> Label {
    if attr > threshold {
        Label::High
    } else {
        Label::Low
    }
}

/// Group eligible individuals by residence cell and attach POI counts.
pub fn aggregate_profiles(records: &[IndividualRecord], pois: &PoiIndex) -> Result<Vec<GeohashProfile>> {
    let mut by_cell: BTreeMap<&GeohashId, Vec<f64>> = BTreeMap::new();
    for rec in records.iter().filter(|r| r.eligible) {
        if let (Some(g), Some(ind)) = (&rec.residence, rec.indicator) {
            by_cell.entry(g).or_default().push(ind);
        }
    }
    by_cell
        .into_iter()
        .map(|(g, inds)| {
            Ok(GeohashProfile {
                geohash: g.clone(),
                env: pois.env(g),
                residents: inds.len(),
                behavioral_attribute: behavioral_attribute(&inds)?,
            })
        })
        .collect()
}

/// Per-dimension `(min, max)` of the training environmental counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds(pub [[f64; 2]; EnvAttributes::DIM]);

impl NormBounds {
    pub fn min(&self, dim: usize) -> f64 {
        self.0[dim][0]
    }

    pub fn max(&self, dim: usize) -> f64 {
        self.0[dim][1]
    }

    pub fn is_degenerate(&self, dim: usize) -> bool {
        self.max(dim) <= self.min(dim)
    }

    pub fn degenerate_dims(&self) -> Vec<usize> {
        (0..EnvAttributes::DIM).filter(|&d| self.is_degenerate(d)).collect()
    }
}

pub fn fit_normalizer(profiles: &[GeohashProfile]) -> Result<NormBounds> {
    let first = profiles.first().ok_or(Error::NoData)?.env.to_array();
    let mut bounds = first.map(|v| [f64::from(v), f64::from(v)]);
    for p in &profiles[1..] {
        for (b, v) in bounds.iter_mut().zip(p.env.to_array()) {
            let v = f64::from(v);
            b[0] = b[0].min(v);
            b[1] = b[1].max(v);
        }
    }
    Ok(NormBounds(bounds))
}

/// Min-max scale each dimension into `[0, 1]`, clamping values outside the
/// training range; degenerate dimensions map to 0.
pub fn normalize(env: &EnvAttributes, bounds: &NormBounds) -> [f64; EnvAttributes::DIM] {
    let raw = env.to_array();
    std::array::from_fn(|d| {
        if bounds.is_degenerate(d) {
            0.0
        } else {
            ((f64::from(raw[d]) - bounds.min(d)) / (bounds.max(d) - bounds.min(d))).clamp(0.0, 1.0)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub geohash: GeohashId,
    pub env: EnvAttributes,
    pub attribute: f64,
    pub features: [f64; EnvAttributes::DIM],
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
    pub norm_bounds: NormBounds,
    /// Labeling threshold in counts/min.
    pub threshold: f64,
}

/// Sidecar metadata persisted next to the dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub threshold: f64,
    pub norm_bounds: NormBounds,
    pub points: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.features.to_vec()).collect()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.points.iter().map(|p| p.label).collect()
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0, 0];
        for p in &self.points {
            c[p.label.index()] += 1;
        }
        c
    }

    pub fn meta(&self) -> DatasetMeta {
        DatasetMeta { threshold: self.threshold, norm_bounds: self.norm_bounds, points: self.points.len() }
    }

    /// Same dataset with labels replaced, e.g. for permutation controls.
    pub fn with_labels(&self, labels: &[Label]) -> Result<Dataset> {
        if labels.len() != self.points.len() {
            return Err(Error::InvalidInput("label count does not match points".into()));
        }
        let mut ds = self.clone();
        for (p, &l) in ds.points.iter_mut().zip(labels) {
            p.label = l;
        }
        Ok(ds)
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "{}", DATASET_HEADER.join(","))?;
        for p in &self.points {
            let e = p.env.to_array();
            writeln!(out, "{},{},{},{},{},{},{}", p.geohash, e[0], e[1], e[2], e[3], p.attribute, p.label.code())?;
        }
        Ok(())
    }

    pub fn write_meta(&self, out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(out, &self.meta())?;
        Ok(())
    }

    /// Rebuild a dataset from its CSV and sidecar; features are recomputed
    /// from the stored bounds.
    pub fn read(csv: impl Read, meta: &DatasetMeta) -> Result<Dataset> {
        #[derive(Deserialize)]
        struct Row {
            geohash: String,
            athletics: u32,
            fastfood: u32,
            parks: u32,
            cafes: u32,
            attr: f64,
            label: u8,
        }
        let points = read_rows(csv, &DATASET_HEADER, |r: Row, line| {
            let wrap = |e: Error| Error::parse(line, e.to_string());
            let env = EnvAttributes::from_array([r.athletics, r.fastfood, r.parks, r.cafes]);
            Ok(DataPoint {
                geohash: GeohashId::parse(&r.geohash).map_err(wrap)?,
                env,
                attribute: r.attr,
                features: normalize(&env, &meta.norm_bounds),
                label: Label::from_code(r.label).map_err(wrap)?,
            })
        })?;
        if points.is_empty() {
            return Err(Error::NoData);
        }
        if points.len() != meta.points {
            return Err(Error::InvalidInput(format!(
                "dataset has {} rows but metadata records {}",
                points.len(),
                meta.points
            )));
        }
        Ok(Dataset { points, norm_bounds: meta.norm_bounds, threshold: meta.threshold })
    }
}

/// Threshold at the unweighted mean attribute, label, normalize, and order
/// points by geohash.
pub fn build_dataset(profiles: &[GeohashProfile]) -> Result<Dataset> {
    if profiles.len() < 2 {
        return Err(Error::NoData);
    }
    let mut sorted: Vec<&GeohashProfile> = profiles.iter().collect();
    sorted.sort_by(|a, b| a.geohash.cmp(&b.geohash));
    if let Some(w) = sorted.windows(2).find(|w| w[0].geohash == w[1].geohash) {
        return Err(Error::InvalidInput(format!("duplicate geohash {}", w[0].geohash)));
    }
    let attrs: Vec<f64> = sorted.iter().map(|p| p.behavioral_attribute).collect();
    if attrs.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return Err(Error::InvalidInput("behavioral attributes must be finite and nonnegative".into()));
    }
    if attrs.iter().all(|&a| a == attrs[0]) {
        return Err(Error::DegenerateLabels("all behavioral attributes are equal".into()));
    }
    let threshold = attrs.iter().sum::<f64>() / attrs.len() as f64;
    let bounds = fit_normalizer(profiles)?;
    let points = sorted
        .into_iter()
        .map(|p| DataPoint {
            geohash: p.geohash.clone(),
            env: p.env,
            attribute: p.behavioral_attribute,
            features: normalize(&p.env, &bounds),
            label: label(p.behavioral_attribute, threshold),
        })
        .collect();
    Ok(Dataset { points, norm_bounds: bounds, threshold })
}
