//! Per-cell prediction maps over a bounding box, with GeoJSON and SVG export.

mod geojson;
mod svg;

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::Label;
use crate::environment::{EnvAttributes, PoiIndex};
use crate::error::Result;
use crate::forest::ForestModel;
use crate::geocode::{cover_bbox, CellBounds, GeohashId};
use crate::registry::{Named, Registry};

pub use geojson::{export_geojson, GeoJsonExporter, GEOJSON_MEDIA_TYPE};
pub use svg::{cell_labels, render_svg, SvgExporter, MIN_SVG_WIDTH};

pub const HIGH_FILL: &str = "#d62728";
pub const LOW_FILL: &str = "#1f77b4";

pub fn fill(class: Label) -> &'static str {
    match class {
        Label::High => HIGH_FILL,
        Label::Low => LOW_FILL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// The cell was part of the training data.
    Observed,
    /// The cell's class comes from the model alone.
    Imputed,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Observed => "observed",
            Provenance::Imputed => "imputed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapCell {
    pub geohash: GeohashId,
    pub env: EnvAttributes,
    pub predicted: Label,
    pub vote_fraction: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    /// In [`cover_bbox`] order.
    pub cells: Vec<HeatmapCell>,
    pub bbox: CellBounds,
    pub length: usize,
    pub model_fingerprint: String,
}

/// Score a single cell. Observed cells still show the model's prediction.
pub fn score_cell(g: &GeohashId, model: &ForestModel, pois: &PoiIndex, observed: &BTreeSet<GeohashId>) -> HeatmapCell {
    let env = pois.env(g);
    let p = model.predict(&env);
    HeatmapCell {
        geohash: g.clone(),
        env,
        predicted: p.class,
        vote_fraction: p.vote_fraction,
        provenance: if observed.contains(g) { Provenance::Observed } else { Provenance::Imputed },
    }
}

pub fn generate(
    bbox: &CellBounds,
    length: usize,
    model: &ForestModel,
    pois: &PoiIndex,
    observed: &BTreeSet<GeohashId>,
) -> Result<Heatmap> {
    let cells = cover_bbox(bbox, length)?.par_iter().map(|g| score_cell(g, model, pois, observed)).collect();
    Ok(Heatmap { cells, bbox: *bbox, length, model_fingerprint: model.fingerprint.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportOptions {
    pub width_px: u32,
    pub labels: bool,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions { width_px: 800, labels: true }
    }
}

pub trait Exporter: Named + Send + Sync {
    fn media_type(&self) -> &'static str;
    fn extension(&self) -> &'static str;
    fn export(&self, h: &Heatmap, opts: &ExportOptions, out: &mut dyn Write) -> Result<()>;
}

pub static EXPORTERS: Registry<dyn Exporter> = Registry::new("heatmap format", &[&GeoJsonExporter, &SvgExporter]);

pub fn exporter(name: &str) -> Result<&'static dyn Exporter> {
    EXPORTERS.get(name)
}


#[cfg(test)]
mod tests {
    use super::fixtures::stump_model;
    use super::*;
    use crate::environment::{Category, Poi};
    use crate::geocode::{decode, encode, GeoPoint};

    fn poi(lat: f64, lon: f64, category: Category) -> Poi {
        Poi { id: format!("{lat},{lon}"), point: GeoPoint { lat, lon }, category }
    }

    #[test]
    fn empty_cell_gets_zero_vector_prediction() {
        let model = stump_model(3);
        let g = encode(GeoPoint { lat: 40.64, lon: 22.94 }, 6).unwrap();
        let b = decode(&g);
        let h = generate(&b, 6, &model, &PoiIndex::new(&[]), &BTreeSet::new()).unwrap();
        assert_eq!(h.cells.len(), 1);
        assert_eq!(h.cells[0].env, EnvAttributes::default());
        let p = model.predict(&EnvAttributes::default());
        assert_eq!((h.cells[0].predicted, h.cells[0].vote_fraction), (p.class, p.vote_fraction));
    }

    #[test]
    fn three_by_three_block() {
        let model = stump_model(1);
        let g = encode(GeoPoint { lat: 40.64, lon: 22.94 }, 6).unwrap();
        let (lon, lat) = g.indices();
        let sw = decode(&GeohashId::from_indices(lon - 1, lat - 1, 6).unwrap());
        let ne = decode(&GeohashId::from_indices(lon + 1, lat + 1, 6).unwrap());
        let bbox = CellBounds::new(sw.center().lat, sw.center().lon, ne.center().lat, ne.center().lon).unwrap();
        let c = decode(&g).center();
        let pois: Vec<Poi> =
            (0..3).map(|i| poi(c.lat, c.lon + f64::from(i) * 1e-5, Category::AthleticsSports)).collect();
        let observed = BTreeSet::from([g.clone()]);
        let h = generate(&bbox, 6, &model, &PoiIndex::new(&pois), &observed).unwrap();
        assert_eq!(h.cells.len(), 9);
        assert_eq!(h.cells.iter().map(|c| c.geohash.clone()).collect::<Vec<_>>(), cover_bbox(&bbox, 6).unwrap());
        let center = &h.cells[4];
        assert_eq!(center.geohash, g);
        assert_eq!(center.env.athletics, 3);
        assert_eq!((center.predicted, center.provenance), (Label::High, Provenance::Observed));
        for (i, cell) in h.cells.iter().enumerate().filter(|(i, _)| *i != 4) {
            assert_eq!((cell.predicted, cell.provenance), (Label::Low, Provenance::Imputed), "cell {i}");
        }
    }

    #[test]
    fn exporter_registry() {
        assert_eq!(EXPORTERS.names(), vec!["geojson", "svg"]);
        assert_eq!(exporter("geojson").unwrap().media_type(), GEOJSON_MEDIA_TYPE);
        assert!(exporter("png").is_err());
    }
}
