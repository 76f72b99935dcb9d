use std::fmt::Write as _;
use std::io::Write;

use super::{fill, ExportOptions, Exporter, Heatmap};
use crate::error::Result;
use crate::geocode::decode;
use crate::registry::Named;

pub const GEOJSON_MEDIA_TYPE: &str = "application/geo+json";

fn coord(out: &mut String, lon: f64, lat: f64) {
    let _ = write!(out, "[{lon:.6},{lat:.6}]");
}

fn number(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_else(|_| "null".into())
}

/// One polygon feature per cell, in heatmap order. Keys are written in a
/// fixed order and coordinates with six decimals so equal heatmaps give
/// equal bytes.
pub fn export_geojson(h: &Heatmap) -> String {
    let mut s = String::with_capacity(256 + h.cells.len() * 400);
    s.push_str("{\"type\":\"FeatureCollection\",\"bbox\":[");
    let _ = write!(s, "{:.6},{:.6},{:.6},{:.6}", h.bbox.lon_min, h.bbox.lat_min, h.bbox.lon_max, h.bbox.lat_max);
    s.push_str("],\"length\":");
    let _ = write!(s, "{}", h.length);
    s.push_str(",\"model_fingerprint\":");
    s.push_str(&serde_json::to_string(&h.model_fingerprint).unwrap_or_default());
    s.push_str(",\"features\":[");
    for (i, c) in h.cells.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let b = decode(&c.geohash);
        s.push_str("\n{\"type\":\"Feature\",\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[[");
        let ring = [
            (b.lon_min, b.lat_min),
            (b.lon_max, b.lat_min),
            (b.lon_max, b.lat_max),
            (b.lon_min, b.lat_max),
            (b.lon_min, b.lat_min),
        ];
        for (k, (lon, lat)) in ring.into_iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            coord(&mut s, lon, lat);
        }
        let e = c.env;
        let _ = write!(
            s,
            "]]}},\"properties\":{{\"geohash\":\"{}\",\"predicted_class\":\"{}\",\"vote_fraction\":{},\
             \"athletics\":{},\"fastfood\":{},\"parks\":{},\"cafes\":{},\"provenance\":\"{}\",\"fill\":\"{}\"}}}}",
            c.geohash,
            c.predicted,
            number(c.vote_fraction),
            e.athletics,
            e.fastfood,
            e.parks,
            e.cafes,
            c.provenance,
            fill(c.predicted),
        );
    }
    s.push_str("\n]}\n");
    s
}

pub struct GeoJsonExporter;

impl Named for GeoJsonExporter {
    fn name(&self) -> &'static str {
        "geojson"
    }
}

impl Exporter for GeoJsonExporter {
    fn media_type(&self) -> &'static str {
        GEOJSON_MEDIA_TYPE
    }

    fn extension(&self) -> &'static str {
        "geojson"
    }

    fn export(&self, h: &Heatmap, _: &ExportOptions, out: &mut dyn Write) -> Result<()> {
        out.write_all(export_geojson(h).as_bytes())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::Label;
    use crate::heatmap::fixtures::block;
    use crate::heatmap::{HIGH_FILL, LOW_FILL};
    use serde_json::Value;

    #[test]
    fn one_feature_per_class() {
        let h = block(1, 2, |i| if i == 0 { Label::High } else { Label::Low });
        let doc: Value = serde_json::from_str(&export_geojson(&h)).unwrap();
        let features = doc["features"].as_array().unwrap();
        assert_eq!(features.len(), 2);
        let fills: Vec<&str> = features.iter().map(|f| f["properties"]["fill"].as_str().unwrap()).collect();
        assert_eq!(fills, vec![HIGH_FILL, LOW_FILL]);
        assert_eq!(features[0]["properties"]["predicted_class"], "High");
        assert_eq!(features[0]["properties"]["vote_fraction"], 0.75);
        assert_eq!(features[0]["properties"]["provenance"], "observed");
    }

    #[test]
    fn rings_follow_cell_bounds() {
        let h = block(2, 2, |_| Label::Low);
        let doc: Value = serde_json::from_str(&export_geojson(&h)).unwrap();
        for (f, c) in doc["features"].as_array().unwrap().iter().zip(&h.cells) {
            let ring = f["geometry"]["coordinates"][0].as_array().unwrap();
            assert_eq!(ring.len(), 5);
            assert_eq!(ring[0], ring[4]);
            let b = decode(&c.geohash);
            assert!((ring[2][0].as_f64().unwrap() - b.lon_max).abs() < 1e-6);
            assert!((ring[2][1].as_f64().unwrap() - b.lat_max).abs() < 1e-6);
            assert_eq!(f["properties"]["geohash"], c.geohash.as_str());
        }
    }

    #[test]
    fn byte_stable() {
        let h = block(3, 3, |i| if i % 2 == 0 { Label::High } else { Label::Low });
        assert_eq!(export_geojson(&h), export_geojson(&h.clone()));
        let single = block(1, 1, |_| Label::Low);
        let doc: Value = serde_json::from_str(&export_geojson(&single)).unwrap();
        assert_eq!(doc["features"].as_array().unwrap().len(), 1);
    }
}
