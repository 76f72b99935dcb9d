use std::collections::BTreeMap;
use std::io::Read;

use serde::Deserialize;

use super::{GpsFix, SensorSample, MAX_ABS_G};
use crate::csvio::read_rows;
use crate::error::{Error, Result};
use crate::geocode::GeoPoint;

pub const ACCEL_HEADER: [&str; 5] = ["individual_id", "t_ms", "ax_g", "ay_g", "az_g"];
pub const GPS_HEADER: [&str; 5] = ["individual_id", "t_ms", "lat", "lon", "accuracy_m"];

/// Per-individual streams keyed by individual id, each sorted by `t`.
pub type Streams<T> = BTreeMap<String, Vec<T>>;

#[derive(Deserialize)]
struct AccelRow {
    individual_id: String,
    t_ms: i64,
    ax_g: f64,
    ay_g: f64,
    az_g: f64,
}

#[derive(Deserialize)]
struct GpsRow {
    individual_id: String,
    t_ms: i64,
    lat: f64,
    lon: f64,
    accuracy_m: f64,
}

fn group<T>(rows: Vec<(String, T)>, t: impl Fn(&T) -> i64) -> Streams<T> {
    let mut streams: Streams<T> = BTreeMap::new();
    for (id, item) in rows {
        streams.entry(id).or_default().push(item);
    }
    for items in streams.values_mut() {
        // stable sort keeps the first of equal timestamps in file order
        items.sort_by_key(&t);
        items.dedup_by(|later, earlier| t(later) == t(earlier));
    }
    streams
}

/// Parse an accelerometer CSV into per-individual, time-ordered sample streams.
pub fn parse_accel(source: impl Read) -> Result<Streams<SensorSample>> {
    let rows = read_rows(source, &ACCEL_HEADER, |row: AccelRow, line| {
        for (axis, v) in [("ax_g", row.ax_g), ("ay_g", row.ay_g), ("az_g", row.az_g)] {
            if !v.is_finite() || v.abs() > MAX_ABS_G {
                return Err(Error::parse(line, format!("{axis} = {v} exceeds ±{MAX_ABS_G} g")));
            }
        }
        Ok((row.individual_id, SensorSample { t: row.t_ms, ax: row.ax_g, ay: row.ay_g, az: row.az_g }))
    })?;
    Ok(group(rows, |s| s.t))
}

/// Parse a GPS CSV into per-individual, time-ordered fix streams.
pub fn parse_gps(source: impl Read) -> Result<Streams<GpsFix>> {
    let rows = read_rows(source, &GPS_HEADER, |row: GpsRow, line| {
        let point = GeoPoint::new(row.lat, row.lon).map_err(|e| Error::parse(line, e.to_string()))?;
        if row.accuracy_m.is_nan() || row.accuracy_m < 0.0 {
            return Err(Error::parse(line, format!("accuracy_m = {} is negative", row.accuracy_m)));
        }
        Ok((row.individual_id, GpsFix { t: row.t_ms, point, accuracy_m: row.accuracy_m }))
    })?;
    Ok(group(rows, |f| f.t))
}
