//! Geohash codec and grid utilities.
//!
//! Cells are produced by interleaved binary subdivision of the
//! longitude/latitude box, longitude first. A coordinate that compares
//! `>=` the midpoint goes to the upper half, so every cell is half-open
//! `[min, max)` except along the global maximum edges.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BASE32: &[u8; 32] = b"0123456789bcdefghjkmnpqrstuvwxyz";
pub const MAX_LENGTH: usize = 12;
/// Meters per degree of arc on the spherical approximation.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

fn symbol_value(c: u8) -> Option<u8> {
    BASE32.iter().position(|&s| s == c).map(|p| p as u8)
}

fn check_length(length: usize) -> Result<()> {
    if (1..=MAX_LENGTH).contains(&length) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("geohash length {length} outside 1..={MAX_LENGTH}")))
    }
}

/// Number of (longitude, latitude) bits in a code of `length` symbols.
pub fn bit_split(length: usize) -> (u32, u32) {
    let total = 5 * length as u32;
    (total.div_ceil(2), total / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
            return Err(Error::InvalidInput(format!("latitude {lat} outside [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&lon) || !lon.is_finite() {
            return Err(Error::InvalidInput(format!("longitude {lon} outside [-180, 180]")));
        }
        Ok(GeoPoint { lat, lon })
    }
}

/// A validated geohash code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GeohashId(String);

impl GeohashId {
    pub fn parse(code: &str) -> Result<Self> {
        let invalid = |reason: &str| Error::InvalidGeohash { code: code.to_string(), reason: reason.to_string() };
        if code.is_empty() || code.len() > MAX_LENGTH {
            return Err(invalid("length must be 1..=12"));
        }
        if let Some(bad) = code.bytes().find(|&b| symbol_value(b).is_none()) {
            return Err(invalid(&format!("character {:?} not in alphabet", bad as char)));
        }
        Ok(GeohashId(code.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether `self` is `other` or one of its ancestors.
    pub fn is_prefix_of(&self, other: &GeohashId) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn prefix(&self, length: usize) -> Option<GeohashId> {
        (1..=self.len()).contains(&length).then(|| GeohashId(self.0[..length].to_string()))
    }

    /// Cell indices `(lon_index, lat_index)` within the grid of this length.
    pub fn indices(&self) -> (u64, u64) {
        let mut lon = 0u64;
        let mut lat = 0u64;
        let mut even = true;
        for b in self.0.bytes() {
            let v = symbol_value(b).expect("validated");
            for shift in (0..5).rev() {
                let bit = u64::from((v >> shift) & 1);
                if even {
                    lon = (lon << 1) | bit;
                } else {
                    lat = (lat << 1) | bit;
                }
                even = !even;
            }
        }
        (lon, lat)
    }

    /// Inverse of [`GeohashId::indices`].
    pub fn from_indices(lon_index: u64, lat_index: u64, length: usize) -> Result<Self> {
        check_length(length)?;
        let (lon_bits, lat_bits) = bit_split(length);
        if lon_index >> lon_bits != 0 || lat_index >> lat_bits != 0 {
            return Err(Error::InvalidInput(format!(
                "cell index ({lon_index}, {lat_index}) out of range for length {length}"
            )));
        }
        let mut code = String::with_capacity(length);
        let (mut lon_left, mut lat_left) = (lon_bits, lat_bits);
        let mut even = true;
        let mut symbol = 0u8;
        for i in 0..5 * length {
            let bit = if even {
                lon_left -= 1;
                (lon_index >> lon_left) & 1
            } else {
                lat_left -= 1;
                (lat_index >> lat_left) & 1
            };
            symbol = (symbol << 1) | bit as u8;
            even = !even;
            if i % 5 == 4 {
                code.push(BASE32[symbol as usize] as char);
                symbol = 0;
            }
        }
        Ok(GeohashId(code))
    }
}

impl fmt::Display for GeohashId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for GeohashId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        GeohashId::parse(s)
    }
}

impl TryFrom<String> for GeohashId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        GeohashId::parse(&s)
    }
}

impl From<GeohashId> for String {
    fn from(g: GeohashId) -> String {
        g.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellBounds {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl CellBounds {
    pub fn new(lat_min: f64, lon_min: f64, lat_max: f64, lon_max: f64) -> Result<Self> {
        GeoPoint::new(lat_min, lon_min)?;
        GeoPoint::new(lat_max, lon_max)?;
        if lat_min > lat_max || lon_min > lon_max {
            return Err(Error::InvalidInput(format!(
                "inverted box: lat [{lat_min}, {lat_max}], lon [{lon_min}, {lon_max}]"
            )));
        }
        Ok(CellBounds { lat_min, lat_max, lon_min, lon_max })
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint { lat: (self.lat_min + self.lat_max) / 2.0, lon: (self.lon_min + self.lon_max) / 2.0 }
    }

    /// Half-open containment; the global maximum edges are closed.
    pub fn contains(&self, p: GeoPoint) -> bool {
        let lat_ok = p.lat >= self.lat_min && (p.lat < self.lat_max || (self.lat_max == 90.0 && p.lat == 90.0));
        let lon_ok = p.lon >= self.lon_min && (p.lon < self.lon_max || (self.lon_max == 180.0 && p.lon == 180.0));
        lat_ok && lon_ok
    }

    pub fn contains_bounds(&self, inner: &CellBounds) -> bool {
        inner.lat_min >= self.lat_min
            && inner.lat_max <= self.lat_max
            && inner.lon_min >= self.lon_min
            && inner.lon_max <= self.lon_max
    }

    pub fn lat_span(&self) -> f64 {
        self.lat_max - self.lat_min
    }

    pub fn lon_span(&self) -> f64 {
        self.lon_max - self.lon_min
    }
}

/// Subdivide `[lo, hi)` `bits` times towards `value`, returning the index path.
fn subdivide(value: f64, mut lo: f64, mut hi: f64, bits: u32) -> u64 {
    let mut index = 0u64;
    for _ in 0..bits {
        let mid = (lo + hi) / 2.0;
        if value >= mid {
            index = (index << 1) | 1;
            lo = mid;
        } else {
            index <<= 1;
            hi = mid;
        }
    }
    index
}

fn interval(index: u64, mut lo: f64, mut hi: f64, bits: u32) -> (f64, f64) {
    for shift in (0..bits).rev() {
        let mid = (lo + hi) / 2.0;
        if (index >> shift) & 1 == 1 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

pub fn encode(p: GeoPoint, length: usize) -> Result<GeohashId> {
    check_length(length)?;
    let p = GeoPoint::new(p.lat, p.lon)?;
    let (lon_bits, lat_bits) = bit_split(length);
    let lon_index = subdivide(p.lon, -180.0, 180.0, lon_bits);
    let lat_index = subdivide(p.lat, -90.0, 90.0, lat_bits);
    GeohashId::from_indices(lon_index, lat_index, length)
}

pub fn decode(g: &GeohashId) -> CellBounds {
    let (lon_bits, lat_bits) = bit_split(g.len());
    let (lon_index, lat_index) = g.indices();
    let (lon_min, lon_max) = interval(lon_index, -180.0, 180.0, lon_bits);
    let (lat_min, lat_max) = interval(lat_index, -90.0, 90.0, lat_bits);
    CellBounds { lat_min, lat_max, lon_min, lon_max }
}

/// Decode a raw code string, validating it first.
pub fn decode_str(code: &str) -> Result<CellBounds> {
    Ok(decode(&GeohashId::parse(code)?))
}

/// Angular spans `(lat_span, lon_span)` in degrees of a cell of `length`.
pub fn cell_spans(length: usize) -> Result<(f64, f64)> {
    check_length(length)?;
    let (lon_bits, lat_bits) = bit_split(length);
    Ok((180.0 / 2f64.powi(lat_bits as i32), 360.0 / 2f64.powi(lon_bits as i32)))
}

/// Approximate cell `(width_m, height_m)` at latitude `lat`.
pub fn cell_dimensions(length: usize, lat: f64) -> Result<(f64, f64)> {
    GeoPoint::new(lat, 0.0)?;
    let (lat_span, lon_span) = cell_spans(length)?;
    let height = lat_span * METERS_PER_DEGREE;
    let width = lon_span * METERS_PER_DEGREE * lat.to_radians().cos();
    Ok((width, height))
}

/// Index of the last cell whose interior intersects `[.., max]` given the
/// first cell index containing the lower edge.
fn last_index(first: u64, max: f64, origin: f64, span: f64, bits: u32, top: f64) -> u64 {
    let mut last = subdivide(max, origin, top, bits);
    // a box edge lying exactly on a cell boundary does not pull in the next cell
    if last > first && origin + last as f64 * span >= max {
        last -= 1;
    }
    last
}

/// All cells of `length` whose interiors intersect `bounds`, ordered
/// south-to-north by row and west-to-east within a row.
pub fn cover_bbox(bounds: &CellBounds, length: usize) -> Result<Vec<GeohashId>> {
    check_length(length)?;
    let bounds = CellBounds::new(bounds.lat_min, bounds.lon_min, bounds.lat_max, bounds.lon_max)?;
    if bounds.lat_span() == 0.0 || bounds.lon_span() == 0.0 {
        return Ok(vec![encode(bounds.center(), length)?]);
    }
    let (lon_bits, lat_bits) = bit_split(length);
    let (lat_span, lon_span) = cell_spans(length)?;
    let lat_first = subdivide(bounds.lat_min, -90.0, 90.0, lat_bits);
    let lon_first = subdivide(bounds.lon_min, -180.0, 180.0, lon_bits);
    let lat_last = last_index(lat_first, bounds.lat_max, -90.0, lat_span, lat_bits, 90.0);
    let lon_last = last_index(lon_first, bounds.lon_max, -180.0, lon_span, lon_bits, 180.0);
    let mut cells = Vec::with_capacity(((lat_last - lat_first + 1) * (lon_last - lon_first + 1)) as usize);
    for lat in lat_first..=lat_last {
        for lon in lon_first..=lon_last {
            cells.push(GeohashId::from_indices(lon, lat, length)?);
        }
    }
    Ok(cells)
}

/// Number of cells [`cover_bbox`] would return, without materializing them.
pub fn cover_count(bounds: &CellBounds, length: usize) -> Result<u64> {
    check_length(length)?;
    let bounds = CellBounds::new(bounds.lat_min, bounds.lon_min, bounds.lat_max, bounds.lon_max)?;
    if bounds.lat_span() == 0.0 || bounds.lon_span() == 0.0 {
        return Ok(1);
    }
    let (lon_bits, lat_bits) = bit_split(length);
    let (lat_span, lon_span) = cell_spans(length)?;
    let lat_first = subdivide(bounds.lat_min, -90.0, 90.0, lat_bits);
    let lon_first = subdivide(bounds.lon_min, -180.0, 180.0, lon_bits);
    let lat_last = last_index(lat_first, bounds.lat_max, -90.0, lat_span, lat_bits, 90.0);
    let lon_last = last_index(lon_first, bounds.lon_max, -180.0, lon_span, lon_bits, 180.0);
    Ok((lat_last - lat_first + 1) * (lon_last - lon_first + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bit-by-bit oracle: builds the code from an explicit list of
    /// midpoint comparisons, alternating longitude and latitude.
    fn oracle_encode(lat: f64, lon: f64, length: usize) -> String {
        let (mut lat_lo, mut lat_hi) = (-90.0f64, 90.0f64);
        let (mut lon_lo, mut lon_hi) = (-180.0f64, 180.0f64);
        let mut bits = Vec::new();
        for i in 0..5 * length {
            if i % 2 == 0 {
                let mid = (lon_lo + lon_hi) / 2.0;
                if lon >= mid {
                    bits.push(1);
                    lon_lo = mid;
                } else {
                    bits.push(0);
                    lon_hi = mid;
                }
            } else {
                let mid = (lat_lo + lat_hi) / 2.0;
                if lat >= mid {
                    bits.push(1);
                    lat_lo = mid;
                } else {
                    bits.push(0);
                    lat_hi = mid;
                }
            }
        }
        bits.chunks(5)
            .map(|c| {
                let v = c.iter().fold(0usize, |acc, b| acc * 2 + b);
                "0123456789bcdefghjkmnpqrstuvwxyz".as_bytes()[v] as char
            })
            .collect()
    }

    fn gh(s: &str) -> GeohashId {
        GeohashId::parse(s).unwrap()
    }

    #[test]
    fn origin_encodes_to_s00000() {
        assert_eq!(oracle_encode(0.0, 0.0, 6), "s00000");
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        assert_eq!(encode(p, 6).unwrap().as_str(), "s00000");
    }

    #[test]
    fn thessaloniki_point_is_contained() {
        let p = GeoPoint::new(40.6401, 22.9444).unwrap();
        let g = encode(p, 6).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.as_str(), oracle_encode(p.lat, p.lon, 6));
        assert!(decode(&g).contains(p));
    }

    #[test]
    fn decode_origin_cell() {
        let b = decode(&gh("s00000"));
        assert_eq!(b.lat_min, 0.0);
        assert_eq!(b.lon_min, 0.0);
        let (lat_span, lon_span) = cell_spans(6).unwrap();
        assert_eq!(b.lat_span(), lat_span);
        assert_eq!(b.lon_span(), lon_span);
    }

    #[test]
    fn single_symbol_spans_45_degrees() {
        let b = decode(&gh("s"));
        assert_eq!(b.lat_span(), 45.0);
        assert_eq!(b.lon_span(), 45.0);
        assert_eq!((b.lat_min, b.lon_min), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_alphabet_and_lengths() {
        for bad in ["a00000", "", "s0000000000000", "S0", "i", "l", "o"] {
            assert!(matches!(GeohashId::parse(bad), Err(Error::InvalidGeohash { .. })), "{bad}");
        }
        assert!(decode_str("a1").is_err());
    }

    #[test]
    fn encode_rejects_bad_input() {
        let p = GeoPoint { lat: 91.0, lon: 0.0 };
        assert!(matches!(encode(p, 6), Err(Error::InvalidInput(_))));
        let p = GeoPoint::new(0.0, 0.0).unwrap();
        assert!(encode(p, 0).is_err());
        assert!(encode(p, 13).is_err());
        assert!(GeoPoint::new(0.0, 180.5).is_err());
    }

    #[test]
    fn global_maximum_resolves_to_last_cell() {
        let p = GeoPoint::new(90.0, 180.0).unwrap();
        let g = encode(p, 4).unwrap();
        assert_eq!(g.as_str(), "zzzz");
        assert!(decode(&g).contains(p));
    }

    #[test]
    fn dimensions_match_reported_cell_size() {
        let (w, h) = cell_dimensions(6, 40.64).unwrap();
        assert!((w - 930.0).abs() / 930.0 < 0.02, "width {w}");
        assert!((h - 610.0).abs() / 610.0 < 0.02, "height {h}");
        let area_km2 = w * h / 1e6;
        assert!((area_km2 - 0.57).abs() / 0.57 < 0.03, "area {area_km2}");
    }

    #[test]
    fn equator_width_is_exact() {
        for length in 1..=12 {
            let (w, _) = cell_dimensions(length, 0.0).unwrap();
            let lon_bits = (5 * length as u32).div_ceil(2);
            assert_eq!(w, 360.0 / 2f64.powi(lon_bits as i32) * METERS_PER_DEGREE);
        }
    }

    #[test]
    fn cover_exact_cell_returns_itself() {
        let g = gh("sx0r2k");
        assert_eq!(cover_bbox(&decode(&g), 6).unwrap(), vec![g]);
    }

    #[test]
    fn cover_two_by_two() {
        let g = decode(&gh("sx0r2k"));
        let (ls, os) = cell_spans(6).unwrap();
        let b = CellBounds::new(g.lat_min + ls / 2.0, g.lon_min + os / 2.0, g.lat_max + ls / 2.0, g.lon_max + os / 2.0)
            .unwrap();
        let cells = cover_bbox(&b, 6).unwrap();
        assert_eq!(cells.len(), 4);
        let mut dedup = cells.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 4);
        assert_eq!(cells[0].as_str(), "sx0r2k");
        // row-major: second entry is east of the first, third is north
        assert_eq!(decode(&cells[1]).lon_min, g.lon_max);
        assert_eq!(decode(&cells[2]).lat_min, g.lat_max);
        assert_eq!(cover_count(&b, 6).unwrap(), 4);
    }

    #[test]
    fn cover_three_by_three() {
        let g = decode(&gh("sx0r2k"));
        let (ls, os) = cell_spans(6).unwrap();
        let b = CellBounds::new(g.lat_min, g.lon_min, g.lat_min + 3.0 * ls, g.lon_min + 3.0 * os).unwrap();
        assert_eq!(cover_bbox(&b, 6).unwrap().len(), 9);
    }

    #[test]
    fn degenerate_box_is_single_cell() {
        let p = GeoPoint::new(40.64, 22.94).unwrap();
        let b = CellBounds::new(p.lat, p.lon, p.lat, p.lon).unwrap();
        assert_eq!(cover_bbox(&b, 6).unwrap(), vec![encode(p, 6).unwrap()]);
    }

    #[test]
    fn inverted_box_rejected() {
        assert!(CellBounds::new(41.0, 22.0, 40.0, 23.0).is_err());
    }

    #[test]
    fn indices_round_trip() {
        let g = gh("sx0r2kq");
        let (lon, lat) = g.indices();
        assert_eq!(GeohashId::from_indices(lon, lat, 7).unwrap(), g);
    }

    proptest! {
        #[test]
        fn encode_matches_oracle(lat in -90.0f64..=90.0, lon in -180.0f64..=180.0, length in 1usize..=12) {
            let g = encode(GeoPoint::new(lat, lon).unwrap(), length).unwrap();
            prop_assert_eq!(g.as_str(), oracle_encode(lat, lon, length));
        }

        #[test]
        fn round_trip_containment(lat in -90.0f64..=90.0, lon in -180.0f64..=180.0, length in 1usize..=8) {
            let p = GeoPoint::new(lat, lon).unwrap();
            let g = encode(p, length).unwrap();
            prop_assert!(decode(&g).contains(p));
            prop_assert_eq!(encode(decode(&g).center(), length).unwrap(), g);
        }

        #[test]
        fn prefixes_nest(lat in -90.0f64..=90.0, lon in -180.0f64..=180.0) {
            let g = encode(GeoPoint::new(lat, lon).unwrap(), 12).unwrap();
            for l in 1..12 {
                let parent = g.prefix(l).unwrap();
                prop_assert!(decode(&parent).contains_bounds(&decode(&g)));
                prop_assert_eq!(encode(GeoPoint::new(lat, lon).unwrap(), l).unwrap(), parent);
            }
        }

        #[test]
        fn cover_tiles_the_box(lat in 35.0f64..45.0, lon in 15.0f64..25.0, dl in 0.001f64..0.03, dn in 0.001f64..0.05) {
            let b = CellBounds::new(lat, lon, lat + dl, lon + dn).unwrap();
            let cells = cover_bbox(&b, 6).unwrap();
            prop_assert_eq!(cells.len() as u64, cover_count(&b, 6).unwrap());
            let (ls, os) = cell_spans(6).unwrap();
            let mut total = 0.0;
            for c in &cells {
                let cb = decode(c);
                // every returned cell overlaps the box with positive area
                let ih = cb.lat_max.min(b.lat_max) - cb.lat_min.max(b.lat_min);
                let iw = cb.lon_max.min(b.lon_max) - cb.lon_min.max(b.lon_min);
                prop_assert!(ih > 0.0 && iw > 0.0);
                total += ih * iw;
                prop_assert!((cb.lat_span() - ls).abs() < 1e-12 && (cb.lon_span() - os).abs() < 1e-12);
            }
            // intersections sum to the box area: no gaps, no overlaps
            let area = b.lat_span() * b.lon_span();
            prop_assert!((total - area).abs() <= 1e-9 * area.max(1e-12));
            let mut sorted = cells.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), cells.len());
        }
    }
}
