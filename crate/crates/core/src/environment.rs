//! Points of interest and per-cell environmental attribute vectors.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::csvio::read_rows;
use crate::error::{Error, Result};
use crate::geocode::{encode, GeoPoint, GeohashId, MAX_LENGTH};

pub const POI_HEADER: [&str; 4] = ["id", "lat", "lon", "tag"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    AthleticsSports,
    FastFood,
    PublicPark,
    Cafe,
    Other,
}

impl Category {
    /// Position in [`EnvAttributes`], `None` for [`Category::Other`].
    pub fn attribute_index(self) -> Option<usize> {
        match self {
            Category::AthleticsSports => Some(0),
            Category::FastFood => Some(1),
            Category::PublicPark => Some(2),
            Category::Cafe => Some(3),
            Category::Other => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "AthleticsSports" => Category::AthleticsSports,
            "FastFood" => Category::FastFood,
            "PublicPark" => Category::PublicPark,
            "Cafe" => Category::Cafe,
            "Other" => Category::Other,
            _ => return Err(Error::InvalidInput(format!("unknown category {s:?}"))),
        })
    }
}

/// Source tag to category mapping, loaded from `tag=Category` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Taxonomy {
    map: HashMap<String, Category>,
}

impl Taxonomy {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (tag, cat) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i as u64 + 1, format!("expected tag=Category, got {line:?}")))?;
            let cat = cat.trim().parse().map_err(|e: Error| Error::parse(i as u64 + 1, e.to_string()))?;
            map.insert(tag.trim().to_string(), cat);
        }
        Ok(Taxonomy { map })
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Category)>) -> Self {
        Taxonomy { map: pairs.into_iter().map(|(t, c)| (t.to_string(), c)).collect() }
    }

    pub fn category(&self, tag: &str) -> Category {
        self.map.get(tag).copied().unwrap_or(Category::Other)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: String,
    pub point: GeoPoint,
    pub category: Category,
}

/// POI counts `(athletics_sports, fast_food, public_parks, cafes)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvAttributes {
    pub athletics: u32,
    pub fastfood: u32,
    pub parks: u32,
    pub cafes: u32,
}

impl EnvAttributes {
    pub const DIM: usize = 4;

    pub fn from_array(a: [u32; 4]) -> Self {
        EnvAttributes { athletics: a[0], fastfood: a[1], parks: a[2], cafes: a[3] }
    }

    pub fn to_array(self) -> [u32; 4] {
        [self.athletics, self.fastfood, self.parks, self.cafes]
    }

    fn bump(&mut self, category: Category) {
        match category {
            Category::AthleticsSports => self.athletics += 1,
            Category::FastFood => self.fastfood += 1,
            Category::PublicPark => self.parks += 1,
            Category::Cafe => self.cafes += 1,
            Category::Other => {}
        }
    }
}

impl std::ops::Add for EnvAttributes {
    type Output = EnvAttributes;
    fn add(self, o: EnvAttributes) -> EnvAttributes {
        EnvAttributes {
            athletics: self.athletics + o.athletics,
            fastfood: self.fastfood + o.fastfood,
            parks: self.parks + o.parks,
            cafes: self.cafes + o.cafes,
        }
    }
}

#[derive(Deserialize)]
struct PoiRow {
    id: String,
    lat: f64,
    lon: f64,
    tag: String,
}

pub fn ingest_pois(source: impl Read, taxonomy: &Taxonomy) -> Result<Vec<Poi>> {
    read_rows(source, &POI_HEADER, |row: PoiRow, line| {
        let point = GeoPoint::new(row.lat, row.lon).map_err(|e| Error::parse(line, e.to_string()))?;
        Ok(Poi { id: row.id, point, category: taxonomy.category(&row.tag) })
    })
}

/// Per-category counts of the POIs whose point encodes to `g`.
pub fn env_attributes(g: &GeohashId, pois: &[Poi]) -> EnvAttributes {
    let mut env = EnvAttributes::default();
    for p in pois {
        if p.category != Category::Other && encode(p.point, g.len()).is_ok_and(|c| c == *g) {
            env.bump(p.category);
        }
    }
    env
}

/// POIs keyed by their full-precision cell, for prefix range counting at any length.
#[derive(Debug, Clone, Default)]
pub struct PoiIndex {
    cells: Vec<(GeohashId, Category)>,
}

impl PoiIndex {
    pub fn new(pois: &[Poi]) -> Self {
        let mut cells: Vec<(GeohashId, Category)> = pois
            .iter()
            .filter(|p| p.category != Category::Other)
            .map(|p| (encode(p.point, MAX_LENGTH).expect("validated point"), p.category))
            .collect();
        cells.sort();
        PoiIndex { cells }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Same result as [`env_attributes`] over the indexed POIs.
    pub fn env(&self, g: &GeohashId) -> EnvAttributes {
        let start = self.cells.partition_point(|(c, _)| c.as_str() < g.as_str());
        let mut env = EnvAttributes::default();
        for (c, cat) in &self.cells[start..] {
            if !g.is_prefix_of(c) {
                break;
            }
            env.bump(*cat);
        }
        env
    }
}
