//! Seeded synthetic cohorts for desk-scale end-to-end runs.
//!
//! Cells are drawn from two POI regimes (busy and quiet) on a grid around a
//! city center. Each cell's planted behavioral attribute is
//! `base_rate + weights · counts + N(0, noise_sd)`, and every resident's raw
//! accelerometer stream is constructed so that the deadband counter recovers
//! the resident's indicator exactly (up to CSV rounding).

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{label, Label};
use crate::environment::{Category, EnvAttributes};
use crate::error::{Error, Result};
use crate::geocode::{cell_spans, decode, encode, CellBounds, GeoPoint, GeohashId};
use crate::rng::derive_seed;
use crate::sensing::{ActivityConfig, MS_PER_DAY, MS_PER_MINUTE};

const STREAM_ENV: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_SENSOR: u64 = 3;

/// 2019-10-07T00:00:00Z.
const BASE_UTC_MS: i64 = 1_570_406_400_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_geohashes: usize,
    pub residents_per_cell: usize,
    /// Counts/min added per POI of each category.
    pub effect_weights: [f64; 4],
    pub noise_sd: f64,
    pub base_rate: f64,
    /// Fraction of resident cells drawn from the busy regime.
    pub busy_share: f64,
    pub sample_period_s: u32,
    pub days: u32,
    pub hours_per_day: u32,
    pub timezone_offset: i32,
    pub center: GeoPoint,
    pub length: usize,
    /// Individuals who fail selection (too few days), added for realism.
    pub ineligible_individuals: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 7,
            n_geohashes: 42,
            residents_per_cell: 2,
            effect_weights: [35.0, 12.0, 28.0, 9.0],
            noise_sd: 0.0,
            base_rate: 100.0,
            busy_share: 0.43,
            sample_period_s: 30,
            days: 3,
            hours_per_day: 7,
            timezone_offset: 120,
            center: GeoPoint { lat: 40.6401, lon: 22.9444 },
            length: 6,
            ineligible_individuals: 6,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n_geohashes < 4 {
            return bad("n_geohashes must be at least 4");
        }
        if self.residents_per_cell == 0 {
            return bad("residents_per_cell must be at least 1");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and nonnegative");
        }
        if self.effect_weights.iter().any(|w| !w.is_finite()) || !self.base_rate.is_finite() {
            return bad("weights and base rate must be finite");
        }
        if !(0.0..=1.0).contains(&self.busy_share) {
            return bad("busy_share must be in [0, 1]");
        }
        let p = self.sample_period_s;
        if p == 0 || 60 % p != 0 || !(60 / p).is_multiple_of(2) {
            return bad("sample_period_s must divide 60 into an even number of samples");
        }
        if self.days == 0 || self.hours_per_day == 0 || self.hours_per_day > 12 {
            return bad("days must be positive and hours_per_day in 1..=12");
        }
        GeoPoint::new(self.center.lat, self.center.lon)?;
        cell_spans(self.length)?;
        Ok(())
    }

    /// Activity settings matching the generated sampling rate.
    pub fn activity_config(&self) -> ActivityConfig {
        ActivityConfig {
            min_samples_per_min: (60 / self.sample_period_s) as usize,
            timezone_offset: self.timezone_offset,
            ..ActivityConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthProfile {
    pub geohash: GeohashId,
    pub env: EnvAttributes,
    /// `weights · counts`, without base rate or noise.
    pub effect: f64,
    pub behavioral_attribute: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub accel_csv: String,
    pub gps_csv: String,
    pub poi_csv: String,
    pub taxonomy: String,
    pub truth: Vec<TruthProfile>,
    /// Bounding box of the generated region.
    pub region: CellBounds,
    pub activity: ActivityConfig,
}

impl SynthCohort {
    /// `max(effect) - min(effect)` over resident cells.
    pub fn effect_range(&self) -> f64 {
        let (lo, hi) = self
            .truth
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t.effect), hi.max(t.effect)));
        hi - lo
    }

    pub fn truth_csv(&self) -> String {
        let mut s = String::from("geohash,athletics,fastfood,parks,cafes,effect,attr,label\n");
        for t in &self.truth {
            let e = t.env.to_array();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                t.geohash,
                e[0],
                e[1],
                e[2],
                e[3],
                t.effect,
                t.behavioral_attribute,
                t.label.code()
            );
        }
        s
    }
}

const TAGS: [(Category, &[&str]); 5] = [
    (Category::AthleticsSports, &["sports_centre", "stadium", "pitch", "fitness_centre"]),
    (Category::FastFood, &["fast_food"]),
    (Category::PublicPark, &["park"]),
    (Category::Cafe, &["cafe"]),
    (Category::Other, &["pharmacy", "school", "bank"]),
];

pub const SYNTH_TAXONOMY: &str = "\
# tag=Category
sports_centre=AthleticsSports
stadium=AthleticsSports
pitch=AthleticsSports
fitness_centre=AthleticsSports
fast_food=FastFood
park=PublicPark
cafe=Cafe
pharmacy=Other
school=Other
";

/// Inclusive count ranges per category for busy and quiet cells.
const BUSY: [(u32, u32); 4] = [(4, 9), (2, 6), (3, 7), (3, 8)];
const QUIET: [(u32, u32); 4] = [(0, 2), (0, 3), (0, 2), (0, 3)];

fn draw_env(rng: &mut ChaCha8Rng, busy: bool) -> EnvAttributes {
    let ranges = if busy { BUSY } else { QUIET };
    EnvAttributes::from_array(ranges.map(|(lo, hi)| rng.random_range(lo..=hi)))
}

fn point_in(rng: &mut ChaCha8Rng, b: &CellBounds) -> GeoPoint {
    GeoPoint {
        lat: b.lat_min + rng.random_range(0.05..0.95) * b.lat_span(),
        lon: b.lon_min + rng.random_range(0.05..0.95) * b.lon_span(),
    }
}

struct Resident {
    id: String,
    home: GeohashId,
    indicator: f64,
    days: u32,
    night_fixes: bool,
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthCohort> {
    spec.validate()?;
    let mut env_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_ENV, 0));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_NOISE, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_SENSOR, 0));

    // square grid of cells around the center, about 2.5x the resident cells
    let side = ((spec.n_geohashes as f64 * 2.5).sqrt().ceil() as u64).max(3);
    let (lon_c, lat_c) = encode(spec.center, spec.length)?.indices();
    let (lon0, lat0) = (lon_c.saturating_sub(side / 2), lat_c.saturating_sub(side / 2));
    let mut grid = Vec::new();
    for lat in lat0..lat0 + side {
        for lon in lon0..lon0 + side {
            grid.push(GeohashId::from_indices(lon, lat, spec.length)?);
        }
    }
    let region = {
        let sw = decode(&grid[0]);
        let ne = decode(grid.last().expect("nonempty grid"));
        CellBounds::new(sw.lat_min, sw.lon_min, ne.lat_max, ne.lon_max)?
    };

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.shuffle(&mut env_rng);
    let resident_cells: Vec<usize> = order[..spec.n_geohashes].to_vec();
    let n_busy = (spec.busy_share * spec.n_geohashes as f64).round() as usize;

    // environment for every grid cell; resident cells get the planted regimes
    let mut envs = vec![EnvAttributes::default(); grid.len()];
    for (rank, &cell) in resident_cells.iter().enumerate() {
        envs[cell] = draw_env(&mut env_rng, rank < n_busy);
    }
    for &cell in &order[spec.n_geohashes..] {
        let busy = env_rng.random_bool(spec.busy_share);
        envs[cell] = draw_env(&mut env_rng, busy);
    }

    // planted attributes
    let mut truth: Vec<TruthProfile> = resident_cells
        .iter()
        .map(|&cell| {
            let env = envs[cell];
            let effect: f64 = env.to_array().iter().zip(spec.effect_weights).map(|(&c, w)| f64::from(c) * w).sum();
            let z: f64 = noise_rng.sample(StandardNormal);
            let attr = (spec.base_rate + effect + spec.noise_sd * z).max(5.0);
            TruthProfile { geohash: grid[cell].clone(), env, effect, behavioral_attribute: attr, label: Label::Low }
        })
        .collect();
    truth.sort_by(|a, b| a.geohash.cmp(&b.geohash));
    let mean = truth.iter().map(|t| t.behavioral_attribute).sum::<f64>() / truth.len() as f64;
    for t in &mut truth {
        t.label = label(t.behavioral_attribute, mean);
    }

    // POIs
    let mut poi_csv = String::from("id,lat,lon,tag\n");
    let mut poi_id = 0usize;
    for (cell, env) in grid.iter().zip(&envs) {
        let b = decode(cell);
        let others = rng.random_range(0..=2u32);
        let counts = env.to_array();
        for (k, (_, tags)) in TAGS.iter().enumerate() {
            let n = if k < 4 { counts[k] } else { others };
            for _ in 0..n {
                let p = point_in(&mut rng, &b);
                let tag = tags[rng.random_range(0..tags.len())];
                poi_id += 1;
                let _ = writeln!(poi_csv, "poi{poi_id:05},{:.6},{:.6},{tag}", p.lat, p.lon);
            }
        }
    }

    // residents: indicators spread symmetrically around the cell attribute
    let mut residents = Vec::new();
    for t in &truth {
        let r = spec.residents_per_cell;
        let spread = 0.12 * t.behavioral_attribute.min(400.0);
        let mut devs = vec![0.0; r];
        for j in 0..r / 2 {
            let d = rng.random_range(0.0..spread.max(1e-9));
            devs[2 * j] = d;
            devs[2 * j + 1] = -d;
        }
        for (j, d) in devs.into_iter().enumerate() {
            residents.push(Resident {
                id: format!("p{}-{j}", t.geohash),
                home: t.geohash.clone(),
                indicator: t.behavioral_attribute + d,
                days: spec.days,
                night_fixes: true,
            });
        }
    }
    for k in 0..spec.ineligible_individuals {
        let home = grid[rng.random_range(0..grid.len())].clone();
        residents.push(Resident {
            id: format!("x{k:03}"),
            home,
            indicator: rng.random_range(100.0..600.0),
            // alternately too few days or no residence signal
            days: if k % 2 == 0 { 1 } else { spec.days },
            night_fixes: k % 2 == 0,
        });
    }
    residents.sort_by(|a, b| a.id.cmp(&b.id));

    let cfg = spec.activity_config();
    let mut accel_csv = String::from("individual_id,t_ms,ax_g,ay_g,az_g\n");
    let mut gps_csv = String::from("individual_id,t_ms,lat,lon,accuracy_m\n");
    let offset_ms = i64::from(spec.timezone_offset) * MS_PER_MINUTE;
    let period_ms = i64::from(spec.sample_period_s) * 1000;
    let per_minute = 60 / spec.sample_period_s as usize;
    let session_minutes = i64::from(spec.hours_per_day) * 60;
    for res in &residents {
        let amp = res.indicator / cfg.scale + cfg.deadband_g;
        // minute-to-minute variation that cancels over each pair of minutes
        let wobble = 0.2 * (amp - cfg.deadband_g);
        let home = decode(&res.home);
        for day in 0..i64::from(res.days) {
            let local_midnight = BASE_UTC_MS + day * MS_PER_DAY - offset_ms;
            let start = local_midnight + (9 * 60 + rng.random_range(0..60)) * MS_PER_MINUTE;
            let (theta, phi) =
                (rng.random_range(0.0..std::f64::consts::PI), rng.random_range(0.0..std::f64::consts::TAU));
            let axis = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            for minute in 0..=session_minutes {
                let a = if minute % 2 == 0 { amp + wobble } else { amp - wobble };
                let base = 1.0f64.max(a + 0.2);
                for k in 0..per_minute {
                    let t = start + minute * MS_PER_MINUTE + k as i64 * period_ms;
                    if minute == session_minutes && k > 0 {
                        break;
                    }
                    let m = if k % 2 == 0 { base - a } else { base + a };
                    let _ =
                        writeln!(accel_csv, "{},{t},{:.6},{:.6},{:.6}", res.id, m * axis[0], m * axis[1], m * axis[2]);
                }
            }
            // daytime fixes somewhere in the region
            for h in 0..i64::from(spec.hours_per_day) {
                let cell = decode(&grid[rng.random_range(0..grid.len())]);
                let p = point_in(&mut rng, &cell);
                let acc = rng.random_range(5.0..40.0);
                let _ = writeln!(
                    gps_csv,
                    "{},{},{:.6},{:.6},{acc:.1}",
                    res.id,
                    start + h * 3_600_000 + 1_800_000,
                    p.lat,
                    p.lon
                );
            }
            if res.night_fixes {
                // 23:30, 01:00, 02:30, 04:00, 05:30 local
                for (i, minutes) in [23 * 60 + 30, 25 * 60, 26 * 60 + 30, 28 * 60, 29 * 60 + 30].into_iter().enumerate()
                {
                    let away = day == 1 && i == 0;
                    let cell = if away { decode(&grid[rng.random_range(0..grid.len())]) } else { home };
                    let p = point_in(&mut rng, &cell);
                    let acc = rng.random_range(5.0..25.0);
                    let _ = writeln!(
                        gps_csv,
                        "{},{},{:.6},{:.6},{acc:.1}",
                        res.id,
                        local_midnight + minutes * MS_PER_MINUTE,
                        p.lat,
                        p.lon
                    );
                }
            }
        }
    }

    Ok(SynthCohort { accel_csv, gps_csv, poi_csv, taxonomy: SYNTH_TAXONOMY.to_string(), truth, region, activity: cfg })
}
