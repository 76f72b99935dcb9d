use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    activity_counts_per_minute, infer_residence, segment_sessions, ActivityConfig, GpsFix, RecordingSession,
    SensorSample, Streams,
};
use crate::error::{Error, Result};
use crate::geocode::GeohashId;

/// One participant after indicator extraction. Raw sessions are not kept;
/// only their summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualRecord {
    pub id: String,
    pub sessions: usize,
    pub active_minutes: usize,
    /// Mean activity counts per active minute; absent with no active minute.
    pub indicator: Option<f64>,
    pub active_hours: f64,
    pub active_days: u32,
    pub residence: Option<GeohashId>,
    pub eligible: bool,
}

/// Unweighted mean of per-minute counts over every active minute of every session.
pub fn indicator(sessions: &[RecordingSession], cfg: &ActivityConfig) -> Result<f64> {
    let mut total = 0.0;
    let mut minutes = 0usize;
    for s in sessions {
        for (_, c) in activity_counts_per_minute(s, cfg)? {
            total += c;
            minutes += 1;
        }
    }
    if minutes == 0 {
        return Err(Error::NoActiveData);
    }
    Ok(total / minutes as f64)
}

pub fn eligible(rec: &IndividualRecord, cfg: &ActivityConfig) -> bool {
    rec.active_hours > cfg.min_hours && rec.active_days >= cfg.min_days && rec.residence.is_some()
}

fn active_days(sessions: &[RecordingSession], cfg: &ActivityConfig) -> u32 {
    let mut days = BTreeSet::new();
    for s in sessions {
        days.extend(cfg.local_day(s.start)..=cfg.local_day(s.end));
    }
    days.len() as u32
}

pub fn extract_individual(
    id: &str,
    samples: &[SensorSample],
    fixes: &[GpsFix],
    cfg: &ActivityConfig,
    length: usize,
) -> Result<IndividualRecord> {
    let sessions = segment_sessions(samples, cfg);
    let mut total = 0.0;
    let mut minutes = 0usize;
    for s in &sessions {
        for (_, c) in activity_counts_per_minute(s, cfg)? {
            total += c;
            minutes += 1;
        }
    }
    let residence = match infer_residence(fixes, cfg, length) {
        Ok(g) => Some(g),
        Err(Error::NoNightData) => None,
        Err(e) => return Err(e),
    };
    let mut rec = IndividualRecord {
        id: id.to_string(),
        sessions: sessions.len(),
        active_minutes: minutes,
        indicator: (minutes > 0).then(|| total / minutes as f64),
        active_hours: sessions.iter().map(RecordingSession::duration_hours).sum(),
        active_days: active_days(&sessions, cfg),
        residence,
        eligible: false,
    };
    rec.eligible = eligible(&rec, cfg) && rec.indicator.is_some();
    Ok(rec)
}

/// Extract every individual present in either stream, in id order.
/// Individuals are processed in parallel; output equals sequential processing.
pub fn extract_all(
    accel: &Streams<SensorSample>,
    gps: &Streams<GpsFix>,
    cfg: &ActivityConfig,
    length: usize,
) -> Result<Vec<IndividualRecord>> {
    cfg.validate()?;
    let ids: BTreeSet<&String> = accel.keys().chain(gps.keys()).collect();
    let ids: Vec<&String> = ids.into_iter().collect();
    ids.par_iter()
        .map(|id| {
            let samples = accel.get(*id).map(Vec::as_slice).unwrap_or(&[]);
            let fixes = gps.get(*id).map(Vec::as_slice).unwrap_or(&[]);
            extract_individual(id, samples, fixes, cfg, length)
        })
        .collect()
}
