use std::collections::BTreeMap;

use super::{ActivityConfig, GpsFix};
use crate::error::{Error, Result};
use crate::geocode::{encode, GeohashId};

/// Modal cell of the fixes recorded inside the local night window.
/// Ties go to the lexicographically smallest code.
pub fn infer_residence(fixes: &[GpsFix], cfg: &ActivityConfig, length: usize) -> Result<GeohashId> {
    let mut votes: BTreeMap<GeohashId, usize> = BTreeMap::new();
    for fix in fixes.iter().filter(|f| cfg.in_night_window(f.t)) {
        *votes.entry(encode(fix.point, length)?).or_default() += 1;
    }
    // BTreeMap iterates in code order; keep the first maximum
    let mut best: Option<(GeohashId, usize)> = None;
    for (g, n) in votes {
        if best.as_ref().is_none_or(|(_, m)| n > *m) {
            best = Some((g, n));
        }
    }
    best.map(|(g, _)| g).ok_or(Error::NoNightData)
}
