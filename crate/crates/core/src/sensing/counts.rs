use super::{ActivityConfig, RecordingSession};
use crate::error::Result;
use crate::registry::{Named, Registry};

/// Reduces the magnitudes of one epoch window to an activity count.
pub trait ActivityCounter: Named + Send + Sync {
    fn window_counts(&self, magnitudes: &[f64], cfg: &ActivityConfig) -> f64;
}

/// Mean-removed magnitude deviation with a dead band:
/// `scale * mean(max(|m - mean(m)| - deadband, 0))`.
pub struct DeadbandCounter;

impl DeadbandCounter {
    pub const NAME: &'static str = "deadband";
}

impl Named for DeadbandCounter {
    fn name(&self) -> &'static str {
        Self::NAME
    }
}

impl ActivityCounter for DeadbandCounter {
    fn window_counts(&self, magnitudes: &[f64], cfg: &ActivityConfig) -> f64 {
        if magnitudes.is_empty() {
            return 0.0;
        }
        let n = magnitudes.len() as f64;
        let mean = magnitudes.iter().sum::<f64>() / n;
        let excess: f64 = magnitudes.iter().map(|m| ((m - mean).abs() - cfg.deadband_g).max(0.0)).sum();
        cfg.scale * excess / n
    }
}

pub static COUNTERS: Registry<dyn ActivityCounter> = Registry::new("activity counter", &[&DeadbandCounter]);

pub fn counter(name: &str) -> Result<&'static dyn ActivityCounter> {
    COUNTERS.get(name)
}

/// Counts for every wall-clock-aligned epoch window of the session that holds
/// at least `min_samples_per_min` samples, as `(window_start_ms, counts)`.
pub fn activity_counts_per_minute(session: &RecordingSession, cfg: &ActivityConfig) -> Result<Vec<(i64, f64)>> {
    let counter = counter(&cfg.counter)?;
    let epoch_ms = i64::from(cfg.epoch_s) * 1000;
    let offset = cfg.offset_ms();
    let mut out = Vec::new();
    let samples = &session.samples;
    let mut i = 0;
    let mut magnitudes = Vec::new();
    while i < samples.len() {
        let key = (samples[i].t + offset).div_euclid(epoch_ms);
        magnitudes.clear();
        while i < samples.len() && (samples[i].t + offset).div_euclid(epoch_ms) == key {
            magnitudes.push(samples[i].magnitude());
            i += 1;
        }
        if magnitudes.len() >= cfg.min_samples_per_min {
            out.push((key * epoch_ms - offset, counter.window_counts(&magnitudes, cfg)));
        }
    }
    Ok(out)
}
