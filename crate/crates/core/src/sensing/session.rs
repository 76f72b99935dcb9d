use serde::{Deserialize, Serialize};

use super::{ActivityConfig, SensorSample, MS_PER_MINUTE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSession {
    pub start: i64,
    pub end: i64,
    pub samples: Vec<SensorSample>,
}

impl RecordingSession {
    pub fn duration_ms(&self) -> i64 {
        self.end - self.start
    }

    pub fn duration_hours(&self) -> f64 {
        self.duration_ms() as f64 / 3_600_000.0
    }
}

/// Split a time-ordered stream into maximal runs with inter-sample gaps of at
/// most `gap_s`, dropping runs shorter than one minute.
pub fn segment_sessions(samples: &[SensorSample], cfg: &ActivityConfig) -> Vec<RecordingSession> {
    let gap_ms = i64::from(cfg.gap_s) * 1000;
    let mut sessions = Vec::new();
    let mut run_start = 0;
    for i in 1..=samples.len() {
        let split = i == samples.len() || samples[i].t - samples[i - 1].t > gap_ms;
        if split {
            let run = &samples[run_start..i];
            if let (Some(first), Some(last)) = (run.first(), run.last()) {
                if last.t - first.t >= MS_PER_MINUTE {
                    sessions.push(RecordingSession { start: first.t, end: last.t, samples: run.to_vec() });
                }
            }
            run_start = i;
        }
    }
    sessions
}
