use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifies one field of a [`QoPVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QopMetric {
    FirstFeedMs,
    FirstFrameMs,
    RebufferRatio,
    RebufferDurPerVvMs,
    FrameDropRate,
    AnrCrashRate,
    PowerAvg,
    StoragePct,
    CpuPct,
    MemPct,
    OomRate,
    Fps,
    TrafficBytes,
    TemperatureC,
    PublishSuccessRatio,
    VideoQuality,
}

impl QopMetric {
    pub const ALL: [QopMetric; 16] = [
        QopMetric::FirstFeedMs,
        QopMetric::FirstFrameMs,
        QopMetric::RebufferRatio,
        QopMetric::RebufferDurPerVvMs,
        QopMetric::FrameDropRate,
        QopMetric::AnrCrashRate,
        QopMetric::PowerAvg,
        QopMetric::StoragePct,
        QopMetric::CpuPct,
        QopMetric::MemPct,
        QopMetric::OomRate,
        QopMetric::Fps,
        QopMetric::TrafficBytes,
        QopMetric::TemperatureC,
        QopMetric::PublishSuccessRatio,
        QopMetric::VideoQuality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QopMetric::FirstFeedMs => "first_feed_ms",
            QopMetric::FirstFrameMs => "first_frame_ms",
            QopMetric::RebufferRatio => "rebuffer_ratio",
            QopMetric::RebufferDurPerVvMs => "rebuffer_dur_per_vv_ms",
            QopMetric::FrameDropRate => "frame_drop_rate",
            QopMetric::AnrCrashRate => "anr_crash_rate",
            QopMetric::PowerAvg => "power_avg",
            QopMetric::StoragePct => "storage_pct",
            QopMetric::CpuPct => "cpu_pct",
            QopMetric::MemPct => "mem_pct",
            QopMetric::OomRate => "oom_rate",
            QopMetric::Fps => "fps",
            QopMetric::TrafficBytes => "traffic_bytes",
            QopMetric::TemperatureC => "temperature_c",
            QopMetric::PublishSuccessRatio => "publish_success_ratio",
            QopMetric::VideoQuality => "video_quality",
        }
    }

    /// Fraction-valued metrics must stay in `[0, 1]`.
    pub fn is_fraction(self) -> bool {
        matches!(
            self,
            QopMetric::RebufferRatio
                | QopMetric::FrameDropRate
                | QopMetric::AnrCrashRate
                | QopMetric::StoragePct
                | QopMetric::CpuPct
                | QopMetric::MemPct
                | QopMetric::OomRate
                | QopMetric::PublishSuccessRatio
        )
    }
}

/// Multi-metric performance-experience record.
///
/// `video_quality` is the playtime-weighted quality score (0..100) of the
/// renditions actually played. It is not part of the published impact table,
/// so its coefficient defaults to "not available" and must be configured.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QoPVector {
    pub first_feed_ms: f64,
    pub first_frame_ms: f64,
    pub rebuffer_ratio: f64,
    pub rebuffer_dur_per_vv_ms: f64,
    pub frame_drop_rate: f64,
    pub anr_crash_rate: f64,
    pub power_avg: f64,
    pub storage_pct: f64,
    pub cpu_pct: f64,
    pub mem_pct: f64,
    pub oom_rate: f64,
    pub fps: f64,
    pub traffic_bytes: f64,
    pub temperature_c: f64,
    pub publish_success_ratio: f64,
    #[serde(default)]
    pub video_quality: f64,
}

impl QoPVector {
    pub fn get(&self, m: QopMetric) -> f64 {
        match m {
            QopMetric::FirstFeedMs => self.first_feed_ms,
            QopMetric::FirstFrameMs => self.first_frame_ms,
            QopMetric::RebufferRatio => self.rebuffer_ratio,
            QopMetric::RebufferDurPerVvMs => self.rebuffer_dur_per_vv_ms,
            QopMetric::FrameDropRate => self.frame_drop_rate,
            QopMetric::AnrCrashRate => self.anr_crash_rate,
            QopMetric::PowerAvg => self.power_avg,
            QopMetric::StoragePct => self.storage_pct,
            QopMetric::CpuPct => self.cpu_pct,
            QopMetric::MemPct => self.mem_pct,
            QopMetric::OomRate => self.oom_rate,
            QopMetric::Fps => self.fps,
            QopMetric::TrafficBytes => self.traffic_bytes,
            QopMetric::TemperatureC => self.temperature_c,
            QopMetric::PublishSuccessRatio => self.publish_success_ratio,
            QopMetric::VideoQuality => self.video_quality,
        }
    }

    pub fn set(&mut self, m: QopMetric, v: f64) {
        let slot = match m {
            QopMetric::FirstFeedMs => &mut self.first_feed_ms,
            QopMetric::FirstFrameMs => &mut self.first_frame_ms,
            QopMetric::RebufferRatio => &mut self.rebuffer_ratio,
            QopMetric::RebufferDurPerVvMs => &mut self.rebuffer_dur_per_vv_ms,
            QopMetric::FrameDropRate => &mut self.frame_drop_rate,
            QopMetric::AnrCrashRate => &mut self.anr_crash_rate,
            QopMetric::PowerAvg => &mut self.power_avg,
            QopMetric::StoragePct => &mut self.storage_pct,
            QopMetric::CpuPct => &mut self.cpu_pct,
            QopMetric::MemPct => &mut self.mem_pct,
            QopMetric::OomRate => &mut self.oom_rate,
            QopMetric::Fps => &mut self.fps,
            QopMetric::TrafficBytes => &mut self.traffic_bytes,
            QopMetric::TemperatureC => &mut self.temperature_c,
            QopMetric::PublishSuccessRatio => &mut self.publish_success_ratio,
            QopMetric::VideoQuality => &mut self.video_quality,
        };
        *slot = v;
    }

    pub fn with(mut self, m: QopMetric, v: f64) -> Self {
        self.set(m, v);
        self
    }

    /// Checks fractions in `[0,1]` and every other field nonnegative.
    pub fn validate(&self) -> Result<()> {
        for m in QopMetric::ALL {
            let v = self.get(m);
            if !v.is_finite() {
                return Err(Error::input(format!("{} is not finite", m.name())));
            }
            if m.is_fraction() && !(0.0..=1.0).contains(&v) {
                return Err(Error::input(format!("{} = {v} outside [0,1]", m.name())));
            }
            if m != QopMetric::TemperatureC && v < 0.0 {
                return Err(Error::input(format!("{} = {v} is negative", m.name())));
            }
        }
        Ok(())
    }
}
