use serde::{Deserialize, Serialize};

/// Parametric device-side cost of playback: CPU, power, heat, memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub base_cpu: f64,
    pub cpu_per_mbps: f64,
    pub prerender_cpu: f64,
    pub base_power: f64,
    pub power_per_mbps: f64,
    pub prerender_power: f64,
    pub base_temperature_c: f64,
    pub temperature_per_cpu: f64,
    pub base_mem: f64,
    pub mem_per_preloaded_item: f64,
    pub base_storage: f64,
    pub storage_per_gb: f64,
    pub max_fps: f64,
    /// CPU load above which frames start to drop.
    pub drop_threshold: f64,
}

impl Default for DeviceModel {
    fn default() -> Self {
        Self {
            base_cpu: 0.15,
            cpu_per_mbps: 0.05,
            prerender_cpu: 0.04,
            base_power: 1.0,
            power_per_mbps: 0.08,
            prerender_power: 0.05,
            base_temperature_c: 34.0,
            temperature_per_cpu: 8.0,
            base_mem: 0.30,
            mem_per_preloaded_item: 0.01,
            base_storage: 0.40,
            storage_per_gb: 0.02,
            max_fps: 30.0,
            drop_threshold: 0.85,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviceMetrics {
    pub cpu_pct: f64,
    pub power_avg: f64,
    pub temperature_c: f64,
    pub mem_pct: f64,
    pub frame_drop_rate: f64,
    pub fps: f64,
}

impl DeviceModel {
    /// Instantaneous device metrics while playing `bitrate_kbps` on a device
    /// with capability `device_score`.
    pub fn metrics(
        &self,
        bitrate_kbps: f64,
        device_score: f64,
        prerender: bool,
        preload_depth: usize,
    ) -> DeviceMetrics {
        let mbps = bitrate_kbps / 1000.0;
        let capability = device_score.max(0.05);
        let raw_cpu = self.base_cpu
            + self.cpu_per_mbps * mbps / capability
            + if prerender { self.prerender_cpu } else { 0.0 };
        let cpu_pct = raw_cpu.min(1.0);
        let frame_drop_rate = ((raw_cpu - self.drop_threshold) / 0.5).clamp(0.0, 1.0);
        DeviceMetrics {
            cpu_pct,
            power_avg: self.base_power
                + self.power_per_mbps * mbps
                + if prerender { self.prerender_power } else { 0.0 },
            temperature_c: self.base_temperature_c + self.temperature_per_cpu * cpu_pct,
            mem_pct: (self.base_mem + self.mem_per_preloaded_item * preload_depth as f64).min(1.0),
            frame_drop_rate,
            fps: self.max_fps * (1.0 - frame_drop_rate),
        }
    }

    pub fn storage_pct(&self, cached_bytes: f64) -> f64 {
        (self.base_storage + self.storage_per_gb * cached_bytes / 1e9).min(1.0)
    }
}
