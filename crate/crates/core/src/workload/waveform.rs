//! Diurnal bandwidth waveforms with multiplicative noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::cdn::{BandwidthWaveform, VendorCapacity};
use crate::error::{Error, Result};

/// Gaussian bump on the 24 h circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiurnalPeak {
    pub hour: f64,
    pub width_h: f64,
    pub amplitude_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiurnalShape {
    pub base_mbps: f64,
    #[serde(default)]
    pub peaks: Vec<DiurnalPeak>,
}

impl DiurnalShape {
    pub fn flat(mbps: f64) -> Self {
        Self { base_mbps: mbps, peaks: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_mbps >= 0.0 && self.base_mbps.is_finite()) {
            return Err(Error::param("waveform base must be finite and >= 0"));
        }
        for p in &self.peaks {
            if !(p.width_h > 0.0) || !(p.amplitude_mbps >= 0.0) || !(0.0..24.0).contains(&p.hour) {
                return Err(Error::param("peaks need hour in [0,24), width > 0, amplitude >= 0"));
            }
        }
        Ok(())
    }

    pub fn at_hour(&self, h: f64) -> f64 {
        self.base_mbps
            + self
                .peaks
                .iter()
                .map(|p| {
                    let d = (h - p.hour).rem_euclid(24.0);
                    let d = d.min(24.0 - d);
                    p.amplitude_mbps * (-(d / p.width_h).powi(2)).exp()
                })
                .sum::<f64>()
    }

    /// Noise-free values of one day, sampled at slot starts.
    pub fn day(&self, slots_per_day: usize) -> Vec<f64> {
        (0..slots_per_day)
            .map(|s| self.at_hour(s as f64 * 24.0 / slots_per_day as f64))
            .collect()
    }
}

/// Lognormal mean-one factors: one per slot and one per day.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WaveformNoise {
    pub slot_sigma: f64,
    pub day_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformSpec {
    pub days: usize,
    pub slots_per_day: usize,
    pub shape: DiurnalShape,
    #[serde(default)]
    pub noise: WaveformNoise,
}

impl Default for WaveformSpec {
    fn default() -> Self {
        Self::shipped_month()
    }
}

impl WaveformSpec {
    /// A month of 5-minute slots with a narrow evening peak.
    pub fn shipped_month() -> Self {
        Self {
            days: 30,
            slots_per_day: 288,
            shape: DiurnalShape {
                base_mbps: 150.0,
                peaks: vec![
                    DiurnalPeak { hour: 13.0, width_h: 2.0, amplitude_mbps: 100.0 },
                    DiurnalPeak { hour: 21.0, width_h: 0.6, amplitude_mbps: 900.0 },
                ],
            },
            noise: WaveformNoise { slot_sigma: 0.03, day_sigma: 0.04 },
        }
    }

    pub fn generate(&self, seed: u64) -> Result<BandwidthWaveform> {
        generate_waveform(self.days, self.slots_per_day, &self.shape, &self.noise, seed)
    }
}

/// Two equal vendors able to carry the shipped month's peak on their own.
pub fn shipped_vendors() -> Vec<VendorCapacity> {
    vec![
        VendorCapacity { id: "vendor-a".into(), capacity_mbps: 1400.0 },
        VendorCapacity { id: "vendor-b".into(), capacity_mbps: 1400.0 },
    ]
}

fn mean_one(sigma: f64) -> Result<Option<LogNormal<f64>>> {
    if sigma == 0.0 {
        return Ok(None);
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param("noise sigma must be finite and >= 0"));
    }
    LogNormal::new(-0.5 * sigma * sigma, sigma)
        .map(Some)
        .map_err(|e| Error::param(e.to_string()))
}

/// The daily shape repeated `days` times, each slot scaled by its day factor
/// and its own factor. Zero noise repeats the day exactly.
pub fn generate_waveform(
    days: usize,
    slots_per_day: usize,
    shape: &DiurnalShape,
    noise: &WaveformNoise,
    seed: u64,
) -> Result<BandwidthWaveform> {
    shape.validate()?;
    if days == 0 || slots_per_day == 0 || 1440 % slots_per_day != 0 {
        return Err(Error::param("need days > 0 and slots_per_day dividing 1440"));
    }
    let slot_noise = mean_one(noise.slot_sigma)?;
    let day_noise = mean_one(noise.day_sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let day = shape.day(slots_per_day);
    let mut mbps = Vec::with_capacity(days * slots_per_day);
    for _ in 0..days {
        let f = day_noise.map_or(1.0, |d| d.sample(&mut rng));
        for v in &day {
            let g = slot_noise.map_or(1.0, |d| d.sample(&mut rng));
            mbps.push(v * f * g);
        }
    }
    BandwidthWaveform::new((1440 / slots_per_day) as u32, slots_per_day, mbps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdn::{stagger_peaks, ShiftMode};

    #[test]
    fn zero_noise_repeats_exactly() {
        let s = WaveformSpec::shipped_month();
        let w = generate_waveform(3, 288, &s.shape, &WaveformNoise::default(), 1).unwrap();
        assert_eq!(w.mbps[..288], w.mbps[288..576]);
        assert_eq!(w.mbps[..288], w.mbps[576..]);
    }

    #[test]
    fn flat_shape_is_constant() {
        let w = generate_waveform(2, 24, &DiurnalShape::flat(42.0), &WaveformNoise::default(), 0).unwrap();
        assert!(w.mbps.iter().all(|v| *v == 42.0));
    }

    #[test]
    fn valley_to_peak_within_noise_bounds() {
        let s = WaveformSpec::shipped_month();
        let day = s.shape.day(s.slots_per_day);
        let want = day.iter().copied().fold(f64::INFINITY, f64::min) / day.iter().copied().fold(0.0, f64::max);
        let w = s.generate(7).unwrap();
        let n = s.slots_per_day;
        // per-slot mean over the month removes most of the noise
        let mean: Vec<f64> = (0..n)
            .map(|k| (0..s.days).map(|d| w.mbps[d * n + k]).sum::<f64>() / s.days as f64)
            .collect();
        let got = mean.iter().copied().fold(f64::INFINITY, f64::min) / mean.iter().copied().fold(0.0, f64::max);
        // day and slot factors each move the ratio by a few sigma / sqrt(days)
        let bound = 4.0 * (s.noise.slot_sigma + s.noise.day_sigma) / (s.days as f64).sqrt() * 2.0;
        assert!((got / want - 1.0).abs() < bound, "{got} vs {want}");
        assert!(w.mbps.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let s = WaveformSpec::shipped_month();
        assert_eq!(s.generate(3).unwrap(), s.generate(3).unwrap());
        assert_ne!(s.generate(3).unwrap(), s.generate(4).unwrap());
    }

    #[test]
    fn bad_dimensions() {
        let shape = DiurnalShape::flat(1.0);
        assert!(generate_waveform(0, 24, &shape, &WaveformNoise::default(), 0).is_err());
        assert!(generate_waveform(1, 7, &shape, &WaveformNoise::default(), 0).is_err());
    }

    #[test]
    fn shipped_month_staggers_across_days() {
        let w = WaveformSpec::shipped_month().generate(0).unwrap();
        let r = stagger_peaks(&w, &shipped_vendors(), ShiftMode::CrossDayShift).unwrap();
        assert!(r.baseline_srr.abs() < 1e-12);
        assert!(r.srr >= 0.10, "{}", r.srr);
    }
}
