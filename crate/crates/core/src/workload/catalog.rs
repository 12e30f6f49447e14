//! Synthetic catalog: Zipf popularity calibrated to a head-mass target,
//! duration classes with their ladders, and geometric per-item watch time.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::playback::{Item, LadderGroup, PlaytimeDist};

/// Below this many items the head fraction holds fewer than ten items and
/// the calibration is not meaningful.
pub const MIN_CALIBRATED_ITEMS: usize = 1000;

/// Exponent used when calibration is skipped.
pub const FALLBACK_EXPONENT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationClass {
    pub name: String,
    pub weight: f64,
    pub min_s: f64,
    pub max_s: f64,
    /// Range of the mean watched fraction, drawn per item.
    pub watch_fraction: (f64, f64),
    /// `(bitrate_kbps, quality)` rungs of the class ladder.
    pub rungs: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CatalogSpec {
    pub items: usize,
    /// Fixed exponent; `None` solves for `head_mass_target`.
    #[serde(default)]
    pub zipf_exponent: Option<f64>,
    pub head_fraction: f64,
    pub head_mass_target: f64,
    pub durations: Vec<DurationClass>,
}

impl Default for CatalogSpec {
    fn default() -> Self {
        let rungs = |v: &[(f64, f64)]| v.to_vec();
        Self {
            items: 100_000,
            zipf_exponent: None,
            head_fraction: 0.01,
            head_mass_target: 0.70,
            durations: vec![
                DurationClass {
                    name: "short".into(),
                    weight: 0.6,
                    min_s: 8.0,
                    max_s: 30.0,
                    watch_fraction: (0.5, 0.9),
                    rungs: rungs(&[(600.0, 55.0), (1200.0, 70.0), (2400.0, 82.0)]),
                },
                DurationClass {
                    name: "medium".into(),
                    weight: 0.3,
                    min_s: 30.0,
                    max_s: 120.0,
                    watch_fraction: (0.3, 0.7),
                    rungs: rungs(&[(600.0, 55.0), (1200.0, 70.0), (2400.0, 82.0), (4000.0, 90.0)]),
                },
                DurationClass {
                    name: "long".into(),
                    weight: 0.1,
                    min_s: 120.0,
                    max_s: 600.0,
                    watch_fraction: (0.1, 0.4),
                    rungs: rungs(&[(800.0, 58.0), (1600.0, 73.0), (3000.0, 85.0), (5000.0, 92.0)]),
                },
            ],
        }
    }
}

impl CatalogSpec {
    pub fn validate(&self) -> Result<()> {
        if self.items == 0 {
            return Err(Error::param("catalog needs at least one item"));
        }
        if matches!(self.zipf_exponent, Some(s) if !(s >= 0.0 && s.is_finite())) {
            return Err(Error::param("zipf exponent must be finite and >= 0"));
        }
        if !(self.head_fraction > 0.0 && self.head_fraction < 1.0) {
            return Err(Error::param("head_fraction must be in (0,1)"));
        }
        if !(self.head_mass_target > 0.0 && self.head_mass_target < 1.0) {
            return Err(Error::param("head_mass_target must be in (0,1)"));
        }
        if self.durations.is_empty() {
            return Err(Error::param("catalog needs at least one duration class"));
        }
        let total: f64 = self.durations.iter().map(|d| d.weight).sum();
        if self.durations.iter().any(|d| !(d.weight >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::param("duration class weights must be >= 0 and sum to 1"));
        }
        for d in &self.durations {
            if !(d.min_s > 0.0 && d.max_s >= d.min_s) {
                return Err(Error::param(format!("duration class {} has a bad range", d.name)));
            }
            let (lo, hi) = d.watch_fraction;
            if !(lo > 0.0 && hi >= lo && hi <= 1.0) {
                return Err(Error::param(format!("duration class {} has a bad watch fraction", d.name)));
            }
            LadderGroup::from_rungs(&d.rungs, d.min_s)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub items: Vec<Item>,
    /// Watch-time distribution per item, same order as `items`.
    pub playtime: Vec<PlaytimeDist>,
    pub duration_class: Vec<usize>,
    pub exponent: f64,
    pub calibrated: bool,
    /// Share of requests going to the top `head_fraction` of items.
    pub head_mass: f64,
}

/// Mass of the `k` most popular of `n` Zipf(`s`) items.
pub fn zipf_head_mass(n: usize, k: usize, s: f64) -> f64 {
    let mut head = 0.0;
    let mut total = 0.0;
    for r in 1..=n {
        let w = (r as f64).powf(-s);
        total += w;
        if r <= k {
            head += w;
        }
    }
    head / total
}

fn head_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n)
}

/// Exponent giving the top `fraction` of `n` items the `target` share of
/// requests; `None` when the catalog is too small to calibrate.
pub fn solve_zipf_exponent(n: usize, fraction: f64, target: f64) -> Option<f64> {
    if n < MIN_CALIBRATED_ITEMS {
        return None;
    }
    let k = head_count(n, fraction);
    if zipf_head_mass(n, k, 0.0) >= target {
        return Some(0.0);
    }
    // head mass increases with the exponent
    let (mut lo, mut hi) = (0.0, 1.0);
    while zipf_head_mass(n, k, hi) < target {
        hi *= 2.0;
        if hi > 64.0 {
            return None;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if zipf_head_mass(n, k, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Deterministic catalog for `(spec, seed)`. Popularity ranks are shuffled
/// over item ids; weights sum to 1.
pub fn generate_catalog(spec: &CatalogSpec, seed: u64) -> Result<Catalog> {
    spec.validate()?;
    let n = spec.items;
    let (exponent, calibrated) = match spec.zipf_exponent {
        Some(s) => (s, false),
        None => match solve_zipf_exponent(n, spec.head_fraction, spec.head_mass_target) {
            Some(s) => (s, true),
            None => {
                log::info!(
                    "catalog of {n} items is too small to calibrate popularity; using exponent {FALLBACK_EXPONENT}"
                );
                (FALLBACK_EXPONENT, false)
            }
        },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ranks: Vec<usize> = (1..=n).collect();
    ranks.shuffle(&mut rng);
    let raw: Vec<f64> = ranks.iter().map(|r| (*r as f64).powf(-exponent)).collect();
    let total: f64 = raw.iter().sum();

    let class_pick = WeightedAliasIndex::new(spec.durations.iter().map(|d| d.weight).collect())
        .map_err(|e| Error::param(e.to_string()))?;
    let mut items = Vec::with_capacity(n);
    let mut playtime = Vec::with_capacity(n);
    let mut duration_class = Vec::with_capacity(n);
    for (id, w) in raw.iter().enumerate() {
        let c = class_pick.sample(&mut rng);
        let class = &spec.durations[c];
        let duration_s = if class.max_s > class.min_s {
            rng.random_range(class.min_s..class.max_s).round().max(1.0)
        } else {
            class.min_s
        };
        let (lo, hi) = class.watch_fraction;
        let frac = if hi > lo { rng.random_range(lo..hi) } else { lo };
        items.push(Item {
            id: id as u64,
            duration_s,
            ladders: LadderGroup::from_rungs(&class.rungs, duration_s)?,
            popularity_weight: w / total,
            value_score: 0.0,
        });
        playtime.push(PlaytimeDist::Geometric {
            stop_prob: (1.0 / (frac * duration_s)).min(1.0),
            max_s: Some(duration_s),
        });
        duration_class.push(c);
    }

    let mut sorted: Vec<f64> = items.iter().map(|i| i.popularity_weight).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let head_mass = sorted[..head_count(n, spec.head_fraction)].iter().sum();
    Ok(Catalog { items, playtime, duration_class, exponent, calibrated, head_mass })
}

impl Catalog {
    /// Seeded stream of item ids drawn by popularity.
    pub fn sample_requests(&self, n: usize, seed: u64) -> Result<Vec<u64>> {
        let pick = WeightedAliasIndex::new(self.items.iter().map(|i| i.popularity_weight).collect())
            .map_err(|e| Error::input(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n).map(|_| self.items[pick.sample(&mut rng)].id).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["item_id", "duration_s", "popularity", "rungs", "top_kbps", "mean_watch_s"])?;
        for (item, pt) in self.items.iter().zip(&self.playtime) {
            out.write_record([
                item.id.to_string(),
                item.duration_s.to_string(),
                item.popularity_weight.to_string(),
                item.ladders.len().to_string(),
                item.ladders.top().bitrate_kbps.to_string(),
                pt.mean().to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(items: usize) -> CatalogSpec {
        CatalogSpec { items, ..Default::default() }
    }

    #[test]
    fn calibrated_head_mass_at_full_scale() {
        let c = generate_catalog(&CatalogSpec::default(), 3).unwrap();
        assert!(c.calibrated);
        assert!((c.head_mass - 0.70).abs() <= 0.03, "{}", c.head_mass);
        let sum: f64 = c.items.iter().map(|i| i.popularity_weight).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_exponent_is_uniform() {
        let c = generate_catalog(&CatalogSpec { zipf_exponent: Some(0.0), ..small(10_000) }, 1).unwrap();
        assert!((c.head_mass - 0.01).abs() < 1e-12);
        assert!(c.items.iter().all(|i| (i.popularity_weight - 1e-4).abs() < 1e-15));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_catalog(&small(2000), 9).unwrap();
        assert_eq!(a, generate_catalog(&small(2000), 9).unwrap());
        assert_ne!(a, generate_catalog(&small(2000), 10).unwrap());
    }

    #[test]
    fn tiny_catalog_is_uncalibrated() {
        let c = generate_catalog(&small(200), 0).unwrap();
        assert!(!c.calibrated);
        assert_eq!(c.exponent, FALLBACK_EXPONENT);
    }

    #[test]
    fn playtime_bounded_by_duration() {
        let c = generate_catalog(&small(1000), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (item, pt) in c.items.iter().zip(&c.playtime).take(200) {
            for _ in 0..20 {
                let t = pt.sample(&mut rng);
                assert!((0.0..=item.duration_s).contains(&t));
            }
        }
    }

    #[test]
    fn solver_hits_target() {
        let s = solve_zipf_exponent(50_000, 0.01, 0.6).unwrap();
        assert!((zipf_head_mass(50_000, 500, s) - 0.6).abs() < 1e-9);
        assert_eq!(solve_zipf_exponent(999, 0.01, 0.7), None);
    }

    #[test]
    fn requests_follow_popularity() {
        let c = generate_catalog(&small(1000), 2).unwrap();
        let reqs = c.sample_requests(200_000, 5).unwrap();
        let top = c
            .items
            .iter()
            .max_by(|a, b| a.popularity_weight.total_cmp(&b.popularity_weight))
            .unwrap();
        let got = reqs.iter().filter(|r| **r == top.id).count() as f64 / reqs.len() as f64;
        assert!((got - top.popularity_weight).abs() < 0.01);
    }

    #[test]
    fn csv_has_one_row_per_item() {
        let c = generate_catalog(&small(50), 0).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 51);
    }
}
