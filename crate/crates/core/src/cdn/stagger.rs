use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::billing::{percentile95, percentile95_index, srr};
use crate::error::{Error, Result};

/// Total demand per billing slot over a billing period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthWaveform {
    pub slot_minutes: u32,
    pub slots_per_day: usize,
    pub mbps: Vec<f64>,
}

impl BandwidthWaveform {
    pub fn new(slot_minutes: u32, slots_per_day: usize, mbps: Vec<f64>) -> Result<Self> {
        let w = Self { slot_minutes, slots_per_day, mbps };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots_per_day == 0 || self.mbps.is_empty() || !self.mbps.len().is_multiple_of(self.slots_per_day) {
            return Err(Error::input("waveform length must be a positive multiple of slots_per_day"));
        }
        if self.mbps.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::input("waveform values must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn days(&self) -> usize {
        self.mbps.len() / self.slots_per_day
    }

    pub fn day_of(&self, slot: usize) -> usize {
        slot / self.slots_per_day
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["slot", "mbps"])?;
        for (i, v) in self.mbps.iter().enumerate() {
            wr.write_record([i.to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, slot_minutes: u32, slots_per_day: usize) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut mbps = Vec::new();
        for (i, rec) in rd.deserialize::<(usize, f64)>().enumerate() {
            let (slot, v) = rec?;
            if slot != i {
                return Err(Error::input(format!("waveform row {i} has slot {slot}")));
            }
            mbps.push(v);
        }
        Self::new(slot_minutes, slots_per_day, mbps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    /// Each vendor owns a fixed window of the daily peak, the same every day.
    PhaseShift,
    /// Peak slots alternate between vendors slot by slot.
    ComplementaryShift,
    /// Each day's whole peak goes to one vendor.
    CrossDayShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VendorCapacity {
    pub id: String,
    pub capacity_mbps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakPlan {
    pub mode: ShiftMode,
    /// Total watermark `W`; slots above it are carried by one vendor.
    pub watermark_mbps: f64,
    pub vendor_watermarks: Vec<f64>,
    /// Vendor owning each slot above the watermark, `None` elsewhere.
    pub burst_owner: Vec<Option<usize>>,
    /// Vendor by slot, Mbps.
    pub vendor_mbps: Vec<Vec<f64>>,
}

impl PeakPlan {
    /// Shares of each vendor in `slot`; proportional to watermarks when the
    /// slot carries no demand.
    pub fn shares_at(&self, slot: usize) -> Vec<f64> {
        let total: f64 = self.vendor_mbps.iter().map(|v| v[slot]).sum();
        if total > 0.0 {
            self.vendor_mbps.iter().map(|v| v[slot] / total).collect()
        } else {
            let w: f64 = self.vendor_watermarks.iter().sum();
            let n = self.vendor_watermarks.len() as f64;
            self.vendor_watermarks
                .iter()
                .map(|x| if w > 0.0 { x / w } else { 1.0 / n })
                .collect()
        }
    }

    /// Days on which the set of peak-carrying vendors changes mid-day.
    pub fn intraday_switches(&self, slots_per_day: usize) -> usize {
        self.burst_owner
            .chunks(slots_per_day)
            .map(|day| {
                let owners: Vec<usize> = day.iter().flatten().copied().collect();
                owners.windows(2).filter(|w| w[0] != w[1]).count()
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaggerResult {
    pub plan: PeakPlan,
    pub srr: f64,
    pub baseline_srr: f64,
    pub vendor_peaks: Vec<f64>,
}

/// Every vendor carries demand in proportion to its capacity.
pub fn proportional_split(wave: &BandwidthWaveform, caps: &[f64]) -> Vec<Vec<f64>> {
    let total: f64 = caps.iter().sum();
    caps.iter()
        .map(|c| wave.mbps.iter().map(|d| d * c / total).collect())
        .collect()
}

/// Split at watermark `w` with the given burst owners: below `w` demand is
/// shared in proportion to capacity; above it the owner takes the excess
/// while the others sit at their own watermark. `None` when a vendor's
/// capacity would be exceeded.
pub fn split_at_watermark(
    wave: &BandwidthWaveform,
    caps: &[f64],
    w: f64,
    owner: &[Option<usize>],
) -> Option<Vec<Vec<f64>>> {
    let total_cap: f64 = caps.iter().sum();
    let marks: Vec<f64> = caps.iter().map(|c| w * c / total_cap).collect();
    let mut out = vec![vec![0.0; wave.mbps.len()]; caps.len()];
    for (t, &d) in wave.mbps.iter().enumerate() {
        match owner[t] {
            Some(v) if d > w => {
                for (j, m) in marks.iter().enumerate() {
                    out[j][t] = if j == v { d - (w - m) } else { *m };
                }
                if out[v][t] > caps[v] + 1e-9 {
                    return None;
                }
            }
            _ => {
                for (j, c) in caps.iter().enumerate() {
                    out[j][t] = d * c / total_cap;
                }
            }
        }
    }
    Some(out)
}

/// Slots above the total watermark may each exceed one vendor's own
/// watermark; a vendor tolerates this many without moving its 95-peak.
pub fn free_slots(n: usize) -> usize {
    n - (percentile95_index(n) + 1)
}

fn burst_slots(wave: &BandwidthWaveform, w: f64) -> Vec<usize> {
    (0..wave.mbps.len()).filter(|&t| wave.mbps[t] > w).collect()
}

/// Largest `D − W + w_v` a vendor must carry when owning `slots`.
fn fits(wave: &BandwidthWaveform, caps: &[f64], w: f64, v: usize, slots: &[usize]) -> bool {
    let total_cap: f64 = caps.iter().sum();
    let mark = w * caps[v] / total_cap;
    slots.iter().all(|&t| wave.mbps[t] - w + mark <= caps[v] + 1e-9)
}

/// Assigns each burst day to a vendor so that no vendor exceeds `budget`
/// burst slots. Exact subset-sum for two vendors, largest-first greedy
/// otherwise.
fn assign_days(day_slots: &[Vec<usize>], allowed: &[Vec<bool>], budget: usize, n_vendors: usize) -> Option<Vec<usize>> {
    let days = day_slots.len();
    let counts: Vec<usize> = day_slots.iter().map(Vec::len).collect();
    if n_vendors == 1 {
        return (counts.iter().sum::<usize>() <= budget && allowed.iter().all(|a| a[0]))
            .then(|| vec![0; days]);
    }
    if n_vendors == 2 {
        // reach[d][s]: vendor 0 can take exactly s slots from days < d
        let mut reach = vec![vec![false; budget + 1]; days + 1];
        reach[0][0] = true;
        for d in 0..days {
            for s in 0..=budget {
                if !reach[d][s] {
                    continue;
                }
                if allowed[d][1] {
                    reach[d + 1][s] = true;
                }
                if allowed[d][0] && s + counts[d] <= budget {
                    reach[d + 1][s + counts[d]] = true;
                }
            }
        }
        let total: usize = counts.iter().sum();
        // most balanced feasible split
        let target = total / 2;
        let s = (0..=budget)
            .filter(|&s| reach[days][s] && total - s <= budget)
            .min_by_key(|&s| (s.abs_diff(target), s))?;
        let mut out = vec![1; days];
        let mut s = s;
        for d in (0..days).rev() {
            if allowed[d][1] && reach[d][s] {
                out[d] = 1;
            } else {
                out[d] = 0;
                s -= counts[d];
            }
        }
        return Some(out);
    }
    let mut order: Vec<usize> = (0..days).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut left = vec![budget; n_vendors];
    let mut out = vec![0; days];
    for d in order {
        let v = (0..n_vendors)
            .filter(|&v| allowed[d][v] && left[v] >= counts[d])
            .max_by(|&a, &b| left[a].cmp(&left[b]).then(b.cmp(&a)))?;
        left[v] -= counts[d];
        out[d] = v;
    }
    Some(out)
}

fn owners_for(
    wave: &BandwidthWaveform,
    caps: &[f64],
    w: f64,
    mode: ShiftMode,
) -> Option<Vec<Option<usize>>> {
    let n_vendors = caps.len();
    let budget = free_slots(wave.mbps.len());
    let bursts = burst_slots(wave, w);
    let mut owner = vec![None; wave.mbps.len()];
    match mode {
        ShiftMode::CrossDayShift => {
            let mut day_slots = vec![Vec::new(); wave.days()];
            for &t in &bursts {
                day_slots[wave.day_of(t)].push(t);
            }
            let allowed: Vec<Vec<bool>> = day_slots
                .iter()
                .map(|s| (0..n_vendors).map(|v| fits(wave, caps, w, v, s)).collect())
                .collect();
            let days = assign_days(&day_slots, &allowed, budget, n_vendors)?;
            for &t in &bursts {
                owner[t] = Some(days[wave.day_of(t)]);
            }
        }
        ShiftMode::PhaseShift => {
            let spd = wave.slots_per_day;
            let lo = bursts.iter().map(|t| t % spd).min().unwrap_or(0);
            let hi = bursts.iter().map(|t| t % spd).max().unwrap_or(0);
            let len = (hi - lo + 1).div_ceil(n_vendors);
            for &t in &bursts {
                owner[t] = Some(((t % spd - lo) / len).min(n_vendors - 1));
            }
        }
        ShiftMode::ComplementaryShift => {
            let spd = wave.slots_per_day;
            let mut k = 0;
            let mut day = usize::MAX;
            for &t in &bursts {
                if t / spd != day {
                    day = t / spd;
                    k = day % n_vendors;
                }
                owner[t] = Some(k % n_vendors);
                k += 1;
            }
        }
    }
    let mut counts = vec![0; n_vendors];
    for o in owner.iter().flatten() {
        counts[*o] += 1;
    }
    if counts.iter().any(|c| *c > budget) {
        return None;
    }
    for v in 0..n_vendors {
        let mine: Vec<usize> = bursts.iter().copied().filter(|&t| owner[t] == Some(v)).collect();
        if !fits(wave, caps, w, v, &mine) {
            return None;
        }
    }
    Some(owner)
}

fn finish(
    wave: &BandwidthWaveform,
    caps: &[f64],
    mode: ShiftMode,
    w: f64,
    owner: Vec<Option<usize>>,
    split: Vec<Vec<f64>>,
) -> Result<StaggerResult> {
    let total_cap: f64 = caps.iter().sum();
    let srr_value = srr(&wave.mbps, &split)?;
    let baseline_srr = srr(&wave.mbps, &proportional_split(wave, caps))?;
    let vendor_peaks = split
        .iter()
        .map(|s| percentile95(s))
        .collect::<Result<Vec<f64>>>()?;
    Ok(StaggerResult {
        plan: PeakPlan {
            mode,
            watermark_mbps: w,
            vendor_watermarks: caps.iter().map(|c| w * c / total_cap).collect(),
            burst_owner: owner,
            vendor_mbps: split,
        },
        srr: srr_value,
        baseline_srr,
        vendor_peaks,
    })
}

/// Cross-day instances with at most this many day assignments are solved by
/// enumeration over every watermark candidate.
const EXHAUSTIVE_ASSIGNMENTS: usize = 1 << 12;
const EXHAUSTIVE_SLOTS: usize = 2_000;

/// Staggers vendor peaks so the sum of per-vendor 95-peaks drops below the
/// total's. Falls back to the proportional split whenever no staggered plan
/// beats it, so the achieved SRR is never below the baseline.
pub fn stagger_peaks(
    wave: &BandwidthWaveform,
    vendors: &[VendorCapacity],
    mode: ShiftMode,
) -> Result<StaggerResult> {
    wave.validate()?;
    if vendors.is_empty() {
        return Err(Error::param("no vendors"));
    }
    let caps: Vec<f64> = vendors.iter().map(|v| v.capacity_mbps).collect();
    if caps.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::param("vendor capacity must be > 0"));
    }
    let total_cap: f64 = caps.iter().sum();
    let max_d = wave.mbps.iter().copied().fold(0.0, f64::max);
    if max_d > total_cap + 1e-9 {
        return Err(Error::Infeasible(format!(
            "peak demand {max_d} Mbps exceeds total capacity {total_cap} Mbps"
        )));
    }
    let t95 = percentile95(&wave.mbps)?;
    let proportional = |mode| {
        let owner = vec![None; wave.mbps.len()];
        let split = proportional_split(wave, &caps);
        finish(wave, &caps, mode, max_d, owner, split)
    };
    if vendors.len() == 1 || t95 == 0.0 {
        return proportional(mode);
    }

    let mut candidates: Vec<f64> = wave.mbps.iter().copied().filter(|d| *d <= t95).collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let days = wave.days();
    let exhaustive = mode == ShiftMode::CrossDayShift
        && wave.mbps.len() <= EXHAUSTIVE_SLOTS
        && (vendors.len() as f64).powi(days as i32) <= EXHAUSTIVE_ASSIGNMENTS as f64;
    let mut best: Option<StaggerResult> = None;
    let mut consider = |w: f64, owner: Vec<Option<usize>>, split: Vec<Vec<f64>>| -> Result<()> {
        let r = finish(wave, &caps, mode, w, owner, split)?;
        if best.as_ref().is_none_or(|b| r.srr > b.srr + 1e-12) {
            best = Some(r);
        }
        Ok(())
    };

    if exhaustive {
        let n = vendors.len();
        let combos = n.pow(days as u32);
        for &w in &candidates {
            for code in 0..combos {
                let mut day_owner = vec![0; days];
                let mut c = code;
                for d in day_owner.iter_mut() {
                    *d = c % n;
                    c /= n;
                }
                let owner: Vec<Option<usize>> = (0..wave.mbps.len())
                    .map(|t| (wave.mbps[t] > w).then(|| day_owner[wave.day_of(t)]))
                    .collect();
                if let Some(split) = split_at_watermark(wave, &caps, w, &owner) {
                    consider(w, owner, split)?;
                }
            }
        }
    } else {
        // feasibility only improves as the watermark rises
        let (mut lo, mut hi) = (0usize, candidates.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if owners_for(wave, &caps, candidates[mid], mode).is_some() {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        if lo < candidates.len() {
            let w = candidates[lo];
            let owner = owners_for(wave, &caps, w, mode).expect("checked feasible");
            if let Some(split) = split_at_watermark(wave, &caps, w, &owner) {
                consider(w, owner, split)?;
            }
        }
    }
    match best {
        Some(b) if b.srr >= b.baseline_srr => Ok(b),
        _ => proportional(mode),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn month(days: usize, spd: usize, peak: &dyn Fn(usize, usize) -> f64) -> BandwidthWaveform {
        let mbps = (0..days * spd).map(|t| peak(t / spd, t % spd)).collect();
        BandwidthWaveform::new(5, spd, mbps).unwrap()
    }

    fn evening(spd: usize) -> impl Fn(usize, usize) -> f64 {
        move |_, s| {
            let h = s as f64 * 24.0 / spd as f64;
            200.0 + 800.0 * (-((h - 21.0) / 1.0).powi(2)).exp()
        }
    }

    fn two(cap: f64) -> Vec<VendorCapacity> {
        vec![
            VendorCapacity { id: "a".into(), capacity_mbps: cap },
            VendorCapacity { id: "b".into(), capacity_mbps: cap },
        ]
    }

    #[test]
    fn single_vendor_is_identity() {
        let w = month(3, 24, &evening(24));
        let r = stagger_peaks(&w, &two(2000.0)[..1], ShiftMode::CrossDayShift).unwrap();
        assert_eq!(r.srr, 0.0);
        assert_eq!(r.plan.vendor_mbps[0], w.mbps);
    }

    #[test]
    fn plans_are_feasible_and_gain() {
        let w = month(30, 288, &evening(288));
        for mode in [ShiftMode::CrossDayShift, ShiftMode::PhaseShift, ShiftMode::ComplementaryShift] {
            let r = stagger_peaks(&w, &two(1200.0), mode).unwrap();
            assert!(r.srr >= r.baseline_srr - 1e-12, "{mode:?}");
            assert!(r.baseline_srr.abs() < 1e-12);
            for t in 0..w.mbps.len() {
                let sum: f64 = r.plan.vendor_mbps.iter().map(|v| v[t]).sum();
                assert!((sum - w.mbps[t]).abs() < 1e-9);
                assert!(r.plan.vendor_mbps.iter().all(|v| v[t] <= 1200.0 + 1e-9));
                let shares: f64 = r.plan.shares_at(t).iter().sum();
                assert!((shares - 1.0).abs() < 1e-9);
            }
        }
        let cross = stagger_peaks(&w, &two(1200.0), ShiftMode::CrossDayShift).unwrap();
        assert!(cross.srr > 0.05, "{}", cross.srr);
        assert_eq!(cross.plan.intraday_switches(288), 0);
    }

    #[test]
    fn infeasible_capacity() {
        let w = month(2, 24, &evening(24));
        assert!(matches!(
            stagger_peaks(&w, &two(100.0), ShiftMode::CrossDayShift),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn alternating_days_split_has_positive_srr() {
        // identical days with a one-slot spike and a one-slot shoulder; each
        // vendor carries whole days alternately
        let w = month(20, 20, &|_, s| match s {
            17 => 400.0,
            18 => 1000.0,
            _ => 10.0,
        });
        let owner: Vec<usize> = (0..w.mbps.len()).map(|t| (t / 20) % 2).collect();
        let split: Vec<Vec<f64>> = (0..2)
            .map(|v| (0..w.mbps.len()).map(|t| if owner[t] == v { w.mbps[t] } else { 0.0 }).collect())
            .collect();
        let s = srr(&w.mbps, &split).unwrap();
        let p = |x: &[f64]| {
            let mut v = x.to_vec();
            v.sort_by(f64::total_cmp);
            v[(v.len() * 95).div_ceil(100) - 1]
        };
        let expect = (p(&w.mbps) - p(&split[0]) - p(&split[1])) / p(&w.mbps);
        assert!((s - expect).abs() < 1e-12);
        assert!((s - 0.95).abs() < 1e-12);
    }

    #[test]
    fn csv_roundtrip() {
        let w = month(1, 24, &evening(24));
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("slot,mbps"));
        let back = BandwidthWaveform::read_csv(buf.as_slice(), 5, 24).unwrap();
        assert_eq!(back, w);
    }
}
