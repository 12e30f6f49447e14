use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Index of the billed sample in an ascending sort of `n` samples:
/// `ceil(0.95·n) − 1`.
pub fn percentile95_index(n: usize) -> usize {
    // integer form of ceil(0.95 n) avoids float rounding at exact multiples
    (95 * n).div_ceil(100).saturating_sub(1)
}

/// 95th percentile of a bandwidth series under the sort-ascending,
/// ceil-index convention.
pub fn percentile95<T: Scalar>(series: &[T]) -> Result<T> {
    if series.is_empty() {
        return Err(Error::input("empty bandwidth series"));
    }
    if series.iter().any(|v| v.is_nan()) {
        return Err(Error::input("bandwidth series contains NaN"));
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    Ok(sorted[percentile95_index(sorted.len())])
}

/// One vendor's billed series in Mbps per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VendorSeries<T> {
    pub vendor: String,
    /// Currency per Mbps of 95-peak.
    pub unit_price: T,
    pub edge_mbps: Vec<T>,
    /// Back-to-source bandwidth; empty means none.
    #[serde(default)]
    pub bts_mbps: Vec<T>,
}

impl<T: Scalar> VendorSeries<T> {
    pub fn new(vendor: impl Into<String>, unit_price: T, edge_mbps: Vec<T>) -> Self {
        Self {
            vendor: vendor.into(),
            unit_price,
            edge_mbps,
            bts_mbps: Vec::new(),
        }
    }

    /// Edge plus back-to-source per slot.
    pub fn billed(&self) -> Result<Vec<T>> {
        if self.bts_mbps.is_empty() {
            return Ok(self.edge_mbps.clone());
        }
        if self.bts_mbps.len() != self.edge_mbps.len() {
            return Err(Error::input(format!(
                "vendor {}: edge and back-to-source series differ in length",
                self.vendor
            )));
        }
        Ok(self
            .edge_mbps
            .iter()
            .zip(&self.bts_mbps)
            .map(|(e, b)| *e + *b)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VendorBill<T> {
    pub vendor: String,
    pub peak_mbps: T,
    pub cost: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bill<T> {
    pub vendors: Vec<VendorBill<T>>,
    pub total: T,
}

/// Monthly 95-peak bill: `Σ_j p_j · P95(edge_j + bts_j)`.
pub fn cost_95peak<T: Scalar>(vendors: &[VendorSeries<T>]) -> Result<Bill<T>> {
    let mut out = Vec::with_capacity(vendors.len());
    let mut total = T::zero();
    for v in vendors {
        let peak = percentile95(&v.billed()?)?;
        let cost = v.unit_price * peak;
        total = total + cost;
        out.push(VendorBill {
            vendor: v.vendor.clone(),
            peak_mbps: peak,
            cost,
        });
    }
    Ok(Bill { vendors: out, total })
}

/// Traffic billing: `Σ_j p_j · Σ_t GB_t`, prices per GB (10^9 bytes).
pub fn cost_traffic<T: Scalar>(prices_per_gb: &[T], bytes: &[Vec<T>]) -> Result<T> {
    if prices_per_gb.len() != bytes.len() {
        return Err(Error::input("one byte series per price required"));
    }
    let gb = T::lit(1e9);
    Ok(prices_per_gb
        .iter()
        .zip(bytes)
        .fold(T::zero(), |acc, (p, series)| {
            acc + *p * series.iter().fold(T::zero(), |s, b| s + *b) / gb
        }))
}

/// Scheduling reuse rate `(T95 − Σ_j t95_j) / T95`.
pub fn srr<T: Scalar>(total: &[T], per_vendor: &[Vec<T>]) -> Result<T> {
    if per_vendor.is_empty() {
        return Err(Error::input("srr needs at least one vendor series"));
    }
    for (j, s) in per_vendor.iter().enumerate() {
        if s.len() != total.len() {
            return Err(Error::input(format!("vendor series {j} length differs from total")));
        }
    }
    let tol = T::lit(1e-6);
    for (t, d) in total.iter().enumerate() {
        let sum = per_vendor.iter().fold(T::zero(), |acc, s| acc + s[t]);
        if (sum - *d).abs() > tol * d.abs().max(T::one()) {
            return Err(Error::input(format!("vendor series do not sum to total at slot {t}")));
        }
    }
    let t95 = percentile95(total)?;
    if t95 == T::zero() {
        return Err(Error::Undefined("total 95-peak is zero".into()));
    }
    let mut sum = T::zero();
    for s in per_vendor {
        sum = sum + percentile95(s)?;
    }
    Ok((t95 - sum) / t95)
}
