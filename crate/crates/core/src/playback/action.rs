use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ImpactTable, QoPVector};

/// One (module, implementation, resource) option with its resource usage and
/// its QoP impact expressed as an LT-equivalent (ΔLT/LT).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEntry {
    pub module_id: u32,
    pub implementation_id: u32,
    pub resource_id: u32,
    pub usage: f64,
    pub qop_impact: f64,
}

impl ActionEntry {
    /// Entry whose impact is the LT change of moving from `before` to `after`.
    pub fn from_qop_change(
        ids: (u32, u32, u32),
        usage: f64,
        before: &QoPVector,
        after: &QoPVector,
        impacts: &ImpactTable,
    ) -> Self {
        Self {
            module_id: ids.0,
            implementation_id: ids.1,
            resource_id: ids.2,
            usage,
            qop_impact: impacts.lt_delta(before, after).relative,
        }
    }

    fn key(&self) -> (u32, u32, u32) {
        (self.module_id, self.implementation_id, self.resource_id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionMatrix {
    entries: Vec<ActionEntry>,
}

impl ActionMatrix {
    pub fn new(entries: Vec<ActionEntry>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.key()) {
                return Err(Error::input(format!("duplicate action entry {:?}", e.key())));
            }
            if !e.qop_impact.is_finite() {
                return Err(Error::input(format!("action {:?} has non-finite impact", e.key())));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[ActionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The `k` entries with the largest |impact|; ties go to the smaller
/// (module, implementation, resource) triple. Asking for more than the
/// matrix holds returns every entry.
pub fn top_k_actions(matrix: &ActionMatrix, k: usize) -> Result<Vec<ActionEntry>> {
    if k == 0 {
        return Err(Error::param("k must be >= 1"));
    }
    let mut ranked: Vec<&ActionEntry> = matrix.entries.iter().collect();
    ranked.sort_by(|a, b| {
        b.qop_impact
            .abs()
            .total_cmp(&a.qop_impact.abs())
            .then_with(|| a.key().cmp(&b.key()))
    });
    Ok(ranked.into_iter().take(k).cloned().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::QopMetric;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn entry(m: u32, i: u32, r: u32, impact: f64) -> ActionEntry {
        ActionEntry {
            module_id: m,
            implementation_id: i,
            resource_id: r,
            usage: 1.0,
            qop_impact: impact,
        }
    }

    #[test]
    fn single_entry() {
        let m = ActionMatrix::new(vec![entry(1, 1, 1, 0.5)]).unwrap();
        assert_eq!(top_k_actions(&m, 1).unwrap(), vec![entry(1, 1, 1, 0.5)]);
    }

    #[test]
    fn ranks_by_magnitude() {
        let m = ActionMatrix::new(vec![
            entry(0, 0, 0, 3.0),
            entry(0, 1, 0, -5.0),
            entry(0, 2, 0, 1.0),
        ])
        .unwrap();
        let top: Vec<f64> = top_k_actions(&m, 2).unwrap().iter().map(|e| e.qop_impact).collect();
        assert_eq!(top, vec![-5.0, 3.0]);
    }

    #[test]
    fn oversize_k_returns_all_and_zero_k_errors() {
        let m = ActionMatrix::new(vec![entry(0, 0, 0, 1.0), entry(0, 0, 1, 2.0)]).unwrap();
        assert_eq!(top_k_actions(&m, 10).unwrap().len(), 2);
        assert!(top_k_actions(&m, 0).is_err());
    }

    #[test]
    fn duplicates_rejected() {
        assert!(ActionMatrix::new(vec![entry(0, 0, 0, 1.0), entry(0, 0, 0, 2.0)]).is_err());
    }

    #[test]
    fn ties_broken_by_ids() {
        let m = ActionMatrix::new(vec![
            entry(2, 0, 0, 1.0),
            entry(1, 5, 0, -1.0),
            entry(1, 2, 9, 1.0),
        ])
        .unwrap();
        let keys: Vec<_> = top_k_actions(&m, 3).unwrap().iter().map(|e| e.key()).collect();
        assert_eq!(keys, vec![(1, 2, 9), (1, 5, 0), (2, 0, 0)]);
    }

    #[test]
    fn matches_full_sort_prefix() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let entries: Vec<_> = (0..50)
            .map(|i| entry(i / 10, i % 10, 0, rng.random_range(-1.0..1.0)))
            .collect();
        let m = ActionMatrix::new(entries.clone()).unwrap();
        // oracle: rank every entry by |impact| using a plain selection loop
        let mut remaining = entries;
        let mut oracle = Vec::new();
        for _ in 0..10 {
            let mut best = 0;
            for j in 1..remaining.len() {
                if remaining[j].qop_impact.abs() > remaining[best].qop_impact.abs() {
                    best = j;
                }
            }
            oracle.push(remaining.remove(best));
        }
        assert_eq!(top_k_actions(&m, 10).unwrap(), oracle);
    }

    #[test]
    fn impact_from_qop_change_uses_core_model() {
        let before = QoPVector::default().with(QopMetric::FirstFrameMs, 500.0);
        let after = before.with(QopMetric::FirstFrameMs, 495.0);
        let e = ActionEntry::from_qop_change((1, 0, 0), 0.1, &before, &after, &ImpactTable::default());
        assert!((e.qop_impact - 0.00023).abs() < 1e-12);
    }
}
