//! Upload process priority under a consumption-experience constraint.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppState {
    ForegroundPublish,
    Background,
    OtherPage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityLevel {
    pub priority: u32,
    /// Device quota consumed by the upload process at this level.
    pub quota: f64,
}

/// Piecewise-linear consume-QoP degradation as a function of priority,
/// scaled per app state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradationModel {
    /// `(priority, degradation)` knots, sorted by priority.
    pub knots: Vec<(f64, f64)>,
    pub foreground_publish_scale: f64,
    pub other_page_scale: f64,
}

impl Default for DegradationModel {
    fn default() -> Self {
        Self {
            knots: vec![(0.0, 0.0), (2.0, 0.0), (5.0, 0.02), (10.0, 0.10)],
            foreground_publish_scale: 0.25,
            other_page_scale: 1.0,
        }
    }
}

impl DegradationModel {
    pub fn at(&self, state: AppState, priority: f64) -> f64 {
        let scale = match state {
            AppState::Background => return 0.0,
            AppState::ForegroundPublish => self.foreground_publish_scale,
            AppState::OtherPage => self.other_page_scale,
        };
        scale * interpolate(&self.knots, priority)
    }
}

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    match knots {
        [] => 0.0,
        [(_, y)] => *y,
        _ => {
            if x <= knots[0].0 {
                return knots[0].1;
            }
            for w in knots.windows(2) {
                let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                if x <= x1 {
                    return if x1 > x0 { y0 + (y1 - y0) * (x - x0) / (x1 - x0) } else { y1 };
                }
            }
            knots[knots.len() - 1].1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityDecision {
    pub priority: u32,
    pub degradation: f64,
    /// Set when no level was feasible and the lowest one was returned.
    pub suspended: bool,
}

/// Highest priority whose modeled degradation is at most `eps` and whose
/// quota, added to `consume_quota`, fits `max_quota`.
pub fn adapt_priority(
    state: AppState,
    ladder: &[PriorityLevel],
    model: &DegradationModel,
    consume_quota: f64,
    max_quota: f64,
    eps: f64,
) -> Result<PriorityDecision> {
    if ladder.is_empty() {
        return Err(Error::param("priority ladder is empty"));
    }
    if !(eps >= 0.0) {
        return Err(Error::param("epsilon must be >= 0"));
    }
    let feasible = ladder
        .iter()
        .filter(|l| l.quota + consume_quota <= max_quota)
        .filter(|l| model.at(state, l.priority as f64) <= eps)
        .max_by_key(|l| l.priority);
    Ok(match feasible {
        Some(l) => PriorityDecision {
            priority: l.priority,
            degradation: model.at(state, l.priority as f64),
            suspended: false,
        },
        None => {
            let low = ladder.iter().min_by_key(|l| l.priority).expect("nonempty");
            PriorityDecision {
                priority: low.priority,
                degradation: model.at(state, low.priority as f64),
                suspended: true,
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ladder() -> Vec<PriorityLevel> {
        (1..=10).map(|p| PriorityLevel { priority: p, quota: 5.0 * p as f64 }).collect()
    }

    #[test]
    fn background_gets_max_priority() {
        let d = adapt_priority(AppState::Background, &ladder(), &DegradationModel::default(), 0.0, 100.0, 0.0).unwrap();
        assert_eq!(d.priority, 10);
        assert!(!d.suspended);
    }

    #[test]
    fn zero_tolerance_with_degradation_everywhere_is_minimum() {
        let m = DegradationModel { knots: vec![(0.0, 0.01), (10.0, 0.2)], ..Default::default() };
        let d = adapt_priority(AppState::OtherPage, &ladder(), &m, 0.0, 100.0, 0.0).unwrap();
        assert_eq!(d.priority, 1);
        assert!(d.suspended);
    }

    #[test]
    fn quota_caps_priority() {
        let d = adapt_priority(AppState::Background, &ladder(), &DegradationModel::default(), 60.0, 100.0, 0.0).unwrap();
        assert_eq!(d.priority, 8);
    }

    proptest! {
        #[test]
        fn matches_scan_and_monotone_in_eps(eps in 0.0f64..0.12, de in 0.0f64..0.05, used in 0.0f64..60.0) {
            let m = DegradationModel::default();
            let lad = ladder();
            let a = adapt_priority(AppState::OtherPage, &lad, &m, used, 100.0, eps).unwrap();
            let mut oracle = None;
            for l in &lad {
                if l.quota + used <= 100.0 && m.at(AppState::OtherPage, l.priority as f64) <= eps {
                    oracle = Some(l.priority);
                }
            }
            prop_assert_eq!(a.suspended, oracle.is_none());
            prop_assert_eq!(a.priority, oracle.unwrap_or(1));
            let b = adapt_priority(AppState::OtherPage, &lad, &m, used, 100.0, eps + de).unwrap();
            prop_assert!(b.priority >= a.priority);
        }
    }
}
