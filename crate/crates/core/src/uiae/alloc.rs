//! Quota-constrained transcode admission (0/1 knapsack).

use serde::{Deserialize, Serialize};

use super::ladder::ResourceType;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscodeTask {
    pub item_id: u64,
    /// Index of the candidate ladder group in the caller's parameter space.
    pub candidate: usize,
    pub reward: f64,
    /// Normalized transcode-seconds; must be > 0.
    pub quota: f64,
    pub resource: ResourceType,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocationConfig {
    /// Quota units per DP cell.
    pub granularity: f64,
    pub max_dp_cells: usize,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self { granularity: 0.01, max_dp_cells: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// Accepted task indices, ascending.
    pub accepted: Vec<usize>,
    pub quota_used: f64,
    pub reward_sum: f64,
    /// True when the DP ran; false for the greedy fallback.
    pub exact: bool,
}

fn summarize(tasks: &[TranscodeTask], mut accepted: Vec<usize>, exact: bool) -> Allocation {
    accepted.sort_unstable();
    let quota_used = accepted.iter().map(|&i| tasks[i].quota).sum();
    let reward_sum = accepted.iter().map(|&i| tasks[i].reward).sum();
    Allocation { accepted, quota_used, reward_sum, exact }
}

fn check(tasks: &[TranscodeTask], budget: f64) -> Result<()> {
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::param("quota budget must be > 0"));
    }
    if let Some(t) = tasks.iter().find(|t| !(t.quota > 0.0) || !t.quota.is_finite() || !t.reward.is_finite()) {
        return Err(Error::input(format!("task for item {} has a bad quota or reward", t.item_id)));
    }
    Ok(())
}

/// Exact DP on costs rounded up to whole cells, so any accepted set also
/// fits the real budget. Tasks with nonpositive reward are never accepted.
pub fn knapsack_dp(tasks: &[TranscodeTask], budget: f64, granularity: f64) -> Result<Allocation> {
    check(tasks, budget)?;
    if !(granularity > 0.0) {
        return Err(Error::param("granularity must be > 0"));
    }
    let cells = |q: f64| (q / granularity - 1e-9).ceil().max(1.0) as usize;
    let live: Vec<usize> = (0..tasks.len()).filter(|&i| tasks[i].reward > 0.0).collect();
    let total: usize = live.iter().map(|&i| cells(tasks[i].quota)).sum();
    let cap = ((budget / granularity + 1e-9).floor() as usize).min(total);
    let mut best = vec![0.0f64; cap + 1];
    let mut take = vec![false; live.len() * (cap + 1)];
    for (row, &i) in live.iter().enumerate() {
        let w = cells(tasks[i].quota);
        if w > cap {
            continue;
        }
        for c in (w..=cap).rev() {
            let cand = best[c - w] + tasks[i].reward;
            if cand > best[c] {
                best[c] = cand;
                take[row * (cap + 1) + c] = true;
            }
        }
    }
    let mut accepted = Vec::new();
    let mut c = cap;
    for row in (0..live.len()).rev() {
        if take[row * (cap + 1) + c] {
            let i = live[row];
            accepted.push(i);
            c -= cells(tasks[i].quota);
        }
    }
    Ok(summarize(tasks, accepted, true))
}

/// Reward/quota greedy, compared against the best single task, then
/// improved by single swaps until none helps. At least half the optimum.
pub fn knapsack_greedy(tasks: &[TranscodeTask], budget: f64) -> Result<Allocation> {
    check(tasks, budget)?;
    let mut order: Vec<usize> = (0..tasks.len()).filter(|&i| tasks[i].reward > 0.0).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (tasks[a].reward / tasks[a].quota, tasks[b].reward / tasks[b].quota);
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut chosen = vec![false; tasks.len()];
    let mut used = 0.0;
    let mut value = 0.0;
    for &i in &order {
        if used + tasks[i].quota <= budget {
            chosen[i] = true;
            used += tasks[i].quota;
            value += tasks[i].reward;
        }
    }
    let single = order
        .iter()
        .copied()
        .filter(|&i| tasks[i].quota <= budget)
        .max_by(|&a, &b| tasks[a].reward.total_cmp(&tasks[b].reward).then(b.cmp(&a)));
    if let Some(s) = single {
        if tasks[s].reward > value {
            chosen.iter_mut().for_each(|c| *c = false);
            chosen[s] = true;
            used = tasks[s].quota;
        }
    }
    // single-swap improvement; each accepted swap strictly raises the reward
    let mut improved = true;
    let mut rounds = 0;
    while improved && rounds < 10 * tasks.len().max(1) {
        improved = false;
        rounds += 1;
        'outer: for &out in &order {
            if !chosen[out] {
                continue;
            }
            for &inn in &order {
                if chosen[inn] {
                    continue;
                }
                let new_used = used - tasks[out].quota + tasks[inn].quota;
                if new_used <= budget && tasks[inn].reward > tasks[out].reward {
                    chosen[out] = false;
                    chosen[inn] = true;
                    used = new_used;
                    improved = true;
                    break 'outer;
                }
            }
        }
        for &i in &order {
            if !chosen[i] && used + tasks[i].quota <= budget {
                chosen[i] = true;
                used += tasks[i].quota;
                improved = true;
            }
        }
    }
    let accepted = (0..tasks.len()).filter(|&i| chosen[i]).collect();
    Ok(summarize(tasks, accepted, false))
}

/// Admits the subset of tasks that maximizes total reward within `budget`:
/// exact when the DP table fits `max_dp_cells`, greedy otherwise.
pub fn allocate_transcodes(
    tasks: &[TranscodeTask],
    budget: f64,
    cfg: &AllocationConfig,
) -> Result<Allocation> {
    check(tasks, budget)?;
    let live = tasks.iter().filter(|t| t.reward > 0.0).count();
    let total_cells: f64 = tasks
        .iter()
        .filter(|t| t.reward > 0.0)
        .map(|t| (t.quota / cfg.granularity).ceil())
        .sum();
    let cap = (budget / cfg.granularity).floor().min(total_cells);
    if (live as f64) * (cap + 1.0) <= cfg.max_dp_cells as f64 {
        knapsack_dp(tasks, budget, cfg.granularity)
    } else {
        knapsack_greedy(tasks, budget)
    }
}
