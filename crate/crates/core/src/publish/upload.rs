//! Upload planning (chunked vs streaming) and pre-upload evaluation.

use serde::{Deserialize, Serialize};

use super::dist::Dist;
use super::encode::UploadNetwork;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UploadMode {
    Chunk,
    Streaming,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UploadNode {
    pub id: u32,
    pub up: bool,
    /// Multiplier on the network bandwidth reaching this node.
    pub bandwidth_scale: f64,
    pub extra_connect_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub mode: UploadMode,
    pub chunk_bytes: f64,
    pub parallelism: u32,
    pub node: u32,
    pub expected_duration_s: f64,
    pub expected_repeats_per_chunk: f64,
}

/// Expected repeats of a chunk under geometric retries.
pub fn expected_repeat(p_fail: f64) -> f64 {
    1.0 / (1.0 - p_fail)
}

/// Expected time of a chunked upload:
/// `(1/P)·Σ_chunks t(chunk)·E[repeat] + ⌈n/P⌉·E[connect]`.
pub fn chunked_duration(
    bytes: f64,
    chunk_bytes: f64,
    parallelism: u32,
    net: &UploadNetwork,
    node: &UploadNode,
) -> (f64, f64) {
    let n_full = (bytes / chunk_bytes).floor();
    let tail = bytes - n_full * chunk_bytes;
    let mut sizes = vec![(chunk_bytes, n_full)];
    if tail > 1e-9 {
        sizes.push((tail, 1.0));
    }
    let n_chunks: f64 = sizes.iter().map(|(_, n)| n).sum();
    let p = parallelism as f64;
    let work: f64 = sizes
        .iter()
        .map(|(s, n)| n * net.transfer_s(*s) / node.bandwidth_scale * expected_repeat(net.p_fail(*s)))
        .sum();
    let connect = (n_chunks / p).ceil() * (net.connect_s.mean() + node.extra_connect_s);
    (work / p + connect, expected_repeat(net.p_fail(chunk_bytes.min(bytes))))
}

/// Single logical chunk with resume on failure: each failure costs half the
/// transfer on average instead of all of it.
pub fn streaming_duration(bytes: f64, net: &UploadNetwork, node: &UploadNode) -> (f64, f64) {
    let p = net.p_fail(bytes);
    let t = net.transfer_s(bytes) / node.bandwidth_scale;
    let retries = p / (1.0 - p);
    (t * (1.0 + 0.5 * retries) + net.connect_s.mean() + node.extra_connect_s, 1.0 + retries)
}

/// Picks the plan with the least expected duration. Ties prefer larger
/// chunks, then more parallelism, then earlier nodes.
pub fn plan_upload(
    bytes: f64,
    net: &UploadNetwork,
    chunk_sizes: &[f64],
    parallelism: &[u32],
    nodes: &[UploadNode],
    include_streaming: bool,
) -> Result<ChunkPlan> {
    net.validate()?;
    if !(bytes > 0.0) {
        return Err(Error::param("upload size must be > 0"));
    }
    if chunk_sizes.is_empty() || parallelism.is_empty() || nodes.is_empty() {
        return Err(Error::param("need at least one chunk size, parallelism and node"));
    }
    if chunk_sizes.iter().any(|c| !(*c > 0.0)) || parallelism.contains(&0) {
        return Err(Error::param("chunk sizes must be > 0 and parallelism >= 1"));
    }
    let mut best: Option<ChunkPlan> = None;
    let better = |a: &ChunkPlan, b: &ChunkPlan| {
        a.expected_duration_s < b.expected_duration_s
            || (a.expected_duration_s == b.expected_duration_s
                && (a.chunk_bytes > b.chunk_bytes
                    || (a.chunk_bytes == b.chunk_bytes && a.parallelism > b.parallelism)))
    };
    for node in nodes.iter().filter(|n| n.up && n.bandwidth_scale > 0.0) {
        let mut consider = |plan: ChunkPlan| {
            if plan.expected_duration_s.is_finite() && best.as_ref().is_none_or(|b| better(&plan, b)) {
                best = Some(plan);
            }
        };
        for &c in chunk_sizes {
            for &p in parallelism {
                let (d, r) = chunked_duration(bytes, c, p, net, node);
                consider(ChunkPlan {
                    mode: UploadMode::Chunk,
                    chunk_bytes: c.min(bytes),
                    parallelism: p,
                    node: node.id,
                    expected_duration_s: d,
                    expected_repeats_per_chunk: r,
                });
            }
        }
        if include_streaming {
            let (d, r) = streaming_duration(bytes, net, node);
            consider(ChunkPlan {
                mode: UploadMode::Streaming,
                chunk_bytes: bytes,
                parallelism: 1,
                node: node.id,
                expected_duration_s: d,
                expected_repeats_per_chunk: r,
            });
        }
    }
    best.ok_or_else(|| Error::Infeasible("no upload node is available".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreUploadInputs {
    /// Time between the upload starting in the background and the user pressing publish.
    pub lead_s: Dist,
    pub encrypt_s: f64,
    pub upload_s: f64,
    pub cancel_prob: f64,
    pub preupload_bytes: f64,
    pub value_per_s: f64,
    pub cost_per_byte: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreUploadGain {
    pub baseline_s: f64,
    pub expected_perceived_s: f64,
    pub saving_s: f64,
    pub expected_waste_bytes: f64,
    pub recommend: bool,
}

pub fn preupload_gain(x: &PreUploadInputs) -> Result<PreUploadGain> {
    x.lead_s.validate()?;
    if !(0.0..=1.0).contains(&x.cancel_prob) {
        return Err(Error::param("cancel probability must be in [0, 1]"));
    }
    if [x.encrypt_s, x.upload_s, x.preupload_bytes].iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::param("durations and bytes must be >= 0"));
    }
    let baseline_s = x.upload_s;
    let expected_perceived_s = x.lead_s.expected_shortfall(x.upload_s + x.encrypt_s);
    let saving_s = baseline_s - expected_perceived_s;
    let expected_waste_bytes = x.cancel_prob * x.preupload_bytes;
    Ok(PreUploadGain {
        baseline_s,
        expected_perceived_s,
        saving_s,
        expected_waste_bytes,
        recommend: saving_s * x.value_per_s > expected_waste_bytes * x.cost_per_byte,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(bw: f64, connect: f64, beta: Option<f64>) -> UploadNetwork {
        UploadNetwork { bandwidth_kbps: Dist::constant(bw), connect_s: Dist::constant(connect), fail_beta_bytes: beta }
    }

    fn node(id: u32) -> UploadNode {
        UploadNode { id, up: true, bandwidth_scale: 1.0, extra_connect_s: 0.0 }
    }

    #[test]
    fn overhead_free_prefers_largest_chunks_and_parallelism() {
        let plan = plan_upload(10e6, &net(8000.0, 0.0, None), &[1e6, 4e6, 16e6], &[1, 2, 4], &[node(0)], false).unwrap();
        assert_eq!(plan.chunk_bytes, 10e6);
        assert_eq!(plan.parallelism, 4);
    }

    #[test]
    fn geometric_repeat() {
        assert_eq!(expected_repeat(0.5), 2.0);
    }

    #[test]
    fn exhaustive_oracle() {
        let n = net(4000.0, 0.3, Some(8e6));
        let nodes = [node(0), UploadNode { id: 1, up: true, bandwidth_scale: 1.3, extra_connect_s: 0.2 }];
        let sizes = [0.5e6, 1e6, 2e6, 4e6];
        let pars = [1, 2, 4];
        let plan = plan_upload(12e6, &n, &sizes, &pars, &nodes, false).unwrap();
        let mut oracle = f64::INFINITY;
        for nd in &nodes {
            for s in sizes {
                for p in pars {
                    // hand-expanded formula
                    let k = (12e6_f64 / s).floor();
                    let t = 12e6 / s - k;
                    let chunk_t = |b: f64| b * 8.0 / 1000.0 / 4000.0 / nd.bandwidth_scale / (-b / 8e6_f64).exp();
                    let mut work = k * chunk_t(s);
                    let mut count = k;
                    if t > 1e-9 {
                        work += chunk_t(t * s);
                        count += 1.0;
                    }
                    let d = work / p as f64 + (count / p as f64).ceil() * (0.3 + nd.extra_connect_s);
                    oracle = oracle.min(d);
                }
            }
        }
        assert!((plan.expected_duration_s - oracle).abs() < 1e-9, "{} vs {oracle}", plan.expected_duration_s);
    }

    #[test]
    fn all_nodes_down_is_infeasible() {
        let mut nd = node(0);
        nd.up = false;
        assert!(matches!(plan_upload(1e6, &net(1000.0, 0.0, None), &[1e6], &[1], &[nd], true), Err(Error::Infeasible(_))));
    }

    #[test]
    fn streaming_without_failures_is_one_transfer() {
        let (d, r) = streaming_duration(1e6, &net(8000.0, 0.5, None), &node(0));
        assert!((d - 1.5).abs() < 1e-12);
        assert_eq!(r, 1.0);
    }

    proptest! {
        #[test]
        fn duration_monotone(bw in 500.0f64..20_000.0, f in 1.01f64..4.0, beta in 1e6f64..1e8, g in 1.01f64..4.0) {
            let sizes = [0.5e6, 2e6, 8e6];
            let pars = [1, 3];
            let plan = |n: &UploadNetwork| plan_upload(20e6, n, &sizes, &pars, &[node(0)], true).unwrap().expected_duration_s;
            let base = plan(&net(bw, 0.2, Some(beta)));
            prop_assert!(plan(&net(bw * f, 0.2, Some(beta))) <= base + 1e-9);
            prop_assert!(plan(&net(bw, 0.2, Some(beta / g))) >= base - 1e-9);
        }
    }

    fn inputs(lead: Dist) -> PreUploadInputs {
        PreUploadInputs {
            lead_s: lead,
            encrypt_s: 2.0,
            upload_s: 10.0,
            cancel_prob: 0.2,
            preupload_bytes: 1e7,
            value_per_s: 1.0,
            cost_per_byte: 1e-7,
        }
    }

    #[test]
    fn zero_lead_costs_encrypt_time() {
        let g = preupload_gain(&inputs(Dist::constant(0.0))).unwrap();
        assert!((g.saving_s + 2.0).abs() < 1e-12);
        assert!(!g.recommend);
        let mut x = inputs(Dist::constant(0.0));
        x.encrypt_s = 0.0;
        assert_eq!(preupload_gain(&x).unwrap().saving_s, 0.0);
    }

    #[test]
    fn long_lead_hides_everything() {
        let g = preupload_gain(&inputs(Dist::Uniform { lo: 12.0, hi: 30.0 })).unwrap();
        assert_eq!(g.expected_perceived_s, 0.0);
        assert_eq!(g.saving_s, 10.0);
        assert!(g.recommend);
    }

    #[test]
    fn lognormal_lead_matches_monte_carlo() {
        let lead = Dist::LogNormal { mu: 2.0, sigma: 0.8 };
        let g = preupload_gain(&inputs(lead)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000;
        let mc = (0..n).map(|_| (12.0 - lead.sample(&mut rng)).max(0.0)).sum::<f64>() / n as f64;
        assert!((g.expected_perceived_s - mc).abs() < 0.01 * mc, "{} vs {mc}", g.expected_perceived_s);
    }
}
