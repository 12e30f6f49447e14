//! Client-side encoding mode and parameter selection.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dist::Dist;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodeMode {
    Soft,
    Hard,
    Skip,
}

/// Upload path characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UploadNetwork {
    pub bandwidth_kbps: Dist,
    pub connect_s: Dist,
    /// Chunk failure probability is `1 − exp(−bytes/β)`; `None` means no failures.
    pub fail_beta_bytes: Option<f64>,
}

impl UploadNetwork {
    pub fn p_fail(&self, chunk_bytes: f64) -> f64 {
        match self.fail_beta_bytes {
            None => 0.0,
            Some(beta) => 1.0 - (-chunk_bytes / beta).exp(),
        }
    }

    /// Expected transfer time of `bytes` with no failures.
    pub fn transfer_s(&self, bytes: f64) -> f64 {
        if bytes <= 0.0 {
            return 0.0;
        }
        bytes * 8.0 / 1000.0 * self.bandwidth_kbps.mean_inverse()
    }

    pub fn validate(&self) -> Result<()> {
        self.bandwidth_kbps.validate()?;
        self.connect_s.validate()?;
        if let Some(b) = self.fail_beta_bytes {
            if !(b > 0.0) {
                return Err(Error::param("failure scale must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishJob {
    pub material_bytes: f64,
    pub duration_s: f64,
    /// Content complexity, 0 = trivial; scales encode time by `1 + complexity`.
    pub complexity: f64,
    pub weight_quality: f64,
    pub weight_speed: f64,
    /// Consumption value of the item for its expected audience.
    pub alpha_ui: f64,
    pub network: UploadNetwork,
    /// Content seconds encoded per wall second, by mode.
    pub encode_speed: BTreeMap<EncodeMode, f64>,
}

impl PublishJob {
    pub fn validate(&self) -> Result<()> {
        if !(self.material_bytes > 0.0) || !(self.duration_s > 0.0) {
            return Err(Error::param("material bytes and duration must be > 0"));
        }
        if !(self.alpha_ui >= 0.0) || !(self.complexity >= 0.0) {
            return Err(Error::param("alpha_ui and complexity must be >= 0"));
        }
        if !(self.weight_quality >= 0.0 && self.weight_speed >= 0.0) {
            return Err(Error::param("author expectation weights must be >= 0"));
        }
        self.network.validate()
    }

    fn encode_s(&self, mode: EncodeMode) -> Result<f64> {
        if mode == EncodeMode::Skip {
            return Ok(0.0);
        }
        let speed = self
            .encode_speed
            .get(&mode)
            .copied()
            .filter(|s| *s > 0.0)
            .ok_or_else(|| Error::Config(format!("no positive encode speed for {mode:?}")))?;
        Ok(self.duration_s * (1.0 + self.complexity) / speed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodeOption {
    pub mode: EncodeMode,
    /// Output bytes as a fraction of the input.
    pub size_ratio: f64,
    /// Quality change relative to the source, in quality points.
    pub quality_delta: f64,
}

impl EncodeOption {
    pub fn validate(&self) -> Result<()> {
        if self.mode == EncodeMode::Skip && self.size_ratio != 1.0 {
            return Err(Error::param("skip must keep the input size"));
        }
        if !(self.size_ratio > 0.0) {
            return Err(Error::param("size ratio must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeConfig {
    /// Strength of the value-based relaxation of encode time.
    pub lambda: f64,
    /// Minimum acceptable quality delta.
    pub quality_floor: f64,
}

impl Default for ModeConfig {
    fn default() -> Self {
        Self { lambda: 1.0, quality_floor: -5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEvaluation {
    pub option: EncodeOption,
    pub encode_s: f64,
    /// Encode time after the value relaxation `encode/(1 + λ·α)`.
    pub effective_encode_s: f64,
    pub upload_s: f64,
    pub publish_s: f64,
    pub passes_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDecision {
    pub chosen: usize,
    pub evaluations: Vec<ModeEvaluation>,
}

impl ModeDecision {
    pub fn best(&self) -> &ModeEvaluation {
        &self.evaluations[self.chosen]
    }
}

pub fn evaluate_mode(job: &PublishJob, opt: &EncodeOption, cfg: &ModeConfig) -> Result<ModeEvaluation> {
    opt.validate()?;
    let encode_s = job.encode_s(opt.mode)?;
    let effective_encode_s = encode_s / (1.0 + cfg.lambda * job.alpha_ui);
    let upload_s = job.network.transfer_s(job.material_bytes * opt.size_ratio) + job.network.connect_s.mean();
    Ok(ModeEvaluation {
        option: *opt,
        encode_s,
        effective_encode_s,
        upload_s,
        publish_s: upload_s.max(effective_encode_s),
        passes_floor: opt.quality_delta >= cfg.quality_floor,
    })
}

/// Picks the option with the shortest pipelined publish time among those
/// meeting the quality floor; ties go to higher quality, then list order.
pub fn choose_encoding_mode(
    job: &PublishJob,
    options: &[EncodeOption],
    cfg: &ModeConfig,
) -> Result<ModeDecision> {
    job.validate()?;
    if options.is_empty() {
        return Err(Error::param("no encoding options"));
    }
    let evaluations = options
        .iter()
        .map(|o| evaluate_mode(job, o, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut chosen: Option<usize> = None;
    for (i, e) in evaluations.iter().enumerate() {
        if !e.passes_floor {
            continue;
        }
        let better = match chosen {
            None => true,
            Some(c) => {
                let b = &evaluations[c];
                e.publish_s < b.publish_s
                    || (e.publish_s == b.publish_s && e.option.quality_delta > b.option.quality_delta)
            }
        };
        if better {
            chosen = Some(i);
        }
    }
    let chosen = chosen.ok_or_else(|| {
        let v: Vec<String> = evaluations
            .iter()
            .map(|e| format!("{:?} quality {} < floor {}", e.option.mode, e.option.quality_delta, cfg.quality_floor))
            .collect();
        Error::Infeasible(format!("no encoding option meets the quality floor: {}", v.join("; ")))
    })?;
    Ok(ModeDecision { chosen, evaluations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Codec {
    H264,
    H265,
    Av1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodeParams {
    pub qp: f64,
    pub fps: f64,
    pub hdr: bool,
    pub codec: Codec,
    pub bitrate_kbps: f64,
    pub audio_channels: u32,
}

/// Parametric quality, size and speed responses of the client encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseSurfaces {
    pub qp_range: (f64, f64),
    pub fps_range: (f64, f64),
    pub bitrate_range: (f64, f64),
    /// Quality points per doubling of bitrate.
    pub quality_per_doubling: f64,
    pub quality_per_qp: f64,
    pub quality_per_fps_doubling: f64,
    pub hdr_quality: f64,
    /// (quality bonus, relative encode speed) per codec.
    pub codec: BTreeMap<Codec, (f64, f64)>,
    /// Base encode speed in content seconds per second for H.264 at QP 28.
    pub base_speed: f64,
    pub audio_kbps_per_channel: f64,
}

impl Default for ResponseSurfaces {
    fn default() -> Self {
        let mut codec = BTreeMap::new();
        codec.insert(Codec::H264, (0.0, 1.0));
        codec.insert(Codec::H265, (4.0, 0.5));
        codec.insert(Codec::Av1, (6.0, 0.2));
        Self {
            qp_range: (18.0, 40.0),
            fps_range: (15.0, 60.0),
            bitrate_range: (300.0, 12_000.0),
            quality_per_doubling: 8.0,
            quality_per_qp: 1.0,
            quality_per_fps_doubling: 3.0,
            hdr_quality: 3.0,
            codec,
            base_speed: 4.0,
            audio_kbps_per_channel: 64.0,
        }
    }
}

/// Value of quality and of time, used to score grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamObjective {
    /// Value per quality point per unit of `α_ui`.
    pub value_per_quality: f64,
    pub value_per_second: f64,
}

impl Default for ParamObjective {
    fn default() -> Self {
        Self { value_per_quality: 1.0, value_per_second: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEvaluation {
    pub params: EncodeParams,
    pub quality: f64,
    pub output_bytes: f64,
    pub publish_s: f64,
    pub score: f64,
}

/// Inputs that drove the decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamFeatures {
    pub complexity: f64,
    pub weight_quality: f64,
    pub weight_speed: f64,
    pub alpha_ui: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDecision {
    pub best: ParamEvaluation,
    pub features: ParamFeatures,
    pub evaluated: Vec<ParamEvaluation>,
    /// Messages for grid points outside the response domain.
    pub skipped: Vec<String>,
}

pub fn evaluate_params(
    job: &PublishJob,
    p: &EncodeParams,
    surf: &ResponseSurfaces,
    obj: &ParamObjective,
) -> Result<ParamEvaluation> {
    let within = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
    if !within(p.qp, surf.qp_range) || !within(p.fps, surf.fps_range) || !within(p.bitrate_kbps, surf.bitrate_range)
    {
        return Err(Error::input(format!("{p:?} outside the response-surface domain")));
    }
    let &(codec_q, codec_speed) = surf
        .codec
        .get(&p.codec)
        .ok_or_else(|| Error::input(format!("codec {:?} has no response surface", p.codec)))?;
    let quality = surf.quality_per_doubling * (p.bitrate_kbps / 1000.0).log2()
        - surf.quality_per_qp * (p.qp - 28.0)
        + surf.quality_per_fps_doubling * (p.fps / 30.0).log2()
        + if p.hdr { surf.hdr_quality } else { 0.0 }
        + codec_q
        - 2.0 * job.complexity;
    let total_kbps = p.bitrate_kbps + surf.audio_kbps_per_channel * p.audio_channels as f64;
    let output_bytes = total_kbps * 125.0 * job.duration_s;
    // higher QP and fewer frames encode faster
    let speed = surf.base_speed * codec_speed * (30.0 / p.fps) * (1.0 + 0.03 * (p.qp - 28.0)).max(0.1);
    let encode_s = job.duration_s * (1.0 + job.complexity) / speed;
    let upload_s = job.network.transfer_s(output_bytes) + job.network.connect_s.mean();
    let publish_s = encode_s.max(upload_s);
    let score = job.weight_quality * obj.value_per_quality * job.alpha_ui * quality
        - job.weight_speed * obj.value_per_second * publish_s;
    Ok(ParamEvaluation { params: *p, quality, output_bytes, publish_s, score })
}

/// Scores every grid point and returns the best; ties keep the earlier point.
pub fn choose_encoding_params(
    job: &PublishJob,
    grid: &[EncodeParams],
    surf: &ResponseSurfaces,
    obj: &ParamObjective,
) -> Result<ParamDecision> {
    job.validate()?;
    if grid.is_empty() {
        return Err(Error::param("parameter grid is empty"));
    }
    let mut evaluated = Vec::new();
    let mut skipped = Vec::new();
    for p in grid {
        match evaluate_params(job, p, surf, obj) {
            Ok(e) => evaluated.push(e),
            Err(e) => skipped.push(e.to_string()),
        }
    }
    let best = evaluated
        .iter()
        .fold(None::<&ParamEvaluation>, |acc, e| match acc {
            Some(b) if b.score >= e.score => Some(b),
            _ => Some(e),
        })
        .cloned()
        .ok_or_else(|| Error::Infeasible(format!("every grid point was skipped: {}", skipped.join("; "))))?;
    Ok(ParamDecision {
        best,
        features: ParamFeatures {
            complexity: job.complexity,
            weight_quality: job.weight_quality,
            weight_speed: job.weight_speed,
            alpha_ui: job.alpha_ui,
        },
        evaluated,
        skipped,
    })
}

/// Full factorial grid.
pub fn param_grid(qps: &[f64], fps: &[f64], bitrates: &[f64], codecs: &[Codec]) -> Vec<EncodeParams> {
    let mut out = Vec::new();
    for &codec in codecs {
        for &qp in qps {
            for &f in fps {
                for &b in bitrates {
                    out.push(EncodeParams { qp, fps: f, hdr: false, codec, bitrate_kbps: b, audio_channels: 2 });
                }
            }
        }
    }
    out
}
