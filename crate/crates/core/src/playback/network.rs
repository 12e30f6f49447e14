use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant bandwidth trace. Sample `i` holds from its timestamp
/// until the next one; the last sample holds until `end_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTrace {
    pub id: String,
    samples: Vec<TraceSample>,
    end_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t_ms: u64,
    pub bandwidth_kbps: f64,
}

impl NetworkTrace {
    pub fn new(id: impl Into<String>, samples: Vec<TraceSample>, end_ms: u64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::input("network trace has no samples"));
        }
        if samples[0].t_ms != 0 {
            return Err(Error::input("network trace must start at t_ms = 0"));
        }
        for w in samples.windows(2) {
            if w[1].t_ms <= w[0].t_ms {
                return Err(Error::input("trace timestamps must be strictly increasing"));
            }
        }
        if samples.iter().any(|s| s.bandwidth_kbps.is_nan() || s.bandwidth_kbps < 0.0) {
            return Err(Error::input("trace bandwidth must be >= 0"));
        }
        let last = samples.last().expect("nonempty").t_ms;
        if end_ms <= last {
            return Err(Error::input("trace end must follow the last sample"));
        }
        Ok(Self {
            id: id.into(),
            samples,
            end_ms,
        })
    }

    pub fn constant(id: impl Into<String>, bandwidth_kbps: f64, duration_ms: u64) -> Self {
        Self::new(
            id,
            vec![TraceSample {
                t_ms: 0,
                bandwidth_kbps,
            }],
            duration_ms,
        )
        .expect("constant trace is valid")
    }

    /// Builds a trace from equally spaced samples.
    pub fn from_steps(id: impl Into<String>, step_ms: u64, kbps: &[f64]) -> Result<Self> {
        let samples = kbps
            .iter()
            .enumerate()
            .map(|(i, &b)| TraceSample {
                t_ms: i as u64 * step_ms,
                bandwidth_kbps: b,
            })
            .collect();
        Self::new(id, samples, kbps.len() as u64 * step_ms)
    }

    pub fn end_ms(&self) -> u64 {
        self.end_ms
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    /// Bandwidth at `t_ms`, or `None` once the trace is exhausted.
    pub fn bandwidth_at(&self, t_ms: u64) -> Option<f64> {
        if t_ms >= self.end_ms {
            return None;
        }
        let idx = self.samples.partition_point(|s| s.t_ms <= t_ms);
        Some(self.samples[idx - 1].bandwidth_kbps)
    }

    /// Multiplies every sample by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.bandwidth_kbps *= factor;
        }
        out
    }

    pub fn mean_kbps(&self) -> f64 {
        let mut acc = 0.0;
        for (i, s) in self.samples.iter().enumerate() {
            let end = self.samples.get(i + 1).map_or(self.end_ms, |n| n.t_ms);
            acc += s.bandwidth_kbps * (end - s.t_ms) as f64;
        }
        acc / self.end_ms as f64
    }

    /// Reads `t_ms,bandwidth_kbps` rows. The final sample lasts as long as the
    /// previous interval (1 s for single-row traces).
    pub fn read_csv<R: Read>(id: impl Into<String>, reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            t_ms: u64,
            bandwidth_kbps: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut samples = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            samples.push(TraceSample {
                t_ms: row.t_ms,
                bandwidth_kbps: row.bandwidth_kbps,
            });
        }
        let n = samples.len();
        let tail = match n {
            0 => return Err(Error::input("empty trace csv")),
            1 => 1000,
            _ => samples[n - 1].t_ms.saturating_sub(samples[n - 2].t_ms).max(1),
        };
        let end = samples[n - 1].t_ms + tail;
        Self::new(id, samples, end)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_ms", "bandwidth_kbps"])?;
        for s in &self.samples {
            w.write_record([s.t_ms.to_string(), s.bandwidth_kbps.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
