//! Monte Carlo estimates of every metric, drawn directly from channel samples.
//!
//! Samples are generated in fixed blocks of [`BLOCK_SIZE`]. Block `b` owns
//! ChaCha8 stream `stream_offset + b` under the run seed, and block
//! accumulators are merged in block order, so the result is bit-identical for
//! any `n_streams` or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{FadingParams, GainSample, PairSampler, ScenarioSampler, ScenarioSpec, Topology};
use crate::error::{Error, Result};
use crate::metrics::{snr_scales, Method, MetricEstimate, RateThreshold};

pub const BLOCK_SIZE: u64 = 1 << 16;
pub const MIN_SAMPLES: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub n_samples: u64,
    pub seed: u64,
    /// Parallel work partitions. Never changes the result.
    pub n_streams: usize,
    /// First ChaCha8 stream used; runs with non-overlapping stream ranges are
    /// statistically independent.
    pub stream_offset: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_samples: 1_000_000,
            seed: 0,
            n_streams: 1,
            stream_offset: 0,
        }
    }
}

impl McSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::invalid(
                "n_samples",
                format!("{} is below the minimum of {MIN_SAMPLES}", self.n_samples),
            ));
        }
        if self.n_streams == 0 {
            return Err(Error::invalid("n_streams", "must be at least 1"));
        }
        if self.stream_offset.checked_add(self.n_blocks()).is_none() {
            return Err(Error::invalid("stream_offset", "stream range overflows"));
        }
        Ok(())
    }

    pub fn n_blocks(&self) -> u64 {
        self.n_samples.div_ceil(BLOCK_SIZE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMetric {
    Capacity,
    Outage(RateThreshold),
    Asc,
    Opsc(RateThreshold),
}

impl McMetric {
    fn is_probability(self) -> bool {
        matches!(self, McMetric::Outage(_) | McMetric::Opsc(_))
    }

    fn needs_eve(self) -> bool {
        matches!(self, McMetric::Asc | McMetric::Opsc(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    /// `E{x}`
    MeanX,
    /// `E{x y}`
    MeanXy,
    /// `E{(x y)^2}`
    SecondMomentProduct,
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Accumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    #[inline]
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let (na, nb) = (self.n as f64, other.n as f64);
        self.mean += d * nb / n as f64;
        self.m2 += other.m2 + d * d * na * nb / n as f64;
        self.n = n;
    }

    fn estimate(&self, probability: bool) -> MetricEstimate {
        let n = self.n as f64;
        let error_estimate = if probability {
            let p = self.mean.clamp(0.0, 1.0);
            (p * (1.0 - p) / n).sqrt()
        } else if self.n > 1 {
            (self.m2 / (n - 1.0)).sqrt() / n.sqrt()
        } else {
            0.0
        };
        MetricEstimate {
            value: self.mean,
            error_estimate,
            method: Method::MonteCarlo,
            work: self.n,
            converged: self.mean.is_finite() && error_estimate.is_finite(),
        }
    }
}

/// Runs `draw` once per sample, which writes `n_out` values to its buffer.
fn simulate<F>(settings: &McSettings, n_out: usize, draw: F) -> Vec<Accumulator>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let n_blocks = settings.n_blocks() as usize;
    let chunk = n_blocks.div_ceil(settings.n_streams).max(1);
    let run_block = |block: usize| {
        let block = block as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(settings.stream_offset + block);
        let len = BLOCK_SIZE.min(settings.n_samples - block * BLOCK_SIZE);
        let mut acc = vec![Accumulator::default(); n_out];
        let mut buf = vec![0.0; n_out];
        for _ in 0..len {
            draw(&mut rng, &mut buf);
            for (a, &v) in acc.iter_mut().zip(&buf) {
                a.push(v);
            }
        }
        acc
    };
    let blocks: Vec<Vec<Accumulator>> = (0..n_blocks)
        .into_par_iter()
        .with_min_len(chunk)
        .map(run_block)
        .collect();
    let mut total = vec![Accumulator::default(); n_out];
    for block in &blocks {
        for (t, b) in total.iter_mut().zip(block) {
            t.merge(b);
        }
    }
    total
}

#[derive(Debug, Clone, Copy)]
struct Point {
    legit: f64,
    eve: f64,
}

#[inline]
fn evaluate(metric: McMetric, g: &GainSample, point: &Point) -> f64 {
    let gamma_b = point.legit * g.x * g.y;
    match metric {
        McMetric::Capacity => gamma_b.ln_1p() / std::f64::consts::LN_2,
        McMetric::Outage(t) => f64::from(u8::from(gamma_b < t.gamma_th())),
        McMetric::Asc => {
            let gamma_e = point.eve * g.x * g.z;
            ((gamma_b.ln_1p() - gamma_e.ln_1p()) / std::f64::consts::LN_2).max(0.0)
        }
        McMetric::Opsc(t) => {
            let gamma_e = point.eve * g.x * g.z;
            f64::from(u8::from(1.0 + gamma_b < t.r_th.exp2() * (1.0 + gamma_e)))
        }
    }
}

fn check_metrics(topology: Topology, metrics: &[McMetric]) -> Result<()> {
    if metrics.is_empty() {
        return Err(Error::invalid("metrics", "at least one metric is required"));
    }
    if topology == Topology::P2p && metrics.iter().any(|m| m.needs_eve()) {
        return Err(Error::invalid(
            "metric",
            "secrecy metrics need an eavesdropper topology",
        ));
    }
    Ok(())
}

/// Monte Carlo estimate of one metric.
pub fn mc_metric(spec: &ScenarioSpec, metric: McMetric, settings: &McSettings) -> Result<MetricEstimate> {
    let out = mc_metric_sweep(spec, &[spec.gamma_b_db], &[metric], settings)?;
    Ok(out[0][0])
}

/// Estimates every metric at every legitimate SNR (dB) from one shared set of
/// channel samples. The result is indexed `[snr][metric]`; each entry equals
/// what [`mc_metric`] returns for that point alone.
pub fn mc_metric_sweep(
    spec: &ScenarioSpec,
    gamma_b_db: &[f64],
    metrics: &[McMetric],
    settings: &McSettings,
) -> Result<Vec<Vec<MetricEstimate>>> {
    settings.validate()?;
    check_metrics(spec.topology, metrics)?;
    if gamma_b_db.is_empty() {
        return Err(Error::invalid("gamma_b_db", "at least one SNR point is required"));
    }
    let points = gamma_b_db
        .iter()
        .map(|&db| {
            let s = snr_scales(&ScenarioSpec {
                gamma_b_db: db,
                ..*spec
            })?;
            Ok(Point {
                legit: s.legit,
                eve: s.eve.unwrap_or(0.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sampler = ScenarioSampler::new(spec.topology, &spec.pair, spec.independent_k);
    let m = metrics.len();
    let acc = simulate(settings, points.len() * m, |rng, buf| {
        let g = sampler.sample(rng);
        for (i, p) in points.iter().enumerate() {
            for (j, &metric) in metrics.iter().enumerate() {
                buf[i * m + j] = evaluate(metric, &g, p);
            }
        }
    });
    Ok(acc
        .chunks(m)
        .map(|row| {
            row.iter()
                .zip(metrics)
                .map(|(a, metric)| a.estimate(metric.is_probability()))
                .collect()
        })
        .collect())
}

/// Monte Carlo estimate of a moment of the correlated pair.
pub fn mc_moment(params: &FadingParams, moment: Moment, settings: &McSettings) -> Result<MetricEstimate> {
    params.validate()?;
    settings.validate()?;
    let sampler = PairSampler::new(params);
    let acc = simulate(settings, 1, |rng, buf| {
        let (x, y) = sampler.sample(rng);
        buf[0] = match moment {
            Moment::MeanX => x,
            Moment::MeanXy => x * y,
            Moment::SecondMomentProduct => (x * y) * (x * y),
        };
    });
    Ok(acc[0].estimate(false))
}
