//! Synthetic detector timestamp streams.
//!
//! Time is cut into fixed chunks. Chunk `i` draws every random number from
//! ChaCha8 keyed by the user seed with stream id `i`, so the merged,
//! sorted output does not depend on how chunks are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::biphoton::Waveform;
use crate::budget::{forward_singles, RateBudget};
use crate::consts::PS_PER_S;
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Detection channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Channel {
    Stokes = 0,
    AntiStokes = 1,
}

impl TryFrom<u8> for Channel {
    type Error = u8;

    fn try_from(v: u8) -> std::result::Result<Self, u8> {
        match v {
            0 => Ok(Channel::Stokes),
            1 => Ok(Channel::AntiStokes),
            other => Err(other),
        }
    }
}

/// One detector click, packed as `timestamp_ps << 1 | channel`. Ordering is
/// by timestamp, then channel.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Click(u64);

impl Click {
    /// Largest representable timestamp, ps.
    pub const MAX_TIMESTAMP: u64 = u64::MAX >> 1;

    pub fn new(timestamp_ps: u64, channel: Channel) -> Self {
        debug_assert!(timestamp_ps <= Self::MAX_TIMESTAMP);
        Click(timestamp_ps << 1 | channel as u64)
    }

    pub fn timestamp(self) -> u64 {
        self.0 >> 1
    }

    pub fn channel(self) -> Channel {
        if self.0 & 1 == 0 {
            Channel::Stokes
        } else {
            Channel::AntiStokes
        }
    }
}

impl std::fmt::Debug for Click {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Click({} ps, {:?})", self.timestamp(), self.channel())
    }
}

/// Time-ordered click records.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampStream {
    records: Vec<Click>,
    /// s
    pub duration: f64,
    pub seed: u64,
}

impl TimestampStream {
    /// Wraps records, checking order and the duration bound.
    pub fn new(records: Vec<Click>, duration: f64, seed: u64) -> Result<Self> {
        let limit = duration_ps(duration)?;
        if let Some(i) = records
            .windows(2)
            .position(|p| p[1].timestamp() < p[0].timestamp())
        {
            return Err(Error::Format {
                offset: i as u64 + 1,
                message: "timestamps decrease".into(),
            });
        }
        if let Some(last) = records.last() {
            if last.timestamp() >= limit {
                return Err(Error::domain(format!(
                    "timestamp {} ps not below duration {limit} ps",
                    last.timestamp()
                )));
            }
        }
        Ok(TimestampStream {
            records,
            duration,
            seed,
        })
    }

    pub fn records(&self) -> &[Click] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, channel: Channel) -> usize {
        self.records
            .iter()
            .filter(|c| c.channel() == channel)
            .count()
    }

    /// All timestamps, ps.
    pub fn timestamps(&self) -> Vec<u64> {
        self.records.iter().map(|c| c.timestamp()).collect()
    }

    /// Sub-stream of one channel.
    pub fn channel(&self, channel: Channel) -> TimestampStream {
        TimestampStream {
            records: self
                .records
                .iter()
                .copied()
                .filter(|c| c.channel() == channel)
                .collect(),
            duration: self.duration,
            seed: self.seed,
        }
    }

    /// Same records over a different acquisition time.
    pub fn with_duration(self, duration: f64) -> Result<Self> {
        TimestampStream::new(self.records, duration, self.seed)
    }

    /// Mean click rate, Hz.
    pub fn rate(&self) -> f64 {
        self.records.len() as f64 / self.duration
    }
}

pub(crate) fn duration_ps(duration: f64) -> Result<u64> {
    if !(duration > 0.0) || duration * PS_PER_S >= Click::MAX_TIMESTAMP as f64 {
        return Err(Error::domain(format!("duration {duration} s out of range")));
    }
    Ok((duration * PS_PER_S).round() as u64)
}

/// Pairwise-correlated noise photons emulating thermal bunching. For a noise
/// field alone, `g2(τ) = 1 + (factor − 1) exp(−|τ| / coherence_time)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalBunching {
    /// Zero-delay autocorrelation of the noise field, in [1, 2].
    pub factor: f64,
    /// s
    pub coherence_time: f64,
}

impl ThermalBunching {
    /// Rate of correlated doubles for a detected noise rate `rate`.
    pub fn double_rate(&self, rate: f64) -> Result<f64> {
        if !(self.factor >= 1.0 && self.coherence_time > 0.0) {
            return Err(Error::domain(format!(
                "bunching factor {} must be >= 1 and coherence time {} > 0",
                self.factor, self.coherence_time
            )));
        }
        let d = (self.factor - 1.0) * rate * rate * self.coherence_time;
        if 2.0 * d > rate {
            return Err(Error::domain(format!(
                "bunching factor {} unreachable at {rate} Hz with coherence time {} s",
                self.factor, self.coherence_time
            )));
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    /// s
    pub chunk_duration: f64,
    /// Upper bound on the expected number of clicks.
    pub max_events: u64,
    pub bunching: Option<ThermalBunching>,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            chunk_duration: 0.1,
            max_events: 500_000_000,
            bunching: None,
        }
    }
}

/// Inverse-CDF sampler over the binned waveform, uniform within a bin.
struct DelaySampler {
    cdf: Vec<f64>,
    origin: f64,
    bin_width: f64,
}

impl DelaySampler {
    fn new(w: &Waveform) -> Result<Self> {
        let mut acc = 0.0;
        let cdf: Vec<f64> = w
            .intensity
            .iter()
            .map(|&x| {
                if x < 0.0 || !x.is_finite() {
                    return f64::NAN;
                }
                acc += x;
                acc
            })
            .collect();
        if cdf.iter().any(|c| c.is_nan()) || !(acc > 0.0) {
            return Err(Error::Shape(
                "waveform must be non-negative with positive mass".into(),
            ));
        }
        Ok(DelaySampler {
            cdf: cdf.into_iter().map(|c| c / acc).collect(),
            origin: w.origin,
            bin_width: w.bin_width,
        })
    }

    /// Delay in seconds.
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let k = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1);
        let jitter: f64 = rng.random();
        self.origin + (k as f64 + jitter) * self.bin_width
    }
}

fn poisson_count<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean)
        .map(|p| p.sample(rng) as u64)
        .unwrap_or(0)
}

struct ChunkPlan<'a> {
    budget: &'a RateBudget,
    sampler: &'a DelaySampler,
    bunching: Option<ThermalBunching>,
    doubles: [f64; 2],
    chunk_ps: u64,
    end_ps: u64,
    seed: u64,
}

impl ChunkPlan<'_> {
    fn run(&self, index: usize) -> Vec<Click> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let start = index as u64 * self.chunk_ps;
        let end = (start + self.chunk_ps).min(self.end_ps);
        let len_s = (end - start) as f64 / PS_PER_S;
        let b = self.budget;
        let mut out = Vec::new();
        let mut push = |t: i64, ch: Channel| {
            if t >= 0 && (t as u64) < self.end_ps {
                out.push(Click::new(t as u64, ch));
            }
        };

        // Pairs: each photon detected independently.
        for _ in 0..poisson_count(&mut rng, b.pair_rate * len_s) {
            let t = rng.random_range(start..end) as i64;
            let s_hit = rng.random::<f64>() < b.eta_stokes;
            let as_hit = rng.random::<f64>() < b.eta_antistokes;
            let delay = self.sampler.sample(&mut rng);
            if s_hit {
                push(t, Channel::Stokes);
            }
            if as_hit {
                push(t + (delay * PS_PER_S).floor() as i64, Channel::AntiStokes);
            }
        }

        let noise = [
            (Channel::Stokes, b.eta_stokes * b.noise_stokes),
            (Channel::AntiStokes, b.eta_antistokes * b.noise_antistokes),
        ];
        for (i, (ch, rate)) in noise.into_iter().enumerate() {
            let doubles = self.doubles[i];
            for _ in 0..poisson_count(&mut rng, (rate - 2.0 * doubles) * len_s) {
                push(rng.random_range(start..end) as i64, ch);
            }
            if let Some(bunch) = self.bunching {
                let exp = Exp::new(1.0 / bunch.coherence_time).expect("positive coherence time");
                for _ in 0..poisson_count(&mut rng, doubles * len_s) {
                    let t = rng.random_range(start..end) as i64;
                    let gap: f64 = exp.sample(&mut rng);
                    push(t, ch);
                    push(t + (gap * PS_PER_S).floor() as i64, ch);
                }
            }
        }

        for (ch, rate) in [
            (Channel::Stokes, b.background_stokes),
            (Channel::AntiStokes, b.background_antistokes),
        ] {
            for _ in 0..poisson_count(&mut rng, rate * len_s) {
                push(rng.random_range(start..end) as i64, ch);
            }
        }
        out
    }
}

/// Simulates `duration` seconds of detector clicks with default options.
pub fn simulate_stream(
    b: &RateBudget,
    w: &Waveform,
    duration: f64,
    seed: u64,
) -> Result<TimestampStream> {
    simulate_stream_with(
        b,
        w,
        duration,
        seed,
        &SimulationOptions::default(),
        Exec::default(),
    )
}

pub fn simulate_stream_with(
    b: &RateBudget,
    w: &Waveform,
    duration: f64,
    seed: u64,
    opts: &SimulationOptions,
    exec: Exec,
) -> Result<TimestampStream> {
    b.validate()?;
    let end_ps = duration_ps(duration)?;
    if !(opts.chunk_duration > 0.0) {
        return Err(Error::domain("chunk duration must be positive"));
    }
    let (m_s, m_as) = forward_singles(b);
    let expected = ((m_s + m_as) * duration).ceil() as u64;
    if expected > opts.max_events {
        return Err(Error::Capacity {
            expected,
            cap: opts.max_events,
        });
    }
    let doubles = match opts.bunching {
        Some(bunch) => [
            bunch.double_rate(b.eta_stokes * b.noise_stokes)?,
            bunch.double_rate(b.eta_antistokes * b.noise_antistokes)?,
        ],
        None => [0.0, 0.0],
    };
    let sampler = DelaySampler::new(w)?;
    let chunk_ps = ((opts.chunk_duration * PS_PER_S).round() as u64).max(1);
    let n_chunks = end_ps.div_ceil(chunk_ps) as usize;
    let plan = ChunkPlan {
        budget: b,
        sampler: &sampler,
        bunching: opts.bunching,
        doubles,
        chunk_ps,
        end_ps,
        seed,
    };

    let chunks = exec.map_indexed(n_chunks, |i| plan.run(i));
    let mut records: Vec<Click> = Vec::with_capacity(chunks.iter().map(Vec::len).sum());
    for c in chunks {
        records.extend(c);
    }
    exec.sort_unstable(&mut records);
    Ok(TimestampStream {
        records,
        duration,
        seed,
    })
}

const SPLIT_BLOCK: usize = 1 << 16;

/// Routes every click to one of two outputs with probability 1/2 each
/// (50/50 beam splitter in front of two detectors).
pub fn hbt_split(s: &TimestampStream, seed: u64) -> (TimestampStream, TimestampStream) {
    hbt_split_with(s, seed, Exec::default())
}

pub fn hbt_split_with(
    s: &TimestampStream,
    seed: u64,
    exec: Exec,
) -> (TimestampStream, TimestampStream) {
    let blocks: Vec<&[Click]> = s.records.chunks(SPLIT_BLOCK).collect();
    let parts = exec.map_indexed(blocks.len(), |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let mut a = Vec::with_capacity(blocks[i].len() / 2 + 1);
        let mut b = Vec::with_capacity(blocks[i].len() / 2 + 1);
        for &c in blocks[i] {
            if rng.random::<bool>() {
                a.push(c);
            } else {
                b.push(c);
            }
        }
        (a, b)
    });
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (pa, pb) in parts {
        a.extend(pa);
        b.extend(pb);
    }
    let wrap = |records| TimestampStream {
        records,
        duration: s.duration,
        seed,
    };
    (wrap(a), wrap(b))
}
