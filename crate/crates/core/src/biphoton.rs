//! Biphoton temporal waveform: exponential wavepacket, Lorentzian filter
//! broadening, FWHM and the width ↔ bandwidth convention.

use std::f64::consts::{LN_2, PI};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized anti-Stokes arrival-time density relative to the Stokes
/// detection. Sample `k` sits at `origin + k * bin_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    /// s
    pub bin_width: f64,
    /// s
    pub origin: f64,
    /// Density, 1/s. `sum(intensity) * bin_width == 1`.
    pub intensity: Vec<f64>,
}

/// Lorentzian (Fabry-Pérot) frequency filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Hz
    pub lorentzian_fwhm: f64,
    pub peak_transmission: f64,
}

impl FilterSpec {
    pub fn new(lorentzian_fwhm: f64, peak_transmission: f64) -> Result<Self> {
        if !(lorentzian_fwhm > 0.0) {
            return Err(Error::domain(format!(
                "filter FWHM {lorentzian_fwhm} Hz must be positive"
            )));
        }
        if !(peak_transmission > 0.0 && peak_transmission <= 1.0) {
            return Err(Error::domain(format!(
                "filter transmission {peak_transmission} outside (0, 1]"
            )));
        }
        Ok(FilterSpec {
            lorentzian_fwhm,
            peak_transmission,
        })
    }

    /// Amplitude decay rate of the impulse response, 1/s.
    pub fn decay_rate(&self) -> f64 {
        PI * self.lorentzian_fwhm
    }
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.bin_width
    }

    /// Total probability, `sum(intensity) * bin_width`.
    pub fn norm(&self) -> f64 {
        self.intensity.iter().sum::<f64>() * self.bin_width
    }

    fn normalize(&mut self) -> Result<()> {
        let total = self.norm();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Shape("waveform has no positive mass".into()));
        }
        for v in &mut self.intensity {
            *v /= total;
        }
        Ok(())
    }

    /// Writes `tau_seconds,intensity_per_second` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau_seconds", "intensity_per_second"])
            .map_err(csv_err)?;
        for (k, v) in self.intensity.iter().enumerate() {
            w.write_record([format!("{:e}", self.time(k)), format!("{v:e}")])
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Exponential wavepacket `exp(-decay_rate τ)` for `τ >= 0`, sampled over
/// `[0, span]`.
pub fn ideal_waveform(decay_rate: f64, bin_width: f64, span: f64) -> Result<Waveform> {
    if !(decay_rate > 0.0 && bin_width > 0.0) {
        return Err(Error::domain(format!(
            "decay rate {decay_rate} and bin width {bin_width} must be positive"
        )));
    }
    if span * decay_rate < 10.0 {
        return Err(Error::Truncation(format!(
            "span {span} s shorter than 10 decay times ({} s)",
            10.0 / decay_rate
        )));
    }
    let n = (span / bin_width).ceil() as usize + 1;
    let step = (-decay_rate * bin_width).exp();
    let mut intensity = Vec::with_capacity(n);
    let mut v = decay_rate;
    for _ in 0..n {
        intensity.push(v);
        v *= step;
    }
    let mut w = Waveform {
        bin_width,
        origin: 0.0,
        intensity,
    };
    w.normalize()?;
    Ok(w)
}

/// Convolves with the one-sided exponential impulse response of a
/// Lorentzian filter and renormalizes. The grid is extended by twelve
/// filter time constants.
pub fn filter_impulse_convolve(w: &Waveform, f: &FilterSpec) -> Result<Waveform> {
    if !(w.bin_width * f.lorentzian_fwhm <= 0.1) {
        return Err(Error::Resolution(format!(
            "bin width {} s exceeds 0.1 / filter FWHM ({} s)",
            w.bin_width,
            0.1 / f.lorentzian_fwhm
        )));
    }
    let a = f.decay_rate();
    let step = (-a * w.bin_width).exp();
    let gain = a * w.bin_width;
    let extra = (12.0 / (a * w.bin_width)).ceil() as usize;

    let mut out = Vec::with_capacity(w.len() + extra);
    let mut acc = 0.0;
    for k in 0..w.len() + extra {
        let input = w.intensity.get(k).copied().unwrap_or(0.0);
        acc = acc * step + input * gain;
        out.push(acc);
    }
    let mut res = Waveform {
        bin_width: w.bin_width,
        origin: w.origin,
        intensity: out,
    };
    res.normalize()?;
    Ok(res)
}

/// Applies each filter in turn (one per filtered detection arm).
pub fn filter_all(w: &Waveform, filters: &[FilterSpec]) -> Result<Waveform> {
    filters
        .iter()
        .try_fold(w.clone(), |acc, f| filter_impulse_convolve(&acc, f))
}

/// Full width at half maximum with linear interpolation between samples.
/// A profile that starts (ends) above half maximum crosses at its first
/// (last) sample.
pub fn fwhm(w: &Waveform) -> Result<f64> {
    let v = &w.intensity;
    let (peak_idx, peak) =
        v.iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, x)| {
                if x > best.1 {
                    (i, x)
                } else {
                    best
                }
            });
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if v.is_empty() || !(peak > 0.0) || !peak.is_finite() || peak == min {
        return Err(Error::Shape("flat or empty profile".into()));
    }
    let half = 0.5 * peak;

    let mut l = peak_idx;
    while l > 0 && v[l - 1] >= half {
        l -= 1;
    }
    let mut r = peak_idx;
    while r + 1 < v.len() && v[r + 1] >= half {
        r += 1;
    }
    if v[..l].iter().chain(&v[r + 1..]).any(|&x| x >= half) {
        return Err(Error::Shape("multimodal profile".into()));
    }

    let left = if l == 0 {
        0.0
    } else {
        let (y0, y1) = (v[l - 1], v[l]);
        (l - 1) as f64 + (half - y0) / (y1 - y0)
    };
    let right = if r + 1 == v.len() {
        r as f64
    } else {
        let (y0, y1) = (v[r], v[r + 1]);
        r as f64 + (y0 - half) / (y0 - y1)
    };
    Ok((right - left) * w.bin_width)
}

/// Spectral bandwidth estimate `1 / FWHM`.
pub fn bandwidth_from_width(temporal_fwhm: f64) -> Result<f64> {
    if !(temporal_fwhm > 0.0) {
        return Err(Error::domain(format!(
            "width {temporal_fwhm} s must be positive"
        )));
    }
    Ok(1.0 / temporal_fwhm)
}

/// Inverse of [`bandwidth_from_width`].
pub fn width_from_bandwidth(bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::domain(format!(
            "bandwidth {bandwidth} Hz must be positive"
        )));
    }
    Ok(1.0 / bandwidth)
}

/// Filtered model waveform for a given wavepacket decay rate.
pub fn model_waveform(decay_rate: f64, filters: &[FilterSpec], bin_width: f64) -> Result<Waveform> {
    let span = 12.0 / decay_rate;
    filter_all(&ideal_waveform(decay_rate, bin_width, span)?, filters)
}

/// Finds the decay rate whose filtered waveform has bandwidth
/// `target_bandwidth` (Hz) under the `1/FWHM` convention.
pub fn fit_decay_rate(
    target_bandwidth: f64,
    filters: &[FilterSpec],
    bin_width: f64,
) -> Result<f64> {
    let target = width_from_bandwidth(target_bandwidth)?;
    // Filtering only broadens, so the bare exponential bounds the rate below.
    let lo_rate = LN_2 * target_bandwidth;
    let hi_rate = (1e3 * target_bandwidth).min(0.1 / bin_width);
    if hi_rate <= lo_rate {
        return Err(Error::Resolution(format!(
            "bin width {bin_width} s too coarse for bandwidth {target_bandwidth} Hz"
        )));
    }
    let width_at = |rate: f64| model_waveform(rate, filters, bin_width).and_then(|w| fwhm(&w));
    if width_at(hi_rate)? > target {
        return Err(Error::Infeasible(format!(
            "filters limit the bandwidth below {target_bandwidth} Hz"
        )));
    }
    let (mut lo, mut hi) = (lo_rate.ln(), hi_rate.ln());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if width_at(mid.exp())? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}
