//! Normalized second-order correlation histograms from timestamp streams.
//!
//! Every pair `(t_i ∈ s1, t_j ∈ s2)` with `τ = t_j − t_i` inside the range
//! is counted (all pairs, not start–stop). Bin `k` covers
//! `[tau_min + k·w, tau_min + (k+1)·w)`, so a delay on an edge lands in the
//! upper bin. All bin arithmetic is in integer picoseconds.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::biphoton::csv_err;
use crate::consts::PS_PER_S;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::montecarlo::{hbt_split_with, TimestampStream};

const BLOCK: usize = 1 << 15;

/// Bin layout of a correlation histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub tau_min_ps: i64,
    pub bin_width_ps: u64,
    pub bins: usize,
}

impl Grid {
    /// Bins covering `[-tau_range, tau_range)`, rounded up to whole bins.
    pub fn symmetric(bin_width: f64, tau_range: f64) -> Result<Self> {
        let w = bin_ps(bin_width)?;
        if !(tau_range > 0.0) {
            return Err(Error::domain(format!(
                "tau range {tau_range} s must be positive"
            )));
        }
        let range = (tau_range * PS_PER_S).round() as i64;
        let bins = (2 * range as u64).div_ceil(w).max(1) as usize;
        Ok(Grid {
            tau_min_ps: -range,
            bin_width_ps: w,
            bins,
        })
    }

    /// `2·half_bins + 1` bins with the middle one centered on zero delay
    /// (exactly centered for an even width in ps).
    pub fn centered(bin_width: f64, tau_range: f64) -> Result<Self> {
        let w = bin_ps(bin_width)?;
        let half_bins = ((tau_range * PS_PER_S) / w as f64).floor().max(0.0) as i64;
        Ok(Grid {
            tau_min_ps: -(half_bins * w as i64) - (w as i64) / 2,
            bin_width_ps: w,
            bins: 2 * half_bins as usize + 1,
        })
    }

    pub fn tau_max_ps(&self) -> i64 {
        self.tau_min_ps + (self.bins as u64 * self.bin_width_ps) as i64
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width_ps as f64 / PS_PER_S
    }

    /// Lower edge of bin `k`, s.
    pub fn edge(&self, k: usize) -> f64 {
        (self.tau_min_ps as f64 + (k as u64 * self.bin_width_ps) as f64) / PS_PER_S
    }

    pub fn center(&self, k: usize) -> f64 {
        self.edge(k) + 0.5 * self.bin_width()
    }

    /// Bin containing `tau` (s), if any.
    pub fn bin_of(&self, tau: f64) -> Option<usize> {
        let offset = tau * PS_PER_S - self.tau_min_ps as f64;
        if offset < 0.0 {
            return None;
        }
        let k = (offset / self.bin_width_ps as f64).floor() as usize;
        (k < self.bins).then_some(k)
    }
}

fn bin_ps(bin_width: f64) -> Result<u64> {
    let w = (bin_width * PS_PER_S).round();
    if !(w >= 1.0) {
        return Err(Error::domain(format!("bin width {bin_width} s below 1 ps")));
    }
    Ok(w as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub grid: Grid,
    pub counts: Vec<u64>,
    /// g2 per bin.
    pub normalized: Vec<f64>,
    /// Poisson error per bin.
    pub stderr: Vec<f64>,
    /// Mean rates of the two input streams, Hz.
    pub rates: (f64, f64),
    /// s
    pub duration: f64,
    /// True when either input stream had no clicks.
    pub empty: bool,
}

impl CorrelationHistogram {
    /// Normalizes raw counts. Zero-count bins get the error of one count.
    pub fn from_counts(
        grid: Grid,
        counts: Vec<u64>,
        n1: usize,
        n2: usize,
        duration: f64,
    ) -> Result<Self> {
        if counts.len() != grid.bins {
            return Err(Error::domain("count vector does not match grid"));
        }
        if !(duration > 0.0) {
            return Err(Error::domain(format!(
                "duration {duration} s must be positive"
            )));
        }
        let r1 = n1 as f64 / duration;
        let r2 = n2 as f64 / duration;
        let empty = n1 == 0 || n2 == 0;
        let scale = if empty {
            0.0
        } else {
            1.0 / (r1 * r2 * grid.bin_width() * duration)
        };
        let normalized: Vec<f64> = counts.iter().map(|&c| c as f64 * scale).collect();
        let stderr = counts
            .iter()
            .zip(&normalized)
            .map(|(&c, &g)| if c == 0 { scale } else { g / (c as f64).sqrt() })
            .collect();
        Ok(CorrelationHistogram {
            grid,
            counts,
            normalized,
            stderr,
            rates: (r1, r2),
            duration,
            empty,
        })
    }

    pub fn bin_width(&self) -> f64 {
        self.grid.bin_width()
    }

    pub fn tau_min(&self) -> f64 {
        self.grid.tau_min_ps as f64 / PS_PER_S
    }

    pub fn tau_max(&self) -> f64 {
        self.grid.tau_max_ps() as f64 / PS_PER_S
    }

    /// `(g2, stderr)` of the bin containing `tau`.
    pub fn g2_at(&self, tau: f64) -> Option<(f64, f64)> {
        self.grid
            .bin_of(tau)
            .map(|k| (self.normalized[k], self.stderr[k]))
    }

    /// Mean normalized value over bins lying entirely at `|τ| > min_abs_tau`,
    /// with its standard error.
    pub fn tail_mean(&self, min_abs_tau: f64) -> Option<(f64, f64)> {
        let w = self.bin_width();
        let tail: Vec<usize> = (0..self.grid.bins)
            .filter(|&k| {
                let lo = self.grid.edge(k);
                lo >= min_abs_tau || lo + w <= -min_abs_tau
            })
            .collect();
        if tail.is_empty() {
            return None;
        }
        // Pooled Poisson error of the summed counts.
        let n = tail.len() as f64;
        let mean = tail.iter().map(|&k| self.normalized[k]).sum::<f64>() / n;
        let total: u64 = tail.iter().map(|&k| self.counts[k]).sum();
        let err = if total == 0 {
            self.stderr[tail[0]] / n
        } else {
            mean / (total as f64).sqrt()
        };
        Some((mean, err))
    }

    /// Counts in `[start, start + width)`, apportioning partially covered
    /// bins by overlap fraction.
    pub fn window_counts(&self, start: f64, width: f64) -> f64 {
        let w = self.bin_width();
        let end = start + width;
        (0..self.grid.bins)
            .map(|k| {
                let lo = self.grid.edge(k);
                let overlap = (end.min(lo + w) - start.max(lo)).max(0.0);
                self.counts[k] as f64 * overlap / w
            })
            .sum()
    }

    /// Window-integrated correlation `(g2, stderr)` over `[start, start+width)`.
    pub fn window_g2(&self, start: f64, width: f64) -> Result<(f64, f64)> {
        if self.empty {
            return Err(Error::NoPeak { max_g2: 0.0 });
        }
        if !(width > 0.0) {
            return Err(Error::domain("window width must be positive"));
        }
        let c = self.window_counts(start, width);
        let g = c / (self.rates.0 * self.rates.1 * width * self.duration);
        let err = if c > 0.0 { g / c.sqrt() } else { f64::INFINITY };
        Ok((g, err))
    }

    /// Writes `tau_seconds,counts,g2,stderr` rows (bin centers).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau_seconds", "counts", "g2", "stderr"])
            .map_err(csv_err)?;
        for k in 0..self.grid.bins {
            w.write_record([
                format!("{:e}", self.grid.center(k)),
                self.counts[k].to_string(),
                format!("{}", self.normalized[k]),
                format!("{}", self.stderr[k]),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_sorted(ts: &[u64], which: &str) -> Result<()> {
    match ts.windows(2).position(|p| p[1] < p[0]) {
        Some(i) => Err(Error::Format {
            offset: i as u64 + 1,
            message: format!("{which} stream not time-sorted at record {}", i + 1),
        }),
        None => Ok(()),
    }
}

/// Raw pair counts for `t1[range]` against all of `t2`.
fn count_block(t1: &[u64], t2: &[u64], grid: &Grid) -> Vec<u64> {
    let mut counts = vec![0u64; grid.bins];
    let Some(&first) = t1.first() else {
        return counts;
    };
    let tmin = grid.tau_min_ps;
    let tmax = grid.tau_max_ps();
    let w = grid.bin_width_ps as i64;
    let mut lo = t2.partition_point(|&x| (x as i64) < first as i64 + tmin);
    for &ti in t1 {
        let ti = ti as i64;
        while lo < t2.len() && (t2[lo] as i64) < ti + tmin {
            lo += 1;
        }
        for &tj in &t2[lo..] {
            let tau = tj as i64 - ti;
            if tau >= tmax {
                break;
            }
            counts[((tau - tmin) / w) as usize] += 1;
        }
    }
    counts
}

/// Correlation histogram of `s2` relative to `s1` on a symmetric range.
pub fn cross_correlate(
    s1: &TimestampStream,
    s2: &TimestampStream,
    bin_width: f64,
    tau_range: f64,
) -> Result<CorrelationHistogram> {
    cross_correlate_grid(
        s1,
        s2,
        Grid::symmetric(bin_width, tau_range)?,
        Exec::default(),
    )
}

/// Correlation on an explicit grid. Work is split into fixed blocks of
/// `s1`; block histograms sum to the single-pass result exactly.
pub fn cross_correlate_grid(
    s1: &TimestampStream,
    s2: &TimestampStream,
    grid: Grid,
    exec: Exec,
) -> Result<CorrelationHistogram> {
    let t1 = s1.timestamps();
    let t2 = s2.timestamps();
    check_sorted(&t1, "first")?;
    check_sorted(&t2, "second")?;
    let duration = s1.duration.max(s2.duration);

    let blocks: Vec<&[u64]> = t1.chunks(BLOCK).collect();
    let partial = exec.map_indexed(blocks.len(), |i| count_block(blocks[i], &t2, &grid));
    let mut counts = vec![0u64; grid.bins];
    for p in partial {
        for (c, x) in counts.iter_mut().zip(p) {
            *c += x;
        }
    }
    CorrelationHistogram::from_counts(grid, counts, t1.len(), t2.len(), duration)
}

/// Autocorrelation through a simulated 50/50 split onto two detectors.
/// The grid has a bin centered on zero delay.
pub fn auto_correlate(
    s: &TimestampStream,
    bin_width: f64,
    tau_range: f64,
    seed: u64,
) -> Result<CorrelationHistogram> {
    auto_correlate_with(
        s,
        Grid::centered(bin_width, tau_range)?,
        seed,
        Exec::default(),
    )
}

pub fn auto_correlate_with(
    s: &TimestampStream,
    grid: Grid,
    seed: u64,
    exec: Exec,
) -> Result<CorrelationHistogram> {
    let (a, b) = hbt_split_with(s, seed, exec);
    cross_correlate_grid(&a, &b, grid, exec)
}

/// Peak of a cross-correlation histogram and its FWHM coincidence window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSummary {
    pub g2_peak: f64,
    /// s
    pub peak_tau: f64,
    /// FWHM of the excess `g2 − 1`, s.
    pub fwhm_window: f64,
    /// Start of the FWHM window, s.
    pub window_start: f64,
    /// Coincidence rate integrated over the FWHM window, Hz.
    pub coincidences_in_window: f64,
}

pub fn peak_and_window(h: &CorrelationHistogram) -> Result<PeakSummary> {
    let Some((p, &peak)) = h
        .normalized
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
    else {
        return Err(Error::NoPeak { max_g2: 0.0 });
    };
    if h.empty || !(peak > 1.0 + 5.0 * h.stderr[p]) {
        return Err(Error::NoPeak { max_g2: peak });
    }
    let excess: Vec<f64> = h.normalized.iter().map(|g| g - 1.0).collect();
    let half = 0.5 * excess[p];

    let mut l = p;
    while l > 0 && excess[l - 1] >= half {
        l -= 1;
    }
    let mut r = p;
    while r + 1 < excess.len() && excess[r + 1] >= half {
        r += 1;
    }
    // Crossing positions in bin-center units.
    let left = if l == 0 {
        0.0
    } else {
        (l - 1) as f64 + (half - excess[l - 1]) / (excess[l] - excess[l - 1])
    };
    let right = if r + 1 == excess.len() {
        r as f64
    } else {
        r as f64 + (excess[r] - half) / (excess[r] - excess[r + 1])
    };
    let w = h.bin_width();
    let start = h.grid.center(0) + left * w;
    let width = (right - left) * w;
    Ok(PeakSummary {
        g2_peak: peak,
        peak_tau: h.grid.center(p),
        fwhm_window: width,
        window_start: start,
        coincidences_in_window: h.window_counts(start, width) / h.duration,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{Channel, Click};
    use proptest::prelude::*;

    fn stream(ts: &[u64], ch: Channel, duration: f64) -> TimestampStream {
        let mut v: Vec<Click> = ts.iter().map(|&t| Click::new(t, ch)).collect();
        v.sort();
        TimestampStream::new(v, duration, 0).unwrap()
    }

    /// Brute-force all-pairs histogram.
    fn brute(t1: &[u64], t2: &[u64], g: &Grid) -> Vec<u64> {
        let mut c = vec![0; g.bins];
        for &a in t1 {
            for &b in t2 {
                let tau = b as i64 - a as i64;
                if tau >= g.tau_min_ps && tau < g.tau_max_ps() {
                    c[((tau - g.tau_min_ps) / g.bin_width_ps as i64) as usize] += 1;
                }
            }
        }
        c
    }

    #[test]
    fn shifted_copy_fills_one_bin() {
        let t1: Vec<u64> = (0..1000u64).map(|i| i * 1_000_000 + 17).collect();
        let t2: Vec<u64> = t1.iter().map(|t| t + 5000).collect();
        let h = cross_correlate(
            &stream(&t1, Channel::Stokes, 1e-3),
            &stream(&t2, Channel::AntiStokes, 1e-3),
            100e-12,
            20e-9,
        )
        .unwrap();
        let k = h.grid.bin_of(5e-9).unwrap();
        assert_eq!(h.counts[k], 1000);
        assert_eq!(h.counts.iter().sum::<u64>(), 1000);
        assert!((h.grid.edge(k) - 5e-9).abs() < 1e-18);
    }

    #[test]
    fn edge_delay_goes_to_upper_bin() {
        let g = Grid::symmetric(100e-12, 1e-9).unwrap();
        let h = cross_correlate_grid(
            &stream(&[1000], Channel::Stokes, 1e-6),
            &stream(&[1200], Channel::AntiStokes, 1e-6),
            g,
            Exec::Sequential,
        )
        .unwrap();
        assert_eq!(h.counts[g.bin_of(200e-12).unwrap()], 1);
        assert_eq!(g.edge(g.bin_of(200e-12).unwrap()), 200e-12);
    }

    #[test]
    fn unsorted_and_empty_inputs() {
        let good = stream(&[1, 2, 3], Channel::Stokes, 1e-9);
        let empty = stream(&[], Channel::AntiStokes, 1e-9);
        let h = cross_correlate(&good, &empty, 1e-12, 1e-11).unwrap();
        assert!(h.empty);
        assert!(h.normalized.iter().all(|&g| g == 0.0));
        assert!(matches!(peak_and_window(&h), Err(Error::NoPeak { .. })));
    }

    #[test]
    fn normalization_and_stderr_definitions() {
        let g = Grid::symmetric(1e-9, 5e-9).unwrap();
        let h = CorrelationHistogram::from_counts(
            g,
            vec![0, 4, 9, 16, 25, 36, 1, 0, 0, 2],
            1000,
            2000,
            10.0,
        )
        .unwrap();
        let (r1, r2) = (100.0, 200.0);
        for k in 0..g.bins {
            let expect = h.counts[k] as f64 / (r1 * r2 * 1e-9 * 10.0);
            assert!((h.normalized[k] - expect).abs() < 1e-9 * expect.max(1.0));
            if h.counts[k] > 0 {
                assert!((h.stderr[k] - h.normalized[k] / (h.counts[k] as f64).sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn triangle_peak_fwhm() {
        // Excess over 1 is a triangle of base 2 ns on a 50 ps grid.
        let g = Grid::symmetric(50e-12, 10e-9).unwrap();
        let (n1, n2, t) = (1_000_000usize, 1_000_000usize, 1.0);
        let unit = (n1 as f64) * (n2 as f64) * g.bin_width() / t;
        let base = 2e-9;
        let counts: Vec<u64> = (0..g.bins)
            .map(|k| {
                let x = g.center(k);
                let tri = (1.0 - (x / (0.5 * base)).abs()).max(0.0) * 400.0;
                (unit * (1.0 + tri)).round() as u64
            })
            .collect();
        let h = CorrelationHistogram::from_counts(g, counts, n1, n2, t).unwrap();
        let s = peak_and_window(&h).unwrap();
        assert!(
            (s.fwhm_window - base / 2.0).abs() <= g.bin_width(),
            "{}",
            s.fwhm_window
        );
        assert!(s.peak_tau.abs() <= g.bin_width());
    }

    #[test]
    fn flat_histogram_has_no_peak() {
        let g = Grid::symmetric(1e-9, 10e-9).unwrap();
        let h =
            CorrelationHistogram::from_counts(g, vec![100; g.bins], 10_000, 10_000, 1e-3).unwrap();
        assert!(matches!(peak_and_window(&h), Err(Error::NoPeak { .. })));
    }

    #[test]
    fn window_counts_apportion_partial_bins() {
        let g = Grid::symmetric(200e-12, 1e-9).unwrap();
        let h = CorrelationHistogram::from_counts(g, vec![10; g.bins], 100, 100, 1.0).unwrap();
        let c = h.window_counts(0.0, 2.916e-9);
        // Window clipped at tau_max = 1 ns: five full bins.
        assert!((c - 50.0).abs() < 1e-9);
        let c2 = h.window_counts(-0.1e-9, 0.5e-9);
        assert!((c2 - 25.0).abs() < 1e-9);
    }

    #[test]
    fn centered_grid_has_zero_bin() {
        let g = Grid::centered(486e-12, 10e-9).unwrap();
        let k = g.bin_of(0.0).unwrap();
        assert_eq!(k, g.bins / 2);
        assert!((g.center(k)).abs() < 1e-15);
    }

    #[test]
    fn periodic_stream_is_antibunched() {
        let ts: Vec<u64> = (0..100_000u64).map(|i| i * 100_000).collect();
        let s = stream(&ts, Channel::Stokes, 0.01);
        let h = auto_correlate(&s, 1e-9, 50e-9, 5).unwrap();
        assert_eq!(h.g2_at(0.0).unwrap().0, 0.0);
    }

    proptest! {
        #[test]
        fn matches_brute_force_and_parallel(
            mut a in proptest::collection::vec(0u64..2_000_000, 0..300),
            mut b in proptest::collection::vec(0u64..2_000_000, 0..300),
            w in 1u64..5000,
            range in 1u64..200_000,
        ) {
            a.sort();
            b.sort();
            let g = Grid::symmetric(w as f64 * 1e-12, range as f64 * 1e-12).unwrap();
            let s1 = stream(&a, Channel::Stokes, 2e-6);
            let s2 = stream(&b, Channel::AntiStokes, 2e-6);
            let seq = cross_correlate_grid(&s1, &s2, g, Exec::Sequential).unwrap();
            let par = cross_correlate_grid(&s1, &s2, g, Exec::Parallel).unwrap();
            prop_assert_eq!(&seq.counts, &brute(&a, &b, &g));
            prop_assert_eq!(seq, par);
        }

        #[test]
        fn swapping_streams_mirrors_tau(
            a in proptest::collection::vec(0u64..1_000_000, 1..200),
            b in proptest::collection::vec(0u64..1_000_000, 1..200),
            half_w in 1u64..500,
            nbins in 1u64..200,
        ) {
            // Even timestamps against odd ones with even edges: no delay
            // sits on a bin edge.
            let a: Vec<u64> = a.into_iter().map(|x| 2 * x).collect();
            let b: Vec<u64> = b.into_iter().map(|x| 2 * x + 1).collect();
            let w = 2 * half_w;
            let g = Grid { tau_min_ps: -((nbins * w) as i64), bin_width_ps: w, bins: 2 * nbins as usize };
            let s1 = stream(&a, Channel::Stokes, 3e-6);
            let s2 = stream(&b, Channel::AntiStokes, 3e-6);
            let fwd = cross_correlate_grid(&s1, &s2, g, Exec::Sequential).unwrap();
            let rev = cross_correlate_grid(&s2, &s1, g, Exec::Sequential).unwrap();
            let mirrored: Vec<u64> = rev.counts.iter().rev().copied().collect();
            prop_assert_eq!(fwd.counts, mirrored);
        }
    }
}
