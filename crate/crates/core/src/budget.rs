//! Singles/coincidence rate model of a photon-pair source with uncorrelated
//! noise and detector backgrounds, its inversion, and the derived
//! nonclassicality figures.
//!
//! Singles:
//!
//! ```text
//! M_S  = η_S (P + N_S) + B_S
//! M_AS = η_AS (P + N_AS) + B_AS
//! ```
//!
//! Coincidences within a window Δt, `C = C_sg + C_ns` with
//!
//! ```text
//! C_sg = η_S η_AS P
//! C_ns = (η_S η_AS (P N_S + P N_AS + N_S N_AS)
//!         + η_S (P + N_S) B_AS + η_AS (P + N_AS) B_S + B_S B_AS) Δt
//! ```
//!
//! Expanding shows `C_ns = Δt (M_S M_AS − η_S η_AS P²)`, i.e. the
//! accidentals are every singles product except the true pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noise attributed to the competing four-wave-mixing processes, as a
/// subset of the total channel noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompetingNoise {
    /// Hz
    pub stokes: f64,
    /// Hz
    pub antistokes: f64,
}

/// Source and detection rates of the pair model. Rates in Hz, window in s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateBudget {
    pub pair_rate: f64,
    pub noise_stokes: f64,
    pub noise_antistokes: f64,
    pub eta_stokes: f64,
    pub eta_antistokes: f64,
    pub background_stokes: f64,
    pub background_antistokes: f64,
    pub window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competing: Option<CompetingNoise>,
}

impl RateBudget {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pair rate", self.pair_rate),
            ("Stokes noise", self.noise_stokes),
            ("anti-Stokes noise", self.noise_antistokes),
            ("Stokes background", self.background_stokes),
            ("anti-Stokes background", self.background_antistokes),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::domain(format!(
                    "{name} must be a finite rate >= 0, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("Stokes efficiency", self.eta_stokes),
            ("anti-Stokes efficiency", self.eta_antistokes),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::domain(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(Error::domain(format!(
                "window must be positive, got {}",
                self.window
            )));
        }
        if let Some(c) = self.competing {
            if !(c.stokes >= 0.0 && c.stokes <= self.noise_stokes)
                || !(c.antistokes >= 0.0 && c.antistokes <= self.noise_antistokes)
            {
                return Err(Error::domain(
                    "competing-process noise must lie within the channel noise totals",
                ));
            }
        }
        Ok(())
    }

    /// Noise not explained by competing processes, `(N_S, N_AS)` residuals.
    pub fn residual_noise(&self) -> Option<(f64, f64)> {
        self.competing.map(|c| {
            (
                self.noise_stokes - c.stokes,
                self.noise_antistokes - c.antistokes,
            )
        })
    }

    fn eta_product(&self) -> f64 {
        self.eta_stokes * self.eta_antistokes
    }
}

/// Detected singles rates `(M_S, M_AS)`.
pub fn forward_singles(b: &RateBudget) -> (f64, f64) {
    let m_s = b.eta_stokes * (b.pair_rate + b.noise_stokes) + b.background_stokes;
    let m_as = b.eta_antistokes * (b.pair_rate + b.noise_antistokes) + b.background_antistokes;
    (m_s, m_as)
}

/// True-pair and accidental coincidence rates `(C_sg, C_ns)`.
pub fn forward_coincidences(b: &RateBudget) -> (f64, f64) {
    let p = b.pair_rate;
    let (ns, nas) = (b.noise_stokes, b.noise_antistokes);
    let (bs, bas) = (b.background_stokes, b.background_antistokes);
    let c_sg = b.eta_product() * p;
    let c_ns = (b.eta_product() * (p * ns + p * nas + ns * nas)
        + b.eta_stokes * (p + ns) * bas
        + b.eta_antistokes * (p + nas) * bs
        + bs * bas)
        * b.window;
    (c_sg, c_ns)
}

/// Zero-delay cross-correlation `1 + C_sg / C_ns`.
pub fn g2_peak(b: &RateBudget) -> Result<f64> {
    let (c_sg, c_ns) = forward_coincidences(b);
    if c_ns <= 0.0 {
        return Err(Error::Noiseless);
    }
    Ok(1.0 + c_sg / c_ns)
}

/// Measured rates fed to [`solve_budget`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredRates {
    pub singles_stokes: f64,
    pub singles_antistokes: f64,
    pub coincidences: f64,
    pub eta_stokes: f64,
    pub eta_antistokes: f64,
    pub background_stokes: f64,
    pub background_antistokes: f64,
    pub window: f64,
}

/// Solves the singles and coincidence equations for `(P, N_S, N_AS)`.
///
/// Substituting `N(P)` from the singles equations leaves a scalar equation
/// in `P` that is increasing on `[0, min((M − B)/η)]`; it is bisected to
/// machine precision.
pub fn solve_budget(m: &MeasuredRates) -> Result<RateBudget> {
    let probe = RateBudget {
        pair_rate: 0.0,
        noise_stokes: 0.0,
        noise_antistokes: 0.0,
        eta_stokes: m.eta_stokes,
        eta_antistokes: m.eta_antistokes,
        background_stokes: m.background_stokes,
        background_antistokes: m.background_antistokes,
        window: m.window,
        competing: None,
    };
    probe.validate()?;
    if !(m.singles_stokes > m.background_stokes)
        || !(m.singles_antistokes > m.background_antistokes)
    {
        return Err(Error::Infeasible(format!(
            "singles must exceed backgrounds (M_S={}, B_S={}, M_AS={}, B_AS={})",
            m.singles_stokes, m.background_stokes, m.singles_antistokes, m.background_antistokes
        )));
    }
    if !(m.coincidences > 0.0) {
        return Err(Error::InconsistentMeasurement(format!(
            "coincidence rate {} must be positive",
            m.coincidences
        )));
    }

    let total_s = (m.singles_stokes - m.background_stokes) / m.eta_stokes;
    let total_as = (m.singles_antistokes - m.background_antistokes) / m.eta_antistokes;
    let at = |p: f64| RateBudget {
        pair_rate: p,
        noise_stokes: (total_s - p).max(0.0),
        noise_antistokes: (total_as - p).max(0.0),
        ..probe
    };
    let excess = |p: f64| {
        let (sg, ns) = forward_coincidences(&at(p));
        sg + ns - m.coincidences
    };

    let p_max = total_s.min(total_as);
    if p_max >= 0.5 / m.window {
        return Err(Error::Infeasible(
            "pair rate bound exceeds 1/(2 window); coincidence equation not monotone".into(),
        ));
    }
    let floor = excess(0.0);
    if floor > 0.0 {
        return Err(Error::InconsistentMeasurement(format!(
            "coincidences {} Hz below the accidental floor {} Hz implied by singles",
            m.coincidences,
            floor + m.coincidences
        )));
    }
    if excess(p_max) < 0.0 {
        return Err(Error::Infeasible(format!(
            "coincidences {} Hz need a pair rate above the singles bound {p_max} Hz",
            m.coincidences
        )));
    }

    let (mut lo, mut hi) = (0.0f64, p_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = if excess(hi).abs() < excess(lo).abs() {
        hi
    } else {
        lo
    };
    Ok(at(p))
}

/// Cauchy–Schwarz violation factor `g2_cross² / (g2_ss g2_asas)`.
pub fn cs_violation(g2_cross: f64, g2_ss: f64, g2_asas: f64) -> Result<f64> {
    if !(g2_cross > 0.0 && g2_ss > 0.0 && g2_asas > 0.0) {
        return Err(Error::domain(format!(
            "correlation values must be positive ({g2_cross}, {g2_ss}, {g2_asas})"
        )));
    }
    Ok(g2_cross * g2_cross / (g2_ss * g2_asas))
}

/// Heralded anti-Stokes autocorrelation estimate `2 g2_asas / g2_cross`.
pub fn heralded_g2(g2_asas: f64, g2_cross: f64) -> Result<f64> {
    if !(g2_cross > 0.0) {
        return Err(Error::domain(format!(
            "g2_cross {g2_cross} must be positive"
        )));
    }
    Ok(2.0 * g2_asas / g2_cross)
}

/// Removes detector backgrounds from a measured cross-correlation peak by
/// rescaling its excess over 1.
pub fn background_correct(
    g2_raw: f64,
    singles_stokes: f64,
    singles_antistokes: f64,
    background_stokes: f64,
    background_antistokes: f64,
) -> Result<f64> {
    if !(g2_raw >= 1.0) {
        return Err(Error::domain(format!(
            "raw g2 {g2_raw} below the uncorrelated floor"
        )));
    }
    if !(singles_stokes > background_stokes) || !(singles_antistokes > background_antistokes) {
        return Err(Error::Infeasible("singles must exceed backgrounds".into()));
    }
    let scale = singles_stokes * singles_antistokes
        / ((singles_stokes - background_stokes) * (singles_antistokes - background_antistokes));
    Ok(1.0 + (g2_raw - 1.0) * scale)
}

/// Scales pair and noise generation with atom number and pump power;
/// backgrounds stay fixed.
pub fn scale_budget(b: &RateBudget, density_factor: f64, power_factor: f64) -> Result<RateBudget> {
    if !(density_factor > 0.0 && power_factor > 0.0) {
        return Err(Error::domain(format!(
            "scale factors must be positive ({density_factor}, {power_factor})"
        )));
    }
    let f = density_factor * power_factor;
    Ok(RateBudget {
        pair_rate: b.pair_rate * f,
        noise_stokes: b.noise_stokes * f,
        noise_antistokes: b.noise_antistokes * f,
        competing: b.competing.map(|c| CompetingNoise {
            stokes: c.stokes * f,
            antistokes: c.antistokes * f,
        }),
        ..*b
    })
}

/// Zero-delay correlation figures of a source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub g2_cross_peak: f64,
    pub g2_ss: f64,
    pub g2_asas: f64,
    pub cs_factor: f64,
    pub g2_heralded: f64,
}

impl CorrelationSummary {
    pub fn new(g2_cross_peak: f64, g2_ss: f64, g2_asas: f64) -> Result<Self> {
        Ok(CorrelationSummary {
            g2_cross_peak,
            g2_ss,
            g2_asas,
            cs_factor: cs_violation(g2_cross_peak, g2_ss, g2_asas)?,
            g2_heralded: heralded_g2(g2_asas, g2_cross_peak)?,
        })
    }
}
