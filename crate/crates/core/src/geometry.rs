//! Excitation/detection beam geometry and the displacement model.
//!
//! The longitudinal distribution of contributing atoms is a unit-normalized
//! Gaussian centered on the interaction area, with FWHM equal to the
//! geometric overlap length. Displacement `z` places the cell output
//! viewport at `z`: atoms at `s < z` are inside the cell, and anti-Stokes
//! photons emitted at `s` cross `z - s` of vapor before leaving it.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::consts::SPEED_OF_LIGHT;
use crate::error::{Error, Result};
use crate::vapor::{scaled_od, VaporState};

/// Default number of quadrature intervals for [`antistokes_mean_transmission`].
pub const DEFAULT_QUADRATURE_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamGeometry {
    /// Angle between excitation and detection modes, rad.
    pub crossing_angle: f64,
    /// Excitation beam diameter 2w_l, m.
    pub excitation_diameter: f64,
    /// Detection mode diameter, m.
    pub detection_diameter: f64,
    /// Stokes/anti-Stokes frequency splitting, Hz.
    pub stokes_antistokes_splitting: f64,
    /// Gaussian detection-mode waist at the interaction region, m.
    pub waist: f64,
    /// m
    pub cell_length: f64,
    /// Viewport position relative to the interaction-area center, m.
    pub displacement_z: f64,
}

impl BeamGeometry {
    /// Checks the type invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.crossing_angle > 0.0 && self.crossing_angle < PI / 2.0) {
            return Err(Error::domain(format!(
                "crossing angle {} rad outside (0, pi/2)",
                self.crossing_angle
            )));
        }
        for (name, v) in [
            ("excitation diameter", self.excitation_diameter),
            ("detection diameter", self.detection_diameter),
            ("splitting", self.stokes_antistokes_splitting),
            ("waist", self.waist),
            ("cell length", self.cell_length),
        ] {
            if !(v > 0.0) {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.displacement_z.is_finite() {
            return Err(Error::domain("displacement must be finite"));
        }
        Ok(())
    }

    pub fn interaction_length(&self) -> Result<f64> {
        overlap_length(
            self.crossing_angle,
            self.excitation_diameter,
            self.detection_diameter,
        )
    }

    pub fn phase_mismatch_length(&self) -> Result<f64> {
        phase_mismatch_length(self.stokes_antistokes_splitting)
    }

    /// True when the overlap length does not exceed the π phase-mismatch
    /// length (with 1e-9 relative slack).
    pub fn is_phase_matched(&self) -> Result<bool> {
        let l = self.interaction_length()?;
        let d = self.phase_mismatch_length()?;
        Ok(l <= d * (1.0 + 1e-9))
    }

    /// The crossing angle at which the overlap equals the phase-mismatch
    /// length.
    pub fn optimal_angle(&self) -> Result<f64> {
        optimal_angle(
            self.excitation_diameter,
            self.detection_diameter,
            self.phase_mismatch_length()?,
        )
    }
}

/// Propagation length over which the Stokes/anti-Stokes splitting
/// accumulates a phase error of π, `c / (2 Δν)`.
pub fn phase_mismatch_length(splitting: f64) -> Result<f64> {
    if !(splitting > 0.0) {
        return Err(Error::domain(format!(
            "splitting {splitting} Hz must be positive"
        )));
    }
    Ok(SPEED_OF_LIGHT / (2.0 * splitting))
}

/// Length over which two beams of the given diameters overlap when crossing
/// at `angle`.
pub fn overlap_length(
    angle: f64,
    excitation_diameter: f64,
    detection_diameter: f64,
) -> Result<f64> {
    if !(angle > 0.0 && angle <= PI / 2.0) {
        return Err(Error::domain(format!(
            "angle {angle} rad outside (0, pi/2]"
        )));
    }
    Ok((excitation_diameter + detection_diameter) / angle.sin())
}

/// Crossing angle whose overlap length equals `phase_length`.
pub fn optimal_angle(
    excitation_diameter: f64,
    detection_diameter: f64,
    phase_length: f64,
) -> Result<f64> {
    let width = excitation_diameter + detection_diameter;
    if !(width < phase_length) {
        return Err(Error::Infeasible(format!(
            "beam diameters sum {width} m >= phase-mismatch length {phase_length} m"
        )));
    }
    Ok((width / phase_length).asin())
}

fn sigma_from_fwhm(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * 2f64.ln()).sqrt())
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Fraction of the interaction-area atoms that lie inside the cell when the
/// viewport sits at `z`.
pub fn effective_atom_fraction(z: f64, interaction_length: f64) -> Result<f64> {
    if !(interaction_length > 0.0) {
        return Err(Error::domain(format!(
            "interaction length {interaction_length} m must be positive"
        )));
    }
    Ok(std_normal_cdf(z / sigma_from_fwhm(interaction_length)))
}

/// Mean anti-Stokes transmission to the viewport, averaged over the in-cell
/// emitters. Composite Simpson rule with `intervals` panels.
pub fn antistokes_mean_transmission(
    z: f64,
    interaction_length: f64,
    vapor: &VaporState,
    intervals: usize,
) -> Result<f64> {
    if !(interaction_length > 0.0) {
        return Err(Error::domain(format!(
            "interaction length {interaction_length} m must be positive"
        )));
    }
    if intervals < 2 {
        return Err(Error::domain("quadrature needs at least 2 intervals"));
    }
    let sigma = sigma_from_fwhm(interaction_length);
    // Attenuation per unit length.
    let k = scaled_od(vapor, 1.0)?;
    if k == 0.0 {
        return Ok(1.0);
    }
    let mut lower = z.min(0.0) - 10.0 * sigma;
    lower = lower.max(z - 60.0 / k);
    if z < 0.0 {
        // Weight falls by e^-40 within 40σ²/|z| below z.
        lower = lower.max(z - 40.0 * sigma * sigma / -z);
    }
    // Weights are taken relative to their maximum on [lower, z].
    let x_ref = z.min(0.0) / sigma;
    let n = intervals + intervals % 2;
    let h = (z - lower) / n as f64;
    if h <= 0.0 {
        return Ok(1.0);
    }

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..=n {
        let s = lower + i as f64 * h;
        let wgt = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let x = s / sigma;
        let density = (-0.5 * (x * x - x_ref * x_ref)).exp();
        den += wgt * density;
        num += wgt * density * (-k * (z - s)).exp();
    }
    Ok((num / den).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn phase_mismatch_examples() {
        let d = phase_mismatch_length(13.6e9).unwrap();
        assert!((d - 11.0e-3).abs() < 0.1e-3, "{d}");
        let d2 = phase_mismatch_length(6.8e9).unwrap();
        assert!((d2 - 0.022_043_563_088_235_293).abs() < 1e-15);
        assert!((phase_mismatch_length(27.2e9).unwrap() * 2.0 - d).abs() < 1e-15);
        assert!(phase_mismatch_length(0.0).is_err());
        assert!(phase_mismatch_length(-1.0).is_err());
    }

    #[test]
    fn overlap_examples() {
        let l = overlap_length(deg(1.6), 0.35e-3, 0.1e-3).unwrap();
        assert!((l - 16.1e-3).abs() < 0.05e-3, "{l}");
        let l90 = overlap_length(deg(90.0), 0.35e-3, 0.1e-3).unwrap();
        assert!((l90 - 0.45e-3).abs() < 1e-15);
        let l23 = overlap_length(deg(2.3), 0.35e-3, 0.1e-3).unwrap();
        assert!((l23 - 0.011_213_055_076_842_28).abs() < 1e-12);
        assert!(overlap_length(0.0, 1.0, 1.0).is_err());
        assert!(overlap_length(deg(91.0), 1.0, 1.0).is_err());
    }

    #[test]
    fn optimal_angle_examples() {
        let a = optimal_angle(0.35e-3, 0.1e-3, 11e-3).unwrap();
        assert!((a.to_degrees() - 2.344_572_524_510_762_7).abs() < 1e-9);
        assert!(matches!(
            optimal_angle(6e-3, 6e-3, 11e-3),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn atom_fraction_examples() {
        let l = 16e-3;
        assert!((effective_atom_fraction(0.0, l).unwrap() - 0.5).abs() < 1e-15);
        assert!(effective_atom_fraction(1.0, l).unwrap() > 1.0 - 1e-12);
        // Gaussian tail oracle: Phi(-2 sqrt(2 ln 2)) = 0.009265838875599525.
        let tail = effective_atom_fraction(-l, l).unwrap();
        assert!((tail - 0.009_265_838_875_599_525).abs() < 1e-12);
        assert!(tail < 0.01);
        assert!(effective_atom_fraction(0.0, 0.0).is_err());
    }

    /// Exponentially modified Gaussian: closed form of the transmission
    /// integral over s in (-inf, z].
    fn transmission_oracle(z: f64, l: f64, k: f64) -> f64 {
        let sigma = sigma_from_fwhm(l);
        let a = (0.5 * k * k * sigma * sigma - k * z).exp();
        a * std_normal_cdf((z - k * sigma * sigma) / sigma) / std_normal_cdf(z / sigma)
    }

    fn cell(od: f64) -> VaporState {
        VaporState::rb87(315.15, od, 0.075).unwrap()
    }

    #[test]
    fn transmission_matches_closed_form() {
        let l = 16e-3;
        let v = cell(3.4);
        let k = 3.4 / 0.075;
        for z in [-16e-3, -5e-3, 0.0, 3e-3, 7e-3, 20e-3] {
            let q = antistokes_mean_transmission(z, l, &v, DEFAULT_QUADRATURE_INTERVALS).unwrap();
            let o = transmission_oracle(z, l, k);
            assert!((q - o).abs() < 1e-9, "z={z}: {q} vs {o}");
        }
        // Values from an independent scipy quad evaluation.
        let t0 = antistokes_mean_transmission(0.0, l, &v, DEFAULT_QUADRATURE_INTERVALS).unwrap();
        let t7 = antistokes_mean_transmission(7e-3, l, &v, DEFAULT_QUADRATURE_INTERVALS).unwrap();
        assert!((t0 - 0.794_894_650_968_297_6).abs() < 1e-9);
        assert!((t7 - 0.688_214_421_420_291_2).abs() < 1e-9);
        assert!(t7 < t0);
    }

    #[test]
    fn transmission_limits() {
        let l = 16e-3;
        let clear = cell(0.0);
        for z in [-0.02, 0.0, 0.01] {
            assert_eq!(
                antistokes_mean_transmission(z, l, &clear, 100).unwrap(),
                1.0
            );
        }
        let v = cell(3.4);
        let at_minus_l =
            antistokes_mean_transmission(-l, l, &v, DEFAULT_QUADRATURE_INTERVALS).unwrap();
        assert!((at_minus_l - 0.905_541_167_091_553_1).abs() < 1e-9);
        // Far outside the cell the mean tends to |z|/(|z| + kσ²).
        let sigma = l / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        let k = 3.4 / 0.075;
        let mut prev = at_minus_l;
        for m in [5.0, 10.0, 40.0] {
            let z = -m * l;
            let t = antistokes_mean_transmission(z, l, &v, DEFAULT_QUADRATURE_INTERVALS).unwrap();
            let asymptote = z.abs() / (z.abs() + k * sigma * sigma);
            assert!(t > prev, "{t}");
            assert!((t - asymptote).abs() < 2e-3 / m, "{t} vs {asymptote}");
            prev = t;
        }
    }

    #[test]
    fn geometry_struct_helpers() {
        let g = BeamGeometry {
            crossing_angle: deg(1.6),
            excitation_diameter: 0.35e-3,
            detection_diameter: 0.1e-3,
            stokes_antistokes_splitting: 13.6e9,
            waist: 290e-6,
            cell_length: 0.075,
            displacement_z: 0.0,
        };
        g.validate().unwrap();
        assert!(!g.is_phase_matched().unwrap());
        let opt = BeamGeometry {
            crossing_angle: g.optimal_angle().unwrap(),
            ..g
        };
        assert!(opt.is_phase_matched().unwrap());
        assert!(BeamGeometry {
            crossing_angle: 2.0,
            ..g
        }
        .validate()
        .is_err());
        assert!(BeamGeometry { waist: 0.0, ..g }.validate().is_err());
    }

    proptest! {
        #[test]
        fn optimal_angle_round_trip(a in 1e-5f64..1e-3, b in 1e-5f64..1e-3, extra in 1.01f64..100.0) {
            let d = (a + b) * extra;
            let theta = optimal_angle(a, b, d).unwrap();
            let l = overlap_length(theta, a, b).unwrap();
            prop_assert!((l / d - 1.0).abs() < 1e-9);
        }

        #[test]
        fn overlap_times_sine_constant(theta in 1e-4f64..1.5, a in 1e-5f64..1e-3) {
            let l = overlap_length(theta, a, 1e-4).unwrap();
            prop_assert!((l * theta.sin() / (a + 1e-4) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn atom_fraction_monotone_bounded(z in -0.1f64..0.1, dz in 0.0f64..0.05, l in 1e-3f64..0.05) {
            let f = effective_atom_fraction(z, l).unwrap();
            let g = effective_atom_fraction(z + dz, l).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(g >= f);
        }

        #[test]
        fn transmission_monotone(z in -0.02f64..0.02, dz in 0.0f64..0.01, od in 0.0f64..10.0, dod in 0.0f64..5.0) {
            let l = 16e-3;
            let n = 2000;
            let t = antistokes_mean_transmission(z, l, &cell(od), n).unwrap();
            let tz = antistokes_mean_transmission(z + dz, l, &cell(od), n).unwrap();
            let tod = antistokes_mean_transmission(z, l, &cell(od + dod), n).unwrap();
            prop_assert!(tz <= t + 1e-9);
            prop_assert!(tod <= t + 1e-9);
            prop_assert!((0.0..=1.0).contains(&t));
        }
    }
}
