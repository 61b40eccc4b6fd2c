//! Rubidium vapor: number density, Doppler width, optical depth and
//! resonant absorption.
//!
//! Vapor pressure uses the liquid-phase rubidium correlation
//!
//! ```text
//! log10(P / torr) = 15.88253 - 4529.635 / T + 0.00058663 T - 2.99138 log10(T)
//! ```
//!
//! (Steck, "Rubidium 87 D Line Data"; Nesmeyanov). It is applied over the
//! whole 250–500 K range, including below the 312.46 K melting point where
//! it slightly overestimates the solid-phase pressure.

use serde::{Deserialize, Serialize};

use crate::consts::{BOLTZMANN, RB87_D1_FREQUENCY, RB87_MASS, SPEED_OF_LIGHT, TORR};
use crate::error::{Error, Result};

/// Lowest temperature accepted by [`vapor_density`], K.
pub const MIN_TEMPERATURE: f64 = 250.0;
/// Highest temperature accepted by [`vapor_density`], K.
pub const MAX_TEMPERATURE: f64 = 500.0;

const VP_A: f64 = 15.882_53;
const VP_B: f64 = 4529.635;
const VP_C: f64 = 0.000_586_63;
const VP_D: f64 = 2.991_38;

/// Default calibrated resonant optical depth of the source cell.
pub const DEFAULT_OD: f64 = 3.4;
/// Cell length the default optical depth refers to, m.
pub const DEFAULT_REFERENCE_PATH: f64 = 0.075;

/// Thermodynamic state of the source cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaporState {
    /// K
    pub temperature: f64,
    /// atoms / m³
    pub density: f64,
    /// 1σ Doppler width of the D1 line, Hz
    pub doppler_sigma: f64,
    /// Resonant optical depth over `reference_path`.
    pub od_resonant: f64,
    /// m
    pub reference_path: f64,
}

impl VaporState {
    /// Builds the state of an ⁸⁷Rb cell at `temperature` with a calibrated
    /// resonant optical depth.
    pub fn rb87(temperature: f64, od_resonant: f64, reference_path: f64) -> Result<Self> {
        if !(od_resonant >= 0.0) {
            return Err(Error::domain(format!("optical depth {od_resonant} < 0")));
        }
        if !(reference_path > 0.0) {
            return Err(Error::domain(format!(
                "reference path {reference_path} m must be positive"
            )));
        }
        Ok(VaporState {
            temperature,
            density: vapor_density(temperature)?,
            doppler_sigma: doppler_sigma(temperature, RB87_D1_FREQUENCY, RB87_MASS)?,
            od_resonant,
            reference_path,
        })
    }

    /// Same cell at another temperature. The optical depth follows the
    /// number density.
    pub fn at_temperature(&self, temperature: f64) -> Result<Self> {
        let density = vapor_density(temperature)?;
        Ok(VaporState {
            temperature,
            density,
            doppler_sigma: self.doppler_sigma * (temperature / self.temperature).sqrt(),
            od_resonant: self.od_resonant * density / self.density,
            reference_path: self.reference_path,
        })
    }

    pub fn with_od(&self, od_resonant: f64) -> Self {
        VaporState {
            od_resonant,
            ..*self
        }
    }
}

/// Saturated rubidium vapor pressure in Pa.
pub fn vapor_pressure(temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    let t = temperature;
    let log_torr = VP_A - VP_B / t + VP_C * t - VP_D * t.log10();
    Ok(10f64.powf(log_torr) * TORR)
}

/// Number density of saturated rubidium vapor, m⁻³.
pub fn vapor_density(temperature: f64) -> Result<f64> {
    Ok(vapor_pressure(temperature)? / (BOLTZMANN * temperature))
}

fn check_temperature(t: f64) -> Result<()> {
    if (MIN_TEMPERATURE..=MAX_TEMPERATURE).contains(&t) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "temperature {t} K outside vapor-pressure validity range \
             [{MIN_TEMPERATURE}, {MAX_TEMPERATURE}] K"
        )))
    }
}

/// 1σ width of the one-dimensional Doppler profile, Hz.
pub fn doppler_sigma(temperature: f64, line_frequency: f64, atomic_mass: f64) -> Result<f64> {
    if !(temperature > 0.0 && line_frequency > 0.0 && atomic_mass > 0.0) {
        return Err(Error::domain(format!(
            "doppler width needs positive inputs (T={temperature}, \
             nu={line_frequency}, m={atomic_mass})"
        )));
    }
    let c2 = SPEED_OF_LIGHT * SPEED_OF_LIGHT;
    Ok(line_frequency * (BOLTZMANN * temperature / (atomic_mass * c2)).sqrt())
}

/// Resonant optical depth over `path_length`.
pub fn scaled_od(state: &VaporState, path_length: f64) -> Result<f64> {
    if !(path_length >= 0.0) {
        return Err(Error::domain(format!("path length {path_length} m < 0")));
    }
    Ok(state.od_resonant * (path_length / state.reference_path))
}

/// Transmission through a Doppler-broadened Gaussian absorption line with
/// peak optical depth `od`, at `detuning` from line center.
pub fn line_transmission(od: f64, detuning: f64, doppler_sigma: f64) -> Result<f64> {
    if !(od >= 0.0) {
        return Err(Error::domain(format!("optical depth {od} < 0")));
    }
    if !(doppler_sigma > 0.0) {
        return Err(Error::domain(format!(
            "doppler sigma {doppler_sigma} must be positive"
        )));
    }
    let x = detuning / doppler_sigma;
    Ok((-od * (-0.5 * x * x).exp()).exp())
}
