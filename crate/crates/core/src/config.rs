//! JSON experiment configuration. Units are part of every key name and
//! unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::biphoton::{
    bandwidth_from_width, fit_decay_rate, fwhm, model_waveform, FilterSpec, Waveform,
};
use crate::budget::{CompetingNoise, RateBudget};
use crate::consts::ZERO_CELSIUS;
use crate::error::{Error, Result};
use crate::geometry::BeamGeometry;
use crate::montecarlo::{SimulationOptions, ThermalBunching};
use crate::vapor::VaporState;

const DEFAULT_WAVEFORM_BIN_PS: f64 = 10.0;
const DEFAULT_WAIST_M: f64 = 290e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub vapor: VaporConfig,
    pub geometry: GeometryConfig,
    pub budget: BudgetConfig,
    pub waveform: WaveformConfig,
    #[serde(default)]
    pub filters: FiltersConfig,
    pub simulation: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VaporConfig {
    #[serde(rename = "temperature_C")]
    pub temperature_c: f64,
    pub od_resonant: f64,
    pub reference_path_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub angle_deg: f64,
    pub excitation_diameter_m: f64,
    pub detection_diameter_m: f64,
    pub splitting_hz: f64,
    pub displacement_mm: f64,
    pub cell_length_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waist_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    /// Pair rate at the operating point. Mutually exclusive with
    /// `pair_rate_hz_per_mw`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_rate_hz: Option<f64>,
    /// Pump power at which the noise rates (and `pair_rate_hz`) apply.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pump_power_mw: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_rate_hz_per_mw: Option<f64>,
    /// Powers below this are flagged outside model validity in sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low_power_cutoff_mw: Option<f64>,
    pub noise_stokes_hz: f64,
    pub noise_antistokes_hz: f64,
    pub eta_stokes: f64,
    pub eta_antistokes: f64,
    pub background_stokes_hz: f64,
    pub background_antistokes_hz: f64,
    pub window_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competing_stokes_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub competing_antistokes_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_bandwidth_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_ps: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltersConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stokes_fwhm_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antistokes_fwhm_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stokes_transmission: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub antistokes_transmission: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub duration_s: f64,
    pub seed: u64,
    pub bin_ps: f64,
    pub tau_range_ns: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bunching_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence_time_ns: Option<f64>,
}

impl ExperimentConfig {
    /// Operating point of the 42 °C, 30 mW measurement.
    pub fn reference() -> Self {
        ExperimentConfig {
            vapor: VaporConfig {
                temperature_c: 42.0,
                od_resonant: 3.4,
                reference_path_m: 0.075,
            },
            geometry: GeometryConfig {
                angle_deg: 1.6,
                excitation_diameter_m: 0.35e-3,
                detection_diameter_m: 0.1e-3,
                splitting_hz: 13.6e9,
                displacement_mm: 0.0,
                cell_length_m: 0.075,
                waist_m: Some(DEFAULT_WAIST_M),
            },
            budget: BudgetConfig {
                pair_rate_hz: Some(383.0),
                pump_power_mw: Some(30.0),
                pair_rate_hz_per_mw: None,
                low_power_cutoff_mw: Some(2.0),
                noise_stokes_hz: 35e3,
                noise_antistokes_hz: 33e3,
                eta_stokes: 0.21,
                eta_antistokes: 0.22,
                background_stokes_hz: 200.0,
                background_antistokes_hz: 2200.0,
                window_ns: 2.916,
                competing_stokes_hz: Some(31e3),
                competing_antistokes_hz: Some(25e3),
            },
            waveform: WaveformConfig {
                decay_rate_hz: None,
                target_bandwidth_mhz: Some(370.0),
                bin_ps: None,
            },
            filters: FiltersConfig {
                stokes_fwhm_mhz: Some(896.0),
                antistokes_fwhm_mhz: Some(896.0),
                stokes_transmission: Some(0.62),
                antistokes_transmission: Some(0.71),
            },
            simulation: SimulationConfig {
                duration_s: 60.0,
                seed: 1,
                bin_ps: 200.0,
                tau_range_ns: 50.0,
                chunk_s: None,
                max_events: None,
                bunching_factor: None,
                coherence_time_ns: None,
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.budget;
        match (b.pair_rate_hz, b.pair_rate_hz_per_mw, b.pump_power_mw) {
            (Some(_), None, _) | (None, Some(_), Some(_)) => {}
            (Some(_), Some(_), _) => {
                return Err(Error::Config(
                    "give either pair_rate_hz or pair_rate_hz_per_mw, not both".into(),
                ))
            }
            (None, Some(_), None) => {
                return Err(Error::Config(
                    "pair_rate_hz_per_mw needs pump_power_mw".into(),
                ))
            }
            (None, None, _) => {
                return Err(Error::Config(
                    "budget needs pair_rate_hz or pair_rate_hz_per_mw".into(),
                ))
            }
        }
        if let Some(p) = b.pump_power_mw {
            if !(p > 0.0) {
                return Err(Error::Config(format!("pump_power_mw {p} must be positive")));
            }
        }
        if b.competing_stokes_hz.is_some() != b.competing_antistokes_hz.is_some() {
            return Err(Error::Config(
                "competing_stokes_hz and competing_antistokes_hz go together".into(),
            ));
        }
        match (
            self.waveform.decay_rate_hz,
            self.waveform.target_bandwidth_mhz,
        ) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "waveform needs exactly one of decay_rate_hz, target_bandwidth_mhz".into(),
                ))
            }
        }
        let s = &self.simulation;
        if !(s.duration_s > 0.0 && s.bin_ps >= 1.0 && s.tau_range_ns > 0.0) {
            return Err(Error::Config(
                "simulation needs duration_s > 0, bin_ps >= 1, tau_range_ns > 0".into(),
            ));
        }
        if s.bunching_factor.is_some() != s.coherence_time_ns.is_some() {
            return Err(Error::Config(
                "bunching_factor and coherence_time_ns go together".into(),
            ));
        }
        self.vapor_state()?;
        self.beam_geometry()?.validate()?;
        self.rate_budget()?.validate()?;
        self.filter_specs()?;
        Ok(())
    }

    pub fn temperature_k(&self) -> f64 {
        self.vapor.temperature_c + ZERO_CELSIUS
    }

    pub fn vapor_state(&self) -> Result<VaporState> {
        VaporState::rb87(
            self.temperature_k(),
            self.vapor.od_resonant,
            self.vapor.reference_path_m,
        )
    }

    pub fn beam_geometry(&self) -> Result<BeamGeometry> {
        let g = &self.geometry;
        let geom = BeamGeometry {
            crossing_angle: g.angle_deg.to_radians(),
            excitation_diameter: g.excitation_diameter_m,
            detection_diameter: g.detection_diameter_m,
            stokes_antistokes_splitting: g.splitting_hz,
            waist: g.waist_m.unwrap_or(DEFAULT_WAIST_M),
            cell_length: g.cell_length_m,
            displacement_z: g.displacement_mm * 1e-3,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn pair_rate(&self) -> f64 {
        let b = &self.budget;
        b.pair_rate_hz.unwrap_or_else(|| {
            b.pair_rate_hz_per_mw.unwrap_or(0.0) * b.pump_power_mw.unwrap_or(0.0)
        })
    }

    /// Budget at the configured operating point.
    pub fn rate_budget(&self) -> Result<RateBudget> {
        let b = &self.budget;
        let budget = RateBudget {
            pair_rate: self.pair_rate(),
            noise_stokes: b.noise_stokes_hz,
            noise_antistokes: b.noise_antistokes_hz,
            eta_stokes: b.eta_stokes,
            eta_antistokes: b.eta_antistokes,
            background_stokes: b.background_stokes_hz,
            background_antistokes: b.background_antistokes_hz,
            window: b.window_ns * 1e-9,
            competing: b
                .competing_stokes_hz
                .zip(b.competing_antistokes_hz)
                .map(|(stokes, antistokes)| CompetingNoise { stokes, antistokes }),
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn filter_specs(&self) -> Result<Vec<FilterSpec>> {
        let f = &self.filters;
        [
            (f.stokes_fwhm_mhz, f.stokes_transmission),
            (f.antistokes_fwhm_mhz, f.antistokes_transmission),
        ]
        .into_iter()
        .filter_map(|(w, t)| w.map(|w| FilterSpec::new(w * 1e6, t.unwrap_or(1.0))))
        .collect()
    }

    pub fn waveform_bin(&self) -> f64 {
        self.waveform.bin_ps.unwrap_or(DEFAULT_WAVEFORM_BIN_PS) * 1e-12
    }

    pub fn decay_rate(&self) -> Result<f64> {
        match (
            self.waveform.decay_rate_hz,
            self.waveform.target_bandwidth_mhz,
        ) {
            (Some(rate), _) => Ok(rate),
            (None, Some(bw)) => {
                fit_decay_rate(bw * 1e6, &self.filter_specs()?, self.waveform_bin())
            }
            (None, None) => Err(Error::Config("waveform has no decay rate".into())),
        }
    }

    /// Filtered pair-delay waveform.
    pub fn waveform(&self) -> Result<Waveform> {
        model_waveform(
            self.decay_rate()?,
            &self.filter_specs()?,
            self.waveform_bin(),
        )
    }

    /// Bandwidth of the filtered waveform, Hz.
    pub fn bandwidth(&self) -> Result<f64> {
        bandwidth_from_width(fwhm(&self.waveform()?)?)
    }

    pub fn simulation_options(&self) -> SimulationOptions {
        let s = &self.simulation;
        let defaults = SimulationOptions::default();
        SimulationOptions {
            chunk_duration: s.chunk_s.unwrap_or(defaults.chunk_duration),
            max_events: s.max_events.unwrap_or(defaults.max_events),
            bunching: s
                .bunching_factor
                .zip(s.coherence_time_ns)
                .map(|(factor, tc)| ThermalBunching {
                    factor,
                    coherence_time: tc * 1e-9,
                }),
        }
    }
}
