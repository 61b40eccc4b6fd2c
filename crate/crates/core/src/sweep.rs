//! Parameter sweeps of the rate model around a configured operating point.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::biphoton::csv_err;
use crate::budget::{
    background_correct, forward_coincidences, forward_singles, g2_peak, scale_budget, RateBudget,
};
use crate::config::ExperimentConfig;
use crate::consts::ZERO_CELSIUS;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{
    antistokes_mean_transmission, effective_atom_fraction, DEFAULT_QUADRATURE_INTERVALS,
};
use crate::vapor::VaporState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Temperature,
    Power,
    Displacement,
}

impl Axis {
    /// CSV header of the axis column.
    pub fn column(self) -> &'static str {
        match self {
            Axis::Temperature => "temperature_C",
            Axis::Power => "power_mw",
            Axis::Displacement => "displacement_mm",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Temperature => "temperature",
            Axis::Power => "power",
            Axis::Displacement => "displacement",
        })
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temperature" => Ok(Axis::Temperature),
            "power" => Ok(Axis::Power),
            "displacement" => Ok(Axis::Displacement),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

/// One sweep row. Rate fields are absent when the point is infeasible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub singles_stokes: Option<f64>,
    pub singles_antistokes: Option<f64>,
    pub coincidences: Option<f64>,
    pub g2_peak: Option<f64>,
    pub g2_corrected: Option<f64>,
    pub bandwidth: Option<f64>,
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: Axis,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    /// Column of a numeric field, `None` for flagged infeasible rows.
    pub fn column(&self, f: impl Fn(&SweepPoint) -> Option<f64>) -> Vec<Option<f64>> {
        self.points.iter().map(f).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            self.axis.column(),
            "M_S_hz",
            "M_AS_hz",
            "coincidence_hz",
            "g2_peak",
            "g2_corrected",
            "bandwidth_mhz",
            "flag",
        ])
        .map_err(csv_err)?;
        let cell = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
        for p in &self.points {
            w.write_record([
                p.value.to_string(),
                cell(p.singles_stokes),
                cell(p.singles_antistokes),
                cell(p.coincidences),
                cell(p.g2_peak),
                cell(p.g2_corrected),
                cell(p.bandwidth.map(|b| b * 1e-6)),
                p.flag.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evenly spaced axis values; a single step yields `start`.
pub fn axis_values(start: f64, stop: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Config("sweep needs at least one step".into()));
    }
    if !(start.is_finite() && stop.is_finite()) || (steps > 1 && !(stop > start)) {
        return Err(Error::Config(format!(
            "sweep range [{start}, {stop}] must be finite and increasing"
        )));
    }
    if steps == 1 {
        return Ok(vec![start]);
    }
    let step = (stop - start) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                stop
            } else {
                start + step * i as f64
            }
        })
        .collect())
}

struct Reference {
    budget: RateBudget,
    vapor: VaporState,
    interaction_length: f64,
    displacement: f64,
    transmission: f64,
    fraction: f64,
    power: Option<f64>,
    low_power_cutoff: Option<f64>,
    bandwidth: f64,
}

impl Reference {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let vapor = cfg.vapor_state()?;
        let geom = cfg.beam_geometry()?;
        let length = geom.interaction_length()?;
        let z0 = geom.displacement_z;
        Ok(Reference {
            budget: cfg.rate_budget()?,
            transmission: antistokes_mean_transmission(
                z0,
                length,
                &vapor,
                DEFAULT_QUADRATURE_INTERVALS,
            )?,
            fraction: effective_atom_fraction(z0, length)?,
            vapor,
            interaction_length: length,
            displacement: z0,
            power: cfg.budget.pump_power_mw,
            low_power_cutoff: cfg.budget.low_power_cutoff_mw,
            bandwidth: cfg.bandwidth()?,
        })
    }

    fn transmission_ratio(&self, z: f64, vapor: &VaporState) -> Result<f64> {
        let t = antistokes_mean_transmission(
            z,
            self.interaction_length,
            vapor,
            DEFAULT_QUADRATURE_INTERVALS,
        )?;
        Ok(t / self.transmission)
    }

    fn point(&self, axis: Axis, value: f64) -> SweepPoint {
        let mut point = SweepPoint {
            value,
            singles_stokes: None,
            singles_antistokes: None,
            coincidences: None,
            g2_peak: None,
            g2_corrected: None,
            bandwidth: None,
            flag: None,
        };
        match self.evaluate(axis, value) {
            Ok((b, note)) => {
                let (ms, mas) = forward_singles(&b);
                let (signal, accidental) = forward_coincidences(&b);
                let g2 = g2_peak(&b).ok();
                point.singles_stokes = Some(ms);
                point.singles_antistokes = Some(mas);
                point.coincidences = Some(signal + accidental);
                point.g2_peak = g2;
                point.g2_corrected = g2.and_then(|g| {
                    background_correct(g, ms, mas, b.background_stokes, b.background_antistokes)
                        .ok()
                });
                point.bandwidth = Some(self.bandwidth);
                point.flag = note;
            }
            Err(e) => point.flag = Some(format!("infeasible: {e}")),
        }
        point
    }

    fn evaluate(&self, axis: Axis, value: f64) -> Result<(RateBudget, Option<String>)> {
        let mut note = None;
        let (density, power, eta_ratio) = match axis {
            Axis::Temperature => {
                let vapor = self.vapor.at_temperature(value + ZERO_CELSIUS)?;
                (
                    vapor.density / self.vapor.density,
                    1.0,
                    self.transmission_ratio(self.displacement, &vapor)?,
                )
            }
            Axis::Power => {
                let p0 = self.power.ok_or_else(|| {
                    Error::Config("power sweep needs budget.pump_power_mw".into())
                })?;
                if !(value > 0.0) {
                    return Err(Error::domain(format!("power {value} mW must be positive")));
                }
                if self.low_power_cutoff.is_some_and(|cut| value < cut) {
                    note = Some("outside model validity: below low-power cutoff".to_string());
                }
                (1.0, value / p0, 1.0)
            }
            Axis::Displacement => {
                let z = value * 1e-3;
                let fraction = effective_atom_fraction(z, self.interaction_length)?;
                if self.fraction <= 0.0 {
                    return Err(Error::Infeasible(
                        "reference point has no atoms in the interaction region".into(),
                    ));
                }
                (
                    fraction / self.fraction,
                    1.0,
                    self.transmission_ratio(z, &self.vapor)?,
                )
            }
        };
        let mut b = scale_budget(&self.budget, density, power)?;
        b.eta_antistokes *= eta_ratio;
        if b.eta_antistokes > 1.0 {
            return Err(Error::Infeasible(format!(
                "scaled anti-Stokes efficiency {} exceeds 1",
                b.eta_antistokes
            )));
        }
        b.validate()?;
        Ok((b, note))
    }
}

/// Evaluates the rate model at `steps` evenly spaced axis values.
/// Infeasible points become flagged rows.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    axis: Axis,
    start: f64,
    stop: f64,
    steps: usize,
    exec: Exec,
) -> Result<SweepResult> {
    let values = axis_values(start, stop, steps)?;
    let reference = Reference::new(cfg)?;
    let points = exec.map_indexed(values.len(), |i| reference.point(axis, values[i]));
    Ok(SweepResult { axis, points })
}
