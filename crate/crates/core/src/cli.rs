//! `bench` command-line front end.
//!
//! Each subcommand returns a flat report that renders as text, JSON or a
//! one-row CSV. Tabular artifacts (histograms, sweeps) go to `--out` as CSV.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::biphoton::{bandwidth_from_width, csv_err};
use crate::budget::{
    background_correct, cs_violation, forward_coincidences, forward_singles, g2_peak, heralded_g2,
    solve_budget, MeasuredRates, RateBudget,
};
use crate::config::ExperimentConfig;
use crate::correlate::{auto_correlate_with, cross_correlate_grid, peak_and_window, Grid};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::format::{read_stream_file, write_stream_csv, write_stream_file};
use crate::montecarlo::{simulate_stream_with, Channel};
use crate::sweep::{run_sweep, Axis, SweepResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(
    name = "bench",
    version,
    about = "Warm-vapor photon-pair source simulator and analysis toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Report format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward rate model from a config, or inversion of measured rates.
    Budget(BudgetArgs),
    /// Monte Carlo timestamp stream written in the binary stream format.
    Simulate(SimulateArgs),
    /// Correlation histogram, peak and window analysis of stream files.
    Correlate(CorrelateArgs),
    /// Rate-model sweep along temperature, power or displacement.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct BudgetArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Measured Stokes singles rate; switches to inversion mode.
    #[arg(long)]
    pub singles_stokes_hz: Option<f64>,
    #[arg(long)]
    pub singles_antistokes_hz: Option<f64>,
    /// Measured coincidence rate within the window.
    #[arg(long)]
    pub coincidence_hz: Option<f64>,
    #[arg(long)]
    pub eta_stokes: Option<f64>,
    #[arg(long)]
    pub eta_antistokes: Option<f64>,
    #[arg(long)]
    pub background_stokes_hz: Option<f64>,
    #[arg(long)]
    pub background_antistokes_hz: Option<f64>,
    #[arg(long)]
    pub window_ns: Option<f64>,
    /// Cross-correlation peak for the Cauchy–Schwarz and heralded figures;
    /// defaults to the model peak.
    #[arg(long)]
    pub g2_cross: Option<f64>,
    #[arg(long)]
    pub g2_ss: Option<f64>,
    #[arg(long)]
    pub g2_asas: Option<f64>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides simulation.seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Binary stream output.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides simulation.duration_s.
    #[arg(long)]
    pub duration_s: Option<f64>,
    /// Optional `timestamp_ps,channel` CSV export.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CorrelateArgs {
    /// Stream file. Alone, its Stokes and anti-Stokes channels are
    /// correlated; with `--stream2`, all of its clicks start the delay.
    #[arg(long)]
    pub stream: PathBuf,
    #[arg(long)]
    pub stream2: Option<PathBuf>,
    /// Supplies defaults for bin, range, duration and window.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bin_ps: Option<f64>,
    #[arg(long)]
    pub range_ns: Option<f64>,
    /// Acquisition time; defaults to the config, then last timestamp + 1 ps.
    #[arg(long)]
    pub duration_s: Option<f64>,
    /// Coincidence window starting at zero delay.
    #[arg(long)]
    pub window_ns: Option<f64>,
    /// Also measure both autocorrelations through a simulated 50/50 split.
    #[arg(long)]
    pub auto: bool,
    #[arg(long, default_value_t = 486.0)]
    pub auto_bin_ps: f64,
    /// Seed of the 50/50 split.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cross-correlation histogram CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub axis: Axis,
    /// °C, mW or mm depending on the axis.
    #[arg(long, allow_negative_numbers = true)]
    pub start: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub stop: f64,
    #[arg(long)]
    pub steps: usize,
    /// Sweep table CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl clap::ValueEnum for Axis {
    fn value_variants<'a>() -> &'a [Self] {
        &[Axis::Temperature, Axis::Power, Axis::Displacement]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            Axis::Temperature => "temperature",
            Axis::Power => "power",
            Axis::Displacement => "displacement",
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetReport {
    /// `forward` or `solved`.
    pub mode: String,
    pub pair_rate_hz: f64,
    pub noise_stokes_hz: f64,
    pub noise_antistokes_hz: f64,
    pub singles_stokes_hz: f64,
    pub singles_antistokes_hz: f64,
    pub signal_coincidence_hz: f64,
    pub accidental_coincidence_hz: f64,
    pub coincidence_hz: f64,
    pub g2_peak: f64,
    pub g2_corrected: Option<f64>,
    pub cs_factor: Option<f64>,
    pub g2_heralded: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateReport {
    pub out: String,
    pub seed: u64,
    pub duration_s: f64,
    pub records: usize,
    pub stokes_clicks: usize,
    pub antistokes_clicks: usize,
    pub singles_stokes_hz: f64,
    pub singles_antistokes_hz: f64,
    pub expected_singles_stokes_hz: f64,
    pub expected_singles_antistokes_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelateReport {
    pub clicks_start: usize,
    pub clicks_stop: usize,
    pub duration_s: f64,
    pub bin_ps: u64,
    pub range_ns: f64,
    pub g2_peak: Option<f64>,
    pub peak_tau_ns: Option<f64>,
    pub fwhm_window_ns: Option<f64>,
    pub window_start_ns: Option<f64>,
    pub coincidences_in_window_hz: Option<f64>,
    pub bandwidth_mhz: Option<f64>,
    pub window_ns: Option<f64>,
    pub g2_window: Option<f64>,
    pub g2_window_stderr: Option<f64>,
    pub g2_tail: Option<f64>,
    pub g2_tail_stderr: Option<f64>,
    pub g2_ss: Option<f64>,
    pub g2_ss_stderr: Option<f64>,
    pub g2_asas: Option<f64>,
    pub g2_asas_stderr: Option<f64>,
    pub cs_factor: Option<f64>,
    pub g2_heralded: Option<f64>,
    pub note: Option<String>,
}

fn load(path: &Option<PathBuf>) -> Result<Option<ExperimentConfig>> {
    path.as_deref().map(ExperimentConfig::load).transpose()
}

fn pick(flag: Option<f64>, cfg: Option<f64>, name: &str) -> Result<f64> {
    flag.or(cfg)
        .ok_or_else(|| Error::Config(format!("missing --{name} (or a config providing it)")))
}

pub fn cmd_budget(args: &BudgetArgs) -> Result<BudgetReport> {
    let cfg = load(&args.config)?;
    let measured = [
        args.singles_stokes_hz,
        args.singles_antistokes_hz,
        args.coincidence_hz,
    ];
    let (mode, b) = if measured.iter().any(Option::is_some) {
        let [Some(m_s), Some(m_as), Some(c)] = measured else {
            return Err(Error::Config(
                "inversion needs --singles-stokes-hz, --singles-antistokes-hz and --coincidence-hz"
                    .into(),
            ));
        };
        let base = cfg.as_ref().map(|c| &c.budget);
        let m = MeasuredRates {
            singles_stokes: m_s,
            singles_antistokes: m_as,
            coincidences: c,
            eta_stokes: pick(args.eta_stokes, base.map(|b| b.eta_stokes), "eta-stokes")?,
            eta_antistokes: pick(
                args.eta_antistokes,
                base.map(|b| b.eta_antistokes),
                "eta-antistokes",
            )?,
            background_stokes: pick(
                args.background_stokes_hz,
                base.map(|b| b.background_stokes_hz),
                "background-stokes-hz",
            )?,
            background_antistokes: pick(
                args.background_antistokes_hz,
                base.map(|b| b.background_antistokes_hz),
                "background-antistokes-hz",
            )?,
            window: pick(args.window_ns, base.map(|b| b.window_ns), "window-ns")? * 1e-9,
        };
        ("solved", solve_budget(&m)?)
    } else {
        let cfg =
            cfg.ok_or_else(|| Error::Config("budget needs --config or measured rates".into()))?;
        let mut b = cfg.rate_budget()?;
        override_budget(&mut b, args)?;
        ("forward", b)
    };
    budget_report(mode, &b, args)
}

fn override_budget(b: &mut RateBudget, args: &BudgetArgs) -> Result<()> {
    if let Some(v) = args.eta_stokes {
        b.eta_stokes = v;
    }
    if let Some(v) = args.eta_antistokes {
        b.eta_antistokes = v;
    }
    if let Some(v) = args.background_stokes_hz {
        b.background_stokes = v;
    }
    if let Some(v) = args.background_antistokes_hz {
        b.background_antistokes = v;
    }
    if let Some(v) = args.window_ns {
        b.window = v * 1e-9;
    }
    b.validate()
}

fn budget_report(mode: &str, b: &RateBudget, args: &BudgetArgs) -> Result<BudgetReport> {
    let (m_s, m_as) = forward_singles(b);
    let (c_sg, c_ns) = forward_coincidences(b);
    let g2 = g2_peak(b)?;
    let cross = args.g2_cross.unwrap_or(g2);
    let cs_factor = match (args.g2_ss, args.g2_asas) {
        (Some(ss), Some(asas)) => Some(cs_violation(cross, ss, asas)?),
        _ => None,
    };
    let g2_heralded = args
        .g2_asas
        .map(|asas| heralded_g2(asas, cross))
        .transpose()?;
    Ok(BudgetReport {
        mode: mode.to_string(),
        pair_rate_hz: b.pair_rate,
        noise_stokes_hz: b.noise_stokes,
        noise_antistokes_hz: b.noise_antistokes,
        singles_stokes_hz: m_s,
        singles_antistokes_hz: m_as,
        signal_coincidence_hz: c_sg,
        accidental_coincidence_hz: c_ns,
        coincidence_hz: c_sg + c_ns,
        g2_peak: g2,
        g2_corrected: background_correct(
            g2,
            m_s,
            m_as,
            b.background_stokes,
            b.background_antistokes,
        )
        .ok(),
        cs_factor,
        g2_heralded,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<SimulateReport> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let seed = args.seed.unwrap_or(cfg.simulation.seed);
    let duration = args.duration_s.unwrap_or(cfg.simulation.duration_s);
    let b = cfg.rate_budget()?;
    let w = cfg.waveform()?;
    let stream = simulate_stream_with(
        &b,
        &w,
        duration,
        seed,
        &cfg.simulation_options(),
        Exec::default(),
    )?;
    write_stream_file(&stream, &args.out)?;
    if let Some(path) = &args.csv {
        write_stream_csv(&stream, BufWriter::new(File::create(path)?))?;
    }
    let (e_s, e_as) = forward_singles(&b);
    let n_s = stream.count(Channel::Stokes);
    let n_as = stream.count(Channel::AntiStokes);
    Ok(SimulateReport {
        out: args.out.display().to_string(),
        seed,
        duration_s: duration,
        records: stream.len(),
        stokes_clicks: n_s,
        antistokes_clicks: n_as,
        singles_stokes_hz: n_s as f64 / duration,
        singles_antistokes_hz: n_as as f64 / duration,
        expected_singles_stokes_hz: e_s,
        expected_singles_antistokes_hz: e_as,
    })
}

pub fn cmd_correlate(args: &CorrelateArgs) -> Result<CorrelateReport> {
    const DEFAULT_BIN_PS: f64 = 200.0;
    const DEFAULT_RANGE_NS: f64 = 50.0;

    let cfg = load(&args.config)?;
    let sim = cfg.as_ref().map(|c| &c.simulation);
    let bin_ps = args
        .bin_ps
        .or(sim.map(|s| s.bin_ps))
        .unwrap_or(DEFAULT_BIN_PS);
    let range_ns = args
        .range_ns
        .or(sim.map(|s| s.tau_range_ns))
        .unwrap_or(DEFAULT_RANGE_NS);
    let duration = args.duration_s.or(sim.map(|s| s.duration_s));
    let window_ns = args.window_ns.or(cfg.as_ref().map(|c| c.budget.window_ns));
    let seed = args.seed.or(sim.map(|s| s.seed)).unwrap_or(0);

    let first = read_stream_file(&args.stream, duration)?;
    let (s1, s2) = match &args.stream2 {
        Some(path) => {
            let second = read_stream_file(path, duration)?;
            let d = first.duration.max(second.duration);
            (first.with_duration(d)?, second.with_duration(d)?)
        }
        None => (
            first.channel(Channel::Stokes),
            first.channel(Channel::AntiStokes),
        ),
    };

    let exec = Exec::default();
    let grid = Grid::symmetric(bin_ps * 1e-12, range_ns * 1e-9)?;
    let h = cross_correlate_grid(&s1, &s2, grid, exec)?;
    if let Some(path) = &args.out {
        h.write_csv(BufWriter::new(File::create(path)?))?;
    }

    let mut report = CorrelateReport {
        clicks_start: s1.len(),
        clicks_stop: s2.len(),
        duration_s: h.duration,
        bin_ps: grid.bin_width_ps,
        range_ns,
        g2_peak: None,
        peak_tau_ns: None,
        fwhm_window_ns: None,
        window_start_ns: None,
        coincidences_in_window_hz: None,
        bandwidth_mhz: None,
        window_ns,
        g2_window: None,
        g2_window_stderr: None,
        g2_tail: None,
        g2_tail_stderr: None,
        g2_ss: None,
        g2_ss_stderr: None,
        g2_asas: None,
        g2_asas_stderr: None,
        cs_factor: None,
        g2_heralded: None,
        note: None,
    };
    if let Some((g, e)) = h.tail_mean(0.5 * range_ns * 1e-9) {
        report.g2_tail = Some(g);
        report.g2_tail_stderr = Some(e);
    }
    if let Some(w) = window_ns {
        let (g, e) = h.window_g2(0.0, w * 1e-9)?;
        report.g2_window = Some(g);
        report.g2_window_stderr = Some(e);
    }
    match peak_and_window(&h) {
        Ok(p) => {
            report.g2_peak = Some(p.g2_peak);
            report.peak_tau_ns = Some(p.peak_tau * 1e9);
            report.fwhm_window_ns = Some(p.fwhm_window * 1e9);
            report.window_start_ns = Some(p.window_start * 1e9);
            report.coincidences_in_window_hz = Some(p.coincidences_in_window);
            report.bandwidth_mhz = bandwidth_from_width(p.fwhm_window).ok().map(|b| b * 1e-6);
        }
        Err(Error::NoPeak { max_g2 }) => {
            report.note = Some(format!(
                "no correlation peak above 1 + 5 stderr (max g2 {max_g2:.3}); tail g2 ≈ {:.3}",
                report.g2_tail.unwrap_or(f64::NAN)
            ));
        }
        Err(e) => return Err(e),
    }

    if args.auto {
        let grid = Grid::centered(args.auto_bin_ps * 1e-12, range_ns * 1e-9)?;
        let ss = auto_correlate_with(&s1, grid, seed, exec)?;
        let asas = auto_correlate_with(&s2, grid, seed ^ 0x5a5a_5a5a, exec)?;
        let (g_ss, e_ss) = ss.g2_at(0.0).unzip();
        let (g_asas, e_asas) = asas.g2_at(0.0).unzip();
        report.g2_ss = g_ss;
        report.g2_ss_stderr = e_ss;
        report.g2_asas = g_asas;
        report.g2_asas_stderr = e_asas;
        if let (Some(cross), Some(ss), Some(asas)) = (report.g2_peak, g_ss, g_asas) {
            report.cs_factor = cs_violation(cross, ss, asas).ok();
            report.g2_heralded = heralded_g2(asas, cross).ok();
        }
    }
    Ok(report)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepResult> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let result = run_sweep(
        &cfg,
        args.axis,
        args.start,
        args.stop,
        args.steps,
        Exec::default(),
    )?;
    if let Some(path) = &args.out {
        result.write_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(result)
}

fn render<T: Serialize>(value: &T, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let mut s =
                serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.serialize(value).map_err(csv_err)?;
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        OutputFormat::Text => {
            let v = serde_json::to_value(value).map_err(|e| Error::Config(e.to_string()))?;
            let mut s = String::new();
            if let serde_json::Value::Object(map) = v {
                for (k, v) in map {
                    match v {
                        serde_json::Value::Null => {}
                        serde_json::Value::String(text) => s += &format!("{k}: {text}\n"),
                        other => s += &format!("{k}: {other}\n"),
                    }
                }
            }
            Ok(s)
        }
    }
}

fn render_sweep(r: &SweepResult, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => render(r, format),
        OutputFormat::Csv => {
            let mut out = Vec::new();
            r.write_csv(&mut out)?;
            Ok(String::from_utf8(out).expect("csv output is utf-8"))
        }
        OutputFormat::Text => {
            let mut s = format!(
                "{:>16} {:>12} {:>12} {:>14} {:>10} {:>12} {:>13}  flag\n",
                r.axis.column(),
                "M_S_hz",
                "M_AS_hz",
                "coincidence_hz",
                "g2_peak",
                "g2_corrected",
                "bandwidth_mhz"
            );
            let cell = |v: Option<f64>, prec: usize| {
                v.map_or_else(|| "-".to_string(), |x| format!("{x:.prec$}"))
            };
            for p in &r.points {
                s += &format!(
                    "{:>16.4} {:>12} {:>12} {:>14} {:>10} {:>12} {:>13}  {}\n",
                    p.value,
                    cell(p.singles_stokes, 1),
                    cell(p.singles_antistokes, 1),
                    cell(p.coincidences, 3),
                    cell(p.g2_peak, 2),
                    cell(p.g2_corrected, 2),
                    cell(p.bandwidth.map(|b| b * 1e-6), 1),
                    p.flag.as_deref().unwrap_or("")
                );
            }
            Ok(s)
        }
    }
}

fn write_report(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

/// Runs a parsed command line and returns what belongs on stdout.
pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Budget(args) => {
            let text = render(&cmd_budget(args)?, cli.format)?;
            if let Some(path) = &args.out {
                write_report(path, &text)?;
            }
            Ok(text)
        }
        Command::Simulate(args) => render(&cmd_simulate(args)?, cli.format),
        Command::Correlate(args) => render(&cmd_correlate(args)?, cli.format),
        Command::Sweep(args) => render_sweep(&cmd_sweep(args)?, cli.format),
    }
}
