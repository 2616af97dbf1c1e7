//! Executes scenarios and writes their artifacts.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use fracreset_core::describing::{df_csv, df_table, DescribingFunctionPoint};
use fracreset_core::fode::MemoryMode;
use fracreset_core::models::{ElementKind, ResetElement};
use fracreset_core::simreset::{simulate, step_metrics, trajectory_csv, Reference, StepMetrics};
use fracreset_core::stability::{phase_csv, stability_report, StabilityReport};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::scenario::{bundled, Analysis, Scenario};

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub step: Option<f64>,
    pub horizon: Option<f64>,
    pub memory_mode: Option<MemoryMode>,
    pub beta_range: Option<[f64; 2]>,
}

impl Overrides {
    pub fn apply(&self, sc: &mut Scenario) -> Result<(), CliError> {
        if let Some(h) = self.step {
            sc.simulation.step = h;
        }
        if let Some(t) = self.horizon {
            sc.simulation.horizon = t;
        }
        if let Some(m) = self.memory_mode {
            sc.simulation.memory_mode = m;
        }
        if let Some(r) = self.beta_range {
            sc.stability.beta_range = r;
        }
        sc.validate()
    }
}

/// Reads a scenario from a path, or from the bundled set as `bundled:<name>`.
pub fn load_scenario(source: &str) -> Result<Scenario, CliError> {
    let text = match source.strip_prefix("bundled:") {
        Some(name) => bundled(name)
            .ok_or_else(|| CliError::Validation(format!("no bundled scenario named {name:?}")))?
            .to_string(),
        None => fs::read_to_string(source).map_err(|e| CliError::io(source, e))?,
    };
    Scenario::parse(&text)
}

/// What one scenario run produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub name: String,
    pub files: Vec<PathBuf>,
    pub metrics: Option<StepMetrics>,
    pub stability: Option<StabilityReport>,
    pub resets: Option<usize>,
}

impl Outcome {
    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut parts = vec![self.name.clone()];
        if let Some(m) = &self.metrics {
            parts.push(format!("overshoot {:.2}%", 100.0 * m.overshoot));
            match m.settling_time {
                Some(t) => parts.push(format!("settling {t:.3} s")),
                None => parts.push("not settled".into()),
            }
        }
        if let Some(n) = self.resets {
            parts.push(format!("{n} resets"));
        }
        if let Some(r) = &self.stability {
            match r.beta_interval {
                Some([lo, hi]) => parts.push(format!("certified for beta in [{lo:.3}, {hi:.3}]")),
                None => parts.push("not certified".into()),
            }
        }
        parts.join(", ")
    }
}

fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

fn write(out_dir: &Path, file: String, contents: &str, outcome: &mut Outcome) -> Result<(), CliError> {
    let path = out_dir.join(file);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    outcome.files.push(path);
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    name: &'a str,
    generated_at: String,
    step: f64,
    horizon: f64,
    memory_mode: MemoryMode,
    reference: f64,
    resets: usize,
    #[serde(flatten)]
    metrics: &'a StepMetrics,
}

#[derive(Serialize)]
struct StabilityFile<'a> {
    name: &'a str,
    generated_at: String,
    phase_beta: f64,
    #[serde(flatten)]
    report: &'a StabilityReport,
}

/// Runs the requested subset of the scenario's analyses and writes
/// `<name>_*.csv/json` into `out_dir`.
pub fn run_scenario(sc: &Scenario, only: Option<&[Analysis]>, out_dir: &Path) -> Result<Outcome, CliError> {
    let wanted = |a: Analysis| sc.analyses.contains(&a) && only.is_none_or(|o| o.contains(&a));
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let mut outcome = Outcome {
        name: sc.name.clone(),
        ..Outcome::default()
    };
    let name = sc.name.as_str();

    if wanted(Analysis::Simulate) || wanted(Analysis::Metrics) {
        let sys = sc.closed_loop()?;
        let cfg = sc.simulation_config();
        let traj = simulate(&sys, &cfg)?;
        outcome.resets = Some(traj.resets.len());
        if wanted(Analysis::Simulate) {
            write(out_dir, format!("{name}_trajectory.csv"), &trajectory_csv(&traj), &mut outcome)?;
            write(out_dir, format!("{name}_resets.json"), &to_json(&traj.resets), &mut outcome)?;
        }
        if wanted(Analysis::Metrics) {
            let Reference::Constant { value } = cfg.reference else {
                return Err(CliError::Validation("metrics need a constant reference".into()));
            };
            let metrics = step_metrics(&traj, value)?;
            let file = MetricsFile {
                name,
                generated_at: timestamp(),
                step: cfg.step,
                horizon: cfg.horizon,
                memory_mode: cfg.memory_mode,
                reference: value,
                resets: traj.resets.len(),
                metrics: &metrics,
            };
            write(out_dir, format!("{name}_metrics.json"), &to_json(&file), &mut outcome)?;
            outcome.metrics = Some(metrics);
        }
    }

    if wanted(Analysis::Df) {
        let element = sc.element()?;
        let gain = sc.reset_element.gain;
        let df = &sc.df;
        let (csv, numerical) = describing_tables(
            &element,
            gain,
            df.omega_range,
            df.points,
            &df.numerical,
            df.amplitude,
            sc.simulation.memory_mode,
        )?;
        write(out_dir, format!("{name}_df.csv"), &csv, &mut outcome)?;
        if let Some(num) = numerical {
            write(out_dir, format!("{name}_df_numerical.csv"), &num, &mut outcome)?;
        }
    }

    if wanted(Analysis::Stability) {
        let sys = sc.closed_loop()?;
        let opts = sc.stability_options()?;
        let report = stability_report(&sys, &opts)?;
        let phase_beta = sc
            .stability
            .phase_beta
            .or(report.beta_interval.map(|[lo, hi]| 0.5 * (lo + hi)))
            .unwrap_or(0.0);
        let file = StabilityFile {
            name,
            generated_at: timestamp(),
            phase_beta,
            report: &report,
        };
        write(out_dir, format!("{name}_stability.json"), &to_json(&file), &mut outcome)?;
        let phase = phase_csv(&report.h_beta.at(phase_beta), &opts.grid)?;
        write(out_dir, format!("{name}_phase.csv"), &phase, &mut outcome)?;
        outcome.stability = Some(report);
    }
    Ok(outcome)
}

/// Closed-form DF table and, if frequencies are given, the simulation-based
/// estimates next to the closed form.
pub fn describing_tables(
    element: &ResetElement,
    gain: f64,
    omega_range: [f64; 2],
    points: usize,
    numerical: &[f64],
    amplitude: f64,
    memory_mode: MemoryMode,
) -> Result<(String, Option<String>), CliError> {
    // The FORE gain is part of its kind; other kinds carry it as a factor.
    let factor = match element.kind {
        ElementKind::Fore { .. } => 1.0,
        _ => gain,
    };
    let scale = |mut p: DescribingFunctionPoint| {
        p.value *= factor;
        p.amplitude = amplitude;
        p
    };
    let table: Vec<_> = df_table(element.kind, omega_range[0], omega_range[1], points)?
        .into_iter()
        .map(scale)
        .collect();
    let csv = df_csv(&table);
    if numerical.is_empty() {
        return Ok((csv, None));
    }
    let cfg = fracreset_core::describing::NumericalDfConfig {
        memory_mode,
        ..Default::default()
    };
    let rows = numerical
        .par_iter()
        .map(|&w| {
            let step = 2.0 * PI / (2000.0 * w);
            let est = fracreset_core::describing::numerical_df_with(element, amplitude, w, step, &cfg)?;
            let closed = fracreset_core::describing::describing_function(element.kind, w)? * factor;
            Ok(format!(
                "{},{},{},{},{},{},{},{}\n",
                element.kind.label(),
                element.kind.order(),
                w,
                est.re,
                est.im,
                closed.re,
                closed.im,
                (est - closed).norm() / closed.norm()
            ))
        })
        .collect::<Result<Vec<String>, CliError>>()?;
    let mut num = String::from("kind,alpha,omega,re,im,closed_re,closed_im,rel_error\n");
    num.extend(rows);
    Ok((csv, Some(num)))
}
