//! Scenario runs, parameter sweeps and their on-disk artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::rectified_max_field;
use crate::config::{config_hash, parse_config, ExperimentConfig, SwitchingPlan};
use crate::error::{NfsError, Result};
use crate::model::{gaussian_input, FieldRecord, ScenarioConfig};
use crate::obe::run_chain;
use crate::spectral::{
    assemble_spectrogram, dominant_line, find_lines, normalized_spectrum, PeakReport,
    SpectrumRecord,
};
use crate::switching::{
    cancel_close_pairs, detect_nodes, make_type_schedules, node_schedule, SwitchSchedule,
    SwitchingType, MIN_SPACING_IN_D,
};

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "NFS_WORKERS";

/// Node-switch schedules must finish inside this window, ns.
pub const SWITCH_WINDOW_NS: f64 = 300.0;

/// Lines below this fraction of the spectral maximum are not reported.
const LINE_FRACTION: f64 = 0.05;

/// Named scenarios shipped with the crate.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig2-single", include_str!("../presets/fig2-single.toml")),
    ("fig2-fifty", include_str!("../presets/fig2-fifty.toml")),
    ("fig3-type1", include_str!("../presets/fig3-type1.toml")),
    ("fig3-type2", include_str!("../presets/fig3-type2.toml")),
    ("fig3-type3", include_str!("../presets/fig3-type3.toml")),
    ("fig4-scan", include_str!("../presets/fig4-scan.toml")),
    ("fig4-thin", include_str!("../presets/fig4-thin.toml")),
    ("fig5-scan", include_str!("../presets/fig5-scan.toml")),
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        NfsError::config(format!("unknown preset '{name}', expected one of {}", names.join(", ")))
    })?;
    parse_config(text)
}

/// Nodes are searched once the incident pulse has passed.
pub fn node_search_start(scenario: &ScenarioConfig) -> f64 {
    scenario.pulse.t0 + 8.0 * scenario.pulse.tau
}

fn without_switching(scenario: &ScenarioConfig) -> ScenarioConfig {
    let mut s = scenario.clone();
    for t in &mut s.targets {
        t.schedule = SwitchSchedule {
            switch_times: Vec::new(),
            duration_d: t.schedule.duration_d,
        };
    }
    s
}

fn exit_field(scenario: &ScenarioConfig) -> Result<(FieldRecord, FieldRecord)> {
    let input = gaussian_input(&scenario.pulse, &scenario.grid)?;
    let output = run_chain(&input, &scenario.targets, &scenario.constants, &scenario.grid)?;
    Ok((input, output))
}

/// Intensity nodes of the output with all switching removed.
pub fn unperturbed_nodes(scenario: &ScenarioConfig) -> Result<Vec<f64>> {
    let (_, out) = exit_field(&without_switching(scenario))?;
    Ok(detect_nodes(&out, node_search_start(scenario)))
}

/// Fills in the switch times requested by `cfg.switching`.
///
/// Returns the concrete scenario and a note per derived quantity.
pub fn resolve(cfg: &ExperimentConfig) -> Result<(ScenarioConfig, Vec<String>)> {
    cfg.validate()?;
    let mut scenario = cfg.scenario.clone();
    let Some(plan) = &cfg.switching else {
        return Ok((scenario, Vec::new()));
    };
    let mut notes = Vec::new();
    let d = plan.duration_d;
    if let Some(n) = plan.node_switches {
        let schedule = if plan.iterative_nodes {
            iterative_node_schedule(&scenario, n, d)?
        } else {
            let nodes = unperturbed_nodes(&scenario)?;
            node_schedule(&nodes, n, d)?
        };
        check_window(&schedule, n)?;
        notes.push(format!(
            "{n} node switches, last at {:.4} ns",
            schedule.switch_times.last().copied().unwrap_or(0.0)
        ));
        for t in &mut scenario.targets {
            t.schedule = schedule.clone();
        }
        return Ok((scenario, notes));
    }

    let kind = SwitchingType::try_from(plan.schedule_type.unwrap_or(0))?;
    let t1 = match plan.t1 {
        Some(t1) => t1,
        None => {
            let nodes = unperturbed_nodes(&scenario)?;
            let first = *nodes
                .first()
                .ok_or(NfsError::InsufficientNodes { needed: 1, found: 0 })?;
            notes.push(format!("t1 placed at the first intensity node, {first:.4} ns"));
            first
        }
    };
    let (s1, s2) = make_type_schedules(kind, t1, plan.tau_d, d)?;
    match scenario.targets.as_mut_slice() {
        [a, b] => {
            a.schedule = s1;
            b.schedule = s2;
        }
        [a] => {
            if matches!(kind, SwitchingType::Simultaneous | SwitchingType::UpstreamOnly) {
                a.schedule = s1;
            } else {
                return Err(NfsError::config(format!(
                    "switching type {} needs two targets",
                    kind as u8
                )));
            }
        }
        _ => return Err(NfsError::config("[switching] needs at least one target")),
    }
    Ok((scenario, notes))
}

fn check_window(schedule: &SwitchSchedule, n: usize) -> Result<()> {
    let inside = schedule
        .switch_times
        .iter()
        .filter(|&&t| t < SWITCH_WINDOW_NS)
        .count();
    if inside < n {
        return Err(NfsError::InsufficientNodes {
            needed: n + 1,
            found: inside + 1,
        });
    }
    Ok(())
}

/// Adds one inversion at a time, each at the next node of the output
/// produced by the inversions placed so far.
pub fn iterative_node_schedule(scenario: &ScenarioConfig, n: usize, d: f64) -> Result<SwitchSchedule> {
    let base = without_switching(scenario);
    let start = node_search_start(scenario);
    let mut times: Vec<f64> = Vec::with_capacity(n);
    let mut skipped_first = false;
    while times.len() < n {
        let mut current = base.clone();
        let schedule = SwitchSchedule::new(times.clone(), d)?;
        for t in &mut current.targets {
            t.schedule = schedule.clone();
        }
        let (_, out) = exit_field(&current)?;
        let after = times.last().map_or(start, |&t| t + MIN_SPACING_IN_D * d);
        let mut nodes = cancel_close_pairs(&detect_nodes(&out, after), d);
        if !skipped_first {
            if nodes.is_empty() {
                return Err(NfsError::InsufficientNodes { needed: n + 1, found: 0 });
            }
            nodes.remove(0);
            skipped_first = true;
        }
        match nodes.first() {
            Some(&t) => times.push(t),
            None => {
                return Err(NfsError::InsufficientNodes {
                    needed: n + 1,
                    found: times.len() + 1,
                })
            }
        }
    }
    SwitchSchedule::new(times, d)
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub scenario: ScenarioConfig,
    pub input: FieldRecord,
    pub output: FieldRecord,
    pub spectrum: SpectrumRecord,
    pub lines: Vec<PeakReport>,
    pub notes: Vec<String>,
}

/// Runs a fully specified scenario.
pub fn simulate(scenario: &ScenarioConfig) -> Result<ScenarioOutcome> {
    scenario.validate()?;
    let (input, output) = exit_field(scenario)?;
    let spectrum = normalized_spectrum(&input, &output, &scenario.spectrum, scenario.constants.gamma)?;
    let lines = find_lines(&spectrum, LINE_FRACTION);
    let mut notes = Vec::new();
    if !output.is_decayed() {
        notes.push(format!(
            "output not decayed at t_end: truncation ratio {:.3e}",
            output.truncation_ratio()
        ));
    }
    Ok(ScenarioOutcome {
        scenario: scenario.clone(),
        input,
        output,
        spectrum,
        lines,
        notes,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ScenarioOutcome> {
    let (scenario, notes) = resolve(cfg)?;
    let mut outcome = simulate(&scenario)?;
    outcome.notes.splice(0..0, notes);
    Ok(outcome)
}

/// Spectrum of the unperturbed output with every quantum-beat lobe after the
/// first node sign-aligned: the flip sequence starts at the second node.
pub fn rectified_spectrum(scenario: &ScenarioConfig) -> Result<SpectrumRecord> {
    let plain = without_switching(scenario);
    let (input, output) = exit_field(&plain)?;
    let nodes = detect_nodes(&output, node_search_start(scenario));
    if nodes.len() < 2 {
        return Err(NfsError::InsufficientNodes {
            needed: 2,
            found: nodes.len(),
        });
    }
    let rect = rectified_max_field(&output, nodes[1], &nodes[2..])?;
    normalized_spectrum(&input, &rect, &scenario.spectrum, scenario.constants.gamma)
}

/// Relative L2 change of the exit field when `dt` is halved and the slab
/// count doubled.
pub fn grid_convergence(scenario: &ScenarioConfig) -> Result<f64> {
    let (_, coarse) = exit_field(scenario)?;
    let mut fine_cfg = scenario.clone();
    fine_cfg.grid.dt *= 0.5;
    fine_cfg.grid.n_slabs *= 2;
    let (_, fine) = exit_field(&fine_cfg)?;
    let every_other: Vec<Complex64> = fine.samples.iter().step_by(2).copied().collect();
    let fine = FieldRecord::new(fine.t_start, coarse.dt, every_other)?;
    coarse.relative_l2(&fine)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence_delta: Option<f64>,
    /// Sweep points that failed, with the error message.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<(f64, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub files: Vec<PathBuf>,
    pub diagnostics: Diagnostics,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn write_file(path: &Path, body: &str) -> Result<PathBuf> {
    fs::write(path, body).map_err(|e| NfsError::io(path, e))?;
    Ok(path.to_path_buf())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| NfsError::io(dir, e))
}

/// `t_ns,re_omega,im_omega` with a hash header line.
pub fn field_csv(field: &FieldRecord, hash: &str) -> String {
    let mut out = String::with_capacity(field.len() * 48);
    let _ = writeln!(out, "# config_sha256={hash}");
    out.push_str("t_ns,re_omega,im_omega\n");
    for (i, z) in field.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", field.time(i), z.re, z.im);
    }
    out
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types always serialize")
}

fn finish_manifest(
    dir: &Path,
    hash: String,
    started: f64,
    mut files: Vec<PathBuf>,
    diagnostics: Diagnostics,
) -> Result<RunManifest> {
    let path = dir.join("manifest.json");
    files.push(path.clone());
    let manifest = RunManifest {
        config_hash: hash,
        started_unix_s: started,
        finished_unix_s: now(),
        files,
        diagnostics,
    };
    write_file(&path, &json(&manifest))?;
    Ok(manifest)
}

/// Optional extra outputs of a scenario run.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Also write `rectified_spectrum.csv`.
    pub rectified: bool,
    /// Record the grid-halving change of the exit field in the manifest.
    pub convergence: bool,
}

/// Runs one scenario and writes `field.csv`, `spectrum.csv`, `peaks.json`,
/// `config.toml` and `manifest.json` into `out_dir`.
pub fn run_scenario(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    run_scenario_with(cfg, out_dir, RunOptions::default())
}

pub fn run_scenario_with(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    options: RunOptions,
) -> Result<RunManifest> {
    let started = now();
    let outcome = run_experiment(cfg)?;
    ensure_dir(out_dir)?;
    let hash = config_hash(&outcome.scenario);
    let mut files = vec![
        write_file(
            &out_dir.join("config.toml"),
            &crate::config::scenario_to_toml(&outcome.scenario),
        )?,
        write_file(&out_dir.join("field.csv"), &field_csv(&outcome.output, &hash))?,
        write_file(&out_dir.join("spectrum.csv"), &outcome.spectrum.to_csv())?,
        write_file(&out_dir.join("peaks.json"), &json(&outcome.lines))?,
    ];
    if options.rectified {
        let rect = rectified_spectrum(&outcome.scenario)?;
        files.push(write_file(&out_dir.join("rectified_spectrum.csv"), &rect.to_csv())?);
    }
    let convergence_delta = if options.convergence {
        Some(grid_convergence(&outcome.scenario)?)
    } else {
        None
    };
    let diagnostics = Diagnostics {
        notes: outcome.notes,
        truncation_ratio: Some(outcome.output.truncation_ratio()),
        convergence_delta,
        ..Diagnostics::default()
    };
    finish_manifest(out_dir, hash, started, files, diagnostics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    TauD,
    DeltaOverGamma,
    NSwitches,
}

impl std::str::FromStr for SweepParameter {
    type Err = NfsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tau_d" => Ok(Self::TauD),
            "delta" | "delta_over_gamma" => Ok(Self::DeltaOverGamma),
            "nswitch" | "n_switches" => Ok(Self::NSwitches),
            other => Err(NfsError::config(format!(
                "unknown sweep parameter '{other}', expected tau_d, delta or nswitch"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub base: ExperimentConfig,
}

/// `start, start + step, …` up to and including `stop` (within 1e-9 steps).
pub fn range_values(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) || !start.is_finite() || !stop.is_finite() {
        return Err(NfsError::config(format!(
            "bad range {start}:{stop}:{step}, need start <= stop and step > 0"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Parses `a,b,c` or `start:stop:step`.
pub fn parse_values(text: &str) -> Result<Vec<f64>> {
    let num = |p: &str| {
        p.trim()
            .parse::<f64>()
            .map_err(|_| NfsError::config(format!("bad sweep value '{p}'")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [a, b, c] => range_values(num(a)?, num(b)?, num(c)?)?,
        [_] => text.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(NfsError::config(format!("bad sweep values '{text}'"))),
    };
    if values.is_empty() {
        return Err(NfsError::config("sweep needs at least one value"));
    }
    Ok(values)
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(NfsError::config("sweep needs at least one value"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(NfsError::config("sweep values must be finite"));
        }
        let plan = self.base.switching.as_ref();
        let kind = plan.and_then(|p| p.schedule_type);
        match self.parameter {
            SweepParameter::TauD if kind != Some(SwitchingType::Delayed as u8) => Err(
                NfsError::config("a tau_d sweep needs [switching] schedule_type = 4"),
            ),
            SweepParameter::DeltaOverGamma if !matches!(kind, Some(1..=3)) => Err(
                NfsError::config("a delta sweep needs [switching] schedule_type 1, 2 or 3"),
            ),
            SweepParameter::NSwitches => {
                if self.values.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                    return Err(NfsError::config("switch counts must be whole numbers"));
                }
                if plan.is_some_and(|p| p.schedule_type.is_some()) {
                    return Err(NfsError::config(
                        "a switch-count sweep takes no schedule_type",
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(text) = std::env::var(WORKERS_ENV) {
        let n: usize = text
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| NfsError::config(format!("{WORKERS_ENV} must be a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| NfsError::config(format!("cannot start worker pool: {e}")))
}

/// Experiment for one sweep value.
pub fn sweep_point(spec: &SweepSpec, value: f64) -> ExperimentConfig {
    let mut cfg = spec.base.clone();
    match spec.parameter {
        SweepParameter::TauD => {
            if let Some(plan) = cfg.switching.as_mut() {
                plan.tau_d = value;
            }
        }
        SweepParameter::DeltaOverGamma => {
            for t in &mut cfg.scenario.targets {
                t.delta_over_gamma = value;
            }
            // the switch follows the first node of each Δ
            if let Some(plan) = cfg.switching.as_mut() {
                plan.t1 = None;
            }
        }
        SweepParameter::NSwitches => {
            let d = cfg.switching.as_ref().map_or(crate::switching::DEFAULT_DURATION_NS, |p| p.duration_d);
            let iterative = cfg.switching.as_ref().is_some_and(|p| p.iterative_nodes);
            let mut plan = SwitchingPlan::nodes(value as usize);
            plan.duration_d = d;
            plan.iterative_nodes = iterative;
            cfg.switching = Some(plan);
        }
    }
    cfg
}

pub struct SweepResult {
    pub points: Vec<(f64, Result<ScenarioOutcome>)>,
}

/// Runs every sweep point in the worker pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut base = spec.clone();
    // shared derived inputs are computed once
    if spec.parameter == SweepParameter::TauD {
        if let Some(plan) = base.base.switching.as_mut() {
            if plan.t1.is_none() {
                let nodes = unperturbed_nodes(&base.base.scenario)?;
                plan.t1 = Some(
                    *nodes
                        .first()
                        .ok_or(NfsError::InsufficientNodes { needed: 1, found: 0 })?,
                );
            }
        }
    }
    let node_cache = if spec.parameter == SweepParameter::NSwitches
        && !spec.base.switching.as_ref().is_some_and(|p| p.iterative_nodes)
    {
        Some(unperturbed_nodes(&spec.base.scenario)?)
    } else {
        None
    };
    let pool = worker_pool()?;
    let points = pool.install(|| {
        base.values
            .par_iter()
            .map(|&v| {
                let cfg = sweep_point(&base, v);
                let outcome = match &node_cache {
                    Some(nodes) => node_point(&cfg, nodes, v as usize),
                    None => run_experiment(&cfg),
                };
                (v, outcome)
            })
            .collect()
    });
    Ok(SweepResult { points })
}

fn node_point(cfg: &ExperimentConfig, nodes: &[f64], n: usize) -> Result<ScenarioOutcome> {
    let d = cfg.switching.as_ref().map_or(crate::switching::DEFAULT_DURATION_NS, |p| p.duration_d);
    let schedule = node_schedule(nodes, n, d)?;
    check_window(&schedule, n)?;
    let mut scenario = cfg.scenario.clone();
    for t in &mut scenario.targets {
        t.schedule = schedule.clone();
    }
    let mut outcome = simulate(&scenario)?;
    outcome.notes.insert(
        0,
        format!(
            "{n} node switches, last at {:.4} ns",
            schedule.switch_times.last().copied().unwrap_or(0.0)
        ),
    );
    Ok(outcome)
}

fn failures(result: &SweepResult) -> Vec<(f64, String)> {
    result
        .points
        .iter()
        .filter_map(|(v, r)| r.as_ref().err().map(|e| (*v, e.to_string())))
        .collect()
}

fn point_notes(result: &SweepResult) -> Vec<String> {
    result
        .points
        .iter()
        .filter_map(|(v, r)| r.as_ref().ok().map(|o| (v, o)))
        .flat_map(|(v, o)| o.notes.iter().map(move |n| format!("{v}: {n}")))
        .collect()
}

fn peaks_by_point(result: &SweepResult) -> Vec<PointPeaks> {
    result
        .points
        .iter()
        .filter_map(|(v, r)| {
            r.as_ref().ok().map(|o| PointPeaks {
                value: *v,
                lines: o.lines.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointPeaks {
    pub value: f64,
    pub lines: Vec<PeakReport>,
}

/// `τ_D` sweep: `spectrogram.csv`, `peaks.json`, `manifest.json`.
pub fn sweep_tau_d(spec: &SweepSpec, out_dir: &Path) -> Result<RunManifest> {
    if spec.parameter != SweepParameter::TauD {
        return Err(NfsError::config("sweep_tau_d needs the tau_d parameter"));
    }
    let started = now();
    let result = run_sweep(spec)?;
    ensure_dir(out_dir)?;
    let rows: Vec<(f64, SpectrumRecord)> = result
        .points
        .iter()
        .filter_map(|(v, r)| r.as_ref().ok().map(|o| (*v, o.spectrum.clone())))
        .collect();
    let mut files = Vec::new();
    if !rows.is_empty() {
        let gram = assemble_spectrogram(rows)?;
        files.push(write_file(&out_dir.join("spectrogram.csv"), &gram.to_csv())?);
    }
    files.push(write_file(&out_dir.join("peaks.json"), &json(&peaks_by_point(&result)))?);
    let diagnostics = Diagnostics {
        notes: point_notes(&result),
        failures: failures(&result),
        ..Diagnostics::default()
    };
    finish_manifest(out_dir, config_hash(&spec.base.scenario), started, files, diagnostics)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub delta_over_gamma: f64,
    pub max_s: f64,
    pub fwhm: f64,
    pub switching_type: u8,
}

pub fn delta_rows(spec: &SweepSpec, result: &SweepResult) -> Vec<DeltaRow> {
    let tag = spec
        .base
        .switching
        .as_ref()
        .and_then(|p| p.schedule_type)
        .unwrap_or(0);
    result
        .points
        .iter()
        .filter_map(|(v, r)| {
            let o = r.as_ref().ok()?;
            let line = dominant_line(&o.spectrum).ok();
            Some(DeltaRow {
                delta_over_gamma: *v,
                max_s: o.spectrum.max(),
                fwhm: line.map_or(f64::NAN, |l| l.fwhm),
                switching_type: tag,
            })
        })
        .collect()
}

/// Δ sweep: `delta_sweep.csv` with columns
/// `delta_over_gamma,max_s,fwhm,switching_type`, plus `peaks.json`.
pub fn sweep_delta(spec: &SweepSpec, out_dir: &Path) -> Result<RunManifest> {
    if spec.parameter != SweepParameter::DeltaOverGamma {
        return Err(NfsError::config("sweep_delta needs the delta parameter"));
    }
    let started = now();
    let result = run_sweep(spec)?;
    ensure_dir(out_dir)?;
    let mut csv = String::from("delta_over_gamma,max_s,fwhm,switching_type\n");
    for row in delta_rows(spec, &result) {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            row.delta_over_gamma, row.max_s, row.fwhm, row.switching_type
        );
    }
    let files = vec![
        write_file(&out_dir.join("delta_sweep.csv"), &csv)?,
        write_file(&out_dir.join("peaks.json"), &json(&peaks_by_point(&result)))?,
    ];
    let diagnostics = Diagnostics {
        notes: point_notes(&result),
        failures: failures(&result),
        ..Diagnostics::default()
    };
    finish_manifest(out_dir, config_hash(&spec.base.scenario), started, files, diagnostics)
}

/// Switch-count sweep: `switch_count.csv` with columns `n_switches,s0`.
pub fn sweep_switch_count(spec: &SweepSpec, out_dir: &Path) -> Result<RunManifest> {
    if spec.parameter != SweepParameter::NSwitches {
        return Err(NfsError::config("sweep_switch_count needs the nswitch parameter"));
    }
    let started = now();
    let result = run_sweep(spec)?;
    ensure_dir(out_dir)?;
    let mut csv = String::from("n_switches,s0\n");
    for (v, r) in &result.points {
        if let Ok(o) = r {
            let _ = writeln!(csv, "{},{}", *v as usize, o.spectrum.value_near(0.0));
        }
    }
    let files = vec![
        write_file(&out_dir.join("switch_count.csv"), &csv)?,
        write_file(&out_dir.join("peaks.json"), &json(&peaks_by_point(&result)))?,
    ];
    let diagnostics = Diagnostics {
        notes: point_notes(&result),
        failures: failures(&result),
        ..Diagnostics::default()
    };
    finish_manifest(out_dir, config_hash(&spec.base.scenario), started, files, diagnostics)
}

pub fn sweep(spec: &SweepSpec, out_dir: &Path) -> Result<RunManifest> {
    match spec.parameter {
        SweepParameter::TauD => sweep_tau_d(spec, out_dir),
        SweepParameter::DeltaOverGamma => sweep_delta(spec, out_dir),
        SweepParameter::NSwitches => sweep_switch_count(spec, out_dir),
    }
}
