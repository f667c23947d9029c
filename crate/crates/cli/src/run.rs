//! Scenario execution and artifact writing.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;
use vcoh_core::dynamics::{ensemble_run, IntegratorConfig};
use vcoh_core::fieldgen::{estimate_kernel, CorrelationEstimate, FieldSpec};
use vcoh_core::io::{fmt_num, fmt_opt};
use vcoh_core::measures::{linear_fit, MeasureRecord};
use vcoh_core::model::ExcitedBlock;
use vcoh_core::perturbative::{
    c_pulse_forms, excited_block_cw, excited_block_pulse_longtime, lorentzian_u,
    stationary_coherence, turnon_averaged_block, white_noise_block,
};

use crate::config::{Mode, Resolved, Scenario, ScenarioConfig};

pub const TIMESERIES_HEADER: &str = "t_fs,rho_gg,rho_22,rho_33,re_rho_23,im_rho_23,C,purity,excited_purity,stderr_rho22,stderr_rho33,stderr_re23,stderr_im23";
pub const SWEEP_HEADER: &str =
    "value,final_C,C_threshold_time_fs,slope_rho22,slope_rho33,c_pulse,f_squared,centered_f_squared,saturation,u_level2";

/// 𝒞 threshold whose first crossing is reported.
pub const C_THRESHOLD: f64 = 0.1;

/// One time-series row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub record: MeasureRecord,
    /// Standard errors of ρ₂₂, ρ₃₃, Re ρ₂₃, Im ρ₂₃ (ensemble runs only).
    pub stderr: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub mode: Mode,
    pub config: ScenarioConfig,
    pub master_seed: u64,
    pub runtime_s: f64,
    pub rows: usize,
    pub final_t_fs: Option<f64>,
    pub final_c: Option<f64>,
    /// First time 𝒞 falls below [`C_THRESHOLD`].
    pub c_threshold_time_fs: Option<f64>,
    pub fit_start_fs: Option<f64>,
    pub slope_rho22: Option<f64>,
    pub slope_rho33: Option<f64>,
    pub r_squared_rho22: Option<f64>,
    pub r_squared_rho33: Option<f64>,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub summary: RunSummary,
    pub kernel: Option<CorrelationEstimate>,
}

fn record_times(r: &Resolved, every: usize) -> impl Iterator<Item = f64> + '_ {
    (0..r.grid.len).step_by(every).map(|n| r.grid.time(n))
}

fn analytic_rows(
    r: &Resolved,
    every: usize,
    keep: impl Fn(f64) -> bool,
    block: impl Fn(f64) -> vcoh_core::Result<ExcitedBlock>,
) -> Result<Vec<Row>> {
    record_times(r, every)
        .filter(|&t| keep(t))
        .map(|t| {
            Ok(Row {
                record: MeasureRecord::from_block(t, &block(t)?),
                stderr: None,
            })
        })
        .collect()
}

/// Runs one scenario in memory.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let r = cfg.resolve()?;
    let every = cfg.grid.record_every;
    let mut details = json!({});
    let mut kernel = None;
    let mut fit_start = None;
    let rows: Vec<Row> = match (cfg.scenario, cfg.mode) {
        (Scenario::CwSudden | Scenario::Pulse, Mode::Ensemble) => {
            let integ = IntegratorConfig {
                substeps: cfg.ensemble.substeps,
                record_stride: every,
            };
            let res = ensemble_run(
                &r.system,
                &r.field,
                &r.noise,
                cfg.ensemble.n,
                &r.grid,
                cfg.ensemble.master_seed,
                cfg.ensemble.workers,
                &integ,
            )?;
            details = json!({ "realizations": res.n });
            res.times
                .iter()
                .zip(&res.mean_states)
                .zip(&res.stderr)
                .map(|((&t, s), se)| Row {
                    record: MeasureRecord::from_state(t, s),
                    stderr: Some(*se),
                })
                .collect()
        }
        (Scenario::CwSudden, Mode::Analytic) => analytic_rows(
            &r,
            every,
            |_| true,
            |t| excited_block_cw(&r.system, &r.field, t),
        )?,
        (Scenario::CwTurnonAvg, _) => {
            let FieldSpec::Cw(src) = r.field else {
                unreachable!()
            };
            let from = src.turn_on + 10.0 * src.tau_d;
            let sc = stationary_coherence(&r.system, &r.field)?;
            details = json!({ "valid_from_fs": from, "f_re": sc.f_value.re, "f_im": sc.f_value.im, "f_squared": sc.f_squared });
            analytic_rows(
                &r,
                every,
                |t| t >= from,
                |t| turnon_averaged_block(&r.system, &r.field, t),
            )?
        }
        (Scenario::Pulse, Mode::Analytic) => {
            let FieldSpec::Pulse(src) = r.field else {
                unreachable!()
            };
            let from = src.center + 4.0 * src.tau_p;
            let f = c_pulse_forms(&r.system, &r.field)?;
            details = json!({
                "valid_from_fs": from,
                "c_pulse_direct": f.direct,
                "c_pulse_general": f.general,
                "c_pulse_centered": f.centered,
                "c_pulse_long_pulse": f.long_pulse,
                "c_pulse_long_pulse_leading": f.long_pulse_leading,
            });
            analytic_rows(
                &r,
                every,
                |t| t >= from,
                |t| excited_block_pulse_longtime(&r.system, &r.field, t),
            )?
        }
        (Scenario::WhiteNoise, _) => analytic_rows(
            &r,
            every,
            |t| t >= 0.0,
            |t| white_noise_block(&r.system, &r.field, t),
        )?,
        (Scenario::CorrelationCheck, _) => {
            let est = estimate_kernel(
                &r.field,
                &r.noise,
                cfg.ensemble.n,
                &r.grid,
                cfg.ensemble.master_seed,
                cfg.ensemble.kernel_stride,
            )?;
            let check = est.check_against(&r.field, 0.05, 4.0)?;
            details = json!({
                "realizations": est.n_realizations,
                "kernel_points": est.dim(),
                "max_deviation": check.max_deviation,
                "worst_ratio": check.worst_ratio,
                "abs_tolerance": check.abs_tolerance,
                "k_sigma": check.k_sigma,
                "passed": check.passed(),
            });
            kernel = Some(est);
            Vec::new()
        }
        (Scenario::StationaryF, _) => {
            let sc = stationary_coherence(&r.system, &r.field)?;
            details = json!({
                "tau_d_fs": r.field.tau_d(),
                "f_re": sc.f_value.re,
                "f_im": sc.f_value.im,
                "f_squared": sc.f_squared,
                "centered_f_squared": sc.centered_f_squared,
                "saturation": sc.saturation,
                "tau_d_omega": r.field.tau_d().unwrap_or(0.0) * r.system.splitting(),
            });
            Vec::new()
        }
    };
    if matches!(
        cfg.scenario,
        Scenario::CwSudden | Scenario::CwTurnonAvg | Scenario::Pulse | Scenario::WhiteNoise
    ) && rows.is_empty()
    {
        bail!(
            "grid: no output times fall where the {:?} result applies",
            cfg.scenario
        );
    }
    if let FieldSpec::Cw(src) = r.field {
        let w = [r.system.transition_freq(0), r.system.transition_freq(1)];
        if let Some(obj) = details.as_object_mut() {
            obj.insert("u_level2".into(), json!(lorentzian_u(w[0], &src)));
            obj.insert("u_level3".into(), json!(lorentzian_u(w[1], &src)));
        }
        if matches!(cfg.scenario, Scenario::CwSudden | Scenario::CwTurnonAvg) {
            fit_start = Some(src.turn_on + 3.0 * src.tau_d);
        }
    }

    let fit_rows: Vec<&Row> = match fit_start {
        Some(t0) => rows.iter().filter(|row| row.record.t >= t0).collect(),
        None => rows.iter().collect(),
    };
    let ts: Vec<f64> = fit_rows.iter().map(|row| row.record.t).collect();
    let fit = |f: fn(&MeasureRecord) -> f64| {
        let ys: Vec<f64> = fit_rows.iter().map(|row| f(&row.record)).collect();
        linear_fit(&ts, &ys).ok()
    };
    let f22 = fit(|m| m.pop_2);
    let f33 = fit(|m| m.pop_3);
    let threshold = rows
        .iter()
        .find(|row| row.record.c_measure.is_some_and(|c| c < C_THRESHOLD))
        .map(|row| row.record.t);

    let summary = RunSummary {
        scenario: cfg.scenario,
        mode: cfg.mode,
        config: cfg.clone(),
        master_seed: cfg.ensemble.master_seed,
        runtime_s: started.elapsed().as_secs_f64(),
        rows: rows.len(),
        final_t_fs: rows.last().map(|row| row.record.t),
        final_c: rows.last().and_then(|row| row.record.c_measure),
        c_threshold_time_fs: threshold,
        fit_start_fs: fit_start.filter(|_| ts.len() >= 2),
        slope_rho22: f22.map(|f| f.slope),
        slope_rho33: f33.map(|f| f.slope),
        r_squared_rho22: f22.map(|f| f.r_squared),
        r_squared_rho33: f33.map(|f| f.r_squared),
        details,
    };
    Ok(RunOutput {
        rows,
        summary,
        kernel,
    })
}

pub fn write_timeseries<W: Write>(rows: &[Row], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TIMESERIES_HEADER}")?;
    for row in rows {
        let m = &row.record;
        let se = row.stderr.map(|s| s.map(Some)).unwrap_or([None; 4]);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_num(m.t),
            fmt_num(m.pop_g),
            fmt_num(m.pop_2),
            fmt_num(m.pop_3),
            fmt_num(m.coh_re),
            fmt_num(m.coh_im),
            fmt_opt(m.c_measure),
            fmt_num(m.purity),
            fmt_opt(m.excited_purity),
            fmt_opt(se[0]),
            fmt_opt(se[1]),
            fmt_opt(se[2]),
            fmt_opt(se[3]),
        )?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("output directory {} is not writable", dir.display()))
}

/// Writes the CSV and JSON artifacts of `output`; returns their paths.
pub fn write_artifacts(cfg: &ScenarioConfig, output: &RunOutput) -> Result<Vec<PathBuf>> {
    let dir = &cfg.output.dir;
    prepare_dir(dir)?;
    let prefix = cfg.prefix();
    let mut paths = Vec::new();
    if let Some(k) = &output.kernel {
        let p = dir.join(format!("{prefix}_kernel.csv"));
        let mut w = create(&p)?;
        k.write_csv(&mut w)?;
        w.flush()?;
        paths.push(p);
    } else if cfg.scenario == Scenario::StationaryF {
        let p = dir.join(format!("{prefix}_stationary.csv"));
        let mut w = create(&p)?;
        let d = &output.summary.details;
        let num = |k: &str| fmt_opt(d[k].as_f64());
        writeln!(w, "tau_d_fs,f_squared,centered_f_squared,saturation")?;
        writeln!(
            w,
            "{},{},{},{}",
            num("tau_d_fs"),
            num("f_squared"),
            num("centered_f_squared"),
            num("saturation")
        )?;
        w.flush()?;
        paths.push(p);
    } else {
        let p = dir.join(format!("{prefix}_timeseries.csv"));
        let mut w = create(&p)?;
        write_timeseries(&output.rows, &mut w)?;
        w.flush()?;
        paths.push(p);
    }
    let p = dir.join(format!("{prefix}_summary.json"));
    let mut w = create(&p)?;
    serde_json::to_writer_pretty(&mut w, &output.summary)?;
    writeln!(w)?;
    w.flush()?;
    paths.push(p);
    Ok(paths)
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub final_c: Option<f64>,
    pub c_threshold_time_fs: Option<f64>,
    pub slope_rho22: Option<f64>,
    pub slope_rho33: Option<f64>,
    pub c_pulse: Option<f64>,
    pub f_squared: Option<f64>,
    pub centered_f_squared: Option<f64>,
    pub saturation: Option<f64>,
    pub u_level2: Option<f64>,
}

/// Runs `base` once per value of `axis`.
pub fn sweep(base: &ScenarioConfig, axis: &str, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    values
        .iter()
        .map(|&v| {
            let mut cfg = base.clone();
            cfg.set_axis(axis, v)?;
            let out = run_scenario(&cfg).with_context(|| format!("{axis} = {v}"))?;
            let s = &out.summary;
            let d = &s.details;
            let c_pulse = match cfg.scenario {
                Scenario::Pulse => {
                    let r = cfg.resolve()?;
                    Some(vcoh_core::perturbative::c_pulse(&r.system, &r.field)?)
                }
                _ => None,
            };
            Ok(SweepRow {
                value: v,
                final_c: s.final_c,
                c_threshold_time_fs: s.c_threshold_time_fs,
                slope_rho22: s.slope_rho22,
                slope_rho33: s.slope_rho33,
                c_pulse,
                f_squared: d["f_squared"].as_f64(),
                centered_f_squared: d["centered_f_squared"].as_f64(),
                saturation: d["saturation"].as_f64(),
                u_level2: d["u_level2"].as_f64(),
            })
        })
        .collect()
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            fmt_num(r.value),
            fmt_opt(r.final_c),
            fmt_opt(r.c_threshold_time_fs),
            fmt_opt(r.slope_rho22),
            fmt_opt(r.slope_rho33),
            fmt_opt(r.c_pulse),
            fmt_opt(r.f_squared),
            fmt_opt(r.centered_f_squared),
            fmt_opt(r.saturation),
            fmt_opt(r.u_level2),
        )?;
    }
    Ok(())
}

pub fn write_sweep_file(cfg: &ScenarioConfig, axis: &str, rows: &[SweepRow]) -> Result<PathBuf> {
    prepare_dir(&cfg.output.dir)?;
    let name = axis.replace('.', "_");
    let p = cfg
        .output
        .dir
        .join(format!("{}_sweep_{name}.csv", cfg.prefix()));
    let mut w = create(&p)?;
    write_sweep(rows, &mut w)?;
    w.flush()?;
    Ok(p)
}
