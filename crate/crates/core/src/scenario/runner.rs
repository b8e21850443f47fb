//! Executes a [`Scenario`]: evaluates every (series, sweep point) pair on a
//! bounded worker pool, writes the CSV tables and a `manifest.json`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{hz, to_hz, Covariance4, SystemParams};
use crate::noise::{noise_report, output_noise_spectrum, paramp_rate_from_db_rate};
use crate::pool::bounded_map;
use crate::power::{modulation_amplitude_from_power, required_power, PowerSpec};
use crate::propagator::{
    bounded_steady_state, floquet_steady_state, iterate_periods, period_map, periods_for,
    trajectory_from_map, ABS_TOL, DEFAULT_REL_TOL, STABILITY_THRESHOLD,
};
use crate::protocol::{execute_schedule, plan_conversion, Target};
use crate::quadrature::{
    amplification_rate, eigen_quadratures, fwhm_from_rows, initial_state, optimize_drive,
    squeezing_db, system_metrics, DriveBox, Objective, OptimizeOptions, RateFit, SystemMetrics,
};
use crate::resonance::{resonance_frequencies, resonance_strength, Branch, EnvelopeConfig};

use super::config::*;
use super::output::{fmt_f64, fmt_opt, write_json, Manifest, Table};

/// Command-line overrides applied on top of the document.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub rel_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    /// Some rows or per-series summaries failed.
    Partial,
    /// Every row failed.
    Failed,
}

impl RunStatus {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Failed => 2,
            RunStatus::Partial => 3,
        }
    }
}

/// Exit code for a run that could not complete.
pub fn exit_code_for(err: &Error) -> i32 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub status: RunStatus,
    pub output_dir: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub rows: usize,
    pub failed_rows: usize,
    pub summary: Value,
}

struct Point {
    label: String,
    x: Option<f64>,
    params: SystemParams,
}

struct Ctx<'a> {
    sc: &'a Scenario,
    rel_tol: f64,
    workers: Option<usize>,
    dir: PathBuf,
    points: Vec<Point>,
    series_points: Vec<(String, SystemParams)>,
    var: Option<String>,
}

#[derive(Default)]
struct ActionOutput {
    outputs: Vec<PathBuf>,
    rows: usize,
    failed_rows: usize,
    failed_summaries: usize,
    summary: Value,
    resolved_options: Value,
}

fn status_cell<T>(r: &Result<T>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("error: {e}"),
    }
}

/// Parameter point in document units.
pub fn params_document(p: &SystemParams) -> Value {
    json!({
        "omega_c_hz": to_hz(p.omega_c),
        "omega_s_hz": to_hz(p.omega_s),
        "g_hz": to_hz(p.g),
        "lambda_hz": to_hz(p.lambda_drive),
        "omega_drive_hz": to_hz(p.omega_drive),
        "gamma_c_hz": to_hz(p.gamma_c),
        "gamma_l_hz": to_hz(p.gamma_l),
        "kappa_hz": to_hz(p.kappa),
        "temperature_k": p.temperature,
        "n_s": p.n_s,
        "n_thermal": p.n_thermal(),
    })
}

pub fn run_config_file(path: &Path, overrides: &RunOverrides) -> Result<RunSummary> {
    let sc = Scenario::from_path(path)?;
    run_scenario(&sc, overrides)
}

pub fn run_scenario(sc: &Scenario, overrides: &RunOverrides) -> Result<RunSummary> {
    let started = Instant::now();
    let rel_tol = overrides.rel_tol.or(sc.rel_tol).unwrap_or(DEFAULT_REL_TOL);
    if !(1e-14..=1e-3).contains(&rel_tol) {
        return Err(Error::Config {
            path: "rel_tol".into(),
            message: format!("{rel_tol} is outside [1e-14, 1e-3]"),
        });
    }
    let workers = overrides.workers.or(sc.workers);
    if workers == Some(0) {
        return Err(Error::Config {
            path: "workers".into(),
            message: "must be at least 1".into(),
        });
    }
    let name = sc.name();
    let dir = overrides
        .output_dir
        .clone()
        .or_else(|| sc.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&name));

    let (base, mut defaulted) = sc.params.resolve()?;
    let mut series_points = Vec::new();
    if sc.series.is_empty() {
        series_points.push((String::new(), base));
    } else {
        for s in &sc.series {
            let (p, d) = sc.params.overlay(&s.params).resolve()?;
            defaulted.retain(|k| d.contains(k));
            series_points.push((s.label.clone(), p));
        }
    }
    let var = sc.sweep_variable();
    let xs = match &sc.sweep {
        Some(s) => Some(s.points()?),
        None => None,
    };
    let mut points = Vec::new();
    for (label, p) in &series_points {
        match (&xs, &var) {
            (Some(xs), Some(v)) => {
                for &x in xs {
                    let mut q = *p;
                    set_param(&mut q, v, x)?;
                    q.validate()?;
                    points.push(Point {
                        label: label.clone(),
                        x: Some(x),
                        params: q,
                    });
                }
            }
            _ => points.push(Point {
                label: label.clone(),
                x: None,
                params: *p,
            }),
        }
    }

    std::fs::create_dir_all(&dir)?;
    let ctx = Ctx {
        sc,
        rel_tol,
        workers,
        dir: dir.clone(),
        points,
        series_points,
        var,
    };
    let out = match sc.action {
        Action::Trajectory => trajectory(&ctx)?,
        Action::SteadyState => steady_state(&ctx)?,
        Action::RateVsAmplitude | Action::RateVsTemperature => rate_sweep(&ctx, "rates.csv")?,
        Action::Bandwidth => bandwidth(&ctx)?,
        Action::Optimize => optimize(&ctx)?,
        Action::NoiseReport => noise(&ctx)?,
        Action::Protocol => protocol(&ctx)?,
        Action::Resonance => resonance(&ctx)?,
        Action::Power => power(&ctx)?,
    };

    let status = if out.rows > 0 && out.failed_rows == out.rows {
        RunStatus::Failed
    } else if out.failed_rows > 0 || out.failed_summaries > 0 {
        RunStatus::Partial
    } else {
        RunStatus::Ok
    };
    let manifest = Manifest {
        name: name.clone(),
        action: sc.action.as_str().into(),
        preset: sc.preset.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        params: params_document(&base),
        defaulted,
        options: out.resolved_options.clone(),
        series: Value::Array(
            ctx.series_points
                .iter()
                .filter(|(l, _)| !l.is_empty())
                .map(|(l, p)| json!({ "label": l, "params": params_document(p) }))
                .collect(),
        ),
        sweep: serde_json::to_value(&sc.sweep).unwrap_or(Value::Null),
        rel_tol,
        abs_tol: ABS_TOL,
        workers,
        notes: sc.notes.clone(),
        outputs: out.outputs.clone(),
        rows: out.rows,
        failed_rows: out.failed_rows,
        status: format!("{status:?}").to_lowercase(),
        summary: out.summary.clone(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let manifest_path = dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    Ok(RunSummary {
        name,
        status,
        output_dir: dir,
        outputs: out.outputs,
        manifest: manifest_path,
        rows: out.rows,
        failed_rows: out.failed_rows,
        summary: out.summary,
    })
}

fn file_name(stem: &str, label: &str) -> String {
    if label.is_empty() {
        format!("{stem}.csv")
    } else {
        format!("{stem}_{label}.csv")
    }
}

struct Evolution {
    duration: f64,
    periods: Option<usize>,
    samples: usize,
    thermal_start: bool,
}

impl Evolution {
    fn from_options(o: &Options) -> Self {
        Evolution {
            duration: o.duration_s.unwrap_or(DEFAULT_DURATION_S),
            periods: o.periods,
            samples: o.samples.unwrap_or(DEFAULT_SAMPLES).max(1),
            thermal_start: o.thermal_start.unwrap_or(false),
        }
    }

    fn document(&self) -> Value {
        json!({
            "duration_s": self.duration,
            "periods": self.periods,
            "samples": self.samples,
            "thermal_start": self.thermal_start,
        })
    }

    fn periods(&self, p: &SystemParams) -> usize {
        self.periods.unwrap_or_else(|| periods_for(p, self.duration)).max(1)
    }

    fn run(&self, p: &SystemParams, rel_tol: f64) -> Result<crate::propagator::Trajectory> {
        let map = period_map(p, rel_tol)?;
        let n = self.periods(p);
        let stride = (n / self.samples).max(1);
        trajectory_from_map(p, &map, &initial_state(p, self.thermal_start), n, stride)
    }

    fn rate_and_metrics(&self, p: &SystemParams, rel_tol: f64) -> Result<(RateFit, SystemMetrics)> {
        let traj = self.run(p, rel_tol)?;
        let fit = amplification_rate(&traj)?;
        let last = traj.last().expect("trajectory has samples");
        Ok((fit, system_metrics(last)))
    }
}

fn rate_table(ctx: &Ctx, results: &[RateResult]) -> Table {
    let mut header = vec!["series"];
    if let Some(v) = &ctx.var {
        header.push(v.as_str());
    }
    header.extend(["rate_db_per_us", "s_sqz_db", "s_amp_db", "monotone", "status"]);
    let mut t = Table::new(&header);
    for (pt, r) in ctx.points.iter().zip(results) {
        let mut row = vec![pt.label.clone()];
        if ctx.var.is_some() {
            row.push(fmt_opt(pt.x));
        }
        match r {
            Ok((fit, m)) => row.extend([
                fmt_f64(fit.rate_db_per_us),
                fmt_f64(m.s_sqz),
                fmt_f64(m.s_amp),
                fit.monotone.to_string(),
            ]),
            Err(_) => row.extend([String::new(), String::new(), String::new(), String::new()]),
        }
        row.push(status_cell(r));
        t.push(row);
    }
    t
}

type RateResult = Result<(RateFit, SystemMetrics)>;

fn rate_results(ctx: &Ctx, evo: &Evolution) -> Vec<RateResult> {
    bounded_map(&ctx.points, ctx.workers, |pt| evo.rate_and_metrics(&pt.params, ctx.rel_tol))
}

fn rate_sweep(ctx: &Ctx, file: &str) -> Result<ActionOutput> {
    let evo = Evolution::from_options(&ctx.sc.options);
    let results = rate_results(ctx, &evo);
    rate_output(ctx, file, &evo, &results)
}

fn rate_output(ctx: &Ctx, file: &str, evo: &Evolution, results: &[RateResult]) -> Result<ActionOutput> {
    let table = rate_table(ctx, results);
    let path = ctx.dir.join(file);
    table.write(&path)?;
    let summary: Vec<Value> = ctx
        .points
        .iter()
        .zip(results)
        .filter(|(_, r)| r.is_ok())
        .filter(|(pt, _)| pt.x.is_none())
        .map(|(pt, r)| {
            let (fit, m) = r.as_ref().unwrap();
            json!({
                "series": pt.label,
                "rate_db_per_us": fit.rate_db_per_us,
                "rate_db_per_ms": fit.rate_db_per_us * 1e3,
                "s_amp_db": m.s_amp,
                "s_sqz_db": m.s_sqz,
            })
        })
        .collect();
    Ok(ActionOutput {
        outputs: vec![path],
        rows: results.len(),
        failed_rows: results.iter().filter(|r| r.is_err()).count(),
        summary: Value::Array(summary),
        resolved_options: evo.document(),
        ..Default::default()
    })
}

fn trajectory(ctx: &Ctx) -> Result<ActionOutput> {
    let evo = Evolution::from_options(&ctx.sc.options);
    let runs = bounded_map(&ctx.points, ctx.workers, |pt| evo.run(&pt.params, ctx.rel_tol));
    let mut out = ActionOutput {
        resolved_options: evo.document(),
        ..Default::default()
    };
    let mut summary = Vec::new();
    for (pt, run) in ctx.points.iter().zip(runs) {
        let stem = match pt.x {
            Some(x) => format!("{}_{}", pt.label, fmt_f64(x)),
            None => pt.label.clone(),
        };
        out.rows += 1;
        let traj = match run {
            Ok(t) => t,
            Err(e) => {
                out.failed_rows += 1;
                summary.push(json!({ "series": stem, "error": e.to_string() }));
                continue;
            }
        };
        let mut t = Table::new(&[
            "time_s", "c11", "c12", "c13", "c14", "c22", "c23", "c24", "c33", "c34", "c44", "v1", "v2",
            "v3", "v4",
        ]);
        for (time, c) in &traj.samples {
            let mut row = vec![fmt_f64(*time)];
            row.extend(c.upper_triangle().iter().map(|v| fmt_f64(*v)));
            row.extend(eigen_quadratures(c).variances().iter().map(|v| fmt_f64(*v)));
            t.push(row);
        }
        let path = ctx.dir.join(file_name("trajectory", &stem));
        t.write(&path)?;
        out.outputs.push(path);
        let m = system_metrics(traj.last().expect("non-empty"));
        let fit = amplification_rate(&traj).ok();
        summary.push(json!({
            "series": stem,
            "final_time_s": traj.samples.last().map(|s| s.0),
            "s_amp_db": m.s_amp,
            "s_sqz_db": m.s_sqz,
            "rate_db_per_us": fit.map(|f| f.rate_db_per_us),
        }));
    }
    out.summary = Value::Array(summary);
    Ok(out)
}

struct SteadyRow {
    method: &'static str,
    spectral_radius: f64,
    v_min: f64,
    s_sqz: f64,
    s_amp: Option<f64>,
}

fn steady_point(p: &SystemParams, horizon: f64, rel_tol: f64) -> Result<SteadyRow> {
    let map = period_map(p, rel_tol)?;
    let rho = map.spectral_radius();
    if p.gamma() == 0.0 && p.kappa == 0.0 {
        let c = iterate_periods(&Covariance4::vacuum(), &map, periods_for(p, horizon))?;
        let m = system_metrics(&c);
        return Ok(SteadyRow {
            method: "horizon",
            spectral_radius: rho,
            v_min: m.v_min,
            s_sqz: m.s_sqz,
            s_amp: Some(m.s_amp),
        });
    }
    if rho < STABILITY_THRESHOLD {
        let m = system_metrics(&floquet_steady_state(&map)?);
        Ok(SteadyRow {
            method: "floquet",
            spectral_radius: rho,
            v_min: m.v_min,
            s_sqz: m.s_sqz,
            s_amp: Some(m.s_amp),
        })
    } else {
        let b = bounded_steady_state(&map)?;
        Ok(SteadyRow {
            method: "bounded",
            spectral_radius: rho,
            v_min: b.min_variance(),
            s_sqz: b.s_sqz(),
            s_amp: None,
        })
    }
}

fn steady_state(ctx: &Ctx) -> Result<ActionOutput> {
    let horizon = ctx
        .sc
        .options
        .undamped_horizon_s
        .unwrap_or(DEFAULT_UNDAMPED_HORIZON_S);
    let results = bounded_map(&ctx.points, ctx.workers, |pt| steady_point(&pt.params, horizon, ctx.rel_tol));
    let mut header = vec!["series"];
    if let Some(v) = &ctx.var {
        header.push(v.as_str());
    }
    header.extend(["s_sqz_db", "s_amp_db", "v_min", "spectral_radius", "method", "status"]);
    let mut t = Table::new(&header);
    for (pt, r) in ctx.points.iter().zip(&results) {
        let mut row = vec![pt.label.clone()];
        if ctx.var.is_some() {
            row.push(fmt_opt(pt.x));
        }
        match r {
            Ok(s) => row.extend([
                fmt_f64(s.s_sqz),
                fmt_opt(s.s_amp),
                fmt_f64(s.v_min),
                fmt_f64(s.spectral_radius),
                s.method.to_string(),
            ]),
            Err(_) => row.extend(std::iter::repeat(String::new()).take(5)),
        }
        row.push(status_cell(r));
        t.push(row);
    }
    let path = ctx.dir.join("steady_state.csv");
    t.write(&path)?;
    Ok(ActionOutput {
        outputs: vec![path],
        rows: results.len(),
        failed_rows: results.iter().filter(|r| r.is_err()).count(),
        summary: json!({}),
        resolved_options: json!({ "undamped_horizon_s": horizon }),
        ..Default::default()
    })
}

fn bandwidth(ctx: &Ctx) -> Result<ActionOutput> {
    let evo = Evolution::from_options(&ctx.sc.options);
    let results = rate_results(ctx, &evo);
    let mut out = rate_output(ctx, "bandwidth.csv", &evo, &results)?;
    let mut summary = Vec::new();
    for (label, _) in &ctx.series_points {
        let rows: Vec<(f64, RateFit)> = ctx
            .points
            .iter()
            .zip(&results)
            .filter(|(pt, _)| &pt.label == label)
            .filter_map(|(pt, r)| r.as_ref().ok().map(|r| (pt.params.omega_c, r.0)))
            .collect();
        match fwhm_from_rows(rows) {
            Ok(b) => summary.push(json!({
                "series": label,
                "fwhm_hz": b.fwhm_hz,
                "peak_omega_c_hz": to_hz(b.peak_omega_c),
                "peak_rate_db_per_us": b.peak_rate,
            })),
            Err(e) => {
                out.failed_summaries += 1;
                summary.push(json!({ "series": label, "error": e.to_string() }));
            }
        }
    }
    out.summary = Value::Array(summary);
    Ok(out)
}

fn optimize(ctx: &Ctx) -> Result<ActionOutput> {
    let o = &ctx.sc.options;
    let bounds = match o.r#box {
        Some(b) => DriveBox {
            omega_drive: (hz(b.omega_drive_hz.0), hz(b.omega_drive_hz.1)),
            omega_s: (hz(b.omega_s_hz.0), hz(b.omega_s_hz.1)),
            lambda_drive: (hz(b.lambda_hz.0), hz(b.lambda_hz.1)),
        },
        None => DriveBox::default_box(),
    };
    let defaults = OptimizeOptions::default();
    let opts = OptimizeOptions {
        objective: o.objective.unwrap_or(Objective::MaxAmplification),
        evolution_time: o.duration_s.unwrap_or(defaults.evolution_time),
        grid: o.grid.unwrap_or(defaults.grid),
        budget: o.budget.unwrap_or(defaults.budget),
        rel_tol: ctx.rel_tol,
    };
    let mut t = Table::new(&[
        "series",
        "omega_drive_hz",
        "omega_s_hz",
        "lambda_hz",
        "value_db",
        "grid_evaluations",
        "simplex_evaluations",
        "converged",
        "status",
    ]);
    let mut out = ActionOutput::default();
    let mut summary = Vec::new();
    for pt in &ctx.points {
        out.rows += 1;
        let r = optimize_drive(&pt.params, &bounds, &opts, ctx.workers);
        let mut row = vec![pt.label.clone()];
        match &r {
            Ok(res) => {
                row.extend([
                    fmt_f64(to_hz(res.params.omega_drive)),
                    fmt_f64(to_hz(res.params.omega_s)),
                    fmt_f64(to_hz(res.params.lambda_drive)),
                    fmt_f64(res.value),
                    res.grid_evaluations.to_string(),
                    res.simplex_evaluations.to_string(),
                    res.converged.to_string(),
                ]);
                summary.push(json!({
                    "series": pt.label,
                    "params": params_document(&res.params),
                    "value_db": res.value,
                    "converged": res.converged,
                }));
            }
            Err(e) => {
                out.failed_rows += 1;
                row.extend(std::iter::repeat(String::new()).take(7));
                summary.push(json!({ "series": pt.label, "error": e.to_string() }));
            }
        }
        row.push(status_cell(&r));
        t.push(row);
    }
    let path = ctx.dir.join("optimize.csv");
    t.write(&path)?;
    out.outputs.push(path);
    out.summary = Value::Array(summary);
    out.resolved_options = json!({
        "objective": opts.objective,
        "evolution_time_s": opts.evolution_time,
        "grid": opts.grid,
        "budget": opts.budget,
        "box": {
            "omega_drive_hz": [to_hz(bounds.omega_drive.0), to_hz(bounds.omega_drive.1)],
            "omega_s_hz": [to_hz(bounds.omega_s.0), to_hz(bounds.omega_s.1)],
            "lambda_hz": [to_hz(bounds.lambda_drive.0), to_hz(bounds.lambda_drive.1)],
        },
    });
    Ok(out)
}

/// Paramp rate for a noise report: given directly, as a fraction of the
/// threshold, or from the simulated undamped amplification rate.
fn paramp_rate(p: &SystemParams, o: &Options, evo: &Evolution, rel_tol: f64) -> Result<(f64, Value)> {
    if let Some(k) = o.k_per_s {
        return Ok((k, json!({ "source": "given" })));
    }
    if let Some(xi) = o.xi {
        let k = xi * (p.gamma() * p.kappa).sqrt();
        return Ok((k, json!({ "source": "xi", "xi": xi })));
    }
    let fit = crate::quadrature::rate_at(
        &p.undamped(),
        &crate::quadrature::RateOptions {
            duration: evo.duration,
            samples: evo.samples,
            rel_tol,
            thermal_start: false,
        },
    )?;
    let k = paramp_rate_from_db_rate(fit.rate_db_per_us.max(0.0) * 1e6)?;
    Ok((
        k,
        json!({ "source": "undamped-simulation", "rate_db_per_us": fit.rate_db_per_us }),
    ))
}

fn noise(ctx: &Ctx) -> Result<ActionOutput> {
    let o = &ctx.sc.options;
    let evo = Evolution::from_options(o);
    let mut out = ActionOutput {
        resolved_options: json!({ "k_per_s": o.k_per_s, "xi": o.xi, "rate_duration_s": evo.duration }),
        ..Default::default()
    };
    let mut reports = Vec::new();
    for pt in &ctx.points {
        out.rows += 1;
        let r = paramp_rate(&pt.params, o, &evo, ctx.rel_tol)
            .and_then(|(k, src)| noise_report(&pt.params, k).map(|n| (n, src)));
        let (rep, src) = match r {
            Ok(v) => v,
            Err(e) => {
                out.failed_rows += 1;
                reports.push(json!({ "series": pt.label, "error": e.to_string() }));
                continue;
            }
        };
        if let (Some(spec), true) = (o.spectrum, rep.stable) {
            let mut t = Table::new(&["nu_hz", "s_nu", "status"]);
            let n = spec.points.max(2);
            for i in 0..n {
                let nu = spec.stop_hz * i as f64 / (n - 1) as f64;
                let s = output_noise_spectrum(hz(nu), &pt.params, rep.k);
                t.push(vec![fmt_f64(nu), s.as_ref().map(|v| fmt_f64(*v)).unwrap_or_default(), status_cell(&s)]);
            }
            let path = ctx.dir.join(file_name("spectrum", &pt.label));
            t.write(&path)?;
            out.outputs.push(path);
        }
        reports.push(json!({
            "series": pt.label,
            "k_source": src,
            "report": rep,
            "params": params_document(&pt.params),
        }));
    }
    let path = ctx.dir.join("noise_report.json");
    write_json(&path, &reports)?;
    out.outputs.push(path);
    out.summary = Value::Array(reports);
    Ok(out)
}

fn protocol(ctx: &Ctx) -> Result<ActionOutput> {
    let o = &ctx.sc.options;
    let start_s = o.start_s.unwrap_or(DEFAULT_PROTOCOL_START_S);
    let target = o.target.unwrap_or(Target::SingleMode);
    let mut out = ActionOutput {
        resolved_options: json!({
            "start_s": start_s,
            "target": target,
            "detuning_hz": o.detuning_hz,
        }),
        ..Default::default()
    };
    let mut summary = Vec::new();
    for pt in &ctx.points {
        out.rows += 1;
        let p = &pt.params;
        let run = || -> Result<(Value, Table)> {
            let map = period_map(p, ctx.rel_tol)?;
            let (c, start) = if map.spectral_radius() < STABILITY_THRESHOLD {
                (floquet_steady_state(&map)?, "floquet")
            } else {
                (
                    iterate_periods(&Covariance4::vacuum(), &map, periods_for(p, start_s))?,
                    "evolved",
                )
            };
            let spectrum = eigen_quadratures(&c);
            let schedule = plan_conversion(&spectrum, target, p.g, o.detuning_hz.map(hz))?;
            let result = execute_schedule(&c, &spectrum, &schedule);
            let mut t = Table::new(&[
                "stage",
                "angle_rad",
                "time_s",
                "sd_q1",
                "sd_q2",
                "sd_q1_target",
                "sd_q2_target",
                "sd_vacuum",
            ]);
            for pp in &result.path {
                t.push(vec![
                    pp.stage.to_string(),
                    fmt_f64(pp.angle),
                    fmt_f64(pp.time),
                    fmt_f64(pp.sd_initial[0]),
                    fmt_f64(pp.sd_initial[1]),
                    fmt_f64(pp.sd_final[0]),
                    fmt_f64(pp.sd_final[1]),
                    fmt_f64(0.5),
                ]);
            }
            let v_min = spectrum.min_variance();
            let axes: Vec<Vec<f64>> = (0..2).map(|i| spectrum.axis(i).iter().copied().collect()).collect();
            let v = json!({
                "series": pt.label,
                "start": start,
                "input_v_min": v_min,
                "input_s_sqz_db": squeezing_db(v_min)?,
                "input_axes": axes,
                "delta_psi_over_pi": schedule.delta_psi / std::f64::consts::PI,
                "delta_theta_over_pi": schedule.delta_theta / std::f64::consts::PI,
                "detuning_hz": to_hz(schedule.detuning),
                "g_hz": to_hz(schedule.g_used),
                "t1_s": schedule.durations.0,
                "t2_s": schedule.durations.1,
                "va_min": result.va_min,
                "vb_min": result.vb_min,
                "s_a_db": squeezing_db(result.va_min)?,
                "s_b_db": squeezing_db(result.vb_min)?,
            });
            Ok((v, t))
        };
        match run() {
            Ok((v, t)) => {
                let path = ctx.dir.join(file_name("protocol_path", &pt.label));
                t.write(&path)?;
                out.outputs.push(path);
                summary.push(v);
            }
            Err(e) => {
                out.failed_rows += 1;
                summary.push(json!({ "series": pt.label, "error": e.to_string() }));
            }
        }
    }
    let path = ctx.dir.join("protocol.json");
    write_json(&path, &summary)?;
    out.outputs.push(path);
    out.summary = Value::Array(summary);
    Ok(out)
}

fn resonance(ctx: &Ctx) -> Result<ActionOutput> {
    let o = &ctx.sc.options;
    let n_max = o.n_max.unwrap_or(DEFAULT_N_MAX);
    let t_ref = o.reference_time_s.unwrap_or(DEFAULT_REFERENCE_TIME_S);
    let mut t = Table::new(&[
        "series",
        "n",
        "branch",
        "frequency_hz",
        "abs_f_minus_sigma",
        "abs_f_minus_delta",
        "abs_f_plus_delta",
        "abs_f_plus_sigma",
        "status",
    ]);
    let mut out = ActionOutput {
        resolved_options: json!({ "n_max": n_max, "reference_time_s": t_ref }),
        ..Default::default()
    };
    for pt in &ctx.points {
        let spec = resonance_frequencies(pt.params.omega_c, pt.params.omega_s, n_max)?;
        for h in &spec.harmonics {
            out.rows += 1;
            let q = SystemParams {
                omega_drive: h.frequency,
                ..pt.params
            };
            let cfg = EnvelopeConfig::new(q.lambda_drive, q.omega_drive);
            let r = resonance_strength(&q, t_ref, &cfg);
            let mut row = vec![
                pt.label.clone(),
                h.n.to_string(),
                match h.branch {
                    Branch::Sum => "sum".into(),
                    Branch::Difference => "difference".into(),
                },
                fmt_f64(to_hz(h.frequency)),
            ];
            match &r {
                Ok(f) => row.extend(f.iter().map(|z| fmt_f64(z.norm()))),
                Err(_) => {
                    out.failed_rows += 1;
                    row.extend(std::iter::repeat(String::new()).take(4));
                }
            }
            row.push(status_cell(&r));
            t.push(row);
        }
    }
    let path = ctx.dir.join("resonances.csv");
    t.write(&path)?;
    out.outputs.push(path);
    out.summary = json!({});
    Ok(out)
}

fn power(ctx: &Ctx) -> Result<ActionOutput> {
    let cfg = ctx.sc.options.power.expect("checked at parse time");
    let mut spec = PowerSpec::new(cfg.conversion_factor, cfg.units);
    if let Some(gm) = cfg.gyromagnetic_hz_per_mt {
        spec.gyromagnetic = gm;
    }
    let report = power_report(&spec, cfg.watts, cfg.lambda_hz)?;
    let path = ctx.dir.join("power.json");
    write_json(&path, &report)?;
    Ok(ActionOutput {
        outputs: vec![path],
        rows: 1,
        summary: report,
        resolved_options: json!({ "gyromagnetic_hz_per_mt": spec.gyromagnetic }),
        ..Default::default()
    })
}

/// Forward (`watts`) or inverse (`lambda_hz`) conversion as a JSON record.
pub fn power_report(spec: &PowerSpec, watts: Option<f64>, lambda_hz: Option<f64>) -> Result<Value> {
    let (w, l) = match (watts, lambda_hz) {
        (Some(w), None) => {
            let l = modulation_amplitude_from_power(&spec.with_power(w))?;
            (w, to_hz(l))
        }
        (None, Some(l)) => (required_power(hz(l), spec)?, l),
        _ => {
            return Err(Error::Config {
                path: "power".into(),
                message: "give exactly one of watts and lambda_hz".into(),
            })
        }
    };
    Ok(json!({
        "conversion_factor": spec.conversion_factor,
        "units": spec.units,
        "hz_per_root_watt": spec.hz_per_root_watt(),
        "watts": w,
        "lambda_hz": l,
    }))
}
