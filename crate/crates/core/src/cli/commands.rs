use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use super::artifacts::ArtifactWriter;
use super::config::RunConfig;
use super::data::load_incidence_csv;
use super::{AppError, AppResult};
use crate::calibration::{
    epidemic_growth_rate, model_weekly_incidence, nelder_mead_fit, polynomial_trend, r0_from_exponential_phase,
    residuals_for, FitOptions, FitTarget, DEFAULT_FIT_STATE,
};
use crate::control::{evaluate_constant, forward_backward_sweep, stationarity_violation, REFERENCE_INITIAL_STATE};
use crate::epi::{effective_r_series, rt_parameter_envelope, GenerationInterval};
use crate::model::{
    base_rhs, disease_free_equilibrium, endemic_equilibrium, local_sensitivity_index, r0_with_control,
    r0_without_control, ControlVector, Param, StateVector,
};
use crate::ode::{check_population_bound, check_positivity, fmt_f64, integrate_forward, TimeGrid};
use crate::sensitivity::{
    evaluate_model_over_samples, level_curve, lhs_sample, prcc, r0_level_grid, relative_bias, OutputKind,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Control,
    Fit,
    Sensitivity,
    Rt,
    Report,
}

impl Command {
    pub const ALL: [Command; 6] =
        [Command::Simulate, Command::Control, Command::Fit, Command::Sensitivity, Command::Rt, Command::Report];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Control => "control",
            Command::Fit => "fit",
            Command::Sensitivity => "sensitivity",
            Command::Rt => "rt",
            Command::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = AppError;

    fn from_str(s: &str) -> AppResult<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| AppError::Config(format!("unknown command `{s}`")))
    }
}

/// Runs one pipeline and writes its artifacts into `out_dir`. Returns the
/// paths written, in order.
pub fn run_subcommand(config: &RunConfig, command: Command, out_dir: &Path) -> AppResult<Vec<PathBuf>> {
    let mut out = ArtifactWriter::new(out_dir)?;
    match command {
        Command::Simulate => simulate(config, &mut out)?,
        Command::Control => control(config, &mut out)?,
        Command::Fit => fit(config, &mut out)?,
        Command::Sensitivity => sensitivity(config, &mut out)?,
        Command::Rt => rt(config, &mut out)?,
        Command::Report => report(config, &mut out)?,
    }
    Ok(out.into_written())
}

fn grid(config: &RunConfig, default_tf: f64) -> AppResult<TimeGrid> {
    let t = &config.time;
    Ok(TimeGrid::with_step(t.t0, t.tf.unwrap_or(default_tf), t.h)?)
}

fn simulate(config: &RunConfig, out: &mut ArtifactWriter) -> AppResult<()> {
    let p = config.params;
    let x0 = config.initial.unwrap_or(REFERENCE_INITIAL_STATE);
    let g = grid(config, 120.0)?;
    let traj = integrate_forward(|_, x| base_rhs(&StateVector::from(*x), &p).to_array(), x0.to_array(), &g)?;
    out.write("trajectory.csv", |w| traj.write_csv(w))?;
    let summary = json!({
        "nodes": g.n_nodes(),
        "step": g.step(),
        "positivity": check_positivity(&traj),
        "population_bound": check_population_bound(&traj, &p)?,
    });
    out.write_json("reports.json", &summary)
}

fn level_name(level: f64) -> String {
    format!("scenario_w{level}.csv")
}

fn control(config: &RunConfig, out: &mut ArtifactWriter) -> AppResult<()> {
    let p = config.params;
    let c = &config.control;
    let x0 = config.initial.unwrap_or(REFERENCE_INITIAL_STATE);
    let g = grid(config, 12.0)?;
    let res = forward_backward_sweep(&p, &c.weights, &x0, &g, &c.sweep)?;
    out.write("optimal.csv", |w| res.write_csv(w))?;

    let mut scenarios = Vec::new();
    for &level in &c.levels {
        let run = evaluate_constant(&p, &c.weights, &x0, &g, ControlVector::uniform(level))?;
        out.write(&level_name(level), |w| run.write_csv(w))?;
        scenarios.push(json!({ "level": level, "objective": run.objective }));
    }
    let optimal_is_minimal = c.levels.is_empty()
        || scenarios.iter().all(|s| res.objective <= s["objective"].as_f64().unwrap_or(f64::INFINITY));
    let summary = json!({
        "weights": c.weights,
        "settings": c.sweep,
        "optimal": {
            "objective": res.objective,
            "iterations": res.iterations,
            "converged": res.converged,
            "last_change": res.last_change,
            "stationarity": stationarity_violation(&res, &p, &c.weights, 1e-3),
        },
        "scenarios": scenarios,
        "optimal_is_minimal": optimal_is_minimal,
    });
    out.write_json("control_summary.json", &summary)
}

#[derive(Serialize)]
struct GrowthOut {
    window: (i64, i64),
    slope: f64,
    intercept: f64,
    r_squared: f64,
    r0: f64,
    formula_caveat: bool,
}

fn fit(config: &RunConfig, out: &mut ArtifactWriter) -> AppResult<()> {
    let f = &config.fit;
    let path = f.data.as_ref().ok_or_else(|| AppError::Config("[fit] `data` is required for fit".into()))?;
    let bundle = load_incidence_csv(path)?;
    let data = &bundle.series;
    let x0 = config.initial.unwrap_or(DEFAULT_FIT_STATE);
    let mut start = config.params;
    for (p, v) in &f.start {
        start.set(*p, *v);
    }

    let opts = FitOptions { target: f.target, ..Default::default() };
    let fitted = if f.free.is_empty() { None } else { Some(nelder_mead_fit(data, &x0, &start, &f.free, &opts)?) };
    let params = fitted.as_ref().map_or(start, |r| r.params);
    let residuals = residuals_for(&params, data, &x0, f.target)?;
    let model = model_weekly_incidence(&params, &x0, data.len())?;
    let observed = match f.target {
        FitTarget::Cumulative => data.cumulative().to_vec(),
        FitTarget::Weekly => data.new_cases().to_vec(),
    };
    let modelled: Vec<f64> = match f.target {
        FitTarget::Cumulative => model
            .iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect(),
        FitTarget::Weekly => model,
    };
    out.write("residuals.csv", |w| {
        writeln!(w, "week,observed,model,residual")?;
        for (k, week) in data.weeks().enumerate() {
            writeln!(w, "{week},{},{},{}", fmt_f64(observed[k]), fmt_f64(modelled[k]), fmt_f64(residuals[k]))?;
        }
        Ok(())
    })?;

    let growth = match f.weeks {
        Some(window) => {
            let g = epidemic_growth_rate(data, window)?;
            let r = r0_from_exponential_phase(&g, &params)?;
            Some(GrowthOut {
                window,
                slope: g.slope,
                intercept: g.intercept,
                r_squared: g.r_squared,
                r0: r.r0,
                formula_caveat: r.formula_caveat,
            })
        }
        None => None,
    };
    let trend = f.degree.map(|d| polynomial_trend(data, d)).transpose()?;

    let report = json!({
        "data": bundle.source,
        "country": bundle.country,
        "weeks": data.len(),
        "target": f.target,
        "initial_state": x0,
        "free": f.free,
        "start": start,
        "fitted": params,
        "sse": residuals.iter().map(|r| r * r).sum::<f64>(),
        "iterations": fitted.as_ref().map(|r| r.iterations),
        "evaluations": fitted.as_ref().map(|r| r.evaluations),
        "converged": fitted.as_ref().map(|r| r.converged),
        "history": fitted.as_ref().map(|r| r.history.clone()),
        "residuals": residuals,
        "growth": growth,
        "trend": trend.map(|t| json!({ "degree": t.coefficients.len() - 1, "coefficients": t.coefficients, "sse": t.sse })),
    });
    out.write_json("fit_report.json", &report)
}

fn output_kind(config: &RunConfig) -> OutputKind {
    let s = &config.sensitivity;
    let x0 = config.initial.unwrap_or(DEFAULT_FIT_STATE);
    match s.output.as_str() {
        "r0_vaccination" => OutputKind::R0WithControl,
        "peak_incidence" => OutputKind::PeakIncidence { x0, weeks: s.weeks },
        "cumulative_incidence" => OutputKind::CumulativeIncidence { x0, weeks: s.weeks },
        _ => OutputKind::R0WithoutControl,
    }
}

fn sensitivity(config: &RunConfig, out: &mut ArtifactWriter) -> AppResult<()> {
    let s = &config.sensitivity;
    let base = config.params;
    let design = lhs_sample(&s.ranges, s.samples, config.seed)?;
    let outputs = evaluate_model_over_samples(&design, &base, output_kind(config));
    out.write("lhs_design.csv", |w| design.write_csv(&outputs.values, w))?;

    let complete = design.select_rows(&outputs.present());
    let y = outputs.complete();
    let pr = prcc(&complete, &y)?;
    out.write("prcc.csv", |w| pr.write_csv(w))?;

    let bias = relative_bias(&y, &s.intervals, s.bins)?;
    out.write("bias_intervals.csv", |w| bias.write_intervals_csv(w))?;
    out.write("bias_histogram.csv", |w| bias.write_histogram_csv(w))?;

    let grid = r0_level_grid(&s.grid_x, &s.grid_y, &base, (s.grid_resolution, s.grid_resolution))?;
    out.write("level_grid.csv", |w| grid.write_csv(w))?;
    if !s.levels.is_empty() {
        out.write("level_curves.csv", |w| {
            writeln!(w, "level,x,y")?;
            for &level in &s.levels {
                for (x, y) in level_curve(&grid, level) {
                    writeln!(w, "{},{},{}", fmt_f64(level), fmt_f64(x), fmt_f64(y))?;
                }
            }
            Ok(())
        })?;
    }

    let summary = json!({
        "seed": config.seed,
        "samples": s.samples,
        "output": s.output,
        "missing": outputs.missing,
        "degrees_of_freedom": pr.degrees_of_freedom,
        "mean": bias.mean,
        "variance": bias.variance,
        "grid": {
            "x": grid.x_param,
            "y": grid.y_param,
            "dx_sign_at_center": grid.dx_sign_at_center,
            "dy_sign_at_center": grid.dy_sign_at_center,
        },
    });
    out.write_json("sensitivity_summary.json", &summary)
}

fn rt(config: &RunConfig, out: &mut ArtifactWriter) -> AppResult<()> {
    let path = config
        .rt
        .data
        .as_ref()
        .or(config.fit.data.as_ref())
        .ok_or_else(|| AppError::Config("[rt] `data` is required for rt".into()))?;
    let bundle = load_incidence_csv(path)?;
    let gi = GenerationInterval::from_params(&config.params)?;
    let series = effective_r_series(&bundle.series, &gi)?;
    out.write("rt.csv", |w| series.write_csv(w))?;
    if !config.rt.envelope.is_empty() {
        let env =
            rt_parameter_envelope(&bundle.series, &config.params, &config.rt.envelope, config.rt.envelope_levels)?;
        out.write("rt_envelope.csv", |w| env.write_csv(w))?;
    }
    Ok(())
}

fn report(config: &RunConfig, out: &mut ArtifactWriter) -> AppResult<()> {
    let p = config.params;
    let n = p.recruitment / p.natural_death;
    let mut indices = BTreeMap::new();
    for q in Param::STORED {
        indices.insert(q.key().to_string(), local_sensitivity_index(&p, q).ok());
    }
    let ee = endemic_equilibrium(&p)?;
    let report = json!({
        "source": config.source,
        "params": p,
        "vaccine_inefficiency": p.vaccine_inefficiency(),
        "r0": r0_without_control(&p)?,
        "r0_with_control": { "population": n, "value": r0_with_control(&p, n)? },
        "disease_free_equilibrium": disease_free_equilibrium(&p)?,
        "endemic_equilibrium": ee,
        "endemic_residual": ee.map(|x| base_rhs(&x, &p).max_abs()),
        "sensitivity_indices": indices,
        "generation_interval_mean": GenerationInterval::from_params(&p)?.mean(),
    });
    out.write_json("report.json", &report)
}
