// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bqcd_core::detect::trace;
use bqcd_core::models::{ChangeModel, ChangePoint};
use bqcd_core::renewal::{
    approx_table, calibrate_threshold, default_overshoot_threshold, estimate_overshoot, OvershootEstimate,
    MAX_CENSORED_FRACTION,
};
use bqcd_core::rng::{trial_rng, Stream};
use bqcd_core::simulate::{
    compare_rules, default_delay_horizon, default_pfa_horizon, estimate_cond_add, estimate_delay_moments,
    estimate_pfa_global, slope_study, CampaignReport, EstimateSummary, Provenance,
};
use bqcd_core::{Calibration, ThresholdPolicy};
use serde::Serialize;
use serde_json::json;

use crate::config::{with_model, AnyModel, CalibrationSpec, CampaignKind, Loaded};
use crate::error::CliError;

const DEFAULT_OVERSHOOT_TRIALS: usize = 10_000;
const DEFAULT_TRACE_STEPS: usize = 1_000;
const DEFAULT_APPROX_GRID: [f64; 3] = [100.0, 1_000.0, 10_000.0];

/// Settings shared by every subcommand.
pub struct Context {
    pub loaded: Loaded,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Context {
    fn provenance(&self) -> Provenance {
        Provenance {
            config_hash: self.loaded.hash.clone(),
            seed: self.seed,
            version: bqcd_core::VERSION.to_string(),
        }
    }

    fn q(&self) -> f64 {
        with_model!(&self.loaded.model, m => m.kl_number())
    }

    fn n_trials(&self) -> Result<usize, CliError> {
        self.loaded
            .config
            .n_trials
            .ok_or_else(|| CliError::config("n_trials", "required for this command"))
    }

    fn output_path(&self, configured: Option<&PathBuf>, default: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir)?;
        Ok(self.out_dir.join(configured.map_or_else(|| PathBuf::from(default), Clone::clone)))
    }

    fn csv_path(&self, default: &str) -> Result<PathBuf, CliError> {
        let configured = self.loaded.config.outputs.as_ref().and_then(|o| o.csv.as_ref());
        self.output_path(configured, default)
    }

    fn json_path(&self, default: &str) -> Result<PathBuf, CliError> {
        let configured = self.loaded.config.outputs.as_ref().and_then(|o| o.json.as_ref());
        self.output_path(configured, default)
    }

    fn config_echo(&self) -> serde_json::Value {
        serde_json::to_value(&self.loaded.config).expect("config serializes")
    }

    fn overshoot(&self) -> Result<OvershootEstimate, CliError> {
        let spec = self.loaded.config.overshoot.clone().unwrap_or_default();
        let b = spec.b.unwrap_or_else(|| default_overshoot_threshold(self.q()));
        let n = spec.n_trials.unwrap_or(DEFAULT_OVERSHOOT_TRIALS);
        Ok(with_model!(&self.loaded.model, m => estimate_overshoot(m, b, n, self.seed))?)
    }

    /// The threshold `A`, calibrated from `alpha` when no explicit value is given.
    fn policy(&self) -> Result<(ThresholdPolicy, Option<OvershootEstimate>), CliError> {
        let config = &self.loaded.config;
        if let Some(a) = config.threshold {
            return Ok((ThresholdPolicy::explicit(a).map_err(|e| CliError::config("A", e.to_string()))?, None));
        }
        let alpha = config.alpha.expect("validated: alpha or A is present");
        match config.calibration {
            CalibrationSpec::Conservative => Ok((calibrate_threshold(alpha, Calibration::ConservativeBound, None)?, None)),
            CalibrationSpec::Corrected => {
                let est = self.overshoot()?;
                let policy = calibrate_threshold(alpha, Calibration::OvershootCorrected, Some(est.zeta_hat))?;
                Ok((policy, Some(est)))
            }
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    for row in rows {
        wtr.serialize(row).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

fn calibration_name(policy: &ThresholdPolicy) -> &'static str {
    match policy.calibration() {
        Calibration::ConservativeBound => "conservative",
        Calibration::OvershootCorrected => "corrected",
        Calibration::Explicit => "explicit",
    }
}

pub fn calibrate(ctx: &Context) -> Result<serde_json::Value, CliError> {
    let (policy, overshoot) = ctx.policy()?;
    let doc = json!({
        "alpha": ctx.loaded.config.alpha,
        "A": policy.threshold(),
        "calibration": calibration_name(&policy),
        "overshoot": overshoot,
        "provenance": ctx.provenance(),
    });
    write_json(&ctx.json_path("calibration.json")?, &doc)?;
    Ok(doc)
}

fn check_censoring(summaries: &[EstimateSummary]) -> Result<(), CliError> {
    for s in summaries {
        if s.censored_count as f64 > MAX_CENSORED_FRACTION * s.n_trials as f64 {
            return Err(CliError::Refused(format!(
                "{} of {} trials for `{}` reached the horizon {}; raise `horizon`",
                s.censored_count, s.n_trials, s.metric, s.horizon
            )));
        }
    }
    Ok(())
}

fn emit_report(ctx: &Context, report: &CampaignReport) -> Result<(), CliError> {
    let name = &report.campaign;
    let csv = create(&ctx.csv_path(&format!("{name}.csv"))?)?;
    report.write_csv(csv)?;
    let json = create(&ctx.json_path(&format!("{name}.json"))?)?;
    report.write_json(json)?;
    Ok(())
}

#[derive(Serialize)]
struct SlopeRow<'a> {
    #[serde(rename = "A")]
    threshold: f64,
    add: f64,
    stderr: f64,
    median_ratio: f64,
    effective_trials: usize,
    config_hash: &'a str,
    seed: u64,
    version: &'a str,
}

pub fn simulate(ctx: &Context) -> Result<serde_json::Value, CliError> {
    let config = &ctx.loaded.config;
    let kind = config
        .campaign
        .ok_or_else(|| CliError::config("campaign", "one of pfa, add, cond_add, slope is required"))?;
    let n_trials = ctx.n_trials()?;
    let prior = &ctx.loaded.prior;
    let q = ctx.q();
    let provenance = ctx.provenance();

    if kind == CampaignKind::Slope {
        let grid = config
            .a_grid
            .as_ref()
            .ok_or_else(|| CliError::config("A_grid", "required for the slope campaign"))?;
        let report = with_model!(&ctx.loaded.model, m => slope_study(m, prior, grid, config.horizon, n_trials, ctx.seed))?;
        let rows: Vec<SlopeRow> = report
            .points
            .iter()
            .map(|p| SlopeRow {
                threshold: p.threshold,
                add: p.add,
                stderr: p.stderr,
                median_ratio: p.median_ratio,
                effective_trials: p.effective_trials,
                config_hash: &provenance.config_hash,
                seed: provenance.seed,
                version: &provenance.version,
            })
            .collect();
        write_csv_rows(&ctx.csv_path("slope.csv")?, &rows)?;
        let doc = json!({
            "campaign": "slope",
            "provenance": provenance,
            "report": report,
            "config": ctx.config_echo(),
        });
        write_json(&ctx.json_path("slope.json")?, &doc)?;
        return Ok(json!({ "campaign": "slope", "slope": report.slope, "target": report.target }));
    }

    let (policy, overshoot) = ctx.policy()?;
    let model = &ctx.loaded.model;
    let (summaries, diagnostics) = match kind {
        CampaignKind::Pfa => {
            let horizon = config.horizon.unwrap_or_else(|| default_pfa_horizon(&policy, q));
            let est = with_model!(model, m => estimate_pfa_global(m, prior, &policy, horizon, n_trials, ctx.seed))?;
            let diag = json!({ "alarms": est.alarms, "settled": est.settled, "censored": est.summary.censored_count });
            (vec![est.summary], diag)
        }
        CampaignKind::Add => {
            let horizon = config.horizon.unwrap_or_else(|| default_delay_horizon(prior, &policy, q));
            let m_list = config.m_list.clone().unwrap_or_else(|| vec![1]);
            let report =
                with_model!(model, m => estimate_delay_moments(m, prior, &policy, &m_list, horizon, n_trials, ctx.seed))?;
            check_censoring(&report.summaries)?;
            let diag = json!({
                "false_alarms": report.false_alarms,
                "censored_post_change": report.censored_post_change,
                "rejected_draws": report.rejected_draws,
                "domination_violations": report.domination_violations,
            });
            (report.summaries, diag)
        }
        CampaignKind::CondAdd => {
            let k_list = config
                .k_list
                .clone()
                .ok_or_else(|| CliError::config("k_list", "required for the cond_add campaign"))?;
            let max_k = k_list.iter().copied().max().unwrap_or(1);
            let horizon = config.horizon.unwrap_or_else(|| default_delay_horizon(prior, &policy, q) + max_k);
            let summaries =
                with_model!(model, m => estimate_cond_add(m, prior, &policy, &k_list, horizon, n_trials, ctx.seed))?;
            check_censoring(&summaries)?;
            (summaries, json!({}))
        }
        CampaignKind::Slope => unreachable!("handled above"),
    };
    let mut diagnostics = diagnostics;
    diagnostics["A"] = json!(policy.threshold());
    diagnostics["calibration"] = json!(calibration_name(&policy));
    if let Some(est) = overshoot {
        diagnostics["overshoot"] = json!(est);
    }
    let report = CampaignReport {
        campaign: kind.name().to_string(),
        provenance,
        summaries,
        diagnostics,
        config: ctx.config_echo(),
    };
    emit_report(ctx, &report)?;
    Ok(json!({ "campaign": report.campaign, "summaries": report.summaries }))
}

pub fn compare(ctx: &Context) -> Result<serde_json::Value, CliError> {
    let config = &ctx.loaded.config;
    let b = config
        .shiryaev_threshold
        .ok_or_else(|| CliError::config("B", "required for compare"))?;
    let n_trials = ctx.n_trials()?;
    let (policy, _) = ctx.policy()?;
    let prior = &ctx.loaded.prior;
    let horizon = config
        .horizon
        .unwrap_or_else(|| default_delay_horizon(prior, &policy, ctx.q()));
    let summaries =
        with_model!(&ctx.loaded.model, m => compare_rules(m, prior, &policy, b, horizon, n_trials, ctx.seed))?;
    let report = CampaignReport {
        campaign: "compare".into(),
        provenance: ctx.provenance(),
        summaries,
        diagnostics: json!({ "A": policy.threshold(), "B": b }),
        config: ctx.config_echo(),
    };
    emit_report(ctx, &report)?;
    Ok(json!({ "campaign": "compare", "summaries": report.summaries }))
}

#[derive(Serialize)]
struct TraceCsvRow<'a> {
    n: usize,
    x: String,
    g: f64,
    posterior: f64,
    threshold: f64,
    stopped: bool,
    config_hash: &'a str,
    seed: u64,
    version: &'a str,
}

fn run_trace<M: ChangeModel>(
    model: &M,
    ctx: &Context,
    policy: &ThresholdPolicy,
    change: ChangePoint,
    n_max: usize,
) -> Result<Vec<bqcd_core::detect::TraceRow>, CliError> {
    let mut rng = trial_rng(ctx.seed, 0, Stream::Observations);
    let observations = model.sample_trajectory(change, n_max, &mut rng);
    Ok(trace(model, &ctx.loaded.prior, policy, &observations)?)
}

/// Trajectory of trial 0 for the run seed, the same one `simulate` would draw.
pub fn trace_cmd(ctx: &Context, k: Option<usize>, n_max: Option<usize>) -> Result<serde_json::Value, CliError> {
    let spec = ctx.loaded.config.trace.clone().unwrap_or_default();
    let k = k.or(spec.k);
    if k == Some(0) {
        return Err(CliError::config("trace.k", "must be at least 1"));
    }
    let n_max = n_max.or(spec.n_max).or(ctx.loaded.config.horizon).unwrap_or(DEFAULT_TRACE_STEPS);
    let change = k.map_or(ChangePoint::Never, ChangePoint::At);
    let (policy, _) = ctx.policy()?;
    let rows = with_model!(&ctx.loaded.model, m => run_trace(m, ctx, &policy, change, n_max))?;
    let provenance = ctx.provenance();
    let csv_rows: Vec<TraceCsvRow> = rows
        .iter()
        .map(|r| TraceCsvRow {
            n: r.n,
            x: r.x.clone(),
            g: r.g,
            posterior: r.posterior,
            threshold: r.threshold,
            stopped: r.stopped,
            config_hash: &provenance.config_hash,
            seed: provenance.seed,
            version: &provenance.version,
        })
        .collect();
    write_csv_rows(&ctx.csv_path("trace.csv")?, &csv_rows)?;
    let stop = rows.iter().find(|r| r.stopped).map(|r| r.n);
    Ok(json!({ "steps": rows.len(), "stop_step": stop, "A": policy.threshold() }))
}

#[derive(Serialize)]
struct ApproxCsvRow<'a> {
    #[serde(rename = "A")]
    threshold: f64,
    fo_add: f64,
    ho_add: f64,
    pfa_corrected: f64,
    config_hash: &'a str,
    seed: u64,
    version: &'a str,
}

pub fn approx(ctx: &Context) -> Result<serde_json::Value, CliError> {
    let grid = ctx
        .loaded
        .config
        .a_grid
        .clone()
        .unwrap_or_else(|| DEFAULT_APPROX_GRID.to_vec());
    let (zeta, kappa_bar, source) = match &ctx.loaded.model {
        AnyModel::Exponential(m) => (m.exact_zeta(), m.exact_kappa_bar(), "exact"),
        _ => {
            let est = ctx.overshoot()?;
            (est.zeta_hat, est.kappa_bar_hat, "estimated")
        }
    };
    let kl = ctx.q();
    let entropy = ctx.loaded.prior.entropy_constant();
    let rows = approx_table(&grid, kl, entropy, kappa_bar, zeta)?;
    let provenance = ctx.provenance();
    let csv_rows: Vec<ApproxCsvRow> = rows
        .iter()
        .map(|r| ApproxCsvRow {
            threshold: r.threshold,
            fo_add: r.fo_add,
            ho_add: r.ho_add,
            pfa_corrected: r.pfa_corrected,
            config_hash: &provenance.config_hash,
            seed: provenance.seed,
            version: &provenance.version,
        })
        .collect();
    write_csv_rows(&ctx.csv_path("approx.csv")?, &csv_rows)?;
    let doc = json!({
        "rows": rows,
        "kl": kl,
        "entropy_constant": entropy,
        "zeta": zeta,
        "kappa_bar": kappa_bar,
        "overshoot_source": source,
        "provenance": provenance,
        "config": ctx.config_echo(),
    });
    write_json(&ctx.json_path("approx.json")?, &doc)?;
    Ok(json!({ "rows": rows }))
}
