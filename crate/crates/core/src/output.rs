//! On-disk layout of run and experiment results.
//!
//! ```text
//! <out>/<experiment>/<config-hash>/snapshot_t<time>.csv   x,rho
//! <out>/<experiment>/<config-hash>/meta.json
//! <out>/<experiment>/<config-hash>/diagnostics.json
//! <out>/<experiment>/errors.csv                           h,delta,m,rule,flux,kernel,initial,error
//! <out>/<experiment>/summary.json
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::experiments::{series_fits, ErrorRow, ExperimentResult, MonitoredRun};
use crate::quadrature::check_assumption3;
use crate::solver::{Model, RunConfig, Snapshot, SolutionField};

/// Hex digits of the SHA-256 config digest used as a directory name.
pub const HASH_LEN: usize = 12;

/// Digest of the config's canonical JSON (field order is the struct order).
pub fn config_hash(config: &RunConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(digest)[..HASH_LEN].to_string()
}

pub fn snapshot_file_name(requested_time: f64) -> String {
    format!("snapshot_t{requested_time:.6}.csv")
}

/// `x,rho` rows for the cells centered in the report window.
pub fn snapshot_csv(field: &SolutionField) -> String {
    let mut out = String::from("x,rho\n");
    for (x, rho) in field.report_cells() {
        writeln!(out, "{x},{rho}").expect("write to string");
    }
    out
}

pub fn errors_csv(rows: &[ErrorRow]) -> String {
    let mut out = String::from(ErrorRow::CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn snapshot_entry(s: &Snapshot) -> serde_json::Value {
    json!({
        "requested_time": s.requested_time,
        "actual_time": s.actual_time,
        "level": s.field.n,
        "file": snapshot_file_name(s.requested_time),
    })
}

/// Sidecar describing the run: the exact config, derived quantities,
/// snapshot times and a digest of the diagnostics.
pub fn meta_json(run: &MonitoredRun) -> serde_json::Value {
    let t = &run.trajectory;
    let summary = run.properties.as_ref().map(|p| {
        json!({
            "max_principle_ok": p.max_principle_ok(),
            "observed_min": p.observed_min,
            "observed_max": p.observed_max,
            "conservation_residual": p.conservation_residual,
            "tvd_ok": p.tvd.passed(),
            "tv_initial": p.tvd.tv.first(),
            "tv_final": p.tvd.tv.last(),
            "lipschitz_ok": p.lipschitz.passed(),
            "lipschitz_asserted": p.lipschitz.asserted,
        })
    });
    json!({
        "config": t.config,
        "config_hash": config_hash(&t.config),
        "derived": {
            "tau": t.plan.tau,
            "m": t.plan.m,
            "steps": t.plan.steps,
            "actual_final_time": t.plan.actual_final_time,
            "final_time_adjusted": t.plan.final_time_adjusted,
            "grid": t.plan.grid,
        },
        "snapshots": t.snapshots.iter().map(snapshot_entry).collect::<Vec<_>>(),
        "warnings": t.warnings,
        "diagnostics_summary": summary,
    })
}

/// Assumption checks for the run's flux, weights and CFL ratio, plus the
/// full per-step property report.
pub fn diagnostics_json(run: &MonitoredRun) -> Result<serde_json::Value> {
    let cfg = &run.trajectory.config;
    let flux = cfg.flux_function();
    let weights = cfg.weights()?;
    let assumption3 = match cfg.model {
        Model::Nonlocal => Some(check_assumption3(&weights, &cfg.kernel(), cfg.delta, cfg.h)),
        Model::Local => None,
    };
    let (delta0_inputs, delta0) = cfg.delta0()?;
    Ok(json!({
        "weights": weights,
        "assumption3": assumption3,
        "assumption4": flux.check_assumption4(),
        "assumption5": flux.check_assumption5(cfg.lambda),
        "delta0_inputs": delta0_inputs,
        "delta0": delta0.as_ref().ok(),
        "delta0_error": delta0.as_ref().err().map(|e| e.to_string()),
        "properties": run.properties,
    }))
}

/// Write one run under `parent/<config-hash>/`; returns that directory.
pub fn write_run(parent: &Path, run: &MonitoredRun) -> Result<PathBuf> {
    let dir = parent.join(config_hash(&run.trajectory.config));
    create_dir(&dir)?;
    for s in &run.trajectory.snapshots {
        write(&dir.join(snapshot_file_name(s.requested_time)), &snapshot_csv(&s.field))?;
    }
    write_json(&dir.join("meta.json"), &meta_json(run))?;
    write_json(&dir.join("diagnostics.json"), &diagnostics_json(run)?)?;
    Ok(dir)
}

/// Write every completed run, the error table and a summary under
/// `out/experiment<N>/`; returns that directory.
pub fn write_experiment(out: &Path, result: &ExperimentResult) -> Result<PathBuf> {
    let root = out.join(result.plan.id.dir_name());
    create_dir(&root)?;
    let mut references = Vec::new();
    for (cfg, run) in result.plan.references.iter().zip(&result.references) {
        if let Ok(run) = run {
            write_run(&root, run)?;
        }
        references.push(json!({
            "config_hash": config_hash(cfg),
            "h": cfg.h,
            "model": cfg.model,
            "error": run.as_ref().err().map(|e| e.to_string()),
        }));
    }
    for run in result.runs.iter().flatten() {
        write_run(&root, run)?;
    }
    write(&root.join("errors.csv"), &errors_csv(&result.rows))?;
    let failures: Vec<_> = result
        .failures
        .iter()
        .map(|f| {
            json!({
                "config_hash": config_hash(&f.config),
                "h": f.config.h,
                "delta": f.config.delta,
                "rule": f.config.rule,
                "kernel": f.config.kernel,
                "initial": f.config.initial.name(),
                "error": f.error.to_string(),
            })
        })
        .collect();
    write_json(
        &root.join("summary.json"),
        &json!({
            "experiment": result.plan.id.number(),
            "options": result.plan.options,
            "jobs": result.plan.jobs.len(),
            "completed": result.rows.len(),
            "references": references,
            "failures": failures,
            "fits": series_fits(&result.rows),
        }),
    )?;
    Ok(root)
}
