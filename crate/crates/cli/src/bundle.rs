//! Result bundle: run metadata plus CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use raaloc::locengine::{Ecdf, MonteCarloResult};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Metadata<'a> {
    pub config_hash: &'a str,
    pub master_seed: u64,
    pub trials: usize,
    pub version: &'a str,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn snr_traces(mc: &MonteCarloResult) -> String {
    let mut s = String::from("trial,raa,step,anchor,k,gamma_linear\n");
    for run in &mc.runs {
        for step in &run.steps {
            for a in &step.anchors {
                for (k, g) in a.snr_trace.iter().enumerate() {
                    let _ = writeln!(s, "{},{},{},{},{},{}", run.trial, run.raa, step.step, a.anchor, k + 1, g);
                }
            }
        }
    }
    s
}

pub fn detections(mc: &MonteCarloResult) -> String {
    let mut s = String::from("trial,raa,step,anchor,in_view,detected,iterations,matched_index,matched_lag,score,id_correct\n");
    for run in &mc.runs {
        for step in &run.steps {
            for a in &step.anchors {
                let (idx, lag, score) = match a.matched {
                    Some(m) => (m.index.to_string(), m.lag.to_string(), m.score.to_string()),
                    None => Default::default(),
                };
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    run.trial, run.raa, step.step, a.anchor, a.in_view, a.detected, a.iterations, idx, lag, score, a.id_correct
                );
            }
        }
    }
    s
}

pub fn aoa_estimates(mc: &MonteCarloResult) -> String {
    let mut s = String::from("trial,raa,step,anchor,true_sine,estimated_sine\n");
    for run in &mc.runs {
        for step in &run.steps {
            for a in step.anchors.iter().filter(|a| a.detected) {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    run.trial,
                    run.raa,
                    step.step,
                    a.anchor,
                    opt(a.true_sine),
                    opt(a.aoa_sine)
                );
            }
        }
    }
    s
}

pub fn positions(mc: &MonteCarloResult) -> String {
    let mut s = String::from("trial,raa,step,time_s,true_x_m,true_z_m,est_x_m,est_z_m,error_m\n");
    for run in &mc.runs {
        for step in &run.steps {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                run.trial,
                run.raa,
                step.step,
                step.time,
                step.truth.x,
                step.truth.z,
                opt(step.estimate.map(|p| p.x)),
                opt(step.estimate.map(|p| p.z)),
                opt(step.error)
            );
        }
    }
    s
}

pub fn ecdf_table(e: Option<&Ecdf>) -> String {
    let mut s = String::from("error_m,fraction\n");
    if let Some(e) = e {
        for (v, f) in e.values().iter().zip(e.fractions()) {
            let _ = writeln!(s, "{v},{f}");
        }
    }
    s
}

pub fn write(dir: &Path, meta: &Metadata<'_>, mc: &MonteCarloResult, ecdf: Option<&Ecdf>) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let files = [
        ("metadata.json", serde_json::to_string_pretty(meta)? + "\n"),
        ("snr_traces.csv", snr_traces(mc)),
        ("detections.csv", detections(mc)),
        ("aoa_estimates.csv", aoa_estimates(mc)),
        ("positions.csv", positions(mc)),
        ("ecdf.csv", ecdf_table(ecdf)),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
