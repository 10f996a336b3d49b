//! Command-line front end: scenario files, simulation runs, closed-form
//! analysis tables and scenario validation.

pub mod bundle;
pub mod scenario;

use std::io::Write;
use std::ops::RangeInclusive;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use raaloc::analysis::{
    db_to_linear, equilibrium_snr, linear_to_db, max_tracking_speed, snr_recursion, SnrSpectrum,
};
use raaloc::locengine::{ecdf, monte_carlo};
use raaloc::raa::msequence_family_size;

use crate::scenario::{ChannelKind, ScenarioFile};

#[derive(Debug, Parser)]
#[command(name = "raaloc", version, about = "Retro-directive antenna array localization simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the Monte Carlo simulation of a scenario and write a result bundle.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_enum)]
        channel: Option<ChannelKind>,
    },
    /// Print closed-form tables as CSV.
    Analyze {
        #[command(subcommand)]
        kind: AnalyzeKind,
    },
    /// Check a scenario file and report capacity limits.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeKind {
    /// Per-direction SNR evolution from a uniform random start.
    #[command(name = "snr_trace")]
    SnrTrace {
        /// Per-direction maximum SNRs, dB, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        max_db: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 15)]
        k: usize,
    },
    /// Rank-one equilibrium SNR.
    Equilibrium {
        #[arg(long, allow_hyphen_values = true)]
        s_db: f64,
        #[arg(long)]
        n: usize,
    },
    /// Maximum speed for which reusing the previous beamformer pays off.
    #[command(name = "speed_bound")]
    SpeedBound {
        #[arg(long)]
        d: f64,
        #[arg(long)]
        tau: f64,
        /// Element count or inclusive range `a..b`.
        #[arg(long, value_parser = parse_range)]
        n: RangeInclusive<usize>,
    },
}

fn parse_range(s: &str) -> std::result::Result<RangeInclusive<usize>, String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    let range = match s.split_once("..") {
        Some((a, b)) => parse(a)?..=parse(b.trim_start_matches('='))?,
        None => {
            let n = parse(s)?;
            n..=n
        }
    };
    if range.is_empty() || *range.start() == 0 {
        return Err(format!("empty or zero range {s:?}"));
    }
    Ok(range)
}

/// Worker count from `RAALOC_THREADS`, if set.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var("RAALOC_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("RAALOC_THREADS={v:?}"))?;
            if n == 0 {
                bail!("RAALOC_THREADS must be at least 1");
            }
            Ok(Some(n))
        }
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Simulate { scenario, out: dir, seed, trials, channel } => {
            let mut file = ScenarioFile::load(&scenario)?;
            if let Some(s) = seed {
                file.simulation.master_seed = s;
            }
            if let Some(t) = trials {
                file.simulation.trials = t;
            }
            if let Some(c) = channel {
                file.channel.mode = c;
            }
            simulate(&file, &dir, out)
        }
        Command::Analyze { kind } => analyze(kind, out),
        Command::Validate { scenario } => {
            let text = std::fs::read_to_string(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
            let ok = validate(&text, out)?;
            if !ok {
                bail!("scenario failed validation");
            }
            Ok(())
        }
    }
}

pub fn simulate(file: &ScenarioFile, dir: &std::path::Path, out: &mut dyn Write) -> Result<()> {
    let scenario = file.to_scenario()?;
    let mc = match thread_limit()? {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build()?.install(|| monte_carlo(&scenario))?,
        None => monte_carlo(&scenario)?,
    };
    let errors = mc.errors();
    let e = if errors.is_empty() { None } else { Some(ecdf(&errors)?) };
    let hash = file.config_hash();
    let meta = bundle::Metadata {
        config_hash: &hash,
        master_seed: file.simulation.master_seed,
        trials: file.simulation.trials,
        version: env!("CARGO_PKG_VERSION"),
    };
    bundle::write(dir, &meta, &mc, e.as_ref())?;
    match e {
        Some(e) => writeln!(
            out,
            "error p50={} m p90={} m p99={} m ({} fixes, {} outages)",
            e.quantile(0.5),
            e.quantile(0.9),
            e.quantile(0.99),
            errors.len(),
            mc.outages()
        )?,
        None => writeln!(out, "no position fixes ({} outages)", mc.outages())?,
    }
    Ok(())
}

pub fn analyze(kind: AnalyzeKind, out: &mut dyn Write) -> Result<()> {
    match kind {
        AnalyzeKind::SnrTrace { max_db, n, k } => {
            let spectrum = SnrSpectrum::from_db(&max_db, n)?;
            let trace = snr_recursion(&spectrum, &vec![1.0 / n as f64; n], k)?;
            let mut header = String::from("k");
            for j in 1..=max_db.len() {
                header.push_str(&format!(",snr_{j}_db"));
            }
            writeln!(out, "{header},snr_dec_db")?;
            for (i, row) in trace.per_direction.iter().enumerate() {
                let mut line = (i + 1).to_string();
                for v in &row[..max_db.len()] {
                    line.push_str(&format!(",{}", linear_to_db(*v)));
                }
                writeln!(out, "{line},{}", linear_to_db(trace.decoded[i]))?;
            }
        }
        AnalyzeKind::Equilibrium { s_db, n } => {
            let s = db_to_linear(s_db);
            let x = equilibrium_snr(s, n)?;
            writeln!(out, "s_linear,n,equilibrium_linear,equilibrium_db")?;
            writeln!(out, "{s},{n},{x},{}", linear_to_db(x))?;
        }
        AnalyzeKind::SpeedBound { d, tau, n } => {
            writeln!(out, "n,v_max_m_per_s")?;
            for k in n {
                writeln!(out, "{k},{}", max_tracking_speed(d, k, tau)?)?;
            }
        }
    }
    Ok(())
}

fn check(out: &mut dyn Write, ok: bool, name: &str, detail: impl std::fmt::Display) -> Result<bool> {
    writeln!(out, "{} {name}: {detail}", if ok { "PASS" } else { "FAIL" })?;
    Ok(ok)
}

/// Writes one PASS/FAIL line per check followed by an ID capacity report.
/// Returns whether every check passed.
pub fn validate(text: &str, out: &mut dyn Write) -> Result<bool> {
    let file = match ScenarioFile::parse(text) {
        Ok(f) => {
            check(out, true, "schema", "ok")?;
            f
        }
        Err(e) => {
            check(out, false, "schema", e)?;
            return Ok(false);
        }
    };
    let mut ok = true;
    ok &= check(out, file.anchors.len() >= 2, "anchors", format!("{} (need at least 2)", file.anchors.len()))?;
    ok &= check(out, !file.raas.is_empty(), "raas", format!("{}", file.raas.len()))?;

    let rate = file.simulation.update_rate_hz;
    let t = file.rf.symbol_time_s;
    for r in &file.raas {
        let k = r.id.packet_len.unwrap_or((1usize << r.id.register_len.min(31)) - 1);
        let load = rate * k as f64 * t;
        ok &= check(
            out,
            load <= 1.0,
            &format!("update interval ({})", r.name),
            format!("R*K*T = {rate} * {k} * {t} = {load} (must be <= 1)"),
        )?;
    }

    let mut by_register: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
    for r in &file.raas {
        by_register.entry(r.id.register_len).or_default().push(r.id.index);
    }
    for (len, indices) in &by_register {
        let period = (1usize << len) - 1;
        match msequence_family_size(*len) {
            Ok(family) => {
                let mut sorted = indices.clone();
                sorted.sort_unstable();
                let distinct = sorted.windows(2).all(|w| w[0] != w[1]);
                let in_range = sorted.last().is_none_or(|m| *m < family);
                ok &= check(
                    out,
                    indices.len() <= family && distinct && in_range,
                    &format!("id capacity (K={period})"),
                    format!(
                        "{} RAAs, {} m-sequences available{}{}",
                        indices.len(),
                        family,
                        if distinct { "" } else { ", duplicate IDs" },
                        if in_range { "" } else { ", index out of range" }
                    ),
                )?;
            }
            Err(e) => ok &= check(out, false, &format!("id register {len}"), e)?,
        }
    }

    if ok {
        match file.to_scenario() {
            Ok(_) => ok &= check(out, true, "model", "ok")?,
            Err(e) => ok &= check(out, false, "model", e)?,
        }
    }

    writeln!(out, "capacity at T = {t} s:")?;
    for len in [10u32, 13] {
        let k = (1usize << len) - 1;
        let family = msequence_family_size(len)?;
        writeln!(out, "  K={k}: {family} IDs, max update rate {:.1} Hz", 1.0 / (k as f64 * t))?;
    }
    writeln!(out, "{}", if ok { "scenario valid" } else { "scenario invalid" })?;
    Ok(ok)
}
