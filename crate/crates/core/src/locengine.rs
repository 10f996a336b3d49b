//! Scenario-level simulation: anchors interrogate a moving RAA at every
//! localization step, detected AoAs are fused into a position fix, and
//! errors are aggregated over Monte Carlo trials.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{clustered_paths, los_channel, multipath_channel, noise_variances, MultipathParams};
use crate::error::{Error, Result};
use crate::geometry::{axis_sine, bearing, ArrayGeometry, Point2, RfParams};
use crate::raa::{msequence_family_size, PnSequence, RaaNode};
use crate::trx::{
    run_interrogation, DeflationBasis, IdMatch, IdModulation, InitStrategy, RaaLink, RaaTarget, TrxConfig,
};

/// Bearing lines closer than this to parallel (rad) do not fix a position.
const PARALLEL_TOL: f64 = 1e-6;

/// A MIMO transceiver at a known pose (`geometry.pose`).
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorNode {
    pub name: String,
    pub geometry: ArrayGeometry,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelMode {
    FreeSpace,
    Multipath(MultipathParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub anchors: Vec<AnchorNode>,
    pub raas: Vec<RaaNode>,
    pub rf: RfParams,
    /// Detection thresholds and AoA grid; `init` is overridden per step.
    pub trx: TrxConfig,
    /// Localization steps per second, R = 1/τ.
    pub update_rate: f64,
    pub channel: ChannelMode,
    /// Start each interrogation from the beamformer frozen at the previous
    /// step instead of a random vector.
    pub tracking: bool,
    pub trials: usize,
    pub master_seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.rf.validate()?;
        self.trx.validate()?;
        if self.anchors.len() < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 anchors, got {}", self.anchors.len())));
        }
        if self.raas.is_empty() {
            return Err(Error::InvalidConfig("scenario has no RAA".into()));
        }
        if !(self.update_rate > 0.0) || !self.update_rate.is_finite() {
            return Err(Error::InvalidConfig(format!("update rate must be positive, got {}", self.update_rate)));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        for a in &self.anchors {
            a.geometry.validate()?;
        }
        for r in &self.raas {
            let packet = r.id_sequence.len() as f64 * self.rf.symbol_time;
            if self.update_rate * packet > 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "RAA {}: packet of {:.3e} s does not fit in the {:.3e} s update interval",
                    r.name,
                    packet,
                    1.0 / self.update_rate
                )));
            }
        }
        for (i, a) in self.raas.iter().enumerate() {
            for b in &self.raas[..i] {
                if a.id.register_len == b.id.register_len && a.id.taps_index == b.id.taps_index {
                    return Err(Error::InvalidConfig(format!("RAAs {} and {} share an ID", b.name, a.name)));
                }
            }
            let family = msequence_family_size(a.id.register_len)?;
            if a.id.taps_index >= family {
                return Err(Error::InvalidConfig(format!(
                    "RAA {}: ID index {} exceeds the {} m-sequences of length {}",
                    a.name,
                    a.id.taps_index,
                    family,
                    a.id.period()
                )));
            }
        }
        match self.channel {
            ChannelMode::FreeSpace => {}
            ChannelMode::Multipath(p) => {
                if !(p.k_factor >= 0.0) || !(p.angle_spread >= 0.0 && p.angle_spread <= std::f64::consts::FRAC_PI_2) {
                    return Err(Error::InvalidConfig("multipath K-factor or angle spread out of range".into()));
                }
            }
        }
        Ok(())
    }

    /// Known ID codebook, one entry per RAA in declaration order.
    pub fn codebook(&self) -> Vec<PnSequence> {
        self.raas.iter().map(|r| r.id_sequence.clone()).collect()
    }

    /// Step times t_i = t₀ + i/R covering the trajectory of `raa`.
    pub fn step_times(&self, raa: usize) -> Vec<f64> {
        let traj = &self.raas[raa].trajectory;
        let steps = (traj.duration() * self.update_rate + 1e-9).floor() as usize + 1;
        (0..steps).map(|i| traj.start_time() + i as f64 / self.update_rate).collect()
    }
}

/// One anchor's view of one localization step.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorReport {
    pub anchor: usize,
    /// The RAA lies in the anchor's front half-plane.
    pub in_view: bool,
    pub detected: bool,
    /// Beamforming exchanges until detection (or the iteration cap).
    pub iterations: usize,
    pub true_sine: Option<f64>,
    pub aoa_sine: Option<f64>,
    pub matched: Option<IdMatch>,
    /// Matched codeword index and lag are both correct.
    pub id_correct: bool,
    pub snr_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub truth: Point2,
    pub anchors: Vec<AnchorReport>,
    pub estimate: Option<Point2>,
    /// ‖estimate − truth‖ when a fix exists.
    pub error: Option<f64>,
}

/// Least-squares intersection of bearing lines. Each observation is an
/// anchor position and a global bearing θ (rad from +z toward +x); the
/// line through the anchor with direction (sin θ, cos θ) satisfies
/// cos θ·(x − a_x) − sin θ·(z − a_z) = 0.
pub fn fuse_aoa_ls(observations: &[(Point2, f64)]) -> Result<Point2> {
    if observations.len() < 2 {
        return Err(Error::Underdetermined(observations.len()));
    }
    let parallel = observations.iter().enumerate().all(|(i, (_, ti))| {
        observations[..i].iter().all(|(_, tj)| (ti - tj).sin().abs() < PARALLEL_TOL)
    });
    if parallel {
        return Err(Error::DegenerateGeometry);
    }
    let (mut sxx, mut sxz, mut szz, mut bx, mut bz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, theta) in observations {
        let (nx, nz) = (theta.cos(), -theta.sin());
        let c = nx * a.x + nz * a.z;
        sxx += nx * nx;
        sxz += nx * nz;
        szz += nz * nz;
        bx += nx * c;
        bz += nz * c;
    }
    let det = sxx * szz - sxz * sxz;
    if !(det.abs() > 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    Ok(Point2::new((szz * bx - sxz * bz) / det, (sxx * bz - sxz * bx) / det))
}

fn trial_rng(seed: u64, trial: usize, raa: usize, anchor: usize, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 32) | ((raa as u64) << 20) | ((anchor as u64) << 4) | purpose);
    rng
}

const NOISE_STREAM: u64 = 0;
const CLUSTER_STREAM: u64 = 1;

/// Simulates one trial of `raa` moving alone through the scenario.
///
/// Each anchor runs an independent interrogation per step (separate
/// narrowband channels, so no inter-anchor interference). Steps with fewer
/// than two detections have no fix.
pub fn simulate_trajectory(scenario: &Scenario, raa_index: usize, trial: usize) -> Result<Vec<StepRecord>> {
    scenario.validate()?;
    let raa = scenario.raas.get(raa_index).ok_or_else(|| {
        Error::InvalidConfig(format!("RAA index {raa_index} out of range ({} RAAs)", scenario.raas.len()))
    })?;
    let rf = &scenario.rf;
    let noise = noise_variances(rf);
    let codebook = scenario.codebook();
    let k = raa.id_sequence.len() as u64;
    let basis = DeflationBasis::new();

    let mut noise_rngs: Vec<ChaCha8Rng> = (0..scenario.anchors.len())
        .map(|a| trial_rng(scenario.master_seed, trial, raa_index, a, NOISE_STREAM))
        .collect();
    let mut tracked: Vec<Option<crate::geometry::CVector>> = vec![None; scenario.anchors.len()];

    let mut records = Vec::new();
    for (step, time) in scenario.step_times(raa_index).into_iter().enumerate() {
        let truth = raa.trajectory.position_at(time);
        let raa_pose = crate::geometry::Pose::new(truth, raa.geometry.pose.orientation);
        let mut reports = Vec::with_capacity(scenario.anchors.len());
        let mut bearings = Vec::new();

        for (ai, anchor) in scenario.anchors.iter().enumerate() {
            let pose = anchor.geometry.pose;
            let aoa = match bearing(&pose, &truth) {
                Ok(a) => a,
                Err(Error::OutOfFieldOfView { .. }) => {
                    reports.push(AnchorReport {
                        anchor: ai,
                        in_view: false,
                        detected: false,
                        iterations: 0,
                        true_sine: None,
                        aoa_sine: None,
                        matched: None,
                        id_correct: false,
                        snr_trace: Vec::new(),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let aod = axis_sine(&raa_pose, &pose.position).asin();
            let distance = truth.distance_to(&pose.position);
            let channel = match scenario.channel {
                ChannelMode::FreeSpace => los_channel(rf, &anchor.geometry, &raa.geometry, distance, aoa, aod)?,
                ChannelMode::Multipath(params) => {
                    // Same draws at every step: the scatterers stay put for
                    // the whole trial.
                    let mut crng = trial_rng(scenario.master_seed, trial, raa_index, ai, CLUSTER_STREAM);
                    let paths = clustered_paths(rf, distance, aoa, aod, &params, &mut crng)?;
                    multipath_channel(rf, &anchor.geometry, &raa.geometry, &paths, distance)?
                }
            };
            let rng = &mut noise_rngs[ai];
            let modulation = IdModulation { sequence: raa.id_sequence.clone(), cycle_offset: rng.random_range(0..k) };
            let target = RaaTarget { channel, gain: raa.gain, modulation: modulation.clone() };
            let mut link = RaaLink::new(anchor.geometry, rf.wavelength, rf.tx_power, noise, vec![target])?;

            let mut cfg = scenario.trx.clone();
            cfg.init = match (&tracked[ai], scenario.tracking) {
                (Some(prev), true) => InitStrategy::Previous(prev.clone()),
                _ => InitStrategy::Random,
            };
            let result = run_interrogation(&mut link, &cfg, noise.trx, rng, &codebook, &basis)?;
            let id_correct = match (result.matched_id, result.id_start_symbol) {
                (Some(m), Some(start)) => m.index == raa_index && m.lag == modulation.expected_lag(start),
                _ => false,
            };
            if result.detected {
                if let Some(m) = result.matched_id {
                    if m.index == raa_index {
                        tracked[ai] = Some(result.beamformer.clone());
                    }
                }
                if let Some(s) = result.aoa_sine {
                    bearings.push((pose.position, pose.orientation + s.asin()));
                }
            }
            reports.push(AnchorReport {
                anchor: ai,
                in_view: true,
                detected: result.detected,
                iterations: result.iterations(),
                true_sine: Some(aoa.sin()),
                aoa_sine: result.aoa_sine,
                matched: result.matched_id,
                id_correct,
                snr_trace: result.snr_trace,
            });
        }

        let estimate = fuse_aoa_ls(&bearings).ok();
        records.push(StepRecord {
            step,
            time,
            truth,
            anchors: reports,
            estimate,
            error: estimate.map(|p| p.distance_to(&truth)),
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRun {
    pub trial: usize,
    pub raa: usize,
    pub steps: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    pub runs: Vec<TrialRun>,
}

impl MonteCarloResult {
    /// Localization errors over all trials, RAAs and steps with a fix.
    pub fn errors(&self) -> Vec<f64> {
        self.runs.iter().flat_map(|r| r.steps.iter().filter_map(|s| s.error)).collect()
    }

    pub fn errors_for(&self, raa: usize) -> Vec<f64> {
        self.runs.iter().filter(|r| r.raa == raa).flat_map(|r| r.steps.iter().filter_map(|s| s.error)).collect()
    }

    /// Steps without a position fix.
    pub fn outages(&self) -> usize {
        self.runs.iter().map(|r| r.steps.iter().filter(|s| s.estimate.is_none()).count()).sum()
    }

    /// Detection iteration counts of one (anchor, RAA) pair.
    pub fn iterations(&self, anchor: usize, raa: usize) -> Vec<usize> {
        self.runs
            .iter()
            .filter(|r| r.raa == raa)
            .flat_map(|r| r.steps.iter())
            .filter_map(|s| s.anchors.get(anchor))
            .filter(|a| a.detected)
            .map(|a| a.iterations)
            .collect()
    }
}

/// Runs every (trial, RAA) pair in parallel. Results are ordered by trial
/// then RAA and do not depend on the thread count.
pub fn monte_carlo(scenario: &Scenario) -> Result<MonteCarloResult> {
    scenario.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..scenario.trials).flat_map(|t| (0..scenario.raas.len()).map(move |r| (t, r))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(trial, raa)| simulate_trajectory(scenario, raa, trial).map(|steps| TrialRun { trial, raa, steps }))
        .collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloResult { runs })
}

/// Empirical CDF with ties collapsed.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    values: Vec<f64>,
    fractions: Vec<f64>,
}

impl Ecdf {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    /// Fraction of samples ≤ `x`.
    pub fn eval(&self, x: f64) -> f64 {
        match self.values.partition_point(|v| *v <= x) {
            0 => 0.0,
            i => self.fractions[i - 1],
        }
    }

    /// Smallest sample value whose cumulative fraction reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let i = self.fractions.partition_point(|f| *f < p - 1e-12);
        self.values[i.min(self.values.len() - 1)]
    }
}

pub fn ecdf(samples: &[f64]) -> Result<Ecdf> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("samples"));
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(Error::Domain("samples contain NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut values: Vec<f64> = Vec::new();
    let mut fractions = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        if values.last() == Some(v) {
            *fractions.last_mut().expect("paired with values") = (i + 1) as f64 / n;
        } else {
            values.push(*v);
            fractions.push((i + 1) as f64 / n);
        }
    }
    Ok(Ecdf { values, fractions })
}
