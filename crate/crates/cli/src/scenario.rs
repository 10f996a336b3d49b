//! JSON scenario schema. Every quantity is linear SI with the unit in the
//! key name, so a file written from a model parses back to the same model.

use std::path::Path;

use anyhow::{Context, Result};
use raaloc::channel::MultipathParams;
use raaloc::geometry::{ArrayGeometry, ArrayLayout, Point2, Pose, RfParams};
use raaloc::locengine::{AnchorNode, ChannelMode, Scenario};
use raaloc::raa::{IdAssignment, RaaNode, Trajectory};
use raaloc::trx::{InitStrategy, TrxConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub rf: RfSection,
    pub anchors: Vec<AnchorSection>,
    pub raas: Vec<RaaSection>,
    pub trx: TrxSection,
    pub channel: ChannelSection,
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RfSection {
    pub carrier_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub symbol_time_s: f64,
    pub tx_power_w: f64,
    pub trx_element_gain_linear: f64,
    pub raa_element_gain_linear: f64,
    pub trx_noise_figure_linear: f64,
    pub raa_noise_figure_linear: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "layout", rename_all = "snake_case")]
pub enum ArraySection {
    Linear { elements: usize, spacing_m: f64 },
    Planar { nx: usize, ny: usize, spacing_m: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSection {
    pub name: String,
    pub position_m: [f64; 2],
    /// Boresight, rad from +z toward +x.
    pub orientation_rad: f64,
    pub array: ArraySection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdSection {
    pub register_len: u32,
    pub index: usize,
    pub packet_len: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub time_s: f64,
    pub position_m: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaaSection {
    pub name: String,
    pub array: ArraySection,
    pub orientation_rad: f64,
    /// Reflection amplitude gain g.
    pub amplitude_gain_linear: f64,
    pub id: IdSection,
    pub trajectory: Vec<Waypoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrxSection {
    pub eta1_linear: f64,
    pub eta2_linear: f64,
    pub max_iterations: usize,
    pub aoa_oversampling: usize,
    pub tracking: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ChannelKind {
    FreeSpace,
    Multipath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultipathSection {
    pub clusters: usize,
    pub k_factor_linear: f64,
    pub angle_spread_rad: f64,
}

impl Default for MultipathSection {
    fn default() -> Self {
        let p = MultipathParams::default();
        Self { clusters: p.clusters, k_factor_linear: p.k_factor, angle_spread_rad: p.angle_spread }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub mode: ChannelKind,
    /// Surrogate used when `mode` is multipath.
    #[serde(default)]
    pub multipath: MultipathSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub update_rate_hz: f64,
    pub trials: usize,
    pub master_seed: u64,
}

fn array_geometry(a: &ArraySection, pose: Pose) -> raaloc::Result<ArrayGeometry> {
    let g = match *a {
        ArraySection::Linear { elements, spacing_m } => ArrayGeometry::linear(elements, spacing_m)?,
        ArraySection::Planar { nx, ny, spacing_m } => ArrayGeometry::planar(nx, ny, spacing_m)?,
    };
    Ok(g.with_pose(pose))
}

fn array_section(g: &ArrayGeometry) -> ArraySection {
    match g.layout {
        ArrayLayout::Linear { elements } => ArraySection::Linear { elements, spacing_m: g.spacing },
        ArrayLayout::Planar { nx, ny } => ArraySection::Planar { nx, ny, spacing_m: g.spacing },
    }
}

fn point([x, z]: [f64; 2]) -> Point2 {
    Point2::new(x, z)
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid scenario {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// SHA-256 of the compact JSON form.
    pub fn config_hash(&self) -> String {
        let compact = serde_json::to_string(self).expect("scenario serializes");
        hex::encode(Sha256::digest(compact.as_bytes()))
    }

    pub fn rf_params(&self) -> raaloc::Result<RfParams> {
        let s = &self.rf;
        let mut rf = RfParams::new(s.carrier_frequency_hz)?;
        rf.bandwidth = s.bandwidth_hz;
        rf.symbol_time = s.symbol_time_s;
        rf.tx_power = s.tx_power_w;
        rf.element_gain_trx = s.trx_element_gain_linear;
        rf.element_gain_raa = s.raa_element_gain_linear;
        rf.noise_figure_trx = s.trx_noise_figure_linear;
        rf.noise_figure_raa = s.raa_noise_figure_linear;
        if let Some(r) = self.raas.first() {
            rf.raa_gain = r.amplitude_gain_linear;
        }
        rf.validate()?;
        Ok(rf)
    }

    pub fn to_scenario(&self) -> raaloc::Result<Scenario> {
        let rf = self.rf_params()?;
        let anchors = self
            .anchors
            .iter()
            .map(|a| {
                Ok(AnchorNode {
                    name: a.name.clone(),
                    geometry: array_geometry(&a.array, Pose::new(point(a.position_m), a.orientation_rad))?,
                })
            })
            .collect::<raaloc::Result<Vec<_>>>()?;
        let raas = self
            .raas
            .iter()
            .map(|r| {
                let trajectory =
                    Trajectory::new(r.trajectory.iter().map(|w| (w.time_s, point(w.position_m))).collect())?;
                let start = trajectory.position_at(trajectory.start_time());
                let id = IdAssignment { register_len: r.id.register_len, taps_index: r.id.index, packet_len: r.id.packet_len };
                RaaNode::new(
                    r.name.clone(),
                    array_geometry(&r.array, Pose::new(start, r.orientation_rad))?,
                    r.amplitude_gain_linear,
                    id,
                    trajectory,
                )
            })
            .collect::<raaloc::Result<Vec<_>>>()?;
        let channel = match self.channel.mode {
            ChannelKind::FreeSpace => ChannelMode::FreeSpace,
            ChannelKind::Multipath => ChannelMode::Multipath(MultipathParams {
                clusters: self.channel.multipath.clusters,
                k_factor: self.channel.multipath.k_factor_linear,
                angle_spread: self.channel.multipath.angle_spread_rad,
            }),
        };
        let scenario = Scenario {
            anchors,
            raas,
            rf,
            trx: TrxConfig {
                eta1: self.trx.eta1_linear,
                eta2: self.trx.eta2_linear,
                max_iterations: self.trx.max_iterations,
                init: InitStrategy::Random,
                aoa_oversampling: self.trx.aoa_oversampling,
            },
            update_rate: self.simulation.update_rate_hz,
            channel,
            tracking: self.trx.tracking,
            trials: self.simulation.trials,
            master_seed: self.simulation.master_seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Inverse of [`ScenarioFile::to_scenario`]. The multipath surrogate of a
    /// free-space scenario is not part of the model and is left at its
    /// default.
    pub fn from_scenario(s: &Scenario) -> Self {
        let (mode, multipath) = match s.channel {
            ChannelMode::FreeSpace => (ChannelKind::FreeSpace, MultipathSection::default()),
            ChannelMode::Multipath(p) => (
                ChannelKind::Multipath,
                MultipathSection { clusters: p.clusters, k_factor_linear: p.k_factor, angle_spread_rad: p.angle_spread },
            ),
        };
        Self {
            rf: RfSection {
                carrier_frequency_hz: s.rf.carrier_frequency,
                bandwidth_hz: s.rf.bandwidth,
                symbol_time_s: s.rf.symbol_time,
                tx_power_w: s.rf.tx_power,
                trx_element_gain_linear: s.rf.element_gain_trx,
                raa_element_gain_linear: s.rf.element_gain_raa,
                trx_noise_figure_linear: s.rf.noise_figure_trx,
                raa_noise_figure_linear: s.rf.noise_figure_raa,
            },
            anchors: s
                .anchors
                .iter()
                .map(|a| AnchorSection {
                    name: a.name.clone(),
                    position_m: [a.geometry.pose.position.x, a.geometry.pose.position.z],
                    orientation_rad: a.geometry.pose.orientation,
                    array: array_section(&a.geometry),
                })
                .collect(),
            raas: s
                .raas
                .iter()
                .map(|r| RaaSection {
                    name: r.name.clone(),
                    array: array_section(&r.geometry),
                    orientation_rad: r.geometry.pose.orientation,
                    amplitude_gain_linear: r.gain,
                    id: IdSection { register_len: r.id.register_len, index: r.id.taps_index, packet_len: r.id.packet_len },
                    trajectory: r
                        .trajectory
                        .waypoints()
                        .iter()
                        .map(|(t, p)| Waypoint { time_s: *t, position_m: [p.x, p.z] })
                        .collect(),
                })
                .collect(),
            trx: TrxSection {
                eta1_linear: s.trx.eta1,
                eta2_linear: s.trx.eta2,
                max_iterations: s.trx.max_iterations,
                aoa_oversampling: s.trx.aoa_oversampling,
                tracking: s.tracking,
            },
            channel: ChannelSection { mode, multipath },
            simulation: SimulationSection {
                update_rate_hz: s.update_rate,
                trials: s.trials,
                master_seed: s.master_seed,
            },
        }
    }
}

/// The reference scenario shipped with the crate.
pub const REFERENCE_SCENARIO: &str = include_str!("../reference_scenario.json");
