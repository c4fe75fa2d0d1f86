//! Domain types and validated scenario configurations.
//!
//! A scenario file is a TOML document mirroring [`ScenarioConfig`]; unknown
//! keys are rejected so a typo cannot silently fall back to a default. The
//! built-in scenarios also ship as files under `scenarios/` at the repository
//! root.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("unknown scenario name {0:?} (expected mcd, mcd_nofade, scd_i, scd_ii or scd_iii)")]
    UnknownBuiltin(String),
    #[error("scenario io: {0}")]
    Io(#[from] std::io::Error),
}

fn invalid(field: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        message: message.into(),
    }
}

/// Grid of transmission blocks: `n_subframes` (time, 1 ms each) by
/// `n_subchannels` (frequency). One TB carries one CAM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourcePool {
    pub n_subframes: u32,
    pub n_subchannels: u32,
}

impl ResourcePool {
    pub fn n_tbs(&self) -> usize {
        (self.n_subframes * self.n_subchannels) as usize
    }

    /// Time-length of one pool occurrence in ms. This is not the CAM period;
    /// pools repeat back-to-back.
    pub fn period_ms(&self) -> u64 {
        self.n_subframes as u64
    }

    pub fn tb_index(&self, subframe: u32, subchannel: u32) -> usize {
        debug_assert!(subframe < self.n_subframes && subchannel < self.n_subchannels);
        (subframe * self.n_subchannels + subchannel) as usize
    }

    pub fn subframe_of(&self, tb: usize) -> u32 {
        debug_assert!(tb < self.n_tbs());
        tb as u32 / self.n_subchannels
    }

    pub fn subchannel_of(&self, tb: usize) -> u32 {
        tb as u32 % self.n_subchannels
    }

    /// Two TBs conflict under the half-duplex constraint iff they share a
    /// subframe.
    pub fn hd_conflict(&self, a: usize, b: usize) -> bool {
        self.subframe_of(a) == self.subframe_of(b)
    }
}

/// Straight highway segment outside coverage: one lane per direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocaGeometry {
    pub length_m: f64,
    #[serde(default = "default_lanes")]
    pub lanes_per_direction: u32,
    #[serde(default = "default_lane_width")]
    pub lane_width_m: f64,
    /// Used only to normalize occupancy counts in the scheduler state.
    #[serde(default = "default_vehicle_length")]
    pub vehicle_length_m: f64,
}

fn default_lanes() -> u32 {
    1
}
fn default_lane_width() -> f64 {
    4.0
}
fn default_vehicle_length() -> f64 {
    5.0
}

impl DocaGeometry {
    pub fn max_vehicles_per_direction(&self) -> u32 {
        (self.length_m / self.vehicle_length_m).floor() as u32 * self.lanes_per_direction
    }
}

/// Pathloss models for the SINR channel. The log-distance form is the exact,
/// dependency-free fallback; the WINNER+ B1 LOS variant follows the published
/// V2V evaluation assumptions (1.5 m antennas, 3 m clamp).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathlossConfig {
    WinnerB1Los {
        #[serde(default = "default_carrier_ghz")]
        carrier_ghz: f64,
    },
    LogDistance {
        exponent: f64,
        ref_loss_3m_db: f64,
    },
}

fn default_carrier_ghz() -> f64 {
    5.9
}

/// Channel variants: single collision domain, deterministic disc, or
/// SINR with pathloss and log-normal shadowing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelConfig {
    Scd,
    McdRange {
        range_m: f64,
    },
    McdSinr {
        pathloss: PathlossConfig,
        #[serde(default = "default_shadow_sigma")]
        shadowing_sigma_db: f64,
        #[serde(default = "default_shadow_decorrelation")]
        shadowing_decorrelation_m: f64,
        #[serde(default = "default_noise_dbm")]
        noise_power_dbm: f64,
        /// When absent, calibrated so the configured transmit power reaches
        /// `target_range_m` at median shadowing.
        #[serde(default)]
        sinr_threshold_db: Option<f64>,
        #[serde(default = "default_target_range")]
        target_range_m: f64,
    },
}

fn default_shadow_sigma() -> f64 {
    3.0
}
fn default_shadow_decorrelation() -> f64 {
    25.0
}
fn default_noise_dbm() -> f64 {
    -95.0
}
fn default_target_range() -> f64 {
    120.0
}

/// Re-insertion policy after a vehicle leaves the area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilityConfig {
    /// Exited vehicles re-enter immediately from the opposite direction;
    /// the population stays at `vehicles`.
    ConstantDensity { vehicles: u32 },
    /// Exited vehicles re-enter from the opposite direction after an
    /// exponential delay, so density varies but never exceeds `max_vehicles`.
    ExpReinsert { max_vehicles: u32, mean_offset_s: f64 },
}

impl MobilityConfig {
    pub fn population_cap(&self) -> u32 {
        match *self {
            MobilityConfig::ConstantDensity { vehicles } => vehicles,
            MobilityConfig::ExpReinsert { max_vehicles, .. } => max_vehicles,
        }
    }
}

/// Complete simulation scenario. Immutable once validated; safe to share
/// read-only across workers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub geometry: DocaGeometry,
    pub pool: ResourcePool,
    pub channel: ChannelConfig,
    pub mobility: MobilityConfig,
    pub tx_power_dbm: f64,
    pub speed_mps: f64,
    pub cam_period_ms: u64,
    pub cam_size_bytes: u32,
    /// Mean headway of the Poisson vehicle drop, seconds.
    pub headway_mean_s: f64,
    pub prr_window_s: f64,
    /// Sorted, non-overlapping `[min, max)` distance bins for PRR
    /// measurement; receivers beyond the last bin are out of scope.
    pub prr_range_bins: Vec<(f64, f64)>,
}

impl ScenarioConfig {
    pub fn prr_window_ms(&self) -> u64 {
        (self.prr_window_s * 1000.0).round() as u64
    }

    /// Checks every invariant; returns the config unchanged on success so
    /// call sites can stay fluent. Errors name the offending field.
    pub fn validate(self) -> Result<Self, ScenarioError> {
        if self.pool.n_subframes == 0 {
            return Err(invalid("pool.n_subframes", "empty pool"));
        }
        if self.pool.n_subchannels == 0 {
            return Err(invalid("pool.n_subchannels", "empty pool"));
        }
        if !(self.geometry.length_m > 0.0) {
            return Err(invalid("geometry.length_m", "must be positive"));
        }
        if !(self.geometry.vehicle_length_m > 0.0) {
            return Err(invalid("geometry.vehicle_length_m", "must be positive"));
        }
        if !(self.geometry.lane_width_m > 0.0) {
            return Err(invalid("geometry.lane_width_m", "must be positive"));
        }
        if self.geometry.lanes_per_direction != 1 {
            return Err(invalid(
                "geometry.lanes_per_direction",
                "only one lane per direction is supported",
            ));
        }
        if self.geometry.max_vehicles_per_direction() < 1 {
            return Err(invalid(
                "geometry",
                "vehicle_length_m exceeds length_m; no vehicle fits",
            ));
        }
        if !(self.speed_mps >= 0.0 && self.speed_mps.is_finite()) {
            return Err(invalid("speed_mps", "must be finite and non-negative"));
        }
        if self.cam_period_ms == 0 {
            return Err(invalid("cam_period_ms", "must be positive"));
        }
        if !(self.headway_mean_s > 0.0) {
            return Err(invalid("headway_mean_s", "must be positive"));
        }
        if self.prr_window_ms() == 0 {
            return Err(invalid("prr_window_s", "window shorter than 1 ms"));
        }
        if self.prr_range_bins.is_empty() {
            return Err(invalid("prr_range_bins", "at least one bin required"));
        }
        let mut prev_max = 0.0_f64;
        for (i, &(lo, hi)) in self.prr_range_bins.iter().enumerate() {
            if !(lo >= 0.0) || !(hi > lo) {
                return Err(invalid(
                    "prr_range_bins",
                    format!("bin {i} [{lo}, {hi}) is not a valid range"),
                ));
            }
            if i > 0 && lo < prev_max {
                return Err(invalid(
                    "prr_range_bins",
                    format!("bin {i} overlaps or is out of order"),
                ));
            }
            prev_max = hi;
        }
        let cap = self.mobility.population_cap();
        if cap == 0 {
            return Err(invalid("mobility", "population cap must be positive"));
        }
        if cap > 2 * self.geometry.max_vehicles_per_direction() {
            return Err(invalid(
                "mobility",
                format!(
                    "population cap {cap} exceeds road capacity {}",
                    2 * self.geometry.max_vehicles_per_direction()
                ),
            ));
        }
        if let MobilityConfig::ExpReinsert { mean_offset_s, .. } = self.mobility {
            if !(mean_offset_s > 0.0) {
                return Err(invalid("mobility.mean_offset_s", "must be positive"));
            }
        }
        match self.channel {
            ChannelConfig::Scd => {}
            ChannelConfig::McdRange { range_m } => {
                if !(range_m > 0.0) {
                    return Err(invalid("channel.range_m", "must be positive"));
                }
            }
            ChannelConfig::McdSinr {
                shadowing_sigma_db,
                shadowing_decorrelation_m,
                noise_power_dbm,
                target_range_m,
                ..
            } => {
                if !(shadowing_sigma_db >= 0.0) {
                    return Err(invalid("channel.shadowing_sigma_db", "must be >= 0"));
                }
                if !(shadowing_decorrelation_m > 0.0) {
                    return Err(invalid("channel.shadowing_decorrelation_m", "must be > 0"));
                }
                if !noise_power_dbm.is_finite() {
                    return Err(invalid("channel.noise_power_dbm", "must be finite"));
                }
                if !(target_range_m > 0.0) {
                    return Err(invalid("channel.target_range_m", "must be positive"));
                }
            }
        }
        Ok(self)
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig =
            toml::from_str(s).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        cfg.validate()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ScenarioError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// The built-in scenario names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinScenario {
    Mcd,
    McdNofade,
    ScdI,
    ScdII,
    ScdIII,
}

impl BuiltinScenario {
    pub const ALL: [BuiltinScenario; 5] = [
        BuiltinScenario::Mcd,
        BuiltinScenario::McdNofade,
        BuiltinScenario::ScdI,
        BuiltinScenario::ScdII,
        BuiltinScenario::ScdIII,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinScenario::Mcd => "mcd",
            BuiltinScenario::McdNofade => "mcd_nofade",
            BuiltinScenario::ScdI => "scd_i",
            BuiltinScenario::ScdII => "scd_ii",
            BuiltinScenario::ScdIII => "scd_iii",
        }
    }

    pub fn parse(name: &str) -> Result<Self, ScenarioError> {
        match name {
            "mcd" => Ok(BuiltinScenario::Mcd),
            "mcd_nofade" => Ok(BuiltinScenario::McdNofade),
            "scd_i" => Ok(BuiltinScenario::ScdI),
            "scd_ii" => Ok(BuiltinScenario::ScdII),
            "scd_iii" => Ok(BuiltinScenario::ScdIII),
            other => Err(ScenarioError::UnknownBuiltin(other.to_string())),
        }
    }
}

const SPEED_50_KMH: f64 = 50.0 / 3.6;

/// Returns the exact built-in configuration for `name`. All built-ins share
/// the 500 m straight highway, 50 km/h, 190 B CAMs every 100 ms, and the
/// 2.5 s Poisson vehicle drop.
pub fn builtin_scenario(name: BuiltinScenario) -> ScenarioConfig {
    let geometry = DocaGeometry {
        length_m: 500.0,
        lanes_per_direction: 1,
        lane_width_m: 4.0,
        vehicle_length_m: 5.0,
    };
    let common = |name: &str, pool: ResourcePool, channel, mobility, tx_power_dbm, bins| {
        ScenarioConfig {
            name: name.to_string(),
            seed: 1,
            geometry,
            pool,
            channel,
            mobility,
            tx_power_dbm,
            speed_mps: SPEED_50_KMH,
            cam_period_ms: 100,
            cam_size_bytes: 190,
            headway_mean_s: 2.5,
            prr_window_s: 10.0,
            prr_range_bins: bins,
        }
    };
    // SCD channels are measured over the whole area regardless of distance.
    let scd_bins = vec![(0.0, f64::INFINITY)];
    let mcd_bins = vec![(0.0, 50.0), (50.0, 100.0)];
    let cfg = match name {
        BuiltinScenario::Mcd => common(
            "mcd",
            ResourcePool {
                n_subframes: 10,
                n_subchannels: 2,
            },
            ChannelConfig::McdSinr {
                pathloss: PathlossConfig::WinnerB1Los { carrier_ghz: 5.9 },
                shadowing_sigma_db: 3.0,
                shadowing_decorrelation_m: 25.0,
                noise_power_dbm: -95.0,
                sinr_threshold_db: None,
                target_range_m: 120.0,
            },
            MobilityConfig::ConstantDensity { vehicles: 30 },
            -5.0,
            mcd_bins.clone(),
        ),
        BuiltinScenario::McdNofade => common(
            "mcd_nofade",
            ResourcePool {
                n_subframes: 10,
                n_subchannels: 2,
            },
            ChannelConfig::McdRange { range_m: 120.0 },
            MobilityConfig::ExpReinsert {
                max_vehicles: 30,
                mean_offset_s: 2.5,
            },
            -5.0,
            mcd_bins,
        ),
        BuiltinScenario::ScdI => common(
            "scd_i",
            ResourcePool {
                n_subframes: 10,
                n_subchannels: 2,
            },
            ChannelConfig::Scd,
            MobilityConfig::ExpReinsert {
                max_vehicles: 10,
                mean_offset_s: 2.5,
            },
            23.0,
            scd_bins.clone(),
        ),
        BuiltinScenario::ScdII => common(
            "scd_ii",
            ResourcePool {
                n_subframes: 2,
                n_subchannels: 10,
            },
            ChannelConfig::Scd,
            MobilityConfig::ExpReinsert {
                max_vehicles: 4,
                mean_offset_s: 2.5,
            },
            23.0,
            scd_bins.clone(),
        ),
        BuiltinScenario::ScdIII => common(
            "scd_iii",
            ResourcePool {
                n_subframes: 5,
                n_subchannels: 4,
            },
            ChannelConfig::Scd,
            MobilityConfig::ExpReinsert {
                max_vehicles: 5,
                mean_offset_s: 2.5,
            },
            23.0,
            scd_bins,
        ),
    };
    cfg.validate().expect("built-in scenarios are valid")
}
