//! Per-receiver reception under the three channel variants, including the
//! half-duplex rule and collision semantics.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::mobility::VehicleId;
use crate::scenario::{ChannelConfig, PathlossConfig, ResourcePool};
use crate::simcore::{ReceiverRecord, ReceptionResult, TransmissionOutcome};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("resolve_subframe called with TBs from different subframes")]
    MixedSubframes,
}

/// Antenna height assumed by the B1 line-of-sight model.
const ANTENNA_HEIGHT_M: f64 = 1.5;
/// Below this separation the 3 m pathloss applies.
const MIN_PATHLOSS_DISTANCE_M: f64 = 3.0;

#[derive(Debug, Clone, Copy)]
pub enum Pathloss {
    WinnerB1Los { carrier_ghz: f64 },
    LogDistance { exponent: f64, ref_loss_3m_db: f64 },
}

impl Pathloss {
    pub fn from_config(cfg: &PathlossConfig) -> Self {
        match *cfg {
            PathlossConfig::WinnerB1Los { carrier_ghz } => Pathloss::WinnerB1Los { carrier_ghz },
            PathlossConfig::LogDistance {
                exponent,
                ref_loss_3m_db,
            } => Pathloss::LogDistance {
                exponent,
                ref_loss_3m_db,
            },
        }
    }

    /// Pathloss in dB at `distance_m`, clamped to the 3 m value below 3 m.
    /// Monotone nondecreasing in distance.
    pub fn db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(MIN_PATHLOSS_DISTANCE_M);
        match *self {
            Pathloss::WinnerB1Los { carrier_ghz } => {
                let h_eff = ANTENNA_HEIGHT_M - 1.0;
                let breakpoint = 4.0 * h_eff * h_eff * carrier_ghz * 1e9 / 3.0e8;
                if d <= breakpoint {
                    22.7 * d.log10() + 41.0 + 20.0 * (carrier_ghz / 5.0).log10()
                } else {
                    40.0 * d.log10() + 9.45 - 34.6 * h_eff.log10()
                        + 2.7 * (carrier_ghz / 5.0).log10()
                }
            }
            Pathloss::LogDistance {
                exponent,
                ref_loss_3m_db,
            } => ref_loss_3m_db + 10.0 * exponent * (d / MIN_PATHLOSS_DISTANCE_M).log10(),
        }
    }
}

/// SINR decoding threshold that puts the median (zero-shadowing) reception
/// boundary at `target_range_m` for the given link budget.
pub fn calibrate_sinr_threshold(
    tx_power_dbm: f64,
    noise_power_dbm: f64,
    pathloss: &Pathloss,
    target_range_m: f64,
) -> f64 {
    tx_power_dbm - noise_power_dbm - pathloss.db(target_range_m)
}

#[derive(Debug, Clone)]
pub enum ChannelModel {
    Scd,
    McdRange {
        range_m: f64,
    },
    McdSinr {
        tx_power_dbm: f64,
        pathloss: Pathloss,
        shadowing_sigma_db: f64,
        shadowing_decorrelation_m: f64,
        noise_power_dbm: f64,
        sinr_threshold_db: f64,
        target_range_m: f64,
    },
}

impl ChannelModel {
    pub fn from_config(cfg: &ChannelConfig, tx_power_dbm: f64) -> Self {
        match *cfg {
            ChannelConfig::Scd => ChannelModel::Scd,
            ChannelConfig::McdRange { range_m } => ChannelModel::McdRange { range_m },
            ChannelConfig::McdSinr {
                pathloss,
                shadowing_sigma_db,
                shadowing_decorrelation_m,
                noise_power_dbm,
                sinr_threshold_db,
                target_range_m,
            } => {
                let pathloss = Pathloss::from_config(&pathloss);
                let threshold = sinr_threshold_db.unwrap_or_else(|| {
                    calibrate_sinr_threshold(
                        tx_power_dbm,
                        noise_power_dbm,
                        &pathloss,
                        target_range_m,
                    )
                });
                ChannelModel::McdSinr {
                    tx_power_dbm,
                    pathloss,
                    shadowing_sigma_db,
                    shadowing_decorrelation_m,
                    noise_power_dbm,
                    sinr_threshold_db: threshold,
                    target_range_m,
                }
            }
        }
    }

    /// Nominal radius inside which a transmission is detectable; drives the
    /// distributed sensing baseline.
    pub fn sensing_range_m(&self) -> f64 {
        match *self {
            ChannelModel::Scd => f64::INFINITY,
            ChannelModel::McdRange { range_m } => range_m,
            ChannelModel::McdSinr { target_range_m, .. } => target_range_m,
        }
    }
}

/// Correlated log-normal shadowing per unordered vehicle pair; updated with a
/// Gauss-Markov step driven by the change in pair separation.
#[derive(Debug, Clone, Default)]
pub struct ShadowingField {
    values: BTreeMap<(u64, u64), (f64, f64)>, // pair -> (value_db, last separation)
}

impl ShadowingField {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample(
        &mut self,
        a: VehicleId,
        b: VehicleId,
        separation_m: f64,
        sigma_db: f64,
        decorrelation_m: f64,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let key = (a.0.min(b.0), a.0.max(b.0));
        let normal = Normal::new(0.0, sigma_db).expect("sigma >= 0");
        let value = match self.values.get(&key) {
            None => normal.sample(rng),
            Some(&(old, old_sep)) => {
                let rho = (-((separation_m - old_sep).abs()) / decorrelation_m).exp();
                rho * old + (1.0 - rho * rho).sqrt() * normal.sample(rng)
            }
        };
        self.values.insert(key, (value, separation_m));
        value
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Position snapshot of one vehicle at the resolved subframe.
#[derive(Debug, Clone, Copy)]
pub struct NodeSnapshot {
    pub id: VehicleId,
    pub x: f64,
    pub y: f64,
}

fn dist(a: &NodeSnapshot, b: &NodeSnapshot) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Resolves every transmission of one subframe against every other vehicle.
///
/// The half-duplex rule is channel-independent: a vehicle transmitting in
/// this subframe never receives. All `tbs` must share one subframe index.
pub fn resolve_subframe(
    pool: &ResourcePool,
    transmitters: &[(NodeSnapshot, usize)],
    listeners: &[NodeSnapshot],
    model: &ChannelModel,
    shadowing: &mut ShadowingField,
    rng: &mut ChaCha8Rng,
    time_ms: u64,
) -> Result<Vec<TransmissionOutcome>, ChannelError> {
    if let Some((_, first_tb)) = transmitters.first() {
        let sf = pool.subframe_of(*first_tb);
        if transmitters.iter().any(|(_, tb)| pool.subframe_of(*tb) != sf) {
            return Err(ChannelError::MixedSubframes);
        }
    }
    let tx_ids: Vec<VehicleId> = transmitters.iter().map(|(s, _)| s.id).collect();

    // Shadowing draws happen once per (tx, rx) pair per subframe; memoize so
    // the signal and interference paths see consistent gains.
    let mut shadow_cache: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut shadow = |a: &NodeSnapshot,
                      b: &NodeSnapshot,
                      sigma: f64,
                      decorr: f64,
                      shadowing: &mut ShadowingField,
                      rng: &mut ChaCha8Rng| {
        let key = (a.id.0.min(b.id.0), a.id.0.max(b.id.0));
        *shadow_cache
            .entry(key)
            .or_insert_with(|| shadowing.sample(a.id, b.id, dist(a, b), sigma, decorr, rng))
    };

    let mut outcomes = Vec::with_capacity(transmitters.len());
    for (tx, tb) in transmitters {
        let mut receivers = Vec::with_capacity(listeners.len().saturating_sub(1));
        for rx in listeners {
            if rx.id == tx.id {
                continue;
            }
            let distance_m = dist(tx, rx);
            let result = if tx_ids.contains(&rx.id) {
                ReceptionResult::HdLoss
            } else {
                match model {
                    ChannelModel::Scd => {
                        let reused = transmitters
                            .iter()
                            .any(|(other, otb)| other.id != tx.id && otb == tb);
                        if reused {
                            ReceptionResult::CollisionLoss
                        } else {
                            ReceptionResult::Success
                        }
                    }
                    ChannelModel::McdRange { range_m } => {
                        if distance_m > *range_m {
                            ReceptionResult::OutOfRange
                        } else {
                            let interfered = transmitters.iter().any(|(other, otb)| {
                                other.id != tx.id && otb == tb && dist(other, rx) <= *range_m
                            });
                            if interfered {
                                ReceptionResult::CollisionLoss
                            } else {
                                ReceptionResult::Success
                            }
                        }
                    }
                    ChannelModel::McdSinr {
                        tx_power_dbm,
                        pathloss,
                        shadowing_sigma_db,
                        shadowing_decorrelation_m,
                        noise_power_dbm,
                        sinr_threshold_db,
                        ..
                    } => {
                        let gain = shadow(
                            tx,
                            rx,
                            *shadowing_sigma_db,
                            *shadowing_decorrelation_m,
                            shadowing,
                            rng,
                        );
                        let signal_mw = dbm_to_mw(tx_power_dbm - pathloss.db(distance_m) + gain);
                        let mut interference_mw = 0.0;
                        for (other, otb) in transmitters {
                            if other.id == tx.id || otb != tb {
                                continue;
                            }
                            let g = shadow(
                                other,
                                rx,
                                *shadowing_sigma_db,
                                *shadowing_decorrelation_m,
                                shadowing,
                                rng,
                            );
                            interference_mw +=
                                dbm_to_mw(tx_power_dbm - pathloss.db(dist(other, rx)) + g);
                        }
                        let sinr =
                            signal_mw / (dbm_to_mw(*noise_power_dbm) + interference_mw);
                        if 10.0 * sinr.log10() >= *sinr_threshold_db {
                            ReceptionResult::Success
                        } else {
                            ReceptionResult::SinrLoss
                        }
                    }
                }
            };
            receivers.push(ReceiverRecord {
                receiver: rx.id,
                distance_m,
                result,
            });
        }
        outcomes.push(TransmissionOutcome {
            time_ms,
            tx: tx.id,
            tb: *tb,
            receivers,
        });
    }
    Ok(outcomes)
}
