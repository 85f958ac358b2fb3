//! Scenario configuration. A config document names a band and channel
//! condition and may override any radio, mobility or run parameter; the
//! rest comes from per-band defaults.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::channel::{LinkParams, RateRow, RateTable};
use super::mobility::KMH_30;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    /// n1, 2.1 GHz
    Sub6,
    /// n257, 28 GHz
    Mmwave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelCondition {
    Good,
    Normal,
    Poor,
}

impl ChannelCondition {
    pub fn sigma_db(self) -> f64 {
        match self {
            ChannelCondition::Good => 2.0,
            ChannelCondition::Normal => 4.0,
            ChannelCondition::Poor => 6.0,
        }
    }
}

/// Default compute factors for four device tiers, slowest last. Factors
/// of at least 1 keep every device no faster than the server.
pub const DEFAULT_TIER_FACTORS: [f64; 4] = [1.0, 1.6, 2.4, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSpec {
    pub id: String,
    pub compute_factor: f64,
    pub start_m: [f64; 2],
    pub velocity_mps: [f64; 2],
}

/// A fully resolved scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub band: Band,
    pub carrier_ghz: f64,
    pub eirp_dbm: f64,
    pub num_beams: u32,
    pub bandwidth_hz: f64,
    pub path_loss_exponent: f64,
    pub noise_figure_db: f64,
    pub channel_sigma_db: f64,
    pub cell_radius_m: f64,
    pub bs_height_m: f64,
    pub min_rate_bps: u64,
    pub epochs: usize,
    pub epoch_interval_s: f64,
    pub local_iters: u64,
    pub seed: u64,
    pub devices: Vec<DeviceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_table: Option<Vec<RateRow>>,
}

/// Config document: every field but `band` is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub band: Option<Band>,
    pub condition: Option<ChannelCondition>,
    pub carrier_ghz: Option<f64>,
    pub eirp_dbm: Option<f64>,
    pub num_beams: Option<u32>,
    pub bandwidth_hz: Option<f64>,
    pub path_loss_exponent: Option<f64>,
    pub noise_figure_db: Option<f64>,
    pub channel_sigma_db: Option<f64>,
    pub cell_radius_m: Option<f64>,
    pub bs_height_m: Option<f64>,
    pub min_rate_bps: Option<u64>,
    pub epochs: Option<usize>,
    pub epoch_interval_s: Option<f64>,
    pub local_iters: Option<u64>,
    pub seed: Option<u64>,
    pub num_devices: Option<usize>,
    pub tier_factors: Option<Vec<f64>>,
    pub speed_mps: Option<f64>,
    pub devices: Option<Vec<DeviceSpec>>,
    pub rate_table: Option<Vec<RateRow>>,
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let cfg: ScenarioConfig =
        serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
    Scenario::from_config(cfg)
}

impl Scenario {
    /// Defaults for a band under a channel condition: 20 devices at
    /// 30 km/h, 300 epochs.
    pub fn preset(band: Band, condition: ChannelCondition, seed: u64) -> Self {
        Self::from_config(ScenarioConfig {
            band: Some(band),
            condition: Some(condition),
            seed: Some(seed),
            ..Default::default()
        })
        .expect("preset is valid")
    }

    pub fn from_config(c: ScenarioConfig) -> Result<Self> {
        let band = c.band.ok_or_else(|| Error::InvalidScenario("`band` is required".into()))?;
        let (f, eirp, beams, bw, eta, radius) = match band {
            Band::Sub6 => (2.1, 40.0, 16, 20e6, 3.0, 500.0),
            Band::Mmwave => (28.0, 50.0, 64, 400e6, 2.1, 200.0),
        };
        let sigma = match (c.channel_sigma_db, c.condition) {
            (Some(s), _) => s,
            (None, Some(cond)) => cond.sigma_db(),
            (None, None) => ChannelCondition::Normal.sigma_db(),
        };
        let seed = c.seed.unwrap_or(0);
        let radius = c.cell_radius_m.unwrap_or(radius);
        let devices = match c.devices {
            Some(d) => d,
            None => random_devices(
                seed,
                c.num_devices.unwrap_or(20),
                radius,
                c.speed_mps.unwrap_or(KMH_30),
                c.tier_factors.as_deref().unwrap_or(&DEFAULT_TIER_FACTORS),
            )?,
        };
        let sc = Scenario {
            band,
            carrier_ghz: c.carrier_ghz.unwrap_or(f),
            eirp_dbm: c.eirp_dbm.unwrap_or(eirp),
            num_beams: c.num_beams.unwrap_or(beams),
            bandwidth_hz: c.bandwidth_hz.unwrap_or(bw),
            path_loss_exponent: c.path_loss_exponent.unwrap_or(eta),
            noise_figure_db: c.noise_figure_db.unwrap_or(7.0),
            channel_sigma_db: sigma,
            cell_radius_m: radius,
            bs_height_m: c.bs_height_m.unwrap_or(25.0),
            min_rate_bps: c.min_rate_bps.unwrap_or(1_000),
            epochs: c.epochs.unwrap_or(300),
            epoch_interval_s: c.epoch_interval_s.unwrap_or(10.0),
            local_iters: c.local_iters.unwrap_or(10),
            seed,
            devices,
            rate_table: c.rate_table,
        };
        sc.check()?;
        Ok(sc)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let positive = [
            ("carrier_ghz", self.carrier_ghz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("path_loss_exponent", self.path_loss_exponent),
            ("cell_radius_m", self.cell_radius_m),
            ("epoch_interval_s", self.epoch_interval_s),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("`{name}` must be positive, got {v}"));
            }
        }
        if !(self.channel_sigma_db.is_finite() && self.channel_sigma_db >= 0.0) {
            return bad("`channel_sigma_db` must be non-negative".into());
        }
        if !(self.bs_height_m.is_finite() && self.bs_height_m >= 0.0) {
            return bad("`bs_height_m` must be non-negative".into());
        }
        if self.num_beams == 0 {
            return bad("`num_beams` must be at least 1".into());
        }
        if self.epochs == 0 || self.local_iters == 0 {
            return bad("`epochs` and `local_iters` must be at least 1".into());
        }
        if self.devices.is_empty() {
            return bad("at least one device is required".into());
        }
        for d in &self.devices {
            if !(d.compute_factor.is_finite() && d.compute_factor >= 1.0) {
                return bad(format!(
                    "device `{}`: compute_factor {} is below 1 and would make it faster than the profiled device",
                    d.id, d.compute_factor
                ));
            }
            if d.start_m[0].hypot(d.start_m[1]) > self.cell_radius_m + 1e-9 {
                return bad(format!("device `{}` starts outside the cell", d.id));
            }
            if d.start_m == [0.0, 0.0] && self.bs_height_m == 0.0 {
                return bad(format!("device `{}` sits on the base station", d.id));
            }
        }
        if let Some(rows) = &self.rate_table {
            RateTable::new(rows.clone())?;
        }
        Ok(())
    }

    pub fn link(&self) -> LinkParams {
        LinkParams {
            carrier_ghz: self.carrier_ghz,
            eirp_dbm: self.eirp_dbm,
            num_beams: self.num_beams,
            bandwidth_hz: self.bandwidth_hz,
            path_loss_exponent: self.path_loss_exponent,
            noise_figure_db: self.noise_figure_db,
            min_rate_bps: self.min_rate_bps,
        }
    }

    pub fn table(&self) -> Option<RateTable> {
        self.rate_table.clone().map(|rows| RateTable::new(rows).expect("checked"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Uniform placement in the inner 90% of the cell with uniform headings.
/// Device `i` gets tier `i mod tiers`.
fn random_devices(seed: u64, count: usize, radius: f64, speed: f64, tiers: &[f64]) -> Result<Vec<DeviceSpec>> {
    if tiers.is_empty() {
        return Err(Error::InvalidScenario("`tier_factors` is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    Ok((0..count)
        .map(|i| {
            let r = 0.9 * radius * rng.random::<f64>().sqrt();
            let phi = TAU * rng.random::<f64>();
            let heading = TAU * rng.random::<f64>();
            DeviceSpec {
                id: format!("dev{i:02}"),
                compute_factor: tiers[i % tiers.len()],
                start_m: [r * phi.cos(), r * phi.sin()],
                velocity_mps: [speed * heading.cos(), speed * heading.sin()],
            }
        })
        .collect())
}
