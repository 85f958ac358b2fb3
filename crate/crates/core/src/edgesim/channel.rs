//! Radio link model: path loss with log-normal shadowing, beam-split
//! transmit power and a Shannon (or tabulated) rate.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Path loss in dB: `32.5 + 20 log10(f_GHz) + 10 eta log10(d_m) + chi`.
pub fn path_loss_db(f_ghz: f64, d_m: f64, eta: f64, chi_db: f64) -> f64 {
    32.5 + 20.0 * f_ghz.log10() + 10.0 * eta * d_m.log10() + chi_db
}

/// Per-beam transmit power from the total EIRP.
pub fn tx_power_dbm(eirp_dbm: f64, beams: u32) -> f64 {
    eirp_dbm - 10.0 * f64::from(beams.max(1)).log10()
}

/// Thermal noise over the band plus the receiver noise figure.
pub fn noise_floor_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

/// Shannon capacity in bytes per second.
pub fn shannon_rate_bps(bandwidth_hz: f64, snr_db: f64) -> f64 {
    bandwidth_hz * (1.0 + 10f64.powf(snr_db / 10.0)).log2() / 8.0
}

/// SNR-to-rate step function. A row `(snr_db, rate)` applies from its
/// SNR up to the next row's; below the first row the rate is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    rows: Vec<RateRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub snr_db: f64,
    pub rate_bps: f64,
}

impl RateTable {
    pub fn new(mut rows: Vec<RateRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidScenario("rate table is empty".into()));
        }
        if rows.iter().any(|r| !r.snr_db.is_finite() || r.rate_bps.is_nan() || r.rate_bps < 0.0) {
            return Err(Error::InvalidScenario("rate table has a non-finite SNR or negative rate".into()));
        }
        rows.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[RateRow] {
        &self.rows
    }

    /// Reads `snr_db,rate_bps` rows; a header line is allowed.
    pub fn from_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok());
            match (field(0), field(1)) {
                (Some(snr_db), Some(rate_bps)) => rows.push(RateRow { snr_db, rate_bps }),
                // header
                _ if rows.is_empty() && rec.position().is_some_and(|p| p.line() == 1) => {}
                _ => {
                    return Err(Error::InvalidScenario(format!(
                        "rate table line {}: expected `snr_db,rate_bps`",
                        rec.position().map_or(0, |p| p.line())
                    )))
                }
            }
        }
        Self::new(rows)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn rate_bps(&self, snr_db: f64) -> f64 {
        match self.rows.partition_point(|r| r.snr_db <= snr_db) {
            0 => 0.0,
            i => self.rows[i - 1].rate_bps,
        }
    }
}

/// Radio parameters of one link direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub carrier_ghz: f64,
    pub eirp_dbm: f64,
    pub num_beams: u32,
    pub bandwidth_hz: f64,
    pub path_loss_exponent: f64,
    pub noise_figure_db: f64,
    pub min_rate_bps: u64,
}

impl LinkParams {
    pub fn snr_db(&self, distance_m: f64, chi_db: f64) -> f64 {
        tx_power_dbm(self.eirp_dbm, self.num_beams)
            - path_loss_db(self.carrier_ghz, distance_m, self.path_loss_exponent, chi_db)
            - noise_floor_dbm(self.bandwidth_hz, self.noise_figure_db)
    }

    /// Realized rate in whole bytes per second, never below the floor.
    pub fn rate(&self, distance_m: f64, chi_db: f64, table: Option<&RateTable>) -> u64 {
        let snr = self.snr_db(distance_m, chi_db);
        let raw = match table {
            Some(t) => t.rate_bps(snr),
            None => shannon_rate_bps(self.bandwidth_hz, snr),
        };
        (raw.floor() as u64).max(self.min_rate_bps).max(1)
    }
}
