//! Epoch loop: one device per epoch in round-robin order, its realized
//! link rates, and the training delay of each strategy's partition.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mobility::{distance_to_bs, position_at};
use super::scenario::Scenario;
use crate::blockwise::{blockwise_split_planned, BlockPlan, BlockwiseOptions};
use crate::dag::build_split_dag;
use crate::delay::{training_delay, NetParams, Partition};
use crate::error::{Error, Result};
use crate::profile::{ModelProfile, INPUT_NODE};
use crate::splitter::min_cut_partition;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Re-split every epoch with the block-wise algorithm.
    Proposed,
    /// The best single partition for the whole run.
    Oss,
    DeviceOnly,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Proposed, Strategy::Oss, Strategy::DeviceOnly];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Proposed => "proposed",
            Strategy::Oss => "oss",
            Strategy::DeviceOnly => "device-only",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown strategy `{s}` (proposed, oss, device-only)")))
    }
}

/// Realized link of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EpochLink {
    pub epoch: usize,
    pub device: usize,
    pub rate_up_bps: u64,
    pub rate_down_bps: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochReport {
    pub epoch: usize,
    pub device: String,
    pub rate_up_bps: u64,
    pub rate_down_bps: u64,
    pub strategy: Strategy,
    pub partition: Partition,
    pub delay_us: u64,
}

impl EpochReport {
    pub fn cut_size(&self) -> usize {
        self.partition.device_layer_count()
    }
}

/// Rates for every epoch. Each device draws its shadowing from its own
/// stream of the scenario seed, two draws (up, down) per selected epoch.
pub fn rate_trace(sc: &Scenario) -> Result<Vec<EpochLink>> {
    sc.check()?;
    let link = sc.link();
    let table = sc.table();
    let shadow = Normal::new(0.0, sc.channel_sigma_db).map_err(|e| Error::InvalidScenario(e.to_string()))?;
    let mut streams: Vec<ChaCha8Rng> = (0..sc.devices.len())
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(sc.seed);
            r.set_stream(i as u64);
            r
        })
        .collect();
    Ok((0..sc.epochs)
        .map(|epoch| {
            let device = epoch % sc.devices.len();
            let spec = &sc.devices[device];
            let t = epoch as f64 * sc.epoch_interval_s;
            let pos = position_at(spec.start_m, spec.velocity_mps, sc.cell_radius_m, t);
            let d = distance_to_bs(pos, sc.bs_height_m).max(1.0);
            let chi_up = shadow.sample(&mut streams[device]);
            let chi_down = shadow.sample(&mut streams[device]);
            EpochLink {
                epoch,
                device,
                rate_up_bps: link.rate(d, chi_up, table.as_ref()),
                rate_down_bps: link.rate(d, chi_down, table.as_ref()),
            }
        })
        .collect())
}

/// Scales device compute of `p` by `factor`, rounding to whole
/// microseconds and never going below the original.
pub fn scale_device_compute(p: &ModelProfile, factor: f64) -> ModelProfile {
    p.map_layers(|l| {
        let mut l = l.clone();
        l.xi_device_us = ((l.xi_device_us as f64 * factor).round() as u64).max(l.xi_device_us);
        l
    })
}

/// A scenario bound to a profile, with its rate trace realized once so
/// every strategy sees the same channel.
pub struct Simulation<'a> {
    sc: &'a Scenario,
    base: &'a ModelProfile,
    trace: Vec<EpochLink>,
    profiles: Vec<ModelProfile>,
    plan: BlockPlan,
}

impl<'a> Simulation<'a> {
    pub fn new(sc: &'a Scenario, p: &'a ModelProfile) -> Result<Self> {
        let trace = rate_trace(sc)?;
        let profiles = sc.devices.iter().map(|d| scale_device_compute(p, d.compute_factor)).collect();
        Ok(Self {
            sc,
            base: p,
            trace,
            profiles,
            plan: BlockPlan::new(p)?,
        })
    }

    pub fn trace(&self) -> &[EpochLink] {
        &self.trace
    }

    pub fn profile(&self, device: usize) -> &ModelProfile {
        &self.profiles[device]
    }

    pub fn net(&self, e: &EpochLink) -> Result<NetParams> {
        NetParams::new(e.rate_up_bps, e.rate_down_bps, self.sc.local_iters)
    }

    fn report(&self, e: &EpochLink, strategy: Strategy, partition: Partition, delay_us: u64) -> EpochReport {
        EpochReport {
            epoch: e.epoch,
            device: self.sc.devices[e.device].id.clone(),
            rate_up_bps: e.rate_up_bps,
            rate_down_bps: e.rate_down_bps,
            strategy,
            partition,
            delay_us,
        }
    }

    pub fn run(&self, strategy: Strategy) -> Result<Vec<EpochReport>> {
        match strategy {
            Strategy::Proposed => self
                .trace
                .par_iter()
                .map(|e| {
                    let p = self.profile(e.device);
                    let d = blockwise_split_planned(p, &self.net(e)?, &self.plan, BlockwiseOptions::default())?.decision;
                    Ok(self.report(e, strategy, d.partition, d.delay_us))
                })
                .collect(),
            Strategy::Oss => self.run_fixed(strategy, &self.oss_partition()?),
            Strategy::DeviceOnly => self.run_fixed(strategy, &Partition::all_device(self.base)),
        }
    }

    fn run_fixed(&self, strategy: Strategy, part: &Partition) -> Result<Vec<EpochReport>> {
        let delays = self.fixed_delays(part)?;
        Ok(self
            .trace
            .iter()
            .zip(delays)
            .map(|(e, d)| self.report(e, strategy, part.clone(), d))
            .collect())
    }

    /// Per-epoch delay of one fixed partition.
    pub fn fixed_delays(&self, part: &Partition) -> Result<Vec<u64>> {
        self.trace
            .par_iter()
            .map(|e| training_delay(self.profile(e.device), part, &self.net(e)?))
            .collect()
    }

    /// The fixed partition with the smallest total delay over the trace.
    /// Total delay of a fixed partition is the cut value of the graph whose
    /// capacities are summed over all epochs, so its minimum cut is exact.
    pub fn oss_partition(&self) -> Result<Partition> {
        let mut total = None;
        for e in &self.trace {
            let g = build_split_dag(self.profile(e.device), &self.net(e)?)?;
            match &mut total {
                None => total = Some(g),
                Some(t) => t.accumulate(&g)?,
            }
        }
        let total = total.expect("scenario has at least one epoch");
        let (part, cut_value) = min_cut_partition(&total, self.base)?;
        let delay: u64 = self.fixed_delays(&part)?.iter().sum();
        if cut_value != delay {
            return Err(Error::CrossCheck {
                cut_value_us: cut_value,
                delay_us: delay,
            });
        }
        Ok(part)
    }

    /// Per-epoch maximum over a family of fixed partitions.
    pub fn worst_fixed_delays(&self, family: &[Partition]) -> Result<Vec<u64>> {
        self.trace
            .par_iter()
            .map(|e| {
                let net = self.net(e)?;
                let p = self.profile(e.device);
                family
                    .iter()
                    .map(|c| training_delay(p, c, &net))
                    .try_fold(0u64, |m, d| d.map(|d| m.max(d)))
            })
            .collect()
    }
}

/// The fixed cuts along a topological order: device-side prefixes from
/// all-server to all-device.
pub fn prefix_cut_family(p: &ModelProfile) -> Vec<Partition> {
    let mut current = Partition::all_server(p);
    let mut out = vec![current.clone()];
    for &v in p.topo_order().iter().filter(|&&v| v != INPUT_NODE) {
        current.set(v, true);
        out.push(current.clone());
    }
    out
}

pub fn simulate(sc: &Scenario, strategy: Strategy, p: &ModelProfile) -> Result<Vec<EpochReport>> {
    Simulation::new(sc, p)?.run(strategy)
}

#[derive(Serialize)]
struct CsvRow<'a> {
    epoch: usize,
    device: &'a str,
    #[serde(rename = "R_D")]
    rate_up_bps: u64,
    #[serde(rename = "R_S")]
    rate_down_bps: u64,
    strategy: &'a str,
    cut_size: usize,
    delay_us: u64,
}

/// Writes reports as `epoch,device,R_D,R_S,strategy,cut_size,delay_us`.
pub fn write_csv<'r>(out: impl Write, reports: impl IntoIterator<Item = &'r EpochReport>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(CsvRow {
            epoch: r.epoch,
            device: &r.device,
            rate_up_bps: r.rate_up_bps,
            rate_down_bps: r.rate_down_bps,
            strategy: r.strategy.name(),
            cut_size: r.cut_size(),
            delay_us: r.delay_us,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub model: String,
    pub band: super::scenario::Band,
    pub channel_sigma_db: f64,
    pub epochs: usize,
    pub seed: u64,
    pub total_delay_us: BTreeMap<Strategy, u64>,
    /// Percentage by which the proposed total undercuts each baseline.
    pub proposed_reduction_pct: BTreeMap<Strategy, f64>,
}

pub fn summarize(sc: &Scenario, p: &ModelProfile, runs: &[(Strategy, Vec<EpochReport>)]) -> Summary {
    let total_delay_us: BTreeMap<Strategy, u64> =
        runs.iter().map(|(s, r)| (*s, r.iter().map(|x| x.delay_us).sum())).collect();
    let proposed_reduction_pct = match total_delay_us.get(&Strategy::Proposed) {
        Some(&mine) => total_delay_us
            .iter()
            .filter(|(s, &t)| **s != Strategy::Proposed && t > 0)
            .map(|(s, &t)| (*s, 100.0 * (t as f64 - mine as f64) / t as f64))
            .collect(),
        None => BTreeMap::new(),
    };
    Summary {
        model: p.name().to_string(),
        band: sc.band,
        channel_sigma_db: sc.channel_sigma_db,
        epochs: sc.epochs,
        seed: sc.seed,
        total_delay_us,
        proposed_reduction_pct,
    }
}

/// Runs several strategies on one shared trace.
pub fn simulate_all(sc: &Scenario, p: &ModelProfile, strategies: &[Strategy]) -> Result<Vec<(Strategy, Vec<EpochReport>)>> {
    let sim = Simulation::new(sc, p)?;
    strategies.iter().map(|&s| Ok((s, sim.run(s)?))).collect()
}
