//! Ground-truth training delay of an explicit device/server partition.
//!
//! This module deliberately knows nothing about graphs or flows; the
//! splitters are checked against it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{ModelProfile, INPUT_NODE};

/// How layer execution weights are attached to the split graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// Both parameter-transfer terms sit on the device-execution arc, so a
    /// cut's value equals the training delay of its partition.
    #[default]
    Consistent,
    /// Upload term on the device arc, download term on the server arc.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetParams {
    /// Device to server rate, bytes per second.
    pub rate_up_bps: u64,
    /// Server to device rate, bytes per second.
    pub rate_down_bps: u64,
    /// Local iterations per epoch.
    pub local_iters: u64,
    pub weight_mode: WeightMode,
    /// Charge the raw sample batch when no layer runs on the device.
    pub input_cost: bool,
}

impl NetParams {
    pub fn new(rate_up_bps: u64, rate_down_bps: u64, local_iters: u64) -> Result<Self> {
        let n = Self {
            rate_up_bps,
            rate_down_bps,
            local_iters,
            weight_mode: WeightMode::Consistent,
            input_cost: true,
        };
        n.check()?;
        Ok(n)
    }

    pub fn with_mode(mut self, mode: WeightMode) -> Self {
        self.weight_mode = mode;
        self
    }

    pub fn with_input_cost(mut self, on: bool) -> Self {
        self.input_cost = on;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.rate_up_bps == 0 || self.rate_down_bps == 0 {
            return Err(Error::InvalidNetParams("rates must be positive".into()));
        }
        if self.local_iters == 0 {
            return Err(Error::InvalidNetParams("local_iters must be at least 1".into()));
        }
        Ok(())
    }

    /// Smashed-data size the delay model charges for `node`.
    pub fn charged_output_bytes(&self, p: &ModelProfile, node: usize) -> u64 {
        if node == INPUT_NODE && !self.input_cost {
            0
        } else {
            p.output_bytes(node)
        }
    }

    /// Round-trip transfer of `bytes` (uplink plus downlink), one iteration.
    pub fn round_trip_us(&self, bytes: u64) -> Result<u64> {
        transfer_us(bytes, self.rate_up_bps)?
            .checked_add(transfer_us(bytes, self.rate_down_bps)?)
            .ok_or(Error::Overflow("round-trip transfer"))
    }
}

/// Transfer time of `bytes` at `rate_bps`, rounded up to whole microseconds.
///
/// Rounding up keeps the rounded cost subadditive
/// (`t(a) + t(b) >= t(a + b)`), which the intra-block test relies on.
pub fn transfer_us(bytes: u64, rate_bps: u64) -> Result<u64> {
    if rate_bps == 0 {
        return Err(Error::InvalidNetParams("zero rate".into()));
    }
    let num = bytes as u128 * 1_000_000;
    let q = num.div_ceil(rate_bps as u128);
    u64::try_from(q).map_err(|_| Error::Overflow("transfer time"))
}

/// Device/server assignment of every node. The input pseudo-layer is
/// always on the device.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    on_device: Vec<bool>,
}

impl Partition {
    pub fn from_flags(on_device: Vec<bool>) -> Result<Self> {
        match on_device.first() {
            Some(true) => Ok(Self { on_device }),
            Some(false) => Err(Error::BadPartition("input must be on the device".into())),
            None => Err(Error::BadPartition("empty partition".into())),
        }
    }

    /// Everything on the server except the input.
    pub fn all_server(p: &ModelProfile) -> Self {
        let mut on_device = vec![false; p.node_count()];
        on_device[INPUT_NODE] = true;
        Self { on_device }
    }

    pub fn all_device(p: &ModelProfile) -> Self {
        Self {
            on_device: vec![true; p.node_count()],
        }
    }

    pub fn from_device_ids<S: AsRef<str>>(p: &ModelProfile, ids: &[S]) -> Result<Self> {
        let mut part = Self::all_server(p);
        for id in ids {
            let node = p
                .node_of(id.as_ref())
                .ok_or_else(|| Error::UnknownLayer(id.as_ref().to_string()))?;
            part.on_device[node] = true;
        }
        Ok(part)
    }

    pub fn flags(&self) -> &[bool] {
        &self.on_device
    }

    pub fn is_device(&self, node: usize) -> bool {
        self.on_device[node]
    }

    pub fn set(&mut self, node: usize, on_device: bool) {
        if node != INPUT_NODE {
            self.on_device[node] = on_device;
        }
    }

    /// Number of real layers on the device (the input is not counted).
    pub fn device_layer_count(&self) -> usize {
        self.on_device.iter().skip(1).filter(|&&d| d).count()
    }

    pub fn device_ids<'a>(&self, p: &'a ModelProfile) -> Vec<&'a str> {
        (0..self.on_device.len())
            .filter(|&v| self.on_device[v])
            .map(|v| p.node_id(v))
            .collect()
    }

    pub fn server_ids<'a>(&self, p: &'a ModelProfile) -> Vec<&'a str> {
        (0..self.on_device.len())
            .filter(|&v| !self.on_device[v])
            .map(|v| p.node_id(v))
            .collect()
    }

    /// Sorted device layer ids, the secondary tie-break key.
    pub fn sorted_device_ids(&self, p: &ModelProfile) -> Vec<String> {
        let mut ids: Vec<String> = (1..self.on_device.len())
            .filter(|&v| self.on_device[v])
            .map(|v| p.node_id(v).to_string())
            .collect();
        ids.sort();
        ids
    }

    fn check_cover(&self, p: &ModelProfile) -> Result<()> {
        if self.on_device.len() != p.node_count() {
            return Err(Error::BadPartition(format!(
                "partition has {} entries, model has {} nodes",
                self.on_device.len(),
                p.node_count()
            )));
        }
        Ok(())
    }
}

/// Tie-break order among equal-delay partitions: fewer device layers
/// first, then lexicographic sorted device ids.
pub fn tie_break_cmp(p: &ModelProfile, a: &Partition, b: &Partition) -> std::cmp::Ordering {
    a.device_layer_count()
        .cmp(&b.device_layer_count())
        .then_with(|| a.sorted_device_ids(p).cmp(&b.sorted_device_ids(p)))
}

/// The first edge running from a server-side layer into a device-side one.
pub fn find_reverse_edge(p: &ModelProfile, c: &Partition) -> Option<(usize, usize)> {
    p.edges()
        .iter()
        .copied()
        .find(|&(u, v)| !c.is_device(u) && c.is_device(v))
}

pub fn is_consistent_partition(p: &ModelProfile, c: &Partition) -> Result<bool> {
    c.check_cover(p)?;
    Ok(find_reverse_edge(p, c).is_none())
}

fn require_consistent(p: &ModelProfile, c: &Partition) -> Result<()> {
    c.check_cover(p)?;
    match find_reverse_edge(p, c) {
        None => Ok(()),
        Some((u, v)) => Err(Error::InconsistentPartition {
            parent: p.node_id(u).to_string(),
            child: p.node_id(v).to_string(),
        }),
    }
}

/// Device-side layers with at least one server-side child, each listed once.
pub fn boundary_set(p: &ModelProfile, c: &Partition) -> Result<Vec<usize>> {
    require_consistent(p, c)?;
    Ok(boundary_nodes(p, c))
}

fn boundary_nodes(p: &ModelProfile, c: &Partition) -> Vec<usize> {
    (0..p.node_count())
        .filter(|&v| c.is_device(v) && p.children(v).iter().any(|&ch| !c.is_device(ch)))
        .collect()
}

/// Per-epoch training delay of `c` in microseconds:
/// `N * (device compute + boundary up/down + server compute)` plus the
/// device-side model upload and download.
pub fn training_delay(p: &ModelProfile, c: &Partition, n: &NetParams) -> Result<u64> {
    n.check()?;
    require_consistent(p, c)?;
    let overflow = || Error::Overflow("training delay");

    let mut per_iter: u64 = 0;
    let mut model_transfer: u64 = 0;
    for v in 1..p.node_count() {
        if c.is_device(v) {
            per_iter = per_iter.checked_add(p.xi_device(v)).ok_or_else(overflow)?;
            model_transfer = model_transfer
                .checked_add(n.round_trip_us(p.param_bytes(v))?)
                .ok_or_else(overflow)?;
        } else {
            per_iter = per_iter.checked_add(p.xi_server(v)).ok_or_else(overflow)?;
        }
    }
    for v in boundary_nodes(p, c) {
        let a = n.charged_output_bytes(p, v);
        per_iter = per_iter
            .checked_add(n.round_trip_us(a)?)
            .ok_or_else(overflow)?;
    }
    per_iter
        .checked_mul(n.local_iters)
        .and_then(|x| x.checked_add(model_transfer))
        .ok_or_else(overflow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{LayerProfile, ProfileBuilder};

    const MB: u64 = 1_000_000;
    const S: u64 = 1_000_000;

    fn three_vertex_chain() -> ModelProfile {
        ProfileBuilder::new("chain3", 4 * MB)
            .layer(LayerProfile::new("v1", S, S, 0, MB))
            .layer(LayerProfile::new("v2", 5 * S, S, 0, 10))
            .edge("input", "v1")
            .edge("v1", "v2")
            .build()
            .unwrap()
    }

    fn diamond() -> ModelProfile {
        let l = |id: &str| LayerProfile::new(id, 2, 1, 3, 7);
        ProfileBuilder::new("diamond", 5)
            .layer(l("v1"))
            .layer(l("v2"))
            .layer(l("v3"))
            .layer(l("v4"))
            .edge("input", "v1")
            .edge("v1", "v2")
            .edge("v1", "v3")
            .edge("v2", "v4")
            .edge("v3", "v4")
            .build()
            .unwrap()
    }

    #[test]
    fn transfer_rounds_up() {
        assert_eq!(transfer_us(MB, MB).unwrap(), S);
        assert_eq!(transfer_us(1, 3).unwrap(), 333_334);
        assert_eq!(transfer_us(0, 3).unwrap(), 0);
        assert!(transfer_us(1, 0).is_err());
    }

    #[test]
    fn consistency_examples() {
        let p = three_vertex_chain();
        let prefix = Partition::from_device_ids(&p, &["v1"]).unwrap();
        assert!(is_consistent_partition(&p, &prefix).unwrap());
        let reverse = Partition::from_device_ids(&p, &["v2"]).unwrap();
        assert!(!is_consistent_partition(&p, &reverse).unwrap());
        assert!(is_consistent_partition(&p, &Partition::all_server(&p)).unwrap());
    }

    #[test]
    fn boundary_examples() {
        let p = three_vertex_chain();
        assert_eq!(boundary_set(&p, &Partition::all_server(&p)).unwrap(), vec![INPUT_NODE]);
        assert!(boundary_set(&p, &Partition::all_device(&p)).unwrap().is_empty());

        let d = diamond();
        let c = Partition::from_device_ids(&d, &["v1"]).unwrap();
        let v1 = d.node_of("v1").unwrap();
        assert_eq!(boundary_set(&d, &c).unwrap(), vec![v1]);
    }

    #[test]
    fn boundary_rejects_inconsistent() {
        let p = three_vertex_chain();
        let reverse = Partition::from_device_ids(&p, &["v2"]).unwrap();
        assert!(matches!(
            boundary_set(&p, &reverse),
            Err(Error::InconsistentPartition { .. })
        ));
    }

    #[test]
    fn chain_delays() {
        let p = three_vertex_chain();
        let n = NetParams::new(MB, MB, 1).unwrap();
        let best = Partition::from_device_ids(&p, &["v1"]).unwrap();
        assert_eq!(training_delay(&p, &best, &n).unwrap(), 4 * S);
        assert_eq!(training_delay(&p, &Partition::all_server(&p), &n).unwrap(), 10 * S);
        assert_eq!(training_delay(&p, &Partition::all_device(&p), &n).unwrap(), 6 * S);
    }

    #[test]
    fn empty_model_costs_nothing() {
        let p = ProfileBuilder::new("empty", 123).build().unwrap();
        let n = NetParams::new(MB, MB, 1).unwrap();
        assert_eq!(training_delay(&p, &Partition::all_server(&p), &n).unwrap(), 0);
    }

    #[test]
    fn input_cost_switch() {
        let p = three_vertex_chain();
        let n = NetParams::new(MB, MB, 1).unwrap().with_input_cost(false);
        assert_eq!(training_delay(&p, &Partition::all_server(&p), &n).unwrap(), 2 * S);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(NetParams::new(0, 1, 1).is_err());
        assert!(NetParams::new(1, 1, 0).is_err());
        assert!(Partition::from_flags(vec![false, true]).is_err());
    }
}
