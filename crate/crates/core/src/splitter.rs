//! End-to-end optimal split: build the graph, restructure, cut, map back,
//! and cross-check the cut value against the delay model.

use serde::Serialize;

use crate::dag::{build_split_dag, map_cut_to_partition, multi_child_parents, restructure, SplitDag};
use crate::delay::{find_reverse_edge, training_delay, NetParams, Partition, WeightMode};
use crate::error::{Error, Result};
use crate::profile::{ModelProfile, INPUT_NODE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DagMincut,
    LinearBruteforce,
    Blockwise,
    Oracle,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::DagMincut => "dag-mincut",
            Method::LinearBruteforce => "linear-bruteforce",
            Method::Blockwise => "blockwise",
            Method::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitDecision {
    pub partition: Partition,
    pub cut_value_us: u64,
    pub delay_us: u64,
    pub method: Method,
}

/// Optimal split. Chains are scanned directly; anything with a
/// multi-child parent goes through the restructured min cut.
pub fn optimal_split(p: &ModelProfile, n: &NetParams) -> Result<SplitDecision> {
    let g = build_split_dag(p, n)?;
    if p.is_chain() && multi_child_parents(&g).is_empty() {
        return brute_force_linear(p, n);
    }
    solve_min_cut(&g, p, n, Method::DagMincut)
}

/// All `L + 1` prefix partitions of a chain, shortest device prefix first.
pub fn prefix_partitions(p: &ModelProfile) -> Result<Vec<Partition>> {
    if let Some(v) = (0..p.node_count()).find(|&v| p.children(v).len() > 1) {
        return Err(Error::NotAChain(p.node_id(v).to_string()));
    }
    let mut current = Partition::all_server(p);
    let mut out = vec![current.clone()];
    for &v in p.topo_order().iter().filter(|&&v| v != INPUT_NODE) {
        current.set(v, true);
        out.push(current.clone());
    }
    Ok(out)
}

/// Evaluates every prefix cut of a chain; ties go to the shorter prefix.
pub fn brute_force_linear(p: &ModelProfile, n: &NetParams) -> Result<SplitDecision> {
    let mut best: Option<(u64, Partition)> = None;
    for part in prefix_partitions(p)? {
        let delay = training_delay(p, &part, n)?;
        if best.as_ref().is_none_or(|(d, _)| delay < *d) {
            best = Some((delay, part));
        }
    }
    let (delay_us, partition) = best.expect("a chain has at least one prefix");
    let cut_value_us = build_split_dag(p, n)?.partition_cut_value(&partition)?;
    Ok(SplitDecision {
        partition,
        cut_value_us,
        delay_us,
        method: Method::LinearBruteforce,
    })
}

/// Restructures `g`, takes its source-minimal minimum cut and maps it back
/// to a layer partition. In consistent mode the cut value must equal the
/// training delay of that partition.
pub fn solve_min_cut(g: &SplitDag, p: &ModelProfile, n: &NetParams, method: Method) -> Result<SplitDecision> {
    let (partition, cut_value) = min_cut_partition(g, p)?;
    let delay_us = training_delay(p, &partition, n)?;
    if n.weight_mode == WeightMode::Consistent && cut_value != delay_us {
        return Err(Error::CrossCheck {
            cut_value_us: cut_value,
            delay_us,
        });
    }
    Ok(SplitDecision {
        partition,
        cut_value_us: cut_value,
        delay_us,
        method,
    })
}

/// Restructures `g` and returns the partition of its source-minimal
/// minimum cut together with the cut value.
pub fn min_cut_partition(g: &SplitDag, p: &ModelProfile) -> Result<(Partition, u64)> {
    let r = restructure(g)?;
    let mut net = r.to_flow_network_with_precedence(p);
    let cut = net.min_cut()?;
    let partition = map_cut_to_partition(&r, &cut.source_side);
    if let Some((u, v)) = find_reverse_edge(p, &partition) {
        return Err(Error::InconsistentPartition {
            parent: p.node_id(u).to_string(),
            child: p.node_id(v).to_string(),
        });
    }
    Ok((partition, cut.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::oracle_optimal;
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

    #[test]
    fn chain_example() {
        let p = three_vertex_chain();
        let n = NetParams::new(MB, MB, 1).unwrap();
        let d = optimal_split(&p, &n).unwrap();
        assert_eq!(d.method, Method::LinearBruteforce);
        assert_eq!(d.partition.device_ids(&p), vec!["input", "v1"]);
        assert_eq!(d.delay_us, 4 * S);
        assert_eq!(d.cut_value_us, 4 * S);

        let g = build_split_dag(&p, &n).unwrap();
        let via_cut = solve_min_cut(&g, &p, &n, Method::DagMincut).unwrap();
        assert_eq!(via_cut.partition, d.partition);
        assert_eq!(via_cut.delay_us, d.delay_us);
    }

    #[test]
    fn transfer_free_goes_all_server() {
        let l = |id: &str, xi: u64| LayerProfile::new(id, xi, xi, 0, 0);
        let p = ProfileBuilder::new("free", 0)
            .layer(l("a", 3))
            .layer(l("b", 5))
            .layer(l("c", 7))
            .edge("input", "a")
            .edge("a", "b")
            .edge("a", "c")
            .build()
            .unwrap();
        let n = NetParams::new(100, 100, 4).unwrap();
        let d = optimal_split(&p, &n).unwrap();
        assert_eq!(d.method, Method::DagMincut);
        assert_eq!(d.partition, Partition::all_server(&p));
        assert_eq!(d.delay_us, 4 * 15);
    }

    #[test]
    fn empty_model_linear() {
        let p = ProfileBuilder::new("empty", 9).build().unwrap();
        let n = NetParams::new(1, 1, 1).unwrap();
        let d = brute_force_linear(&p, &n).unwrap();
        assert_eq!(d.partition, Partition::all_server(&p));
        assert_eq!(d.delay_us, 0);
    }

    #[test]
    fn linear_rejects_branching() {
        let l = |id: &str| LayerProfile::new(id, 1, 1, 0, 1);
        let p = ProfileBuilder::new("fork", 1)
            .layer(l("a"))
            .layer(l("b"))
            .edge("input", "a")
            .edge("input", "b")
            .build()
            .unwrap();
        let n = NetParams::new(1, 1, 1).unwrap();
        assert!(matches!(brute_force_linear(&p, &n), Err(Error::NotAChain(_))));
    }

    #[test]
    fn prefix_count_on_eighteen_layers() {
        let mut b = ProfileBuilder::new("chain18", 100);
        let mut prev = "input".to_string();
        for i in 0..18 {
            let id = format!("l{i}");
            b.push_layer(LayerProfile::new(&id, 10 + i, 5, 100, 1000 - 10 * i));
            b.push_edge(&prev, &id);
            prev = id;
        }
        let p = b.build().unwrap();
        assert_eq!(prefix_partitions(&p).unwrap().len(), 19);
        let n = NetParams::new(2000, 3000, 3).unwrap();
        let lin = brute_force_linear(&p, &n).unwrap();
        assert_eq!(lin.delay_us, oracle_optimal(&p, &n).unwrap().delay_us);
    }

    #[test]
    fn mapping_identity_and_all_device() {
        let p = three_vertex_chain();
        let n = NetParams::new(MB, MB, 1).unwrap();
        let g = build_split_dag(&p, &n).unwrap();
        let all = vec![true; g.vertex_count()];
        let mut side = all.clone();
        side[crate::dag::SINK] = false;
        assert_eq!(map_cut_to_partition(&g, &side), Partition::all_device(&p));
        let part = Partition::from_device_ids(&p, &["v1"]).unwrap();
        let side = g.source_side_for(&part).unwrap();
        assert_eq!(map_cut_to_partition(&g, &side), part);
    }
}
