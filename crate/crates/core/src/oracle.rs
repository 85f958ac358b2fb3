//! Exhaustive ground truth for small models.

use rayon::prelude::*;
use serde::Serialize;

use crate::delay::{tie_break_cmp, training_delay, NetParams, Partition};
use crate::error::{Error, Result};
use crate::profile::{ModelProfile, INPUT_NODE};
use crate::splitter::{Method, SplitDecision};

/// Largest model (in layers, input excluded) the oracle will enumerate.
pub const ORACLE_LAYER_LIMIT: usize = 22;

/// Walks every consistent partition (no server layer feeds a device
/// layer) exactly once, by backtracking over a topological order.
#[derive(Debug, Clone)]
pub struct PartitionIterator<'a> {
    p: &'a ModelProfile,
    order: Vec<usize>,
    flags: Vec<bool>,
    // 1 = server tried, 2 = device tried
    choice: Vec<u8>,
    depth: usize,
    done: bool,
}

pub fn enumerate_partitions(p: &ModelProfile) -> Result<PartitionIterator<'_>> {
    if p.num_layers() > ORACLE_LAYER_LIMIT {
        return Err(Error::TooLarge {
            layers: p.num_layers(),
            limit: ORACLE_LAYER_LIMIT,
        });
    }
    let order: Vec<usize> = p.topo_order().iter().copied().filter(|&v| v != INPUT_NODE).collect();
    let mut flags = vec![false; p.node_count()];
    flags[INPUT_NODE] = true;
    let mut it = PartitionIterator {
        p,
        choice: vec![0; order.len()],
        order,
        flags,
        depth: 0,
        done: false,
    };
    it.descend();
    Ok(it)
}

impl PartitionIterator<'_> {
    fn parents_on_device(&self, v: usize) -> bool {
        self.p.parents(v).iter().all(|&u| self.flags[u])
    }

    fn descend(&mut self) {
        while self.depth < self.order.len() {
            let v = self.order[self.depth];
            self.choice[self.depth] = 1;
            self.flags[v] = false;
            self.depth += 1;
        }
    }

    fn advance(&mut self) {
        loop {
            if self.depth == 0 {
                self.done = true;
                return;
            }
            self.depth -= 1;
            let v = self.order[self.depth];
            if self.choice[self.depth] == 1 && self.parents_on_device(v) {
                self.choice[self.depth] = 2;
                self.flags[v] = true;
                self.depth += 1;
                return;
            }
            self.choice[self.depth] = 0;
            self.flags[v] = false;
        }
    }
}

impl Iterator for PartitionIterator<'_> {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let out = Partition::from_flags(self.flags.clone()).expect("input pinned");
        self.advance();
        if !self.done {
            self.descend();
        }
        Some(out)
    }
}

/// Minimum-delay consistent partition by enumeration, with the splitter's
/// tie-breaking.
pub fn oracle_optimal(p: &ModelProfile, n: &NetParams) -> Result<SplitDecision> {
    let mut best: Option<(u64, Partition)> = None;
    for part in enumerate_partitions(p)? {
        let delay = training_delay(p, &part, n)?;
        let better = match &best {
            None => true,
            Some((d, b)) => {
                delay < *d || (delay == *d && tie_break_cmp(p, &part, b).is_lt())
            }
        };
        if better {
            best = Some((delay, part));
        }
    }
    let (delay, partition) = best.expect("at least one partition exists");
    let cut_value_us = crate::dag::build_split_dag(p, n)?.partition_cut_value(&partition)?;
    Ok(SplitDecision {
        partition,
        cut_value_us,
        delay_us: delay,
        method: Method::Oracle,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleCheck {
    pub seeds: u64,
    pub matched: u64,
    /// One line per disagreement, in seed order.
    pub mismatches: Vec<String>,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.matched == self.seeds
    }
}

/// Compares `optimal_split` with enumeration on `seeds` random nonlinear
/// profiles of 3..=`max_layers` layers (seed `s` gets `3 + s % (max - 2)`
/// layers). Delays must agree exactly.
pub fn oracle_check(seeds: u64, max_layers: usize) -> Result<OracleCheck> {
    if !(3..=ORACLE_LAYER_LIMIT).contains(&max_layers) {
        return Err(Error::TooLarge {
            layers: max_layers,
            limit: ORACLE_LAYER_LIMIT,
        });
    }
    let span = (max_layers - 2) as u64;
    let results: Vec<Option<String>> = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let mut rng = crate::fixtures::rng(seed);
            let p = crate::fixtures::random_profile(&mut rng, 3 + (seed % span) as usize);
            let n = crate::fixtures::random_net_params(&mut rng);
            let want = oracle_optimal(&p, &n).map_err(|e| e.to_string());
            let got = crate::splitter::optimal_split(&p, &n).map_err(|e| e.to_string());
            match (got, want) {
                (Ok(g), Ok(w)) if g.delay_us == w.delay_us => None,
                (Ok(g), Ok(w)) => Some(format!("seed {seed}: split {} us, oracle {} us", g.delay_us, w.delay_us)),
                (Err(e), _) | (_, Err(e)) => Some(format!("seed {seed}: {e}")),
            }
        })
        .collect();
    let mismatches: Vec<String> = results.into_iter().flatten().collect();
    Ok(OracleCheck {
        seeds,
        matched: seeds - mismatches.len() as u64,
        mismatches,
    })
}
