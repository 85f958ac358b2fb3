//! Integer max-flow / min-cut (Dinic: BFS level graph, blocking flow by DFS).

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Capacity sentinel for arcs that must never be cut.
pub const INF: u64 = 1 << 62;

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    source: usize,
    sink: usize,
    adj: Vec<Vec<usize>>,
    // Arc 2i is the i-th inserted arc, 2i+1 its residual twin.
    to: Vec<usize>,
    residual: Vec<u64>,
    capacity: Vec<u64>,
    flow: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinCut {
    /// Vertices reachable from the source in the final residual graph.
    pub source_side: Vec<bool>,
    /// Indices (insertion order) of arcs leaving the source side.
    pub cut_arcs: Vec<usize>,
    pub value: u64,
}

impl FlowNetwork {
    pub fn new(vertices: usize, source: usize, sink: usize) -> Self {
        assert!(source < vertices && sink < vertices, "terminal out of range");
        assert_ne!(source, sink, "source and sink must differ");
        Self {
            source,
            sink,
            adj: vec![Vec::new(); vertices],
            to: Vec::new(),
            residual: Vec::new(),
            capacity: Vec::new(),
            flow: None,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn arc_count(&self) -> usize {
        self.capacity.len()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Adds a directed arc and returns its index. Capacities above [`INF`]
    /// are clamped to it.
    pub fn add_arc(&mut self, from: usize, to: usize, capacity: u64) -> usize {
        let capacity = capacity.min(INF);
        let id = self.capacity.len();
        self.adj[from].push(2 * id);
        self.adj[to].push(2 * id + 1);
        self.to.push(to);
        self.to.push(from);
        self.residual.push(capacity);
        self.residual.push(0);
        self.capacity.push(capacity);
        self.flow = None;
        id
    }

    /// Endpoints and capacity of arc `id`.
    pub fn arc(&self, id: usize) -> (usize, usize, u64) {
        (self.to[2 * id + 1], self.to[2 * id], self.capacity[id])
    }

    /// Flow currently routed through arc `id`.
    pub fn arc_flow(&self, id: usize) -> u64 {
        self.residual[2 * id + 1]
    }

    pub fn max_flow(&mut self) -> Result<u64> {
        if let Some(f) = self.flow {
            return Ok(f);
        }
        let n = self.adj.len();
        let mut total: u128 = 0;
        let mut level = vec![u32::MAX; n];
        let mut next = vec![0usize; n];
        while self.build_levels(&mut level) {
            next.iter_mut().for_each(|x| *x = 0);
            loop {
                let pushed = self.augment(self.source, u64::MAX, &level, &mut next);
                if pushed == 0 {
                    break;
                }
                total += pushed as u128;
                if total >= INF as u128 {
                    return Err(Error::UnboundedFlow);
                }
            }
        }
        let f = total as u64;
        self.flow = Some(f);
        Ok(f)
    }

    fn build_levels(&self, level: &mut [u32]) -> bool {
        level.iter_mut().for_each(|l| *l = u32::MAX);
        level[self.source] = 0;
        let mut queue = VecDeque::from([self.source]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let w = self.to[e];
                if self.residual[e] > 0 && level[w] == u32::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        level[self.sink] != u32::MAX
    }

    fn augment(&mut self, v: usize, limit: u64, level: &[u32], next: &mut [usize]) -> u64 {
        if v == self.sink {
            return limit;
        }
        while next[v] < self.adj[v].len() {
            let e = self.adj[v][next[v]];
            let w = self.to[e];
            if self.residual[e] > 0 && level[w] == level[v] + 1 {
                let pushed = self.augment(w, limit.min(self.residual[e]), level, next);
                if pushed > 0 {
                    self.residual[e] -= pushed;
                    self.residual[e ^ 1] += pushed;
                    return pushed;
                }
            }
            next[v] += 1;
        }
        0
    }

    /// Source-minimal minimum cut. Runs the max flow first if needed.
    pub fn min_cut(&mut self) -> Result<MinCut> {
        let flow = self.max_flow()?;
        let n = self.adj.len();
        let mut side = vec![false; n];
        side[self.source] = true;
        let mut queue = VecDeque::from([self.source]);
        while let Some(v) = queue.pop_front() {
            for &e in &self.adj[v] {
                let w = self.to[e];
                if self.residual[e] > 0 && !side[w] {
                    side[w] = true;
                    queue.push_back(w);
                }
            }
        }
        let mut cut_arcs = Vec::new();
        let mut value: u64 = 0;
        for id in 0..self.capacity.len() {
            let (from, to, cap) = self.arc(id);
            if side[from] && !side[to] {
                debug_assert_eq!(self.residual[2 * id], 0, "cut arc must be saturated");
                cut_arcs.push(id);
                value = value.saturating_add(cap);
            }
        }
        assert_eq!(value, flow, "min cut value must equal max flow");
        Ok(MinCut {
            source_side: side,
            cut_arcs,
            value,
        })
    }
}
