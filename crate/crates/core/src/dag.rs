//! The split graph: a flow network between a virtual device (source) and a
//! virtual server (sink) whose cuts encode device/server partitions.
//!
//! Arc classes:
//! * `(v, S)` device execution: paid when `v` runs on the device.
//! * `(D, v)` server execution: paid when `v` runs on the server.
//! * `(u, v)` propagation: round-trip smashed data of `u`, paid when `u` is
//!   device-side and `v` server-side.
//!
//! A parent with several children would have its propagation weight
//! counted once per crossing child; [`restructure`] inserts an auxiliary
//! vertex so that it is counted once.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::delay::{NetParams, Partition, WeightMode};
use crate::error::{Error, Result};
use crate::maxflow::{FlowNetwork, INF};
use crate::profile::{ModelProfile, INPUT_NODE};

pub const SOURCE: usize = 0;
pub const SINK: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum VertexKind {
    Source,
    Sink,
    /// A model layer, or the input pseudo-layer (node 0).
    Layer { node: usize },
    /// Auxiliary vertex carrying the execution arcs of `proxy_of`.
    Aux { proxy_of: usize },
    /// An abstracted block (index into the profile's blocks).
    Block { block: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct Vertex {
    pub kind: VertexKind,
    pub label: String,
    /// Model nodes whose placement this vertex represents.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArcKind {
    DeviceExec,
    ServerExec,
    Propagation,
    AuxLink,
    /// Keeps the input pseudo-layer on the device side.
    Pin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub capacity: u64,
    pub kind: ArcKind,
}

#[derive(Debug, Clone)]
pub struct SplitDag {
    vertices: Vec<Vertex>,
    arcs: Vec<Arc>,
    /// For each vertex, the auxiliary vertex that took over its execution arcs.
    proxy: Vec<Option<usize>>,
    /// Vertex currently representing each model node, if any.
    node_vertex: Vec<Option<usize>>,
}

/// Capacities of the execution arcs of `node`: `(device, server)`.
pub fn execution_weights(p: &ModelProfile, n: &NetParams, node: usize) -> Result<(u64, u64)> {
    let overflow = || Error::Overflow("execution weight");
    let k = p.param_bytes(node);
    let up = crate::delay::transfer_us(k, n.rate_up_bps)?;
    let down = crate::delay::transfer_us(k, n.rate_down_bps)?;
    let dev = p
        .xi_device(node)
        .checked_mul(n.local_iters)
        .ok_or_else(overflow)?;
    let srv = p
        .xi_server(node)
        .checked_mul(n.local_iters)
        .ok_or_else(overflow)?;
    let pair = match n.weight_mode {
        WeightMode::Consistent => (
            dev.checked_add(up).and_then(|x| x.checked_add(down)),
            Some(srv),
        ),
        WeightMode::PaperLiteral => (dev.checked_add(up), srv.checked_add(down)),
    };
    match pair {
        (Some(d), Some(s)) if d < INF && s < INF => Ok((d, s)),
        _ => Err(overflow()),
    }
}

/// Propagation weight of every outgoing data edge of `node`.
pub fn propagation_weight(p: &ModelProfile, n: &NetParams, node: usize) -> Result<u64> {
    n.round_trip_us(n.charged_output_bytes(p, node))?
        .checked_mul(n.local_iters)
        .filter(|&w| w < INF)
        .ok_or(Error::Overflow("propagation weight"))
}

/// Weighted split graph of a profile. The input pseudo-layer is pinned to
/// the device side; with `input_cost` off it is left out entirely.
pub fn build_split_dag(p: &ModelProfile, n: &NetParams) -> Result<SplitDag> {
    n.check()?;
    let mut g = SplitDag {
        vertices: vec![
            Vertex {
                kind: VertexKind::Source,
                label: "D".into(),
                members: vec![],
            },
            Vertex {
                kind: VertexKind::Sink,
                label: "S".into(),
                members: vec![],
            },
        ],
        arcs: Vec::with_capacity(3 * p.node_count() + p.edges().len()),
        proxy: vec![None, None],
        node_vertex: vec![None; p.node_count()],
    };

    if n.input_cost {
        let v = g.push_vertex(VertexKind::Layer { node: INPUT_NODE }, p.node_id(INPUT_NODE), vec![INPUT_NODE]);
        g.node_vertex[INPUT_NODE] = Some(v);
        g.push_arc(SOURCE, v, INF, ArcKind::Pin);
        g.push_arc(v, SINK, 0, ArcKind::Pin);
    }
    for node in 1..p.node_count() {
        let v = g.push_vertex(VertexKind::Layer { node }, p.node_id(node), vec![node]);
        g.node_vertex[node] = Some(v);
        let (dev, srv) = execution_weights(p, n, node)?;
        g.push_arc(SOURCE, v, srv, ArcKind::ServerExec);
        g.push_arc(v, SINK, dev, ArcKind::DeviceExec);
    }
    for &(u, c) in p.edges() {
        let (Some(from), Some(to)) = (g.node_vertex[u], g.node_vertex[c]) else {
            continue;
        };
        let w = propagation_weight(p, n, u)?;
        g.push_arc(from, to, w, ArcKind::Propagation);
    }
    Ok(g)
}

/// Vertices with two or more outgoing propagation arcs that do not yet
/// have an auxiliary vertex.
pub fn multi_child_parents(g: &SplitDag) -> Vec<usize> {
    let mut count = vec![0usize; g.vertices.len()];
    for a in &g.arcs {
        if a.kind == ArcKind::Propagation {
            count[a.from] += 1;
        }
    }
    (0..g.vertices.len())
        .filter(|&v| count[v] >= 2 && g.proxy[v].is_none())
        .filter(|&v| !matches!(g.vertices[v].kind, VertexKind::Aux { .. }))
        .collect()
}

/// Inserts an auxiliary vertex for every multi-child parent. Incoming arcs
/// and the arc to the sink move to the auxiliary vertex with unchanged
/// capacities; a new arc from the auxiliary vertex to the parent carries
/// one propagation weight.
pub fn restructure(g: &SplitDag) -> Result<SplitDag> {
    let parents = multi_child_parents(g);
    let mut out = g.clone();
    if parents.is_empty() {
        return Ok(out);
    }
    let mut incoming = vec![Vec::new(); g.vertices.len()];
    let mut to_sink = vec![Vec::new(); g.vertices.len()];
    let mut prop_weight: Vec<Option<u64>> = vec![None; g.vertices.len()];
    for (i, a) in g.arcs.iter().enumerate() {
        incoming[a.to].push(i);
        if a.to == SINK {
            to_sink[a.from].push(i);
        }
        if a.kind == ArcKind::Propagation {
            match prop_weight[a.from] {
                None => prop_weight[a.from] = Some(a.capacity),
                Some(w) if w != a.capacity => {
                    return Err(Error::HeterogeneousPropagation(g.vertices[a.from].label.clone()));
                }
                Some(_) => {}
            }
        }
    }
    for parent in parents {
        let w = prop_weight[parent].expect("multi-child parent has propagation arcs");
        let label = format!("{}'", g.vertices[parent].label);
        let members = g.vertices[parent].members.clone();
        let aux = out.push_vertex(VertexKind::Aux { proxy_of: parent }, &label, members);
        for &i in &incoming[parent] {
            out.arcs[i].to = aux;
        }
        for &i in &to_sink[parent] {
            out.arcs[i].from = aux;
        }
        out.push_arc(aux, parent, w, ArcKind::AuxLink);
        out.proxy[parent] = Some(aux);
        for &m in &out.vertices[aux].members.clone() {
            out.node_vertex[m] = Some(aux);
        }
    }
    Ok(out)
}

impl SplitDag {
    pub(crate) fn empty(node_count: usize) -> Self {
        Self {
            vertices: vec![
                Vertex {
                    kind: VertexKind::Source,
                    label: "D".into(),
                    members: vec![],
                },
                Vertex {
                    kind: VertexKind::Sink,
                    label: "S".into(),
                    members: vec![],
                },
            ],
            arcs: Vec::new(),
            proxy: vec![None, None],
            node_vertex: vec![None; node_count],
        }
    }

    pub(crate) fn push_vertex(&mut self, kind: VertexKind, label: &str, members: Vec<usize>) -> usize {
        self.vertices.push(Vertex {
            kind,
            label: label.to_string(),
            members,
        });
        self.proxy.push(None);
        self.vertices.len() - 1
    }

    pub(crate) fn push_arc(&mut self, from: usize, to: usize, capacity: u64, kind: ArcKind) {
        self.arcs.push(Arc {
            from,
            to,
            capacity,
            kind,
        });
    }

    pub(crate) fn set_node_vertex(&mut self, node: usize, v: usize) {
        self.node_vertex[node] = Some(v);
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    /// `|V|^2 |E|`, the Dinic work bound used to compare graph sizes.
    pub fn work_metric(&self) -> u128 {
        let v = self.vertices.len() as u128;
        v * v * self.arcs.len() as u128
    }

    pub fn node_count(&self) -> usize {
        self.node_vertex.len()
    }

    pub fn node_vertex(&self, node: usize) -> Option<usize> {
        self.node_vertex[node]
    }

    /// The auxiliary vertex of `v`, if restructuring gave it one.
    pub fn proxy_of(&self, v: usize) -> Option<usize> {
        self.proxy[v]
    }

    pub fn is_broadcast(&self, v: usize) -> bool {
        self.proxy[v].is_some()
    }

    pub fn find_arc(&self, from: usize, to: usize) -> Option<&Arc> {
        self.arcs.iter().find(|a| a.from == from && a.to == to)
    }

    pub fn vertex_by_label(&self, label: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.label == label)
    }

    pub fn to_flow_network(&self) -> FlowNetwork {
        let mut net = FlowNetwork::new(self.vertices.len(), SOURCE, SINK);
        for a in &self.arcs {
            net.add_arc(a.from, a.to, a.capacity);
        }
        net
    }

    /// Flow network plus an uncuttable arc from each child's placement
    /// vertex to its parent's. A cut can then never put a server-side layer
    /// in front of a device-side one; without these arcs the minimum cut
    /// of the restructured graph alone sometimes does.
    pub fn to_flow_network_with_precedence(&self, p: &ModelProfile) -> FlowNetwork {
        let mut net = self.to_flow_network();
        let mut seen = HashSet::new();
        for &(u, v) in p.edges() {
            let (Some(pu), Some(pv)) = (self.node_vertex[u], self.node_vertex[v]) else {
                continue;
            };
            if pu != pv && seen.insert((pv, pu)) {
                net.add_arc(pv, pu, INF);
            }
        }
        net
    }

    /// Adds the capacities of `other`, which must have the same vertices
    /// and arcs (for instance the graph of the same profile under another
    /// network condition). Sums saturate at [`INF`].
    pub fn accumulate(&mut self, other: &SplitDag) -> Result<()> {
        let same = self.vertices.len() == other.vertices.len()
            && self.arcs.len() == other.arcs.len()
            && self.arcs.iter().zip(&other.arcs).all(|(a, b)| (a.from, a.to, a.kind) == (b.from, b.to, b.kind));
        if !same {
            return Err(Error::Malformed("graphs to accumulate differ in shape".into()));
        }
        for (a, b) in self.arcs.iter_mut().zip(&other.arcs) {
            a.capacity = a.capacity.saturating_add(b.capacity).min(INF);
        }
        Ok(())
    }

    /// Sum of capacities of arcs leaving `source_side`, saturating.
    pub fn cut_value(&self, source_side: &[bool]) -> u64 {
        self.arcs
            .iter()
            .filter(|a| source_side[a.from] && !source_side[a.to])
            .fold(0u64, |acc, a| acc.saturating_add(a.capacity))
    }

    /// Vertex sides realizing `part`: placement vertices follow their
    /// layers, and each broadcast vertex sits on the server side exactly
    /// when its auxiliary is device-side and some child is server-side.
    pub fn source_side_for(&self, part: &Partition) -> Result<Vec<bool>> {
        let mut side = vec![false; self.vertices.len()];
        side[SOURCE] = true;
        for (v, vert) in self.vertices.iter().enumerate() {
            if v == SOURCE || v == SINK || self.is_broadcast(v) {
                continue;
            }
            let mut flags = vert.members.iter().map(|&m| part.is_device(m));
            let first = flags.next().unwrap_or(false);
            if flags.any(|f| f != first) {
                return Err(Error::BadPartition(format!(
                    "partition splits abstracted vertex `{}`",
                    vert.label
                )));
            }
            side[v] = first;
        }
        for v in 0..self.vertices.len() {
            if let Some(aux) = self.proxy[v] {
                let child_on_server = self
                    .arcs
                    .iter()
                    .any(|a| a.from == v && a.kind == ArcKind::Propagation && !side[a.to]);
                side[v] = side[aux] && !child_on_server;
            }
        }
        Ok(side)
    }

    /// Value of the cut that realizes `part` on this graph.
    pub fn partition_cut_value(&self, part: &Partition) -> Result<u64> {
        Ok(self.cut_value(&self.source_side_for(part)?))
    }

    /// Graphviz rendering: vertex labels carry provenance, arc labels
    /// carry capacities.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph split {\n  rankdir=LR;\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let detail = match v.kind {
                VertexKind::Source => "device".to_string(),
                VertexKind::Sink => "server".to_string(),
                VertexKind::Layer { .. } => "layer".to_string(),
                VertexKind::Aux { proxy_of } => format!("aux of {}", self.vertices[proxy_of].label),
                VertexKind::Block { .. } => format!("block of {} layers", v.members.len()),
            };
            let _ = writeln!(s, "  v{i} [label=\"{}\\n{detail}\"];", escape(&v.label));
        }
        for a in &self.arcs {
            let cap = if a.capacity >= INF {
                "inf".to_string()
            } else {
                a.capacity.to_string()
            };
            let style = match a.kind {
                ArcKind::DeviceExec => "color=blue",
                ArcKind::ServerExec => "color=orange",
                ArcKind::Propagation => "color=black",
                ArcKind::AuxLink => "color=black, style=bold",
                ArcKind::Pin => "color=gray, style=dashed",
            };
            let _ = writeln!(s, "  v{} -> v{} [label=\"{cap}\", {style}];", a.from, a.to);
        }
        s.push_str("}\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Layer partition encoded by a cut: every placement vertex assigns its
/// member layers to its own side. Broadcast vertices carry no placement.
pub fn map_cut_to_partition(g: &SplitDag, source_side: &[bool]) -> Partition {
    let mut flags = vec![false; g.node_count()];
    flags[INPUT_NODE] = true;
    for (v, vert) in g.vertices().iter().enumerate() {
        if v == SOURCE || v == SINK || g.is_broadcast(v) {
            continue;
        }
        for &m in &vert.members {
            if m != INPUT_NODE {
                flags[m] = source_side[v];
            }
        }
    }
    Partition::from_flags(flags).expect("input is pinned")
}
