//! Profiled models: per-layer compute delays and byte sizes plus the
//! data-flow edges between layers.
//!
//! Internally every layer is addressed by a dense node index. Node `0` is
//! the raw-input pseudo-layer (zero compute, zero parameters, output equal
//! to one sample batch); the declared layers follow in document order.

use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved id of the input pseudo-layer.
pub const INPUT_ID: &str = "input";

/// Node index of the input pseudo-layer.
pub const INPUT_NODE: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerProfile {
    pub id: String,
    /// Forward plus backward compute time on the device, per local iteration.
    pub xi_device_us: u64,
    /// Forward plus backward compute time on the server, per local iteration.
    pub xi_server_us: u64,
    pub param_bytes: u64,
    /// Smashed-data size. The returning gradient has the same size.
    pub output_bytes: u64,
}

impl LayerProfile {
    pub fn new(
        id: impl Into<String>,
        xi_device_us: u64,
        xi_server_us: u64,
        param_bytes: u64,
        output_bytes: u64,
    ) -> Self {
        Self {
            id: id.into(),
            xi_device_us,
            xi_server_us,
            param_bytes,
            output_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub output_bytes: u64,
}

/// A reused multi-layer component declared in the profile.
///
/// `input_layer_id` names the layer outside the block whose output enters
/// it; every edge entering the block must come from that layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockAnnotation {
    pub block_id: String,
    pub template_id: String,
    pub input_layer_id: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ProfileDoc {
    model_name: String,
    input: InputSpec,
    layers: Vec<LayerProfile>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    #[serde(default)]
    blocks: Vec<BlockAnnotation>,
}

/// A block annotation with ids resolved to node indices.
#[derive(Debug, Clone)]
pub struct Block {
    pub annotation: BlockAnnotation,
    pub input: usize,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ModelProfile {
    name: String,
    input_bytes: u64,
    layers: Vec<LayerProfile>,
    edges: Vec<(usize, usize)>,
    blocks: Vec<Block>,
    index: HashMap<String, usize>,
    children: Vec<Vec<usize>>,
    parents: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

/// Parse and structurally validate a profile document.
pub fn parse_model_profile(text: &str) -> Result<ModelProfile> {
    let doc: ProfileDoc =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    ModelProfile::new(doc.model_name, doc.input.output_bytes, doc.layers, doc.edges, doc.blocks)
}

impl ModelProfile {
    pub fn new(
        name: impl Into<String>,
        input_bytes: u64,
        layers: Vec<LayerProfile>,
        edges: Vec<(String, String)>,
        blocks: Vec<BlockAnnotation>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(layers.len() + 1);
        index.insert(INPUT_ID.to_string(), INPUT_NODE);
        for (i, layer) in layers.iter().enumerate() {
            if layer.id.is_empty() {
                return Err(Error::Malformed("empty layer id".into()));
            }
            if index.insert(layer.id.clone(), i + 1).is_some() {
                return Err(Error::DuplicateLayer(layer.id.clone()));
            }
        }
        let n = layers.len() + 1;
        let resolve = |id: &str| -> Result<usize> {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::UnknownLayer(id.to_string()))
        };

        let mut seen = HashSet::with_capacity(edges.len());
        let mut resolved = Vec::with_capacity(edges.len());
        let mut children = vec![Vec::new(); n];
        let mut parents = vec![Vec::new(); n];
        for (u, v) in &edges {
            let (u, v) = (resolve(u)?, resolve(v)?);
            if v == INPUT_NODE {
                return Err(Error::Malformed("the input pseudo-layer cannot have parents".into()));
            }
            if u == v {
                return Err(Error::Cycle(layer_id(&layers, u).to_string()));
            }
            if !seen.insert((u, v)) {
                return Err(Error::Malformed(format!(
                    "duplicate edge ({}, {})",
                    layer_id(&layers, u),
                    layer_id(&layers, v)
                )));
            }
            children[u].push(v);
            parents[v].push(u);
            resolved.push((u, v));
        }

        // Kahn's algorithm, smallest index first so the order is stable.
        let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            topo.push(v);
            for &c in &children[v] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if topo.len() != n {
            let stuck = (0..n).find(|&v| indegree[v] > 0).unwrap_or(0);
            return Err(Error::Cycle(layer_id(&layers, stuck).to_string()));
        }

        let mut reached = vec![false; n];
        reached[INPUT_NODE] = true;
        let mut queue = VecDeque::from([INPUT_NODE]);
        while let Some(v) = queue.pop_front() {
            for &c in &children[v] {
                if !reached[c] {
                    reached[c] = true;
                    queue.push_back(c);
                }
            }
        }
        if let Some(v) = (0..n).find(|&v| !reached[v]) {
            return Err(Error::Unreachable(layer_id(&layers, v).to_string()));
        }

        let mut resolved_blocks = Vec::with_capacity(blocks.len());
        for annotation in blocks {
            let input = resolve(&annotation.input_layer_id)?;
            let members = annotation
                .members
                .iter()
                .map(|m| resolve(m))
                .collect::<Result<Vec<_>>>()?;
            resolved_blocks.push(Block {
                annotation,
                input,
                members,
            });
        }

        Ok(Self {
            name: name.into(),
            input_bytes,
            layers,
            edges: resolved,
            blocks: resolved_blocks,
            index,
            children,
            parents,
            topo,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = ProfileDoc {
            model_name: self.name.clone(),
            input: InputSpec {
                output_bytes: self.input_bytes,
            },
            layers: self.layers.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(u, v)| (self.node_id(u).to_string(), self.node_id(v).to_string()))
                .collect(),
            blocks: self.blocks.iter().map(|b| b.annotation.clone()).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("profile serializes")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_bytes(&self) -> u64 {
        self.input_bytes
    }

    pub fn layers(&self) -> &[LayerProfile] {
        &self.layers
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Layers plus the input pseudo-layer.
    pub fn node_count(&self) -> usize {
        self.layers.len() + 1
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    /// Topological order of all nodes, starting with the input.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn node_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node_id(&self, node: usize) -> &str {
        layer_id(&self.layers, node)
    }

    pub fn layer(&self, node: usize) -> Option<&LayerProfile> {
        node.checked_sub(1).and_then(|i| self.layers.get(i))
    }

    pub fn xi_device(&self, node: usize) -> u64 {
        self.layer(node).map_or(0, |l| l.xi_device_us)
    }

    pub fn xi_server(&self, node: usize) -> u64 {
        self.layer(node).map_or(0, |l| l.xi_server_us)
    }

    pub fn param_bytes(&self, node: usize) -> u64 {
        self.layer(node).map_or(0, |l| l.param_bytes)
    }

    pub fn output_bytes(&self, node: usize) -> u64 {
        match node {
            INPUT_NODE => self.input_bytes,
            _ => self.layer(node).map_or(0, |l| l.output_bytes),
        }
    }

    /// True when no node (including the input) has more than one child.
    pub fn is_chain(&self) -> bool {
        self.children.iter().all(|c| c.len() <= 1)
    }

    /// Copy of this profile with every layer rewritten by `f`; structure is kept.
    pub fn map_layers(&self, mut f: impl FnMut(&LayerProfile) -> LayerProfile) -> Self {
        let mut out = self.clone();
        for layer in &mut out.layers {
            let id = layer.id.clone();
            *layer = f(layer);
            layer.id = id;
        }
        out
    }

    /// Copy with the blocks replaced.
    pub fn with_blocks(&self, blocks: Vec<BlockAnnotation>) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .map(|&(u, v)| (self.node_id(u).to_string(), self.node_id(v).to_string()))
            .collect();
        Self::new(self.name.clone(), self.input_bytes, self.layers.clone(), edges, blocks)
    }
}

fn layer_id(layers: &[LayerProfile], node: usize) -> &str {
    match node {
        INPUT_NODE => INPUT_ID,
        _ => layers.get(node - 1).map_or("?", |l| l.id.as_str()),
    }
}

/// Incremental construction used by fixtures and tests.
#[derive(Debug, Clone, Default)]
pub struct ProfileBuilder {
    name: String,
    input_bytes: u64,
    layers: Vec<LayerProfile>,
    edges: Vec<(String, String)>,
    blocks: Vec<BlockAnnotation>,
}

impl ProfileBuilder {
    pub fn new(name: impl Into<String>, input_bytes: u64) -> Self {
        Self {
            name: name.into(),
            input_bytes,
            ..Default::default()
        }
    }

    pub fn layer(mut self, layer: LayerProfile) -> Self {
        self.layers.push(layer);
        self
    }

    pub fn push_layer(&mut self, layer: LayerProfile) {
        self.layers.push(layer);
    }

    pub fn edge(mut self, parent: &str, child: &str) -> Self {
        self.push_edge(parent, child);
        self
    }

    pub fn push_edge(&mut self, parent: &str, child: &str) {
        self.edges.push((parent.to_string(), child.to_string()));
    }

    pub fn block(mut self, block: BlockAnnotation) -> Self {
        self.blocks.push(block);
        self
    }

    pub fn push_block(&mut self, block: BlockAnnotation) {
        self.blocks.push(block);
    }

    pub fn build(self) -> Result<ModelProfile> {
        ModelProfile::new(self.name, self.input_bytes, self.layers, self.edges, self.blocks)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Device compute faster than server compute for some layer.
    DeviceFaster,
    BlockEmpty,
    BlockOverlap,
    BlockDisconnected,
    BlockEntry,
    BlockOutput,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub subject: String,
    pub rule: Rule,
    pub message: String,
}

/// Checks that cannot be enforced at construction time. An empty result
/// means every invariant holds, including the server-at-least-as-fast
/// requirement on every layer.
pub fn validate_profile(p: &ModelProfile) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for layer in p.layers() {
        if layer.xi_device_us < layer.xi_server_us {
            out.push(Diagnostic {
                subject: layer.id.clone(),
                rule: Rule::DeviceFaster,
                message: format!(
                    "device compute {} us is below server compute {} us",
                    layer.xi_device_us, layer.xi_server_us
                ),
            });
        }
    }

    let mut owner: HashMap<usize, &str> = HashMap::new();
    for block in p.blocks() {
        let id = block.annotation.block_id.as_str();
        for &m in &block.members {
            if let Some(prev) = owner.insert(m, id) {
                if prev != id {
                    out.push(Diagnostic {
                        subject: id.to_string(),
                        rule: Rule::BlockOverlap,
                        message: format!("layer `{}` also belongs to block `{prev}`", p.node_id(m)),
                    });
                }
            }
        }
        if let Err(reason) = block_shape(p, block) {
            let rule = reason.0;
            out.push(Diagnostic {
                subject: id.to_string(),
                rule,
                message: reason.1,
            });
        }
    }
    out
}

/// Shape requirements for a block: nonempty, weakly connected, entered only
/// from its declared input layer, and left only through a single output
/// member. Returns the output member.
pub(crate) fn block_shape(
    p: &ModelProfile,
    block: &Block,
) -> std::result::Result<usize, (Rule, String)> {
    if block.members.is_empty() {
        return Err((Rule::BlockEmpty, "block has no members".into()));
    }
    let mut members = block.members.clone();
    members.sort_unstable();
    members.dedup();
    if members.len() != block.members.len() {
        return Err((Rule::BlockOverlap, "block lists a member twice".into()));
    }
    if members.binary_search(&block.input).is_ok() {
        return Err((
            Rule::BlockEntry,
            format!("input layer `{}` must lie outside the block", p.node_id(block.input)),
        ));
    }

    // weak connectivity over member-to-member edges
    let mut seen = vec![false; members.len()];
    let mut reached = 1;
    let first = members.binary_search(&block.members[0]).expect("member");
    seen[first] = true;
    let mut stack = vec![block.members[0]];
    while let Some(v) = stack.pop() {
        for &w in p.children(v).iter().chain(p.parents(v)) {
            if let Ok(i) = members.binary_search(&w) {
                if !seen[i] {
                    seen[i] = true;
                    reached += 1;
                    stack.push(w);
                }
            }
        }
    }
    if reached != members.len() {
        return Err((Rule::BlockDisconnected, "members are not weakly connected".into()));
    }

    for &m in &block.members {
        for &u in p.parents(m) {
            if members.binary_search(&u).is_err() && u != block.input {
                return Err((
                    Rule::BlockEntry,
                    format!(
                        "member `{}` is fed by `{}`, not by input layer `{}`",
                        p.node_id(m),
                        p.node_id(u),
                        p.node_id(block.input)
                    ),
                ));
            }
        }
    }
    if !block.members.iter().any(|&m| p.parents(m).contains(&block.input)) {
        return Err((
            Rule::BlockEntry,
            format!("input layer `{}` feeds no member", p.node_id(block.input)),
        ));
    }

    let sinks: Vec<usize> = block
        .members
        .iter()
        .copied()
        .filter(|&m| !p.children(m).iter().any(|c| members.binary_search(c).is_ok()))
        .collect();
    if sinks.len() != 1 {
        return Err((
            Rule::BlockOutput,
            format!("block has {} output members, expected exactly one", sinks.len()),
        ));
    }
    let output = sinks[0];
    for &m in &block.members {
        if m != output && p.children(m).iter().any(|c| !members.binary_search(c).is_ok()) {
            return Err((
                Rule::BlockOutput,
                format!("member `{}` feeds a layer outside the block", p.node_id(m)),
            ));
        }
    }
    Ok(output)
}
