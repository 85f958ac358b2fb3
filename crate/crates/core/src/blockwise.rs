//! Block-wise splitting: decide per block whether the optimal cut can cross
//! its interior, collapse the blocks where it cannot, and cut the smaller
//! graph.
//!
//! A block is fed by one external layer `v_in` and ends in one output
//! member. Its block graph holds `v_in` and the members, each arc weighted
//! by the parent's output bytes. Multi-child parents get a placement
//! vertex and a broadcast vertex joined by one arc of the parent's size, so
//! an activation shipped to several children is counted once. Children
//! also get an uncuttable arc back to their parents, which restricts the
//! block cut to realizable device/server assignments.


use crate::dag::{build_split_dag, ArcKind, SplitDag, VertexKind, SINK, SOURCE};
use crate::delay::NetParams;
use crate::error::{Error, Result};
use crate::maxflow::{FlowNetwork, INF};
use crate::profile::{block_shape, ModelProfile};
use crate::splitter::{optimal_split, solve_min_cut, Method, SplitDecision};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockView {
    pub block: usize,
    pub block_id: String,
    /// Node of the external layer feeding the block.
    pub input: usize,
    pub members: Vec<usize>,
    pub output: usize,
    /// (parent, child) data edges of the block graph, as profile nodes.
    pub edges: Vec<(usize, usize)>,
    pub a_in_bytes: u64,
    pub a_min_bytes: u64,
    /// Members on the `v_in` side of the source-minimal block cut.
    pub min_cut_members: Vec<usize>,
}

impl BlockView {
    /// Resolves block `index` of `p`, checks its shape and computes its
    /// minimum cut.
    pub fn new(p: &ModelProfile, index: usize) -> Result<Self> {
        let block = &p.blocks()[index];
        let output = block_shape(p, block).map_err(|(_, reason)| Error::BlockShape {
            block: block.annotation.block_id.clone(),
            reason,
        })?;
        let edges = std::iter::once(block.input)
            .chain(block.members.iter().copied())
            .flat_map(|u| p.children(u).iter().map(move |&c| (u, c)))
            .filter(|(_, c)| block.members.contains(c))
            .collect();
        let mut view = BlockView {
            block: index,
            block_id: block.annotation.block_id.clone(),
            input: block.input,
            members: block.members.clone(),
            output,
            edges,
            a_in_bytes: p.output_bytes(block.input),
            a_min_bytes: 0,
            min_cut_members: Vec::new(),
        };
        let (value, side) = view.cut(p)?;
        view.a_min_bytes = value;
        view.min_cut_members = side;
        Ok(view)
    }

    fn cut(&self, p: &ModelProfile) -> Result<(u64, Vec<usize>)> {
        // A skip arc from v_in to the output puts v_in on the boundary of
        // every realizable cut, so the cut right after v_in is minimal.
        if self.edges.contains(&(self.input, self.output)) {
            return Ok((p.output_bytes(self.input), Vec::new()));
        }
        // local ids: 0 = v_in, 1..=m members; broadcast vertices appended
        let nodes: Vec<usize> = std::iter::once(self.input).chain(self.members.iter().copied()).collect();
        let local = |node: usize| nodes.iter().position(|&x| x == node).expect("block node");
        let mut out_degree = vec![0usize; nodes.len()];
        for &(u, _) in &self.edges {
            out_degree[local(u)] += 1;
        }
        let mut emit_from: Vec<usize> = (0..nodes.len()).collect();
        let mut extra = 0;
        for (i, &d) in out_degree.iter().enumerate() {
            if d >= 2 {
                emit_from[i] = nodes.len() + extra;
                extra += 1;
            }
        }
        let sink = local(self.output);
        let mut net = FlowNetwork::new(nodes.len() + extra, 0, sink);
        for (i, &d) in out_degree.iter().enumerate() {
            if d >= 2 {
                net.add_arc(i, emit_from[i], p.output_bytes(nodes[i]));
            }
        }
        for &(u, v) in &self.edges {
            let (lu, lv) = (local(u), local(v));
            net.add_arc(emit_from[lu], lv, p.output_bytes(u));
            net.add_arc(lv, lu, INF);
        }
        let cut = net.min_cut()?;
        let side = self
            .members
            .iter()
            .copied()
            .filter(|&m| cut.source_side[local(m)])
            .collect();
        Ok((cut.value, side))
    }
}

/// Minimum `v_in`-to-output cut of the block graph, in bytes.
pub fn block_min_cut(b: &BlockView) -> u64 {
    b.a_min_bytes
}

/// True when the optimal split cannot cut inside the block, so it may be
/// abstracted. Equality passes.
pub fn intra_block_test(b: &BlockView) -> bool {
    b.a_min_bytes >= b.a_in_bytes
}

/// Block analysis of a profile. It depends only on the profile, so one
/// plan serves every network condition.
#[derive(Debug, Clone)]
pub struct BlockPlan {
    pub views: Vec<BlockView>,
}

impl BlockPlan {
    pub fn new(p: &ModelProfile) -> Result<Self> {
        let views = (0..p.blocks().len())
            .map(|i| BlockView::new(p, i))
            .collect::<Result<_>>()?;
        Ok(Self { views })
    }

    pub fn passing(&self) -> impl Iterator<Item = &BlockView> {
        self.views.iter().filter(|v| intra_block_test(v))
    }
}

/// Replaces each listed block of the unrestructured graph `g` by one
/// vertex. Execution capacities of the members are summed. Arcs from one
/// parent layer into the block collapse to a single arc of that parent's
/// weight; arcs from different member layers into the same outside child
/// are summed.
pub fn abstract_blocks(g: &SplitDag, p: &ModelProfile, blocks: &[&BlockView]) -> Result<SplitDag> {
    let mut owner: Vec<Option<usize>> = vec![None; p.node_count()];
    for (bi, b) in blocks.iter().enumerate() {
        if !intra_block_test(b) {
            return Err(Error::BlockNotAbstractable(b.block_id.clone()));
        }
        for &m in &b.members {
            owner[m] = Some(bi);
        }
    }

    let mut out = SplitDag::empty(p.node_count());
    let mut new_of = vec![usize::MAX; g.vertex_count()];
    new_of[SOURCE] = SOURCE;
    new_of[SINK] = SINK;
    let mut block_vertex = vec![usize::MAX; blocks.len()];
    for (v, vert) in g.vertices().iter().enumerate().skip(2) {
        assert!(!g.is_broadcast(v), "abstraction expects an unrestructured graph");
        let node = vert.members[0];
        let nv = match owner[node] {
            Some(bi) => {
                if block_vertex[bi] == usize::MAX {
                    let b = blocks[bi];
                    block_vertex[bi] = out.push_vertex(VertexKind::Block { block: b.block }, &b.block_id, b.members.clone());
                }
                block_vertex[bi]
            }
            None => out.push_vertex(vert.kind, &vert.label, vert.members.clone()),
        };
        new_of[v] = nv;
        out.set_node_vertex(node, nv);
    }

    // Out-lists are short, so linear scans beat hashing here.
    // per new vertex: (to, kind, index into `merged`)
    let mut merged: Vec<(usize, usize, u64, ArcKind)> = Vec::with_capacity(g.arc_count());
    let mut out_of: Vec<Vec<(usize, ArcKind, usize)>> = vec![Vec::new(); out.vertex_count()];
    // per old vertex: (new target, propagation weight) already taken
    let mut seen_prop: Vec<Vec<(usize, u64)>> = vec![Vec::new(); g.vertex_count()];
    for a in g.arcs() {
        let (f, t) = (new_of[a.from], new_of[a.to]);
        if f == t {
            continue;
        }
        if a.kind == ArcKind::Propagation {
            let seen = &mut seen_prop[a.from];
            match seen.iter().find(|&&(to, _)| to == t) {
                Some(&(_, w)) if w != a.capacity => {
                    return Err(Error::HeterogeneousPropagation(g.vertices()[a.from].label.clone()));
                }
                Some(_) => continue,
                None => seen.push((t, a.capacity)),
            }
        }
        match out_of[f].iter().find(|&&(to, kind, _)| to == t && kind == a.kind) {
            Some(&(_, _, i)) => {
                let c = &mut merged[i].2;
                *c = c.checked_add(a.capacity).ok_or(Error::Overflow("abstracted capacity"))?.min(INF);
            }
            None => {
                out_of[f].push((t, a.kind, merged.len()));
                merged.push((f, t, a.capacity, a.kind));
            }
        }
    }
    for (f, t, c, kind) in merged {
        out.push_arc(f, t, c, kind);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockwiseOptions {
    /// All-or-nothing control flow: abstract every block if all pass,
    /// otherwise none.
    pub strict_alg3: bool,
}

#[derive(Debug, Clone)]
pub struct BlockwiseOutcome {
    pub decision: SplitDecision,
    /// Indices of the blocks that were abstracted.
    pub abstracted: Vec<usize>,
    /// The graph handed to the min cut, before restructuring.
    pub graph: SplitDag,
}

pub fn blockwise_split(p: &ModelProfile, n: &NetParams) -> Result<SplitDecision> {
    let plan = BlockPlan::new(p)?;
    Ok(blockwise_split_planned(p, n, &plan, BlockwiseOptions::default())?.decision)
}

pub fn blockwise_split_with(p: &ModelProfile, n: &NetParams, opts: BlockwiseOptions) -> Result<BlockwiseOutcome> {
    let plan = BlockPlan::new(p)?;
    blockwise_split_planned(p, n, &plan, opts)
}

/// Block-wise split with a precomputed plan.
pub fn blockwise_split_planned(
    p: &ModelProfile,
    n: &NetParams,
    plan: &BlockPlan,
    opts: BlockwiseOptions,
) -> Result<BlockwiseOutcome> {
    let g = build_split_dag(p, n)?;
    let mut chosen: Vec<&BlockView> = plan.passing().collect();
    if opts.strict_alg3 && chosen.len() != plan.views.len() {
        chosen.clear();
    }
    if chosen.is_empty() {
        let mut decision = optimal_split(p, n)?;
        decision.method = Method::Blockwise;
        return Ok(BlockwiseOutcome {
            decision,
            abstracted: Vec::new(),
            graph: g,
        });
    }
    let ga = abstract_blocks(&g, p, &chosen)?;
    let decision = solve_min_cut(&ga, p, n, Method::Blockwise)?;
    Ok(BlockwiseOutcome {
        decision,
        abstracted: chosen.iter().map(|b| b.block).collect(),
        graph: ga,
    })
}
