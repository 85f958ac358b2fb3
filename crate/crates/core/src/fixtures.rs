//! Built-in model-shaped fixtures and seeded random generators.
//!
//! Compute times come from a rough MAC count: the server runs at
//! 1e7 MAC/us and the device at 5e5 MAC/us, so every layer satisfies
//! `xi_device >= xi_server`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::delay::NetParams;
use crate::error::{Error, Result};
use crate::profile::{BlockAnnotation, LayerProfile, ModelProfile, ProfileBuilder, INPUT_ID};

pub const FIXTURE_NAMES: &[&str] = &[
    "chain3",
    "diamond",
    "fan",
    "fan-block",
    "residual",
    "inception",
    "dense",
    "googlenet",
    "resnet18",
    "resnet50",
    "densenet121",
];

pub fn fixture(name: &str) -> Result<ModelProfile> {
    match name {
        "chain3" => Ok(chain3()),
        "diamond" => Ok(diamond()),
        "fan" => Ok(fan()),
        "fan-block" => Ok(fan_block()),
        "residual" => Ok(residual_net(4)),
        "inception" => Ok(inception_net(3)),
        "dense" => Ok(dense_net(6)),
        "googlenet" => Ok(googlenet()),
        "resnet18" => Ok(resnet18()),
        "resnet50" => Ok(resnet50()),
        "densenet121" => Ok(densenet121()),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}

const MB: u64 = 1_000_000;
const S: u64 = 1_000_000;

/// input (4 MB) -> v1 -> v2. At 1 MB/s up and down with one iteration the
/// optimum keeps v1 on the device for 4 s.
pub fn chain3() -> ModelProfile {
    ProfileBuilder::new("chain3", 4 * MB)
        .layer(LayerProfile::new("v1", S, S, 0, MB))
        .layer(LayerProfile::new("v2", 5 * S, S, 0, 10))
        .edge(INPUT_ID, "v1")
        .edge("v1", "v2")
        .build()
        .expect("static fixture")
}

pub fn diamond() -> ModelProfile {
    let l = |id: &str, a: u64| LayerProfile::new(id, 3 * S, S, 10_000, a);
    ProfileBuilder::new("diamond", 2 * MB)
        .layer(l("v1", MB / 2))
        .layer(l("v2", MB))
        .layer(l("v3", MB))
        .layer(l("v4", 1000))
        .edge(INPUT_ID, "v1")
        .edge("v1", "v2")
        .edge("v1", "v3")
        .edge("v2", "v4")
        .edge("v3", "v4")
        .build()
        .expect("static fixture")
}

/// v1 broadcasting to v2, v3, v4, which merge in v5.
pub fn fan() -> ModelProfile {
    fan_named("fan")
}

fn fan_named(name: &str) -> ModelProfile {
    let l = |id: &str, a: u64| LayerProfile::new(id, 4 * S, S, 0, a);
    ProfileBuilder::new(name, MB)
        .layer(l("v1", 2 * MB))
        .layer(l("v2", MB))
        .layer(l("v3", MB))
        .layer(l("v4", MB))
        .layer(l("v5", 1))
        .edge(INPUT_ID, "v1")
        .edge("v1", "v2")
        .edge("v1", "v3")
        .edge("v1", "v4")
        .edge("v2", "v5")
        .edge("v3", "v5")
        .edge("v4", "v5")
        .build()
        .expect("static fixture")
}

/// The fan shape with {v2..v5} declared as one block fed by v1.
pub fn fan_block() -> ModelProfile {
    let p = fan_named("fan-block");
    let members = ["v2", "v3", "v4", "v5"].map(String::from).to_vec();
    p.with_blocks(vec![BlockAnnotation {
            block_id: "b1".into(),
            template_id: "fan".into(),
            input_layer_id: "v1".into(),
            members,
        }])
        .expect("static fixture")
}

/// Assembles layer-by-layer networks with a running "previous layer".
struct Net {
    b: ProfileBuilder,
    prev: String,
    block_seq: usize,
}

impl Net {
    fn new(name: &str, input_bytes: u64) -> Self {
        Self {
            b: ProfileBuilder::new(name, input_bytes),
            prev: INPUT_ID.to_string(),
            block_seq: 0,
        }
    }

    fn add(&mut self, layer: LayerProfile, parents: &[&str]) -> String {
        let id = layer.id.clone();
        self.b.push_layer(layer);
        for parent in parents {
            self.b.push_edge(parent, &id);
        }
        id
    }

    /// Appends a layer fed by the previous one.
    fn then(&mut self, layer: LayerProfile) -> String {
        let prev = self.prev.clone();
        let id = self.add(layer, &[&prev]);
        self.prev = id.clone();
        id
    }

    fn block(&mut self, template: &str, input: &str, members: Vec<String>) {
        self.block_seq += 1;
        self.b.push_block(BlockAnnotation {
            block_id: format!("{template}{}", self.block_seq),
            template_id: template.to_string(),
            input_layer_id: input.to_string(),
            members,
        });
    }

    fn build(self) -> ModelProfile {
        self.b.build().expect("generated fixture is well formed")
    }
}

/// A convolution producing `cout` channels on an `hw x hw` map.
fn conv(id: &str, cin: u64, cout: u64, k: u64, hw: u64) -> LayerProfile {
    let macs = cin * cout * k * k * hw * hw;
    let xi_s = (macs / 10_000_000).max(1);
    let xi_d = (macs / 500_000).max(xi_s);
    LayerProfile::new(id, xi_d, xi_s, 4 * cin * cout * k * k, 4 * cout * hw * hw)
}

/// Pooling or other parameter-free op over `c` channels.
fn pool(id: &str, c: u64, hw: u64) -> LayerProfile {
    let ops = 9 * c * hw * hw;
    let xi_s = (ops / 10_000_000).max(1);
    let xi_d = (ops / 500_000).max(xi_s);
    LayerProfile::new(id, xi_d, xi_s, 0, 4 * c * hw * hw)
}

fn fc(id: &str, cin: u64, cout: u64) -> LayerProfile {
    let macs = cin * cout;
    let xi_s = (macs / 10_000_000).max(1);
    let xi_d = (macs / 500_000).max(xi_s);
    LayerProfile::new(id, xi_d, xi_s, 4 * cin * cout, 4 * cout)
}

const IMAGE: u64 = 4 * 3 * 224 * 224;

/// Stem plus `blocks` two-convolution residual blocks and a classifier.
pub fn residual_net(blocks: usize) -> ModelProfile {
    let mut net = Net::new("residual", IMAGE);
    net.then(conv("stem", 3, 64, 7, 56));
    for i in 1..=blocks {
        let v_in = net.prev.clone();
        let a = net.add(conv(&format!("b{i}_conv_a"), 64, 64, 3, 56), &[&v_in]);
        let b = net.add(conv(&format!("b{i}_conv_b"), 64, 64, 3, 56), &[&a, &v_in]);
        net.prev = b.clone();
        net.block("residual", &v_in, vec![a, b]);
    }
    net.then(fc("fc", 64, 1000));
    net.build()
}

/// Inception block: four branches from `v_in` merged by a concatenation.
/// Returns the member ids, output last.
#[allow(clippy::too_many_arguments)]
fn inception(net: &mut Net, tag: &str, cin: u64, c1: u64, r3: u64, c3: u64, r5: u64, c5: u64, pp: u64, hw: u64) -> Vec<String> {
    let v_in = net.prev.clone();
    let b1 = net.add(conv(&format!("{tag}_1x1"), cin, c1, 1, hw), &[&v_in]);
    let b2a = net.add(conv(&format!("{tag}_3x3_reduce"), cin, r3, 1, hw), &[&v_in]);
    let b2b = net.add(conv(&format!("{tag}_3x3"), r3, c3, 3, hw), &[&b2a]);
    let b3a = net.add(conv(&format!("{tag}_5x5_reduce"), cin, r5, 1, hw), &[&v_in]);
    let b3b = net.add(conv(&format!("{tag}_5x5"), r5, c5, 5, hw), &[&b3a]);
    let b4a = net.add(pool(&format!("{tag}_pool"), cin, hw), &[&v_in]);
    let b4b = net.add(conv(&format!("{tag}_pool_proj"), cin, pp, 1, hw), &[&b4a]);
    let cout = c1 + c3 + c5 + pp;
    let cat = net.add(pool(&format!("{tag}_concat"), cout, hw), &[&b1, &b2b, &b3b, &b4b]);
    net.prev = cat.clone();
    let members = vec![b1, b2a, b2b, b3a, b3b, b4a, b4b, cat];
    net.block("inception", &v_in, members.clone());
    members
}

pub fn inception_net(blocks: usize) -> ModelProfile {
    let mut net = Net::new("inception", IMAGE);
    net.then(conv("stem", 3, 192, 7, 28));
    for i in 1..=blocks {
        inception(&mut net, &format!("inc{i}"), 192, 64, 96, 64, 16, 32, 32, 28);
    }
    net.then(fc("fc", 192, 1000));
    net.build()
}

// (tag, cin, 1x1, 3x3 reduce, 3x3, 5x5 reduce, 5x5, pool proj, hw)
type InceptionCfg = (&'static str, u64, u64, u64, u64, u64, u64, u64, u64);

/// Stem, nine inception blocks and a classifier (74 layers).
pub fn googlenet() -> ModelProfile {
    const CFG: [InceptionCfg; 9] = [
        ("3a", 192, 64, 96, 128, 16, 32, 32, 28),
        ("3b", 256, 128, 128, 192, 32, 96, 64, 28),
        ("4a", 480, 192, 96, 208, 16, 48, 64, 14),
        ("4b", 512, 160, 112, 224, 24, 64, 64, 14),
        ("4c", 512, 128, 128, 256, 24, 64, 64, 14),
        ("4d", 512, 112, 144, 288, 32, 64, 64, 14),
        ("4e", 528, 256, 160, 320, 32, 128, 128, 14),
        ("5a", 832, 256, 160, 320, 32, 128, 128, 7),
        ("5b", 832, 384, 192, 384, 48, 128, 128, 7),
    ];
    let mut net = Net::new("googlenet", IMAGE);
    net.then(conv("stem", 3, 192, 7, 28));
    for (tag, cin, c1, r3, c3, r5, c5, pp, hw) in CFG {
        inception(&mut net, &format!("inception_{tag}"), cin, c1, r3, c3, r5, c5, pp, hw);
    }
    net.then(fc("fc", 1024, 1000));
    net.build()
}

fn resnet_stage_plan(counts: [usize; 4]) -> Vec<(u64, u64)> {
    let mut plan = Vec::new();
    for (stage, &count) in counts.iter().enumerate() {
        let width = 64u64 << stage;
        let hw = 56 >> stage;
        plan.extend(std::iter::repeat_n((width, hw as u64), count));
    }
    plan
}

/// Stem, eight basic residual blocks and a classifier (18 layers).
pub fn resnet18() -> ModelProfile {
    let mut net = Net::new("resnet18", IMAGE);
    net.then(conv("stem", 3, 64, 7, 56));
    let mut cin = 64;
    for (i, (w, hw)) in resnet_stage_plan([2, 2, 2, 2]).into_iter().enumerate() {
        let v_in = net.prev.clone();
        let a = net.add(conv(&format!("block{}_conv_a", i + 1), cin, w, 3, hw), &[&v_in]);
        let b = net.add(conv(&format!("block{}_conv_b", i + 1), w, w, 3, hw), &[&a, &v_in]);
        net.prev = b.clone();
        net.block("basic", &v_in, vec![a, b]);
        cin = w;
    }
    net.then(fc("fc", 512, 1000));
    net.build()
}

/// Stem, sixteen bottleneck blocks and a classifier (50 layers).
pub fn resnet50() -> ModelProfile {
    let mut net = Net::new("resnet50", IMAGE);
    net.then(conv("stem", 3, 64, 7, 56));
    let mut cin = 64;
    for (i, (w, hw)) in resnet_stage_plan([3, 4, 6, 3]).into_iter().enumerate() {
        let v_in = net.prev.clone();
        let tag = format!("block{}", i + 1);
        let a = net.add(conv(&format!("{tag}_reduce"), cin, w, 1, hw), &[&v_in]);
        let b = net.add(conv(&format!("{tag}_3x3"), w, w, 3, hw), &[&a]);
        let c = net.add(conv(&format!("{tag}_expand"), w, 4 * w, 1, hw), &[&b, &v_in]);
        net.prev = c.clone();
        net.block("bottleneck", &v_in, vec![a, b, c]);
        cin = 4 * w;
    }
    net.then(fc("fc", 2048, 1000));
    net.build()
}

/// One dense layer: a 1x1 bottleneck then a 3x3 conv whose output is
/// concatenated with the block input, so the 3x3 also reads `v_in`.
fn dense_layer(net: &mut Net, tag: &str, cin: u64, growth: u64, hw: u64) -> u64 {
    let v_in = net.prev.clone();
    let a = net.add(conv(&format!("{tag}_1x1"), cin, 4 * growth, 1, hw), &[&v_in]);
    let mut b = conv(&format!("{tag}_3x3"), 4 * growth, growth, 3, hw);
    b.output_bytes = 4 * (cin + growth) * hw * hw;
    let b = net.add(b, &[&a, &v_in]);
    net.prev = b.clone();
    net.block("dense", &v_in, vec![a, b]);
    cin + growth
}

pub fn dense_net(layers: usize) -> ModelProfile {
    let mut net = Net::new("dense", IMAGE);
    net.then(conv("conv0", 3, 64, 7, 56));
    let mut c = 64;
    for i in 1..=layers {
        c = dense_layer(&mut net, &format!("dense{i}"), c, 32, 56);
    }
    net.then(fc("fc", c, 1000));
    net.build()
}

/// conv0, 58 dense layers in four stages, three transitions and a
/// classifier (121 layers, 58 blocks).
pub fn densenet121() -> ModelProfile {
    let mut net = Net::new("densenet121", IMAGE);
    net.then(conv("conv0", 3, 64, 7, 56));
    let mut c = 64;
    let mut hw = 56;
    for (stage, count) in [6usize, 12, 24, 16].into_iter().enumerate() {
        for i in 1..=count {
            c = dense_layer(&mut net, &format!("denseblock{}_layer{i}", stage + 1), c, 32, hw);
        }
        if stage < 3 {
            hw /= 2;
            net.then(conv(&format!("transition{}", stage + 1), c, c / 2, 1, hw));
            c /= 2;
        }
    }
    net.then(fc("fc", c, 1000));
    net.build()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_layer(rng: &mut impl Rng, id: String) -> LayerProfile {
    let xi_s = rng.random_range(1..=2_000);
    let xi_d = xi_s + rng.random_range(0..=6_000);
    let k = if rng.random_bool(0.3) { 0 } else { rng.random_range(0..=200_000) };
    let a = rng.random_range(1..=500_000);
    LayerProfile::new(id, xi_d, xi_s, k, a)
}

/// A random nonlinear DAG with `layers` layers (at least 3) satisfying
/// `xi_device >= xi_server`. Every layer has a parent among the earlier
/// nodes, and at least one node has two children.
pub fn random_profile(rng: &mut impl Rng, layers: usize) -> ModelProfile {
    assert!(layers >= 3, "a nonlinear profile needs at least 3 layers");
    loop {
        let mut b = ProfileBuilder::new("random", rng.random_range(1..=1_000_000));
        let mut ids = vec![INPUT_ID.to_string()];
        for i in 1..=layers {
            let id = format!("l{i:02}");
            b.push_layer(random_layer(rng, id.clone()));
            let first = rng.random_range(0..ids.len());
            b.push_edge(&ids[first], &id);
            for (j, other) in ids.iter().enumerate() {
                if j != first && rng.random_bool(0.25) {
                    b.push_edge(other, &id);
                }
            }
            ids.push(id);
        }
        let p = b.build().expect("generated profile is acyclic");
        if !p.is_chain() {
            return p;
        }
    }
}

/// A rate that divides 1e6 bytes/s, so every transfer time is exact.
pub fn exact_rate(rng: &mut impl Rng) -> u64 {
    const DIVISORS: &[u64] = &[
        1_000, 2_000, 4_000, 5_000, 8_000, 10_000, 20_000, 25_000, 40_000, 50_000, 100_000,
        125_000, 200_000, 250_000, 500_000, 1_000_000,
    ];
    DIVISORS[rng.random_range(0..DIVISORS.len())]
}

pub fn random_net_params(rng: &mut impl Rng) -> NetParams {
    NetParams::new(
        rng.random_range(1_000..=5_000_000),
        rng.random_range(1_000..=5_000_000),
        rng.random_range(1..=20),
    )
    .expect("positive parameters")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockShape {
    Chain,
    Residual,
    Inception,
    Dense,
}

/// Appends one randomly sized block of the given shape after `net.prev`.
fn random_block(net: &mut Net, rng: &mut impl Rng, shape: BlockShape, tag: &str) -> usize {
    let v_in = net.prev.clone();
    let members: Vec<String> = match shape {
        BlockShape::Chain => {
            let len = rng.random_range(1..=3);
            let mut prev = v_in.clone();
            let mut out = Vec::new();
            for i in 0..len {
                let id = net.add(random_layer(rng, format!("{tag}_c{i}")), &[&prev]);
                prev = id.clone();
                out.push(id);
            }
            out
        }
        BlockShape::Residual => {
            let a = net.add(random_layer(rng, format!("{tag}_a")), &[&v_in]);
            let b = net.add(random_layer(rng, format!("{tag}_b")), &[&a, &v_in]);
            vec![a, b]
        }
        BlockShape::Dense => {
            let a = net.add(random_layer(rng, format!("{tag}_a")), &[&v_in]);
            let b = net.add(random_layer(rng, format!("{tag}_b")), &[&a]);
            let c = net.add(random_layer(rng, format!("{tag}_c")), &[&a, &b, &v_in]);
            vec![a, b, c]
        }
        BlockShape::Inception => {
            let branches = rng.random_range(2..=3);
            let mut out = Vec::new();
            let mut tails = Vec::new();
            for i in 0..branches {
                let mut prev = v_in.clone();
                for d in 0..rng.random_range(1..=2) {
                    let id = net.add(random_layer(rng, format!("{tag}_br{i}_{d}")), &[&prev]);
                    prev = id.clone();
                    out.push(id);
                }
                tails.push(prev);
            }
            let parents: Vec<&str> = tails.iter().map(String::as_str).collect();
            let cat = net.add(random_layer(rng, format!("{tag}_cat")), &parents);
            out.push(cat);
            out
        }
    };
    let n = members.len();
    net.prev = members.last().expect("nonempty block").clone();
    let template = match shape {
        BlockShape::Chain => "chain",
        BlockShape::Residual => "residual",
        BlockShape::Inception => "inception",
        BlockShape::Dense => "dense",
    };
    net.block(template, &v_in, members);
    n
}

/// A random block-structured profile of at most `max_layers` layers: a
/// stem followed by blocks of random shape, with occasional plain layers
/// between them. Sizes are random, so some blocks fail the intra-block
/// test.
pub fn random_block_profile(rng: &mut impl Rng, max_layers: usize) -> ModelProfile {
    assert!(max_layers >= 4);
    let mut net = Net::new("random-blocks", rng.random_range(1..=1_000_000));
    let stem = random_layer(rng, "stem".into());
    net.then(stem);
    let mut used = 1;
    let mut seq = 0;
    // the largest shape (inception, 3 branches of depth 2) takes 7 layers
    while used < max_layers {
        let room = max_layers - used;
        let shapes: Vec<BlockShape> = [
            (BlockShape::Chain, 3),
            (BlockShape::Residual, 2),
            (BlockShape::Dense, 3),
            (BlockShape::Inception, 7),
        ]
        .into_iter()
        .filter(|&(_, size)| size <= room)
        .map(|(s, _)| s)
        .collect();
        if shapes.is_empty() {
            break;
        }
        seq += 1;
        let shape = shapes[rng.random_range(0..shapes.len())];
        used += random_block(&mut net, rng, shape, &format!("k{seq}"));
        if used < max_layers && rng.random_bool(0.3) {
            let plain = random_layer(rng, format!("p{seq}"));
            net.then(plain);
            used += 1;
        }
        if rng.random_bool(0.15) {
            break;
        }
    }
    net.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::validate_profile;

    #[test]
    fn every_fixture_is_valid() {
        for name in FIXTURE_NAMES {
            let p = fixture(name).unwrap();
            assert!(validate_profile(&p).is_empty(), "{name}: {:?}", validate_profile(&p));
        }
        assert!(matches!(fixture("nope"), Err(Error::UnknownFixture(_))));
    }

    #[test]
    fn scale_anchors() {
        let g = googlenet();
        assert_eq!(g.blocks().len(), 9);
        assert!(g.blocks().iter().all(|b| b.members.len() == 8));
        let r18 = resnet18();
        assert_eq!((r18.num_layers(), r18.blocks().len()), (18, 8));
        let r50 = resnet50();
        assert_eq!((r50.num_layers(), r50.blocks().len()), (50, 16));
        let d = densenet121();
        assert_eq!((d.num_layers(), d.blocks().len()), (121, 58));
    }

    #[test]
    fn random_profiles_are_valid() {
        for seed in 0..200 {
            let mut r = rng(seed);
            let p = random_profile(&mut r, 3 + (seed as usize % 10));
            assert!(!p.is_chain());
            assert!(validate_profile(&p).is_empty());
            let q = random_block_profile(&mut r, 12);
            assert!(q.num_layers() <= 12);
            assert!(validate_profile(&q).is_empty(), "seed {seed}: {:?}", validate_profile(&q));
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let a = random_block_profile(&mut rng(7), 12).to_json();
        let b = random_block_profile(&mut rng(7), 12).to_json();
        assert_eq!(a, b);
    }
}
