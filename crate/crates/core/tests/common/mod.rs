// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Instance generators shared by the integration suites.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use hemln::engine::prepare_layers;
use hemln::spec::Composition;
use hemln::{
    load_membership, InterLayerEdges, KSpec, LayerGraph, LayerId, LayerTable, Membership, Mln,
    NodeId,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn lid(s: &str) -> LayerId {
    LayerId::new(s).unwrap()
}

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Disjoint cliques with ids from `base`, and the membership naming them
/// `1..` in the given order.
pub fn clique_layer(name: &str, base: u32, sizes: &[usize]) -> (LayerGraph, Membership, Vec<Vec<NodeId>>) {
    let mut next = base;
    let mut groups = Vec::new();
    let mut edges = Vec::new();
    for &s in sizes {
        let members: Vec<NodeId> = (0..s as u32).map(|i| NodeId(next + i)).collect();
        next += s as u32;
        for (i, &u) in members.iter().enumerate() {
            for &v in &members[i + 1..] {
                edges.push((u, v));
            }
        }
        groups.push(members);
    }
    let g = LayerGraph::new(lid(name), groups.iter().flatten().copied(), edges).unwrap();
    let rows: Vec<(NodeId, u64)> = groups
        .iter()
        .enumerate()
        .flat_map(|(c, ms)| ms.iter().map(move |&n| (n, c as u64 + 1)))
        .collect();
    let m = load_membership(&g, &rows).unwrap();
    (g, m, groups)
}

/// Planted-partition layer: `n` nodes in blocks of `block`, `intra` random
/// edges per block and `noise` random edges anywhere.
pub fn planted_layer(
    rng: &mut ChaCha8Rng,
    name: &str,
    base: u32,
    n: usize,
    block: usize,
    intra: usize,
    noise: usize,
) -> (LayerGraph, Vec<Vec<NodeId>>) {
    let nodes: Vec<NodeId> = (0..n as u32).map(|i| NodeId(base + i)).collect();
    let blocks: Vec<Vec<NodeId>> = nodes.chunks(block).map(<[NodeId]>::to_vec).collect();
    let mut edges = BTreeSet::new();
    for b in &blocks {
        if b.len() < 2 {
            continue;
        }
        for _ in 0..intra {
            let u = *b.choose(rng).unwrap();
            let v = *b.choose(rng).unwrap();
            if u != v {
                edges.insert((u.min(v), u.max(v)));
            }
        }
    }
    for _ in 0..noise {
        let u = *nodes.choose(rng).unwrap();
        let v = *nodes.choose(rng).unwrap();
        if u != v {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    (LayerGraph::new(lid(name), nodes, edges).unwrap(), blocks)
}

/// Links block `i` of `a` to block `perm[i]` of `b` with `aligned` links
/// each, plus `noise` random links.
pub fn aligned_links(
    rng: &mut ChaCha8Rng,
    a: (&str, &[Vec<NodeId>]),
    b: (&str, &[Vec<NodeId>]),
    aligned: usize,
    noise: usize,
) -> InterLayerEdges {
    let mut perm: Vec<usize> = (0..b.1.len()).collect();
    perm.shuffle(rng);
    let mut links = BTreeSet::new();
    for (i, block) in a.1.iter().enumerate() {
        let Some(target) = perm.get(i).map(|&j| &b.1[j]) else {
            continue;
        };
        for _ in 0..aligned {
            links.insert((*block.choose(rng).unwrap(), *target.choose(rng).unwrap()));
        }
    }
    let all_a: Vec<NodeId> = a.1.iter().flatten().copied().collect();
    let all_b: Vec<NodeId> = b.1.iter().flatten().copied().collect();
    for _ in 0..noise {
        links.insert((*all_a.choose(rng).unwrap(), *all_b.choose(rng).unwrap()));
    }
    InterLayerEdges::new(lid(a.0), lid(b.0), links).unwrap()
}

/// A small random MLN with 3 to 5 layers; every pair of layers is linked.
pub fn random_mln(rng: &mut ChaCha8Rng) -> Mln {
    let layers = rng.random_range(3..=5);
    let mut mln = Mln::new();
    let mut blocks = Vec::new();
    let mut base = 0u32;
    for l in 0..layers {
        let n = rng.random_range(24..=60);
        let block = rng.random_range(3..=8);
        let name = format!("L{l}");
        let (g, b) = planted_layer(rng, &name, base, n, block, 2 * block, n / 10);
        base += 1000;
        mln.add_layer(g).unwrap();
        blocks.push((name, b));
    }
    for i in 0..layers {
        for j in i + 1..layers {
            let aligned = rng.random_range(0..=4);
            let noise = rng.random_range(0..=20);
            let x = aligned_links(rng, (&blocks[i].0, &blocks[i].1), (&blocks[j].0, &blocks[j].1), aligned, noise);
            mln.add_interlayer(x).unwrap();
        }
    }
    mln
}

/// Random serial spec over a fully linked MLN.
pub fn random_spec(rng: &mut ChaCha8Rng, mln: &Mln) -> KSpec {
    let ids: Vec<LayerId> = mln.layer_ids().cloned().collect();
    let first = ids.choose(rng).unwrap().clone();
    let mut visited = vec![first.clone()];
    let steps = rng.random_range(1..=6);
    let mut out = Vec::new();
    for _ in 0..steps {
        let left = visited.choose(rng).unwrap().clone();
        let right = loop {
            let r = ids.choose(rng).unwrap();
            if *r != left {
                break r.clone();
            }
        };
        if !visited.contains(&right) {
            visited.push(right.clone());
        }
        out.push(Composition {
            left,
            right,
            metric: None,
        });
    }
    KSpec { first, steps: out }
}

/// `a #(a,b) b #(b,c) c #(c,a) a` over three distinct random layers.
pub fn cyclic_triple(rng: &mut ChaCha8Rng, mln: &Mln) -> KSpec {
    let mut ids: Vec<LayerId> = mln.layer_ids().cloned().collect();
    ids.shuffle(rng);
    let (a, b, c) = (ids[0].clone(), ids[1].clone(), ids[2].clone());
    let step = |l: &LayerId, r: &LayerId| Composition {
        left: l.clone(),
        right: r.clone(),
        metric: None,
    };
    KSpec {
        first: a.clone(),
        steps: vec![step(&a, &b), step(&b, &c), step(&c, &a)],
    }
}

/// Detected memberships and summaries for every layer.
pub fn detected_table(mln: &Mln, seed: u64) -> LayerTable {
    let ids: Vec<LayerId> = mln.layer_ids().cloned().collect();
    prepare_layers(mln, &ids, BTreeMap::new(), seed, 0.8, hemln::Execution::Sequential).unwrap()
}
