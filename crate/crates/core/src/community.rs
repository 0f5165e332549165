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

//! Per-layer 1-community detection, precomputed membership loading and
//! per-community statistics.
//!
//! Detection is greedy multi-level modularity optimisation (Louvain). Edge
//! weights stay integral at every aggregation level, so modularity gains are
//! compared as exact integers: ties are real ties and runs are bit-identical
//! for a fixed seed.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LayerGraph, LayerId, NodeId};
use crate::par::{self, Execution};

/// The `m`-th community of a layer. Index 0 is the null community and only
/// ever shows up inside result tuples.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommunityId {
    pub layer: LayerId,
    pub index: u32,
}

impl CommunityId {
    pub fn new(layer: LayerId, index: u32) -> Self {
        CommunityId { layer, index }
    }

    pub fn is_null(&self) -> bool {
        self.index == 0
    }
}

impl fmt::Display for CommunityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 0 {
            f.write_str("0")
        } else {
            write!(f, "c_{}^{}", self.layer, self.index)
        }
    }
}

/// Disjoint, total assignment of a layer's nodes to communities `1..=K`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Membership {
    layer: LayerId,
    /// `(node, community)` sorted by node
    assignment: Vec<(NodeId, u32)>,
    members: Vec<Vec<NodeId>>,
}

impl Membership {
    fn from_groups(layer: LayerId, groups: Vec<Vec<NodeId>>) -> Self {
        let mut assignment = Vec::new();
        let mut members = groups;
        for (i, group) in members.iter_mut().enumerate() {
            group.sort_unstable();
            assignment.extend(group.iter().map(|&n| (n, i as u32 + 1)));
        }
        assignment.sort_unstable();
        Membership {
            layer,
            assignment,
            members,
        }
    }

    pub fn layer(&self) -> &LayerId {
        &self.layer
    }

    pub fn community_count(&self) -> usize {
        self.members.len()
    }

    pub fn community_of(&self, n: NodeId) -> Option<u32> {
        self.assignment
            .binary_search_by_key(&n, |&(m, _)| m)
            .ok()
            .map(|i| self.assignment[i].1)
    }

    /// Sorted members of community `index`, or `None` for an unknown index.
    pub fn members(&self, index: u32) -> Option<&[NodeId]> {
        index
            .checked_sub(1)
            .and_then(|i| self.members.get(i as usize))
            .map(Vec::as_slice)
    }

    pub fn communities(&self) -> impl Iterator<Item = (u32, &[NodeId])> {
        self.members
            .iter()
            .enumerate()
            .map(|(i, m)| (i as u32 + 1, m.as_slice()))
    }

    pub fn id(&self, index: u32) -> CommunityId {
        CommunityId::new(self.layer.clone(), index)
    }

    /// `(node, community index)` in ascending node order.
    pub fn assignment(&self) -> impl Iterator<Item = (NodeId, u32)> + '_ {
        self.assignment.iter().copied()
    }
}

/// Runs Louvain on one layer and renumbers communities `1..=K` by descending
/// size, ties broken by the smallest member id.
pub fn detect_communities(g: &LayerGraph, seed: u64) -> Result<Membership> {
    if g.node_count() == 0 {
        return Err(Error::EmptyGraph(g.id().clone()));
    }
    let labels = louvain(g.adjacency(), seed);
    let mut groups: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
    for (i, &c) in labels.iter().enumerate() {
        groups.entry(c).or_default().push(g.nodes()[i]);
    }
    let mut groups: Vec<Vec<NodeId>> = groups.into_values().collect();
    // members are pushed in ascending node order, so group[0] is the minimum
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    Ok(Membership::from_groups(g.id().clone(), groups))
}

/// Detects communities on several layers, one task per layer.
pub fn detect_all(
    graphs: &[&LayerGraph],
    seed: u64,
    exec: Execution,
) -> Result<Vec<Membership>> {
    par::try_map(exec, graphs, |g| detect_communities(g, seed))
}

const MAX_PASSES: usize = 64;

struct Level {
    adj: Vec<Vec<(usize, u64)>>,
    self_weight: Vec<u64>,
    degree: Vec<u64>,
}

impl Level {
    fn from_adjacency(adj: &[Vec<u32>]) -> Self {
        let adj: Vec<Vec<(usize, u64)>> = adj
            .iter()
            .map(|l| l.iter().map(|&j| (j as usize, 1)).collect())
            .collect();
        let degree = adj.iter().map(|l| l.len() as u64).collect();
        Level {
            self_weight: vec![0; adj.len()],
            adj,
            degree,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Local moving phase. Returns the community label of each node and
    /// whether anything moved.
    fn local_moves(&self, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.len();
        let two_m: u64 = self.degree.iter().sum();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut total: Vec<u64> = self.degree.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut link = vec![0u64; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut moved_any = false;
        for _ in 0..MAX_PASSES {
            let mut moved = false;
            for &i in &order {
                let ci = comm[i];
                let ki = self.degree[i] as i128;
                for &(j, w) in &self.adj[i] {
                    let c = comm[j];
                    if link[c] == 0 {
                        touched.push(c);
                    }
                    link[c] += w;
                }
                total[ci] -= self.degree[i];
                // gain of joining c, scaled by 2m: 2m * k_i,c - tot_c * k_i
                let gain =
                    |c: usize| link[c] as i128 * two_m as i128 - total[c] as i128 * ki;
                let stay = gain(ci);
                let mut best = ci;
                let mut best_gain = stay;
                for &c in &touched {
                    if c == ci {
                        continue;
                    }
                    let g = gain(c);
                    if g > best_gain || (g == best_gain && best != ci && c < best) {
                        best = c;
                        best_gain = g;
                    }
                }
                if best != ci && best_gain > stay {
                    moved = true;
                    comm[i] = best;
                }
                total[comm[i]] += self.degree[i];
                for &c in &touched {
                    link[c] = 0;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
            moved_any = true;
        }
        (comm, moved_any)
    }

    /// Collapses communities into nodes. `comm` must be dense `0..k`.
    fn aggregate(&self, comm: &[usize], k: usize) -> Level {
        let mut maps: Vec<HashMap<usize, u64>> = vec![HashMap::new(); k];
        let mut self_weight = vec![0u64; k];
        let mut degree = vec![0u64; k];
        for i in 0..self.len() {
            let ci = comm[i];
            degree[ci] += self.degree[i];
            self_weight[ci] += self.self_weight[i];
            for &(j, w) in &self.adj[i] {
                let cj = comm[j];
                if ci == cj {
                    // every internal edge is seen from both ends
                    if i < j {
                        self_weight[ci] += w;
                    }
                } else {
                    *maps[ci].entry(cj).or_insert(0) += w;
                }
            }
        }
        let adj = maps
            .into_iter()
            .map(|m| {
                let mut v: Vec<(usize, u64)> = m.into_iter().collect();
                v.sort_unstable();
                v
            })
            .collect();
        Level {
            adj,
            self_weight,
            degree,
        }
    }
}

fn louvain(adjacency: &[Vec<u32>], seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = Level::from_adjacency(adjacency);
    let mut node_comm: Vec<usize> = (0..adjacency.len()).collect();
    loop {
        let (comm, moved) = level.local_moves(&mut rng);
        if !moved {
            break;
        }
        let mut relabel: HashMap<usize, usize> = HashMap::new();
        let dense: Vec<usize> = comm
            .iter()
            .map(|c| {
                let next = relabel.len();
                *relabel.entry(*c).or_insert(next)
            })
            .collect();
        let k = relabel.len();
        for c in node_comm.iter_mut() {
            *c = dense[*c];
        }
        if k == level.len() {
            break;
        }
        level = level.aggregate(&dense, k);
    }
    node_comm
}

/// Newman modularity of a membership on an unweighted layer.
pub fn modularity(g: &LayerGraph, m: &Membership) -> f64 {
    let two_m = 2.0 * g.edge_count() as f64;
    if two_m == 0.0 {
        return 0.0;
    }
    let k = m.community_count();
    let mut internal = vec![0usize; k + 1];
    let mut degree_sum = vec![0usize; k + 1];
    for (u, v) in g.edges() {
        let cu = m.community_of(u).unwrap_or(0) as usize;
        if Some(cu as u32) == m.community_of(v) {
            internal[cu] += 1;
        }
    }
    for &n in g.nodes() {
        let c = m.community_of(n).unwrap_or(0) as usize;
        degree_sum[c] += g.adjacency()[g.position(n).unwrap()].len();
    }
    (1..=k)
        .map(|c| {
            let share = degree_sum[c] as f64 / two_m;
            2.0 * internal[c] as f64 / two_m - share * share
        })
        .sum()
}

/// Loads a precomputed membership. Community labels are renumbered `1..=K`
/// in order of first appearance.
pub fn load_membership(g: &LayerGraph, rows: &[(NodeId, u64)]) -> Result<Membership> {
    let mut seen: BTreeSet<NodeId> = BTreeSet::new();
    let mut label_index: HashMap<u64, usize> = HashMap::new();
    let mut groups: Vec<Vec<NodeId>> = Vec::new();
    for &(n, label) in rows {
        if !g.contains(n) {
            return Err(Error::UnknownNode(n));
        }
        if !seen.insert(n) {
            return Err(Error::DuplicateNode(n));
        }
        let next = label_index.len();
        let idx = *label_index.entry(label).or_insert(next);
        if idx == groups.len() {
            groups.push(Vec::new());
        }
        groups[idx].push(n);
    }
    if let Some(&missing) = g.nodes().iter().find(|n| !seen.contains(n)) {
        return Err(Error::MissingNode(missing));
    }
    Ok(Membership::from_groups(g.id().clone(), groups))
}

/// Statistics of one community: size, internal edges, density and hubs.
#[derive(Clone, Debug, PartialEq)]
pub struct CommunitySummary {
    pub id: CommunityId,
    pub node_count: usize,
    pub internal_edge_count: usize,
    pub density: f64,
    pub hubs: BTreeSet<NodeId>,
}

impl CommunitySummary {
    /// Density as an exact fraction; a singleton counts as a clique.
    pub fn density_ratio(&self) -> Ratio<u128> {
        let v = self.node_count as u128;
        if v < 2 {
            return Ratio::from_integer(1);
        }
        Ratio::new(2 * self.internal_edge_count as u128, v * (v - 1))
    }
}

/// Community summaries of one layer keyed by community index.
pub type Summaries = BTreeMap<u32, CommunitySummary>;

pub const DEFAULT_HUB_QUANTILE: f64 = 0.8;

/// Computes per-community statistics.
///
/// Hubs are the members whose degree in the whole layer graph reaches the
/// nearest-rank `hub_quantile` quantile of member degrees, so the
/// highest-degree members always qualify.
pub fn summarize(g: &LayerGraph, m: &Membership, hub_quantile: f64) -> Result<Summaries> {
    if !(hub_quantile > 0.0 && hub_quantile <= 1.0) {
        return Err(Error::InvalidQuantile(hub_quantile));
    }
    let adj = g.adjacency();
    let community: Vec<Option<u32>> = g.nodes().iter().map(|&n| m.community_of(n)).collect();
    let mut out = Summaries::new();
    for (index, members) in m.communities() {
        let positions: Vec<usize> = members
            .iter()
            .map(|&n| g.position(n).ok_or(Error::UnknownNode(n)))
            .collect::<Result<_>>()?;
        let mut internal_twice = 0usize;
        for &p in &positions {
            internal_twice += adj[p]
                .iter()
                .filter(|&&q| community[q as usize] == Some(index))
                .count();
        }
        let internal = internal_twice / 2;
        let v = members.len();
        let density = if v < 2 {
            1.0
        } else {
            2.0 * internal as f64 / (v as f64 * (v as f64 - 1.0))
        };
        let degrees: Vec<usize> = positions.iter().map(|&p| adj[p].len()).collect();
        let threshold = nearest_rank(&degrees, hub_quantile);
        let hubs = members
            .iter()
            .zip(&degrees)
            .filter(|(_, &d)| d >= threshold)
            .map(|(&n, _)| n)
            .collect();
        out.insert(
            index,
            CommunitySummary {
                id: m.id(index),
                node_count: v,
                internal_edge_count: internal,
                density,
                hubs,
            },
        );
    }
    Ok(out)
}

fn nearest_rank(values: &[usize], q: f64) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    // the epsilon keeps q * n = 4.000000000000001 from skipping a rank
    let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}
