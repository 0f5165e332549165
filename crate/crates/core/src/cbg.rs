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

//! Community bipartite graphs and meta-edge weight metrics.
//!
//! A meta edge joins two communities from different layers whenever at least
//! one inter-layer link runs between their members. Its weight is one of:
//!
//! * `e`: number of inter-community links, normalised by the largest count in
//!   the same bipartite graph;
//! * `d`: density(left) x edge fraction x density(right);
//! * `h`: participating-hub ratio(left) x edge fraction x participating-hub
//!   ratio(right).
//!
//! The edge fraction is `|links| / (|left| * |right|)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::community::{CommunityId, CommunitySummary, Membership, Summaries};
use crate::error::{Error, Result};
use crate::model::{LayerId, Mln, NodeId};
use crate::par::{self, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "e")]
    Edges,
    #[serde(rename = "d")]
    Density,
    #[serde(rename = "h")]
    Hubs,
}

impl Metric {
    pub fn symbol(self) -> char {
        match self {
            Metric::Edges => 'e',
            Metric::Density => 'd',
            Metric::Hubs => 'h',
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" => Ok(Metric::Edges),
            "d" => Ok(Metric::Density),
            "h" => Ok(Metric::Hubs),
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaNode {
    pub community: CommunityId,
    pub summary: CommunitySummary,
}

/// The inter-layer links behind one meta edge, oriented left to right.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedEdgeSet {
    pub left: CommunityId,
    pub right: CommunityId,
    pub pairs: Vec<(NodeId, NodeId)>,
}

impl ExpandedEdgeSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetaEdge {
    pub expanded: ExpandedEdgeSet,
    /// Hubs of the left community with at least one link into the right one.
    pub left_hubs_linked: usize,
    /// Hubs of the right community with at least one link into the left one.
    pub right_hubs_linked: usize,
    pub weight: f64,
    /// The weight as an exact fraction, when it fits in `u128`.
    pub exact_weight: Option<Ratio<u128>>,
}

impl MetaEdge {
    pub fn left(&self) -> u32 {
        self.expanded.left.index
    }

    pub fn right(&self) -> u32 {
        self.expanded.right.index
    }

    /// Number of inter-layer links behind the edge, `|x_{i,j}|`.
    pub fn raw_pairs(&self) -> usize {
        self.expanded.pairs.len()
    }
}

/// `CBG_{i,j}(U_i, U_j, L'_{i,j})` with weights under one metric.
#[derive(Clone, Debug, PartialEq)]
pub struct CommunityBipartiteGraph {
    pub left_layer: LayerId,
    pub right_layer: LayerId,
    pub metric: Metric,
    pub left_nodes: BTreeMap<u32, MetaNode>,
    pub right_nodes: BTreeMap<u32, MetaNode>,
    /// Meta edges sorted by `(left, right)` community index.
    pub edges: Vec<MetaEdge>,
    /// Community pairs that had links but evaluated to weight zero.
    pub dropped: Vec<(u32, u32)>,
}

impl CommunityBipartiteGraph {
    pub fn edge(&self, left: u32, right: u32) -> Option<&MetaEdge> {
        self.edges
            .binary_search_by(|e| (e.left(), e.right()).cmp(&(left, right)))
            .ok()
            .map(|i| &self.edges[i])
    }

    /// Builds a graph directly from weighted edges; meta node statistics are
    /// placeholders. Meant for exercising the matching in isolation.
    pub fn from_weights(
        left_nodes: impl IntoIterator<Item = u32>,
        right_nodes: impl IntoIterator<Item = u32>,
        edges: impl IntoIterator<Item = (u32, u32, f64)>,
    ) -> Self {
        let left = LayerId::new("L").unwrap();
        let right = LayerId::new("R").unwrap();
        let node = |layer: &LayerId, index: u32| {
            let id = CommunityId::new(layer.clone(), index);
            MetaNode {
                community: id.clone(),
                summary: CommunitySummary {
                    id,
                    node_count: 1,
                    internal_edge_count: 0,
                    density: 1.0,
                    hubs: BTreeSet::new(),
                },
            }
        };
        let mut edges: Vec<MetaEdge> = edges
            .into_iter()
            .map(|(l, r, w)| MetaEdge {
                expanded: ExpandedEdgeSet {
                    left: CommunityId::new(left.clone(), l),
                    right: CommunityId::new(right.clone(), r),
                    pairs: Vec::new(),
                },
                left_hubs_linked: 0,
                right_hubs_linked: 0,
                weight: w,
                exact_weight: None,
            })
            .collect();
        edges.sort_by_key(|e| (e.left(), e.right()));
        let mut left_nodes: BTreeMap<u32, MetaNode> =
            left_nodes.into_iter().map(|i| (i, node(&left, i))).collect();
        let mut right_nodes: BTreeMap<u32, MetaNode> =
            right_nodes.into_iter().map(|i| (i, node(&right, i))).collect();
        for e in &edges {
            left_nodes
                .entry(e.left())
                .or_insert_with(|| node(&left, e.left()));
            right_nodes
                .entry(e.right())
                .or_insert_with(|| node(&right, e.right()));
        }
        CommunityBipartiteGraph {
            left_layer: left,
            right_layer: right,
            metric: Metric::Edges,
            left_nodes,
            right_nodes,
            edges,
            dropped: Vec::new(),
        }
    }
}

/// One side of a bipartite construction: a layer's membership and summaries.
#[derive(Clone, Copy, Debug)]
pub struct Side<'a> {
    pub membership: &'a Membership,
    pub summaries: &'a Summaries,
}

/// Inputs to one meta-edge weight evaluation.
#[derive(Clone, Copy, Debug)]
pub struct EdgeStats<'a> {
    pub pairs: usize,
    pub left: &'a CommunitySummary,
    pub right: &'a CommunitySummary,
    pub left_hubs_linked: usize,
    pub right_hubs_linked: usize,
}

impl EdgeStats<'_> {
    pub fn edge_fraction(&self) -> f64 {
        self.pairs as f64 / (self.left.node_count as f64 * self.right.node_count as f64)
    }
}

/// `|x| / max |x|` over the graph.
pub fn weight_e(pairs: usize, cbg_max: usize) -> Result<f64> {
    if cbg_max == 0 {
        return Err(Error::EmptyCbg);
    }
    Ok(pairs as f64 / cbg_max as f64)
}

pub fn weight_d(s: &EdgeStats<'_>) -> f64 {
    s.left.density * s.edge_fraction() * s.right.density
}

pub fn weight_h(s: &EdgeStats<'_>) -> f64 {
    let left = s.left_hubs_linked as f64 / s.left.hubs.len() as f64;
    let right = s.right_hubs_linked as f64 / s.right.hubs.len() as f64;
    left * s.edge_fraction() * right
}

fn exact_weight(metric: Metric, s: &EdgeStats<'_>, cbg_max: usize) -> Option<Ratio<u128>> {
    let x = s.pairs as u128;
    let cells = (s.left.node_count as u128).checked_mul(s.right.node_count as u128)?;
    let product = |l: (u128, u128), r: (u128, u128)| -> Option<(u128, u128)> {
        let num = l.0.checked_mul(x)?.checked_mul(r.0)?;
        let den = l.1.checked_mul(cells)?.checked_mul(r.1)?;
        Some((num, den))
    };
    let (num, den) = match metric {
        Metric::Edges => (x, cbg_max as u128),
        Metric::Density => {
            let (l, r) = (s.left.density_ratio(), s.right.density_ratio());
            product((*l.numer(), *l.denom()), (*r.numer(), *r.denom()))?
        }
        Metric::Hubs => product(
            (s.left_hubs_linked as u128, s.left.hubs.len() as u128),
            (s.right_hubs_linked as u128, s.right.hubs.len() as u128),
        )?,
    };
    // reduced once, on the full product
    (den != 0).then(|| Ratio::new(num, den))
}

/// Builds `CBG_{left,right}` restricted to the communities in `u_left` and
/// `u_right`, using the default [`Execution`].
#[allow(clippy::too_many_arguments)]
pub fn build_cbg(
    mln: &Mln,
    left: &LayerId,
    right: &LayerId,
    u_left: &BTreeSet<u32>,
    u_right: &BTreeSet<u32>,
    left_side: Side<'_>,
    right_side: Side<'_>,
    metric: Metric,
) -> Result<CommunityBipartiteGraph> {
    build_cbg_with(
        mln,
        left,
        right,
        u_left,
        u_right,
        left_side,
        right_side,
        metric,
        Execution::default(),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn build_cbg_with(
    mln: &Mln,
    left: &LayerId,
    right: &LayerId,
    u_left: &BTreeSet<u32>,
    u_right: &BTreeSet<u32>,
    left_side: Side<'_>,
    right_side: Side<'_>,
    metric: Metric,
    exec: Execution,
) -> Result<CommunityBipartiteGraph> {
    let links = mln
        .links(left, right)
        .ok_or_else(|| Error::NoInterLayerEdges(left.clone(), right.clone()))?;
    let left_nodes = meta_nodes(left, u_left, left_side)?;
    let right_nodes = meta_nodes(right, u_right, right_side)?;

    let mut keyed: Vec<(u32, u32, NodeId, NodeId)> = Vec::new();
    for (a, b) in links {
        let (Some(ca), Some(cb)) = (
            left_side.membership.community_of(a),
            right_side.membership.community_of(b),
        ) else {
            continue;
        };
        if left_nodes.contains_key(&ca) && right_nodes.contains_key(&cb) {
            keyed.push((ca, cb, a, b));
        }
    }
    keyed.sort_unstable();
    let grouped: Vec<_> = keyed
        .chunk_by(|x, y| (x.0, x.1) == (y.0, y.1))
        .map(|run| ((run[0].0, run[0].1), run.iter().map(|k| (k.2, k.3)).collect::<Vec<_>>()))
        .collect();
    let cbg_max = grouped.iter().map(|(_, p)| p.len()).max().unwrap_or(0);

    let evaluated = par::map(exec, &grouped, |((l, r), pairs)| {
        let ls = &left_nodes[l].summary;
        let rs = &right_nodes[r].summary;
        let stats = EdgeStats {
            pairs: pairs.len(),
            left: ls,
            right: rs,
            left_hubs_linked: hubs_linked(&ls.hubs, pairs.iter().map(|p| p.0)),
            right_hubs_linked: hubs_linked(&rs.hubs, pairs.iter().map(|p| p.1)),
        };
        let weight = match metric {
            // cbg_max > 0 whenever there is an edge to weigh
            Metric::Edges => stats.pairs as f64 / cbg_max as f64,
            Metric::Density => weight_d(&stats),
            Metric::Hubs => weight_h(&stats),
        };
        MetaEdge {
            expanded: ExpandedEdgeSet {
                left: ls.id.clone(),
                right: rs.id.clone(),
                pairs: pairs.clone(),
            },
            left_hubs_linked: stats.left_hubs_linked,
            right_hubs_linked: stats.right_hubs_linked,
            weight,
            exact_weight: exact_weight(metric, &stats, cbg_max),
        }
    });

    let mut edges = Vec::with_capacity(evaluated.len());
    let mut dropped = Vec::new();
    for e in evaluated {
        if e.weight > 0.0 {
            edges.push(e);
        } else {
            dropped.push((e.left(), e.right()));
        }
    }
    Ok(CommunityBipartiteGraph {
        left_layer: left.clone(),
        right_layer: right.clone(),
        metric,
        left_nodes,
        right_nodes,
        edges,
        dropped,
    })
}

fn hubs_linked(hubs: &BTreeSet<NodeId>, linked: impl Iterator<Item = NodeId>) -> usize {
    let mut linked: Vec<NodeId> = linked.collect();
    linked.sort_unstable();
    linked.dedup();
    linked.iter().filter(|n| hubs.contains(n)).count()
}

fn meta_nodes(layer: &LayerId, u: &BTreeSet<u32>, side: Side<'_>) -> Result<BTreeMap<u32, MetaNode>> {
    u.iter()
        .map(|&i| {
            let summary = side
                .summaries
                .get(&i)
                .filter(|_| i >= 1)
                .ok_or_else(|| Error::UnknownCommunity(CommunityId::new(layer.clone(), i)))?;
            Ok((
                i,
                MetaNode {
                    community: summary.id.clone(),
                    summary: summary.clone(),
                },
            ))
        })
        .collect()
}

/// Communities of `layer` with at least one inter-layer link into `other`,
/// optionally only counting links whose far end lies in `other_u`.
pub fn linked_communities(
    mln: &Mln,
    layer: &LayerId,
    other: &LayerId,
    membership: &Membership,
    other_membership: &Membership,
    other_u: Option<&BTreeSet<u32>>,
) -> Result<BTreeSet<u32>> {
    let links = mln
        .links(layer, other)
        .ok_or_else(|| Error::NoInterLayerEdges(layer.clone(), other.clone()))?;
    let mut out = BTreeSet::new();
    for (a, b) in links {
        let Some(c) = membership.community_of(a) else {
            continue;
        };
        let far_ok = match other_u {
            None => true,
            Some(u) => other_membership
                .community_of(b)
                .is_some_and(|cb| u.contains(&cb)),
        };
        if far_ok {
            out.insert(c);
        }
    }
    Ok(out)
}
