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

//! Multilayer network data model: layer graphs, inter-layer bipartite edge
//! sets and the assembled network.
//!
//! Node ids are global: the node sets of distinct layers are disjoint, so a
//! [`NodeId`] alone identifies both the node and its layer.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for NodeId {
    fn from(v: u32) -> Self {
        NodeId(v)
    }
}

/// Short layer identifier such as `A`, `D` or `M`.
///
/// Layer ids follow the identifier rule of the specification language,
/// `[A-Za-z][A-Za-z0-9_]*`, so every layer can be named in a spec string.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LayerId(String);

impl LayerId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if is_identifier(&id) {
            Ok(LayerId(id))
        } else {
            Err(Error::InvalidLayerId(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LayerId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LayerId::new(s)
    }
}

impl TryFrom<String> for LayerId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        LayerId::new(s)
    }
}

impl From<LayerId> for String {
    fn from(id: LayerId) -> String {
        id.0
    }
}

/// Simple undirected graph of one layer.
///
/// Nodes are kept sorted and edges are stored as a dense adjacency list over
/// node positions, which is what the community detection works on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerGraph {
    id: LayerId,
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, u32>,
    adj: Vec<Vec<u32>>,
    edge_count: usize,
    labels: BTreeMap<NodeId, String>,
}

impl LayerGraph {
    /// Builds a layer graph. Repeated nodes and repeated edges (in either
    /// orientation) collapse; self-loops and edges touching undeclared nodes
    /// are rejected.
    pub fn new(
        id: LayerId,
        nodes: impl IntoIterator<Item = NodeId>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self> {
        let nodes: Vec<NodeId> = nodes
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<NodeId, u32> = nodes
            .iter()
            .enumerate()
            .map(|(i, &n)| (n, i as u32))
            .collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        for (u, v) in edges {
            if u == v {
                return Err(Error::MalformedGraph {
                    layer: id,
                    reason: format!("self-loop on node {u}"),
                });
            }
            let (Some(&iu), Some(&iv)) = (index.get(&u), index.get(&v)) else {
                let missing = if index.contains_key(&u) { v } else { u };
                return Err(Error::MalformedGraph {
                    layer: id,
                    reason: format!("edge ({u}, {v}) references undeclared node {missing}"),
                });
            };
            adj[iu as usize].push(iv);
            adj[iv as usize].push(iu);
        }
        let mut half_edges = 0;
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            half_edges += list.len();
        }
        Ok(LayerGraph {
            id,
            nodes,
            index,
            adj,
            edge_count: half_edges / 2,
            labels: BTreeMap::new(),
        })
    }

    /// Attaches node labels. Labels are carried through I/O but never
    /// interpreted by the algorithms.
    pub fn with_labels(
        mut self,
        labels: impl IntoIterator<Item = (NodeId, String)>,
    ) -> Result<Self> {
        for (n, label) in labels {
            if !self.contains(n) {
                return Err(Error::UnknownNode(n));
            }
            self.labels.insert(n, label);
        }
        Ok(self)
    }

    pub fn id(&self) -> &LayerId {
        &self.id
    }

    /// Nodes in ascending id order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, n: NodeId) -> bool {
        self.index.contains_key(&n)
    }

    pub fn label(&self, n: NodeId) -> Option<&str> {
        self.labels.get(&n).map(String::as_str)
    }

    pub fn labels(&self) -> &BTreeMap<NodeId, String> {
        &self.labels
    }

    pub fn degree(&self, n: NodeId) -> Result<usize> {
        self.position(n)
            .map(|i| self.adj[i].len())
            .ok_or(Error::UnknownNode(n))
    }

    /// Neighbors of `n` in ascending order.
    pub fn neighbors(&self, n: NodeId) -> Result<Vec<NodeId>> {
        let i = self.position(n).ok_or(Error::UnknownNode(n))?;
        Ok(self.adj[i].iter().map(|&j| self.nodes[j as usize]).collect())
    }

    /// Every edge once as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj.iter().enumerate().flat_map(move |(i, list)| {
            list.iter()
                .filter(move |&&j| j as usize > i)
                .map(move |&j| (self.nodes[i], self.nodes[j as usize]))
        })
    }

    pub(crate) fn position(&self, n: NodeId) -> Option<usize> {
        self.index.get(&n).map(|&i| i as usize)
    }

    pub(crate) fn adjacency(&self) -> &[Vec<u32>] {
        &self.adj
    }
}

/// Bipartite edge set `X_{i,j}` between two layers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterLayerEdges {
    from: LayerId,
    to: LayerId,
    links: BTreeSet<(NodeId, NodeId)>,
}

impl InterLayerEdges {
    pub fn new(
        from: LayerId,
        to: LayerId,
        links: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self> {
        if from == to {
            return Err(Error::MalformedGraph {
                layer: from,
                reason: "inter-layer edges must join two distinct layers".into(),
            });
        }
        Ok(InterLayerEdges {
            from,
            to,
            links: links.into_iter().collect(),
        })
    }

    pub fn from_layer(&self) -> &LayerId {
        &self.from
    }

    pub fn to_layer(&self) -> &LayerId {
        &self.to
    }

    pub fn links(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn reversed(&self) -> InterLayerEdges {
        InterLayerEdges {
            from: self.to.clone(),
            to: self.from.clone(),
            links: self.links.iter().map(|&(a, b)| (b, a)).collect(),
        }
    }
}

fn pair_key(a: &LayerId, b: &LayerId) -> (LayerId, LayerId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Multilayer network `MLN(G, X)`.
///
/// Construction is single-writer through [`Mln::add_layer`] and
/// [`Mln::add_interlayer`]; analysis only ever borrows the network, so a
/// finished `Mln` can be shared across threads.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Mln {
    layers: BTreeMap<LayerId, LayerGraph>,
    interlayer: BTreeMap<(LayerId, LayerId), InterLayerEdges>,
    owner: HashMap<NodeId, LayerId>,
}

impl Mln {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_layer(&mut self, g: LayerGraph) -> Result<()> {
        if self.layers.contains_key(g.id()) {
            return Err(Error::DuplicateLayer(g.id().clone()));
        }
        if let Some(&node) = g.nodes().iter().find(|n| self.owner.contains_key(n)) {
            return Err(Error::NodeIdCollision {
                node,
                layer: g.id().clone(),
                existing: self.owner[&node].clone(),
            });
        }
        for &n in g.nodes() {
            self.owner.insert(n, g.id().clone());
        }
        self.layers.insert(g.id().clone(), g);
        Ok(())
    }

    pub fn add_interlayer(&mut self, x: InterLayerEdges) -> Result<()> {
        let from = self
            .layers
            .get(x.from_layer())
            .ok_or_else(|| Error::UnknownLayer(x.from_layer().clone()))?;
        let to = self
            .layers
            .get(x.to_layer())
            .ok_or_else(|| Error::UnknownLayer(x.to_layer().clone()))?;
        let key = pair_key(x.from_layer(), x.to_layer());
        if self.interlayer.contains_key(&key) {
            return Err(Error::DuplicatePair(key.0, key.1));
        }
        for &(a, b) in x.links() {
            if !from.contains(a) {
                return Err(Error::EndpointNotInLayer {
                    node: a,
                    layer: from.id().clone(),
                });
            }
            if !to.contains(b) {
                return Err(Error::EndpointNotInLayer {
                    node: b,
                    layer: to.id().clone(),
                });
            }
        }
        self.interlayer.insert(key, x);
        Ok(())
    }

    pub fn layer(&self, id: &LayerId) -> Option<&LayerGraph> {
        self.layers.get(id)
    }

    pub fn layers(&self) -> impl Iterator<Item = &LayerGraph> {
        self.layers.values()
    }

    pub fn layer_ids(&self) -> impl Iterator<Item = &LayerId> {
        self.layers.keys()
    }

    pub fn layer_of(&self, n: NodeId) -> Option<&LayerId> {
        self.owner.get(&n)
    }

    pub fn has_interlayer(&self, a: &LayerId, b: &LayerId) -> bool {
        self.interlayer.contains_key(&pair_key(a, b))
    }

    /// Registered inter-layer edge sets, each in the orientation it was added.
    pub fn interlayers(&self) -> impl Iterator<Item = &InterLayerEdges> {
        self.interlayer.values()
    }

    /// The bipartite edge set between `a` and `b`, oriented so every link is
    /// `(node of a, node of b)`.
    pub fn interlayer(&self, a: &LayerId, b: &LayerId) -> Option<InterLayerEdges> {
        let x = self.interlayer.get(&pair_key(a, b))?;
        Some(if x.from_layer() == a {
            x.clone()
        } else {
            x.reversed()
        })
    }

    /// Oriented links between `a` and `b` without copying the edge set.
    pub fn links(
        &self,
        a: &LayerId,
        b: &LayerId,
    ) -> Option<impl Iterator<Item = (NodeId, NodeId)> + '_> {
        let x = self.interlayer.get(&pair_key(a, b))?;
        let flip = x.from_layer() != a;
        Some(
            x.links()
                .iter()
                .map(move |&(u, v)| if flip { (v, u) } else { (u, v) }),
        )
    }
}
