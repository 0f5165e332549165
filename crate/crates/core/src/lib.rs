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

//! Structure-preserving k-community detection for heterogeneous multilayer
//! networks (HeMLNs).
//!
//! The pipeline is decoupled into three pieces:
//!
//! 1. per-layer community detection ([`community`]), producing a
//!    1-community for every layer;
//! 2. a community bipartite graph between two layers whose meta edges are
//!    weighted by one of three metrics ([`cbg`]);
//! 3. a one-to-one maximum-weight pairing of communities over that graph
//!    ([`matching`]).
//!
//! A serial k-community is specified as a left-to-right chain of
//! compositions ([`spec`]) and evaluated step by step ([`engine`]); each
//! result tuple keeps the community ids and the inter-layer edges behind
//! every matched meta edge, so the sub-network it describes can be rebuilt.

pub mod cbg;
pub mod community;
pub mod config;
pub mod engine;
mod error;
pub mod imdb;
pub mod io;
pub mod matching;
pub mod model;
pub mod par;
pub mod spec;

pub use cbg::{build_cbg, CommunityBipartiteGraph, ExpandedEdgeSet, MetaEdge, MetaNode, Metric};
pub use community::{
    detect_communities, load_membership, summarize, CommunityId, CommunitySummary, Membership,
    Summaries,
};
pub use engine::{
    classify, detect_k_community, prepare_layers, rank, KCommunityResult, KTuple, LayerData, LayerTable, RankKey,
    StepDiagnostics,
};
pub use error::{Error, Result};
pub use matching::{brute_force_match, max_flow_match, MatchedPairs};
pub use model::{InterLayerEdges, LayerGraph, LayerId, Mln, NodeId};
pub use par::Execution;
pub use spec::{parse_spec, validate_spec, Composition, KSpec, StepKind, ValidatedSpec};
