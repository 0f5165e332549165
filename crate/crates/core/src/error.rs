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

use std::path::PathBuf;

use thiserror::Error;

use crate::community::CommunityId;
use crate::model::{LayerId, NodeId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layer id {0:?}: expected [A-Za-z][A-Za-z0-9_]*")]
    InvalidLayerId(String),
    #[error("layer {0} is already present")]
    DuplicateLayer(LayerId),
    #[error("node {node} of layer {layer} already belongs to layer {existing}")]
    NodeIdCollision {
        node: NodeId,
        layer: LayerId,
        existing: LayerId,
    },
    #[error("malformed graph for layer {layer}: {reason}")]
    MalformedGraph { layer: LayerId, reason: String },
    #[error("unknown layer {0}")]
    UnknownLayer(LayerId),
    #[error("node {node} is not in layer {layer}")]
    EndpointNotInLayer { node: NodeId, layer: LayerId },
    #[error("inter-layer edges for ({0}, {1}) are already registered")]
    DuplicatePair(LayerId, LayerId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("layer {0} has no nodes")]
    EmptyGraph(LayerId),
    #[error("membership does not cover node {0}")]
    MissingNode(NodeId),
    #[error("node {0} is listed more than once in the membership")]
    DuplicateNode(NodeId),
    #[error("hub quantile must lie in (0, 1], got {0}")]
    InvalidQuantile(f64),

    #[error("no inter-layer edges between {0} and {1}")]
    NoInterLayerEdges(LayerId, LayerId),
    #[error("unknown community {0}")]
    UnknownCommunity(CommunityId),
    #[error("community bipartite graph has no meta edges to normalize")]
    EmptyCbg,

    #[error("instance too large for exhaustive matching: {nodes} meta nodes (limit {limit})")]
    TooLarge { nodes: usize, limit: usize },

    #[error("syntax error at column {column}: expected {expected}, found {found}")]
    Syntax {
        column: usize,
        expected: String,
        found: String,
    },
    #[error("subscript mismatch at column {column}: {message}")]
    SubscriptMismatch { column: usize, message: String },
    #[error("empty specification")]
    EmptySpec,
    #[error("non-serial specification at column {column}: only left-to-right composition is supported")]
    NonSerial { column: usize },
    #[error("missing inter-layer edges between {0} and {1}")]
    MissingInterLayerEdges(LayerId, LayerId),
    #[error("specification is disconnected: layer {0} is composed before it is reached")]
    DisconnectedSpec(LayerId),

    #[error("no membership supplied for layer {0}")]
    MissingMembership(LayerId),
    #[error("tuple matched no case of the extend/update table: {0}")]
    InternalCase(String),
    #[error("unknown ranking key {0:?}")]
    UnknownKey(String),
    #[error("unknown metric {0:?}: expected e, d or h")]
    UnknownMetric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    InvariantViolation {
        path: String,
        #[source]
        source: Box<Error>,
    },
    #[error("referential integrity: {0}")]
    ReferentialIntegrity(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl ToString, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}
