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

//! Evaluation of a serial k-community specification.
//!
//! The first composition seeds one tuple per matched community pair. Every
//! later step either extends the tuples with a new layer (its right layer was
//! not visited yet) or updates them with the edges between two visited
//! layers. Tuples never multiply after the first step.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::cbg::{
    build_cbg_with, linked_communities, CommunityBipartiteGraph, ExpandedEdgeSet, Metric, Side,
};
use crate::community::{detect_all, summarize, CommunityId, Membership, Summaries};
use crate::error::{Error, Result};
use crate::matching::{max_cardinality_from, max_flow_match, MatchedPairs};
use crate::model::{LayerGraph, LayerId, Mln};
use crate::par::Execution;
use crate::spec::{Composition, StepKind, ValidatedSpec};

/// A layer's 1-community and its per-community statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerData {
    pub membership: Membership,
    pub summaries: Summaries,
}

pub type LayerTable = BTreeMap<LayerId, LayerData>;

/// Builds the layer table for `layers`: supplied memberships are used as
/// they are, the rest are detected (in parallel across layers), and every
/// layer is summarised with `hub_quantile`.
pub fn prepare_layers(
    mln: &Mln,
    layers: &[LayerId],
    mut given: BTreeMap<LayerId, Membership>,
    seed: u64,
    hub_quantile: f64,
    exec: Execution,
) -> Result<LayerTable> {
    let graphs = layers
        .iter()
        .map(|l| mln.layer(l).ok_or_else(|| Error::UnknownLayer(l.clone())))
        .collect::<Result<Vec<_>>>()?;
    let missing: Vec<&LayerGraph> = graphs
        .iter()
        .copied()
        .filter(|g| !given.contains_key(g.id()))
        .collect();
    for m in detect_all(&missing, seed, exec)? {
        given.insert(m.layer().clone(), m);
    }
    let mut table = LayerTable::new();
    for g in graphs {
        let membership = given
            .remove(g.id())
            .ok_or_else(|| Error::MissingMembership(g.id().clone()))?;
        let summaries = summarize(g, &membership, hub_quantile)?;
        table.insert(
            g.id().clone(),
            LayerData {
                membership,
                summaries,
            },
        );
    }
    Ok(table)
}

/// One element of a k-community.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KTuple {
    /// One community per layer in visit order; index 0 means no community.
    pub slots: Vec<CommunityId>,
    /// One entry per step; `None` is `φ`.
    pub x: Vec<Option<ExpandedEdgeSet>>,
}

impl KTuple {
    pub fn is_total(&self) -> bool {
        self.x.iter().all(Option::is_some)
    }

    pub fn has_null_slot(&self) -> bool {
        self.slots.iter().any(CommunityId::is_null)
    }

    /// Paper notation, e.g. `< c_A^2, c_D^1, 0 ; x_{A,D}, phi >`.
    pub fn render(&self) -> String {
        let slots: Vec<String> = self.slots.iter().map(ToString::to_string).collect();
        let xs: Vec<String> = self
            .x
            .iter()
            .map(|x| match x {
                Some(e) => format!("x_{{{},{}}}", e.left.layer, e.right.layer),
                None => "phi".to_string(),
            })
            .collect();
        format!("< {} ; {} >", slots.join(", "), xs.join(", "))
    }

    fn indices(&self) -> Vec<u32> {
        self.slots.iter().map(|c| c.index).collect()
    }
}

impl fmt::Display for KTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Per-step record of what the engine saw and decided.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub step: usize,
    pub left: LayerId,
    pub right: LayerId,
    pub kind: StepKind,
    pub metric: Metric,
    pub u_left: usize,
    pub u_right: usize,
    pub cbg_edges: usize,
    /// Linked community pairs whose weight evaluated to zero.
    pub dropped_edges: usize,
    pub matched: usize,
    /// Largest possible matching size, ignoring weights.
    pub max_cardinality: usize,
    pub consistent: usize,
    pub no_match: usize,
    pub inconsistent: usize,
    /// Updates flagged only because the right community was paired elsewhere.
    pub asymmetric: usize,
    /// Several tuples ended up sharing a community in the right layer.
    pub converged: bool,
    pub wall_time: Duration,
}

#[derive(Clone, Debug)]
pub struct KCommunityResult {
    pub spec: ValidatedSpec,
    pub tuples: Vec<KTuple>,
    pub diagnostics: Vec<StepDiagnostics>,
}

impl KCommunityResult {
    pub fn total_time(&self) -> Duration {
        self.diagnostics.iter().map(|d| d.wall_time).sum()
    }
}

pub fn detect_k_community(
    mln: &Mln,
    layers: &LayerTable,
    spec: &ValidatedSpec,
    default_metric: Metric,
) -> Result<KCommunityResult> {
    detect_k_community_with(mln, layers, spec, default_metric, Execution::default())
}

pub fn detect_k_community_with(
    mln: &Mln,
    layers: &LayerTable,
    spec: &ValidatedSpec,
    default_metric: Metric,
    exec: Execution,
) -> Result<KCommunityResult> {
    for l in spec.layers() {
        if !layers.contains_key(l) {
            return Err(Error::MissingMembership(l.clone()));
        }
    }
    let mut run = Run {
        mln,
        layers,
        spec,
        exec,
        tuples: Vec::new(),
    };
    let mut diagnostics = Vec::with_capacity(spec.spec().steps.len());
    for (i, (step, kind)) in spec.steps().enumerate() {
        let started = Instant::now();
        let metric = step.metric.unwrap_or(default_metric);
        let mut d = if i == 0 {
            run.base(step, metric)?
        } else {
            match kind {
                StepKind::Extend => run.extend(i, step, metric)?,
                StepKind::Update => run.update(i, step, metric)?,
            }
        };
        d.step = i + 1;
        d.wall_time = started.elapsed();
        log::debug!(
            "step {} {}->{}: {} tuples, {} matched",
            d.step,
            d.left,
            d.right,
            run.tuples.len(),
            d.matched
        );
        diagnostics.push(d);
    }
    Ok(KCommunityResult {
        spec: spec.clone(),
        tuples: run.tuples,
        diagnostics,
    })
}

struct Run<'a> {
    mln: &'a Mln,
    layers: &'a LayerTable,
    spec: &'a ValidatedSpec,
    exec: Execution,
    tuples: Vec<KTuple>,
}

impl Run<'_> {
    fn data(&self, l: &LayerId) -> &LayerData {
        &self.layers[l]
    }

    fn side(&self, l: &LayerId) -> Side<'_> {
        let d = self.data(l);
        Side {
            membership: &d.membership,
            summaries: &d.summaries,
        }
    }

    fn slot(&self, l: &LayerId) -> Result<usize> {
        self.spec
            .slot_of(l)
            .ok_or_else(|| Error::InternalCase(format!("layer {l} has no slot")))
    }

    /// Non-zero communities held by `layer`'s slot across current tuples.
    fn occupied(&self, l: &LayerId) -> Result<BTreeSet<u32>> {
        let s = self.slot(l)?;
        Ok(self
            .tuples
            .iter()
            .map(|t| t.slots[s].index)
            .filter(|&c| c != 0)
            .collect())
    }

    fn solve(
        &self,
        step: &Composition,
        kind: StepKind,
        metric: Metric,
        u_left: BTreeSet<u32>,
        u_right: BTreeSet<u32>,
    ) -> Result<(CommunityBipartiteGraph, MatchedPairs, StepDiagnostics)> {
        let cbg = build_cbg_with(
            self.mln,
            &step.left,
            &step.right,
            &u_left,
            &u_right,
            self.side(&step.left),
            self.side(&step.right),
            metric,
            self.exec,
        )?;
        let mp = max_flow_match(&cbg);
        let diag = StepDiagnostics {
            step: 0,
            left: step.left.clone(),
            right: step.right.clone(),
            kind,
            metric,
            u_left: u_left.len(),
            u_right: u_right.len(),
            cbg_edges: cbg.edges.len(),
            dropped_edges: cbg.dropped.len(),
            matched: mp.len(),
            max_cardinality: max_cardinality_from(&cbg, &mp.pairs),
            consistent: 0,
            no_match: 0,
            inconsistent: 0,
            asymmetric: 0,
            converged: false,
            wall_time: Duration::ZERO,
        };
        Ok((cbg, mp, diag))
    }

    fn base(&mut self, step: &Composition, metric: Metric) -> Result<StepDiagnostics> {
        let (l, r) = (&step.left, &step.right);
        let (lm, rm) = (&self.data(l).membership, &self.data(r).membership);
        let u_left = linked_communities(self.mln, l, r, lm, rm, None)?;
        let u_right = linked_communities(self.mln, r, l, rm, lm, None)?;
        let (cbg, mp, mut diag) = self.solve(step, StepKind::Extend, metric, u_left, u_right)?;
        let (ls, rs) = (self.slot(l)?, self.slot(r)?);
        let k = self.spec.k();
        let steps = self.spec.spec().steps.len();
        for &(cl, cr) in &mp.pairs {
            let mut slots: Vec<CommunityId> = self
                .spec
                .layers()
                .iter()
                .map(|layer| CommunityId::new(layer.clone(), 0))
                .collect();
            debug_assert_eq!(slots.len(), k);
            slots[ls].index = cl;
            slots[rs].index = cr;
            let mut x = vec![None; steps];
            x[0] = Some(expanded(&cbg, cl, cr)?);
            self.tuples.push(KTuple { slots, x });
        }
        diag.consistent = mp.len();
        Ok(diag)
    }

    fn extend(&mut self, i: usize, step: &Composition, metric: Metric) -> Result<StepDiagnostics> {
        let (l, r) = (&step.left, &step.right);
        let u_left = self.occupied(l)?;
        let (lm, rm) = (&self.data(l).membership, &self.data(r).membership);
        let u_right = linked_communities(self.mln, r, l, rm, lm, Some(&u_left))?;
        let (cbg, mp, mut diag) = self.solve(step, StepKind::Extend, metric, u_left, u_right)?;
        let (ls, rs) = (self.slot(l)?, self.slot(r)?);
        let mut seen = BTreeSet::new();
        for t in &mut self.tuples {
            if !t.slots[rs].is_null() {
                return Err(Error::InternalCase(format!(
                    "tuple {t} already has a {r} community before {r} is composed"
                )));
            }
            let cl = t.slots[ls].index;
            match (cl != 0).then(|| mp.partner_of_left(cl)).flatten() {
                Some(cr) => {
                    t.slots[rs].index = cr;
                    t.x[i] = Some(expanded(&cbg, cl, cr)?);
                    diag.consistent += 1;
                    if !seen.insert(cr) {
                        diag.converged = true;
                    }
                }
                None => diag.no_match += 1,
            }
        }
        Ok(diag)
    }

    fn update(&mut self, i: usize, step: &Composition, metric: Metric) -> Result<StepDiagnostics> {
        let (l, r) = (&step.left, &step.right);
        let u_left = self.occupied(l)?;
        let u_right = self.occupied(r)?;
        let (cbg, mp, mut diag) = self.solve(step, StepKind::Update, metric, u_left, u_right)?;
        let (ls, rs) = (self.slot(l)?, self.slot(r)?);
        for t in &mut self.tuples {
            let (cl, cr) = (t.slots[ls].index, t.slots[rs].index);
            if cl != 0 && cr != 0 && mp.contains(cl, cr) {
                t.x[i] = Some(expanded(&cbg, cl, cr)?);
                diag.consistent += 1;
                continue;
            }
            let left_paired = cl != 0 && cr != 0 && mp.partner_of_left(cl).is_some();
            let right_paired = cl != 0 && cr != 0 && mp.partner_of_right(cr).is_some();
            if left_paired || right_paired {
                diag.inconsistent += 1;
                if !left_paired {
                    diag.asymmetric += 1;
                }
            } else {
                diag.no_match += 1;
            }
        }
        Ok(diag)
    }
}

fn expanded(cbg: &CommunityBipartiteGraph, l: u32, r: u32) -> Result<ExpandedEdgeSet> {
    cbg.edge(l, r)
        .map(|e| e.expanded.clone())
        .ok_or_else(|| Error::InternalCase(format!("matched pair ({l}, {r}) has no meta edge")))
}

/// Splits tuples into total (no `φ`) and partial ones.
pub fn classify(result: &KCommunityResult) -> (Vec<&KTuple>, Vec<&KTuple>) {
    result.tuples.iter().partition(|t| t.is_total())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankKey {
    MinSize,
    SumSize,
    MinDensity,
    SumRawPairs,
}

impl FromStr for RankKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min_size" => Ok(RankKey::MinSize),
            "sum_size" => Ok(RankKey::SumSize),
            "min_density" => Ok(RankKey::MinDensity),
            "sum_raw_pairs" => Ok(RankKey::SumRawPairs),
            other => Err(Error::UnknownKey(other.to_string())),
        }
    }
}

impl fmt::Display for RankKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankKey::MinSize => "min_size",
            RankKey::SumSize => "sum_size",
            RankKey::MinDensity => "min_density",
            RankKey::SumRawPairs => "sum_raw_pairs",
        })
    }
}

/// Orders tuples by `key`, largest first. Null slots count as size 0 and are
/// skipped for density; under the `min_*` keys any tuple with a null slot
/// ranks below every tuple without one. Ties keep ascending slot order.
pub fn rank(tuples: &[KTuple], layers: &LayerTable, key: RankKey) -> Result<Vec<KTuple>> {
    let summary = |c: &CommunityId| {
        layers
            .get(&c.layer)
            .and_then(|d| d.summaries.get(&c.index))
            .ok_or_else(|| Error::UnknownCommunity(c.clone()))
    };
    let mut keyed = Vec::with_capacity(tuples.len());
    for t in tuples {
        let present: Vec<&CommunityId> = t.slots.iter().filter(|c| !c.is_null()).collect();
        let value = match key {
            RankKey::MinSize | RankKey::SumSize => {
                let mut sizes = Vec::with_capacity(t.slots.len());
                for c in &t.slots {
                    sizes.push(if c.is_null() { 0 } else { summary(c)?.node_count });
                }
                if key == RankKey::MinSize {
                    sizes.iter().copied().min().unwrap_or(0) as f64
                } else {
                    sizes.iter().sum::<usize>() as f64
                }
            }
            RankKey::MinDensity => {
                let mut min = f64::INFINITY;
                for c in &present {
                    min = min.min(summary(c)?.density);
                }
                if present.is_empty() {
                    0.0
                } else {
                    min
                }
            }
            RankKey::SumRawPairs => t.x.iter().flatten().map(|x| x.len()).sum::<usize>() as f64,
        };
        let group = match key {
            RankKey::MinSize | RankKey::MinDensity => u8::from(!t.has_null_slot()),
            _ => 0,
        };
        keyed.push((group, value, t.indices(), t));
    }
    keyed.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(b.1.total_cmp(&a.1))
            .then_with(|| a.2.cmp(&b.2))
    });
    Ok(keyed.into_iter().map(|(_, _, _, t)| t.clone()).collect())
}
