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

//! Maximum-weight one-to-one pairing of communities over a CBG.
//!
//! Weights are scaled to integers (relative to the largest weight in the
//! graph, times 10^9, rounded half to even) before solving, so that ties are
//! exact. The solver runs successive shortest augmenting paths on a
//! source/sink flow network, then uses the optimal dual to pick the
//! lexicographically smallest of all weight-maximal matchings.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::cbg::CommunityBipartiteGraph;
use crate::community::CommunityId;
use crate::error::{Error, Result};
use crate::model::LayerId;

const SCALE: f64 = 1e9;

/// Upper bound on `|U_left| + |U_right|` accepted by [`brute_force_match`].
pub const BRUTE_FORCE_LIMIT: usize = 16;

/// The matched-pairs set `MP` produced by one composition.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchedPairs {
    pub left_layer: LayerId,
    pub right_layer: LayerId,
    /// `(left, right)` community indices, sorted.
    pub pairs: Vec<(u32, u32)>,
    pub total_weight: f64,
}

impl MatchedPairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, left: u32, right: u32) -> bool {
        self.pairs.binary_search(&(left, right)).is_ok()
    }

    pub fn partner_of_left(&self, left: u32) -> Option<u32> {
        let i = self.pairs.partition_point(|p| p.0 < left);
        self.pairs.get(i).filter(|p| p.0 == left).map(|p| p.1)
    }

    pub fn partner_of_right(&self, right: u32) -> Option<u32> {
        self.pairs.iter().find(|p| p.1 == right).map(|p| p.0)
    }

    pub fn community_pairs(&self) -> impl Iterator<Item = (CommunityId, CommunityId)> + '_ {
        self.pairs.iter().map(|&(l, r)| {
            (
                CommunityId::new(self.left_layer.clone(), l),
                CommunityId::new(self.right_layer.clone(), r),
            )
        })
    }
}

/// Integer view of a CBG: positions instead of community indices.
struct Problem {
    left: Vec<u32>,
    right: Vec<u32>,
    /// `(left position, right position, scaled weight, original weight)`
    edges: Vec<(usize, usize, i64, f64)>,
}

impl Problem {
    fn new(cbg: &CommunityBipartiteGraph) -> Self {
        let left: Vec<u32> = cbg.left_nodes.keys().copied().collect();
        let right: Vec<u32> = cbg.right_nodes.keys().copied().collect();
        let max_w = cbg.edges.iter().map(|e| e.weight).fold(0.0f64, f64::max);
        let edges = cbg
            .edges
            .iter()
            .filter(|e| e.weight > 0.0)
            .map(|e| {
                let l = left.binary_search(&e.left()).expect("edge endpoint is a meta node");
                let r = right.binary_search(&e.right()).expect("edge endpoint is a meta node");
                (l, r, scale(e.weight, max_w), e.weight)
            })
            .collect();
        Problem { left, right, edges }
    }

    fn result(&self, cbg: &CommunityBipartiteGraph, chosen: &[(usize, usize)]) -> MatchedPairs {
        let mut pairs: Vec<(u32, u32)> =
            chosen.iter().map(|&(l, r)| (self.left[l], self.right[r])).collect();
        pairs.sort_unstable();
        let total_weight = pairs
            .iter()
            .map(|&(l, r)| cbg.edge(l, r).map_or(0.0, |e| e.weight))
            .sum();
        MatchedPairs {
            left_layer: cbg.left_layer.clone(),
            right_layer: cbg.right_layer.clone(),
            pairs,
            total_weight,
        }
    }
}

fn scale(w: f64, max_w: f64) -> i64 {
    ((w / max_w) * SCALE).round_ties_even().max(1.0) as i64
}

/// `Θ`: a maximum-total-weight one-to-one matching, lexicographically
/// smallest among the optimal ones.
pub fn max_flow_match(cbg: &CommunityBipartiteGraph) -> MatchedPairs {
    let p = Problem::new(cbg);
    if p.edges.is_empty() {
        return p.result(cbg, &[]);
    }
    let mut net = FlowNetwork::new(&p);
    net.augment_all();
    let matched = net.matching();
    let chosen = match net.duals() {
        Some(y) => lexicographic_optimum(&p, &y, &matched).unwrap_or(matched),
        None => matched,
    };
    p.result(cbg, &chosen)
}

/// Exhaustive oracle with the same objective and tie-break as
/// [`max_flow_match`].
pub fn brute_force_match(cbg: &CommunityBipartiteGraph) -> Result<MatchedPairs> {
    let nodes = cbg.left_nodes.len() + cbg.right_nodes.len();
    if nodes > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            nodes,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let p = Problem::new(cbg);
    let mut by_left: Vec<Vec<(usize, i64)>> = vec![Vec::new(); p.left.len()];
    for &(l, r, w, _) in &p.edges {
        by_left[l].push((r, w));
    }
    for adj in &mut by_left {
        adj.sort_unstable();
    }
    let mut search = Exhaustive {
        by_left: &by_left,
        used: vec![false; p.right.len()],
        current: Vec::new(),
        best: Vec::new(),
        best_weight: 0,
    };
    search.run(0, 0);
    Ok(p.result(cbg, &search.best))
}

struct Exhaustive<'a> {
    by_left: &'a [Vec<(usize, i64)>],
    used: Vec<bool>,
    current: Vec<(usize, usize)>,
    best: Vec<(usize, usize)>,
    best_weight: i64,
}

impl Exhaustive<'_> {
    fn run(&mut self, l: usize, weight: i64) {
        if l == self.by_left.len() {
            // positions are in index order, so sequences compare like pairs
            if weight > self.best_weight || (weight == self.best_weight && self.current < self.best)
            {
                self.best_weight = weight;
                self.best.clone_from(&self.current);
            }
            return;
        }
        for &(r, w) in &self.by_left[l] {
            if !self.used[r] {
                self.used[r] = true;
                self.current.push((l, r));
                self.run(l + 1, weight + w);
                self.current.pop();
                self.used[r] = false;
            }
        }
        self.run(l + 1, weight);
    }
}

/// Maximum number of pairs any one-to-one matching of the CBG can have,
/// by unit-capacity Edmonds-Karp.
pub fn max_cardinality(cbg: &CommunityBipartiteGraph) -> usize {
    max_cardinality_from(cbg, &[])
}

/// [`max_cardinality`] starting from a known matching of the same graph, so
/// only the missing augmentations are searched for. Pairs that are not meta
/// edges are ignored.
pub fn max_cardinality_from(cbg: &CommunityBipartiteGraph, seed: &[(u32, u32)]) -> usize {
    let p = Problem::new(cbg);
    let (nl, nr) = (p.left.len(), p.right.len());
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nl];
    for &(l, r, _, _) in &p.edges {
        adj[l].push(r);
    }
    let mut of_left: Vec<Option<usize>> = vec![None; nl];
    let mut of_right: Vec<Option<usize>> = vec![None; nr];
    let mut size = 0;
    for &(cl, cr) in seed {
        let (Ok(l), Ok(r)) = (p.left.binary_search(&cl), p.right.binary_search(&cr)) else {
            continue;
        };
        if adj[l].contains(&r) && of_left[l].is_none() && of_right[r].is_none() {
            of_left[l] = Some(r);
            of_right[r] = Some(l);
            size += 1;
        }
    }
    let mut reached_from = vec![usize::MAX; nr];
    let mut queued = vec![false; nl];
    let mut queue = VecDeque::new();
    loop {
        // one shortest augmenting path per breadth-first search
        reached_from.fill(usize::MAX);
        queued.fill(false);
        queue.clear();
        for l in (0..nl).filter(|&l| of_left[l].is_none()) {
            queued[l] = true;
            queue.push_back(l);
        }
        let mut free_end = None;
        'search: while let Some(l) = queue.pop_front() {
            for &r in &adj[l] {
                if reached_from[r] != usize::MAX {
                    continue;
                }
                reached_from[r] = l;
                match of_right[r] {
                    None => {
                        free_end = Some(r);
                        break 'search;
                    }
                    Some(l2) if !queued[l2] => {
                        queued[l2] = true;
                        queue.push_back(l2);
                    }
                    Some(_) => {}
                }
            }
        }
        let Some(mut r) = free_end else {
            return size;
        };
        loop {
            let l = reached_from[r];
            let previous = of_left[l].replace(r);
            of_right[r] = Some(l);
            match previous {
                Some(r2) => r = r2,
                None => break,
            }
        }
        size += 1;
    }
}

#[derive(Clone, Copy, Debug)]
struct Arc {
    to: usize,
    cap: i32,
    cost: i64,
}

/// Min-cost flow network `s -> lefts -> rights -> t` with costs `-w` on the
/// meta edges.
struct FlowNetwork {
    nl: usize,
    nr: usize,
    arcs: Vec<Arc>,
    out: Vec<Vec<usize>>,
    potential: Vec<i64>,
    flow: usize,
}

impl FlowNetwork {
    const SOURCE: usize = 0;

    fn sink(&self) -> usize {
        self.nl + self.nr + 1
    }

    fn left_node(l: usize) -> usize {
        1 + l
    }

    fn right_node(&self, r: usize) -> usize {
        1 + self.nl + r
    }

    fn new(p: &Problem) -> Self {
        let (nl, nr) = (p.left.len(), p.right.len());
        let n = nl + nr + 2;
        let mut net = FlowNetwork {
            nl,
            nr,
            arcs: Vec::new(),
            out: vec![Vec::new(); n],
            potential: vec![0; n],
            flow: 0,
        };
        for l in 0..nl {
            net.add_arc(Self::SOURCE, Self::left_node(l), 0);
        }
        for &(l, r, w, _) in &p.edges {
            let rn = net.right_node(r);
            net.add_arc(Self::left_node(l), rn, -w);
        }
        let sink = net.sink();
        for r in 0..nr {
            let rn = net.right_node(r);
            net.add_arc(rn, sink, 0);
        }
        // shortest distances on the initial DAG make every reduced cost >= 0
        let mut best_in = vec![0i64; nr];
        for &(_, r, w, _) in &p.edges {
            best_in[r] = best_in[r].min(-w);
        }
        for (r, &d) in best_in.iter().enumerate() {
            let rn = net.right_node(r);
            net.potential[rn] = d;
        }
        net.potential[sink] = best_in.iter().copied().min().unwrap_or(0);
        net
    }

    fn add_arc(&mut self, from: usize, to: usize, cost: i64) {
        self.out[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap: 1, cost });
        self.out[to].push(self.arcs.len());
        self.arcs.push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
        });
    }

    fn reduced(&self, from: usize, a: &Arc) -> i64 {
        a.cost + self.potential[from] - self.potential[a.to]
    }

    /// Augments along cheapest paths while they still increase the weight.
    ///
    /// After each Dijkstra pass every arc on a shortest path has reduced cost
    /// zero. When other free rights sit at the same distance, further
    /// disjoint paths of that length are pushed over the zero-cost subgraph
    /// before the potentials are recomputed.
    fn augment_all(&mut self) {
        let n = self.out.len();
        let sink = self.sink();
        let mut dist = vec![0i64; n];
        let mut via = vec![usize::MAX; n];
        let mut done = vec![false; n];
        let mut seen = vec![false; n];
        let mut heap = BinaryHeap::new();
        loop {
            dist.fill(i64::MAX);
            done.fill(false);
            heap.clear();
            dist[Self::SOURCE] = 0;
            heap.push(Reverse((0i64, Self::SOURCE)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if done[u] {
                    continue;
                }
                done[u] = true;
                if u == sink {
                    break;
                }
                for &ai in &self.out[u] {
                    let a = self.arcs[ai];
                    if a.cap == 0 || done[a.to] {
                        continue;
                    }
                    let nd = d + self.reduced(u, &a);
                    if nd < dist[a.to] {
                        dist[a.to] = nd;
                        via[a.to] = ai;
                        heap.push(Reverse((nd, a.to)));
                    }
                }
            }
            if !done[sink] {
                return;
            }
            let dt = dist[sink];
            for (v, p) in self.potential.iter_mut().enumerate() {
                *p += if done[v] { dist[v] } else { dt };
            }
            // true cost of the path now equals the sink potential
            if self.potential[sink] - self.potential[Self::SOURCE] >= 0 {
                return;
            }
            let mut v = sink;
            while v != Self::SOURCE {
                let ai = via[v];
                self.arcs[ai].cap -= 1;
                self.arcs[ai ^ 1].cap += 1;
                v = self.arcs[ai ^ 1].to;
            }
            self.flow += 1;
            if self.tied_right_remains() {
                seen.fill(false);
                while self.push_path(Self::SOURCE, &mut seen) {
                    self.flow += 1;
                }
            }
        }
    }

    fn admissible(&self, from: usize, ai: usize) -> bool {
        let a = &self.arcs[ai];
        a.cap > 0 && self.reduced(from, a) == 0
    }

    /// Whether some unmatched right still reaches the sink at zero reduced
    /// cost, i.e. another shortest path may exist.
    fn tied_right_remains(&self) -> bool {
        (0..self.nr).any(|r| {
            let rn = self.right_node(r);
            self.out[rn]
                .iter()
                .any(|&ai| self.arcs[ai].to == self.sink() && self.admissible(rn, ai))
        })
    }

    /// Depth-first search for a zero-cost augmenting path avoiding nodes
    /// already tried in this phase.
    fn push_path(&mut self, u: usize, seen: &mut [bool]) -> bool {
        if u == self.sink() {
            return true;
        }
        seen[u] = true;
        for i in 0..self.out[u].len() {
            let ai = self.out[u][i];
            let to = self.arcs[ai].to;
            if !seen[to] && self.admissible(u, ai) && self.push_path(to, seen) {
                self.arcs[ai].cap -= 1;
                self.arcs[ai ^ 1].cap += 1;
                return true;
            }
        }
        false
    }

    fn matching(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for l in 0..self.nl {
            for &ai in &self.out[Self::left_node(l)] {
                let a = self.arcs[ai];
                // forward meta arcs sit at even indices
                if ai % 2 == 0 && a.cap == 0 && a.to > self.nl && a.to != self.sink() {
                    out.push((l, a.to - 1 - self.nl));
                }
            }
        }
        out
    }

    /// Optimal dual `y` of the matching LP (`y_l + y_r >= w`, `y >= 0`),
    /// derived from shortest distances in the final residual graph where meta
    /// arcs are uncapacitated and a free sink-to-source arc closes the loop.
    fn duals(&self) -> Option<Vec<i64>> {
        let n = self.out.len();
        let sink = self.sink();
        let mut residual: Vec<(usize, usize, i64)> = Vec::new();
        for (ai, a) in self.arcs.iter().enumerate().step_by(2) {
            let from = self.arcs[ai ^ 1].to;
            let meta = from != Self::SOURCE && a.to != sink;
            if a.cap > 0 || meta {
                residual.push((from, a.to, a.cost));
            }
            if a.cap == 0 {
                residual.push((a.to, from, -a.cost));
            }
        }
        residual.push((sink, Self::SOURCE, 0));
        if self.flow > 0 {
            residual.push((Self::SOURCE, sink, 0));
        }
        let mut d = vec![0i64; n];
        let mut rounds = 0;
        loop {
            let mut changed = false;
            for &(u, v, c) in &residual {
                if d[u] + c < d[v] {
                    d[v] = d[u] + c;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            rounds += 1;
            if rounds > n {
                return None;
            }
        }
        let ds = d[Self::SOURCE];
        let mut y = vec![0i64; self.nl + self.nr];
        for l in 0..self.nl {
            y[l] = (d[Self::left_node(l)] - ds).max(0);
        }
        for r in 0..self.nr {
            y[self.nl + r] = (ds - d[self.right_node(r)]).max(0);
        }
        Some(y)
    }
}

/// Among matchings that use only tight edges and cover every vertex with a
/// positive dual (exactly the weight-maximal ones), builds the
/// lexicographically smallest: lefts in order take their smallest feasible
/// right, or stay unmatched when no optimal matching can match them.
///
/// Feasibility of covering both required sets at once reduces to covering
/// each separately (Mendelsohn-Dulmage), so two witness matchings are kept
/// and repaired with at most one augmenting path each per probe.
fn lexicographic_optimum(
    p: &Problem,
    y: &[i64],
    start: &[(usize, usize)],
) -> Option<Vec<(usize, usize)>> {
    let (nl, nr) = (p.left.len(), p.right.len());
    let mut tight: Vec<Vec<usize>> = vec![Vec::new(); nl];
    for &(l, r, w, _) in &p.edges {
        if y[l] + y[nl + r] == w {
            tight[l].push(r);
        }
    }
    for t in &mut tight {
        t.sort_unstable();
    }
    let need_left: Vec<bool> = (0..nl).map(|l| y[l] > 0).collect();
    let need_right: Vec<bool> = (0..nr).map(|r| y[nl + r] > 0).collect();

    let mut tight_rev = vec![Vec::new(); nr];
    for (l, rs) in tight.iter().enumerate() {
        for &r in rs {
            tight_rev[r].push(l);
        }
    }
    let mut state = Witnesses::new(&tight, &tight_rev);
    for &(l, r) in start {
        if need_left[l] {
            state.cover_left.link(l, r);
        }
        if need_right[r] {
            state.cover_right.link(l, r);
        }
    }
    let mut chosen = Vec::new();
    for l in 0..nl {
        let mut placed = false;
        for &r in &tight[l] {
            if state.removed_right[r] {
                continue;
            }
            if let Some(next) = state.probe(l, Some(r), &need_left, &need_right) {
                state = next;
                chosen.push((l, r));
                placed = true;
                break;
            }
        }
        if !placed {
            if need_left[l] {
                return None;
            }
            state = state.probe(l, None, &need_left, &need_right)?;
        }
    }
    Some(chosen)
}

#[derive(Clone)]
struct Witnesses<'a> {
    tight: &'a [Vec<usize>],
    /// right -> lefts over tight edges
    tight_rev: &'a [Vec<usize>],
    removed_left: Vec<bool>,
    removed_right: Vec<bool>,
    cover_left: Mate,
    cover_right: Mate,
}

#[derive(Clone)]
struct Mate {
    of_left: Vec<Option<usize>>,
    of_right: Vec<Option<usize>>,
}

impl Mate {
    fn link(&mut self, l: usize, r: usize) {
        self.of_left[l] = Some(r);
        self.of_right[r] = Some(l);
    }

    fn drop_left(&mut self, l: usize) -> Option<usize> {
        let r = self.of_left[l].take()?;
        self.of_right[r] = None;
        Some(r)
    }

    fn drop_right(&mut self, r: usize) -> Option<usize> {
        let l = self.of_right[r].take()?;
        self.of_left[l] = None;
        Some(l)
    }
}

impl<'a> Witnesses<'a> {
    fn new(tight: &'a [Vec<usize>], tight_rev: &'a [Vec<usize>]) -> Self {
        let (nl, nr) = (tight.len(), tight_rev.len());
        let mate = Mate {
            of_left: vec![None; nl],
            of_right: vec![None; nr],
        };
        Witnesses {
            tight,
            tight_rev,
            removed_left: vec![false; nl],
            removed_right: vec![false; nr],
            cover_left: mate.clone(),
            cover_right: mate,
        }
    }

    /// Removes `l` (and `r`, if fixing the pair `(l, r)`) and repairs both
    /// witnesses; `None` when a required vertex can no longer be covered.
    fn probe(
        &self,
        l: usize,
        r: Option<usize>,
        need_left: &[bool],
        need_right: &[bool],
    ) -> Option<Self> {
        let mut next = self.clone();
        next.removed_left[l] = true;
        if let Some(r) = r {
            next.removed_right[r] = true;
        }

        let mut orphan_left = Vec::new();
        next.cover_left.drop_left(l);
        if let Some(r) = r {
            orphan_left.extend(next.cover_left.drop_right(r));
        }
        for o in orphan_left {
            if need_left[o] && !next.augment_from_left(o) {
                return None;
            }
        }

        let mut orphan_right = Vec::new();
        orphan_right.extend(next.cover_right.drop_left(l));
        if let Some(r) = r {
            next.cover_right.drop_right(r);
        }
        for o in orphan_right {
            if Some(o) != r && need_right[o] && !next.augment_from_right(o) {
                return None;
            }
        }
        Some(next)
    }

    fn augment_from_left(&mut self, start: usize) -> bool {
        let nr = self.removed_right.len();
        let mut seen = vec![false; nr];
        self.kuhn_left(start, &mut seen)
    }

    fn kuhn_left(&mut self, l: usize, seen: &mut [bool]) -> bool {
        for i in 0..self.tight[l].len() {
            let r = self.tight[l][i];
            if self.removed_right[r] || seen[r] {
                continue;
            }
            seen[r] = true;
            let ok = match self.cover_left.of_right[r] {
                None => true,
                Some(l2) => self.kuhn_left(l2, seen),
            };
            if ok {
                self.cover_left.link(l, r);
                return true;
            }
        }
        false
    }

    fn augment_from_right(&mut self, start: usize) -> bool {
        let nl = self.removed_left.len();
        let mut seen = vec![false; nl];
        self.kuhn_right(start, &mut seen)
    }

    fn kuhn_right(&mut self, r: usize, seen: &mut [bool]) -> bool {
        for i in 0..self.tight_rev[r].len() {
            let l = self.tight_rev[r][i];
            if self.removed_left[l] || seen[l] {
                continue;
            }
            seen[l] = true;
            let ok = match self.cover_right.of_left[l] {
                None => true,
                Some(r2) => self.kuhn_right(r2, seen),
            };
            if ok {
                self.cover_right.link(l, r);
                return true;
            }
        }
        false
    }
}
