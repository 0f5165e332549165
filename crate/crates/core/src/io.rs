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

//! Text formats for layers, inter-layer edges, memberships and results.
//!
//! All writers are deterministic, so saving what was loaded reproduces the
//! file byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cbg::{CommunityBipartiteGraph, ExpandedEdgeSet};
use crate::community::{self, CommunityId, Membership};
use crate::engine::{KCommunityResult, KTuple, StepDiagnostics};
use crate::error::{Error, Result};
use crate::model::{InterLayerEdges, LayerGraph, LayerId, Mln, NodeId};
use crate::spec::StepKind;

pub const LAYER_SUFFIX: &str = ".layer.tsv";
pub const INTER_SUFFIX: &str = ".inter.tsv";
pub const MEMBERSHIP_SUFFIX: &str = ".membership.tsv";

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Non-blank, non-comment lines with their 1-based numbers.
fn content_lines<'a>(
    text: &'a str,
    comment: &'a [char],
) -> impl Iterator<Item = (usize, &'a str)> + 'a {
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let line = raw.trim_end_matches('\r');
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with(comment) {
            None
        } else {
            Some((i + 1, line))
        }
    })
}

fn node_field(s: &str, path: &str, line: usize) -> Result<NodeId> {
    s.trim()
        .parse::<u32>()
        .map(NodeId)
        .map_err(|_| Error::parse(path, line, format!("invalid node id {s:?}")))
}

fn layer_field(s: &str, path: &str, line: usize) -> Result<LayerId> {
    LayerId::new(s.trim()).map_err(|e| Error::parse(path, line, e.to_string()))
}

/// Parses a layer file of tab-separated lines:
///
/// ```text
/// layer  A
/// 1      optional label
/// 2
/// edge   1  2
/// ```
pub fn parse_layer(text: &str, path: &str) -> Result<LayerGraph> {
    let mut lines = content_lines(text, &[';']);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing `layer` header"))?;
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() != 2 || fields[0] != "layer" {
        return Err(Error::parse(path, hl, "expected `layer<TAB><id>`"));
    }
    let id = layer_field(fields[1], path, hl)?;
    let mut nodes = BTreeSet::new();
    let mut labels = Vec::new();
    let mut edges: Vec<(usize, NodeId, NodeId)> = Vec::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields[0] == "edge" {
            if fields.len() != 3 {
                return Err(Error::parse(path, ln, "expected `edge<TAB>u<TAB>v`"));
            }
            let u = node_field(fields[1], path, ln)?;
            let v = node_field(fields[2], path, ln)?;
            if u == v {
                return Err(Error::parse(path, ln, format!("self-loop on node {u}")));
            }
            edges.push((ln, u, v));
        } else {
            if fields.len() > 2 {
                return Err(Error::parse(path, ln, "expected `node[<TAB>label]`"));
            }
            let n = node_field(fields[0], path, ln)?;
            if !nodes.insert(n) {
                return Err(Error::parse(path, ln, format!("node {n} declared twice")));
            }
            if let Some(label) = fields.get(1) {
                labels.push((n, label.to_string()));
            }
        }
    }
    let mut seen = BTreeSet::new();
    for &(ln, u, v) in &edges {
        for n in [u, v] {
            if !nodes.contains(&n) {
                return Err(Error::parse(path, ln, format!("edge uses undeclared node {n}")));
            }
        }
        if !seen.insert((u.min(v), u.max(v))) {
            log::warn!("{path}:{ln}: duplicate edge ({u}, {v}) ignored");
        }
    }
    LayerGraph::new(id, nodes, edges.into_iter().map(|(_, u, v)| (u, v)))?.with_labels(labels)
}

pub fn render_layer(g: &LayerGraph) -> String {
    let mut out = format!("layer\t{}\n", g.id());
    for &n in g.nodes() {
        match g.label(n) {
            Some(label) => writeln!(out, "{n}\t{label}").unwrap(),
            None => writeln!(out, "{n}").unwrap(),
        }
    }
    for (u, v) in g.edges() {
        writeln!(out, "edge\t{u}\t{v}").unwrap();
    }
    out
}

pub fn load_layer(path: &Path) -> Result<LayerGraph> {
    parse_layer(&read_to_string(path)?, &path.display().to_string())
}

/// Parses an inter-layer file: `interlayer<TAB>L1<TAB>L2`, then `u<TAB>v`.
pub fn parse_interlayer(text: &str, path: &str) -> Result<InterLayerEdges> {
    let mut lines = content_lines(text, &[';']);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing `interlayer` header"))?;
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() != 3 || fields[0] != "interlayer" {
        return Err(Error::parse(path, hl, "expected `interlayer<TAB>L1<TAB>L2`"));
    }
    let from = layer_field(fields[1], path, hl)?;
    let to = layer_field(fields[2], path, hl)?;
    if from == to {
        return Err(Error::parse(path, hl, "inter-layer edges need two distinct layers"));
    }
    let mut links = BTreeSet::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::parse(path, ln, "expected `u<TAB>v`"));
        }
        let pair = (node_field(fields[0], path, ln)?, node_field(fields[1], path, ln)?);
        if !links.insert(pair) {
            log::warn!("{path}:{ln}: duplicate link ({}, {}) ignored", pair.0, pair.1);
        }
    }
    InterLayerEdges::new(from, to, links)
}

pub fn render_interlayer(x: &InterLayerEdges) -> String {
    let mut out = format!("interlayer\t{}\t{}\n", x.from_layer(), x.to_layer());
    for (u, v) in x.links() {
        writeln!(out, "{u}\t{v}").unwrap();
    }
    out
}

pub fn load_interlayer(path: &Path) -> Result<InterLayerEdges> {
    parse_interlayer(&read_to_string(path)?, &path.display().to_string())
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, std::path::PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if let Some(name) = entry.file_name().to_str() {
            out.push((name.to_string(), entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

/// Loads every `<ID>.layer.tsv` and `<L1>-<L2>.inter.tsv` in `dir`.
pub fn load_mln(dir: &Path) -> Result<Mln> {
    let entries = sorted_entries(dir)?;
    let mut mln = Mln::new();
    let invariant = |path: &Path, e: Error| Error::InvariantViolation {
        path: path.display().to_string(),
        source: Box::new(e),
    };
    for (name, path) in &entries {
        if name.ends_with(LAYER_SUFFIX) {
            let g = load_layer(path)?;
            mln.add_layer(g).map_err(|e| invariant(path, e))?;
        }
    }
    if mln.layers().next().is_none() {
        return Err(Error::EmptyInput(format!(
            "no *{LAYER_SUFFIX} files in {}",
            dir.display()
        )));
    }
    for (name, path) in &entries {
        if name.ends_with(INTER_SUFFIX) {
            let x = load_interlayer(path)?;
            mln.add_interlayer(x).map_err(|e| invariant(path, e))?;
        }
    }
    Ok(mln)
}

pub fn save_mln(mln: &Mln, dir: &Path) -> Result<()> {
    for g in mln.layers() {
        write_file(&dir.join(format!("{}{LAYER_SUFFIX}", g.id())), &render_layer(g))?;
    }
    for x in mln.interlayers() {
        let name = format!("{}-{}{INTER_SUFFIX}", x.from_layer(), x.to_layer());
        write_file(&dir.join(name), &render_interlayer(x))?;
    }
    Ok(())
}

/// Parses `node<TAB>community` rows; `#` starts a comment line.
pub fn parse_membership_rows(text: &str, path: &str) -> Result<Vec<(NodeId, u64)>> {
    content_lines(text, &['#'])
        .map(|(ln, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::parse(path, ln, "expected `node<TAB>community`"));
            }
            let n = node_field(fields[0], path, ln)?;
            let c = fields[1].trim().parse::<u64>().map_err(|_| {
                Error::parse(path, ln, format!("invalid community {:?}", fields[1]))
            })?;
            Ok((n, c))
        })
        .collect()
}

pub fn load_membership_file(path: &Path, g: &LayerGraph) -> Result<Membership> {
    let label = path.display().to_string();
    let rows = parse_membership_rows(&read_to_string(path)?, &label)?;
    community::load_membership(g, &rows).map_err(|e| Error::InvariantViolation {
        path: label,
        source: Box::new(e),
    })
}

/// Community-major order, so reloading keeps every index.
pub fn render_membership(m: &Membership) -> String {
    let mut out = format!("# layer {}: node\tcommunity\n", m.layer());
    for (c, members) in m.communities() {
        for n in members {
            writeln!(out, "{n}\t{c}").unwrap();
        }
    }
    out
}

pub fn membership_path(dir: &Path, layer: &LayerId) -> std::path::PathBuf {
    dir.join(format!("{layer}{MEMBERSHIP_SUFFIX}"))
}

/// Loads the `<ID>.membership.tsv` files present in `dir` for layers of `mln`.
pub fn load_memberships(dir: &Path, mln: &Mln) -> Result<BTreeMap<LayerId, Membership>> {
    let mut out = BTreeMap::new();
    for g in mln.layers() {
        let path = membership_path(dir, g.id());
        if path.is_file() {
            out.insert(g.id().clone(), load_membership_file(&path, g)?);
        }
    }
    Ok(out)
}

/// One paper-notation line per tuple.
pub fn render_result(tuples: &[KTuple]) -> String {
    tuples.iter().map(|t| t.render() + "\n").collect()
}

#[derive(Serialize, Deserialize)]
struct SlotRecord {
    layer: LayerId,
    community: u32,
}

#[derive(Serialize, Deserialize)]
struct EdgeRecord {
    step: (LayerId, LayerId),
    pairs: Vec<(NodeId, NodeId)>,
}

#[derive(Serialize, Deserialize)]
struct TupleRecord {
    slots: Vec<SlotRecord>,
    x: Vec<Option<EdgeRecord>>,
    total: bool,
}

pub fn render_jsonl(tuples: &[KTuple]) -> String {
    let mut out = String::new();
    for t in tuples {
        let record = TupleRecord {
            slots: t
                .slots
                .iter()
                .map(|c| SlotRecord {
                    layer: c.layer.clone(),
                    community: c.index,
                })
                .collect(),
            x: t
                .x
                .iter()
                .map(|x| {
                    x.as_ref().map(|e| EdgeRecord {
                        step: (e.left.layer.clone(), e.right.layer.clone()),
                        pairs: e.pairs.clone(),
                    })
                })
                .collect(),
            total: t.is_total(),
        };
        out.push_str(&serde_json::to_string(&record).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl(text: &str, path: &str) -> Result<Vec<KTuple>> {
    let mut out = Vec::new();
    for (ln, line) in content_lines(text, &[]) {
        let record: TupleRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(path, ln, e.to_string()))?;
        let slots: Vec<CommunityId> = record
            .slots
            .into_iter()
            .map(|s| CommunityId::new(s.layer, s.community))
            .collect();
        let find = |l: &LayerId| {
            slots
                .iter()
                .find(|c| &c.layer == l)
                .cloned()
                .ok_or_else(|| Error::parse(path, ln, format!("step layer {l} has no slot")))
        };
        let mut x = Vec::with_capacity(record.x.len());
        for e in record.x {
            x.push(match e {
                None => None,
                Some(e) => Some(ExpandedEdgeSet {
                    left: find(&e.step.0)?,
                    right: find(&e.step.1)?,
                    pairs: e.pairs,
                }),
            });
        }
        let t = KTuple { slots, x };
        if t.is_total() != record.total {
            return Err(Error::parse(path, ln, "`total` disagrees with the edge slots"));
        }
        out.push(t);
    }
    Ok(out)
}

fn kind_name(k: StepKind) -> &'static str {
    match k {
        StepKind::Extend => "extend",
        StepKind::Update => "update",
    }
}

/// Per-step counts; wall times are kept out so the file is reproducible.
pub fn render_diagnostics(diags: &[StepDiagnostics]) -> String {
    let mut out = String::from(
        "step\tleft\tright\tkind\tmetric\tu_left\tu_right\tcbg_edges\tdropped_edges\tmatched\tmax_cardinality\tconsistent\tno_match\tinconsistent\tasymmetric\tconverged\n",
    );
    for d in diags {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            d.step,
            d.left,
            d.right,
            kind_name(d.kind),
            d.metric,
            d.u_left,
            d.u_right,
            d.cbg_edges,
            d.dropped_edges,
            d.matched,
            d.max_cardinality,
            d.consistent,
            d.no_match,
            d.inconsistent,
            d.asymmetric,
            d.converged
        )
        .unwrap();
    }
    out
}

pub fn render_timings(diags: &[StepDiagnostics]) -> String {
    let mut out = String::from("step\tleft\tright\tseconds\n");
    for d in diags {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}",
            d.step,
            d.left,
            d.right,
            d.wall_time.as_secs_f64()
        )
        .unwrap();
    }
    out
}

/// Writes `result.txt`, `result.jsonl`, `diagnostics.tsv` and `timings.tsv`.
pub fn save_result(dir: &Path, result: &KCommunityResult) -> Result<()> {
    write_file(&dir.join("result.txt"), &render_result(&result.tuples))?;
    write_file(&dir.join("result.jsonl"), &render_jsonl(&result.tuples))?;
    write_file(&dir.join("diagnostics.tsv"), &render_diagnostics(&result.diagnostics))?;
    write_file(&dir.join("timings.tsv"), &render_timings(&result.diagnostics))
}

pub fn render_cbg(cbg: &CommunityBipartiteGraph) -> String {
    let mut out = String::from("left_community\tright_community\traw_pairs\tweight\n");
    for e in &cbg.edges {
        writeln!(out, "{}\t{}\t{}\t{}", e.left(), e.right(), e.raw_pairs(), e.weight).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::load_membership;

    #[test]
    fn three_line_layer() {
        let g = parse_layer("layer\tA\n1\n2\nedge\t1\t2\n", "a").unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (2, 1));
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = parse_layer("layer\tA\n1\n2\nedge\t1\t2\nedge\t2\t1\n", "a").unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn layer_errors_carry_lines() {
        let cases = [
            ("layer\tA\n1\nedge\t1\t2\n", 3),
            ("; c\nlayer\tA\n1\nx\n", 4),
            ("lay\tA\n", 1),
            ("layer\tA\n1\n1\n", 3),
            ("layer\tA\n1\nedge\t1\t1\n", 3),
            ("layer\tA\n1\nedge\t1\n", 3),
        ];
        for (text, line) in cases {
            match parse_layer(text, "f") {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(matches!(parse_layer("layer\t9x\n", "f"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn layer_round_trip() {
        let text = "layer\tA\n1\tnm0001\n2\n5\tsome name\nedge\t1\t2\nedge\t2\t5\n";
        let g = parse_layer(text, "a").unwrap();
        assert_eq!(g.label(NodeId(1)), Some("nm0001"));
        assert_eq!(render_layer(&g), text);
        let messy = "; comment\nlayer\tA\n\n5\tsome name\n2\nedge\t5\t2\n1\tnm0001\nedge\t2\t1\n";
        assert_eq!(render_layer(&parse_layer(messy, "a").unwrap()), text);
    }

    #[test]
    fn interlayer_round_trip() {
        let text = "interlayer\tA\tD\n1\t10\n2\t10\n";
        let x = parse_interlayer(text, "x").unwrap();
        assert_eq!(x.len(), 2);
        assert_eq!(render_interlayer(&x), text);
        assert!(matches!(
            parse_interlayer("interlayer\tA\tA\n", "x"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_interlayer("interlayer\tA\tD\n1 10\n", "x"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn membership_round_trip_keeps_indices() {
        let g = parse_layer("layer\tA\n1\n2\n3\n4\n", "a").unwrap();
        // community 1 holds the larger node ids
        let m = load_membership(&g, &[(NodeId(3), 1), (NodeId(4), 1), (NodeId(1), 2), (NodeId(2), 2)]).unwrap();
        let text = render_membership(&m);
        let rows = parse_membership_rows(&text, "m").unwrap();
        let again = load_membership(&g, &rows).unwrap();
        assert_eq!(again, m);
        assert_eq!(render_membership(&again), text);
        assert!(matches!(
            parse_membership_rows("1\tx\n", "m"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn mln_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write_file(&dir.path().join("A.layer.tsv"), "layer\tA\n1\n2\nedge\t1\t2\n").unwrap();
        write_file(&dir.path().join("D.layer.tsv"), "layer\tD\n10\n").unwrap();
        write_file(&dir.path().join("A-D.inter.tsv"), "interlayer\tA\tD\n1\t10\n").unwrap();
        let mln = load_mln(dir.path()).unwrap();
        let out = tempfile::tempdir().unwrap();
        save_mln(&mln, out.path()).unwrap();
        for name in ["A.layer.tsv", "D.layer.tsv", "A-D.inter.tsv"] {
            assert_eq!(
                fs::read(dir.path().join(name)).unwrap(),
                fs::read(out.path().join(name)).unwrap()
            );
        }
        write_file(&dir.path().join("D-A.inter.tsv"), "interlayer\tD\tA\n10\t2\n").unwrap();
        assert!(matches!(load_mln(dir.path()), Err(Error::InvariantViolation { .. })));
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(load_mln(empty.path()), Err(Error::EmptyInput(_))));
    }

    fn sample_tuples() -> Vec<KTuple> {
        let a = LayerId::new("A").unwrap();
        let d = LayerId::new("D").unwrap();
        let m = LayerId::new("M").unwrap();
        let total = KTuple {
            slots: vec![
                CommunityId::new(a.clone(), 2),
                CommunityId::new(d.clone(), 1),
                CommunityId::new(m.clone(), 2),
            ],
            x: vec![
                Some(ExpandedEdgeSet {
                    left: CommunityId::new(a.clone(), 2),
                    right: CommunityId::new(d.clone(), 1),
                    pairs: vec![(NodeId(1), NodeId(10)), (NodeId(2), NodeId(10))],
                }),
                Some(ExpandedEdgeSet {
                    left: CommunityId::new(d.clone(), 1),
                    right: CommunityId::new(m.clone(), 2),
                    pairs: vec![(NodeId(10), NodeId(20))],
                }),
            ],
        };
        let partial = KTuple {
            slots: vec![
                CommunityId::new(a.clone(), 1),
                CommunityId::new(d.clone(), 2),
                CommunityId::new(m, 0),
            ],
            x: vec![
                Some(ExpandedEdgeSet {
                    left: CommunityId::new(a, 1),
                    right: CommunityId::new(d, 2),
                    pairs: vec![(NodeId(3), NodeId(11))],
                }),
                None,
            ],
        };
        vec![total, partial]
    }

    #[test]
    fn result_formats() {
        let tuples = sample_tuples();
        assert_eq!(
            render_result(&tuples),
            "< c_A^2, c_D^1, c_M^2 ; x_{A,D}, x_{D,M} >\n< c_A^1, c_D^2, 0 ; x_{A,D}, phi >\n"
        );
        let jsonl = render_jsonl(&tuples);
        assert_eq!(
            jsonl.lines().nth(1).unwrap(),
            r#"{"slots":[{"layer":"A","community":1},{"layer":"D","community":2},{"layer":"M","community":0}],"x":[{"step":["A","D"],"pairs":[[3,11]]},null],"total":false}"#
        );
        assert_eq!(parse_jsonl(&jsonl, "r").unwrap(), tuples);
        assert!(matches!(parse_jsonl("{}\n", "r"), Err(Error::Parse { line: 1, .. })));
    }
}
