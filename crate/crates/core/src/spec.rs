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

//! Serial k-community specifications.
//!
//! ```text
//! spec  := LAYER (theta LAYER)+
//! theta := '#(' LAYER ',' LAYER ')' (':' ('e' | 'd' | 'h'))?
//! ```
//!
//! `Θ_{A,D}` is accepted in place of `#(A,D)`. Compositions evaluate left to
//! right; redundant parentheses around a left prefix are tolerated, anything
//! that would group a right operand is rejected.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cbg::Metric;
use crate::error::{Error, Result};
use crate::model::{is_identifier, LayerId, Mln};

/// One `Θ_{left,right}` step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Composition {
    pub left: LayerId,
    pub right: LayerId,
    /// Falls back to the run's default metric when absent.
    pub metric: Option<Metric>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepKind {
    /// The right layer is new: tuples gain a community slot.
    Extend,
    /// Both layers were already visited: tuples only gain an edge slot.
    Update,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KSpec {
    pub first: LayerId,
    pub steps: Vec<Composition>,
}

impl KSpec {
    /// Distinct layers in visit order.
    pub fn layers(&self) -> Vec<LayerId> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for l in std::iter::once(&self.first).chain(self.steps.iter().map(|s| &s.right)) {
            if seen.insert(l) {
                out.push(l.clone());
            }
        }
        out
    }

    pub fn k(&self) -> usize {
        self.layers().len()
    }

    /// Kind of every step, judged by whether its right layer was visited.
    pub fn step_kinds(&self) -> Vec<StepKind> {
        let mut seen: BTreeSet<&LayerId> = [&self.first].into_iter().collect();
        self.steps
            .iter()
            .map(|s| {
                if seen.insert(&s.right) {
                    StepKind::Extend
                } else {
                    StepKind::Update
                }
            })
            .collect()
    }

    pub fn cycle_steps(&self) -> usize {
        self.step_kinds()
            .iter()
            .filter(|&&k| k == StepKind::Update)
            .count()
    }

    /// ASCII surface form, e.g. `A #(A,D) D #(D,M):h M`.
    pub fn render(&self) -> String {
        let mut s = self.first.to_string();
        for c in &self.steps {
            s.push_str(&format!(" #({},{})", c.left, c.right));
            if let Some(m) = c.metric {
                s.push_str(&format!(":{m}"));
            }
            s.push_str(&format!(" {}", c.right));
        }
        s
    }

    /// Report form, e.g. `A Θ_{A,D} D`.
    pub fn render_unicode(&self) -> String {
        let mut s = self.first.to_string();
        for c in &self.steps {
            s.push_str(&format!(" Θ_{{{},{}}}", c.left, c.right));
            if let Some(m) = c.metric {
                s.push_str(&format!(":{m}"));
            }
            s.push_str(&format!(" {}", c.right));
        }
        s
    }
}

impl fmt::Display for KSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A spec checked against an MLN, with every step classified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidatedSpec {
    spec: KSpec,
    kinds: Vec<StepKind>,
    layers: Vec<LayerId>,
}

impl ValidatedSpec {
    pub fn spec(&self) -> &KSpec {
        &self.spec
    }

    pub fn steps(&self) -> impl Iterator<Item = (&Composition, StepKind)> {
        self.spec.steps.iter().zip(self.kinds.iter().copied())
    }

    pub fn kinds(&self) -> &[StepKind] {
        &self.kinds
    }

    pub fn layers(&self) -> &[LayerId] {
        &self.layers
    }

    pub fn k(&self) -> usize {
        self.layers.len()
    }

    pub fn cycle_steps(&self) -> usize {
        self.kinds.iter().filter(|&&k| k == StepKind::Update).count()
    }

    /// Slot position of `layer` in result tuples.
    pub fn slot_of(&self, layer: &LayerId) -> Option<usize> {
        self.layers.iter().position(|l| l == layer)
    }
}

pub fn validate_spec(spec: &KSpec, mln: &Mln) -> Result<ValidatedSpec> {
    let mut visited: BTreeSet<&LayerId> = BTreeSet::new();
    for l in std::iter::once(&spec.first).chain(spec.steps.iter().flat_map(|s| [&s.left, &s.right]))
    {
        if mln.layer(l).is_none() {
            return Err(Error::UnknownLayer(l.clone()));
        }
    }
    visited.insert(&spec.first);
    for s in &spec.steps {
        if s.left == s.right {
            return Err(Error::SubscriptMismatch {
                column: 0,
                message: format!("{} is composed with itself", s.left),
            });
        }
        if !visited.contains(&s.left) {
            return Err(Error::DisconnectedSpec(s.left.clone()));
        }
        if !mln.has_interlayer(&s.left, &s.right) {
            return Err(Error::MissingInterLayerEdges(s.left.clone(), s.right.clone()));
        }
        visited.insert(&s.right);
    }
    if spec.steps.is_empty() {
        return Err(Error::EmptySpec);
    }
    Ok(ValidatedSpec {
        kinds: spec.step_kinds(),
        layers: spec.layers(),
        spec: spec.clone(),
    })
}

pub fn parse_spec(text: &str) -> Result<KSpec> {
    if text.trim().is_empty() {
        return Err(Error::EmptySpec);
    }
    Parser::new(text).spec()
}

/// Parses a specification file: one spec per line, `;` starts a comment,
/// blank lines are skipped. Errors carry the 1-based line number.
pub fn parse_spec_file(text: &str, path: &str) -> Result<Vec<KSpec>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split(';').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        out.push(parse_spec(body).map_err(|e| Error::parse(path, i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// `(left, right, metric, column)` of one composition operator.
type Operator = (LayerId, LayerId, Option<Metric>, usize);

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn found(&self) -> String {
        match self.peek() {
            Some(c) => format!("{c:?}"),
            None => "end of input".to_string(),
        }
    }

    fn syntax(&self, expected: &str) -> Error {
        Error::Syntax {
            column: self.column(),
            expected: expected.to_string(),
            found: self.found(),
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("{c:?}")))
        }
    }

    fn layer(&mut self) -> Result<(LayerId, usize)> {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
        {
            self.pos += 1;
        }
        let word: String = self.chars[start..self.pos].iter().collect();
        if !is_identifier(&word) {
            self.pos = start;
            return Err(self.syntax("layer name"));
        }
        Ok((LayerId::new(word)?, start + 1))
    }

    /// Parses `#(L,R)` or `Θ_{L,R}` plus an optional metric suffix.
    fn operator(&mut self) -> Result<Option<Operator>> {
        self.skip_ws();
        let column = self.column();
        let close = match self.peek() {
            Some('#') => {
                self.pos += 1;
                self.expect('(')?;
                ')'
            }
            Some('Θ') => {
                self.pos += 1;
                self.expect('_')?;
                self.expect('{')?;
                '}'
            }
            _ => return Ok(None),
        };
        let (l, _) = self.layer()?;
        self.expect(',')?;
        let (r, _) = self.layer()?;
        self.expect(close)?;
        let metric = if self.peek() == Some(':') {
            self.pos += 1;
            let m = match self.peek() {
                Some('e') => Metric::Edges,
                Some('d') => Metric::Density,
                Some('h') => Metric::Hubs,
                _ => return Err(self.syntax("metric e, d or h")),
            };
            self.pos += 1;
            Some(m)
        } else {
            None
        };
        Ok(Some((l, r, metric, column)))
    }

    /// Consumes `)` tokens closing left-prefix groups.
    fn closers(&mut self, depth: &mut usize) -> Result<()> {
        loop {
            self.skip_ws();
            if self.peek() != Some(')') {
                return Ok(());
            }
            if *depth == 0 {
                return Err(self.syntax("operator"));
            }
            *depth -= 1;
            self.pos += 1;
        }
    }

    fn spec(&mut self) -> Result<KSpec> {
        let mut depth = 0usize;
        loop {
            self.skip_ws();
            if self.peek() == Some('(') {
                depth += 1;
                self.pos += 1;
            } else {
                break;
            }
        }
        let (first, _) = self.layer()?;
        self.closers(&mut depth)?;
        let mut visited: BTreeSet<LayerId> = [first.clone()].into_iter().collect();
        let mut previous = first.clone();
        let mut steps = Vec::new();
        loop {
            self.skip_ws();
            if self.peek().is_none() {
                break;
            }
            let Some((left, right, metric, op_column)) = self.operator()? else {
                return Err(self.syntax("'#(' or 'Θ_{'"));
            };
            self.skip_ws();
            if self.peek() == Some('(') {
                return Err(Error::NonSerial {
                    column: self.column(),
                });
            }
            let (operand, operand_column) = self.layer()?;
            if right != operand {
                return Err(Error::SubscriptMismatch {
                    column: operand_column,
                    message: format!("operator names {right} but the operand is {operand}"),
                });
            }
            if left == right {
                return Err(Error::SubscriptMismatch {
                    column: op_column,
                    message: format!("{left} is composed with itself"),
                });
            }
            if left != previous && !visited.contains(&left) {
                return Err(Error::SubscriptMismatch {
                    column: op_column,
                    message: format!(
                        "left subscript {left} is neither {previous} nor an earlier layer"
                    ),
                });
            }
            visited.insert(right.clone());
            previous = right.clone();
            steps.push(Composition {
                left,
                right,
                metric,
            });
            self.closers(&mut depth)?;
        }
        if steps.is_empty() {
            return Err(self.syntax("'#(' or 'Θ_{'"));
        }
        if depth > 0 {
            return Err(self.syntax("')'"));
        }
        Ok(KSpec { first, steps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InterLayerEdges, LayerGraph, NodeId};
    use proptest::prelude::*;

    fn lid(s: &str) -> LayerId {
        LayerId::new(s).unwrap()
    }

    fn comp(l: &str, r: &str) -> Composition {
        Composition {
            left: lid(l),
            right: lid(r),
            metric: None,
        }
    }

    #[test]
    fn two_layer_spec() {
        let s = parse_spec("A #(A,D) D").unwrap();
        assert_eq!(s.first, lid("A"));
        assert_eq!(s.steps, vec![comp("A", "D")]);
        assert_eq!(s.k(), 2);
        assert_eq!(s.cycle_steps(), 0);
    }

    #[test]
    fn cyclic_spec() {
        let s = parse_spec("M #(M,A) A #(A,D) D #(D,M) M").unwrap();
        assert_eq!(s.k(), 3);
        assert_eq!(s.steps.len(), 3);
        assert_eq!(
            s.step_kinds(),
            vec![StepKind::Extend, StepKind::Extend, StepKind::Update]
        );
        assert_eq!(s.layers(), vec![lid("M"), lid("A"), lid("D")]);
    }

    #[test]
    fn subscript_must_match_operand() {
        assert!(matches!(
            parse_spec("A #(A,X) D"),
            Err(Error::SubscriptMismatch { column: 10, .. })
        ));
        assert!(matches!(
            parse_spec("A #(Q,D) D"),
            Err(Error::SubscriptMismatch { .. })
        ));
        assert!(matches!(
            parse_spec("A #(A,A) A"),
            Err(Error::SubscriptMismatch { .. })
        ));
    }

    #[test]
    fn left_operand_may_be_any_visited_layer() {
        let s = parse_spec("(G2 #(G2,G3) G3) #(G2,G1) G1").unwrap();
        assert_eq!(s.steps, vec![comp("G2", "G3"), comp("G2", "G1")]);
    }

    #[test]
    fn metric_suffix_and_unicode() {
        let s = parse_spec("A Θ_{A,D}:h D #(D,M):e M").unwrap();
        assert_eq!(s.steps[0].metric, Some(Metric::Hubs));
        assert_eq!(s.steps[1].metric, Some(Metric::Edges));
        assert_eq!(s.render(), "A #(A,D):h D #(D,M):e M");
        assert_eq!(s.render_unicode(), "A Θ_{A,D}:h D Θ_{D,M}:e M");
        assert_eq!(parse_spec(&s.render_unicode()).unwrap(), s);
    }

    #[test]
    fn rejects_malformed() {
        assert!(matches!(parse_spec("   "), Err(Error::EmptySpec)));
        assert!(matches!(parse_spec(""), Err(Error::EmptySpec)));
        assert!(matches!(
            parse_spec("A"),
            Err(Error::Syntax { column: 2, .. })
        ));
        assert!(matches!(parse_spec("A #(A,D)"), Err(Error::Syntax { .. })));
        assert!(parse_spec("A # (A,D) D").is_ok());
        assert!(matches!(parse_spec("A #(A,D):x D"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_spec("A D"), Err(Error::Syntax { column: 3, .. })));
        assert!(matches!(parse_spec("(A #(A,D) D"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_spec("A #(A,D) D)"), Err(Error::Syntax { .. })));
        assert!(matches!(
            parse_spec("A #(A,D) (D #(D,M) M)"),
            Err(Error::NonSerial { column: 10 })
        ));
    }

    #[test]
    fn spec_file_lines() {
        let text = "; two specs\nA #(A,D) D\n\nA #(A,D) D #(D,M) M ; trailing\n";
        let specs = parse_spec_file(text, "specs.txt").unwrap();
        assert_eq!(specs.len(), 2);
        let err = parse_spec_file("A #(A,D) D\nA #(A,X) D\n", "specs.txt").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    fn path_mln(extra: bool) -> Mln {
        let mut mln = Mln::new();
        for (i, name) in ["G1", "G2", "G3"].iter().enumerate() {
            let n = NodeId(i as u32);
            mln.add_layer(LayerGraph::new(lid(name), [n], []).unwrap())
                .unwrap();
        }
        let mut link = |a: &str, b: &str, u: u32, v: u32| {
            mln.add_interlayer(
                InterLayerEdges::new(lid(a), lid(b), [(NodeId(u), NodeId(v))]).unwrap(),
            )
            .unwrap();
        };
        link("G1", "G2", 0, 1);
        link("G2", "G3", 1, 2);
        if extra {
            link("G3", "G1", 2, 0);
        }
        mln
    }

    #[test]
    fn validation() {
        let path = path_mln(false);
        let v = validate_spec(&parse_spec("G1 #(G1,G2) G2 #(G2,G3) G3").unwrap(), &path).unwrap();
        assert_eq!(v.kinds(), &[StepKind::Extend, StepKind::Extend]);
        assert_eq!(v.k(), 3);
        let cyclic = parse_spec("G1 #(G1,G2) G2 #(G2,G3) G3 #(G3,G1) G1").unwrap();
        assert!(matches!(
            validate_spec(&cyclic, &path),
            Err(Error::MissingInterLayerEdges(..))
        ));
        let v = validate_spec(&cyclic, &path_mln(true)).unwrap();
        assert_eq!(v.kinds().last(), Some(&StepKind::Update));
        assert_eq!(v.cycle_steps(), 1);
        assert!(matches!(
            validate_spec(&parse_spec("G1 #(G1,G9) G9").unwrap(), &path),
            Err(Error::UnknownLayer(_))
        ));
        let detached = KSpec {
            first: lid("G1"),
            steps: vec![comp("G2", "G3")],
        };
        assert!(matches!(
            validate_spec(&detached, &path),
            Err(Error::DisconnectedSpec(_))
        ));
    }

    fn arb_spec() -> impl Strategy<Value = KSpec> {
        let names = ["A", "B", "C", "D", "E"];
        (0usize..5, proptest::collection::vec((any::<prop::sample::Index>(), 0usize..5, 0usize..4), 1..6))
            .prop_filter_map("self composition", move |(first, raw)| {
                let mut visited = vec![names[first]];
                let mut steps = Vec::new();
                for (li, r, m) in raw {
                    let left = *li.get(&visited);
                    let right = names[r];
                    if left == right {
                        return None;
                    }
                    if !visited.contains(&right) {
                        visited.push(right);
                    }
                    let metric = [None, Some(Metric::Edges), Some(Metric::Density), Some(Metric::Hubs)][m];
                    steps.push(Composition { left: lid(left), right: lid(right), metric });
                }
                Some(KSpec { first: lid(names[first]), steps })
            })
    }

    proptest! {
        #[test]
        fn render_round_trips(s in arb_spec()) {
            prop_assert_eq!(parse_spec(&s.render()).unwrap(), s.clone());
            prop_assert_eq!(parse_spec(&s.render_unicode()).unwrap(), s.clone());
            let spaced = s.render().replace(' ', "   ");
            prop_assert_eq!(parse_spec(&spaced).unwrap(), s.clone());
        }

        #[test]
        fn arity_counts(s in arb_spec()) {
            let kinds = s.step_kinds();
            let extends = kinds.iter().filter(|&&k| k == StepKind::Extend).count();
            prop_assert_eq!(s.k(), extends + 1);
            prop_assert_eq!(s.steps.len(), s.k() - 1 + s.cycle_steps());
        }
    }
}
