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

mod common;

use std::collections::BTreeMap;

use common::*;
use hemln::engine::detect_k_community_with;
use hemln::io::{
    load_memberships, load_mln, membership_path, parse_jsonl, render_jsonl, render_membership, save_mln, write_file,
};
use hemln::{parse_spec, prepare_layers, validate_spec, Execution, KSpec, LayerId, Metric, Mln};
use proptest::prelude::*;

fn detect(mln: &Mln, spec: &KSpec, seed: u64, exec: Execution) -> hemln::KCommunityResult {
    let ids: Vec<LayerId> = mln.layer_ids().cloned().collect();
    let table = prepare_layers(mln, &ids, BTreeMap::new(), seed, 0.8, exec).unwrap();
    let v = validate_spec(spec, mln).unwrap();
    detect_k_community_with(mln, &table, &v, Metric::Edges, exec).unwrap()
}

#[test]
fn fixture_survives_a_disk_round_trip() {
    let dir = fixture_dir().join("running_example");
    let mln = load_mln(&dir).unwrap();
    let memberships = load_memberships(&dir, &mln).unwrap();
    assert_eq!(mln.layer_ids().count(), 3);
    assert_eq!(memberships.len(), 3);

    let tmp = tempfile::tempdir().unwrap();
    save_mln(&mln, tmp.path()).unwrap();
    for (l, m) in &memberships {
        write_file(&membership_path(tmp.path(), l), &render_membership(m)).unwrap();
    }
    let again = load_mln(tmp.path()).unwrap();
    assert_eq!(again, mln);
    assert_eq!(load_memberships(tmp.path(), &again).unwrap(), memberships);
}

#[test]
fn expanded_sets_match_their_slots() {
    for seed in 0..20u64 {
        let mut rng = rng(seed);
        let mln = random_mln(&mut rng);
        let table = detected_table(&mln, seed);
        let spec = random_spec(&mut rng, &mln);
        let v = validate_spec(&spec, &mln).unwrap();
        let result = detect_k_community_with(&mln, &table, &v, Metric::Edges, Execution::Sequential).unwrap();
        for t in &result.tuples {
            for (step, x) in spec.steps.iter().zip(&t.x) {
                let Some(x) = x else { continue };
                let (ls, rs) = (v.slot_of(&step.left).unwrap(), v.slot_of(&step.right).unwrap());
                assert_eq!(x.left, t.slots[ls], "{}", spec.render());
                assert_eq!(x.right, t.slots[rs], "{}", spec.render());
                assert!(!x.is_empty());
                let links = mln.interlayer(&step.left, &step.right).unwrap();
                let (lm, rm) = (&table[&step.left].membership, &table[&step.right].membership);
                for &(a, b) in &x.pairs {
                    assert!(links.links().contains(&(a, b)));
                    assert_eq!(lm.community_of(a), Some(x.left.index));
                    assert_eq!(rm.community_of(b), Some(x.right.index));
                }
            }
        }
    }
}

#[test]
fn results_survive_jsonl() {
    let mut rng = rng(3);
    let mln = random_mln(&mut rng);
    let spec = cyclic_triple(&mut rng, &mln);
    let result = detect(&mln, &spec, 3, Execution::Sequential);
    assert!(!result.tuples.is_empty());
    let text = render_jsonl(&result.tuples);
    assert_eq!(parse_jsonl(&text, "result.jsonl").unwrap(), result.tuples);
}

#[test]
fn later_steps_keep_the_base_pairs() {
    // the first composition alone fixes which pairs exist; later steps only fill slots
    let mut rng = rng(5);
    let mln = random_mln(&mut rng);
    let spec = random_spec(&mut rng, &mln);
    let base = KSpec {
        first: spec.first.clone(),
        steps: spec.steps[..1].to_vec(),
    };
    let full = detect(&mln, &spec, 5, Execution::Sequential);
    let first = detect(&mln, &base, 5, Execution::Sequential);
    let pairs = |r: &hemln::KCommunityResult| -> Vec<(u32, u32)> {
        let step = &spec.steps[0];
        let (ls, rs) = (r.spec.slot_of(&step.left).unwrap(), r.spec.slot_of(&step.right).unwrap());
        r.tuples.iter().map(|t| (t.slots[ls].index, t.slots[rs].index)).collect()
    };
    assert_eq!(pairs(&full), pairs(&first));
}

#[test]
fn bad_spec_text_is_rejected_before_running() {
    let mln = load_mln(&fixture_dir().join("running_example")).unwrap();
    for text in ["G1 #(G1,G2) G4", "G1 #(G1,G2) G2 #(G1,G3) (G3)", "G1 #(G2,G1) G2", ""] {
        let rejected = parse_spec(text).and_then(|s| validate_spec(&s, &mln));
        assert!(rejected.is_err(), "{text:?} accepted");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parallel_matches_sequential(seed in 0u64..1_000_000) {
        let mut rng = rng(seed);
        let mln = random_mln(&mut rng);
        let spec = random_spec(&mut rng, &mln);
        let seq = detect(&mln, &spec, seed, Execution::Sequential);
        let par = detect(&mln, &spec, seed, Execution::Parallel);
        prop_assert_eq!(&seq.tuples, &par.tuples);
        let counts = |r: &hemln::KCommunityResult| {
            r.diagnostics.iter().map(|d| (d.matched, d.consistent, d.no_match, d.inconsistent)).collect::<Vec<_>>()
        };
        prop_assert_eq!(counts(&seq), counts(&par));
    }

    #[test]
    fn tuple_slots_hold_distinct_communities(seed in 0u64..1_000_000) {
        // one-to-one matching means no community appears in two tuples' slot
        let mut rng = rng(seed);
        let mln = random_mln(&mut rng);
        let spec = random_spec(&mut rng, &mln);
        let r = detect(&mln, &spec, seed, Execution::Sequential);
        for s in 0..r.spec.k() {
            let mut used: Vec<u32> = r.tuples.iter().map(|t| t.slots[s].index).filter(|&c| c != 0).collect();
            let n = used.len();
            used.sort_unstable();
            used.dedup();
            prop_assert_eq!(used.len(), n);
        }
    }
}
