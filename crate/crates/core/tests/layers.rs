mod common;

use common::*;
use gmtannot::transduce::Disambiguation;
use gmtannot::{
    canonicalize, covered_text, diff, export_tabular, merge, select_alternative, validate_anchors, DiffOptions,
    ExportOptions, FindingKind, MergePolicy, NodeRef, Pointer, Seg,
};

#[test]
fn noun_phrase_resolves_through_morpho_layer() {
    let ls = chat_layers();
    let ct = covered_text("syn", &NodeRef::root(), &ls).unwrap();
    assert_eq!(ct.text, "le chat");
    assert_eq!(ct.lemma_fallback, ["morpho/0/1"]);
    assert!(validate_anchors(&ls).diagnostics.iter().all(|d| !d.is_error()));
}

#[test]
fn deleting_a_mark_leaves_one_dangling_pointer() {
    let mut ls = chat_layers();
    ls.primary_docs.get_mut("text").unwrap().marks.remove("w4");
    let report = validate_anchors(&ls);
    assert_eq!(report.count("unresolved-reference"), 1, "{:?}", report.diagnostics);
    assert_eq!(report.diagnostics.iter().filter(|d| d.is_error()).count(), 1);
}

#[test]
fn two_node_cycle() {
    let mut ls = chat_layers();
    let mut a = reading("x", &[]);
    let mut b = reading("y", &[]);
    a.primary_refs = vec!["y".into()];
    b.primary_refs = vec!["x".into()];
    a.root.id = Some("p".into());
    b.root.id = Some("q".into());
    a.set_seg(&NodeRef::root(), Seg::target(Pointer::new("q").unwrap())).unwrap();
    b.set_seg(&NodeRef::root(), Seg::target(Pointer::new("p").unwrap())).unwrap();
    ls.add_annotation(a).unwrap();
    ls.add_annotation(b).unwrap();
    assert_eq!(validate_anchors(&ls).count("cyclic-anchor"), 1);
}

#[test]
fn merged_readings_reproduce_the_alternatives_listing() {
    let ls = bouche_primary();
    let merged = merge(&verb_reading(), &noun_reading(), &ls, MergePolicy::AsAlternatives).unwrap();
    let mut listing = without_confidence(listing("bouche.gmt.xml", "a")).with_primary_ref("text");
    listing.level = merged.level.clone();
    assert_eq!(canonicalize(&merged), canonicalize(&listing));
}

#[test]
fn diff_of_the_two_readings() {
    let ls = bouche_primary();
    let r = diff(&verb_reading(), &noun_reading(), &ls, DiffOptions::default()).unwrap();
    assert_eq!(r.matched, 1);
    assert_eq!(r.agreement, 0.0);
    let cats: Vec<_> = r.conflicts().map(|f| f.category.as_str()).collect();
    assert_eq!(cats, ["lemma", "pos", "tense"]);
    assert_eq!(r.conflicts().last().unwrap().value_b, "");
}

#[test]
fn diff_of_a_listing_with_itself() {
    let ls = chat_layers();
    let d = ls.annotation("morpho").unwrap();
    let r = diff(d, d, &ls, DiffOptions::default()).unwrap();
    assert_eq!(r.conflicts().count(), 0);
    assert_eq!(r.agreement, 1.0);
    assert_eq!(r.findings.iter().filter(|f| f.kind == FindingKind::Equal).count(), r.matched);
}

#[test]
fn merge_is_idempotent_on_listings() {
    let ls = chat_layers();
    for id in ["morpho", "syn"] {
        let d = ls.annotation(id).unwrap();
        for p in [MergePolicy::Union, MergePolicy::PreferA, MergePolicy::AsAlternatives] {
            assert_eq!(&merge(d, d, &ls, p).unwrap(), d, "{id} {p:?}");
        }
    }
}

#[test]
fn highest_confidence_reading_is_exported() {
    let mut ls = bouche_primary();
    ls.add_annotation(listing("bouche.gmt.xml", "bouche").with_primary_ref("text")).unwrap();
    let opts = ExportOptions {
        disambiguation: Disambiguation::HighestConfidence,
        ..Default::default()
    };
    let r = export_tabular(&ls, "bouche", opts).unwrap();
    assert_eq!(r[0].to_string(), "bouche\tbouche\tNOUN");
}

#[test]
fn argmax_ignores_positive_scaling() {
    let doc = listing("bouche.gmt.xml", "bouche");
    let base = select_alternative(&doc.root.alternatives);
    for k in [1e-6, 0.5, 1.0, 2.0, 7.5, 1e6] {
        let mut groups = doc.root.alternatives.clone();
        for g in &mut groups {
            g.confidence = g.confidence.map(|c| c * k);
        }
        assert_eq!(select_alternative(&groups), base, "{k}");
    }
}
