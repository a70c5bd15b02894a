//! One line per acceptance criterion; exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use gmtannot::gmt::parse_str;
use gmtannot::transduce::{import_records, import_tabular, Disambiguation, DOC_ID, PRIMARY_ID};
use gmtannot::{
    canonical_bytes, canonicalize, covered_text, export_tabular, merge, parse_registry, seed_registry,
    select_alternative, serialize, validate_anchors, AltGroup, ExportOptions, Feature, GmtDialect, MergePolicy,
    NodeRef, Pointer, Seg,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn golden_round_trips() -> Outcome {
    let start = Instant::now();
    let reg = seed_registry();
    for name in LISTINGS {
        let doc = parse_str(&read(name), GmtDialect::lenient(), name).map_err(|e| format!("{name}: {e}"))?.document;
        let errors = reg.validate(&doc).into_iter().chain(doc.check()).filter(|d| d.is_error()).count();
        ensure(errors == 0, || format!("{name}: {errors} registry errors"))?;
        let bytes = serialize(&doc, GmtDialect::canonical()).map_err(|e| format!("{name}: {e}"))?;
        let text = String::from_utf8(bytes).map_err(|e| e.to_string())?;
        let back = parse_str(&text, GmtDialect::strict(), name).map_err(|e| format!("{name}: {e}"))?;
        ensure(back.document == doc, || format!("{name}: round trip differs"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{} listings in {elapsed:?}", LISTINGS.len()))
}

fn property_suite() -> Outcome {
    let mut nodes = 0;
    for seed in 0..1000 {
        let doc = random_document(&mut rng(seed), 6, 5);
        nodes += doc.node_count();
        let bytes = serialize(&doc, GmtDialect::canonical()).map_err(|e| format!("seed {seed}: {e}"))?;
        let text = String::from_utf8(bytes).map_err(|e| e.to_string())?;
        let back = parse_str(&text, GmtDialect::strict(), "rand").map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(back.document == doc, || format!("seed {seed}: round trip differs"))?;
        let once = canonicalize(&doc);
        ensure(canonicalize(&once) == once, || format!("seed {seed}: canonicalize not idempotent"))?;
    }
    Ok(format!("1000 documents, {nodes} nodes, 0 failures"))
}

fn cross_level_resolution() -> Outcome {
    let ls = chat_layers();
    let ct = covered_text("syn", &NodeRef::root(), &ls).map_err(|e| e.to_string())?;
    ensure(ct.text == "le chat", || format!("covered text {:?}", ct.text))?;
    let w32 = ls.annotation("morpho").map_err(|e| e.to_string())?.find_node("w3.2").map_err(|e| e.to_string())?;
    let expected = format!("morpho{w32}");
    ensure(ct.lemma_fallback == [expected.clone()], || format!("fallback {:?}", ct.lemma_fallback))?;
    Ok(format!("{:?} via lemma of {expected}", ct.text))
}

fn pivot_transduction() -> Outcome {
    let tsv = read("paul.tsv");
    let ls = import_tabular(&tsv, Some(read("paul.txt").trim_end())).map_err(|e| e.to_string())?;
    let doc = ls.annotation(DOC_ID).map_err(|e| e.to_string())?;
    let listing = listing("paul.gmt.xml", DOC_ID).with_primary_ref(PRIMARY_ID);
    ensure(canonical_bytes(doc).ok() == canonical_bytes(&listing).ok(), || "import differs from listing".into())?;
    let back = export_tabular(&ls, DOC_ID, ExportOptions::default()).map_err(|e| e.to_string())?;
    let lines: Vec<String> = back.iter().map(ToString::to_string).collect();
    ensure(lines == tsv.lines().collect::<Vec<_>>(), || format!("export {lines:?}"))?;
    for seed in 0..500 {
        let records = random_records(&mut rng(seed));
        let ls = import_records(std::slice::from_ref(&records), None).map_err(|e| format!("seed {seed}: {e}"))?;
        let back = export_tabular(&ls, DOC_ID, ExportOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(back == records, || format!("seed {seed}: round trip differs"))?;
    }
    Ok("listing reproduced, export inverts it, 500 random sequences".into())
}

fn alternatives_semantics() -> Outcome {
    let mut ls = bouche_primary();
    let merged = merge(&verb_reading(), &noun_reading(), &ls, MergePolicy::AsAlternatives).map_err(|e| e.to_string())?;
    let reference = without_confidence(listing("bouche.gmt.xml", "a"));
    ensure(canonicalize(&merged).root == canonicalize(&reference).root, || "merge differs from listing".into())?;

    ls.add_annotation(listing("bouche.gmt.xml", "bouche").with_primary_ref("text")).map_err(|e| e.to_string())?;
    let opts = ExportOptions {
        disambiguation: Disambiguation::HighestConfidence,
        ..Default::default()
    };
    let r = export_tabular(&ls, "bouche", opts).map_err(|e| e.to_string())?;
    ensure(r.len() == 1 && r[0].to_string() == "bouche\tbouche\tNOUN", || format!("selected {r:?}"))?;

    let mut g = rng(7);
    for trial in 0..500 {
        let groups: Vec<AltGroup> = (0..g.gen_range(2..6))
            .map(|_| AltGroup::new(vec![Feature::new("pos", "X")]).with_confidence(f64::from(g.gen_range(0..20u8)) / 20.0))
            .collect();
        let base = select_alternative(&groups);
        let k: f64 = g.gen_range(0.001..1000.0);
        let scaled: Vec<AltGroup> = groups
            .iter()
            .map(|x| x.clone().with_confidence(x.confidence.unwrap_or_default() * k))
            .collect();
        ensure(select_alternative(&scaled) == base, || format!("trial {trial}: argmax moved under x{k}"))?;
    }
    Ok("merge matches listing, 0.6 reading selected, argmax stable on 500 scalings".into())
}

fn registry_enforcement() -> Outcome {
    let closed = parse_registry(&read("pos-closed.registry")).map_err(|e| e.to_string())?;
    for name in LISTINGS {
        let doc = listing(name, "d");
        let n = closed.validate(&doc).iter().filter(|d| d.is_error()).count();
        ensure(n == 0, || format!("{name}: {n} errors"))?;
    }
    let mut doc = listing("paul.gmt.xml", "d");
    let w2 = NodeRef::root().child(1);
    doc.set_feature(&w2, "pos", "XYZ").map_err(|e| e.to_string())?;
    let errors: Vec<_> = closed.validate(&doc).into_iter().filter(|d| d.is_error()).collect();
    ensure(errors.len() == 1 && errors[0].code == "closed-value", || format!("{errors:?}"))?;
    Ok("listings clean, XYZ gives one closed-value error".into())
}

fn anchor_validation() -> Outcome {
    let mut ls = chat_layers();
    ls.primary_docs.get_mut("text").ok_or("no primary")?.marks.remove("w4");
    let report = validate_anchors(&ls);
    let unresolved = report.count("unresolved-reference");
    let errors = report.diagnostics.iter().filter(|d| d.is_error()).count();
    ensure(unresolved == 1 && errors == 1, || format!("{:?}", report.diagnostics))?;

    let mut ls = chat_layers();
    let mut a = reading("x", &[]);
    let mut b = reading("y", &[]);
    a.primary_refs = vec!["y".into()];
    b.primary_refs = vec!["x".into()];
    a.root.id = Some("p".into());
    b.root.id = Some("q".into());
    a.root.seg = Some(Seg::target(Pointer::new("q").map_err(|e| e.to_string())?));
    b.root.seg = Some(Seg::target(Pointer::new("p").map_err(|e| e.to_string())?));
    ls.add_annotation(a).map_err(|e| e.to_string())?;
    ls.add_annotation(b).map_err(|e| e.to_string())?;
    let cycles = validate_anchors(&ls).count("cyclic-anchor");
    ensure(cycles >= 1, || "no cyclic-anchor diagnostic".into())?;
    Ok("w4 deletion gives 1 unresolved reference, cycle detected".into())
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("golden round-trips", golden_round_trips),
        ("property suite", property_suite),
        ("cross-level resolution", cross_level_resolution),
        ("pivot transduction", pivot_transduction),
        ("alternatives semantics", alternatives_semantics),
        ("registry enforcement", registry_enforcement),
        ("anchor validation", anchor_validation),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
