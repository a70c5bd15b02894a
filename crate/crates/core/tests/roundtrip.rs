mod common;

use gmtannot::gmt::parse_str;
use gmtannot::transduce::{import_records, write_tabular, DOC_ID};
use gmtannot::{canonical_bytes, canonicalize, export_tabular, serialize, ExportOptions, GmtDialect};
use proptest::prelude::*;

fn round_trip(seed: u64) {
    let doc = common::random_document(&mut common::rng(seed), 6, 5);
    let bytes = serialize(&doc, GmtDialect::canonical()).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let back = parse_str(&text, GmtDialect::strict(), "rand.gmt.xml").unwrap();
    assert!(back.diagnostics.is_empty(), "{:?}", back.diagnostics);
    assert_eq!(back.document, doc, "seed {seed}:\n{text}");
    let once = canonicalize(&doc);
    assert_eq!(canonicalize(&once), once);
    assert_eq!(canonical_bytes(&back.document).unwrap(), canonical_bytes(&doc).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn random_documents_survive_serialization(seed in any::<u64>()) {
        round_trip(seed);
    }

    #[test]
    fn flat_records_survive_import_and_export(seed in any::<u64>()) {
        let records = common::random_records(&mut common::rng(seed));
        let layers = import_records(std::slice::from_ref(&records), None).unwrap();
        let back = export_tabular(&layers, DOC_ID, ExportOptions::default()).unwrap();
        prop_assert_eq!(&back, &records);
        let marks: Vec<_> = layers.primary_docs[0].marks.values().copied().collect();
        let mut sorted = marks.clone();
        sorted.sort();
        prop_assert!(sorted.windows(2).all(|w| w[0].1 <= w[1].0 && w[0].0 < w[1].0));
        prop_assert_eq!(write_tabular(&[back]), write_tabular(&[records]));
    }
}

#[test]
fn first_thousand_seeds() {
    for seed in 0..1000 {
        round_trip(seed);
    }
}

#[test]
fn generated_documents_are_nontrivial() {
    let sizes: Vec<usize> = (0..50)
        .map(|s| common::random_document(&mut common::rng(s), 6, 5).node_count())
        .collect();
    assert!(sizes.iter().any(|&n| n > 10), "{sizes:?}");
    let depth = (0..50)
        .map(|s| {
            let d = common::random_document(&mut common::rng(s), 6, 5);
            d.iterate(gmtannot::Order::Pre).iter().map(|r| r.depth()).max().unwrap()
        })
        .max()
        .unwrap();
    assert!((3..=6).contains(&depth), "{depth}");
}
