#![allow(dead_code)]

use std::path::PathBuf;

use gmtannot::gmt::parse_str;
use gmtannot::transduce::read_marks;
use gmtannot::{
    seed_registry, AltGroup, AnnotationDocument, Feature, GmtDialect, LayerSet, NodeRef, Pointer, PrimaryDoc,
    Relation, Seg, SpanUnit, StructNode, TabularRecord,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LISTINGS: [&str; 8] = [
    "paul.gmt.xml",
    "du.gmt.xml",
    "pomme.gmt.xml",
    "bouche.gmt.xml",
    "phonetic.gmt.xml",
    "landmark.gmt.xml",
    "morpho.gmt.xml",
    "syntactic.gmt.xml",
];

pub fn testdata(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("testdata").join(name)
}

pub fn read(name: &str) -> String {
    std::fs::read_to_string(testdata(name)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const WORDS: [&str; 10] = [
    "chat", "queue", "aimer", "pomme de terre", "l'été", "a&b", "<x>", "\"q\"", "naïve", "42",
];
const TYPES: [&str; 5] = ["W-level", "MSAnnot", "phonetic", "phrase", "syntactic"];

fn value(rng: &mut ChaCha8Rng) -> String {
    (*WORDS.choose(rng).unwrap()).to_owned()
}

/// Categories of the seed registry, minus `confidence` which alternatives
/// carry as a field of their own.
fn categories() -> Vec<String> {
    seed_registry()
        .categories()
        .map(|c| c.name.clone())
        .filter(|c| c != "confidence")
        .collect()
}

fn feature(rng: &mut ChaCha8Rng, cats: &[String], depth: usize) -> Feature {
    let f = Feature::new(cats.choose(rng).unwrap().clone(), value(rng));
    if depth < 2 && rng.gen_bool(0.1) {
        let n = rng.gen_range(1..=2);
        let children = (0..n).map(|_| feature(rng, cats, depth + 1)).collect();
        f.with_children(children)
    } else {
        f
    }
}

fn pointer(rng: &mut ChaCha8Rng) -> Pointer {
    let frag = format!("w{}", rng.gen_range(1..20));
    if rng.gen_bool(0.2) {
        Pointer::in_doc("text", frag).unwrap()
    } else {
        Pointer::new(frag).unwrap()
    }
}

fn seg(rng: &mut ChaCha8Rng) -> Seg {
    if rng.gen_bool(0.5) {
        let n = rng.gen_range(1..=3);
        Seg::targets((0..n).map(|_| pointer(rng)).collect()).unwrap()
    } else {
        let s = rng.gen_range(0..1000);
        let e = s + rng.gen_range(0..500);
        let unit = if rng.gen_bool(0.5) { SpanUnit::CharacterOffset } else { SpanUnit::TimeUnit };
        Seg::span(s, e, unit).unwrap()
    }
}

struct Gen<'a> {
    rng: &'a mut ChaCha8Rng,
    cats: Vec<String>,
    next_id: usize,
    max_depth: usize,
    max_fanout: usize,
}

impl Gen<'_> {
    fn node(&mut self, depth: usize) -> StructNode {
        let mut n = StructNode::new(*TYPES.choose(self.rng).unwrap());
        if self.rng.gen_bool(0.4) {
            self.next_id += 1;
            n.id = Some(format!("n{}", self.next_id));
        }
        if self.rng.gen_bool(0.5) {
            n.seg = Some(seg(self.rng));
        }
        for _ in 0..self.rng.gen_range(0..4) {
            n.features.push(feature(self.rng, &self.cats, 0));
        }
        if self.rng.gen_bool(0.15) {
            let groups = self.rng.gen_range(2..=3);
            let with_conf = self.rng.gen_bool(0.6);
            for _ in 0..groups {
                let fs = (0..self.rng.gen_range(1..=3)).map(|_| feature(self.rng, &self.cats, 0)).collect();
                let mut g = AltGroup::new(fs);
                if with_conf {
                    // eighths keep the sum of a node's groups at most 1
                    g = g.with_confidence(f64::from(self.rng.gen_range(0..=2u8)) / 8.0);
                }
                if depth < self.max_depth && self.rng.gen_bool(0.2) {
                    g = g.with_children(vec![self.leaf()]);
                }
                n.alternatives.push(g);
            }
        }
        if self.rng.gen_bool(0.1) {
            let targets = (0..self.rng.gen_range(1..=2)).map(|_| pointer(self.rng)).collect();
            let mut r = Relation::new("coref", targets, self.rng.gen_bool(0.7)).unwrap();
            if self.rng.gen_bool(0.5) {
                r = r.with_source(pointer(self.rng));
            }
            n.relations.push(r);
        }
        if depth < self.max_depth {
            let fanout = self.rng.gen_range(0..=self.max_fanout);
            // keep trees from exploding: deeper levels branch less often
            let fanout = if self.rng.gen_bool(0.5 / (depth as f64 + 1.0)) { fanout } else { fanout.min(1) };
            for _ in 0..fanout {
                let c = self.node(depth + 1);
                n.children.push(c);
            }
        }
        n
    }

    fn leaf(&mut self) -> StructNode {
        let mut n = StructNode::new("W-level");
        n.features.push(feature(self.rng, &self.cats, 0));
        n
    }
}

/// A random well-formed document: depth at most `max_depth`, at most
/// `max_fanout` children per node, features from the seed registry.
pub fn random_document(rng: &mut ChaCha8Rng, max_depth: usize, max_fanout: usize) -> AnnotationDocument {
    let mut g = Gen {
        rng,
        cats: categories(),
        next_id: 0,
        max_depth,
        max_fanout,
    };
    let root = g.node(0);
    let level = if g.rng.gen_bool(0.3) { "MSAnnot".to_owned() } else { root.node_type.clone() };
    let mut doc = AnnotationDocument::new("rand", &level, &root.node_type).unwrap();
    doc.root = root;
    if g.rng.gen_bool(0.5) {
        doc = doc.with_primary_ref("text");
    }
    doc
}

fn ascii_word(rng: &mut ChaCha8Rng, min: usize) -> String {
    const ALPHA: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.,!?'-_()";
    let n = rng.gen_range(min..=8);
    (0..n).map(|_| *ALPHA.choose(rng).unwrap() as char).collect()
}

/// A flat sentence of tagger records over random ASCII tokens.
pub fn random_records(rng: &mut ChaCha8Rng) -> Vec<TabularRecord> {
    let morph_cats = ["gender", "number", "tense", "person", "case", "mood"];
    (0..rng.gen_range(1..=12))
        .map(|_| {
            let mut r = TabularRecord::new(ascii_word(rng, 1)).unwrap();
            if rng.gen_bool(0.8) {
                r = r.with_lemma(ascii_word(rng, 1));
            }
            if rng.gen_bool(0.8) {
                r = r.with_pos(ascii_word(rng, 1).to_uppercase());
            }
            for _ in 0..rng.gen_range(0..3) {
                r = r.with_morph(*morph_cats.choose(rng).unwrap(), ascii_word(rng, 1));
            }
            r
        })
        .collect()
}

pub fn listing(name: &str, doc_id: &str) -> AnnotationDocument {
    parse_str(&read(name), GmtDialect::lenient(), doc_id).unwrap().document
}

/// "la queue du chat" with its marks, the morpho listing over it and the
/// syntactic listing over the morpho layer.
pub fn chat_layers() -> LayerSet {
    let mut text = PrimaryDoc::text("text", read("chat.txt").trim_end());
    read_marks(&mut text, &read("chat.marks.tsv")).unwrap();
    let mut ls = LayerSet::new();
    ls.add_primary(text).unwrap();
    ls.add_annotation(listing("morpho.gmt.xml", "morpho").with_primary_ref("text")).unwrap();
    ls.add_annotation(listing("syntactic.gmt.xml", "syn").with_primary_ref("morpho")).unwrap();
    ls
}

/// Primary "bouche" with one mark.
pub fn bouche_primary() -> LayerSet {
    let mut ls = LayerSet::new();
    ls.add_primary(PrimaryDoc::text("text", "bouche").with_mark("w1", 0, 6).unwrap()).unwrap();
    ls
}

/// One reading of "bouche" as a single-node layer over `#w1`.
pub fn reading(doc_id: &str, features: &[(&str, &str)]) -> AnnotationDocument {
    let mut d = AnnotationDocument::new(doc_id, "W-level", "W-level").unwrap().with_primary_ref("text");
    let r = NodeRef::root();
    d.set_seg(&r, Seg::target(Pointer::new("w1").unwrap())).unwrap();
    for (c, v) in features {
        d.add_feature(&r, Feature::new(*c, *v)).unwrap();
    }
    d
}

pub fn verb_reading() -> AnnotationDocument {
    reading("a", &[("lemma", "boucher"), ("pos", "VERB"), ("tense", "present")])
}

pub fn noun_reading() -> AnnotationDocument {
    reading("b", &[("lemma", "bouche"), ("pos", "NOUN")])
}

/// `doc` with every alternative's confidence removed.
pub fn without_confidence(mut doc: AnnotationDocument) -> AnnotationDocument {
    fn strip(n: &mut StructNode) {
        for g in &mut n.alternatives {
            g.confidence = None;
            g.children.iter_mut().for_each(strip);
        }
        n.children.iter_mut().for_each(strip);
    }
    strip(&mut doc.root);
    doc
}
