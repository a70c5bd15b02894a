//! Operations across annotation layers: merging parallel annotations,
//! diffing them, and reading the text a node covers.
//!
//! Two nodes from different layers are parallel when they project to the
//! same set of primary extents. Partial overlap does not count as a match.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use crate::anchoring::{node_in, project_to_primary, resolve, AnchorTarget, Extent, LayerSet};
use crate::error::{Error, Result};
use crate::model::{AltGroup, AnnotationDocument, Feature, NodeRef, Order, SpanUnit, StructNode};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoveredText {
    pub text: String,
    /// Sub-token components rendered by their lemma, as `doc` + node path.
    pub lemma_fallback: Vec<String>,
}

enum Piece {
    Span(Extent),
    Lemma(String),
}

fn layers_with(layers: &LayerSet, doc: &AnnotationDocument) -> Result<LayerSet> {
    let mut ls = layers.clone();
    ls.put_annotation(doc.clone())?;
    Ok(ls)
}

/// A node that splits a token it shares with its siblings, like the parts
/// of a fused "du": it projects to nothing of its own, or to exactly its
/// parent's extents, while the parent has several children.
fn is_sub_token(doc_id: &str, at: &NodeRef, layers: &LayerSet) -> Result<bool> {
    let Some(parent) = at.parent() else {
        return Ok(false);
    };
    let p = node_in(layers, doc_id, &parent)?;
    if p.children.len() < 2 {
        return Ok(false);
    }
    let own = project_to_primary(doc_id, at, layers)?;
    let parent_ext = project_to_primary(doc_id, &parent, layers)?;
    Ok(!parent_ext.is_empty() && (own.is_empty() || own == parent_ext))
}

fn collect_pieces(
    doc_id: &str,
    at: &NodeRef,
    layers: &LayerSet,
    stack: &mut Vec<(String, NodeRef)>,
    fallback: &mut Vec<String>,
    out: &mut Vec<Piece>,
) -> Result<()> {
    let key = (doc_id.to_owned(), at.clone());
    if stack.contains(&key) {
        return Err(Error::CyclicAnchor(format!("{doc_id}{at}")));
    }
    let node = node_in(layers, doc_id, at)?;
    if is_sub_token(doc_id, at, layers)? {
        if let Some(lemma) = node.feature("lemma") {
            fallback.push(format!("{doc_id}{at}"));
            out.push(Piece::Lemma(lemma.trim().to_owned()));
            return Ok(());
        }
    }
    stack.push(key);
    if let Some(seg) = &node.seg {
        for a in resolve(seg, doc_id, layers)? {
            match a.target {
                AnchorTarget::Extent(e) => out.push(Piece::Span(e)),
                AnchorTarget::Node { doc_id: d, node: n } => collect_pieces(&d, &n, layers, stack, fallback, out)?,
            }
        }
    } else {
        for i in 0..node.children.len() {
            collect_pieces(doc_id, &at.child(i), layers, stack, fallback, out)?;
        }
    }
    stack.pop();
    Ok(())
}

/// Primary text under a node, in order. Adjacent extents are concatenated
/// and gaps become a single space. Sub-token components without a surface
/// of their own are rendered by their lemma.
pub fn covered_text(doc_id: &str, node: &NodeRef, layers: &LayerSet) -> Result<CoveredText> {
    let mut pieces = Vec::new();
    let mut fallback = Vec::new();
    collect_pieces(doc_id, node, layers, &mut Vec::new(), &mut fallback, &mut pieces)?;
    let mut text = String::new();
    let mut prev: Option<Extent> = None;
    for piece in pieces {
        match piece {
            Piece::Lemma(l) => {
                if !text.is_empty() {
                    text.push(' ');
                }
                text.push_str(&l);
                prev = None;
            }
            Piece::Span(e) => {
                if e.unit != SpanUnit::CharacterOffset {
                    return Err(Error::NotTextual(format!(
                        "{}..{} in {} is a time span",
                        e.starts_at, e.ends_at, e.doc_id
                    )));
                }
                let primary = layers.primary(&e.doc_id)?;
                let mut start = e.starts_at;
                let mut sep = !text.is_empty();
                if let Some(p) = &prev {
                    if p.doc_id == e.doc_id && e.starts_at <= p.ends_at {
                        // adjacent or overlapping: continue without a gap
                        start = start.max(p.ends_at);
                        sep = false;
                    }
                }
                if start < e.ends_at {
                    if sep {
                        text.push(' ');
                    }
                    text.push_str(&primary.slice(start, e.ends_at).unwrap_or_default());
                }
                let end = prev
                    .as_ref()
                    .filter(|p| p.doc_id == e.doc_id)
                    .map_or(e.ends_at, |p| p.ends_at.max(e.ends_at));
                prev = Some(Extent { ends_at: end, ..e });
            }
        }
    }
    Ok(CoveredText {
        text,
        lemma_fallback: fallback,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergePolicy {
    Union,
    PreferA,
    AsAlternatives,
}

impl std::str::FromStr for MergePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(MergePolicy::Union),
            "prefer-a" => Ok(MergePolicy::PreferA),
            "as-alternatives" => Ok(MergePolicy::AsAlternatives),
            _ => Err(Error::InvalidArgument(format!("unknown merge policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
struct Participant {
    at: NodeRef,
    extents: Vec<Extent>,
}

fn participants(doc: &AnnotationDocument, layers: &LayerSet, with_root: bool) -> Result<Vec<Participant>> {
    let mut out = Vec::new();
    for at in doc.iterate(Order::Pre) {
        if at.is_root() && !with_root {
            continue;
        }
        let extents = project_to_primary(&doc.doc_id, &at, layers)?;
        if !extents.is_empty() {
            out.push(Participant { at, extents });
        }
    }
    Ok(out)
}

fn check_compatible(pa: &[Participant], pb: &[Participant]) -> Result<()> {
    let docs = |p: &[Participant]| {
        p.iter()
            .flat_map(|x| x.extents.iter().map(|e| e.doc_id.clone()))
            .collect::<BTreeSet<_>>()
    };
    let (da, db) = (docs(pa), docs(pb));
    if !da.is_empty() && !db.is_empty() && da != db {
        return Err(Error::IncompatibleLayers(format!(
            "layers anchor into {da:?} and {db:?}"
        )));
    }
    Ok(())
}

struct Matching {
    pairs: Vec<(usize, usize)>,
    only_a: Vec<usize>,
    only_b: Vec<usize>,
}

fn match_participants(pa: &[Participant], pb: &[Participant]) -> Matching {
    let mut used = vec![false; pa.len()];
    let mut pairs = Vec::new();
    let mut only_b = Vec::new();
    for (j, b) in pb.iter().enumerate() {
        match (0..pa.len()).find(|&i| !used[i] && pa[i].extents == b.extents) {
            Some(i) => {
                used[i] = true;
                pairs.push((i, j));
            }
            None => only_b.push(j),
        }
    }
    let only_a = (0..pa.len()).filter(|&i| !used[i]).collect();
    Matching { pairs, only_a, only_b }
}

fn label(n: &StructNode, at: &NodeRef) -> String {
    n.id.clone().unwrap_or_else(|| at.to_string())
}

fn remove_shared(mut a: Vec<Feature>, b: &[Feature]) -> (Vec<Feature>, Vec<Feature>, Vec<Feature>) {
    let mut shared = Vec::new();
    let mut b_rest = Vec::new();
    for f in b {
        if let Some(i) = a.iter().position(|x| x == f) {
            shared.push(a.remove(i));
        } else {
            b_rest.push(f.clone());
        }
    }
    (shared, a, b_rest)
}

fn combine(target: &mut StructNode, other: &StructNode, policy: MergePolicy) {
    match policy {
        MergePolicy::Union => {
            for f in &other.features {
                if !target.features.contains(f) {
                    target.features.push(f.clone());
                }
            }
        }
        MergePolicy::PreferA => {
            for f in &other.features {
                if !target.features.iter().any(|x| x.category == f.category) {
                    target.features.push(f.clone());
                }
            }
        }
        MergePolicy::AsAlternatives => {
            let (shared, a_rest, b_rest) = remove_shared(std::mem::take(&mut target.features), &other.features);
            if a_rest.is_empty() || b_rest.is_empty() {
                target.features = shared;
                target.features.extend(a_rest);
                target.features.extend(b_rest);
            } else {
                target.features = shared;
                target.alternatives.push(AltGroup::new(a_rest));
                target.alternatives.push(AltGroup::new(b_rest));
            }
        }
    }
    let take_alts = policy != MergePolicy::PreferA || target.alternatives.is_empty();
    if take_alts {
        for g in &other.alternatives {
            if !target.alternatives.contains(g) {
                target.alternatives.push(g.clone());
            }
        }
    }
    for r in &other.relations {
        if !target.relations.contains(r) {
            target.relations.push(r.clone());
        }
    }
    if target.seg.is_none() {
        target.seg = other.seg.clone();
    }
}

/// Renames ids in `node` that collide with `taken`, recording new ones.
fn freshen_ids(node: &mut StructNode, taken: &mut HashSet<String>) {
    if let Some(id) = &node.id {
        if taken.contains(id) {
            let mut k = 1;
            while taken.contains(&format!("{id}.{k}")) {
                k += 1;
            }
            node.id = Some(format!("{id}.{k}"));
        }
        taken.insert(node.id.clone().expect("set above"));
    }
    for g in &mut node.alternatives {
        for c in &mut g.children {
            freshen_ids(c, taken);
        }
    }
    for c in &mut node.children {
        freshen_ids(c, taken);
    }
}

type Key = (String, u64, u64);

fn first_key(extents: &[Extent]) -> Option<Key> {
    extents.first().map(|e| (e.doc_id.clone(), e.starts_at, e.ends_at))
}

struct MergeCtx<'a> {
    a: &'a AnnotationDocument,
    b: &'a AnnotationDocument,
    policy: MergePolicy,
    a_keys: HashMap<NodeRef, Key>,
    b_keys: HashMap<NodeRef, Key>,
    partner_of_a: HashMap<NodeRef, NodeRef>,
    /// Unmatched b nodes to insert, by the a node or b node hosting them.
    hosted_a: HashMap<NodeRef, Vec<NodeRef>>,
    hosted_b: HashMap<NodeRef, Vec<NodeRef>>,
    participating_b: HashSet<NodeRef>,
    taken: HashSet<String>,
}

fn shallow(n: &StructNode) -> StructNode {
    StructNode {
        children: Vec::new(),
        ..n.clone()
    }
}

fn place(children: &mut Vec<(Option<Key>, StructNode)>, key: Option<Key>, node: StructNode) {
    let pos = key
        .as_ref()
        .and_then(|k| children.iter().position(|(ck, _)| ck.as_ref().is_some_and(|ck| ck > k)))
        .unwrap_or(children.len());
    children.insert(pos, (key, node));
}

impl MergeCtx<'_> {
    fn build_a(&mut self, at: &NodeRef) -> StructNode {
        let a_node = self.a.node(at).expect("a path");
        let mut node = shallow(a_node);
        let partner = self.partner_of_a.get(at).cloned();
        if let Some(bp) = &partner {
            combine(&mut node, self.b.node(bp).expect("b path"), self.policy);
        }
        let mut children: Vec<(Option<Key>, StructNode)> = (0..a_node.children.len())
            .map(|i| {
                let c = at.child(i);
                (self.a_keys.get(&c).cloned(), self.build_a(&c))
            })
            .collect();
        self.insert_hosted(self.hosted_a.get(at).cloned().unwrap_or_default(), &mut children);
        if let Some(bp) = partner {
            self.attach_loose(&bp, &mut children);
        }
        node.children = children.into_iter().map(|(_, n)| n).collect();
        node
    }

    fn build_b(&mut self, at: &NodeRef) -> StructNode {
        let mut node = shallow(self.b.node(at).expect("b path"));
        freshen_ids(&mut node, &mut self.taken);
        let mut children = Vec::new();
        self.attach_loose(at, &mut children);
        self.insert_hosted(self.hosted_b.get(at).cloned().unwrap_or_default(), &mut children);
        node.children = children.into_iter().map(|(_, n)| n).collect();
        node
    }

    fn insert_hosted(&mut self, hosted: Vec<NodeRef>, children: &mut Vec<(Option<Key>, StructNode)>) {
        for bp in hosted {
            let key = self.b_keys.get(&bp).cloned();
            let built = self.build_b(&bp);
            place(children, key, built);
        }
    }

    /// b node without primary projection, minus descendants that have one.
    fn clone_loose(&self, at: &NodeRef) -> StructNode {
        let n = self.b.node(at).expect("b path");
        let mut out = shallow(n);
        out.children = (0..n.children.len())
            .map(|i| at.child(i))
            .filter(|c| !self.participating_b.contains(c))
            .map(|c| self.clone_loose(&c))
            .collect();
        out
    }

    fn attach_loose(&mut self, b_at: &NodeRef, children: &mut Vec<(Option<Key>, StructNode)>) {
        let n = self.b.node(b_at).expect("b path");
        for i in 0..n.children.len() {
            let c = b_at.child(i);
            if self.participating_b.contains(&c) {
                continue;
            }
            let mut loose = self.clone_loose(&c);
            if children.iter().any(|(_, x)| *x == loose) {
                continue;
            }
            freshen_ids(&mut loose, &mut self.taken);
            children.push((None, loose));
        }
    }
}

/// Merges layer `b` into layer `a`. Parallel nodes are combined according
/// to `policy`; nodes found in only one layer are kept, placed in primary
/// order under their nearest merged ancestor. The roots are always merged
/// with each other.
pub fn merge(
    a: &AnnotationDocument,
    b: &AnnotationDocument,
    layers: &LayerSet,
    policy: MergePolicy,
) -> Result<AnnotationDocument> {
    let la = layers_with(layers, a)?;
    let lb = layers_with(layers, b)?;
    check_compatible(&participants(a, &la, true)?, &participants(b, &lb, true)?)?;
    let pa = participants(a, &la, false)?;
    let pb = participants(b, &lb, false)?;
    let m = match_participants(&pa, &pb);

    let mut partner_of_a: HashMap<NodeRef, NodeRef> = m
        .pairs
        .iter()
        .map(|&(i, j)| (pa[i].at.clone(), pb[j].at.clone()))
        .collect();
    partner_of_a.insert(NodeRef::root(), NodeRef::root());
    let partner_of_b: HashMap<NodeRef, NodeRef> =
        partner_of_a.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
    let participating_b: HashSet<NodeRef> = pb.iter().map(|p| p.at.clone()).collect();

    let mut hosted_a: HashMap<NodeRef, Vec<NodeRef>> = HashMap::new();
    let mut hosted_b: HashMap<NodeRef, Vec<NodeRef>> = HashMap::new();
    for &j in &m.only_b {
        let at = &pb[j].at;
        let mut anc = at.parent().expect("non-root participant");
        loop {
            if let Some(a_at) = partner_of_b.get(&anc) {
                hosted_a.entry(a_at.clone()).or_default().push(at.clone());
                break;
            }
            if participating_b.contains(&anc) {
                hosted_b.entry(anc).or_default().push(at.clone());
                break;
            }
            anc = anc.parent().expect("root is always matched");
        }
    }

    let mut ctx = MergeCtx {
        a,
        b,
        policy,
        a_keys: pa.iter().filter_map(|p| Some((p.at.clone(), first_key(&p.extents)?))).collect(),
        b_keys: pb.iter().filter_map(|p| Some((p.at.clone(), first_key(&p.extents)?))).collect(),
        partner_of_a,
        hosted_a,
        hosted_b,
        participating_b,
        taken: a.ids().into_iter().map(str::to_owned).collect(),
    };
    let root = ctx.build_a(&NodeRef::root());
    let mut result = a.clone();
    result.root = root;
    for r in &b.primary_refs {
        if !result.primary_refs.contains(r) {
            result.primary_refs.push(r.clone());
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FindingKind {
    OnlyA,
    OnlyB,
    Equal,
    Conflict,
    AltConflict,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::OnlyA => "only-a",
            FindingKind::OnlyB => "only-b",
            FindingKind::Equal => "equal",
            FindingKind::Conflict => "conflict",
            FindingKind::AltConflict => "alt-conflict",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub kind: FindingKind,
    pub node_a: String,
    pub node_b: String,
    pub category: String,
    pub value_a: String,
    pub value_b: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffReport {
    pub findings: Vec<Finding>,
    pub matched: usize,
    pub equal: usize,
    pub conflicting: usize,
    pub only_a: usize,
    pub only_b: usize,
    /// Equal-feature matches over all matches; 1.0 when nothing matched.
    pub agreement: f64,
}

impl DiffReport {
    pub fn conflicts(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.kind == FindingKind::Conflict)
    }

    /// Header line with the counts, then one tab-separated line per finding.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# matched={} equal={} conflicting={} only-a={} only-b={} agreement={:.6}\n",
            self.matched, self.equal, self.conflicting, self.only_a, self.only_b, self.agreement
        );
        let clean = |s: &str| s.replace(['\t', '\n'], " ");
        for f in &self.findings {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                f.kind.as_str(),
                clean(&f.node_a),
                clean(&f.node_b),
                clean(&f.category),
                clean(&f.value_a),
                clean(&f.value_b)
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DiffOptions {
    /// Compare alternatives position by position, confidences included.
    pub strict_alternatives: bool,
}

fn values_of(fs: &[Feature], category: &str) -> Vec<String> {
    fs.iter().filter(|f| f.category == category).map(|f| f.to_string()).collect()
}

fn group_signature(g: &AltGroup) -> Vec<(String, String)> {
    let mut sig: Vec<_> = g.features.iter().map(|f| (f.category.clone(), f.to_string())).collect();
    sig.sort();
    sig
}

fn render_groups(gs: &[AltGroup]) -> String {
    gs.iter()
        .map(|g| {
            let mut s = g
                .features
                .iter()
                .map(|f| format!("{}={}", f.category, f))
                .collect::<Vec<_>>()
                .join(",");
            if let Some(c) = g.confidence {
                let _ = write!(s, "@{c}");
            }
            s
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

fn alternatives_differ(a: &[AltGroup], b: &[AltGroup], strict: bool) -> bool {
    if strict {
        return a != b;
    }
    let mut sa: Vec<_> = a.iter().map(group_signature).collect();
    let mut sb: Vec<_> = b.iter().map(group_signature).collect();
    sa.sort();
    sb.sort();
    sa != sb
}

/// Compares two parallel layers node by node.
pub fn diff(
    a: &AnnotationDocument,
    b: &AnnotationDocument,
    layers: &LayerSet,
    options: DiffOptions,
) -> Result<DiffReport> {
    let la = layers_with(layers, a)?;
    let lb = layers_with(layers, b)?;
    let pa = participants(a, &la, true)?;
    let pb = participants(b, &lb, true)?;
    check_compatible(&pa, &pb)?;
    let m = match_participants(&pa, &pb);
    let mut findings = Vec::new();
    let (mut equal, mut conflicting) = (0, 0);
    for &(i, j) in &m.pairs {
        let (na, nb) = (a.node(&pa[i].at).expect("a path"), b.node(&pb[j].at).expect("b path"));
        let (la_, lb_) = (label(na, &pa[i].at), label(nb, &pb[j].at));
        let mut cats: Vec<&str> = Vec::new();
        for f in na.features.iter().chain(&nb.features) {
            if !cats.contains(&f.category.as_str()) {
                cats.push(&f.category);
            }
        }
        let mut node_conflicts = 0;
        for c in cats {
            let (va, vb) = (values_of(&na.features, c), values_of(&nb.features, c));
            let (mut sa, mut sb) = (va.clone(), vb.clone());
            sa.sort();
            sb.sort();
            if sa != sb {
                node_conflicts += 1;
                findings.push(Finding {
                    kind: FindingKind::Conflict,
                    node_a: la_.clone(),
                    node_b: lb_.clone(),
                    category: c.to_owned(),
                    value_a: va.join("|"),
                    value_b: vb.join("|"),
                });
            }
        }
        if alternatives_differ(&na.alternatives, &nb.alternatives, options.strict_alternatives) {
            findings.push(Finding {
                kind: FindingKind::AltConflict,
                node_a: la_.clone(),
                node_b: lb_.clone(),
                category: String::new(),
                value_a: render_groups(&na.alternatives),
                value_b: render_groups(&nb.alternatives),
            });
        }
        if node_conflicts == 0 {
            equal += 1;
            findings.push(Finding {
                kind: FindingKind::Equal,
                node_a: la_,
                node_b: lb_,
                category: String::new(),
                value_a: String::new(),
                value_b: String::new(),
            });
        } else {
            conflicting += 1;
        }
    }
    for &i in &m.only_a {
        let n = a.node(&pa[i].at).expect("a path");
        findings.push(Finding {
            kind: FindingKind::OnlyA,
            node_a: label(n, &pa[i].at),
            node_b: String::new(),
            category: String::new(),
            value_a: String::new(),
            value_b: String::new(),
        });
    }
    for &j in &m.only_b {
        let n = b.node(&pb[j].at).expect("b path");
        findings.push(Finding {
            kind: FindingKind::OnlyB,
            node_a: String::new(),
            node_b: label(n, &pb[j].at),
            category: String::new(),
            value_a: String::new(),
            value_b: String::new(),
        });
    }
    let matched = m.pairs.len();
    Ok(DiffReport {
        findings,
        matched,
        equal,
        conflicting,
        only_a: m.only_a.len(),
        only_b: m.only_b.len(),
        agreement: if matched == 0 { 1.0 } else { equal as f64 / matched as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchoring::PrimaryDoc;
    use crate::gmt::{parse_str, GmtDialect};
    use crate::model::{Pointer, Seg};

    fn parse(src: &str, name: &str) -> AnnotationDocument {
        parse_str(src, GmtDialect::lenient(), name).unwrap().document
    }

    fn chat_layers() -> LayerSet {
        let text = PrimaryDoc::text("text", "la queue du chat")
            .with_mark("w1", 0, 2)
            .and_then(|d| d.with_mark("w2", 3, 8))
            .and_then(|d| d.with_mark("w3", 9, 11))
            .and_then(|d| d.with_mark("w3.1", 9, 11))
            .and_then(|d| d.with_mark("w3.2", 9, 11))
            .and_then(|d| d.with_mark("w4", 12, 16))
            .unwrap();
        let morpho = parse(include_str!("../testdata/morpho.gmt.xml"), "morpho").with_primary_ref("text");
        let syn = parse(include_str!("../testdata/syntactic.gmt.xml"), "syn").with_primary_ref("morpho");
        let mut ls = LayerSet::new();
        ls.add_primary(text).unwrap();
        ls.add_annotation(morpho).unwrap();
        ls.add_annotation(syn).unwrap();
        ls
    }

    fn paul_layers() -> (LayerSet, AnnotationDocument) {
        let text = PrimaryDoc::text("text", "Paul aime les croissants")
            .with_mark("w1", 0, 4)
            .and_then(|d| d.with_mark("w2", 5, 9))
            .and_then(|d| d.with_mark("w3", 10, 13))
            .and_then(|d| d.with_mark("w4", 14, 24))
            .unwrap();
        let doc = parse(include_str!("../testdata/paul.gmt.xml"), "msa").with_primary_ref("text");
        let mut ls = LayerSet::new();
        ls.add_primary(text).unwrap();
        (ls, doc)
    }

    fn word(lemma: &str, pos: &str, mark: &str) -> AnnotationDocument {
        let mut d = AnnotationDocument::new("x", "MSAnnot", "W-level").unwrap().with_primary_ref("text");
        let r = NodeRef::root();
        d.set_seg(&r, Seg::target(mark.parse::<Pointer>().unwrap())).unwrap();
        d.set_feature(&r, "lemma", lemma).unwrap();
        d.set_feature(&r, "pos", pos).unwrap();
        d
    }

    #[test]
    fn noun_phrase_covers_le_chat() {
        let ls = chat_layers();
        let ct = covered_text("syn", &NodeRef::root(), &ls).unwrap();
        assert_eq!(ct.text, "le chat");
        assert_eq!(ct.lemma_fallback.len(), 1);
    }

    #[test]
    fn fused_token_covers_its_surface() {
        let ls = chat_layers();
        let ct = covered_text("morpho", &NodeRef::root().child(0), &ls).unwrap();
        assert_eq!(ct.text, "du");
        assert!(ct.lemma_fallback.is_empty());
        let all = covered_text("morpho", &NodeRef::root(), &ls).unwrap();
        assert_eq!(all.text, "du chat");
    }

    #[test]
    fn whole_sentence_text() {
        let (mut ls, doc) = paul_layers();
        ls.add_annotation(doc).unwrap();
        let ct = covered_text("msa", &NodeRef::root(), &ls).unwrap();
        assert_eq!(ct.text, "Paul aime les croissants");
        let w3 = covered_text("msa", &NodeRef::root().child(2), &ls).unwrap();
        assert_eq!(w3.text, "les");
    }

    #[test]
    fn time_spans_are_not_textual() {
        let mut ls = LayerSet::new();
        ls.add_primary(PrimaryDoc::timed("audio", "a.wav", 10_000)).unwrap();
        let d = parse(include_str!("../testdata/phonetic.gmt.xml"), "ph").with_primary_ref("audio");
        ls.add_annotation(d).unwrap();
        let err = covered_text("ph", &NodeRef::root(), &ls);
        assert!(matches!(err, Err(Error::NotTextual(_))), "{err:?}");
    }

    #[test]
    fn merge_with_itself_is_identity() {
        let (ls, doc) = paul_layers();
        for policy in [MergePolicy::Union, MergePolicy::PreferA, MergePolicy::AsAlternatives] {
            assert_eq!(merge(&doc, &doc, &ls, policy).unwrap(), doc);
        }
    }

    #[test]
    fn diverging_analyses_become_alternatives() {
        let (ls, _) = paul_layers();
        let a = word("boucher", "VERB", "#w1");
        let b = word("bouche", "NOUN", "#w1");
        let m = merge(&a, &b, &ls, MergePolicy::AsAlternatives).unwrap();
        assert!(m.root.features.is_empty());
        assert_eq!(m.root.alternatives.len(), 2);
        assert_eq!(m.root.alternatives[0].features[0].value, "boucher");
        assert_eq!(m.root.alternatives[1].features[0].value, "bouche");

        let u = merge(&a, &b, &ls, MergePolicy::Union).unwrap();
        assert_eq!(u.root.features.len(), 4);
        let p = merge(&a, &b, &ls, MergePolicy::PreferA).unwrap();
        assert_eq!(p.root.features, a.root.features);
    }

    #[test]
    fn merge_keeps_nodes_from_both_sides_in_order() {
        let (ls, doc) = paul_layers();
        let mut a = doc.clone();
        let mut b = doc.clone();
        // a lacks "aime", b lacks "croissants"
        a.root.children.remove(1);
        b.root.children.remove(3);
        b.root.children[0].features.push(Feature::new("gender", "mas"));
        let m = merge(&a, &b, &ls, MergePolicy::Union).unwrap();
        let lemmas: Vec<_> = m.root.children.iter().map(|c| c.feature("lemma").unwrap()).collect();
        assert_eq!(lemmas, ["Paul", "aimer", "le", "croissant"]);
        assert_eq!(m.root.children[0].feature("gender"), Some("mas"));
        assert!(m.check().iter().all(|d| !d.is_error()));
    }

    #[test]
    fn b_ids_are_renamed_on_collision() {
        let (ls, _) = paul_layers();
        let mut a = word("Paul", "PNOUN", "#w1");
        let mut b = word("aimer", "VERB", "#w2");
        for d in [&mut a, &mut b] {
            d.root.seg = None;
        }
        let ca = a.add_child(&NodeRef::root(), "W-level", Some("t1")).unwrap();
        a.set_seg(&ca, Seg::target("#w1".parse::<Pointer>().unwrap())).unwrap();
        let cb = b.add_child(&NodeRef::root(), "W-level", Some("t1")).unwrap();
        b.set_seg(&cb, Seg::target("#w2".parse::<Pointer>().unwrap())).unwrap();
        let m = merge(&a, &b, &ls, MergePolicy::Union).unwrap();
        let ids: Vec<_> = m.root.children.iter().map(|c| c.id.clone().unwrap()).collect();
        assert_eq!(ids, ["t1", "t1.1"]);
    }

    #[test]
    fn layers_over_different_primaries_do_not_merge() {
        let (mut ls, _) = paul_layers();
        ls.add_primary(PrimaryDoc::text("other", "x").with_mark("o1", 0, 1).unwrap()).unwrap();
        let a = word("Paul", "PNOUN", "#w1");
        let b = word("x", "X", "other#o1");
        assert!(matches!(merge(&a, &b, &ls, MergePolicy::Union), Err(Error::IncompatibleLayers(_))));
        assert!(matches!(diff(&a, &b, &ls, DiffOptions::default()), Err(Error::IncompatibleLayers(_))));
    }

    #[test]
    fn diff_counts_agreement() {
        let (ls, doc) = paul_layers();
        let same = diff(&doc, &doc, &ls, DiffOptions::default()).unwrap();
        assert_eq!((same.matched, same.equal, same.agreement), (5, 5, 1.0));

        let mut b = doc.clone();
        b.root.children[2].features[1] = Feature::new("pos", "PRON");
        let r = diff(&doc, &b, &ls, DiffOptions::default()).unwrap();
        assert_eq!(r.conflicting, 1);
        assert!((r.agreement - 0.8).abs() < 1e-12);
        let c: Vec<_> = r.conflicts().collect();
        assert_eq!((c[0].value_a.as_str(), c[0].value_b.as_str()), ("DET", "PRON"));
        let text = r.to_text();
        assert!(text.lines().any(|l| l == "conflict\t/2\t/2\tpos\tDET\tPRON"), "{text}");
    }

    #[test]
    fn diff_against_empty_layer() {
        let (ls, doc) = paul_layers();
        let empty = AnnotationDocument::new("e", "MSAnnot", "MSAnnot").unwrap().with_primary_ref("text");
        let r = diff(&doc, &empty, &ls, DiffOptions::default()).unwrap();
        assert_eq!((r.only_a, r.only_b, r.matched, r.agreement), (5, 0, 0, 1.0));
    }

    #[test]
    fn alternative_order_matters_only_when_strict() {
        let (ls, _) = paul_layers();
        let a = parse(include_str!("../testdata/bouche.gmt.xml"), "a").with_primary_ref("text");
        let mut b = a.clone();
        b.root.alternatives.reverse();
        let loose = diff(&a, &b, &ls, DiffOptions::default()).unwrap();
        assert_eq!(loose.findings.iter().filter(|f| f.kind == FindingKind::AltConflict).count(), 0);
        let strict = diff(&a, &b, &ls, DiffOptions { strict_alternatives: true }).unwrap();
        assert_eq!(strict.findings.iter().filter(|f| f.kind == FindingKind::AltConflict).count(), 1);
    }
}
