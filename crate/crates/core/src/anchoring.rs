//! Anchor resolution across a lattice of stand-off documents.
//!
//! A seg either carries a span (temporal or offset anchoring) or a list of
//! pointers. Pointers land on structural nodes of another layer
//! (object-based anchoring, or event-based when the node is a landmark) or
//! on marks pre-identified in a primary document.
//!
//! Pointer lookup order: an explicit `doc#` part wins; otherwise the owning
//! document's `primary_refs` are searched in order, then the layer set's
//! default target. A document that declares neither falls back to a global
//! search (explicit node ids first, then primary marks).

use std::collections::{BTreeMap, HashSet};

use indexmap::IndexMap;

use crate::diag::Diagnostic;
use crate::error::{Error, Result};
use crate::model::{AnnotationDocument, NodeRef, Order, Pointer, Seg, SpanUnit, StructNode, LANDMARK};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrimaryContent {
    Text(String),
    /// Opaque timed medium; only its length matters here.
    Timed { descriptor: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimaryDoc {
    pub doc_id: String,
    pub content: PrimaryContent,
    /// Fragment id to half-open character span.
    pub marks: BTreeMap<String, (u64, u64)>,
    pub length: u64,
}

impl PrimaryDoc {
    pub fn text(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        PrimaryDoc {
            doc_id: doc_id.into(),
            length: text.chars().count() as u64,
            content: PrimaryContent::Text(text),
            marks: BTreeMap::new(),
        }
    }

    pub fn timed(doc_id: impl Into<String>, descriptor: impl Into<String>, length: u64) -> Self {
        PrimaryDoc {
            doc_id: doc_id.into(),
            content: PrimaryContent::Timed {
                descriptor: descriptor.into(),
            },
            marks: BTreeMap::new(),
            length,
        }
    }

    pub fn unit(&self) -> SpanUnit {
        match self.content {
            PrimaryContent::Text(_) => SpanUnit::CharacterOffset,
            PrimaryContent::Timed { .. } => SpanUnit::TimeUnit,
        }
    }

    pub fn add_mark(&mut self, id: impl Into<String>, starts_at: u64, ends_at: u64) -> Result<()> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidArgument("empty mark id".into()));
        }
        if starts_at > ends_at || ends_at > self.length {
            return Err(Error::OutOfRange {
                doc_id: self.doc_id.clone(),
                starts_at,
                ends_at,
                length: self.length,
            });
        }
        if self.marks.insert(id.clone(), (starts_at, ends_at)).is_some() {
            return Err(Error::DuplicateIdentifier(id));
        }
        Ok(())
    }

    pub fn with_mark(mut self, id: &str, starts_at: u64, ends_at: u64) -> Result<Self> {
        self.add_mark(id, starts_at, ends_at)?;
        Ok(self)
    }

    /// Character substring for `[starts_at, ends_at)`.
    pub fn slice(&self, starts_at: u64, ends_at: u64) -> Option<String> {
        match &self.content {
            PrimaryContent::Text(t) => Some(
                t.chars()
                    .skip(starts_at as usize)
                    .take(ends_at.saturating_sub(starts_at) as usize)
                    .collect(),
            ),
            PrimaryContent::Timed { .. } => None,
        }
    }

    fn extent(&self, starts_at: u64, ends_at: u64) -> Extent {
        Extent {
            doc_id: self.doc_id.clone(),
            starts_at,
            ends_at,
            unit: self.unit(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Extent {
    pub doc_id: String,
    pub starts_at: u64,
    pub ends_at: u64,
    pub unit: SpanUnit,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LayerSet {
    pub primary_docs: IndexMap<String, PrimaryDoc>,
    pub annotation_docs: IndexMap<String, AnnotationDocument>,
    /// Target for pointers of documents that declare no `primary_refs`.
    pub default_target: Option<String>,
}

impl LayerSet {
    pub fn new() -> Self {
        Self::default()
    }

    fn claim(&self, id: &str) -> Result<()> {
        if self.primary_docs.contains_key(id) || self.annotation_docs.contains_key(id) {
            Err(Error::DuplicateIdentifier(id.to_owned()))
        } else {
            Ok(())
        }
    }

    pub fn add_primary(&mut self, doc: PrimaryDoc) -> Result<()> {
        self.claim(&doc.doc_id)?;
        self.primary_docs.insert(doc.doc_id.clone(), doc);
        Ok(())
    }

    pub fn add_annotation(&mut self, doc: AnnotationDocument) -> Result<()> {
        self.claim(&doc.doc_id)?;
        self.annotation_docs.insert(doc.doc_id.clone(), doc);
        Ok(())
    }

    /// Adds or replaces an annotation document.
    pub fn put_annotation(&mut self, doc: AnnotationDocument) -> Result<()> {
        if self.primary_docs.contains_key(&doc.doc_id) {
            return Err(Error::DuplicateIdentifier(doc.doc_id));
        }
        self.annotation_docs.insert(doc.doc_id.clone(), doc);
        Ok(())
    }

    pub fn annotation(&self, doc_id: &str) -> Result<&AnnotationDocument> {
        self.annotation_docs
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_owned()))
    }

    pub fn primary(&self, doc_id: &str) -> Result<&PrimaryDoc> {
        self.primary_docs
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_owned()))
    }

    fn contains(&self, doc_id: &str) -> bool {
        self.primary_docs.contains_key(doc_id) || self.annotation_docs.contains_key(doc_id)
    }

    /// Looks `fragment` up inside one named document.
    fn lookup_in(&self, doc_id: &str, fragment: &str) -> Option<AnchorTarget> {
        if let Some(d) = self.annotation_docs.get(doc_id) {
            return d.find_node(fragment).ok().map(|node| AnchorTarget::Node {
                doc_id: doc_id.to_owned(),
                node,
            });
        }
        let p = self.primary_docs.get(doc_id)?;
        p.marks
            .get(fragment)
            .map(|&(s, e)| AnchorTarget::Extent(p.extent(s, e)))
    }

    /// Global lookup: explicit node ids, then marks. Returns every hit in
    /// that order so callers can detect collisions.
    fn lookup_global(&self, fragment: &str) -> Vec<AnchorTarget> {
        let mut hits = Vec::new();
        for (id, d) in &self.annotation_docs {
            for r in d.iterate(Order::Pre) {
                if d.node(&r).and_then(|n| n.id.as_deref()) == Some(fragment) {
                    hits.push(AnchorTarget::Node {
                        doc_id: id.clone(),
                        node: r,
                    });
                }
            }
        }
        for p in self.primary_docs.values() {
            if let Some(&(s, e)) = p.marks.get(fragment) {
                hits.push(AnchorTarget::Extent(p.extent(s, e)));
            }
        }
        hits
    }

    /// Candidate target documents for an unqualified pointer owned by `owner`.
    fn search_scope(&self, owner: &str) -> Vec<String> {
        if let Some(d) = self.annotation_docs.get(owner) {
            if !d.primary_refs.is_empty() {
                return d.primary_refs.clone();
            }
        }
        self.default_target.iter().cloned().collect()
    }

    fn resolve_pointer(&self, ptr: &Pointer, owner: &str) -> Result<(AnchorTarget, usize)> {
        if let Some(doc) = &ptr.doc_ref {
            if !self.contains(doc) {
                return Err(Error::UnknownDocument(doc.clone()));
            }
            return self
                .lookup_in(doc, &ptr.fragment)
                .map(|t| (t, 1))
                .ok_or_else(|| Error::UnresolvedReference(ptr.fragment.clone()));
        }
        let scope = self.search_scope(owner);
        if scope.is_empty() {
            let hits = self.lookup_global(&ptr.fragment);
            let n = hits.len();
            return hits
                .into_iter()
                .next()
                .map(|t| (t, n))
                .ok_or_else(|| Error::UnresolvedReference(ptr.fragment.clone()));
        }
        for doc in &scope {
            if !self.contains(doc) {
                return Err(Error::UnknownDocument(doc.clone()));
            }
            if let Some(t) = self.lookup_in(doc, &ptr.fragment) {
                return Ok((t, 1));
            }
        }
        Err(Error::UnresolvedReference(ptr.fragment.clone()))
    }

    /// Primary document a span seg of `owner` measures against.
    fn span_document(&self, owner: &str, unit: SpanUnit) -> Result<&PrimaryDoc> {
        for doc in self.search_scope(owner) {
            if let Some(p) = self.primary_docs.get(&doc) {
                return Ok(p);
            }
        }
        let mut same_unit = self.primary_docs.values().filter(|p| p.unit() == unit);
        match (same_unit.next(), same_unit.next()) {
            (Some(p), None) => Ok(p),
            _ => Err(Error::UnknownDocument(format!(
                "no primary document for spans of {owner}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    /// Span offsets into primary data.
    Temporal,
    /// Pointer to a landmark node.
    EventBased,
    /// Pointer to a structural node or a pre-identified primary object.
    ObjectBased,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AnchorTarget {
    Node { doc_id: String, node: NodeRef },
    Extent(Extent),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedAnchor {
    pub mechanism: Mechanism,
    pub target: AnchorTarget,
}

fn check_extent(p: &PrimaryDoc, starts_at: u64, ends_at: u64, unit: SpanUnit) -> Result<Extent> {
    if unit != p.unit() {
        return Err(Error::UnitMismatch(format!(
            "{} span against {} document {}",
            unit.as_str(),
            p.unit().as_str(),
            p.doc_id
        )));
    }
    if starts_at > ends_at || ends_at > p.length {
        return Err(Error::OutOfRange {
            doc_id: p.doc_id.clone(),
            starts_at,
            ends_at,
            length: p.length,
        });
    }
    Ok(p.extent(starts_at, ends_at))
}

/// Resolves one seg owned by a node of `owner_doc`; pointer order is kept.
pub fn resolve(seg: &Seg, owner_doc: &str, layers: &LayerSet) -> Result<Vec<ResolvedAnchor>> {
    match seg {
        Seg::Span {
            starts_at,
            ends_at,
            unit,
        } => {
            let p = layers.span_document(owner_doc, *unit)?;
            Ok(vec![ResolvedAnchor {
                mechanism: Mechanism::Temporal,
                target: AnchorTarget::Extent(check_extent(p, *starts_at, *ends_at, *unit)?),
            }])
        }
        Seg::TargetList(ptrs) => ptrs
            .iter()
            .map(|ptr| {
                let (target, _) = layers.resolve_pointer(ptr, owner_doc)?;
                let mechanism = match &target {
                    AnchorTarget::Node { doc_id, node } => {
                        let landmark = layers
                            .annotation(doc_id)
                            .ok()
                            .and_then(|d| d.node(node))
                            .is_some_and(StructNode::is_landmark);
                        if landmark {
                            Mechanism::EventBased
                        } else {
                            Mechanism::ObjectBased
                        }
                    }
                    AnchorTarget::Extent(_) => Mechanism::ObjectBased,
                };
                Ok(ResolvedAnchor { mechanism, target })
            })
            .collect(),
    }
}

type Visit = (String, NodeRef);

fn project_into(
    doc_id: &str,
    at: &NodeRef,
    layers: &LayerSet,
    stack: &mut Vec<Visit>,
    out: &mut Vec<Extent>,
) -> Result<()> {
    let key = (doc_id.to_owned(), at.clone());
    if let Some(pos) = stack.iter().position(|v| *v == key) {
        let cycle: Vec<String> = stack[pos..].iter().map(|(d, n)| format!("{d}{n}")).collect();
        return Err(Error::CyclicAnchor(cycle.join(" -> ")));
    }
    let doc = layers.annotation(doc_id)?;
    let node = doc
        .node(at)
        .ok_or_else(|| Error::NotFound(format!("node {at} in {doc_id}")))?;
    stack.push(key);
    if let Some(seg) = &node.seg {
        for a in resolve(seg, doc_id, layers)? {
            match a.target {
                AnchorTarget::Extent(e) => out.push(e),
                AnchorTarget::Node { doc_id: d, node: n } => project_into(&d, &n, layers, stack, out)?,
            }
        }
    } else {
        for i in 0..node.children.len() {
            project_into(doc_id, &at.child(i), layers, stack, out)?;
        }
    }
    stack.pop();
    Ok(())
}

/// Follows seg chains from a node down to primary extents. Nodes without a
/// seg project through their children. The result is sorted and
/// duplicate-free.
pub fn project_to_primary(doc_id: &str, node: &NodeRef, layers: &LayerSet) -> Result<Vec<Extent>> {
    let mut out = Vec::new();
    project_into(doc_id, node, layers, &mut Vec::new(), &mut out)?;
    out.sort();
    out.dedup();
    Ok(out)
}

pub fn make_landmark(starts_at: u64, ends_at: u64, unit: SpanUnit, id: &str) -> Result<StructNode> {
    if id.is_empty() {
        return Err(Error::InvalidArgument("landmark id is empty".into()));
    }
    Ok(StructNode::new(LANDMARK)
        .with_id(id)
        .with_seg(Seg::span(starts_at, ends_at, unit)?))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnchorReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl AnchorReport {
    pub fn is_empty(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn count(&self, code: &str) -> usize {
        self.diagnostics.iter().filter(|d| d.code == code).count()
    }
}

fn error_diag(e: &Error, doc: &str, at: &NodeRef) -> Diagnostic {
    Diagnostic::error(e.code(), format!("node {at}: {e}")).in_file(doc)
}

fn check_pointer(
    layers: &LayerSet,
    doc_id: &str,
    at: &NodeRef,
    ptr: &Pointer,
    out: &mut Vec<Diagnostic>,
) {
    match layers.resolve_pointer(ptr, doc_id) {
        Ok((_, hits)) if hits > 1 => out.push(
            Diagnostic::warning(
                "ambiguous-reference",
                format!("node {at}: {} matches {hits} targets", ptr.fragment),
            )
            .in_file(doc_id),
        ),
        Ok(_) => {}
        Err(e) => out.push(error_diag(&e, doc_id, at)),
    }
}

/// Reports every dangling pointer, bad span, anchor cycle and landmark
/// misuse in the lattice. An empty report means everything resolves.
pub fn validate_anchors(layers: &LayerSet) -> AnchorReport {
    let mut out = Vec::new();
    let mut cycles_seen = HashSet::new();
    for (doc_id, doc) in &layers.annotation_docs {
        for r in &doc.primary_refs {
            if !layers.contains(r) {
                out.push(
                    Diagnostic::error("unknown-document", format!("declared target {r} is missing"))
                        .in_file(doc_id.as_str()),
                );
            }
        }
        for at in doc.iterate(Order::Pre) {
            let node = doc.node(&at).expect("path from iterate");
            if node.is_landmark()
                && (!matches!(node.seg, Some(Seg::Span { .. }))
                    || !node.features.is_empty()
                    || !node.children.is_empty())
            {
                out.push(
                    Diagnostic::error(
                        "landmark-misuse",
                        format!("node {at}: landmark needs a span seg and no features or children"),
                    )
                    .in_file(doc_id.as_str()),
                );
            }
            match &node.seg {
                Some(seg @ Seg::Span { .. }) => {
                    if let Err(e) = resolve(seg, doc_id, layers) {
                        out.push(error_diag(&e, doc_id, &at));
                    }
                }
                Some(Seg::TargetList(ptrs)) => {
                    for p in ptrs {
                        check_pointer(layers, doc_id, &at, p, &mut out);
                    }
                }
                None => {}
            }
            for rel in &node.relations {
                for p in rel.source.iter().chain(&rel.targets) {
                    check_pointer(layers, doc_id, &at, p, &mut out);
                }
            }
            if node.seg.is_some() {
                if let Err(Error::CyclicAnchor(c)) = project_to_primary(doc_id, &at, layers) {
                    let mut members: Vec<&str> = c.split(" -> ").collect();
                    members.sort_unstable();
                    if cycles_seen.insert(members.join(" ")) {
                        out.push(
                            Diagnostic::error("cyclic-anchor", format!("anchor cycle {c}"))
                                .in_file(doc_id.as_str()),
                        );
                    }
                }
            }
        }
    }
    AnchorReport { diagnostics: out }
}

/// Node handle into a layer set, used by queries crossing documents.
pub fn node_in<'a>(layers: &'a LayerSet, doc_id: &str, at: &NodeRef) -> Result<&'a StructNode> {
    layers
        .annotation(doc_id)?
        .node(at)
        .ok_or_else(|| Error::NotFound(format!("node {at} in {doc_id}")))
}
