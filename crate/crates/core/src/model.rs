//! In-memory annotation documents.
//!
//! A document is a tree of typed [`StructNode`]s. Structure (node types,
//! nesting, anchors) is kept apart from the information units attached to
//! it ([`Feature`]s), which are validated separately against a
//! [`Registry`](crate::registry::Registry).
//!
//! Nodes are addressed with [`NodeRef`], the path of child indices from the
//! root. Nodes nested inside structural alternatives are reached through
//! their [`AltGroup`] and have no `NodeRef` of their own.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::diag::Diagnostic;
use crate::error::{Error, Result};

pub const LANDMARK: &str = "landmark";
pub const AGGREGATION: &str = "aggregation";

/// Tolerance for the sum of alternative confidences.
pub const CONFIDENCE_SUM_TOLERANCE: f64 = 1e-9;

/// Reference to a node or a marked span, written `doc#frag`, `#frag` or `frag`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pointer {
    pub doc_ref: Option<String>,
    pub fragment: String,
}

impl Pointer {
    pub fn new(fragment: impl Into<String>) -> Result<Self> {
        let fragment = fragment.into();
        if fragment.is_empty() {
            return Err(Error::InvalidArgument("empty pointer fragment".into()));
        }
        Ok(Pointer {
            doc_ref: None,
            fragment,
        })
    }

    pub fn in_doc(doc: impl Into<String>, fragment: impl Into<String>) -> Result<Self> {
        let mut p = Pointer::new(fragment)?;
        let doc = doc.into();
        p.doc_ref = (!doc.is_empty()).then_some(doc);
        Ok(p)
    }

    /// Renders the pointer; `hash` selects `#w1` over bare `w1` when there
    /// is no document part.
    pub fn render(&self, hash: bool) -> String {
        match (&self.doc_ref, hash) {
            (Some(d), _) => format!("{d}#{}", self.fragment),
            (None, true) => format!("#{}", self.fragment),
            (None, false) => self.fragment.clone(),
        }
    }
}

impl FromStr for Pointer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("pointer {s:?} contains whitespace")));
        }
        match s.split_once('#') {
            Some((doc, frag)) => Pointer::in_doc(doc, frag),
            None => Pointer::new(s),
        }
    }
}

impl fmt::Display for Pointer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpanUnit {
    CharacterOffset,
    TimeUnit,
}

impl SpanUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            SpanUnit::CharacterOffset => "char",
            SpanUnit::TimeUnit => "time",
        }
    }
}

impl FromStr for SpanUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "char" | "character" | "character-offset" => Ok(SpanUnit::CharacterOffset),
            "time" | "time-unit" => Ok(SpanUnit::TimeUnit),
            _ => Err(Error::InvalidArgument(format!("unknown span unit {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Seg {
    TargetList(Vec<Pointer>),
    Span {
        starts_at: u64,
        ends_at: u64,
        unit: SpanUnit,
    },
}

impl Seg {
    pub fn target(p: Pointer) -> Seg {
        Seg::TargetList(vec![p])
    }

    pub fn targets(ptrs: Vec<Pointer>) -> Result<Seg> {
        if ptrs.is_empty() {
            return Err(Error::InvalidArgument("seg target list is empty".into()));
        }
        Ok(Seg::TargetList(ptrs))
    }

    pub fn span(starts_at: u64, ends_at: u64, unit: SpanUnit) -> Result<Seg> {
        if starts_at > ends_at {
            return Err(Error::InvalidArgument(format!(
                "inverted span {starts_at}..{ends_at}"
            )));
        }
        Ok(Seg::Span {
            starts_at,
            ends_at,
            unit,
        })
    }

    pub fn pointers(&self) -> &[Pointer] {
        match self {
            Seg::TargetList(p) => p,
            Seg::Span { .. } => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Feature {
    pub category: String,
    pub value: String,
    pub children: Vec<Feature>,
}

impl Feature {
    pub fn new(category: impl Into<String>, value: impl Into<String>) -> Self {
        Feature {
            category: category.into(),
            value: value.into(),
            children: Vec::new(),
        }
    }

    pub fn with_children(mut self, children: Vec<Feature>) -> Self {
        self.children = children;
        self
    }

    pub fn is_well_formed(&self) -> bool {
        !self.category.is_empty()
            && (!self.value.is_empty() || !self.children.is_empty())
            && self.children.iter().all(Feature::is_well_formed)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.value)?;
        if !self.children.is_empty() {
            f.write_str("{")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{}={}", c.category, c)?;
            }
            f.write_str("}")?;
        }
        Ok(())
    }
}

/// One reading among mutually exclusive alternatives.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AltGroup {
    pub features: Vec<Feature>,
    pub children: Vec<StructNode>,
    pub confidence: Option<f64>,
}

impl AltGroup {
    pub fn new(features: Vec<Feature>) -> Self {
        AltGroup {
            features,
            ..Default::default()
        }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = Some(confidence);
        self
    }

    pub fn with_children(mut self, children: Vec<StructNode>) -> Self {
        self.children = children;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty() && self.children.is_empty()
    }

    fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InvalidArgument("empty alternative group".into()));
        }
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::InvalidArgument(format!(
                    "confidence {c} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    pub rel_type: String,
    /// `None` means the owning node.
    pub source: Option<Pointer>,
    pub targets: Vec<Pointer>,
    pub directed: bool,
}

impl Relation {
    pub fn new(rel_type: impl Into<String>, targets: Vec<Pointer>, directed: bool) -> Result<Self> {
        let rel_type = rel_type.into();
        if rel_type.is_empty() {
            return Err(Error::InvalidArgument("empty relation type".into()));
        }
        if targets.is_empty() {
            return Err(Error::InvalidArgument("relation without targets".into()));
        }
        Ok(Relation {
            rel_type,
            source: None,
            targets,
            directed,
        })
    }

    /// An undirected grouping of targets to be taken as a unit.
    pub fn aggregation(targets: Vec<Pointer>) -> Result<Self> {
        Relation::new(AGGREGATION, targets, false)
    }

    pub fn with_source(mut self, source: Pointer) -> Self {
        self.source = Some(source);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StructNode {
    pub id: Option<String>,
    pub node_type: String,
    pub features: Vec<Feature>,
    pub alternatives: Vec<AltGroup>,
    pub relations: Vec<Relation>,
    pub seg: Option<Seg>,
    pub children: Vec<StructNode>,
}

impl StructNode {
    pub fn new(node_type: impl Into<String>) -> Self {
        StructNode {
            node_type: node_type.into(),
            ..Default::default()
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_seg(mut self, seg: Seg) -> Self {
        self.seg = Some(seg);
        self
    }

    pub fn with_feature(mut self, category: &str, value: &str) -> Self {
        self.features.push(Feature::new(category, value));
        self
    }

    pub fn with_child(mut self, child: StructNode) -> Self {
        self.children.push(child);
        self
    }

    pub fn is_landmark(&self) -> bool {
        self.node_type == LANDMARK
    }

    /// First value of `category` among the node's own features.
    pub fn feature(&self, category: &str) -> Option<&str> {
        self.features
            .iter()
            .find(|f| f.category == category)
            .map(|f| f.value.as_str())
    }

    /// The fragment this node anchors to when its seg is a single pointer.
    pub fn anchor_fragment(&self) -> Option<&str> {
        match &self.seg {
            Some(Seg::TargetList(p)) if p.len() == 1 => Some(p[0].fragment.as_str()),
            _ => None,
        }
    }

    /// Visits this node, its children and nodes inside structural
    /// alternatives, pre-order.
    pub fn walk_all<'a>(&'a self, f: &mut dyn FnMut(&'a StructNode)) {
        f(self);
        for g in &self.alternatives {
            for c in &g.children {
                c.walk_all(f);
            }
        }
        for c in &self.children {
            c.walk_all(f);
        }
    }
}

/// Path of child indices from the document root; the empty path is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeRef(pub Vec<usize>);

impl NodeRef {
    pub fn root() -> Self {
        NodeRef(Vec::new())
    }

    pub fn child(&self, index: usize) -> Self {
        let mut p = self.0.clone();
        p.push(index);
        NodeRef(p)
    }

    pub fn parent(&self) -> Option<NodeRef> {
        let (_, rest) = self.0.split_last()?;
        Some(NodeRef(rest.to_vec()))
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for i in &self.0 {
            write!(f, "/{i}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Pre,
    Post,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationDocument {
    pub doc_id: String,
    pub level: String,
    pub root: StructNode,
    pub primary_refs: Vec<String>,
}

fn require(what: &str, value: &str) -> Result<()> {
    if value.is_empty() {
        Err(Error::InvalidArgument(format!("{what} is empty")))
    } else {
        Ok(())
    }
}

impl AnnotationDocument {
    pub fn new(doc_id: &str, level: &str, root_type: &str) -> Result<Self> {
        require("doc_id", doc_id)?;
        require("level", level)?;
        require("root_type", root_type)?;
        Ok(AnnotationDocument {
            doc_id: doc_id.to_owned(),
            level: level.to_owned(),
            root: StructNode::new(root_type),
            primary_refs: Vec::new(),
        })
    }

    pub fn with_primary_ref(mut self, doc: impl Into<String>) -> Self {
        self.primary_refs.push(doc.into());
        self
    }

    pub fn node(&self, at: &NodeRef) -> Option<&StructNode> {
        let mut n = &self.root;
        for &i in &at.0 {
            n = n.children.get(i)?;
        }
        Some(n)
    }

    pub fn node_mut(&mut self, at: &NodeRef) -> Option<&mut StructNode> {
        let mut n = &mut self.root;
        for &i in &at.0 {
            n = n.children.get_mut(i)?;
        }
        Some(n)
    }

    fn get(&self, at: &NodeRef) -> Result<&StructNode> {
        self.node(at)
            .ok_or_else(|| Error::NotFound(format!("node {at} in {}", self.doc_id)))
    }

    fn get_mut(&mut self, at: &NodeRef) -> Result<&mut StructNode> {
        let doc = self.doc_id.clone();
        self.node_mut(at)
            .ok_or_else(|| Error::NotFound(format!("node {at} in {doc}")))
    }

    pub fn ids(&self) -> HashSet<&str> {
        let mut ids = HashSet::new();
        self.root.walk_all(&mut |n| {
            if let Some(id) = &n.id {
                ids.insert(id.as_str());
            }
        });
        ids
    }

    pub fn add_child(&mut self, parent: &NodeRef, node_type: &str, id: Option<&str>) -> Result<NodeRef> {
        self.insert_child(parent, {
            let mut n = StructNode::new(node_type);
            n.id = id.map(str::to_owned);
            n
        })
    }

    /// Appends a prebuilt subtree under `parent`; every id in it must be new.
    pub fn insert_child(&mut self, parent: &NodeRef, node: StructNode) -> Result<NodeRef> {
        require("node_type", &node.node_type)?;
        self.get(parent)?;
        let existing = self.ids();
        let mut incoming = HashSet::new();
        let mut dup = None;
        node.walk_all(&mut |n| {
            if let Some(id) = &n.id {
                if existing.contains(id.as_str()) || !incoming.insert(id.clone()) {
                    dup.get_or_insert_with(|| id.clone());
                }
            }
        });
        if let Some(id) = dup {
            return Err(Error::DuplicateIdentifier(id));
        }
        let p = self.get_mut(parent)?;
        p.children.push(node);
        Ok(parent.child(p.children.len() - 1))
    }

    pub fn set_feature(&mut self, node: &NodeRef, category: &str, value: &str) -> Result<()> {
        require("category", category)?;
        self.get_mut(node)?.features.push(Feature::new(category, value));
        Ok(())
    }

    pub fn add_feature(&mut self, node: &NodeRef, feature: Feature) -> Result<()> {
        if !feature.is_well_formed() {
            return Err(Error::InvalidArgument(format!(
                "malformed feature {:?}",
                feature.category
            )));
        }
        self.get_mut(node)?.features.push(feature);
        Ok(())
    }

    pub fn add_alternatives(&mut self, node: &NodeRef, groups: Vec<AltGroup>) -> Result<()> {
        if groups.is_empty() {
            return Err(Error::InvalidArgument("no alternative groups given".into()));
        }
        for g in &groups {
            g.check()?;
        }
        self.get_mut(node)?.alternatives.extend(groups);
        Ok(())
    }

    pub fn add_relation(&mut self, node: &NodeRef, relation: Relation) -> Result<()> {
        if relation.targets.is_empty() {
            return Err(Error::InvalidArgument("relation without targets".into()));
        }
        self.get_mut(node)?.relations.push(relation);
        Ok(())
    }

    pub fn set_seg(&mut self, node: &NodeRef, seg: Seg) -> Result<()> {
        if let Seg::TargetList(p) = &seg {
            if p.is_empty() {
                return Err(Error::InvalidArgument("seg target list is empty".into()));
            }
        }
        self.get_mut(node)?.seg = Some(seg);
        Ok(())
    }

    pub fn iterate(&self, order: Order) -> Vec<NodeRef> {
        fn go(n: &StructNode, at: NodeRef, order: Order, out: &mut Vec<NodeRef>) {
            if order == Order::Pre {
                out.push(at.clone());
            }
            for (i, c) in n.children.iter().enumerate() {
                go(c, at.child(i), order, out);
            }
            if order == Order::Post {
                out.push(at);
            }
        }
        let mut out = Vec::new();
        go(&self.root, NodeRef::root(), order, &mut out);
        out
    }

    /// Finds a node by explicit id, falling back to the node whose seg is the
    /// single pointer `#id` (first in pre-order). The fallback makes nodes of
    /// listings without ids addressable by the object they annotate.
    pub fn find_node(&self, id: &str) -> Result<NodeRef> {
        let order = self.iterate(Order::Pre);
        order
            .iter()
            .find(|r| self.node(r).and_then(|n| n.id.as_deref()) == Some(id))
            .or_else(|| {
                order
                    .iter()
                    .find(|r| self.node(r).and_then(StructNode::anchor_fragment) == Some(id))
            })
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("{id} in {}", self.doc_id)))
    }

    /// Gives every id-less node a fresh `n1`, `n2`, ... in pre-order,
    /// skipping ids already taken.
    pub fn assign_fresh_ids(&mut self) {
        let mut taken: HashSet<String> = self.ids().into_iter().map(str::to_owned).collect();
        let mut counter = 0usize;
        for r in self.iterate(Order::Pre) {
            let node = self.node_mut(&r).expect("path from iterate");
            if node.id.is_none() {
                let id = loop {
                    counter += 1;
                    let candidate = format!("n{counter}");
                    if !taken.contains(&candidate) {
                        break candidate;
                    }
                };
                taken.insert(id.clone());
                node.id = Some(id);
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.iterate(Order::Pre).len()
    }

    /// Checks the structural invariants of the model. Errors make the
    /// document unserializable; warnings flag legal but suspicious shapes.
    pub fn check(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        check_node(&self.root, &mut seen, &mut out);
        for d in &mut out {
            d.file = self.doc_id.clone();
        }
        out
    }
}

fn check_features(fs: &[Feature], where_: &str, out: &mut Vec<Diagnostic>) {
    for f in fs {
        if f.category.is_empty() {
            out.push(Diagnostic::error("empty-category", format!("feature without category on {where_}")));
        } else if f.value.is_empty() && f.children.is_empty() {
            out.push(Diagnostic::error(
                "empty-feature",
                format!("feature {} on {where_} has neither value nor children", f.category),
            ));
        }
        check_features(&f.children, where_, out);
    }
}

fn check_node(n: &StructNode, seen: &mut HashSet<String>, out: &mut Vec<Diagnostic>) {
    let label = n.id.clone().unwrap_or_else(|| format!("<{}>", n.node_type));
    if n.node_type.is_empty() {
        out.push(Diagnostic::error("empty-node-type", format!("node {label} has no type")));
    }
    if let Some(id) = &n.id {
        if id.is_empty() {
            out.push(Diagnostic::error("empty-identifier", "node with empty id"));
        } else if !seen.insert(id.clone()) {
            out.push(Diagnostic::error("duplicate-identifier", format!("id {id} used twice")));
        }
    }
    match &n.seg {
        Some(Seg::TargetList(p)) if p.is_empty() => {
            out.push(Diagnostic::error("empty-seg", format!("seg of {label} has no targets")))
        }
        Some(Seg::TargetList(p)) if p.iter().any(|p| p.fragment.is_empty()) => {
            out.push(Diagnostic::error("empty-pointer", format!("seg of {label} has an empty pointer")))
        }
        Some(Seg::Span {
            starts_at, ends_at, ..
        }) if starts_at > ends_at => out.push(Diagnostic::error(
            "inverted-span",
            format!("span {starts_at}..{ends_at} of {label} is inverted"),
        )),
        _ => {}
    }
    if n.is_landmark() {
        if !matches!(n.seg, Some(Seg::Span { .. })) {
            out.push(Diagnostic::error("landmark-misuse", format!("landmark {label} has no span seg")));
        }
        if !n.features.is_empty() || !n.children.is_empty() {
            out.push(Diagnostic::error(
                "landmark-misuse",
                format!("landmark {label} carries features or children"),
            ));
        }
    }
    check_features(&n.features, &label, out);
    for r in &n.relations {
        if r.rel_type.is_empty() || r.targets.is_empty() {
            out.push(Diagnostic::error("malformed-relation", format!("relation on {label} lacks type or targets")));
        }
    }
    let mut sum = 0.0;
    for g in &n.alternatives {
        if g.is_empty() {
            out.push(Diagnostic::error("empty-alternative", format!("empty alternative on {label}")));
        }
        if let Some(c) = g.confidence {
            if !(0.0..=1.0).contains(&c) {
                out.push(Diagnostic::error("confidence-range", format!("confidence {c} on {label} outside [0, 1]")));
            }
            sum += c;
        }
        check_features(&g.features, &label, out);
        for c in &g.children {
            check_node(c, seen, out);
        }
    }
    if sum > 1.0 + CONFIDENCE_SUM_TOLERANCE {
        out.push(Diagnostic::warning(
            "confidence-sum",
            format!("alternative confidences on {label} sum to {sum}"),
        ));
    }
    if !n.alternatives.is_empty() {
        // features on the node itself are shared by all readings
        for g in &n.alternatives {
            for f in &g.features {
                if n.features.iter().any(|nf| nf.category == f.category) {
                    out.push(Diagnostic::warning(
                        "alternative-overlap",
                        format!("{} is set both on {label} and inside an alternative", f.category),
                    ));
                }
            }
        }
    }
    for c in &n.children {
        check_node(c, seen, out);
    }
}
