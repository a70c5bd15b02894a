//! Tagger-style tabular output in and out of GMT.
//!
//! One token per line, up to four tab-separated columns: surface token,
//! lemma, part of speech and morphology as `k=v;k=v`. A blank line ends a
//! sentence. Tokens are never re-segmented: they are aligned against the
//! primary text as given.

use std::fmt;
use std::str::FromStr;

use crate::anchoring::{project_to_primary, LayerSet, PrimaryContent, PrimaryDoc};
use crate::error::{Error, Result};
use crate::gmt::CONFIDENCE;
use crate::layers::covered_text;
use crate::model::{AltGroup, AnnotationDocument, Feature, NodeRef, Pointer, Seg, StructNode};

pub const PRIMARY_ID: &str = "primary";
pub const DOC_ID: &str = "msa";
pub const MSANNOT: &str = "MSAnnot";
pub const WORD: &str = "W-level";

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TabularRecord {
    pub token: String,
    pub lemma: Option<String>,
    pub pos: Option<String>,
    pub morph: Vec<(String, String)>,
}

impl TabularRecord {
    pub fn new(token: impl Into<String>) -> Result<Self> {
        let token = token.into();
        if token.is_empty() {
            return Err(Error::InvalidArgument("empty token".into()));
        }
        Ok(TabularRecord {
            token,
            ..Default::default()
        })
    }

    pub fn with_lemma(mut self, lemma: impl Into<String>) -> Self {
        self.lemma = Some(lemma.into());
        self
    }

    pub fn with_pos(mut self, pos: impl Into<String>) -> Self {
        self.pos = Some(pos.into());
        self
    }

    pub fn with_morph(mut self, category: impl Into<String>, value: impl Into<String>) -> Self {
        self.morph.push((category.into(), value.into()));
        self
    }

    /// Parses one non-blank line. `line_no` is only used in errors.
    pub fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let fmt_err = |message: String| Error::Format { line: line_no, message };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() > 4 {
            return Err(fmt_err(format!("{} fields, at most 4 expected", fields.len())));
        }
        if fields[0].is_empty() {
            return Err(fmt_err("empty token".into()));
        }
        let opt = |i: usize| fields.get(i).filter(|s| !s.is_empty()).map(|s| s.to_string());
        let mut morph = Vec::new();
        if let Some(m) = fields.get(3).filter(|s| !s.is_empty()) {
            for pair in m.split(';') {
                match pair.split_once('=') {
                    Some((k, v)) if !k.is_empty() && !v.is_empty() => morph.push((k.to_owned(), v.to_owned())),
                    _ => return Err(fmt_err(format!("malformed morphology {pair:?}"))),
                }
            }
        }
        Ok(TabularRecord {
            token: fields[0].to_owned(),
            lemma: opt(1),
            pos: opt(2),
            morph,
        })
    }
}

impl FromStr for TabularRecord {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TabularRecord::parse_line(s, 1)
    }
}

impl fmt::Display for TabularRecord {
    /// Trailing empty columns are dropped.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let morph = self
            .morph
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        let mut cols = vec![
            self.token.as_str(),
            self.lemma.as_deref().unwrap_or(""),
            self.pos.as_deref().unwrap_or(""),
            &morph,
        ];
        while cols.len() > 1 && cols.last().is_some_and(|c| c.is_empty()) {
            cols.pop();
        }
        f.write_str(&cols.join("\t"))
    }
}

/// Splits tabular text into sentences of records.
pub fn read_tabular(text: &str) -> Result<Vec<Vec<TabularRecord>>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        current.push(TabularRecord::parse_line(line, i + 1)?);
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

pub fn write_tabular(sentences: &[Vec<TabularRecord>]) -> String {
    sentences
        .iter()
        .map(|s| s.iter().map(|r| format!("{r}\n")).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Imports tabular text. See [`import_records`].
pub fn import_tabular(lines: &str, text: Option<&str>) -> Result<LayerSet> {
    import_records(&read_tabular(lines)?, text)
}

pub fn import_records(sentences: &[Vec<TabularRecord>], text: Option<&str>) -> Result<LayerSet> {
    import_records_as(sentences, text, PRIMARY_ID, DOC_ID)
}

/// Builds a primary document `primary_id` with marks `w1..wN` and one
/// MSAnnot document per sentence, named `doc_id` or `doc_id.sN` when there
/// are several. Without `text`, the primary is the tokens joined by spaces,
/// one sentence per line.
pub fn import_records_as(
    sentences: &[Vec<TabularRecord>],
    text: Option<&str>,
    primary_id: &str,
    doc_id: &str,
) -> Result<LayerSet> {
    let text = match text {
        Some(t) => t.to_owned(),
        None => sentences
            .iter()
            .map(|s| s.iter().map(|r| r.token.as_str()).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("\n"),
    };
    let mut primary = PrimaryDoc::text(primary_id, text.clone());
    let mut layers = LayerSet::new();
    let mut docs = Vec::new();
    let mut byte_pos = 0;
    let mut char_pos = 0u64;
    let mut index = 0;
    let many = sentences.len() > 1;
    for (s, records) in sentences.iter().enumerate() {
        let id = if many { format!("{doc_id}.s{}", s + 1) } else { doc_id.to_owned() };
        let mut doc = AnnotationDocument::new(&id, MSANNOT, MSANNOT)?.with_primary_ref(primary_id);
        for r in records {
            index += 1;
            let Some(found) = text[byte_pos..].find(&r.token) else {
                return Err(Error::Alignment {
                    record: index,
                    token: r.token.clone(),
                });
            };
            let start = char_pos + text[byte_pos..byte_pos + found].chars().count() as u64;
            let end = start + r.token.chars().count() as u64;
            byte_pos += found + r.token.len();
            char_pos = end;
            let mark = format!("w{index}");
            primary.add_mark(mark.clone(), start, end)?;
            let mut node = StructNode::new(WORD).with_seg(Seg::target(Pointer::new(mark)?));
            if let Some(l) = &r.lemma {
                node.features.push(Feature::new("lemma", l.clone()));
            }
            if let Some(p) = &r.pos {
                node.features.push(Feature::new("pos", p.clone()));
            }
            for (k, v) in &r.morph {
                node.features.push(Feature::new(k.clone(), v.clone()));
            }
            doc.root.children.push(node);
        }
        docs.push(doc);
    }
    if sentences.is_empty() {
        docs.push(AnnotationDocument::new(doc_id, MSANNOT, MSANNOT)?.with_primary_ref(primary_id));
    }
    layers.add_primary(primary)?;
    for d in docs {
        layers.add_annotation(d)?;
    }
    layers.default_target = Some(primary_id.to_owned());
    Ok(layers)
}

/// How a word made of several tokens ("pomme de terre") is flattened.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CompoundPolicy {
    /// Each token carries the compound's analysis.
    Parent,
    /// Each token carries its own analysis.
    #[default]
    Leaves,
}

impl FromStr for CompoundPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parent" => Ok(CompoundPolicy::Parent),
            "leaves" => Ok(CompoundPolicy::Leaves),
            _ => Err(Error::InvalidArgument(format!("unknown compound policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Disambiguation {
    /// Alternatives are an error.
    #[default]
    None,
    HighestConfidence,
}

impl FromStr for Disambiguation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Disambiguation::None),
            "highest-confidence" => Ok(Disambiguation::HighestConfidence),
            _ => Err(Error::InvalidArgument(format!("unknown disambiguation policy {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExportOptions {
    pub compound: CompoundPolicy,
    pub disambiguation: Disambiguation,
}

/// Index of the alternative with the highest confidence; the first one wins
/// ties. `None` when any group lacks a confidence.
pub fn select_alternative(groups: &[AltGroup]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in groups.iter().enumerate() {
        let c = g.confidence?;
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    best.map(|(i, _)| i)
}

struct Exporter<'a> {
    layers: &'a LayerSet,
    doc_id: &'a str,
    options: ExportOptions,
    out: Vec<(u64, TabularRecord)>,
}

impl Exporter<'_> {
    /// The node's features with its alternatives resolved.
    fn features(&self, node: &StructNode, at: &NodeRef) -> Result<Vec<Feature>> {
        let mut fs = node.features.clone();
        if !node.alternatives.is_empty() {
            let chosen = match self.options.disambiguation {
                Disambiguation::None => None,
                Disambiguation::HighestConfidence => select_alternative(&node.alternatives),
            };
            let Some(i) = chosen else {
                return Err(Error::Ambiguity(format!("{}{at} has alternatives", self.doc_id)));
            };
            fs.extend(node.alternatives[i].features.iter().cloned());
        }
        fs.retain(|f| f.category != CONFIDENCE);
        Ok(fs)
    }

    fn start_of(&self, at: &NodeRef) -> Result<Option<u64>> {
        Ok(project_to_primary(self.doc_id, at, self.layers)?.first().map(|e| e.starts_at))
    }

    fn is_fused(&self, node: &StructNode, at: &NodeRef) -> Result<bool> {
        if node.seg.is_none() || node.children.is_empty() {
            return Ok(false);
        }
        let own = project_to_primary(self.doc_id, at, self.layers)?;
        for i in 0..node.children.len() {
            let c = project_to_primary(self.doc_id, &at.child(i), self.layers)?;
            if !c.is_empty() && c != own {
                return Ok(false);
            }
        }
        Ok(!own.is_empty())
    }

    fn record(&self, at: &NodeRef, fs: &[Feature]) -> Result<TabularRecord> {
        let token = covered_text(self.doc_id, at, self.layers)?.text;
        let mut r = TabularRecord::new(token)?;
        for f in fs {
            match f.category.as_str() {
                "lemma" if r.lemma.is_none() => r.lemma = Some(value(f)),
                "pos" if r.pos.is_none() => r.pos = Some(value(f)),
                _ => r.morph.push((f.category.clone(), value(f))),
            }
        }
        Ok(r)
    }

    fn visit(&mut self, at: &NodeRef, overrides: Option<&[Feature]>) -> Result<()> {
        let layers = self.layers;
        let node = crate::anchoring::node_in(layers, self.doc_id, at)?;
        let fs = self.features(node, at)?;
        if node.children.is_empty() {
            if at.is_root() && node.seg.is_none() {
                return Ok(());
            }
            let Some(start) = self.start_of(at)? else {
                return Err(Error::UnresolvedReference(format!("{}{at} has no extent", self.doc_id)));
            };
            let mut r = self.record(at, &fs)?;
            if let Some(o) = overrides {
                apply_overrides(&mut r, o);
            }
            self.out.push((start, r));
            return Ok(());
        }
        if self.is_fused(node, at)? {
            let start = self.start_of(at)?.unwrap_or_default();
            let mut r = self.record(at, &fs)?;
            let (mut lemmas, mut tags) = (Vec::new(), Vec::new());
            for i in 0..node.children.len() {
                let c = at.child(i);
                let cn = crate::anchoring::node_in(layers, self.doc_id, &c)?;
                let cr = self.record_without_surface(cn, &c)?;
                lemmas.extend(cr.lemma);
                tags.extend(cr.pos);
                r.morph.extend(cr.morph);
            }
            if !lemmas.is_empty() {
                r.lemma = Some(lemmas.join("+"));
            }
            if !tags.is_empty() {
                r.pos = Some(tags.join("+"));
            }
            if let Some(o) = overrides {
                apply_overrides(&mut r, o);
            }
            self.out.push((start, r));
            return Ok(());
        }
        let is_word = fs.iter().any(|f| f.category == "lemma" || f.category == "pos");
        let inherited: Option<Vec<Feature>> = match (overrides, self.options.compound) {
            (Some(o), _) => Some(o.to_vec()),
            (None, CompoundPolicy::Parent) if is_word => Some(fs),
            _ => None,
        };
        for i in 0..node.children.len() {
            self.visit(&at.child(i), inherited.as_deref())?;
        }
        Ok(())
    }

    fn record_without_surface(&self, node: &StructNode, at: &NodeRef) -> Result<TabularRecord> {
        let fs = self.features(node, at)?;
        let mut r = TabularRecord::default();
        for f in &fs {
            match f.category.as_str() {
                "lemma" if r.lemma.is_none() => r.lemma = Some(value(f)),
                "pos" if r.pos.is_none() => r.pos = Some(value(f)),
                _ => r.morph.push((f.category.clone(), value(f))),
            }
        }
        Ok(r)
    }
}

/// Feature value as a single tabular field.
fn value(f: &Feature) -> String {
    f.to_string().trim().to_owned()
}

fn apply_overrides(r: &mut TabularRecord, fs: &[Feature]) {
    for f in fs {
        match f.category.as_str() {
            "lemma" => r.lemma = Some(value(f)),
            "pos" => r.pos = Some(value(f)),
            cat => {
                r.morph.retain(|(k, _)| k != cat);
                r.morph.push((cat.to_owned(), value(f)));
            }
        }
    }
}

/// One record per surface token of `doc_id`, in primary order.
pub fn export_tabular(layers: &LayerSet, doc_id: &str, options: ExportOptions) -> Result<Vec<TabularRecord>> {
    layers.annotation(doc_id)?;
    let mut ex = Exporter {
        layers,
        doc_id,
        options,
        out: Vec::new(),
    };
    ex.visit(&NodeRef::root(), None)?;
    let mut out = ex.out;
    out.sort_by_key(|(start, _)| *start);
    Ok(out.into_iter().map(|(_, r)| r).collect())
}

/// Mark table of a primary document: `id<TAB>start<TAB>end` per line, in
/// offset order.
pub fn write_marks(primary: &PrimaryDoc) -> String {
    let mut marks: Vec<_> = primary.marks.iter().collect();
    marks.sort_by_key(|(id, (s, e))| (*s, *e, *id));
    marks
        .into_iter()
        .map(|(id, (s, e))| format!("{id}\t{s}\t{e}\n"))
        .collect()
}

pub fn read_marks(primary: &mut PrimaryDoc, table: &str) -> Result<()> {
    for (i, line) in table.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fmt_err = |message: String| Error::Format { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        let [id, s, e] = cols[..] else {
            return Err(fmt_err(format!("{} columns, 3 expected", cols.len())));
        };
        let num = |v: &str| v.trim().parse::<u64>().map_err(|_| fmt_err(format!("bad offset {v:?}")));
        primary.add_mark(id, num(s)?, num(e)?)?;
    }
    Ok(())
}

/// Text of a textual primary document.
pub fn primary_text(primary: &PrimaryDoc) -> Option<&str> {
    match &primary.content {
        PrimaryContent::Text(t) => Some(t),
        PrimaryContent::Timed { .. } => None,
    }
}
