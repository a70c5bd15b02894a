//! GMT markup: parsing, serialization and canonical form.
//!
//! Element mapping: `struct` is a node (`type`, optional `id`), `feat` a
//! feature (`type`, text, nested `feat`s), `seg` an anchor (`target`,
//! `targets`, `startsAt`/`endsAt` or `startPosition`/`endPosition`, optional
//! `unit`), `alt` an alternative group, `rel` a relation (`type`, `source`,
//! `targets`, `directed`). The root `struct` may also carry `doc`, `level`
//! and `refs` for the document header.
//!
//! Lenient mode repairs common hand-written slips: unclosed `seg`
//! start tags, stray end tags, several top-level `struct`s and untyped
//! nodes. Each repair yields a warning; strict mode rejects them instead.

use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::reader::Reader;

use crate::diag::Diagnostic;
use crate::error::{Error, Result};
use crate::model::{
    AltGroup, AnnotationDocument, Feature, Pointer, Relation, Seg, SpanUnit, StructNode,
};

pub const CONFIDENCE: &str = "confidence";
pub const UNKNOWN_TYPE: &str = "unknown";
/// Node type given to the wrapper synthesized around several top-level structs.
pub const SYNTHETIC_ROOT: &str = "root";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpanAttrStyle {
    #[default]
    StartsAtEndsAt,
    StartPositionEndPosition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PointerStyle {
    #[default]
    HashPrefixed,
    Bare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GmtDialect {
    pub span_attr_style: SpanAttrStyle,
    pub pointer_style: PointerStyle,
    pub strict: bool,
}

impl GmtDialect {
    pub fn lenient() -> Self {
        Self::default()
    }

    pub fn strict() -> Self {
        GmtDialect {
            strict: true,
            ..Self::default()
        }
    }

    /// `startsAt`/`endsAt` spans and `#`-prefixed pointers.
    pub fn canonical() -> Self {
        Self::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub document: AnnotationDocument,
    pub diagnostics: Vec<Diagnostic>,
    /// Surface conventions seen in the input, for writing it back alike.
    pub observed: GmtDialect,
}

struct LineIndex(Vec<usize>);

impl LineIndex {
    fn new(src: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(src.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex(starts)
    }

    fn locate(&self, src: &str, pos: usize) -> (usize, usize) {
        let pos = pos.min(src.len());
        let line = self.0.partition_point(|&s| s <= pos);
        let start = self.0[line - 1];
        let col = src.get(start..pos).map_or(pos - start, |s| s.chars().count()) + 1;
        (line, col)
    }
}

enum Frame {
    Struct(StructNode, SegSlot),
    Feat(Feature),
    Alt(AltGroup),
    /// An open `<seg>` start tag awaiting `</seg>`.
    Seg,
    Rel,
    /// Unknown element skipped in lenient mode.
    Skip(String),
}

/// Tracks whether a node already has a seg so a second one is rejected.
#[derive(Default)]
struct SegSlot(bool);

impl Frame {
    fn name(&self) -> &str {
        match self {
            Frame::Struct(..) => "struct",
            Frame::Feat(_) => "feat",
            Frame::Alt(_) => "alt",
            Frame::Seg => "seg",
            Frame::Rel => "rel",
            Frame::Skip(n) => n,
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    lines: LineIndex,
    name: String,
    strict: bool,
    diags: Vec<Diagnostic>,
    observed: GmtDialect,
    seen_span: bool,
    seen_pointer: bool,
    stack: Vec<Frame>,
    roots: Vec<StructNode>,
    header: Header,
}

#[derive(Default)]
struct Header {
    doc: Option<String>,
    level: Option<String>,
    refs: Vec<String>,
}

impl<'a> Parser<'a> {
    fn pos(&self, at: usize) -> (usize, usize) {
        self.lines.locate(self.src, at)
    }

    /// Records a lenient repair, or fails in strict mode.
    fn repair(&mut self, at: usize, code: &'static str, message: String) -> Result<()> {
        let (line, column) = self.pos(at);
        if self.strict {
            return Err(Error::Parse {
                line,
                column,
                message: format!("{code}: {message}"),
            });
        }
        self.diags
            .push(Diagnostic::warning(code, message).in_file(self.name.as_str()).at(line, column));
        Ok(())
    }

    fn parse_error(&self, at: usize, message: impl Into<String>) -> Error {
        let (line, column) = self.pos(at);
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn attrs(&mut self, e: &BytesStart, at: usize) -> Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for a in e.attributes() {
            let a = a.map_err(|err| self.parse_error(at, format!("bad attribute: {err}")))?;
            let key = std::str::from_utf8(a.key.as_ref())
                .map_err(|_| self.parse_error(at, "attribute name is not UTF-8"))?
                .to_owned();
            let value = a
                .unescape_value()
                .map_err(|err| self.parse_error(at, format!("bad attribute value: {err}")))?
                .into_owned();
            out.push((key, value));
        }
        Ok(out)
    }

    fn unknown_attrs(&mut self, elem: &str, attrs: &[(String, String)], known: &[&str], at: usize) -> Result<()> {
        for (k, _) in attrs {
            if !known.contains(&k.as_str()) && !k.starts_with("xmlns") {
                self.repair(at, "unknown-attribute", format!("attribute {k} on <{elem}> ignored"))?;
            }
        }
        Ok(())
    }

    fn pointer(&mut self, raw: &str, at: usize) -> Result<Pointer> {
        if !self.seen_pointer {
            self.seen_pointer = true;
            self.observed.pointer_style = if raw.contains('#') {
                PointerStyle::HashPrefixed
            } else {
                PointerStyle::Bare
            };
        }
        raw.parse()
            .map_err(|e| self.parse_error(at, format!("bad pointer {raw:?}: {e}")))
    }

    fn pointer_list(&mut self, raw: &str, at: usize) -> Result<Vec<Pointer>> {
        raw.split_whitespace().map(|p| self.pointer(p, at)).collect()
    }

    fn top_is_seg(&self) -> bool {
        matches!(self.stack.last(), Some(Frame::Seg))
    }

    /// Closes an unterminated `<seg>` before any other markup event.
    fn close_open_seg(&mut self, at: usize) -> Result<()> {
        if self.top_is_seg() {
            self.repair(at, "unclosed-seg", "<seg> start tag never closed; treated as empty".into())?;
            self.stack.pop();
        }
        Ok(())
    }

    fn in_skip(&self) -> bool {
        self.stack.iter().any(|f| matches!(f, Frame::Skip(_)))
    }

    fn start(&mut self, e: &BytesStart, at: usize, empty: bool) -> Result<()> {
        let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
        if self.in_skip() {
            if !empty {
                self.stack.push(Frame::Skip(name));
            }
            return Ok(());
        }
        let attrs = self.attrs(e, at)?;
        let get = |k: &str| attrs.iter().find(|(a, _)| a == k).map(|(_, v)| v.clone());
        match name.as_str() {
            "struct" => {
                let is_root = self.stack.is_empty();
                let known: &[&str] = if is_root {
                    &["type", "id", "doc", "level", "refs"]
                } else {
                    &["type", "id"]
                };
                self.unknown_attrs("struct", &attrs, known, at)?;
                match self.stack.last() {
                    None | Some(Frame::Struct(..)) | Some(Frame::Alt(_)) => {}
                    Some(f) => {
                        let parent = f.name().to_owned();
                        return Err(self.parse_error(at, format!("<struct> not allowed inside <{parent}>")));
                    }
                }
                let node_type = match get("type") {
                    Some(t) if !t.is_empty() => t,
                    _ => {
                        self.repair(at, "missing-type", format!("<struct> without type; using {UNKNOWN_TYPE:?}"))?;
                        UNKNOWN_TYPE.to_owned()
                    }
                };
                let mut node = StructNode::new(node_type);
                node.id = get("id");
                if is_root && self.roots.is_empty() {
                    self.header.doc = get("doc");
                    self.header.level = get("level");
                    self.header.refs = get("refs")
                        .map(|r| r.split_whitespace().map(str::to_owned).collect())
                        .unwrap_or_default();
                }
                self.stack.push(Frame::Struct(node, SegSlot::default()));
                if empty {
                    self.end_struct(at)?;
                }
            }
            "feat" => {
                self.unknown_attrs("feat", &attrs, &["type"], at)?;
                if !matches!(
                    self.stack.last(),
                    Some(Frame::Struct(..) | Frame::Feat(_) | Frame::Alt(_))
                ) {
                    return Err(self.parse_error(at, "<feat> outside <struct>"));
                }
                let category = match get("type") {
                    Some(t) if !t.is_empty() => t,
                    _ => {
                        self.repair(at, "missing-type", format!("<feat> without type; using {UNKNOWN_TYPE:?}"))?;
                        UNKNOWN_TYPE.to_owned()
                    }
                };
                self.stack.push(Frame::Feat(Feature::new(category, "")));
                if empty {
                    self.end_feat(at)?;
                }
            }
            "alt" => {
                self.unknown_attrs("alt", &attrs, &[], at)?;
                if !matches!(self.stack.last(), Some(Frame::Struct(..))) {
                    return Err(self.parse_error(at, "<alt> outside <struct>"));
                }
                self.stack.push(Frame::Alt(AltGroup::default()));
                if empty {
                    self.end_alt(at)?;
                }
            }
            "seg" => {
                self.unknown_attrs(
                    "seg",
                    &attrs,
                    &["target", "targets", "startsAt", "endsAt", "startPosition", "endPosition", "unit"],
                    at,
                )?;
                let seg = self.seg_from(&attrs, at)?;
                match self.stack.last_mut() {
                    Some(Frame::Struct(node, slot)) => {
                        if slot.0 {
                            let (line, column) = self.lines.locate(self.src, at);
                            return Err(Error::ConflictingAnchor {
                                line,
                                column,
                                message: "node has more than one <seg>".into(),
                            });
                        }
                        slot.0 = true;
                        node.seg = Some(seg);
                    }
                    _ => return Err(self.parse_error(at, "<seg> outside <struct>")),
                }
                if !empty {
                    self.stack.push(Frame::Seg);
                }
            }
            "rel" => {
                self.unknown_attrs("rel", &attrs, &["type", "source", "targets", "target", "directed"], at)?;
                let rel_type = get("type").unwrap_or_default();
                let targets = match get("targets").or_else(|| get("target")) {
                    Some(t) => self.pointer_list(&t, at)?,
                    None => Vec::new(),
                };
                if rel_type.is_empty() || targets.is_empty() {
                    return Err(self.parse_error(at, "<rel> needs type and targets"));
                }
                let directed = match get("directed").as_deref() {
                    None | Some("true") | Some("yes") => true,
                    Some("false") | Some("no") => false,
                    Some(other) => return Err(self.parse_error(at, format!("bad directed value {other:?}"))),
                };
                let mut rel = Relation::new(rel_type, targets, directed).map_err(|e| self.parse_error(at, e.to_string()))?;
                if let Some(s) = get("source") {
                    rel.source = Some(self.pointer(&s, at)?);
                }
                match self.stack.last_mut() {
                    Some(Frame::Struct(node, _)) => node.relations.push(rel),
                    _ => return Err(self.parse_error(at, "<rel> outside <struct>")),
                }
                if !empty {
                    self.stack.push(Frame::Rel);
                }
            }
            other => {
                if self.strict {
                    let (line, column) = self.pos(at);
                    return Err(Error::UnknownElement {
                        name: other.to_owned(),
                        line,
                        column,
                    });
                }
                self.repair(at, "unknown-element", format!("<{other}> skipped with its content"))?;
                if !empty {
                    self.stack.push(Frame::Skip(other.to_owned()));
                }
            }
        }
        Ok(())
    }

    fn seg_from(&mut self, attrs: &[(String, String)], at: usize) -> Result<Seg> {
        let get = |k: &str| attrs.iter().find(|(a, _)| a == k).map(|(_, v)| v.as_str());
        let target = get("target");
        let targets = get("targets");
        let start = get("startsAt").map(|v| (v, SpanAttrStyle::StartsAtEndsAt)).or(get("startPosition").map(|v| (v, SpanAttrStyle::StartPositionEndPosition)));
        let end = get("endsAt").or(get("endPosition"));
        let (line, column) = self.pos(at);
        let conflict = |message: &str| Error::ConflictingAnchor {
            line,
            column,
            message: message.to_owned(),
        };
        let has_ptr = target.is_some() || targets.is_some();
        let has_span = start.is_some() || end.is_some();
        if has_ptr && has_span {
            return Err(conflict("seg has both pointers and a span"));
        }
        if target.is_some() && targets.is_some() {
            return Err(conflict("seg has both target and targets"));
        }
        if has_span {
            let (Some((s, style)), Some(e)) = (start, end) else {
                return Err(self.parse_error(at, "span needs both a start and an end"));
            };
            if !self.seen_span {
                self.seen_span = true;
                self.observed.span_attr_style = style;
            }
            let num = |v: &str| {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| self.parse_error(at, format!("span offset {v:?} is not a non-negative integer")))
            };
            let (s, e) = (num(s)?, num(e)?);
            let unit = match get("unit") {
                Some(u) => u.parse().map_err(|err: Error| self.parse_error(at, err.to_string()))?,
                None => SpanUnit::TimeUnit,
            };
            return Seg::span(s, e, unit).map_err(|err| self.parse_error(at, err.to_string()));
        }
        let raw = target.or(targets).ok_or_else(|| self.parse_error(at, "seg without target or span"))?;
        let ptrs = self.pointer_list(raw, at)?;
        Seg::targets(ptrs).map_err(|err| self.parse_error(at, err.to_string()))
    }

    fn end_struct(&mut self, at: usize) -> Result<()> {
        let Some(Frame::Struct(node, _)) = self.stack.pop() else {
            unreachable!("end_struct on non-struct frame")
        };
        match self.stack.last_mut() {
            Some(Frame::Struct(parent, _)) => parent.children.push(node),
            Some(Frame::Alt(g)) => g.children.push(node),
            None => {
                if !self.roots.is_empty() {
                    self.repair(at, "multiple-roots", "more than one top-level <struct>".into())?;
                }
                self.roots.push(node);
            }
            _ => unreachable!("struct pushed under non-container"),
        }
        Ok(())
    }

    fn end_feat(&mut self, at: usize) -> Result<()> {
        let Some(Frame::Feat(mut f)) = self.stack.pop() else {
            unreachable!("end_feat on non-feat frame")
        };
        if !f.children.is_empty() {
            // formatting whitespace around nested features is not content
            f.value = f.value.trim().to_owned();
        }
        if f.value.is_empty() && f.children.is_empty() {
            self.repair(at, "empty-feature", format!("<feat type={:?}> has no content", f.category))?;
        }
        match self.stack.last_mut() {
            Some(Frame::Struct(node, _)) => node.features.push(f),
            Some(Frame::Feat(parent)) => parent.children.push(f),
            Some(Frame::Alt(g)) => {
                let lifted = f.category == CONFIDENCE && g.confidence.is_none() && f.children.is_empty();
                match f.value.trim().parse::<f64>() {
                    Ok(c) if lifted => g.confidence = Some(c),
                    _ => g.features.push(f),
                }
            }
            _ => unreachable!("feat pushed under non-container"),
        }
        Ok(())
    }

    fn end_alt(&mut self, at: usize) -> Result<()> {
        let Some(Frame::Alt(g)) = self.stack.pop() else {
            unreachable!("end_alt on non-alt frame")
        };
        if g.is_empty() {
            self.repair(at, "empty-alternative", "<alt> without features or structures dropped".into())?;
            return Ok(());
        }
        match self.stack.last_mut() {
            Some(Frame::Struct(node, _)) => node.alternatives.push(g),
            _ => unreachable!("alt pushed under non-struct"),
        }
        Ok(())
    }

    fn end(&mut self, name: &str, at: usize) -> Result<()> {
        if let Some(Frame::Skip(n)) = self.stack.last() {
            if n == name {
                self.stack.pop();
                return Ok(());
            }
            if self.in_skip() {
                return Err(self.parse_error(at, format!("mismatched </{name}> inside skipped <{n}>")));
            }
        }
        if name == "seg" && self.top_is_seg() {
            self.stack.pop();
            return Ok(());
        }
        if name == "rel" && matches!(self.stack.last(), Some(Frame::Rel)) {
            self.stack.pop();
            return Ok(());
        }
        self.close_open_seg(at)?;
        match self.stack.last() {
            None => self.repair(at, "stray-end-tag", format!("</{name}> without matching start tag ignored")),
            Some(f) if f.name() == name => match f {
                Frame::Struct(..) => self.end_struct(at),
                Frame::Feat(_) => self.end_feat(at),
                Frame::Alt(_) => self.end_alt(at),
                _ => unreachable!("seg/rel/skip handled above"),
            },
            Some(f) => {
                let open = f.name().to_owned();
                Err(self.parse_error(at, format!("</{name}> closes <{open}>")))
            }
        }
    }

    fn text(&mut self, text: &str, at: usize) -> Result<()> {
        if self.in_skip() {
            return Ok(());
        }
        match self.stack.last_mut() {
            Some(Frame::Feat(f)) => {
                f.value.push_str(text);
                Ok(())
            }
            _ if text.trim().is_empty() => Ok(()),
            Some(f) => {
                let open = f.name().to_owned();
                self.repair(at, "stray-text", format!("text {:?} inside <{open}> ignored", text.trim()))
            }
            None => self.repair(at, "stray-text", format!("text {:?} outside the root ignored", text.trim())),
        }
    }

    fn run(mut self) -> Result<Parsed> {
        let mut reader = Reader::from_str(self.src);
        reader.config_mut().check_end_names = false;
        loop {
            let at = reader.buffer_position() as usize;
            let ev = match reader.read_event() {
                Ok(ev) => ev,
                Err(e) => return Err(self.parse_error(reader.error_position() as usize, e.to_string())),
            };
            match ev {
                Event::Eof => break,
                Event::Start(e) => {
                    self.close_open_seg(at)?;
                    self.start(&e, at, false)?;
                }
                Event::Empty(e) => {
                    self.close_open_seg(at)?;
                    self.start(&e, at, true)?;
                }
                Event::End(e) => {
                    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                    self.end(&name, at)?;
                }
                Event::Text(t) => {
                    let s = t
                        .decode()
                        .map_err(|e| self.parse_error(at, format!("bad text: {e}")))?
                        .into_owned();
                    self.text(&s, at)?;
                }
                Event::CData(t) => {
                    let s = String::from_utf8_lossy(&t.into_inner()).into_owned();
                    self.text(&s, at)?;
                }
                Event::GeneralRef(r) => {
                    let s = if let Some(c) = r
                        .resolve_char_ref()
                        .map_err(|e| self.parse_error(at, e.to_string()))?
                    {
                        c.to_string()
                    } else {
                        let name = String::from_utf8_lossy(&r).into_owned();
                        quick_xml::escape::resolve_predefined_entity(&name)
                            .ok_or_else(|| self.parse_error(at, format!("unknown entity &{name};")))?
                            .to_owned()
                    };
                    self.text(&s, at)?;
                }
                Event::Comment(_) | Event::Decl(_) | Event::PI(_) | Event::DocType(_) => {}
            }
        }
        let end = self.src.len();
        self.close_open_seg(end)?;
        if let Some(f) = self.stack.last() {
            return Err(self.parse_error(end, format!("<{}> is never closed", f.name())));
        }
        let root = match self.roots.len() {
            0 => return Err(self.parse_error(end, "no <struct> element")),
            1 => self.roots.pop().expect("one root"),
            _ => {
                let mut wrapper = StructNode::new(SYNTHETIC_ROOT);
                wrapper.children = std::mem::take(&mut self.roots);
                wrapper
            }
        };
        let doc_id = self.header.doc.take().unwrap_or_else(|| doc_id_from_name(&self.name));
        let level = self.header.level.take().unwrap_or_else(|| root.node_type.clone());
        Ok(Parsed {
            document: AnnotationDocument {
                doc_id,
                level,
                root,
                primary_refs: std::mem::take(&mut self.header.refs),
            },
            diagnostics: self.diags,
            observed: self.observed,
        })
    }
}

/// Document id synthesized from an input name: file stem without the
/// `.gmt.xml` / `.xml` extension.
pub fn doc_id_from_name(name: &str) -> String {
    let base = name.rsplit(['/', '\\']).next().unwrap_or(name);
    let stem = base
        .strip_suffix(".gmt.xml")
        .or_else(|| base.strip_suffix(".xml"))
        .unwrap_or(base);
    if stem.is_empty() {
        "doc".to_owned()
    } else {
        stem.to_owned()
    }
}

/// Decodes input bytes, honoring a BOM or the encoding named in the
/// markup declaration. Defaults to UTF-8.
pub fn decode(bytes: &[u8]) -> Result<String> {
    if let Some((enc, bom_len)) = encoding_rs::Encoding::for_bom(bytes) {
        let (s, had_errors) = enc.decode_without_bom_handling(&bytes[bom_len..]);
        if had_errors {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("input is not valid {}", enc.name()),
            });
        }
        return Ok(s.into_owned());
    }
    let head = String::from_utf8_lossy(&bytes[..bytes.len().min(200)]);
    let declared = head.strip_prefix("<?xml").and_then(|rest| {
        let decl = &rest[..rest.find("?>")?];
        let i = decl.find("encoding")?;
        let after = decl[i + "encoding".len()..].trim_start().strip_prefix('=')?.trim_start();
        let quote = after.chars().next()?;
        let body = &after[1..];
        Some(body[..body.find(quote)?].to_owned())
    });
    let enc = match declared {
        Some(label) => encoding_rs::Encoding::for_label(label.as_bytes()).ok_or_else(|| Error::Parse {
            line: 1,
            column: 1,
            message: format!("unsupported encoding {label:?}"),
        })?,
        None => encoding_rs::UTF_8,
    };
    let (s, _, had_errors) = enc.decode(bytes);
    if had_errors {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("input is not valid {}", enc.name()),
        });
    }
    Ok(s.into_owned())
}

/// Parses GMT markup. `name` is used in diagnostics and, when the root has
/// no `doc` attribute, to synthesize the document id.
pub fn parse(bytes: &[u8], dialect: GmtDialect, name: &str) -> Result<Parsed> {
    let src = decode(bytes)?;
    let parser = Parser {
        src: &src,
        lines: LineIndex::new(&src),
        name: name.to_owned(),
        strict: dialect.strict,
        diags: Vec::new(),
        observed: GmtDialect {
            strict: dialect.strict,
            ..dialect
        },
        seen_span: false,
        seen_pointer: false,
        stack: Vec::new(),
        roots: Vec::new(),
        header: Header::default(),
    };
    parser.run()
}

pub fn parse_str(src: &str, dialect: GmtDialect, name: &str) -> Result<Parsed> {
    parse(src.as_bytes(), dialect, name)
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            _ => out.push(c),
        }
    }
    out
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            _ => out.push(c),
        }
    }
    out
}

struct Writer {
    out: String,
    dialect: GmtDialect,
}

impl Writer {
    fn indent(&mut self, depth: usize) {
        for _ in 0..depth {
            self.out.push_str("  ");
        }
    }

    fn pointers(&self, ptrs: &[Pointer]) -> String {
        let hash = self.dialect.pointer_style == PointerStyle::HashPrefixed;
        ptrs.iter().map(|p| escape_attr(&p.render(hash))).collect::<Vec<_>>().join(" ")
    }

    fn seg(&mut self, seg: &Seg, depth: usize) {
        self.indent(depth);
        match seg {
            Seg::TargetList(p) if p.len() == 1 => {
                let _ = writeln!(self.out, "<seg target=\"{}\"/>", self.pointers(p));
            }
            Seg::TargetList(p) => {
                let _ = writeln!(self.out, "<seg targets=\"{}\"/>", self.pointers(p));
            }
            Seg::Span {
                starts_at,
                ends_at,
                unit,
            } => {
                let (s, e) = match self.dialect.span_attr_style {
                    SpanAttrStyle::StartsAtEndsAt => ("startsAt", "endsAt"),
                    SpanAttrStyle::StartPositionEndPosition => ("startPosition", "endPosition"),
                };
                let unit_attr = match unit {
                    SpanUnit::TimeUnit => String::new(),
                    SpanUnit::CharacterOffset => " unit=\"char\"".to_owned(),
                };
                let _ = writeln!(self.out, "<seg {s}=\"{starts_at}\" {e}=\"{ends_at}\"{unit_attr}/>");
            }
        }
    }

    fn feature(&mut self, f: &Feature, depth: usize) {
        self.indent(depth);
        let _ = write!(self.out, "<feat type=\"{}\">{}", escape_attr(&f.category), escape_text(&f.value));
        if !f.children.is_empty() {
            self.out.push('\n');
            for c in &f.children {
                self.feature(c, depth + 1);
            }
            self.indent(depth);
        }
        self.out.push_str("</feat>\n");
    }

    fn relation(&mut self, r: &Relation, depth: usize) {
        self.indent(depth);
        let _ = write!(self.out, "<rel type=\"{}\"", escape_attr(&r.rel_type));
        if let Some(s) = &r.source {
            let _ = write!(self.out, " source=\"{}\"", self.pointers(std::slice::from_ref(s)));
        }
        let _ = write!(self.out, " targets=\"{}\"", self.pointers(&r.targets));
        if !r.directed {
            self.out.push_str(" directed=\"false\"");
        }
        self.out.push_str("/>\n");
    }

    fn node(&mut self, n: &StructNode, depth: usize, header: &str) {
        self.indent(depth);
        let _ = write!(self.out, "<struct type=\"{}\"", escape_attr(&n.node_type));
        if let Some(id) = &n.id {
            let _ = write!(self.out, " id=\"{}\"", escape_attr(id));
        }
        self.out.push_str(header);
        let empty = n.seg.is_none()
            && n.features.is_empty()
            && n.alternatives.is_empty()
            && n.relations.is_empty()
            && n.children.is_empty();
        if empty {
            self.out.push_str("/>\n");
            return;
        }
        self.out.push_str(">\n");
        if let Some(seg) = &n.seg {
            self.seg(seg, depth + 1);
        }
        for f in &n.features {
            self.feature(f, depth + 1);
        }
        for g in &n.alternatives {
            self.indent(depth + 1);
            self.out.push_str("<alt>\n");
            for f in &g.features {
                self.feature(f, depth + 2);
            }
            if let Some(c) = g.confidence {
                self.feature(&Feature::new(CONFIDENCE, c.to_string()), depth + 2);
            }
            for c in &g.children {
                self.node(c, depth + 2, "");
            }
            self.indent(depth + 1);
            self.out.push_str("</alt>\n");
        }
        for r in &n.relations {
            self.relation(r, depth + 1);
        }
        for c in &n.children {
            self.node(c, depth + 1, "");
        }
        self.indent(depth);
        self.out.push_str("</struct>\n");
    }
}

/// Writes a document as GMT markup, two spaces of indentation per level.
/// Refuses documents that break model invariants.
pub fn serialize(document: &AnnotationDocument, dialect: GmtDialect) -> Result<Vec<u8>> {
    let errors: Vec<String> = document
        .check()
        .into_iter()
        .filter(Diagnostic::is_error)
        .map(|d| d.message)
        .collect();
    if !errors.is_empty() {
        return Err(Error::SerializationRefused(errors.join("; ")));
    }
    let mut header = format!(" doc=\"{}\"", escape_attr(&document.doc_id));
    if document.level != document.root.node_type {
        let _ = write!(header, " level=\"{}\"", escape_attr(&document.level));
    }
    if !document.primary_refs.is_empty() {
        let _ = write!(header, " refs=\"{}\"", escape_attr(&document.primary_refs.join(" ")));
    }
    let mut w = Writer {
        out: String::new(),
        dialect,
    };
    w.node(&document.root, 0, &header);
    Ok(w.out.into_bytes())
}

fn canonical_features(fs: &mut [Feature]) {
    for f in fs.iter_mut() {
        let trimmed = f.value.trim();
        if trimmed.len() != f.value.len() {
            f.value = trimmed.to_owned();
        }
        canonical_features(&mut f.children);
    }
    fs.sort_by(|a, b| (&a.category, &a.value).cmp(&(&b.category, &b.value)));
}

fn canonical_node(n: &mut StructNode) {
    canonical_features(&mut n.features);
    for g in &mut n.alternatives {
        canonical_features(&mut g.features);
        g.children.iter_mut().for_each(canonical_node);
    }
    n.children.iter_mut().for_each(canonical_node);
}

/// Stable form for comparison: features sorted by (category, value) and
/// trimmed. Idempotent.
pub fn canonicalize(document: &AnnotationDocument) -> AnnotationDocument {
    let mut d = document.clone();
    canonical_node(&mut d.root);
    d
}

/// Canonical form written in the canonical dialect.
pub fn canonical_bytes(document: &AnnotationDocument) -> Result<Vec<u8>> {
    serialize(&canonicalize(document), GmtDialect::canonical())
}
