//! Data category registry.
//!
//! A [`DataCategory`] is the template; a [`Feature`] on a node is an
//! instance of it. The registry validates documents against the templates
//! and maps scheme-specific category names onto reference names.
//!
//! Registry files hold one category per line:
//!
//! ```text
//! name | value_space | applicable_levels | repeatable | parent | gloss
//! ```
//!
//! `value_space` is `open`, `closed:v1;v2;...`, `numeric:min..max` or
//! `pointer`; levels are comma separated (`*` or empty for any); `parent`
//! is `-` when absent. Mapping files hold `scheme | local | reference`.
//! `#` starts a comment.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;

use crate::diag::Diagnostic;
use crate::error::{Error, Result};
use crate::gmt::CONFIDENCE;
use crate::model::{AltGroup, AnnotationDocument, Feature, Pointer, StructNode};

#[derive(Debug, Clone, PartialEq)]
pub enum ValueSpace {
    OpenText,
    Closed(Vec<String>),
    Numeric { min: f64, max: f64 },
    Pointer,
}

impl ValueSpace {
    fn render(&self) -> String {
        match self {
            ValueSpace::OpenText => "open".into(),
            ValueSpace::Closed(v) => format!("closed:{}", v.join(";")),
            ValueSpace::Numeric { min, max } => format!("numeric:{min}..{max}"),
            ValueSpace::Pointer => "pointer".into(),
        }
    }

    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "open" {
            return Ok(ValueSpace::OpenText);
        }
        if s == "pointer" {
            return Ok(ValueSpace::Pointer);
        }
        if let Some(vals) = s.strip_prefix("closed:") {
            return Ok(ValueSpace::Closed(
                vals.split(';').map(str::trim).filter(|v| !v.is_empty()).map(str::to_owned).collect(),
            ));
        }
        if let Some(range) = s.strip_prefix("numeric:") {
            let (lo, hi) = range
                .split_once("..")
                .ok_or_else(|| Error::InvalidCategory(format!("bad numeric range {range:?}")))?;
            let num = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidCategory(format!("bad numeric bound {v:?}")))
            };
            return Ok(ValueSpace::Numeric {
                min: num(lo)?,
                max: num(hi)?,
            });
        }
        Err(Error::InvalidCategory(format!("unknown value space {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataCategory {
    pub name: String,
    pub gloss: String,
    pub value_space: ValueSpace,
    /// Node types the category may appear on; empty means any.
    pub applicable_levels: Vec<String>,
    pub repeatable: bool,
    /// Recorded but not enforced.
    pub parent: Option<String>,
}

impl DataCategory {
    pub fn new(name: &str, value_space: ValueSpace, gloss: &str) -> Self {
        DataCategory {
            name: name.to_owned(),
            gloss: gloss.to_owned(),
            value_space,
            applicable_levels: Vec::new(),
            repeatable: true,
            parent: None,
        }
    }

    pub fn repeatable(mut self, repeatable: bool) -> Self {
        self.repeatable = repeatable;
        self
    }

    pub fn levels(mut self, levels: &[&str]) -> Self {
        self.applicable_levels = levels.iter().map(|s| s.to_string()).collect();
        self
    }

    fn check(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidCategory("empty category name".into()));
        }
        match &self.value_space {
            ValueSpace::Closed(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidCategory(format!("{}: empty closed value list", self.name)));
                }
                let mut seen = HashSet::new();
                if let Some(d) = v.iter().find(|x| !seen.insert(x.as_str())) {
                    return Err(Error::InvalidCategory(format!("{}: duplicate value {d:?}", self.name)));
                }
            }
            ValueSpace::Numeric { min, max } if min.partial_cmp(max).is_none_or(|o| o.is_gt()) => {
                return Err(Error::InvalidCategory(format!("{}: numeric min {min} > max {max}", self.name)));
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Registry {
    categories: IndexMap<String, DataCategory>,
    mappings: IndexMap<(String, String), String>,
}

/// The categories used by the morpho-syntactic, phonetic and syntactic
/// examples. Everything is open text except `confidence`.
pub fn seed_registry() -> Registry {
    let open = |name: &str, gloss: &str| DataCategory::new(name, ValueSpace::OpenText, gloss);
    let mut reg = Registry::default();
    for c in [
        open("lemma", "reference word form of a token or token sequence"),
        open("pos", "part of speech of a token or token sequence"),
        DataCategory::new(
            CONFIDENCE,
            ValueSpace::Numeric { min: 0.0, max: 1.0 },
            "confidence level assigned by the manual or automatic annotator",
        )
        .repeatable(false),
        open("gender", "grammatical gender"),
        open("number", "grammatical number"),
        open("tense", "grammatical tense"),
        open("person", "grammatical person"),
        open("phone", "phonetic transcription of a segment"),
        open("synCat", "syntactic category of a constituent"),
    ] {
        reg.categories.insert(c.name.clone(), c);
    }
    reg
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lookup(&self, name: &str) -> Result<&DataCategory> {
        self.categories
            .get(name)
            .ok_or_else(|| Error::NotFound(format!("category {name}")))
    }

    pub fn categories(&self) -> impl Iterator<Item = &DataCategory> {
        self.categories.values()
    }

    pub fn mappings(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.mappings
            .iter()
            .map(|((s, l), r)| (s.as_str(), l.as_str(), r.as_str()))
    }

    /// Returns a registry with `cat` added or replaced; replacing emits a
    /// redefinition note.
    pub fn define(&self, cat: DataCategory) -> Result<(Registry, Vec<Diagnostic>)> {
        cat.check()?;
        let mut reg = self.clone();
        let mut diags = Vec::new();
        if reg.categories.contains_key(&cat.name) {
            diags.push(Diagnostic::note("redefinition", format!("category {} redefined", cat.name)));
        }
        reg.categories.insert(cat.name.clone(), cat);
        Ok((reg, diags))
    }

    /// Adds a scheme-specific name; the reference name must already exist.
    pub fn add_mapping(&self, scheme: &str, local: &str, reference: &str) -> Result<Registry> {
        if scheme.is_empty() || local.is_empty() {
            return Err(Error::InvalidArgument("mapping needs a scheme and a local name".into()));
        }
        if !self.categories.contains_key(reference) {
            return Err(Error::InvalidCategory(format!(
                "mapping ({scheme}, {local}) targets unknown category {reference:?}"
            )));
        }
        let mut reg = self.clone();
        reg.mappings
            .insert((scheme.to_owned(), local.to_owned()), reference.to_owned());
        Ok(reg)
    }

    pub fn map_name(&self, scheme: &str, local: &str) -> Option<&str> {
        self.mappings
            .get(&(scheme.to_owned(), local.to_owned()))
            .map(String::as_str)
    }

    /// Checks every feature of `document` against the registry. Unknown
    /// categories and level mismatches are warnings; value violations and
    /// illegal repetition are errors.
    pub fn validate(&self, document: &AnnotationDocument) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        self.validate_node(&document.root, &mut out);
        for d in &mut out {
            d.file = document.doc_id.clone();
        }
        out
    }

    fn validate_node(&self, node: &StructNode, out: &mut Vec<Diagnostic>) {
        let label = node.id.clone().unwrap_or_else(|| format!("<{}>", node.node_type));
        let cats: Vec<&str> = node.features.iter().map(|f| f.category.as_str()).collect();
        self.check_repeats(&cats, &label, out);
        for f in &node.features {
            self.validate_feature(f, node, &label, out);
        }
        if node.alternatives.len() == 1 {
            out.push(Diagnostic::warning(
                "few-alternatives",
                format!("{label} has a single alternative"),
            ));
        }
        for g in &node.alternatives {
            self.validate_group(g, node, &label, out);
        }
        for c in &node.children {
            self.validate_node(c, out);
        }
    }

    fn validate_group(&self, g: &AltGroup, node: &StructNode, label: &str, out: &mut Vec<Diagnostic>) {
        let mut cats: Vec<&str> = g.features.iter().map(|f| f.category.as_str()).collect();
        if g.confidence.is_some() {
            cats.push(CONFIDENCE);
        }
        self.check_repeats(&cats, label, out);
        for f in &g.features {
            self.validate_feature(f, node, label, out);
        }
        // the model itself rejects confidences outside [0, 1]; only narrower
        // registry ranges are worth a second diagnostic
        if let Some(c) = g.confidence.filter(|c| (0.0..=1.0).contains(c)) {
            self.validate_feature(&Feature::new(CONFIDENCE, c.to_string()), node, label, out);
        }
        for c in &g.children {
            self.validate_node(c, out);
        }
    }

    fn check_repeats(&self, cats: &[&str], label: &str, out: &mut Vec<Diagnostic>) {
        let mut counts: IndexMap<&str, usize> = IndexMap::new();
        for c in cats {
            *counts.entry(c).or_default() += 1;
        }
        for (c, n) in counts {
            if n > 1 && self.categories.get(c).is_some_and(|d| !d.repeatable) {
                out.push(Diagnostic::error(
                    "non-repeatable",
                    format!("{c} occurs {n} times on {label}"),
                ));
            }
        }
    }

    fn validate_feature(&self, f: &Feature, node: &StructNode, label: &str, out: &mut Vec<Diagnostic>) {
        match self.categories.get(&f.category) {
            None => out.push(Diagnostic::warning(
                "unknown-category",
                format!("{} on {label} is not in the registry", f.category),
            )),
            Some(def) => {
                if !def.applicable_levels.is_empty() && !def.applicable_levels.contains(&node.node_type) {
                    out.push(Diagnostic::warning(
                        "inapplicable-level",
                        format!("{} is not defined for {} nodes", f.category, node.node_type),
                    ));
                }
                let v = f.value.trim();
                // a feature whose content lives only in nested features has no value to check
                if !(v.is_empty() && !f.children.is_empty()) {
                    self.check_value(def, v, label, out);
                }
            }
        }
        for c in &f.children {
            self.validate_feature(c, node, label, out);
        }
    }

    fn check_value(&self, def: &DataCategory, v: &str, label: &str, out: &mut Vec<Diagnostic>) {
        match &def.value_space {
            ValueSpace::OpenText => {}
            ValueSpace::Closed(allowed) => {
                if !allowed.iter().any(|a| a == v) {
                    out.push(Diagnostic::error(
                        "closed-value",
                        format!("{} value {v:?} on {label} not in {{{}}}", def.name, allowed.join(",")),
                    ));
                }
            }
            ValueSpace::Numeric { min, max } => match v.parse::<f64>() {
                Ok(x) if x >= *min && x <= *max => {}
                Ok(x) => out.push(Diagnostic::error(
                    "numeric-out-of-range",
                    format!("{} value {x} on {label} outside [{min}, {max}]", def.name),
                )),
                Err(_) => out.push(Diagnostic::error(
                    "not-numeric",
                    format!("{} value {v:?} on {label} is not a number", def.name),
                )),
            },
            ValueSpace::Pointer => {
                if v.parse::<Pointer>().is_err() {
                    out.push(Diagnostic::error(
                        "not-a-pointer",
                        format!("{} value {v:?} on {label} is not a pointer", def.name),
                    ));
                }
            }
        }
    }

    /// Rewrites scheme-specific category names to reference names. Names
    /// without a mapping are left alone and listed in the outcome.
    pub fn map_names(&self, document: &AnnotationDocument, scheme: &str) -> MapOutcome {
        let table: HashMap<&str, &str> = self
            .mappings
            .iter()
            .filter(|((s, _), _)| s == scheme)
            .map(|((_, l), r)| (l.as_str(), r.as_str()))
            .collect();
        let mut doc = document.clone();
        let mut unmapped = Vec::new();
        map_node(&mut doc.root, &table, &mut unmapped);
        MapOutcome {
            document: doc,
            unmapped,
        }
    }

    /// Renders the registry in the line format read by [`parse_registry`].
    pub fn to_registry_file(&self) -> String {
        let mut out = String::new();
        for c in self.categories.values() {
            let levels = if c.applicable_levels.is_empty() {
                "*".to_owned()
            } else {
                c.applicable_levels.join(",")
            };
            out.push_str(&format!(
                "{} | {} | {} | {} | {} | {}\n",
                c.name,
                c.value_space.render(),
                levels,
                if c.repeatable { "yes" } else { "no" },
                c.parent.as_deref().unwrap_or("-"),
                c.gloss
            ));
        }
        out
    }

    pub fn to_mapping_file(&self) -> String {
        self.mappings()
            .map(|(s, l, r)| format!("{s} | {l} | {r}\n"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapOutcome {
    pub document: AnnotationDocument,
    /// Distinct category names left unmapped, in first-seen order.
    pub unmapped: Vec<String>,
}

fn map_features(fs: &mut [Feature], table: &HashMap<&str, &str>, unmapped: &mut Vec<String>) {
    for f in fs {
        match table.get(f.category.as_str()) {
            Some(r) => f.category = (*r).to_owned(),
            None => {
                if !unmapped.contains(&f.category) {
                    unmapped.push(f.category.clone());
                }
            }
        }
        map_features(&mut f.children, table, unmapped);
    }
}

fn map_node(n: &mut StructNode, table: &HashMap<&str, &str>, unmapped: &mut Vec<String>) {
    map_features(&mut n.features, table, unmapped);
    for g in &mut n.alternatives {
        map_features(&mut g.features, table, unmapped);
        for c in &mut g.children {
            map_node(c, table, unmapped);
        }
    }
    for c in &mut n.children {
        map_node(c, table, unmapped);
    }
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then(|| (i + 1, body.splitn(6, '|').map(str::trim).collect()))
    })
}

/// Reads a registry file. Later lines redefine earlier ones.
pub fn parse_registry(text: &str) -> Result<Registry> {
    let mut reg = Registry::default();
    for (line, f) in records(text) {
        let fail = |message: String| Error::Format { line, message };
        if f.len() < 2 {
            return Err(fail("expected at least `name | value_space`".into()));
        }
        let mut cat = DataCategory::new(f[0], ValueSpace::parse(f[1]).map_err(|e| fail(e.to_string()))?, "");
        if let Some(levels) = f.get(2) {
            if !levels.is_empty() && *levels != "*" {
                cat.applicable_levels = levels.split(',').map(|l| l.trim().to_owned()).collect();
            }
        }
        if let Some(r) = f.get(3) {
            cat.repeatable = match *r {
                "" | "yes" | "true" => true,
                "no" | "false" => false,
                other => return Err(fail(format!("repeatable must be yes or no, got {other:?}"))),
            };
        }
        if let Some(p) = f.get(4) {
            if !p.is_empty() && *p != "-" {
                cat.parent = Some((*p).to_owned());
            }
        }
        if let Some(g) = f.get(5) {
            cat.gloss = (*g).to_owned();
        }
        cat.check().map_err(|e| fail(e.to_string()))?;
        reg.categories.insert(cat.name.clone(), cat);
    }
    Ok(reg)
}

/// Adds the `scheme | local | reference` lines of a mapping file.
pub fn parse_mappings(reg: &Registry, text: &str) -> Result<Registry> {
    let mut reg = reg.clone();
    for (line, f) in records(text) {
        if f.len() != 3 {
            return Err(Error::Format {
                line,
                message: "expected `scheme | local | reference`".into(),
            });
        }
        reg = reg.add_mapping(f[0], f[1], f[2]).map_err(|e| Error::Format {
            line,
            message: e.to_string(),
        })?;
    }
    Ok(reg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diag::count_errors;
    use crate::model::{NodeRef, Seg};

    fn one_node(features: &[(&str, &str)]) -> AnnotationDocument {
        let mut d = AnnotationDocument::new("d", "MSAnnot", "W-level").unwrap();
        for (c, v) in features {
            d.set_feature(&NodeRef::root(), c, v).unwrap();
        }
        d
    }

    #[test]
    fn seed_contents() {
        let reg = seed_registry();
        let conf = reg.lookup("confidence").unwrap();
        assert_eq!(conf.value_space, ValueSpace::Numeric { min: 0.0, max: 1.0 });
        assert!(!conf.repeatable);
        assert!(reg.lookup("synCat").is_ok());
        assert!(matches!(reg.lookup("nonexistent"), Err(Error::NotFound(_))));
        assert_eq!(reg.categories().count(), 9);
        assert!(reg.categories().all(|c| c.applicable_levels.is_empty()));
    }

    #[test]
    fn define_and_redefine() {
        let reg = seed_registry();
        let bad = DataCategory::new("x", ValueSpace::Numeric { min: 2.0, max: 1.0 }, "");
        assert!(matches!(reg.define(bad), Err(Error::InvalidCategory(_))));
        let empty = DataCategory::new("x", ValueSpace::Closed(vec![]), "");
        assert!(matches!(reg.define(empty), Err(Error::InvalidCategory(_))));
        let dup = DataCategory::new("x", ValueSpace::Closed(vec!["a".into(), "a".into()]), "");
        assert!(matches!(reg.define(dup), Err(Error::InvalidCategory(_))));

        let (reg2, diags) = reg.define(DataCategory::new("lemma", ValueSpace::OpenText, "new")).unwrap();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "redefinition");
        assert_eq!(reg2.lookup("lemma").unwrap().gloss, "new");
        // the original is untouched
        assert_ne!(reg.lookup("lemma").unwrap().gloss, "new");
    }

    #[test]
    fn closed_pos_restricts_values() {
        let tags = ["PNOUN", "VERB", "DET", "NOUN", "PREP"].map(String::from).to_vec();
        let (reg, _) = seed_registry()
            .define(DataCategory::new("pos", ValueSpace::Closed(tags), ""))
            .unwrap();
        assert!(reg.validate(&one_node(&[("pos", "VERB")])).is_empty());
        let diags = reg.validate(&one_node(&[("pos", "XYZ")]));
        assert_eq!(count_errors(&diags), 1);
        assert_eq!(diags[0].code, "closed-value");
    }

    #[test]
    fn numeric_and_unknown() {
        let reg = seed_registry();
        let diags = reg.validate(&one_node(&[("lemma", "x"), ("confidence", "1.5")]));
        assert_eq!(count_errors(&diags), 1);
        assert_eq!(diags[0].code, "numeric-out-of-range");

        let diags = reg.validate(&one_node(&[("msd", "Ncms")]));
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "unknown-category");
        assert_eq!(count_errors(&diags), 0);
    }

    #[test]
    fn repetition_and_levels() {
        let reg = seed_registry();
        let diags = reg.validate(&one_node(&[("confidence", "0.1"), ("confidence", "0.2")]));
        assert_eq!(count_errors(&diags), 1);
        assert_eq!(diags[0].code, "non-repeatable");
        assert!(reg.validate(&one_node(&[("gender", "m"), ("gender", "f")])).is_empty());

        let (reg, _) = reg
            .define(DataCategory::new("phone", ValueSpace::OpenText, "").levels(&["phonetic"]))
            .unwrap();
        let diags = reg.validate(&one_node(&[("phone", "iy")]));
        assert_eq!(diags[0].code, "inapplicable-level");
        assert_eq!(count_errors(&diags), 0);
    }

    #[test]
    fn single_alternative_warns() {
        let mut d = one_node(&[]);
        d.add_alternatives(&NodeRef::root(), vec![AltGroup::new(vec![Feature::new("lemma", "a")]).with_confidence(0.5)])
            .unwrap();
        let diags = seed_registry().validate(&d);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "few-alternatives");
    }

    #[test]
    fn mapping_rewrites_names() {
        let reg = seed_registry()
            .add_mapping("ptb", "POS", "pos")
            .and_then(|r| r.add_mapping("ptb", "LEMMA", "lemma"))
            .unwrap();
        let mut d = one_node(&[("POS", "VERB"), ("LEMMA", "aimer"), ("extra", "1")]);
        d.set_seg(&NodeRef::root(), Seg::target("w1".parse().unwrap())).unwrap();
        let out = reg.map_names(&d, "ptb");
        let cats: Vec<_> = out.document.root.features.iter().map(|f| f.category.as_str()).collect();
        assert_eq!(cats, ["pos", "lemma", "extra"]);
        assert_eq!(out.unmapped, ["extra"]);
        assert_eq!(out.document.root.seg, d.root.seg);

        let same = reg.map_names(&d, "other");
        assert_eq!(same.document, d);

        assert!(matches!(
            seed_registry().add_mapping("ptb", "X", "nothere"),
            Err(Error::InvalidCategory(_))
        ));
    }

    #[test]
    fn registry_file_round_trip() {
        let reg = seed_registry();
        let text = reg.to_registry_file();
        assert_eq!(parse_registry(&text).unwrap(), reg);

        let src = "# comment\nlemma | open\npos | closed:A;B | W-level,phrase | no | cat | part of speech # trailing\n";
        let reg = parse_registry(src).unwrap();
        let pos = reg.lookup("pos").unwrap();
        assert_eq!(pos.value_space, ValueSpace::Closed(vec!["A".into(), "B".into()]));
        assert_eq!(pos.applicable_levels, ["W-level", "phrase"]);
        assert!(!pos.repeatable);
        assert_eq!(pos.parent.as_deref(), Some("cat"));
        assert_eq!(pos.gloss, "part of speech");

        assert!(matches!(parse_registry("x | numeric:3..1"), Err(Error::Format { line: 1, .. })));
        assert!(matches!(parse_registry("x"), Err(Error::Format { .. })));

        let mapped = parse_mappings(&reg, "ptb | POS | pos\n").unwrap();
        assert_eq!(mapped.map_name("ptb", "POS"), Some("pos"));
        assert!(parse_mappings(&reg, "ptb | X | missing\n").is_err());
        assert_eq!(parse_mappings(&reg, &mapped.to_mapping_file()).unwrap(), mapped);
    }
}
