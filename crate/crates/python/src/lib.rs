//! Python bindings for the annotation toolkit.

use std::collections::HashMap;

use gmtannot::gmt::parse_str;
use gmtannot::transduce::{self, CompoundPolicy, Disambiguation};
use gmtannot::{
    canonical_bytes, canonicalize, covered_text, diff, export_tabular, import_tabular, merge, parse_registry,
    seed_registry, serialize, validate_anchors, AnnotationDocument, DiffOptions, ExportOptions, GmtDialect,
    MergePolicy, NodeRef, PrimaryDoc,
};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(gmtannot_py, GmtError, PyValueError);

fn err(e: gmtannot::Error) -> PyErr {
    GmtError::new_err(format!("{}: {e}", e.code()))
}

fn utf8(bytes: Vec<u8>) -> PyResult<String> {
    String::from_utf8(bytes).map_err(|e| GmtError::new_err(e.to_string()))
}

/// An annotation document.
#[pyclass(name = "Document", from_py_object)]
#[derive(Clone)]
pub struct PyDocument {
    inner: AnnotationDocument,
}

#[pymethods]
impl PyDocument {
    #[getter]
    fn doc_id(&self) -> String {
        self.inner.doc_id.clone()
    }

    #[getter]
    fn level(&self) -> String {
        self.inner.level.clone()
    }

    #[getter]
    fn primary_refs(&self) -> Vec<String> {
        self.inner.primary_refs.clone()
    }

    #[setter]
    fn set_primary_refs(&mut self, refs: Vec<String>) {
        self.inner.primary_refs = refs;
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    /// GMT markup; the canonical form when `canonical` is true.
    #[pyo3(signature = (canonical = false))]
    fn serialize(&self, canonical: bool) -> PyResult<String> {
        let bytes = if canonical {
            canonical_bytes(&self.inner)
        } else {
            serialize(&self.inner, GmtDialect::lenient())
        };
        utf8(bytes.map_err(err)?)
    }

    fn canonicalize(&self) -> PyDocument {
        PyDocument {
            inner: canonicalize(&self.inner),
        }
    }

    /// Structural problems, one `severity:file:line:col:code:message` line each.
    fn check(&self) -> Vec<String> {
        self.inner.check().iter().map(ToString::to_string).collect()
    }

    fn __eq__(&self, other: &PyDocument) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Document({:?}, {} nodes)", self.inner.doc_id, self.inner.node_count())
    }
}

/// Parses GMT markup. Returns the document and the repair diagnostics.
#[pyfunction]
#[pyo3(signature = (text, name = "doc", strict = false))]
fn parse(text: &str, name: &str, strict: bool) -> PyResult<(PyDocument, Vec<String>)> {
    let dialect = if strict { GmtDialect::strict() } else { GmtDialect::lenient() };
    let parsed = parse_str(text, dialect, name).map_err(err)?;
    Ok((
        PyDocument { inner: parsed.document },
        parsed.diagnostics.iter().map(ToString::to_string).collect(),
    ))
}

/// A data category registry.
#[pyclass(name = "Registry")]
pub struct PyRegistry {
    inner: gmtannot::Registry,
}

#[pymethods]
impl PyRegistry {
    /// The seed registry, or one read from registry file text.
    #[new]
    #[pyo3(signature = (text = None))]
    fn new(text: Option<&str>) -> PyResult<Self> {
        let inner = match text {
            Some(t) => parse_registry(t).map_err(err)?,
            None => seed_registry(),
        };
        Ok(PyRegistry { inner })
    }

    fn categories(&self) -> Vec<String> {
        self.inner.categories().map(|c| c.name.clone()).collect()
    }

    fn validate(&self, doc: &PyDocument) -> Vec<String> {
        self.inner.validate(&doc.inner).iter().map(ToString::to_string).collect()
    }

    fn error_count(&self, doc: &PyDocument) -> usize {
        self.inner.validate(&doc.inner).iter().filter(|d| d.is_error()).count()
    }
}

/// Comparison of two parallel layers.
#[pyclass(name = "DiffReport")]
pub struct PyDiffReport {
    #[pyo3(get)]
    matched: usize,
    #[pyo3(get)]
    equal: usize,
    #[pyo3(get)]
    conflicting: usize,
    #[pyo3(get)]
    only_a: usize,
    #[pyo3(get)]
    only_b: usize,
    #[pyo3(get)]
    agreement: f64,
    /// (kind, node_a, node_b, category, value_a, value_b) tuples.
    #[pyo3(get)]
    findings: Vec<(String, String, String, String, String, String)>,
    text: String,
}

#[pymethods]
impl PyDiffReport {
    fn __str__(&self) -> String {
        self.text.clone()
    }
}

/// Primary documents plus the annotation layers anchored into them.
#[pyclass(name = "LayerSet")]
#[derive(Default)]
pub struct PyLayerSet {
    inner: gmtannot::LayerSet,
}

fn merge_policy(s: &str) -> PyResult<MergePolicy> {
    s.parse().map_err(err)
}

#[pymethods]
impl PyLayerSet {
    #[new]
    fn new() -> Self {
        Self::default()
    }

    /// Imports tagger output; see the `transduce` module of the crate.
    #[staticmethod]
    #[pyo3(signature = (lines, text = None))]
    fn import_tabular(lines: &str, text: Option<&str>) -> PyResult<Self> {
        Ok(PyLayerSet {
            inner: import_tabular(lines, text).map_err(err)?,
        })
    }

    /// Adds a text primary with marks given as id -> (start, end).
    #[pyo3(signature = (doc_id, text, marks = None))]
    fn add_primary_text(&mut self, doc_id: &str, text: &str, marks: Option<HashMap<String, (u64, u64)>>) -> PyResult<()> {
        let mut p = PrimaryDoc::text(doc_id, text);
        let mut marks: Vec<_> = marks.unwrap_or_default().into_iter().collect();
        marks.sort();
        for (id, (s, e)) in marks {
            p.add_mark(id, s, e).map_err(err)?;
        }
        self.inner.add_primary(p).map_err(err)
    }

    fn add_document(&mut self, doc: &PyDocument) -> PyResult<()> {
        self.inner.add_annotation(doc.inner.clone()).map_err(err)
    }

    fn document(&self, doc_id: &str) -> PyResult<PyDocument> {
        Ok(PyDocument {
            inner: self.inner.annotation(doc_id).map_err(err)?.clone(),
        })
    }

    fn document_ids(&self) -> Vec<String> {
        self.inner.annotation_docs.keys().cloned().collect()
    }

    fn primary_text(&self, doc_id: &str) -> PyResult<Option<String>> {
        let p = self.inner.primary(doc_id).map_err(err)?;
        Ok(transduce::primary_text(p).map(str::to_owned))
    }

    fn marks(&self, doc_id: &str) -> PyResult<Vec<(String, u64, u64)>> {
        let p = self.inner.primary(doc_id).map_err(err)?;
        Ok(p.marks.iter().map(|(k, (s, e))| (k.clone(), *s, *e)).collect())
    }

    /// Text under a node (by id; the root when omitted).
    #[pyo3(signature = (doc_id, node = None))]
    fn covered_text(&self, doc_id: &str, node: Option<&str>) -> PyResult<String> {
        let at = match node {
            Some(id) => self.inner.annotation(doc_id).map_err(err)?.find_node(id).map_err(err)?,
            None => NodeRef::root(),
        };
        Ok(covered_text(doc_id, &at, &self.inner).map_err(err)?.text)
    }

    fn validate_anchors(&self) -> Vec<String> {
        validate_anchors(&self.inner).diagnostics.iter().map(ToString::to_string).collect()
    }

    /// Tab-separated records of one document.
    #[pyo3(signature = (doc_id, compound = "leaves", disambiguate = "none"))]
    fn export_tabular(&self, doc_id: &str, compound: &str, disambiguate: &str) -> PyResult<String> {
        let options = ExportOptions {
            compound: compound.parse::<CompoundPolicy>().map_err(err)?,
            disambiguation: disambiguate.parse::<Disambiguation>().map_err(err)?,
        };
        let records = export_tabular(&self.inner, doc_id, options).map_err(err)?;
        Ok(transduce::write_tabular(&[records]))
    }

    #[pyo3(signature = (a, b, policy = "union"))]
    fn merge(&self, a: &PyDocument, b: &PyDocument, policy: &str) -> PyResult<PyDocument> {
        Ok(PyDocument {
            inner: merge(&a.inner, &b.inner, &self.inner, merge_policy(policy)?).map_err(err)?,
        })
    }

    #[pyo3(signature = (a, b, strict_alternatives = false))]
    fn diff(&self, a: &PyDocument, b: &PyDocument, strict_alternatives: bool) -> PyResult<PyDiffReport> {
        let r = diff(&a.inner, &b.inner, &self.inner, DiffOptions { strict_alternatives }).map_err(err)?;
        Ok(PyDiffReport {
            matched: r.matched,
            equal: r.equal,
            conflicting: r.conflicting,
            only_a: r.only_a,
            only_b: r.only_b,
            agreement: r.agreement,
            text: r.to_text(),
            findings: r
                .findings
                .into_iter()
                .map(|f| (f.kind.as_str().to_owned(), f.node_a, f.node_b, f.category, f.value_a, f.value_b))
                .collect(),
        })
    }
}

#[pymodule]
fn gmtannot_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GmtError", m.py().get_type::<GmtError>())?;
    m.add_class::<PyDocument>()?;
    m.add_class::<PyRegistry>()?;
    m.add_class::<PyLayerSet>()?;
    m.add_class::<PyDiffReport>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    Ok(())
}
