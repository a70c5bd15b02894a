//! Stand-off linguistic annotation toolkit.
//!
//! Annotation documents are trees of typed structural nodes carrying
//! features drawn from a data category registry, anchored into primary data
//! or into other annotation layers. GMT markup is the pivot serialization;
//! tabular tagger output can be transduced into and out of it.

pub mod anchoring;
pub mod cli;
pub mod diag;
pub mod error;
pub mod gmt;
pub mod layers;
pub mod model;
pub mod registry;
pub mod transduce;

pub use anchoring::{
    make_landmark, project_to_primary, resolve, validate_anchors, AnchorReport, AnchorTarget, Extent, LayerSet,
    Mechanism, PrimaryContent, PrimaryDoc, ResolvedAnchor,
};
pub use diag::{Diagnostic, Severity};
pub use error::{Error, Result};
pub use gmt::{canonical_bytes, canonicalize, parse, serialize, GmtDialect, Parsed, PointerStyle, SpanAttrStyle};
pub use model::{
    AltGroup, AnnotationDocument, Feature, NodeRef, Order, Pointer, Relation, Seg, SpanUnit, StructNode,
};
pub use registry::{parse_mappings, parse_registry, seed_registry, DataCategory, MapOutcome, Registry, ValueSpace};
pub use layers::{covered_text, diff, merge, CoveredText, DiffOptions, DiffReport, Finding, FindingKind, MergePolicy};
pub use transduce::{
    export_tabular, import_records, import_tabular, read_marks, read_tabular, select_alternative, write_marks,
    write_tabular, CompoundPolicy, Disambiguation, ExportOptions, TabularRecord,
};
