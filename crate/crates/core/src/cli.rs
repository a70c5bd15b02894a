//! The `gmtannot` command line.
//!
//! Exit status: 0 on success, 1 when the data is at fault (parse errors,
//! validation errors, incompatible layers), 2 for usage and I/O problems.
//! Diagnostics go to standard error, one per line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::anchoring::{project_to_primary, validate_anchors, LayerSet, PrimaryDoc};
use crate::diag::Diagnostic;
use crate::error::Error;
use crate::gmt::{self, canonicalize, doc_id_from_name, GmtDialect};
use crate::layers::{covered_text, diff, merge, DiffOptions, MergePolicy};
use crate::model::{AnnotationDocument, NodeRef};
use crate::registry::{parse_registry, seed_registry, Registry};
use crate::transduce::{
    export_tabular, import_records_as, primary_text, read_marks, read_tabular, write_marks, write_tabular,
    CompoundPolicy, Disambiguation, ExportOptions,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "gmtannot", version, about = "Stand-off linguistic annotation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Gmt,
    Tabular,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, check against the registry and, given primary data, resolve anchors.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Registry file; the seed registry by default.
        #[arg(long)]
        registry: Option<PathBuf>,
        /// Reject malformed input instead of repairing it.
        #[arg(long)]
        strict: bool,
        /// Primary text, with its mark table alongside as NAME.marks.tsv.
        #[arg(long)]
        primary: Option<PathBuf>,
    },
    /// Convert between GMT and tabular tagger output.
    Convert {
        input: PathBuf,
        #[arg(long, value_enum)]
        from: Format,
        #[arg(long, value_enum)]
        to: Format,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Primary text to align tokens against, or to read surfaces from.
        /// Tabular input writes NAME.txt and NAME.marks.tsv beside --out.
        #[arg(long)]
        primary: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
        #[arg(long, value_enum, default_value = "leaves")]
        compound: CompoundArg,
        #[arg(long, value_enum, default_value = "none")]
        disambiguate: DisambiguateArg,
    },
    /// Merge two parallel layers.
    Merge {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        primary: PathBuf,
        #[arg(long, value_enum, default_value = "union")]
        policy: PolicyArg,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Compare two parallel layers.
    Diff {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        primary: PathBuf,
        /// Compare alternatives in order, confidences included.
        #[arg(long)]
        strict_alternatives: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Print the primary extents and text a node covers. Each layer without
    /// declared references points into the one before it; the first into
    /// the primary. The node is looked up in the last layer.
    Resolve {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        primary: PathBuf,
        /// Node id; the root when omitted.
        #[arg(long)]
        node: Option<String>,
        #[arg(long)]
        strict: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompoundArg {
    Parent,
    Leaves,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DisambiguateArg {
    None,
    HighestConfidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Union,
    PreferA,
    AsAlternatives,
}

impl From<PolicyArg> for MergePolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Union => MergePolicy::Union,
            PolicyArg::PreferA => MergePolicy::PreferA,
            PolicyArg::AsAlternatives => MergePolicy::AsAlternatives,
        }
    }
}

enum Failure {
    Usage,
    Data,
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn report(&mut self, d: &Diagnostic) {
        let _ = writeln!(self.err, "{d}");
    }

    fn io(&mut self, path: &Path, e: impl std::fmt::Display) -> Failure {
        let _ = writeln!(self.err, "error:{}:0:0:io-error:{e}", path.display());
        Failure::Usage
    }

    fn data(&mut self, file: &str, e: &Error) -> Failure {
        let (line, col) = e.position().unwrap_or((0, 0));
        self.report(&Diagnostic::error(e.code(), e.to_string()).in_file(file).at(line, col));
        Failure::Data
    }

    fn read(&mut self, path: &Path) -> Result<Vec<u8>, Failure> {
        std::fs::read(path).map_err(|e| self.io(path, e))
    }

    fn read_text(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = self.read(path)?;
        String::from_utf8(bytes).map_err(|e| self.io(path, e))
    }

    fn parse(&mut self, path: &Path, strict: bool) -> Result<AnnotationDocument, Failure> {
        let bytes = self.read(path)?;
        let name = path.to_string_lossy();
        let dialect = if strict { GmtDialect::strict() } else { GmtDialect::lenient() };
        let parsed = gmt::parse(&bytes, dialect, &name).map_err(|e| self.data(&name, &e))?;
        for d in &parsed.diagnostics {
            self.report(&d.clone().in_file(name.as_ref()));
        }
        Ok(parsed.document)
    }

    fn primary(&mut self, path: &Path) -> Result<PrimaryDoc, Failure> {
        let text = self.read_text(path)?;
        let mut p = PrimaryDoc::text(primary_id(path), text);
        let marks = path.with_extension("marks.tsv");
        if marks.exists() {
            let table = self.read_text(&marks)?;
            let name = marks.to_string_lossy().into_owned();
            read_marks(&mut p, &table).map_err(|e| self.data(&name, &e))?;
        }
        Ok(p)
    }

    fn emit(&mut self, out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
        match out {
            Some(path) => write_atomic(path, bytes).map_err(|e| self.io(path, e)),
            None => self.out.write_all(bytes).map_err(|e| self.io(Path::new("-"), e)),
        }
    }
}

/// Primary documents are known by their file name.
fn primary_id(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "primary".to_owned())
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Points documents with missing or unknown references at the primary.
fn attach(layers: &mut LayerSet, mut doc: AnnotationDocument, fallback: &str) -> crate::error::Result<()> {
    let known = |r: &String| layers.primary_docs.contains_key(r) || layers.annotation_docs.contains_key(r);
    if doc.primary_refs.is_empty() || !doc.primary_refs.iter().all(known) {
        doc.primary_refs = vec![fallback.to_owned()];
    }
    layers.add_annotation(doc)
}

/// Runs the command line `args` (program name first). Returns the exit status.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let mut ctx = Ctx { out, err };
    let result = match cli.command {
        Command::Validate {
            paths,
            registry,
            strict,
            primary,
        } => validate(&mut ctx, &paths, registry.as_deref(), strict, primary.as_deref()),
        Command::Convert {
            input,
            from,
            to,
            out,
            primary,
            strict,
            compound,
            disambiguate,
        } => {
            let options = ExportOptions {
                compound: match compound {
                    CompoundArg::Parent => CompoundPolicy::Parent,
                    CompoundArg::Leaves => CompoundPolicy::Leaves,
                },
                disambiguation: match disambiguate {
                    DisambiguateArg::None => Disambiguation::None,
                    DisambiguateArg::HighestConfidence => Disambiguation::HighestConfidence,
                },
            };
            convert(&mut ctx, &input, from, to, out.as_deref(), primary.as_deref(), strict, options)
        }
        Command::Merge {
            a,
            b,
            primary,
            policy,
            out,
            strict,
        } => merge_cmd(&mut ctx, &a, &b, &primary, policy.into(), out.as_deref(), strict),
        Command::Diff {
            a,
            b,
            primary,
            strict_alternatives,
            out,
            strict,
        } => diff_cmd(&mut ctx, &a, &b, &primary, strict_alternatives, out.as_deref(), strict),
        Command::Resolve {
            paths,
            primary,
            node,
            strict,
        } => resolve_cmd(&mut ctx, &paths, &primary, node.as_deref(), strict),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Data) => EXIT_DATA,
        Err(Failure::Usage) => EXIT_USAGE,
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

fn validate(
    ctx: &mut Ctx,
    paths: &[PathBuf],
    registry: Option<&Path>,
    strict: bool,
    primary: Option<&Path>,
) -> Result<(), Failure> {
    let registry: Registry = match registry {
        Some(p) => {
            let text = ctx.read_text(p)?;
            let name = p.to_string_lossy().into_owned();
            parse_registry(&text).map_err(|e| ctx.data(&name, &e))?
        }
        None => seed_registry(),
    };
    let mut errors = 0;
    let mut docs = Vec::new();
    let mut files = Vec::new();
    for path in paths {
        let name = path.to_string_lossy().into_owned();
        let bytes = ctx.read(path)?;
        let dialect = if strict { GmtDialect::strict() } else { GmtDialect::lenient() };
        let parsed = match gmt::parse(&bytes, dialect, &name) {
            Ok(p) => p,
            Err(e) => {
                ctx.data(&name, &e);
                errors += 1;
                continue;
            }
        };
        let doc = parsed.document;
        let found = parsed
            .diagnostics
            .into_iter()
            .chain(doc.check())
            .chain(registry.validate(&doc));
        for d in found {
            errors += usize::from(d.is_error());
            ctx.report(&d.in_file(name.as_str()));
        }
        files.push((doc.doc_id.clone(), name));
        docs.push(doc);
    }
    if let Some(p) = primary {
        let prim = ctx.primary(p)?;
        let pid = prim.doc_id.clone();
        let mut layers = LayerSet::new();
        let pname = p.to_string_lossy().into_owned();
        layers.add_primary(prim).map_err(|e| ctx.data(&pname, &e))?;
        for d in docs {
            let name = files.iter().find(|(id, _)| *id == d.doc_id).map(|(_, n)| n.clone()).unwrap_or_default();
            attach(&mut layers, d, &pid).map_err(|e| ctx.data(&name, &e))?;
        }
        for d in validate_anchors(&layers).diagnostics {
            errors += usize::from(d.is_error());
            let file = files
                .iter()
                .find(|(id, _)| *id == d.file)
                .map(|(_, n)| n.clone())
                .unwrap_or_else(|| d.file.clone());
            ctx.report(&d.in_file(file));
        }
    }
    if errors > 0 {
        Err(Failure::Data)
    } else {
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn convert(
    ctx: &mut Ctx,
    input: &Path,
    from: Format,
    to: Format,
    out: Option<&Path>,
    primary: Option<&Path>,
    strict: bool,
    options: ExportOptions,
) -> Result<(), Failure> {
    let in_name = input.to_string_lossy().into_owned();
    match (from, to) {
        (Format::Gmt, Format::Gmt) => {
            let doc = ctx.parse(input, strict)?;
            let bytes = gmt::canonical_bytes(&doc).map_err(|e| ctx.data(&in_name, &e))?;
            ctx.emit(out, &bytes)
        }
        (Format::Tabular, Format::Tabular) => {
            let text = ctx.read_text(input)?;
            let sentences = read_tabular(&text).map_err(|e| ctx.data(&in_name, &e))?;
            ctx.emit(out, write_tabular(&sentences).as_bytes())
        }
        (Format::Tabular, Format::Gmt) => {
            let Some(out) = out else {
                let _ = writeln!(ctx.err, "error:{in_name}:0:0:usage:tabular to GMT needs --out");
                return Err(Failure::Usage);
            };
            let text = ctx.read_text(input)?;
            let sentences = read_tabular(&text).map_err(|e| ctx.data(&in_name, &e))?;
            let given = match primary {
                Some(p) => Some(ctx.read_text(p)?),
                None => None,
            };
            let stem = doc_id_from_name(&out.to_string_lossy());
            let text_path = out.with_file_name(format!("{stem}.txt"));
            let layers = import_records_as(&sentences, given.as_deref(), &primary_id(&text_path), &stem)
                .map_err(|e| ctx.data(&in_name, &e))?;
            let prim = layers.primary_docs.values().next().expect("import makes a primary");
            let t = primary_text(prim).unwrap_or_default().as_bytes().to_vec();
            ctx.emit(Some(&text_path), &t)?;
            let marks = write_marks(prim);
            ctx.emit(Some(&text_path.with_extension("marks.tsv")), marks.as_bytes())?;
            let many = layers.annotation_docs.len() > 1;
            for doc in layers.annotation_docs.values() {
                let bytes = gmt::canonical_bytes(doc).map_err(|e| ctx.data(&in_name, &e))?;
                let path = if many {
                    out.with_file_name(format!("{}.gmt.xml", doc.doc_id))
                } else {
                    out.to_path_buf()
                };
                ctx.emit(Some(&path), &bytes)?;
            }
            Ok(())
        }
        (Format::Gmt, Format::Tabular) => {
            let Some(primary) = primary else {
                let _ = writeln!(ctx.err, "error:{in_name}:0:0:usage:GMT to tabular needs --primary");
                return Err(Failure::Usage);
            };
            let doc = ctx.parse(input, strict)?;
            let prim = ctx.primary(primary)?;
            let pid = prim.doc_id.clone();
            let doc_id = doc.doc_id.clone();
            let mut layers = LayerSet::new();
            layers.add_primary(prim).map_err(|e| ctx.data(&in_name, &e))?;
            attach(&mut layers, doc, &pid).map_err(|e| ctx.data(&in_name, &e))?;
            let records = export_tabular(&layers, &doc_id, options).map_err(|e| ctx.data(&in_name, &e))?;
            ctx.emit(out, write_tabular(&[records]).as_bytes())
        }
    }
}

fn pair_layers(
    ctx: &mut Ctx,
    a: &Path,
    b: &Path,
    primary: &Path,
    strict: bool,
) -> Result<(LayerSet, AnnotationDocument, AnnotationDocument), Failure> {
    let mut da = ctx.parse(a, strict)?;
    let mut db = ctx.parse(b, strict)?;
    let prim = ctx.primary(primary)?;
    let pid = prim.doc_id.clone();
    if da.doc_id == db.doc_id {
        db.doc_id = format!("{}.b", db.doc_id);
    }
    let mut layers = LayerSet::new();
    let pname = primary.to_string_lossy().into_owned();
    layers.add_primary(prim).map_err(|e| ctx.data(&pname, &e))?;
    for d in [&mut da, &mut db] {
        if d.primary_refs.is_empty() || !d.primary_refs.iter().all(|r| *r == pid) {
            d.primary_refs = vec![pid.clone()];
        }
    }
    Ok((layers, da, db))
}

fn merge_cmd(
    ctx: &mut Ctx,
    a: &Path,
    b: &Path,
    primary: &Path,
    policy: MergePolicy,
    out: Option<&Path>,
    strict: bool,
) -> Result<(), Failure> {
    let (layers, da, db) = pair_layers(ctx, a, b, primary, strict)?;
    let name = a.to_string_lossy().into_owned();
    let merged = merge(&da, &db, &layers, policy).map_err(|e| ctx.data(&name, &e))?;
    let bytes = gmt::serialize(&canonicalize(&merged), GmtDialect::canonical()).map_err(|e| ctx.data(&name, &e))?;
    ctx.emit(out, &bytes)
}

fn diff_cmd(
    ctx: &mut Ctx,
    a: &Path,
    b: &Path,
    primary: &Path,
    strict_alternatives: bool,
    out: Option<&Path>,
    strict: bool,
) -> Result<(), Failure> {
    let (layers, da, db) = pair_layers(ctx, a, b, primary, strict)?;
    let name = a.to_string_lossy().into_owned();
    let report = diff(&da, &db, &layers, DiffOptions { strict_alternatives }).map_err(|e| ctx.data(&name, &e))?;
    ctx.emit(out, report.to_text().as_bytes())
}

fn resolve_cmd(
    ctx: &mut Ctx,
    paths: &[PathBuf],
    primary: &Path,
    node: Option<&str>,
    strict: bool,
) -> Result<(), Failure> {
    let prim = ctx.primary(primary)?;
    let mut previous = prim.doc_id.clone();
    let mut layers = LayerSet::new();
    let pname = primary.to_string_lossy().into_owned();
    layers.add_primary(prim).map_err(|e| ctx.data(&pname, &e))?;
    for path in paths {
        let name = path.to_string_lossy().into_owned();
        let mut doc = ctx.parse(path, strict)?;
        if doc.primary_refs.is_empty() {
            doc.primary_refs = vec![previous.clone()];
        }
        previous = doc.doc_id.clone();
        layers.add_annotation(doc).map_err(|e| ctx.data(&name, &e))?;
    }
    let last = paths.last().map(|p| p.to_string_lossy().into_owned()).unwrap_or_default();
    let doc = layers.annotation(&previous).map_err(|e| ctx.data(&last, &e))?;
    let at = match node {
        Some(id) => doc.find_node(id).map_err(|e| ctx.data(&last, &e))?,
        None => NodeRef::root(),
    };
    let extents = project_to_primary(&previous, &at, &layers).map_err(|e| ctx.data(&last, &e))?;
    let mut text = String::new();
    for e in &extents {
        text.push_str(&format!("extent\t{}\t{}\t{}\t{}\n", e.doc_id, e.starts_at, e.ends_at, e.unit.as_str()));
    }
    match covered_text(&previous, &at, &layers) {
        Ok(ct) => {
            for f in &ct.lemma_fallback {
                text.push_str(&format!("lemma-fallback\t{f}\n"));
            }
            text.push_str(&format!("text\t{}\n", ct.text));
        }
        Err(Error::NotTextual(_)) => {}
        Err(e) => return Err(ctx.data(&last, &e)),
    }
    ctx.emit(None, text.as_bytes())
}
