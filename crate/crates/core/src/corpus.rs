//! Juliet-style test-case ingestion.
//!
//! Each Juliet source file holds one vulnerable `bad` function and one or
//! more patched `good`-family functions. [`extract_pair`] turns a file into
//! a (vulnerable, benign) pair of [`Sample`]s and [`build_manifest`] walks a
//! tree of such files into a balanced, deterministic [`Manifest`].
//!
//! Function boundaries come from a brace-depth scan over a masked copy of
//! the source in which comments, string/char literals and preprocessor lines
//! are blanked out. There is no C parser here.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::cwe::Cwe;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("file name `{0}` does not start with a CWE<digits>_ prefix")]
    NoCwePrefix(String),
    #[error("{path}: unbalanced braces ({detail})")]
    UnbalancedBraces { path: String, detail: String },
    #[error("{path}: {detail}")]
    Extraction { path: String, detail: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {detail}")]
    BadRecord { line: usize, detail: String },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("invalid sample `{id}`: {detail}")]
    InvalidSample { id: String, detail: String },
    #[error("empty corpus: no samples extracted under {0}")]
    EmptyCorpus(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Vulnerable,
    Benign,
}

impl Label {
    pub fn is_vulnerable(self) -> bool {
        self == Label::Vulnerable
    }
}

/// One labeled code unit. Benign samples carry the CWE of the vulnerable
/// variant they were patched from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub cwe: Cwe,
    pub label: Label,
    pub code: String,
    pub source_path: String,
    pub line_count: usize,
}

impl Sample {
    pub fn new(id: String, cwe: Cwe, label: Label, code: String, source_path: String) -> Self {
        let line_count = count_lines(&code);
        Sample {
            id,
            cwe,
            label,
            code,
            source_path,
            line_count,
        }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |detail: &str| CorpusError::InvalidSample {
            id: self.id.clone(),
            detail: detail.to_string(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty id"));
        }
        if self.code.trim().is_empty() {
            return Err(invalid("empty code"));
        }
        if self.line_count == 0 || self.line_count != count_lines(&self.code) {
            return Err(invalid("line_count does not match code"));
        }
        Ok(())
    }
}

/// Newline-delimited lines of `code`, never less than one.
pub fn count_lines(code: &str) -> usize {
    code.lines().count().max(1)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CweCount {
    pub vulnerable: usize,
    pub benign: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    samples: Vec<Sample>,
    per_cwe_counts: BTreeMap<Cwe, CweCount>,
}

impl Manifest {
    pub fn new(samples: Vec<Sample>) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        let mut per_cwe_counts: BTreeMap<Cwe, CweCount> = BTreeMap::new();
        for s in &samples {
            s.validate()?;
            if !seen.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId(s.id.clone()));
            }
            let entry = per_cwe_counts.entry(s.cwe).or_default();
            match s.label {
                Label::Vulnerable => entry.vulnerable += 1,
                Label::Benign => entry.benign += 1,
            }
        }
        Ok(Manifest {
            samples,
            per_cwe_counts,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn per_cwe_counts(&self) -> &BTreeMap<Cwe, CweCount> {
        &self.per_cwe_counts
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Index from sample id to position.
    pub fn index(&self) -> BTreeMap<&str, usize> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect()
    }

    pub fn totals(&self) -> CweCount {
        self.per_cwe_counts
            .values()
            .fold(CweCount::default(), |acc, c| CweCount {
                vulnerable: acc.vulnerable + c.vulnerable,
                benign: acc.benign + c.benign,
            })
    }

    /// One JSON object per line, in sample order.
    pub fn write_jsonl<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = BufWriter::new(writer);
        for s in &self.samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut samples = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| CorpusError::BadRecord {
                line: i + 1,
                detail: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let sample: Sample =
                serde_json::from_str(&line).map_err(|e| CorpusError::BadRecord {
                    line: i + 1,
                    detail: e.to_string(),
                })?;
            samples.push(sample);
        }
        Manifest::new(samples)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let io = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::create(path).map_err(io)?;
        self.write_jsonl(file).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let file = fs::File::open(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Manifest::read_jsonl(BufReader::new(file))
    }
}

/// `CWE121_Stack_Based_Buffer_Overflow__char_01.c` -> `CWE-121`.
pub fn parse_cwe_from_filename(filename: &str) -> Result<Cwe, CorpusError> {
    let base = Path::new(filename)
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or(filename);
    let err = || CorpusError::NoCwePrefix(filename.to_string());
    let rest = base.strip_prefix("CWE").ok_or_else(err)?;
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() || !rest[digits.len()..].starts_with('_') {
        return Err(err());
    }
    let id: u32 = digits.parse().map_err(|_| err())?;
    Cwe::new(id).map_err(|_| err())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionSpan {
    pub name: String,
    /// Byte offset of the first signature character.
    pub start: usize,
    /// Byte offset one past the closing brace.
    pub end: usize,
    /// Start of the enclosing top-level construct (the namespace opener for
    /// functions nested in a C++ namespace, otherwise `start`).
    pub outer_start: usize,
}

/// Copy of `src` with comments, literals and preprocessor lines replaced by
/// spaces. Newlines and byte offsets are preserved.
fn mask_source(src: &str) -> Vec<u8> {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Code,
        LineComment,
        BlockComment,
        Str,
        Chr,
        Preproc,
    }
    let bytes = src.as_bytes();
    let mut out = bytes.to_vec();
    let mut state = State::Code;
    let mut line_has_code = false;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let next = bytes.get(i + 1).copied();
        let blank = |out: &mut Vec<u8>, at: usize| {
            if out[at] != b'\n' {
                out[at] = b' ';
            }
        };
        match state {
            State::Code => match b {
                b'/' if next == Some(b'/') => {
                    state = State::LineComment;
                    blank(&mut out, i);
                }
                b'/' if next == Some(b'*') => {
                    state = State::BlockComment;
                    blank(&mut out, i);
                    blank(&mut out, i + 1);
                    i += 1;
                }
                b'"' => {
                    state = State::Str;
                    blank(&mut out, i);
                    line_has_code = true;
                }
                b'\'' => {
                    state = State::Chr;
                    blank(&mut out, i);
                    line_has_code = true;
                }
                b'#' if !line_has_code => {
                    state = State::Preproc;
                    blank(&mut out, i);
                }
                b'\n' => line_has_code = false,
                b' ' | b'\t' | b'\r' => {}
                _ => line_has_code = true,
            },
            State::LineComment => {
                if b == b'\n' {
                    state = State::Code;
                    line_has_code = false;
                } else {
                    blank(&mut out, i);
                }
            }
            State::BlockComment => {
                if b == b'*' && next == Some(b'/') {
                    blank(&mut out, i);
                    blank(&mut out, i + 1);
                    i += 1;
                    state = State::Code;
                } else {
                    blank(&mut out, i);
                }
            }
            State::Str | State::Chr => {
                let close = if state == State::Str { b'"' } else { b'\'' };
                if b == b'\\' {
                    blank(&mut out, i);
                    if next.is_some() && next != Some(b'\n') {
                        blank(&mut out, i + 1);
                        i += 1;
                    }
                } else if b == close {
                    blank(&mut out, i);
                    state = State::Code;
                } else if b == b'\n' {
                    state = State::Code;
                    line_has_code = false;
                } else {
                    blank(&mut out, i);
                }
            }
            State::Preproc => {
                if b == b'\\' && next == Some(b'\n') {
                    blank(&mut out, i);
                    i += 1;
                } else if b == b'\n' {
                    state = State::Code;
                    line_has_code = false;
                } else if b == b'/' && next == Some(b'*') {
                    blank(&mut out, i);
                    blank(&mut out, i + 1);
                    i += 1;
                    state = State::BlockComment;
                } else {
                    blank(&mut out, i);
                }
            }
        }
        i += 1;
    }
    out
}

/// Locate every top-level function definition in `src`.
///
/// `namespace` and `extern "C"` blocks are transparent: functions inside
/// them are reported as if they were at file scope.
pub fn find_functions(src: &str, path: &str) -> Result<Vec<FunctionSpan>, CorpusError> {
    #[derive(Clone, Copy)]
    enum Scope {
        Transparent { outer_start: usize },
        Function { index: usize },
        Other,
    }

    let masked = mask_source(src);
    let text = String::from_utf8_lossy(&masked);
    let bytes = text.as_bytes();
    let unbalanced = |detail: String| CorpusError::UnbalancedBraces {
        path: path.to_string(),
        detail,
    };

    let mut functions: Vec<FunctionSpan> = Vec::new();
    let mut stack: Vec<Scope> = Vec::new();
    // Depth inside the innermost opaque (function/struct/initializer) scope.
    let mut opaque_depth = 0usize;
    let mut seg_start = 0usize;

    for (i, &b) in bytes.iter().enumerate() {
        if opaque_depth > 0 {
            match b {
                b'{' => opaque_depth += 1,
                b'}' => {
                    opaque_depth -= 1;
                    if opaque_depth == 0 {
                        if let Some(Scope::Function { index }) = stack.pop() {
                            functions[index].end = i + 1;
                        }
                        seg_start = i + 1;
                    }
                }
                _ => {}
            }
            continue;
        }
        match b {
            b';' => seg_start = i + 1,
            b'{' => {
                let raw = &text[seg_start..i];
                let lead = raw.len() - raw.trim_start().len();
                let sig_start = seg_start + lead;
                let sig = raw.trim();
                let first_word = sig.split_whitespace().next().unwrap_or("");
                if first_word == "namespace" || first_word == "extern" {
                    let outer_start = match stack.last() {
                        Some(Scope::Transparent { outer_start }) => *outer_start,
                        _ => sig_start,
                    };
                    stack.push(Scope::Transparent { outer_start });
                    seg_start = i + 1;
                    continue;
                }
                let scope = match function_name(sig) {
                    Some(name) => {
                        let outer_start = match stack.last() {
                            Some(Scope::Transparent { outer_start }) => *outer_start,
                            _ => sig_start,
                        };
                        functions.push(FunctionSpan {
                            name,
                            start: sig_start,
                            end: 0,
                            outer_start,
                        });
                        Scope::Function {
                            index: functions.len() - 1,
                        }
                    }
                    None => Scope::Other,
                };
                stack.push(scope);
                opaque_depth = 1;
            }
            b'}' => match stack.pop() {
                Some(Scope::Transparent { .. }) => seg_start = i + 1,
                _ => {
                    let line = text[..i].matches('\n').count() + 1;
                    return Err(unbalanced(format!("unexpected `}}` on line {line}")));
                }
            },
            _ => {}
        }
    }
    if opaque_depth > 0 || !stack.is_empty() {
        return Err(unbalanced("unclosed `{` at end of file".to_string()));
    }
    Ok(functions)
}

/// Function name from a masked signature such as `static void goodG2B()`.
fn function_name(sig: &str) -> Option<String> {
    if !sig.ends_with(')') || sig.contains('=') {
        return None;
    }
    let paren = sig.find('(')?;
    let head = sig[..paren].trim_end();
    let name: String = head
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_alphanumeric() || *c == '_' || *c == ':')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    let name = name.rsplit("::").next().unwrap_or("").to_string();
    let keyword = matches!(
        name.as_str(),
        "" | "if" | "while" | "for" | "switch" | "return" | "sizeof"
    );
    if keyword || name.starts_with(|c: char| c.is_ascii_digit()) {
        return None;
    }
    Some(name)
}

pub fn is_bad_function(name: &str) -> bool {
    name == "bad" || name.ends_with("_bad")
}

pub fn is_good_function(name: &str) -> bool {
    name.starts_with("good") || name.ends_with("_good")
}

fn omit_directive() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*#\s*(?:if|ifdef|ifndef|endif|else|elif)\b.*\bOMIT(?:GOOD|BAD)\b").unwrap()
    })
}

/// File text before the first function, with `OMITGOOD`/`OMITBAD`
/// conditional-compilation lines removed and outer blank lines trimmed.
fn preamble(src: &str, end: usize) -> String {
    let kept: Vec<&str> = src[..end]
        .lines()
        .filter(|line| !omit_directive().is_match(line))
        .collect();
    kept.join("\n").trim_matches('\n').trim_end().to_string()
}

/// Preamble, a blank line, then the functions separated by blank lines.
fn assemble(preamble: &str, functions: &[&str]) -> String {
    let body = functions.join("\n\n");
    if preamble.is_empty() {
        format!("{body}\n")
    } else {
        format!("{preamble}\n\n{body}\n")
    }
}

/// Split one Juliet source file into its vulnerable and benign samples.
///
/// The vulnerable sample is the preamble plus the single `bad` function; the
/// benign sample is the preamble plus every `good`-family function in file
/// order. Sample ids are `<file stem>#bad` and `<file stem>#good`.
pub fn extract_pair(
    source_text: &str,
    cwe: Cwe,
    source_path: &str,
) -> Result<(Sample, Sample), CorpusError> {
    let fail = |detail: &str| CorpusError::Extraction {
        path: source_path.to_string(),
        detail: detail.to_string(),
    };
    if source_text.trim().is_empty() {
        return Err(fail("empty source"));
    }
    let functions = find_functions(source_text, source_path)?;
    let first = functions
        .first()
        .ok_or_else(|| fail("no function definitions"))?;

    let bad: Vec<&FunctionSpan> = functions
        .iter()
        .filter(|f| is_bad_function(&f.name))
        .collect();
    let bad = match bad.as_slice() {
        [one] => *one,
        [] => return Err(fail("no bad() function")),
        _ => return Err(fail("more than one bad() function")),
    };
    let good: Vec<&str> = functions
        .iter()
        .filter(|f| is_good_function(&f.name))
        .map(|f| source_text[f.start..f.end].trim_end())
        .collect();
    if good.is_empty() {
        return Err(fail("no good() function"));
    }

    let preamble = preamble(source_text, first.outer_start);
    let stem = Path::new(source_path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(source_path);

    let vulnerable = Sample::new(
        format!("{stem}#bad"),
        cwe,
        Label::Vulnerable,
        assemble(&preamble, &[source_text[bad.start..bad.end].trim_end()]),
        source_path.to_string(),
    );
    let benign = Sample::new(
        format!("{stem}#good"),
        cwe,
        Label::Benign,
        assemble(&preamble, &good),
        source_path.to_string(),
    );
    Ok((vulnerable, benign))
}

const COMMENT_MARK: char = '\u{1}';

fn hint_identifier() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:bad|good\w*|\w+_bad|\w+_good\w*|CWE\d+\w*)$").unwrap())
}

/// Remove label-revealing hints from extracted code: comments are dropped
/// (Juliet annotates flaws and fixes inline) and test-case identifiers such
/// as `CWE476_..._01_bad` or `goodG2B` become `function_1`, `function_2`, ...
/// in order of first appearance. Literals are left untouched.
pub fn redact_hints(code: &str) -> String {
    let bytes = code.as_bytes();
    let mut stripped = String::with_capacity(code.len());
    let mut i = 0;
    let mut renames: BTreeMap<String, String> = BTreeMap::new();
    while i < bytes.len() {
        let b = bytes[i];
        let next = bytes.get(i + 1).copied();
        if b == b'/' && next == Some(b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            stripped.push(COMMENT_MARK);
        } else if b == b'/' && next == Some(b'*') {
            i += 2;
            while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                i += 1;
            }
            i = (i + 2).min(bytes.len());
            stripped.push(COMMENT_MARK);
        } else if b == b'"' || b == b'\'' {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i] != b && bytes[i] != b'\n' {
                if bytes[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(bytes.len());
            stripped.push_str(&code[start..i]);
        } else if b.is_ascii_alphabetic() || b == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let ident = &code[start..i];
            if hint_identifier().is_match(ident) {
                let n = renames.len() + 1;
                let replacement = renames
                    .entry(ident.to_string())
                    .or_insert_with(|| format!("function_{n}"));
                stripped.push_str(replacement);
            } else {
                stripped.push_str(ident);
            }
        } else {
            let ch = code[i..].chars().next().unwrap_or(' ');
            stripped.push(ch);
            i += ch.len_utf8();
        }
    }

    // Lines left empty by comment removal disappear; runs of genuinely
    // blank lines collapse to one.
    let mut lines: Vec<String> = Vec::new();
    let mut previous_blank = true;
    for line in stripped.lines() {
        let had_comment = line.contains(COMMENT_MARK);
        let line = line.replace(COMMENT_MARK, " ");
        let line = line.trim_end();
        let blank = line.trim().is_empty();
        if blank && (had_comment || previous_blank) {
            continue;
        }
        lines.push(if blank {
            String::new()
        } else {
            line.to_string()
        });
        previous_blank = blank;
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

#[derive(Debug, Clone)]
pub struct ManifestOptions {
    /// Suffix the file stem must end with, e.g. `_01`.
    pub variant_filter: String,
    /// Maximum vulnerable and maximum benign samples kept per CWE.
    pub per_cwe_cap: usize,
    /// Restrict to these CWEs; `None` keeps every CWE found.
    pub cwes: Option<BTreeSet<Cwe>>,
    /// Apply [`redact_hints`] to every extracted sample.
    pub redact: bool,
}

impl Default for ManifestOptions {
    fn default() -> Self {
        ManifestOptions {
            variant_filter: "_01".into(),
            per_cwe_cap: 10,
            cwes: None,
            redact: true,
        }
    }
}

/// The fourteen CWEs of the evaluation corpus.
pub const EVALUATION_CWES: [u32; 14] = [
    121, 122, 190, 401, 415, 416, 476, 252, 78, 134, 369, 457, 789, 400,
];

/// Walk `root`, extract every matching test case and keep at most
/// `per_cwe_cap` vulnerable and `per_cwe_cap` benign samples per CWE.
///
/// Files are visited in lexicographic order of their path relative to
/// `root`; truncation happens after filtering, in that order. Files that
/// fail extraction are skipped with a warning.
pub fn build_manifest(root: &Path, options: &ManifestOptions) -> Result<Manifest, CorpusError> {
    if options.per_cwe_cap == 0 {
        return Err(CorpusError::Extraction {
            path: root.display().to_string(),
            detail: "per-CWE cap must be at least 1".into(),
        });
    }
    let meta = fs::metadata(root).map_err(|source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    if !meta.is_dir() {
        return Err(CorpusError::Io {
            path: root.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        });
    }

    let mut candidates: Vec<(String, PathBuf, Cwe)> = Vec::new();
    for entry in WalkDir::new(root) {
        let entry = entry.map_err(|e| CorpusError::Io {
            path: e
                .path()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| root.to_path_buf()),
            source: e
                .into_io_error()
                .unwrap_or_else(|| std::io::Error::other("walk error")),
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        if ext != "c" && ext != "cpp" {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        if !stem.ends_with(&options.variant_filter) {
            continue;
        }
        let Ok(cwe) = parse_cwe_from_filename(stem) else {
            continue;
        };
        if options.cwes.as_ref().is_some_and(|set| !set.contains(&cwe)) {
            continue;
        }
        let rel = path
            .strip_prefix(root)
            .unwrap_or(path)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        candidates.push((rel, path.to_path_buf(), cwe));
    }
    candidates.sort_by(|a, b| a.0.cmp(&b.0));

    let mut kept: BTreeMap<Cwe, CweCount> = BTreeMap::new();
    let mut samples = Vec::new();
    for (rel, path, cwe) in candidates {
        let counts = kept.entry(cwe).or_default();
        if counts.vulnerable >= options.per_cwe_cap && counts.benign >= options.per_cwe_cap {
            continue;
        }
        let bytes = fs::read(&path).map_err(|source| CorpusError::Io {
            path: path.clone(),
            source,
        })?;
        let text = String::from_utf8_lossy(&bytes);
        let (mut vulnerable, mut benign) = match extract_pair(&text, cwe, &rel) {
            Ok(pair) => pair,
            Err(e) => {
                log::warn!("skipping {rel}: {e}");
                continue;
            }
        };
        if options.redact {
            for s in [&mut vulnerable, &mut benign] {
                s.code = redact_hints(&s.code);
                s.line_count = count_lines(&s.code);
            }
        }
        if counts.vulnerable < options.per_cwe_cap {
            counts.vulnerable += 1;
            samples.push(vulnerable);
        }
        if counts.benign < options.per_cwe_cap {
            counts.benign += 1;
            samples.push(benign);
        }
    }
    if samples.is_empty() {
        return Err(CorpusError::EmptyCorpus(root.to_path_buf()));
    }
    Manifest::new(samples)
}
