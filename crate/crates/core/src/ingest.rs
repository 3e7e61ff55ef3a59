//! Selection of the informative subtrees of a cluster dump.
//!
//! A dump is walked without following symbolic links; only files whose
//! relative path matches one of the [`SelectionRules`] patterns are read.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::class::FailureClass;
use crate::error::{Result, TriageError};

pub const DEFAULT_MAX_FILE_BYTES: u64 = 64 * 1024 * 1024;

/// Default include patterns: any file below a `containers`/`container` or
/// `describe` directory that sits somewhere inside a `pods` directory.
pub const DEFAULT_PATTERNS: &[&str] = &[
    "pods/**/{containers,container}/**",
    "pods/**/describe/**",
];

/// A `/`-separated path pattern.
///
/// Segments are literals, `*` (exactly one segment), `**` (zero or more
/// segments) or `{a,b}` alternatives. A segment may also contain `*`
/// wildcards (`*.log`). Patterns are unanchored at the front: `pods/*/x`
/// matches `logs/pods/a/x`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathPattern {
    source: String,
    segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
enum Segment {
    AnyDepth,
    Alternatives(Vec<String>),
}

impl PathPattern {
    pub fn parse(source: &str) -> Result<Self> {
        let trimmed = source.trim_matches('/');
        if trimmed.is_empty() {
            return Err(TriageError::InvalidSpec(format!("empty path pattern {source:?}")));
        }
        let mut segments = vec![Segment::AnyDepth];
        for part in trimmed.split('/') {
            let seg = if part == "**" {
                Segment::AnyDepth
            } else if let Some(inner) = part.strip_prefix('{').and_then(|p| p.strip_suffix('}')) {
                let alts: Vec<String> = inner.split(',').map(|s| s.trim().to_string()).collect();
                if alts.iter().any(|a| a.is_empty()) {
                    return Err(TriageError::InvalidSpec(format!(
                        "empty alternative in pattern {source:?}"
                    )));
                }
                Segment::Alternatives(alts)
            } else if part.is_empty() {
                return Err(TriageError::InvalidSpec(format!("empty segment in pattern {source:?}")));
            } else {
                Segment::Alternatives(vec![part.to_string()])
            };
            if seg == Segment::AnyDepth && segments.last() == Some(&Segment::AnyDepth) {
                continue;
            }
            segments.push(seg);
        }
        Ok(PathPattern { source: source.to_string(), segments })
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    pub fn matches(&self, path: &str) -> bool {
        let parts: Vec<&str> = path.split('/').filter(|p| !p.is_empty()).collect();
        match_segments(&self.segments, &parts)
    }
}

fn match_segments(pattern: &[Segment], parts: &[&str]) -> bool {
    match pattern.split_first() {
        None => parts.is_empty(),
        Some((Segment::AnyDepth, rest)) => {
            (0..=parts.len()).any(|skip| match_segments(rest, &parts[skip..]))
        }
        Some((Segment::Alternatives(alts), rest)) => match parts.split_first() {
            Some((head, tail)) => {
                alts.iter().any(|a| wildcard_match(a, head)) && match_segments(rest, tail)
            }
            None => false,
        },
    }
}

/// `*` matches any run of characters within a single segment.
fn wildcard_match(pattern: &str, text: &str) -> bool {
    let p = pattern.as_bytes();
    let t = text.as_bytes();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && p[pi] == b'*' {
            star = Some((pi, ti));
            pi += 1;
        } else if pi < p.len() && p[pi] == t[ti] {
            pi += 1;
            ti += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == b'*')
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionRules {
    pub include_patterns: Vec<PathPattern>,
    pub max_file_bytes: Option<u64>,
}

impl Default for SelectionRules {
    fn default() -> Self {
        SelectionRules {
            include_patterns: DEFAULT_PATTERNS
                .iter()
                .map(|p| PathPattern::parse(p).expect("default pattern"))
                .collect(),
            max_file_bytes: Some(DEFAULT_MAX_FILE_BYTES),
        }
    }
}

impl SelectionRules {
    pub fn from_patterns<S: AsRef<str>>(patterns: &[S]) -> Result<Self> {
        if patterns.is_empty() {
            return Err(TriageError::InvalidSpec("at least one include pattern is required".into()));
        }
        Ok(SelectionRules {
            include_patterns: patterns
                .iter()
                .map(|p| PathPattern::parse(p.as_ref()))
                .collect::<Result<_>>()?,
            max_file_bytes: Some(DEFAULT_MAX_FILE_BYTES),
        })
    }

    pub fn selects(&self, rel_path: &str) -> bool {
        self.include_patterns.iter().any(|p| p.matches(rel_path))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogFile {
    /// Relative to the bundle root, `/`-separated.
    pub path: String,
    /// Size on disk, before any truncation.
    pub byte_len: u64,
    pub text: String,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogBundle {
    pub root: PathBuf,
    /// Sorted by path.
    pub files: Vec<LogFile>,
    pub label: Option<FailureClass>,
}

impl LogBundle {
    pub fn selected_bytes(&self) -> u64 {
        self.files.iter().map(|f| f.byte_len).sum()
    }

    pub fn paths(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.path.as_str()).collect()
    }

    pub fn with_label(mut self, label: FailureClass) -> Self {
        self.label = Some(label);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionStats {
    pub total_bytes: u64,
    pub selected_bytes: u64,
}

impl ReductionStats {
    /// `1 - selected/total` as a float.
    pub fn reduction(&self) -> f64 {
        (self.total_bytes - self.selected_bytes) as f64 / self.total_bytes as f64
    }

    /// The reduction rounded half-up to four decimals, computed on integers
    /// so that e.g. 96/100 is exactly 0.96.
    pub fn reduction_rounded(&self) -> f64 {
        let removed = (self.total_bytes - self.selected_bytes) as u128;
        let total = self.total_bytes as u128;
        let scaled = (removed * 20_000 + total) / (2 * total);
        scaled as f64 / 10_000.0
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "total_bytes": self.total_bytes,
            "selected_bytes": self.selected_bytes,
            "reduction": self.reduction_rounded(),
        })
    }
}

fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn regular_files(root: &Path) -> Result<Vec<(PathBuf, u64)>> {
    if !root.exists() {
        return Err(TriageError::NotFound(root.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in WalkDir::new(root).follow_links(false) {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            match e.into_io_error() {
                Some(io) => TriageError::io(path, io),
                None => TriageError::Parse(format!("cannot walk {}", path.display())),
            }
        })?;
        if entry.file_type().is_file() {
            let len = entry.metadata().map_err(|e| {
                TriageError::Parse(format!("cannot stat {}: {e}", entry.path().display()))
            })?;
            files.push((entry.into_path(), len.len()));
        }
    }
    Ok(files)
}

fn read_capped(path: &Path, cap: Option<u64>) -> Result<(String, bool)> {
    let file = fs::File::open(path).map_err(|e| TriageError::io(path, e))?;
    let mut bytes = Vec::new();
    let truncated = match cap {
        Some(cap) => {
            file.take(cap + 1).read_to_end(&mut bytes).map_err(|e| TriageError::io(path, e))?;
            if bytes.len() as u64 > cap {
                bytes.truncate(cap as usize);
                true
            } else {
                false
            }
        }
        None => {
            let mut file = file;
            file.read_to_end(&mut bytes).map_err(|e| TriageError::io(path, e))?;
            false
        }
    };
    Ok((String::from_utf8_lossy(&bytes).into_owned(), truncated))
}

/// Collects the files of a dump that match `rules`, sorted by relative path.
pub fn scan_dump(root: &Path, rules: &SelectionRules) -> Result<LogBundle> {
    let mut files = Vec::new();
    for (path, byte_len) in regular_files(root)? {
        let rel = relative_path(root, &path);
        if !rules.selects(&rel) {
            continue;
        }
        let (text, truncated) = read_capped(&path, rules.max_file_bytes)?;
        files.push(LogFile { path: rel, byte_len, text, truncated });
    }
    if files.is_empty() {
        return Err(TriageError::EmptyBundle(root.to_path_buf()));
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(LogBundle { root: root.to_path_buf(), files, label: None })
}

/// Compares the bundle's byte count with every regular file under `root`.
pub fn compute_reduction(root: &Path, bundle: &LogBundle) -> Result<ReductionStats> {
    let total_bytes: u64 = regular_files(root)?.iter().map(|(_, len)| len).sum();
    if total_bytes == 0 {
        return Err(TriageError::UndefinedReduction(root.to_path_buf()));
    }
    let selected_bytes = bundle.selected_bytes();
    if selected_bytes > total_bytes {
        return Err(TriageError::InvalidParameter(format!(
            "bundle holds {selected_bytes} bytes but {} only has {total_bytes}",
            root.display()
        )));
    }
    Ok(ReductionStats { total_bytes, selected_bytes })
}
