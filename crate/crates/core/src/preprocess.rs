//! Log cleaning and tokenization.
//!
//! Cleaning applies, in this order:
//!
//! 1. lowercase
//! 2. remove ISO-8601 and klog (`Immdd hh:mm:ss.uuuuuu`) timestamps
//! 3. remove IPv4 (with optional port or prefix length) and IPv6 literals
//! 4. remove UUIDs and hex runs of eight or more digits
//! 5. remove integers at the start of a line
//! 6. replace newlines and every character outside `[a-z0-9_./-]` with a space
//! 7. collapse whitespace runs
//! 8. trim
//!
//! Removed spans become a single space, so no rule can glue two neighbouring
//! tokens together. Word boundaries are ASCII-only for the same reason: the
//! final alphabet is ASCII, and a non-ASCII letter next to a hex run must not
//! shield it from rule 4 on one pass and expose it on the next.

use std::path::PathBuf;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TriageError};
use crate::ingest::LogBundle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CleaningRule {
    Lowercase,
    Timestamps,
    IpAddresses,
    HexIdentifiers,
    LineNumbers,
    Punctuation,
    CollapseWhitespace,
    Trim,
}

impl CleaningRule {
    pub fn name(self) -> &'static str {
        match self {
            CleaningRule::Lowercase => "lowercase",
            CleaningRule::Timestamps => "timestamps",
            CleaningRule::IpAddresses => "ip-addresses",
            CleaningRule::HexIdentifiers => "hex-identifiers",
            CleaningRule::LineNumbers => "line-numbers",
            CleaningRule::Punctuation => "punctuation",
            CleaningRule::CollapseWhitespace => "collapse-whitespace",
            CleaningRule::Trim => "trim",
        }
    }
}

/// Ordered cleaning pipeline. The default is the full rule list above;
/// dropping rules is allowed, reordering is not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningConfig {
    rules: Vec<CleaningRule>,
}

const RULE_ORDER: [CleaningRule; 8] = [
    CleaningRule::Lowercase,
    CleaningRule::Timestamps,
    CleaningRule::IpAddresses,
    CleaningRule::HexIdentifiers,
    CleaningRule::LineNumbers,
    CleaningRule::Punctuation,
    CleaningRule::CollapseWhitespace,
    CleaningRule::Trim,
];

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig { rules: RULE_ORDER.to_vec() }
    }
}

impl CleaningConfig {
    pub fn with_rules(rules: Vec<CleaningRule>) -> Result<Self> {
        let positions: Vec<usize> = rules
            .iter()
            .map(|r| RULE_ORDER.iter().position(|o| o == r).unwrap())
            .collect();
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TriageError::InvalidSpec(
                "cleaning rules must be unique and in canonical order".into(),
            ));
        }
        Ok(CleaningConfig { rules })
    }

    pub fn rules(&self) -> &[CleaningRule] {
        &self.rules
    }
}

struct Patterns {
    timestamp: Regex,
    ipv4: Regex,
    ipv6_candidate: Regex,
    uuid: Regex,
    hex_run: Regex,
    line_number: Regex,
    punctuation: Regex,
    whitespace: Regex,
}

fn patterns() -> &'static Patterns {
    static PATTERNS: OnceLock<Patterns> = OnceLock::new();
    PATTERNS.get_or_init(|| Patterns {
        timestamp: Regex::new(concat!(
            r"(?-u:\b)\d{4}-\d{2}-\d{2}[t ]\d{2}:\d{2}:\d{2}(?:[.,]\d+)?(?:z|[+-]\d{2}:?\d{2})?",
            r"|(?-u:\b)[iwef]?\d{4} \d{2}:\d{2}:\d{2}\.\d{1,9}(?-u:\b)",
        ))
        .unwrap(),
        ipv4: Regex::new(
            r"(?-u:\b)(?:25[0-5]|2[0-4]\d|1?\d?\d)(?:\.(?:25[0-5]|2[0-4]\d|1?\d?\d)){3}(?::\d{1,5}|/\d{1,2})?(?-u:\b)",
        )
        .unwrap(),
        ipv6_candidate: Regex::new(r"[0-9a-f:.]*:[0-9a-f:.]*").unwrap(),
        uuid: Regex::new(
            r"(?-u:\b)[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}(?-u:\b)",
        )
        .unwrap(),
        hex_run: Regex::new(r"(?-u:\b)[0-9a-f]{8,}(?-u:\b)").unwrap(),
        // Leading integers, possibly several, separated by characters that
        // rule 6 would blank anyway.
        line_number: Regex::new(r"(?m)^(?:[^a-z0-9_./\n-]*\d+(?-u:\b))+").unwrap(),
        punctuation: Regex::new(r"[^a-z0-9_./-]+").unwrap(),
        whitespace: Regex::new(r"\s+").unwrap(),
    })
}

fn is_token_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// IPv6 literals are validated by the standard parser rather than a regex;
/// candidates glued to a word character on either side are left alone.
fn remove_ipv6(text: &str) -> String {
    let bytes = text.as_bytes();
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in patterns().ipv6_candidate.find_iter(text) {
        let start = m.start();
        let before_ok = start == 0 || !is_token_byte(bytes[start - 1]);
        let mut candidate = m.as_str();
        let mut end = m.end();
        while candidate.ends_with('.') {
            candidate = &candidate[..candidate.len() - 1];
            end -= 1;
        }
        let after_ok = end == bytes.len() || !is_token_byte(bytes[end]);
        if before_ok && after_ok && candidate.matches(':').count() >= 2
            && candidate.parse::<std::net::Ipv6Addr>().is_ok()
        {
            out.push_str(&text[last..start]);
            out.push(' ');
            last = end;
        }
    }
    out.push_str(&text[last..]);
    out
}

fn apply_rule(rule: CleaningRule, text: String) -> String {
    let p = patterns();
    match rule {
        CleaningRule::Lowercase => text.to_lowercase(),
        CleaningRule::Timestamps => p.timestamp.replace_all(&text, " ").into_owned(),
        CleaningRule::IpAddresses => {
            let v4 = p.ipv4.replace_all(&text, " ");
            remove_ipv6(&v4)
        }
        CleaningRule::HexIdentifiers => {
            let no_uuid = p.uuid.replace_all(&text, " ");
            p.hex_run.replace_all(&no_uuid, " ").into_owned()
        }
        CleaningRule::LineNumbers => p.line_number.replace_all(&text, " ").into_owned(),
        CleaningRule::Punctuation => p.punctuation.replace_all(&text, " ").into_owned(),
        CleaningRule::CollapseWhitespace => p.whitespace.replace_all(&text, " ").into_owned(),
        CleaningRule::Trim => text.trim().to_string(),
    }
}

/// Runs the configured cleaning rules over `raw`. Total on any input.
pub fn clean_text(raw: &str, config: &CleaningConfig) -> String {
    config
        .rules
        .iter()
        .fold(raw.to_string(), |text, &rule| apply_rule(rule, text))
}

/// A cleaned, tokenized log document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenDocument {
    pub tokens: Vec<String>,
    pub source_bundle: PathBuf,
}

impl TokenDocument {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenDocument { tokens, source_bundle: PathBuf::new() }
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    /// Space-joined form written by `triage preprocess`.
    pub fn to_line(&self) -> String {
        self.tokens.join(" ")
    }
}

impl<S: Into<String>> FromIterator<S> for TokenDocument {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenDocument::new(iter.into_iter().map(Into::into).collect())
    }
}

/// Splits cleaned text on spaces, keeping tokens of two or more characters
/// that contain at least one letter.
pub fn tokenize(cleaned: &str) -> TokenDocument {
    cleaned
        .split(' ')
        .filter(|t| t.len() >= 2 && t.bytes().any(|b| b.is_ascii_lowercase()))
        .collect()
}

/// Concatenates a bundle's files in path order and cleans the result.
pub fn preprocess_bundle(bundle: &LogBundle, config: &CleaningConfig) -> Result<TokenDocument> {
    if bundle.files.is_empty() {
        return Err(TriageError::EmptyBundle(bundle.root.clone()));
    }
    let joined = bundle
        .files
        .iter()
        .map(|f| f.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    let mut doc = tokenize(&clean_text(&joined, config));
    doc.source_bundle = bundle.root.clone();
    Ok(doc)
}
