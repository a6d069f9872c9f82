//! Table-driven lexer profiles: comment stripping that respects string
//! literals, import detection, cosmetic-line checks and method spans.

use std::collections::BTreeMap;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodStyle {
    Braces,
    Indentation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub name: String,
    #[serde(default)]
    pub extensions: Vec<String>,
    #[serde(default)]
    pub line_comment: Vec<String>,
    #[serde(default)]
    pub block_comment: Vec<(String, String)>,
    #[serde(default)]
    pub import_keywords: Vec<String>,
    #[serde(default = "default_quotes")]
    pub string_quotes: Vec<char>,
    pub method_style: MethodStyle,
}

fn default_quotes() -> Vec<char> {
    vec!['"', '\'']
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl LanguageProfile {
    fn braces(name: &str, exts: &[&str], imports: &[&str]) -> Self {
        LanguageProfile {
            name: name.into(),
            extensions: strings(exts),
            line_comment: strings(&["//"]),
            block_comment: vec![("/*".into(), "*/".into())],
            import_keywords: strings(imports),
            string_quotes: default_quotes(),
            method_style: MethodStyle::Braces,
        }
    }

    pub fn java() -> Self {
        Self::braces("java", &["java", "kt", "scala", "groovy", "cs"], &["import", "using"])
    }

    pub fn javascript() -> Self {
        let mut p = Self::braces(
            "javascript",
            &["js", "jsx", "mjs", "cjs", "ts", "tsx"],
            &["import"],
        );
        p.string_quotes.push('`');
        p
    }

    pub fn go() -> Self {
        let mut p = Self::braces("go", &["go"], &["import"]);
        p.string_quotes.push('`');
        p
    }

    pub fn c_family() -> Self {
        Self::braces(
            "c",
            &["c", "h", "cc", "cpp", "cxx", "hpp", "hh", "m", "swift", "php"],
            &["#include", "#import", "using", "use"],
        )
    }

    pub fn rust() -> Self {
        let mut p = Self::braces("rust", &["rs"], &["use", "extern crate"]);
        p.string_quotes = vec!['"'];
        p
    }

    pub fn python() -> Self {
        LanguageProfile {
            name: "python".into(),
            extensions: strings(&["py", "pyi"]),
            line_comment: strings(&["#"]),
            block_comment: Vec::new(),
            import_keywords: strings(&["import", "from"]),
            string_quotes: default_quotes(),
            method_style: MethodStyle::Indentation,
        }
    }

    /// Removes comments, keeping string literal contents intact.
    /// `in_block` carries an open block comment across lines.
    pub fn strip_comments(&self, line: &str, in_block: &mut Option<usize>) -> String {
        let chars: Vec<char> = line.chars().collect();
        let mut out = String::with_capacity(line.len());
        let mut i = 0;
        let mut quote: Option<char> = None;
        while i < chars.len() {
            if let Some(b) = *in_block {
                let close: Vec<char> = self.block_comment[b].1.chars().collect();
                if starts_at(&chars, i, &close) {
                    *in_block = None;
                    i += close.len();
                    out.push(' ');
                } else {
                    i += 1;
                }
                continue;
            }
            let c = chars[i];
            if let Some(q) = quote {
                out.push(c);
                if c == '\\' && i + 1 < chars.len() {
                    out.push(chars[i + 1]);
                    i += 2;
                    continue;
                }
                if c == q {
                    quote = None;
                }
                i += 1;
                continue;
            }
            if self.line_comment.iter().any(|t| starts_at(&chars, i, &t.chars().collect::<Vec<_>>())) {
                break;
            }
            if let Some(b) = self
                .block_comment
                .iter()
                .position(|(open, _)| starts_at(&chars, i, &open.chars().collect::<Vec<_>>()))
            {
                *in_block = Some(b);
                i += self.block_comment[b].0.chars().count();
                continue;
            }
            if self.string_quotes.contains(&c) {
                quote = Some(c);
            }
            out.push(c);
            i += 1;
        }
        out
    }

    /// Text with comments removed and all whitespace outside string literals
    /// deleted. A line that only continues a block comment (` * text`) is
    /// treated as comment.
    pub fn normalize(&self, line: &str) -> String {
        if self.is_block_comment_body(line) {
            return String::new();
        }
        let mut block = None;
        let stripped = self.strip_comments(line, &mut block);
        remove_whitespace(&stripped, &self.string_quotes)
    }

    fn is_block_comment_body(&self, line: &str) -> bool {
        let t = line.trim_start();
        let t = t.trim_end();
        self.block_comment.iter().any(|(open, close)| {
            let starred = open.ends_with('*') && close.starts_with('*');
            (starred && (t == "*" || t.starts_with("* "))) || t == close.as_str()
        })
    }

    pub fn is_import(&self, line: &str) -> bool {
        let t = line.trim();
        self.import_keywords.iter().any(|k| {
            let Some(rest) = t.strip_prefix(k.as_str()) else {
                return false;
            };
            let boundary = rest
                .chars()
                .next()
                .is_some_and(|c| c.is_whitespace() || c == '<' || c == '"' || c == '(');
            if !boundary {
                return false;
            }
            // Python's `from x import y` must really import.
            k != "from" || rest.contains(" import ")
        })
    }

    /// Line that carries no code on its own: blank, comment-only or import.
    pub fn is_cosmetic_side(&self, line: &str) -> bool {
        self.normalize(line).is_empty() || self.is_import(line)
    }
}

fn starts_at(chars: &[char], i: usize, token: &[char]) -> bool {
    !token.is_empty() && chars.len() >= i + token.len() && chars[i..i + token.len()] == *token
}

fn remove_whitespace(text: &str, quotes: &[char]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in text.chars() {
        match quote {
            Some(q) => {
                out.push(c);
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None => {
                if quotes.contains(&c) {
                    quote = Some(c);
                    out.push(c);
                } else if !c.is_whitespace() {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Whether a line change only touches whitespace, comments or imports.
/// With no profile (unknown language) nothing is cosmetic.
pub fn is_cosmetic_line(old: Option<&str>, new: Option<&str>, profile: Option<&LanguageProfile>) -> bool {
    let Some(p) = profile else {
        return false;
    };
    match (old, new) {
        (None, None) => false,
        (Some(o), None) => p.is_cosmetic_side(o),
        (None, Some(n)) => p.is_cosmetic_side(n),
        (Some(o), Some(n)) => {
            p.normalize(o) == p.normalize(n) || (p.is_cosmetic_side(o) && p.is_cosmetic_side(n))
        }
    }
}

/// Language profiles keyed by file extension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profiles {
    by_ext: BTreeMap<String, LanguageProfile>,
}

impl Default for Profiles {
    fn default() -> Self {
        Profiles::from_profiles([
            LanguageProfile::java(),
            LanguageProfile::javascript(),
            LanguageProfile::go(),
            LanguageProfile::c_family(),
            LanguageProfile::rust(),
            LanguageProfile::python(),
        ])
    }
}

impl Profiles {
    pub fn from_profiles(profiles: impl IntoIterator<Item = LanguageProfile>) -> Self {
        let mut by_ext = BTreeMap::new();
        for p in profiles {
            for e in &p.extensions {
                by_ext.insert(e.trim_start_matches('.').to_ascii_lowercase(), p.clone());
            }
        }
        Profiles { by_ext }
    }

    pub fn empty() -> Self {
        Profiles {
            by_ext: BTreeMap::new(),
        }
    }

    /// Adds or replaces profiles; later entries win per extension.
    pub fn extend(&mut self, profiles: impl IntoIterator<Item = LanguageProfile>) {
        let other = Profiles::from_profiles(profiles);
        self.by_ext.extend(other.by_ext);
    }

    pub fn for_path(&self, path: &str) -> Option<&LanguageProfile> {
        let name = path.rsplit('/').next().unwrap_or(path);
        let (_, ext) = name.rsplit_once('.')?;
        self.by_ext.get(&ext.to_ascii_lowercase())
    }
}

/// A method body located in a file version. `header` is the normalized
/// signature text, used to identify a method across revisions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodSpan {
    pub start: usize,
    pub end: usize,
    pub header: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpanLookup {
    Method(MethodSpan),
    WholeFile,
}

const CONTROL_WORDS: &[&str] = &[
    "if", "else", "for", "while", "switch", "catch", "do", "try", "finally", "return", "new",
    "synchronized", "foreach", "match", "loop", "select", "case", "when",
];

fn signature_re() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^[^=;{}]*?\b([A-Za-z_$][A-Za-z0-9_$]*)\s*(?:<[^<>]*>)?\s*\([^;]*\)[^;=]*$")
            .expect("valid signature regex")
    })
}

fn looks_like_signature(header: &str) -> bool {
    let h = header.trim();
    if h.is_empty() {
        return false;
    }
    let first = h
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .next()
        .unwrap_or("");
    if CONTROL_WORDS.contains(&first) || h.starts_with('}') {
        return false;
    }
    match signature_re().captures(h) {
        Some(c) => !CONTROL_WORDS.contains(&c.get(1).map(|m| m.as_str()).unwrap_or("")),
        None => false,
    }
}

fn normalize_header(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Innermost method containing `line` (1-based) in `lines`.
pub fn enclosing_method(lines: &[String], line: usize, profile: &LanguageProfile) -> SpanLookup {
    if line == 0 || line > lines.len() {
        return SpanLookup::WholeFile;
    }
    let spans = method_spans(lines, profile);
    spans
        .into_iter()
        .filter(|s| s.start <= line && line <= s.end)
        .max_by_key(|s| (s.start, std::cmp::Reverse(s.end)))
        .map(SpanLookup::Method)
        .unwrap_or(SpanLookup::WholeFile)
}

/// All method spans of a file; spans are disjoint or nested.
pub fn method_spans(lines: &[String], profile: &LanguageProfile) -> Vec<MethodSpan> {
    match profile.method_style {
        MethodStyle::Braces => brace_spans(lines, profile),
        MethodStyle::Indentation => indentation_spans(lines),
    }
}

fn brace_spans(lines: &[String], profile: &LanguageProfile) -> Vec<MethodSpan> {
    // Code text per line with comments and string contents blanked out.
    let mut block = None;
    let code: Vec<String> = lines
        .iter()
        .map(|l| blank_strings(&profile.strip_comments(l, &mut block), &profile.string_quotes))
        .collect();

    let mut stack: Vec<(usize, usize)> = Vec::new(); // (line, column)
    let mut spans = Vec::new();
    for (idx, text) in code.iter().enumerate() {
        for (col, c) in text.char_indices() {
            match c {
                '{' => stack.push((idx, col)),
                '}' => {
                    if let Some((open_line, open_col)) = stack.pop() {
                        if let Some((start, header)) = block_header(&code, open_line, open_col) {
                            if looks_like_signature(&header) {
                                spans.push(MethodSpan {
                                    start: start + 1,
                                    end: idx + 1,
                                    header: normalize_header(&header),
                                });
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }
    spans.sort();
    spans
}

/// Header text preceding the `{` at (line, col): text before the brace on
/// its line, extended upwards over continuation lines of a signature.
fn block_header(code: &[String], line: usize, col: usize) -> Option<(usize, String)> {
    let mut header = code[line][..col].trim().to_string();
    let mut start = line;
    let mut steps = 0;
    while steps < 4 && start > 0 {
        let complete = header.contains('(') && paren_balance(&header) == 0;
        if complete {
            break;
        }
        let prev = code[start - 1].trim();
        if prev.ends_with(';') || prev.ends_with('}') || prev.ends_with('{') {
            break;
        }
        if prev.is_empty() {
            start -= 1;
            steps += 1;
            continue;
        }
        header = format!("{prev} {header}");
        start -= 1;
        steps += 1;
    }
    let header = header.trim().to_string();
    (!header.is_empty()).then_some((start, header))
}

fn paren_balance(s: &str) -> i32 {
    s.chars().fold(0, |acc, c| match c {
        '(' => acc + 1,
        ')' => acc - 1,
        _ => acc,
    })
}

fn blank_strings(text: &str, quotes: &[char]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for c in text.chars() {
        match quote {
            Some(q) => {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                    out.push(c);
                    continue;
                }
                out.push(' ');
            }
            None => {
                if quotes.contains(&c) {
                    quote = Some(c);
                }
                out.push(c);
            }
        }
    }
    out
}

fn indentation_spans(lines: &[String]) -> Vec<MethodSpan> {
    static DEF: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let def = DEF.get_or_init(|| Regex::new(r"^(\s*)(?:async\s+)?def\s+\w+").expect("valid def regex"));
    let indent = |l: &str| l.len() - l.trim_start().len();
    let mut spans = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        let Some(c) = def.captures(l) else {
            continue;
        };
        let level = c.get(1).map(|m| m.as_str().len()).unwrap_or(0);
        let mut end = i;
        for (j, next) in lines.iter().enumerate().skip(i + 1) {
            if next.trim().is_empty() {
                continue;
            }
            if indent(next) <= level {
                break;
            }
            end = j;
        }
        spans.push(MethodSpan {
            start: i + 1,
            end: end + 1,
            header: normalize_header(l),
        });
    }
    spans
}
