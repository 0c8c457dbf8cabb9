//! LaTeX formula tokenizer.
//!
//! Turns a raw formula into a flat sequence of minimal symbol tokens:
//!
//! - whitespace separates tokens and is never part of one;
//! - `%` comments run to the end of the line and are removed first;
//! - `\` followed by ASCII letters is one control-sequence token (maximal munch);
//! - `\` followed by any other non-whitespace character is a two-character token;
//! - `\` followed by whitespace (control space) is spacing and produces nothing;
//! - after `\begin` / `\end`, a brace group holding a bare name such as
//!   `{matrix}` is a single environment token, braces included;
//! - every other character (digit, letter, brace, punctuation) is its own token.
//!
//! Token classes come from plain-text tables, one surface per line. The
//! built-in tables live in `data/` and can be replaced with [`ClassTables::from_dir`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenClass {
    Command,
    Variable,
    Number,
    Operator,
    Relation,
    Delimiter,
    Environment,
    Other,
}

impl TokenClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenClass::Command => "COMMAND",
            TokenClass::Variable => "VARIABLE",
            TokenClass::Number => "NUMBER",
            TokenClass::Operator => "OPERATOR",
            TokenClass::Relation => "RELATION",
            TokenClass::Delimiter => "DELIMITER",
            TokenClass::Environment => "ENVIRONMENT",
            TokenClass::Other => "OTHER",
        }
    }
}

impl fmt::Display for TokenClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One classified LaTeX lexeme.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolToken {
    pub surface: String,
    pub class: TokenClass,
}

impl fmt::Display for SymbolToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.surface)
    }
}

/// A formula as an ordered token sequence plus an opaque id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedFormula {
    pub id: String,
    pub tokens: Vec<SymbolToken>,
}

impl TokenizedFormula {
    pub fn new(id: impl Into<String>, tokens: Vec<SymbolToken>) -> Self {
        Self { id: id.into(), tokens }
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.surface.as_str())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Space-joined token surfaces. Re-tokenizing the result reproduces the tokens.
pub fn join_surfaces(tokens: &[SymbolToken]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.surface);
    }
    out
}

const BUILTIN_VARIABLES: &str = include_str!("../data/variables.txt");
const BUILTIN_OPERATORS: &str = include_str!("../data/operators.txt");
const BUILTIN_RELATIONS: &str = include_str!("../data/relations.txt");
const BUILTIN_DELIMITERS: &str = include_str!("../data/delimiters.txt");
const BUILTIN_COMMANDS: &str = include_str!("../data/commands.txt");

/// File name of each table inside a table directory.
pub const TABLE_FILES: [(&str, TokenClass); 5] = [
    ("variables.txt", TokenClass::Variable),
    ("operators.txt", TokenClass::Operator),
    ("relations.txt", TokenClass::Relation),
    ("delimiters.txt", TokenClass::Delimiter),
    ("commands.txt", TokenClass::Command),
];

/// Surface → class lookup built from the classification tables.
///
/// Two classes are decided by shape rather than by table: a single ASCII digit
/// is a NUMBER and a `{name}` group is an ENVIRONMENT. Anything else absent
/// from every table is OTHER.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTables {
    map: HashMap<String, TokenClass>,
}

impl ClassTables {
    pub fn builtin() -> Self {
        Self::from_sources([
            (BUILTIN_VARIABLES, TokenClass::Variable),
            (BUILTIN_OPERATORS, TokenClass::Operator),
            (BUILTIN_RELATIONS, TokenClass::Relation),
            (BUILTIN_DELIMITERS, TokenClass::Delimiter),
            (BUILTIN_COMMANDS, TokenClass::Command),
        ])
        .expect("built-in classification tables are valid")
    }

    /// Loads `variables.txt`, `operators.txt`, `relations.txt`,
    /// `delimiters.txt` and `commands.txt` from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut sources = Vec::with_capacity(TABLE_FILES.len());
        for (name, class) in TABLE_FILES {
            let path = dir.join(name);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            sources.push((text, class));
        }
        Self::from_sources(sources.iter().map(|(t, c)| (t.as_str(), *c)))
    }

    pub fn from_sources<'a>(sources: impl IntoIterator<Item = (&'a str, TokenClass)>) -> Result<Self> {
        let mut map = HashMap::new();
        for (text, class) in sources {
            for (lineno, line) in text.lines().enumerate() {
                let surface = line.trim();
                if surface.is_empty() {
                    continue;
                }
                validate_entry(surface, class)
                    .map_err(|why| Error::InvalidTable(format!("{class} line {}: `{surface}` {why}", lineno + 1)))?;
                if let Some(prev) = map.insert(surface.to_string(), class) {
                    if prev != class {
                        return Err(Error::InvalidTable(format!(
                            "`{surface}` listed as both {prev} and {class}"
                        )));
                    }
                }
            }
        }
        Ok(Self { map })
    }

    pub fn classify(&self, surface: &str) -> TokenClass {
        if is_environment_surface(surface) {
            return TokenClass::Environment;
        }
        if is_digit_surface(surface) {
            return TokenClass::Number;
        }
        self.map.get(surface).copied().unwrap_or(TokenClass::Other)
    }

    /// Surfaces listed for `class`, sorted.
    pub fn members(&self, class: TokenClass) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .map
            .iter()
            .filter(|(_, c)| **c == class)
            .map(|(s, _)| s.as_str())
            .collect();
        v.sort_unstable();
        v
    }
}

impl Default for ClassTables {
    fn default() -> Self {
        Self::builtin()
    }
}

fn validate_entry(surface: &str, class: TokenClass) -> std::result::Result<(), &'static str> {
    if surface.chars().any(char::is_whitespace) {
        return Err("contains whitespace");
    }
    if is_digit_surface(surface) || is_environment_surface(surface) {
        return Err("is classified by shape and cannot be listed");
    }
    match class {
        TokenClass::Command if !surface.starts_with('\\') => Err("is a command without a leading backslash"),
        TokenClass::Variable => {
            let single_letter = surface.len() == 1 && surface.as_bytes()[0].is_ascii_alphabetic();
            let letter_command =
                surface.len() > 1 && surface.starts_with('\\') && surface[1..].bytes().all(|b| b.is_ascii_alphabetic());
            if single_letter || letter_command {
                Ok(())
            } else {
                Err("is neither a single letter nor a letter command")
            }
        }
        _ => Ok(()),
    }
}

fn is_digit_surface(s: &str) -> bool {
    s.len() == 1 && s.as_bytes()[0].is_ascii_digit()
}

fn is_environment_surface(s: &str) -> bool {
    s.len() > 2 && s.starts_with('{') && s.ends_with('}') && is_env_name(&s[1..s.len() - 1])
}

fn is_env_name_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '{' | '}' | '\\')
}

fn is_env_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_env_name_char)
}

/// Tokenizer bound to a set of classification tables.
#[derive(Debug, Clone, Default)]
pub struct Tokenizer {
    tables: ClassTables,
}

impl Tokenizer {
    pub fn new(tables: ClassTables) -> Self {
        Self { tables }
    }

    pub fn tables(&self) -> &ClassTables {
        &self.tables
    }

    pub fn classify(&self, surface: &str) -> TokenClass {
        self.tables.classify(surface)
    }

    pub fn token(&self, surface: impl Into<String>) -> SymbolToken {
        let surface = surface.into();
        let class = self.classify(&surface);
        SymbolToken { surface, class }
    }

    pub fn tokenize_bytes(&self, latex: &[u8]) -> Result<Vec<SymbolToken>> {
        let s = std::str::from_utf8(latex).map_err(|e| Error::InvalidEncoding {
            offset: e.valid_up_to(),
        })?;
        self.tokenize(s)
    }

    pub fn tokenize(&self, latex: &str) -> Result<Vec<SymbolToken>> {
        Ok(scan(latex)?.into_iter().map(|s| self.token(s)).collect())
    }

    pub fn tokenize_formula(&self, id: impl Into<String>, latex: &str) -> Result<TokenizedFormula> {
        Ok(TokenizedFormula::new(id, self.tokenize(latex)?))
    }
}

fn default_tokenizer() -> &'static Tokenizer {
    static DEFAULT: OnceLock<Tokenizer> = OnceLock::new();
    DEFAULT.get_or_init(Tokenizer::default)
}

/// Tokenizes with the built-in tables.
pub fn tokenize(latex: &str) -> Result<Vec<SymbolToken>> {
    default_tokenizer().tokenize(latex)
}

/// Classifies with the built-in tables.
pub fn classify(surface: &str) -> TokenClass {
    default_tokenizer().classify(surface)
}

/// Removes `%` comments. A backslash always protects the following character,
/// so `\%` survives and `\\%` starts a comment.
fn strip_comments(latex: &str) -> Result<String> {
    let mut out = String::with_capacity(latex.len());
    let mut chars = latex.char_indices();
    while let Some((offset, c)) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some((_, next)) => {
                    out.push('\\');
                    out.push(next);
                }
                None => return Err(Error::UnterminatedCommand { offset }),
            },
            '%' => {
                for (_, skipped) in chars.by_ref() {
                    if skipped == '\n' {
                        out.push('\n');
                        break;
                    }
                }
            }
            _ => out.push(c),
        }
    }
    Ok(out)
}

fn scan(latex: &str) -> Result<Vec<String>> {
    let text = strip_comments(latex)?;
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c != '\\' {
            out.push(c.to_string());
            i += 1;
            continue;
        }
        // strip_comments guarantees a character after every backslash
        let next = chars[i + 1];
        if next.is_ascii_alphabetic() {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_alphabetic() {
                i += 1;
            }
            let command: String = chars[start..i].iter().collect();
            let opens_env = command == "\\begin" || command == "\\end";
            out.push(command);
            if opens_env {
                if let Some((name, end)) = environment_at(&chars, i) {
                    out.push(name);
                    i = end;
                }
            }
        } else if next.is_whitespace() {
            i += 2;
        } else {
            out.push(['\\', next].iter().collect());
            i += 2;
        }
    }
    Ok(out)
}

/// Recognizes `<ws>*{name}` starting at `pos`; returns the token and the index past `}`.
fn environment_at(chars: &[char], mut pos: usize) -> Option<(String, usize)> {
    while pos < chars.len() && chars[pos].is_whitespace() {
        pos += 1;
    }
    if chars.get(pos) != Some(&'{') {
        return None;
    }
    let start = pos;
    pos += 1;
    while pos < chars.len() && is_env_name_char(chars[pos]) {
        pos += 1;
    }
    if pos == start + 1 || chars.get(pos) != Some(&'}') {
        return None;
    }
    Some((chars[start..=pos].iter().collect(), pos + 1))
}

/// Corpus admission rule: enough distinct variables and enough operator/relation occurrences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterRule {
    pub min_distinct_variables: usize,
    pub min_operators: usize,
}

impl Default for FilterRule {
    fn default() -> Self {
        Self {
            min_distinct_variables: 2,
            min_operators: 3,
        }
    }
}

impl FilterRule {
    pub fn passes(&self, tokens: &[SymbolToken]) -> bool {
        let mut variables = HashSet::new();
        let mut operators = 0usize;
        for t in tokens {
            match t.class {
                TokenClass::Variable => {
                    variables.insert(t.surface.as_str());
                }
                TokenClass::Operator | TokenClass::Relation => operators += 1,
                _ => {}
            }
        }
        variables.len() >= self.min_distinct_variables && operators >= self.min_operators
    }
}

/// At least two distinct variables and three operator/relation occurrences.
pub fn passes_filter(tokens: &[SymbolToken]) -> bool {
    FilterRule::default().passes(tokens)
}
