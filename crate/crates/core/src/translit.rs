//! Rule-table romanization of native-script text.
//!
//! A [`TransliterationTable`] is an ordered list of rewrite rules compiled
//! into a character trie. [`transliterate`] scans the input left to right and
//! at every position applies the rule with the longest matching source.
//!
//! Abugida scripts (Devanagari) need more than plain rewriting: a bare
//! consonant carries an inherent vowel. Rules are therefore classed:
//!
//! * `STANDALONE` emits its target and nothing else.
//! * `CONSONANT` emits its target, then looks at the next match: a
//!   `VOWEL_SIGN` is emitted and consumed, a `VIRAMA` is consumed silently,
//!   anything else gets the inherent vowel `a`.
//! * `VOWEL_SIGN` and `VIRAMA` only have their special meaning right after a
//!   consonant; elsewhere they behave like `STANDALONE`.
//!
//! With [`SchwaPolicy::DropWordFinal`] the inherent vowel of a word-final
//! consonant is suppressed when the word already has a vowel, the way
//! Hindi is typed in chat ("आप" → "ap", "राम" → "ram", but "न" → "na").
//!
//! Whitespace is always emitted as a single ASCII space; other unmapped
//! characters follow the table's [`PassThrough`] policy.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TranslitError {
    #[error("no rules")]
    NoRules,
    #[error("empty rule source")]
    EmptySource,
    #[error("duplicate rule source {0:?}")]
    DuplicateSource(String),
    #[error("rule {rule:?} has target {target:?} outside the romanized alphabet")]
    InvalidTarget { rule: String, target: String },
    #[error("devanagari table needs exactly one VIRAMA rule, found {0}")]
    ViramaCount(usize),
    #[error("unmapped character U+{code:04X} {ch:?} at byte offset {offset}")]
    Unmapped { ch: char, code: u32, offset: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("reading table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleClass {
    Standalone,
    Consonant,
    VowelSign,
    Virama,
}

impl FromStr for RuleClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "STANDALONE" => Ok(RuleClass::Standalone),
            "CONSONANT" => Ok(RuleClass::Consonant),
            "VOWEL_SIGN" => Ok(RuleClass::VowelSign),
            "VIRAMA" => Ok(RuleClass::Virama),
            other => Err(format!("unknown rule class {other:?}")),
        }
    }
}

impl fmt::Display for RuleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleClass::Standalone => "STANDALONE",
            RuleClass::Consonant => "CONSONANT",
            RuleClass::VowelSign => "VOWEL_SIGN",
            RuleClass::Virama => "VIRAMA",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransliterationRule {
    pub source: String,
    pub target: String,
    pub class: RuleClass,
}

impl TransliterationRule {
    pub fn new(source: impl Into<String>, target: impl Into<String>, class: RuleClass) -> Self {
        TransliterationRule {
            source: source.into(),
            target: target.into(),
            class,
        }
    }

    pub fn standalone(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self::new(source, target, RuleClass::Standalone)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Script {
    Devanagari,
    Cyrillic,
    Other,
}

impl Script {
    /// Guess the script from the rule sources: the majority block wins.
    pub fn detect<'a>(sources: impl IntoIterator<Item = &'a str>) -> Script {
        let (mut deva, mut cyr, mut other) = (0usize, 0usize, 0usize);
        for c in sources.into_iter().flat_map(str::chars) {
            match c as u32 {
                0x0900..=0x097F => deva += 1,
                0x0400..=0x04FF => cyr += 1,
                _ => other += 1,
            }
        }
        if deva > cyr && deva > other {
            Script::Devanagari
        } else if cyr > deva && cyr > other {
            Script::Cyrillic
        } else {
            Script::Other
        }
    }
}

/// What to do with a character no rule matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PassThrough {
    #[default]
    Keep,
    Drop,
    Error,
}

/// Handling of the inherent vowel on word-final consonants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchwaPolicy {
    Keep,
    DropWordFinal,
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: HashMap<char, usize>,
    rule: Option<usize>,
}

/// A compiled, immutable set of rewrite rules.
#[derive(Debug, Clone)]
pub struct TransliterationTable {
    rules: Vec<TransliterationRule>,
    script: Script,
    pass_through: PassThrough,
    schwa: SchwaPolicy,
    nodes: Vec<TrieNode>,
    max_source_chars: usize,
}

const INHERENT_VOWEL: &str = "a";

/// Compile rules into a table. Sources must be unique and non-empty, targets
/// must be romanized, and a Devanagari table must carry exactly one virama.
pub fn compile_table(
    rules: Vec<TransliterationRule>,
    script: Script,
    pass_through: PassThrough,
) -> Result<TransliterationTable, TranslitError> {
    if rules.is_empty() {
        return Err(TranslitError::NoRules);
    }
    let mut nodes = vec![TrieNode::default()];
    let mut max_source_chars = 0;
    for (index, rule) in rules.iter().enumerate() {
        if rule.source.is_empty() {
            return Err(TranslitError::EmptySource);
        }
        if !validate_latin(&rule.target) {
            return Err(TranslitError::InvalidTarget {
                rule: rule.source.clone(),
                target: rule.target.clone(),
            });
        }
        let mut node = 0;
        let mut len = 0;
        for c in rule.source.chars() {
            len += 1;
            node = match nodes[node].children.get(&c) {
                Some(&next) => next,
                None => {
                    nodes.push(TrieNode::default());
                    let next = nodes.len() - 1;
                    nodes[node].children.insert(c, next);
                    next
                }
            };
        }
        if nodes[node].rule.is_some() {
            return Err(TranslitError::DuplicateSource(rule.source.clone()));
        }
        nodes[node].rule = Some(index);
        max_source_chars = max_source_chars.max(len);
    }
    if script == Script::Devanagari {
        let viramas = rules.iter().filter(|r| r.class == RuleClass::Virama).count();
        if viramas != 1 {
            return Err(TranslitError::ViramaCount(viramas));
        }
    }
    let schwa = match script {
        Script::Devanagari => SchwaPolicy::DropWordFinal,
        _ => SchwaPolicy::Keep,
    };
    Ok(TransliterationTable {
        rules,
        script,
        pass_through,
        schwa,
        nodes,
        max_source_chars,
    })
}

/// Parse a `source<TAB>target<TAB>rule_class` table file. The script is
/// inferred from the rule sources.
pub fn load_table(path: impl AsRef<Path>) -> Result<TransliterationTable, TranslitError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TranslitError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_table(&text)
}

/// Parse table text in the file format of [`load_table`].
pub fn parse_table(text: &str) -> Result<TransliterationTable, TranslitError> {
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(TranslitError::Parse {
                line: line_no,
                message: format!("expected 3 tab-separated columns, found {}", cols.len()),
            });
        }
        let class = cols[2]
            .parse::<RuleClass>()
            .map_err(|message| TranslitError::Parse { line: line_no, message })?;
        rules.push(TransliterationRule::new(cols[0], cols[1], class));
    }
    let script = Script::detect(rules.iter().map(|r| r.source.as_str()));
    compile_table(rules, script, PassThrough::Keep)
}

impl TransliterationTable {
    pub fn rules(&self) -> &[TransliterationRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn script(&self) -> Script {
        self.script
    }

    pub fn pass_through(&self) -> PassThrough {
        self.pass_through
    }

    pub fn schwa_policy(&self) -> SchwaPolicy {
        self.schwa
    }

    /// Longest rule source, in characters.
    pub fn max_source_chars(&self) -> usize {
        self.max_source_chars
    }

    pub fn with_pass_through(mut self, pass_through: PassThrough) -> Self {
        self.pass_through = pass_through;
        self
    }

    pub fn with_schwa_policy(mut self, schwa: SchwaPolicy) -> Self {
        self.schwa = schwa;
        self
    }

    /// Longest rule matching at the start of `chars`, with its length in chars.
    pub fn longest_match(&self, chars: &[char]) -> Option<(&TransliterationRule, usize)> {
        let mut node = 0;
        let mut best = None;
        for (i, c) in chars.iter().enumerate() {
            match self.nodes[node].children.get(c) {
                Some(&next) => node = next,
                None => break,
            }
            if let Some(rule) = self.nodes[node].rule {
                best = Some((&self.rules[rule], i + 1));
            }
        }
        best
    }

    pub fn transliterate(&self, text: &str) -> Result<String, TranslitError> {
        transliterate(text, self)
    }
}

fn is_vowel_letter(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

/// Letters and combining marks keep a word going; everything else ends it.
fn continues_word(c: char) -> bool {
    c.is_alphabetic() || matches!(c as u32, 0x0900..=0x0903 | 0x093A..=0x094F | 0x0951..=0x0957 | 0x0962..=0x0963)
}

/// Romanize `text` with `table`.
pub fn transliterate(text: &str, table: &TransliterationTable) -> Result<String, TranslitError> {
    let indexed: Vec<(usize, char)> = text.char_indices().collect();
    let chars: Vec<char> = indexed.iter().map(|&(_, c)| c).collect();
    let mut out = String::with_capacity(text.len());
    let mut word_has_vowel = false;
    let mut i = 0;

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            out.push(' ');
            word_has_vowel = false;
            i += 1;
            continue;
        }
        let Some((rule, len)) = table.longest_match(&chars[i..]) else {
            match table.pass_through {
                PassThrough::Keep => out.push(c),
                PassThrough::Drop => {}
                PassThrough::Error => {
                    return Err(TranslitError::Unmapped {
                        ch: c,
                        code: c as u32,
                        offset: indexed[i].0,
                    })
                }
            }
            if !continues_word(c) {
                word_has_vowel = false;
            }
            i += 1;
            continue;
        };
        i += len;
        out.push_str(&rule.target);
        if rule.target.chars().any(is_vowel_letter) {
            word_has_vowel = true;
        } else if rule.class == RuleClass::Standalone && !rule.source.chars().all(continues_word) {
            word_has_vowel = false;
        }
        if rule.class != RuleClass::Consonant {
            continue;
        }
        match table.longest_match(&chars[i..]) {
            Some((next, next_len)) if next.class == RuleClass::VowelSign => {
                out.push_str(&next.target);
                word_has_vowel = true;
                i += next_len;
            }
            Some((next, next_len)) if next.class == RuleClass::Virama => {
                i += next_len;
            }
            _ => {
                let word_final = chars.get(i).is_none_or(|&c| !continues_word(c));
                let drop = table.schwa == SchwaPolicy::DropWordFinal && word_final && word_has_vowel;
                if !drop {
                    out.push_str(INHERENT_VOWEL);
                    word_has_vowel = true;
                }
            }
        }
    }
    Ok(out)
}

/// True iff every character is a lowercase ASCII letter, a digit, a space,
/// an apostrophe, a hyphen or one of `. , ! ?`.
pub fn validate_latin(text: &str) -> bool {
    text.chars()
        .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || matches!(c, ' ' | '\'' | '-' | '.' | ',' | '!' | '?'))
}
