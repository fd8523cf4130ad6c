//! Declared processing times ("в течение 20 минут", "моментально", ...) to seconds.

use serde::{Deserialize, Serialize};

/// One unit word. A word matches when it starts with `word`, or equals it
/// when `exact` is set (for one-letter abbreviations such as "ч").
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitRule {
    pub word: String,
    pub seconds: u64,
    #[serde(default)]
    pub exact: bool,
}

impl UnitRule {
    fn new(word: &str, seconds: u64) -> Self {
        UnitRule { word: word.into(), seconds, exact: false }
    }

    fn matches(&self, token: &str) -> bool {
        if self.exact {
            token == self.word
        } else {
            token.starts_with(&self.word)
        }
    }
}

/// Pattern table for declared durations. Loadable from JSON; every field defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DurationPatterns {
    /// Substrings meaning "no delay".
    pub instant: Vec<String>,
    pub units: Vec<UnitRule>,
}

impl Default for DurationPatterns {
    fn default() -> Self {
        DurationPatterns {
            instant: ["моментально", "мгновенно", "сразу", "instant", "immediately"].map(String::from).to_vec(),
            units: vec![
                UnitRule::new("сек", 1),
                UnitRule::new("мин", 60),
                UnitRule::new("час", 3600),
                UnitRule { word: "ч".into(), seconds: 3600, exact: true },
                UnitRule::new("дн", 86_400),
                UnitRule::new("день", 86_400),
                UnitRule::new("сут", 86_400),
                UnitRule::new("недел", 604_800),
                UnitRule::new("sec", 1),
                UnitRule::new("min", 60),
                UnitRule::new("hour", 3600),
                UnitRule::new("day", 86_400),
                UnitRule::new("week", 604_800),
            ],
        }
    }
}

#[derive(Debug, PartialEq)]
enum Token {
    Number(f64),
    Word(String),
}

fn tokenize(phrase: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let chars: Vec<char> = phrase.to_lowercase().chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && matches!(chars[i], '.' | ',') && chars[i + 1].is_ascii_digit() {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let s: String = chars[start..i].iter().collect::<String>().replace(',', ".");
            if let Ok(v) = s.parse() {
                out.push(Token::Number(v));
            }
        } else if c.is_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_alphabetic() {
                i += 1;
            }
            out.push(Token::Word(chars[start..i].iter().collect()));
        } else {
            i += 1;
        }
    }
    out
}

/// Seconds declared by a phrase, or `None` when nothing in it is recognised.
///
/// Each unit word takes the most recent number before it (1 when there is
/// none, as in "в течение часа"). When a phrase names several durations, as
/// in "от 1 до 3 дней", the longest one is the declared deadline.
pub fn parse_declared_duration(phrase: &str, patterns: &DurationPatterns) -> Option<u64> {
    let mut pending: Option<f64> = None;
    let mut longest: Option<f64> = None;
    for token in tokenize(phrase) {
        match token {
            Token::Number(v) => pending = Some(v),
            Token::Word(w) => {
                if let Some(rule) = patterns.units.iter().find(|u| u.matches(&w)) {
                    let secs = pending.take().unwrap_or(1.0) * rule.seconds as f64;
                    longest = Some(longest.map_or(secs, |l: f64| l.max(secs)));
                }
            }
        }
    }
    if let Some(l) = longest {
        return Some(l.round() as u64);
    }
    let lower = phrase.to_lowercase();
    patterns.instant.iter().any(|w| lower.contains(&w.to_lowercase())).then_some(0)
}
