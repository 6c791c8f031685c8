//! Language admission, mention/URL reduction, emoticon labelling and
//! tokenisation.

use crate::instance::Label;

use super::Document;

/// Decides whether a document enters the pipeline.
pub trait LanguageFilter: Send {
    fn admit(&self, doc: &Document) -> bool;
}

const ENGLISH_STOPWORDS: [&str; 50] = [
    "the", "be", "to", "of", "and", "a", "in", "that", "have", "i", "it", "for", "not", "on", "with", "he",
    "as", "you", "do", "at", "this", "but", "his", "by", "from", "they", "we", "say", "her", "she", "or",
    "an", "will", "my", "one", "all", "would", "there", "their", "what", "so", "up", "out", "if", "about",
    "who", "get", "which", "go", "me",
];

/// Metadata first, then an ASCII-letter ratio plus stopword check.
#[derive(Clone, Debug)]
pub struct HeuristicFilter {
    pub target: String,
    pub min_ascii_fraction: f64,
}

impl Default for HeuristicFilter {
    fn default() -> Self {
        Self {
            target: "en".to_string(),
            min_ascii_fraction: 0.8,
        }
    }
}

impl LanguageFilter for HeuristicFilter {
    fn admit(&self, doc: &Document) -> bool {
        if let Some(lang) = &doc.lang {
            return lang.eq_ignore_ascii_case(&self.target);
        }
        if self.target != "en" {
            return false;
        }
        looks_english(&doc.text, self.min_ascii_fraction)
    }
}

/// Admits everything; useful for pre-filtered corpora.
#[derive(Clone, Copy, Debug, Default)]
pub struct AdmitAll;

impl LanguageFilter for AdmitAll {
    fn admit(&self, _doc: &Document) -> bool {
        true
    }
}

fn looks_english(text: &str, min_fraction: f64) -> bool {
    let (mut letters, mut visible) = (0usize, 0usize);
    for ch in text.chars().filter(|c| !c.is_whitespace()) {
        visible += 1;
        if ch.is_ascii_alphabetic() {
            letters += 1;
        }
    }
    if visible == 0 || (letters as f64) < min_fraction * visible as f64 {
        return false;
    }
    text.split(|c: char| !c.is_ascii_alphabetic())
        .any(|w| !w.is_empty() && ENGLISH_STOPWORDS.contains(&w.to_ascii_lowercase().as_str()))
}

pub fn language_admit(doc: &Document) -> bool {
    HeuristicFilter::default().admit(doc)
}

fn is_url(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www.")
}

/// Rewrites `@name` tokens to `USER` and link tokens to `URL`, leaving the
/// surrounding whitespace alone.
pub fn reduce_features(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while !rest.is_empty() {
        let start = rest.find(|c: char| !c.is_whitespace()).unwrap_or(rest.len());
        out.push_str(&rest[..start]);
        rest = &rest[start..];
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        let token = &rest[..end];
        if token.len() > 1 && token.starts_with('@') {
            out.push_str("USER");
        } else if is_url(token) {
            out.push_str("URL");
        } else {
            out.push_str(token);
        }
        rest = &rest[end..];
    }
    out
}

pub const POSITIVE_EMOTICONS: [&str; 5] = [":)", ":-)", ":D", "=)", ";)"];
pub const NEGATIVE_EMOTICONS: [&str; 4] = [":(", ":-(", ":'(", "D:"];

/// Label from whole-token emoticons and the text with every emoticon
/// removed. Conflicting or missing emoticons leave the label empty.
pub fn label_by_emoticons(text: &str) -> (Option<Label>, String) {
    let (mut pos, mut neg) = (false, false);
    let mut kept = Vec::new();
    for token in text.split_whitespace() {
        if POSITIVE_EMOTICONS.contains(&token) {
            pos = true;
        } else if NEGATIVE_EMOTICONS.contains(&token) {
            neg = true;
        } else {
            kept.push(token);
        }
    }
    if !pos && !neg {
        return (None, text.to_string());
    }
    let label = match (pos, neg) {
        (true, false) => Some(Label::Positive),
        (false, true) => Some(Label::Negative),
        _ => None,
    };
    (label, kept.join(" "))
}

pub const USER_TOKEN: &str = "USER";
pub const URL_TOKEN: &str = "URL";

/// Lower-cased alphanumeric runs; `@` survives only at the start of a
/// token. `USER` and `URL` pass through verbatim and are exempt from the
/// two-character minimum.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, tokens: &mut Vec<String>| {
        if current == USER_TOKEN || current == URL_TOKEN {
            tokens.push(std::mem::take(current));
            return;
        }
        let lowered = current.to_lowercase();
        current.clear();
        if lowered.chars().count() >= 2 {
            tokens.push(lowered);
        }
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() || (ch == '@' && current.is_empty()) {
            current.push(ch);
        } else if !current.is_empty() {
            flush(&mut current, &mut tokens);
        }
    }
    if !current.is_empty() {
        flush(&mut current, &mut tokens);
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str, lang: Option<&str>) -> Document {
        Document {
            id: "d".into(),
            text: text.into(),
            lang: lang.map(str::to_string),
            timestamp: None,
            label: None,
        }
    }

    #[test]
    fn admission() {
        assert!(language_admit(&doc("купить сейчас", Some("en"))));
        assert!(!language_admit(&doc("the quick brown fox", Some("ru"))));
        assert!(!language_admit(&doc("купить сейчас", None)));
        assert!(language_admit(&doc("the quick brown fox", None)));
        // letters alone are not enough without a stopword
        assert!(!language_admit(&doc("quick brown fox", None)));
        assert!(!language_admit(&doc("   ", None)));
    }

    #[test]
    fn reduction() {
        assert_eq!(reduce_features("@john check http://t.co/x"), "USER check URL");
        assert_eq!(reduce_features("see www.example.com  or https://a.b"), "see URL  or URL");
        assert_eq!(reduce_features("email me @ noon"), "email me @ noon");
        assert_eq!(reduce_features(" plain\ttext "), " plain\ttext ");
    }

    #[test]
    fn emoticons() {
        assert_eq!(label_by_emoticons("love it :)"), (Some(Label::Positive), "love it".into()));
        assert_eq!(label_by_emoticons("awful D: day"), (Some(Label::Negative), "awful day".into()));
        assert_eq!(label_by_emoticons("meh :) :("), (None, "meh".into()));
        assert_eq!(label_by_emoticons("no emoticons here"), (None, "no emoticons here".into()));
        // only whole tokens count
        assert_eq!(label_by_emoticons("smile:)"), (None, "smile:)".into()));
    }

    #[test]
    fn tokens() {
        assert_eq!(tokenize("Great, GREAT day!"), ["great", "great", "day"]);
        assert_eq!(tokenize("USER check URL"), ["USER", "check", "URL"]);
        assert!(tokenize("a b").is_empty());
        assert_eq!(tokenize("@bob said hi@there"), ["@bob", "said", "hi", "there"]);
    }

    #[test]
    fn reduction_is_idempotent_on_samples() {
        for t in ["@a @b http://x www.y z", "@@x", "USER URL", "", "  @x  "] {
            let once = reduce_features(t);
            assert_eq!(reduce_features(&once), once);
        }
    }
}
