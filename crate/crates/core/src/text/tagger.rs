use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::tokenize::is_numeric;
use super::{RawRecord, TaggedToken, BOS_TAG, EOS_TAG};
use crate::error::{Error, Result};

pub const PENN_TAGS: &[&str] = &[
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP",
    "NNPS", "PDT", "POS", "PRP", "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB",
    "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB", "$", "``", "''", "(", ")",
    ",", "--", ".", ":", "#", "-LRB-", "-RRB-", "-NONE-", "HYPH", "NFP", "ADD", "AFX", "XX",
];

/// Penn Treebank tag (including punctuation tags) or one of the boundary sentinels.
pub fn is_penn_tag(tag: &str) -> bool {
    tag == BOS_TAG || tag == EOS_TAG || PENN_TAGS.contains(&tag)
}

/// Precomputed tags for one record, as read from the sidecar file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SidecarEntry {
    pub id: String,
    pub headline_tags: Vec<String>,
    #[serde(default)]
    pub body_tags: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Default)]
pub struct SidecarTags {
    entries: HashMap<String, SidecarEntry>,
}

impl SidecarTags {
    pub fn new(entries: impl IntoIterator<Item = SidecarEntry>) -> Self {
        SidecarTags {
            entries: entries.into_iter().map(|e| (e.id.clone(), e)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&SidecarEntry> {
        self.entries.get(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Which part of a record a token list comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    Headline,
    BodySentence(usize),
}

pub enum TagProvider {
    Sidecar(SidecarTags),
    FallbackRule,
}

/// Deterministic lexicon + suffix tagger used when no external tags are available.
pub struct RuleTagger;

const NUMBER_WORDS: &[&str] = &[
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety",
    "hundred", "thousand", "million", "billion",
];

fn lexicon(word: &str) -> Option<&'static str> {
    let tag = match word {
        "the" | "a" | "an" | "this" | "that" | "these" | "those" | "every" | "each" | "some"
        | "no" | "all" | "another" | "any" => "DT",
        "in" | "on" | "at" | "of" | "for" | "with" | "by" | "from" | "about" | "into" | "over"
        | "after" | "before" | "under" | "between" | "through" | "during" | "against"
        | "without" | "within" | "among" | "since" | "than" | "as" | "like" | "per" | "across"
        | "amid" | "despite" | "if" | "because" | "while" => "IN",
        "to" => "TO",
        "and" | "or" | "but" | "nor" | "yet" => "CC",
        "i" | "you" | "he" | "she" | "it" | "we" | "they" | "me" | "him" | "us" | "them" => "PRP",
        "my" | "your" | "his" | "her" | "its" | "our" | "their" => "PRP$",
        "what" | "who" | "whom" => "WP",
        "whose" => "WP$",
        "which" => "WDT",
        "where" | "when" | "why" | "how" => "WRB",
        "will" | "would" | "can" | "could" | "may" | "might" | "shall" | "should" | "must" => "MD",
        "is" | "'s" | "has" | "does" => "VBZ",
        "are" | "am" | "have" | "do" => "VBP",
        "was" | "were" | "had" | "did" | "said" | "made" | "took" | "got" | "went" | "left"
        | "ran" | "won" | "lost" | "told" | "found" | "paid" | "spent" | "sold" => "VBD",
        "be" => "VB",
        "been" => "VBN",
        "being" => "VBG",
        "not" | "n't" | "very" | "also" | "just" | "now" | "then" | "here" | "never" | "always"
        | "only" | "still" | "even" | "again" | "too" | "soon" | "already" => "RB",
        "there" => "EX",
        "more" => "JJR",
        "most" => "JJS",
        "new" | "big" | "old" | "good" | "bad" | "high" | "low" | "top" | "next" | "last"
        | "first" | "best" | "worst" | "huge" | "small" | "major" | "many" | "few" => "JJ",
        _ => return None,
    };
    Some(tag)
}

fn punctuation(token: &str) -> Option<&'static str> {
    let tag = match token {
        "." | "!" | "?" => ".",
        "," => ",",
        ":" | ";" | "-" | "..." => ":",
        "$" | "€" | "£" => "$",
        "\"" | "“" | "``" => "``",
        "”" | "''" => "''",
        "'" | "‘" | "’" => "''",
        "(" | "[" | "{" => "(",
        ")" | "]" | "}" => ")",
        "#" => "#",
        "--" | "—" | "–" => ":",
        _ if token.chars().all(|c| !c.is_alphanumeric()) => "SYM",
        _ => return None,
    };
    Some(tag)
}

impl RuleTagger {
    pub fn tag_token(token: &str) -> &'static str {
        if is_numeric(token) || NUMBER_WORDS.contains(&token) {
            return "CD";
        }
        if let Some(t) = punctuation(token) {
            return t;
        }
        if let Some(t) = lexicon(token) {
            return t;
        }
        let n = token.chars().count();
        if token.chars().any(|c| c.is_ascii_digit()) {
            return "CD";
        }
        let suffix_rules: &[(&str, &str)] = &[
            ("ly", "RB"),
            ("ing", "VBG"),
            ("ed", "VBD"),
            ("est", "JJS"),
            ("ous", "JJ"),
            ("ful", "JJ"),
            ("able", "JJ"),
            ("ible", "JJ"),
            ("ive", "JJ"),
            ("less", "JJ"),
            ("ic", "JJ"),
            ("al", "JJ"),
            ("tion", "NN"),
            ("ment", "NN"),
            ("ness", "NN"),
            ("ity", "NN"),
        ];
        if n > 4 {
            for (suffix, tag) in suffix_rules {
                if token.ends_with(suffix) {
                    return tag;
                }
            }
        }
        if n > 3 && token.ends_with('s') && !token.ends_with("ss") {
            return "NNS";
        }
        "NN"
    }

    pub fn tag(tokens: &[String]) -> Vec<TaggedToken> {
        tokens
            .iter()
            .map(|t| TaggedToken::new(t.clone(), Self::tag_token(t)))
            .collect()
    }
}

/// Tags one token list of record `id`.
pub fn pos_tag(
    id: &str,
    segment: Segment,
    tokens: &[String],
    provider: &TagProvider,
) -> Result<Vec<TaggedToken>> {
    match provider {
        TagProvider::FallbackRule => Ok(RuleTagger::tag(tokens)),
        TagProvider::Sidecar(side) => {
            let err = |reason: String| Error::Tagging {
                id: id.to_string(),
                reason,
            };
            let entry = side
                .get(id)
                .ok_or_else(|| err("no entry in tag sidecar".into()))?;
            let tags = match segment {
                Segment::Headline => &entry.headline_tags,
                Segment::BodySentence(j) => entry
                    .body_tags
                    .get(j)
                    .ok_or_else(|| err(format!("sidecar has no tags for body sentence {j}")))?,
            };
            if tags.len() != tokens.len() {
                return Err(err(format!(
                    "{segment:?}: {} tags for {} tokens",
                    tags.len(),
                    tokens.len()
                )));
            }
            if let Some(bad) = tags.iter().find(|t| !is_penn_tag(t)) {
                return Err(err(format!("unknown tag `{bad}`")));
            }
            Ok(tokens
                .iter()
                .zip(tags)
                .map(|(t, p)| TaggedToken::new(t.clone(), p.clone()))
                .collect())
        }
    }
}

/// Tokenises and tags the headline and every body sentence of a raw record.
pub fn tag_record(
    record: &RawRecord,
    provider: &TagProvider,
) -> Result<(Vec<TaggedToken>, Vec<Vec<TaggedToken>>)> {
    let headline = pos_tag(
        &record.id,
        Segment::Headline,
        &super::tokenize(&record.headline),
        provider,
    )?;
    let sentences = super::split_sentences(&record.body);
    if let TagProvider::Sidecar(side) = provider {
        if let Some(entry) = side.get(&record.id) {
            if entry.body_tags.len() != sentences.len() {
                return Err(Error::Tagging {
                    id: record.id.clone(),
                    reason: format!(
                        "sidecar has {} body sentences, text splits into {}",
                        entry.body_tags.len(),
                        sentences.len()
                    ),
                });
            }
        }
    }
    let body = sentences
        .iter()
        .enumerate()
        .map(|(j, s)| pos_tag(&record.id, Segment::BodySentence(j), &super::tokenize(s), provider))
        .collect::<Result<Vec<_>>>()?;
    Ok((headline, body))
}
