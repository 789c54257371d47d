//! Tokenisation, tagging and cardinal-feature extraction for headline/body pairs.

mod dataset;
pub mod io;
mod features;
mod tagger;
mod tokenize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use dataset::{derive_dataset, replicate_corpus, replicate_for_training, split_stratified, DeriveSummary, Split};
pub use features::extract_cardinal_features;
pub use tagger::{is_penn_tag, PENN_TAGS, pos_tag, tag_record, RuleTagger, Segment, SidecarEntry, SidecarTags, TagProvider};
pub use tokenize::{is_numeric, split_sentences, tokenize};

/// Tag given to the position before the first headline token.
pub const BOS_TAG: &str = "BOS";
/// Tag given to the position after the last headline token.
pub const EOS_TAG: &str = "EOS";
pub const BOS_TOKEN: &str = "<bos>";
pub const EOS_TOKEN: &str = "<eos>";
pub const CARDINAL_TAG: &str = "CD";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Congruent,
    Incongruent,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Congruent, Label::Incongruent];

    /// Class index used by the classifier head.
    pub fn index(self) -> usize {
        match self {
            Label::Congruent => 0,
            Label::Incongruent => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::Congruent
        } else {
            Label::Incongruent
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Congruent => "congruent",
            Label::Incongruent => "incongruent",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub headline: String,
    pub body: String,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaggedToken {
    pub text: String,
    pub pos: String,
}

impl TaggedToken {
    pub fn new(text: impl Into<String>, pos: impl Into<String>) -> Self {
        TaggedToken {
            text: text.into(),
            pos: pos.into(),
        }
    }
}

/// Tag triple around a cardinal token, rendered `LEFT:CD:RIGHT`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CardinalPattern {
    pub left: String,
    pub mid: String,
    pub right: String,
}

impl CardinalPattern {
    pub fn new(left: impl Into<String>, right: impl Into<String>) -> Self {
        CardinalPattern {
            left: left.into(),
            mid: CARDINAL_TAG.to_string(),
            right: right.into(),
        }
    }
}

impl fmt::Display for CardinalPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.left, self.mid, self.right)
    }
}

impl FromStr for CardinalPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // a Penn ":" tag may sit on either side, so locate the ":CD:" separator
        let sep = format!(":{CARDINAL_TAG}:");
        let (left, right) = s
            .match_indices(&sep)
            .map(|(i, _)| (&s[..i], &s[i + sep.len()..]))
            .find(|(l, r)| !l.is_empty() && !r.is_empty())
            .ok_or_else(|| format!("pattern `{s}` is not of the form LEFT:CD:RIGHT"))?;
        Ok(CardinalPattern::new(left, right))
    }
}

impl Serialize for CardinalPattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CardinalPattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Word triple around a cardinal token.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CardinalPhrase {
    pub prev: String,
    pub num: String,
    pub next: String,
}

impl CardinalPhrase {
    pub fn new(prev: impl Into<String>, num: impl Into<String>, next: impl Into<String>) -> Self {
        CardinalPhrase {
            prev: prev.into(),
            num: num.into(),
            next: next.into(),
        }
    }

    pub fn words(&self) -> [&str; 3] {
        [&self.prev, &self.num, &self.next]
    }
}

impl Serialize for CardinalPhrase {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.words().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CardinalPhrase {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [prev, num, next] = <[String; 3]>::deserialize(d)?;
        Ok(CardinalPhrase { prev, num, next })
    }
}

/// A tagged, featurised headline/body pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub label: Label,
    pub headline: Vec<TaggedToken>,
    pub body: Vec<Vec<TaggedToken>>,
    pub patterns: Vec<CardinalPattern>,
    pub phrases: Vec<CardinalPhrase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_cardinal: Option<usize>,
}

impl DatasetRecord {
    pub fn headline_tokens(&self) -> impl Iterator<Item = &str> {
        self.headline.iter().map(|t| t.text.as_str())
    }

    pub fn all_tokens(&self) -> impl Iterator<Item = &str> {
        self.headline
            .iter()
            .chain(self.body.iter().flatten())
            .map(|t| t.text.as_str())
    }
}
