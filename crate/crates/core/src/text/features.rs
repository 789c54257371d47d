use super::{
    CardinalPattern, CardinalPhrase, TaggedToken, BOS_TAG, BOS_TOKEN, CARDINAL_TAG, EOS_TAG,
    EOS_TOKEN,
};

/// One pattern and one phrase per CD-tagged headline token, in token order.
/// Adjacent cardinals are not merged.
pub fn extract_cardinal_features(
    headline: &[TaggedToken],
) -> (Vec<CardinalPattern>, Vec<CardinalPhrase>) {
    let mut patterns = Vec::new();
    let mut phrases = Vec::new();
    for (i, tok) in headline.iter().enumerate() {
        if tok.pos != CARDINAL_TAG {
            continue;
        }
        let prev = i.checked_sub(1).map(|j| &headline[j]);
        let next = headline.get(i + 1);
        patterns.push(CardinalPattern::new(
            prev.map_or(BOS_TAG, |t| t.pos.as_str()),
            next.map_or(EOS_TAG, |t| t.pos.as_str()),
        ));
        phrases.push(CardinalPhrase::new(
            prev.map_or(BOS_TOKEN, |t| t.text.as_str()),
            tok.text.as_str(),
            next.map_or(EOS_TOKEN, |t| t.text.as_str()),
        ));
    }
    (patterns, phrases)
}
