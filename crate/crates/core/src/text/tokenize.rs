/// Abbreviations whose trailing period does not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "etc.", "e.g.", "i.e.",
    "u.s.", "u.k.", "u.n.", "inc.", "ltd.", "co.", "corp.", "gov.", "sen.", "rep.", "gen.",
    "no.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.",
    "nov.", "dec.", "a.m.", "p.m.",
];

/// Digits with optional comma grouping and an optional decimal part, e.g. `1,000.5`.
pub fn is_numeric(token: &str) -> bool {
    let (int, frac) = match token.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (token, None),
    };
    if let Some(f) = frac {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
        if int.is_empty() {
            return true;
        }
    }
    let groups: Vec<&str> = int.split(',').collect();
    if groups.iter().any(|g| g.is_empty() || !g.bytes().all(|b| b.is_ascii_digit())) {
        return false;
    }
    groups.len() == 1 || groups[1..].iter().all(|g| g.len() == 3) && groups[0].len() <= 3
}

fn starts_numeric_fraction(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next() == Some('.') && chars.next().is_some_and(|c| c.is_ascii_digit())
}

/// Lowercases, splits on whitespace and peels leading/trailing punctuation
/// into single-character tokens. Inner punctuation (`1,000`, `1.2`, `don't`)
/// stays attached.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let lower = chunk.to_lowercase();
        let mut core = lower.as_str();
        let mut trailing = Vec::new();
        loop {
            match core.chars().next() {
                Some(c) if !c.is_alphanumeric() && !starts_numeric_fraction(core) => {
                    out.push(c.to_string());
                    core = &core[c.len_utf8()..];
                }
                _ => break,
            }
        }
        while let Some(c) = core.chars().next_back() {
            if c.is_alphanumeric() {
                break;
            }
            trailing.push(c.to_string());
            core = &core[..core.len() - c.len_utf8()];
        }
        if !core.is_empty() {
            out.push(core.to_string());
        }
        out.extend(trailing.into_iter().rev());
    }
    out
}

/// Splits body text on `.`, `!`, `?` followed by whitespace or end of text,
/// except after a known abbreviation. Never returns empty sentences.
pub fn split_sentences(body: &str) -> Vec<String> {
    let mut sentences = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = body.char_indices().collect();
    for (k, &(pos, c)) in chars.iter().enumerate() {
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let at_boundary = chars.get(k + 1).is_none_or(|&(_, n)| n.is_whitespace());
        if !at_boundary {
            continue;
        }
        let end = pos + c.len_utf8();
        if c == '.' {
            let word_start = body[start..pos]
                .rfind(char::is_whitespace)
                .map(|i| start + i + 1)
                .unwrap_or(start);
            let word = body[word_start..end].to_lowercase();
            if ABBREVIATIONS.contains(&word.as_str()) {
                continue;
            }
        }
        let s = body[start..end].trim();
        if !s.is_empty() {
            sentences.push(s.to_string());
        }
        start = end;
    }
    let tail = body[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(toks("US Will Have 100 Million"), ["us", "will", "have", "100", "million"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("$1.2 million!"), ["$", "1.2", "million", "!"]);
    }

    #[test]
    fn tokenize_keeps_grouped_numbers() {
        assert_eq!(toks("about 1,000,000 people."), ["about", "1,000,000", "people", "."]);
        assert_eq!(toks("(50 Years.)"), ["(", "50", "years", ".", ")"]);
        assert_eq!(toks(".5 percent"), [".5", "percent"]);
        assert_eq!(toks("don't"), ["don't"]);
    }

    #[test]
    fn numeric_recognition() {
        for t in ["100", "1.2", "1,000", "12,345.67", ".5"] {
            assert!(is_numeric(t), "{t}");
        }
        for t in ["1,00", "1.", "abc", "", "1.2.3", "1,0000", "1e5"] {
            assert!(!is_numeric(t), "{t}");
        }
    }

    #[test]
    fn sentence_examples() {
        assert_eq!(split_sentences("A b. C d."), ["A b.", "C d."]);
        assert!(split_sentences("").is_empty());
        assert_eq!(
            split_sentences("Mr. Smith left. He ran."),
            ["Mr. Smith left.", "He ran."]
        );
    }

    #[test]
    fn sentence_edge_cases() {
        assert_eq!(split_sentences("It cost 1.5 million. Really?! Yes"), [
            "It cost 1.5 million.",
            "Really?!",
            "Yes"
        ]);
        assert_eq!(split_sentences("The U.S. grew.   "), ["The U.S. grew."]);
        assert!(split_sentences("   \n ").is_empty());
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(s in "[ a-zA-Z0-9.,!?$'()\\-]{0,40}") {
            let once = tokenize(&s);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn sentences_are_never_empty(s in "[ a-zA-Z.!?]{0,60}") {
            for sentence in split_sentences(&s) {
                prop_assert!(!sentence.trim().is_empty());
            }
        }
    }
}
