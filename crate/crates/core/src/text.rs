//! Text normalization helpers shared by retrieval, extraction and validation.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)[^\s<>]+").unwrap());

static EMOJI_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[\p{Extended_Pictographic}\p{Emoji_Modifier}\p{Regional_Indicator}\u{FE0F}\u{200D}\u{20E3}]")
        .unwrap()
});

static SPACES_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[ \t]+").unwrap());

/// Removes URLs and emoji, then tidies the whitespace left behind.
pub fn strip_urls_and_emoji(text: &str) -> String {
    let without_urls = URL_RE.replace_all(text, " ");
    let without_emoji = EMOJI_RE.replace_all(&without_urls, " ");
    without_emoji
        .lines()
        .map(|line| SPACES_RE.replace_all(line.trim(), " ").into_owned())
        .filter(|line| !line.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn contains_url(text: &str) -> bool {
    URL_RE.is_match(text)
}

/// URLs in `text` with trailing sentence punctuation trimmed off.
pub fn find_urls(text: &str) -> Vec<(Range<usize>, &str)> {
    URL_RE
        .find_iter(text)
        .filter_map(|m| {
            let trimmed = m.as_str().trim_end_matches(['.', ',', ';', ':', '!', '?', ')', ']', '"', '\'', '>', '}']);
            (!trimmed.is_empty()).then(|| (m.start()..m.start() + trimmed.len(), trimmed))
        })
        .collect()
}

pub fn contains_emoji(text: &str) -> bool {
    EMOJI_RE.is_match(text)
}

/// Cuts `text` to at most `max_chars` characters, ending at the last
/// whitespace boundary at or before the limit. Falls back to a hard cut when
/// the prefix has no whitespace.
pub fn truncate_at_whitespace(text: &str, max_chars: usize) -> &str {
    let Some((limit, _)) = text.char_indices().nth(max_chars) else {
        return text;
    };
    // `limit` is the byte offset of the first character past the cap.
    if text[limit..].starts_with(char::is_whitespace) {
        return text[..limit].trim_end();
    }
    match text[..limit].rfind(char::is_whitespace) {
        Some(cut) if !text[..cut].trim_end().is_empty() => text[..cut].trim_end(),
        _ => &text[..limit],
    }
}

fn fold_char(c: char) -> char {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{201A}' | '\u{2032}' => '\'',
        '\u{201C}' | '\u{201D}' | '\u{201E}' | '\u{2033}' => '"',
        '\u{2013}' | '\u{2014}' => '-',
        '\u{00A0}' => ' ',
        c => c,
    }
}

/// Normalized copy of `text` with a map from each normalized byte back to
/// the byte offset of the original character it came from.
struct Folded {
    text: String,
    origin: Vec<usize>,
}

fn fold(text: &str) -> Folded {
    let mut out = String::with_capacity(text.len());
    let mut origin = Vec::with_capacity(text.len());
    let mut pending_space: Option<usize> = None;
    for (offset, c) in text.char_indices() {
        let c = fold_char(c);
        if c.is_whitespace() {
            if !out.is_empty() && pending_space.is_none() {
                pending_space = Some(offset);
            }
            continue;
        }
        if let Some(space_at) = pending_space.take() {
            out.push(' ');
            origin.push(space_at);
        }
        let start = out.len();
        out.push(c);
        origin.extend(std::iter::repeat(offset).take(out.len() - start));
    }
    Folded { text: out, origin }
}

/// Finds `needle` in `haystack` ignoring whitespace differences and
/// typographic quote/dash variants. Returns the byte range of the match in
/// the original `haystack`.
pub fn find_normalized(haystack: &str, needle: &str) -> Option<Range<usize>> {
    let needle = fold(needle).text;
    if needle.is_empty() {
        return None;
    }
    let folded = fold(haystack);
    let at = folded.text.find(&needle)?;
    let end_folded = at + needle.len();
    let start = folded.origin[at];
    let last = folded.origin[end_folded - 1];
    let last_len = haystack[last..].chars().next().map_or(0, char::len_utf8);
    Some(start..last + last_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strips_urls_and_emoji() {
        let cleaned = strip_urls_and_emoji("Vaccines 💉 cause 😡 harm! https://t.co/abc123 see www.x.com/y");
        assert_eq!(cleaned, "Vaccines cause harm! see");
        assert!(!contains_url(&cleaned));
        assert!(!contains_emoji(&cleaned));
    }

    #[test]
    fn keeps_digits_and_hash() {
        // digits and '#' carry the Emoji property but are not pictographs
        assert_eq!(strip_urls_and_emoji("#EarthDay2023 in 3 days"), "#EarthDay2023 in 3 days");
    }

    #[test]
    fn flags_and_zwj_sequences_removed() {
        assert_eq!(strip_urls_and_emoji("US 🇺🇸 family 👨‍👩‍👧 ok"), "US family ok");
    }

    #[test]
    fn url_finder_trims_punctuation() {
        let found = find_urls("See (https://a.org/x). Also https://b.org/y, ok");
        let urls: Vec<&str> = found.iter().map(|(_, u)| *u).collect();
        assert_eq!(urls, ["https://a.org/x", "https://b.org/y"]);
    }

    #[test]
    fn truncation_short_text_untouched() {
        assert_eq!(truncate_at_whitespace("short text", 100), "short text");
    }

    #[test]
    fn truncation_lands_on_whitespace() {
        assert_eq!(truncate_at_whitespace("alpha beta gamma", 12), "alpha beta");
        assert_eq!(truncate_at_whitespace("alpha beta gamma", 10), "alpha beta");
        assert_eq!(truncate_at_whitespace("alphabetagamma", 5), "alpha");
    }

    #[test]
    fn truncation_counts_characters_not_bytes() {
        let text = "ééé ééé ééé";
        assert_eq!(truncate_at_whitespace(text, 8), "ééé ééé");
    }

    #[test]
    fn normalized_find_maps_back_to_original() {
        let page = "He said:  \u{201C}The  sky is\ngreen.\u{201D} Then left.";
        let range = find_normalized(page, "\"The sky is green.\"").unwrap();
        assert_eq!(&page[range], "\u{201C}The  sky is\ngreen.\u{201D}");
        assert!(find_normalized(page, "The sky is blue").is_none());
        assert!(find_normalized(page, "   ").is_none());
    }

    proptest! {
        #[test]
        fn truncation_respects_cap(text in "[a-z ]{0,200}", cap in 1usize..120) {
            let cut = truncate_at_whitespace(&text, cap);
            prop_assert!(cut.chars().count() <= cap);
            prop_assert!(text.starts_with(cut));
        }

        #[test]
        fn normalized_find_returns_substring(words in proptest::collection::vec("[a-zA-Z]{1,6}", 1..20), from in 0usize..20, len in 1usize..5) {
            let page = words.join("  \n ");
            let from = from % words.len();
            let to = (from + len).min(words.len());
            let needle = words[from..to].join(" ");
            let range = find_normalized(&page, &needle).unwrap();
            let slice = &page[range];
            prop_assert_eq!(fold(slice).text, fold(&needle).text);
        }
    }
}
