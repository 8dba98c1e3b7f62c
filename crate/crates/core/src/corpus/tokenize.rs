//! Whitespace + punctuation tokenizer.
//!
//! Evidence masks are word-level, so tokens must align 1:1 with the mask.
//! A whitespace-separated chunk is lowercased, then any leading and trailing
//! punctuation characters are split off as single-character tokens. Inner
//! punctuation (`don't`, `well-made`) stays attached.

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'
                | '\u{2019}'
                | '\u{201c}'
                | '\u{201d}'
                | '\u{2026}'
                | '\u{2013}'
                | '\u{2014}'
                | '\u{ab}'
                | '\u{bb}'
                | '\u{bf}'
                | '\u{a1}'
        )
}

/// Split `text` into lowercase tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lowered.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        while start < end && is_punct(chars[start]) {
            start += 1;
        }
        while end > start && is_punct(chars[end - 1]) {
            end -= 1;
        }
        tokens.extend(chars[..start].iter().map(|c| c.to_string()));
        if start < end {
            tokens.push(chars[start..end].iter().collect());
        }
        tokens.extend(chars[end..].iter().map(|c| c.to_string()));
    }
    tokens
}
