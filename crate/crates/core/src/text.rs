//! Character case helpers shared by the truecaser, the corpus tools and the
//! metrics.
//!
//! Case mapping is restricted to one-to-one mappings: a character whose
//! lowercase (or uppercase) form is not exactly one character is left
//! unchanged, so lowercasing never changes the character count of a string.

/// Simple lowercase mapping of a single character.
pub fn lower_char(c: char) -> char {
    let mut it = c.to_lowercase();
    match (it.next(), it.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

/// Simple uppercase mapping of a single character.
pub fn upper_char(c: char) -> char {
    let mut it = c.to_uppercase();
    match (it.next(), it.next()) {
        (Some(u), None) => u,
        _ => c,
    }
}

/// Whether `c` is lowercase-able and has a distinct uppercase form.
pub fn has_upper_form(c: char) -> bool {
    upper_char(c) != c
}

/// Whether `c` would be lowered by [`lower_char`]; i.e. it is an uppercase
/// letter with a simple mapping.
pub fn is_upper(c: char) -> bool {
    c.is_uppercase()
}

/// Lowercases `s` character by character. The result has the same number of
/// characters as the input.
pub fn lowercase(s: &str) -> String {
    s.chars().map(lower_char).collect()
}

/// Number of characters whose lowercase form is not a single character and
/// that [`lowercase`] therefore passed through.
pub fn count_unmappable(s: &str) -> usize {
    s.chars()
        .filter(|&c| c.is_uppercase() && lower_char(c) == c)
        .count()
}

pub fn has_uppercase(s: &str) -> bool {
    s.chars().any(char::is_uppercase)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercase_preserves_length() {
        for s in ["Alan", "İstanbul", "ẞtraße", "ΣΑΣ", "1234 !?"] {
            assert_eq!(lowercase(s).chars().count(), s.chars().count(), "{s}");
        }
    }

    #[test]
    fn multi_char_mappings_pass_through() {
        // 'İ' lowercases to "i̇" (two code points)
        assert_eq!(lower_char('İ'), 'İ');
        assert_eq!(count_unmappable("İzmir"), 1);
        assert_eq!(lowercase("Alan"), "alan");
    }

    #[test]
    fn digits_have_no_case() {
        assert!(!has_upper_form('4'));
        assert!(!has_upper_form(' '));
        assert!(has_upper_form('a'));
        assert!(!has_upper_form('A'));
    }
}
