//! Line tokenizer shared by code lines and log messages.
//!
//! A token is one of:
//! * a maximal run of identifier characters (letters, digits, `_`) starting
//!   with a letter or `_`,
//! * a maximal run of ASCII/Unicode digits,
//! * a multi-glyph operator from [`MULTI_GLYPH_OPERATORS`],
//! * any other single non-whitespace character.

/// Two-character operators that are kept as one token.
pub const MULTI_GLYPH_OPERATORS: [&str; 11] =
    ["==", "!=", "<=", ">=", "->", "&&", "||", "++", "--", "<<", ">>"];

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Tokenize a code line. Case is preserved.
pub fn tokenize_line(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if is_ident_start(c) {
            while i < chars.len() && is_ident_continue(chars[i]) {
                i += 1;
            }
        } else if c.is_numeric() {
            while i < chars.len() && chars[i].is_numeric() {
                i += 1;
            }
        } else if i + 1 < chars.len()
            && MULTI_GLYPH_OPERATORS
                .iter()
                .any(|op| op.starts_with(c) && op.ends_with(chars[i + 1]))
        {
            i += 2;
        } else {
            i += 1;
        }
        tokens.push(chars[start..i].iter().collect());
    }
    tokens
}

/// Tokenize a log-message line; tokens are lowercased.
pub fn tokenize_message(text: &str) -> Vec<String> {
    tokenize_line(text)
        .into_iter()
        .map(|t| t.to_lowercase())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize_line(s)
    }

    #[test]
    fn operators_and_parens() {
        assert_eq!(toks("if (x==1)"), ["if", "(", "x", "==", "1", ")"]);
        assert_eq!(toks("return 0;"), ["return", "0", ";"]);
        assert_eq!(toks("a->b"), ["a", "->", "b"]);
    }

    #[test]
    fn every_multi_glyph_operator_is_one_token() {
        for op in MULTI_GLYPH_OPERATORS {
            assert_eq!(toks(&format!("a{op}b")), ["a", op, "b"], "{op}");
        }
        // no spurious pairings of unrelated glyphs
        assert_eq!(toks("=>"), ["=", ">"]);
        assert_eq!(toks("+-"), ["+", "-"]);
    }

    #[test]
    fn identifiers_and_digits() {
        assert_eq!(toks("foo_bar1 = 42x"), ["foo_bar1", "=", "42", "x"]);
        assert_eq!(toks("1.5e3"), ["1", ".", "5", "e3"]);
        assert_eq!(toks("_private"), ["_private"]);
    }

    #[test]
    fn message_tokens_are_lowercased() {
        assert_eq!(tokenize_message("Fix NULL deref"), ["fix", "null", "deref"]);
        // code tokens keep their case
        assert_eq!(toks("NULL"), ["NULL"]);
    }

    proptest! {
        #[test]
        fn tokens_reconstruct_non_whitespace(s in "[ -~\t]{0,40}") {
            let tokens = tokenize_line(&s);
            prop_assert!(tokens.iter().all(|t| !t.is_empty()));
            let joined: String = tokens.concat();
            let expected: String = s.chars().filter(|c| !c.is_whitespace()).collect();
            prop_assert_eq!(joined, expected);
        }

        #[test]
        fn retokenizing_space_joined_tokens_is_identity(s in "[ -~]{0,40}") {
            let tokens = tokenize_line(&s);
            prop_assert_eq!(tokenize_line(&tokens.join(" ")), tokens);
        }
    }
}
