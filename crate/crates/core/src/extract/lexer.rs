//! Tolerant C++ tokenizer. Comments and preprocessor lines are dropped;
//! string literals are decoded far enough to recover topic names.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Str,
    Number,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Identifier or punctuation text; for strings, the literal's content.
    pub text: String,
    pub line: usize,
}

impl Token {
    pub fn is(&self, punct: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == punct
    }

    pub fn is_ident(&self, name: &str) -> bool {
        self.kind == TokenKind::Ident && self.text == name
    }
}

pub fn tokenize(src: &str) -> Vec<Token> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut at_line_start = true;

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            at_line_start = true;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' && at_line_start {
            // preprocessor directive, honoring backslash continuations
            while i < bytes.len() && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
                    line += 1;
                    i += 1;
                }
                i += 1;
            }
            continue;
        }
        at_line_start = false;

        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'*') {
            i += 2;
            while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                if bytes[i] == b'\n' {
                    line += 1;
                }
                i += 1;
            }
            i = (i + 2).min(bytes.len());
            continue;
        }

        // raw string R"delim( ... )delim"
        if c == b'R' && bytes.get(i + 1) == Some(&b'"') {
            let start_line = line;
            let open = i + 2;
            let paren = src[open..].find('(').map(|p| open + p);
            if let Some(paren) = paren {
                let delim = &src[open..paren];
                let terminator = format!("){delim}\"");
                if let Some(end) = src[paren + 1..].find(&terminator) {
                    let content = &src[paren + 1..paren + 1 + end];
                    line += content.matches('\n').count();
                    out.push(Token {
                        kind: TokenKind::Str,
                        text: content.to_string(),
                        line: start_line,
                    });
                    i = paren + 1 + end + terminator.len();
                    continue;
                }
            }
        }

        if c == b'"' || c == b'\'' {
            let quote = c;
            let start_line = line;
            let mut text = String::new();
            i += 1;
            while i < bytes.len() && bytes[i] != quote {
                if bytes[i] == b'\\' && i + 1 < bytes.len() {
                    let escaped = bytes[i + 1];
                    text.push(match escaped {
                        b'n' => '\n',
                        b't' => '\t',
                        other => other as char,
                    });
                    i += 2;
                    continue;
                }
                if bytes[i] == b'\n' {
                    // unterminated literal; stop at end of line
                    break;
                }
                let ch = src[i..].chars().next().unwrap_or('?');
                text.push(ch);
                i += ch.len_utf8();
            }
            i += 1;
            if quote == b'"' {
                out.push(Token {
                    kind: TokenKind::Str,
                    text,
                    line: start_line,
                });
            } else {
                out.push(Token {
                    kind: TokenKind::Number,
                    text,
                    line: start_line,
                });
            }
            continue;
        }

        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            // string prefixes: u8"..", L"..", u"..", U".."
            if matches!(word, "u8" | "L" | "u" | "U") && bytes.get(i) == Some(&b'"') {
                continue;
            }
            out.push(Token {
                kind: TokenKind::Ident,
                text: word.to_string(),
                line,
            });
            continue;
        }

        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'.' || bytes[i] == b'\'') {
                i += 1;
            }
            out.push(Token {
                kind: TokenKind::Number,
                text: src[start..i].to_string(),
                line,
            });
            continue;
        }

        let two = src.get(i..i + 2);
        if matches!(two, Some("::") | Some("->")) {
            out.push(Token {
                kind: TokenKind::Punct,
                text: two.unwrap().to_string(),
                line,
            });
            i += 2;
            continue;
        }
        let ch = src[i..].chars().next().unwrap_or('?');
        out.push(Token {
            kind: TokenKind::Punct,
            text: ch.to_string(),
            line,
        });
        i += ch.len_utf8();
    }
    out
}

/// Index just past the bracket matching the opener at `open`.
/// Returns `tokens.len()` when unbalanced.
pub fn skip_balanced(tokens: &[Token], open: usize) -> usize {
    let (o, c) = match tokens[open].text.as_str() {
        "(" => ("(", ")"),
        "{" => ("{", "}"),
        "[" => ("[", "]"),
        "<" => ("<", ">"),
        _ => return open + 1,
    };
    let mut depth = 0usize;
    let mut i = open;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.is(o) {
            depth += 1;
        } else if t.is(c) {
            depth -= 1;
            if depth == 0 {
                return i + 1;
            }
        } else if o == "<" && (t.is(";") || t.is("{") || t.is("}")) {
            // not a template argument list after all
            return open + 1;
        }
        i += 1;
    }
    tokens.len()
}

/// Splits `tokens[start..end]` on commas at nesting depth zero.
pub fn split_args(tokens: &[Token], start: usize, end: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut arg_start = start;
    for (i, t) in tokens.iter().enumerate().take(end).skip(start) {
        if t.kind != TokenKind::Punct {
            continue;
        }
        match t.text.as_str() {
            "(" | "{" | "[" => depth += 1,
            ")" | "}" | "]" => depth -= 1,
            "," if depth == 0 => {
                out.push((arg_start, i));
                arg_start = i + 1;
            }
            _ => {}
        }
    }
    if arg_start < end {
        out.push((arg_start, end));
    }
    out
}

/// Joins identifier and `::` tokens into a qualified name, dropping a
/// leading `::` and any template arguments.
pub fn qualified_name(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.is("<") {
            i = skip_balanced(tokens, i);
            continue;
        }
        match t.kind {
            TokenKind::Ident => out.push_str(&t.text),
            TokenKind::Punct if t.text == "::" && !out.is_empty() => out.push_str("::"),
            _ => {}
        }
        i += 1;
    }
    out
}
