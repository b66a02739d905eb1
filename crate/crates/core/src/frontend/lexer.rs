use super::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Name(String),
    Num(f64),
    Str(String),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

const KEYWORDS: &[&str] = &[
    "and", "break", "do", "else", "elseif", "end", "false", "for", "function", "goto", "if", "in",
    "local", "nil", "not", "or", "repeat", "return", "then", "true", "until", "while",
];

// Longest symbols first.
const SYMBOLS: &[&str] = &[
    "...", "==", "~=", "<=", ">=", "..", "::", "+", "-", "*", "/", "%", "^", "#", "<", ">", "=",
    "(", ")", "{", "}", "[", "]", ";", ":", ",", ".",
];

pub fn tokenize(src: &str, origin: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    let mut out = Vec::new();
    let err = |line, col, msg: String| SyntaxError { origin: origin.to_string(), line, col, message: msg };

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            bump!();
            bump!();
            if chars.get(i) == Some(&'[') && chars.get(i + 1) == Some(&'[') {
                let (l0, c0) = (line, col);
                while i < chars.len() && !(chars[i] == ']' && chars.get(i + 1) == Some(&']')) {
                    bump!();
                }
                if i >= chars.len() {
                    return Err(err(l0, c0, "unfinished long comment".into()));
                }
                bump!();
                bump!();
            } else {
                while i < chars.len() && chars[i] != '\n' {
                    bump!();
                }
            }
            continue;
        }
        let (tl, tc) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Name(word),
            };
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            if c == '0' && matches!(chars.get(i + 1), Some('x' | 'X')) {
                bump!();
                bump!();
                while i < chars.len() && chars[i].is_ascii_hexdigit() {
                    bump!();
                }
                let text: String = chars[start + 2..i].iter().collect();
                let n = u64::from_str_radix(&text, 16)
                    .map_err(|_| err(tl, tc, "malformed number".into()))?;
                out.push(Token { tok: Tok::Num(n as f64), line: tl, col: tc });
                continue;
            }
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                bump!();
            }
            if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                bump!();
                if i < chars.len() && matches!(chars[i], '+' | '-') {
                    bump!();
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            let text: String = chars[start..i].iter().collect();
            let n: f64 = text.parse().map_err(|_| err(tl, tc, format!("malformed number '{text}'")))?;
            out.push(Token { tok: Tok::Num(n), line: tl, col: tc });
            continue;
        }
        if c == '"' || c == '\'' {
            bump!();
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(tl, tc, "unfinished string".into())),
                    Some(&q) if q == c => {
                        bump!();
                        break;
                    }
                    Some('\\') => {
                        let (el, ec) = (line, col);
                        bump!();
                        let e = match chars.get(i) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('\\') => '\\',
                            Some('"') => '"',
                            Some('\'') => '\'',
                            _ => return Err(err(el, ec, "invalid escape sequence".into())),
                        };
                        s.push(e);
                        bump!();
                    }
                    Some(&ch) => {
                        s.push(ch);
                        bump!();
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
            continue;
        }
        if c == '[' && matches!(chars.get(i + 1), Some('[' | '=')) {
            return Err(err(tl, tc, "unsupported construct: long string".into()));
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                for _ in 0..s.len() {
                    bump!();
                }
                out.push(Token { tok: Tok::Sym(s), line: tl, col: tc });
            }
            None => return Err(err(tl, tc, format!("unexpected character '{c}'"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
