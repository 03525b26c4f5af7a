use super::{ParseError, Span};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(String),
    LParen,
    RParen,
    Comma,
    Colon,
    Star,
    Amp,
    Tilde,
    Bang,
    Eq,
    Newline,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Number(s) => format!("number '{s}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::Colon => "':'".into(),
            Tok::Star => "'*'".into(),
            Tok::Amp => "'&'".into(),
            Tok::Tilde => "'~'".into(),
            Tok::Bang => "'!'".into(),
            Tok::Eq => "'='".into(),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    while i < chars.len() {
        let c = chars[i];
        let start = Span { line, col, len: 1 };
        match c {
            '\n' => {
                out.push(Token {
                    tok: Tok::Newline,
                    span: start,
                });
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
                continue;
            }
            _ => {}
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            ':' => Some(Tok::Colon),
            '*' => Some(Tok::Star),
            '&' => Some(Tok::Amp),
            '~' => Some(Tok::Tilde),
            '!' => Some(Tok::Bang),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, span: start });
            i += 1;
            col += 1;
            continue;
        }
        let begin = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[begin..i].iter().collect();
            let len = i - begin;
            out.push(Token {
                tok: Tok::Ident(s),
                span: Span { line, col, len },
            });
            col += len;
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || ((c == '-' || c == '+' || c == '.')
                && chars
                    .get(i + 1)
                    .is_some_and(|n| n.is_ascii_digit() || *n == '.'));
        if starts_number {
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = chars[begin..i].iter().collect();
            let len = i - begin;
            if s.parse::<f64>().is_err() {
                return Err(ParseError::new(
                    Span { line, col, len },
                    format!("malformed number '{s}'"),
                    vec![],
                ));
            }
            out.push(Token {
                tok: Tok::Number(s),
                span: Span { line, col, len },
            });
            col += len;
            continue;
        }
        return Err(ParseError::new(
            start,
            format!("unexpected character {c:?}"),
            vec![],
        ));
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, col, len: 0 },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Tok> {
        tokenize(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_signs_and_exponents() {
        assert_eq!(
            kinds("-4.5 * True # note\n1e-3"),
            vec![
                Tok::Number("-4.5".into()),
                Tok::Star,
                Tok::Ident("True".into()),
                Tok::Newline,
                Tok::Number("1e-3".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn spans_track_lines_and_columns() {
        let toks = tokenize("a\n  ~B(x)").unwrap();
        let tilde = &toks[2];
        assert_eq!(tilde.tok, Tok::Tilde);
        assert_eq!((tilde.span.line, tilde.span.col), (2, 3));
    }

    #[test]
    fn bad_character_reports_location() {
        let err = tokenize("population u\n  $").unwrap_err();
        assert_eq!((err.line, err.col), (2, 3));
    }
}
