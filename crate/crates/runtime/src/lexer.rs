use crate::ast::Pos;
use crate::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Num(f64),
    Str(String),
    Ident(String),
    If,
    Elif,
    Else,
    While,
    For,
    In,
    And,
    Or,
    Not,
    True,
    False,
    Null,
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Assign,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Num(x) => format!("number {x}"),
            Tok::Str(_) => "string".into(),
            Tok::Ident(s) => format!("identifier {s}"),
            Tok::Eof => "end of input".into(),
            other => format!("'{}'", other.spelling()),
        }
    }

    pub fn spelling(&self) -> &'static str {
        match self {
            Tok::If => "if",
            Tok::Elif => "elif",
            Tok::Else => "else",
            Tok::While => "while",
            Tok::For => "for",
            Tok::In => "in",
            Tok::And => "and",
            Tok::Or => "or",
            Tok::Not => "not",
            Tok::True => "true",
            Tok::False => "false",
            Tok::Null => "null",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Assign => "=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Percent => "%",
            Tok::Eq => "==",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Num(_) | Tok::Str(_) | Tok::Ident(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
    /// A line break separates this token from the previous one.
    pub nl_before: bool,
}

fn keyword(word: &str) -> Option<Tok> {
    Some(match word {
        "if" => Tok::If,
        "elif" => Tok::Elif,
        "else" => Tok::Else,
        "while" => Tok::While,
        "for" => Tok::For,
        "in" => Tok::In,
        "and" => Tok::And,
        "or" => Tok::Or,
        "not" => Tok::Not,
        "true" => Tok::True,
        "false" => Tok::False,
        "null" => Tok::Null,
        _ => return None,
    })
}

pub fn is_keyword(word: &str) -> bool {
    keyword(word).is_some()
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut cur = Cursor {
        chars: src.chars().peekable(),
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    let mut nl = false;
    loop {
        match cur.peek() {
            Some('\n') => {
                nl = true;
                cur.bump();
                continue;
            }
            Some(c) if c.is_whitespace() => {
                cur.bump();
                continue;
            }
            Some('#') => {
                while cur.peek().is_some_and(|c| c != '\n') {
                    cur.bump();
                }
                continue;
            }
            _ => {}
        }
        let pos = cur.pos();
        let Some(c) = cur.bump() else {
            out.push(Token {
                tok: Tok::Eof,
                pos,
                nl_before: true,
            });
            return Ok(out);
        };
        let tok = match c {
            '0'..='9' => lex_number(&mut cur, c, pos)?,
            '"' => lex_string(&mut cur, pos)?,
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::from(c);
                while let Some(n) = cur.peek().filter(|n| n.is_ascii_alphanumeric() || *n == '_') {
                    word.push(n);
                    cur.bump();
                }
                keyword(&word).unwrap_or(Tok::Ident(word))
            }
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            ':' => Tok::Colon,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '%' => Tok::Percent,
            '=' | '!' | '<' | '>' => {
                let eq = cur.peek() == Some('=');
                if eq {
                    cur.bump();
                }
                match (c, eq) {
                    ('=', false) => Tok::Assign,
                    ('=', true) => Tok::Eq,
                    ('!', true) => Tok::Ne,
                    ('<', false) => Tok::Lt,
                    ('<', true) => Tok::Le,
                    ('>', false) => Tok::Gt,
                    ('>', true) => Tok::Ge,
                    _ => return Err(SyntaxError::new(pos, "'!=' (use 'not' for negation)")),
                }
            }
            other => return Err(SyntaxError::new(pos, format!("a token, found {other:?}"))),
        };
        out.push(Token {
            tok,
            pos,
            nl_before: std::mem::take(&mut nl) || out.is_empty(),
        });
    }
}

fn lex_number(cur: &mut Cursor<'_>, first: char, pos: Pos) -> Result<Tok, SyntaxError> {
    let mut text = String::from(first);
    let digits = |cur: &mut Cursor<'_>, text: &mut String| {
        let mut any = false;
        while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
            text.push(d);
            cur.bump();
            any = true;
        }
        any
    };
    digits(cur, &mut text);
    if cur.peek() == Some('.') {
        text.push('.');
        cur.bump();
        if !digits(cur, &mut text) {
            return Err(SyntaxError::new(cur.pos(), "digits after decimal point"));
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        text.push('e');
        cur.bump();
        if let Some(s) = cur.peek().filter(|c| *c == '+' || *c == '-') {
            text.push(s);
            cur.bump();
        }
        if !digits(cur, &mut text) {
            return Err(SyntaxError::new(cur.pos(), "exponent digits"));
        }
    }
    if cur.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(SyntaxError::new(cur.pos(), "a separator after number"));
    }
    match text.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Tok::Num(x)),
        _ => Err(SyntaxError::new(pos, "a finite number literal")),
    }
}

fn lex_string(cur: &mut Cursor<'_>, pos: Pos) -> Result<Tok, SyntaxError> {
    let mut s = String::new();
    loop {
        match cur.bump() {
            None | Some('\n') => return Err(SyntaxError::new(pos, "closing '\"'")),
            Some('"') => return Ok(Tok::Str(s)),
            Some('\\') => {
                let esc_pos = cur.pos();
                match cur.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    _ => return Err(SyntaxError::new(esc_pos, "an escape (\\\" \\\\ \\n \\t \\r)")),
                }
            }
            Some(c) => s.push(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(
            toks("x = 1.5e3 # note\nif a <= \"b\\n\" {}"),
            vec![
                Tok::Ident("x".into()),
                Tok::Assign,
                Tok::Num(1500.0),
                Tok::If,
                Tok::Ident("a".into()),
                Tok::Le,
                Tok::Str("b\n".into()),
                Tok::LBrace,
                Tok::RBrace,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn newline_flags() {
        let t = tokenize("a\nb c").unwrap();
        assert!(t[0].nl_before);
        assert!(t[1].nl_before);
        assert!(!t[2].nl_before);
        assert_eq!((t[1].pos.line, t[1].pos.col), (2, 1));
    }

    #[test]
    fn bad_literals() {
        assert!(tokenize("1e999").is_err());
        assert!(tokenize("\"open").is_err());
        assert!(tokenize("1.").is_err());
        assert!(tokenize("12abc").is_err());
        assert!(tokenize("a ! b").is_err());
        assert!(tokenize("@").is_err());
    }
}
