use crate::ast::{BinOp, Expr, Pos, Program, Stmt, Target, UnOp};
use crate::lexer::{tokenize, Tok, Token};
use crate::SyntaxError;

const MAX_NESTING: usize = 100;

/// Parse a complete program.
pub fn parse(source: &str) -> Result<Program, SyntaxError> {
    let tokens = tokenize(source)?;
    let mut p = Parser {
        tokens,
        at: 0,
        grouping: 0,
        depth: 0,
    };
    let mut body = Vec::new();
    while p.peek() != &Tok::Eof {
        body.push(p.stmt()?);
    }
    Ok(Program { body })
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    /// Open `(`, `[` or map-literal `{` count; line breaks are insignificant inside.
    grouping: usize,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn token(&self) -> &Token {
        &self.tokens[self.at]
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: impl Into<String>) -> SyntaxError {
        let found = self.peek().describe();
        SyntaxError::new(self.pos(), format!("{}, found {found}", expected.into()))
    }

    fn expect(&mut self, tok: Tok) -> Result<Token, SyntaxError> {
        if *self.peek() == tok {
            Ok(self.advance())
        } else {
            Err(self.error(format!("'{}'", tok.spelling())))
        }
    }

    /// Whether the current token may continue the expression on the left.
    fn continues(&self) -> bool {
        self.grouping > 0 || !self.token().nl_before
    }

    fn enter(&mut self) -> Result<(), SyntaxError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(SyntaxError::new(self.pos(), "shallower nesting"));
        }
        Ok(())
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        self.enter()?;
        let s = self.stmt_inner();
        self.depth -= 1;
        s
    }

    fn stmt_inner(&mut self) -> Result<Stmt, SyntaxError> {
        let pos = self.pos();
        match self.peek() {
            Tok::If => {
                self.advance();
                let mut branches = vec![(self.expr()?, self.block()?)];
                let mut otherwise = None;
                loop {
                    match self.peek() {
                        Tok::Elif => {
                            self.advance();
                            branches.push((self.expr()?, self.block()?));
                        }
                        Tok::Else => {
                            self.advance();
                            otherwise = Some(self.block()?);
                            break;
                        }
                        _ => break,
                    }
                }
                Ok(Stmt::If {
                    branches,
                    otherwise,
                    pos,
                })
            }
            Tok::While => {
                self.advance();
                let cond = self.expr()?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body, pos })
            }
            Tok::For => {
                self.advance();
                let var = match self.advance().tok {
                    Tok::Ident(name) if name != "STATE" && name != "SIGNAL" => name,
                    _ => return Err(SyntaxError::new(pos, "a loop variable name after 'for'")),
                };
                self.expect(Tok::In)?;
                let iter = self.expr()?;
                let body = self.block()?;
                Ok(Stmt::For { var, iter, body, pos })
            }
            _ => {
                let lhs = self.expr()?;
                if *self.peek() == Tok::Assign && !self.token().nl_before {
                    let eq_pos = self.pos();
                    self.advance();
                    let target = to_target(lhs).ok_or_else(|| {
                        SyntaxError::new(eq_pos, "an assignable target (name or indexed name) before '='")
                    })?;
                    let value = self.expr()?;
                    Ok(Stmt::Assign { target, value, pos })
                } else {
                    Ok(Stmt::Expr(lhs, pos))
                }
            }
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect(Tok::LBrace)?;
        let saved = std::mem::take(&mut self.grouping);
        let mut body = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error("'}'"));
            }
            body.push(self.stmt()?);
        }
        self.advance();
        self.grouping = saved;
        Ok(body)
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.enter()?;
        let e = self.or();
        self.depth -= 1;
        e
    }

    fn or(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.and()?;
        let mut chain = 0;
        while *self.peek() == Tok::Or && self.continues() {
            self.enter()?;
            chain += 1;
            let pos = self.advance().pos;
            let rhs = self.and()?;
            lhs = binary(BinOp::Or, lhs, rhs, pos);
        }
        self.depth -= chain;
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.not()?;
        let mut chain = 0;
        while *self.peek() == Tok::And && self.continues() {
            self.enter()?;
            chain += 1;
            let pos = self.advance().pos;
            let rhs = self.not()?;
            lhs = binary(BinOp::And, lhs, rhs, pos);
        }
        self.depth -= chain;
        Ok(lhs)
    }

    fn not(&mut self) -> Result<Expr, SyntaxError> {
        if *self.peek() == Tok::Not {
            let pos = self.advance().pos;
            self.enter()?;
            let inner = self.not();
            self.depth -= 1;
            return Ok(Expr::Unary {
                op: UnOp::Not,
                expr: Box::new(inner?),
                pos,
            });
        }
        self.cmp()
    }

    fn cmp(&mut self) -> Result<Expr, SyntaxError> {
        let lhs = self.add()?;
        let op = match self.peek() {
            Tok::Eq => BinOp::Eq,
            Tok::Ne => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            _ => return Ok(lhs),
        };
        if !self.continues() {
            return Ok(lhs);
        }
        let pos = self.advance().pos;
        let rhs = self.add()?;
        if matches!(self.peek(), Tok::Eq | Tok::Ne | Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge) && self.continues() {
            return Err(self.error("no chained comparison (use 'and')"));
        }
        Ok(binary(op, lhs, rhs, pos))
    }

    fn add(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.mul()?;
        let mut chain = 0;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            if !self.continues() {
                break;
            }
            self.enter()?;
            chain += 1;
            let pos = self.advance().pos;
            let rhs = self.mul()?;
            lhs = binary(op, lhs, rhs, pos);
        }
        self.depth -= chain;
        Ok(lhs)
    }

    fn mul(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        let mut chain = 0;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => break,
            };
            if !self.continues() {
                break;
            }
            self.enter()?;
            chain += 1;
            let pos = self.advance().pos;
            let rhs = self.unary()?;
            lhs = binary(op, lhs, rhs, pos);
        }
        self.depth -= chain;
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if *self.peek() == Tok::Minus {
            let pos = self.advance().pos;
            self.enter()?;
            let inner = self.unary();
            self.depth -= 1;
            return Ok(Expr::Unary {
                op: UnOp::Neg,
                expr: Box::new(inner?),
                pos,
            });
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.atom()?;
        let mut chain = 0;
        loop {
            if matches!(self.peek(), Tok::LBracket | Tok::LParen) && self.continues() {
                self.enter()?;
                chain += 1;
            }
            match self.peek() {
                Tok::LBracket if self.continues() => {
                    let pos = self.advance().pos;
                    self.grouping += 1;
                    let index = self.expr()?;
                    self.expect(Tok::RBracket)?;
                    self.grouping -= 1;
                    e = Expr::Index {
                        target: Box::new(e),
                        index: Box::new(index),
                        pos,
                    };
                }
                Tok::LParen if self.continues() => {
                    let name = match &e {
                        Expr::Ident(name, _) if name != "STATE" && name != "SIGNAL" => name.clone(),
                        _ => return Err(self.error("an operator (only builtin names can be called)")),
                    };
                    let pos = e.pos().unwrap_or_default();
                    self.advance();
                    self.grouping += 1;
                    let args = self.comma_list(Tok::RParen)?;
                    self.grouping -= 1;
                    e = Expr::Call { name, args, pos };
                }
                _ => {
                    self.depth -= chain;
                    return Ok(e);
                }
            }
        }
    }

    fn comma_list(&mut self, close: Tok) -> Result<Vec<Expr>, SyntaxError> {
        let mut items = Vec::new();
        if *self.peek() == close {
            self.advance();
            return Ok(items);
        }
        loop {
            items.push(self.expr()?);
            match self.peek() {
                Tok::Comma => {
                    self.advance();
                }
                t if *t == close => {
                    self.advance();
                    return Ok(items);
                }
                _ => return Err(self.error(format!("',' or '{}'", close.spelling()))),
            }
        }
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let tok = self.token().clone();
        let e = match tok.tok {
            Tok::Num(x) => Expr::Num(x),
            Tok::Str(s) => Expr::Str(s),
            Tok::True => Expr::Bool(true),
            Tok::False => Expr::Bool(false),
            Tok::Null => Expr::Null,
            Tok::Ident(name) => Expr::Ident(name, tok.pos),
            Tok::LBracket => {
                self.advance();
                self.grouping += 1;
                let items = self.comma_list(Tok::RBracket)?;
                self.grouping -= 1;
                return Ok(Expr::List(items));
            }
            Tok::LBrace => {
                self.advance();
                self.grouping += 1;
                let entries = self.map_entries()?;
                self.grouping -= 1;
                return Ok(Expr::Map(entries));
            }
            Tok::LParen => {
                self.advance();
                self.grouping += 1;
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                self.grouping -= 1;
                return Ok(inner);
            }
            _ => return Err(self.error("an expression")),
        };
        self.advance();
        Ok(e)
    }

    fn map_entries(&mut self) -> Result<Vec<(String, Expr)>, SyntaxError> {
        let mut entries = Vec::new();
        if *self.peek() == Tok::RBrace {
            self.advance();
            return Ok(entries);
        }
        loop {
            let key = match self.peek() {
                Tok::Str(s) => s.clone(),
                _ => return Err(self.error("a string key")),
            };
            self.advance();
            self.expect(Tok::Colon)?;
            entries.push((key, self.expr()?));
            match self.peek() {
                Tok::Comma => {
                    self.advance();
                }
                Tok::RBrace => {
                    self.advance();
                    return Ok(entries);
                }
                _ => return Err(self.error("',' or '}'")),
            }
        }
    }
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr, pos: Pos) -> Expr {
    Expr::Binary {
        op,
        lhs: Box::new(lhs),
        rhs: Box::new(rhs),
        pos,
    }
}

fn to_target(e: Expr) -> Option<Target> {
    let mut path = Vec::new();
    let mut cur = e;
    loop {
        match cur {
            Expr::Index { target, index, .. } => {
                path.push(*index);
                cur = *target;
            }
            Expr::Ident(name, _) => {
                path.reverse();
                return match (name.as_str(), path.is_empty()) {
                    ("SIGNAL", true) => Some(Target::Signal),
                    ("SIGNAL", false) | ("STATE", true) => None,
                    (_, true) => Some(Target::Var(name)),
                    (_, false) => Some(Target::Index { root: name, path }),
                };
            }
            _ => return None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_assignment() {
        let p = parse("SIGNAL = \"ok\"").unwrap();
        assert!(matches!(&p.body[0], Stmt::Assign { target: Target::Signal, value: Expr::Str(s), .. } if s == "ok"));
    }

    #[test]
    fn dangling_operator_is_line_one_error() {
        let err = parse("x = 1 +").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn statements_share_a_line() {
        let p = parse("STATE[\"a\"] = 2  SIGNAL = \"done\"").unwrap();
        assert_eq!(p.body.len(), 2);
    }

    #[test]
    fn newline_ends_expression_outside_brackets() {
        let p = parse("a = b\n-c\n[1]").unwrap();
        assert_eq!(p.body.len(), 3);
        let p = parse("a = (b\n- c)\nx = [1,\n2]").unwrap();
        assert_eq!(p.body.len(), 2);
    }

    #[test]
    fn precedence() {
        let p = parse("x = 1 + 2 * 3 == 7 and not false or null").unwrap();
        assert_eq!(p.to_string(), "x = 1.0 + 2.0 * 3.0 == 7.0 and not false or null\n");
    }

    #[test]
    fn invalid_targets() {
        assert!(parse("STATE = 1").is_err());
        assert!(parse("SIGNAL[0] = 1").is_err());
        assert!(parse("f(x) = 1").is_err());
        assert!(parse("1 = 2").is_err());
        assert!(parse("a < b < c").is_err());
        assert!(parse("x[0](1)").is_err());
    }

    #[test]
    fn errors_carry_position() {
        let err = parse("a = 1\nif a {\n  b = ]\n}").unwrap_err();
        assert_eq!((err.line, err.col), (3, 7));
    }

    #[test]
    fn deep_nesting_is_a_syntax_error() {
        let src = format!("x = {}1{}", "(".repeat(5000), ")".repeat(5000));
        assert!(parse(&src).is_err());
        let src = format!("x = {}1", "-".repeat(5000));
        assert!(parse(&src).is_err());
        let src = format!("x = 1{}", " + 1".repeat(5000));
        assert!(parse(&src).is_err());
        let src = format!("x = a{}", "[0]".repeat(5000));
        assert!(parse(&src).is_err());
        let src = format!("x = 1{}", " + 1".repeat(50));
        assert!(parse(&src).is_ok());
    }

    #[test]
    fn round_trip_through_pretty_printer() {
        let src = r#"
# scan each candidate
results = []
for f in STATE["f_list"] {
    if f > 5e9 and not (f == 6e9) {
        results = results + [{"f": f, "lw": (f / 1e4) * -2}]
    } elif f < 0 { print("odd") } else {
        results[0]["n"] = -(1 - 2) % 3
    }
}
while len(results) < 3 { results = results + [null] }
STATE["out"] = results
SIGNAL = "Fitted " + str(len(results))
"#;
        let p = parse(src).unwrap();
        let printed = p.to_string();
        assert_eq!(parse(&printed).unwrap(), p);
        assert_eq!(parse(&printed).unwrap().to_string(), printed);
    }
}
