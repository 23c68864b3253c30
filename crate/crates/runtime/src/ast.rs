use std::fmt::{self, Write};

use crate::value::quote;

/// Source position. Positions never take part in AST equality so that a
/// pretty-printed program compares equal to its original.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl Pos {
    pub fn new(line: usize, col: usize) -> Self {
        Self { line, col }
    }
}

impl PartialEq for Pos {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "or",
            BinOp::And => "and",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    fn prec(self) -> u8 {
        match self {
            BinOp::Or => OR,
            BinOp::And => AND,
            BinOp::Add | BinOp::Sub => ADD,
            BinOp::Mul | BinOp::Div | BinOp::Rem => MUL,
            _ => CMP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Str(String),
    Bool(bool),
    Null,
    Ident(String, Pos),
    List(Vec<Expr>),
    Map(Vec<(String, Expr)>),
    Index {
        target: Box<Expr>,
        index: Box<Expr>,
        pos: Pos,
    },
    Call {
        name: String,
        args: Vec<Expr>,
        pos: Pos,
    },
    Unary {
        op: UnOp,
        expr: Box<Expr>,
        pos: Pos,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
        pos: Pos,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Var(String),
    Signal,
    /// `root[i][j]...`; `root` may be `STATE`.
    Index { root: String, path: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign {
        target: Target,
        value: Expr,
        pos: Pos,
    },
    Expr(Expr, Pos),
    If {
        branches: Vec<(Expr, Vec<Stmt>)>,
        otherwise: Option<Vec<Stmt>>,
        pos: Pos,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
        pos: Pos,
    },
    For {
        var: String,
        iter: Expr,
        body: Vec<Stmt>,
        pos: Pos,
    },
}

impl Stmt {
    pub fn pos(&self) -> Pos {
        match self {
            Stmt::Assign { pos, .. }
            | Stmt::Expr(_, pos)
            | Stmt::If { pos, .. }
            | Stmt::While { pos, .. }
            | Stmt::For { pos, .. } => *pos,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub body: Vec<Stmt>,
}

const OR: u8 = 1;
const AND: u8 = 2;
const NOT: u8 = 3;
const CMP: u8 = 4;
const ADD: u8 = 5;
const MUL: u8 = 6;
const NEG: u8 = 7;
const POSTFIX: u8 = 8;
const ATOM: u8 = 9;

impl Expr {
    fn prec(&self) -> u8 {
        match self {
            Expr::Binary { op, .. } => op.prec(),
            Expr::Unary { op: UnOp::Not, .. } => NOT,
            Expr::Unary { op: UnOp::Neg, .. } => NEG,
            Expr::Index { .. } | Expr::Call { .. } => POSTFIX,
            _ => ATOM,
        }
    }

    pub fn pos(&self) -> Option<Pos> {
        match self {
            Expr::Ident(_, pos)
            | Expr::Index { pos, .. }
            | Expr::Call { pos, .. }
            | Expr::Unary { pos, .. }
            | Expr::Binary { pos, .. } => Some(*pos),
            _ => None,
        }
    }
}

fn write_at(out: &mut String, e: &Expr, min: u8) {
    if e.prec() < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_list(out: &mut String, items: &[Expr]) {
    for (i, e) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Num(x) => {
            let _ = write!(out, "{x:?}");
        }
        Expr::Str(s) => out.push_str(&quote(s)),
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Null => out.push_str("null"),
        Expr::Ident(name, _) => out.push_str(name),
        Expr::List(items) => {
            out.push('[');
            write_list(out, items);
            out.push(']');
        }
        Expr::Map(entries) => {
            out.push('{');
            for (i, (k, v)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&quote(k));
                out.push_str(": ");
                write_expr(out, v);
            }
            out.push('}');
        }
        Expr::Index { target, index, .. } => {
            write_at(out, target, POSTFIX);
            out.push('[');
            write_expr(out, index);
            out.push(']');
        }
        Expr::Call { name, args, .. } => {
            out.push_str(name);
            out.push('(');
            write_list(out, args);
            out.push(')');
        }
        Expr::Unary { op: UnOp::Not, expr, .. } => {
            out.push_str("not ");
            write_at(out, expr, NOT);
        }
        Expr::Unary { op: UnOp::Neg, expr, .. } => {
            out.push('-');
            write_at(out, expr, NEG);
        }
        Expr::Binary { op, lhs, rhs, .. } => {
            let p = op.prec();
            let (lmin, rmin) = if p == CMP { (CMP + 1, CMP + 1) } else { (p, p + 1) };
            write_at(out, lhs, lmin);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_at(out, rhs, rmin);
        }
    }
}

fn write_block(out: &mut String, body: &[Stmt], depth: usize) {
    out.push_str("{\n");
    for s in body {
        write_stmt(out, s, depth + 1);
    }
    out.push_str(&"    ".repeat(depth));
    out.push('}');
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    out.push_str(&"    ".repeat(depth));
    match s {
        Stmt::Assign { target, value, .. } => {
            match target {
                Target::Var(name) => out.push_str(name),
                Target::Signal => out.push_str("SIGNAL"),
                Target::Index { root, path } => {
                    out.push_str(root);
                    for e in path {
                        out.push('[');
                        write_expr(out, e);
                        out.push(']');
                    }
                }
            }
            out.push_str(" = ");
            write_expr(out, value);
        }
        Stmt::Expr(e, _) => write_expr(out, e),
        Stmt::If { branches, otherwise, .. } => {
            for (i, (cond, body)) in branches.iter().enumerate() {
                out.push_str(if i == 0 { "if " } else { " elif " });
                write_expr(out, cond);
                out.push(' ');
                write_block(out, body, depth);
            }
            if let Some(body) = otherwise {
                out.push_str(" else ");
                write_block(out, body, depth);
            }
        }
        Stmt::While { cond, body, .. } => {
            out.push_str("while ");
            write_expr(out, cond);
            out.push(' ');
            write_block(out, body, depth);
        }
        Stmt::For { var, iter, body, .. } => {
            let _ = write!(out, "for {var} in ");
            write_expr(out, iter);
            out.push(' ');
            write_block(out, body, depth);
        }
    }
    out.push('\n');
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self);
        f.write_str(&s)
    }
}

/// Canonical source text; parses back to an equal program.
impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for stmt in &self.body {
            write_stmt(&mut s, stmt, 0);
        }
        f.write_str(&s)
    }
}
