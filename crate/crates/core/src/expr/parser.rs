//! Recursive descent over the token stream.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'pi' | 'n' | 'x[' index ']' | 'theta[' int ']'
//!         | func '(' expr ')' | agg '{' ident '}' '(' expr ')'
//!         | 'ind' '(' cond ')' | '(' expr ')'
//! cond   := conj ('or' conj)*
//! conj   := cmp ('and' cmp)*
//! cmp    := expr ('<'|'<='|'>'|'>='|'==') expr
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so
//! `-x[0]^2` is `-(x[0]^2)`.

use super::lexer::{tokenize, Tok, Token};
use super::{AggOp, BinOp, CmpOp, Cond, Expr, Func, Index, ParseError};

const RESERVED: &[&str] = &[
    "x", "theta", "pi", "n", "exp", "log", "abs", "sqrt", "sum", "prod", "min", "max", "ind",
    "and", "or",
];

/// Parses `text` against declared sample and parameter dimensions.
pub fn parse(text: &str, sample_dim: usize, param_dim: usize) -> Result<Expr, ParseError> {
    parse_with_binders(text, sample_dim, param_dim, &[])
}

/// Like [`parse`], with `binders` already in scope as sample indices. Used
/// for elementwise statistic components such as `abs(x[i])`.
pub fn parse_with_binders(
    text: &str,
    sample_dim: usize,
    param_dim: usize,
    binders: &[&str],
) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Syntax {
            line: 1,
            column: 1,
            message: "empty expression".into(),
        });
    }
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        sample_dim,
        param_dim,
        binders: binders.iter().map(|b| b.to_string()).collect(),
    };
    let e = p.expr()?;
    p.expect(&Tok::Eof, "end of input")?;
    Ok(e)
}

/// Parses a closed numeric expression such as `1/3` or `-sqrt(2)`.
pub fn parse_constant(text: &str) -> Result<f64, ParseError> {
    let e = parse(text, 0, 0)?;
    Ok(super::eval(&e, &[], &[]).value)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    sample_dim: usize,
    param_dim: usize,
    binders: Vec<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: &Tok, what: &str) -> Result<Token, ParseError> {
        if &self.peek().tok == tok {
            Ok(self.bump())
        } else {
            self.syntax(format!(
                "expected {what}, found {}",
                describe(&self.peek().tok)
            ))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let token = self.peek().clone();
        match token.tok {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(ref name) => {
                self.bump();
                self.identifier(name, &token)
            }
            ref other => self.syntax(format!("expected an operand, found {}", describe(other))),
        }
    }

    fn identifier(&mut self, name: &str, at: &Token) -> Result<Expr, ParseError> {
        match name {
            "pi" => Ok(Expr::Pi),
            "n" => Ok(Expr::SampleSize),
            "x" => {
                self.expect(&Tok::LBracket, "`[`")?;
                let index = self.sample_index()?;
                self.expect(&Tok::RBracket, "`]`")?;
                Ok(Expr::Sample(index))
            }
            "theta" => {
                self.expect(&Tok::LBracket, "`[`")?;
                let here = self.peek().clone();
                let j = self.integer()?;
                if j >= self.param_dim {
                    return Err(ParseError::IndexOutOfRange {
                        variable: "theta",
                        index: j,
                        dim: self.param_dim,
                        line: here.line,
                        column: here.column,
                    });
                }
                self.expect(&Tok::RBracket, "`]`")?;
                Ok(Expr::Param(j))
            }
            "ind" => {
                self.expect(&Tok::LParen, "`(` after ind")?;
                let c = self.cond()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(Expr::Indicator(Box::new(c)))
            }
            _ => {
                if let Some(func) = Func::from_name(name) {
                    self.expect(&Tok::LParen, "`(`")?;
                    let arg = self.expr()?;
                    self.expect(&Tok::RParen, "`)`")?;
                    return Ok(Expr::Call {
                        func,
                        arg: Box::new(arg),
                    });
                }
                if let Some(op) = AggOp::from_name(name) {
                    return self.aggregate(op);
                }
                Err(ParseError::UnknownIdentifier {
                    name: name.to_string(),
                    line: at.line,
                    column: at.column,
                })
            }
        }
    }

    fn aggregate(&mut self, op: AggOp) -> Result<Expr, ParseError> {
        self.expect(&Tok::LBrace, "`{` after aggregate")?;
        let binder = match self.bump().tok {
            Tok::Ident(b) if !RESERVED.contains(&b.as_str()) => b,
            Tok::Ident(b) => return self.syntax(format!("`{b}` cannot be used as an index name")),
            other => {
                return self.syntax(format!("expected index name, found {}", describe(&other)))
            }
        };
        self.expect(&Tok::RBrace, "`}`")?;
        self.expect(&Tok::LParen, "`(`")?;
        self.binders.push(binder.clone());
        let body = self.expr();
        self.binders.pop();
        let body = body?;
        self.expect(&Tok::RParen, "`)`")?;
        Ok(Expr::Aggregate {
            op,
            binder,
            body: Box::new(body),
        })
    }

    fn sample_index(&mut self) -> Result<Index, ParseError> {
        let here = self.peek().clone();
        if let Tok::Ident(name) = &here.tok {
            if self.binders.iter().any(|b| b == name) {
                self.bump();
                return Ok(Index::Bound(name.clone()));
            }
            return Err(ParseError::UnknownIdentifier {
                name: name.clone(),
                line: here.line,
                column: here.column,
            });
        }
        let i = self.integer()?;
        if i >= self.sample_dim {
            return Err(ParseError::IndexOutOfRange {
                variable: "x",
                index: i,
                dim: self.sample_dim,
                line: here.line,
                column: here.column,
            });
        }
        Ok(Index::Fixed(i))
    }

    fn integer(&mut self) -> Result<usize, ParseError> {
        match self.peek().tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 => {
                self.bump();
                Ok(v as usize)
            }
            ref other => self.syntax(format!(
                "expected an integer index, found {}",
                describe(other)
            )),
        }
    }

    fn cond(&mut self) -> Result<Cond, ParseError> {
        let mut lhs = self.conj()?;
        while self.is_keyword("or") {
            self.bump();
            let rhs = self.conj()?;
            lhs = Cond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Cond, ParseError> {
        let mut lhs = self.comparison()?;
        while self.is_keyword("and") {
            self.bump();
            let rhs = self.comparison()?;
            lhs = Cond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn comparison(&mut self) -> Result<Cond, ParseError> {
        let lhs = self.expr()?;
        let op = match self.peek().tok {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            Tok::EqEq => CmpOp::Eq,
            ref other => {
                return self.syntax(format!("expected a comparison, found {}", describe(other)))
            }
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Cond::Compare { op, lhs, rhs })
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    Expr::Binary {
        op,
        lhs: Box::new(lhs),
        rhs: Box::new(rhs),
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}
