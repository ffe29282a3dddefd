//! A small expression language for densities and statistics.
//!
//! Expressions range over sample coordinates `x[i]`, parameters `theta[j]`,
//! the constants `pi` and `n` (the sample dimension), the unary functions
//! `exp`, `log`, `abs`, `sqrt`, the aggregates `sum`, `prod`, `min`, `max`
//! over a bound index, and indicators `ind(cond)` of comparisons joined by
//! `and`/`or`.
//!
//! ```text
//! prod{i}(1/(pi*(1+(x[i]-theta[0])^2)))
//! exp(n*theta[0] - sum{i}(x[i])) * ind(min{i}(x[i]) > theta[0])
//! ```

mod eval;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use eval::{eval, eval_log, eval_log_with, eval_with, EvalError, Evaluation};
pub use parser::{parse, parse_constant, parse_with_binders};

/// Errors raised while turning text into an [`Expr`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown identifier `{name}` at {line}:{column}")]
    UnknownIdentifier {
        name: String,
        line: usize,
        column: usize,
    },
    #[error("index {index} of `{variable}` out of range (dimension {dim}) at {line}:{column}")]
    IndexOutOfRange {
        variable: &'static str,
        index: usize,
        dim: usize,
        line: usize,
        column: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggOp {
    Sum,
    Prod,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

/// Position of a sample coordinate: a literal index or an aggregate binder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Index {
    Fixed(usize),
    Bound(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    /// `n`, the length of the sample vector at evaluation time.
    SampleSize,
    Sample(Index),
    Param(usize),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        func: Func,
        arg: Box<Expr>,
    },
    /// Ranges `binder` over `0..n`.
    Aggregate {
        op: AggOp,
        binder: String,
        body: Box<Expr>,
    },
    Indicator(Box<Cond>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cond {
    Compare { op: CmpOp, lhs: Expr, rhs: Expr },
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Expr {
    /// Height of the tree, leaves at depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Pi | Expr::SampleSize | Expr::Sample(_) | Expr::Param(_) => 0,
            Expr::Neg(e) => 1 + e.depth(),
            Expr::Binary { lhs, rhs, .. } => 1 + lhs.depth().max(rhs.depth()),
            Expr::Call { arg, .. } => 1 + arg.depth(),
            Expr::Aggregate { body, .. } => 1 + body.depth(),
            Expr::Indicator(c) => 1 + c.depth(),
        }
    }

    /// Calls `f` on every node, parents before children.
    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Neg(e) => e.visit(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit(f);
                rhs.visit(f);
            }
            Expr::Call { arg, .. } => arg.visit(f),
            Expr::Aggregate { body, .. } => body.visit(f),
            Expr::Indicator(c) => c.visit(f),
            _ => {}
        }
    }

    pub fn param_leaf_count(&self) -> usize {
        let mut count = 0;
        self.visit(&mut |e| {
            if matches!(e, Expr::Param(_)) {
                count += 1;
            }
        });
        count
    }

    /// True if the expression reads any sample coordinate or `n`.
    pub fn references_sample(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(
                e,
                Expr::Sample(_) | Expr::SampleSize | Expr::Aggregate { .. }
            ) {
                found = true;
            }
        });
        found
    }

    pub fn references_params(&self) -> bool {
        self.param_leaf_count() > 0
    }

    /// Smallest sample dimension the literal indices fit in.
    pub fn min_sample_dim(&self) -> usize {
        let mut dim = 0;
        self.visit(&mut |e| {
            if let Expr::Sample(Index::Fixed(i)) = e {
                dim = dim.max(i + 1);
            }
        });
        dim
    }

    pub fn min_param_dim(&self) -> usize {
        let mut dim = 0;
        self.visit(&mut |e| {
            if let Expr::Param(j) = e {
                dim = dim.max(j + 1);
            }
        });
        dim
    }
}

impl Cond {
    fn depth(&self) -> usize {
        match self {
            Cond::Compare { lhs, rhs, .. } => 1 + lhs.depth().max(rhs.depth()),
            Cond::And(a, b) | Cond::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        match self {
            Cond::Compare { lhs, rhs, .. } => {
                lhs.visit(f);
                rhs.visit(f);
            }
            Cond::And(a, b) | Cond::Or(a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

impl Func {
    pub(crate) fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "abs" => Some(Func::Abs),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }
}

impl AggOp {
    pub(crate) fn from_name(name: &str) -> Option<AggOp> {
        match name {
            "sum" => Some(AggOp::Sum),
            "prod" => Some(AggOp::Prod),
            "min" => Some(AggOp::Min),
            "max" => Some(AggOp::Max),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            AggOp::Sum => "sum",
            AggOp::Prod => "prod",
            AggOp::Min => "min",
            AggOp::Max => "max",
        }
    }
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
        }
    }
}

// Binary and unary nodes are fully parenthesized so the output reparses to
// the same tree regardless of precedence.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => f.write_str("pi"),
            Expr::SampleSize => f.write_str("n"),
            Expr::Sample(Index::Fixed(i)) => write!(f, "x[{i}]"),
            Expr::Sample(Index::Bound(b)) => write!(f, "x[{b}]"),
            Expr::Param(j) => write!(f, "theta[{j}]"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Expr::Call { func, arg } => write!(f, "{}({arg})", func.name()),
            Expr::Aggregate { op, binder, body } => write!(f, "{}{{{binder}}}({body})", op.name()),
            Expr::Indicator(c) => write!(f, "ind({c})"),
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Compare { op, lhs, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            Cond::And(a, b) => write!(f, "{a} and {b}"),
            Cond::Or(a, b) => write!(f, "{a} or {b}"),
        }
    }
}

/// Renders an expression in the concrete syntax accepted by [`parse`].
pub fn unparse(e: &Expr) -> String {
    e.to_string()
}
