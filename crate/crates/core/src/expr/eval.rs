//! Linear- and log-scale evaluation.
//!
//! Evaluation is total: IEEE semantics everywhere, except that a product
//! with an exact zero factor is zero even when the other factor is infinite.
//! Any NaN produced along the way is reported through [`Evaluation::nan`].

use std::cell::Cell;
use std::f64::consts::PI;

use thiserror::Error;

use super::{AggOp, BinOp, CmpOp, Cond, Expr, Func, Index};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("density evaluated to a negative value ({value})")]
    NegativeDensity { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// A NaN appeared somewhere during evaluation, even if it was later
    /// absorbed (for instance by a comparison).
    pub nan: bool,
}

struct Env<'a> {
    x: &'a [f64],
    theta: &'a [f64],
    bindings: Vec<(&'a str, usize)>,
    nan: Cell<bool>,
}

impl<'a> Env<'a> {
    fn note(&self, v: f64) -> f64 {
        if v.is_nan() {
            self.nan.set(true);
        }
        v
    }

    fn lookup(&self, name: &str) -> Option<usize> {
        self.bindings
            .iter()
            .rev()
            .find(|(b, _)| *b == name)
            .map(|&(_, i)| i)
    }
}

pub fn eval<'a>(e: &'a Expr, x: &'a [f64], theta: &'a [f64]) -> Evaluation {
    eval_with(e, x, theta, &[])
}

/// Evaluates with some binders already fixed, e.g. `[("i", 2)]`.
pub fn eval_with<'a>(
    e: &'a Expr,
    x: &'a [f64],
    theta: &'a [f64],
    bindings: &[(&'a str, usize)],
) -> Evaluation {
    let mut env = Env {
        x,
        theta,
        bindings: bindings.to_vec(),
        nan: Cell::new(false),
    };
    let value = linear(e, &mut env);
    Evaluation {
        value,
        nan: env.nan.get(),
    }
}

/// Natural log of [`eval`], computed by rewriting `exp`, products, quotients
/// and powers into sums where that is exact. Zero maps to `-inf`.
pub fn eval_log<'a>(e: &'a Expr, x: &'a [f64], theta: &'a [f64]) -> Result<Evaluation, EvalError> {
    eval_log_with(e, x, theta, &[])
}

pub fn eval_log_with<'a>(
    e: &'a Expr,
    x: &'a [f64],
    theta: &'a [f64],
    bindings: &[(&'a str, usize)],
) -> Result<Evaluation, EvalError> {
    let mut env = Env {
        x,
        theta,
        bindings: bindings.to_vec(),
        nan: Cell::new(false),
    };
    match log_scale(e, &mut env) {
        Some(value) => Ok(Evaluation {
            value,
            nan: env.nan.get(),
        }),
        None => Err(EvalError::NegativeDensity {
            value: linear(e, &mut env),
        }),
    }
}

fn times(a: f64, b: f64) -> f64 {
    if (a == 0.0 && b.is_infinite()) || (b == 0.0 && a.is_infinite()) {
        0.0
    } else {
        a * b
    }
}

fn linear<'a>(e: &'a Expr, env: &mut Env<'a>) -> f64 {
    let v = match e {
        Expr::Num(v) => *v,
        Expr::Pi => PI,
        Expr::SampleSize => env.x.len() as f64,
        Expr::Sample(Index::Fixed(i)) => env.x.get(*i).copied().unwrap_or(f64::NAN),
        Expr::Sample(Index::Bound(b)) => env
            .lookup(b)
            .and_then(|i| env.x.get(i).copied())
            .unwrap_or(f64::NAN),
        Expr::Param(j) => env.theta.get(*j).copied().unwrap_or(f64::NAN),
        Expr::Neg(a) => -linear(a, env),
        Expr::Binary { op, lhs, rhs } => {
            let a = linear(lhs, env);
            let b = linear(rhs, env);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => times(a, b),
                BinOp::Div => a / b,
                BinOp::Pow => a.powf(b),
            }
        }
        Expr::Call { func, arg } => {
            let a = linear(arg, env);
            match func {
                Func::Exp => a.exp(),
                Func::Log => a.ln(),
                Func::Abs => a.abs(),
                Func::Sqrt => a.sqrt(),
            }
        }
        Expr::Aggregate { op, binder, body } => {
            let n = env.x.len();
            let mut acc = match op {
                AggOp::Sum => 0.0,
                AggOp::Prod => 1.0,
                AggOp::Min => f64::INFINITY,
                AggOp::Max => f64::NEG_INFINITY,
            };
            for i in 0..n {
                env.bindings.push((binder.as_str(), i));
                let v = linear(body, env);
                env.bindings.pop();
                acc = match op {
                    AggOp::Sum => acc + v,
                    AggOp::Prod => times(acc, v),
                    AggOp::Min if v.is_nan() || acc.is_nan() => f64::NAN,
                    AggOp::Max if v.is_nan() || acc.is_nan() => f64::NAN,
                    AggOp::Min => acc.min(v),
                    AggOp::Max => acc.max(v),
                };
            }
            acc
        }
        Expr::Indicator(c) => {
            if truth(c, env) {
                1.0
            } else {
                0.0
            }
        }
    };
    env.note(v)
}

fn truth<'a>(c: &'a Cond, env: &mut Env<'a>) -> bool {
    match c {
        Cond::Compare { op, lhs, rhs } => {
            let a = linear(lhs, env);
            let b = linear(rhs, env);
            match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
                CmpOp::Eq => a == b,
            }
        }
        Cond::And(a, b) => {
            let l = truth(a, env);
            let r = truth(b, env);
            l && r
        }
        Cond::Or(a, b) => {
            let l = truth(a, env);
            let r = truth(b, env);
            l || r
        }
    }
}

/// `None` means the node's value is negative and has no real logarithm;
/// callers fall back to the linear value of the enclosing node.
fn log_scale<'a>(e: &'a Expr, env: &mut Env<'a>) -> Option<f64> {
    let v = match e {
        Expr::Num(v) => {
            if *v >= 0.0 {
                v.ln()
            } else {
                return None;
            }
        }
        Expr::Call {
            func: Func::Exp,
            arg,
        } => linear(arg, env),
        Expr::Call {
            func: Func::Sqrt,
            arg,
        } => match log_scale(arg, env) {
            Some(a) => a / 2.0,
            None => return fallback(e, env),
        },
        Expr::Binary { op, lhs, rhs } => match op {
            BinOp::Mul => match (log_scale(lhs, env), log_scale(rhs, env)) {
                (Some(a), Some(b)) => {
                    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        a + b
                    }
                }
                _ => return fallback(e, env),
            },
            BinOp::Div => match (log_scale(lhs, env), log_scale(rhs, env)) {
                (Some(a), Some(b)) => a - b,
                _ => return fallback(e, env),
            },
            BinOp::Pow => match log_scale(lhs, env) {
                Some(a) => {
                    let b = linear(rhs, env);
                    if b == 0.0 {
                        0.0
                    } else if a == f64::NEG_INFINITY {
                        if b > 0.0 {
                            f64::NEG_INFINITY
                        } else if b < 0.0 {
                            f64::INFINITY
                        } else {
                            f64::NAN
                        }
                    } else {
                        b * a
                    }
                }
                None => return fallback(e, env),
            },
            BinOp::Add | BinOp::Sub => return fallback(e, env),
        },
        Expr::Aggregate {
            op: AggOp::Prod,
            binder,
            body,
        } => {
            let n = env.x.len();
            let mut acc = 0.0;
            let mut zero = false;
            for i in 0..n {
                env.bindings.push((binder.as_str(), i));
                let term = log_scale(body, env);
                env.bindings.pop();
                match term {
                    Some(t) if t == f64::NEG_INFINITY => zero = true,
                    Some(t) => acc += t,
                    None => return fallback(e, env),
                }
            }
            if zero {
                f64::NEG_INFINITY
            } else {
                acc
            }
        }
        Expr::Indicator(c) => {
            if truth(c, env) {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        }
        _ => return fallback(e, env),
    };
    Some(env.note(v))
}

fn fallback<'a>(e: &'a Expr, env: &mut Env<'a>) -> Option<f64> {
    let v = linear(e, env);
    if v >= 0.0 || v.is_nan() {
        Some(env.note(v.ln()))
    } else {
        None
    }
}
