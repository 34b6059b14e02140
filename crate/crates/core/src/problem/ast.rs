//! Expression trees for the problem definition language.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    U,
    V,
    W,
}

impl Var {
    pub fn name(&self) -> &'static str {
        match self {
            Var::T => "t",
            Var::U => "u",
            Var::V => "v",
            Var::W => "w",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
    Sqrt,
    Log,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "log" => Func::Log,
            _ => return None,
        })
    }

    fn apply(&self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Abs => x.abs(),
            Func::Sqrt => x.sqrt(),
            Func::Log => x.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
    /// u^(order)(tau); only meaningful in functional expressions.
    Eval { order: u8, tau: f64 },
    /// \int_0^1 weight(t) u^(order)(t) dt; weight is a pure-t expression.
    Integ { order: u8, weight: Box<Expr> },
}

/// Bindings for the scalar variables. Unbound variables are evaluation errors.
#[derive(Debug, Clone, Copy, Default)]
pub struct Scope {
    pub t: Option<f64>,
    pub u: Option<f64>,
    pub v: Option<f64>,
    pub w: Option<f64>,
}

impl Scope {
    pub fn tuvw(t: f64, u: f64, v: f64, w: f64) -> Self {
        Scope {
            t: Some(t),
            u: Some(u),
            v: Some(v),
            w: Some(w),
        }
    }

    pub fn t_only(t: f64) -> Self {
        Scope {
            t: Some(t),
            ..Default::default()
        }
    }

    fn get(&self, var: Var) -> Option<f64> {
        match var {
            Var::T => self.t,
            Var::U => self.u,
            Var::V => self.v,
            Var::W => self.w,
        }
    }
}

/// Environment resolving the primitive functional terms.
pub trait FunctionalEnv {
    fn eval_point(&self, order: u8, tau: f64) -> Result<f64>;
    fn eval_integral(&self, order: u8, weight: &Expr) -> Result<f64>;
}

impl Expr {
    /// Recursive evaluation. Non-finite intermediate results abort with the
    /// offending subexpression pretty-printed, so NaN never propagates.
    pub fn eval(&self, scope: &Scope, env: Option<&dyn FunctionalEnv>) -> Result<f64> {
        let value = match self {
            Expr::Num(x) => *x,
            Expr::Var(v) => scope.get(*v).ok_or_else(|| Error::NonFinite {
                context: format!("unbound variable `{}`", v.name()),
            })?,
            Expr::Neg(inner) => -inner.eval(scope, env)?,
            Expr::Bin(op, a, b) => {
                let x = a.eval(scope, env)?;
                let y = b.eval(scope, env)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => x.powf(y),
                }
            }
            Expr::Call(f, arg) => f.apply(arg.eval(scope, env)?),
            Expr::Eval { order, tau } => match env {
                Some(env) => env.eval_point(*order, *tau)?,
                None => {
                    return Err(Error::NonFinite {
                        context: "eval(..) outside a functional context".into(),
                    })
                }
            },
            Expr::Integ { order, weight } => match env {
                Some(env) => env.eval_integral(*order, weight)?,
                None => {
                    return Err(Error::NonFinite {
                        context: "integ(..) outside a functional context".into(),
                    })
                }
            },
        };
        if !value.is_finite() {
            return Err(Error::NonFinite {
                context: self.pretty(),
            });
        }
        Ok(value)
    }

    /// Fully parenthesized rendering; reparses to a structurally equal tree.
    pub fn pretty(&self) -> String {
        match self {
            Expr::Num(x) => {
                if *x < 0.0 {
                    format!("({x})")
                } else {
                    format!("{x}")
                }
            }
            Expr::Var(v) => v.name().to_string(),
            Expr::Neg(inner) => format!("(-{})", inner.pretty()),
            Expr::Bin(op, a, b) => format!("({} {} {})", a.pretty(), op.symbol(), b.pretty()),
            Expr::Call(f, arg) => format!("{}({})", f.name(), arg.pretty()),
            Expr::Eval { order, tau } => format!("eval({order}, {tau})"),
            Expr::Integ { order, weight } => format!("integ({order}, {})", weight.pretty()),
        }
    }

    /// All variables appearing outside integ weights.
    pub fn free_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) | Expr::Eval { .. } => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.free_vars(out),
            Expr::Bin(_, a, b) => {
                a.free_vars(out);
                b.free_vars(out);
            }
            Expr::Integ { .. } => {}
        }
    }

    pub fn contains_functional_term(&self) -> bool {
        match self {
            Expr::Eval { .. } | Expr::Integ { .. } => true,
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.contains_functional_term(),
            Expr::Bin(_, a, b) => a.contains_functional_term() || b.contains_functional_term(),
        }
    }

    pub fn contains_division_or_log(&self) -> bool {
        match self {
            Expr::Bin(BinOp::Div, a, b) => {
                // constant denominators cannot blow up
                !matches!(**b, Expr::Num(_)) || a.contains_division_or_log()
            }
            Expr::Call(Func::Log, _) => true,
            Expr::Num(_) | Expr::Var(_) | Expr::Eval { .. } => false,
            Expr::Neg(e) | Expr::Call(_, e) => e.contains_division_or_log(),
            Expr::Bin(_, a, b) => a.contains_division_or_log() || b.contains_division_or_log(),
            Expr::Integ { weight, .. } => weight.contains_division_or_log(),
        }
    }

    /// Arguments of every abs(..) call, in source order. The nonlinearity is
    /// only C^0 where such an argument changes sign, which the operator
    /// discretization needs to know about.
    pub fn abs_arguments(&self, out: &mut Vec<Expr>) {
        match self {
            Expr::Call(Func::Abs, arg) => {
                arg.abs_arguments(out);
                out.push((**arg).clone());
            }
            Expr::Neg(e) | Expr::Call(_, e) => e.abs_arguments(out),
            Expr::Bin(_, a, b) => {
                a.abs_arguments(out);
                b.abs_arguments(out);
            }
            Expr::Integ { weight, .. } => weight.abs_arguments(out),
            Expr::Num(_) | Expr::Var(_) | Expr::Eval { .. } => {}
        }
    }
}
