//! Expression trees for pattern functions.
//!
//! An [`Expr`] is written once per pattern in terms of *local* variable slots
//! ([`Expr::var`]) and *data fields* ([`Expr::param`]). Each data record of the
//! pattern binds the slots to global decision-vector indices and supplies the
//! field values, so a single tree describes every instance of the pattern.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Smooth unary functions available in patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryFn {
    Sin,
    Cos,
    Sqrt,
    Log,
    Exp,
}

/// Closed algebraic expression over local variable slots and data fields.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    /// Local variable slot, bound to a global index by each data record.
    Var(usize),
    /// Data field of the record.
    Param(usize),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Unary(UnaryFn, Box<Expr>),
}

impl Expr {
    pub fn var(slot: usize) -> Self {
        Expr::Var(slot)
    }

    pub fn param(field: usize) -> Self {
        Expr::Param(field)
    }

    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn sin(self) -> Self {
        Expr::Unary(UnaryFn::Sin, Box::new(self))
    }

    pub fn cos(self) -> Self {
        Expr::Unary(UnaryFn::Cos, Box::new(self))
    }

    pub fn sqrt(self) -> Self {
        Expr::Unary(UnaryFn::Sqrt, Box::new(self))
    }

    pub fn ln(self) -> Self {
        Expr::Unary(UnaryFn::Log, Box::new(self))
    }

    pub fn exp(self) -> Self {
        Expr::Unary(UnaryFn::Exp, Box::new(self))
    }

    pub fn pow(self, exponent: impl Into<Expr>) -> Self {
        Expr::Pow(Box::new(self), Box::new(exponent.into()))
    }

    pub fn powi(self, exponent: i32) -> Self {
        self.pow(Expr::Const(f64::from(exponent)))
    }

    /// Largest referenced variable slot plus one (0 when no variable is used).
    pub fn slot_count(&self) -> usize {
        self.fold_max(&|e| match e {
            Expr::Var(s) => Some(*s),
            _ => None,
        })
    }

    /// Largest referenced data field plus one.
    pub fn field_count(&self) -> usize {
        self.fold_max(&|e| match e {
            Expr::Param(p) => Some(*p),
            _ => None,
        })
    }

    fn fold_max(&self, pick: &dyn Fn(&Expr) -> Option<usize>) -> usize {
        let own = pick(self).map_or(0, |i| i + 1);
        let kids = match self {
            Expr::Var(_) | Expr::Param(_) | Expr::Const(_) => 0,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.fold_max(pick).max(b.fold_max(pick))
            }
            Expr::Neg(a) | Expr::Unary(_, a) => a.fold_max(pick),
        };
        own.max(kids)
    }
}

impl From<f64> for Expr {
    fn from(value: f64) -> Self {
        Expr::Const(value)
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl $trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Const(rhs)))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Const(self)), Box::new(rhs))
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}
