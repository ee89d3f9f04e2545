use std::fmt;

use serde::{Deserialize, Serialize};

/// Arithmetic over species counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Num(f64),
    Var(String),
    /// Change of a species at the last jump.
    Delta(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl CmpOp {
    pub fn apply(self, l: f64, r: f64) -> bool {
        match self {
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
            CmpOp::Eq => l == r,
        }
    }

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

/// Atomic proposition `lhs op rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

/// Closed time window `[lo, hi]`; `hi = None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl Interval {
    pub fn bounded(lo: f64, hi: f64) -> Self {
        Self { lo, hi: Some(hi) }
    }
}

/// Core STL syntax. Eventually, always, disjunction and `false` are
/// rewritten into these nodes by the parser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StlFormula {
    True,
    Atom(Atom),
    Not(Box<StlFormula>),
    And(Box<StlFormula>, Box<StlFormula>),
    Until(Box<StlFormula>, Box<StlFormula>, Interval),
}

impl StlFormula {
    pub fn not(f: StlFormula) -> Self {
        StlFormula::Not(Box::new(f))
    }

    pub fn and(a: StlFormula, b: StlFormula) -> Self {
        StlFormula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: StlFormula, b: StlFormula) -> Self {
        Self::not(Self::and(Self::not(a), Self::not(b)))
    }

    pub fn until(a: StlFormula, b: StlFormula, i: Interval) -> Self {
        StlFormula::Until(Box::new(a), Box::new(b), i)
    }

    pub fn eventually(i: Interval, f: StlFormula) -> Self {
        Self::until(StlFormula::True, f, i)
    }

    pub fn always(i: Interval, f: StlFormula) -> Self {
        Self::not(Self::eventually(i, Self::not(f)))
    }

    /// Length of trajectory needed to decide the formula at time 0.
    ///
    /// An unbounded `U[a, inf)` only contributes `a`: beyond the trajectory
    /// its right operand is taken to be false.
    pub fn horizon(&self) -> f64 {
        match self {
            StlFormula::True | StlFormula::Atom(_) => 0.0,
            StlFormula::Not(f) => f.horizon(),
            StlFormula::And(a, b) => a.horizon().max(b.horizon()),
            StlFormula::Until(a, b, i) => a.horizon().max(b.horizon()) + i.hi.unwrap_or(i.lo),
        }
    }

    /// Species names mentioned by the atoms, in order of first use.
    pub fn identifiers(&self) -> Vec<String> {
        fn expr(e: &Expr, out: &mut Vec<String>) {
            match e {
                Expr::Num(_) => {}
                Expr::Var(v) | Expr::Delta(v) => {
                    if !out.contains(v) {
                        out.push(v.clone());
                    }
                }
                Expr::Neg(a) => expr(a, out),
                Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                    expr(a, out);
                    expr(b, out);
                }
            }
        }
        fn walk(f: &StlFormula, out: &mut Vec<String>) {
            match f {
                StlFormula::True => {}
                StlFormula::Atom(a) => {
                    expr(&a.lhs, out);
                    expr(&a.rhs, out);
                }
                StlFormula::Not(a) => walk(a, out),
                StlFormula::And(a, b) | StlFormula::Until(a, b, _) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Delta(v) => write!(f, "D({v})"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(hi) => write!(f, "[{},{}]", self.lo, hi),
            None => write!(f, "[{},inf]", self.lo),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.lhs, self.op.symbol(), self.rhs)
    }
}

/// Prints fully parenthesized core syntax that parses back to the same tree.
impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StlFormula::True => write!(f, "true"),
            StlFormula::Atom(a) => write!(f, "{a}"),
            StlFormula::Not(a) => write!(f, "!{a}"),
            StlFormula::And(a, b) => write!(f, "({a} & {b})"),
            StlFormula::Until(a, b, i) => write!(f, "({a} U{i} {b})"),
        }
    }
}
