//! Hash-consed symbolic scalar expressions over chart variables.
//!
//! Every node is interned in a process-wide table, so structurally equal trees
//! built anywhere share one allocation and compare by id. Smart constructors
//! apply light constant folding (`0*x -> 0`, `x+0 -> x`, `1*x -> x`, ...);
//! no canonical form beyond that is attempted.

mod diff;
mod eval;
mod parse;

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, LazyLock, Mutex, Weak};

use crate::chart::Var;

pub use diff::{record_derivatives, DerivativeRecord};
pub use eval::Tape;
pub use parse::parse_scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "neg" => UnaryOp::Neg,
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            _ => return None,
        })
    }

    /// `None` when the argument is outside the domain.
    pub(crate) fn apply(self, x: f64) -> Option<f64> {
        let v = match self {
            UnaryOp::Neg => -x,
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log if x > 0.0 => x.ln(),
            UnaryOp::Sqrt if x >= 0.0 => x.sqrt(),
            UnaryOp::Log | UnaryOp::Sqrt => return None,
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }

    pub(crate) fn apply(self, a: f64, b: f64) -> Option<f64> {
        let v = match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div if b != 0.0 => a / b,
            BinaryOp::Div => return None,
        };
        v.is_finite().then_some(v)
    }
}

pub(crate) fn apply_pow(base: f64, exponent: f64) -> Option<f64> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return None;
    }
    if base == 0.0 && exponent < 0.0 {
        return None;
    }
    let v = if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    };
    v.is_finite().then_some(v)
}

/// Node payload. Children are themselves interned expressions.
#[derive(Debug, Clone)]
pub enum ExprKind {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
    /// Power with a constant exponent.
    Pow(Expr, f64),
}

#[derive(Debug)]
pub(crate) struct Node {
    id: u64,
    /// Bit set of chart variables occurring in the subtree.
    vars: u32,
    kind: ExprKind,
}

/// Immutable, shareable symbolic expression.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Const(u64),
    Var(Var),
    Unary(UnaryOp, u64),
    Binary(BinaryOp, u64, u64),
    Pow(u64, u64),
}

struct Interner {
    map: HashMap<Key, Weak<Node>>,
    prune_at: usize,
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

static INTERNER: LazyLock<Mutex<Interner>> = LazyLock::new(|| {
    Mutex::new(Interner {
        map: HashMap::new(),
        prune_at: 1 << 16,
    })
});

fn key_of(kind: &ExprKind) -> Key {
    match kind {
        ExprKind::Const(c) => Key::Const(c.to_bits()),
        ExprKind::Var(v) => Key::Var(*v),
        ExprKind::Unary(op, a) => Key::Unary(*op, a.id()),
        ExprKind::Binary(op, a, b) => Key::Binary(*op, a.id(), b.id()),
        ExprKind::Pow(a, e) => Key::Pow(a.id(), e.to_bits()),
    }
}

fn intern(kind: ExprKind) -> Expr {
    let key = key_of(&kind);
    let vars = match &kind {
        ExprKind::Const(_) => 0,
        ExprKind::Var(v) => v.mask(),
        ExprKind::Unary(_, a) | ExprKind::Pow(a, _) => a.0.vars,
        ExprKind::Binary(_, a, b) => a.0.vars | b.0.vars,
    };
    let mut table = INTERNER.lock().unwrap_or_else(|e| e.into_inner());
    if let Some(node) = table.map.get(&key).and_then(Weak::upgrade) {
        return Expr(node);
    }
    let node = Arc::new(Node {
        id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
        vars,
        kind,
    });
    table.map.insert(key, Arc::downgrade(&node));
    if table.map.len() > table.prune_at {
        table.map.retain(|_, w| w.strong_count() > 0);
        table.prune_at = (table.map.len() * 2).max(1 << 16);
    }
    Expr(node)
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        assert!(c.is_finite(), "expression constants must be finite");
        // -0.0 and 0.0 intern to the same node.
        let c = if c == 0.0 { 0.0 } else { c };
        intern(ExprKind::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(v: Var) -> Expr {
        intern(ExprKind::Var(v))
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0.kind
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.0.kind {
            ExprKind::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    pub(crate) fn var_mask(&self) -> u32 {
        self.0.vars
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.0.vars & v.mask() != 0
    }

    /// Variables occurring in the expression, in chart order.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let ExprKind::Var(v) = e.kind() {
                out.push(*v);
            }
        });
        out.sort();
        out.dedup();
        out
    }

    /// Visits every distinct node once (children before parents).
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![(self.clone(), false)];
        while let Some((e, expanded)) = stack.pop() {
            if expanded {
                f(&e);
                continue;
            }
            if !seen.insert(e.id()) {
                continue;
            }
            stack.push((e.clone(), true));
            match e.kind() {
                ExprKind::Const(_) | ExprKind::Var(_) => {}
                ExprKind::Unary(_, a) | ExprKind::Pow(a, _) => stack.push((a.clone(), false)),
                ExprKind::Binary(_, a, b) => {
                    stack.push((b.clone(), false));
                    stack.push((a.clone(), false));
                }
            }
        }
    }

    /// Number of distinct nodes in the expression DAG.
    pub fn dag_size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        if let Some(c) = a.as_const() {
            if let Some(v) = op.apply(c) {
                return Expr::constant(v);
            }
        }
        if op == UnaryOp::Neg {
            if let ExprKind::Unary(UnaryOp::Neg, inner) = a.kind() {
                return inner.clone();
            }
        }
        intern(ExprKind::Unary(op, a))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if let Some(v) = op.apply(x, y) {
                return Expr::constant(v);
            }
        }
        match op {
            BinaryOp::Add => {
                if a.is_zero() {
                    return b;
                }
                if b.is_zero() {
                    return a;
                }
                // constants on the left
                if b.as_const().is_some() {
                    return intern(ExprKind::Binary(op, b, a));
                }
            }
            BinaryOp::Sub => {
                if b.is_zero() {
                    return a;
                }
                if a.is_zero() {
                    return Expr::unary(UnaryOp::Neg, b);
                }
                if a.id() == b.id() {
                    return Expr::zero();
                }
            }
            BinaryOp::Mul => {
                let (a, b) = if b.as_const().is_some() { (b, a) } else { (a, b) };
                if let Some(c) = a.as_const() {
                    if c == 0.0 {
                        return Expr::zero();
                    }
                    if c == 1.0 {
                        return b;
                    }
                    if c == -1.0 {
                        return Expr::unary(UnaryOp::Neg, b);
                    }
                    if let ExprKind::Binary(BinaryOp::Mul, inner_c, rest) = b.kind() {
                        if let Some(d) = inner_c.as_const() {
                            if let Some(v) = BinaryOp::Mul.apply(c, d) {
                                return Expr::binary(BinaryOp::Mul, Expr::constant(v), rest.clone());
                            }
                        }
                    }
                }
                if b.is_zero() {
                    return Expr::zero();
                }
                return intern(ExprKind::Binary(op, a, b));
            }
            BinaryOp::Div => {
                if a.is_zero() {
                    return Expr::zero();
                }
                if b.is_one() {
                    return a;
                }
                if b.as_const() == Some(-1.0) {
                    return Expr::unary(UnaryOp::Neg, a);
                }
            }
        }
        intern(ExprKind::Binary(op, a, b))
    }

    pub fn pow(self, exponent: f64) -> Expr {
        assert!(exponent.is_finite(), "exponent must be finite");
        if exponent == 0.0 {
            return Expr::one();
        }
        if exponent == 1.0 {
            return self;
        }
        if let Some(c) = self.as_const() {
            if let Some(v) = apply_pow(c, exponent) {
                return Expr::constant(v);
            }
        }
        intern(ExprKind::Pow(self, exponent))
    }

    pub fn sin(self) -> Expr {
        Expr::unary(UnaryOp::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::unary(UnaryOp::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::unary(UnaryOp::Exp, self)
    }

    pub fn ln(self) -> Expr {
        Expr::unary(UnaryOp::Log, self)
    }

    pub fn sqrt(self) -> Expr {
        Expr::unary(UnaryOp::Sqrt, self)
    }

    /// Balanced sum, keeping tree depth logarithmic in the number of terms.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut terms: Vec<Expr> = terms.into_iter().filter(|t| !t.is_zero()).collect();
        if terms.is_empty() {
            return Expr::zero();
        }
        while terms.len() > 1 {
            let mut next = Vec::with_capacity(terms.len().div_ceil(2));
            let mut it = terms.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(a + b),
                    None => next.push(a),
                }
            }
            terms = next;
        }
        terms.pop().unwrap()
    }

    /// Rebuilds the expression with variables replaced where `f` returns a value.
    pub fn substitute(&self, f: &dyn Fn(Var) -> Option<Expr>) -> Expr {
        let mut memo: HashMap<u64, Expr> = HashMap::new();
        let mut last = self.clone();
        self.visit(&mut |e| {
            let rebuilt = match e.kind() {
                ExprKind::Const(_) => e.clone(),
                ExprKind::Var(v) => f(*v).unwrap_or_else(|| e.clone()),
                ExprKind::Unary(op, a) => Expr::unary(*op, memo[&a.id()].clone()),
                ExprKind::Binary(op, a, b) => Expr::binary(*op, memo[&a.id()].clone(), memo[&b.id()].clone()),
                ExprKind::Pow(a, c) => memo[&a.id()].clone().pow(*c),
            };
            memo.insert(e.id(), rebuilt.clone());
            last = rebuilt;
        });
        last
    }

    /// Sets every momentum variable to zero.
    pub fn at_zero_momenta(&self) -> Expr {
        self.substitute(&|v| v.is_momentum().then(Expr::zero))
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.id() == other.id()
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id().hash(state);
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

impl From<Var> for Expr {
    fn from(v: Var) -> Self {
        Expr::var(v)
    }
}

macro_rules! binop_impls {
    ($trait:ident, $method:ident, $op:expr) => {
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self, rhs)
            }
        }
        impl ops::$trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self, rhs.clone())
            }
        }
        impl ops::$trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, self.clone(), rhs)
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, self.clone(), rhs.clone())
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self, Expr::constant(rhs))
            }
        }
        impl ops::$trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::binary($op, self.clone(), Expr::constant(rhs))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::binary($op, Expr::constant(self), rhs)
            }
        }
        impl ops::$trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::binary($op, Expr::constant(self), rhs.clone())
            }
        }
    };
}

binop_impls!(Add, add, BinaryOp::Add);
binop_impls!(Sub, sub, BinaryOp::Sub);
binop_impls!(Mul, mul, BinaryOp::Mul);
binop_impls!(Div, div, BinaryOp::Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self.clone())
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // Debug formatting of f64 is the shortest round-tripping representation.
    write!(f, "{:?}", c)
}

/// Prints in the input grammar; `parse_scalar(e.to_string())` rebuilds `e`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            ExprKind::Const(c) if *c < 0.0 => {
                f.write_str("neg(")?;
                write_number(f, -c)?;
                f.write_str(")")
            }
            ExprKind::Const(c) => write_number(f, *c),
            ExprKind::Var(v) => write!(f, "{v}"),
            ExprKind::Unary(op, a) => write!(f, "{}({})", op.name(), a),
            ExprKind::Binary(op, a, b) => write!(f, "({} {} {})", a, op.symbol(), b),
            ExprKind::Pow(a, e) => {
                match a.kind() {
                    ExprKind::Pow(..) => write!(f, "({a})")?,
                    _ => write!(f, "{a}")?,
                }
                f.write_str("^")?;
                if *e < 0.0 {
                    f.write_str("-")?;
                }
                write_number(f, e.abs())
            }
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// Display text truncated for error messages.
pub(crate) fn short_text(e: &Expr) -> String {
    const LIMIT: usize = 160;
    let s = e.to_string();
    if s.len() <= LIMIT {
        s
    } else {
        let mut cut = LIMIT;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        format!("{}...", &s[..cut])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x1() -> Expr {
        Expr::var(Var::X(0))
    }

    #[test]
    fn hash_consing_shares_nodes() {
        let a = x1().sin() * Expr::var(Var::T(0));
        let b = x1().sin() * Expr::var(Var::T(0));
        assert_eq!(a.id(), b.id());
        assert_eq!(a, b);
    }

    #[test]
    fn folding_rules() {
        let x = x1();
        assert!((Expr::zero() * x.clone()).is_zero());
        assert_eq!(x.clone() + 0.0, x);
        assert_eq!(1.0 * x.clone(), x);
        assert_eq!(x.clone() / 1.0, x);
        assert!((x.clone() - x.clone()).is_zero());
        assert_eq!(-(-x.clone()), x);
        assert_eq!(x.clone().pow(1.0), x);
        assert!(x.clone().pow(0.0).is_one());
        assert_eq!((Expr::constant(2.0) * 3.0).as_const(), Some(6.0));
        assert_eq!((2.0 * (3.0 * x.clone())), 6.0 * x.clone());
        // division by a zero constant is left symbolic
        assert!((Expr::one() / 0.0).as_const().is_none());
    }

    #[test]
    fn sum_is_balanced() {
        let terms: Vec<Expr> = (0..64).map(|k| Expr::var(Var::X(0)) * (k as f64 + 1.0)).collect();
        let s = Expr::sum(terms);
        fn depth(e: &Expr) -> usize {
            match e.kind() {
                ExprKind::Const(_) | ExprKind::Var(_) => 1,
                ExprKind::Unary(_, a) | ExprKind::Pow(a, _) => 1 + depth(a),
                ExprKind::Binary(_, a, b) => 1 + depth(a).max(depth(b)),
            }
        }
        assert!(depth(&s) <= 9);
    }

    #[test]
    fn substitute_and_zero_momenta() {
        let p = Expr::var(Var::P { i: 0, a: 0 });
        let e = p.clone() * p.clone() + x1() * p + Expr::var(Var::T(0)).sin();
        let f = e.at_zero_momenta();
        assert_eq!(f, Expr::var(Var::T(0)).sin());
    }

    #[test]
    fn dependency_mask() {
        let e = x1() * Expr::var(Var::P { i: 1, a: 0 });
        assert!(e.depends_on(Var::X(0)));
        assert!(e.depends_on(Var::P { i: 1, a: 0 }));
        assert!(!e.depends_on(Var::T(0)));
        assert_eq!(e.variables(), vec![Var::X(0), Var::P { i: 1, a: 0 }]);
    }
}
