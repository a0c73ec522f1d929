use std::collections::HashMap;

use super::{apply_pow, short_text, BinaryOp, Expr, ExprKind, UnaryOp};
use crate::chart::{Point, Var};
use crate::error::EvalError;

#[derive(Debug, Clone, Copy)]
enum Instr {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
    Pow(usize, f64),
}

/// A set of expressions flattened into one topologically ordered instruction
/// list. Shared subexpressions are evaluated once per point.
#[derive(Debug, Clone)]
pub struct Tape {
    instrs: Vec<Instr>,
    nodes: Vec<Expr>,
    roots: Vec<usize>,
}

impl Tape {
    pub fn new<'a, I>(roots: I) -> Tape
    where
        I: IntoIterator<Item = &'a Expr>,
    {
        let mut slot_of: HashMap<u64, usize> = HashMap::new();
        let mut instrs = Vec::new();
        let mut nodes = Vec::new();
        let mut root_slots = Vec::new();
        for root in roots {
            let mut stack = vec![(root.clone(), false)];
            while let Some((e, expanded)) = stack.pop() {
                if slot_of.contains_key(&e.id()) {
                    continue;
                }
                if expanded {
                    let instr = match e.kind() {
                        ExprKind::Const(c) => Instr::Const(*c),
                        ExprKind::Var(v) => Instr::Var(*v),
                        ExprKind::Unary(op, a) => Instr::Unary(*op, slot_of[&a.id()]),
                        ExprKind::Binary(op, a, b) => Instr::Binary(*op, slot_of[&a.id()], slot_of[&b.id()]),
                        ExprKind::Pow(a, c) => Instr::Pow(slot_of[&a.id()], *c),
                    };
                    slot_of.insert(e.id(), instrs.len());
                    instrs.push(instr);
                    nodes.push(e);
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
            root_slots.push(slot_of[&root.id()]);
        }
        Tape {
            instrs,
            nodes,
            roots: root_slots,
        }
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn root_count(&self) -> usize {
        self.roots.len()
    }

    /// Values of every root at `pt`, in the order the roots were given.
    pub fn evaluate(&self, pt: &Point) -> Result<Vec<f64>, EvalError> {
        let mut scratch = Vec::with_capacity(self.instrs.len());
        self.evaluate_with(pt, &mut scratch)?;
        Ok(self.roots.iter().map(|&r| scratch[r]).collect())
    }

    /// Like [`Tape::evaluate`], reusing `scratch` between calls.
    pub fn evaluate_with(&self, pt: &Point, scratch: &mut Vec<f64>) -> Result<(), EvalError> {
        scratch.clear();
        for (k, instr) in self.instrs.iter().enumerate() {
            let value = match *instr {
                Instr::Const(c) => Some(c),
                Instr::Var(v) => Some(pt.get(v)),
                Instr::Unary(op, a) => op.apply(scratch[a]),
                Instr::Binary(op, a, b) => op.apply(scratch[a], scratch[b]),
                Instr::Pow(a, c) => apply_pow(scratch[a], c),
            };
            match value {
                Some(v) if v.is_finite() => scratch.push(v),
                _ => return Err(self.domain_error(k)),
            }
        }
        Ok(())
    }

    pub fn root_values<'s>(&'s self, scratch: &'s [f64]) -> impl Iterator<Item = f64> + 's {
        self.roots.iter().map(move |&r| scratch[r])
    }

    fn domain_error(&self, k: usize) -> EvalError {
        let op = match self.instrs[k] {
            Instr::Const(_) => "constant",
            Instr::Var(_) => "variable",
            Instr::Unary(op, _) => op.name(),
            Instr::Binary(op, _, _) => match op {
                BinaryOp::Add => "add",
                BinaryOp::Sub => "sub",
                BinaryOp::Mul => "mul",
                BinaryOp::Div => "div",
            },
            Instr::Pow(..) => "pow",
        };
        EvalError::Domain {
            op,
            subexpr: short_text(&self.nodes[k]),
        }
    }
}

impl Expr {
    /// IEEE double value at `pt`; domain violations name the failing subexpression.
    pub fn evaluate(&self, pt: &Point) -> Result<f64, EvalError> {
        Ok(Tape::new([self]).evaluate(pt)?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Chart;
    use crate::expr::parse_scalar;

    #[test]
    fn identity_cases() {
        let chart = Chart::new(1, 1).unwrap();
        let pt = Point::zeros(chart);
        assert_eq!(parse_scalar("exp(t1)", chart).unwrap().evaluate(&pt).unwrap(), 1.0);
        let mut pt = Point::zeros(chart);
        pt.x[0] = std::f64::consts::FRAC_PI_2;
        assert_eq!(parse_scalar("sin(x1)^2", chart).unwrap().evaluate(&pt).unwrap(), 1.0);
    }

    #[test]
    fn reciprocal_at_zero_is_domain_error() {
        let chart = Chart::new(1, 1).unwrap();
        let err = parse_scalar("1/x1", chart)
            .unwrap()
            .evaluate(&Point::zeros(chart))
            .unwrap_err();
        match err {
            EvalError::Domain { op, subexpr } => {
                assert_eq!(op, "div");
                assert!(subexpr.contains("x1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_of_negative_names_subexpression() {
        let chart = Chart::new(1, 1).unwrap();
        let mut pt = Point::zeros(chart);
        pt.x[0] = -1.0;
        let err = parse_scalar("1 + log(x1)", chart).unwrap().evaluate(&pt).unwrap_err();
        assert_eq!(
            err,
            EvalError::Domain {
                op: "log",
                subexpr: "log(x1)".into()
            }
        );
    }

    #[test]
    fn tape_shares_subexpressions() {
        let chart = Chart::new(1, 2).unwrap();
        let a = parse_scalar("sin(x1)*x2", chart).unwrap();
        let b = parse_scalar("sin(x1)*x2 + 1", chart).unwrap();
        let tape = Tape::new([&a, &b]);
        // x1, sin, x2, mul, 1, add
        assert_eq!(tape.len(), 6);
        let mut pt = Point::zeros(chart);
        pt.x = vec![0.5, 2.0];
        let v = tape.evaluate(&pt).unwrap();
        assert_eq!(v[1] - v[0], 1.0);
    }
}
