use std::cell::RefCell;
use std::collections::{HashMap, HashSet};

use super::{BinaryOp, Expr, ExprKind, UnaryOp};
use crate::chart::Var;

/// One top-level `differentiate` call observed while recording.
#[derive(Debug, Clone)]
pub struct DerivativeRecord {
    pub source: Expr,
    pub var: Var,
    pub derivative: Expr,
}

#[derive(Default)]
struct Recorder {
    seen: HashSet<(u64, Var)>,
    records: Vec<DerivativeRecord>,
}

thread_local! {
    // Derivatives are pure functions of (node, variable); ids are never reused.
    static CACHE: RefCell<HashMap<(u64, Var), Expr>> = RefCell::new(HashMap::new());
    static RECORDER: RefCell<Option<Recorder>> = const { RefCell::new(None) };
}

/// Runs `f` and returns every distinct derivative it requested through
/// [`Expr::differentiate`], in request order.
pub fn record_derivatives<R>(f: impl FnOnce() -> R) -> (R, Vec<DerivativeRecord>) {
    let previous = RECORDER.with(|r| r.borrow_mut().replace(Recorder::default()));
    let out = f();
    let recorder = RECORDER.with(|r| std::mem::replace(&mut *r.borrow_mut(), previous));
    (out, recorder.map(|r| r.records).unwrap_or_default())
}

impl Expr {
    /// Exact partial derivative with respect to `v`.
    pub fn differentiate(&self, v: Var) -> Expr {
        let d = derive(self, v);
        RECORDER.with(|r| {
            if let Some(rec) = r.borrow_mut().as_mut() {
                if rec.seen.insert((self.id(), v)) {
                    rec.records.push(DerivativeRecord {
                        source: self.clone(),
                        var: v,
                        derivative: d.clone(),
                    });
                }
            }
        });
        d
    }
}

fn derive(e: &Expr, v: Var) -> Expr {
    if !e.depends_on(v) {
        return Expr::zero();
    }
    if let Some(hit) = CACHE.with(|c| c.borrow().get(&(e.id(), v)).cloned()) {
        return hit;
    }
    let d = match e.kind() {
        ExprKind::Const(_) => Expr::zero(),
        ExprKind::Var(w) => {
            if *w == v {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        ExprKind::Unary(op, a) => {
            let da = derive(a, v);
            match op {
                UnaryOp::Neg => -da,
                UnaryOp::Sin => a.clone().cos() * da,
                UnaryOp::Cos => -(a.clone().sin() * da),
                UnaryOp::Exp => e.clone() * da,
                UnaryOp::Log => da / a,
                UnaryOp::Sqrt => da / (2.0 * e.clone()),
            }
        }
        ExprKind::Binary(op, a, b) => {
            let da = derive(a, v);
            let db = derive(b, v);
            match op {
                BinaryOp::Add => da + db,
                BinaryOp::Sub => da - db,
                BinaryOp::Mul => da * b + a * db,
                BinaryOp::Div => {
                    if db.is_zero() {
                        da / b
                    } else {
                        (da * b - a * db) / b.clone().pow(2.0)
                    }
                }
            }
        }
        ExprKind::Pow(a, c) => {
            let da = derive(a, v);
            *c * a.clone().pow(c - 1.0) * da
        }
    };
    CACHE.with(|c| c.borrow_mut().insert((e.id(), v), d.clone()));
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Chart, Point};
    use crate::expr::parse_scalar;

    fn chart() -> Chart {
        Chart::new(1, 1).unwrap()
    }

    fn eval_at_x(e: &Expr, x: f64) -> f64 {
        let mut pt = Point::zeros(chart());
        pt.x[0] = x;
        pt.t[0] = 0.7;
        pt.p[0][0] = 0.3;
        e.evaluate(&pt).unwrap()
    }

    #[test]
    fn power_rule() {
        let e = parse_scalar("x1^3", chart()).unwrap();
        let d = e.differentiate(Var::X(0));
        assert_eq!(d, parse_scalar("3*x1^2", chart()).unwrap());
    }

    #[test]
    fn chain_rule_sin_squared() {
        let e = parse_scalar("sin(x1)^2", chart()).unwrap();
        let d = e.differentiate(Var::X(0));
        for x in [0.1, 0.5, 1.3] {
            assert!((eval_at_x(&d, x) - 2.0 * x.sin() * x.cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn product_rule_bilinear() {
        let e = parse_scalar("t1*p1_1", chart()).unwrap();
        assert_eq!(e.differentiate(Var::P { i: 0, a: 0 }), Expr::var(Var::T(0)));
    }

    #[test]
    fn recording_collects_top_level_calls() {
        let e = parse_scalar("x1*t1 + sin(x1)", chart()).unwrap();
        let (_, recs) = record_derivatives(|| {
            e.differentiate(Var::X(0));
            e.differentiate(Var::X(0));
            e.differentiate(Var::T(0));
        });
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].var, Var::X(0));
        assert_eq!(recs[1].var, Var::T(0));
    }
}
