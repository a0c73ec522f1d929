//! Adapted derivatives, the generalized Cartan canonical connection and its
//! three covariant derivatives.
//!
//! Adapted derivatives subtract the nonlinear-connection correction:
//! `δ/δt^a = ∂/∂t^a − N1_(k)a^(b) ∂/∂p_k^b` and
//! `δ/δx^i = ∂/∂x^i − N2_(k)i^(b) ∂/∂p_k^b`.

use crate::chart::Var;
use crate::christoffel::{spatial_christoffel, temporal_christoffel};
use crate::error::GeometryError;
use crate::expr::Expr;
use crate::hamilton::{HamiltonSpace, NonlinearConnection};
use crate::tensor::{DTensor, IndexSig, Slot, SlotKind, Variance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Temporal(usize),
    Spatial(usize),
}

/// `δe/δt^a` or `δe/δx^i`.
pub fn adapted_delta(e: &Expr, direction: Direction, nlc: &NonlinearConnection) -> Expr {
    let chart = nlc.n1.chart();
    let (partial, coeff, slot) = match direction {
        Direction::Temporal(a) => (e.differentiate(Var::T(a)), &nlc.n1, a),
        Direction::Spatial(i) => (e.differentiate(Var::X(i)), &nlc.n2, i),
    };
    if e.var_mask() & chart.momentum_mask() == 0 {
        return partial;
    }
    let correction = Expr::sum(chart.momentum_vars().map(|v| match v {
        Var::P { i: k, a: b } => coeff.get(&[k, slot, b]) * e.differentiate(v),
        _ => unreachable!(),
    }));
    partial - correction
}

/// `(χ^a_bc, A^i_jc, H^i_jk, C_i(c)^j(k))`, stored `[a][b][c]`, `[i][j][c]`,
/// `[i][j][k]` and `[i][c][j][k]`.
#[derive(Debug, Clone)]
pub struct CartanCoefficients {
    pub chi: DTensor,
    pub a: DTensor,
    pub hc: DTensor,
    pub c: DTensor,
}

fn a_sig() -> IndexSig {
    IndexSig::new(&[Slot::up_x('i'), Slot::lo_x('j'), Slot::lo_t('c')])
}

fn h_sig() -> IndexSig {
    IndexSig::new(&[Slot::up_x('i'), Slot::lo_x('j'), Slot::lo_x('k')])
}

fn c_sig() -> IndexSig {
    IndexSig::new(&[Slot::lo_x('i'), Slot::lo_t('c'), Slot::up_x('j'), Slot::up_x('k')])
}

/// Coefficients from the δ-based formulas, valid on every branch.
pub fn cartan_full(space: &HamiltonSpace, nlc: &NonlinearConnection) -> Result<CartanCoefficients, GeometryError> {
    let chart = space.chart();
    let n = chart.n();
    let chi = temporal_christoffel(space.h())?;
    let g_lo = space.g().lower();
    let g_up = space.g().upper();
    let a = DTensor::from_fn(chart, a_sig(), |idx| {
        let (i, j, c) = (idx[0], idx[1], idx[2]);
        0.5 * Expr::sum(
            (0..n).map(|l| g_up.get(&[i, l]) * adapted_delta(g_lo.get(&[l, j]), Direction::Temporal(c), nlc)),
        )
    });
    // dg[j][r][k] = δg_jr/δx^k
    let dg: Vec<Vec<Vec<Expr>>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|r| {
                    (0..n)
                        .map(|k| adapted_delta(g_lo.get(&[j, r]), Direction::Spatial(k), nlc))
                        .collect()
                })
                .collect()
        })
        .collect();
    let hc = DTensor::from_fn(chart, h_sig(), |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        0.5 * Expr::sum((0..n).map(|r| g_up.get(&[i, r]) * (&dg[j][r][k] + &dg[k][r][j] - &dg[j][k][r])))
    });
    let c = DTensor::from_fn(chart, c_sig(), |idx| {
        let (i, cc, j, k) = (idx[0], idx[1], idx[2], idx[3]);
        let dp = |e: &Expr, s: usize| e.differentiate(Var::P { i: s, a: cc });
        -0.5 * Expr::sum((0..n).map(|r| {
            g_lo.get(&[i, r]) * (dp(g_up.get(&[j, r]), k) + dp(g_up.get(&[k, r]), j) - dp(g_up.get(&[j, k]), r))
        }))
    });
    Ok(CartanCoefficients { chi, a, hc, c })
}

/// `A^i_jc = (g^il/2) ∂g_lj/∂t^c`, `H = Γ`, `C = 0`.
pub fn cartan_reduced(space: &HamiltonSpace) -> Result<CartanCoefficients, GeometryError> {
    let chart = space.chart();
    let n = chart.n();
    let chi = temporal_christoffel(space.h())?;
    let g_lo = space.g().lower();
    let g_up = space.g().upper();
    let a = DTensor::from_fn(chart, a_sig(), |idx| {
        let (i, j, c) = (idx[0], idx[1], idx[2]);
        0.5 * Expr::sum((0..n).map(|l| g_up.get(&[i, l]) * g_lo.get(&[l, j]).differentiate(Var::T(c))))
    });
    Ok(CartanCoefficients {
        chi,
        a,
        hc: spatial_christoffel(space.g()).relabel("ijk"),
        c: DTensor::zeros(chart, c_sig()),
    })
}

/// Full formulas for `m = 1`, reduced formulas for `m ≥ 2`.
pub fn cartan_coefficients(
    space: &HamiltonSpace,
    nlc: &NonlinearConnection,
) -> Result<CartanCoefficients, GeometryError> {
    if space.chart().m() == 1 {
        cartan_full(space, nlc)
    } else {
        cartan_reduced(space)
    }
}

/// `"/a"`, `"|k"` and `"|^(k)_(c)"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariantKind {
    TemporalH,
    SpatialH,
    Vertical,
}

fn free_label(sig: &IndexSig, pool: &str) -> char {
    let used = sig.labels();
    pool.chars().find(|c| !used.contains(*c)).unwrap_or('?')
}

/// Covariant derivative of `t`. The new slots are appended: one lower temporal
/// slot for `TemporalH`, one lower spatial slot for `SpatialH`, and an upper
/// spatial then a lower temporal slot for `Vertical`.
pub fn covariant_derivative(
    t: &DTensor,
    kind: CovariantKind,
    coeffs: &CartanCoefficients,
    nlc: &NonlinearConnection,
) -> DTensor {
    let chart = t.chart();
    let slots: Vec<Slot> = t.sig().slots().to_vec();
    let sig = match kind {
        CovariantKind::TemporalH => t.sig().clone().push(Slot::lo_t(free_label(t.sig(), "cdefgh"))),
        CovariantKind::SpatialH => t.sig().clone().push(Slot::lo_x(free_label(t.sig(), "klmnrs"))),
        CovariantKind::Vertical => {
            let k = Slot::up_x(free_label(t.sig(), "klmnrs"));
            let partial = t.sig().clone().push(k);
            let c = Slot::lo_t(free_label(&partial, "cdefgh"));
            partial.push(c)
        }
    };
    let rank = slots.len();
    DTensor::from_fn(chart, sig, |idx| {
        let base = &idx[..rank];
        let value = t.get(base);
        let derivative = match kind {
            CovariantKind::TemporalH => adapted_delta(value, Direction::Temporal(idx[rank]), nlc),
            CovariantKind::SpatialH => adapted_delta(value, Direction::Spatial(idx[rank]), nlc),
            CovariantKind::Vertical => value.differentiate(Var::P {
                i: idx[rank],
                a: idx[rank + 1],
            }),
        };
        let mut terms = vec![derivative];
        for (pos, slot) in slots.iter().enumerate() {
            let s = base[pos];
            let range = slot.range(chart);
            for r in 0..range {
                let coefficient = match (kind, slot.kind, slot.variance) {
                    (CovariantKind::TemporalH, SlotKind::Temporal, Variance::Upper) => {
                        coeffs.chi.get(&[s, r, idx[rank]]).clone()
                    }
                    (CovariantKind::TemporalH, SlotKind::Temporal, Variance::Lower) => {
                        -coeffs.chi.get(&[r, s, idx[rank]])
                    }
                    (CovariantKind::TemporalH, SlotKind::Spatial, Variance::Upper) => {
                        coeffs.a.get(&[s, r, idx[rank]]).clone()
                    }
                    (CovariantKind::TemporalH, SlotKind::Spatial, Variance::Lower) => -coeffs.a.get(&[r, s, idx[rank]]),
                    (CovariantKind::SpatialH, SlotKind::Spatial, Variance::Upper) => {
                        coeffs.hc.get(&[s, r, idx[rank]]).clone()
                    }
                    (CovariantKind::SpatialH, SlotKind::Spatial, Variance::Lower) => -coeffs.hc.get(&[r, s, idx[rank]]),
                    (CovariantKind::Vertical, SlotKind::Spatial, Variance::Upper) => {
                        coeffs.c.get(&[r, idx[rank + 1], s, idx[rank]]).clone()
                    }
                    (CovariantKind::Vertical, SlotKind::Spatial, Variance::Lower) => {
                        -coeffs.c.get(&[s, idx[rank + 1], r, idx[rank]])
                    }
                    (_, SlotKind::Temporal, _) => break,
                };
                if coefficient.is_zero() {
                    continue;
                }
                let mut moved = base.to_vec();
                moved[pos] = r;
                terms.push(coefficient * t.get(&moved));
            }
        }
        Expr::sum(terms)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::{Chart, Point};
    use crate::expr::parse_scalar;
    use crate::hamilton::canonical_nlc;
    use crate::metric::MetricField;
    use crate::sampling::SampleBoxes;
    use std::f64::consts::FRAC_PI_4;

    fn matrix(chart: Chart, rows: &[&[&str]], sig: IndexSig) -> DTensor {
        DTensor::from_fn(chart, sig, |idx| parse_scalar(rows[idx[0]][idx[1]], chart).unwrap())
    }

    fn electro(chart: Chart, h: &[&[&str]], g: &[&[&str]], u: &[&[&str]]) -> HamiltonSpace {
        let h = MetricField::from_lower(
            "h",
            matrix(chart, h, IndexSig::new(&[Slot::lo_t('a'), Slot::lo_t('b')])),
        )
        .unwrap();
        let g = MetricField::from_lower(
            "g_lower",
            matrix(chart, g, IndexSig::new(&[Slot::lo_x('i'), Slot::lo_x('j')])),
        )
        .unwrap();
        let u = matrix(chart, u, IndexSig::new(&[Slot::up_x('i'), Slot::lo_t('a')]));
        HamiltonSpace::electrodynamic(h, g, u, Expr::zero(), 1.0).unwrap()
    }

    fn raw(chart: Chart, h: &str, hm: &str) -> HamiltonSpace {
        let h = MetricField::from_lower(
            "h",
            matrix(chart, &[&[h]], IndexSig::new(&[Slot::lo_t('a'), Slot::lo_t('b')])),
        )
        .unwrap();
        HamiltonSpace::raw(h, parse_scalar(hm, chart).unwrap()).unwrap()
    }

    fn sphere(m: usize) -> HamiltonSpace {
        let chart = Chart::new(m, 2).unwrap();
        let ones: Vec<Vec<String>> = (0..m)
            .map(|a| (0..m).map(|b| if a == b { "1".into() } else { "0".into() }).collect())
            .collect();
        let rows: Vec<Vec<&str>> = ones.iter().map(|r| r.iter().map(String::as_str).collect()).collect();
        let h: Vec<&[&str]> = rows.iter().map(Vec::as_slice).collect();
        let zeros = vec!["0"; m];
        electro(chart, &h, &[&["1", "0"], &["0", "sin(x1)^2"]], &[&zeros, &zeros])
    }

    #[test]
    fn delta_of_momentum_free_expression_is_partial() {
        let space = sphere(1);
        let nlc = canonical_nlc(&space).unwrap();
        let e = parse_scalar("x1*x2^2 + t1", space.chart()).unwrap();
        assert_eq!(
            adapted_delta(&e, Direction::Spatial(1), &nlc),
            e.differentiate(Var::X(1))
        );
    }

    #[test]
    fn delta_of_momentum_on_sphere() {
        // δp_1^1/δx^1 = −N2_(1)1^(1) = Γ^k_11 p_k^1, zero on the sphere
        let space = sphere(1);
        let chart = space.chart();
        let nlc = canonical_nlc(&space).unwrap();
        let e = parse_scalar("p2_1", chart).unwrap();
        let d = adapted_delta(&e, Direction::Spatial(1), &nlc);
        let mut pt = Point::zeros(chart);
        pt.x = vec![FRAC_PI_4, 0.0];
        pt.p[0] = vec![0.8, 0.3];
        // −N2_(2)2^(1) = Γ^k_22 p_k = −sin cos p_1
        assert!((d.evaluate(&pt).unwrap() + 0.5 * 0.8).abs() < 1e-15);
    }

    #[test]
    fn exponential_conformal_two_time() {
        let chart = Chart::new(2, 2).unwrap();
        let space = electro(
            chart,
            &[&["1", "0"], &["0", "1"]],
            &[&["exp(t1)", "0"], &["0", "exp(t1)"]],
            &[&["0", "0"], &["0", "0"]],
        );
        let nlc = canonical_nlc(&space).unwrap();
        let cc = cartan_coefficients(&space, &nlc).unwrap();
        let pt = SampleBoxes::defaults(chart).sample_points(chart, 3, 1).remove(0);
        let a = cc.a.evaluate(&pt).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let d = if i == j { 0.5 } else { 0.0 };
                assert!((a.get(&[i, j, 0]) - d).abs() < 1e-15);
                assert_eq!(a.get(&[i, j, 1]), 0.0);
            }
        }
        assert!(cc.hc.is_structurally_zero());
        assert!(cc.c.is_structurally_zero());
    }

    #[test]
    fn momentum_free_single_time_metric_has_no_c() {
        let space = raw(
            Chart::new(1, 2).unwrap(),
            "exp(t1)",
            "exp(-t1)*(p1_1^2 + x1^2*p2_1^2) + x2*p1_1",
        );
        let nlc = canonical_nlc(&space).unwrap();
        assert!(cartan_full(&space, &nlc).unwrap().c.is_structurally_zero());
    }

    #[test]
    fn sphere_two_time_coefficients() {
        let space = sphere(2);
        let nlc = canonical_nlc(&space).unwrap();
        let cc = cartan_coefficients(&space, &nlc).unwrap();
        assert!(cc.a.is_structurally_zero());
        let gamma = spatial_christoffel(space.g());
        assert_eq!(cc.hc.entries(), gamma.entries());
        // the δ-based formulas agree because g is momentum-free
        let full = cartan_full(&space, &nlc).unwrap();
        let pts = SampleBoxes::defaults(space.chart()).sample_points(space.chart(), 5, 20);
        for pt in &pts {
            assert_eq!(full.hc.evaluate(pt).unwrap().values, cc.hc.evaluate(pt).unwrap().values);
            assert!(full.c.evaluate(pt).unwrap().max_abs() == 0.0);
        }
    }

    #[test]
    fn metric_is_parallel_in_every_direction() {
        let space = raw(
            Chart::new(1, 2).unwrap(),
            "exp(t1)",
            "(1 + p1_1^2 + t1*p2_1^2)*(p1_1^2 + x1*p2_1^2) + x2*p1_1",
        );
        let chart = space.chart();
        let nlc = canonical_nlc(&space).unwrap();
        let cc = cartan_coefficients(&space, &nlc).unwrap();
        assert!(!cc.c.is_structurally_zero());
        let g = space.g();
        let checks = [
            covariant_derivative(g.lower(), CovariantKind::SpatialH, &cc, &nlc),
            covariant_derivative(g.lower(), CovariantKind::TemporalH, &cc, &nlc),
            covariant_derivative(g.upper(), CovariantKind::Vertical, &cc, &nlc),
            covariant_derivative(space.h().lower(), CovariantKind::TemporalH, &cc, &nlc),
            covariant_derivative(space.h().lower(), CovariantKind::SpatialH, &cc, &nlc),
            covariant_derivative(space.h().lower(), CovariantKind::Vertical, &cc, &nlc),
        ];
        assert_eq!(checks[2].sig().labels(), "ijkc");
        let pts = SampleBoxes::defaults(chart).sample_points(chart, 9, 25);
        for pt in &pts {
            for t in &checks {
                let v = t.evaluate(pt).unwrap();
                assert!(v.max_abs() < 1e-9, "{} {}", t.sig().labels(), v.max_abs());
            }
        }
    }

    #[test]
    fn scalar_spatial_derivative_is_delta() {
        let space = sphere(1);
        let chart = space.chart();
        let nlc = canonical_nlc(&space).unwrap();
        let cc = cartan_coefficients(&space, &nlc).unwrap();
        let f = parse_scalar("t1*x2 + p1_1*p2_1", chart).unwrap();
        let d = covariant_derivative(&DTensor::scalar(chart, f.clone()), CovariantKind::SpatialH, &cc, &nlc);
        for k in 0..2 {
            assert_eq!(d.get(&[k]), &adapted_delta(&f, Direction::Spatial(k), &nlc));
        }
    }
}
