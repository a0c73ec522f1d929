use dualjet::cartan::{covariant_derivative, CovariantKind};
use dualjet::christoffel::{
    christoffel_curvature_spatial, christoffel_curvature_temporal, spatial_christoffel, temporal_christoffel,
};
use dualjet::expr::{BinaryOp, UnaryOp};
use dualjet::hamilton::{aux_t, canonical_nlc_electrodynamic, canonical_nlc_general, decompose_electrodynamic};
use dualjet::metric::{symbolic_inverse, MetricField};
use dualjet::sampling::SampleBoxes;
use dualjet::tensor::{DTensor, IndexSig, Slot};
use dualjet::torsion_curvature::{curvature_components, torsion_components, ConnectionPack};
use dualjet::verify::{antisymmetry_residual, max_abs, max_abs_difference, max_relative_difference};
use dualjet::{parse_scalar, Chart, Expr, HamiltonSpace, Point, Var};
use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn config(cases: u32, seed: u64) -> ProptestConfig {
    ProptestConfig {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

#[derive(Debug, Clone)]
enum Tree {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Tree>),
    Binary(BinaryOp, Box<Tree>, Box<Tree>),
    Pow(Box<Tree>, f64),
}

const CHART_VARS: [Var; 5] = [
    Var::T(0),
    Var::X(0),
    Var::X(1),
    Var::P { i: 0, a: 0 },
    Var::P { i: 1, a: 0 },
];

fn chart() -> Chart {
    Chart::new(1, 2).unwrap()
}

fn build(tree: &Tree) -> Expr {
    match tree {
        Tree::Const(c) => Expr::constant(*c),
        Tree::Var(k) => Expr::var(CHART_VARS[*k]),
        Tree::Unary(op, a) => Expr::unary(*op, build(a)),
        Tree::Binary(op, a, b) => Expr::binary(*op, build(a), build(b)),
        Tree::Pow(a, e) => build(a).pow(*e),
    }
}

fn tree() -> impl Strategy<Value = Tree> {
    let leaf = prop_oneof![
        (-2.0..2.0f64).prop_map(Tree::Const),
        (0..CHART_VARS.len()).prop_map(Tree::Var)
    ];
    leaf.prop_recursive(6, 48, 2, |inner| {
        let unary = prop_oneof![
            Just(UnaryOp::Neg),
            Just(UnaryOp::Sin),
            Just(UnaryOp::Cos),
            Just(UnaryOp::Exp),
            Just(UnaryOp::Log),
            Just(UnaryOp::Sqrt),
        ];
        let binary = prop_oneof![
            Just(BinaryOp::Add),
            Just(BinaryOp::Sub),
            Just(BinaryOp::Mul),
            Just(BinaryOp::Div)
        ];
        let exponent = prop_oneof![(-3i32..=4).prop_map(f64::from), Just(0.5), Just(-1.5), Just(2.5)];
        prop_oneof![
            (unary, inner.clone()).prop_map(|(op, a)| Tree::Unary(op, Box::new(a))),
            (binary, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Tree::Binary(op, Box::new(a), Box::new(b))),
            (inner, exponent).prop_map(|(a, e)| Tree::Pow(Box::new(a), e)),
        ]
    })
}

fn point() -> impl Strategy<Value = Point> {
    (0.5..1.5f64, 0.5..1.2f64, 0.5..1.2f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_map(|(t, x1, x2, p1, p2)| Point::new(chart(), vec![t], vec![x1, x2], vec![vec![p1, p2]]).unwrap())
}

/// Values of `e` and of its first three derivatives in `v` are moderate, so a
/// central difference with step 1e-6 is accurate to far better than 1e-6.
fn well_conditioned(e: &Expr, v: Var, pt: &Point) -> bool {
    let mut d = e.clone();
    for _ in 0..4 {
        match d.evaluate(pt) {
            Ok(x) if x.abs() < 1e3 => {}
            _ => return false,
        }
        d = d.differentiate(v);
    }
    [1e-3, -1e-3].iter().all(|h| e.evaluate(&pt.shifted(v, *h)).is_ok())
}

proptest! {
    #![proptest_config(config(100, 0x0d1f))]

    #[test]
    fn derivatives_match_central_differences(t in tree(), pt in point(), k in 0..CHART_VARS.len()) {
        let e = build(&t);
        let v = CHART_VARS[k];
        prop_assume!(well_conditioned(&e, v, &pt));
        let eps = 1e-6;
        let symbolic = e.differentiate(v).evaluate(&pt).unwrap();
        let fd = (e.evaluate(&pt.shifted(v, eps)).unwrap() - e.evaluate(&pt.shifted(v, -eps)).unwrap()) / (2.0 * eps);
        prop_assert!((symbolic - fd).abs() / symbolic.abs().max(1.0) < 1e-6, "{e}: {symbolic} vs {fd}");
    }

    #[test]
    fn differentiation_is_linear(
        t1 in tree(), t2 in tree(), pt in point(), k in 0..CHART_VARS.len(), a in -3.0..3.0f64, b in -3.0..3.0f64
    ) {
        let (e1, e2) = (build(&t1), build(&t2));
        let v = CHART_VARS[k];
        let combined = (a * &e1 + b * &e2).differentiate(v).evaluate(&pt);
        let (d1, d2) = (e1.differentiate(v).evaluate(&pt), e2.differentiate(v).evaluate(&pt));
        if let (Ok(lhs), Ok(d1), Ok(d2)) = (combined, d1, d2) {
            let rhs = a * d1 + b * d2;
            let scale = (a * d1).abs().max((b * d2).abs()).max(1.0);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn mixed_partials_commute(t in tree(), pt in point(), u in 0..CHART_VARS.len(), w in 0..CHART_VARS.len()) {
        let e = build(&t);
        let (u, w) = (CHART_VARS[u], CHART_VARS[w]);
        let uw = e.differentiate(u).differentiate(w).evaluate(&pt);
        let wu = e.differentiate(w).differentiate(u).evaluate(&pt);
        match (uw, wu) {
            (Ok(a), Ok(b)) => {
                prop_assume!(a.abs() < 1e6);
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{e}: {a} vs {b}");
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "domain differs: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn printed_expressions_parse_back(t in tree(), pt in point()) {
        let e = build(&t);
        let reparsed = parse_scalar(&e.to_string(), chart()).unwrap();
        prop_assert_eq!(reparsed.evaluate(&pt).ok(), e.evaluate(&pt).ok());
    }
}

/// A random electrodynamic space whose metrics are positive definite on the
/// default sample boxes.
#[derive(Debug, Clone)]
struct SpaceSpec {
    m: usize,
    n: usize,
    h_diag: Vec<(f64, f64)>,
    g_diag: Vec<(f64, f64, f64)>,
    g_off: f64,
    u: Vec<f64>,
    f: f64,
}

fn space_spec() -> impl Strategy<Value = SpaceSpec> {
    (1..=2usize, 1..=2usize).prop_flat_map(|(m, n)| {
        (
            proptest::collection::vec((1.0..2.0f64, 0.0..0.5f64), m),
            proptest::collection::vec((2.0..3.0f64, -0.5..0.5f64, -0.5..0.5f64), n),
            -0.5..0.5f64,
            proptest::collection::vec(prop_oneof![Just(0.0), -1.0..1.0f64], m * n),
            -1.0..1.0f64,
        )
            .prop_map(move |(h_diag, g_diag, g_off, u, f)| SpaceSpec {
                m,
                n,
                h_diag,
                g_diag,
                g_off,
                u,
                f,
            })
    })
}

impl SpaceSpec {
    fn chart(&self) -> Chart {
        Chart::new(self.m, self.n).unwrap()
    }

    fn space(&self) -> HamiltonSpace {
        let chart = self.chart();
        let parse = |s: String| parse_scalar(&s, chart).unwrap();
        let h = DTensor::from_fn(chart, IndexSig::new(&[Slot::lo_t('a'), Slot::lo_t('b')]), |i| {
            if i[0] == i[1] {
                let (c, k) = self.h_diag[i[0]];
                parse(format!("{c} + {k}*t{}^2", i[0] + 1))
            } else {
                Expr::zero()
            }
        });
        let last = self.m;
        let g = DTensor::from_fn(chart, IndexSig::new(&[Slot::lo_x('i'), Slot::lo_x('j')]), |i| {
            if i[0] == i[1] {
                let (c, a, b) = self.g_diag[i[0]];
                parse(format!(
                    "{c} + {a}*sin(x1*x{n}) + {b}*t{last}*x{k}",
                    n = self.n,
                    k = i[0] + 1
                ))
            } else {
                parse(format!("{}*cos(x1 + t1)", self.g_off))
            }
        });
        let u = DTensor::from_fn(chart, IndexSig::new(&[Slot::up_x('i'), Slot::lo_t('a')]), |i| {
            let c = self.u[i[0] * self.m + i[1]];
            if c == 0.0 {
                Expr::zero()
            } else {
                parse(format!("{c}*x{}*t{}", self.n, i[1] + 1))
            }
        });
        let h = MetricField::from_lower("h", h).unwrap();
        let g = MetricField::from_lower("g_lower", g).unwrap();
        HamiltonSpace::electrodynamic(h, g, u, parse(format!("{}*x1^2", self.f)), 1.0).unwrap()
    }

    fn points(&self, count: usize) -> Vec<Point> {
        SampleBoxes::defaults(self.chart()).sample_points(self.chart(), 11, count)
    }
}

fn swap_last_two(t: &DTensor) -> DTensor {
    let r = t.rank();
    DTensor::from_fn(t.chart(), t.sig().clone(), |i| {
        let mut s = i.to_vec();
        s.swap(r - 2, r - 1);
        t.get(&s).clone()
    })
}

proptest! {
    #![proptest_config(config(24, 0x5ace))]

    #[test]
    fn christoffel_symmetry_and_curvature_antisymmetry(spec in space_spec()) {
        let space = spec.space();
        let pts = spec.points(100);
        let gamma = spatial_christoffel(space.g());
        let chi = temporal_christoffel(space.h()).unwrap();
        for c in [&gamma, &chi] {
            prop_assert_eq!(max_abs_difference(c, &swap_last_two(c), &pts).unwrap(), 0.0);
        }
        let frak = christoffel_curvature_spatial(&gamma);
        let chi_curv = christoffel_curvature_temporal(&chi);
        prop_assert!(antisymmetry_residual(&frak, 2, 3, &pts).unwrap() <= 1e-12);
        prop_assert!(antisymmetry_residual(&chi_curv, 2, 3, &pts).unwrap() <= 1e-12);
    }

    #[test]
    fn double_inverse_is_identity(spec in space_spec()) {
        let space = spec.space();
        let g = space.g().lower();
        let back = symbolic_inverse(&symbolic_inverse(g).unwrap()).unwrap();
        prop_assert!(max_relative_difference(&back, g, &spec.points(100)).unwrap() < 1e-10);
    }

    #[test]
    fn vertical_metric_factorizes(spec in space_spec()) {
        let space = spec.space();
        let chart = spec.chart();
        let product = DTensor::from_fn(chart, space.vertical_metric().sig().clone(), |i| {
            space.h().lower().get(&i[..2]) * space.g().upper().get(&i[2..])
        });
        prop_assert!(max_abs_difference(&space.vertical_metric(), &product, &spec.points(100)).unwrap() < 1e-12);
    }

    #[test]
    fn aux_tensor_is_symmetric_and_n1_linear(spec in space_spec()) {
        let space = spec.space();
        let pts = spec.points(50);
        let t = aux_t(&space).unwrap();
        prop_assert_eq!(max_abs_difference(&t, &swap_first_two(&t), &pts).unwrap(), 0.0);
        let nlc = canonical_nlc_electrodynamic(&space).unwrap();
        prop_assert!(dualjet::verify::homogeneity_residual(&nlc.n1, 2.5, &pts).unwrap() < 1e-15);
    }

    #[test]
    fn metrical_conditions_and_leibniz(spec in space_spec()) {
        let space = spec.space();
        let pts = spec.points(100);
        let pack = ConnectionPack::build(&space).unwrap();
        for check in dualjet::verify::metric_condition_suite(&space, &pack, &pts, 1e-9).unwrap() {
            prop_assert!(check.pass, "{:?}", check);
        }
        // (f g_ij)|k = f|k g_ij + f g_ij|k
        let chart = spec.chart();
        let f = parse_scalar("x1*t1 + p1_1", chart).unwrap();
        let g = space.g().lower();
        let fg = g.map(|e| &f * e);
        let d = |t: &DTensor| covariant_derivative(t, CovariantKind::SpatialH, &pack.coeffs, &pack.nlc);
        let lhs = d(&fg);
        let df = d(&DTensor::scalar(chart, f.clone()));
        let dg = d(g);
        let rhs = DTensor::from_fn(chart, lhs.sig().clone(), |i| {
            df.get(&[i[2]]) * g.get(&i[..2]) + &f * dg.get(i)
        });
        prop_assert!(max_abs_difference(&lhs, &rhs, &pts).unwrap() < 1e-10);
    }

    #[test]
    fn table_identities_and_u0_reduction(spec in space_spec()) {
        let space = spec.space();
        let pts = spec.points(40);
        let pack = ConnectionPack::build(&space).unwrap();
        let torsion = torsion_components(&space, &pack);
        let curvature = curvature_components(&space, &pack);
        let tol = if spec.m >= 2 { 1e-12 } else { 1e-9 };
        for check in dualjet::verify::verify_identities(&[&torsion, &curvature], &pts, tol).unwrap() {
            prop_assert!(check.pass, "{:?}", check);
        }
        if spec.u.iter().all(|&c| c == 0.0) {
            prop_assert!(max_abs(pack.t_aux.as_ref().unwrap(), &pts).unwrap() == 0.0);
            let r_ij = torsion.get("torsion.R_ij").unwrap();
            let oracle = DTensor::from_fn(spec.chart(), r_ij.sig().clone(), |i| {
                -Expr::sum((0..spec.n).map(|k| pack.frak.get(&[k, i[0], i[1], i[2]]) * Expr::var(Var::P { i: k, a: i[3] })))
            });
            prop_assert!(max_abs_difference(r_ij, &oracle, &pts).unwrap() < 1e-10);
        }
        if let Some(r_ab) = torsion.get("torsion.R_ab") {
            prop_assert!(dualjet::verify::homogeneity_residual(r_ab, -0.75, &pts).unwrap() < 1e-15);
        }
    }
}

fn swap_first_two(t: &DTensor) -> DTensor {
    DTensor::from_fn(t.chart(), t.sig().clone(), |i| {
        let mut s = i.to_vec();
        s.swap(0, 1);
        t.get(&s).clone()
    })
}

/// Random quadratic single-time Hamiltonians with time- and position-dependent
/// coefficients.
fn quadratic_hamiltonian() -> impl Strategy<Value = (usize, String)> {
    (1..=2usize, 1.0..2.0f64, -0.4..0.4f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(n, a, b, c, d)| {
        let h = if n == 1 {
            format!("exp(t1)*({a} + {b}*sin(x1*t1))*p1_1^2 + {c}*x1*t1*p1_1 + {d}*cos(x1)")
        } else {
            format!(
                "exp(t1)*(({a} + x2^2)*p1_1^2 + 2*{b}*t1*p1_1*p2_1 + ({a} + {b}*sin(x1))*p2_1^2) + {c}*x1*p2_1 + {d}*t1*x2"
            )
        };
        (n, h)
    })
}

proptest! {
    #![proptest_config(config(24, 0xd0a1))]

    #[test]
    fn general_and_reduced_n2_agree((n, src) in quadratic_hamiltonian()) {
        let chart = Chart::new(1, n).unwrap();
        let h = MetricField::from_lower(
            "h",
            DTensor::from_fn(chart, IndexSig::new(&[Slot::lo_t('a'), Slot::lo_t('b')]), |_| parse_scalar("exp(t1)", chart).unwrap()),
        )
        .unwrap();
        let space = HamiltonSpace::raw(h.clone(), parse_scalar(&src, chart).unwrap()).unwrap();
        let pts = SampleBoxes::defaults(chart).sample_points(chart, 3, 100);
        let general = canonical_nlc_general(&space).unwrap();
        let reduced = canonical_nlc_electrodynamic(&decompose_electrodynamic(&space, &pts).unwrap().into_space(h).unwrap()).unwrap();
        prop_assert!(max_relative_difference(&general.n2, &reduced.n2, &pts).unwrap() < 1e-9);
        prop_assert!(max_relative_difference(&general.n1, &reduced.n1, &pts).unwrap() < 1e-12);
    }
}
