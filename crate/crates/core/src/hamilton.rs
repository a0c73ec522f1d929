//! Multi-time Hamilton spaces: the space definition, the fundamental vertical
//! metrical d-tensor, Kronecker h-regularity, electrodynamic decomposition and
//! the canonical nonlinear connection.

use crate::chart::{Chart, Point, Var};
use crate::christoffel::{spatial_christoffel, temporal_christoffel};
use crate::error::GeometryError;
use crate::expr::Expr;
use crate::metric::MetricField;
use crate::tensor::{DTensor, IndexSig, Slot, TensorEvaluator};

/// Third momentum derivatives above this magnitude make a Hamiltonian non-quadratic.
pub const NON_QUADRATIC_THRESHOLD: f64 = 1e-10;

pub(crate) fn p(i: usize, a: usize) -> Expr {
    Expr::var(Var::P { i, a })
}

/// Electrodynamic data `H = (1/mc) h_ab g^ij p_i^a p_j^b + U^(i)_(a) p_i^a + F`.
#[derive(Debug, Clone)]
pub struct Electrodynamic {
    /// The metric as supplied, before the `1/mc` factor.
    pub g: MetricField,
    /// `U^(i)_(a)`, stored `[i][a]`.
    pub u: DTensor,
    pub f: Expr,
    pub mc: f64,
}

#[derive(Debug, Clone)]
pub enum Body {
    Raw { hamiltonian: Expr },
    Electrodynamic(Electrodynamic),
}

#[derive(Debug, Clone)]
pub struct HamiltonSpace {
    chart: Chart,
    h: MetricField,
    body: Body,
    g: MetricField,
    hamiltonian: Expr,
}

fn check_mask(what: &str, entries: &[Expr], allowed: u32, detail: &str) -> Result<(), GeometryError> {
    if entries.iter().any(|e| e.var_mask() & !allowed != 0) {
        return Err(GeometryError::Dependency {
            what: what.to_string(),
            detail: detail.to_string(),
        });
    }
    Ok(())
}

fn check_temporal_metric(h: &MetricField) -> Result<(), GeometryError> {
    let chart = h.chart();
    check_mask(
        h.name(),
        h.lower().entries(),
        chart.temporal_mask(),
        "entries may depend on t only",
    )
}

/// `G_(a)(b)^(i)(j) = (1/2) ∂²H/∂p_i^a ∂p_j^b`, stored `[a][b][i][j]`.
pub fn vertical_metric_of(chart: Chart, hamiltonian: &Expr) -> DTensor {
    let sig = IndexSig::new(&[Slot::lo_t('a'), Slot::lo_t('b'), Slot::up_x('i'), Slot::up_x('j')]);
    DTensor::from_fn(chart, sig, |idx| {
        let (u, v) = (Var::P { i: idx[2], a: idx[0] }, Var::P { i: idx[3], a: idx[1] });
        // one differentiation order for both halves keeps G structurally symmetric
        let (first, second) = if (idx[0], idx[2]) <= (idx[1], idx[3]) {
            (u, v)
        } else {
            (v, u)
        };
        0.5 * hamiltonian.differentiate(first).differentiate(second)
    })
}

impl HamiltonSpace {
    /// A raw Hamiltonian; only single-time charts admit this form.
    pub fn raw(h: MetricField, hamiltonian: Expr) -> Result<Self, GeometryError> {
        let chart = h.chart();
        if chart.m() != 1 {
            return Err(GeometryError::RawRequiresSingleTime { m: chart.m() });
        }
        check_temporal_metric(&h)?;
        let h11 = h.lower().get(&[0, 0]).clone();
        let big_g = vertical_metric_of(chart, &hamiltonian);
        let sig = IndexSig::new(&[Slot::up_x('i'), Slot::up_x('j')]);
        let g_upper = DTensor::from_fn(chart, sig, |idx| big_g.get(&[0, 0, idx[0], idx[1]]) / &h11);
        let g = MetricField::from_upper("g_upper", g_upper)?;
        Ok(HamiltonSpace {
            chart,
            h,
            body: Body::Raw {
                hamiltonian: hamiltonian.clone(),
            },
            g,
            hamiltonian,
        })
    }

    pub fn electrodynamic(h: MetricField, g: MetricField, u: DTensor, f: Expr, mc: f64) -> Result<Self, GeometryError> {
        let chart = h.chart();
        check_temporal_metric(&h)?;
        let base = chart.temporal_mask() | chart.spatial_mask();
        check_mask(
            g.name(),
            g.lower().entries(),
            base,
            "entries may depend on t and x only",
        )?;
        check_mask(
            g.name(),
            g.upper().entries(),
            base,
            "entries may depend on t and x only",
        )?;
        if u.dims() != [chart.n(), chart.m()] {
            return Err(GeometryError::Shape {
                what: "U".into(),
                expected: chart.n(),
            });
        }
        check_mask("U", u.entries(), base, "entries may depend on t and x only")?;
        check_mask("F", std::slice::from_ref(&f), base, "may depend on t and x only")?;
        if !(mc.is_finite() && mc > 0.0) {
            return Err(GeometryError::InvalidParameter {
                name: "mc".into(),
                detail: format!("must be a positive real, got {mc}"),
            });
        }
        let effective = if mc == 1.0 { g.clone() } else { g.scaled_upper(mc)? };
        let (m, n) = (chart.m(), chart.n());
        let mut terms = Vec::new();
        for a in 0..m {
            for b in 0..m {
                for i in 0..n {
                    for j in 0..n {
                        terms.push(h.lower().get(&[a, b]) * effective.upper().get(&[i, j]) * p(i, a) * p(j, b));
                    }
                }
            }
        }
        for i in 0..n {
            for a in 0..m {
                terms.push(u.get(&[i, a]) * p(i, a));
            }
        }
        terms.push(f.clone());
        let hamiltonian = Expr::sum(terms);
        Ok(HamiltonSpace {
            chart,
            h,
            body: Body::Electrodynamic(Electrodynamic { g, u, f, mc }),
            g: effective,
            hamiltonian,
        })
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn h(&self) -> &MetricField {
        &self.h
    }

    /// The spatial metric of the factorization `G = h_ab g^ij` (including `1/mc`).
    pub fn g(&self) -> &MetricField {
        &self.g
    }

    pub fn body(&self) -> &Body {
        &self.body
    }

    pub fn hamiltonian(&self) -> &Expr {
        &self.hamiltonian
    }

    pub fn is_electrodynamic(&self) -> bool {
        matches!(self.body, Body::Electrodynamic(_))
    }

    pub fn vertical_metric(&self) -> DTensor {
        vertical_metric_of(self.chart, &self.hamiltonian)
    }

    /// Fails on the first point where a metric determinant is below threshold.
    pub fn check_point(&self, pt: &Point) -> Result<(), GeometryError> {
        pt.check(self.chart)?;
        self.h.check_nondegenerate(pt)?;
        self.g.check_nondegenerate(pt)
    }

    pub fn check_kronecker_regularity(&self, points: &[Point], tol: f64) -> Result<RegularityReport, GeometryError> {
        check_kronecker_regularity(&self.h, &self.hamiltonian, points, tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub pass: bool,
    pub max_residual: f64,
    pub tol: f64,
    /// Points where `h_11` was usable.
    pub samples_used: usize,
    /// The point of largest residual and `g^ij = G_(1)(1)^(i)(j) / h_11` there.
    pub witness_point: Point,
    pub witness_g_upper: Vec<Vec<f64>>,
}

/// Tests `G_(a)(b)^(i)(j) = h_ab g^ij` at each point with `g^ij` solved from the
/// `(1,1)` block.
pub fn check_kronecker_regularity(
    h: &MetricField,
    hamiltonian: &Expr,
    points: &[Point],
    tol: f64,
) -> Result<RegularityReport, GeometryError> {
    let chart = h.chart();
    let (m, n) = (chart.m(), chart.n());
    let big_g = vertical_metric_of(chart, hamiltonian);
    let evaluator = TensorEvaluator::new(&[&big_g, h.lower()]);
    let mut best: Option<(f64, Point, Vec<Vec<f64>>)> = None;
    let mut used = 0;
    for pt in points {
        let values = evaluator.evaluate(pt)?;
        let (gv, hv) = (&values[0], &values[1]);
        let h11 = hv.get(&[0, 0]);
        if h11.abs() < crate::metric::DEGENERACY_THRESHOLD {
            continue;
        }
        used += 1;
        let witness: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| gv.get(&[0, 0, i, j]) / h11).collect())
            .collect();
        let mut residual: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                for i in 0..n {
                    for j in 0..n {
                        let r = gv.get(&[a, b, i, j]) - hv.get(&[a, b]) * witness[i][j];
                        residual = residual.max(r.abs());
                    }
                }
            }
        }
        if best.as_ref().is_none_or(|(r, _, _)| residual > *r) {
            best = Some((residual, pt.clone(), witness));
        }
    }
    let (max_residual, witness_point, witness_g_upper) = best.ok_or(GeometryError::RegularityIndeterminate)?;
    Ok(RegularityReport {
        pass: max_residual <= tol,
        max_residual,
        tol,
        samples_used: used,
        witness_point,
        witness_g_upper,
    })
}

/// The pieces of a quadratic Hamiltonian `H = h_ab g^ij p p + U p + F`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// `g^ij`, stored `[i][j]`.
    pub g_upper: DTensor,
    /// `U^(i)_(a)`, stored `[i][a]`.
    pub u: DTensor,
    pub f: Expr,
}

impl Decomposition {
    pub fn reassemble(&self, h: &MetricField) -> Expr {
        let chart = h.chart();
        let (m, n) = (chart.m(), chart.n());
        let mut terms = Vec::new();
        for a in 0..m {
            for b in 0..m {
                for i in 0..n {
                    for j in 0..n {
                        terms.push(h.lower().get(&[a, b]) * self.g_upper.get(&[i, j]) * p(i, a) * p(j, b));
                    }
                }
            }
        }
        for i in 0..n {
            for a in 0..m {
                terms.push(self.u.get(&[i, a]) * p(i, a));
            }
        }
        terms.push(self.f.clone());
        Expr::sum(terms)
    }

    /// The electrodynamic space with these pieces and `mc = 1`.
    pub fn into_space(self, h: MetricField) -> Result<HamiltonSpace, GeometryError> {
        let g = MetricField::from_upper("g_upper", self.g_upper)?;
        HamiltonSpace::electrodynamic(h, g, self.u, self.f, 1.0)
    }
}

/// Splits a raw Hamiltonian into its electrodynamic pieces at `p = 0`, after
/// checking at `points` that it is at most quadratic in the momenta.
pub fn decompose_electrodynamic(space: &HamiltonSpace, points: &[Point]) -> Result<Decomposition, GeometryError> {
    let hamiltonian = match &space.body {
        Body::Raw { hamiltonian } => hamiltonian,
        Body::Electrodynamic(_) => {
            return Err(GeometryError::Unsupported {
                requirement: "a raw Hamiltonian body".into(),
            })
        }
    };
    let chart = space.chart;
    let momenta: Vec<Var> = chart.momentum_vars().collect();
    let mut third = Vec::new();
    for (x, &u) in momenta.iter().enumerate() {
        let du = hamiltonian.differentiate(u);
        for (y, &v) in momenta.iter().enumerate().skip(x) {
            let duv = du.differentiate(v);
            for &w in &momenta[y..] {
                let d = duv.differentiate(w);
                if !d.is_zero() {
                    third.push(d);
                }
            }
        }
    }
    if !third.is_empty() {
        let tape = crate::expr::Tape::new(&third);
        for pt in points {
            for value in tape.evaluate(pt)? {
                if value.abs() > NON_QUADRATIC_THRESHOLD {
                    return Err(GeometryError::NonQuadratic {
                        value,
                        point: format!("{pt:?}"),
                    });
                }
            }
        }
    }
    let h11 = space.h.lower().get(&[0, 0]).clone();
    let big_g = space.vertical_metric();
    let g_upper = DTensor::from_fn(chart, IndexSig::new(&[Slot::up_x('i'), Slot::up_x('j')]), |idx| {
        (big_g.get(&[0, 0, idx[0], idx[1]]) / &h11).at_zero_momenta()
    });
    let u = DTensor::from_fn(chart, IndexSig::new(&[Slot::up_x('i'), Slot::lo_t('a')]), |idx| {
        hamiltonian
            .differentiate(Var::P { i: idx[0], a: idx[1] })
            .at_zero_momenta()
    });
    Ok(Decomposition {
        g_upper,
        u,
        f: hamiltonian.at_zero_momenta(),
    })
}

/// Temporal and spatial components `(N1_(i)b^(a), N2_(i)j^(a))`, stored
/// `[i][b][a]` and `[i][j][a]`.
#[derive(Debug, Clone)]
pub struct NonlinearConnection {
    pub n1: DTensor,
    pub n2: DTensor,
}

fn n1_sig() -> IndexSig {
    IndexSig::new(&[Slot::lo_x('i'), Slot::lo_t('b'), Slot::up_t('a')])
}

fn n2_sig() -> IndexSig {
    IndexSig::new(&[Slot::lo_x('i'), Slot::lo_x('j'), Slot::up_t('a')])
}

/// `N1_(i)b^(a) = χ^a_bc p_i^c`
pub fn canonical_n1(space: &HamiltonSpace) -> Result<DTensor, GeometryError> {
    let chi = temporal_christoffel(&space.h)?;
    let m = space.chart.m();
    Ok(DTensor::from_fn(space.chart, n1_sig(), |idx| {
        let (i, b, a) = (idx[0], idx[1], idx[2]);
        Expr::sum((0..m).map(|c| chi.get(&[a, b, c]) * p(i, c)))
    }))
}

/// The four-term formula for `N2`, available on single-time charts.
pub fn canonical_nlc_general(space: &HamiltonSpace) -> Result<NonlinearConnection, GeometryError> {
    let chart = space.chart;
    if chart.m() != 1 {
        return Err(GeometryError::Unsupported {
            requirement: "m = 1 for the general nonlinear connection formula".into(),
        });
    }
    let (m, n) = (chart.m(), chart.n());
    let hm = &space.hamiltonian;
    let g = space.g.lower();
    let h_up = space.h.upper();
    let n2 = DTensor::from_fn(chart, n2_sig(), |idx| {
        let (i, j, a) = (idx[0], idx[1], idx[2]);
        let gij = g.get(&[i, j]);
        Expr::sum((0..m).map(|b| {
            let bracket = Expr::sum((0..n).map(|k| {
                let pk = Var::P { i: k, a: b };
                let dh_dp = hm.differentiate(pk);
                gij.differentiate(Var::X(k)) * &dh_dp - gij.differentiate(pk) * hm.differentiate(Var::X(k))
                    + g.get(&[i, k]) * dh_dp.differentiate(Var::X(j))
                    + g.get(&[j, k]) * dh_dp.differentiate(Var::X(i))
            }));
            0.25 * h_up.get(&[a, b]) * bracket
        }))
    });
    Ok(NonlinearConnection {
        n1: canonical_n1(space)?,
        n2,
    })
}

/// `T_(i)j^(a) = (h^ab/4)(U_ib•j + U_jb•i)` with `U_ib = g_ik U^(k)_(b)` and
/// `U_kb•r = ∂U_kb/∂x^r − U_sb Γ^s_kr`, stored `[i][j][a]`.
pub fn aux_t(space: &HamiltonSpace) -> Result<DTensor, GeometryError> {
    let data = match &space.body {
        Body::Electrodynamic(data) => data,
        Body::Raw { .. } => {
            return Err(GeometryError::Unsupported {
                requirement: "an electrodynamic body".into(),
            })
        }
    };
    let chart = space.chart;
    let (m, n) = (chart.m(), chart.n());
    let g = space.g.lower();
    let gamma = spatial_christoffel(&space.g);
    let u_low = DTensor::from_fn(chart, IndexSig::new(&[Slot::lo_x('i'), Slot::lo_t('b')]), |idx| {
        Expr::sum((0..n).map(|k| g.get(&[idx[0], k]) * data.u.get(&[k, idx[1]])))
    });
    let bullet = DTensor::from_fn(
        chart,
        IndexSig::new(&[Slot::lo_x('k'), Slot::lo_t('b'), Slot::lo_x('r')]),
        |idx| {
            let (k, b, r) = (idx[0], idx[1], idx[2]);
            u_low.get(&[k, b]).differentiate(Var::X(r))
                - Expr::sum((0..n).map(|s| u_low.get(&[s, b]) * gamma.get(&[s, k, r])))
        },
    );
    let h_up = space.h.upper();
    Ok(DTensor::from_fn(chart, n2_sig(), |idx| {
        let (i, j, a) = (idx[0], idx[1], idx[2]);
        Expr::sum((0..m).map(|b| 0.25 * h_up.get(&[a, b]) * (bullet.get(&[i, b, j]) + bullet.get(&[j, b, i]))))
    }))
}

/// `N2 = −Γ^k_ij p_k^a + T_(i)j^(a)` for electrodynamic bodies.
pub fn canonical_nlc_electrodynamic(space: &HamiltonSpace) -> Result<NonlinearConnection, GeometryError> {
    let t = aux_t(space)?;
    let chart = space.chart;
    let n = chart.n();
    let gamma = spatial_christoffel(&space.g);
    let n2 = DTensor::from_fn(chart, n2_sig(), |idx| {
        let (i, j, a) = (idx[0], idx[1], idx[2]);
        t.get(idx) - Expr::sum((0..n).map(|k| gamma.get(&[k, i, j]) * p(k, a)))
    });
    Ok(NonlinearConnection {
        n1: canonical_n1(space)?,
        n2,
    })
}

/// Electrodynamic specialization when available, the general formula otherwise.
pub fn canonical_nlc(space: &HamiltonSpace) -> Result<NonlinearConnection, GeometryError> {
    match space.body {
        Body::Electrodynamic(_) => canonical_nlc_electrodynamic(space),
        Body::Raw { .. } => canonical_nlc_general(space),
    }
}
