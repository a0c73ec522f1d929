//! Numeric oracles: finite differences, metrical conditions, chart-change
//! transport of the nonlinear connection, reduced-vs-general formulas, table
//! zeros, antisymmetries and component identities.

use serde::Serialize;

use crate::cartan::{cartan_full, cartan_reduced, covariant_derivative, CovariantKind};
use crate::chart::{Chart, Point, Var};
use crate::error::GeometryError;
use crate::expr::{DerivativeRecord, Expr, Tape};
use crate::hamilton::{
    canonical_nlc, canonical_nlc_electrodynamic, canonical_nlc_general, decompose_electrodynamic, Body, HamiltonSpace,
    NonlinearConnection,
};
use crate::metric::{determinant, MetricField};
use crate::tensor::{DTensor, NumTensor, TensorEvaluator};
use crate::torsion_curvature::{ComponentSet, ConnectionPack};

/// One named residual measured over a set of sample points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub samples: usize,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, max_residual: f64, samples: usize, tol: f64) -> Self {
        Check {
            name: name.into(),
            max_residual,
            samples,
            tol,
            pass: max_residual <= tol,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResidualReport {
    pub checks: Vec<Check>,
}

impl ResidualReport {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks);
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Maximum over points of `f(values at point)`; tensors share one tape.
pub fn max_over_points(
    tensors: &[&DTensor],
    pts: &[Point],
    mut f: impl FnMut(&[NumTensor]) -> f64,
) -> Result<f64, GeometryError> {
    let evaluator = TensorEvaluator::new(tensors);
    let mut worst: f64 = 0.0;
    for pt in pts {
        let values = evaluator.evaluate(pt)?;
        let r = f(&values);
        // NaN must never read as a pass
        worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
    }
    Ok(worst)
}

/// `max |a − b|` over entries and points.
pub fn max_abs_difference(a: &DTensor, b: &DTensor, pts: &[Point]) -> Result<f64, GeometryError> {
    max_over_points(&[a, b], pts, |v| v[0].max_abs_diff(&v[1]))
}

/// `max |a − b| / max(1, |b|)` over entries and points.
pub fn max_relative_difference(a: &DTensor, b: &DTensor, pts: &[Point]) -> Result<f64, GeometryError> {
    max_over_points(&[a, b], pts, |v| {
        v[0].values
            .iter()
            .zip(&v[1].values)
            .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs() / y.abs().max(1.0)))
    })
}

pub fn max_abs(t: &DTensor, pts: &[Point]) -> Result<f64, GeometryError> {
    max_over_points(&[t], pts, |v| v[0].max_abs())
}

fn fd_relative_error(symbolic: f64, plus: f64, minus: f64, eps: f64) -> f64 {
    let fd = (plus - minus) / (2.0 * eps);
    (symbolic - fd).abs() / symbolic.abs().max(1.0)
}

fn check_eps(eps: f64) -> Result<(), GeometryError> {
    if !(1e-8..=1e-4).contains(&eps) {
        return Err(GeometryError::InvalidParameter {
            name: "eps".into(),
            detail: format!("must lie in [1e-8, 1e-4], got {eps}"),
        });
    }
    Ok(())
}

/// Symbolic derivatives of `e` in every chart variable against central
/// differences; the residual is `|sym − fd| / max(1, |sym|)`.
pub fn fd_check(e: &Expr, chart: Chart, pts: &[Point], eps: f64) -> Result<Check, GeometryError> {
    check_eps(eps)?;
    let vars = chart.vars();
    let derivatives: Vec<Expr> = vars.iter().map(|&v| e.differentiate(v)).collect();
    let tape = Tape::new(&derivatives);
    let mut worst: f64 = 0.0;
    for pt in pts {
        let symbolic = tape.evaluate(pt)?;
        for (k, &v) in vars.iter().enumerate() {
            let plus = e.evaluate(&pt.shifted(v, eps))?;
            let minus = e.evaluate(&pt.shifted(v, -eps))?;
            worst = worst.max(fd_relative_error(symbolic[k], plus, minus, eps));
        }
    }
    Ok(Check::new("fd", worst, pts.len(), 1e-6))
}

/// The finite-difference oracle applied to recorded derivative requests.
pub fn fd_check_records(
    records: &[DerivativeRecord],
    chart: Chart,
    pts: &[Point],
    eps: f64,
    tol: f64,
) -> Result<Check, GeometryError> {
    check_eps(eps)?;
    let sources: Vec<&Expr> = records.iter().map(|r| &r.source).collect();
    let derivatives: Vec<&Expr> = records.iter().map(|r| &r.derivative).collect();
    let source_tape = Tape::new(sources.iter().copied());
    let derivative_tape = Tape::new(derivatives.iter().copied());
    let vars = chart.vars();
    let mut worst: f64 = 0.0;
    for pt in pts {
        let symbolic = derivative_tape.evaluate(pt)?;
        for &v in &vars {
            let used: Vec<usize> = (0..records.len()).filter(|&k| records[k].var == v).collect();
            if used.is_empty() {
                continue;
            }
            let plus = source_tape.evaluate(&pt.shifted(v, eps))?;
            let minus = source_tape.evaluate(&pt.shifted(v, -eps))?;
            for k in used {
                let r = fd_relative_error(symbolic[k], plus[k], minus[k], eps);
                worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
            }
        }
    }
    Ok(Check::new(
        format!("fd.derivatives[{}]", records.len()),
        worst,
        pts.len(),
        tol,
    ))
}

/// `g_ij|k`, `g^ij|^(k)_(c)`, `g_ij/c`, the three h-derivatives, and the
/// symmetries of `H` and `C`.
pub fn metric_condition_suite(
    space: &HamiltonSpace,
    pack: &ConnectionPack,
    pts: &[Point],
    tol: f64,
) -> Result<Vec<Check>, GeometryError> {
    let cc = &pack.coeffs;
    let nlc = &pack.nlc;
    let g = space.g();
    let h = space.h().lower();
    let derivative = |t: &DTensor, kind| covariant_derivative(t, kind, cc, nlc);
    let cases = [
        ("metric.g_ij|k", derivative(g.lower(), CovariantKind::SpatialH)),
        ("metric.g^ij|v", derivative(g.upper(), CovariantKind::Vertical)),
        ("metric.g_ij/c", derivative(g.lower(), CovariantKind::TemporalH)),
        ("metric.h_ab/c", derivative(h, CovariantKind::TemporalH)),
        ("metric.h_ab|k", derivative(h, CovariantKind::SpatialH)),
        ("metric.h_ab|v", derivative(h, CovariantKind::Vertical)),
    ];
    let mut out = Vec::new();
    for (name, t) in &cases {
        out.push(Check::new(*name, max_abs(t, pts)?, pts.len(), tol));
    }
    let h_swap = DTensor::from_fn(space.chart(), cc.hc.sig().clone(), |i| {
        cc.hc.get(&[i[0], i[2], i[1]]).clone()
    });
    out.push(Check::new(
        "metric.H_symmetry",
        max_abs_difference(&cc.hc, &h_swap, pts)?,
        pts.len(),
        tol,
    ));
    let c_swap = DTensor::from_fn(space.chart(), cc.c.sig().clone(), |i| {
        cc.c.get(&[i[0], i[1], i[3], i[2]]).clone()
    });
    out.push(Check::new(
        "metric.C_symmetry",
        max_abs_difference(&cc.c, &c_swap, pts)?,
        pts.len(),
        tol,
    ));
    Ok(out)
}

type Matrix = Vec<Vec<f64>>;

fn mat_det(a: &Matrix) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap_or(col);
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in (col + 1)..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    det
}

fn mat_inverse(a: &Matrix) -> Matrix {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap_or(col);
        m.swap(pivot, col);
        let d = m[col][col];
        for v in &mut m[col] {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let factor = m[row][col];
                for k in 0..2 * n {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// `t̃ = Λ t + t0`, `x̃ = B x + x0`, and the induced `p̃_i^a = (B⁻¹)_ji Λ_ab p_j^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineChartMap {
    name: String,
    lambda: Matrix,
    t0: Vec<f64>,
    b: Matrix,
    x0: Vec<f64>,
    lambda_inv: Matrix,
    b_inv: Matrix,
}

pub const MIN_MAP_DET: f64 = 1e-9;

impl AffineChartMap {
    pub fn new(name: &str, lambda: Matrix, t0: Vec<f64>, b: Matrix, x0: Vec<f64>) -> Result<Self, GeometryError> {
        for (m, off) in [(&lambda, &t0), (&b, &x0)] {
            if m.iter().any(|r| r.len() != m.len()) || off.len() != m.len() {
                return Err(GeometryError::Shape {
                    what: format!("chart map {name}"),
                    expected: m.len(),
                });
            }
            let det = mat_det(m);
            if det.abs() <= MIN_MAP_DET {
                return Err(GeometryError::DegenerateMap { det });
            }
        }
        Ok(AffineChartMap {
            name: name.to_string(),
            lambda_inv: mat_inverse(&lambda),
            b_inv: mat_inverse(&b),
            lambda,
            t0,
            b,
            x0,
        })
    }

    pub fn identity(chart: Chart) -> Self {
        AffineChartMap::new(
            "identity",
            identity(chart.m()),
            vec![0.0; chart.m()],
            identity(chart.n()),
            vec![0.0; chart.n()],
        )
        .expect("identity is invertible")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Built-in maps: identity, `t̃ = 2t`, and a unimodular spatial shear
    /// (`[[1,1],[0,1]]` embedded in the leading block; a unit shift when n = 1).
    pub fn builtin(chart: Chart) -> Vec<AffineChartMap> {
        let (m, n) = (chart.m(), chart.n());
        let scale: Matrix = identity(m)
            .into_iter()
            .map(|r| r.into_iter().map(|v| 2.0 * v).collect())
            .collect();
        let mut shear = identity(n);
        let mut shift = vec![0.0; n];
        if n >= 2 {
            shear[0][1] = 1.0;
        } else {
            shift[0] = 1.0;
        }
        vec![
            AffineChartMap::identity(chart),
            AffineChartMap::new("t_scale_2", scale, vec![0.0; m], identity(n), vec![0.0; n]).unwrap(),
            AffineChartMap::new("x_shear", identity(m), vec![0.0; m], shear, shift).unwrap(),
        ]
    }

    /// Coordinates of `pt` in the target chart.
    pub fn forward(&self, pt: &Point) -> Point {
        let (m, n) = (self.lambda.len(), self.b.len());
        let mut out = pt.clone();
        for a in 0..m {
            out.t[a] = self.t0[a] + (0..m).map(|b| self.lambda[a][b] * pt.t[b]).sum::<f64>();
        }
        for i in 0..n {
            out.x[i] = self.x0[i] + (0..n).map(|j| self.b[i][j] * pt.x[j]).sum::<f64>();
        }
        for a in 0..m {
            for i in 0..n {
                out.p[a][i] = (0..n)
                    .flat_map(|j| (0..m).map(move |b| (j, b)))
                    .map(|(j, b)| self.b_inv[j][i] * self.lambda[a][b] * pt.p[b][j])
                    .sum();
            }
        }
        out
    }

    /// Source-chart variables as expressions in the target-chart variables.
    fn pullback(&self) -> impl Fn(Var) -> Option<Expr> + '_ {
        let (m, n) = (self.lambda.len(), self.b.len());
        move |v| {
            Some(match v {
                Var::T(a) => Expr::sum((0..m).map(|b| self.lambda_inv[a][b] * (Expr::var(Var::T(b)) - self.t0[b]))),
                Var::X(i) => Expr::sum((0..n).map(|j| self.b_inv[i][j] * (Expr::var(Var::X(j)) - self.x0[j]))),
                Var::P { i: j, a: b } => Expr::sum((0..n).flat_map(|i| {
                    (0..m).map(move |a| self.b[i][j] * self.lambda_inv[b][a] * Expr::var(Var::P { i, a }))
                })),
            })
        }
    }

    fn compose(&self, e: &Expr) -> Expr {
        e.substitute(&self.pullback())
    }

    /// Rank-2 tensor whose slots transform with the given Jacobian per slot.
    fn transform2(&self, t: &DTensor, jac: &Matrix) -> DTensor {
        let n = t.dims()[0];
        DTensor::from_fn(t.chart(), t.sig().clone(), |idx| {
            Expr::sum(
                (0..n)
                    .flat_map(|k| (0..n).map(move |l| (k, l)))
                    .map(|(k, l)| jac[k][idx[0]] * jac[l][idx[1]] * self.compose(t.get(&[k, l]))),
            )
        })
    }

    fn transpose(m: &Matrix) -> Matrix {
        (0..m.len()).map(|i| (0..m.len()).map(|j| m[j][i]).collect()).collect()
    }

    fn metric(
        &self,
        metric: &MetricField,
        lower_jac: &Matrix,
        upper_jac: &Matrix,
    ) -> Result<MetricField, GeometryError> {
        let lower = self.transform2(metric.lower(), lower_jac);
        let upper = self.transform2(metric.upper(), upper_jac);
        MetricField::from_parts(metric.name(), lower, upper, metric.given())
    }

    /// The same space written in the target chart.
    pub fn transform_space(&self, space: &HamiltonSpace) -> Result<HamiltonSpace, GeometryError> {
        // lower temporal slots pick up (Λ⁻¹)_{ca}, upper ones Λ_{ac}
        let h = self.metric(space.h(), &self.lambda_inv, &Self::transpose(&self.lambda))?;
        match space.body() {
            Body::Raw { hamiltonian } => HamiltonSpace::raw(h, self.compose(hamiltonian)),
            Body::Electrodynamic(data) => {
                let g = self.metric(&data.g, &self.b_inv, &Self::transpose(&self.b))?;
                let (m, n) = (self.lambda.len(), self.b.len());
                let u = DTensor::from_fn(data.u.chart(), data.u.sig().clone(), |idx| {
                    let (i, a) = (idx[0], idx[1]);
                    Expr::sum(
                        (0..n)
                            .flat_map(|k| (0..m).map(move |b| (k, b)))
                            .map(|(k, b)| self.b[i][k] * self.lambda_inv[b][a] * self.compose(data.u.get(&[k, b]))),
                    )
                });
                HamiltonSpace::electrodynamic(h, g, u, self.compose(&data.f), data.mc)
            }
        }
    }

    /// Max residual of both transformation rules for `N` over `pts` (source chart).
    pub fn transport_residual(
        &self,
        source: &NonlinearConnection,
        target: &NonlinearConnection,
        pts: &[Point],
    ) -> Result<f64, GeometryError> {
        let (m, n) = (self.lambda.len(), self.b.len());
        let src = TensorEvaluator::new(&[&source.n1, &source.n2]);
        let dst = TensorEvaluator::new(&[&target.n1, &target.n2]);
        let mut worst: f64 = 0.0;
        for pt in pts {
            let s = src.evaluate(pt)?;
            let d = dst.evaluate(&self.forward(pt))?;
            for j in 0..n {
                for b in 0..m {
                    for a in 0..m {
                        // Ñ1_(j)c^(b) Λ_ca = N1_(k)a^(c) Λ_bc (B⁻¹)_kj
                        let lhs: f64 = (0..m).map(|c| d[0].get(&[j, c, b]) * self.lambda[c][a]).sum();
                        let rhs: f64 = (0..n)
                            .flat_map(|k| (0..m).map(move |c| (k, c)))
                            .map(|(k, c)| s[0].get(&[k, a, c]) * self.lambda[b][c] * self.b_inv[k][j])
                            .sum();
                        worst = worst.max((lhs - rhs).abs());
                    }
                    for i in 0..n {
                        // Ñ2_(j)k^(b) B_ki = N2_(k)i^(c) Λ_bc (B⁻¹)_kj
                        let lhs: f64 = (0..n).map(|k| d[1].get(&[j, k, b]) * self.b[k][i]).sum();
                        let rhs: f64 = (0..n)
                            .flat_map(|k| (0..m).map(move |c| (k, c)))
                            .map(|(k, c)| s[1].get(&[k, i, c]) * self.lambda[b][c] * self.b_inv[k][j])
                            .sum();
                        worst = worst.max((lhs - rhs).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// Recomputes `N` in the target chart and transports it back.
pub fn nlc_transformation_check(
    space: &HamiltonSpace,
    map: &AffineChartMap,
    pts: &[Point],
    tol: f64,
) -> Result<Check, GeometryError> {
    let source = canonical_nlc(space)?;
    let target = canonical_nlc(&map.transform_space(space)?)?;
    let residual = map.transport_residual(&source, &target, pts)?;
    Ok(Check::new(
        format!("transform.{}", map.name()),
        residual,
        pts.len(),
        tol,
    ))
}

/// Multi-time: full δ-based vs reduced Cartan coefficients. Single-time:
/// the general N2 formula vs `−Γp + T`.
pub fn reduction_equivalence_check(
    space: &HamiltonSpace,
    pts: &[Point],
    tol_exact: f64,
    tol_relative: f64,
) -> Result<Vec<Check>, GeometryError> {
    let samples = pts.len();
    let mut out = Vec::new();
    if space.chart().m() >= 2 {
        let nlc = canonical_nlc(space)?;
        let full = cartan_full(space, &nlc)?;
        let reduced = cartan_reduced(space)?;
        let gamma = crate::christoffel::spatial_christoffel(space.g());
        out.push(Check::new(
            "reduction.A",
            max_abs_difference(&full.a, &reduced.a, pts)?,
            samples,
            tol_exact,
        ));
        out.push(Check::new(
            "reduction.H-Gamma",
            max_abs_difference(&full.hc, &gamma, pts)?,
            samples,
            tol_exact,
        ));
        out.push(Check::new("reduction.C", max_abs(&full.c, pts)?, samples, tol_exact));
        out.push(Check::new(
            "reduction.T_U0",
            reduction_t_check(space, pts)?,
            samples,
            tol_exact,
        ));
    } else {
        let general = canonical_nlc_general(space)?;
        let special = match space.body() {
            Body::Electrodynamic(_) => canonical_nlc_electrodynamic(space)?,
            Body::Raw { .. } => {
                canonical_nlc_electrodynamic(&decompose_electrodynamic(space, pts)?.into_space(space.h().clone())?)?
            }
        };
        let residual = max_relative_difference(&general.n2, &special.n2, pts)?;
        out.push(Check::new("reduction.N2_dual_path", residual, samples, tol_relative));
    }
    Ok(out)
}

/// For `U = 0` the aux tensor must vanish; other spaces report 0.
fn reduction_t_check(space: &HamiltonSpace, pts: &[Point]) -> Result<f64, GeometryError> {
    match space.body() {
        Body::Electrodynamic(data) if data.u.is_structurally_zero() => max_abs(&crate::hamilton::aux_t(space)?, pts),
        _ => Ok(0.0),
    }
}

/// Every zero cell and its witness, if any, must evaluate to zero.
pub fn verify_table_zeros(sets: &[&ComponentSet], pts: &[Point], tol: f64) -> Result<Vec<Check>, GeometryError> {
    let mut out = Vec::new();
    for set in sets {
        for (name, cell) in &set.zero_cells {
            let mut residual = max_abs(&cell.tensor, pts)?;
            if let Some(w) = &cell.witness {
                residual = residual.max(max_abs(w, pts)?);
            }
            out.push(Check::new(name.clone(), residual, pts.len(), tol));
        }
    }
    Ok(out)
}

/// Entrywise agreement of every recorded identity, relative to `max(1, |rhs|)`.
pub fn verify_identities(sets: &[&ComponentSet], pts: &[Point], tol: f64) -> Result<Vec<Check>, GeometryError> {
    let mut out = Vec::new();
    for set in sets {
        for id in &set.identities {
            let residual = max_relative_difference(&id.lhs, &id.rhs, pts)?;
            out.push(Check::new(format!("identity.{}", id.name), residual, pts.len(), tol));
        }
    }
    Ok(out)
}

/// `max |T(.., x, .., y, ..) + T(.., y, .., x, ..)|` for slot positions `(p, q)`.
pub fn antisymmetry_residual(t: &DTensor, p: usize, q: usize, pts: &[Point]) -> Result<f64, GeometryError> {
    let swapped = DTensor::from_fn(t.chart(), t.sig().clone(), |idx| {
        let mut s = idx.to_vec();
        s.swap(p, q);
        t.get(&s).clone()
    });
    max_over_points(&[t, &swapped], pts, |v| {
        v[0].values
            .iter()
            .zip(&v[1].values)
            .fold(0.0, |m: f64, (a, b)| m.max((a + b).abs()))
    })
}

/// Antisymmetry in the final pair of the torsions `R_(r)ij`, `R_(r)ab`, and the
/// curvatures `𝔕`, `χ^d_abc`, `S`.
pub fn antisymmetry_suite(
    pack: &ConnectionPack,
    torsion: &ComponentSet,
    curvature: &ComponentSet,
    pts: &[Point],
    tol: f64,
) -> Result<Vec<Check>, GeometryError> {
    let mut cases: Vec<(&str, &DTensor, usize, usize)> = Vec::new();
    if let Some(t) = torsion.get("torsion.R_ij") {
        cases.push(("antisymmetry.torsion.R_ij", t, 1, 2));
    }
    if let Some(t) = torsion.get("torsion.R_ab") {
        cases.push(("antisymmetry.torsion.R_ab", t, 1, 2));
    }
    cases.push(("antisymmetry.frak_R", &pack.frak, 2, 3));
    cases.push(("antisymmetry.chi", &pack.chi_curv, 2, 3));
    if let Some(t) = curvature.get("curvature.S") {
        cases.push(("antisymmetry.S", t, 4, 5));
    }
    if let Some(t) = curvature.get("curvature.R_jk") {
        cases.push(("antisymmetry.curvature.R_jk", t, 2, 3));
    }
    let mut out = Vec::new();
    for (name, t, p, q) in cases {
        out.push(Check::new(name, antisymmetry_residual(t, p, q, pts)?, pts.len(), tol));
    }
    Ok(out)
}

/// `|T(λp) − λT(p)|` for a tensor expected to be linear in the momenta.
pub fn homogeneity_residual(t: &DTensor, lambda: f64, pts: &[Point]) -> Result<f64, GeometryError> {
    let mut worst: f64 = 0.0;
    let tape = Tape::new(t.entries());
    for pt in pts {
        let base = tape.evaluate(pt)?;
        let scaled = tape.evaluate(&pt.scale_momenta(lambda))?;
        for (b, s) in base.iter().zip(&scaled) {
            worst = worst.max((s - lambda * b).abs() / b.abs().max(1.0));
        }
    }
    Ok(worst)
}

/// `|det|` of a symbolic matrix stays away from zero at every point.
pub fn min_abs_det(t: &DTensor, pts: &[Point]) -> Result<f64, GeometryError> {
    let det = determinant(t)?;
    let mut least = f64::INFINITY;
    for pt in pts {
        least = least.min(det.evaluate(pt)?.abs());
    }
    Ok(least)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_scalar, record_derivatives};
    use crate::sampling::SampleBoxes;
    use crate::tensor::{IndexSig, Slot};
    use crate::torsion_curvature::{curvature_components, torsion_components};

    fn matrix(chart: Chart, rows: &[&[&str]], slots: [Slot; 2]) -> DTensor {
        DTensor::from_fn(chart, IndexSig::new(&slots), |idx| {
            parse_scalar(rows[idx[0]][idx[1]], chart).unwrap()
        })
    }

    fn sphere_space() -> HamiltonSpace {
        let chart = Chart::new(2, 2).unwrap();
        let h = MetricField::from_lower(
            "h",
            matrix(chart, &[&["1", "0"], &["0", "1"]], [Slot::lo_t('a'), Slot::lo_t('b')]),
        )
        .unwrap();
        let g = MetricField::from_lower(
            "g_lower",
            matrix(
                chart,
                &[&["1", "0"], &["0", "sin(x1)^2"]],
                [Slot::lo_x('i'), Slot::lo_x('j')],
            ),
        )
        .unwrap();
        let u = matrix(
            chart,
            &[&["x2", "0"], &["0", "t1*x1"]],
            [Slot::up_x('i'), Slot::lo_t('a')],
        );
        HamiltonSpace::electrodynamic(h, g, u, parse_scalar("x1", chart).unwrap(), 1.0).unwrap()
    }

    fn pts(chart: Chart, count: usize) -> Vec<Point> {
        SampleBoxes::defaults(chart).sample_points(chart, 7, count)
    }

    #[test]
    fn fd_examples() {
        let chart = Chart::new(1, 1).unwrap();
        let mut pt = Point::zeros(chart);
        pt.x[0] = 0.3;
        let e = parse_scalar("sin(x1)", chart).unwrap();
        assert!((e.differentiate(Var::X(0)).evaluate(&pt).unwrap() - 0.955336489125606).abs() < 1e-15);
        assert!(fd_check(&e, chart, &[pt.clone()], 1e-6).unwrap().max_residual < 1e-8);
        let c = fd_check(&Expr::constant(3.0), chart, &[pt.clone()], 1e-6).unwrap();
        assert_eq!(c.max_residual, 0.0);
        pt.t[0] = 0.7;
        pt.p[0][0] = -0.4;
        let bilinear = parse_scalar("t1*p1_1", chart).unwrap();
        assert!(fd_check(&bilinear, chart, &[pt.clone()], 1e-6).unwrap().max_residual < 1e-9);
        assert!(fd_check(&bilinear, chart, &[pt], 1e-2).is_err());
    }

    #[test]
    fn fd_reports_singular_points() {
        let chart = Chart::new(1, 1).unwrap();
        let e = parse_scalar("log(x1)", chart).unwrap();
        let mut pt = Point::zeros(chart);
        pt.x[0] = 1e-7;
        assert!(fd_check(&e, chart, &[pt], 1e-6).is_err());
    }

    #[test]
    fn pipeline_derivatives_match_finite_differences() {
        let space = sphere_space();
        let (_, records) = record_derivatives(|| {
            let pack = ConnectionPack::build(&space).unwrap();
            (torsion_components(&space, &pack), curvature_components(&space, &pack))
        });
        assert!(records.len() > 50);
        let check = fd_check_records(&records, space.chart(), &pts(space.chart(), 10), 1e-6, 1e-6).unwrap();
        assert!(check.pass, "{check:?}");
    }

    #[test]
    fn metrical_conditions_on_sphere() {
        let space = sphere_space();
        let pack = ConnectionPack::build(&space).unwrap();
        for check in metric_condition_suite(&space, &pack, &pts(space.chart(), 30), 1e-9).unwrap() {
            assert!(check.pass, "{check:?}");
        }
    }

    #[test]
    fn builtin_maps_transport_the_connection() {
        let space = sphere_space();
        let sample = pts(space.chart(), 20);
        for map in AffineChartMap::builtin(space.chart()) {
            let check = nlc_transformation_check(&space, &map, &sample, 1e-9).unwrap();
            assert!(check.pass, "{check:?}");
        }
        let id = nlc_transformation_check(&space, &AffineChartMap::identity(space.chart()), &sample, 0.0).unwrap();
        assert_eq!(id.max_residual, 0.0);
    }

    #[test]
    fn transport_detects_a_wrong_law() {
        // an x-dependent U transported with the wrong Jacobian must fail
        let space = sphere_space();
        let sample = pts(space.chart(), 5);
        let map = &AffineChartMap::builtin(space.chart())[1];
        let source = canonical_nlc(&space).unwrap();
        let residual = map.transport_residual(&source, &source, &sample).unwrap();
        assert!(residual > 1e-3);
    }

    #[test]
    fn degenerate_map_rejected() {
        let err = AffineChartMap::new("bad", vec![vec![0.0]], vec![0.0], vec![vec![1.0]], vec![0.0]).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateMap { .. }));
    }

    #[test]
    fn forward_map_inverts_pullback() {
        let chart = Chart::new(2, 2).unwrap();
        let map = AffineChartMap::new(
            "mixed",
            vec![vec![2.0, 1.0], vec![0.5, 1.0]],
            vec![0.1, -0.2],
            vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            vec![0.3, 0.0],
        )
        .unwrap();
        let pt = pts(chart, 1).remove(0);
        let image = map.forward(&pt);
        let back = map.pullback();
        for v in chart.vars() {
            let e = back(v).unwrap();
            assert!((e.evaluate(&image).unwrap() - pt.get(v)).abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn reduction_on_two_time_sphere() {
        let space = sphere_space();
        for check in reduction_equivalence_check(&space, &pts(space.chart(), 20), 1e-12, 1e-9).unwrap() {
            assert!(check.pass, "{check:?}");
        }
    }

    #[test]
    fn antisymmetry_zeros_and_identities() {
        let space = sphere_space();
        let pack = ConnectionPack::build(&space).unwrap();
        let torsion = torsion_components(&space, &pack);
        let curvature = curvature_components(&space, &pack);
        let sample = pts(space.chart(), 20);
        let checks = antisymmetry_suite(&pack, &torsion, &curvature, &sample, 1e-12)
            .unwrap()
            .into_iter()
            .chain(verify_table_zeros(&[&torsion, &curvature], &sample, 1e-12).unwrap())
            .chain(verify_identities(&[&torsion, &curvature], &sample, 1e-9).unwrap());
        for check in checks {
            assert!(check.pass, "{check:?}");
        }
        let r_ab = torsion.get("torsion.R_ab").unwrap();
        assert!(homogeneity_residual(r_ab, -1.7, &sample).unwrap() < 1e-15);
    }
}
