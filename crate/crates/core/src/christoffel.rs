//! Christoffel symbols of the temporal metric `h_ab(t)` and of the spatial
//! metric `g_ij`, and their curvature tensors.

use crate::chart::Var;
use crate::error::GeometryError;
use crate::expr::Expr;
use crate::metric::MetricField;
use crate::tensor::{DTensor, IndexSig, Slot};

/// `Γ^k_ij = (g^kl / 2)(∂g_li/∂y^j + ∂g_lj/∂y^i − ∂g_ij/∂y^l)` where `coord(i)`
/// is the coordinate `y^i` matching the metric's slot kind.
fn christoffel_of(metric: &MetricField, coord: impl Fn(usize) -> Var, sig: IndexSig) -> DTensor {
    let lower = metric.lower();
    let upper = metric.upper();
    let dim = metric.dim();
    // dg[l][i][j] = ∂g_li / ∂y^j
    let dg: Vec<Vec<Vec<Expr>>> = (0..dim)
        .map(|l| {
            (0..dim)
                .map(|i| (0..dim).map(|j| lower.get(&[l, i]).differentiate(coord(j))).collect())
                .collect()
        })
        .collect();
    DTensor::from_fn(metric.chart(), sig, |idx| {
        let (k, i, j) = (idx[0], idx[1], idx[2]);
        let terms = (0..dim).map(|l| {
            let bracket = &dg[l][i][j] + &dg[l][j][i] - &dg[i][j][l];
            upper.get(&[k, l]) * bracket
        });
        0.5 * Expr::sum(terms)
    })
}

/// `χ^a_bc` of the temporal metric, stored `[a][b][c]`.
pub fn temporal_christoffel(h: &MetricField) -> Result<DTensor, GeometryError> {
    let chart = h.chart();
    let allowed = chart.temporal_mask();
    if h.lower().entries().iter().any(|e| e.var_mask() & !allowed != 0) {
        return Err(GeometryError::Dependency {
            what: "temporal metric h".into(),
            detail: "entries may depend on t only".into(),
        });
    }
    let sig = IndexSig::new(&[Slot::up_t('a'), Slot::lo_t('b'), Slot::lo_t('c')]);
    Ok(christoffel_of(h, Var::T, sig))
}

/// Generalized spatial Christoffel symbols `Γ^k_ij`, stored `[k][i][j]`.
/// Only x-derivatives enter, whatever else `g` depends on.
pub fn spatial_christoffel(g: &MetricField) -> DTensor {
    let sig = IndexSig::new(&[Slot::up_x('k'), Slot::lo_x('i'), Slot::lo_x('j')]);
    christoffel_of(g, Var::X, sig)
}

/// `K^r_kij = ∂Γ^r_ki/∂y^j − ∂Γ^r_kj/∂y^i + Γ^p_ki Γ^r_pj − Γ^p_kj Γ^r_pi`
fn curvature_of(coeff: &DTensor, coord: impl Fn(usize) -> Var, sig: IndexSig) -> DTensor {
    let dim = coeff.dims()[0];
    DTensor::from_fn(coeff.chart(), sig, |idx| {
        let (r, k, i, j) = (idx[0], idx[1], idx[2], idx[3]);
        let derivative = coeff.get(&[r, k, i]).differentiate(coord(j)) - coeff.get(&[r, k, j]).differentiate(coord(i));
        let quadratic =
            Expr::sum((0..dim).map(|p| {
                coeff.get(&[p, k, i]) * coeff.get(&[r, p, j]) - coeff.get(&[p, k, j]) * coeff.get(&[r, p, i])
            }));
        derivative + quadratic
    })
}

/// `𝔕^r_kij` built from the spatial Christoffel symbols, stored `[r][k][i][j]`.
pub fn christoffel_curvature_spatial(gamma: &DTensor) -> DTensor {
    let sig = IndexSig::new(&[Slot::up_x('r'), Slot::lo_x('k'), Slot::lo_x('i'), Slot::lo_x('j')]);
    curvature_of(gamma, Var::X, sig)
}

/// `χ^d_abc` built from the temporal Christoffel symbols, stored `[d][a][b][c]`.
pub fn christoffel_curvature_temporal(chi: &DTensor) -> DTensor {
    let sig = IndexSig::new(&[Slot::up_t('d'), Slot::lo_t('a'), Slot::lo_t('b'), Slot::lo_t('c')]);
    curvature_of(chi, Var::T, sig)
}
