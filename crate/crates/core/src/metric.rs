//! Symmetric metric fields with symbolic inverses.

use crate::chart::{Chart, Point};
use crate::error::GeometryError;
use crate::expr::Expr;
use crate::tensor::{DTensor, IndexSig, Slot, Variance};

/// Determinants below this magnitude are treated as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

fn square_size(t: &DTensor, what: &str) -> Result<usize, GeometryError> {
    let dims = t.dims();
    let slots = t.sig().slots();
    if dims.len() != 2 || dims[0] != dims[1] || slots[0].kind != slots[1].kind || dims[0] > 4 {
        return Err(GeometryError::Shape {
            what: what.to_string(),
            expected: dims.first().copied().unwrap_or(0),
        });
    }
    Ok(dims[0])
}

fn matrix_of(t: &DTensor) -> Vec<Vec<Expr>> {
    let n = t.dims()[0];
    (0..n)
        .map(|i| (0..n).map(|j| t.get(&[i, j]).clone()).collect())
        .collect()
}

/// Laplace expansion along the first row.
fn det_expr(m: &[Vec<Expr>]) -> Expr {
    match m.len() {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        n => {
            let terms = (0..n).filter(|&j| !m[0][j].is_zero()).map(|j| {
                let minor = minor_of(m, 0, j);
                let term = &m[0][j] * det_expr(&minor);
                if j % 2 == 0 {
                    term
                } else {
                    -term
                }
            });
            Expr::sum(terms)
        }
    }
}

fn minor_of(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

fn is_diagonal(m: &[Vec<Expr>]) -> bool {
    m.iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, e)| i == j || e.is_zero()))
}

/// Symbolic determinant of a square rank-2 tensor.
pub fn determinant(t: &DTensor) -> Result<Expr, GeometryError> {
    square_size(t, "matrix")?;
    let m = matrix_of(t);
    if is_diagonal(&m) {
        return Ok(m.iter().enumerate().fold(Expr::one(), |acc, (i, row)| acc * &row[i]));
    }
    Ok(det_expr(&m))
}

/// Adjugate-over-determinant inverse. Both slots flip variance; labels are kept.
pub fn symbolic_inverse(t: &DTensor) -> Result<DTensor, GeometryError> {
    let n = square_size(t, "matrix")?;
    let flip = |s: &Slot| Slot {
        variance: match s.variance {
            Variance::Upper => Variance::Lower,
            Variance::Lower => Variance::Upper,
        },
        ..*s
    };
    let sig = IndexSig::new(&t.sig().slots().iter().map(flip).collect::<Vec<_>>());
    let m = matrix_of(t);
    if is_diagonal(&m) {
        return Ok(DTensor::from_fn(t.chart(), sig, |idx| {
            if idx[0] == idx[1] {
                1.0 / &m[idx[0]][idx[0]]
            } else {
                Expr::zero()
            }
        }));
    }
    let det = det_expr(&m);
    let cofactor = |i: usize, j: usize| {
        let c = det_expr(&minor_of(&m, i, j));
        if (i + j).is_multiple_of(2) {
            c
        } else {
            -c
        }
    };
    // inverse[i][j] = cofactor(j, i) / det
    let adj: Vec<Vec<Expr>> = (0..n).map(|i| (0..n).map(|j| cofactor(j, i)).collect()).collect();
    Ok(DTensor::from_fn(t.chart(), sig, |idx| &adj[idx[0]][idx[1]] / &det))
}

/// Which side of the metric the user supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Given {
    Lower,
    Upper,
}

/// A symmetric metric (`g_ij` or `h_ab`) together with its symbolic inverse.
#[derive(Debug, Clone)]
pub struct MetricField {
    lower: DTensor,
    upper: DTensor,
    given: Given,
    given_det: Expr,
    name: String,
}

fn check_structural_symmetry(t: &DTensor, what: &str) -> Result<(), GeometryError> {
    let n = t.dims()[0];
    for i in 0..n {
        for j in (i + 1)..n {
            if t.get(&[i, j]) != t.get(&[j, i]) {
                return Err(GeometryError::NotSymmetric { what: what.to_string() });
            }
        }
    }
    Ok(())
}

impl MetricField {
    /// `lower` must have two lower slots of the same kind and be symmetric entrywise.
    pub fn from_lower(name: &str, lower: DTensor) -> Result<Self, GeometryError> {
        square_size(&lower, name)?;
        check_structural_symmetry(&lower, name)?;
        let upper = symbolic_inverse(&lower)?;
        let given_det = determinant(&lower)?;
        Ok(MetricField {
            lower,
            upper,
            given: Given::Lower,
            given_det,
            name: name.to_string(),
        })
    }

    pub fn from_upper(name: &str, upper: DTensor) -> Result<Self, GeometryError> {
        square_size(&upper, name)?;
        check_structural_symmetry(&upper, name)?;
        let lower = symbolic_inverse(&upper)?;
        let given_det = determinant(&upper)?;
        Ok(MetricField {
            lower,
            upper,
            given: Given::Upper,
            given_det,
            name: name.to_string(),
        })
    }

    /// Builds from already-consistent lower and upper parts (e.g. after a
    /// tensorial change of chart applied to both).
    pub(crate) fn from_parts(name: &str, lower: DTensor, upper: DTensor, given: Given) -> Result<Self, GeometryError> {
        let given_det = match given {
            Given::Lower => determinant(&lower)?,
            Given::Upper => determinant(&upper)?,
        };
        Ok(MetricField {
            lower,
            upper,
            given,
            given_det,
            name: name.to_string(),
        })
    }

    pub fn lower(&self) -> &DTensor {
        &self.lower
    }

    pub fn upper(&self) -> &DTensor {
        &self.upper
    }

    pub fn given(&self) -> Given {
        self.given
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> Chart {
        self.lower.chart()
    }

    pub fn dim(&self) -> usize {
        self.lower.dims()[0]
    }

    /// Multiplies the upper part by `1/c` and the lower part by `c`.
    pub fn scaled_upper(&self, c: f64) -> Result<Self, GeometryError> {
        let upper = self.upper.map(|e| e / c);
        let lower = self.lower.map(|e| e * c);
        MetricField::from_parts(&self.name, lower, upper, self.given)
    }

    /// Errors when the supplied matrix is singular at `pt`.
    pub fn check_nondegenerate(&self, pt: &Point) -> Result<(), GeometryError> {
        let det = self.given_det.evaluate(pt)?;
        if det.abs() < DEGENERACY_THRESHOLD {
            return Err(GeometryError::Degenerate {
                what: self.name.clone(),
                det,
                point: format!("{pt:?}"),
            });
        }
        Ok(())
    }
}
