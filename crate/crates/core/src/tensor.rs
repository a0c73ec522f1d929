//! Dense d-tensor containers whose slots carry kind (spatial/temporal) and
//! variance (upper/lower).
//!
//! Storage convention: entries are row-major over the slots in the order
//! listed by the [`IndexSig`]. Christoffel-type and curvature objects list
//! superscripts first (`Γ^k_ij` is `[k][i][j]`, `𝔕^r_kij` is `[r][k][i][j]`);
//! objects carrying parenthesized momentum indices list subscripts first
//! (`N_(i)b^(a)` is `[i][b][a]`, `C_i(c)^j(k)` is `[i][c][j][k]`). Every slot
//! carries its label so reports never depend on this convention implicitly.

use std::fmt;

use crate::chart::{Chart, Point};
use crate::error::EvalError;
use crate::expr::{Expr, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotKind {
    Spatial,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variance {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub label: char,
    pub kind: SlotKind,
    pub variance: Variance,
}

impl Slot {
    pub const fn up_x(label: char) -> Slot {
        Slot {
            label,
            kind: SlotKind::Spatial,
            variance: Variance::Upper,
        }
    }

    pub const fn lo_x(label: char) -> Slot {
        Slot {
            label,
            kind: SlotKind::Spatial,
            variance: Variance::Lower,
        }
    }

    pub const fn up_t(label: char) -> Slot {
        Slot {
            label,
            kind: SlotKind::Temporal,
            variance: Variance::Upper,
        }
    }

    pub const fn lo_t(label: char) -> Slot {
        Slot {
            label,
            kind: SlotKind::Temporal,
            variance: Variance::Lower,
        }
    }

    pub fn range(&self, chart: Chart) -> usize {
        match self.kind {
            SlotKind::Spatial => chart.n(),
            SlotKind::Temporal => chart.m(),
        }
    }

    pub fn with_label(self, label: char) -> Slot {
        Slot { label, ..self }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let variance = match self.variance {
            Variance::Upper => "upper",
            Variance::Lower => "lower",
        };
        let kind = match self.kind {
            SlotKind::Spatial => "spatial",
            SlotKind::Temporal => "temporal",
        };
        write!(f, "{variance} {kind}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSig(Vec<Slot>);

impl IndexSig {
    pub fn new(slots: &[Slot]) -> Self {
        IndexSig(slots.to_vec())
    }

    pub fn scalar() -> Self {
        IndexSig(Vec::new())
    }

    pub fn slots(&self) -> &[Slot] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn dims(&self, chart: Chart) -> Vec<usize> {
        self.0.iter().map(|s| s.range(chart)).collect()
    }

    pub fn labels(&self) -> String {
        self.0.iter().map(|s| s.label).collect()
    }

    pub fn push(mut self, slot: Slot) -> Self {
        self.0.push(slot);
        self
    }
}

/// Row-major enumeration of all multi-indices for the given dimensions.
pub fn multi_indices(dims: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = dims.iter().product();
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; dims.len()];
        for (k, &d) in dims.iter().enumerate().rev() {
            idx[k] = flat % d;
            flat /= d;
        }
        idx
    })
}

fn flat_offset(dims: &[usize], idx: &[usize]) -> usize {
    assert_eq!(dims.len(), idx.len(), "index rank mismatch");
    idx.iter().zip(dims).fold(0, |acc, (&i, &d)| {
        assert!(i < d, "index {i} out of range {d}");
        acc * d + i
    })
}

/// Kronecker delta as a constant expression.
pub fn delta(i: usize, j: usize) -> Expr {
    if i == j {
        Expr::one()
    } else {
        Expr::zero()
    }
}

/// A d-tensor with one symbolic entry per multi-index.
#[derive(Debug, Clone)]
pub struct DTensor {
    chart: Chart,
    sig: IndexSig,
    dims: Vec<usize>,
    entries: Vec<Expr>,
}

impl DTensor {
    pub fn from_fn(chart: Chart, sig: IndexSig, mut f: impl FnMut(&[usize]) -> Expr) -> Self {
        let dims = sig.dims(chart);
        let entries = multi_indices(&dims).map(|idx| f(&idx)).collect();
        DTensor {
            chart,
            sig,
            dims,
            entries,
        }
    }

    pub fn zeros(chart: Chart, sig: IndexSig) -> Self {
        DTensor::from_fn(chart, sig, |_| Expr::zero())
    }

    pub fn scalar(chart: Chart, e: Expr) -> Self {
        DTensor::from_fn(chart, IndexSig::scalar(), |_| e.clone())
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn sig(&self) -> &IndexSig {
        &self.sig
    }

    pub fn rank(&self) -> usize {
        self.sig.rank()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn get(&self, idx: &[usize]) -> &Expr {
        &self.entries[flat_offset(&self.dims, idx)]
    }

    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        multi_indices(&self.dims)
    }

    pub fn map(&self, mut f: impl FnMut(&Expr) -> Expr) -> DTensor {
        DTensor {
            chart: self.chart,
            sig: self.sig.clone(),
            dims: self.dims.clone(),
            entries: self.entries.iter().map(&mut f).collect(),
        }
    }

    /// Same entries under new slot labels (kinds and variances must agree).
    pub fn relabel(&self, labels: &str) -> DTensor {
        let slots: Vec<Slot> = self
            .sig
            .slots()
            .iter()
            .zip(labels.chars())
            .map(|(s, l)| s.with_label(l))
            .collect();
        assert_eq!(slots.len(), self.rank(), "label count mismatch");
        DTensor {
            sig: IndexSig(slots),
            ..self.clone()
        }
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.entries.iter().all(Expr::is_zero)
    }

    /// Entry-wise combination of two tensors with identical shape.
    pub fn zip_with(&self, other: &DTensor, mut f: impl FnMut(&Expr, &Expr) -> Expr) -> DTensor {
        assert_eq!(self.dims, other.dims, "shape mismatch");
        DTensor {
            chart: self.chart,
            sig: self.sig.clone(),
            dims: self.dims.clone(),
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn evaluate(&self, pt: &Point) -> Result<NumTensor, EvalError> {
        let tape = Tape::new(&self.entries);
        Ok(self.num_from(tape.evaluate(pt)?))
    }

    pub(crate) fn num_from(&self, values: Vec<f64>) -> NumTensor {
        NumTensor {
            sig: self.sig.clone(),
            dims: self.dims.clone(),
            values,
        }
    }
}

/// Numeric values of a [`DTensor`] at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct NumTensor {
    pub sig: IndexSig,
    pub dims: Vec<usize>,
    pub values: Vec<f64>,
}

impl NumTensor {
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.values[flat_offset(&self.dims, idx)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &NumTensor) -> f64 {
        assert_eq!(self.dims, other.dims, "shape mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Evaluates many tensors at many points through one shared tape.
pub struct TensorEvaluator<'a> {
    tensors: Vec<&'a DTensor>,
    tape: Tape,
}

impl<'a> TensorEvaluator<'a> {
    pub fn new(tensors: &[&'a DTensor]) -> Self {
        let tape = Tape::new(tensors.iter().flat_map(|t| t.entries.iter()));
        TensorEvaluator {
            tensors: tensors.to_vec(),
            tape,
        }
    }

    pub fn evaluate(&self, pt: &Point) -> Result<Vec<NumTensor>, EvalError> {
        let mut values = self.tape.evaluate(pt)?.into_iter();
        Ok(self
            .tensors
            .iter()
            .map(|t| t.num_from(values.by_ref().take(t.entries.len()).collect()))
            .collect())
    }
}
