//! Chart coordinates `(t^a, x^i, p_i^a)` on the dual 1-jet space.

use std::fmt;

use crate::error::GeometryError;

/// Largest supported temporal or spatial dimension.
pub const MAX_DIM: usize = 4;

/// A chart variable. Indices are zero-based internally and printed one-based
/// (`t1`, `x2`, `p1_2` for `p_1^2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T(usize),
    X(usize),
    /// `p_i^a`: spatial index `i`, temporal index `a`.
    P {
        i: usize,
        a: usize,
    },
}

impl Var {
    /// Bit position used by the dependency masks carried by every expression node.
    pub(crate) fn bit(self) -> u32 {
        match self {
            Var::T(a) => a as u32,
            Var::X(i) => (MAX_DIM + i) as u32,
            Var::P { i, a } => (2 * MAX_DIM + a * MAX_DIM + i) as u32,
        }
    }

    pub(crate) fn mask(self) -> u32 {
        1u32 << self.bit()
    }

    pub fn is_momentum(self) -> bool {
        matches!(self, Var::P { .. })
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Var::T(a) => write!(f, "t{}", a + 1),
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::P { i, a } => write!(f, "p{}_{}", i + 1, a + 1),
        }
    }
}

/// Dimensions of the temporal manifold (`m`) and the spatial manifold (`n`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Chart {
    m: usize,
    n: usize,
}

impl Chart {
    pub fn new(m: usize, n: usize) -> Result<Self, GeometryError> {
        if !(1..=MAX_DIM).contains(&m) || !(1..=MAX_DIM).contains(&n) {
            return Err(GeometryError::Dimension { m, n });
        }
        Ok(Chart { m, n })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn declares(&self, v: Var) -> bool {
        match v {
            Var::T(a) => a < self.m,
            Var::X(i) => i < self.n,
            Var::P { i, a } => i < self.n && a < self.m,
        }
    }

    pub fn temporal_vars(&self) -> impl Iterator<Item = Var> {
        (0..self.m).map(Var::T)
    }

    pub fn spatial_vars(&self) -> impl Iterator<Item = Var> {
        (0..self.n).map(Var::X)
    }

    /// Momentum variables ordered `a`-major: `p_1^1, ..., p_n^1, p_1^2, ...`.
    pub fn momentum_vars(&self) -> impl Iterator<Item = Var> {
        let n = self.n;
        (0..self.m).flat_map(move |a| (0..n).map(move |i| Var::P { i, a }))
    }

    /// All chart variables: temporal, spatial, then momenta.
    pub fn vars(&self) -> Vec<Var> {
        self.temporal_vars()
            .chain(self.spatial_vars())
            .chain(self.momentum_vars())
            .collect()
    }

    /// Mask of all momentum variables of this chart.
    pub(crate) fn momentum_mask(&self) -> u32 {
        self.momentum_vars().fold(0, |acc, v| acc | v.mask())
    }

    pub(crate) fn temporal_mask(&self) -> u32 {
        self.temporal_vars().fold(0, |acc, v| acc | v.mask())
    }

    pub(crate) fn spatial_mask(&self) -> u32 {
        self.spatial_vars().fold(0, |acc, v| acc | v.mask())
    }

    /// Resolve a textual variable name such as `t1`, `x3` or `p2_1`.
    pub fn lookup(&self, name: &str) -> Option<Var> {
        let one_based = |s: &str| -> Option<usize> {
            if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            s.parse::<usize>().ok().filter(|&k| k >= 1).map(|k| k - 1)
        };
        let var = if let Some(rest) = name.strip_prefix('t') {
            Var::T(one_based(rest)?)
        } else if let Some(rest) = name.strip_prefix('x') {
            Var::X(one_based(rest)?)
        } else if let Some(rest) = name.strip_prefix('p') {
            let (i, a) = rest.split_once('_')?;
            Var::P {
                i: one_based(i)?,
                a: one_based(a)?,
            }
        } else {
            return None;
        };
        self.declares(var).then_some(var)
    }
}

/// A point `(t, x, p)` of the dual 1-jet space, with `p[a][i]` holding `p_i^a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<Vec<f64>>,
}

impl Point {
    pub fn zeros(chart: Chart) -> Self {
        Point {
            t: vec![0.0; chart.m()],
            x: vec![0.0; chart.n()],
            p: vec![vec![0.0; chart.n()]; chart.m()],
        }
    }

    pub fn new(chart: Chart, t: Vec<f64>, x: Vec<f64>, p: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let pt = Point { t, x, p };
        pt.check(chart)?;
        Ok(pt)
    }

    /// Checks array lengths against the chart and that every entry is finite.
    pub fn check(&self, chart: Chart) -> Result<(), GeometryError> {
        let shape_ok = self.t.len() == chart.m()
            && self.x.len() == chart.n()
            && self.p.len() == chart.m()
            && self.p.iter().all(|row| row.len() == chart.n());
        if !shape_ok {
            return Err(GeometryError::PointShape {
                m: chart.m(),
                n: chart.n(),
            });
        }
        let finite = self
            .t
            .iter()
            .chain(&self.x)
            .chain(self.p.iter().flatten())
            .all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::NonFinitePoint);
        }
        Ok(())
    }

    pub fn get(&self, v: Var) -> f64 {
        match v {
            Var::T(a) => self.t[a],
            Var::X(i) => self.x[i],
            Var::P { i, a } => self.p[a][i],
        }
    }

    pub fn set(&mut self, v: Var, value: f64) {
        match v {
            Var::T(a) => self.t[a] = value,
            Var::X(i) => self.x[i] = value,
            Var::P { i, a } => self.p[a][i] = value,
        }
    }

    /// Copy of the point with `v` shifted by `delta`.
    pub fn shifted(&self, v: Var, delta: f64) -> Self {
        let mut out = self.clone();
        out.set(v, self.get(v) + delta);
        out
    }

    /// Copy with every momentum scaled by `lambda`.
    pub fn scale_momenta(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.p {
            for v in row {
                *v *= lambda;
            }
        }
        out
    }
}
