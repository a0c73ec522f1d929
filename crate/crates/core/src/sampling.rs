//! Seeded sampling of chart points from per-variable coordinate boxes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chart::{Chart, Point, Var};

pub const DEFAULT_T_BOX: (f64, f64) = (0.5, 1.5);
pub const DEFAULT_X_BOX: (f64, f64) = (0.5, 1.2);
pub const DEFAULT_P_BOX: (f64, f64) = (-1.0, 1.0);

/// Closed interval per chart variable, indexed like [`Point`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBoxes {
    pub t: Vec<(f64, f64)>,
    pub x: Vec<(f64, f64)>,
    pub p: Vec<Vec<(f64, f64)>>,
}

impl SampleBoxes {
    pub fn defaults(chart: Chart) -> Self {
        SampleBoxes {
            t: vec![DEFAULT_T_BOX; chart.m()],
            x: vec![DEFAULT_X_BOX; chart.n()],
            p: vec![vec![DEFAULT_P_BOX; chart.n()]; chart.m()],
        }
    }

    pub fn get(&self, v: Var) -> (f64, f64) {
        match v {
            Var::T(a) => self.t[a],
            Var::X(i) => self.x[i],
            Var::P { i, a } => self.p[a][i],
        }
    }

    pub fn set(&mut self, v: Var, interval: (f64, f64)) {
        match v {
            Var::T(a) => self.t[a] = interval,
            Var::X(i) => self.x[i] = interval,
            Var::P { i, a } => self.p[a][i] = interval,
        }
    }

    pub fn contains(&self, chart: Chart, pt: &Point) -> bool {
        chart.vars().into_iter().all(|v| {
            let (lo, hi) = self.get(v);
            let value = pt.get(v);
            lo <= value && value <= hi
        })
    }

    /// The first variable whose value lies outside its box.
    pub fn first_violation(&self, chart: Chart, pt: &Point) -> Option<Var> {
        chart.vars().into_iter().find(|&v| {
            let (lo, hi) = self.get(v);
            let value = pt.get(v);
            !(lo <= value && value <= hi)
        })
    }

    pub fn sample(&self, chart: Chart, rng: &mut impl Rng) -> Point {
        let mut pt = Point::zeros(chart);
        for v in chart.vars() {
            let (lo, hi) = self.get(v);
            let value = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
            pt.set(v, value);
        }
        pt
    }

    /// `count` points drawn from a ChaCha8 stream seeded with `seed`.
    pub fn sample_points(&self, chart: Chart, seed: u64, count: usize) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample(chart, &mut rng)).collect()
    }
}
