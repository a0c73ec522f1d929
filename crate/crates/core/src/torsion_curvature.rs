//! Local d-torsion and d-curvature components of the generalized Cartan
//! canonical connection.
//!
//! Both tables use the rows `hThT, hMhT, vhT, hMhM, vhM, vv` and the columns
//! `hT, hM, v`. Nonzero cells are stored under their component names; zero
//! cells are materialized as zero tensors under `zero.<row>.<col>`, with a
//! witness built from the general (branch-independent) formula when one exists.

use std::collections::BTreeMap;

use crate::cartan::{
    adapted_delta, cartan_coefficients, covariant_derivative, CartanCoefficients, CovariantKind, Direction,
};
use crate::chart::{Chart, Var};
use crate::christoffel::{christoffel_curvature_spatial, christoffel_curvature_temporal, spatial_christoffel};
use crate::error::GeometryError;
use crate::expr::Expr;
use crate::hamilton::{aux_t, canonical_nlc, p, HamiltonSpace, NonlinearConnection};
use crate::tensor::{delta, DTensor, IndexSig, Slot};

pub const ROWS: [&str; 6] = ["hThT", "hMhT", "vhT", "hMhM", "vhM", "vv"];
pub const COLUMNS: [&str; 3] = ["hT", "hM", "v"];

/// Everything the component formulas consume.
#[derive(Debug, Clone)]
pub struct ConnectionPack {
    pub nlc: NonlinearConnection,
    pub coeffs: CartanCoefficients,
    /// `Γ^k_ij`
    pub gamma: DTensor,
    /// `𝔕^r_kij`
    pub frak: DTensor,
    /// `χ^d_abc`
    pub chi_curv: DTensor,
    /// `T_(i)j^(a)` for electrodynamic bodies.
    pub t_aux: Option<DTensor>,
}

impl ConnectionPack {
    pub fn build(space: &HamiltonSpace) -> Result<Self, GeometryError> {
        let nlc = canonical_nlc(space)?;
        let coeffs = cartan_coefficients(space, &nlc)?;
        let gamma = spatial_christoffel(space.g());
        let frak = christoffel_curvature_spatial(&gamma);
        let chi_curv = christoffel_curvature_temporal(&coeffs.chi);
        let t_aux = if space.is_electrodynamic() {
            Some(aux_t(space)?)
        } else {
            None
        };
        Ok(ConnectionPack {
            nlc,
            coeffs,
            gamma,
            frak,
            chi_curv,
            t_aux,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ZeroCell {
    pub tensor: DTensor,
    /// The general formula for this cell, expected to vanish.
    pub witness: Option<DTensor>,
}

/// Two constructions of the same component that must agree entrywise.
#[derive(Debug, Clone)]
pub struct Identity {
    pub name: String,
    pub lhs: DTensor,
    pub rhs: DTensor,
}

#[derive(Debug, Clone, Default)]
pub struct ComponentSet {
    pub named: BTreeMap<String, DTensor>,
    pub zero_cells: BTreeMap<String, ZeroCell>,
    pub identities: Vec<Identity>,
}

pub type TorsionSet = ComponentSet;
pub type CurvatureSet = ComponentSet;

impl ComponentSet {
    pub fn get(&self, name: &str) -> Option<&DTensor> {
        self.named.get(name)
    }

    fn name(&mut self, key: &str, t: DTensor) {
        self.named.insert(key.to_string(), t);
    }

    fn zero(&mut self, prefix: &str, row: &str, col: &str, sig: IndexSig, chart: Chart, witness: Option<DTensor>) {
        let sig = witness.as_ref().map_or(sig, |w| w.sig().clone());
        self.zero_cells.insert(
            format!("{prefix}.zero.{row}.{col}"),
            ZeroCell {
                tensor: DTensor::zeros(chart, sig),
                witness,
            },
        );
    }

    fn identity(&mut self, name: &str, lhs: DTensor, rhs: DTensor) {
        self.identities.push(Identity {
            name: name.to_string(),
            lhs,
            rhs,
        });
    }
}

fn sig(slots: &[Slot]) -> IndexSig {
    IndexSig::new(slots)
}

fn direction_slot(d: Direction, label: char) -> Slot {
    match d {
        Direction::Temporal(_) => Slot::lo_t(label),
        Direction::Spatial(_) => Slot::lo_x(label),
    }
}

/// Row signature of a table cell.
fn row_slots(row: &str) -> Vec<Slot> {
    match row {
        "hThT" => vec![Slot::lo_t('b'), Slot::lo_t('c')],
        "hMhT" => vec![Slot::lo_t('b'), Slot::lo_x('j')],
        "vhT" => vec![Slot::lo_t('b'), Slot::up_x('k'), Slot::lo_t('e')],
        "hMhM" => vec![Slot::lo_x('j'), Slot::lo_x('k')],
        "vhM" => vec![Slot::lo_x('j'), Slot::up_x('k'), Slot::lo_t('e')],
        _ => vec![Slot::up_x('j'), Slot::lo_t('b'), Slot::up_x('k'), Slot::lo_t('c')],
    }
}

fn cell_sig(col: &[Slot], row: &str) -> IndexSig {
    let mut slots = col.to_vec();
    slots.extend(row_slots(row));
    IndexSig::new(&slots)
}

/// Shared formula machinery for one space.
struct Builder<'a> {
    chart: Chart,
    m: usize,
    n: usize,
    pack: &'a ConnectionPack,
    /// General nonlinear-connection torsions `R_(r)ab^(f)`, `R_(r)aj^(f)`, `R_(r)ij^(f)`.
    r_ab: DTensor,
    r_aj: DTensor,
    r_ij: DTensor,
    /// General `P_(r)a(b)^(f)(j)` and `P_(r)i(b)^(f)(j)`.
    p_vht: DTensor,
    p_vhm: DTensor,
}

impl<'a> Builder<'a> {
    fn new(space: &HamiltonSpace, pack: &'a ConnectionPack) -> Self {
        let chart = space.chart();
        let (m, n) = (chart.m(), chart.n());
        let nlc = &pack.nlc;
        let cc = &pack.coeffs;
        let n_of = |d: Direction, r: usize, f: usize| match d {
            Direction::Temporal(b) => nlc.n1.get(&[r, b, f]).clone(),
            Direction::Spatial(j) => nlc.n2.get(&[r, j, f]).clone(),
        };
        // R_(r)XY^(f) = δN_X/δY − δN_Y/δX
        let bracket = |x: Direction, y: Direction, r: usize, f: usize| {
            adapted_delta(&n_of(x, r, f), y, nlc) - adapted_delta(&n_of(y, r, f), x, nlc)
        };
        let r_ab = DTensor::from_fn(
            chart,
            sig(&[Slot::lo_x('r'), Slot::lo_t('a'), Slot::lo_t('b'), Slot::up_t('f')]),
            |i| bracket(Direction::Temporal(i[1]), Direction::Temporal(i[2]), i[0], i[3]),
        );
        let r_aj = DTensor::from_fn(
            chart,
            sig(&[Slot::lo_x('r'), Slot::lo_t('a'), Slot::lo_x('j'), Slot::up_t('f')]),
            |i| bracket(Direction::Temporal(i[1]), Direction::Spatial(i[2]), i[0], i[3]),
        );
        let r_ij = DTensor::from_fn(
            chart,
            sig(&[Slot::lo_x('r'), Slot::lo_x('i'), Slot::lo_x('j'), Slot::up_t('f')]),
            |i| bracket(Direction::Spatial(i[1]), Direction::Spatial(i[2]), i[0], i[3]),
        );
        let p_vht = DTensor::from_fn(
            chart,
            sig(&[
                Slot::lo_x('r'),
                Slot::lo_t('a'),
                Slot::lo_t('b'),
                Slot::up_t('f'),
                Slot::up_x('j'),
            ]),
            |i| {
                let (r, a, b, f, j) = (i[0], i[1], i[2], i[3], i[4]);
                nlc.n1.get(&[r, a, f]).differentiate(Var::P { i: j, a: b }) + delta(f, b) * cc.a.get(&[j, r, a])
                    - delta(j, r) * cc.chi.get(&[f, b, a])
            },
        );
        let p_vhm = DTensor::from_fn(
            chart,
            sig(&[
                Slot::lo_x('r'),
                Slot::lo_x('i'),
                Slot::lo_t('b'),
                Slot::up_t('f'),
                Slot::up_x('j'),
            ]),
            |i| {
                let (r, ii, b, f, j) = (i[0], i[1], i[2], i[3], i[4]);
                nlc.n2.get(&[r, ii, f]).differentiate(Var::P { i: j, a: b }) + delta(f, b) * cc.hc.get(&[j, r, ii])
            },
        );
        Builder {
            chart,
            m,
            n,
            pack,
            r_ab,
            r_aj,
            r_ij,
            p_vht,
            p_vhm,
        }
    }

    /// `R_(r)XY^(f)` for any pair of horizontal directions.
    fn nlc_torsion(&self, x: Direction, y: Direction, r: usize, f: usize) -> Expr {
        match (x, y) {
            (Direction::Temporal(a), Direction::Temporal(b)) => self.r_ab.get(&[r, a, b, f]).clone(),
            (Direction::Temporal(a), Direction::Spatial(j)) => self.r_aj.get(&[r, a, j, f]).clone(),
            (Direction::Spatial(j), Direction::Temporal(a)) => -self.r_aj.get(&[r, a, j, f]),
            (Direction::Spatial(i), Direction::Spatial(j)) => self.r_ij.get(&[r, i, j, f]).clone(),
        }
    }

    /// `A^l_iX` or `H^l_iX`.
    fn spatial_coeff(&self, x: Direction, l: usize, i: usize) -> &Expr {
        match x {
            Direction::Temporal(b) => self.pack.coeffs.a.get(&[l, i, b]),
            Direction::Spatial(k) => self.pack.coeffs.hc.get(&[l, i, k]),
        }
    }

    fn delta(&self, e: &Expr, d: Direction) -> Expr {
        adapted_delta(e, d, &self.pack.nlc)
    }

    /// `R^l_iXY = δL^l_iX/δY − δL^l_iY/δX + L^r_iX L^l_rY − L^r_iY L^l_rX + C_i(e)^l(r) R_(r)XY^(e)`
    fn h_curvature(&self, x: Direction, y: Direction, l: usize, i: usize) -> Expr {
        let (n, m) = (self.n, self.m);
        let c = &self.pack.coeffs.c;
        let mut terms = vec![
            self.delta(self.spatial_coeff(x, l, i), y),
            -self.delta(self.spatial_coeff(y, l, i), x),
        ];
        for r in 0..n {
            terms.push(self.spatial_coeff(x, r, i) * self.spatial_coeff(y, l, r));
            terms.push(-(self.spatial_coeff(y, r, i) * self.spatial_coeff(x, l, r)));
            for e in 0..m {
                let ce = c.get(&[i, e, l, r]);
                if !ce.is_zero() {
                    terms.push(ce * self.nlc_torsion(x, y, r, e));
                }
            }
        }
        Expr::sum(terms)
    }

    fn h_curvature_tensor(&self, x_kind: char, y_kind: char) -> DTensor {
        let dir = |kind: char, v: usize| {
            if kind == 't' {
                Direction::Temporal(v)
            } else {
                Direction::Spatial(v)
            }
        };
        let (xl, yl) = match (x_kind, y_kind) {
            ('t', 't') => ('b', 'c'),
            ('t', _) => ('b', 'k'),
            _ => ('j', 'k'),
        };
        let slots = [
            Slot::up_x('l'),
            Slot::lo_x('i'),
            direction_slot(dir(x_kind, 0), xl),
            direction_slot(dir(y_kind, 0), yl),
        ];
        DTensor::from_fn(self.chart, sig(&slots), |i| {
            self.h_curvature(dir(x_kind, i[2]), dir(y_kind, i[3]), i[0], i[1])
        })
    }

    /// `P^l_iX(c)^(k) = ∂L^l_iX/∂p_k^c − C_i(c)^l(k);X + C_i(e)^l(r) P_(r)X(c)^(e)(k)`,
    /// stored `(l, i, X, c, k)`.
    fn p_curvature(&self, temporal: bool) -> DTensor {
        let (m, n) = (self.m, self.n);
        let cc = &self.pack.coeffs;
        let kind = if temporal {
            CovariantKind::TemporalH
        } else {
            CovariantKind::SpatialH
        };
        // stored [i][c][l][k][X]
        let c_cov = covariant_derivative(&cc.c, kind, cc, &self.pack.nlc);
        let x_slot = if temporal { Slot::lo_t('b') } else { Slot::lo_x('j') };
        let slots = [
            Slot::up_x('l'),
            Slot::lo_x('i'),
            x_slot,
            Slot::lo_t('c'),
            Slot::up_x('k'),
        ];
        DTensor::from_fn(self.chart, sig(&slots), |idx| {
            let (l, i, x, c, k) = (idx[0], idx[1], idx[2], idx[3], idx[4]);
            let dir = if temporal {
                Direction::Temporal(x)
            } else {
                Direction::Spatial(x)
            };
            let mut terms = vec![
                self.spatial_coeff(dir, l, i).differentiate(Var::P { i: k, a: c }),
                -c_cov.get(&[i, c, l, k, x]),
            ];
            for r in 0..n {
                for e in 0..m {
                    let ce = cc.c.get(&[i, e, l, r]);
                    if ce.is_zero() {
                        continue;
                    }
                    let torsion = if temporal {
                        self.p_vht.get(&[r, x, c, e, k])
                    } else {
                        self.p_vhm.get(&[r, x, c, e, k])
                    };
                    terms.push(ce * torsion);
                }
            }
            Expr::sum(terms)
        })
    }

    /// `S_i(b)(c)^l(j)(k)`, stored `(l, i, b, c, j, k)`.
    fn s_curvature(&self) -> DTensor {
        let c = &self.pack.coeffs.c;
        let n = self.n;
        let slots = [
            Slot::up_x('l'),
            Slot::lo_x('i'),
            Slot::lo_t('b'),
            Slot::lo_t('c'),
            Slot::up_x('j'),
            Slot::up_x('k'),
        ];
        DTensor::from_fn(self.chart, sig(&slots), |idx| {
            let (l, i, b, cc, j, k) = (idx[0], idx[1], idx[2], idx[3], idx[4], idx[5]);
            let mut terms = vec![
                c.get(&[i, b, l, j]).differentiate(Var::P { i: k, a: cc }),
                -c.get(&[i, cc, l, k]).differentiate(Var::P { i: j, a: b }),
            ];
            for r in 0..n {
                terms.push(c.get(&[i, b, r, j]) * c.get(&[r, cc, l, k]));
                terms.push(-(c.get(&[i, cc, r, k]) * c.get(&[r, b, l, j])));
            }
            Expr::sum(terms)
        })
    }

    /// Composite coefficient acting on momentum-type objects `Y_(l)^(d)`:
    /// `Ω_X[(l,d)][(s,g)] = δ_ls χ^d_gX − δ_dg L^s_lX`.
    fn omega(&self, x: Direction, l: usize, d: usize, s: usize, g: usize) -> Expr {
        let temporal = match x {
            Direction::Temporal(b) if l == s => self.pack.coeffs.chi.get(&[d, g, b]).clone(),
            _ => Expr::zero(),
        };
        if d == g {
            temporal - self.spatial_coeff(x, s, l)
        } else {
            temporal
        }
    }

    /// Curvature of the composite connection on `(l, d)`, stored `(l, a, X, Y, d, i)`:
    /// `δ_Y Ω_X − δ_X Ω_Y + Ω_Y Ω_X − Ω_X Ω_Y + R_(r)XY^(e) Ω^(r)_(e)`.
    fn composite_curvature(
        &self,
        x_slot: Slot,
        y_slot: Slot,
        x_dir: fn(usize) -> Direction,
        y_dir: fn(usize) -> Direction,
    ) -> DTensor {
        let (m, n) = (self.m, self.n);
        let slots = [
            Slot::lo_x('l'),
            Slot::lo_t('a'),
            x_slot,
            y_slot,
            Slot::up_t('d'),
            Slot::up_x('i'),
        ];
        let c = &self.pack.coeffs.c;
        DTensor::from_fn(self.chart, sig(&slots), |idx| {
            let (l, a, x, y, d, i) = (idx[0], idx[1], x_dir(idx[2]), y_dir(idx[3]), idx[4], idx[5]);
            let mut terms = vec![
                self.delta(&self.omega(x, l, d, i, a), y),
                -self.delta(&self.omega(y, l, d, i, a), x),
            ];
            for s in 0..n {
                for g in 0..m {
                    terms.push(self.omega(y, l, d, s, g) * self.omega(x, s, g, i, a));
                    terms.push(-(self.omega(x, l, d, s, g) * self.omega(y, s, g, i, a)));
                }
            }
            if d == a {
                for r in 0..n {
                    for e in 0..m {
                        let ce = c.get(&[l, e, i, r]);
                        if !ce.is_zero() {
                            terms.push(-(ce * self.nlc_torsion(x, y, r, e)));
                        }
                    }
                }
            }
            Expr::sum(terms)
        })
    }

    /// `δ^i_l χ^d_aXY − δ^d_a R^i_lXY` in the `(l, a, X, Y, d, i)` layout.
    fn v_block(&self, h_block: &DTensor, chi_part: Option<&DTensor>) -> DTensor {
        let y = h_block.sig().slots()[3];
        let x = h_block.sig().slots()[2];
        let slots = [Slot::lo_x('l'), Slot::lo_t('a'), x, y, Slot::up_t('d'), Slot::up_x('i')];
        DTensor::from_fn(self.chart, sig(&slots), |idx| {
            let (l, a, xx, yy, d, i) = (idx[0], idx[1], idx[2], idx[3], idx[4], idx[5]);
            let chi = match chi_part {
                Some(chi) => delta(i, l) * chi.get(&[d, a, xx, yy]),
                None => Expr::zero(),
            };
            chi - delta(d, a) * h_block.get(&[i, l, xx, yy])
        })
    }
}

/// Every torsion component of the table, with general-formula witnesses.
pub fn torsion_components(space: &HamiltonSpace, pack: &ConnectionPack) -> TorsionSet {
    let b = Builder::new(space, pack);
    let (chart, m, n) = (b.chart, b.m, b.n);
    let cc = &pack.coeffs;
    let mut set = ComponentSet::default();

    let t_aj = DTensor::from_fn(chart, sig(&[Slot::up_x('r'), Slot::lo_t('a'), Slot::lo_x('j')]), |i| {
        -cc.a.get(&[i[0], i[2], i[1]])
    });
    set.name("torsion.T_aj", t_aj);

    // structural zeros of an h-normal connection with symmetric H
    let chi_torsion = DTensor::from_fn(chart, sig(&[Slot::up_t('a'), Slot::lo_t('b'), Slot::lo_t('c')]), |i| {
        cc.chi.get(i) - cc.chi.get(&[i[0], i[2], i[1]])
    });
    let h_torsion = DTensor::from_fn(chart, sig(&[Slot::up_x('r'), Slot::lo_x('j'), Slot::lo_x('k')]), |i| {
        cc.hc.get(i) - cc.hc.get(&[i[0], i[2], i[1]])
    });
    let col_t = [Slot::up_t('a')];
    let col_m = [Slot::up_x('r')];
    let col_v = [Slot::lo_x('r'), Slot::up_t('f')];
    for row in ROWS {
        let witness = (row == "hThT").then(|| chi_torsion.clone());
        set.zero("torsion", row, "hT", cell_sig(&col_t, row), chart, witness);
    }
    set.zero("torsion", "hThT", "hM", cell_sig(&col_m, "hThT"), chart, None);
    set.zero("torsion", "vhT", "hM", cell_sig(&col_m, "vhT"), chart, None);
    set.zero(
        "torsion",
        "hMhM",
        "hM",
        cell_sig(&col_m, "hMhM"),
        chart,
        Some(h_torsion),
    );
    set.zero("torsion", "vv", "hM", cell_sig(&col_m, "vv"), chart, None);
    set.zero("torsion", "vv", "v", cell_sig(&col_v, "vv"), chart, None);

    let p_hm = cc.c.relabel("icrj");
    if m == 1 {
        set.name("torsion.P_hM", p_hm);
        set.name("torsion.P_vhT", b.p_vht.clone());
        set.name("torsion.P_vhM", b.p_vhm.clone());
        set.name("torsion.R_aj", b.r_aj.clone());
        set.name("torsion.R_ij", b.r_ij.clone());
        set.zero(
            "torsion",
            "hThT",
            "v",
            cell_sig(&col_v, "hThT"),
            chart,
            Some(b.r_ab.clone()),
        );
        // the χ terms cancel: P_(r)1(1)^(1)(j) = A^j_r1
        let reduced = DTensor::from_fn(chart, b.p_vht.sig().clone(), |i| {
            delta(i[3], i[2]) * cc.a.get(&[i[4], i[0], i[1]])
        });
        set.identity("torsion.P_vhT", b.p_vht.clone(), reduced);
    } else {
        set.zero("torsion", "vhM", "hM", cell_sig(&col_m, "vhM"), chart, Some(p_hm));
        set.zero(
            "torsion",
            "vhM",
            "v",
            cell_sig(&col_v, "vhM"),
            chart,
            Some(b.p_vhm.clone()),
        );

        let p_vht = DTensor::from_fn(chart, b.p_vht.sig().clone(), |i| {
            delta(i[3], i[2]) * cc.a.get(&[i[4], i[0], i[1]])
        });
        let r_ab = DTensor::from_fn(chart, b.r_ab.sig().clone(), |i| {
            let (r, a, bb, f) = (i[0], i[1], i[2], i[3]);
            Expr::sum((0..m).map(|g| pack.chi_curv.get(&[f, g, a, bb]) * p(r, g)))
        });
        let t = pack.t_aux.as_ref().expect("multi-time spaces are electrodynamic");
        let r_aj = DTensor::from_fn(chart, b.r_aj.sig().clone(), |i| {
            let (r, a, j, f) = (i[0], i[1], i[2], i[3]);
            -pack.nlc.n2.get(&[r, j, f]).differentiate(Var::T(a))
                - Expr::sum((0..m).map(|c| cc.chi.get(&[f, c, a]) * t.get(&[r, j, c])))
        });
        // stored [r][i][f][j]
        let t_cov = covariant_derivative(t, CovariantKind::SpatialH, cc, &pack.nlc);
        let r_ij = DTensor::from_fn(chart, b.r_ij.sig().clone(), |i| {
            let (r, ii, j, f) = (i[0], i[1], i[2], i[3]);
            -Expr::sum((0..n).map(|k| pack.frak.get(&[k, r, ii, j]) * p(k, f))) + t_cov.get(&[r, ii, f, j])
                - t_cov.get(&[r, j, f, ii])
        });
        set.identity("torsion.P_vhT", p_vht.clone(), b.p_vht.clone());
        set.identity("torsion.R_ab", r_ab.clone(), b.r_ab.clone());
        set.identity("torsion.R_aj", r_aj.clone(), b.r_aj.clone());
        set.identity("torsion.R_ij", r_ij.clone(), b.r_ij.clone());
        set.name("torsion.P_vhT", p_vht);
        set.name("torsion.R_ab", r_ab);
        set.name("torsion.R_aj", r_aj);
        set.name("torsion.R_ij", r_ij);
    }
    set
}

fn temporal(v: usize) -> Direction {
    Direction::Temporal(v)
}

fn spatial(v: usize) -> Direction {
    Direction::Spatial(v)
}

/// Every curvature component of the table, with the v-block both from the
/// table relations and as the curvature of the composite connection.
pub fn curvature_components(space: &HamiltonSpace, pack: &ConnectionPack) -> CurvatureSet {
    let b = Builder::new(space, pack);
    let (chart, m) = (b.chart, b.m);
    let mut set = ComponentSet::default();
    set.name("curvature.chi", pack.chi_curv.clone());

    let col_t = [Slot::up_t('d'), Slot::lo_t('a')];
    let col_v = [Slot::lo_x('l'), Slot::lo_t('a'), Slot::up_t('d'), Slot::up_x('i')];
    for row in &ROWS[1..] {
        set.zero("curvature", row, "hT", cell_sig(&col_t, row), chart, None);
    }

    let r_bc = b.h_curvature_tensor('t', 't');
    let r_bk = b.h_curvature_tensor('t', 'x');
    let r_jk = b.h_curvature_tensor('x', 'x');
    let p_bc = b.p_curvature(true);
    let p_jc = b.p_curvature(false);
    let s = b.s_curvature();
    let k_bc = b.composite_curvature(Slot::lo_t('b'), Slot::lo_t('c'), temporal, temporal);
    let k_bk = b.composite_curvature(Slot::lo_t('b'), Slot::lo_x('k'), temporal, spatial);
    let k_jk = b.composite_curvature(Slot::lo_x('j'), Slot::lo_x('k'), spatial, spatial);
    let v_bk = b.v_block(&r_bk, None);

    if m == 1 {
        set.zero("curvature", "hThT", "hM", r_bc.sig().clone(), chart, Some(r_bc));
        set.zero("curvature", "hThT", "v", k_bc.sig().clone(), chart, Some(k_bc));
        let v_jk = b.v_block(&r_jk, None);
        set.identity("curvature.v.R_bk", v_bk.clone(), k_bk);
        set.identity("curvature.v.R_jk", v_jk.clone(), k_jk);
        set.name("curvature.R_bk", r_bk);
        set.name("curvature.R_jk", r_jk);
        set.name("curvature.v.R_bk", v_bk);
        set.name("curvature.v.R_jk", v_jk);
        set.name("curvature.v.P_bc", p_bc.map(|e| -e));
        set.name("curvature.v.P_jc", p_jc.map(|e| -e));
        set.name("curvature.v.S", s.map(|e| -e));
        set.name("curvature.P_bc", p_bc);
        set.name("curvature.P_jc", p_jc);
        set.name("curvature.S", s);
    } else {
        // displayed multi-time formulas use plain partial derivatives and Γ
        let cc = &pack.coeffs;
        let n = b.n;
        let r_bc_disp = DTensor::from_fn(chart, r_bc.sig().clone(), |i| {
            let (l, ii, bb, c) = (i[0], i[1], i[2], i[3]);
            cc.a.get(&[l, ii, bb]).differentiate(Var::T(c)) - cc.a.get(&[l, ii, c]).differentiate(Var::T(bb))
                + Expr::sum((0..n).map(|r| {
                    cc.a.get(&[r, ii, bb]) * cc.a.get(&[l, r, c]) - cc.a.get(&[r, ii, c]) * cc.a.get(&[l, r, bb])
                }))
        });
        let r_bk_disp = DTensor::from_fn(chart, r_bk.sig().clone(), |i| {
            let (l, ii, bb, k) = (i[0], i[1], i[2], i[3]);
            cc.a.get(&[l, ii, bb]).differentiate(Var::X(k)) - pack.gamma.get(&[l, ii, k]).differentiate(Var::T(bb))
                + Expr::sum((0..n).map(|r| {
                    cc.a.get(&[r, ii, bb]) * pack.gamma.get(&[l, r, k])
                        - pack.gamma.get(&[r, ii, k]) * cc.a.get(&[l, r, bb])
                }))
        });
        let frak = pack.frak.relabel("lijk");
        set.identity("curvature.R_bc", r_bc_disp.clone(), r_bc);
        set.identity("curvature.R_bk", r_bk_disp.clone(), r_bk);
        set.identity("curvature.frak_R", frak.clone(), r_jk);

        let v_bc = b.v_block(&r_bc_disp, Some(&pack.chi_curv));
        let v_bk = b.v_block(&r_bk_disp, None);
        let v_jk = b.v_block(&frak, None);
        set.identity("curvature.v.R_bc", v_bc.clone(), k_bc);
        set.identity("curvature.v.R_bk", v_bk.clone(), k_bk);
        set.identity("curvature.v.R_jk", v_jk.clone(), k_jk);

        set.zero("curvature", "vhT", "hM", p_bc.sig().clone(), chart, Some(p_bc.clone()));
        set.zero("curvature", "vhM", "hM", p_jc.sig().clone(), chart, Some(p_jc.clone()));
        set.zero("curvature", "vv", "hM", s.sig().clone(), chart, Some(s.clone()));
        set.zero(
            "curvature",
            "vhT",
            "v",
            cell_sig(&col_v, "vhT"),
            chart,
            Some(p_bc.map(|e| -e)),
        );
        set.zero(
            "curvature",
            "vhM",
            "v",
            cell_sig(&col_v, "vhM"),
            chart,
            Some(p_jc.map(|e| -e)),
        );
        set.zero(
            "curvature",
            "vv",
            "v",
            cell_sig(&col_v, "vv"),
            chart,
            Some(s.map(|e| -e)),
        );

        set.name("curvature.R_bc", r_bc_disp);
        set.name("curvature.R_bk", r_bk_disp);
        set.name("curvature.frak_R", frak);
        set.name("curvature.v.R_bc", v_bc);
        set.name("curvature.v.R_bk", v_bk);
        set.name("curvature.v.R_jk", v_jk);
    }
    set
}
