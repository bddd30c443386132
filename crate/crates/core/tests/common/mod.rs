//! Test-only oracles, independent of the simplex and branch-and-bound code paths.
#![allow(clippy::needless_range_loop)]
#![allow(dead_code)]

use optigraph::algebra::{AffineExpr, Constraint, NodeId, Sense, VariableBounds, VariableId};
use optigraph::graph::{RowOrigin, StandardFormProblem};
use rand::rngs::StdRng;
use rand::Rng;
use uuid::Uuid;

pub fn var(i: usize) -> VariableId {
    VariableId::new(NodeId(Uuid::from_u128(0xfeed)), i as u32)
}

/// A small LP in plain arrays: min c.x s.t. rows, lower <= x <= upper (all finite).
#[derive(Clone, Debug)]
pub struct SmallLp {
    pub cost: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Sense, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SmallLp {
    pub fn to_problem(&self, integer: bool) -> StandardFormProblem {
        let mut p = StandardFormProblem::new();
        for j in 0..self.cost.len() {
            let bounds = if integer {
                VariableBounds::integer(self.lower[j], self.upper[j])
            } else {
                VariableBounds::new(self.lower[j], self.upper[j])
            };
            p.add_column(var(j), format!("x{j}"), bounds).unwrap();
        }
        p.objective = AffineExpr::from_terms(self.cost.iter().enumerate().map(|(j, c)| (var(j), *c)), 0.0);
        for (coef, sense, rhs) in &self.rows {
            let body = AffineExpr::from_terms(coef.iter().enumerate().map(|(j, c)| (var(j), *c)), 0.0);
            p.add_row(Constraint::new(body, *sense, *rhs), RowOrigin::Algorithm(0))
                .unwrap();
        }
        p
    }

    fn feasible(&self, x: &[f64], tol: f64) -> bool {
        for j in 0..x.len() {
            if x[j] < self.lower[j] - tol || x[j] > self.upper[j] + tol {
                return false;
            }
        }
        self.rows.iter().all(|(coef, sense, rhs)| {
            let lhs: f64 = coef.iter().zip(x).map(|(a, v)| a * v).sum();
            match sense {
                Sense::LessEqual => lhs <= rhs + tol,
                Sense::GreaterEqual => lhs >= rhs - tol,
                Sense::Equal => (lhs - rhs).abs() <= tol,
            }
        })
    }
}

/// Random bounded LP: n <= 6 columns, m <= 8 rows, mixed senses, some integer-valued
/// coefficients to provoke degeneracy.
pub fn random_lp(rng: &mut StdRng) -> SmallLp {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(0..=8);
    let integral = rng.gen_bool(0.5);
    let draw = |rng: &mut StdRng, lo: f64, hi: f64| -> f64 {
        if integral {
            rng.gen_range(lo as i64..=hi as i64) as f64
        } else {
            rng.gen_range(lo..hi)
        }
    };
    let cost = (0..n).map(|_| draw(rng, -5.0, 5.0)).collect();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for _ in 0..n {
        let l = draw(rng, -4.0, 2.0);
        let width = draw(rng, 0.0, 6.0).abs();
        lower.push(l);
        upper.push(l + width);
    }
    let rows = (0..m)
        .map(|_| {
            let coef: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.25) { 0.0 } else { draw(rng, -4.0, 4.0) })
                .collect();
            let sense = match rng.gen_range(0..6) {
                0 => Sense::Equal,
                1 | 2 => Sense::GreaterEqual,
                _ => Sense::LessEqual,
            };
            let rhs = draw(rng, -6.0, 6.0);
            (coef, sense, rhs)
        })
        .collect();
    SmallLp {
        cost,
        rows,
        lower,
        upper,
    }
}

/// Solves `a x = b` (n x n) by Gaussian elimination; None if singular.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Minimum over all basic feasible points: every choice of n linearly independent
/// active constraints (equality rows always active). None when infeasible.
pub fn vertex_enumeration(lp: &SmallLp) -> Option<f64> {
    let n = lp.cost.len();
    let mut always: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut optional: Vec<(Vec<f64>, f64)> = Vec::new();
    for (coef, sense, rhs) in &lp.rows {
        if *sense == Sense::Equal {
            always.push((coef.clone(), *rhs));
        } else {
            optional.push((coef.clone(), *rhs));
        }
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        optional.push((e.clone(), lp.lower[j]));
        optional.push((e, lp.upper[j]));
    }
    if always.len() > n {
        // over-determined: choose n of the equalities, feasibility check covers the rest
        optional.append(&mut always);
    }
    let need = n - always.len();
    let mut best: Option<f64> = None;
    let mut choice: Vec<usize> = (0..need).collect();
    if need > optional.len() {
        return None;
    }
    loop {
        let mut a: Vec<Vec<f64>> = always.iter().map(|r| r.0.clone()).collect();
        let mut b: Vec<f64> = always.iter().map(|r| r.1).collect();
        for &k in &choice {
            a.push(optional[k].0.clone());
            b.push(optional[k].1);
        }
        if let Some(x) = gauss(a, b) {
            if lp.feasible(&x, 1e-9) {
                let z: f64 = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(z, |b: f64| b.min(z)));
            }
        }
        // next combination
        let mut i = need;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if choice[i] < optional.len() - need + i {
                choice[i] += 1;
                for k in i + 1..need {
                    choice[k] = choice[k - 1] + 1;
                }
                break;
            }
        }
        if need == 0 {
            return best;
        }
    }
}

/// Random all-binary program with up to `max_vars` columns.
pub fn random_binary_program(rng: &mut StdRng, max_vars: usize) -> SmallLp {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(1..=6);
    let cost = (0..n).map(|_| rng.gen_range(-10..=10) as f64).collect();
    let rows = (0..m)
        .map(|_| {
            let coef: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=6) as f64).collect();
            let sense = if rng.gen_bool(0.8) {
                Sense::LessEqual
            } else {
                Sense::GreaterEqual
            };
            let total: f64 = coef.iter().map(|c| c.abs()).sum();
            let rhs = match sense {
                Sense::LessEqual => rng.gen_range(0..=(total as i64 / 2).max(1)) as f64,
                _ => -(rng.gen_range(0..=(total as i64 / 3).max(1)) as f64),
            };
            (coef, sense, rhs)
        })
        .collect();
    SmallLp {
        cost,
        rows,
        lower: vec![0.0; n],
        upper: vec![1.0; n],
    }
}

/// Exhaustive enumeration over {0,1}^n.
pub fn binary_enumeration(lp: &SmallLp) -> Option<f64> {
    let n = lp.cost.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << n) {
        let x: Vec<f64> = (0..n).map(|j| ((mask >> j) & 1) as f64).collect();
        if lp.feasible(&x, 1e-9) {
            let z: f64 = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(z, |b: f64| b.min(z)));
        }
    }
    best
}

/// Min over a uniform grid of `f` on `[lo, hi]`.
pub fn grid_min<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> (f64, f64) {
    (0..=points)
        .map(|k| lo + (hi - lo) * k as f64 / points as f64)
        .map(|x| (x, f(x)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}
