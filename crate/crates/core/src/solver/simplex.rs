//! Dense-tableau primal simplex over bounded variables.
//!
//! Every row `a x (sense) b` gets a slack `s` with `a x + s = b`, bounded so the
//! sense holds (`<=`: s >= 0, `>=`: s <= 0, `==`: s = 0). Rows whose slack cannot
//! absorb the starting residual get an artificial column; phase one drives the
//! artificials to zero, phase two fixes them at zero and optimizes the real cost.

use super::{SolveStatus, SolverConfig};
use crate::algebra::Sense;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Status {
    Basic,
    Lower,
    Upper,
    /// Nonbasic with both bounds infinite, held at zero.
    Free,
    /// Nonbasic and fixed; never priced.
    Fixed,
}

/// Dense column-major view of an LP in the form the simplex consumes.
#[derive(Clone, Debug)]
pub(crate) struct DenseLp {
    pub n: usize,
    pub m: usize,
    /// Row-major `m x n`.
    pub a: Vec<f64>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct LpOutcome {
    pub status: SolveStatus,
    /// Structural values.
    pub x: Vec<f64>,
    /// Row duals, `d objective / d rhs`.
    pub y: Vec<f64>,
    /// Structural reduced costs `c - A^T y`.
    pub d: Vec<f64>,
    pub iterations: usize,
}

struct Tableau<'a> {
    lp: &'a DenseLp,
    cfg: &'a SolverConfig,
    ncols: usize,
    /// Row-major `m x ncols`, holds `B^-1 [A | I | diag(sign)]`.
    t: Vec<f64>,
    /// Values of the basic variables, per row.
    beta: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    x: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    d: Vec<f64>,
    art_sign: Vec<f64>,
    iterations: usize,
    degenerate_run: usize,
    bland: bool,
}

/// Iterations between residual checks on the tableau point.
const DRIFT_CHECK_EVERY: usize = 50;
/// Relative row residual beyond which the tableau is rebuilt.
const DRIFT_TOL: f64 = 1e-9;

enum Step {
    Optimal,
    Unbounded,
    Continue,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a DenseLp, cfg: &'a SolverConfig) -> Self {
        let (n, m) = (lp.n, lp.m);
        let ncols = n + 2 * m;
        let mut lo = vec![0.0; ncols];
        let mut up = vec![0.0; ncols];
        lo[..n].copy_from_slice(&lp.lower);
        up[..n].copy_from_slice(&lp.upper);
        for i in 0..m {
            let (l, u) = match lp.senses[i] {
                Sense::LessEqual => (0.0, f64::INFINITY),
                Sense::GreaterEqual => (f64::NEG_INFINITY, 0.0),
                Sense::Equal => (0.0, 0.0),
            };
            lo[n + i] = l;
            up[n + i] = u;
            lo[n + m + i] = 0.0;
            up[n + m + i] = f64::INFINITY;
        }

        let mut status = vec![Status::Lower; ncols];
        let mut x = vec![0.0; ncols];
        for j in 0..n {
            let (l, u) = (lo[j], up[j]);
            if l == u {
                status[j] = Status::Fixed;
                x[j] = l;
            } else if l.is_finite() {
                status[j] = Status::Lower;
                x[j] = l;
            } else if u.is_finite() {
                status[j] = Status::Upper;
                x[j] = u;
            } else {
                status[j] = Status::Free;
                x[j] = 0.0;
            }
        }

        let mut t = vec![0.0; m * ncols];
        let mut beta = vec![0.0; m];
        let mut basis = vec![0; m];
        let mut art_sign = vec![1.0; m];
        for i in 0..m {
            let row = &lp.a[i * n..(i + 1) * n];
            let activity: f64 = row.iter().zip(&x[..n]).map(|(a, v)| a * v).sum();
            let residual = lp.rhs[i] - activity;
            let slack = n + i;
            let art = n + m + i;
            if residual >= lo[slack] && residual <= up[slack] {
                basis[i] = slack;
                beta[i] = residual;
                status[slack] = Status::Basic;
                status[art] = Status::Fixed;
                up[art] = 0.0;
                t[i * ncols..i * ncols + n].copy_from_slice(row);
                t[i * ncols + slack] = 1.0;
            } else {
                let sign = if residual >= 0.0 { 1.0 } else { -1.0 };
                art_sign[i] = sign;
                basis[i] = art;
                beta[i] = residual.abs();
                status[art] = Status::Basic;
                status[slack] = if lo[slack] == up[slack] {
                    Status::Fixed
                } else if lo[slack].is_finite() {
                    Status::Lower
                } else {
                    Status::Upper
                };
                x[slack] = 0.0;
                // row scaled by the artificial's sign so the basis block is the identity
                for (dst, a) in t[i * ncols..i * ncols + n].iter_mut().zip(row) {
                    *dst = a * sign;
                }
                t[i * ncols + slack] = sign;
                t[i * ncols + art] = 1.0;
            }
        }

        Self {
            lp,
            cfg,
            ncols,
            t,
            beta,
            basis,
            status,
            x,
            lo,
            up,
            cost: vec![0.0; ncols],
            d: vec![0.0; ncols],
            art_sign,
            iterations: 0,
            degenerate_run: 0,
            bland: false,
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.lp.n + self.lp.m
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        let ncols = self.ncols;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.lp.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * ncols..(i + 1) * ncols];
                for (dj, tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for i in 0..self.lp.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    fn objective(&self) -> f64 {
        let mut z = 0.0;
        for j in 0..self.ncols {
            if self.status[j] != Status::Basic {
                z += self.cost[j] * self.x[j];
            }
        }
        for i in 0..self.lp.m {
            z += self.cost[self.basis[i]] * self.beta[i];
        }
        z
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        let tol = self.cfg.feas_tol;
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            let dj = self.d[j];
            let dir = match self.status[j] {
                Status::Basic | Status::Fixed => continue,
                Status::Lower if dj < -tol => 1.0,
                Status::Upper if dj > tol => -1.0,
                Status::Free if dj.abs() > tol => -dj.signum(),
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            if dj.abs() > best_score {
                best_score = dj.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn step(&mut self) -> Step {
        let Some((q, dir)) = self.choose_entering() else {
            return Step::Optimal;
        };
        let (m, ncols) = (self.lp.m, self.ncols);
        let ptol = self.cfg.pivot_tol;

        // Harris two-pass ratio test: find the longest step that keeps every basic
        // variable within its bounds relaxed by the feasibility tolerance, then among
        // the rows blocking within that step pivot on the largest entry.
        let tol = self.cfg.feas_tol;
        let mut theta_max = f64::INFINITY;
        for i in 0..m {
            let delta = -dir * self.t[i * ncols + q];
            let b = self.basis[i];
            if delta < -ptol && self.lo[b].is_finite() {
                theta_max = theta_max.min((self.beta[i] - self.lo[b] + tol) / -delta);
            } else if delta > ptol && self.up[b].is_finite() {
                theta_max = theta_max.min((self.up[b] - self.beta[i] + tol) / delta);
            }
        }
        let mut best_t = f64::INFINITY;
        let mut leave: Option<(usize, bool)> = None; // (row, leaves at upper)
        let mut best_alpha = 0.0;
        if theta_max.is_finite() {
            for i in 0..m {
                let alpha = self.t[i * ncols + q];
                let delta = -dir * alpha;
                let b = self.basis[i];
                let (limit, to_upper) = if delta < -ptol && self.lo[b].is_finite() {
                    (((self.beta[i] - self.lo[b]) / -delta).max(0.0), false)
                } else if delta > ptol && self.up[b].is_finite() {
                    (((self.up[b] - self.beta[i]) / delta).max(0.0), true)
                } else {
                    continue;
                };
                if limit > theta_max {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((r, _)) if self.bland => b < self.basis[r],
                    Some(_) => alpha.abs() > best_alpha,
                };
                if better {
                    best_t = limit;
                    leave = Some((i, to_upper));
                    best_alpha = alpha.abs();
                }
            }
        }

        let range = self.up[q] - self.lo[q];
        let flip = range.is_finite() && range <= best_t;
        if !flip && leave.is_none() {
            return Step::Unbounded;
        }
        let step = if flip { range } else { best_t };
        if step <= 1e-12 {
            self.degenerate_run += 1;
            if !self.bland && self.degenerate_run >= 5 * (self.lp.m + self.lp.n) {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
        self.iterations += 1;

        // move basics along the edge
        if step != 0.0 {
            for i in 0..m {
                let alpha = self.t[i * ncols + q];
                if alpha != 0.0 {
                    self.beta[i] -= dir * step * alpha;
                }
            }
        }

        if flip {
            if dir > 0.0 {
                self.x[q] = self.up[q];
                self.status[q] = Status::Upper;
            } else {
                self.x[q] = self.lo[q];
                self.status[q] = Status::Lower;
            }
            return Step::Continue;
        }

        let (r, to_upper) = leave.expect("checked above");
        let leaving = self.basis[r];
        let entering_value = self.x[q] + dir * step;

        // pivot on (r, q)
        let pivot = self.t[r * ncols + q];
        {
            let row = &mut self.t[r * ncols..(r + 1) * ncols];
            for v in row.iter_mut() {
                *v /= pivot;
            }
        }
        let pivot_row: Vec<f64> = self.t[r * ncols..(r + 1) * ncols].to_vec();
        let active: Vec<usize> = (0..ncols).filter(|&j| pivot_row[j] != 0.0).collect();
        for i in 0..m {
            if i == r {
                continue;
            }
            let factor = self.t[i * ncols + q];
            if factor != 0.0 {
                let row = &mut self.t[i * ncols..(i + 1) * ncols];
                for &j in &active {
                    row[j] -= factor * pivot_row[j];
                }
                row[q] = 0.0;
            }
        }
        let dq = self.d[q];
        if dq != 0.0 {
            for &j in &active {
                self.d[j] -= dq * pivot_row[j];
            }
            self.d[q] = 0.0;
        }

        self.basis[r] = q;
        self.beta[r] = entering_value;
        self.status[q] = Status::Basic;
        if self.is_artificial(leaving) {
            self.status[leaving] = Status::Fixed;
            self.x[leaving] = 0.0;
            self.up[leaving] = 0.0;
        } else if self.lo[leaving] == self.up[leaving] {
            self.status[leaving] = Status::Fixed;
            self.x[leaving] = self.lo[leaving];
        } else if to_upper {
            self.status[leaving] = Status::Upper;
            self.x[leaving] = self.up[leaving];
        } else {
            self.status[leaving] = Status::Lower;
            self.x[leaving] = self.lo[leaving];
        }
        Step::Continue
    }

    fn run(&mut self) -> Result<(), SolveStatus> {
        let mut since = 0;
        let mut rechecks = 0;
        loop {
            if self.iterations >= self.cfg.max_iterations {
                return Err(SolveStatus::IterationLimit);
            }
            if since >= DRIFT_CHECK_EVERY {
                if self.drifted() {
                    self.reinvert();
                }
                since = 0;
            }
            match self.step() {
                Step::Optimal => {
                    // confirm on a fresh factorization when rounding error has built up
                    if rechecks >= 3 || !self.drifted() || !self.reinvert() {
                        return Ok(());
                    }
                    since = 0;
                    rechecks += 1;
                    if self.choose_entering().is_none() {
                        return Ok(());
                    }
                }
                Step::Unbounded => return Err(SolveStatus::Unbounded),
                Step::Continue => since += 1,
            }
        }
    }

    /// Whether the current point violates the original rows beyond rounding.
    fn drifted(&self) -> bool {
        let (n, m) = (self.lp.n, self.lp.m);
        let mut full = self.x.clone();
        for (i, &b) in self.basis.iter().enumerate() {
            full[b] = self.beta[i];
        }
        let scale = 1.0
            + full
                .iter()
                .fold(0.0f64, |acc, v| if v.is_finite() { acc.max(v.abs()) } else { acc });
        (0..m).any(|i| {
            let row = &self.lp.a[i * n..(i + 1) * n];
            let activity: f64 = row.iter().zip(&full[..n]).map(|(a, v)| a * v).sum();
            let r = self.lp.rhs[i] - activity - full[n + i] - self.art_sign[i] * full[n + m + i];
            r.abs() > DRIFT_TOL * scale
        })
    }

    /// Rebuilds the tableau, basic values and reduced costs from the original data
    /// and the current basis, discarding accumulated rounding error.
    fn reinvert(&mut self) -> bool {
        let m = self.lp.m;
        let ncols = self.ncols;
        if m == 0 {
            return true;
        }
        let mut bmat = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                bmat[i * m + k] = self.column_entry(i, j);
            }
        }
        let Some(lu) = Lu::factor(bmat, m) else {
            return false;
        };
        let mut col = vec![0.0; m];
        for j in 0..ncols {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.column_entry(i, j);
            }
            let w = if col.iter().all(|c| *c == 0.0) {
                vec![0.0; m]
            } else {
                lu.solve(&col)
            };
            for i in 0..m {
                self.t[i * ncols + j] = w[i];
            }
        }
        let mut rhs = self.lp.rhs.clone();
        for j in 0..ncols {
            if self.status[j] == Status::Basic || self.x[j] == 0.0 {
                continue;
            }
            for (i, r) in rhs.iter_mut().enumerate() {
                let a = self.column_entry(i, j);
                if a != 0.0 {
                    *r -= a * self.x[j];
                }
            }
        }
        self.beta = lu.solve(&rhs);
        for (i, &b) in self.basis.iter().enumerate() {
            for k in 0..m {
                self.t[k * ncols + b] = if k == i { 1.0 } else { 0.0 };
            }
        }
        let cost = std::mem::take(&mut self.cost);
        self.set_cost(cost);
        true
    }

    fn basic_value(&self, j: usize) -> Option<f64> {
        self.basis.iter().position(|&b| b == j).map(|i| self.beta[i])
    }

    /// Recomputes primal values and duals from the final basis with a fresh factorization.
    fn refine(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let (n, m) = (self.lp.n, self.lp.m);
        let mut bmat = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                bmat[i * m + k] = self.column_entry(i, j);
            }
        }
        let lu = Lu::factor(bmat, m)?;
        // B x_B = b - N x_N
        let mut rhs = self.lp.rhs.clone();
        for j in 0..self.ncols {
            if self.status[j] == Status::Basic || self.x[j] == 0.0 {
                continue;
            }
            for (i, r) in rhs.iter_mut().enumerate() {
                let a = self.column_entry(i, j);
                if a != 0.0 {
                    *r -= a * self.x[j];
                }
            }
        }
        let xb = lu.solve(&rhs);
        let mut x = self.x[..n].to_vec();
        for (k, &j) in self.basis.iter().enumerate() {
            if j < n {
                x[j] = xb[k];
            }
        }
        let cb: Vec<f64> = self
            .basis
            .iter()
            .map(|&j| if j < n { self.lp.cost[j] } else { 0.0 })
            .collect();
        let y = lu.solve_transpose(&cb);
        Some((x, y))
    }

    fn column_entry(&self, i: usize, j: usize) -> f64 {
        let (n, m) = (self.lp.n, self.lp.m);
        if j < n {
            self.lp.a[i * n + j]
        } else if j < n + m {
            if j - n == i {
                1.0
            } else {
                0.0
            }
        } else if j - n - m == i {
            self.art_sign[i]
        } else {
            0.0
        }
    }
}

pub(crate) fn solve_dense(lp: &DenseLp, cfg: &SolverConfig) -> LpOutcome {
    let (n, m) = (lp.n, lp.m);
    let fail = |status, iterations| LpOutcome {
        status,
        x: vec![0.0; n],
        y: vec![0.0; m],
        d: vec![0.0; n],
        iterations,
    };
    for j in 0..n {
        if lp.lower[j] > lp.upper[j] {
            return fail(SolveStatus::Infeasible, 0);
        }
    }

    let mut tab = Tableau::new(lp, cfg);
    let needs_phase_one = tab.basis.iter().any(|&b| tab.is_artificial(b));
    if needs_phase_one {
        let mut c1 = vec![0.0; tab.ncols];
        for c in c1.iter_mut().skip(n + m) {
            *c = 1.0;
        }
        tab.set_cost(c1);
        if let Err(status) = tab.run() {
            return fail(status, tab.iterations);
        }
        let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
        if tab.objective() > cfg.feas_tol * scale {
            return fail(SolveStatus::Infeasible, tab.iterations);
        }
        for j in n + m..tab.ncols {
            tab.up[j] = 0.0;
            if tab.status[j] != Status::Basic {
                tab.status[j] = Status::Fixed;
                tab.x[j] = 0.0;
            }
        }
        tab.degenerate_run = 0;
    }
    let mut c2 = vec![0.0; tab.ncols];
    c2[..n].copy_from_slice(&lp.cost);
    tab.set_cost(c2);
    if let Err(status) = tab.run() {
        return fail(status, tab.iterations);
    }

    let (x, y) = tab.refine().unwrap_or_else(|| {
        let mut x = tab.x[..n].to_vec();
        for (j, v) in x.iter_mut().enumerate() {
            if let Some(b) = tab.basic_value(j) {
                *v = b;
            }
        }
        let y = (0..m).map(|i| -tab.d[n + i]).collect();
        (x, y)
    });
    let mut d = lp.cost.clone();
    for i in 0..m {
        if y[i] != 0.0 {
            for j in 0..n {
                d[j] -= y[i] * lp.a[i * n + j];
            }
        }
    }
    LpOutcome {
        status: SolveStatus::Optimal,
        x,
        y,
        d,
        iterations: tab.iterations,
    }
}

/// Dense LU with partial pivoting.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, n: usize) -> Option<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, max) =
                (k..n)
                    .map(|i| (i, a[i * n + k].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if max < 1e-13 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                if f != 0.0 {
                    a[i * n + k] = f;
                    for j in k + 1..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                } else {
                    a[i * n + k] = 0.0;
                }
            }
        }
        Some(Self { n, lu: a, perm })
    }

    /// Solves `A x = b`.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }

    /// Solves `A^T y = c`.
    fn solve_transpose(&self, c: &[f64]) -> Vec<f64> {
        let n = self.n;
        // PA = LU, so A^T = U^T L^T P and A^T y = c  =>  U^T z = c, L^T w = z, y = P^T w
        let mut z = c.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for j in 0..i {
                s -= self.lu[j * n + i] * z[j];
            }
            z[i] = s / self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for j in i + 1..n {
                s -= self.lu[j * n + i] * z[j];
            }
            z[i] = s;
        }
        let mut y = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            y[p] = z[k];
        }
        y
    }
}
