//! Two-phase revised simplex on dense data.
//!
//! The problem is first brought to standard form `min c'x, Ax = b, x >= 0`
//! (free variables split, bounds shifted, slack columns for inequalities and
//! finite upper bounds), rows are scaled to unit max-norm and negated where
//! needed so that `b >= 0`. Phase one starts from an all-artificial basis.
//! The basis inverse is kept explicitly, updated by elementary row operations
//! and rebuilt from an LU factorization every [`REFACTOR_EVERY`] pivots.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots the solver
//! switches to Bland's rule until it makes progress again.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const REFACTOR_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;
const DEGENERATE_RUN: usize = 40;

/// `min c'x` subject to `A_eq x = b_eq`, `A_ub x <= b_ub`, `lower <= x <= upper`.
///
/// Bounds may be infinite. Matrices with zero rows may be passed as
/// `DMatrix::zeros(0, n)`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: Vec<f64>,
    pub a_ub: DMatrix<f64>,
    pub b_ub: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// Nonnegative variables, no constraints yet.
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        Self {
            c,
            a_eq: DMatrix::zeros(0, n),
            b_eq: Vec::new(),
            a_ub: DMatrix::zeros(0, n),
            b_ub: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_eq(mut self, a: DMatrix<f64>, b: Vec<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_ub(mut self, a: DMatrix<f64>, b: Vec<f64>) -> Self {
        self.a_ub = a;
        self.b_ub = b;
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.c.len();
        let check = |what: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("malformed LP: {what}")))
            }
        };
        check(
            "A_eq column count",
            self.a_eq.ncols() == n || self.a_eq.nrows() == 0,
        )?;
        check(
            "A_ub column count",
            self.a_ub.ncols() == n || self.a_ub.nrows() == 0,
        )?;
        check("b_eq length", self.b_eq.len() == self.a_eq.nrows())?;
        check("b_ub length", self.b_ub.len() == self.a_ub.nrows())?;
        check(
            "bound lengths",
            self.lower.len() == n && self.upper.len() == n,
        )?;
        check("finite cost", self.c.iter().all(|v| v.is_finite()))?;
        check(
            "finite right-hand sides",
            self.b_eq.iter().chain(&self.b_ub).all(|v| v.is_finite()),
        )?;
        check(
            "bounds",
            self.lower
                .iter()
                .zip(&self.upper)
                .all(|(l, u)| l <= u && *l != f64::INFINITY && *u != f64::NEG_INFINITY),
        )?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal solution; empty unless `status == Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Total simplex pivots over both phases.
    pub iterations: usize,
}

/// How an original variable is recovered from standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = offset + sign * y[col]`
    Single { col: usize, offset: f64, sign: f64 },
    /// `x = y[pos] - y[neg]`
    Split { pos: usize, neg: usize },
}

struct StandardForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    maps: Vec<VarMap>,
    obj_offset: f64,
}

fn to_standard_form(p: &LpProblem) -> StandardForm {
    let n = p.num_vars();
    let m_eq = p.a_eq.nrows();
    let m_ub = p.a_ub.nrows();

    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut bounded_rows = Vec::new();
    for j in 0..n {
        let (l, u) = (p.lower[j], p.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (true, _) => {
                maps.push(VarMap::Single {
                    col: ncols,
                    offset: l,
                    sign: 1.0,
                });
                if u.is_finite() {
                    bounded_rows.push((ncols, u - l));
                }
                ncols += 1;
            }
            (false, true) => {
                maps.push(VarMap::Single {
                    col: ncols,
                    offset: u,
                    sign: -1.0,
                });
                ncols += 1;
            }
            (false, false) => {
                maps.push(VarMap::Split {
                    pos: ncols,
                    neg: ncols + 1,
                });
                ncols += 2;
            }
        }
    }
    let n_struct = ncols;
    let m = m_eq + m_ub + bounded_rows.len();
    let total_cols = n_struct + m_ub + bounded_rows.len();

    let mut a = DMatrix::zeros(m, total_cols);
    let mut b = DVector::zeros(m);
    let mut c = DVector::zeros(total_cols);
    let mut obj_offset = 0.0;

    for (j, map) in maps.iter().enumerate() {
        match *map {
            VarMap::Single { col, offset, sign } => {
                c[col] = sign * p.c[j];
                obj_offset += p.c[j] * offset;
            }
            VarMap::Split { pos, neg } => {
                c[pos] = p.c[j];
                c[neg] = -p.c[j];
            }
        }
    }

    let mut fill_row = |row: usize, src: &DMatrix<f64>, src_row: usize, rhs: f64| {
        let mut r = rhs;
        for (j, map) in maps.iter().enumerate() {
            let v = src[(src_row, j)];
            if v == 0.0 {
                continue;
            }
            match *map {
                VarMap::Single { col, offset, sign } => {
                    a[(row, col)] = sign * v;
                    r -= v * offset;
                }
                VarMap::Split { pos, neg } => {
                    a[(row, pos)] = v;
                    a[(row, neg)] = -v;
                }
            }
        }
        b[row] = r;
    };
    for i in 0..m_eq {
        fill_row(i, &p.a_eq, i, p.b_eq[i]);
    }
    for i in 0..m_ub {
        fill_row(m_eq + i, &p.a_ub, i, p.b_ub[i]);
    }
    for i in 0..m_ub {
        a[(m_eq + i, n_struct + i)] = 1.0;
    }
    for (k, &(col, width)) in bounded_rows.iter().enumerate() {
        let row = m_eq + m_ub + k;
        a[(row, col)] = 1.0;
        a[(row, n_struct + m_ub + k)] = 1.0;
        b[row] = width;
    }

    // Unit max-norm rows with nonnegative right-hand side.
    for i in 0..m {
        let scale = a.row(i).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let mut factor = if scale > 0.0 { 1.0 / scale } else { 1.0 };
        if b[i] < 0.0 {
            factor = -factor;
        }
        a.row_mut(i).scale_mut(factor);
        b[i] *= factor;
    }

    StandardForm {
        a,
        b,
        c,
        maps,
        obj_offset,
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    m: usize,
    n: usize,
    /// Basic column per row; indices `>= n` are artificials.
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    pivots: usize,
    since_refactor: usize,
    limit: usize,
}

impl<'a> Simplex<'a> {
    fn new(a: &'a DMatrix<f64>, b: &'a DVector<f64>, limit: usize) -> Self {
        let (m, n) = a.shape();
        Self {
            a,
            b,
            m,
            n,
            basis: (n..n + m).collect(),
            is_basic: vec![false; n],
            binv: DMatrix::identity(m, m),
            xb: b.clone(),
            pivots: 0,
            since_refactor: 0,
            limit,
        }
    }

    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.n {
            self.a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(self.m);
            e[j - self.n] = 1.0;
            e
        }
    }

    fn refactor(&mut self) -> Result<()> {
        let mut bmat = DMatrix::zeros(self.m, self.m);
        for (i, &j) in self.basis.iter().enumerate() {
            bmat.set_column(i, &self.column(j));
        }
        let lu = bmat.lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::FitFailure("simplex basis became singular".into()))?;
        self.binv = inv;
        let mut xb = &self.binv * self.b;
        // One step of iterative refinement.
        let mut resid = self.b.clone();
        for (i, &j) in self.basis.iter().enumerate() {
            resid.axpy(-xb[i], &self.column(j), 1.0);
        }
        xb += &self.binv * resid;
        self.xb = xb;
        self.since_refactor = 0;
        Ok(())
    }

    fn pivot(&mut self, row: usize, entering: usize, w: &DVector<f64>) -> Result<()> {
        let wr = w[row];
        let theta = self.xb[row] / wr;
        self.xb.axpy(-theta, w, 1.0);
        self.xb[row] = theta;

        let pivot_row: Vec<f64> = self.binv.row(row).iter().map(|v| v / wr).collect();
        for col in 0..self.m {
            let pr = pivot_row[col];
            if pr == 0.0 {
                continue;
            }
            let mut c = self.binv.column_mut(col);
            for i in 0..self.m {
                if i != row {
                    c[i] -= w[i] * pr;
                }
            }
            c[row] = pr;
        }

        let leaving = self.basis[row];
        if leaving < self.n {
            self.is_basic[leaving] = false;
        }
        self.basis[row] = entering;
        self.is_basic[entering] = true;
        self.pivots += 1;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Runs primal simplex for cost vector `cost` (length `n + m`, artificial
    /// costs last). Artificial columns never re-enter.
    fn run(&mut self, cost: &DVector<f64>) -> Result<PhaseEnd> {
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots >= self.limit {
                return Err(Error::LpIterationLimit(self.limit));
            }
            let cb = DVector::from_iterator(self.m, self.basis.iter().map(|&j| cost[j]));
            let y = self.binv.tr_mul(&cb);
            let cost_scale = 1.0 + y.amax();
            let bland = degenerate_run >= DEGENERATE_RUN;

            let ay = self.a.tr_mul(&y);
            let mut entering = None;
            let mut best = -OPT_TOL * cost_scale;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let d = cost[j] - ay[j];
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let w = &self.binv * self.a.column(q);
            let wmax = w.amax();
            let piv_tol = PIVOT_TOL * wmax.max(1.0);

            // Harris two-pass ratio test.
            let mut theta_max = f64::INFINITY;
            for i in 0..self.m {
                if w[i] > piv_tol {
                    let t = (self.xb[i].max(0.0) + FEAS_TOL) / w[i];
                    theta_max = theta_max.min(t);
                }
            }
            if theta_max == f64::INFINITY {
                return Ok(PhaseEnd::Unbounded);
            }
            let mut row = None;
            let mut row_key = f64::NEG_INFINITY;
            for i in 0..self.m {
                if w[i] > piv_tol {
                    let t = self.xb[i].max(0.0) / w[i];
                    if t <= theta_max {
                        // Bland: smallest basic index; otherwise largest pivot.
                        let key = if bland { -(self.basis[i] as f64) } else { w[i] };
                        if key > row_key {
                            row_key = key;
                            row = Some(i);
                        }
                    }
                }
            }
            let row = row.expect("ratio test found a candidate");
            if self.xb[row] < 0.0 {
                self.xb[row] = 0.0;
            }
            let step = self.xb[row] / w[row];
            if step <= FEAS_TOL {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, q, &w)?;
        }
    }

    /// Installs a hinted starting basis. Returns false, leaving the solver in
    /// an unspecified state, when the hint cannot be used.
    fn try_start(&mut self, p: &LpProblem, sf: &StandardForm, hint: &[usize]) -> bool {
        let usable = hint.len() == self.m
            && p.a_ub.nrows() == 0
            && p.upper.iter().all(|u| u.is_infinite())
            && hint.iter().all(|&j| j < p.num_vars());
        if !usable {
            return false;
        }
        let mut seen = vec![false; p.num_vars()];
        for (row, &j) in hint.iter().enumerate() {
            if std::mem::replace(&mut seen[j], true) {
                return false;
            }
            let col = match sf.maps[j] {
                VarMap::Single { col, .. } => col,
                VarMap::Split { pos, .. } => pos,
            };
            self.basis[row] = col;
            self.is_basic[col] = true;
        }
        if self.refactor().is_err() || !self.xb.iter().all(|v| v.is_finite()) {
            return false;
        }
        let tol = FEAS_TOL * (1.0 + self.b.amax());
        for (row, &j) in hint.iter().enumerate() {
            if self.xb[row] >= 0.0 {
                continue;
            }
            match sf.maps[j] {
                VarMap::Split { pos, neg } => {
                    // The negative part has the negated column.
                    self.is_basic[pos] = false;
                    self.is_basic[neg] = true;
                    self.basis[row] = neg;
                    self.xb[row] = -self.xb[row];
                    self.binv.row_mut(row).neg_mut();
                }
                VarMap::Single { .. } if self.xb[row] >= -tol => self.xb[row] = 0.0,
                VarMap::Single { .. } => return false,
            }
        }
        true
    }

    /// After phase one: pivot zero-level artificials out where possible.
    fn expel_artificials(&mut self) -> Result<()> {
        for row in 0..self.m {
            if self.basis[row] < self.n {
                continue;
            }
            let brow = self.binv.row(row).into_owned();
            let mut best = None;
            let mut best_abs = PIVOT_TOL;
            for j in 0..self.n {
                if self.is_basic[j] {
                    continue;
                }
                let v = brow.dot(&self.a.column(j).transpose()).abs();
                if v > best_abs {
                    best_abs = v;
                    best = Some(j);
                }
            }
            if let Some(j) = best {
                let w = &self.binv * self.a.column(j);
                self.pivot(row, j, &w)?;
            }
        }
        Ok(())
    }
}

/// Solves a linear program to optimality, or reports infeasibility or
/// unboundedness.
///
/// Fails with [`Error::LpIterationLimit`] after `10 * (rows + cols)` pivots
/// of the standard-form problem.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    solve(p, None)
}

/// Like [`solve_lp`], but first tries the basis made of the original variables
/// in `hint` (one per equality row). Only used when the problem has equality
/// constraints alone and no finite upper bounds. A free variable in the hint
/// may take either sign. If the hinted basis is singular or infeasible the
/// solver falls back to the two-phase method.
pub fn solve_lp_with_basis(p: &LpProblem, hint: &[usize]) -> Result<LpSolution> {
    solve(p, Some(hint))
}

fn solve(p: &LpProblem, hint: Option<&[usize]>) -> Result<LpSolution> {
    p.validate()?;
    let sf = to_standard_form(p);
    let (m, n) = sf.a.shape();
    let limit = 10 * (m + n).max(1);

    if m == 0 {
        // Only bounds: every cost must push toward a finite bound.
        if sf.c.iter().any(|&v| v < 0.0) {
            return Ok(unsolved(LpStatus::Unbounded, 0));
        }
        let y = DVector::zeros(n);
        return Ok(finish(p, &sf, &y, 0));
    }

    let mut splx = Simplex::new(&sf.a, &sf.b, limit);
    if let Some(h) = hint {
        if splx.try_start(p, &sf, h) {
            return phase_two(p, &sf, splx);
        }
        splx = Simplex::new(&sf.a, &sf.b, limit);
    }

    let mut phase1 = DVector::zeros(n + m);
    for i in 0..m {
        phase1[n + i] = 1.0;
    }
    splx.run(&phase1)?;
    splx.refactor()?;
    let infeas: f64 = splx
        .basis
        .iter()
        .zip(splx.xb.iter())
        .filter(|(&j, _)| j >= n)
        .map(|(_, v)| v.abs())
        .sum();
    let b_scale = 1.0 + sf.b.amax();
    if infeas > 1e-8 * b_scale {
        return Ok(unsolved(LpStatus::Infeasible, splx.pivots));
    }
    splx.expel_artificials()?;
    phase_two(p, &sf, splx)
}

fn phase_two(p: &LpProblem, sf: &StandardForm, mut splx: Simplex<'_>) -> Result<LpSolution> {
    let (m, n) = sf.a.shape();
    let mut phase2 = DVector::zeros(n + m);
    phase2.rows_mut(0, n).copy_from(&sf.c);
    match splx.run(&phase2)? {
        PhaseEnd::Unbounded => return Ok(unsolved(LpStatus::Unbounded, splx.pivots)),
        PhaseEnd::Optimal => {}
    }
    splx.refactor()?;

    let mut y = DVector::zeros(n);
    for (i, &j) in splx.basis.iter().enumerate() {
        if j < n {
            y[j] = splx.xb[i].max(0.0);
        }
    }
    Ok(finish(p, &sf, &y, splx.pivots))
}

fn unsolved(status: LpStatus, iterations: usize) -> LpSolution {
    LpSolution {
        status,
        x: Vec::new(),
        objective: f64::NAN,
        iterations,
    }
}

fn finish(p: &LpProblem, sf: &StandardForm, y: &DVector<f64>, iterations: usize) -> LpSolution {
    let x: Vec<f64> = sf
        .maps
        .iter()
        .map(|m| match *m {
            VarMap::Single { col, offset, sign } => offset + sign * y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let objective = p.c.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
    debug_assert!(
        (objective - (sf.c.dot(y) + sf.obj_offset)).abs() <= 1e-6 * (1.0 + objective.abs())
    );
    LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        iterations,
    }
}
