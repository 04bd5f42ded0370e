//! Trust-region subproblem `min g's + s'Hs/2, ||s||_2 <= delta`.
//!
//! Moré–Sorensen iteration carried out in the eigenbasis of `H`: with
//! `H = Q diag(l) Q'` and `gh = Q'g`, the step is `s(lambda) = -sum gh_i/(l_i+lambda) q_i`
//! and the secular equation `1/||s(lambda)|| = 1/delta` is solved by safeguarded
//! Newton. The hard case (`g` orthogonal to the leftmost eigenspace) is completed
//! with a step along a leftmost eigenvector.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const MAX_NEWTON: usize = 100;
const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct TrsProblem {
    pub g: DVector<f64>,
    pub h: DMatrix<f64>,
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct TrsSolution {
    pub s: DVector<f64>,
    pub lambda: f64,
    /// `g's + s'Hs/2` at the returned step.
    pub model_change: f64,
    pub hard_case: bool,
    pub iterations: usize,
}

struct Secular<'a> {
    eig: &'a [f64],
    gh: &'a [f64],
}

impl Secular<'_> {
    /// `(||s||^2, sum gh_i^2 / (l_i + lambda)^3)`, skipping `skip` indices.
    fn norms(&self, lambda: f64, skip: &[bool]) -> (f64, f64) {
        let mut n2 = 0.0;
        let mut d3 = 0.0;
        for i in 0..self.eig.len() {
            if skip[i] || self.gh[i] == 0.0 {
                continue;
            }
            let den = self.eig[i] + lambda;
            let t = self.gh[i] / den;
            n2 += t * t;
            d3 += t * t / den;
        }
        (n2, d3)
    }

    fn step_coords(&self, lambda: f64, skip: &[bool]) -> Vec<f64> {
        (0..self.eig.len())
            .map(|i| {
                if skip[i] || self.gh[i] == 0.0 {
                    0.0
                } else {
                    -self.gh[i] / (self.eig[i] + lambda)
                }
            })
            .collect()
    }
}

fn validate(p: &TrsProblem) -> Result<()> {
    let n = p.g.len();
    if p.h.nrows() != n || p.h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.h.nrows(),
        });
    }
    if !(p.delta > 0.0) || !p.delta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "trust-region radius must be positive, got {}",
            p.delta
        )));
    }
    if p.g.iter().chain(p.h.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Trs("non-finite gradient or Hessian".into()));
    }
    let scale = 1.0f64.max(p.h.amax());
    for i in 0..n {
        for j in i + 1..n {
            if (p.h[(i, j)] - p.h[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument("Hessian is not symmetric".into()));
            }
        }
    }
    Ok(())
}

pub fn solve_trs(p: &TrsProblem) -> Result<TrsSolution> {
    validate(p)?;
    let n = p.g.len();
    let delta = p.delta;
    let model = |s: &DVector<f64>| p.g.dot(s) + 0.5 * s.dot(&(&p.h * s));

    if p.g.amax() == 0.0 && p.h.amax() == 0.0 {
        let s = DVector::zeros(n);
        return Ok(TrsSolution {
            s,
            lambda: 0.0,
            model_change: 0.0,
            hard_case: false,
            iterations: 0,
        });
    }

    let sym = 0.5 * (&p.h + p.h.transpose());
    let se = SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Trs("eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let eig: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let q = DMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
    let gh: Vec<f64> = (q.transpose() * &p.g).iter().copied().collect();
    let sec = Secular { eig: &eig, gh: &gh };
    let to_world = |coords: &[f64]| &q * DVector::from_column_slice(coords);

    let lmin = eig[0];
    let lmax_abs = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let gnorm = p.g.norm();
    let none = vec![false; n];

    // Interior Newton step.
    if lmin > 0.0 {
        let (n2, _) = sec.norms(0.0, &none);
        if n2.sqrt() <= delta {
            let s = to_world(&sec.step_coords(0.0, &none));
            let mc = model(&s);
            return Ok(TrsSolution {
                s,
                lambda: 0.0,
                model_change: mc,
                hard_case: false,
                iterations: 0,
            });
        }
    }

    let lam_lo = (-lmin).max(0.0);
    let eig_tol = 1e-12 * lmax_abs.max(1.0);
    let leftmost: Vec<bool> = eig.iter().map(|&l| l - lmin <= eig_tol).collect();
    let g_left: f64 = gh
        .iter()
        .zip(&leftmost)
        .filter(|(_, &l)| l)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt();

    // Hard case: the boundary cannot be reached by moving lambda alone.
    if lmin <= 0.0 && g_left <= 1e-12 * gnorm.max(1e-300) {
        let (n2, _) = sec.norms(lam_lo, &leftmost);
        if n2.sqrt() < delta {
            let mut coords = sec.step_coords(lam_lo, &leftmost);
            let tau = (delta * delta - n2).max(0.0).sqrt();
            coords[0] += tau;
            let s = to_world(&coords);
            let mc = model(&s);
            return Ok(TrsSolution {
                s,
                lambda: lam_lo,
                model_change: mc,
                hard_case: true,
                iterations: 0,
            });
        }
    }

    // Newton on phi(lambda) = 1/||s(lambda)|| - 1/delta from the left.
    let mut lo = lam_lo;
    let mut hi = lam_lo + gnorm / delta + lmax_abs + 1.0;
    let mut lambda = if lmin > 0.0 {
        0.0
    } else {
        lam_lo + (1e-14 * lmax_abs.max(1.0)).max(f64::MIN_POSITIVE)
    };
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..MAX_NEWTON {
        iterations = it + 1;
        let (n2, d3) = sec.norms(lambda, &none);
        let norm = n2.sqrt();
        if !norm.is_finite() {
            lo = lambda;
            lambda = 0.5 * (lo + hi);
            continue;
        }
        let gap = (norm - delta) / delta;
        if gap.abs() <= 1e-12 {
            converged = true;
            break;
        }
        if gap > 0.0 {
            lo = lo.max(lambda);
        } else {
            hi = hi.min(lambda);
        }
        // Newton on 1/||s||: lambda += (||s||^2 / (s'(H+lambda I)^{-1} s)) * gap.
        let mut next = if d3 > 0.0 {
            lambda + (n2 / d3) * gap
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - lambda).abs() <= 1e-15 * lambda.abs().max(1.0) {
            converged = gap.abs() <= BOUNDARY_TOL;
            break;
        }
        lambda = next;
    }
    let (n2, _) = sec.norms(lambda, &none);
    let norm = n2.sqrt();
    if !converged && (norm - delta).abs() > BOUNDARY_TOL * delta {
        if norm < delta && lmin <= 0.0 {
            // Near-hard case: pad with the leftmost eigenvector to reach the boundary.
            let mut coords = sec.step_coords(lambda, &none);
            let c0 = coords[0];
            let rest = n2 - c0 * c0;
            let target = (delta * delta - rest).max(0.0).sqrt();
            let cand = [target, -target];
            let best = cand
                .iter()
                .map(|&c| {
                    let mut v = coords.clone();
                    v[0] = c;
                    let s = to_world(&v);
                    (model(&s), c)
                })
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("two candidates");
            coords[0] = best.1;
            let s = to_world(&coords);
            return Ok(TrsSolution {
                s,
                lambda,
                model_change: best.0,
                hard_case: true,
                iterations,
            });
        }
    }
    let mut s = to_world(&sec.step_coords(lambda, &none));
    if !s.iter().all(|v| v.is_finite()) {
        return Err(Error::Trs(format!(
            "secular equation did not converge: ||s|| = {norm}, delta = {delta}"
        )));
    }
    let snorm = s.norm();
    if snorm > delta {
        // Stalled just outside the ball: pull back onto the boundary.
        s *= delta / snorm;
    }
    let mc = model(&s);
    Ok(TrsSolution {
        s,
        lambda,
        model_change: mc,
        hard_case: false,
        iterations,
    })
}
