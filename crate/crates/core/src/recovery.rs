//! Compressed-sensing checks behind sparse Hessian recovery.
//!
//! Restricted isometry constants are computed exactly by enumerating
//! supports, so only small matrices are accepted. The randomized experiment
//! draws sparse quadratics, samples them uniformly in a hypercube, fits the
//! minimum l1 model in the orthonormal hypercube basis and measures how often
//! the quadratic is recovered exactly.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{
    basis_len, error_profile, spectral_norm_sym, BasisKind, ErrorProfile, GridSpec, QuadraticModel,
    SmoothFunction,
};
use crate::error::{Error, Result};
use crate::fit::{fit_l1_with, SampleSet};
use crate::problems::SparseQuadratic;
use crate::subsolvers::{solve_lp, LpProblem, LpStatus};

/// Largest number of supports [`rip_constant`] will enumerate.
pub const MAX_SUPPORTS: u128 = 1_000_000;

/// Grid used for the error profile of each recovery trial.
const TRIAL_GRID_POINTS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct RipReport {
    pub s: usize,
    pub delta_s: f64,
    /// A support attaining `delta_s`.
    pub support: Vec<usize>,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Calls `visit` on every increasing `k`-subset of `0..n`.
fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn isometry_defect(gram: &DMatrix<f64>, support: &[usize]) -> f64 {
    let s = support.len();
    let sub = DMatrix::from_fn(s, s, |i, j| gram[(support[i], support[j])]);
    let eig = SymmetricEigen::new(sub).eigenvalues;
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (1.0 - lo).max(hi - 1.0)
}

/// Restricted isometry constant of order `s`: the largest deviation from 1 of
/// the squared singular values over all `s`-column submatrices.
pub fn rip_constant(a: &DMatrix<f64>, s: usize) -> Result<RipReport> {
    rip_constant_containing(a, s, &[])
}

/// Like [`rip_constant`], but only over supports that contain every column in
/// `required`. This is a lower bound on the unrestricted constant.
pub fn rip_constant_containing(
    a: &DMatrix<f64>,
    s: usize,
    required: &[usize],
) -> Result<RipReport> {
    let n = a.ncols();
    if s == 0 || s > n {
        return Err(Error::InvalidArgument(format!(
            "RIP order must lie in 1..={n}, got {s}"
        )));
    }
    let mut fixed = required.to_vec();
    fixed.sort_unstable();
    fixed.dedup();
    if fixed.iter().any(|&c| c >= n) || fixed.len() > s {
        return Err(Error::InvalidArgument(
            "required columns must be distinct valid indices, at most s of them".into(),
        ));
    }
    let free: Vec<usize> = (0..n).filter(|c| !fixed.contains(c)).collect();
    let k = s - fixed.len();
    let count = binomial(free.len(), k);
    if count > MAX_SUPPORTS {
        return Err(Error::CombinatorialGuard {
            count,
            limit: MAX_SUPPORTS,
        });
    }
    let gram = a.tr_mul(a);
    let mut best = f64::NEG_INFINITY;
    let mut support = Vec::new();
    let mut cols = Vec::with_capacity(s);
    for_each_subset(free.len(), k, |pick| {
        cols.clear();
        cols.extend_from_slice(&fixed);
        cols.extend(pick.iter().map(|&i| free[i]));
        let d = isometry_defect(&gram, &cols);
        if d > best {
            best = d;
            support = cols.clone();
            support.sort_unstable();
        }
    });
    Ok(RipReport {
        s,
        delta_s: best.max(0.0),
        support,
    })
}

/// Orthogonal projector onto the complement of the range of `a2`,
/// `I - A2 (A2'A2)^{-1} A2'`.
pub fn partial_projector(a2: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = a2.nrows();
    if a2.ncols() == 0 {
        return Ok(DMatrix::identity(k, k));
    }
    let sv = a2.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = if a2.ncols() > k { 0.0 } else { sv.min() };
    if !(smin > 1e-10 * smax) {
        return Err(Error::RankDeficient(format!(
            "A2 must have full column rank (singular values {smin:e} .. {smax:e})"
        )));
    }
    let gram = a2.tr_mul(a2);
    let inv = gram
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("A2'A2 is not positive definite".into()))?
        .inverse();
    let p = DMatrix::identity(k, k) - a2 * inv * a2.transpose();
    Ok(0.5 * (&p + p.transpose()))
}

/// Partial restricted isometry constant: the RIP constant of `P A1` with `P`
/// the projector of [`partial_projector`].
pub fn partial_rip_constant(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    order: usize,
) -> Result<RipReport> {
    if a1.nrows() != a2.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a1.nrows(),
            found: a2.nrows(),
        });
    }
    let p = partial_projector(a2)?;
    rip_constant(&(p * a1), order)
}

/// Solves `min ||z||_1` subject to `A z = A zbar` and reports whether the
/// minimizer is `zbar` to within `1e-6 max(1, ||zbar||_inf)`.
pub fn verify_l1_recovery(a: &DMatrix<f64>, zbar: &[f64]) -> Result<bool> {
    let (k, n) = a.shape();
    if zbar.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: zbar.len(),
        });
    }
    let b = a * DVector::from_column_slice(zbar);
    // z = u - v with u, v >= 0.
    let mut eq = DMatrix::zeros(k, 2 * n);
    eq.view_mut((0, 0), (k, n)).copy_from(a);
    eq.view_mut((0, n), (k, n)).copy_from(&(-a));
    let lp = LpProblem::new(vec![1.0; 2 * n]).with_eq(eq, b.iter().copied().collect());
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    let scale = zbar.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let err = (0..n)
        .map(|i| (sol.x[i] - sol.x[n + i] - zbar[i]).abs())
        .fold(0.0, f64::max);
    Ok(err <= 1e-6 * scale)
}

/// The `t`-th output (from 0) of SplitMix64 started at `master`. Used to give
/// every trial its own seed.
pub fn trial_seed(master: u64, t: u64) -> u64 {
    let mut z = master.wrapping_add((t + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryTrial {
    pub trial: usize,
    pub seed: u64,
    pub p: usize,
    pub success: bool,
    /// `||alpha* - alpha||_2` of canonical coefficients; NaN if the fit failed.
    pub coef_err: f64,
    pub errors: ErrorProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub n: usize,
    pub h: usize,
    pub p: usize,
    pub delta: f64,
    pub trials: Vec<RecoveryTrial>,
    pub success_rate: f64,
}

/// Coefficient error below which a trial counts as exact recovery.
pub const RECOVERY_TOL: f64 = 1e-6;

/// Randomized sparse Hessian recovery at one sample size.
///
/// Trial `t` uses the seed `trial_seed(seed, t)`. It draws the quadratic
/// (see [`SparseQuadratic::random`]), a center `x0` uniform in `[-1, 1]^n`
/// and then points `x0 + u`, `u` uniform in `[-delta, delta]^n`. Because the
/// quadratic is drawn first, runs with different `p` and the same seed use
/// nested sample sets. The model is the minimum l1 fit in the hypercube basis
/// of radius `delta` about `x0`.
pub fn sparse_hessian_recovery_experiment(
    n: usize,
    h: usize,
    p: usize,
    trials: usize,
    delta: f64,
    seed: u64,
) -> Result<RecoveryReport> {
    let q = basis_len(n);
    if n == 0 || p == 0 || p > q {
        return Err(Error::InvalidArgument(format!(
            "need n >= 1 and 1 <= p <= {q}, got n = {n}, p = {p}"
        )));
    }
    if h > q - n - 1 {
        return Err(Error::InvalidArgument(format!(
            "need h <= {}, got {h}",
            q - n - 1
        )));
    }
    let basis = BasisKind::psi(delta)?;
    let mut out = Vec::with_capacity(trials);
    for t in 0..trials {
        let s = trial_seed(seed, t as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let f = SparseQuadratic::random(n, h, &mut rng)?;
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let points: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                x0.iter()
                    .map(|c| c + rng.random_range(-delta..=delta))
                    .collect()
            })
            .collect();
        let values = points.iter().map(|y| f.value(y)).collect();
        let fitted = SampleSet::new(points, values, x0.clone())
            .and_then(|y| fit_l1_with(&y, basis, 0.0, false));
        let trial = match fitted {
            Ok(o) => {
                let truth = f.to_model(o.model.center.clone());
                let coef_err = o
                    .model
                    .alpha
                    .iter()
                    .zip(&truth.alpha)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let grid = GridSpec::Uniform {
                    count: TRIAL_GRID_POINTS,
                    seed: s,
                };
                RecoveryTrial {
                    trial: t,
                    seed: s,
                    p,
                    success: coef_err <= RECOVERY_TOL,
                    coef_err,
                    errors: error_profile(&o.model, &f, &x0, delta, grid),
                }
            }
            Err(_) => RecoveryTrial {
                trial: t,
                seed: s,
                p,
                success: false,
                coef_err: f64::NAN,
                errors: ErrorProfile {
                    e_f: f64::NAN,
                    e_g: f64::NAN,
                    e_h: f64::NAN,
                },
            },
        };
        out.push(trial);
    }
    let successes = out.iter().filter(|t| t.success).count();
    let success_rate = if trials == 0 {
        0.0
    } else {
        successes as f64 / trials as f64
    };
    Ok(RecoveryReport {
        n,
        h,
        p,
        delta,
        trials: out,
        success_rate,
    })
}

/// Checks the bounds of a hypercube-basis model `m` with coefficients `alpha`
/// on every grid point of `B_inf(0; delta)`:
/// `|m| <= 3 sqrt(c) ||alpha||`, `||grad m|| <= 3 sqrt(5) sqrt(c) ||alpha|| / delta`
/// and `||hess m|| <= 3 sqrt(5) sqrt(c) ||alpha|| / delta^2`, with `c` the number
/// of nonzero coefficients.
pub fn lemma_bound_check(alpha: &[f64], n: usize, delta: f64, grid: GridSpec) -> Result<bool> {
    let model = QuadraticModel::new(BasisKind::psi(delta)?, alpha.to_vec(), vec![0.0; n])?;
    let card = alpha.iter().filter(|v| **v != 0.0).count() as f64;
    let norm = alpha.iter().map(|v| v * v).sum::<f64>().sqrt();
    let base = 3.0 * card.sqrt() * norm;
    let slack = |bound: f64| bound * (1.0 + 1e-12) + 1e-300;
    let value_bound = slack(base);
    let grad_bound = slack(5f64.sqrt() * base / delta);
    let hess_bound = slack(5f64.sqrt() * base / (delta * delta));
    let parts = model.canonical_parts();
    if spectral_norm_sym(&parts.hessian) > hess_bound {
        return Ok(false);
    }
    for x in grid.points(&vec![0.0; n], delta) {
        let c = model.value_grad_hess(&x);
        if c.value.abs() > value_bound || c.gradient.norm() > grad_bound {
            return Ok(false);
        }
    }
    Ok(true)
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one row per trial:
/// `trial,seed,n,h,p,success,coef_err,ef,eg,eh`.
pub fn write_recovery_csv(reports: &[RecoveryReport], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record([
        "trial", "seed", "n", "h", "p", "success", "coef_err", "ef", "eg", "eh",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in reports {
        for t in &r.trials {
            w.write_record([
                t.trial.to_string(),
                t.seed.to_string(),
                r.n.to_string(),
                r.h.to_string(),
                t.p.to_string(),
                t.success.to_string(),
                fmt_f64(t.coef_err),
                fmt_f64(t.errors.e_f),
                fmt_f64(t.errors.e_g),
                fmt_f64(t.errors.e_h),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// 17 significant digits, so values round-trip exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_are_enumerated_once() {
        let mut seen = Vec::new();
        for_each_subset(5, 3, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen[0], vec![0, 1, 2]);
        assert_eq!(seen[9], vec![2, 3, 4]);
        let mut empty = 0;
        for_each_subset(4, 0, |_| empty += 1);
        assert_eq!(empty, 1);
    }

    #[test]
    fn duplicated_column_has_unit_constant() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let r = rip_constant(&a, 2).unwrap();
        assert!((r.delta_s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn guard_refuses_large_enumerations() {
        let a = DMatrix::zeros(5, 60);
        assert!(matches!(
            rip_constant(&a, 6),
            Err(Error::CombinatorialGuard { .. })
        ));
    }

    #[test]
    fn projector_of_first_axis() {
        let mut a2 = DMatrix::zeros(3, 1);
        a2[(0, 0)] = 2.0;
        let p = partial_projector(&a2).unwrap();
        assert!(
            (p - DMatrix::from_diagonal(&DVector::from_column_slice(&[0.0, 1.0, 1.0]))).amax()
                < 1e-15
        );
    }

    #[test]
    fn split_seeds_differ() {
        assert_ne!(trial_seed(7, 0), trial_seed(7, 1));
        assert_ne!(trial_seed(7, 0), trial_seed(8, 0));
    }
}
