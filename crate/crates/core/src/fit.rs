//! Interpolation matrices and underdetermined quadratic model fitting.
//!
//! Both fitting criteria work in shifted and scaled coordinates
//! `(y - center) / scale`, where `scale` puts the farthest sample point on the
//! unit sphere, and the result is mapped back to original coordinates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::{
    basis_len, convert_coefficients, eval_basis_into, quad_len, BasisKind, QuadraticModel,
};
use crate::error::{Error, Result};
use crate::subsolvers::{solve_lp, solve_lp_with_basis, LpProblem, LpStatus};

/// Relative cutoff below which singular values of the KKT matrix are discarded.
pub const SVD_CUTOFF: f64 = 1e-12;
const SVD_FLOOR: f64 = 1e-300;

/// Interpolation points with their function values.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub center: Vec<f64>,
    /// Radius used to normalize the shifted points; 1 for unscaled sets.
    pub scale: f64,
}

impl SampleSet {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::DegenerateSampleSet("no sample points".into()));
        }
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: values.len(),
            });
        }
        let n = center.len();
        if let Some(bad) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        for (i, a) in points.iter().enumerate() {
            if points[..i].iter().any(|b| b == a) {
                return Err(Error::DegenerateSampleSet(format!(
                    "sample point {i} is repeated"
                )));
            }
        }
        Ok(Self {
            points,
            values,
            center,
            scale: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest Euclidean distance from the center.
    pub fn radius(&self) -> f64 {
        self.points
            .iter()
            .map(|p| dist(p, &self.center))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A sample set moved to the origin and shrunk into the unit ball, with the
/// data needed to go back.
#[derive(Debug, Clone)]
pub struct ScaledSampleSet {
    /// Centered at the origin, `scale` records the normalizing radius.
    pub set: SampleSet,
    pub origin: Vec<f64>,
}

impl ScaledSampleSet {
    pub fn scale(&self) -> f64 {
        self.set.scale
    }

    pub fn to_original(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.origin)
            .map(|(v, o)| o + self.set.scale * v)
            .collect()
    }

    /// Maps a model fitted in scaled coordinates back to original ones.
    pub fn model_to_original(&self, model: &QuadraticModel) -> Result<QuadraticModel> {
        let canon = convert_coefficients(model, BasisKind::Canonical)?;
        let n = canon.n;
        let s = self.set.scale;
        let q = quad_len(n);
        let mut alpha = canon.alpha;
        for a in &mut alpha[..q] {
            *a /= s * s;
        }
        for a in &mut alpha[q..q + n] {
            *a /= s;
        }
        // A model centered at c in scaled space is centered at origin + s c.
        let center = self.to_original(&canon.center);
        QuadraticModel::new(BasisKind::Canonical, alpha, center)
    }
}

/// Shifts the set to its center and scales it so the farthest point lies on
/// the unit sphere.
pub fn scale_sample_set(y: &SampleSet) -> Result<ScaledSampleSet> {
    let r = y.radius();
    if !(r > 0.0) {
        return Err(Error::DegenerateSampleSet(
            "all sample points coincide with the center".into(),
        ));
    }
    let n = y.dim();
    let points = y
        .points
        .iter()
        .map(|p| p.iter().zip(&y.center).map(|(a, c)| (a - c) / r).collect())
        .collect();
    Ok(ScaledSampleSet {
        set: SampleSet {
            points,
            values: y.values.clone(),
            center: vec![0.0; n],
            scale: r,
        },
        origin: y.center.clone(),
    })
}

/// `p x q` matrix with entry `(i, j) = phi_j(yhat_i)`, where `yhat_i` is the
/// i-th point shifted by the set's center and, if `scaled`, divided by the
/// set's radius.
pub fn build_interp_matrix(kind: BasisKind, y: &SampleSet, scaled: bool) -> DMatrix<f64> {
    let n = y.dim();
    let q = basis_len(n);
    let r = if scaled { y.radius() } else { 1.0 };
    let r = if r > 0.0 { r } else { 1.0 };
    let mut m = DMatrix::zeros(y.len(), q);
    let mut shifted = vec![0.0; n];
    let mut row = Vec::with_capacity(q);
    for (i, p) in y.points.iter().enumerate() {
        for k in 0..n {
            shifted[k] = (p[k] - y.center[k]) / r;
        }
        eval_basis_into(kind, &shifted, &mut row);
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitMethod {
    Mfn,
    MinL1,
    MinL1Noisy { eta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    /// KKT singular values discarded by the relative cutoff (MFN only).
    pub svd_cutoffs: Option<usize>,
    /// Simplex pivots (l1 fits only).
    pub lp_iterations: Option<usize>,
    /// `max_i |m(y_i) - f(y_i)|` in original coordinates.
    pub residual_inf: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: QuadraticModel,
    pub method: FitMethod,
    pub diagnostics: FitDiagnostics,
}

fn residual_inf(model: &QuadraticModel, y: &SampleSet) -> f64 {
    let parts = model.canonical_parts();
    y.points
        .iter()
        .zip(&y.values)
        .map(|(p, v)| {
            let d =
                DVector::from_iterator(model.n, p.iter().zip(&model.center).map(|(a, c)| a - c));
            let m = parts.constant + parts.gradient.dot(&d) + 0.5 * d.dot(&(&parts.hessian * &d));
            (m - v).abs()
        })
        .fold(0.0, f64::max)
}

/// Minimum Frobenius norm model: `min ||alpha_Q||_2^2 / 2` subject to exact
/// interpolation, in the canonical basis.
///
/// Solves `[[M_Q M_Q', M_L], [M_L', 0]] [lambda; alpha_L] = [f; 0]` with a
/// truncated spectral decomposition of the symmetric KKT matrix (singular
/// values below `SVD_CUTOFF * sigma_max` are dropped) and sets
/// `alpha_Q = M_Q' lambda`.
pub fn fit_mfn(y: &SampleSet) -> Result<FitOutcome> {
    let scaled = scale_sample_set(y)?;
    let m = build_interp_matrix(BasisKind::Canonical, &scaled.set, false);
    let (alpha, cutoffs) = mfn_coefficients(&m, &scaled.set.values, y.dim())?;
    let local = QuadraticModel::new(BasisKind::Canonical, alpha, vec![0.0; y.dim()])?;
    let model = scaled.model_to_original(&local)?;
    let residual = residual_inf(&model, y);
    Ok(FitOutcome {
        model,
        method: FitMethod::Mfn,
        diagnostics: FitDiagnostics {
            svd_cutoffs: Some(cutoffs),
            lp_iterations: None,
            residual_inf: residual,
        },
    })
}

pub(crate) fn mfn_coefficients(m: &DMatrix<f64>, f: &[f64], n: usize) -> Result<(Vec<f64>, usize)> {
    let p = m.nrows();
    let nq = quad_len(n);
    let r = n + 1;
    let mq = m.columns(0, nq);
    let ml = m.columns(nq, r);

    let dim = p + r;
    let mut kkt = DMatrix::zeros(dim, dim);
    kkt.view_mut((0, 0), (p, p))
        .copy_from(&(mq * mq.transpose()));
    kkt.view_mut((0, p), (p, r)).copy_from(&ml);
    kkt.view_mut((p, 0), (r, p)).copy_from(&ml.transpose());
    let mut rhs = DVector::zeros(dim);
    rhs.rows_mut(0, p).copy_from_slice(f);

    let eig = SymmetricEigen::try_new(kkt, f64::EPSILON, 0)
        .ok_or_else(|| Error::FitFailure("KKT decomposition did not converge".into()))?;
    let smax = eig.eigenvalues.amax();
    if !(smax > SVD_FLOOR) {
        return Err(Error::FitFailure("KKT matrix is numerically zero".into()));
    }
    let proj = eig.eigenvectors.tr_mul(&rhs);
    let mut coef = DVector::zeros(dim);
    let mut cutoffs = 0;
    for k in 0..dim {
        let s = eig.eigenvalues[k];
        if s.abs() < SVD_CUTOFF * smax {
            cutoffs += 1;
        } else {
            coef[k] = proj[k] / s;
        }
    }
    let sol = &eig.eigenvectors * coef;
    let lambda = sol.rows(0, p);
    let alpha_q = mq.transpose() * lambda;
    let mut alpha = Vec::with_capacity(nq + r);
    alpha.extend(alpha_q.iter());
    alpha.extend(sol.rows(p, r).iter());
    Ok((alpha, cutoffs))
}

/// Minimum l1 model: `min ||alpha_Q||_1 / p` subject to exact interpolation.
pub fn fit_min_l1(y: &SampleSet) -> Result<FitOutcome> {
    fit_l1_with(y, BasisKind::Canonical, 0.0, true)
}

/// Minimum l1 model under the band `||M alpha - f||_inf <= eta / sqrt(p)`.
/// `eta = 0` is the exact fit.
pub fn fit_min_l1_noisy(y: &SampleSet, eta: f64) -> Result<FitOutcome> {
    fit_l1_with(y, BasisKind::Canonical, eta, true)
}

/// Minimum l1 fit in an arbitrary basis.
///
/// With `scaled = false` the points are only shifted by the set's center,
/// which is how the hypercube basis is meant to be used. The returned model
/// is always canonical and in original coordinates.
pub fn fit_l1_with(y: &SampleSet, basis: BasisKind, eta: f64, scaled: bool) -> Result<FitOutcome> {
    let (coords, back) = if scaled {
        let s = scale_sample_set(y)?;
        (s.set.clone(), Some(s))
    } else {
        let mut local = y.clone();
        local.points = y
            .points
            .iter()
            .map(|p| p.iter().zip(&y.center).map(|(a, c)| a - c).collect())
            .collect();
        local.center = vec![0.0; y.dim()];
        (local, None)
    };
    let m = build_interp_matrix(basis, &coords, false);
    let (alpha, iterations) = l1_coefficients(&m, &coords.values, y.dim(), eta)?;
    let local = QuadraticModel::new(basis, alpha, vec![0.0; y.dim()])?;
    let model = match back {
        Some(s) => s.model_to_original(&local)?,
        None => {
            let mut c = convert_coefficients(&local, BasisKind::Canonical)?;
            c.center = y.center.clone();
            c
        }
    };
    let residual = residual_inf(&model, y);
    let method = if eta == 0.0 {
        FitMethod::MinL1
    } else {
        FitMethod::MinL1Noisy { eta }
    };
    Ok(FitOutcome {
        model,
        method,
        diagnostics: FitDiagnostics {
            svd_cutoffs: None,
            lp_iterations: Some(iterations),
            residual_inf: residual,
        },
    })
}

/// Feasible starting basis for the equality-constrained l1 LP: `p` independent
/// columns of `m` (linear columns first, then quadratic ones by pivoted
/// Gram-Schmidt), each quadratic one entering as `u` or `v` according to the
/// sign of its basic value. `None` when `m` lacks full row rank.
fn crash_basis(m: &DMatrix<f64>, f: &[f64], nq: usize) -> Option<Vec<usize>> {
    let (p, q) = m.shape();
    if p > q {
        return None;
    }
    if p == q {
        return signed_hint(m, f, nq, (0..q).collect());
    }
    let mut res = m.clone();
    let mut norms: Vec<f64> = (0..q).map(|j| res.column(j).norm_squared()).collect();
    let tol = 1e-20
        * norms
            .iter()
            .cloned()
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
    let mut taken = vec![false; q];
    let mut chosen = Vec::with_capacity(p);
    for _ in 0..p {
        let linear = (nq..q)
            .filter(|&j| !taken[j] && norms[j] > tol)
            .max_by(|&a, &b| norms[a].total_cmp(&norms[b]));
        let pick = linear.or_else(|| {
            (0..nq)
                .filter(|&j| !taken[j])
                .max_by(|&a, &b| norms[a].total_cmp(&norms[b]))
        })?;
        if norms[pick] <= tol {
            return None;
        }
        taken[pick] = true;
        chosen.push(pick);
        let qk = res.column(pick) / norms[pick].sqrt();
        for j in 0..q {
            if taken[j] {
                continue;
            }
            let d = qk.dot(&res.column(j));
            res.column_mut(j).axpy(-d, &qk, 1.0);
            norms[j] = res.column(j).norm_squared();
        }
    }
    signed_hint(m, f, nq, chosen)
}

fn signed_hint(m: &DMatrix<f64>, f: &[f64], nq: usize, chosen: Vec<usize>) -> Option<Vec<usize>> {
    let p = m.nrows();
    let b = DMatrix::from_fn(p, p, |i, k| m[(i, chosen[k])]);
    let z = b.lu().solve(&DVector::from_column_slice(f))?;
    Some(
        chosen
            .iter()
            .zip(z.iter())
            .map(|(&j, &v)| {
                // Linear column j is LP variable 2nq + (j - nq); v_j is nq + j.
                if j >= nq || v < 0.0 {
                    nq + j
                } else {
                    j
                }
            })
            .collect(),
    )
}

/// Solves the l1 LP for coefficients in the basis whose matrix is `m`.
/// Returns the coefficient vector of the model in that basis.
pub(crate) fn l1_coefficients(
    m: &DMatrix<f64>,
    f: &[f64],
    n: usize,
    eta: f64,
) -> Result<(Vec<f64>, usize)> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "band radius must be nonnegative, got {eta}"
        )));
    }
    let p = m.nrows();
    let nq = quad_len(n);
    let r = n + 1;
    // Variables: u (nq), v (nq), alpha_L (r); alpha_Q = u - v.
    let nv = 2 * nq + r;
    let mut c = vec![0.0; nv];
    for v in &mut c[..2 * nq] {
        *v = 1.0 / p as f64;
    }
    let mut a = DMatrix::zeros(p, nv);
    a.view_mut((0, 0), (p, nq)).copy_from(&m.columns(0, nq));
    a.view_mut((0, nq), (p, nq)).copy_from(&(-m.columns(0, nq)));
    a.view_mut((0, 2 * nq), (p, r)).copy_from(&m.columns(nq, r));
    let mut lower = vec![0.0; nv];
    let upper = vec![f64::INFINITY; nv];
    for l in &mut lower[2 * nq..] {
        *l = f64::NEG_INFINITY;
    }
    let lp = LpProblem::new(c).with_bounds(lower, upper);
    let lp = if eta == 0.0 {
        lp.with_eq(a, f.to_vec())
    } else {
        let band = eta / (p as f64).sqrt();
        let mut a_ub = DMatrix::zeros(2 * p, nv);
        a_ub.view_mut((0, 0), (p, nv)).copy_from(&a);
        a_ub.view_mut((p, 0), (p, nv)).copy_from(&(-&a));
        let mut b_ub = Vec::with_capacity(2 * p);
        b_ub.extend(f.iter().map(|v| v + band));
        b_ub.extend(f.iter().map(|v| -v + band));
        lp.with_ub(a_ub, b_ub)
    };
    let sol = match (eta == 0.0).then(|| crash_basis(m, f, nq)).flatten() {
        Some(hint) => solve_lp_with_basis(&lp, &hint)?,
        None => solve_lp(&lp)?,
    };
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    let mut alpha = Vec::with_capacity(nq + r);
    alpha.extend((0..nq).map(|k| sol.x[k] - sol.x[nq + k]));
    alpha.extend_from_slice(&sol.x[2 * nq..]);
    Ok((alpha, sol.iterations))
}
