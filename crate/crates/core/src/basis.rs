//! Quadratic polynomial bases on R^n and the calculus of models built on them.
//!
//! Two bases are supported, both with `q = (n+1)(n+2)/2` elements and the same
//! coefficient layout:
//!
//! ```text
//! [ n diagonal quadratics | n(n-1)/2 off-diagonal quadratics (i<j, lexicographic) | n linears | constant ]
//!   \____________________ alpha_Q ____________________________/  \_________ alpha_L __________/
//! ```
//!
//! * `Canonical`: `{x_i^2 / 2, x_i x_j, x_i, 1}`.
//! * `PsiHypercube { delta }`: the basis orthonormal under the uniform
//!   probability measure on `[-delta, delta]^n`:
//!   `(3 sqrt5 / (2 delta^2)) x_i^2 - sqrt5/2`, `(3/delta^2) x_i x_j`,
//!   `(sqrt3/delta) x_i`, `1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT5: f64 = 2.236_067_977_499_79;

/// Which polynomial basis a coefficient vector is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisKind {
    Canonical,
    /// Orthonormal basis on the hypercube of half-width `delta`.
    PsiHypercube {
        delta: f64,
    },
}

impl BasisKind {
    pub fn psi(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "hypercube basis needs a positive radius, got {delta}"
            )));
        }
        Ok(BasisKind::PsiHypercube { delta })
    }
}

/// Number of basis elements, `(n+1)(n+2)/2`.
pub fn basis_len(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Length of the quadratic block, `n(n+1)/2`; also the split index between
/// `alpha_Q` and `alpha_L`.
pub fn quad_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Position of the `x_i x_j` coefficient (`i < j`) in the coefficient vector.
pub fn off_diag_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    n + i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Iterates the off-diagonal pairs in coefficient order.
pub fn off_diag_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Evaluates every basis element at `x` (centered coordinates).
pub fn eval_basis(kind: BasisKind, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(basis_len(n));
    eval_basis_into(kind, x, &mut out);
    out
}

pub(crate) fn eval_basis_into(kind: BasisKind, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let n = x.len();
    match kind {
        BasisKind::Canonical => {
            out.extend(x.iter().map(|v| 0.5 * v * v));
            for (i, j) in off_diag_pairs(n) {
                out.push(x[i] * x[j]);
            }
            out.extend_from_slice(x);
            out.push(1.0);
        }
        BasisKind::PsiHypercube { delta } => {
            let d2 = delta * delta;
            let k3 = 3.0 * SQRT5 / (2.0 * d2);
            let k2 = 3.0 / d2;
            let k1 = SQRT3 / delta;
            out.extend(x.iter().map(|v| k3 * v * v - 0.5 * SQRT5));
            for (i, j) in off_diag_pairs(n) {
                out.push(k2 * x[i] * x[j]);
            }
            out.extend(x.iter().map(|v| k1 * v));
            out.push(1.0);
        }
    }
}

/// A polynomial of degree at most four, as monomials `coef * prod x_v^e_v`.
#[derive(Debug, Clone)]
struct Poly {
    terms: Vec<(f64, Vec<u8>)>,
}

impl Poly {
    fn psi_element(n: usize, idx: usize, delta: f64) -> Poly {
        let d2 = delta * delta;
        let mono = |pairs: &[(usize, u8)]| {
            let mut e = vec![0u8; n];
            for &(v, p) in pairs {
                e[v] += p;
            }
            e
        };
        let q = basis_len(n);
        let terms = if idx < n {
            vec![
                (3.0 * SQRT5 / (2.0 * d2), mono(&[(idx, 2)])),
                (-0.5 * SQRT5, mono(&[])),
            ]
        } else if idx < quad_len(n) {
            let (i, j) = off_diag_pairs(n).nth(idx - n).expect("index in range");
            vec![(3.0 / d2, mono(&[(i, 1), (j, 1)]))]
        } else if idx < q - 1 {
            let i = idx - quad_len(n);
            vec![(SQRT3 / delta, mono(&[(i, 1)]))]
        } else {
            vec![(1.0, mono(&[]))]
        };
        Poly { terms }
    }

    /// Integral of `self * other` against the uniform probability measure on
    /// `[-delta, delta]^n`, from the one-dimensional moments.
    fn inner(&self, other: &Poly, delta: f64) -> f64 {
        let moment = |k: u8| -> f64 {
            if k % 2 == 1 {
                0.0
            } else {
                delta.powi(k as i32) / (k as f64 + 1.0)
            }
        };
        let mut total = 0.0;
        for (ca, ea) in &self.terms {
            for (cb, eb) in &other.terms {
                let m: f64 = ea.iter().zip(eb).map(|(a, b)| moment(a + b)).product();
                total += ca * cb * m;
            }
        }
        total
    }
}

/// Gram matrix of the hypercube basis under the uniform probability measure
/// on `[-delta, delta]^n`, computed exactly from one-dimensional moments.
pub fn gram_psi(n: usize, delta: f64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "dimension must be at least 1".into(),
        ));
    }
    BasisKind::psi(delta)?;
    let q = basis_len(n);
    let polys: Vec<Poly> = (0..q).map(|k| Poly::psi_element(n, k, delta)).collect();
    let mut g = DMatrix::zeros(q, q);
    for a in 0..q {
        for b in a..q {
            let v = polys[a].inner(&polys[b], delta);
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Ok(g)
}

/// Canonical-form pieces of a quadratic: `c + b'd + d'Hd/2` with `d = x - center`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalParts {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub constant: f64,
}

/// Quadratic polynomial `m(x) = sum_k alpha_k phi_k(x - center)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    pub n: usize,
    pub basis: BasisKind,
    pub alpha: Vec<f64>,
    pub center: Vec<f64>,
}

/// Value, gradient and Hessian of a model at a point.
#[derive(Debug, Clone)]
pub struct Calculus {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl QuadraticModel {
    pub fn new(basis: BasisKind, alpha: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        let n = center.len();
        if alpha.len() != basis_len(n) {
            return Err(Error::DimensionMismatch {
                expected: basis_len(n),
                found: alpha.len(),
            });
        }
        Ok(Self {
            n,
            basis,
            alpha,
            center,
        })
    }

    pub fn zero(basis: BasisKind, center: Vec<f64>) -> Self {
        let q = basis_len(center.len());
        Self {
            n: center.len(),
            basis,
            alpha: vec![0.0; q],
            center,
        }
    }

    /// Canonical-basis model with the given Hessian, gradient and value at `center`.
    pub fn from_canonical_parts(
        center: Vec<f64>,
        hessian: &DMatrix<f64>,
        gradient: &[f64],
        constant: f64,
    ) -> Result<Self> {
        let n = center.len();
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: hessian.nrows(),
            });
        }
        if gradient.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: gradient.len(),
            });
        }
        let mut alpha = Vec::with_capacity(basis_len(n));
        alpha.extend((0..n).map(|i| hessian[(i, i)]));
        for (i, j) in off_diag_pairs(n) {
            alpha.push(0.5 * (hessian[(i, j)] + hessian[(j, i)]));
        }
        alpha.extend_from_slice(gradient);
        alpha.push(constant);
        Self::new(BasisKind::Canonical, alpha, center)
    }

    pub fn alpha_q(&self) -> &[f64] {
        &self.alpha[..quad_len(self.n)]
    }

    pub fn alpha_l(&self) -> &[f64] {
        &self.alpha[quad_len(self.n)..]
    }

    /// Hessian, gradient at the center and value at the center.
    pub fn canonical_parts(&self) -> CanonicalParts {
        let canon = match self.basis {
            BasisKind::Canonical => self.alpha.clone(),
            BasisKind::PsiHypercube { delta } => psi_to_canonical(self.n, &self.alpha, delta),
        };
        let n = self.n;
        let mut h = DMatrix::zeros(n, n);
        for i in 0..n {
            h[(i, i)] = canon[i];
        }
        for (k, (i, j)) in off_diag_pairs(n).enumerate() {
            h[(i, j)] = canon[n + k];
            h[(j, i)] = canon[n + k];
        }
        let q = quad_len(n);
        CanonicalParts {
            hessian: h,
            gradient: DVector::from_column_slice(&canon[q..q + n]),
            constant: canon[q + n],
        }
    }

    /// Exact value, gradient and Hessian at `x`.
    pub fn value_grad_hess(&self, x: &[f64]) -> Calculus {
        let parts = self.canonical_parts();
        let d = DVector::from_iterator(self.n, x.iter().zip(&self.center).map(|(a, c)| a - c));
        let hd = &parts.hessian * &d;
        let value = parts.constant + parts.gradient.dot(&d) + 0.5 * d.dot(&hd);
        Calculus {
            value,
            gradient: parts.gradient + hd,
            hessian: parts.hessian,
        }
    }

    /// Evaluates the model value only, directly in its own basis.
    pub fn value(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        eval_basis(self.basis, &d)
            .iter()
            .zip(&self.alpha)
            .map(|(p, a)| p * a)
            .sum()
    }

    pub fn convert(&self, target: BasisKind) -> Result<QuadraticModel> {
        convert_coefficients(self, target)
    }
}

fn canonical_to_psi(n: usize, canon: &[f64], delta: f64) -> Vec<f64> {
    let d2 = delta * delta;
    let q = quad_len(n);
    let mut out = vec![0.0; basis_len(n)];
    let mut constant = canon[q + n];
    for i in 0..n {
        out[i] = canon[i] * d2 / (3.0 * SQRT5);
        constant += canon[i] * d2 / 6.0;
    }
    for k in n..q {
        out[k] = canon[k] * d2 / 3.0;
    }
    for i in 0..n {
        out[q + i] = canon[q + i] * delta / SQRT3;
    }
    out[q + n] = constant;
    out
}

fn psi_to_canonical(n: usize, psi: &[f64], delta: f64) -> Vec<f64> {
    let d2 = delta * delta;
    let q = quad_len(n);
    let mut out = vec![0.0; basis_len(n)];
    let mut constant = psi[q + n];
    for i in 0..n {
        out[i] = psi[i] * 3.0 * SQRT5 / d2;
        constant -= out[i] * d2 / 6.0;
    }
    for k in n..q {
        out[k] = psi[k] * 3.0 / d2;
    }
    for i in 0..n {
        out[q + i] = psi[q + i] * SQRT3 / delta;
    }
    out[q + n] = constant;
    out
}

/// Re-expresses `model` in the `target` basis; the represented function is unchanged.
///
/// Off-diagonal quadratic coefficients map by a nonzero scalar, so their
/// sparsity pattern is preserved in both directions.
pub fn convert_coefficients(model: &QuadraticModel, target: BasisKind) -> Result<QuadraticModel> {
    if model.alpha.len() != basis_len(model.n) || model.center.len() != model.n {
        return Err(Error::DimensionMismatch {
            expected: basis_len(model.n),
            found: model.alpha.len(),
        });
    }
    if let BasisKind::PsiHypercube { delta } = target {
        BasisKind::psi(delta)?;
    }
    let canon = match model.basis {
        BasisKind::Canonical => model.alpha.clone(),
        BasisKind::PsiHypercube { delta } => psi_to_canonical(model.n, &model.alpha, delta),
    };
    let alpha = match target {
        BasisKind::Canonical => canon,
        BasisKind::PsiHypercube { delta } => canonical_to_psi(model.n, &canon, delta),
    };
    QuadraticModel::new(target, alpha, model.center.clone())
}

/// A twice differentiable function with analytic derivatives.
pub trait SmoothFunction {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

impl SmoothFunction for QuadraticModel {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.value_grad_hess(x).value
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.value_grad_hess(x).gradient
    }
    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        self.canonical_parts().hessian
    }
}

/// Points at which an [`error_profile`] is measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    /// `per_axis^n` lattice, including the cube corners.
    Lattice { per_axis: usize },
    /// `count` points drawn uniformly from the cube.
    Uniform { count: usize, seed: u64 },
}

impl GridSpec {
    /// A lattice with at least 100 points for `n <= 3`, a seeded sample of
    /// 1000 points otherwise.
    pub fn default_for(n: usize) -> GridSpec {
        match n {
            1 => GridSpec::Lattice { per_axis: 100 },
            2 => GridSpec::Lattice { per_axis: 10 },
            3 => GridSpec::Lattice { per_axis: 5 },
            _ => GridSpec::Uniform {
                count: 1000,
                seed: 0x005e_ed0f_c0be,
            },
        }
    }

    /// Materializes the grid inside `B_inf(x0; delta)`.
    pub fn points(&self, x0: &[f64], delta: f64) -> Vec<Vec<f64>> {
        let n = x0.len();
        match *self {
            GridSpec::Lattice { per_axis } => {
                let per_axis = per_axis.max(1);
                let coord = |k: usize| {
                    if per_axis == 1 {
                        0.0
                    } else {
                        -delta + 2.0 * delta * k as f64 / (per_axis - 1) as f64
                    }
                };
                let total = per_axis.pow(n as u32);
                (0..total)
                    .map(|mut idx| {
                        (0..n)
                            .map(|v| {
                                let k = idx % per_axis;
                                idx /= per_axis;
                                x0[v] + coord(k)
                            })
                            .collect()
                    })
                    .collect()
            }
            GridSpec::Uniform { count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..count)
                    .map(|_| {
                        x0.iter()
                            .map(|c| c + rng.random_range(-delta..=delta))
                            .collect()
                    })
                    .collect()
            }
        }
    }
}

/// Empirical fully-quadratic error constants of a model on `B_inf(x0; delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorProfile {
    /// `max |f - m| / delta^3`
    pub e_f: f64,
    /// `max ||grad f - grad m||_2 / delta^2`
    pub e_g: f64,
    /// `max ||hess f - hess m||_2 / delta`
    pub e_h: f64,
}

pub(crate) fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn error_profile<F: SmoothFunction + ?Sized>(
    model: &QuadraticModel,
    f: &F,
    x0: &[f64],
    delta: f64,
    grid: GridSpec,
) -> ErrorProfile {
    let parts = model.canonical_parts();
    let mut e_f = 0.0f64;
    let mut e_g = 0.0f64;
    let mut e_h = 0.0f64;
    for x in grid.points(x0, delta) {
        let d = DVector::from_iterator(model.n, x.iter().zip(&model.center).map(|(a, c)| a - c));
        let hd = &parts.hessian * &d;
        let mv = parts.constant + parts.gradient.dot(&d) + 0.5 * d.dot(&hd);
        let mg = &parts.gradient + hd;
        e_f = e_f.max((f.value(&x) - mv).abs());
        e_g = e_g.max((f.gradient(&x) - mg).norm());
        e_h = e_h.max(spectral_norm_sym(&(f.hessian(&x) - &parts.hessian)));
    }
    ErrorProfile {
        e_f: e_f / delta.powi(3),
        e_g: e_g / delta.powi(2),
        e_h: e_h / delta,
    }
}
