//! Test objectives with sparse Hessians.
//!
//! The named problems follow the CUTEr definitions and standard starting
//! points. Objectives are generic over [`Scalar`] so reference derivatives come
//! from [`Jet`] evaluation; the optimizer only ever sees function values.
//!
//! Variant notes:
//! * CHNROSNB uses the 50-entry CUTEr `alpha` table and the weight `16 alpha_i^2`.
//! * GENHUMPS uses `zeta = 20` and the start `(-506, 506.2, ..., 506.2)`.
//! * HILBERTA is `x'Hx` with the Hilbert matrix, started at `x_i = -4/i`.
//! * Known minimum values not available in closed form (BDQRTIC, CRAGGLVY) were
//!   computed once by a BFGS run with exact gradients and are frozen below.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{quad_len, QuadraticModel, SmoothFunction};
use crate::error::{Error, Result};
use crate::jet::{Jet, Scalar};

const CHNROSNB_ALPHA: [f64; 50] = [
    1.25, 1.40, 2.40, 1.40, 1.75, 1.20, 2.25, 1.20, 1.00, 1.10, 1.50, 1.60, 1.25, 1.25, 1.20, 1.20,
    1.40, 0.50, 0.50, 1.25, 1.80, 0.75, 1.25, 1.40, 1.60, 2.00, 1.00, 1.60, 1.25, 2.75, 1.25, 1.25,
    1.25, 3.00, 1.50, 2.00, 1.25, 1.40, 1.80, 1.50, 2.20, 1.40, 1.50, 1.25, 2.00, 1.50, 1.25, 1.40,
    0.60, 1.50,
];

/// `(n, minimum value)` pairs from the frozen oracle runs.
const BDQRTIC_FBEST: [(usize, f64); 2] = [(10, 18.281161753593537), (20, 58.32041249597267)];
const CRAGGLVY_FBEST: [(usize, f64); 3] = [
    (10, 1.88656589666311),
    (20, 5.235115974211163),
    (22, 5.910486494850138),
];

const GENHUMPS_ZETA: f64 = 20.0;

/// Registry names with their default dimensions.
pub const REGISTRY: [(&str, usize); 15] = [
    ("ARWHEAD", 15),
    ("BDQRTIC", 10),
    ("CHNROSNB", 15),
    ("CRAGGLVY", 10),
    ("DQDRTIC", 10),
    ("EXTROSNB", 20),
    ("GENHUMPS", 5),
    ("HILBERTA", 10),
    ("LIARWHD", 20),
    ("MOREBV", 10),
    ("POWELLSG", 20),
    ("SCHMVETT", 20),
    ("SROSENBR", 20),
    ("WOODS", 20),
    ("SYNTH_SPARSE_QUAD", 10),
];

/// A quadratic `c + g'x + x'Hx/2` with `h` nonzero Hessian entries on or
/// above the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseQuadratic {
    pub hessian: DMatrix<f64>,
    pub gradient: Vec<f64>,
    pub constant: f64,
}

impl SparseQuadratic {
    /// Positions uniform without replacement among the `n(n+1)/2` upper
    /// entries, magnitudes uniform in `[-1, -0.1] U [0.1, 1]`, dense gradient
    /// and constant uniform in `[-1, 1]`.
    pub fn random<R: Rng>(n: usize, h: usize, rng: &mut R) -> Result<Self> {
        let slots = quad_len(n);
        if h > slots {
            return Err(Error::InvalidArgument(format!(
                "sparsity {h} exceeds the {slots} Hessian entries on or above the diagonal"
            )));
        }
        let mut hessian = DMatrix::zeros(n, n);
        let mut picks = sample(rng, slots, h).into_vec();
        picks.sort_unstable();
        for k in picks {
            let (i, j) = upper_position(n, k);
            let mag = rng.random_range(0.1..=1.0);
            let v = if rng.random_bool(0.5) { mag } else { -mag };
            hessian[(i, j)] = v;
            hessian[(j, i)] = v;
        }
        let gradient = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let constant = rng.random_range(-1.0..=1.0);
        Ok(Self {
            hessian,
            gradient,
            constant,
        })
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    /// Canonical-basis model of this quadratic expanded about `center`.
    pub fn to_model(&self, center: Vec<f64>) -> QuadraticModel {
        let c = DVector::from_column_slice(&center);
        let g = DVector::from_column_slice(&self.gradient);
        let hc = &self.hessian * &c;
        let grad: Vec<f64> = (&g + &hc).iter().copied().collect();
        let value = self.constant + g.dot(&c) + 0.5 * c.dot(&hc);
        QuadraticModel::from_canonical_parts(center, &self.hessian, &grad, value)
            .expect("dimensions agree by construction")
    }

    fn eval<T: Scalar>(&self, x: &[T]) -> T {
        let n = self.dim();
        let mut acc = T::from(self.constant);
        for i in 0..n {
            acc = acc + x[i].clone() * self.gradient[i];
            let hii = self.hessian[(i, i)];
            if hii != 0.0 {
                acc = acc + x[i].clone().sqr() * (0.5 * hii);
            }
            for j in i + 1..n {
                let hij = self.hessian[(i, j)];
                if hij != 0.0 {
                    acc = acc + x[i].clone() * x[j].clone() * hij;
                }
            }
        }
        acc
    }
}

/// Upper-triangle position of the `k`-th quadratic coefficient (diagonal first,
/// then off-diagonal pairs in lexicographic order).
fn upper_position(n: usize, k: usize) -> (usize, usize) {
    if k < n {
        return (k, k);
    }
    let mut k = k - n;
    for i in 0..n {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
    }
    unreachable!("k within quad_len(n)")
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Arwhead,
    Bdqrtic,
    Chnrosnb,
    Cragglvy,
    Dqdrtic,
    Extrosnb,
    Genhumps,
    Hilberta,
    Liarwhd,
    Morebv,
    Powellsg,
    Schmvett,
    Srosenbr,
    Woods,
    Synth(SparseQuadratic),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: String,
    pub n: usize,
    pub start: Vec<f64>,
    /// Known minimum value, when one is available.
    pub f_best: Option<f64>,
    /// Structural upper bound on nonzero Hessian entries on or above the diagonal.
    pub nnz_upper: Option<usize>,
    kind: Kind,
}

fn invalid(name: &str, n: usize, reason: &str) -> Error {
    Error::InvalidDimension {
        name: name.to_string(),
        n,
        reason: reason.to_string(),
    }
}

fn frozen(table: &[(usize, f64)], n: usize) -> Option<f64> {
    table.iter().find(|(m, _)| *m == n).map(|(_, v)| *v)
}

/// Names in the registry, in listing order.
pub fn list() -> Vec<&'static str> {
    REGISTRY.iter().map(|(n, _)| *n).collect()
}

/// Looks up a registry problem. `n` overrides the default dimension.
/// `SYNTH_SPARSE_QUAD` obtained here has `h = n` and seed 0; use
/// [`synth_sparse_quad`] for other parameters.
pub fn get_problem(name: &str, n: Option<usize>) -> Result<Problem> {
    let upper = name.to_ascii_uppercase();
    let default_n = REGISTRY
        .iter()
        .find(|(r, _)| *r == upper)
        .map(|(_, d)| *d)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))?;
    let n = n.unwrap_or(default_n);
    let name = upper.as_str();
    let need = |ok: bool, reason: &str| {
        if ok {
            Ok(())
        } else {
            Err(invalid(name, n, reason))
        }
    };

    let (kind, start, f_best, nnz) = match name {
        "ARWHEAD" => {
            need(n >= 2, "needs n >= 2")?;
            (Kind::Arwhead, vec![1.0; n], Some(0.0), 2 * n - 1)
        }
        "BDQRTIC" => {
            need(n >= 5, "needs n >= 5")?;
            (
                Kind::Bdqrtic,
                vec![1.0; n],
                frozen(&BDQRTIC_FBEST, n),
                5 * n - 10,
            )
        }
        "CHNROSNB" => {
            need((2..=50).contains(&n), "needs 2 <= n <= 50")?;
            (Kind::Chnrosnb, vec![-1.0; n], Some(0.0), 2 * n - 1)
        }
        "CRAGGLVY" => {
            need(n >= 4 && n % 2 == 0, "needs even n >= 4")?;
            let mut s = vec![2.0; n];
            s[0] = 1.0;
            (Kind::Cragglvy, s, frozen(&CRAGGLVY_FBEST, n), 2 * n - 1)
        }
        "DQDRTIC" => {
            need(n >= 3, "needs n >= 3")?;
            (Kind::Dqdrtic, vec![3.0; n], Some(0.0), n)
        }
        "EXTROSNB" => {
            need(n >= 2, "needs n >= 2")?;
            (Kind::Extrosnb, vec![-1.0; n], Some(0.0), 2 * n - 1)
        }
        "GENHUMPS" => {
            need(n >= 2, "needs n >= 2")?;
            let mut s = vec![506.2; n];
            s[0] = -506.0;
            (Kind::Genhumps, s, Some(0.0), 2 * n - 1)
        }
        "HILBERTA" => {
            need(n >= 1, "needs n >= 1")?;
            let s = (1..=n).map(|i| -4.0 / i as f64).collect();
            (Kind::Hilberta, s, Some(0.0), n * (n + 1) / 2)
        }
        "LIARWHD" => {
            need(n >= 2, "needs n >= 2")?;
            (Kind::Liarwhd, vec![4.0; n], Some(0.0), 2 * n - 1)
        }
        "MOREBV" => {
            need(n >= 2, "needs n >= 2")?;
            let h = 1.0 / (n as f64 + 1.0);
            let s = (1..=n)
                .map(|i| i as f64 * h * (i as f64 * h - 1.0))
                .collect();
            (Kind::Morebv, s, Some(0.0), 3 * n - 3)
        }
        "POWELLSG" => {
            need(n >= 4 && n % 4 == 0, "needs n a positive multiple of 4")?;
            let s = (0..n).map(|i| [3.0, -1.0, 0.0, 1.0][i % 4]).collect();
            (Kind::Powellsg, s, Some(0.0), 2 * n)
        }
        "SCHMVETT" => {
            need(n >= 3, "needs n >= 3")?;
            (
                Kind::Schmvett,
                vec![3.0; n],
                Some(-3.0 * (n as f64 - 2.0)),
                3 * n - 3,
            )
        }
        "SROSENBR" => {
            need(n >= 2 && n % 2 == 0, "needs even n >= 2")?;
            let s = (0..n)
                .map(|i| if i % 2 == 0 { -1.2 } else { 1.0 })
                .collect();
            (Kind::Srosenbr, s, Some(0.0), n + n / 2)
        }
        "WOODS" => {
            need(n >= 4 && n % 4 == 0, "needs n a positive multiple of 4")?;
            let s = (0..n)
                .map(|i| if i % 2 == 0 { -3.0 } else { -1.0 })
                .collect();
            (Kind::Woods, s, Some(0.0), 7 * n / 4)
        }
        "SYNTH_SPARSE_QUAD" => {
            need(n >= 1, "needs n >= 1")?;
            return synth_sparse_quad(n, n, 0);
        }
        _ => unreachable!("name checked against the registry"),
    };
    Ok(Problem {
        name: name.to_string(),
        n,
        start,
        f_best,
        nnz_upper: Some(nnz),
        kind,
    })
}

/// Random sparse quadratic (see [`SparseQuadratic::random`]) started at the
/// origin. It may be unbounded below, so no minimum value is recorded.
pub fn synth_sparse_quad(n: usize, h: usize, seed: u64) -> Result<Problem> {
    if n == 0 {
        return Err(invalid("SYNTH_SPARSE_QUAD", n, "needs n >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = SparseQuadratic::random(n, h, &mut rng)?;
    Ok(Problem {
        name: "SYNTH_SPARSE_QUAD".to_string(),
        n,
        start: vec![0.0; n],
        f_best: None,
        nnz_upper: Some(h),
        kind: Kind::Synth(q),
    })
}

impl Problem {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }

    /// Reference value, gradient and Hessian by forward differentiation.
    pub fn reference_derivatives(&self, x: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let j = self.eval(&Jet::seed(x));
        (j.v, j.gradient(self.n), j.hessian(self.n))
    }

    pub fn reference_gradient(&self, x: &[f64]) -> DVector<f64> {
        self.reference_derivatives(x).1
    }

    pub fn reference_hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.reference_derivatives(x).2
    }

    pub fn eval<T: Scalar>(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.n, "point dimension");
        let n = self.n;
        let zero = || T::from(0.0);
        let xi = |i: usize| x[i].clone();
        match &self.kind {
            Kind::Dqdrtic => (0..n - 2).fold(zero(), |acc, i| {
                acc + xi(i).sqr() + xi(i + 1).sqr() * 100.0 + xi(i + 2).sqr() * 100.0
            }),
            Kind::Arwhead => (0..n - 1).fold(zero(), |acc, i| {
                acc + (xi(i).sqr() + xi(n - 1).sqr()).sqr() - xi(i) * 4.0 + 3.0
            }),
            Kind::Srosenbr => (0..n / 2).fold(zero(), |acc, k| {
                let (a, b) = (xi(2 * k), xi(2 * k + 1));
                acc + (b - a.clone().sqr()).sqr() * 100.0 + (a - 1.0).sqr()
            }),
            Kind::Powellsg => (0..n / 4).fold(zero(), |acc, k| {
                let (a, b, c, d) = (xi(4 * k), xi(4 * k + 1), xi(4 * k + 2), xi(4 * k + 3));
                acc + (a.clone() + b.clone() * 10.0).sqr()
                    + (c.clone() - d.clone()).sqr() * 5.0
                    + (b - c * 2.0).powi(4)
                    + (a - d).powi(4) * 10.0
            }),
            Kind::Woods => (0..n / 4).fold(zero(), |acc, k| {
                let (a, b, c, d) = (xi(4 * k), xi(4 * k + 1), xi(4 * k + 2), xi(4 * k + 3));
                acc + (b.clone() - a.clone().sqr()).sqr() * 100.0
                    + (a - 1.0).sqr()
                    + (d.clone() - c.clone().sqr()).sqr() * 90.0
                    + (c - 1.0).sqr()
                    + (b.clone() + d.clone() - 2.0).sqr() * 10.0
                    + (b - d).sqr() * 0.1
            }),
            Kind::Liarwhd => (0..n).fold(zero(), |acc, i| {
                acc + (xi(i).sqr() - xi(0)).sqr() * 4.0 + (xi(i) - 1.0).sqr()
            }),
            Kind::Morebv => {
                let h = 1.0 / (n as f64 + 1.0);
                let at = |i: isize| {
                    if i < 0 || i >= n as isize {
                        zero()
                    } else {
                        xi(i as usize)
                    }
                };
                (0..n).fold(zero(), |acc, i| {
                    let t = (i as f64 + 1.0) * h;
                    let ii = i as isize;
                    let r = at(ii) * 2.0 - at(ii - 1) - at(ii + 1)
                        + (xi(i) + t + 1.0).powi(3) * (0.5 * h * h);
                    acc + r.sqr()
                })
            }
            Kind::Bdqrtic => (0..n - 4).fold(zero(), |acc, i| {
                let quartic = xi(i).sqr()
                    + xi(i + 1).sqr() * 2.0
                    + xi(i + 2).sqr() * 3.0
                    + xi(i + 3).sqr() * 4.0
                    + xi(n - 1).sqr() * 5.0;
                acc + (xi(i) * -4.0 + 3.0).sqr() + quartic.sqr()
            }),
            Kind::Chnrosnb => (1..n).fold(zero(), |acc, i| {
                let w = 16.0 * CHNROSNB_ALPHA[i].powi(2);
                acc + (xi(i - 1) - xi(i).sqr()).sqr() * w + (xi(i) - 1.0).sqr()
            }),
            Kind::Extrosnb => (1..n).fold((xi(0) - 1.0).sqr(), |acc, i| {
                acc + (xi(i) - xi(i - 1).sqr()).sqr() * 100.0
            }),
            Kind::Schmvett => (0..n - 2).fold(zero(), |acc, i| {
                let (a, b, c) = (xi(i), xi(i + 1), xi(i + 2));
                let t1 = T::from(1.0) / ((a.clone() - b.clone()).sqr() + 1.0);
                let t2 = ((b.clone() * PI + c.clone()) * 0.5).sin();
                let t3 = (-((a + c) / b - 2.0).sqr()).exp();
                acc - t1 - t2 - t3
            }),
            Kind::Cragglvy => (0..n / 2 - 1).fold(zero(), |acc, k| {
                let (a, b, c, d) = (xi(2 * k), xi(2 * k + 1), xi(2 * k + 2), xi(2 * k + 3));
                let cd = c.clone() - d.clone();
                acc + (a.clone().exp() - b.clone()).powi(4)
                    + (b - c).powi(6) * 100.0
                    + (cd.clone().tan() + cd).powi(4)
                    + a.powi(8)
                    + (d - 1.0).sqr()
            }),
            Kind::Genhumps => (0..n - 1).fold(zero(), |acc, i| {
                let s1 = (xi(i) * GENHUMPS_ZETA).sin().sqr();
                let s2 = (xi(i + 1) * GENHUMPS_ZETA).sin().sqr();
                acc + s1 * s2 + (xi(i).sqr() + xi(i + 1).sqr()) * 0.05
            }),
            Kind::Hilberta => {
                let mut acc = zero();
                for i in 0..n {
                    acc = acc + xi(i).sqr() / (2 * i + 1) as f64;
                    for j in 0..i {
                        acc = acc + xi(i) * xi(j) * (2.0 / (i + j + 1) as f64);
                    }
                }
                acc
            }
            Kind::Synth(q) => q.eval(x),
        }
    }
}

impl SmoothFunction for SparseQuadratic {
    fn dim(&self) -> usize {
        self.gradient.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        &self.hessian * DVector::from_column_slice(x) + DVector::from_column_slice(&self.gradient)
    }
    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        self.hessian.clone()
    }
}

impl SmoothFunction for Problem {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        self.reference_gradient(x)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        self.reference_hessian(x)
    }
}

/// Number of reference Hessian entries on or above the diagonal with
/// magnitude above `1e-10` at `x`.
pub fn hessian_nnz(problem: &Problem, x: &[f64]) -> Result<usize> {
    if x.len() != problem.n {
        return Err(Error::DimensionMismatch {
            expected: problem.n,
            found: x.len(),
        });
    }
    let h = problem.reference_hessian(x);
    let mut count = 0;
    for i in 0..problem.n {
        for j in i..problem.n {
            if h[(i, j)].abs() > 1e-10 {
                count += 1;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::off_diag_index;

    #[test]
    fn upper_positions_follow_coefficient_order() {
        let n = 5;
        for k in 0..quad_len(n) {
            let (i, j) = upper_position(n, k);
            if k < n {
                assert_eq!((i, j), (k, k));
            } else {
                assert_eq!(off_diag_index(n, i, j), k);
            }
        }
    }

    #[test]
    fn dqdrtic_anchor() {
        let p = get_problem("DQDRTIC", None).unwrap();
        assert_eq!(p.n, 10);
        assert_eq!(p.value(&vec![0.0; 10]), 0.0);
        assert_eq!(hessian_nnz(&p, &p.start).unwrap(), 10);
    }

    #[test]
    fn dimension_patterns_enforced() {
        assert!(get_problem("POWELLSG", Some(10)).is_err());
        assert!(get_problem("WOODS", Some(8)).is_ok());
        assert!(matches!(
            get_problem("NOPE", None),
            Err(Error::UnknownProblem(_))
        ));
    }

    #[test]
    fn schmvett_minimum_on_the_diagonal() {
        let p = get_problem("SCHMVETT", Some(6)).unwrap();
        let c = PI / (PI + 1.0);
        assert!((p.value(&[c; 6]) - p.f_best.unwrap()).abs() < 1e-12);
    }
}
