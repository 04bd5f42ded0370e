//! Second-order forward-mode differentiation.
//!
//! Test objectives are written once, generically over [`Scalar`], and
//! evaluated either on `f64` (what the optimizer sees) or on [`Jet`] to obtain
//! exact reference gradients and Hessians.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

pub trait Scalar:
    Clone
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;
    fn powi(self, k: i32) -> Self;

    fn sqr(self) -> Self {
        self.clone() * self
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tan(self) -> Self {
        f64::tan(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn powi(self, k: i32) -> Self {
        f64::powi(self, k)
    }
}

/// Value, gradient and Hessian (row-major) of an expression in `n` seeds.
/// Empty derivative storage stands for a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            g: Vec::new(),
            h: Vec::new(),
        }
    }

    pub fn variable(v: f64, i: usize, n: usize) -> Self {
        let mut g = vec![0.0; n];
        g[i] = 1.0;
        Self {
            v,
            g,
            h: vec![0.0; n * n],
        }
    }

    /// One seeded variable per coordinate of `x`.
    pub fn seed(x: &[f64]) -> Vec<Jet> {
        let n = x.len();
        x.iter()
            .enumerate()
            .map(|(i, &v)| Jet::variable(v, i, n))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn gradient(&self, n: usize) -> DVector<f64> {
        if self.g.is_empty() {
            DVector::zeros(n)
        } else {
            DVector::from_column_slice(&self.g)
        }
    }

    /// Symmetrized; the two triangles can differ by rounding.
    pub fn hessian(&self, n: usize) -> DMatrix<f64> {
        if self.h.is_empty() {
            DMatrix::zeros(n, n)
        } else {
            let h = DMatrix::from_row_slice(n, n, &self.h);
            (&h + h.transpose()) * 0.5
        }
    }

    /// `phi(self)` given `phi`, `phi'`, `phi''` at `self.v`.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Jet {
        let n = self.dim();
        let mut h = self.h;
        for a in 0..n {
            for b in 0..n {
                h[a * n + b] = f1 * h[a * n + b] + f2 * self.g[a] * self.g[b];
            }
        }
        let g = self.g.iter().map(|v| f1 * v).collect();
        Jet { v: f0, g, h }
    }

    fn combine(a: Jet, b: Jet, ca: f64, cb: f64) -> Jet {
        let v = ca * a.v + cb * b.v;
        match (a.g.is_empty(), b.g.is_empty()) {
            (true, true) => Jet::constant(v),
            (false, true) => Jet {
                v,
                g: a.g.iter().map(|x| ca * x).collect(),
                h: a.h.iter().map(|x| ca * x).collect(),
            },
            (true, false) => Jet {
                v,
                g: b.g.iter().map(|x| cb * x).collect(),
                h: b.h.iter().map(|x| cb * x).collect(),
            },
            (false, false) => Jet {
                v,
                g: a.g.iter().zip(&b.g).map(|(x, y)| ca * x + cb * y).collect(),
                h: a.h.iter().zip(&b.h).map(|(x, y)| ca * x + cb * y).collect(),
            },
        }
    }

    fn recip(self) -> Jet {
        let v = self.v;
        self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Self {
        Jet::constant(v)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet::combine(self, o, 1.0, 1.0)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet::combine(self, o, 1.0, -1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        if self.g.is_empty() {
            return o * self.v;
        }
        if o.g.is_empty() {
            return self * o.v;
        }
        let n = self.dim();
        let mut h = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let k = a * n + b;
                h[k] = self.v * o.h[k] + o.v * self.h[k] + self.g[a] * o.g[b] + o.g[a] * self.g[b];
            }
        }
        let g = self
            .g
            .iter()
            .zip(&o.g)
            .map(|(x, y)| self.v * y + o.v * x)
            .collect();
        Jet {
            v: self.v * o.v,
            g,
            h,
        }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, c: f64) -> Jet {
        self.v -= c;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, c: f64) -> Jet {
        self.v *= c;
        self.g.iter_mut().for_each(|x| *x *= c);
        self.h.iter_mut().for_each(|x| *x *= c);
        self
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, c: f64) -> Jet {
        self * (1.0 / c)
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn tan(self) -> Self {
        let t = self.v.tan();
        let d = 1.0 + t * t;
        self.chain(t, d, 2.0 * t * d)
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }
    fn sqrt(self) -> Self {
        let v = self.v;
        let r = v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * v))
    }
    fn powi(self, k: i32) -> Self {
        let v = self.v;
        let kf = k as f64;
        self.chain(
            v.powi(k),
            kf * v.powi(k - 1),
            kf * (kf - 1.0) * v.powi(k - 2),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn f<T: Scalar>(x: &[T]) -> T {
        (x[0].clone() * x[1].clone()).sin() + x[0].clone().powi(3) / (x[1].clone().exp() + 1.0)
    }

    #[test]
    fn matches_hand_derivatives() {
        let (a, b) = (0.7, -0.3);
        let j = f(&Jet::seed(&[a, b]));
        assert_relative_eq!(j.v, f(&[a, b]), max_relative = 1e-15);
        let e = f64::exp(b);
        let d = e + 1.0;
        let gx = b * (a * b).cos() + 3.0 * a * a / d;
        let gy = a * (a * b).cos() - a.powi(3) * e / (d * d);
        assert_relative_eq!(j.g[0], gx, max_relative = 1e-13);
        assert_relative_eq!(j.g[1], gy, max_relative = 1e-13);
        let hxx = -b * b * (a * b).sin() + 6.0 * a / d;
        let hxy = (a * b).cos() - a * b * (a * b).sin() - 3.0 * a * a * e / (d * d);
        assert_relative_eq!(j.h[0], hxx, max_relative = 1e-13);
        assert_relative_eq!(j.h[1], hxy, max_relative = 1e-13);
        assert_relative_eq!(j.h[2], hxy, max_relative = 1e-13);
    }

    #[test]
    fn constants_carry_no_derivatives() {
        let c = Jet::constant(2.0) * Jet::constant(3.0) + 1.0;
        assert_eq!(c.v, 7.0);
        assert!(c.g.is_empty());
        let x = Jet::variable(2.0, 0, 1);
        let y = Jet::from(1.0) - x.clone() * x;
        assert_eq!(y.g, vec![-4.0]);
        assert_eq!(y.h, vec![-2.0]);
    }
}
