//! Thomas algorithm for complex tridiagonal systems with a constant
//! off-diagonal, factored once and reused for every time step.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// LU factors of `tridiag(off, diag, off)`.
#[derive(Debug, Clone)]
pub struct Factored {
    pub(crate) off: Complex64,
    /// `1 / (diag_i - off * upper_{i-1})`
    pub(crate) inv_pivot: Vec<Complex64>,
    /// `off * inv_pivot_i`
    pub(crate) upper: Vec<Complex64>,
}

impl Factored {
    pub fn new(diag: &[Complex64], off: Complex64) -> Result<Self> {
        let n = diag.len();
        let mut inv_pivot = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        let mut prev_upper = Complex64::new(0.0, 0.0);
        for (i, d) in diag.iter().enumerate() {
            let pivot = d - off * prev_upper;
            if pivot.norm_sqr() == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularSolve(i));
            }
            let inv = pivot.inv();
            inv_pivot.push(inv);
            prev_upper = off * inv;
            upper.push(prev_upper);
        }
        Ok(Self { off, inv_pivot, upper })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Solve in place for the full system.
    pub fn solve(&self, rhs: &mut [Complex64]) {
        assert_eq!(rhs.len(), self.len());
        let mut prev = Complex64::new(0.0, 0.0);
        for (r, inv) in rhs.iter_mut().zip(&self.inv_pivot) {
            prev = (*r - self.off * prev) * inv;
            *r = prev;
        }
        let mut next = Complex64::new(0.0, 0.0);
        for (r, up) in rhs.iter_mut().zip(&self.upper).rev() {
            next = *r - up * next;
            *r = next;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn matvec(diag: &[Complex64], off: Complex64, x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += off * x[i - 1];
                }
                if i + 1 < n {
                    v += off * x[i + 1];
                }
                v
            })
            .collect()
    }

    #[test]
    fn zero_pivot_reported() {
        let diag = vec![c(0.0, 0.0), c(1.0, 0.0)];
        assert!(matches!(
            Factored::new(&diag, c(1.0, 0.0)),
            Err(Error::SingularSolve(0))
        ));
    }

    proptest! {
        #[test]
        fn residual_small(
            n in 3usize..60,
            seed in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 60),
            off_im in 0.01f64..2.0,
        ) {
            // Crank-Nicolson-like: diag = 1 + i(...), diagonally dominant in modulus.
            let off = c(0.0, -off_im);
            let diag: Vec<_> = (0..n).map(|i| c(1.0 + seed[i].0.abs(), 2.0 * off_im + seed[i].1)).collect();
            let x: Vec<_> = (0..n).map(|i| c(seed[(i * 7) % 60].1, seed[(i * 3) % 60].0)).collect();
            let mut b = matvec(&diag, off, &x);
            let f = Factored::new(&diag, off).unwrap();
            f.solve(&mut b);
            for (u, v) in b.iter().zip(&x) {
                prop_assert!((u - v).norm() < 1e-10);
            }
        }
    }
}
