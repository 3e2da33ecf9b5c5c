//! Dense symmetric positive-definite solves for the Levenberg–Marquardt step.

use alloc::vec::Vec;

use crate::math;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: alloc::vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.n + c] = v;
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.n..(r + 1) * self.n]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.n..(r + 1) * self.n]
    }

    /// Accumulates `row ⊗ row` into the upper triangle.
    pub fn add_outer_upper(&mut self, row: &[f64]) {
        let n = self.n;
        for (a, &ra) in row.iter().enumerate() {
            if ra == 0.0 {
                continue;
            }
            let dst = &mut self.data[a * n + a..(a + 1) * n];
            for (d, &rb) in dst.iter_mut().zip(&row[a..]) {
                *d += ra * rb;
            }
        }
    }

    /// Copies the upper triangle into the lower one.
    pub fn symmetrize_from_upper(&mut self) {
        for r in 0..self.n {
            for c in 0..r {
                let v = self.get(c, r);
                self.set(r, c, v);
            }
        }
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
pub struct Cholesky {
    l: SquareMatrix,
}

impl Cholesky {
    /// Factors `a + shift·I`. Returns `None` if the shifted matrix is not
    /// numerically positive definite.
    pub fn factor_shifted(a: &SquareMatrix, shift: f64) -> Option<Self> {
        let n = a.dim();
        let mut l = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a.get(i, j);
                if i == j {
                    sum += shift;
                }
                let (li, lj) = (i * n, j * n);
                for k in 0..j {
                    sum -= l.data[li + k] * l.data[lj + k];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return None;
                    }
                    l.data[li + i] = math::sqrt(sum);
                } else {
                    l.data[li + j] = sum / l.data[lj + j];
                }
            }
        }
        Some(Self { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = y[i];
            for k in 0..i {
                s -= row[k] * y[k];
            }
            y[i] = s / row[i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l.get(k, i) * y[k];
            }
            y[i] = s / self.l.get(i, i);
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_spd_system() {
        let mut a = SquareMatrix::zeros(3);
        let vals = [[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        for r in 0..3 {
            for c in 0..3 {
                a.set(r, c, vals[r][c]);
            }
        }
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|r| (0..3).map(|c| vals[r][c] * x[c]).sum()).collect();
        let sol = Cholesky::factor_shifted(&a, 0.0).unwrap().solve(&b);
        for (s, e) in sol.iter().zip(&x) {
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_rescues_singular_matrix() {
        let mut a = SquareMatrix::zeros(2);
        a.add_outer_upper(&[1.0, 1.0]);
        a.symmetrize_from_upper();
        assert!(Cholesky::factor_shifted(&a, 0.0).is_none());
        assert!(Cholesky::factor_shifted(&a, 1e-3).is_some());
    }

    #[test]
    fn outer_product_accumulation() {
        let mut a = SquareMatrix::zeros(3);
        a.add_outer_upper(&[1.0, 2.0, 3.0]);
        a.add_outer_upper(&[0.0, 1.0, -1.0]);
        a.symmetrize_from_upper();
        assert_eq!(a.get(1, 2), 2.0 * 3.0 - 1.0);
        assert_eq!(a.get(2, 1), a.get(1, 2));
        assert_eq!(a.get(0, 0), 1.0);
    }
}
