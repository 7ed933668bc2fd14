//! Banded Gaussian elimination for the Newton systems of the stationary
//! solvers, with a dense LU fallback when a pivot degenerates.

use nalgebra::{DMatrix, DVector};

/// Square matrix with `bw` sub- and super-diagonals, stored row-wise.
#[derive(Debug, Clone)]
pub(crate) struct Banded {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Banded {
    pub(crate) fn zeros(n: usize, bw: usize) -> Self {
        Banded {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    #[inline]
    fn pos(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.bw >= i && j <= i + self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.bw < i || j > i + self.bw {
            0.0
        } else {
            self.data[self.pos(i, j)]
        }
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.pos(i, j);
        self.data[k] = v;
    }

    #[inline]
    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.pos(i, j);
        self.data[k] += v;
    }

    fn dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    /// Factorizes in place without pivoting. Returns `None` when a pivot is
    /// negligible relative to the largest entry of its row.
    fn factor(&self) -> Option<Banded> {
        let mut lu = self.clone();
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let piv = lu.get(k, k);
            let hi = (k + bw).min(n - 1);
            let scale = (k..=hi).map(|j| lu.get(k, j).abs()).fold(0.0, f64::max);
            if !(piv.abs() > 1e-13 * scale.max(f64::MIN_POSITIVE)) {
                return None;
            }
            for i in k + 1..=hi {
                let l = lu.get(i, k) / piv;
                if l == 0.0 {
                    continue;
                }
                lu.set(i, k, l);
                for j in k + 1..=hi {
                    let v = lu.get(k, j);
                    if v != 0.0 {
                        lu.add(i, j, -l * v);
                    }
                }
            }
        }
        Some(lu)
    }

    fn solve_factored(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for j in lo..i {
                s -= self.get(i, j) * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= self.get(i, j) * b[j];
            }
            b[i] = s / self.get(i, i);
        }
    }
}

/// Solves `A x = b` for every right-hand side in `rhs`. `None` if singular.
pub(crate) fn solve_many(a: &Banded, rhs: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    if let Some(lu) = a.factor() {
        let out: Vec<Vec<f64>> = rhs
            .iter()
            .map(|b| {
                let mut x = b.clone();
                lu.solve_factored(&mut x);
                x
            })
            .collect();
        if out.iter().all(|x| x.iter().all(|v| v.is_finite())) {
            return Some(out);
        }
    }
    let lu = a.dense().lu();
    rhs.iter()
        .map(|b| {
            lu.solve(&DVector::from_column_slice(b))
                .map(|x| x.as_slice().to_vec())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_solve() {
        let n = 6;
        let mut a = Banded::zeros(n, 1);
        for i in 0..n {
            a.set(i, i, 4.0);
            if i > 0 {
                a.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.set(i, i + 1, -2.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        let b: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| a.get(i, j) * x[j]).sum())
            .collect();
        let sol = solve_many(&a, &[b]).unwrap();
        for (s, e) in sol[0].iter().zip(&x) {
            assert!((s - e).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_falls_back_to_dense() {
        let mut a = Banded::zeros(2, 1);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        let sol = solve_many(&a, &[vec![2.0, 3.0]]).unwrap();
        assert_eq!(sol[0], vec![3.0, 2.0]);
    }
}
