//! Band LU without pivoting, adequate for the diagonally dominant
//! backward-Euler matrices.

use crate::error::{Error, Result};

/// Square band matrix with `bw` sub- and super-diagonals, stored row-wise as
/// `data[i * (2 bw + 1) + (j - i + bw)]`.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
            factored: false,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i.abs_diff(j) <= self.bw);
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i.abs_diff(j) > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        if i.abs_diff(j) > self.bw {
            return Err(Error::LinearSolveFailure(format!(
                "entry ({i}, {j}) outside bandwidth {}",
                self.bw
            )));
        }
        let k = self.idx(i, j);
        self.data[k] += v;
        Ok(())
    }

    /// In-place `A = L U` with unit lower `L`.
    pub fn factor(&mut self) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if !pivot.is_finite() || pivot.abs() < 1e-300 {
                return Err(Error::LinearSolveFailure(format!("zero pivot {pivot:e} at row {k}")));
            }
            let last = (k + bw).min(n - 1);
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let m = self.data[ik] / pivot;
                if m == 0.0 {
                    continue;
                }
                self.data[ik] = m;
                for j in k + 1..=last {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= m * kj;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` in place after [`factor`](Self::factor).
    pub fn solve(&self, b: &mut [f64]) -> Result<()> {
        self.check_ready(b.len())?;
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut acc = b[i];
            for (j, &bj) in b.iter().enumerate().take(i).skip(first) {
                acc -= self.data[self.idx(i, j)] * bj;
            }
            b[i] = acc;
        }
        for i in (0..n).rev() {
            let last = (i + bw).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=last {
                acc -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = acc / self.data[self.idx(i, i)];
        }
        Ok(())
    }

    /// Solves `A^T x = b` in place after [`factor`](Self::factor).
    pub fn solve_transpose(&self, b: &mut [f64]) -> Result<()> {
        self.check_ready(b.len())?;
        let (n, bw) = (self.n, self.bw);
        // U^T y = b
        for i in 0..n {
            let first = i.saturating_sub(bw);
            let mut acc = b[i];
            for (j, &bj) in b.iter().enumerate().take(i).skip(first) {
                acc -= self.data[self.idx(j, i)] * bj;
            }
            b[i] = acc / self.data[self.idx(i, i)];
        }
        // L^T x = y
        for i in (0..n).rev() {
            let last = (i + bw).min(n - 1);
            let mut acc = b[i];
            for j in i + 1..=last {
                acc -= self.data[self.idx(j, i)] * b[j];
            }
            b[i] = acc;
        }
        Ok(())
    }

    fn check_ready(&self, len: usize) -> Result<()> {
        if !self.factored {
            return Err(Error::LinearSolveFailure("matrix not factored".into()));
        }
        if len != self.n {
            return Err(Error::LinearSolveFailure(format!("rhs length {len} != {}", self.n)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample(n: usize, bw: usize) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, bw);
        for i in 0..n {
            for j in i.saturating_sub(bw)..=(i + bw).min(n - 1) {
                let v = if i == j {
                    4.0 + bw as f64
                } else {
                    ((i * 31 + j * 17) % 7) as f64 / 7.0 - 0.5
                };
                a.add(i, j, v).unwrap();
            }
        }
        a
    }

    fn matvec(a: &BandMatrix, x: &[f64], transpose: bool) -> Vec<f64> {
        let n = a.n();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if transpose { a.get(j, i) } else { a.get(i, j) } * x[j])
                    .sum()
            })
            .collect()
    }

    #[test]
    fn solve_and_transpose_solve() {
        for bw in [1, 3] {
            let a = sample(12, bw);
            let mut lu = a.clone();
            lu.factor().unwrap();
            let x: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
            let mut b = matvec(&a, &x, false);
            lu.solve(&mut b).unwrap();
            for (u, v) in b.iter().zip(&x) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-12);
            }
            let mut bt = matvec(&a, &x, true);
            lu.solve_transpose(&mut bt).unwrap();
            for (u, v) in bt.iter().zip(&x) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let mut a = BandMatrix::zeros(3, 1);
        assert!(matches!(a.factor(), Err(Error::LinearSolveFailure(_))));
        let unfactored = BandMatrix::zeros(3, 1);
        assert!(unfactored.solve(&mut [0.0; 3]).is_err());
    }
}
