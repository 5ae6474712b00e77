//! Small dense linear solves for the Newton and continuation steps.
//!
//! The systems here are 4x4 or 6x6; plain Gaussian elimination with partial
//! pivoting is all that is needed.

/// Row-major square matrix of side `n` stored as `n * n` scalars.
#[derive(Debug, Clone)]
pub(crate) struct DenseMatrix {
    pub n: usize,
    pub a: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![0.0; n * n],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    /// Max row sum norm.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.at(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Solve `A x = b` by LU with partial pivoting. Returns `None` when a
    /// pivot degenerates to zero.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let mut a = self.a.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let mut pivot = col;
            let mut best = a[col * n + col].abs();
            for row in col + 1..n {
                let v = a[row * n + col].abs();
                if v > best {
                    best = v;
                    pivot = row;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                x.swap(col, pivot);
            }
            let inv = 1.0 / a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] * inv;
                if factor == 0.0 {
                    continue;
                }
                a[row * n + col] = 0.0;
                for j in col + 1..n {
                    a[row * n + j] -= factor * a[col * n + j];
                }
                x[row] -= factor * x[col];
            }
        }
        for row in (0..n).rev() {
            let mut acc = x[row];
            for j in row + 1..n {
                acc -= a[row * n + j] * x[j];
            }
            x[row] = acc / a[row * n + row];
        }
        Some(x)
    }

    /// Infinity-norm condition number, via the explicit inverse (fine at n <= 6).
    pub fn condition_inf(&self) -> Option<f64> {
        let n = self.n;
        let mut inv_norm = 0.0f64;
        let mut col_buf = vec![0.0; n];
        let mut inv_rows = vec![vec![0.0; n]; n];
        for j in 0..n {
            col_buf.fill(0.0);
            col_buf[j] = 1.0;
            let col = self.solve(&col_buf)?;
            for i in 0..n {
                inv_rows[i][j] = col[i];
            }
        }
        for row in &inv_rows {
            inv_norm = inv_norm.max(row.iter().map(|v| v.abs()).sum());
        }
        Some(self.inf_norm() * inv_norm)
    }
}
