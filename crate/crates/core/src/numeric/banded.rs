//! Banded linear systems solved by LU without pivoting.
//!
//! Only used for `I - P` with `P` the sub-stochastic matrix of a killed walk,
//! a nonsingular M-matrix, for which elimination without pivoting is stable.

#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    // row-major, row i stores columns i - lower ..= i + upper
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.lower >= i && j <= i + self.upper, "({i},{j}) outside band");
        i * (self.lower + self.upper + 1) + (j + self.lower - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.lower < i || j > i + self.upper {
            return 0.0;
        }
        self.data[self.offset(i, j)]
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self.offset(i, j);
        self.data[k] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.offset(i, j);
        self.data[k] = value;
    }

    /// Solves `A x = rhs` for several right-hand sides, consuming `A`.
    pub fn solve_many(mut self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.get(k, k);
            assert!(pivot != 0.0, "zero pivot at row {k}");
            let row_end = (k + self.upper).min(n - 1);
            for i in (k + 1)..=(k + self.lower).min(n - 1) {
                let factor = self.get(i, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                let o = self.offset(i, k);
                self.data[o] = factor;
                for j in (k + 1)..=row_end {
                    let a = self.get(k, j);
                    self.add(i, j, -factor * a);
                }
            }
        }
        rhs.iter()
            .map(|b| {
                assert_eq!(b.len(), n);
                let mut x = b.clone();
                for i in 0..n {
                    let start = i.saturating_sub(self.lower);
                    let mut s = x[i];
                    for (j, xj) in x.iter().enumerate().take(i).skip(start) {
                        s -= self.get(i, j) * xj;
                    }
                    x[i] = s;
                }
                for i in (0..n).rev() {
                    let end = (i + self.upper).min(n - 1);
                    let mut s = x[i];
                    for (j, xj) in x.iter().enumerate().take(end + 1).skip(i + 1) {
                        s -= self.get(i, j) * xj;
                    }
                    x[i] = s / self.get(i, i);
                }
                x
            })
            .collect()
    }

    pub fn solve(self, rhs: &[f64]) -> Vec<f64> {
        self.solve_many(&[rhs.to_vec()]).pop().unwrap()
    }
}
