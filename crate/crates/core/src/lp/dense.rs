//! Small dense factorization helpers shared by the simplex basis
//! refactorization and the rebate QP's equality subproblems.
//!
//! Matrices are flat row-major `Vec<f64>` of size `n * n`; the sizes here
//! (a few hundred at most) don't justify anything fancier.

/// LU factorization with partial pivoting, `P A = L U`.
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factor a square matrix; `None` if it is singular to working
    /// precision (pivot below 1e-12 after scaling by the column).
    pub fn factor(n: usize, a: &[f64]) -> Option<Lu> {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut piv = k;
            let mut best = lu[k * n + k].abs();
            for i in k + 1..n {
                let v = lu[i * n + k].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best < 1e-12 {
                return None;
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let dkk = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / dkk;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Some(Lu { n, lu, perm })
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        x
    }
}

/// Dense inverse via LU; `None` when singular.
pub fn invert(n: usize, a: &[f64]) -> Option<Vec<f64>> {
    let lu = Lu::factor(n, a)?;
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = lu.solve(&e);
        e[j] = 0.0;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Some(inv)
}

/// One-shot linear solve; `None` when singular.
pub fn solve_system(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    Lu::factor(n, a).map(|lu| lu.solve(b))
}
