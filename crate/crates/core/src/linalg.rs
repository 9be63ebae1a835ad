//! Dense Householder QR for the small least-squares problems used throughout.

/// Thin QR factorization of an `m x n` matrix with `m >= n`, stored column-major.
#[derive(Debug, Clone)]
pub struct Qr {
    m: usize,
    n: usize,
    a: Vec<f64>,
    beta: Vec<f64>,
}

impl Qr {
    /// Factors the column-major matrix `a` (`m` rows, `n` columns).
    pub fn new(mut a: Vec<f64>, m: usize, n: usize) -> Qr {
        assert_eq!(a.len(), m * n);
        assert!(m >= n, "need at least as many rows as columns");
        let mut beta = vec![0.0; n];
        for k in 0..n {
            let col = k * m;
            let norm = a[col + k..col + m].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let alpha = if a[col + k] > 0.0 { -norm } else { norm };
            a[col + k] -= alpha;
            let vnorm2 = a[col + k..col + m].iter().map(|v| v * v).sum::<f64>();
            if vnorm2 == 0.0 {
                a[col + k] = alpha;
                continue;
            }
            beta[k] = 2.0 / vnorm2;
            for j in k + 1..n {
                let cj = j * m;
                let dot: f64 = (k..m).map(|i| a[col + i] * a[cj + i]).sum();
                let s = beta[k] * dot;
                for i in k..m {
                    a[cj + i] -= s * a[col + i];
                }
            }
            // Keep the Householder vector below the diagonal, with its head in `head`.
            let head = a[col + k];
            a[col + k] = alpha;
            beta[k] = if head != 0.0 { beta[k] * head * head } else { 0.0 };
            for i in k + 1..m {
                a[col + i] /= head;
            }
        }
        Qr { m, n, a, beta }
    }

    /// Builds from row-major rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Qr {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        let mut a = vec![0.0; m * n];
        for (i, r) in rows.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                a[j * m + i] = *v;
            }
        }
        Qr::new(a, m, n)
    }

    pub fn r(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i <= j);
        self.a[j * self.m + i]
    }

    /// True when every diagonal entry of R exceeds `tol` times the largest.
    pub fn full_rank(&self, tol: f64) -> bool {
        let d: Vec<f64> = (0..self.n).map(|k| self.r(k, k).abs()).collect();
        let big = d.iter().cloned().fold(0.0, f64::max);
        big > 0.0 && d.iter().all(|&v| v > tol * big)
    }

    fn reflect(&self, k: usize, b: &mut [f64]) {
        if self.beta[k] == 0.0 {
            return;
        }
        let col = k * self.m;
        let mut dot = b[k];
        for i in k + 1..self.m {
            dot += self.a[col + i] * b[i];
        }
        let s = self.beta[k] * dot;
        b[k] -= s;
        for i in k + 1..self.m {
            b[i] -= s * self.a[col + i];
        }
    }

    /// Overwrites `b` (length m) with Q'b.
    pub fn apply_qt(&self, b: &mut [f64]) {
        for k in 0..self.n {
            self.reflect(k, b);
        }
    }

    /// Returns Q z for `z` of length n (thin Q).
    pub fn q_times(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        out[..self.n].copy_from_slice(z);
        for k in (0..self.n).rev() {
            self.reflect(k, &mut out);
        }
        out
    }

    /// Solves R x = b in place.
    pub fn solve_r(&self, b: &mut [f64]) {
        for i in (0..self.n).rev() {
            let mut s = b[i];
            for j in i + 1..self.n {
                s -= self.r(i, j) * b[j];
            }
            b[i] = s / self.r(i, i);
        }
    }

    /// Solves R' z = b in place.
    pub fn solve_rt(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.r(j, i) * b[j];
            }
            b[i] = s / self.r(i, i);
        }
    }

    /// Least-squares solution of A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut qb = b.to_vec();
        self.apply_qt(&mut qb);
        qb.truncate(self.n);
        self.solve_r(&mut qb);
        qb
    }

    /// Row `k` of (A'A)^{-1} A', as a vector of length m.
    pub fn selector(&self, k: usize) -> Vec<f64> {
        let mut z = vec![0.0; self.n];
        z[k] = 1.0;
        self.solve_rt(&mut z);
        self.q_times(&z)
    }

    /// Entry (k, k) of (A'A)^{-1}.
    pub fn inv_gram_diag(&self, k: usize) -> f64 {
        let mut z = vec![0.0; self.n];
        z[k] = 1.0;
        self.solve_rt(&mut z);
        z.iter().map(|v| v * v).sum()
    }
}

/// Ordinary least squares of `y` on the given rows; `None` if rank deficient.
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> Option<Vec<f64>> {
    if rows.len() < rows.first().map_or(0, |r| r.len()) {
        return None;
    }
    let qr = Qr::from_rows(rows);
    if !qr.full_rank(1e-12) {
        return None;
    }
    Some(qr.solve(y))
}

/// Solves the symmetric positive definite system `a x = b` (row-major `n x n`)
/// by Cholesky factorization; `None` if `a` is not numerically positive definite.
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    Some(y)
}
