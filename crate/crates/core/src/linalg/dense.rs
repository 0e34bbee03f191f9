//! Dense symmetric-indefinite factorization used as a test oracle.
//!
//! Bunch-Kaufman diagonal pivoting with 1x1 and 2x2 blocks gives the exact
//! inertia of desk-scale symmetric matrices and a backward-stable solve.

use super::ldl::Inertia;
use super::LinalgError;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub m: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize, m: usize) -> Self {
        DenseMatrix { n, m, data: vec![0.0; n * m] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut d = DenseMatrix::zeros(n, m);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), m, "ragged rows");
            d.data[i * m..(i + 1) * m].copy_from_slice(r);
        }
        d
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.m.max(1)).take(self.n).map(<[f64]>::to_vec).collect()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.m + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.m + j] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.data[i * self.m..(i + 1) * self.m].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.n == self.m && (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Bunch-Kaufman factorization.
    pub fn ldl(&self) -> Result<DenseLdl, LinalgError> {
        dense_ldl_oracle(self)
    }

    /// Gaussian elimination with partial pivoting.
    pub fn lu_solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs())).unwrap();
            if a[p * n + k].abs() <= n as f64 * f64::EPSILON * scale {
                return Err(LinalgError::Singular);
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                x.swap(k, p);
            }
            for i in k + 1..n {
                let f = a[i * n + k] / a[k * n + k];
                if f != 0.0 {
                    for j in k..n {
                        a[i * n + j] -= f * a[k * n + j];
                    }
                    x[i] -= f * x[k];
                }
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[k * n + j] * x[j]).sum();
            x[k] = (x[k] - s) / a[k * n + k];
        }
        Ok(x)
    }
}

#[derive(Clone, Copy, Debug)]
enum Block {
    One(f64),
    /// 2x2 block `[[a, b], [b, c]]` starting at this index.
    Two(f64, f64, f64),
    /// Second row of a 2x2 block.
    Tail,
}

/// `P A Pᵀ = L D Lᵀ` with unit lower `L` and block-diagonal `D`.
#[derive(Clone, Debug)]
pub struct DenseLdl {
    pub inertia: Inertia,
    n: usize,
    /// `perm[k]` is the original index at position `k`.
    perm: Vec<usize>,
    l: Vec<f64>,
    blocks: Vec<Block>,
}

const ALPHA: f64 = 0.640_388_203_202_208; // (1 + sqrt(17)) / 8

/// Bunch-Kaufman LDLᵀ of a symmetric matrix with exact inertia.
pub fn dense_ldl_oracle(matrix: &DenseMatrix) -> Result<DenseLdl, LinalgError> {
    if matrix.n != matrix.m {
        return Err(LinalgError::DimensionMismatch { expected: matrix.n, found: matrix.m });
    }
    let n = matrix.n;
    let mut a = matrix.data.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut l = vec![0.0; n * n];
    let mut blocks = vec![Block::One(0.0); n];
    let mut inertia = Inertia::default();
    let tol = n.max(1) as f64 * f64::EPSILON * matrix.max_abs();

    let swap = |a: &mut Vec<f64>, l: &mut Vec<f64>, perm: &mut Vec<usize>, i: usize, j: usize, k: usize| {
        if i == j {
            return;
        }
        for c in 0..n {
            a.swap(i * n + c, j * n + c);
        }
        for r in 0..n {
            a.swap(r * n + i, r * n + j);
        }
        for c in 0..k {
            l.swap(i * n + c, j * n + c);
        }
        perm.swap(i, j);
    };

    let mut k = 0;
    while k < n {
        let akk = a[k * n + k].abs();
        let (r, colmax) = (k + 1..n).map(|i| (i, a[i * n + k].abs())).fold((k, 0.0), |best, c| if c.1 > best.1 { c } else { best });
        if akk.max(colmax) <= tol {
            blocks[k] = Block::One(0.0);
            inertia.zero += 1;
            l[k * n + k] = 1.0;
            k += 1;
            continue;
        }
        let two = if akk >= ALPHA * colmax {
            false
        } else {
            let rowmax = (k..n).filter(|&j| j != r).map(|j| a[r * n + j].abs()).fold(0.0, f64::max);
            if akk * rowmax >= ALPHA * colmax * colmax {
                false
            } else if a[r * n + r].abs() >= ALPHA * rowmax {
                swap(&mut a, &mut l, &mut perm, k, r, k);
                false
            } else {
                swap(&mut a, &mut l, &mut perm, k + 1, r, k);
                true
            }
        };

        if !two {
            let d = a[k * n + k];
            blocks[k] = Block::One(d);
            l[k * n + k] = 1.0;
            if d.abs() <= tol {
                inertia.zero += 1;
                k += 1;
                continue;
            }
            if d > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
            for i in k + 1..n {
                l[i * n + k] = a[i * n + k] / d;
            }
            for i in k + 1..n {
                let lik = l[i * n + k];
                if lik == 0.0 {
                    continue;
                }
                for j in k + 1..n {
                    a[i * n + j] -= lik * a[j * n + k];
                }
            }
            k += 1;
        } else {
            let (p, q, s) = (a[k * n + k], a[(k + 1) * n + k], a[(k + 1) * n + k + 1]);
            let det = p * s - q * q;
            blocks[k] = Block::Two(p, q, s);
            blocks[k + 1] = Block::Tail;
            l[k * n + k] = 1.0;
            l[(k + 1) * n + k + 1] = 1.0;
            if det.abs() <= tol * tol {
                return Err(LinalgError::Singular);
            }
            if det < 0.0 {
                inertia.positive += 1;
                inertia.negative += 1;
            } else if p + s > 0.0 {
                inertia.positive += 2;
            } else {
                inertia.negative += 2;
            }
            for i in k + 2..n {
                let (u, v) = (a[i * n + k], a[i * n + k + 1]);
                l[i * n + k] = (u * s - v * q) / det;
                l[i * n + k + 1] = (v * p - u * q) / det;
            }
            for i in k + 2..n {
                let (l0, l1) = (l[i * n + k], l[i * n + k + 1]);
                for j in k + 2..n {
                    a[i * n + j] -= l0 * a[j * n + k] + l1 * a[j * n + k + 1];
                }
            }
            k += 2;
        }
    }
    Ok(DenseLdl { inertia, n, perm, l, blocks })
}

impl DenseLdl {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.inertia.zero > 0 {
            return Err(LinalgError::Singular);
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for j in 0..n {
            let xj = x[j];
            for i in j + 1..n {
                x[i] -= self.l[i * n + j] * xj;
            }
        }
        let mut k = 0;
        while k < n {
            match self.blocks[k] {
                Block::One(d) => {
                    x[k] /= d;
                    k += 1;
                }
                Block::Two(p, q, s) => {
                    let det = p * s - q * q;
                    let (u, v) = (x[k], x[k + 1]);
                    x[k] = (s * u - q * v) / det;
                    x[k + 1] = (p * v - q * u) / det;
                    k += 2;
                }
                Block::Tail => unreachable!("tail rows are consumed with their block"),
            }
        }
        for j in (0..n).rev() {
            let s: f64 = (j + 1..n).map(|i| self.l[i * n + j] * x[i]).sum();
            x[j] -= s;
        }
        let mut out = vec![0.0; n];
        for (k, &i) in self.perm.iter().enumerate() {
            out[i] = x[k];
        }
        Ok(out)
    }
}
