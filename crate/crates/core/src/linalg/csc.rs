//! Coordinate and compressed-sparse-column storage.

use serde::{Deserialize, Serialize};

/// Coordinate-format matrix. Repeated `(row, col)` coordinates are allowed and
/// mean summation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CooMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl CooMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        CooMatrix { nrows, ncols, ..Default::default() }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut m = CooMatrix::new(nrows, ncols);
        for &(r, c, v) in triplets {
            m.push(r, c, v);
        }
        m
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.rows.push(row);
        self.cols.push(col);
        self.values.push(value);
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Dense accumulation, row-major.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for k in 0..self.nnz() {
            d[self.rows[k]][self.cols[k]] += self.values[k];
        }
        d
    }
}

/// Compressed sparse column matrix with sorted row indices in each column.
///
/// When `lower` is set the matrix is symmetric and only entries with
/// `row >= col` are stored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub values: Vec<f64>,
    pub lower: bool,
}

/// Maps every slot of a COO array to its position in the compressed values.
pub type SlotMap = Vec<usize>;

/// Compress a COO matrix, summing duplicates.
///
/// The returned slot map lets later numeric updates skip all symbolic work:
/// `csc.values[map[k]] += coo.values[k]`.
pub fn compress_to_csc(coo: &CooMatrix) -> (CscMatrix, SlotMap) {
    compress_pattern(coo.nrows, coo.ncols, &coo.rows, &coo.cols, Some(&coo.values), false)
}

/// Compress a COO pattern assumed to hold the lower triangle of a symmetric
/// matrix. Entries above the diagonal are mirrored into the lower triangle.
pub fn compress_symmetric_lower(coo: &CooMatrix) -> (CscMatrix, SlotMap) {
    assert_eq!(coo.nrows, coo.ncols, "symmetric storage needs a square matrix");
    let (rows, cols): (Vec<usize>, Vec<usize>) =
        coo.rows.iter().zip(&coo.cols).map(|(&r, &c)| (r.max(c), r.min(c))).unzip();
    compress_pattern(coo.nrows, coo.ncols, &rows, &cols, Some(&coo.values), true)
}

pub(crate) fn compress_pattern(
    nrows: usize,
    ncols: usize,
    rows: &[usize],
    cols: &[usize],
    values: Option<&[f64]>,
    lower: bool,
) -> (CscMatrix, SlotMap) {
    let nnz = rows.len();
    // Counting sort by column, then by row inside each column.
    let mut order: Vec<usize> = (0..nnz).collect();
    order.sort_by_key(|&k| (cols[k], rows[k]));
    let mut colptr = vec![0usize; ncols + 1];
    let mut rowidx = Vec::with_capacity(nnz);
    let mut map = vec![0usize; nnz];
    let mut last: Option<(usize, usize)> = None;
    for &k in &order {
        let key = (cols[k], rows[k]);
        if last != Some(key) {
            rowidx.push(rows[k]);
            colptr[cols[k] + 1] += 1;
            last = Some(key);
        }
        map[k] = rowidx.len() - 1;
    }
    for j in 0..ncols {
        colptr[j + 1] += colptr[j];
    }
    let mut csc = CscMatrix { nrows, ncols, colptr, values: vec![0.0; rowidx.len()], rowidx, lower };
    if let Some(v) = values {
        csc.scatter(&map, v);
    }
    (csc, map)
}

impl CscMatrix {
    pub fn nnz(&self) -> usize {
        self.rowidx.len()
    }

    /// Overwrite the values from COO values through a slot map.
    pub fn scatter(&mut self, map: &[usize], coo_values: &[f64]) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
        for (&dst, &v) in map.iter().zip(coo_values) {
            self.values[dst] += v;
        }
    }

    pub fn column(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.colptr[j]..self.colptr[j + 1];
        (&self.rowidx[r.clone()], &self.values[r])
    }

    /// Position of `(row, col)` in `values`, if stored.
    pub fn find(&self, row: usize, col: usize) -> Option<usize> {
        let (rows, _) = self.column(col);
        rows.binary_search(&row).ok().map(|k| self.colptr[col] + k)
    }

    /// `y = A x`, expanding the symmetric storage when `lower` is set.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for j in 0..self.ncols {
            for k in self.colptr[j]..self.colptr[j + 1] {
                let i = self.rowidx[k];
                let a = self.values[k];
                y[i] += a * x[j];
                if self.lower && i != j {
                    y[j] += a * x[i];
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for k in self.colptr[j]..self.colptr[j + 1] {
                let i = self.rowidx[k];
                d[i][j] += self.values[k];
                if self.lower && i != j {
                    d[j][i] += self.values[k];
                }
            }
        }
        d
    }

    /// Lower-triangular symmetric matrix from a dense square matrix, dropping
    /// exact zeros off the diagonal.
    pub fn from_dense_lower(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let mut coo = CooMatrix::new(n, n);
        for j in 0..n {
            for (i, row) in a.iter().enumerate().skip(j) {
                if i == j || row[j] != 0.0 {
                    coo.push(i, j, row[j]);
                }
            }
        }
        compress_symmetric_lower(&coo).0
    }

    /// Largest absolute stored value.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.ncols).filter_map(|j| self.find(j, j)).fold(0.0, |m, k| m.max(self.values[k].abs()))
    }

    /// Check structural invariants.
    pub fn is_well_formed(&self) -> bool {
        if self.colptr.len() != self.ncols + 1 || self.colptr[0] != 0 || self.values.len() != self.rowidx.len() {
            return false;
        }
        if *self.colptr.last().unwrap() != self.rowidx.len() {
            return false;
        }
        (0..self.ncols).all(|j| {
            let (rows, _) = self.column(j);
            self.colptr[j] <= self.colptr[j + 1]
                && rows.windows(2).all(|w| w[0] < w[1])
                && rows.iter().all(|&i| i < self.nrows && (!self.lower || i >= j))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicates_are_summed() {
        let coo = CooMatrix::from_triplets(2, 2, &[(1, 1, 2.5), (1, 1, 4.0)]);
        let (csc, map) = compress_to_csc(&coo);
        assert_eq!(csc.nnz(), 1);
        assert_eq!(csc.values, vec![6.5]);
        assert_eq!(map, vec![0, 0]);
    }

    #[test]
    fn empty_coo_gives_empty_csc() {
        let (csc, map) = compress_to_csc(&CooMatrix::new(3, 3));
        assert_eq!(csc.nnz(), 0);
        assert_eq!(csc.colptr, vec![0; 4]);
        assert!(map.is_empty());
        assert!(csc.is_well_formed());
    }

    #[test]
    fn random_pattern_with_duplicates_matches_dense_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let mut coo = CooMatrix::new(n, n);
        for _ in 0..800 {
            let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
            coo.push(i, j, rng.gen_range(-1.0..1.0));
            if rng.gen_bool(0.3) {
                coo.push(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        let dense = coo.to_dense();
        let (csc, _) = compress_to_csc(&coo);
        assert!(csc.is_well_formed());
        let rebuilt = csc.to_dense();
        for i in 0..n {
            for j in 0..n {
                assert!((dense[i][j] - rebuilt[i][j]).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn symmetric_lower_mirrors_upper_entries() {
        let coo = CooMatrix::from_triplets(2, 2, &[(0, 1, 3.0), (1, 0, 1.0), (0, 0, 2.0)]);
        let (csc, _) = compress_symmetric_lower(&coo);
        assert_eq!(csc.to_dense(), vec![vec![2.0, 4.0], vec![4.0, 0.0]]);
        assert_eq!(csc.mul_vec(&[1.0, 1.0]), vec![6.0, 4.0]);
    }
}
