//! Compressed sparse row storage used for all assembled operators.

use std::io::{self, Write};

use faer::sparse::{SparseColMat, SymbolicSparseColMat};

/// General sparse matrix in CSR layout with sorted column indices and no
/// stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries in input order and drops exact zeros.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len() / 2);
        let mut values = Vec::with_capacity(triplets.len() / 2);
        let mut rows = Vec::with_capacity(triplets.len() / 2);
        let mut iter = triplets.into_iter().peekable();
        while let Some((i, j, mut v)) = iter.next() {
            assert!(i < nrows && j < ncols, "entry ({i}, {j}) out of bounds");
            while let Some(&(i2, j2, v2)) = iter.peek() {
                if (i2, j2) != (i, j) {
                    break;
                }
                v += v2;
                iter.next();
            }
            if v != 0.0 {
                rows.push(i);
                indices.push(j);
                values.push(v);
            }
        }
        for &i in &rows {
            indptr[i + 1] += 1;
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn matvec_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (j, v) in self.row(i) {
                    out[j] += v * yi;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(i, j, v)| (j, i, v)).collect(),
        )
    }

    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut marker = vec![usize::MAX; other.ncols];
        let mut triplets = Vec::new();
        for i in 0..self.nrows {
            let mut cols = Vec::new();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            triplets.extend(cols.into_iter().map(|j| (i, j, acc[j])));
        }
        Self::from_triplets(self.nrows, other.ncols, triplets)
    }

    /// `alpha·self + beta·other`.
    pub fn add(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let triplets = self
            .triplets()
            .map(|(i, j, v)| (i, j, alpha * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, beta * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, triplets)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.values.retain(|v| *v != 0.0);
        if out.values.len() != self.values.len() {
            return Self::from_triplets(
                self.nrows,
                self.ncols,
                self.triplets().map(|(i, j, v)| (i, j, v * s)).collect(),
            );
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        let mut m = faer::Mat::<f64>::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Symmetric permutation `P A Pᵀ` where `perm[i]` is the new index of row `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(self.nrows, self.ncols);
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets()
                .map(|(i, j, v)| (perm[i], perm[j], v))
                .collect(),
        )
    }

    /// Writes the matrix in Matrix Market coordinate format.
    pub fn write_matrix_market<W: Write>(&self, mut out: W, symmetric: bool) -> io::Result<()> {
        let kind = if symmetric { "symmetric" } else { "general" };
        writeln!(out, "%%MatrixMarket matrix coordinate real {kind}")?;
        let entries: Vec<_> = self
            .triplets()
            .filter(|&(i, j, _)| !symmetric || i >= j)
            .collect();
        writeln!(out, "{} {} {}", self.nrows, self.ncols, entries.len())?;
        for (i, j, v) in entries {
            writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

/// Symmetric sparse matrix; both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricMatrix {
    inner: CsrMatrix,
}

impl SparseSymmetricMatrix {
    /// Wraps `m` after checking symmetry to `rel_tol · max|m|`.
    pub fn try_from_csr(m: CsrMatrix, rel_tol: f64) -> Result<Self, CsrMatrix> {
        if m.nrows != m.ncols {
            return Err(m);
        }
        let scale = m.max_abs();
        let ok = m
            .triplets()
            .all(|(i, j, v)| (v - m.get(j, i)).abs() <= rel_tol * scale);
        if ok {
            Ok(Self { inner: m })
        } else {
            Err(m)
        }
    }

    /// Builds from triplets that are symmetric by construction, e.g. sums of
    /// symmetric local matrices.
    pub fn from_triplets_stable(n: usize, triplets: Vec<(usize, usize, f64)>) -> Self {
        Self::from_csr_unchecked(CsrMatrix::from_triplets(n, n, triplets))
    }

    pub(crate) fn from_csr_unchecked(m: CsrMatrix) -> Self {
        debug_assert_eq!(m.nrows, m.ncols);
        Self { inner: m }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.inner
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.inner.matvec(x)
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(&self.matvec(x), x)
    }

    pub fn bilinear_form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(&self.matvec(x), y)
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.max_abs()
    }

    /// `max |a_ij − a_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        self.inner
            .triplets()
            .fold(0.0, |m, (i, j, v)| m.max((v - self.inner.get(j, i)).abs()))
    }

    pub fn add(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        Self {
            inner: self.inner.add(alpha, &other.inner, beta),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            inner: self.inner.scaled(s),
        }
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            inner: self.inner.permuted(perm),
        }
    }

    pub fn to_dense(&self) -> faer::Mat<f64> {
        self.inner.to_dense()
    }

    /// Lower triangle in faer's compressed-column layout. Row `j` of the
    /// symmetric CSR storage is column `j`.
    pub fn to_faer_lower(&self) -> SparseColMat<usize, f64> {
        let n = self.dim();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut vals = Vec::new();
        col_ptr.push(0);
        for j in 0..n {
            for (i, v) in self.inner.row(j) {
                if i >= j {
                    row_idx.push(i);
                    vals.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        SparseColMat::new(symbolic, vals)
    }

    pub fn write_matrix_market<W: Write>(&self, out: W) -> io::Result<()> {
        self.inner.write_matrix_market(out, true)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha·x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len());
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
