use crate::error::{Error, Result};

/// Compressed sparse row matrix. Entries within a row are sorted by column
/// and unique; explicit zeros are kept so patterns stay stable across
/// reassembly.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-format accumulator.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Appends every entry of `m` shifted by `(row_offset, col_offset)`.
    pub fn push_block(&mut self, m: &SparseMatrix, row_offset: usize, col_offset: usize, scale: f64) {
        for (i, j, v) in m.iter() {
            self.push(i + row_offset, j + col_offset, scale * v);
        }
    }

    pub fn build(mut self) -> SparseMatrix {
        // stable sort keeps the duplicate summation order deterministic
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn identity(n: usize) -> Self {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 1.0);
        }
        b.build()
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        let cols = &self.col_idx[start..self.row_ptr[i + 1]];
        cols.binary_search(&j).ok().map(|k| start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols, "mul_vec dimension");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "transpose_mul_vec dimension");
        let mut out = vec![0.0; self.ncols];
        for (i, j, v) in self.iter() {
            out[j] += v * x[i];
        }
        out
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        (0..self.nrows)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (i, j, v) in self.iter() {
            b.push(j, i, v);
        }
        b.build()
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Linear combination over the union pattern.
    pub fn combine(parts: &[(&SparseMatrix, f64)]) -> Result<SparseMatrix> {
        let Some((first, _)) = parts.first() else {
            return Err(Error::DimensionMismatch("empty combination".into()));
        };
        let (nr, nc) = (first.nrows, first.ncols);
        let mut b = TripletBuilder::new(nr, nc);
        for (m, s) in parts {
            if m.nrows != nr || m.ncols != nc {
                return Err(Error::DimensionMismatch(format!(
                    "{}x{} vs {}x{}",
                    m.nrows, m.ncols, nr, nc
                )));
            }
            b.push_block(m, 0, 0, *s);
        }
        Ok(b.build())
    }

    /// `self += scale * other`; `other`'s pattern must be contained in
    /// `self`'s.
    pub fn add_scaled(&mut self, other: &SparseMatrix, scale: f64) -> Result<()> {
        if other.nrows > self.nrows || other.ncols > self.ncols {
            return Err(Error::DimensionMismatch("add_scaled operand too large".into()));
        }
        for i in 0..other.nrows {
            for k in other.row_ptr[i]..other.row_ptr[i + 1] {
                let j = other.col_idx[k];
                let pos = self.position(i, j).ok_or_else(|| {
                    Error::DimensionMismatch(format!("entry ({i}, {j}) outside the pattern"))
                })?;
                self.values[pos] += scale * other.values[k];
            }
        }
        Ok(())
    }

    /// Largest entrywise difference over the union of both patterns.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        let diff = SparseMatrix::combine(&[(self, 1.0), (other, -1.0)]).expect("same shape");
        diff.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.nrows == self.ncols && self.max_abs_diff(&self.transpose()) <= tol
    }

    /// True when the nonzero pattern is symmetric (values ignored).
    pub fn has_symmetric_pattern(&self) -> bool {
        self.nrows == self.ncols && self.iter().all(|(i, j, _)| self.position(j, i).is_some())
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            out[i][j] = v;
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
