//! Minimal dense row-major matrix plus the few kernels the network needs.
//! Everything is f64; instances are small enough that fidelity matters more
//! than speed.

use crate::graph::Csr;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Mat {
        assert_eq!(data.len(), rows * cols, "shape mismatch");
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Mat {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat {
            rows: r,
            cols: c,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// self · other.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    /// selfᵀ · other, without materializing the transpose.
    pub fn t_matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "outer dimension mismatch");
        let mut out = Mat::zeros(self.cols, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let b = other.row(i);
            for (k, &av) in a.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let dst = out.row_mut(k);
                for (d, &bv) in dst.iter_mut().zip(b) {
                    *d += av * bv;
                }
            }
        }
        out
    }

    /// self · otherᵀ.
    pub fn matmul_t(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "inner dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                let b = other.row(j);
                out.set(i, j, a.iter().zip(b).map(|(&x, &y)| x * y).sum());
            }
        }
        out
    }

    /// Add a row vector to every row.
    pub fn add_row(&mut self, bias: &[f64]) {
        assert_eq!(bias.len(), self.cols, "bias width mismatch");
        for i in 0..self.rows {
            for (d, &b) in self.row_mut(i).iter_mut().zip(bias) {
                *d += b;
            }
        }
    }

    pub fn relu(&self) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v.max(0.0)).collect(),
        }
    }

    /// Zero out entries of `self` where `pre` is not strictly positive
    /// (the ReLU subgradient at 0 is 0).
    pub fn relu_backward(&self, pre: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (pre.rows, pre.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&pre.data)
                .map(|(&g, &z)| if z > 0.0 { g } else { 0.0 })
                .collect(),
        }
    }

    /// Column-wise sums, as a row vector.
    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, &v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }

    /// Horizontal concatenation [self | other].
    pub fn hstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "row count mismatch");
        let mut out = Mat::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
            out.row_mut(i)[self.cols..].copy_from_slice(other.row(i));
        }
        out
    }

    /// Columns [lo, hi) as a new matrix.
    pub fn col_slice(&self, lo: usize, hi: usize) -> Mat {
        let mut out = Mat::zeros(self.rows, hi - lo);
        for i in 0..self.rows {
            out.row_mut(i).copy_from_slice(&self.row(i)[lo..hi]);
        }
        out
    }

    /// Rows permuted: row i of the result is row perm[i] of self.
    pub fn permute_rows(&self, perm: &[u32]) -> Mat {
        assert_eq!(perm.len(), self.rows, "permutation length mismatch");
        let mut out = Mat::zeros(self.rows, self.cols);
        for (i, &src) in perm.iter().enumerate() {
            out.row_mut(i).copy_from_slice(self.row(src as usize));
        }
        out
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (d, &s) in self.data.iter_mut().zip(&other.data) {
            *d += s;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for d in &mut self.data {
            *d *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Sparse-dense product A · H for CSR A.
pub fn spmm(a: &Csr<f64>, h: &Mat) -> Mat {
    assert_eq!(a.num_rows(), h.rows(), "sparse width must match dense rows");
    let mut out = Mat::zeros(a.num_rows(), h.cols());
    for i in 0..a.num_rows() {
        let (cols, vals) = a.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            let src = h.row(j as usize);
            let dst = out.row_mut(i);
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

/// Sparse-dense product Aᵀ · H. Equal to `spmm` when A is symmetric, but
/// row-normalized adjacencies are not, so the backward pass uses this.
pub fn spmm_t(a: &Csr<f64>, h: &Mat) -> Mat {
    assert_eq!(
        a.num_rows(),
        h.rows(),
        "sparse height must match dense rows"
    );
    let mut out = Mat::zeros(a.num_rows(), h.cols());
    for i in 0..a.num_rows() {
        let (cols, vals) = a.row(i);
        let src = h.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            let dst = out.row_mut(j as usize);
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
    out
}

/// v · W for a row vector v.
pub fn vecmat(v: &[f64], w: &Mat) -> Vec<f64> {
    assert_eq!(v.len(), w.rows(), "inner dimension mismatch");
    let mut out = vec![0.0; w.cols()];
    for (k, &vk) in v.iter().enumerate() {
        if vk == 0.0 {
            continue;
        }
        for (o, &wv) in out.iter_mut().zip(w.row(k)) {
            *o += vk * wv;
        }
    }
    out
}

/// v · Wᵀ for a row vector v.
pub fn vecmat_t(v: &[f64], w: &Mat) -> Vec<f64> {
    assert_eq!(v.len(), w.cols(), "inner dimension mismatch");
    (0..w.rows())
        .map(|i| w.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
        .collect()
}

/// dst += aᵀ · b for row vectors a, b (outer product accumulate).
pub fn outer_acc(dst: &mut Mat, a: &[f64], b: &[f64]) {
    assert_eq!((dst.rows(), dst.cols()), (a.len(), b.len()));
    for (i, &av) in a.iter().enumerate() {
        if av == 0.0 {
            continue;
        }
        for (d, &bv) in dst.row_mut(i).iter_mut().zip(b) {
            *d += av * bv;
        }
    }
}
