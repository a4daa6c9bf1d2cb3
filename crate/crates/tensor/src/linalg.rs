//! Strided matrix products on top of `matrixmultiply::dgemm`.

use crate::exec::for_each_chunk_mut;

/// Output rows handled per task. Fixed so the split never depends on the
/// thread count.
const ROW_BLOCK: usize = 64;

/// Read-only strided view of a matrix inside a flat buffer.
#[derive(Clone, Copy, Debug)]
pub(crate) struct MatView<'a> {
    pub data: &'a [f64],
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a> MatView<'a> {
    pub fn row_major(data: &'a [f64], offset: usize, rows: usize, cols: usize) -> Self {
        Self {
            data,
            offset,
            rows,
            cols,
            row_stride: cols,
            col_stride: 1,
        }
    }

    /// Transposed view of a row-major `rows x cols` block.
    pub fn transposed(data: &'a [f64], offset: usize, rows: usize, cols: usize) -> Self {
        Self {
            data,
            offset,
            rows: cols,
            cols: rows,
            row_stride: 1,
            col_stride: cols,
        }
    }

    fn last_index(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return self.offset;
        }
        self.offset + (self.rows - 1) * self.row_stride + (self.cols - 1) * self.col_stride
    }

    fn skip_rows(self, n: usize) -> Self {
        Self {
            offset: self.offset + n * self.row_stride,
            rows: self.rows - n,
            ..self
        }
    }
}

/// `c = a·b + beta·c` for a contiguous row-major `c`.
pub(crate) fn gemm(a: MatView<'_>, b: MatView<'_>, beta: f64, c: &mut [f64]) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    assert_eq!(c.len(), a.rows * b.cols, "gemm output size");
    if c.is_empty() {
        return;
    }
    if a.cols == 0 {
        if beta == 0.0 {
            c.fill(0.0);
        } else {
            c.iter_mut().for_each(|v| *v *= beta);
        }
        return;
    }
    assert!(a.last_index() < a.data.len(), "gemm lhs view out of bounds");
    assert!(b.last_index() < b.data.len(), "gemm rhs view out of bounds");
    let n = b.cols;
    unsafe {
        // SAFETY: both views were bounds-checked above and `c` has exactly
        // rows*cols contiguous elements.
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            n,
            1.0,
            a.data.as_ptr().add(a.offset),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr().add(b.offset),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Same as [`gemm`] but splits the output into row blocks that may run in
/// parallel.
pub(crate) fn gemm_blocked(a: MatView<'_>, b: MatView<'_>, beta: f64, c: &mut [f64]) {
    let n = b.cols;
    if a.rows <= ROW_BLOCK || n == 0 {
        gemm(a, b, beta, c);
        return;
    }
    for_each_chunk_mut(c, ROW_BLOCK * n, |i, chunk| {
        let rows = chunk.len() / n;
        let mut sub = a.skip_rows(i * ROW_BLOCK);
        sub.rows = rows;
        gemm(sub, b, beta, chunk);
    });
}
