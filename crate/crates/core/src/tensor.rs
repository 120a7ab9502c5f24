//! Dense row-major matrices and mode-n products on flattened tensors.

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Contract axis `axis` of `data` (shape `shape`) with `mat`
/// (`mat.cols == shape[axis]`); the result has `shape[axis] = mat.rows`.
pub fn mode_product(data: &[f64], shape: &[usize], axis: usize, mat: &Mat) -> Vec<f64> {
    debug_assert_eq!(mat.cols, shape[axis]);
    debug_assert_eq!(data.len(), shape.iter().product::<usize>());
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let (rows, cols) = (mat.rows, mat.cols);
    let mut out = vec![0.0; outer * rows * inner];
    for o in 0..outer {
        let src = &data[o * cols * inner..(o + 1) * cols * inner];
        let dst = &mut out[o * rows * inner..(o + 1) * rows * inner];
        for r in 0..rows {
            let row = &mut dst[r * inner..(r + 1) * inner];
            let mrow = &mat.data[r * cols..(r + 1) * cols];
            for (c, &m) in mrow.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let s = &src[c * inner..(c + 1) * inner];
                for (d, &v) in row.iter_mut().zip(s) {
                    *d += m * v;
                }
            }
        }
    }
    out
}

/// Apply one matrix per axis, in axis order.
pub fn separable_apply(data: &[f64], shape: &[usize], mats: &[&Mat]) -> Vec<f64> {
    debug_assert_eq!(mats.len(), shape.len());
    let mut cur = data.to_vec();
    let mut cur_shape = shape.to_vec();
    for (axis, m) in mats.iter().enumerate() {
        cur = mode_product(&cur, &cur_shape, axis, m);
        cur_shape[axis] = m.rows;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_product_matches_naive() {
        // 2x3 tensor, contract axis 1 with a 2x3 matrix
        let data = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = Mat::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        let out = mode_product(&data, &[2, 3], 1, &m);
        // row 0: [0,1,2].[1,2,3]=8, [3,4,5].[1,2,3]=26
        assert_eq!(out, vec![8.0, 26.0, 17.0, 62.0]);
        // axis 0 with 1x2 ones: column sums
        let ones = Mat::from_fn(1, 2, |_, _| 1.0);
        assert_eq!(mode_product(&data, &[2, 3], 0, &ones), vec![5.0, 7.0, 9.0]);
    }
}
