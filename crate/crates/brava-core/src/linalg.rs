//! Minimal row-major dense matrix helpers for the model's forward and
//! backward passes. Row-parallel with the `parallel` feature; every output
//! row is an independent fixed-order sum, so the parallel and sequential
//! paths are bitwise identical.

use crate::graph::Graph;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Mat { rows, cols, data }
    }

    pub fn column(rows: usize, data: Vec<f64>) -> Self {
        Mat::from_vec(rows, 1, data)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

fn for_each_row(out: &mut Mat, f: impl Fn(usize, &mut [f64]) + Sync + Send) {
    let cols = out.cols;
    #[cfg(feature = "parallel")]
    {
        out.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, row) in out.data.chunks_mut(cols).enumerate() {
            f(i, row);
        }
    }
}

/// `A x H` over the stored adjacency: each output row is the sum of the
/// out-neighbors' rows.
pub(crate) fn spmv_rows(g: &Graph, h: &Mat) -> Mat {
    debug_assert_eq!(g.node_count(), h.rows);
    let mut out = Mat::zeros(h.rows, h.cols);
    for_each_row(&mut out, |u, row| {
        for &v in g.neighbors(u) {
            for (slot, value) in row.iter_mut().zip(h.row(v as usize)) {
                *slot += value;
            }
        }
    });
    out
}

/// `X(n x a) . W(a x b)`.
pub(crate) fn matmul(x: &Mat, w: &Mat) -> Mat {
    debug_assert_eq!(x.cols, w.rows);
    let mut out = Mat::zeros(x.rows, w.cols);
    for_each_row(&mut out, |i, row| {
        let xi = x.row(i);
        for (k, &xv) in xi.iter().enumerate() {
            if xv != 0.0 {
                for (slot, &wv) in row.iter_mut().zip(w.row(k)) {
                    *slot += xv * wv;
                }
            }
        }
    });
    out
}

/// `X^T . Y -> (a x b)` for weight gradients.
pub(crate) fn matmul_xt_y(x: &Mat, y: &Mat) -> Mat {
    debug_assert_eq!(x.rows, y.rows);
    let mut out = Mat::zeros(x.cols, y.cols);
    for_each_row(&mut out, |a, row| {
        for i in 0..x.rows {
            let xv = x.row(i)[a];
            if xv != 0.0 {
                for (slot, &yv) in row.iter_mut().zip(y.row(i)) {
                    *slot += xv * yv;
                }
            }
        }
    });
    out
}

/// `X(n x b) . W^T(b x a) -> (n x a)` for input gradients.
pub(crate) fn matmul_x_wt(x: &Mat, w: &Mat) -> Mat {
    debug_assert_eq!(x.cols, w.cols);
    let mut out = Mat::zeros(x.rows, w.rows);
    for_each_row(&mut out, |i, row| {
        let xi = x.row(i);
        for (a, slot) in row.iter_mut().enumerate() {
            let wa = w.row(a);
            *slot = xi.iter().zip(wa).map(|(&xv, &wv)| xv * wv).sum();
        }
    });
    out
}

pub(crate) fn add_row_bias(m: &mut Mat, bias: &[f64]) {
    debug_assert_eq!(m.cols, bias.len());
    for_each_row(m, |_, row| {
        for (slot, &b) in row.iter_mut().zip(bias) {
            *slot += b;
        }
    });
}

pub(crate) fn relu(m: &Mat) -> Mat {
    let mut out = m.clone();
    for v in &mut out.data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Zero the gradient wherever the pre-activation was <= 0 (subgradient 0 at 0).
pub(crate) fn relu_backward_inplace(pre: &Mat, grad: &mut Mat) {
    debug_assert_eq!(pre.data.len(), grad.data.len());
    for (g, &p) in grad.data.iter_mut().zip(&pre.data) {
        if p <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Rowwise L2 normalization; zero rows stay zero, nonzero rows come out at
/// unit norm.
pub(crate) fn row_l2_normalize(m: &Mat) -> Mat {
    let mut out = m.clone();
    for_each_row(&mut out, |i, row| {
        let norm = m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    });
    out
}

/// Gradient of rowwise L2 normalization: with `h = r / |r|`,
/// `dr = (g - (g . h) h) / |r|`; zero rows pass zero gradient.
pub(crate) fn row_l2_normalize_backward(pre_norm: &Mat, grad_out: &Mat) -> Mat {
    let mut out = Mat::zeros(pre_norm.rows, pre_norm.cols);
    for_each_row(&mut out, |i, row| {
        let r = pre_norm.row(i);
        let g = grad_out.row(i);
        let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let dot: f64 = g.iter().zip(r).map(|(&gv, &rv)| gv * rv / norm).sum();
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = (g[k] - dot * r[k] / norm) / norm;
            }
        }
    });
    out
}

pub(crate) fn column_sums(m: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; m.cols];
    for i in 0..m.rows {
        for (slot, &v) in out.iter_mut().zip(m.row(i)) {
            *slot += v;
        }
    }
    out
}
