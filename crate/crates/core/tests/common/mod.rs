//! Independent reference computations used by the integration and acceptance
//! tests. Nothing here calls the operators under test.
#![allow(dead_code)]

use csc_core::{ConvDictionary, Tensor3};

/// Row-major dense matrix in f64.
#[derive(Debug, Clone)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.at(r, c) * x[c]).sum())
            .collect()
    }

    pub fn tmatvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c] += self.at(r, c) * y[r];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Dense) -> Dense {
        assert_eq!(self.cols, other.rows);
        let mut out = Dense::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.at(k, c);
                }
            }
        }
        out
    }

    /// Largest eigenvalue of `AᵀA` by dense power iteration.
    pub fn gram_top_eigenvalue(&self, iters: usize) -> f64 {
        let mut v: Vec<f64> = (0..self.cols).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let mut lambda = 0.0;
        for _ in 0..iters {
            let w = self.tmatvec(&self.matvec(&v));
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            lambda = norm / vnorm;
            v = w.iter().map(|x| x / norm).collect();
        }
        lambda
    }
}

/// Explicit synthesis matrix of `dict` for a `rep_h × rep_w` representation,
/// built entry by entry from the transposed-convolution formula. Columns
/// index `Γ` (channel-last), rows index the image.
pub fn synthesis_matrix(dict: &ConvDictionary, rep_h: usize, rep_w: usize) -> Dense {
    let (m, n, c, s, p) = (
        dict.atom_count(),
        dict.atom_size(),
        dict.channels(),
        dict.stride() as isize,
        dict.padding() as isize,
    );
    let out_h = (rep_h as isize - 1) * s + n as isize - 2 * p;
    let out_w = (rep_w as isize - 1) * s + n as isize - 2 * p;
    assert!(out_h > 0 && out_w > 0);
    let (out_h, out_w) = (out_h as usize, out_w as usize);
    let mut mat = Dense::zeros(out_h * out_w * c, rep_h * rep_w * m);
    for i in 0..rep_h {
        for j in 0..rep_w {
            for k in 0..m {
                let col = (i * rep_w + j) * m + k;
                for h in 0..out_h {
                    for w in 0..out_w {
                        let u = h as isize - i as isize * s + p;
                        let v = w as isize - j as isize * s + p;
                        if u < 0 || v < 0 || u >= n as isize || v >= n as isize {
                            continue;
                        }
                        for ch in 0..c {
                            let a = dict.atom(k)[((u as usize) * n + v as usize) * c + ch];
                            let row = (h * out_w + w) * c + ch;
                            mat.data[row * mat.cols + col] = f64::from(a);
                        }
                    }
                }
            }
        }
    }
    mat
}

pub fn to_f64(t: &Tensor3) -> Vec<f64> {
    t.data().iter().map(|&v| f64::from(v)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exhaustive search over all supports of `values` (at most ~16 entries)
/// satisfying `allowed`. Returns the Euclidean-nearest masked vector and its
/// squared distance. Among equally near supports the one that is
/// lexicographically largest as an index-0-first bit vector wins, which is
/// the "lower index wins" tie-break.
pub fn enumerate_projection(values: &[f64], allowed: impl Fn(&[bool]) -> bool) -> (Vec<f64>, f64) {
    let len = values.len();
    assert!(len <= 16);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut keep = vec![false; len];
    for code in (0u32..(1 << len)).rev() {
        for (i, slot) in keep.iter_mut().enumerate() {
            *slot = code & (1 << (len - 1 - i)) != 0;
        }
        if !allowed(&keep) {
            continue;
        }
        let dist: f64 = values
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| !k)
            .map(|(v, _)| v * v)
            .sum();
        if best.as_ref().is_none_or(|(_, d)| dist < *d) {
            let masked = values
                .iter()
                .zip(&keep)
                .map(|(&v, &k)| if k { v } else { 0.0 })
                .collect();
            best = Some((masked, dist));
        }
    }
    best.expect("empty support is always allowed")
}

pub fn global_budget(k: usize) -> impl Fn(&[bool]) -> bool {
    move |keep: &[bool]| keep.iter().filter(|&&b| b).count() <= k
}

pub fn needle_budget(k: usize, channels: usize) -> impl Fn(&[bool]) -> bool {
    move |keep: &[bool]| {
        keep.chunks(channels)
            .all(|n| n.iter().filter(|&&b| b).count() <= k)
    }
}

/// `½‖Ax − y‖² + λ‖x‖₁`.
pub fn lasso_objective(a: &Dense, x: &[f64], y: &[f64], lambda: f64) -> f64 {
    let r = a.matvec(x);
    0.5 * r.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>()
        + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Subgradient descent on the lasso objective with steps `c/√(t+1)`,
/// returning the best objective seen.
pub fn subgradient_lasso(a: &Dense, y: &[f64], lambda: f64, steps: usize, c: f64) -> f64 {
    let mut x = vec![0.0; a.cols];
    let mut best = lasso_objective(a, &x, y, lambda);
    for t in 0..steps {
        let r: Vec<f64> = a.matvec(&x).iter().zip(y).map(|(p, q)| p - q).collect();
        let g = a.tmatvec(&r);
        let step = c / ((t + 1) as f64).sqrt();
        for (xi, gi) in x.iter_mut().zip(&g) {
            let sub = if *xi > 0.0 {
                lambda
            } else if *xi < 0.0 {
                -lambda
            } else {
                // minimum-norm element of λ·[−1, 1] against the smooth part
                -gi.clamp(-lambda, lambda)
            };
            *xi -= step * (gi + sub);
        }
        best = best.min(lasso_objective(a, &x, y, lambda));
    }
    best
}

/// Plain gradient descent `x ← x − t·Aᵀ(Ax − y)` from zero; returns
/// `½‖Ax − y‖²` after each step.
pub fn gradient_descent_trace(a: &Dense, y: &[f64], step: f64, iters: usize) -> Vec<f64> {
    let mut x = vec![0.0; a.cols];
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let r: Vec<f64> = a.matvec(&x).iter().zip(y).map(|(p, q)| p - q).collect();
        let g = a.tmatvec(&r);
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= step * gi;
        }
        let r = a.matvec(&x);
        out.push(0.5 * r.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>());
    }
    out
}
