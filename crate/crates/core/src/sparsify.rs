//! Sparsifying operators and sparsity diagnostics.
//!
//! Three regularizers act on a representation `Γ`:
//!
//! * an ℓ1 penalty `λ·‖Γ‖₁`, applied through its proximal map (soft threshold);
//! * a global ℓ0 budget, applied by keeping the `k` largest magnitudes;
//! * a per-needle ℓ0 budget (the tractable stand-in for an ℓ0,∞ bound), which
//!   keeps the `k` largest magnitudes inside every `1 × 1 × C` needle.
//!
//! Top-k selection is deterministic: magnitudes are compared first and ties go
//! to the lower linear index.

use std::cmp::Ordering;

use crate::error::{CscError, Result};
use crate::tensor::Tensor3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparsityRule {
    L1Penalty { lambda: f64 },
    L0Global { k: usize },
    L0InfNeedle { k: usize },
}

impl SparsityRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SparsityRule::L1Penalty { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => Err(
                CscError::domain(format!("l1 lambda must be finite and nonnegative, got {lambda}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn is_projection(&self) -> bool {
        !matches!(self, SparsityRule::L1Penalty { .. })
    }

    /// Project onto the budget set (ℓ0 rules) or soft-threshold by `threshold`
    /// (ℓ1 rule).
    pub fn apply(&self, gamma: &Tensor3, threshold: f64) -> Result<Tensor3> {
        match *self {
            SparsityRule::L1Penalty { .. } => soft_threshold(gamma, threshold),
            SparsityRule::L0Global { k } => Ok(project_l0_global(gamma, k)),
            SparsityRule::L0InfNeedle { k } => Ok(project_l0inf_needle(gamma, k)),
        }
    }

    /// Whether `gamma` meets the budget. The ℓ1 rule has no hard budget.
    pub fn is_satisfied_by(&self, gamma: &Tensor3) -> bool {
        match *self {
            SparsityRule::L1Penalty { .. } => true,
            SparsityRule::L0Global { k } => gamma.count_nonzero(0.0) <= k,
            SparsityRule::L0InfNeedle { k } => gamma
                .needles()
                .all(|n| n.iter().filter(|v| **v != 0.0).count() <= k),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SparsityRule::L1Penalty { .. } => "l1",
            SparsityRule::L0Global { .. } => "l0",
            SparsityRule::L0InfNeedle { .. } => "l0inf",
        }
    }
}

/// Descending magnitude, then ascending index. A strict total order, so
/// selection is independent of the algorithm used to find the top k.
fn rank(values: &[f32], a: usize, b: usize) -> Ordering {
    values[b]
        .abs()
        .partial_cmp(&values[a].abs())
        .unwrap_or(Ordering::Equal)
        .then(a.cmp(&b))
}

/// Zero all but the `k` largest-magnitude entries of `values`, in place.
fn keep_top_k(values: &mut [f32], k: usize, scratch: &mut Vec<usize>) {
    if k >= values.len() {
        return;
    }
    if k == 0 {
        values.fill(0.0);
        return;
    }
    scratch.clear();
    scratch.extend(0..values.len());
    scratch.select_nth_unstable_by(k - 1, |&a, &b| rank(values, a, b));
    for &i in &scratch[k..] {
        values[i] = 0.0;
    }
}

/// Keep the `k` largest-magnitude entries of the whole tensor.
pub fn project_l0_global(gamma: &Tensor3, k: usize) -> Tensor3 {
    let mut out = gamma.clone();
    keep_top_k(out.data_mut(), k, &mut Vec::new());
    out
}

/// Keep the `k` largest-magnitude entries of every needle.
pub fn project_l0inf_needle(gamma: &Tensor3, k: usize) -> Tensor3 {
    let mut out = gamma.clone();
    if k >= gamma.channels() {
        return out;
    }
    let c = gamma.channels();
    let mut scratch = Vec::with_capacity(c);
    for needle in out.data_mut().chunks_exact_mut(c) {
        keep_top_k(needle, k, &mut scratch);
    }
    out
}

/// `sign(γ)·max(|γ| − tau, 0)` elementwise.
pub fn soft_threshold(gamma: &Tensor3, tau: f64) -> Result<Tensor3> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(CscError::domain(format!(
            "threshold must be finite and nonnegative, got {tau}"
        )));
    }
    Ok(gamma.map(|v| {
        let shrunk = f64::from(v).abs() - tau;
        if shrunk > 0.0 {
            (shrunk as f32).copysign(v)
        } else {
            0.0
        }
    }))
}

/// `λ·Σ|γ|`.
pub fn l1_penalty(gamma: &Tensor3, lambda: f64) -> f64 {
    lambda * gamma.l1_norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub global_nnz_fraction: f64,
    /// Row-major `height × width` grid of per-needle nonzero fractions.
    pub needle_nnz_map: Vec<f64>,
    pub max_needle_nnz: usize,
}

impl SparsityReport {
    pub fn needle_fraction(&self, row: usize, col: usize) -> f64 {
        self.needle_nnz_map[row * self.width + col]
    }

    /// Header comment with global stats, then `row,col,nnz_fraction` lines.
    pub fn to_csv(&self) -> String {
        let mut s = format!(
            "# global_nnz_fraction={},max_needle_nnz={},height={},width={},channels={}\n",
            self.global_nnz_fraction, self.max_needle_nnz, self.height, self.width, self.channels
        );
        s.push_str("row,col,nnz_fraction\n");
        for r in 0..self.height {
            for c in 0..self.width {
                s.push_str(&format!("{r},{c},{}\n", self.needle_fraction(r, c)));
            }
        }
        s
    }

    /// Heat map with each needle's fraction scaled to `[0, 255]`.
    pub fn heat_map(&self) -> Tensor3 {
        let data = self
            .needle_nnz_map
            .iter()
            .map(|f| (f * 255.0) as f32)
            .collect();
        Tensor3::from_vec_unchecked(self.height, self.width, 1, data)
    }
}

/// Nonzero statistics of `gamma`; an entry counts iff `|γ| > zero_tol`.
pub fn sparsity_report(gamma: &Tensor3, zero_tol: f32) -> SparsityReport {
    let c = gamma.channels();
    let counts: Vec<usize> = gamma
        .needles()
        .map(|n| n.iter().filter(|v| v.abs() > zero_tol).count())
        .collect();
    let total: usize = counts.iter().sum();
    SparsityReport {
        height: gamma.height(),
        width: gamma.width(),
        channels: c,
        global_nnz_fraction: total as f64 / gamma.len() as f64,
        needle_nnz_map: counts.iter().map(|&n| n as f64 / c as f64).collect(),
        max_needle_nnz: counts.iter().copied().max().unwrap_or(0),
    }
}
