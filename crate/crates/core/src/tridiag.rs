//! Thomas algorithm for tridiagonal systems, factored once and reused.

use crate::error::{GlhfError, Result};

/// Rows `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`;
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TridiagonalFactor {
    lower: Vec<f64>,
    upper_scaled: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl Tridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Factors the matrix. With `require_dominance` every row must be weakly
    /// diagonally dominant with a strictly dominant row somewhere, which is
    /// what the backward-Euler heat matrices guarantee.
    pub fn factor(&self, require_dominance: bool) -> Result<TridiagonalFactor> {
        let n = self.len();
        if n == 0 || self.lower.len() != n || self.upper.len() != n {
            return Err(GlhfError::Tridiagonal {
                row: 0,
                reason: "band lengths disagree or system is empty".into(),
            });
        }
        if require_dominance {
            let mut strict = false;
            for i in 0..n {
                let off = if i > 0 { self.lower[i].abs() } else { 0.0 }
                    + if i + 1 < n { self.upper[i].abs() } else { 0.0 };
                let d = self.diag[i].abs();
                if d < off {
                    return Err(GlhfError::Tridiagonal {
                        row: i,
                        reason: format!("row not diagonally dominant: |{d}| < {off}"),
                    });
                }
                strict |= d > off;
            }
            if !strict {
                return Err(GlhfError::Tridiagonal {
                    row: 0,
                    reason: "no strictly dominant row".into(),
                });
            }
        }
        let mut upper_scaled = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev_upper = 0.0;
        for i in 0..n {
            let lower = if i > 0 { self.lower[i] } else { 0.0 };
            let pivot = self.diag[i] - lower * prev_upper;
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(GlhfError::Tridiagonal {
                    row: i,
                    reason: format!("pivot {pivot}"),
                });
            }
            inv_pivot[i] = 1.0 / pivot;
            let upper = if i + 1 < n { self.upper[i] } else { 0.0 };
            upper_scaled[i] = upper * inv_pivot[i];
            prev_upper = upper_scaled[i];
        }
        let mut lower = self.lower.clone();
        lower[0] = 0.0;
        Ok(TridiagonalFactor {
            lower,
            upper_scaled,
            inv_pivot,
        })
    }
}

impl TridiagonalFactor {
    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        let mut prev = 0.0;
        for i in 0..n {
            let v = (rhs[i] - self.lower[i] * prev) * self.inv_pivot[i];
            rhs[i] = v;
            prev = v;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.upper_scaled[i] * rhs[i + 1];
        }
    }
}
