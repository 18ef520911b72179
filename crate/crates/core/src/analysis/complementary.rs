use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelTable;

/// Lower-triangular `P` with `sum_{l=j}^k [P]_{k,l} [M]_{l,j} = 1` for `j <= k`.
#[derive(Debug, Clone, Serialize)]
pub struct ComplementaryKernel {
    /// Row `k - 1` holds `[P]_{k,1..=k}`.
    pub p: Vec<Vec<f64>>,
    /// `max |sum_l [P]_{k,l} [M]_{l,j} - 1|`.
    pub residual: f64,
    /// Smallest entry of `P`.
    pub min_entry: f64,
}

impl ComplementaryKernel {
    /// `[P]_{k,l}`, one-based, zero above the diagonal.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        if l > k {
            0.0
        } else {
            self.p[k - 1][l - 1]
        }
    }

    pub fn size(&self) -> usize {
        self.p.len()
    }
}

/// Solves `P M = E_L` row by row, from the diagonal towards column 1.
pub fn build_complementary_kernel(table: &KernelTable) -> Result<ComplementaryKernel> {
    let n = table.levels();
    for l in 1..=n {
        let value = table.m(l, l);
        if !(value > 0.0) {
            return Err(Error::SingularDiagonal { index: l, value });
        }
    }

    let mut p = Vec::with_capacity(n);
    for k in 1..=n {
        let mut row = vec![0.0; k];
        row[k - 1] = 1.0 / table.m(k, k);
        for j in (1..k).rev() {
            let s: f64 = (j + 1..=k).map(|l| row[l - 1] * table.m(l, j)).sum();
            row[j - 1] = (1.0 - s) / table.m(j, j);
        }
        p.push(row);
    }

    let mut residual: f64 = 0.0;
    let mut min_entry = f64::INFINITY;
    for (k, row) in (1..=n).zip(&p) {
        for j in 1..=k {
            let s: f64 = (j..=k).map(|l| row[l - 1] * table.m(l, j)).sum();
            residual = residual.max((s - 1.0).abs());
        }
        min_entry = row.iter().copied().fold(min_entry, f64::min);
    }
    Ok(ComplementaryKernel {
        p,
        residual,
        min_entry,
    })
}
