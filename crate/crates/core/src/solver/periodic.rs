use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::kernel::FractionalOrder;

/// 2D transforms and Laplacian symbol on an `n x n` periodic grid.
#[derive(Clone)]
pub(super) struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `-Δ` symbol per coefficient, `(2π/L)^2 (m^2 + p^2)`.
    lambda: Vec<f64>,
}

fn wavenumber(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

impl Spectral {
    pub(super) fn new(n: usize, length: f64) -> Self {
        let mut planner = FftPlanner::new();
        let scale = (2.0 * std::f64::consts::PI / length).powi(2);
        let lambda = (0..n * n)
            .map(|idx| {
                let (m, p) = (wavenumber(idx / n, n), wavenumber(idx % n, n));
                scale * (m * m + p * p)
            })
            .collect();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            lambda,
        }
    }

    fn transform(&self, buf: &mut [Complex<f64>], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        fft.process(buf);
        transpose(buf, n);
        fft.process(buf);
        transpose(buf, n);
    }

    pub(super) fn forward(&self, v: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        self.transform(&mut buf, &self.forward);
        buf
    }

    /// Real part of the normalized inverse transform.
    pub(super) fn inverse(&self, mut buf: Vec<Complex<f64>>) -> Vec<f64> {
        self.transform(&mut buf, &self.inverse);
        let norm = 1.0 / (self.n * self.n) as f64;
        buf.iter().map(|c| c.re * norm).collect()
    }

    pub(super) fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `(Δ v, λ_max |v|_∞)`; the second entry is the operator-norm bound of
    /// the spectral Laplacian, used as the residual scale.
    fn laplacian_from_hat(&self, v: &[f64], hat: &[Complex<f64>]) -> (Vec<f64>, Vec<f64>) {
        let lap = self.inverse(
            hat.iter()
                .zip(&self.lambda)
                .map(|(c, l)| -c * l)
                .collect(),
        );
        let lam_max = self.lambda.iter().copied().fold(0.0, f64::max);
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (lap, vec![lam_max * vmax; v.len()])
    }

    /// Solves `(diag + σλ) û = rhŝ - (α/2) λ û_prev` mode by mode.
    #[allow(clippy::type_complexity)]
    pub(super) fn solve_level(
        &self,
        diag: f64,
        order: &FractionalOrder,
        previous: &[f64],
        rhs: &[f64],
    ) -> (Vec<f64>, (Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>)) {
        let prev_hat = self.forward(previous);
        let rhs_hat = self.forward(rhs);
        let half = order.alpha / 2.0;
        let u_hat: Vec<Complex<f64>> = rhs_hat
            .iter()
            .zip(&prev_hat)
            .zip(&self.lambda)
            .map(|((r, p), &l)| (r - p * (half * l)) / (diag + order.sigma * l))
            .collect();
        let lap_old = self.laplacian_from_hat(previous, &prev_hat);
        let u = self.inverse(u_hat);
        let lap_new = self.laplacian_from_hat(&u, &self.forward(&u));
        (u, lap_new, lap_old)
    }

    /// `|v̂|` per coefficient.
    pub(super) fn magnitudes(&self, v: &[f64]) -> Vec<f64> {
        self.forward(v).iter().map(|c| c.norm()).collect()
    }
}

fn transpose(buf: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}
