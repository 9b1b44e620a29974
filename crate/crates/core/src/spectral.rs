//! FFT plumbing for periodic convolutions on a [`Grid`].

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

/// Forward/inverse plans for one grid shape. Inverse transforms are not
/// normalized.
pub(crate) struct SpectralPlan {
    n0: usize,
    n1: usize,
    fwd0: Arc<dyn Fft<f64>>,
    inv0: Arc<dyn Fft<f64>>,
    fwd1: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SpectralPlan({}x{})", self.n0, self.n1)
    }
}

impl SpectralPlan {
    pub(crate) fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let n0 = grid.cells(0);
        let n1 = grid.cells(1);
        let fwd0 = planner.plan_fft_forward(n0);
        let inv0 = planner.plan_fft_inverse(n0);
        let fwd1 = (n1 > 1).then(|| (planner.plan_fft_forward(n1), planner.plan_fft_inverse(n1)));
        SpectralPlan {
            n0,
            n1,
            fwd0,
            inv0,
            fwd1,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.n0 * self.n1
    }

    pub(crate) fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    pub(crate) fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        debug_assert_eq!(data.len(), self.len());
        let axis0 = if forward { &self.fwd0 } else { &self.inv0 };
        match &self.fwd1 {
            None => axis0.process(data),
            Some((f1, i1)) => {
                let axis1 = if forward { f1 } else { i1 };
                let n1 = self.n1;
                data.par_chunks_mut(n1).for_each(|row| axis1.process(row));
                let n0 = self.n0;
                let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
                for i in 0..n0 {
                    for j in 0..n1 {
                        t[j * n0 + i] = data[i * n1 + j];
                    }
                }
                t.par_chunks_mut(n0).for_each(|col| axis0.process(col));
                for i in 0..n0 {
                    for j in 0..n1 {
                        data[i * n1 + j] = t[j * n0 + i];
                    }
                }
            }
        }
    }
}

/// Spectral representation of a kernel, ready to multiply.
#[derive(Debug)]
pub(crate) struct KernelSpectrum {
    pub(crate) plan: SpectralPlan,
    pub(crate) hat: Vec<Complex64>,
}

impl KernelSpectrum {
    pub(crate) fn new(grid: &Grid, weights: &[f64]) -> Self {
        let plan = SpectralPlan::new(grid);
        let mut hat: Vec<Complex64> = weights.iter().map(|&w| Complex64::new(w, 0.0)).collect();
        plan.forward(&mut hat);
        KernelSpectrum { plan, hat }
    }

    /// Convolves two real fields at once by packing them as `u + i v`.
    pub(crate) fn convolve_pair(&self, u: &[f64], v: Option<&[f64]>, out_u: &mut [f64], out_v: Option<&mut [f64]>) {
        let n = self.plan.len();
        let mut buf: Vec<Complex64> = match v {
            Some(v) => u.iter().zip(v).map(|(&a, &b)| Complex64::new(a, b)).collect(),
            None => u.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        };
        self.plan.forward(&mut buf);
        for (b, h) in buf.iter_mut().zip(&self.hat) {
            *b *= h;
        }
        self.plan.inverse(&mut buf);
        let scale = 1.0 / n as f64;
        for (o, b) in out_u.iter_mut().zip(&buf) {
            *o = b.re * scale;
        }
        if let Some(out_v) = out_v {
            for (o, b) in out_v.iter_mut().zip(&buf) {
                *o = b.im * scale;
            }
        }
    }
}
