//! Integration over the unit cube `[0,1]^d` of 1-periodic integrands.
//!
//! Two backends: the tensor-product rectangle rule, which converges
//! exponentially for the real-analytic periodic integrands of this crate,
//! and randomly shifted Sobol points with replicate error bars for higher
//! dimensions. Both reduce in a fixed order, so results do not depend on
//! the number of worker threads.

mod sobol;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{FqheError, Result};
use crate::sum::CompensatedSum;

pub use sobol::{Sobol, MAX_DIMS as SOBOL_MAX_DIMS};

/// Default cap on the number of grid evaluations per integral.
pub const DEFAULT_GRID_CAP: f64 = 1e8;

/// Points per work unit. Fixed so the reduction tree never depends on the
/// thread count.
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Grid,
    LowDiscrepancy,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Grid => "grid",
            Backend::LowDiscrepancy => "lowdiscrepancy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationResult {
    pub value: Complex64,
    /// `|Q_N - Q_{N/2}|` for the grid, standard error of the replicate mean
    /// for low-discrepancy sampling.
    pub error_estimate: f64,
    pub evaluations: u64,
    pub backend: Backend,
    /// False when the grid has an odd number of points per axis and no
    /// coarser nested rule is available.
    pub error_reliable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub points_per_axis: usize,
    pub dims: usize,
    pub cap: f64,
}

impl GridSpec {
    pub fn new(points_per_axis: usize, dims: usize) -> Result<Self> {
        Self::with_cap(points_per_axis, dims, DEFAULT_GRID_CAP)
    }

    pub fn with_cap(points_per_axis: usize, dims: usize, cap: f64) -> Result<Self> {
        if points_per_axis < 2 {
            return Err(FqheError::InvalidInput(format!("need at least 2 points per axis, got {points_per_axis}")));
        }
        if dims == 0 {
            return Err(FqheError::InvalidInput("grid needs at least one dimension".into()));
        }
        let spec = Self { points_per_axis, dims, cap };
        let points = spec.total_points_f64();
        if points > cap {
            return Err(FqheError::GridTooLarge { points, cap });
        }
        Ok(spec)
    }

    pub fn total_points_f64(&self) -> f64 {
        (self.points_per_axis as f64).powi(self.dims as i32)
    }

    pub fn total_points(&self) -> usize {
        self.points_per_axis.pow(self.dims as u32)
    }
}

/// How a driver should integrate: dimension is supplied by the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    Grid { points_per_axis: usize, cap: f64 },
    Qmc { samples: usize, seed: u64, replicates: usize },
}

impl Integrator {
    pub fn grid(points_per_axis: usize) -> Self {
        Integrator::Grid { points_per_axis, cap: DEFAULT_GRID_CAP }
    }

    pub fn qmc(samples: usize, seed: u64, replicates: usize) -> Self {
        Integrator::Qmc { samples, seed, replicates }
    }

    /// Integrate a vector-valued integrand of dimension `dims`.
    pub fn integrate_vec<F>(&self, integrand: F, dims: usize, n_out: usize) -> Result<Vec<IntegrationResult>>
    where
        F: Fn(&[f64], &mut [Complex64]) -> Result<()> + Sync,
    {
        match *self {
            Integrator::Grid { points_per_axis, cap } => {
                torus_quadrature_vec(integrand, n_out, GridSpec::with_cap(points_per_axis, dims, cap)?)
            }
            Integrator::Qmc { samples, seed, replicates } => {
                qmc_integrate_vec(integrand, dims, n_out, samples, seed, replicates)
            }
        }
    }

    pub fn integrate<F>(&self, integrand: F, dims: usize) -> Result<IntegrationResult>
    where
        F: Fn(&[f64]) -> Result<Complex64> + Sync,
    {
        Ok(self.integrate_vec(scalar_adapter(integrand), dims, 1)?[0])
    }
}

fn scalar_adapter<F>(f: F) -> impl Fn(&[f64], &mut [Complex64]) -> Result<()> + Sync
where
    F: Fn(&[f64]) -> Result<Complex64> + Sync,
{
    move |x, out| {
        out[0] = f(x)?;
        Ok(())
    }
}

/// Rectangle rule on the grid `x_j = j/N` in every axis.
pub fn torus_quadrature<F>(integrand: F, grid: GridSpec) -> Result<IntegrationResult>
where
    F: Fn(&[f64]) -> Result<Complex64> + Sync,
{
    Ok(torus_quadrature_vec(scalar_adapter(integrand), 1, grid)?[0])
}

/// Rectangle rule for `n_out` integrands sharing one evaluation sweep.
///
/// The error estimate compares with the nested rule on the even-index
/// subgrid (`N/2` points per axis), which costs no extra evaluations.
pub fn torus_quadrature_vec<F>(integrand: F, n_out: usize, grid: GridSpec) -> Result<Vec<IntegrationResult>>
where
    F: Fn(&[f64], &mut [Complex64]) -> Result<()> + Sync,
{
    let points = grid.total_points_f64();
    if points > grid.cap {
        return Err(FqheError::GridTooLarge { points, cap: grid.cap });
    }
    let n = grid.points_per_axis;
    let dims = grid.dims;
    let total = grid.total_points();
    let nested = n.is_multiple_of(2);
    let h = 1.0 / n as f64;
    let n_chunks = total.div_ceil(CHUNK);

    let partials: Vec<(Vec<CompensatedSum>, Vec<CompensatedSum>)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| -> Result<_> {
            let mut fine = vec![CompensatedSum::new(); n_out];
            let mut coarse = vec![CompensatedSum::new(); n_out];
            let mut idx = vec![0usize; dims];
            let mut x = vec![0.0; dims];
            let mut out = vec![Complex64::new(0.0, 0.0); n_out];
            let start = chunk * CHUNK;
            let end = (start + CHUNK).min(total);
            // Digits of `start`, last axis fastest.
            let mut rem = start;
            for d in (0..dims).rev() {
                idx[d] = rem % n;
                rem /= n;
            }
            for _ in start..end {
                for d in 0..dims {
                    x[d] = idx[d] as f64 * h;
                }
                integrand(&x, &mut out)?;
                let on_coarse = nested && idx.iter().all(|&i| i % 2 == 0);
                for (k, v) in out.iter().enumerate() {
                    fine[k].add(*v);
                    if on_coarse {
                        coarse[k].add(*v);
                    }
                }
                for d in (0..dims).rev() {
                    idx[d] += 1;
                    if idx[d] < n {
                        break;
                    }
                    idx[d] = 0;
                }
            }
            Ok((fine, coarse))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut fine = vec![CompensatedSum::new(); n_out];
    let mut coarse = vec![CompensatedSum::new(); n_out];
    for (f, c) in &partials {
        for k in 0..n_out {
            fine[k].merge(&f[k]);
            coarse[k].merge(&c[k]);
        }
    }
    let coarse_points = (n / 2).pow(dims as u32).max(1) as f64;
    Ok((0..n_out)
        .map(|k| {
            let value = fine[k].value() / total as f64;
            let error_estimate = if nested {
                (value - coarse[k].value() / coarse_points).norm()
            } else {
                0.0
            };
            IntegrationResult {
                value,
                error_estimate,
                evaluations: total as u64,
                backend: Backend::Grid,
                error_reliable: nested,
            }
        })
        .collect())
}

/// Randomly shifted Sobol rule: `replicates` independent digital shifts of
/// the first `samples` points each.
pub fn qmc_integrate<F>(integrand: F, dims: usize, samples: usize, seed: u64, replicates: usize) -> Result<IntegrationResult>
where
    F: Fn(&[f64]) -> Result<Complex64> + Sync,
{
    Ok(qmc_integrate_vec(scalar_adapter(integrand), dims, 1, samples, seed, replicates)?[0])
}

pub fn qmc_integrate_vec<F>(
    integrand: F,
    dims: usize,
    n_out: usize,
    samples: usize,
    seed: u64,
    replicates: usize,
) -> Result<Vec<IntegrationResult>>
where
    F: Fn(&[f64], &mut [Complex64]) -> Result<()> + Sync,
{
    if samples < 2 || replicates < 2 {
        return Err(FqheError::InvalidInput(format!(
            "low-discrepancy integration needs samples ≥ 2 and replicates ≥ 2, got {samples} and {replicates}"
        )));
    }
    let sobol = Sobol::new(dims).ok_or_else(|| {
        FqheError::InvalidInput(format!("low-discrepancy backend supports 1..={} dimensions, got {dims}", SOBOL_MAX_DIMS))
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shifts: Vec<Vec<u32>> = (0..replicates).map(|_| (0..dims).map(|_| rng.random::<u32>()).collect()).collect();

    let n_chunks = samples.div_ceil(CHUNK);
    let mut means = vec![vec![Complex64::new(0.0, 0.0); n_out]; replicates];
    for (shift, mean) in shifts.iter().zip(means.iter_mut()) {
        let partials: Vec<Vec<CompensatedSum>> = (0..n_chunks)
            .into_par_iter()
            .map(|chunk| -> Result<_> {
                let mut acc = vec![CompensatedSum::new(); n_out];
                let mut bits = vec![0u32; dims];
                let mut x = vec![0.0; dims];
                let mut out = vec![Complex64::new(0.0, 0.0); n_out];
                let start = chunk * CHUNK;
                let end = (start + CHUNK).min(samples);
                for i in start..end {
                    sobol.point(i as u64, shift, &mut bits, &mut x);
                    integrand(&x, &mut out)?;
                    for (a, v) in acc.iter_mut().zip(&out) {
                        a.add(*v);
                    }
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = vec![CompensatedSum::new(); n_out];
        for p in &partials {
            for k in 0..n_out {
                total[k].merge(&p[k]);
            }
        }
        for k in 0..n_out {
            mean[k] = total[k].value() / samples as f64;
        }
    }

    let r = replicates as f64;
    Ok((0..n_out)
        .map(|k| {
            let mut acc = CompensatedSum::new();
            for m in &means {
                acc.add(m[k]);
            }
            let value = acc.value() / r;
            let (mut s_re, mut s_im) = (0.0, 0.0);
            for m in &means {
                let d = m[k] - value;
                s_re += d.re * d.re;
                s_im += d.im * d.im;
            }
            let var = (s_re + s_im) / (r - 1.0);
            IntegrationResult {
                value,
                error_estimate: (var / r).sqrt(),
                evaluations: (samples * replicates) as u64,
                backend: Backend::LowDiscrepancy,
                error_reliable: true,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_on_grid() {
        let r = torus_quadrature(|_| Ok(c(1.0, 0.0)), GridSpec::new(7, 3).unwrap()).unwrap();
        assert!((r.value - 1.0).norm() < 1e-15);
        assert_eq!(r.error_estimate, 0.0);
        assert!(!r.error_reliable);
        assert_eq!(r.evaluations, 343);
        let r = torus_quadrature(|_| Ok(c(1.0, 0.0)), GridSpec::new(8, 2).unwrap()).unwrap();
        assert_eq!(r.value, c(1.0, 0.0));
        assert_eq!(r.error_estimate, 0.0);
        assert!(r.error_reliable);
    }

    #[test]
    fn pure_fourier_mode_integrates_to_zero() {
        let r = torus_quadrature(|x| Ok((2.0 * PI * x[0] * Complex64::i()).exp()), GridSpec::new(16, 1).unwrap()).unwrap();
        assert!(r.value.norm() < 1e-15, "{}", r.value);
    }

    #[test]
    fn periodic_analytic_integrand_converges_fast() {
        // ∫ exp(cos 2πx) dx = I₀(1)
        let f = |x: &[f64]| Ok(c((2.0 * PI * x[0]).cos().exp(), 0.0));
        let i0 = 1.266_065_877_752_008_4;
        let r = torus_quadrature(f, GridSpec::new(16, 1).unwrap()).unwrap();
        assert!((r.value.re - i0).abs() < 1e-14);
        assert!(r.error_estimate > (r.value.re - i0).abs());
    }

    #[test]
    fn oversized_grid_is_rejected() {
        assert!(matches!(GridSpec::new(1000, 3), Err(FqheError::GridTooLarge { .. })));
        assert!(GridSpec::new(1, 3).is_err());
        assert!(GridSpec::with_cap(1000, 3, 1e9).is_ok());
    }

    #[test]
    fn vector_integrand_shares_sweep() {
        let f = |x: &[f64], out: &mut [Complex64]| {
            out[0] = c(1.0, 0.0);
            out[1] = c(x[0] * 0.0 + (2.0 * PI * x[1]).sin().powi(2), 0.0);
            Ok(())
        };
        let r = torus_quadrature_vec(f, 2, GridSpec::new(8, 2).unwrap()).unwrap();
        assert!((r[0].value - 1.0).norm() < 1e-15);
        assert!((r[1].value - 0.5).norm() < 1e-15);
    }

    #[test]
    fn grid_errors_propagate() {
        let f = |x: &[f64]| {
            if x[0] > 0.5 {
                Err(FqheError::Overflow)
            } else {
                Ok(c(0.0, 0.0))
            }
        };
        assert_eq!(torus_quadrature(f, GridSpec::new(4, 2).unwrap()), Err(FqheError::Overflow));
    }

    #[test]
    fn grid_result_independent_of_thread_count() {
        let f = |x: &[f64]| Ok(c((x[0] * 3.1 + x[1] * 1.7 + x[2]).sin(), x[2].cos()));
        let grid = GridSpec::new(40, 3).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| torus_quadrature(f, grid)).unwrap();
        let b = three.install(|| torus_quadrature(f, grid)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn qmc_constant() {
        let r = qmc_integrate(|_| Ok(c(0.3, -2.0)), 5, 1000, 9, 4).unwrap();
        assert_eq!(r.value, c(0.3, -2.0));
        assert_eq!(r.error_estimate, 0.0);
        assert_eq!(r.evaluations, 4000);
    }

    #[test]
    fn qmc_separable_exponential() {
        let f = |x: &[f64]| Ok(c(x.iter().map(|v| (-v).exp()).product(), 0.0));
        let exact = (1.0 - (-1.0f64).exp()).powi(4);
        let r = qmc_integrate(f, 4, 1 << 12, 42, 8).unwrap();
        assert!((r.value.re - exact).abs() <= 3.0 * r.error_estimate, "{} vs {exact} ± {}", r.value.re, r.error_estimate);
        assert!(r.error_estimate < 1e-4);
    }

    #[test]
    fn qmc_is_deterministic() {
        let f = |x: &[f64]| Ok(c(x[0] * x[1], x[2]));
        let a = qmc_integrate(f, 3, 777, 5, 3).unwrap();
        let b = qmc_integrate(f, 3, 777, 5, 3).unwrap();
        assert_eq!(a, b);
        let other = qmc_integrate(f, 3, 777, 6, 3).unwrap();
        assert_ne!(a.value, other.value);
    }

    #[test]
    fn qmc_error_bars_are_honest() {
        let f = |x: &[f64]| Ok(c((x[0] * 5.0).sin() * (x[1] + x[2]).exp(), x[1] * x[1]));
        let exact = c((1.0 - 5f64.cos()) / 5.0 * (std::f64::consts::E - 1.0).powi(2), 1.0 / 3.0);
        let mut hits = 0;
        for seed in 0..100 {
            let r = qmc_integrate(f, 3, 256, seed, 8).unwrap();
            if (r.value - exact).norm() <= 4.0 * r.error_estimate {
                hits += 1;
            }
        }
        assert!(hits >= 95, "{hits}/100");
    }

    #[test]
    fn qmc_rejects_bad_parameters() {
        let f = |_: &[f64]| Ok(c(1.0, 0.0));
        assert!(qmc_integrate(f, 2, 1, 0, 4).is_err());
        assert!(qmc_integrate(f, 2, 100, 0, 1).is_err());
        assert!(qmc_integrate(f, 17, 100, 0, 4).is_err());
    }
}
