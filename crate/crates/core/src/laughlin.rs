//! One-layer many-body states on the torus: Haldane–Rezayi functions, the
//! Slater determinant of the one-particle basis and its theta-product form,
//! and their inner products.
//!
//! Wave-function evaluators take a relative accuracy `rel_tol`: the tail of
//! every theta series is bounded by `rel_tol` times the peak of its Gaussian
//! envelope. The hermitian metric cancels that envelope, so this is the
//! accuracy that matters inside inner products.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FqheError, Result};
use crate::geometry::{LineBundleSpec, SectionBasis};
use crate::integration::{GridSpec, IntegrationResult, Integrator, torus_quadrature_vec};
use crate::gram::GramMatrix;
use crate::sum::CompensatedSum;
use crate::theta::{theta1d_rel, theta_odd_rel, Characteristics1D, TorusParams};

pub const DEFAULT_REL_TOL: f64 = 1e-14;

/// Laughlin-type model with filling parameter `m` and `n` particles on the
/// torus, with solenoid parameter `ξ = aτ + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneLayerModel {
    pub m: usize,
    pub n: usize,
    pub torus: TorusParams,
    /// Per-particle bundle: degree `mn`, sharp iff `epsilon = -1`.
    pub spec: LineBundleSpec,
    pub epsilon: i8,
}

impl OneLayerModel {
    pub fn new(m: usize, n: usize, torus: TorusParams, a: f64, b: f64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(FqheError::InvalidInput(format!("m and n must be positive, got m = {m}, n = {n}")));
        }
        let epsilon = if (m * (n - 1)).is_multiple_of(2) { 1 } else { -1 };
        let k = (m * n) as i64;
        let spec = if epsilon == 1 {
            LineBundleSpec::new(k, a, b)
        } else {
            LineBundleSpec::sharp(k, a, b)
        };
        Ok(Self { m, n, torus, spec, epsilon })
    }

    pub fn with_xi(&self, a: f64, b: f64) -> Self {
        Self::new(self.m, self.n, self.torus, a, b).expect("parameters already validated")
    }

    pub fn xi(&self) -> Complex64 {
        self.spec.xi(&self.torus)
    }

    /// `ĥ = ∏_p h_{mn,ξ}(y_p)`.
    pub fn metric(&self, p: &ManyBodyPoint) -> f64 {
        many_body_metric((self.m * self.n) as f64, self.spec.a, self.torus.t(), &p.y)
    }
}

fn many_body_metric(k: f64, a: f64, t: f64, ys: &[f64]) -> f64 {
    let (s1, s2) = ys.iter().fold((0.0, 0.0), |(s1, s2), y| (s1 + y, s2 + y * y));
    (-2.0 * PI * k * t * s2 - 4.0 * PI * a * t * s1).exp()
}

/// Coordinates of `n` particles: `z_p = x_p + τ y_p`, with `w = Σ z_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyPoint {
    pub z: Vec<Complex64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Complex64,
}

impl ManyBodyPoint {
    pub fn from_xy(x: &[f64], y: &[f64], torus: &TorusParams) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(FqheError::InvalidInput("need equally many, and at least one, x and y coordinates".into()));
        }
        let tau = torus.tau();
        let z: Vec<Complex64> = x.iter().zip(y).map(|(&x, &y)| x + tau * y).collect();
        let w = z.iter().sum();
        Ok(Self { z, x: x.to_vec(), y: y.to_vec(), w })
    }

    pub fn from_z(z: &[Complex64], torus: &TorusParams) -> Result<Self> {
        if z.is_empty() {
            return Err(FqheError::InvalidInput("need at least one particle".into()));
        }
        let tau = torus.tau();
        let (x, y): (Vec<f64>, Vec<f64>) = z.iter().map(|&z| crate::geometry::to_lattice_coords(z, tau)).unzip();
        Ok(Self { z: z.to_vec(), x, y, w: z.iter().sum() })
    }

    /// From the integration layout `(x_1, y_1, …, x_n, y_n)`.
    pub fn from_interleaved(v: &[f64], torus: &TorusParams) -> Result<Self> {
        let x: Vec<f64> = v.iter().step_by(2).copied().collect();
        let y: Vec<f64> = v.iter().skip(1).step_by(2).copied().collect();
        Self::from_xy(&x, &y, torus)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

fn check_particles(expected: usize, p: &ManyBodyPoint) -> Result<()> {
    if p.len() != expected {
        return Err(FqheError::InvalidInput(format!("expected {expected} particles, got {}", p.len())));
    }
    Ok(())
}

/// `∏_{p<q} ϑ(z_p - z_q)^power`.
pub fn jastrow(p: &ManyBodyPoint, tau: Complex64, power: u32, rel_tol: f64) -> Result<Complex64> {
    let mut prod = Complex64::new(1.0, 0.0);
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            prod *= theta_odd_rel(p.z[i] - p.z[j], tau, rel_tol)?.powu(power);
        }
    }
    Ok(prod)
}

/// `Φ_j = θ[(j-1)/m, 0](mw + ξ | mτ) · ∏_{p<q} ϑ(z_p - z_q)^m`, `1 ≤ j ≤ m`.
pub fn hr_wavefunction(model: &OneLayerModel, j: usize, p: &ManyBodyPoint, rel_tol: f64) -> Result<Complex64> {
    if j == 0 || j > model.m {
        return Err(FqheError::InvalidInput(format!("state index {j} outside 1..={}", model.m)));
    }
    check_particles(model.n, p)?;
    Ok(hr_center(model, j, p, rel_tol)? * jastrow(p, model.torus.tau(), model.m as u32, rel_tol)?)
}

fn hr_center(model: &OneLayerModel, j: usize, p: &ManyBodyPoint, rel_tol: f64) -> Result<Complex64> {
    let m = model.m as f64;
    let ch = Characteristics1D::new((j - 1) as f64 / m, 0.0);
    theta1d_rel(ch, m * p.w + model.xi(), m * model.torus.tau(), rel_tol)
}

/// All `m` Haldane–Rezayi functions at one point, sharing the Jastrow factor.
pub fn hr_wavefunctions(model: &OneLayerModel, p: &ManyBodyPoint, rel_tol: f64, out: &mut [Complex64]) -> Result<()> {
    check_particles(model.n, p)?;
    let jas = jastrow(p, model.torus.tau(), model.m as u32, rel_tol)?;
    for (j, slot) in out.iter_mut().enumerate().take(model.m) {
        *slot = hr_center(model, j + 1, p, rel_tol)? * jas;
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `det[s_i(z_j)] / √(n!)` with `s_i` the basis of `L_{n,ξ}`.
///
/// `spec.k` must equal the particle count.
pub fn slater_wavefunction(spec: &LineBundleSpec, torus: &TorusParams, p: &ManyBodyPoint, rel_tol: f64) -> Result<Complex64> {
    let n = p.len();
    if spec.k != n as i64 {
        return Err(FqheError::InvalidInput(format!("Slater function needs degree k = n = {n}, got k = {}", spec.k)));
    }
    let basis = SectionBasis::new(*spec, *torus, rel_tol)?;
    let mut mat = DMatrix::<Complex64>::zeros(n, n);
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for (jcol, &z) in p.z.iter().enumerate() {
        basis.eval_all(z, &mut col)?;
        for (i, v) in col.iter().enumerate() {
            mat[(i, jcol)] = *v;
        }
    }
    Ok(mat.lu().determinant() / factorial(n).sqrt())
}

/// `θ[(n-1)/2, (n-1)/2](w + ξ | τ) · ∏_{p<q} ϑ(z_p - z_q)`.
pub fn fay_wavefunction(spec: &LineBundleSpec, torus: &TorusParams, p: &ManyBodyPoint, rel_tol: f64) -> Result<Complex64> {
    let n = p.len();
    let half = (n as f64 - 1.0) / 2.0;
    let head = theta1d_rel(Characteristics1D::new(half, half), p.w + spec.xi(torus), torus.tau(), rel_tol)?;
    Ok(head * jastrow(p, torus.tau(), 1, rel_tol)?)
}

/// Estimated proportionality constant `μ = Φ / Φ̃` between the Slater and
/// theta-product functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuEstimate {
    pub mu: Complex64,
    /// Largest `|Φ/Φ̃ - μ|` over admitted points.
    pub dispersion: f64,
    pub admitted: usize,
    pub sampled: usize,
}

impl MuEstimate {
    pub fn relative_dispersion(&self) -> f64 {
        self.dispersion / self.mu.norm()
    }
}

/// Sample `samples` uniform points of `[0,1]^{2n}`, drop those where `|Φ̃|`
/// is below `exclusion` times the geometric mean of `|Φ̃|` over the batch,
/// and average `Φ/Φ̃` over the rest.
pub fn estimate_mu(
    n: usize,
    spec: &LineBundleSpec,
    torus: &TorusParams,
    samples: usize,
    seed: u64,
    exclusion: f64,
    rel_tol: f64,
) -> Result<MuEstimate> {
    const MIN_ADMITTED: usize = 10;
    if samples < MIN_ADMITTED {
        return Err(FqheError::InvalidInput(format!("need at least {MIN_ADMITTED} samples, got {samples}")));
    }
    if n == 0 || spec.k != n as i64 {
        return Err(FqheError::InvalidInput(format!("need degree k = n ≥ 1, got k = {}, n = {n}", spec.k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..samples {
        let v: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
        let p = ManyBodyPoint::from_interleaved(&v, torus)?;
        pairs.push((slater_wavefunction(spec, torus, &p, rel_tol)?, fay_wavefunction(spec, torus, &p, rel_tol)?));
    }
    let log_mean = pairs.iter().map(|(_, f)| f.norm().max(f64::MIN_POSITIVE).ln()).sum::<f64>() / samples as f64;
    let floor = exclusion * log_mean.exp();
    let ratios: Vec<Complex64> = pairs.iter().filter(|(_, f)| f.norm() > floor).map(|(s, f)| s / f).collect();
    if ratios.len() < MIN_ADMITTED {
        return Err(FqheError::DegenerateSampling { survivors: ratios.len(), needed: MIN_ADMITTED });
    }
    let mut acc = CompensatedSum::new();
    for r in &ratios {
        acc.add(*r);
    }
    let mu = acc.value() / ratios.len() as f64;
    let dispersion = ratios.iter().map(|r| (r - mu).norm()).fold(0.0, f64::max);
    Ok(MuEstimate { mu, dispersion, admitted: ratios.len(), sampled: samples })
}

/// `√(1/2kt) · e^{2πta²/k}`, the common value of `⟨s_p, s_p⟩`.
pub fn one_particle_norm_sq_closed(k: i64, t: f64, a: f64) -> f64 {
    let k = k as f64;
    (1.0 / (2.0 * k * t)).sqrt() * (2.0 * PI * t * a * a / k).exp()
}

/// `∥Φ∥ = (1/2nt)^{n/4} e^{πta²}` for the Slater function.
pub fn slater_norm_closed(n: usize, t: f64, a: f64) -> f64 {
    (1.0 / (2.0 * n as f64 * t)).powf(n as f64 / 4.0) * (PI * t * a * a).exp()
}

/// Gram matrix `⟨s_p, s_q⟩` of the one-particle basis by quadrature over
/// the unit square in `(x, y)`.
pub fn one_particle_gram(spec: &LineBundleSpec, torus: &TorusParams, grid: GridSpec, rel_tol: f64) -> Result<GramMatrix> {
    if grid.dims != 2 {
        return Err(FqheError::InvalidInput(format!("one-particle Gram needs a 2-dimensional grid, got {}", grid.dims)));
    }
    let basis = SectionBasis::new(*spec, *torus, rel_tol)?;
    let k = basis.len();
    let tau = torus.tau();
    let t = torus.t();
    let integrand = |v: &[f64], out: &mut [Complex64]| {
        let mut s = vec![Complex64::new(0.0, 0.0); k];
        basis.eval_all(v[0] + tau * v[1], &mut s)?;
        let h = crate::geometry::metric_h(spec, v[1], t);
        fill_outer(&s, h, out);
        Ok(())
    };
    let results = torus_quadrature_vec(integrand, k * k, grid)?;
    Ok(GramMatrix::from_results(k, &results))
}

/// `out[p·k + q] = h · f_p · conj(f_q)`.
pub(crate) fn fill_outer(f: &[Complex64], h: f64, out: &mut [Complex64]) {
    let k = f.len();
    for p in 0..k {
        for q in 0..k {
            out[p * k + q] = f[p] * f[q].conj() * h;
        }
    }
}

/// Which one-layer state to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneLayerState {
    /// `Φ_j`, `1 ≤ j ≤ m`.
    HaldaneRezayi(usize),
    /// Slater determinant (requires `m = 1`).
    Slater,
    /// Theta-product form of the Slater function (requires `m = 1`).
    Fay,
}

fn eval_state(model: &OneLayerModel, state: OneLayerState, p: &ManyBodyPoint, rel_tol: f64) -> Result<Complex64> {
    match state {
        OneLayerState::HaldaneRezayi(j) => hr_wavefunction(model, j, p, rel_tol),
        OneLayerState::Slater | OneLayerState::Fay => {
            if model.m != 1 {
                return Err(FqheError::InvalidInput("Slater and Fay functions need m = 1".into()));
            }
            let spec = LineBundleSpec::new(model.n as i64, model.spec.a, model.spec.b);
            if state == OneLayerState::Slater {
                slater_wavefunction(&spec, &model.torus, p, rel_tol)
            } else {
                fay_wavefunction(&spec, &model.torus, p, rel_tol)
            }
        }
    }
}

/// `⟨Ψ₁, Ψ₂⟩ = ∫_{[0,1]^{2n}} ĥ Ψ₁ conj(Ψ₂)`.
pub fn manybody_inner(
    model: &OneLayerModel,
    left: OneLayerState,
    right: OneLayerState,
    integrator: &Integrator,
    rel_tol: f64,
) -> Result<IntegrationResult> {
    let integrand = |v: &[f64]| -> Result<Complex64> {
        let p = ManyBodyPoint::from_interleaved(v, &model.torus)?;
        let l = eval_state(model, left, &p, rel_tol)?;
        let r = if right == left { l } else { eval_state(model, right, &p, rel_tol)? };
        Ok(l * r.conj() * model.metric(&p))
    };
    integrator.integrate(integrand, 2 * model.n)
}

/// Full `m × m` Gram matrix of the Haldane–Rezayi functions from one sweep.
pub fn hr_gram(model: &OneLayerModel, integrator: &Integrator, rel_tol: f64) -> Result<GramMatrix> {
    let m = model.m;
    let integrand = |v: &[f64], out: &mut [Complex64]| {
        let p = ManyBodyPoint::from_interleaved(v, &model.torus)?;
        let mut f = vec![Complex64::new(0.0, 0.0); m];
        hr_wavefunctions(model, &p, rel_tol, &mut f)?;
        fill_outer(&f, model.metric(&p), out);
        Ok(())
    };
    let results = integrator.integrate_vec(integrand, 2 * model.n, m * m)?;
    Ok(GramMatrix::from_results(m, &results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::quasi_periodicity_defect;
    use crate::theta::{theta1d, Tolerance};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_point(n: usize, torus: &TorusParams, rng: &mut ChaCha8Rng) -> ManyBodyPoint {
        let v: Vec<f64> = (0..2 * n).map(|_| rng.random::<f64>()).collect();
        ManyBodyPoint::from_interleaved(&v, torus).unwrap()
    }

    /// Plain series over |k| ≤ 25, independent of the kernel.
    fn theta_oracle(a: f64, b: f64, z: Complex64, tau: Complex64) -> Complex64 {
        (-25..=25)
            .map(|k| {
                let v = k as f64 + a;
                (Complex64::i() * PI * tau * v * v + 2.0 * Complex64::i() * PI * v * (z + b)).exp()
            })
            .sum()
    }

    #[test]
    fn epsilon_table() {
        let torus = TorusParams::square();
        for (m, n, e) in [(1, 1, 1), (1, 2, -1), (1, 3, 1), (2, 2, 1), (3, 2, -1), (3, 3, 1), (2, 5, 1)] {
            let model = OneLayerModel::new(m, n, torus, 0.0, 0.0).unwrap();
            assert_eq!(model.epsilon, e, "m={m} n={n}");
            assert_eq!(model.spec.sharp, e == -1);
            assert_eq!(model.spec.k, (m * n) as i64);
        }
        assert!(OneLayerModel::new(0, 2, torus, 0.0, 0.0).is_err());
    }

    #[test]
    fn point_bookkeeping() {
        let torus = TorusParams::new(c(0.3, 0.8)).unwrap();
        let p = ManyBodyPoint::from_xy(&[0.1, 0.7], &[0.5, 0.2], &torus).unwrap();
        assert!((p.w - (p.z[0] + p.z[1])).norm() < 1e-15);
        let q = ManyBodyPoint::from_z(&p.z, &torus).unwrap();
        for i in 0..2 {
            assert!((q.x[i] - p.x[i]).abs() < 1e-14 && (q.y[i] - p.y[i]).abs() < 1e-14);
        }
        let r = ManyBodyPoint::from_interleaved(&[0.1, 0.5, 0.7, 0.2], &torus).unwrap();
        assert_eq!(r, p);
    }

    #[test]
    fn hr_matches_term_by_term_oracle() {
        let torus = TorusParams::square();
        let model = OneLayerModel::new(1, 2, torus, 0.0, 0.0).unwrap();
        let z = [c(0.2, 0.1), c(0.6, 0.4)];
        let p = ManyBodyPoint::from_z(&z, &torus).unwrap();
        let got = hr_wavefunction(&model, 1, &p, DEFAULT_REL_TOL).unwrap();
        let expect = theta_oracle(0.0, 0.0, z[0] + z[1], c(0.0, 1.0)) * theta_oracle(0.5, 0.5, z[0] - z[1], c(0.0, 1.0));
        assert!((got - expect).norm() < 1e-10, "{got} vs {expect}");
    }

    #[test]
    fn hr_vanishes_on_diagonals() {
        let torus = TorusParams::new(c(0.1, 1.2)).unwrap();
        let model = OneLayerModel::new(2, 3, torus, 0.3, 0.1).unwrap();
        let p = ManyBodyPoint::from_z(&[c(0.2, 0.3), c(0.7, 0.1), c(0.2, 0.3)], &torus).unwrap();
        for j in 1..=2 {
            assert!(hr_wavefunction(&model, j, &p, DEFAULT_REL_TOL).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn hr_exchange_symmetry_follows_parity_of_m() {
        let torus = TorusParams::new(c(0.2, 0.9)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for m in [2usize, 3] {
            let model = OneLayerModel::new(m, 2, torus, 0.1, 0.4).unwrap();
            let p = random_point(2, &torus, &mut rng);
            let swapped = ManyBodyPoint::from_z(&[p.z[1], p.z[0]], &torus).unwrap();
            let a = hr_wavefunction(&model, 1, &p, DEFAULT_REL_TOL).unwrap();
            let b = hr_wavefunction(&model, 1, &swapped, DEFAULT_REL_TOL).unwrap();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            assert!((b - sign * a).norm() < 1e-10 * a.norm(), "m={m}");
        }
    }

    #[test]
    fn hr_vanishing_order_is_m() {
        let torus = TorusParams::new(c(0.15, 1.0)).unwrap();
        for m in [1usize, 2, 3] {
            let model = OneLayerModel::new(m, 3, torus, 0.2, 0.0).unwrap();
            let base = [c(0.3, 0.2), c(0.55, 0.7), c(0.9, 0.4)];
            let dir = c(0.6, 0.8);
            let at = |eps: f64| {
                let z = [base[0], base[0] + eps * dir, base[2]];
                let p = ManyBodyPoint::from_z(&z, &torus).unwrap();
                hr_wavefunction(&model, 1, &p, DEFAULT_REL_TOL).unwrap().norm()
            };
            let slope = (at(1e-2).ln() - at(1e-3).ln()) / (10f64).ln();
            assert!((slope - m as f64).abs() < 0.05, "m={m} slope={slope}");
        }
    }

    #[test]
    fn hr_automorphy_per_particle() {
        let torus = TorusParams::new(c(0.3, 0.8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (m, n) in [(2usize, 2usize), (1, 2), (3, 2), (1, 3)] {
            let model = OneLayerModel::new(m, n, torus, 0.25, 0.4).unwrap();
            let p = random_point(n, &torus, &mut rng);
            for k in 0..n {
                let f = |zk: Complex64| {
                    let mut z = p.z.clone();
                    z[k] = zk;
                    hr_wavefunction(&model, 1, &ManyBodyPoint::from_z(&z, &torus)?, DEFAULT_REL_TOL)
                };
                let d = quasi_periodicity_defect(f, &model.spec, &torus, 10, k as u64).unwrap();
                assert!(d < 1e-9, "m={m} n={n} k={k}: {d}");
            }
        }
    }

    #[test]
    fn slater_and_fay_basics() {
        let torus = TorusParams::square();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let spec3 = LineBundleSpec::new(3, 0.2, 0.3);
        let p = random_point(3, &torus, &mut rng);
        let coincide = ManyBodyPoint::from_z(&[p.z[0], p.z[0], p.z[2]], &torus).unwrap();
        let scale = slater_wavefunction(&spec3, &torus, &p, DEFAULT_REL_TOL).unwrap().norm();
        assert!(slater_wavefunction(&spec3, &torus, &coincide, DEFAULT_REL_TOL).unwrap().norm() < 1e-12 * scale.max(1.0));
        let fay_scale = fay_wavefunction(&spec3, &torus, &p, DEFAULT_REL_TOL).unwrap().norm();
        assert!(fay_wavefunction(&spec3, &torus, &coincide, DEFAULT_REL_TOL).unwrap().norm() < 1e-12 * fay_scale.max(1.0));
        let swapped = ManyBodyPoint::from_z(&[p.z[1], p.z[0], p.z[2]], &torus).unwrap();
        let a = slater_wavefunction(&spec3, &torus, &p, DEFAULT_REL_TOL).unwrap();
        let b = slater_wavefunction(&spec3, &torus, &swapped, DEFAULT_REL_TOL).unwrap();
        assert!((a + b).norm() < 1e-12 * a.norm());

        // n = 1: both reduce to θ[0,0](z + ξ | τ).
        let spec1 = LineBundleSpec::new(1, 0.1, 0.2);
        let one = ManyBodyPoint::from_z(&[c(0.4, 0.3)], &torus).unwrap();
        let s = slater_wavefunction(&spec1, &torus, &one, DEFAULT_REL_TOL).unwrap();
        let f = fay_wavefunction(&spec1, &torus, &one, DEFAULT_REL_TOL).unwrap();
        assert_eq!(s, f);
    }

    #[test]
    fn slater_two_by_two_oracle() {
        let torus = TorusParams::square();
        let spec = LineBundleSpec::new(2, 0.0, 0.0);
        let z = [c(0.31, 0.12), c(0.77, 0.58)];
        let p = ManyBodyPoint::from_z(&z, &torus).unwrap();
        let tau2 = c(0.0, 2.0);
        let s = |j: usize, z: Complex64| theta_oracle(j as f64 / 2.0, 0.0, 2.0 * z, tau2);
        let expect = (s(0, z[0]) * s(1, z[1]) - s(1, z[0]) * s(0, z[1])) / 2f64.sqrt();
        let got = slater_wavefunction(&spec, &torus, &p, DEFAULT_REL_TOL).unwrap();
        assert!((got - expect).norm() < 1e-10, "{got} vs {expect}");
    }

    #[test]
    fn fay_automorphy() {
        let torus = TorusParams::square();
        let spec = LineBundleSpec::new(2, 0.15, 0.35);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_point(2, &torus, &mut rng);
        let f = |z0: Complex64| fay_wavefunction(&spec, &torus, &ManyBodyPoint::from_z(&[z0, p.z[1]], &torus)?, DEFAULT_REL_TOL);
        assert!(quasi_periodicity_defect(f, &spec, &torus, 20, 3).unwrap() < 1e-9);
    }

    #[test]
    fn mu_is_constant() {
        let torus = TorusParams::square();
        let spec = LineBundleSpec::new(2, 0.0, 0.0);
        let est = estimate_mu(2, &spec, &torus, 100, 7, 1e-6, DEFAULT_REL_TOL).unwrap();
        assert!(est.relative_dispersion() < 1e-8, "{est:?}");
        let one = estimate_mu(1, &LineBundleSpec::new(1, 0.3, 0.1), &torus, 20, 7, 1e-6, DEFAULT_REL_TOL).unwrap();
        assert!((one.mu - 1.0).norm() < 1e-15 && one.dispersion < 1e-15);
    }

    #[test]
    fn mu_ratio_is_exchange_invariant() {
        let torus = TorusParams::new(c(0.2, 1.1)).unwrap();
        let spec = LineBundleSpec::new(2, 0.3, 0.6);
        let p = ManyBodyPoint::from_z(&[c(0.2, 0.5), c(0.7, 0.1)], &torus).unwrap();
        let q = ManyBodyPoint::from_z(&[p.z[1], p.z[0]], &torus).unwrap();
        let r = |p: &ManyBodyPoint| {
            slater_wavefunction(&spec, &torus, p, DEFAULT_REL_TOL).unwrap() / fay_wavefunction(&spec, &torus, p, DEFAULT_REL_TOL).unwrap()
        };
        assert!((r(&p) - r(&q)).norm() < 1e-12 * r(&p).norm());
    }

    #[test]
    fn mu_rejects_degenerate_batches() {
        let torus = TorusParams::square();
        let spec = LineBundleSpec::new(2, 0.0, 0.0);
        assert!(matches!(
            estimate_mu(2, &spec, &torus, 20, 1, 1e30, DEFAULT_REL_TOL),
            Err(FqheError::DegenerateSampling { .. })
        ));
        assert!(estimate_mu(2, &spec, &torus, 5, 1, 1e-6, DEFAULT_REL_TOL).is_err());
    }

    #[test]
    fn closed_forms() {
        assert!((slater_norm_closed(2, 1.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((slater_norm_closed(1, 1.0, 0.0) - 0.5f64.powf(0.25)).abs() < 1e-15);
        assert_eq!(slater_norm_closed(3, 0.7, 0.3), slater_norm_closed(3, 0.7, -0.3));
        assert!((one_particle_norm_sq_closed(1, 1.0, 0.0) - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((one_particle_norm_sq_closed(2, 1.0, 0.25) - 0.5 * (PI * 0.0625).exp()).abs() < 1e-15);
    }

    #[test]
    fn one_particle_gram_small_cases() {
        let torus = TorusParams::square();
        let g = one_particle_gram(&LineBundleSpec::new(1, 0.0, 0.0), &torus, GridSpec::new(32, 2).unwrap(), DEFAULT_REL_TOL).unwrap();
        assert!((g.matrix[(0, 0)] - 0.5f64.sqrt()).norm() < 1e-12);
        let g64 = one_particle_gram(&LineBundleSpec::new(1, 0.0, 0.0), &torus, GridSpec::new(64, 2).unwrap(), DEFAULT_REL_TOL).unwrap();
        assert!((g64.matrix[(0, 0)] - g.matrix[(0, 0)]).norm() < 1e-12);

        let torus = TorusParams::new(c(0.3, 0.8)).unwrap();
        let spec = LineBundleSpec::new(3, 0.37, 0.81);
        let g = one_particle_gram(&spec, &torus, GridSpec::new(64, 2).unwrap(), DEFAULT_REL_TOL).unwrap();
        assert!(g.off_diagonal_max() < 1e-10);
        let expect = one_particle_norm_sq_closed(3, 0.8, 0.37);
        for i in 0..3 {
            assert!((g.matrix[(i, i)] - expect).norm() < 1e-10);
        }
    }

    #[test]
    fn grid_error_estimates_shrink_fast() {
        let torus = TorusParams::new(c(0.3, 0.8)).unwrap();
        let spec = LineBundleSpec::new(2, 0.2, 0.1);
        let e16 = one_particle_gram(&spec, &torus, GridSpec::new(16, 2).unwrap(), DEFAULT_REL_TOL).unwrap().error_estimate;
        let e32 = one_particle_gram(&spec, &torus, GridSpec::new(32, 2).unwrap(), DEFAULT_REL_TOL).unwrap().error_estimate;
        assert!(e32 < 0.1 * e16 || e32 < 1e-14, "{e16} {e32}");
    }

    #[test]
    fn slater_norm_on_small_grid() {
        let torus = TorusParams::square();
        let model = OneLayerModel::new(1, 2, torus, 0.0, 0.0).unwrap();
        let r = manybody_inner(&model, OneLayerState::Slater, OneLayerState::Slater, &Integrator::grid(16), DEFAULT_REL_TOL).unwrap();
        assert!((r.value.re - 0.25).abs() < 1e-6, "{}", r.value);
        assert!(r.value.im.abs() < 1e-12);
    }

    #[test]
    fn s1_matches_absolute_tolerance_kernel() {
        let torus = TorusParams::new(c(0.1, 0.9)).unwrap();
        let spec = LineBundleSpec::new(1, 0.2, 0.1);
        let z = c(0.3, 0.4);
        let tol = Tolerance::new(1e-14).unwrap();
        let a = theta1d(Characteristics1D::new(0.0, 0.0), z + spec.xi(&torus), torus.tau(), tol).unwrap();
        let b = slater_wavefunction(&spec, &torus, &ManyBodyPoint::from_z(&[z], &torus).unwrap(), DEFAULT_REL_TOL).unwrap();
        assert!((a - b).norm() < 1e-13);
    }
}
