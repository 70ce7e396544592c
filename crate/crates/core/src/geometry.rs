//! Line bundles `L_{k,ξ}` and `L♯_{k,ξ}` on the torus: coordinate charts,
//! automorphy factors, the hermitian metric and the theta-function basis of
//! holomorphic sections.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FqheError, Result};
use crate::theta::{theta1d, theta1d_rel, Characteristics1D, Tolerance, TorusParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A point of the plane in both charts: `z = x + τy` and `z = u + iv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticePoint {
    pub x: f64,
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

impl LatticePoint {
    pub fn from_xy(x: f64, y: f64, torus: &TorusParams) -> Self {
        let tau = torus.tau();
        Self { x, y, u: x + y * tau.re, v: y * tau.im }
    }

    pub fn from_z(z: Complex64, torus: &TorusParams) -> Self {
        let (x, y) = to_lattice_coords(z, torus.tau());
        Self { x, y, u: z.re, v: z.im }
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.u, self.v)
    }
}

/// Solve `z = x + τy` for real `(x, y)`.
pub fn to_lattice_coords(z: Complex64, tau: Complex64) -> (f64, f64) {
    let y = z.im / tau.im;
    (z.re - y * tau.re, y)
}

/// `L_{k,ξ}` (or `L♯_{k,ξ}` when `sharp`) with `ξ = aτ + b`.
///
/// `ξ` is kept as the pair `(a, b)`; the metric depends on `a` alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineBundleSpec {
    pub k: i64,
    pub a: f64,
    pub b: f64,
    pub sharp: bool,
}

impl LineBundleSpec {
    pub fn new(k: i64, a: f64, b: f64) -> Self {
        Self { k, a, b, sharp: false }
    }

    pub fn sharp(k: i64, a: f64, b: f64) -> Self {
        Self { k, a, b, sharp: true }
    }

    pub fn xi(&self, torus: &TorusParams) -> Complex64 {
        self.a * torus.tau() + self.b
    }

    /// Signs `(c₁, c₂)` multiplying the two automorphy factors.
    pub fn signs(&self) -> (f64, f64) {
        if self.sharp {
            (-1.0, -1.0)
        } else {
            (1.0, 1.0)
        }
    }

    /// Multipliers of a section under `z ↦ z+1` and `z ↦ z+τ`:
    /// `f(z+1) = c₁ f(z)`, `f(z+τ) = c₂ e^{-2πiξ} φ(z)^k f(z)` with
    /// `φ(z) = exp(-πiτ - 2πiz)`.
    pub fn automorphy_factors(&self, torus: &TorusParams, z: Complex64) -> (Complex64, Complex64) {
        let (c1, c2) = self.signs();
        let tau = torus.tau();
        let xi = self.xi(torus);
        let log_factor = -2.0 * I * PI * xi + self.k as f64 * (-I * PI * tau - 2.0 * I * PI * z);
        (Complex64::new(c1, 0.0), c2 * log_factor.exp())
    }

    fn require_positive_degree(&self) -> Result<()> {
        if self.k <= 0 {
            return Err(FqheError::InvalidInput(format!(
                "holomorphic sections need positive degree, got k = {}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Hermitian metric `h_{k,ξ}(x, y) = exp(-2πkty² - 4πaty)`.
pub fn metric_h(spec: &LineBundleSpec, y: f64, t: f64) -> f64 {
    (-2.0 * PI * spec.k as f64 * t * y * y - 4.0 * PI * spec.a * t * y).exp()
}

/// Basis section `s_j(z) = θ[(j-1)/k, 0](kz + ξ | kτ)`, `1 ≤ j ≤ k`.
pub fn section_basis_eval(spec: &LineBundleSpec, torus: &TorusParams, j: usize, z: Complex64, tol: Tolerance) -> Result<Complex64> {
    spec.require_positive_degree()?;
    let k = spec.k as usize;
    if j == 0 || j > k {
        return Err(FqheError::InvalidInput(format!("section index {j} outside 1..={k}")));
    }
    let kf = spec.k as f64;
    let ch = Characteristics1D::new((j - 1) as f64 / kf, 0.0);
    theta1d(ch, kf * z + spec.xi(torus), kf * torus.tau(), tol)
}

/// The whole basis `(s_1, …, s_k)` evaluated with peak-relative accuracy.
#[derive(Debug, Clone, Copy)]
pub struct SectionBasis {
    spec: LineBundleSpec,
    torus: TorusParams,
    rel_tol: f64,
}

impl SectionBasis {
    pub fn new(spec: LineBundleSpec, torus: TorusParams, rel_tol: f64) -> Result<Self> {
        spec.require_positive_degree()?;
        Ok(Self { spec, torus, rel_tol })
    }

    pub fn len(&self) -> usize {
        self.spec.k as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spec(&self) -> &LineBundleSpec {
        &self.spec
    }

    /// `s_j(z)` for `1 ≤ j ≤ k`.
    pub fn eval(&self, j: usize, z: Complex64) -> Result<Complex64> {
        let kf = self.spec.k as f64;
        let ch = Characteristics1D::new((j - 1) as f64 / kf, 0.0);
        theta1d_rel(ch, kf * z + self.spec.xi(&self.torus), kf * self.torus.tau(), self.rel_tol)
    }

    pub fn eval_all(&self, z: Complex64, out: &mut [Complex64]) -> Result<()> {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = self.eval(j + 1, z)?;
        }
        Ok(())
    }
}

fn relative_gap(lhs: Complex64, rhs: Complex64) -> f64 {
    let scale = lhs.norm().max(rhs.norm());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).norm() / scale
    }
}

/// Largest relative violation of the two automorphy laws of `spec` by `f`
/// over `samples` points drawn uniformly from the fundamental domain.
pub fn quasi_periodicity_defect<F>(f: F, spec: &LineBundleSpec, torus: &TorusParams, samples: usize, seed: u64) -> Result<f64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    if samples == 0 {
        return Err(FqheError::InvalidInput("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = torus.tau();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let z = rng.random::<f64>() + tau * rng.random::<f64>();
        let fz = f(z)?;
        let (c1, c2) = spec.automorphy_factors(torus, z);
        worst = worst.max(relative_gap(f(z + 1.0)?, c1 * fz));
        worst = worst.max(relative_gap(f(z + tau)?, c2 * fz));
    }
    Ok(worst)
}
