//! Multi-layer models given by a Wen datum `(K, n⃗)`: validation, the group
//! `Π = K⁻¹ℤ^g/ℤ^g`, the discriminant `D_K`, Keski-Vakkuri–Wen functions and
//! the centre-of-mass theta basis with its Gram matrix.

pub mod lattice;
mod serial;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use thiserror::Error;

use crate::error::{FqheError, Result};
use crate::gram::GramMatrix;
use crate::integration::{torus_quadrature_vec, GridSpec, IntegrationResult, Integrator};
use crate::laughlin::fill_outer;
use crate::theta::{theta_g_rel, theta_odd_rel, PeriodMatrix, TorusParams};

use lattice::{adjugate, det_bareiss, gcd, is_positive_definite, smith_normal_form};

/// Brute-force enumeration of `Π` is used while `δ^g` stays below this.
const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WenError {
    #[error("K must be a non-empty square matrix, got {rows} rows with lengths {cols:?}")]
    NotSquare { rows: usize, cols: Vec<usize> },
    #[error("K is not symmetric: K[{i}][{j}] = {kij} but K[{j}][{i}] = {kji}")]
    NotSymmetric { i: usize, j: usize, kij: i64, kji: i64 },
    #[error("K has a negative entry K[{i}][{j}] = {value}")]
    NegativeEntry { i: usize, j: usize, value: i64 },
    #[error("K is not positive definite (leading minors {minors:?})")]
    NotPositiveDefinite { minors: Vec<i128> },
    #[error("diagonal of K mixes even and odd entries: {diagonal:?}")]
    MixedParityDiagonal { diagonal: Vec<i64> },
    #[error("u = K⁻¹e has a non-positive entry: {u:?}")]
    NonpositiveU { u: Vec<String> },
    #[error("K·n = {kn:?} is not a positive multiple of (1, …, 1)")]
    NoUniformD { kn: Vec<i64> },
    #[error("particle counts {n:?} must be {g} positive integers")]
    InvalidParticleCount { n: Vec<i64>, g: usize },
    #[error("malformed Wen datum document: {0}")]
    Parse(String),
}

/// Validated symmetric positive definite integer matrix.
fn check_matrix(k: &[Vec<i64>]) -> std::result::Result<(), WenError> {
    let g = k.len();
    if g == 0 || k.iter().any(|r| r.len() != g) {
        return Err(WenError::NotSquare { rows: g, cols: k.iter().map(Vec::len).collect() });
    }
    for i in 0..g {
        for j in 0..g {
            if k[i][j] != k[j][i] {
                return Err(WenError::NotSymmetric { i, j, kij: k[i][j], kji: k[j][i] });
            }
        }
    }
    if !is_positive_definite(k) {
        let minors = (1..=g)
            .map(|s| det_bareiss(&k[..s].iter().map(|r| r[..s].to_vec()).collect::<Vec<_>>()))
            .collect();
        return Err(WenError::NotPositiveDefinite { minors });
    }
    Ok(())
}

/// A validated pair `(K, n⃗)` with its derived invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WenDatum {
    pub k: Vec<Vec<i64>>,
    pub n_vec: Vec<i64>,
    /// `K·n⃗ = d·e⃗`.
    pub d: i64,
    /// `det K = |Π|`.
    pub delta: i64,
    /// Total particle number `n = Σ n_k`.
    pub n_total: i64,
    /// `u⃗ = K⁻¹e⃗ = n⃗/d`.
    pub u: Vec<Rational64>,
    /// `+1` for an even diagonal, `-1` for an odd one.
    pub epsilon_k: i8,
    /// `gcd(δ, nδ/d) = 1`: then `u⃗` generates `Π`.
    pub cyclic: bool,
    /// Smith invariants of `K`, i.e. `Π ≅ ⊕ ℤ/d_i`.
    pub invariant_factors: Vec<i64>,
}

pub fn validate_wen(k: &[Vec<i64>], n_vec: &[i64]) -> std::result::Result<WenDatum, WenError> {
    let g = k.len();
    if g == 0 || k.iter().any(|r| r.len() != g) {
        return Err(WenError::NotSquare { rows: g, cols: k.iter().map(Vec::len).collect() });
    }
    if n_vec.len() != g || n_vec.iter().any(|&x| x <= 0) {
        return Err(WenError::InvalidParticleCount { n: n_vec.to_vec(), g });
    }
    for (i, row) in k.iter().enumerate() {
        if let Some((j, &value)) = row.iter().enumerate().find(|(_, &x)| x < 0) {
            return Err(WenError::NegativeEntry { i, j, value });
        }
    }
    check_matrix(k)?;
    let diagonal: Vec<i64> = (0..g).map(|i| k[i][i]).collect();
    if diagonal.iter().any(|x| x % 2 != diagonal[0] % 2) {
        return Err(WenError::MixedParityDiagonal { diagonal });
    }
    let delta = det_bareiss(k);
    let adj = adjugate(k);
    // u = adj(K)·e / δ
    let u: Vec<Rational64> = adj
        .iter()
        .map(|row| Rational64::new(row.iter().sum::<i128>() as i64, delta as i64))
        .collect();
    if u.iter().any(|x| *x <= Rational64::from_integer(0)) {
        return Err(WenError::NonpositiveU { u: u.iter().map(|x| x.to_string()).collect() });
    }
    let kn: Vec<i64> = k.iter().map(|row| row.iter().zip(n_vec).map(|(a, b)| a * b).sum()).collect();
    let d = kn[0];
    if d <= 0 || kn.iter().any(|&x| x != d) {
        return Err(WenError::NoUniformD { kn });
    }
    let delta = delta as i64;
    let n_total: i64 = n_vec.iter().sum();
    // n = (e, n⃗) = d·(e, u⃗) and δu⃗ ∈ ℤ^g, so nδ/d is an integer.
    let n_delta_over_d = n_total * delta / d;
    Ok(WenDatum {
        k: k.to_vec(),
        n_vec: n_vec.to_vec(),
        d,
        delta,
        n_total,
        u,
        epsilon_k: if diagonal[0] % 2 == 0 { 1 } else { -1 },
        cyclic: gcd(delta, n_delta_over_d) == 1,
        invariant_factors: smith_normal_form(k).diag,
    })
}

impl WenDatum {
    pub fn g(&self) -> usize {
        self.k.len()
    }

    pub fn n_delta_over_d(&self) -> i64 {
        self.n_total * self.delta / self.d
    }

    /// `n/d`, the absolute slope of the magnetic bundle.
    pub fn n_over_d(&self) -> f64 {
        self.n_total as f64 / self.d as f64
    }

    /// Sign `c` in the per-particle automorphy laws
    /// `Φ(z+1) = c·Φ(z)`, `Φ(z+τ) = c·e^{-2πiζ_k}φ(z)^d·Φ(z)`; `-1` means the
    /// particle sees the sharp bundle `L♯_{d,ζ_k}`.
    pub fn automorphy_sign(&self) -> i8 {
        if (self.d - self.k[0][0]) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn k_f64(&self) -> DMatrix<f64> {
        let g = self.g();
        DMatrix::from_fn(g, g, |i, j| self.k[i][j] as f64)
    }

    pub fn to_text(&self) -> String {
        serial::to_text(self)
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, WenError> {
        serial::from_text(text)
    }

    /// The frame `(0, u⃗, 2u⃗, …, (δ-1)u⃗)` mod `ℤ^g`; requires a cyclic datum.
    pub fn cyclic_frame(&self) -> Result<Vec<PiElement>> {
        if !self.cyclic {
            return Err(FqheError::InvalidInput("u does not generate Π for this datum".into()));
        }
        let den = self.delta;
        let u_num: Vec<i64> = self.u.iter().map(|x| (x * Rational64::from_integer(den)).to_integer()).collect();
        Ok((0..den).map(|p| PiElement::new(u_num.iter().map(|x| p * x).collect(), den)).collect())
    }
}

/// An element of `Π = K⁻¹ℤ^g/ℤ^g`, stored exactly as numerators over `δ`
/// reduced into `[0, δ)`, i.e. the representative in `[0,1)^g`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PiElement {
    num: Vec<i64>,
    den: i64,
}

impl PiElement {
    pub fn new(num: Vec<i64>, den: i64) -> Self {
        Self { num: num.into_iter().map(|x| x.rem_euclid(den)).collect(), den }
    }

    pub fn zero(g: usize, den: i64) -> Self {
        Self { num: vec![0; g], den }
    }

    pub fn numerators(&self) -> &[i64] {
        &self.num
    }

    pub fn denominator(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.num.iter().map(|&x| x as f64 / self.den as f64).collect()
    }

    pub fn rationals(&self) -> Vec<Rational64> {
        self.num.iter().map(|&x| Rational64::new(x, self.den)).collect()
    }

    /// `(c⃗, e⃗)`: the frame phase picked up under `ξ ↦ ξ + 1`.
    pub fn trace(&self) -> f64 {
        self.num.iter().sum::<i64>() as f64 / self.den as f64
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|&x| x == 0)
    }

    /// True when `K·c⃗ ∈ ℤ^g`.
    pub fn in_lattice_of(&self, k: &[Vec<i64>]) -> bool {
        k.iter().all(|row| row.iter().zip(&self.num).map(|(a, b)| (*a as i128) * (*b as i128)).sum::<i128>() % self.den as i128 == 0)
    }
}

/// `Π` by scanning `adj(K)·v / δ` over `v ∈ [0,δ)^g` (every class is hit
/// because `K⁻¹ℤ^g = adj(K)ℤ^g / δ` and `v` matters only mod `δ`).
pub fn enumerate_pi_brute_force(k: &[Vec<i64>]) -> Result<Vec<PiElement>> {
    check_matrix(k)?;
    let g = k.len();
    let delta = det_bareiss(k) as i64;
    let adj = adjugate(k);
    let mut seen = BTreeSet::new();
    let mut v = vec![0i64; g];
    loop {
        let num: Vec<i64> = adj
            .iter()
            .map(|row| (row.iter().zip(&v).map(|(a, b)| a * *b as i128).sum::<i128>().rem_euclid(delta as i128)) as i64)
            .collect();
        seen.insert(PiElement { num, den: delta });
        let mut i = 0;
        loop {
            if i == g {
                return Ok(seen.into_iter().collect());
            }
            v[i] += 1;
            if v[i] < delta {
                break;
            }
            v[i] = 0;
            i += 1;
        }
    }
}

/// `Π` from the Smith form `UKV = D`: `c⃗ = V·D⁻¹·w⃗` with `0 ≤ w_i < d_i`.
pub fn enumerate_pi_smith(k: &[Vec<i64>]) -> Result<Vec<PiElement>> {
    check_matrix(k)?;
    let g = k.len();
    let delta = det_bareiss(k) as i64;
    let s = smith_normal_form(k);
    let mut out = Vec::with_capacity(delta as usize);
    let mut w = vec![0i64; g];
    loop {
        // numerators over δ: Σ_j V_ij · w_j · (δ / d_j)
        let num: Vec<i64> = (0..g)
            .map(|i| (0..g).map(|j| s.v[i][j] as i128 * w[j] as i128 * (delta / s.diag[j]) as i128).sum::<i128>().rem_euclid(delta as i128) as i64)
            .collect();
        out.push(PiElement { num, den: delta });
        let mut i = 0;
        loop {
            if i == g {
                out.sort();
                return Ok(out);
            }
            w[i] += 1;
            if w[i] < s.diag[i] {
                break;
            }
            w[i] = 0;
            i += 1;
        }
    }
}

/// All `δ` elements of `Π`, sorted, with representatives in `[0,1)^g`.
pub fn enumerate_pi_matrix(k: &[Vec<i64>]) -> Result<Vec<PiElement>> {
    check_matrix(k)?;
    let delta = det_bareiss(k) as u64;
    if delta.checked_pow(k.len() as u32).is_some_and(|c| c <= BRUTE_FORCE_LIMIT) {
        enumerate_pi_brute_force(k)
    } else {
        enumerate_pi_smith(k)
    }
}

pub fn enumerate_pi(datum: &WenDatum) -> Vec<PiElement> {
    enumerate_pi_matrix(&datum.k).expect("validated datum")
}

/// Particle coordinates grouped by layer, with layer sums `w_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredPoint {
    pub z: Vec<Vec<Complex64>>,
    pub y: Vec<Vec<f64>>,
    pub w: Vec<Complex64>,
}

impl LayeredPoint {
    pub fn from_z(z: Vec<Vec<Complex64>>, torus: &TorusParams) -> Self {
        let t = torus.t();
        let y = z.iter().map(|layer| layer.iter().map(|v| v.im / t).collect()).collect();
        let w = z.iter().map(|layer| layer.iter().sum()).collect();
        Self { z, y, w }
    }

    /// From the integration layout: layer by layer, `(x, y)` per particle.
    pub fn from_interleaved(v: &[f64], n_vec: &[i64], torus: &TorusParams) -> Result<Self> {
        let total: i64 = n_vec.iter().sum();
        if v.len() != 2 * total as usize {
            return Err(FqheError::InvalidInput(format!("expected {} coordinates, got {}", 2 * total, v.len())));
        }
        let tau = torus.tau();
        let mut it = v.chunks_exact(2);
        let mut z = Vec::with_capacity(n_vec.len());
        let mut y = Vec::with_capacity(n_vec.len());
        for &nk in n_vec {
            let mut zl = Vec::with_capacity(nk as usize);
            let mut yl = Vec::with_capacity(nk as usize);
            for _ in 0..nk {
                let p = it.next().expect("length checked");
                zl.push(p[0] + tau * p[1]);
                yl.push(p[1]);
            }
            z.push(zl);
            y.push(yl);
        }
        let w = z.iter().map(|layer| layer.iter().sum()).collect();
        Ok(Self { z, y, w })
    }
}

/// Pointwise evaluator for the wave functions of one datum on one torus.
#[derive(Debug, Clone)]
pub struct KvwModel {
    pub datum: WenDatum,
    pub torus: TorusParams,
    omega: PeriodMatrix,
    k: DMatrix<f64>,
}

impl KvwModel {
    pub fn new(datum: WenDatum, torus: TorusParams) -> Result<Self> {
        let k = datum.k_f64();
        let omega = PeriodMatrix::scaled(torus.tau(), &k)?;
        Ok(Self { datum, torus, omega, k })
    }

    fn check_shape(&self, p: &LayeredPoint) -> Result<()> {
        let ok = p.z.len() == self.datum.g() && p.z.iter().zip(&self.datum.n_vec).all(|(l, &n)| l.len() == n as usize);
        if !ok {
            return Err(FqheError::InvalidInput(format!("point does not match layer sizes {:?}", self.datum.n_vec)));
        }
        Ok(())
    }

    /// `D_K = ∏_k ∏_{p<q} ϑ(z_p^(k) - z_q^(k))^{K_kk} · ∏_{k<l} ∏_{p,q} ϑ(z_p^(k) - z_q^(l))^{K_kl}`.
    pub fn discriminant(&self, p: &LayeredPoint, rel_tol: f64) -> Result<Complex64> {
        self.check_shape(p)?;
        let tau = self.torus.tau();
        let g = self.datum.g();
        let mut prod = Complex64::new(1.0, 0.0);
        for k in 0..g {
            let e = self.datum.k[k][k] as u32;
            let layer = &p.z[k];
            for i in 0..layer.len() {
                for j in i + 1..layer.len() {
                    prod *= theta_odd_rel(layer[i] - layer[j], tau, rel_tol)?.powu(e);
                }
            }
            for l in k + 1..g {
                let e = self.datum.k[k][l] as u32;
                if e == 0 {
                    continue;
                }
                for zi in &p.z[k] {
                    for zj in &p.z[l] {
                        prod *= theta_odd_rel(zi - zj, tau, rel_tol)?.powu(e);
                    }
                }
            }
        }
        Ok(prod)
    }

    /// `Θ[c⃗, 0](K w⃗ + ζ⃗ | τK)`.
    pub fn center_factor(&self, zeta: &[Complex64], c: &PiElement, p: &LayeredPoint, rel_tol: f64) -> Result<Complex64> {
        let g = self.datum.g();
        if zeta.len() != g {
            return Err(FqheError::InvalidInput(format!("ζ must have {g} components")));
        }
        let arg: Vec<Complex64> = (0..g).map(|i| (0..g).map(|j| self.k[(i, j)] * p.w[j]).sum::<Complex64>() + zeta[i]).collect();
        theta_g_rel(&c.to_f64(), &vec![0.0; g], &arg, &self.omega, rel_tol)
    }

    /// `Φ_c = Θ[c⃗, 0](K w⃗ + ζ⃗ | τK) · D_K`.
    pub fn wavefunction(&self, zeta: &[Complex64], c: &PiElement, p: &LayeredPoint, rel_tol: f64) -> Result<Complex64> {
        Ok(self.center_factor(zeta, c, p, rel_tol)? * self.discriminant(p, rel_tol)?)
    }

    /// `∏_k ∏_p h_{d,ξ}(z_p^(k))` on the slice `ζ⃗ = ξe⃗`, `ξ = aτ + b`.
    pub fn metric(&self, a: f64, p: &LayeredPoint) -> f64 {
        let t = self.torus.t();
        let d = self.datum.d as f64;
        let (s1, s2) = p.y.iter().flatten().fold((0.0, 0.0), |(s1, s2), y| (s1 + y, s2 + y * y));
        (-2.0 * PI * d * t * s2 - 4.0 * PI * a * t * s1).exp()
    }

    fn slice(&self, a: f64, b: f64) -> Vec<Complex64> {
        vec![a * self.torus.tau() + b; self.datum.g()]
    }

    /// Gram matrix of `(Φ_c)_{c ∈ frame}` on the slice `ζ⃗ = ξe⃗`.
    pub fn gram(&self, a: f64, b: f64, frame: &[PiElement], integrator: &Integrator, rel_tol: f64) -> Result<GramMatrix> {
        let zeta = self.slice(a, b);
        let r = frame.len();
        let integrand = |v: &[f64], out: &mut [Complex64]| {
            let p = LayeredPoint::from_interleaved(v, &self.datum.n_vec, &self.torus)?;
            let dk = self.discriminant(&p, rel_tol)?;
            let mut f = vec![Complex64::new(0.0, 0.0); r];
            for (slot, c) in f.iter_mut().zip(frame) {
                *slot = self.center_factor(&zeta, c, &p, rel_tol)? * dk;
            }
            fill_outer(&f, self.metric(a, &p), out);
            Ok(())
        };
        let results = integrator.integrate_vec(integrand, 2 * self.datum.n_total as usize, r * r)?;
        Ok(GramMatrix::from_results(r, &results))
    }

    /// `⟨Φ_{c1}, Φ_{c2}⟩` on the slice `ζ⃗ = ξe⃗`.
    pub fn inner(&self, a: f64, b: f64, c1: &PiElement, c2: &PiElement, integrator: &Integrator, rel_tol: f64) -> Result<IntegrationResult> {
        let zeta = self.slice(a, b);
        let integrand = |v: &[f64]| -> Result<Complex64> {
            let p = LayeredPoint::from_interleaved(v, &self.datum.n_vec, &self.torus)?;
            let dk = self.discriminant(&p, rel_tol)?;
            let l = self.center_factor(&zeta, c1, &p, rel_tol)? * dk;
            let r = if c1 == c2 { l } else { self.center_factor(&zeta, c2, &p, rel_tol)? * dk };
            Ok(l * r.conj() * self.metric(a, &p))
        };
        integrator.integrate(integrand, 2 * self.datum.n_total as usize)
    }
}

pub fn discriminant_dk(datum: &WenDatum, torus: &TorusParams, p: &LayeredPoint, rel_tol: f64) -> Result<Complex64> {
    KvwModel::new(datum.clone(), *torus)?.discriminant(p, rel_tol)
}

pub fn kvw_wavefunction(
    datum: &WenDatum,
    torus: &TorusParams,
    zeta: &[Complex64],
    c: &PiElement,
    p: &LayeredPoint,
    rel_tol: f64,
) -> Result<Complex64> {
    KvwModel::new(datum.clone(), *torus)?.wavefunction(zeta, c, p, rel_tol)
}

pub fn multilayer_inner(
    datum: &WenDatum,
    torus: &TorusParams,
    a: f64,
    b: f64,
    c1: &PiElement,
    c2: &PiElement,
    integrator: &Integrator,
    rel_tol: f64,
) -> Result<IntegrationResult> {
    KvwModel::new(datum.clone(), *torus)?.inner(a, b, c1, c2, integrator, rel_tol)
}

/// Centre-of-mass basis `H_c(z⃗) = Θ[c⃗, 0](K z⃗ + ξ⃗ | τK)` with
/// `ξ⃗ = τa⃗ + b⃗`.
#[derive(Debug, Clone)]
pub struct CenterMassModel {
    pub k: Vec<Vec<i64>>,
    pub torus: TorusParams,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub pi: Vec<PiElement>,
    kf: DMatrix<f64>,
    omega: PeriodMatrix,
}

impl CenterMassModel {
    pub fn new(k: &[Vec<i64>], torus: TorusParams, a: &[f64], b: &[f64]) -> Result<Self> {
        let pi = enumerate_pi_matrix(k)?;
        let g = k.len();
        if a.len() != g || b.len() != g {
            return Err(FqheError::InvalidInput(format!("ξ needs {g} components")));
        }
        let kf = DMatrix::from_fn(g, g, |i, j| k[i][j] as f64);
        let omega = PeriodMatrix::scaled(torus.tau(), &kf)?;
        Ok(Self { k: k.to_vec(), torus, a: a.to_vec(), b: b.to_vec(), pi, kf, omega })
    }

    pub fn g(&self) -> usize {
        self.k.len()
    }

    pub fn xi(&self) -> Vec<Complex64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a * self.torus.tau() + b).collect()
    }

    pub fn eval(&self, c: &PiElement, z: &[Complex64], rel_tol: f64) -> Result<Complex64> {
        let g = self.g();
        if z.len() != g {
            return Err(FqheError::InvalidInput(format!("z needs {g} components")));
        }
        let xi = self.xi();
        let arg: Vec<Complex64> = (0..g).map(|i| (0..g).map(|j| self.kf[(i, j)] * z[j]).sum::<Complex64>() + xi[i]).collect();
        theta_g_rel(&c.to_f64(), &vec![0.0; g], &arg, &self.omega, rel_tol)
    }

    /// `U_l(z⃗, ξ⃗) = exp(-πi (l⃗, 2ξ⃗ + 2Kz⃗ + Ωl⃗))`, the factor in
    /// `H(z⃗ + τl⃗) = U_l · H(z⃗)`.
    pub fn shift_factor(&self, l: &[i64], z: &[Complex64]) -> Complex64 {
        let g = self.g();
        let xi = self.xi();
        let tau = self.torus.tau();
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..g {
            let kz: Complex64 = (0..g).map(|j| self.kf[(i, j)] * z[j]).sum();
            let kl: f64 = (0..g).map(|j| self.kf[(i, j)] * l[j] as f64).sum();
            s += l[i] as f64 * (2.0 * xi[i] + 2.0 * kz + tau * kl);
        }
        (-Complex64::i() * PI * s).exp()
    }

    /// `exp(-2πt (y⃗, K y⃗ + 2a⃗))`.
    pub fn weight(&self, y: &[f64]) -> f64 {
        let g = self.g();
        let mut q = 0.0;
        for i in 0..g {
            let ky: f64 = (0..g).map(|j| self.kf[(i, j)] * y[j]).sum();
            q += y[i] * (ky + 2.0 * self.a[i]);
        }
        (-2.0 * PI * self.torus.t() * q).exp()
    }

    /// Gram matrix of `(H_c)_{c ∈ Π}` over `[0,1]^{2g}`, layout
    /// `(x_1, y_1, …, x_g, y_g)`.
    pub fn gram(&self, grid: GridSpec, rel_tol: f64) -> Result<GramMatrix> {
        let g = self.g();
        if grid.dims != 2 * g {
            return Err(FqheError::InvalidInput(format!("centre-of-mass Gram needs a {}-dimensional grid", 2 * g)));
        }
        let r = self.pi.len();
        let tau = self.torus.tau();
        let integrand = |v: &[f64], out: &mut [Complex64]| {
            let z: Vec<Complex64> = v.chunks_exact(2).map(|p| p[0] + tau * p[1]).collect();
            let y: Vec<f64> = v.chunks_exact(2).map(|p| p[1]).collect();
            let mut f = vec![Complex64::new(0.0, 0.0); r];
            for (slot, c) in f.iter_mut().zip(&self.pi) {
                *slot = self.eval(c, &z, rel_tol)?;
            }
            fill_outer(&f, self.weight(&y), out);
            Ok(())
        };
        let results = torus_quadrature_vec(integrand, r * r, grid)?;
        Ok(GramMatrix::from_results(r, &results))
    }
}

pub fn center_mass_eval(k: &[Vec<i64>], torus: &TorusParams, a: &[f64], b: &[f64], c: &PiElement, z: &[Complex64], rel_tol: f64) -> Result<Complex64> {
    CenterMassModel::new(k, *torus, a, b)?.eval(c, z, rel_tol)
}

pub fn center_mass_gram(k: &[Vec<i64>], torus: &TorusParams, a: &[f64], b: &[f64], grid: GridSpec, rel_tol: f64) -> Result<GramMatrix> {
    CenterMassModel::new(k, *torus, a, b)?.gram(grid, rel_tol)
}

/// Closed-form diagonal of the centre-of-mass Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    /// `(2t)^{-g/2} δ^{-1/2} e^{2πt(a⃗, K⁻¹a⃗)}`, from the Gaussian integral
    /// `∫ exp(-2πt (y⃗, K y⃗)) dy⃗ = det(2tK)^{-1/2}`.
    pub value: f64,
    /// `(2tδ)^{-g/2} e^{2πt(a⃗, K⁻¹a⃗)}`, an alternative normalization that
    /// agrees with `value` only when `g = 1` or `δ = 1`.
    pub alternative: f64,
}

impl Kappa {
    pub fn alternative_differs(&self) -> bool {
        (self.value - self.alternative).abs() > 1e-12 * self.value
    }
}

pub fn kappa_closed(k: &[Vec<i64>], a: &[f64], t: f64) -> Result<Kappa> {
    check_matrix(k)?;
    let g = k.len();
    if a.len() != g || !(t > 0.0) {
        return Err(FqheError::InvalidInput(format!("need {g} components of a and t > 0")));
    }
    let delta = det_bareiss(k) as f64;
    let adj = adjugate(k);
    // (a, K⁻¹a) = (a, adj(K) a) / δ
    let quad: f64 = (0..g).map(|i| a[i] * (0..g).map(|j| adj[i][j] as f64 * a[j]).sum::<f64>()).sum::<f64>() / delta;
    let envelope = (2.0 * PI * t * quad).exp();
    let gf = g as f64;
    Ok(Kappa {
        value: (2.0 * t).powf(-gf / 2.0) * delta.powf(-0.5) * envelope,
        alternative: (2.0 * t * delta).powf(-gf / 2.0) * envelope,
    })
}
