//! Theta functions with real characteristics.
//!
//! The one-dimensional series is
//!
//! ```text
//! θ[a,b](z|τ) = Σ_n exp(πiτ(n+a)² + 2πi(n+a)(z+b))
//! ```
//!
//! and the g-dimensional series replaces `τ(n+a)²` by the quadratic form of a
//! period matrix Ω with positive definite imaginary part.
//!
//! Every evaluation carries a certified truncation: the Gaussian envelope of
//! the terms is bounded by `peak · exp(-π λ_min |v - v_c|²)` where `v_c` is the
//! envelope centre and `λ_min` the smallest eigenvalue of `Im Ω`, and the
//! lattice box is grown until the bound on everything left out is below the
//! requested tolerance. The box is centred on the lattice point nearest to the
//! envelope centre, so the number of terms does not grow with `|Im z|`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{FqheError, Result};
use crate::sum::CompensatedSum;

/// Default cap on the number of lattice points one series may visit.
pub const DEFAULT_MAX_TERMS: usize = 10_000_000;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Modular parameter of the torus `C / (Z + τZ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusParams {
    tau: Complex64,
}

impl TorusParams {
    pub fn new(tau: Complex64) -> Result<Self> {
        if !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(FqheError::InvalidInput(format!("non-finite modular parameter {tau}")));
        }
        if tau.im <= 0.0 {
            return Err(FqheError::NonconvergentDomain(format!(
                "Im(tau) = {} must be positive",
                tau.im
            )));
        }
        Ok(Self { tau })
    }

    /// The square torus `τ = i`.
    pub fn square() -> Self {
        Self { tau: I }
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    /// `t = Im τ`.
    pub fn t(&self) -> f64 {
        self.tau.im
    }
}

/// Real characteristics `(a, b)` of a one-dimensional theta function. They are
/// never reduced modulo 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Characteristics1D {
    pub a: f64,
    pub b: f64,
}

impl Characteristics1D {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b }
    }

    /// Characteristics `[1/2, 1/2]` of the odd theta function.
    pub fn odd() -> Self {
        Self { a: 0.5, b: 0.5 }
    }
}

/// Absolute error budget for a series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    abs_tol: f64,
}

impl Tolerance {
    pub fn new(abs_tol: f64) -> Result<Self> {
        if !(abs_tol > 0.0) || !abs_tol.is_finite() {
            return Err(FqheError::InvalidInput(format!(
                "tolerance must be positive and finite, got {abs_tol}"
            )));
        }
        Ok(Self { abs_tol })
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { abs_tol: 1e-13 }
    }
}

/// Symmetric complex matrix with positive definite imaginary part.
#[derive(Debug, Clone)]
pub struct PeriodMatrix {
    omega: DMatrix<Complex64>,
    im_inv: DMatrix<f64>,
    min_eig: f64,
}

impl PeriodMatrix {
    pub fn new(omega: DMatrix<Complex64>) -> Result<Self> {
        let g = omega.nrows();
        if g == 0 || omega.ncols() != g {
            return Err(FqheError::InvalidInput(format!(
                "period matrix must be square and non-empty, got {}x{}",
                omega.nrows(),
                omega.ncols()
            )));
        }
        if omega.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(FqheError::InvalidInput("period matrix has non-finite entries".into()));
        }
        let scale = omega.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        for i in 0..g {
            for j in 0..i {
                if (omega[(i, j)] - omega[(j, i)]).norm() > 1e-12 * scale {
                    return Err(FqheError::InvalidInput("period matrix is not symmetric".into()));
                }
            }
        }
        let im = omega.map(|z| z.im);
        let chol = im.clone().cholesky().ok_or_else(|| {
            FqheError::NonconvergentDomain("imaginary part of the period matrix is not positive definite".into())
        })?;
        let im_inv = chol.inverse();
        let min_eig = im.symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(FqheError::NonconvergentDomain(
                "imaginary part of the period matrix is not positive definite".into(),
            ));
        }
        Ok(Self {
            omega,
            im_inv,
            // Slight shrink so that eigen-solver rounding cannot loosen the tail bound.
            min_eig: min_eig * (1.0 - 1e-12),
        })
    }

    /// The 1×1 period matrix `(τ)`.
    pub fn scalar(tau: Complex64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, tau))
    }

    /// `Ω = τ·K` for a real symmetric matrix `K`.
    pub fn scaled(tau: Complex64, k: &DMatrix<f64>) -> Result<Self> {
        Self::new(k.map(|x| tau * x))
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    pub fn omega(&self) -> &DMatrix<Complex64> {
        &self.omega
    }

    /// Smallest eigenvalue of `Im Ω`.
    pub fn min_eig(&self) -> f64 {
        self.min_eig
    }
}

// ---------------------------------------------------------------------------
// Truncation

/// `Σ_{k≥0} exp(-c (start+k)²)` for `start ≥ 0`, rounded upward by a geometric
/// bound on the remainder.
fn gauss_sum_from(start: f64, c: f64) -> f64 {
    let mut sum = 0.0;
    let mut x = start;
    loop {
        let term = (-c * x * x).exp();
        if term == 0.0 {
            return sum;
        }
        sum += term;
        let ratio = (-c * (2.0 * x + 1.0)).exp();
        let rest = term * ratio / (1.0 - ratio);
        if rest <= 1e-17 * sum {
            return sum + rest;
        }
        x += 1.0;
    }
}

/// Sum of `exp(-c v²)` over all `v ∈ Z + a`.
fn gauss_full(a: f64, c: f64) -> f64 {
    let alpha = a - a.floor();
    gauss_sum_from(alpha, c) + gauss_sum_from(1.0 - alpha, c)
}

/// Sum of `exp(-c v²)` over `v ∈ Z + a` with `|v| > n`.
fn gauss_tail(a: f64, c: f64, n: f64) -> f64 {
    let alpha = a - a.floor();
    let pos = alpha + (n - alpha).floor() + 1.0;
    let neg = (n + alpha).floor() + 1.0 - alpha;
    gauss_sum_from(pos, c) + gauss_sum_from(neg, c)
}

/// Upper bound on `Σ |term|` over lattice points `v ∈ Z^g + a` with
/// `‖v‖_∞ > n`, for terms bounded by `exp(-π λ |v|² + 2π |Y| |v|)`.
fn tail_bound(a: &[f64], im_z_norm: f64, min_eig: f64, n: usize) -> f64 {
    let etas: &[f64] = if im_z_norm == 0.0 {
        &[0.0]
    } else {
        &[0.05, 0.1, 0.2, 0.35, 0.5, 0.7, 0.85]
    };
    let nf = n as f64;
    let mut best = f64::INFINITY;
    for &eta in etas {
        // 2|Y||v| ≤ ηλ|v|² + |Y|²/(ηλ)
        let prefactor = if eta == 0.0 {
            1.0
        } else {
            (PI * im_z_norm * im_z_norm / (eta * min_eig)).exp()
        };
        if !prefactor.is_finite() {
            continue;
        }
        let c = PI * min_eig * (1.0 - eta);
        let full: Vec<f64> = a.iter().map(|&ai| gauss_full(ai, c)).collect();
        let mut bound = 0.0;
        for (i, &ai) in a.iter().enumerate() {
            let others: f64 = full
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, s)| *s)
                .product();
            bound += gauss_tail(ai, c, nf) * others;
        }
        best = best.min(prefactor * bound);
    }
    best
}

/// Smallest radius `N` such that the lattice points `v ∈ Z^g + a` with
/// `‖v‖_∞ > N` contribute at most `tol` in absolute value, for a series whose
/// terms are bounded by `exp(-π λ |v|² + 2π |Im z| |v|)`.
pub fn truncation_radius(a: &[f64], im_z_norm: f64, min_eig: f64, tol: Tolerance) -> Result<usize> {
    truncation_radius_capped(a, im_z_norm, min_eig, tol, DEFAULT_MAX_TERMS)
}

pub fn truncation_radius_capped(
    a: &[f64],
    im_z_norm: f64,
    min_eig: f64,
    tol: Tolerance,
    max_terms: usize,
) -> Result<usize> {
    if a.is_empty() {
        return Err(FqheError::InvalidInput("empty characteristic vector".into()));
    }
    if !(min_eig > 0.0) || !min_eig.is_finite() {
        return Err(FqheError::NonconvergentDomain(format!(
            "minimal eigenvalue {min_eig} of Im(Omega) must be positive"
        )));
    }
    if a.iter().any(|x| !x.is_finite()) || !im_z_norm.is_finite() || im_z_norm < 0.0 {
        return Err(FqheError::InvalidInput("non-finite truncation input".into()));
    }
    let g = a.len() as i32;
    let mut n = 0usize;
    loop {
        let points = (2.0 * n as f64 + 1.0).powi(g);
        if points > max_terms as f64 {
            return Err(FqheError::ToleranceUnachievable { tol: tol.abs_tol(), cap: max_terms });
        }
        if tail_bound(a, im_z_norm, min_eig, n) <= tol.abs_tol() {
            return Ok(n);
        }
        n += 1;
    }
}

// ---------------------------------------------------------------------------
// One-dimensional kernel

/// Summation layout for one series: the box `{k* + j : |j + δ| ≤ N}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPlan {
    /// Lattice index nearest to the envelope centre.
    pub center: Vec<i64>,
    /// `k* + a - v_c`, each entry in `[-1/2, 1/2]`.
    pub offset: Vec<f64>,
    /// Largest term magnitude allowed by the Gaussian envelope.
    pub peak: f64,
    pub radius: usize,
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(FqheError::InvalidInput("non-finite theta argument".into()))
    }
}

/// Envelope of the 1D series: (centre index, offset, peak).
fn plan_1d(a: f64, z: Complex64, t: f64) -> (i64, f64, f64) {
    let vc = -z.im / t;
    let k = (vc - a).round();
    let offset = k + a - vc;
    let peak = (PI * z.im * z.im / t).exp();
    (k as i64, offset, peak)
}

/// Index range `{j : |j + δ| ≤ N}`.
fn box_range(offset: f64, radius: usize) -> (i64, i64) {
    let n = radius as f64;
    ((-n - offset).ceil() as i64, (n - offset).floor() as i64)
}

/// Partial sum of the 1D series over the plan's box, walking outward from the
/// envelope centre with multiplicative term recurrences.
fn sum_1d(a: f64, b: f64, z: Complex64, tau: Complex64, center: i64, offset: f64, radius: usize) -> Complex64 {
    let (lo, hi) = box_range(offset, radius);
    if lo > hi {
        return Complex64::new(0.0, 0.0);
    }
    let zb = z + b;
    let v0 = center as f64 + a;
    let term0 = (I * PI * tau * v0 * v0 + 2.0 * I * PI * v0 * zb).exp();
    let q = (2.0 * I * PI * tau).exp();
    let mut up_ratio = (I * PI * tau * (2.0 * v0 + 1.0) + 2.0 * I * PI * zb).exp();
    let mut down_ratio = (I * PI * tau * (1.0 - 2.0 * v0) - 2.0 * I * PI * zb).exp();

    let mut acc = CompensatedSum::new();
    let mut up_term = term0;
    let mut down_term = term0;
    let mut j_up = 0i64;
    let mut j_down = 0i64;
    if (lo..=hi).contains(&0) {
        acc.add(term0);
    }
    // Alternate sides so terms enter in increasing distance from the centre.
    let up_first = offset < 0.0;
    loop {
        let can_up = j_up < hi;
        let can_down = j_down > lo;
        if !can_up && !can_down {
            break;
        }
        let order = if up_first { [true, false] } else { [false, true] };
        for go_up in order {
            if go_up && j_up < hi {
                up_term *= up_ratio;
                up_ratio *= q;
                j_up += 1;
                if j_up >= lo {
                    acc.add(up_term);
                }
            } else if !go_up && j_down > lo {
                down_term *= down_ratio;
                down_ratio *= q;
                j_down -= 1;
                if j_down <= hi {
                    acc.add(down_term);
                }
            }
        }
    }
    acc.value()
}

/// Core 1D evaluator; `tol_over_peak` is the tail budget in units of the
/// envelope peak.
fn eval_1d(a: f64, b: f64, z: Complex64, tau: Complex64, tol_over_peak: f64, max_terms: usize) -> Result<(Complex64, f64)> {
    if !(tau.im > 0.0) {
        return Err(FqheError::NonconvergentDomain(format!("Im(tau) = {} must be positive", tau.im)));
    }
    check_finite(&[a, b, z.re, z.im, tau.re])?;
    let t = tau.im;
    let (center, offset, peak) = plan_1d(a, z, t);
    if !peak.is_finite() {
        return Err(FqheError::Overflow);
    }
    let tol = Tolerance::new(tol_over_peak.max(f64::MIN_POSITIVE))?;
    let radius = truncation_radius_capped(&[offset], 0.0, t, tol, max_terms)?;
    let value = sum_1d(a, b, z, tau, center, offset, radius);
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(FqheError::Overflow);
    }
    Ok((value, peak))
}

/// `θ[a,b](z|τ)` with absolute error at most `tol`.
pub fn theta1d(ch: Characteristics1D, z: Complex64, tau: Complex64, tol: Tolerance) -> Result<Complex64> {
    check_finite(&[z.im, tau.im])?;
    if !(tau.im > 0.0) {
        return Err(FqheError::NonconvergentDomain(format!("Im(tau) = {} must be positive", tau.im)));
    }
    let (_, _, peak) = plan_1d(ch.a, z, tau.im);
    if !peak.is_finite() {
        return Err(FqheError::Overflow);
    }
    eval_1d(ch.a, ch.b, z, tau, tol.abs_tol() / peak, DEFAULT_MAX_TERMS).map(|(v, _)| v)
}

/// `θ[a,b](z|τ)` with the tail bounded by `rel` times the envelope peak.
///
/// This is the natural accuracy measure inside wave functions, where the
/// hermitian metric cancels the growth of the envelope.
pub fn theta1d_rel(ch: Characteristics1D, z: Complex64, tau: Complex64, rel: f64) -> Result<Complex64> {
    eval_1d(ch.a, ch.b, z, tau, rel, DEFAULT_MAX_TERMS).map(|(v, _)| v)
}

/// The odd theta function `ϑ(z) = θ[1/2,1/2](z|τ)`.
pub fn theta_odd(z: Complex64, tau: Complex64, tol: Tolerance) -> Result<Complex64> {
    theta1d(Characteristics1D::odd(), z, tau, tol)
}

pub fn theta_odd_rel(z: Complex64, tau: Complex64, rel: f64) -> Result<Complex64> {
    theta1d_rel(Characteristics1D::odd(), z, tau, rel)
}

/// Truncation plan the 1D kernel would use for the given inputs.
pub fn plan_theta1d(ch: Characteristics1D, z: Complex64, tau: Complex64, tol: Tolerance) -> Result<SeriesPlan> {
    if !(tau.im > 0.0) {
        return Err(FqheError::NonconvergentDomain(format!("Im(tau) = {} must be positive", tau.im)));
    }
    let (center, offset, peak) = plan_1d(ch.a, z, tau.im);
    let tol_rel = Tolerance::new((tol.abs_tol() / peak).max(f64::MIN_POSITIVE))?;
    let radius = truncation_radius(&[offset], 0.0, tau.im, tol_rel)?;
    Ok(SeriesPlan { center: vec![center], offset: vec![offset], peak, radius })
}

/// Partial sum of the 1D series over a box of the given radius around the
/// envelope centre.
pub fn theta1d_partial(ch: Characteristics1D, z: Complex64, tau: Complex64, radius: usize) -> Result<Complex64> {
    if !(tau.im > 0.0) {
        return Err(FqheError::NonconvergentDomain(format!("Im(tau) = {} must be positive", tau.im)));
    }
    let (center, offset, _) = plan_1d(ch.a, z, tau.im);
    Ok(sum_1d(ch.a, ch.b, z, tau, center, offset, radius))
}

// ---------------------------------------------------------------------------
// g-dimensional kernel

fn plan_g(a: &[f64], z: &[Complex64], pm: &PeriodMatrix) -> (Vec<i64>, Vec<f64>, Vec<f64>, f64) {
    let g = a.len();
    let y: Vec<f64> = z.iter().map(|w| w.im).collect();
    // v_c = -(Im Ω)^{-1} Y,  peak = exp(π Yᵀ (Im Ω)^{-1} Y)
    let mut vc = vec![0.0; g];
    for i in 0..g {
        vc[i] = -(0..g).map(|j| pm.im_inv[(i, j)] * y[j]).sum::<f64>();
    }
    let quad: f64 = -(0..g).map(|i| y[i] * vc[i]).sum::<f64>();
    let peak = (PI * quad.max(0.0)).exp();
    let center: Vec<i64> = (0..g).map(|i| (vc[i] - a[i]).round() as i64).collect();
    let offset: Vec<f64> = (0..g).map(|i| center[i] as f64 + a[i] - vc[i]).collect();
    (center, offset, vc, peak)
}

/// Indices of `lo..=hi` ordered by distance from `-offset`.
fn center_out(lo: i64, hi: i64, offset: f64) -> Vec<i64> {
    let mut idx: Vec<i64> = (lo..=hi).collect();
    idx.sort_by(|p, q| {
        (*p as f64 + offset)
            .abs()
            .partial_cmp(&(*q as f64 + offset).abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

fn sum_g(
    a: &[f64],
    b: &[f64],
    z: &[Complex64],
    pm: &PeriodMatrix,
    center: &[i64],
    offset: &[f64],
    vc: &[f64],
    radius: usize,
) -> Complex64 {
    let g = a.len();
    let omega = &pm.omega;
    let last = g - 1;
    let ranges: Vec<(i64, i64)> = offset.iter().map(|&o| box_range(o, radius)).collect();
    if ranges.iter().any(|(lo, hi)| lo > hi) {
        return Complex64::new(0.0, 0.0);
    }
    let outer: Vec<Vec<i64>> = (0..last)
        .map(|i| center_out(ranges[i].0, ranges[i].1, offset[i]))
        .collect();
    let zb: Vec<Complex64> = (0..g).map(|i| z[i] + b[i]).collect();
    let im_last_last = omega[(last, last)].im;
    let q = (2.0 * I * PI * omega[(last, last)]).exp();
    let (lo, hi) = ranges[last];

    let mut acc = CompensatedSum::new();
    let mut pos = vec![0usize; last];
    let mut v = vec![0.0; g];
    loop {
        for i in 0..last {
            v[i] = (center[i] + outer[i][pos[i]]) as f64 + a[i];
        }
        // Start the line at its own envelope maximum.
        let shift: f64 = (0..last).map(|i| omega[(last, i)].im * (v[i] - vc[i])).sum::<f64>();
        let line_center = vc[last] - shift / im_last_last;
        let j0 = ((line_center - center[last] as f64 - a[last]).round() as i64).clamp(lo, hi);
        v[last] = (center[last] + j0) as f64 + a[last];

        let mut exponent = Complex64::new(0.0, 0.0);
        for i in 0..g {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..g {
                row += omega[(i, j)] * v[j];
            }
            exponent += v[i] * (I * PI * row + 2.0 * I * PI * zb[i]);
        }
        let omega_v_last: Complex64 = (0..g).map(|j| omega[(last, j)] * v[j]).sum();
        let term0 = exponent.exp();
        acc.add(term0);
        let mut up_term = term0;
        let mut up_ratio = (I * PI * (2.0 * omega_v_last + omega[(last, last)]) + 2.0 * I * PI * zb[last]).exp();
        for _ in j0..hi {
            up_term *= up_ratio;
            up_ratio *= q;
            acc.add(up_term);
        }
        let mut down_term = term0;
        let mut down_ratio =
            (I * PI * (omega[(last, last)] - 2.0 * omega_v_last) - 2.0 * I * PI * zb[last]).exp();
        for _ in lo..j0 {
            down_term *= down_ratio;
            down_ratio *= q;
            acc.add(down_term);
        }

        // Odometer over the outer axes.
        let mut axis = 0;
        loop {
            if axis == last {
                return acc.value();
            }
            pos[axis] += 1;
            if pos[axis] < outer[axis].len() {
                break;
            }
            pos[axis] = 0;
            axis += 1;
        }
    }
}

fn check_g_inputs(a: &[f64], b: &[f64], z: &[Complex64], pm: &PeriodMatrix) -> Result<()> {
    let g = pm.dim();
    if a.len() != g || b.len() != g || z.len() != g {
        return Err(FqheError::InvalidInput(format!(
            "dimension mismatch: period matrix is {g}x{g}, characteristics {}/{}, argument {}",
            a.len(),
            b.len(),
            z.len()
        )));
    }
    check_finite(a)?;
    check_finite(b)?;
    let zs: Vec<f64> = z.iter().flat_map(|w| [w.re, w.im]).collect();
    check_finite(&zs)
}

fn eval_g(a: &[f64], b: &[f64], z: &[Complex64], pm: &PeriodMatrix, tol_over_peak: impl FnOnce(f64) -> f64) -> Result<Complex64> {
    check_g_inputs(a, b, z, pm)?;
    let (center, offset, vc, peak) = plan_g(a, z, pm);
    if !peak.is_finite() {
        return Err(FqheError::Overflow);
    }
    let tol = Tolerance::new(tol_over_peak(peak).max(f64::MIN_POSITIVE))?;
    let radius = truncation_radius(&offset, 0.0, pm.min_eig, tol)?;
    let value = sum_g(a, b, z, pm, &center, &offset, &vc, radius);
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(FqheError::Overflow);
    }
    Ok(value)
}

/// `Θ[a⃗,b⃗](z⃗|Ω)` with absolute error at most `tol`.
pub fn theta_g(a: &[f64], b: &[f64], z: &[Complex64], omega: &PeriodMatrix, tol: Tolerance) -> Result<Complex64> {
    eval_g(a, b, z, omega, |peak| tol.abs_tol() / peak)
}

/// `Θ[a⃗,b⃗](z⃗|Ω)` with the tail bounded by `rel` times the envelope peak.
pub fn theta_g_rel(a: &[f64], b: &[f64], z: &[Complex64], omega: &PeriodMatrix, rel: f64) -> Result<Complex64> {
    eval_g(a, b, z, omega, |_| rel)
}

/// Truncation plan the g-dimensional kernel would use.
pub fn plan_theta_g(a: &[f64], z: &[Complex64], omega: &PeriodMatrix, tol: Tolerance) -> Result<SeriesPlan> {
    let b = vec![0.0; a.len()];
    check_g_inputs(a, &b, z, omega)?;
    let (center, offset, _, peak) = plan_g(a, z, omega);
    let tol = Tolerance::new((tol.abs_tol() / peak).max(f64::MIN_POSITIVE))?;
    let radius = truncation_radius(&offset, 0.0, omega.min_eig, tol)?;
    Ok(SeriesPlan { center, offset, peak, radius })
}

/// Partial sum of the g-dimensional series over a box of the given radius.
pub fn theta_g_partial(a: &[f64], b: &[f64], z: &[Complex64], omega: &PeriodMatrix, radius: usize) -> Result<Complex64> {
    check_g_inputs(a, b, z, omega)?;
    let (center, offset, vc, _) = plan_g(a, z, omega);
    Ok(sum_g(a, b, z, omega, &center, &offset, &vc, radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Plain summation over |n| ≤ 30 in index order, independent of the
    /// kernel's centring and recurrences.
    fn oracle(a: f64, b: f64, z: Complex64, tau: Complex64) -> Complex64 {
        (-30..=30)
            .map(|n| {
                let v = n as f64 + a;
                (I * PI * tau * v * v + 2.0 * I * PI * v * (z + b)).exp()
            })
            .sum()
    }

    fn tol(x: f64) -> Tolerance {
        Tolerance::new(x).unwrap()
    }

    #[test]
    fn theta_00_at_origin_on_square_torus() {
        let expected = oracle(0.0, 0.0, c(0.0, 0.0), I);
        assert!((expected.re - 1.086_434_811_213_308).abs() < 1e-14);
        let v = theta1d(Characteristics1D::new(0.0, 0.0), c(0.0, 0.0), I, tol(1e-14)).unwrap();
        assert!((v - expected).norm() < 1e-14);
    }

    #[test]
    fn odd_theta_vanishes_at_origin() {
        let v = theta_odd(c(0.0, 0.0), I, tol(1e-14)).unwrap();
        assert!(v.norm() < 1e-14, "{v}");
    }

    #[test]
    fn odd_theta_is_odd() {
        let z = c(0.3, 0.2);
        let p = theta_odd(z, I, tol(1e-14)).unwrap();
        let m = theta_odd(-z, I, tol(1e-14)).unwrap();
        assert!((p + m).norm() < 1e-13);
    }

    #[test]
    fn second_quasi_period_law_of_odd_theta() {
        let z = c(0.1, 0.0);
        let lhs = theta_odd(z + I, I, tol(1e-14)).unwrap();
        let factor = (-2.0 * I * PI * (z + 0.5) - I * PI * I).exp();
        let rhs = factor * theta_odd(z, I, tol(1e-14)).unwrap();
        let direct = oracle(0.5, 0.5, z + I, I);
        assert!((lhs - direct).norm() < 1e-12);
        assert!((lhs - rhs).norm() < 1e-12 * (1.0 + factor.norm()));
    }

    #[test]
    fn integer_shift_with_zero_characteristic() {
        let tau = c(0.2, 1.1);
        let z = c(0.37, -0.21);
        let v0 = theta1d(Characteristics1D::new(0.0, 0.0), z, tau, tol(1e-14)).unwrap();
        let v1 = theta1d(Characteristics1D::new(0.0, 0.0), z + 1.0, tau, tol(1e-14)).unwrap();
        assert!((v0 - v1).norm() < 1e-13);
    }

    #[test]
    fn matches_oracle_across_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = rng.random_range(-1.5..1.5);
            let b = rng.random_range(-1.5..1.5);
            let tau = c(rng.random_range(-0.5..0.5), rng.random_range(0.5..2.0));
            let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let expect = oracle(a, b, z, tau);
            let got = theta1d(Characteristics1D::new(a, b), z, tau, tol(1e-12)).unwrap();
            assert!((got - expect).norm() < 2e-12, "a={a} b={b} z={z} tau={tau}: {got} vs {expect}");
        }
    }

    #[test]
    fn rejects_lower_half_plane() {
        let err = theta1d(Characteristics1D::new(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0), tol(1e-10));
        assert!(matches!(err, Err(FqheError::NonconvergentDomain(_))));
        let err = theta1d(Characteristics1D::new(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), tol(1e-10));
        assert!(matches!(err, Err(FqheError::NonconvergentDomain(_))));
    }

    #[test]
    fn tiny_tolerance_with_tiny_cap_is_unachievable() {
        let err = truncation_radius_capped(&[0.0], 0.0, 1e-4, tol(1e-15), 11);
        assert!(matches!(err, Err(FqheError::ToleranceUnachievable { .. })));
    }

    #[test]
    fn truncation_radius_examples() {
        let n = truncation_radius(&[0.0], 0.0, 1.0, tol(1e-12)).unwrap();
        assert!(n <= 6, "{n}");
        let direct_n = theta1d_partial(Characteristics1D::new(0.0, 0.0), c(0.0, 0.0), I, n).unwrap();
        let direct_n5 = theta1d_partial(Characteristics1D::new(0.0, 0.0), c(0.0, 0.0), I, n + 5).unwrap();
        assert!((direct_n - direct_n5).norm() <= 1e-12);

        assert_eq!(truncation_radius(&[0.0], 0.0, 1.0, tol(1.0)).unwrap(), 0);

        let mut prev = 0;
        for k in 1..=14 {
            let n = truncation_radius(&[0.0], 0.0, 0.01, tol(10f64.powi(-k))).unwrap();
            assert!(n >= prev);
            prev = n;
        }
        // sqrt(-ln tol / (π λ)) scaling
        assert!((25..=40).contains(&prev), "{prev}");
    }

    #[test]
    fn origin_centred_radius_accounts_for_im_z() {
        let small = truncation_radius(&[0.0], 0.0, 1.0, tol(1e-12)).unwrap();
        let shifted = truncation_radius(&[0.0], 3.0, 1.0, tol(1e-12)).unwrap();
        assert!(shifted > small);
        // The certificate holds for an origin-centred sum of a shifted argument.
        let tau = I;
        let z = c(0.1, 3.0);
        let sum_to = |n: i64| -> Complex64 {
            (-n..=n)
                .map(|k| {
                    let v = k as f64;
                    (I * PI * tau * v * v + 2.0 * I * PI * v * z).exp()
                })
                .sum()
        };
        let diff = (sum_to(shifted as i64) - sum_to(shifted as i64 + 3)).norm();
        assert!(diff <= 1e-12, "{diff}");
    }

    #[test]
    fn g1_reduces_to_1d() {
        let pm = PeriodMatrix::scalar(I).unwrap();
        let z = c(0.21, 0.4);
        let v1 = theta1d(Characteristics1D::new(0.3, 0.1), z, I, tol(1e-14)).unwrap();
        let vg = theta_g(&[0.3], &[0.1], &[z], &pm, tol(1e-14)).unwrap();
        assert!((v1 - vg).norm() < 1e-13);
    }

    #[test]
    fn diagonal_period_matrix_factorizes() {
        let mut om = DMatrix::from_element(2, 2, c(0.0, 0.0));
        om[(0, 0)] = I;
        om[(1, 1)] = I;
        let pm = PeriodMatrix::new(om).unwrap();
        let v = theta_g(&[0.0, 0.0], &[0.0, 0.0], &[c(0.0, 0.0); 2], &pm, tol(1e-14)).unwrap();
        let one = oracle(0.0, 0.0, c(0.0, 0.0), I);
        assert!((v - one * one).norm() < 1e-13);
        assert!((v.re - 1.180_340_599_016_096).abs() < 1e-12, "{v}");

        let z = [c(0.3, 0.2), c(-0.1, 0.5)];
        let v = theta_g(&[0.2, 0.7], &[0.1, 0.4], &z, &pm, tol(1e-14)).unwrap();
        let f = oracle(0.2, 0.1, z[0], I) * oracle(0.7, 0.4, z[1], I);
        assert!((v - f).norm() < 1e-12);
    }

    #[test]
    fn integer_shift_in_g_dims() {
        let mut om = DMatrix::from_element(2, 2, c(0.0, 0.0));
        om[(0, 0)] = I;
        om[(1, 1)] = I;
        let pm = PeriodMatrix::new(om).unwrap();
        let z = [c(0.3, 0.2), c(-0.1, 0.5)];
        let v0 = theta_g(&[0.0, 0.0], &[0.3, 0.1], &z, &pm, tol(1e-14)).unwrap();
        let v1 = theta_g(&[0.0, 0.0], &[0.3, 0.1], &[z[0] + 1.0, z[1]], &pm, tol(1e-14)).unwrap();
        assert!((v0 - v1).norm() < 1e-13);
    }

    #[test]
    fn coupled_period_matrix_matches_brute_force() {
        let tau = c(0.1, 0.9);
        let k = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let pm = PeriodMatrix::scaled(tau, &k).unwrap();
        let a = [1.0 / 3.0, 2.0 / 3.0];
        let b = [0.25, -0.1];
        let z = [c(0.4, 0.7), c(-0.2, 1.3)];
        let mut brute = Complex64::new(0.0, 0.0);
        for n0 in -25..=25 {
            for n1 in -25..=25 {
                let v = [n0 as f64 + a[0], n1 as f64 + a[1]];
                let mut e = Complex64::new(0.0, 0.0);
                for i in 0..2 {
                    for j in 0..2 {
                        e += I * PI * v[i] * pm.omega()[(i, j)] * v[j];
                    }
                    e += 2.0 * I * PI * v[i] * (z[i] + b[i]);
                }
                brute += e.exp();
            }
        }
        let got = theta_g(&a, &b, &z, &pm, tol(1e-12)).unwrap();
        assert!((got - brute).norm() < 1e-11 * brute.norm().max(1.0), "{got} vs {brute}");
    }

    #[test]
    fn rejects_bad_period_matrices() {
        let om = DMatrix::from_row_slice(2, 2, &[I, c(0.1, 0.0), c(0.2, 0.0), I]);
        assert!(matches!(PeriodMatrix::new(om), Err(FqheError::InvalidInput(_))));
        let om = DMatrix::from_row_slice(2, 2, &[I, c(0.0, 2.0), c(0.0, 2.0), I]);
        assert!(matches!(PeriodMatrix::new(om), Err(FqheError::NonconvergentDomain(_))));
    }
}
