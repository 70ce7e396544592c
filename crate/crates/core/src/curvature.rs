//! Bott–Chern curvature of the magnetic bundle from Gram-matrix fields
//! `C(ξ)` sampled over the dual torus `ξ = aτ + b`.
//!
//! Derivatives are taken by finite differences in `(a, b)`. In `b` the field
//! is periodic up to the diagonal frame twist `C_kl(b+1) = e^{2πi(φ_k-φ_l)}C_kl(b)`.
//! In `a` it is not periodic, so the field stores halo rows beyond `[0, 1]`
//! (the Gram matrices are defined for every `ξ`) and centred stencils are used
//! everywhere; with no halo the stencils become one-sided at the seam.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{FqheError, Result};
use crate::integration::{GridSpec, Integrator};
use crate::laughlin::{hr_gram, one_particle_gram, OneLayerModel};
use crate::geometry::LineBundleSpec;
use crate::theta::TorusParams;
use crate::wen::{center_mass_gram, enumerate_pi, enumerate_pi_matrix, kappa_closed, lattice, KvwModel, WenDatum};

pub const DEFAULT_ORDER: usize = 8;
pub const DEFAULT_RICHARDSON_TOL: f64 = 1e-6;

/// Where the Gram matrices of a field came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ClosedForm,
    Quadrature,
    Qmc,
}

impl Provenance {
    pub fn name(&self) -> &'static str {
        match self {
            Provenance::ClosedForm => "closed-form",
            Provenance::Quadrature => "quadrature",
            Provenance::Qmc => "qmc",
        }
    }
}

/// Hermitian positive definite Gram matrices on a uniform `(a, b)` grid.
///
/// Rows `i ∈ [-halo, na + halo]` sit at `a = i/na`; columns `j ∈ [0, nb)` at
/// `b = j/nb`.
#[derive(Debug, Clone)]
pub struct GramField {
    pub torus: TorusParams,
    pub na: usize,
    pub nb: usize,
    pub halo: usize,
    /// Frame phases `φ_k`.
    pub phases: Vec<f64>,
    pub provenance: Provenance,
    /// Largest integration error estimate over all samples.
    pub max_error: f64,
    matrices: Vec<DMatrix<Complex64>>,
}

impl GramField {
    /// Samples `f(a, b)` on the grid; `f` returns a Gram matrix and its error.
    pub fn from_fn<F>(
        torus: TorusParams,
        na: usize,
        nb: usize,
        halo: usize,
        phases: Vec<f64>,
        provenance: Provenance,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<(DMatrix<Complex64>, f64)> + Sync,
    {
        if na < 2 || nb < 2 {
            return Err(FqheError::InvalidInput(format!("field grid needs at least 2×2 points, got {na}×{nb}")));
        }
        let rows = na + 1 + 2 * halo;
        let samples: Vec<Result<(DMatrix<Complex64>, f64)>> = (0..rows * nb)
            .into_par_iter()
            .map(|idx| {
                let i = (idx / nb) as isize - halo as isize;
                let j = idx % nb;
                f(i as f64 / na as f64, j as f64 / nb as f64)
            })
            .collect();
        let mut matrices = Vec::with_capacity(samples.len());
        let mut max_error: f64 = 0.0;
        for s in samples {
            let (m, e) = s?;
            if m.nrows() != phases.len() || m.ncols() != phases.len() {
                return Err(FqheError::InvalidInput(format!("field sample is {}×{}, expected rank {}", m.nrows(), m.ncols(), phases.len())));
            }
            check_hpd(&m)?;
            max_error = max_error.max(e);
            matrices.push(m);
        }
        Ok(Self { torus, na, nb, halo, phases, provenance, max_error, matrices })
    }

    pub fn rank(&self) -> usize {
        self.phases.len()
    }

    pub fn a(&self, i: isize) -> f64 {
        i as f64 / self.na as f64
    }

    pub fn b(&self, j: isize) -> f64 {
        j as f64 / self.nb as f64
    }

    /// Lowest and highest stored row index.
    pub fn row_range(&self) -> (isize, isize) {
        (-(self.halo as isize), (self.na + self.halo) as isize)
    }

    /// `C(a_i, b_j)`, wrapping `j` through the frame twist.
    pub fn get(&self, i: isize, j: isize) -> DMatrix<Complex64> {
        let (lo, hi) = self.row_range();
        assert!(lo <= i && i <= hi, "row {i} outside stored range {lo}..={hi}");
        let q = j.div_euclid(self.nb as isize);
        let jj = j.rem_euclid(self.nb as isize) as usize;
        let m = &self.matrices[(i - lo) as usize * self.nb + jj];
        if q == 0 {
            return m.clone();
        }
        let phases = &self.phases;
        DMatrix::from_fn(m.nrows(), m.ncols(), |k, l| {
            m[(k, l)] * Complex64::from_polar(1.0, 2.0 * PI * q as f64 * (phases[k] - phases[l]))
        })
    }

    /// The field of the frame rescaled by `λ`: `C ↦ |λ|² C`.
    pub fn scaled(&self, lambda: Complex64) -> Self {
        let s = lambda.norm_sqr();
        let mut out = self.clone();
        for m in &mut out.matrices {
            *m *= Complex64::new(s, 0.0);
        }
        out.max_error *= s;
        out
    }

    /// Largest `scalar_residual` over all in-domain samples.
    pub fn scalar_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..=self.na as isize {
            for j in 0..self.nb as isize {
                worst = worst.max(matrix_scalar_residual(&self.get(i, j)));
            }
        }
        worst
    }
}

fn check_hpd(m: &DMatrix<Complex64>) -> Result<()> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let asym = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if asym > 1e-10 * scale {
        return Err(FqheError::NotPositiveDefinite(format!("field sample is not hermitian (defect {asym:e})")));
    }
    let min = m.clone().symmetric_eigenvalues().min();
    if !(min > 0.0) {
        return Err(FqheError::NotPositiveDefinite(format!("field sample has smallest eigenvalue {min:e}")));
    }
    Ok(())
}

/// `max(off-diagonal, diagonal spread) / |mean diagonal|`.
pub fn matrix_scalar_residual(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let mean: Complex64 = (0..n).map(|i| m[(i, i)]).sum::<Complex64>() / n as f64;
    let mut worst: f64 = 0.0;
    for p in 0..n {
        for q in 0..n {
            let target = if p == q { mean } else { Complex64::new(0.0, 0.0) };
            worst = worst.max((m[(p, q)] - target).norm());
        }
    }
    if mean.norm() == 0.0 {
        worst
    } else {
        worst / mean.norm()
    }
}

/// Models whose Gram fields can be sampled.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    /// `e^{αa²}·I_rank`, a synthetic profile.
    ScalarProfile { rank: usize, alpha: f64 },
    /// Basis of `H⁰(L_{k,ξ})`.
    OneParticle { k: i64 },
    /// Haldane–Rezayi functions, `m` filling, `n` particles.
    OneLayer { m: usize, n: usize },
    /// Keski-Vakkuri–Wen functions on the slice `ζ⃗ = ξe⃗`.
    Multilayer { datum: WenDatum },
    /// Centre-of-mass theta basis with `ξ⃗ = ξe⃗`.
    CenterMass { k: Vec<Vec<i64>> },
}

/// `(e⃗, K⁻¹e⃗)`.
fn inverse_form_sum(k: &[Vec<i64>]) -> f64 {
    let delta = lattice::det_bareiss(k) as f64;
    lattice::adjugate(k).iter().flatten().map(|&x| x as f64).sum::<f64>() / delta
}

impl FieldModel {
    pub fn rank(&self) -> Result<usize> {
        Ok(self.phases()?.len())
    }

    /// Frame phases `φ` under `ξ ↦ ξ + 1`.
    pub fn phases(&self) -> Result<Vec<f64>> {
        Ok(match self {
            FieldModel::ScalarProfile { rank, .. } => vec![0.0; *rank],
            FieldModel::OneParticle { k } => (0..*k).map(|j| j as f64 / *k as f64).collect(),
            FieldModel::OneLayer { m, .. } => (0..*m).map(|j| j as f64 / *m as f64).collect(),
            FieldModel::Multilayer { datum } => enumerate_pi(datum).iter().map(|c| c.trace()).collect(),
            FieldModel::CenterMass { k } => enumerate_pi_matrix(k)?.iter().map(|c| c.trace()).collect(),
        })
    }

    /// Exponent `α` of the scalar profile `e^{αa²}` predicted for the model.
    pub fn profile_alpha(&self, t: f64) -> Result<f64> {
        Ok(match self {
            FieldModel::ScalarProfile { alpha, .. } => *alpha,
            FieldModel::OneParticle { k } => 2.0 * PI * t / *k as f64,
            FieldModel::OneLayer { m, .. } => 2.0 * PI * t / *m as f64,
            FieldModel::Multilayer { datum } => 2.0 * PI * t * datum.n_over_d(),
            FieldModel::CenterMass { k } => {
                lattice::is_positive_definite(k).then_some(()).ok_or_else(|| FqheError::InvalidInput("K is not positive definite".into()))?;
                2.0 * PI * t * inverse_form_sum(k)
            }
        })
    }

    /// Predicted trace coefficient of `dξ∧dξ̄`: `-rank·α/(2t²)`.
    pub fn expected_trace(&self, t: f64) -> Result<f64> {
        Ok(-(self.rank()? as f64) * self.profile_alpha(t)? / (2.0 * t * t))
    }

    /// Predicted degree `(t/π)·trace`.
    pub fn expected_degree(&self, t: f64) -> Result<f64> {
        Ok(self.expected_trace(t)? * t / PI)
    }

    /// Closed-form Gram matrix at `ξ = aτ + b` (up to a constant factor for
    /// the many-body models, whose overall normalization is not known).
    pub fn closed_form(&self, torus: &TorusParams, a: f64) -> Result<DMatrix<Complex64>> {
        let t = torus.t();
        let rank = self.rank()?;
        let value = match self {
            FieldModel::OneParticle { k } => (1.0 / (2.0 * *k as f64 * t)).sqrt() * (self.profile_alpha(t)? * a * a).exp(),
            FieldModel::CenterMass { k } => kappa_closed(k, &vec![a; k.len()], t)?.value,
            _ => (self.profile_alpha(t)? * a * a).exp(),
        };
        Ok(DMatrix::from_diagonal_element(rank, rank, Complex64::new(value, 0.0)))
    }

    /// Integrated Gram matrix and its error estimate.
    pub fn integrated(&self, torus: &TorusParams, a: f64, b: f64, integrator: &Integrator, rel_tol: f64) -> Result<(DMatrix<Complex64>, f64)> {
        let grid_only = |dims: usize| -> Result<GridSpec> {
            match *integrator {
                Integrator::Grid { points_per_axis, cap } => GridSpec::with_cap(points_per_axis, dims, cap),
                Integrator::Qmc { .. } => Err(FqheError::InvalidInput("this model is integrated on a grid only".into())),
            }
        };
        let g = match self {
            FieldModel::ScalarProfile { .. } => return Ok((self.closed_form(torus, a)?, 0.0)),
            FieldModel::OneParticle { k } => one_particle_gram(&LineBundleSpec::new(*k, a, b), torus, grid_only(2)?, rel_tol)?,
            FieldModel::OneLayer { m, n } => hr_gram(&OneLayerModel::new(*m, *n, *torus, a, b)?, integrator, rel_tol)?,
            FieldModel::Multilayer { datum } => {
                let kvw = KvwModel::new(datum.clone(), *torus)?;
                kvw.gram(a, b, &enumerate_pi(datum), integrator, rel_tol)?
            }
            FieldModel::CenterMass { k } => {
                let g = k.len();
                center_mass_gram(k, torus, &vec![a; g], &vec![b; g], grid_only(2 * g)?, rel_tol)?
            }
        };
        Ok((g.matrix, g.error_estimate))
    }
}

/// How the field's matrices are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldBackend {
    ClosedForm,
    Integrated(Integrator),
}

pub fn gram_field(
    model: &FieldModel,
    backend: FieldBackend,
    torus: TorusParams,
    na: usize,
    nb: usize,
    halo: usize,
    rel_tol: f64,
) -> Result<GramField> {
    let phases = model.phases()?;
    match backend {
        FieldBackend::ClosedForm => GramField::from_fn(torus, na, nb, halo, phases, Provenance::ClosedForm, |a, _| {
            Ok((model.closed_form(&torus, a)?, 0.0))
        }),
        FieldBackend::Integrated(integrator) => {
            let provenance = match integrator {
                Integrator::Grid { .. } => Provenance::Quadrature,
                Integrator::Qmc { .. } => Provenance::Qmc,
            };
            GramField::from_fn(torus, na, nb, halo, phases, provenance, |a, b| model.integrated(&torus, a, b, &integrator, rel_tol))
        }
    }
}

/// Finite-difference weights for the `deriv`-th derivative at `x0` from
/// values at `nodes` (Fornberg's recursion).
pub fn fornberg_weights(x0: f64, nodes: &[f64], deriv: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; deriv + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[deriv]).collect()
}

/// A stencil: integer offsets from the evaluation index and their weights.
#[derive(Debug, Clone, PartialEq)]
struct Stencil {
    offsets: Vec<isize>,
    weights: Vec<f64>,
}

/// Stencil of accuracy `order` for derivative `deriv` at index `i`, spacing
/// `stride` grid steps of size `h`, using only indices within `[lo, hi]`.
fn stencil(i: isize, lo: isize, hi: isize, stride: isize, order: usize, deriv: usize, h: f64) -> Result<Stencil> {
    if deriv == 0 {
        return Ok(Stencil { offsets: vec![0], weights: vec![1.0] });
    }
    let r = (order / 2) as isize;
    let (start, npts) = if i - r * stride >= lo && i + r * stride <= hi {
        (i - r * stride, 2 * r as usize + 1)
    } else {
        // One-sided: one extra node keeps the second derivative at `order`.
        let npts = order + deriv;
        let span = stride * (npts as isize - 1);
        if hi - lo < span {
            return Err(FqheError::InvalidInput(format!("field has too few rows for an order-{order} stencil")));
        }
        ((i - span / 2).clamp(lo, hi - span), npts)
    };
    let offsets: Vec<isize> = (0..npts as isize).map(|p| start + p * stride - i).collect();
    let nodes: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
    let scale = h.powi(deriv as i32);
    let weights = fornberg_weights(0.0, &nodes, deriv).into_iter().map(|w| w / scale).collect();
    Ok(Stencil { offsets, weights })
}

/// Options for the finite-difference curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureOptions {
    /// Accuracy order of the stencils (even, 2..=12).
    pub order: usize,
    /// Allowed relative error implied by the step-`h` / step-`2h` comparison.
    pub richardson_tol: f64,
    /// Absolute floor for the relative comparison (flat fields).
    pub richardson_floor: f64,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        Self { order: DEFAULT_ORDER, richardson_tol: DEFAULT_RICHARDSON_TOL, richardson_floor: 1e-9 }
    }
}

impl CurvatureOptions {
    fn check(&self) -> Result<()> {
        if self.order < 2 || self.order > 12 || !self.order.is_multiple_of(2) {
            return Err(FqheError::InvalidInput(format!("stencil order must be even in 2..=12, got {}", self.order)));
        }
        if !(self.richardson_tol > 0.0) {
            return Err(FqheError::InvalidInput("Richardson tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Halo rows needed for centred stencils at both steps everywhere.
    pub fn halo(&self) -> usize {
        self.order
    }
}

/// Curvature at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePoint {
    /// Coefficient of `dξ∧dξ̄`.
    pub matrix: DMatrix<Complex64>,
    /// Relative error implied by comparing steps `h` and `2h`.
    pub richardson_error: f64,
}

fn curvature_at(field: &GramField, i: isize, j: isize, stride: isize, order: usize) -> Result<DMatrix<Complex64>> {
    let (lo, hi) = field.row_range();
    let ha = 1.0 / field.na as f64;
    let hb = 1.0 / field.nb as f64;
    let unbounded = (isize::MIN / 4, isize::MAX / 4);
    let da = |deriv| stencil(i, lo, hi, stride, order, deriv, ha);
    let db = |deriv| stencil(j, unbounded.0, unbounded.1, stride, order, deriv, hb);
    let n = field.rank();
    let zero = DMatrix::<Complex64>::zeros(n, n);

    let apply = |sa: &Stencil, sb: &Stencil| {
        let mut acc = zero.clone();
        for (oa, wa) in sa.offsets.iter().zip(&sa.weights) {
            for (ob, wb) in sb.offsets.iter().zip(&sb.weights) {
                let w = wa * wb;
                if w != 0.0 {
                    acc += field.get(i + oa, j + ob) * Complex64::new(w, 0.0);
                }
            }
        }
        acc
    };
    let (a0, a1, a2) = (da(0)?, da(1)?, da(2)?);
    let (b0, b1, b2) = (db(0)?, db(1)?, db(2)?);
    let c = field.get(i, j);
    let c_a = apply(&a1, &b0);
    let c_b = apply(&a0, &b1);
    let c_aa = apply(&a2, &b0);
    let c_bb = apply(&a0, &b2);
    let c_ab = apply(&a1, &b1);

    let tau = field.torus.tau();
    let d = tau - tau.conj();
    // ∂_ξ = (∂_a - τ̄∂_b)/D, ∂_ξ̄ = (-∂_a + τ∂_b)/D with D = τ - τ̄.
    let c_xi = (&c_a - &c_b * tau.conj()) / d;
    let c_xibar = (-&c_a + &c_b * tau) / d;
    let c_xixibar = (-c_aa + c_ab * (tau + tau.conj()) - c_bb * Complex64::new(tau.norm_sqr(), 0.0)) / (d * d);
    let inv = c
        .try_inverse()
        .ok_or_else(|| FqheError::NotPositiveDefinite("singular Gram matrix in the field".into()))?;
    // ∂̄(∂C·C⁻¹) = -[C_ξξ̄C⁻¹ - C_ξC⁻¹C_ξ̄C⁻¹] dξ∧dξ̄
    Ok(-(&c_xixibar * &inv - &c_xi * &inv * &c_xibar * &inv))
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Curvature coefficient of `dξ∧dξ̄` at row `i`, column `j`, with a
/// Richardson check between steps `h` and `2h`.
pub fn bott_chern_curvature(field: &GramField, i: isize, j: isize, opts: &CurvatureOptions) -> Result<CurvaturePoint> {
    opts.check()?;
    if field.provenance == Provenance::Qmc {
        return Err(FqheError::InvalidInput(
            "Monte Carlo noise makes finite-difference curvature meaningless; use the profile fit".into(),
        ));
    }
    let fine = curvature_at(field, i, j, 1, opts.order)?;
    let coarse = curvature_at(field, i, j, 2, opts.order)?;
    let discrepancy = max_abs(&(&fine - &coarse)) / max_abs(&fine).max(opts.richardson_floor);
    let amplification = 2f64.powi(opts.order as i32) - 1.0;
    let richardson_error = discrepancy / amplification;
    if richardson_error > opts.richardson_tol {
        return Err(FqheError::GridTooCoarse { discrepancy, allowed: opts.richardson_tol * amplification });
    }
    Ok(CurvaturePoint { matrix: fine, richardson_error })
}

/// How the report's curvature was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvatureBackend {
    FiniteDifference,
    ProfileFit,
}

impl CurvatureBackend {
    pub fn name(&self) -> &'static str {
        match self {
            CurvatureBackend::FiniteDifference => "finite-difference",
            CurvatureBackend::ProfileFit => "profile-fit",
        }
    }
}

/// Least-squares fit `log(mean diagonal) ≈ α a² + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileFit {
    pub alpha: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    pub backend: CurvatureBackend,
    pub provenance: Provenance,
    pub rank: usize,
    /// Stencil order (finite differences only).
    pub order: usize,
    /// `(a, b)` of each evaluated point, row-major over `a`.
    pub points: Vec<(f64, f64)>,
    /// Coefficient of `dξ∧dξ̄` at each point.
    pub coefficients: Vec<DMatrix<Complex64>>,
    pub trace: Vec<Complex64>,
    pub trace_mean: f64,
    /// Largest `max(off-diagonal, diagonal spread) / |mean diagonal|` of the
    /// curvature over all points.
    pub flatness_residual: f64,
    /// Same measure for the Gram matrices themselves.
    pub gram_scalar_residual: f64,
    pub degree: f64,
    pub slope: f64,
    /// Largest relative Richardson error (finite differences only).
    pub richardson_error: f64,
    /// `∫_E dξ∧dξ̄` over the sampled domain, `-2it` in the standard
    /// orientation.
    pub orientation_integral: Complex64,
    pub fit: Option<ProfileFit>,
}

/// Trapezoid weights on `i = 0..=na` (in `a`) times the periodic rule in `b`.
fn trapezoid_weight(i: usize, na: usize, nb: usize) -> f64 {
    let wa = if i == 0 || i == na { 0.5 } else { 1.0 } / na as f64;
    wa / nb as f64
}

/// `∫_E dξ∧dξ̄`: `dξ∧dξ̄ = -2i dx∧dy` and `dx∧dy = t da∧db` on `E`.
fn orientation_integral(field: &GramField) -> Complex64 {
    let mut s = 0.0;
    for i in 0..=field.na {
        for _ in 0..field.nb {
            s += trapezoid_weight(i, field.na, field.nb);
        }
    }
    Complex64::new(0.0, -2.0 * field.torus.t() * s)
}

fn assemble(
    field: &GramField,
    backend: CurvatureBackend,
    order: usize,
    points: Vec<(f64, f64)>,
    coefficients: Vec<DMatrix<Complex64>>,
    richardson_error: f64,
    fit: Option<ProfileFit>,
) -> CurvatureReport {
    let trace: Vec<Complex64> = coefficients.iter().map(|m| m.trace()).collect();
    let mut integral = 0.0;
    for i in 0..=field.na {
        for j in 0..field.nb {
            integral += trapezoid_weight(i, field.na, field.nb) * trace[i * field.nb + j].re;
        }
    }
    let t = field.torus.t();
    let flatness_residual = coefficients.iter().map(matrix_scalar_residual).fold(0.0, f64::max);
    // degree = (i/2π) ∫_E tr K dξ∧dξ̄ = (i/2π)(-2it)·mean = (t/π)·mean
    let degree = integral * t / PI;
    CurvatureReport {
        backend,
        provenance: field.provenance,
        rank: field.rank(),
        order,
        points,
        coefficients,
        trace,
        trace_mean: integral,
        flatness_residual,
        gram_scalar_residual: field.scalar_residual(),
        degree,
        slope: degree / field.rank() as f64,
        richardson_error,
        orientation_integral: orientation_integral(field),
        fit,
    }
}

fn domain_points(field: &GramField) -> Vec<(isize, isize)> {
    (0..=field.na as isize).flat_map(|i| (0..field.nb as isize).map(move |j| (i, j))).collect()
}

/// Finite-difference curvature over `a ∈ [0,1]`, `b ∈ [0,1)`, its trace form
/// and the degree.
pub fn trace_form_and_degree(field: &GramField, opts: &CurvatureOptions) -> Result<CurvatureReport> {
    let idx = domain_points(field);
    let pts: Vec<Result<CurvaturePoint>> = idx.par_iter().map(|&(i, j)| bott_chern_curvature(field, i, j, opts)).collect();
    let mut coefficients = Vec::with_capacity(pts.len());
    let mut worst: f64 = 0.0;
    for p in pts {
        let p = p?;
        worst = worst.max(p.richardson_error);
        coefficients.push(p.matrix);
    }
    let points = idx.iter().map(|&(i, j)| (field.a(i), field.b(j))).collect();
    Ok(assemble(field, CurvatureBackend::FiniteDifference, opts.order, points, coefficients, worst, None))
}

/// Fits `log(mean diagonal)`, averaged over `b`, to `α a² + c`.
pub fn fit_profile(field: &GramField) -> Result<ProfileFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..=field.na as isize {
        let mut s = 0.0;
        for j in 0..field.nb as isize {
            let m = field.get(i, j);
            s += m.diagonal().iter().map(|z| z.re).sum::<f64>() / m.nrows() as f64;
        }
        let a = field.a(i);
        xs.push(a * a);
        ys.push((s / field.nb as f64).ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(FqheError::InvalidInput("profile fit needs at least two distinct a values".into()));
    }
    let alpha = sxy / sxx;
    let intercept = my - alpha * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - alpha * x - intercept).powi(2)).sum();
    Ok(ProfileFit { alpha, intercept, residual: (rss / n).sqrt() })
}

/// Curvature from the fitted profile: `-α/(2t²)·I` at every point. Suited to
/// noisy (Monte Carlo) fields.
pub fn profile_curvature(field: &GramField) -> Result<CurvatureReport> {
    let fit = fit_profile(field)?;
    let t = field.torus.t();
    let n = field.rank();
    let coef = DMatrix::from_diagonal_element(n, n, Complex64::new(-fit.alpha / (2.0 * t * t), 0.0));
    let idx = domain_points(field);
    let points = idx.iter().map(|&(i, j)| (field.a(i), field.b(j))).collect();
    let coefficients = vec![coef; idx.len()];
    Ok(assemble(field, CurvatureBackend::ProfileFit, 0, points, coefficients, 0.0, Some(fit)))
}
