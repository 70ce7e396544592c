//! The acceptance criteria as runnable checks, shared by the `verify`
//! subcommand and the acceptance test target.

use std::f64::consts::PI;
use std::fmt;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curvature::{gram_field, trace_form_and_degree, CurvatureOptions, FieldBackend, FieldModel};
use crate::error::Result;
use crate::geometry::LineBundleSpec;
use crate::integration::{GridSpec, Integrator};
use crate::laughlin::{
    estimate_mu, hr_gram, manybody_inner, one_particle_gram, one_particle_norm_sq_closed, slater_norm_closed,
    OneLayerModel, OneLayerState, DEFAULT_REL_TOL,
};
use crate::theta::{
    plan_theta1d, plan_theta_g, theta1d, theta1d_partial, theta_g, theta_g_partial, Characteristics1D, PeriodMatrix,
    Tolerance, TorusParams,
};
use crate::wen::{center_mass_gram, enumerate_pi, kappa_closed, validate_wen};

const REL: f64 = DEFAULT_REL_TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} ({}): {} [{:.2} s] {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

pub const CRITERIA: [(u8, &str); 8] = [
    (1, "one-particle orthonormality"),
    (2, "Slater norm"),
    (3, "Slater/theta-product proportionality"),
    (4, "Haldane-Rezayi structure"),
    (5, "Wen datum arithmetic"),
    (6, "centre-of-mass Gram matrix"),
    (7, "curvature and degree"),
    (8, "theta truncation certificate"),
];

/// Runs one criterion; numerical failures count as FAIL with the error text.
pub fn run_criterion(id: u8) -> CriterionOutcome {
    let name = CRITERIA.iter().find(|(i, _)| *i == id).map_or("unknown", |(_, n)| n);
    let start = Instant::now();
    let result = match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (passed, detail) = result.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionOutcome { id, name, passed, detail, elapsed: start.elapsed() }
}

pub fn run_all() -> Vec<CriterionOutcome> {
    CRITERIA.iter().map(|(id, _)| run_criterion(*id)).collect()
}

type Check = Result<(bool, String)>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Max entrywise deviation of the N = 64 one-particle Gram matrix from
/// `√(1/2kt)·e^{2πta²/k}·I`.
pub fn criterion_1() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in [1i64, 2, 3, 5] {
        for tau in [c(0.0, 1.0), c(0.3, 0.8)] {
            let torus = TorusParams::new(tau)?;
            for _ in 0..3 {
                let (a, b) = (rng.random_range(-0.5..0.5), rng.random_range(0.0..1.0));
                let g = one_particle_gram(&LineBundleSpec::new(k, a, b), &torus, GridSpec::new(64, 2)?, REL)?;
                worst = worst.max(g.max_deviation_from_scalar(one_particle_norm_sq_closed(k, torus.t(), a)));
            }
        }
    }
    Ok((worst <= 1e-9, format!("max entrywise error {worst:.3e} (limit 1e-9) over 24 cases")))
}

/// Slater norm by grid quadrature (n = 2) and by QMC (n = 3).
pub fn criterion_2() -> Check {
    let torus = TorusParams::square();
    let t = torus.t();
    let norm2 = |a: f64| -> Result<f64> {
        let model = OneLayerModel::new(1, 2, torus, a, 0.1)?;
        let r = manybody_inner(&model, OneLayerState::Slater, OneLayerState::Slater, &Integrator::grid(32), REL)?;
        Ok(r.value.re.sqrt())
    };
    let n0 = norm2(0.0)?;
    let n3 = norm2(0.3)?;
    let e0 = (n0 - 0.5).abs() / 0.5;
    let closed3 = slater_norm_closed(2, t, 0.3);
    let e3 = (n3 - closed3).abs() / closed3;
    let scaling = ((n3 / n0) / (PI * t * 0.09).exp() - 1.0).abs();

    let model = OneLayerModel::new(1, 3, torus, 0.2, 0.35)?;
    let qmc = Integrator::qmc(1 << 17, 2024, 16);
    let r = manybody_inner(&model, OneLayerState::Slater, OneLayerState::Slater, &qmc, REL)?;
    let closed = slater_norm_closed(3, t, 0.2).powi(2);
    let z = (r.value.re - closed).abs() / r.error_estimate;
    let pass = e0 <= 1e-6 && e3 <= 1e-6 && scaling <= 1e-6 && z <= 3.0;
    Ok((
        pass,
        format!(
            "n=2: ||Φ||(a=0) = {n0:.12} rel err {e0:.2e}, a=0.3 rel err {e3:.2e}, scaling err {scaling:.2e}; \
             n=3 QMC ({} samples): ||Φ||² = {:.8} ± {:.2e} vs {closed:.8} ({z:.2} SE)",
            r.evaluations, r.value.re, r.error_estimate
        ),
    ))
}

/// Dispersion of the Slater / theta-product ratio.
pub fn criterion_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let torus = TorusParams::new(c(0.15, 0.95))?;
    let mut worst: f64 = 0.0;
    let mut fewest = usize::MAX;
    for n in [2usize, 3] {
        for rep in 0..2 {
            let spec = LineBundleSpec::new(n as i64, rng.random_range(-0.5..0.5), rng.random_range(0.0..1.0));
            let mu = estimate_mu(n, &spec, &torus, 110, 30 + rep, 1e-6, REL)?;
            worst = worst.max(mu.relative_dispersion());
            fewest = fewest.min(mu.admitted);
        }
    }
    Ok((worst <= 1e-8 && fewest >= 100, format!("max relative dispersion {worst:.3e} (limit 1e-8), ≥ {fewest} admitted points per case")))
}

/// Orthogonality, ξ-profile and degeneracy of the m = 2, n = 2 functions.
pub fn criterion_4() -> Check {
    let torus = TorusParams::square();
    let t = torus.t();
    let m = 2usize;
    let qmc = Integrator::qmc(1 << 16, 4, 16);
    let (a1, b1, a2, b2) = (0.1, 0.2, 0.4, 0.65);
    let g1 = hr_gram(&OneLayerModel::new(m, 2, torus, a1, b1)?, &qmc, REL)?;
    let g2 = hr_gram(&OneLayerModel::new(m, 2, torus, a2, b2)?, &qmc, REL)?;

    let mut worst_off: f64 = 0.0;
    let mut worst_degeneracy: f64 = 0.0;
    for g in [&g1, &g2] {
        worst_off = worst_off.max(g.matrix[(0, 1)].norm() / g.entry_errors[(0, 1)]);
        let se = (g.entry_errors[(0, 0)].powi(2) + g.entry_errors[(1, 1)].powi(2)).sqrt();
        worst_degeneracy = worst_degeneracy.max((g.matrix[(0, 0)].re - g.matrix[(1, 1)].re).abs() / se);
    }
    let expected = (2.0 * PI * t * (a1 * a1 - a2 * a2) / m as f64).exp();
    let mut worst_ratio: f64 = 0.0;
    for j in 0..m {
        let (d1, d2) = (g1.matrix[(j, j)].re, g2.matrix[(j, j)].re);
        let ratio = d1 / d2;
        let sigma = ratio * ((g1.entry_errors[(j, j)] / d1).powi(2) + (g2.entry_errors[(j, j)] / d2).powi(2)).sqrt();
        worst_ratio = worst_ratio.max((ratio - expected).abs() / sigma);
    }
    let pass = worst_off <= 4.0 && worst_degeneracy <= 4.0 && worst_ratio <= 4.0;
    Ok((
        pass,
        format!(
            "off-diagonal {worst_off:.2} SE, diagonal spread {worst_degeneracy:.2} SE, ξ-ratio {worst_ratio:.2} SE (limits 4); \
             diagonal at ξ₁ = {:.6} ± {:.1e}",
            g1.matrix[(0, 0)].re,
            g1.entry_errors[(0, 0)]
        ),
    ))
}

/// Exact arithmetic for the two-eigenvalue family `K = I + pJ`, `n⃗ = m·e⃗`.
pub fn criterion_5() -> Check {
    let mut failures = Vec::new();
    let mut count = 0;
    for (p, g) in [(1i64, 2usize), (2, 2), (1, 3)] {
        let m = 1i64;
        let k: Vec<Vec<i64>> = (0..g).map(|i| (0..g).map(|j| p + i64::from(i == j)).collect()).collect();
        let w = validate_wen(&k, &vec![m; g])?;
        let delta = p * g as i64 + 1;
        let frame = w.cyclic_frame()?;
        let mut distinct = frame.clone();
        distinct.sort();
        distinct.dedup();
        let ok = w.delta == delta
            && w.d == m * delta
            && w.n_delta_over_d() == g as i64
            && w.cyclic
            && distinct.len() == delta as usize
            && distinct == enumerate_pi(&w);
        if !ok {
            failures.push(format!("(p={p}, g={g})"));
        }
        count += 1;
    }
    Ok((failures.is_empty(), if failures.is_empty() { format!("{count} data checked exactly") } else { format!("failed for {}", failures.join(", ")) }))
}

/// Centre-of-mass Gram matrix for `K = [[2,1],[1,2]]` and for `g = 1`.
pub fn criterion_6() -> Check {
    let torus = TorusParams::square();
    let t = torus.t();
    let k = vec![vec![2, 1], vec![1, 2]];
    let gram = center_mass_gram(&k, &torus, &[0.0, 0.0], &[0.0, 0.0], GridSpec::new(48, 4)?, REL)?;
    let kap = kappa_closed(&k, &[0.0, 0.0], t)?;
    let value = gram.diagonal_mean();
    let residual = gram.scalar_residual();
    let err = (value - kap.value).abs() / kap.value;
    // (2tδ)^{+g/2}, the sign-flipped prefactor, is the third candidate.
    let candidates = [("(2t)^{-g/2}δ^{-1/2}", kap.value), ("(2tδ)^{-g/2}", kap.alternative), ("(2tδ)^{g/2}", 2.0 * t * 3.0)];
    let (winner, _) = candidates
        .iter()
        .min_by(|x, y| (x.1 - value).abs().total_cmp(&(y.1 - value).abs()))
        .expect("non-empty");

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_g1: f64 = 0.0;
    for kk in [1i64, 2, 3, 5] {
        let (a, b) = (rng.random_range(-0.5..0.5), rng.random_range(0.0..1.0));
        let g = center_mass_gram(&[vec![kk]], &torus, &[a], &[b], GridSpec::new(64, 2)?, REL)?;
        let closed = one_particle_norm_sq_closed(kk, t, a);
        worst_g1 = worst_g1.max(g.max_deviation_from_scalar(closed) / closed);
        let kap1 = kappa_closed(&[vec![kk]], &[a], t)?.value;
        worst_g1 = worst_g1.max((kap1 - closed).abs() / closed);
    }
    let pass = residual <= 1e-8 && err <= 1e-8 && *winner == candidates[0].0 && worst_g1 <= 1e-12;
    Ok((
        pass,
        format!(
            "g=2: scalar residual {residual:.2e}, diagonal {value:.15} vs closed form {:.15} (rel err {err:.2e}); \
             closest candidate {winner}, printed prefactor gives {:.6}; g=1 max rel err {worst_g1:.2e}",
            kap.value, kap.alternative
        ),
    ))
}

/// Finite-difference curvature of closed-form fields on a 64×64 grid.
pub fn criterion_7() -> Check {
    let opts = CurvatureOptions::default();
    let mut worst_trace: f64 = 0.0;
    let mut worst_degree: f64 = 0.0;
    let mut worst_flat: f64 = 0.0;
    let mut cases = 0;
    let mut models: Vec<(FieldModel, f64)> = Vec::new();
    for m in [1i64, 2, 3] {
        models.push((FieldModel::Multilayer { datum: validate_wen(&[vec![m]], &[2])? }, -1.0));
    }
    let k = vec![vec![2, 1], vec![1, 2]];
    models.push((FieldModel::Multilayer { datum: validate_wen(&k, &[1, 1])? }, -2.0));
    models.push((FieldModel::CenterMass { k }, -2.0));
    for tau in [c(0.0, 1.0), c(0.3, 0.8)] {
        let torus = TorusParams::new(tau)?;
        let t = torus.t();
        for (model, degree) in &models {
            let field = gram_field(model, FieldBackend::ClosedForm, torus, 64, 64, opts.halo(), REL)?;
            let report = trace_form_and_degree(&field, &opts)?;
            let datum_nd = -degree; // nδ/d
            let expected = -(PI / t) * datum_nd;
            for tr in &report.trace {
                worst_trace = worst_trace.max((*tr - expected).norm() / expected.abs());
            }
            worst_degree = worst_degree.max((report.degree - degree).abs());
            worst_flat = worst_flat.max(report.flatness_residual);
            cases += 1;
        }
    }
    let pass = worst_trace <= 1e-6 && worst_degree <= 1e-6 && worst_flat <= 1e-8;
    Ok((
        pass,
        format!(
            "{cases} fields: trace rel err {worst_trace:.2e}, degree err {worst_degree:.2e} (limits 1e-6), \
             flatness residual {worst_flat:.2e} (limit 1e-8)"
        ),
    ))
}

/// Certificate and quasi-periodicity on random 1D and 2D inputs.
pub fn criterion_8() -> Check {
    let tol = Tolerance::new(1e-12)?;
    let tv = tol.abs_tol();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_cert: f64 = 0.0;
    let mut worst_qp: f64 = 0.0;
    for _ in 0..1000 {
        let t = rng.random_range(0.3..3.0);
        let tau = c(rng.random_range(-0.5..0.5), t);
        let ch = Characteristics1D::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        // z in the fundamental domain centred on the real axis
        let z = rng.random_range(0.0..1.0) + tau * rng.random_range(-0.5..0.5);
        let plan = plan_theta1d(ch, z, tau, tol)?;
        let n = theta1d_partial(ch, z, tau, plan.radius)?;
        let n3 = theta1d_partial(ch, z, tau, plan.radius + 3)?;
        worst_cert = worst_cert.max((n - n3).norm() / tv);

        let v = theta1d(ch, z, tau, tol)?;
        let v1 = theta1d(ch, z + 1.0, tau, tol)?;
        let vt = theta1d(ch, z + tau, tau, tol)?;
        let f1 = (2.0 * Complex64::i() * PI * ch.a).exp();
        let ft = (-2.0 * Complex64::i() * PI * (z + ch.b) - Complex64::i() * PI * tau).exp();
        worst_qp = worst_qp.max((v1 - f1 * v).norm() / tv);
        worst_qp = worst_qp.max((vt - ft * v).norm() / (tv * (1.0 + ft.norm())));
    }
    for _ in 0..200 {
        let t = rng.random_range(0.3..3.0);
        let tau = c(rng.random_range(-0.5..0.5), t);
        let kk: [[f64; 2]; 2] = [[2.0, rng.random_range(-0.9..0.9)], [0.0, rng.random_range(1.0..3.0)]];
        let kmat = nalgebra::DMatrix::from_row_slice(2, 2, &[kk[0][0], kk[0][1], kk[0][1], kk[1][1]]);
        let omega = PeriodMatrix::scaled(tau, &kmat)?;
        let a = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let b = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
        let z = [rng.random_range(0.0..1.0) + tau * rng.random_range(-0.3..0.3), rng.random_range(0.0..1.0) + tau * rng.random_range(-0.3..0.3)];
        let plan = plan_theta_g(&a, &z, &omega, tol)?;
        let n = theta_g_partial(&a, &b, &z, &omega, plan.radius)?;
        let n3 = theta_g_partial(&a, &b, &z, &omega, plan.radius + 3)?;
        worst_cert = worst_cert.max((n - n3).norm() / tv);
        let v = theta_g(&a, &b, &z, &omega, tol)?;
        let v1 = theta_g(&a, &b, &[z[0] + 1.0, z[1]], &omega, tol)?;
        let f1 = (2.0 * Complex64::i() * PI * a[0]).exp();
        worst_qp = worst_qp.max((v1 - f1 * v).norm() / tv);
    }
    Ok((
        worst_cert <= 1.0 && worst_qp <= 10.0,
        format!("1200 inputs (tol 1e-12): max |S_N - S_(N+3)| = {worst_cert:.6} tol, max quasi-periodicity residual {worst_qp:.2} tol (limit 10)"),
    ))
}
