//! Gaussian-equivalence machinery: activation Gaussian moments, the rho
//! coefficients, the layer covariance recursion, an equivalent-Gaussian
//! sampler, and Monte-Carlo oracles used to validate the recursion.

use crate::activation::ActivationKind;
use crate::error::{CoreError, Result};
use crate::linalg;
use crate::quadrature::GaussHermite;
use crate::real::Real;
use crate::rf_model::RfNetwork;
use crate::{Matrix, Vector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;

/// Input covariance specification. The recursion and the theory solvers
/// consume it spectrally; `ExplicitMatrix` is factored once when a square
/// root action is needed.
#[derive(Debug, Clone)]
pub enum Sigma0Spec<T> {
    /// Σ₀ = I/d (trace 1).
    IsotropicOverD,
    /// Diagonal spectrum, eigenvalues in any order.
    DiagonalSpectrum(Vec<T>),
    /// Full symmetric positive definite matrix.
    ExplicitMatrix(Matrix<T>),
}

impl<T: Real> Sigma0Spec<T> {
    pub fn trace(&self, d: usize) -> T {
        match self {
            Sigma0Spec::IsotropicOverD => T::one(),
            Sigma0Spec::DiagonalSpectrum(eigs) => eigs.iter().copied().sum(),
            Sigma0Spec::ExplicitMatrix(m) => (0..d).map(|i| m[(i, i)]).sum(),
        }
    }

    /// Eigenvalues, materialized to length d.
    pub fn eigenvalues(&self, d: usize) -> Result<Vec<T>> {
        match self {
            Sigma0Spec::IsotropicOverD => Ok(vec![T::one() / T::of(d as f64); d]),
            Sigma0Spec::DiagonalSpectrum(eigs) => {
                if eigs.len() != d {
                    return Err(CoreError::DimMismatch {
                        expected: d,
                        got: eigs.len(),
                        context: "sigma0 spectrum length",
                    });
                }
                Ok(eigs.clone())
            }
            Sigma0Spec::ExplicitMatrix(m) => {
                if m.nrows() != d {
                    return Err(CoreError::DimMismatch {
                        expected: d,
                        got: m.nrows(),
                        context: "sigma0 matrix size",
                    });
                }
                linalg::symmetric_eigenvalues(m)
            }
        }
    }

    /// Quadratic form v^T Σ₀ v.
    pub fn quadratic_form(&self, v: &Vector<T>) -> T {
        match self {
            Sigma0Spec::IsotropicOverD => v.dot(v) / T::of(v.len() as f64),
            Sigma0Spec::DiagonalSpectrum(eigs) => v
                .iter()
                .zip(eigs.iter())
                .map(|(&vi, &li)| vi * vi * li)
                .sum(),
            Sigma0Spec::ExplicitMatrix(m) => v.dot(&m.dot(v)),
        }
    }

    /// Materialized Σ₀.
    pub fn to_matrix(&self, d: usize) -> Matrix<T> {
        match self {
            Sigma0Spec::IsotropicOverD => Matrix::eye(d) / T::of(d as f64),
            Sigma0Spec::DiagonalSpectrum(eigs) => Matrix::from_diag(&Vector::from(eigs.clone())),
            Sigma0Spec::ExplicitMatrix(m) => m.clone(),
        }
    }

    /// A square-root action g ↦ Σ₀^{1/2} g applied to the rows of a standard
    /// normal matrix (in place). Explicit matrices use their Cholesky factor.
    fn sqrt_action(&self, g: &mut Matrix<T>) -> Result<()> {
        match self {
            Sigma0Spec::IsotropicOverD => {
                let s = T::one() / T::of(g.ncols() as f64).sqrt();
                g.mapv_inplace(|v| v * s);
                Ok(())
            }
            Sigma0Spec::DiagonalSpectrum(eigs) => {
                for mut row in g.rows_mut() {
                    for (v, &l) in row.iter_mut().zip(eigs.iter()) {
                        *v = *v * l.sqrt();
                    }
                }
                Ok(())
            }
            Sigma0Spec::ExplicitMatrix(m) => {
                let l = linalg::cholesky(m)?;
                *g = g.dot(&l.t());
                Ok(())
            }
        }
    }

    /// n i.i.d. rows ~ N(0, Σ₀).
    pub fn sample(&self, d: usize, n: usize, rng: &mut ChaCha8Rng) -> Result<Matrix<T>> {
        let mut g = Matrix::from_shape_fn((n, d), |_| T::standard_normal(rng));
        self.sqrt_action(&mut g)?;
        Ok(g)
    }
}

/// Per-layer output of the covariance recursion.
#[derive(Debug, Clone)]
pub struct GepState<T> {
    /// sigma_sq[l] = Tr(Σ_l)/d_l for l = 0..=L.
    pub sigma_sq: Vec<T>,
    /// rho1[l-1] for layers l = 1..=L.
    pub rho1: Vec<T>,
    /// rho2_sq[l-1] for layers l = 1..=L.
    pub rho2_sq: Vec<T>,
}

impl<T: Real> GepState<T> {
    pub fn depth(&self) -> usize {
        self.rho1.len()
    }
}

/// (E[z φ(z)], E[φ(z)^2]) under z ~ N(0, sigma_sq), by Gauss–Hermite
/// quadrature with `nodes` points.
pub fn activation_moments<T: Real>(
    kind: ActivationKind,
    sigma_sq: T,
    nodes: usize,
) -> Result<(T, T)> {
    if sigma_sq <= T::zero() {
        return Err(CoreError::NonpositiveVariance(sigma_sq.to_f64()));
    }
    let q = GaussHermite::<T>::new(nodes.max(20));
    let m1 = q.gaussian_expectation(sigma_sq, |z| z * kind.apply(z));
    let m2 = q.gaussian_expectation(sigma_sq, |z| {
        let p = kind.apply(z);
        p * p
    });
    Ok((m1, m2))
}

/// Closed-form moments where they exist; the quadrature path is checked
/// against these in tests.
pub fn closed_form_moments<T: Real>(kind: ActivationKind, sigma_sq: T) -> Option<(T, T)> {
    match kind {
        ActivationKind::Identity => Some((sigma_sq, sigma_sq)),
        ActivationKind::ScaledErf => {
            // phi(z) = erf(z / sqrt(2)):
            //   E z phi(z)  = sigma^2 sqrt(2/pi) / sqrt(1 + sigma^2)
            //   E phi(z)^2  = (2/pi) asin(sigma^2 / (1 + sigma^2))
            let two_over_pi = T::of(2.0 / std::f64::consts::PI);
            let m1 = sigma_sq * two_over_pi.sqrt() / (T::one() + sigma_sq).sqrt();
            let m2 = two_over_pi * T::of(libm::asin((sigma_sq / (T::one() + sigma_sq)).to_f64()));
            Some((m1, m2))
        }
        _ => None,
    }
}

/// (rho1, rho2_sq) at the given pre-activation variance:
/// rho1 = E[z phi(z)]/sigma^2, rho2_sq = E[phi^2] - sigma^2 rho1^2.
/// Values of rho2_sq within -1e-12 of zero clamp to zero; anything lower
/// signals broken quadrature and errors out.
pub fn rho_coeffs<T: Real>(kind: ActivationKind, sigma_sq: T, nodes: usize) -> Result<(T, T)> {
    let (m1, m2) = activation_moments(kind, sigma_sq, nodes)?;
    let rho1 = m1 / sigma_sq;
    let mut rho2_sq = m2 - sigma_sq * rho1 * rho1;
    if rho2_sq < T::zero() {
        if rho2_sq > T::of(-1e-12) {
            rho2_sq = T::zero();
        } else {
            return Err(CoreError::NonpositiveVariance(rho2_sq.to_f64()));
        }
    }
    Ok((rho1, rho2_sq))
}

/// Default Gauss–Hermite node count for the recursion.
pub const DEFAULT_NODES: usize = 200;

/// Moment cache key: sigma_sq rounded to 12 significant digits, which is how
/// the recursion re-queries nearby variances without recomputing the rule.
fn bucket(sigma_sq: f64) -> u64 {
    let s = format!("{sigma_sq:.12e}");
    let mut h = 0xcbf29ce484222325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Trace of M^T Σ̃_l M, recursing through the covariance structure so no
/// Σ̃ is materialized (the Frobenius-accumulation path).
fn trace_quadratic<T: Real>(
    net: &RfNetwork<T>,
    sigma0: &Sigma0Spec<T>,
    rho1: &[T],
    rho2_sq: &[T],
    level: usize,
    m: &Matrix<T>,
) -> T {
    if level == 0 {
        return match sigma0 {
            Sigma0Spec::IsotropicOverD => {
                linalg::frob_inner(m, m) / T::of(m.nrows() as f64)
            }
            Sigma0Spec::DiagonalSpectrum(eigs) => {
                let mut acc = T::zero();
                for (row, &l) in m.rows().into_iter().zip(eigs.iter()) {
                    acc += row.dot(&row) * l;
                }
                acc
            }
            Sigma0Spec::ExplicitMatrix(s) => linalg::frob_inner(&s.dot(m), m),
        };
    }
    let w = &net.layers[level - 1];
    let wm = match w {
        crate::rf_model::WeightLayer::Dense(wd) => wd.t().dot(m),
        crate::rf_model::WeightLayer::Packed(p) => {
            // W^T M column by column through the packed kernel
            let mut out = Matrix::zeros((w.d_in(), m.ncols()));
            for (j, col) in m.columns().into_iter().enumerate() {
                out.column_mut(j).assign(&p.matvec_transpose(&col.to_owned()));
            }
            out
        }
    };
    rho1[level - 1] * rho1[level - 1]
        * trace_quadratic(net, sigma0, rho1, rho2_sq, level - 1, &wm)
        + rho2_sq[level - 1] * linalg::frob_inner(m, m)
}

/// Quadratic form v^T Σ̃_l v through the same recursion.
pub fn gep_quadratic_form<T: Real>(
    net: &RfNetwork<T>,
    sigma0: &Sigma0Spec<T>,
    state: &GepState<T>,
    level: usize,
    v: &Vector<T>,
) -> T {
    if level == 0 {
        return sigma0.quadratic_form(v);
    }
    let w = &net.layers[level - 1];
    let wv = w.apply_transpose_vec(v);
    state.rho1[level - 1] * state.rho1[level - 1]
        * gep_quadratic_form(net, sigma0, state, level - 1, &wv)
        + state.rho2_sq[level - 1] * v.dot(v)
}

/// Runs the covariance recursion along the sigma-squared chain:
/// sigma_0^2 = Tr(Σ₀)/d, then per layer (rho1, rho2_sq) at the previous
/// variance and sigma_l^2 = Tr(Σ̃_l)/d_l. Odd activations only.
pub fn gep_recursion<T: Real>(
    sigma0: &Sigma0Spec<T>,
    net: &RfNetwork<T>,
    nodes: usize,
) -> Result<GepState<T>> {
    if !net.activation.is_odd() {
        return Err(CoreError::NonOddActivation(net.activation));
    }
    let depth = net.depth();
    let mut sigma_sq = Vec::with_capacity(depth + 1);
    sigma_sq.push(sigma0.trace(net.d_in()) / T::of(net.d_in() as f64));
    let mut rho1 = Vec::with_capacity(depth);
    let mut rho2_sq = Vec::with_capacity(depth);
    let mut cache: HashMap<(ActivationKind, u64), (T, T)> = HashMap::new();

    for l in 1..=depth {
        let prev = sigma_sq[l - 1];
        let key = (net.activation, bucket(prev.to_f64()));
        let (r1, r2) = match cache.get(&key) {
            Some(&v) => v,
            None => {
                let v = rho_coeffs(net.activation, prev, nodes)?;
                cache.insert(key, v);
                v
            }
        };
        rho1.push(r1);
        rho2_sq.push(r2);
        let d_l = net.dims[l];
        let w_t = net.layers[l - 1].to_dense().t().to_owned();
        let tr_w = trace_quadratic(net, sigma0, &rho1, &rho2_sq, l - 1, &w_t);
        let tr = r1 * r1 * tr_w + r2 * T::of(d_l as f64);
        sigma_sq.push(tr / T::of(d_l as f64));
    }
    Ok(GepState {
        sigma_sq,
        rho1,
        rho2_sq,
    })
}

/// Materializes Σ̃_l (validation and closed-form error paths only).
pub fn gep_covariance<T: Real>(
    net: &RfNetwork<T>,
    sigma0: &Sigma0Spec<T>,
    state: &GepState<T>,
    level: usize,
) -> Result<Matrix<T>> {
    if level > net.depth() {
        return Err(CoreError::LayerOutOfRange {
            got: level,
            depth: net.depth(),
        });
    }
    let mut cov = sigma0.to_matrix(net.d_in());
    for l in 1..=level {
        let w = net.layers[l - 1].to_dense();
        let mut next = w.dot(&cov).dot(&w.t());
        let r1sq = state.rho1[l - 1] * state.rho1[l - 1];
        next.mapv_inplace(|v| v * r1sq);
        for i in 0..next.nrows() {
            next[(i, i)] += state.rho2_sq[l - 1];
        }
        cov = next;
    }
    Ok(cov)
}

/// Consistency check helper: sigma_l^2 recomputed from a materialized
/// covariance.
pub fn trace_over_dim<T: Real>(cov: &Matrix<T>) -> T {
    (0..cov.nrows()).map(|i| cov[(i, i)]).sum::<T>() / T::of(cov.nrows() as f64)
}

/// n rows distributed N(0, Σ̃_level), generated through the recursive
/// decomposition Σ̃_l^{1/2} g = rho1 W_l (Σ̃_{l-1}^{1/2} g̃_1) + rho2 g̃_2 —
/// no square root of any Σ̃ is ever formed. Deterministic per seed.
pub fn sample_equivalent_gaussian<T: Real>(
    state: &GepState<T>,
    net: &RfNetwork<T>,
    sigma0: &Sigma0Spec<T>,
    level: usize,
    n: usize,
    seed: u64,
) -> Result<Matrix<T>> {
    if level > net.depth() {
        return Err(CoreError::LayerOutOfRange {
            got: level,
            depth: net.depth(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x9e9);
    let mut cur = sigma0.sample(net.d_in(), n, &mut rng)?;
    for l in 1..=level {
        let d_l = net.dims[l];
        let mut next = net.layers[l - 1].apply_batch(&cur);
        let r1 = state.rho1[l - 1];
        next.mapv_inplace(|v| v * r1);
        let r2 = state.rho2_sq[l - 1].sqrt();
        if r2 > T::zero() {
            for mut row in next.rows_mut() {
                for v in row.iter_mut() {
                    *v += r2 * T::standard_normal(&mut rng);
                }
            }
        }
        debug_assert_eq!(next.ncols(), d_l);
        cur = next;
    }
    Ok(cur)
}

/// Monte-Carlo estimate of Σ_L = E x^(L) x^(L)^T from n_mc forward passes
/// of inputs x ~ N(0, Σ₀). Sample blocks of 1024 run in parallel with
/// per-block derived seeds; block size is fixed so results depend only on
/// (seed, n_mc).
pub fn mc_covariance<T: Real>(
    net: &RfNetwork<T>,
    sigma0: &Sigma0Spec<T>,
    n_mc: usize,
    seed: u64,
) -> Result<Matrix<T>> {
    const BLOCK: usize = 1024;
    let d_out = net.d_out();
    let blocks: Vec<(usize, usize)> = (0..n_mc.div_ceil(BLOCK))
        .map(|b| (b, BLOCK.min(n_mc - b * BLOCK)))
        .collect();
    let partials: Vec<Result<Matrix<T>>> = blocks
        .into_par_iter()
        .map(|(b, size)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(0xc0f + b as u64);
            let x = sigma0.sample(net.d_in(), size, &mut rng)?;
            let feats = net.forward(&x)?;
            Ok(feats.t().dot(&feats))
        })
        .collect();
    let mut acc = Matrix::<T>::zeros((d_out, d_out));
    for p in partials {
        acc += &p?;
    }
    let inv = T::one() / T::of(n_mc as f64);
    acc.mapv_inplace(|v| v * inv);
    Ok(acc)
}

/// Power-iteration estimate of the operator norm of A - B.
pub fn op_norm_diff<T: Real>(a: &Matrix<T>, b: &Matrix<T>, iters: usize) -> Result<T> {
    linalg::op_norm_diff(a, b, iters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rf_model::{RfNetwork, WeightKind, WeightLayer};
    use ndarray::array;

    #[test]
    fn identity_moments_are_exact() {
        let (m1, m2) = activation_moments::<f64>(ActivationKind::Identity, 2.0, 60).unwrap();
        assert!((m1 - 2.0).abs() < 1e-12);
        assert!((m2 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_erf_matches_closed_form() {
        for &s2 in &[0.3, 1.0, 2.5] {
            let (m1, m2) = activation_moments::<f64>(ActivationKind::ScaledErf, s2, 200).unwrap();
            let (c1, c2) = closed_form_moments::<f64>(ActivationKind::ScaledErf, s2).unwrap();
            assert!((m1 - c1).abs() < 1e-12, "m1 {m1} vs {c1} at {s2}");
            assert!((m2 - c2).abs() < 1e-12, "m2 {m2} vs {c2} at {s2}");
        }
    }

    #[test]
    fn tanh_m1_against_monte_carlo() {
        use rand::prelude::*;
        let (m1, _) = activation_moments::<f64>(ActivationKind::Tanh, 1.0, 200).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(123);
        let n = 10_000_000usize;
        let mut acc = 0.0f64;
        for _ in 0..n {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            acc += z * z.tanh();
        }
        let mc = acc / n as f64;
        // std err of z tanh(z) is about 0.8/sqrt(n)
        let se = 0.8 / (n as f64).sqrt();
        assert!((m1 - mc).abs() < 3.0 * se, "quad {m1} vs mc {mc}");
    }

    #[test]
    fn tanh_small_variance_linearizes() {
        let s2 = 1e-6;
        let (r1, r2) = rho_coeffs::<f64>(ActivationKind::Tanh, s2, 200).unwrap();
        assert!((r1 - 1.0).abs() < 1e-5);
        assert!(r2.abs() < 1e-11);
    }

    #[test]
    fn identity_rho_is_one_zero() {
        for &s2 in &[0.2, 1.0, 5.0] {
            let (r1, r2) = rho_coeffs::<f64>(ActivationKind::Identity, s2, 100).unwrap();
            assert!((r1 - 1.0).abs() < 1e-12);
            assert!(r2.abs() < 1e-12);
        }
    }

    #[test]
    fn rho2_nonnegative_on_grid() {
        for kind in [
            ActivationKind::Identity,
            ActivationKind::Tanh,
            ActivationKind::ScaledErf,
        ] {
            for i in 0..100 {
                let s2 = 1e-4 + (10.0 - 1e-4) * i as f64 / 99.0;
                let (r1, r2) = rho_coeffs::<f64>(kind, s2, 200).unwrap();
                assert!(r2 >= 0.0, "{kind:?} at {s2}: rho2 {r2}");
                // Cauchy-Schwarz: rho1^2 sigma^2 <= m2
                let (_, m2) = activation_moments::<f64>(kind, s2, 200).unwrap();
                assert!(r1 * r1 * s2 <= m2 + 1e-12);
            }
        }
    }

    #[test]
    fn nonpositive_variance_rejected() {
        assert!(matches!(
            activation_moments::<f64>(ActivationKind::Tanh, 0.0, 100),
            Err(CoreError::NonpositiveVariance(_))
        ));
    }

    #[test]
    fn relu_rejected_by_recursion() {
        let net =
            RfNetwork::<f64>::build(&[8, 8], ActivationKind::Relu, WeightKind::Gaussian, 1)
                .unwrap();
        assert!(matches!(
            gep_recursion(&Sigma0Spec::IsotropicOverD, &net, 100),
            Err(CoreError::NonOddActivation(_))
        ));
    }

    #[test]
    fn identity_single_layer_covariance_is_w_sigma_wt() {
        let net =
            RfNetwork::<f64>::build(&[6, 4], ActivationKind::Identity, WeightKind::Gaussian, 3)
                .unwrap();
        let sigma0 = Sigma0Spec::IsotropicOverD;
        let state = gep_recursion(&sigma0, &net, 100).unwrap();
        assert!(state.rho2_sq[0].abs() < 1e-12);
        let cov = gep_covariance(&net, &sigma0, &state, 1).unwrap();
        let w = net.layers[0].to_dense();
        let expect = w.dot(&(Matrix::eye(6) / 6.0)).dot(&w.t());
        for (a, b) in cov.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        // trace-only path equals materialized trace
        assert!((state.sigma_sq[1] - trace_over_dim(&cov)).abs() < 1e-10);
    }

    #[test]
    fn orthonormal_rows_identity_activation_isometry() {
        // W = I restricted: 3 orthonormal rows of R^3, sigma0 = I/3
        let mut net =
            RfNetwork::<f64>::build(&[3, 3], ActivationKind::Identity, WeightKind::Gaussian, 5)
                .unwrap();
        net.layers[0] = WeightLayer::Dense(Matrix::eye(3));
        let state = gep_recursion(&Sigma0Spec::IsotropicOverD, &net, 80).unwrap();
        assert!((state.sigma_sq[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn trace_chain_matches_materialized_two_layers() {
        let net =
            RfNetwork::<f64>::build(&[10, 8, 6], ActivationKind::Tanh, WeightKind::Gaussian, 7)
                .unwrap();
        let sigma0 = Sigma0Spec::DiagonalSpectrum(
            (0..10).map(|i| 0.05 + 0.01 * i as f64).collect(),
        );
        let state = gep_recursion(&sigma0, &net, 200).unwrap();
        for l in 1..=2 {
            let cov = gep_covariance(&net, &sigma0, &state, l).unwrap();
            assert!(
                (state.sigma_sq[l] - trace_over_dim(&cov)).abs() < 1e-10,
                "level {l}"
            );
        }
    }

    #[test]
    fn quadratic_form_matches_materialized() {
        let net =
            RfNetwork::<f64>::build(&[9, 7, 5], ActivationKind::Tanh, WeightKind::Rademacher, 9)
                .unwrap();
        let sigma0 = Sigma0Spec::IsotropicOverD;
        let state = gep_recursion(&sigma0, &net, 200).unwrap();
        let cov = gep_covariance(&net, &sigma0, &state, 2).unwrap();
        let v = Vector::from_shape_fn(5, |i| (i as f64 * 0.7).sin());
        let direct = gep_quadratic_form(&net, &sigma0, &state, 2, &v);
        let reference = v.dot(&cov.dot(&v));
        assert!((direct - reference).abs() < 1e-10);
    }

    #[test]
    fn mc_covariance_identity_net_approaches_w_sigma_wt() {
        let net =
            RfNetwork::<f64>::build(&[16, 12], ActivationKind::Identity, WeightKind::Gaussian, 11)
                .unwrap();
        let sigma0 = Sigma0Spec::IsotropicOverD;
        let mc = mc_covariance(&net, &sigma0, 200_000, 5).unwrap();
        let w = net.layers[0].to_dense();
        let expect = w.dot(&(Matrix::eye(16) / 16.0)).dot(&w.t());
        let err = op_norm_diff(&mc, &expect, 200).unwrap();
        let scale = crate::linalg::op_norm_sym(&expect, 200);
        assert!(err / scale < 0.05, "relative op error {}", err / scale);
    }

    #[test]
    fn mc_covariance_deterministic_per_seed() {
        let net =
            RfNetwork::<f64>::build(&[6, 5], ActivationKind::Tanh, WeightKind::Gaussian, 2)
                .unwrap();
        let a = mc_covariance(&net, &Sigma0Spec::IsotropicOverD, 3000, 42).unwrap();
        let b = mc_covariance(&net, &Sigma0Spec::IsotropicOverD, 3000, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_matches_target_covariance() {
        let net =
            RfNetwork::<f64>::build(&[12, 10], ActivationKind::Tanh, WeightKind::Gaussian, 13)
                .unwrap();
        let sigma0 = Sigma0Spec::IsotropicOverD;
        let state = gep_recursion(&sigma0, &net, 200).unwrap();
        let n = 100_000usize;
        let s = sample_equivalent_gaussian(&state, &net, &sigma0, 1, n, 77).unwrap();
        let emp = s.t().dot(&s) / n as f64;
        let target = gep_covariance(&net, &sigma0, &state, 1).unwrap();
        let err = op_norm_diff(&emp, &target, 200).unwrap();
        // crude random-matrix sampling bound: d/sqrt(n) scale
        let bound = 5.0 * (10.0 / (n as f64).sqrt()) * crate::linalg::op_norm_sym(&target, 200);
        assert!(err < bound.max(1e-3), "err {err} bound {bound}");
        // determinism
        let s2 = sample_equivalent_gaussian(&state, &net, &sigma0, 1, 100, 77).unwrap();
        let s3 = sample_equivalent_gaussian(&state, &net, &sigma0, 1, 100, 77).unwrap();
        assert_eq!(s2, s3);
    }

    #[test]
    fn sampler_rho2_zero_is_pure_linear_chain() {
        let net =
            RfNetwork::<f64>::build(&[8, 6], ActivationKind::Identity, WeightKind::Gaussian, 17)
                .unwrap();
        let sigma0 = Sigma0Spec::IsotropicOverD;
        let state = gep_recursion(&sigma0, &net, 100).unwrap();
        let s = sample_equivalent_gaussian(&state, &net, &sigma0, 1, 50, 3).unwrap();
        // regenerate by hand with the same stream
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        rng.set_stream(0x9e9);
        let g = sigma0.sample(8, 50, &mut rng).unwrap();
        let w = net.layers[0].to_dense();
        let expect = g.dot(&w.t());
        for (a, b) in s.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn op_norm_diff_cases() {
        let a = array![[3.0, 0.0], [0.0, 1.0]];
        assert_eq!(op_norm_diff(&a, &a, 50).unwrap(), 0.0);
        let b = Matrix::<f64>::zeros((2, 2));
        assert!((op_norm_diff(&a, &b, 200).unwrap() - 3.0).abs() < 1e-6);
        // random symmetric pair vs dense eigensolver oracle
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let n = 24;
        let mut m1 = Matrix::<f64>::zeros((n, n));
        let mut m2 = Matrix::<f64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let v = rng.gen_range(-1.0..1.0);
                m1[(i, j)] = v;
                m1[(j, i)] = v;
                let u = rng.gen_range(-1.0..1.0);
                m2[(i, j)] = u;
                m2[(j, i)] = u;
            }
        }
        let d = &m1 - &m2;
        let eigs = crate::linalg::symmetric_eigenvalues(&d).unwrap();
        let oracle = eigs.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let est = op_norm_diff(&m1, &m2, 500).unwrap();
        assert!((est - oracle).abs() / oracle < 1e-6);
    }
}
