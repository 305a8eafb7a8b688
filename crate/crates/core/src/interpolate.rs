//! Last-layer training by interpolation: the closed-form minimum-l2-norm
//! solution, the Bregman projection onto the interpolation set for a general
//! mirror, and a full-batch mirror-descent trainer used to cross-check the
//! implicit-bias endpoint.

use crate::error::{CoreError, Result};
use crate::linalg::{cholesky, cholesky_solve_mat, cholesky_solve_vec};
use crate::mirror::MirrorMap;
use crate::real::Real;
use crate::{Matrix, Vector};

/// Outcome of an interpolation solve.
#[derive(Debug, Clone)]
pub struct InterpolationResult<T> {
    /// Read-out vector (or stacked columns for multi-output solves).
    pub a: Matrix<T>,
    /// ‖Φa − y‖_∞ over all outputs.
    pub residual_inf: T,
    /// Lagrange multipliers of the equality constraints, one column per
    /// output.
    pub dual: Matrix<T>,
    pub iterations: usize,
}

impl<T: Real> InterpolationResult<T> {
    /// Single-output view of `a`.
    pub fn a_vec(&self) -> Vector<T> {
        self.a.column(0).to_owned()
    }
}

fn as_matrix<T: Real>(y: &Matrix<T>) -> Matrix<T> {
    y.clone()
}

/// `a = a0 + Φ^T (Φ Φ^T)^{-1} (Y − Φ a0)`: the minimum-norm interpolant
/// relative to the initialization `a0` (pass zeros for the paper's default).
///
/// The Gram solve is a plain Cholesky with no ridge term; numerically
/// singular Grams surface as `SingularGram`.
pub fn min_norm_fit<T: Real>(
    phi: &Matrix<T>,
    y: &Matrix<T>,
    a0: Option<&Vector<T>>,
) -> Result<InterpolationResult<T>> {
    let (n, d) = phi.dim();
    if y.nrows() != n {
        return Err(CoreError::ShapeMismatch(format!(
            "min_norm_fit: {} rows of Phi vs {} labels",
            n,
            y.nrows()
        )));
    }
    if n > d {
        return Err(CoreError::ShapeMismatch(format!(
            "min_norm_fit needs n <= D, got n={n} D={d}"
        )));
    }
    if let Some(a0) = a0 {
        if a0.len() != d {
            return Err(CoreError::DimMismatch {
                expected: d,
                got: a0.len(),
                context: "a0 length",
            });
        }
    }
    let mut rhs = as_matrix(y);
    if let Some(a0) = a0 {
        let shift = phi.dot(a0);
        for mut col in rhs.columns_mut() {
            col.zip_mut_with(&shift, |r, &s| *r -= s);
        }
    }
    let gram = phi.dot(&phi.t());
    let l = cholesky(&gram)?;
    let dual = cholesky_solve_mat(&l, &rhs);
    let mut a = phi.t().dot(&dual);
    if let Some(a0) = a0 {
        for mut col in a.columns_mut() {
            col.zip_mut_with(a0, |v, &s| *v += s);
        }
    }
    let recon = phi.dot(&a);
    let residual_inf = recon
        .iter()
        .zip(y.iter())
        .map(|(&p, &t)| (p - t).abs())
        .fold(T::zero(), T::max);
    Ok(InterpolationResult {
        a,
        residual_inf,
        dual,
        iterations: 1,
    })
}

/// Vector-label convenience wrapper around [`min_norm_fit`].
pub fn min_norm_fit_vec<T: Real>(
    phi: &Matrix<T>,
    y: &Vector<T>,
    a0: Option<&Vector<T>>,
) -> Result<InterpolationResult<T>> {
    let ym = y
        .clone()
        .into_shape_with_order((y.len(), 1))
        .expect("column reshape");
    min_norm_fit(phi, &ym, a0)
}

/// Bregman projection of `a0` onto {a : Φa = y}: solves the dual system
/// r(λ) = Φ (∇ψ)^{-1}(∇ψ(a0) + Φ^T λ) − y = 0 by damped Newton with the
/// Jacobian Φ diag(1/ψ''(a)) Φ^T and Armijo backtracking (factor 0.5).
///
/// The KKT conditions of min D_ψ(a, a0) s.t. Φa = y are exactly
/// ∇ψ(a) = ∇ψ(a0) + Φ^T λ with primal feasibility, so the returned point is
/// the implicit-bias limit of mirror descent started at `a0`.
pub fn bregman_fit<T: Real>(
    phi: &Matrix<T>,
    y: &Vector<T>,
    mirror: MirrorMap,
    a0: &Vector<T>,
    tol: T,
    max_iter: usize,
) -> Result<InterpolationResult<T>> {
    let (n, d) = phi.dim();
    if y.len() != n {
        return Err(CoreError::DimMismatch {
            expected: n,
            got: y.len(),
            context: "label length",
        });
    }
    if a0.len() != d {
        return Err(CoreError::DimMismatch {
            expected: d,
            got: a0.len(),
            context: "a0 length",
        });
    }
    if n > d {
        return Err(CoreError::ShapeMismatch(format!(
            "bregman_fit needs n <= D, got n={n} D={d}"
        )));
    }
    if !a0.iter().all(|&v| mirror.in_domain(v)) {
        return Err(CoreError::DomainViolation);
    }

    let grad0: Vector<T> = a0.mapv(|v| mirror.grad(v));
    let primal = |lambda: &Vector<T>| -> Vector<T> {
        let mut g = grad0.clone();
        g += &phi.t().dot(lambda);
        g.mapv_inplace(|v| mirror.grad_inv(v));
        g
    };

    let mut lambda = Vector::<T>::zeros(n);
    let mut a = primal(&lambda);
    let mut r = phi.dot(&a) - y;
    let mut rnorm = r.iter().map(|v| v.abs()).fold(T::zero(), T::max);
    let mut iterations = 0usize;

    while rnorm > tol && iterations < max_iter {
        iterations += 1;
        // Jacobian of the dual residual: Φ diag((∇ψ)^{-1}'(∇ψ(a))) Φ^T
        // = Φ diag(1/ψ''(a)) Φ^T at the current primal point.
        let weights: Vector<T> = a.mapv(|v| T::one() / mirror.hess(v));
        let mut phiw = phi.clone();
        for (mut col, &w) in phiw.columns_mut().into_iter().zip(weights.iter()) {
            col.mapv_inplace(|v| v * w);
        }
        let jac = phiw.dot(&phi.t());
        let l = cholesky(&jac)?;
        let step = cholesky_solve_vec(&l, &r);

        // Armijo backtracking on ||r||_inf, halving the step; iterates that
        // leave the mirror domain are treated as failed trials.
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..60 {
            let cand_lambda = &lambda - &(&step * t);
            let cand_a = primal(&cand_lambda);
            if cand_a.iter().all(|&v| mirror.in_domain(v)) {
                let cand_r = phi.dot(&cand_a) - y;
                let cand_norm = cand_r.iter().map(|v| v.abs()).fold(T::zero(), T::max);
                if cand_norm < rnorm {
                    lambda = cand_lambda;
                    a = cand_a;
                    r = cand_r;
                    rnorm = cand_norm;
                    accepted = true;
                    break;
                }
            }
            t = t * T::of(0.5);
        }
        if !accepted {
            return Err(CoreError::DomainViolation);
        }
    }

    if rnorm > tol {
        return Err(CoreError::NoConvergence {
            what: "bregman_fit dual Newton",
            iterations,
            residual: rnorm.to_f64(),
        });
    }
    let d_out = 1usize;
    Ok(InterpolationResult {
        a: a.into_shape_with_order((d, d_out)).expect("column reshape"),
        residual_inf: rnorm,
        dual: lambda.into_shape_with_order((n, 1)).expect("column reshape"),
        iterations,
    })
}

/// Convex losses for the mirror-descent trainer; minimum at 0 with value 0.
#[derive(Debug, Clone, Copy)]
pub enum Loss<T> {
    Squared,
    Huber(T),
}

impl<T: Real> Loss<T> {
    fn grad(self, t: T) -> T {
        match self {
            Loss::Squared => t,
            Loss::Huber(delta) => {
                if t.abs() <= delta {
                    t
                } else if t > T::zero() {
                    delta
                } else {
                    -delta
                }
            }
        }
    }
}

/// Full-batch stochastic-mirror-descent endpoint: iterates
/// ∇ψ(a_{t+1}) = ∇ψ(a_t) − η Φ^T L'(Φ a_t − y) until the residual drops
/// below `tol`. Converges to the Bregman projection of `a0`, which the
/// tests verify against [`bregman_fit`].
pub fn smd_train<T: Real>(
    phi: &Matrix<T>,
    y: &Vector<T>,
    loss: Loss<T>,
    mirror: MirrorMap,
    a0: &Vector<T>,
    step: T,
    max_epochs: usize,
    tol: T,
) -> Result<InterpolationResult<T>> {
    let (n, d) = phi.dim();
    if y.len() != n {
        return Err(CoreError::DimMismatch {
            expected: n,
            got: y.len(),
            context: "label length",
        });
    }
    if a0.len() != d {
        return Err(CoreError::DimMismatch {
            expected: d,
            got: a0.len(),
            context: "a0 length",
        });
    }
    let mut a = a0.clone();
    let mut theta: Vector<T> = a.mapv(|v| mirror.grad(v));
    let mut r = phi.dot(&a) - y;
    let mut rnorm = r.iter().map(|v| v.abs()).fold(T::zero(), T::max);
    let r0 = rnorm.max(T::epsilon());
    let mut epochs = 0usize;
    while rnorm > tol && epochs < max_epochs {
        epochs += 1;
        let lgrad = r.mapv(|t| loss.grad(t));
        let g = phi.t().dot(&lgrad);
        theta.zip_mut_with(&g, |th, &gi| *th -= step * gi);
        a = theta.mapv(|v| mirror.grad_inv(v));
        if !a.iter().all(|&v| v.is_finite()) {
            return Err(CoreError::Divergence {
                residual: f64::INFINITY,
                iterations: epochs,
            });
        }
        r = phi.dot(&a) - y;
        rnorm = r.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        if rnorm > r0 * T::of(1e6) {
            return Err(CoreError::Divergence {
                residual: rnorm.to_f64(),
                iterations: epochs,
            });
        }
    }
    if rnorm > tol {
        return Err(CoreError::NoConvergence {
            what: "smd_train",
            iterations: epochs,
            residual: rnorm.to_f64(),
        });
    }
    Ok(InterpolationResult {
        a: a.into_shape_with_order((d, 1)).expect("column reshape"),
        residual_inf: rnorm,
        dual: Matrix::zeros((n, 1)),
        iterations: epochs,
    })
}

/// ‖(I − Φ⁺Φ)(a − a0)‖_2: how far `a − a0` sticks out of the row space of
/// Φ. Zero for the exact min-norm interpolant.
pub fn row_space_defect<T: Real>(phi: &Matrix<T>, a: &Vector<T>, a0: Option<&Vector<T>>) -> Result<T> {
    let delta = match a0 {
        Some(a0) => a - a0,
        None => a.clone(),
    };
    let gram = phi.dot(&phi.t());
    let l = cholesky(&gram)?;
    let proj = phi.t().dot(&cholesky_solve_vec(&l, &phi.dot(&delta)));
    let defect = &delta - &proj;
    Ok(defect.dot(&defect).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;

    #[test]
    fn symmetric_min_norm() {
        let phi: Matrix<f64> = array![[1.0, 1.0]];
        let r = min_norm_fit_vec(&phi, &array![2.0], None).unwrap();
        assert!((r.a[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((r.a[(1, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_phi_reproduces_labels() {
        let phi = Matrix::<f64>::eye(2);
        let r = min_norm_fit_vec(&phi, &array![3.0, -1.0], None).unwrap();
        assert_eq!(r.a_vec(), array![3.0, -1.0]);
    }

    #[test]
    fn single_active_coordinate() {
        let phi: Matrix<f64> = array![[2.0, 0.0, 0.0]];
        let r = min_norm_fit_vec(&phi, &array![4.0], None).unwrap();
        assert!((r.a_vec()[0] - 2.0).abs() < 1e-14);
        assert!(r.a_vec()[1].abs() < 1e-14);
        assert!(r.a_vec()[2].abs() < 1e-14);
    }

    #[test]
    fn initialization_offset_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let phi = Matrix::<f64>::from_shape_fn((4, 9), |_| rng.gen_range(-1.0..1.0));
        let y = Vector::from_shape_fn(4, |_| rng.gen_range(-1.0..1.0));
        let a0 = Vector::from_shape_fn(9, |_| rng.gen_range(-1.0..1.0));
        let with = min_norm_fit_vec(&phi, &y, Some(&a0)).unwrap();
        let shifted = min_norm_fit_vec(&phi, &(&y - &phi.dot(&a0)), None).unwrap();
        for (u, v) in with.a_vec().iter().zip(shifted.a_vec().iter().zip(a0.iter())) {
            assert!((u - (v.0 + v.1)).abs() < 1e-12);
        }
    }

    #[test]
    fn min_norm_row_space_membership() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let n = rng.gen_range(1..6);
            let d = rng.gen_range(n..n + 10);
            let phi = Matrix::<f64>::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
            let y = Vector::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
            let r = min_norm_fit_vec(&phi, &y, None).unwrap();
            assert!(r.residual_inf < 1e-8);
            assert!(row_space_defect(&phi, &r.a_vec(), None).unwrap() < 1e-8);
        }
    }

    #[test]
    fn singular_gram_is_reported() {
        let phi: Matrix<f64> = array![[1.0, 2.0, 0.0], [1.0, 2.0, 0.0]]; // duplicated row
        assert!(matches!(
            min_norm_fit_vec(&phi, &array![1.0, 1.0], None),
            Err(CoreError::SingularGram { .. })
        ));
    }

    #[test]
    fn entropy_fixed_point_when_feasible() {
        let phi: Matrix<f64> = array![[1.0, 1.0]];
        let a0: Vector<f64> = array![1.0, 1.0];
        let r = bregman_fit(&phi, &array![2.0], MirrorMap::NegEntropy, &a0, 1e-12, 50).unwrap();
        assert!((r.a_vec()[0] - 1.0).abs() < 1e-12);
        assert!(r.dual[(0, 0)].abs() < 1e-12);
    }

    #[test]
    fn entropy_projection_scales_uniformly() {
        // KKT: a_i = a0_i e^{lambda}; feasibility scales by 2/5.
        let phi: Matrix<f64> = array![[1.0, 1.0]];
        let a0: Vector<f64> = array![4.0, 1.0];
        let r = bregman_fit(&phi, &array![2.0], MirrorMap::NegEntropy, &a0, 1e-12, 100).unwrap();
        assert!((r.a_vec()[0] - 1.6).abs() < 1e-10);
        assert!((r.a_vec()[1] - 0.4).abs() < 1e-10);
        // independent 1-d bisection on lambda for the same KKT system
        let mut lo = -10.0f64;
        let mut hi = 10.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let s = 4.0 * mid.exp() + 1.0 * mid.exp();
            if s > 2.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        assert!((r.a_vec()[0] - 4.0 * lam.exp()).abs() < 1e-9);
    }

    #[test]
    fn quadratic_mirror_agrees_with_min_norm() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = rng.gen_range(1..5);
            let d = n + rng.gen_range(1..8);
            let phi = Matrix::<f64>::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
            let y = Vector::from_shape_fn(n, |_| rng.gen_range(-1.0..1.0));
            let a0 = Vector::from_shape_fn(d, |_| rng.gen_range(-1.0..1.0));
            let b = bregman_fit(&phi, &y, MirrorMap::SquaredL2, &a0, 1e-12, 100).unwrap();
            let m = min_norm_fit_vec(&phi, &y, Some(&a0)).unwrap();
            for (u, v) in b.a_vec().iter().zip(m.a_vec().iter()) {
                assert!((u - v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn bregman_optimality_against_feasible_perturbations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _case in 0..50 {
            let n = rng.gen_range(1..4);
            let d = n + rng.gen_range(2..8);
            let phi = Matrix::<f64>::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0));
            let a0 = Vector::from_shape_fn(d, |_| rng.gen_range(0.2..2.0));
            let a_feas = Vector::from_shape_fn(d, |_| rng.gen_range(0.2..2.0));
            let y = phi.dot(&a_feas);
            let Ok(r) = bregman_fit(&phi, &y, MirrorMap::NegEntropy, &a0, 1e-10, 200) else {
                continue; // rare ill-conditioned draw
            };
            let best = MirrorMap::NegEntropy.bregman(&r.a_vec(), &a0);
            // random feasible perturbations: a + P_null(eps), projected to
            // positivity by construction of small steps
            let gram = phi.dot(&phi.t());
            let l = cholesky(&gram).unwrap();
            let mut worse = 0usize;
            let mut total = 0usize;
            for _ in 0..20 {
                let eps = Vector::from_shape_fn(d, |_| rng.gen_range(-0.05..0.05));
                let proj = phi.t().dot(&cholesky_solve_vec(&l, &phi.dot(&eps)));
                let null_step = &eps - &proj;
                let cand = &r.a_vec() + &null_step;
                if cand.iter().all(|&v| v > 0.0) {
                    total += 1;
                    let obj = MirrorMap::NegEntropy.bregman(&cand, &a0);
                    if obj >= best - 1e-10 {
                        worse += 1;
                    }
                }
            }
            assert_eq!(worse, total, "found feasible point with lower divergence");
        }
    }

    #[test]
    fn smd_quadratic_converges_to_min_norm() {
        let phi: Matrix<f64> = array![[1.0, 1.0]];
        let y = array![2.0];
        let a0 = Vector::zeros(2);
        let r = smd_train(
            &phi,
            &y,
            Loss::Squared,
            MirrorMap::SquaredL2,
            &a0,
            0.2,
            20_000,
            1e-10,
        )
        .unwrap();
        assert!((r.a_vec()[0] - 1.0).abs() < 1e-6);
        assert!((r.a_vec()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn smd_already_interpolating_returns_immediately() {
        let phi: Matrix<f64> = array![[1.0, 0.0]];
        let a0: Vector<f64> = array![3.0, 9.0];
        let y = phi.dot(&a0);
        let r = smd_train(
            &phi,
            &y,
            Loss::Squared,
            MirrorMap::SquaredL2,
            &a0,
            0.1,
            100,
            1e-12,
        )
        .unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.a_vec(), a0);
    }

    #[test]
    fn smd_entropy_matches_bregman_projection() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let n = 2;
        let d = 5;
        let phi = Matrix::<f64>::from_shape_fn((n, d), |_| rng.gen_range(0.1..1.0));
        let a_feas = Vector::from_shape_fn(d, |_| rng.gen_range(0.3..1.5));
        let y = phi.dot(&a_feas);
        let a0 = Vector::from_elem(d, 0.8);
        let direct = bregman_fit(&phi, &y, MirrorMap::NegEntropy, &a0, 1e-12, 200).unwrap();
        let trained = smd_train(
            &phi,
            &y,
            Loss::Squared,
            MirrorMap::NegEntropy,
            &a0,
            0.05,
            200_000,
            1e-9,
        )
        .unwrap();
        let gap = MirrorMap::NegEntropy.bregman(&trained.a_vec(), &a0)
            - MirrorMap::NegEntropy.bregman(&direct.a_vec(), &a0);
        assert!(gap.abs() < 1e-4, "D_psi gap {gap}");
    }

    #[test]
    fn smd_divergence_detected() {
        let phi: Matrix<f64> = array![[1.0, 1.0]];
        let y = array![2.0];
        let a0 = Vector::zeros(2);
        let r = smd_train(
            &phi,
            &y,
            Loss::Squared,
            MirrorMap::SquaredL2,
            &a0,
            1e4,
            1000,
            1e-10,
        );
        assert!(matches!(r, Err(CoreError::Divergence { .. })));
    }

    #[test]
    fn huber_gradient_saturates() {
        let l = Loss::Huber(0.5f64);
        assert_eq!(l.grad(0.2), 0.2);
        assert_eq!(l.grad(3.0), 0.5);
        assert_eq!(l.grad(-3.0), -0.5);
    }
}
