//! Asymptotic test-error predictions: the depth-generic scalar system for
//! the squared mirror, the general-mirror saddle, Moreau-envelope
//! primitives, the classical interpolation asymptotics used as the
//! Gaussian-equivalence cross-check, and conditioning diagnostics.

pub mod chain;
pub mod dual;
pub mod moreau;
pub mod printed;

pub use moreau::{expected_moreau, golden_section_envelope, moreau_envelope, prox_point};
pub use printed::{FPrimeVariable, SgdClosure};

use crate::error::{CoreError, Result};
use crate::gep::GepState;
use crate::linalg;
use crate::mirror::MirrorMap;
use crate::real::Real;
use crate::Matrix;
use chain::{solve_mirror_chain, solve_sgd_chain, ChainSpec};
use printed::PrintedSystem;

/// Problem data for the scalar systems. Dimensions are d_0..d_L; the input
/// covariance enters spectrally.
#[derive(Debug, Clone)]
pub struct TheoryInput<T> {
    pub dims: Vec<usize>,
    pub n: usize,
    pub sigma0_eigs: Vec<T>,
    pub rho1: Vec<T>,
    pub rho2_sq: Vec<T>,
}

impl<T: Real> TheoryInput<T> {
    pub fn new(
        dims: Vec<usize>,
        n: usize,
        sigma0_eigs: Vec<T>,
        rho1: Vec<T>,
        rho2_sq: Vec<T>,
    ) -> Result<Self> {
        if dims.len() < 2 {
            return Err(CoreError::EmptyDims);
        }
        let depth = dims.len() - 1;
        if rho1.len() != depth || rho2_sq.len() != depth {
            return Err(CoreError::ShapeMismatch(format!(
                "need {depth} rho entries, got {}/{}",
                rho1.len(),
                rho2_sq.len()
            )));
        }
        if sigma0_eigs.len() != dims[0] {
            return Err(CoreError::DimMismatch {
                expected: dims[0],
                got: sigma0_eigs.len(),
                context: "sigma0 spectrum",
            });
        }
        if dims[depth] <= n {
            return Err(CoreError::DegenerateRatio {
                name: "d_L - n".into(),
                value: dims[depth] as f64 - n as f64,
            });
        }
        Ok(TheoryInput {
            dims,
            n,
            sigma0_eigs,
            rho1,
            rho2_sq,
        })
    }

    /// Builds the input from a covariance-recursion state.
    pub fn from_gep(dims: Vec<usize>, n: usize, sigma0_eigs: Vec<T>, state: &GepState<T>) -> Result<Self> {
        Self::new(dims, n, sigma0_eigs, state.rho1.clone(), state.rho2_sq.clone())
    }

    pub fn depth(&self) -> usize {
        self.dims.len() - 1
    }

    fn chain_spec(&self) -> ChainSpec<'_, T> {
        ChainSpec {
            dims: &self.dims,
            n: self.n,
            eigs: &self.sigma0_eigs,
            rho1: &self.rho1,
            rho2_sq: &self.rho2_sq,
        }
    }
}

/// Saddle variables of the general-mirror track.
#[derive(Debug, Clone)]
pub struct MirrorSaddleState<T> {
    pub beta: T,
    pub tau: T,
    pub eta_l: T,
    pub eta_tilde_l: T,
    pub alpha_l: T,
    pub alpha_tilde_l: T,
    pub lambda: T,
    pub xi: T,
    pub inner_etas: Vec<T>,
    pub inner_alphas: Vec<T>,
}

/// Scalar solution: ratio unknowns, amplitude unknowns, and the predicted
/// test error tau^2. For depths 1 and 2 the system reduces to the derived
/// saddle (see `chain`); `zeta`/`theta`/`alpha_sq` then hold the
/// corresponding ratio and amplitude values of that reduction.
#[derive(Debug, Clone)]
pub struct TheorySolution<T> {
    pub zeta: Vec<T>,
    pub theta: T,
    pub alpha_sq: Vec<T>,
    pub tau_sq: T,
    pub residual: T,
    pub converged: bool,
    pub mirror_state: Option<MirrorSaddleState<T>>,
}

/// Solves the squared-mirror scalar system.
///
/// Depths 1 and 2 route around the undefined interior equations of the
/// closed form and solve the derived two-block saddle directly (the outer
/// (beta, tau) block plus the last-layer quadratic terms, and for depth 2
/// one interior level); the equation-to-variable mapping is:
/// theta <- eta_top/alpha_top, zeta_i <- eta_i/alpha_i, alpha_sq <- the
/// squared amplitudes. Depth >= 3 runs the published fixed point plus the
/// direct linear solve under the requested closure.
pub fn solve_sgd_system<T: Real>(
    input: &TheoryInput<T>,
    closure: SgdClosure,
    f_prime_var: FPrimeVariable,
    tol: T,
    max_iter: usize,
) -> Result<TheorySolution<T>> {
    let depth = input.depth();
    if depth <= 2 {
        let spec = input.chain_spec();
        let sol = solve_sgd_chain(&spec, tol, max_iter)?;
        let vars = &sol.vars;
        let mut zeta = Vec::new();
        let mut alpha_sq = Vec::new();
        for k in 0..depth - 1 {
            zeta.push(vars[4 + 2 * k] / vars[5 + 2 * k]);
            alpha_sq.push(vars[5 + 2 * k] * vars[5 + 2 * k]);
        }
        alpha_sq.push(vars[3] * vars[3]);
        Ok(TheorySolution {
            zeta,
            theta: vars[2] / vars[3],
            alpha_sq,
            tau_sq: sol.tau_sq,
            residual: sol.residual,
            converged: sol.converged,
            mirror_state: None,
        })
    } else {
        let sys = PrintedSystem {
            dims: &input.dims,
            rho1: &input.rho1,
            rho2_sq: &input.rho2_sq,
            eigs: &input.sigma0_eigs,
            closure,
            f_prime_var,
        };
        let sol = sys.solve(input.n, tol, max_iter)?;
        Ok(TheorySolution {
            zeta: sol.zeta,
            theta: sol.theta,
            alpha_sq: sol.alpha_sq,
            tau_sq: sol.tau_sq,
            residual: sol.residual,
            converged: sol.converged,
            mirror_state: None,
        })
    }
}

/// Solves the general-mirror saddle at any depth through the derived chain;
/// `a0_scalar` is the per-coordinate initialization.
pub fn solve_mirror_saddle<T: Real>(
    input: &TheoryInput<T>,
    mirror: MirrorMap,
    a0_scalar: T,
    nodes: usize,
    tol: T,
    max_outer: usize,
) -> Result<TheorySolution<T>> {
    let spec = input.chain_spec();
    let sol = solve_mirror_chain(&spec, mirror, a0_scalar, nodes, tol, max_outer)?;
    let v = &sol.vars;
    let depth = input.depth();
    let sqrt_n = T::of(input.n as f64).sqrt();
    let rho2_l = input.rho2_sq[depth - 1];
    let lambda = v[3] - v[0] * sqrt_n * rho2_l / (T::of(2.0) * v[1]);
    let inner_etas: Vec<T> = (0..depth - 1).map(|k| v[6 + 2 * k]).collect();
    let inner_alphas: Vec<T> = (0..depth - 1).map(|k| v[7 + 2 * k]).collect();
    let zeta: Vec<T> = inner_etas
        .iter()
        .zip(&inner_alphas)
        .map(|(&e, &a)| e / a)
        .collect();
    let alpha_sq: Vec<T> = inner_alphas.iter().map(|&a| a * a).collect();
    Ok(TheorySolution {
        zeta,
        theta: v[0] / v[1],
        alpha_sq,
        tau_sq: sol.tau_sq,
        residual: sol.residual,
        converged: sol.converged,
        mirror_state: Some(MirrorSaddleState {
            beta: v[0],
            tau: v[1],
            eta_l: v[2],
            eta_tilde_l: v[4],
            alpha_l: v[3],
            alpha_tilde_l: v[5],
            lambda,
            xi: v[2],
            inner_etas,
            inner_alphas,
        }),
    })
}

/// Asymptotic noiseless min-norm interpolation error for Gaussian features
/// with the given covariance spectrum and an isotropic ground truth of
/// per-coordinate variance `astar_var`:
///
///   tau^2 = astar_var / k,   k solving  k * sum_i lam_i/(n k lam_i + 1) = 1.
///
/// This is the classical deterministic-equivalent formula; the experiments
/// use it as the Gaussian-equivalence cross-check on a sampled network's
/// covariance spectrum.
pub fn interpolation_mse_asymptotic<T: Real>(
    spectrum: &[T],
    n: usize,
    astar_var: T,
) -> Result<T> {
    let d = spectrum.len();
    if d <= n {
        return Err(CoreError::DegenerateRatio {
            name: "D - n".into(),
            value: d as f64 - n as f64,
        });
    }
    let nf = T::of(n as f64);
    let g = |k: T| -> T {
        let s: T = spectrum
            .iter()
            .map(|&l| l / (nf * k * l + T::one()))
            .sum();
        k * s - T::one()
    };
    let mean_lam = spectrum.iter().copied().sum::<T>() / T::of(d as f64);
    let mut hi = T::one() / (mean_lam * T::of((d - n) as f64));
    let mut guard = 0;
    while g(hi) < T::zero() {
        hi = hi * T::of(4.0);
        guard += 1;
        if guard > 200 {
            return Err(CoreError::NoConvergence {
                what: "interpolation asymptotics bracket",
                iterations: guard,
                residual: g(hi).to_f64(),
            });
        }
    }
    let mut lo = hi * T::of(1e-12);
    while g(lo) > T::zero() {
        lo = lo * T::of(0.25);
    }
    for _ in 0..200 {
        let mid = (lo + hi) / T::of(2.0);
        if g(mid) > T::zero() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let k = (lo + hi) / T::of(2.0);
    Ok(astar_var / k)
}

/// Smallest eigenvalue of Phi Phi^T / D: the well-conditioning diagnostic
/// attached to every fit.
pub fn sigma_min_diagnostic<T: Real>(phi: &Matrix<T>) -> T {
    let d = T::of(phi.ncols() as f64);
    let mut gram = phi.dot(&phi.t());
    gram.mapv_inplace(|v| v / d);
    linalg::min_eig_spd(&gram, 200)
}
