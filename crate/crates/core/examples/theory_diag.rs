// Development diagnostic: cross-checks the scalar saddle solvers against a
// finite-size Monte-Carlo of the exact Gaussian-equivalent model and the
// classical interpolation asymptotics. Not part of the shipped experiments.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rflab_core::linalg::{cholesky, cholesky_solve_vec, symmetric_eigenvalues};
use rflab_core::theory::chain::{solve_mirror_chain, solve_sgd_chain, ChainSpec};
use rflab_core::theory::interpolation_mse_asymptotic;
use rflab_core::{Mat, MirrorMap, Vec64};

fn sample_gaussian_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng, std: f64) -> Mat {
    Array2::from_shape_fn((rows, cols), |_| {
        rng.sample::<f64, _>(rand_distr::StandardNormal) * std
    })
}

/// Monte-Carlo min-norm MSE of the Gaussian-equivalent model with
/// covariance sigma_tilde (d x d), n samples, a_* ~ N(0, I/d).
/// MSE = e^T Sigma e with e = a - a_*.
fn mc_min_norm_mse(sigma_tilde: &Mat, n: usize, trials: usize, seed: u64) -> f64 {
    let d = sigma_tilde.nrows();
    let lfac = cholesky(sigma_tilde).expect("spd");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..trials {
        // rows of Phi ~ N(0, Sigma): G * L^T
        let g = sample_gaussian_mat(n, d, &mut rng, 1.0);
        let phi = g.dot(&lfac.t());
        let a_star = Vec64::from_shape_fn(d, |_| {
            rng.sample::<f64, _>(rand_distr::StandardNormal) / (d as f64).sqrt()
        });
        let y = phi.dot(&a_star);
        let gram = phi.dot(&phi.t());
        let lg = cholesky(&gram).expect("gram spd");
        let dual = cholesky_solve_vec(&lg, &y);
        let a = phi.t().dot(&dual);
        let e = &a - &a_star;
        acc += e.dot(&sigma_tilde.dot(&e));
    }
    acc / trials as f64
}

fn main() {
    let d0 = 384usize;
    let d1 = 256usize;
    let n = 96usize;
    let rho1 = 0.97f64;
    let rho2_sq = 2e-4f64;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = sample_gaussian_mat(d1, d0, &mut rng, 1.0 / (d0 as f64).sqrt());
    // Sigma_tilde = rho1^2 W (I/d0) W^T + rho2_sq I
    let mut sigma_tilde = w.dot(&w.t());
    sigma_tilde.mapv_inplace(|v| v * rho1 * rho1 / d0 as f64);
    for i in 0..d1 {
        sigma_tilde[(i, i)] += rho2_sq;
    }

    let spectrum = symmetric_eigenvalues(&sigma_tilde).unwrap();
    let classical = interpolation_mse_asymptotic(&spectrum, n, 1.0 / d1 as f64).unwrap();
    let mc = mc_min_norm_mse(&sigma_tilde, n, 40, 7);

    let dims = vec![d0, d1];
    let eigs = vec![1.0 / d0 as f64; d0];
    let r1 = vec![rho1];
    let r2 = vec![rho2_sq];
    let spec = ChainSpec {
        dims: &dims,
        n,
        eigs: &eigs,
        rho1: &r1,
        rho2_sq: &r2,
    };
    let sgd = solve_sgd_chain(&spec, 1e-11, 400);
    let mir = solve_mirror_chain(&spec, MirrorMap::SquaredL2, 0.0, 80, 1e-11, 400);

    println!("L=1  d0={d0} d1={d1} n={n} rho1={rho1} rho2_sq={rho2_sq}");
    println!("  MC (40 trials)          : {mc:.6e}");
    println!("  classical (spectrum)    : {classical:.6e}");
    match &sgd {
        Ok(s) => println!(
            "  sgd chain               : {:.6e}  (res {:.2e}, conv {}, vars {:?})",
            s.tau_sq, s.residual, s.converged, s.vars
        ),
        Err(e) => println!("  sgd chain error: {e}"),
    }
    match &mir {
        Ok(s) => println!(
            "  mirror chain (quadratic): {:.6e}  (res {:.2e}, conv {}, vars {:?})",
            s.tau_sq, s.residual, s.converged, s.vars
        ),
        Err(e) => println!("  mirror chain error: {e}"),
    }

    // Width sweep: how tau^2 moves as the read-out width grows past the
    // previous width (near-low-rank regime, tiny rho2).
    println!("\nwidth sweep, d0=48 fixed, rho2_sq=1e-6, n=24:");
    for dl in [56usize, 72, 96, 144] {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = sample_gaussian_mat(dl, 48, &mut rng, 1.0 / 48f64.sqrt());
        let mut st = w.dot(&w.t());
        st.mapv_inplace(|v| v * 0.98 * 0.98 / 48.0);
        for i in 0..dl {
            st[(i, i)] += 1e-6;
        }
        let spectrum = symmetric_eigenvalues(&st).unwrap();
        let classical = interpolation_mse_asymptotic(&spectrum, 24, 1.0 / dl as f64).unwrap();
        let dims = vec![48, dl];
        let eigs = vec![1.0 / 48.0; 48];
        let r1 = vec![0.98];
        let r2 = vec![1e-6];
        let spec = ChainSpec {
            dims: &dims,
            n: 24,
            eigs: &eigs,
            rho1: &r1,
            rho2_sq: &r2,
        };
        let chain = solve_sgd_chain(&spec, 1e-11, 400)
            .map(|s| s.tau_sq)
            .unwrap_or(f64::NAN);
        let mc = mc_min_norm_mse(&st, 24, 60, 3);
        println!("  d_L={dl:4}  classical {classical:.5e}  chain {chain:.5e}  mc {mc:.5e}");
    }

    // L=2 cross-check: chain vs classical on the sampled two-layer
    // covariance vs Monte Carlo.
    println!("\nL=2: dims 384 -> 320 -> 256, n=96, tanh-like rhos:");
    let (d0, d1, d2, n2) = (384usize, 320usize, 256usize, 96usize);
    let (r11, r12) = (0.95f64, 3e-4f64);
    let (r21, r22) = (0.96f64, 2e-4f64);
    let mut rng2 = ChaCha8Rng::seed_from_u64(21);
    let w1 = sample_gaussian_mat(d1, d0, &mut rng2, 1.0 / (d0 as f64).sqrt());
    let w2 = sample_gaussian_mat(d2, d1, &mut rng2, 1.0 / (d1 as f64).sqrt());
    let mut s1 = w1.dot(&w1.t());
    s1.mapv_inplace(|v| v * r11 * r11 / d0 as f64);
    for i in 0..d1 {
        s1[(i, i)] += r12;
    }
    let mut s2 = w2.dot(&s1).dot(&w2.t());
    s2.mapv_inplace(|v| v * r21 * r21);
    for i in 0..d2 {
        s2[(i, i)] += r22;
    }
    let spectrum2 = symmetric_eigenvalues(&s2).unwrap();
    let classical2 = interpolation_mse_asymptotic(&spectrum2, n2, 1.0 / d2 as f64).unwrap();
    let mc2 = mc_min_norm_mse(&s2, n2, 40, 9);
    let dims2 = vec![d0, d1, d2];
    let eigs2 = vec![1.0 / d0 as f64; d0];
    let r1v = vec![r11, r21];
    let r2v = vec![r12, r22];
    let spec2 = ChainSpec {
        dims: &dims2,
        n: n2,
        eigs: &eigs2,
        rho1: &r1v,
        rho2_sq: &r2v,
    };
    match solve_sgd_chain(&spec2, 1e-11, 500) {
        Ok(s) => println!(
            "  classical {classical2:.5e}  chain {:.5e}  mc {mc2:.5e}  (res {:.1e})",
            s.tau_sq, s.residual
        ),
        Err(e) => println!("  classical {classical2:.5e}  chain ERR {e}  mc {mc2:.5e}"),
    }
    match solve_mirror_chain(&spec2, MirrorMap::SquaredL2, 0.0, 80, 1e-11, 500) {
        Ok(s) => println!("  mirror(quadratic) L=2    : {:.5e}", s.tau_sq),
        Err(e) => println!("  mirror(quadratic) L=2 ERR: {e}"),
    }
}
