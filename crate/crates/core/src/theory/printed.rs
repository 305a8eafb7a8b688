//! The depth-generic scalar system in its published closed form: a damped
//! fixed point on the ratio unknowns (zeta_1..zeta_{L-1}, theta) followed by
//! a direct linear solve for (alpha_1^2..alpha_{L-1}^2, tau^2).
//!
//! Index conventions, all documented because the closed form leaves them
//! open at the boundaries:
//!   * zeta_L is closed either as theta (`ThetaAsZetaL`, default: the theta
//!     equation occupies the slot the ratio recursion would assign to the
//!     last layer) or as zero (`Zero`).
//!   * zeta_{L+1} and alpha-squares beyond index L-1 are zero.
//!   * c_j = prod_{l=L-j+1..L} d_l zeta_l uses the closed zeta_L.
//!   * the derivative term F' is evaluated at x = zeta_2 or at the
//!     c_L-scaled point, selected by [`FPrimeVariable`].
//!   * the ground-truth norm anchor (the constant 4 from ||2 a_*||^2 with
//!     ||a_*||^2 -> 1) lands on the alpha_{L-1} row; without it the linear
//!     subsystem is homogeneous and only admits the zero solution.
//!   * spectral trace prefactors are normalized per hidden width d_1, the
//!     same substitution the closed form applies to its Gaussian norms.

use crate::error::{CoreError, Result};
use crate::linalg::lu_solve;
use crate::real::Real;
use crate::{Matrix, Vector};

/// Closure convention for the out-of-range ratio indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SgdClosure {
    #[default]
    ThetaAsZetaL,
    Zero,
}

impl SgdClosure {
    pub fn name(self) -> &'static str {
        match self {
            SgdClosure::ThetaAsZetaL => "theta-as-zetaL",
            SgdClosure::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "theta-as-zetal" | "theta" => Some(SgdClosure::ThetaAsZetaL),
            "zero" => Some(SgdClosure::Zero),
            _ => None,
        }
    }
}

/// Which point the derivative term F' is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FPrimeVariable {
    #[default]
    Zeta2,
    CLScaled,
}

impl FPrimeVariable {
    pub fn name(self) -> &'static str {
        match self {
            FPrimeVariable::Zeta2 => "zeta2",
            FPrimeVariable::CLScaled => "cl-scaled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zeta2" => Some(FPrimeVariable::Zeta2),
            "cl-scaled" | "clscaled" => Some(FPrimeVariable::CLScaled),
            _ => None,
        }
    }
}

/// Spectral trace sums over the input covariance.
struct Traces<'a, T> {
    eigs: &'a [T],
}

impl<'a, T: Real> Traces<'a, T> {
    fn t0(&self, q: T, r: T) -> T {
        self.eigs.iter().map(|&l| T::one() / (q * l + r)).sum()
    }
    fn t1(&self, q: T, r: T) -> T {
        self.eigs.iter().map(|&l| l / (q * l + r)).sum()
    }
    fn r2(&self, p: u32, q: T, r: T) -> T {
        self.eigs
            .iter()
            .map(|&l| {
                let den = q * l + r;
                l.powi(p as i32) / (den * den)
            })
            .sum()
    }
    fn r3(&self, p: u32, q: T, r: T) -> T {
        self.eigs
            .iter()
            .map(|&l| {
                let den = q * l + r;
                l.powi(p as i32) / (den * den * den)
            })
            .sum()
    }
}

pub struct PrintedSystem<'a, T> {
    pub dims: &'a [usize],
    pub rho1: &'a [T],
    pub rho2_sq: &'a [T],
    pub eigs: &'a [T],
    pub closure: SgdClosure,
    pub f_prime_var: FPrimeVariable,
}

pub struct PrintedSolution<T> {
    pub zeta: Vec<T>,
    pub theta: T,
    pub alpha_sq: Vec<T>,
    pub tau_sq: T,
    pub residual: T,
    pub converged: bool,
}

impl<'a, T: Real> PrintedSystem<'a, T> {
    fn depth(&self) -> usize {
        self.dims.len() - 1
    }

    fn d(&self, l: usize) -> T {
        T::of(self.dims[l] as f64)
    }

    /// zeta_i for i = 1..=L+1 with the closure applied; `z` has L-1
    /// entries, `theta` closes index L.
    fn zeta_at(&self, z: &[T], theta: T, i: usize) -> T {
        let depth = self.depth();
        if i <= depth - 1 {
            z[i - 1]
        } else if i == depth {
            match self.closure {
                SgdClosure::ThetaAsZetaL => theta,
                SgdClosure::Zero => T::zero(),
            }
        } else {
            T::zero()
        }
    }

    /// c_j = prod_{l = L-j+1..=L} d_l zeta_l.
    fn c(&self, z: &[T], theta: T, j: usize) -> T {
        let depth = self.depth();
        let mut acc = T::one();
        for l in depth - j + 1..=depth {
            acc = acc * self.d(l) * self.zeta_at(z, theta, l);
        }
        acc
    }

    /// One evaluation of the fixed-point right-hand sides.
    fn rhs(&self, z: &[T], theta: T) -> (Vec<T>, T) {
        let depth = self.depth();
        let tr = Traces { eigs: self.eigs };
        let c_l = self.c(z, theta, depth);
        let c_lm1 = self.c(z, theta, depth - 1);
        let mut out = vec![T::zero(); depth - 1];

        // zeta_1
        {
            let z1 = self.zeta_at(z, theta, 1);
            let z2 = self.zeta_at(z, theta, 2);
            let z3 = self.zeta_at(z, theta, 3);
            let q = c_l * c_l * z1 * z2 * z2;
            let num = T::one() - z1 * z2 * z2 * c_l * c_l * tr.t0(q, z2);
            let den = z3 / T::of(4.0)
                + T::of(2.0) * c_l * c_l * z2 * self.rho2_sq[0] / (self.rho1[0] * self.rho1[0]);
            out[0] = num / den;
        }
        // zeta_2
        if depth - 1 >= 2 {
            let z1 = self.zeta_at(z, theta, 1);
            let z2 = self.zeta_at(z, theta, 2);
            let z3 = self.zeta_at(z, theta, 3);
            let z4 = self.zeta_at(z, theta, 4);
            let num = T::one() - tr.t0(c_l * c_l * z2 * z1, T::one()) / self.d(1);
            let den = z3 * c_lm1 * c_lm1 * self.rho2_sq[1] / (self.rho1[1] * self.rho1[1])
                + z4 / T::of(4.0);
            out[1] = num / den;
        }
        // zeta_i, i = 3..=L-1
        for i in 3..=depth.saturating_sub(1) {
            let zi1 = self.zeta_at(z, theta, i + 1);
            let zi2 = self.zeta_at(z, theta, i + 2);
            let c_li = self.c(z, theta, depth - i);
            let num = T::one() - self.d(i + 1) / self.d(i);
            let den = c_li * c_li * self.rho2_sq[i - 1] * zi1
                / (self.rho1[i - 1] * self.rho1[i - 1])
                + zi2 / T::of(8.0);
            out[i - 1] = num / den;
        }
        // theta
        let theta_new = {
            let num = T::one() - self.d(depth) / self.d(depth - 1);
            let den = self.zeta_at(z, theta, depth - 2) * self.d(1) / self.d(0)
                + self.zeta_at(z, theta, depth - 1)
                    * self.rho2_sq[depth - 1]
                    * self.d(depth - 1);
            num / den
        };
        (out, theta_new)
    }

    /// Damped fixed point (damping 0.5, halved on oscillation) on the ratio
    /// unknowns; returns (zeta, theta, residual, converged).
    pub fn solve_ratios(&self, tol: T, max_iter: usize) -> (Vec<T>, T, T, bool) {
        let depth = self.depth();
        let mut z = vec![T::one(); depth - 1];
        let mut theta = T::one();
        let mut gamma = T::of(0.5);
        let mut prev_res = T::infinity();
        let mut grew = 0usize;
        let mut best = (z.clone(), theta, T::infinity());
        for _ in 0..max_iter {
            let (zn, tn) = self.rhs(&z, theta);
            let mut res = (tn - theta).abs();
            for (&a, &b) in zn.iter().zip(z.iter()) {
                res = res.max((a - b).abs());
            }
            if !res.is_finite() {
                return (best.0, best.1, best.2, false);
            }
            if res < best.2 {
                best = (z.clone(), theta, res);
            }
            if res <= tol {
                return (z, theta, res, true);
            }
            if res > prev_res {
                grew += 1;
                if grew >= 2 {
                    gamma = (gamma * T::of(0.5)).max(T::of(0.01));
                    grew = 0;
                }
            } else {
                grew = 0;
            }
            prev_res = res;
            for (zi, &zni) in z.iter_mut().zip(zn.iter()) {
                *zi = (T::one() - gamma) * *zi + gamma * zni;
            }
            theta = (T::one() - gamma) * theta + gamma * tn;
        }
        (best.0, best.1, best.2, false)
    }

    /// Direct solve of the linear (alpha^2, tau^2) subsystem given the
    /// ratios. Unknowns x = [alpha_1^2 .. alpha_{L-1}^2, tau^2].
    pub fn solve_amplitudes(&self, z: &[T], theta: T) -> Result<(Vec<T>, T)> {
        let depth = self.depth();
        let m = depth; // L-1 alpha's plus tau^2
        let tr = Traces { eigs: self.eigs };
        let c_l = self.c(z, theta, depth);
        let z1 = self.zeta_at(z, theta, 1);
        let z2 = self.zeta_at(z, theta, 2);
        let z3 = self.zeta_at(z, theta, 3);
        let mut a = Matrix::<T>::zeros((m, m));
        let mut b = Vector::<T>::zeros(m);

        // F1 = alpha_2^2 f1_a + alpha_1^2 f1_b at the shared trace argument.
        let q = c_l * c_l * z2 * z2 * z1;
        let f1_a = -(z2 * z2 / self.d(1)) * (q * tr.r2(1, q, z2) + tr.r2(0, q, z2));
        let f1_b = z2 * c_l * c_l * z1 * z1 * tr.t1(q, z2)
            - z2 * z2 * c_l * c_l * z1 * z1 * (q * tr.r2(2, q, z2) + tr.r2(1, q, z2));

        // F' = alpha_2^2 fp_a + alpha_1^2 fp_b, derivative of the squared-
        // resolvent traces in the selected variable.
        let x0 = match self.f_prime_var {
            FPrimeVariable::Zeta2 => z2,
            FPrimeVariable::CLScaled => c_l * z2,
        };
        let q0 = c_l * c_l * x0 * x0 * z1;
        let uprime = T::of(2.0) * c_l * c_l * x0 * z1;
        let fp_a = -(T::one() + T::one()) * uprime * (z2 * z2 / self.d(1)) * tr.r3(2, q0, z2);
        let fp_b = -(T::one() + T::one()) * uprime * z2 * z2 * c_l * c_l * z1 * z1
            * tr.r3(1, q0, z2);

        // row 0: alpha_1^2
        {
            a[(0, 0)] = T::one() - z2.powi(4) * c_l.powi(4) * z1 * z1 * tr.r2(2, q, z2);
            if m > 1 {
                let coef = T::of(2.0) * c_l * c_l * self.rho2_sq[0] * self.d(0)
                    / (self.rho1[0] * self.rho1[0] * self.d(1))
                    + (c_l * c_l * z2 * z2 / self.d(1)) * tr.r2(1, q, z2);
                a[(0, 1)] = -(coef * z2 * z2);
            }
            if m > 2 {
                a[(0, 2)] = -(self.d(1) / (T::of(2.0) * self.d(0))) * z3 * z3;
            }
            if depth - 1 == 1 {
                // single-ratio systems anchor on this row instead
                b[0] = T::zero();
            }
        }
        // row 1: alpha_2^2 (exists for L >= 3)
        if depth - 1 >= 2 {
            a[(1, 1)] = (T::one() - self.d(2) / self.d(1)) - f1_a;
            a[(1, 0)] = -(c_l * c_l * self.rho2_sq[0] / (self.rho1[0] * self.rho1[0])) * z1 * z1
                - f1_b;
        }
        // rows i = 3..=L-1
        for i in 3..=depth.saturating_sub(1) {
            let row = i - 1;
            let zi = self.zeta_at(z, theta, i);
            let zi1 = self.zeta_at(z, theta, i + 1);
            let zi2 = self.zeta_at(z, theta, i + 2);
            a[(row, row)] = T::one() - self.d(i + 1) / self.d(i);
            // sum_{j=1..i} coefficients move left
            for j in 1..=i.min(depth - 1) {
                let c_lj = self.c(z, theta, depth - j);
                let zj = self.zeta_at(z, theta, j);
                let coef = c_lj * c_lj * self.rho2_sq[j - 1]
                    / (self.rho1[j - 1] * self.rho1[j - 1])
                    * zj
                    * zj;
                a[(row, j - 1)] -= coef;
            }
            if i + 1 <= depth - 1 {
                let c_li1 = self.c(z, theta, depth - i + 1);
                a[(row, i)] -= c_li1 * c_li1 * self.rho2_sq[i - 1] * self.d(i - 1)
                    / (self.rho1[i - 1] * self.rho1[i - 1] * self.d(i + 1))
                    * zi1
                    * zi1;
            }
            if i + 2 <= depth - 1 {
                a[(row, i + 1)] -= self.d(i) / (T::of(4.0) * self.d(i + 1)) * zi2 * zi2;
            }
            // F'/zeta_i^2
            a[(row, 1)] -= fp_a / (zi * zi);
            a[(row, 0)] -= fp_b / (zi * zi);
        }
        // ground-truth anchor on the alpha_{L-1} row
        if depth >= 2 {
            b[depth - 2] = T::of(4.0);
        }
        // tau^2 row
        {
            let row = m - 1;
            a[(row, row)] = T::one() - self.d(depth) / self.d(depth - 1);
            for j in 1..=depth - 1 {
                let c_lj = self.c(z, theta, depth - j);
                let zj = self.zeta_at(z, theta, j);
                a[(row, j - 1)] -= c_lj * c_lj * self.rho2_sq[j - 1]
                    / (self.rho1[j - 1] * self.rho1[j - 1])
                    * zj
                    * zj;
            }
            a[(row, 1)] -= fp_a / (z1 * z1);
            a[(row, 0)] -= fp_b / (z1 * z1);
        }

        let x = lu_solve(&a, &b)?;
        let alpha_sq = x.iter().take(depth - 1).copied().collect();
        Ok((alpha_sq, x[m - 1]))
    }

    /// Denominator validity: every (1 - d_{i+1}/d_i)-type ratio the system
    /// divides by must be positive.
    pub fn check_denominators(&self, n: usize) -> Result<()> {
        let depth = self.depth();
        if self.dims[depth] <= n {
            return Err(CoreError::DegenerateRatio {
                name: "d_L - n".into(),
                value: self.dims[depth] as f64 - n as f64,
            });
        }
        for i in 1..depth {
            let v = 1.0 - self.dims[i + 1] as f64 / self.dims[i] as f64;
            if v <= 0.0 {
                return Err(CoreError::DegenerateRatio {
                    name: format!("1 - d_{}/d_{}", i + 1, i),
                    value: v,
                });
            }
        }
        Ok(())
    }

    pub fn solve(&self, n: usize, tol: T, max_iter: usize) -> Result<PrintedSolution<T>> {
        self.check_denominators(n)?;
        let (zeta, theta, residual, converged) = self.solve_ratios(tol, max_iter);
        if !converged {
            return Ok(PrintedSolution {
                zeta,
                theta,
                alpha_sq: Vec::new(),
                tau_sq: T::nan(),
                residual,
                converged: false,
            });
        }
        let (alpha_sq, tau_sq) = self.solve_amplitudes(&zeta, theta)?;
        Ok(PrintedSolution {
            zeta,
            theta,
            alpha_sq,
            tau_sq,
            residual,
            converged,
        })
    }
}
