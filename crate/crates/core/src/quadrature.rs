//! Gauss–Hermite quadrature for Gaussian expectations.
//!
//! Nodes and weights come from the Golub–Welsch algorithm: the Hermite
//! three-term recurrence gives a symmetric tridiagonal matrix with zero
//! diagonal and off-diagonals sqrt(k/2); its eigenvalues are the nodes and
//! the squared first eigenvector components (times sqrt(pi)) the weights.

use crate::linalg::tridiag_eigen_first_row;
use crate::real::Real;

/// A physicists' Gauss–Hermite rule: integrates e^(-x^2) f(x) over the line.
#[derive(Debug, Clone)]
pub struct GaussHermite<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussHermite<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let d = vec![T::zero(); n];
        let mut e = vec![T::zero(); n];
        for k in 1..n {
            e[k] = (T::of(k as f64) / T::of(2.0)).sqrt();
        }
        let (nodes, first) = tridiag_eigen_first_row(d, e);
        let sqrt_pi = T::of(std::f64::consts::PI).sqrt();
        let mut pairs: Vec<(T, T)> = nodes
            .into_iter()
            .zip(first.into_iter().map(|z| z * z * sqrt_pi))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let (nodes, weights) = pairs.into_iter().unzip();
        GaussHermite { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫ e^(-x^2) f(x) dx
    pub fn integrate<F: Fn(T) -> T>(&self, f: F) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// E[f(z)] for z ~ N(0, sigma_sq).
    pub fn gaussian_expectation<F: Fn(T) -> T>(&self, sigma_sq: T, f: F) -> T {
        let scale = (T::of(2.0) * sigma_sq).sqrt();
        let inv_sqrt_pi = T::one() / T::of(std::f64::consts::PI).sqrt();
        self.integrate(|x| f(scale * x)) * inv_sqrt_pi
    }

    /// E[f(u, v)] for independent u ~ N(0, var_u), v ~ N(0, var_v),
    /// tensorized over the same rule.
    pub fn gaussian_expectation_2d<F: Fn(T, T) -> T>(&self, var_u: T, var_v: T, f: F) -> T {
        let su = (T::of(2.0) * var_u).sqrt();
        let sv = (T::of(2.0) * var_v).sqrt();
        let inv_pi = T::one() / T::of(std::f64::consts::PI);
        let mut acc = T::zero();
        for (&xu, &wu) in self.nodes.iter().zip(&self.weights) {
            let mut inner = T::zero();
            for (&xv, &wv) in self.nodes.iter().zip(&self.weights) {
                inner += wv * f(su * xu, sv * xv);
            }
            acc += wu * inner;
        }
        acc * inv_pi
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_integrates_to_sqrt_pi() {
        let q = GaussHermite::<f64>::new(5);
        assert!((q.integrate(|_| 1.0) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn degree_three_nodes_match_reference() {
        // Classical 3-point rule: nodes 0, ±sqrt(3/2); weights sqrt(pi)/6*... the
        // middle weight is 2 sqrt(pi)/3.
        let q = GaussHermite::<f64>::new(3);
        assert!((q.nodes[1]).abs() < 1e-14);
        assert!((q.nodes[2] - (1.5f64).sqrt()).abs() < 1e-13);
        assert!((q.weights[1] - 2.0 * std::f64::consts::PI.sqrt() / 3.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_moments() {
        let q = GaussHermite::<f64>::new(40);
        let s2 = 1.7;
        assert!((q.gaussian_expectation(s2, |z| z * z) - s2).abs() < 1e-12);
        assert!((q.gaussian_expectation(s2, |z| z * z * z * z) - 3.0 * s2 * s2).abs() < 1e-11);
        assert!(q.gaussian_expectation(s2, |z| z).abs() < 1e-13);
    }

    #[test]
    fn two_dee_expectation_of_product() {
        let q = GaussHermite::<f64>::new(30);
        // E[u^2 v^2] = var_u var_v for independent centered Gaussians
        let v = q.gaussian_expectation_2d(0.5, 2.0, |u, w| u * u * w * w);
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn large_rule_stays_accurate() {
        let q = GaussHermite::<f64>::new(200);
        let s2 = 4.0;
        assert!((q.gaussian_expectation(s2, |z| z * z) - s2).abs() < 1e-10);
    }
}
