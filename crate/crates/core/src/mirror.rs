//! Mirror maps: the strictly convex potentials whose Bregman geometry drives
//! the implicit bias of mirror descent.

use crate::real::Real;

/// Domain of a separable potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MirrorDomain {
    AllReals,
    PositiveOrthant,
}

/// A separable mirror map psi(w) = sum_i psi(w_i).
///
/// `SquaredL2` is psi(w) = ||w||^2/2 (gradient descent). `NegEntropy` is
/// psi(w) = sum w_i log w_i on the positive orthant; the paper writes
/// sum |w_i| log |w_i|, which is nonconvex across sign changes, so the
/// positive-orthant reading is implemented. `Zero` is a degenerate
/// test-only potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MirrorMap {
    SquaredL2,
    NegEntropy,
    Zero,
}

impl MirrorMap {
    pub fn domain(self) -> MirrorDomain {
        match self {
            MirrorMap::NegEntropy => MirrorDomain::PositiveOrthant,
            _ => MirrorDomain::AllReals,
        }
    }

    /// Scalar potential.
    pub fn psi<T: Real>(self, w: T) -> T {
        match self {
            MirrorMap::SquaredL2 => w * w / T::of(2.0),
            MirrorMap::NegEntropy => {
                if w == T::zero() {
                    T::zero() // limit of w log w
                } else {
                    w * w.ln()
                }
            }
            MirrorMap::Zero => T::zero(),
        }
    }

    /// Scalar gradient psi'.
    pub fn grad<T: Real>(self, w: T) -> T {
        match self {
            MirrorMap::SquaredL2 => w,
            MirrorMap::NegEntropy => w.ln() + T::one(),
            MirrorMap::Zero => T::zero(),
        }
    }

    /// Inverse gradient (psi')^{-1}.
    pub fn grad_inv<T: Real>(self, v: T) -> T {
        match self {
            MirrorMap::SquaredL2 => v,
            MirrorMap::NegEntropy => (v - T::one()).exp(),
            MirrorMap::Zero => v, // degenerate; unused in solves
        }
    }

    /// Scalar second derivative psi''.
    pub fn hess<T: Real>(self, w: T) -> T {
        match self {
            MirrorMap::SquaredL2 => T::one(),
            MirrorMap::NegEntropy => T::one() / w,
            MirrorMap::Zero => T::zero(),
        }
    }

    /// Local strong-convexity modulus on |w| <= bound (1/max w for the
    /// entropy on the positive orthant).
    pub fn strong_convexity<T: Real>(self, bound: T) -> T {
        match self {
            MirrorMap::SquaredL2 => T::one(),
            MirrorMap::NegEntropy => T::one() / bound,
            MirrorMap::Zero => T::zero(),
        }
    }

    pub fn in_domain<T: Real>(self, w: T) -> bool {
        match self.domain() {
            MirrorDomain::AllReals => w.is_finite(),
            MirrorDomain::PositiveOrthant => w.is_finite() && w > T::zero(),
        }
    }

    /// Bregman divergence D_psi(w, w0), summed over coordinates.
    pub fn bregman<T: Real>(self, w: &crate::Vector<T>, w0: &crate::Vector<T>) -> T {
        w.iter()
            .zip(w0.iter())
            .map(|(&a, &b)| self.psi(a) - self.psi(b) - self.grad(b) * (a - b))
            .sum()
    }

    pub fn name(self) -> &'static str {
        match self {
            MirrorMap::SquaredL2 => "squared-l2",
            MirrorMap::NegEntropy => "neg-entropy",
            MirrorMap::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "squared-l2" | "l2" | "sgd" => Some(MirrorMap::SquaredL2),
            "neg-entropy" | "entropy" => Some(MirrorMap::NegEntropy),
            _ => None,
        }
    }
}

/// The named mirrors this crate ships.
pub fn mirror_library() -> Vec<(&'static str, MirrorMap)> {
    vec![
        ("squared-l2", MirrorMap::SquaredL2),
        ("neg-entropy", MirrorMap::NegEntropy),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn l2_gradient_is_identity() {
        let m = MirrorMap::SquaredL2;
        assert_eq!(m.grad(3.0), 3.0);
        assert_eq!(m.grad(-1.0), -1.0);
    }

    #[test]
    fn entropy_round_trip() {
        let m = MirrorMap::NegEntropy;
        let w = 0.5f64;
        assert!((m.grad_inv(m.grad(w)) - w).abs() < 1e-12);
        assert_eq!(m.psi(1.0), 0.0);
    }

    #[test]
    fn grad_inverse_round_trip_on_grid() {
        for m in [MirrorMap::SquaredL2, MirrorMap::NegEntropy] {
            for i in 1..200 {
                let w = i as f64 * 0.05;
                if !m.in_domain(w) {
                    continue;
                }
                assert!(
                    (m.grad_inv(m.grad(w)) - w).abs() < 1e-10 * w.max(1.0),
                    "{m:?} at {w}"
                );
            }
        }
    }

    #[test]
    fn bregman_of_l2_is_half_squared_distance() {
        let m = MirrorMap::SquaredL2;
        let w: crate::Vector<f64> = array![1.0, -2.0];
        let w0: crate::Vector<f64> = array![0.5, 0.5];
        let d = m.bregman(&w, &w0);
        assert!((d - 0.5 * (0.25 + 6.25)).abs() < 1e-14);
    }

    #[test]
    fn entropy_gradient_monotone() {
        let m = MirrorMap::NegEntropy;
        let mut prev = f64::NEG_INFINITY;
        for i in 1..100 {
            let g = m.grad(i as f64 * 0.1);
            assert!(g > prev);
            prev = g;
        }
    }
}
