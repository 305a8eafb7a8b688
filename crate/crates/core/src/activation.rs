//! Scalar activations for the hidden layers.

use crate::real::Real;

/// Hidden-layer nonlinearity. `ScaledErf` is erf(z/sqrt(2)), a second odd
/// smooth activation with closed-form Gaussian moments, handy as a
/// quadrature cross-check. `Relu` is not odd and is admitted only where an
/// experiment explicitly opts in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Identity,
    Tanh,
    ScaledErf,
    Relu,
}

impl ActivationKind {
    pub fn is_odd(self) -> bool {
        !matches!(self, ActivationKind::Relu)
    }

    /// Lipschitz constant of the scalar map (all variants are 1-Lipschitz;
    /// ScaledErf has slope sqrt(2/pi) < 1 at the origin).
    pub fn lipschitz(self) -> f64 {
        match self {
            ActivationKind::Identity | ActivationKind::Tanh | ActivationKind::Relu => 1.0,
            ActivationKind::ScaledErf => (2.0 / std::f64::consts::PI).sqrt(),
        }
    }

    #[inline]
    pub fn apply<T: Real>(self, z: T) -> T {
        match self {
            ActivationKind::Identity => z,
            ActivationKind::Tanh => z.tanh(),
            ActivationKind::ScaledErf => (z / T::of(std::f64::consts::SQRT_2)).erf(),
            ActivationKind::Relu => {
                if z > T::zero() {
                    z
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Identity => "identity",
            ActivationKind::Tanh => "tanh",
            ActivationKind::ScaledErf => "scaled-erf",
            ActivationKind::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "id" => Some(ActivationKind::Identity),
            "tanh" => Some(ActivationKind::Tanh),
            "scaled-erf" | "erf" | "scalederf" => Some(ActivationKind::ScaledErf),
            "relu" => Some(ActivationKind::Relu),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oddness_to_machine_precision() {
        for kind in [
            ActivationKind::Identity,
            ActivationKind::Tanh,
            ActivationKind::ScaledErf,
        ] {
            assert!(kind.is_odd());
            for z in [-3.0, -0.7, -1e-3, 0.4, 2.9f64] {
                assert_eq!(kind.apply(-z), -kind.apply(z), "{kind:?} at {z}");
            }
        }
        assert!(!ActivationKind::Relu.is_odd());
        assert_eq!(ActivationKind::Relu.apply(-2.0f64), 0.0);
        assert_eq!(ActivationKind::Relu.apply(2.0f64), 2.0);
    }

    #[test]
    fn lipschitz_bound_holds_on_grid() {
        for kind in [
            ActivationKind::Identity,
            ActivationKind::Tanh,
            ActivationKind::ScaledErf,
            ActivationKind::Relu,
        ] {
            let lip = kind.lipschitz();
            assert!(lip <= 1.0 + 1e-15);
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..2000 {
                let z = -5.0 + i as f64 * 0.005;
                let v: f64 = kind.apply(z);
                if let Some((pz, pv)) = prev {
                    let slope = (v - pv) / (z - pz);
                    assert!(
                        slope.abs() <= lip + 1e-6,
                        "{kind:?}: slope {slope} at {z} exceeds {lip}"
                    );
                }
                prev = Some((z, v));
            }
        }
    }

    #[test]
    fn scaled_erf_slope_at_zero() {
        let h = 1e-6;
        let s: f64 = (ActivationKind::ScaledErf.apply(h) - ActivationKind::ScaledErf.apply(-h))
            / (2.0 * h);
        assert!((s - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-9);
    }
}
