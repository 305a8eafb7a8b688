//! Moreau envelopes of the mirror potentials and their Gaussian
//! expectations.

use super::dual::Scalarish;
use crate::error::Result;
use crate::mirror::{MirrorDomain, MirrorMap};
use crate::quadrature::GaussHermite;
use crate::real::Real;

/// Proximal point of psi at curvature 1/c: argmin_x (v - x)^2/(2c) + psi(x).
/// Newton on the optimality condition with a bisection bracket as the
/// fallback; accurate to ~1e-14 relative.
pub fn prox_point<T: Real>(mirror: MirrorMap, c: T, v: T) -> T {
    match mirror {
        MirrorMap::Zero => v,
        MirrorMap::SquaredL2 => v / (c + T::one()),
        MirrorMap::NegEntropy => {
            // g(x) = (x - v)/c + ln x + 1 = 0 on x > 0, strictly increasing.
            let mut lo = T::of(1e-300);
            let mut hi = v.abs().max(T::one()) * (T::one() + c);
            // ensure g(hi) > 0
            let g = |x: T| (x - v) / c + x.ln() + T::one();
            while g(hi) < T::zero() {
                hi = hi * T::of(4.0);
            }
            let mut x = v.max(T::of(1e-3)).min(hi);
            for _ in 0..100 {
                let gx = (x - v) / c + x.ln() + T::one();
                if gx > T::zero() {
                    hi = x;
                } else {
                    lo = x;
                }
                let gpx = T::one() / c + T::one() / x;
                let mut next = x - gx / gpx;
                if !(next > lo && next < hi) {
                    next = (lo + hi) / T::of(2.0);
                }
                if (next - x).abs() <= x.abs() * T::of(1e-15) + T::of(1e-300) {
                    x = next;
                    break;
                }
                x = next;
            }
            x
        }
    }
}

/// Moreau envelope M_{psi;c}(v) = min_x (v-x)^2/(2c) + psi(x).
pub fn moreau_envelope<T: Real>(mirror: MirrorMap, c: T, v: T) -> T {
    let x = prox_point(mirror, c, v);
    (v - x) * (v - x) / (T::of(2.0) * c) + mirror.psi(x)
}

/// Envelope evaluated in dual-capable arithmetic. The prox point is solved
/// at value level; by the envelope theorem the tangent of the inner argmin
/// does not contribute to first derivatives, so `x` enters as a constant.
pub fn moreau_envelope_ad<T: Real, U: Scalarish<T>>(mirror: MirrorMap, c: U, v: U) -> U {
    let x = U::lift(prox_point(mirror, c.value(), v.value()));
    let diff = v - x;
    diff * diff / (U::lift(T::of(2.0)) * c) + U::lift(mirror.psi(x.value()))
}

/// E over independent a_* ~ N(0, astar_var) and z ~ N(0, z_var) of
/// M_{psi;c}(a_* - psi'(a0) - c z), by tensorized Gauss-Hermite.
pub fn expected_moreau<T: Real>(
    mirror: MirrorMap,
    c: T,
    z_var: T,
    astar_var: T,
    a0_scalar: T,
    nodes: usize,
) -> Result<T> {
    let q = GaussHermite::<T>::new(nodes.max(20));
    let shift = mirror.grad(a0_scalar);
    if z_var == T::zero() && astar_var == T::zero() {
        return Ok(moreau_envelope(mirror, c, -shift));
    }
    if z_var == T::zero() {
        return Ok(q.gaussian_expectation(astar_var, |a| moreau_envelope(mirror, c, a - shift)));
    }
    if astar_var == T::zero() {
        return Ok(
            q.gaussian_expectation(z_var, |z| moreau_envelope(mirror, c, -shift - c * z))
        );
    }
    Ok(q.gaussian_expectation_2d(astar_var, z_var, |a, z| {
        moreau_envelope(mirror, c, a - shift - c * z)
    }))
}

/// E M_{psi;c}(v) for v ~ N(mean, var), the one-dimensional reduction the
/// saddle solver uses (a_*, the shift, and the z-term combine into a single
/// Gaussian argument). Dual-capable.
pub fn expected_moreau_1d<T: Real, U: Scalarish<T>>(
    mirror: MirrorMap,
    rule: &GaussHermite<T>,
    c: U,
    mean: U,
    var: U,
) -> U {
    let scale = (var + var).sqrt(); // sqrt(2 var)
    let inv_sqrt_pi = U::lift(T::of(1.0 / std::f64::consts::PI).sqrt());
    let mut acc = U::lift(T::zero());
    for (&x, &w) in rule.nodes().iter().zip(rule.weights()) {
        let v = mean + scale * U::lift(x);
        acc = acc + U::lift(w) * moreau_envelope_ad(mirror, c, v);
    }
    acc * inv_sqrt_pi
}

/// Golden-section oracle for tests: minimizes the envelope objective on a
/// bracket without derivatives.
pub fn golden_section_envelope<T: Real>(mirror: MirrorMap, c: T, v: T) -> T {
    let (mut lo, mut hi) = match mirror.domain() {
        MirrorDomain::PositiveOrthant => (T::of(1e-12), v.abs().max(T::one()) * T::of(10.0)),
        MirrorDomain::AllReals => {
            let r = v.abs().max(T::one()) * T::of(10.0);
            (-r, r)
        }
    };
    let f = |x: T| (v - x) * (v - x) / (T::of(2.0) * c) + mirror.psi(x);
    let phi = T::of(0.618_033_988_749_894_9);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    f((lo + hi) / T::of(2.0))
}
