//! Boundary reaction terms `f(u-, g, mu)`, where `u-` is the boundary
//! concentration, `g` the outward flux `dn u = -dx u` at the boundary and
//! `mu` the bifurcation parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// First partial derivatives of a boundary vector field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials<T> {
    /// `df/du-`
    pub d1: T,
    /// `df/dg`
    pub d2: T,
    /// `df/dmu`
    pub dmu: T,
}

/// Relative step for the central-difference fallbacks.
pub(crate) fn fd_step<T: Scalar>() -> T {
    if T::epsilon() < T::of(1e-10) {
        T::of(1e-6)
    } else {
        T::epsilon().cbrt()
    }
}

/// A scalar boundary vector field and its derivatives.
///
/// Only [`eval`](BoundaryKinetics::eval) is mandatory. The derivative hooks
/// fall back to central differences; implementors with closed forms should
/// override them.
pub trait BoundaryKinetics<T: Scalar>: Send + Sync {
    fn eval(&self, u_minus: T, flux: T, mu: T) -> T;

    fn partials(&self, u_minus: T, flux: T, mu: T) -> Partials<T> {
        let two = T::of(2.0);
        let hu = fd_step::<T>() * T::one().max(u_minus.abs());
        let hg = fd_step::<T>() * T::one().max(flux.abs());
        let hm = fd_step::<T>() * T::one().max(mu.abs());
        Partials {
            d1: (self.eval(u_minus + hu, flux, mu) - self.eval(u_minus - hu, flux, mu)) / (two * hu),
            d2: (self.eval(u_minus, flux + hg, mu) - self.eval(u_minus, flux - hg, mu)) / (two * hg),
            dmu: (self.eval(u_minus, flux, mu + hm) - self.eval(u_minus, flux, mu - hm)) / (two * hm),
        }
    }

    /// Directional derivative of `(df/du-, df/dg)` along `(du, dg, dmu)`.
    fn partials_derivative(&self, u_minus: T, flux: T, mu: T, du: T, dg: T, dmu: T) -> (T, T) {
        let scale = T::one().max(u_minus.abs()).max(flux.abs()).max(mu.abs());
        // Nested differences when `partials` is itself numerical: a coarser
        // outer step keeps the inner rounding error from being amplified.
        let h = T::epsilon().powf(T::of(0.25)) * scale;
        let p = self.partials(u_minus + h * du, flux + h * dg, mu + h * dmu);
        let m = self.partials(u_minus - h * du, flux - h * dg, mu - h * dmu);
        let two = T::of(2.0);
        ((p.d1 - m.d1) / (two * h), (p.d2 - m.d2) / (two * h))
    }
}

impl<T: Scalar, K: BoundaryKinetics<T> + ?Sized> BoundaryKinetics<T> for &K {
    fn eval(&self, u: T, g: T, mu: T) -> T {
        (**self).eval(u, g, mu)
    }
    fn partials(&self, u: T, g: T, mu: T) -> Partials<T> {
        (**self).partials(u, g, mu)
    }
    fn partials_derivative(&self, u: T, g: T, mu: T, du: T, dg: T, dmu: T) -> (T, T) {
        (**self).partials_derivative(u, g, mu, du, dg, dmu)
    }
}

/// `f = -alpha u + beta u^2 + gamma u^3 + (mu + sqrt(2 alpha)) g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicKinetics<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
}

impl<T: Scalar> CubicKinetics<T> {
    pub fn new(alpha: T, beta: T, gamma: T) -> Result<Self> {
        if !(alpha > T::zero()) || !beta.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "cubic kinetics needs alpha > 0 and finite beta, gamma (got {alpha}, {beta}, {gamma})"
            )));
        }
        Ok(Self { alpha, beta, gamma })
    }

    /// Flux coefficient at `mu = 0`, `sqrt(2 alpha)`.
    pub fn coupling(&self) -> T {
        (T::of(2.0) * self.alpha).sqrt()
    }
}

impl<T: Scalar> BoundaryKinetics<T> for CubicKinetics<T> {
    fn eval(&self, u: T, g: T, mu: T) -> T {
        -self.alpha * u + self.beta * u * u + self.gamma * u * u * u + (mu + self.coupling()) * g
    }

    fn partials(&self, u: T, g: T, mu: T) -> Partials<T> {
        Partials {
            d1: -self.alpha + T::of(2.0) * self.beta * u + T::of(3.0) * self.gamma * u * u,
            d2: mu + self.coupling(),
            dmu: g,
        }
    }

    fn partials_derivative(&self, u: T, _g: T, _mu: T, du: T, _dg: T, dmu: T) -> (T, T) {
        (
            (T::of(2.0) * self.beta + T::of(6.0) * self.gamma * u) * du,
            dmu,
        )
    }
}

/// User-supplied kinetics given only as a closure; derivatives by central
/// differences.
pub struct FnKinetics<F>(pub F);

impl<T: Scalar, F> BoundaryKinetics<T> for FnKinetics<F>
where
    F: Fn(T, T, T) -> T + Send + Sync,
{
    fn eval(&self, u: T, g: T, mu: T) -> T {
        (self.0)(u, g, mu)
    }
}

pub fn eval_f<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(k: &K, u_minus: T, flux: T, mu: T) -> T {
    k.eval(u_minus, flux, mu)
}

pub fn partials<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    k: &K,
    u_minus: T,
    flux: T,
    mu: T,
) -> Partials<T> {
    k.partials(u_minus, flux, mu)
}

/// Steady boundary value `u*` solving `f(u*, sigma u*, mu) = 0`.
///
/// Scalar Newton from `guess` with derivative `d1 + sigma d2`; tolerance
/// `1e-12` on `|f|` (relaxed to a few ulps for single precision), at most 50
/// iterations.
pub fn equilibrium<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    k: &K,
    mu: T,
    sigma: T,
    guess: T,
) -> Result<T> {
    const MAX_ITER: usize = 50;
    let tol = T::of(1e-12).max(T::epsilon() * T::of(16.0));
    let mut u = guess;
    for it in 0..=MAX_ITER {
        let r = k.eval(u, sigma * u, mu);
        if r.abs() <= tol {
            return Ok(u);
        }
        if it == MAX_ITER {
            break;
        }
        let p = k.partials(u, sigma * u, mu);
        let slope = p.d1 + sigma * p.d2;
        if slope == T::zero() || !slope.is_finite() {
            return Err(Error::Singular("equilibrium Newton"));
        }
        u = u - r / slope;
        if !u.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "equilibrium Newton",
        iterations: MAX_ITER,
        residual: k.eval(u, sigma * u, mu).to_f64_lossy(),
    })
}

/// Derivative of the equilibrium branch `du*/dmu`, by implicit
/// differentiation of `f(u*, sigma u*, mu) = 0`.
pub fn equilibrium_slope<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    k: &K,
    u_star: T,
    mu: T,
    sigma: T,
) -> Result<T> {
    let p = k.partials(u_star, sigma * u_star, mu);
    let denom = p.d1 + sigma * p.d2;
    if denom == T::zero() {
        return Err(Error::Singular("equilibrium branch"));
    }
    Ok(-p.dmu / denom)
}
