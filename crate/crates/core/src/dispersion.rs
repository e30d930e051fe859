//! Characteristic function of the linearization at a steady state,
//!
//! `d(lambda; mu, sigma) = lambda - d1 f - d2 f * sqrt(lambda + sigma^2)`,
//!
//! with partials evaluated on the equilibrium branch `(u*, sigma u*, mu)`,
//! plus Hopf point location and checks of the non-degeneracy conditions.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{equilibrium, equilibrium_slope, BoundaryKinetics};
use crate::scalar::{csqrt, on_branch_cut, Scalar};

/// Linear data of the boundary kinetics at the steady state for fixed
/// `(mu, sigma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization<T> {
    pub mu: T,
    pub sigma: T,
    pub u_star: T,
    pub d1: T,
    pub d2: T,
    /// Total `mu`-derivatives of `d1`, `d2` along the equilibrium branch.
    pub d1_mu: T,
    pub d2_mu: T,
}

impl<T: Scalar> Linearization<T> {
    /// Resolves the equilibrium from `guess` and collects the partials.
    pub fn at<K: BoundaryKinetics<T> + ?Sized>(k: &K, mu: T, sigma: T, guess: T) -> Result<Self> {
        let u_star = equilibrium(k, mu, sigma, guess)?;
        let p = k.partials(u_star, sigma * u_star, mu);
        let du = equilibrium_slope(k, u_star, mu, sigma)?;
        let (d1_mu, d2_mu) = k.partials_derivative(u_star, sigma * u_star, mu, du, sigma * du, T::one());
        Ok(Self {
            mu,
            sigma,
            u_star,
            d1: p.d1,
            d2: p.d2,
            d1_mu,
            d2_mu,
        })
    }

    fn root(&self, lambda: Complex<T>) -> Result<Complex<T>> {
        let z = lambda + Complex::from(self.sigma * self.sigma);
        if on_branch_cut(z) {
            return Err(Error::BranchCut(format!("lambda = {lambda}")));
        }
        Ok(csqrt(z))
    }

    /// `d(lambda)`.
    pub fn d(&self, lambda: Complex<T>) -> Result<Complex<T>> {
        Ok(lambda - self.d1 - self.root(lambda)? * self.d2)
    }

    /// `d/dlambda d(lambda)`.
    pub fn d_lambda(&self, lambda: Complex<T>) -> Result<Complex<T>> {
        let s = self.root(lambda)?;
        Ok(Complex::from(T::one()) - Complex::from(self.d2) / (s * T::of(2.0)))
    }

    /// Total `mu`-derivative of `d` at fixed `lambda`.
    pub fn d_mu(&self, lambda: Complex<T>) -> Result<Complex<T>> {
        Ok(-(self.root(lambda)? * self.d2_mu) - self.d1_mu)
    }
}

/// Characteristic function `d(lambda; mu, sigma)` with the equilibrium
/// resolved from the guess `0`.
pub fn char_fn<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    k: &K,
    lambda: Complex<T>,
    mu: T,
    sigma: T,
) -> Result<Complex<T>> {
    Linearization::at(k, mu, sigma, T::zero())?.d(lambda)
}

/// Critical data at a simple pair of imaginary roots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint<T> {
    pub omega_star: T,
    pub mu_star: T,
    pub sigma_star: T,
    pub u_star: T,
    pub d_lambda: Complex<T>,
    pub d_mu: Complex<T>,
    /// `Re dlambda*/dmu`.
    pub crossing: T,
}

impl<T: Scalar> HopfPoint<T> {
    /// Linearization at the critical parameters.
    pub fn linearization<K: BoundaryKinetics<T> + ?Sized>(&self, k: &K) -> Result<Linearization<T>> {
        Linearization::at(k, self.mu_star, self.sigma_star, self.u_star)
    }
}

fn tight_tol<T: Scalar>() -> T {
    T::of(1e-13).max(T::epsilon() * T::of(64.0))
}

/// Solves `Re d(i omega; mu, sigma) = Im d(i omega; mu, sigma) = 0` for
/// `(omega, mu)` by two-dimensional Newton iteration.
pub fn find_hopf<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    k: &K,
    sigma: T,
    initial: (T, T),
) -> Result<HopfPoint<T>> {
    const MAX_ITER: usize = 60;
    let (mut omega, mut mu) = initial;
    let mut guess = T::zero();
    let tol = tight_tol::<T>();
    let mut last = T::infinity();
    for _ in 0..MAX_ITER {
        let lin = Linearization::at(k, mu, sigma, guess)?;
        guess = lin.u_star;
        let lam = Complex::new(T::zero(), omega);
        let d = lin.d(lam)?;
        last = d.norm();
        if last <= tol * T::one().max(omega.abs()) {
            return finish_hopf(k, &lin, omega);
        }
        let col_w = Complex::<T>::i() * lin.d_lambda(lam)?;
        let col_m = lin.d_mu(lam)?;
        let det = col_w.re * col_m.im - col_m.re * col_w.im;
        if det == T::zero() || !det.is_finite() {
            return Err(Error::Singular("Hopf Newton"));
        }
        let dw = (-d.re * col_m.im + col_m.re * d.im) / det;
        let dm = (-col_w.re * d.im + d.re * col_w.im) / det;
        omega = omega + dw;
        mu = mu + dm;
        if !omega.is_finite() || !mu.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        what: "Hopf Newton",
        iterations: MAX_ITER,
        residual: last.to_f64_lossy(),
    })
}

fn finish_hopf<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    _k: &K,
    lin: &Linearization<T>,
    omega: T,
) -> Result<HopfPoint<T>> {
    if !(omega > T::of(1e-8)) {
        return Err(Error::NoHopf(format!(
            "Newton converged to omega = {omega} <= 0 (sigma = {})",
            lin.sigma
        )));
    }
    let lam = Complex::new(T::zero(), omega);
    let d_lambda = lin.d_lambda(lam)?;
    let d_mu = lin.d_mu(lam)?;
    let crossing = (-(d_mu / d_lambda)).re;
    Ok(HopfPoint {
        omega_star: omega,
        mu_star: lin.mu,
        sigma_star: lin.sigma,
        u_star: lin.u_star,
        d_lambda,
        d_mu,
        crossing,
    })
}

/// Follows the root `lambda*(mu)` of `d(.; mu, sigma)` from `lambda0` by
/// complex Newton iteration.
pub fn track_root<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    k: &K,
    mu: T,
    sigma: T,
    lambda0: Complex<T>,
) -> Result<Complex<T>> {
    let lin = Linearization::at(k, mu, sigma, T::zero())?;
    let mut lam = lambda0;
    let tol = tight_tol::<T>();
    for _ in 0..60 {
        let d = lin.d(lam)?;
        if d.norm() <= tol * T::one().max(lam.norm()) {
            return Ok(lam);
        }
        lam = lam - d / lin.d_lambda(lam)?;
    }
    Err(Error::NoConvergence {
        what: "root tracking",
        iterations: 60,
        residual: lin.d(lam)?.norm().to_f64_lossy(),
    })
}

/// Scan parameters for the uniqueness condition on the imaginary axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// Scan `|omega| <= omega_max_factor * omega_*`.
    pub omega_max_factor: f64,
    /// Grid step as a fraction of `omega_*`.
    pub step_fraction: f64,
    /// Excluded neighbourhood of `+-omega_*`, as a fraction of `omega_*`.
    pub exclusion_fraction: f64,
    /// Required lower bound on `|d(i omega)|` away from `+-omega_*`.
    pub margin: f64,
    /// Threshold for the residual and simplicity checks.
    pub tol: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            omega_max_factor: 10.0,
            step_fraction: 1.0 / 200.0,
            exclusion_fraction: 1.0 / 20.0,
            margin: 1e-6,
            tol: 1e-10,
        }
    }
}

/// Outcome of [`check_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `|d(i omega_*)| <= tol`.
    pub root_ok: bool,
    /// No other imaginary-axis roots.
    pub uniqueness_ok: bool,
    /// `|dlambda d(i omega_*)| > tol`.
    pub simple_ok: bool,
    /// `|Re dlambda*/dmu| > tol`.
    pub crossing_ok: bool,
    pub root_residual: f64,
    /// Smallest `|d(i omega)|` seen on the scan outside the exclusion zones.
    pub min_off_root: f64,
}

impl AssumptionReport {
    pub fn all_ok(&self) -> bool {
        self.root_ok && self.uniqueness_ok && self.simple_ok && self.crossing_ok
    }
}

/// Re-evaluates the Hopf conditions at `h` for the kinetics `k`.
pub fn check_assumptions<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    h: &HopfPoint<T>,
    k: &K,
    scan: &ScanConfig,
) -> Result<AssumptionReport> {
    let lin = h.linearization(k)?;
    let w = h.omega_star;
    let tol = T::of(scan.tol);
    let iw = |om: T| Complex::new(T::zero(), om);
    let root_residual = lin.d(iw(w))?.norm();
    let simple = lin.d_lambda(iw(w))?.norm();

    let omega_max = T::of(scan.omega_max_factor) * w.abs();
    let step = T::of(scan.step_fraction) * w.abs();
    let excl = T::of(scan.exclusion_fraction) * w.abs();
    let mut min_off = T::infinity();
    if step > T::zero() {
        let m = (omega_max / step).ceil().to_i64().unwrap_or(0);
        for j in -m..=m {
            let om = step * T::of_i(j);
            if (om - w).abs() < excl || (om + w).abs() < excl {
                continue;
            }
            min_off = min_off.min(lin.d(iw(om))?.norm());
        }
    }
    // Dominance |d(i omega)| >= |omega|/2 beyond omega_max: sampled on a
    // geometric grid up to the point where the triangle-inequality bound
    // |omega| - |d1| - |d2| sqrt(|omega| + sigma^2) >= |omega|/2 takes over.
    let s2 = lin.sigma * lin.sigma;
    let half = T::of(0.5);
    let bound_holds = |om: T| {
        let root = (om + s2).sqrt();
        root >= lin.d2.abs() && om * half - lin.d1.abs() - lin.d2.abs() * root >= T::zero()
    };
    let mut tail_ok = omega_max > T::zero();
    let mut om = omega_max;
    let ratio = T::of(1.05);
    while tail_ok && !bound_holds(om) && om.is_finite() {
        for sign in [T::one(), -T::one()] {
            if lin.d(iw(sign * om))?.norm() < om * half {
                tail_ok = false;
            }
        }
        om = om * ratio;
    }
    let d_lambda = lin.d_lambda(iw(w))?;
    let crossing = (-(lin.d_mu(iw(w))? / d_lambda)).re;
    Ok(AssumptionReport {
        root_ok: root_residual <= tol,
        uniqueness_ok: min_off > T::of(scan.margin) && tail_ok,
        simple_ok: simple > tol,
        crossing_ok: crossing.abs() > tol,
        root_residual: root_residual.to_f64_lossy(),
        min_off_root: min_off.to_f64_lossy(),
    })
}
