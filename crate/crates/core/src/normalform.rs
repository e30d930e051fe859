//! Expansion coefficients of the bifurcating branch for the cubic kinetics
//! and the asymptotic profiles built from them.
//!
//! With `v = (r/2) e^{is} + c.c. + r^2 (v20 + v22 e^{2is} + c.c.) + O(r^3)`,
//! `mu = mu2 r^2 + O(r^4)` and `omega = omega_* + omega2 r^2 + O(r^4)`, the
//! order-`r^3` solvability condition on the first mode reads
//! `d_mu mu2 + i d_lambda omega2 = M`, which is solved as a real 2x2 system.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dispersion::{find_hopf, HopfPoint, Linearization};
use crate::error::{Error, Result};
use crate::kinetics::CubicKinetics;
use crate::scalar::Scalar;
use crate::spectral::{FourierGrid, PeriodicProfile, Spectrum};

/// `Lambda_l = d(i omega_* l)` and the first-mode derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaCoeffs<T> {
    pub lambda0: Complex<T>,
    pub lambda2: Complex<T>,
    /// `d_mu d(i omega_*)`.
    pub lambda1_mu: Complex<T>,
    /// `i d_lambda d(i omega_*)`.
    pub lambda1_omega: Complex<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients<T> {
    pub lambda0: Complex<T>,
    pub lambda2: Complex<T>,
    pub lambda1_mu: Complex<T>,
    pub lambda1_omega: Complex<T>,
    pub v20: T,
    pub v22: Complex<T>,
    pub big_m: Complex<T>,
    pub mu2: T,
    pub omega2: T,
    pub uinf2: T,
    pub gamma_crit: T,
}

/// Direction of the bifurcation as read off the sign of `mu2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Super,
    Sub,
    Degenerate,
}

impl Criticality {
    pub fn of<T: Scalar>(mu2: T, tol: T) -> Self {
        if mu2.abs() <= tol {
            Criticality::Degenerate
        } else if mu2 > T::zero() {
            Criticality::Super
        } else {
            Criticality::Sub
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Criticality::Super => "super",
            Criticality::Sub => "sub",
            Criticality::Degenerate => "degenerate",
        }
    }
}

/// Closed-form Hopf frequency `sqrt(alpha (alpha - 2 sigma^2))`, if real.
pub fn omega_star_closed<T: Scalar>(alpha: T, sigma: T) -> Option<T> {
    let w2 = alpha * (alpha - T::of(2.0) * sigma * sigma);
    (w2 > T::zero()).then(|| w2.sqrt())
}

/// Hopf point of the cubic family, started from the closed form.
pub fn cubic_hopf<T: Scalar>(k: &CubicKinetics<T>, sigma: T) -> Result<HopfPoint<T>> {
    let w = omega_star_closed(k.alpha, sigma).ok_or_else(|| {
        Error::NoHopf(format!(
            "alpha = {} <= 2 sigma^2 = {}",
            k.alpha,
            T::of(2.0) * sigma * sigma
        ))
    })?;
    find_hopf(k, sigma, (w, T::zero()))
}

fn d_at<T: Scalar>(lin: &Linearization<T>, omega: T) -> Result<Complex<T>> {
    lin.d(Complex::new(T::zero(), omega))
}

pub fn lambda_coeffs<T: Scalar>(k: &CubicKinetics<T>, hopf: &HopfPoint<T>) -> Result<LambdaCoeffs<T>> {
    let lin = hopf.linearization(k)?;
    let w = hopf.omega_star;
    Ok(LambdaCoeffs {
        lambda0: d_at(&lin, T::zero())?,
        lambda2: d_at(&lin, T::of(2.0) * w)?,
        lambda1_mu: hopf.d_mu,
        lambda1_omega: Complex::<T>::i() * hopf.d_lambda,
    })
}

/// `M = beta^2 (1/Lambda_0 + 1/(2 Lambda_2)) + 3 gamma / 4`.
pub fn big_m<T: Scalar>(beta: T, gamma: T, lambda0: Complex<T>, lambda2: Complex<T>) -> Complex<T> {
    let one = Complex::from(T::one());
    (one / lambda0 + one / (lambda2 * T::of(2.0))) * (beta * beta) + Complex::from(T::of(0.75) * gamma)
}

/// `gamma_crit = (beta^2 / alpha)(4 sqrt 2 / 9 - 2/3)`: `mu2` vanishes there
/// at `sigma = 0`.
pub fn gamma_crit<T: Scalar>(alpha: T, beta: T) -> T {
    beta * beta / alpha * (T::of(4.0) * T::SQRT_2() / T::of(9.0) - T::of(2.0) / T::of(3.0))
}

/// All expansion coefficients at a Hopf point of the cubic family.
pub fn expansion_coefficients<T: Scalar>(
    k: &CubicKinetics<T>,
    hopf: &HopfPoint<T>,
) -> Result<ExpansionCoefficients<T>> {
    let lc = lambda_coeffs(k, hopf)?;
    let m = big_m(k.beta, k.gamma, lc.lambda0, lc.lambda2);
    let (mu2, omega2) = solve_order3(lc.lambda1_mu, lc.lambda1_omega, m)?;
    let v20c = Complex::from(k.beta) / (lc.lambda0 * T::of(2.0));
    Ok(ExpansionCoefficients {
        lambda0: lc.lambda0,
        lambda2: lc.lambda2,
        lambda1_mu: lc.lambda1_mu,
        lambda1_omega: lc.lambda1_omega,
        v20: v20c.re,
        v22: Complex::from(k.beta) / (lc.lambda2 * T::of(4.0)),
        big_m: m,
        mu2,
        omega2,
        uinf2: v20c.re,
        gamma_crit: gamma_crit(k.alpha, k.beta),
    })
}

/// Solves `a mu2 + b omega2 = m` for real `(mu2, omega2)`.
fn solve_order3<T: Scalar>(a: Complex<T>, b: Complex<T>, m: Complex<T>) -> Result<(T, T)> {
    let det = a.re * b.im - b.re * a.im;
    let scale = a.norm() * b.norm();
    if !(det.abs() > T::epsilon() * T::of(1e3) * scale) {
        return Err(Error::Singular("order-3 solvability system"));
    }
    Ok((
        (m.re * b.im - b.re * m.im) / det,
        (a.re * m.im - m.re * a.im) / det,
    ))
}

/// `(mu2, omega2, uinf2)` for the cubic family at degradation `sigma`.
pub fn mu2_omega2<T: Scalar>(alpha: T, beta: T, gamma: T, sigma: T) -> Result<(T, T, T)> {
    let k = CubicKinetics::new(alpha, beta, gamma)?;
    let h = cubic_hopf(&k, sigma)?;
    let c = expansion_coefficients(&k, &h)?;
    Ok((c.mu2, c.omega2, c.uinf2))
}

/// Quotient form `mu2 = Im(M conj L_w) / Im(L_w conj L_m)`,
/// `omega2 = Im(M conj L_m) / Im(L_w conj L_m)` with `L_m = -d_mu d`.
/// Kept as an independent cross-check of the 2x2 solve.
pub fn mu2_omega2_quotient<T: Scalar>(c: &ExpansionCoefficients<T>) -> (T, T) {
    let lw = c.lambda1_omega;
    let lm = -c.lambda1_mu;
    let den = (lw * lm.conj()).im;
    ((c.big_m * lw.conj()).im / den, (c.big_m * lm.conj()).im / den)
}

/// Closed forms at `sigma = 0`.
pub fn mu2_omega2_sigma0<T: Scalar>(alpha: T, beta: T, gamma: T) -> (T, T, T) {
    let b2a = beta * beta / alpha;
    let s2 = T::SQRT_2();
    let mu2 = (b2a * (T::one() / T::of(3.0) - T::one() / (T::of(2.0) * s2))
        - T::of(3.0) * gamma / (T::of(4.0) * s2))
        / alpha.sqrt();
    let omega2 = -(T::of(7.0) * b2a / T::of(6.0) + T::of(0.75) * gamma);
    (mu2, omega2, beta / (T::of(2.0) * alpha))
}

/// Third-harmonic coefficient `v33` of the `r^3 e^{3is}` term at `sigma = 0`,
/// from `Lambda_3 v33 = beta v22 + gamma / 8`.
pub fn v33<T: Scalar>(
    k: &CubicKinetics<T>,
    hopf: &HopfPoint<T>,
    c: &ExpansionCoefficients<T>,
) -> Result<Complex<T>> {
    if hopf.sigma_star != T::zero() {
        return Err(Error::InvalidArgument(
            "third-order profile is only available without degradation".into(),
        ));
    }
    let lin = hopf.linearization(k)?;
    let l3 = d_at(&lin, T::of(3.0) * hopf.omega_star)?;
    Ok((c.v22 * k.beta + Complex::from(k.gamma / T::of(8.0))) / l3)
}

/// Asymptotic profile of order 1, 2 or 3 in `r` on `grid`.
pub fn initial_profile<T: Scalar>(
    grid: &FourierGrid<T>,
    r: T,
    k: &CubicKinetics<T>,
    hopf: &HopfPoint<T>,
    c: &ExpansionCoefficients<T>,
    order: u8,
) -> Result<PeriodicProfile<T>> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidArgument(format!("expansion order must be 1, 2 or 3, got {order}")));
    }
    if r < T::zero() || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {r}")));
    }
    let mut spec = Spectrum::zeros(grid.n());
    let half = Complex::from(r / T::of(2.0));
    spec.set_mode(1, half);
    spec.set_mode(-1, half);
    let r2 = r * r;
    if order >= 2 {
        spec.set_mode(0, Complex::from(c.v20 * r2));
        if grid.max_mode() >= 2 {
            spec.set_mode(2, c.v22 * r2);
            spec.set_mode(-2, c.v22.conj() * r2);
        }
    }
    if order >= 3 {
        let a = v33(k, hopf, c)? * (r2 * r);
        if grid.max_mode() >= 3 {
            spec.set_mode(3, a);
            spec.set_mode(-3, a.conj());
        }
    }
    grid.from_spectrum(&spec)
}
