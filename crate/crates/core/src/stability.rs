//! Floquet stability of bifurcating orbits.
//!
//! Near onset without degradation the reduced 2x2 eigenvalue problem has the
//! closed-form coefficients of [`reduced_coeffs`], and the nonzero exponent is
//! `-2 Re(a conj b) / |b|^2 r^2`. [`floquet_numeric`] solves the full
//! truncated nonlinear eigenvalue problem on Fourier modes instead, in the
//! variable `rho = sqrt(lambda)` in which it is analytic.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::bvp::{Bvp, BvpState};
use crate::continuation::BranchPoint;
use crate::error::{Error, Result};
use crate::kinetics::{BoundaryKinetics, CubicKinetics};
use crate::normalform::mu2_omega2;
use crate::scalar::{csqrt, Scalar};
use crate::spectral::{floquet_symbol_rho, FourierGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Unknown,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stability {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "stable" => Ok(Stability::Stable),
            "unstable" => Ok(Stability::Unstable),
            "unknown" | "" => Ok(Stability::Unknown),
            other => Err(Error::InvalidArgument(format!("unknown stability label {other:?}"))),
        }
    }
}

/// Coefficients of the reduced matrix
/// `[[a r^2 + b lambda + d rho r^2, c r^2 + d rho r^2], [conj, conj]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedCoeffs<T> {
    pub a: Complex<T>,
    pub b: Complex<T>,
    pub c: Complex<T>,
    pub d: Complex<T>,
}

/// Closed-form reduced coefficients for the cubic kinetics at `sigma = 0`.
pub fn reduced_coeffs<T: Scalar>(alpha: T, beta: T, gamma: T) -> ReducedCoeffs<T> {
    let c = |re: f64, im: f64| Complex::new(T::of(re), T::of(im));
    let s2 = Complex::from(T::SQRT_2());
    let b2 = beta * beta;
    let num = (c(1.0, 2.0) - c(1.0, 1.0) * s2) * (T::of(3.0) * alpha * gamma) + (c(6.0, 8.0) - c(4.0, 4.0) * s2) * b2;
    let den = (c(4.0, 8.0) - c(4.0, 4.0) * s2) * alpha;
    let a = -(num / den);
    let d = (c(-2.0, -2.0) + c(1.0, 2.0) * s2) * b2 / ((c(-1.0, -2.0) + c(1.0, 1.0) * s2) * alpha);
    ReducedCoeffs {
        a,
        b: c(0.5, 0.5) * alpha,
        c: a,
        d,
    }
}

/// Coefficient of `r^2` in the nonzero exponent, `-2 Re(a conj b) / |b|^2`.
pub fn leading_eigenvalue<T: Scalar>(rc: &ReducedCoeffs<T>) -> T {
    -T::of(2.0) * (rc.a * rc.b.conj()).re / rc.b.norm_sqr()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloquetMethod {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloquetResult<T> {
    /// Exponents in the scanned window, the translation root `0` first.
    pub exponents: Vec<Complex<T>>,
    pub method: FloquetMethod,
    /// Number of retained modes on each side, `N` (matrix size `2N + 1`).
    pub truncation: usize,
    /// Smallest singular value of the truncated operator at `lambda = 0`.
    pub translation_residual: T,
    /// Largest relative change of the exponents when `N` is doubled.
    pub truncation_change: T,
    pub note: Option<String>,
}

impl<T: Scalar> FloquetResult<T> {
    /// Nonzero exponent with the largest real part.
    pub fn leading(&self, zero_tol: T) -> Option<Complex<T>> {
        self.exponents
            .iter()
            .copied()
            .filter(|l| l.norm() > zero_tol)
            .max_by(|x, y| x.re.partial_cmp(&y.re).unwrap_or(std::cmp::Ordering::Equal))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FloquetSettings {
    /// Retained modes `N` on each side of zero.
    pub truncation: usize,
    /// Real half-width of the scan is `re_factor * |estimate|` ...
    pub re_factor: f64,
    /// ... but at least this.
    pub re_floor: f64,
    /// Imaginary half-width of the scan.
    pub im_half_width: f64,
    /// Points per side of the scan grid.
    pub scan_points: usize,
    /// Exponents closer than this to zero count as the translation root.
    pub zero_tol: f64,
    /// Tolerance on the smallest singular value at `lambda = 0`.
    pub translation_tol: f64,
    /// Allowed relative change of exponents when doubling `N`.
    pub doubling_tol: f64,
    pub check_doubling: bool,
}

impl Default for FloquetSettings {
    fn default() -> Self {
        Self {
            truncation: 64,
            re_factor: 4.0,
            re_floor: 1e-4,
            im_half_width: 0.2,
            scan_points: 41,
            zero_tol: 1e-8,
            translation_tol: 1e-8,
            doubling_tol: 1e-6,
            check_doubling: true,
        }
    }
}

/// Truncated Floquet operator `A(rho)` on modes `-N..=N` around an orbit.
pub struct FloquetOperator<T> {
    omega: T,
    n_modes: usize,
    /// Fourier coefficients of `d1 f` and `d2 f` along the orbit, index
    /// `k + 2N` for `k` in `-2N..=2N`.
    c1: Vec<Complex<T>>,
    c2: Vec<Complex<T>>,
}

impl<T: Scalar> FloquetOperator<T> {
    /// Builds the operator at a converged state (`sigma = 0`).
    pub fn new<K: BoundaryKinetics<T> + ?Sized>(
        k: &K,
        state: &BvpState<T>,
        truncation: usize,
    ) -> Result<Self> {
        if state.sigma != T::zero() {
            return Err(Error::InvalidArgument(
                "numeric Floquet analysis is only available without degradation".into(),
            ));
        }
        let n = state.profile.n();
        if 2 * truncation > n {
            return Err(Error::InvalidArgument(format!(
                "truncation {truncation} needs a profile grid larger than {n}"
            )));
        }
        let grid = FourierGrid::new(n)?;
        let bvp = Bvp::new(k, grid.clone());
        let ev = bvp.evaluate(state)?;
        let (a1, a2) = ev.padded_partials();
        let f1 = grid.padded_coefficients(a1)?;
        let f2 = grid.padded_coefficients(a2)?;
        let m = 2 * n as i64;
        let tn = truncation as i64;
        let pick = |f: &[Complex<T>], kk: i64| f[kk.rem_euclid(m) as usize];
        Ok(Self {
            omega: state.omega,
            n_modes: truncation,
            c1: (-2 * tn..=2 * tn).map(|kk| pick(&f1, kk)).collect(),
            c2: (-2 * tn..=2 * tn).map(|kk| pick(&f2, kk)).collect(),
        })
    }

    pub fn size(&self) -> usize {
        2 * self.n_modes + 1
    }

    pub fn matrix(&self, rho: Complex<T>) -> DMatrix<Complex<T>> {
        let nm = self.n_modes as i64;
        let size = self.size();
        let lam = rho * rho;
        let sym: Vec<Complex<T>> = (-nm..=nm).map(|l| floquet_symbol_rho(self.omega, rho, l)).collect();
        DMatrix::from_fn(size, size, |i, j| {
            let (l, m) = (i as i64 - nm, j as i64 - nm);
            let idx = (l - m + 2 * nm) as usize;
            let mut v = -self.c1[idx] - self.c2[idx] * sym[j];
            if i == j {
                v = v + (Complex::new(T::zero(), T::of_i(l)) + lam) * self.omega;
            }
            v
        })
    }

    pub fn sigma_min(&self, rho: Complex<T>) -> T {
        T::singular_values_complex(self.matrix(rho))
            .into_iter()
            .fold(T::infinity(), T::min)
    }

    /// Refines a root `rho` by a complex secant iteration on the bordered
    /// scalar `y(rho)`, which vanishes linearly at simple roots.
    pub fn refine(&self, rho0: Complex<T>) -> Option<Complex<T>> {
        let (_, u, v) = T::min_singular_triplet_complex(self.matrix(rho0))?;
        let size = self.size();
        let y = |rho: Complex<T>| -> Option<Complex<T>> {
            let a = self.matrix(rho);
            let mut big = DMatrix::<Complex<T>>::zeros(size + 1, size + 1);
            big.view_mut((0, 0), (size, size)).copy_from(&a);
            for i in 0..size {
                big[(i, size)] = u[i];
                big[(size, i)] = v[i].conj();
            }
            let mut rhs = DVector::<Complex<T>>::zeros(size + 1);
            rhs[size] = Complex::from(T::one());
            T::lu_solve_complex(big, rhs).map(|x| x[size])
        };
        let step = T::of(1e-6) * T::one().max(rho0.norm());
        let mut r_prev = rho0;
        let mut y_prev = y(r_prev)?;
        let mut r = rho0 + Complex::new(step, step * T::of(0.5));
        let mut yr = y(r)?;
        for _ in 0..60 {
            let dy = yr - y_prev;
            if dy.norm() == T::zero() {
                break;
            }
            let next = r - yr * (r - r_prev) / dy;
            if !(next.re.is_finite() && next.im.is_finite()) {
                return None;
            }
            r_prev = r;
            y_prev = yr;
            r = next;
            yr = y(r)?;
            if (r - r_prev).norm() <= T::of(1e-13) * T::one().max(r.norm()) {
                return Some(r);
            }
        }
        ((r - r_prev).norm() <= T::of(1e-9) * T::one().max(r.norm())).then_some(r)
    }
}

fn dedup_push<T: Scalar>(roots: &mut Vec<Complex<T>>, z: Complex<T>, tol: T) {
    if roots.iter().all(|w| (*w - z).norm() > tol) {
        roots.push(z);
    }
}

fn scan_roots<T: Scalar>(op: &FloquetOperator<T>, settings: &FloquetSettings, estimate: T) -> Vec<Complex<T>> {
    let np = settings.scan_points.max(3);
    let re_w = (T::of(settings.re_factor) * estimate.abs()).max(T::of(settings.re_floor));
    let im_w = T::of(settings.im_half_width);
    let coord = |i: usize, w: T| -w + T::of(2.0) * w * T::of(i as f64) / T::of((np - 1) as f64);
    let mut sv = vec![vec![T::zero(); np]; np];
    for (i, row) in sv.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let lam = Complex::new(coord(i, re_w), coord(j, im_w));
            *cell = op.sigma_min(csqrt(lam));
        }
    }
    let mut cands: Vec<(T, Complex<T>)> = Vec::new();
    for i in 0..np {
        for j in 0..np {
            let v = sv[i][j];
            let mut is_min = true;
            for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if (di, dj) == (0, 0) || ii < 0 || jj < 0 || ii >= np as i64 || jj >= np as i64 {
                        continue;
                    }
                    if sv[ii as usize][jj as usize] < v {
                        is_min = false;
                    }
                }
            }
            if is_min {
                cands.push((v, Complex::new(coord(i, re_w), coord(j, im_w))));
            }
        }
    }
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut roots = Vec::new();
    for (_, lam) in cands.into_iter().take(12) {
        if let Some(rho) = op.refine(csqrt(lam)) {
            // Only Re rho >= 0 lies on the physical sheet.
            if rho.re >= -T::of(1e-10) {
                let l = rho * rho;
                if l.re.abs() <= T::of(2.0) * re_w && l.im.abs() <= T::of(2.0) * im_w {
                    dedup_push(&mut roots, l, T::of(1e-9));
                }
            }
        }
    }
    roots
}

/// Numeric Floquet exponents near zero for a converged orbit at `sigma = 0`.
///
/// `estimate` sets the width of the real scan window (typically the closed
/// form exponent).
pub fn floquet_numeric<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    point: &BranchPoint<T>,
    k: &K,
    estimate: T,
    settings: &FloquetSettings,
) -> Result<FloquetResult<T>> {
    let state = point.state();
    let op = FloquetOperator::new(k, &state, settings.truncation)?;
    let zero_tol = T::of(settings.zero_tol);
    let translation_residual = op.sigma_min(Complex::from(T::zero()));
    let mut nonzero: Vec<Complex<T>> = scan_roots(&op, settings, estimate)
        .into_iter()
        .filter(|l| l.norm() > zero_tol)
        .collect();
    nonzero.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal));

    let mut change = T::zero();
    if settings.check_doubling && !nonzero.is_empty() {
        let op2 = FloquetOperator::new(k, &state, 2 * settings.truncation)?;
        for l in nonzero.iter_mut() {
            let rho = op2.refine(csqrt(*l)).ok_or(Error::Unresolved(f64::INFINITY))?;
            let l2 = rho * rho;
            change = change.max((l2 - *l).norm() / l.norm());
            *l = l2;
        }
        if change > T::of(settings.doubling_tol) {
            return Err(Error::Unresolved(change.to_f64_lossy()));
        }
    }
    let mut exponents = Vec::new();
    let translation_ok = translation_residual <= T::of(settings.translation_tol);
    if translation_ok {
        exponents.push(Complex::from(T::zero()));
    }
    exponents.extend(nonzero);
    Ok(FloquetResult {
        exponents,
        method: FloquetMethod::Numeric,
        truncation: settings.truncation,
        translation_residual,
        truncation_change: change,
        note: (!translation_ok).then(|| "translation root not resolved at lambda = 0".to_string()),
    })
}

/// Stability from the sign of an exponent, `Unknown` below `resolution`.
pub fn sign_class<T: Scalar>(exponent_re: T, resolution: T) -> Stability {
    if exponent_re.abs() <= resolution {
        Stability::Unknown
    } else if exponent_re > T::zero() {
        Stability::Unstable
    } else {
        Stability::Stable
    }
}

/// How to classify a branch point.
pub enum ClassifyMethod<'a, T> {
    /// Reduced closed form (cubic kinetics); defers to the sign of `mu2`
    /// when `sigma > 0`.
    ClosedForm(&'a CubicKinetics<T>),
    Numeric(&'a FloquetResult<T>),
}

/// Classification and, where available, the leading nonzero exponent.
pub fn classify<T: Scalar>(point: &BranchPoint<T>, method: ClassifyMethod<'_, T>, resolution: T) -> Result<(Stability, Option<T>)> {
    match method {
        ClassifyMethod::ClosedForm(k) => {
            if point.sigma == T::zero() {
                let l = leading_eigenvalue(&reduced_coeffs(k.alpha, k.beta, k.gamma)) * point.r * point.r;
                Ok((sign_class(l, resolution), Some(l)))
            } else {
                let (mu2, _, _) = mu2_omega2(k.alpha, k.beta, k.gamma, point.sigma)?;
                let s = if point.r * point.r * mu2.abs() <= resolution {
                    Stability::Unknown
                } else {
                    sign_class(-mu2, T::zero())
                };
                Ok((s, None))
            }
        }
        ClassifyMethod::Numeric(res) => {
            let zero_tol = resolution.max(T::epsilon());
            match res.leading(zero_tol) {
                Some(l) if l.re > resolution => Ok((Stability::Unstable, Some(l.re))),
                Some(l) if l.re < -resolution => Ok((Stability::Stable, Some(l.re))),
                Some(l) => Ok((Stability::Unknown, Some(l.re))),
                None => Ok((Stability::Stable, None)),
            }
        }
    }
}
