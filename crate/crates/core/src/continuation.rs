//! Pseudo-arclength continuation of the periodic-orbit branch in `mu`.
//!
//! The unknown vector is `x = (v, omega, mu)` with the weighted inner product
//! `<x, y> = (1/n) sum v_j w_j + omega omega' + mu mu'`. Each step predicts
//! along the secant of the last two points and corrects with Newton on
//! `(R, phase, <x - x_prev, t> - ds)`.

use std::fmt;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bvp::{phase, Bvp, BvpState, NewtonSettings};
use crate::dispersion::HopfPoint;
use crate::error::{Error, Result};
use crate::kinetics::{BoundaryKinetics, CubicKinetics};
use crate::normalform::{initial_profile, ExpansionCoefficients};
use crate::scalar::Scalar;
use crate::spectral::PeriodicProfile;
use crate::stability::Stability;

/// One converged periodic orbit on the branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint<T: Scalar> {
    pub mu: T,
    pub omega: T,
    pub sigma: T,
    /// First-harmonic amplitude `2 |u_1|`.
    pub r: T,
    /// Far-field constant: zero mode of the absolute boundary trace.
    pub u_inf: T,
    pub u_star: T,
    /// Equilibrium-centered trace.
    pub profile: PeriodicProfile<T>,
    pub stability: Stability,
    pub lambda1: Option<T>,
    pub newton_iters: usize,
    pub residual: T,
}

impl<T: Scalar> BranchPoint<T> {
    pub fn from_state(st: &BvpState<T>, u_star: T, newton_iters: usize, residual: T) -> Self {
        Self {
            mu: st.mu,
            omega: st.omega,
            sigma: st.sigma,
            r: st.profile.amplitude(),
            u_inf: u_star + st.profile.mean(),
            u_star,
            profile: st.profile.clone(),
            stability: Stability::Unknown,
            lambda1: None,
            newton_iters,
            residual,
        }
    }

    pub fn state(&self) -> BvpState<T> {
        BvpState {
            profile: self.profile.clone(),
            omega: self.omega,
            mu: self.mu,
            sigma: self.sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    StepUnderflow,
    HomoclinicSuspected,
    NewtonFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::StepUnderflow => "step_underflow",
            Termination::HomoclinicSuspected => "homoclinic_suspected",
            Termination::NewtonFailure => "newton_failure",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSettings {
    pub ds0: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// Total number of points, seeds included.
    pub max_points: usize,
    /// Frequency below which the branch is flagged as approaching a
    /// homoclinic limit.
    pub omega_min: f64,
    pub grow: f64,
    pub shrink: f64,
    /// Steps converging within this many corrector iterations grow `ds`.
    pub fast_iters: usize,
    pub max_corrector_iter: usize,
    pub newton: NewtonSettings,
}

impl Default for ContinuationSettings {
    fn default() -> Self {
        Self {
            ds0: 5e-3,
            ds_min: 1e-7,
            ds_max: 0.1,
            max_points: 2000,
            omega_min: 1e-3,
            grow: 2.0,
            shrink: 0.5,
            fast_iters: 3,
            max_corrector_iter: 10,
            newton: NewtonSettings::default(),
        }
    }
}

impl ContinuationSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ds_min > 0.0
            && self.ds_min <= self.ds0
            && self.ds0 <= self.ds_max
            && self.max_points >= 2
            && self.grow >= 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.max_corrector_iter >= 1;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "continuation settings need 0 < ds_min <= ds0 <= ds_max, max_points >= 2, grow >= 1, 0 < shrink < 1 (got {self:?})"
            )));
        }
        self.newton.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T: Scalar> {
    pub points: Vec<BranchPoint<T>>,
    pub termination: Termination,
    /// Arclength steps actually taken between consecutive points.
    pub steps: Vec<T>,
}

/// Two converged points from the asymptotic expansion at amplitudes `r0 < r1`.
pub fn seed_branch<T: Scalar>(
    bvp: &Bvp<'_, T, CubicKinetics<T>>,
    hopf: &HopfPoint<T>,
    coeffs: &ExpansionCoefficients<T>,
    r0: T,
    r1: T,
    newton: &NewtonSettings,
) -> Result<(BranchPoint<T>, BranchPoint<T>)> {
    if !(r0 < r1) {
        return Err(Error::InvalidArgument(format!("seed amplitudes need r0 < r1 (got {r0}, {r1})")));
    }
    let seed = |r: T| -> Result<BranchPoint<T>> {
        let profile = initial_profile(bvp.grid(), r, bvp.kinetics(), hopf, coeffs, 2)?;
        let st = BvpState {
            profile,
            omega: hopf.omega_star + coeffs.omega2 * r * r,
            mu: hopf.mu_star + coeffs.mu2 * r * r,
            sigma: hopf.sigma_star,
        };
        let (sol, rep) = bvp.newton_solve(&st, newton)?;
        let u_star = bvp.equilibrium(sol.mu, sol.sigma)?;
        Ok(BranchPoint::from_state(&sol, u_star, rep.iterations, T::of(rep.residual)))
    };
    Ok((seed(r0)?, seed(r1)?))
}

struct Unknowns<T> {
    v: Vec<T>,
    omega: T,
    mu: T,
}

impl<T: Scalar> Unknowns<T> {
    fn of(p: &BranchPoint<T>) -> Self {
        Self {
            v: p.profile.values().to_vec(),
            omega: p.omega,
            mu: p.mu,
        }
    }

    fn dot(&self, o: &Self) -> T {
        let n = T::of(self.v.len() as f64);
        let s = self.v.iter().zip(&o.v).fold(T::zero(), |acc, (a, b)| acc + *a * *b);
        s / n + self.omega * o.omega + self.mu * o.mu
    }

    fn axpy(&self, a: T, d: &Self) -> Self {
        Self {
            v: self.v.iter().zip(&d.v).map(|(x, y)| *x + a * *y).collect(),
            omega: self.omega + a * d.omega,
            mu: self.mu + a * d.mu,
        }
    }

    fn scaled(&self, a: T) -> Self {
        Self {
            v: self.v.iter().map(|x| a * *x).collect(),
            omega: a * self.omega,
            mu: a * self.mu,
        }
    }

    fn diff(&self, o: &Self) -> Self {
        self.axpy(-T::one(), o)
    }
}

enum StepOutcome<T: Scalar> {
    Converged(BranchPoint<T>),
    Failed,
}

fn corrector<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    bvp: &Bvp<'_, T, K>,
    prev: &Unknowns<T>,
    tangent: &Unknowns<T>,
    ds: T,
    sigma: T,
    settings: &ContinuationSettings,
) -> Result<StepOutcome<T>> {
    let grid = bvp.grid();
    let n = grid.n();
    let tol = T::of(settings.newton.residual_tol);
    let mut x = prev.axpy(ds, tangent);
    let inv_n = T::one() / T::of(n as f64);
    for it in 0..=settings.max_corrector_iter {
        let st = BvpState {
            profile: grid.profile(x.v.clone())?,
            omega: x.omega,
            mu: x.mu,
            sigma,
        };
        if !(st.omega > T::zero()) || !st.omega.is_finite() || !st.mu.is_finite() {
            return Ok(StepOutcome::Failed);
        }
        let ev = match bvp.evaluate(&st) {
            Ok(ev) => ev,
            Err(_) => return Ok(StepOutcome::Failed),
        };
        let res = ev.residual.sup_norm();
        let ph = phase(&st.profile);
        let arc = x.diff(prev).dot(tangent) - ds;
        if !res.is_finite() {
            return Ok(StepOutcome::Failed);
        }
        if res <= tol && ph.abs() <= tol && arc.abs() <= tol {
            return Ok(StepOutcome::Converged(BranchPoint::from_state(&st, ev.u_star, it, res)));
        }
        if it == settings.max_corrector_iter {
            break;
        }
        let core = bvp.jacobian_at(&ev, &st, settings.newton.jacobian_mode, T::of(settings.newton.fd_step))?;
        let dmu = bvp.mu_derivative(&ev, &st)?;
        let mut jac = DMatrix::<T>::zeros(n + 2, n + 2);
        jac.view_mut((0, 0), (n + 1, n + 1)).copy_from(&core);
        for i in 0..n {
            jac[(i, n + 1)] = dmu[i];
            jac[(n + 1, i)] = tangent.v[i] * inv_n;
        }
        jac[(n + 1, n)] = tangent.omega;
        jac[(n + 1, n + 1)] = tangent.mu;
        let mut rhs = DVector::<T>::zeros(n + 2);
        for (i, r) in ev.residual.values().iter().enumerate() {
            rhs[i] = -*r;
        }
        rhs[n] = -ph;
        rhs[n + 1] = -arc;
        let Some(delta) = T::lu_solve(jac, rhs) else {
            return Ok(StepOutcome::Failed);
        };
        for (xi, di) in x.v.iter_mut().zip(delta.iter()) {
            *xi = *xi + *di;
        }
        x.omega = x.omega + delta[n];
        x.mu = x.mu + delta[n + 1];
    }
    Ok(StepOutcome::Failed)
}

/// Continues the branch from two seeds in the direction `seeds.0 -> seeds.1`.
pub fn continue_branch<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    bvp: &Bvp<'_, T, K>,
    seeds: (BranchPoint<T>, BranchPoint<T>),
    settings: &ContinuationSettings,
) -> Result<Branch<T>> {
    settings.validate()?;
    let sigma = seeds.1.sigma;
    let mut points = vec![seeds.0, seeds.1];
    let mut steps = Vec::new();
    let mut ds = T::of(settings.ds0);
    let (ds_min, ds_max) = (T::of(settings.ds_min), T::of(settings.ds_max));
    let omega_min = T::of(settings.omega_min);
    let termination = loop {
        if points.len() >= settings.max_points {
            break Termination::Completed;
        }
        let last = Unknowns::of(&points[points.len() - 1]);
        let before = Unknowns::of(&points[points.len() - 2]);
        let sec = last.diff(&before);
        let len = sec.dot(&sec).sqrt();
        if !(len > T::zero()) {
            break Termination::NewtonFailure;
        }
        let tangent = sec.scaled(T::one() / len);
        match corrector(bvp, &last, &tangent, ds, sigma, settings)? {
            StepOutcome::Converged(p) => {
                let iters = p.newton_iters;
                let omega = p.omega;
                points.push(p);
                steps.push(ds);
                if omega < omega_min {
                    break Termination::HomoclinicSuspected;
                }
                if iters <= settings.fast_iters {
                    ds = (ds * T::of(settings.grow)).min(ds_max);
                }
            }
            StepOutcome::Failed => {
                ds = ds * T::of(settings.shrink);
                if ds < ds_min {
                    break Termination::StepUnderflow;
                }
            }
        }
    };
    Ok(Branch {
        points,
        termination,
        steps,
    })
}

/// Second-order coefficients fitted along a branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchFit<T> {
    pub mu2: T,
    pub omega2: T,
    /// Coefficient of `r^2` in `u_inf - u_star`.
    pub uinf2: T,
    pub points: usize,
}

/// Least-squares fit `q - q_* = c2 r^2 + c4 r^4` for `q = mu`, `omega` and
/// `u_inf - u_star`, over the points with `r` in the window.
///
/// Only the leading stretch of the branch on which `r` increases is used, so
/// that large-amplitude parts folding back into the window are ignored.
pub fn fit_mu2<T: Scalar>(branch: &Branch<T>, r_window: (T, T), mu_star: T, omega_star: T) -> Result<BranchFit<T>> {
    let lead = branch
        .points
        .windows(2)
        .position(|w| w[1].r <= w[0].r)
        .map_or(branch.points.len(), |i| i + 1);
    let pts: Vec<&BranchPoint<T>> = branch.points[..lead]
        .iter()
        .filter(|p| p.r >= r_window.0 && p.r <= r_window.1 && p.r > T::zero())
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} branch points with r in [{}, {}], need at least 5",
            pts.len(),
            r_window.0,
            r_window.1
        )));
    }
    let fit = |q: &dyn Fn(&BranchPoint<T>) -> T| -> Result<T> {
        let mut a = DMatrix::<T>::zeros(2, 2);
        let mut b = DVector::<T>::zeros(2);
        for p in &pts {
            let x2 = p.r * p.r;
            let row = [x2, x2 * x2];
            for i in 0..2 {
                b[i] = b[i] + row[i] * q(p);
                for j in 0..2 {
                    a[(i, j)] = a[(i, j)] + row[i] * row[j];
                }
            }
        }
        T::lu_solve(a, b)
            .map(|c| c[0])
            .ok_or_else(|| Error::InsufficientData("amplitudes too clustered for a fit".into()))
    };
    Ok(BranchFit {
        mu2: fit(&|p| p.mu - mu_star)?,
        omega2: fit(&|p| p.omega - omega_star)?,
        uinf2: fit(&|p| p.u_inf - p.u_star)?,
        points: pts.len(),
    })
}

/// Column names of the branch CSV.
pub const BRANCH_CSV_COLUMNS: [&str; 10] = [
    "index",
    "mu",
    "omega",
    "r",
    "u_inf",
    "newton_iters",
    "residual",
    "stability",
    "lambda1",
    "termination",
];

/// Writes the branch table; `termination` is filled on the last row only.
pub fn write_branch_csv<T: Scalar, W: Write>(mut w: W, branch: &Branch<T>) -> io::Result<()> {
    writeln!(w, "{}", BRANCH_CSV_COLUMNS.join(","))?;
    let last = branch.points.len().saturating_sub(1);
    for (i, p) in branch.points.iter().enumerate() {
        let lambda1 = p.lambda1.map(|l| l.to_f64_lossy().to_string()).unwrap_or_default();
        let term = if i == last { branch.termination.as_str() } else { "" };
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{},{lambda1},{term}",
            p.mu.to_f64_lossy(),
            p.omega.to_f64_lossy(),
            p.r.to_f64_lossy(),
            p.u_inf.to_f64_lossy(),
            p.newton_iters,
            p.residual.to_f64_lossy(),
            p.stability,
        )?;
    }
    Ok(())
}

/// Writes one row of grid values per branch point.
pub fn write_profiles_csv<T: Scalar, W: Write>(mut w: W, branch: &Branch<T>) -> io::Result<()> {
    for p in &branch.points {
        let row: Vec<String> = p.profile.values().iter().map(|v| v.to_f64_lossy().to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalform::{cubic_hopf, expansion_coefficients};
    use crate::spectral::FourierGrid;

    fn setup(b: f64, g: f64, n: usize) -> (CubicKinetics<f64>, FourierGrid<f64>) {
        (CubicKinetics::new(1.0, b, g).unwrap(), FourierGrid::new(n).unwrap())
    }

    #[test]
    fn seeds_follow_the_parabola() {
        let (k, grid) = setup(1.0, 0.0, 64);
        let bvp = Bvp::new(&k, grid);
        let h = cubic_hopf(&k, 0.0).unwrap();
        let c = expansion_coefficients(&k, &h).unwrap();
        let (p0, p1) = seed_branch(&bvp, &h, &c, 0.01, 0.02, &NewtonSettings::default()).unwrap();
        assert!((p0.mu / -2.022e-6 - 1.0).abs() < 0.2, "{}", p0.mu);
        assert!((p1.mu / -8.088e-6 - 1.0).abs() < 0.2, "{}", p1.mu);
    }

    #[test]
    fn supercritical_seeds_have_positive_mu() {
        let (k, grid) = setup(0.0, -1.0, 64);
        let bvp = Bvp::new(&k, grid);
        let h = cubic_hopf(&k, 0.0).unwrap();
        let c = expansion_coefficients(&k, &h).unwrap();
        let (p0, p1) = seed_branch(&bvp, &h, &c, 0.01, 0.02, &NewtonSettings::default()).unwrap();
        assert!(p0.mu > 0.0 && p1.mu > 0.0);
    }

    #[test]
    fn zero_seed_amplitude_is_rejected() {
        let (k, grid) = setup(1.0, 0.0, 32);
        let bvp = Bvp::new(&k, grid);
        let h = cubic_hopf(&k, 0.0).unwrap();
        let c = expansion_coefficients(&k, &h).unwrap();
        let err = seed_branch(&bvp, &h, &c, 0.0, 0.02, &NewtonSettings::default()).unwrap_err();
        assert!(matches!(err, Error::DegeneratePhase(_)));
    }

    #[test]
    fn short_branch_points_satisfy_tolerance() {
        let (k, grid) = setup(0.0, -1.0, 32);
        let bvp = Bvp::new(&k, grid);
        let h = cubic_hopf(&k, 0.0).unwrap();
        let c = expansion_coefficients(&k, &h).unwrap();
        let seeds = seed_branch(&bvp, &h, &c, 0.01, 0.02, &NewtonSettings::default()).unwrap();
        let settings = ContinuationSettings { max_points: 12, ..Default::default() };
        let br = continue_branch(&bvp, seeds, &settings).unwrap();
        assert_eq!(br.termination, Termination::Completed);
        assert_eq!(br.points.len(), 12);
        for p in &br.points {
            let r = bvp.residual(&p.state()).unwrap().sup_norm();
            assert!(r <= 1e-10);
            assert!(phase(&p.profile).abs() <= 1e-10);
        }
        for s in &br.steps {
            assert!(*s >= settings.ds_min && *s <= 2.0 * settings.ds_max);
        }
        // Supercritical: mu and r grow together.
        for w in br.points.windows(2) {
            assert!(w[1].r > w[0].r && w[1].mu > w[0].mu);
        }
    }

    #[test]
    fn fit_needs_five_points() {
        let (k, grid) = setup(1.0, 0.0, 32);
        let p = BranchPoint::from_state(
            &BvpState { profile: grid.zero_profile(), omega: 1.0, mu: 0.0, sigma: 0.0 },
            0.0,
            0,
            0.0,
        );
        let _ = k;
        let br = Branch { points: vec![p; 10], termination: Termination::Completed, steps: vec![] };
        assert!(matches!(fit_mu2(&br, (0.0, 0.1), 0.0, 1.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn fit_recovers_synthetic_coefficients() {
        let (_, grid) = setup(1.0, 0.0, 16);
        let points = (1..=8)
            .map(|i| {
                let r = 0.015 * i as f64;
                let mut p = BranchPoint::from_state(
                    &BvpState { profile: grid.sample(|s| r * s.cos()), omega: 1.0, mu: 0.0, sigma: 0.0 },
                    0.0,
                    0,
                    0.0,
                );
                p.mu = -0.02 * r * r + 0.7 * r.powi(4);
                p.omega = 1.0 - 7.0 / 6.0 * r * r + 0.3 * r.powi(4);
                p
            })
            .collect::<Vec<_>>();
        // A tail folding back into the window must not enter the fit.
        let mut points = points;
        for i in 0..4 {
            let mut p = points[6 - i].clone();
            p.mu = 5.0;
            p.r *= 0.99;
            points.push(p);
        }
        let br = Branch { points, termination: Termination::Completed, steps: vec![] };
        let f = fit_mu2(&br, (0.02, 0.1), 0.0, 1.0).unwrap();
        assert!((f.mu2 + 0.02).abs() < 1e-10 && (f.omega2 + 7.0 / 6.0).abs() < 1e-10);
        assert_eq!(f.points, 5);
    }

    #[test]
    fn csv_has_fixed_columns_and_trailer() {
        let (_, grid) = setup(1.0, 0.0, 16);
        let p = BranchPoint::from_state(
            &BvpState { profile: grid.sample(|s| 0.1 * s.cos()), omega: 1.0, mu: 0.0, sigma: 0.0 },
            0.0,
            2,
            1e-12,
        );
        let br = Branch { points: vec![p.clone(), p], termination: Termination::StepUnderflow, steps: vec![] };
        let mut out = Vec::new();
        write_branch_csv(&mut out, &br).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], BRANCH_CSV_COLUMNS.join(","));
        assert!(lines[1].ends_with(','));
        assert!(lines[2].ends_with("step_underflow"));
        assert_eq!(lines[2].split(',').count(), 10);
    }
}
