//! Periodic boundary-integral problem for the boundary trace and its Newton
//! solver.
//!
//! For an equilibrium-centered trace `v` the residual is
//! `R(v) = D(omega) v - f(u* + v, sigma u* + D(omega, sigma)^{1/2} v, mu)`,
//! with `f` evaluated on the 2x-padded grid and truncated back. Unknowns are
//! the `n` grid values and `omega`; the phase condition `int sin(s) v ds = 0`
//! closes the system.
//!
//! The Nyquist mode is invisible to every term of `R`, so the residual also
//! carries the Nyquist projection of `v`. This pins that mode to zero and
//! keeps the Jacobian nonsingular.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::{equilibrium, equilibrium_slope, BoundaryKinetics};
use crate::scalar::Scalar;
use crate::spectral::{d_symbol, dhalf_symbol, dhalf_symbol_domega, FourierGrid, PeriodicProfile, Spectrum};

/// Smallest `|u_1|` that still lets the phase condition pin the orbit.
pub const MIN_FIRST_MODE: f64 = 1e-8;

/// Boundary trace together with the parameters of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BvpState<T: Scalar> {
    /// Equilibrium-centered trace `u^- - u*`.
    pub profile: PeriodicProfile<T>,
    pub omega: T,
    pub mu: T,
    pub sigma: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonSettings {
    /// Sup-norm tolerance on the residual and the phase condition.
    pub residual_tol: f64,
    pub max_iter: usize,
    pub jacobian_mode: JacobianMode,
    /// Perturbation for the finite-difference Jacobian.
    pub fd_step: f64,
    /// Reject starts whose first Fourier mode is below [`MIN_FIRST_MODE`].
    pub nontrivial: bool,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            residual_tol: 1e-10,
            max_iter: 25,
            jacobian_mode: JacobianMode::Analytic,
            fd_step: 1e-7,
            nontrivial: true,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) || self.max_iter == 0 || !(self.fd_step > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "Newton settings need residual_tol > 0, max_iter >= 1, fd_step > 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Convergence record of a Newton solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    pub phase: f64,
    /// `max(|R|_inf, |phase|)` before each step, including the final one.
    pub history: Vec<f64>,
}

/// `int_0^{2 pi} sin(s) u(s) ds = -2 pi Im u_1` (trapezoidal rule, exact for
/// trigonometric polynomials).
pub fn phase<T: Scalar>(p: &PeriodicProfile<T>) -> T {
    -T::TAU() * p.mode(1).im
}

/// Residual and the pointwise linearization data at one state.
#[derive(Debug, Clone)]
pub struct Evaluation<T: Scalar> {
    pub residual: PeriodicProfile<T>,
    pub u_star: T,
    a1: Vec<T>,
    a2: Vec<T>,
    amu: Vec<T>,
}

impl<T: Scalar> Evaluation<T> {
    /// `d1 f` and `d2 f` along the orbit, sampled on the 2x-padded grid.
    pub fn padded_partials(&self) -> (&[T], &[T]) {
        (&self.a1, &self.a2)
    }
}

/// Boundary-value problem for a kinetics on a fixed grid.
pub struct Bvp<'k, T: Scalar, K: BoundaryKinetics<T> + ?Sized> {
    kinetics: &'k K,
    grid: FourierGrid<T>,
    equilibrium_guess: T,
}

impl<'k, T: Scalar, K: BoundaryKinetics<T> + ?Sized> Bvp<'k, T, K> {
    pub fn new(kinetics: &'k K, grid: FourierGrid<T>) -> Self {
        Self {
            kinetics,
            grid,
            equilibrium_guess: T::zero(),
        }
    }

    /// Starting point for the equilibrium Newton iteration.
    pub fn with_equilibrium_guess(mut self, guess: T) -> Self {
        self.equilibrium_guess = guess;
        self
    }

    pub fn grid(&self) -> &FourierGrid<T> {
        &self.grid
    }

    pub fn kinetics(&self) -> &K {
        self.kinetics
    }

    pub fn equilibrium(&self, mu: T, sigma: T) -> Result<T> {
        equilibrium(self.kinetics, mu, sigma, self.equilibrium_guess)
    }

    fn check_state(&self, st: &BvpState<T>) -> Result<()> {
        if st.profile.n() != self.grid.n() {
            return Err(Error::InvalidArgument(format!(
                "profile has {} points, solver grid has {}",
                st.profile.n(),
                self.grid.n()
            )));
        }
        if !(st.omega > T::zero()) || st.sigma < T::zero() {
            return Err(Error::InvalidArgument(format!(
                "need omega > 0 and sigma >= 0 (got {}, {})",
                st.omega, st.sigma
            )));
        }
        Ok(())
    }

    fn multiply(&self, spec: &Spectrum<T>, sym: impl Fn(i64) -> Complex<T>) -> Spectrum<T> {
        let mut out = Spectrum::zeros(self.grid.n());
        let m = self.grid.max_mode();
        for l in -m..=m {
            out.set_mode(l, sym(l) * spec.mode(l));
        }
        out
    }

    fn values_of(&self, spec: &Spectrum<T>) -> Vec<T> {
        self.grid
            .inverse_complex(spec.as_slice())
            .expect("spectrum on solver grid")
            .into_iter()
            .map(|c| c.re)
            .collect()
    }

    fn nyquist(&self) -> i64 {
        self.grid.n() as i64 / 2
    }

    /// Residual plus the padded-grid partials needed for Jacobians.
    pub fn evaluate(&self, st: &BvpState<T>) -> Result<Evaluation<T>> {
        self.check_state(st)?;
        let (omega, sigma, mu) = (st.omega, st.sigma, st.mu);
        let u_star = self.equilibrium(mu, sigma)?;
        let spec = st.profile.spectrum();
        let dh = self.multiply(spec, |l| dhalf_symbol(omega, sigma, l));
        let v_pad = self.grid.padded_values(spec);
        let g_pad = self.grid.padded_values(&dh);
        let m = v_pad.len();
        let (mut f_pad, mut a1, mut a2, mut amu) = (vec![T::zero(); m], vec![T::zero(); m], vec![T::zero(); m], vec![T::zero(); m]);
        for j in 0..m {
            let u = u_star + v_pad[j];
            let g = sigma * u_star + g_pad[j];
            f_pad[j] = self.kinetics.eval(u, g, mu);
            let p = self.kinetics.partials(u, g, mu);
            a1[j] = p.d1;
            a2[j] = p.d2;
            amu[j] = p.dmu;
        }
        let f_spec = self.grid.truncate_padded(&f_pad)?;
        let mut r = self.multiply(spec, |l| d_symbol(omega, l));
        for l in -self.grid.max_mode()..=self.grid.max_mode() {
            r.set_mode(l, r.mode(l) - f_spec.mode(l));
        }
        let nyq = self.nyquist();
        r.set_mode(nyq, spec.mode(nyq));
        Ok(Evaluation {
            residual: self.grid.from_spectrum(&r)?,
            u_star,
            a1,
            a2,
            amu,
        })
    }

    /// Residual `R(v)` on the grid.
    pub fn residual(&self, st: &BvpState<T>) -> Result<PeriodicProfile<T>> {
        Ok(self.evaluate(st)?.residual)
    }

    /// `P[a p_pad + b q_pad]` truncated to the grid band.
    fn truncated_combination(&self, ev: &Evaluation<T>, p: &Spectrum<T>, q: &Spectrum<T>) -> Spectrum<T> {
        let pp = self.grid.padded_values(p);
        let qp = self.grid.padded_values(q);
        let prod: Vec<T> = (0..pp.len()).map(|j| ev.a1[j] * pp[j] + ev.a2[j] * qp[j]).collect();
        self.grid.truncate_padded(&prod).expect("padded length")
    }

    /// Spectrum of the linearized residual applied to a perturbation with
    /// spectrum `dv`.
    fn apply_linearized_spec(&self, ev: &Evaluation<T>, st: &BvpState<T>, dv: &Spectrum<T>) -> Spectrum<T> {
        let (omega, sigma) = (st.omega, st.sigma);
        let dh = self.multiply(dv, |l| dhalf_symbol(omega, sigma, l));
        let nl = self.truncated_combination(ev, dv, &dh);
        let mut out = self.multiply(dv, |l| d_symbol(omega, l));
        for l in -self.grid.max_mode()..=self.grid.max_mode() {
            out.set_mode(l, out.mode(l) - nl.mode(l));
        }
        let nyq = self.nyquist();
        out.set_mode(nyq, dv.mode(nyq));
        out
    }

    /// Linearized residual `dR/dv` applied to grid values `dv`.
    pub fn apply_linearized(&self, ev: &Evaluation<T>, st: &BvpState<T>, dv: &PeriodicProfile<T>) -> Vec<T> {
        self.values_of(&self.apply_linearized_spec(ev, st, dv.spectrum()))
    }

    /// `dR/domega` at fixed `v`, `mu`.
    pub fn omega_derivative(&self, ev: &Evaluation<T>, st: &BvpState<T>) -> Vec<T> {
        let (omega, sigma) = (st.omega, st.sigma);
        let spec = st.profile.spectrum();
        let zero = Spectrum::zeros(self.grid.n());
        let dq = self.multiply(spec, |l| dhalf_symbol_domega(omega, sigma, l));
        // Only the flux argument depends on omega.
        let nl = self.truncated_combination(ev, &zero, &dq);
        let mut out = self.multiply(spec, |l| Complex::new(T::zero(), T::of_i(l)));
        for l in -self.grid.max_mode()..=self.grid.max_mode() {
            out.set_mode(l, out.mode(l) - nl.mode(l));
        }
        self.values_of(&out)
    }

    /// Total `dR/dmu` at fixed `v`, `omega`, including the drift of the
    /// equilibrium `u*(mu, sigma)`.
    pub fn mu_derivative(&self, ev: &Evaluation<T>, st: &BvpState<T>) -> Result<Vec<T>> {
        let slope = equilibrium_slope(self.kinetics, ev.u_star, st.mu, st.sigma)?;
        let pad: Vec<T> = (0..ev.a1.len())
            .map(|j| -(ev.a1[j] * slope + ev.a2[j] * st.sigma * slope + ev.amu[j]))
            .collect();
        let spec = self.grid.truncate_padded(&pad)?;
        Ok(self.values_of(&spec))
    }

    /// Bordered Jacobian of `(R, phase)` with respect to `(v, omega)`,
    /// size `(n + 1) x (n + 1)`.
    pub fn jacobian(&self, st: &BvpState<T>, mode: JacobianMode, fd_step: T) -> Result<DMatrix<T>> {
        let ev = self.evaluate(st)?;
        self.jacobian_at(&ev, st, mode, fd_step)
    }

    pub fn jacobian_at(
        &self,
        ev: &Evaluation<T>,
        st: &BvpState<T>,
        mode: JacobianMode,
        fd_step: T,
    ) -> Result<DMatrix<T>> {
        let n = self.grid.n();
        let mut jac = DMatrix::<T>::zeros(n + 1, n + 1);
        match mode {
            JacobianMode::Analytic => {
                let inv_n = T::one() / T::of(n as f64);
                let s = self.grid.s();
                for j in 0..n {
                    // Unit grid vector e_j has coefficients e^{-i l s_j} / n.
                    let mut e = Spectrum::zeros(n);
                    for l in -(n as i64) / 2 + 1..=(n as i64) / 2 {
                        let ang = -T::of_i(l) * s[j];
                        e.set_mode(l, Complex::new(ang.cos(), ang.sin()) * inv_n);
                    }
                    let col = self.values_of(&self.apply_linearized_spec(ev, st, &e));
                    for (i, v) in col.into_iter().enumerate() {
                        jac[(i, j)] = v;
                    }
                }
                for (i, v) in self.omega_derivative(ev, st).into_iter().enumerate() {
                    jac[(i, n)] = v;
                }
            }
            JacobianMode::FiniteDifference => {
                let two_h = T::of(2.0) * fd_step;
                for j in 0..=n {
                    let (mut plus, mut minus) = (st.clone(), st.clone());
                    if j < n {
                        let mut vp = st.profile.values().to_vec();
                        let mut vm = vp.clone();
                        vp[j] = vp[j] + fd_step;
                        vm[j] = vm[j] - fd_step;
                        plus.profile = self.grid.profile(vp)?;
                        minus.profile = self.grid.profile(vm)?;
                    } else {
                        plus.omega = plus.omega + fd_step;
                        minus.omega = minus.omega - fd_step;
                    }
                    let rp = self.residual(&plus)?;
                    let rm = self.residual(&minus)?;
                    for i in 0..n {
                        jac[(i, j)] = (rp.values()[i] - rm.values()[i]) / two_h;
                    }
                }
            }
        }
        let w = T::TAU() / T::of(n as f64);
        for (j, sj) in self.grid.s().into_iter().enumerate() {
            jac[(n, j)] = w * sj.sin();
        }
        Ok(jac)
    }

    /// Newton iteration on `(v, omega)` at fixed `(mu, sigma)`.
    pub fn newton_solve(&self, initial: &BvpState<T>, settings: &NewtonSettings) -> Result<(BvpState<T>, NewtonReport)> {
        settings.validate()?;
        self.check_state(initial)?;
        let tol = T::of(settings.residual_tol);
        let fd = T::of(settings.fd_step);
        let n = self.grid.n();
        let mut st = initial.clone();
        if settings.nontrivial {
            let u1 = st.profile.mode(1).norm();
            if u1 < T::of(MIN_FIRST_MODE) {
                return Err(Error::DegeneratePhase(u1.to_f64_lossy()));
            }
        }
        let mut history = Vec::new();
        for it in 0..=settings.max_iter {
            let ev = self.evaluate(&st)?;
            let res = ev.residual.sup_norm();
            let ph = phase(&st.profile).abs();
            history.push(res.max(ph).to_f64_lossy());
            if res <= tol && ph <= tol {
                return Ok((
                    st,
                    NewtonReport {
                        iterations: it,
                        residual: res.to_f64_lossy(),
                        phase: ph.to_f64_lossy(),
                        history,
                    },
                ));
            }
            if it == settings.max_iter || !res.is_finite() {
                break;
            }
            let jac = self.jacobian_at(&ev, &st, settings.jacobian_mode, fd)?;
            let mut rhs = DVector::<T>::zeros(n + 1);
            for (i, v) in ev.residual.values().iter().enumerate() {
                rhs[i] = -*v;
            }
            rhs[n] = -phase(&st.profile);
            let delta = T::lu_solve(jac, rhs).ok_or(Error::Singular("bordered Newton"))?;
            let vals: Vec<T> = st.profile.values().iter().enumerate().map(|(i, v)| *v + delta[i]).collect();
            st.profile = self.grid.profile(vals)?;
            st.omega = st.omega + delta[n];
            if !(st.omega > T::zero()) || !st.omega.is_finite() {
                break;
            }
        }
        Err(Error::NoConvergence {
            what: "periodic-orbit Newton",
            iterations: settings.max_iter,
            residual: history.last().copied().unwrap_or(f64::NAN),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::char_fn;
    use crate::kinetics::CubicKinetics;
    use crate::normalform::{cubic_hopf, expansion_coefficients, initial_profile};
    use proptest::prelude::*;

    fn cubic(a: f64, b: f64, g: f64) -> CubicKinetics<f64> {
        CubicKinetics::new(a, b, g).unwrap()
    }

    fn guess(k: &CubicKinetics<f64>, grid: &FourierGrid<f64>, r: f64, order: u8) -> BvpState<f64> {
        let h = cubic_hopf(k, 0.0).unwrap();
        let c = expansion_coefficients(k, &h).unwrap();
        BvpState {
            profile: initial_profile(grid, r, k, &h, &c, order).unwrap(),
            omega: h.omega_star + c.omega2 * r * r,
            mu: c.mu2 * r * r,
            sigma: 0.0,
        }
    }

    #[test]
    fn zero_profile_has_zero_residual() {
        let k = cubic(1.0, 1.0, 0.5);
        let g = FourierGrid::new(32).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        for &(w, m, s) in &[(1.0, 0.0, 0.0), (0.3, 0.2, 0.5)] {
            let st = BvpState { profile: g.zero_profile(), omega: w, mu: m, sigma: s };
            assert_eq!(bvp.residual(&st).unwrap().sup_norm(), 0.0);
        }
    }

    #[test]
    fn kernel_mode_has_quadratic_residual() {
        let k = cubic(1.0, 1.0, 0.0);
        let g = FourierGrid::new(64).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let r = 1e-8;
        let st = BvpState { profile: g.sample(|s| r * s.cos()), omega: 1.0, mu: 0.0, sigma: 0.0 };
        assert!(bvp.residual(&st).unwrap().sup_norm() <= 1e-14 + 2.0 * r * r);
    }

    #[test]
    fn residual_of_second_order_guess_is_third_order() {
        let k = cubic(1.0, 1.0, 0.0);
        let g = FourierGrid::new(64).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let res = |r| bvp.residual(&guess(&k, &g, r, 2)).unwrap().sup_norm();
        for &r in &[0.08, 0.04] {
            let ratio = res(r) / res(r / 2.0);
            assert!((6.0..=10.0).contains(&ratio), "r = {r}: ratio {ratio}");
        }
    }

    #[test]
    fn phase_examples() {
        let g = FourierGrid::<f64>::new(32).unwrap();
        assert!(phase(&g.sample(|s| 0.4 * s.cos())).abs() < 1e-15);
        assert!((phase(&g.sample(|s| 0.4 * s.sin())) - std::f64::consts::PI * 0.4).abs() < 1e-14);
        assert!(phase(&g.sample(|_| 2.0)).abs() < 1e-15);
        // Agrees with the trapezoidal sum.
        let p = g.sample(|s| (s + 0.3).cos() + 0.2 * (2.0 * s).sin());
        let trap: f64 = p.values().iter().zip(g.s()).map(|(v, s)| v * s.sin()).sum::<f64>() * std::f64::consts::TAU / 32.0;
        assert!((phase(&p) - trap).abs() < 1e-14);
    }

    #[test]
    fn linearization_at_zero_is_the_characteristic_function() {
        let k = cubic(1.0, 1.0, 0.0);
        let g = FourierGrid::new(32).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let sigma = 0.3;
        let h = cubic_hopf(&k, sigma).unwrap();
        let st = BvpState { profile: g.zero_profile(), omega: h.omega_star, mu: 0.0, sigma };
        let ev = bvp.evaluate(&st).unwrap();
        for l in 0..8i64 {
            let p = g.sample(|s| (l as f64 * s).cos());
            let out = g.profile(bvp.apply_linearized(&ev, &st, &p)).unwrap();
            let want = char_fn(&k, Complex::new(0.0, h.omega_star * l as f64), 0.0, sigma).unwrap();
            let scale = if l == 0 { 1.0 } else { 0.5 };
            assert!((out.mode(l) - want * scale).norm() < 1e-12, "mode {l}");
        }
    }

    #[test]
    fn zero_profile_block_has_two_dimensional_kernel() {
        let k = cubic(1.0, 1.0, 0.0);
        let g = FourierGrid::new(16).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let st = BvpState { profile: g.zero_profile(), omega: 1.0, mu: 0.0, sigma: 0.0 };
        let jac = bvp.jacobian(&st, JacobianMode::Analytic, 1e-7).unwrap();
        let block = jac.view((0, 0), (16, 16)).into_owned();
        let mut sv: Vec<f64> = block.singular_values().iter().copied().collect();
        sv.sort_by(f64::total_cmp);
        assert!(sv[0] < 1e-12 && sv[1] < 1e-12, "{sv:?}");
        assert!(sv[2] > 1e-3);
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let k = cubic(1.0, 1.0, -0.4);
        let g = FourierGrid::new(16).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let mut st = guess(&k, &g, 0.3, 2);
        st.sigma = 0.2;
        let a = bvp.jacobian(&st, JacobianMode::Analytic, 1e-7).unwrap();
        let f = bvp.jacobian(&st, JacobianMode::FiniteDifference, 1e-6).unwrap();
        let err = (&a - &f).abs().max();
        assert!(err < 1e-7, "max deviation {err}");
        let col_a = a.column(16);
        let col_f = f.column(16);
        assert!((col_a - col_f).norm() <= 1e-5 * col_a.norm());
    }

    #[test]
    fn mu_derivative_matches_finite_differences() {
        // Kinetics with a moving equilibrium exercise the u* drift term.
        let k = crate::kinetics::FnKinetics(|u: f64, g: f64, mu: f64| {
            -u + 0.5 * u * u - 0.3 * u * u * u + (mu + 2f64.sqrt()) * g + 0.2 * mu
        });
        let g = FourierGrid::new(16).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let st = BvpState { profile: g.sample(|s| 0.2 * s.cos() + 0.05 * (2.0 * s).sin()), omega: 0.9, mu: 0.1, sigma: 0.25 };
        let ev = bvp.evaluate(&st).unwrap();
        let dm = bvp.mu_derivative(&ev, &st).unwrap();
        let h = 1e-6;
        let rp = bvp.residual(&BvpState { mu: st.mu + h, ..st.clone() }).unwrap();
        let rm = bvp.residual(&BvpState { mu: st.mu - h, ..st.clone() }).unwrap();
        for (i, d) in dm.iter().enumerate() {
            let fd = (rp.values()[i] - rm.values()[i]) / (2.0 * h);
            assert!((fd - d).abs() < 1e-6, "row {i}: {fd} vs {d}");
        }
    }

    #[test]
    fn newton_converges_from_asymptotic_guess() {
        let k = cubic(1.0, 1.0, 0.0);
        let g = FourierGrid::new(64).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let (sol, rep) = bvp.newton_solve(&guess(&k, &g, 0.05, 2), &NewtonSettings::default()).unwrap();
        assert!(rep.iterations <= 6, "{rep:?}");
        assert!(rep.residual <= 1e-10);
        // mu2 is small here, so the O(r^4) part of mu(r) shifts r at fixed mu
        // by a few percent; check that the offset is genuinely fourth order.
        let r = sol.profile.amplitude();
        let mu2 = 1.0 / 3.0 - 1.0 / (2.0 * 2f64.sqrt());
        assert!((r / 0.05 - 1.0).abs() < 0.1, "amplitude {r}");
        let mu4 = (sol.mu - mu2 * r * r) / r.powi(4);
        assert!(mu4.abs() < 5.0, "mu4 estimate {mu4}");
        assert!((sol.omega - (1.0 - 7.0 / 6.0 * r * r)).abs() < 5.0 * r.powi(4));
        // Quadratic convergence: e_{k+1} / e_k^2 stays bounded.
        let hist = &rep.history;
        for w in hist.windows(2) {
            if w[1] > 1e-13 {
                assert!(w[1] / (w[0] * w[0]) < 1e3, "{hist:?}");
            }
        }
        // Restarting from the solution takes no steps.
        let (again, rep2) = bvp.newton_solve(&sol, &NewtonSettings::default()).unwrap();
        assert!(rep2.iterations <= 1);
        assert!((again.omega - sol.omega).abs() < 1e-10);
    }

    #[test]
    fn newton_amplitude_matches_target_when_well_conditioned() {
        for &gm in &[1.0, -1.0] {
            let k = cubic(1.0, 0.0, gm);
            let g = FourierGrid::new(64).unwrap();
            let bvp = Bvp::new(&k, g.clone());
            let (sol, rep) = bvp.newton_solve(&guess(&k, &g, 0.05, 2), &NewtonSettings::default()).unwrap();
            assert!(rep.iterations <= 6);
            assert!((sol.profile.amplitude() / 0.05 - 1.0).abs() < 0.02, "gamma {gm}: {}", sol.profile.amplitude());
        }
    }

    #[test]
    fn fd_jacobian_mode_also_converges() {
        let k = cubic(1.0, 0.0, -1.0);
        let g = FourierGrid::new(16).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let settings = NewtonSettings { jacobian_mode: JacobianMode::FiniteDifference, fd_step: 1e-6, ..Default::default() };
        let (sol, _) = bvp.newton_solve(&guess(&k, &g, 0.1, 2), &settings).unwrap();
        let (ref_sol, _) = bvp.newton_solve(&guess(&k, &g, 0.1, 2), &NewtonSettings::default()).unwrap();
        assert!((sol.omega - ref_sol.omega).abs() < 1e-10);
    }

    #[test]
    fn newton_on_zero_profile_stays_trivial() {
        let k = cubic(1.0, 1.0, 0.0);
        let g = FourierGrid::new(32).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let st = BvpState { profile: g.zero_profile(), omega: 1.0, mu: 0.01, sigma: 0.0 };
        let trivial = NewtonSettings { nontrivial: false, ..Default::default() };
        let (sol, rep) = bvp.newton_solve(&st, &trivial).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(sol.profile.amplitude(), 0.0);
    }

    #[test]
    fn newton_rejects_degenerate_phase() {
        let k = cubic(1.0, 1.0, 0.0);
        let g = FourierGrid::new(32).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let st = BvpState { profile: g.sample(|s| 0.1 * (2.0 * s).cos()), omega: 1.0, mu: 0.0, sigma: 0.0 };
        assert!(matches!(bvp.newton_solve(&st, &NewtonSettings::default()), Err(Error::DegeneratePhase(_))));
    }

    #[test]
    fn odd_kinetics_give_half_period_antisymmetry() {
        let k = cubic(1.0, 0.0, -1.0);
        let g = FourierGrid::new(64).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let (sol, _) = bvp.newton_solve(&guess(&k, &g, 0.2, 2), &NewtonSettings::default()).unwrap();
        let shifted = g.shift(&sol.profile, 32);
        let err = shifted.values().iter().zip(sol.profile.values()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn plus_and_minus_amplitude_starts_agree_up_to_half_shift() {
        let k = cubic(1.0, 1.0, 0.0);
        let g = FourierGrid::new(64).unwrap();
        let bvp = Bvp::new(&k, g.clone());
        let plus = guess(&k, &g, 0.05, 2);
        // Expansion at -r: the first-order term flips sign, the second does not.
        let flip: Vec<f64> = plus.profile.values().iter().zip(g.s()).map(|(v, s)| v - 0.1 * s.cos()).collect();
        let minus = BvpState { profile: g.profile(flip).unwrap(), ..plus.clone() };
        let (a, _) = bvp.newton_solve(&plus, &NewtonSettings::default()).unwrap();
        let (b, _) = bvp.newton_solve(&minus, &NewtonSettings::default()).unwrap();
        let b_back = g.shift(&b.profile, 32);
        let err = a.profile.values().iter().zip(b_back.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
        assert!((a.omega - b.omega).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn residual_is_translation_equivariant(k_shift in 0usize..32, b in -2.0f64..2.0, gm in -1.0f64..1.0, a1 in 0.0f64..0.5, a2 in -0.3f64..0.3) {
            let k = cubic(1.0, b, gm);
            let g = FourierGrid::new(32).unwrap();
            let bvp = Bvp::new(&k, g.clone());
            let p = g.sample(|s| a1 * s.cos() + a2 * (2.0 * s + 0.4).sin() + 0.1);
            let st = BvpState { profile: p.clone(), omega: 1.1, mu: 0.05, sigma: 0.1 };
            let r = bvp.residual(&st).unwrap();
            let rs = bvp.residual(&BvpState { profile: g.shift(&p, k_shift), ..st }).unwrap();
            let want = g.shift(&r, k_shift);
            for (x, y) in rs.values().iter().zip(want.values()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
