//! Bulk field reconstruction from boundary data, far-field fits, and a
//! time-domain simulator used as an independent oracle.
//!
//! The bulk obeys `u_t = u_xx - sigma^2 u` on `x > 0` with the dynamic
//! boundary condition `d/dt u(t, 0) = f(u(t, 0), d_n u(t, 0), mu)`, where
//! `d_n = -d_x` is the outer normal derivative.

use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinetics::BoundaryKinetics;
use crate::scalar::Scalar;
use crate::spectral::{dhalf_symbol, s_grid, FourierGrid, PeriodicProfile};

/// Bulk field `u(s, x)` on a phase-depth grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSlice<T: Scalar> {
    pub s_grid: Vec<T>,
    pub x_grid: Vec<T>,
    /// `values[(i, j)] = u(s_i, x_j)`.
    pub values: DMatrix<T>,
    pub sigma: T,
    /// Coefficient of `e^{-sigma x}` in the tail.
    pub u_inf: T,
}

/// Envelope `sup_s |u(s, x) - u_inf e^{-sigma x}| <= c e^{-eta x}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarField<T> {
    pub u_inf: T,
    pub c: T,
    /// `+inf` when the transient part is negligible on the whole grid.
    pub eta: T,
}

/// Bulk field of a periodic orbit with boundary trace `p`, frequency `omega`
/// and degradation `sigma`: mode `l` decays like `e^{-sqrt(i omega l + sigma^2) x}`.
pub fn reconstruct<T: Scalar>(p: &PeriodicProfile<T>, omega: T, sigma: T, x_grid: &[T]) -> Result<FieldSlice<T>> {
    if !(omega > T::zero()) {
        return Err(Error::InvalidArgument(format!("omega must be > 0, got {omega}")));
    }
    if sigma < T::zero() {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    let n = p.n();
    let grid = FourierGrid::<T>::new(n)?;
    let max_mode = grid.max_mode();
    let rates: Vec<Complex<T>> = (0..=max_mode).map(|l| dhalf_symbol(omega, sigma, l)).collect();
    let mut values = DMatrix::<T>::zeros(n, x_grid.len());
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for (j, &x) in x_grid.iter().enumerate() {
        buf.iter_mut().for_each(|c| *c = Complex::new(T::zero(), T::zero()));
        buf[0] = Complex::from(p.mode(0).re * (-sigma * x).exp());
        for l in 1..=max_mode {
            let c = p.mode(l) * (-rates[l as usize] * x).exp();
            buf[l as usize] = c;
            buf[n - l as usize] = c.conj();
        }
        let vals = grid.inverse_complex(&buf)?;
        for (i, v) in vals.iter().enumerate() {
            values[(i, j)] = v.re;
        }
    }
    Ok(FieldSlice {
        s_grid: s_grid(n),
        x_grid: x_grid.to_vec(),
        values,
        sigma,
        u_inf: p.mode(0).re,
    })
}

impl<T: Scalar> FieldSlice<T> {
    /// `sup_s |u(s, x_j) - u_inf e^{-sigma x_j}|` for each depth.
    pub fn transient_envelope(&self) -> Vec<T> {
        self.x_grid
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let base = self.u_inf * (-self.sigma * x).exp();
                self.values.column(j).iter().fold(T::zero(), |m, &v| m.max((v - base).abs()))
            })
            .collect()
    }
}

/// Fits the decay rate of the transient part on the tail half of the depth
/// grid by least squares on `log sup_s |u - u_inf e^{-sigma x}|`.
///
/// Values at roundoff level are dropped. `c` is the smallest constant for
/// which the envelope bound holds on the whole grid.
pub fn fit_far_field<T: Scalar>(slice: &FieldSlice<T>) -> Result<FarField<T>> {
    let nx = slice.x_grid.len();
    if nx < 4 {
        return Err(Error::InsufficientData(format!("{nx} depths, need at least 4")));
    }
    let env = slice.transient_envelope();
    let scale = slice.values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let floor = T::epsilon() * T::of(1e3) * scale.max(T::min_positive_value());
    let tail: Vec<(T, T)> = (nx / 2..nx)
        .filter(|&j| env[j] > floor)
        .map(|j| (slice.x_grid[j], env[j].ln()))
        .collect();
    if tail.is_empty() && env.iter().all(|&e| e <= floor) {
        return Ok(FarField {
            u_inf: slice.u_inf,
            c: T::zero(),
            eta: T::infinity(),
        });
    }
    if tail.len() < 2 {
        return Err(Error::InsufficientData(
            "transient part is at roundoff level on the tail half; shorten the depth grid".into(),
        ));
    }
    let m = T::of(tail.len() as f64);
    let (sx, sy) = tail.iter().fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (sxx, sxy) = tail
        .iter()
        .fold((T::zero(), T::zero()), |(a, b), &(x, y)| (a + (x - mx) * (x - mx), b + (x - mx) * (y - my)));
    let eta = -sxy / sxx;
    if !(eta > T::zero()) {
        return Err(Error::NonDecaying(eta.to_f64_lossy()));
    }
    let c = slice
        .x_grid
        .iter()
        .zip(&env)
        .fold(T::zero(), |acc, (&x, &e)| acc.max(e * (eta * x).exp()));
    Ok(FarField { u_inf: slice.u_inf, c, eta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarBc {
    DirichletZero,
    NeumannZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSettings {
    /// Truncation depth `L`.
    pub depth: f64,
    pub dx: f64,
    pub dt: f64,
    /// Horizon `T`.
    pub horizon: f64,
    pub far_bc: FarBc,
    /// Runs stop as diverged once `|u-|` exceeds this.
    pub blowup_cap: f64,
    /// Time between stored bulk snapshots; `0` stores none.
    pub snapshot_every: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            depth: 60.0,
            dx: 0.05,
            dt: 0.01,
            horizon: 200.0,
            far_bc: FarBc::DirichletZero,
            blowup_cap: 1e6,
            snapshot_every: 0.0,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be > 0, got {v}")))
            }
        };
        pos(self.depth, "depth")?;
        pos(self.dx, "dx")?;
        pos(self.dt, "dt")?;
        pos(self.blowup_cap, "blowup_cap")?;
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be >= 0, got {}", self.horizon)));
        }
        if !(self.snapshot_every >= 0.0) {
            return Err(Error::InvalidArgument("snapshot_every must be >= 0".into()));
        }
        if self.depth / self.dx < 3.0 {
            return Err(Error::InvalidArgument("depth must span at least three cells".into()));
        }
        Ok(())
    }

    /// Number of cells and time steps.
    pub fn sizes(&self) -> (usize, usize) {
        (
            (self.depth / self.dx).round() as usize,
            (self.horizon / self.dt).round() as usize,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Scalar> {
    pub t: Vec<T>,
    pub u_minus: Vec<T>,
    /// Normal derivative `d_n u(t, 0)`.
    pub flux: Vec<T>,
    pub x_grid: Vec<T>,
    pub snapshots: Vec<(T, Vec<T>)>,
    /// Bulk state at the final time.
    pub final_bulk: Vec<T>,
}

/// Solves a tridiagonal system with constant off-diagonals in place.
struct Tridiag<T> {
    sub: T,
    /// Modified diagonal and reciprocal pivots of the forward sweep.
    cprime: Vec<T>,
    inv: Vec<T>,
}

impl<T: Scalar> Tridiag<T> {
    fn new(diag: &[T], sub: T, sup: T, last_sub: T) -> Self {
        let m = diag.len();
        let mut cprime = vec![T::zero(); m];
        let mut inv = vec![T::zero(); m];
        let mut prev_c = T::zero();
        for i in 0..m {
            let a = if i == 0 {
                T::zero()
            } else if i == m - 1 {
                last_sub
            } else {
                sub
            };
            let denom = diag[i] - a * prev_c;
            inv[i] = T::one() / denom;
            cprime[i] = sup * inv[i];
            prev_c = cprime[i];
        }
        Self { sub, cprime, inv }
    }

    fn solve(&self, rhs: &mut [T], last_sub: T) {
        let m = rhs.len();
        for i in 0..m {
            let a = if i == 0 {
                T::zero()
            } else if i == m - 1 {
                last_sub
            } else {
                self.sub
            };
            let prev = if i == 0 { T::zero() } else { rhs[i - 1] };
            rhs[i] = (rhs[i] - a * prev) * self.inv[i];
        }
        for i in (0..m.saturating_sub(1)).rev() {
            rhs[i] = rhs[i] - self.cprime[i] * rhs[i + 1];
        }
    }
}

/// Crank-Nicolson stepper for the bulk with a prescribed boundary value.
struct BulkStepper<T> {
    /// Unknowns are `u_1 ..= u_m`; `u_0` is the boundary value.
    m: usize,
    r: T,
    decay: T,
    last_sub: T,
    tri: Tridiag<T>,
    /// Response of the new bulk state to a unit change of the new boundary value.
    w: Vec<T>,
    far_bc: FarBc,
}

impl<T: Scalar> BulkStepper<T> {
    fn new(cells: usize, dx: T, dt: T, sigma: T, far_bc: FarBc) -> Self {
        let r = dt / (dx * dx);
        let decay = dt * sigma * sigma;
        let half = T::of(0.5);
        // Dirichlet: unknowns 1..cells-1; Neumann: 1..cells with a mirrored ghost.
        let m = match far_bc {
            FarBc::DirichletZero => cells - 1,
            FarBc::NeumannZero => cells,
        };
        let diag = vec![T::one() + r + half * decay; m];
        let last_sub = match far_bc {
            FarBc::DirichletZero => -half * r,
            FarBc::NeumannZero => -r,
        };
        let tri = Tridiag::new(&diag, -half * r, -half * r, last_sub);
        let mut w = vec![T::zero(); m];
        w[0] = half * r;
        tri.solve(&mut w, last_sub);
        Self {
            m,
            r,
            decay,
            last_sub,
            tri,
            w,
            far_bc,
        }
    }

    /// Advances `u` (length `cells + 1`) with the old boundary value in
    /// `u[0]` and the new one `b_new`; returns the new state.
    fn step(&self, u: &[T], b_new: T) -> Vec<T> {
        let half = T::of(0.5);
        let hr = half * self.r;
        let keep = T::one() - self.r - half * self.decay;
        let mut rhs = vec![T::zero(); self.m];
        for (k, slot) in rhs.iter_mut().enumerate() {
            let i = k + 1;
            let left = u[i - 1];
            // Past the last node the Neumann ghost mirrors `u[i - 1]`.
            let right = if i + 1 < u.len() { u[i + 1] } else { u[i - 1] };
            *slot = keep * u[i] + hr * (left + right);
        }
        rhs[0] = rhs[0] + hr * b_new;
        self.tri.solve(&mut rhs, self.last_sub);
        let mut out = Vec::with_capacity(u.len());
        out.push(b_new);
        out.extend(rhs);
        if self.far_bc == FarBc::DirichletZero {
            out.push(T::zero());
        }
        out
    }

    /// Shifts a state computed with boundary value `b_old` to `b_new`.
    fn correct(&self, u: &mut [T], b_old: T, b_new: T) {
        let d = b_new - b_old;
        u[0] = b_new;
        for (k, w) in self.w.iter().enumerate() {
            u[k + 1] = u[k + 1] + d * *w;
        }
    }
}

/// Second-order one-sided normal derivative `d_n u = -d_x u` at `x = 0`.
pub fn boundary_flux<T: Scalar>(u: &[T], dx: T) -> T {
    (T::of(3.0) * u[0] - T::of(4.0) * u[1] + u[2]) / (T::of(2.0) * dx)
}

/// Integrates the coupled system from `u(0, x) = bulk0(x)` with boundary
/// value `u_minus0`.
///
/// The bulk is advanced by Crank-Nicolson and the boundary ODE by Heun's
/// method; the bulk solve for the corrector boundary value is applied as an
/// exact linear update of the predictor solve.
pub fn simulate<T: Scalar, K: BoundaryKinetics<T> + ?Sized>(
    k: &K,
    mu: T,
    sigma: T,
    settings: &SimSettings,
    u_minus0: T,
    bulk0: impl Fn(T) -> T,
) -> Result<Trajectory<T>> {
    settings.validate()?;
    if sigma < T::zero() {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
    }
    let (cells, steps) = settings.sizes();
    let dx = T::of(settings.depth) / T::of(cells as f64);
    let dt = T::of(settings.dt);
    let cap = T::of(settings.blowup_cap);
    let x_grid: Vec<T> = (0..=cells).map(|j| T::of(j as f64) * dx).collect();
    let mut u: Vec<T> = x_grid.iter().map(|&x| bulk0(x)).collect();
    u[0] = u_minus0;
    if settings.far_bc == FarBc::DirichletZero {
        u[cells] = T::zero();
    }
    let stepper = BulkStepper::new(cells, dx, dt, sigma, settings.far_bc);
    let snap_stride = if settings.snapshot_every > 0.0 {
        ((settings.snapshot_every / settings.dt).round() as usize).max(1)
    } else {
        0
    };

    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        u_minus: Vec::with_capacity(steps + 1),
        flux: Vec::with_capacity(steps + 1),
        x_grid: x_grid.clone(),
        snapshots: Vec::new(),
        final_bulk: Vec::new(),
    };
    let mut g = boundary_flux(&u, dx);
    let push = |traj: &mut Trajectory<T>, step: usize, u: &[T], g: T| {
        let t = T::of(step as f64) * dt;
        traj.t.push(t);
        traj.u_minus.push(u[0]);
        traj.flux.push(g);
        if snap_stride > 0 && step.is_multiple_of(snap_stride) {
            traj.snapshots.push((t, u.to_vec()));
        }
    };
    push(&mut traj, 0, &u, g);
    for step in 1..=steps {
        let k1 = k.eval(u[0], g, mu);
        let pred = u[0] + dt * k1;
        let mut next = stepper.step(&u, pred);
        let k2 = k.eval(pred, boundary_flux(&next, dx), mu);
        let corr = u[0] + dt * T::of(0.5) * (k1 + k2);
        stepper.correct(&mut next, pred, corr);
        u = next;
        g = boundary_flux(&u, dx);
        if !(u[0].abs() <= cap) {
            return Err(Error::Diverged {
                t: (T::of(step as f64) * dt).to_f64_lossy(),
                value: u[0].abs().to_f64_lossy(),
            });
        }
        push(&mut traj, step, &u, g);
    }
    traj.final_bulk = u;
    Ok(traj)
}

/// Trapezoidal `u- + int_0^L u dx`, conserved when `f = -d_n u`, `sigma = 0`
/// and the far boundary is reflecting.
pub fn total_mass<T: Scalar>(bulk: &[T], dx: T) -> T {
    let n = bulk.len();
    let inner = bulk[1..n - 1].iter().fold(T::zero(), |a, &v| a + v);
    bulk[0] + dx * (inner + T::of(0.5) * (bulk[0] + bulk[n - 1]))
}

/// Oscillation frequency and amplitude of the late-time boundary signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate<T> {
    pub omega: T,
    pub r: T,
    pub mean: T,
    pub crossings: usize,
}

/// Estimates `omega` from the mean spacing of upward zero crossings of
/// `u- - mean` over the last half of the run, and `r` as twice the modulus of
/// the first Fourier coefficient over the last full period.
///
/// Oscillations with peak-to-peak size below `amp_tol` count as a steady state.
pub fn extract_period<T: Scalar>(t: &[T], u: &[T], amp_tol: T) -> Result<PeriodEstimate<T>> {
    if t.len() != u.len() || t.len() < 8 {
        return Err(Error::InsufficientData(format!("{} samples", t.len())));
    }
    let start = t.len() / 2;
    let (ts, us) = (&t[start..], &u[start..]);
    let mean = us.iter().fold(T::zero(), |a, &v| a + v) / T::of(us.len() as f64);
    let (lo, hi) = us.iter().fold((T::infinity(), T::neg_infinity()), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi - lo > amp_tol) {
        return Err(Error::SteadyState);
    }
    let mut cross = Vec::new();
    for i in 1..us.len() {
        let (a, b) = (us[i - 1] - mean, us[i] - mean);
        if a < T::zero() && b >= T::zero() {
            let frac = -a / (b - a);
            cross.push(ts[i - 1] + frac * (ts[i] - ts[i - 1]));
        }
    }
    if cross.len() < 2 {
        return Err(Error::SteadyState);
    }
    let periods = T::of((cross.len() - 1) as f64);
    let period = (cross[cross.len() - 1] - cross[0]) / periods;
    let omega = T::TAU() / period;

    let (t0, t1) = (cross[cross.len() - 2], cross[cross.len() - 1]);
    let samples = 128usize;
    let interp = |tq: T| -> T {
        let idx = ts.partition_point(|&x| x < tq).clamp(1, ts.len() - 1);
        let (ta, tb) = (ts[idx - 1], ts[idx]);
        let w = (tq - ta) / (tb - ta);
        us[idx - 1] + w * (us[idx] - us[idx - 1])
    };
    let mut c1 = Complex::new(T::zero(), T::zero());
    for j in 0..samples {
        let phase = T::TAU() * T::of(j as f64) / T::of(samples as f64);
        let v = interp(t0 + (t1 - t0) * T::of(j as f64) / T::of(samples as f64));
        c1 = c1 + Complex::new(phase.cos(), -phase.sin()) * v;
    }
    let r = T::of(2.0) * c1.norm() / T::of(samples as f64);
    Ok(PeriodEstimate {
        omega,
        r,
        mean,
        crossings: cross.len(),
    })
}

/// Writes `t,u_minus,flux` rows.
pub fn write_trajectory_csv<T: Scalar, W: Write>(mut w: W, traj: &Trajectory<T>) -> io::Result<()> {
    writeln!(w, "t,u_minus,flux")?;
    for ((t, u), g) in traj.t.iter().zip(&traj.u_minus).zip(&traj.flux) {
        writeln!(w, "{},{},{}", t.to_f64_lossy(), u.to_f64_lossy(), g.to_f64_lossy())?;
    }
    Ok(())
}

/// Writes the field matrix: a header row of depths, then one row per phase
/// led by the phase value.
pub fn write_field_csv<T: Scalar, W: Write>(mut w: W, slice: &FieldSlice<T>) -> io::Result<()> {
    let header: Vec<String> = slice.x_grid.iter().map(|x| x.to_f64_lossy().to_string()).collect();
    writeln!(w, "s,{}", header.join(","))?;
    for (i, s) in slice.s_grid.iter().enumerate() {
        let row: Vec<String> = slice.values.row(i).iter().map(|v| v.to_f64_lossy().to_string()).collect();
        writeln!(w, "{},{}", s.to_f64_lossy(), row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{CubicKinetics, FnKinetics};
    use crate::spectral::FourierGrid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn boundary_trace_is_the_profile() {
        let g = FourierGrid::<f64>::new(32).unwrap();
        let p = g.sample(|s| 0.3 + s.cos() - 0.2 * (3.0 * s).sin());
        let sl = reconstruct(&p, 1.3, 0.4, &[0.0, 1.0]).unwrap();
        for (i, v) in p.values().iter().enumerate() {
            assert!((sl.values[(i, 0)] - v).abs() < 1e-14);
        }
        assert_relative_eq!(sl.u_inf, 0.3, max_relative = 1e-14);
        assert!(reconstruct(&p, 0.0, 0.0, &[0.0]).is_err());
    }

    #[test]
    fn single_mode_decay_rate() {
        let g = FourierGrid::<f64>::new(32).unwrap();
        let p = g.sample(|s| s.cos());
        let sl = reconstruct(&p, 1.0, 0.0, &linspace(0.0, 30.0, 121)).unwrap();
        let ff = fit_far_field(&sl).unwrap();
        assert_relative_eq!(ff.eta, 0.5f64.sqrt(), max_relative = 1e-4);
        assert_relative_eq!(ff.c, 1.0, max_relative = 1e-3);
        assert!(ff.u_inf.abs() < 1e-15);
    }

    #[test]
    fn constant_profile_has_no_transient() {
        let g = FourierGrid::<f64>::new(16).unwrap();
        let p = g.sample(|_| 0.7);
        let sl = reconstruct(&p, 1.0, 0.0, &linspace(0.0, 10.0, 11)).unwrap();
        let ff = fit_far_field(&sl).unwrap();
        assert!(ff.eta.is_infinite() && ff.eta > 0.0);
        assert_relative_eq!(ff.u_inf, 0.7, max_relative = 1e-14);
        // The tail of a steady state with degradation is u_inf e^{-sigma x}.
        let sl = reconstruct(&p, 1.0, 0.5, &[2.0]).unwrap();
        assert_relative_eq!(sl.values[(3, 0)], 0.7 * (-1.0f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn two_modes_decay_at_the_slower_rate() {
        let g = FourierGrid::<f64>::new(32).unwrap();
        let p = g.sample(|s| 0.01 * s.cos() + (3.0 * s).cos());
        let sl = reconstruct(&p, 2.0, 0.0, &linspace(0.0, 40.0, 161)).unwrap();
        let ff = fit_far_field(&sl).unwrap();
        assert_relative_eq!(ff.eta, 1.0, max_relative = 1e-3);
        for (j, e) in sl.transient_envelope().iter().enumerate() {
            assert!(*e <= ff.c * (-ff.eta * sl.x_grid[j]).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn growing_residual_is_rejected() {
        let g = FourierGrid::<f64>::new(16).unwrap();
        let p = g.sample(|s| s.cos());
        let mut sl = reconstruct(&p, 1.0, 0.0, &linspace(0.0, 8.0, 9)).unwrap();
        for j in 0..9 {
            for i in 0..16 {
                sl.values[(i, j)] = sl.s_grid[i].cos() * (0.1 * j as f64).exp();
            }
        }
        assert!(matches!(fit_far_field(&sl), Err(Error::NonDecaying(_))));
    }

    #[test]
    fn reconstruction_solves_the_bulk_equation() {
        // omega u_s = u_xx - sigma^2 u, with u_s spectral and u_xx by a
        // fourth-order stencil in x.
        let g = FourierGrid::<f64>::new(64).unwrap();
        let p = g.sample(|s| 0.2 + 0.5 * s.cos() + 0.1 * (2.0 * s).sin() - 0.05 * (5.0 * s).cos());
        let (omega, sigma, h) = (1.3, 0.4, 0.01);
        for &x in &[0.5, 1.0, 3.0] {
            let xs = [x - 2.0 * h, x - h, x, x + h, x + 2.0 * h];
            let sl = reconstruct(&p, omega, sigma, &xs).unwrap();
            let mid: Vec<f64> = (0..64).map(|i| sl.values[(i, 2)]).collect();
            let us = g.apply_d(omega, &g.profile(mid.clone()).unwrap()).unwrap();
            for (i, m) in mid.iter().enumerate() {
                let v = |j: usize| sl.values[(i, j)];
                let uxx = (-v(0) + 16.0 * v(1) - 30.0 * v(2) + 16.0 * v(3) - v(4)) / (12.0 * h * h);
                let res = us.values()[i] - uxx + sigma * sigma * m;
                assert!(res.abs() < 1e-8, "x={x} i={i} res={res}");
            }
        }
    }

    #[test]
    fn mass_is_conserved_for_flux_kinetics() {
        let k = FnKinetics(|_u: f64, g: f64, _mu: f64| -g);
        let init = |x: f64| (-(x - 3.0) * (x - 3.0)).exp() + (-x).exp();
        let drift = |dx: f64, dt: f64| {
            let s = SimSettings {
                depth: 20.0,
                dx,
                dt,
                horizon: 2.0,
                far_bc: FarBc::NeumannZero,
                ..Default::default()
            };
            let tr = simulate(&k, 0.0, 0.0, &s, init(0.0), init).unwrap();
            let b0: Vec<f64> = tr.x_grid.iter().map(|&x| init(x)).collect();
            let dx = tr.x_grid[1];
            (total_mass(&tr.final_bulk, dx) - total_mass(&b0, dx)).abs() / s.horizon
        };
        let coarse = drift(0.1, 0.02);
        let fine = drift(0.05, 0.01);
        assert!(fine < 5e-3, "{fine}");
        assert!(coarse / fine > 3.0, "drift should fall at second order: {coarse} {fine}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let k = CubicKinetics::new(1.0f64, 0.0, -1.0).unwrap();
        let s = SimSettings { horizon: 5.0, depth: 10.0, ..Default::default() };
        let tr = simulate(&k, 0.05, 0.0, &s, 0.0, |_| 0.0).unwrap();
        assert!(tr.u_minus.iter().all(|&u| u == 0.0));
        assert!(tr.flux.iter().all(|&g| g == 0.0));
        assert_eq!(tr.t.len(), 501);
    }

    #[test]
    fn doubling_depth_leaves_the_boundary_signal_unchanged() {
        let k = CubicKinetics::new(1.0f64, 0.0, -1.0).unwrap();
        let run = |depth: f64| {
            let s = SimSettings { horizon: 40.0, depth, ..Default::default() };
            simulate(&k, 0.05, 0.0, &s, 0.1, |x: f64| 0.1 * (-x).exp()).unwrap()
        };
        let (a, b) = (run(60.0), run(120.0));
        let diff = a.u_minus.iter().zip(&b.u_minus).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(diff <= 1e-4, "{diff}");
    }

    #[test]
    fn stable_trivial_state_attracts() {
        let k = CubicKinetics::new(1.0f64, 0.0, -1.0).unwrap();
        let s = SimSettings { horizon: 100.0, depth: 30.0, ..Default::default() };
        let tr = simulate(&k, -0.05, 0.0, &s, 0.1, |_| 0.0).unwrap();
        let late = tr.u_minus[tr.u_minus.len() - 1000..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(late < 0.01, "{late}");
    }

    #[test]
    fn blow_up_is_reported() {
        let k = FnKinetics(|u: f64, _g: f64, _mu: f64| u * u);
        let s = SimSettings { horizon: 50.0, depth: 5.0, blowup_cap: 1e3, ..Default::default() };
        assert!(matches!(simulate(&k, 0.0, 0.0, &s, 1.0, |_| 0.0), Err(Error::Diverged { .. })));
        let bad = SimSettings { dt: 0.0, ..Default::default() };
        assert!(simulate(&k, 0.0, 0.0, &bad, 1.0, |_| 0.0).is_err());
    }

    #[test]
    fn period_of_a_synthetic_signal() {
        let t: Vec<f64> = (0..20000).map(|i| i as f64 * 0.01).collect();
        let u: Vec<f64> = t.iter().map(|&t| 0.3 * (1.07 * t).cos()).collect();
        let pe = extract_period(&t, &u, 1e-8).unwrap();
        assert_relative_eq!(pe.omega, 1.07, max_relative = 1e-5);
        assert_relative_eq!(pe.r, 0.3, max_relative = 1e-4);
        let flat: Vec<f64> = t.iter().map(|&t| 1e-3 * (-t).exp()).collect();
        assert!(matches!(extract_period(&t, &flat, 1e-8), Err(Error::SteadyState)));
    }

    #[test]
    fn csv_layouts() {
        let g = FourierGrid::<f64>::new(8).unwrap();
        let sl = reconstruct(&g.sample(|s| s.cos()), 1.0, 0.0, &[0.0, 0.5, 1.0]).unwrap();
        let mut out = Vec::new();
        write_field_csv(&mut out, &sl).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "s,0,0.5,1");
        assert_eq!(text.lines().count(), 9);
        let k = CubicKinetics::new(1.0f64, 0.0, -1.0).unwrap();
        let s = SimSettings { horizon: 0.05, depth: 1.0, ..Default::default() };
        let tr = simulate(&k, 0.0, 0.0, &s, 0.1, |_| 0.0).unwrap();
        let mut out = Vec::new();
        write_trajectory_csv(&mut out, &tr).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,u_minus,flux");
        assert_eq!(text.lines().count(), 7);
    }

    proptest! {
        #[test]
        fn envelope_bound_holds(a in 0.1f64..1.0, b in -1.0f64..1.0, w in 0.3f64..3.0, sg in 0.0f64..0.5) {
            let g = FourierGrid::<f64>::new(16).unwrap();
            let p = g.sample(|s| a * s.cos() + b * (2.0 * s).sin() + 0.2);
            let sl = reconstruct(&p, w, sg, &linspace(0.0, 12.0, 49)).unwrap();
            let ff = fit_far_field(&sl).unwrap();
            prop_assert!(ff.eta > 0.0);
            let env = sl.transient_envelope();
            let j = env.len() - 1;
            prop_assert!(env[j] <= ff.c * (-ff.eta * sl.x_grid[j]).exp() * (1.0 + 1e-10));
        }

        #[test]
        fn reconstruction_is_linear(a in -1.0f64..1.0, b in -1.0f64..1.0) {
            let g = FourierGrid::<f64>::new(16).unwrap();
            let p = g.sample(|s| s.cos());
            let q = g.sample(|s| (2.0 * s).sin() + 0.1);
            let comb = g.axpby(a, &p, b, &q);
            let xs = [0.0, 0.7, 2.0];
            let (sp, sq, sc) = (
                reconstruct(&p, 1.0, 0.1, &xs).unwrap(),
                reconstruct(&q, 1.0, 0.1, &xs).unwrap(),
                reconstruct(&comb, 1.0, 0.1, &xs).unwrap(),
            );
            let lin = &sp.values * a + &sq.values * b;
            prop_assert!((sc.values - lin).amax() < 1e-12);
        }
    }
}
