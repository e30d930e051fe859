//! Periodic boundary traces on the circle and the diagonal Fourier
//! multipliers acting on them.
//!
//! Coefficients follow `u(s) = sum_l u_l e^{i l s}` with
//! `u_l = (1/n) sum_j u(s_j) e^{-i l s_j}`, `s_j = 2 pi j / n`. Spectra are
//! stored in FFT order (`l = 0, 1, .., n/2, -n/2 + 1, .., -1`). The Nyquist
//! mode `l = n/2` has no conjugate partner and is dropped by every multiplier.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::scalar::{csqrt, on_branch_cut, Scalar};

/// Default grid size for figure-quality runs.
pub const DEFAULT_GRID: usize = 2048;

/// Two-sided Fourier coefficients of a grid function, in FFT order.
#[derive(Clone, PartialEq)]
pub struct Spectrum<T> {
    coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            coeffs: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub fn from_fft_order(coeffs: Vec<Complex<T>>) -> Self {
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    fn index(&self, l: i64) -> Option<usize> {
        let n = self.coeffs.len() as i64;
        if l <= -n / 2 || l > n / 2 {
            return None;
        }
        Some(l.rem_euclid(n) as usize)
    }

    /// Coefficient of `e^{i l s}`; zero outside the represented band.
    pub fn mode(&self, l: i64) -> Complex<T> {
        self.index(l)
            .map(|i| self.coeffs[i])
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    /// Sets the coefficient of `e^{i l s}` (ignored outside the band).
    pub fn set_mode(&mut self, l: i64, c: Complex<T>) {
        if let Some(i) = self.index(l) {
            self.coeffs[i] = c;
        }
    }

    /// Largest `max |u_{-l} - conj u_l|` over the spectrum, including the
    /// imaginary parts of the zero and Nyquist modes.
    pub fn hermitian_defect(&self) -> T {
        let n = self.coeffs.len();
        let mut worst = self.coeffs.first().map(|c| c.im.abs()).unwrap_or(T::zero());
        if n >= 2 {
            worst = worst.max(self.coeffs[n / 2].im.abs());
        }
        for k in 1..n.div_ceil(2) {
            worst = worst.max((self.coeffs[n - k] - self.coeffs[k].conj()).norm());
        }
        worst
    }
}

impl<T: Scalar> fmt::Debug for Spectrum<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectrum").field("n", &self.coeffs.len()).finish()
    }
}

/// A real `2 pi`-periodic boundary trace: grid samples plus a cached,
/// exactly Hermitian spectrum.
#[derive(Clone, PartialEq)]
pub struct PeriodicProfile<T> {
    values: Vec<T>,
    spectrum: Spectrum<T>,
}

impl<T: Scalar> PeriodicProfile<T> {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn spectrum(&self) -> &Spectrum<T> {
        &self.spectrum
    }

    pub fn mode(&self, l: i64) -> Complex<T> {
        self.spectrum.mode(l)
    }

    /// Amplitude `r = 2 |u_1|` of the first harmonic.
    pub fn amplitude(&self) -> T {
        T::of(2.0) * self.spectrum.mode(1).norm()
    }

    /// Zero mode, the mean of the trace.
    pub fn mean(&self) -> T {
        self.spectrum.mode(0).re
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

impl<T: Scalar> fmt::Debug for PeriodicProfile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicProfile")
            .field("n", &self.values.len())
            .field("amplitude", &self.amplitude())
            .field("mean", &self.mean())
            .finish()
    }
}

/// `i omega l`, the symbol of `D(omega) = omega d/ds`.
pub fn d_symbol<T: Scalar>(omega: T, l: i64) -> Complex<T> {
    Complex::new(T::zero(), omega * T::of_i(l))
}

/// Symbol of the Dirichlet-to-Neumann map `D(omega, sigma)^{1/2}`:
/// `sqrt(i omega l + sigma^2)` for `l != 0` and `sigma` for `l = 0`.
pub fn dhalf_symbol<T: Scalar>(omega: T, sigma: T, l: i64) -> Complex<T> {
    if l == 0 {
        Complex::from(sigma)
    } else {
        csqrt(Complex::new(sigma * sigma, omega * T::of_i(l)))
    }
}

/// `omega`-derivative of [`dhalf_symbol`].
pub fn dhalf_symbol_domega<T: Scalar>(omega: T, sigma: T, l: i64) -> Complex<T> {
    if l == 0 {
        Complex::from(T::zero())
    } else {
        Complex::new(T::zero(), T::of_i(l)) / (dhalf_symbol(omega, sigma, l) * T::of(2.0))
    }
}

/// Floquet symbol: `sqrt(omega (i l + lambda))` for `l != 0`,
/// `sqrt(omega) sqrt(lambda)` for `l = 0`, principal roots.
pub fn floquet_symbol<T: Scalar>(omega: T, lambda: Complex<T>, l: i64) -> Result<Complex<T>> {
    let z = lambda + Complex::new(T::zero(), T::of_i(l));
    if on_branch_cut(z) {
        return Err(Error::BranchCut(format!("i*{l} + lambda = {z}")));
    }
    Ok(if l == 0 {
        csqrt(lambda) * omega.sqrt()
    } else {
        csqrt(z * omega)
    })
}

/// Floquet symbol in the variable `rho` with `lambda = rho^2`; for `l = 0`
/// it is `sqrt(omega) rho`, analytic through `rho = 0`.
pub fn floquet_symbol_rho<T: Scalar>(omega: T, rho: Complex<T>, l: i64) -> Complex<T> {
    if l == 0 {
        rho * omega.sqrt()
    } else {
        csqrt((rho * rho + Complex::new(T::zero(), T::of_i(l))) * omega)
    }
}

/// Grid points `s_j = 2 pi j / n`.
pub fn s_grid<T: Scalar>(n: usize) -> Vec<T> {
    (0..n)
        .map(|j| T::TAU() * T::of(j as f64) / T::of(n as f64))
        .collect()
}

/// FFT plans for an `n`-point grid and its `2n`-point dealiasing grid.
///
/// Plans are immutable and shareable across threads; scratch buffers are
/// allocated per call.
#[derive(Clone)]
pub struct FourierGrid<T: Scalar> {
    n: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    fwd_pad: Arc<dyn Fft<T>>,
    inv_pad: Arc<dyn Fft<T>>,
}

impl<T: Scalar> fmt::Debug for FourierGrid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierGrid").field("n", &self.n).finish()
    }
}

impl<T: Scalar> FourierGrid<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "grid size must be a power of two >= 4, got {n}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd_pad: planner.plan_fft_forward(2 * n),
            inv_pad: planner.plan_fft_inverse(2 * n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> Vec<T> {
        s_grid(self.n)
    }

    /// Highest represented mode, `n/2 - 1`.
    pub fn max_mode(&self) -> i64 {
        self.n as i64 / 2 - 1
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::InvalidArgument(format!(
                "expected {} grid values, got {len}",
                self.n
            )));
        }
        Ok(())
    }

    /// Forward transform of complex grid values, normalized by `1/n`.
    pub fn forward_complex(&self, values: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check_len(values.len())?;
        let mut buf = values.to_vec();
        self.fwd.process(&mut buf);
        let scale = T::one() / T::of(self.n as f64);
        buf.iter_mut().for_each(|c| *c = *c * scale);
        Ok(buf)
    }

    /// Inverse of [`forward_complex`](Self::forward_complex).
    pub fn inverse_complex(&self, coeffs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check_len(coeffs.len())?;
        let mut buf = coeffs.to_vec();
        self.inv.process(&mut buf);
        Ok(buf)
    }

    /// Builds a profile from grid values; the cached spectrum is symmetrized
    /// so that Hermitian symmetry holds exactly.
    pub fn profile(&self, values: Vec<T>) -> Result<PeriodicProfile<T>> {
        self.check_len(values.len())?;
        let cvals: Vec<Complex<T>> = values.iter().map(|&v| Complex::from(v)).collect();
        let mut c = self.forward_complex(&cvals)?;
        let n = self.n;
        c[0].im = T::zero();
        c[n / 2].im = T::zero();
        let half = T::of(0.5);
        for k in 1..n / 2 {
            let avg = (c[k] + c[n - k].conj()) * half;
            c[k] = avg;
            c[n - k] = avg.conj();
        }
        Ok(PeriodicProfile {
            values,
            spectrum: Spectrum::from_fft_order(c),
        })
    }

    /// Profile sampled from a function of `s`.
    pub fn sample(&self, f: impl Fn(T) -> T) -> PeriodicProfile<T> {
        self.profile(self.s().into_iter().map(f).collect())
            .expect("sampled grid has the right size")
    }

    pub fn zero_profile(&self) -> PeriodicProfile<T> {
        PeriodicProfile {
            values: vec![T::zero(); self.n],
            spectrum: Spectrum::zeros(self.n),
        }
    }

    pub fn to_spectrum<'p>(&self, p: &'p PeriodicProfile<T>) -> &'p Spectrum<T> {
        p.spectrum()
    }

    /// Real profile from a Hermitian spectrum.
    pub fn from_spectrum(&self, spectrum: &Spectrum<T>) -> Result<PeriodicProfile<T>> {
        self.check_len(spectrum.len())?;
        let scale = spectrum
            .as_slice()
            .iter()
            .fold(T::one(), |m, c| m.max(c.norm()));
        let defect = spectrum.hermitian_defect();
        if defect > T::of(1e-12).max(T::epsilon() * T::of(64.0)) * scale {
            return Err(Error::NonHermitian(defect.to_f64_lossy()));
        }
        let vals = self.inverse_complex(spectrum.as_slice())?;
        self.profile(vals.into_iter().map(|c| c.re).collect())
    }

    /// Applies a diagonal multiplier given for `l >= 0`; negative modes use
    /// the conjugate symbol so the output stays real. Nyquist is zeroed.
    pub fn apply_real_multiplier(
        &self,
        p: &PeriodicProfile<T>,
        symbol: impl Fn(i64) -> Complex<T>,
    ) -> Result<PeriodicProfile<T>> {
        self.check_len(p.n())?;
        let mut out = Spectrum::zeros(self.n);
        out.set_mode(0, Complex::from((symbol(0) * p.mode(0)).re));
        for l in 1..=self.max_mode() {
            let c = symbol(l) * p.mode(l);
            out.set_mode(l, c);
            out.set_mode(-l, c.conj());
        }
        self.from_spectrum(&out)
    }

    /// `D(omega) u = omega u'`.
    pub fn apply_d(&self, omega: T, p: &PeriodicProfile<T>) -> Result<PeriodicProfile<T>> {
        self.apply_real_multiplier(p, |l| d_symbol(omega, l))
    }

    /// Dirichlet-to-Neumann map `D(omega, sigma)^{1/2} u`.
    pub fn apply_dhalf(&self, omega: T, sigma: T, p: &PeriodicProfile<T>) -> Result<PeriodicProfile<T>> {
        self.apply_real_multiplier(p, |l| dhalf_symbol(omega, sigma, l))
    }

    /// Floquet Dirichlet-to-Neumann map on complex grid values.
    pub fn apply_dhalf_floquet(
        &self,
        omega: T,
        lambda: Complex<T>,
        values: &[Complex<T>],
    ) -> Result<Vec<Complex<T>>> {
        let mut c = self.forward_complex(values)?;
        let n = self.n as i64;
        for (k, ck) in c.iter_mut().enumerate() {
            let k = k as i64;
            let l = if k <= n / 2 { k } else { k - n };
            *ck = if l == n / 2 {
                Complex::new(T::zero(), T::zero())
            } else {
                *ck * floquet_symbol(omega, lambda, l)?
            };
        }
        self.inverse_complex(&c)
    }

    /// Values of the band-limited interpolant of `spectrum` on the `2n` grid.
    pub fn padded_values(&self, spectrum: &Spectrum<T>) -> Vec<T> {
        let m = 2 * self.n;
        let mut buf = vec![Complex::new(T::zero(), T::zero()); m];
        for l in -self.max_mode()..=self.max_mode() {
            buf[l.rem_euclid(m as i64) as usize] = spectrum.mode(l);
        }
        self.inv_pad.process(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Spectrum of `2n`-grid values truncated to the `n`-grid band, Nyquist
    /// dropped.
    pub fn truncate_padded(&self, values: &[T]) -> Result<Spectrum<T>> {
        let m = 2 * self.n;
        if values.len() != m {
            return Err(Error::InvalidArgument(format!(
                "expected {m} padded values, got {}",
                values.len()
            )));
        }
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::from(v)).collect();
        self.fwd_pad.process(&mut buf);
        let scale = T::one() / T::of(m as f64);
        let mut out = Spectrum::zeros(self.n);
        out.set_mode(0, Complex::from(buf[0].re * scale));
        for l in 1..=self.max_mode() {
            let c = buf[l as usize] * scale;
            out.set_mode(l, c);
            out.set_mode(-l, c.conj());
        }
        Ok(out)
    }

    /// Full normalized coefficient array (FFT order, length `2n`) of values
    /// sampled on the `2n` grid.
    pub fn padded_coefficients(&self, values: &[T]) -> Result<Vec<Complex<T>>> {
        let m = 2 * self.n;
        if values.len() != m {
            return Err(Error::InvalidArgument(format!(
                "expected {m} padded values, got {}",
                values.len()
            )));
        }
        let mut buf: Vec<Complex<T>> = values.iter().map(|&v| Complex::from(v)).collect();
        self.fwd_pad.process(&mut buf);
        let scale = T::one() / T::of(m as f64);
        buf.iter_mut().for_each(|c| *c = *c * scale);
        Ok(buf)
    }

    /// Translates a profile by `k` grid points: `u(s) -> u(s + 2 pi k / n)`.
    pub fn shift(&self, p: &PeriodicProfile<T>, k: usize) -> PeriodicProfile<T> {
        let mut v = p.values().to_vec();
        v.rotate_left(k % self.n);
        self.profile(v).expect("same grid")
    }

    /// Linear combination `a x + b y` of two profiles on this grid.
    pub fn axpby(&self, a: T, x: &PeriodicProfile<T>, b: T, y: &PeriodicProfile<T>) -> PeriodicProfile<T> {
        let v = x
            .values()
            .iter()
            .zip(y.values())
            .map(|(&xi, &yi)| a * xi + b * yi)
            .collect();
        self.profile(v).expect("same grid")
    }
}

/// Amplitude `r = 2 |u_1|`.
pub fn amplitude<T: Scalar>(p: &PeriodicProfile<T>) -> T {
    p.amplitude()
}
