//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All of the math is written against [`Scalar`], a thin extension of
//! [`num_traits::Float`]. Dense factorizations are delegated to `nalgebra`
//! through trait hooks that are implemented concretely for `f32` and `f64`,
//! so generic code never has to juggle nalgebra's and num-traits' method
//! namespaces at the same time.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive};

/// `(s, u, v)`: a singular value with its left and right vectors.
pub type SingularTriplet<T> = (T, DVector<Complex<T>>, DVector<Complex<T>>);

/// Real floating-point type usable by the solvers: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + rustfft::FftNum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn of(x: f64) -> Self;

    /// Conversion from a grid index or mode number.
    fn of_i(i: i64) -> Self {
        Self::of(i as f64)
    }

    fn to_f64_lossy(self) -> f64;

    /// Solves `a x = b` by LU with partial pivoting; `None` if `a` is singular.
    fn lu_solve(a: DMatrix<Self>, b: DVector<Self>) -> Option<DVector<Self>>;

    /// Complex counterpart of [`Scalar::lu_solve`].
    fn lu_solve_complex(
        a: DMatrix<Complex<Self>>,
        b: DVector<Complex<Self>>,
    ) -> Option<DVector<Complex<Self>>>;

    /// Singular values of a complex matrix, in no particular order.
    fn singular_values_complex(a: DMatrix<Complex<Self>>) -> Vec<Self>;

    /// Smallest singular triplet `(s, u, v)` with `a v = s u`.
    fn min_singular_triplet_complex(
        a: DMatrix<Complex<Self>>,
    ) -> Option<SingularTriplet<Self>>;
}

macro_rules! impl_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            #[inline]
            fn of(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn to_f64_lossy(self) -> f64 {
                self as f64
            }

            fn lu_solve(a: DMatrix<Self>, b: DVector<Self>) -> Option<DVector<Self>> {
                let lu = a.lu();
                let x = lu.solve(&b)?;
                x.iter().all(|v| v.is_finite()).then_some(x)
            }

            fn lu_solve_complex(
                a: DMatrix<Complex<Self>>,
                b: DVector<Complex<Self>>,
            ) -> Option<DVector<Complex<Self>>> {
                let lu = a.lu();
                let x = lu.solve(&b)?;
                x.iter().all(|v| v.re.is_finite() && v.im.is_finite()).then_some(x)
            }

            fn singular_values_complex(a: DMatrix<Complex<Self>>) -> Vec<Self> {
                a.singular_values().iter().copied().collect()
            }

            fn min_singular_triplet_complex(
                a: DMatrix<Complex<Self>>,
            ) -> Option<SingularTriplet<Self>> {
                let svd = a.svd(true, true);
                let (idx, s) = svd
                    .singular_values
                    .iter()
                    .copied()
                    .enumerate()
                    .min_by(|x, y| x.1.total_cmp(&y.1))?;
                let u = svd.u.as_ref()?.column(idx).into_owned();
                // v_t holds V^H, so its row conjugated is the right vector.
                let v = svd.v_t.as_ref()?.row(idx).adjoint();
                Some((s, u, v))
            }
        }
    };
}

impl_scalar!(f32);
impl_scalar!(f64);

/// Principal complex square root: branch cut along `(-inf, 0)`, `Re >= 0`.
#[inline]
pub fn csqrt<T: Scalar>(z: Complex<T>) -> Complex<T> {
    z.sqrt()
}

/// `true` when `z` lies on the branch cut `(-inf, 0)` of [`csqrt`].
#[inline]
pub fn on_branch_cut<T: Scalar>(z: Complex<T>) -> bool {
    z.im == T::zero() && z.re < T::zero()
}
