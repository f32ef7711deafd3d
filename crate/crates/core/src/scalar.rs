// SPDX-License-Identifier: Apache-2.0

//! Scalar abstraction shared by every numerical module.
//!
//! All model, spectral and transport code is written against [`Real`], which
//! is implemented for `f32` and `f64`. The dense LAPACK kernels the crate needs
//! are dispatched through [`Lapack`] so that generic code never names a
//! precision-specific routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

use crate::error::{Error, Result};

/// Real floating-point type usable throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + Lapack
{
    /// Converts an `f64` constant into this type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("representable size")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex numbers over a [`Real`] scalar.
pub type Cplx<T> = Complex<T>;

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Dense LAPACK kernels, column-major storage.
///
/// Only the handful of drivers needed by the crate are exposed. Workspace
/// queries are handled internally.
pub trait Lapack: Sized + Copy {
    /// Symmetric eigendecomposition (divide and conquer). On exit `a` holds
    /// the orthonormal eigenvectors as columns and `w` the ascending
    /// eigenvalues.
    fn syevd(n: usize, a: &mut [Self], w: &mut [Self]) -> Result<()>;

    /// Symmetric tridiagonal eigendecomposition. `d` is the diagonal (becomes
    /// the eigenvalues), `e` the off-diagonal, `z` receives the eigenvectors.
    fn stevd(n: usize, d: &mut [Self], e: &mut [Self], z: &mut [Self]) -> Result<()>;

    /// General complex eigendecomposition with optional left and right
    /// eigenvectors.
    #[allow(clippy::too_many_arguments)]
    fn geev(
        n: usize,
        a: &mut [Complex<Self>],
        w: &mut [Complex<Self>],
        left: Option<&mut [Complex<Self>]>,
        right: Option<&mut [Complex<Self>]>,
    ) -> Result<()>;

    /// Solves `A X = B` for complex `A` (LU with partial pivoting).
    fn gesv_c(
        n: usize,
        nrhs: usize,
        a: &mut [Complex<Self>],
        b: &mut [Complex<Self>],
    ) -> Result<()>;

    /// LU factorization with partial pivoting of complex `A`, in place.
    fn getrf_c(n: usize, a: &mut [Complex<Self>], ipiv: &mut [i32]) -> Result<()>;

    /// Solves `A X = B` from the factors produced by [`Lapack::getrf_c`].
    fn getrs_c(
        n: usize,
        nrhs: usize,
        lu: &[Complex<Self>],
        ipiv: &[i32],
        b: &mut [Complex<Self>],
    ) -> Result<()>;

    /// Solves `A X = B` for real `A` (LU with partial pivoting).
    fn gesv(n: usize, nrhs: usize, a: &mut [Self], b: &mut [Self]) -> Result<()>;

    /// Symmetric eigenvalues only (lower triangle of `a` is destroyed).
    fn syev_values(n: usize, a: &mut [Self], w: &mut [Self]) -> Result<()>;

    /// `C = A B` with `A` of shape `m × k`, `B` of shape `k × n`, column-major.
    fn gemm(m: usize, n: usize, k: usize, a: &[Self], b: &[Self], c: &mut [Self]);
}

fn check(routine: &'static str, info: i32) -> Result<()> {
    if info == 0 {
        Ok(())
    } else {
        Err(Error::Lapack { routine, info })
    }
}

macro_rules! impl_lapack {
    ($t:ty, $syevd:ident, $stevd:ident, $geev:ident, $gesv_c:ident, $getrf_c:ident, $getrs_c:ident, $gesv:ident, $gemm:ident) => {
        impl Lapack for $t {
            fn syevd(n: usize, a: &mut [Self], w: &mut [Self]) -> Result<()> {
                if n == 0 {
                    return Ok(());
                }
                let ni = n as i32;
                let mut info = 0;
                let mut qwork = [0.0 as $t];
                let mut qiwork = [0i32];
                unsafe {
                    lapack::$syevd(
                        b'V',
                        b'L',
                        ni,
                        a,
                        ni,
                        w,
                        &mut qwork,
                        -1,
                        &mut qiwork,
                        -1,
                        &mut info,
                    )
                };
                check(stringify!($syevd), info)?;
                let lwork = qwork[0] as usize;
                let liwork = qiwork[0] as usize;
                let lwork = lwork.max(1 + 6 * n + 2 * n * n);
                let mut work = vec![0.0 as $t; lwork];
                let liwork = liwork.max(3 + 5 * n);
                let mut iwork = vec![0i32; liwork];
                unsafe {
                    lapack::$syevd(
                        b'V',
                        b'L',
                        ni,
                        a,
                        ni,
                        w,
                        &mut work,
                        lwork as i32,
                        &mut iwork,
                        liwork as i32,
                        &mut info,
                    )
                };
                check(stringify!($syevd), info)
            }

            fn stevd(n: usize, d: &mut [Self], e: &mut [Self], z: &mut [Self]) -> Result<()> {
                if n == 0 {
                    return Ok(());
                }
                let ni = n as i32;
                let mut info = 0;
                let mut qwork = [0.0 as $t];
                let mut qiwork = [0i32];
                unsafe {
                    lapack::$stevd(
                        b'V',
                        ni,
                        d,
                        e,
                        z,
                        ni,
                        &mut qwork,
                        -1,
                        &mut qiwork,
                        -1,
                        &mut info,
                    )
                };
                check(stringify!($stevd), info)?;
                let lwork = qwork[0] as usize;
                let liwork = qiwork[0] as usize;
                let lwork = lwork.max(1 + 6 * n + 2 * n * n);
                let mut work = vec![0.0 as $t; lwork];
                let liwork = liwork.max(3 + 5 * n);
                let mut iwork = vec![0i32; liwork];
                unsafe {
                    lapack::$stevd(
                        b'V',
                        ni,
                        d,
                        e,
                        z,
                        ni,
                        &mut work,
                        lwork as i32,
                        &mut iwork,
                        liwork as i32,
                        &mut info,
                    )
                };
                check(stringify!($stevd), info)
            }

            fn geev(
                n: usize,
                a: &mut [Complex<Self>],
                w: &mut [Complex<Self>],
                left: Option<&mut [Complex<Self>]>,
                right: Option<&mut [Complex<Self>]>,
            ) -> Result<()> {
                if n == 0 {
                    return Ok(());
                }
                let ni = n as i32;
                let mut dummy_l = [Complex::new(0.0 as $t, 0.0)];
                let mut dummy_r = [Complex::new(0.0 as $t, 0.0)];
                let (jobvl, vl, ldvl) = match left {
                    Some(v) => (b'V', v, ni),
                    None => (b'N', &mut dummy_l[..], 1),
                };
                let (jobvr, vr, ldvr) = match right {
                    Some(v) => (b'V', v, ni),
                    None => (b'N', &mut dummy_r[..], 1),
                };
                let mut rwork = vec![0.0 as $t; 2 * n];
                let mut info = 0;
                let mut qwork = [Complex::new(0.0 as $t, 0.0)];
                unsafe {
                    lapack::$geev(
                        jobvl, jobvr, ni, a, ni, w, vl, ldvl, vr, ldvr, &mut qwork, -1, &mut rwork,
                        &mut info,
                    )
                };
                check(stringify!($geev), info)?;
                let lwork = (qwork[0].re as usize).max(2 * n);
                let mut work = vec![Complex::new(0.0 as $t, 0.0); lwork];
                unsafe {
                    lapack::$geev(
                        jobvl,
                        jobvr,
                        ni,
                        a,
                        ni,
                        w,
                        vl,
                        ldvl,
                        vr,
                        ldvr,
                        &mut work,
                        lwork as i32,
                        &mut rwork,
                        &mut info,
                    )
                };
                check(stringify!($geev), info)
            }

            fn gesv_c(
                n: usize,
                nrhs: usize,
                a: &mut [Complex<Self>],
                b: &mut [Complex<Self>],
            ) -> Result<()> {
                let ni = n as i32;
                let mut ipiv = vec![0i32; n];
                let mut info = 0;
                unsafe { lapack::$gesv_c(ni, nrhs as i32, a, ni, &mut ipiv, b, ni, &mut info) };
                check(stringify!($gesv_c), info)
            }

            fn getrf_c(n: usize, a: &mut [Complex<Self>], ipiv: &mut [i32]) -> Result<()> {
                let ni = n as i32;
                let mut info = 0;
                unsafe { lapack::$getrf_c(ni, ni, a, ni, ipiv, &mut info) };
                check(stringify!($getrf_c), info)
            }

            fn getrs_c(
                n: usize,
                nrhs: usize,
                lu: &[Complex<Self>],
                ipiv: &[i32],
                b: &mut [Complex<Self>],
            ) -> Result<()> {
                let ni = n as i32;
                let mut info = 0;
                unsafe { lapack::$getrs_c(b'N', ni, nrhs as i32, lu, ni, ipiv, b, ni, &mut info) };
                check(stringify!($getrs_c), info)
            }

            fn gesv(n: usize, nrhs: usize, a: &mut [Self], b: &mut [Self]) -> Result<()> {
                let ni = n as i32;
                let mut ipiv = vec![0i32; n];
                let mut info = 0;
                unsafe { lapack::$gesv(ni, nrhs as i32, a, ni, &mut ipiv, b, ni, &mut info) };
                check(stringify!($gesv), info)
            }

            fn syev_values(n: usize, a: &mut [Self], w: &mut [Self]) -> Result<()> {
                if n == 0 {
                    return Ok(());
                }
                let ni = n as i32;
                let mut info = 0;
                let mut qwork = [0.0 as $t];
                let mut qiwork = [0i32];
                unsafe {
                    lapack::$syevd(
                        b'N',
                        b'L',
                        ni,
                        a,
                        ni,
                        w,
                        &mut qwork,
                        -1,
                        &mut qiwork,
                        -1,
                        &mut info,
                    )
                };
                check(stringify!($syevd), info)?;
                let lwork = (qwork[0] as usize).max(2 * n + 1);
                let mut work = vec![0.0 as $t; lwork];
                let mut iwork = vec![0i32; (qiwork[0] as usize).max(1)];
                let liwork = iwork.len() as i32;
                unsafe {
                    lapack::$syevd(
                        b'N',
                        b'L',
                        ni,
                        a,
                        ni,
                        w,
                        &mut work,
                        lwork as i32,
                        &mut iwork,
                        liwork,
                        &mut info,
                    )
                };
                check(stringify!($syevd), info)
            }

            fn gemm(m: usize, n: usize, k: usize, a: &[Self], b: &[Self], c: &mut [Self]) {
                if m == 0 || n == 0 {
                    return;
                }
                let (mi, ni, ki) = (m as i32, n as i32, k as i32);
                unsafe {
                    blas::$gemm(
                        b'N',
                        b'N',
                        mi,
                        ni,
                        ki,
                        1.0,
                        a,
                        mi.max(1),
                        b,
                        ki.max(1),
                        0.0,
                        c,
                        mi.max(1),
                    )
                };
            }
        }
    };
}

impl_lapack!(f64, dsyevd, dstevd, zgeev, zgesv, zgetrf, zgetrs, dgesv, dgemm);
impl_lapack!(f32, ssyevd, sstevd, cgeev, cgesv, cgetrf, cgetrs, sgesv, sgemm);
