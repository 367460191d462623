//! Small dense Hermitian helpers on top of nalgebra.

use nalgebra::{Cholesky, Dyn, SymmetricEigen};
use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{cplx, real, CMat, CVec, Real};

/// `(A + A^H) / 2`.
pub fn hermitize<T: Real>(a: &CMat<T>) -> CMat<T> {
    (a + a.adjoint()).scale(real(0.5))
}

/// Largest absolute entry of `A - A^H`.
pub fn hermitian_defect<T: Real>(a: &CMat<T>) -> T {
    let d = a - a.adjoint();
    d.iter().fold(T::zero(), |m, z| m.max(z.norm_sqr().sqrt()))
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh<T: Real>(a: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitize(a));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in idx.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh<T: Real>(a: &CMat<T>) -> Vec<T> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<T> = hermitize(a).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    v
}

pub fn min_eigenvalue<T: Real>(a: &CMat<T>) -> T {
    eigvalsh(a).first().copied().unwrap_or_else(T::zero)
}

/// `U diag(d) U^H`.
pub fn from_eig<T: Real>(d: &[T], u: &CMat<T>) -> CMat<T> {
    let mut scaled = u.clone();
    for (j, &dj) in d.iter().enumerate() {
        let s = cplx(dj);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    hermitize(&(scaled * u.adjoint()))
}

/// Principal square root of a PSD matrix. Slightly negative eigenvalues from
/// rounding are treated as zero.
pub fn psd_sqrt<T: Real>(a: &CMat<T>) -> CMat<T> {
    let (d, u) = eigh(a);
    let root: Vec<T> = d.iter().map(|&x| x.max(T::zero()).sqrt()).collect();
    from_eig(&root, &u)
}

/// Checks the PSD property against an absolute eigenvalue floor.
pub fn ensure_psd<T: Real>(a: &CMat<T>, floor: f64) -> Result<()> {
    let min = min_eigenvalue(a);
    if min < -real::<T>(floor) {
        return Err(Error::NotPsd {
            min_eigenvalue: crate::scalar::to_f64(min),
        });
    }
    Ok(())
}

/// Cholesky factor of a Hermitian positive-definite matrix.
pub fn cholesky<T: Real>(a: &CMat<T>) -> Option<Cholesky<Complex<T>, Dyn>> {
    Cholesky::new(hermitize(a))
}

/// `log2 det(A)` for Hermitian positive-definite `A`, via Cholesky.
pub fn log2det_hpd<T: Real>(a: &CMat<T>) -> Option<T> {
    let chol = cholesky(a)?;
    let l = chol.l_dirty();
    let two: T = real(2.0);
    Some(
        (0..a.nrows())
            .map(|i| two * l[(i, i)].re.log2())
            .fold(T::zero(), |acc, x| acc + x),
    )
}

/// Real part of `trace(A B)` without forming the product.
pub fn trace_product<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    let n = a.nrows();
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc.re
}

/// `h^H A h`, real part.
pub fn quad_form<T: Real>(a: &CMat<T>, h: &CVec<T>) -> T {
    h.dotc(&(a * h)).re
}

/// Identity of size `n`.
pub fn eye<T: Real>(n: usize) -> CMat<T> {
    CMat::identity(n, n)
}

/// Frobenius norm.
pub fn fro<T: Real>(a: &CMat<T>) -> T {
    a.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Numerical rank of a PSD matrix: eigenvalues above `rel * max(1, lambda_max)`.
pub fn psd_rank<T: Real>(a: &CMat<T>, rel: f64) -> usize {
    let ev = eigvalsh(a);
    let top = ev.last().copied().unwrap_or_else(T::zero).max(T::one());
    let thresh = top * real(rel);
    ev.iter().filter(|&&x| x > thresh).count()
}
