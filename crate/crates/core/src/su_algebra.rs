//! Dense complex linear algebra for `su(m)`.
//!
//! Elements of `su(m)` are stored as [`SuElement`], a newtype over an `m x m`
//! complex matrix that is exactly skew-Hermitian and traceless in floating
//! point: the strictly-upper entries are mirrored, the diagonal is purely
//! imaginary, and the last diagonal entry is the negated sum of the others so
//! that summing the diagonal in index order gives exactly zero.
//!
//! The fixed real basis of `su(m)` (see [`su_basis`]) is ordered as
//!
//! 1. `E_ab - E_ba` for `a < b` (row-major in `(a, b)`),
//! 2. `i (E_ab + E_ba)` for `a < b` (same order),
//! 3. `i (E_kk - E_{k+1,k+1})` for `k = 0..m-1`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

pub const DEFAULT_VALIDATION_TOL: f64 = 1e-12;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A traceless skew-Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SuElement(ComplexMatrix);

impl SuElement {
    /// Projects an arbitrary square matrix onto `su(m)` without validation.
    pub fn project(x: &ComplexMatrix) -> Result<Self> {
        check_square(x)?;
        let m = x.nrows();
        let mut out = ComplexMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                out[(a, b)] = (x[(a, b)] - x[(b, a)].conj()) * 0.5;
            }
        }
        for a in 0..m {
            out[(a, a)].re = 0.0;
        }
        let tr = diag_imag_sum(&out);
        if tr != 0.0 {
            let shift = tr / m as f64;
            for a in 0..m {
                out[(a, a)].im -= shift;
            }
        }
        let head: f64 = (0..m - 1).map(|a| out[(a, a)].im).sum();
        out[(m - 1, m - 1)].im = -head;
        Ok(SuElement(out))
    }

    /// Wraps a matrix without projecting it; callers guarantee the structure.
    #[cfg(test)]
    pub(crate) fn from_raw(x: ComplexMatrix) -> Self {
        SuElement(x)
    }

    pub fn zero(m: usize) -> Self {
        SuElement(ComplexMatrix::zeros(m, m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    /// Real linear combination `a * self + b * other`, re-projected.
    pub fn combine(&self, a: f64, other: &SuElement, b: f64) -> SuElement {
        let raw = self.0.map(|z| z * a) + other.0.map(|z| z * b);
        SuElement::project(&raw).expect("square by construction")
    }

    pub fn scale(&self, s: f64) -> SuElement {
        SuElement::project(&self.0.map(|z| z * s)).expect("square by construction")
    }

    /// `A X A^H`, re-projected onto `su(m)`.
    pub fn conjugate_by(&self, a: &ComplexMatrix) -> Result<SuElement> {
        if a.nrows() != self.dim() || a.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: a.nrows(),
            });
        }
        SuElement::project(&(a * &self.0 * a.adjoint()))
    }

    /// Entrywise complex conjugate (conjugation by `Q`).
    pub fn complex_conjugate(&self) -> SuElement {
        SuElement::project(&self.0.map(|z| z.conj())).expect("square by construction")
    }

    /// Eigenvalues of the Hermitian matrix `-i X`, ascending.
    pub fn spectrum(&self) -> Vec<f64> {
        hermitian_eigen(&self.0.map(|z| -I * z)).0
    }
}

fn diag_imag_sum(x: &ComplexMatrix) -> f64 {
    (0..x.nrows()).map(|a| x[(a, a)].im).sum()
}

fn check_square(x: &ComplexMatrix) -> Result<()> {
    if x.nrows() != x.ncols() || x.nrows() < 2 {
        return Err(Error::NotSquare {
            rows: x.nrows(),
            cols: x.ncols(),
        });
    }
    Ok(())
}

pub fn max_abs(x: &ComplexMatrix) -> f64 {
    x.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Checks `X` against `su(m)` and returns the symmetrized element.
pub fn validate_su(x: &ComplexMatrix, tol: f64) -> Result<SuElement> {
    check_square(x)?;
    let skew = max_abs(&(x + x.adjoint()));
    if skew > tol {
        return Err(Error::NotSkewHermitian { residual: skew });
    }
    let tr = x.trace().norm();
    if tr > tol {
        return Err(Error::NotTraceless { residual: tr });
    }
    SuElement::project(x)
}

/// The fixed real basis of `su(m)`; `m^2 - 1` elements.
pub fn su_basis(m: usize) -> Vec<ComplexMatrix> {
    let mut basis = Vec::with_capacity(m * m - 1);
    for a in 0..m {
        for b in a + 1..m {
            let mut e = ComplexMatrix::zeros(m, m);
            e[(a, b)] = Complex64::new(1.0, 0.0);
            e[(b, a)] = Complex64::new(-1.0, 0.0);
            basis.push(e);
        }
    }
    for a in 0..m {
        for b in a + 1..m {
            let mut e = ComplexMatrix::zeros(m, m);
            e[(a, b)] = I;
            e[(b, a)] = I;
            basis.push(e);
        }
    }
    for k in 0..m - 1 {
        let mut e = ComplexMatrix::zeros(m, m);
        e[(k, k)] = I;
        e[(k + 1, k + 1)] = -I;
        basis.push(e);
    }
    basis
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Stacks the real coordinates of `X -> ([X, G_1], ..., [X, G_k])` over the
/// fixed basis into a real matrix with one column per basis element.
pub(crate) fn commutator_system(generators: &[SuElement]) -> DMatrix<f64> {
    let m = generators[0].dim();
    let basis = su_basis(m);
    let rows = generators.len() * 2 * m * m;
    let mut sys = DMatrix::<f64>::zeros(rows, basis.len());
    for (col, x) in basis.iter().enumerate() {
        let mut row = 0;
        for g in generators {
            let g = g.as_matrix();
            let c = x * g - g * x;
            for z in c.iter() {
                sys[(row, col)] = z.re;
                sys[(row + 1, col)] = z.im;
                row += 2;
            }
        }
    }
    sys
}

/// Real dimension of the common commutant of `generators` inside `su(m)`.
pub fn commutant_dimension(generators: &[SuElement], rank_tol: f64) -> Result<usize> {
    let Some(first) = generators.first() else {
        return Err(Error::InvalidParameter("no generators".into()));
    };
    let m = first.dim();
    for g in generators {
        if g.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: g.dim(),
            });
        }
    }
    let rank = numerical_rank(&commutator_system(generators), rank_tol);
    Ok(m * m - 1 - rank)
}

/// Polar factor of `a`, with the last column rotated so that `det = 1`.
pub fn nearest_special_unitary(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_square(a)?;
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin <= 1e-14 * smax || !smin.is_finite() {
        return Err(Error::SingularInput);
    }
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    let mut p = u * v_t;
    let det = p.determinant();
    let phase = det / det.norm();
    let fix = phase.conj();
    let m = p.ncols();
    for r in 0..m {
        p[(r, m - 1)] *= fix;
    }
    Ok(p)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending with the
/// matching eigenvector columns.
pub fn hermitian_eigen(h: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let sym = (h + h.adjoint()).map(|z| z * 0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let m = h.nrows();
    let mut vectors = ComplexMatrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Standard complex Gaussian vector (real and imaginary parts `N(0, 1)`).
pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> DVector<Complex64> {
    DVector::from_fn(len, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, m: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(m, m, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Dense random element of `su(m)`.
pub fn random_su<R: Rng + ?Sized>(rng: &mut R, m: usize) -> SuElement {
    SuElement::project(&gaussian_matrix(rng, m)).expect("square by construction")
}

/// Haar-distributed element of `SU(m)` (polar factor of a Ginibre matrix).
pub fn random_special_unitary<R: Rng + ?Sized>(rng: &mut R, m: usize) -> ComplexMatrix {
    loop {
        if let Ok(u) = nearest_special_unitary(&gaussian_matrix(rng, m)) {
            return u;
        }
    }
}

/// Cayley transform `(I - X/2)^{-1} (I + X/2)`, a unitary for skew-Hermitian `X`.
pub fn cayley(x: &SuElement) -> ComplexMatrix {
    let m = x.dim();
    let half = x.as_matrix().map(|z| z * 0.5);
    let id = ComplexMatrix::identity(m, m);
    let lhs = &id - &half;
    let rhs = &id + &half;
    lhs.lu().solve(&rhs).expect("I - X/2 is invertible for skew-Hermitian X")
}
