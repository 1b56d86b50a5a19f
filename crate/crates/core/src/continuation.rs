//! Numerical continuation of isospectral deformations of a j-map.
//!
//! A j-map is a point of `su(m) x su(m)`. Isospectrality is the level set of
//! `F(j') = (tr((-i j'_Z)^k) - tr((-i j_Z)^k))_{k = 2..m, Z in S}` over `m + 1`
//! directions `S`; since each power sum is a homogeneous polynomial of degree
//! `k <= m` in `Z`, vanishing on `S` means vanishing everywhere. Curves are
//! traced along kernel directions of `DF` that are orthogonal to the
//! conjugation orbit, with a Gauss-Newton correction after every step.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jmap::JMap;
use crate::su_algebra::{cayley, random_special_unitary, random_su, su_basis, ComplexMatrix, SuElement};
use crate::torus::TorusVector;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Newton stops once `|F|` is below this (absolute, power sums are O(1..10^2)).
pub const NEWTON_TARGET: f64 = 1e-12;
/// Newton fails if `|F|` is still above this at the end.
pub const NEWTON_ACCEPT: f64 = 1e-8;
pub const NEWTON_MAX_ITER: usize = 50;
/// Kernel directions whose component off the conjugation orbit is smaller
/// than this (in unit norm) count as trivial.
pub const NONTRIVIAL_TOL: f64 = 1e-6;
/// Restarts from structured seeds before giving up on a nontrivial family.
pub const RETRY_BUDGET: usize = 3;
/// Halvings of a step before the continuation is declared divergent.
const MAX_STEP_HALVINGS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct IsospectralFamily {
    pub members: Vec<JMap>,
    /// True for a conjugation-orbit fallback, whose members are all equivalent.
    pub trivial: bool,
    /// Structured restarts used before the family was found.
    pub restarts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationSettings {
    pub steps: usize,
    pub step_size: f64,
}

/// Directions for the constraint map, interleaved with the sampling
/// directions used by the isospectrality check so the two never coincide.
pub fn constraint_directions(m: usize) -> Vec<TorusVector> {
    (0..=m)
        .map(|i| {
            let theta = (i as f64 + 0.5) * PI / (m as f64 + 1.0);
            TorusVector::new(theta.cos(), theta.sin())
        })
        .collect()
}

/// Frobenius-orthonormal real basis of `su(m)` (Gram-Schmidt of the fixed basis).
fn orthonormal_basis(m: usize) -> Vec<ComplexMatrix> {
    let mut out: Vec<ComplexMatrix> = Vec::new();
    for b in su_basis(m) {
        let mut v = b;
        for e in &out {
            let c = frob(e, &v);
            v -= e.map(|z| z * c);
        }
        let n = frob(&v, &v).sqrt();
        out.push(v.map(|z| z / n));
    }
    out
}

fn frob(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

struct Chart {
    m: usize,
    basis: Vec<ComplexMatrix>,
    dirs: Vec<TorusVector>,
}

impl Chart {
    fn new(m: usize) -> Self {
        Chart {
            m,
            basis: orthonormal_basis(m),
            dirs: constraint_directions(m),
        }
    }

    #[cfg(test)]
    fn dim(&self) -> usize {
        2 * self.basis.len()
    }

    fn coords(&self, j: &JMap) -> DVector<f64> {
        let d = self.basis.len();
        DVector::from_fn(2 * d, |i, _| {
            frob(&self.basis[i % d], j.component(i / d).as_matrix())
        })
    }

    fn component(&self, x: &DVector<f64>, c: usize) -> ComplexMatrix {
        let d = self.basis.len();
        let mut out = ComplexMatrix::zeros(self.m, self.m);
        for (i, b) in self.basis.iter().enumerate() {
            out += b.map(|z| z * x[c * d + i]);
        }
        out
    }

    fn jmap(&self, x: &DVector<f64>) -> Result<JMap> {
        JMap::new(
            SuElement::project(&self.component(x, 0))?,
            SuElement::project(&self.component(x, 1))?,
        )
    }

    /// Power sums `tr(H^k)`, `k = 2..m`, of `H = -i j_Z` for every direction.
    fn power_sums(&self, x: &DVector<f64>) -> DVector<f64> {
        let (a, b) = (self.component(x, 0), self.component(x, 1));
        let mut out = Vec::with_capacity(self.dirs.len() * (self.m - 1));
        for z in &self.dirs {
            let h = (&a * Complex64::new(z.z1, 0.0) + &b * Complex64::new(z.z2, 0.0)) * (-I);
            let mut power = h.clone();
            for _ in 2..=self.m {
                power = &power * &h;
                out.push(power.trace().re);
            }
        }
        DVector::from_vec(out)
    }

    /// `d tr(H^k) = k tr(H^{k-1} dH)`.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (a, b) = (self.component(x, 0), self.component(x, 1));
        let d = self.basis.len();
        let rows = self.dirs.len() * (self.m - 1);
        let mut jac = DMatrix::zeros(rows, 2 * d);
        let mut row = 0;
        for z in &self.dirs {
            let h = (&a * Complex64::new(z.z1, 0.0) + &b * Complex64::new(z.z2, 0.0)) * (-I);
            let mut power = h.clone(); // H^{k-1}
            for k in 2..=self.m {
                for (i, e) in self.basis.iter().enumerate() {
                    let de = (e * &power).trace() * (-I) * k as f64;
                    jac[(row, i)] = de.re * z.z1;
                    jac[(row, d + i)] = de.re * z.z2;
                }
                power = &power * &h;
                row += 1;
            }
        }
        jac
    }

    /// Coordinates of `([X, j1], [X, j2])` for every basis element `X`.
    fn trivial_directions(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (a, b) = (self.component(x, 0), self.component(x, 1));
        let d = self.basis.len();
        let mut out = DMatrix::zeros(2 * d, d);
        for (col, e) in self.basis.iter().enumerate() {
            let ca = e * &a - &a * e;
            let cb = e * &b - &b * e;
            for (i, f) in self.basis.iter().enumerate() {
                out[(i, col)] = frob(f, &ca);
                out[(d + i, col)] = frob(f, &cb);
            }
        }
        out
    }
}

/// Orthonormal columns spanning the column space of `a` (relative tolerance).
fn range_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| smax > 0.0 && svd.singular_values[k] > rel_tol * smax)
        .collect();
    DMatrix::from_fn(a.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal columns spanning the kernel of `a`.
fn kernel_basis(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    // pad to square so the SVD returns a full right singular basis
    let mut sq = DMatrix::zeros(n.max(a.nrows()), n);
    sq.rows_mut(0, a.nrows()).copy_from(a);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let cols: Vec<usize> = (0..n)
        .filter(|&k| svd.singular_values[k] <= rel_tol * smax.max(f64::MIN_POSITIVE))
        .collect();
    DMatrix::from_fn(n, cols.len(), |r, c| v_t[(cols[c], r)])
}

/// Unit kernel direction of `DF` orthogonal to the conjugation orbit, if any.
fn nontrivial_direction(chart: &Chart, x: &DVector<f64>) -> Option<DVector<f64>> {
    let kernel = kernel_basis(&chart.jacobian(x), 1e-8);
    if kernel.ncols() == 0 {
        return None;
    }
    let trivial = range_basis(&chart.trivial_directions(x), 1e-8);
    let projected = &kernel - &trivial * (trivial.transpose() * &kernel);
    let svd = projected.svd(true, false);
    let (k, &s) = svd
        .singular_values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if s < NONTRIVIAL_TOL {
        return None;
    }
    let dir = svd.u.expect("requested").column(k).into_owned();
    Some(dir.normalize())
}

/// Gauss-Newton with minimum-norm corrections back onto `F = target`.
fn newton(chart: &Chart, x0: DVector<f64>, target: &DVector<f64>) -> Result<DVector<f64>> {
    let mut x = x0;
    let mut res = (chart.power_sums(&x) - target).norm();
    let mut iterations = 0;
    while res > NEWTON_TARGET && iterations < NEWTON_MAX_ITER {
        let f = chart.power_sums(&x) - target;
        let jac = chart.jacobian(&x);
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let step = svd
            .solve(&f, 1e-10 * smax)
            .map_err(|_| Error::ContinuationDiverged {
                residual: res,
                iterations,
            })?;
        let next = &x - step;
        let next_res = (chart.power_sums(&next) - target).norm();
        iterations += 1;
        if !next_res.is_finite() {
            break;
        }
        // stagnation at rounding level
        if next_res >= res && res < NEWTON_ACCEPT {
            break;
        }
        x = next;
        res = next_res;
    }
    if res < NEWTON_ACCEPT {
        Ok(x)
    } else {
        Err(Error::ContinuationDiverged {
            residual: res,
            iterations,
        })
    }
}

/// Seed with a repeated eigenvalue in `j1`, used for restarts.
fn block_degenerate_seed<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Result<JMap> {
    let mut diag = vec![0.0; m];
    let lambda: f64 = rng.random_range(0.5..2.0);
    diag[0] = lambda;
    diag[1] = lambda;
    for d in diag.iter_mut().skip(2) {
        *d = rng.random_range(-2.0..2.0);
    }
    let u = random_special_unitary(rng, m);
    let d = ComplexMatrix::from_diagonal(&DVector::from_iterator(
        m,
        diag.iter().map(|&t| Complex64::new(0.0, t)),
    ));
    let j1 = SuElement::project(&(&u * d * u.adjoint()))?;
    JMap::new(j1, random_su(rng, m))
}

fn trace_curve(chart: &Chart, j: &JMap, settings: &ContinuationSettings) -> Result<Option<Vec<JMap>>> {
    let mut x = chart.coords(j);
    let target = chart.power_sums(&x);
    let mut members = vec![j.clone()];
    let mut prev: Option<DVector<f64>> = None;
    for _ in 0..settings.steps {
        let Some(mut dir) = nontrivial_direction(chart, &x) else {
            return Ok(None);
        };
        let flip = match &prev {
            Some(p) => dir.dot(p) < 0.0,
            None => {
                let k = dir.iamax();
                dir[k] < 0.0
            }
        };
        if flip {
            dir = -dir;
        }
        let mut h = settings.step_size;
        let mut attempt = 0;
        let next = loop {
            match newton(chart, &x + &dir * h, &target) {
                Ok(next) => break next,
                Err(e) if attempt >= MAX_STEP_HALVINGS => return Err(e),
                Err(_) => {
                    attempt += 1;
                    h *= 0.5;
                }
            }
        };
        members.push(chart.jmap(&next)?);
        prev = Some(dir);
        x = next;
    }
    Ok(Some(members))
}

/// Family `A(t_k) j A(t_k)^H` along a one-parameter unitary curve; every member
/// is equivalent to the first.
pub fn conjugation_family(seed: u64, m: usize, steps: usize, step_size: f64) -> Result<IsospectralFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = JMap::random(&mut rng, m)?;
    let x = random_su(&mut rng, m);
    let mut members = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let a = cayley(&x.scale(k as f64 * step_size));
        members.push(j.conjugate_by(&a)?);
    }
    Ok(IsospectralFamily {
        members,
        trivial: true,
        restarts: 0,
    })
}

/// Traces `steps` continuation steps of size `step_size` from a random seed.
///
/// Returns a trivial (conjugation-orbit) family when no nontrivial direction
/// is found after the restart budget, and `ContinuationDiverged` when the
/// corrector fails even at reduced step sizes.
pub fn generate_isospectral_family(
    seed: u64,
    m: usize,
    steps: usize,
    step_size: f64,
) -> Result<IsospectralFamily> {
    if m < 3 {
        return Err(Error::InvalidParameter(format!("m must be >= 3, got {m}")));
    }
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {step_size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = JMap::random(&mut rng, m)?;
    if steps == 0 {
        return Ok(IsospectralFamily {
            members: vec![j],
            trivial: false,
            restarts: 0,
        });
    }
    let chart = Chart::new(m);
    let settings = ContinuationSettings { steps, step_size };
    let mut start = j;
    for restart in 0..=RETRY_BUDGET {
        if let Some(members) = trace_curve(&chart, &start, &settings)? {
            return Ok(IsospectralFamily {
                members,
                trivial: false,
                restarts: restart,
            });
        }
        log::warn!("no nontrivial isospectral direction, restarting from a structured seed");
        start = block_degenerate_seed(&mut rng, m)?;
    }
    conjugation_family(seed, m, steps, step_size)
}
