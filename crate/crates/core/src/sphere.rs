//! Points and tangent vectors on `S^{2n+1}` in `C^{n-1} x C^2`, the circle
//! and torus actions, the one-form `kappa`, and the metrics built from it.
//!
//! Everything on the weighted projective space is computed upstairs: the
//! quotient metric is the restriction of a sphere metric to vectors that are
//! horizontal for the circle action.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jmap::{evaluate, JMap};
use crate::su_algebra::gaussian_vector;
use crate::torus::TorusVector;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub type CVector = DVector<Complex64>;

pub(crate) trait CMax {
    fn cmax(&self) -> f64;
}

impl CMax for CVector {
    fn cmax(&self) -> f64 {
        self.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// Sphere invariant tolerance for [`SpherePoint::new`].
pub const SPHERE_TOL: f64 = 1e-12;
/// Components below this are treated as vanishing when sampling regular points.
pub const REGULAR_SAMPLING_FLOOR: f64 = 1e-6;

/// Real inner product `re(sum a_i conj(b_i))`.
pub fn re_inner(a: &CVector, b: &CVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x * y.conj()).re).sum()
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `(n, p, q)` with `n >= 4`, `p, q >= 1` coprime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceParams {
    pub n: usize,
    pub p: u32,
    pub q: u32,
}

impl SpaceParams {
    pub fn new(n: usize, p: u32, q: u32) -> Result<Self> {
        let params = SpaceParams { n, p, q };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::InvalidParameter(format!("n must be >= 4, got {}", self.n)));
        }
        if self.p == 0 || self.q == 0 {
            return Err(Error::InvalidParameter("weights p, q must be positive".into()));
        }
        if gcd(self.p, self.q) != 1 {
            return Err(Error::InvalidParameter(format!(
                "weights must be coprime, got p = {}, q = {}",
                self.p, self.q
            )));
        }
        Ok(())
    }

    /// Dimension `m = n - 1` of the matrices acting on `u`.
    pub fn m(&self) -> usize {
        self.n - 1
    }

    pub fn pf(&self) -> f64 {
        self.p as f64
    }

    pub fn qf(&self) -> f64 {
        self.q as f64
    }
}

/// `(u, v)` on the unit sphere, `u in C^{n-1}`, `v in C^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    u: CVector,
    v: CVector,
}

impl SpherePoint {
    pub fn new(u: CVector, v: CVector) -> Result<Self> {
        if v.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: v.len(),
            });
        }
        let residual = (u.norm_squared() + v.norm_squared() - 1.0).abs();
        if residual > SPHERE_TOL {
            return Err(Error::NotOnSphere { residual });
        }
        Ok(SpherePoint { u, v })
    }

    /// Rescales `(u, v)` onto the unit sphere.
    pub fn normalized(u: CVector, v: CVector) -> Result<Self> {
        if v.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: v.len(),
            });
        }
        let norm = (u.norm_squared() + v.norm_squared()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotOnSphere { residual: 1.0 });
        }
        let s = Complex64::new(1.0 / norm, 0.0);
        Ok(SpherePoint {
            u: u * s,
            v: v * s,
        })
    }

    pub fn u(&self) -> &CVector {
        &self.u
    }

    pub fn v(&self) -> &CVector {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.u.len() + 1
    }

    pub fn u_norm_sq(&self) -> f64 {
        self.u.norm_squared()
    }

    pub fn v_abs_sq(&self, k: usize) -> f64 {
        self.v[k].norm_sqr()
    }

    /// `u != 0`, `v1 != 0` and `v2 != 0`, each above `floor` in modulus.
    pub fn is_regular(&self, floor: f64) -> bool {
        self.u.norm() > floor && self.v[0].norm() > floor && self.v[1].norm() > floor
    }

    /// Stacked coordinates `(u, v)` in `C^{n+1}`.
    pub fn stacked(&self) -> CVector {
        stack(&self.u, &self.v)
    }

    pub fn from_stacked(x: &CVector) -> Result<Self> {
        let k = x.len() - 2;
        SpherePoint::normalized(x.rows(0, k).into_owned(), x.rows(k, 2).into_owned())
    }

    fn close_to(&self, other: &SpherePoint) -> bool {
        self.u.len() == other.u.len()
            && (&self.u - &other.u).cmax() <= 1e-12
            && (&self.v - &other.v).cmax() <= 1e-12
    }
}

fn stack(u: &CVector, v: &CVector) -> CVector {
    let mut out = CVector::zeros(u.len() + v.len());
    out.rows_mut(0, u.len()).copy_from(u);
    out.rows_mut(u.len(), v.len()).copy_from(v);
    out
}

/// A tangent vector `(U, V)` at a point of the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: SpherePoint,
    du: CVector,
    dv: CVector,
}

impl TangentVector {
    /// Validates tangency `re<(U, V), (u, v)> = 0` to `1e-12` (relative to
    /// `|(U, V)|`).
    pub fn new(base: SpherePoint, du: CVector, dv: CVector) -> Result<Self> {
        if du.len() != base.u.len() || dv.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: base.u.len(),
                found: du.len(),
            });
        }
        let t = TangentVector { base, du, dv };
        let residual = (re_inner(&t.du, &t.base.u) + re_inner(&t.dv, &t.base.v)).abs();
        if residual > SPHERE_TOL * t.norm_round().max(1.0) {
            return Err(Error::NotTangent { residual });
        }
        Ok(t)
    }

    /// Removes the normal component of an arbitrary ambient vector.
    pub fn project(base: &SpherePoint, du: CVector, dv: CVector) -> Result<Self> {
        if du.len() != base.u.len() || dv.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: base.u.len(),
                found: du.len(),
            });
        }
        let normal = re_inner(&du, &base.u) + re_inner(&dv, &base.v);
        let s = Complex64::new(normal, 0.0);
        Ok(TangentVector {
            du: du - &base.u * s,
            dv: dv - &base.v * s,
            base: base.clone(),
        })
    }

    pub fn zero(base: &SpherePoint) -> Self {
        TangentVector {
            du: CVector::zeros(base.u.len()),
            dv: CVector::zeros(2),
            base: base.clone(),
        }
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn du(&self) -> &CVector {
        &self.du
    }

    pub fn dv(&self) -> &CVector {
        &self.dv
    }

    pub fn stacked(&self) -> CVector {
        stack(&self.du, &self.dv)
    }

    pub fn norm_round(&self) -> f64 {
        (self.du.norm_squared() + self.dv.norm_squared()).sqrt()
    }

    /// Same vector at a different base point; callers keep tangency.
    pub(crate) fn rebased(base: SpherePoint, du: CVector, dv: CVector) -> Self {
        TangentVector { base, du, dv }
    }

    /// `a * self + b * other`; both must share the base point.
    pub fn combine(&self, a: f64, other: &TangentVector, b: f64) -> Result<TangentVector> {
        if !self.base.close_to(&other.base) {
            return Err(Error::BasePointMismatch);
        }
        let (a, b) = (Complex64::new(a, 0.0), Complex64::new(b, 0.0));
        Ok(TangentVector {
            base: self.base.clone(),
            du: &self.du * a + &other.du * b,
            dv: &self.dv * a + &other.dv * b,
        })
    }

    pub fn scale(&self, s: f64) -> TangentVector {
        let s = Complex64::new(s, 0.0);
        TangentVector {
            base: self.base.clone(),
            du: &self.du * s,
            dv: &self.dv * s,
        }
    }

    pub fn max_abs_diff(&self, other: &TangentVector) -> f64 {
        (&self.du - &other.du).cmax().max((&self.dv - &other.dv).cmax())
    }
}

fn check_unit(s: Complex64) -> Result<()> {
    let residual = (s.norm() - 1.0).abs();
    if residual > SPHERE_TOL {
        return Err(Error::NotUnitScalar { residual });
    }
    Ok(())
}

/// `sigma . (u, v) = (sigma^p u, sigma^q v)`.
pub fn s1_act(params: &SpaceParams, sigma: Complex64, x: &SpherePoint) -> Result<SpherePoint> {
    check_unit(sigma)?;
    let sp = sigma.powu(params.p);
    let sq = sigma.powu(params.q);
    SpherePoint::normalized(&x.u * sp, &x.v * sq)
}

/// Differential of the circle action, carrying `X` to the image point.
pub fn s1_push(params: &SpaceParams, sigma: Complex64, x: &TangentVector) -> Result<TangentVector> {
    let base = s1_act(params, sigma, &x.base)?;
    let sp = sigma.powu(params.p);
    let sq = sigma.powu(params.q);
    Ok(TangentVector::rebased(base, &x.du * sp, &x.dv * sq))
}

/// `(sigma1, sigma2) . (u, v1, v2) = (u, sigma1 v1, sigma2 v2)`.
pub fn t2_act(sigma1: Complex64, sigma2: Complex64, x: &SpherePoint) -> Result<SpherePoint> {
    check_unit(sigma1)?;
    check_unit(sigma2)?;
    let v = CVector::from_vec(vec![x.v[0] * sigma1, x.v[1] * sigma2]);
    SpherePoint::normalized(x.u.clone(), v)
}

pub fn t2_push(sigma1: Complex64, sigma2: Complex64, x: &TangentVector) -> Result<TangentVector> {
    let base = t2_act(sigma1, sigma2, &x.base)?;
    let dv = CVector::from_vec(vec![x.dv[0] * sigma1, x.dv[1] * sigma2]);
    Ok(TangentVector::rebased(base, x.du.clone(), dv))
}

/// `Z* = (0, i z1 v1, i z2 v2)`.
pub fn fundamental_vector(z: &TorusVector, x: &SpherePoint) -> TangentVector {
    let dv = CVector::from_vec(vec![I * z.z1 * x.v[0], I * z.z2 * x.v[1]]);
    TangentVector::rebased(x.clone(), CVector::zeros(x.u.len()), dv)
}

/// Generator `(i p u, i q v)` of the circle action.
pub fn s1_vertical(params: &SpaceParams, x: &SpherePoint) -> TangentVector {
    TangentVector::rebased(
        x.clone(),
        &x.u * (I * params.pf()),
        &x.v * (I * params.qf()),
    )
}

/// `kappa^k(U, V) = |u|^2 <j_k u, U> - <U, iu> <j_k u, iu>`.
pub fn kappa_eval(j: &JMap, x: &SpherePoint, tv: &TangentVector) -> Result<TorusVector> {
    if j.m() != x.u.len() || tv.du.len() != x.u.len() {
        return Err(Error::DimensionMismatch {
            expected: x.u.len(),
            found: j.m(),
        });
    }
    let u = &x.u;
    let iu = u * I;
    let nu = u.norm_squared();
    let u_dot = re_inner(&tv.du, &iu);
    let mut out = [0.0; 2];
    for (k, slot) in out.iter_mut().enumerate() {
        let ju = j.component(k).as_matrix() * u;
        *slot = nu * re_inner(&ju, &tv.du) - u_dot * re_inner(&ju, &iu);
    }
    Ok(TorusVector::new(out[0], out[1]))
}

/// `kappa` for `j_Z` directly, i.e. `mu o kappa` with `mu(Z_k) = z_k`.
pub fn kappa_along(j: &JMap, z: &TorusVector, x: &SpherePoint, tv: &TangentVector) -> f64 {
    let u = &x.u;
    let iu = u * I;
    let ju = evaluate(j, z).as_matrix() * u;
    u.norm_squared() * re_inner(&ju, &tv.du) - re_inner(&tv.du, &iu) * re_inner(&ju, &iu)
}

/// Which metric on the sphere.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricSpec {
    /// Restriction of the Euclidean inner product.
    Round,
    /// Round metric with the circle fibres rescaled to length `2 pi`.
    H0,
    /// `h0(X + kappa(X)*, Y + kappa(Y)*)`.
    HKappa(JMap),
}

fn round(x: &TangentVector, y: &TangentVector) -> f64 {
    re_inner(&x.du, &y.du) + re_inner(&x.dv, &y.dv)
}

fn h0(params: &SpaceParams, x: &TangentVector, y: &TangentVector) -> f64 {
    let w = s1_vertical(params, &x.base);
    let ww = round(&w, &w);
    let cx = round(x, &w) / ww;
    let cy = round(y, &w) / ww;
    let xv = w.scale(cx);
    let yv = w.scale(cy);
    let xh = x.combine(1.0, &xv, -1.0).expect("same base");
    let yh = y.combine(1.0, &yv, -1.0).expect("same base");
    let denom = params.pf().powi(2) * x.base.u_norm_sq() + params.qf().powi(2) * x.base.v.norm_squared();
    round(&xv, &yv) / denom + round(&xh, &yh)
}

/// `X + kappa(X)*`.
pub fn kappa_shift(j: &JMap, x: &TangentVector) -> Result<TangentVector> {
    let k = kappa_eval(j, &x.base, x)?;
    x.combine(1.0, &fundamental_vector(&k, &x.base), 1.0)
}

pub fn metric_eval(
    params: &SpaceParams,
    spec: &MetricSpec,
    x: &TangentVector,
    y: &TangentVector,
) -> Result<f64> {
    if !x.base.close_to(&y.base) {
        return Err(Error::BasePointMismatch);
    }
    match spec {
        MetricSpec::Round => Ok(round(x, y)),
        MetricSpec::H0 => Ok(h0(params, x, y)),
        MetricSpec::HKappa(j) => {
            let xs = kappa_shift(j, x)?;
            let ys = kappa_shift(j, y)?;
            Ok(h0(params, &xs, &ys))
        }
    }
}

pub fn gram_matrix(
    params: &SpaceParams,
    spec: &MetricSpec,
    frame: &[TangentVector],
) -> Result<DMatrix<f64>> {
    let k = frame.len();
    let mut g = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let val = metric_eval(params, spec, &frame[a], &frame[b])?;
            g[(a, b)] = val;
            g[(b, a)] = val;
        }
    }
    Ok(g)
}

/// Minimum Round-Gram determinant accepted as a frame.
pub const FRAME_DET_FLOOR: f64 = 1e-8;

/// `det Gram_{h_kappa}(frame) / det Gram_{h0}(frame)`; equals one because
/// `X -> X + kappa(X)*` is unipotent.
pub fn volume_density_ratio(
    params: &SpaceParams,
    j: &JMap,
    x: &SpherePoint,
    frame: &[TangentVector],
) -> Result<f64> {
    density_ratio(params, &MetricSpec::HKappa(j.clone()), &MetricSpec::H0, x, frame)
}

/// `det Gram_num(frame) / det Gram_den(frame)` for a full tangent frame.
pub fn density_ratio(
    params: &SpaceParams,
    num: &MetricSpec,
    den: &MetricSpec,
    x: &SpherePoint,
    frame: &[TangentVector],
) -> Result<f64> {
    let dim = 2 * x.n() + 1;
    if frame.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: frame.len(),
        });
    }
    if frame.iter().any(|f| !f.base.close_to(x)) {
        return Err(Error::BasePointMismatch);
    }
    let det_round = gram_matrix(params, &MetricSpec::Round, frame)?.determinant();
    if det_round < FRAME_DET_FLOOR {
        return Err(Error::DegenerateFrame { det: det_round });
    }
    let top = gram_matrix(params, num, frame)?.determinant();
    let bottom = gram_matrix(params, den, frame)?.determinant();
    Ok(top / bottom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionGroup {
    S1,
    T2,
}

/// Removes the Round-orthogonal projection onto the vertical space of the
/// chosen action (its actual span at non-regular points).
pub fn horizontal_project(
    params: &SpaceParams,
    group: ActionGroup,
    x: &TangentVector,
) -> TangentVector {
    let generators = match group {
        ActionGroup::S1 => vec![s1_vertical(params, &x.base)],
        ActionGroup::T2 => vec![
            fundamental_vector(&TorusVector::Z1, &x.base),
            fundamental_vector(&TorusVector::Z2, &x.base),
        ],
    };
    // Gram-Schmidt over the generators, dropping vanishing directions
    let mut ortho: Vec<TangentVector> = Vec::new();
    for g in generators {
        let mut r = g;
        for e in &ortho {
            r = r.combine(1.0, e, -round(&r, e)).expect("same base");
        }
        let nrm = round(&r, &r).sqrt();
        if nrm > 1e-14 {
            ortho.push(r.scale(1.0 / nrm));
        }
    }
    let mut out = x.clone();
    for e in &ortho {
        out = out.combine(1.0, e, -round(x, e)).expect("same base");
    }
    out
}

/// Standard Gaussian on `C^{n+1}`, normalized.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SpherePoint {
    loop {
        let u = gaussian_vector(rng, n - 1);
        let v = gaussian_vector(rng, 2);
        if let Ok(p) = SpherePoint::normalized(u, v) {
            return p;
        }
    }
}

/// Random point with `u`, `v1`, `v2` all above the sampling floor.
pub fn random_regular_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SpherePoint {
    loop {
        let p = random_point(rng, n);
        if p.is_regular(REGULAR_SAMPLING_FLOOR) {
            return p;
        }
    }
}

/// Gaussian ambient vector projected onto the tangent space.
pub fn random_tangent<R: Rng + ?Sized>(rng: &mut R, x: &SpherePoint) -> TangentVector {
    let du = gaussian_vector(rng, x.u.len());
    let dv = gaussian_vector(rng, 2);
    TangentVector::project(x, du, dv).expect("dimensions match")
}

/// Random round-orthonormal frame of the tangent space (`2n + 1` vectors).
pub fn random_frame<R: Rng + ?Sized>(rng: &mut R, x: &SpherePoint) -> Vec<TangentVector> {
    let dim = 2 * x.n() + 1;
    let mut frame: Vec<TangentVector> = Vec::with_capacity(dim);
    while frame.len() < dim {
        let mut t = random_tangent(rng, x);
        // two passes of Gram-Schmidt keep the frame orthonormal to rounding
        for _ in 0..2 {
            for e in &frame {
                t = t.combine(1.0, e, -round(&t, e)).expect("same base");
            }
        }
        let nrm = t.norm_round();
        if nrm > 1e-3 {
            frame.push(t.scale(1.0 / nrm));
        }
    }
    frame
}
