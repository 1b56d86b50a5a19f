//! Finite-difference oracles and the end-to-end verifier for a pair of j-maps.
//!
//! Exterior derivatives are approximated by circulations around small
//! quadrilaterals `s(t1, t2) = normalize(x + t1 X1 + t2 X2)`, `t in [0, h]^2`,
//! divided by the parameter area. The circulation is a first-order
//! approximation of `d eta(X1, X2)`; [`richardson_exterior_derivative`]
//! combines steps `h` and `h/2` for second order.

use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, Tolerances};
use crate::error::{Error, Result};
use crate::jmap::{
    find_intertwiner, is_generic, non_equivalence_certificate, sample_directions, spectral_deviation,
    JMap,
};
use crate::orbit::{
    angle_from_gram, connection_form_eval, dual_lattice, fd_orbit_gram, orbit_angle, orbit_area,
    orbit_gram, quotient_orbit_gram, stratum_area, OrbitStratum, REGULARITY_TOL,
};
use crate::sphere::{
    fundamental_vector, kappa_along, kappa_eval, random_frame, random_regular_point,
    random_tangent, re_inner, s1_push, s1_vertical, t2_push, volume_density_ratio, CVector,
    MetricSpec, SpaceParams, SpherePoint, TangentVector,
};
use crate::su_algebra::{gaussian_vector, ComplexMatrix, DEFAULT_RANK_TOL};
use crate::torus::TorusVector;
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

pub type FormEvaluator<'a> = dyn Fn(&SpherePoint, &TangentVector) -> Result<Vec<f64>> + Sync + 'a;

/// A (vector-valued) one-form on the regular part of the sphere.
pub struct OneFormField<'a> {
    dim: usize,
    evaluator: Box<FormEvaluator<'a>>,
    restriction: Option<OrbitStratum>,
}

impl<'a> OneFormField<'a> {
    pub fn new<F>(dim: usize, evaluator: F) -> Self
    where
        F: Fn(&SpherePoint, &TangentVector) -> Result<Vec<f64>> + Sync + 'a,
    {
        OneFormField {
            dim,
            evaluator: Box::new(evaluator),
            restriction: None,
        }
    }

    /// Base points must then lie on `stratum`.
    pub fn restricted_to(mut self, stratum: OrbitStratum) -> Self {
        self.restriction = Some(stratum);
        self
    }

    /// `kappa` of a j-map, valued in `t`.
    pub fn kappa(j: &'a JMap) -> Self {
        OneFormField::new(2, move |x, tv| Ok(kappa_eval(j, x, tv)?.as_array().to_vec()))
    }

    /// The connection form `omega_0`, valued in `t`.
    pub fn connection(params: SpaceParams) -> Self {
        OneFormField::new(2, move |x, tv| {
            Ok(connection_form_eval(&params, x, tv)?.as_array().to_vec())
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn restriction(&self) -> Option<&OrbitStratum> {
        self.restriction.as_ref()
    }

    pub fn eval(&self, x: &SpherePoint, tv: &TangentVector) -> Result<Vec<f64>> {
        let out = (self.evaluator)(x, tv)?;
        if out.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: out.len(),
            });
        }
        Ok(out)
    }
}

// Five-point Gauss-Legendre rule on [-1, 1].
const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// `s(t1, t2)` with its two partial derivatives.
fn surface(
    x: &SpherePoint,
    x1: &TangentVector,
    x2: &TangentVector,
    t1: f64,
    t2: f64,
) -> Result<(SpherePoint, TangentVector, TangentVector)> {
    let (c1, c2) = (Complex64::new(t1, 0.0), Complex64::new(t2, 0.0));
    let y = x.stacked() + x1.stacked() * c1 + x2.stacked() * c2;
    let norm = y.norm();
    let s = SpherePoint::from_stacked(&y)?;
    let ys = s.stacked();
    let k = s.u().len();
    let partial = |dir: &CVector| -> Result<TangentVector> {
        let c = re_inner(&ys, dir);
        let d = (dir - &ys * Complex64::new(c, 0.0)) / Complex64::new(norm, 0.0);
        TangentVector::project(&s, d.rows(0, k).into_owned(), d.rows(k, 2).into_owned())
    };
    let d1 = partial(&x1.stacked())?;
    let d2 = partial(&x2.stacked())?;
    Ok((s, d1, d2))
}

fn check_inputs(form: &OneFormField, x: &SpherePoint, x1: &TangentVector, x2: &TangentVector, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    for t in [x1, x2] {
        if t.base() != x {
            return Err(Error::BasePointMismatch);
        }
    }
    if let Some(st) = form.restriction() {
        let off = (x.v()[0].norm() - st.a())
            .abs()
            .max((x.v()[1].norm() - st.b()).abs());
        if off > 1e-10 {
            return Err(Error::DomainError(format!(
                "base point is {off:e} away from the stratum"
            )));
        }
    }
    Ok(())
}

/// Smallest `|c0 + t1 c1 + t2 c2|` over `[0, h]^2`.
fn min_modulus_over_square(c0: &CVector, c1: &CVector, c2: &CVector, h: f64) -> f64 {
    let at = |t1: f64, t2: f64| {
        (c0 + c1 * Complex64::new(t1, 0.0) + c2 * Complex64::new(t2, 0.0)).norm()
    };
    // minimum of a 1-d convex quadratic along an edge from p to p + h e
    let edge = |p: (f64, f64), e: (f64, f64)| {
        let base = c0 + c1 * Complex64::new(p.0, 0.0) + c2 * Complex64::new(p.1, 0.0);
        let dir = c1 * Complex64::new(e.0, 0.0) + c2 * Complex64::new(e.1, 0.0);
        let dd = dir.norm_squared();
        let t = if dd > 0.0 {
            (-re_inner(&base, &dir) / dd).clamp(0.0, h)
        } else {
            0.0
        };
        at(p.0 + t * e.0, p.1 + t * e.1)
    };
    let mut best = edge((0.0, 0.0), (1.0, 0.0))
        .min(edge((0.0, 0.0), (0.0, 1.0)))
        .min(edge((h, 0.0), (0.0, 1.0)))
        .min(edge((0.0, h), (1.0, 0.0)));
    // interior critical point of |c0 + t1 c1 + t2 c2|^2
    let (a11, a12, a22) = (c1.norm_squared(), re_inner(c1, c2), c2.norm_squared());
    let (b1, b2) = (-re_inner(c0, c1), -re_inner(c0, c2));
    let det = a11 * a22 - a12 * a12;
    if det > 1e-300 {
        let t1 = (b1 * a22 - b2 * a12) / det;
        let t2 = (a11 * b2 - a12 * b1) / det;
        if (0.0..=h).contains(&t1) && (0.0..=h).contains(&t2) {
            best = best.min(at(t1, t2));
        }
    }
    best
}

/// `StepTooLarge` if `normalize(x + t1 X1 + t2 X2)` meets `u = 0`, `v1 = 0`
/// or `v2 = 0` for some `t in [0, h]^2`.
fn check_surface_regular(x: &SpherePoint, x1: &TangentVector, x2: &TangentVector, h: f64) -> Result<()> {
    let u_min = min_modulus_over_square(x.u(), x1.du(), x2.du(), h);
    let mut worst = u_min;
    for k in 0..2 {
        let pick = |v: &CVector| CVector::from_vec(vec![v[k]]);
        let m = min_modulus_over_square(&pick(x.v()), &pick(x1.dv()), &pick(x2.dv()), h);
        worst = worst.min(m);
    }
    if worst <= REGULARITY_TOL {
        return Err(Error::StepTooLarge);
    }
    Ok(())
}

/// Start of an edge of the parameter square as a function of `t`.
type Edge<'a> = &'a dyn Fn(f64) -> (f64, f64);

/// Circulation of `form` around `s([0, h]^2)` divided by `h^2`; a first-order
/// approximation of `d form(X1, X2)` at `x`.
pub fn fd_exterior_derivative(
    form: &OneFormField,
    x: &SpherePoint,
    x1: &TangentVector,
    x2: &TangentVector,
    h: f64,
) -> Result<Vec<f64>> {
    check_inputs(form, x, x1, x2, h)?;
    check_surface_regular(x, x1, x2, h)?;
    let mut total = vec![0.0; form.dim()];
    // (start of edge as a function of t, which partial, sign)
    let edges: [(Edge, usize, f64); 4] = [
        (&|t| (t, 0.0), 0, 1.0),
        (&|t| (h, t), 1, 1.0),
        (&|t| (t, h), 0, -1.0),
        (&|t| (0.0, t), 1, -1.0),
    ];
    for (path, which, sign) in edges {
        for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            let t = 0.5 * h * (1.0 + node);
            let (t1, t2) = path(t);
            let (s, d1, d2) = surface(x, x1, x2, t1, t2)?;
            let tangent = if which == 0 { d1 } else { d2 };
            let val = form.eval(&s, &tangent)?;
            for (acc, v) in total.iter_mut().zip(val) {
                *acc += sign * 0.5 * h * weight * v;
            }
        }
    }
    Ok(total.into_iter().map(|v| v / (h * h)).collect())
}

/// `2 D(h/2) - D(h)`, second-order accurate.
pub fn richardson_exterior_derivative(
    form: &OneFormField,
    x: &SpherePoint,
    x1: &TangentVector,
    x2: &TangentVector,
    h: f64,
) -> Result<Vec<f64>> {
    let coarse = fd_exterior_derivative(form, x, x1, x2, h)?;
    let fine = fd_exterior_derivative(form, x, x1, x2, 0.5 * h)?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| 2.0 * f - c).collect())
}

/// Unit tangent vector to `P^{-1}(O_{a,b})`: `U` orthogonal to `u`, `V_j` along `i v_j`.
pub fn random_stratum_tangent<R: Rng + ?Sized>(rng: &mut R, x: &SpherePoint) -> TangentVector {
    let u = x.u();
    let g = gaussian_vector(rng, u.len());
    let du = &g - u * Complex64::new(re_inner(&g, u) / u.norm_squared(), 0.0);
    let s = gaussian_vector(rng, 1)[0];
    let dv = CVector::from_vec(vec![I * x.v()[0] * s.re, I * x.v()[1] * s.im]);
    let t = TangentVector::new(x.clone(), du, dv).expect("tangent by construction");
    let n = t.norm_round();
    t.scale(1.0 / n)
}

/// `d kappa^k (X1, X2) = 2 (1 - 2a^2) <j_k U1^h, U2^h> - 2 <j_k u, iu> <iU1, U2>`
/// on `P^{-1}(O_{a,a})`, with `U^h = U - (<U, iu> / (1 - 2a^2)) iu`.
pub fn dkappa_closed_form(j: &JMap, a: f64, x1: &TangentVector, x2: &TangentVector) -> TorusVector {
    let x = x1.base();
    let c2 = 1.0 - 2.0 * a * a;
    let iu = x.u() * I;
    let hor = |t: &TangentVector| -> CVector {
        t.du() - &iu * Complex64::new(re_inner(t.du(), &iu) / c2, 0.0)
    };
    let (h1, h2) = (hor(x1), hor(x2));
    let iu1 = x1.du() * I;
    let cross = re_inner(&iu1, x2.du());
    let mut out = [0.0; 2];
    for (k, slot) in out.iter_mut().enumerate() {
        let jm = j.component(k).as_matrix();
        let ju = jm * x.u();
        *slot = 2.0 * c2 * re_inner(&(jm * &h1), &h2) - 2.0 * re_inner(&ju, &iu) * cross;
    }
    TorusVector::new(out[0], out[1])
}

/// `d omega_0^L (X1, X2) = -2q / (p (1 - 2a^2)) <iU1, U2>` in each component.
pub fn curvature_closed_form(params: &SpaceParams, a: f64, x1: &TangentVector, x2: &TangentVector) -> f64 {
    let c2 = 1.0 - 2.0 * a * a;
    -2.0 * params.qf() / (params.pf() * c2) * re_inner(&(x1.du() * I), x2.du())
}

/// One line of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub paper_anchor: String,
    pub sample_count: usize,
    /// Non-finite values (failed evaluations) serialize as `null`.
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckEntry {
    pub fn new(name: impl Into<String>, anchor: impl Into<String>, samples: usize, residual: f64, tol: f64) -> Self {
        CheckEntry {
            name: name.into(),
            paper_anchor: anchor.into(),
            sample_count: samples,
            max_residual: residual,
            tolerance: tol,
            passed: residual <= tol,
        }
    }

    /// Group is the name up to the first dot.
    pub fn group(&self) -> &str {
        self.name.split('.').next().unwrap_or(&self.name)
    }
}

/// Running maximum that keeps a NaN once seen.
#[derive(Debug, Clone, Copy, Default)]
struct MaxResidual(f64);

impl MaxResidual {
    fn add(&mut self, r: f64) {
        if r.is_nan() || self.0.is_nan() {
            self.0 = f64::NAN;
        } else {
            self.0 = self.0.max(r);
        }
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent seed for sub-task `index` of a run seeded with `seed`.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index + 1);
    rng.next_u64()
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

/// Four admissibility checks of `kappa`: horizontal and invariant for both the
/// torus and the circle action. Names are prefixed with `label`.
pub fn check_kappa_admissibility(
    j: &JMap,
    params: &SpaceParams,
    label: &str,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Vec<CheckEntry> {
    let mut rng = rng_for(seed);
    let mut t2h = MaxResidual::default();
    let mut t2i = MaxResidual::default();
    let mut s1h = MaxResidual::default();
    let mut s1i = MaxResidual::default();
    let diff = |a: TorusVector, b: TorusVector| a.add(&b.scale(-1.0)).max_abs();
    for _ in 0..samples {
        let x = random_regular_point(&mut rng, params.n);
        let tv = random_tangent(&mut rng, &x);
        let z = TorusVector::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let sigma = [random_unit(&mut rng), random_unit(&mut rng), random_unit(&mut rng)];
        let res = (|| -> Result<[f64; 4]> {
            let k = kappa_eval(j, &x, &tv)?;
            let h = kappa_eval(j, &x, &fundamental_vector(&z, &x))?.max_abs();
            let moved = t2_push(sigma[0], sigma[1], &tv)?;
            let inv = diff(kappa_eval(j, moved.base(), &moved)?, k);
            let sh = kappa_eval(j, &x, &s1_vertical(params, &x))?.max_abs();
            let moved = s1_push(params, sigma[2], &tv)?;
            let sinv = diff(kappa_eval(j, moved.base(), &moved)?, k);
            Ok([h, inv, sh, sinv])
        })()
        .unwrap_or([f64::NAN; 4]);
        t2h.add(res[0]);
        t2i.add(res[1]);
        s1h.add(res[2]);
        s1i.add(res[3]);
    }
    vec![
        CheckEntry::new(
            format!("kappa.{label}.t2_horizontal"),
            "kappa(Z*) = 0 for every Z in t (torus-horizontal)",
            samples,
            t2h.0,
            tol,
        ),
        CheckEntry::new(
            format!("kappa.{label}.t2_invariant"),
            "kappa(d sigma X) at sigma x equals kappa(X) at x for sigma in T~",
            samples,
            t2i.0,
            tol,
        ),
        CheckEntry::new(
            format!("kappa.{label}.s1_horizontal"),
            "kappa((ipu, iqv)) = 0 (circle-horizontal)",
            samples,
            s1h.0,
            tol,
        ),
        CheckEntry::new(
            format!("kappa.{label}.s1_invariant"),
            "kappa(d sigma X) at sigma x equals kappa(X) at x for sigma in S^1",
            samples,
            s1i.0,
            tol,
        ),
    ]
}

/// `|det Gram_{h_kappa} / det Gram_{h0} - 1|` over random points and frames.
pub fn check_volume(j: &JMap, params: &SpaceParams, label: &str, samples: usize, seed: u64, tol: f64) -> CheckEntry {
    let mut rng = rng_for(seed);
    let mut worst = MaxResidual::default();
    for _ in 0..samples {
        let x = random_regular_point(&mut rng, params.n);
        let frame = random_frame(&mut rng, &x);
        let r = volume_density_ratio(params, j, &x, &frame).map_or(f64::NAN, |r| (r - 1.0).abs());
        worst.add(r);
    }
    CheckEntry::new(
        format!("volume.{label}"),
        "dvol of h_kappa equals dvol of h_0",
        samples,
        worst.0,
        tol,
    )
}

/// Orbit Grams under `h_kappa` for each map agree with the one under `h0`.
pub fn check_vertical_metric(maps: &[&JMap], params: &SpaceParams, samples: usize, seed: u64, tol: f64) -> CheckEntry {
    let mut rng = rng_for(seed);
    let mut worst = MaxResidual::default();
    for _ in 0..samples {
        let x = random_regular_point(&mut rng, params.n);
        let res = (|| -> Result<f64> {
            let g0 = quotient_orbit_gram(params, &MetricSpec::H0, &x)?;
            let mut r = 0.0_f64;
            for j in maps {
                let gk = quotient_orbit_gram(params, &MetricSpec::HKappa((*j).clone()), &x)?;
                r = r.max(gk.max_abs_diff(&g0));
            }
            Ok(r)
        })()
        .unwrap_or(f64::NAN);
        worst.add(res);
    }
    CheckEntry::new(
        "vertical_metric",
        "h_kappa restricts to the same metric as h_0 on torus orbits",
        samples,
        worst.0,
        tol,
    )
}

/// Closed-form orbit Gram against the orbit-map finite-difference oracle.
pub fn check_orbit_gram(params: &SpaceParams, samples: usize, seed: u64, tol: f64) -> CheckEntry {
    let mut rng = rng_for(seed);
    let mut worst = MaxResidual::default();
    for _ in 0..samples {
        let x = random_regular_point(&mut rng, params.n);
        let r = match (orbit_gram(params, &x), fd_orbit_gram(params, &x, 1e-3)) {
            (Ok(g), Ok(fd)) => g.max_abs_diff(&fd),
            _ => f64::NAN,
        };
        worst.add(r);
    }
    CheckEntry::new(
        "closed_form.orbit_gram",
        "<Z_j, Z_k> = delta_jk |v_j|^2 - q^2 |v_j|^2 |v_k|^2 / (p^2 |u|^2 + q^2 |v|^2)",
        samples,
        worst.0,
        tol,
    )
}

/// Gram-route area against the `(a, b, c)` formula.
pub fn check_area(params: &SpaceParams, samples: usize, seed: u64, tol: f64) -> CheckEntry {
    let mut rng = rng_for(seed);
    let mut worst = MaxResidual::default();
    for _ in 0..samples {
        let x = random_regular_point(&mut rng, params.n);
        let r = match (orbit_area(params, &x), OrbitStratum::of_point(&x)) {
            (Ok(area), Ok(st)) => (area - stratum_area(params, &st)).abs(),
            _ => f64::NAN,
        };
        worst.add(r);
    }
    CheckEntry::new(
        "closed_form.area",
        "(p^2 / 16 pi^4) A^2 = a^2 b^2 (1 - q^2 (1 - c^2) / (p^2 c^2 + q^2 (1 - c^2)))",
        samples,
        worst.0,
        tol,
    )
}

/// Angle formula against the Gram-derived angle on `O_{a,a}`.
pub fn check_angle(params: &SpaceParams, a: f64, samples: usize, seed: u64, tol: f64) -> CheckEntry {
    let mut rng = rng_for(seed);
    let mut worst = MaxResidual::default();
    let expected = orbit_angle(params, a);
    let stratum = OrbitStratum::new(a, a);
    for _ in 0..samples {
        let r = match (&expected, &stratum) {
            (Ok(angle), Ok(st)) => {
                let x = st.sample_point(&mut rng, params.n);
                orbit_gram(params, &x).map_or(f64::NAN, |g| (angle_from_gram(&g) - angle).abs())
            }
            _ => f64::NAN,
        };
        worst.add(r);
    }
    CheckEntry::new(
        "closed_form.angle",
        "angle(Z_1, Z_2) = arccos(-q^2 a^2 / (p^2 (1 - 2a^2) + q^2 a^2)) on |v_1| = |v_2| = a",
        samples,
        worst.0,
        tol,
    )
}

fn diagonal_stratum(a: f64) -> Result<OrbitStratum> {
    OrbitStratum::new(a, a)
}

/// Richardson finite-difference `d kappa` against its closed form on
/// `P^{-1}(O_{a,a})`.
#[allow(clippy::too_many_arguments)]
pub fn check_dkappa_closed_form(
    j: &JMap,
    params: &SpaceParams,
    a: f64,
    label: &str,
    samples: usize,
    seed: u64,
    h: f64,
    tol: f64,
) -> Result<CheckEntry> {
    let stratum = diagonal_stratum(a)?;
    let form = OneFormField::kappa(j).restricted_to(stratum);
    let mut rng = rng_for(seed);
    let mut worst = MaxResidual::default();
    for _ in 0..samples {
        let x = stratum.sample_point(&mut rng, params.n);
        let x1 = random_stratum_tangent(&mut rng, &x);
        let x2 = random_stratum_tangent(&mut rng, &x);
        let r = richardson_exterior_derivative(&form, &x, &x1, &x2, h).map_or(f64::NAN, |fd| {
            let closed = dkappa_closed_form(j, a, &x1, &x2);
            (fd[0] - closed.z1).abs().max((fd[1] - closed.z2).abs())
        });
        worst.add(r);
    }
    Ok(CheckEntry::new(
        format!("closed_form.dkappa.{label}"),
        "d kappa(X1, X2) = 2(1 - 2a^2) <j U1^h, U2^h> - 2 <j u, iu> <iU1, U2> on |v_1| = |v_2| = a",
        samples,
        worst.0,
        tol,
    ))
}

/// Outcome of [`check_curvature_closed_form`].
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureCheck {
    pub closed_form: CheckEntry,
    pub components: CheckEntry,
    /// Largest `|d omega_0^L|` seen; the form does not vanish.
    pub max_abs_value: f64,
}

/// Richardson finite-difference `d omega_0` against the restricted curvature
/// on `P^{-1}(O_{a,a})`, plus equality of the two components.
#[allow(clippy::too_many_arguments)]
pub fn check_curvature_closed_form(
    params: &SpaceParams,
    a: f64,
    samples: usize,
    seed: u64,
    h: f64,
    tol: f64,
    component_tol: f64,
) -> Result<CurvatureCheck> {
    let stratum = diagonal_stratum(a)?;
    let form = OneFormField::connection(*params).restricted_to(stratum);
    let mut rng = rng_for(seed);
    let mut worst = MaxResidual::default();
    let mut worst_split = MaxResidual::default();
    let mut largest = 0.0_f64;
    for _ in 0..samples {
        let x = stratum.sample_point(&mut rng, params.n);
        let x1 = random_stratum_tangent(&mut rng, &x);
        let x2 = random_stratum_tangent(&mut rng, &x);
        match richardson_exterior_derivative(&form, &x, &x1, &x2, h) {
            Ok(fd) => {
                let closed = curvature_closed_form(params, a, &x1, &x2);
                worst.add((fd[0] - closed).abs().max((fd[1] - closed).abs()));
                worst_split.add((fd[0] - fd[1]).abs());
                largest = largest.max(fd[0].abs()).max(fd[1].abs());
            }
            Err(_) => {
                worst.add(f64::NAN);
                worst_split.add(f64::NAN);
            }
        }
    }
    Ok(CurvatureCheck {
        closed_form: CheckEntry::new(
            "closed_form.curvature",
            "d omega_0 restricted to |v_1| = |v_2| = a equals -2q / (p (1 - 2a^2)) <iU1, U2>",
            samples,
            worst.0,
            tol,
        ),
        components: CheckEntry::new(
            "closed_form.curvature_components",
            "both components of the restricted curvature agree",
            samples,
            worst_split.0,
            component_tol,
        ),
        max_abs_value: largest,
    })
}

/// Outcome of [`check_intertwining`].
#[derive(Debug, Clone, PartialEq)]
pub struct IntertwiningCheck {
    pub entry: CheckEntry,
    /// How many times `Z` had to be perturbed before an intertwiner was found.
    pub perturbations: usize,
    pub error: Option<String>,
}

/// Perturbation of `Z` used after a failed eigenspace alignment.
pub const Z_PERTURBATION: f64 = 1e-4;
pub const MAX_PERTURBATIONS: usize = 3;

/// Checks `mu o kappa = E_mu^*(mu o kappa')` with `E_mu = (A_Z, Id)` where
/// `A_Z j_Z A_Z^{-1} = j'_Z` and `Z` is dual to `mu = k1 e1* + k2 e2*`.
#[allow(clippy::too_many_arguments)]
pub fn check_intertwining(
    j: &JMap,
    j2: &JMap,
    params: &SpaceParams,
    mu: [i64; 2],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<IntertwiningCheck> {
    let name = format!("intertwining.mu=({},{})", mu[0], mu[1]);
    let anchor = "mu o kappa = E_mu^*(mu o kappa') with E_mu = (A_Z, Id)";
    let z = dual_lattice(params).covector(mu);
    if mu == [0, 0] {
        return Ok(IntertwiningCheck {
            entry: CheckEntry::new(name, anchor, samples, 0.0, tol),
            perturbations: 0,
            error: None,
        });
    }
    let mut perturbations = 0;
    let a: ComplexMatrix = loop {
        let dz = Z_PERTURBATION * perturbations as f64;
        let zp = TorusVector::new(z.z1 + dz, z.z2 - 0.5 * dz);
        match find_intertwiner(j, j2, &zp, tol) {
            Ok(a) => break a,
            Err(Error::DegenerateAlignmentFailed { cluster }) => {
                if perturbations == MAX_PERTURBATIONS {
                    return Ok(IntertwiningCheck {
                        entry: CheckEntry::new(name, anchor, samples, f64::INFINITY, tol),
                        perturbations,
                        error: Some(Error::DegenerateAlignmentFailed { cluster }.to_string()),
                    });
                }
                perturbations += 1;
            }
            Err(e) => return Err(e),
        }
    };
    let mut rng = rng_for(seed);
    let mut worst = MaxResidual::default();
    for _ in 0..samples {
        let x = random_regular_point(&mut rng, params.n);
        let tv = random_tangent(&mut rng, &x);
        let lhs = kappa_along(j, &z, &x, &tv);
        let ex = SpherePoint::normalized(&a * x.u(), x.v().clone());
        let r = ex
            .and_then(|ex| {
                let etv = TangentVector::new(ex.clone(), &a * tv.du(), tv.dv().clone())?;
                Ok((lhs - kappa_along(j2, &z, &ex, &etv)).abs())
            })
            .unwrap_or(f64::NAN);
        worst.add(r);
    }
    Ok(IntertwiningCheck {
        entry: CheckEntry::new(name, anchor, samples, worst.0, tol),
        perturbations,
        error: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub params: SpaceParams,
    pub seed: u64,
    pub timestamp: Option<String>,
    pub tool_version: String,
    pub samples: usize,
    pub mu_range: i64,
    pub fd_step: f64,
    pub stratum_a: f64,
    pub tolerances: Tolerances,
    /// Informational outcomes (genericity, certificates, workarounds).
    pub info: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckEntry>,
    pub metadata: ReportMetadata,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckEntry> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn groups(&self) -> Vec<String> {
        let mut g: Vec<String> = self.checks.iter().map(|c| c.group().to_string()).collect();
        g.dedup();
        g.sort();
        g.dedup();
        g
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        canonical_json(&serde_json::to_value(self).expect("report serializes"))
    }
}

/// Serializes with object keys sorted, terminated by a newline.
pub fn canonical_json(value: &Value) -> String {
    // serde_json's map is ordered by key unless `preserve_order` is enabled
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

type Task<'a> = Box<dyn Fn() -> (Vec<CheckEntry>, Vec<(String, Value)>) + Send + Sync + 'a>;

/// Runs every check for the pair `(j, j2)` and assembles a report. Check
/// failures, including errors inside a check, become failing entries.
pub fn verify_pair(j: &JMap, j2: &JMap, config: &RunConfig) -> Result<VerificationReport> {
    config.validate()?;
    if j.m() != j2.m() {
        return Err(Error::DimensionMismatch {
            expected: j.m(),
            found: j2.m(),
        });
    }
    let params = config.params_for(Some(j.m()))?;
    if params.m() != j.m() {
        return Err(Error::DimensionMismatch {
            expected: params.m(),
            found: j.m(),
        });
    }
    let tol = config.tolerances;
    let samples = config.samples;
    let h = config.fd_step;
    let a = config.stratum_a;
    let seed = |k: u64| sub_seed(config.seed, k);
    let no_info = Vec::new;

    let mut tasks: Vec<Task> = Vec::new();
    tasks.push(Box::new(move || {
        let (res, info) = match spectral_deviation(j, j2) {
            Ok(d) => (d, None),
            Err(e) => (f64::NAN, Some(("isospectral_error".to_string(), json!(e.to_string())))),
        };
        let entry = CheckEntry::new(
            "isospectral",
            "spec(-i j_Z) = spec(-i j'_Z) for every Z in t",
            sample_directions(j.m()).len(),
            res,
            tol.isospectral,
        );
        (vec![entry], info.into_iter().collect())
    }));
    for (idx, (map, label)) in [(j, "left"), (j2, "right")].into_iter().enumerate() {
        let idx = idx as u64;
        tasks.push(Box::new(move || {
            (
                check_kappa_admissibility(map, &params, label, samples, seed(10 + idx), tol.kappa),
                no_info(),
            )
        }));
        tasks.push(Box::new(move || {
            (
                vec![check_volume(map, &params, label, samples, seed(20 + idx), tol.volume)],
                no_info(),
            )
        }));
        tasks.push(Box::new(move || {
            match check_dkappa_closed_form(map, &params, a, label, samples, seed(30 + idx), h, tol.dkappa) {
                Ok(e) => (vec![e], no_info()),
                Err(e) => (
                    vec![CheckEntry::new(
                        format!("closed_form.dkappa.{label}"),
                        "d kappa closed form",
                        0,
                        f64::NAN,
                        tol.dkappa,
                    )],
                    vec![(format!("dkappa_{label}_error"), json!(e.to_string()))],
                ),
            }
        }));
    }
    tasks.push(Box::new(move || {
        (
            vec![check_vertical_metric(&[j, j2], &params, samples, seed(40), tol.vertical_metric)],
            no_info(),
        )
    }));
    tasks.push(Box::new(move || {
        (
            vec![
                check_orbit_gram(&params, samples, seed(41), tol.orbit_gram),
                check_area(&params, samples, seed(42), tol.area),
                check_angle(&params, a, samples, seed(43), tol.angle),
            ],
            no_info(),
        )
    }));
    tasks.push(Box::new(move || {
        match check_curvature_closed_form(&params, a, samples, seed(44), h, tol.curvature, tol.curvature_components) {
            Ok(c) => (
                vec![c.closed_form, c.components],
                vec![("curvature_max_abs".to_string(), json!(c.max_abs_value))],
            ),
            Err(e) => (Vec::new(), vec![("curvature_error".to_string(), json!(e.to_string()))]),
        }
    }));
    let r = config.mu_range;
    for k1 in -r..=r {
        for k2 in -r..=r {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            let index = 1000 + ((k1 + r) * (2 * r + 1) + (k2 + r)) as u64;
            tasks.push(Box::new(move || {
                let mu = [k1, k2];
                match check_intertwining(j, j2, &params, mu, samples, seed(index), tol.intertwining) {
                    Ok(c) => {
                        let mut info = Vec::new();
                        if c.perturbations > 0 {
                            info.push((
                                format!("{}.perturbations", c.entry.name),
                                json!(c.perturbations),
                            ));
                        }
                        if let Some(err) = c.error {
                            info.push((format!("{}.error", c.entry.name), json!(err)));
                        }
                        (vec![c.entry], info)
                    }
                    Err(e) => {
                        let entry = CheckEntry::new(
                            format!("intertwining.mu=({k1},{k2})"),
                            "mu o kappa = E_mu^*(mu o kappa') with E_mu = (A_Z, Id)",
                            0,
                            f64::INFINITY,
                            tol.intertwining,
                        );
                        let info = vec![(format!("{}.error", entry.name), json!(e.to_string()))];
                        (vec![entry], info)
                    }
                }
            }));
        }
    }
    tasks.push(Box::new(move || {
        let mut info = vec![
            ("generic.left".to_string(), json!(is_generic(j, DEFAULT_RANK_TOL))),
            ("generic.right".to_string(), json!(is_generic(j2, DEFAULT_RANK_TOL))),
        ];
        let cert = match non_equivalence_certificate(j, j2) {
            Ok(c) => serde_json::to_value(c).expect("certificate serializes"),
            Err(e) => json!({ "error": e.to_string() }),
        };
        info.push(("certificate".to_string(), cert));
        (Vec::new(), info)
    }));

    let results: Vec<_> = tasks.par_iter().map(|t| t()).collect();
    let mut checks = Vec::new();
    let mut info = BTreeMap::new();
    for (entries, extra) in results {
        checks.extend(entries);
        info.extend(extra);
    }
    checks.sort_by(|a, b| a.name.cmp(&b.name));

    Ok(VerificationReport {
        checks,
        metadata: ReportMetadata {
            params,
            seed: config.seed,
            timestamp: config.timestamp.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            samples,
            mu_range: config.mu_range,
            fd_step: h,
            stratum_a: a,
            tolerances: tol,
            info,
        },
    })
}
