//! Geometry of the torus orbits in the weighted projective space: orbit Gram
//! matrices, areas and angles, the lattice `L` with `t / L = T`, flat-torus
//! spectra of the orbits, and the connection form `omega_0`.

use std::f64::consts::PI;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{
    fundamental_vector, horizontal_project, metric_eval, re_inner, s1_vertical, t2_act, ActionGroup,
    CVector, MetricSpec, SpaceParams, SpherePoint, TangentVector,
};
use crate::su_algebra::gaussian_vector;
use crate::torus::TorusVector;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Components of modulus below this make a point singular for orbit geometry.
pub const REGULARITY_TOL: f64 = 1e-10;

fn check_regular(x: &SpherePoint) -> Result<()> {
    if x.u().norm() < REGULARITY_TOL {
        return Err(Error::SingularPoint("u vanishes".into()));
    }
    for k in 0..2 {
        if x.v()[k].norm() < REGULARITY_TOL {
            return Err(Error::SingularPoint(format!("v{} vanishes", k + 1)));
        }
    }
    Ok(())
}

/// Gram matrix of the torus fundamental fields on the quotient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitGram {
    pub g: [[f64; 2]; 2],
}

impl OrbitGram {
    pub fn new(g: [[f64; 2]; 2]) -> Self {
        OrbitGram { g }
    }

    pub fn identity() -> Self {
        OrbitGram::new([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.g[0][0], self.g[0][1], self.g[1][0], self.g[1][1])
    }

    pub fn det(&self) -> f64 {
        self.g[0][0] * self.g[1][1] - self.g[0][1] * self.g[1][0]
    }

    pub fn scale(&self, s: f64) -> OrbitGram {
        OrbitGram::new([
            [self.g[0][0] * s, self.g[0][1] * s],
            [self.g[1][0] * s, self.g[1][1] * s],
        ])
    }

    pub fn is_positive_definite(&self) -> bool {
        self.g[0][0] > 0.0 && self.det() > 0.0
    }

    /// Cosine of the angle between the two fundamental fields.
    pub fn cos_angle(&self) -> f64 {
        self.g[0][1] / (self.g[0][0] * self.g[1][1]).sqrt()
    }

    pub fn max_abs_diff(&self, other: &OrbitGram) -> f64 {
        let mut out = 0.0_f64;
        for r in 0..2 {
            for c in 0..2 {
                out = out.max((self.g[r][c] - other.g[r][c]).abs());
            }
        }
        out
    }
}

/// The stratum `O_{a,b}`: `|v1| = a`, `|v2| = b`, `|u| = c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitStratum {
    a: f64,
    b: f64,
    c: f64,
}

impl OrbitStratum {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::DomainError(format!(
                "stratum needs a > 0 and b > 0, got a = {a}, b = {b}"
            )));
        }
        let r = a * a + b * b;
        if !(r < 1.0) {
            return Err(Error::DomainError(format!(
                "stratum needs a^2 + b^2 < 1, got {r}"
            )));
        }
        Ok(OrbitStratum {
            a,
            b,
            c: (1.0 - r).sqrt(),
        })
    }

    /// The stratum containing a regular point.
    pub fn of_point(x: &SpherePoint) -> Result<Self> {
        check_regular(x)?;
        OrbitStratum::new(x.v()[0].norm(), x.v()[1].norm())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// A point with random `u` direction and random phases of `v1`, `v2`.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> SpherePoint {
        let g = gaussian_vector(rng, n - 1);
        let u = &g * Complex64::new(self.c / g.norm(), 0.0);
        let v = CVector::from_vec(vec![
            Complex64::from_polar(self.a, rng.random_range(0.0..2.0 * PI)),
            Complex64::from_polar(self.b, rng.random_range(0.0..2.0 * PI)),
        ]);
        SpherePoint::normalized(u, v).expect("nonzero point")
    }
}

fn gram_from_moduli(params: &SpaceParams, u2: f64, v: [f64; 2]) -> OrbitGram {
    let (p, q) = (params.pf(), params.qf());
    let denom = p * p * u2 + q * q * (v[0] + v[1]);
    let mut g = [[0.0; 2]; 2];
    for (j, row) in g.iter_mut().enumerate() {
        for (k, slot) in row.iter_mut().enumerate() {
            let delta = if j == k { v[j] } else { 0.0 };
            *slot = delta - q * q * (v[j] * v[k]) / denom;
        }
    }
    OrbitGram::new(g)
}

/// `G_jk = delta_jk |v_j|^2 - q^2 |v_j|^2 |v_k|^2 / (p^2 |u|^2 + q^2 |v|^2)`.
pub fn orbit_gram(params: &SpaceParams, x: &SpherePoint) -> Result<OrbitGram> {
    check_regular(x)?;
    Ok(gram_from_moduli(
        params,
        x.u_norm_sq(),
        [x.v_abs_sq(0), x.v_abs_sq(1)],
    ))
}

/// Orbit Gram on a stratum, which only depends on `a`, `b`, `c`.
pub fn stratum_gram(params: &SpaceParams, stratum: &OrbitStratum) -> OrbitGram {
    gram_from_moduli(
        params,
        stratum.c * stratum.c,
        [stratum.a * stratum.a, stratum.b * stratum.b],
    )
}

/// The left-invariant metric pulled back to `T~` along the orbit map, at
/// `sigma`, evaluated on the left-invariant fields `A` and `B`.
pub fn general_orbit_product(
    params: &SpaceParams,
    x: &SpherePoint,
    a: [f64; 2],
    b: [f64; 2],
    sigma: [Complex64; 2],
) -> Result<f64> {
    check_regular(x)?;
    let y = t2_act(sigma[0], sigma[1], x)?;
    let v = [y.v_abs_sq(0), y.v_abs_sq(1)];
    let (p, q) = (params.pf(), params.qf());
    let denom = p * p * y.u_norm_sq() + q * q * (v[0] + v[1]);
    let av = a[0] * v[0] + a[1] * v[1];
    let bv = b[0] * v[0] + b[1] * v[1];
    Ok(a[0] * b[0] * v[0] + a[1] * b[1] * v[1] - q * q * av * bv / denom)
}

/// `(4 pi^2 / p) sqrt(det G)`.
pub fn orbit_area(params: &SpaceParams, x: &SpherePoint) -> Result<f64> {
    let g = orbit_gram(params, x)?;
    Ok(area_from_gram(params, &g))
}

pub fn area_from_gram(params: &SpaceParams, g: &OrbitGram) -> f64 {
    4.0 * PI * PI / params.pf() * g.det().sqrt()
}

/// Area from `(p^2 / 16 pi^4) A^2 = a^2 b^2 (1 - q^2 (1 - c^2) / (p^2 c^2 + q^2 (1 - c^2)))`.
pub fn stratum_area(params: &SpaceParams, stratum: &OrbitStratum) -> f64 {
    let (p, q) = (params.pf(), params.qf());
    let (a2, b2, c2) = (
        stratum.a * stratum.a,
        stratum.b * stratum.b,
        stratum.c * stratum.c,
    );
    let rhs = a2 * b2 * (1.0 - q * q * (1.0 - c2) / (p * p * c2 + q * q * (1.0 - c2)));
    (16.0 * PI.powi(4) * rhs / (p * p)).sqrt()
}

/// Angle between the fundamental fields on `O_{a,a}`:
/// `arccos(-q^2 a^2 / (p^2 (1 - 2a^2) + q^2 a^2))`.
pub fn orbit_angle(params: &SpaceParams, a: f64) -> Result<f64> {
    if !(a > 0.0 && a < std::f64::consts::FRAC_1_SQRT_2) {
        return Err(Error::DomainError(format!(
            "angle needs 0 < a < 1/sqrt(2), got {a}"
        )));
    }
    let (p, q) = (params.pf(), params.qf());
    let a2 = a * a;
    Ok((-q * q * a2 / (p * p * (1.0 - 2.0 * a2) + q * q * a2)).acos())
}

/// Angle read off a Gram matrix.
pub fn angle_from_gram(g: &OrbitGram) -> f64 {
    g.cos_angle().clamp(-1.0, 1.0).acos()
}

/// `L = span_Z {2 pi Z1, (2 pi / p)(Z1 + Z2)}` and its dual basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightLattice {
    pub p: u32,
    /// Rows are basis vectors in `Z1, Z2` coordinates.
    pub basis: [[f64; 2]; 2],
    /// Rows are dual covectors in coordinates against `Z1, Z2`.
    pub dual_basis: [[f64; 2]; 2],
}

impl WeightLattice {
    /// `pairing[i][j] = dual_basis_i(basis_j)`.
    pub fn pairing(&self) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = self.dual_basis[i][0] * self.basis[j][0]
                    + self.dual_basis[i][1] * self.basis[j][1];
            }
        }
        out
    }

    /// `p` times the pairing matrix, computed in integers: the `2 pi` factors
    /// cancel, the basis is `2 pi (p, 0) / p, 2 pi (1, 1) / p` and the dual
    /// basis `(1, -1) / 2 pi, (0, p) / 2 pi`.
    pub fn scaled_integer_pairing(&self) -> [[i64; 2]; 2] {
        let p = self.p as i64;
        let basis = [[p, 0], [1, 1]];
        let dual = [[1, -1], [0, p]];
        let mut out = [[0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = dual[i][0] * basis[j][0] + dual[i][1] * basis[j][1];
            }
        }
        out
    }

    pub fn covolume(&self) -> f64 {
        (self.basis[0][0] * self.basis[1][1] - self.basis[0][1] * self.basis[1][0]).abs()
    }

    /// `(mu(Z1), mu(Z2))` for `mu = k1 e1* + k2 e2*`.
    pub fn covector(&self, k: [i64; 2]) -> TorusVector {
        let (k1, k2) = (k[0] as f64, k[1] as f64);
        TorusVector::new(
            k1 * self.dual_basis[0][0] + k2 * self.dual_basis[1][0],
            k1 * self.dual_basis[0][1] + k2 * self.dual_basis[1][1],
        )
    }
}

pub fn dual_lattice(params: &SpaceParams) -> WeightLattice {
    let p = params.pf();
    let two_pi = 2.0 * PI;
    WeightLattice {
        p: params.p,
        basis: [[two_pi, 0.0], [two_pi / p, two_pi / p]],
        dual_basis: [[1.0 / two_pi, -1.0 / two_pi], [0.0, p / two_pi]],
    }
}

/// Largest coefficient radius enumerated by [`flat_torus_spectrum`].
pub const MAX_ENUMERATION_RADIUS: i64 = 5000;

/// Laplace eigenvalues `4 pi^2 |l|^2_{G^-1}` of `t / L` with the metric `G`,
/// for `l` in the dual lattice, up to `cutoff`, ascending with multiplicity.
pub fn flat_torus_spectrum(g: &OrbitGram, lattice: &WeightLattice, cutoff: f64) -> Result<Vec<f64>> {
    if !cutoff.is_finite() || cutoff < 0.0 {
        return Err(Error::DomainError(format!("cutoff must be >= 0, got {cutoff}")));
    }
    let gm = g.matrix();
    if (gm[(0, 1)] - gm[(1, 0)]).abs() > 1e-12 * gm.amax() || !g.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let ginv = gm.try_inverse().ok_or(Error::NotPositiveDefinite)?;
    // columns are the dual basis covectors
    let d = Matrix2::new(
        lattice.dual_basis[0][0],
        lattice.dual_basis[1][0],
        lattice.dual_basis[0][1],
        lattice.dual_basis[1][1],
    );
    let form = (d.transpose() * ginv * d) * (4.0 * PI * PI);
    let form = (form + form.transpose()) * 0.5;
    let lambda_min = form.symmetric_eigenvalues().min();
    if lambda_min <= 0.0 {
        return Err(Error::NotPositiveDefinite);
    }
    // k^T M k >= lambda_min |k|^2, over-enumerated by 10%
    let radius = (1.1 * (cutoff / lambda_min).sqrt()).ceil();
    if radius > MAX_ENUMERATION_RADIUS as f64 {
        return Err(Error::DomainError(format!(
            "cutoff {cutoff} needs enumeration radius {radius}, above {MAX_ENUMERATION_RADIUS}"
        )));
    }
    let radius = radius as i64;
    let limit = cutoff * (1.0 + 1e-12);
    let mut out = Vec::new();
    for k1 in -radius..=radius {
        for k2 in -radius..=radius {
            let (a, b) = (k1 as f64, k2 as f64);
            let val = form[(0, 0)] * a * a + 2.0 * form[(0, 1)] * a * b + form[(1, 1)] * b * b;
            if val <= limit {
                out.push(val.max(0.0));
            }
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    Ok(out)
}

/// `omega_0^j(U, V) = -(q/p) <U, iu> / |u|^2 + <V_j, i v_j> / |v_j|^2`.
pub fn connection_form_eval(
    params: &SpaceParams,
    x: &SpherePoint,
    tv: &TangentVector,
) -> Result<TorusVector> {
    check_regular(x)?;
    let iu = x.u() * I;
    let common = -(params.qf() / params.pf()) * re_inner(tv.du(), &iu) / x.u_norm_sq();
    let mut out = [0.0; 2];
    for (k, slot) in out.iter_mut().enumerate() {
        let vk = x.v()[k];
        let dvk = tv.dv()[k];
        *slot = common + (dvk * (I * vk).conj()).re / vk.norm_sqr();
    }
    Ok(TorusVector::new(out[0], out[1]))
}

/// Orbit Gram under the quotient of `spec`: the fundamental fields are lifted
/// `spec`-orthogonally to the circle generator and paired with `spec`.
pub fn quotient_orbit_gram(
    params: &SpaceParams,
    spec: &MetricSpec,
    x: &SpherePoint,
) -> Result<OrbitGram> {
    check_regular(x)?;
    let w = s1_vertical(params, x);
    let ww = metric_eval(params, spec, &w, &w)?;
    let mut lifts = Vec::with_capacity(2);
    for z in [TorusVector::Z1, TorusVector::Z2] {
        let f = fundamental_vector(&z, x);
        let c = metric_eval(params, spec, &f, &w)? / ww;
        lifts.push(f.combine(1.0, &w, -c)?);
    }
    let mut g = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            g[r][c] = metric_eval(params, spec, &lifts[r], &lifts[c])?;
        }
    }
    Ok(OrbitGram::new(g))
}

/// Derivative of the orbit map `s -> t2_act(sigma exp(i s A), x)` at `s = 0`
/// by a fourth-order central difference with step `eps`.
pub fn orbit_map_derivative(
    x: &SpherePoint,
    sigma: [Complex64; 2],
    a: [f64; 2],
    eps: f64,
) -> Result<TangentVector> {
    let eval = |s: f64| -> Result<CVector> {
        let s1 = sigma[0] * Complex64::from_polar(1.0, s * a[0]);
        let s2 = sigma[1] * Complex64::from_polar(1.0, s * a[1]);
        Ok(t2_act(s1, s2, x)?.stacked())
    };
    let d = (eval(-2.0 * eps)? - eval(2.0 * eps)? + (eval(eps)? - eval(-eps)?) * Complex64::new(8.0, 0.0))
        / Complex64::new(12.0 * eps, 0.0);
    let base = t2_act(sigma[0], sigma[1], x)?;
    let k = base.u().len();
    TangentVector::project(&base, d.rows(0, k).into_owned(), d.rows(k, 2).into_owned())
}

/// Orbit Gram computed without any closed form: orbit-map tangents by finite
/// differences, projected off the circle generator, paired with the round
/// metric (which agrees with `h0` there).
pub fn fd_orbit_gram(params: &SpaceParams, x: &SpherePoint, eps: f64) -> Result<OrbitGram> {
    check_regular(x)?;
    let one = Complex64::new(1.0, 0.0);
    let mut lifts = Vec::with_capacity(2);
    for a in [[1.0, 0.0], [0.0, 1.0]] {
        let t = orbit_map_derivative(x, [one, one], a, eps)?;
        lifts.push(horizontal_project(params, ActionGroup::S1, &t));
    }
    let mut g = [[0.0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            g[r][c] = metric_eval(params, &MetricSpec::H0, &lifts[r], &lifts[c])?;
        }
    }
    Ok(OrbitGram::new(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jmap::JMap;
    use crate::sphere::{random_regular_point, random_tangent};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(p: u32, q: u32) -> SpaceParams {
        SpaceParams::new(4, p, q).unwrap()
    }

    fn point(u2: f64, v1: f64, v2: f64) -> SpherePoint {
        let u = CVector::from_vec(vec![
            Complex64::new(u2.sqrt(), 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        let v = CVector::from_vec(vec![
            Complex64::new(v1.sqrt(), 0.0),
            Complex64::new(0.0, v2.sqrt()),
        ]);
        SpherePoint::new(u, v).unwrap()
    }

    #[test]
    fn gram_exact_instance() {
        let g = orbit_gram(&params(1, 1), &point(0.5, 0.25, 0.25)).unwrap();
        let expected = [[3.0 / 16.0, -1.0 / 16.0], [-1.0 / 16.0, 3.0 / 16.0]];
        assert!(g.max_abs_diff(&OrbitGram::new(expected)) < 1e-15);
        assert!((g.det() - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn gram_matches_orbit_map_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (p, q) in [(1, 1), (2, 3), (3, 5)] {
            let pr = params(p, q);
            for _ in 0..100 {
                let x = random_regular_point(&mut rng, 4);
                let g = orbit_gram(&pr, &x).unwrap();
                let fd = fd_orbit_gram(&pr, &x, 1e-3).unwrap();
                assert!(g.max_abs_diff(&fd) < 1e-9, "{}", g.max_abs_diff(&fd));
                assert_eq!(g.g[0][1], g.g[1][0]);
                assert!(g.is_positive_definite());
            }
        }
    }

    #[test]
    fn gram_matches_quotient_metrics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pr = params(2, 3);
        for _ in 0..50 {
            let j = JMap::random(&mut rng, 3).unwrap();
            let x = random_regular_point(&mut rng, 4);
            let g = orbit_gram(&pr, &x).unwrap();
            for spec in [MetricSpec::Round, MetricSpec::H0, MetricSpec::HKappa(j.clone())] {
                let q = quotient_orbit_gram(&pr, &spec, &x).unwrap();
                assert!(g.max_abs_diff(&q) < 1e-12);
            }
        }
    }

    #[test]
    fn gram_degenerates_at_boundary() {
        let pr = params(1, 1);
        let mut prev = f64::INFINITY;
        for k in 1..10 {
            let v1 = 0.25 * 10f64.powi(-k);
            let g = orbit_gram(&pr, &point(0.5, v1, 0.5 - v1)).unwrap();
            assert!(g.g[0][0] < prev);
            assert!(g.g[0][0] < v1);
            prev = g.g[0][0];
        }
        let singular = point(0.5, 0.0, 0.5);
        assert!(matches!(orbit_gram(&pr, &singular), Err(Error::SingularPoint(_))));
    }

    #[test]
    fn general_product_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pr = params(2, 3);
        let one = Complex64::new(1.0, 0.0);
        for _ in 0..50 {
            let x = random_regular_point(&mut rng, 4);
            let g = orbit_gram(&pr, &x).unwrap();
            for (j, ej) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
                for (k, ek) in [[1.0, 0.0], [0.0, 1.0]].into_iter().enumerate() {
                    let v = general_orbit_product(&pr, &x, ej, ek, [one, one]).unwrap();
                    assert!((v - g.g[j][k]).abs() < 1e-15);
                }
            }
            let a = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let b = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let base = general_orbit_product(&pr, &x, a, b, [one, one]).unwrap();
            let sigma = [
                Complex64::from_polar(1.0, rng.random_range(0.0..6.0)),
                Complex64::from_polar(1.0, rng.random_range(0.0..6.0)),
            ];
            let moved = general_orbit_product(&pr, &x, a, b, sigma).unwrap();
            assert!((base - moved).abs() < 1e-14);
            // pull-back through the orbit map at sigma
            let ta = orbit_map_derivative(&x, sigma, a, 1e-3).unwrap();
            let tb = orbit_map_derivative(&x, sigma, b, 1e-3).unwrap();
            let ha = horizontal_project(&pr, ActionGroup::S1, &ta);
            let hb = horizontal_project(&pr, ActionGroup::S1, &tb);
            let fd = metric_eval(&pr, &MetricSpec::Round, &ha, &hb).unwrap();
            assert!((fd - moved).abs() < 1e-6);
        }
    }

    #[test]
    fn area_exact_instance() {
        let pr = params(1, 1);
        let expected = PI * PI / 2f64.sqrt();
        let gram_route = orbit_area(&pr, &point(0.5, 0.25, 0.25)).unwrap();
        let stratum_route = stratum_area(&pr, &OrbitStratum::new(0.5, 0.5).unwrap());
        assert!((gram_route - expected).abs() < 1e-12);
        assert!((stratum_route - expected).abs() < 1e-12);
    }

    #[test]
    fn area_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (p, q) in [(1, 1), (2, 3), (3, 5), (5, 2)] {
            let pr = params(p, q);
            for _ in 0..100 {
                let x = random_regular_point(&mut rng, 5);
                let s = OrbitStratum::of_point(&x).unwrap();
                let a = orbit_area(&pr, &x).unwrap();
                assert!((a - stratum_area(&pr, &s)).abs() < 1e-10);
                let moved = t2_act(
                    Complex64::from_polar(1.0, 0.4),
                    Complex64::from_polar(1.0, -2.2),
                    &x,
                )
                .unwrap();
                assert!((a - orbit_area(&pr, &moved).unwrap()).abs() < 1e-13);
                let via_stratum = area_from_gram(&pr, &stratum_gram(&pr, &s));
                assert!((a - via_stratum).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn area_same_under_hkappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pr = params(2, 3);
        for _ in 0..20 {
            let j = JMap::random(&mut rng, 3).unwrap();
            let x = random_regular_point(&mut rng, 4);
            let h0 = quotient_orbit_gram(&pr, &MetricSpec::H0, &x).unwrap();
            let hk = quotient_orbit_gram(&pr, &MetricSpec::HKappa(j), &x).unwrap();
            assert!((area_from_gram(&pr, &h0) - area_from_gram(&pr, &hk)).abs() < 1e-12);
        }
    }

    #[test]
    fn angle_examples() {
        let pr = params(1, 1);
        let angle = orbit_angle(&pr, 0.5).unwrap();
        assert!((angle - (-1.0f64 / 3.0).acos()).abs() < 1e-15);
        assert!((angle - 1.910633).abs() < 1e-6);
        let g = orbit_gram(&pr, &point(0.5, 0.25, 0.25)).unwrap();
        assert!((angle_from_gram(&g) - angle).abs() < 1e-12);
        assert!((orbit_angle(&pr, 1e-8).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!(matches!(orbit_angle(&pr, 0.0), Err(Error::DomainError(_))));
        assert!(matches!(orbit_angle(&pr, 0.71), Err(Error::DomainError(_))));
    }

    #[test]
    fn angle_matches_gram_on_diagonal_strata() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (p, q) in [(1, 1), (2, 3)] {
            let pr = params(p, q);
            for f in [0.1, 0.3, 0.6] {
                let a = f * std::f64::consts::FRAC_1_SQRT_2;
                let s = OrbitStratum::new(a, a).unwrap();
                for _ in 0..20 {
                    let x = s.sample_point(&mut rng, 4);
                    let g = orbit_gram(&pr, &x).unwrap();
                    let diff = angle_from_gram(&g) - orbit_angle(&pr, a).unwrap();
                    assert!(diff.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn stratum_validation() {
        assert!(OrbitStratum::new(0.8, 0.8).is_err());
        assert!(OrbitStratum::new(0.0, 0.5).is_err());
        assert!(OrbitStratum::new(f64::NAN, 0.5).is_err());
        let s = OrbitStratum::new(0.3, 0.4).unwrap();
        assert!((s.c() - 0.75f64.sqrt()).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = s.sample_point(&mut rng, 6);
        assert!((x.v()[0].norm() - 0.3).abs() < 1e-14);
        assert!((x.u().norm() - s.c()).abs() < 1e-14);
    }

    #[test]
    fn lattice_examples() {
        let lat = dual_lattice(&params(1, 1));
        let two_pi = 2.0 * PI;
        assert_eq!(lat.dual_basis, [[1.0 / two_pi, -1.0 / two_pi], [0.0, 1.0 / two_pi]]);
        for p in [1, 2, 3, 5] {
            let lat = dual_lattice(&SpaceParams::new(4, p, 1).unwrap());
            let pairing = lat.pairing();
            for i in 0..2 {
                for j in 0..2 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((pairing[i][j] - target).abs() < 1e-12);
                }
            }
            assert!((lat.covolume() - 4.0 * PI * PI / p as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn lattice_pairing_is_exact() {
        for p in 1..=50u32 {
            let lat = WeightLattice {
                p,
                ..dual_lattice(&SpaceParams::new(4, 1, 1).unwrap())
            };
            let pi = p as i64;
            assert_eq!(lat.scaled_integer_pairing(), [[pi, 0], [0, pi]]);
        }
    }

    #[test]
    fn covector_coordinates() {
        let lat = dual_lattice(&params(3, 1));
        let z = lat.covector([2, -1]);
        assert!((z.z1 - 2.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((z.z2 - (-2.0 - 3.0) / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn unit_spectrum() {
        let lat = dual_lattice(&params(1, 1));
        let spec = flat_torus_spectrum(&OrbitGram::identity(), &lat, 10.0).unwrap();
        let expected: Vec<f64> = [
            (0.0, 1),
            (1.0, 4),
            (2.0, 4),
            (4.0, 4),
            (5.0, 8),
            (8.0, 4),
            (9.0, 4),
            (10.0, 8),
        ]
        .iter()
        .flat_map(|&(v, m)| std::iter::repeat_n(v, m))
        .collect();
        assert_eq!(spec.len(), expected.len());
        for (a, b) in spec.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn spectrum_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pr = params(2, 3);
        let lat = dual_lattice(&pr);
        for _ in 0..10 {
            let x = random_regular_point(&mut rng, 4);
            let g = orbit_gram(&pr, &x).unwrap();
            let spec = flat_torus_spectrum(&g, &lat, 400.0).unwrap();
            assert_eq!(spec[0], 0.0);
            assert!(spec.len() > 1 && spec[1] > 0.0);
            let scaled = flat_torus_spectrum(&g.scale(4.0), &lat, 100.0).unwrap();
            assert_eq!(spec.len(), scaled.len());
            for (a, b) in spec.iter().zip(&scaled) {
                assert!((a / 4.0 - b).abs() <= 1e-12 * a.max(1.0));
            }
        }
        assert_eq!(
            flat_torus_spectrum(&OrbitGram::new([[1.0, 2.0], [2.0, 1.0]]), &lat, 1.0),
            Err(Error::NotPositiveDefinite)
        );
    }

    #[test]
    fn spectrum_same_under_hkappa() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pr = params(2, 3);
        let lat = dual_lattice(&pr);
        for _ in 0..10 {
            let j = JMap::random(&mut rng, 3).unwrap();
            let x = random_regular_point(&mut rng, 4);
            let h0 = quotient_orbit_gram(&pr, &MetricSpec::H0, &x).unwrap();
            let hk = quotient_orbit_gram(&pr, &MetricSpec::HKappa(j), &x).unwrap();
            let a = flat_torus_spectrum(&h0, &lat, 300.0).unwrap();
            let b = flat_torus_spectrum(&hk, &lat, 300.0).unwrap();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn connection_form_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let pr = params(2, 3);
        for _ in 0..50 {
            let x = random_regular_point(&mut rng, 4);
            let z = TorusVector::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let f = fundamental_vector(&z, &x);
            let h = horizontal_project(&pr, ActionGroup::S1, &f);
            let w = connection_form_eval(&pr, &x, &h).unwrap();
            assert!(w.add(&z.scale(-1.0)).max_abs() < 1e-10);
            let direct = connection_form_eval(&pr, &x, &f).unwrap();
            assert!(direct.add(&z.scale(-1.0)).max_abs() < 1e-12);
            // kernel: orthogonal to both fundamental fields and the circle generator
            // (iu, 0), (0, i v1, 0), (0, 0, i v2) are mutually orthogonal and span all three
            let t = random_tangent(&mut rng, &x);
            let iu = x.u() * I;
            let mut du = t.du().clone();
            du -= &iu * Complex64::new(re_inner(&du, &iu) / iu.norm_squared(), 0.0);
            let mut dv = t.dv().clone();
            for c in 0..2 {
                let ivc = I * x.v()[c];
                let coef = (dv[c] * ivc.conj()).re / ivc.norm_sqr();
                dv[c] -= ivc * coef;
            }
            let k = TangentVector::new(x.clone(), du, dv).unwrap();
            assert!(connection_form_eval(&pr, &x, &k).unwrap().max_abs() < 1e-10);
            // linearity
            let a = random_tangent(&mut rng, &x);
            let b = random_tangent(&mut rng, &x);
            let comb = a.combine(0.7, &b, -1.3).unwrap();
            let lhs = connection_form_eval(&pr, &x, &comb).unwrap();
            let rhs = connection_form_eval(&pr, &x, &a)
                .unwrap()
                .scale(0.7)
                .add(&connection_form_eval(&pr, &x, &b).unwrap().scale(-1.3));
            assert!(lhs.add(&rhs.scale(-1.0)).max_abs() < 1e-12);
        }
    }
}
