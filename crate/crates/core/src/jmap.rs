//! Linear maps `j: t -> su(m)` and the invariants used to compare them.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::su_algebra::{
    commutant_dimension, hermitian_eigen, max_abs, nearest_special_unitary, random_su,
    ComplexMatrix, SuElement,
};
use crate::torus::{DihedralSymmetry, TorusVector};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Imaginary residual above which [`trace_invariant`] rejects its input.
pub const TRACE_IMAG_TOL: f64 = 1e-10;
/// Invariants closer than this (scaled by magnitude) are not a certificate.
pub const CERTIFICATE_TOL: f64 = 1e-7;
/// Tolerance used when ordering candidate invariant vectors.
pub const CANONICAL_TOL: f64 = 1e-9;
/// Longest trace word in [`equivalence_invariants`].
pub const MAX_WORD_LEN: usize = 4;

/// A linear map `t -> su(m)` given by the images of `Z1` and `Z2`.
#[derive(Debug, Clone, PartialEq)]
pub struct JMap {
    j1: SuElement,
    j2: SuElement,
}

impl JMap {
    pub fn new(j1: SuElement, j2: SuElement) -> Result<Self> {
        if j1.dim() != j2.dim() {
            return Err(Error::DimensionMismatch {
                expected: j1.dim(),
                found: j2.dim(),
            });
        }
        if j1.dim() < 3 {
            return Err(Error::InvalidParameter(format!(
                "m must be >= 3, got {}",
                j1.dim()
            )));
        }
        Ok(JMap { j1, j2 })
    }

    pub fn zero(m: usize) -> Result<Self> {
        JMap::new(SuElement::zero(m), SuElement::zero(m))
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Result<Self> {
        let j1 = random_su(rng, m);
        let j2 = random_su(rng, m);
        JMap::new(j1, j2)
    }

    pub fn m(&self) -> usize {
        self.j1.dim()
    }

    pub fn j1(&self) -> &SuElement {
        &self.j1
    }

    pub fn j2(&self) -> &SuElement {
        &self.j2
    }

    pub fn component(&self, k: usize) -> &SuElement {
        match k {
            0 => &self.j1,
            1 => &self.j2,
            _ => panic!("torus index {k} out of range"),
        }
    }

    /// Simultaneous conjugation `(A j1 A^H, A j2 A^H)`.
    pub fn conjugate_by(&self, a: &ComplexMatrix) -> Result<JMap> {
        JMap::new(self.j1.conjugate_by(a)?, self.j2.conjugate_by(a)?)
    }

    pub fn scale(&self, s: f64) -> JMap {
        JMap {
            j1: self.j1.scale(s),
            j2: self.j2.scale(s),
        }
    }

    /// `j o psi`, i.e. `(j_{psi(Z1)}, j_{psi(Z2)})`.
    pub fn compose_symmetry(&self, psi: &DihedralSymmetry) -> JMap {
        let pick = |k: usize| {
            let (s, l) = psi.image(k);
            self.component(l as usize).scale(s as f64)
        };
        JMap {
            j1: pick(0),
            j2: pick(1),
        }
    }

    pub fn complex_conjugate(&self) -> JMap {
        JMap {
            j1: self.j1.complex_conjugate(),
            j2: self.j2.complex_conjugate(),
        }
    }
}

/// `j_Z = z1 j1 + z2 j2`.
pub fn evaluate(j: &JMap, z: &TorusVector) -> SuElement {
    j.j1.combine(z.z1, &j.j2, z.z2)
}

/// The `m + 1` pairwise non-proportional directions `(cos t_i, sin t_i)` with
/// `t_i = i pi / (m + 2)`.
pub fn sample_directions(m: usize) -> Vec<TorusVector> {
    (0..=m)
        .map(|i| {
            let t = i as f64 * PI / (m as f64 + 2.0);
            TorusVector::new(t.cos(), t.sin())
        })
        .collect()
}

/// Largest deviation between the sorted spectra of `-i j_Z` and `-i j'_Z`
/// over the sample directions.
pub fn spectral_deviation(j: &JMap, other: &JMap) -> Result<f64> {
    if j.m() != other.m() {
        return Err(Error::DimensionMismatch {
            expected: j.m(),
            found: other.m(),
        });
    }
    let mut worst = 0.0_f64;
    for z in sample_directions(j.m()) {
        let a = evaluate(j, &z).spectrum();
        let b = evaluate(other, &z).spectrum();
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

/// Whether `j_Z` and `j'_Z` have equal spectra for every `Z`.
///
/// The characteristic-polynomial coefficients of `j_Z` are homogeneous of
/// degree at most `m` in `Z`, so agreement on the `m + 1` sample lines
/// implies agreement everywhere.
pub fn is_isospectral_pair(j: &JMap, other: &JMap, tol: f64) -> Result<bool> {
    Ok(spectral_deviation(j, other)? <= tol)
}

/// No nonzero element of `su(m)` commutes with both `j1` and `j2`.
pub fn is_generic(j: &JMap, rank_tol: f64) -> bool {
    commutant_dimension(&[j.j1.clone(), j.j2.clone()], rank_tol)
        .map(|d| d == 0)
        .unwrap_or(false)
}

/// `tr((j1^2 + j2^2)^2)`.
pub fn trace_invariant(j: &JMap) -> Result<f64> {
    let a = j.j1.as_matrix();
    let b = j.j2.as_matrix();
    let s = a * a + b * b;
    let t = (&s * &s).trace();
    if t.im.abs() > TRACE_IMAG_TOL * t.re.abs().max(1.0) {
        return Err(Error::NonRealResult { residual: t.im.abs() });
    }
    Ok(t.re)
}

/// A word in the letters `0 -> j1`, `1 -> j2`.
pub type Word = Vec<u8>;

/// All words of length `1..=max_len`, ordered by length then lexicographically.
pub fn canonical_words(max_len: usize) -> Vec<Word> {
    let mut words = Vec::new();
    for len in 1..=max_len {
        for code in 0..(1usize << len) {
            words.push((0..len).map(|p| ((code >> (len - 1 - p)) & 1) as u8).collect());
        }
    }
    words
}

pub fn word_name(w: &[u8]) -> String {
    let letters: Vec<&str> = w.iter().map(|&l| if l == 0 { "j1" } else { "j2" }).collect();
    format!("tr({})", letters.join(" "))
}

fn word_index(w: &[u8]) -> usize {
    // length-1 words start at 0, length-2 at 2, length-3 at 6, ...
    let offset = (1usize << w.len()) - 2;
    let code = w.iter().fold(0usize, |acc, &l| (acc << 1) | l as usize);
    offset + code
}

fn word_traces(j: &JMap, words: &[Word]) -> Vec<Complex64> {
    let letters = [j.j1.as_matrix(), j.j2.as_matrix()];
    words
        .iter()
        .map(|w| {
            let mut prod = letters[w[0] as usize].clone();
            for &l in &w[1..] {
                prod = &prod * letters[l as usize];
            }
            prod.trace()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantEntry {
    pub name: String,
    pub re: f64,
    pub im: f64,
}

impl InvariantEntry {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Trace invariants of `j`, canonicalized under the signed-swap group and
/// complex conjugation. The first entry is `tr((j1^2 + j2^2)^2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceInvariants {
    pub entries: Vec<InvariantEntry>,
}

fn scaled_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn lex_cmp(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if !scaled_close(p, q, CANONICAL_TOL) {
                return p.total_cmp(&q);
            }
        }
    }
    Ordering::Equal
}

pub fn equivalence_invariants(j: &JMap) -> EquivalenceInvariants {
    let words = canonical_words(MAX_WORD_LEN);
    let base = word_traces(j, &words);
    let mut best: Option<Vec<Complex64>> = None;
    for psi in DihedralSymmetry::all() {
        let substituted: Vec<Complex64> = words
            .iter()
            .map(|w| {
                let mut sign = 1.0;
                let image: Word = w
                    .iter()
                    .map(|&l| {
                        let (s, target) = psi.image(l as usize);
                        sign *= s as f64;
                        target
                    })
                    .collect();
                base[word_index(&image)] * sign
            })
            .collect();
        let conjugated: Vec<Complex64> = substituted.iter().map(|z| z.conj()).collect();
        for candidate in [substituted, conjugated] {
            let better = match &best {
                None => true,
                Some(current) => lex_cmp(&candidate, current) == Ordering::Less,
            };
            if better {
                best = Some(candidate);
            }
        }
    }
    let tr_inv = {
        let a = j.j1.as_matrix();
        let b = j.j2.as_matrix();
        let s = a * a + b * b;
        (&s * &s).trace()
    };
    let mut entries = vec![InvariantEntry {
        name: "tr((j1^2 + j2^2)^2)".into(),
        re: tr_inv.re,
        im: tr_inv.im,
    }];
    for (w, v) in words.iter().zip(best.expect("group is nonempty")) {
        entries.push(InvariantEntry {
            name: word_name(w),
            re: v.re,
            im: v.im,
        });
    }
    EquivalenceInvariants { entries }
}

/// One-sided answer to "are `j` and `j'` equivalent?".
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome")]
pub enum Certificate {
    /// The named invariant differs, so the maps are not equivalent.
    Inequivalent {
        invariant: String,
        left: [f64; 2],
        right: [f64; 2],
    },
    /// All invariants agree; nothing is claimed.
    Inconclusive,
}

impl Certificate {
    pub fn is_inequivalent(&self) -> bool {
        matches!(self, Certificate::Inequivalent { .. })
    }
}

pub fn non_equivalence_certificate(j: &JMap, other: &JMap) -> Result<Certificate> {
    if j.m() != other.m() {
        return Err(Error::DimensionMismatch {
            expected: j.m(),
            found: other.m(),
        });
    }
    let a = equivalence_invariants(j);
    let b = equivalence_invariants(other);
    for (x, y) in a.entries.iter().zip(&b.entries) {
        if !scaled_close(x.re, y.re, CERTIFICATE_TOL) || !scaled_close(x.im, y.im, CERTIFICATE_TOL)
        {
            return Ok(Certificate::Inequivalent {
                invariant: x.name.clone(),
                left: [x.re, x.im],
                right: [y.re, y.im],
            });
        }
    }
    Ok(Certificate::Inconclusive)
}

/// Groups indices of an ascending list into runs whose consecutive gaps are
/// at most `tol`.
fn clusters(values: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

/// Smallest singular value below which a cross-Gram block is treated as
/// singular.
const ALIGNMENT_SINGULAR_TOL: f64 = 1e-8;

/// Some `A in SU(m)` with `j'_Z = A j_Z A^{-1}`.
///
/// Both `-i j_Z` and `-i j'_Z` are diagonalized; within each cluster of
/// eigenvalues closer than `tol` the eigenspaces are matched by the polar
/// factor of the cross-Gram block. The determinant is fixed by a phase on one
/// eigenvector, which commutes with `j_Z`.
pub fn find_intertwiner(
    j: &JMap,
    other: &JMap,
    z: &TorusVector,
    tol: f64,
) -> Result<ComplexMatrix> {
    if j.m() != other.m() {
        return Err(Error::DimensionMismatch {
            expected: j.m(),
            found: other.m(),
        });
    }
    let m = j.m();
    let h = evaluate(j, z).into_matrix().map(|x| -I * x);
    let h2 = evaluate(other, z).into_matrix().map(|x| -I * x);
    let (vals, vecs) = hermitian_eigen(&h);
    let (vals2, vecs2) = hermitian_eigen(&h2);
    let deviation = vals
        .iter()
        .zip(&vals2)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    if deviation > tol {
        return Err(Error::SpectraDiffer { deviation, tol });
    }

    let mut a = ComplexMatrix::zeros(m, m);
    for range in clusters(&vals, tol) {
        let k = range.len();
        let vc = vecs.columns(range.start, k).into_owned();
        let vc2 = vecs2.columns(range.start, k).into_owned();
        let cross = vc2.adjoint() * &vc;
        let w = if k == 1 {
            let g = cross[(0, 0)];
            let phase = if g.norm() > 1e-12 {
                g / g.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            DMatrix::from_element(1, 1, phase)
        } else {
            let svd = cross.clone().svd(true, true);
            if svd.singular_values.min() < ALIGNMENT_SINGULAR_TOL {
                return Err(Error::DegenerateAlignmentFailed { cluster: k });
            }
            svd.u.expect("requested") * svd.v_t.expect("requested")
        };
        a += &vc2 * w * vc.adjoint();
    }

    let det = a.determinant();
    let fix = (det / det.norm()).conj();
    let v0 = vecs.column(0).into_owned();
    let correction =
        ComplexMatrix::identity(m, m) + (&v0 * v0.adjoint()).map(|x| x * (fix - 1.0));
    let a = a * correction;
    // a is unitary up to rounding; re-polarize only if drift is visible
    let id = ComplexMatrix::identity(m, m);
    if max_abs(&(a.adjoint() * &a - &id)) > 1e-13 {
        return nearest_special_unitary(&a);
    }
    Ok(a)
}

/// `max |j'_Z - A j_Z A^H|`.
pub fn intertwining_residual(j: &JMap, other: &JMap, z: &TorusVector, a: &ComplexMatrix) -> f64 {
    let lhs = evaluate(other, z).into_matrix();
    let rhs = a * evaluate(j, z).as_matrix() * a.adjoint();
    max_abs(&(lhs - rhs))
}
