//! The Lie algebra `t = R^2` of the two-torus, in the basis `Z1 = (i, 0)`,
//! `Z2 = (0, i)`, and its signed-swap symmetry group.

use serde::{Deserialize, Serialize};

/// `z1 * Z1 + z2 * Z2`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TorusVector {
    pub z1: f64,
    pub z2: f64,
}

impl TorusVector {
    pub const Z1: TorusVector = TorusVector { z1: 1.0, z2: 0.0 };
    pub const Z2: TorusVector = TorusVector { z1: 0.0, z2: 1.0 };

    pub fn new(z1: f64, z2: f64) -> Self {
        TorusVector { z1, z2 }
    }

    pub fn component(&self, k: usize) -> f64 {
        match k {
            0 => self.z1,
            1 => self.z2,
            _ => panic!("torus index {k} out of range"),
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.z1, self.z2]
    }

    pub fn scale(&self, s: f64) -> TorusVector {
        TorusVector::new(self.z1 * s, self.z2 * s)
    }

    pub fn add(&self, other: &TorusVector) -> TorusVector {
        TorusVector::new(self.z1 + other.z1, self.z2 + other.z2)
    }

    pub fn max_abs(&self) -> f64 {
        self.z1.abs().max(self.z2.abs())
    }
}

/// An automorphism of `t` mapping each basis vector to `+-Z1` or `+-Z2`.
///
/// `images[k] = (sign, index)` encodes `phi(Z_{k+1}) = sign * Z_{index+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DihedralSymmetry {
    images: [(i8, u8); 2],
}

impl DihedralSymmetry {
    pub const IDENTITY: DihedralSymmetry = DihedralSymmetry {
        images: [(1, 0), (1, 1)],
    };

    pub fn new(image_of_z1: (i8, u8), image_of_z2: (i8, u8)) -> Option<Self> {
        let ok_sign = |s: i8| s == 1 || s == -1;
        if !ok_sign(image_of_z1.0) || !ok_sign(image_of_z2.0) {
            return None;
        }
        if image_of_z1.1 > 1 || image_of_z2.1 > 1 || image_of_z1.1 == image_of_z2.1 {
            return None;
        }
        Some(DihedralSymmetry {
            images: [image_of_z1, image_of_z2],
        })
    }

    /// All eight elements, in a fixed order starting with the identity.
    pub fn all() -> Vec<DihedralSymmetry> {
        let mut out = Vec::with_capacity(8);
        for (l1, l2) in [(0u8, 1u8), (1, 0)] {
            for s1 in [1i8, -1] {
                for s2 in [1i8, -1] {
                    out.push(DihedralSymmetry {
                        images: [(s1, l1), (s2, l2)],
                    });
                }
            }
        }
        out
    }

    /// `(sign, index)` of the image of basis vector `k` (0-based).
    pub fn image(&self, k: usize) -> (i8, u8) {
        self.images[k]
    }

    pub fn apply(&self, z: &TorusVector) -> TorusVector {
        let mut out = [0.0; 2];
        for (k, coeff) in z.as_array().into_iter().enumerate() {
            let (s, l) = self.images[k];
            out[l as usize] += s as f64 * coeff;
        }
        TorusVector::new(out[0], out[1])
    }

    /// `self o other`.
    pub fn compose(&self, other: &DihedralSymmetry) -> DihedralSymmetry {
        let mut images = [(1, 0); 2];
        for (k, slot) in images.iter_mut().enumerate() {
            let (s1, l1) = other.images[k];
            let (s2, l2) = self.images[l1 as usize];
            *slot = (s1 * s2, l2);
        }
        DihedralSymmetry { images }
    }

    pub fn inverse(&self) -> DihedralSymmetry {
        let mut images = [(1, 0); 2];
        for k in 0..2 {
            let (s, l) = self.images[k];
            images[l as usize] = (s, k as u8);
        }
        DihedralSymmetry { images }
    }
}
