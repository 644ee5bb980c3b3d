//! Affine maps `x ↦ M·x ⊕ c` and certificates of affine equivalence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::sbox::SBox;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Input,
    Output,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineMap {
    matrix: BitMatrix,
    offset: u32,
    side: Side,
}

impl AffineMap {
    pub fn new(matrix: BitMatrix, offset: u32, side: Side) -> Result<Self> {
        if !matrix.is_invertible() {
            return Err(Error::NotInvertible);
        }
        let n = matrix.rows();
        if n < 32 && offset >> n != 0 {
            return Err(Error::Dimension(format!("offset {offset:#x} wider than {n} bits")));
        }
        Ok(AffineMap { matrix, offset, side })
    }

    pub fn identity(n: usize, side: Side) -> Self {
        AffineMap { matrix: BitMatrix::identity(n), offset: 0, side }
    }

    pub fn linear(matrix: BitMatrix, side: Side) -> Result<Self> {
        Self::new(matrix, 0, side)
    }

    pub fn translation(n: usize, offset: u32, side: Side) -> Result<Self> {
        Self::new(BitMatrix::identity(n), offset, side)
    }

    pub fn matrix(&self) -> &BitMatrix {
        &self.matrix
    }

    pub fn offset(&self) -> u32 {
        self.offset
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    #[inline]
    pub fn apply(&self, x: u32) -> u32 {
        self.matrix.apply(x) ^ self.offset
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn after(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            matrix: self.matrix.mul(&inner.matrix),
            offset: self.matrix.apply(inner.offset) ^ self.offset,
            side: self.side,
        }
    }

    pub fn inverse(&self) -> AffineMap {
        let inv = self.matrix.inverse().expect("affine maps are invertible by construction");
        let offset = inv.apply(self.offset);
        AffineMap { matrix: inv, offset, side: self.side }
    }

    /// Checks that the map permutes `[0, 2^n)`.
    pub fn is_permutation(&self) -> bool {
        let n = self.dim();
        let mut seen = vec![false; 1 << n];
        (0..1u32 << n).all(|x| !std::mem::replace(&mut seen[self.apply(x) as usize], true))
    }
}

/// Witness that `result(x) = out_map(source(in_map(x)))` for every input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformCertificate {
    pub out_map: AffineMap,
    pub in_map: AffineMap,
    pub source: SBox,
    pub result: SBox,
}

impl TransformCertificate {
    pub fn identity(source: SBox) -> Self {
        TransformCertificate {
            out_map: AffineMap::identity(source.m() as usize, Side::Output),
            in_map: AffineMap::identity(source.n() as usize, Side::Input),
            result: source.clone(),
            source,
        }
    }

    /// Recomputes the result from the source and both maps.
    pub fn replay(&self) -> SBox {
        let table = (0..self.source.len())
            .map(|x| {
                let xi = self.in_map.apply(x as u32) as usize;
                self.out_map.apply(self.source.get(xi) as u32) as u8
            })
            .collect();
        SBox::new(self.source.n(), self.source.m(), table).expect("maps preserve widths")
    }

    pub fn verify(&self) -> bool {
        self.replay() == self.result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf2::random_invertible;
    use crate::rng;

    #[test]
    fn composition_and_inverse() {
        let mut r = rng::seeded(5);
        let a = AffineMap::new(random_invertible(5, &mut r), 0b10110, Side::Output).unwrap();
        let b = AffineMap::new(random_invertible(5, &mut r), 0b00111, Side::Output).unwrap();
        let ab = a.after(&b);
        for x in 0..32 {
            assert_eq!(ab.apply(x), a.apply(b.apply(x)));
            assert_eq!(a.inverse().apply(a.apply(x)), x);
        }
        assert!(ab.is_permutation());
    }

    #[test]
    fn certificate_replays() {
        let s = SBox::random_bijection(4, 1).unwrap();
        let mut r = rng::seeded(2);
        let out_map = AffineMap::new(random_invertible(4, &mut r), 3, Side::Output).unwrap();
        let in_map = AffineMap::new(random_invertible(4, &mut r), 9, Side::Input).unwrap();
        let table = (0..16).map(|x| out_map.apply(s.get(in_map.apply(x) as usize) as u32) as u8).collect();
        let cert = TransformCertificate { out_map, in_map, source: s.clone(), result: SBox::from_table(table).unwrap() };
        assert!(cert.verify());
        let mut bad = cert.clone();
        bad.result = s;
        assert!(!bad.verify());
    }
}
