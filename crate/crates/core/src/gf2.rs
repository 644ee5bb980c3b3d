//! Dense bit matrices over GF(2) acting on integers as column vectors.
//!
//! A vector is an integer whose bit `k` is the coefficient of `2^k`.
//! Matrices are stored by column image: `image(k)` is `M·2^k`. In the usual
//! written layout (most significant bit on top) the column at position `p`
//! counted from the left is `image(cols - 1 - p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitMatrix {
    rows: usize,
    images: Vec<u32>,
}

/// Incremental xor basis used for independence tests.
#[derive(Clone, Debug, Default)]
pub(crate) struct XorBasis {
    // pivots[b] holds a vector whose highest set bit is b, or 0.
    pivots: [u32; 32],
    rank: usize,
}

impl XorBasis {
    pub(crate) fn reduce(&self, mut v: u32) -> u32 {
        while v != 0 {
            let top = 31 - v.leading_zeros() as usize;
            if self.pivots[top] == 0 {
                break;
            }
            v ^= self.pivots[top];
        }
        v
    }

    /// Adds `v` to the basis; returns false if it was already in the span.
    pub(crate) fn insert(&mut self, v: u32) -> bool {
        let r = self.reduce(v);
        if r == 0 {
            return false;
        }
        self.pivots[31 - r.leading_zeros() as usize] = r;
        self.rank += 1;
        true
    }

    pub(crate) fn contains(&self, v: u32) -> bool {
        self.reduce(v) == 0
    }

    pub(crate) fn rank(&self) -> usize {
        self.rank
    }
}

impl BitMatrix {
    pub fn identity(n: usize) -> Self {
        BitMatrix {
            rows: n,
            images: (0..n).map(|k| 1u32 << k).collect(),
        }
    }

    /// Builds a matrix from the images of the unit vectors `2^0, 2^1, ...`.
    pub fn from_images(rows: usize, images: &[u32]) -> Self {
        assert!(rows <= 32 && images.len() <= 32);
        assert!(images.iter().all(|&c| rows == 32 || c >> rows == 0), "image wider than row count");
        BitMatrix { rows, images: images.to_vec() }
    }

    /// Alias of [`BitMatrix::from_images`] for square matrices.
    pub fn from_columns(n: usize, images: &[u32]) -> Self {
        assert_eq!(images.len(), n);
        Self::from_images(n, images)
    }

    /// Builds a matrix from row masks; `rows[b]` selects the input bits that
    /// are summed into output bit `b`.
    pub fn from_rows(cols: usize, rows: &[u32]) -> Self {
        let mut images = vec![0u32; cols];
        for (b, &row) in rows.iter().enumerate() {
            for (k, img) in images.iter_mut().enumerate() {
                if row >> k & 1 == 1 {
                    *img |= 1 << b;
                }
            }
        }
        BitMatrix { rows: rows.len(), images }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.images.len()
    }

    pub fn image(&self, k: usize) -> u32 {
        self.images[k]
    }

    pub fn images(&self) -> &[u32] {
        &self.images
    }

    /// Entry in output bit `b`, input bit `k`.
    pub fn get(&self, b: usize, k: usize) -> bool {
        self.images[k] >> b & 1 == 1
    }

    /// Row mask for output bit `b`.
    pub fn row(&self, b: usize) -> u32 {
        self.images
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &img)| acc | ((img >> b & 1) << k))
    }

    /// Row masks from the top (most significant output bit) down.
    pub fn rows_msb_first(&self) -> Vec<u32> {
        (0..self.rows).rev().map(|b| self.row(b)).collect()
    }

    #[inline]
    pub fn apply(&self, x: u32) -> u32 {
        let mut acc = 0;
        let mut x = x;
        let mut k = 0;
        while x != 0 {
            if x & 1 == 1 {
                acc ^= self.images[k];
            }
            x >>= 1;
            k += 1;
        }
        acc
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn mul(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols(), other.rows, "incompatible matrix product");
        BitMatrix {
            rows: self.rows,
            images: other.images.iter().map(|&c| self.apply(c)).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        let mut basis = XorBasis::default();
        for &c in &self.images {
            basis.insert(c);
        }
        basis.rank()
    }

    pub fn is_invertible(&self) -> bool {
        self.rows == self.cols() && self.rank() == self.rows
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols() && self.images.iter().enumerate().all(|(k, &c)| c == 1 << k)
    }

    /// Inverse by Gauss-Jordan elimination on the row masks.
    pub fn inverse(&self) -> Result<BitMatrix> {
        let n = self.rows;
        if n != self.cols() {
            return Err(Error::NotInvertible);
        }
        let mut a: Vec<u32> = (0..n).map(|b| self.row(b)).collect();
        let mut inv: Vec<u32> = (0..n).map(|b| 1u32 << b).collect();
        for col in 0..n {
            let pivot = (col..n).find(|&r| a[r] >> col & 1 == 1).ok_or(Error::NotInvertible)?;
            a.swap(col, pivot);
            inv.swap(col, pivot);
            for r in 0..n {
                if r != col && a[r] >> col & 1 == 1 {
                    a[r] ^= a[col];
                    inv[r] ^= inv[col];
                }
            }
        }
        Ok(BitMatrix::from_rows(n, &inv))
    }
}

/// Completes a partial column specification to an invertible `n×n` matrix.
///
/// `columns` lists `(position, vector)` pairs, positions counted from the
/// left of the written matrix, so position `n-1` is the image of `1`. Free
/// positions are filled from the rightmost leftwards, each with the smallest
/// vector that keeps the columns independent; an identity-compatible request
/// therefore completes to the identity.
pub fn complete_basis(n: usize, columns: &[(usize, u32)]) -> Result<BitMatrix> {
    if n == 0 || n > 32 {
        return Err(Error::Dimension(format!("unsupported size {n}")));
    }
    let mut slots: Vec<Option<u32>> = vec![None; n];
    let mut basis = XorBasis::default();
    for &(pos, v) in columns {
        if pos >= n {
            return Err(Error::Dimension(format!("column {pos} out of range for n={n}")));
        }
        if n < 32 && v >> n != 0 {
            return Err(Error::Dimension(format!("vector {v:#x} wider than {n} bits")));
        }
        if slots[pos].is_some() {
            return Err(Error::Dimension(format!("column {pos} given twice")));
        }
        if v == 0 || !basis.insert(v) {
            return Err(Error::DependentVectors);
        }
        slots[pos] = Some(v);
    }
    let mut candidate = 1u32;
    for pos in (0..n).rev() {
        if slots[pos].is_some() {
            continue;
        }
        while basis.contains(candidate) {
            candidate += 1;
        }
        basis.insert(candidate);
        slots[pos] = Some(candidate);
    }
    let images: Vec<u32> = (0..n).map(|k| slots[n - 1 - k].unwrap()).collect();
    Ok(BitMatrix::from_images(n, &images))
}

/// Same as [`complete_basis`] but keyed by the unit vector being mapped:
/// each pair `(k, v)` requests `M·2^k = v`.
pub fn complete_images(n: usize, images: &[(usize, u32)]) -> Result<BitMatrix> {
    let cols: Vec<(usize, u32)> = images
        .iter()
        .map(|&(k, v)| if k < n { Ok((n - 1 - k, v)) } else { Err(Error::Dimension(format!("bit {k} out of range"))) })
        .collect::<Result<_>>()?;
    complete_basis(n, &cols)
}

/// Uniformly random invertible matrix by rejection sampling.
pub fn random_invertible<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> BitMatrix {
    loop {
        let images: Vec<u32> = (0..n).map(|_| rng.gen::<u32>() & ((1u64 << n) - 1) as u32).collect();
        let m = BitMatrix::from_images(n, &images);
        if m.is_invertible() {
            return m;
        }
    }
}

/// Popcount parity.
#[inline]
pub fn parity(x: u32) -> u32 {
    x.count_ones() & 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    // Elimination-based determinant, written independently of XorBasis.
    fn det_by_elimination(m: &BitMatrix) -> bool {
        let n = m.rows();
        let mut grid: Vec<Vec<bool>> = (0..n).map(|b| (0..n).map(|k| m.get(b, k)).collect()).collect();
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| grid[r][col]) else { return false };
            grid.swap(col, p);
            for r in col + 1..n {
                if grid[r][col] {
                    for c in 0..n {
                        let v = grid[col][c];
                        grid[r][c] ^= v;
                    }
                }
            }
        }
        true
    }

    #[test]
    fn completion_of_unit_column_is_identity() {
        let m = complete_basis(3, &[(2, 1)]).unwrap();
        assert!(m.is_identity());
    }

    #[test]
    fn completion_keeps_requested_columns() {
        let m = complete_basis(3, &[(0, 6), (1, 5)]).unwrap();
        assert_eq!(m.image(2), 6);
        assert_eq!(m.image(1), 5);
        assert!(det_by_elimination(&m));
        assert!(m.is_invertible());
    }

    #[test]
    fn completion_rejects_dependent_input() {
        assert!(matches!(complete_basis(2, &[(0, 1), (1, 1)]), Err(Error::DependentVectors)));
        assert!(matches!(complete_basis(3, &[(0, 0)]), Err(Error::DependentVectors)));
        assert!(matches!(complete_basis(3, &[(0, 3), (1, 5), (2, 6)]), Err(Error::DependentVectors)));
    }

    #[test]
    fn inverse_and_product() {
        let mut r = rng::seeded(9);
        for n in 1..=8 {
            let m = random_invertible(n, &mut r);
            assert!(det_by_elimination(&m));
            let inv = m.inverse().unwrap();
            assert!(m.mul(&inv).is_identity());
            assert!(inv.mul(&m).is_identity());
        }
        let singular = BitMatrix::from_columns(3, &[3, 5, 6]);
        assert!(!det_by_elimination(&singular));
        assert!(singular.inverse().is_err());
    }

    #[test]
    fn rows_roundtrip() {
        let m = BitMatrix::from_columns(4, &[0b0011, 0b0110, 0b1100, 0b1000]);
        let rows: Vec<u32> = (0..4).map(|b| m.row(b)).collect();
        assert_eq!(BitMatrix::from_rows(4, &rows), m);
        assert_eq!(m.rows_msb_first()[0], m.row(3));
    }

    #[test]
    fn apply_matches_entries() {
        let m = BitMatrix::from_columns(3, &[6, 5, 4]);
        for x in 0..8u32 {
            let mut want = 0;
            for b in 0..3 {
                let bit = (0..3).fold(0, |acc, k| acc ^ (m.get(b, k) as u32 & (x >> k & 1)));
                want |= bit << b;
            }
            assert_eq!(m.apply(x), want);
        }
    }

    proptest::proptest! {
        #[test]
        fn completion_always_invertible(n in 2usize..=8, seed in 0u64..1000) {
            let mut r = rng::seeded(seed);
            let full = random_invertible(n, &mut r);
            let take = (seed as usize) % n;
            let cols: Vec<(usize, u32)> = (0..take).map(|p| (p, full.image(n - 1 - p))).collect();
            let m = complete_basis(n, &cols).unwrap();
            proptest::prop_assert!(det_by_elimination(&m));
            for &(p, v) in &cols {
                proptest::prop_assert_eq!(m.image(n - 1 - p), v);
            }
        }
    }
}
