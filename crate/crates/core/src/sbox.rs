//! Truth-table representation of n-bit to m-bit S-boxes.

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::rng;

pub const MAX_WIDTH: u32 = 8;

/// An S-box stored as a flat lookup table indexed by input value.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SBox {
    n: u32,
    m: u32,
    table: Vec<u8>,
}

impl SBox {
    pub fn new(n: u32, m: u32, table: Vec<u8>) -> Result<Self> {
        if !(1..=MAX_WIDTH).contains(&n) {
            return Err(Error::BadWidth(n, 1, MAX_WIDTH));
        }
        if !(1..=MAX_WIDTH).contains(&m) {
            return Err(Error::BadWidth(m, 1, MAX_WIDTH));
        }
        if table.len() != 1 << n {
            return Err(Error::BadLength(table.len(), 1 << n));
        }
        if let Some((index, &v)) = table.iter().enumerate().find(|(_, &v)| (v as u32) >> m != 0) {
            return Err(Error::ValueOutOfRange {
                index,
                value: v as u64,
                bits: m,
            });
        }
        Ok(SBox { n, m, table })
    }

    /// Square box whose width is inferred from the table length.
    pub fn from_table(table: Vec<u8>) -> Result<Self> {
        let len = table.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::BadLength(len, 2));
        }
        let n = len.trailing_zeros();
        SBox::new(n, n, table)
    }

    pub fn identity(n: u32) -> Self {
        SBox::new(n, n, (0..1usize << n).map(|x| x as u8).collect()).expect("valid width")
    }

    /// Parses whitespace-separated decimal outputs. Lines starting with `#`
    /// are comments. The output width defaults to the input width.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with_width(text, None)
    }

    pub fn parse_with_width(text: &str, m: Option<u32>) -> Result<Self> {
        let mut values = Vec::new();
        for line in text.lines() {
            let line = line.trim_start();
            if line.starts_with('#') {
                continue;
            }
            for tok in line.split_whitespace() {
                let v: u64 = tok.parse().map_err(|_| Error::BadToken(tok.to_string()))?;
                values.push(v);
            }
        }
        let len = values.len();
        if len < 8 || !len.is_power_of_two() {
            return Err(Error::BadLength(len, 8));
        }
        let n = len.trailing_zeros();
        if n > MAX_WIDTH {
            return Err(Error::BadWidth(n, 3, MAX_WIDTH));
        }
        let m = m.unwrap_or(n);
        if !(1..=MAX_WIDTH).contains(&m) {
            return Err(Error::BadWidth(m, 1, MAX_WIDTH));
        }
        let mut table = Vec::with_capacity(len);
        for (index, v) in values.into_iter().enumerate() {
            if v >> m != 0 {
                return Err(Error::ValueOutOfRange { index, value: v, bits: m });
            }
            table.push(v as u8);
        }
        SBox::new(n, m, table)
    }

    /// Space-separated decimal outputs, as accepted by [`SBox::parse`].
    pub fn to_text(&self) -> String {
        let parts: Vec<String> = self.table.iter().map(|v| v.to_string()).collect();
        parts.join(" ")
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Number of inputs, 2^n.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn table(&self) -> &[u8] {
        &self.table
    }

    #[inline]
    pub fn get(&self, x: usize) -> usize {
        self.table[x] as usize
    }

    pub fn into_table(self) -> Vec<u8> {
        self.table
    }

    pub fn is_bijective(&self) -> bool {
        if self.n != self.m {
            return false;
        }
        let mut seen = vec![false; self.len()];
        for &v in &self.table {
            if std::mem::replace(&mut seen[v as usize], true) {
                return false;
            }
        }
        true
    }

    /// Every output value occurs exactly 2^(n-m) times.
    pub fn is_balanced(&self) -> bool {
        if self.m > self.n {
            return false;
        }
        let mut counts = vec![0usize; 1 << self.m];
        for &v in &self.table {
            counts[v as usize] += 1;
        }
        let want = 1usize << (self.n - self.m);
        counts.iter().all(|&c| c == want)
    }

    pub fn inverse(&self) -> Option<SBox> {
        if !self.is_bijective() {
            return None;
        }
        let mut inv = vec![0u8; self.len()];
        for (x, &y) in self.table.iter().enumerate() {
            inv[y as usize] = x as u8;
        }
        Some(SBox { n: self.n, m: self.m, table: inv })
    }

    /// Position holding output `y`, if any.
    pub fn preimage(&self, y: usize) -> Option<usize> {
        self.table.iter().position(|&v| v as usize == y)
    }

    /// Returns the box with outputs at `a` and `b` exchanged.
    pub fn swap_move(&self, a: usize, b: usize) -> Result<SBox> {
        let mut out = self.clone();
        out.swap_in_place(a, b)?;
        Ok(out)
    }

    pub fn swap_in_place(&mut self, a: usize, b: usize) -> Result<()> {
        let len = self.len();
        if a >= len {
            return Err(Error::IndexOutOfRange(a, len));
        }
        if b >= len {
            return Err(Error::IndexOutOfRange(b, len));
        }
        if a == b {
            return Err(Error::SameIndex(a));
        }
        self.table.swap(a, b);
        Ok(())
    }

    /// Unchecked swap for inner search loops.
    #[inline]
    pub(crate) fn swap_unchecked(&mut self, a: usize, b: usize) {
        self.table.swap(a, b);
    }

    /// Uniformly random permutation of `[0, 2^n)` from a seeded shuffle.
    pub fn random_bijection(n: u32, seed: u64) -> Result<SBox> {
        let mut rng = rng::seeded(seed);
        Self::random_bijection_with(n, &mut rng)
    }

    pub fn random_bijection_with<R: rand::Rng + ?Sized>(n: u32, rng: &mut R) -> Result<SBox> {
        if !(3..=MAX_WIDTH).contains(&n) {
            return Err(Error::BadWidth(n, 3, MAX_WIDTH));
        }
        let mut table: Vec<u8> = (0..1usize << n).map(|x| x as u8).collect();
        table.shuffle(rng);
        Ok(SBox { n, m: n, table })
    }

    /// `result(x) = A·S(B·(x ⊕ in_xor)) ⊕ out_xor`, with absent matrices
    /// treated as the identity.
    pub fn apply_affine(
        &self,
        out_matrix: Option<&BitMatrix>,
        in_matrix: Option<&BitMatrix>,
        out_xor: usize,
        in_xor: usize,
    ) -> Result<SBox> {
        for (mat, width) in [(out_matrix, self.m), (in_matrix, self.n)] {
            if let Some(mat) = mat {
                if mat.rows() != width as usize || mat.cols() != width as usize {
                    return Err(Error::Dimension(format!(
                        "expected a {width}x{width} matrix, got {}x{}",
                        mat.rows(),
                        mat.cols()
                    )));
                }
                if !mat.is_invertible() {
                    return Err(Error::NotInvertible);
                }
            }
        }
        if in_xor >= self.len() || out_xor >> self.m != 0 {
            return Err(Error::Dimension("xor constant wider than the box".into()));
        }
        let table = (0..self.len())
            .map(|x| {
                let xi = x ^ in_xor;
                let xi = in_matrix.map_or(xi, |b| b.apply(xi as u32) as usize);
                let y = self.get(xi);
                let y = out_matrix.map_or(y, |a| a.apply(y as u32) as usize);
                (y ^ out_xor) as u8
            })
            .collect();
        Ok(SBox { n: self.n, m: self.m, table })
    }
}

impl fmt::Debug for SBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SBox<{}x{}>{:?}", self.n, self.m, self.table)
    }
}

impl fmt::Display for SBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
