//! Known S-boxes: power maps over GF(2^n) and published constant tables.

use crate::error::{Error, Result};
use crate::sbox::SBox;

/// Irreducible reduction polynomials used for field fixtures, indexed by n.
/// Bit `k` is the coefficient of `x^k`.
pub const DEFAULT_POLYNOMIALS: [(u32, u32); 6] = [
    (3, 0b1011),      // x^3 + x + 1
    (4, 0b1_0011),    // x^4 + x + 1
    (5, 0b10_0101),   // x^5 + x^2 + 1
    (6, 0b100_0011),  // x^6 + x + 1
    (7, 0b1000_0011), // x^7 + x + 1
    (8, 0x11B),       // x^8 + x^4 + x^3 + x + 1
];

pub fn default_polynomial(n: u32) -> Option<u32> {
    DEFAULT_POLYNOMIALS.iter().find(|(w, _)| *w == n).map(|&(_, p)| p)
}

/// The 3-bit box of the Courtois toy cipher.
pub const CTC: [u8; 8] = [7, 6, 0, 4, 2, 5, 1, 3];

/// The AES S-box.
pub const AES: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

pub fn ctc() -> SBox {
    SBox::from_table(CTC.to_vec()).expect("constant table")
}

pub fn aes() -> SBox {
    SBox::from_table(AES.to_vec()).expect("constant table")
}

/// Multiplication in GF(2)[x] modulo `poly`, with `n = deg(poly)`.
pub fn gf_mul(a: u32, b: u32, poly: u32, n: u32) -> u32 {
    let mut a = a;
    let mut b = b;
    let mut acc = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a >> n & 1 == 1 {
            a ^= poly;
        }
    }
    acc
}

pub fn gf_pow(base: u32, mut exp: u64, poly: u32, n: u32) -> u32 {
    let mut result = 1;
    let mut b = base;
    while exp > 0 {
        if exp & 1 == 1 {
            result = gf_mul(result, b, poly, n);
        }
        b = gf_mul(b, b, poly, n);
        exp >>= 1;
    }
    result
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `x ↦ x^exponent` over GF(2^n) with the given reduction polynomial.
///
/// Exponent `-1` selects the inversion map with `0 ↦ 0`. A polynomial whose
/// degree is not `n`, or one that yields a non-bijective map for an exponent
/// coprime to `2^n - 1`, is rejected as reducible.
pub fn gf_power_map(n: u32, exponent: i64, poly: u32) -> Result<SBox> {
    if !(1..=crate::sbox::MAX_WIDTH).contains(&n) {
        return Err(Error::BadWidth(n, 1, crate::sbox::MAX_WIDTH));
    }
    if poly >> n != 1 {
        return Err(Error::ReduciblePolynomial(poly, n));
    }
    let order = (1u64 << n) - 1;
    let exp = match exponent {
        -1 => order - 1,
        e if e >= 0 => e as u64,
        e => return Err(Error::InvalidParam(format!("exponent {e} is not supported"))),
    };
    let table: Vec<u8> = (0..1u32 << n)
        .map(|x| if x == 0 && exp != 0 { 0 } else { gf_pow(x, exp, poly, n) as u8 })
        .collect();
    let sbox = SBox::new(n, n, table)?;
    let coprime = exponent == -1 || gcd(exp % order, order) == 1 || (order == 1 && exp > 0);
    if coprime && exp != 0 && !sbox.is_bijective() {
        return Err(Error::ReduciblePolynomial(poly, n));
    }
    // Inversion: the map must also be an involution on the field.
    if exponent == -1 && (1..1u32 << n).any(|x| gf_mul(x, sbox.get(x as usize) as u32, poly, n) != 1) {
        return Err(Error::ReduciblePolynomial(poly, n));
    }
    Ok(sbox)
}

/// Power map with the library's default polynomial for `n`.
pub fn power_map(n: u32, exponent: i64) -> Result<SBox> {
    let poly = default_polynomial(n).ok_or(Error::BadWidth(n, 3, 8))?;
    gf_power_map(n, exponent, poly)
}
