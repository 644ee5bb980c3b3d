//! Difference, linear and autocorrelation tables and the metrics derived
//! from them. All arithmetic is exact.

use serde::{Deserialize, Serialize};

use crate::gf2::parity;
use crate::sbox::SBox;

/// Row-major integer table with `2^n` rows and `2^m` columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Table<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Table { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Entries other than (0, 0).
    pub fn nontrivial(&self) -> impl Iterator<Item = T> + '_ {
        self.data.iter().skip(1).copied()
    }

    /// Sorted copy of all entries.
    pub fn multiset(&self) -> Vec<T>
    where
        T: Ord,
    {
        let mut v = self.data.clone();
        v.sort_unstable();
        v
    }
}

pub type Ddt = Table<u32>;
pub type Lat = Table<i32>;
pub type Act = Table<i32>;

pub fn ddt(s: &SBox) -> Ddt {
    let rows = s.len();
    let cols = 1usize << s.m();
    let mut data = vec![0u32; rows * cols];
    let t = s.table();
    for x in 0..rows {
        let sx = t[x] as usize;
        for (i, row) in data.chunks_exact_mut(cols).enumerate() {
            row[sx ^ t[x ^ i] as usize] += 1;
        }
    }
    Table { rows, cols, data }
}

/// In-place unnormalized Walsh-Hadamard transform.
pub fn fwht(v: &mut [i32]) {
    let len = v.len();
    let mut h = 1;
    while h < len {
        for start in (0..len).step_by(2 * h) {
            for k in start..start + h {
                let (a, b) = (v[k], v[k + h]);
                v[k] = a + b;
                v[k + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Walsh spectra `W[i][j] = Σ_x (-1)^(i·x ⊕ j·S(x))`, stored row-major.
fn walsh_spectra(s: &SBox) -> Vec<i32> {
    let rows = s.len();
    let cols = 1usize << s.m();
    let mut out = vec![0i32; rows * cols];
    let mut buf = vec![0i32; rows];
    for j in 0..cols {
        for (x, b) in buf.iter_mut().enumerate() {
            *b = if parity((j & s.get(x)) as u32) == 0 { 1 } else { -1 };
        }
        fwht(&mut buf);
        for (i, &w) in buf.iter().enumerate() {
            out[i * cols + j] = w;
        }
    }
    out
}

/// `LAT[i][j] = #{x : i·x = j·S(x)} - 2^(n-1)`, via one fast Walsh-Hadamard
/// transform per output mask.
pub fn lat(s: &SBox) -> Lat {
    let rows = s.len();
    let cols = 1usize << s.m();
    let data = walsh_spectra(s).into_iter().map(|w| w / 2).collect();
    Table { rows, cols, data }
}

/// Autocorrelation table via the Wiener-Khintchine relation: the
/// autocorrelation of each component is the inverse transform of its
/// squared spectrum.
pub fn act(s: &SBox) -> Act {
    let rows = s.len();
    let cols = 1usize << s.m();
    let mut data = vec![0i32; rows * cols];
    let mut buf = vec![0i32; rows];
    for j in 0..cols {
        for (x, b) in buf.iter_mut().enumerate() {
            *b = if parity((j & s.get(x)) as u32) == 0 { 1 } else { -1 };
        }
        fwht(&mut buf);
        for b in buf.iter_mut() {
            *b *= *b;
        }
        fwht(&mut buf);
        for (i, &v) in buf.iter().enumerate() {
            data[i * cols + j] = v >> s.n();
        }
    }
    Table { rows, cols, data }
}

/// Largest entry other than (0,0) and its number of occurrences.
pub fn extremum_u32(t: &Ddt) -> (u32, u32) {
    let max = t.nontrivial().max().unwrap_or(0);
    (max, t.nontrivial().filter(|&v| v == max).count() as u32)
}

/// Largest absolute entry other than (0,0) and its number of occurrences.
pub fn extremum_abs(t: &Table<i32>) -> (u32, u32) {
    let max = t.nontrivial().map(i32::unsigned_abs).max().unwrap_or(0);
    (max, t.nontrivial().filter(|v| v.unsigned_abs() == max).count() as u32)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferentialProfile {
    pub ddt: Ddt,
    pub du: u32,
    pub df: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearProfile {
    pub lat: Lat,
    pub nl: u32,
    pub nf: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AutocorrelationProfile {
    pub act: Act,
    pub ac: u32,
    pub af: u32,
}

pub fn differential_profile(s: &SBox) -> DifferentialProfile {
    let ddt = ddt(s);
    let (du, df) = extremum_u32(&ddt);
    DifferentialProfile { ddt, du, df }
}

pub fn linear_profile(s: &SBox) -> LinearProfile {
    let lat = lat(s);
    let (max, nf) = extremum_abs(&lat);
    let nl = (1u32 << (s.n() - 1)).saturating_sub(max);
    LinearProfile { lat, nl, nf }
}

pub fn autocorrelation_profile(s: &SBox) -> AutocorrelationProfile {
    let act = act(s);
    let (ac, af) = extremum_abs(&act);
    AutocorrelationProfile { act, ac, af }
}

/// Algebraic normal form of a single-output Boolean function.
///
/// Coefficient `u` is set when the monomial `∏_{k ∈ u} x_{k+1}` appears,
/// where `u` is read as a bit mask over the input variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Anf {
    n: u32,
    coeffs: Vec<u8>,
}

impl Anf {
    pub fn coefficients(&self) -> &[u8] {
        &self.coeffs
    }

    pub fn monomials(&self) -> Vec<u32> {
        (0..self.coeffs.len() as u32).filter(|&u| self.coeffs[u as usize] == 1).collect()
    }

    /// Weight of the heaviest monomial; 0 for constant functions.
    pub fn degree(&self) -> u32 {
        self.monomials().iter().map(|u| u.count_ones()).max().unwrap_or(0)
    }

    pub fn n(&self) -> u32 {
        self.n
    }
}

/// Binary Möbius transform (in place). The transform is its own inverse.
pub fn mobius(v: &mut [u8]) {
    let len = v.len();
    let mut h = 1;
    while h < len {
        for start in (0..len).step_by(2 * h) {
            for k in start..start + h {
                v[k + h] ^= v[k];
            }
        }
        h *= 2;
    }
}

/// ANF of a truth table of length `2^n` with entries in {0, 1}.
pub fn anf(truth: &[u8]) -> Anf {
    assert!(truth.len().is_power_of_two(), "truth table length must be a power of two");
    assert!(truth.iter().all(|&b| b <= 1), "truth table entries must be 0 or 1");
    let mut coeffs = truth.to_vec();
    mobius(&mut coeffs);
    Anf { n: truth.len().trailing_zeros(), coeffs }
}

/// Truth table of the component `x ↦ j·S(x)`.
pub fn component(s: &SBox, mask: usize) -> Vec<u8> {
    (0..s.len()).map(|x| parity((mask & s.get(x)) as u32) as u8).collect()
}

/// Maximum algebraic degree over all nonzero output masks.
pub fn vectorial_degree(s: &SBox) -> u32 {
    (1..1usize << s.m()).map(|j| anf(&component(s, j)).degree()).max().unwrap_or(0)
}

/// Checks `H_n · DDT · H_m = (2·LAT)^2` entrywise with explicit integer
/// matrix products.
pub fn verify_hadamard_relation(s: &SBox) -> bool {
    let d = ddt(s);
    let l = lat(s);
    let rows = d.rows();
    let cols = d.cols();
    let sign = |a: usize, b: usize| -> i64 { if parity((a & b) as u32) == 0 { 1 } else { -1 } };
    let mut hd = vec![0i64; rows * cols];
    for i in 0..rows {
        for k in 0..rows {
            let h = sign(i, k);
            for j in 0..cols {
                hd[i * cols + j] += h * d.get(k, j) as i64;
            }
        }
    }
    for i in 0..rows {
        for j in 0..cols {
            let c: i64 = (0..cols).map(|k| hd[i * cols + k] * sign(k, j)).sum();
            let want = 2 * l.get(i, j) as i64;
            if c != want * want {
                return false;
            }
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentReport {
    pub sum_ddt_squares: u64,
    pub sum_lat_fourths: u64,
    /// `Σlat⁴ / Σddt²` when the division is exact.
    pub ratio: Option<u64>,
}

impl MomentReport {
    /// `log2(ratio)` when the ratio is an exact power of two.
    pub fn ratio_log2(&self) -> Option<u32> {
        self.ratio.filter(|r| r.is_power_of_two()).map(|r| r.trailing_zeros())
    }
}

/// Sum of squared DDT entries, sum of fourth powers of LAT entries, and
/// their ratio. Bijective boxes always give `2^(2n-4)`.
pub fn moment_ratio(s: &SBox) -> MomentReport {
    let sum_ddt_squares = ddt(s).data().iter().map(|&v| (v as u64).pow(2)).sum::<u64>();
    let sum_lat_fourths = lat(s).data().iter().map(|&v| (v.unsigned_abs() as u64).pow(4)).sum::<u64>();
    let ratio = (sum_lat_fourths % sum_ddt_squares == 0).then(|| sum_lat_fourths / sum_ddt_squares);
    MomentReport { sum_ddt_squares, sum_lat_fourths, ratio }
}

/// Scalar metrics of a box without the full tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub du: u32,
    pub df: u32,
    pub nl: u32,
    pub nf: u32,
    pub ac: u32,
    pub af: u32,
    pub degree: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalysisProfile {
    pub ddt: Ddt,
    pub lat: Lat,
    pub act: Act,
    pub metrics: Metrics,
}

impl AnalysisProfile {
    pub fn of(s: &SBox) -> Self {
        let d = differential_profile(s);
        let l = linear_profile(s);
        let a = autocorrelation_profile(s);
        let metrics = Metrics {
            du: d.du,
            df: d.df,
            nl: l.nl,
            nf: l.nf,
            ac: a.ac,
            af: a.af,
            degree: vectorial_degree(s),
        };
        AnalysisProfile { ddt: d.ddt, lat: l.lat, act: a.act, metrics }
    }
}

pub fn metrics(s: &SBox) -> Metrics {
    AnalysisProfile::of(s).metrics
}

/// Definition-level table builders, kept independent of the fast paths so
/// they can serve as oracles.
pub mod reference {
    use super::Table;
    use crate::sbox::SBox;

    fn dot(a: usize, b: usize) -> u32 {
        (a & b).count_ones() % 2
    }

    pub fn ddt(s: &SBox) -> Table<u32> {
        let rows = s.len();
        let cols = 1usize << s.m();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push((0..rows).filter(|&x| s.get(x) ^ s.get(x ^ i) == j).count() as u32);
            }
        }
        Table::from_vec(rows, cols, data)
    }

    pub fn lat(s: &SBox) -> Table<i32> {
        let rows = s.len();
        let cols = 1usize << s.m();
        let half = (rows / 2) as i32;
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let agree = (0..rows).filter(|&x| dot(i, x) == dot(j, s.get(x))).count() as i32;
                data.push(agree - half);
            }
        }
        Table::from_vec(rows, cols, data)
    }

    pub fn act(s: &SBox) -> Table<i32> {
        let rows = s.len();
        let cols = 1usize << s.m();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let same = (0..rows).filter(|&x| dot(j, s.get(x)) == dot(j, s.get(x ^ i))).count() as i32;
                data.push(same - (rows as i32 - same));
            }
        }
        Table::from_vec(rows, cols, data)
    }

    /// ANF coefficients from the subset-sum definition `a_u = ⊕_{x ⊆ u} f(x)`.
    pub fn anf(truth: &[u8]) -> Vec<u8> {
        (0..truth.len())
            .map(|u| (0..truth.len()).filter(|&x| x & u == x).fold(0u8, |acc, x| acc ^ truth[x]))
            .collect()
    }

    /// Direct count of DU/DF over (i,j) != (0,0).
    pub fn du_df(s: &SBox) -> (u32, u32) {
        let mut best = 0;
        let mut freq = 0;
        let n = s.len();
        for i in 0..n {
            for j in 0..1usize << s.m() {
                if i == 0 && j == 0 {
                    continue;
                }
                let c = (0..n).filter(|&x| s.get(x) ^ s.get(x ^ i) == j).count() as u32;
                if c > best {
                    best = c;
                    freq = 1;
                } else if c == best {
                    freq += 1;
                }
            }
        }
        (best, freq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn identity_n2_tables() {
        let id = SBox::identity(2);
        let d = differential_profile(&id);
        for i in 0..4 {
            assert_eq!(d.ddt.row(i), &{
                let mut r = [0u32; 4];
                r[i] = 4;
                r
            });
        }
        assert_eq!((d.du, d.df), (4, 3));
        let l = linear_profile(&id);
        assert_eq!(l.nl, 0);
        for i in 0..4 {
            assert_eq!(l.lat.get(i, i), 2);
        }
        let a = autocorrelation_profile(&id);
        assert!(a.act.data().iter().all(|v| v.abs() == 4));
        assert_eq!(a.ac, 4);
    }

    #[test]
    fn act_zero_column_is_full() {
        let s = SBox::random_bijection(5, 11).unwrap();
        let a = act(&s);
        for i in 0..32 {
            assert_eq!(a.get(i, 0), 32);
        }
    }

    #[test]
    fn ctc_matches_reference() {
        let s = fixtures::ctc();
        assert_eq!(ddt(&s), reference::ddt(&s));
        assert_eq!(lat(&s), reference::lat(&s));
        assert_eq!(act(&s), reference::act(&s));
        let d = differential_profile(&s);
        assert_eq!((d.du, d.df), reference::du_df(&s));
        assert!(verify_hadamard_relation(&s));
    }

    #[test]
    fn known_power_maps() {
        let gold = fixtures::power_map(5, 3).unwrap();
        assert_eq!(differential_profile(&gold).du, 2);
        assert_eq!(linear_profile(&gold).nl, 12);
        assert_eq!(vectorial_degree(&gold), 2);
        let inv = fixtures::power_map(5, -1).unwrap();
        assert_eq!(differential_profile(&inv).du, 2);
        assert_eq!(linear_profile(&inv).nl, 10);
        assert_eq!(vectorial_degree(&inv), 4);
        let aes = fixtures::aes();
        assert_eq!(differential_profile(&aes).du, 4);
        assert_eq!(linear_profile(&aes).nl, 112);
    }

    #[test]
    fn anf_examples() {
        let zero = anf(&[0; 16]);
        assert!(zero.monomials().is_empty());
        assert_eq!(zero.degree(), 0);
        // x1 x2 on two variables: only the input 11 evaluates to 1.
        let and = anf(&[0, 0, 0, 1]);
        assert_eq!(and.monomials(), vec![0b11]);
        // 1 + x2 + x1 + x3x4 + x1x4 + x1x3 + x1x3x4 + x1x2x4, variable x_k on bit k-1.
        let monos: [u32; 8] = [0, 0b0010, 0b0001, 0b1100, 0b1001, 0b0101, 0b1101, 0b1011];
        let truth: Vec<u8> = (0..16u32)
            .map(|x| monos.iter().fold(0u8, |acc, &m| acc ^ (x & m == m) as u8))
            .collect();
        let f = anf(&truth);
        let mut want = monos.to_vec();
        want.sort_unstable();
        assert_eq!(f.monomials(), want);
        assert_eq!(f.degree(), 3);
    }

    #[test]
    fn identity_degree_and_moments() {
        assert_eq!(vectorial_degree(&SBox::identity(4)), 1);
        let m = moment_ratio(&SBox::identity(2));
        assert_eq!((m.sum_ddt_squares, m.sum_lat_fourths, m.ratio), (64, 64, Some(1)));
        let r = moment_ratio(&SBox::random_bijection(3, 8).unwrap());
        assert_eq!(r.ratio, Some(4));
    }
}
